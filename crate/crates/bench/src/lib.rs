//! Shared fixtures for the benchmarks.

use mrq_core::synth::SpectralGaussian;
use mrq_core::{IndexConfig, IvfIndex, Matrix};

pub struct Fixture {
    pub data: Matrix,
    pub queries: Matrix,
    pub index: IvfIndex,
}

/// A power-law corpus of `n` vectors in `dim` dimensions, indexed with a
/// `d`-dimensional head.
pub fn fixture(n: usize, dim: usize, d: usize, queries: usize) -> Fixture {
    let g = SpectralGaussian::power_law(dim, 1.5, 11);
    let data = g.sample(n, 1);
    let queries = g.sample(queries, 2);
    let config = IndexConfig {
        seed: 3,
        ..IndexConfig::new(d)
    };
    let index = IvfIndex::build(&data, &config).expect("fixture index");
    Fixture {
        data,
        queries,
        index,
    }
}
