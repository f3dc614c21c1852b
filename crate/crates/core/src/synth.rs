//! Seeded synthetic corpora for tests, benchmarks and the CLI.
//!
//! [`SpectralGaussian`] draws `x = mean + H_k ... H_1 diag(sqrt(lambda)) z`
//! with `z ~ N(0, I)` and a few random Householder reflections `H_i`, so the
//! covariance is dense but its spectrum is exactly `lambda`. The distribution
//! (spectrum, reflections, mean) is fixed by one seed and samples by another,
//! which lets corpus and queries come from the same distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Matrix;

pub const GIST_LIKE_DIM: usize = 960;
pub const GIST_LIKE_EXPONENT: f64 = 1.5;
pub const EMBED_LIKE_DIM: usize = 1536;
/// Share of the total variance carried by the leading third of an embed-like
/// spectrum.
pub const EMBED_LIKE_HEAD_ENERGY: f64 = 0.92;

const REFLECTIONS: usize = 4;

/// Uniformly random unit vector.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

/// Gaussian distribution with a prescribed covariance spectrum.
#[derive(Clone, Debug)]
pub struct SpectralGaussian {
    variances: Vec<f64>,
    mean: Vec<f64>,
    reflections: Vec<Vec<f64>>,
}

impl SpectralGaussian {
    /// `variances` need not be sorted or normalized.
    pub fn new(variances: Vec<f64>, seed: u64) -> Self {
        let dim = variances.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let reflections = (0..REFLECTIONS)
            .map(|_| {
                unit_vector(&mut rng, dim)
                    .into_iter()
                    .map(f64::from)
                    .collect()
            })
            .collect();
        Self {
            variances,
            mean,
            reflections,
        }
    }

    /// `lambda_i = i^-exponent`, `i = 1..=dim`.
    pub fn power_law(dim: usize, exponent: f64, seed: u64) -> Self {
        Self::new(power_law_spectrum(dim, exponent), seed)
    }

    pub fn isotropic(dim: usize, seed: u64) -> Self {
        Self::new(vec![1.0; dim], seed)
    }

    /// 960 dimensions with a `i^-1.5` spectrum.
    pub fn gist_like() -> Self {
        Self::power_law(GIST_LIKE_DIM, GIST_LIKE_EXPONENT, 0x6157)
    }

    /// 1536 dimensions; the leading third carries 92% of the variance.
    pub fn embed_like() -> Self {
        Self::new(
            head_heavy_spectrum(EMBED_LIKE_DIM, EMBED_LIKE_DIM / 3, EMBED_LIKE_HEAD_ENERGY),
            0xE4BE,
        )
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn sample(&self, n: usize, seed: u64) -> Matrix {
        let dim = self.dim();
        let sd: Vec<f64> = self.variances.iter().map(|v| v.sqrt()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::with_capacity(n * dim);
        let mut x = vec![0f64; dim];
        for _ in 0..n {
            for (xi, s) in x.iter_mut().zip(&sd) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *xi = z * s;
            }
            for v in &self.reflections {
                let p: f64 = 2.0 * v.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi -= p * vi;
                }
            }
            data.extend(x.iter().zip(&self.mean).map(|(a, m)| (a + m) as f32));
        }
        Matrix::new(n, dim, data).expect("sized by construction")
    }
}

pub fn power_law_spectrum(dim: usize, exponent: f64) -> Vec<f64> {
    (1..=dim).map(|i| (i as f64).powf(-exponent)).collect()
}

/// `1/i` decay over the first `head` dimensions and a flat tail, scaled so
/// the head holds `head_energy` of the total.
pub fn head_heavy_spectrum(dim: usize, head: usize, head_energy: f64) -> Vec<f64> {
    assert!(head >= 1 && head < dim);
    let harmonic: f64 = (1..=head).map(|i| 1.0 / i as f64).sum();
    let tail_each = (1.0 - head_energy) / (dim - head) as f64;
    (1..=dim)
        .map(|i| {
            if i <= head {
                head_energy / (i as f64 * harmonic)
            } else {
                tail_each
            }
        })
        .collect()
}

/// Smallest number of leading spectrum entries reaching `fraction` of the sum.
pub fn analytic_energy_level(spectrum: &[f64], fraction: f64) -> usize {
    let total: f64 = spectrum.iter().sum();
    let mut acc = 0.0;
    for (i, v) in spectrum.iter().enumerate() {
        acc += v;
        if acc >= fraction * total {
            return i + 1;
        }
    }
    spectrum.len()
}

/// Isotropic Gaussian blobs around `centers` random centers drawn uniformly
/// from `[-scale, scale]^dim`. Returns the data, the generating centers and
/// each row's blob label.
pub fn blobs(
    n: usize,
    dim: usize,
    centers: usize,
    scale: f32,
    spread: f32,
    seed: u64,
) -> (Matrix, Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f32> = (0..centers * dim)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % centers;
        labels.push(label);
        for j in 0..dim {
            let z: f32 = StandardNormal.sample(&mut rng);
            data.push(c[label * dim + j] + spread * z);
        }
    }
    (
        Matrix::new(n, dim, data).unwrap(),
        Matrix::new(centers, dim, c).unwrap(),
        labels,
    )
}
