//! Sign quantization of unit vectors against a randomly rotated hypercube
//! codebook, and the unbiased inner-product estimator built on it.
//!
//! A unit vector `x` maps to the codeword `xbar = P s / sqrt(d)` with
//! `s_i = sign((P^T x)_i)`. For a unit query `q`, `<xbar, q> / <xbar, x>`
//! estimates `<x, q>` without bias, and its error concentrates within
//! `sqrt((1 - <xbar,x>^2) / <xbar,x>^2) * eps0 / sqrt(d - 1)`.
//!
//! Queries are scalar-quantized to `B_q` bits per coordinate and split into
//! bitplanes, so `<xbar, q>` reduces to `B_q + 1` popcounts per code.

use crate::error::{check_dim, MrqError, Result};
use crate::rotation::RandomRotation;

pub const DEFAULT_EPSILON0: f32 = 1.9;
pub const DEFAULT_C0: f32 = 0.5;
pub const DEFAULT_QUERY_BITS: u32 = 4;

#[inline]
pub fn words_for(dim: usize) -> usize {
    dim.div_ceil(64)
}

/// `d` sign bits packed into 64-bit words, bit `i` at word `i / 64`,
/// position `i % 64`. Bits past `d` are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryCode {
    dim: usize,
    words: Vec<u64>,
}

impl BinaryCode {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            words: vec![0; words_for(dim)],
        }
    }

    pub fn ones(dim: usize) -> Self {
        let mut c = Self::zeros(dim);
        for i in 0..dim {
            c.set(i);
        }
        c
    }

    pub fn from_words(dim: usize, words: Vec<u64>) -> Result<Self> {
        check_dim(words_for(dim), words.len())?;
        let code = Self { dim, words };
        if !dim.is_multiple_of(64) {
            if let Some(last) = code.words.last() {
                if last >> (dim % 64) != 0 {
                    return Err(MrqError::config("code has bits set beyond its dimension"));
                }
            }
        }
        Ok(code)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }
}

/// Quantizer parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantizerConfig {
    /// Bits per vector, equal to the quantized head dimension.
    pub d: usize,
    /// Bound multiplier: larger values widen the confidence interval.
    pub epsilon0: f32,
    /// Concentration constant in the failure probability `2 exp(-c0 eps0^2)`.
    pub c0: f32,
    /// Bits per query coordinate, 1 to 8.
    pub query_bits: u32,
}

impl QuantizerConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            epsilon0: DEFAULT_EPSILON0,
            c0: DEFAULT_C0,
            query_bits: DEFAULT_QUERY_BITS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(MrqError::config(
                "quantization dimension must be at least 1",
            ));
        }
        if !(self.epsilon0 > 0.0) {
            return Err(MrqError::config("epsilon0 must be positive"));
        }
        if !(1..=8).contains(&self.query_bits) {
            return Err(MrqError::config("query_bits must be in 1..=8"));
        }
        Ok(())
    }

    /// Nominal probability that an estimate leaves its bound.
    pub fn failure_probability(&self) -> f64 {
        let e = self.epsilon0 as f64;
        (2.0 * (-(self.c0 as f64) * e * e).exp()).min(1.0)
    }
}

/// Per-code scalars stored next to each binary code.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodeFactors {
    /// `<xbar, x>`, in `(0, 1]`.
    pub denom: f32,
    /// `sqrt((1 - denom^2) / denom^2) / sqrt(d - 1)`; zero when `d == 1`.
    pub err_coeff: f32,
}

impl CodeFactors {
    /// Factors of an exactly representable vector.
    pub const EXACT: CodeFactors = CodeFactors {
        denom: 1.0,
        err_coeff: 0.0,
    };

    pub fn from_denom(denom: f32, d: usize) -> Self {
        let denom = denom.min(1.0);
        let err_coeff = if d < 2 {
            0.0
        } else {
            let dn = denom as f64;
            (((1.0 - dn * dn).max(0.0) / (dn * dn)).sqrt() / ((d - 1) as f64).sqrt()) as f32
        };
        Self { denom, err_coeff }
    }
}

/// Sign-quantizes the unit vector `x_b` in the rotated codebook.
pub fn quantize_vector(x_b: &[f32], rot: &RandomRotation) -> Result<(BinaryCode, CodeFactors)> {
    check_dim(rot.dim(), x_b.len())?;
    let norm = x_b.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(MrqError::ZeroVector);
    }
    let y = rot.apply_transpose(x_b)?;
    let d = y.len();
    let mut code = BinaryCode::zeros(d);
    let mut abs_sum = 0f64;
    for (i, &v) in y.iter().enumerate() {
        if v >= 0.0 {
            code.set(i);
        }
        abs_sum += (v as f64).abs();
    }
    // <xbar, x> = sum_i |y_i| / sqrt(d), normalized by |x| in case the caller's
    // vector is only unit up to rounding.
    let denom = (abs_sum / ((d as f64).sqrt() * norm)) as f32;
    Ok((code, CodeFactors::from_denom(denom, d)))
}

/// A rotated query quantized to `2^bits` uniform levels between its minimum
/// and maximum coordinate: `qtilde_i = lo + delta * level_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedQuery {
    dim: usize,
    /// Plane `p` holds bit `p` of every level.
    bitplanes: Vec<Vec<u64>>,
    lo: f32,
    delta: f32,
    sum_levels: u32,
}

impl QuantizedQuery {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> u32 {
        self.bitplanes.len() as u32
    }

    pub fn lo(&self) -> f32 {
        self.lo
    }

    pub fn delta(&self) -> f32 {
        self.delta
    }

    pub fn sum_levels(&self) -> u32 {
        self.sum_levels
    }

    pub fn bitplane(&self, p: usize) -> &[u64] {
        &self.bitplanes[p]
    }

    pub fn level(&self, i: usize) -> u32 {
        self.bitplanes
            .iter()
            .enumerate()
            .map(|(p, plane)| ((plane[i / 64] >> (i % 64) & 1) as u32) << p)
            .sum()
    }

    /// The dequantized query `qtilde`.
    pub fn reconstruct(&self) -> Vec<f32> {
        (0..self.dim)
            .map(|i| self.lo + self.delta * self.level(i) as f32)
            .collect()
    }

    /// `<xbar, qtilde>` from popcounts, for a code of matching length.
    #[inline]
    pub(crate) fn codeword_dot(&self, code: &[u64]) -> f32 {
        let ones: u32 = code.iter().map(|w| w.count_ones()).sum();
        let mut weighted = 0u64;
        for (p, plane) in self.bitplanes.iter().enumerate() {
            let c: u32 = plane
                .iter()
                .zip(code)
                .map(|(a, b)| (a & b).count_ones())
                .sum();
            weighted += (c as u64) << p;
        }
        // sum over set bits of qtilde, and over all coordinates.
        let selected = self.lo as f64 * ones as f64 + self.delta as f64 * weighted as f64;
        let total = self.lo as f64 * self.dim as f64 + self.delta as f64 * self.sum_levels as f64;
        ((2.0 * selected - total) / (self.dim as f64).sqrt()) as f32
    }
}

/// Rotates `q_b` into codebook coordinates and scalar-quantizes it.
pub fn quantize_query(q_b: &[f32], rot: &RandomRotation, bits: u32) -> Result<QuantizedQuery> {
    if !(1..=8).contains(&bits) {
        return Err(MrqError::config("query bits must be in 1..=8"));
    }
    check_dim(rot.dim(), q_b.len())?;
    let y = rot.apply_transpose(q_b)?;
    Ok(quantize_rotated_query(&y, bits))
}

/// Scalar quantization of an already rotated query.
pub(crate) fn quantize_rotated_query(y: &[f32], bits: u32) -> QuantizedQuery {
    let dim = y.len();
    let lo = y.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = y.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let max_level = (1u32 << bits) - 1;
    let delta = if hi > lo {
        (hi - lo) / max_level as f32
    } else {
        0.0
    };
    let words = words_for(dim);
    let mut bitplanes = vec![vec![0u64; words]; bits as usize];
    let mut sum_levels = 0u32;
    if delta > 0.0 {
        for (i, &v) in y.iter().enumerate() {
            let level = (((v - lo) / delta).round() as u32).min(max_level);
            sum_levels += level;
            for (p, plane) in bitplanes.iter_mut().enumerate() {
                if level >> p & 1 == 1 {
                    plane[i / 64] |= 1 << (i % 64);
                }
            }
        }
    }
    QuantizedQuery {
        dim,
        bitplanes,
        lo,
        delta,
        sum_levels,
    }
}

/// `<xbar_b, qtilde_b> / <xbar_b, x_b>`, the estimate of `<x_b, q_b>`.
pub fn estimate_inner_product(
    code: &BinaryCode,
    factors: CodeFactors,
    qq: &QuantizedQuery,
) -> Result<f32> {
    check_dim(qq.dim(), code.dim())?;
    Ok(qq.codeword_dot(code.words()) / factors.denom)
}

/// Half-width of the estimator's confidence interval at multiplier `epsilon0`.
pub fn quantization_error_bound(factors: CodeFactors, epsilon0: f32) -> Result<f32> {
    if !(epsilon0 > 0.0) {
        return Err(MrqError::config("epsilon0 must be positive"));
    }
    Ok(factors.err_coeff * epsilon0)
}
