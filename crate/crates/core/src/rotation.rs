use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, MrqError, Result};
use crate::linalg::{mat_t_vec, mat_vec};

/// Seeded Haar-random orthogonal matrix used to randomize the binary codebook.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomRotation {
    dim: usize,
    seed: u64,
    /// Row-major `dim x dim`.
    matrix: Vec<f32>,
}

impl RandomRotation {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &[f32] {
        &self.matrix
    }

    /// Wraps an existing matrix, e.g. one read back from disk.
    pub fn from_parts(dim: usize, seed: u64, matrix: Vec<f32>) -> Result<Self> {
        check_dim(dim * dim, matrix.len())?;
        Ok(Self { dim, seed, matrix })
    }

    /// Identity rotation, mostly useful for tests.
    pub fn identity(dim: usize) -> Self {
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = 1.0;
        }
        Self {
            dim,
            seed: 0,
            matrix,
        }
    }

    /// `M x`.
    pub fn apply(&self, x: &[f32]) -> Result<Vec<f32>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        mat_vec(&self.matrix, x, &mut out);
        Ok(out)
    }

    /// `M^T x`, the map from data space into codebook coordinates.
    pub fn apply_transpose(&self, x: &[f32]) -> Result<Vec<f32>> {
        check_dim(self.dim, x.len())?;
        let mut out = vec![0.0; self.dim];
        mat_t_vec(&self.matrix, x, &mut out);
        Ok(out)
    }
}

/// QR of a seeded standard-Gaussian matrix via modified Gram-Schmidt with one
/// re-orthogonalization pass. Gram-Schmidt yields a positive diagonal in R, so
/// Q is Haar distributed and a pure function of `(dim, seed)`.
pub fn random_orthogonal(dim: usize, seed: u64) -> Result<RandomRotation> {
    if dim == 0 {
        return Err(MrqError::config("rotation dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Column-major working copy: cols[j] is the j-th column of G.
    let mut cols: Vec<Vec<f64>> = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for col in cols.iter_mut() {
            col[i] = StandardNormal.sample(&mut rng);
        }
    }

    for j in 0..dim {
        let (done, rest) = cols.split_at_mut(j);
        let v = &mut rest[0];
        for _pass in 0..2 {
            for q in done.iter() {
                let proj: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-12 {
            // Probability zero for Gaussian input.
            return Err(MrqError::DegenerateData(
                "random matrix was numerically singular".into(),
            ));
        }
        for vi in v.iter_mut() {
            *vi /= norm;
        }
    }

    let mut matrix = vec![0f32; dim * dim];
    for (j, col) in cols.iter().enumerate() {
        for (i, x) in col.iter().enumerate() {
            matrix[i * dim + j] = *x as f32;
        }
    }
    Ok(RandomRotation { dim, seed, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_orthogonality_error(m: &[f32], dim: usize) -> f64 {
        let mut worst = 0f64;
        for i in 0..dim {
            for j in 0..dim {
                let mut s = 0f64;
                for k in 0..dim {
                    s += m[i * dim + k] as f64 * m[j * dim + k] as f64;
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    #[test]
    fn one_dimensional_is_plus_or_minus_one() {
        let r = random_orthogonal(1, 11).unwrap();
        assert_eq!(r.matrix()[0].abs(), 1.0);
    }

    #[test]
    fn seed_determinism() {
        let a = random_orthogonal(64, 7).unwrap();
        let b = random_orthogonal(64, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.matrix(), random_orthogonal(64, 8).unwrap().matrix());
    }

    #[test]
    fn orthogonality_within_tolerance() {
        let r = random_orthogonal(64, 7).unwrap();
        assert!(max_orthogonality_error(r.matrix(), 64) < 1e-4);
        let r = random_orthogonal(200, 1).unwrap();
        assert!(max_orthogonality_error(r.matrix(), 200) < 1e-4);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            random_orthogonal(0, 1),
            Err(MrqError::InvalidConfig(_))
        ));
    }

    #[test]
    fn transpose_inverts_apply() {
        let r = random_orthogonal(16, 5).unwrap();
        let x: Vec<f32> = (0..16).map(|i| i as f32 - 7.5).collect();
        let back = r.apply_transpose(&r.apply(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!(r.apply(&[1.0]).is_err());
    }
}
