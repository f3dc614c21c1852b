//! PCA projection: training, rotation, and the `MRQPCA01` binary format.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{self, ByteReader};
use crate::eigen::jacobi_eigen;
use crate::error::{check_dim, MrqError, Result};
use crate::linalg::{mat_vec, Matrix};

pub const PCA_MAGIC: &[u8; 8] = b"MRQPCA01";

/// Rows beyond this are uniformly subsampled before covariance accumulation.
pub const DEFAULT_SAMPLE_LIMIT: usize = 100_000;
pub const SUBSAMPLE_SEED: u64 = 42;

const BLOCK_ROWS: usize = 64;

/// Orthogonal projection onto the principal axes of a corpus.
///
/// `rotation` is row-major `D x D` with rows ordered by descending
/// eigenvalue. `variances[i]` is the variance of coordinate `i` after
/// rotation, i.e. the `i`-th eigenvalue of the sample covariance
/// (divisor `N - 1`).
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    mean: Vec<f32>,
    rotation: Vec<f32>,
    variances: Vec<f32>,
}

impl PcaModel {
    pub fn from_parts(mean: Vec<f32>, rotation: Vec<f32>, variances: Vec<f32>) -> Result<Self> {
        let dim = mean.len();
        check_dim(dim * dim, rotation.len())?;
        check_dim(dim, variances.len())?;
        Ok(Self {
            mean,
            rotation,
            variances,
        })
    }

    /// Zero mean and identity rotation with the given variances.
    pub fn identity(variances: Vec<f32>) -> Self {
        let dim = variances.len();
        let mut rotation = vec![0.0; dim * dim];
        for i in 0..dim {
            rotation[i * dim + i] = 1.0;
        }
        Self {
            mean: vec![0.0; dim],
            rotation,
            variances,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn rotation(&self) -> &[f32] {
        &self.rotation
    }

    pub fn variances(&self) -> &[f32] {
        &self.variances
    }

    /// `rotation * (v - mean)`.
    pub fn rotate(&self, v: &[f32]) -> Result<Vec<f32>> {
        let mut out = vec![0.0; self.dim()];
        self.rotate_leading(v, &mut out)?;
        Ok(out)
    }

    /// Writes the first `out.len()` rotated coordinates of `v`.
    pub fn rotate_leading(&self, v: &[f32], out: &mut [f32]) -> Result<()> {
        check_dim(self.dim(), v.len())?;
        if out.len() > self.dim() {
            return Err(MrqError::config(format!(
                "cannot take {} leading coordinates of a {}-dimensional model",
                out.len(),
                self.dim()
            )));
        }
        let centered = self.center(v);
        mat_vec(&self.rotation[..out.len() * self.dim()], &centered, out);
        Ok(())
    }

    /// Rotated coordinates `start..start + out.len()` of an already centered
    /// vector.
    pub(crate) fn project_centered(&self, centered: &[f32], start: usize, out: &mut [f32]) {
        let dim = self.dim();
        mat_vec(
            &self.rotation[start * dim..(start + out.len()) * dim],
            centered,
            out,
        );
    }

    /// `v - mean`.
    pub fn center(&self, v: &[f32]) -> Vec<f32> {
        v.iter().zip(&self.mean).map(|(x, m)| x - m).collect()
    }

    pub fn total_variance(&self) -> f64 {
        self.variances.iter().map(|&v| v as f64).sum()
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(PCA_MAGIC)?;
        codec::put_u32(w, self.dim() as u32)?;
        codec::put_f32s(w, &self.mean)?;
        codec::put_f32s(w, &self.rotation)?;
        codec::put_f32s(w, &self.variances)?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * (self.rotation.len() + 2 * self.dim()));
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let model = Self::read(&mut r)?;
        if r.remaining() != 0 {
            return Err(MrqError::format(
                r.position(),
                "trailing bytes after PCA model",
            ));
        }
        Ok(model)
    }

    pub(crate) fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let magic = r.magic()?;
        if &magic != PCA_MAGIC {
            return Err(MrqError::VersionMismatch {
                expected: codec::magic_str(PCA_MAGIC),
                expected_version: 1,
                found: codec::magic_str(&magic),
                found_version: 0,
            });
        }
        let dim = r.u32()? as usize;
        let mean = r.f32s(dim)?;
        let rotation = r.f32s(
            dim.checked_mul(dim)
                .ok_or_else(|| MrqError::format(r.position(), "dimension overflow"))?,
        )?;
        let variances = r.f32s(dim)?;
        Self::from_parts(mean, rotation, variances)
    }
}

/// Trains the PCA projection on `data`, subsampling uniformly (seed 42)
/// down to `sample_limit` rows.
pub fn train_pca(data: &Matrix, sample_limit: usize) -> Result<PcaModel> {
    if sample_limit < 2 {
        return Err(MrqError::config("sample_limit must be at least 2"));
    }
    if data.rows() < 2 {
        return Err(MrqError::DegenerateData(format!(
            "need at least 2 rows to train PCA, got {}",
            data.rows()
        )));
    }
    if data.cols() == 0 {
        return Err(MrqError::DegenerateData("zero-dimensional data".into()));
    }
    let sample: Vec<usize> = if data.rows() > sample_limit {
        let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
        let mut idx = rand::seq::index::sample(&mut rng, data.rows(), sample_limit).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..data.rows()).collect()
    };

    let dim = data.cols();
    let (mean, cov) = covariance(data, &sample);
    let trace: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
    if !(trace > 0.0) {
        return Err(MrqError::DegenerateData(
            "all sampled rows are identical (zero total variance)".into(),
        ));
    }

    let eig = jacobi_eigen(cov, dim);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.values[b].total_cmp(&eig.values[a]).then(a.cmp(&b)));

    let mut rotation = Vec::with_capacity(dim * dim);
    let mut variances = Vec::with_capacity(dim);
    for &i in &order {
        rotation.extend(
            eig.vectors[i * dim..(i + 1) * dim]
                .iter()
                .map(|&x| x as f32),
        );
        variances.push(eig.values[i].max(0.0) as f32);
    }
    // f32 rounding can break the exact ordering of near-equal eigenvalues.
    for i in 1..dim {
        if variances[i] > variances[i - 1] {
            variances[i] = variances[i - 1];
        }
    }
    Ok(PcaModel {
        mean: mean.into_iter().map(|m| m as f32).collect(),
        rotation,
        variances,
    })
}

/// Two-pass mean and unbiased covariance of the selected rows, in `f64`.
fn covariance(data: &Matrix, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let dim = data.cols();
    let mut mean = vec![0f64; dim];
    for &r in rows {
        for (m, &x) in mean.iter_mut().zip(data.row(r)) {
            *m += x as f64;
        }
    }
    let n = rows.len() as f64;
    for m in mean.iter_mut() {
        *m /= n;
    }

    let mut cov = vec![0f64; dim * dim];
    let mut block = vec![0f64; BLOCK_ROWS * dim];
    for chunk in rows.chunks(BLOCK_ROWS) {
        for (b, &r) in chunk.iter().enumerate() {
            let dst = &mut block[b * dim..(b + 1) * dim];
            for ((d, &x), m) in dst.iter_mut().zip(data.row(r)).zip(&mean) {
                *d = x as f64 - m;
            }
        }
        let block = &block[..chunk.len() * dim];
        // Upper triangle, one covariance row at a time so it stays in cache.
        for i in 0..dim {
            let cov_row = &mut cov[i * dim + i..(i + 1) * dim];
            for x in block.chunks_exact(dim) {
                let xi = x[i];
                if xi == 0.0 {
                    continue;
                }
                for (c, &xj) in cov_row.iter_mut().zip(&x[i..]) {
                    *c += xi * xj;
                }
            }
        }
    }
    let denom = n - 1.0;
    for i in 0..dim {
        for j in i..dim {
            let v = cov[i * dim + j] / denom;
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    (mean, cov)
}

/// Fraction of the total variance captured by the leading `d` coordinates.
pub fn energy_fraction(model: &PcaModel, d: usize) -> f64 {
    let total = model.total_variance();
    let head: f64 = model.variances[..d.min(model.dim())]
        .iter()
        .map(|&v| v as f64)
        .sum();
    head / total
}
