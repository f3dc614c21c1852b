//! IVF index construction and the `MRQIVF01` file format.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::codec::{self, ByteReader};
use crate::distance::{MrqRecordMeta, DEFAULT_M};
use crate::error::{check_dim, MrqError, Result};
use crate::kmeans::{self, kmeans, DEFAULT_MAX_ITERS};
use crate::linalg::{dot, Matrix};
use crate::pca::{train_pca, PcaModel, DEFAULT_SAMPLE_LIMIT};
use crate::quant::{
    quantize_vector, words_for, BinaryCode, CodeFactors, QuantizerConfig, DEFAULT_C0,
    DEFAULT_EPSILON0, DEFAULT_QUERY_BITS,
};
use crate::rotation::{random_orthogonal, RandomRotation};

pub const INDEX_MAGIC: &[u8; 8] = b"MRQIVF01";
pub const INDEX_VERSION: u32 = 1;

/// Space in which vectors are clustered and clusters probed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CentroidSpace {
    /// `k x d` centroids over the rotated heads.
    #[default]
    Projected,
    /// `k x D` centroids over the original vectors; quantization still
    /// centers on the head of each centroid.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexConfig {
    /// Quantized head dimension.
    pub d: usize,
    /// Cluster count; `None` picks [`kmeans::default_k`].
    pub k: Option<usize>,
    pub epsilon0: f32,
    pub m: f32,
    pub c0: f32,
    pub query_bits: u32,
    pub seed: u64,
    pub max_iters: usize,
    pub pca_sample_limit: usize,
    pub centroid_space: CentroidSpace,
}

impl IndexConfig {
    pub fn new(d: usize) -> Self {
        Self {
            d,
            k: None,
            epsilon0: DEFAULT_EPSILON0,
            m: DEFAULT_M,
            c0: DEFAULT_C0,
            query_bits: DEFAULT_QUERY_BITS,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
            pca_sample_limit: DEFAULT_SAMPLE_LIMIT,
            centroid_space: CentroidSpace::Projected,
        }
    }

    pub fn quantizer(&self) -> QuantizerConfig {
        QuantizerConfig {
            d: self.d,
            epsilon0: self.epsilon0,
            c0: self.c0,
            query_bits: self.query_bits,
        }
    }

    fn validate(&self, n: usize, dim: usize) -> Result<usize> {
        self.quantizer().validate()?;
        if self.d > dim {
            return Err(MrqError::config(format!(
                "d = {} exceeds the data dimension {dim}",
                self.d
            )));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(MrqError::config("m must be positive and finite"));
        }
        let k = self.k.unwrap_or_else(|| kmeans::default_k(n));
        if k == 0 || k > n {
            return Err(MrqError::config(format!("k = {k} must lie in 1..={n}")));
        }
        Ok(k)
    }
}

/// Records of one inverted list, stored as parallel arrays.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClusterBlock {
    words: usize,
    d: usize,
    ids: Vec<u32>,
    codes: Vec<u64>,
    factors: Vec<CodeFactors>,
    dists: Vec<f32>,
    tail_norms: Vec<f32>,
    /// `x_d - c`, `d` floats per record.
    heads: Vec<f32>,
}

impl ClusterBlock {
    fn with_capacity(d: usize, n: usize) -> Self {
        let words = words_for(d);
        Self {
            words,
            d,
            ids: Vec::with_capacity(n),
            codes: Vec::with_capacity(n * words),
            factors: Vec::with_capacity(n),
            dists: Vec::with_capacity(n),
            tail_norms: Vec::with_capacity(n),
            heads: Vec::with_capacity(n * d),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    #[inline]
    pub fn code_words(&self, i: usize) -> &[u64] {
        &self.codes[i * self.words..(i + 1) * self.words]
    }

    pub fn code(&self, i: usize) -> BinaryCode {
        BinaryCode::from_words(self.d, self.code_words(i).to_vec()).expect("validated on insert")
    }

    #[inline]
    pub fn meta(&self, i: usize) -> MrqRecordMeta {
        MrqRecordMeta {
            dist_to_centroid: self.dists[i],
            tail_norm: self.tail_norms[i],
            factors: self.factors[i],
        }
    }

    /// Centered head `x_d - c` of record `i`.
    #[inline]
    pub fn head(&self, i: usize) -> &[f32] {
        &self.heads[i * self.d..(i + 1) * self.d]
    }

    fn push(&mut self, id: u32, rec: &Record) {
        self.ids.push(id);
        self.codes.extend_from_slice(&rec.code);
        self.factors.push(rec.factors);
        self.dists.push(rec.dist);
        self.tail_norms.push(rec.tail_norm);
        self.heads.extend_from_slice(&rec.head);
    }

    fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        codec::put_u32(w, self.len() as u32)?;
        codec::put_u32s(w, &self.ids)?;
        codec::put_u64s(w, &self.codes)?;
        let flat: Vec<f32> = self
            .factors
            .iter()
            .flat_map(|f| [f.denom, f.err_coeff])
            .collect();
        codec::put_f32s(w, &flat)?;
        codec::put_f32s(w, &self.dists)?;
        codec::put_f32s(w, &self.tail_norms)?;
        codec::put_f32s(w, &self.heads)
    }

    fn read(r: &mut ByteReader<'_>, d: usize) -> Result<Self> {
        let len = r.u32()? as usize;
        let words = words_for(d);
        let ids = r.u32s(len)?;
        let codes_at = r.position();
        let codes = r.u64s(len * words)?;
        let tail_mask = if d.is_multiple_of(64) {
            0
        } else {
            !0u64 << (d % 64)
        };
        for (i, rec) in codes.chunks(words.max(1)).enumerate() {
            if rec.last().is_some_and(|w| w & tail_mask != 0) {
                return Err(MrqError::format(
                    codes_at + (i * words + words - 1) * 8,
                    "code has bits set beyond d",
                ));
            }
        }
        let flat = r.f32s(2 * len)?;
        let factors = flat
            .chunks_exact(2)
            .map(|p| CodeFactors {
                denom: p[0],
                err_coeff: p[1],
            })
            .collect();
        Ok(Self {
            words,
            d,
            ids,
            codes,
            factors,
            dists: r.f32s(len)?,
            tail_norms: r.f32s(len)?,
            heads: r.f32s(len * d)?,
        })
    }
}

/// Per-vector build output before grouping into blocks.
struct Record {
    code: Vec<u64>,
    factors: CodeFactors,
    dist: f32,
    tail_norm: f32,
    head: Vec<f32>,
}

/// Projected head `x_d` and tail norm `|x_r|` of one vector.
pub(crate) fn project(pca: &PcaModel, d: usize, v: &[f32]) -> (Vec<f32>, f32) {
    let dim = pca.dim();
    let centered = pca.center(v);
    let mut head = vec![0.0; d];
    pca.project_centered(&centered, 0, &mut head);
    let tail_sq = if d == dim {
        0.0
    } else if dim - d <= d {
        let mut tail = vec![0.0; dim - d];
        pca.project_centered(&centered, d, &mut tail);
        dot(&tail, &tail)
    } else {
        (dot(&centered, &centered) - dot(&head, &head)).max(0.0)
    };
    (head, tail_sq.sqrt() as f32)
}

/// Inverted-file index over sign-quantized PCA heads.
#[derive(Clone, Debug)]
pub struct IvfIndex {
    config: IndexConfig,
    pca: PcaModel,
    rot: RandomRotation,
    /// `k x d` head centroids.
    centroids: Matrix,
    /// `k x D` original-space centroids in [`CentroidSpace::Full`].
    full_centroids: Option<Matrix>,
    /// `rot^T c` for each head centroid.
    rotated_centroids: Matrix,
    blocks: Vec<ClusterBlock>,
    /// Original vectors by id, for exact refinement.
    vectors: Matrix,
}

impl IvfIndex {
    /// Trains PCA on `corpus` and builds the index.
    pub fn build(corpus: &Matrix, config: &IndexConfig) -> Result<Self> {
        validate_corpus(corpus)?;
        config.validate(corpus.rows(), corpus.cols())?;
        let pca = train_pca(corpus, config.pca_sample_limit)?;
        Self::build_with_pca(corpus, pca, config)
    }

    /// Builds the index with an already trained projection.
    pub fn build_with_pca(corpus: &Matrix, pca: PcaModel, config: &IndexConfig) -> Result<Self> {
        validate_corpus(corpus)?;
        check_dim(pca.dim(), corpus.cols())?;
        let k = config.validate(corpus.rows(), corpus.cols())?;
        let d = config.d;

        let projected: Vec<(Vec<f32>, f32)> = (0..corpus.rows())
            .into_par_iter()
            .map(|i| project(&pca, d, corpus.row(i)))
            .collect();
        let mut heads = Matrix::zeros(corpus.rows(), d);
        for (i, (h, _)) in projected.iter().enumerate() {
            heads.row_mut(i).copy_from_slice(h);
        }

        let (centroids, full_centroids, assignments) = match config.centroid_space {
            CentroidSpace::Projected => {
                let km = kmeans(&heads, k, config.max_iters, config.seed)?;
                (km.centroids, None, km.assignments)
            }
            CentroidSpace::Full => {
                let km = kmeans(corpus, k, config.max_iters, config.seed)?;
                let mut c = Matrix::zeros(k, d);
                for j in 0..k {
                    let (h, _) = project(&pca, d, km.centroids.row(j));
                    c.row_mut(j).copy_from_slice(&h);
                }
                (c, Some(km.centroids), km.assignments)
            }
        };

        let rot = random_orthogonal(d, config.seed)?;
        let records: Vec<Record> = projected
            .into_par_iter()
            .zip(assignments.par_iter())
            .map(|((head, tail_norm), &a)| {
                encode(&head, centroids.row(a as usize), tail_norm, &rot)
            })
            .collect::<Result<_>>()?;

        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a as usize] += 1;
        }
        let mut blocks: Vec<ClusterBlock> = sizes
            .iter()
            .map(|&n| ClusterBlock::with_capacity(d, n))
            .collect();
        for (id, (rec, &a)) in records.iter().zip(&assignments).enumerate() {
            blocks[a as usize].push(id as u32, rec);
        }

        let rotated_centroids = rotate_centroids(&centroids, &rot)?;
        let config = IndexConfig {
            k: Some(k),
            ..config.clone()
        };
        Ok(Self {
            config,
            pca,
            rot,
            centroids,
            full_centroids,
            rotated_centroids,
            blocks,
            vectors: corpus.clone(),
        })
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    /// Original dimension `D`.
    pub fn dim(&self) -> usize {
        self.pca.dim()
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    pub fn rotation(&self) -> &RandomRotation {
        &self.rot
    }

    pub fn centroids(&self) -> &Matrix {
        &self.centroids
    }

    pub fn full_centroids(&self) -> Option<&Matrix> {
        self.full_centroids.as_ref()
    }

    pub fn centroid_space(&self) -> CentroidSpace {
        self.config.centroid_space
    }

    pub(crate) fn rotated_centroid(&self, j: usize) -> &[f32] {
        self.rotated_centroids.row(j)
    }

    pub fn blocks(&self) -> &[ClusterBlock] {
        &self.blocks
    }

    pub fn vector(&self, id: usize) -> &[f32] {
        self.vectors.row(id)
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    /// Residual variances `lambda_{d+1..D}`.
    pub fn tail_variances(&self) -> &[f32] {
        &self.pca.variances()[self.d()..]
    }

    /// Cluster of every id.
    pub fn assignments(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.len()];
        for (j, b) in self.blocks.iter().enumerate() {
            for &id in b.ids() {
                out[id as usize] = j as u32;
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        if self.config.centroid_space == CentroidSpace::Full {
            return Err(MrqError::config(
                "only projected-centroid indexes can be serialized",
            ));
        }
        w.write_all(INDEX_MAGIC)?;
        codec::put_u32(w, INDEX_VERSION)?;
        for v in [self.dim(), self.d(), self.k(), self.len()] {
            codec::put_u32(w, v as u32)?;
        }
        codec::put_u32(w, self.config.query_bits)?;
        codec::put_f32(w, self.config.epsilon0)?;
        codec::put_f32(w, self.config.m)?;
        codec::put_f32(w, self.config.c0)?;
        self.pca.write_to(w)?;
        codec::put_u32(w, self.rot.dim() as u32)?;
        codec::put_u64(w, self.rot.seed())?;
        codec::put_f32s(w, self.rot.matrix())?;
        codec::put_f32s(w, self.centroids.as_slice())?;
        for b in &self.blocks {
            b.write_to(w)?;
        }
        codec::put_f32s(w, self.vectors.as_slice())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic = r.magic()?;
        let version = r.u32()?;
        if &magic != INDEX_MAGIC || version != INDEX_VERSION {
            return Err(MrqError::VersionMismatch {
                expected: codec::magic_str(INDEX_MAGIC),
                expected_version: INDEX_VERSION,
                found: codec::magic_str(&magic),
                found_version: version,
            });
        }
        let header_at = r.position();
        let dim = r.u32()? as usize;
        let d = r.u32()? as usize;
        let k = r.u32()? as usize;
        let n = r.u32()? as usize;
        let query_bits = r.u32()?;
        let epsilon0 = r.f32()?;
        let m = r.f32()?;
        let c0 = r.f32()?;
        if d == 0 || d > dim || k == 0 || k > n {
            return Err(MrqError::format(
                header_at,
                format!("inconsistent header D={dim} d={d} k={k} N={n}"),
            ));
        }
        let config = IndexConfig {
            d,
            k: Some(k),
            epsilon0,
            m,
            c0,
            query_bits,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
            pca_sample_limit: DEFAULT_SAMPLE_LIMIT,
            centroid_space: CentroidSpace::Projected,
        };
        config
            .validate(n, dim)
            .map_err(|e| MrqError::format(header_at, e.to_string()))?;

        let pca_at = r.position();
        let pca = PcaModel::read(&mut r)?;
        if pca.dim() != dim {
            return Err(MrqError::format(
                pca_at,
                "PCA dimension disagrees with header",
            ));
        }
        let rot_at = r.position();
        let rot_dim = r.u32()? as usize;
        if rot_dim != d {
            return Err(MrqError::format(
                rot_at,
                "rotation dimension disagrees with header",
            ));
        }
        let seed = r.u64()?;
        let rot = RandomRotation::from_parts(d, seed, r.f32s(d * d)?)?;
        let centroids = Matrix::new(k, d, r.f32s(k * d)?)?;

        let mut blocks = Vec::with_capacity(k);
        let mut seen = vec![false; n];
        for _ in 0..k {
            let at = r.position();
            let b = ClusterBlock::read(&mut r, d)?;
            for &id in b.ids() {
                let id = id as usize;
                if id >= n || std::mem::replace(&mut seen[id], true) {
                    return Err(MrqError::format(
                        at,
                        format!("invalid or duplicate id {id}"),
                    ));
                }
            }
            blocks.push(b);
        }
        if seen.iter().any(|s| !s) {
            return Err(MrqError::format(
                r.position(),
                "cluster blocks do not cover every id",
            ));
        }
        let vectors = Matrix::new(n, dim, r.f32s(n * dim)?)?;
        if r.remaining() != 0 {
            return Err(MrqError::format(r.position(), "trailing bytes after index"));
        }
        let rotated_centroids = rotate_centroids(&centroids, &rot)?;
        Ok(Self {
            config: IndexConfig { seed, ..config },
            pca,
            rot,
            centroids,
            full_centroids: None,
            rotated_centroids,
            blocks,
            vectors,
        })
    }
}

fn validate_corpus(corpus: &Matrix) -> Result<()> {
    if corpus.is_empty() || corpus.cols() == 0 {
        return Err(MrqError::DegenerateData("empty corpus".into()));
    }
    if let Some(pos) = corpus.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(MrqError::DegenerateData(format!(
            "non-finite value in row {}",
            pos / corpus.cols()
        )));
    }
    Ok(())
}

fn rotate_centroids(centroids: &Matrix, rot: &RandomRotation) -> Result<Matrix> {
    let mut out = Matrix::zeros(centroids.rows(), centroids.cols());
    for j in 0..centroids.rows() {
        out.row_mut(j)
            .copy_from_slice(&rot.apply_transpose(centroids.row(j))?);
    }
    Ok(out)
}

/// Centers a head on its centroid, normalizes and quantizes it. A head that
/// coincides with its centroid is stored as an exact all-ones code.
fn encode(head: &[f32], centroid: &[f32], tail_norm: f32, rot: &RandomRotation) -> Result<Record> {
    let residual: Vec<f32> = head.iter().zip(centroid).map(|(x, c)| x - c).collect();
    let dist = dot(&residual, &residual).sqrt();
    let (code, factors, dist) = if dist < 1e-12 {
        (BinaryCode::ones(head.len()), CodeFactors::EXACT, 0.0)
    } else {
        let unit: Vec<f32> = residual.iter().map(|v| (*v as f64 / dist) as f32).collect();
        let (code, factors) = quantize_vector(&unit, rot)?;
        (code, factors, dist as f32)
    };
    Ok(Record {
        code: code.words().to_vec(),
        factors,
        dist,
        tail_norm,
        head: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kmeans::nearest_centroid;
    use crate::linalg::l2_sq;
    use crate::quant::estimate_inner_product;
    use crate::synth::SpectralGaussian;

    fn corpus(n: usize, dim: usize, seed: u64) -> Matrix {
        SpectralGaussian::power_law(dim, 1.0, seed).sample(n, seed + 1)
    }

    fn small_index() -> (Matrix, IvfIndex) {
        let data = corpus(2_000, 32, 1);
        let cfg = IndexConfig {
            k: Some(16),
            seed: 5,
            ..IndexConfig::new(12)
        };
        let index = IvfIndex::build(&data, &cfg).unwrap();
        (data, index)
    }

    #[test]
    fn blocks_partition_the_corpus() {
        let (data, index) = small_index();
        let total: usize = index.blocks().iter().map(|b| b.len()).sum();
        assert_eq!(total, data.rows());
        let mut ids: Vec<u32> = index
            .blocks()
            .iter()
            .flat_map(|b| b.ids().to_vec())
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..data.rows() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn stored_metadata_matches_recomputation() {
        let (data, index) = small_index();
        let pca = index.pca();
        for (j, b) in index.blocks().iter().enumerate() {
            for i in 0..b.len().min(10) {
                let id = b.ids()[i] as usize;
                let full = pca.rotate(data.row(id)).unwrap();
                let c = index.centroids().row(j);
                let dx = l2_sq(&full[..12], c).sqrt();
                let tail = dot(&full[12..], &full[12..]).sqrt() as f32;
                let meta = b.meta(i);
                assert!((meta.dist_to_centroid - dx).abs() <= 1e-4 * dx.max(1e-3));
                assert!((meta.tail_norm - tail).abs() <= 1e-4 * tail.max(1e-3));
                let unit: Vec<f32> = b
                    .head(i)
                    .iter()
                    .map(|v| v / meta.dist_to_centroid)
                    .collect();
                let (code, f) = quantize_vector(&unit, index.rotation()).unwrap();
                assert_eq!(code, b.code(i));
                assert!((f.denom - meta.factors.denom).abs() < 1e-4);
                // The stored code estimates its own head almost exactly.
                let qq = crate::quant::quantize_query(&unit, index.rotation(), 8).unwrap();
                let est = estimate_inner_product(&b.code(i), meta.factors, &qq).unwrap();
                assert!((est - 1.0).abs() < 0.1);
            }
        }
    }

    #[test]
    fn one_vector_per_cluster_is_degenerate() {
        let data = corpus(20, 8, 2);
        let cfg = IndexConfig {
            k: Some(20),
            ..IndexConfig::new(4)
        };
        let index = IvfIndex::build(&data, &cfg).unwrap();
        for b in index.blocks() {
            assert_eq!(b.len(), 1);
            let meta = b.meta(0);
            assert_eq!(meta.dist_to_centroid, 0.0);
            assert_eq!(meta.factors, CodeFactors::EXACT);
            assert_eq!(b.code(0), BinaryCode::ones(4));
        }
    }

    #[test]
    fn full_head_has_no_tail() {
        let data = corpus(500, 16, 3);
        let cfg = IndexConfig {
            k: Some(8),
            ..IndexConfig::new(16)
        };
        let index = IvfIndex::build(&data, &cfg).unwrap();
        assert!(index.tail_variances().is_empty());
        assert!(index
            .blocks()
            .iter()
            .all(|b| (0..b.len()).all(|i| b.meta(i).tail_norm == 0.0)));
    }

    #[test]
    fn assignments_use_nearest_head_centroid() {
        let (data, index) = small_index();
        let assignments = index.assignments();
        for (id, &a) in assignments.iter().enumerate() {
            let (head, _) = project(index.pca(), 12, data.row(id));
            let best = (0..index.k())
                .map(|j| l2_sq(&head, index.centroids().row(j)))
                .fold(f32::INFINITY, f32::min);
            let mine = l2_sq(&head, index.centroids().row(a as usize));
            assert!(mine <= best * (1.0 + 1e-5) + 1e-6, "id {id}");
        }
    }

    #[test]
    fn builds_are_deterministic_and_round_trip() {
        let (data, a) = small_index();
        let cfg = a.config().clone();
        let b = IvfIndex::build(&data, &cfg).unwrap();
        let bytes = a.to_bytes().unwrap();
        assert_eq!(bytes, b.to_bytes().unwrap());
        let back = IvfIndex::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.blocks(), a.blocks());
        assert_eq!(back.rotated_centroids, a.rotated_centroids);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (_, index) = small_index();
        let bytes = index.to_bytes().unwrap();
        for cut in [0, 7, 30, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(
                    IvfIndex::from_bytes(&bytes[..cut]),
                    Err(MrqError::Format { .. })
                ),
                "cut at {cut}"
            );
        }
        let mut bad = bytes.clone();
        bad[..8].copy_from_slice(b"NOTMRQ01");
        assert!(matches!(
            IvfIndex::from_bytes(&bad),
            Err(MrqError::VersionMismatch { .. })
        ));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(
            IvfIndex::from_bytes(&bad),
            Err(MrqError::VersionMismatch { .. })
        ));
        let mut extra = bytes;
        extra.push(0);
        assert!(matches!(
            IvfIndex::from_bytes(&extra),
            Err(MrqError::Format { .. })
        ));
    }

    #[test]
    fn full_centroid_space() {
        let data = corpus(1_000, 24, 4);
        let cfg = IndexConfig {
            k: Some(8),
            centroid_space: CentroidSpace::Full,
            ..IndexConfig::new(8)
        };
        let index = IvfIndex::build(&data, &cfg).unwrap();
        let full = index.full_centroids().unwrap();
        assert_eq!((full.rows(), full.cols()), (8, 24));
        let assignments = index.assignments();
        for (id, &a) in assignments.iter().enumerate() {
            assert_eq!(nearest_centroid(full, data.row(id)).0, a as usize);
        }
        assert!(matches!(index.to_bytes(), Err(MrqError::InvalidConfig(_))));
    }

    #[test]
    fn invalid_configs() {
        let data = corpus(50, 8, 5);
        assert!(IvfIndex::build(&data, &IndexConfig::new(9)).is_err());
        assert!(IvfIndex::build(&data, &IndexConfig::new(0)).is_err());
        let cfg = IndexConfig {
            k: Some(51),
            ..IndexConfig::new(4)
        };
        assert!(matches!(
            IvfIndex::build(&data, &cfg),
            Err(MrqError::InvalidConfig(_))
        ));
        let mut nan = data.clone();
        nan.row_mut(3)[0] = f32::NAN;
        assert!(matches!(
            IvfIndex::build(&nan, &IndexConfig::new(4)),
            Err(MrqError::DegenerateData(_))
        ));
    }
}
