//! Ground truth, recall, the variance spectrum diagnostic and parameter sweeps.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{check_dim, MrqError, Result};
use crate::index::IvfIndex;
use crate::linalg::Matrix;
use crate::pca::{train_pca, PcaModel};
use crate::search::{brute_force, SearchMode, SearchParams, SearchStats};

/// Exact `k` nearest corpus ids for every query, nearest first.
pub fn generate_groundtruth(corpus: &Matrix, queries: &Matrix, k: usize) -> Result<Vec<Vec<u32>>> {
    if queries.rows() > 0 {
        check_dim(corpus.cols(), queries.cols())?;
    }
    Ok((0..queries.rows())
        .into_par_iter()
        .map(|i| {
            brute_force(queries.row(i), corpus, k)
                .into_iter()
                .map(|n| n.id)
                .collect()
        })
        .collect())
}

/// Mean over queries of `|T ∩ G| / k`, with `T` and `G` the first `k` ids of
/// each result and ground-truth row.
pub fn recall_at_k(results: &[Vec<u32>], groundtruth: &[Vec<u32>], k: usize) -> Result<f64> {
    check_dim(groundtruth.len(), results.len())?;
    if k == 0 || results.is_empty() {
        return Err(MrqError::config(
            "recall needs k >= 1 and at least one query",
        ));
    }
    let mut total = 0usize;
    for (i, (r, g)) in results.iter().zip(groundtruth).enumerate() {
        if r.len() < k || g.len() < k {
            return Err(MrqError::config(format!(
                "row {i} has fewer than {k} entries ({} results, {} ground truth)",
                r.len(),
                g.len()
            )));
        }
        let truth = &g[..k];
        total += r[..k].iter().filter(|id| truth.contains(id)).count();
    }
    Ok(total as f64 / (k * results.len()) as f64)
}

pub const SPECTRUM_LEVELS: [f64; 4] = [0.5, 0.9, 0.95, 0.99];

/// PCA variance spectrum with cumulative energy fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub variances: Vec<f64>,
    /// `cumulative[i]` is the share of total variance in dimensions `0..=i`.
    pub cumulative: Vec<f64>,
}

impl SpectrumReport {
    pub fn from_model(model: &PcaModel) -> Result<Self> {
        let variances: Vec<f64> = model.variances().iter().map(|&v| v as f64).collect();
        let total: f64 = variances.iter().sum();
        if !(total > 0.0) {
            return Err(MrqError::DegenerateData(
                "spectrum has zero total variance".into(),
            ));
        }
        let mut acc = 0.0;
        let cumulative = variances
            .iter()
            .map(|v| {
                acc += v;
                (acc / total).min(1.0)
            })
            .collect();
        Ok(Self {
            variances,
            cumulative,
        })
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    /// Smallest `d` whose leading dimensions carry at least `fraction` of the
    /// variance.
    pub fn level(&self, fraction: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| c >= fraction - 1e-12)
            .map_or(self.dim(), |i| i + 1)
    }

    pub fn levels(&self) -> Vec<(f64, usize)> {
        SPECTRUM_LEVELS
            .iter()
            .map(|&f| (f, self.level(f)))
            .collect()
    }

    /// `dim,variance,cumulative` rows, dimensions numbered from 1.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dim,variance,cumulative\n");
        for (i, (v, c)) in self.variances.iter().zip(&self.cumulative).enumerate() {
            writeln!(s, "{},{v:.6e},{c:.6}", i + 1).unwrap();
        }
        s
    }
}

pub fn spectrum_report(corpus: &Matrix, sample_limit: usize) -> Result<SpectrumReport> {
    SpectrumReport::from_model(&train_pca(corpus, sample_limit)?)
}

pub const CSV_HEADER: &str = "nprobe,epsilon0,m,recall,mean_ms,p99_ms,exact_ratio,scanned";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridPoint {
    pub nprobe: usize,
    pub epsilon0: f32,
    pub m: f32,
    pub mode: SearchMode,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRow {
    pub nprobe: usize,
    pub epsilon0: f32,
    pub m: f32,
    pub recall: f64,
    pub mean_ms: f64,
    pub p99_ms: f64,
    /// Exact distance computations over candidates scanned, summed over queries.
    pub exact_ratio: f64,
    /// Mean candidates scanned per query.
    pub scanned: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.3}",
                r.nprobe, r.epsilon0, r.m, r.recall, r.mean_ms, r.p99_ms, r.exact_ratio, r.scanned
            )
            .unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(CSV_HEADER) {
            return Err(MrqError::format(0, "missing or unexpected CSV header"));
        }
        let mut rows = Vec::new();
        let mut offset = CSV_HEADER.len() + 1;
        for line in lines {
            let bad = |what: &str| MrqError::format(offset, format!("bad {what} in {line:?}"));
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 8 {
                return Err(bad("field count"));
            }
            let num = |i: usize, name: &str| f[i].parse::<f64>().map_err(|_| bad(name));
            rows.push(EvalRow {
                nprobe: f[0].parse().map_err(|_| bad("nprobe"))?,
                epsilon0: num(1, "epsilon0")? as f32,
                m: num(2, "m")? as f32,
                recall: num(3, "recall")?,
                mean_ms: num(4, "mean_ms")?,
                p99_ms: num(5, "p99_ms")?,
                exact_ratio: num(6, "exact_ratio")?,
                scanned: num(7, "scanned")?,
            });
            offset += line.len() + 1;
        }
        Ok(Self { rows })
    }
}

/// Nearest-rank percentile of already sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Runs every grid point over all queries, one query at a time. Each point
/// gets an unmeasured warm-up sweep first.
pub fn bench(
    index: &IvfIndex,
    queries: &Matrix,
    groundtruth: &[Vec<u32>],
    k: usize,
    grid: &[GridPoint],
) -> Result<EvalReport> {
    check_dim(queries.rows(), groundtruth.len())?;
    let mut report = EvalReport::default();
    for point in grid {
        let params = SearchParams {
            k,
            nprobe: point.nprobe,
            epsilon0: point.epsilon0,
            m: point.m,
            mode: point.mode,
        };
        params.validate(index)?;
        for q in queries.iter_rows() {
            index.search(q, &params)?;
        }
        let mut latencies = Vec::with_capacity(queries.rows());
        let mut results = Vec::with_capacity(queries.rows());
        let mut stats = SearchStats::default();
        for q in queries.iter_rows() {
            let t = Instant::now();
            let (out, s) = index.search(q, &params)?;
            latencies.push(t.elapsed().as_secs_f64() * 1e3);
            stats.merge(&s);
            results.push(out.into_iter().map(|n| n.id).collect::<Vec<_>>());
        }
        latencies.sort_by(f64::total_cmp);
        let n = queries.rows().max(1) as f64;
        report.rows.push(EvalRow {
            nprobe: point.nprobe,
            epsilon0: point.epsilon0,
            m: point.m,
            recall: recall_at_k(&results, groundtruth, k)?,
            mean_ms: latencies.iter().sum::<f64>() / n,
            p99_ms: percentile(&latencies, 0.99),
            exact_ratio: stats.exact_ratio(),
            scanned: stats.candidates_scanned as f64 / n,
        });
    }
    Ok(report)
}
