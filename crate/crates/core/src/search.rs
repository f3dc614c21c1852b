//! Query preparation, cluster probing and the estimate/bound/refine cascade.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::distance::{
    approximate_distance, combined_error, residual_variance, should_refine, stage_two,
    stage_two_distance, Decision, QueryConstants,
};
use crate::error::{check_dim, MrqError, Result};
use crate::index::{CentroidSpace, IvfIndex};
use crate::linalg::{dot, l2_sq, Matrix};
use crate::quant::quantize_rotated_query;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SearchMode {
    /// Estimate, bound, and refine only candidates the bounds cannot rule out.
    #[default]
    Full,
    /// Rank by the estimated distance alone, then report exact distances of
    /// the top `K`.
    NoCorrection,
    /// Exact distance for every scanned candidate.
    ExactOnly,
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Full => "full",
            SearchMode::NoCorrection => "no-correction",
            SearchMode::ExactOnly => "exact",
        })
    }
}

impl FromStr for SearchMode {
    type Err = MrqError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SearchMode::Full),
            "no-correction" => Ok(SearchMode::NoCorrection),
            "exact" => Ok(SearchMode::ExactOnly),
            _ => Err(MrqError::config(format!(
                "unknown mode {s:?}; expected full, no-correction or exact"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchParams {
    /// Number of neighbors to return.
    pub k: usize,
    pub nprobe: usize,
    pub epsilon0: f32,
    pub m: f32,
    pub mode: SearchMode,
}

impl SearchParams {
    /// `k` results from `nprobe` clusters with the index's default bounds.
    pub fn for_index(index: &IvfIndex, k: usize, nprobe: usize) -> Self {
        Self {
            k,
            nprobe,
            epsilon0: index.config().epsilon0,
            m: index.config().m,
            mode: SearchMode::Full,
        }
    }

    pub fn with_mode(self, mode: SearchMode) -> Self {
        Self { mode, ..self }
    }

    pub fn validate(&self, index: &IvfIndex) -> Result<()> {
        if self.k == 0 {
            return Err(MrqError::config("K must be at least 1"));
        }
        if self.nprobe == 0 || self.nprobe > index.k() {
            return Err(MrqError::config(format!(
                "nprobe = {} must lie in 1..={}",
                self.nprobe,
                index.k()
            )));
        }
        if !(self.epsilon0 >= 0.0 && self.epsilon0.is_finite()) {
            return Err(MrqError::config("epsilon0 must be finite and non-negative"));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(MrqError::config("m must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub candidates_scanned: u64,
    pub stage1_pruned: u64,
    pub stage2_pruned: u64,
    pub exact_computed: u64,
    pub elapsed: Duration,
}

impl SearchStats {
    pub fn merge(&mut self, other: &SearchStats) {
        self.candidates_scanned += other.candidates_scanned;
        self.stage1_pruned += other.stage1_pruned;
        self.stage2_pruned += other.stage2_pruned;
        self.exact_computed += other.exact_computed;
        self.elapsed += other.elapsed;
    }

    /// Fraction of scanned candidates that needed an exact distance.
    pub fn exact_ratio(&self) -> f64 {
        if self.candidates_scanned == 0 {
            0.0
        } else {
            self.exact_computed as f64 / self.candidates_scanned as f64
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    /// Squared Euclidean distance.
    pub distance: f32,
}

impl Neighbor {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.id.cmp(&other.id))
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry(Neighbor);

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.key_cmp(&other.0)
    }
}

/// Bounded max-heap holding the `capacity` smallest `(distance, id)` pairs
/// seen so far.
#[derive(Clone, Debug)]
pub struct ResultHeap {
    capacity: usize,
    heap: BinaryHeap<Entry>,
}

impl ResultHeap {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            heap: BinaryHeap::with_capacity(capacity + 1),
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.heap.len() >= self.capacity
    }

    /// Current worst kept distance, or `+inf` until the heap is full.
    #[inline]
    pub fn tau(&self) -> f32 {
        if self.is_full() {
            self.heap.peek().map_or(f32::INFINITY, |e| e.0.distance)
        } else {
            f32::INFINITY
        }
    }

    /// Inserts the candidate if it beats the current worst entry. Equal
    /// distances are ordered by id so the kept set does not depend on scan
    /// order.
    #[inline]
    pub fn push(&mut self, id: u32, distance: f32) -> bool {
        if self.capacity == 0 {
            return false;
        }
        let n = Neighbor { id, distance };
        if !self.is_full() {
            self.heap.push(Entry(n));
            return true;
        }
        let worst = self.heap.peek().expect("full heap").0;
        if n.key_cmp(&worst) == Ordering::Less {
            self.heap.pop();
            self.heap.push(Entry(n));
            true
        } else {
            false
        }
    }

    /// Entries in ascending `(distance, id)` order.
    pub fn into_sorted_vec(self) -> Vec<Neighbor> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|e| e.0)
            .collect()
    }
}

/// Exact top-`k` of `q` over the rows of `corpus`.
pub fn brute_force(q: &[f32], corpus: &Matrix, k: usize) -> Vec<Neighbor> {
    let mut heap = ResultHeap::new(k);
    for (id, row) in corpus.iter_rows().enumerate() {
        heap.push(id as u32, l2_sq(q, row));
    }
    heap.into_sorted_vec()
}

/// Per-query state shared by every probed cluster.
#[derive(Clone, Debug)]
pub struct QueryContext {
    query: Vec<f32>,
    /// `P (q - mean)`, all `D` coordinates.
    rotated: Vec<f32>,
    /// `rot^T q_d`.
    code_space_head: Vec<f32>,
    q_tail_norm_sq: f32,
    sigma: f32,
    probes: Vec<usize>,
}

impl QueryContext {
    pub fn query(&self) -> &[f32] {
        &self.query
    }

    pub fn rotated(&self) -> &[f32] {
        &self.rotated
    }

    pub fn sigma(&self) -> f32 {
        self.sigma
    }

    pub fn q_tail_norm_sq(&self) -> f32 {
        self.q_tail_norm_sq
    }

    /// Clusters to scan, nearest first.
    pub fn probes(&self) -> &[usize] {
        &self.probes
    }
}

pub fn prepare_query(q: &[f32], index: &IvfIndex, params: &SearchParams) -> Result<QueryContext> {
    check_dim(index.dim(), q.len())?;
    params.validate(index)?;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(MrqError::config("query contains non-finite values"));
    }
    let d = index.d();
    let rotated = index.pca().rotate(q)?;
    let (head, tail) = rotated.split_at(d);
    let sigma = residual_variance(tail, index.tail_variances())?;
    let q_tail_norm_sq = dot(tail, tail) as f32;
    let code_space_head = index.rotation().apply_transpose(head)?;

    let mut order: Vec<(f32, usize)> = match index.centroid_space() {
        CentroidSpace::Projected => index
            .centroids()
            .iter_rows()
            .enumerate()
            .map(|(j, c)| (l2_sq(head, c), j))
            .collect(),
        CentroidSpace::Full => index
            .full_centroids()
            .expect("full-space index keeps its centroids")
            .iter_rows()
            .enumerate()
            .map(|(j, c)| (l2_sq(q, c), j))
            .collect(),
    };
    order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let probes = order
        .into_iter()
        .take(params.nprobe)
        .map(|(_, j)| j)
        .collect();

    Ok(QueryContext {
        query: q.to_vec(),
        rotated,
        code_space_head,
        q_tail_norm_sq,
        sigma,
        probes,
    })
}

/// A candidate discarded by the cascade, with the bound that discarded it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PruneEvent {
    pub id: u32,
    pub stage: u8,
    /// `dis' - eps_b - eps_r` at stage 1, `dis_o' - eps_r` at stage 2.
    pub lower_bound: f32,
    pub tau: f32,
}

pub fn search(
    ctx: &QueryContext,
    index: &IvfIndex,
    params: &SearchParams,
) -> (Vec<Neighbor>, SearchStats) {
    run(ctx, index, params, |_| {})
}

/// [`search`] that also reports every pruned candidate.
pub fn search_traced(
    ctx: &QueryContext,
    index: &IvfIndex,
    params: &SearchParams,
) -> (Vec<Neighbor>, SearchStats, Vec<PruneEvent>) {
    let mut events = Vec::new();
    let (out, stats) = run(ctx, index, params, |e| events.push(e));
    (out, stats, events)
}

fn run<F: FnMut(PruneEvent)>(
    ctx: &QueryContext,
    index: &IvfIndex,
    params: &SearchParams,
    mut on_prune: F,
) -> (Vec<Neighbor>, SearchStats) {
    let start = Instant::now();
    let mut stats = SearchStats::default();
    let d = index.d();
    let q = &ctx.query;
    let q_head = &ctx.rotated[..d];
    let mut heap = ResultHeap::new(params.k);
    let mut residual = vec![0f32; d];
    let mut y = vec![0f32; d];
    let bits = index.config().query_bits;

    for &j in &ctx.probes {
        let block = &index.blocks()[j];
        stats.candidates_scanned += block.len() as u64;
        if params.mode == SearchMode::ExactOnly {
            for &id in block.ids() {
                heap.push(id, l2_sq(q, index.vector(id as usize)));
            }
            stats.exact_computed += block.len() as u64;
            continue;
        }

        let c = index.centroids().row(j);
        for ((r, a), b) in residual.iter_mut().zip(q_head).zip(c) {
            *r = a - b;
        }
        let dq = dot(&residual, &residual).sqrt();
        let qc = QueryConstants {
            q_head_dist: dq as f32,
            q_tail_norm_sq: ctx.q_tail_norm_sq,
            sigma: ctx.sigma,
            m: params.m,
            epsilon0: params.epsilon0,
        };
        let qq = (dq > 1e-12).then(|| {
            let rc = index.rotated_centroid(j);
            for ((o, a), b) in y.iter_mut().zip(&ctx.code_space_head).zip(rc) {
                *o = ((*a as f64 - *b as f64) / dq) as f32;
            }
            quantize_rotated_query(&y, bits)
        });

        for (i, &id) in block.ids().iter().enumerate() {
            let meta = block.meta(i);
            let est = qq.as_ref().map_or(0.0, |qq| {
                qq.codeword_dot(block.code_words(i)) / meta.factors.denom
            });
            let dis_prime = approximate_distance(&meta, &qc, est);
            if params.mode == SearchMode::NoCorrection {
                heap.push(id, dis_prime);
                continue;
            }
            let (eps_b, eps_r) = combined_error(&meta, &qc);
            let tau = heap.tau();
            let refine = match should_refine(dis_prime, eps_b, eps_r, tau) {
                Decision::Prune => {
                    stats.stage1_pruned += 1;
                    on_prune(PruneEvent {
                        id,
                        stage: 1,
                        lower_bound: dis_prime - eps_b - eps_r,
                        tau,
                    });
                    false
                }
                Decision::CheckStage2 => {
                    let head_ip = dot(block.head(i), &residual) as f32;
                    let dis_o = stage_two_distance(&meta, &qc, head_ip);
                    if stage_two(dis_o, eps_r, tau) == Decision::Prune {
                        stats.stage2_pruned += 1;
                        on_prune(PruneEvent {
                            id,
                            stage: 2,
                            lower_bound: dis_o - eps_r,
                            tau,
                        });
                        false
                    } else {
                        true
                    }
                }
                Decision::Refine => true,
            };
            if refine {
                stats.exact_computed += 1;
                heap.push(id, l2_sq(q, index.vector(id as usize)));
            }
        }
    }

    let out = if params.mode == SearchMode::NoCorrection {
        let kept = heap.into_sorted_vec();
        stats.exact_computed = kept.len() as u64;
        stats.stage1_pruned = stats.candidates_scanned - stats.exact_computed;
        let mut exact: Vec<Neighbor> = kept
            .into_iter()
            .map(|n| Neighbor {
                id: n.id,
                distance: l2_sq(q, index.vector(n.id as usize)),
            })
            .collect();
        exact.sort_by(Neighbor::key_cmp);
        exact
    } else {
        heap.into_sorted_vec()
    };
    stats.elapsed = start.elapsed();
    (out, stats)
}

impl IvfIndex {
    /// Prepares and runs one query.
    pub fn search(&self, q: &[f32], params: &SearchParams) -> Result<(Vec<Neighbor>, SearchStats)> {
        let ctx = prepare_query(q, self, params)?;
        Ok(search(&ctx, self, params))
    }
}

#[derive(Clone, Debug, Default)]
pub struct BatchResult {
    pub results: Vec<Vec<Neighbor>>,
    pub per_query: Vec<SearchStats>,
    /// Sum over all queries.
    pub stats: SearchStats,
}

/// Searches every row of `queries` on `threads` workers (0 picks the rayon
/// default). Results keep input order.
pub fn batch_search(
    queries: &Matrix,
    index: &IvfIndex,
    params: &SearchParams,
    threads: usize,
) -> Result<BatchResult> {
    params.validate(index)?;
    if queries.rows() == 0 {
        return Ok(BatchResult::default());
    }
    check_dim(index.dim(), queries.cols())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MrqError::config(format!("cannot start worker pool: {e}")))?;
    let out: Vec<(Vec<Neighbor>, SearchStats)> = pool.install(|| {
        (0..queries.rows())
            .into_par_iter()
            .map(|i| {
                index
                    .search(queries.row(i), params)
                    .map_err(|e| MrqError::Query {
                        index: i,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()
    })?;
    let mut batch = BatchResult::default();
    for (r, s) in out {
        batch.stats.merge(&s);
        batch.results.push(r);
        batch.per_query.push(s);
    }
    Ok(batch)
}
