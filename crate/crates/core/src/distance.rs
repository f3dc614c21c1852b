//! Head/tail decomposition of squared distances, their approximation from
//! binary codes, and the error bounds that drive refinement.
//!
//! With `x_p = [x_d, x_r]` and `q_p = [q_d, q_r]` in the rotated space and
//! `c` the head centroid,
//!
//! ```text
//! |x - q|^2 = |x_d - c|^2 + |q_d - c|^2 + |x_r|^2 + |q_r|^2      (C1)
//!           - 2 |x_d - c| |q_d - c| <x_b, q_b>                   (C2)
//!           - 2 <x_r, q_r>                                       (C3)
//! ```
//!
//! The approximation keeps C1, estimates `<x_b, q_b>` in C2 from the code,
//! and drops C3.

use crate::error::{check_dim, MrqError, Result};
use crate::linalg::dot;
use crate::quant::CodeFactors;

/// Default Chebyshev multiplier.
pub const DEFAULT_M: f32 = 4.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SplitVector {
    pub head: Vec<f32>,
    pub tail: Vec<f32>,
}

/// Splits a rotated vector into its leading `d` coordinates and the rest.
pub fn split(rotated: &[f32], d: usize) -> Result<SplitVector> {
    if d == 0 || d > rotated.len() {
        return Err(MrqError::config(format!(
            "split point {d} outside 1..={}",
            rotated.len()
        )));
    }
    let (head, tail) = rotated.split_at(d);
    Ok(SplitVector {
        head: head.to_vec(),
        tail: tail.to_vec(),
    })
}

/// Per-record scalars precomputed at build time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MrqRecordMeta {
    /// `|x_d - c|`.
    pub dist_to_centroid: f32,
    /// `|x_r|`.
    pub tail_norm: f32,
    pub factors: CodeFactors,
}

/// Per-query (and per probed cluster) constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QueryConstants {
    /// `|q_d - c|` for the cluster being scanned.
    pub q_head_dist: f32,
    /// `|q_r|^2`.
    pub q_tail_norm_sq: f32,
    /// Standard deviation of `<x_r, q_r>` over the corpus.
    pub sigma: f32,
    /// Chebyshev multiplier.
    pub m: f32,
    pub epsilon0: f32,
}

/// Standard deviation of `<x_r, q_r>` for a fixed query tail when each tail
/// coordinate of `x` is independent with the given variance:
/// `sigma = sqrt(sum_i q_i^2 var_i)`.
pub fn residual_variance(q_tail: &[f32], variances: &[f32]) -> Result<f32> {
    check_dim(q_tail.len(), variances.len())?;
    let s: f64 = q_tail
        .iter()
        .zip(variances)
        .map(|(&q, &v)| (q as f64) * (q as f64) * v as f64)
        .sum();
    Ok(s.sqrt() as f32)
}

/// `m * sigma`: `P(|<x_r, q_r>| >= m sigma) <= 1 / m^2`.
pub fn residual_error_bound(sigma: f32, m: f32) -> Result<f32> {
    if !(sigma >= 0.0) {
        return Err(MrqError::config("sigma must be non-negative"));
    }
    if !(m > 0.0) {
        return Err(MrqError::config("m must be positive"));
    }
    Ok(m * sigma)
}

/// C1 + C2 with `<x_b, q_b>` replaced by `est_ip`.
#[inline]
pub fn approximate_distance(meta: &MrqRecordMeta, qc: &QueryConstants, est_ip: f32) -> f32 {
    let dx = meta.dist_to_centroid as f64;
    let dq = qc.q_head_dist as f64;
    let tx = meta.tail_norm as f64;
    (dx * dx + dq * dq + tx * tx + qc.q_tail_norm_sq as f64 - 2.0 * dx * dq * est_ip as f64) as f32
}

/// Distance-domain error bounds `(eps_b, eps_r)`.
///
/// `eps_b = 2 |x_d - c| |q_d - c| err_coeff eps0` scales the estimator bound
/// by the factor C2 applies to `<x_b, q_b>`; `eps_r = 2 m sigma` because the
/// dropped term is `-2 <x_r, q_r>`.
#[inline]
pub fn combined_error(meta: &MrqRecordMeta, qc: &QueryConstants) -> (f32, f32) {
    let eps_b = 2.0 * meta.dist_to_centroid * qc.q_head_dist * meta.factors.err_coeff * qc.epsilon0;
    let eps_r = 2.0 * qc.m * qc.sigma;
    (eps_b, eps_r)
}

/// Exact head distance plus both tail norms: `dis + 2 <x_r, q_r>`.
/// `head_ip` is `<x_d - c, q_d - c>`.
#[inline]
pub fn stage_two_distance(meta: &MrqRecordMeta, qc: &QueryConstants, head_ip: f32) -> f32 {
    let dx = meta.dist_to_centroid as f64;
    let dq = qc.q_head_dist as f64;
    let tx = meta.tail_norm as f64;
    (dx * dx + dq * dq + tx * tx + qc.q_tail_norm_sq as f64 - 2.0 * head_ip as f64) as f32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Prune,
    CheckStage2,
    Refine,
}

/// First stage of the cascade. A candidate survives only while its lower
/// bound `dis' - eps_b - eps_r` is strictly below `tau`; with `tau = +inf`
/// the second stage cannot prune either, so it refines directly.
#[inline]
pub fn should_refine(dis_prime: f32, eps_b: f32, eps_r: f32, tau: f32) -> Decision {
    if tau == f32::INFINITY {
        return Decision::Refine;
    }
    if dis_prime - eps_b - eps_r >= tau {
        Decision::Prune
    } else {
        Decision::CheckStage2
    }
}

/// Second stage: only the residual bound remains once the head is exact.
#[inline]
pub fn stage_two(dis_o_prime: f32, eps_r: f32, tau: f32) -> Decision {
    if dis_o_prime - eps_r >= tau {
        Decision::Prune
    } else {
        Decision::Refine
    }
}

/// The three terms of the decomposed squared distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceParts {
    pub norms: f64,
    pub quantized: f64,
    pub residual: f64,
}

impl DistanceParts {
    pub fn total(&self) -> f64 {
        self.norms + self.quantized + self.residual
    }
}

/// Evaluates C1, C2 (with the exact `<x_b, q_b>`) and C3 for two rotated
/// vectors and a head centroid.
pub fn decompose(x_rot: &[f32], q_rot: &[f32], centroid: &[f32]) -> Result<DistanceParts> {
    check_dim(x_rot.len(), q_rot.len())?;
    let d = centroid.len();
    let xs = split(x_rot, d)?;
    let qs = split(q_rot, d)?;
    let xc: Vec<f32> = xs.head.iter().zip(centroid).map(|(a, c)| a - c).collect();
    let qcen: Vec<f32> = qs.head.iter().zip(centroid).map(|(a, c)| a - c).collect();
    let dx = dot(&xc, &xc).sqrt();
    let dq = dot(&qcen, &qcen).sqrt();
    let ip_b = if dx > 0.0 && dq > 0.0 {
        dot(&xc, &qcen) / (dx * dq)
    } else {
        0.0
    };
    Ok(DistanceParts {
        norms: dx * dx + dq * dq + dot(&xs.tail, &xs.tail) + dot(&qs.tail, &qs.tail),
        quantized: -2.0 * dx * dq * ip_b,
        residual: -2.0 * dot(&xs.tail, &qs.tail),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::l2_sq_f64;
    use crate::quant::{estimate_inner_product, quantize_query, quantize_vector};
    use crate::rotation::random_orthogonal;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn split_examples() {
        let s = split(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(s.head, vec![1.0, 2.0]);
        assert_eq!(s.tail, vec![3.0, 4.0]);
        let full = split(&[1.0, 2.0], 2).unwrap();
        assert!(full.tail.is_empty());
        assert_eq!(dot(&full.tail, &full.tail), 0.0);
        assert!(matches!(split(&[1.0], 2), Err(MrqError::InvalidConfig(_))));
        assert!(split(&[1.0], 0).is_err());
    }

    proptest! {
        #[test]
        fn split_is_lossless(v in prop::collection::vec(-10.0f32..10.0, 1..64), frac in 0.0f64..1.0) {
            let d = 1 + ((v.len() - 1) as f64 * frac) as usize;
            let s = split(&v, d).unwrap();
            prop_assert_eq!([s.head.clone(), s.tail.clone()].concat(), v.clone());
            let whole = dot(&v, &v);
            let parts = dot(&s.head, &s.head) + dot(&s.tail, &s.tail);
            prop_assert!((whole - parts).abs() <= 1e-4 * whole.max(1e-9));
        }
    }

    #[test]
    fn residual_variance_examples() {
        assert_eq!(residual_variance(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        let s = residual_variance(&[1.0, 1.0], &[0.04, 0.09]).unwrap();
        assert!((s - 0.13f32.sqrt()).abs() < 1e-7);
        assert!(residual_variance(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn residual_error_bound_examples() {
        assert_eq!(residual_error_bound(0.0, 3.0).unwrap(), 0.0);
        assert_eq!(residual_error_bound(0.5, 4.0).unwrap(), 2.0);
        assert!(residual_error_bound(-1.0, 4.0).is_err());
        assert!(residual_error_bound(1.0, 0.0).is_err());
    }

    /// Tails with independent zero-mean Gaussian coordinates of known variance.
    fn gaussian_tails(n: usize, variances: &[f32], seed: u64) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                variances
                    .iter()
                    .map(|v| {
                        let z: f32 = StandardNormal.sample(&mut rng);
                        z * v.sqrt()
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn residual_variance_matches_monte_carlo() {
        let variances: Vec<f32> = (1..=32).map(|i| 1.0 / i as f32).collect();
        let q = gaussian_tails(1, &variances, 1).pop().unwrap();
        let sigma = residual_variance(&q, &variances).unwrap() as f64;
        let ips: Vec<f64> = gaussian_tails(10_000, &variances, 2)
            .iter()
            .map(|x| dot(x, &q))
            .collect();
        let mean = ips.iter().sum::<f64>() / ips.len() as f64;
        let var = ips.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ips.len() - 1) as f64;
        assert!(
            (var - sigma * sigma).abs() < 0.1 * sigma * sigma,
            "{var} vs {}",
            sigma * sigma
        );

        for m in [2.0f64, 3.0, 4.0] {
            let exceed =
                ips.iter().filter(|v| v.abs() >= m * sigma).count() as f64 / ips.len() as f64;
            assert!(exceed <= 1.0 / (m * m), "m={m}: {exceed}");
        }
    }

    #[test]
    fn self_distance_is_zero() {
        let meta = MrqRecordMeta {
            dist_to_centroid: 1.5,
            tail_norm: 0.0,
            factors: CodeFactors::EXACT,
        };
        let qc = QueryConstants {
            q_head_dist: 1.5,
            q_tail_norm_sq: 0.0,
            sigma: 0.0,
            m: DEFAULT_M,
            epsilon0: 1.9,
        };
        assert_eq!(approximate_distance(&meta, &qc, 1.0), 0.0);
        assert_eq!(combined_error(&meta, &qc), (0.0, 0.0));
        let qc0 = QueryConstants {
            epsilon0: 0.0,
            ..qc
        };
        let meta_lossy = MrqRecordMeta {
            factors: CodeFactors::from_denom(0.8, 64),
            ..meta
        };
        assert_eq!(combined_error(&meta_lossy, &qc0).0, 0.0);
    }

    struct Pair {
        x: Vec<f32>,
        q: Vec<f32>,
        c: Vec<f32>,
    }

    fn random_pair(rng: &mut ChaCha8Rng, dim: usize, d: usize) -> Pair {
        let mut g = |scale: f32| -> Vec<f32> {
            (0..dim)
                .map(|i| {
                    let z: f32 = StandardNormal.sample(rng);
                    z * scale / (1.0 + i as f32).sqrt()
                })
                .collect()
        };
        let x = g(1.0);
        let q = g(1.0);
        let c = g(0.3)[..d].to_vec();
        Pair { x, q, c }
    }

    fn parts_for(p: &Pair) -> (MrqRecordMeta, QueryConstants, f64, f64) {
        let d = p.c.len();
        let xc: Vec<f32> = p.x[..d].iter().zip(&p.c).map(|(a, c)| a - c).collect();
        let qc: Vec<f32> = p.q[..d].iter().zip(&p.c).map(|(a, c)| a - c).collect();
        let dx = dot(&xc, &xc).sqrt();
        let dq = dot(&qc, &qc).sqrt();
        let meta = MrqRecordMeta {
            dist_to_centroid: dx as f32,
            tail_norm: dot(&p.x[d..], &p.x[d..]).sqrt() as f32,
            factors: CodeFactors::EXACT,
        };
        let qconst = QueryConstants {
            q_head_dist: dq as f32,
            q_tail_norm_sq: dot(&p.q[d..], &p.q[d..]) as f32,
            sigma: 0.0,
            m: DEFAULT_M,
            epsilon0: 1.9,
        };
        let ip_b = dot(&xc, &qc) / (dx * dq);
        (meta, qconst, ip_b, dot(&p.x[d..], &p.q[d..]))
    }

    #[test]
    fn exact_estimate_with_tails_differs_by_residual_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = random_pair(&mut rng, 48, 16);
            let (meta, qc, ip_b, ip_r) = parts_for(&p);
            let dis = l2_sq_f64(&p.x, &p.q);
            let approx = approximate_distance(&meta, &qc, ip_b as f32) as f64;
            assert!((approx - (dis + 2.0 * ip_r)).abs() < 1e-3 * dis);
        }
    }

    #[test]
    fn exactness_with_empty_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let p = random_pair(&mut rng, 24, 24);
            let (meta, qc, ip_b, _) = parts_for(&p);
            let dis = l2_sq_f64(&p.x, &p.q);
            let approx = approximate_distance(&meta, &qc, ip_b as f32) as f64;
            assert!((approx - dis).abs() < 1e-3 * dis);
            let parts = decompose(&p.x, &p.q, &p.c).unwrap();
            assert!((parts.total() - dis).abs() < 1e-3 * dis);
            assert_eq!(parts.residual, 0.0);
        }
    }

    #[test]
    fn decomposition_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let p = random_pair(&mut rng, 40, 12);
            let dis = l2_sq_f64(&p.x, &p.q);
            let parts = decompose(&p.x, &p.q, &p.c).unwrap();
            assert!((parts.total() - dis).abs() < 1e-3 * dis);
        }
    }

    #[test]
    fn stage_two_distance_is_exact_head_plus_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = random_pair(&mut rng, 40, 12);
        let (meta, qc, ip_b, ip_r) = parts_for(&p);
        let head_ip = ip_b * meta.dist_to_centroid as f64 * qc.q_head_dist as f64;
        let dis = l2_sq_f64(&p.x, &p.q);
        let s2 = stage_two_distance(&meta, &qc, head_ip as f32) as f64;
        assert!((s2 - (dis + 2.0 * ip_r)).abs() < 1e-4 * dis);
    }

    /// Quantized estimates over random pairs sharing a centroid.
    fn quantized_trials(
        n: usize,
        dim: usize,
        d: usize,
        seed: u64,
    ) -> Vec<(f64, f64, f64, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rot = random_orthogonal(d, seed).unwrap();
        (0..n)
            .map(|_| {
                let p = random_pair(&mut rng, dim, d);
                let (mut meta, qc, _, ip_r) = parts_for(&p);
                let xb: Vec<f32> = p.x[..d]
                    .iter()
                    .zip(&p.c)
                    .map(|(a, c)| (a - c) / meta.dist_to_centroid)
                    .collect();
                let qb: Vec<f32> = p.q[..d]
                    .iter()
                    .zip(&p.c)
                    .map(|(a, c)| (a - c) / qc.q_head_dist)
                    .collect();
                let (code, factors) = quantize_vector(&xb, &rot).unwrap();
                meta.factors = factors;
                let qq = quantize_query(&qb, &rot, 4).unwrap();
                let est = estimate_inner_product(&code, factors, &qq).unwrap();
                let dis = l2_sq_f64(&p.x, &p.q);
                let approx = approximate_distance(&meta, &qc, est) as f64;
                let (eps_b, _) = combined_error(&meta, &qc);
                let ip_err = (est as f64 - dot(&xb, &qb)).abs();
                let ip_bound = (factors.err_coeff * qc.epsilon0) as f64;
                // (distance error, distance bound, ip error, ip bound, residual)
                let bound = eps_b as f64 + 2.0 * ip_r.abs();
                ((approx - dis).abs(), bound, ip_err, ip_bound, ip_r)
            })
            .collect()
    }

    #[test]
    fn distance_bound_fails_only_when_estimator_bound_fails() {
        // |dis' - dis| = |2 a b (true - est) + 2 <x_r,q_r>|, so by the triangle
        // inequality the distance bound can only break when the estimator
        // leaves its own interval.
        let trials = quantized_trials(10_000, 96, 32, 7);
        let mut dist_viol = 0;
        let mut ip_viol = 0;
        for &(err, bound, ip_err, ip_bound, _) in &trials {
            let dv = err > bound * (1.0 + 1e-4) + 1e-5;
            let iv = ip_err > ip_bound;
            if dv {
                assert!(iv, "distance bound broke while the estimator held");
                dist_viol += 1;
            }
            ip_viol += iv as usize;
        }
        assert!(dist_viol <= ip_viol);
        // Roughly half the estimator failures align with the residual sign.
        assert!((dist_viol as f64) < 0.08 * trials.len() as f64);
    }

    #[test]
    fn union_bound_coverage() {
        // dis >= dis' - eps_b - eps_r on at least 1 - 2 exp(-c0 eps0^2) - 1/m^2
        // of pairs, with sigma from the per-coordinate variances of the tail.
        let dim = 96;
        let d = 32;
        let variances: Vec<f32> = (d..dim).map(|i| 1.0 / (1.0 + i as f32)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rot = random_orthogonal(d, 8).unwrap();
        let (m, eps0, c0) = (DEFAULT_M, 1.9f32, 0.5f64);
        let mut covered = 0;
        let n = 5_000;
        for _ in 0..n {
            let p = random_pair(&mut rng, dim, d);
            let (mut meta, mut qc, _, _) = parts_for(&p);
            qc.sigma = residual_variance(&p.q[d..], &variances).unwrap();
            qc.m = m;
            let xb: Vec<f32> = p.x[..d]
                .iter()
                .zip(&p.c)
                .map(|(a, c)| (a - c) / meta.dist_to_centroid)
                .collect();
            let qb: Vec<f32> = p.q[..d]
                .iter()
                .zip(&p.c)
                .map(|(a, c)| (a - c) / qc.q_head_dist)
                .collect();
            let (code, factors) = quantize_vector(&xb, &rot).unwrap();
            meta.factors = factors;
            let qq = quantize_query(&qb, &rot, 4).unwrap();
            let est = estimate_inner_product(&code, factors, &qq).unwrap();
            let approx = approximate_distance(&meta, &qc, est);
            let (eb, er) = combined_error(&meta, &qc);
            if l2_sq_f64(&p.x, &p.q) >= (approx - eb - er) as f64 {
                covered += 1;
            }
        }
        let floor = 1.0 - 2.0 * (-c0 * (eps0 as f64).powi(2)).exp() - 1.0 / (m as f64).powi(2);
        assert!(covered as f64 / n as f64 >= floor);
    }

    #[test]
    fn decisions() {
        assert_eq!(
            should_refine(10.0, 0.0, 0.0, f32::INFINITY),
            Decision::Refine
        );
        assert_eq!(
            should_refine(1e30, 0.0, 0.0, f32::INFINITY),
            Decision::Refine
        );
        // dis' - eps_b - eps_r == tau prunes.
        assert_eq!(should_refine(5.0, 1.0, 1.0, 3.0), Decision::Prune);
        assert_eq!(should_refine(5.0, 1.0, 1.5, 3.0), Decision::CheckStage2);
        assert_eq!(stage_two(4.0, 1.0, 3.0), Decision::Prune);
        assert_eq!(stage_two(3.5, 1.0, 3.0), Decision::Refine);
    }
}
