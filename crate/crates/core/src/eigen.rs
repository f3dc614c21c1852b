//! Cyclic Jacobi eigensolver for dense symmetric matrices.

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Row `i` is the unit eigenvector for `values[i]`.
    pub vectors: Vec<f64>,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;
const TOLERANCE: f64 = 1e-9;

/// Diagonalizes the row-major symmetric `n x n` matrix `a`.
///
/// Each sweep visits every off-diagonal pair once in round-robin order, so a
/// round rotates `n / 2` disjoint pairs together: rows first, then columns
/// one matrix row at a time. Sweeps run until the off-diagonal Frobenius
/// norm drops below `1e-9 * |trace|` or 100 sweeps elapse. Eigenpairs come
/// back unsorted.
pub fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> SymmetricEigen {
    assert_eq!(a.len(), n * n);
    let mut v = vec![0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let trace: f64 = (0..n).map(|i| a[i * n + i]).sum::<f64>().abs();
    let threshold = TOLERANCE * trace.max(f64::MIN_POSITIVE);

    // Round-robin schedule over an even number of slots; slot `n` is a bye.
    let slots = n + n % 2;
    let mut ring: Vec<usize> = (0..slots).collect();
    let mut active: Vec<Rotation> = Vec::with_capacity(slots / 2);
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && off_diagonal_norm(&a, n) >= threshold {
        for _round in 1..slots {
            active.clear();
            for i in 0..slots / 2 {
                let (x, y) = (ring[i], ring[slots - 1 - i]);
                if x >= n || y >= n {
                    continue;
                }
                let (p, q) = (x.min(y), x.max(y));
                if let Some(r) = Rotation::annihilating(&mut a, n, p, q, sweeps > 3) {
                    active.push(r);
                }
            }
            apply_round(&mut a, &mut v, n, &active);
            ring[1..].rotate_right(1);
        }
        sweeps += 1;
    }

    SymmetricEigen {
        values: (0..n).map(|i| a[i * n + i]).collect(),
        vectors: v,
        sweeps,
    }
}

#[derive(Clone, Copy, Debug)]
struct Rotation {
    p: usize,
    q: usize,
    c: f64,
    s: f64,
    app: f64,
    aqq: f64,
}

impl Rotation {
    /// Rotation zeroing `a[p][q]`, or `None` when there is nothing to do.
    fn annihilating(a: &mut [f64], n: usize, p: usize, q: usize, late: bool) -> Option<Self> {
        let apq = a[p * n + q];
        if apq == 0.0 {
            return None;
        }
        let app = a[p * n + p];
        let aqq = a[q * n + q];
        // Late sweeps: drop entries too small to move the diagonal.
        if late
            && app.abs() + 100.0 * apq.abs() == app.abs()
            && aqq.abs() + 100.0 * apq.abs() == aqq.abs()
        {
            a[p * n + q] = 0.0;
            a[q * n + p] = 0.0;
            return None;
        }
        let theta = (aqq - app) / (2.0 * apq);
        let t = if theta.is_infinite() {
            0.5 / theta
        } else {
            theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
        };
        let c = 1.0 / (t * t + 1.0).sqrt();
        Some(Self {
            p,
            q,
            c,
            s: t * c,
            app: app - t * apq,
            aqq: aqq + t * apq,
        })
    }
}

/// `A <- J^T A J` and `V <- J^T V` for a product `J` of disjoint rotations.
fn apply_round(a: &mut [f64], v: &mut [f64], n: usize, rots: &[Rotation]) {
    if rots.is_empty() {
        return;
    }
    for m in [&mut *a, &mut *v] {
        for r in rots {
            let (lo, hi) = m.split_at_mut(r.q * n);
            let rp = &mut lo[r.p * n..(r.p + 1) * n];
            let rq = &mut hi[..n];
            for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
                let (xp, xq) = (*x, *y);
                *x = r.c * xp - r.s * xq;
                *y = r.s * xp + r.c * xq;
            }
        }
    }
    for row in a.chunks_exact_mut(n) {
        for r in rots {
            let (xp, xq) = (row[r.p], row[r.q]);
            row[r.p] = r.c * xp - r.s * xq;
            row[r.q] = r.s * xp + r.c * xq;
        }
    }
    for r in rots {
        a[r.p * n + r.p] = r.app;
        a[r.q * n + r.q] = r.aqq;
        a[r.p * n + r.q] = 0.0;
        a[r.q * n + r.p] = 0.0;
    }
}

fn off_diagonal_norm(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += a[i * n + j] * a[i * n + j];
        }
    }
    (2.0 * s).sqrt()
}
