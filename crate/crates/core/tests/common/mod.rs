//! Shared oracles for the integration suites.
//!
//! Everything here recomputes results along an independent path (Gaussian
//! elimination instead of Cholesky, Householder QR instead of normal
//! equations, exhaustive enumeration instead of closed forms) so agreement
//! is evidence, not tautology.
#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rashomon_core::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean squared error.
pub fn mse(preds: &[f64], y: &[f64]) -> f64 {
    preds
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / y.len() as f64
}

/// Population variance.
pub fn variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Solves `a x = b` (row-major `n x n`) by Gaussian elimination with partial
/// pivoting — deliberately not Cholesky.
pub fn gauss_solve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| m[i * n + k].abs().partial_cmp(&m[j * n + k].abs()).unwrap())
            .unwrap();
        if pivot != k {
            for j in 0..n {
                m.swap(k * n + j, pivot * n + j);
            }
            rhs.swap(k, pivot);
        }
        assert!(m[k * n + k].abs() > 1e-300, "singular system in oracle");
        for i in k + 1..n {
            let f = m[i * n + k] / m[k * n + k];
            for j in k..n {
                m[i * n + j] -= f * m[k * n + j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in i + 1..n {
            s -= m[i * n + j] * x[j];
        }
        x[i] = s / m[i * n + i];
    }
    x
}

/// Least squares via Householder QR — deliberately not the normal equations.
pub fn lstsq_qr(h: &Matrix, y: &[f64]) -> Vec<f64> {
    let m = h.rows();
    let n = h.cols();
    assert!(m >= n);
    let mut a = h.data().to_vec();
    let mut b = y.to_vec();
    let mut v = vec![0.0; m];
    for k in 0..n {
        let norm: f64 = (k..m).map(|i| a[i * n + k] * a[i * n + k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k * n + k] > 0.0 { -norm } else { norm };
        for vi in v.iter_mut().take(k) {
            *vi = 0.0;
        }
        v[k] = a[k * n + k] - alpha;
        for i in k + 1..m {
            v[i] = a[i * n + k];
        }
        let vtv: f64 = (k..m).map(|i| v[i] * v[i]).sum();
        if vtv == 0.0 {
            continue;
        }
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i] * a[i * n + j]).sum();
            let f = 2.0 * s / vtv;
            for i in k..m {
                a[i * n + j] -= f * v[i];
            }
        }
        let s: f64 = (k..m).map(|i| v[i] * b[i]).sum();
        let f = 2.0 * s / vtv;
        for i in k..m {
            b[i] -= f * v[i];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i * n + j] * x[j];
        }
        assert!(a[i * n + i].abs() > 1e-300, "rank-deficient design in oracle");
        x[i] = s / a[i * n + i];
    }
    x
}

/// Extrema of `a . w` over `(w - c)^T A (w - c) <= r2` by the Lagrangian
/// stationarity condition: `w* = c +- sqrt(r2 / (a^T A^{-1} a)) A^{-1} a`,
/// solved with Gaussian elimination.
pub fn ellipsoid_range_oracle(
    shape: &[f64],
    center: &[f64],
    radius_sq: f64,
    a: &[f64],
) -> (f64, f64) {
    let ainv_a = gauss_solve(shape, a);
    let q = dot(a, &ainv_a).max(0.0);
    let span = radius_sq.sqrt() * q.sqrt();
    let at_center = dot(a, center);
    (at_center - span, at_center + span)
}

/// The maximizing parameter vector itself (`+` branch), for membership
/// cross-checks.
pub fn ellipsoid_argmax_oracle(
    shape: &[f64],
    center: &[f64],
    radius_sq: f64,
    a: &[f64],
) -> Vec<f64> {
    let ainv_a = gauss_solve(shape, a);
    let q = dot(a, &ainv_a);
    if q <= 0.0 {
        return center.to_vec();
    }
    let scale = (radius_sq / q).sqrt();
    center
        .iter()
        .zip(&ainv_a)
        .map(|(c, v)| c + scale * v)
        .collect()
}

/// A random symmetric positive definite matrix `B^T B + 0.5 I`, exactly
/// symmetric by construction.
pub fn random_spd<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    let b: Vec<f64> = (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in i..d {
            let mut s = 0.0;
            for k in 0..d {
                s += b[k * d + i] * b[k * d + j];
            }
            if i == j {
                s += 0.5;
            }
            a[i * d + j] = s;
            a[j * d + i] = s;
        }
    }
    a
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
            break;
        };
        let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
        cur.swap(i, j);
        cur[i + 1..].reverse();
    }
    out
}

/// Exact Shapley values of `predict` at `x` by full permutation enumeration,
/// with `groups` as players and hybrid inputs against each background row
/// (interventional semantics): the value of a coalition is the mean
/// prediction with coalition columns from `x` and the rest from the
/// background row.
pub fn permutation_shap(
    predict: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    background: &Matrix,
    groups: &[Vec<usize>],
) -> Vec<f64> {
    let g = groups.len();
    let perms = permutations(g);
    let mut phi = vec![0.0; g];
    for bi in 0..background.rows() {
        let z = background.row(bi);
        for perm in &perms {
            let mut hybrid = z.to_vec();
            let mut prev = predict(&hybrid);
            for &gi in perm {
                for &c in &groups[gi] {
                    hybrid[c] = x[c];
                }
                let cur = predict(&hybrid);
                phi[gi] += cur - prev;
                prev = cur;
            }
        }
    }
    let norm = background.rows() as f64 * perms.len() as f64;
    for v in &mut phi {
        *v /= norm;
    }
    phi
}

/// Brute-force `(min, max)` of subset means over all subsets of size at
/// least `m`. Each candidate subset is summed in ascending value order, the
/// same order a sorted partial sum uses, so the winning mean is bit-equal.
pub fn subset_minmax_oracle(values: &[f64], m: usize) -> (f64, f64) {
    let n = values.len();
    assert!(n <= 20 && m >= 1 && m <= n);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for mask in 1u32..(1u32 << n) {
        let k = mask.count_ones() as usize;
        if k < m {
            continue;
        }
        let mut subset: Vec<f64> = (0..n)
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| values[i])
            .collect();
        subset.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = subset.iter().sum::<f64>() / k as f64;
        lo = lo.min(mean);
        hi = hi.max(mean);
    }
    (lo, hi)
}

/// Boolean transitive closure (reachability), Floyd-Warshall style.
pub fn transitive_closure(adj: &[bool], n: usize) -> Vec<bool> {
    let mut r = adj.to_vec();
    for k in 0..n {
        for i in 0..n {
            if r[i * n + k] {
                for j in 0..n {
                    if r[k * n + j] {
                        r[i * n + j] = true;
                    }
                }
            }
        }
    }
    r
}
