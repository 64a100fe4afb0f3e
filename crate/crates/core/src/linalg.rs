//! Symmetric positive definite systems and ellipsoidal model families.
//!
//! Everything here is dense and Cholesky-based. The one operation the rest of
//! the crate leans on is [`EllipsoidFamily::linear_range`]: the exact min/max
//! of a linear functional `a . w` over the ellipsoid
//! `(w - c)^T A (w - c) <= r^2`, computed as `a . c -/+ r * ||a'||` where
//! `L a' = a` is solved by forward substitution against the Cholesky factor
//! `A = L L^T`. No matrix is ever inverted explicitly.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::{dot, Matrix};
use crate::{Error, Result};

/// Relative tolerance of the symmetry check at `SpdMatrix` construction.
const SYMMETRY_TOL: f64 = 1e-10;

/// Lower triangular Cholesky factor, row-major with the strict upper part zero.
#[derive(Clone, Debug)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    /// Cholesky-Crout factorization of a symmetric `dim x dim` buffer.
    /// Fails with the index of the first non-positive pivot.
    pub fn factor(dim: usize, sym: &[f64]) -> Result<Self> {
        if sym.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: sym.len(),
            });
        }
        let mut l = vec![0.0; dim * dim];
        for j in 0..dim {
            let mut s = sym[j * dim + j];
            for k in 0..j {
                s -= l[j * dim + k] * l[j * dim + k];
            }
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: s });
            }
            let piv = s.sqrt();
            l[j * dim + j] = piv;
            for i in (j + 1)..dim {
                let mut v = sym[i * dim + j];
                for k in 0..j {
                    v -= l[i * dim + k] * l[j * dim + k];
                }
                l[i * dim + j] = v / piv;
            }
        }
        Ok(LowerTriangular { dim, data: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Solves `L y = b` by forward substitution.
    pub fn forward_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.data[i * n + k] * y[k];
            }
            y[i] = s / self.data[i * n + i];
        }
        Ok(y)
    }

    /// Solves `L^T x = b` by back substitution.
    pub fn transpose_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        let n = self.dim;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.data[k * n + i] * x[k];
            }
            x[i] = s / self.data[i * n + i];
        }
        Ok(x)
    }

    /// `L L^T`, for reconstruction checks.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    s += self.data[i * n + k] * self.data[j * n + k];
                }
                m[i * n + j] = s;
            }
        }
        m
    }
}

/// Symmetric positive definite matrix. Construction checks symmetry (relative
/// tolerance 1e-10), symmetrizes exactly, and runs the Cholesky factorization,
/// so a value of this type always carries a valid factor.
#[derive(Clone, Debug)]
pub struct SpdMatrix {
    dim: usize,
    data: Vec<f64>,
    chol: LowerTriangular,
}

impl SpdMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let scale = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut sym = data;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = sym[i * dim + j];
                let b = sym[j * dim + i];
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                sym[i * dim + j] = avg;
                sym[j * dim + i] = avg;
            }
        }
        let chol = LowerTriangular::factor(dim, &sym)?;
        Ok(SpdMatrix {
            dim,
            data: sym,
            chol,
        })
    }

    /// `scale * X^T X`. The Gram accumulation is exactly symmetric by
    /// construction, so only positive definiteness can fail here.
    pub fn from_gram(x: &Matrix, scale: f64) -> Result<Self> {
        let mut g = x.gram();
        for v in &mut g {
            *v *= scale;
        }
        SpdMatrix::new(x.cols(), g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn cholesky(&self) -> &LowerTriangular {
        &self.chol
    }

    /// Solves `M x = rhs` through the cached factor.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let y = self.chol.forward_solve(rhs)?;
        self.chol.transpose_solve(&y)
    }

    /// `v^T M v`, evaluated as `||L^T v||^2` so it is never negative.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let n = self.dim;
        let mut total = 0.0;
        // (L^T v)_i = sum_{k >= i} L_{k,i} v_k
        for i in 0..n {
            let mut s = 0.0;
            for k in i..n {
                s += self.chol.data[k * n + i] * v[k];
            }
            total += s * s;
        }
        Ok(total)
    }

    pub fn mat_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok((0..self.dim)
            .map(|i| dot(&self.data[i * self.dim..(i + 1) * self.dim], v))
            .collect())
    }
}

/// The set `{ w : (w - center)^T shape (w - center) <= radius_sq }`, i.e. all
/// parameter vectors whose quadratic empirical loss stays within
/// `min_loss + radius_sq`.
#[derive(Clone, Debug)]
pub struct EllipsoidFamily {
    center: Vec<f64>,
    shape: Arc<SpdMatrix>,
    radius_sq: f64,
    min_loss: f64,
}

impl EllipsoidFamily {
    pub fn new(
        center: Vec<f64>,
        shape: Arc<SpdMatrix>,
        radius_sq: f64,
        min_loss: f64,
    ) -> Result<Self> {
        if center.len() != shape.dim() {
            return Err(Error::DimensionMismatch {
                expected: shape.dim(),
                got: center.len(),
            });
        }
        if !(radius_sq >= 0.0) {
            return Err(Error::invalid(format!(
                "ellipsoid radius_sq must be non-negative, got {radius_sq}"
            )));
        }
        Ok(EllipsoidFamily {
            center,
            shape,
            radius_sq,
            min_loss,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn shape(&self) -> &SpdMatrix {
        &self.shape
    }

    pub fn radius_sq(&self) -> f64 {
        self.radius_sq
    }

    pub fn min_loss(&self) -> f64 {
        self.min_loss
    }

    /// Exact `(min, max)` of `a . w` over the family.
    ///
    /// With `A = L L^T` the extrema are `a . center -/+ sqrt(radius_sq) *
    /// ||a'||` where `a'` solves `L a' = a`.
    pub fn linear_range(&self, a: &[f64]) -> Result<(f64, f64)> {
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.len(),
            });
        }
        let a_prime = self.shape.cholesky().forward_solve(a)?;
        let span = self.radius_sq.sqrt() * dot(&a_prime, &a_prime).sqrt();
        let at_center = dot(a, &self.center);
        Ok((at_center - span, at_center + span))
    }

    /// Squared Mahalanobis distance of `w` from the center under `shape`.
    pub fn mahalanobis_sq(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        let diff: Vec<f64> = w.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.shape.quad_form(&diff)
    }

    /// The quadratic empirical loss this family encodes, evaluated at `w`.
    pub fn loss_at(&self, w: &[f64]) -> Result<f64> {
        Ok(self.min_loss + self.mahalanobis_sq(w)?)
    }

    pub fn contains(&self, w: &[f64]) -> Result<bool> {
        // Small relative slack: membership tests on sampled boundary points
        // must not flicker on the last bit.
        let slack = 1e-12 * self.radius_sq.max(1.0);
        Ok(self.mahalanobis_sq(w)? <= self.radius_sq + slack)
    }

    /// A model drawn uniformly from the family (rejection-free: uniform in the
    /// unit ball mapped through the inverse transposed factor).
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        let z = sample_ball(rng, n);
        self.push_forward(&z)
    }

    /// A model drawn uniformly from the loss boundary of the family.
    pub fn sample_boundary<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        let z = sample_sphere(rng, n);
        self.push_forward(&z)
    }

    /// center + sqrt(radius_sq) * L^{-T} z
    fn push_forward(&self, z: &[f64]) -> Vec<f64> {
        let w = self
            .shape
            .cholesky()
            .transpose_solve(z)
            .expect("dimension fixed by construction");
        let r = self.radius_sq.sqrt();
        w.iter()
            .zip(&self.center)
            .map(|(wi, ci)| ci + r * wi)
            .collect()
    }
}

fn sample_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&z, &z).sqrt();
        if norm > 1e-12 {
            return z.iter().map(|v| v / norm).collect();
        }
    }
}

fn sample_ball<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let s = sample_sphere(rng, n);
    let u: f64 = rng.gen();
    let r = u.powf(1.0 / n as f64);
    s.iter().map(|v| v * r).collect()
}
