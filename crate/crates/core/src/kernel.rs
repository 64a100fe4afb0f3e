//! Kernel ridge regression and path-integral attributions.
//!
//! Models are `h(x) = sum_j alpha_j k(x, r_j)` over a fixed dictionary of
//! reference points. Ridge fitting solves `(K + lambda R I) alpha = y`; the
//! admissible set under the regularized loss is again an ellipsoid, now in
//! `alpha` space with shape `(K/R + lambda I) K`.
//!
//! Attributions integrate the kernel gradient along the straight path from a
//! baseline `z` to the instance `x` (composite trapezoid rule). The result is
//! a `d x R` matrix `Phi` with `phi_ij` the contribution of dictionary atom
//! `j` to feature `i`; the attribution of any model `alpha` is `Phi alpha`,
//! linear in `alpha`, so exact ranges over the family are linear range
//! queries. Quadrature makes additivity only approximate; [`gap_error`]
//! reports the defect and shrinks at second order in the step count.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::exec;
use crate::linalg::{EllipsoidFamily, SpdMatrix};
use crate::matrix::{dot, Matrix};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `exp(-gamma ||x - x'||^2)`
    Gaussian { gamma: f64 },
    /// `(gamma <x, x'> + 1)^degree`
    Polynomial { gamma: f64, degree: u32 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let gamma = match self {
            KernelSpec::Gaussian { gamma } => *gamma,
            KernelSpec::Polynomial { gamma, degree } => {
                if *degree == 0 {
                    return Err(Error::invalid("polynomial degree must be at least 1"));
                }
                *gamma
            }
        };
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(())
    }
}

pub fn kernel_eval(spec: &KernelSpec, a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    match *spec {
        KernelSpec::Gaussian { gamma } => {
            let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            (-gamma * sq).exp()
        }
        KernelSpec::Polynomial { gamma, degree } => (gamma * dot(a, b) + 1.0).powi(degree as i32),
    }
}

/// `d k(x, b) / d x_i` evaluated at `x = a`.
pub fn kernel_grad(spec: &KernelSpec, a: &[f64], b: &[f64], i: usize) -> f64 {
    match *spec {
        KernelSpec::Gaussian { gamma } => {
            -2.0 * gamma * (a[i] - b[i]) * kernel_eval(spec, a, b)
        }
        KernelSpec::Polynomial { gamma, degree } => {
            let base = (gamma * dot(a, b) + 1.0).powi(degree as i32 - 1);
            degree as f64 * gamma * b[i] * base
        }
    }
}

/// A fitted kernel ridge model over a fixed dictionary.
#[derive(Clone, Debug)]
pub struct KrrFit {
    pub spec: KernelSpec,
    pub lambda: f64,
    pub dictionary: Matrix,
    pub alpha: Vec<f64>,
    /// Training objective at the optimum: mean squared residual plus
    /// `lambda` times the squared model norm `alpha^T K alpha`.
    pub reg_loss: f64,
    pub column_names: Vec<String>,
}

/// Solves `(K + lambda R I) alpha = y` and records the regularized loss.
pub fn fit_krr(
    dictionary: &Matrix,
    y: &[f64],
    spec: &KernelSpec,
    lambda: f64,
) -> Result<KrrFit> {
    spec.validate()?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let r = dictionary.rows();
    if y.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: y.len(),
        });
    }
    if r == 0 {
        return Err(Error::invalid("cannot fit on an empty dictionary"));
    }
    let k = gram_kernel(spec, dictionary);
    let mut system = k.clone();
    let ridge = lambda * r as f64;
    for i in 0..r {
        system[i * r + i] += ridge;
    }
    let system = SpdMatrix::new(r, system)?;
    let alpha = system.solve(y)?;
    let preds = mat_vec_sym(&k, &alpha);
    let data_loss = preds
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / r as f64;
    let norm_sq = dot(&alpha, &preds);
    Ok(KrrFit {
        spec: *spec,
        lambda,
        dictionary: dictionary.clone(),
        alpha,
        reg_loss: data_loss + lambda * norm_sq,
        column_names: default_names(dictionary.cols()),
    })
}

fn default_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

impl KrrFit {
    pub fn n_features(&self) -> usize {
        self.dictionary.cols()
    }

    pub fn n_atoms(&self) -> usize {
        self.dictionary.rows()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict_with(&self.alpha, x)
    }

    /// Prediction of an arbitrary member `alpha` of the family at `x`.
    pub fn predict_with(&self, alpha: &[f64], x: &[f64]) -> f64 {
        debug_assert_eq!(alpha.len(), self.n_atoms());
        (0..self.n_atoms())
            .map(|j| alpha[j] * kernel_eval(&self.spec, x, self.dictionary.row(j)))
            .sum()
    }

    /// Coefficient vector over `alpha` of the prediction difference
    /// `h(x) - h(z)`; exact, no quadrature involved.
    pub fn gap_coeffs(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        (0..self.n_atoms())
            .map(|j| {
                let rj = self.dictionary.row(j);
                kernel_eval(&self.spec, x, rj) - kernel_eval(&self.spec, z, rj)
            })
            .collect()
    }

    /// Structural consistency check for deserialized models.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(self.lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if self.alpha.len() != self.n_atoms() {
            return Err(Error::DimensionMismatch {
                expected: self.n_atoms(),
                got: self.alpha.len(),
            });
        }
        if self.column_names.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: self.column_names.len(),
            });
        }
        if !self.reg_loss.is_finite() || self.reg_loss < 0.0 {
            return Err(Error::invalid("reg_loss must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Dense kernel Gram matrix, filled symmetrically.
fn gram_kernel(spec: &KernelSpec, points: &Matrix) -> Vec<f64> {
    let r = points.rows();
    let mut k = vec![0.0; r * r];
    for i in 0..r {
        for j in i..r {
            let v = kernel_eval(spec, points.row(i), points.row(j));
            k[i * r + j] = v;
            k[j * r + i] = v;
        }
    }
    k
}

fn mat_vec_sym(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// Quadratic geometry of the regularized loss around the ridge optimum:
/// `S = K^2 / R + lambda K`, exactly symmetric because `K` is. Computed once
/// and shared when the same fit is queried at several loss levels.
pub fn ellipsoid_shape(fit: &KrrFit) -> Result<SpdMatrix> {
    ellipsoid_shape_jittered(fit, 0.0)
}

/// [`ellipsoid_shape`] with `jitter` added to the diagonal. The kernel Gram
/// matrix is exactly singular whenever the dictionary overruns the feature
/// space of the kernel (a degree-`p` polynomial kernel in `d` variables spans
/// only `C(d + p, p)` monomials), and then the shape has zero pivots too.
/// Inflating the diagonal restores definiteness but shrinks the admissible
/// set along the degenerate directions, so it is never applied implicitly:
/// callers must opt in with an explicit positive `jitter`.
pub fn ellipsoid_shape_jittered(fit: &KrrFit, jitter: f64) -> Result<SpdMatrix> {
    if !jitter.is_finite() || jitter < 0.0 {
        return Err(Error::invalid(format!(
            "jitter must be finite and non-negative, got {jitter}"
        )));
    }
    let r = fit.n_atoms();
    let k = gram_kernel(&fit.spec, &fit.dictionary);
    let rn = r as f64;
    let mut s = vec![0.0; r * r];
    for i in 0..r {
        let ki = &k[i * r..(i + 1) * r];
        for j in 0..r {
            let mut acc = 0.0;
            for l in 0..r {
                acc += ki[l] * k[l * r + j];
            }
            s[i * r + j] = acc / rn + fit.lambda * k[i * r + j];
        }
        s[i * r + i] += jitter;
    }
    SpdMatrix::new(r, s)
}

/// The set of coefficient vectors whose regularized loss is at most
/// `epsilon`: an ellipsoid centered at the ridge optimum with shape
/// [`ellipsoid_shape`] and squared radius `epsilon - reg_loss`.
pub fn rashomon_krr(fit: &KrrFit, epsilon: f64) -> Result<EllipsoidFamily> {
    if epsilon < fit.reg_loss {
        return Err(Error::EmptyRashomon {
            epsilon,
            min_loss: fit.reg_loss,
        });
    }
    let shape = ellipsoid_shape(fit)?;
    EllipsoidFamily::new(
        fit.alpha.clone(),
        Arc::new(shape),
        epsilon - fit.reg_loss,
        fit.reg_loss,
    )
}

/// Path-integral attribution matrix for one instance against one baseline.
#[derive(Clone, Debug)]
pub struct IgPathMatrix {
    /// `d x R`; row `i` is the coefficient vector of feature `i`'s
    /// attribution as a linear functional of `alpha`.
    pub phi: Matrix,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub steps: usize,
}

/// Integrates the kernel gradient along `t x + (1 - t) z`, `t` in `[0, 1]`,
/// with the composite trapezoid rule on `steps` equal subintervals:
/// `phi_ij = (x_i - z_i) * integral of d k(., r_j)/d x_i along the path`.
pub fn ig_path_matrix(fit: &KrrFit, x: &[f64], z: &[f64], steps: usize) -> Result<IgPathMatrix> {
    let d = fit.n_features();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if z.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: z.len(),
        });
    }
    if steps == 0 {
        return Err(Error::invalid("quadrature needs at least one step"));
    }
    let r = fit.n_atoms();
    let spec = fit.spec;
    let h = 1.0 / steps as f64;
    // Path points are shared by all dictionary atoms.
    let path: Vec<Vec<f64>> = (0..=steps)
        .map(|k| {
            let t = k as f64 * h;
            x.iter()
                .zip(z)
                .map(|(xi, zi)| t * xi + (1.0 - t) * zi)
                .collect()
        })
        .collect();
    let cols: Vec<Vec<f64>> = exec::map_indexed(r, |j| {
        let rj = fit.dictionary.row(j);
        let mut acc = vec![0.0; d];
        for (k, p) in path.iter().enumerate() {
            let w = if k == 0 || k == steps { 0.5 * h } else { h };
            match spec {
                KernelSpec::Gaussian { gamma } => {
                    let kv = kernel_eval(&spec, p, rj);
                    for i in 0..d {
                        acc[i] += w * (-2.0 * gamma * (p[i] - rj[i]) * kv);
                    }
                }
                KernelSpec::Polynomial { gamma, degree } => {
                    let base = (gamma * dot(p, rj) + 1.0).powi(degree as i32 - 1);
                    let scale = degree as f64 * gamma * base;
                    for i in 0..d {
                        acc[i] += w * scale * rj[i];
                    }
                }
            }
        }
        for i in 0..d {
            acc[i] *= x[i] - z[i];
        }
        acc
    });
    let mut phi = Matrix::zeros(d, r);
    for (j, col) in cols.iter().enumerate() {
        for i in 0..d {
            phi.set(i, j, col[i]);
        }
    }
    Ok(IgPathMatrix {
        phi,
        x: x.to_vec(),
        z: z.to_vec(),
        steps,
    })
}

impl IgPathMatrix {
    /// Attribution vector `Phi alpha` of one family member.
    pub fn attributions(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        self.phi.mat_vec(alpha)
    }
}

/// Absolute defect of quadrature additivity for one model: the summed
/// attributions of `alpha` against the exact prediction difference
/// `h(x) - h(z)`.
pub fn gap_error(fit: &KrrFit, alpha: &[f64], phi: &IgPathMatrix) -> Result<f64> {
    if alpha.len() != fit.n_atoms() {
        return Err(Error::DimensionMismatch {
            expected: fit.n_atoms(),
            got: alpha.len(),
        });
    }
    let total: f64 = phi.attributions(alpha)?.iter().sum();
    let gap = fit.predict_with(alpha, &phi.x) - fit.predict_with(alpha, &phi.z);
    Ok((total - gap).abs())
}

/// Serialized form: the dictionary may be embedded or referenced by path.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KrrFitFile {
    pub spec: KernelSpec,
    pub lambda: f64,
    pub dictionary: DictionarySource,
    pub alpha: Vec<f64>,
    pub reg_loss: f64,
    pub column_names: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DictionarySource {
    Inline(Vec<Vec<f64>>),
    Path { path: String },
}

impl KrrFitFile {
    pub fn from_fit(fit: &KrrFit) -> Self {
        KrrFitFile {
            spec: fit.spec,
            lambda: fit.lambda,
            dictionary: DictionarySource::Inline(fit.dictionary.to_row_vecs()),
            alpha: fit.alpha.clone(),
            reg_loss: fit.reg_loss,
            column_names: fit.column_names.clone(),
        }
    }

    /// Resolves the dictionary (loading by path through `load` if needed)
    /// and validates the result.
    pub fn into_fit(self, load: impl FnOnce(&str) -> Result<Matrix>) -> Result<KrrFit> {
        let dictionary = match self.dictionary {
            DictionarySource::Inline(rows) => Matrix::from_rows(&rows)?,
            DictionarySource::Path { path } => load(&path)?,
        };
        let fit = KrrFit {
            spec: self.spec,
            lambda: self.lambda,
            dictionary,
            alpha: self.alpha,
            reg_loss: self.reg_loss,
            column_names: self.column_names,
        };
        fit.validate()?;
        Ok(fit)
    }
}
