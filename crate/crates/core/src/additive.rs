//! Additive models over per-feature basis expansions.
//!
//! Each feature contributes either itself (`Linear`) or a clamped B-spline
//! expansion (`Spline`), plus a global intercept. The least-squares optimum
//! and the quadratic geometry of the squared loss make the admissible set an
//! ellipsoid in weight space, and attributions of an instance are linear
//! functionals of the weights, so exact attribution ranges reduce to
//! [`EllipsoidFamily::linear_range`].
//!
//! The attribution of feature `j` at `x` is the fitted contribution at `x_j`
//! minus its training mean; summed over features this telescopes exactly to
//! the prediction gap `h(x) - mean h`, so per-instance additivity holds to
//! machine precision.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::linalg::{EllipsoidFamily, SpdMatrix};
use crate::matrix::{dot, Matrix};
use crate::{Error, Result};

/// Basis choice for one feature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureBasis {
    /// The raw feature value, one column.
    Linear,
    /// Clamped B-splines of the given degree over `n_knots` sites placed at
    /// equally spaced quantiles of the training column (the extreme sites are
    /// the column min/max). Outside the training range the boundary
    /// polynomial pieces are extended.
    Spline { degree: usize, n_knots: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub features: Vec<FeatureBasis>,
}

impl BasisSpec {
    pub fn all_linear(d: usize) -> Self {
        BasisSpec {
            features: vec![FeatureBasis::Linear; d],
        }
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }
}

/// Evaluable bases: the spec plus the resolved knot sites per feature
/// (empty for linear features).
#[derive(Clone, Debug)]
pub struct Bases {
    spec: BasisSpec,
    knots: Vec<Vec<f64>>,
    /// Knot vectors padded with `degree` repeats of each end site.
    padded: Vec<Vec<f64>>,
    offsets: Vec<usize>,
    width: usize,
}

/// Resolves knot sites from the training data and returns evaluable bases.
pub fn build_bases(data: &Matrix, spec: &BasisSpec) -> Result<Bases> {
    if spec.n_features() != data.cols() {
        return Err(Error::DimensionMismatch {
            expected: data.cols(),
            got: spec.n_features(),
        });
    }
    let mut knots = Vec::with_capacity(spec.n_features());
    for (j, fb) in spec.features.iter().enumerate() {
        match *fb {
            FeatureBasis::Linear => knots.push(Vec::new()),
            FeatureBasis::Spline { degree, n_knots } => {
                check_spline_params(degree, n_knots)?;
                let mut col = data.column(j);
                col.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite column"));
                let distinct = count_distinct(&col);
                if distinct < n_knots {
                    return Err(Error::DegenerateColumn {
                        column: format!("{j}"),
                        reason: format!(
                            "{distinct} distinct values cannot support {n_knots} knots"
                        ),
                    });
                }
                let mut sites: Vec<f64> = (0..n_knots)
                    .map(|i| quantile(&col, i as f64 / (n_knots - 1) as f64))
                    .collect();
                sites.dedup();
                if sites.len() < 2 {
                    return Err(Error::DegenerateColumn {
                        column: format!("{j}"),
                        reason: "fewer than two distinct knot sites".to_string(),
                    });
                }
                knots.push(sites);
            }
        }
    }
    Bases::from_parts(spec.clone(), knots)
}

impl Bases {
    /// Rebuilds evaluable bases from stored parts, validating consistency.
    pub fn from_parts(spec: BasisSpec, knots: Vec<Vec<f64>>) -> Result<Self> {
        if knots.len() != spec.n_features() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_features(),
                got: knots.len(),
            });
        }
        let mut padded = Vec::with_capacity(knots.len());
        let mut offsets = Vec::with_capacity(knots.len());
        let mut width = 1; // intercept
        for (fb, sites) in spec.features.iter().zip(&knots) {
            offsets.push(width);
            match *fb {
                FeatureBasis::Linear => {
                    if !sites.is_empty() {
                        return Err(Error::invalid("linear feature carries knot sites"));
                    }
                    padded.push(Vec::new());
                    width += 1;
                }
                FeatureBasis::Spline { degree, n_knots } => {
                    check_spline_params(degree, n_knots)?;
                    if sites.len() < 2 || sites.len() > n_knots {
                        return Err(Error::invalid(format!(
                            "expected between 2 and {n_knots} knot sites, got {}",
                            sites.len()
                        )));
                    }
                    if sites.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::invalid("knot sites must be strictly increasing"));
                    }
                    let mut t = Vec::with_capacity(sites.len() + 2 * degree);
                    t.extend(std::iter::repeat(sites[0]).take(degree));
                    t.extend_from_slice(sites);
                    t.extend(std::iter::repeat(*sites.last().unwrap()).take(degree));
                    padded.push(t);
                    // One basis function fewer than the full family: the
                    // block sums to one everywhere, so keeping all of them
                    // would duplicate the intercept column exactly and make
                    // the design singular. Dropping the first function
                    // leaves the spanned function space unchanged.
                    width += sites.len() + degree - 2;
                }
            }
        }
        Ok(Bases {
            spec,
            knots,
            padded,
            offsets,
            width,
        })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn knots(&self) -> &[Vec<f64>] {
        &self.knots
    }

    pub fn n_features(&self) -> usize {
        self.spec.n_features()
    }

    /// Total design width including the intercept column.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of basis columns of feature `j` (spline blocks exclude the
    /// dropped first function).
    pub fn feature_width(&self, j: usize) -> usize {
        match self.spec.features[j] {
            FeatureBasis::Linear => 1,
            FeatureBasis::Spline { degree, .. } => self.knots[j].len() + degree - 2,
        }
    }

    /// First design column of feature `j` (column 0 is the intercept).
    pub fn feature_offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    /// Writes the basis values of feature `j` at scalar `x` into `out`.
    pub fn eval_feature(&self, j: usize, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.feature_width(j));
        match self.spec.features[j] {
            FeatureBasis::Linear => out[0] = x,
            FeatureBasis::Spline { degree, .. } => {
                let mut full = vec![0.0; self.knots[j].len() + degree - 1];
                bspline_eval(&self.knots[j], &self.padded[j], degree, x, &mut full);
                out.copy_from_slice(&full[1..]);
            }
        }
    }

    /// Writes the full design row (intercept first) for instance `x`.
    pub fn design_row(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_features());
        debug_assert_eq!(out.len(), self.width);
        out[0] = 1.0;
        for j in 0..self.n_features() {
            let off = self.offsets[j];
            let w = self.feature_width(j);
            self.eval_feature(j, x[j], &mut out[off..off + w]);
        }
    }

    /// The `N x width` design matrix of a dataset.
    pub fn design_matrix(&self, data: &Matrix) -> Result<Matrix> {
        if data.cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: data.cols(),
            });
        }
        let mut h = Matrix::zeros(data.rows(), self.width);
        for i in 0..data.rows() {
            let x = data.row(i).to_vec();
            self.design_row(&x, h.row_mut(i));
        }
        Ok(h)
    }
}

fn check_spline_params(degree: usize, n_knots: usize) -> Result<()> {
    if !(1..=3).contains(&degree) {
        return Err(Error::invalid(format!(
            "spline degree must be 1, 2 or 3, got {degree}"
        )));
    }
    if n_knots < 2 {
        return Err(Error::invalid(format!(
            "spline needs at least 2 knots, got {n_knots}"
        )));
    }
    Ok(())
}

fn count_distinct(sorted: &[f64]) -> usize {
    let mut n = 0;
    let mut prev = f64::NAN;
    for &v in sorted {
        if v != prev {
            n += 1;
            prev = v;
        }
    }
    n
}

/// Linear-interpolation quantile of a sorted slice, level in [0, 1].
fn quantile(sorted: &[f64], level: f64) -> f64 {
    let n = sorted.len();
    let pos = level * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Evaluates the complete clamped B-spline family over `sites` at `x`: all
/// `sites.len() + degree - 1` functions, which sum to one everywhere
/// (including beyond the knot range, where the boundary polynomial pieces
/// extend). Design rows drop the first of these functions; the full family
/// is exposed for inspection and testing.
pub fn spline_basis(sites: &[f64], degree: usize, x: f64) -> Result<Vec<f64>> {
    check_spline_params(degree, sites.len())?;
    if sites.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("knot sites must be strictly increasing"));
    }
    let mut padded = Vec::with_capacity(sites.len() + 2 * degree);
    padded.extend(std::iter::repeat(sites[0]).take(degree));
    padded.extend_from_slice(sites);
    padded.extend(std::iter::repeat(*sites.last().unwrap()).take(degree));
    let mut out = vec![0.0; sites.len() + degree - 1];
    bspline_eval(sites, &padded, degree, x, &mut out);
    Ok(out)
}

/// Evaluates all basis functions of one clamped B-spline family at `x`.
///
/// Only the `degree + 1` functions whose support covers the span of `x` are
/// nonzero; the rest of `out` is zeroed. For `x` outside the knot range the
/// boundary span is used unchanged, which evaluates the boundary polynomial
/// pieces (so the basis extends smoothly and still sums to one).
fn bspline_eval(sites: &[f64], padded: &[f64], degree: usize, x: f64, out: &mut [f64]) {
    out.fill(0.0);
    let n_sites = sites.len();
    // Span among the base sites, clamped to real intervals.
    let s = sites
        .partition_point(|&k| k <= x)
        .saturating_sub(1)
        .min(n_sites - 2);
    let mu = s + degree;
    // Cox-de-Boor triangle for the nonzero window (The NURBS Book, A2.2).
    let mut vals = [0.0f64; 4];
    let mut left = [0.0f64; 4];
    let mut right = [0.0f64; 4];
    vals[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - padded[mu + 1 - j];
        right[j] = padded[mu + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = vals[r] / (right[r + 1] + left[j - r]);
            vals[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        vals[j] = saved;
    }
    out[s..s + degree + 1].copy_from_slice(&vals[..degree + 1]);
}

/// A fitted additive model.
///
/// `weights` is laid out `[intercept, feature-0 block, feature-1 block, ...]`.
/// `background_means` holds the training mean of every non-intercept design
/// column; attribution coefficients are basis values centered by these means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdditiveFit {
    pub spec: BasisSpec,
    pub knots: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub train_loss: f64,
    pub background_means: Vec<f64>,
    pub column_names: Vec<String>,
    #[serde(skip)]
    bases_cache: OnceLock<Bases>,
}

/// Least-squares fit of the basis expansion via the normal equations.
/// Fails with `NotPositiveDefinite` when the design is collinear.
pub fn fit(
    data: &Matrix,
    y: &[f64],
    spec: &BasisSpec,
    column_names: Vec<String>,
) -> Result<AdditiveFit> {
    if y.len() != data.rows() {
        return Err(Error::DimensionMismatch {
            expected: data.rows(),
            got: y.len(),
        });
    }
    if column_names.len() != data.cols() {
        return Err(Error::DimensionMismatch {
            expected: data.cols(),
            got: column_names.len(),
        });
    }
    if data.rows() == 0 {
        return Err(Error::invalid("cannot fit on an empty dataset"));
    }
    let bases = build_bases(data, spec)?;
    let h = bases.design_matrix(data)?;
    let gram = SpdMatrix::from_gram(&h, 1.0)?;
    let hty = h.t_vec(y)?;
    let weights = gram.solve(&hty)?;
    let preds = h.mat_vec(&weights)?;
    let n = data.rows() as f64;
    let train_loss = preds
        .iter()
        .zip(y)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let background_means = h.column_means()[1..].to_vec();
    let fit = AdditiveFit {
        spec: spec.clone(),
        knots: bases.knots().to_vec(),
        weights,
        train_loss,
        background_means,
        column_names,
        bases_cache: OnceLock::new(),
    };
    let _ = fit.bases_cache.set(bases);
    Ok(fit)
}

impl AdditiveFit {
    /// Evaluable bases; rebuilt on first use after deserialization.
    pub fn bases(&self) -> &Bases {
        self.bases_cache.get_or_init(|| {
            Bases::from_parts(self.spec.clone(), self.knots.clone())
                .expect("fit holds consistent basis parts; run validate() on foreign data")
        })
    }

    /// Structural consistency check for deserialized models.
    pub fn validate(&self) -> Result<()> {
        let bases = Bases::from_parts(self.spec.clone(), self.knots.clone())?;
        if self.weights.len() != bases.width() {
            return Err(Error::DimensionMismatch {
                expected: bases.width(),
                got: self.weights.len(),
            });
        }
        if self.background_means.len() != bases.width() - 1 {
            return Err(Error::DimensionMismatch {
                expected: bases.width() - 1,
                got: self.background_means.len(),
            });
        }
        if self.column_names.len() != self.spec.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.spec.n_features(),
                got: self.column_names.len(),
            });
        }
        if !self.train_loss.is_finite() || self.train_loss < 0.0 {
            return Err(Error::invalid("train_loss must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.spec.n_features()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let bases = self.bases();
        let mut row = vec![0.0; bases.width()];
        bases.design_row(x, &mut row);
        dot(&row, &self.weights)
    }

    /// Coefficient vector `a` such that `a . w` is the attribution of
    /// `feature` at `x` for the model with weights `w`: basis values at `x`
    /// centered by their training means, zero outside the feature's block.
    pub fn attribution_coeffs(&self, x: &[f64], feature: usize) -> Vec<f64> {
        let bases = self.bases();
        debug_assert!(feature < bases.n_features());
        debug_assert_eq!(x.len(), bases.n_features());
        let mut a = vec![0.0; bases.width()];
        self.fill_feature_coeffs(bases, x, feature, &mut a);
        a
    }

    /// Coefficient vector of the prediction gap `h(x) - mean h`: the sum of
    /// all per-feature attribution coefficients.
    pub fn gap_coeffs(&self, x: &[f64]) -> Vec<f64> {
        let bases = self.bases();
        debug_assert_eq!(x.len(), bases.n_features());
        let mut a = vec![0.0; bases.width()];
        for j in 0..bases.n_features() {
            self.fill_feature_coeffs(bases, x, j, &mut a);
        }
        a
    }

    fn fill_feature_coeffs(&self, bases: &Bases, x: &[f64], feature: usize, a: &mut [f64]) {
        let off = bases.feature_offset(feature);
        let w = bases.feature_width(feature);
        bases.eval_feature(feature, x[feature], &mut a[off..off + w]);
        for k in 0..w {
            a[off + k] -= self.background_means[off + k - 1];
        }
    }
}

/// The set of weight vectors whose training loss is at most `epsilon`:
/// an ellipsoid centered at the least-squares optimum with shape `H^T H / N`
/// and squared radius `epsilon - train_loss`.
pub fn rashomon(fit: &AdditiveFit, data: &Matrix, epsilon: f64) -> Result<EllipsoidFamily> {
    if epsilon < fit.train_loss {
        return Err(Error::EmptyRashomon {
            epsilon,
            min_loss: fit.train_loss,
        });
    }
    let h = fit.bases().design_matrix(data)?;
    let shape = SpdMatrix::from_gram(&h, 1.0 / data.rows() as f64)?;
    EllipsoidFamily::new(
        fit.weights.clone(),
        Arc::new(shape),
        epsilon - fit.train_loss,
        fit.train_loss,
    )
}
