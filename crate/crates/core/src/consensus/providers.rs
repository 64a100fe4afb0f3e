//! Adapters from concrete model families to the statement layer.
//!
//! Each builder does the per-family preprocessing once (design Gram matrix,
//! kernel ellipsoid shape, worst-case loss curve and background means) and
//! then slices the family at any admissible loss bound; the resulting
//! providers turn a single instance into range evidence.

use std::sync::Arc;

use crate::additive::AdditiveFit;
use crate::consensus::{AttributionProvider, FamilyBuilder, InstanceAttr};
use crate::exec;
use crate::forest::{
    choose_m, epsilon_plus, FeatureGroups, LossKind, ShapContext, TreeModel,
};
use crate::kernel::{ellipsoid_shape_jittered, ig_path_matrix, KrrFit};
use crate::linalg::{EllipsoidFamily, SpdMatrix};
use crate::matrix::Matrix;
use crate::{Error, Result};

/// Basis-expansion family: the parameter ellipsoid lives in weight space and
/// attributions are centered basis evaluations.
pub struct AdditiveBuilder {
    fit: Arc<AdditiveFit>,
    shape: Arc<SpdMatrix>,
}

impl AdditiveBuilder {
    /// `data` is the training set the loss bound refers to; its design Gram
    /// matrix (scaled by `1/N`) fixes the family geometry once.
    pub fn new(fit: Arc<AdditiveFit>, data: &Matrix) -> Result<Self> {
        Self::with_jitter(fit, data, 0.0)
    }

    /// [`AdditiveBuilder::new`] with `jitter` added to the Gram diagonal.
    /// A collinear design makes the Gram matrix singular and the plain
    /// constructor fails with `NotPositiveDefinite`; inflating the diagonal
    /// restores definiteness but shrinks the admissible set along the
    /// degenerate directions, so it is opt-in and never applied implicitly.
    pub fn with_jitter(fit: Arc<AdditiveFit>, data: &Matrix, jitter: f64) -> Result<Self> {
        fit.validate()?;
        if data.rows() == 0 {
            return Err(Error::invalid("need at least one training row"));
        }
        if !jitter.is_finite() || jitter < 0.0 {
            return Err(Error::invalid(format!(
                "jitter must be finite and non-negative, got {jitter}"
            )));
        }
        let h = fit.bases().design_matrix(data)?;
        let w = h.cols();
        let mut g = h.gram();
        let scale = 1.0 / data.rows() as f64;
        for v in &mut g {
            *v *= scale;
        }
        for i in 0..w {
            g[i * w + i] += jitter;
        }
        let shape = SpdMatrix::new(w, g)?;
        Ok(AdditiveBuilder {
            fit,
            shape: Arc::new(shape),
        })
    }
}

impl FamilyBuilder for AdditiveBuilder {
    fn min_loss(&self) -> f64 {
        self.fit.train_loss
    }

    fn at_epsilon(&self, epsilon: f64) -> Result<Box<dyn AttributionProvider>> {
        if epsilon < self.fit.train_loss {
            return Err(Error::EmptyRashomon {
                epsilon,
                min_loss: self.fit.train_loss,
            });
        }
        let family = EllipsoidFamily::new(
            self.fit.weights.clone(),
            self.shape.clone(),
            epsilon - self.fit.train_loss,
            self.fit.train_loss,
        )?;
        Ok(Box::new(AdditiveProvider {
            fit: self.fit.clone(),
            family,
            epsilon,
        }))
    }
}

pub struct AdditiveProvider {
    fit: Arc<AdditiveFit>,
    family: EllipsoidFamily,
    epsilon: f64,
}

impl AttributionProvider for AdditiveProvider {
    fn players(&self) -> &[String] {
        &self.fit.column_names
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn min_loss(&self) -> f64 {
        self.fit.train_loss
    }

    fn explain(&self, x: &[f64]) -> Result<InstanceAttr> {
        let d = self.fit.n_features();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let coeffs: Vec<Vec<f64>> = (0..d).map(|j| self.fit.attribution_coeffs(x, j)).collect();
        let gap = self.fit.gap_coeffs(x);
        InstanceAttr::ellipsoid(
            self.fit.column_names.clone(),
            self.family.clone(),
            gap,
            coeffs,
        )
    }
}

/// Kernel ridge family: the ellipsoid lives in coefficient space and
/// attributions are path-integrated kernel gradients, linear in the
/// coefficients.
pub struct KrrBuilder {
    fit: Arc<KrrFit>,
    shape: Arc<SpdMatrix>,
    baseline: Vec<f64>,
    steps: usize,
}

impl KrrBuilder {
    /// `baseline` is the reference point attributions are measured against;
    /// `steps` is the quadrature resolution along the straight path.
    pub fn new(fit: Arc<KrrFit>, baseline: Vec<f64>, steps: usize) -> Result<Self> {
        Self::with_jitter(fit, baseline, steps, 0.0)
    }

    /// [`KrrBuilder::new`] with `jitter` added to the diagonal of the
    /// ellipsoid shape; see [`kernel::ellipsoid_shape_jittered`] for when the
    /// shape degenerates and why the inflation is opt-in.
    ///
    /// [`kernel::ellipsoid_shape_jittered`]: crate::kernel::ellipsoid_shape_jittered
    pub fn with_jitter(
        fit: Arc<KrrFit>,
        baseline: Vec<f64>,
        steps: usize,
        jitter: f64,
    ) -> Result<Self> {
        fit.validate()?;
        if baseline.len() != fit.n_features() {
            return Err(Error::DimensionMismatch {
                expected: fit.n_features(),
                got: baseline.len(),
            });
        }
        if steps == 0 {
            return Err(Error::invalid("quadrature needs at least one step"));
        }
        let shape = Arc::new(ellipsoid_shape_jittered(&fit, jitter)?);
        Ok(KrrBuilder {
            fit,
            shape,
            baseline,
            steps,
        })
    }
}

impl FamilyBuilder for KrrBuilder {
    fn min_loss(&self) -> f64 {
        self.fit.reg_loss
    }

    fn at_epsilon(&self, epsilon: f64) -> Result<Box<dyn AttributionProvider>> {
        if epsilon < self.fit.reg_loss {
            return Err(Error::EmptyRashomon {
                epsilon,
                min_loss: self.fit.reg_loss,
            });
        }
        let family = EllipsoidFamily::new(
            self.fit.alpha.clone(),
            self.shape.clone(),
            epsilon - self.fit.reg_loss,
            self.fit.reg_loss,
        )?;
        Ok(Box::new(KrrProvider {
            fit: self.fit.clone(),
            family,
            baseline: self.baseline.clone(),
            steps: self.steps,
            epsilon,
        }))
    }
}

pub struct KrrProvider {
    fit: Arc<KrrFit>,
    family: EllipsoidFamily,
    baseline: Vec<f64>,
    steps: usize,
    epsilon: f64,
}

impl AttributionProvider for KrrProvider {
    fn players(&self) -> &[String] {
        &self.fit.column_names
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn min_loss(&self) -> f64 {
        self.fit.reg_loss
    }

    fn explain(&self, x: &[f64]) -> Result<InstanceAttr> {
        let phi = ig_path_matrix(&self.fit, x, &self.baseline, self.steps)?;
        let coeffs: Vec<Vec<f64>> = (0..self.fit.n_features())
            .map(|i| phi.phi.row(i).to_vec())
            .collect();
        let gap = self.fit.gap_coeffs(x, &self.baseline);
        InstanceAttr::ellipsoid(
            self.fit.column_names.clone(),
            self.family.clone(),
            gap,
            coeffs,
        )
    }
}

/// Tree-pool family: the loss bound picks the minimum sub-ensemble size via
/// the precomputed worst-case loss curve; attributions are exact grouped
/// Shapley values per tree, averaged by the sub-ensemble.
pub struct ForestBuilder {
    trees: Arc<Vec<TreeModel>>,
    names: Vec<String>,
    ctx: Arc<ShapContext>,
    background: Arc<Matrix>,
    /// Per-tree mean prediction over the background rows.
    bg_means: Arc<Vec<f64>>,
    /// Worst-case loss by minimum subset size (non-increasing).
    curve: Arc<Vec<f64>>,
}

impl ForestBuilder {
    /// `background` anchors the attributions; `eval`/`eval_y` is the set the
    /// loss bound refers to (typically the training set).
    pub fn new(
        trees: Arc<Vec<TreeModel>>,
        groups: &FeatureGroups,
        background: Arc<Matrix>,
        eval: &Matrix,
        eval_y: &[f64],
        loss: LossKind,
    ) -> Result<Self> {
        if background.rows() == 0 {
            return Err(Error::invalid("background must contain at least one row"));
        }
        if eval.cols() != background.cols() {
            return Err(Error::DimensionMismatch {
                expected: background.cols(),
                got: eval.cols(),
            });
        }
        let ctx = Arc::new(ShapContext::new(groups, background.cols())?);
        let curve = epsilon_plus(&trees, eval, eval_y, loss)?;
        let bg_means: Vec<f64> = exec::map_indexed(trees.len(), |t| {
            (0..background.rows())
                .map(|i| trees[t].predict(background.row(i)))
                .sum::<f64>()
                / background.rows() as f64
        });
        Ok(ForestBuilder {
            names: groups.names(),
            trees,
            ctx,
            background,
            bg_means: Arc::new(bg_means),
            curve: Arc::new(curve),
        })
    }

    /// The worst-case loss curve indexed by `m - 1`.
    pub fn curve(&self) -> &[f64] {
        &self.curve
    }
}

impl FamilyBuilder for ForestBuilder {
    fn min_loss(&self) -> f64 {
        *self.curve.last().expect("curve has one entry per tree")
    }

    fn at_epsilon(&self, epsilon: f64) -> Result<Box<dyn AttributionProvider>> {
        let m = choose_m(&self.curve, epsilon)?;
        Ok(Box::new(ForestProvider {
            trees: self.trees.clone(),
            names: self.names.clone(),
            ctx: self.ctx.clone(),
            background: self.background.clone(),
            bg_means: self.bg_means.clone(),
            min_loss: self.min_loss(),
            m,
            epsilon,
        }))
    }
}

pub struct ForestProvider {
    trees: Arc<Vec<TreeModel>>,
    names: Vec<String>,
    ctx: Arc<ShapContext>,
    background: Arc<Matrix>,
    bg_means: Arc<Vec<f64>>,
    min_loss: f64,
    m: usize,
    epsilon: f64,
}

impl ForestProvider {
    /// Minimum sub-ensemble size the loss bound admits.
    pub fn subset_size(&self) -> usize {
        self.m
    }
}

impl AttributionProvider for ForestProvider {
    fn players(&self) -> &[String] {
        &self.names
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn min_loss(&self) -> f64 {
        self.min_loss
    }

    fn explain(&self, x: &[f64]) -> Result<InstanceAttr> {
        if x.len() != self.background.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.background.cols(),
                got: x.len(),
            });
        }
        let rows: Vec<Vec<f64>> = exec::map_indexed(self.trees.len(), |t| {
            self.ctx.tree_attr(&self.trees[t], x, &self.background)
        });
        let per_tree = Matrix::from_rows(&rows)?;
        let gaps: Vec<f64> = self
            .trees
            .iter()
            .zip(self.bg_means.iter())
            .map(|(t, bg)| t.predict(x) - bg)
            .collect();
        InstanceAttr::subforest(self.names.clone(), self.m, per_tree, gaps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::additive::{fit, BasisSpec};
    use crate::consensus::{
        epsilon_linesearch, sign_attr, sign_gap, ConsensusOpts, Sign,
    };
    use crate::forest::{train_forest, CartParams, Task};
    use crate::kernel::{fit_krr, KernelSpec};

    fn line_data(n: usize) -> (Matrix, Vec<f64>) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&v| 2.0 * v).collect();
        (Matrix::new(n, 1, xs).unwrap(), ys)
    }

    #[test]
    fn additive_provider_certifies_the_obvious_sign() {
        let (data, y) = line_data(21);
        let f = Arc::new(
            fit(&data, &y, &BasisSpec::all_linear(1), vec!["x".into()]).unwrap(),
        );
        let builder = AdditiveBuilder::new(f.clone(), &data).unwrap();
        let provider = builder.at_epsilon(f.train_loss + 1e-4).unwrap();
        // At x = 0.9 the centered attribution is 2 * (0.9 - 0.5) = 0.8.
        let attr = provider.explain(&[0.9]).unwrap();
        assert_eq!(sign_attr(&attr, 0, 0.0).unwrap(), Some(Sign::Positive));
        assert!((attr.center_attr(0) - 0.8).abs() < 1e-9);
        assert_eq!(sign_gap(&attr, 0.0).unwrap(), Some(Sign::Positive));
        // Below the optimum the family is empty.
        assert!(matches!(
            builder.at_epsilon(f.train_loss - 1e-6).err().unwrap(),
            Error::EmptyRashomon { .. }
        ));
    }

    #[test]
    fn jitter_rescues_a_collinear_design() {
        // Two copies of the same column make the design Gram singular.
        let n = 21;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&v| 2.0 * v).collect();
        let mut rows = Vec::with_capacity(n);
        for &v in &xs {
            rows.push(vec![v, v]);
        }
        let data = Matrix::from_rows(&rows).unwrap();
        // The fit itself is already singular, so build one on a single copy
        // and widen it by hand to the duplicated design.
        let thin = Matrix::new(n, 1, xs).unwrap();
        let f = fit(&thin, &ys, &BasisSpec::all_linear(1), vec!["x".into()]).unwrap();
        let wide: AdditiveFit = serde_json::from_value(serde_json::json!({
            "spec": {"features": [{"type": "linear"}, {"type": "linear"}]},
            "knots": [[], []],
            "weights": [f.weights[0], f.weights[1], 0.0],
            "train_loss": f.train_loss,
            "background_means": [f.background_means[0], f.background_means[0]],
            "column_names": ["x", "x_copy"],
        }))
        .unwrap();
        let wide = Arc::new(wide);
        assert!(matches!(
            AdditiveBuilder::new(wide.clone(), &data).err().unwrap(),
            Error::NotPositiveDefinite { .. }
        ));
        let builder = AdditiveBuilder::with_jitter(wide.clone(), &data, 1e-8).unwrap();
        let provider = builder.at_epsilon(wide.train_loss + 1e-4).unwrap();
        let attr = provider.explain(&[0.9, 0.9]).unwrap();
        let (lo, hi) = attr.gap_range().unwrap();
        assert!(lo <= attr.gap_center() && attr.gap_center() <= hi);
    }

    #[test]
    fn linesearch_utility_does_not_increase() {
        let (data, y) = line_data(21);
        let f = Arc::new(
            fit(&data, &y, &BasisSpec::all_linear(1), vec!["x".into()]).unwrap(),
        );
        let builder = AdditiveBuilder::new(f.clone(), &data).unwrap();
        let probes = Matrix::new(3, 1, vec![0.1, 0.5, 0.9]).unwrap();
        let eps: Vec<f64> = vec![1e-5, 1e-3, 1e-1]
            .into_iter()
            .map(|e| f.train_loss + e)
            .collect();
        let points =
            epsilon_linesearch(&builder, &probes, &eps, &ConsensusOpts::default()).unwrap();
        assert_eq!(points.len(), 3);
        for w in points.windows(2) {
            assert!(w[1].utility <= w[0].utility + 1e-12);
            assert!(w[1].excess > w[0].excess);
        }
    }

    #[test]
    fn krr_provider_gap_matches_exact_prediction_difference() {
        let pts = Matrix::new(5, 1, vec![-1.0, -0.5, 0.0, 0.5, 1.0]).unwrap();
        let ys: Vec<f64> = (0..5).map(|i| pts.get(i, 0).powi(2)).collect();
        let f = Arc::new(
            fit_krr(&pts, &ys, &KernelSpec::Gaussian { gamma: 0.8 }, 1e-3).unwrap(),
        );
        let builder = KrrBuilder::new(f.clone(), vec![0.0], 64).unwrap();
        let provider = builder.at_epsilon(f.reg_loss * 1.5 + 1e-9).unwrap();
        let attr = provider.explain(&[0.75]).unwrap();
        let exact = f.predict_row(&[0.75]) - f.predict_row(&[0.0]);
        assert!((attr.gap_center() - exact).abs() < 1e-12);
        let (lo, hi) = attr.gap_range().unwrap();
        assert!(lo <= exact && exact <= hi);
    }

    #[test]
    fn forest_provider_separates_a_step() {
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&v| if v <= 0.0 { 0.0 } else { 1.0 }).collect();
        let data = Matrix::new(n, 1, xs).unwrap();
        let trees = train_forest(
            &data,
            &ys,
            40,
            123,
            &CartParams {
                min_samples_leaf: 5,
                ..CartParams::default()
            },
            Task::Classification,
        )
        .unwrap();
        let groups = FeatureGroups::singletons(&["x".into()]);
        let bg = Arc::new(data.clone());
        let builder = ForestBuilder::new(
            Arc::new(trees),
            &groups,
            bg,
            &data,
            &ys,
            LossKind::Squared,
        )
        .unwrap();
        assert!(builder.curve().windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let provider = builder.at_epsilon(builder.min_loss() + 0.02).unwrap();
        // Deep on the low side the prediction gap is clearly negative.
        let attr = provider.explain(&[-0.9]).unwrap();
        assert_eq!(sign_gap(&attr, 0.0).unwrap(), Some(Sign::Negative));
        // A single-feature model attributes the whole gap to that feature.
        let (alo, ahi) = attr.attr_range(0).unwrap();
        let (glo, ghi) = attr.gap_range().unwrap();
        assert!((alo - glo).abs() < 1e-12 && (ahi - ghi).abs() < 1e-12);
        // Infeasible bound maps to the dedicated error.
        assert!(matches!(
            builder.at_epsilon(0.0).err().unwrap(),
            Error::Infeasible { .. }
        ));
    }
}
