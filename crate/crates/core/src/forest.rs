//! Tree pools and sub-ensemble families.
//!
//! The family here is not an ellipsoid: it is every average of at least `m`
//! trees drawn from a fixed pool of `M` seeded trees. Any linear functional
//! of the prediction (the prediction itself, a per-group attribution, a
//! signed attribution difference) is then an average of per-tree values, and
//! its exact min/max over the family is the mean of the `m` smallest/largest
//! per-tree values: averaging more than `m` values can only pull the mean
//! toward the middle, so the extreme is attained at exactly `m` trees.
//!
//! Attributions are exact interventional Shapley values with feature groups
//! as players (a one-hot block moves as one player). For a single background
//! row the tree is descended once per consistent coalition signature: nodes
//! where the instance and the background row agree impose no constraint,
//! disagreeing nodes pin the deciding group in or out of the coalition.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::matrix::Matrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    /// Binary labels in {0, 1}; trees predict the positive-class fraction.
    Classification,
}

/// One tree node. Traversal sends `x[feature] <= threshold` to `left`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A trained tree plus the seed that produced it (bootstrap resample and
/// per-split feature subsets both derive from this seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub seed: u64,
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Bounds check for imported trees: children must point forward (so
    /// traversal terminates) and features must exist.
    pub fn validate(&self, n_cols: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("tree has no nodes"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::invalid(format!("leaf {i} is not finite")));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_cols {
                        return Err(Error::invalid(format!(
                            "node {i} splits on feature {feature} of {n_cols}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::invalid(format!("node {i} threshold not finite")));
                    }
                    if left <= i || right <= i || left >= self.nodes.len() || right >= self.nodes.len()
                    {
                        return Err(Error::invalid(format!("node {i} has invalid children")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            max_depth: None,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

/// Greedy CART on a seeded bootstrap resample. Splits maximize the squared
/// error reduction; for 0/1 labels this is identical to the Gini criterion,
/// so the same scan serves both tasks. Leaves store the mean target.
pub fn train_cart(
    data: &Matrix,
    y: &[f64],
    seed: u64,
    params: &CartParams,
    task: Task,
) -> Result<TreeModel> {
    validate_training_input(data, y, params, task)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = data.rows();
    let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut builder = TreeBuilder {
        data,
        y,
        params,
        rng,
        nodes: Vec::new(),
        feat_order: (0..data.cols()).collect(),
    };
    builder.grow(&idx, 0);
    Ok(TreeModel {
        seed,
        nodes: builder.nodes,
    })
}

/// Trains a pool of trees with per-tree seeds derived from `base_seed`.
pub fn train_forest(
    data: &Matrix,
    y: &[f64],
    n_trees: usize,
    base_seed: u64,
    params: &CartParams,
    task: Task,
) -> Result<Vec<TreeModel>> {
    if n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    validate_training_input(data, y, params, task)?;
    exec::try_map_indexed(n_trees, |t| {
        train_cart(data, y, derive_seed(base_seed, t as u64), params, task)
    })
}

fn validate_training_input(data: &Matrix, y: &[f64], params: &CartParams, task: Task) -> Result<()> {
    if data.rows() == 0 {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if y.len() != data.rows() {
        return Err(Error::DimensionMismatch {
            expected: data.rows(),
            got: y.len(),
        });
    }
    if params.min_samples_leaf == 0 {
        return Err(Error::invalid("min_samples_leaf must be at least 1"));
    }
    if let Some(mf) = params.max_features {
        if mf == 0 {
            return Err(Error::invalid("max_features must be at least 1"));
        }
    }
    if task == Task::Classification && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("classification targets must be 0 or 1"));
    }
    Ok(())
}

/// splitmix64 of `base` offset by the tree index; keeps per-tree streams
/// decorrelated while staying reproducible from one base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct TreeBuilder<'a> {
    data: &'a Matrix,
    y: &'a [f64],
    params: &'a CartParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    feat_order: Vec<usize>,
}

/// Gains below this are treated as no improvement (guards constant targets
/// against float dust in the prefix sums).
const MIN_GAIN: f64 = 1e-12;

impl TreeBuilder<'_> {
    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        let n = idx.len();
        let (sum, sum_sq) = idx
            .iter()
            .fold((0.0, 0.0), |(s, q), &i| (s + self.y[i], q + self.y[i] * self.y[i]));
        let mean = sum / n as f64;
        let sse = sum_sq - sum * sum / n as f64;

        let depth_ok = self.params.max_depth.map_or(true, |d| depth < d);
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        if depth_ok && n >= self.params.min_samples_split && sse > MIN_GAIN {
            best = self.best_split(idx, sse);
        }
        let Some((_, feature, threshold)) = best else {
            let id = self.nodes.len();
            self.nodes.push(Node::Leaf { value: mean });
            return id;
        };

        let mut left_idx: Vec<usize> = Vec::with_capacity(n);
        let mut right_idx: Vec<usize> = Vec::with_capacity(n);
        for &i in idx.iter() {
            if self.data.get(i, feature) <= threshold {
                left_idx.push(i);
            } else {
                right_idx.push(i);
            }
        }
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean }); // placeholder
        let left = self.grow(&left_idx, depth + 1);
        let right = self.grow(&right_idx, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, idx: &[usize], sse_parent: f64) -> Option<(f64, usize, f64)> {
        let n = idx.len();
        let d = self.data.cols();
        let n_cand = self.params.max_features.unwrap_or(d).min(d);
        // Deterministic per-split feature subset: partial Fisher-Yates over a
        // persistent order buffer, driven by the tree's own stream.
        if n_cand < d {
            for i in 0..n_cand {
                let j = self.rng.gen_range(i..d);
                self.feat_order.swap(i, j);
            }
        }
        let msl = self.params.min_samples_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for c in 0..n_cand {
            let feature = self.feat_order[c];
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.data.get(i, feature), self.y[i])));
            pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature"));
            let mut lsum = 0.0;
            let mut lsq = 0.0;
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
            for i in 0..n - 1 {
                lsum += pairs[i].1;
                lsq += pairs[i].1 * pairs[i].1;
                let nl = i + 1;
                let nr = n - nl;
                if nl < msl || nr < msl || pairs[i].0 >= pairs[i + 1].0 {
                    continue;
                }
                let sse_l = lsq - lsum * lsum / nl as f64;
                let rsum = total - lsum;
                let sse_r = (total_sq - lsq) - rsum * rsum / nr as f64;
                let gain = sse_parent - sse_l - sse_r;
                if gain > MIN_GAIN && best.map_or(true, |(g, _, _)| gain > g) {
                    let mut thr = 0.5 * (pairs[i].0 + pairs[i + 1].0);
                    // Keep the threshold strictly below the right block even
                    // when the midpoint rounds up.
                    if thr >= pairs[i + 1].0 {
                        thr = pairs[i].0;
                    }
                    best = Some((gain, feature, thr));
                }
            }
        }
        best
    }
}

/// A named partition of the encoded columns. One-hot blocks form a single
/// group so an encoded categorical moves as one player in attributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroups {
    pub groups: Vec<FeatureGroup>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub columns: Vec<usize>,
}

impl FeatureGroups {
    /// One singleton group per column.
    pub fn singletons(names: &[String]) -> Self {
        FeatureGroups {
            groups: names
                .iter()
                .enumerate()
                .map(|(i, n)| FeatureGroup {
                    name: n.clone(),
                    columns: vec![i],
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }

    /// Checks the groups partition `0..n_cols` exactly.
    pub fn validate(&self, n_cols: usize) -> Result<()> {
        let mut seen = vec![false; n_cols];
        for g in &self.groups {
            if g.columns.is_empty() {
                return Err(Error::invalid(format!("group {} has no columns", g.name)));
            }
            for &c in &g.columns {
                if c >= n_cols {
                    return Err(Error::invalid(format!(
                        "group {} references column {c} of {n_cols}",
                        g.name
                    )));
                }
                if seen[c] {
                    return Err(Error::invalid(format!("column {c} appears in two groups")));
                }
                seen[c] = true;
            }
        }
        if let Some(miss) = seen.iter().position(|&s| !s) {
            return Err(Error::invalid(format!("column {miss} belongs to no group")));
        }
        Ok(())
    }
}

/// Precomputed coalition weights for grouped interventional Shapley values.
pub struct ShapContext {
    n_groups: usize,
    col_group: Vec<usize>,
    /// `wplus[p][f]`: weight of a leaf constrained by `p` in-groups and with
    /// `f` free groups, credited to one of its in-groups.
    wplus: Vec<Vec<f64>>,
    /// Same for out-groups (debited).
    wminus: Vec<Vec<f64>>,
}

impl ShapContext {
    pub fn new(groups: &FeatureGroups, n_cols: usize) -> Result<Self> {
        groups.validate(n_cols)?;
        let g = groups.len();
        if g > 64 {
            return Err(Error::invalid(format!(
                "at most 64 groups supported, got {g}"
            )));
        }
        let mut col_group = vec![0usize; n_cols];
        for (gi, grp) in groups.groups.iter().enumerate() {
            for &c in &grp.columns {
                col_group[c] = gi;
            }
        }
        // binom[a][b] = C(a, b)
        let mut binom = vec![vec![0.0f64; g + 1]; g + 1];
        for a in 0..=g {
            binom[a][0] = 1.0;
            for b in 1..=a {
                binom[a][b] = binom[a - 1][b - 1] + binom[a - 1].get(b).copied().unwrap_or(0.0);
            }
        }
        // w[s] = s! (g-1-s)! / g! = 1 / (g * C(g-1, s))
        let w: Vec<f64> = (0..g).map(|s| 1.0 / (g as f64 * binom[g - 1][s])).collect();
        let mut wplus = vec![vec![0.0f64; g + 1]; g + 1];
        let mut wminus = vec![vec![0.0f64; g + 1]; g + 1];
        for p in 0..=g {
            for f in 0..=g.saturating_sub(p) {
                let mut plus = 0.0;
                let mut minus = 0.0;
                for t in 0..=f {
                    if p >= 1 && p - 1 + t < g {
                        plus += binom[f][t] * w[p - 1 + t];
                    }
                    if p + t < g {
                        minus += binom[f][t] * w[p + t];
                    }
                }
                wplus[p][f] = plus;
                wminus[p][f] = minus;
            }
        }
        Ok(ShapContext {
            n_groups: g,
            col_group,
            wplus,
            wminus,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    /// Exact interventional Shapley values of `tree` at `x`, with groups as
    /// players, averaged over the background rows.
    pub fn tree_attr(&self, tree: &TreeModel, x: &[f64], background: &Matrix) -> Vec<f64> {
        let g = self.n_groups;
        let mut phi = vec![0.0; g];
        let mut stack: Vec<(usize, u64, u64)> = Vec::with_capacity(64);
        for bi in 0..background.rows() {
            let z = background.row(bi);
            stack.push((0, 0u64, 0u64));
            while let Some((node, in_mask, out_mask)) = stack.pop() {
                match tree.nodes[node] {
                    Node::Leaf { value } => {
                        let p = in_mask.count_ones() as usize;
                        let q = out_mask.count_ones() as usize;
                        let f = g - p - q;
                        if p > 0 {
                            let wp = self.wplus[p][f] * value;
                            let mut bits = in_mask;
                            while bits != 0 {
                                let gi = bits.trailing_zeros() as usize;
                                phi[gi] += wp;
                                bits &= bits - 1;
                            }
                        }
                        if q > 0 {
                            let wm = self.wminus[p][f] * value;
                            let mut bits = out_mask;
                            while bits != 0 {
                                let gi = bits.trailing_zeros() as usize;
                                phi[gi] -= wm;
                                bits &= bits - 1;
                            }
                        }
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        let go_left_x = x[feature] <= threshold;
                        let go_left_z = z[feature] <= threshold;
                        if go_left_x == go_left_z {
                            let next = if go_left_x { left } else { right };
                            stack.push((next, in_mask, out_mask));
                        } else {
                            let bit = 1u64 << self.col_group[feature];
                            let x_side = if go_left_x { left } else { right };
                            let z_side = if go_left_z { left } else { right };
                            if in_mask & bit != 0 {
                                stack.push((x_side, in_mask, out_mask));
                            } else if out_mask & bit != 0 {
                                stack.push((z_side, in_mask, out_mask));
                            } else {
                                stack.push((x_side, in_mask | bit, out_mask));
                                stack.push((z_side, in_mask, out_mask | bit));
                            }
                        }
                    }
                }
            }
        }
        let b = background.rows() as f64;
        for v in &mut phi {
            *v /= b;
        }
        #[cfg(debug_assertions)]
        {
            let mean_bg: f64 = (0..background.rows())
                .map(|i| tree.predict(background.row(i)))
                .sum::<f64>()
                / b;
            let gap = tree.predict(x) - mean_bg;
            let total: f64 = phi.iter().sum();
            debug_assert!(
                (total - gap).abs() <= 1e-9 * gap.abs().max(1.0),
                "attribution additivity defect: {total} vs {gap}"
            );
        }
        phi
    }
}

/// Convenience wrapper over [`ShapContext`] for a single tree.
pub fn tree_shap(
    tree: &TreeModel,
    x: &[f64],
    background: &Matrix,
    groups: &FeatureGroups,
) -> Result<Vec<f64>> {
    if background.rows() == 0 {
        return Err(Error::invalid("background must contain at least one row"));
    }
    let ctx = ShapContext::new(groups, background.cols())?;
    Ok(ctx.tree_attr(tree, x, background))
}

/// Exact `(min, max)` of the family average of per-tree values `values`, over
/// all subsets of at least `m` trees: the means of the `m` smallest and `m`
/// largest values.
pub fn forest_min_max(values: &[f64], m: usize) -> Result<(f64, f64)> {
    let n = values.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "subset size {m} out of range for {n} trees"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let lo = sorted[..m].iter().sum::<f64>() / m as f64;
    let hi = sorted[n - m..].iter().sum::<f64>() / m as f64;
    Ok((lo, hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    /// Threshold 0.5 on the averaged prediction; an interval touching 0.5
    /// counts as misclassifiable.
    ZeroOne,
}

/// Worst-case mean loss over the family, as a function of the minimum
/// subset size: entry `m - 1` is the mean over instances of the largest
/// per-instance loss any admissible sub-ensemble can incur at size `>= m`.
pub fn epsilon_plus(
    trees: &[TreeModel],
    data: &Matrix,
    y: &[f64],
    loss: LossKind,
) -> Result<Vec<f64>> {
    let m_total = trees.len();
    if m_total == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if y.len() != data.rows() {
        return Err(Error::DimensionMismatch {
            expected: data.rows(),
            got: y.len(),
        });
    }
    if data.rows() == 0 {
        return Err(Error::invalid("need at least one evaluation instance"));
    }
    if loss == LossKind::ZeroOne && y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("zero-one loss expects 0/1 targets"));
    }
    let per_instance: Vec<Vec<f64>> = exec::map_indexed(data.rows(), |i| {
        let x = data.row(i);
        let target = y[i];
        let mut preds: Vec<f64> = trees.iter().map(|t| t.predict(x)).collect();
        preds.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite predictions"));
        let mut prefix = vec![0.0; m_total + 1];
        for (k, &p) in preds.iter().enumerate() {
            prefix[k + 1] = prefix[k] + p;
        }
        (1..=m_total)
            .map(|m| {
                let lo = prefix[m] / m as f64;
                let hi = (prefix[m_total] - prefix[m_total - m]) / m as f64;
                match loss {
                    LossKind::Squared => {
                        let a = (lo - target) * (lo - target);
                        let b = (hi - target) * (hi - target);
                        a.max(b)
                    }
                    LossKind::ZeroOne => {
                        let wrong = if target >= 0.5 { lo <= 0.5 } else { hi >= 0.5 };
                        if wrong {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            })
            .collect()
    });
    let n = data.rows() as f64;
    let mut curve = vec![0.0; m_total];
    for row in &per_instance {
        for (c, v) in curve.iter_mut().zip(row) {
            *c += v;
        }
    }
    for c in &mut curve {
        *c /= n;
    }
    Ok(curve)
}

/// Smallest `m` whose worst-case loss stays within `epsilon`. The curve is
/// non-increasing, so the first hit is minimal.
pub fn choose_m(curve: &[f64], epsilon: f64) -> Result<usize> {
    if curve.is_empty() {
        return Err(Error::invalid("empty loss curve"));
    }
    match curve.iter().position(|&v| v <= epsilon) {
        Some(i) => Ok(i + 1),
        None => Err(Error::Infeasible {
            epsilon,
            floor: *curve.last().unwrap(),
        }),
    }
}

/// Tree pool restricted to averages of at least `m` member trees.
#[derive(Clone, Debug)]
pub struct ForestFamily {
    pub trees: std::sync::Arc<Vec<TreeModel>>,
    pub m: usize,
    pub task: Task,
}

impl ForestFamily {
    pub fn new(trees: std::sync::Arc<Vec<TreeModel>>, m: usize, task: Task) -> Result<Self> {
        if m == 0 || m > trees.len() {
            return Err(Error::invalid(format!(
                "subset size {m} out of range for {} trees",
                trees.len()
            )));
        }
        Ok(ForestFamily { trees, m, task })
    }

    /// Full-pool average prediction (the family's center model).
    pub fn predict_full(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Serialized forest: pool, encoded column names and the player partition.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForestModel {
    pub task: Task,
    pub trees: Vec<TreeModel>,
    pub column_names: Vec<String>,
    pub groups: FeatureGroups,
}

impl ForestModel {
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::invalid("forest has no trees"));
        }
        let n_cols = self.column_names.len();
        for t in &self.trees {
            t.validate(n_cols)?;
        }
        self.groups.validate(n_cols)
    }
}

/// A uniformly random admissible subset: size drawn uniformly from
/// `min_size..=total`, members without replacement, ascending.
pub fn sample_subforest<R: Rng + ?Sized>(rng: &mut R, total: usize, min_size: usize) -> Vec<usize> {
    assert!(min_size >= 1 && min_size <= total);
    let k = rng.gen_range(min_size..=total);
    let mut order: Vec<usize> = (0..total).collect();
    for i in 0..k {
        let j = rng.gen_range(i..total);
        order.swap(i, j);
    }
    let mut subset = order[..k].to_vec();
    subset.sort_unstable();
    subset
}
