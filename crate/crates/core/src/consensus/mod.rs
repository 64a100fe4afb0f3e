//! Statements that hold for every model in a family.
//!
//! A backend summarizes one instance as exact ranges: the min/max over the
//! family of the prediction gap (prediction minus background mean), of each
//! player's attribution, and of any signed attribution difference. On top of
//! those ranges this module derives
//!
//! * sign statements — the gap, or a player's attribution, has the same sign
//!   for every member;
//! * importance comparisons — `i` is at most as important as `j` when the
//!   signed magnitude difference `s_i phi_i - s_j phi_j` stays non-positive
//!   over the whole family (requires both signs established);
//! * a partial order over sign-established players, its merged (tied) nodes
//!   and covering edges for drawing;
//! * a scalar utility that scores how much order survives at a given loss
//!   bound, for trading off fit against consensus.
//!
//! Two backend geometries are supported: ellipsoids (attributions are linear
//! functionals of the parameter) and tree sub-ensembles (attributions are
//! averages over member trees).

pub mod dot;
pub mod providers;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exec;
use crate::forest::{forest_min_max, sample_subforest};
use crate::linalg::EllipsoidFamily;
use crate::matrix::{dot as vdot, Matrix};
use crate::{Error, Result};

/// Slack for repairing near-ties in the transitive closure: a missing
/// implied relation whose sup exceeds the threshold by at most this much is
/// promoted instead of reported as a violation.
const TRANSITIVITY_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    /// `+1.0` or `-1.0`; multiplying by it turns a signed attribution into
    /// its magnitude once the sign is established.
    pub fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn glyph(self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Negative => '-',
        }
    }
}

/// Options shared by all statement queries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsensusOpts {
    /// Robustness margin: signs need `lo > margin` (or `hi < -margin`),
    /// comparisons need the difference sup to clear `-margin`. Zero recovers
    /// the plain definitions.
    pub margin: f64,
}

impl Default for ConsensusOpts {
    fn default() -> Self {
        ConsensusOpts { margin: 0.0 }
    }
}

impl ConsensusOpts {
    pub fn new(margin: f64) -> Result<Self> {
        if !margin.is_finite() || margin < 0.0 {
            return Err(Error::invalid(format!(
                "margin must be finite and non-negative, got {margin}"
            )));
        }
        Ok(ConsensusOpts { margin })
    }
}

/// Range evidence for one instance: everything the statement layer needs,
/// independent of how the family is parameterized.
#[derive(Clone, Debug)]
pub struct InstanceAttr {
    players: Vec<String>,
    backend: Backend,
}

#[derive(Clone, Debug)]
enum Backend {
    /// Attributions and gap are linear functionals of the parameter vector;
    /// ranges come from exact ellipsoid support queries.
    Ellipsoid {
        family: EllipsoidFamily,
        gap: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
    },
    /// Attributions and gap are averages of per-tree values over any subset
    /// of at least `m` trees; ranges come from sorted partial means.
    SubForest {
        m: usize,
        per_tree: Matrix,
        gaps: Vec<f64>,
    },
}

impl InstanceAttr {
    /// Ellipsoid backend: `coeffs[i] . w` is player `i`'s attribution and
    /// `gap . w` the prediction gap for the member with parameter `w`.
    pub fn ellipsoid(
        players: Vec<String>,
        family: EllipsoidFamily,
        gap: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if coeffs.len() != players.len() {
            return Err(Error::DimensionMismatch {
                expected: players.len(),
                got: coeffs.len(),
            });
        }
        let dim = family.dim();
        if gap.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: gap.len(),
            });
        }
        for c in &coeffs {
            if c.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.len(),
                });
            }
        }
        Ok(InstanceAttr {
            players,
            backend: Backend::Ellipsoid {
                family,
                gap,
                coeffs,
            },
        })
    }

    /// Sub-ensemble backend: row `t` of `per_tree` holds tree `t`'s
    /// attributions, `gaps[t]` its prediction gap; members average at least
    /// `m` rows.
    pub fn subforest(
        players: Vec<String>,
        m: usize,
        per_tree: Matrix,
        gaps: Vec<f64>,
    ) -> Result<Self> {
        if per_tree.cols() != players.len() {
            return Err(Error::DimensionMismatch {
                expected: players.len(),
                got: per_tree.cols(),
            });
        }
        if gaps.len() != per_tree.rows() {
            return Err(Error::DimensionMismatch {
                expected: per_tree.rows(),
                got: gaps.len(),
            });
        }
        if m == 0 || m > per_tree.rows() {
            return Err(Error::invalid(format!(
                "subset size {m} out of range for {} trees",
                per_tree.rows()
            )));
        }
        Ok(InstanceAttr {
            players,
            backend: Backend::SubForest { m, per_tree, gaps },
        })
    }

    pub fn players(&self) -> &[String] {
        &self.players
    }

    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    /// Exact `(min, max)` of the prediction gap over the family.
    pub fn gap_range(&self) -> Result<(f64, f64)> {
        match &self.backend {
            Backend::Ellipsoid { family, gap, .. } => family.linear_range(gap),
            Backend::SubForest { m, gaps, .. } => forest_min_max(gaps, *m),
        }
    }

    /// Exact `(min, max)` of player `i`'s attribution over the family.
    pub fn attr_range(&self, i: usize) -> Result<(f64, f64)> {
        self.check_player(i)?;
        match &self.backend {
            Backend::Ellipsoid { family, coeffs, .. } => family.linear_range(&coeffs[i]),
            Backend::SubForest { m, per_tree, .. } => forest_min_max(&per_tree.column(i), *m),
        }
    }

    /// Exact sup over the family of `s_i phi_i - s_j phi_j`.
    pub fn diff_sup(&self, i: usize, si: Sign, j: usize, sj: Sign) -> Result<f64> {
        self.check_player(i)?;
        self.check_player(j)?;
        match &self.backend {
            Backend::Ellipsoid { family, coeffs, .. } => {
                let a: Vec<f64> = coeffs[i]
                    .iter()
                    .zip(&coeffs[j])
                    .map(|(ci, cj)| si.factor() * ci - sj.factor() * cj)
                    .collect();
                Ok(family.linear_range(&a)?.1)
            }
            Backend::SubForest { m, per_tree, .. } => {
                let v: Vec<f64> = (0..per_tree.rows())
                    .map(|t| si.factor() * per_tree.get(t, i) - sj.factor() * per_tree.get(t, j))
                    .collect();
                Ok(forest_min_max(&v, *m)?.1)
            }
        }
    }

    /// Attribution of the center model (ellipsoid center / full tree pool).
    pub fn center_attr(&self, i: usize) -> f64 {
        assert!(i < self.n_players(), "player index out of range");
        match &self.backend {
            Backend::Ellipsoid { family, coeffs, .. } => vdot(&coeffs[i], family.center()),
            Backend::SubForest { per_tree, .. } => {
                let col = per_tree.column(i);
                col.iter().sum::<f64>() / col.len() as f64
            }
        }
    }

    /// Prediction gap of the center model.
    pub fn gap_center(&self) -> f64 {
        match &self.backend {
            Backend::Ellipsoid { family, gap, .. } => vdot(gap, family.center()),
            Backend::SubForest { gaps, .. } => gaps.iter().sum::<f64>() / gaps.len() as f64,
        }
    }

    /// Attribution vector and gap of one member drawn uniformly from the
    /// family (interior point / random admissible subset).
    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        match &self.backend {
            Backend::Ellipsoid {
                family,
                gap,
                coeffs,
            } => {
                let w = family.sample_interior(rng);
                let attrs = coeffs.iter().map(|c| vdot(c, &w)).collect();
                (attrs, vdot(gap, &w))
            }
            Backend::SubForest { m, per_tree, gaps } => {
                let subset = sample_subforest(rng, per_tree.rows(), *m);
                let k = subset.len() as f64;
                let attrs = (0..per_tree.cols())
                    .map(|c| subset.iter().map(|&t| per_tree.get(t, c)).sum::<f64>() / k)
                    .collect();
                let gap = subset.iter().map(|&t| gaps[t]).sum::<f64>() / k;
                (attrs, gap)
            }
        }
    }

    fn check_player(&self, i: usize) -> Result<()> {
        if i < self.n_players() {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "player index {i} out of range for {} players",
                self.n_players()
            )))
        }
    }
}

fn sign_of_range(lo: f64, hi: f64, margin: f64) -> Option<Sign> {
    if lo > margin {
        Some(Sign::Positive)
    } else if hi < -margin {
        Some(Sign::Negative)
    } else {
        None
    }
}

/// Family-wide sign of the prediction gap, if one exists.
pub fn sign_gap(attr: &InstanceAttr, margin: f64) -> Result<Option<Sign>> {
    let (lo, hi) = attr.gap_range()?;
    Ok(sign_of_range(lo, hi, margin))
}

/// Family-wide sign of player `i`'s attribution, if one exists.
pub fn sign_attr(attr: &InstanceAttr, i: usize, margin: f64) -> Result<Option<Sign>> {
    let (lo, hi) = attr.attr_range(i)?;
    Ok(sign_of_range(lo, hi, margin))
}

/// Players with an established attribution sign, in player order.
pub fn sa_set(attr: &InstanceAttr, margin: f64) -> Result<Vec<(usize, Sign)>> {
    let mut out = Vec::new();
    for i in 0..attr.n_players() {
        if let Some(s) = sign_attr(attr, i, margin)? {
            out.push((i, s));
        }
    }
    Ok(out)
}

/// Whether every member rates `i` at most as important as `j` (by signed
/// magnitude). Both signs must be established; `i == j` is trivially true.
pub fn less_important(attr: &InstanceAttr, i: usize, j: usize, margin: f64) -> Result<bool> {
    if i == j {
        attr.check_player(i)?;
        return Ok(true);
    }
    let si = sign_attr(attr, i, margin)?.ok_or(Error::SignNotEstablished { feature: i })?;
    let sj = sign_attr(attr, j, margin)?.ok_or(Error::SignNotEstablished { feature: j })?;
    Ok(attr.diff_sup(i, si, j, sj)? <= -margin)
}

/// One sign-established player inside a [`PartialOrder`].
#[derive(Clone, Debug)]
pub struct OrderMember {
    /// Index into the instance's player list.
    pub player: usize,
    pub name: String,
    pub sign: Sign,
    /// Center-model attribution, kept for presentation.
    pub center: f64,
}

/// The importance preorder over sign-established players at one instance,
/// with ties merged into nodes for drawing.
#[derive(Clone, Debug)]
pub struct PartialOrder {
    pub instance: usize,
    pub epsilon: f64,
    pub members: Vec<OrderMember>,
    /// Row-major `members x members`; `le[i * n + j]` means `i` is at most
    /// as important as `j` for every member model. Reflexive by definition.
    le: Vec<bool>,
    /// Equivalence classes of mutually related members, each sorted, in
    /// order of their smallest member.
    pub nodes: Vec<Vec<usize>>,
    /// Row-major `nodes x nodes` order induced on classes.
    node_le: Vec<bool>,
}

/// Builds the importance order at one instance. Relations are computed from
/// exact range queries; implied-but-missing relations within
/// [`TRANSITIVITY_SLACK`] are promoted, anything worse is an error (it would
/// mean the range queries are inconsistent).
pub fn build_partial_order(
    attr: &InstanceAttr,
    opts: &ConsensusOpts,
    instance: usize,
    epsilon: f64,
) -> Result<PartialOrder> {
    let sa = sa_set(attr, opts.margin)?;
    let n = sa.len();
    let mut le = vec![false; n * n];
    for i in 0..n {
        le[i * n + i] = true;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let (pi, si) = sa[i];
                let (pj, sj) = sa[j];
                if attr.diff_sup(pi, si, pj, sj)? <= -opts.margin {
                    le[i * n + j] = true;
                }
            }
        }
    }
    // Transitive closure with tolerance: promotions only add relations, so
    // iterate to a fixpoint.
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || !le[i * n + j] {
                    continue;
                }
                for k in 0..n {
                    if k == j || !le[j * n + k] || le[i * n + k] {
                        continue;
                    }
                    let (pi, si) = sa[i];
                    let (pk, sk) = sa[k];
                    let sup = attr.diff_sup(pi, si, pk, sk)?;
                    if sup <= -opts.margin + TRANSITIVITY_SLACK {
                        le[i * n + k] = true;
                        changed = true;
                    } else {
                        return Err(Error::TransitivityViolation {
                            i: pi,
                            j: sa[j].0,
                            k: pk,
                            excess: sup + opts.margin,
                        });
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    // Merge mutual relations into nodes. Mutuality is an equivalence
    // relation once the closure holds.
    let mut class_of = vec![usize::MAX; n];
    let mut nodes: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if class_of[i] != usize::MAX {
            continue;
        }
        let id = nodes.len();
        let mut members = vec![i];
        class_of[i] = id;
        for j in i + 1..n {
            if le[i * n + j] && le[j * n + i] {
                class_of[j] = id;
                members.push(j);
            }
        }
        nodes.push(members);
    }
    let nn = nodes.len();
    let mut node_le = vec![false; nn * nn];
    for (a, ca) in nodes.iter().enumerate() {
        for (b, cb) in nodes.iter().enumerate() {
            node_le[a * nn + b] = le[ca[0] * n + cb[0]];
        }
    }
    let members = sa
        .iter()
        .map(|&(p, s)| OrderMember {
            player: p,
            name: attr.players()[p].clone(),
            sign: s,
            center: attr.center_attr(p),
        })
        .collect();
    Ok(PartialOrder {
        instance,
        epsilon,
        members,
        le,
        nodes,
        node_le,
    })
}

impl PartialOrder {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Whether member `i` is at most as important as member `j`.
    pub fn le(&self, i: usize, j: usize) -> bool {
        self.le[i * self.members.len() + j]
    }

    /// Whether node `a` is at most as important as node `b`.
    pub fn node_le(&self, a: usize, b: usize) -> bool {
        self.node_le[a * self.nodes.len() + b]
    }

    /// Number of ordered member pairs `(i, j)` with `i` at most as important
    /// as `j`, reflexive pairs included — the raw count behind the utility.
    pub fn relation_pairs(&self) -> usize {
        self.le.iter().filter(|&&b| b).count()
    }

    /// Covering edges `(more, less)` between nodes: `less` is strictly below
    /// `more` with nothing in between. This is the minimal set of arrows
    /// whose transitive closure restores the full order.
    pub fn hasse_edges(&self) -> Vec<(usize, usize)> {
        let nn = self.nodes.len();
        let mut edges = Vec::new();
        for a in 0..nn {
            for b in 0..nn {
                if a == b || !self.node_le(b, a) {
                    continue;
                }
                let covered = (0..nn)
                    .any(|c| c != a && c != b && self.node_le(b, c) && self.node_le(c, a));
                if !covered {
                    edges.push((a, b));
                }
            }
        }
        edges
    }

    /// Graphviz rendering; see [`dot::render`].
    pub fn to_dot(&self) -> String {
        dot::render(self)
    }
}

/// One family-wide statement, serialized for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatementKind {
    /// Every member's prediction sits on the same side of the background.
    GapSign { sign: Sign },
    /// Every member attributes the same sign to this feature.
    AttrSign { feature: String, sign: Sign },
    /// Every member rates `less` at most as important as `more`.
    LessImportant { less: String, more: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub instance: usize,
    pub epsilon: f64,
    #[serde(flatten)]
    pub kind: StatementKind,
}

/// All statements certified at one instance: gap sign, attribution signs in
/// player order, then importance comparisons in member order (both
/// directions listed for ties).
pub fn statements_for(
    attr: &InstanceAttr,
    opts: &ConsensusOpts,
    instance: usize,
    epsilon: f64,
) -> Result<Vec<Statement>> {
    let mut out = Vec::new();
    if let Some(sign) = sign_gap(attr, opts.margin)? {
        out.push(Statement {
            instance,
            epsilon,
            kind: StatementKind::GapSign { sign },
        });
    }
    let order = build_partial_order(attr, opts, instance, epsilon)?;
    for m in &order.members {
        out.push(Statement {
            instance,
            epsilon,
            kind: StatementKind::AttrSign {
                feature: m.name.clone(),
                sign: m.sign,
            },
        });
    }
    let n = order.len();
    for i in 0..n {
        for j in 0..n {
            if i != j && order.le(i, j) {
                out.push(Statement {
                    instance,
                    epsilon,
                    kind: StatementKind::LessImportant {
                        less: order.members[i].name.clone(),
                        more: order.members[j].name.clone(),
                    },
                });
            }
        }
    }
    Ok(out)
}

/// Consensus utility from per-instance relation counts: instances without a
/// family-wide gap sign contribute nothing (`None`), the rest contribute
/// their ordered-pair count, normalized so a full order at every instance
/// scores 1.
pub fn utility_from_counts(counts: &[Option<usize>], n_players: usize) -> f64 {
    if counts.is_empty() || n_players == 0 {
        return 0.0;
    }
    let denom = (counts.len() * n_players * (n_players + 1) / 2) as f64;
    counts.iter().map(|c| c.unwrap_or(0) as f64).sum::<f64>() / denom
}

/// A model family sliced at one loss bound.
pub trait AttributionProvider: Send + Sync {
    fn players(&self) -> &[String];
    fn epsilon(&self) -> f64;
    fn min_loss(&self) -> f64;
    /// Range evidence for one instance.
    fn explain(&self, x: &[f64]) -> Result<InstanceAttr>;
}

/// A model family that can be sliced at any admissible loss bound.
pub trait FamilyBuilder: Send + Sync {
    /// Smallest loss bound with a non-empty family.
    fn min_loss(&self) -> f64;
    fn at_epsilon(&self, epsilon: f64) -> Result<Box<dyn AttributionProvider>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UtilityPoint {
    pub epsilon: f64,
    /// `epsilon - min_loss`.
    pub excess: f64,
    pub utility: f64,
}

/// Utility of the family at each loss bound, over a fixed instance set.
/// Looser bounds admit more models, so fewer statements survive and the
/// utility is non-increasing for nested families.
pub fn epsilon_linesearch(
    builder: &dyn FamilyBuilder,
    instances: &Matrix,
    epsilons: &[f64],
    opts: &ConsensusOpts,
) -> Result<Vec<UtilityPoint>> {
    let mut out = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        let provider = builder.at_epsilon(epsilon)?;
        let d = provider.players().len();
        let counts = exec::try_map_indexed(instances.rows(), |i| {
            let attr = provider.explain(instances.row(i))?;
            match sign_gap(&attr, opts.margin)? {
                None => Ok(None),
                Some(_) => {
                    let order = build_partial_order(&attr, opts, i, epsilon)?;
                    Ok(Some(order.relation_pairs()))
                }
            }
        })?;
        out.push(UtilityPoint {
            epsilon,
            excess: epsilon - builder.min_loss(),
            utility: utility_from_counts(&counts, d),
        });
    }
    Ok(out)
}

/// Per-player summary of attribution vectors sampled from a family —
/// the usual single-number comparators a consensus query replaces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparatorSummary {
    pub mean: Vec<f64>,
    /// Population variance.
    pub variance: Vec<f64>,
    /// Mean importance rank (0 = most important by |value|, ties averaged).
    pub mean_rank: Vec<f64>,
}

/// Summarizes sampled attribution vectors player-by-player.
pub fn comparators(samples: &[Vec<f64>]) -> Result<ComparatorSummary> {
    let Some(first) = samples.first() else {
        return Err(Error::invalid("comparator summary needs at least one sample"));
    };
    let d = first.len();
    for s in samples {
        if s.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.len(),
            });
        }
    }
    let n = samples.len() as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut variance = vec![0.0; d];
    for s in samples {
        for ((var, v), m) in variance.iter_mut().zip(s).zip(&mean) {
            *var += (v - m) * (v - m);
        }
    }
    for v in &mut variance {
        *v /= n;
    }
    let mut mean_rank = vec![0.0; d];
    for s in samples {
        for (r, rank) in mean_rank.iter_mut().zip(magnitude_ranks(s)) {
            *r += rank;
        }
    }
    for r in &mut mean_rank {
        *r /= n;
    }
    Ok(ComparatorSummary {
        mean,
        variance,
        mean_rank,
    })
}

/// Ranks by decreasing |value|, 0-based, ties averaged.
fn magnitude_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| {
        v[b].abs()
            .partial_cmp(&v[a].abs())
            .expect("finite attributions")
            .then(a.cmp(&b))
    });
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]].abs() == v[order[i]].abs() {
            j += 1;
        }
        let avg = (i..=j).sum::<usize>() as f64 / (j - i + 1) as f64;
        for t in i..=j {
            ranks[order[t]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Number of range violations one sampled member exhibits: attribution
/// values or gap outside the certified intervals by more than `tol`.
/// Any positive count falsifies the range computation.
pub fn embedding_check(
    attr: &InstanceAttr,
    sample_attr: &[f64],
    sample_gap: f64,
    tol: f64,
) -> Result<usize> {
    if sample_attr.len() != attr.n_players() {
        return Err(Error::DimensionMismatch {
            expected: attr.n_players(),
            got: sample_attr.len(),
        });
    }
    let mut violations = 0;
    for (i, &v) in sample_attr.iter().enumerate() {
        let (lo, hi) = attr.attr_range(i)?;
        if v < lo - tol || v > hi + tol {
            violations += 1;
        }
    }
    let (glo, ghi) = attr.gap_range()?;
    if sample_gap < glo - tol || sample_gap > ghi + tol {
        violations += 1;
    }
    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SpdMatrix;
    use std::sync::Arc;

    /// Unit-ball family in `d` dimensions with the given center and squared
    /// radius; player `i` reads coordinate `i`, the gap reads their sum.
    fn ball_attr(center: Vec<f64>, radius_sq: f64) -> InstanceAttr {
        let d = center.len();
        let mut eye = vec![0.0; d * d];
        for i in 0..d {
            eye[i * d + i] = 1.0;
        }
        let shape = Arc::new(SpdMatrix::new(d, eye).unwrap());
        let family = EllipsoidFamily::new(center, shape, radius_sq, 0.0).unwrap();
        let coeffs: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                e
            })
            .collect();
        let players = (0..d).map(|i| format!("x{}", i + 1)).collect();
        InstanceAttr::ellipsoid(players, family, vec![1.0; d], coeffs).unwrap()
    }

    #[test]
    fn signs_need_the_whole_range_clear_of_zero() {
        let attr = ball_attr(vec![1.5, -3.0], 0.25);
        assert_eq!(sign_attr(&attr, 0, 0.0).unwrap(), Some(Sign::Positive));
        assert_eq!(sign_attr(&attr, 1, 0.0).unwrap(), Some(Sign::Negative));
        // Radius 1.6 makes x1's interval straddle zero.
        let wide = ball_attr(vec![1.5, -3.0], 1.6 * 1.6);
        assert_eq!(sign_attr(&wide, 0, 0.0).unwrap(), None);
        assert_eq!(sign_attr(&wide, 1, 0.0).unwrap(), Some(Sign::Negative));
        assert_eq!(sa_set(&wide, 0.0).unwrap(), vec![(1, Sign::Negative)]);
    }

    #[test]
    fn margin_tightens_sign_statements() {
        let attr = ball_attr(vec![1.5, -3.0], 0.25);
        // x1's interval is [1.0, 2.0]: sign holds up to margin 1.0 exclusive.
        assert_eq!(sign_attr(&attr, 0, 0.9).unwrap(), Some(Sign::Positive));
        assert_eq!(sign_attr(&attr, 0, 1.0).unwrap(), None);
    }

    #[test]
    fn gap_sign_follows_the_summed_functional() {
        // Centers sum to 4.5; gap range is 4.5 +- 0.5 * sqrt(2).
        let attr = ball_attr(vec![1.5, 3.0], 0.25);
        assert_eq!(sign_gap(&attr, 0.0).unwrap(), Some(Sign::Positive));
        let straddling = ball_attr(vec![1.5, -1.5], 0.25);
        assert_eq!(sign_gap(&straddling, 0.0).unwrap(), None);
    }

    #[test]
    fn magnitude_comparison_uses_established_signs() {
        // |x1| in [1.0, 2.0], |x2| in [2.5, 3.5]; sup(|x1| - |x2|) =
        // (1.5 - 3.0) + 0.5 * sqrt(2) < 0, so x1 is at most as important.
        let attr = ball_attr(vec![1.5, -3.0], 0.25);
        assert!(less_important(&attr, 0, 1, 0.0).unwrap());
        assert!(!less_important(&attr, 1, 0, 0.0).unwrap());
        assert!(less_important(&attr, 0, 0, 0.0).unwrap());
        let wide = ball_attr(vec![1.5, -3.0], 1.6 * 1.6);
        assert!(matches!(
            less_important(&wide, 0, 1, 0.0).unwrap_err(),
            Error::SignNotEstablished { feature: 0 }
        ));
    }

    #[test]
    fn partial_order_collects_relations_and_nodes() {
        let attr = ball_attr(vec![1.5, -3.0], 0.25);
        let order = build_partial_order(&attr, &ConsensusOpts::default(), 0, 1.0).unwrap();
        assert_eq!(order.len(), 2);
        assert!(order.le(0, 1));
        assert!(!order.le(1, 0));
        assert_eq!(order.relation_pairs(), 3); // two reflexive + one strict
        assert_eq!(order.nodes, vec![vec![0], vec![1]]);
        assert_eq!(order.hasse_edges(), vec![(1, 0)]); // x2 more important
        assert_eq!(order.members[0].sign, Sign::Positive);
        assert_eq!(order.members[1].sign, Sign::Negative);
        assert!((order.members[1].center + 3.0).abs() < 1e-12);
    }

    #[test]
    fn incomparable_members_have_no_edges() {
        // Equal-magnitude centers with a positive radius: neither direction.
        let attr = ball_attr(vec![2.0, -2.0], 0.25);
        let order = build_partial_order(&attr, &ConsensusOpts::default(), 0, 1.0).unwrap();
        assert_eq!(order.relation_pairs(), 2);
        assert!(order.hasse_edges().is_empty());
        assert_eq!(order.nodes.len(), 2);
    }

    #[test]
    fn degenerate_family_merges_tied_players() {
        // Zero radius: |x1| = |x2| exactly, mutual relations, one node.
        let attr = ball_attr(vec![2.0, -2.0], 0.0);
        let order = build_partial_order(&attr, &ConsensusOpts::default(), 0, 1.0).unwrap();
        assert!(order.le(0, 1) && order.le(1, 0));
        assert_eq!(order.nodes, vec![vec![0, 1]]);
        assert_eq!(order.relation_pairs(), 4);
        assert!(order.hasse_edges().is_empty());
    }

    #[test]
    fn chains_stay_transitive() {
        let attr = ball_attr(vec![1.0, 2.0, 4.0], 0.01);
        let order = build_partial_order(&attr, &ConsensusOpts::default(), 0, 1.0).unwrap();
        assert!(order.le(0, 1) && order.le(1, 2) && order.le(0, 2));
        // Covering edges only: the 2 -> 0 shortcut is implied.
        assert_eq!(order.hasse_edges(), vec![(1, 0), (2, 1)]);
    }

    #[test]
    fn subforest_ranges_are_partial_means() {
        let per_tree = Matrix::from_rows(&[
            vec![1.0, 3.0],
            vec![2.0, 4.0],
            vec![3.0, 5.0],
        ])
        .unwrap();
        let attr = InstanceAttr::subforest(
            vec!["a".into(), "b".into()],
            2,
            per_tree,
            vec![4.0, 6.0, 8.0],
        )
        .unwrap();
        assert_eq!(attr.attr_range(0).unwrap(), (1.5, 2.5));
        assert_eq!(attr.attr_range(1).unwrap(), (3.5, 4.5));
        assert_eq!(attr.gap_range().unwrap(), (5.0, 7.0));
        assert_eq!(attr.center_attr(0), 2.0);
        assert_eq!(attr.gap_center(), 6.0);
        // sup(|a| - |b|) over subsets: per-tree diffs are all -2.
        assert_eq!(
            attr.diff_sup(0, Sign::Positive, 1, Sign::Positive).unwrap(),
            -2.0
        );
        assert!(less_important(&attr, 0, 1, 0.0).unwrap());
    }

    #[test]
    fn sampled_members_respect_the_ranges() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let ell = ball_attr(vec![1.5, -3.0], 0.25);
        for _ in 0..200 {
            let (attrs, gap) = ell.sample_member(&mut rng);
            assert_eq!(embedding_check(&ell, &attrs, gap, 1e-9).unwrap(), 0);
        }
        let per_tree =
            Matrix::from_rows(&[vec![1.0, 3.0], vec![2.0, 4.0], vec![3.0, 5.0]]).unwrap();
        let sf = InstanceAttr::subforest(
            vec!["a".into(), "b".into()],
            2,
            per_tree,
            vec![4.0, 6.0, 8.0],
        )
        .unwrap();
        for _ in 0..200 {
            let (attrs, gap) = sf.sample_member(&mut rng);
            assert_eq!(embedding_check(&sf, &attrs, gap, 1e-12).unwrap(), 0);
        }
    }

    #[test]
    fn embedding_check_counts_violations() {
        let attr = ball_attr(vec![1.5, -3.0], 0.25);
        // x1 range [1, 2], x2 range [-3.5, -2.5], gap [4.5 - r√2 ...]; pick
        // values clearly outside two of the three ranges.
        let v = embedding_check(&attr, &[5.0, -3.0], -100.0, 1e-9).unwrap();
        assert_eq!(v, 2);
    }

    #[test]
    fn statements_cover_signs_and_comparisons() {
        let attr = ball_attr(vec![1.5, -3.0], 0.25);
        let stmts = statements_for(&attr, &ConsensusOpts::default(), 3, 0.5).unwrap();
        let kinds: Vec<&StatementKind> = stmts.iter().map(|s| &s.kind).collect();
        assert!(matches!(kinds[0], StatementKind::GapSign { .. }));
        assert_eq!(stmts.len(), 4); // gap sign, two attr signs, one comparison
        let json = serde_json::to_string(&stmts[0]).unwrap();
        assert!(json.contains("\"kind\":\"gap_sign\""));
        assert!(json.contains("\"instance\":3"));
        let back: Vec<Statement> = serde_json::from_str(&serde_json::to_string(&stmts).unwrap()).unwrap();
        assert_eq!(back, stmts);
    }

    #[test]
    fn utility_normalizes_by_instances_and_pairs() {
        // d = 2: full order per instance is 3 pairs.
        assert_eq!(utility_from_counts(&[Some(3), None], 2), 0.5);
        assert_eq!(utility_from_counts(&[Some(3), Some(3)], 2), 1.0);
        assert_eq!(utility_from_counts(&[], 2), 0.0);
    }

    #[test]
    fn comparator_summary_matches_hand_computation() {
        let samples = vec![vec![1.0, -2.0], vec![3.0, -4.0]];
        let s = comparators(&samples).unwrap();
        assert_eq!(s.mean, vec![2.0, -3.0]);
        assert_eq!(s.variance, vec![1.0, 1.0]);
        // |1| < |2| and |3| < |4|: player 0 ranks 1, player 1 ranks 0.
        assert_eq!(s.mean_rank, vec![1.0, 0.0]);
    }

    #[test]
    fn magnitude_ranks_average_ties() {
        assert_eq!(magnitude_ranks(&[2.0, -2.0]), vec![0.5, 0.5]);
        assert_eq!(magnitude_ranks(&[1.0, 3.0, -2.0]), vec![2.0, 0.0, 1.0]);
    }

    #[test]
    fn opts_reject_bad_margins() {
        assert!(ConsensusOpts::new(0.0).is_ok());
        assert!(ConsensusOpts::new(-0.1).is_err());
        assert!(ConsensusOpts::new(f64::NAN).is_err());
    }
}
