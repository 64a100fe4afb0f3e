//! Cross-checks the consensus layer: every certified statement must hold on
//! every sampled family member, statements must nest as the loss bound
//! loosens, and the importance order must agree with a plain reachability
//! oracle on its own relation matrix.

mod common;

use std::sync::Arc;

use rand::Rng;
use rashomon_core::additive::{fit, BasisSpec};
use rashomon_core::consensus::providers::{AdditiveBuilder, ForestBuilder, KrrBuilder};
use rashomon_core::consensus::{
    build_partial_order, comparators, embedding_check, epsilon_linesearch, less_important,
    sa_set, sign_attr, sign_gap, statements_for, utility_from_counts,
    ConsensusOpts, FamilyBuilder, Sign, Statement, StatementKind,
};
use rashomon_core::forest::{train_forest, CartParams, FeatureGroups, LossKind, Task};
use rashomon_core::kernel::{fit_krr, KernelSpec};
use rashomon_core::Matrix;

const D: usize = 4;

/// Shared regression problem: three informative columns of very different
/// strength and one pure-noise column.
fn regression_data(seed: u64, n: usize) -> (Matrix, Vec<f64>) {
    let mut rng = common::rng(seed);
    let mut m = Matrix::zeros(n, D);
    let mut y = vec![0.0; n];
    for i in 0..n {
        for j in 0..D {
            m.set(i, j, rng.gen_range(-2.0..2.0));
        }
        y[i] = 3.0 * m.get(i, 0) - 2.0 * m.get(i, 1) + 0.5 * m.get(i, 2)
            + rng.gen_range(-0.1..0.1);
    }
    (m, y)
}

fn feature_names() -> Vec<String> {
    (0..D).map(|i| format!("x{i}")).collect()
}

fn additive_builder(data: &Matrix, y: &[f64]) -> AdditiveBuilder {
    let f = fit(data, y, &BasisSpec::all_linear(D), feature_names()).unwrap();
    AdditiveBuilder::new(Arc::new(f), data).unwrap()
}

fn kernel_builder(data: &Matrix, y: &[f64]) -> KrrBuilder {
    // A compact, well-separated dictionary keeps the coefficient geometry
    // comfortably positive definite.
    let atoms: Vec<usize> = (0..20).map(|i| i * 3).collect();
    let dict = data.select_rows(&atoms);
    let ys: Vec<f64> = atoms.iter().map(|&i| y[i]).collect();
    let f = fit_krr(&dict, &ys, &KernelSpec::Gaussian { gamma: 1.0 }, 0.05).unwrap();
    let baseline = data.column_means();
    KrrBuilder::new(Arc::new(f), baseline, 200).unwrap()
}

fn forest_builder(data: &Matrix, y: &[f64]) -> ForestBuilder {
    let trees = train_forest(
        data,
        y,
        12,
        41,
        &CartParams {
            max_depth: Some(5),
            ..CartParams::default()
        },
        Task::Regression,
    )
    .unwrap();
    let background = Arc::new(data.select_rows(&(0..16).collect::<Vec<_>>()));
    ForestBuilder::new(
        Arc::new(trees),
        &FeatureGroups::singletons(&feature_names()),
        background,
        data,
        y,
        LossKind::Squared,
    )
    .unwrap()
}

/// Mid-range loss bound for a builder: strictly above the floor, low enough
/// to leave statements standing.
fn mid_epsilon(b: &dyn FamilyBuilder, slack: f64) -> f64 {
    b.min_loss() + slack
}

#[test]
fn certified_statements_hold_on_every_sampled_member() {
    let (data, y) = regression_data(0xc5_01, 60);
    let var = common::variance(&y);
    let opts = ConsensusOpts::new(1e-6).unwrap();
    let mut rng = common::rng(0xc5_02);

    let builders: Vec<(&str, Box<dyn FamilyBuilder>, f64)> = vec![
        ("additive", Box::new(additive_builder(&data, &y)), 0.05 * var),
        ("kernel", Box::new(kernel_builder(&data, &y)), 0.003 * var),
        ("forest", Box::new(forest_builder(&data, &y)), 0.3 * var),
    ];

    for (label, builder, slack) in &builders {
        let provider = builder.at_epsilon(mid_epsilon(builder.as_ref(), *slack)).unwrap();
        let players = provider.players().to_vec();
        let index_of = |name: &str| players.iter().position(|p| p == name).unwrap();

        let mut certified = 0usize;
        for i in 0..5 {
            let x = data.row(i * 7);
            let attr = provider.explain(x).unwrap();
            let statements = statements_for(&attr, &opts, i, provider.epsilon()).unwrap();
            certified += statements.len();

            // Sign lookup for the comparison statements below.
            let sign_by_name = |name: &str| {
                sign_attr(&attr, index_of(name), opts.margin)
                    .unwrap()
                    .expect("compared players have certified signs")
            };

            for _ in 0..60 {
                let (attrs, gap) = attr.sample_member(&mut rng);
                for st in &statements {
                    match &st.kind {
                        StatementKind::GapSign { sign } => {
                            assert!(
                                sign.factor() * gap > 0.0,
                                "{label} instance {i}: gap {gap} contradicts {sign:?}"
                            );
                        }
                        StatementKind::AttrSign { feature, sign } => {
                            let v = attrs[index_of(feature)];
                            assert!(
                                sign.factor() * v > 0.0,
                                "{label} instance {i}: attr {feature}={v} contradicts {sign:?}"
                            );
                        }
                        StatementKind::LessImportant { less, more } => {
                            let sl = sign_by_name(less);
                            let sm = sign_by_name(more);
                            let vl = sl.factor() * attrs[index_of(less)];
                            let vm = sm.factor() * attrs[index_of(more)];
                            assert!(
                                vl <= vm + 1e-9,
                                "{label} instance {i}: {less} ({vl}) not below {more} ({vm})"
                            );
                        }
                    }
                }
            }
        }
        assert!(
            certified >= 5,
            "{label}: too few statements ({certified}) for the check to mean anything"
        );
    }
}

/// Strip the loss bound so statement sets at different bounds can be
/// compared as sets.
fn keyed(statements: &[Statement]) -> Vec<(usize, StatementKind)> {
    statements.iter().map(|s| (s.instance, s.kind.clone())).collect()
}

#[test]
fn statements_nest_as_the_bound_loosens() {
    let (data, y) = regression_data(0xc5_03, 60);
    let var = common::variance(&y);
    let opts = ConsensusOpts::default();

    let builders: Vec<(&str, Box<dyn FamilyBuilder>, f64, f64)> = vec![
        (
            "additive",
            Box::new(additive_builder(&data, &y)),
            0.01 * var,
            0.08 * var,
        ),
        (
            "forest",
            Box::new(forest_builder(&data, &y)),
            0.1 * var,
            0.8 * var,
        ),
    ];

    for (label, builder, slack_narrow, slack_wide) in &builders {
        let narrow = builder.at_epsilon(builder.min_loss() + slack_narrow).unwrap();
        let wide = builder.at_epsilon(builder.min_loss() + slack_wide).unwrap();
        let mut total_narrow = 0usize;
        let mut total_wide = 0usize;
        for i in 0..8 {
            let x = data.row(i * 5);
            let sn = keyed(
                &statements_for(&narrow.explain(x).unwrap(), &opts, i, 0.0).unwrap(),
            );
            let sw = keyed(&statements_for(&wide.explain(x).unwrap(), &opts, i, 0.0).unwrap());
            for s in &sw {
                assert!(
                    sn.contains(s),
                    "{label} instance {i}: {s:?} certified on the wider family only"
                );
            }
            total_narrow += sn.len();
            total_wide += sw.len();
        }
        assert!(
            total_wide <= total_narrow,
            "{label}: {total_wide} statements wide vs {total_narrow} narrow"
        );
    }
}

#[test]
fn importance_order_matches_a_reachability_oracle() {
    let (data, y) = regression_data(0xc5_04, 60);
    let builder = additive_builder(&data, &y);
    let epsilon = builder.min_loss() + 0.05 * common::variance(&y);
    let provider = builder.at_epsilon(epsilon).unwrap();
    let opts = ConsensusOpts::default();

    let mut orders_with_edges = 0usize;
    for i in 0..10 {
        let attr = provider.explain(data.row(i * 3)).unwrap();
        let order = build_partial_order(&attr, &opts, i, epsilon).unwrap();
        let n = order.len();

        // Member-level relation is reflexive and equals its own closure.
        let mut le = vec![false; n * n];
        for a in 0..n {
            assert!(order.le(a, a));
            for b in 0..n {
                le[a * n + b] = order.le(a, b);
            }
        }
        assert_eq!(le, common::transitive_closure(&le, n), "instance {i}");

        // The relation must also match pairwise queries asked one at a time.
        for a in 0..n {
            for b in 0..n {
                let direct = less_important(
                    &attr,
                    order.members[a].player,
                    order.members[b].player,
                    opts.margin,
                )
                .unwrap();
                if direct {
                    assert!(order.le(a, b), "instance {i}: missing {a} <= {b}");
                }
                // The order may add relations promoted by closure, so only
                // the forward direction is exact.
            }
        }

        // Nodes partition the members and are mutually related.
        let mut seen = vec![false; n];
        for class in &order.nodes {
            for &m in class {
                assert!(!seen[m]);
                seen[m] = true;
            }
            for &a in class {
                for &b in class {
                    assert!(order.le(a, b) && order.le(b, a));
                }
            }
        }
        assert!(seen.iter().all(|&s| s));

        // Node order is antisymmetric (no two-node cycles survive merging).
        let nn = order.nodes.len();
        for a in 0..nn {
            for b in 0..nn {
                if a != b {
                    assert!(!(order.node_le(a, b) && order.node_le(b, a)));
                }
            }
        }

        // Covering edges regenerate exactly the node order by reachability.
        let edges = order.hasse_edges();
        let mut adj = vec![false; nn * nn];
        for a in 0..nn {
            adj[a * nn + a] = true;
        }
        for &(more, less) in &edges {
            adj[less * nn + more] = true;
        }
        let reach = common::transitive_closure(&adj, nn);
        for a in 0..nn {
            for b in 0..nn {
                assert_eq!(
                    reach[a * nn + b],
                    order.node_le(a, b),
                    "instance {i}: nodes {a} {b}"
                );
            }
        }
        // And no edge may be implied by two others (minimality).
        for (k, &(more, less)) in edges.iter().enumerate() {
            let mut thin = vec![false; nn * nn];
            for a in 0..nn {
                thin[a * nn + a] = true;
            }
            for (k2, &(m2, l2)) in edges.iter().enumerate() {
                if k2 != k {
                    thin[l2 * nn + m2] = true;
                }
            }
            let closed = common::transitive_closure(&thin, nn);
            assert!(
                !closed[less * nn + more],
                "instance {i}: edge {more} -> {less} is redundant"
            );
        }
        orders_with_edges += usize::from(!edges.is_empty());
    }
    assert!(orders_with_edges >= 5, "order oracle exercised too few graphs");
}

#[test]
fn utility_matches_a_hand_rolled_count() {
    let (data, y) = regression_data(0xc5_05, 50);
    let builder = additive_builder(&data, &y);
    let var = common::variance(&y);
    let opts = ConsensusOpts::default();
    let instances = data.select_rows(&(0..12).collect::<Vec<_>>());
    let epsilons: Vec<f64> = (1..=6)
        .map(|k| builder.min_loss() + 0.02 * k as f64 * var)
        .collect();

    let points = epsilon_linesearch(&builder, &instances, &epsilons, &opts).unwrap();

    for point in &points {
        let provider = builder.at_epsilon(point.epsilon).unwrap();
        let mut counts: Vec<Option<usize>> = Vec::new();
        for i in 0..instances.rows() {
            let attr = provider.explain(instances.row(i)).unwrap();
            if sign_gap(&attr, opts.margin).unwrap().is_none() {
                counts.push(None);
                continue;
            }
            // Count ordered related pairs over the sign-certified players,
            // reflexive pairs included, straight from pairwise queries plus
            // closure — independently of PartialOrder's bookkeeping.
            let sa = sa_set(&attr, opts.margin).unwrap();
            let n = sa.len();
            let mut rel = vec![false; n * n];
            for a in 0..n {
                for b in 0..n {
                    rel[a * n + b] = a == b
                        || less_important(&attr, sa[a].0, sa[b].0, opts.margin).unwrap();
                }
            }
            let closed = common::transitive_closure(&rel, n);
            counts.push(Some(closed.iter().filter(|&&v| v).count()));
        }
        let expected = utility_from_counts(&counts, D);
        assert!(
            (point.utility - expected).abs() <= 1e-12,
            "epsilon {}: {} vs {expected}",
            point.epsilon,
            point.utility
        );
        assert!((point.excess - (point.epsilon - builder.min_loss())).abs() <= 1e-15);
    }

    for w in points.windows(2) {
        assert!(
            w[1].utility <= w[0].utility + 1e-12,
            "utility rose: {} -> {}",
            w[0].utility,
            w[1].utility
        );
    }
}

#[test]
fn utility_is_non_increasing_for_kernel_and_forest_families() {
    let (data, y) = regression_data(0xc5_06, 60);
    let var = common::variance(&y);
    let opts = ConsensusOpts::default();
    let instances = data.select_rows(&[0, 5, 10, 15, 20, 25]);

    let kernel = kernel_builder(&data, &y);
    let epsilons: Vec<f64> = (1..=8)
        .map(|k| kernel.min_loss() + 0.01 * k as f64 * var)
        .collect();
    let pts = epsilon_linesearch(&kernel, &instances, &epsilons, &opts).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].utility <= w[0].utility + 1e-12);
    }

    let forest = forest_builder(&data, &y);
    let floor = forest.min_loss();
    let ceil = forest.curve()[0];
    let epsilons: Vec<f64> = (0..=8)
        .map(|k| floor + (ceil - floor) * k as f64 / 8.0)
        .collect();
    let pts = epsilon_linesearch(&forest, &instances, &epsilons, &opts).unwrap();
    for w in pts.windows(2) {
        assert!(w[1].utility <= w[0].utility + 1e-12);
    }
}

#[test]
fn no_sampled_member_escapes_its_certified_ranges() {
    let (data, y) = regression_data(0xc5_07, 60);
    let var = common::variance(&y);
    let mut rng = common::rng(0xc5_08);

    let builders: Vec<(&str, Box<dyn FamilyBuilder>, f64)> = vec![
        ("additive", Box::new(additive_builder(&data, &y)), 0.05 * var),
        ("kernel", Box::new(kernel_builder(&data, &y)), 0.02 * var),
        ("forest", Box::new(forest_builder(&data, &y)), 0.4 * var),
    ];

    for (label, builder, slack) in &builders {
        let provider = builder.at_epsilon(builder.min_loss() + slack).unwrap();
        for i in 0..6 {
            let attr = provider.explain(data.row(i * 9)).unwrap();
            for _ in 0..80 {
                let (attrs, gap) = attr.sample_member(&mut rng);
                let v = embedding_check(&attr, &attrs, gap, 1e-9).unwrap();
                assert_eq!(v, 0, "{label} instance {i}");
            }
            // A corrupted sample must be flagged, or the check proves nothing.
            let (mut attrs, gap) = attr.sample_member(&mut rng);
            let (_, hi) = attr.attr_range(0).unwrap();
            attrs[0] = hi + 1.0;
            assert_eq!(embedding_check(&attr, &attrs, gap, 1e-9).unwrap(), 1);
            let (glo, _) = attr.gap_range().unwrap();
            attrs[0] = hi; // back inside
            assert_eq!(embedding_check(&attr, &attrs, glo - 1.0, 1e-9).unwrap(), 1);
        }
    }
}

#[test]
fn comparator_summary_matches_hand_computation() {
    let samples = vec![vec![1.0, -2.0], vec![3.0, 0.0]];
    let s = comparators(&samples).unwrap();
    assert_eq!(s.mean, vec![2.0, -1.0]);
    assert_eq!(s.variance, vec![1.0, 1.0]);
    // |1| < |-2| ranks (1, 0); |3| > |0| ranks (0, 1); averaged (0.5, 0.5).
    assert_eq!(s.mean_rank, vec![0.5, 0.5]);

    let tied = vec![vec![2.0, -2.0, 1.0]];
    let t = comparators(&tied).unwrap();
    assert_eq!(t.mean_rank, vec![0.5, 0.5, 2.0]);
}

#[test]
fn noise_feature_loses_its_sign_before_the_signal_features() {
    let (data, y) = regression_data(0xc5_09, 80);
    let builder = additive_builder(&data, &y);
    let epsilon = builder.min_loss() + 0.05 * common::variance(&y);
    let provider = builder.at_epsilon(epsilon).unwrap();
    let opts = ConsensusOpts::default();

    let mut dummy_out = 0usize;
    let mut strong_in = 0usize;
    const PROBES: usize = 20;
    for i in 0..PROBES {
        let attr = provider.explain(data.row(i * 4)).unwrap();
        if sign_attr(&attr, 3, opts.margin).unwrap().is_none() {
            dummy_out += 1;
        }
        if sign_attr(&attr, 0, opts.margin).unwrap().is_some() {
            strong_in += 1;
        }
    }
    assert!(
        dummy_out >= PROBES * 9 / 10,
        "noise column kept a certified sign on {} of {PROBES} probes",
        PROBES - dummy_out
    );
    assert!(
        strong_in >= PROBES * 9 / 10,
        "signal column certified on only {strong_in} of {PROBES} probes"
    );
}

#[test]
fn sign_glyphs_and_factors_are_consistent() {
    assert_eq!(Sign::Positive.factor(), 1.0);
    assert_eq!(Sign::Negative.factor(), -1.0);
    assert_eq!(Sign::Positive.glyph(), '+');
    assert_eq!(Sign::Negative.glyph(), '-');
}
