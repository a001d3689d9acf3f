use fgg_experiments::fit::{hyperplane_fit_experiment, FitConfig, LayerKind};
use fgg_experiments::output::{write_bench, write_distortion, write_fit, write_profile};
use fgg_experiments::profile::{depth_profile_experiment, ProfileConfig};
use fgg_experiments::tree::{
    embed_tree, recompute_distortion, tree_embedding_experiment, HierarchyTree, StopRule, TreeConfig,
};
use fgg_experiments::with_threads;
use lorentz_fgg::Curvature;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn tree_distances_form_an_integral_metric(m in 2usize..4, h in 1usize..4) {
        let tree = HierarchyTree::new(m, h).unwrap();
        let expected: usize = (0..=h).map(|l| m.pow(l as u32)).sum();
        prop_assert_eq!(tree.len(), expected);
        let d = tree.distance_matrix();
        let n = tree.len();
        for u in 0..n {
            prop_assert_eq!(d[[u, u]], 0.0);
            for v in 0..n {
                prop_assert_eq!(d[[u, v]], d[[v, u]]);
                prop_assert_eq!(d[[u, v]].fract(), 0.0);
                prop_assert_eq!(d[[u, v]], tree.distance(u, v) as f64);
                for w in 0..n {
                    prop_assert!(d[[u, w]] <= d[[u, v]] + d[[v, w]]);
                }
            }
        }
    }
}

fn small_tree_cfg() -> TreeConfig {
    TreeConfig { depth: 3, steps_per_level: Some(100), ..TreeConfig::default() }
}

#[test]
fn stored_embeddings_reproduce_the_report() {
    let cfg = small_tree_cfg();
    let tree = HierarchyTree::new(cfg.arity, cfg.depth).unwrap();
    let k = Curvature::new(cfg.kappa).unwrap();
    for kind in [LayerKind::Fgg, LayerKind::Chen] {
        let run = embed_tree(&tree, kind, &cfg, 300, StopRule::FullBudget, 11).unwrap();
        let again = recompute_distortion(&tree, run.embeddings.view(), run.report.scale, k).unwrap();
        assert!((again.mean - run.report.mean_relative_distortion).abs() <= 1e-9, "{kind}");
        assert!((again.worst - run.report.worst_pair_distortion).abs() <= 1e-9, "{kind}");
        assert!(run.report.max_manifold_residual <= 1e-6, "{kind}: {}", run.report.max_manifold_residual);
        assert_eq!(run.report.steps_used, 300);
    }
}

#[test]
fn tree_experiment_is_independent_of_thread_count() {
    let cfg = small_tree_cfg();
    let one = with_threads(1, || tree_embedding_experiment(&cfg, 5)).unwrap().unwrap();
    let two = with_threads(2, || tree_embedding_experiment(&cfg, 5)).unwrap().unwrap();
    assert_eq!(one, two);
    assert_eq!(one.budget, 300);
    assert_eq!(one.runs.len(), 2);
}

#[test]
fn origin_target_converges_quickly_for_both_layers() {
    let cfg = FitConfig { targets: vec![0.0], budget: 1000, ..FitConfig::default() };
    let recs = hyperplane_fit_experiment(&cfg, 7).unwrap();
    assert_eq!(recs.len(), 2);
    for r in recs {
        assert!(r.converged && r.iterations <= 100, "{r:?}");
    }
}

#[test]
fn fit_replays_across_thread_counts() {
    let cfg = FitConfig { targets: vec![0.5, 1.0], budget: 2000, ..FitConfig::default() };
    let a = with_threads(1, || hyperplane_fit_experiment(&cfg, 3)).unwrap().unwrap();
    let b = with_threads(3, || hyperplane_fit_experiment(&cfg, 3)).unwrap().unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_outputs_follow_the_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let fit = hyperplane_fit_experiment(&FitConfig { targets: vec![0.0, 1.0], budget: 500, ..FitConfig::default() }, 1).unwrap();
    let tree = tree_embedding_experiment(&TreeConfig { depth: 2, steps_per_level: Some(20), ..TreeConfig::default() }, 1).unwrap();
    let prof = depth_profile_experiment(&ProfileConfig { epochs: 1, samples_per_class: 4, ..ProfileConfig::default() }, 1).unwrap();
    let bench = fgg_experiments::bench::caching_benchmark(
        &fgg_experiments::bench::BenchConfig { dims: vec![3], batch: 4, min_sample_ns: 1000, ..Default::default() },
        1,
    )
    .unwrap();

    let reports: Vec<_> = tree.runs.iter().map(|r| r.report.clone()).collect();
    let rows: usize = prof.iter().map(|p| p.rows.len()).sum();
    let cases = [
        ("fit.csv", "target_distance,layer_kind,iterations,converged", fit.len()),
        ("distortion.csv", "arity,depth,layer_kind,mean_distortion,worst_distortion,scale,steps", reports.len()),
        ("profile.csv", "layer_kind,layer_index,stage,mean_hyperbolic_norm", rows),
        ("bench.csv", "variant,dim,batch,median_ns,ratio", 4),
    ];
    write_fit(&dir.path().join("fit.csv"), &fit).unwrap();
    write_distortion(&dir.path().join("distortion.csv"), &reports).unwrap();
    write_profile(&dir.path().join("profile.csv"), &prof).unwrap();
    write_bench(&dir.path().join("bench.csv"), &bench).unwrap();
    for (name, header, n) in cases {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(header), "{name}");
        assert_eq!(lines.count(), n, "{name}");
    }

    let mut rdr = csv::Reader::from_path(dir.path().join("distortion.csv")).unwrap();
    let first = rdr.records().next().unwrap().unwrap();
    let mean: f64 = first[3].parse().unwrap();
    assert_eq!(mean, reports[0].mean_relative_distortion, "floats round-trip exactly");
}
