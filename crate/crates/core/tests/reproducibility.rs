use coverage_lab::agents::{
    golf_beta, make_offline_dataset, run_golf, run_hybridq, Behavior, GolfConfig, HybridConfig,
};
use coverage_lab::coverage::DataDistribution;
use coverage_lab::harness::{closed_class_instance, run_experiment, ClosedClassSpec, ExperimentConfig};
use coverage_lab::lsvi::{make_random_linear_mdp, run_lsvi, FeatureStructure, LsviConfig};

#[test]
fn agents_are_bitwise_reproducible() {
    let (m, class) = closed_class_instance(&ClosedClassSpec::default(), 4).unwrap();
    let cfg = GolfConfig::new(golf_beta(class.size(), 200, 3, 0.05, 1.0), 200);
    let a = run_golf(&m, &class, &cfg, 9).unwrap();
    let b = run_golf(&m, &class, &cfg, 9).unwrap();
    assert_eq!(a.trace.to_csv_bytes().unwrap(), b.trace.to_csv_bytes().unwrap());
    assert_eq!(a.selections, b.selections);

    let nu = DataDistribution::uniform(3, 3, 2);
    let off = make_offline_dataset(&m, Behavior::Distribution(&nu), 100, 2).unwrap();
    let h1 = run_hybridq(&m, &class, &off, &HybridConfig::new(200), 9).unwrap();
    let h2 = run_hybridq(&m, &class, &off, &HybridConfig::new(200), 9).unwrap();
    assert_eq!(h1.to_csv_bytes().unwrap(), h2.to_csv_bytes().unwrap());

    let lin = make_random_linear_mdp(3, 5, 2, 3, FeatureStructure::Generic, 4).unwrap();
    let l1 = run_lsvi(&lin, &LsviConfig::new(300), 9).unwrap();
    let l2 = run_lsvi(&lin, &LsviConfig::new(300), 9).unwrap();
    assert_eq!(l1.trace.to_csv_bytes().unwrap(), l2.trace.to_csv_bytes().unwrap());
}

#[test]
fn experiments_are_idempotent_and_job_count_independent() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let config = |dir: &std::path::Path| {
        ExperimentConfig::from_json(&format!(
            r#"{{"environment": {{"generator": "random_tabular", "params": {{"S": 3, "A": 2, "H": 3, "seed": 2}}}},
                "algorithm": "golf", "episodes": 120, "seeds": [1, 2, 3],
                "sweep": {{"beta_scale": [0.5, 1.0]}}, "output_dir": {dir:?}}}"#
        ))
        .unwrap()
    };
    let c0 = config(dirs[0].path());
    let first = run_experiment(&c0, 1, false).unwrap();
    assert_eq!(first.computed, 6);
    let summary_bytes = std::fs::read(dirs[0].path().join("summary.json")).unwrap();
    let again = run_experiment(&c0, 4, false).unwrap();
    assert_eq!(again.computed, 0);
    assert_eq!(again.cells, first.cells);
    assert_eq!(std::fs::read(dirs[0].path().join("summary.json")).unwrap(), summary_bytes);

    let parallel = run_experiment(&config(dirs[1].path()), 4, false).unwrap();
    assert_eq!(parallel.cells.len(), first.cells.len());
    for (p, s) in parallel.cells.iter().zip(&first.cells) {
        assert_eq!(p.median_final_regret, s.median_final_regret);
    }
    for name in ["golf_beta_scale=0.5_seed1.csv", "golf_beta_scale=1_seed3.csv"] {
        assert_eq!(
            std::fs::read(dirs[0].path().join(name)).unwrap(),
            std::fs::read(dirs[1].path().join(name)).unwrap(),
            "{name}"
        );
    }
}
