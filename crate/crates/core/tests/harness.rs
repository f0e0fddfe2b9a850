use std::fs;
use std::path::PathBuf;

use depsgld::harness::{
    run_logreg, run_sample1d, tracked_agents, validate_network, Experiment, ExperimentConfig,
};
use depsgld::metrics::AgentTag;
use depsgld::topology::GraphKind;
use depsgld::Error;

fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn small_sample1d(out: Option<PathBuf>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::resolve(
        Experiment::Sample1d,
        None,
        &kv(&[
            ("agents", "8"),
            ("chains", "20"),
            ("iters", "40"),
            ("record-every", "5"),
        ]),
    )
    .unwrap();
    cfg.out = out;
    cfg
}

#[test]
fn sample1d_writes_one_directory_per_topology() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_sample1d(Some(dir.path().to_path_buf()));
    let out = run_sample1d(&cfg).unwrap();
    assert_eq!(out.runs.len(), 4);
    for kind in GraphKind::ALL {
        let sub = dir.path().join(kind.name());
        for file in ["config.txt", "trace.csv", "samples.csv", "manifest.txt"] {
            assert!(sub.join(file).is_file(), "{} missing in {kind}", file);
        }
        let trace = fs::read_to_string(sub.join("trace.csv")).unwrap();
        assert_eq!(
            trace.lines().next(),
            Some("replica,iter,agent,metric,value")
        );
        let samples = fs::read_to_string(sub.join("samples.csv")).unwrap();
        assert!(samples.starts_with("replica,iter,agent,dim0"));
        let manifest = fs::read_to_string(sub.join("manifest.txt")).unwrap();
        assert!(manifest.contains(&format!("topology={}", kind.name())));
        let echo = fs::read_to_string(sub.join("config.txt")).unwrap();
        assert!(echo.contains("agents = 8"));
    }
}

#[test]
fn sample1d_series_cover_every_recorded_iteration() {
    let cfg = small_sample1d(None);
    let out = run_sample1d(&cfg).unwrap();
    assert_eq!(out.tracked_agents, tracked_agents(8, cfg.sampler.seed));
    assert_eq!(out.tracked_agents.len(), 3);
    for run in &out.runs {
        let mean = run.trace.series(&AgentTag::Mean, "w2");
        assert_eq!(mean.len(), 8);
        assert_eq!(mean.last().unwrap().0, 40);
        for &a in &out.tracked_agents {
            assert_eq!(run.trace.series(&AgentTag::Agent(a), "w2").len(), 8);
        }
        assert_eq!(run.trace.series(&AgentTag::Mean, "consensus").len(), 8);
        let bound = run.trace.series(&AgentTag::Mean, "consensus_bound");
        assert_eq!(bound.is_empty(), !run.topology.is_connected());
    }
}

#[test]
fn missing_breast_cancer_file_is_a_data_error() {
    let cfg = ExperimentConfig::resolve(
        Experiment::Logreg,
        None,
        &kv(&[
            ("data", "/nonexistent/wdbc.data"),
            ("chains", "2"),
            ("iters", "2"),
        ]),
    )
    .unwrap();
    let err = run_logreg(&cfg).unwrap_err();
    assert!(
        matches!(err, Error::Io { .. } | Error::DataValidation(_)),
        "{err}"
    );
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn config_file_is_merged_under_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    fs::write(
        &path,
        "# small run\nagents = 12\neta = 1e-4\ntopology = ring\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::resolve(Experiment::Sample1d, Some(&path), &kv(&[("agents", "6")]))
        .unwrap();
    assert_eq!(cfg.n_agents, 6);
    assert_eq!(cfg.sampler.eta, 1e-4);
    assert_eq!(cfg.topology, Some(GraphKind::Ring));

    let echo = dir.path().join("echo.cfg");
    fs::write(&echo, cfg.echo()).unwrap();
    let again = ExperimentConfig::resolve(Experiment::Sample1d, Some(&echo), &[]).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn bad_config_lines_report_their_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "agents = 4\nthis line has no equals sign\n").unwrap();
    let err = ExperimentConfig::resolve(Experiment::Sample1d, Some(&path), &[]).unwrap_err();
    assert!(err.to_string().contains('2'), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn unknown_keys_and_bad_values_are_config_errors() {
    for pair in [
        ("frobnicate", "1"),
        ("agents", "0"),
        ("eta", "-1"),
        ("topology", "torus"),
    ] {
        let err = ExperimentConfig::resolve(Experiment::Sample1d, None, &kv(&[pair])).unwrap_err();
        assert_eq!(err.exit_code(), 2, "{pair:?}: {err}");
    }
}

#[test]
fn validate_network_flags_the_disconnected_graph() {
    let cfg = ExperimentConfig::resolve(
        Experiment::ValidateNetwork,
        None,
        &kv(&[("agents", "10"), ("mu", "1"), ("lsmooth", "4")]),
    )
    .unwrap();
    let summary = validate_network(&cfg).unwrap();
    assert_eq!(summary.entries.len(), 4);
    let text = summary.to_string();
    assert!(text.contains("non-contracting"));
    assert!(summary.entries.iter().all(|e| e.eta_max.is_some()));
}
