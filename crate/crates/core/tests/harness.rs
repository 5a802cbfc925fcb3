use ensemble_sampling::agent::AgentSpec;
use ensemble_sampling::env::NoiseMode;
use ensemble_sampling::harness::{run_experiment, run_realization, ExperimentConfig, RunOptions};

fn linear_config() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(
        r#"
[env]
family = "linear"
dim = 3
actions = 6

[run]
horizon = 40
realizations = 5
seed = 21
noise_mode = "coupled"

[[agents]]
kind = "thompson"

[[agents]]
kind = "ensemble"
models = 8

[[agents]]
kind = "epsilon_greedy"
epsilon = 0.1
"#,
    )
    .unwrap()
}

#[test]
fn agents_share_environments_per_realization() {
    let config = linear_config();
    let out = run_experiment(&config, None, RunOptions::default()).unwrap();
    assert_eq!(out.agents.len(), 3);
    for agent in &out.agents {
        assert_eq!(agent.traces.len(), 5);
        for (r, trace) in agent.traces.iter().enumerate() {
            assert_eq!(trace.realization, r as u64);
            assert!(trace.regret.iter().all(|x| *x >= 0.0 && x.is_finite()));
        }
    }
    // Same realization under a different agent list gives the same trace.
    let solo = run_realization(&config, &AgentSpec::ensemble(8), 3).unwrap();
    assert_eq!(solo, out.get("es_m8").unwrap().traces[3]);
}

#[test]
fn summary_matches_traces() {
    let config = linear_config();
    let out = run_experiment(&config, None, RunOptions::default()).unwrap();
    let ts = out.get("ts").unwrap();
    for t in 0..config.run.horizon {
        let mean = ts.traces.iter().map(|tr| tr.regret[t]).sum::<f64>() / 5.0;
        assert!((mean - ts.summary.per_period_mean[t]).abs() < 1e-12);
    }
    let total: f64 = ts.summary.per_period_mean.iter().sum();
    assert!((total - ts.summary.cumulative_mean).abs() < 1e-9);
}

#[test]
fn every_family_runs() {
    for (family, extra, agents) in [
        ("neuron", "dim = 3", "[[agents]]\nkind = \"ensemble\"\nmodels = 2\n\n[[agents]]\nkind = \"epsilon_greedy\"\nanneal_k = 5.0\n"),
        ("two_layer", "dim = 3\nhidden = 4", "[[agents]]\nkind = \"dropout\"\ndrop_prob = 0.25\n\n[[agents]]\nkind = \"ensemble\"\nmodels = 2\n"),
        ("independent_gaussian", "", "[[agents]]\nkind = \"epsilon_greedy\"\nepsilon = 0.2\n"),
    ] {
        let text = format!("[env]\nfamily = \"{family}\"\nactions = 5\n{extra}\n\n[run]\nhorizon = 12\nrealizations = 2\n\n{agents}");
        let config = ExperimentConfig::from_toml_str(&text).unwrap();
        let out = run_experiment(&config, None, RunOptions::default()).unwrap();
        assert!(out.agents.iter().all(|a| a.summary.horizon() == 12), "{family}");
    }
}

#[test]
fn invalid_agent_family_pairs_are_config_errors() {
    let dropout_on_neuron = "[env]\nfamily = \"neuron\"\ndim = 2\nactions = 3\n\n[run]\nhorizon = 5\nrealizations = 1\n\n[[agents]]\nkind = \"dropout\"\ndrop_prob = 0.5\n";
    assert!(ExperimentConfig::from_toml_str(dropout_on_neuron).unwrap_err().is_config());
    let no_agents = "[env]\nfamily = \"linear\"\ndim = 2\nactions = 3\n\n[run]\nhorizon = 5\nrealizations = 1\n";
    let config = ExperimentConfig::from_toml_str(no_agents).unwrap();
    assert!(run_experiment(&config, None, RunOptions::default()).unwrap_err().is_config());
}

#[test]
fn noise_modes_differ_but_each_is_reproducible() {
    let mut config = linear_config();
    let coupled = run_experiment(&config, None, RunOptions::threads(2)).unwrap();
    config.run.noise_mode = NoiseMode::Fresh;
    let fresh = run_experiment(&config, None, RunOptions::threads(2)).unwrap();
    let again = run_experiment(&config, None, RunOptions::threads(3)).unwrap();
    assert_ne!(coupled.agents[1].traces, fresh.agents[1].traces);
    assert_eq!(fresh.agents[1].traces, again.agents[1].traces);
}

#[test]
fn traces_can_be_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = linear_config();
    config.run.write_traces = false;
    run_experiment(&config, Some(dir.path()), RunOptions::default()).unwrap();
    assert!(dir.path().join("summary.csv").exists());
    assert!(!dir.path().join("traces.csv").exists());
}
