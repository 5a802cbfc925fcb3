use std::path::Path;

use ensemble_sampling::cli;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["enssamp"];
    full.extend_from_slice(args);
    let code = cli::run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const SMALL: &str = r#"
[env]
family = "independent_gaussian"
actions = 4

[run]
horizon = 20
realizations = 3
seed = 5

[[agents]]
kind = "thompson"

[[agents]]
kind = "ensemble"
models = 3
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let (code, out, err) = invoke(&["run", &config, "--out", out_dir.to_str().unwrap(), "--realizations", "2"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("es_m3"));
    let traces = std::fs::read_to_string(out_dir.join("traces.csv")).unwrap();
    let mut lines = traces.lines();
    assert_eq!(lines.next(), Some("agent,realization,t,regret"));
    assert_eq!(lines.count(), 2 * 2 * 20);
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert!(summary.starts_with("agent,t,mean_regret,stderr\n"));
    assert_eq!(summary.lines().count(), 1 + 2 * 20);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["run"]["realizations"], 2);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let read = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        assert_eq!(invoke(&["run", &config, "--seed", seed, "--out", out.to_str().unwrap()]).0, 0);
        std::fs::read(out.join("summary.csv")).unwrap()
    };
    assert_eq!(read("1", "a"), read("1", "b"));
    assert_ne!(read("1", "c"), read("2", "d"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), &SMALL.replace("seed = 5", "seed = 5\nbogus = 1"));
    let (code, _, err) = invoke(&["run", &bad, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("bogus"), "{err}");
    assert_eq!(invoke(&["run", "/no/such/file.toml"]).0, 2);
    assert_eq!(invoke(&["frobnicate"]).0, 2);
    assert_eq!(invoke(&["bound", "--actions", "5", "--horizon", "10", "--eps", "-1"]).0, 2);
    assert_eq!(invoke(&["verify", "--suite", "nonsense"]).0, 2);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let (code, _, err) = invoke(&["run", &config, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn bound_prints_integer_and_warns_outside_assumption() {
    let (code, out, err) = invoke(&["bound", "--actions", "10", "--horizon", "100", "--eps", "0.5"]);
    assert_eq!(code, 0);
    // 4*10/0.25 * ln(4*10*100/0.125) = 160 * ln(32000)
    let expect = (160.0f64 * 32000f64.ln()).ceil() as u64;
    assert_eq!(out.trim().parse::<u64>().unwrap(), expect);
    assert!(err.is_empty());
    let (code, out, err) = invoke(&["bound", "--actions", "1", "--horizon", "1", "--eps", "1"]);
    assert_eq!(code, 0);
    // 4 * ln 4
    assert_eq!(out.trim(), "6");
    assert!(err.contains("warning"));
    // ln(4/8) < 0 floors at one model
    let (_, out, _) = invoke(&["bound", "--actions", "1", "--horizon", "1", "--eps", "2"]);
    assert_eq!(out.trim(), "1");
}

#[test]
fn verify_prints_one_line_per_suite() {
    let (code, out, _) = invoke(&["verify", "--suite", "pinsker", "--suite", "gradient"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("PASS pinsker"));
    assert!(lines[1].starts_with("PASS gradient"));
}

#[test]
fn min_models_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("mm");
    let (code, out, err) = invoke(&[
        "min-models", &config, "--eps", "100", "--grid", "1,2", "--actions", "3", "--horizon", "15",
        "--trailing-window", "5", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("minimal M = 1"));
    let csv = std::fs::read_to_string(out_dir.join("min_models.csv")).unwrap();
    assert!(csv.starts_with("models,mean_regret,stderr,"));
    let meta = std::fs::read_to_string(out_dir.join("min_models.json")).unwrap();
    assert!(meta.contains("[10, 14]"), "{meta}");
    assert_eq!(invoke(&["min-models", &config, "--out", out_dir.to_str().unwrap()]).0, 2);
    assert_eq!(invoke(&["min-models", &config, "--eps", "0.1", "--grid", "4,2"]).0, 2);
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ensemble_sampling::harness::ExperimentConfig::from_path(&path).unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
