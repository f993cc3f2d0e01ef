use std::path::Path;

use powermat_core::harness::{
    cli_main, prepare_data, run_cell, run_single, run_sweep, run_sweep_on, write_single_outputs, ExperimentConfig,
    RunStatus, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE,
};
use powermat_core::trainers::Algorithm;

const SMALL: &str = r#"
[data.synthetic]
n_users = 30
n_items = 50
n_events = 500
context_columns = [4, 3, 2]

[train]
epochs = 4

[train.overrides.powermat]
gamma = 1e-4
"#;

fn small() -> ExperimentConfig {
    ExperimentConfig::from_toml_str(SMALL).unwrap()
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["powermat"];
    argv.extend_from_slice(args);
    let code = cli_main(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn single_run_evaluates_all_algorithms_on_one_split() {
    let cells = run_single(&small()).unwrap();
    assert_eq!(cells.len(), 3);
    let n_test: Vec<usize> = cells.iter().map(|c| c.record.eval.as_ref().unwrap().n_test).collect();
    assert_eq!(n_test, vec![100; 3]);
    for c in &cells {
        assert_eq!(c.record.status, RunStatus::Ok);
        assert!(c.record.eval.as_ref().unwrap().mae.is_finite());
    }
}

#[test]
fn report_files_are_byte_identical_across_runs() {
    let config = small();
    let data = prepare_data(&config).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let cells = run_single(&config).unwrap();
        write_single_outputs(d.path(), &data, &config, &cells).unwrap();
    }
    for name in ["report.json", "report.csv", "model_powermat.json", "model_dotmat.json", "model_classic_mf.json"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn rating_blind_powermat_is_evaluated() {
    let mut config = small();
    config.train.rating_blind = true;
    config.train.algorithms = vec![Algorithm::PowerMat];
    let cells = run_single(&config).unwrap();
    let train = cells[0].record.train.as_ref().unwrap();
    assert_eq!(train.rating_reads, 0);
    assert!(cells[0].record.eval.as_ref().unwrap().mae.is_finite());
}

fn sweep_config() -> ExperimentConfig {
    let mut config = small();
    config.sweep.gammas = vec![1e-4, 1e-3, 1e-2, 0.1, 1.0];
    config
}

#[test]
fn sweep_covers_the_grid_and_best_matches_csv() {
    let config = sweep_config();
    let dir = tempfile::tempdir().unwrap();
    let result = run_sweep(&config).unwrap();
    assert_eq!(result.rows.len(), 15);
    let summary = powermat_core::harness::write_sweep_outputs(dir.path(), &config, &result).unwrap();

    let mut reader = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let mut best: std::collections::BTreeMap<String, (f64, f64)> = Default::default();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        rows += 1;
        if rec[5].trim() == "true" {
            assert!(rec[2].is_empty());
            continue;
        }
        let (gamma, mae): (f64, f64) = (rec[1].parse().unwrap(), rec[2].parse().unwrap());
        let e = best.entry(rec[0].to_string()).or_insert((f64::NAN, f64::INFINITY));
        if mae < e.1 {
            *e = (gamma, mae);
        }
    }
    assert_eq!(rows, 15);
    for b in &summary.algorithms {
        let (g, m) = best[b.algorithm.name()];
        assert_eq!(b.best_gamma, Some(g));
        assert_eq!(b.best_mae, Some(m));
    }
}

#[test]
fn sweep_cell_matches_standalone_run() {
    let config = sweep_config();
    let data = prepare_data(&config).unwrap();
    let result = run_sweep_on(&data, &config).unwrap();
    for row in &result.rows {
        let alone = run_cell(&data, &config, row.algorithm, Some(row.gamma)).unwrap();
        assert_eq!(alone.record.eval.as_ref().map(|e| e.mae), row.mae);
        assert_eq!(alone.record.status == RunStatus::Diverged, row.diverged);
    }
}

#[test]
fn cli_requires_config() {
    let (code, _, err) = run_cli(&["train"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--config"));
}

#[test]
fn cli_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[train]\nepochz = 3\n");
    assert_eq!(run_cli(&["train", "--config", &cfg]).0, EXIT_USAGE);
}

#[test]
fn cli_validate_data_lists_skipped_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ratings.csv");
    std::fs::write(
        &path,
        "userID,itemID,rating,time\n1,10,4,1\n1,11,x,2\n2,10,5,\n3,12,9,1\n2,12,3,2\n",
    )
    .unwrap();
    let mapping = "[data.columns]\ncontext_columns = [\"time\"]\n";
    let cfg = write_config(dir.path(), mapping);
    let (code, out, _) = run_cli(&["validate-data", path.to_str().unwrap(), "--config", &cfg]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("rows read: 5, loaded: 3, skipped: 2"), "{out}");
    assert!(out.contains("skipped line 3:"));
    assert!(out.contains("skipped line 5:"));
}

#[test]
fn cli_train_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let (code, out, err) = run_cli(&["train", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("classic_mf: mae="));
    let model = dir.path().join("o/model_classic_mf.json");
    let model = model.to_str().unwrap();
    let (code, out, err) = run_cli(&["predict", "--model", model, "--user", "1", "--item", "1", "--context", "1,2,2"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let raw: f64 = out.split('\t').next().unwrap().parse().unwrap();
    assert!(raw.is_finite());
    let (code, out, _) = run_cli(&["predict", "--model", model, "--user", "nobody", "--item", "1", "--context", "1,1,1"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("cold-start"));
    let (code, _, _) = run_cli(&["predict", "--model", model, "--user", "1", "--item", "1", "--context", "1,1"]);
    assert_ne!(code, EXIT_OK);
}

#[test]
fn cli_synth_round_trips_through_validate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synth.csv");
    let p = path.to_str().unwrap();
    let (code, out, _) = run_cli(&["synth", "--out", p, "--users", "10", "--items", "20", "--events", "100"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("wrote 100 events"));
    let (code, out, _) = run_cli(&["validate-data", p]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("rows read: 100, loaded: 100, skipped: 0"), "{out}");
}

#[test]
fn cli_train_reports_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}\n[train.overrides.dotmat]\ngamma = 1e6\n").replace("gamma = 1e-4", "gamma = 10.0");
    let cfg = write_config(dir.path(), &body);
    let (code, out, _) = run_cli(&["train", "--config", &cfg]);
    assert_eq!(code, EXIT_DIVERGED, "{out}");
    assert!(out.contains("powermat: diverged"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
