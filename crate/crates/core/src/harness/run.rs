use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{validate_grid, DataSource, ExperimentConfig};
use super::snapshot::ModelSnapshot;
use crate::data::{parse_comoda, split, synth_generate, Dataset, RowDiagnostic};
use crate::error::{Error, Result};
use crate::kernel::FactorModel;
use crate::metrics::{evaluate, EvalReport};
use crate::trainers::{train, Algorithm, TrainReport};

/// Dataset plus the shared split every algorithm trains and tests on.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub full: Dataset,
    pub train: Dataset,
    pub test: Dataset,
    pub diagnostics: Vec<RowDiagnostic>,
}

pub fn prepare_data(config: &ExperimentConfig) -> Result<PreparedData> {
    let (full, diagnostics) = match config.data.source {
        DataSource::File => {
            let path = config
                .data
                .path
                .as_deref()
                .ok_or_else(|| Error::Config("data.path missing".into()))?;
            let outcome = parse_comoda(path, &config.data.columns)?;
            (outcome.dataset, outcome.diagnostics)
        }
        DataSource::Synthetic => {
            let scale = crate::data::RatingScale {
                rating_min: config.data.columns.rating_min,
                r_max: config.model.r_max,
            };
            (synth_generate(&config.data.synthetic, scale)?, Vec::new())
        }
    };
    let (train, test) = split(&full, config.data.test_fraction, config.data.split_seed)?;
    Ok(PreparedData {
        full,
        train,
        test,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Diverged,
}

/// Training statistics written to reports; wall time only when timings
/// are recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub loss_label: String,
    pub loss_trace: Vec<f64>,
    pub user_norm: f64,
    pub item_norm: f64,
    pub alpha_norm: f64,
    pub beta: f64,
    pub steps: u64,
    pub floor_clamps: u64,
    pub rating_reads: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

impl TrainSummary {
    fn from_report(r: &TrainReport, record_timing: bool) -> Self {
        TrainSummary {
            loss_label: r.loss_label.clone(),
            loss_trace: r.loss_trace.clone(),
            user_norm: r.user_norm,
            item_norm: r.item_norm,
            alpha_norm: r.alpha_norm,
            beta: r.beta,
            steps: r.steps,
            floor_clamps: r.floor_clamps,
            rating_reads: r.rating_reads,
            wall_seconds: record_timing.then_some(r.wall_seconds),
        }
    }
}

/// Outcome of training and evaluating one algorithm at one step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSummary>,
    /// Divergence diagnostics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub train_seconds: f64,
}

pub struct CellOutput {
    pub record: RunRecord,
    pub model: Option<FactorModel>,
}

/// Trains and evaluates one cell. Divergence is recorded, not returned as
/// an error.
pub fn run_cell(
    data: &PreparedData,
    config: &ExperimentConfig,
    algorithm: Algorithm,
    gamma: Option<f64>,
) -> Result<CellOutput> {
    let mut tc = config.train_config(algorithm)?;
    if let Some(g) = gamma {
        tc.hyper.gamma = g;
    }
    let gamma = tc.hyper.gamma;
    let diverged = |e: Error, seconds: f64| CellOutput {
        record: RunRecord {
            algorithm,
            gamma,
            status: RunStatus::Diverged,
            eval: None,
            train: None,
            error: Some(e.to_string()),
            train_seconds: seconds,
        },
        model: None,
    };
    let (model, report) = match train(&data.train, &tc) {
        Ok(out) => out,
        Err(e) if e.is_divergence() => return Ok(diverged(e, 0.0)),
        Err(e) => return Err(e),
    };
    let eval = match evaluate(&model, algorithm, &data.train, &data.test, &config.eval_options()) {
        Ok(ev) => ev,
        Err(e) if e.is_divergence() => return Ok(diverged(e, report.wall_seconds)),
        Err(e) => return Err(e),
    };
    Ok(CellOutput {
        record: RunRecord {
            algorithm,
            gamma,
            status: RunStatus::Ok,
            eval: Some(eval),
            train: Some(TrainSummary::from_report(&report, config.output.record_timing)),
            error: None,
            train_seconds: report.wall_seconds,
        },
        model: Some(model),
    })
}

/// One row of the sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub matthew_degree: Option<f64>,
    pub diverged: bool,
    pub train_seconds: Option<f64>,
}

impl SweepRow {
    fn from_record(r: &RunRecord, record_timing: bool) -> Self {
        SweepRow {
            algorithm: r.algorithm,
            gamma: r.gamma,
            mae: r.eval.as_ref().map(|e| e.mae),
            rmse: r.eval.as_ref().map(|e| e.rmse),
            matthew_degree: r.eval.as_ref().and_then(|e| e.matthew_degree),
            diverged: r.status == RunStatus::Diverged,
            train_seconds: record_timing.then_some(r.train_seconds),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub algorithm: Algorithm,
    /// `None` when every cell diverged.
    pub best_gamma: Option<f64>,
    pub best_mae: Option<f64>,
    pub diverged_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub gammas: Vec<f64>,
    pub algorithms: Vec<BestCell>,
}

impl SweepResult {
    /// Lowest-MAE non-diverged cell per algorithm, earliest gamma on ties.
    pub fn summary(&self, algorithms: &[Algorithm], gammas: &[f64]) -> SweepSummary {
        let best = algorithms
            .iter()
            .map(|&alg| {
                let rows = self.rows.iter().filter(|r| r.algorithm == alg);
                let mut best: Option<(f64, f64)> = None;
                let mut diverged_cells = 0;
                for r in rows {
                    match r.mae {
                        Some(m) if !r.diverged => {
                            if best.is_none_or(|(_, bm)| m < bm) {
                                best = Some((r.gamma, m));
                            }
                        }
                        _ => diverged_cells += 1,
                    }
                }
                BestCell {
                    algorithm: alg,
                    best_gamma: best.map(|b| b.0),
                    best_mae: best.map(|b| b.1),
                    diverged_cells,
                }
            })
            .collect();
        SweepSummary {
            cells: self.rows.len(),
            gammas: gammas.to_vec(),
            algorithms: best,
        }
    }

    pub fn best_for(&self, algorithm: Algorithm) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.algorithm == algorithm && !r.diverged && r.mae.is_some())
            .fold(None, |acc: Option<&SweepRow>, r| match acc {
                Some(a) if a.mae <= r.mae => Some(a),
                _ => Some(r),
            })
    }
}

/// Loads the data once, splits once, then trains and evaluates every
/// configured algorithm on that split.
pub fn run_single(config: &ExperimentConfig) -> Result<Vec<CellOutput>> {
    config.validate()?;
    let data = prepare_data(config)?;
    run_single_on(&data, config)
}

pub fn run_single_on(data: &PreparedData, config: &ExperimentConfig) -> Result<Vec<CellOutput>> {
    config
        .train
        .algorithms
        .iter()
        .map(|&alg| run_cell(data, config, alg, None))
        .collect()
}

/// Every (algorithm, gamma) cell on one shared split. Cells are independent
/// and may run in parallel; rows come back in (algorithm, gamma) order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let data = prepare_data(config)?;
    run_sweep_on(&data, config)
}

pub fn run_sweep_on(data: &PreparedData, config: &ExperimentConfig) -> Result<SweepResult> {
    validate_grid(&config.sweep.gammas)?;
    let cells: Vec<(Algorithm, f64)> = config
        .train
        .algorithms
        .iter()
        .flat_map(|&a| config.sweep.gammas.iter().map(move |&g| (a, g)))
        .collect();
    let run = |&(alg, g): &(Algorithm, f64)| {
        run_cell(data, config, alg, Some(g)).map(|c| SweepRow::from_record(&c.record, config.output.record_timing))
    };
    let rows = if config.sweep.parallel {
        cells.par_iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        cells.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    Ok(SweepResult { rows })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Column order of every CSV report.
pub const CSV_COLUMNS: [&str; 7] = [
    "algorithm",
    "gamma",
    "mae",
    "rmse",
    "matthew_degree",
    "diverged",
    "train_seconds",
];

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.algorithm.name().to_string(),
            r.gamma.to_string(),
            fmt_opt(r.mae),
            fmt_opt(r.rmse),
            fmt_opt(r.matthew_degree),
            r.diverged.to_string(),
            fmt_opt(r.train_seconds),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Validation(e.to_string()))
}

#[derive(Serialize)]
struct SingleReport<'a> {
    schema_version: u32,
    n_train: usize,
    n_test: usize,
    records: Vec<&'a RunRecord>,
}

/// Writes `report.json`, `report.csv` and, when enabled, one
/// `model_<algorithm>.json` per trained model.
pub fn write_single_outputs(dir: &Path, data: &PreparedData, config: &ExperimentConfig, cells: &[CellOutput]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = SingleReport {
        schema_version: 1,
        n_train: data.train.len(),
        n_test: data.test.len(),
        records: cells.iter().map(|c| &c.record).collect(),
    };
    write_file(&dir.join("report.json"), (serde_json::to_string_pretty(&report)? + "\n").as_bytes())?;
    let rows: Vec<SweepRow> = cells
        .iter()
        .map(|c| SweepRow::from_record(&c.record, config.output.record_timing))
        .collect();
    write_file(&dir.join("report.csv"), sweep_csv(&rows)?.as_bytes())?;
    if config.output.save_models {
        for c in cells {
            if let Some(model) = &c.model {
                let snap = ModelSnapshot::new(c.record.algorithm, model.clone(), data.train.encoder().clone(), data.train.scale());
                snap.save(&dir.join(format!("model_{}.json", c.record.algorithm)))?;
            }
        }
    }
    Ok(())
}

/// Writes `sweep.csv` and `sweep_summary.json`.
pub fn write_sweep_outputs(dir: &Path, config: &ExperimentConfig, result: &SweepResult) -> Result<SweepSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("sweep.csv"), sweep_csv(&result.rows)?.as_bytes())?;
    let summary = result.summary(&config.train.algorithms, &config.sweep.gammas);
    write_file(
        &dir.join("sweep_summary.json"),
        (serde_json::to_string_pretty(&summary)? + "\n").as_bytes(),
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(alg: Algorithm, gamma: f64, mae: Option<f64>) -> SweepRow {
        SweepRow {
            algorithm: alg,
            gamma,
            mae,
            rmse: mae,
            matthew_degree: None,
            diverged: mae.is_none(),
            train_seconds: None,
        }
    }

    #[test]
    fn csv_header_and_blank_cells() {
        let csv = sweep_csv(&[row(Algorithm::PowerMat, 0.001, None)]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "algorithm,gamma,mae,rmse,matthew_degree,diverged,train_seconds");
        assert_eq!(lines.next().unwrap(), "powermat,0.001,,,,true,");
    }

    #[test]
    fn summary_picks_lowest_mae_and_counts_divergence() {
        let result = SweepResult {
            rows: vec![
                row(Algorithm::ClassicMf, 0.1, Some(1.3)),
                row(Algorithm::ClassicMf, 0.2, Some(1.1)),
                row(Algorithm::ClassicMf, 0.3, Some(1.1)),
                row(Algorithm::PowerMat, 0.1, None),
                row(Algorithm::PowerMat, 0.2, None),
            ],
        };
        let s = result.summary(&[Algorithm::PowerMat, Algorithm::ClassicMf], &[0.1, 0.2, 0.3]);
        assert_eq!(s.algorithms[0].best_gamma, None);
        assert_eq!(s.algorithms[0].diverged_cells, 2);
        assert_eq!(s.algorithms[1].best_gamma, Some(0.2));
        assert_eq!(s.algorithms[1].best_mae, Some(1.1));
        assert_eq!(result.best_for(Algorithm::ClassicMf).unwrap().gamma, 0.2);
    }
}
