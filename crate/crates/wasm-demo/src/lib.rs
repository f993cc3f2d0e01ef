//! Browser bindings for the demo page in `www/`. Each export returns a JSON
//! string; the plain Rust functions behind them are tested natively.

use powermat_core::data::{split, synth_generate, RatingScale, SynthSpec};
use powermat_core::kernel::{predict_power, ContextVector, Embedding, Hyperparams};
use powermat_core::metrics::{evaluate, zipf_slope, EvalOptions};
use powermat_core::trainers::{train_observed, Algorithm, TrainConfig};
use powermat_core::Result;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub power: Vec<f64>,
    pub linear: Vec<f64>,
}

/// Power-rule prediction `r_max * x^clamp(ac + beta*x)` against the linear
/// rule `r_max * x`, for `x` evenly spaced over (0, 1].
pub fn power_curve(alpha_c: f64, beta: f64, cap: f64, points: usize) -> Result<Curve> {
    let hyper = Hyperparams { k: 1, exponent_cap: cap, ..Hyperparams::default() };
    hyper.validate()?;
    let n = points.clamp(2, 2000);
    let c = ContextVector(vec![1.0]);
    let one = Embedding(vec![1.0]);
    let mut out = Curve { x: Vec::with_capacity(n), power: Vec::with_capacity(n), linear: Vec::with_capacity(n) };
    for i in 1..=n {
        let x = i as f64 / n as f64;
        out.power.push(predict_power(&Embedding(vec![x]), &one, &[alpha_c], &c, beta, &hyper)?);
        out.linear.push(hyper.r_max * x);
        out.x.push(x);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct Trace {
    pub algorithm: String,
    pub loss_label: Option<String>,
    /// Mean training loss per epoch.
    pub loss: Vec<f64>,
    /// `beta` at the end of each epoch; constant 0 outside powermat.
    pub beta: Vec<f64>,
    pub test_mae: Option<f64>,
    pub error: Option<String>,
}

fn demo_data(seed: u64) -> Result<powermat_core::data::Dataset> {
    let spec = SynthSpec { n_users: 60, n_items: 150, n_events: 1200, seed, ..SynthSpec::default() };
    synth_generate(&spec, RatingScale::default())
}

/// Trains one algorithm on a small synthetic CoMoDa-shaped dataset. A
/// divergent run still returns the per-epoch beta values seen so far.
pub fn training_trace(algorithm: &str, gamma: f64, epochs: usize, seed: u64) -> Result<Trace> {
    let algorithm: Algorithm = algorithm.parse()?;
    let data = demo_data(seed)?;
    let (train_set, test_set) = split(&data, 0.2, seed)?;
    let hyper = Hyperparams { gamma, ..Hyperparams::default() };
    let cfg = TrainConfig { epochs: epochs.clamp(1, 200), init_seed: seed, shuffle_seed: seed, ..TrainConfig::new(algorithm, hyper) };

    let mut beta = Vec::new();
    let result = train_observed(&train_set, &cfg, |s| {
        if beta.len() <= s.epoch {
            beta.push(s.beta);
        } else {
            beta[s.epoch] = s.beta;
        }
    });
    let mut trace = Trace { algorithm: algorithm.name().into(), loss_label: None, loss: Vec::new(), beta, test_mae: None, error: None };
    match result {
        Ok((model, report)) => {
            trace.loss_label = Some(report.loss_label);
            trace.loss = report.loss_trace;
            match evaluate(&model, algorithm, &train_set, &test_set, &EvalOptions::default()) {
                Ok(ev) => trace.test_mae = Some(ev.mae),
                Err(e) => trace.error = Some(e.to_string()),
            }
        }
        Err(e) if e.is_divergence() => trace.error = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(trace)
}

#[derive(Debug, Serialize)]
pub struct ZipfFit {
    /// Item counts sorted descending, zeros dropped.
    pub counts: Vec<f64>,
    pub slope: f64,
}

/// Samples item popularity the way the synthetic generator does and fits
/// the rank-frequency slope.
pub fn zipf_fit(n_items: usize, n_events: usize, exponent: f64, seed: u64) -> Result<ZipfFit> {
    let spec = SynthSpec {
        n_users: 1,
        n_items: n_items.clamp(2, 5000),
        n_events: n_events.clamp(1, 200_000),
        zipf_exponent: exponent,
        context_columns: vec![1],
        seed,
    };
    let ds = synth_generate(&spec, RatingScale::default())?;
    let mut counts: Vec<f64> = ds.item_counts().into_iter().map(|c| c as f64).filter(|&c| c > 0.0).collect();
    counts.sort_by(|a, b| b.total_cmp(a));
    let slope = zipf_slope(&counts)?;
    Ok(ZipfFit { counts, slope })
}

fn to_js<T: Serialize>(r: Result<T>) -> Result<String, JsError> {
    let value = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = powerCurve)]
pub fn power_curve_js(alpha_c: f64, beta: f64, cap: f64, points: usize) -> Result<String, JsError> {
    to_js(power_curve(alpha_c, beta, cap, points))
}

#[wasm_bindgen(js_name = trainingTrace)]
pub fn training_trace_js(algorithm: &str, gamma: f64, epochs: usize, seed: u64) -> Result<String, JsError> {
    to_js(training_trace(algorithm, gamma, epochs, seed))
}

#[wasm_bindgen(js_name = zipfFit)]
pub fn zipf_fit_js(n_items: usize, n_events: usize, exponent: f64, seed: u64) -> Result<String, JsError> {
    to_js(zipf_fit(n_items, n_events, exponent, seed))
}
