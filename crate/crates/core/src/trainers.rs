//! Epoch-level SGD loops over a [`Dataset`], model initialisation and
//! cold-start aware prediction.

use std::borrow::Cow;
use std::cell::Cell;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{self, ContextVector, Embedding, FactorModel, GradientMode, Hyperparams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "powermat")]
    PowerMat,
    #[serde(rename = "dotmat")]
    DotMat,
    #[serde(rename = "classic_mf")]
    ClassicMf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::PowerMat, Algorithm::DotMat, Algorithm::ClassicMf];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::PowerMat => "powermat",
            Algorithm::DotMat => "dotmat",
            Algorithm::ClassicMf => "classic_mf",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub epochs: usize,
    pub shuffle_seed: u64,
    pub init_seed: u64,
    pub init_scale: f64,
    pub hyper: Hyperparams,
    /// Train PowerMat on a view with the ratings removed.
    pub rating_blind: bool,
}

impl TrainConfig {
    pub fn new(algorithm: Algorithm, hyper: Hyperparams) -> Self {
        TrainConfig {
            algorithm,
            epochs: 20,
            shuffle_seed: 0,
            init_seed: 0,
            init_scale: 1.0,
            hyper,
            rating_blind: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale > 0.0) {
            return Err(Error::Config(format!(
                "init_scale must be > 0, got {}",
                self.init_scale
            )));
        }
        if self.rating_blind && self.algorithm != Algorithm::PowerMat {
            return Err(Error::Config(format!(
                "rating_blind is only valid for powermat; {} needs ratings",
                self.algorithm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub algorithm: Algorithm,
    /// What `loss_trace` measures.
    pub loss_label: String,
    /// Mean per-event loss of each epoch, measured before each step.
    pub loss_trace: Vec<f64>,
    pub user_norm: f64,
    pub item_norm: f64,
    pub alpha_norm: f64,
    pub beta: f64,
    pub steps: u64,
    /// Steps whose dot product fell below `dot_floor`.
    pub floor_clamps: u64,
    /// Reads through the rating accessor of the training view.
    pub rating_reads: u64,
    /// Always 0 on wasm32, which has no monotonic clock.
    pub wall_seconds: f64,
}

/// Snapshot handed to a training observer after every step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub epoch: usize,
    pub step: u64,
    pub beta: f64,
}

/// Training view over a dataset. Ratings are only reachable through
/// [`SampleView::rating`], which counts its calls; a rating-blind view holds
/// no ratings at all.
struct SampleView {
    users: Vec<usize>,
    items: Vec<usize>,
    contexts: Vec<ContextVector>,
    ratings: Option<Vec<f64>>,
    rating_reads: Cell<u64>,
}

impl SampleView {
    fn new(dataset: &Dataset, with_ratings: bool) -> Result<Self> {
        let n = dataset.len();
        Ok(SampleView {
            users: (0..n).map(|i| dataset.user_of(i)).collect(),
            items: (0..n).map(|i| dataset.item_of(i)).collect(),
            contexts: dataset.encode_all()?,
            ratings: with_ratings.then(|| dataset.events().iter().map(|e| e.rating).collect()),
            rating_reads: Cell::new(0),
        })
    }

    fn len(&self) -> usize {
        self.users.len()
    }

    fn rating(&self, i: usize) -> Result<f64> {
        self.rating_reads.set(self.rating_reads.get() + 1);
        self.ratings
            .as_ref()
            .map(|r| r[i])
            .ok_or_else(|| Error::Validation("rating read on a rating-blind view".into()))
    }
}

#[cfg(not(target_arch = "wasm32"))]
fn stopwatch() -> impl FnOnce() -> f64 {
    let started = std::time::Instant::now();
    move || started.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
fn stopwatch() -> impl FnOnce() -> f64 {
    || 0.0
}

/// Uniform-positive initialisation: every entry in `(0, init_scale / sqrt(k)]`,
/// users drawn before items; `alpha = 0`, `beta = 0`.
pub fn init_model(dataset: &Dataset, config: &TrainConfig) -> Result<FactorModel> {
    if dataset.is_empty() {
        return Err(Error::Validation("cannot initialise a model on an empty dataset".into()));
    }
    let k = config.hyper.k;
    let bound = config.init_scale / (k as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
    let mut draw = |n: usize| -> Vec<Embedding> {
        (0..n)
            .map(|_| Embedding((0..k).map(|_| (1.0 - rng.random::<f64>()) * bound).collect()))
            .collect()
    };
    let user_embeddings = draw(dataset.n_users());
    let item_embeddings = draw(dataset.n_items());
    Ok(FactorModel {
        users: dataset.users().clone(),
        items: dataset.items().clone(),
        user_embeddings,
        item_embeddings,
        alpha: vec![0.0; dataset.encoder().dim()],
        beta: 0.0,
        hyper: config.hyper.clone(),
    })
}

pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(FactorModel, TrainReport)> {
    train_observed(dataset, config, |_| {})
}

/// [`train`] with a callback after every step.
pub fn train_observed<F>(dataset: &Dataset, config: &TrainConfig, mut observer: F) -> Result<(FactorModel, TrainReport)>
where
    F: FnMut(&StepInfo),
{
    config.validate()?;
    let elapsed = stopwatch();
    let mut model = init_model(dataset, config)?;
    let hyper = &config.hyper;
    let with_ratings = !(config.algorithm == Algorithm::PowerMat && config.rating_blind);
    let view = SampleView::new(dataset, with_ratings)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.shuffle_seed);
    let mut order: Vec<usize> = (0..view.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);
    let mut steps = 0u64;
    let mut floor_clamps = 0u64;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for &i in &order {
            let (ui, vi) = (view.users[i], view.items[i]);
            let diverged = |param| Error::Diverged {
                epoch,
                step: steps as usize,
                param,
            };
            let lift = |e: Error| match e {
                Error::NumericOverflow { param } => diverged(param),
                other => other,
            };
            let u = &model.user_embeddings[ui];
            let v = &model.item_embeddings[vi];
            if kernel::is_clamped(kernel::dot(u, v)?, hyper) {
                floor_clamps += 1;
            }

            let loss = match config.algorithm {
                Algorithm::PowerMat => {
                    let c = &view.contexts[i];
                    let loss = kernel::powermat_objective(u, v, &model.alpha, model.beta, c, hyper)?;
                    let up = kernel::powermat_step(u, v, &model.alpha, model.beta, c, hyper).map_err(lift)?;
                    model.user_embeddings[ui] = up.u;
                    model.item_embeddings[vi] = up.v;
                    model.alpha = up.alpha;
                    model.beta = up.beta;
                    loss
                }
                Algorithm::DotMat => {
                    let r = view.rating(i)?;
                    let loss = kernel::dotmat_loss(u, v, r, hyper)?;
                    let (nu, nv) = kernel::dotmat_step(u, v, r, hyper).map_err(lift)?;
                    model.user_embeddings[ui] = nu;
                    model.item_embeddings[vi] = nv;
                    loss
                }
                Algorithm::ClassicMf => {
                    let r = view.rating(i)?;
                    let e = kernel::dot(u, v)? - r / hyper.r_max;
                    let (nu, nv) = kernel::classic_mf_step(u, v, r, hyper).map_err(lift)?;
                    model.user_embeddings[ui] = nu;
                    model.item_embeddings[vi] = nv;
                    e * e
                }
            };
            if !loss.is_finite() {
                return Err(diverged("loss"));
            }
            loss_sum += loss;
            steps += 1;
            observer(&StepInfo {
                epoch,
                step: steps,
                beta: model.beta,
            });
        }
        if let Some(param) = model.first_non_finite() {
            return Err(Error::Diverged {
                epoch,
                step: steps as usize,
                param,
            });
        }
        loss_trace.push(loss_sum / view.len() as f64);
    }

    let frobenius = |embs: &[Embedding]| embs.iter().map(|e| e.norm().powi(2)).sum::<f64>().sqrt();
    let loss_label = match (config.algorithm, hyper.gradient_mode) {
        (Algorithm::PowerMat, GradientMode::Verbatim) => "powermat negative log-posterior (monitor only)",
        (Algorithm::PowerMat, GradientMode::Derived) => "powermat negative log-posterior",
        (Algorithm::DotMat, _) => "dotmat absolute error",
        (Algorithm::ClassicMf, _) => "squared error (normalised scale)",
    };
    let report = TrainReport {
        algorithm: config.algorithm,
        loss_label: loss_label.to_string(),
        loss_trace,
        user_norm: frobenius(&model.user_embeddings),
        item_norm: frobenius(&model.item_embeddings),
        alpha_norm: model.alpha.iter().map(|a| a * a).sum::<f64>().sqrt(),
        beta: model.beta,
        steps,
        floor_clamps,
        rating_reads: view.rating_reads.get(),
        wall_seconds: elapsed(),
    };
    Ok((model, report))
}

fn mean_embedding(embs: &[Embedding], k: usize) -> Embedding {
    let mut out = vec![0.0; k];
    for e in embs {
        for (o, x) in out.iter_mut().zip(&e.0) {
            *o += x;
        }
    }
    let n = embs.len().max(1) as f64;
    Embedding(out.into_iter().map(|x| x / n).collect())
}

/// Embedding of `user_id`, or the mean trained user embedding when the user
/// was not seen in training.
pub fn user_vector<'a>(model: &'a FactorModel, user_id: &str) -> Cow<'a, Embedding> {
    match model.users.get_index_of(user_id) {
        Some(i) => Cow::Borrowed(&model.user_embeddings[i]),
        None => Cow::Owned(mean_embedding(&model.user_embeddings, model.hyper.k)),
    }
}

/// Item counterpart of [`user_vector`].
pub fn item_vector<'a>(model: &'a FactorModel, item_id: &str) -> Cow<'a, Embedding> {
    match model.items.get_index_of(item_id) {
        Some(i) => Cow::Borrowed(&model.item_embeddings[i]),
        None => Cow::Owned(mean_embedding(&model.item_embeddings, model.hyper.k)),
    }
}

/// Raw (unclipped) prediction. Unknown users and items fall back to the mean
/// trained embedding; the linear rule ignores `context`, the power rule uses it.
pub fn predict(model: &FactorModel, user_id: &str, item_id: &str, context: &ContextVector) -> Result<f64> {
    if context.len() != model.context_dim() {
        return Err(Error::Dimension {
            expected: model.context_dim(),
            actual: context.len(),
        });
    }
    let u = user_vector(model, user_id);
    let v = item_vector(model, item_id);
    model.score(&u, &v, context)
}
