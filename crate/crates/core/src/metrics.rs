//! Accuracy and popularity-bias measurement.
//!
//! The Degree of Matthew Effect is measured as a difference of log-log
//! rank-frequency slopes: `zipf_slope(recommendation counts) -
//! zipf_slope(training counts)`. Negative values mean the recommendation
//! lists concentrate on popular items more than the data does; zero means
//! they mirror it.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RatingScale};
use crate::error::{Error, FitSide, Result};
use crate::kernel::{ContextVector, FactorModel, PredictionRule};
use crate::trainers::{self, Algorithm};

fn check_pairs(predictions: &[f64], truths: &[f64]) -> Result<()> {
    if predictions.len() != truths.len() {
        return Err(Error::Dimension {
            expected: truths.len(),
            actual: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::Validation("empty prediction set".into()));
    }
    Ok(())
}

pub fn mae(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_pairs(predictions, truths)?;
    let sum: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / predictions.len() as f64)
}

pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_pairs(predictions, truths)?;
    let sum: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sum / predictions.len() as f64).sqrt())
}

/// Clips into the rating scale, returning how many values were moved.
pub fn clip_predictions(predictions: &mut [f64], scale: RatingScale) -> usize {
    let mut clipped = 0;
    for p in predictions.iter_mut() {
        let c = scale.clip(*p);
        if c != *p {
            clipped += 1;
            *p = c;
        }
    }
    clipped
}

/// Least-squares slope of `ln(count)` against `ln(rank)`, counts sorted
/// descending with zeros dropped and ranks starting at 1.
pub fn zipf_slope(counts: &[f64]) -> Result<f64> {
    let mut positive: Vec<f64> = counts.iter().copied().filter(|&c| c > 0.0).collect();
    if positive.len() < 2 {
        return Err(Error::UndefinedFit);
    }
    positive.sort_by(|a, b| b.total_cmp(a));
    let n = positive.len() as f64;
    let xs: Vec<f64> = (1..=positive.len()).map(|r| (r as f64).ln()).collect();
    let ys: Vec<f64> = positive.iter().map(|c| c.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    Ok(sxy / sxx)
}

/// Top-K lists keyed by user id; entries are model item indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopKLists {
    pub lists: BTreeMap<String, Vec<usize>>,
    /// Users with no candidate item left after exclusions.
    pub flagged: Vec<String>,
}

/// Context used when scoring recommendation candidates.
#[derive(Debug, Clone, PartialEq)]
pub enum ContextSource {
    /// The context of the user's last event in the context pool; zeros if
    /// the user has none.
    PerUserLast,
    Fixed(ContextVector),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextSourceKind {
    #[default]
    PerUserLast,
    Zeros,
}

/// Highest-scoring `k_rec` items per user, ties broken by ascending item
/// index. Items the user has in `train` are excluded.
pub fn top_k_lists(
    model: &FactorModel,
    train: &Dataset,
    context_pool: &Dataset,
    users: &[String],
    k_rec: usize,
    source: &ContextSource,
) -> Result<TopKLists> {
    let n_items = model.items.len();
    if k_rec == 0 || k_rec > n_items {
        return Err(Error::Config(format!("k_rec must be in 1..={n_items}, got {k_rec}")));
    }
    let mut seen: BTreeMap<&str, HashSet<usize>> = BTreeMap::new();
    for ev in train.events() {
        if let Some(item) = model.items.get_index_of(&ev.item_id) {
            seen.entry(ev.user_id.as_str()).or_default().insert(item);
        }
    }
    let mut last_context: BTreeMap<&str, usize> = BTreeMap::new();
    if matches!(source, ContextSource::PerUserLast) {
        for (i, ev) in context_pool.events().iter().enumerate() {
            last_context.insert(ev.user_id.as_str(), i);
        }
    }

    let mut out = TopKLists::default();
    let empty = HashSet::new();
    for user in users {
        let context = match source {
            ContextSource::Fixed(c) => c.clone(),
            ContextSource::PerUserLast => match last_context.get(user.as_str()) {
                Some(&i) => context_pool.encode(i)?,
                None => ContextVector::zeros(model.context_dim()),
            },
        };
        let excluded = seen.get(user.as_str()).unwrap_or(&empty);
        let u = trainers::user_vector(model, user);
        let mut scored = Vec::with_capacity(n_items);
        for (item, v) in model.item_embeddings.iter().enumerate() {
            if !excluded.contains(&item) {
                scored.push((model.score(&u, v, &context)?, item));
            }
        }
        if scored.is_empty() {
            out.flagged.push(user.clone());
            out.lists.insert(user.clone(), Vec::new());
            continue;
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        out.lists
            .insert(user.clone(), scored.into_iter().take(k_rec).map(|(_, i)| i).collect());
    }
    Ok(out)
}

/// `zipf_slope(recommendation counts) - zipf_slope(training counts)`.
/// `train_item_counts` is indexed by the same item indices as the lists.
pub fn matthew_degree(rec_lists: &BTreeMap<String, Vec<usize>>, train_item_counts: &[f64]) -> Result<f64> {
    if rec_lists.is_empty() {
        return Err(Error::Validation("no recommendation lists".into()));
    }
    let mut rec_counts = vec![0.0; train_item_counts.len()];
    for &item in rec_lists.values().flatten() {
        if item >= rec_counts.len() {
            rec_counts.resize(item + 1, 0.0);
        }
        rec_counts[item] += 1.0;
    }
    let s_rec = zipf_slope(&rec_counts).map_err(|_| Error::UndefinedFitSide(FitSide::Recommendations))?;
    let s_data = zipf_slope(train_item_counts).map_err(|_| Error::UndefinedFitSide(FitSide::TrainingData))?;
    Ok(s_rec - s_data)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub algorithm: Algorithm,
    pub prediction_rule: PredictionRule,
    pub gamma: f64,
    pub mae: f64,
    pub rmse: f64,
    /// `None` when either rank-frequency fit is undefined.
    pub matthew_degree: Option<f64>,
    pub n_test: usize,
    pub clip_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub k_rec: usize,
    pub context_source: ContextSourceKind,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            k_rec: 10,
            context_source: ContextSourceKind::PerUserLast,
        }
    }
}

/// Scores `model` on `test`: clipped MAE/RMSE over every test event and the
/// Matthew degree of top-K lists for every test user.
pub fn evaluate(
    model: &FactorModel,
    algorithm: Algorithm,
    train: &Dataset,
    test: &Dataset,
    options: &EvalOptions,
) -> Result<EvalReport> {
    let mut predictions = Vec::with_capacity(test.len());
    let mut truths = Vec::with_capacity(test.len());
    for (i, ev) in test.events().iter().enumerate() {
        let c = test.encode(i)?;
        predictions.push(trainers::predict(model, &ev.user_id, &ev.item_id, &c)?);
        truths.push(ev.rating);
    }
    if let Some(pos) = predictions.iter().position(|p| !p.is_finite()) {
        return Err(Error::Validation(format!("non-finite prediction for test event {pos}")));
    }
    let clip_count = clip_predictions(&mut predictions, test.scale());

    let users: Vec<String> = test.users().iter().cloned().collect();
    let source = match options.context_source {
        ContextSourceKind::PerUserLast => ContextSource::PerUserLast,
        ContextSourceKind::Zeros => ContextSource::Fixed(ContextVector::zeros(model.context_dim())),
    };
    let k_rec = options.k_rec.min(model.items.len());
    let lists = top_k_lists(model, train, test, &users, k_rec, &source)?;
    let train_counts: Vec<f64> = train.item_counts().into_iter().map(|c| c as f64).collect();
    let matthew = matthew_degree(&lists.lists, &train_counts).ok();

    Ok(EvalReport {
        algorithm,
        prediction_rule: model.hyper.prediction_rule,
        gamma: model.hyper.gamma,
        mae: mae(&predictions, &truths)?,
        rmse: rmse(&predictions, &truths)?,
        matthew_degree: matthew,
        n_test: test.len(),
        clip_count,
    })
}
