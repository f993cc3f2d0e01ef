//! Numerical kernel: embeddings, prediction rules and single-sample update
//! steps for PowerMat, DotMat and classic matrix factorization.
//!
//! Every function here is pure. Training loops live in [`crate::trainers`].

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latent factor vector of one user or one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Self {
        Embedding(values)
    }

    pub fn zeros(k: usize) -> Self {
        Embedding(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for Embedding {
    fn from(values: Vec<f64>) -> Self {
        Embedding(values)
    }
}

/// Encoded context of one interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextVector(pub Vec<f64>);

impl ContextVector {
    pub fn new(values: Vec<f64>) -> Self {
        ContextVector(values)
    }

    pub fn zeros(d: usize) -> Self {
        ContextVector(vec![0.0; d])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ContextVector {
    fn from(values: Vec<f64>) -> Self {
        ContextVector(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionRule {
    /// `r_max * (u . v)`, context-free.
    #[default]
    Linear,
    /// `r_max * x^(alpha . c + beta * x)` with a clamped base and exponent.
    Power,
}

impl std::fmt::Display for PredictionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PredictionRule::Linear => f.write_str("linear"),
            PredictionRule::Power => f.write_str("power"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// The printed PowerMat update formulas, applied as-is.
    #[default]
    Verbatim,
    /// Gradient descent on the negative log-posterior.
    Derived,
}

impl std::fmt::Display for GradientMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GradientMode::Verbatim => f.write_str("verbatim"),
            GradientMode::Derived => f.write_str("derived"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// SGD step size.
    pub gamma: f64,
    /// Prior scale of user embeddings.
    pub sigma_u: f64,
    /// Prior scale of item embeddings.
    pub sigma_v: f64,
    /// Rating-scale ceiling.
    pub r_max: f64,
    /// Latent dimension.
    pub k: usize,
    /// Lower clamp for dot products used as power bases.
    pub dot_floor: f64,
    /// Magnitude cap for exponents.
    pub exponent_cap: f64,
    pub prediction_rule: PredictionRule,
    pub gradient_mode: GradientMode,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.01,
            sigma_u: 10.0,
            sigma_v: 10.0,
            r_max: 5.0,
            k: 8,
            dot_floor: 1e-6,
            exponent_cap: 50.0,
            prediction_rule: PredictionRule::Linear,
            gradient_mode: GradientMode::Verbatim,
        }
    }
}

impl Hyperparams {
    /// `gamma` may be zero (a no-op step); every other numeric field must be
    /// strictly positive and `dot_floor` below one.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma_u", self.sigma_u),
            ("sigma_v", self.sigma_v),
            ("r_max", self.r_max),
            ("dot_floor", self.dot_floor),
            ("exponent_cap", self.exponent_cap),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be > 0, got {value}")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if self.dot_floor >= 1.0 {
            return Err(Error::Config(format!(
                "dot_floor must be < 1, got {}",
                self.dot_floor
            )));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Learnable state shared by all three algorithms. DotMat and classic MF
/// leave `alpha` and `beta` at their initial values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub users: IndexSet<String>,
    pub items: IndexSet<String>,
    pub user_embeddings: Vec<Embedding>,
    pub item_embeddings: Vec<Embedding>,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub hyper: Hyperparams,
}

impl FactorModel {
    pub fn context_dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_finite(&self) -> bool {
        self.beta.is_finite()
            && self.alpha.iter().all(|a| a.is_finite())
            && self.user_embeddings.iter().all(Embedding::is_finite)
            && self.item_embeddings.iter().all(Embedding::is_finite)
    }

    /// Name of the first non-finite parameter group, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        if !self.user_embeddings.iter().all(Embedding::is_finite) {
            Some("u")
        } else if !self.item_embeddings.iter().all(Embedding::is_finite) {
            Some("v")
        } else if !self.alpha.iter().all(|a| a.is_finite()) {
            Some("alpha")
        } else if !self.beta.is_finite() {
            Some("beta")
        } else {
            None
        }
    }

    /// Raw score for a pair of embeddings under the configured prediction rule.
    pub fn score(&self, u: &Embedding, v: &Embedding, c: &ContextVector) -> Result<f64> {
        match self.hyper.prediction_rule {
            PredictionRule::Linear => predict_linear(u, v, self.hyper.r_max),
            PredictionRule::Power => predict_power(u, v, &self.alpha, c, self.beta, &self.hyper),
        }
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}

fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn dot(u: &Embedding, v: &Embedding) -> Result<f64> {
    check_len(u.len(), v.len())?;
    Ok(dot_slices(&u.0, &v.0))
}

/// `max(u . v, floor)`; always positive for a valid floor.
pub fn clamped_dot(u: &Embedding, v: &Embedding, floor: f64) -> Result<f64> {
    Ok(dot(u, v)?.max(floor))
}

/// `alpha . c`
pub fn context_term(alpha: &[f64], c: &ContextVector) -> Result<f64> {
    check_len(alpha.len(), c.len())?;
    Ok(dot_slices(alpha, &c.0))
}

/// True when a dot product falls below the floor and would be clamped.
pub fn is_clamped(dot: f64, hyper: &Hyperparams) -> bool {
    dot < hyper.dot_floor
}

pub fn predict_linear(u: &Embedding, v: &Embedding, r_max: f64) -> Result<f64> {
    Ok(r_max * dot(u, v)?)
}

/// Exponent of the power rule, `alpha . c + beta * x`, clamped to
/// `[-exponent_cap, exponent_cap]`.
pub fn power_exponent(x: f64, alpha: &[f64], c: &ContextVector, beta: f64, hyper: &Hyperparams) -> Result<f64> {
    let raw = context_term(alpha, c)? + beta * x;
    Ok(raw.clamp(-hyper.exponent_cap, hyper.exponent_cap))
}

pub fn predict_power(
    u: &Embedding,
    v: &Embedding,
    alpha: &[f64],
    c: &ContextVector,
    beta: f64,
    hyper: &Hyperparams,
) -> Result<f64> {
    let x = clamped_dot(u, v, hyper.dot_floor)?;
    let e = power_exponent(x, alpha, c, beta, hyper)?;
    let out = hyper.r_max * x.powf(e);
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NumericOverflow { param: "prediction" })
    }
}

/// Parameters after one PowerMat step.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatUpdate {
    pub u: Embedding,
    pub v: Embedding,
    pub alpha: Vec<f64>,
    pub beta: f64,
}

impl PowerMatUpdate {
    fn checked(self) -> Result<Self> {
        if !self.u.is_finite() {
            return Err(Error::NumericOverflow { param: "u" });
        }
        if !self.v.is_finite() {
            return Err(Error::NumericOverflow { param: "v" });
        }
        if !self.alpha.iter().all(|a| a.is_finite()) {
            return Err(Error::NumericOverflow { param: "alpha" });
        }
        if !self.beta.is_finite() {
            return Err(Error::NumericOverflow { param: "beta" });
        }
        Ok(self)
    }
}

fn check_power_dims(u: &Embedding, v: &Embedding, alpha: &[f64], c: &ContextVector) -> Result<()> {
    check_len(u.len(), v.len())?;
    check_len(alpha.len(), c.len())
}

/// The printed update rules, evaluated from one pre-step snapshot:
///
/// ```text
/// u' = u - γ(β x v + (β x + α·c) v - (2/σ_U) u)
/// v' = v - γ(β x u + (β x + c·α) u - (2/σ_V) v)
/// α' = α - γ x c
/// β' = β - γ x²
/// ```
///
/// with `x = u · v` unclamped. No rating enters the step.
pub fn powermat_step_verbatim(
    u: &Embedding,
    v: &Embedding,
    alpha: &[f64],
    beta: f64,
    c: &ContextVector,
    hyper: &Hyperparams,
) -> Result<PowerMatUpdate> {
    check_power_dims(u, v, alpha, c)?;
    let gamma = hyper.gamma;
    let x = dot_slices(&u.0, &v.0);
    let ac = dot_slices(alpha, &c.0);
    let coeff = beta * x + (beta * x + ac);

    let new_u = u
        .0
        .iter()
        .zip(&v.0)
        .map(|(&ui, &vi)| ui - gamma * (coeff * vi - (2.0 / hyper.sigma_u) * ui))
        .collect();
    let new_v = v
        .0
        .iter()
        .zip(&u.0)
        .map(|(&vi, &ui)| vi - gamma * (coeff * ui - (2.0 / hyper.sigma_v) * vi))
        .collect();
    let new_alpha = alpha
        .iter()
        .zip(&c.0)
        .map(|(&a, &ci)| a - gamma * x * ci)
        .collect();

    PowerMatUpdate {
        u: Embedding(new_u),
        v: Embedding(new_v),
        alpha: new_alpha,
        beta: beta - gamma * x * x,
    }
    .checked()
}

/// Negative log-posterior of the PowerMat model for one event,
///
/// `J = -(α·c + β x) ln x + ||u||²/σ_U² + ||v||²/σ_V²`, `x = max(u·v, floor)`.
pub fn powermat_objective(
    u: &Embedding,
    v: &Embedding,
    alpha: &[f64],
    beta: f64,
    c: &ContextVector,
    hyper: &Hyperparams,
) -> Result<f64> {
    check_power_dims(u, v, alpha, c)?;
    let x = dot_slices(&u.0, &v.0).max(hyper.dot_floor);
    let ac = dot_slices(alpha, &c.0);
    let prior = dot_slices(&u.0, &u.0) / (hyper.sigma_u * hyper.sigma_u)
        + dot_slices(&v.0, &v.0) / (hyper.sigma_v * hyper.sigma_v);
    Ok(-(ac + beta * x) * x.ln() + prior)
}

/// Gradient of [`powermat_objective`] with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerMatGradient {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: f64,
}

pub fn powermat_gradient(
    u: &Embedding,
    v: &Embedding,
    alpha: &[f64],
    beta: f64,
    c: &ContextVector,
    hyper: &Hyperparams,
) -> Result<PowerMatGradient> {
    check_power_dims(u, v, alpha, c)?;
    let raw = dot_slices(&u.0, &v.0);
    let x = raw.max(hyper.dot_floor);
    let ln_x = x.ln();
    let ac = dot_slices(alpha, &c.0);
    // dJ/dx; the floor blocks the path through u . v
    let d_x = if is_clamped(raw, hyper) {
        0.0
    } else {
        -(beta * ln_x + (ac + beta * x) / x)
    };
    let reg_u = 2.0 / (hyper.sigma_u * hyper.sigma_u);
    let reg_v = 2.0 / (hyper.sigma_v * hyper.sigma_v);

    Ok(PowerMatGradient {
        u: u.0.iter().zip(&v.0).map(|(&ui, &vi)| d_x * vi + reg_u * ui).collect(),
        v: v.0.iter().zip(&u.0).map(|(&vi, &ui)| d_x * ui + reg_v * vi).collect(),
        alpha: c.0.iter().map(|&ci| -ln_x * ci).collect(),
        beta: -x * ln_x,
    })
}

/// One gradient-descent step on [`powermat_objective`].
pub fn powermat_step_derived(
    u: &Embedding,
    v: &Embedding,
    alpha: &[f64],
    beta: f64,
    c: &ContextVector,
    hyper: &Hyperparams,
) -> Result<PowerMatUpdate> {
    let grad = powermat_gradient(u, v, alpha, beta, c, hyper)?;
    let gamma = hyper.gamma;
    let step = |p: &[f64], g: &[f64]| -> Vec<f64> {
        p.iter().zip(g).map(|(&pi, &gi)| pi - gamma * gi).collect()
    };
    PowerMatUpdate {
        u: Embedding(step(&u.0, &grad.u)),
        v: Embedding(step(&v.0, &grad.v)),
        alpha: step(alpha, &grad.alpha),
        beta: beta - gamma * grad.beta,
    }
    .checked()
}

/// Dispatches on `hyper.gradient_mode`.
pub fn powermat_step(
    u: &Embedding,
    v: &Embedding,
    alpha: &[f64],
    beta: f64,
    c: &ContextVector,
    hyper: &Hyperparams,
) -> Result<PowerMatUpdate> {
    match hyper.gradient_mode {
        GradientMode::Verbatim => powermat_step_verbatim(u, v, alpha, beta, c, hyper),
        GradientMode::Derived => powermat_step_derived(u, v, alpha, beta, c, hyper),
    }
}

fn check_rating(rating: f64, hyper: &Hyperparams) -> Result<()> {
    if rating.is_finite() && (0.0..=hyper.r_max).contains(&rating) {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "rating {rating} outside [0, {}]",
            hyper.r_max
        )))
    }
}

/// `x^x` with the exponent capped, and its derivative in `x`.
fn self_power(x: f64, cap: f64) -> (f64, f64) {
    if x < cap {
        let p = x.powf(x);
        (p, p * (x.ln() + 1.0))
    } else {
        (x.powf(cap), cap * x.powf(cap - 1.0))
    }
}

/// DotMat loss `|x^x - rating / r_max|` with `x = max(u·v, floor)`.
pub fn dotmat_loss(u: &Embedding, v: &Embedding, rating: f64, hyper: &Hyperparams) -> Result<f64> {
    check_rating(rating, hyper)?;
    let x = clamped_dot(u, v, hyper.dot_floor)?;
    Ok((self_power(x, hyper.exponent_cap).0 - rating / hyper.r_max).abs())
}

/// Subgradient of [`dotmat_loss`] with respect to `u` and `v`; `sign(0) = 0`.
pub fn dotmat_gradient(
    u: &Embedding,
    v: &Embedding,
    rating: f64,
    hyper: &Hyperparams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_rating(rating, hyper)?;
    let raw = dot(u, v)?;
    let x = raw.max(hyper.dot_floor);
    let (p, dp) = self_power(x, hyper.exponent_cap);
    let err = p - rating / hyper.r_max;
    let sign = if err > 0.0 {
        1.0
    } else if err < 0.0 {
        -1.0
    } else {
        0.0
    };
    let d_x = if is_clamped(raw, hyper) { 0.0 } else { sign * dp };
    Ok((
        v.0.iter().map(|&vi| d_x * vi).collect(),
        u.0.iter().map(|&ui| d_x * ui).collect(),
    ))
}

pub fn dotmat_step(
    u: &Embedding,
    v: &Embedding,
    rating: f64,
    hyper: &Hyperparams,
) -> Result<(Embedding, Embedding)> {
    let (gu, gv) = dotmat_gradient(u, v, rating, hyper)?;
    pair_step(u, v, &gu, &gv, hyper.gamma)
}

/// Regularised squared error `½e² + ½(λ_u||u||² + λ_v||v||²)` with
/// `e = u·v - rating / r_max` and `λ = 1/σ²`.
pub fn classic_mf_loss(u: &Embedding, v: &Embedding, rating: f64, hyper: &Hyperparams) -> Result<f64> {
    check_rating(rating, hyper)?;
    let e = dot(u, v)? - rating / hyper.r_max;
    let lu = 1.0 / (hyper.sigma_u * hyper.sigma_u);
    let lv = 1.0 / (hyper.sigma_v * hyper.sigma_v);
    Ok(0.5 * e * e + 0.5 * (lu * dot_slices(&u.0, &u.0) + lv * dot_slices(&v.0, &v.0)))
}

pub fn classic_mf_gradient(
    u: &Embedding,
    v: &Embedding,
    rating: f64,
    hyper: &Hyperparams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_rating(rating, hyper)?;
    let e = dot(u, v)? - rating / hyper.r_max;
    let lu = 1.0 / (hyper.sigma_u * hyper.sigma_u);
    let lv = 1.0 / (hyper.sigma_v * hyper.sigma_v);
    Ok((
        u.0.iter().zip(&v.0).map(|(&ui, &vi)| e * vi + lu * ui).collect(),
        v.0.iter().zip(&u.0).map(|(&vi, &ui)| e * ui + lv * vi).collect(),
    ))
}

pub fn classic_mf_step(
    u: &Embedding,
    v: &Embedding,
    rating: f64,
    hyper: &Hyperparams,
) -> Result<(Embedding, Embedding)> {
    let (gu, gv) = classic_mf_gradient(u, v, rating, hyper)?;
    pair_step(u, v, &gu, &gv, hyper.gamma)
}

fn pair_step(
    u: &Embedding,
    v: &Embedding,
    gu: &[f64],
    gv: &[f64],
    gamma: f64,
) -> Result<(Embedding, Embedding)> {
    let nu = Embedding(u.0.iter().zip(gu).map(|(&p, &g)| p - gamma * g).collect());
    let nv = Embedding(v.0.iter().zip(gv).map(|(&p, &g)| p - gamma * g).collect());
    if !nu.is_finite() {
        return Err(Error::NumericOverflow { param: "u" });
    }
    if !nv.is_finite() {
        return Err(Error::NumericOverflow { param: "v" });
    }
    Ok((nu, nv))
}
