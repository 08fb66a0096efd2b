//! Planted-bias simulation for a single logistic unit.
//!
//! The model is `ŷ = σ(W·x + γ·z + b)` with gender attribute `z ∈ {+1, −1}`
//! (`+1` male) trained by gradient descent on cross-entropy. The generator
//! draws `x` independently of `(y, z)` and plants only the conditional rates
//! `P(y = 1 | z = ±1)`, so any gender preference the model learns has to show
//! up in `γ`. At the optimum `σ(b ± γ)` equals the two conditional rates,
//! which gives `γ* = (logit p₊ − logit p₋) / 2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Predictions are clamped to `[EPS, 1 − EPS]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training data is empty")]
    EmptyData,
    #[error("sample {index} has {found} features, expected {expected}")]
    FeatureMismatch {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("mean loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureDistribution {
    #[default]
    StandardNormal,
}

/// Population generator parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_features: usize,
    /// `P(y = 1 | z = +1)`.
    pub p_pos_given_male: f64,
    /// `P(y = 1 | z = −1)`.
    pub p_pos_given_female: f64,
    pub male_fraction: f64,
    pub n_samples: usize,
    #[serde(default)]
    pub feature_distribution: FeatureDistribution,
    pub seed: u64,
    /// When set, `x` is shifted by this amount along every axis for `y = 1`,
    /// making the features informative. Off by default.
    #[serde(default)]
    pub informative_shift: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_features: 4,
            p_pos_given_male: 0.8,
            p_pos_given_female: 0.4,
            male_fraction: 0.5,
            n_samples: 100_000,
            feature_distribution: FeatureDistribution::StandardNormal,
            seed: 0,
            informative_shift: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let open_unit = |name: &str, p: f64| {
            if p > 0.0 && p < 1.0 {
                Ok(())
            } else {
                Err(SimError::Config(format!(
                    "{name} must be in (0, 1), got {p}"
                )))
            }
        };
        open_unit("p_pos_given_male", self.p_pos_given_male)?;
        open_unit("p_pos_given_female", self.p_pos_given_female)?;
        open_unit("male_fraction", self.male_fraction)?;
        if self.n_samples == 0 {
            return Err(SimError::Config("n_samples must be at least 1".into()));
        }
        if let Some(s) = self.informative_shift {
            if !s.is_finite() {
                return Err(SimError::Config("informative_shift must be finite".into()));
            }
        }
        Ok(())
    }

    /// Closed-form optimum `(γ*, b*)` for independent features.
    pub fn optimum(&self) -> (f64, f64) {
        closed_form_optimum(self.p_pos_given_male, self.p_pos_given_female)
    }
}

/// `(γ*, b*)` solving `σ(b + γ) = p_male`, `σ(b − γ) = p_female`.
pub fn closed_form_optimum(p_male: f64, p_female: f64) -> (f64, f64) {
    let (lm, lf) = (logit(p_male), logit(p_female));
    ((lm - lf) / 2.0, (lm + lf) / 2.0)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    /// `+1` male, `−1` female.
    pub z: i8,
    pub y: u8,
}

impl Sample {
    pub fn new(x: Vec<f64>, z: i8, y: u8) -> Self {
        assert!(z == 1 || z == -1, "z must be +1 or -1");
        assert!(y <= 1, "y must be 0 or 1");
        Self { x, z, y }
    }
}

/// Draw a population.
pub fn generate(config: &SimConfig) -> Result<Vec<Sample>, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let samples = (0..config.n_samples)
        .map(|_| {
            let z: i8 = if rng.random_bool(config.male_fraction) {
                1
            } else {
                -1
            };
            let p = if z == 1 {
                config.p_pos_given_male
            } else {
                config.p_pos_given_female
            };
            let y = u8::from(rng.random_bool(p));
            let shift = match config.informative_shift {
                Some(s) if y == 1 => s,
                _ => 0.0,
            };
            let x = (0..config.n_features)
                .map(|_| match config.feature_distribution {
                    FeatureDistribution::StandardNormal => {
                        rng.sample::<f64, _>(StandardNormal) + shift
                    }
                })
                .collect();
            Sample { x, z, y }
        })
        .collect();
    Ok(samples)
}

/// Empirical `(P(y=1 | z=+1), P(y=1 | z=−1))`; `NaN` for an empty group.
pub fn conditional_rates(data: &[Sample]) -> (f64, f64) {
    let rate = |z: i8| {
        let (n, pos) = data
            .iter()
            .filter(|s| s.z == z)
            .fold((0usize, 0usize), |(n, pos), s| (n + 1, pos + s.y as usize));
        pos as f64 / n as f64
    };
    (rate(1), rate(-1))
}

/// Logistic sigmoid, evaluated without overflow for large `|t|`.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `θ = {W, γ, b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub weights: Vec<f64>,
    pub gamma: f64,
    pub bias: f64,
}

impl LogisticParams {
    pub fn zeros(n_features: usize) -> Self {
        Self {
            weights: vec![0.0; n_features],
            gamma: 0.0,
            bias: 0.0,
        }
    }

    pub fn logit(&self, x: &[f64], z: i8) -> f64 {
        let wx: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum();
        wx + self.gamma * f64::from(z) + self.bias
    }

    pub fn predict(&self, x: &[f64], z: i8) -> f64 {
        sigmoid(self.logit(x, z))
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.gamma.is_finite()
            && self.bias.is_finite()
            && self.weights.iter().all(|w| w.is_finite())
    }
}

/// Cross-entropy of one sample.
pub fn loss(params: &LogisticParams, sample: &Sample) -> f64 {
    loss_from_logit(params.logit(&sample.x, sample.z), sample.y)
}

/// `−(y log ŷ + (1 − y) log(1 − ŷ))` with `ŷ` clamped to
/// `[PROB_CLAMP, 1 − PROB_CLAMP]`.
pub fn loss_from_prediction(y_hat: f64, y: u8) -> f64 {
    let p = y_hat.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let y = f64::from(y);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Same value as [`loss_from_prediction`] at `ŷ = σ(t)`, computed as
/// `softplus(t) − y·t` so it stays accurate when `ŷ` is close to 0 or 1.
/// The result is held to the range the prediction clamp allows.
pub fn loss_from_logit(t: f64, y: u8) -> f64 {
    let softplus = t.max(0.0) + (-t.abs()).exp().ln_1p();
    let raw = softplus - f64::from(y) * t;
    raw.clamp(-(-PROB_CLAMP).ln_1p(), -PROB_CLAMP.ln())
}

/// `∂ŷ/∂γ = ŷ(1 − ŷ)z`.
pub fn prediction_grad_gamma(params: &LogisticParams, sample: &Sample) -> f64 {
    let y_hat = params.predict(&sample.x, sample.z);
    y_hat * (1.0 - y_hat) * f64::from(sample.z)
}

/// `∂L/∂γ = (ŷ − y)z`.
pub fn grad_gamma(params: &LogisticParams, sample: &Sample) -> f64 {
    residual(params, sample) * f64::from(sample.z)
}

/// `∂L/∂b = ŷ − y`.
pub fn grad_bias(params: &LogisticParams, sample: &Sample) -> f64 {
    residual(params, sample)
}

/// `∂L/∂W = (ŷ − y)x`.
pub fn grad_weights(params: &LogisticParams, sample: &Sample) -> Vec<f64> {
    let r = residual(params, sample);
    sample.x.iter().map(|v| r * v).collect()
}

fn residual(params: &LogisticParams, sample: &Sample) -> f64 {
    params.predict(&sample.x, sample.z) - f64::from(sample.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Batch {
    Full,
    Size(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch: Batch,
    /// Shuffling seed for mini-batch mode.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            epochs: 200,
            batch: Batch::Full,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub params: LogisticParams,
    /// Mean loss at the start of each epoch.
    pub loss_trace: Vec<f64>,
    /// Mean loss of the returned parameters.
    pub final_loss: f64,
    pub epochs: usize,
}

/// Gradient descent from zero initialization.
pub fn train(data: &[Sample], config: &TrainConfig) -> Result<TrainOutcome, SimError> {
    let Some(first) = data.first() else {
        return Err(SimError::EmptyData);
    };
    let d = first.x.len();
    if let Some((index, s)) = data.iter().enumerate().find(|(_, s)| s.x.len() != d) {
        return Err(SimError::FeatureMismatch {
            index,
            found: s.x.len(),
            expected: d,
        });
    }
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(SimError::Config(format!(
            "learning rate must be positive, got {}",
            config.learning_rate
        )));
    }
    if config.batch == Batch::Size(0) {
        return Err(SimError::Config("batch size must be at least 1".into()));
    }

    let mut params = LogisticParams::zeros(d);
    let mut trace = Vec::with_capacity(config.epochs);
    let mut grad = Gradient::new(d);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    for epoch in 0..config.epochs {
        match config.batch {
            Batch::Full => {
                grad.clear();
                let total_loss = grad.accumulate(&params, data.iter());
                let mean_loss = total_loss / data.len() as f64;
                if !mean_loss.is_finite() {
                    return Err(SimError::Divergence { epoch });
                }
                trace.push(mean_loss);
                grad.step(&mut params, config.learning_rate, data.len());
                if !params.is_finite() {
                    return Err(SimError::Divergence { epoch });
                }
            }
            Batch::Size(size) => {
                trace.push(mean_loss(&params, data));
                shuffle(&mut order, &mut rng);
                for chunk in order.chunks(size) {
                    grad.clear();
                    grad.accumulate(&params, chunk.iter().map(|&i| &data[i]));
                    grad.step(&mut params, config.learning_rate, chunk.len());
                }
                if !trace[epoch].is_finite() || !params.is_finite() {
                    return Err(SimError::Divergence { epoch });
                }
            }
        }
    }
    let final_loss = mean_loss(&params, data);
    if !final_loss.is_finite() || !params.is_finite() {
        return Err(SimError::Divergence {
            epoch: config.epochs,
        });
    }
    Ok(TrainOutcome {
        params,
        loss_trace: trace,
        final_loss,
        epochs: config.epochs,
    })
}

fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

pub fn mean_loss(params: &LogisticParams, data: &[Sample]) -> f64 {
    data.iter().map(|s| loss(params, s)).sum::<f64>() / data.len() as f64
}

struct Gradient {
    weights: Vec<f64>,
    gamma: f64,
    bias: f64,
}

impl Gradient {
    fn new(d: usize) -> Self {
        Self {
            weights: vec![0.0; d],
            gamma: 0.0,
            bias: 0.0,
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = 0.0);
        self.gamma = 0.0;
        self.bias = 0.0;
    }

    /// Adds summed gradients over `samples`, returning their summed loss.
    fn accumulate<'a>(
        &mut self,
        params: &LogisticParams,
        samples: impl Iterator<Item = &'a Sample>,
    ) -> f64 {
        let mut total = 0.0;
        for s in samples {
            let t = params.logit(&s.x, s.z);
            let y_hat = sigmoid(t);
            total += loss_from_logit(t, s.y);
            let r = y_hat - f64::from(s.y);
            for (g, v) in self.weights.iter_mut().zip(&s.x) {
                *g += r * v;
            }
            self.gamma += r * f64::from(s.z);
            self.bias += r;
        }
        total
    }

    fn step(&self, params: &mut LogisticParams, lr: f64, n: usize) {
        let scale = lr / n as f64;
        for (w, g) in params.weights.iter_mut().zip(&self.weights) {
            *w -= scale * g;
        }
        params.gamma -= scale * self.gamma;
        params.bias -= scale * self.bias;
    }
}

/// `(ŷ(z = +1), ŷ(z = −1))` for the same features.
pub fn predict_pair(params: &LogisticParams, x: &[f64]) -> (f64, f64) {
    (params.predict(x, 1), params.predict(x, -1))
}

/// Hiring decision of an employer who estimates expected productivity from
/// past hires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmployerDecision {
    pub hire: bool,
    pub expected_productivity: f64,
}

/// Hire iff the Beta-smoothed mean outcome of past samples with the
/// candidate's gender reaches `threshold`. Features are ignored: under the
/// independent-feature generator they carry no information about `y`.
pub fn employer_decide(history: &[Sample], z: i8, threshold: f64, alpha: f64) -> EmployerDecision {
    let (n, pos) = history
        .iter()
        .filter(|s| s.z == z)
        .fold((0usize, 0usize), |(n, pos), s| (n + 1, pos + s.y as usize));
    let expected_productivity = (pos as f64 + alpha) / (n as f64 + 2.0 * alpha);
    EmployerDecision {
        hire: expected_productivity >= threshold,
        expected_productivity,
    }
}

/// One row of a multi-seed sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub p_pos_given_male: f64,
    pub p_pos_given_female: f64,
    pub weight_norm: f64,
    pub gamma: f64,
    pub bias: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

/// Generate and train once per seed. Runs are independent and executed in
/// parallel; rows come back in seed order.
pub fn sweep(
    base: &SimConfig,
    seeds: &[u64],
    train_config: &TrainConfig,
) -> Result<Vec<SweepRow>, SimError> {
    use rayon::prelude::*;
    seeds
        .par_iter()
        .map(|&seed| {
            let config = SimConfig {
                seed,
                ..base.clone()
            };
            let data = generate(&config)?;
            let out = train(&data, train_config)?;
            Ok(SweepRow {
                seed,
                p_pos_given_male: config.p_pos_given_male,
                p_pos_given_female: config.p_pos_given_female,
                weight_norm: out.params.weight_norm(),
                gamma: out.params.gamma,
                bias: out.params.bias,
                final_loss: out.final_loss,
                epochs: out.epochs,
            })
        })
        .collect()
}

/// Render sweep rows as CSV with a header.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "seed",
        "p_pos_given_male",
        "p_pos_given_female",
        "weight_norm",
        "gamma",
        "bias",
        "final_loss",
        "epochs",
    ])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            crate::embedding::format_f64(r.p_pos_given_male),
            crate::embedding::format_f64(r.p_pos_given_female),
            crate::embedding::format_f64(r.weight_norm),
            crate::embedding::format_f64(r.gamma),
            crate::embedding::format_f64(r.bias),
            crate::embedding::format_f64(r.final_loss),
            r.epochs.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Agreement between the trained model and the employer rule on a set of
/// held-out candidates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub candidates: usize,
    pub agreements: usize,
    pub agreement_rate: f64,
    pub model_hire_rate_male: f64,
    pub model_hire_rate_female: f64,
    pub employer_estimate_male: f64,
    pub employer_estimate_female: f64,
}

/// Threshold both the model's `ŷ` and the employer's estimate at the same
/// level and count matching decisions.
pub fn compare_decisions(
    history: &[Sample],
    params: &LogisticParams,
    candidates: &[Sample],
    threshold: f64,
    alpha: f64,
) -> Comparison {
    let male = employer_decide(history, 1, threshold, alpha);
    let female = employer_decide(history, -1, threshold, alpha);
    let mut agreements = 0;
    let (mut hires, mut counts) = ([0usize; 2], [0usize; 2]);
    for c in candidates {
        let model_hire = params.predict(&c.x, c.z) >= threshold;
        let employer = if c.z == 1 { male } else { female };
        agreements += usize::from(model_hire == employer.hire);
        let g = usize::from(c.z == -1);
        counts[g] += 1;
        hires[g] += usize::from(model_hire);
    }
    let rate = |h: usize, n: usize| {
        if n == 0 {
            f64::NAN
        } else {
            h as f64 / n as f64
        }
    };
    Comparison {
        candidates: candidates.len(),
        agreements,
        agreement_rate: rate(agreements, candidates.len()),
        model_hire_rate_male: rate(hires[0], counts[0]),
        model_hire_rate_female: rate(hires[1], counts[1]),
        employer_estimate_male: male.expected_productivity,
        employer_estimate_female: female.expected_productivity,
    }
}
