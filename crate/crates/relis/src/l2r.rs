//! Learning-to-rank training of the linear utility `U(y,x) = w·z(φ(y,x)) + b`
//! (z = frozen z-score normalisation), from pointwise oracle ranks or
//! pairwise preferences, with four selectable losses:
//!
//! * `mse` — squared error against the oracle rank target;
//! * `cross_entropy` — logistic preference likelihood with
//!   `𝒫(y₁,y₂) = (1 + exp[U(y₂) − U(y₁)])⁻¹`;
//! * `margin` — hinge `max[0, 1 − e·(U(y₁) − U(y₂))]`, `e ∈ {1,−1}`;
//! * `improved_margin` — hinge with the rank gap as margin,
//!   `max[0, |σ*(y₁) − σ*(y₂)| − e·(U(y₁) − U(y₂))]`.
//!
//! Training is mini-batch adaptive-moment SGD; after every epoch the mean
//! Spearman ρ between predicted utilities and oracle targets on held-out
//! dev clusters is measured and the best-scoring epoch snapshot is returned.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{RelisError, Result};
use crate::features::{FeatureVector, FEATURE_COUNT, FEATURE_SCHEMA_VERSION};
use crate::ranking::{ranking_from_scores, spearman_rho, Ranking};
use crate::sampling::stream_rng;

/// Which training objective to optimise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
    Margin,
    ImprovedMargin,
}

impl LossKind {
    /// True when the objective consumes preference pairs rather than
    /// pointwise targets.
    pub fn is_pairwise(self) -> bool {
        !matches!(self, LossKind::Mse)
    }
}

impl std::str::FromStr for LossKind {
    type Err = RelisError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "ce" | "cross-entropy" | "cross_entropy" => Ok(LossKind::CrossEntropy),
            "margin" => Ok(LossKind::Margin),
            "im" | "improved-margin" | "improved_margin" => Ok(LossKind::ImprovedMargin),
            other => Err(RelisError::Config(format!(
                "unknown loss '{other}' (expected mse|ce|margin|improved-margin)"
            ))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            LossKind::Mse => "mse",
            LossKind::CrossEntropy => "cross-entropy",
            LossKind::Margin => "margin",
            LossKind::ImprovedMargin => "improved-margin",
        };
        f.write_str(name)
    }
}

/// Metadata recorded at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub dev_rho: f64,
}

/// The learned utility function: weights and bias over z-scored features.
/// Immutable once trained; shareable across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    pub loss_kind: LossKind,
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub feature_means: [f64; FEATURE_COUNT],
    pub feature_stds: [f64; FEATURE_COUNT],
    pub schema_version: u32,
    pub meta: Option<TrainMeta>,
}

impl UtilityModel {
    /// A model with identity normalisation; used by tests and as the
    /// optimiser's starting point.
    pub fn with_weights(loss_kind: LossKind, weights: [f64; FEATURE_COUNT], bias: f64) -> Self {
        UtilityModel {
            loss_kind,
            weights,
            bias,
            feature_means: [0.0; FEATURE_COUNT],
            feature_stds: [1.0; FEATURE_COUNT],
            schema_version: FEATURE_SCHEMA_VERSION,
            meta: None,
        }
    }

    /// Normalised feature vector z = (φ − mean) / std.
    fn normalise(&self, features: &FeatureVector) -> [f64; FEATURE_COUNT] {
        let mut z = [0.0; FEATURE_COUNT];
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = (features.values[i] - self.feature_means[i]) / self.feature_stds[i];
        }
        z
    }

    /// The learned utility U(y, x) = w·z + b.
    pub fn utility(&self, features: &FeatureVector) -> f64 {
        let z = self.normalise(features);
        self.weights
            .iter()
            .zip(&z)
            .map(|(w, zi)| w * zi)
            .sum::<f64>()
            + self.bias
    }

    /// Rank candidates by their utilities (the learned ranking σ̂).
    pub fn predict_ranking(&self, candidates: &[FeatureVector]) -> Result<Ranking> {
        let scores: Vec<f64> = candidates.iter().map(|f| self.utility(f)).collect();
        ranking_from_scores(&scores)
    }
}

/// One pointwise training example: features and the oracle rank target
/// (σ* normalised to (0, 1] by the per-cluster sample count).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPoint {
    pub features: FeatureVector,
    pub target: f64,
}

/// One preference pair, referencing `points` by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainPair {
    pub first: usize,
    pub second: usize,
    pub preferred_first: bool,
}

/// Featurised training data of one cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub cluster_id: String,
    pub points: Vec<TrainPoint>,
    pub pairs: Vec<TrainPair>,
}

impl TrainingSet {
    /// Featurise a preference set: targets are the counting ranks of the
    /// oracle scores divided by the sample count.
    pub fn from_preferences(
        cluster: &crate::corpus::DocumentCluster,
        set: &crate::sampling::PreferenceSet,
    ) -> Result<TrainingSet> {
        let index = crate::features::ClusterIndex::new(cluster);
        let scores: Vec<f64> = set.samples.iter().map(|(_, s)| *s).collect();
        if scores.is_empty() {
            return Err(RelisError::Input(format!(
                "cluster {}: no samples to featurise",
                set.cluster_id
            )));
        }
        let ranking = ranking_from_scores(&scores)?;
        let n = scores.len() as f64;
        let points = set
            .samples
            .iter()
            .zip(&ranking.ranks)
            .map(|((summary, _), &rank)| TrainPoint {
                features: index.compute_features(summary),
                target: rank as f64 / n,
            })
            .collect();
        let pairs = set
            .pairs
            .iter()
            .map(|p| TrainPair {
                first: p.first,
                second: p.second,
                preferred_first: p.preferred_first,
            })
            .collect();
        Ok(TrainingSet {
            cluster_id: set.cluster_id.clone(),
            points,
            pairs,
        })
    }
}

/// Training hyperparameters. Defaults: learning rate 1e-2, 10 epochs,
/// batch size 2, dev fraction 0.3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub dev_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss_kind: LossKind::CrossEntropy,
            learning_rate: 1e-2,
            epochs: 10,
            batch_size: 2,
            seed: 0,
            dev_fraction: 0.3,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(RelisError::Config("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(RelisError::Config("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(RelisError::Config("batch_size must be positive".into()));
        }
        if !(self.dev_fraction > 0.0 && self.dev_fraction < 1.0) {
            return Err(RelisError::Config("dev_fraction must lie in (0,1)".into()));
        }
        Ok(())
    }
}

/// A loss value with its gradient w.r.t. the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad_weights: [f64; FEATURE_COUNT],
    pub grad_bias: f64,
}

impl LossGrad {
    fn zero() -> Self {
        LossGrad {
            loss: 0.0,
            grad_weights: [0.0; FEATURE_COUNT],
            grad_bias: 0.0,
        }
    }
}

/// Numerically stable ln(1 + eˣ).
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically stable logistic function.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Squared error `(target − U(y))²` and its gradient.
pub fn loss_mse(model: &UtilityModel, features: &FeatureVector, target: f64) -> Result<LossGrad> {
    if features.values.iter().any(|v| !v.is_finite()) || !target.is_finite() {
        return Err(RelisError::Input("non-finite feature or target".into()));
    }
    let z = model.normalise(features);
    let u = model
        .weights
        .iter()
        .zip(&z)
        .map(|(w, zi)| w * zi)
        .sum::<f64>()
        + model.bias;
    let err = u - target; // d(loss)/dU = 2(U − target)
    let mut grad_weights = [0.0; FEATURE_COUNT];
    for i in 0..FEATURE_COUNT {
        grad_weights[i] = 2.0 * err * z[i];
    }
    Ok(LossGrad {
        loss: err * err,
        grad_weights,
        grad_bias: 2.0 * err,
    })
}

/// Shared shape of the three pairwise losses: given the utility difference
/// `d = U(y₁) − U(y₂)`, the loss is `f(d)` and the parameter gradient is
/// `f'(d)·(z₁ − z₂)` for the weights and 0 for the bias (it cancels in d).
fn pairwise_grad(
    model: &UtilityModel,
    first: &FeatureVector,
    second: &FeatureVector,
    f: impl Fn(f64) -> (f64, f64),
) -> LossGrad {
    let z1 = model.normalise(first);
    let z2 = model.normalise(second);
    let d: f64 = model
        .weights
        .iter()
        .zip(z1.iter().zip(&z2))
        .map(|(w, (a, b))| w * (a - b))
        .sum();
    let (loss, dloss_dd) = f(d);
    let mut grad_weights = [0.0; FEATURE_COUNT];
    for i in 0..FEATURE_COUNT {
        grad_weights[i] = dloss_dd * (z1[i] - z2[i]);
    }
    LossGrad {
        loss,
        grad_weights,
        grad_bias: 0.0,
    }
}

/// Cross-entropy preference loss
/// `−[p·ln 𝒫(y₁,y₂) + (1−p)·ln 𝒫(y₂,y₁)]` in log-sum-exp form.
pub fn loss_cross_entropy(
    model: &UtilityModel,
    first: &FeatureVector,
    second: &FeatureVector,
    preferred_first: bool,
) -> LossGrad {
    let p = if preferred_first { 1.0 } else { 0.0 };
    pairwise_grad(model, first, second, |d| {
        let loss = p * softplus(-d) + (1.0 - p) * softplus(d);
        (loss, sigmoid(d) - p)
    })
}

/// Margin ranking loss `max[0, 1 − e·(U(y₁) − U(y₂))]`; the subgradient at
/// the hinge point is 0.
pub fn loss_margin(
    model: &UtilityModel,
    first: &FeatureVector,
    second: &FeatureVector,
    preferred_first: bool,
) -> LossGrad {
    let e = if preferred_first { 1.0 } else { -1.0 };
    pairwise_grad(model, first, second, |d| {
        let v = 1.0 - e * d;
        if v > 0.0 {
            (v, -e)
        } else {
            (0.0, 0.0)
        }
    })
}

/// Margin loss with the oracle rank gap as the margin:
/// `max[0, |σ*(y₁) − σ*(y₂)| − e·(U(y₁) − U(y₂))]`.
pub fn loss_improved_margin(
    model: &UtilityModel,
    first: &FeatureVector,
    second: &FeatureVector,
    preferred_first: bool,
    target_first: f64,
    target_second: f64,
) -> LossGrad {
    let e = if preferred_first { 1.0 } else { -1.0 };
    let gap = (target_first - target_second).abs();
    pairwise_grad(model, first, second, |d| {
        let v = gap - e * d;
        if v > 0.0 {
            (v, -e)
        } else {
            (0.0, 0.0)
        }
    })
}

/// Loss and gradient of one training instance under the configured loss.
fn instance_grad(model: &UtilityModel, set: &TrainingSet, instance: usize) -> Result<LossGrad> {
    match model.loss_kind {
        LossKind::Mse => {
            let point = &set.points[instance];
            loss_mse(model, &point.features, point.target)
        }
        LossKind::CrossEntropy => {
            let pair = &set.pairs[instance];
            Ok(loss_cross_entropy(
                model,
                &set.points[pair.first].features,
                &set.points[pair.second].features,
                pair.preferred_first,
            ))
        }
        LossKind::Margin => {
            let pair = &set.pairs[instance];
            Ok(loss_margin(
                model,
                &set.points[pair.first].features,
                &set.points[pair.second].features,
                pair.preferred_first,
            ))
        }
        LossKind::ImprovedMargin => {
            let pair = &set.pairs[instance];
            Ok(loss_improved_margin(
                model,
                &set.points[pair.first].features,
                &set.points[pair.second].features,
                pair.preferred_first,
                set.points[pair.first].target,
                set.points[pair.second].target,
            ))
        }
    }
}

/// Adaptive-moment SGD state over the 13 parameters (12 weights + bias).
struct Adam {
    lr: f64,
    m: [f64; FEATURE_COUNT + 1],
    v: [f64; FEATURE_COUNT + 1],
    t: u32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64) -> Self {
        Adam {
            lr,
            m: [0.0; FEATURE_COUNT + 1],
            v: [0.0; FEATURE_COUNT + 1],
            t: 0,
        }
    }

    fn step(&mut self, model: &mut UtilityModel, grad: &LossGrad) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        let mut update = |slot: usize, g: f64, param: &mut f64| {
            self.m[slot] = Self::BETA1 * self.m[slot] + (1.0 - Self::BETA1) * g;
            self.v[slot] = Self::BETA2 * self.v[slot] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.m[slot] / bc1;
            let v_hat = self.v[slot] / bc2;
            *param -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
        };
        for i in 0..FEATURE_COUNT {
            let g = grad.grad_weights[i];
            let mut w = model.weights[i];
            update(i, g, &mut w);
            model.weights[i] = w;
        }
        let mut b = model.bias;
        update(FEATURE_COUNT, grad.grad_bias, &mut b);
        model.bias = b;
    }
}

/// Mean and std of every feature over the given sets' points; degenerate
/// stds (0 or non-finite) are pinned to 1.
fn normalisation_stats(
    sets: &[&TrainingSet],
) -> Result<([f64; FEATURE_COUNT], [f64; FEATURE_COUNT])> {
    let mut count = 0usize;
    let mut mean = [0.0; FEATURE_COUNT];
    for set in sets {
        for point in &set.points {
            for (m, v) in mean.iter_mut().zip(&point.features.values) {
                *m += v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(RelisError::Config(
            "cannot compute feature statistics: no training samples".into(),
        ));
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut var = [0.0; FEATURE_COUNT];
    for set in sets {
        for point in &set.points {
            for i in 0..FEATURE_COUNT {
                let d = point.features.values[i] - mean[i];
                var[i] += d * d;
            }
        }
    }
    let mut std = [1.0; FEATURE_COUNT];
    for i in 0..FEATURE_COUNT {
        let s = (var[i] / count as f64).sqrt();
        std[i] = if s > 0.0 && s.is_finite() { s } else { 1.0 };
    }
    Ok((mean, std))
}

/// Mean Spearman ρ between predicted utilities and oracle targets over the
/// given clusters; clusters where the coefficient is undefined (all tied)
/// are skipped, and 0.0 is returned when none remain.
pub fn mean_dev_rho(model: &UtilityModel, sets: &[&TrainingSet]) -> Result<f64> {
    let mut sum = 0.0;
    let mut counted = 0usize;
    for set in sets {
        if set.points.len() < 2 {
            continue;
        }
        let predicted: Vec<f64> = set
            .points
            .iter()
            .map(|p| model.utility(&p.features))
            .collect();
        let targets: Vec<f64> = set.points.iter().map(|p| p.target).collect();
        let rho = spearman_rho(
            &ranking_from_scores(&predicted)?,
            &ranking_from_scores(&targets)?,
        )?;
        if let Some(rho) = rho {
            sum += rho;
            counted += 1;
        }
    }
    Ok(if counted == 0 {
        0.0
    } else {
        sum / counted as f64
    })
}

fn instance_count(set: &TrainingSet, loss_kind: LossKind) -> usize {
    if loss_kind.is_pairwise() {
        set.pairs.len()
    } else {
        set.points.len()
    }
}

/// Core optimisation loop shared by [`train`] and [`fit_single_set`]:
/// mini-batch Adam over shuffled instances, with an optional per-epoch dev
/// evaluation selecting the best snapshot.
fn optimise(
    train_sets: &[&TrainingSet],
    dev_sets: &[&TrainingSet],
    config: &TrainConfig,
) -> Result<UtilityModel> {
    let (mean, std) = normalisation_stats(train_sets)?;
    let mut model = UtilityModel {
        loss_kind: config.loss_kind,
        weights: [0.0; FEATURE_COUNT],
        bias: 0.0,
        feature_means: mean,
        feature_stds: std,
        schema_version: FEATURE_SCHEMA_VERSION,
        meta: None,
    };

    let mut instances: Vec<(usize, usize)> = Vec::new();
    for (si, set) in train_sets.iter().enumerate() {
        for ii in 0..instance_count(set, config.loss_kind) {
            instances.push((si, ii));
        }
    }
    if instances.is_empty() {
        let needed = if config.loss_kind.is_pairwise() {
            "pairs"
        } else {
            "samples"
        };
        return Err(RelisError::Config(format!(
            "loss {} needs {needed}, but the training data has none",
            config.loss_kind
        )));
    }

    let mut rng = stream_rng(config.seed, "reward-training");
    let mut adam = Adam::new(config.learning_rate);
    let mut best: Option<(f64, usize, UtilityModel)> = None;

    for epoch in 0..config.epochs {
        instances.shuffle(&mut rng);
        for batch in instances.chunks(config.batch_size) {
            let mut acc = LossGrad::zero();
            for &(si, ii) in batch {
                let g = instance_grad(&model, train_sets[si], ii)?;
                for i in 0..FEATURE_COUNT {
                    acc.grad_weights[i] += g.grad_weights[i];
                }
                acc.grad_bias += g.grad_bias;
                acc.loss += g.loss;
            }
            let scale = 1.0 / batch.len() as f64;
            for i in 0..FEATURE_COUNT {
                acc.grad_weights[i] *= scale;
            }
            acc.grad_bias *= scale;
            adam.step(&mut model, &acc);
        }
        if !dev_sets.is_empty() {
            let rho = mean_dev_rho(&model, dev_sets)?;
            if best.as_ref().is_none_or(|(b, _, _)| rho > *b) {
                best = Some((rho, epoch, model.clone()));
            }
        }
    }

    Ok(match best {
        Some((rho, epoch, mut snapshot)) => {
            snapshot.meta = Some(TrainMeta {
                seed: config.seed,
                epochs: config.epochs,
                best_epoch: epoch,
                dev_rho: rho,
            });
            snapshot
        }
        None => {
            model.meta = Some(TrainMeta {
                seed: config.seed,
                epochs: config.epochs,
                best_epoch: config.epochs.saturating_sub(1),
                dev_rho: f64::NAN,
            });
            model
        }
    })
}

/// Train a utility model over several clusters' training sets.
///
/// `dev_fraction` of the clusters (at least one, and fewer than all) is
/// held out; after each epoch the mean Spearman ρ on those dev clusters is
/// evaluated and the best epoch's weights are returned.
pub fn train(sets: &[TrainingSet], config: &TrainConfig) -> Result<UtilityModel> {
    config.validate()?;
    let n = sets.len();
    let dev_count = (config.dev_fraction * n as f64).floor() as usize;
    if dev_count == 0 || dev_count >= n {
        return Err(RelisError::Config(format!(
            "cannot hold out {dev_count} of {n} clusters as the dev set; \
             provide more clusters or adjust dev_fraction"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(config.seed, "dev-split"));
    let dev_idx = &order[..dev_count];
    let train_idx = &order[dev_count..];
    let dev_sets: Vec<&TrainingSet> = dev_idx.iter().map(|&i| &sets[i]).collect();
    let train_sets: Vec<&TrainingSet> = train_idx.iter().map(|&i| &sets[i]).collect();
    optimise(&train_sets, &dev_sets, config)
}

/// Train on a single cluster's set with no dev split: fixed number of
/// epochs, final weights returned. Used where a per-input utility is fit
/// in isolation (the near-optimality verifier).
pub fn fit_single_set(set: &TrainingSet, config: &TrainConfig) -> Result<UtilityModel> {
    config.validate()?;
    optimise(&[set], &[], config)
}

/// On-disk model format; `format_version` gates compatibility.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: UtilityModel,
}

const MODEL_FORMAT_VERSION: u32 = 1;

/// Persist a model as versioned JSON.
pub fn save_model(model: &UtilityModel, path: &Path) -> Result<()> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Load a model persisted by [`save_model`].
pub fn load_model(path: &Path) -> Result<UtilityModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RelisError::Input(format!("cannot read model {}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| RelisError::Format(format!("malformed model file: {e}")))?;
    if file.format_version != MODEL_FORMAT_VERSION {
        return Err(RelisError::Format(format!(
            "unsupported model format version {} (this build reads {})",
            file.format_version, MODEL_FORMAT_VERSION
        )));
    }
    if file.model.schema_version != FEATURE_SCHEMA_VERSION {
        return Err(RelisError::Format(format!(
            "model built for feature schema {} (this build uses {})",
            file.model.schema_version, FEATURE_SCHEMA_VERSION
        )));
    }
    if file
        .model
        .feature_stds
        .iter()
        .any(|&s| s.is_nan() || s <= 0.0)
    {
        return Err(RelisError::Format(
            "model has non-positive feature stds".into(),
        ));
    }
    Ok(file.model)
}
