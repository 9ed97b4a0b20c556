//! The three-stage training pipeline and its ablation variants.
//!
//! Stage 1 trains the base model from video-level labels (optionally with
//! the auxiliary composition objective). Stage 2 refines labels per
//! window with the trained base model. Stage 3 re-trains from scratch
//! with the refined window labels added to the bag loss. A pseudo-label
//! baseline and a dummy-refinement variant complete the ablation table.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::datagen::{disjoint_partner, Corpus, FeatureVideo};
use crate::error::{Error, Result};
use crate::evalkit::{evaluate_model, write_metrics_records, MetricsReport};
use crate::model::{mil_loss, windowed_bag_loss, Gradients, ModelConfig, ModelParams};
use crate::numkit::{
    adam_step, bce_probs_grad, derive_seed, maxpool_cols_range, softmax, softmax_grad,
    DenseMatrix, OptimizerState, Rng,
};
use crate::refine::{
    make_schedule, refine_corpus, LabelSet, LabelVector, RefinedLabels, Window, WindowSchedule,
};

/// Training hyperparameters for all stages.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub stage1_epochs: usize,
    pub stage3_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Event-detection threshold for refinement.
    pub tau: f64,
    /// Refinement window size.
    pub n: usize,
    /// Refinement window stride.
    pub s: usize,
    /// Weight of the auxiliary objective in stage 1.
    pub aux_weight: f64,
    /// Weight of the refinement loss in stage 3.
    pub lr_weight: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage1_epochs: 200,
            stage3_epochs: 100,
            learning_rate: 0.001,
            batch_size: 64,
            tau: 0.05,
            n: 4,
            s: 2,
            aux_weight: 1.0,
            lr_weight: 1.0,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stage1_epochs == 0 || self.stage3_epochs == 0 {
            return Err(Error::Config("epoch counts must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0 < self.tau && self.tau < 1.0) {
            return Err(Error::Config(format!("tau {} outside (0, 1)", self.tau)));
        }
        if self.aux_weight < 0.0 || self.lr_weight < 0.0 {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        Ok(())
    }

    /// The window schedule this config implies for `t` segments.
    pub fn schedule(&self, t: usize) -> Result<WindowSchedule> {
        make_schedule(t, self.n, self.s)
    }
}

/// Trained weights plus the per-epoch mean training loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub loss_curve: Vec<f64>,
}

/// Shared mini-batch descent loop. `video_loss` maps (params, video,
/// epoch) to a loss and gradients; batches are parallelized per video and
/// reduced in fixed order, so results do not depend on thread count.
fn train_loop<F>(
    corpus: &Corpus,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    epochs: usize,
    init_seed: u64,
    shuffle_purpose: &str,
    video_loss: F,
) -> Result<TrainedModel>
where
    F: Fn(&ModelParams, &FeatureVideo, usize) -> Result<(f64, Gradients)> + Sync,
{
    cfg.validate()?;
    model_cfg.validate()?;
    let mut params = ModelParams::init(model_cfg, init_seed);
    let mut opt = OptimizerState::new(params.param_len(), cfg.learning_rate);
    let num_train = corpus.train.len();
    if num_train == 0 {
        return Err(Error::Precondition("corpus has no training videos".into()));
    }
    let mut curve = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..num_train).collect();
        let mut shuffle_rng = Rng::new(derive_seed(cfg.seed, shuffle_purpose, epoch as u64));
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results: Vec<Result<(f64, Gradients)>> = batch
                .par_iter()
                .map(|&i| video_loss(&params, &corpus.train[i], epoch))
                .collect();
            let mut batch_grads = Gradients::zeros(model_cfg);
            let mut batch_loss = 0.0;
            let scale = 1.0 / batch.len() as f64;
            for result in results {
                let (loss, grads) = result?;
                batch_loss += loss;
                batch_grads.add_scaled(&grads, scale);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            epoch_loss += batch_loss;
            apply_step(&mut opt, &mut params, &batch_grads)?;
        }
        params.check_finite()?;
        curve.push(epoch_loss / num_train as f64);
    }
    Ok(TrainedModel { params, loss_curve: curve })
}

/// One optimizer step on structured parameters via the flat view.
fn apply_step(
    opt: &mut OptimizerState,
    params: &mut ModelParams,
    grads: &Gradients,
) -> Result<()> {
    let mut flat = params.to_flat();
    adam_step(&mut flat, &grads.to_flat(), opt)?;
    params.set_from_flat(&flat)
}

/// Stage 1: trains the base model on video-level labels by mini-batch
/// adaptive-moment descent. With `with_aux` (and a positive aux weight)
/// each video also contributes the auxiliary composition loss against a
/// label-disjoint partner, re-sampled every epoch.
pub fn train_stage1(
    corpus: &Corpus,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    with_aux: bool,
) -> Result<TrainedModel> {
    let use_aux = with_aux && cfg.aux_weight != 0.0;
    let schedule = if use_aux {
        let schedule = cfg.schedule(corpus.spec.segments)?;
        if !schedule.aux_valid {
            return Err(Error::Precondition(format!(
                "auxiliary objective needs T-N+1 > N, got T={} N={}",
                schedule.t, schedule.n
            )));
        }
        Some(schedule)
    } else {
        None
    };
    train_loop(
        corpus,
        model_cfg,
        cfg,
        cfg.stage1_epochs,
        model_cfg.seed,
        "stage1-shuffle",
        |params, video, epoch| {
            let (mut loss, mut grads) = mil_loss(params, video)?;
            if let Some(schedule) = &schedule {
                let epoch_seed = derive_seed(cfg.seed, "aux-pair", epoch as u64);
                let mut rng = Rng::new(derive_seed(epoch_seed, &video.id, 0));
                let partner = disjoint_partner(corpus, video, &mut rng)?;
                let (aux, aux_grads) = aux_loss(params, video, partner, schedule)?;
                loss += cfg.aux_weight * aux;
                grads.add_scaled(&aux_grads, cfg.aux_weight);
            }
            Ok((loss, grads))
        },
    )
}

/// The auxiliary objective for one video pair: every window composition
/// is scored, raw scores are max-pooled within each composition and then
/// across the compositions, and the softmax of the aggregate is matched
/// against the union of the two videos' label sets.
pub fn aux_loss(
    params: &ModelParams,
    video_i: &FeatureVideo,
    video_j: &FeatureVideo,
    schedule: &WindowSchedule,
) -> Result<(f64, Gradients)> {
    if !schedule.aux_valid {
        return Err(Error::Precondition(format!(
            "window complements only cover every segment when T-N+1 > N (T={}, N={})",
            schedule.t, schedule.n
        )));
    }
    let l_i = video_i.label_set();
    let l_j = video_j.label_set();
    if !l_i.is_disjoint(&l_j) {
        return Err(Error::Precondition(format!(
            "aux pair shares classes {:?}",
            l_i.intersection(&l_j)
        )));
    }
    let c = video_i.num_classes();
    let union_target = l_i.union(&l_j).to_vector(c).as_targets();
    let t = video_i.t();

    let mut caches = Vec::with_capacity(schedule.t1_count);
    let mut pooled_per: Vec<(Vec<f64>, Vec<usize>)> = Vec::with_capacity(schedule.t1_count);
    for window in schedule.windows() {
        let composed = crate::refine::compose_synthetic(video_i, video_j, window)?;
        let cache = params.forward(&composed.video)?;
        let pooled = maxpool_cols_range(&cache.scores, 0, t)?;
        caches.push(cache);
        pooled_per.push(pooled);
    }

    // Max across compositions; ties stay with the earliest window.
    let k = c + 1;
    let mut aggregate = pooled_per[0].0.clone();
    let mut winner = vec![0usize; k];
    for (ti, (pooled, _)) in pooled_per.iter().enumerate().skip(1) {
        for class in 0..k {
            if pooled[class] > aggregate[class] {
                aggregate[class] = pooled[class];
                winner[class] = ti;
            }
        }
    }
    let probs = softmax(&aggregate)?;
    let (loss, d_probs) = bce_probs_grad(&probs, &union_target)?;
    let d_logits = softmax_grad(&probs, &d_probs);

    let mut grads = Gradients::zeros(&params.config);
    let mut d_scores = DenseMatrix::zeros(t, k);
    for ti in 0..caches.len() {
        d_scores.data_mut().fill(0.0);
        let mut any = false;
        for class in 0..k {
            if winner[class] == ti && d_logits[class] != 0.0 {
                let row = pooled_per[ti].1[class];
                d_scores.set(row, class, d_logits[class]);
                any = true;
            }
        }
        if any {
            params.backward(&caches[ti], &d_scores, &mut grads);
        }
    }
    Ok((loss, grads))
}

/// The refinement loss on its own: mean bag loss over the schedule's
/// windows against per-window target vectors.
pub fn refinement_loss(
    params: &ModelParams,
    video: &FeatureVideo,
    window_targets: &[(Window, LabelVector)],
) -> Result<(f64, Gradients)> {
    if window_targets.is_empty() {
        return Err(Error::Precondition("no window targets".into()));
    }
    let cache = params.forward(video)?;
    let mut d_scores = DenseMatrix::zeros(cache.scores.rows(), cache.scores.cols());
    let t1 = window_targets.len() as f64;
    let mut sum = 0.0;
    for (window, target) in window_targets {
        sum += windowed_bag_loss(
            &cache.scores,
            *window,
            &target.as_targets(),
            1.0 / t1,
            &mut d_scores,
        )?;
    }
    let mut grads = Gradients::zeros(&params.config);
    params.backward(&cache, &d_scores, &mut grads);
    Ok((sum / t1, grads))
}

/// Combined stage-3 objective for one video: bag loss over the full video
/// plus `lr_weight` times the mean bag loss over refined windows, sharing
/// one forward/backward pass.
fn stage3_video_loss(
    params: &ModelParams,
    video: &FeatureVideo,
    refined: &RefinedLabels,
    schedule: &WindowSchedule,
    lr_weight: f64,
) -> Result<(f64, Gradients)> {
    let cache = params.forward(video)?;
    let mut d_scores = DenseMatrix::zeros(cache.scores.rows(), cache.scores.cols());
    let mil = windowed_bag_loss(
        &cache.scores,
        Window::full(video.t()),
        &video.video_label.as_targets(),
        1.0,
        &mut d_scores,
    )?;
    let t1 = schedule.t1_count as f64;
    let mut lr_sum = 0.0;
    for window in schedule.windows() {
        let target = refined
            .get(&video.id, window.start)
            .ok_or_else(|| Error::MissingRefined {
                video: video.id.clone(),
                t1: window.start,
            })?;
        lr_sum += windowed_bag_loss(
            &cache.scores,
            window,
            &target.as_targets(),
            lr_weight / t1,
            &mut d_scores,
        )?;
    }
    let mut grads = Gradients::zeros(&params.config);
    params.backward(&cache, &d_scores, &mut grads);
    Ok((mil + lr_weight * lr_sum / t1, grads))
}

/// Stage 3: re-trains from scratch (fresh initialization with seed
/// `cfg.seed + 1`) minimizing the bag loss plus the refinement loss over
/// the refined window labels.
pub fn train_stage3(
    corpus: &Corpus,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    refined: &RefinedLabels,
) -> Result<TrainedModel> {
    let schedule = cfg.schedule(corpus.spec.segments)?;
    if refined.n != schedule.n || refined.s != schedule.s || refined.t != schedule.t {
        return Err(Error::Precondition(format!(
            "refined labels were produced for (T={}, N={}, s={}), config implies (T={}, N={}, s={})",
            refined.t, refined.n, refined.s, schedule.t, schedule.n, schedule.s
        )));
    }
    // Fail fast on gaps instead of at some mid-epoch batch.
    for video in &corpus.train {
        for window in schedule.windows() {
            if refined.get(&video.id, window.start).is_none() {
                return Err(Error::MissingRefined {
                    video: video.id.clone(),
                    t1: window.start,
                });
            }
        }
    }
    train_loop(
        corpus,
        model_cfg,
        cfg,
        cfg.stage3_epochs,
        cfg.seed + 1,
        "stage3-shuffle",
        |params, video, _| stage3_video_loss(params, video, refined, &schedule, cfg.lr_weight),
    )
}

/// Per-segment cross-entropy against fixed labels, for the pseudo-label
/// baseline.
fn segment_ce_loss(
    params: &ModelParams,
    video: &FeatureVideo,
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    let cache = params.forward(video)?;
    let t = video.t();
    let mut d_scores = DenseMatrix::zeros(cache.scores.rows(), cache.scores.cols());
    let mut loss = 0.0;
    for seg in 0..t {
        let probs = softmax(cache.scores.row(seg))?;
        let y = labels[seg] - 1;
        loss -= probs[y].max(f64::MIN_POSITIVE).ln();
        let d_row = d_scores.row_mut(seg);
        for (cidx, p) in probs.iter().enumerate() {
            d_row[cidx] = (p - if cidx == y { 1.0 } else { 0.0 }) / t as f64;
        }
    }
    let mut grads = Gradients::zeros(&params.config);
    params.backward(&cache, &d_scores, &mut grads);
    Ok((loss / t as f64, grads))
}

/// Pseudo-label baseline: freezes the base model's per-segment argmax
/// predictions on the training split as labels and re-trains from scratch
/// with per-segment cross-entropy.
pub fn pseudo_label_baseline(
    corpus: &Corpus,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    base: &ModelParams,
) -> Result<TrainedModel> {
    let pseudo: Vec<Vec<usize>> = corpus
        .train
        .iter()
        .map(|v| base.predict_segments(v))
        .collect::<Result<_>>()?;
    let by_index: std::collections::BTreeMap<&str, &Vec<usize>> = corpus
        .train
        .iter()
        .map(|v| v.id.as_str())
        .zip(&pseudo)
        .collect();
    train_loop(
        corpus,
        model_cfg,
        cfg,
        cfg.stage3_epochs,
        cfg.seed + 1,
        "pl-shuffle",
        |params, video, _| segment_ce_loss(params, video, by_index[video.id.as_str()]),
    )
}

/// Refined labels that just repeat each video's own label vector for every
/// window; isolates the effect of genuine localization in the ablation.
pub fn dummy_refined(corpus: &Corpus, schedule: &WindowSchedule, tau: f64) -> RefinedLabels {
    let mut refined = RefinedLabels::new(tau, schedule);
    for video in &corpus.train {
        for window in schedule.windows() {
            refined
                .entries
                .insert((video.id.clone(), window.start), video.video_label.clone());
        }
    }
    refined
}

/// Micro-averaged precision/recall of refined window label sets against
/// the ground-truth window label sets of the training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowLabelQuality {
    pub matched_bits: usize,
    pub predicted_bits: usize,
    pub true_bits: usize,
}

impl WindowLabelQuality {
    pub fn precision(&self) -> f64 {
        if self.predicted_bits == 0 {
            0.0
        } else {
            self.matched_bits as f64 / self.predicted_bits as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.true_bits == 0 {
            0.0
        } else {
            self.matched_bits as f64 / self.true_bits as f64
        }
    }
}

/// Compares refined labels to the oracle window label sets (event bits
/// only) over the training split.
pub fn window_label_quality(
    corpus: &Corpus,
    refined: &RefinedLabels,
    schedule: &WindowSchedule,
) -> WindowLabelQuality {
    let mut quality = WindowLabelQuality {
        matched_bits: 0,
        predicted_bits: 0,
        true_bits: 0,
    };
    for video in &corpus.train {
        let c = video.num_classes();
        for window in schedule.windows() {
            let (lo, hi) = window.rows();
            let truth = LabelSet::from_segments(&video.segment_labels, lo, hi, c);
            let predicted = refined
                .get(&video.id, window.start)
                .map(LabelVector::event_set)
                .unwrap_or_default();
            quality.true_bits += truth.len();
            quality.predicted_bits += predicted.len();
            quality.matched_bits += truth.intersection(&predicted).len();
        }
    }
    quality
}

/// The five ablation variants, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Base,
    BasePl,
    BaseLrDummy,
    BaseLr,
    BaseAuxLr,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Base,
        Variant::BasePl,
        Variant::BaseLrDummy,
        Variant::BaseLr,
        Variant::BaseAuxLr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "BASE",
            Variant::BasePl => "BASE+PL",
            Variant::BaseLrDummy => "BASE+LRdummy",
            Variant::BaseLr => "BASE+LR",
            Variant::BaseAuxLr => "BASE+A+LR",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One trained variant: loss curves, refined-label quality where the
/// variant refines, and test-split metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub variant: Variant,
    pub stage1_curve: Vec<f64>,
    pub stage3_curve: Vec<f64>,
    pub refined_quality: Option<WindowLabelQuality>,
    pub metrics: MetricsReport,
}

/// Full ablation output.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub variants: Vec<VariantResult>,
}

impl PipelineReport {
    pub fn get(&self, variant: Variant) -> &VariantResult {
        self.variants
            .iter()
            .find(|v| v.variant == variant)
            .expect("all variants present")
    }

    /// Line-record serialization with a versioned header; byte-identical
    /// for identical runs.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        out.push_str("avel-report v1\n");
        for v in &self.variants {
            writeln!(out, "variant {}", v.variant).unwrap();
            let mut curve = String::from("curve stage1");
            crate::textio::push_floats(&mut curve, &v.stage1_curve);
            out.push_str(&curve);
            out.push('\n');
            if !v.stage3_curve.is_empty() {
                let mut curve = String::from("curve stage3");
                crate::textio::push_floats(&mut curve, &v.stage3_curve);
                out.push_str(&curve);
                out.push('\n');
            }
            if let Some(q) = &v.refined_quality {
                writeln!(
                    out,
                    "refined-quality matched={} predicted={} true={} precision={} recall={}",
                    q.matched_bits,
                    q.predicted_bits,
                    q.true_bits,
                    q.precision(),
                    q.recall()
                )
                .unwrap();
            }
            write_metrics_records(&mut out, &v.metrics);
            out.push_str("end\n");
        }
        out
    }
}

/// Runs the five ablation variants. The stage-1 model without the
/// auxiliary objective is shared by BASE, BASE+PL, BASE+LRdummy, and
/// BASE+LR; BASE+A+LR trains its own stage-1 model with the objective.
pub fn run_ablation(
    corpus: &Corpus,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<PipelineReport> {
    let schedule = cfg.schedule(corpus.spec.segments)?;
    let test = &corpus.test;
    let c = corpus.spec.num_classes;

    let base = train_stage1(corpus, model_cfg, cfg, false)?;
    let base_metrics = evaluate_model(&base.params, test, c)?;

    let pl = pseudo_label_baseline(corpus, model_cfg, cfg, &base.params)?;
    let pl_metrics = evaluate_model(&pl.params, test, c)?;

    let dummy = dummy_refined(corpus, &schedule, cfg.tau);
    let lr_dummy = train_stage3(corpus, model_cfg, cfg, &dummy)?;
    let lr_dummy_metrics = evaluate_model(&lr_dummy.params, test, c)?;

    let refined = refine_corpus(&base.params, corpus, &schedule, cfg.tau, cfg.seed)?;
    let lr_quality = window_label_quality(corpus, &refined, &schedule);
    let lr = train_stage3(corpus, model_cfg, cfg, &refined)?;
    let lr_metrics = evaluate_model(&lr.params, test, c)?;

    let aux_base = train_stage1(corpus, model_cfg, cfg, true)?;
    let aux_refined = refine_corpus(&aux_base.params, corpus, &schedule, cfg.tau, cfg.seed)?;
    let aux_quality = window_label_quality(corpus, &aux_refined, &schedule);
    let aux_lr = train_stage3(corpus, model_cfg, cfg, &aux_refined)?;
    let aux_lr_metrics = evaluate_model(&aux_lr.params, test, c)?;

    Ok(PipelineReport {
        variants: vec![
            VariantResult {
                variant: Variant::Base,
                stage1_curve: base.loss_curve.clone(),
                stage3_curve: Vec::new(),
                refined_quality: None,
                metrics: base_metrics,
            },
            VariantResult {
                variant: Variant::BasePl,
                stage1_curve: base.loss_curve.clone(),
                stage3_curve: pl.loss_curve,
                refined_quality: None,
                metrics: pl_metrics,
            },
            VariantResult {
                variant: Variant::BaseLrDummy,
                stage1_curve: base.loss_curve.clone(),
                stage3_curve: lr_dummy.loss_curve,
                refined_quality: None,
                metrics: lr_dummy_metrics,
            },
            VariantResult {
                variant: Variant::BaseLr,
                stage1_curve: base.loss_curve,
                stage3_curve: lr.loss_curve,
                refined_quality: Some(lr_quality),
                metrics: lr_metrics,
            },
            VariantResult {
                variant: Variant::BaseAuxLr,
                stage1_curve: aux_base.loss_curve,
                stage3_curve: aux_lr.loss_curve,
                refined_quality: Some(aux_quality),
                metrics: aux_lr_metrics,
            },
        ],
    })
}
