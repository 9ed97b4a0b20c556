//! The base bag-level model.
//!
//! A two-layer fully-connected encoder scores each segment from the
//! concatenated audio+visual features of the segment and its `r`
//! neighbors on each side (zero-padded at the boundaries). Bag-level
//! predictions max-pool the raw scores over a segment window and apply a
//! softmax; training matches them against `{0,1}^(C+1)` label vectors
//! with a mean binary cross-entropy. Gradients are computed manually, and
//! the max-pool backward routes each class gradient to the tie-broken
//! argmax row only, so every result is reproducible bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::datagen::FeatureVideo;
use crate::error::{Error, Result};
use crate::numkit::{
    bce_probs_grad, maxpool_cols_range, softmax, softmax_grad, DenseMatrix, Rng,
};
use crate::refine::{VideoLevelPredictor, Window};
use crate::textio::{parse_kv_line, push_floats, LineReader};

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub audio_dim: usize,
    pub visual_dim: usize,
    /// Width of the hidden layer.
    pub hidden: usize,
    /// Event classes C; the score head has C+1 outputs.
    pub num_classes: usize,
    /// Temporal context radius in segments.
    pub context_radius: usize,
    /// Seed for weight initialization.
    pub seed: u64,
}

impl ModelConfig {
    /// Encoder input width: `(d_a + d_v) * (2r + 1)`.
    pub fn input_dim(&self) -> usize {
        (self.audio_dim + self.visual_dim) * (2 * self.context_radius + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.audio_dim == 0 || self.visual_dim == 0 {
            return Err(Error::Config("model dims must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("need at least two event classes".into()));
        }
        Ok(())
    }
}

/// Raw per-segment class scores, one row per segment, `C+1` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix(DenseMatrix);

impl ScoreMatrix {
    pub fn as_matrix(&self) -> &DenseMatrix {
        &self.0
    }

    pub fn segments(&self) -> usize {
        self.0.rows()
    }
}

/// Encoder weights: input -> hidden (ReLU) -> C+1 raw scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
}

/// Gradient buffers shaped like [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: DenseMatrix,
    pub b1: Vec<f64>,
    pub w2: DenseMatrix,
    pub b2: Vec<f64>,
}

impl ModelParams {
    /// All-zero parameters.
    pub fn zeros(config: &ModelConfig) -> Self {
        let input = config.input_dim();
        ModelParams {
            w1: DenseMatrix::zeros(config.hidden, input),
            b1: vec![0.0; config.hidden],
            w2: DenseMatrix::zeros(config.num_classes + 1, config.hidden),
            b2: vec![0.0; config.num_classes + 1],
            config: config.clone(),
        }
    }

    /// Random initialization: Gaussian weights scaled by `sqrt(2 / fan_in)`,
    /// zero biases. Deterministic in `seed`.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut params = Self::zeros(config);
        let mut rng = Rng::new(seed);
        let scale1 = (2.0 / config.input_dim() as f64).sqrt();
        for v in params.w1.data_mut() {
            *v = scale1 * rng.next_normal();
        }
        let scale2 = (2.0 / config.hidden as f64).sqrt();
        for v in params.w2.data_mut() {
            *v = scale2 * rng.next_normal();
        }
        params
    }

    pub fn param_len(&self) -> usize {
        self.w1.data().len() + self.b1.len() + self.w2.data().len() + self.b2.len()
    }

    /// Flat view in the fixed order `w1, b1, w2, b2`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_len());
        flat.extend_from_slice(self.w1.data());
        flat.extend_from_slice(&self.b1);
        flat.extend_from_slice(self.w2.data());
        flat.extend_from_slice(&self.b2);
        flat
    }

    /// Overwrites the weights from a flat vector in `to_flat` order.
    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_len() {
            return Err(Error::Dim(format!(
                "flat length {} vs parameter count {}",
                flat.len(),
                self.param_len()
            )));
        }
        let (a, rest) = flat.split_at(self.w1.data().len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.data().len());
        self.w1.data_mut().copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.data_mut().copy_from_slice(c);
        self.b2.copy_from_slice(d);
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        self.w1.check_finite("w1")?;
        self.w2.check_finite("w2")?;
        if self.b1.iter().chain(&self.b2).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("model biases".into()))
        }
    }

    fn check_video(&self, video: &FeatureVideo) -> Result<()> {
        if video.audio.cols() != self.config.audio_dim
            || video.visual.cols() != self.config.visual_dim
            || video.num_classes() != self.config.num_classes
        {
            return Err(Error::Dim(format!(
                "video {} dims ({}a/{}v/{}c) do not match model ({}a/{}v/{}c)",
                video.id,
                video.audio.cols(),
                video.visual.cols(),
                video.num_classes(),
                self.config.audio_dim,
                self.config.visual_dim,
                self.config.num_classes
            )));
        }
        Ok(())
    }

    /// Forward pass keeping the intermediate activations for backward.
    pub fn forward(&self, video: &FeatureVideo) -> Result<ForwardCache> {
        self.check_video(video)?;
        let cfg = &self.config;
        let t = video.t();
        let r = cfg.context_radius as isize;
        let block = cfg.audio_dim + cfg.visual_dim;
        let mut inputs = DenseMatrix::zeros(t, cfg.input_dim());
        for seg in 0..t {
            let row = inputs.row_mut(seg);
            for (k, offset) in (-r..=r).enumerate() {
                let src = seg as isize + offset;
                if src < 0 || src >= t as isize {
                    continue; // zero padding
                }
                let src = src as usize;
                let base = k * block;
                row[base..base + cfg.audio_dim].copy_from_slice(video.audio.row(src));
                row[base + cfg.audio_dim..base + block].copy_from_slice(video.visual.row(src));
            }
        }
        let mut hidden_pre = DenseMatrix::zeros(t, cfg.hidden);
        let mut hidden = DenseMatrix::zeros(t, cfg.hidden);
        let mut scores = DenseMatrix::zeros(t, cfg.num_classes + 1);
        for seg in 0..t {
            self.w1.mul_vec(inputs.row(seg), hidden_pre.row_mut(seg));
            for (pre, b) in hidden_pre.row_mut(seg).iter_mut().zip(&self.b1) {
                *pre += b;
            }
            let pre_row = hidden_pre.row(seg).to_vec();
            let h_row = hidden.row_mut(seg);
            for (h, pre) in h_row.iter_mut().zip(&pre_row) {
                *h = pre.max(0.0);
            }
            self.w2.mul_vec(hidden.row(seg), scores.row_mut(seg));
            for (s, b) in scores.row_mut(seg).iter_mut().zip(&self.b2) {
                *s += b;
            }
        }
        Ok(ForwardCache {
            inputs,
            hidden_pre,
            hidden,
            scores,
        })
    }

    /// Raw per-segment scores for a video.
    pub fn forward_scores(&self, video: &FeatureVideo) -> Result<ScoreMatrix> {
        Ok(ScoreMatrix(self.forward(video)?.scores))
    }

    /// Accumulates parameter gradients for a given score-level gradient.
    /// Rows of `d_scores` that are all zero are skipped.
    pub fn backward(&self, cache: &ForwardCache, d_scores: &DenseMatrix, grads: &mut Gradients) {
        debug_assert_eq!(d_scores.rows(), cache.scores.rows());
        let hidden = self.config.hidden;
        let mut d_hidden = vec![0.0; hidden];
        for seg in 0..d_scores.rows() {
            let d_row = d_scores.row(seg);
            if d_row.iter().all(|v| *v == 0.0) {
                continue;
            }
            grads.w2.add_outer(d_row, cache.hidden.row(seg));
            for (g, d) in grads.b2.iter_mut().zip(d_row) {
                *g += d;
            }
            self.w2.mul_vec_transposed(d_row, &mut d_hidden);
            let pre = cache.hidden_pre.row(seg);
            for (dh, p) in d_hidden.iter_mut().zip(pre) {
                if *p <= 0.0 {
                    *dh = 0.0;
                }
            }
            grads.w1.add_outer(&d_hidden, cache.inputs.row(seg));
            for (g, d) in grads.b1.iter_mut().zip(&d_hidden) {
                *g += d;
            }
        }
    }

    /// Per-segment class predictions: row-wise argmax of the raw scores,
    /// ties broken toward the lowest class id.
    pub fn predict_segments(&self, video: &FeatureVideo) -> Result<Vec<usize>> {
        let scores = self.forward_scores(video)?;
        Ok((0..scores.segments())
            .map(|seg| {
                let row = scores.0.row(seg);
                let mut best = 0;
                for (c, v) in row.iter().enumerate().skip(1) {
                    if *v > row[best] {
                        best = c;
                    }
                }
                best + 1
            })
            .collect())
    }
}

impl Gradients {
    pub fn zeros(config: &ModelConfig) -> Self {
        Gradients {
            w1: DenseMatrix::zeros(config.hidden, config.input_dim()),
            b1: vec![0.0; config.hidden],
            w2: DenseMatrix::zeros(config.num_classes + 1, config.hidden),
            b2: vec![0.0; config.num_classes + 1],
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        let add = |dst: &mut [f64], src: &[f64]| {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        };
        add(self.w1.data_mut(), other.w1.data());
        add(&mut self.b1, &other.b1);
        add(self.w2.data_mut(), other.w2.data());
        add(&mut self.b2, &other.b2);
    }

    /// Flat view in the same order as [`ModelParams::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat =
            Vec::with_capacity(self.w1.data().len() + self.b1.len() + self.w2.data().len() + self.b2.len());
        flat.extend_from_slice(self.w1.data());
        flat.extend_from_slice(&self.b1);
        flat.extend_from_slice(self.w2.data());
        flat.extend_from_slice(&self.b2);
        flat
    }
}

/// Activations kept from a forward pass for the manual backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: DenseMatrix,
    pub hidden_pre: DenseMatrix,
    pub hidden: DenseMatrix,
    pub scores: DenseMatrix,
}

/// Bag-level probability vector over a window: softmax of the column-wise
/// max of the score rows inside the window. The full window reproduces the
/// video-level prediction.
pub fn video_prediction(scores: &ScoreMatrix, window: Window) -> Result<Vec<f64>> {
    let (lo, hi) = window.rows();
    let (pooled, _) = maxpool_cols_range(scores.as_matrix(), lo, hi)?;
    softmax(&pooled)
}

/// Bag loss over one window: binary cross-entropy between the windowed
/// prediction and a 0/1 target vector. Adds `scale` times the loss
/// gradient into `d_scores` (each class routes to its argmax row) and
/// returns the unscaled loss.
pub fn windowed_bag_loss(
    scores: &DenseMatrix,
    window: Window,
    target: &[f64],
    scale: f64,
    d_scores: &mut DenseMatrix,
) -> Result<f64> {
    let (lo, hi) = window.rows();
    let (pooled, argmax) = maxpool_cols_range(scores, lo, hi)?;
    let probs = softmax(&pooled)?;
    let (loss, d_probs) = bce_probs_grad(&probs, target)?;
    let d_logits = softmax_grad(&probs, &d_probs);
    for (class, d) in d_logits.iter().enumerate() {
        let row = argmax[class];
        d_scores.set(row, class, d_scores.get(row, class) + scale * d);
    }
    Ok(loss)
}

/// The weak-supervision training loss: bag loss over the full video
/// against the video-level label vector, with parameter gradients.
pub fn mil_loss(params: &ModelParams, video: &FeatureVideo) -> Result<(f64, Gradients)> {
    let cache = params.forward(video)?;
    let target = video.video_label.as_targets();
    let mut d_scores = DenseMatrix::zeros(cache.scores.rows(), cache.scores.cols());
    let loss = windowed_bag_loss(
        &cache.scores,
        Window::full(video.t()),
        &target,
        1.0,
        &mut d_scores,
    )?;
    let mut grads = Gradients::zeros(&params.config);
    params.backward(&cache, &d_scores, &mut grads);
    Ok((loss, grads))
}

impl VideoLevelPredictor for ModelParams {
    fn predict_video_probs(&self, video: &FeatureVideo) -> Result<Vec<f64>> {
        let scores = self.forward_scores(video)?;
        video_prediction(&scores, Window::full(video.t()))
    }
}

const CKPT_MAGIC: &str = "avel-checkpoint";
const CKPT_VERSION: &str = "v1";

/// Writes model weights with a versioned header; floats use the shortest
/// round-trip representation so load recovers them bit for bit.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    let cfg = &params.config;
    let mut out = String::new();
    writeln!(out, "{CKPT_MAGIC} {CKPT_VERSION}").unwrap();
    writeln!(
        out,
        "config audio_dim={} visual_dim={} hidden={} num_classes={} context_radius={} seed={}",
        cfg.audio_dim, cfg.visual_dim, cfg.hidden, cfg.num_classes, cfg.context_radius, cfg.seed
    )
    .unwrap();
    let write_matrix = |out: &mut String, name: &str, m: &DenseMatrix| {
        writeln!(out, "matrix {name} {} {}", m.rows(), m.cols()).unwrap();
        for r in 0..m.rows() {
            let mut line = String::new();
            push_floats(&mut line, m.row(r));
            writeln!(out, "{}", line.trim_start()).unwrap();
        }
    };
    let write_vector = |out: &mut String, name: &str, v: &[f64]| {
        writeln!(out, "vector {name} {}", v.len()).unwrap();
        let mut line = String::new();
        push_floats(&mut line, v);
        writeln!(out, "{}", line.trim_start()).unwrap();
    };
    write_matrix(&mut out, "w1", &params.w1);
    write_vector(&mut out, "b1", &params.b1);
    write_matrix(&mut out, "w2", &params.w2);
    write_vector(&mut out, "b2", &params.b2);
    out.push_str("end\n");
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let mut reader = LineReader::open(path)?;
    reader.expect_header(CKPT_MAGIC, CKPT_VERSION)?;
    let cfg_line = reader.next_line()?;
    let kv = parse_kv_line(&cfg_line, "config", &reader.context())?;
    let ctx = reader.context();
    let config = ModelConfig {
        audio_dim: kv.get_parsed("audio_dim", &ctx)?,
        visual_dim: kv.get_parsed("visual_dim", &ctx)?,
        hidden: kv.get_parsed("hidden", &ctx)?,
        num_classes: kv.get_parsed("num_classes", &ctx)?,
        context_radius: kv.get_parsed("context_radius", &ctx)?,
        seed: kv.get_parsed("seed", &ctx)?,
    };
    config.validate().map_err(|e| reader.error(e.to_string()))?;

    let mut params = ModelParams::zeros(&config);
    let read_matrix =
        |reader: &mut LineReader, name: &str, m: &mut DenseMatrix| -> Result<()> {
            let header = reader.next_line()?;
            let mut fields = header.split_whitespace();
            if fields.next() != Some("matrix") || fields.next() != Some(name) {
                return Err(reader.error(format!("expected matrix {name}")));
            }
            let rows: usize = reader.parse_field(fields.next(), "rows")?;
            let cols: usize = reader.parse_field(fields.next(), "cols")?;
            if rows != m.rows() || cols != m.cols() {
                return Err(reader.error(format!(
                    "matrix {name} is {rows}x{cols}, config implies {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            for r in 0..rows {
                let line = reader.next_line()?;
                let row = reader.parse_floats(
                    line.split_whitespace(),
                    cols,
                    &format!("{name} row {}", r + 1),
                )?;
                m.row_mut(r).copy_from_slice(&row);
            }
            Ok(())
        };
    let read_vector = |reader: &mut LineReader, name: &str, v: &mut [f64]| -> Result<()> {
        let header = reader.next_line()?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("vector") || fields.next() != Some(name) {
            return Err(reader.error(format!("expected vector {name}")));
        }
        let len: usize = reader.parse_field(fields.next(), "len")?;
        if len != v.len() {
            return Err(reader.error(format!(
                "vector {name} has length {len}, config implies {}",
                v.len()
            )));
        }
        let line = reader.next_line()?;
        let vals = reader.parse_floats(line.split_whitespace(), len, name)?;
        v.copy_from_slice(&vals);
        Ok(())
    };
    read_matrix(&mut reader, "w1", &mut params.w1)?;
    read_vector(&mut reader, "b1", &mut params.b1)?;
    read_matrix(&mut reader, "w2", &mut params.w2)?;
    read_vector(&mut reader, "b2", &mut params.b2)?;
    let end = reader.next_line()?;
    if end.trim() != "end" {
        return Err(reader.error("expected 'end'".into()));
    }
    params.check_finite()?;
    Ok(params)
}

/// Targets a loss on flattened parameters, for gradient checking.
pub fn loss_on_flat<F>(template: &ModelParams, flat: &[f64], loss: F) -> Result<f64>
where
    F: Fn(&ModelParams) -> Result<f64>,
{
    let mut params = template.clone();
    params.set_from_flat(flat)?;
    loss(&params)
}
