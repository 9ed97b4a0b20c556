//! Sliding-window label refinement.
//!
//! The pure set-algebra layer (label sets and vectors, window schedules,
//! the label-set identity behind refinement), synthetic-video composition,
//! and the refinement pass that turns a trained video-level predictor into
//! localized window labels.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::datagen::{disjoint_partner, Corpus, FeatureVideo};
use crate::error::{Error, Result};
use crate::numkit::{derive_seed, Rng};
use crate::textio::{parse_kv_line, LineReader};

/// Set of audio-visual event classes (ids in `[1, C]`, background excluded).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelSet(BTreeSet<usize>);

impl LabelSet {
    pub fn empty() -> Self {
        LabelSet(BTreeSet::new())
    }

    pub fn from_classes(classes: impl IntoIterator<Item = usize>) -> Self {
        LabelSet(classes.into_iter().collect())
    }

    /// Event classes occurring in `segment_labels[lo..hi]` (0-based, half
    /// open), where values in `[1, C]` are events and `C+1` is background.
    pub fn from_segments(segment_labels: &[usize], lo: usize, hi: usize, c: usize) -> Self {
        LabelSet(
            segment_labels[lo..hi]
                .iter()
                .copied()
                .filter(|&y| y <= c)
                .collect(),
        )
    }

    pub fn contains(&self, class: usize) -> bool {
        self.0.contains(&class)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_disjoint(&self, other: &LabelSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn union(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.union(&other.0).copied().collect())
    }

    pub fn intersection(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// `{0,1}^(C+1)` form; the background bit is set exactly when the set
    /// is empty.
    pub fn to_vector(&self, c: usize) -> LabelVector {
        let mut bits = vec![false; c + 1];
        for class in self.iter() {
            debug_assert!(class >= 1 && class <= c);
            bits[class - 1] = true;
        }
        if self.is_empty() {
            bits[c] = true;
        }
        LabelVector(bits)
    }
}

/// A `{0,1}^(C+1)` label vector; indices `0..C` are event classes `1..=C`
/// and index `C` is the background bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<bool>);

impl LabelVector {
    pub fn new(bits: Vec<bool>) -> Self {
        LabelVector(bits)
    }

    /// Number of event classes C (vector length minus the background bit).
    pub fn num_classes(&self) -> usize {
        self.0.len() - 1
    }

    pub fn background(&self) -> bool {
        self.0[self.0.len() - 1]
    }

    /// Whether event class `class` (1-based) is present.
    pub fn has_class(&self, class: usize) -> bool {
        self.0[class - 1]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Event classes only, dropping the background bit.
    pub fn event_set(&self) -> LabelSet {
        LabelSet(
            self.0[..self.0.len() - 1]
                .iter()
                .enumerate()
                .filter(|(_, b)| **b)
                .map(|(i, _)| i + 1)
                .collect(),
        )
    }

    /// 0/1 targets for the loss functions.
    pub fn as_targets(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// A window of `len` consecutive segments starting at 1-based segment
/// `start`, i.e. segments `[start, start+len-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn new(start: usize, len: usize) -> Self {
        debug_assert!(start >= 1 && len >= 1);
        Window { start, len }
    }

    pub fn full(t: usize) -> Self {
        Window { start: 1, len: t }
    }

    /// Last segment covered (1-based, inclusive).
    pub fn end(&self) -> usize {
        self.start + self.len - 1
    }

    pub fn contains(&self, segment: usize) -> bool {
        segment >= self.start && segment <= self.end()
    }

    /// 0-based row range `[lo, hi)` for indexing segment arrays.
    pub fn rows(&self) -> (usize, usize) {
        (self.start - 1, self.start - 1 + self.len)
    }
}

/// The sliding-window plan for one video length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowSchedule {
    pub t: usize,
    pub n: usize,
    pub s: usize,
    /// 1-based window start positions `{1, 1+s, ..., T-N+1}`.
    pub starts: Vec<usize>,
    /// Number of window placements `(T-N)/s + 1`.
    pub t1_count: usize,
    /// How many windows cover each segment (index 0 = segment 1).
    pub coverage: Vec<usize>,
    /// Whether the schedule supports the auxiliary objective, i.e.
    /// `T - N + 1 > N` so the window complements jointly cover everything.
    pub aux_valid: bool,
}

impl WindowSchedule {
    pub fn windows(&self) -> impl Iterator<Item = Window> + '_ {
        self.starts.iter().map(|&t1| Window::new(t1, self.n))
    }
}

/// Builds the window schedule for window size `n` and stride `s` over `t`
/// segments. The stride must divide `t - n` so the first window starts at
/// segment 1 and the last ends at segment `t`, and must not exceed `n` so
/// no segment falls between windows.
pub fn make_schedule(t: usize, n: usize, s: usize) -> Result<WindowSchedule> {
    if t == 0 || n == 0 || n > t {
        return Err(Error::Schedule(format!(
            "window size N={n} outside [1, T={t}]"
        )));
    }
    if s == 0 {
        return Err(Error::Schedule("stride s must be at least 1".into()));
    }
    if (t - n) % s != 0 {
        return Err(Error::Schedule(format!(
            "stride {s} does not divide T-N = {}",
            t - n
        )));
    }
    if s > n {
        return Err(Error::Schedule(format!(
            "stride {s} exceeds window size {n}; segments between windows would never be covered"
        )));
    }
    let starts: Vec<usize> = (1..=t - n + 1).step_by(s).collect();
    let t1_count = (t - n) / s + 1;
    debug_assert_eq!(starts.len(), t1_count);
    let mut coverage = vec![0usize; t];
    for &t1 in &starts {
        for seg in t1..=t1 + n - 1 {
            coverage[seg - 1] += 1;
        }
    }
    debug_assert!(coverage.iter().all(|&c| c >= 1));
    Ok(WindowSchedule {
        t,
        n,
        s,
        starts,
        t1_count,
        coverage,
        aux_valid: t - n + 1 > n,
    })
}

/// The identity behind window-label refinement, computed symbolically:
///
/// ```text
/// L_i  intersect  ( L_i[window]  union  L_j[window complement] )
/// ```
///
/// When `l_i` and `l_j` are disjoint this equals `L_i[window]` read
/// directly off the segment labels, which is what the refinement pass
/// estimates with model predictions instead of ground truth.
pub fn label_set_identity(
    l_i: &LabelSet,
    l_j: &LabelSet,
    window: Window,
    true_seg_labels_i: &[usize],
    true_seg_labels_j: &[usize],
    c: usize,
) -> Result<LabelSet> {
    if !l_i.is_disjoint(l_j) {
        return Err(Error::Precondition(format!(
            "label sets overlap on {:?}",
            l_i.intersection(l_j)
        )));
    }
    let t = true_seg_labels_i.len();
    if true_seg_labels_j.len() != t || window.end() > t {
        return Err(Error::Dim(format!(
            "window [{}, {}] or labels do not fit T={t}",
            window.start,
            window.end()
        )));
    }
    let (lo, hi) = window.rows();
    let in_window_i = LabelSet::from_segments(true_seg_labels_i, lo, hi, c);
    let before_j = LabelSet::from_segments(true_seg_labels_j, 0, lo, c);
    let after_j = LabelSet::from_segments(true_seg_labels_j, hi, t, c);
    let complement_j = before_j.union(&after_j);
    Ok(l_i.intersection(&in_window_i.union(&complement_j)))
}

/// A synthetic video plus the mask recording which segments came from the
/// primary video.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedVideo {
    pub video: FeatureVideo,
    /// `true` where the segment was retained from `video_i`.
    pub provenance: Vec<bool>,
}

/// Splices two videos: segments inside `window` come from `video_i`, the
/// complement from `video_j`. The composition's segment labels are derived
/// from the sources so tests can check against ground truth; they are
/// never shown to a model.
pub fn compose_synthetic(
    video_i: &FeatureVideo,
    video_j: &FeatureVideo,
    window: Window,
) -> Result<ComposedVideo> {
    if video_i.t() != video_j.t()
        || video_i.audio.cols() != video_j.audio.cols()
        || video_i.visual.cols() != video_j.visual.cols()
    {
        return Err(Error::Dim(format!(
            "cannot compose {} ({}x{}/{}) with {} ({}x{}/{})",
            video_i.id,
            video_i.t(),
            video_i.audio.cols(),
            video_i.visual.cols(),
            video_j.id,
            video_j.t(),
            video_j.audio.cols(),
            video_j.visual.cols()
        )));
    }
    let t = video_i.t();
    if window.end() > t {
        return Err(Error::Dim(format!(
            "window [{}, {}] does not fit T={t}",
            window.start,
            window.end()
        )));
    }
    let c = video_i.num_classes();
    let mut composed = video_i.clone();
    composed.id = format!("{}~{}@{}", video_i.id, video_j.id, window.start);
    let mut provenance = vec![false; t];
    for seg in 1..=t {
        let retained = window.contains(seg);
        provenance[seg - 1] = retained;
        if !retained {
            let r = seg - 1;
            composed
                .audio
                .row_mut(r)
                .copy_from_slice(video_j.audio.row(r));
            composed
                .visual
                .row_mut(r)
                .copy_from_slice(video_j.visual.row(r));
            composed.segment_labels[r] = video_j.segment_labels[r];
        }
    }
    composed.video_label = LabelSet::from_segments(&composed.segment_labels, 0, t, c).to_vector(c);
    Ok(ComposedVideo {
        video: composed,
        provenance,
    })
}

/// Anything that can produce a video-level probability vector over the
/// `C+1` classes. Implemented by trained model parameters; tests plug in
/// oracles.
pub trait VideoLevelPredictor {
    fn predict_video_probs(&self, video: &FeatureVideo) -> Result<Vec<f64>>;
}

/// Refined window labels for a set of videos under one `(N, s, tau)`
/// choice. Keyed by `(video id, window start)` so iteration order is
/// stable no matter how entries were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedLabels {
    pub tau: f64,
    pub n: usize,
    pub s: usize,
    pub t: usize,
    pub entries: BTreeMap<(String, usize), LabelVector>,
}

impl RefinedLabels {
    pub fn new(tau: f64, schedule: &WindowSchedule) -> Self {
        RefinedLabels {
            tau,
            n: schedule.n,
            s: schedule.s,
            t: schedule.t,
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, video_id: &str, t1: usize) -> Option<&LabelVector> {
        self.entries.get(&(video_id.to_string(), t1))
    }
}

/// Estimates localized labels for every window of `video_i`.
///
/// One label-disjoint partner is sampled for the whole video; for each
/// window start the composed video is scored by the predictor, the
/// probabilities are masked by the video-level label vector, and classes
/// with masked probability at least `tau` form the window's label set
/// (background bit set when the set is empty).
pub fn refine_video(
    predictor: &dyn VideoLevelPredictor,
    corpus: &Corpus,
    video_i: &FeatureVideo,
    schedule: &WindowSchedule,
    tau: f64,
    rng: &mut Rng,
) -> Result<Vec<(usize, LabelVector)>> {
    if !(0.0 < tau && tau < 1.0) {
        return Err(Error::Precondition(format!("tau {tau} outside (0, 1)")));
    }
    if schedule.t != video_i.t() {
        return Err(Error::Dim(format!(
            "schedule T={} vs video T={}",
            schedule.t,
            video_i.t()
        )));
    }
    let c = video_i.num_classes();
    let partner = disjoint_partner(corpus, video_i, rng)?;
    let mask = video_i.video_label.as_targets();
    let mut out = Vec::with_capacity(schedule.t1_count);
    for window in schedule.windows() {
        let composed = compose_synthetic(video_i, partner, window)?;
        let probs = predictor.predict_video_probs(&composed.video)?;
        if probs.len() != c + 1 {
            return Err(Error::Dim(format!(
                "predictor returned {} probabilities, expected {}",
                probs.len(),
                c + 1
            )));
        }
        let kept = LabelSet::from_classes(
            (1..=c).filter(|&class| mask[class - 1] * probs[class - 1] >= tau),
        );
        out.push((window.start, kept.to_vector(c)));
    }
    Ok(out)
}

/// Runs `refine_video` over every training video. Per-video RNG streams
/// are derived from `(root_seed, video id)` so the result does not depend
/// on iteration order.
pub fn refine_corpus(
    predictor: &dyn VideoLevelPredictor,
    corpus: &Corpus,
    schedule: &WindowSchedule,
    tau: f64,
    root_seed: u64,
) -> Result<RefinedLabels> {
    let mut refined = RefinedLabels::new(tau, schedule);
    for video in &corpus.train {
        let mut rng = Rng::new(derive_seed(root_seed, "refine", stable_id_hash(&video.id)));
        for (t1, vector) in refine_video(predictor, corpus, video, schedule, tau, &mut rng)? {
            refined.entries.insert((video.id.clone(), t1), vector);
        }
    }
    Ok(refined)
}

fn stable_id_hash(id: &str) -> u64 {
    derive_seed(0, id, 0)
}

const REFINED_MAGIC: &str = "avel-refined";
const REFINED_VERSION: &str = "v1";

/// Writes refined labels as line-delimited records with a versioned header.
pub fn save_refined(refined: &RefinedLabels, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{REFINED_MAGIC} {REFINED_VERSION}").unwrap();
    writeln!(
        out,
        "params tau={} n={} s={} t={}",
        refined.tau, refined.n, refined.s, refined.t
    )
    .unwrap();
    for ((video_id, t1), vector) in &refined.entries {
        write!(out, "window {video_id} {t1}").unwrap();
        for bit in vector.bits() {
            write!(out, " {}", u8::from(*bit)).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_refined(path: &Path) -> Result<RefinedLabels> {
    let mut reader = LineReader::open(path)?;
    reader.expect_header(REFINED_MAGIC, REFINED_VERSION)?;
    let params = reader.next_line()?;
    let kv = parse_kv_line(&params, "params", &reader.context())?;
    let tau: f64 = kv.get_parsed("tau", &reader.context())?;
    let n: usize = kv.get_parsed("n", &reader.context())?;
    let s: usize = kv.get_parsed("s", &reader.context())?;
    let t: usize = kv.get_parsed("t", &reader.context())?;
    let mut entries = BTreeMap::new();
    while let Some(line) = reader.try_next_line()? {
        let mut fields = line.split_whitespace();
        let tag = fields.next().unwrap_or_default();
        if tag != "window" {
            return Err(reader.error(format!("expected 'window' record, found {tag:?}")));
        }
        let video_id = fields
            .next()
            .ok_or_else(|| reader.error("missing video id".into()))?
            .to_string();
        let t1: usize = reader.parse_field(fields.next(), "t1")?;
        let mut bits = Vec::new();
        for field in fields {
            bits.push(match field {
                "0" => false,
                "1" => true,
                other => return Err(reader.error(format!("label bit must be 0/1, got {other:?}"))),
            });
        }
        if bits.is_empty() {
            return Err(reader.error("empty label vector".into()));
        }
        entries.insert((video_id, t1), LabelVector::new(bits));
    }
    Ok(RefinedLabels {
        tau,
        n,
        s,
        t,
        entries,
    })
}
