//! Synthetic corpus generation and serialization.
//!
//! Videos are `T` segments of paired audio/visual feature vectors with
//! known segment-level labels, so every weakly-supervised result can be
//! checked against ground truth. Event videos carry a single event class
//! on one contiguous run of segments; everything else is background, drawn
//! either from pure noise or from a modality-mismatch distribution where
//! only one of the two streams carries a class prototype (events that are
//! audible or visible but not both are background by definition).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, Rng};
use crate::refine::{LabelSet, LabelVector};
use crate::textio::{parse_kv_line, push_floats, LineReader};

/// Which list of a corpus a video belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// A `T`-segment video: per-segment audio and visual feature vectors,
/// ground-truth segment labels (`1..=C` events, `C+1` background), and the
/// video-level label vector derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVideo {
    pub id: String,
    /// `T x d_a` audio features, one row per segment.
    pub audio: DenseMatrix,
    /// `T x d_v` visual features, one row per segment.
    pub visual: DenseMatrix,
    /// Ground-truth class id per segment.
    pub segment_labels: Vec<usize>,
    /// `{0,1}^(C+1)` presence vector; bit `C+1` is set exactly when no
    /// segment carries an event.
    pub video_label: LabelVector,
}

impl FeatureVideo {
    pub fn t(&self) -> usize {
        self.segment_labels.len()
    }

    pub fn num_classes(&self) -> usize {
        self.video_label.num_classes()
    }

    /// Event classes present anywhere in the video.
    pub fn label_set(&self) -> LabelSet {
        self.video_label.event_set()
    }

    /// Recomputes the video-level vector from the segment labels; equality
    /// with the stored vector is a structural invariant.
    pub fn derived_video_label(&self) -> LabelVector {
        LabelSet::from_segments(&self.segment_labels, 0, self.t(), self.num_classes())
            .to_vector(self.num_classes())
    }
}

/// Parameters of a synthetic corpus.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusSpec {
    pub train_events: usize,
    pub val_events: usize,
    pub test_events: usize,
    /// Videos with no audio-visual event at all; they join the train list
    /// and make label-disjoint partner sampling trivial.
    pub background_videos: usize,
    /// Segments per video (T).
    pub segments: usize,
    /// Event classes (C); background is class C+1.
    pub num_classes: usize,
    pub audio_dim: usize,
    pub visual_dim: usize,
    /// Isotropic Gaussian noise added to every feature coordinate.
    pub noise_sigma: f64,
    /// Norm of each class prototype.
    pub prototype_scale: f64,
    /// Shortest allowed event run, in segments.
    pub min_event_len: usize,
    /// Fraction of event videos whose event spans all T segments; the
    /// rest draw a window uniformly among the valid shorter placements.
    pub full_event_rate: f64,
    /// Probability that a non-event segment carries a one-modality
    /// prototype instead of pure noise.
    pub mismatch_rate: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            train_events: 300,
            val_events: 50,
            test_events: 50,
            background_videos: 30,
            segments: 10,
            num_classes: 6,
            audio_dim: 16,
            visual_dim: 16,
            noise_sigma: 0.3,
            prototype_scale: 1.0,
            min_event_len: 2,
            full_event_rate: 0.8,
            mismatch_rate: 0.2,
            seed: 1,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.train_events == 0 {
            return Err(Error::Spec("need at least one training event video".into()));
        }
        if self.segments == 0 || self.audio_dim == 0 || self.visual_dim == 0 {
            return Err(Error::Spec("segments and feature dims must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Spec("need at least two event classes".into()));
        }
        if self.min_event_len < 2 || self.min_event_len > self.segments {
            return Err(Error::Spec(format!(
                "min event length {} outside [2, T={}]",
                self.min_event_len, self.segments
            )));
        }
        if !(0.0..=1.0).contains(&self.mismatch_rate) || !(0.0..=1.0).contains(&self.full_event_rate)
        {
            return Err(Error::Spec("rates must lie in [0, 1]".into()));
        }
        if self.noise_sigma < 0.0 || self.prototype_scale <= 0.0 {
            return Err(Error::Spec("noise must be >= 0 and prototype scale > 0".into()));
        }
        Ok(())
    }
}

/// A generated corpus: immutable video lists plus the spec that produced
/// them. Background videos live in the train list.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub train: Vec<FeatureVideo>,
    pub val: Vec<FeatureVideo>,
    pub test: Vec<FeatureVideo>,
}

impl Corpus {
    pub fn all_videos(&self) -> impl Iterator<Item = &FeatureVideo> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    /// Fraction of background segments over the given videos.
    pub fn background_fraction(videos: &[FeatureVideo]) -> f64 {
        let mut total = 0usize;
        let mut bg = 0usize;
        for v in videos {
            let c = v.num_classes();
            total += v.t();
            bg += v.segment_labels.iter().filter(|&&y| y > c).count();
        }
        if total == 0 {
            0.0
        } else {
            bg as f64 / total as f64
        }
    }

    /// Histogram of event-run lengths over all videos (index = length).
    pub fn event_length_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.spec.segments + 1];
        for v in self.all_videos() {
            let c = v.num_classes();
            let len = v.segment_labels.iter().filter(|&&y| y <= c).count();
            if len > 0 {
                hist[len] += 1;
            }
        }
        hist
    }
}

/// Per-class unit prototypes for one modality, scaled to `prototype_scale`.
fn draw_prototypes(rng: &mut Rng, classes: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|_| {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.next_normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            for x in &mut v {
                *x *= scale / norm;
            }
            v
        })
        .collect()
}

struct Generator<'a> {
    spec: &'a CorpusSpec,
    audio_protos: Vec<Vec<f64>>,
    visual_protos: Vec<Vec<f64>>,
}

impl Generator<'_> {
    fn noise_row(&self, rng: &mut Rng, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|_| self.spec.noise_sigma * rng.next_normal())
            .collect()
    }

    fn proto_row(&self, rng: &mut Rng, proto: &[f64]) -> Vec<f64> {
        proto
            .iter()
            .map(|p| p + self.spec.noise_sigma * rng.next_normal())
            .collect()
    }

    /// Fills one background segment: pure noise in both modalities, or,
    /// with probability `mismatch_rate`, a uniformly drawn class prototype
    /// carried by one modality only (an event that is audible or visible
    /// but not both is background by definition).
    fn background_segment(&self, rng: &mut Rng) -> (Vec<f64>, Vec<f64>) {
        if rng.next_f64() < self.spec.mismatch_rate {
            let class = 1 + rng.next_range(self.spec.num_classes);
            let audio_side = rng.next_u64() & 1 == 0;
            if audio_side {
                (
                    self.proto_row(rng, &self.audio_protos[class - 1]),
                    self.noise_row(rng, self.spec.visual_dim),
                )
            } else {
                (
                    self.noise_row(rng, self.spec.audio_dim),
                    self.proto_row(rng, &self.visual_protos[class - 1]),
                )
            }
        } else {
            (
                self.noise_row(rng, self.spec.audio_dim),
                self.noise_row(rng, self.spec.visual_dim),
            )
        }
    }

    /// Draws the event run `[a, b]` (1-based): the full video with
    /// probability `full_event_rate`, otherwise uniform among all valid
    /// windows of length `min_event_len..T`.
    fn draw_event_window(&self, rng: &mut Rng) -> (usize, usize) {
        let t = self.spec.segments;
        let min_len = self.spec.min_event_len;
        if min_len == t || rng.next_f64() < self.spec.full_event_rate {
            return (1, t);
        }
        let total: usize = (min_len..t).map(|len| t - len + 1).sum();
        let mut idx = rng.next_range(total);
        for len in min_len..t {
            let placements = t - len + 1;
            if idx < placements {
                return (idx + 1, idx + len);
            }
            idx -= placements;
        }
        unreachable!("window index within total placements");
    }

    fn event_video(&self, rng: &mut Rng, id: String) -> FeatureVideo {
        let spec = self.spec;
        let t = spec.segments;
        let class = 1 + rng.next_range(spec.num_classes);
        let (a, b) = self.draw_event_window(rng);
        let mut audio = DenseMatrix::zeros(t, spec.audio_dim);
        let mut visual = DenseMatrix::zeros(t, spec.visual_dim);
        let mut labels = vec![spec.num_classes + 1; t];
        for seg in 1..=t {
            let r = seg - 1;
            if seg >= a && seg <= b {
                audio
                    .row_mut(r)
                    .copy_from_slice(&self.proto_row(rng, &self.audio_protos[class - 1]));
                visual
                    .row_mut(r)
                    .copy_from_slice(&self.proto_row(rng, &self.visual_protos[class - 1]));
                labels[r] = class;
            } else {
                let (ar, vr) = self.background_segment(rng);
                audio.row_mut(r).copy_from_slice(&ar);
                visual.row_mut(r).copy_from_slice(&vr);
            }
        }
        let video_label =
            LabelSet::from_segments(&labels, 0, t, spec.num_classes).to_vector(spec.num_classes);
        FeatureVideo {
            id,
            audio,
            visual,
            segment_labels: labels,
            video_label,
        }
    }

    fn background_video(&self, rng: &mut Rng, id: String) -> FeatureVideo {
        let spec = self.spec;
        let t = spec.segments;
        let mut audio = DenseMatrix::zeros(t, spec.audio_dim);
        let mut visual = DenseMatrix::zeros(t, spec.visual_dim);
        for r in 0..t {
            let (ar, vr) = self.background_segment(rng);
            audio.row_mut(r).copy_from_slice(&ar);
            visual.row_mut(r).copy_from_slice(&vr);
        }
        let labels = vec![spec.num_classes + 1; t];
        FeatureVideo {
            id,
            audio,
            visual,
            segment_labels: labels,
            video_label: LabelSet::empty().to_vector(spec.num_classes),
        }
    }
}

/// Generates a corpus from a spec. The single RNG stream is seeded from
/// `spec.seed`, so identical specs produce bitwise-identical corpora.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let gen = Generator {
        spec,
        audio_protos: draw_prototypes(
            &mut rng,
            spec.num_classes,
            spec.audio_dim,
            spec.prototype_scale,
        ),
        visual_protos: draw_prototypes(
            &mut rng,
            spec.num_classes,
            spec.visual_dim,
            spec.prototype_scale,
        ),
    };
    let make_events = |n: usize, prefix: &str, rng: &mut Rng| -> Vec<FeatureVideo> {
        (0..n)
            .map(|i| gen.event_video(rng, format!("{prefix}{:04}", i + 1)))
            .collect()
    };
    let mut train = make_events(spec.train_events, "ev-train-", &mut rng);
    let val = make_events(spec.val_events, "ev-val-", &mut rng);
    let test = make_events(spec.test_events, "ev-test-", &mut rng);
    for i in 0..spec.background_videos {
        train.push(gen.background_video(&mut rng, format!("bg-train-{:04}", i + 1)));
    }
    Ok(Corpus {
        spec: spec.clone(),
        train,
        val,
        test,
    })
}

/// Samples a video whose label set is disjoint from `video`'s, from the
/// corpus's train list. Background videos are preferred when any exist,
/// since their empty label sets are disjoint from everything.
pub fn disjoint_partner<'c>(
    corpus: &'c Corpus,
    video: &FeatureVideo,
    rng: &mut Rng,
) -> Result<&'c FeatureVideo> {
    let own = video.label_set();
    let candidates: Vec<&FeatureVideo> = corpus
        .train
        .iter()
        .filter(|v| v.id != video.id && own.is_disjoint(&v.label_set()))
        .collect();
    if candidates.is_empty() {
        return Err(Error::NoDisjointPartner {
            video: video.id.clone(),
            blocking: own.iter().collect(),
        });
    }
    let backgrounds: Vec<&&FeatureVideo> = candidates
        .iter()
        .filter(|v| v.label_set().is_empty())
        .collect();
    if backgrounds.is_empty() {
        Ok(candidates[rng.next_range(candidates.len())])
    } else {
        Ok(backgrounds[rng.next_range(backgrounds.len())])
    }
}

const CORPUS_MAGIC: &str = "avel-corpus";
const CORPUS_VERSION: &str = "v1";

/// Writes a corpus as line-delimited text. Per video the record order is:
/// `video <id> <split>`, `y` (T segment labels), `Y` (C+1 bits), `a`
/// rows (T x d_a floats), `v` rows (T x d_v floats), `end`.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let spec = &corpus.spec;
    let mut out = String::new();
    writeln!(out, "{CORPUS_MAGIC} {CORPUS_VERSION}").unwrap();
    writeln!(
        out,
        "spec train_events={} val_events={} test_events={} background_videos={} segments={} \
         num_classes={} audio_dim={} visual_dim={} noise_sigma={} prototype_scale={} \
         min_event_len={} full_event_rate={} mismatch_rate={} seed={}",
        spec.train_events,
        spec.val_events,
        spec.test_events,
        spec.background_videos,
        spec.segments,
        spec.num_classes,
        spec.audio_dim,
        spec.visual_dim,
        spec.noise_sigma,
        spec.prototype_scale,
        spec.min_event_len,
        spec.full_event_rate,
        spec.mismatch_rate,
        spec.seed
    )
    .unwrap();
    let write_split = |out: &mut String, videos: &[FeatureVideo], split: Split| {
        for v in videos {
            writeln!(out, "video {} {}", v.id, split.as_str()).unwrap();
            out.push('y');
            for y in &v.segment_labels {
                write!(out, " {y}").unwrap();
            }
            out.push('\n');
            out.push('Y');
            for bit in v.video_label.bits() {
                write!(out, " {}", u8::from(*bit)).unwrap();
            }
            out.push('\n');
            for r in 0..v.t() {
                out.push('a');
                push_floats(out, v.audio.row(r));
                out.push('\n');
            }
            for r in 0..v.t() {
                out.push('v');
                push_floats(out, v.visual.row(r));
                out.push('\n');
            }
            out.push_str("end\n");
        }
    };
    write_split(&mut out, &corpus.train, Split::Train);
    write_split(&mut out, &corpus.val, Split::Val);
    write_split(&mut out, &corpus.test, Split::Test);
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let mut reader = LineReader::open(path)?;
    reader.expect_header(CORPUS_MAGIC, CORPUS_VERSION)?;
    let spec_line = reader.next_line()?;
    let kv = parse_kv_line(&spec_line, "spec", &reader.context())?;
    let ctx = reader.context();
    let spec = CorpusSpec {
        train_events: kv.get_parsed("train_events", &ctx)?,
        val_events: kv.get_parsed("val_events", &ctx)?,
        test_events: kv.get_parsed("test_events", &ctx)?,
        background_videos: kv.get_parsed("background_videos", &ctx)?,
        segments: kv.get_parsed("segments", &ctx)?,
        num_classes: kv.get_parsed("num_classes", &ctx)?,
        audio_dim: kv.get_parsed("audio_dim", &ctx)?,
        visual_dim: kv.get_parsed("visual_dim", &ctx)?,
        noise_sigma: kv.get_parsed("noise_sigma", &ctx)?,
        prototype_scale: kv.get_parsed("prototype_scale", &ctx)?,
        min_event_len: kv.get_parsed("min_event_len", &ctx)?,
        full_event_rate: kv.get_parsed("full_event_rate", &ctx)?,
        mismatch_rate: kv.get_parsed("mismatch_rate", &ctx)?,
        seed: kv.get_parsed("seed", &ctx)?,
    };
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    while let Some(line) = reader.try_next_line()? {
        let mut fields = line.split_whitespace();
        let tag = fields.next().unwrap_or_default();
        if tag != "video" {
            return Err(reader.error(format!("expected 'video' record, found {tag:?}")));
        }
        let id = reader
            .parse_field::<String>(fields.next(), "id")?
            .to_string();
        let split_raw: String = reader.parse_field(fields.next(), "split")?;
        let split = Split::parse(&split_raw)
            .ok_or_else(|| reader.error(format!("unknown split {split_raw:?}")))?;
        let video = read_video(&mut reader, &spec, id)?;
        match split {
            Split::Train => train.push(video),
            Split::Val => val.push(video),
            Split::Test => test.push(video),
        }
    }
    Ok(Corpus {
        spec,
        train,
        val,
        test,
    })
}

fn read_video(reader: &mut LineReader, spec: &CorpusSpec, id: String) -> Result<FeatureVideo> {
    let t = spec.segments;
    let c = spec.num_classes;

    let y_line = reader.next_line()?;
    let mut fields = y_line.split_whitespace();
    if fields.next() != Some("y") {
        return Err(reader.error("expected 'y' record".into()));
    }
    let mut segment_labels = Vec::with_capacity(t);
    for k in 0..t {
        let label: usize = reader.parse_field(fields.next(), &format!("y[{}]", k + 1))?;
        if label == 0 || label > c + 1 {
            return Err(reader.error(format!("segment label {label} outside [1, {}]", c + 1)));
        }
        segment_labels.push(label);
    }

    let label_line = reader.next_line()?;
    let mut fields = label_line.split_whitespace();
    if fields.next() != Some("Y") {
        return Err(reader.error("expected 'Y' record".into()));
    }
    let mut bits = Vec::with_capacity(c + 1);
    for k in 0..=c {
        let bit: u8 = reader.parse_field(fields.next(), &format!("Y[{}]", k + 1))?;
        bits.push(bit != 0);
    }
    let video_label = LabelVector::new(bits);

    let read_rows = |reader: &mut LineReader, tag: &str, dim: usize| -> Result<DenseMatrix> {
        let mut m = DenseMatrix::zeros(t, dim);
        for r in 0..t {
            let line = reader.next_line()?;
            let mut fields = line.split_whitespace();
            if fields.next() != Some(tag) {
                return Err(reader.error(format!("expected '{tag}' feature row {}", r + 1)));
            }
            let row = reader.parse_floats(fields, dim, &format!("{tag} row {}", r + 1))?;
            m.row_mut(r).copy_from_slice(&row);
        }
        Ok(m)
    };
    let audio = read_rows(reader, "a", spec.audio_dim)?;
    let visual = read_rows(reader, "v", spec.visual_dim)?;

    let end = reader.next_line()?;
    if end.trim() != "end" {
        return Err(reader.error("expected 'end' record".into()));
    }

    let video = FeatureVideo {
        id,
        audio,
        visual,
        segment_labels,
        video_label,
    };
    if video.video_label != video.derived_video_label() {
        return Err(reader.error(format!(
            "video {}: stored Y is inconsistent with segment labels",
            video.id
        )));
    }
    Ok(video)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            train_events: 10,
            val_events: 3,
            test_events: 3,
            background_videos: 4,
            segments: 10,
            num_classes: 5,
            audio_dim: 4,
            visual_dim: 3,
            noise_sigma: 0.2,
            prototype_scale: 1.0,
            min_event_len: 2,
            full_event_rate: 0.5,
            mismatch_rate: 0.2,
            seed: 3,
        }
    }

    #[test]
    fn event_runs_are_contiguous_and_long_enough() {
        let spec = CorpusSpec {
            num_classes: 28,
            ..small_spec()
        };
        let corpus = generate_corpus(&spec).unwrap();
        for v in corpus.train.iter().chain(&corpus.val).chain(&corpus.test) {
            let c = v.num_classes();
            let event_positions: Vec<usize> = v
                .segment_labels
                .iter()
                .enumerate()
                .filter(|(_, &y)| y <= c)
                .map(|(i, _)| i)
                .collect();
            if event_positions.is_empty() {
                continue;
            }
            let len = event_positions.len();
            assert!(len >= 2 && len <= 10, "run length {len}");
            let first = event_positions[0];
            assert!(
                event_positions.iter().enumerate().all(|(k, &p)| p == first + k),
                "event run not contiguous in {}",
                v.id
            );
            // Single class over the whole run.
            let classes: std::collections::BTreeSet<usize> = event_positions
                .iter()
                .map(|&p| v.segment_labels[p])
                .collect();
            assert_eq!(classes.len(), 1);
        }
    }

    #[test]
    fn video_label_is_derived_from_segment_labels() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        for v in corpus.all_videos() {
            assert_eq!(v.video_label, v.derived_video_label(), "{}", v.id);
        }
    }

    #[test]
    fn generation_is_bitwise_deterministic() {
        let a = generate_corpus(&small_spec()).unwrap();
        let b = generate_corpus(&small_spec()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn impossible_spec_is_rejected() {
        let spec = CorpusSpec {
            min_event_len: 11,
            ..small_spec()
        };
        assert!(matches!(generate_corpus(&spec), Err(Error::Spec(_))));
    }

    #[test]
    fn noiseless_corpus_is_nearest_prototype_separable() {
        let spec = CorpusSpec {
            noise_sigma: 0.0,
            mismatch_rate: 0.0,
            ..small_spec()
        };
        let corpus = generate_corpus(&spec).unwrap();
        // Rebuild the prototypes the generator used (same derivation).
        let mut rng = Rng::new(spec.seed);
        let audio_protos =
            draw_prototypes(&mut rng, spec.num_classes, spec.audio_dim, spec.prototype_scale);
        let visual_protos =
            draw_prototypes(&mut rng, spec.num_classes, spec.visual_dim, spec.prototype_scale);
        let dist = |x: &[f64], p: &[f64]| -> f64 {
            x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        for v in corpus.all_videos() {
            for r in 0..v.t() {
                // Nearest prototype over classes 1..=C plus the zero vector
                // as the background prototype, across both modalities.
                let mut best = (spec.num_classes + 1, {
                    dist(v.audio.row(r), &vec![0.0; spec.audio_dim])
                        + dist(v.visual.row(r), &vec![0.0; spec.visual_dim])
                });
                for class in 1..=spec.num_classes {
                    let d = dist(v.audio.row(r), &audio_protos[class - 1])
                        + dist(v.visual.row(r), &visual_protos[class - 1]);
                    if d < best.1 {
                        best = (class, d);
                    }
                }
                assert_eq!(best.0, v.segment_labels[r], "{} segment {}", v.id, r + 1);
            }
        }
    }

    #[test]
    fn corpus_round_trips_bitwise() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        save_corpus(&corpus, &path).unwrap();
        let loaded = load_corpus(&path).unwrap();
        assert_eq!(corpus, loaded);
    }

    #[test]
    fn truncated_corpus_file_is_a_parse_error() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        save_corpus(&corpus, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let truncated: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
        std::fs::write(&path, truncated).unwrap();
        let err = load_corpus(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn corpus_version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        std::fs::write(&path, "avel-corpus v0\n").unwrap();
        assert!(matches!(
            load_corpus(&path).unwrap_err(),
            Error::Version { .. }
        ));
    }

    #[test]
    fn corpus_header_is_echoed_on_load() {
        let spec = CorpusSpec {
            segments: 10,
            num_classes: 28,
            ..small_spec()
        };
        let corpus = generate_corpus(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.txt");
        save_corpus(&corpus, &path).unwrap();
        let loaded = load_corpus(&path).unwrap();
        assert_eq!(loaded.spec, spec);
    }

    #[test]
    fn partner_prefers_background_videos() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        let video = &corpus.train[0];
        assert!(!video.label_set().is_empty());
        for k in 0..20 {
            let mut rng = Rng::new(k);
            let partner = disjoint_partner(&corpus, video, &mut rng).unwrap();
            assert!(partner.label_set().is_empty(), "picked {}", partner.id);
        }
    }

    #[test]
    fn partner_error_lists_blocking_classes() {
        // Every video shares class 1: no disjoint partner exists.
        let mut corpus = generate_corpus(&CorpusSpec {
            train_events: 4,
            val_events: 0,
            test_events: 0,
            background_videos: 0,
            ..small_spec()
        })
        .unwrap();
        for v in &mut corpus.train {
            let c = v.num_classes();
            for y in &mut v.segment_labels {
                if *y <= c {
                    *y = 1;
                }
            }
            v.video_label = v.derived_video_label();
        }
        let video = corpus.train[0].clone();
        let err = disjoint_partner(&corpus, &video, &mut Rng::new(0)).unwrap_err();
        match err {
            Error::NoDisjointPartner { blocking, .. } => assert_eq!(blocking, vec![1]),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn background_video_pairs_with_anything() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        let bg = corpus
            .train
            .iter()
            .find(|v| v.label_set().is_empty())
            .unwrap();
        let mut rng = Rng::new(1);
        assert!(disjoint_partner(&corpus, bg, &mut rng).is_ok());
    }

    #[test]
    fn default_spec_background_fraction_is_near_ave_statistics() {
        let corpus = generate_corpus(&CorpusSpec::default()).unwrap();
        let all: Vec<FeatureVideo> = corpus.all_videos().cloned().collect();
        let frac = Corpus::background_fraction(&all);
        assert!((frac - 0.18).abs() < 0.05, "background fraction {frac}");
    }
}
