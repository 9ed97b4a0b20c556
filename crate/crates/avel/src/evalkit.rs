//! Segment-level metrics, naive baselines, and sweep harnesses.
//!
//! Accuracy alone rewards predicting the video-level event for every
//! segment, so reports always carry the background-detection F1 and the
//! event F1 with their recall/precision parts alongside it. Definitions
//! pinned here and echoed in report headers: an event segment counts as a
//! true positive only when the predicted event class equals the
//! ground-truth class, and the weighted F1 weights per-class F1 by
//! ground-truth support including the background class.

use std::fmt::Write as _;

use crate::datagen::{Corpus, FeatureVideo};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::pipeline::{train_stage1, train_stage3, TrainConfig};
use crate::refine::{make_schedule, refine_corpus};

/// Binary detection counts; rates use the 0-when-undefined convention and
/// `*_defined` reports whether the denominator was non-zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinaryCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl BinaryCounts {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn precision_defined(&self) -> bool {
        self.tp + self.fp > 0
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn recall_defined(&self) -> bool {
        self.tp + self.fn_ > 0
    }

    pub fn f1(&self) -> f64 {
        f1_from(self.precision(), self.recall())
    }

    pub fn f1_defined(&self) -> bool {
        self.precision_defined() && self.recall_defined()
    }
}

pub(crate) fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class one-vs-rest breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScore {
    /// Class id (1..=C events, C+1 background).
    pub class: usize,
    /// Ground-truth segment count.
    pub support: usize,
    pub counts: BinaryCounts,
}

/// Segment-level metrics over a set of videos.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Event classes C (background is class C+1).
    pub num_classes: usize,
    pub total_segments: usize,
    pub correct_segments: usize,
    /// Background detection treated as one binary problem.
    pub non_ave: BinaryCounts,
    /// Strict event detection: true positive only when the predicted
    /// event class equals the ground-truth event class.
    pub ave_tp: usize,
    pub ave_true: usize,
    pub ave_predicted: usize,
    pub per_class: Vec<ClassScore>,
    /// `confusion[truth-1][pred-1]` over all C+1 classes.
    pub confusion: Vec<Vec<usize>>,
}

impl MetricsReport {
    pub fn accuracy(&self) -> f64 {
        if self.total_segments == 0 {
            0.0
        } else {
            self.correct_segments as f64 / self.total_segments as f64
        }
    }

    pub fn ave_recall(&self) -> f64 {
        if self.ave_true == 0 {
            0.0
        } else {
            self.ave_tp as f64 / self.ave_true as f64
        }
    }

    pub fn ave_precision(&self) -> f64 {
        if self.ave_predicted == 0 {
            0.0
        } else {
            self.ave_tp as f64 / self.ave_predicted as f64
        }
    }

    pub fn ave_f1(&self) -> f64 {
        f1_from(self.ave_precision(), self.ave_recall())
    }

    /// Support-weighted mean of per-class F1 over all C+1 classes.
    pub fn weighted_f1(&self) -> f64 {
        let total: usize = self.per_class.iter().map(|c| c.support).sum();
        if total == 0 {
            return 0.0;
        }
        self.per_class
            .iter()
            .map(|c| c.support as f64 * c.counts.f1())
            .sum::<f64>()
            / total as f64
    }
}

/// Computes all segment-level metrics from per-video predictions and
/// ground truth. Class ids must lie in `[1, C+1]`.
pub fn compute_metrics(
    num_classes: usize,
    pred: &[Vec<usize>],
    truth: &[Vec<usize>],
) -> Result<MetricsReport> {
    if pred.len() != truth.len() {
        return Err(Error::Dim(format!(
            "{} prediction videos vs {} truth videos",
            pred.len(),
            truth.len()
        )));
    }
    let k = num_classes + 1;
    let mut confusion = vec![vec![0usize; k]; k];
    for (pv, tv) in pred.iter().zip(truth) {
        if pv.len() != tv.len() {
            return Err(Error::Dim(format!(
                "prediction length {} vs truth length {}",
                pv.len(),
                tv.len()
            )));
        }
        for (&p, &t) in pv.iter().zip(tv) {
            if p == 0 || p > k || t == 0 || t > k {
                return Err(Error::Domain(format!(
                    "class id outside [1, {k}]: pred {p}, truth {t}"
                )));
            }
            confusion[t - 1][p - 1] += 1;
        }
    }
    Ok(metrics_from_confusion(num_classes, confusion))
}

fn metrics_from_confusion(num_classes: usize, confusion: Vec<Vec<usize>>) -> MetricsReport {
    let k = num_classes + 1;
    let total: usize = confusion.iter().map(|row| row.iter().sum::<usize>()).sum();
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();

    let bg = k - 1;
    let non_ave = BinaryCounts {
        tp: confusion[bg][bg],
        fp: (0..bg).map(|t| confusion[t][bg]).sum(),
        fn_: (0..bg).map(|p| confusion[bg][p]).sum(),
    };

    let ave_tp: usize = (0..bg).map(|c| confusion[c][c]).sum();
    let ave_true: usize = (0..bg).map(|c| confusion[c].iter().sum::<usize>()).sum();
    let ave_predicted: usize = (0..k).map(|t| confusion[t][..bg].iter().sum::<usize>()).sum();

    let per_class = (0..k)
        .map(|c| {
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..k).map(|t| confusion[t][c]).sum();
            let tp = confusion[c][c];
            ClassScore {
                class: c + 1,
                support,
                counts: BinaryCounts {
                    tp,
                    fp: predicted - tp,
                    fn_: support - tp,
                },
            }
        })
        .collect();

    MetricsReport {
        num_classes,
        total_segments: total,
        correct_segments: correct,
        non_ave,
        ave_tp,
        ave_true,
        ave_predicted,
        per_class,
        confusion,
    }
}

/// Runs a model over videos and scores its per-segment predictions.
pub fn evaluate_model(
    params: &ModelParams,
    videos: &[FeatureVideo],
    num_classes: usize,
) -> Result<MetricsReport> {
    let pred: Vec<Vec<usize>> = videos
        .iter()
        .map(|v| params.predict_segments(v))
        .collect::<Result<_>>()?;
    let truth: Vec<Vec<usize>> = videos.iter().map(|v| v.segment_labels.clone()).collect();
    compute_metrics(num_classes, &pred, &truth)
}

/// The two naive prediction strategies, scored on the test split:
/// repeating the model's top video-level event class across all segments,
/// and repeating the ground-truth video-level event class (background for
/// videos with no event).
pub fn naive_baselines(
    corpus: &Corpus,
    params: &ModelParams,
) -> Result<(MetricsReport, MetricsReport)> {
    let videos = &corpus.test;
    let c = corpus.spec.num_classes;
    let truth: Vec<Vec<usize>> = videos.iter().map(|v| v.segment_labels.clone()).collect();

    let mut repeat_pred = Vec::with_capacity(videos.len());
    for video in videos {
        let probs = crate::refine::VideoLevelPredictor::predict_video_probs(params, video)?;
        // Highest-probability event class, ignoring the background entry.
        let mut best = 0;
        for class in 1..c {
            if probs[class] > probs[best] {
                best = class;
            }
        }
        repeat_pred.push(vec![best + 1; video.t()]);
    }
    let ave_repeat = compute_metrics(c, &repeat_pred, &truth)?;

    let gt_pred: Vec<Vec<usize>> = videos
        .iter()
        .map(|v| {
            let class = v.label_set().iter().next().unwrap_or(c + 1);
            vec![class; v.t()]
        })
        .collect();
    let gt_repeat = compute_metrics(c, &gt_pred, &truth)?;

    Ok((ave_repeat, gt_repeat))
}

/// A sweep cell's parameter: an event-detection threshold or a window
/// size/stride choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepParam {
    Tau(f64),
    Window { n: usize, s: usize },
}

impl std::fmt::Display for SweepParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepParam::Tau(tau) => write!(f, "tau={tau}"),
            SweepParam::Window { n, s } => write!(f, "N={n},s={s}"),
        }
    }
}

/// One evaluated or rejected sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub param: SweepParam,
    pub outcome: SweepOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepOutcome {
    Run {
        /// Window placements per video for the cell's schedule.
        t1: usize,
        metrics: MetricsReport,
    },
    Rejected {
        reason: String,
    },
}

/// Results over a parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

/// Sweeps the event-detection threshold: one stage-1 model (with the
/// auxiliary objective) is trained and reused, then each threshold gets
/// its own refinement pass and stage-3 retraining.
pub fn sweep_tau(
    corpus: &Corpus,
    model_cfg: &crate::model::ModelConfig,
    cfg: &TrainConfig,
    taus: &[f64],
) -> Result<SweepResult> {
    for &tau in taus {
        if !(0.0 < tau && tau < 1.0) {
            return Err(Error::Config(format!("tau {tau} outside (0, 1)")));
        }
    }
    let schedule = cfg.schedule(corpus.spec.segments)?;
    let stage1 = train_stage1(corpus, model_cfg, cfg, true)?;
    let mut cells = Vec::with_capacity(taus.len());
    for &tau in taus {
        let refined = refine_corpus(&stage1.params, corpus, &schedule, tau, cfg.seed)?;
        let cell_cfg = TrainConfig { tau, ..cfg.clone() };
        let retrained = train_stage3(corpus, model_cfg, &cell_cfg, &refined)?;
        let metrics = evaluate_model(&retrained.params, &corpus.test, corpus.spec.num_classes)?;
        cells.push(SweepCell {
            param: SweepParam::Tau(tau),
            outcome: SweepOutcome::Run {
                t1: schedule.t1_count,
                metrics,
            },
        });
    }
    Ok(SweepResult { cells })
}

/// Sweeps window size and stride. Each valid cell re-trains stage 1 with
/// the cell's schedule (the auxiliary objective depends on it), refines,
/// and re-trains stage 3. Invalid cells are recorded as rejected rather
/// than aborting the sweep.
pub fn sweep_window(
    corpus: &Corpus,
    model_cfg: &crate::model::ModelConfig,
    cfg: &TrainConfig,
    choices: &[(usize, usize)],
) -> Result<SweepResult> {
    let t = corpus.spec.segments;
    let mut cells = Vec::with_capacity(choices.len());
    for &(n, s) in choices {
        let schedule = match make_schedule(t, n, s) {
            Ok(schedule) if schedule.aux_valid => schedule,
            Ok(_) => {
                cells.push(SweepCell {
                    param: SweepParam::Window { n, s },
                    outcome: SweepOutcome::Rejected {
                        reason: format!(
                            "auxiliary objective needs T-N+1 > N, got T={t} N={n}"
                        ),
                    },
                });
                continue;
            }
            Err(err) => {
                cells.push(SweepCell {
                    param: SweepParam::Window { n, s },
                    outcome: SweepOutcome::Rejected {
                        reason: err.to_string(),
                    },
                });
                continue;
            }
        };
        let cell_cfg = TrainConfig { n, s, ..cfg.clone() };
        let stage1 = train_stage1(corpus, model_cfg, &cell_cfg, true)?;
        let refined = refine_corpus(&stage1.params, corpus, &schedule, cell_cfg.tau, cell_cfg.seed)?;
        let retrained = train_stage3(corpus, model_cfg, &cell_cfg, &refined)?;
        let metrics = evaluate_model(&retrained.params, &corpus.test, corpus.spec.num_classes)?;
        cells.push(SweepCell {
            param: SweepParam::Window { n, s },
            outcome: SweepOutcome::Run {
                t1: schedule.t1_count,
                metrics,
            },
        });
    }
    Ok(SweepResult { cells })
}

impl SweepResult {
    /// Line-record serialization with a versioned header.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        out.push_str("avel-sweep v1\n");
        for cell in &self.cells {
            match &cell.outcome {
                SweepOutcome::Run { t1, metrics } => {
                    writeln!(out, "cell {} t1={t1} status=ok", cell.param).unwrap();
                    write_metrics_records(&mut out, metrics);
                }
                SweepOutcome::Rejected { reason } => {
                    writeln!(out, "cell {} status=rejected reason={:?}", cell.param, reason)
                        .unwrap();
                }
            }
            out.push_str("end\n");
        }
        out
    }

    /// Aligned text table, one row per cell.
    pub fn to_table(&self) -> String {
        let rows: Vec<(String, Option<(usize, &MetricsReport)>)> = self
            .cells
            .iter()
            .map(|cell| {
                let label = cell.param.to_string();
                match &cell.outcome {
                    SweepOutcome::Run { t1, metrics } => (label, Some((*t1, metrics))),
                    SweepOutcome::Rejected { .. } => (label, None),
                }
            })
            .collect();
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>8} {:>7} {:>18} {:>18} {:>4}\n",
            "Choice", "Accuracy", "Wt. F1", "Non-AVE F1 (R/P)", "AVE F1 (R/P)", "T1"
        ));
        for (label, outcome) in rows {
            match outcome {
                Some((t1, m)) => {
                    out.push_str(&format!(
                        "{:<14} {:>8} {:>7} {:>18} {:>18} {:>4}\n",
                        label,
                        fmt_pct(m.accuracy()),
                        fmt_pct(m.weighted_f1()),
                        fmt_f1_rp(
                            m.non_ave.f1(),
                            m.non_ave.recall(),
                            m.non_ave.precision(),
                            m.non_ave.f1_defined(),
                            m.non_ave.recall_defined(),
                            m.non_ave.precision_defined()
                        ),
                        fmt_f1_rp(
                            m.ave_f1(),
                            m.ave_recall(),
                            m.ave_precision(),
                            m.ave_true > 0 && m.ave_predicted > 0,
                            m.ave_true > 0,
                            m.ave_predicted > 0
                        ),
                        t1
                    ));
                }
                None => {
                    out.push_str(&format!("{label:<14} rejected\n"));
                }
            }
        }
        out
    }
}

fn fmt_pct(rate: f64) -> String {
    format!("{:.1}", rate * 100.0)
}

fn fmt_f1_rp(f1: f64, r: f64, p: f64, f1_def: bool, r_def: bool, p_def: bool) -> String {
    let show = |v: f64, defined: bool| {
        if defined {
            format!("{:.1}", v * 100.0)
        } else {
            "-".to_string()
        }
    };
    format!("{} ({}/{})", show(f1, f1_def), show(r, r_def), show(p, p_def))
}

/// Deterministic line records for one metrics report, shared by every
/// report file.
pub fn write_metrics_records(out: &mut String, m: &MetricsReport) {
    writeln!(
        out,
        "metrics accuracy={} weighted_f1={} total={} correct={}",
        m.accuracy(),
        m.weighted_f1(),
        m.total_segments,
        m.correct_segments
    )
    .unwrap();
    writeln!(
        out,
        "non-ave tp={} fp={} fn={} precision={} recall={} f1={}",
        m.non_ave.tp,
        m.non_ave.fp,
        m.non_ave.fn_,
        m.non_ave.precision(),
        m.non_ave.recall(),
        m.non_ave.f1()
    )
    .unwrap();
    writeln!(
        out,
        "ave tp={} true={} predicted={} precision={} recall={} f1={}",
        m.ave_tp,
        m.ave_true,
        m.ave_predicted,
        m.ave_precision(),
        m.ave_recall(),
        m.ave_f1()
    )
    .unwrap();
    for c in &m.per_class {
        writeln!(
            out,
            "class {} support={} tp={} fp={} fn={} f1={}",
            c.class,
            c.support,
            c.counts.tp,
            c.counts.fp,
            c.counts.fn_,
            c.counts.f1()
        )
        .unwrap();
    }
    for (t, row) in m.confusion.iter().enumerate() {
        write!(out, "confusion {}", t + 1).unwrap();
        for v in row {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
}

/// Aligned method-by-metric table with the metric definitions in the
/// header comments.
pub fn metrics_table(rows: &[(String, &MetricsReport)]) -> String {
    let mut out = String::new();
    out.push_str("# ave-f1: strict — a predicted event counts only when it equals the ground-truth class\n");
    out.push_str("# weighted-f1: per-class F1 weighted by ground-truth support, background included\n");
    out.push_str(&format!(
        "{:<14} {:>8} {:>7} {:>18} {:>18}\n",
        "Method", "Accuracy", "Wt. F1", "Non-AVE F1 (R/P)", "AVE F1 (R/P)"
    ));
    for (name, m) in rows {
        out.push_str(&format!(
            "{:<14} {:>8} {:>7} {:>18} {:>18}\n",
            name,
            fmt_pct(m.accuracy()),
            fmt_pct(m.weighted_f1()),
            fmt_f1_rp(
                m.non_ave.f1(),
                m.non_ave.recall(),
                m.non_ave.precision(),
                m.non_ave.f1_defined(),
                m.non_ave.recall_defined(),
                m.non_ave.precision_defined()
            ),
            fmt_f1_rp(
                m.ave_f1(),
                m.ave_recall(),
                m.ave_precision(),
                m.ave_true > 0 && m.ave_predicted > 0,
                m.ave_true > 0,
                m.ave_predicted > 0
            ),
        ));
    }
    out
}
