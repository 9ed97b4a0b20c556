//! Check every training loss against central finite differences.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use avel::datagen::{generate_corpus, CorpusSpec};
use avel::model::{loss_on_flat, mil_loss, ModelConfig, ModelParams};
use avel::numkit::grad_check;
use avel::pipeline::{aux_loss, refinement_loss};
use avel::refine::{make_schedule, LabelSet};

fn main() {
    let spec = CorpusSpec {
        train_events: 6,
        val_events: 0,
        test_events: 0,
        background_videos: 2,
        segments: 6,
        num_classes: 3,
        audio_dim: 3,
        visual_dim: 3,
        min_event_len: 2,
        full_event_rate: 0.3,
        seed: 23,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).expect("valid spec");
    let model_cfg = ModelConfig {
        audio_dim: 3,
        visual_dim: 3,
        hidden: 6,
        num_classes: 3,
        context_radius: 1,
        seed: 29,
    };
    let params = ModelParams::init(&model_cfg, 31);
    let flat = params.to_flat();
    println!("checking {} parameters against central differences\n", flat.len());

    let video = &corpus.train[0];
    let (_, grads) = mil_loss(&params, video).unwrap();
    let report = grad_check(
        |p| loss_on_flat(&params, p, |m| Ok(mil_loss(m, video)?.0)),
        &flat,
        &grads.to_flat(),
        1e-4,
    )
    .unwrap();
    println!(
        "bag loss (weak supervision): max rel error {:.3e} -> {}",
        report.max_rel_error,
        if report.passed() { "ok" } else { "MISMATCH" }
    );

    let schedule = make_schedule(6, 2, 2).unwrap();
    let partner = corpus
        .train
        .iter()
        .find(|v| v.label_set().is_disjoint(&video.label_set()) && v.id != video.id)
        .expect("disjoint partner");
    let (_, grads) = aux_loss(&params, video, partner, &schedule).unwrap();
    let report = grad_check(
        |p| loss_on_flat(&params, p, |m| Ok(aux_loss(m, video, partner, &schedule)?.0)),
        &flat,
        &grads.to_flat(),
        1e-4,
    )
    .unwrap();
    println!(
        "auxiliary composition loss:  max rel error {:.3e} -> {}",
        report.max_rel_error,
        if report.passed() { "ok" } else { "MISMATCH" }
    );

    let targets: Vec<_> = schedule
        .windows()
        .map(|w| {
            let (lo, hi) = w.rows();
            let set = LabelSet::from_segments(&video.segment_labels, lo, hi, 3);
            (w, set.to_vector(3))
        })
        .collect();
    let (_, grads) = refinement_loss(&params, video, &targets).unwrap();
    let report = grad_check(
        |p| loss_on_flat(&params, p, |m| Ok(refinement_loss(m, video, &targets)?.0)),
        &flat,
        &grads.to_flat(),
        1e-4,
    )
    .unwrap();
    println!(
        "window refinement loss:      max rel error {:.3e} -> {}",
        report.max_rel_error,
        if report.passed() { "ok" } else { "MISMATCH" }
    );
}
