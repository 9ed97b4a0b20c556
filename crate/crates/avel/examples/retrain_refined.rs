//! The full train -> refine -> retrain pipeline on a small corpus,
//! showing what the refined window labels buy at the segment level.
//!
//! ```bash
//! cargo run --example retrain_refined
//! ```

use avel::datagen::{generate_corpus, CorpusSpec};
use avel::evalkit::{evaluate_model, metrics_table};
use avel::model::ModelConfig;
use avel::pipeline::{train_stage1, train_stage3, window_label_quality, TrainConfig};
use avel::refine::refine_corpus;

fn main() {
    let spec = CorpusSpec {
        train_events: 80,
        val_events: 10,
        test_events: 25,
        background_videos: 10,
        noise_sigma: 0.45,
        seed: 17,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).expect("valid spec");
    let model_cfg = ModelConfig {
        audio_dim: spec.audio_dim,
        visual_dim: spec.visual_dim,
        hidden: 32,
        num_classes: spec.num_classes,
        context_radius: 1,
        seed: 3,
    };
    let cfg = TrainConfig {
        stage1_epochs: 120,
        stage3_epochs: 60,
        batch_size: 32,
        ..TrainConfig::default()
    };

    // Stage 1: weak supervision only.
    let base = train_stage1(&corpus, &model_cfg, &cfg, true).expect("stage 1");
    println!(
        "stage 1 done: final loss {:.4}",
        base.loss_curve.last().unwrap()
    );

    // Stage 2: window-label estimation with the trained model.
    let schedule = cfg.schedule(spec.segments).expect("valid schedule");
    let refined =
        refine_corpus(&base.params, &corpus, &schedule, cfg.tau, cfg.seed).expect("stage 2");
    let quality = window_label_quality(&corpus, &refined, &schedule);
    println!(
        "stage 2 done: {} window labels, precision {:.3} recall {:.3} vs ground truth",
        refined.entries.len(),
        quality.precision(),
        quality.recall()
    );

    // Stage 3: re-train from scratch with the refined labels added.
    let retrained = train_stage3(&corpus, &model_cfg, &cfg, &refined).expect("stage 3");
    println!(
        "stage 3 done: final loss {:.4}\n",
        retrained.loss_curve.last().unwrap()
    );

    let before = evaluate_model(&base.params, &corpus.test, spec.num_classes).unwrap();
    let after = evaluate_model(&retrained.params, &corpus.test, spec.num_classes).unwrap();
    print!(
        "{}",
        metrics_table(&[
            ("stage-1 only".to_string(), &before),
            ("retrained".to_string(), &after),
        ])
    );
}
