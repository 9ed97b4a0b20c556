//! Train the stage-1 base model from video-level labels only and evaluate
//! its per-segment predictions.
//!
//! ```bash
//! cargo run --example train_base
//! ```

use avel::datagen::{generate_corpus, CorpusSpec};
use avel::evalkit::{evaluate_model, metrics_table};
use avel::model::ModelConfig;
use avel::pipeline::{train_stage1, TrainConfig};

fn main() {
    let spec = CorpusSpec {
        train_events: 60,
        val_events: 10,
        test_events: 20,
        background_videos: 8,
        seed: 11,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).expect("valid spec");
    let model_cfg = ModelConfig {
        audio_dim: spec.audio_dim,
        visual_dim: spec.visual_dim,
        hidden: 24,
        num_classes: spec.num_classes,
        context_radius: 1,
        seed: 3,
    };
    let cfg = TrainConfig {
        stage1_epochs: 80,
        batch_size: 16,
        ..TrainConfig::default()
    };

    let trained = train_stage1(&corpus, &model_cfg, &cfg, false).expect("training converges");
    let curve = &trained.loss_curve;
    println!(
        "trained {} epochs: loss {:.4} -> {:.4} -> {:.4}",
        curve.len(),
        curve[0],
        curve[curve.len() / 2],
        curve[curve.len() - 1]
    );

    let metrics = evaluate_model(&trained.params, &corpus.test, spec.num_classes)
        .expect("evaluation");
    print!("{}", metrics_table(&[("stage-1 model".to_string(), &metrics)]));
}
