//! Sweep the event-detection threshold: one shared stage-1 model, one
//! refinement + retraining per threshold.
//!
//! ```bash
//! cargo run --example sweep_thresholds
//! ```

use avel::datagen::{generate_corpus, CorpusSpec};
use avel::evalkit::sweep_tau;
use avel::model::ModelConfig;
use avel::pipeline::TrainConfig;

fn main() {
    let spec = CorpusSpec {
        train_events: 80,
        val_events: 10,
        test_events: 25,
        background_videos: 10,
        seed: 43,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).expect("valid spec");
    let model_cfg = ModelConfig {
        audio_dim: spec.audio_dim,
        visual_dim: spec.visual_dim,
        hidden: 24,
        num_classes: spec.num_classes,
        context_radius: 1,
        seed: 47,
    };
    let cfg = TrainConfig {
        stage1_epochs: 80,
        stage3_epochs: 40,
        batch_size: 32,
        ..TrainConfig::default()
    };

    let taus = [0.01, 0.03, 0.05, 0.07, 0.10];
    let result = sweep_tau(&corpus, &model_cfg, &cfg, &taus).expect("sweep");
    print!("{}", result.to_table());
}
