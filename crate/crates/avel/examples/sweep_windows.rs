//! Sweep window size and stride. Invalid combinations (stride not
//! dividing T-N, or too-large windows for the auxiliary objective) are
//! reported as rejected instead of aborting the sweep.
//!
//! ```bash
//! cargo run --example sweep_windows
//! ```

use avel::datagen::{generate_corpus, CorpusSpec};
use avel::evalkit::sweep_window;
use avel::model::ModelConfig;
use avel::pipeline::TrainConfig;

fn main() {
    let spec = CorpusSpec {
        train_events: 80,
        val_events: 10,
        test_events: 25,
        background_videos: 10,
        seed: 53,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).expect("valid spec");
    let model_cfg = ModelConfig {
        audio_dim: spec.audio_dim,
        visual_dim: spec.visual_dim,
        hidden: 24,
        num_classes: spec.num_classes,
        context_radius: 1,
        seed: 59,
    };
    let cfg = TrainConfig {
        stage1_epochs: 80,
        stage3_epochs: 40,
        batch_size: 32,
        ..TrainConfig::default()
    };

    // The last two cells are invalid on T=10: stride 2 does not divide
    // 10-3, and N=6 breaks the auxiliary-objective bound.
    let choices = [(2, 2), (3, 1), (4, 2), (5, 5), (3, 2), (6, 2)];
    let result = sweep_window(&corpus, &model_cfg, &cfg, &choices).expect("sweep");
    print!("{}", result.to_table());
}
