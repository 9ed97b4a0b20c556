//! The five-variant ablation (base model, pseudo-labels, dummy
//! refinement, label refinement, and refinement with the auxiliary
//! objective) on a reduced corpus.
//!
//! ```bash
//! cargo run --example full_ablation
//! ```

use avel::datagen::{generate_corpus, CorpusSpec};
use avel::evalkit::metrics_table;
use avel::model::ModelConfig;
use avel::pipeline::{run_ablation, TrainConfig};

fn main() {
    let spec = CorpusSpec {
        train_events: 100,
        val_events: 15,
        test_events: 35,
        background_videos: 10,
        seed: 37,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).expect("valid spec");
    let model_cfg = ModelConfig {
        audio_dim: spec.audio_dim,
        visual_dim: spec.visual_dim,
        hidden: 32,
        num_classes: spec.num_classes,
        context_radius: 1,
        seed: 41,
    };
    let cfg = TrainConfig {
        stage1_epochs: 100,
        stage3_epochs: 50,
        batch_size: 32,
        ..TrainConfig::default()
    };

    let start = std::time::Instant::now();
    let report = run_ablation(&corpus, &model_cfg, &cfg).expect("ablation");
    println!("ablation finished in {:?}\n", start.elapsed());

    let rows: Vec<_> = report
        .variants
        .iter()
        .map(|v| (v.variant.to_string(), &v.metrics))
        .collect();
    print!("{}", metrics_table(&rows));
    println!();
    for v in &report.variants {
        if let Some(q) = &v.refined_quality {
            println!(
                "{:<14} refined windows: precision {:.4} recall {:.4}",
                v.variant.to_string(),
                q.precision(),
                q.recall()
            );
        }
    }
}
