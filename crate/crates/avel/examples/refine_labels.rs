//! Stage 2 up close: train a base model, then estimate localized window
//! labels for a few videos and compare them to the ground truth the model
//! never saw.
//!
//! ```bash
//! cargo run --example refine_labels
//! ```

use avel::datagen::{generate_corpus, CorpusSpec};
use avel::model::ModelConfig;
use avel::numkit::Rng;
use avel::pipeline::{train_stage1, TrainConfig};
use avel::refine::{make_schedule, refine_video, LabelSet};

fn main() {
    let spec = CorpusSpec {
        train_events: 60,
        val_events: 0,
        test_events: 0,
        background_videos: 8,
        full_event_rate: 0.3, // mostly partial events, so windows differ
        seed: 13,
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
        stage1_epochs: 120,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let trained = train_stage1(&corpus, &model_cfg, &cfg, true).expect("training converges");

    let schedule = make_schedule(spec.segments, cfg.n, cfg.s).expect("valid schedule");
    println!(
        "window schedule: N={} s={} starts {:?}, tau={}",
        schedule.n, schedule.s, schedule.starts, cfg.tau
    );

    for video in corpus.train.iter().filter(|v| !v.label_set().is_empty()).take(5) {
        let mut rng = Rng::new(99);
        let refined = refine_video(&trained.params, &corpus, video, &schedule, cfg.tau, &mut rng)
            .expect("refinement");
        println!("\n{} segments {:?}", video.id, video.segment_labels);
        for (t1, vector) in refined {
            let (lo, hi) = (t1 - 1, t1 - 1 + schedule.n);
            let truth = LabelSet::from_segments(&video.segment_labels, lo, hi, spec.num_classes);
            let estimate = vector.event_set();
            println!(
                "  window [{:>2}, {:>2}] estimated {:?} truth {:?} {}",
                t1,
                t1 + schedule.n - 1,
                estimate.iter().collect::<Vec<_>>(),
                truth.iter().collect::<Vec<_>>(),
                if estimate == truth { "" } else { "<- differs" }
            );
        }
    }
}
