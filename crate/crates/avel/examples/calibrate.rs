// Scratch harness for sizing the default corpus and config.
use std::time::Instant;

use avel::datagen::{generate_corpus, Corpus, CorpusSpec, FeatureVideo};
use avel::evalkit::evaluate_model;
use avel::model::ModelConfig;
use avel::pipeline::{run_ablation, TrainConfig, Variant};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let sigma: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.3);
    let spec = CorpusSpec { noise_sigma: sigma, ..CorpusSpec::default() };
    let t0 = Instant::now();
    let corpus = generate_corpus(&spec).unwrap();
    let all: Vec<FeatureVideo> = corpus.all_videos().cloned().collect();
    println!(
        "corpus: {} train / {} val / {} test, bg fraction {:.4} ({:?})",
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len(),
        Corpus::background_fraction(&all),
        t0.elapsed()
    );
    let model_cfg = ModelConfig {
        audio_dim: spec.audio_dim,
        visual_dim: spec.visual_dim,
        hidden: 32,
        num_classes: spec.num_classes,
        context_radius: 1,
        seed: 7,
    };
    let cfg = TrainConfig { seed, ..TrainConfig::default() };
    let t1 = Instant::now();
    let report = run_ablation(&corpus, &model_cfg, &cfg).unwrap();
    println!("ablation took {:?}", t1.elapsed());
    for v in &report.variants {
        let m = &v.metrics;
        print!(
            "{:<14} acc {:>6.2} wF1 {:>6.2} nonAVE F1 {:>6.2} (R {:>5.2} P {:>5.2}) AVE F1 {:>6.2}",
            v.variant.to_string(),
            m.accuracy() * 100.0,
            m.weighted_f1() * 100.0,
            m.non_ave.f1() * 100.0,
            m.non_ave.recall() * 100.0,
            m.non_ave.precision() * 100.0,
            m.ave_f1() * 100.0
        );
        if let Some(q) = &v.refined_quality {
            print!("  refP {:>7.5} refR {:>7.5}", q.precision(), q.recall());
        }
        println!();
    }
    // Stage-1 quality context: base model video-level behavior.
    let base = report.get(Variant::Base);
    let aux = report.get(Variant::BaseAuxLr);
    println!(
        "stage1 final loss: base {:.4} aux {:.4}",
        base.stage1_curve.last().unwrap(),
        aux.stage1_curve.last().unwrap()
    );
    let train_metrics = evaluate_model(
        &avel::pipeline::train_stage1(&corpus, &model_cfg, &cfg, false)
            .unwrap()
            .params,
        &corpus.train,
        spec.num_classes,
    )
    .unwrap();
    println!("base train-split accuracy {:.3}", train_metrics.accuracy());
}
