//! Generate a synthetic corpus, inspect its statistics, and round-trip it
//! through the on-disk format.
//!
//! ```bash
//! cargo run --example generate_corpus
//! ```

use avel::datagen::{generate_corpus, load_corpus, save_corpus, Corpus, CorpusSpec, FeatureVideo};

fn main() {
    let spec = CorpusSpec {
        train_events: 40,
        val_events: 10,
        test_events: 10,
        background_videos: 6,
        seed: 7,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).expect("valid spec");

    let all: Vec<FeatureVideo> = corpus.all_videos().cloned().collect();
    println!(
        "generated {} videos ({} train / {} val / {} test), T={}, C={}",
        all.len(),
        corpus.train.len(),
        corpus.val.len(),
        corpus.test.len(),
        spec.segments,
        spec.num_classes
    );
    println!(
        "background segment fraction: {:.4}",
        Corpus::background_fraction(&all)
    );
    print!("event length histogram:");
    for (len, count) in corpus.event_length_histogram().iter().enumerate() {
        if *count > 0 {
            print!(" {len}s x{count}");
        }
    }
    println!();

    // One video up close.
    let video = &corpus.train[0];
    println!("\n{}: segment labels {:?}", video.id, video.segment_labels);
    println!("video-level label bits: {:?}", video.video_label.bits());

    // Round-trip through the text format is exact.
    let dir = std::env::temp_dir().join("avel-example-corpus");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("corpus.txt");
    save_corpus(&corpus, &path).expect("writable path");
    let loaded = load_corpus(&path).expect("well-formed file");
    assert_eq!(corpus, loaded);
    println!("\nround-trip through {} is bit-exact", path.display());
}
