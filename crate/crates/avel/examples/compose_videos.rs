//! The set algebra behind label refinement, without any training: splice
//! two label-disjoint videos and check that the label-set identity
//! recovers the window's true labels exactly.
//!
//! ```bash
//! cargo run --example compose_videos
//! ```

use avel::datagen::{generate_corpus, CorpusSpec};
use avel::refine::{compose_synthetic, label_set_identity, make_schedule, LabelSet, Window};

fn main() {
    let spec = CorpusSpec {
        train_events: 10,
        val_events: 0,
        test_events: 0,
        background_videos: 2,
        num_classes: 6,
        full_event_rate: 0.0, // short events make the windows interesting
        seed: 5,
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).expect("valid spec");
    let c = spec.num_classes;

    // Pick two videos with disjoint label sets.
    let video_i = &corpus.train[0];
    let video_j = corpus
        .train
        .iter()
        .find(|v| v.label_set().is_disjoint(&video_i.label_set()) && v.id != video_i.id)
        .expect("disjoint partner exists");
    println!(
        "video i = {} with labels {:?}",
        video_i.id,
        video_i.label_set().iter().collect::<Vec<_>>()
    );
    println!(
        "video j = {} with labels {:?}",
        video_j.id,
        video_j.label_set().iter().collect::<Vec<_>>()
    );
    println!("segments i: {:?}", video_i.segment_labels);
    println!("segments j: {:?}", video_j.segment_labels);

    let schedule = make_schedule(spec.segments, 4, 2).expect("valid schedule");
    println!(
        "\nschedule: N={} s={} starts {:?} coverage {:?}",
        schedule.n, schedule.s, schedule.starts, schedule.coverage
    );

    for window in schedule.windows() {
        let composed = compose_synthetic(video_i, video_j, window).expect("same shape");
        let symbolic = label_set_identity(
            &video_i.label_set(),
            &video_j.label_set(),
            window,
            &video_i.segment_labels,
            &video_j.segment_labels,
            c,
        )
        .expect("disjoint label sets");
        let (lo, hi) = window.rows();
        let brute = LabelSet::from_segments(&video_i.segment_labels, lo, hi, c);
        assert_eq!(symbolic, brute);
        println!(
            "window [{}, {}]: composed labels {:?}, window labels {:?} (identity holds)",
            window.start,
            window.end(),
            composed.video.label_set().iter().collect::<Vec<_>>(),
            brute.iter().collect::<Vec<_>>()
        );
    }

    // A full-span window reproduces the original video.
    let full = compose_synthetic(video_i, video_j, Window::full(spec.segments)).unwrap();
    assert_eq!(&full.video.audio, &video_i.audio);
    println!("\nfull-span window reproduces video i exactly");
}
