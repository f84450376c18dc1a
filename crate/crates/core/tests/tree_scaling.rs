//! Induction time should grow roughly like n log n at a fixed attribute count.

use std::time::{Duration, Instant};

use qrandml::datasets::synth_blobs;
use qrandml::entropy::EntropySource;
use qrandml::trees::{train_random_tree, TreeConfig};

const SIZES: [usize; 3] = [1000, 2000, 4000];

/// Best of several rounds per size, each repeating enough trees to dwarf
/// timer noise. Rounds interleave the sizes so load drift hits all of them.
fn induction_times() -> Vec<f64> {
    let data: Vec<_> =
        SIZES.iter().map(|&n| synth_blobs(3, n / 3, 10, 0.6, &mut EntropySource::pseudo(n as u64)).unwrap()).collect();
    let config = TreeConfig::default();
    let mut best = vec![Duration::MAX; SIZES.len()];
    for round in 0..7 {
        for (d, slot) in data.iter().zip(best.iter_mut()) {
            let start = Instant::now();
            for seed in 0..20 {
                train_random_tree(d, &config, &mut EntropySource::pseudo(round * 100 + seed)).unwrap();
            }
            *slot = (*slot).min(start.elapsed());
        }
    }
    best.iter().map(Duration::as_secs_f64).collect()
}

#[test]
fn doubling_rows_at_most_2_6x_slower() {
    let times = induction_times();
    println!("induction times for n = {SIZES:?}: {times:?}");
    for w in times.windows(2) {
        let ratio = w[1] / w[0];
        assert!(ratio <= 2.6, "times {times:?}, ratio {ratio}");
    }
}
