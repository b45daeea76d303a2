//! Mean post-selection probability over Haar-random channels, per scheme.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dfs_qkd::channel::randomized_survival;
use dfs_qkd::{CollectiveRotation, Scheme};

fn main() {
    let n = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let channels: Vec<_> = (0..n).map(|_| CollectiveRotation::haar_sample(&mut rng)).collect();
    for scheme in Scheme::ALL {
        let p: Vec<f64> = channels.iter().map(|u| randomized_survival(u, scheme)).collect();
        let mean = p.iter().sum::<f64>() / n as f64;
        let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = p.iter().cloned().fold(0.0, f64::max);
        println!("{scheme:<10} mean {mean:.4}  min {min:.4}  max {max:.4}");
    }
}
