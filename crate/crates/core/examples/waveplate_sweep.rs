//! The five QWP-HWP-QWP settings used for sweeps and the survival probability
//! each one gives with and without the random flip.

use dfs_qkd::channel::{randomized_survival, survival_probability};
use dfs_qkd::{CollectiveRotation, RotatorSetting, Scheme};

fn main() {
    println!("k  qwp1    hwp    qwp2    |a|²     p_s(none)  p_s(flip_half)");
    for (k, s) in RotatorSetting::sweep_settings().iter().enumerate() {
        let u = CollectiveRotation::from_waveplates(s);
        println!(
            "{k}  {:>5.1}  {:>5.1}  {:>5.1}   {:.4}   {:.4}     {:.4}",
            s.qwp1_deg,
            s.hwp_deg,
            s.qwp2_deg,
            u.a().norm_sqr(),
            survival_probability(&u),
            randomized_survival(&u, Scheme::FlipHalf)
        );
    }
}
