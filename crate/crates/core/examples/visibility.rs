//! Two-photon interference visibility against path mismatch for a 1.6 nm
//! filter at 702 nm.

use dfs_qkd::detection::{coherence_length_um, visibility_envelope};

fn main() -> dfs_qkd::Result<()> {
    let (fwhm, lambda) = (1.6, 702.0);
    println!("coherence length {:.1} um", coherence_length_um(fwhm, lambda));
    for dx in (0..=300).step_by(25) {
        let v = visibility_envelope(dx as f64, fwhm, lambda)?;
        println!("{dx:>4} um  {v:.4}  {}", "#".repeat((v * 50.0).round() as usize));
    }
    Ok(())
}
