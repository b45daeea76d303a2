//! The four logical states, and what the tag/rotate/tag pipeline does to one
//! of them under an arbitrary collective rotation.

use dfs_qkd::channel::delta_params;
use dfs_qkd::hilbert::Target;
use dfs_qkd::protocol::prepare;
use dfs_qkd::{CollectiveRotation, LogicalState, Pol};

fn main() -> dfs_qkd::Result<()> {
    for l in LogicalState::ALL {
        println!("{l:?} (basis {:?}, bit {}):\n  {}", l.basis(), l.bit(), prepare(l));
    }

    let u = CollectiveRotation::from_angles(0.7, 0.3, -1.1);
    let d = delta_params(&u);
    // δ1 and δ3 are real, δ2 is imaginary.
    println!("\nchannel {u}\n  δ1 = {:.4}, δ2 = {:.4}i, δ3 = {:.4}", d.d1.re, d.d2.im, d.d3.re);

    let out = prepare(LogicalState::PsiPlus)
        .tag(Pol::V)?
        .apply_pol_unitary(&u.matrix(), Target::Both)?
        .tag(Pol::H)?;
    println!("after both tags:\n  {out}");
    let (kept, p) = out.project_equal_bins();
    println!("equal-bin part (probability {p:.4}, |a|⁴ = {:.4}):\n  {}", d.survival(), kept.normalized()?);
    Ok(())
}
