//! Bob's random phase mask wipes out coherences between the protected
//! subspace and the other post-selected modes.

use num_complex::Complex64;

use dfs_qkd::protocol::{dephase, max_s_coherence, outside_s_modes_before_tag, s_modes_before_tag};
use dfs_qkd::{PairDensity, PairState};

fn main() -> dfs_qkd::Result<()> {
    let [s1, s2] = s_modes_before_tag();
    let [o1, o2] = outside_s_modes_before_tag();
    let state = PairState::pure([
        (s1, Complex64::new(0.6, 0.0)),
        (s2, Complex64::new(0.0, 0.5)),
        (o1, Complex64::new(0.3, 0.3)),
        (o2, Complex64::new(-0.2, 0.1)),
    ])?;
    let rho = PairDensity::from_state(&state);
    let avg = dephase(&rho)?;
    println!("max S/outside coherence before: {:.4}", max_s_coherence(&rho));
    println!("max S/outside coherence after:  {:.2e}", max_s_coherence(&avg));
    println!("S block after averaging:");
    for r in [s1, s2] {
        println!("  {:.3}  {:.3}", avg.element(r, s1), avg.element(r, s2));
    }
    Ok(())
}
