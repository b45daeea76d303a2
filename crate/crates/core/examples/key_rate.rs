//! Secret fraction per conclusive result as a function of the measured
//! error rate, for a few values of p^S.

use dfs_qkd::security::{bound_ex_s, key_rate};

fn main() -> dfs_qkd::Result<()> {
    for (p_s, e_x) in [(0.97, 0.068), (0.91, 0.102)] {
        println!("p_S {p_s}, e_x {e_x}: e_x^S {:.4}, rate {:.4}", bound_ex_s(p_s, e_x)?, key_rate(p_s, e_x)?);
    }
    println!("\n e_x   p_S=1.00  p_S=0.97  p_S=0.91  p_S=0.80");
    for i in 0..=12 {
        let e = i as f64 * 0.01;
        let cols = [1.0, 0.97, 0.91, 0.8].map(|p| key_rate(p, e).map(|r| format!("{r:>8.4}")).unwrap());
        println!(" {e:.2}  {}", cols.join("  "));
    }
    Ok(())
}
