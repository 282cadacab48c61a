//! Scan the Lyapunov family near the smaller primary and check that period
//! and energy are monotone along it.
//!
//! cargo run --release --example lyapunov_family [n_nodes]

use r3bp_diffusion::dynamics::SystemParams;
use r3bp_diffusion::flow::{FlowConfig, Propagator};
use r3bp_diffusion::manifolds::monodromy;
use r3bp_diffusion::orbits::{
    check_nonvanishing, energy_derivative, period_derivative, scan_family, ShootingConfig,
};

fn main() -> r3bp_diffusion::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(9);
    let prop = Propagator::new(SystemParams::default(), FlowConfig::default());
    let fam = scan_family(&prop, (-0.955, -0.945), n, &ShootingConfig::default())?;

    println!("{:>10} {:>16} {:>14} {:>14} {:>12}", "x*", "kappa", "T", "H", "lambda_u");
    for o in &fam.orbits {
        let m = monodromy(&prop, o)?;
        println!(
            "{:>10.6} {:>16.12} {:>14.10} {:>14.10} {:>12.4}",
            o.x_star, o.kappa, o.period, o.energy, m.lambda_u
        );
    }

    let t = check_nonvanishing(&fam, period_derivative)?;
    let h = check_nonvanishing(&fam, energy_derivative)?;
    println!();
    println!("dT/dx*: one sign {} margin {:.0}", t.constant_sign, t.min_margin);
    println!("dH/dx*: one sign {} margin {:.0}", h.constant_sign, h.min_margin);
    Ok(())
}
