//! Print the four curves dS/dtheta for one family node, one gnuplot block per
//! (branch, channel).
//!
//! cargo run --release --example melnikov_curves [x_star] [tau] > curves.dat
//! gnuplot> plot for [k=0:3] 'curves.dat' index k with lines

use r3bp_diffusion::dynamics::SystemParams;
use r3bp_diffusion::flow::{FlowConfig, Propagator};
use r3bp_diffusion::manifolds::{homoclinic_pair, HomoclinicChannel, ManifoldConfig};
use r3bp_diffusion::melnikov::{ds_dtheta, theta_grid, BranchContext, QuadratureConfig};
use r3bp_diffusion::orbits::{solve_lyapunov, ShootingConfig};

fn main() -> r3bp_diffusion::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<f64>().ok());
    let x = args.next().flatten().unwrap_or(-0.95);
    let tau = args.next().flatten().unwrap_or(0.0);

    let prop = Propagator::new(SystemParams::default(), FlowConfig::default());
    let o = solve_lyapunov(&prop, x, -0.84, &ShootingConfig::default())?;
    let (mono, points) = homoclinic_pair(&prop, &o, &ManifoldConfig::default())?;
    let q = QuadratureConfig::default();

    for hp in &points {
        let ctx = BranchContext::new(&prop, &o, &mono, hp)?;
        for j in [1, 2] {
            let ch = HomoclinicChannel::new(hp.branch, j);
            println!("# i={} j={j} theta domain {:?}", hp.branch.index(), ch.theta_domain());
            let mut rows = Vec::new();
            for angle in theta_grid(128) {
                let e = ds_dtheta(&ctx, &ch, angle, tau, &q)?;
                rows.push((ch.lift(angle).unwrap_or(f64::NAN), e.value, e.error));
            }
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (theta, v, err) in rows {
                println!("{theta:.6} {v:+.10e} {err:.1e}");
            }
            println!("\n");
        }
    }
    Ok(())
}
