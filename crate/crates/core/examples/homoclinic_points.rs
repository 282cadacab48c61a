//! Locate the two symmetric homoclinic points of the reference orbit and
//! their phases.
//!
//! cargo run --release --example homoclinic_points [x_star]

use r3bp_diffusion::dynamics::SystemParams;
use r3bp_diffusion::flow::{FlowConfig, Propagator};
use r3bp_diffusion::manifolds::{homoclinic_pair, ManifoldConfig};
use r3bp_diffusion::orbits::{solve_lyapunov, ShootingConfig};

fn main() -> r3bp_diffusion::Result<()> {
    let x: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(-0.95);
    let prop = Propagator::new(SystemParams::default(), FlowConfig::default());
    let o = solve_lyapunov(&prop, x, -0.84, &ShootingConfig::default())?;
    let (mono, points) = homoclinic_pair(&prop, &o, &ManifoldConfig::default())?;
    println!("x* = {x}: T = {:.10}, lambda_u = {:.4}", o.period, mono.lambda_u);
    println!("unstable direction v = {:?}", mono.v);
    for hp in &points {
        println!();
        println!("branch {}", hp.branch.index());
        println!("  p     = ({:.11}, {:.1e}, {:.1e}, {:.11})", hp.point.x, hp.point.y, hp.point.px, hp.point.py);
        println!("  h     = {:.6e}", hp.h);
        println!("  tau   = {:.6}  ({:.2} periods)", hp.tau, hp.tau / o.period);
        println!("  omega = {:.11}", hp.omega);
        let v = hp.tangent;
        println!("  v     = ({:.6}, {:.6}, {:.6}, {:.6})", v.x, v.y, v.px, v.py);
    }
    Ok(())
}
