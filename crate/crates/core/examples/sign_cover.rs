//! Evaluate the Melnikov grid over the family and try to certify that every
//! node has a positive and a negative witness.
//!
//! cargo run --release --example sign_cover [angles] [tau]

use r3bp_diffusion::dynamics::SystemParams;
use r3bp_diffusion::flow::{FlowConfig, Propagator};
use r3bp_diffusion::manifolds::{homoclinic_pair, ManifoldConfig};
use r3bp_diffusion::melnikov::{
    grid_evaluate, theta_grid, verify_sign_cover, BranchContext, MarginFloor, QuadratureConfig,
};
use r3bp_diffusion::orbits::{scan_family, ShootingConfig};

fn main() -> r3bp_diffusion::Result<()> {
    let mut args = std::env::args().skip(1);
    let angles: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(64);
    let tau: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.0);

    let prop = Propagator::new(SystemParams::default(), FlowConfig::default());
    let fam = scan_family(&prop, (-0.955, -0.945), 5, &ShootingConfig::default())?;
    let mut ctxs = Vec::new();
    for o in &fam.orbits {
        let (mono, points) = homoclinic_pair(&prop, o, &ManifoldConfig::default())?;
        for hp in &points {
            ctxs.push(BranchContext::new(&prop, o, &mono, hp)?);
        }
    }

    let samples = grid_evaluate(&ctxs, &theta_grid(angles), tau, &QuadratureConfig::default());
    let cert = verify_sign_cover(&samples, MarginFloor::default());
    for x in &cert.x_nodes {
        let nodes: Vec<_> = cert.nodes.iter().filter(|n| n.x_star == *x).collect();
        let covered = nodes.iter().filter(|n| n.covered()).count();
        println!("x* = {x:.4}: {covered} of {} angles covered", nodes.len());
    }
    println!(
        "{}: min positive margin {:.4}, max negative margin {:.4}, {} rejected",
        if cert.pass { "PASS" } else { "FAIL" },
        cert.min_positive_margin,
        cert.max_negative_margin,
        cert.rejected
    );
    Ok(())
}
