//! Check that each homoclinic channel is transversal at every family node.
//!
//! cargo run --release --example transversality

use r3bp_diffusion::dynamics::SystemParams;
use r3bp_diffusion::flow::{FlowConfig, Propagator};
use r3bp_diffusion::manifolds::{
    channel_tangent_spans, check_transversality, homoclinic_pair, ManifoldConfig,
};
use r3bp_diffusion::orbits::{scan_family, ShootingConfig};

fn main() -> r3bp_diffusion::Result<()> {
    let prop = Propagator::new(SystemParams::default(), FlowConfig::default());
    let mcfg = ManifoldConfig::default();
    let fam = scan_family(&prop, (-0.955, -0.945), 5, &ShootingConfig::default())?;
    println!("{:>8} {:>6} {:>14} {:>14} {:>10}", "x*", "branch", "dp/dx* (py)", "F(p) (px)", "sigma_min");
    for o in &fam.orbits {
        let (_, points) = homoclinic_pair(&prop, o, &mcfg)?;
        for hp in &points {
            let spans = channel_tangent_spans(&prop, hp, &fam, &mcfg)?;
            let r = check_transversality(&hp.tangent, &spans);
            println!(
                "{:>8.4} {:>6} {:>14.8} {:>14.8} {:>10.5} {}",
                o.x_star,
                hp.branch.index(),
                spans.dp_dx.py,
                spans.field.px,
                r.smallest_singular_value,
                if r.pass { "ok" } else { "DEGENERATE" }
            );
        }
    }
    Ok(())
}
