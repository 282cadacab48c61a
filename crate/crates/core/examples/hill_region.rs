//! Draw the Hill region at the energy of the reference orbit as text.
//!
//! cargo run --release --example hill_region [x_star]

use r3bp_diffusion::dynamics::{collinear_points, energy, hill_region_indicator, SystemParams};
use r3bp_diffusion::flow::{FlowConfig, Propagator};
use r3bp_diffusion::orbits::{solve_lyapunov, ShootingConfig};

fn main() -> r3bp_diffusion::Result<()> {
    let x: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(-0.95);
    let params = SystemParams::default();
    let prop = Propagator::new(params, FlowConfig::default());
    let o = solve_lyapunov(&prop, x, -0.84, &ShootingConfig::default())?;
    let h = energy(&o.q(), &params)?;
    let l = collinear_points(&params)?;
    println!("H = {h:.10}; collinear points at x = {:.6}, {:.6}, {:.6}", l[0], l[1], l[2]);

    let (w, ht) = (100, 44);
    for r in 0..ht {
        let y = 1.5 - 3.0 * r as f64 / (ht - 1) as f64;
        let line: String = (0..w)
            .map(|c| {
                let x = -1.5 + 3.0 * c as f64 / (w - 1) as f64;
                if hill_region_indicator(x, y, h, &params) { ' ' } else { '#' }
            })
            .collect();
        println!("{line}");
    }
    // zoom on the two necks around the smaller primary
    println!();
    for r in 0..21 {
        let y = 0.1 - 0.2 * r as f64 / 20.0;
        let line: String = (0..100)
            .map(|c| {
                let x = -1.2 + 0.4 * c as f64 / 99.0;
                if hill_region_indicator(x, y, h, &params) { ' ' } else { '#' }
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
