//! Propagate the reference orbit, its differential and its returns to the
//! symmetry axis.
//!
//! cargo run --release --example flow_and_sections

use r3bp_diffusion::dynamics::{apply_symmetry, energy, symplectic_j, SystemParams};
use r3bp_diffusion::flow::{FlowConfig, Propagator, Section};
use r3bp_diffusion::orbits::{solve_lyapunov, ShootingConfig};

fn main() -> r3bp_diffusion::Result<()> {
    let params = SystemParams::default();
    let prop = Propagator::new(params, FlowConfig::default());
    let o = solve_lyapunov(&prop, -0.95, -0.84, &ShootingConfig::default())?;
    let q = o.q();
    println!("q = {q:?}, T = {:.10}, H = {:.12}", o.period, energy(&q, &params)?);

    let (half, t) = prop.poincare_map(&q, &Section::y_axis(), 1)?;
    println!("first return to y = 0 after {t:.10} (T/2 = {:.10}): {half:?}", o.period / 2.0);
    let (back, t2) = prop.poincare_map(&q, &Section::y_axis(), 2)?;
    println!("second return after {t2:.10}, |q - P^2 q| = {:.2e}", (back - q).norm());

    let (_, m) = prop.flow_with_variational(&q, o.period)?;
    let j = symplectic_j();
    println!("|M^T J M - J| = {:.2e}", (m.transpose() * j * m - j).norm());
    println!("eigenvalues of the monodromy matrix:");
    for z in m.complex_eigenvalues().iter() {
        println!("  {:+.10e} {:+.3e}i", z.re, z.im);
    }

    // time reversal through the symmetry
    let s = prop.flow(&q, 1.3)?;
    let r = prop.flow(&apply_symmetry(&q), -1.3)?;
    println!("|S(phi_t q) - phi_-t(S q)| = {:.2e}", (apply_symmetry(&s) - r).norm());

    let drift = energy(&prop.flow(&q, 100.0)?, &params)? - energy(&q, &params)?;
    println!("energy drift over 100 time units: {drift:.2e}");
    Ok(())
}
