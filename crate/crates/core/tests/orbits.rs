mod common;

use approx::assert_abs_diff_eq;
use common::{family, orbit, prop, INTERVAL, X_REF};
use r3bp_diffusion::dynamics::{energy, SystemParams};
use r3bp_diffusion::orbits::{
    check_nonvanishing, energy_derivative, energy_derivative_chain_rule, family_nodes,
    parameterize_k0, period_derivative, scan_family, solve_lyapunov, Family, ShootingConfig,
};
use r3bp_diffusion::Error;

#[test]
fn reference_orbit() {
    let o = orbit(X_REF);
    assert_abs_diff_eq!(o.kappa, -0.8413472441, epsilon = 1e-8);
    assert_abs_diff_eq!(o.period, 3.041751775, epsilon = 1e-8);
    let h = energy(&o.q(), &SystemParams::default()).unwrap();
    assert_abs_diff_eq!(h, o.energy, epsilon = 1e-14);
    assert_abs_diff_eq!(h.abs(), 1.515, epsilon = 2e-3);
}

#[test]
fn nodes_span_the_interval() {
    let xs = family().nodes();
    assert_eq!(xs.len(), 5);
    assert_eq!(xs[0], INTERVAL.0);
    assert_eq!(xs[4], INTERVAL.1);
    assert_eq!(xs[2], X_REF);
}

#[test]
fn closes_after_one_period() {
    let p = prop();
    for o in &family().orbits {
        let end = p.flow(&o.q(), o.period).unwrap();
        assert!((end - o.q()).norm() < 1e-9, "x* = {}", o.x_star);
    }
}

#[test]
fn single_node_and_bad_interval() {
    let p = prop();
    let one = scan_family(&p, INTERVAL, 1, &ShootingConfig::default()).unwrap();
    assert_eq!(one.len(), 1);
    assert_abs_diff_eq!(one.orbits[0].x_star, X_REF, epsilon = 1e-15);
    assert_abs_diff_eq!(one.orbits[0].kappa, orbit(X_REF).kappa, epsilon = 1e-10);
    assert!(matches!(
        family_nodes((-0.945, -0.955), 5),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn twist_and_energy_hypotheses() {
    let fam = family();
    let t = check_nonvanishing(fam, period_derivative).unwrap();
    let h = check_nonvanishing(fam, energy_derivative).unwrap();
    assert!(t.pass, "{t:?}");
    assert!(h.pass, "{h:?}");
    // moving x* outward lengthens the period and raises the energy
    assert!(t.estimates.iter().all(|e| e.value < 0.0));
    for e in &h.estimates {
        let chain = energy_derivative_chain_rule(fam, e.x_star, &SystemParams::default()).unwrap();
        assert!((chain - e.value).abs() < 10.0 * e.error + 1e-8, "{chain} vs {e:?}");
    }
}

#[test]
fn kappa_from_reseeded_shooting_agrees() {
    let p = prop();
    let fam = family();
    let x = -0.9512;
    let o = solve_lyapunov(&p, x, fam.kappa_at(x).unwrap(), &ShootingConfig::default()).unwrap();
    assert!((o.kappa - fam.kappa_at(x).unwrap()).abs() < 1e-7);
}

#[test]
fn k0_is_the_flow_in_angle() {
    let p = prop();
    let o = orbit(X_REF);
    let k = parameterize_k0(&p, &o, 1.0).unwrap();
    let direct = p.flow(&o.q(), o.period / std::f64::consts::TAU).unwrap();
    assert!((k - direct).norm() < 1e-12);
    let wrapped = parameterize_k0(&p, &o, 1.0 + std::f64::consts::TAU).unwrap();
    assert!((k - wrapped).norm() < 1e-9);
}

#[test]
fn csv_round_trip() {
    let mut buf = Vec::new();
    family().write_csv(&mut buf).unwrap();
    let back = Family::read_csv(buf.as_slice(), Some(INTERVAL)).unwrap();
    assert_eq!(&back, family());
}
