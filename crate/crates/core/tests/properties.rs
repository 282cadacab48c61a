mod common;

use std::f64::consts::TAU;

use common::{closest_approach, contexts, family, near_family, prop, FAR, INTERVAL, X_REF};
use proptest::prelude::*;
use r3bp_diffusion::dynamics::{apply_symmetry, energy, symplectic_j, SystemParams};
use r3bp_diffusion::manifolds::{monodromy, HomoclinicChannel};
use r3bp_diffusion::melnikov::{
    ds_dtheta, verify_sign_cover, MarginFloor, MelnikovSample, QuadratureConfig,
};
use r3bp_diffusion::orbits::{solve_lyapunov, ShootingConfig};

fn nudge() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1e-3..1e-3f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_is_conserved(x in INTERVAL.0..INTERVAL.1, phase in 0.0..TAU, d in nudge(), t in -100.0..100.0f64) {
        let params = SystemParams::default();
        let p = prop();
        let s = near_family(x, phase, d);
        prop_assume!(closest_approach(&s, t).is_some_and(|r| r > FAR));
        let end = p.flow(&s, t).unwrap();
        let drift = (energy(&end, &params).unwrap() - energy(&s, &params).unwrap()).abs();
        prop_assert!(drift <= 1e-10, "drift {drift:e}");
    }

    #[test]
    fn differential_is_symplectic(x in INTERVAL.0..INTERVAL.1, phase in 0.0..TAU, d in nudge(), t in -3.0..3.0f64) {
        let p = prop();
        let j = symplectic_j();
        let s = near_family(x, phase, d);
        prop_assume!(closest_approach(&s, t).is_some_and(|r| r > FAR));
        let (_, m) = p.flow_with_variational(&s, t).unwrap();
        let defect = (m.transpose() * j * m - j).norm() / m.norm().powi(2).max(1.0);
        prop_assert!(defect < 1e-8, "{defect:e}");
    }

    #[test]
    fn reversible(x in INTERVAL.0..INTERVAL.1, phase in 0.0..TAU, d in nudge(), t in -6.0..6.0f64) {
        let p = prop();
        let s = near_family(x, phase, d);
        prop_assume!(closest_approach(&s, t).is_some_and(|r| r > FAR));
        let a = apply_symmetry(&p.flow(&s, t).unwrap());
        let b = p.flow(&apply_symmetry(&s), -t).unwrap();
        prop_assert!((a - b).norm() < 1e-9 * a.norm().max(1.0));
    }

    #[test]
    fn monodromy_spectrum(x in INTERVAL.0..INTERVAL.1) {
        let p = prop();
        let kappa = family().kappa_at(x).unwrap();
        let o = solve_lyapunov(&p, x, kappa, &ShootingConfig::default()).unwrap();
        let m = monodromy(&p, &o).unwrap();
        prop_assert!(m.lambda_u > 1.0);
        prop_assert!((m.lambda_u * m.lambda_s - 1.0).abs() < 1e-6);
        prop_assert!(m.unit_pair_deviation() < 1e-6);
        prop_assert!(m.symplectic_defect() < 1e-8);
    }

    #[test]
    fn melnikov_is_periodic(angle in 0.0..TAU, tau in 0.0..TAU, k in -2i32..3, branch in 0usize..2, j in 1usize..3) {
        let q = QuadratureConfig::default();
        let ctx = &contexts(X_REF)[branch];
        let ch = HomoclinicChannel::new(ctx.branch(), j);
        let v = ds_dtheta(ctx, &ch, angle, tau, &q).unwrap().value;
        let shift = TAU * f64::from(k);
        let a = ds_dtheta(ctx, &ch, angle + shift, tau, &q).unwrap().value;
        let b = ds_dtheta(ctx, &ch, angle, tau + shift, &q).unwrap().value;
        prop_assert!((v - a).abs() < 1e-8);
        prop_assert!((v - b).abs() < 1e-8);
    }
}

fn synthetic(values: &[f64]) -> Vec<MelnikovSample> {
    values
        .iter()
        .enumerate()
        .map(|(k, &value)| MelnikovSample {
            x_star: X_REF,
            angle: 1.0 + (k / 4) as f64,
            theta: 1.0,
            tau: 0.0,
            i: 1 + (k % 4) / 2,
            j: 1 + k % 2,
            value,
            error: 1e-9,
            rejected: None,
        })
        .collect()
}

proptest! {
    #[test]
    fn cover_is_both_signs_at_every_node(values in prop::collection::vec(-1.0..1.0f64, 4..40)) {
        let n = values.len() / 4 * 4;
        let values = &values[..n];
        let c = verify_sign_cover(&synthetic(values), MarginFloor::Absolute(0.1));
        let expected = values
            .chunks(4)
            .all(|v| v.iter().any(|&x| x > 0.1) && v.iter().any(|&x| x < -0.1));
        prop_assert_eq!(c.pass, expected);
        prop_assert_eq!(c.nodes.len(), n / 4);
        for node in &c.nodes {
            if let Some(w) = node.positive { prop_assert!(w.value > 0.1); }
            if let Some(w) = node.negative { prop_assert!(w.value < -0.1); }
        }
    }

    #[test]
    fn lift_is_an_angle(theta in -20.0..20.0f64, k in -3i32..4) {
        for ch in HomoclinicChannel::all() {
            let a = ch.lift(theta);
            let b = ch.lift(theta + TAU * f64::from(k));
            match (a, b) {
                (Some(a), Some(b)) => {
                    prop_assert!(ch.contains(a));
                    prop_assert!((a - b).abs() < 1e-9);
                }
                (None, None) => {}
                // a value within rounding of a domain edge
                (a, b) => {
                    let (lo, hi) = ch.theta_domain();
                    let t = a.or(b).unwrap();
                    prop_assert!((t - lo).abs() < 1e-9 || (t - hi).abs() < 1e-9);
                }
            }
        }
    }
}
