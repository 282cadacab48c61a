mod common;

use std::f64::consts::{PI, TAU};

use common::{contexts, X_REF};
use r3bp_diffusion::manifolds::HomoclinicChannel;
use r3bp_diffusion::melnikov::{
    ds_dtheta, grid_evaluate, grid_size, read_samples_csv, sample, scattering_potential, scattering_s0,
    theta_grid, verify_sign_cover, write_samples_csv, BranchContext, MarginFloor,
    QuadratureConfig, Terms, JOINT_TOL,
};
use r3bp_diffusion::Error;

fn channels(ctx: &BranchContext) -> [HomoclinicChannel; 2] {
    [1, 2].map(|j| HomoclinicChannel::new(ctx.branch(), j))
}

fn value(ctx: &BranchContext, ch: &HomoclinicChannel, angle: f64, tau: f64, q: &QuadratureConfig) -> f64 {
    ds_dtheta(ctx, ch, angle, tau, q).unwrap().value
}

#[test]
fn pieces_of_the_homoclinic_orbit_meet() {
    for x in [-0.955, -0.9475, X_REF] {
        for ctx in contexts(x) {
            assert!(ctx.homoclinic.joint_mismatch < JOINT_TOL);
            let j = ctx.homoclinic.joints();
            for s in j {
                let a = ctx.homoclinic.state(s - 1e-12);
                let b = ctx.homoclinic.state(s + 1e-12);
                assert!((a - b).norm() < 1e-7, "jump at {s}");
            }
        }
    }
}

#[test]
fn independent_rule_and_longer_horizon_agree() {
    let q = QuadratureConfig::default();
    let oracle = q.oracle();
    for ctx in contexts(X_REF) {
        for ch in channels(ctx) {
            for angle in theta_grid(12) {
                let a = ds_dtheta(ctx, &ch, angle, 0.0, &q).unwrap();
                let b = value(ctx, &ch, angle, 0.0, &oracle);
                assert!(a.error < 1e-6 * a.value.abs().max(1.0));
                let rel = (a.value - b).abs() / a.value.abs().max(1e-3);
                assert!(rel < 1e-6, "{ch:?} {angle}: {} vs {b}", a.value);
            }
        }
    }
}

#[test]
fn truncation_plateau() {
    let q = QuadratureConfig::default();
    let long = QuadratureConfig {
        u_max: 2.0 * q.u_max,
        ..q
    };
    for ctx in contexts(-0.955) {
        for ch in channels(ctx) {
            for angle in [0.3, 2.2, 4.9] {
                let d = value(ctx, &ch, angle, 0.7, &q) - value(ctx, &ch, angle, 0.7, &long);
                assert!(d.abs() < 1e-8, "{d}");
            }
        }
    }
}

#[test]
fn periodic_in_angle_and_phase() {
    let q = QuadratureConfig::default();
    for ctx in contexts(X_REF) {
        for ch in channels(ctx) {
            for (angle, tau) in [(0.05, 0.0), (1.7, 2.0), (5.5, 4.4)] {
                let v = value(ctx, &ch, angle, tau, &q);
                assert!((v - value(ctx, &ch, angle + TAU, tau, &q)).abs() < 1e-8);
                assert!((v - value(ctx, &ch, angle - 2.0 * TAU, tau, &q)).abs() < 1e-8);
                assert!((v - value(ctx, &ch, angle, tau + TAU, &q)).abs() < 1e-8);
                // G(x, t + pi) = -G(x, t)
                assert!((v + value(ctx, &ch, angle, tau + PI, &q)).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn derivative_matches_differenced_potential() {
    let q = QuadratureConfig::default();
    let h = 1e-4;
    for ctx in contexts(X_REF) {
        for ch in channels(ctx) {
            for angle in [0.02, 1.1, 3.0, 4.6] {
                let s = |a: f64| scattering_potential(ctx, &ch, a, 0.3, &q).unwrap().value;
                let fd = (s(angle + h) - s(angle - h)) / (2.0 * h);
                let d = value(ctx, &ch, angle, 0.3, &q);
                assert!((fd - d).abs() < 1e-6, "{ch:?} {angle}: {fd} vs {d}");
            }
        }
    }
}

#[test]
fn channel_index_enters_through_the_lift() {
    let q = QuadratureConfig::default();
    for ctx in contexts(X_REF) {
        let [c1, c2] = channels(ctx);
        // where the domains overlap both channels see the same angle
        let v1 = value(ctx, &c1, 0.2, 0.0, &q);
        let v2 = value(ctx, &c2, 0.2, 0.0, &q);
        assert!((v1 - v2).abs() < 1e-12);
        // elsewhere they sit one turn apart along the homoclinic orbit
        assert!((value(ctx, &c1, 3.0, 0.0, &q) - value(ctx, &c2, 3.0, 0.0, &q)).abs() > 1e-4);
    }
}

#[test]
fn grid_respects_channel_domains() {
    let q = QuadratureConfig::default();
    let ctxs = contexts(X_REF);
    assert!(grid_evaluate(ctxs, &[], 0.0, &q).is_empty());
    let samples = grid_evaluate(ctxs, &theta_grid(16), 0.0, &q);
    assert_eq!(samples.len(), 2 * 2 * 16);
    assert_eq!(grid_size(&theta_grid(16)), 2 * 16);
    // with 8 angles the first sits on the j = 1 boundary and is skipped there
    let coarse = grid_evaluate(ctxs, &theta_grid(8), 0.0, &q);
    assert_eq!(grid_size(&theta_grid(8)), 15);
    assert_eq!(coarse.len(), 2 * 15);
    assert!(coarse.iter().all(|s| s.accepted()));
    for s in &samples {
        assert!(s.accepted(), "{s:?}");
        let (lo, hi) = if s.j == 1 { (-TAU + PI / 8.0, PI / 8.0) } else { (0.0, TAU) };
        assert!(s.theta > lo && s.theta < hi);
        assert!((s.theta - s.angle).rem_euclid(TAU) < 1e-12 || (s.theta - s.angle).rem_euclid(TAU) > TAU - 1e-12);
    }
    let hp = &ctxs[0].point;
    let c1 = HomoclinicChannel::new(hp.branch, 1);
    assert!(matches!(scattering_s0(X_REF, PI, hp, &c1), Err(Error::OutsideChannel { .. })));
    let (x, t) = scattering_s0(X_REF, 0.0, hp, &c1).unwrap();
    assert_eq!(x, X_REF);
    assert!((t + 2.0 * 1.451540621).abs() < 2e-5);
}

#[test]
fn short_horizon_is_rejected() {
    let q = QuadratureConfig {
        u_max: 5.0,
        ..QuadratureConfig::default()
    };
    let ctx = &contexts(X_REF)[0];
    let ch = HomoclinicChannel::new(ctx.branch(), 2);
    assert!(matches!(
        ds_dtheta(ctx, &ch, 1.0, 0.0, &q),
        Err(Error::TailNotReached { .. })
    ));
    let s = sample(ctx, &ch, 1.0, 0.0, &q);
    assert!(!s.accepted());
}

#[test]
fn integrals_matter_for_the_cover() {
    let q = QuadratureConfig::default();
    let bare = QuadratureConfig {
        terms: Terms::BoundaryOnly,
        ..q
    };
    let ctxs = contexts(X_REF);
    let grid = theta_grid(64);
    let full = grid_evaluate(ctxs, &grid, 0.0, &q);
    let boundary = grid_evaluate(ctxs, &grid, 0.0, &bare);
    assert!(!verify_sign_cover(&boundary, MarginFloor::default()).pass);
    let diff = full
        .iter()
        .zip(&boundary)
        .map(|(a, b)| (a.value - b.value).abs())
        .fold(0.0, f64::max);
    assert!(diff > 1e-2);
}

#[test]
fn samples_round_trip_through_csv() {
    let q = QuadratureConfig::default();
    let samples = grid_evaluate(contexts(X_REF), &theta_grid(4), 1.0, &q);
    let mut buf = Vec::new();
    write_samples_csv(&samples, &mut buf).unwrap();
    let back = read_samples_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), samples.len());
    for (a, b) in samples.iter().zip(&back) {
        assert_eq!((a.value, a.theta, a.i, a.j), (b.value, b.theta, b.i, b.j));
        assert!((a.angle - b.angle).abs() < 1e-12);
    }
}
