#![allow(dead_code)]

use std::sync::OnceLock;

use r3bp_diffusion::dynamics::{State4, SystemParams};
use r3bp_diffusion::flow::{FlowConfig, Propagator};
use r3bp_diffusion::manifolds::{homoclinic_pair, HomoclinicPoint, ManifoldConfig, MonodromyData};
use r3bp_diffusion::melnikov::BranchContext;
use r3bp_diffusion::orbits::{
    parameterize_k0, scan_family, solve_lyapunov, Family, LyapunovOrbit, ShootingConfig,
};

pub const INTERVAL: (f64, f64) = (-0.955, -0.945);
pub const X_REF: f64 = -0.95;

pub fn prop() -> Propagator {
    Propagator::new(SystemParams::default(), FlowConfig::default())
}

pub fn family() -> &'static Family {
    static F: OnceLock<Family> = OnceLock::new();
    F.get_or_init(|| scan_family(&prop(), INTERVAL, 5, &ShootingConfig::default()).unwrap())
}

pub fn orbit(x: f64) -> LyapunovOrbit {
    *family().orbit_at(x).unwrap()
}

pub struct Node {
    pub orbit: LyapunovOrbit,
    pub mono: MonodromyData,
    pub points: [HomoclinicPoint; 2],
}

/// Homoclinic data at every family node, in node order.
pub fn nodes() -> &'static Vec<Node> {
    static N: OnceLock<Vec<Node>> = OnceLock::new();
    N.get_or_init(|| {
        let p = prop();
        family()
            .orbits
            .iter()
            .map(|o| {
                let (mono, points) = homoclinic_pair(&p, o, &ManifoldConfig::default()).unwrap();
                Node {
                    orbit: *o,
                    mono,
                    points,
                }
            })
            .collect()
    })
}

pub fn node(x: f64) -> &'static Node {
    nodes().iter().find(|n| n.orbit.x_star == x).unwrap()
}

/// Both branch contexts at `x`.
pub fn contexts(x: f64) -> &'static [BranchContext] {
    static C: OnceLock<Vec<(f64, Vec<BranchContext>)>> = OnceLock::new();
    let all = C.get_or_init(|| {
        let p = prop();
        nodes()
            .iter()
            .map(|n| {
                let c = n
                    .points
                    .iter()
                    .map(|hp| BranchContext::new(&p, &n.orbit, &n.mono, hp).unwrap())
                    .collect();
                (n.orbit.x_star, c)
            })
            .collect()
    });
    &all.iter().find(|(k, _)| *k == x).unwrap().1
}

/// A point on a Lyapunov orbit of the family, nudged off it.
pub fn near_family(x: f64, phase: f64, nudge: [f64; 4]) -> State4 {
    let p = prop();
    let kappa = family().kappa_at(x).unwrap();
    let o = solve_lyapunov(&p, x, kappa, &ShootingConfig::default()).unwrap();
    parameterize_k0(&p, &o, phase).unwrap() + State4::from_array(nudge)
}

/// Closest approach to the smaller primary along the orbit of `s` over `t`.
pub fn closest_approach(s: &State4, t: f64) -> Option<f64> {
    let p = prop();
    let traj = p.trajectory(s, t).ok()?;
    let (lo, hi) = (traj.t_start().min(traj.t_end()), traj.t_start().max(traj.t_end()));
    let (jx, jy) = p.params.smaller_primary();
    (0..=4000)
        .map(|k| traj.state(lo + (hi - lo) * f64::from(k) / 4000.0).map(|q| (q.x - jx).hypot(q.y - jy)))
        .try_fold(f64::INFINITY, |m, r| r.map(|r| m.min(r)))
}

/// Orbits passing closer than this to the smaller primary have left the neck region.
pub const FAR: f64 = 0.01;
