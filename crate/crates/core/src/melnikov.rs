//! The unperturbed scattering maps of the four homoclinic channels and the
//! first-order change of their generating function under the elliptic
//! perturbation.
//!
//! For channel `(i, j)` at `(x*, theta)`, with `a = (theta - w_i) T / 2 pi`,
//! `b = theta T / 2 pi` and `c = (theta - 2 w_i) T / 2 pi`,
//!
//! ```text
//! dS/dtheta (s0(x*, theta)) = T/2pi [ -G(Phi_b(q), tau) + G(Phi_c(q), tau)
//!     - int_{-inf}^0 Gt(Phi_{u+a}(p_i), tau+u) - Gt(Phi_{u+b}(q), tau+u) du
//!     - int_0^inf    Gt(Phi_{u+a}(p_i), tau+u) - Gt(Phi_{u+c}(q), tau+u) du ]
//! ```
//!
//! `theta` is an angle. Each channel evaluates at the representative of
//! `theta` in its own domain, which is where the `j` index enters.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use nalgebra::Vector4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    apply_symmetry, perturbation_g, perturbation_g_dt, State4, SystemParams,
};
use crate::error::{Error, Result};
use crate::flow::{Propagator, Trajectory};
use crate::manifolds::{Branch, HomoclinicChannel, HomoclinicPoint, MonodromyData};
use crate::numerics::{composite_gauss_legendre, gauss_kronrod};
use crate::orbits::{LyapunovOrbit, PeriodicTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuadratureRule {
    /// Globally adaptive Gauss–Kronrod (7, 15).
    Adaptive,
    /// Fixed composite Gauss–Legendre, for cross-checks.
    CompositeGaussLegendre { order: usize, panel_width: f64 },
}

/// Which parts of the formula to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terms {
    Full,
    /// The two `G` terms only, integrals dropped.
    BoundaryOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Largest admissible gap between the homoclinic and the paired periodic
    /// trajectory where the integrals are cut off.
    pub delta_tail: f64,
    /// Integrals run over `[-u_max, 0]` and `[0, u_max]`.
    pub u_max: f64,
    /// Absolute tolerance for the two integrals together.
    pub abs_tol: f64,
    pub max_panels: usize,
    pub rule: QuadratureRule,
    pub terms: Terms,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            delta_tail: 1e-8,
            u_max: 40.0,
            abs_tol: 1e-10,
            max_panels: 20_000,
            rule: QuadratureRule::Adaptive,
            terms: Terms::Full,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let rule_ok = match self.rule {
            QuadratureRule::Adaptive => true,
            QuadratureRule::CompositeGaussLegendre { order, panel_width } => {
                order >= 2 && panel_width > 0.0
            }
        };
        if self.delta_tail > 0.0 && self.u_max > 0.0 && self.abs_tol > 0.0 && rule_ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid quadrature config {self:?}")))
        }
    }

    /// The cross-check configuration: composite Gauss–Legendre over twice
    /// the horizon.
    pub fn oracle(&self) -> Self {
        Self {
            u_max: 2.0 * self.u_max,
            rule: QuadratureRule::CompositeGaussLegendre {
                order: 12,
                panel_width: 0.2,
            },
            ..*self
        }
    }
}

/// Largest fibre offset used to seed the transit piece.
pub const FIBRE_SEED_MAX: f64 = 2e-5;

/// Largest gap tolerated where the pieces of a [`HomoclinicOrbit`] meet.
pub const JOINT_TOL: f64 = 1e-7;

/// The homoclinic orbit through `p_i` for all times, assembled from pieces
/// that are each integrated in a stable direction.
///
/// * `[-T, 0]`: backward from `p_i`.
/// * `[s0, -T]`: forward from a seed on the linear fibre of `q`.
/// * before `s0`: the linear fibre itself.
/// * positive times: the reversing symmetry.
///
/// The seed sits `k` periods after `q_h`, at an offset near
/// [`FIBRE_SEED_MAX`]. Rounding of a seed with a tiny offset would shift the
/// fibre parameter noticeably, while the curvature of the fibre makes
/// `h lambda^k` itself inaccurate at order `h lambda^k`. The offset is
/// therefore corrected by Newton until the transit piece meets the backward
/// piece from `p_i`.
#[derive(Debug, Clone)]
pub struct HomoclinicOrbit {
    point: State4,
    seed_time: f64,
    seed_offset: f64,
    near_span: f64,
    lambda_u: f64,
    period: f64,
    v: Vector4<f64>,
    near: Trajectory,
    transit: Trajectory,
    fibre: Trajectory,
    /// Distance between the transit and backward pieces where they meet.
    pub joint_mismatch: f64,
}

impl HomoclinicOrbit {
    pub fn new(
        prop: &Propagator,
        orbit: &LyapunovOrbit,
        mono: &MonodromyData,
        hp: &HomoclinicPoint,
    ) -> Result<Self> {
        let near_span = orbit.period.min(hp.tau);
        let mut k = 0;
        while hp.h * mono.lambda_u.powi(k + 1) <= FIBRE_SEED_MAX
            && hp.tau - f64::from(k + 1) * orbit.period >= near_span
        {
            k += 1;
        }
        let seed_time = -hp.tau + f64::from(k) * orbit.period;
        let duration = -seed_time - near_span;
        let near = prop.trajectory(&hp.point, -near_span)?;
        let target = near.state(-near_span).expect("end of run");

        // Newton on the offset; iterates stall at rounding level, so keep
        // the closest one
        let mut seed_offset = hp.h * mono.lambda_u.powi(k);
        let mut best = (f64::INFINITY, seed_offset);
        for _ in 0..6 {
            let seed = orbit.q() + seed_offset * mono.v;
            let (end, m) = prop.flow_with_variational(&seed, duration)?;
            let r = (end - target).to_vector();
            if r.norm() < best.0 {
                best = (r.norm(), seed_offset);
            }
            let d = m * mono.v.to_vector();
            let step = r.dot(&d) / d.norm_squared();
            if step.abs() <= 1e-14 * seed_offset {
                break;
            }
            seed_offset -= step;
        }
        let (joint_mismatch, seed_offset) = best;
        if !(joint_mismatch < JOINT_TOL) {
            return Err(Error::NoConvergence {
                what: "homoclinic orbit assembly",
                iterations: 6,
                residual: joint_mismatch,
            });
        }

        // same system as the Newton runs, so the end point is the one matched
        let transit = prop.variational_trajectory(&(orbit.q() + seed_offset * mono.v), duration)?;
        let fibre = prop.variational_trajectory(&orbit.q(), orbit.period)?;
        Ok(Self {
            point: hp.point,
            seed_time,
            seed_offset,
            near_span,
            lambda_u: mono.lambda_u,
            period: orbit.period,
            v: mono.v.to_vector(),
            near,
            transit,
            fibre,
            joint_mismatch,
        })
    }

    pub fn point(&self) -> State4 {
        self.point
    }

    /// `Phi_s(p_i)`.
    pub fn state(&self, s: f64) -> State4 {
        if s > 0.0 {
            return apply_symmetry(&self.state(-s));
        }
        if s >= -self.near_span {
            return self.near.state(s).expect("inside the near piece");
        }
        if s >= self.seed_time {
            return self
                .transit
                .state(s - self.seed_time)
                .expect("inside the transit piece");
        }
        let (base, dev) = self.fibre_split(s - self.seed_time);
        base + dev
    }

    /// Orbit point and fibre displacement at time `t < 0` from the seed.
    fn fibre_split(&self, t: f64) -> (State4, State4) {
        let k = (t / self.period).floor();
        let r = (t - k * self.period).clamp(0.0, self.period);
        let y = self.fibre.eval(r).expect("reduced time lies in one period");
        let base = State4::from_slice(&y);
        let m = nalgebra::Matrix4::from_row_slice(&y[4..20]);
        let scale = self.seed_offset * self.lambda_u.powf(k);
        (base, State4::from_vector(&(scale * (m * self.v))))
    }

    /// Times where the pieces meet; the integrand is only continuous there.
    pub fn joints(&self) -> [f64; 5] {
        [
            self.seed_time,
            -self.near_span,
            0.0,
            self.near_span,
            -self.seed_time,
        ]
    }

    /// Decay rate of the gap to the periodic orbit, per unit time.
    pub fn decay_rate(&self) -> f64 {
        self.lambda_u.ln() / self.period
    }
}

/// Everything needed to evaluate one branch at one `x*`.
#[derive(Debug, Clone)]
pub struct BranchContext {
    pub orbit: LyapunovOrbit,
    pub point: HomoclinicPoint,
    pub periodic: PeriodicTable,
    pub homoclinic: HomoclinicOrbit,
    params: SystemParams,
}

impl BranchContext {
    pub fn new(
        prop: &Propagator,
        orbit: &LyapunovOrbit,
        mono: &MonodromyData,
        hp: &HomoclinicPoint,
    ) -> Result<Self> {
        Ok(Self {
            orbit: *orbit,
            point: *hp,
            periodic: orbit.table(prop)?,
            homoclinic: HomoclinicOrbit::new(prop, orbit, mono, hp)?,
            params: prop.params,
        })
    }

    pub fn branch(&self) -> Branch {
        self.point.branch
    }
}

/// `s0^{i,j}(x*, theta) = (x*, theta - 2 w_i)`, `theta` taken in the
/// channel's domain.
pub fn scattering_s0(
    x_star: f64,
    theta: f64,
    hp: &HomoclinicPoint,
    channel: &HomoclinicChannel,
) -> Result<(f64, f64)> {
    if !channel.contains(theta) {
        return Err(Error::OutsideChannel { theta });
    }
    Ok((x_star, theta - 2.0 * hp.omega))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelnikovSample {
    pub x_star: f64,
    /// Grid angle in `[0, 2 pi)`.
    pub angle: f64,
    /// `angle` lifted into the channel's domain.
    pub theta: f64,
    pub tau: f64,
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub error: f64,
    /// Why the sample was rejected, if it was.
    pub rejected: Option<String>,
}

impl MelnikovSample {
    pub fn accepted(&self) -> bool {
        self.rejected.is_none()
    }
}

/// A value and its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Which function of the trajectories is integrated.
#[derive(Clone, Copy)]
enum Integrand {
    G,
    Gt,
}

impl Integrand {
    fn eval(self, s: &State4, t: f64, p: &SystemParams) -> Result<f64> {
        match self {
            Integrand::G => perturbation_g(s, t, p),
            Integrand::Gt => perturbation_g_dt(s, t, p),
        }
    }
}

fn integrate(
    f: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: f64,
    qcfg: &QuadratureConfig,
) -> Result<Estimate> {
    match qcfg.rule {
        QuadratureRule::Adaptive => {
            let r = gauss_kronrod(f, lo, hi, breaks, tol, qcfg.max_panels)?;
            Ok(Estimate {
                value: r.value,
                error: r.error,
            })
        }
        QuadratureRule::CompositeGaussLegendre { order, panel_width } => Ok(Estimate {
            value: composite_gauss_legendre(f, lo, hi, order, panel_width)?,
            error: 0.0,
        }),
    }
}

/// `int [F(Phi_{u+a}(p), tau+u) - F(Phi_{u+ref}(q), tau+u)] du` over
/// `[-U, 0]` (`backward`) or `[0, U]`, with the tail beyond `U` bounded by
/// geometric extrapolation from the last period.
fn half_integral(
    ctx: &BranchContext,
    which: Integrand,
    a: f64,
    reference: f64,
    tau: f64,
    backward: bool,
    qcfg: &QuadratureConfig,
) -> Result<Estimate> {
    let hom = &ctx.homoclinic;
    let per = &ctx.periodic;
    let p = &ctx.params;
    let f = |u: f64| -> Result<f64> {
        let x = hom.state(u + a);
        let y = per.at_time(u + reference);
        Ok(which.eval(&x, tau + u, p)? - which.eval(&y, tau + u, p)?)
    };
    let u_max = qcfg.u_max;
    let (lo, hi) = if backward { (-u_max, 0.0) } else { (0.0, u_max) };
    let edge = if backward { lo } else { hi };

    let gap = (hom.state(edge + a) - per.at_time(edge + reference)).norm();
    if !(gap < qcfg.delta_tail) {
        return Err(Error::TailNotReached {
            delta: gap,
            u_max,
        });
    }

    let breaks: Vec<f64> = {
        let mut b: Vec<f64> = hom
            .joints()
            .iter()
            .map(|s| s - a)
            .filter(|&u| u > lo && u < hi)
            .collect();
        b.sort_by(f64::total_cmp);
        b
    };
    let est = integrate(&f, lo, hi, &breaks, 0.5 * qcfg.abs_tol, qcfg)?;

    // tail beyond the horizon
    let period = ctx.orbit.period;
    let inward = if backward { 1.0 } else { -1.0 };
    let samples = 32;
    let mut envelope: f64 = 0.0;
    for k in 0..=samples {
        let u = edge + inward * period * k as f64 / samples as f64;
        envelope = envelope.max(f(u)?.abs());
    }
    let tail = envelope / hom.decay_rate();
    Ok(Estimate {
        value: est.value,
        error: est.error + tail,
    })
}

/// Angles `a, b, c` converted to times, for `theta` already lifted.
fn phase_times(ctx: &BranchContext, theta: f64) -> (f64, f64, f64) {
    let scale = ctx.orbit.period / TAU;
    let w = ctx.point.omega;
    ((theta - w) * scale, theta * scale, (theta - 2.0 * w) * scale)
}

fn lift(channel: &HomoclinicChannel, theta: f64) -> Result<f64> {
    channel.lift(theta).ok_or(Error::OutsideChannel { theta })
}

/// `dS^{i,j}_{0,tau} / dtheta` at `s0^{i,j}(x*, theta)`.
pub fn ds_dtheta(
    ctx: &BranchContext,
    channel: &HomoclinicChannel,
    theta: f64,
    tau: f64,
    qcfg: &QuadratureConfig,
) -> Result<Estimate> {
    if channel.branch != ctx.branch() {
        return Err(Error::InvalidInput(format!(
            "channel {channel:?} does not belong to branch {:?}",
            ctx.branch()
        )));
    }
    qcfg.validate()?;
    let theta = lift(channel, theta)?;
    let (a, b, c) = phase_times(ctx, theta);
    let per = &ctx.periodic;
    let p = &ctx.params;
    let boundary = -perturbation_g(&per.at_time(b), tau, p)? + perturbation_g(&per.at_time(c), tau, p)?;
    let (mut value, mut error) = (boundary, 0.0);
    if qcfg.terms == Terms::Full {
        let minus = half_integral(ctx, Integrand::Gt, a, b, tau, true, qcfg)?;
        let plus = half_integral(ctx, Integrand::Gt, a, c, tau, false, qcfg)?;
        value -= minus.value + plus.value;
        error += minus.error + plus.error;
    }
    let scale = ctx.orbit.period / TAU;
    Ok(Estimate {
        value: scale * value,
        error: scale * error,
    })
}

/// `S^{i,j}_{0,tau}(s0^{i,j}(x*, theta))` itself, for diagnostics.
pub fn scattering_potential(
    ctx: &BranchContext,
    channel: &HomoclinicChannel,
    theta: f64,
    tau: f64,
    qcfg: &QuadratureConfig,
) -> Result<Estimate> {
    qcfg.validate()?;
    let theta = lift(channel, theta)?;
    let (a, b, c) = phase_times(ctx, theta);
    let minus = half_integral(ctx, Integrand::G, a, b, tau, true, qcfg)?;
    let plus = half_integral(ctx, Integrand::G, a, c, tau, false, qcfg)?;
    Ok(Estimate {
        value: minus.value + plus.value,
        error: minus.error + plus.error,
    })
}

/// One sample, rejected rather than failed when the evaluation errors or
/// its error bound is too loose.
pub fn sample(
    ctx: &BranchContext,
    channel: &HomoclinicChannel,
    angle: f64,
    tau: f64,
    qcfg: &QuadratureConfig,
) -> MelnikovSample {
    let theta = channel.lift(angle).unwrap_or(f64::NAN);
    let mut s = MelnikovSample {
        x_star: ctx.orbit.x_star,
        angle,
        theta,
        tau,
        i: channel.branch.index(),
        j: channel.j,
        value: f64::NAN,
        error: f64::NAN,
        rejected: None,
    };
    match ds_dtheta(ctx, channel, angle, tau, qcfg) {
        Ok(e) => {
            s.value = e.value;
            s.error = e.error;
            if !(e.error < 1e-6 * e.value.abs().max(1.0)) {
                s.rejected = Some(format!("error bound {:e} too large", e.error));
            }
        }
        Err(e) => s.rejected = Some(e.to_string()),
    }
    s
}

/// `n` angles `2 pi (k + 1/2) / n`, offset by half a cell so no node sits on
/// a channel boundary.
pub fn theta_grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * (k as f64 + 0.5) / n as f64).collect()
}

/// Samples for every context, channel of its branch and angle inside the
/// channel's domain. Evaluated in parallel; the output order is that of the
/// inputs.
pub fn grid_evaluate(
    contexts: &[BranchContext],
    angles: &[f64],
    tau: f64,
    qcfg: &QuadratureConfig,
) -> Vec<MelnikovSample> {
    let mut tasks = Vec::new();
    for ctx in contexts {
        for j in [1, 2] {
            let ch = HomoclinicChannel::new(ctx.branch(), j);
            for &angle in angles {
                if ch.lift(angle).is_some() {
                    tasks.push((ctx, ch, angle));
                }
            }
        }
    }
    tasks
        .par_iter()
        .map(|(ctx, ch, angle)| sample(ctx, ch, *angle, tau, qcfg))
        .collect()
}

/// Number of samples [`grid_evaluate`] produces for one branch context.
/// Channel domains do not depend on the branch.
pub fn grid_size(angles: &[f64]) -> usize {
    [1, 2]
        .map(|j| HomoclinicChannel::new(Branch::Left, j))
        .iter()
        .map(|ch| angles.iter().filter(|&&a| ch.lift(a).is_some()).count())
        .sum()
}

/// Threshold a witness must clear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MarginFloor {
    /// A multiple of each sample's own error estimate.
    ErrorMultiple(f64),
    Absolute(f64),
}

impl Default for MarginFloor {
    fn default() -> Self {
        MarginFloor::ErrorMultiple(10.0)
    }
}

impl MarginFloor {
    pub fn for_sample(&self, s: &MelnikovSample) -> f64 {
        match *self {
            MarginFloor::ErrorMultiple(k) => k * s.error,
            MarginFloor::Absolute(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeVerdict {
    pub x_star: f64,
    pub angle: f64,
    pub positive: Option<Witness>,
    pub negative: Option<Witness>,
}

impl NodeVerdict {
    pub fn covered(&self) -> bool {
        self.positive.is_some() && self.negative.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub x_nodes: Vec<f64>,
    pub angles: usize,
    pub tau: f64,
    pub margin_floor: MarginFloor,
    pub nodes: Vec<NodeVerdict>,
    pub pass: bool,
    /// Over nodes, the smallest of the largest positive values.
    pub min_positive_margin: f64,
    /// Over nodes, the largest of the most negative values.
    pub max_negative_margin: f64,
    pub samples: usize,
    pub rejected: usize,
}

/// Groups samples by grid node and looks for one value above the floor and
/// one below its negative.
pub fn verify_sign_cover(samples: &[MelnikovSample], floor: MarginFloor) -> Certificate {
    let mut keys: Vec<(f64, f64)> = samples.iter().map(|s| (s.x_star, s.angle)).collect();
    keys.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    keys.dedup();

    let mut nodes = Vec::with_capacity(keys.len());
    let mut min_pos = f64::INFINITY;
    let mut max_neg = f64::NEG_INFINITY;
    for &(x, angle) in &keys {
        let here = samples
            .iter()
            .filter(|s| s.x_star == x && s.angle == angle && s.accepted());
        let mut verdict = NodeVerdict {
            x_star: x,
            angle,
            positive: None,
            negative: None,
        };
        let (mut best_pos, mut best_neg) = (f64::NEG_INFINITY, f64::INFINITY);
        for s in here {
            let m = floor.for_sample(s);
            let w = Witness {
                i: s.i,
                j: s.j,
                theta: s.theta,
                value: s.value,
                error: s.error,
            };
            best_pos = best_pos.max(s.value);
            best_neg = best_neg.min(s.value);
            if s.value > m && verdict.positive.map_or(true, |p| s.value > p.value) {
                verdict.positive = Some(w);
            }
            if s.value < -m && verdict.negative.map_or(true, |n| s.value < n.value) {
                verdict.negative = Some(w);
            }
        }
        min_pos = min_pos.min(best_pos);
        max_neg = max_neg.max(best_neg);
        nodes.push(verdict);
    }
    let mut x_nodes: Vec<f64> = keys.iter().map(|k| k.0).collect();
    x_nodes.dedup();
    let angles = keys.iter().filter(|k| k.0 == keys[0].0).count();
    Certificate {
        x_nodes,
        angles,
        tau: samples.first().map_or(0.0, |s| s.tau),
        margin_floor: floor,
        pass: !nodes.is_empty() && nodes.iter().all(NodeVerdict::covered),
        nodes,
        min_positive_margin: min_pos,
        max_negative_margin: max_neg,
        samples: samples.len(),
        rejected: samples.iter().filter(|s| !s.accepted()).count(),
    }
}

#[derive(Serialize, Deserialize)]
struct SampleRow {
    x_star: f64,
    theta: f64,
    tau: f64,
    i: usize,
    j: usize,
    value: f64,
    error: f64,
    status: String,
}

pub fn write_samples_csv<W: Write>(samples: &[MelnikovSample], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in samples {
        out.serialize(SampleRow {
            x_star: s.x_star,
            theta: s.theta,
            tau: s.tau,
            i: s.i,
            j: s.j,
            value: s.value,
            error: s.error,
            status: s.rejected.clone().unwrap_or_else(|| "ok".into()),
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a table written by [`write_samples_csv`]; `#` lines are skipped.
pub fn read_samples_csv<R: Read>(r: R) -> Result<Vec<MelnikovSample>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: SampleRow = row?;
        out.push(MelnikovSample {
            x_star: row.x_star,
            angle: row.theta.rem_euclid(TAU),
            theta: row.theta,
            tau: row.tau,
            i: row.i,
            j: row.j,
            value: row.value,
            error: row.error,
            rejected: (row.status != "ok").then_some(row.status),
        });
    }
    Ok(out)
}
