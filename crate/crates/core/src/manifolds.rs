//! Unstable fibres of Lyapunov orbits and their symmetric homoclinic points.
//!
//! A point `q_h = q(x*) + h v` on the unstable fibre of `q(x*)` is flowed to
//! `{y = 0, x > 0}`. Where it lands with `px = 0` it lies on the fixed set of
//! `S`, so its orbit is homoclinic to the Lyapunov orbit.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::{Matrix4, SMatrix, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{symmetry_matrix, symplectic_j, vector_field, State4};
use crate::error::{Error, Result};
use crate::flow::{Propagator, Section};
use crate::numerics::brent;
use crate::orbits::{solve_lyapunov, Family, LyapunovOrbit, ShootingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldConfig {
    /// Largest fibre offset. Offsets sweep one fundamental domain
    /// `(h_max / lambda_u, h_max]`.
    pub h_max: f64,
    /// Samples of the coarse sweep over one fundamental domain.
    pub sweep_samples: usize,
    /// Largest admissible shift of `p_i` when moving one domain up.
    pub linearization_tol: f64,
    /// Step in `x*` for `d p_i / d x*`.
    pub dx_star: f64,
    /// Most `Sigma_{x>0}` crossings tried when looking for a branch.
    pub max_crossings: usize,
    pub shooting: ShootingConfig,
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self {
            h_max: 2e-8,
            sweep_samples: 48,
            linearization_tol: 1e-8,
            dx_star: 2.5e-4,
            max_crossings: 2,
            shooting: ShootingConfig::default(),
        }
    }
}

/// Eigen-data of `A = DPhi_T(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyData {
    pub matrix: Matrix4<f64>,
    pub lambda_u: f64,
    pub lambda_s: f64,
    /// The pair that equals `(1, 1)` for an exact periodic orbit, as
    /// `(re, im)` of the two roots.
    pub unit_pair: [(f64, f64); 2],
    /// Unstable eigenvector, unit length, first component positive.
    pub v: State4,
}

impl MonodromyData {
    /// Largest distance of the unit pair from 1.
    pub fn unit_pair_deviation(&self) -> f64 {
        self.unit_pair
            .iter()
            .map(|&(re, im)| (re - 1.0).hypot(im))
            .fold(0.0, f64::max)
    }

    /// `max |A^T J A - J|`.
    pub fn symplectic_defect(&self) -> f64 {
        let j = symplectic_j();
        (self.matrix.transpose() * j * self.matrix - j).abs().max()
    }

    /// `v` scaled so its first component is 1.
    pub fn v_normalized(&self) -> State4 {
        normalize_first(self.v.to_vector())
    }
}

/// Scales `w` so its first component of magnitude above `1e-12 |w|` is 1.
pub fn normalize_first(w: Vector4<f64>) -> State4 {
    let floor = 1e-12 * w.norm();
    let lead = w.iter().copied().find(|c| c.abs() > floor).unwrap_or(1.0);
    State4::from_vector(&(w / lead))
}

/// Builds the monodromy from the half period: `A = R B^-1 R B` with
/// `B = DPhi_{T/2}(q)` and `R = DS`, which makes `A` reversible exactly.
pub fn monodromy(prop: &Propagator, orbit: &LyapunovOrbit) -> Result<MonodromyData> {
    let (_, b) = prop.flow_with_variational(&orbit.q(), 0.5 * orbit.period)?;
    let j = symplectic_j();
    let r = symmetry_matrix();
    let b_inv = -(j * b.transpose() * j);
    let a = r * b_inv * r * b;

    // A symplectic 4x4 matrix has characteristic polynomial
    // l^4 - c1 l^3 + c2 l^2 - c1 l + 1; with s = l + 1/l this is
    // s^2 - c1 s + (c2 - 2) = 0.
    let c1 = a.trace();
    let c2 = 0.5 * (c1 * c1 - (a * a).trace());
    let disc = (c1 * c1 - 4.0 * (c2 - 2.0)).max(0.0).sqrt();
    let s_big = 0.5 * (c1 + disc);
    let s_unit = (c2 - 2.0) / s_big;
    if !(s_big > 2.0) {
        return Err(Error::EigenPattern(format!(
            "orbit is not hyperbolic (trace {c1})"
        )));
    }
    let lambda_u = 0.5 * (s_big + (s_big * s_big - 4.0).sqrt());
    let lambda_s = 1.0 / lambda_u;
    let d = s_unit * s_unit - 4.0;
    let unit_pair = if d >= 0.0 {
        let r = d.sqrt();
        [(0.5 * (s_unit + r), 0.0), (0.5 * (s_unit - r), 0.0)]
    } else {
        let i = (-d).sqrt();
        [(0.5 * s_unit, 0.5 * i), (0.5 * s_unit, -0.5 * i)]
    };

    // power iteration; the other eigenvalues are at most 1 in modulus
    let mut w = Vector4::new(1.0, 0.3, -0.2, 0.1);
    for _ in 0..12 {
        w = a * w;
        w /= w.norm();
    }
    if w[0] < 0.0 {
        w = -w;
    }
    let residual = (a * w - lambda_u * w).norm() / lambda_u;
    if residual > 1e-8 {
        return Err(Error::EigenPattern(format!(
            "unstable eigenvector residual {residual:e}"
        )));
    }

    let data = MonodromyData {
        matrix: a,
        lambda_u,
        lambda_s,
        unit_pair,
        v: State4::from_vector(&w),
    };
    let dev = data.unit_pair_deviation();
    if dev > 1e-6 {
        return Err(Error::EigenPattern(format!(
            "unit pair deviates from 1 by {dev:e}"
        )));
    }
    Ok(data)
}

/// Which symmetric homoclinic point: 1 is the left (smaller `x`) one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Left = 1,
    Right = 2,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Left, Branch::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Branch::Left),
            2 => Ok(Branch::Right),
            _ => Err(Error::InvalidInput(format!("branch must be 1 or 2, got {i}"))),
        }
    }
}

/// Where to look for one branch: a bracket of fibre offsets and how many
/// crossings of `{y = 0, x > 0}` precede the symmetric one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberBracket {
    pub h_lo: f64,
    pub h_hi: f64,
    pub crossings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicPoint {
    pub x_star: f64,
    pub branch: Branch,
    pub point: State4,
    /// Fibre offset `h_i`.
    pub h: f64,
    /// `tau(h_i)`, time from `q_h` to `p_i`.
    pub tau: f64,
    /// `2 pi tau / T` reduced to `(-pi, pi]`.
    pub omega: f64,
    /// `DPhi_tau(q_h) v`, first component 1.
    pub tangent: State4,
    pub crossings: usize,
}

/// Reduces an angle to `(-pi, pi]`.
pub fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Landing point on `{y = 0, x > 0}` after `crossings` crossings from `q + h v`.
pub fn fiber_landing(
    prop: &Propagator,
    orbit: &LyapunovOrbit,
    mono: &MonodromyData,
    h: f64,
    crossings: usize,
) -> Result<(State4, f64)> {
    let seed = orbit.q() + h * mono.v;
    prop.poincare_map(&seed, &Section::y_axis_positive_x(), crossings)
}

fn residual(
    prop: &Propagator,
    orbit: &LyapunovOrbit,
    mono: &MonodromyData,
    h: f64,
    crossings: usize,
) -> Result<f64> {
    Ok(fiber_landing(prop, orbit, mono, h, crossings)?.0.px)
}

/// Sweeps one fundamental domain of positive offsets and returns a bracket
/// for each branch, discovering the crossing count on the way.
pub fn discover_brackets(
    prop: &Propagator,
    orbit: &LyapunovOrbit,
    mono: &MonodromyData,
    cfg: &ManifoldConfig,
) -> Result<[FiberBracket; 2]> {
    let h_top = cfg.h_max;
    let n = cfg.sweep_samples.max(4);
    let hs: Vec<f64> = (0..=n)
        .map(|k| h_top * mono.lambda_u.powf(-(k as f64) / n as f64))
        .collect();
    for crossings in 1..=cfg.max_crossings {
        let mut samples = Vec::with_capacity(hs.len());
        for &h in &hs {
            samples.push(fiber_landing(prop, orbit, mono, h, crossings).ok());
        }
        let mut found: Vec<(f64, FiberBracket)> = Vec::new();
        for k in 0..n {
            if let (Some((a, _)), Some((b, _))) = (samples[k], samples[k + 1]) {
                if a.px.signum() != b.px.signum() {
                    found.push((
                        0.5 * (a.x + b.x),
                        FiberBracket {
                            h_lo: hs[k + 1],
                            h_hi: hs[k],
                            crossings,
                        },
                    ));
                }
            }
        }
        if found.len() == 2 {
            found.sort_by(|a, b| a.0.total_cmp(&b.0));
            return Ok([found[0].1, found[1].1]);
        }
    }
    Err(Error::NoSignChange)
}

/// A solved fibre offset with its landing on the section.
struct Landing {
    h: f64,
    point: State4,
    tau: f64,
    tangent: Vector4<f64>,
}

/// Finds the root of `px` over a bracket of offsets.
///
/// Adaptive step selection depends on the initial state, which makes the
/// computed landing jitter at the level of the integration tolerance. All
/// evaluations therefore run on the step mesh of the bracket's midpoint so
/// the residual is a smooth function of `h` down to rounding of the seed.
/// That rounding (one ulp of `q` against an offset near `1e-10`) still leaves
/// `px` far above its target, so the landing is finished by [`polish`].
fn solve_in_bracket(
    prop: &Propagator,
    orbit: &LyapunovOrbit,
    mono: &MonodromyData,
    br: &FiberBracket,
) -> Result<Landing> {
    let section = Section::y_axis_positive_x();
    let seed = |h: f64| orbit.q() + h * mono.v;
    let h_mid = (br.h_lo * br.h_hi).sqrt();
    let (_, t_mid) = prop.poincare_map(&seed(h_mid), &section, br.crossings)?;
    let mesh = prop.step_mesh(&seed(h_mid), t_mid + 0.5 * orbit.period)?;
    let f = |u: f64| -> Result<f64> {
        let (p, _) = prop.poincare_map_on_mesh(&seed(u.exp()), &section, br.crossings, &mesh)?;
        Ok(p.px)
    };
    let (u, _) = brent(f, br.h_lo.ln(), br.h_hi.ln(), 1e-15, 200)?;
    let h = u.exp();
    let (point, m, tau) =
        prop.poincare_map_with_variational_on_mesh(&seed(h), &section, br.crossings, &mesh)?;
    polish(
        prop,
        orbit,
        Landing {
            h,
            point,
            tau,
            tangent: m * mono.v.to_vector(),
        },
    )
}

/// Drives `px` to zero along the manifold.
///
/// The landing is pulled back one period to a point `z` well away from the
/// Lyapunov orbit and moved along the transported fibre tangent `w` there by
/// Newton. The move stays on the manifold up to its square, and pulling back
/// a period shrinks it by `lambda_u`.
fn polish(prop: &Propagator, orbit: &LyapunovOrbit, landing: Landing) -> Result<Landing> {
    const TARGET: f64 = 1e-12;
    let pullback = orbit.period;
    let section = Section::y_axis_positive_x();
    let (z, mz) = prop.flow_with_variational(&landing.point, -pullback)?;
    let mut w = mz * landing.tangent;
    // moving z by s w changes the fibre offset by s / |w|
    let dz_dh = w.norm();
    w /= dz_dh;

    let mut s = 0.0;
    let mut best: Option<Landing> = None;
    for _ in 0..8 {
        let start = z + s * State4::from_vector(&w);
        let (p, m, t) = prop.poincare_map_with_variational(&start, &section, 1)?;
        if (t - pullback).abs() > 0.1 * pullback {
            return Err(Error::NoConvergence {
                what: "homoclinic polish (another crossing intervened)",
                iterations: 0,
                residual: p.px.abs(),
            });
        }
        let f = vector_field(&p, &prop.params)?;
        let mw = m * w;
        let slope = mw[2] - f.px * mw[1] / f.y;
        let candidate = Landing {
            h: landing.h + s / dz_dh,
            point: p,
            tau: landing.tau - pullback + t,
            tangent: mw,
        };
        let improved = best
            .as_ref()
            .map_or(true, |b| p.px.abs() < b.point.px.abs());
        if improved {
            best = Some(candidate);
        }
        let step = -p.px / slope;
        if p.px.abs() < 0.01 * TARGET || step.abs() < 1e-16 {
            break;
        }
        s += step;
    }
    let best = best.expect("at least one iteration");
    if best.point.px.abs() > TARGET {
        return Err(Error::NoConvergence {
            what: "homoclinic polish",
            iterations: 8,
            residual: best.point.px.abs(),
        });
    }
    Ok(best)
}

/// Locates `p_i` from a fibre bracket and checks the offset is small enough
/// by re-solving one fundamental domain further up the fibre: if the larger
/// offset already lands within tolerance, the linearization error of the
/// smaller one, quadratic in `h`, is far below it.
pub fn find_symmetric_homoclinic(
    prop: &Propagator,
    orbit: &LyapunovOrbit,
    mono: &MonodromyData,
    branch: Branch,
    bracket: &FiberBracket,
    cfg: &ManifoldConfig,
) -> Result<HomoclinicPoint> {
    let landed = solve_in_bracket(prop, orbit, mono, bracket)?;

    let upper = FiberBracket {
        h_lo: bracket.h_lo * mono.lambda_u,
        h_hi: bracket.h_hi * mono.lambda_u,
        ..*bracket
    };
    let check = solve_in_bracket(prop, orbit, mono, &upper).map_err(|e| {
        Error::FiberOffset(format!("re-solve one domain up failed: {e}"))
    })?;
    let shift = (landed.point - check.point).norm();
    if shift > cfg.linearization_tol {
        return Err(Error::FiberOffset(format!(
            "p moved by {shift:e} between offsets {:e} and {:e}",
            landed.h, check.h
        )));
    }

    Ok(HomoclinicPoint {
        x_star: orbit.x_star,
        branch,
        point: landed.point,
        h: landed.h,
        tau: landed.tau,
        omega: reduce_angle(TAU * landed.tau / orbit.period),
        tangent: normalize_first(landed.tangent),
        crossings: bracket.crossings,
    })
}

/// Both symmetric homoclinic points of one orbit, left branch first.
pub fn homoclinic_pair(
    prop: &Propagator,
    orbit: &LyapunovOrbit,
    cfg: &ManifoldConfig,
) -> Result<(MonodromyData, [HomoclinicPoint; 2])> {
    let mono = monodromy(prop, orbit)?;
    let [b1, b2] = discover_brackets(prop, orbit, &mono, cfg)?;
    let p1 = find_symmetric_homoclinic(prop, orbit, &mono, Branch::Left, &b1, cfg)?;
    let p2 = find_symmetric_homoclinic(prop, orbit, &mono, Branch::Right, &b2, cfg)?;
    Ok((mono, [p1, p2]))
}

/// Re-solves a branch for a nearby orbit, starting from a bracket around the
/// known offset and widening it until the residual changes sign.
fn track_branch(
    prop: &Propagator,
    orbit: &LyapunovOrbit,
    hp: &HomoclinicPoint,
    cfg: &ManifoldConfig,
) -> Result<HomoclinicPoint> {
    let mono = monodromy(prop, orbit)?;
    let mut width = 0.02;
    while width <= 0.5 {
        let br = FiberBracket {
            h_lo: hp.h * mono.lambda_u.powf(-width),
            h_hi: hp.h * mono.lambda_u.powf(width),
            crossings: hp.crossings,
        };
        let lo = residual(prop, orbit, &mono, br.h_lo, br.crossings);
        let hi = residual(prop, orbit, &mono, br.h_hi, br.crossings);
        if let (Ok(a), Ok(b)) = (lo, hi) {
            if a.signum() != b.signum() {
                return find_symmetric_homoclinic(prop, orbit, &mono, hp.branch, &br, cfg);
            }
        }
        width *= 2.0;
    }
    Err(Error::NoSignChange)
}

/// `T_{p_i} Gamma^i = span(d p_i / d x*, F(p_i))`, each normalized so its
/// first significant component is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpans {
    pub dp_dx: State4,
    pub field: State4,
    /// Richardson error estimate of the unnormalized `d p_i / d x*`.
    pub dp_dx_error: f64,
}

/// Central differences of `p_i` over neighbouring orbits with step halving.
pub fn channel_tangent_spans(
    prop: &Propagator,
    hp: &HomoclinicPoint,
    fam: &Family,
    cfg: &ManifoldConfig,
) -> Result<ChannelSpans> {
    let solve_at = |x: f64| -> Result<State4> {
        let orbit = solve_lyapunov(prop, x, fam.kappa_at(x)?, &cfg.shooting)?;
        Ok(track_branch(prop, &orbit, hp, cfg)?.point)
    };
    let central = |d: f64| -> Result<Vector4<f64>> {
        let plus = solve_at(hp.x_star + d)?;
        let minus = solve_at(hp.x_star - d)?;
        Ok((plus - minus).to_vector() / (2.0 * d))
    };
    let d = cfg.dx_star;
    let coarse = central(d)?;
    let fine = central(0.5 * d)?;
    let value = (4.0 * fine - coarse) / 3.0;
    let error = (fine - coarse).norm() / 3.0;
    if error > 0.1 * value.norm() {
        return Err(Error::FiniteDifference {
            value: value.norm(),
            error,
        });
    }
    let field = vector_field(&hp.point, &prop.params)?;
    Ok(ChannelSpans {
        dp_dx: normalize_first(value),
        field: normalize_first(field.to_vector()),
        dp_dx_error: error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    /// Rows `v_i`, `d p_i / d x*`, `F(p_i)`, each scaled to unit length.
    pub rows: [[f64; 4]; 3],
    pub smallest_singular_value: f64,
    pub pass: bool,
}

pub const TRANSVERSALITY_FLOOR: f64 = 1e-3;

/// Rank test of `[v; dp/dx*; F]` after normalizing each row.
pub fn check_transversality(tangent: &State4, spans: &ChannelSpans) -> TransversalityReport {
    transversality_of_rows([*tangent, spans.dp_dx, spans.field])
}

pub fn transversality_of_rows(rows: [State4; 3]) -> TransversalityReport {
    let mut m = SMatrix::<f64, 3, 4>::zeros();
    let mut out = [[0.0; 4]; 3];
    for (i, r) in rows.iter().enumerate() {
        let v = r.to_vector();
        let n = v.norm();
        let u = if n > 0.0 && n.is_finite() { v / n } else { v * 0.0 };
        for k in 0..4 {
            m[(i, k)] = u[k];
            out[i][k] = u[k];
        }
    }
    let sv = m.singular_values();
    let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let smallest = if smallest.is_finite() { smallest } else { 0.0 };
    TransversalityReport {
        rows: out,
        smallest_singular_value: smallest,
        pass: smallest > TRANSVERSALITY_FLOOR,
    }
}

/// The angle domain of channel `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomoclinicChannel {
    pub branch: Branch,
    pub j: usize,
}

impl HomoclinicChannel {
    pub fn all() -> [HomoclinicChannel; 4] {
        [
            Self::new(Branch::Left, 1),
            Self::new(Branch::Left, 2),
            Self::new(Branch::Right, 1),
            Self::new(Branch::Right, 2),
        ]
    }

    pub fn new(branch: Branch, j: usize) -> Self {
        assert!(j == 1 || j == 2, "channel index must be 1 or 2");
        Self { branch, j }
    }

    /// Open interval of admissible `theta`.
    pub fn theta_domain(&self) -> (f64, f64) {
        if self.j == 1 {
            (-TAU + PI / 8.0, PI / 8.0)
        } else {
            (0.0, TAU)
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        let (a, b) = self.theta_domain();
        theta > a && theta < b
    }

    /// The representative of `theta` modulo `2 pi` in the domain, if any.
    pub fn lift(&self, theta: f64) -> Option<f64> {
        let (a, _) = self.theta_domain();
        let t = a + (theta - a).rem_euclid(TAU);
        self.contains(t).then_some(t)
    }
}

/// One row of the homoclinic table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomoclinicRow {
    pub x_star: f64,
    pub branch: usize,
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
    pub h: f64,
    pub tau: f64,
    pub omega: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub v_px: f64,
    pub v_py: f64,
    pub dp_x: f64,
    pub dp_py: f64,
    pub transversality_margin: f64,
    pub crossings: usize,
    pub status: String,
}

impl HomoclinicRow {
    pub fn new(hp: &HomoclinicPoint, spans: Option<&ChannelSpans>) -> Self {
        let (dp, margin, status) = match spans {
            Some(s) => {
                let rep = check_transversality(&hp.tangent, s);
                let status = if rep.pass { "ok" } else { "not transversal" };
                (s.dp_dx, rep.smallest_singular_value, status.to_string())
            }
            None => (State4::default(), f64::NAN, "no spans".to_string()),
        };
        Self {
            x_star: hp.x_star,
            branch: hp.branch.index(),
            x: hp.point.x,
            y: hp.point.y,
            px: hp.point.px,
            py: hp.point.py,
            h: hp.h,
            tau: hp.tau,
            omega: hp.omega,
            v_x: hp.tangent.x,
            v_y: hp.tangent.y,
            v_px: hp.tangent.px,
            v_py: hp.tangent.py,
            dp_x: dp.x,
            dp_py: dp.py,
            transversality_margin: margin,
            crossings: hp.crossings,
            status,
        }
    }

    /// A row for a solve that failed; numeric fields are NaN.
    pub fn failed(x_star: f64, branch: Branch, reason: &str) -> Self {
        let nan = f64::NAN;
        Self {
            x_star,
            branch: branch.index(),
            x: nan,
            y: nan,
            px: nan,
            py: nan,
            h: nan,
            tau: nan,
            omega: nan,
            v_x: nan,
            v_y: nan,
            v_px: nan,
            v_py: nan,
            dp_x: nan,
            dp_py: nan,
            transversality_margin: nan,
            crossings: 0,
            status: reason.to_string(),
        }
    }

    pub fn point(&self) -> State4 {
        State4::new(self.x, self.y, self.px, self.py)
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    /// The homoclinic point this row was written from.
    pub fn homoclinic_point(&self) -> Result<HomoclinicPoint> {
        if self.point().is_finite() && self.h.is_finite() && self.tau.is_finite() {
            Ok(HomoclinicPoint {
                x_star: self.x_star,
                branch: Branch::from_index(self.branch)?,
                point: self.point(),
                h: self.h,
                tau: self.tau,
                omega: self.omega,
                tangent: State4::new(self.v_x, self.v_y, self.v_px, self.v_py),
                crossings: self.crossings,
            })
        } else {
            Err(Error::InvalidInput(format!(
                "no homoclinic point in row for x* = {}, branch {}: {}",
                self.x_star, self.branch, self.status
            )))
        }
    }
}

/// Reads rows written by [`write_homoclinic_csv`]; `#` lines are skipped.
pub fn read_homoclinic_csv<R: std::io::Read>(r: R) -> Result<Vec<HomoclinicRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn write_homoclinic_csv<W: Write>(w: W, rows: &[HomoclinicRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
