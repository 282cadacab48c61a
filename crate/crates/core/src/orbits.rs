//! Planar Lyapunov orbits around the collinear point between the primaries.
//!
//! An orbit is labelled by its left crossing `x*` of the `x` axis, where it
//! passes through `q(x*) = (x*, 0, 0, kappa)`. Symmetry under `S` means the
//! orbit is closed as soon as its first return to `{y = 0}` has `px = 0`.

use std::f64::consts::TAU;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    collinear_points, energy, energy_gradient, potential_hessian, vector_field, State4,
    SystemParams,
};
use crate::error::{Error, Result};
use crate::flow::{Propagator, Section, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    pub max_newton: usize,
    /// Required `|px|` at the half turn.
    pub residual_tol: f64,
    /// Largest step in `x*` during continuation.
    pub continuation_step: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            max_newton: 50,
            residual_tol: 1e-12,
            continuation_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOrbit {
    pub x_star: f64,
    pub kappa: f64,
    pub period: f64,
    pub energy: f64,
}

impl LyapunovOrbit {
    /// The left axis crossing `q(x*)`.
    pub fn q(&self) -> State4 {
        State4::on_symmetry_axis(self.x_star, self.kappa)
    }

    /// One period of the orbit as a dense trajectory, for repeated lookups.
    pub fn table(&self, prop: &Propagator) -> Result<PeriodicTable> {
        Ok(PeriodicTable {
            period: self.period,
            traj: prop.trajectory(&self.q(), self.period)?,
        })
    }
}

/// A periodic orbit stored over one period; lookups reduce time mod `T`.
#[derive(Debug, Clone)]
pub struct PeriodicTable {
    period: f64,
    traj: Trajectory,
}

impl PeriodicTable {
    pub fn period(&self) -> f64 {
        self.period
    }

    /// `Phi_s(q)` for any real `s`.
    pub fn at_time(&self, s: f64) -> State4 {
        let r = s.rem_euclid(self.period);
        self.traj
            .state(r.min(self.period))
            .expect("reduced time lies in the stored period")
    }

    /// `k0(theta)` for any real angle.
    pub fn at_angle(&self, theta: f64) -> State4 {
        self.at_time(theta.rem_euclid(TAU) * self.period / TAU)
    }
}

/// `px` at the first return to `{y = 0}`, its derivative in `py`, and the time.
fn half_turn(prop: &Propagator, x_star: f64, py: f64) -> Result<(f64, f64, f64)> {
    let q = State4::on_symmetry_axis(x_star, py);
    let (s, m, t) = prop.poincare_map_with_variational(&q, &Section::y_axis(), 1)?;
    let f = vector_field(&s, &prop.params)?;
    let dt = -m[(1, 3)] / f.y;
    Ok((s.px, m[(2, 3)] + f.px * dt, t))
}

/// Solves for `kappa` by safeguarded Newton on the half-turn residual.
pub fn solve_lyapunov(
    prop: &Propagator,
    x_star: f64,
    py_guess: f64,
    cfg: &ShootingConfig,
) -> Result<LyapunovOrbit> {
    const MAX_NEWTON_STEP: f64 = 0.05;
    let mut py = py_guess;
    let mut bracket: Option<(f64, f64, f64, f64)> = None;
    let mut previous: Option<(f64, f64)> = None;
    let mut residual = f64::INFINITY;

    for _ in 0..cfg.max_newton {
        let (r, slope, t_half) = match half_turn(prop, x_star, py) {
            Ok(v) => v,
            Err(e) => match bracket {
                Some((lo, _, hi, _)) => {
                    py = 0.5 * (lo + hi);
                    continue;
                }
                None => return Err(e),
            },
        };
        residual = r.abs();
        let converged = residual < 0.01 * cfg.residual_tol;
        let stalled = residual < cfg.residual_tol && (r / slope).abs() < 1e-15;
        if converged || stalled {
            let q = State4::on_symmetry_axis(x_star, py);
            return Ok(LyapunovOrbit {
                x_star,
                kappa: py,
                period: 2.0 * t_half,
                energy: energy(&q, &prop.params)?,
            });
        }

        bracket = match (bracket, previous) {
            (Some((lo, r_lo, hi, r_hi)), _) => Some(if r.signum() == r_lo.signum() {
                (py, r, hi, r_hi)
            } else {
                (lo, r_lo, py, r)
            }),
            (None, Some((p0, r0))) if r0.signum() != r.signum() => Some((p0, r0, py, r)),
            _ => None,
        };
        previous = Some((py, r));

        let step = (-r / slope).clamp(-MAX_NEWTON_STEP, MAX_NEWTON_STEP);
        let mut next = py + step;
        if let Some((lo, _, hi, _)) = bracket {
            let inside = next > lo.min(hi) && next < lo.max(hi);
            if !inside || !step.is_finite() {
                next = 0.5 * (lo + hi);
            }
        } else if !step.is_finite() {
            break;
        }
        py = next;
    }
    Err(Error::NoConvergence {
        what: "Lyapunov orbit shooting",
        iterations: cfg.max_newton,
        residual,
    })
}

/// `kappa` predicted by the linearization at the middle collinear point.
pub fn linear_seed(x_star: f64, params: &SystemParams) -> Result<f64> {
    let l = collinear_points(params)?[1];
    let (a, _, b) = potential_hessian(l, 0.0, params)?;
    let s = 4.0 - a - b;
    let nu2 = 0.5 * (s + (s * s - 4.0 * a * b).sqrt());
    let amplitude = l - x_star;
    Ok(x_star + 0.5 * amplitude * (nu2 + a))
}

/// Orbits at sample nodes of an interval of `x*`, ordered by `x*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Family {
    pub interval: (f64, f64),
    pub orbits: Vec<LyapunovOrbit>,
}

impl Family {
    pub fn new(interval: (f64, f64), mut orbits: Vec<LyapunovOrbit>) -> Result<Self> {
        orbits.sort_by(|a, b| a.x_star.total_cmp(&b.x_star));
        if orbits.windows(2).any(|w| w[0].x_star == w[1].x_star) {
            return Err(Error::InvalidInput("duplicate family nodes".into()));
        }
        Ok(Self { interval, orbits })
    }

    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.orbits.iter().map(|o| o.x_star).collect()
    }

    pub fn orbit_at(&self, x_star: f64) -> Option<&LyapunovOrbit> {
        self.orbits.iter().find(|o| o.x_star == x_star)
    }

    /// Indices of the `k` nodes closest to `x`, in increasing `x*`.
    fn nearest(&self, x: f64, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            let da = (self.orbits[a].x_star - x).abs();
            let db = (self.orbits[b].x_star - x).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        });
        idx.truncate(k);
        idx.sort_unstable();
        idx
    }

    fn interpolate(&self, x: f64, f: impl Fn(&LyapunovOrbit) -> f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::InvalidInput("empty family".into()));
        }
        let idx = self.nearest(x, 4);
        let xs: Vec<f64> = idx.iter().map(|&i| self.orbits[i].x_star).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| f(&self.orbits[i])).collect();
        Ok(lagrange_value(&xs, &ys, x))
    }

    /// Cubic interpolation of `kappa` through the nearest nodes.
    pub fn kappa_at(&self, x: f64) -> Result<f64> {
        self.interpolate(x, |o| o.kappa)
    }

    pub fn period_at(&self, x: f64) -> Result<f64> {
        self.interpolate(x, |o| o.period)
    }

    pub fn energy_at(&self, x: f64) -> Result<f64> {
        self.interpolate(x, |o| o.energy)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for o in &self.orbits {
            wtr.serialize(o)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads rows written by [`Self::write_csv`]; `#` lines are skipped.
    pub fn read_csv<R: Read>(r: R, interval: Option<(f64, f64)>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let orbits = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<LyapunovOrbit>, _>>()?;
        let interval = match interval {
            Some(i) => i,
            None => {
                let lo = orbits.iter().map(|o| o.x_star).fold(f64::INFINITY, f64::min);
                let hi = orbits.iter().map(|o| o.x_star).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        };
        Self::new(interval, orbits)
    }
}

/// Node positions: both ends of the interval and evenly spaced points
/// between, or the midpoint alone for a single node.
pub fn family_nodes(interval: (f64, f64), n_nodes: usize) -> Result<Vec<f64>> {
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidInput(format!(
            "interval must satisfy lo < hi, got ({lo}, {hi})"
        )));
    }
    match n_nodes {
        0 => Err(Error::InvalidInput("at least one node is required".into())),
        1 => Ok(vec![0.5 * (lo + hi)]),
        n => Ok((0..n)
            .map(|k| {
                if k == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * k as f64 / (n - 1) as f64
                }
            })
            .collect()),
    }
}

/// Continues the family from the linearization out to every node of `interval`.
pub fn scan_family(
    prop: &Propagator,
    interval: (f64, f64),
    n_nodes: usize,
    cfg: &ShootingConfig,
) -> Result<Family> {
    let nodes = family_nodes(interval, n_nodes)?;
    let l = collinear_points(&prop.params)?[1];
    let top = *nodes.last().expect("nonempty");
    if top >= l {
        return Err(Error::InvalidInput(format!(
            "nodes must lie left of the libration point x = {l}"
        )));
    }
    let start = top.max(l - cfg.continuation_step);
    let mut history: Vec<LyapunovOrbit> = Vec::new();
    let mut solved = Vec::new();

    let first = solve_lyapunov(prop, start, linear_seed(start, &prop.params)?, cfg)
        .map_err(|e| breakdown(start, e))?;
    history.push(first);
    let mut current = start;
    for &target in nodes.iter().rev() {
        let pieces = ((current - target) / cfg.continuation_step).ceil().max(0.0) as usize;
        for k in 1..=pieces {
            let x = if k == pieces {
                target
            } else {
                current + (target - current) * k as f64 / pieces as f64
            };
            let orbit = continue_to(prop, &history, x, cfg)?;
            history.push(orbit);
        }
        current = target;
        let orbit = *history.last().expect("nonempty");
        debug_assert_eq!(orbit.x_star, target);
        solved.push(orbit);
    }
    Family::new(interval, solved)
}

fn breakdown(x_star: f64, e: Error) -> Error {
    Error::ContinuationBreakdown {
        x_star,
        reason: e.to_string(),
    }
}

/// One continuation step with extrapolated seed, halving on failure.
fn continue_to(
    prop: &Propagator,
    history: &[LyapunovOrbit],
    x: f64,
    cfg: &ShootingConfig,
) -> Result<LyapunovOrbit> {
    let last = history.last().expect("nonempty history");
    if x == last.x_star {
        return Ok(*last);
    }
    let k = history.len().min(3);
    let tail = &history[history.len() - k..];
    let seed = if k == 1 {
        last.kappa + linear_seed(x, &prop.params)? - linear_seed(last.x_star, &prop.params)?
    } else {
        let xs: Vec<f64> = tail.iter().map(|o| o.x_star).collect();
        let ys: Vec<f64> = tail.iter().map(|o| o.kappa).collect();
        lagrange_value(&xs, &ys, x)
    };
    let orbit = match solve_lyapunov(prop, x, seed, cfg) {
        Ok(o) => o,
        Err(e) => {
            let mid = 0.5 * (x + last.x_star);
            if (mid - last.x_star).abs() < cfg.continuation_step / 64.0 {
                return Err(breakdown(x, e));
            }
            let half = continue_to(prop, history, mid, cfg)?;
            let mut extended = history.to_vec();
            extended.push(half);
            return continue_to(prop, &extended, x, cfg);
        }
    };
    if let [.., a, b] = history {
        // the period grows with amplitude; a reversal signals a fold
        let before = (b.period - a.period) / (b.x_star - a.x_star);
        let now = (orbit.period - b.period) / (orbit.x_star - b.x_star);
        if before.signum() != now.signum() {
            return Err(Error::ContinuationBreakdown {
                x_star: x,
                reason: "period no longer monotone in x*".into(),
            });
        }
    }
    Ok(orbit)
}

/// `k0(x*, theta) = Phi_{theta T / 2 pi}(q(x*))`.
pub fn parameterize_k0(prop: &Propagator, orbit: &LyapunovOrbit, theta: f64) -> Result<State4> {
    let t = theta.rem_euclid(TAU) * orbit.period / TAU;
    prop.flow(&orbit.q(), t)
}

fn lagrange_value(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (i, (&xi, &yi)) in xs.iter().zip(ys).enumerate() {
        let mut w = 1.0;
        for (m, &xm) in xs.iter().enumerate() {
            if m != i {
                w *= (x - xm) / (xi - xm);
            }
        }
        acc += w * yi;
    }
    acc
}

fn lagrange_derivative(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut d = 0.0;
        for m in (0..n).filter(|&m| m != i) {
            let mut w = 1.0 / (xs[i] - xs[m]);
            for l in (0..n).filter(|&l| l != i && l != m) {
                w *= (x - xs[l]) / (xs[i] - xs[l]);
            }
            d += w;
        }
        acc += d * ys[i];
    }
    acc
}

/// A finite-difference derivative over family nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeEstimate {
    pub x_star: f64,
    pub value: f64,
    /// Difference between the high- and low-order stencils. With only two
    /// nodes no estimate exists and this is `|value|`.
    pub error: f64,
    pub low_confidence: bool,
}

impl DerivativeEstimate {
    /// `|value| / error`, the margin by which the sign is resolved.
    pub fn margin(&self) -> f64 {
        self.value.abs() / self.error
    }
}

/// Derivative of a node quantity at `x`: the interpolant through the five
/// nearest nodes, checked against the one through the nearest three.
pub fn node_derivative(
    fam: &Family,
    x: f64,
    f: impl Fn(&LyapunovOrbit) -> f64,
) -> Result<DerivativeEstimate> {
    let nodes = fam.nodes();
    let (lo, hi) = fam.interval;
    if !(lo < hi) || nodes.len() < 2 {
        return Err(Error::InvalidInput(
            "derivative needs a family with two or more nodes on a nonempty interval".into(),
        ));
    }
    let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
    if !(x >= first && x <= last) {
        return Err(Error::InvalidInput(format!(
            "x* = {x} outside the sampled range [{first}, {last}]"
        )));
    }
    let stencil = |k: usize| {
        let idx = fam.nearest(x, k);
        let xs: Vec<f64> = idx.iter().map(|&i| fam.orbits[i].x_star).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| f(&fam.orbits[i])).collect();
        lagrange_derivative(&xs, &ys, x)
    };
    if nodes.len() == 2 {
        let value = stencil(2);
        return Ok(DerivativeEstimate {
            x_star: x,
            value,
            error: value.abs(),
            low_confidence: true,
        });
    }
    let (value, coarse) = if nodes.len() >= 5 {
        (stencil(5), stencil(3))
    } else {
        (stencil(3), stencil(2))
    };
    let error = (value - coarse).abs();
    if error > 0.1 * value.abs() {
        return Err(Error::FiniteDifference { value, error });
    }
    Ok(DerivativeEstimate {
        x_star: x,
        value,
        error,
        low_confidence: false,
    })
}

/// `dT/dx*`.
pub fn period_derivative(fam: &Family, x_star: f64) -> Result<DerivativeEstimate> {
    node_derivative(fam, x_star, |o| o.period)
}

/// `d/dx* H(q(x*))`.
pub fn energy_derivative(fam: &Family, x_star: f64) -> Result<DerivativeEstimate> {
    node_derivative(fam, x_star, |o| o.energy)
}

pub fn kappa_derivative(fam: &Family, x_star: f64) -> Result<DerivativeEstimate> {
    node_derivative(fam, x_star, |o| o.kappa)
}

/// `dH/dx*` through the chain rule `H_x + H_py dkappa/dx*` at a node.
pub fn energy_derivative_chain_rule(
    fam: &Family,
    x_star: f64,
    params: &SystemParams,
) -> Result<f64> {
    let dk = kappa_derivative(fam, x_star)?;
    let q = State4::on_symmetry_axis(x_star, fam.kappa_at(x_star)?);
    let g = energy_gradient(&q, params)?;
    Ok(g.x + g.py * dk.value)
}

/// Sign and margin of a node derivative across a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub estimates: Vec<DerivativeEstimate>,
    pub constant_sign: bool,
    /// Smallest `|value| / error` over the nodes.
    pub min_margin: f64,
    pub pass: bool,
}

/// Checks that a node derivative keeps one sign with `|value| >= 10 error`.
pub fn check_nonvanishing(
    fam: &Family,
    derivative: impl Fn(&Family, f64) -> Result<DerivativeEstimate>,
) -> Result<HypothesisCheck> {
    let estimates = fam
        .nodes()
        .into_iter()
        .map(|x| derivative(fam, x))
        .collect::<Result<Vec<_>>>()?;
    let sign = estimates.first().map_or(0.0, |e| e.value.signum());
    let constant_sign = sign != 0.0 && estimates.iter().all(|e| e.value.signum() == sign);
    let min_margin = estimates
        .iter()
        .map(DerivativeEstimate::margin)
        .fold(f64::INFINITY, f64::min);
    let pass = constant_sign
        && min_margin >= 10.0
        && estimates.iter().all(|e| !e.low_confidence);
    Ok(HypothesisCheck {
        estimates,
        constant_sign,
        min_margin,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowConfig;

    fn prop() -> Propagator {
        Propagator::new(SystemParams::default(), FlowConfig::default())
    }

    #[test]
    fn linear_seed_error_is_quadratic_in_amplitude() {
        let p = prop();
        let l = collinear_points(&p.params).unwrap()[1];
        let err = |amp: f64| {
            let x = l - amp;
            let seed = linear_seed(x, &p.params).unwrap();
            let orbit = solve_lyapunov(&p, x, seed, &ShootingConfig::default()).unwrap();
            (orbit.kappa - seed).abs()
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        assert!(e1 < 2e-4, "{e1}");
        let ratio = e1 / e2;
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn lagrange_rules_are_exact_on_polynomials() {
        let xs = [0.0, 0.5, 1.3, 2.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - 2.0 * x + x * x * x).collect();
        assert!((lagrange_value(&xs, &ys, 0.7) - (1.0 - 1.4 + 0.343)).abs() < 1e-14);
        assert!((lagrange_derivative(&xs, &ys, 0.7) - (-2.0 + 3.0 * 0.49)).abs() < 1e-13);
    }

    #[test]
    fn node_placement() {
        let n = family_nodes((-0.955, -0.945), 5).unwrap();
        assert_eq!(n[0], -0.955);
        assert_eq!(n[4], -0.945);
        assert!((n[2] + 0.95).abs() < 1e-15);
        assert_eq!(family_nodes((-0.955, -0.945), 1).unwrap(), vec![-0.95]);
        assert!(family_nodes((-0.945, -0.955), 3).is_err());
        assert!(family_nodes((-0.95, -0.95), 3).is_err());
    }

    #[test]
    fn derivative_of_degenerate_family() {
        let o = |x: f64, t: f64| LyapunovOrbit {
            x_star: x,
            kappa: 0.0,
            period: t,
            energy: 0.0,
        };
        let fam = Family::new((0.0, 1.0), vec![o(0.0, 1.0), o(1.0, 3.0)]).unwrap();
        let d = period_derivative(&fam, 0.5).unwrap();
        assert!(d.low_confidence);
        assert!((d.value - 2.0).abs() < 1e-14);
        let flat = Family::new((0.5, 0.5), vec![o(0.5, 1.0)]).unwrap();
        assert!(period_derivative(&flat, 0.5).is_err());
    }
}
