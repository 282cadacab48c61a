//! Propagation of the circular problem: the flow, its differential, dense
//! trajectories and Poincaré section crossings.

mod dop853;
mod tableau;

pub use dop853::{DenseStep, Dop853, OdeSystem, Solution, StepControl};

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::dynamics::{vector_field, vector_field_jacobian, State4, SystemParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Method {
    /// Dormand–Prince 8(5,3) with degree-7 continuous output.
    #[default]
    Dop853,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
    pub event_tol: f64,
    /// Longest time searched for a section crossing.
    pub horizon: f64,
    pub method: Method,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            max_step: f64::INFINITY,
            event_tol: 1e-12,
            horizon: 50.0,
            method: Method::Dop853,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_tol > 0.0
            && self.rel_tol > 0.0
            && self.max_step > 0.0
            && self.event_tol >= 10.0 * f64::EPSILON
            && self.horizon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid flow config {self:?}")))
        }
    }

    fn solver(&self) -> Dop853 {
        match self.method {
            Method::Dop853 => Dop853 {
                rtol: self.rel_tol,
                atol: self.abs_tol,
                max_step: self.max_step,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coordinate {
    X,
    Y,
    Px,
    Py,
}

impl Coordinate {
    pub fn index(self) -> usize {
        match self {
            Coordinate::X => 0,
            Coordinate::Y => 1,
            Coordinate::Px => 2,
            Coordinate::Py => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Increasing,
    Decreasing,
    Any,
}

/// `coordinate > 0` (`positive`) or `coordinate < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub coordinate: Coordinate,
    pub positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub coordinate: Coordinate,
    pub level: f64,
    pub direction: Direction,
    pub half_plane: Option<HalfPlane>,
}

impl Section {
    /// `{y = 0}`, crossed in either direction.
    pub fn y_axis() -> Self {
        Self {
            coordinate: Coordinate::Y,
            level: 0.0,
            direction: Direction::Any,
            half_plane: None,
        }
    }

    /// `{y = 0, x > 0}`, crossed in either direction.
    pub fn y_axis_positive_x() -> Self {
        Self {
            half_plane: Some(HalfPlane {
                coordinate: Coordinate::X,
                positive: true,
            }),
            ..Self::y_axis()
        }
    }

    fn accepts(&self, state: &[f64], rate: f64) -> bool {
        let dir_ok = match self.direction {
            Direction::Any => true,
            Direction::Increasing => rate > 0.0,
            Direction::Decreasing => rate < 0.0,
        };
        let side_ok = self.half_plane.map_or(true, |hp| {
            let v = state[hp.coordinate.index()];
            if hp.positive {
                v > 0.0
            } else {
                v < 0.0
            }
        });
        dir_ok && side_ok
    }
}

/// The circular problem as a 4-dimensional system.
pub struct Pcr3bp {
    pub params: SystemParams,
}

impl OdeSystem for Pcr3bp {
    fn dim(&self) -> usize {
        4
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let f = vector_field(&State4::from_slice(y), &self.params)?;
        dy[..4].copy_from_slice(&f.to_array());
        Ok(())
    }
}

/// State plus the 4x4 fundamental matrix, row-major: 20 components.
pub struct Variational {
    pub params: SystemParams,
}

impl OdeSystem for Variational {
    fn dim(&self) -> usize {
        20
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let s = State4::from_slice(y);
        let f = vector_field(&s, &self.params)?;
        dy[..4].copy_from_slice(&f.to_array());
        let jac = vector_field_jacobian(&s, &self.params)?;
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += jac[(i, k)] * y[4 + 4 * k + j];
                }
                dy[4 + 4 * i + j] = acc;
            }
        }
        Ok(())
    }
}

fn variational_initial(s: &State4) -> Vec<f64> {
    let mut y = vec![0.0; 20];
    y[..4].copy_from_slice(&s.to_array());
    for i in 0..4 {
        y[4 + 5 * i] = 1.0;
    }
    y
}

fn unpack_matrix(y: &[f64]) -> Matrix4<f64> {
    Matrix4::from_row_slice(&y[4..20])
}

/// A continuous trajectory assembled from the integrator's interpolants.
#[derive(Debug, Clone)]
pub struct Trajectory {
    steps: Vec<DenseStep>,
    t_start: f64,
    t_end: f64,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dim(&self) -> usize {
        self.steps.first().map_or(0, DenseStep::dim)
    }

    fn locate(&self, t: f64) -> Option<&DenseStep> {
        let forward = self.t_end >= self.t_start;
        let inside = if forward {
            t >= self.t_start && t <= self.t_end
        } else {
            t <= self.t_start && t >= self.t_end
        };
        if !inside || self.steps.is_empty() {
            return None;
        }
        let idx = self.steps.partition_point(|s| {
            if forward {
                s.t_new < t
            } else {
                s.t_new > t
            }
        });
        self.steps.get(idx.min(self.steps.len() - 1))
    }

    /// Full state vector at `t`, or `None` outside the covered interval.
    pub fn eval(&self, t: f64) -> Option<Vec<f64>> {
        self.locate(t).map(|s| s.eval(t))
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> bool {
        match self.locate(t) {
            Some(s) => {
                s.eval_into(t, out);
                true
            }
            None => false,
        }
    }

    pub fn state(&self, t: f64) -> Option<State4> {
        let mut buf = [0.0; 20];
        let n = self.dim();
        self.eval_into(t, &mut buf[..n]).then(|| State4::from_slice(&buf))
    }

    /// Ends of the accepted steps, useful as quadrature breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        std::iter::once(self.t_start)
            .chain(self.steps.iter().map(|s| s.t_new))
            .collect()
    }
}

/// Flow of the circular problem with fixed parameters and tolerances.
#[derive(Debug, Clone, Copy)]
pub struct Propagator {
    pub params: SystemParams,
    pub cfg: FlowConfig,
}

impl Propagator {
    pub fn new(params: SystemParams, cfg: FlowConfig) -> Self {
        Self { params, cfg }
    }

    /// `Phi_t(s)`; `t` may be negative.
    pub fn flow(&self, s: &State4, t: f64) -> Result<State4> {
        let sys = Pcr3bp {
            params: self.params,
        };
        let sol = self
            .cfg
            .solver()
            .integrate(&sys, 0.0, &s.to_array(), t, |_| Ok(StepControl::Continue))?;
        Ok(State4::from_slice(&sol.y))
    }

    /// `(Phi_t(s), DPhi_t(s))` from the 20-dimensional variational system.
    pub fn flow_with_variational(&self, s: &State4, t: f64) -> Result<(State4, Matrix4<f64>)> {
        let sys = Variational {
            params: self.params,
        };
        let sol = self
            .cfg
            .solver()
            .integrate(&sys, 0.0, &variational_initial(s), t, |_| Ok(StepControl::Continue))?;
        Ok((State4::from_slice(&sol.y), unpack_matrix(&sol.y)))
    }

    /// Dense trajectory of `s` over `[0, t]` (or `[t, 0]`).
    pub fn trajectory(&self, s: &State4, t: f64) -> Result<Trajectory> {
        let sys = Pcr3bp {
            params: self.params,
        };
        self.dense(&sys, &s.to_array(), t)
    }

    /// Dense trajectory of the state and its fundamental matrix.
    pub fn variational_trajectory(&self, s: &State4, t: f64) -> Result<Trajectory> {
        let sys = Variational {
            params: self.params,
        };
        self.dense(&sys, &variational_initial(s), t)
    }

    fn dense<S: OdeSystem>(&self, sys: &S, y0: &[f64], t: f64) -> Result<Trajectory> {
        let mut steps = Vec::new();
        self.cfg.solver().integrate(sys, 0.0, y0, t, |d| {
            steps.push(d.clone());
            Ok(StepControl::Continue)
        })?;
        Ok(Trajectory {
            steps,
            t_start: 0.0,
            t_end: t,
        })
    }

    /// State at the `n`-th accepted crossing of `sec` and the elapsed time.
    pub fn poincare_map(&self, s: &State4, sec: &Section, n: usize) -> Result<(State4, f64)> {
        let sys = Pcr3bp {
            params: self.params,
        };
        let (t, y) = self.crossing(&sys, &s.to_array(), sec, n, None)?;
        Ok((State4::from_slice(&y), t))
    }

    /// As [`Self::poincare_map`], also returning `DPhi_t(s)` at the crossing
    /// time (the time itself held fixed).
    pub fn poincare_map_with_variational(
        &self,
        s: &State4,
        sec: &Section,
        n: usize,
    ) -> Result<(State4, Matrix4<f64>, f64)> {
        let sys = Variational {
            params: self.params,
        };
        let (t, y) = self.crossing(&sys, &variational_initial(s), sec, n, None)?;
        Ok((State4::from_slice(&y), unpack_matrix(&y), t))
    }

    /// Accepted step times of an adaptive run from `s` over `[0, t]`.
    pub fn step_mesh(&self, s: &State4, t: f64) -> Result<Vec<f64>> {
        Ok(self.trajectory(s, t)?.breakpoints())
    }

    /// [`Self::poincare_map`] on a frozen step mesh (see
    /// [`Dop853::integrate_on_mesh`]); the crossing must occur within it.
    pub fn poincare_map_on_mesh(
        &self,
        s: &State4,
        sec: &Section,
        n: usize,
        mesh: &[f64],
    ) -> Result<(State4, f64)> {
        let sys = Pcr3bp {
            params: self.params,
        };
        let (t, y) = self.crossing(&sys, &s.to_array(), sec, n, Some(mesh))?;
        Ok((State4::from_slice(&y), t))
    }

    pub fn poincare_map_with_variational_on_mesh(
        &self,
        s: &State4,
        sec: &Section,
        n: usize,
        mesh: &[f64],
    ) -> Result<(State4, Matrix4<f64>, f64)> {
        let sys = Variational {
            params: self.params,
        };
        let (t, y) = self.crossing(&sys, &variational_initial(s), sec, n, Some(mesh))?;
        Ok((State4::from_slice(&y), unpack_matrix(&y), t))
    }

    fn crossing<S: OdeSystem>(
        &self,
        sys: &S,
        y0: &[f64],
        sec: &Section,
        n: usize,
        mesh: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        if n == 0 {
            return Err(Error::InvalidInput("crossing count must be positive".into()));
        }
        let idx = sec.coordinate.index();
        let g = |y: &[f64]| y[idx] - sec.level;
        let mut count = 0;
        let mut found: Option<(f64, Vec<f64>)> = None;
        let mut failure: Option<Error> = None;
        let mut buf = vec![0.0; sys.dim()];
        let horizon = match mesh {
            Some(m) => m.last().copied().unwrap_or(0.0),
            None => self.cfg.horizon,
        };

        let observer = |d: &DenseStep| {
            const PIECES: usize = 4;
            let mut t_a = d.t_old;
            d.eval_into(t_a, &mut buf);
            let mut g_a = g(&buf);
            for k in 1..=PIECES {
                let t_b = if k == PIECES {
                    d.t_new
                } else {
                    d.t_old + (d.t_new - d.t_old) * k as f64 / PIECES as f64
                };
                d.eval_into(t_b, &mut buf);
                let g_b = g(&buf);
                let crossed = g_a != 0.0 && (g_b == 0.0 || g_a.signum() != g_b.signum());
                if crossed {
                    let t_root = self.polish(d, idx, sec.level, t_a, g_a, t_b, g_b, &mut buf)?;
                    d.eval_into(t_root, &mut buf);
                    let rate = vector_field(&State4::from_slice(&buf), &self.params)?[idx];
                    if rate.abs() < self.cfg.event_tol {
                        failure = Some(Error::TangentialCrossing { t: t_root, rate });
                        return Ok(StepControl::Stop);
                    }
                    if sec.accepts(&buf, rate) {
                        count += 1;
                        if count == n {
                            found = Some((t_root, buf.clone()));
                            return Ok(StepControl::Stop);
                        }
                    }
                }
                t_a = t_b;
                g_a = g_b;
            }
            Ok(StepControl::Continue)
        };
        match mesh {
            Some(m) => self.cfg.solver().integrate_on_mesh(sys, m, y0, observer)?,
            None => self.cfg.solver().integrate(sys, 0.0, y0, horizon, observer)?,
        };

        if let Some(e) = failure {
            return Err(e);
        }
        found.ok_or(Error::NoCrossing { horizon })
    }

    /// Safeguarded Newton on the section coordinate over a bracketing interval
    /// of one interpolant. The derivative is the matching field component.
    #[allow(clippy::too_many_arguments)]
    fn polish(
        &self,
        d: &DenseStep,
        idx: usize,
        level: f64,
        mut lo: f64,
        mut g_lo: f64,
        mut hi: f64,
        g_hi: f64,
        buf: &mut [f64],
    ) -> Result<f64> {
        if g_hi == 0.0 {
            return Ok(hi);
        }
        const MAX_ITER: usize = 100;
        let mut t = lo - g_lo * (hi - lo) / (g_hi - g_lo);
        for _ in 0..MAX_ITER {
            d.eval_into(t, buf);
            let gt = buf[idx] - level;
            if gt == 0.0 {
                return Ok(t);
            }
            if gt.signum() == g_lo.signum() {
                lo = t;
                g_lo = gt;
            } else {
                hi = t;
            }
            let rate = vector_field(&State4::from_slice(buf), &self.params)?[idx];
            let newton = t - gt / rate;
            let next = if rate != 0.0 && newton > lo.min(hi) && newton < lo.max(hi) {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let converged = (next - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0)
                || (hi - lo).abs() <= 4.0 * f64::EPSILON * t.abs().max(1.0);
            t = next;
            if converged {
                break;
            }
        }
        d.eval_into(t, buf);
        let residual = (buf[idx] - level).abs();
        if residual <= self.cfg.event_tol {
            Ok(t)
        } else {
            Err(Error::NoConvergence {
                what: "section crossing",
                iterations: MAX_ITER,
                residual,
            })
        }
    }
}
