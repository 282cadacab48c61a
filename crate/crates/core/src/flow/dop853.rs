//! Adaptive Dormand–Prince 8(5,3) integrator with continuous output.
//!
//! Step control and the error norm follow Hairer's DOP853. Integration in
//! negative time uses signed steps, which is the same scheme applied to the
//! negated field.

use super::tableau::{A, B, C, D, E3, E5, N_STAGES, N_STAGES_EXTENDED};
use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;
const MAX_STEPS: usize = 2_000_000;

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy)]
pub struct Dop853 {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
}

/// The degree-7 interpolant over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub t_old: f64,
    pub t_new: f64,
    y_old: Vec<f64>,
    // 7 rows of `dim` coefficients, row-major
    coeffs: Vec<f64>,
}

impl DenseStep {
    pub fn dim(&self) -> usize {
        self.y_old.len()
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_new >= self.t_old {
            (self.t_old, self.t_new)
        } else {
            (self.t_new, self.t_old)
        };
        t >= lo && t <= hi
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = self.dim();
        let h = self.t_new - self.t_old;
        let x = if h == 0.0 { 0.0 } else { (t - self.t_old) / h };
        out[..n].iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in self.coeffs.chunks_exact(n).rev().enumerate() {
            let factor = if i % 2 == 0 { x } else { 1.0 - x };
            for (o, c) in out.iter_mut().zip(row) {
                *o = (*o + c) * factor;
            }
        }
        for (o, y) in out.iter_mut().zip(&self.y_old) {
            *o += y;
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }
}

/// What an observer wants after seeing an accepted step.
pub enum StepControl {
    Continue,
    Stop,
}

/// Result of an integration run.
#[derive(Debug, Clone)]
pub struct Solution {
    pub t: f64,
    pub y: Vec<f64>,
    pub steps: usize,
}

struct Workspace {
    k: Vec<Vec<f64>>,
    tmp: Vec<f64>,
}

impl Dop853 {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            max_step: f64::INFINITY,
        }
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.atol + self.rtol * a.abs().max(b.abs())
    }

    fn initial_step<S: OdeSystem>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        f0: &[f64],
        direction: f64,
    ) -> Result<f64> {
        let n = y0.len();
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..n {
            let sc = self.atol + self.rtol * y0[i].abs();
            d0 += (y0[i] / sc).powi(2);
            d1 += (f0[i] / sc).powi(2);
        }
        d0 = (d0 / n as f64).sqrt();
        d1 = (d1 / n as f64).sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.max_step);
        let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + direction * h0 * f).collect();
        let mut f1 = vec![0.0; n];
        sys.rhs(t0 + direction * h0, &y1, &mut f1)?;
        let mut d2 = 0.0;
        for i in 0..n {
            let sc = self.atol + self.rtol * y0[i].abs();
            d2 += ((f1[i] - f0[i]) / sc).powi(2);
        }
        d2 = (d2 / n as f64).sqrt() / h0;
        let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / 8.0)
        };
        Ok((100.0 * h0).min(h1).min(self.max_step))
    }

    fn rk_step<S: OdeSystem>(
        &self,
        sys: &S,
        t: f64,
        y: &[f64],
        h: f64,
        ws: &mut Workspace,
        y_new: &mut [f64],
    ) -> Result<()> {
        let n = y.len();
        for s in 1..N_STAGES {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += a * ws.k[j][i];
                    }
                }
                ws.tmp[i] = y[i] + h * acc;
            }
            sys.rhs(t + C[s] * h, &ws.tmp, &mut ws.k[s])?;
        }
        for i in 0..n {
            let mut acc = 0.0;
            for (j, b) in B.iter().enumerate() {
                acc += b * ws.k[j][i];
            }
            y_new[i] = y[i] + h * acc;
        }
        Ok(())
    }

    fn error_norm(&self, ws: &Workspace, h: f64, y: &[f64], y_new: &[f64]) -> f64 {
        let n = y.len();
        let mut e5 = 0.0;
        let mut e3 = 0.0;
        for i in 0..n {
            let sc = self.scale(y[i], y_new[i]);
            let mut a5 = 0.0;
            let mut a3 = 0.0;
            for j in 0..=N_STAGES {
                a5 += E5[j] * ws.k[j][i];
                a3 += E3[j] * ws.k[j][i];
            }
            e5 += (a5 / sc).powi(2);
            e3 += (a3 / sc).powi(2);
        }
        if e5 == 0.0 && e3 == 0.0 {
            return 0.0;
        }
        let denom = e5 + 0.01 * e3;
        h.abs() * e5 / (denom * n as f64).sqrt()
    }

    fn dense_step<S: OdeSystem>(
        &self,
        sys: &S,
        t_old: f64,
        h: f64,
        y_old: &[f64],
        y_new: &[f64],
        ws: &mut Workspace,
    ) -> Result<DenseStep> {
        let n = y_old.len();
        for s in N_STAGES + 1..N_STAGES_EXTENDED {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += a * ws.k[j][i];
                    }
                }
                ws.tmp[i] = y_old[i] + h * acc;
            }
            sys.rhs(t_old + C[s] * h, &ws.tmp, &mut ws.k[s])?;
        }
        let mut coeffs = vec![0.0; 7 * n];
        let f_old = &ws.k[0];
        let f_new = &ws.k[N_STAGES];
        for i in 0..n {
            let dy = y_new[i] - y_old[i];
            coeffs[i] = dy;
            coeffs[n + i] = h * f_old[i] - dy;
            coeffs[2 * n + i] = 2.0 * dy - h * (f_new[i] + f_old[i]);
            for (r, drow) in D.iter().enumerate() {
                let mut acc = 0.0;
                for (j, d) in drow.iter().enumerate() {
                    if *d != 0.0 {
                        acc += d * ws.k[j][i];
                    }
                }
                coeffs[(3 + r) * n + i] = h * acc;
            }
        }
        Ok(DenseStep {
            t_old,
            t_new: t_old + h,
            y_old: y_old.to_vec(),
            coeffs,
        })
    }

    /// Integrates from `t0` to `t1` (either direction), handing every accepted
    /// step's interpolant to `observer`. Stops early if the observer says so.
    pub fn integrate<S, F>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        t1: f64,
        mut observer: F,
    ) -> Result<Solution>
    where
        S: OdeSystem,
        F: FnMut(&DenseStep) -> Result<StepControl>,
    {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "state dimension mismatch");
        if t1 == t0 {
            return Ok(Solution {
                t: t0,
                y: y0.to_vec(),
                steps: 0,
            });
        }
        let direction = (t1 - t0).signum();
        let mut ws = Workspace {
            k: vec![vec![0.0; n]; N_STAGES_EXTENDED],
            tmp: vec![0.0; n],
        };
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut y_new = vec![0.0; n];
        sys.rhs(t, &y, &mut ws.k[0])?;
        let mut h_abs = self.initial_step(sys, t0, &y, &ws.k[0], direction)?;
        let mut steps = 0;
        let mut rejected = false;

        loop {
            if steps >= MAX_STEPS {
                return Err(Error::StepUnderflow { t });
            }
            let min_step = 10.0 * f64::EPSILON * t.abs().max(1.0);
            h_abs = h_abs.min(self.max_step);
            if h_abs < min_step {
                return Err(Error::StepUnderflow { t });
            }
            let remaining = (t1 - t) * direction;
            let last = h_abs >= remaining;
            let h = if last { t1 - t } else { direction * h_abs };

            self.rk_step(sys, t, &y, h, &mut ws, &mut y_new)?;
            let t_next = if last { t1 } else { t + h };
            sys.rhs(t_next, &y_new, &mut ws.k[N_STAGES])?;
            let err = self.error_norm(&ws, h, &y, &y_new);

            if err < 1.0 {
                let mut factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    MAX_FACTOR.min(SAFETY * err.powf(ERROR_EXPONENT))
                };
                if rejected {
                    factor = factor.min(1.0);
                }
                let dense = self.dense_step(sys, t, h, &y, &y_new, &mut ws)?;
                steps += 1;
                let control = observer(&dense)?;
                t = t_next;
                std::mem::swap(&mut y, &mut y_new);
                let (first, rest) = ws.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[N_STAGES - 1]);
                h_abs = h.abs() * factor;
                rejected = false;
                if let StepControl::Stop = control {
                    break;
                }
                if last {
                    break;
                }
            } else {
                h_abs *= MIN_FACTOR.max(SAFETY * err.powf(ERROR_EXPONENT));
                rejected = true;
            }
        }
        Ok(Solution { t, y, steps })
    }
}

impl Dop853 {
    /// Steps exactly between consecutive `mesh` times with no error control.
    ///
    /// The result is a smooth function of `y0`, which adaptive stepping is
    /// not: there the step sequence itself depends on the initial state.
    pub fn integrate_on_mesh<S, F>(
        &self,
        sys: &S,
        mesh: &[f64],
        y0: &[f64],
        mut observer: F,
    ) -> Result<Solution>
    where
        S: OdeSystem,
        F: FnMut(&DenseStep) -> Result<StepControl>,
    {
        let n = sys.dim();
        assert_eq!(y0.len(), n, "state dimension mismatch");
        let mut ws = Workspace {
            k: vec![vec![0.0; n]; N_STAGES_EXTENDED],
            tmp: vec![0.0; n],
        };
        let mut y = y0.to_vec();
        let mut y_new = vec![0.0; n];
        let mut t = mesh.first().copied().unwrap_or(0.0);
        let mut steps = 0;
        if mesh.len() < 2 {
            return Ok(Solution { t, y, steps });
        }
        sys.rhs(t, &y, &mut ws.k[0])?;
        for w in mesh.windows(2) {
            let h = w[1] - w[0];
            self.rk_step(sys, w[0], &y, h, &mut ws, &mut y_new)?;
            sys.rhs(w[1], &y_new, &mut ws.k[N_STAGES])?;
            let dense = self.dense_step(sys, w[0], h, &y, &y_new, &mut ws)?;
            steps += 1;
            let control = observer(&dense)?;
            t = w[1];
            std::mem::swap(&mut y, &mut y_new);
            let (first, rest) = ws.k.split_at_mut(1);
            first[0].copy_from_slice(&rest[N_STAGES - 1]);
            if let StepControl::Stop = control {
                break;
            }
        }
        Ok(Solution { t, y, steps })
    }
}
