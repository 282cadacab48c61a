//! The planar circular restricted three-body problem in rotating coordinates
//! and the first-order eccentricity correction of the elliptic problem.
//!
//! The larger primary (mass `1 - mu`) sits at `(mu, 0)` and the smaller one
//! (mass `mu`) at `(-1 + mu, 0)`. The Hamiltonian is
//!
//! ```text
//! H = ((px + y)^2 + (py - x)^2) / 2 - Omega(x, y)
//! Omega = (x^2 + y^2) / 2 + (1 - mu) / r1 + mu / r2
//! ```
//!
//! and the elliptic problem is `H + eps * G(x, t) + O(eps^2)`.

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sun–Jupiter mass ratio.
pub const MU_SUN_JUPITER: f64 = 0.0009537;

/// Distances below this to either primary are rejected.
pub const DEFAULT_SINGULARITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub mu: f64,
    #[serde(default = "default_floor")]
    pub singularity_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_SINGULARITY_FLOOR
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            mu: MU_SUN_JUPITER,
            singularity_floor: DEFAULT_SINGULARITY_FLOOR,
        }
    }
}

impl SystemParams {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu < 0.5) {
            return Err(Error::InvalidInput(format!(
                "mass ratio must satisfy 0 <= mu < 1/2, got {mu}"
            )));
        }
        Ok(Self {
            mu,
            singularity_floor: DEFAULT_SINGULARITY_FLOOR,
        })
    }

    /// Position of the larger primary, mass `1 - mu`.
    pub fn larger_primary(&self) -> (f64, f64) {
        (self.mu, 0.0)
    }

    /// Position of the smaller primary, mass `mu`.
    pub fn smaller_primary(&self) -> (f64, f64) {
        (self.mu - 1.0, 0.0)
    }

    /// Distances `(r1, r2)` to the two primaries, checked against the floor.
    pub fn distances(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let r1 = (x - self.mu).hypot(y);
        let r2 = (x + 1.0 - self.mu).hypot(y);
        if !(r1 >= self.singularity_floor && r2 >= self.singularity_floor) {
            return Err(Error::Singularity { r1, r2 });
        }
        Ok((r1, r2))
    }
}

/// A phase point `(x, y, px, py)` in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State4 {
    pub x: f64,
    pub y: f64,
    pub px: f64,
    pub py: f64,
}

impl State4 {
    pub const fn new(x: f64, y: f64, px: f64, py: f64) -> Self {
        Self { x, y, px, py }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn from_slice(a: &[f64]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.px, self.py]
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.x, self.y, self.px, self.py)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn norm(self) -> f64 {
        self.to_vector().norm()
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// `q(x*) = (x*, 0, 0, kappa)`, a point on the fixed set of the symmetry.
    pub fn on_symmetry_axis(x: f64, py: f64) -> Self {
        Self::new(x, 0.0, 0.0, py)
    }
}

impl fmt::Display for State4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({:.10}, {:.10}, {:.10}, {:.10})",
            self.x, self.y, self.px, self.py
        )
    }
}

impl Index<usize> for State4 {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.px,
            3 => &self.py,
            _ => panic!("State4 index {i} out of range"),
        }
    }
}

impl IndexMut<usize> for State4 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.px,
            3 => &mut self.py,
            _ => panic!("State4 index {i} out of range"),
        }
    }
}

impl Add for State4 {
    type Output = State4;
    fn add(self, o: State4) -> State4 {
        State4::new(self.x + o.x, self.y + o.y, self.px + o.px, self.py + o.py)
    }
}

impl Sub for State4 {
    type Output = State4;
    fn sub(self, o: State4) -> State4 {
        State4::new(self.x - o.x, self.y - o.y, self.px - o.px, self.py - o.py)
    }
}

impl Mul<State4> for f64 {
    type Output = State4;
    fn mul(self, s: State4) -> State4 {
        State4::new(self * s.x, self * s.y, self * s.px, self * s.py)
    }
}

impl Neg for State4 {
    type Output = State4;
    fn neg(self) -> State4 {
        -1.0 * self
    }
}

/// Eccentricity and time phase of the elliptic perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationParams {
    pub eps: f64,
    pub tau: f64,
}

impl PerturbationParams {
    pub fn new(eps: f64, tau: f64) -> Result<Self> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidInput(format!("eccentricity must be >= 0, got {eps}")));
        }
        Ok(Self {
            eps,
            tau: tau.rem_euclid(TAU),
        })
    }
}

/// The standard symplectic matrix `J = [[0, I], [-I, 0]]`.
pub fn symplectic_j() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, 0.0,
    )
}

/// Differential of the reversing symmetry, `diag(1, -1, -1, 1)`.
pub fn symmetry_matrix() -> Matrix4<f64> {
    Matrix4::from_diagonal(&Vector4::new(1.0, -1.0, -1.0, 1.0))
}

/// Effective potential `Omega(x, y)`.
pub fn effective_potential(x: f64, y: f64, p: &SystemParams) -> Result<f64> {
    let (r1, r2) = p.distances(x, y)?;
    Ok(0.5 * (x * x + y * y) + (1.0 - p.mu) / r1 + p.mu / r2)
}

/// Gradient `(Omega_x, Omega_y)`.
pub(crate) fn potential_gradient(x: f64, y: f64, p: &SystemParams) -> Result<(f64, f64)> {
    let (r1, r2) = p.distances(x, y)?;
    let a1 = (1.0 - p.mu) / (r1 * r1 * r1);
    let a2 = p.mu / (r2 * r2 * r2);
    let ox = x - a1 * (x - p.mu) - a2 * (x + 1.0 - p.mu);
    let oy = y - (a1 + a2) * y;
    Ok((ox, oy))
}

/// Hessian `(Omega_xx, Omega_xy, Omega_yy)`.
pub(crate) fn potential_hessian(x: f64, y: f64, p: &SystemParams) -> Result<(f64, f64, f64)> {
    let (r1, r2) = p.distances(x, y)?;
    let dx1 = x - p.mu;
    let dx2 = x + 1.0 - p.mu;
    let r1_3 = r1 * r1 * r1;
    let r2_3 = r2 * r2 * r2;
    let b1 = 3.0 * (1.0 - p.mu) / (r1_3 * r1 * r1);
    let b2 = 3.0 * p.mu / (r2_3 * r2 * r2);
    let base = 1.0 - (1.0 - p.mu) / r1_3 - p.mu / r2_3;
    let oxx = base + b1 * dx1 * dx1 + b2 * dx2 * dx2;
    let oyy = base + (b1 + b2) * y * y;
    let oxy = (b1 * dx1 + b2 * dx2) * y;
    Ok((oxx, oxy, oyy))
}

pub fn energy(s: &State4, p: &SystemParams) -> Result<f64> {
    let omega = effective_potential(s.x, s.y, p)?;
    let u = s.px + s.y;
    let w = s.py - s.x;
    Ok(0.5 * (u * u + w * w) - omega)
}

/// Hamilton's equations `F = J grad H`.
pub fn vector_field(s: &State4, p: &SystemParams) -> Result<State4> {
    let (ox, oy) = potential_gradient(s.x, s.y, p)?;
    let u = s.px + s.y;
    let w = s.py - s.x;
    Ok(State4::new(u, w, w + ox, -u + oy))
}

/// Jacobian `DF` of [`vector_field`].
pub fn vector_field_jacobian(s: &State4, p: &SystemParams) -> Result<Matrix4<f64>> {
    let (oxx, oxy, oyy) = potential_hessian(s.x, s.y, p)?;
    Ok(Matrix4::new(
        0.0, 1.0, 1.0, 0.0, //
        -1.0, 0.0, 0.0, 1.0, //
        oxx - 1.0, oxy, 0.0, 1.0, //
        oxy, oyy - 1.0, -1.0, 0.0,
    ))
}

/// The gradient of `H`, used for energy-constraint checks.
pub fn energy_gradient(s: &State4, p: &SystemParams) -> Result<State4> {
    let (ox, oy) = potential_gradient(s.x, s.y, p)?;
    let u = s.px + s.y;
    let w = s.py - s.x;
    Ok(State4::new(-w - ox, u - oy, u, w))
}

/// Reversing symmetry `S(x, y, px, py) = (x, -y, -px, py)`.
pub fn apply_symmetry(s: &State4) -> State4 {
    State4::new(s.x, -s.y, -s.px, s.py)
}

/// `g(alpha, x, y, t) = alpha (-2 y sin t + x cos t) - alpha^2 cos t`.
fn g_bar(alpha: f64, x: f64, y: f64, sin_t: f64, cos_t: f64) -> f64 {
    alpha * (-2.0 * y * sin_t + x * cos_t) - alpha * alpha * cos_t
}

/// Explicit time derivative of [`g_bar`].
fn g_bar_dt(alpha: f64, x: f64, y: f64, sin_t: f64, cos_t: f64) -> f64 {
    alpha * (-2.0 * y * cos_t - x * sin_t) + alpha * alpha * sin_t
}

/// First-order eccentricity term `G(x, t)` of the elliptic Hamiltonian.
pub fn perturbation_g(s: &State4, t: f64, p: &SystemParams) -> Result<f64> {
    let (r1, r2) = p.distances(s.x, s.y)?;
    let (sin_t, cos_t) = t.sin_cos();
    Ok((1.0 - p.mu) / (r1 * r1 * r1) * g_bar(p.mu, s.x, s.y, sin_t, cos_t)
        + p.mu / (r2 * r2 * r2) * g_bar(p.mu - 1.0, s.x, s.y, sin_t, cos_t))
}

/// `dG/dt` in the explicit time argument, in closed form.
pub fn perturbation_g_dt(s: &State4, t: f64, p: &SystemParams) -> Result<f64> {
    let (r1, r2) = p.distances(s.x, s.y)?;
    let (sin_t, cos_t) = t.sin_cos();
    Ok((1.0 - p.mu) / (r1 * r1 * r1) * g_bar_dt(p.mu, s.x, s.y, sin_t, cos_t)
        + p.mu / (r2 * r2 * r2) * g_bar_dt(p.mu - 1.0, s.x, s.y, sin_t, cos_t))
}

/// Whether `(x, y)` lies in the Hill region `Omega(x, y) >= -h`.
///
/// Points at a primary are always inside.
pub fn hill_region_indicator(x: f64, y: f64, h: f64, p: &SystemParams) -> bool {
    match effective_potential(x, y, p) {
        Ok(omega) => omega >= -h,
        Err(_) => true,
    }
}

/// The three collinear libration points, ordered by `x`.
///
/// The middle one lies between the primaries next to the smaller primary; the
/// Lyapunov family used throughout this crate emanates from it.
pub fn collinear_points(p: &SystemParams) -> Result<[f64; 3]> {
    if p.mu <= 0.0 {
        return Err(Error::InvalidInput(
            "collinear points need a positive mass ratio".into(),
        ));
    }
    let omega_x = |x: f64| potential_gradient(x, 0.0, p).map(|g| g.0);
    let gap = 1e-9;
    let smaller = p.mu - 1.0;
    let larger = p.mu;
    let left = bisect(omega_x, smaller - 2.0, smaller - gap)?;
    let middle = bisect(omega_x, smaller + gap, larger - gap)?;
    let right = bisect(omega_x, larger + gap, larger + 2.0)?;
    Ok([left, middle, right])
}

fn bisect(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m)?;
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const KAPPA: f64 = -0.8413472441;

    fn oterma() -> State4 {
        State4::on_symmetry_axis(-0.95, KAPPA)
    }

    fn arb_state() -> impl Strategy<Value = State4> {
        (-1.6..1.6f64, -1.6..1.6f64, -2.0..2.0f64, -2.0..2.0f64)
            .prop_map(|(x, y, px, py)| State4::new(x, y, px, py))
            .prop_filter("away from primaries", |s| {
                let p = SystemParams::default();
                let (r1, r2) = ((s.x - p.mu).hypot(s.y), (s.x + 1.0 - p.mu).hypot(s.y));
                r1 > 0.05 && r2 > 0.05
            })
    }

    #[test]
    fn energy_at_oterma_level() {
        let h = energy(&oterma(), &SystemParams::default()).unwrap();
        assert!(h < 0.0);
        assert!((h.abs() - 1.515).abs() < 1e-3, "H = {h}");
    }

    #[test]
    fn energy_with_zero_mass_ratio() {
        let p = SystemParams::new(0.0).unwrap();
        let h = energy(&State4::new(1.0, 0.0, 0.0, 1.0), &p).unwrap();
        assert_abs_diff_eq!(h, -1.5, epsilon = 1e-15);
    }

    #[test]
    fn singularity_is_an_error() {
        let p = SystemParams::default();
        let at_sun = State4::new(p.mu, 0.0, 0.0, 0.0);
        assert!(matches!(energy(&at_sun, &p), Err(Error::Singularity { .. })));
        assert!(vector_field(&at_sun, &p).is_err());
        assert!(perturbation_g(&at_sun, 0.0, &p).is_err());
    }

    #[test]
    fn invalid_mass_ratio() {
        assert!(SystemParams::new(0.5).is_err());
        assert!(SystemParams::new(-0.1).is_err());
    }

    #[test]
    fn field_at_oterma_start() {
        let f = vector_field(&oterma(), &SystemParams::default()).unwrap();
        assert_eq!(f.x, 0.0);
        assert_abs_diff_eq!(f.y, KAPPA + 0.95, epsilon = 1e-15);
        assert!(f.y > 0.0);
        assert_eq!(f.py, 0.0);
    }

    #[test]
    fn field_direction_at_published_homoclinic_points() {
        let p = SystemParams::default();
        for (pt, slope) in [
            (State4::on_symmetry_axis(0.6207553555, 1.38203433), -1.60121149),
            (State4::on_symmetry_axis(0.6514581118, 1.334413389), -1.503579624),
        ] {
            let f = vector_field(&pt, &p).unwrap();
            assert_eq!(f.x, 0.0);
            assert_eq!(f.py, 0.0);
            assert!((f.px / f.y - slope).abs() < 1e-6, "{} vs {slope}", f.px / f.y);
        }
    }

    #[test]
    fn symmetry_fixes_axis_points() {
        let q = oterma();
        assert_eq!(apply_symmetry(&q), q);
        let p1 = State4::on_symmetry_axis(0.6207553555, 1.38203433);
        assert_eq!(apply_symmetry(&p1), p1);
    }

    #[test]
    fn perturbation_special_cases() {
        let p0 = SystemParams::new(0.0).unwrap();
        let s = State4::new(0.3, -0.7, 0.1, 0.4);
        for t in [0.0, 0.7, 2.0, 5.5] {
            assert_eq!(perturbation_g(&s, t, &p0).unwrap(), 0.0);
            assert_eq!(perturbation_g_dt(&s, t, &p0).unwrap(), 0.0);
        }
        let (x, y, a) = (0.3, -0.7, 0.25);
        assert_abs_diff_eq!(g_bar(a, x, y, 0.0, 1.0), a * x - a * a, epsilon = 1e-16);
        assert_abs_diff_eq!(g_bar_dt(a, x, y, 0.0, 1.0), -2.0 * a * y, epsilon = 1e-16);
    }

    #[test]
    fn hill_region() {
        let p = SystemParams::default();
        let h = energy(&oterma(), &p).unwrap();
        assert!(hill_region_indicator(-0.95, 0.0, h, &p));
        assert!(effective_potential(-0.95, 0.0, &p).unwrap() + h > 0.0);
        // next to either primary
        assert!(hill_region_indicator(p.mu + 1e-6, 0.0, h, &p));
        assert!(hill_region_indicator(p.mu - 1.0 + 1e-6, 0.0, h, &p));
        // the far forbidden zone around the triangular points
        assert!(!hill_region_indicator(-0.5, 0.866, h, &p));
    }

    #[test]
    fn collinear_points_bracket_primaries() {
        let p = SystemParams::default();
        let [l_left, l_mid, l_right] = collinear_points(&p).unwrap();
        assert!(l_left < p.mu - 1.0 && p.mu - 1.0 < l_mid && l_mid < p.mu && p.mu < l_right);
        assert!((l_mid + 0.9323).abs() < 1e-3, "{l_mid}");
        for x in [l_left, l_mid, l_right] {
            assert!(potential_gradient(x, 0.0, &p).unwrap().0.abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn symmetry_is_an_involution(s in arb_state()) {
            prop_assert_eq!(apply_symmetry(&apply_symmetry(&s)), s);
        }

        #[test]
        fn energy_is_symmetric(s in arb_state()) {
            let p = SystemParams::default();
            let a = energy(&s, &p).unwrap();
            let b = energy(&apply_symmetry(&s), &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
        }

        #[test]
        fn field_is_reversible(s in arb_state()) {
            let p = SystemParams::default();
            let lhs = symmetry_matrix() * vector_field(&s, &p).unwrap().to_vector();
            let rhs = -vector_field(&apply_symmetry(&s), &p).unwrap().to_vector();
            prop_assert!((lhs - rhs).amax() < 1e-12);
        }

        #[test]
        fn jacobian_matches_finite_differences(s in arb_state()) {
            let p = SystemParams::default();
            let jac = vector_field_jacobian(&s, &p).unwrap();
            prop_assert!(jac.trace().abs() < 1e-12);
            let j = symplectic_j();
            prop_assert!((jac.transpose() * j + j * jac).amax() < 1e-9 * jac.amax().max(1.0));
            let h = 1e-6;
            let scale = jac.amax().max(1.0);
            for k in 0..4 {
                let mut plus = s;
                let mut minus = s;
                plus[k] += h;
                minus[k] -= h;
                let fd = (vector_field(&plus, &p).unwrap().to_vector()
                    - vector_field(&minus, &p).unwrap().to_vector())
                    / (2.0 * h);
                let err = (fd - jac.column(k)).amax() / scale;
                prop_assert!(err < 1e-6, "column {} error {}", k, err);
            }
        }

        #[test]
        fn jacobian_respects_symmetry_on_axis(x in -1.5..1.5f64, py in -2.0..2.0f64) {
            let p = SystemParams::default();
            let s = State4::on_symmetry_axis(x, py);
            prop_assume!(p.distances(x, 0.0).map(|(a, b)| a > 0.05 && b > 0.05).unwrap_or(false));
            let r = symmetry_matrix();
            let lhs = r * vector_field_jacobian(&s, &p).unwrap();
            let rhs = -vector_field_jacobian(&apply_symmetry(&s), &p).unwrap() * r;
            prop_assert!((lhs - rhs).amax() < 1e-12);
        }

        #[test]
        fn perturbation_is_periodic(s in arb_state(), t in -10.0..10.0f64) {
            let p = SystemParams::default();
            let g0 = perturbation_g(&s, t, &p).unwrap();
            let g1 = perturbation_g(&s, t + TAU, &p).unwrap();
            let d0 = perturbation_g_dt(&s, t, &p).unwrap();
            let d1 = perturbation_g_dt(&s, t + TAU, &p).unwrap();
            prop_assert!((g0 - g1).abs() < 1e-12);
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn time_derivative_matches_finite_differences(s in arb_state(), t in -10.0..10.0f64) {
            let p = SystemParams::default();
            let h = 1e-5;
            let fd = (perturbation_g(&s, t + h, &p).unwrap() - perturbation_g(&s, t - h, &p).unwrap()) / (2.0 * h);
            let exact = perturbation_g_dt(&s, t, &p).unwrap();
            prop_assert!((fd - exact).abs() < 1e-8, "fd {} exact {}", fd, exact);
        }
    }
}
