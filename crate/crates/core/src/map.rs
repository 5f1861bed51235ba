//! The microtron phase map on the cylinder, its inverse, reversors and the
//! twist generating function.
//!
//! The map is
//!
//! ```text
//! psi1 = psi + w
//! w1   = w + 2π (cos psi1 − 1) − mu sin psi1
//! ```
//!
//! with `psi` defined modulo `2π` and reduced to `[−π, π)`.

use std::f64::consts::{PI, TAU};

use crate::error::{Result, RtmError};

/// Lifted orbits whose phase leaves this bound are reported as unbounded.
pub const LIFT_BOUND: f64 = 1e12;

/// Reduce an angle to `[−π, π)`.
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let r = x - TAU * ((x + PI) / TAU).floor();
    // floor can round r up to exactly π for inputs just below an odd multiple of π
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// The map parameter `mu = 2π tan(phi_s)` together with the quantities
/// derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtmParams {
    mu: f64,
    phi_s: f64,
    theta: Option<f64>,
    h: Option<f64>,
}

impl RtmParams {
    pub fn from_mu(mu: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(RtmError::Domain(format!("mu must be finite, got {mu}")));
        }
        let phi_s = (mu / TAU).atan();
        let theta = if mu > 0.0 && mu <= 4.0 {
            Some((1.0 - mu / 2.0).clamp(-1.0, 1.0).acos())
        } else {
            None
        };
        let h = if mu > 0.0 { Some((1.0 + mu / 2.0).acosh()) } else { None };
        Ok(Self { mu, phi_s, theta, h })
    }

    /// Parameter from the synchronous phase (radians).
    pub fn from_phi_s(phi_s: f64) -> Result<Self> {
        Self::from_mu(TAU * phi_s.tan())
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn phi_s(&self) -> f64 {
        self.phi_s
    }

    /// Rotation angle of the elliptic fixed point, for `0 < mu <= 4`.
    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    /// Characteristic exponent of the hyperbolic fixed point, for `mu > 0`.
    pub fn h(&self) -> Option<f64> {
        self.h
    }

    /// The synchronous fixed point `(0, 0)`.
    pub fn p_s(&self) -> PhasePoint {
        PhasePoint { psi: 0.0, w: 0.0 }
    }

    /// The second fixed point `(−2 phi_s, 0)`, hyperbolic for `mu > 0`.
    pub fn p_h(&self) -> PhasePoint {
        PhasePoint { psi: -2.0 * self.phi_s, w: 0.0 }
    }
}

/// Convenience wrapper matching the other free functions of this module.
pub fn params_from_mu(mu: f64) -> Result<RtmParams> {
    RtmParams::from_mu(mu)
}

/// A point `(psi, w)` on the cylinder with `psi` in `[−π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhasePoint {
    pub psi: f64,
    pub w: f64,
}

impl PhasePoint {
    pub fn new(psi: f64, w: f64) -> Self {
        Self { psi: wrap_angle(psi), w }
    }

    /// Componentwise distance with the phase difference taken modulo `2π`.
    pub fn dist_inf(&self, other: &PhasePoint) -> f64 {
        wrap_angle(self.psi - other.psi).abs().max((self.w - other.w).abs())
    }

    pub fn lift(&self) -> LiftedPoint {
        LiftedPoint { psi_tilde: self.psi, w: self.w }
    }
}

/// A point on the universal cover `R × R`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LiftedPoint {
    pub psi_tilde: f64,
    pub w: f64,
}

impl LiftedPoint {
    pub fn project(&self) -> PhasePoint {
        PhasePoint::new(self.psi_tilde, self.w)
    }
}

/// `eta(psi) = 2π (cos psi − 1) − mu sin psi`, the energy kick.
#[inline]
pub fn eta(psi: f64, params: &RtmParams) -> f64 {
    let (s, c) = psi.sin_cos();
    TAU * (c - 1.0) - params.mu * s
}

/// `eta'(psi)`.
#[inline]
pub fn eta_prime(psi: f64, params: &RtmParams) -> f64 {
    let (s, c) = psi.sin_cos();
    -TAU * s - params.mu * c
}

#[inline]
pub fn map_forward(p: PhasePoint, params: &RtmParams) -> PhasePoint {
    let psi1 = p.psi + p.w;
    let w1 = p.w + eta(psi1, params);
    PhasePoint { psi: wrap_angle(psi1), w: w1 }
}

#[inline]
pub fn map_inverse(p: PhasePoint, params: &RtmParams) -> PhasePoint {
    let w = p.w - eta(p.psi, params);
    PhasePoint { psi: wrap_angle(p.psi - w), w }
}

/// `f^n(p)`; negative `n` iterates the inverse.
pub fn iterate(p: PhasePoint, n: i64, params: &RtmParams) -> PhasePoint {
    let mut q = p;
    if n >= 0 {
        for _ in 0..n {
            q = map_forward(q, params);
        }
    } else {
        for _ in 0..n.unsigned_abs() {
            q = map_inverse(q, params);
        }
    }
    q
}

#[inline]
pub fn map_forward_lifted(q: LiftedPoint, params: &RtmParams) -> LiftedPoint {
    let psi1 = q.psi_tilde + q.w;
    LiftedPoint { psi_tilde: psi1, w: q.w + eta(psi1, params) }
}

#[inline]
pub fn map_inverse_lifted(q: LiftedPoint, params: &RtmParams) -> LiftedPoint {
    let w = q.w - eta(q.psi_tilde, params);
    LiftedPoint { psi_tilde: q.psi_tilde - w, w }
}

/// Lifted iteration: the phase accumulates on `R` instead of being reduced.
pub fn iterate_lifted(q: LiftedPoint, n: i64, params: &RtmParams) -> Result<LiftedPoint> {
    let mut x = q;
    let steps = n.unsigned_abs();
    for k in 1..=steps {
        x = if n >= 0 {
            map_forward_lifted(x, params)
        } else {
            map_inverse_lifted(x, params)
        };
        if !(x.psi_tilde.abs() <= LIFT_BOUND) {
            return Err(RtmError::Unbounded { step: n.signum() * k as i64 });
        }
    }
    Ok(x)
}

/// `r0(psi, w) = (psi + w, −w)`.
#[inline]
pub fn reversor_r0(p: PhasePoint) -> PhasePoint {
    PhasePoint { psi: wrap_angle(p.psi + p.w), w: -p.w }
}

/// `r1(psi, w) = (psi, eta(psi) − w)`.
#[inline]
pub fn reversor_r1(p: PhasePoint, params: &RtmParams) -> PhasePoint {
    PhasePoint { psi: p.psi, w: eta(p.psi, params) - p.w }
}

/// A point of the symmetry line `Fix(r1) = {w = eta(psi)/2}`.
pub fn on_fix_r1(psi: f64, params: &RtmParams) -> PhasePoint {
    PhasePoint::new(psi, 0.5 * eta(psi, params))
}

pub type Mat2 = [[f64; 2]; 2];

pub fn jacobian(p: PhasePoint, params: &RtmParams) -> Mat2 {
    let e = eta_prime(p.psi + p.w, params);
    [[1.0, 1.0], [e, 1.0 + e]]
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Linear type of an area-preserving fixed point, decided by its trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearType {
    Hyperbolic,
    Parabolic,
    Elliptic,
}

impl LinearType {
    pub fn from_trace(trace: f64) -> Self {
        let t = trace.abs();
        if t > 2.0 {
            LinearType::Hyperbolic
        } else if t == 2.0 {
            LinearType::Parabolic
        } else {
            LinearType::Elliptic
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointTypes {
    pub trace_s: f64,
    pub trace_h: f64,
    pub type_s: LinearType,
    pub type_h: LinearType,
}

/// Traces `2 − mu` and `2 + mu` of the linear parts at `p_s` and `p_h`.
pub fn linear_type_at_fixed_points(params: &RtmParams) -> FixedPointTypes {
    let trace_s = 2.0 - params.mu;
    let trace_h = 2.0 + params.mu;
    FixedPointTypes {
        trace_s,
        trace_h,
        type_s: LinearType::from_trace(trace_s),
        type_h: LinearType::from_trace(trace_h),
    }
}

fn raw_potential(psi: f64, params: &RtmParams) -> f64 {
    let (s, c) = psi.sin_cos();
    TAU * s - TAU * psi + params.mu * c
}

/// `V(psi) = 2π sin psi − 2π psi + mu cos psi`, shifted so that `V(psi_h) = 0`.
/// `V' = eta`.
pub fn potential(psi: f64, params: &RtmParams) -> f64 {
    raw_potential(psi, params) - raw_potential(params.p_h().psi, params)
}

/// Twist generating function `L(psi, psi1) = (psi1 − psi)^2/2 + V(psi1)`;
/// `w = −dL/dpsi` and `w1 = dL/dpsi1` reproduce the map on the lift.
pub fn generating_action(psi: f64, psi1: f64, params: &RtmParams) -> f64 {
    let d = psi1 - psi;
    0.5 * d * d + potential(psi1, params)
}

/// A planar area-preserving map with an elliptic point at the origin.
pub trait PlanarMap: Sync {
    fn forward(&self, p: PhasePoint) -> PhasePoint;
    fn inverse(&self, p: PhasePoint) -> PhasePoint;
    /// Rotation number (turns per step) of the linearization at the origin, if known.
    fn rotation_hint(&self) -> Option<f64> {
        None
    }
}

impl PlanarMap for RtmParams {
    #[inline]
    fn forward(&self, p: PhasePoint) -> PhasePoint {
        map_forward(p, self)
    }
    #[inline]
    fn inverse(&self, p: PhasePoint) -> PhasePoint {
        map_inverse(p, self)
    }
    fn rotation_hint(&self) -> Option<f64> {
        self.theta.map(|t| t / TAU)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn p(mu: f64) -> RtmParams {
        RtmParams::from_mu(mu).unwrap()
    }

    #[test]
    fn params_examples() {
        let two = p(2.0);
        assert_abs_diff_eq!(two.theta().unwrap(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(two.phi_s(), (1.0 / PI).atan(), epsilon = 1e-15);
        assert_abs_diff_eq!(two.phi_s(), 0.30817, epsilon = 1e-5);

        let four = p(4.0);
        assert_abs_diff_eq!(four.theta().unwrap(), PI, epsilon = 1e-15);
        let phi_p = (2.0 / PI).atan();
        assert_abs_diff_eq!(four.phi_s(), phi_p, epsilon = 1e-15);
        assert_abs_diff_eq!(phi_p.to_degrees(), 32.5, epsilon = 0.05);
        assert_abs_diff_eq!(RtmParams::from_phi_s(phi_p).unwrap().mu(), 4.0, epsilon = 1e-14);

        let one = p(1.0);
        assert_abs_diff_eq!(one.h().unwrap().cosh(), 1.5, epsilon = 1e-15);
        assert!(p(-1.0).theta().is_none() && p(-1.0).h().is_none());
        assert!(p(5.0).theta().is_none() && p(5.0).h().is_some());
        assert!(p(0.0).h().is_none());
        assert!(matches!(RtmParams::from_mu(f64::NAN), Err(RtmError::Domain(_))));
        assert!(RtmParams::from_mu(f64::INFINITY).is_err());
    }

    #[test]
    fn params_invariants() {
        for k in 1..400 {
            let mu = -3.0 + 0.02 * k as f64;
            let q = p(mu);
            assert_abs_diff_eq!(TAU * q.phi_s().tan(), mu, epsilon = 1e-13);
            if let Some(t) = q.theta() {
                assert!(t > 0.0 && t <= PI);
                assert_abs_diff_eq!(t.cos(), 1.0 - mu / 2.0, epsilon = 1e-13);
            }
            if let Some(h) = q.h() {
                assert!(h > 0.0);
                assert_abs_diff_eq!(h.cosh(), 1.0 + mu / 2.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn wrap_angle_range() {
        for x in [-10.0, -PI, -PI + 1e-17, 0.0, PI, PI - 1e-16, 3.0 * PI, 1e6] {
            let r = wrap_angle(x);
            assert!((-PI..PI).contains(&r), "{x} -> {r}");
        }
        assert_eq!(wrap_angle(PI), -PI);
    }

    #[test]
    fn forward_examples() {
        for mu in [0.3, 1.0, 2.0, 3.7] {
            let q = p(mu);
            assert_eq!(map_forward(q.p_s(), &q), q.p_s());
            let h = map_forward(q.p_h(), &q);
            assert!(h.dist_inf(&q.p_h()) < 1e-14);
        }
        let q = p(2.0);
        let img = map_forward(PhasePoint::new(0.1, 0.0), &q);
        let expected = TAU * (0.1f64.cos() - 1.0) - 2.0 * 0.1f64.sin();
        assert_abs_diff_eq!(img.psi, 0.1, epsilon = 1e-16);
        assert_abs_diff_eq!(img.w, expected, epsilon = 1e-16);
        assert_abs_diff_eq!(img.w, -0.231056, epsilon = 1e-6);
    }

    #[test]
    fn inverse_examples() {
        let q = p(2.0);
        assert_eq!(map_inverse(PhasePoint::default(), &q), PhasePoint::default());
        let x = PhasePoint::new(0.1, 0.0);
        let back = map_inverse(map_forward(x, &q), &q);
        assert!(back.dist_inf(&x) < 1e-12);
        let w1 = TAU * (0.1f64.cos() - 1.0) - 2.0 * 0.1f64.sin();
        let pre = map_inverse(PhasePoint::new(0.1, w1), &q);
        assert!(pre.dist_inf(&x) < 1e-15);
    }

    #[test]
    fn iterate_examples() {
        let q = p(1.3);
        let x = PhasePoint::new(0.2, -0.1);
        assert_eq!(iterate(x, 0, &q), x);
        let three = map_forward(map_forward(map_forward(x, &q), &q), &q);
        assert_eq!(iterate(x, 3, &q), three);
        assert!(iterate(three, -3, &q).dist_inf(&x) < 1e-13);

        // near the third order resonance f^3 is close to the identity
        let q3 = p(3.0);
        for eps in [1e-2, 1e-3] {
            let y = PhasePoint::new(eps, 0.5 * eps);
            let d = iterate(y, 3, &q3).dist_inf(&y);
            assert!(d < 50.0 * eps * eps, "eps {eps}: {d}");
        }
    }

    #[test]
    fn lifted_iteration_tracks_winding() {
        let q = p(2.0);
        let x = LiftedPoint { psi_tilde: 0.05, w: 0.02 };
        let y = iterate_lifted(x, 50, &q).unwrap();
        assert!(y.project().dist_inf(&iterate(x.project(), 50, &q)) < 1e-9);
        // a fast-escaping orbit winds around the cylinder and overflows the bound
        let err = iterate_lifted(LiftedPoint { psi_tilde: 0.0, w: 3.0 }, 1_000_000, &q).unwrap_err();
        assert!(matches!(err, RtmError::Unbounded { .. }));
    }

    #[test]
    fn reversor_examples() {
        let q = p(2.0);
        let x = PhasePoint::new(0.1, 0.0);
        assert_eq!(reversor_r1(reversor_r0(x), &q), map_forward(x, &q));
        assert_eq!(reversor_r0(PhasePoint::new(0.3, 0.0)), PhasePoint::new(0.3, 0.0));
        let y = on_fix_r1(0.2, &q);
        assert!(reversor_r1(y, &q).dist_inf(&y) < 1e-16);
    }

    #[test]
    fn jacobian_and_linear_types() {
        let t2 = linear_type_at_fixed_points(&p(2.0));
        assert_eq!(t2.trace_s, 0.0);
        assert_eq!(t2.type_s, LinearType::Elliptic);
        let t0 = linear_type_at_fixed_points(&p(0.0));
        assert_eq!(t0.trace_s, 2.0);
        assert_eq!(t0.type_s, LinearType::Parabolic);
        let t1 = linear_type_at_fixed_points(&p(1.0));
        assert_eq!(t1.trace_h, 3.0);
        assert_eq!(t1.type_h, LinearType::Hyperbolic);
        assert_eq!(linear_type_at_fixed_points(&p(4.0)).type_s, LinearType::Parabolic);
        assert_eq!(linear_type_at_fixed_points(&p(4.5)).type_s, LinearType::Hyperbolic);

        // trace of the jacobian at the fixed points matches the closed forms
        for mu in [0.5, 1.0, 2.5] {
            let q = p(mu);
            let js = jacobian(q.p_s(), &q);
            let jh = jacobian(q.p_h(), &q);
            assert_abs_diff_eq!(js[0][0] + js[1][1], 2.0 - mu, epsilon = 1e-13);
            assert_abs_diff_eq!(jh[0][0] + jh[1][1], 2.0 + mu, epsilon = 1e-13);
        }
    }

    #[test]
    fn generating_action_partials() {
        let q = p(1.0);
        let (psi, psi1) = (0.1, 0.2);
        let d = 1e-6;
        let dl_dpsi = (generating_action(psi + d, psi1, &q) - generating_action(psi - d, psi1, &q)) / (2.0 * d);
        let dl_dpsi1 = (generating_action(psi, psi1 + d, &q) - generating_action(psi, psi1 - d, &q)) / (2.0 * d);
        let w = -dl_dpsi;
        let img = map_forward(PhasePoint::new(psi, w), &q);
        assert_abs_diff_eq!(img.psi, psi1, epsilon = 1e-8);
        assert_abs_diff_eq!(img.w, dl_dpsi1, epsilon = 1e-8);

        assert_eq!(generating_action(0.37, 0.37, &q), potential(0.37, &q));
        let vp = (potential(0.5 + d, &q) - potential(0.5 - d, &q)) / (2.0 * d);
        assert_abs_diff_eq!(vp, eta(0.5, &q), epsilon = 1e-8);
        assert_eq!(potential(q.p_h().psi, &q), 0.0);
    }

    fn pt() -> impl Strategy<Value = (f64, f64, f64)> {
        (-0.5f64..4.5, -PI..PI, -1.0f64..1.0)
    }

    proptest! {
        #[test]
        fn area_preservation((mu, psi, w) in pt()) {
            let q = p(mu);
            prop_assert!((det(&jacobian(PhasePoint::new(psi, w), &q)) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn inverse_round_trip((mu, psi, w) in pt()) {
            let q = p(mu);
            let x = PhasePoint::new(psi, w);
            prop_assert!(map_inverse(map_forward(x, &q), &q).dist_inf(&x) < 1e-12);
            prop_assert!(map_forward(map_inverse(x, &q), &q).dist_inf(&x) < 1e-12);
        }

        #[test]
        fn factorization_and_involutions((mu, psi, w) in pt()) {
            let q = p(mu);
            let x = PhasePoint::new(psi, w);
            prop_assert!(map_forward(x, &q).dist_inf(&reversor_r1(reversor_r0(x), &q)) < 1e-14);
            prop_assert!(reversor_r0(reversor_r0(x)).dist_inf(&x) < 1e-15);
            prop_assert_eq!(reversor_r1(reversor_r1(x, &q), &q).psi, x.psi);
            prop_assert!((reversor_r1(reversor_r1(x, &q), &q).w - x.w).abs() < 1e-15);
            let conj = reversor_r0(map_forward(reversor_r0(x), &q));
            prop_assert!(conj.dist_inf(&map_inverse(x, &q)) < 1e-12);
            prop_assert!(PhasePoint::new(psi + w, w).psi >= -PI && map_forward(x, &q).psi < PI);
        }
    }
}
