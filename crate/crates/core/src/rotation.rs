//! Refined rotation numbers around the elliptic point and the resulting
//! classification of bounded orbits.
//!
//! Rotation is counted clockwise, so the phase map has rotation numbers in
//! `(0, 1/2]` near `p_s`. The estimator combines iterated partial sums of the
//! unwrapped argument at dyadic times so that the `O(1/N)` error of the plain
//! average cancels up to order `P`.

use std::f64::consts::TAU;

use crate::dd::DD;
use crate::error::{Result, RtmError};
use crate::map::{PhasePoint, PlanarMap};

/// Points closer than this to the origin have no usable argument.
pub const DEGENERATE_RADIUS: f64 = 1e-13;
/// Number of leading steps that rely on the linear rotation hint, if any,
/// before the running mean takes over as the lift prediction.
pub const HINT_STEPS: usize = 3;
/// A partial quotient above this value marks the expansion as rational.
pub const CF_BLOWUP: f64 = 1e6;
/// Partial quotients inspected by the rationality test.
pub const CF_TERMS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationConfig {
    pub p: u32,
    pub q: u32,
    pub tol: f64,
    /// Orbits with `|w| > control_w` are reported as escaped.
    pub control_w: Option<f64>,
}

impl Default for RotationConfig {
    fn default() -> Self {
        Self { p: 7, q: 15, tol: 1e-10, control_w: Some(1.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationEstimate {
    /// Rotation number in turns per iterate.
    pub theta_pq: f64,
    pub err_bound: f64,
    pub p: u32,
    pub q: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitClass {
    Chaotic,
    Rational { m: u64, n: u64 },
    Irrational(f64),
    Escaped { step: i64 },
}

impl OrbitClass {
    pub fn label(&self) -> String {
        match self {
            OrbitClass::Chaotic => "chaotic".into(),
            OrbitClass::Rational { m, n } => format!("rational({m}/{n})"),
            OrbitClass::Irrational(_) => "irrational".into(),
            OrbitClass::Escaped { .. } => "escaped".into(),
        }
    }
}

/// Clockwise angle from `a` to `b`, both seen from the origin, in `(−π, π]`.
#[inline]
fn clockwise_delta(a: PhasePoint, b: PhasePoint) -> f64 {
    let cross = a.psi * b.w - a.w * b.psi;
    let dot = a.psi * b.psi + a.w * b.w;
    (-cross).atan2(dot)
}

#[inline]
fn lift_increment(principal: f64, prediction: Option<f64>) -> f64 {
    match prediction {
        Some(pred) => principal + TAU * ((pred - principal) / TAU).round(),
        None => principal,
    }
}

/// Tracks the lifted argument of an orbit step by step.
struct Unwrapper {
    hint: Option<f64>,
    total: DD,
    steps: usize,
}

impl Unwrapper {
    fn new(hint: Option<f64>) -> Self {
        Self { hint: hint.map(|h| TAU * h), total: DD::ZERO, steps: 0 }
    }

    fn prediction(&self) -> Option<f64> {
        if self.steps < HINT_STEPS {
            self.hint
        } else {
            Some(self.total.to_f64() / self.steps as f64)
        }
    }

    fn step(&mut self, a: PhasePoint, b: PhasePoint) -> f64 {
        let d = lift_increment(clockwise_delta(a, b), self.prediction());
        self.total += d;
        self.steps += 1;
        d
    }
}

fn check_degenerate(p: PhasePoint, step: usize) -> Result<()> {
    if p.psi.hypot(p.w) < DEGENERATE_RADIUS {
        Err(RtmError::DegenerateArgument { step })
    } else {
        Ok(())
    }
}

/// Lifted arguments `phi_0, ..., phi_n` of the forward orbit of `p` about the origin.
pub fn unwrapped_arguments<M: PlanarMap + ?Sized>(p: PhasePoint, n: usize, map: &M) -> Result<Vec<f64>> {
    check_degenerate(p, 0)?;
    let mut out = Vec::with_capacity(n + 1);
    let phi0 = (-p.w).atan2(p.psi);
    out.push(phi0);
    let mut un = Unwrapper::new(map.rotation_hint());
    let mut x = p;
    for k in 1..=n {
        let y = map.forward(x);
        check_degenerate(y, k)?;
        un.step(x, y);
        out.push(phi0 + un.total.to_f64());
        x = y;
    }
    Ok(out)
}

/// Streaming iterated sums `S^1..S^P` of `phi_n − phi_0`, with `S^P` recorded at
/// the dyadic times `2^q`.
pub struct IteratedSums {
    order: usize,
    sums: Vec<DD>,
    n: u64,
    dyadic: Vec<Option<DD>>,
}

impl IteratedSums {
    pub fn new(order: u32, max_q: u32) -> Self {
        Self {
            order: order as usize,
            sums: vec![DD::ZERO; order as usize + 1],
            n: 0,
            dyadic: vec![None; max_q as usize + 1],
        }
    }

    /// Feed `phi_n − phi_0` for `n = 1, 2, ...`.
    pub fn push(&mut self, d: DD) {
        self.n += 1;
        self.sums[1] += d;
        for k in 2..=self.order {
            let prev = self.sums[k - 1];
            self.sums[k] += prev;
        }
        if self.n.is_power_of_two() {
            let q = self.n.trailing_zeros() as usize;
            if q < self.dyadic.len() {
                self.dyadic[q] = Some(self.sums[self.order]);
            }
        }
    }

    pub fn current(&self, k: usize) -> DD {
        self.sums[k]
    }

    /// `S^P_{2^q}` once the time `2^q` has been reached.
    pub fn at_dyadic(&self, q: u32) -> Option<DD> {
        self.dyadic.get(q as usize).copied().flatten()
    }
}

fn delta_weight(p: u32) -> f64 {
    (1..=p).map(|j| ((1u64 << j) - 1) as f64).product()
}

/// `C(2^q + p, p + 1)` in double-double.
fn binomial_dd(q: u32, p: u32) -> DD {
    let top = (1u64 << q) as f64 + p as f64;
    let mut num = DD::ONE;
    let mut den = DD::ONE;
    for i in 0..=p {
        num = num * (top - i as f64);
        den = den * (i as f64 + 1.0);
    }
    num / den
}

fn combine(sums: &IteratedSums, p_order: u32, q: u32) -> Option<DD> {
    let mut acc = DD::ZERO;
    for p in 0..=p_order {
        let qq = q + p - p_order;
        let s = sums.at_dyadic(qq)?;
        let stilde = s / binomial_dd(qq, p_order);
        let sign = if (p_order - p) % 2 == 0 { 1.0 } else { -1.0 };
        let w = DD::from_f64(sign * 2f64.powi((p * (p + 1) / 2) as i32))
            / DD::from_f64(delta_weight(p) * delta_weight(p_order - p));
        acc += w * stilde;
    }
    Some(acc)
}

fn estimate_from_sums(sums: &IteratedSums, p: u32, q: u32) -> RotationEstimate {
    let hi = combine(sums, p, q).expect("dyadic sums recorded").to_f64() / TAU;
    let lo = combine(sums, p, q - 1).expect("dyadic sums recorded").to_f64() / TAU;
    RotationEstimate { theta_pq: hi, err_bound: 2f64.powi(-(p as i32 + 1)) * (hi - lo).abs(), p, q }
}

fn check_orders(p: u32, q: u32) -> Result<()> {
    if p == 0 || q <= p || q > 40 {
        return Err(RtmError::Invalid(format!("need 0 < P < Q <= 40, got P = {p}, Q = {q}")));
    }
    Ok(())
}

/// Refined estimate from a precomputed argument sequence `phi_0..phi_{2^Q}`.
pub fn refined_from_arguments(phis: &[f64], p: u32, q: u32) -> Result<RotationEstimate> {
    check_orders(p, q)?;
    let n = 1usize << q;
    if phis.len() < n + 1 {
        return Err(RtmError::InsufficientData { needed: n + 1, got: phis.len() });
    }
    let mut sums = IteratedSums::new(p, q);
    for &phi in &phis[1..=n] {
        sums.push(DD::from_f64(phi) + (-phis[0]));
    }
    Ok(estimate_from_sums(&sums, p, q))
}

/// `Θ(P, Q)` for the orbit of `p`, escaping when `|w|` exceeds the control bound.
pub fn refined_rotation_number_with<M: PlanarMap + ?Sized>(
    p: PhasePoint,
    cfg: &RotationConfig,
    map: &M,
) -> Result<RotationEstimate> {
    check_orders(cfg.p, cfg.q)?;
    check_degenerate(p, 0)?;
    let n = 1u64 << cfg.q;
    let mut sums = IteratedSums::new(cfg.p, cfg.q);
    let mut un = Unwrapper::new(map.rotation_hint());
    let mut x = p;
    for k in 1..=n {
        let y = map.forward(x);
        if let Some(c) = cfg.control_w {
            if !(y.w.abs() <= c) {
                return Err(RtmError::Escaped { step: k as i64 });
            }
        }
        check_degenerate(y, k as usize)?;
        un.step(x, y);
        sums.push(un.total);
        x = y;
    }
    Ok(estimate_from_sums(&sums, cfg.p, cfg.q))
}

pub fn refined_rotation_number<M: PlanarMap + ?Sized>(p: PhasePoint, p_order: u32, q: u32, map: &M) -> Result<RotationEstimate> {
    let cfg = RotationConfig { p: p_order, q, ..RotationConfig::default() };
    refined_rotation_number_with(p, &cfg, map)
}

/// Partial quotients `a1, a2, ...` of `rho = 1/(a1 + 1/(a2 + ...))` for `rho` in `(0, 1)`.
/// The expansion stops after a quotient above [`CF_BLOWUP`] or when the remainder vanishes.
pub fn continued_fraction(rho: f64, max_terms: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let mut x = rho - rho.floor();
    while out.len() < max_terms && x > 0.0 {
        let inv = 1.0 / x;
        let a = inv.floor();
        out.push(if a >= u64::MAX as f64 { u64::MAX } else { a as u64 });
        if a > CF_BLOWUP {
            break;
        }
        x = inv - a;
    }
    out
}

/// Convergent `m/n` of the quotients up to (not including) index `k`.
pub fn convergent(quotients: &[u64]) -> (u64, u64) {
    // for x in (0,1): h_{-1}=1, h_0=0 ; k_{-1}=0, k_0=1
    let (mut h0, mut h1) = (1u128, 0u128);
    let (mut k0, mut k1) = (0u128, 1u128);
    for &a in quotients {
        let a = a as u128;
        (h0, h1) = (h1, a * h1 + h0);
        (k0, k1) = (k1, a * k1 + k0);
    }
    (h1 as u64, k1 as u64)
}

/// The rational `m/n` that `rho` (mod 1) is numerically indistinguishable from, if any.
pub fn rational_approximation(rho: f64) -> Option<(u64, u64)> {
    let cf = continued_fraction(rho, CF_TERMS);
    let x = rho - rho.floor();
    if x == 0.0 {
        return Some((0, 1));
    }
    match cf.iter().position(|&a| a as f64 > CF_BLOWUP) {
        Some(k) => Some(convergent(&cf[..k])),
        None if cf.len() < CF_TERMS => Some(convergent(&cf)),
        None => None,
    }
    .map(|(m, n)| if n == 0 { (0, 1) } else { (m, n) })
}

/// Rational with the smallest denominator strictly inside `(a, b)`, `0 <= a < b <= 1`.
pub fn smallest_denominator_between(a: f64, b: f64) -> (u64, u64) {
    // Stern-Brocot descent
    let (mut lm, mut ln) = (0u64, 1u64);
    let (mut rm, mut rn) = (1u64, 0u64);
    loop {
        let (m, n) = (lm + rm, ln + rn);
        let v = m as f64 / n as f64;
        if v <= a {
            lm = m;
            ln = n;
        } else if v >= b {
            rm = m;
            rn = n;
        } else {
            return (m, n);
        }
    }
}

pub fn classify_estimate(est: &RotationEstimate, tol: f64) -> OrbitClass {
    if !(est.err_bound <= tol) {
        return OrbitClass::Chaotic;
    }
    let rho = est.theta_pq - est.theta_pq.floor();
    match rational_approximation(rho) {
        Some((m, n)) => OrbitClass::Rational { m, n },
        None => OrbitClass::Irrational(rho),
    }
}

/// Classification together with the estimate it was based on.
pub fn classify_point_detailed<M: PlanarMap + ?Sized>(
    p: PhasePoint,
    cfg: &RotationConfig,
    map: &M,
) -> Result<(OrbitClass, Option<RotationEstimate>)> {
    match refined_rotation_number_with(p, cfg, map) {
        Ok(est) => Ok((classify_estimate(&est, cfg.tol), Some(est))),
        Err(RtmError::Escaped { step }) => Ok((OrbitClass::Escaped { step }, None)),
        Err(e) => Err(e),
    }
}

pub fn classify_point<M: PlanarMap + ?Sized>(p: PhasePoint, cfg: &RotationConfig, map: &M) -> Result<OrbitClass> {
    classify_point_detailed(p, cfg, map).map(|r| r.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{reversor_r0, RtmParams};
    use proptest::prelude::*;

    /// Clockwise rigid rotation by `2π rho`.
    struct Rigid {
        rho: f64,
        hint: bool,
    }

    impl PlanarMap for Rigid {
        fn forward(&self, p: PhasePoint) -> PhasePoint {
            let (s, c) = (TAU * self.rho).sin_cos();
            PhasePoint { psi: c * p.psi + s * p.w, w: -s * p.psi + c * p.w }
        }
        fn inverse(&self, p: PhasePoint) -> PhasePoint {
            let (s, c) = (TAU * self.rho).sin_cos();
            PhasePoint { psi: c * p.psi - s * p.w, w: s * p.psi + c * p.w }
        }
        fn rotation_hint(&self) -> Option<f64> {
            self.hint.then_some(self.rho)
        }
    }

    /// `f^{-1}` seen as a forward map.
    struct Reversed<'a>(&'a RtmParams);

    impl PlanarMap for Reversed<'_> {
        fn forward(&self, p: PhasePoint) -> PhasePoint {
            self.0.inverse(p)
        }
        fn inverse(&self, p: PhasePoint) -> PhasePoint {
            self.0.forward(p)
        }
    }

    fn params(mu: f64) -> RtmParams {
        RtmParams::from_mu(mu).unwrap()
    }

    const GOLDEN: f64 = 0.6180339887498949;

    #[test]
    fn rigid_arguments_are_linear() {
        let r = Rigid { rho: 0.1234, hint: false };
        let phis = unwrapped_arguments(PhasePoint { psi: 0.3, w: 0.0 }, 200, &r).unwrap();
        for (n, phi) in phis.iter().enumerate() {
            assert!((phi - phis[0] - n as f64 * TAU * 0.1234).abs() < 1e-11);
        }
    }

    #[test]
    fn rigid_rotation_estimate() {
        let rho = GOLDEN / 2.0;
        let r = Rigid { rho, hint: false };
        let est = refined_rotation_number(PhasePoint { psi: 0.2, w: 0.1 }, 7, 15, &r).unwrap();
        assert!((est.theta_pq - rho).abs() < 1e-12, "{est:?}");
        // golden mean itself needs the hint since the step exceeds half a turn
        let r = Rigid { rho: GOLDEN, hint: true };
        let est = refined_rotation_number(PhasePoint { psi: 0.2, w: 0.1 }, 7, 15, &r).unwrap();
        assert!((est.theta_pq - GOLDEN).abs() < 1e-12, "{est:?}");
    }

    #[test]
    fn rigid_error_bound_drops_with_q() {
        // a non-uniform angular speed needs the extrapolation
        struct Sheared;
        impl PlanarMap for Sheared {
            fn forward(&self, p: PhasePoint) -> PhasePoint {
                // conjugate of a rigid rotation by a linear shear
                let r = Rigid { rho: 0.2 * GOLDEN, hint: false };
                let u = PhasePoint { psi: p.psi - 0.5 * p.w, w: p.w };
                let v = r.forward(u);
                PhasePoint { psi: v.psi + 0.5 * v.w, w: v.w }
            }
            fn inverse(&self, _: PhasePoint) -> PhasePoint {
                unreachable!()
            }
        }
        let p = PhasePoint { psi: 0.3, w: 0.0 };
        let mut prev = f64::INFINITY;
        for q in 9..13 {
            let est = refined_rotation_number(p, 3, q, &Sheared).unwrap();
            if q >= 11 {
                assert!((est.theta_pq - 0.2 * GOLDEN).abs() < 1e-9, "q {q}: {est:?}");
            }
            if est.err_bound > 1e-14 {
                assert!(est.err_bound < prev / 4.0, "q {q}: {} vs {prev}", est.err_bound);
            }
            prev = est.err_bound;
        }
    }

    #[test]
    fn linear_limit_at_mu_two() {
        let q = params(2.0);
        let phis = unwrapped_arguments(PhasePoint::new(1e-4, 0.0), 4096, &q).unwrap();
        let avg = (phis[4096] - phis[0]) / (TAU * 4096.0);
        assert!((avg - 0.25).abs() < 1e-3);
        // the amplitude-dependent shift is quadratic in the distance to p_s
        let rho = |psi: f64| refined_rotation_number(PhasePoint::new(psi, 0.0), 7, 15, &q).unwrap().theta_pq;
        let (d1, d2) = (rho(2e-4) - 0.25, rho(4e-4) - 0.25);
        assert!((rho(1e-3) - 0.25).abs() < 2e-6);
        assert!(d1.abs() < 2e-6);
        assert!((d2 / d1 - 4.0).abs() < 0.05, "{d1} {d2}");
        assert!((rho(1e-5) - 0.25).abs() < 1e-8);
    }

    #[test]
    fn reversed_symmetric_arguments() {
        let q = params(1.5);
        let p = PhasePoint::new(0.05, 0.0);
        let fwd = unwrapped_arguments(p, 200, &q).unwrap();
        let back = unwrapped_arguments(p, 200, &Reversed(&q)).unwrap();
        // the backward orbit of a point on Fix(r0) is the r0 image of the forward one,
        // so it winds the same amount the other way
        for n in 1..=200 {
            let a = fwd[n] - fwd[0];
            let b = back[n] - back[0];
            assert!(a > 0.0 && b < 0.0);
            assert!((a + b).abs() < 1.0, "n {n}: {a} {b}");
        }
    }

    #[test]
    fn limit_values_near_fixed_point() {
        for mu in [0.5, 1.0, 2.5] {
            let q = params(mu);
            let est = refined_rotation_number(PhasePoint::new(1e-4, 0.0), 7, 15, &q).unwrap();
            let expect = (1.0 - mu / 2.0).acos() / TAU;
            assert!((est.theta_pq - expect).abs() < 1e-7, "mu {mu}: {est:?}");
        }
    }

    #[test]
    fn time_reversal_invariance() {
        let q = params(1.0);
        let p = PhasePoint::new(0.1, 0.02);
        let a = refined_rotation_number(p, 7, 13, &q).unwrap();
        let b = refined_rotation_number(reversor_r0(p), 7, 13, &Reversed(&q)).unwrap();
        // r0 reverses orientation, so the mirrored orbit turns the other way
        assert!((a.theta_pq + b.theta_pq).abs() <= 2.0 * a.err_bound.max(b.err_bound).max(1e-13));
    }

    #[test]
    fn streaming_matches_double_loops() {
        let mut rng = 12345u64;
        for q in 3..=10u32 {
            let n = 1usize << q;
            let phis: Vec<f64> = (0..=n)
                .map(|_| {
                    rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (rng >> 54) as f64
                })
                .collect();
            let order = 3u32.min(q - 1);
            let mut s = IteratedSums::new(order, q);
            for &phi in &phis[1..] {
                s.push(DD::from_f64(phi - phis[0]));
            }
            // direct evaluation of the nested sums
            let mut level: Vec<f64> = (0..=n).map(|j| phis[j] - phis[0]).collect();
            for _ in 0..order {
                let mut next = vec![0.0; n + 1];
                for m in 0..=n {
                    next[m] = (0..=m).map(|j| level[j]).sum();
                }
                level = next;
            }
            for qq in 0..=q {
                assert_eq!(s.at_dyadic(qq).unwrap().to_f64(), level[1 << qq]);
            }
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial_dd(3, 1).to_f64(), 36.0);
        assert_eq!(binomial_dd(2, 2).to_f64(), 20.0);
        // weights of the extrapolation sum to one
        for p in 1..9 {
            let s: f64 = (0..=p)
                .map(|k| {
                    let sign = if (p - k) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * 2f64.powi((k * (k + 1) / 2) as i32) / (delta_weight(k) * delta_weight(p - k))
                })
                .sum();
            assert!((s - 1.0).abs() < 1e-9, "P = {p}: {s}");
        }
    }

    #[test]
    fn continued_fractions() {
        assert_eq!(continued_fraction(0.25, 12), vec![4]);
        let cf = continued_fraction(0.25 + 1e-12, 12);
        assert!(*cf.last().unwrap() as f64 > CF_BLOWUP);
        assert_eq!(rational_approximation(0.25 + 1e-12), Some((1, 4)));
        assert_eq!(rational_approximation(0.25 - 1e-12), Some((1, 4)));
        assert_eq!(continued_fraction(GOLDEN, 12), vec![1; 12]);
        assert_eq!(rational_approximation(GOLDEN), None);
        assert_eq!(rational_approximation(2.0 / 5.0), Some((2, 5)));

        let rho_star = 0.25302;
        let cf = continued_fraction(rho_star, 12);
        let mut first = None;
        for k in 1..=cf.len() {
            let (m, n) = convergent(&cf[..k]);
            if n >= 5 {
                first = Some((m, n));
                break;
            }
        }
        assert_ne!(first, Some((1, 4)));
        assert_eq!(smallest_denominator_between(0.25, rho_star), (21, 83));
    }

    #[test]
    fn classification_examples() {
        let q = params(1.5);
        let cfg = RotationConfig::default();
        match classify_point(PhasePoint::new(1e-3, 0.0), &cfg, &q).unwrap() {
            OrbitClass::Irrational(rho) => assert!((rho - 0.25f64.acos() / TAU).abs() < 1e-5),
            other => panic!("{other:?}"),
        }
        let far = classify_point(PhasePoint::new(0.0, 0.9), &cfg, &q).unwrap();
        assert!(matches!(far, OrbitClass::Escaped { .. }));
        assert!(matches!(
            refined_rotation_number(PhasePoint::default(), 7, 15, &q),
            Err(RtmError::DegenerateArgument { step: 0 })
        ));
        assert!(refined_rotation_number(PhasePoint::new(0.1, 0.0), 7, 7, &q).is_err());
    }

    proptest! {
        #[test]
        fn rigid_rotations_recovered(rho in 0.01f64..0.49, r in 0.01f64..1.0, a in 0.0f64..TAU) {
            let m = Rigid { rho, hint: false };
            let p = PhasePoint { psi: r * a.cos(), w: r * a.sin() };
            let est = refined_rotation_number(p, 5, 12, &m).unwrap();
            prop_assert!((est.theta_pq - rho).abs() < 1e-10);
        }
    }
}
