//! Closed-form local theory at the synchronous fixed point.

use std::f64::consts::{PI, TAU};

use crate::error::{Result, RtmError};
use crate::map::PhasePoint;

/// Why `p_s` is (or is not) locally stable at a given `mu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityReason {
    HyperbolicUnstable,
    SaddleCenterParabolicUnstable,
    EllipticTwistStable,
    FourthOrderSimoStable,
    TwistRootHigherOrderStable,
    ThirdOrderResonanceUnstable,
    SecondOrderParabolicStable,
}

impl StabilityReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::HyperbolicUnstable => "hyperbolic_unstable",
            Self::SaddleCenterParabolicUnstable => "saddle_center_parabolic_unstable",
            Self::EllipticTwistStable => "elliptic_twist_stable",
            Self::FourthOrderSimoStable => "fourth_order_simo_stable",
            Self::TwistRootHigherOrderStable => "twist_root_higher_order_stable",
            Self::ThirdOrderResonanceUnstable => "third_order_resonance_unstable",
            Self::SecondOrderParabolicStable => "second_order_parabolic_stable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub reason: StabilityReason,
}

/// A resonance `m/n` with `gcd(m, n) = 1` and `0 <= m <= n/2`.
/// `(0, 1)` denotes the fixed points themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResonanceId {
    m: u32,
    n: u32,
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl ResonanceId {
    pub fn new(m: u32, n: u32) -> Result<Self> {
        if n == 0 || 2 * m > n || gcd(m as u64, n as u64) != 1 {
            return Err(RtmError::Invalid(format!("({m},{n}) is not a reduced resonance with m <= n/2")));
        }
        Ok(Self { m, n })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn ratio(&self) -> f64 {
        self.m as f64 / self.n as f64
    }
}

impl std::fmt::Display for ResonanceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

impl std::str::FromStr for ResonanceId {
    type Err = RtmError;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut it = t.split([',', '/', ':']);
        let parse = |x: Option<&str>| -> Result<u32> {
            x.and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| RtmError::Invalid(format!("cannot parse resonance {s:?}")))
        };
        let m = parse(it.next())?;
        let n = parse(it.next())?;
        if it.next().is_some() {
            return Err(RtmError::Invalid(format!("cannot parse resonance {s:?}")));
        }
        ResonanceId::new(m, n)
    }
}

fn twist_numerator(c: f64) -> f64 {
    let pi2 = PI * PI;
    ((2.0 * c - 3.0) * c + 4.0 * pi2) * c + 1.0 + pi2
}

fn twist_numerator_prime(c: f64) -> f64 {
    (6.0 * c - 6.0) * c + 4.0 * PI * PI
}

/// Twist coefficient of the elliptic point as a function of its rotation angle.
pub fn twist_coefficient(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(RtmError::Domain(format!("theta must be finite, got {theta}")));
    }
    const POLE_TOL: f64 = 1e-14;
    let r = theta.rem_euclid(TAU);
    for pole in [0.0, TAU / 3.0, PI, 2.0 * TAU / 3.0, TAU] {
        if (r - pole).abs() < POLE_TOL {
            return Err(RtmError::Pole { theta });
        }
    }
    let (s, c) = theta.sin_cos();
    let den = (c - 1.0) * (2.0 * c + 1.0) * s * s;
    Ok(twist_numerator(c) / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwistRoot {
    pub theta_r: f64,
    pub mu_r: f64,
}

/// Unique zero of the twist coefficient on `(0, π)`.
pub fn twist_root() -> TwistRoot {
    // bracket avoids the poles at 0 and 2π/3
    let tau = |t: f64| twist_coefficient(t).expect("bracket avoids poles");
    let (mut lo, mut hi) = (1.5_f64, 2.09_f64);
    let flo = tau(lo);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if (tau(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Newton on the numerator in c = cos theta, well conditioned near the root
    let mut c = (0.5 * (lo + hi)).cos();
    for _ in 0..8 {
        let step = twist_numerator(c) / twist_numerator_prime(c);
        c -= step;
        if step.abs() < 1e-17 {
            break;
        }
    }
    let theta_r = c.acos();
    TwistRoot { theta_r, mu_r: 2.0 - 2.0 * c }
}

/// Discriminant of the cubic numerator of the twist coefficient in `cos θ`.
pub fn twist_numerator_discriminant() -> f64 {
    let (a, b, c, d) = (2.0, -3.0, 4.0 * PI * PI, 1.0 + PI * PI);
    18.0 * a * b * c * d - 4.0 * b * b * b * d + b * b * c * c - 4.0 * a * c * c * c - 27.0 * a * a * d * d
}

/// Local stability of `p_s`, stable exactly for `mu` in `(0, 4] \ {3}`.
pub fn classify_local_stability(mu: f64) -> StabilityVerdict {
    use StabilityReason::*;
    let mu_r = twist_root().mu_r;
    let (stable, reason) = if !(0.0..=4.0).contains(&mu) {
        (false, HyperbolicUnstable)
    } else if mu == 0.0 {
        (false, SaddleCenterParabolicUnstable)
    } else if mu == 4.0 {
        (true, SecondOrderParabolicStable)
    } else if mu == 3.0 {
        (false, ThirdOrderResonanceUnstable)
    } else if mu == 2.0 {
        (true, FourthOrderSimoStable)
    } else if (mu - mu_r).abs() <= 1e-12 {
        (true, TwistRootHigherOrderStable)
    } else {
        (true, EllipticTwistStable)
    };
    StabilityVerdict { stable, reason }
}

/// Taylor coefficient of `x^k` in `2π(1 − cos x) − 2(x − sin x)`.
pub fn fourth_order_taylor(k: u32) -> f64 {
    series_coefficient(k, -TAU, -2.0)
}

/// Taylor coefficient of `u^k` in `2π(cos u − 1) + 4(u − sin u)`.
pub fn second_order_taylor(k: u32) -> f64 {
    series_coefficient(k, TAU, 4.0)
}

// coefficient of x^k in  cc (cos x − 1) + sc (x − sin x)
fn series_coefficient(k: u32, cc: f64, sc: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    if k % 2 == 0 {
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        cc * sign / fact
    } else if k == 1 {
        0.0
    } else {
        // x − sin x = x³/3! − x⁵/5! + ...
        let sign = if ((k - 1) / 2) % 2 == 1 { 1.0 } else { -1.0 };
        sc * sign / fact
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourthOrderCoeffs {
    pub a2: f64,
    pub a3: f64,
    /// `!(0 < a3 <= a2²)`: the stability condition at the fourth order resonance.
    pub stable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderCoeffs {
    pub b2: f64,
    pub b3: f64,
    /// `2 b3 + b2²`, positive for stability at the parabolic point.
    pub criterion: f64,
    pub stable: bool,
}

pub fn taylor_coeffs_fourth_order() -> FourthOrderCoeffs {
    let a2 = fourth_order_taylor(2);
    let a3 = fourth_order_taylor(3);
    FourthOrderCoeffs { a2, a3, stable: !(0.0 < a3 && a3 <= a2 * a2) }
}

pub fn taylor_coeffs_second_order() -> SecondOrderCoeffs {
    let b2 = second_order_taylor(2);
    let b3 = second_order_taylor(3);
    let criterion = 2.0 * b3 + b2 * b2;
    SecondOrderCoeffs { b2, b3, criterion, stable: criterion > 0.0 }
}

/// Parameter at which the elliptic point becomes `m/n` resonant.
pub fn resonance_mu(r: ResonanceId) -> f64 {
    2.0 - 2.0 * (TAU * r.ratio()).cos()
}

/// Leading-order area of the stability domain as `mu → 0+`.
pub fn asymptotic_area_saddle_center(mu: f64) -> f64 {
    6.0 * mu.powf(2.5) / (5.0 * PI * PI)
}

/// Leading-order area of the connected component at `mu = 3 + eps`.
pub fn asymptotic_area_third_order(eps: f64) -> f64 {
    9.0 * eps * eps / (2.0 * PI * PI)
}

/// Vertices of the triangle approximating the last invariant curve at `mu = 3 + eps`.
pub fn third_order_triangle(eps: f64) -> [PhasePoint; 3] {
    let s = eps / PI;
    [
        PhasePoint { psi: s, w: 0.0 },
        PhasePoint { psi: s, w: -3.0 * s },
        PhasePoint { psi: -2.0 * s, w: 3.0 * s },
    ]
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(vertices: &[PhasePoint]) -> f64 {
    let n = vertices.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a.psi * b.w - b.psi * a.w;
    }
    0.5 * acc.abs()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatFit {
    pub rho0: f64,
    pub rho2: f64,
    pub samples_used: usize,
}

pub const FLAT_FIT_WINDOW: f64 = 0.05;
pub const FLAT_FIT_MIN_SAMPLES: usize = 8;

/// Least-squares fit of `rho = rho0 + rho2 psi^4` over `|psi| <= 0.05`.
pub fn flat_rotation_fit(samples: &[(f64, f64)]) -> Result<FlatFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|(psi, rho)| psi.abs() <= FLAT_FIT_WINDOW && rho.is_finite())
        .map(|(psi, rho)| (psi.powi(4), rho))
        .collect();
    if pts.len() < FLAT_FIT_MIN_SAMPLES {
        return Err(RtmError::InsufficientData { needed: FLAT_FIT_MIN_SAMPLES, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(RtmError::Invalid("flat fit needs at least two distinct |psi|".into()));
    }
    let rho2 = sxy / sxx;
    Ok(FlatFit { rho0: my - rho2 * mx, rho2, samples_used: pts.len() })
}
