//! The map, its inverse and the generating function in MPFR arithmetic.

use rug::float::Constant;
use rug::Float;

use crate::error::{Result, RtmError};

/// Working precision for the multiprecision kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionContext {
    mantissa_bits: u32,
}

impl Default for PrecisionContext {
    fn default() -> Self {
        Self { mantissa_bits: 256 }
    }
}

impl PrecisionContext {
    pub const MIN_BITS: u32 = 64;
    pub const MAX_BITS: u32 = 2048;

    pub fn new(mantissa_bits: u32) -> Result<Self> {
        if !(Self::MIN_BITS..=Self::MAX_BITS).contains(&mantissa_bits) {
            return Err(RtmError::Invalid(format!(
                "mantissa_bits must lie in [{}, {}], got {mantissa_bits}",
                Self::MIN_BITS,
                Self::MAX_BITS
            )));
        }
        Ok(Self { mantissa_bits })
    }

    pub fn bits(&self) -> u32 {
        self.mantissa_bits
    }

    /// `10^{−0.8·bits·log10 2}`, the residual every series has to reach.
    pub fn residual_target(&self) -> f64 {
        2f64.powf(-0.8 * self.mantissa_bits as f64)
    }

    pub fn float(&self, x: f64) -> Float {
        Float::with_val(self.mantissa_bits, x)
    }
}

/// A point `(psi, w)` on the lift in working precision.
#[derive(Debug, Clone, PartialEq)]
pub struct HpPoint {
    pub psi: Float,
    pub w: Float,
}

impl HpPoint {
    pub fn to_f64(&self) -> (f64, f64) {
        (self.psi.to_f64(), self.w.to_f64())
    }
}

/// Map constants in working precision.
#[derive(Debug, Clone)]
pub struct HpMap {
    prec: u32,
    pub mu: Float,
    pub two_pi: Float,
    pub psi_h: Float,
    v_h: Float,
}

impl HpMap {
    pub fn new(mu: &Float) -> Result<Self> {
        let prec = mu.prec();
        if !mu.is_finite() {
            return Err(RtmError::Domain("mu must be finite".into()));
        }
        let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
        let phi_s = Float::with_val(prec, mu / &two_pi).atan();
        let psi_h = phi_s * -2i32;
        let mut m = Self { prec, mu: mu.clone(), two_pi, psi_h, v_h: Float::new(prec) };
        m.v_h = m.raw_potential(&m.psi_h.clone());
        Ok(m)
    }

    pub fn from_f64(mu: f64, ctx: &PrecisionContext) -> Result<Self> {
        Self::new(&ctx.float(mu))
    }

    /// The parameter with characteristic exponent `h`: `mu = 2(cosh h − 1)`.
    pub fn from_h(h: f64, ctx: &PrecisionContext) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(RtmError::Domain(format!("h must be positive, got {h}")));
        }
        let c = ctx.float(h).cosh();
        Self::new(&((c - 1u32) * 2u32))
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn mu_f64(&self) -> f64 {
        self.mu.to_f64()
    }

    /// `h = acosh(1 + mu/2)`.
    pub fn h(&self) -> Float {
        (Float::with_val(self.prec, &self.mu / 2u32) + 1u32).acosh()
    }

    pub fn p_h(&self) -> HpPoint {
        HpPoint { psi: self.psi_h.clone(), w: Float::new(self.prec) }
    }

    pub fn eta(&self, psi: &Float) -> Float {
        let s = Float::with_val(self.prec, psi.sin_ref());
        let c = Float::with_val(self.prec, psi.cos_ref());
        (c - 1u32) * &self.two_pi - s * &self.mu
    }

    pub fn eta_prime(&self, psi: &Float) -> Float {
        let s = Float::with_val(self.prec, psi.sin_ref());
        let c = Float::with_val(self.prec, psi.cos_ref());
        -(s * &self.two_pi) - c * &self.mu
    }

    pub fn forward(&self, p: &HpPoint) -> HpPoint {
        let psi = Float::with_val(self.prec, &p.psi + &p.w);
        let w = self.eta(&psi) + &p.w;
        HpPoint { psi, w }
    }

    pub fn inverse(&self, p: &HpPoint) -> HpPoint {
        let w = Float::with_val(self.prec, &p.w - self.eta(&p.psi));
        let psi = Float::with_val(self.prec, &p.psi - &w);
        HpPoint { psi, w }
    }

    pub fn step(&self, p: &HpPoint, dir: Direction) -> HpPoint {
        match dir {
            Direction::Forward => self.forward(p),
            Direction::Backward => self.inverse(p),
        }
    }

    /// `r0(psi, w) = (psi + w, −w)`.
    pub fn r0(&self, p: &HpPoint) -> HpPoint {
        HpPoint { psi: Float::with_val(self.prec, &p.psi + &p.w), w: Float::with_val(self.prec, -&p.w) }
    }

    /// `r1(psi, w) = (psi, eta(psi) − w)`.
    pub fn r1(&self, p: &HpPoint) -> HpPoint {
        HpPoint { psi: p.psi.clone(), w: self.eta(&p.psi) - &p.w }
    }

    fn raw_potential(&self, psi: &Float) -> Float {
        let s = Float::with_val(self.prec, psi.sin_ref());
        let c = Float::with_val(self.prec, psi.cos_ref());
        (s - psi) * &self.two_pi + c * &self.mu
    }

    /// `V` shifted so that `V(psi_h) = 0`.
    pub fn potential(&self, psi: &Float) -> Float {
        self.raw_potential(psi) - &self.v_h
    }

    /// `L(psi, psi1) = (psi1 − psi)^2/2 + V(psi1)`.
    pub fn action(&self, psi: &Float, psi1: &Float) -> Float {
        let d = Float::with_val(self.prec, psi1 - psi);
        let d2 = Float::with_val(self.prec, d.square_ref()) / 2u32;
        d2 + self.potential(psi1)
    }
}

/// Time direction of the map used by a series or a globalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}
