//! Double-precision evaluation of a solved series and its globalization.

use std::f64::consts::TAU;

use super::hp::Direction;
use super::series::ManifoldSeries;
use crate::map::RtmParams;

/// A [`ManifoldSeries`] rounded to `f64` for bulk curve sampling.
#[derive(Debug, Clone)]
pub struct CurveF64 {
    coeffs: Vec<(f64, f64)>,
    lambda: f64,
    period: usize,
    shift: f64,
    dir: Direction,
    mu: f64,
}

impl CurveF64 {
    pub fn new(series: &ManifoldSeries) -> Self {
        // coefficients below the double range contribute nothing on |t| <= 1
        let coeffs = series.coeffs_f64();
        let last = coeffs.iter().rposition(|c| c.0 != 0.0 || c.1 != 0.0).unwrap_or(0);
        Self {
            coeffs: coeffs[..=last].to_vec(),
            lambda: series.multiplier.to_f64(),
            period: series.period,
            shift: TAU * series.lift_shift() as f64,
            dir: series.direction(),
            mu: series.map().mu_f64(),
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn params(&self) -> RtmParams {
        RtmParams::from_mu(self.mu).expect("finite mu")
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (mut x, mut y) = (0.0, 0.0);
        for &(cx, cy) in self.coeffs.iter().rev() {
            x = x * t + cx;
            y = y * t + cy;
        }
        (x, y)
    }

    fn eta(&self, psi: f64) -> f64 {
        let (s, c) = psi.sin_cos();
        TAU * (c - 1.0) - self.mu * s
    }

    /// `f^{±period}` on the lift with the phase shift removed.
    pub fn image(&self, p: (f64, f64)) -> (f64, f64) {
        let (mut x, mut y) = p;
        for _ in 0..self.period {
            match self.dir {
                Direction::Forward => {
                    x += y;
                    y += self.eta(x);
                }
                Direction::Backward => {
                    y -= self.eta(x);
                    x -= y;
                }
            }
        }
        match self.dir {
            Direction::Forward => (x - self.shift, y),
            Direction::Backward => (x + self.shift, y),
        }
    }

    pub fn domains_for(&self, t: f64) -> usize {
        if t.abs() <= 1.0 {
            0
        } else {
            (t.abs().ln() / self.lambda.abs().ln()).ceil().max(0.0) as usize
        }
    }

    pub fn point_at(&self, t: f64) -> (f64, f64) {
        let m = self.domains_for(t);
        let mut p = self.eval(t / self.lambda.powi(m as i32));
        for _ in 0..m {
            p = self.image(p);
        }
        p
    }
}
