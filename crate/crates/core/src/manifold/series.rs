//! Power-series parameterizations `z(t)` of invariant curves solving
//! `F(z(t)) = z(lambda t)` with `F = f^period` (unstable) or `f^{-period}` (stable).

use rug::Float;

use super::hp::{Direction, HpMap, HpPoint, PrecisionContext};
use crate::error::{Result, RtmError};
use crate::map::PhasePoint;

/// Highest order the automatic search will try.
pub const MAX_ORDER: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Unstable,
    Stable,
}

impl Branch {
    fn direction(self) -> Direction {
        match self {
            Branch::Unstable => Direction::Forward,
            Branch::Stable => Direction::Backward,
        }
    }
}

/// Where the invariant curve is attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesBase {
    /// The hyperbolic fixed point `p_h`.
    Ph,
    /// A point of a hyperbolic periodic orbit, refined by Newton's method.
    Periodic { point: PhasePoint, period: usize },
}

#[derive(Debug, Clone)]
pub struct ManifoldSeries {
    pub base_point: PhasePoint,
    pub multiplier: Float,
    /// `(psi_k, w_k)` for `k = 0..=N`; entry 0 is the base point on the lift.
    pub coeffs: Vec<(Float, Float)>,
    pub branch: Branch,
    pub period: usize,
    /// Residual of the conjugacy on `|t| <= 1`.
    pub residual: f64,
    /// Length of the first coefficient; `t = 1` lies at about this distance from the base.
    pub scale: f64,
    // false when the order limited the scale below its cap
    full_scale: bool,
    // f^period(base) = base + (2π shift, 0) on the lift
    shift: i64,
    map: HpMap,
}

fn set(v: &mut Vec<Float>, k: usize, x: Float) {
    if v.len() == k {
        v.push(x);
    } else {
        v[k] = x;
    }
}

/// One application of the map to a truncated series, coefficient by coefficient.
#[derive(Default)]
struct Stage {
    arg: Vec<Float>,
    s: Vec<Float>,
    c: Vec<Float>,
    psi: Vec<Float>,
    w: Vec<Float>,
}

impl Stage {
    fn coeff(&mut self, k: usize, ip: &Float, iw: &Float, map: &HpMap, dir: Direction) {
        let prec = map.prec();
        let arg = match dir {
            Direction::Forward => Float::with_val(prec, ip + iw),
            Direction::Backward => ip.clone(),
        };
        set(&mut self.arg, k, arg);
        let (s, c) = if k == 0 {
            let a = &self.arg[0];
            (Float::with_val(prec, a.sin_ref()), Float::with_val(prec, a.cos_ref()) - 1u32)
        } else {
            // (sin A)' = A' cos A, (cos A)' = −A' sin A
            let mut s = Float::new(prec);
            let mut c = Float::new(prec);
            let mut ja = Float::new(prec);
            for j in 1..=k {
                ja.assign_mul(&self.arg[j], j as u32);
                let cj = if k == j { Float::with_val(prec, &self.c[0] + 1u32) } else { self.c[k - j].clone() };
                s += Float::with_val(prec, &ja * &cj);
                c -= Float::with_val(prec, &ja * &self.s[k - j]);
            }
            (s / k as u32, c / k as u32)
        };
        // c holds cos − 1 at order 0 so that eta_k = 2π c_k − mu s_k at every order
        let eta = Float::with_val(prec, &c * &map.two_pi) - Float::with_val(prec, &s * &map.mu);
        set(&mut self.s, k, s);
        set(&mut self.c, k, c);
        match dir {
            Direction::Forward => {
                let psi = self.arg[k].clone();
                set(&mut self.psi, k, psi);
                set(&mut self.w, k, eta + iw);
            }
            Direction::Backward => {
                let w = Float::with_val(prec, iw - &eta);
                set(&mut self.psi, k, Float::with_val(prec, &self.arg[k] - &w));
                set(&mut self.w, k, w);
            }
        }
    }

    fn jacobian(&self, map: &HpMap, dir: Direction) -> [[Float; 2]; 2] {
        let prec = map.prec();
        let e = map.eta_prime(&self.arg[0]);
        let one = Float::with_val(prec, 1u32);
        match dir {
            Direction::Forward => [[one.clone(), one.clone()], [e.clone(), e + 1u32]],
            Direction::Backward => [[Float::with_val(prec, &e + 1u32), -one.clone()], [-e, one]],
        }
    }
}

trait AssignMul {
    fn assign_mul(&mut self, a: &Float, j: u32);
}

impl AssignMul for Float {
    fn assign_mul(&mut self, a: &Float, j: u32) {
        use rug::Assign;
        self.assign(a * j);
    }
}

fn mat_mul(a: &[[Float; 2]; 2], b: &[[Float; 2]; 2], prec: u32) -> [[Float; 2]; 2] {
    let e = |i: usize, j: usize| {
        Float::with_val(prec, &a[i][0] * &b[0][j]) + Float::with_val(prec, &a[i][1] * &b[1][j])
    };
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

/// Newton refinement of a periodic point of `f^period` (on the lift, with the
/// phase shift detected from the first image).
pub fn refine_periodic(map: &HpMap, guess: PhasePoint, period: usize) -> Result<(HpPoint, i64)> {
    let prec = map.prec();
    let tau = Float::with_val(prec, &map.two_pi);
    let mut p = HpPoint { psi: Float::with_val(prec, guess.psi), w: Float::with_val(prec, guess.w) };
    let orbit = |p: &HpPoint| {
        let mut q = p.clone();
        let mut m = [[Float::with_val(prec, 1u32), Float::new(prec)], [Float::new(prec), Float::with_val(prec, 1u32)]];
        for _ in 0..period {
            let e = map.eta_prime(&Float::with_val(prec, &q.psi + &q.w));
            let j = [[Float::with_val(prec, 1u32), Float::with_val(prec, 1u32)], [e.clone(), e + 1u32]];
            m = mat_mul(&j, &m, prec);
            q = map.forward(&q);
        }
        (q, m)
    };
    let (q0, _) = orbit(&p);
    let shift = (Float::with_val(prec, &q0.psi - &p.psi) / &tau).to_f64().round() as i64;
    let tol = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 8));
    for _ in 0..200 {
        let (q, m) = orbit(&p);
        let fx = Float::with_val(prec, &q.psi - &p.psi) - Float::with_val(prec, &tau * shift);
        let fy = Float::with_val(prec, &q.w - &p.w);
        let a = Float::with_val(prec, &m[0][0] - 1u32);
        let d = Float::with_val(prec, &m[1][1] - 1u32);
        let det = Float::with_val(prec, &a * &d) - Float::with_val(prec, &m[0][1] * &m[1][0]);
        if det.is_zero() {
            return Err(RtmError::NotHyperbolic { trace_abs: 2.0 });
        }
        let dx = (Float::with_val(prec, &d * &fx) - Float::with_val(prec, &m[0][1] * &fy)) / &det;
        let dy = (Float::with_val(prec, &a * &fy) - Float::with_val(prec, &m[1][0] * &fx)) / &det;
        p.psi -= &dx;
        p.w -= &dy;
        let step = Float::with_val(prec, dx.abs_ref()).max(&Float::with_val(prec, dy.abs_ref()));
        if !step.is_finite() || step.to_f64() > 1.0 {
            return Err(RtmError::NotFound(format!("Newton diverged refining the period-{period} point")));
        }
        if step <= tol {
            return Ok((p, shift));
        }
    }
    Err(RtmError::NotFound(format!("Newton did not converge for the period-{period} point")))
}

struct Solved {
    lambda: Float,
    coeffs: Vec<(Float, Float)>,
}

/// Coefficients with the first one the unit eigenvector (`sigma = 1`).
fn solve(map: &HpMap, base: &HpPoint, period: usize, dir: Direction, order: usize) -> Result<Solved> {
    let prec = map.prec();
    let mut stages: Vec<Stage> = (0..period).map(|_| Stage::default()).collect();
    let mut zp: Vec<Float> = vec![base.psi.clone()];
    let mut zw: Vec<Float> = vec![base.w.clone()];

    let push = |stages: &mut Vec<Stage>, k: usize, zp: &Float, zw: &Float| {
        let (mut ip, mut iw) = (zp.clone(), zw.clone());
        for st in stages.iter_mut() {
            st.coeff(k, &ip, &iw, map, dir);
            ip = st.psi[k].clone();
            iw = st.w[k].clone();
        }
    };
    push(&mut stages, 0, &zp[0], &zw[0]);

    let mut m = stages[0].jacobian(map, dir);
    for st in &stages[1..] {
        m = mat_mul(&st.jacobian(map, dir), &m, prec);
    }
    let tr = Float::with_val(prec, &m[0][0] + &m[1][1]);
    let disc = Float::with_val(prec, tr.square_ref()) - 4u32;
    if disc <= 0 {
        return Err(RtmError::NotHyperbolic { trace_abs: tr.to_f64().abs() });
    }
    let root = disc.sqrt();
    let lambda = if tr > 0 { (Float::with_val(prec, &tr + &root)) / 2u32 } else { (Float::with_val(prec, &tr - &root)) / 2u32 };
    let v1 = (m[0][1].clone(), Float::with_val(prec, &lambda - &m[0][0]));
    let v2 = (Float::with_val(prec, &lambda - &m[1][1]), m[1][0].clone());
    let norm = |v: &(Float, Float)| Float::with_val(prec, v.0.square_ref()) + Float::with_val(prec, v.1.square_ref());
    let (mut vx, mut vy) = if norm(&v1) >= norm(&v2) { v1 } else { v2 };
    let n = Float::with_val(prec, norm(&(vx.clone(), vy.clone())).sqrt_ref());
    vx /= &n;
    vy /= &n;
    if vx < 0 || (vx.is_zero() && vy < 0) {
        vx = -vx;
        vy = -vy;
    }

    if order >= 1 {
        zp.push(vx);
        zw.push(vy);
        push(&mut stages, 1, &zp[1], &zw[1]);
    }
    let mut lk = Float::with_val(prec, &lambda);
    let zero = Float::new(prec);
    for k in 2..=order {
        lk *= &lambda;
        push(&mut stages, k, &zero, &zero);
        let last = stages.last().unwrap();
        let (nx, ny) = (&last.psi[k], &last.w[k]);
        // (lambda^k − M) z_k = N_k
        let a = Float::with_val(prec, &lk - &m[0][0]);
        let d = Float::with_val(prec, &lk - &m[1][1]);
        let det = Float::with_val(prec, &a * &d) - Float::with_val(prec, &m[0][1] * &m[1][0]);
        let x = (Float::with_val(prec, &d * nx) + Float::with_val(prec, &m[0][1] * ny)) / &det;
        let y = (Float::with_val(prec, &a * ny) + Float::with_val(prec, &m[1][0] * nx)) / &det;
        zp.push(x);
        zw.push(y);
        push(&mut stages, k, &zp[k], &zw[k]);
    }
    Ok(Solved { lambda, coeffs: zp.into_iter().zip(zw).collect() })
}

impl ManifoldSeries {
    /// Series of fixed order. The scale of `t` is chosen so that the
    /// truncation error at `|t| = |lambda|` is below the residual target.
    pub fn with_order(base: SeriesBase, branch: Branch, order: usize, ctx: &PrecisionContext, map: &HpMap) -> Result<Self> {
        if map.prec() != ctx.bits() {
            return Err(RtmError::Invalid("map and precision context disagree".into()));
        }
        if order == 0 || order > 4 * MAX_ORDER {
            return Err(RtmError::Invalid(format!("series order must lie in [1, {}]", 4 * MAX_ORDER)));
        }
        let (hp_base, period, shift) = match base {
            SeriesBase::Ph => (map.p_h(), 1usize, 0i64),
            SeriesBase::Periodic { point, period } => {
                if period == 0 {
                    return Err(RtmError::Invalid("period must be positive".into()));
                }
                let (p, s) = refine_periodic(map, point, period)?;
                (p, period, s)
            }
        };
        let prec = ctx.bits();
        let solved = solve(map, &hp_base, period, branch.direction(), order)?;
        let lam_abs = solved.lambda.to_f64().abs();

        // keep the fundamental domain well inside the region around the base
        let (bx, by) = hp_base.to_f64();
        let sigma_cap = 0.1 * (bx * bx + by * by).sqrt().max(1e-2);
        let goal = (ctx.residual_target() * 1e-6).ln();
        let mut ln_sigma = sigma_cap.ln();
        let mut full_scale = true;
        for k in order.saturating_sub(7).max(2)..=order {
            let (x, y) = &solved.coeffs[k];
            let mag = Float::with_val(prec, x.abs_ref()).max(&Float::with_val(prec, y.abs_ref()));
            if mag.is_zero() {
                continue;
            }
            let ln_mag = mag.ln().to_f64();
            let cand = (goal - ln_mag) / k as f64 - lam_abs.ln();
            if cand < ln_sigma {
                ln_sigma = cand;
                full_scale = false;
            }
        }
        let sigma = Float::with_val(prec, ln_sigma).exp();
        let mut sk = Float::with_val(prec, 1u32);
        let coeffs = solved
            .coeffs
            .into_iter()
            .enumerate()
            .map(|(k, (x, y))| {
                if k > 0 {
                    sk *= &sigma;
                }
                (x * &sk, y * &sk)
            })
            .collect();
        let mut s = Self {
            base_point: PhasePoint { psi: bx, w: by },
            multiplier: solved.lambda,
            coeffs,
            branch,
            period,
            residual: f64::NAN,
            scale: ln_sigma.exp(),
            full_scale,
            shift,
            map: map.clone(),
        };
        s.residual = s.conjugacy_residual();
        Ok(s)
    }

    /// Series whose order is raised (cap [`MAX_ORDER`]) until the truncation
    /// no longer limits the fundamental domain; the conjugacy residual must
    /// meet the target of the precision context.
    pub fn new(base: SeriesBase, branch: Branch, order: usize, ctx: &PrecisionContext, map: &HpMap) -> Result<Self> {
        let target = ctx.residual_target();
        let mut n = order.clamp(1, MAX_ORDER);
        loop {
            let s = Self::with_order(base, branch, n, ctx, map)?;
            if s.full_scale || n == MAX_ORDER {
                if s.residual < target {
                    return Ok(s);
                }
                return Err(RtmError::Tolerance { order: n, achieved: s.residual, target });
            }
            n = (n + n / 2).clamp(n + 1, MAX_ORDER);
        }
    }

    /// Multiple of `2π` by which `f^period` shifts the base point on the lift.
    pub fn lift_shift(&self) -> i64 {
        self.shift
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn prec(&self) -> u32 {
        self.map.prec()
    }

    pub fn map(&self) -> &HpMap {
        &self.map
    }

    pub fn direction(&self) -> Direction {
        self.branch.direction()
    }

    /// Horner evaluation of the truncated series.
    pub fn eval(&self, t: &Float) -> HpPoint {
        let prec = self.prec();
        let mut x = Float::new(prec);
        let mut y = Float::new(prec);
        for (cx, cy) in self.coeffs.iter().rev() {
            x *= t;
            x += cx;
            y *= t;
            y += cy;
        }
        HpPoint { psi: x, w: y }
    }

    /// One application of `f^{±period}` on the lift, phase shift removed.
    pub fn image(&self, p: &HpPoint) -> HpPoint {
        let mut q = p.clone();
        for _ in 0..self.period {
            q = self.map.step(&q, self.direction());
        }
        if self.shift != 0 {
            let s = Float::with_val(self.prec(), &self.map.two_pi * self.shift);
            match self.direction() {
                Direction::Forward => q.psi -= s,
                Direction::Backward => q.psi += s,
            }
        }
        q
    }

    /// Number of images needed to reach parameter `t` from the fundamental domain.
    pub fn domains_for(&self, t: f64) -> usize {
        let lam = self.multiplier.to_f64().abs();
        if t.abs() <= 1.0 {
            0
        } else {
            (t.abs().ln() / lam.ln()).ceil().max(0.0) as usize
        }
    }

    /// The globalized curve point `z(t) = F^m(z(t / lambda^m))`.
    pub fn point_at(&self, t: &Float) -> HpPoint {
        let m = self.domains_for(t.to_f64());
        let prec = self.prec();
        let mut u = Float::with_val(prec, t);
        for _ in 0..m {
            u /= &self.multiplier;
        }
        let mut p = self.eval(&u);
        for _ in 0..m {
            p = self.image(&p);
        }
        p
    }

    /// `sup |F(z(t)) − z(lambda t)|` over sample points of `|t| <= 1`.
    pub fn conjugacy_residual(&self) -> f64 {
        let prec = self.prec();
        let lam_inv = 1.0 / self.multiplier.to_f64().abs();
        let ts = [1.0, -1.0, 0.75, -0.75, 0.5, -0.5, lam_inv, -lam_inv, 0.25, 0.1];
        let mut worst = 0f64;
        for &t in &ts {
            let t = Float::with_val(prec, t);
            let lhs = self.image(&self.eval(&t));
            let rhs = self.eval(&Float::with_val(prec, &t * &self.multiplier));
            let dx = Float::with_val(prec, &lhs.psi - &rhs.psi).abs().to_f64();
            let dy = Float::with_val(prec, &lhs.w - &rhs.w).abs().to_f64();
            worst = worst.max(dx).max(dy);
        }
        worst
    }

    /// The `r0` image `(psi + w, −w)` of every coefficient. For a base on
    /// `Fix(r0)` this turns the unstable series into a stable one (and back).
    pub fn r0_image(&self) -> Self {
        let prec = self.prec();
        let coeffs = self
            .coeffs
            .iter()
            .map(|(x, y)| (Float::with_val(prec, x + y), Float::with_val(prec, -y)))
            .collect();
        let branch = match self.branch {
            Branch::Unstable => Branch::Stable,
            Branch::Stable => Branch::Unstable,
        };
        let bp = PhasePoint { psi: self.base_point.psi + self.base_point.w, w: -self.base_point.w };
        let mut s = Self { coeffs, branch, base_point: bp, residual: f64::NAN, ..self.clone() };
        s.residual = s.conjugacy_residual();
        s
    }

    /// Coefficients rounded to double precision.
    pub fn coeffs_f64(&self) -> Vec<(f64, f64)> {
        self.coeffs.iter().map(|(x, y)| (x.to_f64(), y.to_f64())).collect()
    }
}

/// Unstable curve of `base` with the order raised as needed.
pub fn unstable_series(base: SeriesBase, order: usize, ctx: &PrecisionContext, map: &HpMap) -> Result<ManifoldSeries> {
    ManifoldSeries::new(base, Branch::Unstable, order, ctx, map)
}

/// Stable curve of `base`, i.e. the unstable curve of the inverse map.
pub fn stable_series(base: SeriesBase, order: usize, ctx: &PrecisionContext, map: &HpMap) -> Result<ManifoldSeries> {
    ManifoldSeries::new(base, Branch::Stable, order, ctx, map)
}

/// Default starting order for a given precision.
pub fn default_order(ctx: &PrecisionContext) -> usize {
    (ctx.bits() as usize / 3).clamp(40, MAX_ORDER)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{jacobian, RtmParams};

    #[test]
    fn first_order_is_the_unstable_eigenvector() {
        let ctx = PrecisionContext::new(128).unwrap();
        let map = HpMap::from_f64(1.0, &ctx).unwrap();
        let s = ManifoldSeries::with_order(SeriesBase::Ph, Branch::Unstable, 1, &ctx, &map).unwrap();
        assert_eq!(s.order(), 1);
        let params = RtmParams::from_mu(1.0).unwrap();
        let m = jacobian(params.p_h(), &params);
        let lam = s.multiplier.to_f64();
        // independent eigen-solve in double precision
        let tr = m[0][0] + m[1][1];
        let l = 0.5 * (tr + (tr * tr - 4.0).sqrt());
        assert!((lam - l).abs() < 1e-14);
        let (x, y) = (s.coeffs[1].0.to_f64(), s.coeffs[1].1.to_f64());
        let (ex, ey) = (1.0, l - 1.0);
        assert!((x * ey - y * ex).abs() < 1e-12 * (x * x + y * y).sqrt());
        assert!(x > 0.0);
        // at order one the conjugacy only holds to second order in t
        assert!(s.residual > ctx.residual_target());
    }

    #[test]
    fn residual_meets_target() {
        for &(mu, bits) in &[(0.859, 256u32), (2.0, 128), (0.2, 512)] {
            let ctx = PrecisionContext::new(bits).unwrap();
            let map = HpMap::from_f64(mu, &ctx).unwrap();
            let s = unstable_series(SeriesBase::Ph, default_order(&ctx), &ctx, &map).unwrap();
            assert!(s.residual < ctx.residual_target(), "mu {mu}: {}", s.residual);
            assert!(s.multiplier.to_f64() > 1.0);
        }
    }

    #[test]
    fn low_order_shrinks_the_fundamental_domain() {
        let ctx = PrecisionContext::new(256).unwrap();
        let map = HpMap::from_f64(0.859, &ctx).unwrap();
        let low = ManifoldSeries::with_order(SeriesBase::Ph, Branch::Unstable, 3, &ctx, &map).unwrap();
        assert!(low.residual < ctx.residual_target());
        let auto = unstable_series(SeriesBase::Ph, 3, &ctx, &map).unwrap();
        assert!(auto.order() > 3);
        assert!(auto.scale > 1e6 * low.scale, "{} {}", auto.scale, low.scale);
        assert!(auto.residual < ctx.residual_target());
    }

    #[test]
    fn r0_image_is_stable_series() {
        let ctx = PrecisionContext::new(256).unwrap();
        let map = HpMap::from_f64(0.859, &ctx).unwrap();
        let u = unstable_series(SeriesBase::Ph, default_order(&ctx), &ctx, &map).unwrap();
        let s = u.r0_image();
        assert_eq!(s.branch, Branch::Stable);
        assert!(s.residual < ctx.residual_target(), "{}", s.residual);
        // directly solved stable series spans the same curve
        let d = stable_series(SeriesBase::Ph, default_order(&ctx), &ctx, &map).unwrap();
        assert!(d.residual < ctx.residual_target());
        let prec = ctx.bits();
        let kappa = Float::with_val(prec, &s.coeffs[1].0 / &d.coeffs[1].0);
        for &t in &[0.3, 0.9, 2.5] {
            let a = s.point_at(&Float::with_val(prec, t));
            let b = d.point_at(&Float::with_val(prec, &kappa * t));
            let dx = Float::with_val(prec, &a.psi - &b.psi).abs().to_f64();
            let dy = Float::with_val(prec, &a.w - &b.w).abs().to_f64();
            assert!(dx.max(dy) < 1e-50, "t {t}: {dx} {dy}");
        }
    }

    #[test]
    fn non_hyperbolic_base_is_rejected() {
        let ctx = PrecisionContext::new(128).unwrap();
        let map = HpMap::from_f64(1.0, &ctx).unwrap();
        // p_s is elliptic at mu = 1
        let e = ManifoldSeries::new(
            SeriesBase::Periodic { point: PhasePoint::new(0.0, 0.0), period: 1 },
            Branch::Unstable,
            20,
            &ctx,
            &map,
        );
        assert!(matches!(e, Err(RtmError::NotHyperbolic { .. })));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]
        #[test]
        fn every_series_meets_its_residual(mu in 0.1f64..3.9, stable in proptest::bool::ANY) {
            let ctx = PrecisionContext::new(128).unwrap();
            let map = HpMap::from_f64(mu, &ctx).unwrap();
            let branch = if stable { Branch::Stable } else { Branch::Unstable };
            let s = ManifoldSeries::new(SeriesBase::Ph, branch, default_order(&ctx), &ctx, &map).unwrap();
            proptest::prop_assert!(s.residual < ctx.residual_target());
            let lam = s.multiplier.to_f64();
            let h = (1.0 + mu / 2.0).acosh();
            proptest::prop_assert!((lam - h.exp()).abs() < 1e-12 * lam);
        }
    }
}
