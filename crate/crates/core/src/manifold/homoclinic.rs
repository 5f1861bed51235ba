//! Primary homoclinic points of `p_h` on the symmetry lines, the lobe area
//! they delimit and the fit of its exponentially small asymptotics.

use std::f64::consts::PI;

use rayon::prelude::*;
use rug::Float;

use super::curve::CurveF64;
use super::hp::{HpMap, HpPoint, PrecisionContext};
use super::series::{default_order, unstable_series, Branch, ManifoldSeries, SeriesBase};
use crate::error::{Result, RtmError};

/// Leading coefficient of `|L| ~ a0 e^{−2π²/h}`, used only to predict the
/// precision a computation needs.
const A0_ESTIMATE: f64 = 1.42e5;

/// Samples per fundamental domain when bracketing a crossing.
const SCAN_PER_DOMAIN: usize = 32;
const SCAN_DOMAINS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryLine {
    /// `w = 0`
    FixR0,
    /// `w = eta(psi)/2`
    FixR1,
}

impl SymmetryLine {
    /// Signed distance-like function vanishing on the line.
    pub fn defect(self, map: &HpMap, p: &HpPoint) -> Float {
        match self {
            SymmetryLine::FixR0 => p.w.clone(),
            SymmetryLine::FixR1 => Float::with_val(map.prec(), &p.w - map.eta(&p.psi) / 2u32),
        }
    }

    pub fn defect_f64(self, mu: f64, psi: f64, w: f64) -> f64 {
        match self {
            SymmetryLine::FixR0 => w,
            SymmetryLine::FixR1 => w - 0.5 * (std::f64::consts::TAU * (psi.cos() - 1.0) - mu * psi.sin()),
        }
    }
}

impl std::str::FromStr for SymmetryLine {
    type Err = RtmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "r0" | "fix_r0" | "fixr0" => Ok(SymmetryLine::FixR0),
            "r1" | "fix_r1" | "fixr1" => Ok(SymmetryLine::FixR1),
            _ => Err(RtmError::Invalid(format!("unknown symmetry line {s:?} (r0 or r1)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Homoclinic {
    pub line: SymmetryLine,
    pub t_star: Float,
    pub point: HpPoint,
}

/// Smallest `t > 0` at which the globalized unstable curve meets `line`.
///
/// The arc is scanned on a geometric grid from the inner end of the
/// fundamental domain; the first sign change is refined by regula falsi
/// (Illinois variant), which keeps the bracket at every step.
pub fn primary_homoclinic(series: &ManifoldSeries, line: SymmetryLine) -> Result<Homoclinic> {
    if series.branch != Branch::Unstable || series.period != 1 {
        return Err(RtmError::Invalid("primary_homoclinic needs the unstable series of p_h".into()));
    }
    let map = series.map();
    let prec = series.prec();
    let lam = series.multiplier.to_f64();
    let g = |t: &Float| line.defect(map, &series.point_at(t));

    let ratio = Float::with_val(prec, series.multiplier.ln_ref()) / SCAN_PER_DOMAIN as u32;
    let ratio = ratio.exp();
    let mut a = Float::with_val(prec, 1.0 / lam);
    let mut ga = g(&a);
    let mut bracket = None;
    for _ in 0..SCAN_PER_DOMAIN * SCAN_DOMAINS {
        let b = Float::with_val(prec, &a * &ratio);
        let gb = g(&b);
        if !gb.is_finite() || gb.to_f64().abs() > 1e3 {
            break;
        }
        if ga.is_zero() || (ga.is_sign_negative() != gb.is_sign_negative()) {
            bracket = Some((a.clone(), ga.clone(), b, gb));
            break;
        }
        a = b;
        ga = gb;
    }
    let (mut a, mut ga, mut b, mut gb) =
        bracket.ok_or_else(|| RtmError::NotFound(format!("no crossing of {line:?} along the unstable curve")))?;
    if ga.is_zero() {
        let point = series.point_at(&a);
        return Ok(Homoclinic { line, t_star: a, point });
    }
    let tol = Float::with_val(prec, Float::i_exp(1, 6 - prec as i32));
    for _ in 0..4 * prec {
        let slope = Float::with_val(prec, &gb - &ga);
        let c = Float::with_val(prec, &b - Float::with_val(prec, &gb * Float::with_val(prec, &b - &a)) / &slope);
        let gc = g(&c);
        if gc.is_zero() {
            a = c.clone();
            b = c;
            break;
        }
        if gc.is_sign_negative() != gb.is_sign_negative() {
            a = b;
            ga = gb;
        } else {
            ga /= 2u32;
        }
        b = c;
        gb = gc;
        let width = Float::with_val(prec, &b - &a).abs();
        if width <= Float::with_val(prec, &tol * &b) {
            break;
        }
    }
    let t_star = if gb.is_zero() { b } else { Float::with_val(prec, &a + &b) / 2u32 };
    let point = series.point_at(&t_star);
    Ok(Homoclinic { line, t_star, point })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LobeMethod {
    ActionSum,
    LoopQuadrature,
}

#[derive(Debug, Clone)]
pub struct LobeResult {
    pub mu: f64,
    pub h: f64,
    pub area: Float,
    pub method: LobeMethod,
    /// Estimated number of correct significant digits.
    pub digits: f64,
}

/// Everything computed for one parameter value.
#[derive(Debug, Clone)]
pub struct Lobe {
    pub series: ManifoldSeries,
    pub r0: Homoclinic,
    pub r1: Homoclinic,
    pub action: LobeResult,
}

fn predicted_area(h: f64) -> f64 {
    A0_ESTIMATE * (-2.0 * PI * PI / h).exp()
}

fn precision_error(estimate: f64, scale: f64, bits: u32) -> RtmError {
    // 64 guard bits beyond the cancellation, rounded up to a multiple of 64
    let need = (scale / estimate).log2().max(0.0) + 64.0;
    let rec = ((need / 64.0).ceil() as u32 * 64).max(bits + 64);
    RtmError::Precision { estimate, recommended_bits: rec }
}

/// `sum_k L(psi_k, psi_{k+1})` over the homoclinic orbit through `hom`, and
/// the sum of the term magnitudes. The backward half comes from the series;
/// the forward half is its mirror under the reversor whose line carries the point.
fn orbit_action(series: &ManifoldSeries, hom: &Homoclinic) -> (Float, Float) {
    let map = series.map();
    let prec = series.prec();
    let digits = prec as f64 * std::f64::consts::LOG10_2;
    let eps = Float::with_val(prec, 10f64.powf(-(digits + 10.0)).max(f64::MIN_POSITIVE));

    // psi_{-n}, n = 0, 1, ... from z(t* lambda^{-n}); forward values by symmetry
    let mut back: Vec<HpPoint> = Vec::new();
    let mut t = hom.t_star.clone();
    let k_max = 20_000usize;
    let mut total = Float::new(prec);
    let mut abs_total = Float::new(prec);
    let fwd_psi = |p: &HpPoint| match hom.line {
        SymmetryLine::FixR0 => Float::with_val(prec, &p.psi + &p.w),
        SymmetryLine::FixR1 => p.psi.clone(),
    };
    let psi_at = |back: &Vec<HpPoint>, k: i64| -> Float {
        if k <= 0 {
            back[(-k) as usize].psi.clone()
        } else {
            fwd_psi(&back[k as usize])
        }
    };
    back.push(series.point_at(&t));
    let mut small_run = 0;
    let mut n = 0usize;
    while n < k_max {
        while back.len() < n + 2 {
            t /= &series.multiplier;
            back.push(series.point_at(&t));
        }
        let n_i = n as i64;
        // terms (−n−1 → −n) and, for n ≥ 0, (n → n+1); k = 0 → 1 included once
        let mut terms = vec![map.action(&psi_at(&back, -n_i - 1), &psi_at(&back, -n_i))];
        terms.push(map.action(&psi_at(&back, n_i), &psi_at(&back, n_i + 1)));
        let mut largest = Float::new(prec);
        for term in &terms {
            let a = Float::with_val(prec, term.abs_ref());
            if a > largest {
                largest = a.clone();
            }
            abs_total += a;
            total += term;
        }
        if largest < eps {
            small_run += 1;
            if small_run >= 3 {
                break;
            }
        } else {
            small_run = 0;
        }
        n += 1;
    }
    (total, abs_total)
}

/// Lobe area from the difference of the actions of the two primary
/// homoclinic orbits (`V(psi_h) = 0`).
pub fn lobe_area_map(map: &HpMap, ctx: &PrecisionContext, order: usize) -> Result<Lobe> {
    let mu = map.mu_f64();
    if !(mu > 0.0 && mu < 4.0) {
        return Err(RtmError::Domain(format!("lobe area needs 0 < mu < 4, got {mu}")));
    }
    let h = map.h().to_f64();
    let bits = ctx.bits();
    let action_scale = mu.powf(2.5).max(1e-300);
    let floor_scale = 1e4 * action_scale;
    let est = predicted_area(h);
    if est < floor_scale * 2f64.powi(-(bits as i32)) * 1e3 {
        return Err(precision_error(est, floor_scale, bits));
    }
    let series = unstable_series(SeriesBase::Ph, order, ctx, map)?;
    let r0 = primary_homoclinic(&series, SymmetryLine::FixR0)?;
    let r1 = primary_homoclinic(&series, SymmetryLine::FixR1)?;
    let (sa, aa) = orbit_action(&series, &r0);
    let (sb, ab) = orbit_action(&series, &r1);
    let area = Float::with_val(ctx.bits(), &sa - &sb).abs();
    let floor = Float::with_val(ctx.bits(), &aa + &ab) * Float::with_val(ctx.bits(), Float::i_exp(1, 4 - bits as i32));
    if area <= Float::with_val(ctx.bits(), &floor * 1000u32) {
        return Err(precision_error(area.to_f64().max(est), floor.to_f64() * 2f64.powi(bits as i32), bits));
    }
    let digits = (Float::with_val(ctx.bits(), &area / &floor).log10().to_f64()).max(0.0);
    let action = LobeResult { mu, h, area, method: LobeMethod::ActionSum, digits };
    Ok(Lobe { series, r0, r1, action })
}

/// [`lobe_area_map`] for a double-precision `mu`.
pub fn lobe_area(mu: f64, ctx: &PrecisionContext, order: Option<usize>) -> Result<LobeResult> {
    let map = HpMap::from_f64(mu, ctx)?;
    Ok(lobe_area_map(&map, ctx, order.unwrap_or_else(|| default_order(ctx)))?.action)
}

/// `|∮ w dpsi|` around the lobe: the unstable arc from the `Fix(r0)` point to
/// the `Fix(r1)` point and the stable arc (the `r0` image of the unstable
/// curve) back. Shoelace sums on `n` and `2n` points per arc, Richardson
/// extrapolated.
pub fn lobe_quadrature(lobe: &Lobe, n: usize) -> Result<LobeResult> {
    let curve = CurveF64::new(&lobe.series);
    let lam = curve.lambda().abs();
    let t0 = lobe.r0.t_star.to_f64();
    let mut t1 = lobe.r1.t_star.to_f64();
    // the Fix(r1) orbit point following the Fix(r0) point along the curve
    while t1 < t0 {
        t1 *= lam;
    }
    while t1 > t0 * lam {
        t1 /= lam;
    }
    let s1 = t1 / lam;
    if !(s1 < t0) {
        return Err(RtmError::NotFound("primary homoclinic points are not adjacent".into()));
    }
    let shoelace = |n: usize| -> f64 {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(2 * n + 2);
        let (l0, l1) = (t0.ln(), t1.ln());
        for i in 0..=n {
            let t = (l0 + (l1 - l0) * i as f64 / n as f64).exp();
            pts.push(curve.point_at(t));
        }
        // stable arc z_s(s) = r0(z_u(s)) from s = t1/lambda up to s = t0
        let (m0, m1) = (s1.ln(), t0.ln());
        for i in 1..n {
            let s = (m0 + (m1 - m0) * i as f64 / n as f64).exp();
            let (x, y) = curve.point_at(s);
            pts.push((x + y, -y));
        }
        let mut sum = 0.0;
        for k in 0..pts.len() {
            let (x0, y0) = pts[k];
            let (x1, y1) = pts[(k + 1) % pts.len()];
            sum += 0.5 * (y0 + y1) * (x1 - x0);
        }
        sum
    };
    let coarse = shoelace(n);
    let fine = shoelace(2 * n);
    let area = ((4.0 * fine - coarse) / 3.0).abs();
    let err = (fine - coarse).abs() / 3.0 / 16.0;
    let digits = if err > 0.0 { (area / err).log10().clamp(0.0, 15.0) } else { 15.0 };
    let a = &lobe.action;
    Ok(LobeResult { mu: a.mu, h: a.h, area: Float::with_val(53, area), method: LobeMethod::LoopQuadrature, digits })
}

/// Least-squares fit of `|L|(h) e^{2π²/h}` in the basis `1, h², h⁴, h⁶`.
#[derive(Debug, Clone)]
pub struct SplitFit {
    pub a0: f64,
    pub a1: f64,
    /// All four fitted coefficients in working precision.
    pub coeffs: Vec<Float>,
    /// `(h, scaled lobe area)` per grid point.
    pub points: Vec<(f64, Float)>,
    /// Relative fit residuals per grid point.
    pub residuals: Vec<f64>,
}

pub const FIT_BASIS: usize = 4;

/// Fit of the scaled areas at the grid points (descending in `h`).
pub fn splitting_fit(h_grid: &[f64], ctx: &PrecisionContext, order: Option<usize>) -> Result<SplitFit> {
    if h_grid.len() < FIT_BASIS {
        return Err(RtmError::InsufficientData { needed: FIT_BASIS, got: h_grid.len() });
    }
    if h_grid.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(RtmError::Invalid("h grid must be strictly descending".into()));
    }
    let prec = ctx.bits();
    let scaled: Vec<Result<(f64, Float)>> = h_grid
        .par_iter()
        .map(|&h| {
            let map = HpMap::from_h(h, ctx)?;
            let lobe = lobe_area_map(&map, ctx, order.unwrap_or_else(|| default_order(ctx)))?;
            let hh = map.h();
            let two_pi2 = Float::with_val(prec, rug::float::Constant::Pi).square() * 2u32;
            let e = (two_pi2 / &hh).exp();
            Ok((h, lobe.action.area * e))
        })
        .collect();
    let points: Vec<(f64, Float)> = scaled.into_iter().collect::<Result<_>>()?;
    fit_scaled(ctx, points)
}

/// Least squares on already scaled areas.
pub fn fit_scaled(ctx: &PrecisionContext, points: Vec<(f64, Float)>) -> Result<SplitFit> {
    if points.len() < FIT_BASIS {
        return Err(RtmError::InsufficientData { needed: FIT_BASIS, got: points.len() });
    }
    let prec = ctx.bits();
    let row = |h: f64| -> Vec<Float> {
        let h2 = Float::with_val(prec, h).square();
        let mut r = vec![Float::with_val(prec, 1u32)];
        for k in 1..FIT_BASIS {
            let next = Float::with_val(prec, &r[k - 1] * &h2);
            r.push(next);
        }
        r
    };
    // normal equations in working precision; the data carry far more digits than f64
    let mut a = vec![vec![Float::new(prec); FIT_BASIS + 1]; FIT_BASIS];
    for (h, y) in &points {
        let r = row(*h);
        for i in 0..FIT_BASIS {
            for j in 0..FIT_BASIS {
                a[i][j] += Float::with_val(prec, &r[i] * &r[j]);
            }
            a[i][FIT_BASIS] += Float::with_val(prec, &r[i] * y);
        }
    }
    for col in 0..FIT_BASIS {
        let piv = (col..FIT_BASIS)
            .max_by(|&x, &y| a[x][col].clone().abs().partial_cmp(&a[y][col].clone().abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        if a[col][col].is_zero() {
            return Err(RtmError::Invalid("singular fit".into()));
        }
        for r in 0..FIT_BASIS {
            if r != col {
                let f = Float::with_val(prec, &a[r][col] / &a[col][col]);
                for c in col..=FIT_BASIS {
                    let d = Float::with_val(prec, &f * &a[col][c]);
                    a[r][c] -= d;
                }
            }
        }
    }
    let coeffs: Vec<Float> = (0..FIT_BASIS).map(|i| Float::with_val(prec, &a[i][FIT_BASIS] / &a[i][i])).collect();
    let residuals = points
        .iter()
        .map(|(h, y)| {
            let r = row(*h);
            let mut fit = Float::new(prec);
            for (ri, ci) in r.iter().zip(&coeffs) {
                fit += Float::with_val(prec, ri * ci);
            }
            (Float::with_val(prec, y - &fit) / y).to_f64()
        })
        .collect();
    Ok(SplitFit { a0: coeffs[0].to_f64(), a1: coeffs[1].to_f64(), coeffs, points, residuals })
}

/// `n` equispaced values from `hi` down to `lo`.
pub fn descending_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![hi];
    }
    (0..n).map(|i| hi + (lo - hi) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const PUBLISHED_0859: f64 = 3.808194826948494e-5;

    fn lobe(mu: f64, bits: u32) -> Lobe {
        let ctx = PrecisionContext::new(bits).unwrap();
        let map = HpMap::from_f64(mu, &ctx).unwrap();
        lobe_area_map(&map, &ctx, default_order(&ctx)).unwrap()
    }

    #[test]
    fn homoclinic_points_lie_on_their_lines() {
        let l = lobe(0.859, 256);
        let map = l.series.map();
        assert!(l.r0.point.w.to_f64().abs() < 1e-60);
        let d1 = SymmetryLine::FixR1.defect(map, &l.r1.point).to_f64().abs();
        assert!(d1 < 1e-60, "{d1}");
        // both on the outer side of p_s
        assert!(l.r0.point.psi.to_f64() > 0.0 && l.r1.point.psi.to_f64() > 0.0);
        // the Fix(r0) point is reached first and the pair lies within one fundamental domain
        let (t0, t1) = (l.r0.t_star.to_f64(), l.r1.t_star.to_f64());
        assert!(t0 < t1 && t1 < t0 * l.series.multiplier.to_f64());
        // consistency: globalizing from a different depth reproduces the point
        let prec = l.series.prec();
        let lam = &l.series.multiplier;
        let mut u = Float::with_val(prec, &l.r0.t_star / lam);
        u /= lam;
        let p = l.series.image(&l.series.image(&l.series.eval(&u)));
        let d = Float::with_val(prec, &p.psi - &l.r0.point.psi).abs().to_f64()
            + Float::with_val(prec, &p.w - &l.r0.point.w).abs().to_f64();
        assert!(d < 1e-20, "{d}");
    }

    #[test]
    fn lobe_at_0859_matches_published_value() {
        let l = lobe(0.859, 256);
        let a = l.action.area.to_f64();
        assert!(((a - PUBLISHED_0859) / PUBLISHED_0859).abs() < 5e-13, "{a:e}");
        assert!(l.action.digits > 30.0, "{}", l.action.digits);
    }

    #[test]
    fn doubling_precision_changes_little() {
        let a = lobe(0.859, 256).action.area;
        let b = lobe(0.859, 512).action.area;
        let rel = Float::with_val(512, &a - &b).abs() / &b;
        assert!(rel.to_f64() < 1e-20, "{}", rel.to_f64());
    }

    #[test]
    fn action_sum_equals_loop_quadrature() {
        for &mu in &[0.859, 0.5, 1.5] {
            let l = lobe(mu, 128);
            let q = lobe_quadrature(&l, 4000).unwrap();
            let (a, b) = (l.action.area.to_f64(), q.area.to_f64());
            assert!(((a - b) / a).abs() < 1e-6, "mu {mu}: {a:e} vs {b:e}");
        }
    }

    #[test]
    fn small_mu_lobe_and_precision_guard() {
        let ctx = PrecisionContext::new(256).unwrap();
        let r = lobe_area(0.2, &ctx, None).unwrap();
        let a = r.area.to_f64();
        // 6.7000e-15 is the leading term a0 e^{−2π²/h}; the full area carries the h⁴ correction
        let leading = 1.420985027091898e5 * (-2.0 * PI * PI / r.h).exp();
        assert!((leading / 6.7000e-15 - 1.0).abs() < 1e-4);
        assert!((a / 6.7000e-15 - 1.0).abs() < 5e-3, "{a:e}");
        assert!(a < leading);
        let low = PrecisionContext::new(64).unwrap();
        match lobe_area(0.02, &low, None) {
            Err(RtmError::Precision { recommended_bits, .. }) => assert!(recommended_bits > 64),
            other => panic!("expected a precision error, got {other:?}"),
        }
        assert!(lobe_area(4.5, &ctx, None).is_err());
    }

    #[test]
    fn fit_recovers_a0_and_vanishing_a1() {
        let ctx = PrecisionContext::new(256).unwrap();
        let grid = descending_grid(0.6, 0.3, 8);
        let fit = splitting_fit(&grid, &ctx, None).unwrap();
        assert!((fit.a0 / 1.420985027091898e5 - 1.0).abs() < 1e-5, "{}", fit.a0);
        assert!((fit.a1 / fit.a0).abs() < 1e-3, "{}", fit.a1);
        // Fontich–Simó: |L| e^{c/h} decreases with h for c = 0.9·2π²
        let c = 0.9 * 2.0 * PI * PI;
        let vals: Vec<f64> = fit
            .points
            .iter()
            .map(|(h, y)| y.to_f64() * (-2.0 * PI * PI / h).exp() * (c / h).exp())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        // jackknife: drop the largest h
        let rest = fit_scaled(&ctx, fit.points[1..].to_vec()).unwrap();
        assert!((rest.a0 / fit.a0 - 1.0).abs() < 1e-4);
        assert!(matches!(
            splitting_fit(&grid[..3], &ctx, None),
            Err(RtmError::InsufficientData { needed: 4, got: 3 })
        ));
    }
}
