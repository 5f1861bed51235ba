//! Globalized invariant curves as polylines, symmetric periodic orbits on
//! the symmetry lines and the transversal-crossing test between curves.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};

use super::curve::CurveF64;
use super::homoclinic::SymmetryLine;
use super::hp::{HpMap, PrecisionContext};
use super::series::{default_order, stable_series, unstable_series, ManifoldSeries, SeriesBase};
use crate::error::{Result, RtmError};
use crate::local::ResonanceId;
use crate::map::{eta, jacobian, map_forward_lifted, mat_mul, LiftedPoint, LinearType, Mat2, PhasePoint, RtmParams};

/// Largest distance between consecutive polyline points.
pub const POLYLINE_SPACING: f64 = 1e-3;
const MAX_POINTS: usize = 4_000_000;
const MAX_DEPTH: u32 = 40;

/// Which half of the curve: parameters `t > 0` or `t < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

/// The plotting window `[−π, π) × [−2, 2]`.
pub fn in_window(p: (f64, f64)) -> bool {
    p.0 >= -PI && p.0 < PI && p.1.abs() <= 2.0 && p.0.is_finite() && p.1.is_finite()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub points: Vec<(f64, f64)>,
    /// Curve parameter of every point.
    pub params: Vec<f64>,
    /// Index of the first point of each fundamental domain.
    pub domain_starts: Vec<usize>,
    /// Set when the curve left the window (or the point budget) and was cut.
    pub truncated: bool,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn mid_param(a: f64, b: f64) -> f64 {
    a.signum() * (a * b).abs().sqrt()
}

/// Insert points until consecutive ones are closer than the spacing.
fn refine(curve: &CurveF64, params: Vec<f64>, points: Vec<(f64, f64)>) -> (Vec<f64>, Vec<(f64, f64)>) {
    let mut out_t = Vec::with_capacity(params.len());
    let mut out_p = Vec::with_capacity(points.len());
    fn rec(
        curve: &CurveF64,
        (ta, pa): (f64, (f64, f64)),
        (tb, pb): (f64, (f64, f64)),
        depth: u32,
        out_t: &mut Vec<f64>,
        out_p: &mut Vec<(f64, f64)>,
    ) {
        if depth >= MAX_DEPTH || dist(pa, pb) < POLYLINE_SPACING || !in_window(pa) || !in_window(pb) {
            return;
        }
        let tm = mid_param(ta, tb);
        let pm = curve.point_at(tm);
        rec(curve, (ta, pa), (tm, pm), depth + 1, out_t, out_p);
        out_t.push(tm);
        out_p.push(pm);
        rec(curve, (tm, pm), (tb, pb), depth + 1, out_t, out_p);
    }
    for i in 0..params.len() {
        if i > 0 {
            rec(curve, (params[i - 1], points[i - 1]), (params[i], points[i]), 0, &mut out_t, &mut out_p);
        }
        out_t.push(params[i]);
        out_p.push(points[i]);
    }
    (out_t, out_p)
}

/// The fundamental segment `lambda^{-1} <= |t| <= 1` and its images under
/// `n_domains` applications of `f^{±period}`, resampled so that consecutive
/// points are less than [`POLYLINE_SPACING`] apart. Every vertex of one
/// domain is mapped exactly onto a vertex of the next.
pub fn globalize(series: &ManifoldSeries, n_domains: usize, side: Side) -> Polyline {
    let curve = CurveF64::new(series);
    globalize_curve(&curve, n_domains, side)
}

pub fn globalize_curve(curve: &CurveF64, n_domains: usize, side: Side) -> Polyline {
    let lam = curve.lambda();
    let sign = match side {
        Side::Positive => 1.0,
        Side::Negative => -1.0,
    };
    let n0 = 64;
    let lo = -lam.abs().ln();
    let mut params: Vec<f64> = (0..=n0).map(|i| sign * (lo * (1.0 - i as f64 / n0 as f64)).exp()).collect();
    let mut points: Vec<(f64, f64)> = params.iter().map(|&t| curve.eval(t)).collect();
    let mut out = Polyline { points: Vec::new(), params: Vec::new(), domain_starts: Vec::new(), truncated: false };
    for d in 0..=n_domains {
        if d > 0 {
            params = params.iter().map(|&t| t * lam).collect();
            points = points.iter().map(|&p| curve.image(p)).collect();
        }
        let (t, p) = refine(curve, params, points);
        params = t;
        points = p;
        out.domain_starts.push(out.points.len());
        // consecutive domains share an end point
        let skip = usize::from(d > 0);
        for (&t, &p) in params.iter().zip(&points).skip(skip) {
            if !in_window(p) || out.points.len() >= MAX_POINTS {
                out.truncated = true;
                return out;
            }
            out.points.push(p);
            out.params.push(t);
        }
    }
    out
}

/// A point of a symmetric periodic orbit found on a symmetry line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpoPoint {
    pub point: PhasePoint,
    pub resonance: ResonanceId,
    pub line: SymmetryLine,
    /// Trace of the Jacobian of `f^n` at the point.
    pub trace: f64,
    pub kind: LinearType,
}

fn line_point(line: SymmetryLine, psi: f64, params: &RtmParams) -> LiftedPoint {
    match line {
        SymmetryLine::FixR0 => LiftedPoint { psi_tilde: psi, w: 0.0 },
        SymmetryLine::FixR1 => LiftedPoint { psi_tilde: psi, w: 0.5 * eta(psi, params) },
    }
}

fn iterate(mut q: LiftedPoint, k: usize, params: &RtmParams) -> LiftedPoint {
    for _ in 0..k {
        q = map_forward_lifted(q, params);
    }
    q
}

/// Clockwise turns about `p_s` accumulated over the orbit segment.
fn winding_about_ps(p: LiftedPoint, n: usize, params: &RtmParams) -> f64 {
    let mut q = p;
    let mut total = 0.0;
    for _ in 0..n {
        let r = map_forward_lifted(q, params);
        let a = (crate::map::wrap_angle(q.psi_tilde), q.w);
        let b = (crate::map::wrap_angle(r.psi_tilde), r.w);
        let cross = a.0 * b.1 - a.1 * b.0;
        let dot = a.0 * b.0 + a.1 * b.1;
        if cross != 0.0 || dot != 0.0 {
            total += (-cross).atan2(dot);
        }
        q = r;
    }
    total / TAU
}

fn periodic_defect(p: LiftedPoint, n: usize, params: &RtmParams) -> f64 {
    let q = iterate(p, n, params);
    crate::map::wrap_angle(q.psi_tilde - p.psi_tilde).abs().max((q.w - p.w).abs())
}

/// All points of `(m, n)` symmetric periodic orbits on `line` with `psi` in
/// `[−π, π)`. The symmetry reduces `f^n(p) = p` to one scalar condition:
/// the orbit meets a symmetry line again after about half the period.
pub fn find_spos(res: ResonanceId, line: SymmetryLine, params: &RtmParams, samples: usize) -> Vec<SpoPoint> {
    let n = res.n() as usize;
    let (k, end) = if n % 2 == 1 {
        match line {
            SymmetryLine::FixR0 => ((n + 1) / 2, SymmetryLine::FixR1),
            SymmetryLine::FixR1 => ((n - 1) / 2, SymmetryLine::FixR0),
        }
    } else {
        (n / 2, line)
    };
    let mu = params.mu();
    let g = |psi: f64| {
        let q = iterate(line_point(line, psi, params), k, params);
        end.defect_f64(mu, q.psi_tilde, q.w)
    };
    let samples = samples.max(16);
    let psi_at = |i: usize| -PI + TAU * i as f64 / samples as f64;
    let mut found: Vec<SpoPoint> = Vec::new();
    let mut prev = (psi_at(0), g(psi_at(0)));
    for i in 1..=samples {
        let x = psi_at(i);
        let gx = g(x);
        let (a, ga) = prev;
        prev = (x, gx);
        if !ga.is_finite() || !gx.is_finite() {
            continue;
        }
        let root = if ga == 0.0 {
            a
        } else if ga.signum() == gx.signum() {
            continue;
        } else {
            let (mut lo, mut hi, mut glo) = (a, x, ga);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let gm = g(mid);
                if gm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if gm.signum() == glo.signum() {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        if root >= PI {
            continue;
        }
        let p = line_point(line, root, params);
        let scale = 1.0 + p.psi_tilde.abs() + p.w.abs();
        if periodic_defect(p, n, params) > 1e-8 * scale {
            continue;
        }
        // minimal period
        if (1..n).any(|d| n % d == 0 && periodic_defect(p, d, params) < 1e-8 * scale) {
            continue;
        }
        let turns = winding_about_ps(p, n, params);
        if (turns - res.m() as f64).abs() > 1e-6 {
            continue;
        }
        let pp = p.project();
        if found.iter().any(|s| s.point.dist_inf(&pp) < 1e-9) {
            continue;
        }
        let mut m: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
        let mut q = pp;
        for _ in 0..n {
            m = mat_mul(&jacobian(q, params), &m);
            q = crate::map::map_forward(q, params);
        }
        let trace = m[0][0] + m[1][1];
        found.push(SpoPoint { point: pp, resonance: res, line, trace, kind: LinearType::from_trace(trace) });
    }
    found
}

/// First point on `line` of an `(m, n)` SPO of the requested linear type.
pub fn find_spo(res: ResonanceId, line: SymmetryLine, params: &RtmParams, kind: Option<LinearType>) -> Result<SpoPoint> {
    find_spos(res, line, params, 8192)
        .into_iter()
        .find(|s| kind.map_or(true, |k| s.kind == k))
        .ok_or_else(|| RtmError::NotFound(format!("no {res} orbit of type {kind:?} on {line:?} at mu = {}", params.mu())))
}

/// All points of the orbit through an SPO point.
pub fn spo_orbit(spo: &SpoPoint, params: &RtmParams) -> Vec<PhasePoint> {
    let mut out = vec![spo.point];
    let mut q = spo.point;
    for _ in 1..spo.resonance.n() {
        q = crate::map::map_forward(q, params);
        out.push(q);
    }
    out
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Minimum crossing angle counted as transversal.
pub const MIN_CROSSING_ANGLE: f64 = 1e-8;

fn crosses(p1: (f64, f64), p2: (f64, f64), q1: (f64, f64), q2: (f64, f64)) -> bool {
    let o1 = orient(p1, p2, q1);
    let o2 = orient(p1, p2, q2);
    let o3 = orient(q1, q2, p1);
    let o4 = orient(q1, q2, p2);
    if !(o1 * o2 < 0.0 && o3 * o4 < 0.0) {
        return false;
    }
    let d1 = (p2.0 - p1.0, p2.1 - p1.1);
    let d2 = (q2.0 - q1.0, q2.1 - q1.1);
    let s = (d1.0 * d2.1 - d1.1 * d2.0).abs() / (d1.0.hypot(d1.1) * d2.0.hypot(d2.1));
    s > MIN_CROSSING_ANGLE.sin()
}

/// Whether two polylines cross with a nonzero angle. Segments of `b` are
/// bucketed on a uniform grid so the scan stays near linear.
pub fn obstruction_check(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    first_crossing(a, b).is_some()
}

/// Segment indices `(i, j)` of the first crossing found, scanning `a` in order.
pub fn first_crossing(a: &[(f64, f64)], b: &[(f64, f64)]) -> Option<(usize, usize)> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let seg_len = |p: &[(f64, f64)]| p.windows(2).map(|w| dist(w[0], w[1])).fold(0.0f64, f64::max);
    let cell = seg_len(a).max(seg_len(b)).max(1e-6);
    let key = |x: f64| (x / cell).floor() as i64;
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (j, w) in b.windows(2).enumerate() {
        let (x0, x1) = (key(w[0].0.min(w[1].0)), key(w[0].0.max(w[1].0)));
        let (y0, y1) = (key(w[0].1.min(w[1].1)), key(w[0].1.max(w[1].1)));
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                grid.entry((cx, cy)).or_default().push(j);
            }
        }
    }
    for (i, w) in a.windows(2).enumerate() {
        let (x0, x1) = (key(w[0].0.min(w[1].0)), key(w[0].0.max(w[1].0)));
        let (y0, y1) = (key(w[0].1.min(w[1].1)), key(w[0].1.max(w[1].1)));
        let mut best: Option<usize> = None;
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                if let Some(list) = grid.get(&(cx, cy)) {
                    for &j in list {
                        if crosses(w[0], w[1], b[j], b[j + 1]) && best.map_or(true, |bj| j < bj) {
                            best = Some(j);
                        }
                    }
                }
            }
        }
        if let Some(j) = best {
            return Some((i, j));
        }
    }
    None
}

/// Outcome of comparing the unstable curve of `p_h` with the stable curves
/// of a hyperbolic SPO.
#[derive(Debug, Clone)]
pub struct Obstruction {
    pub spo: SpoPoint,
    pub crossing: bool,
    /// `(orbit point index, side of W^u, side of W^s)` of the first crossing.
    pub witness: Option<(usize, Side, Side)>,
    pub unstable: Vec<Polyline>,
    pub stable: Vec<Polyline>,
}

/// Whether `W^u(p_h)` crosses `W^s` of the hyperbolic `(m, n)` SPO through
/// its point on `Fix(r0)` (or `Fix(r1)` when there is none).
pub fn escape_obstruction(
    mu: f64,
    res: ResonanceId,
    ctx: &PrecisionContext,
    unstable_domains: usize,
    stable_domains: usize,
) -> Result<Obstruction> {
    let params = RtmParams::from_mu(mu)?;
    let spo = find_spo(res, SymmetryLine::FixR0, &params, Some(LinearType::Hyperbolic))
        .or_else(|_| find_spo(res, SymmetryLine::FixR1, &params, Some(LinearType::Hyperbolic)))?;
    let map = HpMap::from_f64(mu, ctx)?;
    let order = default_order(ctx);
    let wu = unstable_series(SeriesBase::Ph, order, ctx, &map)?;
    let unstable: Vec<Polyline> =
        [Side::Positive, Side::Negative].iter().map(|&s| globalize(&wu, unstable_domains, s)).collect();
    let period = res.n() as usize;
    let mut stable = Vec::new();
    let mut witness = None;
    for (k, &q) in spo_orbit(&spo, &params).iter().enumerate() {
        let ws = stable_series(SeriesBase::Periodic { point: q, period }, order, ctx, &map)?;
        for &ss in &[Side::Positive, Side::Negative] {
            let poly = globalize(&ws, stable_domains, ss);
            if witness.is_none() {
                for (iu, u) in unstable.iter().enumerate() {
                    if obstruction_check(&u.points, &poly.points) {
                        let su = if iu == 0 { Side::Positive } else { Side::Negative };
                        witness = Some((k, su, ss));
                        break;
                    }
                }
            }
            stable.push(poly);
        }
    }
    Ok(Obstruction { spo, crossing: witness.is_some(), witness, unstable, stable })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{map_forward, reversor_r0};
    use rug::Float;

    fn res(m: u32, n: u32) -> ResonanceId {
        ResonanceId::new(m, n).unwrap()
    }

    #[test]
    fn third_order_spo_at_2_9() {
        let params = RtmParams::from_mu(2.9).unwrap();
        let h = find_spo(res(1, 3), SymmetryLine::FixR0, &params, Some(LinearType::Hyperbolic)).unwrap();
        assert!(h.trace > 2.0);
        assert_eq!(h.point.w, 0.0);
        let orbit = spo_orbit(&h, &params);
        assert_eq!(orbit.len(), 3);
        assert!(map_forward(orbit[2], &params).dist_inf(&h.point) < 1e-10);
        // odd period: the same orbit also has a point on Fix(r1)
        let h1 = find_spo(res(1, 3), SymmetryLine::FixR1, &params, Some(LinearType::Hyperbolic)).unwrap();
        assert!(orbit.iter().any(|q| q.dist_inf(&h1.point) < 1e-9));
        let e = find_spo(res(1, 3), SymmetryLine::FixR0, &params, Some(LinearType::Elliptic)).unwrap();
        assert!(e.trace.abs() < 2.0);
    }

    #[test]
    fn fourth_order_elliptic_spo_has_two_points_on_fix_r1() {
        let params = RtmParams::from_mu(2.037).unwrap();
        let pts: Vec<_> = find_spos(res(1, 4), SymmetryLine::FixR1, &params, 8192)
            .into_iter()
            .filter(|s| s.kind == LinearType::Elliptic)
            .collect();
        assert_eq!(pts.len(), 2, "{pts:?}");
        let orbit = spo_orbit(&pts[0], &params);
        assert!(orbit.iter().any(|q| q.dist_inf(&pts[1].point) < 1e-9));
    }

    #[test]
    fn fixed_points_as_one_periodic_orbits() {
        let params = RtmParams::from_mu(1.0).unwrap();
        let h = find_spo(res(0, 1), SymmetryLine::FixR0, &params, Some(LinearType::Hyperbolic)).unwrap();
        assert!(h.point.dist_inf(&params.p_h()) < 1e-12);
        let e = find_spo(res(0, 1), SymmetryLine::FixR0, &params, Some(LinearType::Elliptic)).unwrap();
        assert!(e.point.dist_inf(&params.p_s()) < 1e-12);
        assert!(find_spo(res(1, 5), SymmetryLine::FixR0, &RtmParams::from_mu(0.1).unwrap(), None).is_err());
    }

    fn ph_series(mu: f64, bits: u32) -> ManifoldSeries {
        let ctx = PrecisionContext::new(bits).unwrap();
        let map = HpMap::from_f64(mu, &ctx).unwrap();
        unstable_series(SeriesBase::Ph, default_order(&ctx), &ctx, &map).unwrap()
    }

    #[test]
    fn zero_domains_is_the_fundamental_segment() {
        let s = ph_series(1.0, 128);
        let curve = CurveF64::new(&s);
        let p = globalize(&s, 0, Side::Positive);
        assert_eq!(p.domain_starts, vec![0]);
        assert!(!p.truncated);
        let lam = s.multiplier.to_f64();
        assert!((p.params[0] - 1.0 / lam).abs() < 1e-15);
        assert_eq!(*p.params.last().unwrap(), 1.0);
        for (&t, &q) in p.params.iter().zip(&p.points) {
            assert_eq!(curve.eval(t), q);
        }
    }

    #[test]
    fn polyline_spacing_and_orbit_relation() {
        let s = ph_series(1.0, 128);
        let curve = CurveF64::new(&s);
        let p = globalize(&s, 5, Side::Positive);
        assert!(p.points.windows(2).all(|w| dist(w[0], w[1]) < POLYLINE_SPACING));
        let ds = &p.domain_starts;
        assert_eq!(ds.len(), 6);
        for d in 0..ds.len() - 2 {
            let this = &p.points[ds[d]..ds[d + 1]];
            let next = &p.points[ds[d + 1] - 1..ds[d + 2]];
            for &v in this {
                let fv = curve.image(v);
                let near = next.iter().map(|&q| dist(q, fv)).fold(f64::INFINITY, f64::min);
                assert!(near < 1e-6, "domain {d}: {near}");
            }
        }
    }

    #[test]
    fn r0_maps_unstable_onto_stable() {
        let ctx = PrecisionContext::new(256).unwrap();
        let map = HpMap::from_f64(0.859, &ctx).unwrap();
        let u = unstable_series(SeriesBase::Ph, default_order(&ctx), &ctx, &map).unwrap();
        let st = stable_series(SeriesBase::Ph, default_order(&ctx), &ctx, &map).unwrap();
        // parameter scale between r0(z_u) and z_s from the first coefficients
        let kappa = Float::with_val(256, &u.coeffs[1].0 + &u.coeffs[1].1) / &st.coeffs[1].0;
        let kappa = kappa.to_f64();
        let sc = CurveF64::new(&st);
        let poly = globalize(&u, 3, Side::Positive);
        let mut worst = 0f64;
        for (&t, &(x, y)) in poly.params.iter().zip(&poly.points) {
            let m = reversor_r0(PhasePoint { psi: x, w: y });
            let q = sc.point_at(kappa * t);
            worst = worst.max(dist((m.psi, m.w), q));
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn crossing_test_basics() {
        let a = vec![(0.0, 0.0), (1.0, 0.0)];
        let b = vec![(0.0, 1.0), (1.0, 1.0)];
        assert!(!obstruction_check(&a, &b));
        let s: Vec<(f64, f64)> = (0..200).map(|i| (i as f64 * 0.01, (i as f64 * 0.05).sin())).collect();
        assert!(!obstruction_check(&s, &s));
        assert!(obstruction_check(&[(0.0, -1.0), (0.0, 1.0)], &[(-1.0, 0.0), (1.0, 0.0)]));
        // touching at an end point or crossing at a vanishing angle is not transversal
        assert!(!obstruction_check(&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (2.0, 1.0)]));
        assert!(!obstruction_check(&[(0.0, 0.0), (1.0, 0.0)], &[(0.0, -1e-10), (1.0, 1e-10)]));
        assert!(!obstruction_check(&[(0.0, 0.0)], &s));
    }

    #[test]
    fn third_order_resonance_has_escaped_at_2_9() {
        let ctx = PrecisionContext::new(128).unwrap();
        let o = escape_obstruction(2.9, res(1, 3), &ctx, 12, 60).unwrap();
        assert!(o.crossing);
        // below the escape value the same curves stay apart
        let below = escape_obstruction(2.84, res(1, 3), &ctx, 12, 60).unwrap();
        assert!(!below.crossing);
    }

    proptest::proptest! {
        #[test]
        fn crossing_is_symmetric_and_shift_invariant(
            a in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..12),
            b in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..12),
        ) {
            let c = obstruction_check(&a, &b);
            proptest::prop_assert_eq!(c, obstruction_check(&b, &a));
            let shift = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| (x + 0.25, y - 0.5)).collect::<Vec<_>>();
            proptest::prop_assert_eq!(c, obstruction_check(&shift(&a), &shift(&b)));
            // an independent brute-force scan
            let mut brute = false;
            for i in 0..a.len() - 1 {
                for j in 0..b.len() - 1 {
                    brute |= crosses(a[i], a[i + 1], b[j], b[j + 1]);
                }
            }
            proptest::prop_assert_eq!(c, brute);
        }
    }
}

