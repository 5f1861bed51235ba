//! Named reproduction recipes. Each one computes a table of values and a
//! list of range checks; the CLI prints the table, the acceptance target
//! prints the checks.

use std::f64::consts::TAU;

use crate::domain::{
    areas, escape_value, extents, raster_stability, saddle_center_window, sweep_mu, third_order_window, RasterSpec,
};
use crate::error::{Result, RtmError};
use crate::io::{Field, Table};
use crate::local::{
    asymptotic_area_saddle_center, asymptotic_area_third_order, classify_local_stability, flat_rotation_fit, twist_root,
    ResonanceId,
};
use crate::manifold::{
    default_order, descending_grid, escape_obstruction, lobe_area_map, lobe_quadrature, splitting_fit, HpMap,
    PrecisionContext,
};
use crate::map::{PhasePoint, RtmParams};
use crate::rotation::refined_rotation_number;

/// A value and the closed interval it has to fall in.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Check {
    pub fn range(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), value, lo, hi }
    }

    pub fn abs(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::range(name, value, target - tol, target + tol)
    }

    pub fn rel(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let d = (target * tol).abs();
        Self::range(name, value, target - d, target + d)
    }

    /// 1 for true; passes when `value == expected`.
    pub fn flag(name: impl Into<String>, value: bool, expected: bool) -> Self {
        let e = expected as u8 as f64;
        Self::range(name, value as u8 as f64, e, e)
    }

    pub fn pass(&self) -> bool {
        self.value >= self.lo && self.value <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }
}

/// Overrides applied by recipes that take them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReproOptions {
    pub deep_budget: Option<u64>,
    pub bits: Option<u32>,
}

impl ReproOptions {
    fn budget(&self, default: u64) -> u64 {
        self.deep_budget.unwrap_or(default)
    }

    fn ctx(&self, default: u32) -> Result<PrecisionContext> {
        PrecisionContext::new(self.bits.unwrap_or(default))
    }
}

pub struct Recipe {
    pub id: &'static str,
    pub criterion: u32,
    pub summary: &'static str,
    run: fn(&ReproOptions) -> Result<Outcome>,
}

impl Recipe {
    pub fn run(&self, opts: &ReproOptions) -> Result<Outcome> {
        (self.run)(opts)
    }
}

impl std::fmt::Debug for Recipe {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Recipe").field("id", &self.id).field("criterion", &self.criterion).finish()
    }
}

pub const RECIPES: &[Recipe] = &[
    Recipe { id: "twist-root", criterion: 1, summary: "zero of the twist coefficient: theta_r, mu_r", run: twist },
    Recipe { id: "local-stability-scan", criterion: 2, summary: "local stability verdict over a mu list", run: local_scan },
    Recipe { id: "rotation-limit", criterion: 3, summary: "rotation number next to p_s against the linear value", run: rotation_limit },
    Recipe { id: "flat-fit", criterion: 4, summary: "quartic fit of the rotation number along w = 0 at mu_r", run: flat_fit },
    Recipe { id: "fig8", criterion: 5, summary: "areas of A and D at mu = 2.037 and 2.038", run: fig8 },
    Recipe { id: "fig5", criterion: 6, summary: "|A| for small mu against the saddle-center asymptotics", run: fig5 },
    Recipe { id: "fig11", criterion: 6, summary: "|D| at mu = 3 -/+ 0.1 against the triangle area", run: fig11 },
    Recipe { id: "fig7", criterion: 7, summary: "|A|, |D| over mu in [1.8, 2.0] step 0.02 and at 4.2, 4.6", run: fig7 },
    Recipe { id: "table3-row-1-4", criterion: 8, summary: "escape bracket of the (1,4) islands", run: table3_1_4 },
    Recipe { id: "table3-row-1-3", criterion: 8, summary: "escape bracket of the (1,3) islands", run: table3_1_3 },
    Recipe { id: "table3-row-2-5", criterion: 8, summary: "escape bracket of the (2,5) islands", run: table3_2_5 },
    Recipe { id: "lobe-mu-0.859", criterion: 9, summary: "lobe area at mu = 0.859 by action sum and by quadrature", run: lobe_0859 },
    Recipe { id: "splitting-fit", criterion: 10, summary: "fit of the scaled lobe area over 8 values of h in [0.3, 0.6]", run: split_fit },
    Recipe { id: "fig18", criterion: 11, summary: "W^u(p_h) against W^s of the (1,3) SPO at mu = 2.9", run: fig18 },
    Recipe { id: "extents-mu-2", criterion: 13, summary: "extents and capture efficiency at mu = 2, and their maximum over a sweep", run: extents_mu2 },
];

pub fn find(id: &str) -> Option<&'static Recipe> {
    RECIPES.iter().find(|r| r.id == id)
}

fn kv_table(rows: &[(&str, f64)]) -> Result<Table> {
    let mut t = Table::new(&["name", "value"]);
    for &(k, v) in rows {
        t.push(vec![k.into(), v.into()])?;
    }
    Ok(t)
}

fn twist(_: &ReproOptions) -> Result<Outcome> {
    let r = twist_root();
    Ok(Outcome {
        table: kv_table(&[("theta_r", r.theta_r), ("mu_r", r.mu_r)])?,
        checks: vec![
            Check::abs("theta_r", r.theta_r, 1.842998343412199, 1e-12),
            Check::abs("mu_r", r.mu_r, 2.537706055658189, 1e-12),
        ],
    })
}

fn local_scan(_: &ReproOptions) -> Result<Outcome> {
    let mut mus: Vec<f64> = (-5..=45).map(|k| k as f64 / 10.0).collect();
    mus.extend([3.0, 4.0, twist_root().mu_r, 2.0]);
    let mut t = Table::new(&["mu", "stable", "reason"]);
    let mut wrong = 0usize;
    for &mu in &mus {
        let v = classify_local_stability(mu);
        let expect = mu > 0.0 && mu <= 4.0 && mu != 3.0;
        wrong += (v.stable != expect) as usize;
        t.push(vec![mu.into(), v.stable.into(), v.reason.as_str().into()])?;
    }
    Ok(Outcome { table: t, checks: vec![Check::range("misclassified", wrong as f64, 0.0, 0.0)] })
}

fn rotation_limit(_: &ReproOptions) -> Result<Outcome> {
    let mut t = Table::new(&["mu", "theta_7_15", "linear", "err_bound"]);
    let mut checks = Vec::new();
    for mu in [0.5, 1.5, 2.5, 3.5] {
        let params = RtmParams::from_mu(mu)?;
        let est = refined_rotation_number(PhasePoint::new(1e-4, 0.0), 7, 15, &params)?;
        let lin = (1.0 - mu / 2.0).acos() / TAU;
        checks.push(Check::abs(format!("theta(mu={mu})"), est.theta_pq, lin, 1e-7));
        t.push(vec![mu.into(), est.theta_pq.into(), lin.into(), est.err_bound.into()])?;
    }
    Ok(Outcome { table: t, checks })
}

fn flat_fit(_: &ReproOptions) -> Result<Outcome> {
    let root = twist_root();
    let params = RtmParams::from_mu(root.mu_r)?;
    let mut t = Table::new(&["psi", "rho"]);
    let mut samples = Vec::new();
    for k in -50..=50 {
        if k == 0 {
            continue;
        }
        let psi = 0.001 * k as f64;
        let rho = refined_rotation_number(PhasePoint::new(psi, 0.0), 7, 15, &params)?.theta_pq;
        samples.push((psi, rho));
        t.push(vec![psi.into(), rho.into()])?;
    }
    let f = flat_rotation_fit(&samples)?;
    Ok(Outcome {
        table: t,
        checks: vec![
            Check::range("rho2", f.rho2, -400.0, -100.0),
            Check::abs("rho0", f.rho0, root.theta_r / TAU, 1e-6),
        ],
    })
}

fn area_row(t: &mut Table, mu: f64, spec: &RasterSpec) -> Result<(f64, f64)> {
    let r = raster_stability(spec, &RtmParams::from_mu(mu)?)?;
    let a = areas(&r);
    let e = extents(&r);
    t.push(vec![
        mu.into(),
        spec.cell_side.into(),
        a.area_a.into(),
        a.area_d.into(),
        e.psi_extent().into(),
        e.w_extent().into(),
        e.capture_efficiency.into(),
    ])?;
    Ok((a.area_a, a.area_d))
}

const AREA_HEADER: [&str; 7] = ["mu", "ell", "area_a", "area_d", "psi_extent", "w_extent", "capture_efficiency"];

fn fig8(opts: &ReproOptions) -> Result<Outcome> {
    let spec = RasterSpec::auto(1.0 / 1000.0).with_deep_budget(opts.budget(100_000));
    let mut t = Table::new(&AREA_HEADER);
    let (a0, d0) = area_row(&mut t, 2.037, &spec)?;
    let (_, d1) = area_row(&mut t, 2.038, &spec)?;
    Ok(Outcome {
        table: t,
        checks: vec![
            Check::rel("|A|(2.037)", a0, 0.1166, 0.05),
            Check::rel("|D|(2.037)", d0, 0.1103, 0.05),
            Check::rel("|D|(2.038)", d1, 0.0151, 0.10),
        ],
    })
}

fn sweep_table(rows: &[crate::domain::SweepRow], pred: impl Fn(f64) -> f64) -> Result<Table> {
    let mut t = Table::new(&["mu", "ell", "area_a", "area_d", "asymptotic"]);
    for r in rows {
        t.push(vec![r.mu.into(), r.cell_side.into(), r.area_a.into(), r.area_d.into(), pred(r.mu).into()])?;
    }
    Ok(t)
}

fn fig5(opts: &ReproOptions) -> Result<Outcome> {
    let mus: Vec<f64> = (1..=6).map(|k| 0.05 * k as f64).collect();
    let budget = opts.budget(100_000);
    let rows = sweep_mu(&mus, |mu| saddle_center_window(mu, 1.0 / 2000.0).with_deep_budget(budget))?;
    let checks = rows
        .iter()
        .map(|r| Check::rel(format!("|A|({:.2})", r.mu), r.area_a, asymptotic_area_saddle_center(r.mu), 0.10))
        .collect();
    Ok(Outcome { table: sweep_table(&rows, asymptotic_area_saddle_center)?, checks })
}

fn fig11(opts: &ReproOptions) -> Result<Outcome> {
    let budget = opts.budget(100_000);
    let mut rows = Vec::new();
    for eps in [-0.1, 0.1] {
        rows.extend(sweep_mu(&[3.0 + eps], |_| third_order_window(eps, 1.0 / 2000.0).with_deep_budget(budget))?);
    }
    let pred = |mu: f64| asymptotic_area_third_order(mu - 3.0);
    let checks = rows.iter().map(|r| Check::rel(format!("|D|({:.1})", r.mu), r.area_d, pred(r.mu), 0.15)).collect();
    Ok(Outcome { table: sweep_table(&rows, pred)?, checks })
}

fn fig7(opts: &ReproOptions) -> Result<Outcome> {
    let mut mus: Vec<f64> = (0..=10).map(|k| ((1.8 + 0.02 * k as f64) * 1e9).round() / 1e9).collect();
    mus.extend([4.2, 4.6]);
    let spec = RasterSpec::auto(1.0 / 1000.0).with_deep_budget(opts.budget(100_000));
    let rows = sweep_mu(&mus, |_| spec)?;
    let mut t = Table::new(&["mu", "ell", "area_a", "area_d"]);
    for r in &rows {
        t.push(vec![r.mu.into(), r.cell_side.into(), r.area_a.into(), r.area_d.into()])?;
    }
    let (amax, at) = rows[..11].iter().fold((f64::NEG_INFINITY, 0.0), |b, r| if r.area_a > b.0 { (r.area_a, r.mu) } else { b });
    Ok(Outcome {
        table: t,
        checks: vec![
            Check::rel("max |A|", amax, 0.172, 0.05),
            Check::abs("argmax mu", at, 1.91, 0.05),
            Check::range("|D|(4.2)", rows[11].area_d, 0.0, 0.0),
            Check::range("|A|(4.6)", rows[12].area_a, 0.0, 0.0),
        ],
    })
}

fn table3(opts: &ReproOptions, m: u32, n: u32, lo: f64, hi: f64) -> Result<Outcome> {
    let res = ResonanceId::new(m, n)?;
    let budget = opts.budget(1_000_000);
    let mut t = Table::new(&["m", "n", "mu", "island_cells", "in_core", "inside"]);
    let mut checks = Vec::new();
    match escape_value(res, (lo, hi), 0.01, |_| RasterSpec::auto(1.0 / 500.0).with_deep_budget(budget)) {
        Ok(v) => {
            for (mu, mem) in &v.evaluations {
                t.push(vec![m.into(), n.into(), (*mu).into(), mem.total.into(), mem.in_core.into(), mem.inside().into()])?;
            }
            checks.push(Check::abs("bracket lo", v.lo, lo, 1e-9));
            checks.push(Check::abs("bracket hi", v.hi, hi, 1e-9));
        }
        Err(RtmError::NoTransition { .. }) => checks.push(Check::flag("transition found", false, true)),
        Err(e) => return Err(e),
    }
    Ok(Outcome { table: t, checks })
}

fn table3_1_4(o: &ReproOptions) -> Result<Outcome> {
    table3(o, 1, 4, 2.03, 2.04)
}

fn table3_1_3(o: &ReproOptions) -> Result<Outcome> {
    table3(o, 1, 3, 2.85, 2.86)
}

fn table3_2_5(o: &ReproOptions) -> Result<Outcome> {
    table3(o, 2, 5, 3.73, 3.74)
}

fn lobe_0859(opts: &ReproOptions) -> Result<Outcome> {
    let ctx = opts.ctx(256)?;
    let map = HpMap::from_f64(0.859, &ctx)?;
    let lobe = lobe_area_map(&map, &ctx, default_order(&ctx))?;
    let quad = lobe_quadrature(&lobe, 4000)?;
    let a = &lobe.action;
    let rel = {
        let target = ctx.float(3.808194826948494e-5);
        (rug::Float::with_val(ctx.bits(), &a.area - &target) / target).abs().to_f64()
    };
    let qrel = (quad.area.to_f64() / a.area.to_f64() - 1.0).abs();
    let mut t = Table::new(&["mu", "h", "area", "digits", "quadrature_area"]);
    t.push(vec![a.mu.into(), a.h.into(), a.area.to_f64().into(), a.digits.into(), quad.area.to_f64().into()])?;
    Ok(Outcome {
        table: t,
        checks: vec![
            Check::range("relative error", rel, 0.0, 5e-13),
            Check::range("quadrature deviation", qrel, 0.0, 1e-3),
        ],
    })
}

fn split_fit(opts: &ReproOptions) -> Result<Outcome> {
    let ctx = opts.ctx(512)?;
    let fit = splitting_fit(&descending_grid(0.6, 0.3, 8), &ctx, None)?;
    let mut t = Table::new(&["h", "scaled_area", "residual"]);
    for ((h, s), r) in fit.points.iter().zip(&fit.residuals) {
        t.push(vec![(*h).into(), s.to_f64().into(), (*r).into()])?;
    }
    Ok(Outcome {
        table: t,
        checks: vec![
            Check::rel("a0", fit.a0, 1.42099e5, 1e-4),
            Check::range("|a1|/a0", (fit.a1 / fit.a0).abs(), 0.0, 1e-3),
        ],
    })
}

fn fig18(opts: &ReproOptions) -> Result<Outcome> {
    let ctx = opts.ctx(256)?;
    let ob = escape_obstruction(2.9, ResonanceId::new(1, 3)?, &ctx, 12, 60)?;
    let mut t = Table::new(&["curve", "domain", "index", "psi", "w"]);
    for (name, lines) in [("unstable", &ob.unstable), ("stable", &ob.stable)] {
        for (d, pl) in lines.iter().enumerate() {
            for (k, p) in pl.points.iter().enumerate() {
                t.push(vec![Field::from(name), d.into(), k.into(), p.0.into(), p.1.into()])?;
            }
        }
    }
    Ok(Outcome { table: t, checks: vec![Check::flag("crossing", ob.crossing, true)] })
}

fn extents_mu2(opts: &ReproOptions) -> Result<Outcome> {
    let budget = opts.budget(100_000);
    let mut t = Table::new(&AREA_HEADER);
    let r = raster_stability(&RasterSpec::auto(1.0 / 1000.0).with_deep_budget(budget), &RtmParams::from_mu(2.0)?)?;
    let e = extents(&r);
    let a = areas(&r);
    t.push(vec![
        2.0.into(),
        r.cell_side().into(),
        a.area_a.into(),
        a.area_d.into(),
        e.psi_extent().into(),
        e.w_extent().into(),
        e.capture_efficiency.into(),
    ])?;
    let mus: Vec<f64> = (1..=45).map(|k| k as f64 / 10.0).collect();
    let coarse = RasterSpec::auto(1.0 / 200.0).with_deep_budget(budget);
    let sweep = sweep_mu(&mus, |_| coarse)?;
    let mut best = 0.0f64;
    for s in &sweep {
        best = best.max(s.extents.capture_efficiency);
        t.push(vec![
            s.mu.into(),
            s.cell_side.into(),
            s.area_a.into(),
            s.area_d.into(),
            s.extents.psi_extent().into(),
            s.extents.w_extent().into(),
            s.extents.capture_efficiency.into(),
        ])?;
    }
    Ok(Outcome {
        table: t,
        checks: vec![
            Check::rel("psi extent", e.psi_extent(), 0.28, 0.15),
            Check::rel("w extent", e.w_extent(), 0.4, 0.15),
            Check::rel("capture efficiency", e.capture_efficiency, 0.04, 0.15),
            Check::range("max efficiency", best, 0.0, 0.13),
        ],
    })
}
