mod args;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use rtm_core::domain::{
    areas, extents, raster_stability, saddle_center_window, section_sets, sweep_mu, third_order_window, CellClass,
    RasterSpec, SectionSpec,
};
use rtm_core::hamiltonian::{contour_lines, Grid, HamiltonianId};
use rtm_core::io::{write_csv, write_ppm, Field, Image, Table};
use rtm_core::local::{classify_local_stability, ResonanceId};
use rtm_core::manifold::{
    default_order, descending_grid, escape_obstruction, find_spos, globalize, lobe_area, spo_orbit, splitting_fit,
    stable_series, unstable_series, HpMap, PrecisionContext, SeriesBase, Side, SymmetryLine,
};
use rtm_core::map::{iterate, linear_type_at_fixed_points, PhasePoint, RtmParams};
use rtm_core::repro::{self, ReproOptions};
use rtm_core::rotation::{classify_estimate, refined_rotation_number};
use rtm_core::RtmError;
use thiserror::Error;

use args::{BranchArg, Cli, Command, Line, RasterArgs, SideArg, Window};

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] RtmError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive, got {x}")))
    }
}

fn finite(name: &str, xs: &[f64]) -> Result<()> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(usage(format!("--{name} must be finite, got {x}"))),
        None => Ok(()),
    }
}

fn bits(b: u32) -> Result<PrecisionContext> {
    PrecisionContext::new(b).map_err(|e| usage(e.to_string()))
}

fn resonance(m: u32, n: u32) -> Result<ResonanceId> {
    ResonanceId::new(m, n).map_err(|e| usage(e.to_string()))
}

fn check_raster(r: &RasterArgs, mus: &[f64]) -> Result<()> {
    positive("ell", r.ell)?;
    positive("control-w", r.control_w)?;
    if r.fast_budget == 0 || r.deep_budget == 0 {
        return Err(usage("escape budgets must be at least 1"));
    }
    if let Some(h) = r.w_half {
        positive("w-half", h)?;
    }
    if r.psi_range.is_none() && r.window == Window::ThirdOrder && mus.iter().any(|&mu| mu == 3.0) {
        return Err(usage("the third-order window needs mu != 3"));
    }
    Ok(())
}

/// All numeric flags against the preconditions of the modules they feed.
fn validate(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Map { mu, psi, w, .. } | Command::Rotnum { mu, psi, w, .. } => finite("mu, psi and w", &[*mu, *psi, *w])?,
        Command::Classify { mu } => finite("mu", &mu.0)?,
        Command::Raster { mu, raster, .. } => {
            finite("mu", &[*mu])?;
            check_raster(raster, &[*mu])?;
        }
        Command::Sweep { mu, raster } | Command::Extents { mu, raster } => check_raster(raster, &mu.0)?,
        Command::Sections { budget, .. } if *budget == 0 => return Err(usage("--budget must be at least 1")),
        Command::Sections { .. } => {}
        Command::Hamiltonian { id, mu, nodes, .. } => {
            id.parse::<HamiltonianId>().map_err(|e| usage(e.to_string()))?;
            finite("mu", &[*mu])?;
            if *nodes < 2 {
                return Err(usage("--nodes must be at least 2"));
            }
        }
        Command::Manifold { mu, bits: b, .. } => {
            finite("mu", &[*mu])?;
            bits(*b)?;
        }
        Command::Lobe { mu, bits: b, .. } => {
            finite("mu", &mu.0)?;
            bits(*b)?;
        }
        Command::Splitfit { h_max, h_min, points, bits: b } => {
            positive("h-min", *h_min)?;
            if !(h_max > h_min) || *points < 4 {
                return Err(usage("splitfit needs h-max > h-min > 0 and at least 4 points"));
            }
            bits(*b)?;
        }
        Command::Spo { mu, m, n, .. } => {
            finite("mu", &[*mu])?;
            resonance(*m, *n)?;
        }
        Command::Obstruct { mu, m, n, bits: b, .. } => {
            finite("mu", &[*mu])?;
            resonance(*m, *n)?;
            bits(*b)?;
        }
        Command::Repro { id, list, bits: b, deep_budget } => {
            if let Some(b) = b {
                bits(*b)?;
            }
            if *deep_budget == Some(0) {
                return Err(usage("--deep-budget must be at least 1"));
            }
            if let (Some(id), false) = (id, list) {
                if repro::find(id).is_none() {
                    return Err(usage(format!("unknown recipe {id:?}; see `rtm repro --list`")));
                }
            }
        }
    }
    Ok(())
}

fn spec_for(r: &RasterArgs, mu: f64) -> RasterSpec {
    let mut spec = match (r.psi_range, r.window) {
        (Some(psi), _) => RasterSpec::windowed(psi, r.w_half.unwrap_or(rtm_core::domain::raster::AUTO_W_HALF), r.ell),
        (None, Window::Auto) => RasterSpec::auto(r.ell),
        (None, Window::SaddleCenter) => saddle_center_window(mu, r.ell),
        (None, Window::ThirdOrder) => third_order_window(mu - 3.0, r.ell),
    };
    if let (Some(h), None) = (r.w_half, r.psi_range) {
        spec.w_range = (-h, h);
    }
    spec.escape_budget_fast = r.fast_budget;
    spec.escape_budget_deep = r.deep_budget;
    spec.control_w = r.control_w;
    spec.with_classification(r.classify)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn emit(out: &Option<PathBuf>, table: &Table) -> Result<()> {
    match out {
        Some(p) => {
            let mut f = create(p)?;
            write_csv(&mut f, table)?;
            f.flush()?;
        }
        None => {
            let mut s = io::stdout().lock();
            write_csv(&mut s, table)?;
            s.flush()?;
        }
    }
    Ok(())
}

fn save_ppm(path: &Path, img: &Image) -> Result<()> {
    let mut f = create(path)?;
    write_ppm(&mut f, img)?;
    f.flush()?;
    Ok(())
}

const EXTENT_HEADER: [&str; 11] =
    ["mu", "ell", "area_a", "area_d", "psi_min", "psi_max", "w_min", "w_max", "psi_extent", "w_extent", "capture_efficiency"];

fn extent_row(mu: f64, ell: f64, a: rtm_core::domain::Areas, e: rtm_core::domain::Extents) -> Vec<Field> {
    vec![
        mu.into(),
        ell.into(),
        a.area_a.into(),
        a.area_d.into(),
        e.psi_min.into(),
        e.psi_max.into(),
        e.w_min.into(),
        e.w_max.into(),
        e.psi_extent().into(),
        e.w_extent().into(),
        e.capture_efficiency.into(),
    ]
}

fn sides(s: SideArg) -> Vec<(Side, &'static str)> {
    match s {
        SideArg::Positive => vec![(Side::Positive, "positive")],
        SideArg::Negative => vec![(Side::Negative, "negative")],
        SideArg::Both => vec![(Side::Positive, "positive"), (Side::Negative, "negative")],
    }
}

fn run(cli: Cli) -> Result<()> {
    let out = &cli.out;
    match cli.command {
        Command::Map { mu, psi, w, steps } => {
            let params = RtmParams::from_mu(mu)?;
            let mut t = Table::new(&["n", "psi", "w"]);
            let dir = steps.signum();
            let mut p = PhasePoint::new(psi, w);
            for k in 1..=steps.abs() {
                p = iterate(p, dir, &params);
                t.push(vec![(k * dir).into(), p.psi.into(), p.w.into()])?;
            }
            emit(out, &t)
        }
        Command::Classify { mu } => {
            let mut t = Table::new(&["mu", "stable", "reason", "trace_s", "type_s", "trace_h", "type_h"]);
            for &m in &mu.0 {
                let v = classify_local_stability(m);
                let lt = linear_type_at_fixed_points(&RtmParams::from_mu(m)?);
                t.push(vec![
                    m.into(),
                    v.stable.into(),
                    v.reason.as_str().into(),
                    lt.trace_s.into(),
                    format!("{:?}", lt.type_s).to_lowercase().into(),
                    lt.trace_h.into(),
                    format!("{:?}", lt.type_h).to_lowercase().into(),
                ])?;
            }
            emit(out, &t)
        }
        Command::Rotnum { mu, psi, w, p, q, tol } => {
            let params = RtmParams::from_mu(mu)?;
            let est = refined_rotation_number(PhasePoint::new(psi, w), p, q, &params)?;
            let mut t = Table::new(&["mu", "psi", "w", "p", "q", "theta", "err_bound", "class"]);
            t.push(vec![
                mu.into(),
                psi.into(),
                w.into(),
                p.into(),
                q.into(),
                est.theta_pq.into(),
                est.err_bound.into(),
                classify_estimate(&est, tol).label().into(),
            ])?;
            emit(out, &t)
        }
        Command::Raster { mu, raster, ppm } => {
            let spec = spec_for(&raster, mu);
            let r = raster_stability(&spec, &RtmParams::from_mu(mu)?)?;
            if let Some(path) = ppm {
                save_ppm(&path, &Image::from_raster(&r))?;
            }
            let mut t = Table::new(&EXTENT_HEADER);
            t.push(extent_row(mu, spec.cell_side, areas(&r), extents(&r)))?;
            emit(out, &t)
        }
        Command::Sweep { mu, raster } | Command::Extents { mu, raster } => {
            let rows = sweep_mu(&mu.0, |m| spec_for(&raster, m))?;
            let mut t = Table::new(&EXTENT_HEADER);
            for r in rows {
                let a = rtm_core::domain::Areas { area_a: r.area_a, area_d: r.area_d };
                t.push(extent_row(r.mu, r.cell_side, a, r.extents))?;
            }
            emit(out, &t)
        }
        Command::Sections { mu, psi, budget, ppm_s0, ppm_s1 } => {
            let spec = SectionSpec { escape_budget: budget, ..SectionSpec::default() };
            let s = section_sets(&mu.0, &psi.0, &spec)?;
            let mut t = Table::new(&["mu", "psi", "s0", "s1"]);
            let np = psi.0.len();
            for (a, &m) in mu.0.iter().enumerate() {
                for (b, &x) in psi.0.iter().enumerate() {
                    t.push(vec![m.into(), x.into(), s.s0[a * np + b].name().into(), s.s1[a * np + b].name().into()])?;
                }
            }
            let image = |cells: &[CellClass]| Image {
                width: np,
                height: mu.0.len(),
                rgb: (0..mu.0.len()).rev().flat_map(|a| cells[a * np..(a + 1) * np].iter().map(|c| c.rgb())).collect(),
            };
            if let Some(p) = ppm_s0 {
                save_ppm(&p, &image(&s.s0))?;
            }
            if let Some(p) = ppm_s1 {
                save_ppm(&p, &image(&s.s1))?;
            }
            emit(out, &t)
        }
        Command::Hamiltonian { id, mu, level, psi_range, w_range, nodes } => {
            let id: HamiltonianId = id.parse().map_err(|e: RtmError| usage(e.to_string()))?;
            let grid = Grid::new(psi_range, w_range, nodes, nodes)?;
            // errors depend on the parameter only, so one probe surfaces them
            id.evaluate(PhasePoint::new(psi_range.0, w_range.0), mu)?;
            let values = grid.sample(|x, y| id.evaluate(PhasePoint::new(x, y), mu).unwrap_or(f64::NAN));
            let mut t = Table::new(&["curve", "index", "psi", "w", "closed"]);
            for (c, line) in contour_lines(&grid, &values, level)?.iter().enumerate() {
                for (k, p) in line.points.iter().enumerate() {
                    t.push(vec![c.into(), k.into(), p.0.into(), p.1.into(), line.closed.into()])?;
                }
            }
            emit(out, &t)
        }
        Command::Manifold { mu, branch, side, domains, bits: b } => {
            let ctx = bits(b)?;
            let map = HpMap::from_f64(mu, &ctx)?;
            let series = match branch {
                BranchArg::Unstable => unstable_series(SeriesBase::Ph, default_order(&ctx), &ctx, &map)?,
                BranchArg::Stable => stable_series(SeriesBase::Ph, default_order(&ctx), &ctx, &map)?,
            };
            let mut t = Table::new(&["side", "domain", "index", "t", "psi", "w"]);
            for (s, name) in sides(side) {
                let pl = globalize(&series, domains, s);
                let mut d = 0;
                for (k, (p, par)) in pl.points.iter().zip(&pl.params).enumerate() {
                    while d + 1 < pl.domain_starts.len() && pl.domain_starts[d + 1] <= k {
                        d += 1;
                    }
                    t.push(vec![name.into(), d.into(), k.into(), (*par).into(), p.0.into(), p.1.into()])?;
                }
            }
            emit(out, &t)
        }
        Command::Lobe { mu, bits: b, order } => {
            let ctx = bits(b)?;
            let mut t = Table::new(&["mu", "h", "area", "digits"]);
            for &m in &mu.0 {
                let r = lobe_area(m, &ctx, order)?;
                t.push(vec![r.mu.into(), r.h.into(), r.area.to_f64().into(), r.digits.into()])?;
            }
            emit(out, &t)
        }
        Command::Splitfit { h_max, h_min, points, bits: b } => {
            let ctx = bits(b)?;
            let fit = splitting_fit(&descending_grid(h_max, h_min, points), &ctx, None)?;
            let mut t = Table::new(&["h", "scaled_area", "a0", "a1"]);
            for (h, s) in &fit.points {
                t.push(vec![(*h).into(), s.to_f64().into(), fit.a0.into(), fit.a1.into()])?;
            }
            emit(out, &t)
        }
        Command::Spo { mu, m, n, line } => {
            let params = RtmParams::from_mu(mu)?;
            let line = match line {
                Line::R0 => SymmetryLine::FixR0,
                Line::R1 => SymmetryLine::FixR1,
            };
            let found = find_spos(resonance(m, n)?, line, &params, 8192);
            if found.is_empty() {
                return Err(RtmError::NotFound(format!("no ({m},{n}) orbit on {line:?} at mu = {mu}")).into());
            }
            let mut t = Table::new(&["orbit", "kind", "trace", "k", "psi", "w"]);
            for (o, spo) in found.iter().enumerate() {
                let kind = format!("{:?}", spo.kind).to_lowercase();
                for (k, p) in spo_orbit(spo, &params).iter().enumerate() {
                    t.push(vec![o.into(), kind.clone().into(), spo.trace.into(), k.into(), p.psi.into(), p.w.into()])?;
                }
            }
            emit(out, &t)
        }
        Command::Obstruct { mu, m, n, bits: b, unstable_domains, stable_domains } => {
            let ctx = bits(b)?;
            let ob = escape_obstruction(mu, resonance(m, n)?, &ctx, unstable_domains, stable_domains)?;
            let mut t = Table::new(&["mu", "m", "n", "spo_psi", "spo_w", "trace", "crossing"]);
            t.push(vec![
                mu.into(),
                m.into(),
                n.into(),
                ob.spo.point.psi.into(),
                ob.spo.point.w.into(),
                ob.spo.trace.into(),
                ob.crossing.into(),
            ])?;
            emit(out, &t)
        }
        Command::Repro { id, list, deep_budget, bits: b } => {
            if list {
                let mut t = Table::new(&["id", "criterion", "summary"]);
                for r in repro::RECIPES {
                    t.push(vec![r.id.into(), r.criterion.into(), r.summary.into()])?;
                }
                return emit(out, &t);
            }
            let id = id.expect("clap requires an id without --list");
            let recipe = repro::find(&id).ok_or_else(|| usage(format!("unknown recipe {id:?}")))?;
            let outcome = recipe.run(&ReproOptions { deep_budget, bits: b })?;
            for c in &outcome.checks {
                let mark = if c.pass() { "PASS" } else { "FAIL" };
                eprintln!("{mark} {}: {} = {:e} in [{:e}, {:e}]", recipe.id, c.name, c.value, c.lo, c.hi);
            }
            emit(out, &outcome.table)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = validate(&cli.command).and_then(|_| run(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, CliError::Usage(_)) { 2 } else { 1 })
        }
    }
}
