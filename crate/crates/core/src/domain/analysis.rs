//! Measurements on stability rasters: areas, extents, parameter sweeps,
//! symmetry-line sections and resonance escape values.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;

use crate::error::{Result, RtmError};
use crate::local::ResonanceId;
use crate::map::{on_fix_r1, PhasePoint, RtmParams};
use crate::rotation::{classify_point_detailed, RotationConfig};

use super::raster::{escape_time, raster_stability, CellClass, RasterSpec, StabilityRaster};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Areas {
    pub area_a: f64,
    pub area_d: f64,
}

/// `ℓ²` times the number of non-white cells, and of cells in component 1.
pub fn areas(r: &StabilityRaster) -> Areas {
    let ell2 = r.cell_side() * r.cell_side();
    let a = r.cells.iter().filter(|c| !c.is_white()).count();
    let d = if r.core_present { r.component_labels.iter().filter(|&&l| l == 1).count() } else { 0 };
    Areas { area_a: ell2 * a as f64, area_d: ell2 * d as f64 }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Extents {
    pub psi_min: f64,
    pub psi_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub capture_efficiency: f64,
}

impl Extents {
    pub fn psi_extent(&self) -> f64 {
        self.psi_max - self.psi_min
    }

    pub fn w_extent(&self) -> f64 {
        self.w_max - self.w_min
    }
}

/// Extent of component 1 along `w = 0` and along `psi = 0`, measured to cell edges.
pub fn extents(r: &StabilityRaster) -> Extents {
    if !r.core_present {
        return Extents::default();
    }
    let ell = r.cell_side();
    let span = |it: &mut dyn Iterator<Item = (i64, u32)>| -> Option<(i64, i64)> {
        let mut lo = None;
        let mut hi = None;
        for (k, l) in it {
            if l == 1 {
                lo = Some(lo.map_or(k, |x: i64| x.min(k)));
                hi = Some(hi.map_or(k, |x: i64| x.max(k)));
            }
        }
        lo.zip(hi)
    };
    let row = span(&mut (r.i_lo..=r.i_hi).map(|i| (i, r.label_at(i, 0).unwrap())));
    let col = span(&mut (-r.j_max..=r.j_max).map(|j| (j, r.label_at(0, j).unwrap())));
    let (Some((i0, i1)), Some((j0, j1))) = (row, col) else {
        return Extents::default();
    };
    let psi_min = (i0 as f64 - 0.5) * ell;
    let psi_max = (i1 as f64 + 0.5) * ell;
    Extents {
        psi_min,
        psi_max,
        w_min: (j0 as f64 - 0.5) * ell,
        w_max: (j1 as f64 + 0.5) * ell,
        capture_efficiency: (psi_max - psi_min) / TAU,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub mu: f64,
    pub cell_side: f64,
    pub area_a: f64,
    pub area_d: f64,
    pub extents: Extents,
}

/// One raster per parameter value, built from `spec_for(mu)`.
pub fn sweep_mu<F>(mu_list: &[f64], spec_for: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64) -> RasterSpec,
{
    if mu_list.is_empty() {
        return Err(RtmError::Invalid("empty parameter list".into()));
    }
    mu_list
        .iter()
        .map(|&mu| {
            let params = RtmParams::from_mu(mu)?;
            let spec = spec_for(mu);
            let r = raster_stability(&spec, &params)?;
            let a = areas(&r);
            Ok(SweepRow { mu, cell_side: spec.cell_side, area_a: a.area_a, area_d: a.area_d, extents: extents(&r) })
        })
        .collect()
}

/// Pixels spanned by the smaller side of a windowed raster.
pub const WINDOW_PIXELS: f64 = 160.0;

/// Window around the homoclinic loop that bounds the domain for small `mu`.
/// The cell side is the smaller of `max_cell` and the value giving
/// [`WINDOW_PIXELS`] cells across the `w` half-range.
pub fn saddle_center_window(mu: f64, max_cell: f64) -> RasterSpec {
    let psi_h = -2.0 * (mu / TAU).atan();
    // separatrix of the limit Hamiltonian: x in [−1/π, 1/2π], |y| <= 1/(π√3)
    let w_half = 1.35 * mu.powf(1.5) / (PI * 3f64.sqrt());
    let ell = max_cell.min(w_half / WINDOW_PIXELS);
    let lo = 1.2 * psi_h - 3.0 * ell;
    let hi = 1.35 * mu / TAU + 3.0 * ell;
    RasterSpec::windowed((lo, hi), w_half + 3.0 * ell, ell)
}

/// Window around the triangle of the third order resonance at `mu = 3 + eps`.
pub fn third_order_window(eps: f64, max_cell: f64) -> RasterSpec {
    let s = eps.abs() / PI;
    let w_half = 1.5 * 3.0 * s;
    let ell = max_cell.min(w_half / WINDOW_PIXELS);
    // the triangle flips with the sign of eps
    let psi_half = 1.5 * 2.0 * s + 3.0 * ell;
    RasterSpec::windowed((-psi_half, psi_half), w_half + 3.0 * ell, ell)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionSets {
    pub mus: Vec<f64>,
    pub psis: Vec<f64>,
    /// Rows follow `mus`, columns follow `psis`: classes of `(psi, 0)`.
    pub s0: Vec<CellClass>,
    /// Same for the points `(psi, eta(psi)/2)` of `Fix(r1)`.
    pub s1: Vec<CellClass>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionSpec {
    pub escape_budget: u64,
    pub control_w: f64,
    pub rotation: RotationConfig,
}

impl Default for SectionSpec {
    fn default() -> Self {
        Self { escape_budget: 100_000, control_w: 1.0, rotation: RotationConfig::default() }
    }
}

/// Classification of a single point: escape test, then rotation number.
pub fn classify_cell(p: PhasePoint, spec: &SectionSpec, params: &RtmParams) -> Result<CellClass> {
    if escape_time(p, spec.escape_budget, spec.control_w, params).is_some() {
        return Ok(CellClass::White);
    }
    let cfg = RotationConfig { control_w: Some(spec.control_w), ..spec.rotation };
    match classify_point_detailed(p, &cfg, params) {
        Ok((c, _)) => Ok(CellClass::from_orbit(&c)),
        Err(RtmError::DegenerateArgument { .. }) => Ok(CellClass::Ric),
        Err(e) => Err(e),
    }
}

/// The sets of `(psi, mu)` whose symmetry-line points lie in the domain.
pub fn section_sets(mus: &[f64], psis: &[f64], spec: &SectionSpec) -> Result<SectionSets> {
    if mus.is_empty() || psis.is_empty() {
        return Err(RtmError::Invalid("empty section grid".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..mus.len()).flat_map(|a| (0..psis.len()).map(move |b| (a, b))).collect();
    let out: Vec<Result<(CellClass, CellClass)>> = jobs
        .par_iter()
        .map(|&(a, b)| {
            let params = RtmParams::from_mu(mus[a])?;
            let psi = psis[b];
            let c0 = classify_cell(PhasePoint::new(psi, 0.0), spec, &params)?;
            let c1 = classify_cell(on_fix_r1(psi, &params), spec, &params)?;
            Ok((c0, c1))
        })
        .collect();
    let mut s0 = Vec::with_capacity(out.len());
    let mut s1 = Vec::with_capacity(out.len());
    for r in out {
        let (a, b) = r?;
        s0.push(a);
        s1.push(b);
    }
    Ok(SectionSets { mus: mus.to_vec(), psis: psis.to_vec(), s0, s1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IslandMembership {
    pub total: usize,
    pub in_core: usize,
}

impl IslandMembership {
    /// The resonance still belongs to the connected component of `p_s`.
    pub fn inside(&self) -> bool {
        self.total > 0 && 2 * self.in_core >= self.total
    }
}

/// Cells of rotation number `m/n` and how many of them lie in component 1.
pub fn island_membership(r: &StabilityRaster, res: ResonanceId) -> IslandMembership {
    let mut total = 0;
    let mut in_core = 0;
    for (c, &l) in r.cells.iter().zip(&r.component_labels) {
        if let CellClass::Island { m, n } = *c {
            if m == res.m() && n == res.n() {
                total += 1;
                if r.core_present && l == 1 {
                    in_core += 1;
                }
            }
        }
    }
    IslandMembership { total, in_core }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeValue {
    pub lo: f64,
    pub hi: f64,
    /// `(mu, membership)` for every raster evaluated.
    pub evaluations: Vec<(f64, IslandMembership)>,
}

/// Bracket of width `grid_step` around the parameter where the `m/n`
/// islands leave the connected component of `p_s`.
pub fn escape_value<F>(res: ResonanceId, bracket: (f64, f64), grid_step: f64, spec_for: F) -> Result<EscapeValue>
where
    F: Fn(f64) -> RasterSpec,
{
    let (lo, hi) = bracket;
    if !(grid_step > 0.0 && lo < hi) {
        return Err(RtmError::Invalid("escape value needs lo < hi and a positive step".into()));
    }
    let steps = ((hi - lo) / grid_step).round() as i64;
    if steps < 1 || ((hi - lo) / grid_step - steps as f64).abs() > 1e-6 {
        return Err(RtmError::Invalid("bracket must be a whole number of grid steps".into()));
    }
    let grid = |k: i64| ((lo + k as f64 * grid_step) * 1e9).round() / 1e9;
    let mut evaluations = Vec::new();
    let mut inside = |k: i64| -> Result<bool> {
        let mu = grid(k);
        let params = RtmParams::from_mu(mu)?;
        let r = raster_stability(&spec_for(mu).with_classification(true), &params)?;
        let m = island_membership(&r, res);
        evaluations.push((mu, m));
        Ok(m.inside())
    };
    let (mut a, mut b) = (0i64, steps);
    let pa = inside(a)?;
    let pb = inside(b)?;
    if pa == pb || !pa {
        return Err(RtmError::NoTransition { lo, hi });
    }
    while b - a > 1 {
        let mid = (a + b) / 2;
        if inside(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(EscapeValue { lo: grid(a), hi: grid(b), evaluations })
}
