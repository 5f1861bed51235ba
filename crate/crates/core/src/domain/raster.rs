//! The orbit method on a square lattice of cell centres `(i ℓ, j ℓ)`.
//!
//! Only the upper half `j >= 0` is iterated. The reversor `r0` maps the cell
//! `(i, j)` exactly onto `(i + j, −j)`, so the lower half is read off the upper
//! one and the raster is `r0`-symmetric by construction.

use rayon::prelude::*;

use crate::error::{Result, RtmError};
use crate::map::{linear_type_at_fixed_points, map_forward, map_inverse, LinearType, PhasePoint, RtmParams};
use crate::rotation::{classify_point_detailed, OrbitClass, RotationConfig};

use super::labels::{label_mask, promote_label};

/// Window that contains the stability domain for every `mu > 0`.
pub const AUTO_PSI_RANGE: (f64, f64) = (-0.45, 0.35);
pub const AUTO_W_HALF: f64 = 0.8;

const FAST_GROUP_ROWS: usize = 4;
const DEEP_GROUP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellClass {
    /// Escaped from the control region.
    White,
    /// Bounded for the deep budget but never classified.
    Bounded,
    /// Bounded with a non-converging rotation number.
    Chaotic,
    /// Bounded with rotation number `m/n`.
    Island { m: u32, n: u32 },
    /// Bounded on a rotational invariant curve.
    Ric,
}

impl CellClass {
    pub fn rgb(&self) -> [u8; 3] {
        match self {
            CellClass::White => [255, 255, 255],
            CellClass::Bounded => [128, 128, 128],
            CellClass::Chaotic => [0, 0, 255],
            CellClass::Island { .. } => [0, 160, 0],
            CellClass::Ric => [220, 0, 0],
        }
    }

    pub fn from_rgb(rgb: [u8; 3]) -> Option<CellClass> {
        Some(match rgb {
            [255, 255, 255] => CellClass::White,
            [128, 128, 128] => CellClass::Bounded,
            [0, 0, 255] => CellClass::Chaotic,
            [0, 160, 0] => CellClass::Island { m: 0, n: 0 },
            [220, 0, 0] => CellClass::Ric,
            _ => return None,
        })
    }

    pub fn is_white(&self) -> bool {
        matches!(self, CellClass::White)
    }

    pub fn name(&self) -> &'static str {
        match self {
            CellClass::White => "white",
            CellClass::Bounded => "bounded",
            CellClass::Chaotic => "blue",
            CellClass::Island { .. } => "green",
            CellClass::Ric => "red",
        }
    }

    pub fn from_orbit(c: &OrbitClass) -> CellClass {
        match *c {
            OrbitClass::Chaotic => CellClass::Chaotic,
            OrbitClass::Rational { m, n } => CellClass::Island { m: m as u32, n: n as u32 },
            OrbitClass::Irrational(_) => CellClass::Ric,
            OrbitClass::Escaped { .. } => CellClass::White,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterSpec {
    pub psi_range: (f64, f64),
    /// Symmetric: `w_range.0 = −w_range.1`.
    pub w_range: (f64, f64),
    pub cell_side: f64,
    pub escape_budget_fast: u64,
    pub escape_budget_deep: u64,
    pub control_w: f64,
    pub max_passes: usize,
    /// Run the rotation-number classification of surviving cells.
    pub classify: bool,
    pub rotation: RotationConfig,
}

impl RasterSpec {
    /// The window `[−0.45, 0.35] × [−0.8, 0.8]`.
    pub fn auto(cell_side: f64) -> Self {
        Self::windowed(AUTO_PSI_RANGE, AUTO_W_HALF, cell_side)
    }

    pub fn windowed(psi_range: (f64, f64), w_half: f64, cell_side: f64) -> Self {
        Self {
            psi_range,
            w_range: (-w_half, w_half),
            cell_side,
            escape_budget_fast: 1000,
            escape_budget_deep: 100_000,
            control_w: 1.0,
            max_passes: 50,
            classify: false,
            rotation: RotationConfig::default(),
        }
    }

    pub fn with_classification(mut self, on: bool) -> Self {
        self.classify = on;
        self
    }

    pub fn with_deep_budget(mut self, budget: u64) -> Self {
        self.escape_budget_deep = budget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ell = self.cell_side;
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(RtmError::Invalid(format!("cell side must be positive, got {ell}")));
        }
        let (a, b) = self.psi_range;
        if !(a.is_finite() && b.is_finite() && a < b && a >= -std::f64::consts::PI && b < std::f64::consts::PI) {
            return Err(RtmError::Invalid(format!("psi range ({a}, {b}) must be increasing inside [−π, π)")));
        }
        let (c, d) = self.w_range;
        if !(d > 0.0 && d.is_finite() && (c + d).abs() <= 1e-12 * d) {
            return Err(RtmError::Invalid(format!("w range ({c}, {d}) must be symmetric about 0")));
        }
        if self.escape_budget_fast == 0 || self.escape_budget_deep == 0 {
            return Err(RtmError::Invalid("escape budgets must be at least 1".into()));
        }
        if !(self.control_w > 0.0) {
            return Err(RtmError::Invalid("control region half-width must be positive".into()));
        }
        let cells = ((b - a) / ell + 1.0) * (d / ell + 1.0);
        if cells > 4e8 {
            return Err(RtmError::Invalid(format!("raster too large ({cells:.0} cells)")));
        }
        Ok(())
    }

    pub(crate) fn lattice(&self) -> Lattice {
        let ell = self.cell_side;
        let i_lo = (self.psi_range.0 / ell - 1e-9).ceil() as i64;
        let i_hi = (self.psi_range.1 / ell + 1e-9).floor() as i64;
        let j_max = (self.w_range.1 / ell + 1e-9).floor() as i64;
        Lattice { ell, i_lo, i_hi, j_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Lattice {
    pub ell: f64,
    pub i_lo: i64,
    pub i_hi: i64,
    pub j_max: i64,
}

impl Lattice {
    pub fn width(&self) -> usize {
        (self.i_hi - self.i_lo + 1) as usize
    }

    pub fn upper_len(&self) -> usize {
        self.width() * (self.j_max as usize + 1)
    }

    /// Upper-half index of the cell that holds the class of lattice cell `(i, j)`.
    #[inline]
    pub fn upper_index(&self, i: i64, j: i64) -> Option<usize> {
        let (i, j) = if j < 0 { (i + j, -j) } else { (i, j) };
        if i < self.i_lo || i > self.i_hi || j > self.j_max {
            return None;
        }
        Some(j as usize * self.width() + (i - self.i_lo) as usize)
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (i64, i64) {
        let w = self.width();
        (self.i_lo + (k % w) as i64, (k / w) as i64)
    }

    #[inline]
    pub fn center(&self, k: usize) -> PhasePoint {
        let (i, j) = self.ij(k);
        PhasePoint::new(i as f64 * self.ell, j as f64 * self.ell)
    }

    #[inline]
    pub fn cell_of(&self, p: PhasePoint) -> Option<usize> {
        let i = (p.psi / self.ell).round();
        let j = (p.w / self.ell).round();
        if !(i.abs() < 1e15 && j.abs() < 1e15) {
            return None;
        }
        self.upper_index(i as i64, j as i64)
    }
}

/// First `n` with `|w_n| > control_w`, alternating `f` and `f^{-1}`:
/// positive for a forward escape, negative for a backward one.
pub fn escape_time(p: PhasePoint, budget: u64, control_w: f64, params: &RtmParams) -> Option<i64> {
    if !(p.w.abs() <= control_w) {
        return Some(0);
    }
    let mut f = p;
    let mut b = p;
    for k in 1..=budget {
        f = map_forward(f, params);
        if !(f.w.abs() <= control_w) {
            return Some(k as i64);
        }
        b = map_inverse(b, params);
        if !(b.w.abs() <= control_w) {
            return Some(-(k as i64));
        }
    }
    None
}

/// Cells entered by the orbit segment that ended in the escape `esc`.
fn escaping_cells(p: PhasePoint, esc: i64, lat: &Lattice, params: &RtmParams) -> Vec<u32> {
    let k = esc.unsigned_abs();
    let (nf, nb) = if esc > 0 { (k, k - 1) } else { (k, k) };
    let mut out = Vec::new();
    let mut push = |q: PhasePoint| {
        if let Some(c) = lat.cell_of(q) {
            out.push(c as u32);
        }
    };
    push(p);
    let mut f = p;
    for _ in 0..nf {
        f = map_forward(f, params);
        push(f);
    }
    let mut b = p;
    for _ in 0..nb {
        b = map_inverse(b, params);
        push(b);
    }
    out
}

fn forward_cells(p: PhasePoint, steps: u64, lat: &Lattice, params: &RtmParams) -> Vec<u32> {
    let mut out = Vec::new();
    let mut f = p;
    if let Some(c) = lat.cell_of(f) {
        out.push(c as u32);
    }
    for _ in 0..steps {
        f = map_forward(f, params);
        if let Some(c) = lat.cell_of(f) {
            out.push(c as u32);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RasterStats {
    pub fast_escapes: usize,
    pub deep_passes: usize,
    pub deep_tests: usize,
    pub deep_escapes: usize,
    pub classified: usize,
    pub late_escapes: usize,
}

/// Full `r0`-symmetric raster, row-major from `(psi_min, w_max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRaster {
    pub spec: RasterSpec,
    pub mu: f64,
    pub i_lo: i64,
    pub i_hi: i64,
    pub j_max: i64,
    pub width: usize,
    pub height: usize,
    pub cells: Vec<CellClass>,
    /// 0 for white cells; component 1 contains `p_s` when `core_present`.
    pub component_labels: Vec<u32>,
    pub component_count: u32,
    pub core_present: bool,
    pub stats: RasterStats,
}

impl StabilityRaster {
    pub fn cell_side(&self) -> f64 {
        self.spec.cell_side
    }

    pub fn index(&self, i: i64, j: i64) -> Option<usize> {
        if i < self.i_lo || i > self.i_hi || j.abs() > self.j_max {
            return None;
        }
        Some((self.j_max - j) as usize * self.width + (i - self.i_lo) as usize)
    }

    pub fn class_at(&self, i: i64, j: i64) -> Option<CellClass> {
        self.index(i, j).map(|k| self.cells[k])
    }

    pub fn label_at(&self, i: i64, j: i64) -> Option<u32> {
        self.index(i, j).map(|k| self.component_labels[k])
    }

    /// Lattice coordinates `(i, j)` of a row-major index.
    pub fn ij(&self, k: usize) -> (i64, i64) {
        (self.i_lo + (k % self.width) as i64, self.j_max - (k / self.width) as i64)
    }

    pub fn center(&self, k: usize) -> PhasePoint {
        let (i, j) = self.ij(k);
        PhasePoint::new(i as f64 * self.spec.cell_side, j as f64 * self.spec.cell_side)
    }

    /// Build from a class grid (row-major from the top row) and label it.
    pub fn from_cells(spec: RasterSpec, mu: f64, cells: Vec<CellClass>, stats: RasterStats) -> Result<Self> {
        spec.validate()?;
        let lat = spec.lattice();
        let width = lat.width();
        let height = 2 * lat.j_max as usize + 1;
        if cells.len() != width * height {
            return Err(RtmError::Invalid(format!(
                "cell grid has {} entries, expected {width} × {height}",
                cells.len()
            )));
        }
        let mut r = StabilityRaster {
            spec,
            mu,
            i_lo: lat.i_lo,
            i_hi: lat.i_hi,
            j_max: lat.j_max,
            width,
            height,
            cells,
            component_labels: Vec::new(),
            component_count: 0,
            core_present: false,
            stats,
        };
        r.relabel();
        Ok(r)
    }

    /// Recompute the component labels from the cell classes.
    pub fn relabel(&mut self) {
        let mask: Vec<bool> = self.cells.iter().map(|c| !c.is_white()).collect();
        let (mut labels, count) = label_mask(&mask, self.width, self.height);
        self.core_present = false;
        if let Some(seed) = self.index(0, 0) {
            if labels[seed] != 0 {
                promote_label(&mut labels, seed);
                self.core_present = true;
            }
        }
        self.component_labels = labels;
        self.component_count = count;
    }
}

/// Run the orbit method for one parameter value.
pub fn raster_stability(spec: &RasterSpec, params: &RtmParams) -> Result<StabilityRaster> {
    spec.validate()?;
    let lat = spec.lattice();
    let n = lat.upper_len();
    let mut white = vec![false; n];
    let mut deep_ok = vec![false; n];
    let mut stats = RasterStats::default();

    // fast pass, top rows first so early escapes prune later groups
    let width = lat.width();
    let rows: Vec<usize> = (0..=lat.j_max as usize).rev().collect();
    for group in rows.chunks(FAST_GROUP_ROWS) {
        let cand: Vec<usize> = group
            .iter()
            .flat_map(|&j| (0..width).map(move |c| j * width + c))
            .filter(|&k| !white[k])
            .collect();
        let hits: Vec<(usize, Vec<u32>)> = cand
            .par_iter()
            .filter_map(|&k| {
                let p = lat.center(k);
                escape_time(p, spec.escape_budget_fast, spec.control_w, params)
                    .map(|e| (k, escaping_cells(p, e, &lat, params)))
            })
            .collect();
        stats.fast_escapes += hits.len();
        for (k, cells) in hits {
            white[k] = true;
            for c in cells {
                white[c as usize] = true;
            }
        }
    }

    // a saddle at p_s is a bounded orbit of measure zero; its cell carries no area
    if linear_type_at_fixed_points(params).type_s == LinearType::Hyperbolic {
        if let Some(k) = lat.upper_index(0, 0) {
            white[k] = true;
        }
    }

    deep_flood(&lat, spec, params, &mut white, &mut deep_ok, &mut stats);

    let mut classes: Vec<Option<CellClass>> = vec![None; n];
    if spec.classify {
        let cfg = RotationConfig { control_w: Some(spec.control_w), ..spec.rotation };
        let cand: Vec<usize> = (0..n).filter(|&k| !white[k]).collect();
        let results: Vec<(usize, Result<CellClass>, Option<i64>)> = cand
            .par_iter()
            .map(|&k| {
                let p = lat.center(k);
                match classify_point_detailed(p, &cfg, params) {
                    Ok((OrbitClass::Escaped { step }, _)) => (k, Ok(CellClass::White), Some(step)),
                    Ok((c, _)) => (k, Ok(CellClass::from_orbit(&c)), None),
                    // the cell of p_s itself
                    Err(RtmError::DegenerateArgument { .. }) => (k, Ok(CellClass::Ric), None),
                    Err(e) => (k, Err(e), None),
                }
            })
            .collect();
        stats.classified = results.len();
        let mut late = false;
        for (k, c, esc) in results {
            let c = c?;
            if let Some(step) = esc {
                late = true;
                stats.late_escapes += 1;
                white[k] = true;
                for c in forward_cells(lat.center(k), step.unsigned_abs(), &lat, params) {
                    white[c as usize] = true;
                }
            } else {
                classes[k] = Some(c);
            }
        }
        if late {
            deep_flood(&lat, spec, params, &mut white, &mut deep_ok, &mut stats);
        }
    }

    let upper: Vec<CellClass> = (0..n)
        .map(|k| if white[k] { CellClass::White } else { classes[k].unwrap_or(CellClass::Bounded) })
        .collect();
    let height = 2 * lat.j_max as usize + 1;
    let mut cells = Vec::with_capacity(width * height);
    for r in 0..height {
        let j = lat.j_max - r as i64;
        for c in 0..width {
            let i = lat.i_lo + c as i64;
            cells.push(lat.upper_index(i, j).map_or(CellClass::White, |k| upper[k]));
        }
    }
    StabilityRaster::from_cells(*spec, params.mu(), cells, stats)
}

/// Neighbours of an upper cell in the full plane, including those of its
/// `r0` mirror, mapped back to upper indices (`None` = outside the window).
fn full_neighbours(lat: &Lattice, k: usize) -> [Option<usize>; 6] {
    let (i, j) = lat.ij(k);
    [
        lat.upper_index(i - 1, j),
        lat.upper_index(i + 1, j),
        lat.upper_index(i, j + 1),
        lat.upper_index(i, j - 1),
        lat.upper_index(i + 1, j - 1),
        lat.upper_index(i - 1, j + 1),
    ]
}

fn deep_flood(
    lat: &Lattice,
    spec: &RasterSpec,
    params: &RtmParams,
    white: &mut [bool],
    deep_ok: &mut [bool],
    stats: &mut RasterStats,
) {
    for _ in 0..spec.max_passes {
        let cand: Vec<usize> = (0..white.len())
            .filter(|&k| {
                !white[k] && !deep_ok[k] && full_neighbours(lat, k).iter().any(|nb| nb.map_or(true, |x| white[x]))
            })
            .collect();
        if cand.is_empty() {
            break;
        }
        stats.deep_passes += 1;
        for group in cand.chunks(DEEP_GROUP) {
            let todo: Vec<usize> = group.iter().copied().filter(|&k| !white[k]).collect();
            stats.deep_tests += todo.len();
            let res: Vec<(usize, Option<Vec<u32>>)> = todo
                .par_iter()
                .map(|&k| {
                    let p = lat.center(k);
                    let e = escape_time(p, spec.escape_budget_deep, spec.control_w, params);
                    (k, e.map(|e| escaping_cells(p, e, lat, params)))
                })
                .collect();
            for (k, cells) in res {
                match cells {
                    Some(cells) => {
                        stats.deep_escapes += 1;
                        white[k] = true;
                        for c in cells {
                            white[c as usize] = true;
                        }
                    }
                    None => deep_ok[k] = true,
                }
            }
        }
    }
}
