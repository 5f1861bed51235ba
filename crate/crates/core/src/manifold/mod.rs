//! High-precision invariant curves of the hyperbolic points, homoclinic
//! lobes and their exponentially small area, and the transversality test
//! between curves of different saddles.

mod curve;
mod global;
mod homoclinic;
mod hp;
mod series;

pub use curve::CurveF64;
pub use global::{
    escape_obstruction, find_spo, find_spos, first_crossing, globalize, globalize_curve, in_window, obstruction_check,
    spo_orbit, Obstruction, Polyline, Side, SpoPoint, MIN_CROSSING_ANGLE, POLYLINE_SPACING,
};
pub use homoclinic::{
    descending_grid, fit_scaled, lobe_area, lobe_area_map, lobe_quadrature, primary_homoclinic, splitting_fit, Homoclinic,
    Lobe, LobeMethod, LobeResult, SplitFit, SymmetryLine, FIT_BASIS,
};
pub use hp::{Direction, HpMap, HpPoint, PrecisionContext};
pub use series::{default_order, refine_periodic, stable_series, unstable_series, Branch, ManifoldSeries, SeriesBase, MAX_ORDER};
