//! Stability domains by the orbit method.

pub mod analysis;
pub mod labels;
pub mod raster;

pub use analysis::{
    areas, escape_value, extents, island_membership, saddle_center_window, section_sets, sweep_mu,
    third_order_window, Areas, EscapeValue, Extents, IslandMembership, SectionSets, SectionSpec, SweepRow,
};
pub use labels::label_mask;
pub use raster::{escape_time, raster_stability, CellClass, RasterSpec, RasterStats, StabilityRaster};
