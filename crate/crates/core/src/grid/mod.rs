//! Benchmark geometry, angular quadrature and cell×group fields shared by the
//! deterministic and Monte Carlo solvers.

mod field;
mod geometry;
mod quadrature;

pub use field::{CellGroupData, FluxField, FluxKind};
pub use geometry::{
    build_geometry, Boundary, Geometry2D, GeometryConfig, LayerConfig, PlateConfig, RegionBox,
    REGION_CENTERLINE, REGION_EXIT, REGION_PLATE, REGION_SOURCE,
};
pub use quadrature::{build_quadrature, gauss_legendre, AngularQuadrature, Ordinate};
