//! Small hand-built meshes and libraries for tests and examples.

use std::collections::BTreeMap;

use crate::grid::{Boundary, Geometry2D};
use crate::xslib::{EnergyGroupStructure, LibraryMode, MaterialXs, MgLibrary};

/// Uniform `nx × nz` mesh of pitch (dx, dz) filled with material `name`.
pub fn uniform_mesh(nx: usize, nz: usize, dx: f64, dz: f64, name: &str, boundary: Boundary) -> Geometry2D {
    Geometry2D {
        x_edges: (0..=nx).map(|i| i as f64 * dx).collect(),
        z_edges: (0..=nz).map(|i| i as f64 * dz).collect(),
        material_names: vec![name.to_string()],
        cell_material: vec![0; nx * nz],
        x_boundary: boundary,
        z_boundary: boundary,
        regions: BTreeMap::new(),
        y_extent_cm: 1.0,
    }
}

/// Group structure with `n` groups, the last one thermal.
pub fn simple_groups(n: usize) -> EnergyGroupStructure {
    assert!(n >= 2);
    EnergyGroupStructure::equal_lethargy(2e7, 0.625, 1e-5, n - 1).unwrap()
}

/// Material with given totals, absorptions and row-major transfer matrix.
pub fn material(name: &str, total: &[f64], absorb: &[f64], transfer: &[f64]) -> MaterialXs {
    assert_eq!(transfer.len(), total.len() * total.len());
    MaterialXs {
        name: name.to_string(),
        total: total.to_vec(),
        absorb: absorb.to_vec(),
        transfer: transfer.to_vec(),
    }
}

/// One-group material with scattering Σt − Σa.
pub fn one_group(name: &str, total: f64, absorb: f64) -> MaterialXs {
    material(name, &[total], &[absorb], &[total - absorb])
}

pub fn library(groups: EnergyGroupStructure, materials: Vec<MaterialXs>) -> MgLibrary {
    MgLibrary {
        groups,
        mode: LibraryMode::Res,
        nuclides: Vec::new(),
        materials,
    }
}

/// Library on a one-group structure (the group is treated as thermal).
pub fn one_group_library(materials: Vec<MaterialXs>) -> MgLibrary {
    library(EnergyGroupStructure::single(2e7, 1e-5), materials)
}
