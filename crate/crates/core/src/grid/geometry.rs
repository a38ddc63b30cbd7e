use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::textio::{fmt_f64, fmt_f64_list, Document};
use crate::{Error, Result};

pub const REGION_SOURCE: &str = "source";
pub const REGION_PLATE: &str = "plate";
pub const REGION_EXIT: &str = "exit";
pub const REGION_CENTERLINE: &str = "centerline";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Vacuum,
    Reflective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub z_lo: f64,
    pub z_hi: f64,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateConfig {
    pub x_lo: f64,
    pub x_hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    pub material: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    pub name: String,
    pub x: [f64; 2],
    pub z: [f64; 2],
}

fn default_vacuum() -> Boundary {
    Boundary::Vacuum
}

fn default_y_extent() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub x_extent_cm: f64,
    pub z_extent_cm: f64,
    pub pitch_cm: f64,
    #[serde(default)]
    pub fine_pitch_cm: Option<f64>,
    #[serde(default)]
    pub fine_x_range_cm: Option<[f64; 2]>,
    /// Physical depth in y, used only for plate chord lengths.
    #[serde(default = "default_y_extent")]
    pub y_extent_cm: f64,
    #[serde(default = "default_vacuum")]
    pub x_boundary: Boundary,
    #[serde(default = "default_vacuum")]
    pub z_boundary: Boundary,
    pub layers: Vec<LayerConfig>,
    #[serde(default)]
    pub plate: Option<PlateConfig>,
    /// Extra named regions; `source` defaults to the first layer and
    /// `centerline` to the column through the plate center.
    #[serde(default)]
    pub regions: Vec<RegionBox>,
}

impl GeometryConfig {
    /// The x–z benchmark: source mix, steel slab, water with an optional
    /// steel plate, air.
    pub fn benchmark(with_plate: bool) -> Self {
        let layer = |z_lo: f64, z_hi: f64, m: &str| LayerConfig {
            z_lo,
            z_hi,
            material: m.to_string(),
        };
        GeometryConfig {
            x_extent_cm: 53.0,
            z_extent_cm: 140.0,
            pitch_cm: 1.0,
            fine_pitch_cm: Some(0.25),
            fine_x_range_cm: Some([24.0, 29.0]),
            y_extent_cm: 50.0,
            x_boundary: Boundary::Vacuum,
            z_boundary: Boundary::Vacuum,
            layers: vec![
                layer(0.0, 15.0, "source_mix"),
                layer(15.0, 30.0, "steel"),
                layer(30.0, 130.0, "water"),
                layer(130.0, 140.0, "air"),
            ],
            plate: Some(PlateConfig {
                x_lo: 25.0,
                x_hi: 28.0,
                z_lo: 30.0,
                z_hi: 130.0,
                material: if with_plate { "plate_steel" } else { "water" }.to_string(),
            }),
            regions: vec![RegionBox {
                name: REGION_EXIT.to_string(),
                x: [25.0, 28.0],
                z: [130.0, 132.0],
            }],
        }
    }
}

/// Cartesian x–z mesh, uniform in y. Cell `c = ix + nx * iz`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry2D {
    pub x_edges: Vec<f64>,
    pub z_edges: Vec<f64>,
    pub material_names: Vec<String>,
    pub cell_material: Vec<usize>,
    pub x_boundary: Boundary,
    pub z_boundary: Boundary,
    pub regions: BTreeMap<String, Vec<usize>>,
    pub y_extent_cm: f64,
}

fn segment_edges(lo: f64, hi: f64, pitch: f64) -> Vec<f64> {
    let n = ((hi - lo) / pitch - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn axis_edges(extent: f64, pitch: f64, fine: Option<(f64, [f64; 2])>) -> Result<Vec<f64>> {
    if !(extent > 0.0 && pitch > 0.0) {
        return Err(Error::config("axis extent and pitch must be positive"));
    }
    let mut edges = vec![0.0];
    let mut add = |lo: f64, hi: f64, p: f64| {
        if hi > lo {
            edges.extend(segment_edges(lo, hi, p).into_iter().skip(1));
        }
    };
    match fine {
        Some((fp, [a, b])) => {
            if !(fp > 0.0 && 0.0 <= a && a < b && b <= extent) {
                return Err(Error::config("bad fine-pitch range"));
            }
            add(0.0, a, pitch);
            add(a, b, fp);
            add(b, extent, pitch);
        }
        None => add(0.0, extent, pitch),
    }
    Ok(edges)
}

fn on_edge(edges: &[f64], v: f64) -> bool {
    edges.iter().any(|e| (e - v).abs() < 1e-9)
}

/// Builds the mesh, material map and named regions from `config`.
pub fn build_geometry(config: &GeometryConfig) -> Result<Geometry2D> {
    let fine = match (config.fine_pitch_cm, config.fine_x_range_cm) {
        (Some(p), Some(r)) => Some((p, r)),
        (None, None) => None,
        _ => return Err(Error::config("fine pitch and fine x range must be given together")),
    };
    let x_edges = axis_edges(config.x_extent_cm, config.pitch_cm, fine)?;
    let z_edges = axis_edges(config.z_extent_cm, config.pitch_cm, None)?;
    let nx = x_edges.len() - 1;
    let nz = z_edges.len() - 1;

    let mut material_names: Vec<String> = Vec::new();
    let mut material_id = |name: &str| -> usize {
        if let Some(i) = material_names.iter().position(|m| m == name) {
            i
        } else {
            material_names.push(name.to_string());
            material_names.len() - 1
        }
    };

    if config.layers.is_empty() {
        return Err(Error::config("geometry needs at least one layer"));
    }
    let mut layers = config.layers.clone();
    layers.sort_by(|a, b| a.z_lo.total_cmp(&b.z_lo));
    for w in layers.windows(2) {
        if w[1].z_lo < w[0].z_hi - 1e-9 {
            return Err(Error::config(format!(
                "layers `{}` and `{}` overlap",
                w[0].material, w[1].material
            )));
        }
    }
    for l in &layers {
        if !(l.z_hi > l.z_lo) || !on_edge(&z_edges, l.z_lo) || !on_edge(&z_edges, l.z_hi) {
            return Err(Error::config(format!("layer `{}` does not conform to the mesh", l.material)));
        }
    }

    let mut cell_material = vec![usize::MAX; nx * nz];
    for iz in 0..nz {
        let zc = 0.5 * (z_edges[iz] + z_edges[iz + 1]);
        if let Some(l) = layers.iter().find(|l| zc > l.z_lo && zc < l.z_hi) {
            let id = material_id(&l.material);
            for ix in 0..nx {
                cell_material[ix + nx * iz] = id;
            }
        }
    }
    if cell_material.contains(&usize::MAX) {
        return Err(Error::config("layers leave part of the mesh without material"));
    }

    let in_box = |x: [f64; 2], z: [f64; 2]| -> Vec<usize> {
        let mut cells = Vec::new();
        for iz in 0..nz {
            let zc = 0.5 * (z_edges[iz] + z_edges[iz + 1]);
            if zc <= z[0] || zc >= z[1] {
                continue;
            }
            for ix in 0..nx {
                let xc = 0.5 * (x_edges[ix] + x_edges[ix + 1]);
                if xc > x[0] && xc < x[1] {
                    cells.push(ix + nx * iz);
                }
            }
        }
        cells
    };

    let mut regions: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let first = &layers[0];
    regions.insert(
        REGION_SOURCE.to_string(),
        in_box([0.0, config.x_extent_cm], [first.z_lo, first.z_hi]),
    );

    if let Some(p) = &config.plate {
        for v in [p.x_lo, p.x_hi] {
            if !on_edge(&x_edges, v) {
                return Err(Error::config(format!("plate edge x = {v} is not a mesh edge")));
            }
        }
        for v in [p.z_lo, p.z_hi] {
            if !on_edge(&z_edges, v) {
                return Err(Error::config(format!("plate edge z = {v} is not a mesh edge")));
            }
        }
        if !(p.x_hi > p.x_lo && p.z_hi > p.z_lo) {
            return Err(Error::config("plate box is empty"));
        }
        let cells = in_box([p.x_lo, p.x_hi], [p.z_lo, p.z_hi]);
        let id = material_id(&p.material);
        for &c in &cells {
            cell_material[c] = id;
        }
        regions.insert(REGION_PLATE.to_string(), cells);
        let xc = 0.5 * (p.x_lo + p.x_hi);
        let ix = x_edges.partition_point(|&e| e <= xc + 1e-9) - 1;
        let ix = ix.min(nx - 1);
        regions.insert(
            REGION_CENTERLINE.to_string(),
            (0..nz).map(|iz| ix + nx * iz).collect(),
        );
    }

    for r in &config.regions {
        if !(r.x[1] > r.x[0] && r.z[1] > r.z[0]) {
            return Err(Error::config(format!("region `{}` is empty", r.name)));
        }
        if r.x[0] < -1e-9 || r.x[1] > config.x_extent_cm + 1e-9 || r.z[0] < -1e-9 || r.z[1] > config.z_extent_cm + 1e-9 {
            return Err(Error::config(format!("region `{}` leaves the mesh", r.name)));
        }
        let cells = in_box(r.x, r.z);
        if cells.is_empty() {
            return Err(Error::config(format!("region `{}` contains no cells", r.name)));
        }
        regions.insert(r.name.clone(), cells);
    }

    if !(config.y_extent_cm > 0.0) {
        return Err(Error::config("y extent must be positive"));
    }

    Ok(Geometry2D {
        x_edges,
        z_edges,
        material_names,
        cell_material,
        x_boundary: config.x_boundary,
        z_boundary: config.z_boundary,
        regions,
        y_extent_cm: config.y_extent_cm,
    })
}

impl Geometry2D {
    pub fn nx(&self) -> usize {
        self.x_edges.len() - 1
    }

    pub fn nz(&self) -> usize {
        self.z_edges.len() - 1
    }

    pub fn n_cells(&self) -> usize {
        self.nx() * self.nz()
    }

    #[inline]
    pub fn cell(&self, ix: usize, iz: usize) -> usize {
        ix + self.nx() * iz
    }

    #[inline]
    pub fn dx(&self, ix: usize) -> f64 {
        self.x_edges[ix + 1] - self.x_edges[ix]
    }

    #[inline]
    pub fn dz(&self, iz: usize) -> f64 {
        self.z_edges[iz + 1] - self.z_edges[iz]
    }

    /// Cell area in the x–z plane (cm^2, i.e. volume per cm of y).
    #[inline]
    pub fn volume(&self, c: usize) -> f64 {
        let nx = self.nx();
        self.dx(c % nx) * self.dz(c / nx)
    }

    pub fn volumes(&self) -> Vec<f64> {
        (0..self.n_cells()).map(|c| self.volume(c)).collect()
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes().iter().sum()
    }

    pub fn region(&self, name: &str) -> Result<&[usize]> {
        self.regions
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::config(format!("unknown region `{name}`")))
    }

    pub fn all_cells(&self) -> Vec<usize> {
        (0..self.n_cells()).collect()
    }

    /// Volume and surface (cm^3, cm^2) of the cells of `region` taken as a box
    /// spanning `y_extent_cm`.
    pub fn region_box_volume_surface(&self, region: &str) -> Result<(f64, f64)> {
        let cells = self.region(region)?;
        if cells.is_empty() {
            return Err(Error::config(format!("region `{region}` is empty")));
        }
        let nx = self.nx();
        let (mut x0, mut x1, mut z0, mut z1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &c in cells {
            let (ix, iz) = (c % nx, c / nx);
            x0 = x0.min(self.x_edges[ix]);
            x1 = x1.max(self.x_edges[ix + 1]);
            z0 = z0.min(self.z_edges[iz]);
            z1 = z1.max(self.z_edges[iz + 1]);
        }
        let (a, b, c) = (x1 - x0, z1 - z0, self.y_extent_cm);
        Ok((a * b * c, 2.0 * (a * b + a * c + b * c)))
    }

    /// 1-cell, 1-material geometry with reflective sides: an infinite medium.
    pub fn infinite_medium(material: &str, side: f64) -> Self {
        Geometry2D {
            x_edges: vec![0.0, side],
            z_edges: vec![0.0, side],
            material_names: vec![material.to_string()],
            cell_material: vec![0],
            x_boundary: Boundary::Reflective,
            z_boundary: Boundary::Reflective,
            regions: BTreeMap::from([(REGION_SOURCE.to_string(), vec![0])]),
            y_extent_cm: side,
        }
    }

    /// Locates the cell containing (x, z), or `None` outside the mesh.
    pub fn locate(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        let nx = self.nx();
        let nz = self.nz();
        if x < self.x_edges[0] || x > self.x_edges[nx] || z < self.z_edges[0] || z > self.z_edges[nz] {
            return None;
        }
        let ix = (self.x_edges.partition_point(|&e| e <= x)).clamp(1, nx) - 1;
        let iz = (self.z_edges.partition_point(|&e| e <= z)).clamp(1, nz) - 1;
        Some((ix, iz))
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document::new("geometry");
        let bc = |b: Boundary| match b {
            Boundary::Vacuum => "vacuum",
            Boundary::Reflective => "reflective",
        };
        doc.set("nx", self.nx())
            .set("nz", self.nz())
            .set("cells", self.n_cells())
            .set("x_boundary", bc(self.x_boundary))
            .set("z_boundary", bc(self.z_boundary))
            .set("y_extent_cm", fmt_f64(self.y_extent_cm))
            .set("materials", self.material_names.join(" "))
            .set("x_edges", fmt_f64_list(&self.x_edges))
            .set("z_edges", fmt_f64_list(&self.z_edges));
        for (name, cells) in &self.regions {
            let list: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
            doc.set(&format!("region.{name}"), list.join(" "));
        }
        for (name, cells) in &self.regions {
            let vol: f64 = cells.iter().map(|&c| self.volume(c)).sum();
            doc.push(format!("region {name} {} {}", cells.len(), fmt_f64(vol)));
        }
        for (m, name) in self.material_names.iter().enumerate() {
            let n = self.cell_material.iter().filter(|&&x| x == m).count();
            doc.push(format!("material {name} {n}"));
        }
        for iz in 0..self.nz() {
            let row: Vec<String> = (0..self.nx())
                .map(|ix| self.cell_material[self.cell(ix, iz)].to_string())
                .collect();
            doc.push(format!("row {iz} {}", row.join(" ")));
        }
        doc
    }

    pub fn hash(&self) -> String {
        self.to_document().hash()
    }
}
