use std::path::Path;

use crate::textio::{fmt_f64, fmt_f64_list, parse_f64_list, Document};
use crate::{Error, Result};

/// Dense cell×group array, cell-major: `values[c * n_groups + g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGroupData {
    pub n_cells: usize,
    pub n_groups: usize,
    pub values: Vec<f64>,
}

impl CellGroupData {
    pub fn zeros(n_cells: usize, n_groups: usize) -> Self {
        CellGroupData {
            n_cells,
            n_groups,
            values: vec![0.0; n_cells * n_groups],
        }
    }

    pub fn from_values(n_cells: usize, n_groups: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_cells * n_groups {
            return Err(Error::shape(format!(
                "expected {} values for {n_cells} cells x {n_groups} groups, got {}",
                n_cells * n_groups,
                values.len()
            )));
        }
        Ok(CellGroupData {
            n_cells,
            n_groups,
            values,
        })
    }

    #[inline]
    pub fn get(&self, c: usize, g: usize) -> f64 {
        self.values[c * self.n_groups + g]
    }

    #[inline]
    pub fn set(&mut self, c: usize, g: usize, v: f64) {
        self.values[c * self.n_groups + g] = v;
    }

    #[inline]
    pub fn add(&mut self, c: usize, g: usize, v: f64) {
        self.values[c * self.n_groups + g] += v;
    }

    pub fn cell(&self, c: usize) -> &[f64] {
        &self.values[c * self.n_groups..(c + 1) * self.n_groups]
    }

    pub fn check_shape(&self, n_cells: usize, n_groups: usize, what: &str) -> Result<()> {
        if self.n_cells != n_cells || self.n_groups != n_groups {
            return Err(Error::shape(format!(
                "{what}: expected {n_cells} cells x {n_groups} groups, got {} x {}",
                self.n_cells, self.n_groups
            )));
        }
        Ok(())
    }

    /// Sum over groups for each cell.
    pub fn cell_totals(&self) -> Vec<f64> {
        (0..self.n_cells).map(|c| self.cell(c).iter().sum()).collect()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Collapses groups through `map[fine] = coarse`.
    pub fn collapse(&self, map: &[usize], n_coarse: usize) -> Result<Self> {
        if map.len() != self.n_groups || map.iter().any(|&k| k >= n_coarse) {
            return Err(Error::shape("group map does not match the data"));
        }
        let mut out = CellGroupData::zeros(self.n_cells, n_coarse);
        for c in 0..self.n_cells {
            for (g, &k) in map.iter().enumerate() {
                out.add(c, k, self.get(c, g));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxKind {
    Forward,
    Adjoint,
}

impl FluxKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FluxKind::Forward => "forward",
            FluxKind::Adjoint => "adjoint",
        }
    }
}

/// Scalar flux from a deterministic solve together with its convergence record.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub kind: FluxKind,
    pub data: CellGroupData,
    pub iterations: usize,
    pub residual: f64,
}

impl FluxField {
    #[inline]
    pub fn get(&self, c: usize, g: usize) -> f64 {
        self.data.get(c, g)
    }

    pub fn n_cells(&self) -> usize {
        self.data.n_cells
    }

    pub fn n_groups(&self) -> usize {
        self.data.n_groups
    }

    /// Serializes with the hashes of the geometry and library it was solved on.
    pub fn to_document(&self, geometry_hash: &str, library_hash: &str) -> Document {
        let mut doc = Document::new("flux");
        doc.set("kind", self.kind.as_str())
            .set("cells", self.data.n_cells)
            .set("groups", self.data.n_groups)
            .set("iterations", self.iterations)
            .set("residual", fmt_f64(self.residual))
            .set("geometry_hash", geometry_hash)
            .set("library_hash", library_hash);
        for c in 0..self.data.n_cells {
            doc.push(format!("{c} {}", fmt_f64_list(self.data.cell(c))));
        }
        doc
    }

    pub fn write(&self, path: &Path, geometry_hash: &str, library_hash: &str) -> Result<String> {
        self.to_document(geometry_hash, library_hash).write_to(path)
    }

    /// Parses a flux document. Returns the field and its (geometry, library) hashes.
    pub fn from_document(doc: &Document) -> Result<(Self, String, String)> {
        let kind = match doc.get("kind")? {
            "forward" => FluxKind::Forward,
            "adjoint" => FluxKind::Adjoint,
            other => return Err(Error::parse("flux", format!("unknown kind `{other}`"))),
        };
        let n_cells: usize = doc.get_num("cells")?;
        let n_groups: usize = doc.get_num("groups")?;
        if doc.records.len() != n_cells {
            return Err(Error::parse("flux", "record count does not match cell count"));
        }
        let mut values = Vec::with_capacity(n_cells * n_groups);
        for (c, rec) in doc.records.iter().enumerate() {
            let (idx, rest) = rec.split_once(' ').unwrap_or((rec, ""));
            if idx != c.to_string() {
                return Err(Error::parse("flux", format!("records out of order at cell {c}")));
            }
            let row = parse_f64_list(rest, "flux")?;
            if row.len() != n_groups {
                return Err(Error::parse("flux", format!("cell {c} has {} groups", row.len())));
            }
            values.extend(row);
        }
        let field = FluxField {
            kind,
            data: CellGroupData::from_values(n_cells, n_groups, values)?,
            iterations: doc.get_num("iterations")?,
            residual: doc.get_num("residual")?,
        };
        Ok((
            field,
            doc.get("geometry_hash")?.to_string(),
            doc.get("library_hash")?.to_string(),
        ))
    }

    pub fn read(path: &Path) -> Result<(Self, String, String)> {
        Self::from_document(&Document::read_from(path, "flux")?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_round_trip() {
        let vals: Vec<f64> = (0..12).map(|i| 1.0 / (i as f64 + 3.0)).collect();
        let f = FluxField {
            kind: FluxKind::Adjoint,
            data: CellGroupData::from_values(4, 3, vals).unwrap(),
            iterations: 17,
            residual: 3.2e-6,
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("phi.txt");
        f.write(&p, "aaaa", "bbbb").unwrap();
        let (back, gh, lh) = FluxField::read(&p).unwrap();
        assert_eq!(back, f);
        assert_eq!((gh.as_str(), lh.as_str()), ("aaaa", "bbbb"));
    }

    #[test]
    fn shape_mismatch() {
        assert!(CellGroupData::from_values(2, 3, vec![0.0; 5]).is_err());
        let d = CellGroupData::zeros(2, 3);
        assert!(d.check_shape(2, 4, "x").is_err());
    }

    #[test]
    fn collapse_sums_groups() {
        let d = CellGroupData::from_values(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = d.collapse(&[0, 0, 1, 1], 2).unwrap();
        assert_eq!(c.values, vec![3.0, 7.0]);
    }
}
