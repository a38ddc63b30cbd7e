//! Multigroup 2-D discrete-ordinates solver: diamond difference, source
//! iteration, isotropic scattering, forward and adjoint.

mod sweep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{
    build_quadrature, Boundary, CellGroupData, FluxField, FluxKind, Geometry2D, Ordinate,
};
use crate::xslib::MgLibrary;
use crate::{Error, Result};

use sweep::sweep_ordinate;

/// Relative-change floor for void or unreached cells.
pub const FLUX_FLOOR: f64 = 1e-30;

/// Per cell×group emission density (forward) or adjoint source.
pub type FixedSource = CellGroupData;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub n_polar: usize,
    pub n_azim: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: 1e-5,
            max_iterations: 2000,
            n_polar: 4,
            n_azim: 8,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::config(format!(
                "solver tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Full record of a solve: flux plus per-group residual histories and the
/// global particle balance (per cm of y).
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub flux: FluxField,
    pub residual_history: Vec<Vec<f64>>,
    pub source: f64,
    pub absorption: f64,
    pub leakage: f64,
    pub fixups: usize,
}

impl SolveReport {
    /// |leakage + absorption − source| / source.
    pub fn balance_error(&self) -> f64 {
        if self.source == 0.0 {
            return 0.0;
        }
        (self.leakage + self.absorption - self.source).abs() / self.source
    }
}

pub fn solve_forward(
    lib: &MgLibrary,
    geom: &Geometry2D,
    q: &FixedSource,
    settings: &SolverSettings,
) -> Result<FluxField> {
    Ok(solve(lib, geom, q, settings, FluxKind::Forward)?.flux)
}

pub fn solve_adjoint(
    lib: &MgLibrary,
    geom: &Geometry2D,
    q_adj: &FixedSource,
    settings: &SolverSettings,
) -> Result<FluxField> {
    Ok(solve(lib, geom, q_adj, settings, FluxKind::Adjoint)?.flux)
}

/// Maps every geometry material to its library index.
pub fn material_map(lib: &MgLibrary, geom: &Geometry2D) -> Result<Vec<usize>> {
    let ids: Vec<usize> = geom
        .material_names
        .iter()
        .map(|m| lib.material_index(m))
        .collect::<Result<_>>()?;
    Ok(geom.cell_material.iter().map(|&m| ids[m]).collect())
}

fn mirror_index(ords: &[Ordinate], flip_mu: bool) -> Vec<usize> {
    ords.iter()
        .map(|o| {
            let (mu, xi) = if flip_mu { (-o.mu, o.xi) } else { (o.mu, -o.xi) };
            ords.iter()
                .position(|p| {
                    (p.mu - mu).abs() < 1e-12 && (p.xi - xi).abs() < 1e-12 && (p.eta - o.eta).abs() < 1e-12
                })
                .expect("quadrature is reflection-symmetric")
        })
        .collect()
}

/// Forward or adjoint solve with full diagnostics.
pub fn solve(
    lib: &MgLibrary,
    geom: &Geometry2D,
    q: &FixedSource,
    settings: &SolverSettings,
    kind: FluxKind,
) -> Result<SolveReport> {
    settings.validate()?;
    let n_groups = lib.n_groups();
    let n_cells = geom.n_cells();
    q.check_shape(n_cells, n_groups, "fixed source")?;
    if q.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("fixed source must be finite and non-negative"));
    }
    let mats = material_map(lib, geom)?;
    let quad = build_quadrature(settings.n_polar, settings.n_azim)?;
    let ords = quad.upper_hemisphere();
    let mirror_x = mirror_index(&ords, true);
    let mirror_z = mirror_index(&ords, false);
    let nx = geom.nx();
    let nz = geom.nz();
    let vol = geom.volumes();

    let mut phi = CellGroupData::zeros(n_cells, n_groups);
    let mut histories = vec![Vec::new(); n_groups];
    let mut fixups = 0;
    let mut leakage = 0.0;

    let order: Vec<usize> = match kind {
        FluxKind::Forward => (0..n_groups).collect(),
        FluxKind::Adjoint => (0..n_groups).rev().collect(),
    };
    let xfer = |m: usize, from: usize, to: usize| -> f64 {
        let xs = &lib.materials[m];
        match kind {
            FluxKind::Forward => xs.transfer[from * n_groups + to],
            FluxKind::Adjoint => xs.transfer[to * n_groups + from],
        }
    };

    for &g in &order {
        let sigma_t: Vec<f64> = mats.iter().map(|&m| lib.materials[m].total[g]).collect();
        let self_scatter: Vec<f64> = mats.iter().map(|&m| xfer(m, g, g)).collect();
        let mut external: Vec<f64> = (0..n_cells).map(|c| q.get(c, g)).collect();
        for &gp in order.iter().take_while(|&&gp| gp != g) {
            for c in 0..n_cells {
                let s = xfer(mats[c], gp, g);
                if s != 0.0 {
                    external[c] += s * phi.get(c, gp);
                }
            }
        }
        let mut phi_g = vec![0.0; n_cells];
        if external.iter().all(|&v| v == 0.0) {
            histories[g].push(0.0);
            continue;
        }
        let mut x_store = vec![vec![0.0; nz]; ords.len()];
        let mut z_store = vec![vec![0.0; nx]; ords.len()];
        let mut converged = false;
        let mut residual = f64::INFINITY;
        let mut group_fixups = 0;
        for _ in 0..settings.max_iterations {
            let src: Vec<f64> = (0..n_cells)
                .map(|c| external[c] + self_scatter[c] * phi_g[c])
                .collect();
            let results: Vec<_> = ords
                .par_iter()
                .enumerate()
                .map(|(k, o)| {
                    let x_in = match geom.x_boundary {
                        Boundary::Vacuum => vec![0.0; nz],
                        Boundary::Reflective => x_store[mirror_x[k]].clone(),
                    };
                    let z_in = match geom.z_boundary {
                        Boundary::Vacuum => vec![0.0; nx],
                        Boundary::Reflective => z_store[mirror_z[k]].clone(),
                    };
                    sweep_ordinate(geom, o, &sigma_t, &src, &x_in, &z_in)
                })
                .collect();
            let mut new_phi = vec![0.0; n_cells];
            group_fixups = 0;
            for (k, r) in results.into_iter().enumerate() {
                let w = ords[k].weight;
                for (acc, p) in new_phi.iter_mut().zip(&r.psi) {
                    *acc += w * p;
                }
                group_fixups += r.fixups;
                x_store[k] = r.x_out;
                z_store[k] = r.z_out;
            }
            residual = new_phi
                .iter()
                .zip(&phi_g)
                .map(|(n, o)| (n - o).abs() / n.max(FLUX_FLOOR))
                .fold(0.0, f64::max);
            histories[g].push(residual);
            phi_g = new_phi;
            if residual < settings.tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotConverged {
                iterations: settings.max_iterations,
                residual,
            });
        }
        fixups += group_fixups;
        for (k, o) in ords.iter().enumerate() {
            if geom.x_boundary == Boundary::Vacuum {
                leakage += o.weight
                    * o.mu.abs()
                    * (0..nz).map(|iz| x_store[k][iz] * geom.dz(iz)).sum::<f64>();
            }
            if geom.z_boundary == Boundary::Vacuum {
                leakage += o.weight
                    * o.xi.abs()
                    * (0..nx).map(|ix| z_store[k][ix] * geom.dx(ix)).sum::<f64>();
            }
        }
        for c in 0..n_cells {
            phi.set(c, g, phi_g[c]);
        }
    }

    let mut source = 0.0;
    let mut absorption = 0.0;
    for c in 0..n_cells {
        let xs = &lib.materials[mats[c]];
        for g in 0..n_groups {
            source += q.get(c, g) * vol[c];
            absorption += xs.absorb[g] * phi.get(c, g) * vol[c];
        }
    }
    let iterations = histories.iter().map(|h| h.len()).max().unwrap_or(0);
    let final_residual = histories
        .iter()
        .filter_map(|h| h.last().copied())
        .fold(0.0, f64::max);
    Ok(SolveReport {
        flux: FluxField {
            kind,
            data: phi,
            iterations,
            residual: final_residual,
        },
        residual_history: histories,
        source,
        absorption,
        leakage,
        fixups,
    })
}

/// Volume-weighted inner product Σ_c Σ_g a·b·V_c, summed cell-major.
pub fn inner_product(a: &CellGroupData, b: &CellGroupData, geom: &Geometry2D) -> Result<f64> {
    b.check_shape(a.n_cells, a.n_groups, "inner product")?;
    if a.n_cells != geom.n_cells() {
        return Err(Error::shape("inner product fields do not match the mesh"));
    }
    let mut total = 0.0;
    for c in 0..a.n_cells {
        let v = geom.volume(c);
        let mut cell = 0.0;
        for (x, y) in a.cell(c).iter().zip(b.cell(c)) {
            cell += x * y;
        }
        total += cell * v;
    }
    Ok(total)
}

/// R = Σ_{c∈region} Σ_g w_g φ V.
pub fn response(flux: &CellGroupData, weights: &[f64], region: &[usize], geom: &Geometry2D) -> Result<f64> {
    if region.is_empty() {
        return Err(Error::invalid("response region is empty"));
    }
    if weights.len() != flux.n_groups {
        return Err(Error::shape("response weights do not match the group count"));
    }
    let mut total = 0.0;
    for &c in region {
        if c >= flux.n_cells {
            return Err(Error::shape(format!("region cell {c} outside the mesh")));
        }
        let s: f64 = flux.cell(c).iter().zip(weights).map(|(p, w)| p * w).sum();
        total += s * geom.volume(c);
    }
    Ok(total)
}

/// 1 above the thermal cutoff, 0 for the thermal group.
pub fn nonthermal_weights(lib: &MgLibrary) -> Vec<f64> {
    (0..lib.n_groups())
        .map(|g| if lib.groups.is_thermal(g) { 0.0 } else { 1.0 })
        .collect()
}

#[cfg(test)]
mod tests;
