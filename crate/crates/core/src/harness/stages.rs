//! Single pipeline stages that read their inputs back from a run directory
//! and refuse artifacts produced from different upstream data.

use std::collections::BTreeMap;

use super::config::RunConfig;
use super::pipeline::*;
use super::report::ReportRow;
use crate::detsolver;
use crate::grid::FluxField;
use crate::textio::Document;
use crate::vr::{read_biased_source, read_weight_windows};
use crate::xslib::MgLibrary;
use crate::{Error, Result};

fn expect_hash(what: &str, expected: &str, found: &str) -> Result<()> {
    if expected != found {
        return Err(Error::HashMismatch {
            what: what.to_string(),
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn read_library(art: &Artifacts, name: &str) -> Result<MgLibrary> {
    MgLibrary::from_document(&Document::read_from(&art.path(name), "library")?)
}

/// Geometry from the config, libraries from disk; the stored geometry must
/// match the config.
fn load_inputs(cfg: &RunConfig, art: &Artifacts) -> Result<Inputs> {
    let geom = checked_geometry(cfg)?;
    let stored = Document::read_from(&art.path(FILE_GEOMETRY), "geometry")?;
    expect_hash(FILE_GEOMETRY, &geom.hash(), &stored.hash())?;
    let res = read_library(art, FILE_LIB_RES)?;
    let dilute = read_library(art, FILE_LIB_DILUTE)?;
    let fine = read_library(art, FILE_LIB_FINE)?;
    Inputs::assemble(cfg, geom, res, dilute, fine)
}

fn read_flux(art: &Artifacts, name: &str, inputs: &Inputs, lib: &MgLibrary) -> Result<FluxField> {
    let (flux, g, l) = FluxField::read(&art.path(name))?;
    expect_hash(&format!("{name} geometry"), &inputs.geometry_hash, &g)?;
    expect_hash(&format!("{name} library"), &lib.hash(), &l)?;
    Ok(flux)
}

fn finish(mut art: Artifacts, cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    art.write_manifest_with(cfg, true)?;
    Ok(art.hashes)
}

/// Stage 1: geometry echo and the three libraries.
pub fn stage_xsgen(cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    let inputs = Inputs::build(cfg)?;
    let mut art = Artifacts::create(&cfg.output_dir)?;
    art.write_inputs(&inputs).map_err(|e| e.in_stage(STAGE_LIBRARIES))?;
    finish(art, cfg)
}

/// Stages 2-3: forward fluxes.
pub fn stage_forward(cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    let mut art = Artifacts::create(&cfg.output_dir)?;
    let inputs = load_inputs(cfg, &art).map_err(|e| e.in_stage(STAGE_FORWARD))?;
    let fwd = ForwardFluxes::solve(cfg, &inputs, needs_dilute(cfg))?;
    art.write_forward(&inputs, &fwd).map_err(|e| e.in_stage(STAGE_FORWARD))?;
    finish(art, cfg)
}

/// Stages 4-5: adjoint source and adjoint flux.
pub fn stage_adjoint(cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    let mut art = Artifacts::create(&cfg.output_dir)?;
    let load = || -> Result<(Inputs, ForwardFluxes)> {
        let inputs = load_inputs(cfg, &art)?;
        let res = read_flux(&art, FILE_FLUX_RES, &inputs, &inputs.res)?;
        let dilute = if needs_dilute(cfg) {
            Some(read_flux(&art, FILE_FLUX_DILUTE, &inputs, &inputs.dilute)?)
        } else {
            None
        };
        Ok((inputs, ForwardFluxes { res, dilute }))
    };
    let (inputs, fwd) = load().map_err(|e| e.in_stage(STAGE_ADJOINT_SOURCE))?;
    let q = adjoint_source(cfg, &inputs, &fwd)?;
    let adjoint = detsolver::solve_adjoint(&inputs.res, &inputs.geom, &q.source, &cfg.solver)
        .map_err(|e| e.in_stage(STAGE_ADJOINT))?;
    art.write_adjoint(&inputs, &q, &adjoint).map_err(|e| e.in_stage(STAGE_ADJOINT))?;
    finish(art, cfg)
}

/// Stage 6: importance map, weight windows, biased source.
pub fn stage_build_vr(cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    let mut art = Artifacts::create(&cfg.output_dir)?;
    let load = || -> Result<(Inputs, FluxField)> {
        let inputs = load_inputs(cfg, &art)?;
        let adjoint = read_flux(&art, FILE_ADJOINT, &inputs, &inputs.res)?;
        Ok((inputs, adjoint))
    };
    let (inputs, adjoint) = load().map_err(|e| e.in_stage(STAGE_VR))?;
    let (imp, ww, biased) = vr_maps(cfg, &inputs, &adjoint)?;
    art.write_vr_maps(&inputs, &imp, &ww, &biased).map_err(|e| e.in_stage(STAGE_VR))?;
    finish(art, cfg)
}

/// Stages 7-8: Monte Carlo with the stored windows (or analog) and reports.
pub fn stage_mc(cfg: &RunConfig) -> Result<BTreeMap<String, String>> {
    let mut art = Artifacts::create(&cfg.output_dir)?;
    let load = || -> Result<(Inputs, Option<VrPlanParts>)> {
        let inputs = load_inputs(cfg, &art)?;
        if !cfg.vr.enabled {
            return Ok((inputs, None));
        }
        let (ww, g1) = read_weight_windows(&art.path(FILE_WINDOWS))?;
        expect_hash("weight window geometry", &inputs.geometry_hash, &g1)?;
        let (biased, g2) = read_biased_source(&art.path(FILE_BIASED_SOURCE))?;
        expect_hash("biased source geometry", &inputs.geometry_hash, &g2)?;
        Ok((inputs, Some((ww, biased))))
    };
    let (inputs, parts) = load().map_err(|e| e.in_stage(STAGE_MC))?;
    let run = run_mc_with(cfg, &inputs, parts.as_ref().map(|(w, b)| (w, b)))?;
    let summary = summarize(&inputs, &run)?;
    let rows = ReportRow::from_summary(&row_label(cfg), effective_m(cfg), run.tally.cpu_hours(), &summary);
    art.write_results(&run, &summary, &rows).map_err(|e| e.in_stage(STAGE_REPORT))?;
    finish(art, cfg)
}

type VrPlanParts = (crate::vr::WeightWindowMap, crate::vr::BiasedSource);
