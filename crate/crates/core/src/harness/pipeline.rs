use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::report::{ReportRow, REGIONS};
use crate::detsolver::{self, nonthermal_weights, FixedSource};
use crate::grid::{build_geometry, FluxField, Geometry2D};
use crate::mc::{compute_statistics, run_histories, summarize_region, McProblem, McRun, McSource, RegionSummary, TallyStatistics};
use crate::textio::{content_hash, Document};
use crate::vr::{
    bias_source, build_importance, build_weight_windows, cadis_adjoint_source, fwcadis_adjoint_source,
    resonance_factor_source, write_biased_source, write_importance, write_weight_windows, AdjointMode, BiasedSource,
    ImportanceMap, WeightWindowMap,
};
use crate::xslib::{build_library, fission_group_fractions, LibraryMode, LibraryOptions, MgLibrary};
use crate::{Error, Result};

pub const STAGE_LIBRARIES: &str = "1-libraries";
pub const STAGE_FORWARD: &str = "2-forward";
pub const STAGE_DILUTE: &str = "3-dilute-forward";
pub const STAGE_ADJOINT_SOURCE: &str = "4-adjoint-source";
pub const STAGE_ADJOINT: &str = "5-adjoint";
pub const STAGE_VR: &str = "6-vr";
pub const STAGE_MC: &str = "7-mc";
pub const STAGE_REPORT: &str = "8-report";

pub const FILE_GEOMETRY: &str = "geometry.txt";
pub const FILE_LIB_RES: &str = "library_res.txt";
pub const FILE_LIB_DILUTE: &str = "library_dilute.txt";
pub const FILE_LIB_FINE: &str = "library_fine.txt";
pub const FILE_FLUX_RES: &str = "flux_res.txt";
pub const FILE_FLUX_DILUTE: &str = "flux_dilute.txt";
pub const FILE_ADJOINT_SOURCE: &str = "adjoint_source.txt";
pub const FILE_ADJOINT: &str = "adjoint.txt";
pub const FILE_IMPORTANCE: &str = "importance.txt";
pub const FILE_WINDOWS: &str = "weight_windows.txt";
pub const FILE_BIASED_SOURCE: &str = "biased_source.txt";
pub const FILE_TALLY: &str = "tally.txt";
pub const FILE_REPORT: &str = "report.csv";
pub const FILE_MANIFEST: &str = "manifest.txt";

/// Geometry, the three libraries and the forward source.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub geom: Geometry2D,
    pub geometry_hash: String,
    pub res: MgLibrary,
    pub dilute: MgLibrary,
    pub fine: MgLibrary,
    /// Coarse-group source density with unit total emission.
    pub source: FixedSource,
    pub fine_spectrum: Vec<f64>,
    pub fine_map: Vec<usize>,
}

impl Inputs {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        build_inputs(cfg).map_err(|e| e.in_stage(STAGE_LIBRARIES))
    }
}

fn build_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let geom = checked_geometry(cfg)?;
    let coarse = cfg.groups.coarse()?;
    let fine_groups = cfg.groups.fine()?;
    let spectrum = cfg.spectrum();
    let mut opts = LibraryOptions::new(LibraryMode::Res);
    opts.include_escape = cfg.library.include_escape;
    if let Some(m) = &cfg.library.plate_material {
        let (v, s) = geom.region_box_volume_surface(crate::grid::REGION_PLATE)?;
        opts.chord_overrides.insert(m.clone(), 4.0 * v / s);
    }
    let res = build_library(&cfg.nuclides, &cfg.materials, &coarse, &spectrum, &opts)?;
    opts.mode = LibraryMode::Dilute;
    let dilute = build_library(&cfg.nuclides, &cfg.materials, &coarse, &spectrum, &opts)?;
    opts.mode = LibraryMode::Fine;
    let fine = build_library(&cfg.nuclides, &cfg.materials, &fine_groups, &spectrum, &opts)?;
    Inputs::assemble(cfg, geom, res, dilute, fine)
}

pub(crate) fn checked_geometry(cfg: &RunConfig) -> Result<Geometry2D> {
    let geom = build_geometry(&cfg.geometry)?;
    for name in &geom.material_names {
        if !cfg.materials.iter().any(|m| &m.name == name) {
            return Err(Error::config(format!("geometry uses undefined material `{name}`")));
        }
    }
    Ok(geom)
}

impl Inputs {
    /// Source and group maps for libraries built elsewhere (or read back).
    pub fn assemble(cfg: &RunConfig, geom: Geometry2D, res: MgLibrary, dilute: MgLibrary, fine: MgLibrary) -> Result<Self> {
        if res.groups != dilute.groups {
            return Err(Error::shape("res and dilute libraries use different groups"));
        }
        let coarse = &res.groups;
        let fine_map = fine.groups.coarse_map(coarse)?;
        detsolver::material_map(&res, &geom)?;
        detsolver::material_map(&fine, &geom)?;
        let cells = geom.region(&cfg.source.region)?.to_vec();
        let volume: f64 = cells.iter().map(|&c| geom.volume(c)).sum();
        if !(volume > 0.0) {
            return Err(Error::config(format!("source region `{}` has no volume", cfg.source.region)));
        }
        let chi = fission_group_fractions(coarse, cfg.source.fission_theta_ev);
        let mut source = FixedSource::zeros(geom.n_cells(), coarse.len());
        for &c in &cells {
            for (g, x) in chi.iter().enumerate() {
                source.set(c, g, x / volume);
            }
        }
        let fine_spectrum = fission_group_fractions(&fine.groups, cfg.source.fission_theta_ev);
        let geometry_hash = geom.hash();
        Ok(Inputs {
            geom,
            geometry_hash,
            res,
            dilute,
            fine,
            source,
            fine_spectrum,
            fine_map,
        })
    }
}

/// Forward fluxes from the shielded and (when needed) dilute libraries.
#[derive(Debug, Clone)]
pub struct ForwardFluxes {
    pub res: FluxField,
    pub dilute: Option<FluxField>,
}

impl ForwardFluxes {
    pub fn solve(cfg: &RunConfig, inputs: &Inputs, with_dilute: bool) -> Result<Self> {
        let res = detsolver::solve_forward(&inputs.res, &inputs.geom, &inputs.source, &cfg.solver)
            .map_err(|e| e.in_stage(STAGE_FORWARD))?;
        let dilute = if with_dilute {
            Some(
                detsolver::solve_forward(&inputs.dilute, &inputs.geom, &inputs.source, &cfg.solver)
                    .map_err(|e| e.in_stage(STAGE_DILUTE))?,
            )
        } else {
            None
        };
        Ok(ForwardFluxes { res, dilute })
    }
}

pub fn needs_dilute(cfg: &RunConfig) -> bool {
    cfg.vr.enabled && cfg.vr.adjoint.resonance_factor.enabled && cfg.vr.adjoint.mode != AdjointMode::Cadis
}

/// Adjoint source and its floor/clip accounting.
#[derive(Debug, Clone)]
pub struct AdjointSourceBuild {
    pub source: FixedSource,
    pub floored: usize,
    pub clipped_low: usize,
    pub clipped_high: usize,
}

pub fn adjoint_source(cfg: &RunConfig, inputs: &Inputs, fwd: &ForwardFluxes) -> Result<AdjointSourceBuild> {
    let spec = &cfg.vr.adjoint;
    let build = || -> Result<AdjointSourceBuild> {
        spec.validate()?;
        let weights = spec.response_weights.clone().unwrap_or_else(|| nonthermal_weights(&inputs.res));
        if spec.mode == AdjointMode::Cadis {
            let name = spec.detector_region.as_deref().unwrap_or_default();
            let source = cadis_adjoint_source(&fwd.res, inputs.geom.region(name)?, &weights)?;
            return Ok(AdjointSourceBuild {
                source,
                floored: 0,
                clipped_low: 0,
                clipped_high: 0,
            });
        }
        let base = fwcadis_adjoint_source(&fwd.res, spec.mode, &weights, spec.flux_floor)?;
        let rf = &spec.resonance_factor;
        if !rf.enabled {
            return Ok(AdjointSourceBuild {
                source: base.source,
                floored: base.floored,
                clipped_low: 0,
                clipped_high: 0,
            });
        }
        let dilute = fwd
            .dilute
            .as_ref()
            .ok_or_else(|| Error::invalid("resonance factor needs the dilute forward flux"))?;
        let corrected = resonance_factor_source(
            &fwd.res,
            dilute,
            rf.m,
            &base.source,
            (rf.r_min, rf.r_max),
            spec.flux_floor,
        )?;
        Ok(AdjointSourceBuild {
            source: corrected.source,
            floored: base.floored,
            clipped_low: corrected.clipped_low,
            clipped_high: corrected.clipped_high,
        })
    };
    build().map_err(|e| e.in_stage(STAGE_ADJOINT_SOURCE))
}

/// Everything the Monte Carlo stage needs from the deterministic side.
#[derive(Debug, Clone)]
pub struct VrPlan {
    pub adjoint_source: AdjointSourceBuild,
    pub adjoint: FluxField,
    pub importance: ImportanceMap,
    pub windows: WeightWindowMap,
    pub biased: BiasedSource,
}

pub fn build_vr(cfg: &RunConfig, inputs: &Inputs, fwd: &ForwardFluxes) -> Result<VrPlan> {
    let q_adj = adjoint_source(cfg, inputs, fwd)?;
    let adjoint = detsolver::solve_adjoint(&inputs.res, &inputs.geom, &q_adj.source, &cfg.solver)
        .map_err(|e| e.in_stage(STAGE_ADJOINT))?;
    let (importance, windows, biased) = vr_maps(cfg, inputs, &adjoint)?;
    Ok(VrPlan {
        adjoint_source: q_adj,
        adjoint,
        importance,
        windows,
        biased,
    })
}

/// Importance map, weight windows and biased source from an adjoint flux.
pub fn vr_maps(cfg: &RunConfig, inputs: &Inputs, adjoint: &FluxField) -> Result<(ImportanceMap, WeightWindowMap, BiasedSource)> {
    vr_maps_inner(cfg, inputs, adjoint).map_err(|e| e.in_stage(STAGE_VR))
}

fn vr_maps_inner(cfg: &RunConfig, inputs: &Inputs, adjoint: &FluxField) -> Result<(ImportanceMap, WeightWindowMap, BiasedSource)> {
    let geom = &inputs.geom;
    let mut importance = build_importance(adjoint, &inputs.source, geom)?;
    importance.provenance = vec![
        ("geometry_hash".into(), inputs.geometry_hash.clone()),
        ("library_hash".into(), inputs.res.hash()),
        ("adjoint_hash".into(), adjoint.to_document(&inputs.geometry_hash, &inputs.res.hash()).hash()),
        ("mode".into(), cfg.vr.adjoint.mode.to_string()),
        ("m".into(), crate::textio::fmt_f64(effective_m(cfg))),
    ];
    let windows = build_weight_windows(&importance, &cfg.vr.windows, cfg.vr.adjoint.flux_floor)?
        .with_group_map(inputs.fine_map.clone())?;
    let biased = bias_source(&inputs.source, &adjoint.data, importance.r, geom)?;
    Ok((importance, windows, biased))
}

/// The resonance-factor exponent in effect (0 when the factor is off).
pub fn effective_m(cfg: &RunConfig) -> f64 {
    let rf = &cfg.vr.adjoint.resonance_factor;
    if rf.enabled {
        rf.m
    } else {
        0.0
    }
}

pub fn run_mc(cfg: &RunConfig, inputs: &Inputs, plan: Option<&VrPlan>) -> Result<McRun> {
    run_mc_with(cfg, inputs, plan.map(|p| (&p.windows, &p.biased)))
}

/// Monte Carlo with explicit windows and biased source; analog when `None`.
pub fn run_mc_with(
    cfg: &RunConfig,
    inputs: &Inputs,
    vr: Option<(&WeightWindowMap, &BiasedSource)>,
) -> Result<McRun> {
    let go = || -> Result<McRun> {
        let biased = match vr {
            Some((_, b)) => b.clone(),
            None => BiasedSource::analog(&inputs.source, &inputs.geom)?,
        };
        let source = McSource::new(biased, &inputs.fine_spectrum, &inputs.fine_map)?;
        let problem = McProblem {
            lib: &inputs.fine,
            geom: &inputs.geom,
            source: &source,
            windows: vr.map(|(w, _)| w),
            tally_map: inputs.fine_map.clone(),
            n_tally_groups: inputs.res.n_groups(),
        };
        let mut run = run_histories(&problem, &cfg.mc)?;
        run.tally.provenance = vec![
            ("geometry_hash".into(), inputs.geometry_hash.clone()),
            ("library_hash".into(), inputs.fine.hash()),
            (
                "windows_hash".into(),
                vr.map(|(w, _)| crate::vr::weight_window_document(w, &inputs.geometry_hash).hash())
                    .unwrap_or_else(|| "analog".into()),
            ),
        ];
        Ok(run)
    };
    go().map_err(|e| e.in_stage(STAGE_MC))
}

/// Statistics and region summaries of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub stats: TallyStatistics,
    pub regions: Vec<RegionSummary>,
}

impl RunSummary {
    pub fn region(&self, name: &str) -> Option<&RegionSummary> {
        self.regions.iter().find(|r| r.name == name)
    }
}

pub fn summarize(inputs: &Inputs, run: &McRun) -> Result<RunSummary> {
    let go = || -> Result<RunSummary> {
        let stats = compute_statistics(&run.tally)?;
        let mut regions = Vec::new();
        for name in REGIONS {
            let cells = if name == "global" {
                inputs.geom.all_cells()
            } else {
                inputs.geom.region(name)?.to_vec()
            };
            regions.push(summarize_region(&run.tally, &stats, name, &cells));
        }
        Ok(RunSummary { stats, regions })
    };
    go().map_err(|e| e.in_stage(STAGE_REPORT))
}

/// Complete result of one pipeline execution.
#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub dir: PathBuf,
    pub plan: Option<VrPlan>,
    pub run: McRun,
    pub summary: RunSummary,
    /// One row per summarized region.
    pub rows: Vec<ReportRow>,
    /// File name to content hash of every artifact written.
    pub hashes: BTreeMap<String, String>,
}

/// Runs every stage from the configuration and writes all artifacts.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineResult> {
    let inputs = Inputs::build(cfg)?;
    let fwd = ForwardFluxes::solve(cfg, &inputs, needs_dilute(cfg))?;
    run_pipeline_with(cfg, &inputs, &fwd, &cfg.output_dir, true)
}

/// Runs stages 4-8 on already built inputs and forward fluxes. Without
/// `write_shared` only the geometry echo and the stage 4-8 artifacts are
/// written to `dir`.
pub fn run_pipeline_with(
    cfg: &RunConfig,
    inputs: &Inputs,
    fwd: &ForwardFluxes,
    dir: &Path,
    write_shared: bool,
) -> Result<PipelineResult> {
    let mut art = Artifacts::create(dir)?;
    if write_shared {
        art.write_inputs(inputs)?;
        art.write_forward(inputs, fwd)?;
    } else {
        art.write_geometry(inputs)?;
    }
    let plan = if cfg.vr.enabled {
        let plan = build_vr(cfg, inputs, fwd)?;
        art.write_vr(inputs, &plan)?;
        Some(plan)
    } else {
        None
    };
    let run = run_mc(cfg, inputs, plan.as_ref())?;
    let summary = summarize(inputs, &run)?;
    let rows = ReportRow::from_summary(&row_label(cfg), effective_m(cfg), run.tally.cpu_hours(), &summary);
    art.write_results(&run, &summary, &rows)?;
    art.write_manifest(cfg)?;
    Ok(PipelineResult {
        dir: dir.to_path_buf(),
        plan,
        run,
        summary,
        rows,
        hashes: art.hashes,
    })
}

pub fn row_label(cfg: &RunConfig) -> String {
    if !cfg.vr.enabled {
        return "analog".into();
    }
    match cfg.vr.adjoint.mode {
        AdjointMode::Cadis => "cadis".into(),
        _ if cfg.vr.adjoint.resonance_factor.enabled => format!("resfac_m{}", cfg.vr.adjoint.resonance_factor.m),
        _ => "fwcadis".into(),
    }
}

/// Output directory writer that remembers every file hash.
pub struct Artifacts {
    pub dir: PathBuf,
    pub hashes: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            hashes: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str, hash: String) {
        self.hashes.insert(name.to_string(), hash);
    }

    pub fn write_geometry(&mut self, inputs: &Inputs) -> Result<()> {
        let h = inputs.geom.to_document().write_to(&self.path(FILE_GEOMETRY))?;
        self.record(FILE_GEOMETRY, h);
        Ok(())
    }

    pub fn write_inputs(&mut self, inputs: &Inputs) -> Result<()> {
        self.write_geometry(inputs)?;
        for (name, lib) in [(FILE_LIB_RES, &inputs.res), (FILE_LIB_DILUTE, &inputs.dilute), (FILE_LIB_FINE, &inputs.fine)] {
            let h = lib.to_document().write_to(&self.path(name))?;
            self.record(name, h);
        }
        Ok(())
    }

    pub fn write_forward(&mut self, inputs: &Inputs, fwd: &ForwardFluxes) -> Result<()> {
        let g = &inputs.geometry_hash;
        let h = fwd.res.write(&self.path(FILE_FLUX_RES), g, &inputs.res.hash())?;
        self.record(FILE_FLUX_RES, h);
        if let Some(d) = &fwd.dilute {
            let h = d.write(&self.path(FILE_FLUX_DILUTE), g, &inputs.dilute.hash())?;
            self.record(FILE_FLUX_DILUTE, h);
        }
        Ok(())
    }

    pub fn write_vr(&mut self, inputs: &Inputs, plan: &VrPlan) -> Result<()> {
        self.write_adjoint(inputs, &plan.adjoint_source, &plan.adjoint)?;
        self.write_vr_maps(inputs, &plan.importance, &plan.windows, &plan.biased)
    }

    pub fn write_adjoint(&mut self, inputs: &Inputs, q: &AdjointSourceBuild, adjoint: &FluxField) -> Result<()> {
        let g = &inputs.geometry_hash;
        let lib = inputs.res.hash();
        let src = FluxField {
            kind: crate::grid::FluxKind::Adjoint,
            data: q.source.clone(),
            iterations: 0,
            residual: 0.0,
        };
        let mut doc = src.to_document(g, &lib);
        doc.kind = "adjoint_source".into();
        doc.set("floored", q.floored)
            .set("clipped_low", q.clipped_low)
            .set("clipped_high", q.clipped_high);
        let h = doc.write_to(&self.path(FILE_ADJOINT_SOURCE))?;
        self.record(FILE_ADJOINT_SOURCE, h);
        let h = adjoint.write(&self.path(FILE_ADJOINT), g, &lib)?;
        self.record(FILE_ADJOINT, h);
        Ok(())
    }

    pub fn write_vr_maps(
        &mut self,
        inputs: &Inputs,
        importance: &ImportanceMap,
        windows: &WeightWindowMap,
        biased: &BiasedSource,
    ) -> Result<()> {
        let g = &inputs.geometry_hash;
        let h = write_importance(importance, &self.path(FILE_IMPORTANCE))?;
        self.record(FILE_IMPORTANCE, h);
        let h = write_weight_windows(windows, g, &self.path(FILE_WINDOWS))?;
        self.record(FILE_WINDOWS, h);
        let h = write_biased_source(biased, g, &self.path(FILE_BIASED_SOURCE))?;
        self.record(FILE_BIASED_SOURCE, h);
        Ok(())
    }

    pub fn write_results(&mut self, run: &McRun, summary: &RunSummary, rows: &[ReportRow]) -> Result<()> {
        let h = run.tally.write(&self.path(FILE_TALLY), &summary.regions)?;
        self.record(FILE_TALLY, h);
        let csv = super::report::rows_csv(rows);
        write_text(&self.path(FILE_REPORT), &csv)?;
        self.record(FILE_REPORT, content_hash(&csv));
        Ok(())
    }

    /// Lists every artifact with its hash. The report is left out because it
    /// carries measured CPU time.
    pub fn write_manifest(&mut self, cfg: &RunConfig) -> Result<()> {
        self.write_manifest_with(cfg, false)
    }

    /// With `merge`, entries of an existing manifest that this writer did not
    /// touch are kept (stage-by-stage runs).
    pub fn write_manifest_with(&mut self, cfg: &RunConfig, merge: bool) -> Result<()> {
        if merge && self.path(FILE_MANIFEST).exists() {
            for (name, h) in super::report::read_manifest(&self.dir)? {
                self.hashes.entry(name).or_insert(h);
            }
        }
        // Where a run is written does not change what it computes.
        let mut hashed = cfg.clone();
        hashed.output_dir = PathBuf::new();
        let mut doc = Document::new("manifest");
        doc.set("tag", &cfg.tag).set("config_hash", content_hash(&hashed.to_toml()?));
        for (name, h) in &self.hashes {
            if name != FILE_REPORT {
                doc.push(format!("{name} {h}"));
            }
        }
        doc.write_to(&self.path(FILE_MANIFEST))?;
        Ok(())
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
