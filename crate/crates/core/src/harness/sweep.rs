use std::path::PathBuf;

use super::config::RunConfig;
use super::pipeline::{run_pipeline_with, write_text, Artifacts, ForwardFluxes, Inputs, PipelineResult};
use super::report::{rank_csv, rows_csv, ReportRow};
use crate::textio::fmt_f64;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub m: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Rows of every successful M, sorted by M.
    pub rows: Vec<ReportRow>,
    pub failures: Vec<SweepFailure>,
    pub runs: Vec<(f64, PipelineResult)>,
    pub dir: PathBuf,
}

impl SweepResult {
    pub fn rows_for(&self, region: &str) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.region == region).collect()
    }
}

pub fn m_dir_name(m: f64) -> String {
    format!("m_{}", fmt_f64(m))
}

/// One resonance-factor pipeline per M. Libraries and both forward fluxes
/// are built once; each M gets its own adjoint solve and Monte Carlo run.
pub fn sweep_m(cfg: &RunConfig, ms: &[f64]) -> Result<SweepResult> {
    if ms.is_empty() {
        return Err(Error::config("M list is empty"));
    }
    if let Some(m) = ms.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
        return Err(Error::config(format!("M must be finite and >= 0, got {m}")));
    }
    let mut ms = ms.to_vec();
    ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ms.dedup();

    let mut base = cfg.clone();
    base.vr.enabled = true;
    base.vr.adjoint.resonance_factor.enabled = true;
    let inputs = Inputs::build(&base)?;
    let fwd = ForwardFluxes::solve(&base, &inputs, true)?;
    let mut shared = Artifacts::create(&cfg.output_dir)?;
    shared.write_inputs(&inputs)?;
    shared.write_forward(&inputs, &fwd)?;
    shared.write_manifest(&base)?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut runs = Vec::new();
    for &m in &ms {
        let mut c = base.clone();
        c.vr.adjoint.resonance_factor.m = m;
        let dir = cfg.output_dir.join(m_dir_name(m));
        c.output_dir = dir.clone();
        match run_pipeline_with(&c, &inputs, &fwd, &dir, false) {
            Ok(r) => {
                rows.extend(r.rows.iter().cloned());
                runs.push((m, r));
            }
            Err(e) => failures.push(SweepFailure {
                m,
                message: e.to_string(),
            }),
        }
    }
    write_text(&cfg.output_dir.join("sweep.csv"), &rows_csv(&rows))?;
    write_text(&cfg.output_dir.join("ranks.csv"), &rank_csv(&rows))?;
    let mut fail = String::from("m,message\n");
    for f in &failures {
        fail.push_str(&format!("{},\"{}\"\n", fmt_f64(f.m), f.message.replace('"', "'")));
    }
    write_text(&cfg.output_dir.join("failures.csv"), &fail)?;
    Ok(SweepResult {
        rows,
        failures,
        runs,
        dir: cfg.output_dir.clone(),
    })
}
