//! Run configuration, the staged pipeline, M sweeps and comparison reports.

mod config;
mod pipeline;
mod report;
mod stages;
mod sweep;

pub use config::{
    benchmark_materials, benchmark_nuclides, GroupConfig, LibraryConfig, RunConfig, SourceConfig, SpectrumConfig,
    VrConfig,
};
pub use pipeline::*;
pub use report::{
    compare_cases, parse_rows_csv, rank, rank_csv, read_manifest, read_tally, rows_csv, Comparison, Metric,
    ReportRow, TallyReadback, RANK_HEADER, REGIONS, ROW_HEADER,
};
pub use stages::{stage_adjoint, stage_build_vr, stage_forward, stage_mc, stage_xsgen};
pub use sweep::{sweep_m, SweepFailure, SweepResult};
