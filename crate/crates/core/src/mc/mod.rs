//! Fine-group Monte Carlo transport with weight windows, track-length mesh
//! tallies and history-based statistics.

mod rng;
mod tally;
mod transport;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detsolver::material_map;
use crate::grid::Geometry2D;
use crate::vr::WeightWindowMap;
use crate::xslib::MgLibrary;
use crate::{Error, Result};

pub use rng::{RngStream, StreamPurpose};
pub use tally::{
    compute_statistics, figure_of_merit, fmt_fom, summarize_region, RegionSummary, TallySet,
    TallyStatistics, CI95,
};
pub use transport::{
    isotropic_direction, weight_window_check, EventCounts, GroupPhysics, McSource, Particle,
    WwAction,
};

use tally::Accumulator;
use transport::Transport;

fn default_batch() -> u64 {
    10_000
}

fn default_max_split() -> u32 {
    1000
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub histories: u64,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Histories per batch; batches are merged in index order, which makes
    /// the result independent of the worker count.
    #[serde(default = "default_batch")]
    pub batch_size: u64,
    #[serde(default = "default_max_split")]
    pub max_split: u32,
}

impl McSettings {
    pub fn new(histories: u64, seed: u64) -> Self {
        McSettings {
            histories,
            seed,
            workers: default_workers(),
            batch_size: default_batch(),
            max_split: default_max_split(),
        }
    }
}

/// Inputs of a Monte Carlo run. `tally_map[fine] = tally group`.
pub struct McProblem<'a> {
    pub lib: &'a MgLibrary,
    pub geom: &'a Geometry2D,
    pub source: &'a McSource,
    pub windows: Option<&'a WeightWindowMap>,
    pub tally_map: Vec<usize>,
    pub n_tally_groups: usize,
}

/// Result of a run: tallies plus deterministic event counts.
#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub tally: TallySet,
    pub events: EventCounts,
}

fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: clock_gettime writes into the provided timespec only.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

pub fn run_histories(problem: &McProblem, settings: &McSettings) -> Result<McRun> {
    if settings.histories == 0 {
        return Err(Error::invalid("Monte Carlo run needs at least one history"));
    }
    if settings.batch_size == 0 || settings.workers == 0 {
        return Err(Error::config("batch size and worker count must be positive"));
    }
    let geom = problem.geom;
    let lib = problem.lib;
    let n_cells = geom.n_cells();
    let n_fine = lib.n_groups();
    if problem.tally_map.len() != n_fine || problem.tally_map.iter().any(|&g| g >= problem.n_tally_groups) {
        return Err(Error::shape("tally group map does not match the transport groups"));
    }
    let src = &problem.source.biased;
    if src.n_cells != n_cells {
        return Err(Error::shape("source does not match the mesh"));
    }
    if let Some(ww) = problem.windows {
        if ww.n_cells != n_cells || ww.group_map.len() != n_fine {
            return Err(Error::shape("weight windows do not match the mesh or groups"));
        }
        for (k, &(c, _)) in src.entries.iter().enumerate() {
            let covered = problem
                .tally_map
                .iter()
                .enumerate()
                .any(|(g, _)| ww.window(c, g).is_some());
            if !covered && src.probability[k] > 0.0 {
                return Err(Error::invalid(format!("source cell {c} has no enabled weight window")));
            }
        }
    }
    let cell_material = material_map(lib, geom)?;
    let transport = Transport {
        geom,
        physics: GroupPhysics::new(lib)?,
        cell_material,
        inv_volume: geom.volumes().iter().map(|v| 1.0 / v).collect(),
        source: problem.source,
        windows: problem.windows,
        tally_group: problem.tally_map.clone(),
        nonthermal: (0..n_fine).map(|g| !lib.groups.is_thermal(g)).collect(),
        bins_per_cell: problem.n_tally_groups + 1,
        max_split: settings.max_split,
        seed: settings.seed,
    };
    let n_bins = n_cells * transport.bins_per_cell;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;

    let n_batches = settings.histories.div_ceil(settings.batch_size);
    let mut sum = vec![0.0; n_bins];
    let mut sum_sq = vec![0.0; n_bins];
    let mut events = EventCounts::default();
    let mut cpu = 0.0;
    let run_batch = |b: u64| {
        let t0 = thread_cpu_seconds();
        let lo = b * settings.batch_size;
        let hi = (lo + settings.batch_size).min(settings.histories);
        let mut acc = Accumulator::new(n_bins);
        let mut bank = Vec::new();
        let mut ev = EventCounts::default();
        for h in lo..hi {
            transport.run_history(h, &mut acc, &mut bank, &mut ev);
        }
        acc.flush();
        (acc, ev, thread_cpu_seconds() - t0)
    };
    let wave = settings.workers as u64;
    let mut start = 0;
    while start < n_batches {
        let end = (start + wave).min(n_batches);
        let results: Vec<_> = pool.install(|| (start..end).into_par_iter().map(run_batch).collect());
        for (acc, ev, t) in results {
            for (s, a) in sum.iter_mut().zip(&acc.sum) {
                *s += a;
            }
            for (s, a) in sum_sq.iter_mut().zip(&acc.sum_sq) {
                *s += a;
            }
            events.add(&ev);
            cpu += t;
        }
        start = end;
    }

    Ok(McRun {
        tally: TallySet {
            n_cells,
            n_groups: problem.n_tally_groups,
            sum,
            sum_sq,
            histories: settings.histories,
            seed: settings.seed,
            cpu_seconds: cpu,
            provenance: Vec::new(),
        },
        events,
    })
}
