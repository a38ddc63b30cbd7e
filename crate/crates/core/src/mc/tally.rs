use std::path::Path;

use crate::textio::{fmt_f64, fmt_f64_list, Document};
use crate::{Error, Result};

/// 95% confidence multiplier applied to the 1σ relative error.
pub const CI95: f64 = 1.96;

/// Per-history accumulator for `n_bins` tally bins. Scores of one history are
/// summed in `pending` and folded into the sums when the next history first
/// touches the bin (or at `flush`).
#[derive(Debug, Clone)]
pub(crate) struct Accumulator {
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pending: Vec<f64>,
    owner: Vec<u64>,
    touched: Vec<usize>,
}

const NO_OWNER: u64 = u64::MAX;

impl Accumulator {
    pub fn new(n_bins: usize) -> Self {
        Accumulator {
            sum: vec![0.0; n_bins],
            sum_sq: vec![0.0; n_bins],
            pending: vec![0.0; n_bins],
            owner: vec![NO_OWNER; n_bins],
            touched: Vec::new(),
        }
    }

    #[inline]
    pub fn score(&mut self, bin: usize, history: u64, value: f64) {
        if self.owner[bin] != history {
            if self.owner[bin] != NO_OWNER {
                let s = self.pending[bin];
                self.sum[bin] += s;
                self.sum_sq[bin] += s * s;
            } else {
                self.touched.push(bin);
            }
            self.owner[bin] = history;
            self.pending[bin] = 0.0;
        }
        self.pending[bin] += value;
    }

    /// Folds every pending history score into the sums.
    pub fn flush(&mut self) {
        for &bin in &self.touched {
            let s = self.pending[bin];
            self.sum[bin] += s;
            self.sum_sq[bin] += s * s;
            self.pending[bin] = 0.0;
            self.owner[bin] = NO_OWNER;
        }
        self.touched.clear();
    }
}

/// Sums of history scores per cell × tally bin. Bin `n_groups` of every cell
/// holds the nonthermal total.
#[derive(Debug, Clone, PartialEq)]
pub struct TallySet {
    pub n_cells: usize,
    pub n_groups: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
    pub histories: u64,
    pub seed: u64,
    /// CPU seconds spent in transport, summed over workers.
    pub cpu_seconds: f64,
    pub provenance: Vec<(String, String)>,
}

impl TallySet {
    pub fn bins_per_cell(&self) -> usize {
        self.n_groups + 1
    }

    #[inline]
    pub fn bin(&self, c: usize, g: usize) -> usize {
        c * (self.n_groups + 1) + g
    }

    pub fn nonthermal_bin(&self, c: usize) -> usize {
        self.bin(c, self.n_groups)
    }

    pub fn cpu_hours(&self) -> f64 {
        self.cpu_seconds / 3600.0
    }

    pub fn to_document(&self, stats: &TallyStatistics, regions: &[RegionSummary]) -> Document {
        let mut doc = Document::new("tally");
        doc.set("seed", self.seed)
            .set("histories", self.histories)
            .set("cells", self.n_cells)
            .set("groups", self.n_groups);
        for (k, v) in &self.provenance {
            doc.set(k, v);
        }
        for r in regions {
            doc.push(format!(
                "region {} {} {} {}",
                r.name,
                r.cells,
                r.unscored,
                fmt_f64_list(&[r.r_max, r.r_avg, r.r_min])
            ));
        }
        let k = self.bins_per_cell();
        for c in 0..self.n_cells {
            let mut rec = format!("cell {c}");
            for b in c * k..(c + 1) * k {
                rec.push(' ');
                rec.push_str(&fmt_f64_list(&[stats.mean[b], stats.re[b], stats.re95[b]]));
            }
            doc.push(rec);
        }
        doc
    }

    pub fn write(&self, path: &Path, regions: &[RegionSummary]) -> Result<String> {
        let stats = compute_statistics(self)?;
        self.to_document(&stats, regions).write_to(path)
    }
}

/// Mean, 1σ relative error and 95% relative error per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct TallyStatistics {
    pub mean: Vec<f64>,
    pub re: Vec<f64>,
    pub re95: Vec<f64>,
    /// Bins with zero mean (no RE defined).
    pub unscored: Vec<bool>,
}

pub fn compute_statistics(t: &TallySet) -> Result<TallyStatistics> {
    if t.histories < 2 {
        return Err(Error::invalid("statistics need at least 2 histories"));
    }
    let n = t.histories as f64;
    let len = t.sum.len();
    let mut mean = vec![0.0; len];
    let mut re = vec![0.0; len];
    let mut re95 = vec![0.0; len];
    let mut unscored = vec![false; len];
    for b in 0..len {
        let m = t.sum[b] / n;
        mean[b] = m;
        if m > 0.0 {
            let var = (t.sum_sq[b] / n - m * m).max(0.0) / (n - 1.0);
            re[b] = var.sqrt() / m;
            re95[b] = CI95 * re[b];
        } else {
            unscored[b] = true;
        }
    }
    Ok(TallyStatistics {
        mean,
        re,
        re95,
        unscored,
    })
}

/// FOM = 1/(t·R²); `None` (disabled) when R or t is zero.
pub fn figure_of_merit(t_hours: f64, r: f64) -> Option<f64> {
    if r > 0.0 && t_hours > 0.0 {
        Some(1.0 / (t_hours * r * r))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionSummary {
    pub name: String,
    pub cells: usize,
    /// Cells without any score; excluded from the RE aggregates.
    pub unscored: usize,
    pub r_max: f64,
    pub r_avg: f64,
    pub r_min: f64,
    pub fom_min: Option<f64>,
    pub fom_avg: Option<f64>,
    pub fom_max: Option<f64>,
}

impl RegionSummary {
    /// Aggregates 95% REs of scored cells; `None` entries are unscored cells.
    pub fn from_relative_errors(name: &str, t_hours: f64, re95: &[Option<f64>]) -> Self {
        let scored: Vec<f64> = re95.iter().flatten().copied().collect();
        let (r_max, r_min, r_avg) = if scored.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            (
                scored.iter().copied().fold(f64::MIN, f64::max),
                scored.iter().copied().fold(f64::MAX, f64::min),
                scored.iter().sum::<f64>() / scored.len() as f64,
            )
        };
        RegionSummary {
            name: name.to_string(),
            cells: re95.len(),
            unscored: re95.len() - scored.len(),
            r_max,
            r_avg,
            r_min,
            fom_min: figure_of_merit(t_hours, r_max),
            fom_avg: figure_of_merit(t_hours, r_avg),
            fom_max: figure_of_merit(t_hours, r_min),
        }
    }
}

/// Region summary over the nonthermal bin of `cells`.
pub fn summarize_region(t: &TallySet, stats: &TallyStatistics, name: &str, cells: &[usize]) -> RegionSummary {
    let re: Vec<Option<f64>> = cells
        .iter()
        .map(|&c| {
            let b = t.nonthermal_bin(c);
            (!stats.unscored[b]).then_some(stats.re95[b])
        })
        .collect();
    RegionSummary::from_relative_errors(name, t.cpu_hours(), &re)
}

pub fn fmt_fom(f: Option<f64>) -> String {
    f.map(fmt_f64).unwrap_or_else(|| "disabled".to_string())
}
