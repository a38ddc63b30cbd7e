use std::cmp::Ordering;
use std::path::Path;

use crate::grid::{REGION_CENTERLINE, REGION_EXIT, REGION_PLATE};
use crate::mc::{figure_of_merit, fmt_fom, RegionSummary};
use crate::textio::{fmt_f64, parse_num, Document};
use crate::{Error, Result};

use super::pipeline::{RunSummary, FILE_MANIFEST, FILE_REPORT, FILE_TALLY};

/// Regions summarized in every report.
pub const REGIONS: [&str; 4] = ["global", REGION_PLATE, REGION_EXIT, REGION_CENTERLINE];

pub const ROW_HEADER: &str = "label,m,region,cpu_hours,r_max,r_avg,fom_min,fom_avg,fom_max";

/// One report line: a run's 95% RE extremes and figures of merit over a region.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: String,
    pub m: f64,
    pub region: String,
    pub cpu_hours: f64,
    pub r_max: f64,
    pub r_avg: f64,
    pub fom_min: Option<f64>,
    pub fom_avg: Option<f64>,
    pub fom_max: Option<f64>,
}

impl ReportRow {
    pub fn from_region(label: &str, m: f64, cpu_hours: f64, r: &RegionSummary) -> Self {
        ReportRow {
            label: label.to_string(),
            m,
            region: r.name.clone(),
            cpu_hours,
            r_max: r.r_max,
            r_avg: r.r_avg,
            fom_min: r.fom_min,
            fom_avg: r.fom_avg,
            fom_max: r.fom_max,
        }
    }

    pub fn from_summary(label: &str, m: f64, cpu_hours: f64, s: &RunSummary) -> Vec<Self> {
        s.regions.iter().map(|r| Self::from_region(label, m, cpu_hours, r)).collect()
    }

    /// A row given only t and the two RE aggregates, with FOMs computed.
    pub fn from_times(label: &str, m: f64, cpu_hours: f64, r_max: f64, r_avg: f64) -> Self {
        ReportRow {
            label: label.to_string(),
            m,
            region: "global".into(),
            cpu_hours,
            r_max,
            r_avg,
            fom_min: figure_of_merit(cpu_hours, r_max),
            fom_avg: figure_of_merit(cpu_hours, r_avg),
            fom_max: None,
        }
    }

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.label,
            fmt_f64(self.m),
            self.region,
            fmt_f64(self.cpu_hours),
            fmt_f64(self.r_max),
            fmt_f64(self.r_avg),
            fmt_fom(self.fom_min),
            fmt_fom(self.fom_avg),
            fmt_fom(self.fom_max)
        )
    }

    pub fn parse_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 9 {
            return Err(Error::parse("report row", format!("expected 9 fields: {line}")));
        }
        let fom = |s: &str| -> Result<Option<f64>> {
            if s == "disabled" {
                Ok(None)
            } else {
                parse_num(s, "fom").map(Some)
            }
        };
        Ok(ReportRow {
            label: f[0].to_string(),
            m: parse_num(f[1], "m")?,
            region: f[2].to_string(),
            cpu_hours: parse_num(f[3], "cpu_hours")?,
            r_max: parse_num(f[4], "r_max")?,
            r_avg: parse_num(f[5], "r_avg")?,
            fom_min: fom(f[6])?,
            fom_avg: fom(f[7])?,
            fom_max: fom(f[8])?,
        })
    }

    /// Largest relative deviation of the stored FOMs from 1/(t·R²).
    pub fn fom_arithmetic_error(&self) -> f64 {
        let check = |stored: Option<f64>, r: f64| match (stored, figure_of_merit(self.cpu_hours, r)) {
            (Some(a), Some(b)) => ((a - b) / b).abs(),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        };
        check(self.fom_min, self.r_max).max(check(self.fom_avg, self.r_avg))
    }
}

pub fn rows_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(ROW_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

pub fn parse_rows_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == ROW_HEADER => {}
        _ => return Err(Error::parse("report", "missing header")),
    }
    lines.filter(|l| !l.trim().is_empty()).map(ReportRow::parse_csv).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    RMax,
    RAvg,
    FomMin,
    FomAvg,
    FomMax,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::RMax, Metric::RAvg, Metric::FomMin, Metric::FomAvg, Metric::FomMax];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RMax => "r_max",
            Metric::RAvg => "r_avg",
            Metric::FomMin => "fom_min",
            Metric::FomAvg => "fom_avg",
            Metric::FomMax => "fom_max",
        }
    }

    /// Value where larger is better; disabled FOMs rank last.
    fn score(self, r: &ReportRow) -> f64 {
        match self {
            Metric::RMax => -r.r_max,
            Metric::RAvg => -r.r_avg,
            Metric::FomMin => r.fom_min.unwrap_or(f64::NEG_INFINITY),
            Metric::FomAvg => r.fom_avg.unwrap_or(f64::NEG_INFINITY),
            Metric::FomMax => r.fom_max.unwrap_or(f64::NEG_INFINITY),
        }
    }

    pub fn value(self, r: &ReportRow) -> Option<f64> {
        match self {
            Metric::RMax => Some(r.r_max),
            Metric::RAvg => Some(r.r_avg),
            Metric::FomMin => r.fom_min,
            Metric::FomAvg => r.fom_avg,
            Metric::FomMax => r.fom_max,
        }
    }
}

/// Rows of one region ordered best-first by `metric`; ties keep M order.
pub fn rank(rows: &[ReportRow], region: &str, metric: Metric) -> Vec<ReportRow> {
    let mut sel: Vec<ReportRow> = rows.iter().filter(|r| r.region == region).cloned().collect();
    sel.sort_by(|a, b| {
        metric
            .score(b)
            .partial_cmp(&metric.score(a))
            .unwrap_or(Ordering::Equal)
            .then(a.m.partial_cmp(&b.m).unwrap_or(Ordering::Equal))
    });
    sel
}

pub const RANK_HEADER: &str = "region,metric,rank,label,m,value";

pub fn rank_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(RANK_HEADER);
    out.push('\n');
    for region in REGIONS {
        for metric in Metric::ALL {
            for (i, r) in rank(rows, region, metric).iter().enumerate() {
                out.push_str(&format!(
                    "{region},{},{},{},{},{}\n",
                    metric.name(),
                    i + 1,
                    r.label,
                    fmt_f64(r.m),
                    fmt_fom(metric.value(r))
                ));
            }
        }
    }
    out
}

/// Nonthermal mean and 95% RE per cell read back from a tally file.
#[derive(Debug, Clone, PartialEq)]
pub struct TallyReadback {
    pub geometry_hash: String,
    pub mean: Vec<f64>,
    pub re95: Vec<f64>,
}

pub fn read_tally(path: &Path) -> Result<TallyReadback> {
    let doc = Document::read_from(path, "tally")?;
    let groups: usize = doc.get_num("groups")?;
    let geometry_hash = doc.get("geometry_hash")?.to_string();
    let (mut mean, mut re95) = (Vec::new(), Vec::new());
    for rec in doc.records.iter().filter(|r| r.starts_with("cell ")) {
        let t: Vec<&str> = rec.split_whitespace().collect();
        let base = 2 + 3 * groups;
        if t.len() != base + 3 {
            return Err(Error::parse("tally", format!("bad cell record `{}`", t[..2].join(" "))));
        }
        mean.push(parse_num(t[base], "mean")?);
        re95.push(parse_num(t[base + 2], "re95")?);
    }
    Ok(TallyReadback {
        geometry_hash,
        mean,
        re95,
    })
}

/// Side-by-side report of finished run directories.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Centerline cells with the 95% RE of each run divided by the first run's.
    pub ratios: Vec<(usize, Vec<Option<f64>>)>,
}

pub fn compare_cases(dirs: &[&Path]) -> Result<Comparison> {
    if dirs.len() < 2 {
        return Err(Error::invalid("comparison needs at least two run directories"));
    }
    let mut rows = Vec::new();
    let mut tallies = Vec::new();
    let mut labels = Vec::new();
    for dir in dirs {
        let p = dir.join(FILE_REPORT);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        rows.extend(parse_rows_csv(&text)?);
        tallies.push(read_tally(&dir.join(FILE_TALLY))?);
        labels.push(dir.display().to_string());
    }
    let g0 = &tallies[0].geometry_hash;
    for (t, dir) in tallies.iter().zip(dirs).skip(1) {
        if &t.geometry_hash != g0 {
            return Err(Error::HashMismatch {
                what: format!("geometry of {}", dir.display()),
                expected: g0.clone(),
                found: t.geometry_hash.clone(),
            });
        }
    }
    let centerline = centerline_cells(dirs[0])?;
    let base = &tallies[0];
    let ratios = centerline
        .into_iter()
        .map(|c| {
            let r = tallies
                .iter()
                .map(|t| (base.re95[c] > 0.0 && t.re95[c] > 0.0).then(|| t.re95[c] / base.re95[c]))
                .collect();
            (c, r)
        })
        .collect();
    Ok(Comparison { labels, rows, ratios })
}

fn centerline_cells(dir: &Path) -> Result<Vec<usize>> {
    let doc = Document::read_from(&dir.join(super::pipeline::FILE_GEOMETRY), "geometry")?;
    let key = format!("region.{REGION_CENTERLINE}");
    let list = doc.get(&key)?;
    list.split_whitespace().map(|t| parse_num(t, "centerline cell")).collect()
}

impl Comparison {
    pub fn ratio_csv(&self) -> String {
        let mut out = String::from("cell");
        for i in 0..self.labels.len() {
            out.push_str(&format!(",ratio_{i}"));
        }
        out.push('\n');
        for (c, r) in &self.ratios {
            out.push_str(&c.to_string());
            for v in r {
                out.push(',');
                out.push_str(&fmt_fom(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn rows_csv(&self) -> String {
        rows_csv(&self.rows)
    }
}

/// Reads the manifest of a run directory as (file, hash) pairs.
pub fn read_manifest(dir: &Path) -> Result<Vec<(String, String)>> {
    let doc = Document::read_from(&dir.join(FILE_MANIFEST), "manifest")?;
    doc.records
        .iter()
        .map(|r| {
            r.split_once(' ')
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .ok_or_else(|| Error::parse("manifest", r.clone()))
        })
        .collect()
}
