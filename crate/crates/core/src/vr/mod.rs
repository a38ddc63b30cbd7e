//! Adjoint sources (CADIS, FW-CADIS, resonance factor), importance maps,
//! weight windows and consistently biased sources.

mod files;

use serde::{Deserialize, Serialize};

use crate::detsolver::{inner_product, FixedSource, FLUX_FLOOR};
use crate::grid::{CellGroupData, FluxField, Geometry2D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointMode {
    Cadis,
    FwcadisCellGroup,
    FwcadisCellIntegrated,
}

impl std::fmt::Display for AdjointMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdjointMode::Cadis => "cadis",
            AdjointMode::FwcadisCellGroup => "fwcadis_cell_group",
            AdjointMode::FwcadisCellIntegrated => "fwcadis_cell_integrated",
        })
    }
}

fn default_r_min() -> f64 {
    1e-3
}

fn default_r_max() -> f64 {
    1e3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFactorSpec {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default, rename = "m")]
    pub m: f64,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

impl Default for ResonanceFactorSpec {
    fn default() -> Self {
        ResonanceFactorSpec {
            enabled: false,
            m: 0.0,
            r_min: default_r_min(),
            r_max: default_r_max(),
        }
    }
}

fn default_mode() -> AdjointMode {
    AdjointMode::FwcadisCellGroup
}

fn default_floor() -> f64 {
    FLUX_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointSourceSpec {
    #[serde(default = "default_mode")]
    pub mode: AdjointMode,
    /// Detector region name for CADIS mode.
    #[serde(default)]
    pub detector_region: Option<String>,
    /// Per-group response weights; nonthermal flux weights when absent.
    #[serde(default)]
    pub response_weights: Option<Vec<f64>>,
    #[serde(default = "default_floor")]
    pub flux_floor: f64,
    #[serde(default)]
    pub resonance_factor: ResonanceFactorSpec,
}

impl Default for AdjointSourceSpec {
    fn default() -> Self {
        AdjointSourceSpec {
            mode: default_mode(),
            detector_region: None,
            response_weights: None,
            flux_floor: default_floor(),
            resonance_factor: ResonanceFactorSpec::default(),
        }
    }
}

impl AdjointSourceSpec {
    pub fn validate(&self) -> Result<()> {
        let rf = &self.resonance_factor;
        if !(rf.m >= 0.0 && rf.m.is_finite()) {
            return Err(Error::config(format!("M must be finite and >= 0, got {}", rf.m)));
        }
        if !(rf.r_min > 0.0 && rf.r_min <= 1.0 && rf.r_max >= 1.0) {
            return Err(Error::config("ratio clamp must satisfy 0 < r_min <= 1 <= r_max"));
        }
        if !(self.flux_floor > 0.0) {
            return Err(Error::config("flux floor must be positive"));
        }
        if self.mode == AdjointMode::Cadis && self.detector_region.is_none() {
            return Err(Error::config("CADIS mode needs a detector region"));
        }
        if let Some(w) = &self.response_weights {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::config("response weights must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// An adjoint source and the number of entries that hit the flux floor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSource {
    pub source: FixedSource,
    pub floored: usize,
}

fn check_weights(weights: &[f64], n_groups: usize) -> Result<()> {
    if weights.len() != n_groups {
        return Err(Error::shape(format!(
            "{} response weights for {n_groups} groups",
            weights.len()
        )));
    }
    Ok(())
}

/// Inverse-forward-flux adjoint source: per cell and group, or per cell with
/// the response-weighted flux in the denominator.
pub fn fwcadis_adjoint_source(
    phi: &FluxField,
    mode: AdjointMode,
    weights: &[f64],
    floor: f64,
) -> Result<AdjointSource> {
    let data = &phi.data;
    check_weights(weights, data.n_groups)?;
    if data.values.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("forward flux is identically zero"));
    }
    let mut source = FixedSource::zeros(data.n_cells, data.n_groups);
    let mut floored = 0;
    match mode {
        AdjointMode::FwcadisCellGroup => {
            for (q, &p) in source.values.iter_mut().zip(&data.values) {
                if p < floor {
                    floored += 1;
                }
                *q = 1.0 / p.max(floor);
            }
        }
        AdjointMode::FwcadisCellIntegrated => {
            for c in 0..data.n_cells {
                let total: f64 = data.cell(c).iter().zip(weights).map(|(p, w)| p * w).sum();
                if total < floor {
                    floored += 1;
                }
                for (g, w) in weights.iter().enumerate() {
                    source.set(c, g, w / total.max(floor));
                }
            }
        }
        AdjointMode::Cadis => {
            return Err(Error::config("CADIS adjoint source is built by cadis_adjoint_source"))
        }
    }
    Ok(AdjointSource { source, floored })
}

/// Detector adjoint source: the response-weighted forward flux in each
/// detector cell, zero elsewhere.
pub fn cadis_adjoint_source(phi: &FluxField, detector: &[usize], weights: &[f64]) -> Result<FixedSource> {
    let data = &phi.data;
    check_weights(weights, data.n_groups)?;
    if detector.is_empty() {
        return Err(Error::invalid("detector region is empty"));
    }
    let mut source = FixedSource::zeros(data.n_cells, data.n_groups);
    for &c in detector {
        if c >= data.n_cells {
            return Err(Error::shape(format!("detector cell {c} outside the mesh")));
        }
        for (g, w) in weights.iter().enumerate() {
            source.set(c, g, w * data.get(c, g));
        }
    }
    if source.values.iter().all(|&v| v == 0.0) {
        return Err(Error::invalid("detector adjoint source is identically zero"));
    }
    Ok(source)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceFactorSource {
    pub source: FixedSource,
    pub clipped_low: usize,
    pub clipped_high: usize,
}

impl ResonanceFactorSource {
    pub fn clipped(&self) -> usize {
        self.clipped_low + self.clipped_high
    }
}

/// q† = clip((φ_res / φ_dilute)^M, r_min, r_max) · q_fwc.
pub fn resonance_factor_source(
    phi_res: &FluxField,
    phi_dilute: &FluxField,
    m: f64,
    q_fwc: &FixedSource,
    clamp: (f64, f64),
    floor: f64,
) -> Result<ResonanceFactorSource> {
    let (n, g) = (phi_res.n_cells(), phi_res.n_groups());
    phi_dilute.data.check_shape(n, g, "dilute flux")?;
    q_fwc.check_shape(n, g, "FW-CADIS adjoint source")?;
    let (r_min, r_max) = clamp;
    let mut source = FixedSource::zeros(n, g);
    let (mut low, mut high) = (0, 0);
    for i in 0..n * g {
        let factor = if m == 0.0 {
            1.0
        } else {
            let ratio = phi_res.data.values[i].max(floor) / phi_dilute.data.values[i].max(floor);
            let f = ratio.powf(m);
            if f < r_min {
                low += 1;
                r_min
            } else if f > r_max {
                high += 1;
                r_max
            } else {
                f
            }
        };
        source.values[i] = factor * q_fwc.values[i];
    }
    Ok(ResonanceFactorSource {
        source,
        clipped_low: low,
        clipped_high: high,
    })
}

/// imp = φ†/R with R = ⟨q, φ†⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMap {
    pub imp: CellGroupData,
    pub r: f64,
    pub provenance: Vec<(String, String)>,
}

pub fn build_importance(phi_adj: &FluxField, q: &FixedSource, geom: &Geometry2D) -> Result<ImportanceMap> {
    let r = inner_product(q, &phi_adj.data, geom)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("importance normalization R = {r:e} is not positive")));
    }
    let mut imp = phi_adj.data.clone();
    imp.values.iter_mut().for_each(|v| *v /= r);
    Ok(ImportanceMap {
        imp,
        r,
        provenance: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub center: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSettings {
    pub ratio: f64,
    #[serde(default)]
    pub center_min: Option<f64>,
    #[serde(default)]
    pub center_max: Option<f64>,
}

impl Default for WindowSettings {
    fn default() -> Self {
        WindowSettings {
            ratio: 10.0,
            center_min: None,
            center_max: None,
        }
    }
}

/// Weight windows on the coarse cell×group map. `group_map[fine] = coarse`
/// lets the Monte Carlo run on a finer group structure.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightWindowMap {
    pub n_cells: usize,
    pub n_groups: usize,
    pub ratio: f64,
    pub windows: Vec<Option<Window>>,
    pub group_map: Vec<usize>,
}

impl WeightWindowMap {
    #[inline]
    pub fn window(&self, c: usize, fine_group: usize) -> Option<Window> {
        self.windows[c * self.n_groups + self.group_map[fine_group]]
    }

    pub fn with_group_map(mut self, map: Vec<usize>) -> Result<Self> {
        if map.iter().any(|&g| g >= self.n_groups) {
            return Err(Error::shape("fine-to-coarse map points past the coarse groups"));
        }
        self.group_map = map;
        Ok(self)
    }

    pub fn disabled(&self) -> usize {
        self.windows.iter().filter(|w| w.is_none()).count()
    }
}

/// Centers R/φ† with bounds center/√ρ and center·√ρ; disabled where
/// φ† ≤ `floor`.
pub fn build_weight_windows(map: &ImportanceMap, settings: &WindowSettings, floor: f64) -> Result<WeightWindowMap> {
    if !(settings.ratio > 1.0) {
        return Err(Error::config("window ratio must exceed 1"));
    }
    let sq = settings.ratio.sqrt();
    let windows = map
        .imp
        .values
        .iter()
        .map(|&imp| {
            if imp * map.r <= floor {
                return None;
            }
            let mut center = 1.0 / imp;
            if let Some(lo) = settings.center_min {
                center = center.max(lo);
            }
            if let Some(hi) = settings.center_max {
                center = center.min(hi);
            }
            Some(Window {
                lo: center / sq,
                center,
                hi: center * sq,
            })
        })
        .collect();
    Ok(WeightWindowMap {
        n_cells: map.imp.n_cells,
        n_groups: map.imp.n_groups,
        ratio: settings.ratio,
        windows,
        group_map: (0..map.imp.n_groups).collect(),
    })
}

/// Sampling distribution over source cells×groups and the weight a particle
/// is born with.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasedSource {
    pub n_cells: usize,
    pub n_groups: usize,
    /// (cell, group) with nonzero probability, in cell-major order.
    pub entries: Vec<(usize, usize)>,
    pub probability: Vec<f64>,
    pub cdf: Vec<f64>,
    pub born_weight: Vec<f64>,
}

impl BiasedSource {
    fn from_parts(n_cells: usize, n_groups: usize, entries: Vec<(usize, usize)>, raw: Vec<f64>, born: Vec<f64>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("source has no emission"));
        }
        let probability: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let mut cdf = Vec::with_capacity(probability.len());
        let mut acc = 0.0;
        for p in &probability {
            acc += p;
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(BiasedSource {
            n_cells,
            n_groups,
            entries,
            probability,
            cdf,
            born_weight: born,
        })
    }

    /// Unbiased sampling of the true source; every particle starts at weight 1.
    pub fn analog(q: &FixedSource, geom: &Geometry2D) -> Result<Self> {
        let mut entries = Vec::new();
        let mut raw = Vec::new();
        for c in 0..q.n_cells {
            for g in 0..q.n_groups {
                let s = q.get(c, g) * geom.volume(c);
                if s > 0.0 {
                    entries.push((c, g));
                    raw.push(s);
                }
            }
        }
        let n = raw.len();
        Self::from_parts(q.n_cells, q.n_groups, entries, raw, vec![1.0; n])
    }

    /// Index of the entry holding cumulative probability `u` in [0, 1).
    #[inline]
    pub fn sample(&self, u: f64) -> usize {
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }

    /// Σ p·w, equal to 1 for a consistent biased source.
    pub fn expected_weight(&self) -> f64 {
        self.probability.iter().zip(&self.born_weight).map(|(p, w)| p * w).sum()
    }
}

/// p = q·V·φ†/R over cells×groups; born weight R/(φ†·Q) with Q the total
/// emission, so that p·w reproduces the true source shape.
pub fn bias_source(q: &FixedSource, phi_adj: &CellGroupData, r: f64, geom: &Geometry2D) -> Result<BiasedSource> {
    phi_adj.check_shape(q.n_cells, q.n_groups, "adjoint flux")?;
    if !(r > 0.0) {
        return Err(Error::invalid("importance normalization must be positive"));
    }
    let mut entries = Vec::new();
    let mut raw = Vec::new();
    let mut adj = Vec::new();
    let mut emission = 0.0;
    for c in 0..q.n_cells {
        for g in 0..q.n_groups {
            let s = q.get(c, g) * geom.volume(c);
            if s > 0.0 {
                let a = phi_adj.get(c, g);
                if !(a > 0.0) {
                    return Err(Error::invalid(format!(
                        "adjoint flux vanishes at source cell {c}, group {g}"
                    )));
                }
                entries.push((c, g));
                raw.push(s * a / r);
                adj.push(a);
                emission += s;
            }
        }
    }
    let born = adj.iter().map(|a| r / (a * emission)).collect();
    BiasedSource::from_parts(q.n_cells, q.n_groups, entries, raw, born)
}

pub use files::{
    biased_source_document, importance_document, read_biased_source, read_importance, read_weight_windows,
    weight_window_document, write_biased_source, write_importance, write_weight_windows,
};
