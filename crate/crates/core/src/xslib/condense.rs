//! Lethargy-grid quadrature for multigroup condensation and Bondarenko factors.

use super::groups::EnergyGroupStructure;
use super::library::MaterialComposition;
use super::nuclide::ResonanceNuclide;
use super::spectrum::WeightSpectrum;
use crate::{Error, Result};

/// Chord length standing in for an infinite medium (cm).
pub const ESCAPE_FREE_CHORD_CM: f64 = 10_000.0;

/// Minimum number of uniform lethargy intervals per group.
const BASE_INTERVALS: usize = 200;
/// Points per resonance width near the resonance center.
const POINTS_PER_WIDTH: f64 = 20.0;
/// Half-width (in resonance widths) of the uniformly refined core.
const CORE_HALF_WIDTHS: f64 = 50.0;
/// Geometric growth of the point spacing outside the core.
const WING_GROWTH: f64 = 1.05;

/// Quadrature nodes for one group: energies and composite-trapezoid weights
/// in lethargy.
#[derive(Debug, Clone)]
pub struct GroupQuadrature {
    pub energies: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Builds the lethargy subgrid for `[lo, hi]` that resolves every resonance
/// of `nuclide`.
pub fn group_quadrature(nuclide: &ResonanceNuclide, hi: f64, lo: f64) -> Result<GroupQuadrature> {
    if !(hi > lo && lo >= 0.0) {
        return Err(Error::config(format!("degenerate group [{lo:e}, {hi:e}]")));
    }
    let width = (hi / lo).ln();
    let mut us: Vec<f64> = (0..=BASE_INTERVALS)
        .map(|i| width * i as f64 / BASE_INTERVALS as f64)
        .collect();
    let push_e = |us: &mut Vec<f64>, e: f64| {
        if e > lo && e < hi {
            us.push((hi / e).ln());
        }
    };
    for r in &nuclide.resonances {
        let g = r.width_ev;
        let step = 1.0 / POINTS_PER_WIDTH;
        let n_core = (CORE_HALF_WIDTHS * POINTS_PER_WIDTH) as usize;
        for k in 0..=n_core {
            let s = k as f64 * step * g;
            push_e(&mut us, r.energy_ev + s);
            if k > 0 {
                push_e(&mut us, r.energy_ev - s);
            }
        }
        let mut s = CORE_HALF_WIDTHS * g;
        let mut ds = step * g;
        loop {
            ds *= WING_GROWTH;
            s += ds;
            let above = r.energy_ev + s;
            let below = r.energy_ev - s;
            push_e(&mut us, above);
            push_e(&mut us, below);
            if above >= hi && below <= lo {
                break;
            }
        }
    }
    us.sort_by(f64::total_cmp);
    us.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * width);
    if us.len() < 2 {
        return Err(Error::config("group has no quadrature points"));
    }
    let n = us.len();
    let mut weights = vec![0.0; n];
    for i in 0..n - 1 {
        let h = us[i + 1] - us[i];
        weights[i] += 0.5 * h;
        weights[i + 1] += 0.5 * h;
    }
    let energies = us.iter().map(|u| hi * (-u).exp()).collect();
    Ok(GroupQuadrature { energies, weights })
}

/// Per-group microscopic cross sections (barns).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupXs {
    pub total: Vec<f64>,
    pub scatter: Vec<f64>,
    pub absorb: Vec<f64>,
}

/// Weighted reaction averages over one group. `sigma0 = None` weights with
/// φ∞ alone; otherwise with φ∞/(σ_t + σ0).
#[derive(Debug, Clone, Copy)]
pub(crate) struct WeightedAverages {
    pub total: f64,
    pub scatter: f64,
    pub absorb: f64,
}

pub(crate) fn weighted_averages(
    nuclide: &ResonanceNuclide,
    quad: &GroupQuadrature,
    spectrum: &WeightSpectrum,
    sigma0: Option<f64>,
) -> WeightedAverages {
    let (mut w_sum, mut t_sum, mut s_sum, mut a_sum) = (0.0, 0.0, 0.0, 0.0);
    for (&e, &tw) in quad.energies.iter().zip(&quad.weights) {
        let x = nuclide.xs(e);
        let mut w = spectrum.weight(e) * tw;
        if let Some(s0) = sigma0 {
            w /= x.total + s0;
        }
        w_sum += w;
        t_sum += x.total * w;
        s_sum += x.scatter * w;
        a_sum += x.absorb * w;
    }
    WeightedAverages {
        total: t_sum / w_sum,
        scatter: s_sum / w_sum,
        absorb: a_sum / w_sum,
    }
}

/// Normalized elastic transfer probabilities out of group `g` (entries for
/// `g..len`), using the isotropic-CM kernel `1/((1-α)E)` on `[αE, E]` and the
/// same weighting as [`weighted_averages`].
pub(crate) fn transfer_fractions(
    nuclide: &ResonanceNuclide,
    groups: &EnergyGroupStructure,
    g: usize,
    quad: &GroupQuadrature,
    spectrum: &WeightSpectrum,
    sigma0: Option<f64>,
) -> Vec<f64> {
    let n = groups.len();
    let alpha = nuclide.alpha();
    let bounds = groups.bounds();
    let mut row = vec![0.0; n - g];
    for (&e, &tw) in quad.energies.iter().zip(&quad.weights) {
        let x = nuclide.xs(e);
        let mut w = spectrum.weight(e) * tw;
        if let Some(s0) = sigma0 {
            w /= x.total + s0;
        }
        let val = w * x.scatter;
        let e_low = alpha * e;
        let span = (1.0 - alpha) * e;
        for gp in g..n {
            let hi = bounds[gp];
            // the thermal group collects everything below its upper edge
            let lo = if gp == n - 1 { 0.0 } else { bounds[gp + 1] };
            if hi <= e_low {
                break;
            }
            let overlap = e.min(hi) - e_low.max(lo);
            if overlap > 0.0 {
                row[gp - g] += val * overlap / span;
            }
        }
    }
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|r| *r /= sum);
    }
    row
}

/// Infinitely dilute (φ∞-weighted) group cross sections.
pub fn infinitely_dilute_mg(
    nuclide: &ResonanceNuclide,
    groups: &EnergyGroupStructure,
    spectrum: &WeightSpectrum,
) -> Result<GroupXs> {
    let mut out = GroupXs {
        total: Vec::with_capacity(groups.len()),
        scatter: Vec::with_capacity(groups.len()),
        absorb: Vec::with_capacity(groups.len()),
    };
    for g in 0..groups.len() {
        let (hi, lo) = groups.edges(g);
        let quad = group_quadrature(nuclide, hi, lo)?;
        let avg = weighted_averages(nuclide, &quad, spectrum, None);
        out.total.push(avg.total);
        out.scatter.push(avg.scatter);
        out.absorb.push(avg.absorb);
    }
    Ok(out)
}

/// Background cross section σ0 (barns) of nuclide `j` of `material` per group.
///
/// `totals[m][g]` is the microscopic total of the material's m-th nuclide.
/// With `use_escape` the escape term `1/(N_j l)` is added using the
/// material's chord length (or [`ESCAPE_FREE_CHORD_CM`]).
pub fn background_xs(
    material: &MaterialComposition,
    j: usize,
    totals: &[Vec<f64>],
    use_escape: bool,
) -> Vec<f64> {
    let n_j = material.nuclides[j].density;
    let n_groups = totals[j].len();
    let escape = if use_escape {
        1.0 / (n_j * material.chord_length_cm.unwrap_or(ESCAPE_FREE_CHORD_CM))
    } else {
        0.0
    };
    (0..n_groups)
        .map(|g| {
            let others: f64 = material
                .nuclides
                .iter()
                .enumerate()
                .filter(|(m, _)| *m != j)
                .map(|(m, c)| totals[m][g] * c.density)
                .sum();
            others / n_j + escape
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShieldingFactors {
    pub total: f64,
    pub scatter: f64,
    pub absorb: f64,
    /// Set when a dilute cross section was zero and the factor defaulted to 1.
    pub flagged: bool,
}

fn ratio(shielded: f64, dilute: f64, flagged: &mut bool) -> f64 {
    if dilute == 0.0 {
        *flagged = true;
        1.0
    } else {
        shielded / dilute
    }
}

pub(crate) fn factors_from(shielded: WeightedAverages, dilute: WeightedAverages) -> ShieldingFactors {
    let mut flagged = false;
    let total = ratio(shielded.total, dilute.total, &mut flagged);
    let scatter = ratio(shielded.scatter, dilute.scatter, &mut flagged);
    let absorb = ratio(shielded.absorb, dilute.absorb, &mut flagged);
    ShieldingFactors {
        total,
        scatter,
        absorb,
        flagged,
    }
}

/// Bondarenko self-shielding factors of group `g` at background `sigma0`.
pub fn bondarenko_factor(
    nuclide: &ResonanceNuclide,
    groups: &EnergyGroupStructure,
    g: usize,
    sigma0: f64,
    spectrum: &WeightSpectrum,
) -> Result<ShieldingFactors> {
    if !(sigma0 >= 0.0) {
        return Err(Error::invalid("background cross section must be >= 0"));
    }
    if g >= groups.len() {
        return Err(Error::invalid(format!("group {g} out of range")));
    }
    let (hi, lo) = groups.edges(g);
    let quad = group_quadrature(nuclide, hi, lo)?;
    let dilute = weighted_averages(nuclide, &quad, spectrum, None);
    let shielded = weighted_averages(nuclide, &quad, spectrum, Some(sigma0));
    Ok(factors_from(shielded, dilute))
}

/// Mean chord length 4V/S (cm).
pub fn chord_length(volume: f64, surface: f64) -> Result<f64> {
    if !(volume > 0.0 && surface > 0.0) {
        return Err(Error::invalid("chord length needs positive volume and surface"));
    }
    Ok(4.0 * volume / surface)
}
