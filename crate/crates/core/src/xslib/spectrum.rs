use serde::{Deserialize, Serialize};

use super::groups::EnergyGroupStructure;
use crate::{Error, Result};

/// One piece of the infinite-medium weighting flux, expressed per unit
/// lethargy over `[e_lo, e_hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SpectrumSegment {
    /// `scale * (E/e_lo)^1.5 * exp(-(E - e_lo)/theta)`: lethargy form of a
    /// Maxwellian fission spectrum, equal to `scale` at the lower edge.
    Fission {
        e_lo: f64,
        e_hi: f64,
        theta_ev: f64,
        scale: f64,
    },
    /// 1/E slowing-down flux, flat per unit lethargy.
    InverseE { e_lo: f64, e_hi: f64, scale: f64 },
    /// Flat thermal piece.
    Flat { e_lo: f64, e_hi: f64, scale: f64 },
}

impl SpectrumSegment {
    fn bounds(&self) -> (f64, f64) {
        match *self {
            SpectrumSegment::Fission { e_lo, e_hi, .. }
            | SpectrumSegment::InverseE { e_lo, e_hi, .. }
            | SpectrumSegment::Flat { e_lo, e_hi, .. } => (e_lo, e_hi),
        }
    }

    #[inline]
    fn eval(&self, e: f64) -> f64 {
        match *self {
            SpectrumSegment::Fission {
                e_lo,
                theta_ev,
                scale,
                ..
            } => scale * (e / e_lo).powf(1.5) * (-(e - e_lo) / theta_ev).exp(),
            SpectrumSegment::InverseE { scale, .. } | SpectrumSegment::Flat { scale, .. } => scale,
        }
    }
}

/// Piecewise infinite-medium weighting flux φ∞ per unit lethargy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpectrum {
    pub segments: Vec<SpectrumSegment>,
}

impl WeightSpectrum {
    /// Fission shape above `e_join`, 1/E down to `thermal_cutoff`, flat below,
    /// continuous at both joins.
    pub fn standard(e_min: f64, thermal_cutoff: f64, e_join: f64, e_max: f64, theta_ev: f64) -> Self {
        WeightSpectrum {
            segments: vec![
                SpectrumSegment::Fission {
                    e_lo: e_join,
                    e_hi: e_max,
                    theta_ev,
                    scale: 1.0,
                },
                SpectrumSegment::InverseE {
                    e_lo: thermal_cutoff,
                    e_hi: e_join,
                    scale: 1.0,
                },
                SpectrumSegment::Flat {
                    e_lo: e_min,
                    e_hi: thermal_cutoff,
                    scale: 1.0,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::config("weight spectrum has no segments"));
        }
        for s in &self.segments {
            let (lo, hi) = s.bounds();
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::config("weight spectrum segment has bad bounds"));
            }
            let scale = match *s {
                SpectrumSegment::Fission { scale, theta_ev, .. } => {
                    if !(theta_ev > 0.0) {
                        return Err(Error::config("fission temperature must be > 0"));
                    }
                    scale
                }
                SpectrumSegment::InverseE { scale, .. } | SpectrumSegment::Flat { scale, .. } => scale,
            };
            if !(scale > 0.0) {
                return Err(Error::config("weight spectrum scale must be > 0"));
            }
        }
        Ok(())
    }

    /// Checks the spectrum covers `[lo, hi]` without gaps.
    pub fn check_covers(&self, lo: f64, hi: f64) -> Result<()> {
        let mut segs: Vec<(f64, f64)> = self.segments.iter().map(|s| s.bounds()).collect();
        segs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut reach = lo;
        for (a, b) in segs {
            if a > reach * (1.0 + 1e-12) {
                break;
            }
            reach = reach.max(b);
        }
        if reach < hi * (1.0 - 1e-12) {
            return Err(Error::config(format!(
                "weight spectrum does not cover [{lo:e}, {hi:e}] eV"
            )));
        }
        Ok(())
    }

    /// φ∞ per unit lethargy at energy `e`.
    #[inline]
    pub fn weight(&self, e: f64) -> f64 {
        for s in &self.segments {
            let (lo, hi) = s.bounds();
            if e >= lo && e <= hi {
                return s.eval(e);
            }
        }
        // Clamp to the nearest segment outside the covered range.
        let nearest = self
            .segments
            .iter()
            .min_by(|a, b| {
                let da = dist(a.bounds(), e);
                let db = dist(b.bounds(), e);
                da.total_cmp(&db)
            })
            .expect("validated spectrum has segments");
        let (lo, hi) = nearest.bounds();
        nearest.eval(e.clamp(lo, hi))
    }
}

fn dist((lo, hi): (f64, f64), e: f64) -> f64 {
    if e < lo {
        (lo / e).ln()
    } else {
        (e / hi).ln().max(0.0)
    }
}

/// Group fractions of a Maxwellian fission emission spectrum
/// `sqrt(E) exp(-E/theta)`, normalized to one over the structure.
pub fn fission_group_fractions(groups: &EnergyGroupStructure, theta_ev: f64) -> Vec<f64> {
    const POINTS: usize = 2000;
    let mut out: Vec<f64> = (0..groups.len())
        .map(|g| {
            let (hi, lo) = groups.edges(g);
            let (u0, u1) = (0.0, (hi / lo).ln());
            let h = (u1 - u0) / POINTS as f64;
            // lethargy form E * chi(E)
            let f = |u: f64| {
                let e = hi * (-u).exp();
                e * e.sqrt() * (-e / theta_ev).exp()
            };
            let mut s = 0.5 * (f(u0) + f(u1));
            for i in 1..POINTS {
                s += f(u0 + i as f64 * h);
            }
            s * h
        })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_spec() -> WeightSpectrum {
        WeightSpectrum::standard(1e-5, 0.625, 1e5, 2e7, 1.4e6)
    }

    #[test]
    fn continuous_and_positive() {
        let w = std_spec();
        w.validate().unwrap();
        w.check_covers(1e-5, 2e7).unwrap();
        for join in [0.625, 1e5] {
            let a = w.weight(join * (1.0 - 1e-12));
            let b = w.weight(join * (1.0 + 1e-12));
            assert!((a - b).abs() < 1e-9 * a.max(b));
        }
        let mut e = 1e-5;
        while e < 2e7 {
            assert!(w.weight(e) > 0.0);
            e *= 1.3;
        }
    }

    #[test]
    fn gap_is_detected() {
        let mut w = std_spec();
        w.segments.remove(1);
        assert!(w.check_covers(1e-5, 2e7).is_err());
    }

    #[test]
    fn fission_fractions_sum_to_one() {
        let g = EnergyGroupStructure::equal_lethargy(2e7, 0.625, 1e-5, 26).unwrap();
        let f = fission_group_fractions(&g, 1.33e6);
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(f[g.thermal_group()] < 1e-6);
    }
}
