use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Lower edge of the global energy range (eV).
pub const GLOBAL_E_MIN: f64 = 1.0e-5;
/// Upper edge of the global energy range (eV).
pub const GLOBAL_E_MAX: f64 = 2.0e7;
/// Reference energy of the 1/v capture amplitude (eV).
pub const E_REF_THERMAL: f64 = 0.0253;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub energy_ev: f64,
    pub width_ev: f64,
    /// Peak value of the added total cross section (barns).
    pub sigma_peak: f64,
    /// Fraction of the resonance cross section that is capture.
    pub capture_fraction: f64,
}

impl Resonance {
    /// Lorentzian line shape scaled to `sigma_peak` at the center.
    #[inline]
    pub fn shape(&self, e: f64) -> f64 {
        let hw = 0.5 * self.width_ev;
        let d = e - self.energy_ev;
        self.sigma_peak * (hw * hw) / (d * d + hw * hw)
    }
}

/// Temperature-free synthetic nuclide: flat potential scattering, a 1/v
/// capture term and a set of Lorentzian resonances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceNuclide {
    pub id: String,
    pub mass_number: f64,
    /// Potential scattering cross section (barns).
    pub sigma_pot: f64,
    /// 1/v capture amplitude at [`E_REF_THERMAL`] (barns).
    #[serde(default)]
    pub sigma_cap_thermal: f64,
    /// Optional smooth high-energy falloff of the potential scattering,
    /// `sigma_pot / sqrt(1 + E / falloff)`.
    #[serde(default)]
    pub pot_falloff_ev: Option<f64>,
    #[serde(default)]
    pub resonances: Vec<Resonance>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointXs {
    pub total: f64,
    pub scatter: f64,
    pub absorb: f64,
}

impl ResonanceNuclide {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("nuclide `{}`: {m}", self.id)));
        if !(self.mass_number >= 1.0) {
            return bad("mass number must be >= 1");
        }
        if !(self.sigma_pot > 0.0) {
            return bad("potential cross section must be > 0");
        }
        if !(self.sigma_cap_thermal >= 0.0) {
            return bad("thermal capture amplitude must be >= 0");
        }
        if let Some(f) = self.pot_falloff_ev {
            if !(f > 0.0) {
                return bad("potential falloff energy must be > 0");
            }
        }
        for r in &self.resonances {
            if !(r.width_ev > 0.0 && r.sigma_peak > 0.0 && r.energy_ev > 0.0) {
                return bad("resonance energy, width and peak must be > 0");
            }
            if !(0.0..=1.0).contains(&r.capture_fraction) {
                return bad("capture fraction must lie in [0, 1]");
            }
        }
        Ok(())
    }

    /// Elastic slowing-down parameter ((A-1)/(A+1))^2.
    pub fn alpha(&self) -> f64 {
        let a = self.mass_number;
        ((a - 1.0) / (a + 1.0)).powi(2)
    }

    /// Pointwise cross sections without the range check.
    #[inline]
    pub fn xs(&self, e: f64) -> PointXs {
        let mut scatter = match self.pot_falloff_ev {
            Some(f) => self.sigma_pot / (1.0 + e / f).sqrt(),
            None => self.sigma_pot,
        };
        let mut absorb = if self.sigma_cap_thermal > 0.0 {
            self.sigma_cap_thermal * (E_REF_THERMAL / e).sqrt()
        } else {
            0.0
        };
        for r in &self.resonances {
            let s = r.shape(e);
            absorb += r.capture_fraction * s;
            scatter += (1.0 - r.capture_fraction) * s;
        }
        PointXs {
            total: scatter + absorb,
            scatter,
            absorb,
        }
    }

    /// Pointwise cross sections at `e` eV; errors outside the global range.
    pub fn eval_pointwise(&self, e: f64) -> Result<PointXs> {
        if !(GLOBAL_E_MIN..=GLOBAL_E_MAX).contains(&e) {
            return Err(Error::EnergyRange {
                value: e,
                lo: GLOBAL_E_MIN,
                hi: GLOBAL_E_MAX,
            });
        }
        Ok(self.xs(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(sigma_pot: f64) -> ResonanceNuclide {
        ResonanceNuclide {
            id: "plain".into(),
            mass_number: 16.0,
            sigma_pot,
            sigma_cap_thermal: 0.0,
            pot_falloff_ev: None,
            resonances: vec![],
        }
    }

    #[test]
    fn flat_nuclide_is_pure_potential_scatter() {
        let n = plain(3.0);
        for e in [1e-5, 1.0, 1e3, 2e7] {
            let x = n.eval_pointwise(e).unwrap();
            assert_eq!((x.total, x.scatter, x.absorb), (3.0, 3.0, 0.0));
        }
    }

    #[test]
    fn peak_and_half_width() {
        let mut n = plain(3.0);
        let r = Resonance {
            energy_ev: 1.0e4,
            width_ev: 40.0,
            sigma_peak: 500.0,
            capture_fraction: 1.0,
        };
        n.resonances.push(r.clone());
        let x = n.eval_pointwise(r.energy_ev).unwrap();
        assert_eq!(x.total, 3.0 + 500.0);
        for e in [r.energy_ev - 20.0, r.energy_ev + 20.0] {
            let add = n.xs(e).total - 3.0;
            assert!((add - 250.0).abs() < 1e-9, "{add}");
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        let n = plain(1.0);
        assert!(matches!(
            n.eval_pointwise(1e-7),
            Err(Error::EnergyRange { .. })
        ));
        assert!(n.eval_pointwise(3e7).is_err());
    }

    #[test]
    fn alpha_limits() {
        let mut n = plain(1.0);
        n.mass_number = 1.0;
        assert_eq!(n.alpha(), 0.0);
        n.mass_number = 56.0;
        let a = n.alpha();
        assert!(a > 0.9 && a < 1.0);
    }

    #[test]
    fn falloff_and_capture() {
        let mut n = plain(20.0);
        n.pot_falloff_ev = Some(3.0e4);
        n.sigma_cap_thermal = 0.33;
        let x = n.xs(E_REF_THERMAL);
        assert!((x.absorb - 0.33).abs() < 1e-15);
        assert!(n.xs(1e6).scatter < 4.0);
    }

    proptest::proptest! {
        #[test]
        fn total_is_sum_of_parts(e in 1.0e-5f64..2.0e7, cf in 0.0f64..=1.0, peak in 1.0f64..1e4) {
            let mut n = plain(3.0);
            n.sigma_cap_thermal = 2.5;
            n.resonances.push(Resonance { energy_ev: 3.0e4, width_ev: 100.0, sigma_peak: peak, capture_fraction: cf });
            let x = n.eval_pointwise(e).unwrap();
            proptest::prop_assert_eq!(x.total, x.scatter + x.absorb);
            proptest::prop_assert!(x.total > 0.0);
            let y = n.eval_pointwise(e).unwrap();
            proptest::prop_assert_eq!(x.total.to_bits(), y.total.to_bits());
        }
    }
}
