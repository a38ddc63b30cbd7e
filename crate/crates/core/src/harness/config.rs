use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detsolver::SolverSettings;
use crate::grid::GeometryConfig;
use crate::mc::McSettings;
use crate::vr::{AdjointSourceSpec, WindowSettings};
use crate::xslib::{
    Constituent, EnergyGroupStructure, MaterialComposition, Resonance, ResonanceNuclide, WeightSpectrum,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub e_max_ev: f64,
    pub e_min_ev: f64,
    pub thermal_cutoff_ev: f64,
    /// Equal-lethargy nonthermal groups of the deterministic structure.
    pub coarse_nonthermal: usize,
    /// Total groups of the Monte Carlo structure, nested in the coarse one.
    pub fine_total: usize,
    pub fine_refine_lo_ev: f64,
    pub fine_refine_hi_ev: f64,
    pub fine_refine_factor: f64,
}

impl GroupConfig {
    pub fn coarse(&self) -> Result<EnergyGroupStructure> {
        EnergyGroupStructure::equal_lethargy(self.e_max_ev, self.thermal_cutoff_ev, self.e_min_ev, self.coarse_nonthermal)
    }

    pub fn fine(&self) -> Result<EnergyGroupStructure> {
        self.coarse()?
            .refined(self.fine_total, self.fine_refine_lo_ev, self.fine_refine_hi_ev, self.fine_refine_factor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Fission-shape temperature of the weighting flux.
    pub theta_ev: f64,
    /// Energy where the fission shape joins the 1/E range.
    pub join_ev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    /// Region emitting uniformly; total emission is normalized to one.
    pub region: String,
    pub fission_theta_ev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryConfig {
    /// Material whose res/fine chord length is 4V/S of the plate region.
    #[serde(default)]
    pub plate_material: Option<String>,
    #[serde(default = "yes")]
    pub include_escape: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrConfig {
    /// `false` runs analog Monte Carlo and skips the adjoint stages.
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub adjoint: AdjointSourceSpec,
    #[serde(default)]
    pub windows: WindowSettings,
}

impl Default for VrConfig {
    fn default() -> Self {
        VrConfig {
            enabled: true,
            adjoint: AdjointSourceSpec::default(),
            windows: WindowSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tag: String,
    pub output_dir: PathBuf,
    pub geometry: GeometryConfig,
    pub nuclides: Vec<ResonanceNuclide>,
    pub materials: Vec<MaterialComposition>,
    pub groups: GroupConfig,
    pub spectrum: SpectrumConfig,
    pub source: SourceConfig,
    pub library: LibraryConfig,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub vr: VrConfig,
    pub mc: McSettings,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        if cfg.output_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.output_dir = dir.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn spectrum(&self) -> WeightSpectrum {
        WeightSpectrum::standard(
            self.groups.e_min_ev,
            self.groups.thermal_cutoff_ev,
            self.spectrum.join_ev,
            self.groups.e_max_ev,
            self.spectrum.theta_ev,
        )
    }

    /// The x–z plate benchmark (or its no-plate twin) with the synthetic
    /// iron, hydrogen and oxygen nuclides.
    pub fn benchmark(with_plate: bool) -> Self {
        let tag = if with_plate { "plate" } else { "no_plate" };
        RunConfig {
            tag: tag.to_string(),
            output_dir: PathBuf::from(format!("out/{tag}")),
            geometry: GeometryConfig::benchmark(with_plate),
            nuclides: benchmark_nuclides(),
            materials: benchmark_materials(),
            groups: GroupConfig {
                e_max_ev: 2e7,
                e_min_ev: 1e-5,
                thermal_cutoff_ev: 0.625,
                coarse_nonthermal: 26,
                fine_total: 240,
                fine_refine_lo_ev: 1e3,
                fine_refine_hi_ev: 1e6,
                fine_refine_factor: 4.0,
            },
            spectrum: SpectrumConfig {
                theta_ev: 1.4e6,
                join_ev: 1e5,
            },
            source: SourceConfig {
                region: crate::grid::REGION_SOURCE.to_string(),
                fission_theta_ev: 1.33e6,
            },
            library: LibraryConfig {
                plate_material: with_plate.then(|| "plate_steel".to_string()),
                include_escape: true,
            },
            solver: SolverSettings::default(),
            vr: VrConfig::default(),
            mc: McSettings::new(10_000_000, 20_240_601),
        }
    }
}

fn resonance(energy_ev: f64, rel_width: f64, sigma_peak: f64, capture_fraction: f64) -> Resonance {
    Resonance {
        energy_ev,
        width_ev: rel_width * energy_ev,
        sigma_peak,
        capture_fraction,
    }
}

pub fn benchmark_nuclides() -> Vec<ResonanceNuclide> {
    vec![
        ResonanceNuclide {
            id: "ironlike".into(),
            mass_number: 56.0,
            sigma_pot: 3.0,
            sigma_cap_thermal: 2.56,
            pot_falloff_ev: None,
            resonances: vec![
                resonance(1.15e3, 0.04, 400.0, 0.05),
                resonance(7.8e3, 0.05, 300.0, 0.02),
                resonance(2.8e4, 0.06, 250.0, 0.01),
                resonance(5.2e4, 0.05, 220.0, 0.01),
                resonance(1.2e5, 0.06, 180.0, 0.005),
                resonance(2.6e5, 0.05, 150.0, 0.005),
                resonance(4.5e5, 0.05, 120.0, 0.002),
                resonance(8.5e5, 0.06, 80.0, 0.002),
            ],
        },
        ResonanceNuclide {
            id: "hydrogen".into(),
            mass_number: 1.0,
            sigma_pot: 20.0,
            sigma_cap_thermal: 0.33,
            pot_falloff_ev: Some(3e4),
            resonances: vec![],
        },
        ResonanceNuclide {
            id: "oxygenlike".into(),
            mass_number: 16.0,
            sigma_pot: 4.0,
            sigma_cap_thermal: 0.0,
            pot_falloff_ev: None,
            resonances: vec![],
        },
    ]
}

fn mix(name: &str, parts: &[(&str, f64)]) -> MaterialComposition {
    MaterialComposition {
        name: name.to_string(),
        nuclides: parts
            .iter()
            .map(|(n, d)| Constituent {
                nuclide: n.to_string(),
                density: *d,
            })
            .collect(),
        chord_length_cm: None,
    }
}

pub fn benchmark_materials() -> Vec<MaterialComposition> {
    vec![
        mix("source_mix", &[("hydrogen", 0.0669), ("oxygenlike", 0.0334), ("ironlike", 0.0424)]),
        mix("steel", &[("ironlike", 0.0848)]),
        mix("plate_steel", &[("ironlike", 0.0848)]),
        mix("water", &[("hydrogen", 0.0669), ("oxygenlike", 0.0334)]),
        mix("air", &[("oxygenlike", 5.0e-5)]),
    ]
}
