use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::condense::{
    background_xs, factors_from, group_quadrature, transfer_fractions, weighted_averages,
    GroupQuadrature, WeightedAverages,
};
use super::groups::EnergyGroupStructure;
use super::nuclide::{Resonance, ResonanceNuclide};
use super::spectrum::WeightSpectrum;
use crate::textio::{fmt_f64, fmt_f64_list, parse_f64_list, parse_num, Document};
use crate::{Error, Result};

/// Background cross section used for the dilute library (barns).
pub const DILUTE_SIGMA0: f64 = 1.0e10;

const FINE_MIN_GROUPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LibraryMode {
    Dilute,
    Res,
    Fine,
}

impl fmt::Display for LibraryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LibraryMode::Dilute => "dilute",
            LibraryMode::Res => "res",
            LibraryMode::Fine => "fine",
        })
    }
}

impl FromStr for LibraryMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dilute" => Ok(LibraryMode::Dilute),
            "res" => Ok(LibraryMode::Res),
            "fine" => Ok(LibraryMode::Fine),
            _ => Err(Error::config(format!("unknown library mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constituent {
    pub nuclide: String,
    /// Number density (atoms / barn cm).
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialComposition {
    pub name: String,
    pub nuclides: Vec<Constituent>,
    /// Mean chord length (cm); `None` means the 10 000 cm escape-free value.
    #[serde(default)]
    pub chord_length_cm: Option<f64>,
}

impl MaterialComposition {
    pub fn validate(&self) -> Result<()> {
        if self.nuclides.is_empty() {
            return Err(Error::config(format!("material `{}` has no nuclides", self.name)));
        }
        if self.nuclides.iter().any(|c| !(c.density > 0.0)) {
            return Err(Error::config(format!(
                "material `{}` has a non-positive number density",
                self.name
            )));
        }
        if let Some(l) = self.chord_length_cm {
            if !(l > 0.0) {
                return Err(Error::config(format!("material `{}` has a bad chord length", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LibraryOptions {
    pub mode: LibraryMode,
    /// Per-material chord length overrides (cm), used by the res/fine policy.
    pub chord_overrides: BTreeMap<String, f64>,
    /// Whether the res/fine policy adds the escape cross section.
    pub include_escape: bool,
}

impl LibraryOptions {
    pub fn new(mode: LibraryMode) -> Self {
        LibraryOptions {
            mode,
            chord_overrides: BTreeMap::new(),
            include_escape: true,
        }
    }
}

/// Macroscopic multigroup data of one material (cm^-1).
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialXs {
    pub name: String,
    pub total: Vec<f64>,
    pub absorb: Vec<f64>,
    /// Row-major `g -> g'` scattering transfer matrix.
    pub transfer: Vec<f64>,
}

impl MaterialXs {
    pub fn n_groups(&self) -> usize {
        self.total.len()
    }

    pub fn row(&self, g: usize) -> &[f64] {
        let n = self.n_groups();
        &self.transfer[g * n..(g + 1) * n]
    }

    pub fn scatter(&self, g: usize) -> f64 {
        self.row(g).iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgLibrary {
    pub groups: EnergyGroupStructure,
    pub mode: LibraryMode,
    pub nuclides: Vec<ResonanceNuclide>,
    pub materials: Vec<MaterialXs>,
}

struct NuclideData<'a> {
    nuclide: &'a ResonanceNuclide,
    quads: Vec<GroupQuadrature>,
    dilute: Vec<WeightedAverages>,
}

fn shielded_averages(data: &NuclideData<'_>, spectrum: &WeightSpectrum, sigma0: &[f64]) -> Vec<WeightedAverages> {
    data.quads
        .iter()
        .zip(sigma0)
        .map(|(q, &s0)| weighted_averages(data.nuclide, q, spectrum, Some(s0)))
        .collect()
}

/// Builds a macroscopic self-shielded library for `materials`.
///
/// Shielded microscopic values are `f(σ0) * σ(∞)`; the dilute mode uses
/// σ0 = [`DILUTE_SIGMA0`] everywhere, the res and fine modes use the
/// other-nuclide background plus the escape term of each material's chord
/// length.
pub fn build_library(
    nuclides: &[ResonanceNuclide],
    materials: &[MaterialComposition],
    groups: &EnergyGroupStructure,
    spectrum: &WeightSpectrum,
    opts: &LibraryOptions,
) -> Result<MgLibrary> {
    spectrum.validate()?;
    let bounds = groups.bounds();
    spectrum.check_covers(*bounds.last().unwrap(), bounds[0])?;
    if opts.mode == LibraryMode::Fine && groups.len() < FINE_MIN_GROUPS {
        return Err(Error::config(format!(
            "fine library needs at least {FINE_MIN_GROUPS} groups, got {}",
            groups.len()
        )));
    }
    for n in nuclides {
        n.validate()?;
    }
    for name in opts.chord_overrides.keys() {
        if !materials.iter().any(|m| &m.name == name) {
            return Err(Error::config(format!("chord override for unknown material `{name}`")));
        }
    }

    // Only nuclides referenced by some material are condensed.
    let mut data: BTreeMap<&str, NuclideData<'_>> = BTreeMap::new();
    for m in materials {
        m.validate()?;
        for c in &m.nuclides {
            if data.contains_key(c.nuclide.as_str()) {
                continue;
            }
            let nuclide = nuclides
                .iter()
                .find(|n| n.id == c.nuclide)
                .ok_or_else(|| Error::config(format!("material `{}` references unknown nuclide `{}`", m.name, c.nuclide)))?;
            let mut quads = Vec::with_capacity(groups.len());
            let mut dilute = Vec::with_capacity(groups.len());
            for g in 0..groups.len() {
                let (hi, lo) = groups.edges(g);
                let q = group_quadrature(nuclide, hi, lo)?;
                dilute.push(weighted_averages(nuclide, &q, spectrum, None));
                quads.push(q);
            }
            data.insert(c.nuclide.as_str(), NuclideData { nuclide, quads, dilute });
        }
    }

    let n_groups = groups.len();
    let mut out = Vec::with_capacity(materials.len());
    for m in materials {
        let members: Vec<&NuclideData<'_>> = m.nuclides.iter().map(|c| &data[c.nuclide.as_str()]).collect();
        let sigma0: Vec<Vec<f64>> = match opts.mode {
            LibraryMode::Dilute => vec![vec![DILUTE_SIGMA0; n_groups]; members.len()],
            LibraryMode::Res | LibraryMode::Fine => {
                let mut mat = m.clone();
                if let Some(&l) = opts.chord_overrides.get(&m.name) {
                    mat.chord_length_cm = Some(l);
                }
                // Backgrounds from dilute totals, then once more from shielded totals.
                let mut totals: Vec<Vec<f64>> = members
                    .iter()
                    .map(|d| d.dilute.iter().map(|a| a.total).collect())
                    .collect();
                let mut s0 = Vec::new();
                for pass in 0..2 {
                    s0 = (0..members.len())
                        .map(|j| background_xs(&mat, j, &totals, opts.include_escape))
                        .collect::<Vec<_>>();
                    if pass == 0 {
                        totals = members
                            .iter()
                            .zip(&s0)
                            .map(|(d, s)| shielded_averages(d, spectrum, s).iter().map(|a| a.total).collect())
                            .collect();
                    }
                }
                s0
            }
        };
        let sh: Vec<Vec<WeightedAverages>> = members
            .iter()
            .zip(&sigma0)
            .map(|(d, s0)| shielded_averages(d, spectrum, s0))
            .collect();

        let mut total = vec![0.0; n_groups];
        let mut absorb = vec![0.0; n_groups];
        let mut transfer = vec![0.0; n_groups * n_groups];
        for (j, d) in members.iter().enumerate() {
            let density = m.nuclides[j].density;
            for g in 0..n_groups {
                let f = factors_from(sh[j][g], d.dilute[g]);
                total[g] += density * f.total * d.dilute[g].total;
                absorb[g] += density * f.absorb * d.dilute[g].absorb;
                let scat = density * f.scatter * d.dilute[g].scatter;
                if scat > 0.0 {
                    let frac =
                        transfer_fractions(d.nuclide, groups, g, &d.quads[g], spectrum, Some(sigma0[j][g]));
                    for (k, p) in frac.iter().enumerate() {
                        transfer[g * n_groups + g + k] += scat * p;
                    }
                }
            }
        }
        out.push(MaterialXs {
            name: m.name.clone(),
            total,
            absorb,
            transfer,
        });
    }
    Ok(MgLibrary {
        groups: groups.clone(),
        mode: opts.mode,
        nuclides: nuclides.to_vec(),
        materials: out,
    })
}

const LIBRARY_KIND: &str = "library";

impl MgLibrary {
    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn material_index(&self, name: &str) -> Result<usize> {
        self.materials
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::config(format!("unknown material `{name}`")))
    }

    /// Largest relative violation of `Σ_g' Σ_s,g→g' + Σ_a,g = Σ_t,g`.
    pub fn max_balance_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for m in &self.materials {
            for g in 0..m.n_groups() {
                let t = m.total[g];
                let err = (m.scatter(g) + m.absorb[g] - t).abs() / t.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(err);
            }
        }
        worst
    }

    /// Checks balance, non-negativity and the no-upscatter structure.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_groups();
        let thermal = self.groups.thermal_group();
        for m in &self.materials {
            if m.total.len() != n || m.absorb.len() != n || m.transfer.len() != n * n {
                return Err(Error::shape(format!("material `{}` has wrong group count", m.name)));
            }
            let all = m.total.iter().chain(&m.absorb).chain(&m.transfer);
            if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!("material `{}` has negative or non-finite data", m.name)));
            }
            for g in 0..n {
                for gp in 0..g {
                    if m.row(g)[gp] != 0.0 && !(g == thermal && gp == thermal) {
                        return Err(Error::invalid(format!("material `{}` upscatters {g} -> {gp}", m.name)));
                    }
                }
            }
        }
        let err = self.max_balance_error();
        if err > 1e-10 {
            return Err(Error::invalid(format!("library balance violated by {err:e}")));
        }
        Ok(())
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document::new(LIBRARY_KIND);
        doc.set("mode", self.mode)
            .set("groups", self.n_groups())
            .set("thermal_cutoff_ev", fmt_f64(self.groups.thermal_cutoff_ev()))
            .set("bounds_ev", fmt_f64_list(self.groups.bounds()))
            .set("nuclides", self.nuclides.len())
            .set("materials", self.materials.len());
        for n in &self.nuclides {
            let falloff = n.pot_falloff_ev.map(fmt_f64).unwrap_or_else(|| "-".into());
            doc.push(format!(
                "nuclide {} {} {} {} {} {}",
                n.id,
                fmt_f64(n.mass_number),
                fmt_f64(n.sigma_pot),
                fmt_f64(n.sigma_cap_thermal),
                falloff,
                n.resonances.len()
            ));
            for r in &n.resonances {
                doc.push(format!(
                    "resonance {}",
                    fmt_f64_list(&[r.energy_ev, r.width_ev, r.sigma_peak, r.capture_fraction])
                ));
            }
        }
        let n_groups = self.n_groups();
        for m in &self.materials {
            doc.push(format!("material {}", m.name));
            for g in 0..n_groups {
                let row = m.row(g);
                let first = row.iter().position(|&v| v != 0.0).unwrap_or(g);
                let last = row.iter().rposition(|&v| v != 0.0).unwrap_or(g);
                doc.push(format!(
                    "xs {g} {} {} {first} {}",
                    fmt_f64(m.total[g]),
                    fmt_f64(m.absorb[g]),
                    fmt_f64_list(&row[first..=last])
                ));
            }
        }
        doc
    }

    pub fn hash(&self) -> String {
        self.to_document().hash()
    }

    pub fn from_document(doc: &Document) -> Result<Self> {
        let what = LIBRARY_KIND;
        let mode: LibraryMode = doc.get("mode")?.parse()?;
        let n_groups: usize = doc.get_num("groups")?;
        let cutoff: f64 = doc.get_num("thermal_cutoff_ev")?;
        let bounds = parse_f64_list(doc.get("bounds_ev")?, what)?;
        let groups = EnergyGroupStructure::new(bounds, cutoff)?;
        if groups.len() != n_groups {
            return Err(Error::parse(what, "group count disagrees with bounds"));
        }
        let mut nuclides: Vec<ResonanceNuclide> = Vec::new();
        let mut materials: Vec<MaterialXs> = Vec::new();
        for rec in &doc.records {
            let toks: Vec<&str> = rec.split_whitespace().collect();
            match toks.first().copied() {
                Some("nuclide") if toks.len() == 7 => nuclides.push(ResonanceNuclide {
                    id: toks[1].to_string(),
                    mass_number: parse_num(toks[2], what)?,
                    sigma_pot: parse_num(toks[3], what)?,
                    sigma_cap_thermal: parse_num(toks[4], what)?,
                    pot_falloff_ev: if toks[5] == "-" { None } else { Some(parse_num(toks[5], what)?) },
                    resonances: Vec::with_capacity(parse_num(toks[6], what)?),
                }),
                Some("resonance") if toks.len() == 5 => {
                    let n = nuclides
                        .last_mut()
                        .ok_or_else(|| Error::parse(what, "resonance before nuclide"))?;
                    n.resonances.push(Resonance {
                        energy_ev: parse_num(toks[1], what)?,
                        width_ev: parse_num(toks[2], what)?,
                        sigma_peak: parse_num(toks[3], what)?,
                        capture_fraction: parse_num(toks[4], what)?,
                    });
                }
                Some("material") if toks.len() == 2 => materials.push(MaterialXs {
                    name: toks[1].to_string(),
                    total: Vec::with_capacity(n_groups),
                    absorb: Vec::with_capacity(n_groups),
                    transfer: vec![0.0; n_groups * n_groups],
                }),
                Some("xs") if toks.len() >= 5 => {
                    let m = materials
                        .last_mut()
                        .ok_or_else(|| Error::parse(what, "xs record before material"))?;
                    let g: usize = parse_num(toks[1], what)?;
                    if g != m.total.len() || g >= n_groups {
                        return Err(Error::parse(what, format!("out-of-order xs record for group {g}")));
                    }
                    m.total.push(parse_num(toks[2], what)?);
                    m.absorb.push(parse_num(toks[3], what)?);
                    let first: usize = parse_num(toks[4], what)?;
                    if first + toks.len() - 5 > n_groups {
                        return Err(Error::parse(what, "transfer row too long"));
                    }
                    for (k, t) in toks[5..].iter().enumerate() {
                        m.transfer[g * n_groups + first + k] = parse_num(t, what)?;
                    }
                }
                _ => return Err(Error::parse(what, format!("bad record `{rec}`"))),
            }
        }
        if materials.iter().any(|m| m.total.len() != n_groups) {
            return Err(Error::parse(what, "material with missing group records"));
        }
        Ok(MgLibrary {
            groups,
            mode,
            nuclides,
            materials,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::condense::{bondarenko_factor, infinitely_dilute_mg};
    use super::super::nuclide::Resonance;
    use super::*;

    fn iron() -> ResonanceNuclide {
        ResonanceNuclide {
            id: "fe".into(),
            mass_number: 56.0,
            sigma_pot: 3.0,
            sigma_cap_thermal: 2.5,
            pot_falloff_ev: None,
            resonances: vec![
                Resonance { energy_ev: 2.0e4, width_ev: 80.0, sigma_peak: 900.0, capture_fraction: 0.05 },
                Resonance { energy_ev: 3.0e5, width_ev: 1500.0, sigma_peak: 400.0, capture_fraction: 0.02 },
            ],
        }
    }

    fn hydrogen() -> ResonanceNuclide {
        ResonanceNuclide {
            id: "h".into(),
            mass_number: 1.0,
            sigma_pot: 20.0,
            sigma_cap_thermal: 0.33,
            pot_falloff_ev: Some(3.0e4),
            resonances: vec![],
        }
    }

    fn materials() -> Vec<MaterialComposition> {
        vec![
            MaterialComposition {
                name: "steel".into(),
                nuclides: vec![Constituent { nuclide: "fe".into(), density: 0.0848 }],
                chord_length_cm: None,
            },
            MaterialComposition {
                name: "mix".into(),
                nuclides: vec![
                    Constituent { nuclide: "fe".into(), density: 0.02 },
                    Constituent { nuclide: "h".into(), density: 0.05 },
                ],
                chord_length_cm: None,
            },
        ]
    }

    fn groups() -> EnergyGroupStructure {
        EnergyGroupStructure::equal_lethargy(2e7, 0.625, 1e-5, 12).unwrap()
    }

    fn spectrum() -> WeightSpectrum {
        WeightSpectrum::standard(1e-5, 0.625, 1e5, 2e7, 1.4e6)
    }

    fn build(mode: LibraryMode) -> MgLibrary {
        build_library(&[iron(), hydrogen()], &materials(), &groups(), &spectrum(), &LibraryOptions::new(mode)).unwrap()
    }

    #[test]
    fn balance_and_structure_in_every_mode() {
        for mode in [LibraryMode::Dilute, LibraryMode::Res] {
            let lib = build(mode);
            lib.validate().unwrap();
            assert!(lib.max_balance_error() < 1e-10);
        }
    }

    #[test]
    fn dilute_mode_matches_infinite_dilution() {
        let lib = build(LibraryMode::Dilute);
        let g = groups();
        let fe = infinitely_dilute_mg(&iron(), &g, &spectrum()).unwrap();
        let steel = &lib.materials[0];
        for grp in 0..g.len() {
            let expect = 0.0848 * fe.total[grp];
            assert!(((steel.total[grp] - expect) / expect).abs() < 1e-6);
        }
    }

    #[test]
    fn shielded_entry_is_factor_times_dilute() {
        let lib = build(LibraryMode::Res);
        let g = groups();
        let spec = spectrum();
        let fe = infinitely_dilute_mg(&iron(), &g, &spec).unwrap();
        let steel = &lib.materials[0];
        // single-nuclide material: σ0 is the escape term alone
        let s0 = 1.0 / (0.0848 * 10_000.0);
        for grp in 0..g.len() {
            let f = bondarenko_factor(&iron(), &g, grp, s0, &spec).unwrap();
            let expect = 0.0848 * f.total * fe.total[grp];
            assert!(((steel.total[grp] - expect) / expect).abs() < 1e-12, "group {grp}");
        }
    }

    #[test]
    fn escape_term_vanishes_for_long_chords() {
        let with = build(LibraryMode::Res);
        let mut opts = LibraryOptions::new(LibraryMode::Res);
        opts.include_escape = false;
        let without = build_library(&[iron(), hydrogen()], &materials(), &groups(), &spectrum(), &opts).unwrap();
        // the mixed material has a finite background so the 10 000 cm escape term is negligible
        let (a, b) = (&with.materials[1], &without.materials[1]);
        for g in 0..a.n_groups() {
            assert!(((a.total[g] - b.total[g]) / b.total[g]).abs() < 1e-3);
        }
    }

    #[test]
    fn short_chord_reduces_resonance_shielding() {
        let mut opts = LibraryOptions::new(LibraryMode::Res);
        opts.chord_overrides.insert("steel".into(), 5.5);
        let short = build_library(&[iron(), hydrogen()], &materials(), &groups(), &spectrum(), &opts).unwrap();
        let long = build(LibraryMode::Res);
        let dil = build(LibraryMode::Dilute);
        let g = groups().group_of(2.0e4).unwrap();
        let (s, l, d) = (short.materials[0].total[g], long.materials[0].total[g], dil.materials[0].total[g]);
        assert!(l < s && s < d, "{l} {s} {d}");
    }

    #[test]
    fn unknown_references_are_rejected() {
        let mut mats = materials();
        mats[0].nuclides[0].nuclide = "nope".into();
        assert!(build_library(&[iron()], &mats, &groups(), &spectrum(), &LibraryOptions::new(LibraryMode::Res)).is_err());
        let mut opts = LibraryOptions::new(LibraryMode::Res);
        opts.chord_overrides.insert("ghost".into(), 1.0);
        assert!(build_library(&[iron(), hydrogen()], &materials(), &groups(), &spectrum(), &opts).is_err());
        assert!(build_library(&[iron(), hydrogen()], &materials(), &groups(), &spectrum(), &LibraryOptions::new(LibraryMode::Fine)).is_err());
    }

    #[test]
    fn file_round_trip_is_bit_exact_and_deterministic() {
        let lib = build(LibraryMode::Res);
        let text = lib.to_document().render();
        let back = MgLibrary::from_document(&Document::parse(&text, LIBRARY_KIND).unwrap()).unwrap();
        assert_eq!(back, lib);
        assert_eq!(back.to_document().render(), text);
        assert_eq!(build(LibraryMode::Res).to_document().render(), text);
    }
}
