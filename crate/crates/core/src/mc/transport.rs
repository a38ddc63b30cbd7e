use crate::grid::{Boundary, Geometry2D};
use crate::vr::{BiasedSource, WeightWindowMap, Window};
use crate::xslib::MgLibrary;
use crate::{Error, Result};

use super::rng::RngStream;
use super::tally::Accumulator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub x: f64,
    pub z: f64,
    pub ix: usize,
    pub iz: usize,
    pub mu: f64,
    pub eta: f64,
    pub xi: f64,
    pub group: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WwAction {
    Pass,
    Split { n: u32, child_weight: f64 },
    Roulette { p_survive: f64, survivor_weight: f64 },
}

/// Splitting above the window, roulette below it, survival at the center.
#[inline]
pub fn weight_window_check(w: f64, window: &Window, n_max: u32) -> WwAction {
    if w > window.hi {
        let n = ((w / window.center).ceil() as u32).clamp(2, n_max.max(2));
        WwAction::Split {
            n,
            child_weight: w / n as f64,
        }
    } else if w < window.lo {
        WwAction::Roulette {
            p_survive: w / window.center,
            survivor_weight: window.center,
        }
    } else {
        WwAction::Pass
    }
}

/// Isotropic unit vector (μ, η, ξ).
#[inline]
pub fn isotropic_direction(rng: &mut RngStream) -> (f64, f64, f64) {
    let xi = 2.0 * rng.uniform() - 1.0;
    let phi = 2.0 * std::f64::consts::PI * rng.uniform();
    let s = (1.0 - xi * xi).max(0.0).sqrt();
    (s * phi.cos(), s * phi.sin(), xi)
}

/// Per material and group: total cross section, absorption probability and
/// the cumulative outgoing-group distribution starting at the group itself.
#[derive(Debug, Clone)]
pub struct GroupPhysics {
    pub n_groups: usize,
    sigma_t: Vec<f64>,
    p_absorb: Vec<f64>,
    scatter_cdf: Vec<Vec<f64>>,
}

impl GroupPhysics {
    pub fn new(lib: &MgLibrary) -> Result<Self> {
        let n = lib.n_groups();
        let mut sigma_t = Vec::new();
        let mut p_absorb = Vec::new();
        let mut scatter_cdf = Vec::new();
        for m in &lib.materials {
            for g in 0..n {
                let t = m.total[g];
                sigma_t.push(t);
                p_absorb.push(if t > 0.0 { m.absorb[g] / t } else { 1.0 });
                let row = m.row(g);
                if row[..g].iter().any(|&v| v != 0.0) {
                    return Err(Error::invalid(format!(
                        "material `{}` upscatters out of group {g}",
                        m.name
                    )));
                }
                let total: f64 = row.iter().sum();
                let mut cdf = Vec::with_capacity(n - g);
                let mut acc = 0.0;
                for v in &row[g..] {
                    acc += v;
                    cdf.push(if total > 0.0 { acc / total } else { 0.0 });
                }
                if total > 0.0 {
                    *cdf.last_mut().unwrap() = 1.0;
                }
                scatter_cdf.push(cdf);
            }
        }
        Ok(GroupPhysics {
            n_groups: n,
            sigma_t,
            p_absorb,
            scatter_cdf,
        })
    }

    #[inline]
    pub fn sigma_t(&self, m: usize, g: usize) -> f64 {
        self.sigma_t[m * self.n_groups + g]
    }

    #[inline]
    pub fn p_absorb(&self, m: usize, g: usize) -> f64 {
        self.p_absorb[m * self.n_groups + g]
    }

    /// Outgoing group for uniform `u`; errors on a zero scattering row.
    pub fn sample_scatter(&self, m: usize, g: usize, u: f64) -> Result<usize> {
        let cdf = &self.scatter_cdf[m * self.n_groups + g];
        if cdf.last().copied().unwrap_or(0.0) == 0.0 {
            return Err(Error::invalid(format!("no scattering out of group {g} in material {m}")));
        }
        Ok(self.sample_unchecked(m, g, u))
    }

    #[inline]
    fn sample_unchecked(&self, m: usize, g: usize, u: f64) -> usize {
        let cdf = &self.scatter_cdf[m * self.n_groups + g];
        g + cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
    }
}

/// Coarse biased source plus the fine-group spectrum inside each coarse group.
#[derive(Debug, Clone)]
pub struct McSource {
    pub biased: BiasedSource,
    /// Fixed emission direction (μ, η, ξ) instead of isotropic emission.
    pub direction: Option<(f64, f64, f64)>,
    fine_groups: Vec<Vec<usize>>,
    fine_cdf: Vec<Vec<f64>>,
}

impl McSource {
    /// `fine_spectrum[g]` is the relative emission in fine group g and
    /// `fine_to_coarse[g]` its coarse group.
    pub fn new(biased: BiasedSource, fine_spectrum: &[f64], fine_to_coarse: &[usize]) -> Result<Self> {
        if fine_spectrum.len() != fine_to_coarse.len() {
            return Err(Error::shape("fine spectrum and group map differ in length"));
        }
        let nc = biased.n_groups;
        let mut fine_groups = vec![Vec::new(); nc];
        let mut weights = vec![Vec::new(); nc];
        for (g, (&s, &k)) in fine_spectrum.iter().zip(fine_to_coarse).enumerate() {
            if k >= nc {
                return Err(Error::shape("fine-to-coarse map points past the source groups"));
            }
            if s > 0.0 {
                fine_groups[k].push(g);
                weights[k].push(s);
            }
        }
        let fine_cdf: Vec<Vec<f64>> = weights
            .iter()
            .map(|w| {
                let total: f64 = w.iter().sum();
                let mut acc = 0.0;
                let mut cdf: Vec<f64> = w.iter().map(|v| {
                    acc += v;
                    acc / total
                }).collect();
                if let Some(l) = cdf.last_mut() {
                    *l = 1.0;
                }
                cdf
            })
            .collect();
        for &(_, k) in &biased.entries {
            if fine_groups[k].is_empty() {
                return Err(Error::invalid(format!(
                    "source emits in coarse group {k} but the fine spectrum is empty there"
                )));
            }
        }
        Ok(McSource {
            biased,
            direction: None,
            fine_groups,
            fine_cdf,
        })
    }

    /// Source on the same group structure as the transport.
    pub fn same_groups(biased: BiasedSource) -> Self {
        let n = biased.n_groups;
        McSource {
            biased,
            direction: None,
            fine_groups: (0..n).map(|g| vec![g]).collect(),
            fine_cdf: vec![vec![1.0]; n],
        }
    }

    fn sample_fine(&self, coarse: usize, u: f64) -> usize {
        let cdf = &self.fine_cdf[coarse];
        self.fine_groups[coarse][cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub tracks: u64,
    pub collisions: u64,
    pub absorptions: u64,
    pub escapes: u64,
    pub splits: u64,
    pub roulette_kills: u64,
    pub roulette_survivals: u64,
}

impl EventCounts {
    pub fn add(&mut self, o: &EventCounts) {
        self.tracks += o.tracks;
        self.collisions += o.collisions;
        self.absorptions += o.absorptions;
        self.escapes += o.escapes;
        self.splits += o.splits;
        self.roulette_kills += o.roulette_kills;
        self.roulette_survivals += o.roulette_survivals;
    }
}

/// Everything a history needs, resolved once per run.
pub(crate) struct Transport<'a> {
    pub geom: &'a Geometry2D,
    pub physics: GroupPhysics,
    pub cell_material: Vec<usize>,
    pub inv_volume: Vec<f64>,
    pub source: &'a McSource,
    pub windows: Option<&'a WeightWindowMap>,
    pub tally_group: Vec<usize>,
    pub nonthermal: Vec<bool>,
    pub bins_per_cell: usize,
    pub max_split: u32,
    pub seed: u64,
}

enum Fate {
    Alive,
    Dead,
}

impl Transport<'_> {
    #[inline]
    fn score(&self, acc: &mut Accumulator, h: u64, c: usize, g: usize, value: f64) {
        let base = c * self.bins_per_cell;
        acc.score(base + self.tally_group[g], h, value);
        if self.nonthermal[g] {
            acc.score(base + self.bins_per_cell - 1, h, value);
        }
    }

    #[inline]
    fn check_window(&self, p: &mut Particle, rng: &mut RngStream, bank: &mut Vec<Particle>, ev: &mut EventCounts) -> Fate {
        let Some(ww) = self.windows else {
            return Fate::Alive;
        };
        let c = p.ix + self.geom.nx() * p.iz;
        let Some(win) = ww.window(c, p.group) else {
            return Fate::Alive;
        };
        match weight_window_check(p.weight, &win, self.max_split) {
            WwAction::Pass => Fate::Alive,
            WwAction::Split { n, child_weight } => {
                p.weight = child_weight;
                ev.splits += (n - 1) as u64;
                for _ in 1..n {
                    bank.push(*p);
                }
                Fate::Alive
            }
            WwAction::Roulette {
                p_survive,
                survivor_weight,
            } => {
                if rng.uniform() < p_survive {
                    p.weight = survivor_weight;
                    ev.roulette_survivals += 1;
                    Fate::Alive
                } else {
                    ev.roulette_kills += 1;
                    Fate::Dead
                }
            }
        }
    }

    pub fn run_history(&self, h: u64, acc: &mut Accumulator, bank: &mut Vec<Particle>, ev: &mut EventCounts) {
        let mut rng = RngStream::new(self.seed, super::rng::StreamPurpose::Transport, h);
        let geom = self.geom;
        let nx = geom.nx();
        let nz = geom.nz();
        let src = &self.source.biased;

        let k = src.sample(rng.uniform());
        let (c0, coarse) = src.entries[k];
        let group = self.source.sample_fine(coarse, rng.uniform());
        let (ix, iz) = (c0 % nx, c0 / nx);
        let x = geom.x_edges[ix] + rng.uniform() * geom.dx(ix);
        let z = geom.z_edges[iz] + rng.uniform() * geom.dz(iz);
        let (mu, eta, xi) = match self.source.direction {
            Some(d) => d,
            None => isotropic_direction(&mut rng),
        };
        bank.clear();
        bank.push(Particle {
            x,
            z,
            ix,
            iz,
            mu,
            eta,
            xi,
            group,
            weight: src.born_weight[k],
        });

        while let Some(mut p) = bank.pop() {
            loop {
                let c = p.ix + nx * p.iz;
                let m = self.cell_material[c];
                let st = self.physics.sigma_t(m, p.group);
                let d_coll = if st > 0.0 { -rng.open_uniform().ln() / st } else { f64::INFINITY };
                let dx = if p.mu > 0.0 {
                    (geom.x_edges[p.ix + 1] - p.x) / p.mu
                } else if p.mu < 0.0 {
                    (geom.x_edges[p.ix] - p.x) / p.mu
                } else {
                    f64::INFINITY
                };
                let dz = if p.xi > 0.0 {
                    (geom.z_edges[p.iz + 1] - p.z) / p.xi
                } else if p.xi < 0.0 {
                    (geom.z_edges[p.iz] - p.z) / p.xi
                } else {
                    f64::INFINITY
                };
                ev.tracks += 1;
                if d_coll < dx && d_coll < dz {
                    self.score(acc, h, c, p.group, p.weight * d_coll * self.inv_volume[c]);
                    p.x += p.mu * d_coll;
                    p.z += p.xi * d_coll;
                    ev.collisions += 1;
                    if rng.uniform() < self.physics.p_absorb(m, p.group) {
                        ev.absorptions += 1;
                        break;
                    }
                    p.group = self.physics.sample_unchecked(m, p.group, rng.uniform());
                    let (mu, eta, xi) = isotropic_direction(&mut rng);
                    p.mu = mu;
                    p.eta = eta;
                    p.xi = xi;
                    if let Fate::Dead = self.check_window(&mut p, &mut rng, bank, ev) {
                        break;
                    }
                    continue;
                }
                let cross_x = dx <= dz;
                let d = if cross_x { dx } else { dz };
                self.score(acc, h, c, p.group, p.weight * d * self.inv_volume[c]);
                let escaped = if cross_x {
                    p.z += p.xi * d;
                    if p.mu > 0.0 {
                        p.x = geom.x_edges[p.ix + 1];
                        if p.ix + 1 < nx {
                            p.ix += 1;
                            false
                        } else {
                            geom.x_boundary == Boundary::Vacuum
                        }
                    } else {
                        p.x = geom.x_edges[p.ix];
                        if p.ix > 0 {
                            p.ix -= 1;
                            false
                        } else {
                            geom.x_boundary == Boundary::Vacuum
                        }
                    }
                } else {
                    p.x += p.mu * d;
                    if p.xi > 0.0 {
                        p.z = geom.z_edges[p.iz + 1];
                        if p.iz + 1 < nz {
                            p.iz += 1;
                            false
                        } else {
                            geom.z_boundary == Boundary::Vacuum
                        }
                    } else {
                        p.z = geom.z_edges[p.iz];
                        if p.iz > 0 {
                            p.iz -= 1;
                            false
                        } else {
                            geom.z_boundary == Boundary::Vacuum
                        }
                    }
                };
                if escaped {
                    ev.escapes += 1;
                    break;
                }
                let c_new = p.ix + nx * p.iz;
                if c_new == c {
                    // Reflective face: mirror the crossing component.
                    if cross_x {
                        p.mu = -p.mu;
                    } else {
                        p.xi = -p.xi;
                    }
                    continue;
                }
                if let Fate::Dead = self.check_window(&mut p, &mut rng, bank, ev) {
                    break;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{library, material, simple_groups};
    use crate::mc::rng::StreamPurpose;

    fn window(c: f64) -> Window {
        Window {
            lo: c / 10f64.sqrt(),
            center: c,
            hi: c * 10f64.sqrt(),
        }
    }

    #[test]
    fn window_actions() {
        let w = window(2.0);
        assert_eq!(weight_window_check(2.0, &w, 100), WwAction::Pass);
        assert_eq!(
            weight_window_check(10.0, &w, 100),
            WwAction::Split {
                n: 5,
                child_weight: 2.0
            }
        );
        assert_eq!(
            weight_window_check(0.4, &w, 100),
            WwAction::Roulette {
                p_survive: 0.2,
                survivor_weight: 2.0
            }
        );
        match weight_window_check(1e9, &w, 1000) {
            WwAction::Split { n, child_weight } => assert_eq!((n, child_weight), (1000, 1e6)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn roulette_expectation() {
        let w = window(1.0);
        let mut rng = RngStream::new(11, StreamPurpose::Test, 0);
        let n = 1_000_000;
        let mut total = 0.0;
        for _ in 0..n {
            if let WwAction::Roulette { p_survive, survivor_weight } = weight_window_check(0.2, &w, 1000) {
                if rng.uniform() < p_survive {
                    total += survivor_weight;
                }
            }
        }
        let mean = total / n as f64;
        assert!((mean / 0.2 - 1.0).abs() < 5e-3, "{mean}");
    }

    fn physics() -> GroupPhysics {
        let m = material(
            "m",
            &[1.0, 1.0, 1.0],
            &[0.1, 0.2, 0.3],
            &[0.2, 0.5, 0.2, 0.0, 0.0, 0.8, 0.0, 0.0, 0.7],
        );
        GroupPhysics::new(&library(simple_groups(3), vec![m])).unwrap()
    }

    #[test]
    fn degenerate_and_normalized_rows() {
        let p = physics();
        for u in [0.0, 0.3, 0.999] {
            assert_eq!(p.sample_scatter(0, 1, u).unwrap(), 2);
            assert_eq!(p.sample_scatter(0, 2, u).unwrap(), 2);
        }
        assert_eq!(*p.scatter_cdf[0].last().unwrap(), 1.0);
        let zero = material("z", &[1.0, 1.0], &[1.0, 1.0], &[0.0; 4]);
        let pz = GroupPhysics::new(&library(simple_groups(2), vec![zero])).unwrap();
        assert!(pz.sample_scatter(0, 0, 0.5).is_err());
    }

    #[test]
    fn scatter_frequencies_chi_square() {
        let p = physics();
        let mut rng = RngStream::new(5, StreamPurpose::Test, 1);
        let n = 1_000_000;
        let mut counts = [0u64; 3];
        for _ in 0..n {
            counts[p.sample_scatter(0, 0, rng.uniform()).unwrap()] += 1;
        }
        let expected = [0.2 / 0.9, 0.5 / 0.9, 0.2 / 0.9];
        let chi2: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&o, e)| {
                let e = e * n as f64;
                (o as f64 - e).powi(2) / e
            })
            .sum();
        // 99th percentile of chi-square with 2 degrees of freedom.
        assert!(chi2 < 9.21, "chi2 = {chi2}");
    }

    #[test]
    fn upscatter_rejected() {
        let m = material("m", &[1.0, 1.0], &[0.5, 0.5], &[0.5, 0.0, 0.0, 0.5]);
        assert!(GroupPhysics::new(&library(simple_groups(2), vec![m])).is_ok());
        let m = material("m", &[1.0, 1.0, 1.0], &[0.5; 3], &[0.5, 0.0, 0.0, 0.1, 0.4, 0.0, 0.0, 0.0, 0.5]);
        assert!(GroupPhysics::new(&library(simple_groups(3), vec![m])).is_err());
    }

    #[test]
    fn isotropic_directions_are_unit_and_centered() {
        let mut rng = RngStream::new(3, StreamPurpose::Test, 2);
        let n = 200_000;
        let (mut sx, mut sz, mut sz2) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let (a, b, c) = isotropic_direction(&mut rng);
            assert!((a * a + b * b + c * c - 1.0).abs() < 1e-12);
            sx += a;
            sz += c;
            sz2 += c * c;
        }
        let n = n as f64;
        assert!((sx / n).abs() < 0.01 && (sz / n).abs() < 0.01);
        assert!((sz2 / n - 1.0 / 3.0).abs() < 0.01);
    }
}
