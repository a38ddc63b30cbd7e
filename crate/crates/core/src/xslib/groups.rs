use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Energy group edges in eV, strictly decreasing; group 0 is the highest
/// energy group and the last group is the single thermal group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyGroupStructure {
    bounds: Vec<f64>,
    thermal_cutoff_ev: f64,
}

impl EnergyGroupStructure {
    pub fn new(bounds: Vec<f64>, thermal_cutoff_ev: f64) -> Result<Self> {
        if bounds.len() < 3 {
            return Err(Error::config("group structure needs at least 2 groups"));
        }
        if bounds.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::config("group bounds must be finite and positive"));
        }
        if bounds.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("group bounds must be strictly decreasing"));
        }
        let n = bounds.len() - 1;
        let thermal = (0..n).filter(|&g| bounds[g] <= thermal_cutoff_ev * (1.0 + 1e-12)).count();
        if thermal != 1 || bounds[n - 1] > thermal_cutoff_ev * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "group structure must have exactly one thermal group below {thermal_cutoff_ev} eV (found {thermal})"
            )));
        }
        Ok(EnergyGroupStructure {
            bounds,
            thermal_cutoff_ev,
        })
    }

    /// A single group spanning [e_min, e_max], used by one-group test problems.
    pub(crate) fn single(e_max: f64, e_min: f64) -> Self {
        EnergyGroupStructure {
            bounds: vec![e_max, e_min],
            thermal_cutoff_ev: e_max,
        }
    }

    /// `n_nonthermal` equal-lethargy groups from `e_max` to `cutoff`, plus one
    /// thermal group down to `e_min`.
    pub fn equal_lethargy(e_max: f64, cutoff: f64, e_min: f64, n_nonthermal: usize) -> Result<Self> {
        if n_nonthermal == 0 || !(e_max > cutoff && cutoff > e_min) {
            return Err(Error::config("bad equal-lethargy group request"));
        }
        let du = (e_max / cutoff).ln() / n_nonthermal as f64;
        let mut bounds: Vec<f64> = (0..n_nonthermal).map(|i| e_max * (-(i as f64) * du).exp()).collect();
        bounds.push(cutoff);
        bounds.push(e_min);
        Self::new(bounds, cutoff)
    }

    /// Subdivides every nonthermal group of `self` into equal-lethargy pieces
    /// so the result has `total` groups. Groups overlapping
    /// `[refine_lo, refine_hi]` receive `refine_factor` times the density of
    /// the others. The thermal group is kept whole.
    pub fn refined(&self, total: usize, refine_lo: f64, refine_hi: f64, refine_factor: f64) -> Result<Self> {
        let n = self.len();
        let nonthermal = n - 1;
        if total < n {
            return Err(Error::config("refined structure must have at least as many groups"));
        }
        let target = total - 1;
        let dens: Vec<f64> = (0..nonthermal)
            .map(|g| {
                let (hi, lo) = self.edges(g);
                let w = (hi / lo).ln();
                if hi > refine_lo && lo < refine_hi {
                    w * refine_factor
                } else {
                    w
                }
            })
            .collect();
        let sum: f64 = dens.iter().sum();
        // largest-remainder apportionment with at least one group each
        let raw: Vec<f64> = dens.iter().map(|d| d / sum * target as f64).collect();
        let mut counts: Vec<usize> = raw.iter().map(|r| (r.floor() as usize).max(1)).collect();
        let mut assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..nonthermal).collect();
        order.sort_by(|&a, &b| {
            let ra = raw[a] - raw[a].floor();
            let rb = raw[b] - raw[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut k = 0;
        while assigned < target {
            counts[order[k % nonthermal]] += 1;
            assigned += 1;
            k += 1;
        }
        while assigned > target {
            let g = (0..nonthermal)
                .filter(|&g| counts[g] > 1)
                .max_by(|&a, &b| (counts[a] as f64 - raw[a]).total_cmp(&(counts[b] as f64 - raw[b])))
                .ok_or_else(|| Error::config("cannot apportion refined groups"))?;
            counts[g] -= 1;
            assigned -= 1;
        }
        let mut bounds = Vec::with_capacity(total + 1);
        for g in 0..nonthermal {
            let (hi, lo) = self.edges(g);
            let du = (hi / lo).ln() / counts[g] as f64;
            for i in 0..counts[g] {
                bounds.push(hi * (-(i as f64) * du).exp());
            }
        }
        bounds.push(self.bounds[n - 1]);
        bounds.push(self.bounds[n]);
        Self::new(bounds, self.thermal_cutoff_ev)
    }

    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn thermal_cutoff_ev(&self) -> f64 {
        self.thermal_cutoff_ev
    }

    pub fn thermal_group(&self) -> usize {
        self.len() - 1
    }

    pub fn is_thermal(&self, g: usize) -> bool {
        g == self.thermal_group()
    }

    /// (upper, lower) edge of group `g`.
    #[inline]
    pub fn edges(&self, g: usize) -> (f64, f64) {
        (self.bounds[g], self.bounds[g + 1])
    }

    pub fn group_of(&self, e: f64) -> Option<usize> {
        if e > self.bounds[0] || e < *self.bounds.last().unwrap() {
            return None;
        }
        // bounds decreasing
        let idx = self.bounds.partition_point(|&b| b >= e);
        Some(idx.saturating_sub(1).min(self.len() - 1))
    }

    /// Index of the group of `coarse` containing each group of `self`; errors
    /// unless every edge of `coarse` is also an edge of `self`.
    pub fn coarse_map(&self, coarse: &EnergyGroupStructure) -> Result<Vec<usize>> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs());
        let mut map = Vec::with_capacity(self.len());
        let mut cg = 0usize;
        for g in 0..self.len() {
            let (hi, lo) = self.edges(g);
            let (chi, clo) = coarse.edges(cg);
            if hi > chi * (1.0 + 1e-10) || lo < clo * (1.0 - 1e-10) {
                return Err(Error::config("fine group structure does not nest in the coarse one"));
            }
            map.push(cg);
            if close(lo, clo) && cg + 1 < coarse.len() {
                cg += 1;
            }
        }
        if map.last() != Some(&(coarse.len() - 1)) || !close(self.bounds[0], coarse.bounds[0]) {
            return Err(Error::config("fine group structure does not span the coarse one"));
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coarse() -> EnergyGroupStructure {
        EnergyGroupStructure::equal_lethargy(2e7, 0.625, 1e-5, 26).unwrap()
    }

    #[test]
    fn counts_and_thermal() {
        let c = coarse();
        assert_eq!(c.len(), 27);
        assert_eq!(c.thermal_group(), 26);
        assert_eq!(c.group_of(1.0e-3), Some(26));
        assert_eq!(c.group_of(1.9e7), Some(0));
        assert_eq!(c.group_of(3e7), None);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(EnergyGroupStructure::new(vec![10.0, 1.0], 0.625).is_err());
        assert!(EnergyGroupStructure::new(vec![10.0, 10.0, 0.1], 0.625).is_err());
        // two groups below the cutoff
        assert!(EnergyGroupStructure::new(vec![10.0, 0.5, 0.1, 0.01], 0.625).is_err());
        // no thermal group
        assert!(EnergyGroupStructure::new(vec![10.0, 5.0, 1.0], 0.625).is_err());
    }

    #[test]
    fn refined_nests() {
        let c = coarse();
        let f = c.refined(240, 1e3, 1e6, 2.0).unwrap();
        assert_eq!(f.len(), 240);
        let map = f.coarse_map(&c).unwrap();
        assert_eq!(map.len(), 240);
        assert_eq!(*map.last().unwrap(), 26);
        assert!(map.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        for cg in 0..27 {
            assert!(map.contains(&cg));
        }
    }

    #[test]
    fn non_nesting_rejected() {
        let c = coarse();
        let other = EnergyGroupStructure::equal_lethargy(2e7, 0.625, 1e-5, 25).unwrap();
        assert!(other.coarse_map(&c).is_err());
    }
}
