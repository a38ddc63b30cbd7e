use std::f64::consts::PI;

use crate::{Error, Result};

/// One discrete direction. `eta` is the cosine with the (symmetric) y axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ordinate {
    pub mu: f64,
    pub eta: f64,
    pub xi: f64,
    pub weight: f64,
}

/// Product Gauss-Legendre (polar, about y) × uniform azimuthal quadrature.
/// Weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    pub n_polar: usize,
    pub n_azim: usize,
    pub ordinates: Vec<Ordinate>,
}

/// Gauss-Legendre nodes and weights on [-1, 1] (weights sum to 2).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `n_polar` Gauss-Legendre levels per hemisphere × `n_azim` azimuthal angles,
/// mirrored into the lower hemisphere: `2 * n_polar * n_azim` ordinates.
/// The upper hemisphere comes first, the mirror image follows in the same order.
pub fn build_quadrature(n_polar: usize, n_azim: usize) -> Result<AngularQuadrature> {
    if n_polar < 2 || n_polar % 2 != 0 {
        return Err(Error::config(format!("n_polar must be even and >= 2, got {n_polar}")));
    }
    if n_azim < 2 {
        return Err(Error::config(format!("n_azim must be >= 2, got {n_azim}")));
    }
    let (nodes, weights) = gauss_legendre(2 * n_polar);
    let azimuths: Vec<f64> = (0..n_azim)
        .map(|k| {
            if n_azim % 4 == 0 {
                (k as f64 + 0.5) * 2.0 * PI / n_azim as f64
            } else {
                PI / 4.0 + 2.0 * PI * k as f64 / n_azim as f64
            }
        })
        .collect();
    let mut upper = Vec::with_capacity(n_polar * n_azim);
    for (eta, wp) in nodes.iter().zip(&weights).filter(|(e, _)| **e > 0.0) {
        let sin = (1.0 - eta * eta).sqrt();
        for phi in &azimuths {
            upper.push(Ordinate {
                mu: sin * phi.cos(),
                eta: *eta,
                xi: sin * phi.sin(),
                weight: wp / (2.0 * n_azim as f64),
            });
        }
    }
    let mut ordinates = upper.clone();
    ordinates.extend(upper.iter().map(|o| Ordinate { eta: -o.eta, ..*o }));
    Ok(AngularQuadrature {
        n_polar,
        n_azim,
        ordinates,
    })
}

impl AngularQuadrature {
    pub fn len(&self) -> usize {
        self.ordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinates.is_empty()
    }

    /// Upper-hemisphere ordinates with doubled weights; sufficient for
    /// problems uniform in y.
    pub fn upper_hemisphere(&self) -> Vec<Ordinate> {
        self.ordinates[..self.ordinates.len() / 2]
            .iter()
            .map(|o| Ordinate {
                weight: 2.0 * o.weight,
                ..*o
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let integral = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((integral(0) - 2.0).abs() < 1e-14);
        assert!((integral(2) - 2.0 / 3.0).abs() < 1e-14);
        assert!((integral(10) - 2.0 / 11.0).abs() < 1e-13);
        assert!(integral(5).abs() < 1e-14);
    }

    #[test]
    fn counts() {
        let q = build_quadrature(4, 4).unwrap();
        assert_eq!(q.len(), 32);
        assert_eq!(q.upper_hemisphere().len(), 16);
    }

    #[test]
    fn rejects_bad_orders() {
        assert!(build_quadrature(3, 4).is_err());
        assert!(build_quadrature(0, 4).is_err());
        assert!(build_quadrature(2, 1).is_err());
    }

    proptest::proptest! {
        #[test]
        fn moment_conditions(half in 1usize..6, n_azim in 2usize..20) {
            let q = build_quadrature(2 * half, n_azim).unwrap();
            let sum = |f: &dyn Fn(&Ordinate) -> f64| q.ordinates.iter().map(|o| o.weight * f(o)).sum::<f64>();
            proptest::prop_assert!((sum(&|_| 1.0) - 1.0).abs() < 1e-14);
            proptest::prop_assert!(sum(&|o| o.mu).abs() < 1e-14);
            proptest::prop_assert!(sum(&|o| o.xi).abs() < 1e-14);
            proptest::prop_assert!((sum(&|o| o.mu * o.mu) - 1.0 / 3.0).abs() < 1e-12);
            proptest::prop_assert!((sum(&|o| o.xi * o.xi) - 1.0 / 3.0).abs() < 1e-12);
            for o in &q.ordinates {
                proptest::prop_assert!((o.mu * o.mu + o.eta * o.eta + o.xi * o.xi - 1.0).abs() < 1e-12);
            }
        }
    }
}
