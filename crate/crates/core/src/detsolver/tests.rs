use super::*;
use crate::fixtures::{library, material, one_group, one_group_library, simple_groups, uniform_mesh};
use crate::grid::build_quadrature;
use proptest::prelude::*;

fn tight() -> SolverSettings {
    SolverSettings {
        tolerance: 1e-10,
        max_iterations: 5000,
        n_polar: 4,
        n_azim: 8,
    }
}

/// 3-group downscatter material with thermal self-scatter.
fn three_group(name: &str, scale: f64) -> crate::xslib::MaterialXs {
    let t = [0.6 * scale, 0.9 * scale, 1.2 * scale];
    let a = [0.02 * scale, 0.05 * scale, 0.3 * scale];
    let tr = [
        0.3 * scale, 0.28 * scale, 0.0, //
        0.0, 0.45 * scale, 0.4 * scale, //
        0.0, 0.0, 0.9 * scale,
    ];
    material(name, &t, &a, &tr)
}

fn duality_fixture() -> (MgLibrary, Geometry2D) {
    let lib = library(simple_groups(3), vec![three_group("a", 1.0), three_group("b", 1.7)]);
    let mut g = uniform_mesh(8, 8, 0.2, 0.2, "a", Boundary::Vacuum);
    g.material_names.push("b".into());
    for iz in 2..6 {
        for ix in 4..6 {
            let c = g.cell(ix, iz);
            g.cell_material[c] = 1;
        }
    }
    (lib, g)
}

#[test]
fn zero_source_gives_zero_flux() {
    let (lib, g) = duality_fixture();
    let q = FixedSource::zeros(g.n_cells(), 3);
    for kind in [FluxKind::Forward, FluxKind::Adjoint] {
        let r = solve(&lib, &g, &q, &tight(), kind).unwrap();
        assert!(r.flux.data.values.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn duality_on_small_fixture() {
    let (lib, g) = duality_fixture();
    let n = g.n_cells();
    let mut q = FixedSource::zeros(n, 3);
    for c in 0..n {
        q.set(c, 0, 1.0);
        q.set(c, 1, 0.25);
    }
    let mut qa = FixedSource::zeros(n, 3);
    for c in 0..n {
        qa.set(c, 2, 1.0 + (c % 3) as f64);
    }
    let settings = SolverSettings {
        tolerance: 1e-8,
        ..tight()
    };
    let fwd = solve(&lib, &g, &q, &settings, FluxKind::Forward).unwrap();
    let adj = solve(&lib, &g, &qa, &settings, FluxKind::Adjoint).unwrap();
    let lhs = inner_product(&q, &adj.flux.data, &g).unwrap();
    let rhs = inner_product(&qa, &fwd.flux.data, &g).unwrap();
    assert!((lhs - rhs).abs() / lhs < 1e-4, "{lhs} vs {rhs}");
}

/// Exact angle-discrete solution for a pure absorber: every ordinate leaves the
/// source cell with ψ = q/Σt·(1 − e^{−τ}) and attenuates exponentially after.
#[test]
fn pure_absorber_attenuation() {
    let sigma = 1.0;
    let dz = 0.1;
    let nz = 150;
    let lib = one_group_library(vec![one_group("abs", sigma, sigma)]);
    let g = {
        let mut g = uniform_mesh(1, nz, 1.0, dz, "abs", Boundary::Reflective);
        g.z_boundary = Boundary::Vacuum;
        g
    };
    let mut q = FixedSource::zeros(nz, 1);
    q.set(0, 0, 1.0);
    let settings = SolverSettings {
        n_polar: 8,
        n_azim: 4,
        ..tight()
    };
    let phi = solve_forward(&lib, &g, &q, &settings).unwrap();

    let ords = build_quadrature(8, 4).unwrap().upper_hemisphere();
    let oracle = |iz: usize| -> f64 {
        ords.iter()
            .filter(|o| o.xi > 0.0)
            .map(|o| {
                let tau = sigma * dz / o.xi;
                let out = (1.0 - (-tau).exp()) / sigma;
                let depth = sigma * (iz as f64 - 1.0) * dz / o.xi;
                o.weight * out * (-depth).exp() * (1.0 - (-tau).exp()) / tau
            })
            .sum()
    };
    // Check the decay over each decade of attenuation below the source.
    let mut start = 1;
    let mut decades = 0;
    for iz in 2..nz {
        if oracle(iz) < 0.1 * oracle(start) {
            let det = phi.get(iz, 0) / phi.get(start, 0);
            let exact = oracle(iz) / oracle(start);
            assert!((det / exact - 1.0).abs() < 0.05, "cells {start}..{iz}: {det} vs {exact}");
            start = iz;
            decades += 1;
        }
    }
    assert!(decades >= 4);
}

#[test]
fn infinite_medium_balance() {
    let lib = one_group_library(vec![one_group("m", 1.0, 0.2)]);
    let g = Geometry2D::infinite_medium("m", 1.0);
    let mut q = FixedSource::zeros(1, 1);
    q.set(0, 0, 3.0);
    let phi = solve_forward(&lib, &g, &q, &tight()).unwrap();
    assert!((phi.get(0, 0) - 15.0).abs() < 1e-6 * 15.0);
}

#[test]
fn self_adjoint_one_group() {
    let lib = one_group_library(vec![one_group("m", 0.8, 0.3)]);
    let g = uniform_mesh(6, 6, 1.0, 1.0, "m", Boundary::Vacuum);
    let mut q = FixedSource::zeros(36, 1);
    q.set(g.cell(2, 3), 0, 1.0);
    let f = solve_forward(&lib, &g, &q, &tight()).unwrap();
    let a = solve_adjoint(&lib, &g, &q, &tight()).unwrap();
    for c in 0..36 {
        assert!((f.get(c, 0) - a.get(c, 0)).abs() <= 1e-9 * f.get(c, 0));
    }
}

#[test]
fn linear_in_source() {
    let (lib, g) = duality_fixture();
    let mut q = FixedSource::zeros(g.n_cells(), 3);
    q.set(g.cell(1, 1), 0, 1.0);
    q.set(g.cell(6, 2), 2, 0.5);
    let mut q2 = q.clone();
    q2.values.iter_mut().for_each(|v| *v *= 2.0);
    let s = SolverSettings::default();
    let a = solve_forward(&lib, &g, &q, &s).unwrap();
    let b = solve_forward(&lib, &g, &q2, &s).unwrap();
    for (x, y) in a.data.values.iter().zip(&b.data.values) {
        assert!((2.0 * x - y).abs() <= 1e-12 * y.abs());
    }
}

#[test]
fn global_balance_and_monotone_residuals() {
    let (lib, g) = duality_fixture();
    let mut q = FixedSource::zeros(g.n_cells(), 3);
    for c in 0..8 {
        q.set(c, 0, 1.0);
    }
    let s = SolverSettings::default();
    let r = solve(&lib, &g, &q, &s, FluxKind::Forward).unwrap();
    assert!(r.balance_error() < 10.0 * s.tolerance, "balance {}", r.balance_error());
    for h in &r.residual_history {
        for w in h.windows(2).skip(3) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{h:?}");
        }
    }
}

#[test]
fn reflective_box_conserves_particles() {
    let (lib, mut g) = duality_fixture();
    g.x_boundary = Boundary::Reflective;
    let mut q = FixedSource::zeros(g.n_cells(), 3);
    q.set(g.cell(0, 3), 0, 1.0);
    let s = SolverSettings::default();
    let r = solve(&lib, &g, &q, &s, FluxKind::Forward).unwrap();
    assert!(r.balance_error() < 1e-3, "balance {}", r.balance_error());
}

#[test]
fn errors() {
    let (lib, g) = duality_fixture();
    let q = FixedSource::zeros(g.n_cells(), 2);
    assert!(matches!(solve_forward(&lib, &g, &q, &tight()), Err(Error::Shape(_))));
    let mut q = FixedSource::zeros(g.n_cells(), 3);
    q.set(0, 2, 1.0);
    let s = SolverSettings {
        max_iterations: 2,
        ..tight()
    };
    assert!(matches!(
        solve_forward(&lib, &g, &q, &s),
        Err(Error::NotConverged { iterations: 2, .. })
    ));
    let bad = SolverSettings {
        tolerance: 1.5,
        ..tight()
    };
    assert!(bad.validate().is_err());
    let mut unknown = g.clone();
    unknown.material_names[0] = "nope".into();
    assert!(solve_forward(&lib, &unknown, &q, &tight()).is_err());
}

#[test]
fn inner_product_counts_volume_and_groups() {
    let g = uniform_mesh(3, 2, 0.5, 2.0, "m", Boundary::Vacuum);
    let ones = CellGroupData::from_values(6, 4, vec![1.0; 24]).unwrap();
    assert_eq!(inner_product(&ones, &ones, &g).unwrap(), g.total_volume() * 4.0);
    let other = CellGroupData::zeros(6, 3);
    assert!(inner_product(&ones, &other, &g).is_err());
}

#[test]
fn response_hand_sum() {
    let lib = library(simple_groups(3), vec![three_group("m", 1.0)]);
    let g = uniform_mesh(2, 2, 1.0, 2.0, "m", Boundary::Vacuum);
    let phi = CellGroupData::from_values(
        4,
        3,
        vec![1.0, 2.0, 30.0, 4.0, 5.0, 60.0, 7.0, 8.0, 90.0, 10.0, 11.0, 120.0],
    )
    .unwrap();
    let w = nonthermal_weights(&lib);
    assert_eq!(w, vec![1.0, 1.0, 0.0]);
    let expected = 2.0 * ((1.0 + 2.0) + (4.0 + 5.0) + (7.0 + 8.0) + (10.0 + 11.0));
    assert_eq!(response(&phi, &w, &g.all_cells(), &g).unwrap(), expected);
    assert_eq!(response(&phi, &[0.0; 3], &g.all_cells(), &g).unwrap(), 0.0);
    assert_eq!(response(&phi, &[1.0; 3], &[3], &g).unwrap(), 2.0 * 141.0);
    assert!(response(&phi, &w, &[], &g).is_err());
}

proptest! {
    #[test]
    fn inner_product_matches_naive_sum(
        a in prop::collection::vec(0.0f64..10.0, 12),
        b in prop::collection::vec(0.0f64..10.0, 12),
    ) {
        let g = uniform_mesh(2, 3, 0.7, 1.3, "m", Boundary::Vacuum);
        let fa = CellGroupData::from_values(6, 2, a.clone()).unwrap();
        let fb = CellGroupData::from_values(6, 2, b.clone()).unwrap();
        let ab = inner_product(&fa, &fb, &g).unwrap();
        prop_assert_eq!(ab.to_bits(), inner_product(&fb, &fa, &g).unwrap().to_bits());
        let mut naive = 0.0;
        for i in 0..12 {
            naive += a[i] * b[i] * 0.7 * 1.3;
        }
        prop_assert!((ab - naive).abs() <= 1e-12 * naive.abs().max(1e-300));
    }
}
