use std::f64::consts::PI;

use dgbem::mesh::{build_uniform_square_mesh, Mesh};
use dgbem::quadrature::{
    brute_force_edge_oracle, brute_force_pair_oracle, integrate_edge_panel, integrate_panel_pair, ClosureFns,
    GalerkinQuadrature, ModalValues, PairIntegrator,
};
use proptest::prelude::*;

fn unit_square_self_potential() -> f64 {
    let s2 = 2f64.sqrt();
    (4.0 * (1.0 + s2).ln() - 4.0 * (s2 - 1.0) / 3.0) / (4.0 * PI)
}

fn poly_f(r: [f64; 2]) -> f64 {
    1.0 + 0.5 * r[0] - r[1] * r[1] + 0.3 * r[0] * r[1]
}

fn poly_g(r: [f64; 2]) -> f64 {
    0.7 - r[0] * r[0] + 0.2 * r[1]
}

#[derive(Debug)]
struct Case {
    a: usize,
    b: usize,
    tag: &'static str,
}

fn pair_cases() -> Vec<Case> {
    // 3×3 mesh, panel index j·3 + i
    vec![
        Case { a: 4, b: 4, tag: "identical" },
        Case { a: 4, b: 5, tag: "common edge (horizontal)" },
        Case { a: 4, b: 1, tag: "common edge (vertical)" },
        Case { a: 4, b: 8, tag: "common vertex" },
        Case { a: 4, b: 2, tag: "common vertex (anti-diagonal)" },
        Case { a: 0, b: 2, tag: "disjoint near" },
        Case { a: 0, b: 8, tag: "disjoint far" },
    ]
}

fn mesh3() -> Mesh {
    build_uniform_square_mesh(3).unwrap()
}

#[test]
fn unit_square_self_integral_matches_closed_form() {
    let mesh = build_uniform_square_mesh(1).unwrap();
    let exact = unit_square_self_potential();
    let v = integrate_panel_pair(&mesh, 0, 0, |_| 1.0, |_| 1.0, 10).unwrap();
    assert!((v - exact).abs() < 1e-12 * exact, "{v} vs {exact}");
    let o = brute_force_pair_oracle(&mesh, 0, 0, |_| 1.0, 0, |_| 1.0, 1e-11).unwrap();
    assert!((o - exact).abs() < 1e-9 * exact, "{o} vs {exact}");
}

#[test]
fn self_integral_scales_with_cube_of_mesh_size() {
    // ∫∫ 1/|x−y| over a square of side h is h³ times the unit value
    let mesh = build_uniform_square_mesh(4).unwrap();
    let exact = unit_square_self_potential() / 64.0;
    for q in [0, 5, 15] {
        let v = integrate_panel_pair(&mesh, q, q, |_| 1.0, |_| 1.0, 10).unwrap();
        assert!((v - exact).abs() < 1e-12 * exact, "{q}: {v} vs {exact}");
    }
}

#[test]
fn two_adjacent_squares_sum_to_the_rectangle_value() {
    // the 2×1 rectangle built from panels 0 and 1 of the 2×2 mesh, computed by an independent 1D reduction
    let mesh = build_uniform_square_mesh(2).unwrap();
    let mut total = 0.0;
    for a in [0, 1] {
        for b in [0, 1] {
            total += integrate_panel_pair(&mesh, a, b, |_| 1.0, |_| 1.0, 10).unwrap();
        }
    }
    let exact = rectangle_self_integral(1.0, 0.5) / (4.0 * PI);
    assert!((total - exact).abs() < 1e-11 * exact, "{total} vs {exact}");
}

/// `∫∫ 1/|x−y|` over an `a × b` rectangle, in closed form.
fn rectangle_self_integral(a: f64, b: f64) -> f64 {
    let d = (a * a + b * b).sqrt();
    2.0 * a * a * b * ((b + d) / a).ln() + 2.0 * a * b * b * ((a + d) / b).ln() + 2.0 / 3.0 * (a.powi(3) + b.powi(3) - d.powi(3))
}

#[test]
fn oracle_agreement_for_every_pair_class() {
    let mesh = mesh3();
    for case in pair_cases() {
        let v = integrate_panel_pair(&mesh, case.a, case.b, poly_f, poly_g, 10).unwrap();
        let t = std::time::Instant::now();
        let o = brute_force_pair_oracle(&mesh, case.a, case.b, poly_f, 2, poly_g, 1e-10).unwrap();
        let rel = (v - o).abs() / o.abs();
        eprintln!("{:32} {v:.15e} {o:.15e} rel {rel:.2e} t {:?}", case.tag, t.elapsed());
        assert!(rel < 1e-8, "{}: {v} vs {o}", case.tag);
    }
}

#[test]
fn oracle_agreement_for_edge_panel_classes() {
    let mesh = mesh3();
    let g = |s: f64| 1.0 - 2.0 * s + 0.5 * s * s;
    let mut seen = std::collections::BTreeSet::new();
    for e in 0..mesh.num_edges() {
        let class = mesh.classify_edge_panel(e, 4).unwrap();
        let key = format!("{class:?}").split_whitespace().next().unwrap().to_string();
        if !seen.insert(key.clone()) {
            continue;
        }
        let v = integrate_edge_panel(&mesh, e, 4, poly_f, g, 10).unwrap();
        let o = brute_force_edge_oracle(&mesh, e, 4, poly_f, 2, g, 1e-10).unwrap();
        let rel = (v - o).abs() / o.abs();
        eprintln!("{key:32} {v:.15e} {o:.15e} rel {rel:.2e}");
        assert!(rel < 1e-8, "{key}: {v} vs {o}");
    }
    assert_eq!(seen.len(), 3);
}

/// 2×2 grid sheared into parallelograms, with the local vertex numbering of
/// each panel rotated by a different amount.
fn sheared_mesh() -> Mesh {
    let mut vertices = Vec::new();
    for j in 0..3 {
        for i in 0..3 {
            let (x, y) = (i as f64 * 0.5, j as f64 * 0.5);
            vertices.push([x + 0.3 * y, 0.8 * y]);
        }
    }
    let vid = |i: usize, j: usize| j * 3 + i;
    let mut panels = Vec::new();
    for j in 0..2 {
        for i in 0..2 {
            let mut p = [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)];
            p.rotate_left((i + 2 * j) % 4);
            panels.push(p);
        }
    }
    Mesh::from_panels(vertices, panels).unwrap()
}

#[test]
fn oracle_agreement_on_rotated_parallelograms() {
    let mesh = sheared_mesh();
    let quad = GalerkinQuadrature::exact_order(10).unwrap();
    let oracle = dgbem::quadrature::BruteForceOracle::new(1e-11).unwrap();
    let fam = ModalValues { p: 1 };
    for (a, b) in [(0, 0), (3, 3), (0, 1), (1, 3), (0, 3), (1, 2)] {
        let v = quad.panel_pair(&mesh, b, a, &fam, &fam).unwrap();
        let o = oracle.panel_pair(&mesh, b, a, &fam, &fam).unwrap();
        let rel = (&v - &o).amax() / o.amax();
        assert!(rel < 1e-9, "pair ({a}, {b}): relative error {rel:e}");
    }
    for e in 0..mesh.num_edges() {
        let v = quad.edge_panel(&mesh, e, 2, &dgbem::quadrature::EdgeLegendre { pmax: 2 }, &fam).unwrap();
        let o = oracle.edge_panel(&mesh, e, 2, &dgbem::quadrature::EdgeLegendre { pmax: 2 }, &fam).unwrap();
        let rel = (&v - &o).amax() / o.amax();
        assert!(rel < 1e-9, "edge {e}: relative error {rel:e}");
    }
}

#[test]
fn touching_rules_converge_with_order() {
    let mesh = mesh3();
    let oracle = brute_force_pair_oracle(&mesh, 4, 5, poly_f, 2, poly_g, 1e-12).unwrap();
    let errs: Vec<f64> = [2, 4, 6, 8]
        .iter()
        .map(|&q| (integrate_panel_pair(&mesh, 4, 5, poly_f, poly_g, q).unwrap() - oracle).abs())
        .collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "errors {errs:?}");
    }
    assert!(errs[3] < 1e-9 * oracle.abs());
}

#[test]
fn piecewise_constant_single_layer_gram_is_positive_definite() {
    let mesh = build_uniform_square_mesh(4).unwrap();
    let quad = GalerkinQuadrature::default();
    let fam = ModalValues { p: 0 };
    let n = mesh.num_panels();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| quad.panel_pair(&mesh, i, j, &fam, &fam).unwrap()[(0, 0)]);
    assert!((&m - m.transpose()).amax() < 1e-14 * m.amax());
    let eig = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues;
    assert!(eig.min() > 0.0, "smallest eigenvalue {}", eig.min());
}

#[test]
fn sampled_fixed_rules_never_fail() {
    let quad = GalerkinQuadrature::default();
    for n in [1, 2, 3] {
        let mesh = build_uniform_square_mesh(n).unwrap();
        for a in 0..mesh.num_panels() {
            for b in 0..mesh.num_panels() {
                let rule = quad.panel_pair_rule(&mesh, b, a, 2).unwrap();
                assert!(rule.nodes.iter().all(|nd| nd.weight.is_finite() && nd.weight > 0.0));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn swapping_target_and_source_transposes_the_block(a in 0usize..9, b in 0usize..9, p in 0usize..3) {
        let mesh = mesh3();
        let quad = GalerkinQuadrature::default();
        let fam = ModalValues { p };
        let ab = quad.panel_pair(&mesh, b, a, &fam, &fam).unwrap();
        let ba = quad.panel_pair(&mesh, a, b, &fam, &fam).unwrap();
        let diff = (&ab - ba.transpose()).amax();
        prop_assert!(diff <= 1e-12 * ab.amax(), "difference {diff:e}");
    }

    #[test]
    fn scalar_blocks_are_bilinear(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, a in 0usize..9) {
        let mesh = mesh3();
        let quad = GalerkinQuadrature::default();
        let fam = ModalValues { p: 1 };
        let blk = quad.panel_pair(&mesh, 4, a, &fam, &fam).unwrap();
        let coef = nalgebra::DVector::from_vec(vec![1.0, c1, c2, c1 * c2]);
        let f = ClosureFns::scalar(1, move |r: [f64; 2], out: &mut [f64]| {
            let (x, y) = (2.0 * r[0] - 1.0, 2.0 * r[1] - 1.0);
            out[0] = 1.0 + c1 * x + c2 * y + c1 * c2 * x * y;
        });
        let g = ClosureFns::scalar(0, |_r: [f64; 2], out: &mut [f64]| out[0] = 1.0);
        let direct = quad.panel_pair(&mesh, 4, a, &g, &f).unwrap()[(0, 0)];
        let via_block = (blk.row(0) * &coef)[(0, 0)];
        prop_assert!((direct - via_block).abs() <= 1e-12 * direct.abs().max(1e-3));
    }
}
