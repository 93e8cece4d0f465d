use std::sync::Arc;

use dgbem::assembly::{
    assemble_b, assemble_conforming, assemble_dg, assemble_k, assemble_p, assemble_rhs, read_matrix, write_matrix,
    LoadFn,
};
use dgbem::mesh::build_uniform_square_mesh;
use dgbem::quadrature::{BruteForceOracle, GalerkinQuadrature};
use dgbem::solve::{solve_dense, FieldView, SolverKind};
use dgbem::space::{HpSpace, SpaceKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dg_space(n: usize, p: usize) -> Arc<HpSpace> {
    let mesh = Arc::new(build_uniform_square_mesh(n).unwrap());
    Arc::new(HpSpace::uniform(mesh, p, SpaceKind::Discontinuous).unwrap())
}

fn conforming_space(n: usize, p: usize) -> Arc<HpSpace> {
    let mesh = Arc::new(build_uniform_square_mesh(n).unwrap());
    Arc::new(HpSpace::uniform(mesh, p, SpaceKind::ConformingZeroTrace).unwrap())
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax() / b.amax()
}

#[test]
fn k_is_exactly_symmetric_and_vanishes_on_constants() {
    let quad = GalerkinQuadrature::default();
    let k = assemble_k(&dg_space(3, 2), &quad).unwrap();
    assert_eq!(k, k.transpose());
    let k0 = assemble_k(&dg_space(3, 0), &quad).unwrap();
    assert_eq!(k0.amax(), 0.0);
}

#[test]
fn k_quadratic_form_is_nonnegative() {
    let quad = GalerkinQuadrature::default();
    let k = assemble_k(&dg_space(3, 1), &quad).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let c = random_vector(&mut rng, k.nrows());
        assert!(c.dot(&(&k * &c)) >= 0.0);
    }
}

#[test]
fn k_on_single_panel_matches_oracle() {
    let space = dg_space(1, 1);
    let k = assemble_k(&space, &GalerkinQuadrature::default()).unwrap();
    let ko = assemble_k(&space, &BruteForceOracle::new(1e-10).unwrap()).unwrap();
    assert!(rel(&k, &ko) < 1e-6, "relative error {:e}", rel(&k, &ko));
}

#[test]
fn b_matches_oracle_on_two_by_two_mesh() {
    let space = dg_space(2, 1);
    let b = assemble_b(&space, &GalerkinQuadrature::default()).unwrap();
    let bo = assemble_b(&space, &BruteForceOracle::new(1e-9).unwrap()).unwrap();
    assert!(rel(&b, &bo) < 1e-6, "relative error {:e}", rel(&b, &bo));
}

#[test]
fn b_columns_of_constants_vanish() {
    let space = dg_space(3, 2);
    let b = assemble_b(&space, &GalerkinQuadrature::default()).unwrap();
    assert!(b.amax() > 0.0);
    for q in 0..9 {
        // modal index 0 is the panel constant
        assert_eq!(b.column(q * 9).amax(), 0.0);
    }
}

#[test]
fn jumps_of_embedded_conforming_functions_vanish_in_b_and_p() {
    let conf = conforming_space(3, 2);
    let dg = dg_space(3, 2);
    let e = conf.embedding_matrix().unwrap();
    let quad = GalerkinQuadrature::default();
    let b = assemble_b(&dg, &quad).unwrap();
    let p = assemble_p(&dg).unwrap();
    let eb = e.transpose() * &b;
    assert!(eb.amax() < 1e-12 * b.amax(), "{:e}", eb.amax());
    let pe = &p * &e;
    assert!(pe.amax() < 1e-13 * p.amax(), "{:e}", pe.amax());
}

#[test]
fn p_of_unit_constant_on_single_panel_is_the_perimeter() {
    let space = dg_space(1, 0);
    let p = assemble_p(&space).unwrap();
    assert!((p[(0, 0)] - 4.0).abs() < 1e-14);
    // one constant per panel: the total jump of 1 lives on the screen boundary only
    let p4 = assemble_p(&dg_space(4, 0)).unwrap();
    let ones = DVector::from_element(16, 1.0);
    assert!((ones.dot(&(&p4 * &ones)) - 4.0).abs() < 1e-13);
}

#[test]
fn p_quadratic_form_matches_pointwise_jump_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (n, p) in [(2, 1), (3, 3), (2, 5)] {
        let space = dg_space(n, p);
        let pm = assemble_p(&space).unwrap();
        assert_eq!(pm, pm.transpose());
        for _ in 0..5 {
            let c = random_vector(&mut rng, space.total_dofs());
            let quadratic = c.dot(&(&pm * &c));
            let view = FieldView::new(space.clone(), c).unwrap();
            let direct = view.jump_l2().powi(2);
            assert!((quadratic - direct).abs() < 1e-12 * direct, "{quadratic} vs {direct}");
        }
    }
}

#[test]
fn unit_load_hits_constant_modes_only() {
    let space = dg_space(2, 1);
    let rhs = assemble_rhs(&space, &LoadFn::Constant(1.0)).unwrap();
    let nonzero: Vec<f64> = rhs.iter().copied().filter(|v| *v != 0.0).collect();
    assert_eq!(nonzero, vec![0.25; 4]);
}

#[test]
fn general_load_matches_tensor_gauss() {
    let space = dg_space(3, 2);
    let f = LoadFn::Function(Arc::new(|x: [f64; 2]| x[0]));
    let rhs = assemble_rhs(&space, &f).unwrap();
    // oracle: 12-point tensor Gauss in physical coordinates through the basis evaluator
    let rule = dgbem::gauss::gauss_legendre(12);
    let mesh = space.mesh();
    let mut expect = vec![0.0; space.total_dofs()];
    for q in 0..mesh.num_panels() {
        for (t2, w2) in rule.iter() {
            for (t1, w1) in rule.iter() {
                let x = mesh.panel_map(q, [t1, t2]);
                for (k, b) in space.eval_panel_basis(q, [t1, t2]).iter().enumerate() {
                    expect[q * 9 + k] += w1 * w2 * mesh.area(q) * x[0] * b.value;
                }
            }
        }
    }
    for (a, b) in rhs.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-12 * 0.2, "{a} vs {b}");
    }
}

#[test]
fn transport_terms_are_skew_and_form_is_elliptic() {
    let space = dg_space(3, 2);
    let sys = assemble_dg(space, &GalerkinQuadrature::default(), &LoadFn::default(), None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for nu in [0.1, 1.0, 100.0] {
        let a = sys.matrix(nu);
        let sym = &a + a.transpose();
        let expect = (&sys.k + &sys.p * nu) * 2.0;
        assert!(rel(&sym, &expect) < 1e-12);
        for _ in 0..100 {
            let c = random_vector(&mut rng, sys.dofs());
            assert!(c.dot(&(&a * &c)) > 0.0);
        }
    }
}

#[test]
fn assembly_is_independent_of_thread_count() {
    let quad = GalerkinQuadrature::default();
    let load = LoadFn::default();
    let one = assemble_dg(dg_space(3, 2), &quad, &load, Some(1)).unwrap();
    let two = assemble_dg(dg_space(3, 2), &quad, &load, Some(2)).unwrap();
    assert_eq!(one.k, two.k);
    assert_eq!(one.b, two.b);
    assert_eq!(one.p, two.p);
    assert_eq!(one.rhs, two.rhs);
}

#[test]
fn conforming_system_equals_embedded_dg_k() {
    let quad = GalerkinQuadrature::default();
    let conf = conforming_space(3, 2);
    let sys = assemble_conforming(conf.clone(), &quad, &LoadFn::default(), None).unwrap();
    let e = conf.embedding_matrix().unwrap();
    let k = assemble_k(&dg_space(3, 2), &quad).unwrap();
    let etke = e.transpose() * k * &e;
    assert!(rel(&sys.matrix, &etke) < 1e-12);
    let rhs_dg = assemble_rhs(&dg_space(3, 2), &LoadFn::default()).unwrap();
    let etf = e.transpose() * rhs_dg;
    assert!((&sys.rhs - etf).amax() < 1e-15);
}

#[test]
fn consistency_on_the_conforming_subspace() {
    // a_h(Ew, Ed) reduces to the conforming form for continuous zero-trace functions
    let quad = GalerkinQuadrature::default();
    let conf = conforming_space(3, 2);
    let csys = assemble_conforming(conf.clone(), &quad, &LoadFn::default(), None).unwrap();
    let dsys = assemble_dg(dg_space(3, 2), &quad, &LoadFn::default(), None).unwrap();
    let e = conf.embedding_matrix().unwrap();
    let reduced = e.transpose() * dsys.matrix(10.0) * &e;
    assert!(rel(&reduced, &csys.matrix) < 1e-12);
}

#[test]
fn conforming_two_by_two_is_scalar_and_positive() {
    let sys = assemble_conforming(conforming_space(2, 1), &GalerkinQuadrature::default(), &LoadFn::default(), None).unwrap();
    assert_eq!(sys.matrix.shape(), (1, 1));
    assert!(sys.matrix[(0, 0)] > 0.0);
    let sol = solve_dense(&sys.matrix, &sys.rhs, SolverKind::Cholesky).unwrap();
    assert!(sol.coefficients[0] > 0.0);
}

#[test]
fn conforming_energy_increases_under_refinement() {
    let mut last = 0.0;
    for n in [2, 4, 8] {
        let sys = assemble_conforming(conforming_space(n, 1), &GalerkinQuadrature::default(), &LoadFn::default(), None).unwrap();
        let sol = solve_dense(&sys.matrix, &sys.rhs, SolverKind::Cholesky).unwrap();
        let energy = sys.rhs.dot(&sol.coefficients);
        assert!(energy > last, "n = {n}: {energy} after {last}");
        last = energy;
    }
}

#[test]
fn dg_solve_has_small_residual() {
    let sys = assemble_dg(dg_space(2, 1), &GalerkinQuadrature::default(), &LoadFn::default(), None).unwrap();
    let sol = solve_dense(&sys.matrix(10.0), &sys.rhs, SolverKind::Lu).unwrap();
    assert!(sol.residual_norm <= 1e-10);
}

#[test]
fn matrix_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.bin");
    let m = DMatrix::from_fn(3, 5, |i, j| (i as f64 + 1.0) / (j as f64 + 0.7));
    write_matrix(&path, &m).unwrap();
    assert_eq!(read_matrix(&path).unwrap(), m);
    std::fs::write(&path, b"garbage!").unwrap();
    assert!(read_matrix(&path).is_err());
}
