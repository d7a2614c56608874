use nalgebra::{DMatrix, DVector};
use sparse_damage::fem::{assemble_mass, assemble_stiffness, canonical_truss, StiffnessParams};
use sparse_damage::modal::solve_modes;
use sparse_damage::sensitivity::eigen_jacobian;
use sparse_damage::solvers::{solve_l1_eq, solve_lp_irls, IrlsOptions, SparseProblem};
use sparse_damage::{SparseProblemF32, TrussModelF32};

#[test]
fn f32_modes_track_f64() {
    let m32: TrussModelF32 = canonical_truss();
    let m64 = canonical_truss::<f64>();
    let k32 = assemble_stiffness(&m32, &StiffnessParams::nominal(20)).unwrap();
    let k64 = assemble_stiffness(&m64, &StiffnessParams::nominal(20)).unwrap();
    let f32s = solve_modes(&k32, &assemble_mass(&m32), 16).unwrap().frequencies;
    let f64s = solve_modes(&k64, &assemble_mass(&m64), 16).unwrap().frequencies;
    for (a, b) in f32s.iter().zip(f64s.iter()) {
        assert!(((*a as f64) - b).abs() < 1e-4 * b);
    }
}

#[test]
fn f32_jacobian_row_sums() {
    let model: TrussModelF32 = canonical_truss();
    let a = eigen_jacobian(&model, &StiffnessParams::nominal(20), 9).unwrap();
    for j in 0..9 {
        assert!((a.row(j).sum() - 0.5).abs() < 1e-4);
    }
}

#[test]
fn f32_solvers() {
    let a = DMatrix::<f32>::from_row_slice(2, 4, &[1.0, 0.0, 2.0, 1.0, 0.0, 1.0, 1.0, -1.0]);
    let x = DVector::<f32>::from_row_slice(&[0.0, 0.0, 1.5, 0.0]);
    let problem: SparseProblemF32 = SparseProblem::new(a.clone(), &a * &x).unwrap();
    let l1 = solve_l1_eq(&problem).unwrap();
    assert!((&l1.x - &x).amax() < 1e-4);
    let lp = solve_lp_irls(&problem, 0.5, &IrlsOptions::default()).unwrap();
    assert!((&lp.x - &x).amax() < 1e-3);
}
