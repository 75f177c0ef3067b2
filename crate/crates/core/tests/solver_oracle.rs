mod common;

use common::{critical_lambda, full_objective, proximal_gradient, random_psd, to_mat};
use faer::Mat;
use repsel::solver::{objective, solve_full, RepresentationMatrix};
use repsel::{lambda_critical, KernelMatrix, SolverConfig};

fn tight(lambda: f64) -> SolverConfig {
    let mut c = SolverConfig::new(lambda).with_tolerances(1e-11, 1e-11);
    c.max_iter = 200_000;
    c
}

#[test]
fn objective_examples_on_identity() {
    let k = Mat::<f64>::identity(2, 2);
    let r = RepresentationMatrix::from_mat(Mat::<f64>::identity(2, 2).as_ref()).unwrap();
    assert!((objective(k.as_ref(), k.as_ref(), &r, 2.0).unwrap() - 0.0).abs() < 1e-15);
    let half = Mat::from_fn(2, 2, |i, j| if i == j { 0.5 } else { 0.0 });
    let r = RepresentationMatrix::from_mat(half.as_ref()).unwrap();
    assert!((objective(k.as_ref(), k.as_ref(), &r, 2.0).unwrap() + 0.5).abs() < 1e-15);
}

#[test]
fn library_objective_matches_reference() {
    let n = 7;
    let k = random_psd(n, 3, 11);
    let r: Vec<f64> = (0..n * n).map(|p| ((p * 37 % 11) as f64 - 5.0) / 7.0).collect();
    let rep = RepresentationMatrix::from_mat(to_mat(&r, n).as_ref()).unwrap();
    let km = to_mat(&k, n);
    let lib = objective(km.as_ref(), km.as_ref(), &rep, 0.7).unwrap();
    let oracle = full_objective(&k, &r, n, 0.7);
    assert!((lib - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()), "{lib} vs {oracle}");
}

#[test]
fn critical_lambda_matches_reference() {
    for seed in 0..5 {
        let n = 6 + seed as usize;
        let k = random_psd(n, 4, seed);
        let lib = lambda_critical(to_mat(&k, n).as_ref()).unwrap();
        let oracle = critical_lambda(&k, n);
        assert!((lib - oracle).abs() <= 1e-14 * oracle);
    }
}

#[test]
fn admm_agrees_with_proximal_gradient() {
    for seed in 0..6u64 {
        let n = 5 + (seed as usize % 3) * 4;
        let k = random_psd(n, 2 + seed as usize % 4, 100 + seed);
        let lc = critical_lambda(&k, n);
        for mult in [0.5, 1.0, 5.0] {
            let lambda = mult * lc;
            let oracle = proximal_gradient(&k, n, lambda, 1e-12);
            let kernel = KernelMatrix::from_symmetric(to_mat(&k, n)).unwrap();
            let (rep, diag) = solve_full(&kernel, &tight(lambda)).unwrap();
            assert!(diag.converged);
            let gap = diag.objective - oracle.objective;
            assert!(
                gap.abs() <= 1e-6 * (1.0 + oracle.objective.abs()),
                "seed {seed} mult {mult}: admm {} oracle {}",
                diag.objective,
                oracle.objective
            );
            let recomputed = full_objective(&k, rep.as_slice(), n, lambda);
            assert!((recomputed - diag.objective).abs() <= 1e-9 * (1.0 + recomputed.abs()));
        }
    }
}

#[test]
fn below_critical_lambda_oracle_is_zero_too() {
    let n = 8;
    let k = random_psd(n, 3, 5);
    let lambda = 0.9 * critical_lambda(&k, n);
    let oracle = proximal_gradient(&k, n, lambda, 1e-13);
    assert!(oracle.r.iter().all(|&x| x == 0.0));
    let kernel = KernelMatrix::from_symmetric(to_mat(&k, n)).unwrap();
    let (rep, _) = solve_full(&kernel, &SolverConfig::new(lambda)).unwrap();
    assert!(rep.as_slice().iter().all(|&x| x == 0.0));
}

#[test]
fn identity_kernel_closed_form() {
    // per-row prox: row_i = max(0, 1 - 1/lambda) e_i
    let n = 12;
    let kernel = KernelMatrix::from_symmetric(Mat::identity(n, n)).unwrap();
    for lambda in [1.5, 2.0, 4.0] {
        let (rep, _) = solve_full(&kernel, &tight(lambda)).unwrap();
        let want = 1.0 - 1.0 / lambda;
        for i in 0..n {
            for j in 0..n {
                let w = if i == j { want } else { 0.0 };
                assert!((rep.get(i, j) - w).abs() < 1e-8);
            }
        }
    }
}
