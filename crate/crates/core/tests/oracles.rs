use nalgebra::DMatrix;
use polyls_core::baseline::{enumerate_faces, projected_gradient, PgConfig};
use polyls_core::linalg::{default_rank_tol, numerical_rank, rank_factor, DenseMatrix};
use polyls_core::solver::{gradient, kkt_check, violations};
use polyls_core::sparsify::{sparsify_bounded, ToleranceSet};
use polyls_core::synth::{gen_sim_instance, SimConfig};
use polyls_core::{solve, solve_nnls, Bounds, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DenseMatrix {
    let v: Vec<f64> = (0..n * p).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::new(n, p, v).unwrap()
}

fn random_box(rng: &mut ChaCha8Rng, p: usize) -> Bounds {
    let mut lo = Vec::with_capacity(p);
    let mut hi = Vec::with_capacity(p);
    for _ in 0..p {
        let a: f64 = rng.random_range(-1.0..0.5);
        let w: f64 = rng.random_range(0.0..1.5);
        lo.push(if rng.random_bool(0.2) { f64::NEG_INFINITY } else { a });
        hi.push(if rng.random_bool(0.2) { f64::INFINITY } else { a + w });
    }
    Bounds::new(lo, hi).unwrap()
}

fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.n_rows(), m.n_cols(), m.values())
}

fn svd_rank(m: &DenseMatrix, rel: f64) -> usize {
    let s = to_nalgebra(m).singular_values();
    let top = s.iter().cloned().fold(0.0, f64::max);
    s.iter().filter(|&&v| v > rel * top).count()
}

#[test]
fn rank_matches_svd_on_planted_low_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..40 {
        let n = rng.random_range(2..25);
        let p = rng.random_range(2..25);
        let r = rng.random_range(0..=n.min(p));
        let a = random_matrix(&mut rng, n, r);
        let b = random_matrix(&mut rng, r, p);
        let m = if r == 0 { DenseMatrix::zeros(n, p) } else { a.matmul(&b) };
        let tol = default_rank_tol(n, p);
        assert_eq!(numerical_rank(&m, tol), svd_rank(&m, 1e-8), "trial {trial}");
        assert_eq!(numerical_rank(&m, tol), r, "trial {trial}");
    }
}

#[test]
fn null_basis_is_orthonormal_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = random_matrix(&mut rng, 4, 6).matmul(&random_matrix(&mut rng, 6, 9));
    let f = rank_factor(&m, default_rank_tol(4, 9));
    assert_eq!(f.rank, 4);
    assert_eq!(f.null_basis.n_cols(), 5);
    let mn = to_nalgebra(&m) * to_nalgebra(&f.null_basis);
    assert!(mn.amax() < 1e-12);
    let nn = to_nalgebra(&f.null_basis).transpose() * to_nalgebra(&f.null_basis);
    assert!((nn - DMatrix::identity(5, 5)).amax() < 1e-12);
    let rr = to_nalgebra(&f.range_basis).transpose() * to_nalgebra(&f.range_basis);
    assert!((rr - DMatrix::identity(4, 4)).amax() < 1e-12);
}

#[test]
fn min_norm_solve_matches_pseudoinverse() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_matrix(&mut rng, 5, 3).matmul(&random_matrix(&mut rng, 3, 8));
    let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let ours = rank_factor(&m, default_rank_tol(5, 8)).solve(&x);
    let pinv = to_nalgebra(&m).pseudo_inverse(1e-10).unwrap();
    let theirs = pinv * nalgebra::DVector::from_vec(x);
    for (a, b) in ours.iter().zip(theirs.iter()) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn cd_matches_enumeration_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..60 {
        let n = rng.random_range(1..=10);
        let p = rng.random_range(1..=10);
        let x = random_matrix(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let bounds = if trial % 2 == 0 {
            Bounds::nonnegative(p)
        } else {
            random_box(&mut rng, p)
        };
        let cd = solve(&x, &y, &bounds, &SolverConfig::default()).unwrap();
        let exact = enumerate_faces(&x, &y, &bounds).unwrap();
        assert!(cd.kkt_passed, "trial {trial}");
        assert!(bounds.contains(&cd.beta) && bounds.contains(&exact.beta));
        assert!(
            (cd.objective - exact.objective).abs() <= 1e-8,
            "trial {trial}: cd {} vs exact {}",
            cd.objective,
            exact.objective
        );
    }
}

#[test]
fn cd_matches_projected_gradient_on_sim_instances() {
    let cfg = SimConfig {
        mu_grid: vec![-3.0, 0.0, 3.0],
        ..SimConfig::new(30, 120, 5)
    };
    for &mu in &cfg.mu_grid {
        let (x, y) = gen_sim_instance(&cfg, mu).unwrap();
        let cd = solve_nnls(&x, &y, &SolverConfig::default()).unwrap();
        let pg = projected_gradient(&x, &y, &Bounds::nonnegative(120), &PgConfig::default()).unwrap();
        let scale: f64 = y.iter().map(|v| v * v).sum();
        assert!(cd.kkt_passed);
        assert!((cd.objective - pg.objective).abs() <= 1e-6 * scale, "mu {mu}");
        assert!(cd.objective <= pg.objective + 1e-6 * scale);
    }
}

#[test]
fn enumeration_never_worse_than_projected_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let x = random_matrix(&mut rng, 8, 10);
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = random_box(&mut rng, 10);
        let e = enumerate_faces(&x, &y, &b).unwrap();
        let pg = projected_gradient(&x, &y, &b, &PgConfig::default()).unwrap();
        assert!(e.objective <= pg.objective + 1e-7);
    }
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = random_matrix(&mut rng, 12, 7);
    let y: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
    let beta: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f = |b: &[f64]| {
        let fit = x.mul_vec(b);
        0.5 * y.iter().zip(&fit).map(|(a, c)| (a - c) * (a - c)).sum::<f64>()
    };
    let fit = x.mul_vec(&beta);
    let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let g = gradient(&x, &r);
    let h = 1e-5;
    for j in 0..7 {
        let mut up = beta.clone();
        let mut dn = beta.clone();
        up[j] += h;
        dn[j] -= h;
        let fd = (f(&up) - f(&dn)) / (2.0 * h);
        assert!((fd - g[j]).abs() <= 1e-6 * (1.0 + g[j].abs()), "coordinate {j}");
    }
}

#[test]
fn kkt_pass_holds_on_independent_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let x = random_matrix(&mut rng, 15, 40);
        let y: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = random_box(&mut rng, 40);
        let cfg = SolverConfig::default();
        let r = solve(&x, &y, &b, &cfg).unwrap();
        assert!(r.kkt_passed);
        let fit = x.mul_vec(&r.beta);
        let resid: Vec<f64> = y.iter().zip(&fit).map(|(a, c)| a - c).collect();
        let delta = violations(&gradient(&x, &resid), &r.beta, &b);
        assert!(kkt_check(&delta, &x, &y, cfg.kkt_tol).passed);
    }
}

#[test]
fn sparsified_nnls_has_at_most_rank_positives() {
    let cfg = SimConfig::new(20, 60, 9);
    for &mu in &cfg.mu_grid.clone() {
        let (x, y) = gen_sim_instance(&cfg, mu).unwrap();
        let r = solve_nnls(&x, &y, &SolverConfig::default()).unwrap();
        let s = sparsify_bounded(&x, &Bounds::nonnegative(60), &r.beta, &ToleranceSet::default()).unwrap();
        let rank = numerical_rank(&x, default_rank_tol(20, 60));
        let positives = s.w.iter().filter(|&&v| v > 0.0).count();
        assert!(positives <= rank, "mu {mu}: {positives} > {rank}");
        let fit_new = x.mul_vec(&s.w);
        let obj_new = 0.5 * y.iter().zip(&fit_new).map(|(a, c)| (a - c) * (a - c)).sum::<f64>();
        assert!((obj_new - r.objective).abs() <= 1e-10 * (1.0 + r.objective));
    }
}
