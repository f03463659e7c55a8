use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structsdp::solver::check::{residuals, verify};
use structsdp::solver::sdpa::{export_sdpa, import_sdpa};
use structsdp::solver::{solve, SolverSettings};
use structsdp::{dualize, Block, ConeKind, ConicProblem, Form, Status, SymMatrix};

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &g * g.transpose() + DMatrix::identity(n, n) * 0.1
}

fn random_sym(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    let mut t = Vec::new();
    for j in 0..n {
        for i in 0..=j {
            if rng.random_bool(0.6) {
                t.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    SymMatrix::from_triplets(n, t).unwrap()
}

/// Strictly feasible primal-dual pair, so strong duality holds.
fn random_sdp(n: usize, m: usize, seed: u64) -> ConicProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<SymMatrix> = (0..m).map(|_| random_sym(n, &mut rng)).collect();
    let x0 = SymMatrix::from_dense(&random_psd(n, &mut rng), 0.0);
    let z0 = SymMatrix::from_dense(&random_psd(n, &mut rng), 0.0);
    let b: Vec<f64> = a.iter().map(|ai| ai.inner(&x0)).collect();
    let mut c = z0;
    for ai in &a {
        c = c.axpby(1.0, ai, rng.random_range(-1.0..1.0)).unwrap();
    }
    ConicProblem::new(Form::Primal, vec![Block::new(n, ConeKind::psd())], c, a, b).unwrap()
}

#[test]
fn random_sdps_replay_through_the_checker() {
    for seed in 0..8 {
        let p = random_sdp(6, 5, seed);
        let eps = 1e-7;
        let s = solve(&p, &SolverSettings::with_eps(eps)).unwrap();
        assert_eq!(s.status, Status::Optimal, "seed {seed}");
        let r = residuals(&p, &s.x, &s.y, &s.z).unwrap();
        assert!(verify(&p, &s, eps).unwrap(), "seed {seed}: {r:?}");
        assert!(s.gap() <= 10.0 * eps);
    }
}

#[test]
fn dualized_problem_reaches_the_same_value() {
    for seed in 20..24 {
        let p = random_sdp(5, 4, seed);
        let d = dualize(&p);
        let sp = solve(&p, &SolverSettings::with_eps(1e-8)).unwrap();
        let sd = solve(&d, &SolverSettings::with_eps(1e-8)).unwrap();
        assert!(sp.is_optimal() && sd.is_optimal());
        // the dual-form reading maximizes b'y over the same data
        assert!((sp.primal_objective - sd.dual_objective).abs() < 1e-5 * (1.0 + sp.primal_objective.abs()));
    }
}

#[test]
fn weak_duality_on_sampled_feasible_pairs() {
    // feasible X: b generated from X0; feasible y: C generated from y0
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = 4;
        let a: Vec<SymMatrix> = (0..3).map(|_| random_sym(n, &mut rng)).collect();
        let x0 = SymMatrix::from_dense(&random_psd(n, &mut rng), 0.0);
        let z0 = SymMatrix::from_dense(&random_psd(n, &mut rng), 0.0);
        let y0: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|ai| ai.inner(&x0)).collect();
        let mut c = z0;
        for (ai, yi) in a.iter().zip(&y0) {
            c = c.axpby(1.0, ai, *yi).unwrap();
        }
        let by: f64 = b.iter().zip(&y0).map(|(p, q)| p * q).sum();
        assert!(c.inner(&x0) >= by - 1e-12);
    }
}

#[test]
fn fixed_settings_are_deterministic() {
    let p = random_sdp(6, 5, 3);
    let a = solve(&p, &SolverSettings::default()).unwrap();
    let b = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(a.iterations, b.iterations);
    assert_eq!(a.y, b.y);
    assert_eq!(a.x, b.x);
}

#[test]
fn sdpa_round_trip_preserves_optimum() {
    let p = random_sdp(5, 3, 9);
    let text = export_sdpa(&p).unwrap();
    let q = import_sdpa(&text).unwrap();
    let sp = solve(&p, &SolverSettings::with_eps(1e-8)).unwrap();
    let sq = solve(&q, &SolverSettings::with_eps(1e-8)).unwrap();
    assert!((sp.primal_objective - sq.primal_objective).abs() < 1e-6);
}

#[test]
fn mixed_cone_blocks() {
    // min t + X11 + X22 s.t. X12 = 1, (t, 3, 4) in SOC, X PSD
    let c = SymMatrix::from_triplets(5, [(0, 0, 1.0), (3, 3, 1.0), (4, 4, 1.0)]).unwrap();
    let a = vec![
        SymMatrix::from_triplets(5, [(1, 1, 1.0)]).unwrap(),
        SymMatrix::from_triplets(5, [(2, 2, 1.0)]).unwrap(),
        SymMatrix::from_triplets(5, [(3, 4, 0.5)]).unwrap(),
    ];
    let p = ConicProblem::new(
        Form::Primal,
        vec![Block::new(3, ConeKind::soc()), Block::new(2, ConeKind::psd())],
        c,
        a,
        vec![3.0, 4.0, 1.0],
    )
    .unwrap();
    let s = solve(&p, &SolverSettings::with_eps(1e-8)).unwrap();
    assert_eq!(s.status, Status::Optimal);
    assert!((s.primal_objective - 7.0).abs() < 1e-5, "{}", s.primal_objective);
}
