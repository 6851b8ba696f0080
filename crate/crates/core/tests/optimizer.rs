mod common;

use common::oracle_de_step;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spagent_core::optimizer::{
    builtin_objective, propose_de, rng_for, run_de, run_hybrid, run_sa, score_detection, DeParams, Dimension,
    HybridConfig, ParamSpace, PoolEntry, Provenance, SaParams, SolutionScorePool, SurrogateProposer,
};

fn pool_from(points: &[(Vec<f64>, f64)]) -> SolutionScorePool {
    let mut pool = SolutionScorePool::default();
    for (theta, score) in points {
        pool.push(PoolEntry { theta: theta.clone(), score: *score, provenance: Provenance::Init, note: None });
    }
    pool
}

#[test]
fn de_step_matches_oracle() {
    let lo = [-2.0, 0.0, 10.0, -1.0];
    let hi = [2.0, 1.0, 20.0, 5.0];
    let space = ParamSpace::new(
        (0..4).map(|j| Dimension::linear(&format!("x{j}"), lo[j], hi[j])).collect(),
    )
    .unwrap();
    for trial in 0..40u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + trial);
        let n = 4 + (trial as usize % 30);
        let points: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|_| {
                let theta: Vec<f64> = (0..4).map(|j| rng.gen_range(lo[j]..hi[j])).collect();
                (theta, rng.gen_range(-5.0..5.0))
            })
            .collect();
        let (f, cr) = (0.5 + 0.01 * trial as f64, 0.3 + 0.015 * trial as f64);
        let got = propose_de(&pool_from(&points), &space, DeParams { f, cr }, &mut rng_for(trial)).unwrap();
        let want = oracle_de_step(&points, &lo, &hi, f, cr, trial);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12, "trial {trial}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn hybrid_alternates_llm_and_de() {
    let (obj, space) = builtin_objective("sphere", 3).unwrap();
    let provider = SurrogateProposer::new(4);
    let cfg = HybridConfig { budget: 40, n_init: 8, seed: 4, ..Default::default() };
    let report = run_hybrid(obj.as_ref(), &space, &provider, &cfg).unwrap();
    assert_eq!(report.llm_fallbacks, 0);
    let prov = report.provenance();
    assert_eq!(prov.len(), 40);
    assert!(prov[..8].iter().all(|p| *p == Provenance::Init));
    for (i, p) in prov[8..].iter().enumerate() {
        let want = if i % 2 == 0 { Provenance::Llm } else { Provenance::De };
        assert_eq!(*p, want, "iteration {}", i + 1);
    }
}

#[test]
fn best_so_far_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for run in 0..50u64 {
        let name = if run % 2 == 0 { "sphere" } else { "rastrigin" };
        let (obj, space) = builtin_objective(name, 1 + (run as usize % 4)).unwrap();
        let seed: u64 = rng.gen();
        let report = match run % 3 {
            0 => run_hybrid(
                obj.as_ref(),
                &space,
                &SurrogateProposer::new(seed),
                &HybridConfig { budget: 30, seed, ..Default::default() },
            ),
            1 => run_de(obj.as_ref(), &space, 30, seed, DeParams::default()),
            _ => run_sa(obj.as_ref(), &space, 30, seed, SaParams::default()),
        }
        .unwrap();
        let curve = report.pool.best_so_far();
        assert_eq!(curve.len(), 30);
        assert!(curve.windows(2).all(|w| w[1] >= w[0]), "run {run}");
        assert_eq!(*curve.last().unwrap(), report.best_score);
    }
}

#[test]
fn runs_are_reproducible() {
    let (obj, space) = builtin_objective("rastrigin", 2).unwrap();
    let a = run_de(obj.as_ref(), &space, 50, 9, DeParams::default()).unwrap();
    let b = run_de(obj.as_ref(), &space, 50, 9, DeParams::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn detection_score_exact() {
    assert!((score_detection(0.9, 0.1, 10.0).unwrap() - 9.9).abs() <= 1e-12);
    assert!((score_detection(1.0, 0.0, 10.0).unwrap() - 11.0).abs() <= 1e-12);
    assert!(score_detection(0.0, 1.0, 10.0).unwrap().abs() <= 1e-12);
    assert!(score_detection(1.2, 0.0, 10.0).is_err());
}
