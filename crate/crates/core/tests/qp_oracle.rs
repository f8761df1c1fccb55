mod support;

use cbfnav::qp::{find_feasible_point, kkt_residual, solve_qp, BoxBounds, Phase1, QpStatus};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::qp_oracle::{check_one, enumerate, random_problem, OracleStats};

#[test]
fn randomized_problems_match_enumeration_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut stats = OracleStats::default();
    for _ in 0..2000 {
        let p = random_problem(&mut rng, 14);
        check_one(&p, 12, &mut stats);
    }
    assert_eq!(stats.decision_mismatches, 0, "{stats:?}");
    assert_eq!(stats.grid_violations, 0, "{stats:?}");
    assert!(stats.worst_objective_gap <= 1e-6, "{stats:?}");
    assert!(stats.worst_kkt <= 1e-8, "{stats:?}");
    assert!(stats.feasible > 200 && stats.feasible < 1900, "{stats:?}");
}

#[test]
fn infeasibility_decided_identically_by_phase1_and_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let p = random_problem(&mut rng, 14);
        let bounds = BoxBounds {
            lo: p.box_lo.clone(),
            hi: p.box_hi.clone(),
        };
        let ph1 = find_feasible_point(&p.rows, &bounds);
        let sol = solve_qp(&p).unwrap();
        match ph1 {
            Phase1::Feasible(x) => {
                assert_eq!(sol.status, QpStatus::Feasible);
                for r in &p.rows {
                    assert!(r.slack(&x) >= -1e-9);
                }
            }
            Phase1::Infeasible { max_violation } => {
                assert_eq!(sol.status, QpStatus::Infeasible);
                assert!(max_violation > 1e-9);
                assert!(!enumerate(&p).feasible);
            }
        }
    }
}

#[test]
fn solves_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let p = random_problem(&mut rng, 14);
        let a = solve_qp(&p).unwrap();
        let b = solve_qp(&p.clone()).unwrap();
        assert_eq!(a.status, b.status);
        match (a.x, b.x) {
            (Some(x), Some(y)) => {
                let xb: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
                let yb: Vec<u64> = y.iter().map(|v| v.to_bits()).collect();
                assert_eq!(xb, yb);
            }
            (None, None) => {}
            _ => panic!("status mismatch"),
        }
    }
}

#[test]
fn feasible_solutions_satisfy_rows_and_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let p = random_problem(&mut rng, 14);
        let sol = solve_qp(&p).unwrap();
        if let Some(x) = sol.x {
            for r in &p.rows {
                assert!(r.slack(&x) >= -1e-9);
            }
            for k in 0..p.dim {
                assert!(x[k] >= p.box_lo[k] - 1e-12 && x[k] <= p.box_hi[k] + 1e-12);
            }
            assert!(kkt_residual(&p, &x) <= 1e-8);
        }
    }
}
