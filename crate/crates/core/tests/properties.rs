use proptest::prelude::*;

use towpde::analysis::compare_pairs;
use towpde::game::{GameRules, GameState, Simulation};
use towpde::io::FieldPack;
use towpde::strategies::{pull_move, RandomMove};
use towpde::{solve_dpp, DataFn, DomainSpec, ProblemData, SolverOptions, SpaceTimeGrid};

fn grid() -> SpaceTimeGrid {
    SpaceTimeGrid::build(DomainSpec::ball(&[0.0, 0.0], 0.4), 0.05, 0.2, 0.12).unwrap()
}

/// Lipschitz data: an affine part plus a bump.
fn data_fn() -> impl Strategy<Value = DataFn> {
    (
        -1.0f64..1.0,
        -2.0f64..2.0,
        -2.0f64..2.0,
        -0.5f64..0.5,
        -0.5f64..0.5,
        0.1f64..1.0,
        -1.5f64..1.5,
    )
        .prop_map(|(c, a, b, bx, by, r, hgt)| DataFn::affine(c, &[a, b]).plus(DataFn::bump(&[bx, by], r, hgt)))
}

fn problem(f: DataFn, g: DataFn, u0: DataFn) -> ProblemData {
    ProblemData::new(DomainSpec::ball(&[0.0, 0.0], 0.4), f, g, u0, 0.2, 0.12)
}

fn negated(d: &ProblemData) -> ProblemData {
    ProblemData {
        f: d.f.clone().scaled(-1.0),
        g: d.g.clone().scaled(-1.0),
        u0: d.u0.clone().scaled(-1.0),
        ..d.clone()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solutions_respect_the_uniform_bound(f in data_fn(), g in data_fn(), u0 in data_fn()) {
        let grid = grid();
        let data = problem(f, g, u0);
        let pair = solve_dpp(&data, &grid, &SolverOptions::default()).unwrap();
        let (su, sv) = pair.sup_norms();
        prop_assert!(su <= pair.bound + 1e-12 && sv <= pair.bound + 1e-12);
    }

    #[test]
    fn ordered_data_give_ordered_solutions(
        f in data_fn(), g in data_fn(), u0 in data_fn(),
        bump in (-0.5f64..0.5, -0.5f64..0.5, 0.1f64..0.8, 0.0f64..1.0), lift in 0.0f64..0.3,
    ) {
        let grid = grid();
        let low = problem(f.clone(), g.clone(), u0.clone());
        let extra = DataFn::bump(&[bump.0, bump.1], bump.2, bump.3);
        let high = problem(f.plus(extra.clone()), g.plus(DataFn::constant(lift)), u0.plus(extra));
        let opts = SolverOptions::with_tol(1e-12);
        let a = solve_dpp(&low, &grid, &opts).unwrap();
        let b = solve_dpp(&high, &grid, &opts).unwrap();
        prop_assert!(compare_pairs(&a, &b, 1e-10).ordered);
        // Swapping with negated data preserves the verdict.
        let na = solve_dpp(&negated(&high), &grid, &opts).unwrap();
        let nb = solve_dpp(&negated(&low), &grid, &opts).unwrap();
        prop_assert!(compare_pairs(&na, &nb, 1e-10).ordered);
    }

    #[test]
    fn pack_round_trip_is_bit_exact(f in data_fn()) {
        let grid = grid();
        let data = problem(f.clone(), f.clone(), f);
        let pair = solve_dpp(&data, &grid, &SolverOptions::default()).unwrap();
        let bytes = FieldPack::from_pair(&pair, &grid).to_bytes();
        let back = FieldPack::from_bytes(&bytes).unwrap();
        for (a, b) in pair.u.iter().chain(&pair.v).flatten().zip(back.u.iter().chain(&back.v).flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

proptest! {
    #[test]
    fn pull_move_stays_in_the_ball(
        x in prop::collection::vec(-1.0f64..1.0, 3),
        y in prop::collection::vec(-1.0f64..1.0, 3),
        k in 0u64..80,
        eps in 0.001f64..0.5,
    ) {
        let z = pull_move(&x, &y, k, eps);
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        prop_assert!(d(&z, &x) <= eps * (1.0 + 1e-12));
        if d(&x, &y) >= eps {
            let want = eps - eps.powi(3) / 2f64.powi(k as i32);
            prop_assert!((d(&z, &x) - want).abs() <= 1e-12);
        } else {
            prop_assert_eq!(z.as_slice(), y.as_slice());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn simulated_payoffs_respect_the_bound(f in data_fn(), g in data_fn(), seed in any::<u64>()) {
        let grid = grid();
        let data = problem(f.clone(), g, f);
        let c = data.bound_constant(&grid);
        let random = RandomMove;
        let sim = Simulation { data: &data, rules: GameRules::for_problem(&data), one: &random, two: &random, seed };
        let est = sim.estimate(&GameState::new(&[0.05, -0.1], 0.12, towpde::Board::One), 200).unwrap();
        // The game can exit anywhere in the collar, where C was sampled.
        prop_assert!(est.min_payoff >= -c - 1e-12 && est.max_payoff <= c + 1e-12);
    }
}
