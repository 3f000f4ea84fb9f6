mod common;

use common::*;
use proptest::prelude::*;
use twolevel::allsum::{allsum, Outcome, SolverConfig, SweepMode};
use twolevel::grammar::Variant;
use twolevel::oracle::oracle_allsum_truncated;
use twolevel::semiring::SemiringKind;

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::CC), Just(Variant::PC), Just(Variant::CP), Just(Variant::PP)]
}

fn kind() -> impl Strategy<Value = SemiringKind> {
    prop_oneof![Just(SemiringKind::Real), Just(SemiringKind::Counting), Just(SemiringKind::Boolean)]
}

fn solve(g: &twolevel::twolevel::TwoLevelGrammar, mode: SweepMode) -> twolevel::allsum::AllsumReport {
    let cfg = SolverConfig {
        tolerance: 1e-13,
        max_sweeps: 20_000,
        mode,
    };
    allsum(g, &cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sweeps_never_decrease(seed in any::<u64>(), v in variant(), k in kind()) {
        let (nf, txt) = random_nf(&mut rng(seed), v, k);
        for mode in [SweepMode::Jacobi, SweepMode::GaussSeidel] {
            let rep = solve(&nf.grammar, mode);
            prop_assert_eq!(rep.monotonicity_violations, 0, "{:?}\n{}", mode, txt);
        }
    }

    #[test]
    fn modes_agree_at_convergence(seed in any::<u64>(), v in variant(), k in kind()) {
        let (nf, txt) = random_nf(&mut rng(seed), v, k);
        let j = solve(&nf.grammar, SweepMode::Jacobi);
        let gs = solve(&nf.grammar, SweepMode::GaussSeidel);
        if j.outcome == Outcome::Converged && gs.outcome == Outcome::Converged {
            prop_assert!(same_weight(j.value, gs.value, 1e-9), "{} vs {}\n{}", j.value, gs.value, txt);
        }
    }

    #[test]
    fn truncated_sums_stay_below(seed in any::<u64>(), v in variant(), k in kind()) {
        let (nf, txt) = random_nf(&mut rng(seed), v, k);
        let sr = nf.semiring();
        let rep = solve(&nf.grammar, SweepMode::Jacobi);
        let low = oracle_allsum_truncated(&nf.grammar, 8).unwrap();
        let ok = match (low, rep.value) {
            (twolevel::semiring::Weight::Real(a), twolevel::semiring::Weight::Real(b)) => a <= b * (1.0 + 1e-9) + 1e-12,
            _ => sr.leq(low, rep.value),
        };
        prop_assert!(ok, "truncated {} above allsum {}\n{}", low, rep.value, txt);
    }
}
