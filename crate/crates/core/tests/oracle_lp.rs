use autobid::env::Atom;
use autobid::oracle::{moments, solve_opt, ConstantBid, Moments, ValueTable};
use autobid::{Error, Objective, PaymentRule};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;

/// The benchmark LP solved by a general simplex implementation.
fn simplex_opt(c: &[Moments], rho: f64) -> Option<f64> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = c
        .iter()
        .map(|m| lp.add_var(m.utility, (0.0, f64::INFINITY)))
        .collect();
    let row = |f: fn(&Moments) -> f64| -> Vec<_> {
        vars.iter().zip(c).map(|(&v, m)| (v, f(m))).collect()
    };
    lp.add_constraint(row(|_| 1.0), ComparisonOp::Eq, 1.0);
    lp.add_constraint(row(|m| m.payment), ComparisonOp::Le, rho);
    lp.add_constraint(row(|m| m.roi), ComparisonOp::Ge, 0.0);
    lp.solve().ok().map(|s| s.objective())
}

fn atoms() -> impl Strategy<Value = Vec<Atom>> {
    prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64, 0.05..1.0f64), 1..8).prop_map(|raw| {
        let total: f64 = raw.iter().map(|a| a.2).sum();
        raw.into_iter()
            .map(|(v, d, p)| Atom { v, d, p: p / total })
            .collect()
    })
}

fn rule() -> impl Strategy<Value = PaymentRule> {
    prop_oneof![
        Just(PaymentRule::FirstPrice),
        Just(PaymentRule::SecondPrice),
        (0.0..=1.0f64).prop_map(|q| PaymentRule::Mixed { q }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn support_enumeration_matches_simplex(
        atoms in atoms(),
        rule in rule(),
        quasi in any::<bool>(),
        tables in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64), 1..12),
        rho in 0.01..1.0f64,
    ) {
        let obj = if quasi { Objective::QuasiLinear { nu: 1.0 } } else { Objective::ValueMax };
        let cands: Vec<Moments> = tables
            .iter()
            .map(|&(a, b, c)| {
                let f = ValueTable::new(vec![(0.0, a), (0.5, b), (1.0, c)]).unwrap();
                moments(&atoms, &f, rule, obj)
            })
            .collect();
        match (solve_opt(&cands, rho), simplex_opt(&cands, rho)) {
            (Ok(s), Some(lp)) => prop_assert!((s.value - lp).abs() < 1e-7, "{} vs {lp}", s.value),
            (Err(Error::Infeasible), None) => {}
            (ours, lp) => prop_assert!(false, "{ours:?} vs {lp:?}"),
        }
    }

    #[test]
    fn zero_bid_keeps_the_benchmark_feasible(atoms in atoms(), rule in rule(), rho in 0.0..1.0f64) {
        let c = [moments(&atoms, &ConstantBid(0.0), rule, Objective::ValueMax)];
        let s = solve_opt(&c, rho).unwrap();
        prop_assert!(s.value >= 0.0);
        prop_assert_eq!(s.payment, 0.0);
    }
}
