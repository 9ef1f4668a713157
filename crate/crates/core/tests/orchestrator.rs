use autobid::env::{EnvSpec, Marginal};
use autobid::learners::RestartGrid;
use autobid::orchestrator::{run_exact_roi, run_primal_dual, PolicyTag, RunSpec};
use autobid::policies::{BucketBanditPolicy, Feedback, FixedBid, FixedPolicy, TreePolicy};
use autobid::{Error, Objective, PaymentRule};

fn point_env(v: f64, d: f64) -> EnvSpec {
    EnvSpec::Product {
        value: Marginal::Point { at: v },
        competing: Marginal::Point { at: d },
    }
}

fn always_one() -> FixedPolicy {
    FixedPolicy::new(FixedBid::Constant { bid: 1.0 }).unwrap()
}

#[test]
fn budget_below_one_keeps_every_round_idle() {
    let t = 50;
    let env = point_env(1.0, 0.2).build(t).unwrap();
    let spec = RunSpec::new(
        PaymentRule::FirstPrice,
        Objective::ValueMax,
        0.5 / t as f64,
        t,
        3,
    );
    let trace = run_primal_dual(&env, &mut always_one(), &spec).unwrap();
    assert_eq!(trace.budget, 0.5);
    assert!(trace
        .rows
        .iter()
        .all(|r| r.tag == PolicyTag::Idle && r.bid == 0.0));
    assert_eq!(trace.total_payment(), 0.0);
}

#[test]
fn guard_stops_bidding_once_less_than_one_remains() {
    let t = 40;
    let env = point_env(1.0, 0.7).build(t).unwrap();
    let spec = RunSpec::new(PaymentRule::FirstPrice, Objective::ValueMax, 0.1, t, 5);
    let trace = run_primal_dual(&env, &mut always_one(), &spec).unwrap();
    // budget 4: rounds 1..=3 pay 1 each, then only 1 remains and round 4 pays the last unit
    let paying: Vec<usize> = trace
        .rows
        .iter()
        .filter(|r| r.payment > 0.0)
        .map(|r| r.t)
        .collect();
    assert_eq!(paying, vec![1, 2, 3, 4]);
    for r in &trace.rows {
        if r.budget_remaining + r.payment < 1.0 {
            assert_eq!(r.bid, 0.0);
        }
    }
    assert!(trace.total_payment() <= trace.budget);
}

#[test]
fn free_wins_add_one_each() {
    let t = 25;
    let env = point_env(1.0, 0.0).build(t).unwrap();
    let spec = RunSpec::new(PaymentRule::SecondPrice, Objective::ValueMax, 1.0, t, 0);
    let trace = run_primal_dual(&env, &mut always_one(), &spec).unwrap();
    for (i, r) in trace.rows.iter().enumerate() {
        assert!(r.won);
        assert_eq!(r.cum_objective, (i + 1) as f64);
    }
}

#[test]
fn same_seed_same_trace() {
    let t = 300;
    let env = EnvSpec::Product {
        value: Marginal::Uniform { lo: 0.0, hi: 1.0 },
        competing: Marginal::Uniform { lo: 0.0, hi: 1.0 },
    }
    .build(t)
    .unwrap();
    let mut spec = RunSpec::new(PaymentRule::FirstPrice, Objective::ValueMax, 0.3, t, 17);
    spec.feedback = Feedback::Bandit;
    let run = |spec: &RunSpec| {
        let mut p = BucketBanditPolicy::new(1.0, t).unwrap();
        run_primal_dual(&env, &mut p, spec).unwrap()
    };
    let first = run(&spec);
    assert_eq!(first, run(&spec));
    spec.seed = 18;
    assert_ne!(first, run(&spec));
}

#[test]
fn full_info_policy_rejected_under_bandit_feedback() {
    let env = point_env(0.5, 0.5).build(10).unwrap();
    let mut spec = RunSpec::new(PaymentRule::FirstPrice, Objective::ValueMax, 0.5, 10, 0);
    spec.feedback = Feedback::Bandit;
    let mut p = TreePolicy::new(1.0, 10, 1, 1_000_000, RestartGrid::PowersOfTwo).unwrap();
    assert!(matches!(
        run_primal_dual(&env, &mut p, &spec),
        Err(Error::FeedbackMismatch { .. })
    ));
}

#[test]
fn exact_roi_starts_with_slack_pipeline_and_stays_feasible() {
    let t = 10_000;
    let env = EnvSpec::tight_beta(0.1).unwrap().build(t).unwrap();
    let spec = RunSpec::new(PaymentRule::FirstPrice, Objective::ValueMax, 0.5, t, 11);
    let mut a1 = TreePolicy::new(1.0, t, 1, 1_000_000, RestartGrid::PowersOfTwo).unwrap();
    let mut a2 = TreePolicy::new(1.0, t, 1, 1_000_000, RestartGrid::PowersOfTwo).unwrap();
    let trace = run_exact_roi(&env, &mut a1, &mut a2, &spec).unwrap();
    assert_eq!(trace.rows[0].tag, PolicyTag::A2);
    assert!(trace.rows.iter().any(|r| r.tag == PolicyTag::A1));
    assert!(trace.min_roi_slack() >= 0.0);
    assert!(trace.total_payment() <= trace.budget);
    let mut prev = 0.0;
    for r in &trace.rows {
        if r.tag == PolicyTag::A2 {
            assert!(r.roi_slack >= prev);
        }
        prev = r.roi_slack;
    }
    assert!(trace.rows.windows(2).all(|w| w[0].u_cap <= w[1].u_cap));
}
