//! Run loops: the primal/dual game with a budget guard, and the exact-ROI
//! switching wrapper.
//!
//! Per round: draw `(v, d)`, read the multipliers learned from earlier
//! rounds, fold `max(chi, psi)` into the running range, let the policy bid
//! unless less than 1 of budget remains, resolve the auction, then feed the
//! outcome to the policy and to the dual.

use crate::auction::{chi_psi, Objective, PaymentRule, RangeTracker, ScaleParams};
use crate::dual::{default_dual_step, DualFeedback, DualGradient, DualState};
use crate::env::Env;
use crate::error::{check_positive, Error, Result};
use crate::policies::{Feedback, Observation, Policy, RoundContext};
use crate::{stream_rng, ENV_STREAM, PRIMAL_STREAM};

/// Which component chose the round's bid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyTag {
    /// The primal policy of a plain primal/dual run.
    Primal,
    /// The constrained pipeline of the exact-ROI wrapper.
    A1,
    /// The slack-building pipeline of the exact-ROI wrapper.
    A2,
    /// Bid forced to 0 by the budget guard.
    Idle,
}

impl PolicyTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyTag::Primal => "primal",
            PolicyTag::A1 => "A1",
            PolicyTag::A2 => "A2",
            PolicyTag::Idle => "idle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub v: f64,
    /// Masked under bandit feedback.
    pub d: Option<f64>,
    pub bid: f64,
    pub won: bool,
    pub payment: f64,
    /// `x v`
    pub value: f64,
    /// Objective earned this round.
    pub utility: f64,
    pub lambda: f64,
    pub mu: f64,
    pub chi: f64,
    pub psi: f64,
    pub u_cap: f64,
    pub budget_remaining: f64,
    /// `sum x (v - p)` up to and including this round.
    pub roi_slack: f64,
    pub tag: PolicyTag,
    pub cum_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub budget: f64,
    /// Every knob that shaped the run, for reproducibility.
    pub metadata: Vec<(String, String)>,
}

impl RunTrace {
    pub fn total_payment(&self) -> f64 {
        self.rows.iter().map(|r| r.payment).sum()
    }

    pub fn cum_objective(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_objective)
    }

    pub fn min_roi_slack(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.roi_slack)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Everything a run needs besides the environment and the policies.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub rule: PaymentRule,
    pub objective: Objective,
    pub rho: f64,
    pub horizon: usize,
    pub seed: u64,
    pub feedback: Feedback,
    /// `None` means `1 / sqrt(T)`.
    pub dual_step: Option<f64>,
    pub dual_cap: f64,
    pub dual_gradient: DualGradient,
}

impl RunSpec {
    pub fn new(
        rule: PaymentRule,
        objective: Objective,
        rho: f64,
        horizon: usize,
        seed: u64,
    ) -> Self {
        RunSpec {
            rule,
            objective,
            rho,
            horizon,
            seed,
            feedback: Feedback::Full,
            dual_step: None,
            dual_cap: f64::INFINITY,
            dual_gradient: DualGradient::Realized,
        }
    }

    pub fn budget(&self) -> f64 {
        self.rho * self.horizon as f64
    }

    pub fn dual_step_size(&self) -> f64 {
        self.dual_step
            .unwrap_or_else(|| default_dual_step(self.horizon))
    }

    pub fn validate(&self) -> Result<()> {
        self.rule.validate()?;
        self.objective.validate()?;
        check_positive("rho", self.rho)?;
        if self.rho > 1.0 {
            return Err(Error::OutOfRange {
                name: "rho",
                value: self.rho,
                range: "(0, 1]",
            });
        }
        if self.horizon == 0 {
            return Err(Error::OutOfRange {
                name: "horizon",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        check_positive("dual_step", self.dual_step_size())?;
        if self.dual_gradient == DualGradient::Expected && self.feedback == Feedback::Bandit {
            return Err(Error::FeedbackMismatch {
                policy: "full",
                run: "bandit",
            });
        }
        Ok(())
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("seed".into(), self.seed.to_string()),
            ("horizon".into(), self.horizon.to_string()),
            ("rho".into(), self.rho.to_string()),
            ("rule".into(), format!("{:?}", self.rule)),
            ("objective".into(), format!("{:?}", self.objective)),
            ("feedback".into(), self.feedback.name().into()),
            ("dual_step".into(), self.dual_step_size().to_string()),
            ("dual_cap".into(), self.dual_cap.to_string()),
            ("dual_gradient".into(), format!("{:?}", self.dual_gradient)),
        ]
    }
}

fn check_feedback(policy: &dyn Policy, run: Feedback) -> Result<()> {
    if policy.feedback() == Feedback::Full && run == Feedback::Bandit {
        return Err(Error::FeedbackMismatch {
            policy: "full",
            run: "bandit",
        });
    }
    Ok(())
}

/// Runs one primal policy against the dual with the budget guard.
pub fn run_primal_dual(env: &Env, policy: &mut dyn Policy, spec: &RunSpec) -> Result<RunTrace> {
    check_feedback(policy, spec.feedback)?;
    let mut trace = run_loop(env, spec, policy, None)?;
    trace.metadata.push(("mode".into(), "primal_dual".into()));
    Ok(trace)
}

/// Runs the exact-ROI wrapper: `a1` acts once the accumulated ROI slack is
/// at least 1, `a2` with unit scales before that.
pub fn run_exact_roi(
    env: &Env,
    a1: &mut dyn Policy,
    a2: &mut dyn Policy,
    spec: &RunSpec,
) -> Result<RunTrace> {
    check_feedback(a1, spec.feedback)?;
    check_feedback(a2, spec.feedback)?;
    let mut trace = run_loop(env, spec, a1, Some(a2))?;
    trace.metadata.push(("mode".into(), "exact_roi".into()));
    Ok(trace)
}

fn run_loop(
    env: &Env,
    spec: &RunSpec,
    primal: &mut dyn Policy,
    mut slack_policy: Option<&mut dyn Policy>,
) -> Result<RunTrace> {
    spec.validate()?;
    let mut env_rng = stream_rng(spec.seed, ENV_STREAM);
    let mut rng = stream_rng(spec.seed, PRIMAL_STREAM);
    let mut dual = DualState::new(spec.rho, spec.dual_step_size(), spec.dual_cap)?;
    let mut range = RangeTracker::new();
    let budget = spec.budget();
    let full = spec.feedback == Feedback::Full;

    let mut rows = Vec::with_capacity(spec.horizon);
    let (mut spent, mut slack, mut cum) = (0.0, 0.0, 0.0);
    for t in 1..=spec.horizon {
        let s = env.sample(&mut env_rng);
        let m = dual.multipliers();
        let scale = chi_psi(spec.objective, m);
        let u_cap = range.observe(scale);
        let remaining = budget - spent;

        let tag = if remaining < 1.0 {
            PolicyTag::Idle
        } else if slack_policy.is_none() {
            PolicyTag::Primal
        } else if slack >= 1.0 {
            PolicyTag::A1
        } else {
            PolicyTag::A2
        };
        let ctx = match tag {
            PolicyTag::A2 => RoundContext {
                t,
                v: s.v,
                scale: ScaleParams::UNIT,
                u: 1.0,
                rule: spec.rule,
            },
            _ => RoundContext {
                t,
                v: s.v,
                scale,
                u: u_cap,
                rule: spec.rule,
            },
        };
        let actor: Option<&mut dyn Policy> = match tag {
            PolicyTag::Idle => None,
            PolicyTag::A2 => match slack_policy.as_mut() {
                Some(p) => Some(&mut **p),
                None => None,
            },
            _ => Some(&mut *primal),
        };

        let (bid, actor) = match actor {
            None => (0.0, None),
            Some(p) => (p.act(&ctx, &mut rng)?, Some(p)),
        };
        if !(0.0..=1.0).contains(&bid) {
            return Err(Error::InvariantViolation(format!(
                "round {t}: bid {bid} outside [0, 1]"
            )));
        }
        let won = bid >= s.d;
        let price = if won { spec.rule.price(bid, s.d) } else { 0.0 };

        if let Some(p) = actor {
            let obs = Observation {
                bid,
                won,
                price,
                d: full.then_some(s.d),
            };
            let fb = (tag != PolicyTag::A2).then(|| match spec.dual_gradient {
                DualGradient::Realized => DualFeedback::realized(won, price, s.v),
                DualGradient::Expected => {
                    let (spend, value) = p.distribution().expected_outcome(spec.rule, s.v, s.d);
                    DualFeedback { spend, value }
                }
            });
            p.observe(&ctx, &obs)?;
            if let Some(fb) = fb {
                dual.update(fb);
            }
        }

        spent += price;
        let value = if won { s.v } else { 0.0 };
        slack += value - price;
        let utility = spec.objective.utility(won, s.v, price);
        cum += utility;
        if spent > budget + 1e-9 {
            return Err(Error::InvariantViolation(format!(
                "round {t}: spent {spent} above budget {budget}"
            )));
        }
        rows.push(TraceRow {
            t,
            v: s.v,
            d: full.then_some(s.d),
            bid,
            won,
            payment: price,
            value,
            utility,
            lambda: m.lambda,
            mu: m.mu,
            chi: scale.chi,
            psi: scale.psi,
            u_cap,
            budget_remaining: budget - spent,
            roi_slack: slack,
            tag,
            cum_objective: cum,
        });
    }

    let mut metadata = spec.metadata();
    metadata.push(("policy".into(), primal.name().into()));
    metadata.extend(primal.metadata());
    if let Some(p) = slack_policy {
        metadata.push(("slack_policy".into(), p.name().into()));
    }
    Ok(RunTrace {
        rows,
        budget,
        metadata,
    })
}
