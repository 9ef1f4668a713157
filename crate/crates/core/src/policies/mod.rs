//! Bid-producing policies.

mod bucket;
mod fixed;
mod poly;
mod tree;

pub use bucket::{bucket_bandit_sizes, BucketBanditPolicy};
pub use fixed::{FixedBid, FixedPolicy};
pub use poly::{poly_sizes, PolyPolicy};
pub use tree::{TreeLearner, TreePolicy, TreeRound};

use serde::{Deserialize, Serialize};

use crate::auction::{scaled_reward, PaymentRule, ScaleParams};
use crate::error::{Error, Result};
use crate::Rng;

/// What a policy observes after each round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// The highest competing bid is revealed.
    Full,
    /// Only the win indicator and the price paid.
    Bandit,
}

impl Feedback {
    pub fn name(&self) -> &'static str {
        match self {
            Feedback::Full => "full",
            Feedback::Bandit => "bandit",
        }
    }
}

/// Per-round inputs known before bidding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundContext {
    /// 1-based round index.
    pub t: usize,
    pub v: f64,
    pub scale: ScaleParams,
    /// Running maximum of the reward range.
    pub u: f64,
    pub rule: PaymentRule,
}

impl RoundContext {
    /// `r_t(b)` once `d` is known.
    #[inline]
    pub fn reward(&self, b: f64, d: f64) -> f64 {
        scaled_reward(self.rule, self.scale, self.v, b, d)
    }
}

/// Outcome of a round as seen by the policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub bid: f64,
    pub won: bool,
    /// Price paid, 0 on a loss.
    pub price: f64,
    /// Highest competing bid under full information.
    pub d: Option<f64>,
}

/// Finite distribution over distinct bids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BidDistribution {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl BidDistribution {
    pub fn point(b: f64) -> Self {
        BidDistribution {
            support: vec![b],
            probs: vec![1.0],
        }
    }

    /// Merges equal bids and drops zero-probability entries.
    pub fn from_pairs<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> Result<Self> {
        let mut pairs: Vec<(f64, f64)> = pairs.into_iter().filter(|p| p.1 > 0.0).collect();
        if pairs.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite entry".into()));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut d = BidDistribution::default();
        for (b, p) in pairs {
            if d.support.last() == Some(&b) {
                *d.probs.last_mut().unwrap() += p;
            } else {
                d.support.push(b);
                d.probs.push(p);
            }
        }
        let total: f64 = d.probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("mass {total}")));
        }
        Ok(d)
    }

    /// Trusts that `pairs` is sorted by bid with distinct bids.
    pub(crate) fn from_sorted(pairs: Vec<(f64, f64)>) -> Result<Self> {
        debug_assert!(pairs.windows(2).all(|w| w[0].0 < w[1].0));
        let (support, probs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("mass {total}")));
        }
        Ok(BidDistribution { support, probs })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        self.support[crate::learners::sample_index(&self.probs, rng)]
    }

    /// Expected `(spend, value)` against a known competing bid.
    pub fn expected_outcome(&self, rule: PaymentRule, v: f64, d: f64) -> (f64, f64) {
        self.iter()
            .filter(|&(b, _)| b >= d)
            .fold((0.0, 0.0), |(s, val), (b, p)| {
                (s + p * rule.price(b, d), val + p * v)
            })
    }
}

/// A bidding policy driven by the orchestrator.
pub trait Policy: Send {
    fn name(&self) -> &'static str;

    /// Feedback the policy needs.
    fn feedback(&self) -> Feedback;

    /// Chooses this round's bid.
    fn act(&mut self, ctx: &RoundContext, rng: &mut Rng) -> Result<f64>;

    /// Consumes the outcome of the round just acted on.
    fn observe(&mut self, ctx: &RoundContext, obs: &Observation) -> Result<()>;

    /// Distribution the last bid was drawn from, valid until the following
    /// `observe`.
    fn distribution(&self) -> &BidDistribution;

    /// Knobs worth recording with a run.
    fn metadata(&self) -> Vec<(String, String)> {
        Vec::new()
    }
}

/// Clears the round recorded by `act` and checks it against `ctx`.
pub(crate) fn check_round(acted: &mut Option<usize>, ctx: &RoundContext) -> Result<()> {
    match acted.take() {
        Some(t) if t == ctx.t => Ok(()),
        _ => Err(Error::UnmatchedUpdate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_pairs_merges_and_validates() {
        let d = BidDistribution::from_pairs([(0.5, 0.25), (0.0, 0.5), (0.5, 0.25), (1.0, 0.0)])
            .unwrap();
        assert_eq!(d.support(), &[0.0, 0.5]);
        assert_eq!(d.probs(), &[0.5, 0.5]);
        assert!(BidDistribution::from_pairs([(0.5, 0.3)]).is_err());
    }

    #[test]
    fn expected_outcome_counts_ties() {
        let d = BidDistribution::from_pairs([(0.2, 0.5), (0.6, 0.5)]).unwrap();
        let (s, v) = d.expected_outcome(PaymentRule::FirstPrice, 0.9, 0.2);
        assert!((s - 0.4).abs() < 1e-15);
        assert!((v - 0.9).abs() < 1e-15);
    }
}
