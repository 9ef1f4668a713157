use crate::auction::guarded_bid;
use crate::error::{check_positive, Error, Result};
use crate::learners::ExpSix;
use crate::Rng;

use super::{BidDistribution, Feedback, Observation, Policy, RoundContext};

/// `(N, K)`: value buckets `ceil(L^(3/4) T^(1/4))` and bid levels
/// `ceil(T^(1/4) / L^(1/4))`.
pub fn bucket_bandit_sizes(lipschitz: f64, horizon: usize) -> (usize, usize) {
    let t = horizon as f64;
    let n = (lipschitz.powf(0.75) * t.powf(0.25) - 1e-9).ceil().max(1.0);
    let k = (t.powf(0.25) / lipschitz.powf(0.25) - 1e-9).ceil().max(1.0);
    (n as usize, k as usize)
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    t: usize,
    bucket: Option<usize>,
    action: usize,
}

/// Splits values into buckets and runs an independent bandit learner over
/// the bid levels `j / K` in each bucket, advanced only on its own rounds.
pub struct BucketBanditPolicy {
    n: usize,
    k: usize,
    horizon: usize,
    learners: Vec<Option<ExpSix>>,
    pending: Option<Pending>,
    dist: BidDistribution,
}

impl BucketBanditPolicy {
    pub fn new(lipschitz: f64, horizon: usize) -> Result<Self> {
        check_positive("lipschitz", lipschitz)?;
        let (n, k) = bucket_bandit_sizes(lipschitz, horizon);
        Self::with_sizes(n, k, horizon)
    }

    pub fn with_sizes(n: usize, k: usize, horizon: usize) -> Result<Self> {
        if n == 0 || k == 0 || horizon == 0 {
            return Err(Error::OutOfRange {
                name: "buckets, levels, horizon",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        Ok(BucketBanditPolicy {
            n,
            k,
            horizon,
            learners: (0..n).map(|_| None).collect(),
            pending: None,
            dist: BidDistribution::default(),
        })
    }

    pub fn buckets(&self) -> usize {
        self.n
    }

    pub fn levels(&self) -> usize {
        self.k
    }

    /// 1-based bucket of `v`, or `None` for `v = 0`.
    pub fn bucket_of(&self, v: f64) -> Option<usize> {
        if v <= 0.0 {
            return None;
        }
        Some(((v * self.n as f64).ceil() as usize).clamp(1, self.n))
    }

    /// Learner of 1-based bucket `i`, if it has been used.
    pub fn learner(&self, i: usize) -> Option<&ExpSix> {
        self.learners
            .get(i.wrapping_sub(1))
            .and_then(|l| l.as_ref())
    }

    /// Bid level `j`, 1-based.
    pub fn level_bid(&self, j: usize) -> f64 {
        j as f64 / self.k as f64
    }
}

impl Policy for BucketBanditPolicy {
    fn name(&self) -> &'static str {
        "bucket_bandit"
    }

    fn feedback(&self) -> Feedback {
        Feedback::Bandit
    }

    fn act(&mut self, ctx: &RoundContext, rng: &mut Rng) -> Result<f64> {
        let Some(i) = self.bucket_of(ctx.v) else {
            self.pending = Some(Pending {
                t: ctx.t,
                bucket: None,
                action: 0,
            });
            self.dist = BidDistribution::point(0.0);
            return Ok(0.0);
        };
        let v_tilde = i as f64 / self.n as f64;
        let (k, horizon) = (self.k, self.horizon);
        let slot = &mut self.learners[i - 1];
        if slot.is_none() {
            *slot = Some(ExpSix::new(k, horizon)?);
        }
        let learner = slot.as_mut().unwrap();
        let probs = learner.announce(ctx.u)?;
        let bids: Vec<f64> = (1..=k)
            .map(|j| guarded_bid(ctx.rule, v_tilde, ctx.scale, j as f64 / k as f64))
            .collect();
        self.dist = BidDistribution::from_pairs(bids.iter().copied().zip(probs.iter().copied()))?;
        let a = learner.sample(rng);
        self.pending = Some(Pending {
            t: ctx.t,
            bucket: Some(i),
            action: a,
        });
        Ok(bids[a])
    }

    fn observe(&mut self, ctx: &RoundContext, obs: &Observation) -> Result<()> {
        let p = self.pending.take().ok_or(Error::UnmatchedUpdate)?;
        if p.t != ctx.t {
            return Err(Error::UnmatchedUpdate);
        }
        let Some(i) = p.bucket else {
            return Ok(());
        };
        let v_tilde = i as f64 / self.n as f64;
        let r = if obs.won {
            ctx.scale.chi * v_tilde - ctx.scale.psi * obs.price
        } else {
            0.0
        };
        let learner = self.learners[i - 1]
            .as_mut()
            .ok_or(Error::UnmatchedUpdate)?;
        learner.observe(p.action, ctx.u - r)
    }

    fn distribution(&self) -> &BidDistribution {
        &self.dist
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("buckets".into(), self.n.to_string()),
            ("bid_levels".into(), self.k.to_string()),
            ("learner_horizon".into(), self.horizon.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{PaymentRule, ScaleParams};
    use crate::stream_rng;

    fn ctx(t: usize, v: f64) -> RoundContext {
        RoundContext {
            t,
            v,
            scale: ScaleParams::UNIT,
            u: 1.0,
            rule: PaymentRule::FirstPrice,
        }
    }

    #[test]
    fn sizes_at_t256() {
        assert_eq!(bucket_bandit_sizes(1.0, 256), (4, 4));
        let p = BucketBanditPolicy::new(1.0, 256).unwrap();
        let levels: Vec<f64> = (1..=4).map(|j| p.level_bid(j)).collect();
        assert_eq!(levels, vec![0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn zero_value_bids_zero_without_learner() {
        let mut p = BucketBanditPolicy::new(1.0, 256).unwrap();
        let mut rng = stream_rng(0, 1);
        assert_eq!(p.act(&ctx(1, 0.0), &mut rng).unwrap(), 0.0);
        p.observe(
            &ctx(1, 0.0),
            &Observation {
                bid: 0.0,
                won: true,
                price: 0.0,
                d: None,
            },
        )
        .unwrap();
        assert!((1..=4).all(|i| p.learner(i).is_none()));
    }

    #[test]
    fn only_selected_bucket_advances() {
        let mut p = BucketBanditPolicy::new(1.0, 256).unwrap();
        let mut rng = stream_rng(0, 1);
        for t in 1..=10 {
            let v = if t % 3 == 0 { 0.3 } else { 0.9 };
            let b = p.act(&ctx(t, v), &mut rng).unwrap();
            let won = b >= 0.1;
            let obs = Observation {
                bid: b,
                won,
                price: if won { b } else { 0.0 },
                d: None,
            };
            p.observe(&ctx(t, v), &obs).unwrap();
        }
        assert_eq!(p.learner(2).unwrap().round(), 3);
        assert_eq!(p.learner(4).unwrap().round(), 7);
        assert!(p.learner(1).is_none());
    }

    #[test]
    fn guard_uses_bucket_value() {
        let mut p = BucketBanditPolicy::new(1.0, 256).unwrap();
        let mut rng = stream_rng(0, 1);
        // v = 0.3 lies in bucket 2 with representative 0.5: levels above 0.5 are guarded to 0
        p.act(&ctx(1, 0.3), &mut rng).unwrap();
        assert_eq!(p.distribution().support(), &[0.0, 0.25, 0.5]);
    }

    #[test]
    fn observe_without_act_fails() {
        let mut p = BucketBanditPolicy::new(1.0, 256).unwrap();
        let obs = Observation {
            bid: 0.0,
            won: false,
            price: 0.0,
            d: None,
        };
        assert_eq!(p.observe(&ctx(1, 0.5), &obs), Err(Error::UnmatchedUpdate));
    }
}
