use crate::auction::{guarded_bid, is_risky, safe_bid_unchecked, PaymentRule, ScaleParams};
use crate::error::{check_positive, Error, Result};
use std::cell::OnceCell;

use crate::learners::{AffineRun, IntervalHedge, RestartGrid};
use crate::Rng;

use super::{check_round, BidDistribution, Feedback, Observation, Policy, RoundContext};

/// `(N, K) = (floor(L T), T)`.
pub fn poly_sizes(lipschitz: f64, horizon: usize) -> (usize, usize) {
    let n = (lipschitz * horizon as f64 + 1e-9).floor().max(1.0) as usize;
    (n, horizon.max(1))
}

/// Ranges announced to the bucket learners are rounded up to this many
/// steps per doubling, so their step sizes change only occasionally.
const RANGE_STEPS_PER_OCTAVE: f64 = 64.0;

fn announced_range(u: f64) -> f64 {
    let q = (u.log2() * RANGE_STEPS_PER_OCTAVE).ceil() / RANGE_STEPS_PER_OCTAVE;
    q.exp2().max(u)
}

#[derive(Debug, Clone, Copy)]
struct Past {
    d: f64,
    u: f64,
    scale: ScaleParams,
    rule: PaymentRule,
}

/// Value buckets with one interval-regret Hedge per bucket over the bid
/// levels `j / K`. Every instantiated bucket is updated every round from the
/// observed competing bid; a bucket first needed at round `t` is built by
/// replaying rounds `1..t`.
pub struct PolyPolicy {
    n: usize,
    k: usize,
    horizon: usize,
    grid: RestartGrid,
    buckets: Vec<Option<IntervalHedge>>,
    active: Vec<usize>,
    history: Vec<Past>,
    rewards: Vec<f64>,
    selected: Option<(usize, RoundContext)>,
    dist: OnceCell<BidDistribution>,
    acted: Option<usize>,
}

impl PolyPolicy {
    pub fn new(lipschitz: f64, horizon: usize, grid: RestartGrid) -> Result<Self> {
        check_positive("lipschitz", lipschitz)?;
        let (n, k) = poly_sizes(lipschitz, horizon);
        Self::with_sizes(n, k, horizon, grid)
    }

    pub fn with_sizes(n: usize, k: usize, horizon: usize, grid: RestartGrid) -> Result<Self> {
        if n == 0 || k == 0 || horizon == 0 {
            return Err(Error::OutOfRange {
                name: "buckets, levels, horizon",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        Ok(PolyPolicy {
            n,
            k,
            horizon,
            grid,
            buckets: (0..n).map(|_| None).collect(),
            active: Vec::new(),
            history: Vec::with_capacity(horizon),
            rewards: vec![0.0; k],
            selected: None,
            dist: OnceCell::new(),
            acted: None,
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

    /// Learner of 1-based bucket `i`, if instantiated.
    pub fn learner(&self, i: usize) -> Option<&IntervalHedge> {
        self.buckets.get(i.wrapping_sub(1)).and_then(|b| b.as_ref())
    }

    /// Rewards of every bid level for bucket `i` given `d`.
    pub fn bucket_rewards(
        &self,
        i: usize,
        rule: PaymentRule,
        scale: ScaleParams,
        d: f64,
        out: &mut [f64],
    ) {
        fill_rewards(self.n, self.k, i, rule, scale, d, out);
    }

    fn instantiate(&mut self, i: usize) -> Result<()> {
        if self.buckets[i - 1].is_some() {
            return Ok(());
        }
        let mut h = IntervalHedge::new(self.k, self.horizon, self.grid)?;
        for past in &self.history {
            h.begin(announced_range(past.u))?;
            let runs = fill_rewards(
                self.n,
                self.k,
                i,
                past.rule,
                past.scale,
                past.d,
                &mut self.rewards,
            );
            h.update_affine(&self.rewards, &runs)?;
        }
        self.buckets[i - 1] = Some(h);
        let pos = self.active.partition_point(|&a| a < i);
        self.active.insert(pos, i);
        Ok(())
    }
}

fn fill_rewards(
    n: usize,
    k: usize,
    i: usize,
    rule: PaymentRule,
    scale: ScaleParams,
    d: f64,
    out: &mut [f64],
) -> [AffineRun; 3] {
    let v = i as f64 / n as f64;
    let level = |j: usize| (j + 1) as f64 / k as f64;
    let reward = |b: f64| {
        if b >= d {
            scale.chi * v - scale.psi * rule.price(b, d)
        } else {
            0.0
        }
    };
    let safe = reward(safe_bid_unchecked(rule, v, scale));
    // both predicates are monotone in the level
    let guarded = first_index(k, |j| is_risky(scale, v, level(j)));
    let winning = first_index(k, |j| level(j) >= d).min(guarded);
    out[..winning].fill(0.0);
    for (j, r) in out[..guarded].iter_mut().enumerate().skip(winning) {
        *r = reward(level(j));
    }
    out[guarded..].fill(safe);
    let q = rule.price(1.0, 0.0);
    [
        AffineRun {
            len: winning,
            base: 0.0,
            slope: 0.0,
        },
        AffineRun {
            len: guarded - winning,
            base: reward(level(winning)),
            slope: -scale.psi * q / k as f64,
        },
        AffineRun {
            len: k - guarded,
            base: safe,
            slope: 0.0,
        },
    ]
}

/// Smallest `j < k` with `pred(j)`, or `k`; `pred` must be monotone.
fn first_index(k: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, k);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Distribution over guarded levels: unguarded levels stay sorted and the
/// guarded suffix collapses onto the safe bid.
fn level_distribution(ctx: &RoundContext, v: f64, probs: &[f64]) -> Result<BidDistribution> {
    let k = probs.len();
    let mut pairs = Vec::with_capacity(k + 1);
    let mut safe_mass = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        let b = (j + 1) as f64 / k as f64;
        if is_risky(ctx.scale, v, b) {
            safe_mass += p;
        } else if p > 0.0 {
            pairs.push((b, p));
        }
    }
    if safe_mass > 0.0 {
        let s = safe_bid_unchecked(ctx.rule, v, ctx.scale);
        let pos = pairs.partition_point(|x: &(f64, f64)| x.0 < s);
        if pos < pairs.len() && pairs[pos].0 == s {
            pairs[pos].1 += safe_mass;
        } else {
            pairs.insert(pos, (s, safe_mass));
        }
    }
    BidDistribution::from_sorted(pairs)
}

impl Policy for PolyPolicy {
    fn name(&self) -> &'static str {
        "poly"
    }

    fn feedback(&self) -> Feedback {
        Feedback::Full
    }

    fn act(&mut self, ctx: &RoundContext, rng: &mut Rng) -> Result<f64> {
        let bucket = self.bucket_of(ctx.v);
        if let Some(i) = bucket {
            self.instantiate(i)?;
        }
        for &a in &self.active {
            self.buckets[a - 1]
                .as_mut()
                .unwrap()
                .begin(announced_range(ctx.u))?;
        }
        self.acted = Some(ctx.t);
        self.dist = OnceCell::new();
        self.selected = bucket.map(|i| (i, *ctx));
        let Some(i) = bucket else {
            return Ok(0.0);
        };
        let v = i as f64 / self.n as f64;
        let j = self.buckets[i - 1].as_ref().unwrap().sample(rng);
        Ok(guarded_bid(
            ctx.rule,
            v,
            ctx.scale,
            (j + 1) as f64 / self.k as f64,
        ))
    }

    fn observe(&mut self, ctx: &RoundContext, obs: &Observation) -> Result<()> {
        check_round(&mut self.acted, ctx)?;
        self.selected = None;
        let d = obs.d.ok_or(Error::FeedbackMismatch {
            policy: "full",
            run: "bandit",
        })?;
        for &a in &self.active {
            let runs = fill_rewards(self.n, self.k, a, ctx.rule, ctx.scale, d, &mut self.rewards);
            self.buckets[a - 1]
                .as_mut()
                .unwrap()
                .update_affine(&self.rewards, &runs)?;
        }
        self.history.push(Past {
            d,
            u: ctx.u,
            scale: ctx.scale,
            rule: ctx.rule,
        });
        Ok(())
    }

    fn distribution(&self) -> &BidDistribution {
        self.dist.get_or_init(|| match self.selected {
            None => BidDistribution::point(0.0),
            Some((i, ctx)) => {
                let probs = self.buckets[i - 1].as_ref().unwrap().mixed_distribution();
                level_distribution(&ctx, i as f64 / self.n as f64, &probs)
                    .expect("mixture of distributions has unit mass")
            }
        })
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("buckets".into(), self.n.to_string()),
            ("bid_levels".into(), self.k.to_string()),
            ("restart_grid".into(), self.grid.name().into()),
        ]
    }
}
