//! Adversarial learners: Hedge with time-varying ranges, the restart mixture
//! that turns regret into interval regret, and an implicit-exploration bandit
//! learner.

mod expsix;
mod hedge;
mod meta;

pub use expsix::{implicit_loss_estimate, ExpSix};
pub use hedge::{delta_floor, effective_delta, hedge_eta, Hedge, REWARD_SLACK};
pub use meta::{AffineRun, IntervalHedge, Meta, RestartGrid, RestartMixer, SubFactory};

use rand::Rng;

use crate::error::Result;

/// A learner that outputs a distribution over a fixed action set and then
/// observes the reward of every action.
pub trait FullInfoLearner {
    /// Per-round data shared with the caller, such as the current bid slots.
    type Ctx: ?Sized;

    fn num_actions(&self) -> usize;

    /// Returns this round's distribution after folding `u` into the range.
    fn step(&mut self, ctx: &Self::Ctx, u: f64) -> Result<&[f64]>;

    /// Consumes the rewards of all actions for the round just stepped.
    fn update(&mut self, ctx: &Self::Ctx, rewards: &[f64]) -> Result<()>;
}

/// Draws an index from a probability vector by inverse transform.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Dot product of a distribution with a reward vector.
#[inline]
pub fn expected_reward(probs: &[f64], rewards: &[f64]) -> f64 {
    dot(probs, rewards)
}

const LANES: usize = 8;

/// Dot product over the common prefix, with independent partial sums.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; LANES];
    let (ca, cb) = (a.chunks_exact(LANES), b.chunks_exact(LANES));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..LANES {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Dot products of each of `xs` with `c`, in one pass over `c`.
pub(crate) fn dots<const M: usize>(xs: [&[f64]; M], c: &[f64]) -> [f64; M] {
    let n = xs.iter().map(|x| x.len()).fold(c.len(), usize::min);
    let mut acc = [[0.0; LANES]; M];
    let mut out = [0.0; M];
    let blocks = n / LANES;
    for b in 0..blocks {
        let cs = &c[b * LANES..(b + 1) * LANES];
        for (x, a) in xs.iter().zip(acc.iter_mut()) {
            let xs = &x[b * LANES..(b + 1) * LANES];
            for i in 0..LANES {
                a[i] += xs[i] * cs[i];
            }
        }
    }
    for (m, x) in xs.iter().enumerate() {
        let tail: f64 = x[blocks * LANES..n]
            .iter()
            .zip(&c[blocks * LANES..n])
            .map(|(p, q)| p * q)
            .sum();
        out[m] = acc[m].iter().sum::<f64>() + tail;
    }
    out
}
