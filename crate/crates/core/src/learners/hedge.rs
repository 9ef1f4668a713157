use crate::error::{Error, Result};

use super::FullInfoLearner;

/// Rewards this far outside `[0, U]` are treated as caller bugs.
pub const REWARD_SLACK: f64 = 1e-6;

/// Hedge with step size `sqrt(ln K / (T delta)) / U_t`, where `U_t` is the
/// running maximum of announced reward ranges.
#[derive(Debug, Clone)]
pub struct Hedge {
    k: usize,
    horizon: usize,
    delta: f64,
    log_k: f64,
    cum: Vec<f64>,
    probs: Vec<f64>,
    u: f64,
    t: usize,
    pending: bool,
    /// Unnormalized next distribution staged by `update_with_gains`.
    next: Vec<f64>,
    next_eta: f64,
    reused: usize,
}

/// Steps in a row that may reuse staged weights before an exact softmax.
const EXACT_EVERY: usize = 64;

/// Smallest goodness parameter Hedge accepts for `k` actions over `horizon`
/// rounds.
pub fn delta_floor(k: usize, horizon: usize) -> f64 {
    4.0 * (k as f64).ln() / horizon as f64
}

/// `delta` raised to [`delta_floor`] if needed.
pub fn effective_delta(k: usize, horizon: usize, delta: f64) -> f64 {
    let floor = delta_floor(k, horizon);
    if delta < floor {
        log::warn!("hedge delta {delta} below floor {floor} for K={k}, T={horizon}; clamping");
        floor
    } else {
        delta
    }
}

/// Step size used by Hedge at range `u`.
#[inline]
pub fn hedge_eta(k: usize, horizon: usize, delta: f64, u: f64) -> f64 {
    ((k as f64).ln() / (horizon as f64 * delta)).sqrt() / u
}

/// Checks a reward against `[0, u]`, clamping small overshoots.
#[inline]
pub(crate) fn clamp_reward(r: f64, u: f64) -> Result<f64> {
    if !r.is_finite() || r < -REWARD_SLACK || r > u + REWARD_SLACK {
        return Err(Error::RewardOutOfRange { value: r, range: u });
    }
    Ok(r.clamp(0.0, u))
}

/// Checks a whole reward vector against `[0, u]` in one branch-free pass.
pub(crate) fn check_rewards(rewards: &[f64], u: f64) -> Result<()> {
    let ok = rewards.iter().fold(true, |ok, &r| {
        ok & (r >= -REWARD_SLACK) & (r <= u + REWARD_SLACK)
    });
    if ok {
        return Ok(());
    }
    for &r in rewards {
        clamp_reward(r, u)?;
    }
    Ok(())
}

/// Softmax of `eta * x` written into `out`.
pub(crate) fn softmax_into(x: &[f64], eta: f64, out: &mut [f64]) {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = (eta * (xi - m)).exp();
        z += *o;
    }
    let inv = 1.0 / z;
    out.iter_mut().for_each(|o| *o *= inv);
}

impl Hedge {
    pub fn new(k: usize, horizon: usize, delta: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::OutOfRange {
                name: "k",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if horizon == 0 {
            return Err(Error::OutOfRange {
                name: "horizon",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
                range: "(0, inf)",
            });
        }
        let delta = effective_delta(k, horizon, delta);
        Ok(Hedge {
            k,
            horizon,
            delta,
            log_k: (k as f64).ln(),
            cum: vec![0.0; k],
            probs: vec![1.0 / k as f64; k],
            u: 0.0,
            t: 0,
            pending: false,
            next: Vec::new(),
            next_eta: f64::NAN,
            reused: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Goodness parameter after clamping.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Completed rounds.
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn range(&self) -> f64 {
        self.u
    }

    pub fn cum_rewards(&self) -> &[f64] {
        &self.cum
    }

    /// The distribution emitted by the latest step.
    pub fn distribution(&self) -> &[f64] {
        &self.probs
    }

    pub fn eta(&self) -> f64 {
        (self.log_k / (self.horizon as f64 * self.delta)).sqrt() / self.u
    }

    /// Folds `u` into the range and returns the distribution for this round.
    pub fn step(&mut self, u: f64) -> Result<&[f64]> {
        if !u.is_finite() || u <= 0.0 {
            return Err(Error::OutOfRange {
                name: "u",
                value: u,
                range: "(0, inf)",
            });
        }
        if self.t >= self.horizon {
            return Err(Error::HorizonExhausted {
                horizon: self.horizon,
            });
        }
        self.u = self.u.max(u);
        if self.k > 1 {
            let eta = self.eta();
            let staged = std::mem::replace(&mut self.next_eta, f64::NAN);
            if staged == eta && self.reused < EXACT_EVERY {
                let inv = 1.0 / self.next.iter().sum::<f64>();
                for (p, w) in self.probs.iter_mut().zip(&self.next) {
                    *p = w * inv;
                }
                self.reused += 1;
            } else {
                softmax_into(&self.cum, eta, &mut self.probs);
                self.reused = 0;
            }
        }
        self.pending = true;
        Ok(&self.probs)
    }

    /// Adds this round's rewards, each in `[0, U_t]`.
    pub fn update(&mut self, rewards: &[f64]) -> Result<()> {
        if !self.pending {
            return Err(Error::UnmatchedUpdate);
        }
        if rewards.len() != self.k {
            return Err(Error::InvalidIndex {
                index: rewards.len(),
                len: self.k,
            });
        }
        check_rewards(rewards, self.u)?;
        for (c, &r) in self.cum.iter_mut().zip(rewards) {
            *c += r.max(0.0).min(self.u);
        }
        self.t += 1;
        self.pending = false;
        Ok(())
    }

    /// Like [`Hedge::update`], with `gains[a] = exp(eta() * r_a)` for the
    /// clamped rewards so the next step at the same step size can skip the
    /// exponentials.
    pub fn update_with_gains(&mut self, rewards: &[f64], gains: &[f64]) -> Result<()> {
        if gains.len() != self.k {
            return Err(Error::InvalidIndex {
                index: gains.len(),
                len: self.k,
            });
        }
        self.update(rewards)?;
        if self.k > 1 {
            self.next.resize(self.k, 0.0);
            for ((n, p), g) in self.next.iter_mut().zip(&self.probs).zip(gains) {
                *n = p * g;
            }
            self.next_eta = self.eta();
        }
        Ok(())
    }

    /// Expected reward of the current distribution.
    pub fn expected(&self, rewards: &[f64]) -> f64 {
        self.probs.iter().zip(rewards).map(|(p, r)| p * r).sum()
    }
}

impl FullInfoLearner for Hedge {
    type Ctx = ();

    fn num_actions(&self) -> usize {
        self.k
    }

    fn step(&mut self, _ctx: &(), u: f64) -> Result<&[f64]> {
        Hedge::step(self, u)
    }

    fn update(&mut self, _ctx: &(), rewards: &[f64]) -> Result<()> {
        Hedge::update(self, rewards)
    }
}
