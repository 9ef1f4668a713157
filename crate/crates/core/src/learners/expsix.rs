use rand::Rng;

use crate::error::{Error, Result};

use super::hedge::clamp_reward;
use super::sample_index;

/// Implicit-exploration loss estimate `loss / (p + xi)` of the played action.
#[inline]
pub fn implicit_loss_estimate(loss: f64, p: f64, xi: f64) -> f64 {
    loss / (p + xi)
}

/// Exponential weights with implicit exploration and uniform mixing for
/// bandit feedback with time-varying loss ranges.
///
/// Each round: [`ExpSix::announce`] the range, [`ExpSix::sample`] an
/// action, then [`ExpSix::observe`] its loss. The weight update for a round
/// is applied at the next announcement, with step `theta / U_next`.
#[derive(Debug, Clone)]
pub struct ExpSix {
    k: usize,
    horizon: usize,
    sigma: f64,
    xi: f64,
    theta: f64,
    log_w: Vec<f64>,
    probs: Vec<f64>,
    u: f64,
    t: usize,
    played: Option<usize>,
    pending: Option<(usize, f64)>,
}

impl ExpSix {
    pub fn new(k: usize, horizon: usize) -> Result<Self> {
        if k == 0 || horizon == 0 {
            return Err(Error::OutOfRange {
                name: "k, horizon",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        let tk = (horizon * k) as f64;
        Ok(ExpSix {
            k,
            horizon,
            sigma: 1.0 / horizon as f64,
            xi: 1.0 / (2.0 * tk.sqrt()),
            theta: 1.0 / tk.sqrt(),
            log_w: vec![0.0; k],
            probs: vec![1.0 / k as f64; k],
            u: 0.0,
            t: 0,
            played: None,
            pending: None,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Rounds announced so far.
    pub fn round(&self) -> usize {
        self.t
    }

    pub fn range(&self) -> f64 {
        self.u
    }

    pub fn distribution(&self) -> &[f64] {
        &self.probs
    }

    /// Starts a round with loss range `[0, u]` and returns its play
    /// distribution.
    pub fn announce(&mut self, u: f64) -> Result<&[f64]> {
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
        if let Some((a, est)) = self.pending.take() {
            let eta = self.theta / self.u;
            self.log_w[a] -= eta * est;
            let m = self.log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = self.log_w.iter().map(|w| (w - m).exp()).sum();
            let log_total = m + z.ln();
            let mix = self.sigma / self.k as f64;
            for (lw, p) in self.log_w.iter_mut().zip(self.probs.iter_mut()) {
                *p = (1.0 - self.sigma) * (*lw - log_total).exp() + mix;
                *lw = p.ln();
            }
        }
        self.t += 1;
        self.played = None;
        Ok(&self.probs)
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let a = sample_index(&self.probs, rng);
        self.played = Some(a);
        a
    }

    /// Records the loss of `action`, which must have been played this round.
    pub fn observe(&mut self, action: usize, loss: f64) -> Result<()> {
        if self.played != Some(action) {
            return Err(Error::UnmatchedUpdate);
        }
        let loss = clamp_reward(loss, self.u)?;
        let est = implicit_loss_estimate(loss, self.probs[action], self.xi);
        self.pending = Some((action, est));
        self.played = None;
        Ok(())
    }
}
