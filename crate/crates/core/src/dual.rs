//! Projected online gradient descent on the budget and ROI multipliers.

use serde::{Deserialize, Serialize};

use crate::auction::Multipliers;
use crate::error::{check_positive, Error, Result};

/// Whether the gradient uses the realized outcome or its expectation under
/// the primal's bid distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualGradient {
    #[default]
    Realized,
    /// Requires full information.
    Expected,
}

/// Outcome used for one dual step: win indicator (or win probability),
/// payment and value gained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualFeedback {
    /// `x_t * p_t`
    pub spend: f64,
    /// `x_t * v_t`
    pub value: f64,
}

impl DualFeedback {
    pub fn realized(won: bool, price: f64, v: f64) -> Self {
        if won {
            DualFeedback {
                spend: price,
                value: v,
            }
        } else {
            DualFeedback {
                spend: 0.0,
                value: 0.0,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    m: Multipliers,
    eta: f64,
    cap: f64,
    rho: f64,
}

/// Default dual step size `1 / sqrt(T)`.
pub fn default_dual_step(horizon: usize) -> f64 {
    1.0 / (horizon.max(1) as f64).sqrt()
}

impl DualState {
    /// `cap` bounds both multipliers; pass `f64::INFINITY` for no bound.
    pub fn new(rho: f64, eta: f64, cap: f64) -> Result<Self> {
        check_positive("eta", eta)?;
        if cap.is_nan() || cap < 0.0 {
            return Err(Error::OutOfRange {
                name: "cap",
                value: cap,
                range: "[0, inf]",
            });
        }
        Ok(DualState {
            m: Multipliers::default(),
            eta,
            cap,
            rho,
        })
    }

    pub fn step_size(&self) -> f64 {
        self.eta
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// Multipliers for the current round.
    pub fn multipliers(&self) -> Multipliers {
        self.m
    }

    /// Descends the Lagrangian's gradient in `(lambda, mu)` and projects
    /// onto `[0, cap]`.
    pub fn update(&mut self, fb: DualFeedback) {
        let g_lambda = self.rho - fb.spend;
        let g_mu = fb.value - fb.spend;
        self.m.lambda = (self.m.lambda - self.eta * g_lambda).clamp(0.0, self.cap);
        self.m.mu = (self.m.mu - self.eta * g_mu).clamp(0.0, self.cap);
    }

    pub fn update_realized(&mut self, won: bool, price: f64, v: f64) {
        self.update(DualFeedback::realized(won, price, v));
    }
}
