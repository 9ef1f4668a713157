//! Auction primitives: payment rules, the multiplier-scaled reward, the
//! Lagrangian and safe bids.
//!
//! A round is won when the bid is at least the highest competing bid
//! (`b >= d`); ties win.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_positive, check_unit, Error, Result};

/// Absolute tolerance used when comparing rewards.
pub const REWARD_TOL: f64 = 1e-12;

/// Which price the winner pays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PaymentRule {
    FirstPrice,
    SecondPrice,
    /// Pays `q * b + (1 - q) * d`.
    Mixed {
        q: f64,
    },
}

impl PaymentRule {
    pub fn mixed(q: f64) -> Result<Self> {
        check_unit("q", q)?;
        Ok(PaymentRule::Mixed { q })
    }

    /// Weight on the own bid: 1 for first price, 0 for second price.
    pub fn q(&self) -> f64 {
        match *self {
            PaymentRule::FirstPrice => 1.0,
            PaymentRule::SecondPrice => 0.0,
            PaymentRule::Mixed { q } => q,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PaymentRule::Mixed { q } = *self {
            check_unit("q", q)?;
        }
        Ok(())
    }

    /// Price paid on a win, without range checks.
    #[inline]
    pub fn price(&self, b: f64, d: f64) -> f64 {
        match *self {
            PaymentRule::FirstPrice => b,
            PaymentRule::SecondPrice => d,
            PaymentRule::Mixed { q } => q * b + (1.0 - q) * d,
        }
    }

    /// Price paid on a win. Rejects bids or competing bids outside `[0, 1]`.
    pub fn payment(&self, b: f64, d: f64) -> Result<f64> {
        check_unit("b", b)?;
        check_unit("d", d)?;
        Ok(self.price(b, d))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// `u = x * v`
    #[default]
    ValueMax,
    /// `u = x * (v - nu * p)`
    QuasiLinear {
        #[serde(default = "default_nu")]
        nu: f64,
    },
}

fn default_nu() -> f64 {
    1.0
}

impl Objective {
    pub fn quasi_linear(nu: f64) -> Result<Self> {
        check_unit("nu", nu)?;
        Ok(Objective::QuasiLinear { nu })
    }

    pub fn validate(&self) -> Result<()> {
        if let Objective::QuasiLinear { nu } = *self {
            check_unit("nu", nu)?;
        }
        Ok(())
    }

    /// Per-round utility of an outcome.
    #[inline]
    pub fn utility(&self, won: bool, v: f64, price: f64) -> f64 {
        if !won {
            return 0.0;
        }
        match *self {
            Objective::ValueMax => v,
            Objective::QuasiLinear { nu } => v - nu * price,
        }
    }
}

/// One draw of (value, highest competing bid).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSample {
    pub v: f64,
    pub d: f64,
}

impl RoundSample {
    pub fn new(v: f64, d: f64) -> Result<Self> {
        check_unit("v", v)?;
        check_unit("d", d)?;
        Ok(RoundSample { v, d })
    }
}

/// Lagrange multipliers for the budget (`lambda`) and ROI (`mu`) constraints.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda: f64,
    pub mu: f64,
}

impl Multipliers {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        check_nonneg("lambda", lambda)?;
        check_nonneg("mu", mu)?;
        Ok(Multipliers { lambda, mu })
    }
}

/// Scale factors of the primal reward `1{b >= d} (chi v - psi p(b, d))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleParams {
    pub chi: f64,
    pub psi: f64,
}

impl ScaleParams {
    pub fn new(chi: f64, psi: f64) -> Result<Self> {
        check_positive("chi", chi)?;
        check_nonneg("psi", psi)?;
        Ok(ScaleParams { chi, psi })
    }

    /// The unit scale used when maximizing value minus payment.
    pub const UNIT: ScaleParams = ScaleParams { chi: 1.0, psi: 1.0 };

    #[inline]
    pub fn range(&self) -> f64 {
        self.chi.max(self.psi)
    }
}

/// Running maximum of `max(chi, psi)` over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RangeTracker {
    u_cap: f64,
}

impl RangeTracker {
    pub fn new() -> Self {
        RangeTracker { u_cap: 0.0 }
    }

    /// Folds this round's scale into the running range and returns it.
    pub fn observe(&mut self, scale: ScaleParams) -> f64 {
        self.u_cap = self.u_cap.max(scale.range());
        self.u_cap
    }

    pub fn current(&self) -> f64 {
        self.u_cap
    }
}

/// Budget rate and horizon. The ROI ratio is fixed to 1 (values are assumed
/// pre-scaled); `beta` is only used by diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSpec {
    pub rho: f64,
    pub horizon: usize,
    pub beta: Option<f64>,
}

impl ConstraintSpec {
    pub fn new(rho: f64, horizon: usize) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 || rho > 1.0 {
            return Err(Error::OutOfRange {
                name: "rho",
                value: rho,
                range: "(0, 1]",
            });
        }
        Ok(ConstraintSpec {
            rho,
            horizon,
            beta: None,
        })
    }

    pub fn budget(&self) -> f64 {
        self.rho * self.horizon as f64
    }
}

/// `1{b >= d} (chi v - psi p(b, d))`.
#[inline]
pub fn scaled_reward(rule: PaymentRule, scale: ScaleParams, v: f64, b: f64, d: f64) -> f64 {
    if b >= d {
        scale.chi * v - scale.psi * rule.price(b, d)
    } else {
        0.0
    }
}

/// Maps multipliers to reward scales for the given objective.
pub fn chi_psi(obj: Objective, m: Multipliers) -> ScaleParams {
    let chi = 1.0 + m.mu;
    let psi = match obj {
        Objective::ValueMax => m.lambda + m.mu,
        Objective::QuasiLinear { nu } => nu + m.lambda + m.mu,
    };
    ScaleParams { chi, psi }
}

/// A bid that never earns negative reward, computable without `d`.
pub fn safe_bid(rule: PaymentRule, v: f64, chi: f64, psi: f64) -> Result<f64> {
    if !chi.is_finite() {
        return Err(Error::NonFinite {
            name: "chi",
            value: chi,
        });
    }
    if !psi.is_finite() {
        return Err(Error::NonFinite {
            name: "psi",
            value: psi,
        });
    }
    Ok(safe_bid_unchecked(rule, v, ScaleParams { chi, psi }))
}

#[inline]
pub(crate) fn safe_bid_unchecked(rule: PaymentRule, v: f64, scale: ScaleParams) -> f64 {
    match rule {
        PaymentRule::FirstPrice => 0.0,
        PaymentRule::SecondPrice | PaymentRule::Mixed { .. } => {
            if scale.psi <= 0.0 {
                1.0
            } else {
                (scale.chi * v / scale.psi).min(1.0)
            }
        }
    }
}

/// True when some `d` makes the bid's reward negative.
///
/// For every rule in `PaymentRule` the infimum over `d` sits at `d = b`,
/// where the reward is `chi v - psi b`.
#[inline]
pub fn is_risky(scale: ScaleParams, v: f64, b: f64) -> bool {
    scale.psi * b > scale.chi * v
}

/// Returns `candidate` unless it can earn negative reward, in which case the
/// safe bid.
#[inline]
pub fn guarded_bid(rule: PaymentRule, v: f64, scale: ScaleParams, candidate: f64) -> f64 {
    if is_risky(scale, v, candidate) {
        safe_bid_unchecked(rule, v, scale)
    } else {
        candidate
    }
}

/// Per-round Lagrangian `x (chi v - psi p) + lambda rho`.
pub fn lagrangian(
    rule: PaymentRule,
    obj: Objective,
    m: Multipliers,
    rho: f64,
    v: f64,
    b: f64,
    d: f64,
) -> f64 {
    scaled_reward(rule, chi_psi(obj, m), v, b, d) + m.lambda * rho
}
