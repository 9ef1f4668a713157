use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::oracle::{interpolate, BidFunction, ValueTable};
use crate::Rng;

use super::{BidDistribution, Feedback, Observation, Policy, RoundContext};

/// A fixed map from values to bids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixedBid {
    Constant {
        bid: f64,
    },
    /// Bids `min(1, factor * v)`.
    Linear {
        factor: f64,
    },
    /// Linear interpolation of `(v, bid)` points.
    Table {
        points: Vec<(f64, f64)>,
    },
}

impl FixedBid {
    pub fn validate(&self) -> Result<()> {
        match self {
            FixedBid::Constant { bid } => check_unit("bid", *bid).map(|_| ()),
            FixedBid::Linear { factor } => {
                if !factor.is_finite() || *factor < 0.0 {
                    return Err(Error::OutOfRange {
                        name: "factor",
                        value: *factor,
                        range: "[0, inf)",
                    });
                }
                Ok(())
            }
            FixedBid::Table { points } => ValueTable::new(points.clone()).map(|_| ()),
        }
    }
}

impl BidFunction for FixedBid {
    fn bid(&self, v: f64) -> f64 {
        match self {
            FixedBid::Constant { bid } => *bid,
            FixedBid::Linear { factor } => (factor * v).min(1.0),
            FixedBid::Table { points } => interpolate(points, v),
        }
    }
}

/// Bids `f(v)` every round without learning.
pub struct FixedPolicy {
    f: FixedBid,
    dist: BidDistribution,
}

impl FixedPolicy {
    pub fn new(f: FixedBid) -> Result<Self> {
        let f = match f {
            FixedBid::Table { points } => FixedBid::Table {
                points: ValueTable::new(points)?.points,
            },
            other => other,
        };
        f.validate()?;
        Ok(FixedPolicy {
            f,
            dist: BidDistribution::default(),
        })
    }

    pub fn function(&self) -> &FixedBid {
        &self.f
    }
}

impl Policy for FixedPolicy {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn feedback(&self) -> Feedback {
        Feedback::Bandit
    }

    fn act(&mut self, ctx: &RoundContext, _rng: &mut Rng) -> Result<f64> {
        let b = self.f.bid(ctx.v);
        self.dist = BidDistribution::point(b);
        Ok(b)
    }

    fn observe(&mut self, _ctx: &RoundContext, _obs: &Observation) -> Result<()> {
        Ok(())
    }

    fn distribution(&self) -> &BidDistribution {
        &self.dist
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![("function".into(), format!("{:?}", self.f))]
    }
}
