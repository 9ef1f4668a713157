//! Online bidding in repeated auctions under budget and ROI constraints.
//!
//! The crate is organized around a primal/dual game: a primal [`policies::Policy`]
//! bids against the multiplier-scaled reward of [`auction::scaled_reward`], a
//! [`dual::DualState`] runs projected gradient descent on the multipliers, and
//! [`orchestrator`] wires the two together with a budget guard and an optional
//! exact-ROI switching wrapper. [`oracle`] computes the LP benchmark that
//! regret is measured against.

pub mod auction;
pub mod covers;
pub mod dual;
pub mod env;
pub mod error;
pub mod learners;
pub mod oracle;
pub mod orchestrator;
pub mod policies;
pub mod probe;

pub use auction::{
    chi_psi, guarded_bid, lagrangian, safe_bid, scaled_reward, ConstraintSpec, Multipliers,
    Objective, PaymentRule, RangeTracker, RoundSample, ScaleParams,
};
pub use error::{Error, Result};

/// Seeded generator used for every stochastic component.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Stream index for environment draws.
pub const ENV_STREAM: u64 = 0;
/// Stream index for primal sampling.
pub const PRIMAL_STREAM: u64 = 1;

/// Builds the generator for one stream of a seeded run.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    use rand::SeedableRng;
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
