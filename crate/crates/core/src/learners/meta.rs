use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::hedge::{check_rewards, clamp_reward, effective_delta, hedge_eta};
use super::{dot, dots, expected_reward, sample_index, FullInfoLearner, Hedge};

/// Which rounds start a fresh sub-learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartGrid {
    /// Every round.
    Full,
    /// Rounds 1, 2, 4, 8, ...
    #[default]
    PowersOfTwo,
    /// Round 1 only.
    Off,
}

impl RestartGrid {
    /// Start rounds (1-based) within `horizon`.
    pub fn starts(&self, horizon: usize) -> Vec<usize> {
        match self {
            RestartGrid::Full => (1..=horizon).collect(),
            RestartGrid::PowersOfTwo => std::iter::successors(Some(1usize), |s| s.checked_mul(2))
                .take_while(|&s| s <= horizon)
                .collect(),
            RestartGrid::Off => vec![1],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RestartGrid::Full => "full",
            RestartGrid::PowersOfTwo => "powers_of_two",
            RestartGrid::Off => "off",
        }
    }
}

/// Hedge over start rounds that weighs the sub-learners started so far.
#[derive(Debug, Clone)]
pub struct RestartMixer {
    starts: Vec<usize>,
    hedge: Hedge,
    weights: Vec<f64>,
    rewards: Vec<f64>,
    active: usize,
    t: usize,
}

impl RestartMixer {
    pub fn new(grid: RestartGrid, horizon: usize) -> Result<Self> {
        let starts = grid.starts(horizon);
        let hedge = Hedge::new(starts.len().max(1), horizon, 1.0)?;
        let n = starts.len();
        Ok(RestartMixer {
            starts,
            hedge,
            weights: Vec::with_capacity(n),
            rewards: vec![0.0; n],
            active: 0,
            t: 0,
        })
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Number of sub-learners started by the current round.
    pub fn active(&self) -> usize {
        self.active
    }

    /// Current round (1-based) after `begin_round`.
    pub fn round(&self) -> usize {
        self.t
    }

    /// Advances to the next round and returns the normalized weights of the
    /// active starts.
    pub fn begin_round(&mut self, u: f64) -> Result<&[f64]> {
        self.t += 1;
        self.active = self.starts.partition_point(|&s| s <= self.t);
        let p = self.hedge.step(u)?;
        let z: f64 = p[..self.active].iter().sum();
        self.weights.clear();
        self.weights.extend(p[..self.active].iter().map(|w| w / z));
        Ok(&self.weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Credits each active start its own expected reward and every inactive
    /// start the mixture's.
    pub fn end_round(&mut self, active_rewards: &[f64], mixture_reward: f64) -> Result<()> {
        if active_rewards.len() != self.active {
            return Err(Error::InvalidIndex {
                index: active_rewards.len(),
                len: self.active,
            });
        }
        self.rewards[..self.active].copy_from_slice(active_rewards);
        self.rewards[self.active..].fill(mixture_reward);
        self.hedge.update(&self.rewards)
    }

    /// The start-index learner.
    pub fn hedge(&self) -> &Hedge {
        &self.hedge
    }
}

/// Builds a fresh sub-learner for a new start round.
pub type SubFactory<L> = Box<dyn FnMut(usize) -> Result<L> + Send>;

/// Mixture over sub-learners started on a restart grid; its distribution
/// sequence has low regret on every interval of rounds.
pub struct Meta<L: FullInfoLearner> {
    factory: SubFactory<L>,
    subs: Vec<L>,
    sub_dists: Vec<Vec<f64>>,
    sub_rewards: Vec<f64>,
    mixer: RestartMixer,
    dist: Vec<f64>,
    k: usize,
}

impl<L: FullInfoLearner> Meta<L> {
    /// `factory` receives the start round and returns a learner over `k`
    /// actions.
    pub fn new(
        k: usize,
        horizon: usize,
        grid: RestartGrid,
        factory: SubFactory<L>,
    ) -> Result<Self> {
        Ok(Meta {
            factory,
            subs: Vec::new(),
            sub_dists: Vec::new(),
            sub_rewards: Vec::new(),
            mixer: RestartMixer::new(grid, horizon)?,
            dist: vec![0.0; k],
            k,
        })
    }

    pub fn mixer(&self) -> &RestartMixer {
        &self.mixer
    }

    pub fn subs(&self) -> &[L] {
        &self.subs
    }

    /// Distribution emitted by each active sub-learner this round.
    pub fn sub_distributions(&self) -> &[Vec<f64>] {
        &self.sub_dists
    }

    pub fn distribution(&self) -> &[f64] {
        &self.dist
    }
}

impl<L: FullInfoLearner> FullInfoLearner for Meta<L> {
    type Ctx = L::Ctx;

    fn num_actions(&self) -> usize {
        self.k
    }

    fn step(&mut self, ctx: &L::Ctx, u: f64) -> Result<&[f64]> {
        self.mixer.begin_round(u)?;
        let active = self.mixer.active();
        while self.subs.len() < active {
            let start = self.mixer.starts()[self.subs.len()];
            let sub = (self.factory)(start)?;
            if sub.num_actions() != self.k {
                return Err(Error::InvalidIndex {
                    index: sub.num_actions(),
                    len: self.k,
                });
            }
            self.subs.push(sub);
            self.sub_dists.push(vec![0.0; self.k]);
        }
        for (sub, buf) in self.subs.iter_mut().zip(self.sub_dists.iter_mut()) {
            buf.copy_from_slice(sub.step(ctx, u)?);
        }
        self.dist.fill(0.0);
        for (w, q) in self.mixer.weights().iter().zip(&self.sub_dists) {
            for (d, &x) in self.dist.iter_mut().zip(q) {
                *d += w * x;
            }
        }
        Ok(&self.dist)
    }

    fn update(&mut self, ctx: &L::Ctx, rewards: &[f64]) -> Result<()> {
        self.sub_rewards.clear();
        for (sub, q) in self.subs.iter_mut().zip(&self.sub_dists) {
            self.sub_rewards.push(expected_reward(q, rewards));
            sub.update(ctx, rewards)?;
        }
        let mix = expected_reward(&self.dist, rewards);
        self.mixer.end_round(&self.sub_rewards, mix)
    }
}

/// Restart mixture of Hedge learners over one shared action set.
///
/// Equivalent to `Meta<Hedge>` with unit goodness, but every sub-learner is
/// represented by a snapshot of the shared cumulative rewards at its start.
/// Sub-learner `s` weighs action `j` by `shared[j] * factors[s][j]`, so a
/// round costs `K` exponentials plus one pass per active start; the mixed
/// distribution is only formed when asked for.
#[derive(Debug, Clone)]
pub struct IntervalHedge {
    k: usize,
    horizon: usize,
    delta: f64,
    mixer: RestartMixer,
    cum: Vec<f64>,
    cum_lo: f64,
    cum_hi: f64,
    snapshots: Vec<Vec<f64>>,
    snap_hi: Vec<f64>,
    snap_spread: f64,
    factors: Vec<Vec<f64>>,
    factor_eta: f64,
    shared: Vec<f64>,
    shared_eta: f64,
    shared_hi: f64,
    gains: Vec<f64>,
    gains_eta: f64,
    reused: usize,
    eta: f64,
    scratch: Vec<f64>,
    norms: Vec<f64>,
    norms_ready: bool,
    dist: Vec<f64>,
    dist_ready: bool,
    sub_rewards: Vec<f64>,
    factor_limit: f64,
    u: f64,
}

/// Above this exponent range the factored form could overflow.
const FACTOR_LIMIT: f64 = 600.0;

/// Rounds in a row the shared weights may be advanced by multiplication
/// before they are recomputed from the cumulative rewards.
const EXACT_EVERY: usize = 64;

/// Actions per exact exponential when expanding an affine run.
const GAIN_BLOCK: usize = 32;

/// Rewards affine in the action index over `len` consecutive actions: the
/// `m`-th action of the run earns `base + slope * m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineRun {
    pub len: usize,
    pub base: f64,
    pub slope: f64,
}

impl IntervalHedge {
    pub fn new(k: usize, horizon: usize, grid: RestartGrid) -> Result<Self> {
        if k == 0 {
            return Err(Error::OutOfRange {
                name: "k",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        Ok(IntervalHedge {
            k,
            horizon,
            delta: effective_delta(k, horizon, 1.0),
            mixer: RestartMixer::new(grid, horizon)?,
            cum: vec![0.0; k],
            cum_lo: 0.0,
            cum_hi: 0.0,
            snapshots: Vec::new(),
            snap_hi: Vec::new(),
            snap_spread: 0.0,
            factors: Vec::new(),
            factor_eta: f64::NAN,
            shared: vec![1.0; k],
            shared_eta: f64::NAN,
            shared_hi: 0.0,
            gains: vec![1.0; k],
            gains_eta: f64::NAN,
            reused: 0,
            eta: f64::NAN,
            scratch: vec![0.0; k],
            norms: Vec::new(),
            norms_ready: false,
            dist: vec![0.0; k],
            dist_ready: false,
            sub_rewards: Vec::new(),
            factor_limit: FACTOR_LIMIT,
            u: 0.0,
        })
    }

    pub fn mixer(&self) -> &RestartMixer {
        &self.mixer
    }

    #[cfg(test)]
    fn with_factor_limit(mut self, limit: f64) -> Self {
        self.factor_limit = limit;
        self
    }

    /// Distribution as of the last [`IntervalHedge::compute_distribution`].
    pub fn distribution(&self) -> &[f64] {
        &self.dist
    }

    pub fn cum_rewards(&self) -> &[f64] {
        &self.cum
    }

    /// Rounds processed so far.
    pub fn round(&self) -> usize {
        self.mixer.hedge().round()
    }

    /// Starts a round without forming the mixed distribution.
    pub fn begin(&mut self, u: f64) -> Result<()> {
        self.mixer.begin_round(u)?;
        self.u = self.u.max(u);
        let active = self.mixer.active();
        while self.snapshots.len() < active {
            self.snapshots.push(self.cum.clone());
            self.snap_hi.push(self.cum_hi);
            self.snap_spread = self.snap_spread.max(self.cum_hi - self.cum_lo);
            self.factors.push(vec![1.0; self.k]);
            self.factor_eta = f64::NAN;
        }
        self.norms.resize(active, 1.0);
        self.dist_ready = false;
        self.norms_ready = self.k == 1;
        if self.k == 1 {
            return Ok(());
        }

        let eta = hedge_eta(self.k, self.horizon, self.delta, self.u);
        self.eta = eta;
        let gains_eta = std::mem::replace(&mut self.gains_eta, f64::NAN);
        let spread = (self.cum_hi - self.cum_lo).max(self.snap_spread);
        if eta * spread > self.factor_limit {
            // per-start softmax of the rewards since the start
            self.shared.fill(1.0);
            for ((snap, fac), z) in self
                .snapshots
                .iter()
                .zip(&mut self.factors)
                .zip(&mut self.norms)
            {
                let m = self
                    .cum
                    .iter()
                    .zip(snap)
                    .map(|(c, p)| c - p)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for ((f, &c), &p) in fac.iter_mut().zip(&self.cum).zip(snap) {
                    *f = (eta * (c - p - m)).exp();
                    sum += *f;
                }
                *z = sum;
            }
            self.factor_eta = f64::NAN;
            self.shared_eta = f64::NAN;
            self.norms_ready = true;
            return Ok(());
        }

        if self.factor_eta != eta {
            for ((snap, fac), &hi) in self
                .snapshots
                .iter()
                .zip(&mut self.factors)
                .zip(&self.snap_hi)
            {
                for (f, &c) in fac.iter_mut().zip(snap) {
                    *f = (eta * (hi - c)).exp();
                }
            }
            self.factor_eta = eta;
        }
        let hi = self.cum_hi;
        if gains_eta == eta && self.shared_eta == eta && self.reused < EXACT_EVERY {
            let shift = (-eta * (hi - self.shared_hi)).exp();
            for (e, g) in self.shared.iter_mut().zip(&self.gains) {
                *e *= g * shift;
            }
            self.reused += 1;
        } else {
            for (e, &c) in self.shared.iter_mut().zip(&self.cum) {
                *e = (eta * (c - hi)).exp();
            }
            self.reused = 0;
        }
        self.shared_eta = eta;
        self.shared_hi = hi;
        Ok(())
    }

    fn ensure_norms(&mut self) {
        if !self.norms_ready {
            for (z, fac) in self.norms.iter_mut().zip(&self.factors) {
                *z = dot(&self.shared, fac);
            }
            self.norms_ready = true;
        }
    }

    /// Forms the mixed distribution of the round started by `begin`.
    pub fn compute_distribution(&mut self) -> &[f64] {
        if self.dist_ready {
            return &self.dist;
        }
        if self.k == 1 {
            self.dist[0] = 1.0;
        } else {
            self.ensure_norms();
            self.dist.fill(0.0);
            for ((w, z), fac) in self
                .mixer
                .weights()
                .iter()
                .zip(&self.norms)
                .zip(&self.factors)
            {
                let c = w / z;
                for (d, f) in self.dist.iter_mut().zip(fac) {
                    *d += c * f;
                }
            }
            for (d, e) in self.dist.iter_mut().zip(&self.shared) {
                *d *= e;
            }
        }
        self.dist_ready = true;
        &self.dist
    }

    /// Draws from the mixed distribution of the round started by `begin`:
    /// a start by its mixture weight, then an action by that start's weights.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.k == 1 {
            return 0;
        }
        let s = sample_index(self.mixer.weights(), rng);
        let fac = &self.factors[s];
        let z = if self.norms_ready {
            self.norms[s]
        } else {
            dot(&self.shared, fac)
        };
        let target = rng.gen::<f64>() * z;
        let mut acc = 0.0;
        let mut last = 0;
        for (j, (e, f)) in self.shared.iter().zip(fac).enumerate() {
            let w = e * f;
            if w > 0.0 {
                acc += w;
                last = j;
                if target < acc {
                    return j;
                }
            }
        }
        last
    }

    /// The mixed distribution of the round started by `begin`, without
    /// caching it.
    pub fn mixed_distribution(&self) -> Vec<f64> {
        if self.dist_ready {
            return self.dist.clone();
        }
        let mut dist = vec![0.0; self.k];
        if self.k == 1 {
            dist[0] = 1.0;
            return dist;
        }
        for (s, (w, fac)) in self.mixer.weights().iter().zip(&self.factors).enumerate() {
            let z = if self.norms_ready {
                self.norms[s]
            } else {
                dot(&self.shared, fac)
            };
            let c = w / z;
            for (d, f) in dist.iter_mut().zip(fac) {
                *d += c * f;
            }
        }
        for (d, e) in dist.iter_mut().zip(&self.shared) {
            *d *= e;
        }
        dist
    }
}

impl FullInfoLearner for IntervalHedge {
    type Ctx = ();

    fn num_actions(&self) -> usize {
        self.k
    }

    fn step(&mut self, _ctx: &(), u: f64) -> Result<&[f64]> {
        self.begin(u)?;
        Ok(self.compute_distribution())
    }

    fn update(&mut self, _ctx: &(), rewards: &[f64]) -> Result<()> {
        self.apply(rewards)
    }
}

impl IntervalHedge {
    /// Like `update`, with `runs` describing `rewards` up to rounding so the
    /// next round can advance the shared weights without exponentials.
    pub fn update_affine(&mut self, rewards: &[f64], runs: &[AffineRun]) -> Result<()> {
        let total: usize = runs.iter().map(|r| r.len).sum();
        if total != self.k || rewards.len() != self.k {
            return Err(Error::InvalidIndex {
                index: total.min(rewards.len()),
                len: self.k,
            });
        }
        let u = self.u;
        let in_range = rewards
            .iter()
            .fold(true, |ok, &r| ok & (r >= 0.0) & (r <= u));
        let with_gains = self.k > 1 && self.shared_eta.is_finite() && in_range;
        if with_gains {
            let eta = self.eta;
            let mut at = 0;
            for run in runs {
                let step = (eta * run.slope).exp();
                for (b, block) in self.gains[at..at + run.len]
                    .chunks_mut(GAIN_BLOCK)
                    .enumerate()
                {
                    let mut g = (eta * (run.base + run.slope * (b * GAIN_BLOCK) as f64)).exp();
                    for x in block {
                        *x = g;
                        g *= step;
                    }
                }
                at += run.len;
            }
        }
        self.apply(rewards)?;
        if with_gains {
            self.gains_eta = self.eta;
        }
        Ok(())
    }

    fn apply(&mut self, rewards: &[f64]) -> Result<()> {
        if rewards.len() != self.k {
            return Err(Error::InvalidIndex {
                index: rewards.len(),
                len: self.k,
            });
        }
        let active = self.mixer.active();
        self.sub_rewards.clear();
        if self.k == 1 {
            let r = clamp_reward(rewards[0], self.u)?;
            self.sub_rewards.resize(active, r);
            self.cum[0] += r;
            self.cum_lo = self.cum[0];
            self.cum_hi = self.cum[0];
            return self.mixer.end_round(&self.sub_rewards, r);
        }
        check_rewards(rewards, self.u)?;
        for ((s, e), &r) in self.scratch.iter_mut().zip(&self.shared).zip(rewards) {
            *s = e * r.max(0.0).min(self.u);
        }
        for (s, fac) in self.factors[..active].iter().enumerate() {
            let num = if self.norms_ready {
                dot(&self.scratch, fac)
            } else {
                let [z, num] = dots([&self.shared, &self.scratch], fac);
                self.norms[s] = z;
                num
            };
            self.sub_rewards.push(num / self.norms[s]);
        }
        self.norms_ready = true;
        let mix = dot(self.mixer.weights(), &self.sub_rewards);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (c, &r) in self.cum.iter_mut().zip(rewards) {
            *c += r.max(0.0).min(self.u);
            lo = if *c < lo { *c } else { lo };
            hi = if *c > hi { *c } else { hi };
        }
        self.cum_lo = lo;
        self.cum_hi = hi;
        self.mixer.end_round(&self.sub_rewards, mix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn hedge_meta(k: usize, horizon: usize, grid: RestartGrid) -> Meta<Hedge> {
        Meta::new(
            k,
            horizon,
            grid,
            Box::new(move |_| Hedge::new(k, horizon, 1.0)),
        )
        .unwrap()
    }

    #[test]
    fn restart_grids() {
        assert_eq!(RestartGrid::Full.starts(4), vec![1, 2, 3, 4]);
        assert_eq!(RestartGrid::PowersOfTwo.starts(10), vec![1, 2, 4, 8]);
        assert_eq!(RestartGrid::Off.starts(10), vec![1]);
    }

    #[test]
    fn first_round_is_the_first_sub() {
        let mut m = hedge_meta(3, 10, RestartGrid::Full);
        let q = m.step(&(), 1.0).unwrap().to_vec();
        assert_eq!(m.mixer().active(), 1);
        assert_eq!(q, m.sub_distributions()[0]);
    }

    #[test]
    fn single_active_start_gets_uniform_credit() {
        let mut m = hedge_meta(3, 10, RestartGrid::Full);
        m.step(&(), 1.0).unwrap();
        m.update(&(), &[0.2, 0.5, 0.9]).unwrap();
        let r = m.mixer().hedge().cum_rewards();
        assert!(r.iter().all(|&x| (x - r[0]).abs() < 1e-15));
    }

    #[test]
    fn credits_differ_by_expected_reward_gap() {
        let mut m = hedge_meta(2, 10, RestartGrid::Full);
        m.step(&(), 1.0).unwrap();
        m.update(&(), &[1.0, 0.0]).unwrap();
        let before = m.mixer().hedge().cum_rewards().to_vec();
        m.step(&(), 1.0).unwrap();
        let q1 = m.sub_distributions()[0].clone();
        let q2 = m.sub_distributions()[1].clone();
        let r = [0.3, 0.8];
        m.update(&(), &r).unwrap();
        let after = m.mixer().hedge().cum_rewards();
        let c1 = after[0] - before[0];
        let c2 = after[1] - before[1];
        let gap: f64 = (0..2).map(|a| (q1[a] - q2[a]) * r[a]).sum();
        assert!((c1 - c2 - gap).abs() < 1e-15);
    }

    #[test]
    fn off_grid_reduces_to_the_sub_learner() {
        let mut m = hedge_meta(4, 50, RestartGrid::Off);
        let mut h = Hedge::new(4, 50, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = m.step(&(), 1.0).unwrap().to_vec();
            let p = h.step(1.0).unwrap().to_vec();
            assert_eq!(q, p);
            let r: Vec<f64> = (0..4).map(|_| rng.gen()).collect();
            m.update(&(), &r).unwrap();
            h.update(&r).unwrap();
        }
    }

    #[test]
    fn interval_hedge_matches_meta() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for grid in [RestartGrid::Full, RestartGrid::PowersOfTwo] {
            let (k, horizon) = (6, 120);
            let mut m = hedge_meta(k, horizon, grid);
            let mut fast = IntervalHedge::new(k, horizon, grid).unwrap();
            let mut u = 1.0f64;
            for _ in 0..horizon {
                u = u.max(rng.gen_range(1.0..4.0));
                let q = m.step(&(), u).unwrap().to_vec();
                let f = fast.step(&(), u).unwrap().to_vec();
                for (a, b) in q.iter().zip(&f) {
                    assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                }
                let r: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..u)).collect();
                m.update(&(), &r).unwrap();
                fast.update(&(), &r).unwrap();
            }
        }
    }

    #[test]
    fn affine_updates_track_exact_updates() {
        let (k, horizon) = (40, 400);
        let mut exact = IntervalHedge::new(k, horizon, RestartGrid::PowersOfTwo).unwrap();
        let mut fast = IntervalHedge::new(k, horizon, RestartGrid::PowersOfTwo).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut u = 1.0;
        for t in 0..horizon {
            if t % 97 == 0 {
                u += 0.5;
            }
            let p = exact.step(&(), u).unwrap().to_vec();
            let q = fast.step(&(), u).unwrap().to_vec();
            for (a, b) in p.iter().zip(&q) {
                assert!((a - b).abs() < 1e-10, "round {t}: {a} vs {b}");
            }
            let cut = rng.gen_range(0..k);
            let base: f64 = rng.gen_range(0.5..1.0);
            let slope = -base / k as f64;
            let runs = [
                AffineRun {
                    len: cut,
                    base: 0.0,
                    slope: 0.0,
                },
                AffineRun {
                    len: k - cut,
                    base,
                    slope,
                },
            ];
            let r: Vec<f64> = (0..k)
                .map(|j| {
                    if j < cut {
                        0.0
                    } else {
                        base + slope * (j - cut) as f64
                    }
                })
                .collect();
            exact.update(&(), &r).unwrap();
            fast.update_affine(&r, &runs).unwrap();
        }
        assert!(fast
            .update_affine(
                &[0.0; 40],
                &[AffineRun {
                    len: 3,
                    base: 0.0,
                    slope: 0.0
                }]
            )
            .is_err());
    }

    #[test]
    fn interval_hedge_direct_path_matches_meta() {
        let (k, horizon) = (3, 40);
        let mut m = hedge_meta(k, horizon, RestartGrid::Full);
        let mut fast = IntervalHedge::new(k, horizon, RestartGrid::Full)
            .unwrap()
            .with_factor_limit(0.5);
        for t in 0..horizon {
            let u = 1.0 + t as f64;
            let q = m.step(&(), 1.0).unwrap().to_vec();
            let f = fast.step(&(), 1.0).unwrap().to_vec();
            for (a, b) in q.iter().zip(&f) {
                assert!((a - b).abs() < 1e-12);
            }
            let r = [1.0, 0.0, (u / 40.0).min(1.0)];
            m.update(&(), &r).unwrap();
            fast.update(&(), &r).unwrap();
        }
    }

    #[test]
    fn two_stage_sampling_follows_the_mixture() {
        let (k, horizon) = (5, 64);
        let mut h = IntervalHedge::new(k, horizon, RestartGrid::PowersOfTwo).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for t in 0..40 {
            h.begin(1.0).unwrap();
            let r: Vec<f64> = (0..k)
                .map(|j| {
                    if (j + t) % 3 == 0 {
                        1.0
                    } else {
                        rng.gen_range(0.0..0.5)
                    }
                })
                .collect();
            h.update(&(), &r).unwrap();
        }
        h.begin(1.0).unwrap();
        let lazy = h.mixed_distribution();
        let n = 200_000;
        let mut counts = vec![0usize; k];
        for _ in 0..n {
            counts[h.sample(&mut rng)] += 1;
        }
        let full = h.compute_distribution().to_vec();
        for j in 0..k {
            assert!((lazy[j] - full[j]).abs() < 1e-14);
            let sd = (full[j] * (1.0 - full[j]) / n as f64).sqrt();
            assert!((counts[j] as f64 / n as f64 - full[j]).abs() < 5.0 * sd + 1e-9);
        }
    }
}
