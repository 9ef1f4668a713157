//! Randomized invariant suites shared by the `probe` command and the test
//! suites.

use std::sync::Arc;

use rand::Rng as _;

use crate::auction::{guarded_bid, is_risky, safe_bid, scaled_reward, PaymentRule, ScaleParams};
use crate::covers::{CoverGrid, CoverTree, LipschitzFn, PiecewiseLinear, DEFAULT_COVER_CAP};
use crate::env::{bandit_lb_k, bandit_lb_masses, BanditLbVariant};
use crate::error::Result;
use crate::learners::{expected_reward, FullInfoLearner, Hedge, Meta, RestartGrid};
use crate::oracle::interval_regret_scan;
use crate::policies::{RoundContext, TreeRound};
use crate::{stream_rng, Rng};

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: u64,
    /// First few failures, described.
    pub failures: Vec<String>,
    pub failure_count: u64,
}

const MAX_LISTED: usize = 10;

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport {
            name,
            checks: 0,
            failures: Vec::new(),
            failure_count: 0,
        }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failure_count += 1;
            if self.failures.len() < MAX_LISTED {
                self.failures.push(describe());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failure_count == 0
    }
}

fn random_rule(rng: &mut Rng) -> PaymentRule {
    match rng.gen_range(0..3) {
        0 => PaymentRule::FirstPrice,
        1 => PaymentRule::SecondPrice,
        _ => PaymentRule::Mixed { q: rng.gen() },
    }
}

/// Safe bids never earn negative reward and dominate every risky bid, and
/// the analytic risk test agrees with a search over a `d` grid.
pub fn safe_bid_suite(tuples: usize, d_points: usize, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("safe_bids");
    let mut rng = stream_rng(seed, 7);
    let grid: Vec<f64> = (0..d_points)
        .map(|k| k as f64 / (d_points.max(2) - 1) as f64)
        .collect();
    for _ in 0..tuples {
        let rule = random_rule(&mut rng);
        let v: f64 = rng.gen();
        let chi = 1.0 + 4.0 * rng.gen::<f64>();
        let psi = if rng.gen_bool(0.05) {
            0.0
        } else {
            5.0 * rng.gen::<f64>()
        };
        let b: f64 = rng.gen();
        let scale = ScaleParams { chi, psi };
        let safe = match safe_bid(rule, v, chi, psi) {
            Ok(s) => s,
            Err(e) => {
                rep.check(false, || e.to_string());
                continue;
            }
        };
        let risky = is_risky(scale, v, b);
        let mut neg_somewhere = false;
        let mut ok_safe = true;
        let mut ok_dom = true;
        for &d in grid.iter().chain(std::iter::once(&b)) {
            let rs = scaled_reward(rule, scale, v, safe, d);
            let rb = scaled_reward(rule, scale, v, b, d);
            ok_safe &= rs >= 0.0;
            neg_somewhere |= rb < 0.0;
            if risky {
                ok_dom &= rs >= rb;
            }
        }
        let g = guarded_bid(rule, v, scale, b);
        let describe = |what: &str| {
            format!("{what}: rule={rule:?} v={v} chi={chi} psi={psi} b={b} safe={safe}")
        };
        rep.check(ok_safe, || describe("negative safe reward"));
        rep.check(ok_dom, || describe("safe bid dominated"));
        rep.check(risky == neg_somewhere, || describe("risk test disagrees"));
        rep.check(g == if risky { safe } else { b }, || describe("guard"));
    }
    rep
}

/// Random piecewise-linear function with slopes in `[-L, L]`.
pub fn random_lipschitz(rng: &mut Rng, lipschitz: f64) -> PiecewiseLinear {
    let pieces = rng.gen_range(1..8);
    let mut xs: Vec<f64> = (0..pieces - 1).map(|_| rng.gen()).collect();
    xs.push(0.0);
    xs.push(1.0);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut ys = vec![rng.gen::<f64>()];
    for w in xs.windows(2) {
        let slope = lipschitz * (2.0 * rng.gen::<f64>() - 1.0);
        let y = (ys.last().unwrap() + slope * (w[1] - w[0])).clamp(0.0, 1.0);
        ys.push(y);
    }
    PiecewiseLinear::new(xs, ys).expect("sorted breakpoints")
}

/// The dominating cover element is admissible and sits between `f` and
/// `f + 2^-i` on every value cell.
pub fn cover_domination_suite(functions: usize, max_level: u32, seed: u64) -> SuiteReport {
    let mut rep = SuiteReport::new("cover_domination");
    let mut rng = stream_rng(seed, 8);
    for &l in &[1.0, 2.0, 4.0] {
        for i in 0..=max_level {
            let grid = CoverGrid::new(l, i).expect("valid level");
            for _ in 0..functions {
                let f = random_lipschitz(&mut rng, l);
                let c = grid.dominate(&f);
                rep.check(c.is_admissible(), || format!("L={l} i={i}: not admissible"));
                let acc = grid.accuracy();
                let mut ok = true;
                for j in 0..grid.cells {
                    let (a, b) = grid.cell_bounds(j);
                    let cv = grid.bid_of(c.values[j]);
                    let hi = f.sup_on(a, b);
                    let lo = f.inf_on(a, b);
                    ok &= cv >= hi - 1e-12 && cv <= lo + acc + 1e-12;
                }
                rep.check(ok, || format!("L={l} i={i}: sandwich fails"));
            }
        }
    }
    rep
}

/// Parent distances are within `2^(1-i)` and the leaves below every node at
/// level `i` lie within `2^(3-i)` of each other.
pub fn tree_structure_suite(lipschitz: f64, depth: u32) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("tree_structure");
    let tree = CoverTree::build(lipschitz, depth, DEFAULT_COVER_CAP)?;
    for i in 1..=tree.depth() {
        let (fine, coarse) = (tree.level(i), tree.level(i - 1));
        let bound = 2.0 * fine.grid.accuracy() + 1e-12;
        for n in 0..fine.len() {
            let p = tree.parent(i, n).unwrap();
            let dist = fine.function(n).sup_distance(&coarse.function(p));
            rep.check(dist <= bound, || {
                format!("level {i} node {n}: parent distance {dist} > {bound}")
            });
        }
    }
    let leaves = tree.leaves();
    for i in 0..=tree.depth() {
        let bound = CoverTree::goodness(i) + 1e-12;
        for n in 0..tree.level(i).len() {
            let r = tree.leaf_range(i, n);
            let mut diam = 0.0f64;
            for j in 0..leaves.grid.cells {
                let (lo, hi) = r.clone().fold((u16::MAX, 0u16), |(lo, hi), k| {
                    let x = leaves.values(k)[j];
                    (lo.min(x), hi.max(x))
                });
                if lo <= hi {
                    diam = diam.max(leaves.grid.bid_of(hi - lo));
                }
            }
            rep.check(diam <= bound, || {
                format!("level {i} node {n}: leaf diameter {diam} > {bound}")
            });
        }
    }
    Ok(rep)
}

/// Good bids are within `2^(3-i) U` of every leaf below, over random rounds.
pub fn goodness_suite(lipschitz: f64, depth: u32, rounds: usize, seed: u64) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("goodness");
    let tree = Arc::new(CoverTree::build(lipschitz, depth, DEFAULT_COVER_CAP)?);
    let mut round = TreeRound::new(&tree);
    let mut rng = stream_rng(seed, 9);
    for t in 1..=rounds {
        let rule = random_rule(&mut rng);
        let scale = ScaleParams {
            chi: 1.0 + 2.0 * rng.gen::<f64>(),
            psi: 3.0 * rng.gen::<f64>(),
        };
        let ctx = RoundContext {
            t,
            v: rng.gen(),
            scale,
            u: scale.range(),
            rule,
        };
        round.prepare(&tree, &ctx);
        round.set_rewards(&ctx, rng.gen());
        let res = round.check_goodness(&tree, ctx.u);
        rep.check(res.is_ok(), || format!("round {t}: {res:?}"));
        rep.check(round.rewards().iter().all(|&r| r >= 0.0), || {
            format!("round {t}: negative guarded reward")
        });
    }
    Ok(rep)
}

/// Reward sequence produced by [`adversarial_sequence`].
#[derive(Debug, Clone)]
pub struct Sequence {
    pub ranges: Vec<f64>,
    pub rewards: Vec<Vec<f64>>,
}

/// Styles of reward adversary used by the fuzzers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    Iid,
    /// Rewards the action the learner currently likes least.
    AntiLearner,
    /// The best action switches every few rounds.
    Switching,
    /// Rewards the action with the smallest cumulative reward.
    Leveling,
}

const ADVERSARIES: [Adversary; 4] = [
    Adversary::Iid,
    Adversary::AntiLearner,
    Adversary::Switching,
    Adversary::Leveling,
];

/// Nondecreasing random ranges in `[1, 5]`.
fn ranges(rng: &mut Rng, horizon: usize) -> Vec<f64> {
    let mut u = 1.0 + rng.gen::<f64>();
    (0..horizon)
        .map(|_| {
            if rng.gen_bool(0.05) {
                u = (u + rng.gen::<f64>()).min(5.0);
            }
            u
        })
        .collect()
}

/// One round of adversarial rewards in `[0, u]`, with `good` kept within
/// `delta * u` of the best action when `delta` is given.
#[allow(clippy::too_many_arguments)]
fn adversarial_round(
    rng: &mut Rng,
    style: Adversary,
    t: usize,
    u: f64,
    probs: &[f64],
    cum: &[f64],
    good: usize,
    delta: Option<f64>,
) -> Vec<f64> {
    let k = probs.len();
    let mut r: Vec<f64> = match style {
        Adversary::Iid => (0..k).map(|_| u * rng.gen::<f64>()).collect(),
        Adversary::AntiLearner => {
            let worst = argmin(probs);
            (0..k)
                .map(|a| {
                    if a == worst {
                        u
                    } else {
                        u * 0.2 * rng.gen::<f64>()
                    }
                })
                .collect()
        }
        Adversary::Switching => {
            let block = 1 + (t / 37) % k;
            (0..k)
                .map(|a| {
                    if a == block % k {
                        u
                    } else {
                        u * 0.5 * rng.gen::<f64>()
                    }
                })
                .collect()
        }
        Adversary::Leveling => {
            let lag = argmin(cum);
            (0..k).map(|a| if a == lag { u } else { 0.0 }).collect()
        }
    };
    if let Some(delta) = delta {
        let best = r.iter().copied().fold(0.0, f64::max);
        r[good] = r[good].max(best - delta * u).min(u);
    }
    r
}

fn argmin(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v < x[best] {
            best = i;
        }
    }
    best
}

/// Prefix-regret bound `4 U_tau sqrt(T delta ln K)` for Hedge on
/// adversarial sequences with a delta-good action, checked at every prefix.
pub fn hedge_bound_suite(
    instances: usize,
    horizon: usize,
    k: usize,
    deltas: &[f64],
    seed: u64,
) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("hedge_bound");
    let mut rng = stream_rng(seed, 10);
    for inst in 0..instances {
        let delta = deltas[inst % deltas.len()];
        let style = ADVERSARIES[(inst / deltas.len()) % ADVERSARIES.len()];
        let good = rng.gen_range(0..k);
        let us = ranges(&mut rng, horizon);
        let mut h = Hedge::new(k, horizon, delta)?;
        let mut cum = vec![0.0; k];
        let mut alg = 0.0;
        let mut worst_slack = f64::INFINITY;
        for (t, &u) in us.iter().enumerate() {
            let p = h.step(u)?.to_vec();
            let r = adversarial_round(&mut rng, style, t, u, &p, &cum, good, Some(delta));
            alg += expected_reward(&p, &r);
            for (c, x) in cum.iter_mut().zip(&r) {
                *c += x;
            }
            h.update(&r)?;
            let regret = cum.iter().copied().fold(f64::NEG_INFINITY, f64::max) - alg;
            let bound = 4.0 * u * (horizon as f64 * h.delta() * (k as f64).ln()).sqrt();
            worst_slack = worst_slack.min(bound + 1e-9 - regret);
        }
        rep.check(worst_slack >= 0.0, || {
            format!(
                "instance {inst} ({style:?}, delta {delta}): bound exceeded by {}",
                -worst_slack
            )
        });
    }
    Ok(rep)
}

/// Interval regret of the restart mixture over Hedge learners stays within
/// `4 U sqrt(T ln T) + 4 U sqrt(T ln K)` on every interval.
pub fn interval_bound_suite(
    instances: usize,
    horizon: usize,
    k: usize,
    grid: RestartGrid,
    seed: u64,
) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("interval_bound");
    let mut rng = stream_rng(seed, 11);
    for inst in 0..instances {
        let style = ADVERSARIES[inst % ADVERSARIES.len()];
        let us = ranges(&mut rng, horizon);
        let factory = Box::new(move |_| Hedge::new(k, horizon, 1.0));
        let mut meta = Meta::new(k, horizon, grid, factory)?;
        let mut cum = vec![0.0; k];
        let mut rewards = Vec::with_capacity(horizon);
        let mut dists = Vec::with_capacity(horizon);
        for (t, &u) in us.iter().enumerate() {
            let p = meta.step(&(), u)?.to_vec();
            let r = adversarial_round(&mut rng, style, t, u, &p, &cum, 0, None);
            for (c, x) in cum.iter_mut().zip(&r) {
                *c += x;
            }
            meta.update(&(), &r)?;
            rewards.push(r);
            dists.push(p);
        }
        let t = horizon as f64;
        let mut worst = (f64::INFINITY, 0, 0);
        interval_regret_scan(&rewards, &dists, u128::MAX, |s, e, v| {
            let u = us[e - 1];
            let bound = 4.0 * u * (t * t.ln()).sqrt() + 4.0 * u * (t * (k as f64).ln()).sqrt();
            let slack = bound + 1e-9 - v;
            if slack < worst.0 {
                worst = (slack, s, e);
            }
        })?;
        rep.check(worst.0 >= 0.0, || {
            format!(
                "instance {inst} ({style:?}): interval [{}, {}] exceeds bound by {}",
                worst.1, worst.2, -worst.0
            )
        });
    }
    Ok(rep)
}

/// Lower-bound masses: `P(d = 0) = 3/4`, `P(d = d_0) = 3/44`, total mass 1
/// for every variant.
pub fn masses_suite(horizons: &[usize]) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("lower_bound_masses");
    for &t in horizons {
        let base = bandit_lb_masses(t, BanditLbVariant::Base)?;
        rep.check(base[0] == (0.0, 0.75), || {
            format!("T={t}: P(0) = {:?}", base[0])
        });
        rep.check(base[1].1 == 3.0 / 44.0, || {
            format!("T={t}: P(d_0) = {}", base[1].1)
        });
        let k = bandit_lb_k(t);
        for j in [0, k / 2, k - 1] {
            let m = bandit_lb_masses(t, BanditLbVariant::Perturbed { j })?;
            let total: f64 = m.iter().map(|x| x.1).sum();
            rep.check((total - 1.0).abs() < 1e-12, || {
                format!("T={t} j={j}: mass {total}")
            });
            rep.check(m.iter().all(|x| x.1 >= 0.0), || {
                format!("T={t} j={j}: negative mass")
            });
        }
    }
    Ok(rep)
}

/// Every suite at its default size.
pub fn default_suites(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        safe_bid_suite(10_000, 1_000, seed),
        cover_domination_suite(100, 4, seed),
        tree_structure_suite(1.0, 2)?,
        tree_structure_suite(2.0, 1)?,
        goodness_suite(1.0, 2, 1_000, seed)?,
        hedge_bound_suite(200, 500, 8, &[0.05, 0.2], seed)?,
        interval_bound_suite(10, 300, 5, RestartGrid::Full, seed)?,
        masses_suite(&[64, 1000, 4096])?,
    ])
}
