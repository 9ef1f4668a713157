use std::sync::Arc;

use crate::auction::{is_risky, safe_bid_unchecked};
use crate::covers::{effective_depth, CoverTree};
use crate::error::{Error, Result};
use crate::learners::{expected_reward, FullInfoLearner, Hedge, Meta, RestartGrid};
use crate::Rng;

use super::{check_round, BidDistribution, Feedback, Observation, Policy, RoundContext};

/// Per-round data shared by every tree of a policy: the bid slots, each
/// leaf's guarded slot, every node's good slot and, once `d` is known, the
/// reward of every slot.
///
/// Slots `0..=S` are the leaf bid grid `k / S`; slot `S + 1` is the safe bid.
#[derive(Debug, Clone)]
pub struct TreeRound {
    slots: Vec<f64>,
    risky: Vec<bool>,
    leaf_slot: Vec<u16>,
    good: Vec<Vec<u16>>,
    rewards: Vec<f64>,
}

impl TreeRound {
    pub fn new(tree: &CoverTree) -> Self {
        let steps = tree.leaves().grid.bid_steps as usize;
        let m = tree.depth() as usize;
        TreeRound {
            slots: vec![0.0; steps + 2],
            risky: vec![false; steps + 2],
            leaf_slot: vec![0; tree.num_leaves()],
            good: (0..m)
                .map(|i| vec![0; tree.level(i as u32).len()])
                .collect(),
            rewards: vec![0.0; steps + 2],
        }
    }

    pub fn slots(&self) -> &[f64] {
        &self.slots
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Guarded bid slot of each leaf.
    pub fn leaf_slots(&self) -> &[u16] {
        &self.leaf_slot
    }

    /// Good slot of each node at level `i < depth`.
    pub fn good_slots(&self, i: u32) -> &[u16] {
        &self.good[i as usize]
    }

    /// Computes guarded leaf bids and good bids for value `ctx.v`.
    pub fn prepare(&mut self, tree: &CoverTree, ctx: &RoundContext) {
        let grid = tree.leaves().grid;
        let steps = grid.bid_steps as usize;
        let safe = steps + 1;
        for k in 0..=steps {
            self.slots[k] = grid.bid_of(k as u16);
            self.risky[k] = is_risky(ctx.scale, ctx.v, self.slots[k]);
        }
        self.slots[safe] = safe_bid_unchecked(ctx.rule, ctx.v, ctx.scale);
        self.risky[safe] = false;

        let cell = grid.cell_of(ctx.v);
        let leaves = tree.leaves();
        for (n, slot) in self.leaf_slot.iter_mut().enumerate() {
            let k = leaves.values(n)[cell] as usize;
            *slot = if self.risky[k] { safe as u16 } else { k as u16 };
        }

        let m = tree.depth();
        for i in (0..m).rev() {
            let (lower, upper) = self.good.split_at_mut(i as usize + 1);
            let here = &mut lower[i as usize];
            for (node, g) in here.iter_mut().enumerate() {
                let below: &[u16] = if i + 1 == m {
                    &self.leaf_slot
                } else {
                    &upper[0]
                };
                let mut best = u16::MAX;
                for c in tree.children(i, node) {
                    let s = below[c];
                    if best == u16::MAX || self.slots[s as usize] > self.slots[best as usize] {
                        best = s;
                    }
                }
                *g = if best == u16::MAX { safe as u16 } else { best };
            }
        }
    }

    /// Fills slot rewards once `d` is revealed. Risky slots are never played
    /// and get reward 0.
    pub fn set_rewards(&mut self, ctx: &RoundContext, d: f64) {
        for ((r, &b), &risky) in self.rewards.iter_mut().zip(&self.slots).zip(&self.risky) {
            *r = if risky { 0.0 } else { ctx.reward(b, d) };
        }
    }

    /// Checks `r(g) >= r(b_leaf) - 2^(3-i) U` for every node and leaf below it.
    pub fn check_goodness(&self, tree: &CoverTree, u: f64) -> Result<()> {
        let m = tree.depth();
        let mut below: Vec<f64> = self
            .leaf_slot
            .iter()
            .map(|&s| self.rewards[s as usize])
            .collect();
        for i in (0..m).rev() {
            let slack = CoverTree::goodness(i) * u;
            let mut here = Vec::with_capacity(tree.level(i).len());
            for node in 0..tree.level(i).len() {
                let best = tree
                    .children(i, node)
                    .map(|c| below[c])
                    .fold(f64::NEG_INFINITY, f64::max);
                let g = self.rewards[self.good[i as usize][node] as usize];
                if best.is_finite() && g < best - slack - 1e-12 {
                    return Err(Error::InvariantViolation(format!(
                        "good bid of node {node} at level {i} earns {g}, a leaf earns {best}"
                    )));
                }
                here.push(best);
            }
            below = here;
        }
        Ok(())
    }
}

/// One copy of the tree algorithm: a Hedge at every non-leaf node over its
/// children plus the node's good bid.
#[derive(Debug, Clone)]
pub struct TreeLearner {
    tree: Arc<CoverTree>,
    hedges: Vec<Vec<Hedge>>,
    /// Bid-slot distribution of every non-leaf node, `nodes x slots`.
    q: Vec<Vec<f64>>,
    dist: Vec<f64>,
    child_rewards: Vec<f64>,
    child_gains: Vec<f64>,
    slot_gains: Vec<f64>,
    slots: usize,
}

impl TreeLearner {
    pub fn new(tree: Arc<CoverTree>, horizon: usize) -> Result<Self> {
        let m = tree.depth();
        let slots = tree.leaves().grid.bid_steps as usize + 2;
        let mut hedges = Vec::with_capacity(m as usize);
        let mut q = Vec::with_capacity(m as usize);
        for i in 0..m {
            let n = tree.level(i).len();
            let level = (0..n)
                .map(|node| {
                    let k = tree.children(i, node).len() + 1;
                    Hedge::new(k, horizon, CoverTree::goodness(i))
                })
                .collect::<Result<Vec<_>>>()?;
            hedges.push(level);
            q.push(vec![0.0; n * slots]);
        }
        Ok(TreeLearner {
            tree,
            hedges,
            q,
            dist: vec![0.0; slots],
            child_rewards: Vec::new(),
            child_gains: Vec::new(),
            slot_gains: vec![0.0; slots],
            slots,
        })
    }

    /// Hedge of `node` at level `i`.
    pub fn hedge(&self, i: u32, node: usize) -> &Hedge {
        &self.hedges[i as usize][node]
    }

    /// Bid-slot distribution of `node` at non-leaf level `i`.
    pub fn node_distribution(&self, i: u32, node: usize) -> &[f64] {
        let s = self.slots;
        &self.q[i as usize][node * s..(node + 1) * s]
    }
}

impl FullInfoLearner for TreeLearner {
    type Ctx = TreeRound;

    fn num_actions(&self) -> usize {
        self.slots
    }

    fn step(&mut self, round: &TreeRound, u: f64) -> Result<&[f64]> {
        let m = self.tree.depth();
        let s = self.slots;
        self.dist.fill(0.0);
        if m == 0 {
            self.dist[round.leaf_slot[0] as usize] = 1.0;
            return Ok(&self.dist);
        }
        for i in (0..m).rev() {
            let (lower, upper) = self.q.split_at_mut(i as usize + 1);
            let here = &mut lower[i as usize];
            here.fill(0.0);
            for (node, hedge) in self.hedges[i as usize].iter_mut().enumerate() {
                let p = hedge.step(u)?;
                let qn = &mut here[node * s..(node + 1) * s];
                let children = self.tree.children(i, node);
                for (w, c) in p.iter().zip(children) {
                    if i + 1 == m {
                        qn[round.leaf_slot[c] as usize] += w;
                    } else {
                        let qc = &upper[0][c * s..(c + 1) * s];
                        for (x, &y) in qn.iter_mut().zip(qc) {
                            *x += w * y;
                        }
                    }
                }
                qn[round.good[i as usize][node] as usize] += p[p.len() - 1];
            }
        }
        self.dist.copy_from_slice(&self.q[0][..s]);
        Ok(&self.dist)
    }

    fn update(&mut self, round: &TreeRound, rewards: &[f64]) -> Result<()> {
        let m = self.tree.depth();
        let s = self.slots;
        for i in 0..m {
            for (node, hedge) in self.hedges[i as usize].iter_mut().enumerate() {
                let good = round.good[i as usize][node] as usize;
                if i + 1 == m {
                    // leaf rewards take one value per slot
                    let (eta, u) = (hedge.eta(), hedge.range());
                    for (g, &r) in self.slot_gains.iter_mut().zip(rewards) {
                        *g = (eta * r.max(0.0).min(u)).exp();
                    }
                    self.child_rewards.clear();
                    self.child_gains.clear();
                    for c in self.tree.children(i, node) {
                        let slot = round.leaf_slot[c] as usize;
                        self.child_rewards.push(rewards[slot]);
                        self.child_gains.push(self.slot_gains[slot]);
                    }
                    self.child_rewards.push(rewards[good]);
                    self.child_gains.push(self.slot_gains[good]);
                    hedge.update_with_gains(&self.child_rewards, &self.child_gains)?;
                    continue;
                }
                self.child_rewards.clear();
                for c in self.tree.children(i, node) {
                    let qc = &self.q[i as usize + 1][c * s..(c + 1) * s];
                    self.child_rewards.push(expected_reward(qc, rewards));
                }
                self.child_rewards.push(rewards[good]);
                hedge.update(&self.child_rewards)?;
            }
        }
        Ok(())
    }
}

/// The tree algorithm over a cover of Lipschitz bidding functions, wrapped
/// in the restart mixture.
pub struct TreePolicy {
    tree: Arc<CoverTree>,
    meta: Meta<TreeLearner>,
    round: TreeRound,
    dist: BidDistribution,
    grid: RestartGrid,
    check_goodness: bool,
    acted: Option<usize>,
}

impl TreePolicy {
    /// Builds the cover tree with depth `min(floor(log2 sqrt T), depth_cap)`
    /// limited to levels of at most `cover_cap` functions.
    pub fn new(
        lipschitz: f64,
        horizon: usize,
        depth_cap: u32,
        cover_cap: usize,
        grid: RestartGrid,
    ) -> Result<Self> {
        let depth = effective_depth(lipschitz, horizon, depth_cap, cover_cap)?;
        let tree = CoverTree::build(lipschitz, depth, cover_cap)?;
        Self::with_tree(Arc::new(tree), horizon, grid)
    }

    /// Reuses a prebuilt tree, e.g. across seeds.
    pub fn with_tree(tree: Arc<CoverTree>, horizon: usize, grid: RestartGrid) -> Result<Self> {
        let slots = tree.leaves().grid.bid_steps as usize + 2;
        let shared = Arc::clone(&tree);
        let factory = Box::new(move |_start: usize| TreeLearner::new(Arc::clone(&shared), horizon));
        Ok(TreePolicy {
            round: TreeRound::new(&tree),
            meta: Meta::new(slots, horizon, grid, factory)?,
            tree,
            dist: BidDistribution::default(),
            grid,
            check_goodness: cfg!(debug_assertions),
            acted: None,
        })
    }

    /// Verifies the good-bid property every round.
    pub fn with_goodness_check(mut self, on: bool) -> Self {
        self.check_goodness = on;
        self
    }

    pub fn tree(&self) -> &CoverTree {
        &self.tree
    }

    pub fn round_data(&self) -> &TreeRound {
        &self.round
    }

    pub fn meta(&self) -> &Meta<TreeLearner> {
        &self.meta
    }
}

impl Policy for TreePolicy {
    fn name(&self) -> &'static str {
        "tree"
    }

    fn feedback(&self) -> Feedback {
        Feedback::Full
    }

    fn act(&mut self, ctx: &RoundContext, rng: &mut Rng) -> Result<f64> {
        self.round.prepare(&self.tree, ctx);
        let probs = self.meta.step(&self.round, ctx.u)?;
        self.dist = BidDistribution::from_pairs(
            self.round.slots.iter().copied().zip(probs.iter().copied()),
        )?;
        self.acted = Some(ctx.t);
        Ok(self.dist.sample(rng))
    }

    fn observe(&mut self, ctx: &RoundContext, obs: &Observation) -> Result<()> {
        check_round(&mut self.acted, ctx)?;
        let d = obs.d.ok_or(Error::FeedbackMismatch {
            policy: "full",
            run: "bandit",
        })?;
        self.round.set_rewards(ctx, d);
        if self.check_goodness {
            self.round.check_goodness(&self.tree, ctx.u)?;
        }
        self.meta.update(&self.round, &self.round.rewards)
    }

    fn distribution(&self) -> &BidDistribution {
        &self.dist
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("tree_depth".into(), self.tree.depth().to_string()),
            ("tree_leaves".into(), self.tree.num_leaves().to_string()),
            ("restart_grid".into(), self.grid.name().into()),
            ("goodness_check".into(), self.check_goodness.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::{PaymentRule, ScaleParams};
    use crate::covers::DEFAULT_COVER_CAP;
    use crate::stream_rng;

    fn ctx(t: usize, v: f64, rule: PaymentRule) -> RoundContext {
        RoundContext {
            t,
            v,
            scale: ScaleParams::UNIT,
            u: 1.0,
            rule,
        }
    }

    fn tree(depth: u32) -> Arc<CoverTree> {
        Arc::new(CoverTree::build(1.0, depth, DEFAULT_COVER_CAP).unwrap())
    }

    #[test]
    fn depth_zero_bids_guarded_one() {
        let mut p = TreePolicy::with_tree(tree(0), 10, RestartGrid::Off).unwrap();
        let mut rng = stream_rng(0, 1);
        // v = 0.5, unit scale: bid 1 is risky, first-price safe bid is 0
        let b = p
            .act(&ctx(1, 0.5, PaymentRule::FirstPrice), &mut rng)
            .unwrap();
        assert_eq!(b, 0.0);
        assert_eq!(p.distribution().support(), &[0.0]);
        let b = p
            .act(&ctx(2, 1.0, PaymentRule::FirstPrice), &mut rng)
            .unwrap();
        assert_eq!(b, 1.0);
    }

    #[test]
    fn first_round_is_uniform_over_children_and_good() {
        let t = tree(1);
        let mut l = TreeLearner::new(Arc::clone(&t), 100).unwrap();
        let mut round = TreeRound::new(&t);
        round.prepare(&t, &ctx(1, 0.7, PaymentRule::SecondPrice));
        l.step(&round, 1.0).unwrap();
        let k = t.children(0, 0).len() + 1;
        let p = l.hedge(0, 0).distribution();
        assert_eq!(p.len(), k);
        assert!(p.iter().all(|&x| (x - 1.0 / k as f64).abs() < 1e-15));
    }

    #[test]
    fn support_is_guarded_leaf_bids_and_goodness_holds() {
        let t = tree(2);
        let mut p = TreePolicy::with_tree(Arc::clone(&t), 200, RestartGrid::PowersOfTwo)
            .unwrap()
            .with_goodness_check(true);
        let mut env = stream_rng(3, 0);
        let mut rng = stream_rng(3, 1);
        use rand::Rng as _;
        for s in 1..=200 {
            let c = ctx(s, env.gen(), PaymentRule::mixed(0.5).unwrap());
            let b = p.act(&c, &mut rng).unwrap();
            let leaf_bids: Vec<f64> = p
                .round_data()
                .leaf_slots()
                .iter()
                .map(|&k| p.round_data().slots()[k as usize])
                .collect();
            for &x in p.distribution().support() {
                assert!(leaf_bids.contains(&x));
            }
            let mass: f64 = p.distribution().probs().iter().sum();
            assert!((mass - 1.0).abs() < 1e-12);
            let d: f64 = env.gen();
            let won = b >= d;
            let obs = Observation {
                bid: b,
                won,
                price: if won { c.rule.price(b, d) } else { 0.0 },
                d: Some(d),
            };
            p.observe(&c, &obs).unwrap();
            // guarded bids never earn less than the raw bid, and never less than 0
            assert!(p.round_data().rewards().iter().all(|&r| r >= 0.0));
        }
    }

    #[test]
    fn leaf_credit_under_first_price() {
        let t = tree(1);
        let mut round = TreeRound::new(&t);
        let c = ctx(1, 0.9, PaymentRule::FirstPrice);
        round.prepare(&t, &c);
        round.set_rewards(&c, 0.0);
        for &k in round.leaf_slots() {
            let b = round.slots()[k as usize];
            assert!((round.rewards()[k as usize] - (0.9 - b)).abs() < 1e-15);
        }
        round.set_rewards(&c, 1.0);
        for &k in round.leaf_slots() {
            // only a bid of 1 could win at d = 1, and it is risky at v = 0.9
            assert_eq!(round.rewards()[k as usize], 0.0);
        }
    }

    #[test]
    fn bandit_observation_is_rejected() {
        let mut p = TreePolicy::with_tree(tree(1), 10, RestartGrid::Off).unwrap();
        let mut rng = stream_rng(0, 1);
        let c = ctx(1, 0.5, PaymentRule::FirstPrice);
        let b = p.act(&c, &mut rng).unwrap();
        let obs = Observation {
            bid: b,
            won: false,
            price: 0.0,
            d: None,
        };
        assert!(matches!(
            p.observe(&c, &obs),
            Err(Error::FeedbackMismatch { .. })
        ));
    }
}
