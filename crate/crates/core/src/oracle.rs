//! Benchmark LP over mixtures of bidding functions, regret metrics and
//! brute-force interval probes.

use serde::{Deserialize, Serialize};

use crate::auction::{Objective, PaymentRule};
use crate::covers::{build_cover, CoverFunction, LipschitzFn, DEFAULT_COVER_CAP};
use crate::env::Atom;
use crate::error::{Error, Result};
use crate::orchestrator::RunTrace;

/// Feasibility tolerance of the LP constraints.
pub const FEAS_TOL: f64 = 1e-12;

/// Largest pruned candidate set `solve_opt` accepts.
pub const MAX_PRUNED_CANDIDATES: usize = 1500;

/// Default cap on `T^2 K` for the interval probe.
pub const DEFAULT_PROBE_CAP: u128 = 20_000_000_000;

/// A map from values to bids.
pub trait BidFunction {
    fn bid(&self, v: f64) -> f64;
}

impl<F: Fn(f64) -> f64> BidFunction for F {
    fn bid(&self, v: f64) -> f64 {
        self(v)
    }
}

impl BidFunction for CoverFunction {
    fn bid(&self, v: f64) -> f64 {
        self.eval(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantBid(pub f64);

impl BidFunction for ConstantBid {
    fn bid(&self, _v: f64) -> f64 {
        self.0
    }
}

/// Piecewise-linear interpolation of `(v, bid)` points, constant beyond the
/// ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub points: Vec<(f64, f64)>,
}

impl ValueTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDistribution("empty value table".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(v, b) in &points {
            crate::error::check_unit("table value", v)?;
            crate::error::check_unit("table bid", b)?;
        }
        Ok(ValueTable { points })
    }
}

impl BidFunction for ValueTable {
    fn bid(&self, v: f64) -> f64 {
        interpolate(&self.points, v)
    }
}

/// Piecewise-linear interpolation through points sorted by `v`.
pub fn interpolate(pts: &[(f64, f64)], v: f64) -> f64 {
    let k = pts.partition_point(|p| p.0 <= v);
    if k == 0 {
        return pts[0].1;
    }
    if k == pts.len() {
        return pts[k - 1].1;
    }
    let (v0, b0) = pts[k - 1];
    let (v1, b1) = pts[k];
    if v1 == v0 {
        return b1;
    }
    b0 + (b1 - b0) * (v - v0) / (v1 - v0)
}

/// Per-round expectations of bidding with a fixed function.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Moments {
    /// `E[v 1{win}]`
    pub value: f64,
    /// `E[p 1{win}]`
    pub payment: f64,
    /// `value - payment`
    pub roi: f64,
    /// Expected objective.
    pub utility: f64,
}

pub fn moments<F: BidFunction + ?Sized>(
    atoms: &[Atom],
    f: &F,
    rule: PaymentRule,
    obj: Objective,
) -> Moments {
    let (mut value, mut payment) = (0.0, 0.0);
    for a in atoms {
        let b = f.bid(a.v);
        if b >= a.d {
            value += a.p * a.v;
            payment += a.p * rule.price(b, a.d);
        }
    }
    let utility = match obj {
        Objective::ValueMax => value,
        Objective::QuasiLinear { nu } => value - nu * payment,
    };
    Moments {
        value,
        payment,
        roi: value - payment,
        utility,
    }
}

/// `(V_f, P_f, ROI_f)` for a finite-support environment.
pub fn expected_value_payment<F: BidFunction + ?Sized>(
    atoms: &[Atom],
    f: &F,
    rule: PaymentRule,
) -> (f64, f64, f64) {
    let m = moments(atoms, f, rule, Objective::ValueMax);
    (m.value, m.payment, m.roi)
}

/// Optimal mixture of candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct OptSolution {
    /// Per-round benchmark value.
    pub value: f64,
    /// `(candidate index, weight)` with at most three entries.
    pub mixture: Vec<(usize, f64)>,
    pub payment: f64,
    pub roi: f64,
    pub budget_binding: bool,
    pub roi_binding: bool,
}

fn feasible(payment: f64, roi: f64, rho: f64) -> bool {
    payment <= rho + FEAS_TOL && roi >= -FEAS_TOL
}

/// Indices of candidates not weakly dominated in (utility, payment, roi);
/// duplicates keep their first occurrence.
pub fn pareto_prune(cands: &[Moments]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        cands[b]
            .utility
            .total_cmp(&cands[a].utility)
            .then(cands[a].payment.total_cmp(&cands[b].payment))
            .then(cands[b].roi.total_cmp(&cands[a].roi))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let c = &cands[i];
        let dominated = kept.iter().any(|&k| {
            let o = &cands[k];
            o.utility >= c.utility && o.payment <= c.payment && o.roi >= c.roi
        });
        if !dominated {
            kept.push(i);
        }
    }
    kept.sort_unstable();
    kept
}

/// Solves `max sum x_f U_f` subject to `sum x_f P_f <= rho`,
/// `sum x_f ROI_f >= 0` over the simplex by enumerating basic supports of
/// size at most three.
pub fn solve_opt(cands: &[Moments], rho: f64) -> Result<OptSolution> {
    if cands.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let idx = pareto_prune(cands);
    if idx.len() > MAX_PRUNED_CANDIDATES {
        return Err(Error::SizeCap {
            size: idx.len() as u128,
            cap: MAX_PRUNED_CANDIDATES as u128,
        });
    }
    let c: Vec<&Moments> = idx.iter().map(|&i| &cands[i]).collect();
    let n = c.len();
    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    let mut offer = |value: f64, mix: Vec<(usize, f64)>| {
        if best.as_ref().is_none_or(|b| value > b.0 + 1e-15) {
            best = Some((value, mix));
        }
    };

    for (i, m) in c.iter().enumerate() {
        if feasible(m.payment, m.roi, rho) {
            offer(m.utility, vec![(i, 1.0)]);
        }
    }

    let mix2 = |i: usize, j: usize, x: f64| {
        let p = x * c[i].payment + (1.0 - x) * c[j].payment;
        let r = x * c[i].roi + (1.0 - x) * c[j].roi;
        let u = x * c[i].utility + (1.0 - x) * c[j].utility;
        (p, r, u)
    };
    for i in 0..n {
        for j in i + 1..n {
            let dp = c[i].payment - c[j].payment;
            let dr = c[i].roi - c[j].roi;
            let mut xs = [f64::NAN; 2];
            if dp != 0.0 {
                xs[0] = (rho - c[j].payment) / dp;
            }
            if dr != 0.0 {
                xs[1] = -c[j].roi / dr;
            }
            for x in xs {
                if !(0.0..=1.0).contains(&x) {
                    continue;
                }
                let (p, r, u) = mix2(i, j, x);
                if feasible(p, r, rho) {
                    offer(u, vec![(i, x), (j, 1.0 - x)]);
                }
            }
        }
    }

    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, d) = (c[i], c[j], c[k]);
                // rows: ones, payments, rois; rhs (1, rho, 0)
                let det = (b.payment * d.roi - d.payment * b.roi)
                    - (a.payment * d.roi - d.payment * a.roi)
                    + (a.payment * b.roi - b.payment * a.roi);
                if det.abs() < 1e-14 {
                    continue;
                }
                let x1 =
                    ((b.payment * d.roi - d.payment * b.roi) - rho * d.roi + rho * b.roi) / det;
                let x2 =
                    (rho * d.roi - (a.payment * d.roi - d.payment * a.roi) - rho * a.roi) / det;
                let x3 = 1.0 - x1 - x2;
                if x1 < -FEAS_TOL || x2 < -FEAS_TOL || x3 < -FEAS_TOL {
                    continue;
                }
                let (x1, x2, x3) = (x1.max(0.0), x2.max(0.0), x3.max(0.0));
                let s = x1 + x2 + x3;
                let (x1, x2, x3) = (x1 / s, x2 / s, x3 / s);
                let p = x1 * a.payment + x2 * b.payment + x3 * d.payment;
                let r = x1 * a.roi + x2 * b.roi + x3 * d.roi;
                if feasible(p, r, rho) {
                    let u = x1 * a.utility + x2 * b.utility + x3 * d.utility;
                    offer(u, vec![(i, x1), (j, x2), (k, x3)]);
                }
            }
        }
    }

    let (value, mix) = best.ok_or(Error::Infeasible)?;
    let mixture: Vec<(usize, f64)> = mix
        .into_iter()
        .filter(|m| m.1 > 0.0)
        .map(|(i, w)| (idx[i], w))
        .collect();
    let payment: f64 = mixture.iter().map(|&(i, w)| w * cands[i].payment).sum();
    let roi: f64 = mixture.iter().map(|&(i, w)| w * cands[i].roi).sum();
    Ok(OptSolution {
        value,
        mixture,
        payment,
        roi,
        budget_binding: (payment - rho).abs() <= 1e-9,
        roi_binding: roi.abs() <= 1e-9,
    })
}

/// Candidate families for the benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSpec {
    ConstantBids {
        bids: Vec<f64>,
    },
    /// Constant bids at every competing-bid atom and at 0 and 1.
    EnvAtoms,
    /// Every function on the value atoms with bids in the competing-bid
    /// atoms plus {0, 1} whose slopes between adjacent value atoms are at
    /// most `lipschitz`.
    LipschitzGrid {
        lipschitz: f64,
    },
    /// All elements of one cover level.
    Cover {
        lipschitz: f64,
        level: u32,
    },
}

/// Largest number of functions `LipschitzGrid` enumerates.
pub const MAX_GRID_FUNCTIONS: usize = 2_000_000;

fn sorted_unique(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Moments of every candidate in the family, with a label per candidate.
pub fn candidate_moments(
    spec: &CandidateSpec,
    atoms: &[Atom],
    rule: PaymentRule,
    obj: Objective,
) -> Result<Vec<(String, Moments)>> {
    let d_levels = || {
        sorted_unique(
            atoms
                .iter()
                .map(|a| a.d)
                .chain([0.0, 1.0])
                .collect::<Vec<_>>(),
        )
    };
    match spec {
        CandidateSpec::ConstantBids { bids } => {
            for &b in bids {
                crate::error::check_unit("bid", b)?;
            }
            Ok(bids
                .iter()
                .map(|&b| {
                    (
                        format!("const({b})"),
                        moments(atoms, &ConstantBid(b), rule, obj),
                    )
                })
                .collect())
        }
        CandidateSpec::EnvAtoms => Ok(d_levels()
            .into_iter()
            .map(|b| {
                (
                    format!("const({b})"),
                    moments(atoms, &ConstantBid(b), rule, obj),
                )
            })
            .collect()),
        CandidateSpec::LipschitzGrid { lipschitz } => {
            let vs = sorted_unique(atoms.iter().map(|a| a.v).collect());
            let levels = d_levels();
            let tables = lipschitz_tables(&vs, &levels, *lipschitz)?;
            Ok(tables
                .into_iter()
                .map(|t| {
                    let label = format!(
                        "table({})",
                        t.points
                            .iter()
                            .map(|p| p.1.to_string())
                            .collect::<Vec<_>>()
                            .join(";")
                    );
                    let m = moments(atoms, &t, rule, obj);
                    (label, m)
                })
                .collect())
        }
        CandidateSpec::Cover { lipschitz, level } => {
            let set = build_cover(*lipschitz, *level, DEFAULT_COVER_CAP)?;
            Ok((0..set.len())
                .map(|k| {
                    let f = set.function(k);
                    (format!("cover{level}#{k}"), moments(atoms, &f, rule, obj))
                })
                .collect())
        }
    }
}

/// Every assignment of `levels` to the sorted points `vs` with
/// `|f(v_i) - f(v_{i+1})| <= L (v_{i+1} - v_i)`.
pub fn lipschitz_tables(vs: &[f64], levels: &[f64], lipschitz: f64) -> Result<Vec<ValueTable>> {
    if vs.is_empty() || levels.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let n = vs.len();
    let tol = 1e-12;
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    let mut depth = 0usize;
    let ok = |cur: &[usize], depth: usize| {
        depth == 0
            || (levels[cur[depth]] - levels[cur[depth - 1]]).abs()
                <= lipschitz * (vs[depth] - vs[depth - 1]) + tol
    };
    // iterative DFS over the level index of each point
    loop {
        if ok(&cur, depth) {
            if depth + 1 == n {
                out.push(ValueTable {
                    points: vs.iter().zip(&cur).map(|(&v, &l)| (v, levels[l])).collect(),
                });
                if out.len() > MAX_GRID_FUNCTIONS {
                    return Err(Error::SizeCap {
                        size: out.len() as u128,
                        cap: MAX_GRID_FUNCTIONS as u128,
                    });
                }
            } else {
                depth += 1;
                cur[depth] = 0;
                continue;
            }
        }
        loop {
            if cur[depth] + 1 < levels.len() {
                cur[depth] += 1;
                break;
            }
            if depth == 0 {
                return Ok(out);
            }
            depth -= 1;
        }
    }
}

/// Worst interval found by a probe, with 1-based inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalProbe {
    pub value: f64,
    pub start: usize,
    pub end: usize,
}

fn check_probe_shape(rewards: &[Vec<f64>], dists: &[Vec<f64>], cap: u128) -> Result<usize> {
    let t = rewards.len();
    if dists.len() != t {
        return Err(Error::InvalidIndex {
            index: dists.len(),
            len: t,
        });
    }
    let k = rewards.first().map_or(0, |r| r.len());
    let size = (t as u128) * (t as u128) * (k as u128);
    if size > cap {
        return Err(Error::SizeCap { size, cap });
    }
    Ok(k)
}

/// Calls `visit(start, end, regret)` for every interval, where regret is the
/// best fixed action's total reward minus the algorithm's expected reward.
pub fn interval_regret_scan<F: FnMut(usize, usize, f64)>(
    rewards: &[Vec<f64>],
    dists: &[Vec<f64>],
    cap: u128,
    mut visit: F,
) -> Result<()> {
    let k = check_probe_shape(rewards, dists, cap)?;
    let t = rewards.len();
    let alg: Vec<f64> = rewards
        .iter()
        .zip(dists)
        .map(|(r, q)| crate::learners::expected_reward(q, r))
        .collect();
    let mut acc = vec![0.0; k];
    for s in 0..t {
        acc.fill(0.0);
        let mut a = 0.0;
        for e in s..t {
            for (x, &r) in acc.iter_mut().zip(&rewards[e]) {
                *x += r;
            }
            a += alg[e];
            let best = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            visit(s + 1, e + 1, best - a);
        }
    }
    Ok(())
}

/// Largest interval regret and where it occurs.
pub fn interval_regret_probe(
    rewards: &[Vec<f64>],
    dists: &[Vec<f64>],
    cap: u128,
) -> Result<IntervalProbe> {
    let mut best = IntervalProbe {
        value: f64::NEG_INFINITY,
        start: 0,
        end: 0,
    };
    interval_regret_scan(rewards, dists, cap, |s, e, v| {
        if v > best.value {
            best = IntervalProbe {
                value: v,
                start: s,
                end: e,
            };
        }
    })?;
    Ok(best)
}

/// Result of checking that a function with ROI margin `beta` yields a
/// mixture with slack `alpha = rho * beta` in both constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaAlpha {
    pub beta: f64,
    pub alpha: f64,
    pub mixture_roi: f64,
    pub mixture_payment: f64,
    pub roi_holds: bool,
    pub budget_holds: bool,
}

pub fn beta_alpha_diagnostic<F: BidFunction + ?Sized>(
    atoms: &[Atom],
    f_beta: &F,
    rule: PaymentRule,
    rho: f64,
) -> BetaAlpha {
    let (_, p_f, beta) = expected_value_payment(atoms, f_beta, rule);
    let (_, p_0, roi_0) = expected_value_payment(atoms, &ConstantBid(0.0), rule);
    let alpha = rho * beta;
    let mixture_roi = rho * beta + (1.0 - rho) * roi_0;
    let mixture_payment = rho * p_f + (1.0 - rho) * p_0;
    BetaAlpha {
        beta,
        alpha,
        mixture_roi,
        mixture_payment,
        roi_holds: mixture_roi >= alpha - 1e-12,
        budget_holds: mixture_payment <= rho - alpha + 1e-12,
    }
}

/// Summary of one run against the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rounds: usize,
    pub cum_objective: f64,
    /// Per-round benchmark.
    pub opt: f64,
    /// `T * OPT - cumulative objective`; may be negative.
    pub regret: f64,
    pub min_roi_slack: f64,
    /// `max(0, -min prefix ROI slack)`
    pub max_roi_violation: f64,
    pub budget: f64,
    pub spent: f64,
    /// Interval maximizing `sum (OPT - u_t)`, 1-based inclusive.
    pub worst_interval: IntervalProbe,
}

pub fn metrics(trace: &RunTrace, opt: f64) -> MetricsReport {
    let rows = &trace.rows;
    let t = rows.len();
    let cum = rows.last().map_or(0.0, |r| r.cum_objective);
    let min_slack = rows
        .iter()
        .map(|r| r.roi_slack)
        .fold(f64::INFINITY, f64::min);
    let spent: f64 = rows.iter().map(|r| r.payment).sum();

    // Kadane over OPT - u_t
    let mut worst = IntervalProbe {
        value: f64::NEG_INFINITY,
        start: 0,
        end: 0,
    };
    let (mut run, mut start) = (0.0, 1);
    for (i, r) in rows.iter().enumerate() {
        let g = opt - r.utility;
        if run <= 0.0 {
            run = g;
            start = i + 1;
        } else {
            run += g;
        }
        if run > worst.value {
            worst = IntervalProbe {
                value: run,
                start,
                end: i + 1,
            };
        }
    }
    if t == 0 {
        worst.value = 0.0;
    }

    MetricsReport {
        rounds: t,
        cum_objective: cum,
        opt,
        regret: t as f64 * opt - cum,
        min_roi_slack: if t == 0 { 0.0 } else { min_slack },
        max_roi_violation: (-min_slack).max(0.0),
        budget: trace.budget,
        spent,
        worst_interval: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvSpec, DEFAULT_RESOLUTION};
    use proptest::prelude::*;

    fn point(v: f64, d: f64) -> Vec<Atom> {
        vec![Atom { v, d, p: 1.0 }]
    }

    #[test]
    fn moment_examples() {
        let fp = PaymentRule::FirstPrice;
        assert_eq!(
            expected_value_payment(&point(1.0, 0.5), &ConstantBid(0.5), fp),
            (1.0, 0.5, 0.5)
        );
        let tb = EnvSpec::tight_beta(0.25)
            .unwrap()
            .atoms_for(1, DEFAULT_RESOLUTION)
            .unwrap();
        let (v, p, _) = expected_value_payment(&tb, &ConstantBid(1.0), fp);
        assert!((v - 0.75).abs() < 1e-15);
        assert_eq!(p, 1.0);
        assert_eq!(
            expected_value_payment(&point(0.7, 0.3), &ConstantBid(0.0), fp),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn opt_examples() {
        let fp = PaymentRule::FirstPrice;
        let vm = Objective::ValueMax;
        let tb = EnvSpec::tight_beta(0.25)
            .unwrap()
            .atoms_for(1, DEFAULT_RESOLUTION)
            .unwrap();
        let c: Vec<Moments> = [0.0, 1.0]
            .iter()
            .map(|&b| moments(&tb, &ConstantBid(b), PaymentRule::SecondPrice, vm))
            .collect();
        let s = solve_opt(&c, 1.0).unwrap();
        assert!((s.value - 0.75).abs() < 1e-12);
        // under first price bidding 1 pays more than it earns, so it mixes with
        // the zero bid, which still wins the d = 0 atom
        let c: Vec<Moments> = [0.0, 1.0]
            .iter()
            .map(|&b| moments(&tb, &ConstantBid(b), fp, vm))
            .collect();
        assert!((solve_opt(&c, 1.0).unwrap().value - 0.5).abs() < 1e-12);

        let pm = point(1.0, 0.5);
        let c: Vec<Moments> = [0.0, 0.5]
            .iter()
            .map(|&b| moments(&pm, &ConstantBid(b), fp, vm))
            .collect();
        let s = solve_opt(&c, 0.25).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12);
        assert!(s.budget_binding);
        assert_eq!(s.mixture.len(), 2);
        assert!(s.mixture.iter().all(|m| (m.1 - 0.5).abs() < 1e-12));
        assert!(matches!(solve_opt(&[], 0.5), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn value_table_interpolates() {
        let t = ValueTable::new(vec![(0.5, 0.5), (0.0, 0.0), (1.0, 0.5)]).unwrap();
        assert_eq!(t.bid(0.25), 0.25);
        assert_eq!(t.bid(0.75), 0.5);
        assert_eq!(t.bid(2.0), 0.5);
    }

    #[test]
    fn lipschitz_tables_respect_slopes() {
        let vs = [0.25, 0.5, 0.75, 1.0];
        let levels = [0.0, 0.25, 0.5, 0.75, 1.0];
        let tabs = lipschitz_tables(&vs, &levels, 1.0).unwrap();
        // every adjacent pair moves by at most one level
        assert!(tabs.iter().all(|t| t
            .points
            .windows(2)
            .all(|w| (w[0].1 - w[1].1).abs() <= 0.25 + 1e-12)));
        let expected: usize = {
            let mut ways = vec![1usize; 5];
            for _ in 1..4 {
                ways = (0..5)
                    .map(|k: usize| ways[k.saturating_sub(1)..=(k + 1).min(4)].iter().sum())
                    .collect();
            }
            ways.iter().sum()
        };
        assert_eq!(tabs.len(), expected);
    }

    #[test]
    fn probe_examples() {
        let r = vec![vec![0.5, 0.5]; 4];
        let d = vec![vec![1.0, 0.0]; 4];
        let p = interval_regret_probe(&r, &d, DEFAULT_PROBE_CAP).unwrap();
        assert!(p.value.abs() < 1e-15);
        let r = vec![vec![0.2, 0.9, 0.4]];
        let d = vec![vec![0.5, 0.25, 0.25]];
        let p = interval_regret_probe(&r, &d, DEFAULT_PROBE_CAP).unwrap();
        assert!((p.value - (0.9 - (0.1 + 0.225 + 0.1))).abs() < 1e-15);
        assert!(interval_regret_probe(&r, &d, 2).is_err());
    }

    #[test]
    fn beta_alpha_examples() {
        let fp = PaymentRule::FirstPrice;
        let ba = beta_alpha_diagnostic(&point(1.0, 0.0), &ConstantBid(0.0), fp, 0.3);
        assert_eq!(ba.beta, 1.0);
        assert!((ba.alpha - 0.3).abs() < 1e-15);
        assert!(ba.roi_holds && ba.budget_holds);

        // a function that never pays leaves slack rho - rho (1 - beta) on the budget
        let atoms = vec![
            Atom {
                v: 0.6,
                d: 0.0,
                p: 0.5,
            },
            Atom {
                v: 0.9,
                d: 0.8,
                p: 0.5,
            },
        ];
        let ba = beta_alpha_diagnostic(&atoms, &ConstantBid(0.0), fp, 0.4);
        assert_eq!(ba.mixture_payment, 0.0);
        assert!(ba.budget_holds);
        assert!((0.4 - 0.4 * (1.0 - ba.beta) - ba.alpha).abs() < 1e-15);
    }

    fn arb_moments() -> impl Strategy<Value = Vec<Moments>> {
        prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 1..7).prop_map(|v| {
            v.into_iter()
                .map(|(value, frac)| {
                    let payment = value * frac * 1.5;
                    let payment = payment.min(1.0);
                    Moments {
                        value,
                        payment,
                        roi: value - payment,
                        utility: value,
                    }
                })
                .chain(std::iter::once(Moments::default()))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn opt_monotone_in_rho_and_candidates(c in arb_moments(), rho in 0.05..0.9f64,
                                              extra in 0.0..0.1f64) {
            let base = solve_opt(&c, rho).unwrap().value;
            let more = solve_opt(&c, rho + extra).unwrap().value;
            prop_assert!(more >= base - 1e-12);
            let sub = solve_opt(&c[..c.len().saturating_sub(1).max(1)], rho);
            if let Ok(s) = sub {
                prop_assert!(base >= s.value - 1e-12);
            }
        }

        #[test]
        fn opt_solution_is_feasible(c in arb_moments(), rho in 0.05..0.9f64) {
            let s = solve_opt(&c, rho).unwrap();
            let w: f64 = s.mixture.iter().map(|m| m.1).sum();
            prop_assert!((w - 1.0).abs() < 1e-9);
            prop_assert!(s.mixture.iter().all(|m| m.1 >= 0.0));
            prop_assert!(s.payment <= rho + 1e-9 && s.roi >= -1e-9);
            prop_assert!(s.mixture.len() <= 3);
        }

        #[test]
        fn probe_nonnegative(t in 1usize..12, k in 1usize..4, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let r: Vec<Vec<f64>> = (0..t).map(|_| (0..k).map(|_| rng.gen()).collect()).collect();
            let d: Vec<Vec<f64>> = (0..t).map(|_| {
                let w: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 1e-3).collect();
                let s: f64 = w.iter().sum();
                w.into_iter().map(|x| x / s).collect()
            }).collect();
            let p = interval_regret_probe(&r, &d, DEFAULT_PROBE_CAP).unwrap();
            prop_assert!(p.value >= -1e-12);
        }
    }
}
