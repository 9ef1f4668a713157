//! Finite covers of L-Lipschitz bidding functions and the parent-linked tree
//! built from them.
//!
//! Level `i >= 1` uses piecewise-constant functions on a value grid of step
//! `2^-i / (2L)` whose values lie on a bid grid of step `2^-i / 2`, with
//! adjacent cells differing by at most one bid step. Every L-Lipschitz `f`
//! with values in `[0, 1]` is dominated by some element `f'` with
//! `f <= f' <= f + 2^-i`. Level 0 is the constant-1 function.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};

/// Default upper bound on the number of elements in one cover level.
pub const DEFAULT_COVER_CAP: usize = 1_000_000;

/// Default depth cap of the tree.
pub const DEFAULT_DEPTH_CAP: u32 = 3;

const SUP_TOL: f64 = 1e-12;

/// A function that can report its supremum on a half-open interval.
pub trait LipschitzFn {
    fn eval(&self, v: f64) -> f64;
    /// Supremum on `[a, b)`, or on `[a, 1]` when `b >= 1`.
    fn sup_on(&self, a: f64, b: f64) -> f64;
}

/// Continuous piecewise-linear function given by its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    /// `xs` must start at 0, end at 1 and be strictly increasing.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidDistribution(
                "piecewise-linear function needs matching breakpoints".into(),
            ));
        }
        if xs[0] != 0.0 || *xs.last().unwrap() != 1.0 || xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(
                "breakpoints must increase from 0 to 1".into(),
            ));
        }
        Ok(PiecewiseLinear { xs, ys })
    }

    pub fn constant(c: f64) -> Self {
        PiecewiseLinear {
            xs: vec![0.0, 1.0],
            ys: vec![c, c],
        }
    }

    /// Infimum on `[a, b]`.
    pub fn inf_on(&self, a: f64, b: f64) -> f64 {
        let b = b.min(1.0);
        let mut lo = self.eval(a).min(self.eval(b));
        for (&x, &y) in self.xs.iter().zip(&self.ys) {
            if x > a && x < b {
                lo = lo.min(y);
            }
        }
        lo
    }

    /// Largest absolute slope over all pieces.
    pub fn lipschitz(&self) -> f64 {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| ((y[1] - y[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max)
    }
}

impl LipschitzFn for PiecewiseLinear {
    fn eval(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, 1.0);
        let k = self
            .xs
            .partition_point(|&x| x <= v)
            .clamp(1, self.xs.len() - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (v - x0) / (x1 - x0)
    }

    fn sup_on(&self, a: f64, b: f64) -> f64 {
        let b = b.min(1.0);
        let mut best = self.eval(a).max(self.eval(b));
        for (&x, &y) in self.xs.iter().zip(&self.ys) {
            if x > a && x < b {
                best = best.max(y);
            }
        }
        best
    }
}

/// Value and bid grids of one cover level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverGrid {
    pub lipschitz: f64,
    pub level: u32,
    pub cells: usize,
    pub bid_steps: u16,
    cell_width: f64,
}

impl CoverGrid {
    pub fn new(lipschitz: f64, level: u32) -> Result<Self> {
        if !lipschitz.is_finite() || lipschitz < 1.0 {
            return Err(Error::OutOfRange {
                name: "lipschitz",
                value: lipschitz,
                range: "[1, inf)",
            });
        }
        if level > 14 {
            return Err(Error::OutOfRange {
                name: "level",
                value: level as f64,
                range: "[0, 14]",
            });
        }
        if level == 0 {
            return Ok(CoverGrid {
                lipschitz,
                level,
                cells: 1,
                bid_steps: 1,
                cell_width: 1.0,
            });
        }
        let scale = (1u32 << level) as f64;
        let cell_width = 1.0 / (2.0 * lipschitz * scale);
        let cells = (2.0 * lipschitz * scale - 1e-9).ceil().max(1.0) as usize;
        Ok(CoverGrid {
            lipschitz,
            level,
            cells,
            bid_steps: 2 << level,
            cell_width,
        })
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    /// Bid grid step.
    pub fn bid_step(&self) -> f64 {
        1.0 / self.bid_steps as f64
    }

    /// Cover accuracy `2^-level`.
    pub fn accuracy(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    #[inline]
    pub fn cell_of(&self, v: f64) -> usize {
        if v <= 0.0 {
            return 0;
        }
        ((v / self.cell_width) as usize).min(self.cells - 1)
    }

    pub fn cell_bounds(&self, j: usize) -> (f64, f64) {
        let a = j as f64 * self.cell_width;
        let b = if j + 1 == self.cells {
            1.0
        } else {
            ((j + 1) as f64 * self.cell_width).min(1.0)
        };
        (a, b)
    }

    #[inline]
    pub fn bid_of(&self, step: u16) -> f64 {
        step as f64 / self.bid_steps as f64
    }

    /// True when `values` is an element of this level's cover.
    pub fn admits(&self, values: &[u16]) -> bool {
        if values.len() != self.cells {
            return false;
        }
        if self.level == 0 {
            return values[0] == 1;
        }
        values.iter().all(|&k| k <= self.bid_steps)
            && values.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1)
    }

    /// Number of cover elements, computed without enumerating them.
    pub fn count(&self) -> u128 {
        if self.level == 0 {
            return 1;
        }
        let n = self.bid_steps as usize + 1;
        let mut ways = vec![1u128; n];
        for _ in 1..self.cells {
            let next: Vec<u128> = (0..n)
                .map(|k| {
                    let lo = k.saturating_sub(1);
                    let hi = (k + 1).min(n - 1);
                    ways[lo..=hi]
                        .iter()
                        .fold(0u128, |acc, &w| acc.saturating_add(w))
                })
                .collect();
            ways = next;
        }
        ways.iter().fold(0u128, |acc, &w| acc.saturating_add(w))
    }

    /// The element obtained by rounding the cell-wise supremum of `f` up to
    /// the bid grid.
    pub fn dominate<F: LipschitzFn + ?Sized>(&self, f: &F) -> CoverFunction {
        if self.level == 0 {
            return CoverFunction {
                grid: *self,
                values: vec![1],
            };
        }
        let n = self.bid_steps as f64;
        let values = (0..self.cells)
            .map(|j| {
                let (a, b) = self.cell_bounds(j);
                let s = f.sup_on(a, b).clamp(0.0, 1.0);
                let k = (s * n - SUP_TOL).ceil().max(0.0);
                k.min(n) as u16
            })
            .collect();
        CoverFunction {
            grid: *self,
            values,
        }
    }
}

/// One element of a cover level.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverFunction {
    pub grid: CoverGrid,
    /// Bid-grid steps, one per value cell.
    pub values: Vec<u16>,
}

impl CoverFunction {
    pub fn level(&self) -> u32 {
        self.grid.level
    }

    pub fn is_admissible(&self) -> bool {
        self.grid.admits(&self.values)
    }

    /// Largest jump between adjacent cells, in bid units.
    pub fn max_jump(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| w[0].abs_diff(w[1]))
            .max()
            .unwrap_or(0) as f64
            * self.grid.bid_step()
    }

    /// Supremum distance to another cover function, possibly of another level.
    pub fn sup_distance(&self, other: &CoverFunction) -> f64 {
        let mut cuts: Vec<f64> = (0..=self.grid.cells)
            .map(|j| self.grid.cell_bounds(j.min(self.grid.cells - 1)).0)
            .chain((0..other.grid.cells).map(|j| other.grid.cell_bounds(j).0))
            .chain(std::iter::once(1.0))
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut best = (self.eval(1.0) - other.eval(1.0)).abs();
        for w in cuts.windows(2) {
            if w[1] > w[0] {
                let m = 0.5 * (w[0] + w[1]);
                best = best.max((self.eval(m) - other.eval(m)).abs());
            }
        }
        best
    }
}

impl LipschitzFn for CoverFunction {
    #[inline]
    fn eval(&self, v: f64) -> f64 {
        self.grid.bid_of(self.values[self.grid.cell_of(v)])
    }

    fn sup_on(&self, a: f64, b: f64) -> f64 {
        let first = self.grid.cell_of(a);
        let mut best = self.grid.bid_of(self.values[first]);
        let mut j = first + 1;
        while j < self.grid.cells {
            let (lo, _) = self.grid.cell_bounds(j);
            if lo >= b {
                break;
            }
            best = best.max(self.grid.bid_of(self.values[j]));
            j += 1;
        }
        if b >= 1.0 {
            best = best.max(self.eval(1.0));
        }
        best
    }
}

/// All elements of one cover level, stored cell-major in one buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverSet {
    pub grid: CoverGrid,
    values: Vec<u16>,
}

impl CoverSet {
    pub fn len(&self) -> usize {
        self.values.len() / self.grid.cells
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn values(&self, idx: usize) -> &[u16] {
        let c = self.grid.cells;
        &self.values[idx * c..(idx + 1) * c]
    }

    pub fn function(&self, idx: usize) -> CoverFunction {
        CoverFunction {
            grid: self.grid,
            values: self.values(idx).to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u16]> + '_ {
        self.values.chunks_exact(self.grid.cells)
    }

    /// Index of the element equal to `values`, if any.
    pub fn position(&self, values: &[u16]) -> Option<usize> {
        self.iter().position(|f| f == values)
    }

    fn permuted(&self, order: &[usize]) -> CoverSet {
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            values.extend_from_slice(self.values(i));
        }
        CoverSet {
            grid: self.grid,
            values,
        }
    }
}

/// Enumerates level `level` of the cover for Lipschitz constant `lipschitz`
/// in lexicographic order.
pub fn build_cover(lipschitz: f64, level: u32, cap: usize) -> Result<CoverSet> {
    let grid = CoverGrid::new(lipschitz, level)?;
    let size = grid.count();
    if size > cap as u128 {
        return Err(Error::Capacity { level, size, cap });
    }
    if level == 0 {
        return Ok(CoverSet {
            grid,
            values: vec![1],
        });
    }
    let cells = grid.cells;
    let top = grid.bid_steps;
    let mut values = Vec::with_capacity(size as usize * cells);
    let mut cur = vec![0u16; cells];
    let mut depth = 0usize;
    loop {
        if depth + 1 < cells {
            depth += 1;
            cur[depth] = cur[depth - 1].saturating_sub(1);
            continue;
        }
        values.extend_from_slice(&cur);
        loop {
            let hi = if depth == 0 {
                top
            } else {
                (cur[depth - 1] + 1).min(top)
            };
            if cur[depth] < hi {
                cur[depth] += 1;
                break;
            }
            if depth == 0 {
                return Ok(CoverSet { grid, values });
            }
            depth -= 1;
        }
    }
}

/// Deepest level `<= max_level` whose cover fits within `cap`.
pub fn deepest_level_within(lipschitz: f64, max_level: u32, cap: usize) -> Result<u32> {
    let mut depth = 0;
    for i in 1..=max_level {
        if CoverGrid::new(lipschitz, i)?.count() > cap as u128 {
            break;
        }
        depth = i;
    }
    Ok(depth)
}

/// Tree depth for horizon `horizon`: `min(floor(log2 sqrt T), depth_cap)`,
/// further limited to levels whose cover fits within `cap`.
pub fn effective_depth(lipschitz: f64, horizon: usize, depth_cap: u32, cap: usize) -> Result<u32> {
    let nominal = ((horizon.max(1) as f64).sqrt().log2().floor().max(0.0)) as u32;
    deepest_level_within(lipschitz, nominal.min(depth_cap), cap)
}

/// Covers `F_0..F_M` linked by parents, with every level ordered so that
/// each node's children and leaves are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverTree {
    levels: Vec<CoverSet>,
    parents: Vec<Vec<u32>>,
    child_offsets: Vec<Vec<u32>>,
    leaf_ranges: Vec<Vec<(u32, u32)>>,
}

impl CoverTree {
    pub fn build(lipschitz: f64, depth: u32, cap: usize) -> Result<Self> {
        let mut levels = Vec::with_capacity(depth as usize + 1);
        for i in 0..=depth {
            levels.push(build_cover(lipschitz, i, cap)?);
        }

        let mut raw_parents: Vec<Vec<u32>> = vec![Vec::new()];
        for i in 1..levels.len() {
            raw_parents.push(assign_parents(&levels[i - 1], &levels[i])?);
        }

        // DFS order: children of each node in their enumeration order
        let mut raw_children: Vec<Vec<Vec<u32>>> = levels
            .iter()
            .map(|set| vec![Vec::new(); set.len()])
            .collect();
        for i in 1..levels.len() {
            for (c, &p) in raw_parents[i].iter().enumerate() {
                raw_children[i - 1][p as usize].push(c as u32);
            }
        }
        let mut order: Vec<Vec<usize>> = vec![vec![0]];
        for i in 1..levels.len() {
            let next = order[i - 1]
                .iter()
                .flat_map(|&p| raw_children[i - 1][p].iter().map(|&c| c as usize))
                .collect();
            order.push(next);
        }
        for (i, ord) in order.iter().enumerate() {
            if ord.len() != levels[i].len() {
                return Err(Error::InvariantViolation(format!(
                    "level {i} has nodes unreachable from the root"
                )));
            }
        }

        let mut new_index: Vec<Vec<u32>> = levels.iter().map(|s| vec![0; s.len()]).collect();
        for (i, ord) in order.iter().enumerate() {
            for (new, &old) in ord.iter().enumerate() {
                new_index[i][old] = new as u32;
            }
        }
        let mut parents: Vec<Vec<u32>> = vec![Vec::new()];
        for i in 1..levels.len() {
            parents.push(
                order[i]
                    .iter()
                    .map(|&old| new_index[i - 1][raw_parents[i][old] as usize])
                    .collect(),
            );
        }
        let levels: Vec<CoverSet> = levels
            .iter()
            .zip(&order)
            .map(|(set, ord)| set.permuted(ord))
            .collect();

        let mut child_offsets = Vec::new();
        for i in 0..levels.len().saturating_sub(1) {
            let mut offs = vec![0u32; levels[i].len() + 1];
            for &p in &parents[i + 1] {
                offs[p as usize + 1] += 1;
            }
            for k in 1..offs.len() {
                offs[k] += offs[k - 1];
            }
            child_offsets.push(offs);
        }

        let m = levels.len() - 1;
        let mut leaf_ranges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); levels.len()];
        leaf_ranges[m] = (0..levels[m].len() as u32).map(|k| (k, k + 1)).collect();
        for i in (0..m).rev() {
            leaf_ranges[i] = (0..levels[i].len())
                .map(|n| {
                    let (c0, c1) = (child_offsets[i][n], child_offsets[i][n + 1]);
                    if c0 == c1 {
                        (0, 0)
                    } else {
                        (
                            leaf_ranges[i + 1][c0 as usize].0,
                            leaf_ranges[i + 1][c1 as usize - 1].1,
                        )
                    }
                })
                .collect();
        }

        Ok(CoverTree {
            levels,
            parents,
            child_offsets,
            leaf_ranges,
        })
    }

    /// Index of the leaf level.
    pub fn depth(&self) -> u32 {
        (self.levels.len() - 1) as u32
    }

    pub fn level(&self, i: u32) -> &CoverSet {
        &self.levels[i as usize]
    }

    pub fn leaves(&self) -> &CoverSet {
        self.levels.last().unwrap()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().len()
    }

    pub fn parent(&self, i: u32, node: usize) -> Option<usize> {
        (i > 0).then(|| self.parents[i as usize][node] as usize)
    }

    /// Children of `node` at level `i`, as indices into level `i + 1`.
    pub fn children(&self, i: u32, node: usize) -> Range<usize> {
        if i >= self.depth() {
            return 0..0;
        }
        let offs = &self.child_offsets[i as usize];
        offs[node] as usize..offs[node + 1] as usize
    }

    /// Leaves under `node` at level `i`, as indices into the leaf level.
    pub fn leaf_range(&self, i: u32, node: usize) -> Range<usize> {
        let (a, b) = self.leaf_ranges[i as usize][node];
        a as usize..b as usize
    }

    /// Goodness parameter `2^(3 - i)` of the learner at level `i`.
    pub fn goodness(i: u32) -> f64 {
        (3.0 - i as f64).exp2()
    }
}

fn assign_parents(coarse: &CoverSet, fine: &CoverSet) -> Result<Vec<u32>> {
    let bound = 2.0 * fine.grid.accuracy() + SUP_TOL;
    let lookup: HashMap<&[u16], u32> = coarse
        .iter()
        .enumerate()
        .map(|(k, f)| (f, k as u32))
        .collect();
    let coarse_fns: Vec<CoverFunction> = (0..coarse.len()).map(|k| coarse.function(k)).collect();
    let mut parents = Vec::with_capacity(fine.len());
    for idx in 0..fine.len() {
        let f = fine.function(idx);
        let candidate = coarse.grid.dominate(&f);
        let direct = lookup
            .get(candidate.values.as_slice())
            .copied()
            .filter(|_| candidate.sup_distance(&f) <= bound);
        let parent = match direct {
            Some(p) => p,
            None => {
                let (p, dist) = coarse_fns
                    .iter()
                    .enumerate()
                    .map(|(k, g)| (k, g.sup_distance(&f)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .ok_or_else(|| Error::InvariantViolation("empty coarse level".into()))?;
                if dist > bound {
                    return Err(Error::InvariantViolation(format!(
                        "no parent within {bound} at level {} (nearest {dist})",
                        fine.grid.level
                    )));
                }
                p as u32
            }
        };
        parents.push(parent);
    }
    Ok(parents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_zero_is_constant_one() {
        let set = build_cover(1.0, 0, DEFAULT_COVER_CAP).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.function(0).eval(0.3), 1.0);
    }

    #[test]
    fn counts_match_enumeration() {
        for (l, i) in [(1.0, 1), (1.0, 2), (2.0, 1), (1.5, 1), (3.0, 0)] {
            let grid = CoverGrid::new(l, i).unwrap();
            let set = build_cover(l, i, DEFAULT_COVER_CAP).unwrap();
            assert_eq!(grid.count(), set.len() as u128, "L={l} i={i}");
            assert!(set.iter().all(|f| grid.admits(f)));
        }
    }

    #[test]
    fn enumeration_is_lexicographic_and_distinct() {
        let set = build_cover(1.0, 2, DEFAULT_COVER_CAP).unwrap();
        let all: Vec<&[u16]> = set.iter().collect();
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn level_two_fits_the_stated_bound() {
        let set = build_cover(1.0, 2, DEFAULT_COVER_CAP).unwrap();
        assert!(set.len() <= 9 * 3usize.pow(7));
    }

    #[test]
    fn deep_level_reports_capacity() {
        let err = build_cover(1.0, 3, DEFAULT_COVER_CAP).unwrap_err();
        assert!(matches!(err, Error::Capacity { level: 3, .. }));
    }

    #[test]
    fn jumps_respect_the_quantized_slope() {
        let set = build_cover(2.0, 1, DEFAULT_COVER_CAP).unwrap();
        let grid = set.grid;
        let limit = 2.0 * grid.cell_width() + grid.bid_step();
        assert!((limit - 0.5).abs() < 1e-15);
        for k in 0..set.len() {
            assert!(set.function(k).max_jump() <= limit + 1e-15);
        }
    }

    #[test]
    fn dominate_examples() {
        let grid = CoverGrid::new(1.0, 2).unwrap();
        let zero = grid.dominate(&PiecewiseLinear::constant(0.0));
        assert!(zero.values.iter().all(|&k| k == 0));
        let one = grid.dominate(&PiecewiseLinear::constant(1.0));
        assert!(one.values.iter().all(|&k| k == grid.bid_steps));

        // identity: cell j = [j/8, (j+1)/8) has sup (j+1)/8, rounded up to the 1/8 grid
        let id = PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let f = grid.dominate(&id);
        let expected: Vec<u16> = (1..=8).collect();
        assert_eq!(f.values, expected);
        for k in 0..=1000 {
            let v = k as f64 / 1000.0;
            assert!(f.eval(v) >= v && f.eval(v) <= v + 0.25 + 1e-12);
        }
    }

    #[test]
    fn tree_examples() {
        let t0 = CoverTree::build(1.0, 0, DEFAULT_COVER_CAP).unwrap();
        assert_eq!(t0.depth(), 0);
        assert_eq!(t0.num_leaves(), 1);

        let t2 = CoverTree::build(1.0, 2, DEFAULT_COVER_CAP).unwrap();
        let leaves = build_cover(1.0, 2, DEFAULT_COVER_CAP).unwrap();
        assert_eq!(t2.num_leaves(), leaves.len());
        assert_eq!(t2.leaf_range(0, 0), 0..leaves.len());
    }

    #[test]
    fn effective_depth_respects_caps() {
        assert_eq!(effective_depth(1.0, 2000, 3, DEFAULT_COVER_CAP).unwrap(), 2);
        assert_eq!(effective_depth(1.0, 3, 3, DEFAULT_COVER_CAP).unwrap(), 0);
        assert_eq!(effective_depth(1.0, 16, 3, DEFAULT_COVER_CAP).unwrap(), 2);
        assert_eq!(
            effective_depth(1.0, 10_000, 1, DEFAULT_COVER_CAP).unwrap(),
            1
        );
    }

    #[test]
    fn piecewise_sup() {
        let f = PiecewiseLinear::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 0.0]).unwrap();
        assert_eq!(f.sup_on(0.25, 0.75), 0.5);
        assert_eq!(f.sup_on(0.0, 0.25), 0.25);
        assert_eq!(f.lipschitz(), 1.0);
    }
}
