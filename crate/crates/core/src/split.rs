//! Greedy dyadic splitting learners.
//!
//! All three learners share one loop: keep a tree of dyadic rectangles, score
//! every leaf with a constant fit `a_R` and an error `e_R`, and for `L`
//! rounds split the `⌈(1+ξ)k⌉` worst leaves into their `2^d` children. They
//! differ only in the scorer: D-distance fits for ℓ1, flattening and squared
//! error for ℓ2.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::ddist::SparseDyadicTree;
use crate::empirical::EmpiricalDist;
use crate::error::{bail, Result};
use crate::geometry::{DyadicRect, GridSpec};
use crate::histogram::{renormalize, HistKind, Histogram, Piece};

/// Tuning of a greedy splitting run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams {
    /// Target number of pieces.
    pub k: usize,
    /// Overshoot factor: each round considers `⌈(1+ξ)k⌉` leaves.
    pub xi: f64,
    /// Additive tolerance of every constant fit (ℓ1 only).
    pub gamma: f64,
    /// Number of rounds; `None` means the grid depth `L`.
    pub max_levels: Option<u32>,
    /// Rescale the output to total mass 1.
    pub normalize_output: bool,
}

impl SplitParams {
    pub fn new(k: usize, xi: f64, gamma: f64) -> Self {
        Self { k, xi, gamma, max_levels: None, normalize_output: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            bail!(Argument, "k must be at least 1");
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            bail!(Argument, "xi must be positive, got {}", self.xi);
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            bail!(Argument, "gamma must be positive, got {}", self.gamma);
        }
        Ok(())
    }

    /// Leaves examined per round, `⌈(1+ξ)k⌉`.
    pub fn candidates(&self) -> usize {
        libm::ceil((1.0 + self.xi) * self.k as f64) as usize
    }

    fn rounds(&self, grid: &GridSpec) -> u32 {
        self.max_levels.map_or(grid.levels(), |l| l.min(grid.levels()))
    }
}

/// Default fit tolerance `ε / (16 k (1+ξ) 2^d L)`, with `L` read as 1 on a
/// single-cell grid.
pub fn default_gamma(eps: f64, k: usize, xi: f64, dim: usize, levels: u32) -> f64 {
    eps / (16.0 * k as f64 * (1.0 + xi) * (1u64 << dim) as f64 * levels.max(1) as f64)
}

/// Upper bound on the leaves produced in `rounds` rounds:
/// `⌈1+ξ⌉ 2^d k rounds`, and at least 1.
pub fn piece_bound(k: usize, xi: f64, dim: usize, rounds: u32) -> u64 {
    let c = libm::ceil(1.0 + xi) as u64;
    (c * (1u64 << dim) * k as u64 * rounds as u64).max(1)
}

/// A leaf as seen in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafScore {
    pub rect: DyadicRect,
    pub a: f64,
    pub e: f64,
}

/// One round of the greedy loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// Every leaf at the start of the round, in canonical rect order.
    pub leaves: Vec<LeafScore>,
    /// The `⌈(1+ξ)k⌉` leaves with largest error, in selection order.
    pub chosen: Vec<DyadicRect>,
    /// Chosen leaves that were actually split.
    pub split: Vec<DyadicRect>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitTrace {
    pub iterations: Vec<IterationRecord>,
    /// Tree nodes visited while scoring leaves (ℓ1 only).
    pub visits: u64,
}

/// Output of a learner.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub hist: Histogram,
    pub trace: SplitTrace,
    /// Number of final leaves.
    pub leaves: usize,
    /// Bound the leaf count is checked against.
    pub bound: u64,
    /// `Σ value × volume` before any renormalization.
    pub total_mass: f64,
    /// Factor applied by renormalization, when requested.
    pub scale: Option<f64>,
    /// Error `e_R` of every final leaf, in piece order.
    pub leaf_errors: Vec<f64>,
}

trait Scorer {
    /// Returns `(a_R, e_R, splittable_error)` for the leaf `rect` holding the
    /// support points `items`.
    fn score(&mut self, rect: &DyadicRect, items: &mut [u32]) -> (f64, f64, bool);
    fn visits(&self) -> u64 {
        0
    }
}

struct L1Scorer<'a> {
    grid: &'a GridSpec,
    cells: &'a [u32],
    counts: &'a [u64],
    n: u64,
    gamma: f64,
    visits: u64,
}

impl Scorer for L1Scorer<'_> {
    fn score(&mut self, rect: &DyadicRect, items: &mut [u32]) -> (f64, f64, bool) {
        let tree = SparseDyadicTree::from_cells(self.grid, rect, self.cells, self.counts, self.n, items);
        self.visits += tree.visits();
        let fit = tree.fit(self.gamma);
        // errors at rounding level count as zero
        let floor = 64.0 * f64::EPSILON * (tree.root_mass() + fit.a * tree.root_volume());
        (fit.a, fit.err, fit.err > floor)
    }

    fn visits(&self) -> u64 {
        self.visits
    }
}

struct L2Scorer<'a> {
    grid: &'a GridSpec,
    counts: &'a [u64],
    n: u64,
}

impl Scorer for L2Scorer<'_> {
    fn score(&mut self, rect: &DyadicRect, items: &mut [u32]) -> (f64, f64, bool) {
        let vol = self.grid.volume_of(rect);
        if vol == 0.0 {
            return (0.0, 0.0, false);
        }
        // count units keep constant regions exact
        let total: u64 = items.iter().map(|&i| self.counts[i as usize]).sum();
        let t = total as f64 / vol;
        let mut sq: f64 = items
            .iter()
            .map(|&i| {
                let diff = self.counts[i as usize] as f64 - t;
                diff * diff
            })
            .sum();
        sq += (vol - items.len() as f64) * t * t;
        let n = self.n as f64;
        let e = sq / (n * n);
        (t / n, e, e > 0.0)
    }
}

struct Leaf {
    rect: DyadicRect,
    items: Vec<u32>,
    score: Option<(f64, f64, bool)>,
}

/// Per-point cell ranks, flattened.
fn rank_points(fhat: &EmpiricalDist, grid: &GridSpec) -> Vec<u32> {
    let mut cells = Vec::with_capacity(fhat.support_len() * grid.dim());
    for (p, _) in fhat.iter() {
        for (axis, &c) in p.iter().enumerate() {
            cells.push(grid.cell_of(axis, c));
        }
    }
    cells
}

fn split_items(rect: &DyadicRect, items: &[u32], cells: &[u32], d: usize) -> Vec<Vec<u32>> {
    let shift = rect.level - 1;
    let mut out = vec![Vec::new(); 1 << d];
    for &it in items {
        let base = it as usize * d;
        let mut key = 0usize;
        for axis in 0..d {
            key |= (((cells[base + axis] >> shift) & 1) as usize) << axis;
        }
        out[key].push(it);
    }
    out
}

fn run_greedy<S: Scorer>(
    fhat: &EmpiricalDist,
    grid: &GridSpec,
    cells: &[u32],
    p: &SplitParams,
    scorer: &mut S,
) -> Result<SplitOutcome> {
    let d = grid.dim();
    let rounds = p.rounds(grid);
    let take = p.candidates();
    let mut leaves = vec![Leaf {
        rect: grid.root(),
        items: (0..fhat.support_len() as u32).collect(),
        score: None,
    }];
    let mut trace = SplitTrace::default();
    for _ in 0..rounds {
        for leaf in leaves.iter_mut().filter(|l| l.score.is_none()) {
            leaf.score = Some(scorer.score(&leaf.rect, &mut leaf.items));
        }
        leaves.sort_by(|x, y| x.rect.cmp(&y.rect));
        let mut order: Vec<usize> = (0..leaves.len()).collect();
        order.sort_by(|&i, &j| {
            let (ei, ej) = (leaves[i].score.unwrap().1, leaves[j].score.unwrap().1);
            ej.partial_cmp(&ei)
                .unwrap_or(Ordering::Equal)
                .then_with(|| leaves[i].rect.cmp_coarse_first(&leaves[j].rect))
        });
        order.truncate(take);
        let record_leaves = leaves
            .iter()
            .map(|l| {
                let (a, e, _) = l.score.unwrap();
                LeafScore { rect: l.rect.clone(), a, e }
            })
            .collect();
        let chosen: Vec<DyadicRect> = order.iter().map(|&i| leaves[i].rect.clone()).collect();
        let mut to_split: Vec<usize> = order
            .into_iter()
            .filter(|&i| leaves[i].rect.level > 0 && leaves[i].score.unwrap().2)
            .collect();
        let split: Vec<DyadicRect> = to_split.iter().map(|&i| leaves[i].rect.clone()).collect();
        // remove from the back so indices stay valid
        to_split.sort_unstable_by(|a, b| b.cmp(a));
        for i in to_split {
            let leaf = leaves.swap_remove(i);
            let parts = split_items(&leaf.rect, &leaf.items, cells, d);
            for (bits, items) in parts.into_iter().enumerate() {
                leaves.push(Leaf { rect: leaf.rect.child(bits), items, score: None });
            }
        }
        trace.iterations.push(IterationRecord { leaves: record_leaves, chosen, split });
    }
    for leaf in leaves.iter_mut().filter(|l| l.score.is_none()) {
        leaf.score = Some(scorer.score(&leaf.rect, &mut leaf.items));
    }
    leaves.sort_by(|x, y| x.rect.cmp(&y.rect));
    trace.visits = scorer.visits();

    let bound = piece_bound(p.k, p.xi, d, rounds);
    let count = leaves.len();
    if count as u64 > bound {
        bail!(Structure, "greedy split produced {count} leaves, above the bound {bound}");
    }
    let mut cells_out = Vec::with_capacity(count);
    let mut pieces = Vec::with_capacity(count);
    let mut leaf_errors = Vec::with_capacity(count);
    for leaf in leaves {
        let (a, e, _) = leaf.score.unwrap();
        pieces.push(Piece { rect: grid.rect_of(&leaf.rect), value: a.max(0.0) });
        leaf_errors.push(e);
        cells_out.push(leaf.rect);
    }
    let hist = Histogram::from_parts_unchecked(grid.clone(), cells_out, pieces, HistKind::Hierarchical);
    let total_mass = hist.total_mass();
    let (hist, scale) = if p.normalize_output {
        let (h, s) = renormalize(&hist)?;
        (h, Some(s))
    } else {
        (hist, None)
    };
    Ok(SplitOutcome { hist, trace, leaves: count, bound, total_mass, scale, leaf_errors })
}

fn check_inputs(fhat: &EmpiricalDist, grid: &GridSpec, p: &SplitParams) -> Result<()> {
    p.validate()?;
    fhat.domain().ensure_same(grid.domain())
}

/// Greedy splitting in D-distance on a fixed grid.
///
/// Each leaf gets the D-distance fit `a_R` (within `gamma`) and error `e_R`.
/// The output equals `a_R` on every final leaf.
pub fn greedy_split(fhat: &EmpiricalDist, grid: &GridSpec, p: &SplitParams) -> Result<SplitOutcome> {
    check_inputs(fhat, grid, p)?;
    let cells = rank_points(fhat, grid);
    let mut scorer = L1Scorer { grid, cells: &cells, counts: fhat.counts(), n: fhat.n(), gamma: p.gamma, visits: 0 };
    run_greedy(fhat, grid, &cells, p, &mut scorer)
}

/// Greedy splitting in squared ℓ2 on a fixed grid of a discrete domain.
///
/// `a_R` is the flattening of `g` over `R` and
/// `e_R = Σ_{x ∈ R} (g(x) − a_R)²`, with the empty lattice points of `R`
/// contributing `(vol(R) − #support) a_R²` in closed form.
pub fn greedy_split_l2(g: &EmpiricalDist, grid: &GridSpec, p: &SplitParams) -> Result<SplitOutcome> {
    if !g.domain().is_discrete() {
        bail!(UnsupportedDomain, "the l2 learner needs a discrete domain");
    }
    check_inputs(g, grid, p)?;
    let cells = rank_points(g, grid);
    let mut scorer = L2Scorer { grid, counts: g.counts(), n: g.n() };
    run_greedy(g, grid, &cells, p, &mut scorer)
}

/// Grid whose boundaries are the sample coordinates.
///
/// Per axis the distinct coordinates strictly below the domain's upper bound
/// become boundaries; with `D` of them an axis has `D + 1` proper cells. `M`
/// is the least power of two with `M ≥ D + 1` over all axes, and shorter
/// axes are padded with zero-width cells at their largest coordinate.
pub fn build_adaptive_grid(samples: &EmpiricalDist) -> Result<GridSpec> {
    let domain = *samples.domain();
    let (lo, hi) = domain.axis_bounds();
    let d = domain.dim();
    let mut coords: Vec<Vec<f64>> = vec![Vec::new(); d];
    for (p, _) in samples.iter() {
        for (axis, &c) in p.iter().enumerate() {
            if c < hi {
                coords[axis].push(c);
            }
        }
    }
    for axis in &mut coords {
        axis.sort_by(f64::total_cmp);
        axis.dedup();
        // the lower bound is already a boundary
        if axis.first() == Some(&lo) {
            axis.remove(0);
        }
    }
    let widest = coords.iter().map(Vec::len).max().unwrap_or(0);
    let m = (widest + 1).next_power_of_two();
    let axes = coords
        .into_iter()
        .map(|interior| {
            let pad = interior.last().copied().unwrap_or(lo);
            let mut axis = Vec::with_capacity(m + 1);
            axis.push(lo);
            axis.extend_from_slice(&interior);
            while axis.len() < m {
                axis.push(pad);
            }
            axis.push(hi);
            axis
        })
        .collect();
    GridSpec::new(domain, axes)
}

/// [`build_adaptive_grid`] followed by [`greedy_split`].
pub fn adaptive_greedy_split(samples: &EmpiricalDist, p: &SplitParams) -> Result<SplitOutcome> {
    p.validate()?;
    let grid = build_adaptive_grid(samples)?;
    greedy_split(samples, &grid, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use crate::histogram::{l1_dist, l2_sq_dist};

    fn lattice_counts(m: u64, counts: &[u64]) -> (EmpiricalDist, GridSpec) {
        let dom = Domain::discrete(1, m).unwrap();
        let pts: Vec<([f64; 1], u64)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| ([(i + 1) as f64], c))
            .collect();
        let e = EmpiricalDist::from_weighted(dom, pts.iter().map(|(p, c)| (&p[..], *c))).unwrap();
        (e, GridSpec::lattice(dom).unwrap())
    }

    #[test]
    fn uniform_never_splits() {
        let (e, g) = lattice_counts(8, &[3; 8]);
        let out = greedy_split(&e, &g, &SplitParams::new(2, 1.0, 1e-6)).unwrap();
        assert_eq!(out.leaves, 1);
        assert_eq!(out.hist.pieces()[0].value, 0.125);
        let out = greedy_split_l2(&e, &g, &SplitParams::new(2, 1.0, 1e-6)).unwrap();
        assert_eq!(out.leaves, 1);
    }

    #[test]
    fn two_piece_reproduced() {
        // masses 0.3, 0.3, 0.2, 0.2 are constant on each half
        let (e, g) = lattice_counts(4, &[3, 3, 2, 2]);
        let out = greedy_split(&e, &g, &SplitParams::new(2, 1.0, 1e-9)).unwrap();
        let truth = Histogram::hierarchical(
            g.clone(),
            vec![DyadicRect::new(1, vec![0]), DyadicRect::new(1, vec![1])],
            vec![0.3, 0.2],
        )
        .unwrap();
        assert!(l1_dist(&out.hist, &truth).unwrap() < 1e-9);
        assert!(out.leaf_errors.iter().all(|&e| e < 1e-12));
    }

    #[test]
    fn l2_splits_once() {
        let (e, g) = lattice_counts(2, &[3, 1]);
        let out = greedy_split_l2(&e, &g, &SplitParams::new(1, 1.0, 1e-6)).unwrap();
        assert_eq!(out.leaves, 2);
        assert_eq!(out.trace.iterations.len(), 1);
        assert_eq!(l2_sq_dist(&e, &out.hist).unwrap(), 0.0);
    }

    #[test]
    fn l2_rejects_unit() {
        let dom = Domain::unit(1).unwrap();
        let pts: [&[f64]; 1] = [&[0.5]];
        let e = EmpiricalDist::from_points(dom, pts).unwrap();
        let g = GridSpec::uniform(dom, 4).unwrap();
        let err = greedy_split_l2(&e, &g, &SplitParams::new(1, 1.0, 1e-6)).unwrap_err();
        assert!(matches!(err, crate::Error::UnsupportedDomain(_)));
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(piece_bound(2, 1.0, 2, 3), 48);
        assert_eq!(piece_bound(1, 0.5, 2, 0), 1);
        assert_eq!(SplitParams::new(3, 0.5, 1.0).candidates(), 5);
    }

    #[test]
    fn params_validated() {
        let (e, g) = lattice_counts(4, &[1, 1, 1, 1]);
        for p in [SplitParams::new(0, 1.0, 1e-3), SplitParams::new(1, 0.0, 1e-3), SplitParams::new(1, 1.0, 0.0)] {
            assert!(matches!(greedy_split(&e, &g, &p), Err(crate::Error::Argument(_))));
        }
    }

    #[test]
    fn adaptive_grid_examples() {
        let dom = Domain::discrete(1, 16).unwrap();
        let pts: [&[f64]; 2] = [&[5.0], &[5.0]];
        let g = build_adaptive_grid(&EmpiricalDist::from_points(dom, pts).unwrap()).unwrap();
        assert_eq!(g.side(), 2);
        assert_eq!(g.axis(0), &[1.0, 5.0, 17.0]);

        let dom = Domain::discrete(2, 16).unwrap();
        let pts: [&[f64]; 3] = [&[3.0, 7.0], &[3.0, 2.0], &[9.0, 2.0]];
        let g = build_adaptive_grid(&EmpiricalDist::from_points(dom, pts).unwrap()).unwrap();
        assert_eq!(g.side(), 4);
        assert_eq!(g.axis(0), &[1.0, 3.0, 9.0, 9.0, 17.0]);
        assert_eq!(g.axis(1), &[1.0, 2.0, 7.0, 7.0, 17.0]);
    }

    #[test]
    fn adaptive_unit_top_excluded() {
        let dom = Domain::unit(1).unwrap();
        let pts: [&[f64]; 3] = [&[0.0], &[0.5], &[1.0]];
        let g = build_adaptive_grid(&EmpiricalDist::from_points(dom, pts).unwrap()).unwrap();
        assert_eq!(g.axis(0), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn single_point_single_piece() {
        let dom = Domain::unit(2).unwrap();
        let pts: Vec<&[f64]> = vec![&[0.25, 0.75]; 7];
        let e = EmpiricalDist::from_points(dom, pts).unwrap();
        let out = adaptive_greedy_split(&e, &SplitParams::new(1, 1.0, 1e-9)).unwrap();
        let grid = &out.hist.layout().unwrap().grid;
        let owner = out.hist.pieces().iter().find(|p| p.rect.owns(&[0.25, 0.75], 1.0)).unwrap();
        let vol = owner.rect.sides().iter().map(|s| s.len()).product::<f64>();
        assert!((owner.value * vol - 1.0).abs() < 1e-9, "grid {:?}", grid.axes());
        assert!((out.total_mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn trace_is_deterministic() {
        let (e, g) = lattice_counts(16, &[5, 0, 1, 7, 2, 2, 9, 0, 0, 1, 3, 3, 8, 1, 0, 4]);
        let p = SplitParams::new(2, 0.5, 1e-7);
        let a = greedy_split(&e, &g, &p).unwrap();
        let b = greedy_split(&e, &g, &p).unwrap();
        assert_eq!(a, b);
        for it in &a.trace.iterations {
            assert!(it.chosen.len() <= p.candidates());
        }
    }

    #[test]
    fn normalization_recorded() {
        let (e, g) = lattice_counts(8, &[5, 0, 1, 7, 2, 2, 9, 0]);
        let mut p = SplitParams::new(2, 1.0, 1e-3);
        p.normalize_output = true;
        let out = greedy_split(&e, &g, &p).unwrap();
        assert!(out.scale.is_some());
        assert!((out.hist.total_mass() - 1.0).abs() < 1e-12);
    }
}
