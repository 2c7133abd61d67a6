//! Dyadic-rectangle discrepancy ("D-distance") between an empirical
//! distribution and a constant on a dyadic rectangle.
//!
//! The D-distance of `fhat - a` on `R` is the largest `|fhat(R') - a vol(R')|`
//! over dyadic rectangles `R' ⊆ R`. Only rectangles holding sample points
//! need to be visited explicitly: every empty rectangle has discrepancy
//! `a vol(R')`, maximised by the largest empty one, which is always a missing
//! child of some visited node (or `R` itself when `R` holds no samples).

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::empirical::EmpiricalDist;
use crate::error::{bail, Error, Result};
use crate::geometry::{DyadicRect, GridSpec};

/// Default limit on the number of rectangles `brute_d1` may enumerate.
pub const BRUTE_D1_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub rect: DyadicRect,
    pub count: u64,
    /// Indices of the present children in `SparseDyadicTree::nodes`.
    pub children: Vec<u32>,
}

/// The dyadic rectangles below a query rectangle that contain at least one
/// support point, with their sample counts.
#[derive(Debug, Clone)]
pub struct SparseDyadicTree {
    root: DyadicRect,
    root_volume: f64,
    n: u64,
    nodes: Vec<TreeNode>,
    mass: Vec<f64>,
    volume: Vec<f64>,
    absent: Option<(f64, DyadicRect)>,
    visits: u64,
}

/// Where the maximum discrepancy was attained.
#[derive(Debug, Clone, PartialEq)]
pub struct D1Result {
    pub err: f64,
    pub witness: DyadicRect,
    /// `fhat(witness) - a vol(witness)`.
    pub signed: f64,
    pub volume: f64,
}

/// Result of fitting a constant in D-distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DFitResult {
    /// Fitted density (per unit volume).
    pub a: f64,
    /// D-distance achieved by `a`.
    pub err: f64,
    pub witness: DyadicRect,
    /// Number of discrepancy evaluations performed by the search.
    pub evaluations: u32,
}

struct Builder<'a> {
    grid: &'a GridSpec,
    cells: &'a [u32],
    counts: &'a [u64],
    n: u64,
    nodes: Vec<TreeNode>,
    mass: Vec<f64>,
    volume: Vec<f64>,
    absent: Option<(f64, DyadicRect)>,
    visits: u64,
    scratch: Vec<u32>,
    keys: Vec<u32>,
}

impl Builder<'_> {
    fn offer_absent(&mut self, vol: f64, rect: DyadicRect) {
        let better = match &self.absent {
            None => true,
            Some((v, r)) => vol > *v || (vol == *v && rect < *r),
        };
        if better {
            self.absent = Some((vol, rect));
        }
    }

    /// Adds the node for `rect`, which owns the support points `items`
    /// (non-empty), and recurses into its occupied children.
    fn build(&mut self, rect: DyadicRect, items: &mut [u32]) -> u32 {
        let d = self.grid.dim();
        let count: u64 = items.iter().map(|&i| self.counts[i as usize]).sum();
        let id = self.nodes.len() as u32;
        self.visits += 1;
        self.mass.push(count as f64 / self.n as f64);
        self.volume.push(self.grid.volume_of(&rect));
        let level = rect.level;
        self.nodes.push(TreeNode { rect, count, children: Vec::new() });
        if level == 0 {
            return id;
        }
        let fanout = 1usize << d;
        // counting sort of the items by child bit pattern
        let shift = level - 1;
        let mut bucket = vec![0usize; fanout + 1];
        self.keys.clear();
        for &it in items.iter() {
            let base = it as usize * d;
            let mut key = 0u32;
            for axis in 0..d {
                key |= ((self.cells[base + axis] >> shift) & 1) << axis;
            }
            self.keys.push(key);
            bucket[key as usize + 1] += 1;
        }
        for b in 0..fanout {
            bucket[b + 1] += bucket[b];
        }
        let starts = bucket.clone();
        self.scratch.clear();
        self.scratch.resize(items.len(), 0);
        for (pos, &it) in items.iter().enumerate() {
            let k = self.keys[pos] as usize;
            self.scratch[bucket[k]] = it;
            bucket[k] += 1;
        }
        items.copy_from_slice(&self.scratch);
        let parent = self.nodes[id as usize].rect.clone();
        let mut children = Vec::new();
        for bits in 0..fanout {
            let (s, e) = (starts[bits], starts[bits + 1]);
            let child = parent.child(bits);
            self.visits += 1;
            if s == e {
                let vol = self.grid.volume_of(&child);
                self.offer_absent(vol, child);
            } else {
                let cid = self.build(child, &mut items[s..e]);
                children.push(cid);
            }
        }
        self.nodes[id as usize].children = children;
        id
    }
}

impl SparseDyadicTree {
    /// Builds the tree below `root` from precomputed cell ranks.
    ///
    /// `cells` holds `d` ranks per support point, `counts` their sample
    /// counts, and `items` the indices of the support points inside `root`
    /// (reordered in place).
    pub fn from_cells(
        grid: &GridSpec,
        root: &DyadicRect,
        cells: &[u32],
        counts: &[u64],
        n: u64,
        items: &mut [u32],
    ) -> Self {
        let mut b = Builder {
            grid,
            cells,
            counts,
            n,
            nodes: Vec::new(),
            mass: Vec::new(),
            volume: Vec::new(),
            absent: None,
            visits: 0,
            scratch: Vec::new(),
            keys: Vec::new(),
        };
        let root_volume = grid.volume_of(root);
        if !items.is_empty() {
            b.build(root.clone(), items);
        }
        let absent = if items.is_empty() { Some((root_volume, root.clone())) } else { b.absent };
        Self {
            root: root.clone(),
            root_volume,
            n,
            nodes: b.nodes,
            mass: b.mass,
            volume: b.volume,
            absent,
            visits: b.visits,
        }
    }

    pub fn root(&self) -> &DyadicRect {
        &self.root
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node and child-slot visits spent building the tree.
    pub fn visits(&self) -> u64 {
        self.visits
    }

    /// Largest dyadic sub-rectangle holding no samples, with its volume.
    pub fn largest_absent(&self) -> Option<(f64, &DyadicRect)> {
        self.absent.as_ref().map(|(v, r)| (*v, r))
    }

    /// Mass of the query rectangle.
    pub fn root_mass(&self) -> f64 {
        self.mass.first().copied().unwrap_or(0.0)
    }

    pub fn root_volume(&self) -> f64 {
        self.root_volume
    }

    /// Maximum discrepancy of `fhat - a` over dyadic sub-rectangles.
    pub fn discrepancy(&self, a: f64) -> D1Result {
        let mut best_err = f64::NEG_INFINITY;
        let mut best: Option<usize> = None;
        for (i, (&m, &v)) in self.mass.iter().zip(&self.volume).enumerate() {
            let e = (m - a * v).abs();
            if e > best_err {
                best_err = e;
                best = Some(i);
            } else if e == best_err {
                if let Some(b) = best {
                    if self.nodes[i].rect < self.nodes[b].rect {
                        best = Some(i);
                    }
                }
            }
        }
        if let Some((vol, rect)) = &self.absent {
            let absent_err = a * vol;
            let take = match best {
                None => true,
                Some(b) => absent_err > best_err || (absent_err == best_err && *rect < self.nodes[b].rect),
            };
            if take {
                return D1Result { err: absent_err, witness: rect.clone(), signed: -absent_err, volume: *vol };
            }
        }
        let b = best.expect("a non-empty tree or an absent rectangle");
        D1Result {
            err: best_err,
            witness: self.nodes[b].rect.clone(),
            signed: self.mass[b] - a * self.volume[b],
            volume: self.volume[b],
        }
    }

    /// Upper end of the search bracket: the largest sample density of an
    /// occupied level-0 cell of positive volume.
    pub fn max_leaf_density(&self) -> f64 {
        self.nodes
            .iter()
            .zip(self.mass.iter().zip(&self.volume))
            .filter(|(n, (_, &v))| n.rect.level == 0 && v > 0.0)
            .map(|(_, (&m, &v))| m / v)
            .fold(0.0, f64::max)
    }

    /// Constant density minimising the D-distance, to within `gamma`.
    ///
    /// The objective `a ↦ max |fhat(R') − a vol(R')|` is convex and piecewise
    /// linear with slope bounded by `vol(R)`. Each evaluation returns a
    /// witness whose signed discrepancy is a subgradient direction, so the
    /// bracket `[lo, hi]` always contains a minimiser; the search stops once
    /// `(hi − lo) vol(R) ≤ gamma`.
    pub fn fit(&self, gamma: f64) -> DFitResult {
        if self.nodes.is_empty() {
            let r = self.discrepancy(0.0);
            return DFitResult { a: 0.0, err: r.err, witness: r.witness, evaluations: 1 };
        }
        let vol = self.root_volume;
        let mut evaluations = 0u32;
        let mut best: Option<(f64, D1Result)> = None;
        let mut consider = |a: f64, best: &mut Option<(f64, D1Result)>| -> D1Result {
            evaluations += 1;
            let r = self.discrepancy(a);
            let better = match best {
                None => true,
                Some((ba, br)) => r.err < br.err || (r.err == br.err && a < *ba),
            };
            if better {
                *best = Some((a, r.clone()));
            }
            r
        };
        let mut lo = 0.0;
        let mut hi = self.max_leaf_density();
        let r_lo = consider(lo, &mut best);
        if vol > 0.0 && r_lo.err > 0.0 {
            let flat = self.nodes[0].count as f64 / (self.n as f64 * vol);
            let r_flat = consider(flat, &mut best);
            if r_flat.err > 0.0 {
                consider(hi, &mut best);
                while (hi - lo) * vol > gamma {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let r = consider(mid, &mut best);
                    if r.err == 0.0 {
                        break;
                    }
                    if r.signed > 0.0 {
                        if r.volume == 0.0 {
                            // discrepancy independent of a: mid is optimal
                            break;
                        }
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
            }
        }
        let (a, r) = best.unwrap();
        DFitResult { a, err: r.err, witness: r.witness, evaluations }
    }
}

fn check_query(fhat: &EmpiricalDist, grid: &GridSpec, r: &DyadicRect) -> Result<()> {
    fhat.domain().ensure_same(grid.domain())?;
    grid.check_member(r)
}

/// Sample ranks and indices of the support points inside `r`.
fn collect_cells(fhat: &EmpiricalDist, grid: &GridSpec, r: &DyadicRect) -> (Vec<u32>, Vec<u32>) {
    let mut cells = Vec::with_capacity(fhat.support_len() * grid.dim());
    let mut items = Vec::new();
    for (i, (p, _)) in fhat.iter().enumerate() {
        let c = grid.cells_of(p);
        if r.contains_cell(&c) {
            items.push(i as u32);
        }
        cells.extend(c);
    }
    (cells, items)
}

/// Sparse tree of the occupied dyadic rectangles below `r`.
pub fn build_tree(fhat: &EmpiricalDist, grid: &GridSpec, r: &DyadicRect) -> Result<SparseDyadicTree> {
    check_query(fhat, grid, r)?;
    let (cells, mut items) = collect_cells(fhat, grid, r);
    Ok(SparseDyadicTree::from_cells(grid, r, &cells, fhat.counts(), fhat.n(), &mut items))
}

/// D-distance between `fhat` and the constant density `a` on `r`.
pub fn compute_d1(fhat: &EmpiricalDist, grid: &GridSpec, r: &DyadicRect, a: f64) -> Result<D1Result> {
    if !(a >= 0.0) || !a.is_finite() {
        bail!(Argument, "constant must be finite and nonnegative, got {a}");
    }
    Ok(build_tree(fhat, grid, r)?.discrepancy(a))
}

/// Best constant fit in D-distance on `r`, within additive `gamma`.
pub fn fit_d1(fhat: &EmpiricalDist, grid: &GridSpec, r: &DyadicRect, gamma: f64) -> Result<DFitResult> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        bail!(Argument, "gamma must be positive, got {gamma}");
    }
    Ok(build_tree(fhat, grid, r)?.fit(gamma))
}

/// Exhaustive counterpart of [`compute_d1`]: visits every dyadic rectangle
/// below `r` and counts its samples directly.
pub fn brute_d1(fhat: &EmpiricalDist, grid: &GridSpec, r: &DyadicRect, a: f64, limit: u64) -> Result<D1Result> {
    check_query(fhat, grid, r)?;
    let needed = grid.count_descendants(r);
    if needed > limit {
        return Err(Error::OracleTooLarge { what: "dyadic rectangles", limit, needed });
    }
    let top = grid.domain().axis_bounds().1;
    let n = fhat.n() as f64;
    let mut best: Option<D1Result> = None;
    for q in grid.descendants(r) {
        let rect = grid.rect_of(&q);
        let count: u64 = fhat.iter().filter(|(p, _)| rect.owns(p, top)).map(|(_, c)| c).sum();
        let volume = grid.volume_of(&q);
        let signed = count as f64 / n - a * volume;
        let err = signed.abs();
        let better = match &best {
            None => true,
            Some(b) => match err.partial_cmp(&b.err) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => q < b.witness,
                _ => false,
            },
        };
        if better {
            best = Some(D1Result { err, witness: q, signed, volume });
        }
    }
    Ok(best.expect("a dyadic rectangle has at least itself as descendant"))
}
