//! Exact baselines at desk scale.
//!
//! Every oracle works on the full catalog of dyadic rectangles of a small
//! grid and refuses to run past an [`OracleGuard`].

use alloc::vec;
use alloc::vec::Vec;

use crate::empirical::EmpiricalDist;
use crate::error::{bail, Error, Result};
use crate::geometry::{DyadicRect, GridSpec};
use crate::histogram::{flatten, Histogram, MassFn};

/// Limits on brute-force enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleGuard {
    pub max_dyadic_rects: u64,
    pub max_partitions: u64,
}

impl Default for OracleGuard {
    fn default() -> Self {
        Self { max_dyadic_rects: 10_000, max_partitions: 1_000_000 }
    }
}

/// All dyadic rectangles of a grid, root first and level-0 cells last.
#[derive(Debug, Clone)]
struct Catalog {
    rects: Vec<DyadicRect>,
    volume: Vec<f64>,
    children: Vec<Vec<usize>>,
    /// Index of the first level-0 cell.
    first_cell: usize,
}

impl Catalog {
    fn new(grid: &GridSpec, guard: &OracleGuard) -> Result<Self> {
        let needed = grid.count_descendants(&grid.root());
        if needed > guard.max_dyadic_rects {
            return Err(Error::OracleTooLarge { what: "dyadic rectangles", limit: guard.max_dyadic_rects, needed });
        }
        let rects = grid.descendants(&grid.root());
        let d = grid.dim();
        let side = grid.side();
        let mut offset = vec![0usize; grid.levels() as usize + 1];
        let mut pos = 0;
        for level in (0..=grid.levels()).rev() {
            offset[level as usize] = pos;
            pos += (side >> level).pow(d as u32);
        }
        let flat = |r: &DyadicRect| {
            let s = side >> r.level;
            offset[r.level as usize] + r.index.iter().fold(0usize, |acc, &j| acc * s + j as usize)
        };
        let children = rects
            .iter()
            .map(|r| if r.level == 0 { Vec::new() } else { r.children().iter().map(flat).collect() })
            .collect();
        let volume = rects.iter().map(|r| grid.volume_of(r)).collect();
        Ok(Self { first_cell: offset[0], rects, volume, children })
    }

    fn len(&self) -> usize {
        self.rects.len()
    }

    /// Per-rectangle sums of per-cell values.
    fn accumulate(&self, cells: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        out[self.first_cell..].copy_from_slice(cells);
        for i in (0..self.first_cell).rev() {
            out[i] = self.children[i].iter().map(|&c| out[c]).sum();
        }
        out
    }

    /// Volume of the intersection of rectangles `a` and `b`.
    fn meet_volume(&self, a: usize, b: usize) -> f64 {
        let (ra, rb) = (&self.rects[a], &self.rects[b]);
        if ra.contains(rb) {
            self.volume[b]
        } else if rb.contains(ra) {
            self.volume[a]
        } else {
            0.0
        }
    }
}

/// Largest sum of `vals` over at most `k` pairwise disjoint rectangles,
/// restricted to `allowed` ones, with the chosen rectangles.
fn best_union(cat: &Catalog, vals: &[f64], k: usize, allowed: &dyn Fn(usize) -> bool) -> (f64, Vec<usize>) {
    let mut table: Vec<Vec<(f64, Vec<usize>)>> = vec![Vec::new(); cat.len()];
    for i in (0..cat.len()).rev() {
        let mut cur: Vec<(f64, Vec<usize>)> = vec![(0.0, Vec::new()); k + 1];
        for &c in &cat.children[i] {
            let child = core::mem::take(&mut table[c]);
            let mut next = cur.clone();
            for (j, slot) in next.iter_mut().enumerate() {
                for t in 1..=j {
                    let v = cur[j - t].0 + child[t].0;
                    if v > slot.0 {
                        let mut set = cur[j - t].1.clone();
                        set.extend_from_slice(&child[t].1);
                        *slot = (v, set);
                    }
                }
            }
            cur = next;
        }
        if allowed(i) {
            for slot in cur.iter_mut().skip(1) {
                if vals[i] > slot.0 {
                    *slot = (vals[i], vec![i]);
                }
            }
        }
        table[i] = cur;
    }
    let mut root = core::mem::take(&mut table[0]);
    root.swap_remove(k)
}

/// Largest `|Σ vals|` over unions of at most `k` disjoint allowed rectangles.
fn best_abs_union(cat: &Catalog, vals: &[f64], k: usize, allowed: &dyn Fn(usize) -> bool) -> (f64, Vec<usize>, bool) {
    let (pos, pu) = best_union(cat, vals, k, allowed);
    let neg_vals: Vec<f64> = vals.iter().map(|v| -v).collect();
    let (neg, nu) = best_union(cat, &neg_vals, k, allowed);
    if neg > pos {
        (neg, nu, false)
    } else {
        (pos, pu, true)
    }
}

/// A signed mass function given by its value on every level-0 cell of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMass {
    grid: GridSpec,
    cells: Vec<f64>,
}

impl SignedMass {
    /// `mass(a, ·) − mass(b, ·)` on every cell of `grid`.
    pub fn between<'a, 'b>(a: impl Into<MassFn<'a>>, b: impl Into<MassFn<'b>>, grid: &GridSpec) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        a.domain().ensure_same(grid.domain())?;
        b.domain().ensure_same(grid.domain())?;
        let cells = level_zero(grid)
            .iter()
            .map(|c| {
                let r = grid.rect_of(c);
                a.raw_mass(&r) - b.raw_mass(&r)
            })
            .collect();
        Ok(Self { grid: grid.clone(), cells })
    }

    /// Values per level-0 cell, cells in lexicographic index order.
    pub fn from_cells(grid: &GridSpec, cells: Vec<f64>) -> Result<Self> {
        let expect = grid.side().pow(grid.dim() as u32);
        if cells.len() != expect {
            bail!(Argument, "{} cell values for a grid of {expect} cells", cells.len());
        }
        Ok(Self { grid: grid.clone(), cells })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }
}

fn level_zero(grid: &GridSpec) -> Vec<DyadicRect> {
    let mut all = grid.descendants(&grid.root());
    let cells = grid.side().pow(grid.dim() as u32);
    all.split_off(all.len() - cells)
}

/// Largest signed mass over unions of at most `k` disjoint dyadic rectangles.
#[derive(Debug, Clone, PartialEq)]
pub struct DkDistance {
    pub value: f64,
    /// The rectangles of a maximising union.
    pub union: Vec<DyadicRect>,
    /// Whether the union's signed mass is positive.
    pub positive: bool,
}

/// `max |u(U)|` over unions `U` of at most `k` pairwise disjoint dyadic
/// rectangles.
///
/// A union mixing signs is dominated by its same-sign part, so the maximum
/// is the larger of the best positive and best negative unions. Both are
/// exact tree knapsacks over the catalog.
pub fn dk_distance(u: &SignedMass, k: usize, guard: &OracleGuard) -> Result<DkDistance> {
    if k == 0 {
        bail!(Argument, "k must be at least 1");
    }
    let cat = Catalog::new(&u.grid, guard)?;
    let vals = cat.accumulate(&u.cells);
    let (value, union, positive) = best_abs_union(&cat, &vals, k, &|_| true);
    let mut union: Vec<DyadicRect> = union.into_iter().map(|i| cat.rects[i].clone()).collect();
    union.sort();
    Ok(DkDistance { value, union, positive })
}

/// Best partial hierarchical `k`-histogram in `D_k` distance.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialOpt {
    pub value: f64,
    pub hist: Histogram,
    /// Supports solved exactly (the rest were pruned).
    pub solved: u64,
}

/// One cutting-plane row: a union's empirical mass and its overlap volume
/// with every support rectangle.
struct Cut {
    mass: f64,
    overlap: Vec<f64>,
}

/// `max bᵀy` subject to `Aᵀy ≤ c`, `y ≥ 0`, for `c ≥ 0`, by the simplex
/// method with Bland's rule. `cols[j]` is column `j` of `Aᵀ` (length
/// `c.len()`). Returns the optimal value and the shadow price of every row.
fn simplex_max(cols: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<(f64, Vec<f64>)> {
    const TOL: f64 = 1e-13;
    let m = c.len();
    let n = cols.len();
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        for j in 0..n {
            t[i][j] = cols[j][i];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = c[i];
    }
    for j in 0..n {
        t[m][j] = -b[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    for _ in 0..10_000 {
        let Some(enter) = (0..n + m).find(|&j| t[m][j] < -TOL) else {
            let prices = (0..m).map(|i| t[m][n + i].max(0.0)).collect();
            return Some((t[m][width - 1], prices));
        };
        let mut leave: Option<usize> = None;
        for i in 0..m {
            if t[i][enter] > TOL {
                let ratio = t[i][width - 1] / t[i][enter];
                leave = match leave {
                    None => Some(i),
                    Some(l) => {
                        let best = t[l][width - 1] / t[l][enter];
                        if ratio < best || (ratio == best && basis[i] < basis[l]) {
                            Some(i)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
        }
        let l = leave?;
        let p = t[l][enter];
        for v in t[l].iter_mut() {
            *v /= p;
        }
        let pivot_row = t[l].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i != l && row[enter] != 0.0 {
                let f = row[enter];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        basis[l] = enter;
    }
    None
}

struct PartialSolver<'a> {
    cat: &'a Catalog,
    /// Empirical mass per catalog rectangle.
    mass: Vec<f64>,
    cell_mass: Vec<f64>,
    k: usize,
}

impl PartialSolver<'_> {
    fn cut(&self, support: &[usize], union: &[usize]) -> Cut {
        Cut {
            mass: union.iter().map(|&r| self.mass[r]).sum(),
            overlap: support.iter().map(|&q| union.iter().map(|&r| self.cat.meet_volume(q, r)).sum()).collect(),
        }
    }

    /// `D_k` error of the partial histogram with constants `c` on `support`,
    /// over unions of allowed rectangles, with a maximising union.
    fn error(&self, support: &[usize], c: &[f64], allowed: &dyn Fn(usize) -> bool) -> (f64, Vec<usize>, bool) {
        let first = self.cat.first_cell;
        let mut cells = self.cell_mass.clone();
        for (idx, cell) in cells.iter_mut().enumerate() {
            let r = first + idx;
            for (&q, &cq) in support.iter().zip(c) {
                if self.cat.rects[q].contains(&self.cat.rects[r]) {
                    *cell -= cq * self.cat.volume[r];
                }
            }
        }
        let vals = self.cat.accumulate(&cells);
        best_abs_union(self.cat, &vals, self.k, allowed)
    }

    /// Minimum over constants `c ≥ 0` of the error on `support`, by cutting
    /// planes. Returns the error and the constants achieving it.
    fn solve(&self, support: &[usize], allowed: &dyn Fn(usize) -> bool) -> (f64, Vec<f64>) {
        let s = support.len();
        let mut cuts: Vec<Cut> = support.iter().map(|&q| self.cut(support, &[q])).collect();
        let mut best = (f64::INFINITY, vec![0.0; s]);
        for _ in 0..500 {
            // dual of: min t  s.t.  ±(mass(U) − Σ c_i overlap_i(U)) ≤ t, c ≥ 0
            let mut cols = Vec::with_capacity(2 * cuts.len());
            let mut obj = Vec::with_capacity(2 * cuts.len());
            for cut in &cuts {
                for sign in [1.0, -1.0] {
                    let mut col: Vec<f64> = cut.overlap.iter().map(|v| sign * v).collect();
                    col.push(1.0);
                    cols.push(col);
                    obj.push(sign * cut.mass);
                }
            }
            let mut rhs = vec![0.0; s];
            rhs.push(1.0);
            let Some((lower, prices)) = simplex_max(&cols, &obj, &rhs) else {
                break;
            };
            let c = prices[..s].to_vec();
            let (err, union, _) = self.error(support, &c, allowed);
            if err < best.0 {
                best = (err, c);
            }
            if err <= lower + 1e-13 * (1.0 + lower) {
                break;
            }
            let cut = self.cut(support, &union);
            if cuts.iter().any(|x| x.mass == cut.mass && x.overlap == cut.overlap) {
                break;
            }
            cuts.push(cut);
        }
        best
    }
}

/// Antichains of at most `k` pairwise disjoint rectangles among `cands`.
fn supports(cat: &Catalog, cands: &[usize], k: usize, guard: &OracleGuard) -> Result<Vec<Vec<usize>>> {
    fn grow(
        cat: &Catalog,
        cands: &[usize],
        start: usize,
        k: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        guard: &OracleGuard,
    ) -> Result<()> {
        for p in start..cands.len() {
            let q = cands[p];
            if cur.iter().all(|&r| cat.rects[r].is_disjoint(&cat.rects[q])) {
                cur.push(q);
                out.push(cur.clone());
                if out.len() as u64 > guard.max_partitions {
                    return Err(Error::OracleTooLarge {
                        what: "supports",
                        limit: guard.max_partitions,
                        needed: out.len() as u64,
                    });
                }
                if cur.len() < k {
                    grow(cat, cands, p + 1, k, cur, out, guard)?;
                }
                cur.pop();
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    grow(cat, cands, 0, k, &mut Vec::new(), &mut out, guard)?;
    Ok(out)
}

/// Search strategy for [`opt_partial_hier_dk`]; both must agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchOrder {
    /// Supports in increasing lower-bound order, stopping once the bound
    /// reaches the incumbent.
    Pruned,
    /// Every support, in reverse enumeration order.
    Exhaustive,
}

/// Minimum `D_k` distance from `fhat` to a partial hierarchical
/// `k`-histogram on `grid`: at most `k` disjoint dyadic pieces with
/// nonnegative constants, zero elsewhere.
///
/// For each support the best constants solve a linear program whose
/// constraints are all unions of at most `k` dyadic rectangles; it is solved
/// exactly by cutting planes with [`dk_distance`] as the separation oracle.
pub fn opt_partial_hier_dk(fhat: &EmpiricalDist, grid: &GridSpec, k: usize, guard: &OracleGuard) -> Result<PartialOpt> {
    opt_partial_hier_dk_with(fhat, grid, k, guard, SearchOrder::Pruned)
}

pub fn opt_partial_hier_dk_with(
    fhat: &EmpiricalDist,
    grid: &GridSpec,
    k: usize,
    guard: &OracleGuard,
    order: SearchOrder,
) -> Result<PartialOpt> {
    if k == 0 {
        bail!(Argument, "k must be at least 1");
    }
    fhat.domain().ensure_same(grid.domain())?;
    let cat = Catalog::new(grid, guard)?;
    let cell_mass: Vec<f64> = level_zero(grid).iter().map(|c| MassFn::from(fhat).raw_mass(&grid.rect_of(c))).collect();
    let mass = cat.accumulate(&cell_mass);
    let solver = PartialSolver { cat: &cat, mass, cell_mass, k };
    let cands: Vec<usize> = (0..cat.len()).filter(|&i| cat.volume[i] > 0.0).collect();
    let all = supports(&cat, &cands, k, guard)?;

    let (empty_err, _, _) = solver.error(&[], &[], &|_| true);
    let mut best = (empty_err, Vec::new(), Vec::new());
    let mut solved = 0u64;
    let mut consider = |support: &[usize], best: &mut (f64, Vec<usize>, Vec<f64>)| {
        let (err, c) = solver.solve(support, &|_| true);
        solved += 1;
        if err < best.0 {
            *best = (err, support.to_vec(), c);
        }
    };
    match order {
        SearchOrder::Exhaustive => {
            for support in all.iter().rev() {
                consider(support, &mut best);
            }
        }
        SearchOrder::Pruned => {
            let inner: Vec<f64> = (0..cat.len())
                .map(|q| if cat.volume[q] > 0.0 { solver.solve(&[q], &|r| cat.rects[q].contains(&cat.rects[r])).0 } else { 0.0 })
                .collect();
            let mut ranked: Vec<(f64, usize)> = all
                .iter()
                .enumerate()
                .map(|(i, support)| {
                    let outside = |r: usize| support.iter().all(|&q| cat.rects[q].is_disjoint(&cat.rects[r]));
                    let (lb, _, _) = best_abs_union(&cat, &solver.mass, k, &outside);
                    let lb = support.iter().map(|&q| inner[q]).fold(lb, f64::max);
                    (lb, i)
                })
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (lb, i) in ranked {
                if lb >= best.0 {
                    break;
                }
                consider(&all[i], &mut best);
            }
        }
    }
    let (value, support, c) = best;
    let mut pieces: Vec<(DyadicRect, f64)> = support.iter().zip(&c).map(|(&q, &v)| (cat.rects[q].clone(), v)).collect();
    pieces.sort_by(|a, b| a.0.cmp(&b.0));
    let (cells, values) = pieces.into_iter().unzip();
    let hist = Histogram::partial_hierarchical(grid.clone(), cells, values)?;
    Ok(PartialOpt { value, hist, solved })
}

/// Squared ℓ2 error of the flattening of `g` over `r`, summed point by point
/// over the lattice.
fn flat_error(g: &EmpiricalDist, grid: &GridSpec, r: &DyadicRect) -> Result<(f64, f64)> {
    let rect = grid.rect_of(r);
    if grid.volume_of(r) == 0.0 {
        return Ok((0.0, 0.0));
    }
    let a = flatten(g, &rect)?;
    let ranges: Vec<(i64, i64)> =
        rect.sides().iter().map(|s| (libm::ceil(s.lo) as i64, libm::ceil(s.hi) as i64)).collect();
    let mut x: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut point = vec![0.0; x.len()];
    let mut err = 0.0;
    'outer: loop {
        for (p, &v) in point.iter_mut().zip(&x) {
            *p = v as f64;
        }
        let diff = g.mass_at(&point) - a;
        err += diff * diff;
        for axis in (0..x.len()).rev() {
            x[axis] += 1;
            if x[axis] < ranges[axis].1 {
                continue 'outer;
            }
            x[axis] = ranges[axis].0;
        }
        break;
    }
    Ok((err, a))
}

/// Best hierarchical histogram with at most `k` leaves in squared ℓ2.
#[derive(Debug, Clone, PartialEq)]
pub struct HierL2Opt {
    pub value: f64,
    pub hist: Histogram,
    /// Number of leaf sets enumerated.
    pub partitions: u64,
}

/// Minimum of `Σ_x (g(x) − h(x))²` over hierarchical histograms `h` on
/// `grid` with at most `k` leaves, by enumerating every such leaf set. Each
/// leaf takes the flattening of `g`, which is the best constant.
pub fn opt_hier_l2(g: &EmpiricalDist, grid: &GridSpec, k: usize, guard: &OracleGuard) -> Result<HierL2Opt> {
    if !g.domain().is_discrete() {
        bail!(UnsupportedDomain, "the l2 oracle needs a discrete domain");
    }
    if k == 0 {
        bail!(Argument, "k must be at least 1");
    }
    g.domain().ensure_same(grid.domain())?;
    let cat = Catalog::new(grid, guard)?;
    let mut err = Vec::with_capacity(cat.len());
    let mut flat = Vec::with_capacity(cat.len());
    for r in &cat.rects {
        let (e, a) = flat_error(g, grid, r)?;
        err.push(e);
        flat.push(a);
    }
    let mut count = 0u64;
    let sets = leaf_sets(&cat, 0, k, guard, &mut count)?;
    let mut best: Option<(f64, &Vec<usize>)> = None;
    for set in &sets {
        let v: f64 = set.iter().map(|&i| err[i]).sum();
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, set));
        }
    }
    let (value, set) = best.expect("the root alone is a leaf set");
    let mut leaves: Vec<usize> = set.clone();
    leaves.sort_by(|&a, &b| cat.rects[a].cmp(&cat.rects[b]));
    let hist = Histogram::hierarchical(
        grid.clone(),
        leaves.iter().map(|&i| cat.rects[i].clone()).collect(),
        leaves.iter().map(|&i| flat[i]).collect(),
    )?;
    Ok(HierL2Opt { value, hist, partitions: sets.len() as u64 })
}

/// Every leaf set of at most `budget` leaves of a subtree rooted at `node`.
fn leaf_sets(cat: &Catalog, node: usize, budget: usize, guard: &OracleGuard, count: &mut u64) -> Result<Vec<Vec<usize>>> {
    let mut out = vec![vec![node]];
    let kids = &cat.children[node];
    if !kids.is_empty() && budget >= kids.len() {
        // combine the children one at a time, each taking at least one leaf
        let mut partial: Vec<Vec<usize>> = vec![Vec::new()];
        for (pos, &c) in kids.iter().enumerate() {
            let later = kids.len() - pos - 1;
            let mut next = Vec::new();
            for prefix in &partial {
                let room = budget - prefix.len() - later;
                for set in leaf_sets(cat, c, room, guard, count)? {
                    let mut joined = prefix.clone();
                    joined.extend(set);
                    next.push(joined);
                    *count += 1;
                    if *count > guard.max_partitions {
                        return Err(Error::OracleTooLarge {
                            what: "partitions",
                            limit: guard.max_partitions,
                            needed: *count,
                        });
                    }
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    Ok(out)
}
