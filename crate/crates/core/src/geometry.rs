//! Domains, axis-aligned rectangles, grids and their dyadic decomposition.
//!
//! Discrete domains `[m]^d` are embedded in the real line by letting the
//! lattice point `x` occupy the unit cell `[x, x + 1)`, so a discrete axis is
//! the interval `[1, m + 1)` and the volume of a rectangle with integer
//! bounds is exactly its lattice-point count.
//!
//! Ownership is half-open everywhere: an interval `[lo, hi)` owns `lo` but
//! not `hi`. The single exception is the upper domain bound of the unit cube,
//! which is owned by the (non-degenerate) interval ending there.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{bail, Error, Result};

/// The kind of domain a distribution lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    /// Lattice `{1, ..., m}` on every axis.
    Discrete { m: u64 },
    /// The unit interval `[0, 1]` on every axis.
    Unit,
}

/// A `dim`-dimensional domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    dim: usize,
}

impl Domain {
    pub fn discrete(dim: usize, m: u64) -> Result<Self> {
        if dim == 0 {
            bail!(Argument, "dimension must be at least 1");
        }
        if m == 0 {
            bail!(Argument, "discrete domain requires m >= 1");
        }
        // Coordinates and volumes are carried as f64; keep every lattice
        // count exactly representable.
        if m >= (1u64 << 52) {
            bail!(Argument, "discrete side length {m} is too large");
        }
        Ok(Self { kind: DomainKind::Discrete { m }, dim })
    }

    pub fn unit(dim: usize) -> Result<Self> {
        if dim == 0 {
            bail!(Argument, "dimension must be at least 1");
        }
        Ok(Self { kind: DomainKind::Unit, dim })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, DomainKind::Discrete { .. })
    }

    /// Per-axis embedding bounds: `[1, m + 1)` or `[0, 1]`.
    pub fn axis_bounds(&self) -> (f64, f64) {
        match self.kind {
            DomainKind::Discrete { m } => (1.0, m as f64 + 1.0),
            DomainKind::Unit => (0.0, 1.0),
        }
    }

    pub fn full_rect(&self) -> Rect {
        let (lo, hi) = self.axis_bounds();
        Rect { sides: vec![Interval { lo, hi }; self.dim] }
    }

    pub fn volume(&self) -> f64 {
        self.full_rect().raw_volume(self)
    }

    /// Whether `x` is a legal sample point of this domain.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match self.kind {
            DomainKind::Discrete { m } => x
                .iter()
                .all(|&c| c.is_finite() && c == libm::floor(c) && c >= 1.0 && c <= m as f64),
            DomainKind::Unit => x.iter().all(|&c| (0.0..=1.0).contains(&c)),
        }
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            bail!(Configuration, "point has dimension {}, domain has {}", x.len(), self.dim);
        }
        if !self.contains_point(x) {
            bail!(DomainViolation, "point {:?} lies outside the domain", x);
        }
        Ok(())
    }

    pub fn contains_rect(&self, rect: &Rect) -> bool {
        let (lo, hi) = self.axis_bounds();
        rect.dim() == self.dim && rect.sides.iter().all(|s| s.lo >= lo && s.hi <= hi && s.lo <= s.hi)
    }

    pub fn check_rect(&self, rect: &Rect) -> Result<()> {
        if rect.dim() != self.dim {
            bail!(Configuration, "rectangle has dimension {}, domain has {}", rect.dim(), self.dim);
        }
        if !self.contains_rect(rect) {
            bail!(DomainViolation, "rectangle {:?} lies outside the domain", rect.sides);
        }
        Ok(())
    }

    pub(crate) fn ensure_same(&self, other: &Domain) -> Result<()> {
        if self != other {
            bail!(Configuration, "domain mismatch: {:?} vs {:?}", self, other);
        }
        Ok(())
    }
}

/// A half-open coordinate interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    /// Half-open ownership, closed at `top` when the interval ends there.
    #[inline]
    pub fn owns(&self, c: f64, top: f64) -> bool {
        self.lo <= c && (c < self.hi || (c == self.hi && self.hi == top && self.lo < self.hi))
    }
}

/// An axis-aligned rectangle given by per-axis intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    sides: Vec<Interval>,
}

impl Rect {
    pub fn new(sides: Vec<Interval>) -> Result<Self> {
        if sides.is_empty() {
            bail!(Argument, "rectangle needs at least one side");
        }
        for s in &sides {
            if !(s.lo.is_finite() && s.hi.is_finite()) || s.lo > s.hi {
                bail!(Argument, "invalid interval [{}, {})", s.lo, s.hi);
            }
        }
        Ok(Self { sides })
    }

    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self> {
        Self::new(bounds.iter().map(|&(lo, hi)| Interval { lo, hi }).collect())
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[Interval] {
        &self.sides
    }

    pub fn side(&self, axis: usize) -> Interval {
        self.sides[axis]
    }

    /// Measure without a domain check: lattice count for discrete domains,
    /// Lebesgue measure otherwise.
    pub(crate) fn raw_volume(&self, domain: &Domain) -> f64 {
        let mut v = 1.0;
        for s in &self.sides {
            let len = if domain.is_discrete() {
                (libm::ceil(s.hi) - libm::ceil(s.lo)).max(0.0)
            } else {
                s.len()
            };
            v *= len;
        }
        v
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        debug_assert_eq!(self.dim(), other.dim());
        let mut sides = Vec::with_capacity(self.dim());
        for (a, b) in self.sides.iter().zip(&other.sides) {
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if hi <= lo {
                return None;
            }
            sides.push(Interval { lo, hi });
        }
        Some(Rect { sides })
    }

    /// Whether `x` belongs to the rectangle, `top` being the domain's upper
    /// axis bound.
    #[inline]
    pub fn owns(&self, x: &[f64], top: f64) -> bool {
        self.sides.iter().zip(x).all(|(s, &c)| s.owns(c, top))
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.sides.iter().zip(&other.sides).all(|(a, b)| a.lo <= b.lo && b.hi <= a.hi)
    }
}

/// Measure of `rect`: lattice points for discrete domains, Lebesgue volume
/// for the unit cube.
pub fn volume(rect: &Rect, domain: &Domain) -> Result<f64> {
    domain.check_rect(rect)?;
    Ok(rect.raw_volume(domain))
}

/// A rectangle of a grid's dyadic decomposition.
///
/// In rank space it covers boundary indices `[2^level * j, 2^level * (j + 1))`
/// on every axis. The derived ordering is `(level, index)` lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DyadicRect {
    pub level: u32,
    pub index: Vec<u32>,
}

impl DyadicRect {
    pub fn new(level: u32, index: Vec<u32>) -> Self {
        Self { level, index }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// Rank span `[start, end)` on `axis`.
    #[inline]
    pub fn span(&self, axis: usize) -> (usize, usize) {
        let w = 1usize << self.level;
        let j = self.index[axis] as usize;
        (w * j, w * (j + 1))
    }

    /// The 2^d children, ordered by the child bit pattern (bit `i` = upper
    /// half on axis `i`).
    pub fn children(&self) -> Vec<DyadicRect> {
        assert!(self.level > 0, "level-0 rectangles have no children");
        let d = self.dim();
        (0..1usize << d).map(|bits| self.child(bits)).collect()
    }

    #[inline]
    pub fn child(&self, bits: usize) -> DyadicRect {
        let index = self
            .index
            .iter()
            .enumerate()
            .map(|(i, &j)| 2 * j + ((bits >> i) & 1) as u32)
            .collect();
        DyadicRect { level: self.level - 1, index }
    }

    pub fn parent(&self) -> DyadicRect {
        DyadicRect { level: self.level + 1, index: self.index.iter().map(|j| j / 2).collect() }
    }

    /// Whether `other` is `self` or one of its descendants.
    pub fn contains(&self, other: &DyadicRect) -> bool {
        if other.level > self.level {
            return false;
        }
        let shift = self.level - other.level;
        self.index.iter().zip(&other.index).all(|(&a, &b)| (b >> shift) == a)
    }

    /// Dyadic rectangles are laminar: disjoint unless one contains the other.
    pub fn is_disjoint(&self, other: &DyadicRect) -> bool {
        !(self.contains(other) || other.contains(self))
    }

    /// Whether the level-0 cell with the given ranks lies inside.
    #[inline]
    pub fn contains_cell(&self, ranks: &[u32]) -> bool {
        self.index.iter().zip(ranks).all(|(&j, &r)| (r >> self.level) == j)
    }

    /// Order used to rank leaves: larger first, then lexicographically
    /// smaller index.
    pub fn cmp_coarse_first(&self, other: &DyadicRect) -> Ordering {
        other.level.cmp(&self.level).then_with(|| self.index.cmp(&other.index))
    }
}

/// A product grid `P_1 x ... x P_d`: each axis carries `M + 1` non-decreasing
/// boundaries with `M = 2^L`, the first and last equal to the domain bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    domain: Domain,
    axes: Vec<Vec<f64>>,
    levels: u32,
}

impl GridSpec {
    pub fn new(domain: Domain, axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.len() != domain.dim() {
            bail!(Configuration, "grid has {} axes, domain has dimension {}", axes.len(), domain.dim());
        }
        let cells = axes[0].len().saturating_sub(1);
        if cells == 0 || !cells.is_power_of_two() {
            bail!(Structure, "grid cell count {} is not a positive power of two", cells);
        }
        let (lo, hi) = domain.axis_bounds();
        for (i, axis) in axes.iter().enumerate() {
            if axis.len() != cells + 1 {
                bail!(Structure, "axis {i} has {} boundaries, expected {}", axis.len(), cells + 1);
            }
            if axis[0] != lo || axis[cells] != hi {
                bail!(Structure, "axis {i} must start at {lo} and end at {hi}");
            }
            if axis.windows(2).any(|w| !(w[0] <= w[1])) {
                bail!(Structure, "axis {i} boundaries are not non-decreasing");
            }
            if domain.is_discrete() && axis.iter().any(|&b| b != libm::floor(b)) {
                bail!(Structure, "axis {i} of a discrete grid has non-integer boundaries");
            }
        }
        Ok(Self { domain, axes, levels: cells.trailing_zeros() })
    }

    /// Equal-width grid with `cells` cells per axis. For a discrete domain
    /// `cells` must divide `m`.
    pub fn uniform(domain: Domain, cells: usize) -> Result<Self> {
        if cells == 0 || !cells.is_power_of_two() {
            bail!(Argument, "cells per axis must be a power of two, got {cells}");
        }
        let axis: Vec<f64> = match domain.kind() {
            DomainKind::Discrete { m } => {
                if m % cells as u64 != 0 {
                    bail!(Argument, "cells per axis {cells} does not divide m = {m}");
                }
                let w = m / cells as u64;
                (0..=cells as u64).map(|j| (1 + j * w) as f64).collect()
            }
            DomainKind::Unit => (0..=cells).map(|j| j as f64 / cells as f64).collect(),
        };
        Self::new(domain, vec![axis; domain.dim()])
    }

    /// One cell per lattice point of a discrete domain, padded with
    /// zero-width cells at the top when `m` is not a power of two.
    pub fn lattice(domain: Domain) -> Result<Self> {
        let DomainKind::Discrete { m } = domain.kind() else {
            bail!(UnsupportedDomain, "lattice grids need a discrete domain");
        };
        let cells = (m as usize).next_power_of_two();
        let axis: Vec<f64> = (0..=cells).map(|j| (1 + (j as u64).min(m)) as f64).collect();
        Self::new(domain, vec![axis; domain.dim()])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Cells per axis (`M`).
    pub fn side(&self) -> usize {
        self.axes[0].len() - 1
    }

    /// Tree depth `L = log2 M`.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn axis(&self, i: usize) -> &[f64] {
        &self.axes[i]
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn root(&self) -> DyadicRect {
        DyadicRect { level: self.levels, index: vec![0; self.dim()] }
    }

    pub fn is_member(&self, r: &DyadicRect) -> bool {
        r.dim() == self.dim()
            && r.level <= self.levels
            && r.index.iter().all(|&j| (j as usize) < (self.side() >> r.level))
    }

    pub fn check_member(&self, r: &DyadicRect) -> Result<()> {
        if !self.is_member(r) {
            bail!(Structure, "{:?} is not a dyadic rectangle of this grid", r);
        }
        Ok(())
    }

    /// Rank of the cell owning coordinate `c` on `axis`: the last boundary
    /// index `j < M` with `b_j <= c`.
    #[inline]
    pub fn cell_of(&self, axis: usize, c: f64) -> u32 {
        let b = &self.axes[axis];
        let j = b.partition_point(|&x| x <= c);
        (j.saturating_sub(1)).min(self.side() - 1) as u32
    }

    pub fn cells_of(&self, x: &[f64]) -> Vec<u32> {
        x.iter().enumerate().map(|(i, &c)| self.cell_of(i, c)).collect()
    }

    pub fn rect_of(&self, r: &DyadicRect) -> Rect {
        let sides = (0..self.dim())
            .map(|i| {
                let (s, e) = r.span(i);
                Interval { lo: self.axes[i][s], hi: self.axes[i][e] }
            })
            .collect();
        Rect { sides }
    }

    #[inline]
    pub fn volume_of(&self, r: &DyadicRect) -> f64 {
        let mut v = 1.0;
        for i in 0..self.dim() {
            let (s, e) = r.span(i);
            v *= self.axes[i][e] - self.axes[i][s];
        }
        v
    }

    /// Boundary index of coordinate `c` on `axis` when used as a lower or
    /// upper rectangle bound: the first index carrying `c`, or `M` for the
    /// domain's upper bound.
    pub fn rank_of_coordinate(&self, axis: usize, c: f64) -> Option<usize> {
        let b = &self.axes[axis];
        if c == b[b.len() - 1] {
            return Some(b.len() - 1);
        }
        let j = b.partition_point(|&x| x < c);
        (j < b.len() && b[j] == c).then_some(j)
    }

    /// Number of dyadic rectangles contained in `r`, including `r`.
    pub fn count_descendants(&self, r: &DyadicRect) -> u64 {
        let d = self.dim() as u32;
        (0..=r.level).map(|l| 1u64 << ((r.level - l) * d)).sum()
    }

    /// Every dyadic rectangle inside `r`, from `r` down to level 0, each level
    /// in lexicographic index order.
    pub fn descendants(&self, r: &DyadicRect) -> Vec<DyadicRect> {
        let d = self.dim();
        let mut out = Vec::new();
        for level in (0..=r.level).rev() {
            let per_axis = 1u32 << (r.level - level);
            let base: Vec<u32> = r.index.iter().map(|&j| j * per_axis).collect();
            let total = (per_axis as u64).pow(d as u32);
            for flat in 0..total {
                let mut rem = flat;
                let mut index = vec![0u32; d];
                for i in (0..d).rev() {
                    index[i] = base[i] + (rem % per_axis as u64) as u32;
                    rem /= per_axis as u64;
                }
                out.push(DyadicRect { level, index });
            }
        }
        out
    }

    pub(crate) fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::Configuration(format!(
                "grid mismatch: {} vs {} cells per axis",
                self.side(),
                other.side()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes() {
        let d1 = Domain::discrete(1, 4).unwrap();
        assert_eq!(volume(&d1.full_rect(), &d1).unwrap(), 4.0);
        let u2 = Domain::unit(2).unwrap();
        let r = Rect::from_bounds(&[(0.25, 0.75), (0.0, 0.5)]).unwrap();
        assert_eq!(volume(&r, &u2).unwrap(), 0.25);
        // lattice box {2..3} x {1..4} in [4]^2
        let d2 = Domain::discrete(2, 4).unwrap();
        let r = Rect::from_bounds(&[(2.0, 4.0), (1.0, 5.0)]).unwrap();
        let brute = (1..=4)
            .flat_map(|x| (1..=4).map(move |y| (x, y)))
            .filter(|&(x, y)| (2..=3).contains(&x) && (1..=4).contains(&y))
            .count();
        assert_eq!(volume(&r, &d2).unwrap(), brute as f64);
        let outside = Rect::from_bounds(&[(0.0, 2.0), (1.0, 2.0)]).unwrap();
        assert!(matches!(volume(&outside, &d2), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn children_partition_parent() {
        let dom = Domain::discrete(2, 8).unwrap();
        let grid = GridSpec::lattice(dom).unwrap();
        let r = DyadicRect::new(2, vec![1, 0]);
        let kids = r.children();
        assert_eq!(kids.len(), 4);
        let total: f64 = kids.iter().map(|c| grid.volume_of(c)).sum();
        assert_eq!(total, grid.volume_of(&r));
        for (a, ka) in kids.iter().enumerate() {
            assert_eq!(ka.parent(), r);
            assert!(r.contains(ka));
            for kb in &kids[a + 1..] {
                assert!(ka.is_disjoint(kb));
            }
        }
    }

    #[test]
    fn lattice_padding_and_cells() {
        let dom = Domain::discrete(1, 5).unwrap();
        let grid = GridSpec::lattice(dom).unwrap();
        assert_eq!(grid.side(), 8);
        assert_eq!(grid.axis(0), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 6.0, 6.0, 6.0]);
        assert_eq!(grid.cell_of(0, 5.0), 4);
        assert_eq!(grid.cell_of(0, 1.0), 0);
        assert_eq!(grid.volume_of(&DyadicRect::new(1, vec![3])), 0.0);
    }

    #[test]
    fn duplicate_boundaries_own_by_last_rank() {
        let dom = Domain::unit(1).unwrap();
        let err = GridSpec::new(dom, vec![vec![0.0, 0.3, 0.2, 1.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
        let grid = GridSpec::new(dom, vec![vec![0.0, 0.3, 0.3, 0.3, 1.0]]).unwrap();
        assert_eq!(grid.cell_of(0, 0.3), 3);
        assert_eq!(grid.cell_of(0, 1.0), 3);
        assert_eq!(grid.cell_of(0, 0.1), 0);
        assert_eq!(grid.rank_of_coordinate(0, 0.3), Some(1));
        assert_eq!(grid.rank_of_coordinate(0, 1.0), Some(4));
        assert_eq!(grid.rank_of_coordinate(0, 0.5), None);
    }

    #[test]
    fn descendants_are_counted() {
        let grid = GridSpec::uniform(Domain::unit(2).unwrap(), 8).unwrap();
        let all = grid.descendants(&grid.root());
        assert_eq!(all.len() as u64, grid.count_descendants(&grid.root()));
        assert_eq!(all.len(), 64 + 16 + 4 + 1);
        assert!(all.iter().all(|r| grid.is_member(r)));
    }

    #[test]
    fn unit_top_is_closed() {
        let r = Rect::from_bounds(&[(0.5, 1.0)]).unwrap();
        assert!(r.owns(&[1.0], 1.0));
        assert!(!r.owns(&[1.0], 2.0));
        let empty = Rect::from_bounds(&[(1.0, 1.0)]).unwrap();
        assert!(!empty.owns(&[1.0], 1.0));
    }
}
