//! Sample-size formulas and structural conversions between histogram kinds.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::geometry::{DomainKind, DyadicRect, GridSpec};
use crate::histogram::{HistKind, Histogram, Piece};

/// Which learner a sample budget is planned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulaId {
    FixedGridL1,
    AdaptiveL1,
    L2,
}

/// A planned sample size together with the inputs that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBudget {
    pub n: u64,
    pub formula: FormulaId,
    pub k: usize,
    pub dim: usize,
    pub domain: DomainKind,
    pub eps: f64,
    pub delta: f64,
    pub xi: f64,
    pub c: f64,
}

/// `⌈x⌉`, except that values within relative `1e-9` of an integer round to
/// it, so exact arithmetic like `513 / 0.01` is not pushed up by one ulp.
fn snapped_ceil(x: f64) -> f64 {
    let r = libm::round(x);
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r
    } else {
        libm::ceil(x)
    }
}

/// `log2 x`, clamped below at 1.
fn log2_at_least_one(x: f64) -> f64 {
    libm::log2(x).max(1.0)
}

/// Samples sufficient (up to the constant `c`) for the given learner.
///
/// - `FixedGridL1`: `c ((1+ξ) 2^d k log^{d+1} m + ln(1/δ)) / ε²`
/// - `AdaptiveL1`: `c ((1+ξ) d 2^d k log^{d+2}(k/ε) + ln(1/δ)) / ε²`
/// - `L2`: `c ln(1/δ) / ε`
///
/// Grid logarithms are base 2 and clamped below at 1.
#[allow(clippy::too_many_arguments)]
pub fn sample_budget(
    formula: FormulaId,
    k: usize,
    dim: usize,
    domain: DomainKind,
    eps: f64,
    delta: f64,
    xi: f64,
    c: f64,
) -> Result<SampleBudget> {
    if !(eps > 0.0 && eps < 1.0) {
        bail!(Argument, "eps must lie in (0, 1), got {eps}");
    }
    if !(delta > 0.0 && delta < 1.0) {
        bail!(Argument, "delta must lie in (0, 1), got {delta}");
    }
    if k == 0 || dim == 0 {
        bail!(Argument, "k and d must be at least 1");
    }
    if !(xi > 0.0 && xi.is_finite()) {
        bail!(Argument, "xi must be positive, got {xi}");
    }
    if !(c > 0.0 && c.is_finite()) {
        bail!(Argument, "C must be positive, got {c}");
    }
    let conf = libm::log(1.0 / delta);
    let spread = (1.0 + xi) * (1u64 << dim) as f64 * k as f64;
    let raw = match formula {
        FormulaId::FixedGridL1 => {
            let DomainKind::Discrete { m } = domain else {
                bail!(Argument, "the fixed-grid budget needs a discrete domain size m");
            };
            let lg = log2_at_least_one(m as f64);
            c * (spread * libm::pow(lg, (dim + 1) as f64) + conf) / (eps * eps)
        }
        FormulaId::AdaptiveL1 => {
            let lg = log2_at_least_one(k as f64 / eps);
            c * (spread * dim as f64 * libm::pow(lg, (dim + 2) as f64) + conf) / (eps * eps)
        }
        FormulaId::L2 => c * conf / eps,
    };
    let n = snapped_ceil(raw).max(1.0);
    if !(n < u64::MAX as f64) {
        bail!(Argument, "sample budget {raw} does not fit in 64 bits");
    }
    Ok(SampleBudget { n: n as u64, formula, k, dim, domain, eps, delta, xi, c })
}

/// Visits the dyadic rectangles in the quadtree decomposition of the rank box
/// `[lo_i, hi_i)`: a node is emitted when it lies inside the box and split
/// otherwise.
fn decompose(node: DyadicRect, lo: &[usize], hi: &[usize], out: &mut Vec<DyadicRect>) {
    let mut inside = true;
    for axis in 0..lo.len() {
        let (s, e) = node.span(axis);
        if e <= lo[axis] || s >= hi[axis] {
            return;
        }
        inside &= lo[axis] <= s && e <= hi[axis];
    }
    if inside {
        out.push(node);
    } else {
        for child in node.children() {
            decompose(child, lo, hi, out);
        }
    }
}

/// Dyadic cells of `grid` whose union is the rank box `[lo_i, hi_i)`.
pub fn dyadic_cover(grid: &GridSpec, lo: &[usize], hi: &[usize]) -> Vec<DyadicRect> {
    let mut out = Vec::new();
    if lo.iter().zip(hi).all(|(l, h)| l < h) {
        decompose(grid.root(), lo, hi, &mut out);
    }
    out
}

/// Rewrites a histogram whose piece vertices lie on grid boundaries as a
/// hierarchical (or partial hierarchical) histogram on `grid`.
///
/// Every piece is replaced by the maximal dyadic cells inside it, so the
/// function is unchanged. In one dimension a piece becomes at most
/// `2 log2 M` intervals.
pub fn to_hierarchical(h: &Histogram, grid: &GridSpec) -> Result<Histogram> {
    h.domain().ensure_same(grid.domain())?;
    let d = grid.dim();
    let mut cells = Vec::new();
    let mut pieces = Vec::new();
    for p in h.pieces() {
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for axis in 0..d {
            let side = p.rect.side(axis);
            let (Some(l), Some(u)) = (grid.rank_of_coordinate(axis, side.lo), grid.rank_of_coordinate(axis, side.hi))
            else {
                bail!(Structure, "piece side [{}, {}) on axis {axis} is not on the grid", side.lo, side.hi);
            };
            lo.push(l);
            hi.push(u);
        }
        for c in dyadic_cover(grid, &lo, &hi) {
            pieces.push(Piece { rect: grid.rect_of(&c), value: p.value });
            cells.push(c);
        }
    }
    let kind = match h.kind() {
        HistKind::Partial => HistKind::Partial,
        _ => HistKind::Hierarchical,
    };
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| cells[a].cmp(&cells[b]));
    let cells: Vec<DyadicRect> = order.iter().map(|&i| cells[i].clone()).collect();
    let values: Vec<f64> = order.iter().map(|&i| pieces[i].value).collect();
    match kind {
        HistKind::Partial => Histogram::partial_hierarchical(grid.clone(), cells, values),
        _ => Histogram::hierarchical(grid.clone(), cells, values),
    }
}

/// The set `{x : h(x) > g(x)}` as disjoint dyadic cells, for a partial
/// hierarchical `h` and a hierarchical `g` on the same grid.
///
/// Both cell families are laminar, so two overlapping cells meet in the
/// smaller one; the region is the union of those meets where `h` exceeds
/// `g`. With `k` pieces each there are at most `2k` of them.
pub fn strictly_greater_region(h: &Histogram, g: &Histogram) -> Result<Vec<DyadicRect>> {
    let (Some(lh), Some(lg)) = (h.layout(), g.layout()) else {
        bail!(Structure, "both histograms must be dyadic");
    };
    lh.grid.ensure_same(&lg.grid)?;
    if g.kind() != HistKind::Hierarchical {
        bail!(Structure, "the second histogram must cover the grid");
    }
    let mut out = Vec::new();
    for (ch, ph) in lh.cells.iter().zip(h.pieces()) {
        for (cg, pg) in lg.cells.iter().zip(g.pieces()) {
            if ch.is_disjoint(cg) || !(ph.value > pg.value) {
                continue;
            }
            out.push(if ch.level <= cg.level { ch.clone() } else { cg.clone() });
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, Rect};
    use crate::histogram::l1_dist;
    use alloc::vec;

    #[test]
    fn budget_golden_values() {
        let inv_e = libm::exp(-1.0);
        let b = sample_budget(FormulaId::FixedGridL1, 2, 1, DomainKind::Discrete { m: 256 }, 0.1, inv_e, 1.0, 1.0);
        assert_eq!(b.unwrap().n, 51_300);
        let b = sample_budget(FormulaId::L2, 1, 1, DomainKind::Unit, 0.01, inv_e, 1.0, 1.0).unwrap();
        assert_eq!(b.n, 100);
        // 2 * 4 * 2 * 1 * log2(20)^3 over 0.01, plus ln 2 / 0.01
        let b = sample_budget(FormulaId::AdaptiveL1, 2, 1, DomainKind::Unit, 0.1, 0.5, 1.0, 1.0).unwrap();
        let lg = libm::log2(20.0);
        let expect = (4.0 * 2.0 * lg * lg * lg + core::f64::consts::LN_2) / 0.01;
        assert_eq!(b.n, libm::ceil(expect) as u64);
    }

    #[test]
    fn budget_rejects_bad_ranges() {
        for (eps, delta) in [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0)] {
            assert!(sample_budget(FormulaId::L2, 1, 1, DomainKind::Unit, eps, delta, 1.0, 1.0).is_err());
        }
        assert!(sample_budget(FormulaId::FixedGridL1, 1, 1, DomainKind::Unit, 0.1, 0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn cover_of_ranks_one_to_seven() {
        let g = GridSpec::lattice(Domain::discrete(1, 8).unwrap()).unwrap();
        let c = dyadic_cover(&g, &[1], &[7]);
        let spans: Vec<(usize, usize)> = c.iter().map(|r| r.span(0)).collect();
        assert_eq!(spans, vec![(1, 2), (2, 4), (4, 6), (6, 7)]);
    }

    #[test]
    fn dyadic_piece_unchanged() {
        let dom = Domain::unit(2).unwrap();
        let g = GridSpec::uniform(dom, 4).unwrap();
        let h = Histogram::arbitrary(
            dom,
            vec![
                Piece { rect: Rect::from_bounds(&[(0.0, 0.5), (0.0, 1.0)]).unwrap(), value: 0.5 },
                Piece { rect: Rect::from_bounds(&[(0.5, 1.0), (0.0, 1.0)]).unwrap(), value: 1.5 },
            ],
        )
        .unwrap();
        let out = to_hierarchical(&h, &g).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(l1_dist(&h, &out).unwrap(), 0.0);
        let whole = Histogram::arbitrary(dom, vec![Piece { rect: dom.full_rect(), value: 1.0 }]).unwrap();
        assert_eq!(to_hierarchical(&whole, &g).unwrap().len(), 1);
    }

    #[test]
    fn off_grid_rejected() {
        let dom = Domain::unit(1).unwrap();
        let g = GridSpec::uniform(dom, 4).unwrap();
        let h = Histogram::arbitrary(
            dom,
            vec![
                Piece { rect: Rect::from_bounds(&[(0.0, 0.3)]).unwrap(), value: 1.0 },
                Piece { rect: Rect::from_bounds(&[(0.3, 1.0)]).unwrap(), value: 1.0 },
            ],
        )
        .unwrap();
        assert!(matches!(to_hierarchical(&h, &g), Err(crate::Error::Structure(_))));
    }

    #[test]
    fn greater_region_examples() {
        let dom = Domain::unit(1).unwrap();
        let g = GridSpec::uniform(dom, 4).unwrap();
        let uniform = Histogram::hierarchical(g.clone(), vec![g.root()], vec![0.5]).unwrap();
        assert!(strictly_greater_region(&uniform, &uniform).unwrap().is_empty());
        let left = DyadicRect::new(1, vec![0]);
        let h = Histogram::partial_hierarchical(g.clone(), vec![left.clone()], vec![1.0]).unwrap();
        assert_eq!(strictly_greater_region(&h, &uniform).unwrap(), vec![left]);
    }
}
