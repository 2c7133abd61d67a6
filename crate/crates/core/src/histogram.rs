//! Piecewise-constant hypotheses and exact histogram algebra.

use alloc::vec::Vec;

use crate::empirical::EmpiricalDist;
use crate::error::{bail, Error, Result};
use crate::geometry::{Domain, DyadicRect, GridSpec, Rect};

/// One constant piece: `value` is a density per unit volume (per lattice
/// point on discrete domains).
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub rect: Rect,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistKind {
    /// Disjoint pieces covering the domain.
    Arbitrary,
    /// Dyadic pieces of a grid covering the domain.
    Hierarchical,
    /// Disjoint pieces; the uncovered region has value zero.
    Partial,
}

/// Dyadic cells backing the pieces of a hierarchical or partial-hierarchical
/// histogram; `cells[i]` is the cell of piece `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicLayout {
    pub grid: GridSpec,
    pub cells: Vec<DyadicRect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    domain: Domain,
    pieces: Vec<Piece>,
    kind: HistKind,
    layout: Option<DyadicLayout>,
}

fn check_disjoint(pieces: &[Piece], domain: &Domain) -> Result<()> {
    for (i, a) in pieces.iter().enumerate() {
        for b in &pieces[i + 1..] {
            if let Some(x) = a.rect.intersect(&b.rect) {
                if x.raw_volume(domain) > 0.0 {
                    bail!(Structure, "pieces {:?} and {:?} overlap", a.rect, b.rect);
                }
            }
        }
    }
    Ok(())
}

fn check_values(pieces: &[Piece]) -> Result<()> {
    if let Some(p) = pieces.iter().find(|p| !(p.value.is_finite() && p.value >= 0.0)) {
        bail!(Argument, "piece value {} is not a finite nonnegative density", p.value);
    }
    Ok(())
}

impl Histogram {
    /// A histogram whose pieces partition the domain.
    pub fn arbitrary(domain: Domain, pieces: Vec<Piece>) -> Result<Self> {
        Self::checked(domain, pieces, HistKind::Arbitrary)
    }

    /// A histogram supported on disjoint pieces, zero elsewhere.
    pub fn partial(domain: Domain, pieces: Vec<Piece>) -> Result<Self> {
        Self::checked(domain, pieces, HistKind::Partial)
    }

    fn checked(domain: Domain, pieces: Vec<Piece>, kind: HistKind) -> Result<Self> {
        for p in &pieces {
            domain.check_rect(&p.rect)?;
        }
        check_values(&pieces)?;
        check_disjoint(&pieces, &domain)?;
        if kind != HistKind::Partial {
            let covered: f64 = pieces.iter().map(|p| p.rect.raw_volume(&domain)).sum();
            let total = domain.volume();
            if (covered - total).abs() > 1e-9 * total {
                bail!(Structure, "pieces cover volume {covered}, domain has {total}");
            }
        }
        Ok(Self { domain, pieces, kind, layout: None })
    }

    /// A hierarchical histogram: `cells` must partition the grid.
    pub fn hierarchical(grid: GridSpec, cells: Vec<DyadicRect>, values: Vec<f64>) -> Result<Self> {
        Self::dyadic(grid, cells, values, HistKind::Hierarchical)
    }

    /// A partial hierarchical histogram on pairwise disjoint dyadic cells.
    pub fn partial_hierarchical(grid: GridSpec, cells: Vec<DyadicRect>, values: Vec<f64>) -> Result<Self> {
        Self::dyadic(grid, cells, values, HistKind::Partial)
    }

    fn dyadic(grid: GridSpec, cells: Vec<DyadicRect>, values: Vec<f64>, kind: HistKind) -> Result<Self> {
        if cells.len() != values.len() {
            bail!(Argument, "{} cells but {} values", cells.len(), values.len());
        }
        for c in &cells {
            grid.check_member(c)?;
        }
        let mut sorted: Vec<&DyadicRect> = cells.iter().collect();
        sorted.sort();
        for (i, a) in sorted.iter().enumerate() {
            for b in &sorted[i + 1..] {
                if !a.is_disjoint(b) {
                    bail!(Structure, "dyadic cells {:?} and {:?} overlap", a, b);
                }
            }
        }
        if kind == HistKind::Hierarchical {
            // Disjoint cells partition the grid iff their level-0 cell counts add up.
            let d = grid.dim() as u32;
            let covered: u128 = cells.iter().map(|c| 1u128 << (c.level * d)).sum();
            let total = 1u128 << (grid.levels() * d);
            if covered != total {
                bail!(Structure, "dyadic cells do not partition the grid");
            }
        }
        let pieces: Vec<Piece> = cells
            .iter()
            .zip(&values)
            .map(|(c, &value)| Piece { rect: grid.rect_of(c), value })
            .collect();
        check_values(&pieces)?;
        Ok(Self::from_parts_unchecked(grid, cells, pieces, kind))
    }

    pub(crate) fn from_parts_unchecked(
        grid: GridSpec,
        cells: Vec<DyadicRect>,
        pieces: Vec<Piece>,
        kind: HistKind,
    ) -> Self {
        Self { domain: *grid.domain(), pieces, kind, layout: Some(DyadicLayout { grid, cells }) }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn kind(&self) -> HistKind {
        self.kind
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn layout(&self) -> Option<&DyadicLayout> {
        self.layout.as_ref()
    }

    /// `Σ value × volume` over the pieces.
    pub fn total_mass(&self) -> f64 {
        self.pieces.iter().map(|p| p.value * p.rect.raw_volume(&self.domain)).sum()
    }

    /// Value at `x`; zero where a partial histogram is uncovered.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.domain.check_point(x)?;
        Ok(self.value_at(x))
    }

    pub(crate) fn value_at(&self, x: &[f64]) -> f64 {
        let top = self.domain.axis_bounds().1;
        self.pieces.iter().find(|p| p.rect.owns(x, top)).map_or(0.0, |p| p.value)
    }

    /// All values multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Histogram {
        let mut out = self.clone();
        for p in &mut out.pieces {
            p.value *= factor;
        }
        out
    }
}

/// Either side of a mass comparison.
#[derive(Debug, Clone, Copy)]
pub enum MassFn<'a> {
    Empirical(&'a EmpiricalDist),
    Hist(&'a Histogram),
}

impl<'a> From<&'a EmpiricalDist> for MassFn<'a> {
    fn from(e: &'a EmpiricalDist) -> Self {
        MassFn::Empirical(e)
    }
}

impl<'a> From<&'a Histogram> for MassFn<'a> {
    fn from(h: &'a Histogram) -> Self {
        MassFn::Hist(h)
    }
}

impl MassFn<'_> {
    pub fn domain(&self) -> &Domain {
        match self {
            MassFn::Empirical(e) => e.domain(),
            MassFn::Hist(h) => h.domain(),
        }
    }

    pub(crate) fn raw_mass(&self, rect: &Rect) -> f64 {
        match self {
            MassFn::Empirical(e) => e.count_in(rect) as f64 / e.n() as f64,
            MassFn::Hist(h) => h
                .pieces
                .iter()
                .filter_map(|p| p.rect.intersect(rect).map(|x| p.value * x.raw_volume(&h.domain)))
                .sum(),
        }
    }
}

/// Mass of `g` over `rect`: owned sample count / n, or `Σ value × overlap`.
pub fn mass<'a>(g: impl Into<MassFn<'a>>, rect: &Rect) -> Result<f64> {
    let g = g.into();
    g.domain().check_rect(rect)?;
    Ok(g.raw_mass(rect))
}

/// Flattening of `g` over `rect`: its mass divided by the volume.
pub fn flatten<'a>(g: impl Into<MassFn<'a>>, rect: &Rect) -> Result<f64> {
    let g = g.into();
    let domain = *g.domain();
    domain.check_rect(rect)?;
    let vol = rect.raw_volume(&domain);
    if vol <= 0.0 {
        bail!(DegenerateRegion, "cannot flatten over zero-volume region {:?}", rect.sides());
    }
    Ok(g.raw_mass(rect) / vol)
}

/// Overlay of two piece sets: `f(v1, v2, volume)` over every cell of the
/// common refinement, including the parts covered by only one side (where the
/// other contributes zero).
fn overlay(h1: &Histogram, h2: &Histogram, mut f: impl FnMut(f64, f64, f64)) {
    let dom = &h1.domain;
    let mut covered2 = alloc::vec![0.0; h2.pieces.len()];
    for p in &h1.pieces {
        let vol_p = p.rect.raw_volume(dom);
        let mut covered = 0.0;
        for (j, q) in h2.pieces.iter().enumerate() {
            if let Some(x) = p.rect.intersect(&q.rect) {
                let v = x.raw_volume(dom);
                if v > 0.0 {
                    f(p.value, q.value, v);
                    covered += v;
                    covered2[j] += v;
                }
            }
        }
        let rest = vol_p - covered;
        if rest > 1e-12 * vol_p.max(1.0) {
            f(p.value, 0.0, rest);
        }
    }
    for (q, cov) in h2.pieces.iter().zip(covered2) {
        let vol_q = q.rect.raw_volume(dom);
        let rest = vol_q - cov;
        if rest > 1e-12 * vol_q.max(1.0) {
            f(0.0, q.value, rest);
        }
    }
}

/// Exact ℓ1 distance between two histograms on the same domain.
pub fn l1_dist(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    h1.domain.ensure_same(&h2.domain)?;
    let mut total = 0.0;
    overlay(h1, h2, |a, b, v| total += (a - b).abs() * v);
    Ok(total)
}

fn l2_hist_empirical(h: &Histogram, e: &EmpiricalDist) -> f64 {
    let mut total: f64 = h.pieces.iter().map(|p| p.value * p.value * p.rect.raw_volume(&h.domain)).sum();
    for (i, (x, _)) in e.iter().enumerate() {
        let hv = h.value_at(x);
        let g = e.point_mass(i);
        total += (hv - g) * (hv - g) - hv * hv;
    }
    total.max(0.0)
}

fn l2_empirical_empirical(a: &EmpiricalDist, b: &EmpiricalDist) -> f64 {
    let mut total = 0.0;
    for (i, (x, _)) in a.iter().enumerate() {
        let d = a.point_mass(i) - b.mass_at(x);
        total += d * d;
    }
    for (i, (x, _)) in b.iter().enumerate() {
        if a.mass_at(x) == 0.0 {
            let d = b.point_mass(i);
            total += d * d;
        }
    }
    total
}

/// Squared ℓ2 distance `Σ_x (g1(x) − g2(x))²` over a discrete domain, with
/// histogram values read as per-point masses.
pub fn l2_sq_dist<'a, 'b>(g1: impl Into<MassFn<'a>>, g2: impl Into<MassFn<'b>>) -> Result<f64> {
    let (g1, g2) = (g1.into(), g2.into());
    g1.domain().ensure_same(g2.domain())?;
    if !g1.domain().is_discrete() {
        bail!(UnsupportedDomain, "squared ℓ2 distance is only defined on discrete domains");
    }
    Ok(match (g1, g2) {
        (MassFn::Hist(a), MassFn::Hist(b)) => {
            let mut total = 0.0;
            overlay(a, b, |x, y, v| total += (x - y) * (x - y) * v);
            total
        }
        (MassFn::Hist(h), MassFn::Empirical(e)) | (MassFn::Empirical(e), MassFn::Hist(h)) => {
            l2_hist_empirical(h, e)
        }
        (MassFn::Empirical(a), MassFn::Empirical(b)) => l2_empirical_empirical(a, b),
    })
}

/// Scales `h` to integrate to one; returns the scaled histogram and the
/// factor applied.
pub fn renormalize(h: &Histogram) -> Result<(Histogram, f64)> {
    let total = h.total_mass();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateRegion(alloc::format!("cannot renormalize total mass {total}")));
    }
    let factor = 1.0 / total;
    Ok((h.scaled(factor), factor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Interval;
    use alloc::vec;

    fn unit1(pieces: &[(f64, f64, f64)]) -> Histogram {
        let dom = Domain::unit(1).unwrap();
        Histogram::arbitrary(
            dom,
            pieces
                .iter()
                .map(|&(lo, hi, value)| Piece { rect: Rect::new(vec![Interval::new(lo, hi)]).unwrap(), value })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn eval_and_partial() {
        let h = unit1(&[(0.0, 0.5, 0.4), (0.5, 1.0, 1.6)]);
        assert_eq!(h.eval(&[0.25]).unwrap(), 0.4);
        assert_eq!(h.eval(&[0.5]).unwrap(), 1.6);
        assert_eq!(h.eval(&[1.0]).unwrap(), 1.6);
        assert!(h.eval(&[1.5]).is_err());
        let dom = Domain::unit(1).unwrap();
        let p = Histogram::partial(dom, vec![Piece { rect: Rect::from_bounds(&[(0.0, 0.5)]).unwrap(), value: 2.0 }])
            .unwrap();
        assert_eq!(p.eval(&[0.75]).unwrap(), 0.0);
        assert_eq!(p.eval(&[0.25]).unwrap(), 2.0);
    }

    #[test]
    fn l1_examples() {
        let uniform = unit1(&[(0.0, 1.0, 1.0)]);
        let two = unit1(&[(0.0, 0.5, 2.0), (0.5, 1.0, 0.0)]);
        assert_eq!(l1_dist(&uniform, &uniform).unwrap(), 0.0);
        assert_eq!(l1_dist(&uniform, &two).unwrap(), 1.0);
        let dom = Domain::unit(1).unwrap();
        let w = 1e-6;
        let a = Histogram::partial(dom, vec![Piece { rect: Rect::from_bounds(&[(0.1, 0.1 + w)]).unwrap(), value: 1.0 / w }]).unwrap();
        let b = Histogram::partial(dom, vec![Piece { rect: Rect::from_bounds(&[(0.7, 0.7 + w)]).unwrap(), value: 1.0 / w }]).unwrap();
        assert!((l1_dist(&a, &b).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn l2_examples() {
        let dom = Domain::discrete(1, 2).unwrap();
        let skew = Histogram::arbitrary(
            dom,
            vec![
                Piece { rect: Rect::from_bounds(&[(1.0, 2.0)]).unwrap(), value: 0.75 },
                Piece { rect: Rect::from_bounds(&[(2.0, 3.0)]).unwrap(), value: 0.25 },
            ],
        )
        .unwrap();
        let flat = Histogram::arbitrary(dom, vec![Piece { rect: dom.full_rect(), value: 0.5 }]).unwrap();
        assert_eq!(l2_sq_dist(&skew, &flat).unwrap(), 0.125);
        assert_eq!(l2_sq_dist(&flat, &flat).unwrap(), 0.0);
        let pts: [&[f64]; 1] = [&[1.0]];
        let e = EmpiricalDist::from_points(dom, pts).unwrap();
        assert_eq!(l2_sq_dist(&e, &flat).unwrap(), 0.5);
        assert_eq!(l2_sq_dist(&flat, &e).unwrap(), 0.5);
        assert_eq!(l2_sq_dist(&e, &e).unwrap(), 0.0);
        let u = Domain::unit(1).unwrap();
        let hu = unit1(&[(0.0, 1.0, 1.0)]);
        assert!(matches!(l2_sq_dist(&hu, &hu), Err(Error::UnsupportedDomain(_))));
        let _ = u;
    }

    #[test]
    fn mass_and_flatten() {
        let dom = Domain::discrete(1, 4).unwrap();
        let pts: [&[f64]; 4] = [&[1.0], &[1.0], &[2.0], &[4.0]];
        let e = EmpiricalDist::from_points(dom, pts).unwrap();
        assert_eq!(mass(&e, &dom.full_rect()).unwrap(), 1.0);
        assert_eq!(mass(&e, &Rect::from_bounds(&[(1.0, 3.0)]).unwrap()).unwrap(), 0.75);
        assert_eq!(flatten(&e, &Rect::from_bounds(&[(3.0, 4.0)]).unwrap()).unwrap(), 0.0);
        let one: [&[f64]; 1] = [&[2.0]];
        let e1 = EmpiricalDist::from_points(dom, one).unwrap();
        assert_eq!(flatten(&e1, &dom.full_rect()).unwrap(), 0.25);
        let h = unit1(&[(0.0, 0.5, 2.0), (0.5, 1.0, 0.0)]);
        assert_eq!(mass(&h, &Rect::from_bounds(&[(0.0, 0.25)]).unwrap()).unwrap(), 0.5);
        assert_eq!(flatten(&h, &Rect::from_bounds(&[(0.0, 0.5)]).unwrap()).unwrap(), 2.0);
        assert!(matches!(
            flatten(&h, &Rect::from_bounds(&[(0.5, 0.5)]).unwrap()),
            Err(Error::DegenerateRegion(_))
        ));
    }

    #[test]
    fn renormalize_scales() {
        let h = unit1(&[(0.0, 0.5, 2.0), (0.5, 1.0, 2.0)]);
        let (r, f) = renormalize(&h).unwrap();
        assert_eq!(f, 0.5);
        assert_eq!(r.total_mass(), 1.0);
        let (same, f1) = renormalize(&r).unwrap();
        assert_eq!(f1, 1.0);
        assert_eq!(same, r);
        let z = unit1(&[(0.0, 1.0, 0.0)]);
        assert!(renormalize(&z).is_err());
    }

    #[test]
    fn rejects_overlap_and_gaps() {
        let dom = Domain::unit(1).unwrap();
        let r = |lo, hi| Rect::from_bounds(&[(lo, hi)]).unwrap();
        assert!(Histogram::arbitrary(dom, vec![Piece { rect: r(0.0, 0.6), value: 1.0 }, Piece { rect: r(0.5, 1.0), value: 1.0 }]).is_err());
        assert!(Histogram::arbitrary(dom, vec![Piece { rect: r(0.0, 0.5), value: 1.0 }]).is_err());
        assert!(Histogram::arbitrary(dom, vec![Piece { rect: r(0.0, 1.0), value: -1.0 }]).is_err());
    }
}
