use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{bail, Error, Result};
use crate::geometry::{Domain, Rect};

/// A weighted multiset of sample points with total mass 1.
///
/// Points are stored once per distinct location, sorted lexicographically,
/// with an integer multiplicity. The mass of a point is `count / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    domain: Domain,
    coords: Vec<f64>,
    counts: Vec<u64>,
    n: u64,
}

fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

impl EmpiricalDist {
    /// Aggregates raw samples (each with multiplicity one).
    pub fn from_points<'a, I>(domain: Domain, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        Self::from_weighted(domain, points.into_iter().map(|p| (p, 1)))
    }

    /// Aggregates `(point, count)` pairs; duplicates are merged.
    pub fn from_weighted<'a, I>(domain: Domain, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], u64)>,
    {
        let d = domain.dim();
        let mut flat: Vec<f64> = Vec::new();
        let mut weights: Vec<u64> = Vec::new();
        for (p, c) in points {
            domain.check_point(p)?;
            if c == 0 {
                bail!(Argument, "sample counts must be positive");
            }
            // -0.0 and 0.0 are the same location
            flat.extend(p.iter().map(|&v| v + 0.0));
            weights.push(c);
        }
        if weights.is_empty() {
            bail!(Argument, "an empirical distribution needs at least one sample");
        }
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| cmp_points(&flat[a * d..(a + 1) * d], &flat[b * d..(b + 1) * d]));
        let mut coords = Vec::with_capacity(flat.len());
        let mut counts: Vec<u64> = Vec::with_capacity(weights.len());
        let mut n: u64 = 0;
        let mut last: Option<usize> = None;
        for i in order {
            let c = weights[i];
            n = n.checked_add(c).ok_or_else(|| Error::Argument("sample count overflow".into()))?;
            let p = &flat[i * d..(i + 1) * d];
            if last.is_some_and(|q| flat[q * d..(q + 1) * d] == *p) {
                *counts.last_mut().unwrap() += c;
            } else {
                coords.extend_from_slice(p);
                counts.push(c);
                last = Some(i);
            }
        }
        Ok(Self { domain, coords, counts, n })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Total number of samples.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of distinct support points.
    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn count(&self, i: usize) -> u64 {
        self.counts[i]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn point_mass(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.n as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], u64)> + '_ {
        self.coords.chunks_exact(self.dim()).zip(self.counts.iter().copied())
    }

    /// Sample count owned by `rect`.
    pub fn count_in(&self, rect: &Rect) -> u64 {
        let top = self.domain.axis_bounds().1;
        self.iter().filter(|(p, _)| rect.owns(p, top)).map(|(_, c)| c).sum()
    }

    /// Mass (`count / n`) of the point at `x`, zero if `x` is not in the support.
    pub fn mass_at(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut lo = 0usize;
        let mut hi = self.counts.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            match cmp_points(&self.coords[mid * d..(mid + 1) * d], x) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return self.point_mass(mid),
            }
        }
        0.0
    }
}
