//! Seeded synthetic ground truths and sampling.

use khist_core::{renormalize, Domain, EmpiricalDist, Histogram, Piece, Rect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random `k`-piece density built by guillotine cuts.
///
/// Each cut splits a random piece along a random axis, in the middle half of
/// its side (at a lattice boundary on discrete domains). Piece weights are
/// drawn from `[0.2, 1)` and the result is normalized to mass 1.
pub fn gen_truth(k: usize, domain: Domain, seed: u64) -> Result<Histogram> {
    if k == 0 {
        return Err(CliError::Config("k must be at least 1".into()));
    }
    let mut rng = rng(seed);
    let full = domain.full_rect();
    let mut boxes: Vec<Vec<(f64, f64)>> = vec![full.sides().iter().map(|s| (s.lo, s.hi)).collect()];
    let cuttable = |b: &[(f64, f64)], axis: usize| !domain.is_discrete() || b[axis].1 - b[axis].0 >= 2.0;
    for _ in 1..k {
        let options: Vec<(usize, usize)> = (0..boxes.len())
            .flat_map(|i| (0..domain.dim()).map(move |a| (i, a)))
            .filter(|&(i, a)| cuttable(&boxes[i], a))
            .collect();
        if options.is_empty() {
            return Err(CliError::Config(format!("the domain cannot hold {k} pieces")));
        }
        let (i, axis) = options[rng.random_range(0..options.len())];
        let (lo, hi) = boxes[i][axis];
        let cut = if domain.is_discrete() {
            let (a, b) = (lo as u64, hi as u64);
            let span = b - a;
            let inner_lo = a + (span / 4).max(1);
            let inner_hi = (b - span / 4).min(b - 1).max(inner_lo);
            rng.random_range(inner_lo..=inner_hi) as f64
        } else {
            lo + (hi - lo) * rng.random_range(0.25..0.75)
        };
        let mut other = boxes[i].clone();
        boxes[i][axis].1 = cut;
        other[axis].0 = cut;
        boxes.push(other);
    }
    let pieces = boxes
        .into_iter()
        .map(|b| Ok(Piece { rect: Rect::from_bounds(&b)?, value: rng.random_range(0.2..1.0) }))
        .collect::<Result<Vec<_>>>()?;
    let h = Histogram::arbitrary(domain, pieces)?;
    Ok(renormalize(&h)?.0)
}

/// `n` independent draws from the density `h`.
///
/// A piece is picked by inverse CDF over piece masses, then a point uniformly
/// inside it (a uniform lattice point on discrete domains).
pub fn draw(h: &Histogram, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(CliError::Config("the sample size must be positive".into()));
    }
    let total = h.total_mass();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CliError::Config(format!("cannot sample from a hypothesis of total mass {total}")));
    }
    let domain = h.domain();
    let mut cdf = Vec::with_capacity(h.len());
    let mut acc = 0.0;
    for p in h.pieces() {
        acc += p.value * khist_core::volume(&p.rect, domain)?;
        cdf.push(acc);
    }
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.random_range(0.0..acc);
        let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let rect = &h.pieces()[i].rect;
        let point = rect
            .sides()
            .iter()
            .map(|s| {
                if domain.is_discrete() {
                    rng.random_range(s.lo.ceil() as u64..s.hi.ceil() as u64) as f64
                } else {
                    rng.random_range(s.lo..s.hi)
                }
            })
            .collect();
        out.push(point);
    }
    Ok(out)
}

/// Empirical distribution of [`draw`].
pub fn sample_from(h: &Histogram, n: usize, seed: u64) -> Result<EmpiricalDist> {
    let pts = draw(h, n, seed)?;
    Ok(EmpiricalDist::from_points(*h.domain(), pts.iter().map(|p| &p[..]))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_piece_is_uniform() {
        let dom = Domain::unit(2).unwrap();
        let h = gen_truth(1, dom, 5).unwrap();
        assert_eq!(h.len(), 1);
        assert!((h.pieces()[0].value - 1.0).abs() < 1e-15);
        let dom = Domain::discrete(1, 10).unwrap();
        let h = gen_truth(1, dom, 5).unwrap();
        assert!((h.pieces()[0].value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn masses_normalized() {
        for seed in 0..100 {
            let h = gen_truth(5, Domain::unit(2).unwrap(), seed).unwrap();
            assert!((h.total_mass() - 1.0).abs() < 1e-12);
            assert_eq!(h.len(), 5);
            let h = gen_truth(4, Domain::discrete(2, 8).unwrap(), seed).unwrap();
            assert!((h.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_pieces() {
        assert!(gen_truth(3, Domain::discrete(1, 2).unwrap(), 1).is_err());
    }

    #[test]
    fn draws_stay_inside() {
        let h = gen_truth(1, Domain::discrete(2, 4).unwrap(), 3).unwrap();
        let pts = draw(&h, 200, 9).unwrap();
        assert!(pts.iter().all(|p| h.domain().contains_point(p)));
        assert!(draw(&h, 0, 9).is_err());
        assert_eq!(draw(&h, 50, 9).unwrap(), draw(&h, 50, 9).unwrap());
        assert!(draw(&h.scaled(2.0), 5, 1).is_err());
    }
}
