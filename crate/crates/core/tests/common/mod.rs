#![allow(dead_code)]

use khist_core::{DyadicRect, Domain, EmpiricalDist, GridSpec, Histogram, Piece, Rect};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `s` random support points on `[m]^d` with counts in `1..=5`, and the
/// lattice grid.
pub fn random_empirical(rng: &mut ChaCha8Rng, d: usize, m: u64, s: usize) -> (EmpiricalDist, GridSpec) {
    let dom = Domain::discrete(d, m).unwrap();
    let pts: Vec<(Vec<f64>, u64)> = (0..s.max(1))
        .map(|_| ((0..d).map(|_| rng.random_range(1..=m) as f64).collect(), rng.random_range(1..=5)))
        .collect();
    let e = EmpiricalDist::from_weighted(dom, pts.iter().map(|(p, c)| (&p[..], *c))).unwrap();
    (e, GridSpec::lattice(dom).unwrap())
}

/// Random hierarchical density (total mass 1) on `grid` with at most `k`
/// leaves.
pub fn random_hierarchical(rng: &mut ChaCha8Rng, grid: &GridSpec, k: usize) -> Histogram {
    let fan = 1usize << grid.dim();
    let mut leaves = vec![grid.root()];
    while leaves.len() + fan - 1 <= k {
        let splittable: Vec<usize> = (0..leaves.len()).filter(|&i| leaves[i].level > 0).collect();
        if splittable.is_empty() || rng.random_bool(0.2) {
            break;
        }
        let i = splittable[rng.random_range(0..splittable.len())];
        let leaf = leaves.swap_remove(i);
        leaves.extend(leaf.children());
    }
    leaves.sort();
    let values = leaves.iter().map(|_| rng.random_range(1..=8) as f64 / 8.0).collect();
    khist_core::renormalize(&Histogram::hierarchical(grid.clone(), leaves, values).unwrap()).unwrap().0
}

/// Random partial hierarchical histogram: at most `k` disjoint dyadic cells.
pub fn random_partial(rng: &mut ChaCha8Rng, grid: &GridSpec, k: usize) -> Histogram {
    let all = grid.descendants(&grid.root());
    let mut cells: Vec<DyadicRect> = Vec::new();
    for _ in 0..rng.random_range(0..=k) {
        let c = &all[rng.random_range(0..all.len())];
        if cells.iter().all(|x| x.is_disjoint(c)) {
            cells.push(c.clone());
        }
    }
    cells.sort();
    let values = cells.iter().map(|_| rng.random_range(0..=8) as f64 / 8.0).collect();
    Histogram::partial_hierarchical(grid.clone(), cells, values).unwrap()
}

/// Random guillotine partition of the unit cube into `k` pieces with values
/// in `[0, 2)`, cuts on multiples of `1/64`.
pub fn random_unit_partition(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Histogram {
    let dom = Domain::unit(d).unwrap();
    let mut boxes: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 1.0); d]];
    for _ in 1..k {
        let i = rng.random_range(0..boxes.len());
        let axis = rng.random_range(0..d);
        let (lo, hi) = boxes[i][axis];
        let (a, b) = ((lo * 64.0) as u32, (hi * 64.0) as u32);
        if b - a < 2 {
            continue;
        }
        let cut = rng.random_range(a + 1..b) as f64 / 64.0;
        let mut other = boxes[i].clone();
        boxes[i][axis].1 = cut;
        other[axis].0 = cut;
        boxes.push(other);
    }
    let pieces = boxes
        .into_iter()
        .map(|b| Piece { rect: Rect::from_bounds(&b).unwrap(), value: rng.random_range(0.0..2.0) })
        .collect();
    Histogram::arbitrary(dom, pieces).unwrap()
}

/// All lattice points of `[m]^d`.
pub fn lattice_points(d: usize, m: u64) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p| {
                (1..=m).map(move |x| {
                    let mut q = p.clone();
                    q.push(x as f64);
                    q
                })
            })
            .collect();
    }
    out
}
