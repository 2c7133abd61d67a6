mod common;

use common::random_empirical;
use khist_core::ddist::BRUTE_D1_LIMIT;
use khist_core::{brute_d1, build_tree, compute_d1, fit_d1, Domain, DyadicRect, EmpiricalDist, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum over `a ≥ 0` of `max_i |m_i − a v_i|`, evaluated at `a = 0` and
/// at every crossing of two of the lines `±(m_i − a v_i)`.
fn exact_min(pairs: &[(f64, f64)]) -> f64 {
    let mut pairs = pairs.to_vec();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    pairs.dedup();
    let obj = |a: f64| pairs.iter().map(|&(m, v)| (m - a * v).abs()).fold(0.0, f64::max);
    let mut best = obj(0.0);
    for (i, &(mi, vi)) in pairs.iter().enumerate() {
        for &(mj, vj) in &pairs[i..] {
            for a in [(mi - mj) / (vi - vj), (mi + mj) / (vi + vj)] {
                if a.is_finite() && a >= 0.0 {
                    best = best.min(obj(a));
                }
            }
        }
    }
    best
}

fn mass_volume_pairs(e: &EmpiricalDist, g: &GridSpec, r: &DyadicRect) -> Vec<(f64, f64)> {
    g.descendants(r)
        .iter()
        .map(|q| (khist_core::mass(e, &g.rect_of(q)).unwrap(), g.volume_of(q)))
        .collect()
}

fn random_instance(rng: &mut ChaCha8Rng) -> (EmpiricalDist, GridSpec, DyadicRect) {
    let d = rng.random_range(1..=2);
    let m = 1u64 << rng.random_range(1..=3);
    let s = rng.random_range(1..=16);
    let (e, g) = random_empirical(rng, d, m, s);
    let all = g.descendants(&g.root());
    let r = if rng.random_bool(0.5) { g.root() } else { all[rng.random_range(0..all.len())].clone() };
    (e, g, r)
}

#[test]
fn compute_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (e, g, r) = random_instance(&mut rng);
        let a = rng.random_range(0.0..=2.0 / g.volume_of(&g.root()));
        let fast = compute_d1(&e, &g, &r, a).unwrap();
        let slow = brute_d1(&e, &g, &r, a, BRUTE_D1_LIMIT).unwrap();
        assert!((fast.err - slow.err).abs() <= 1e-12);
        let wrect = g.rect_of(&fast.witness);
        let werr = (khist_core::mass(&e, &wrect).unwrap() - a * g.volume_of(&fast.witness)).abs();
        assert!((werr - fast.err).abs() <= 1e-12);
        assert!(r.contains(&fast.witness));
    }
}

#[test]
fn fit_is_near_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let gamma = 1e-4;
    for _ in 0..500 {
        let (e, g, r) = random_instance(&mut rng);
        let fit = fit_d1(&e, &g, &r, gamma).unwrap();
        let best = exact_min(&mass_volume_pairs(&e, &g, &r));
        assert!(fit.err <= best + gamma, "fit {} vs optimum {best}", fit.err);
        let check = compute_d1(&e, &g, &r, fit.a).unwrap();
        assert!((check.err - fit.err).abs() <= 1e-15);
    }
}

#[test]
fn fit_on_hand_instance() {
    let dom = Domain::discrete(1, 4).unwrap();
    let pts: [(&[f64], u64); 3] = [(&[1.0], 2), (&[2.0], 1), (&[4.0], 1)];
    let e = EmpiricalDist::from_weighted(dom, pts).unwrap();
    let g = GridSpec::lattice(dom).unwrap();
    let fit = fit_d1(&e, &g, &g.root(), 1e-4).unwrap();
    assert!((fit.err - 0.25).abs() <= 1e-4);
    let best = exact_min(&mass_volume_pairs(&e, &g, &g.root()));
    assert!((best - 0.25).abs() < 1e-15);
    let at = compute_d1(&e, &g, &g.root(), 0.25).unwrap();
    assert!((at.err - 0.25).abs() < 1e-15);
}

#[test]
fn children_never_exceed_parent() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let (e, g, r) = random_instance(&mut rng);
        if r.level == 0 {
            continue;
        }
        let a = rng.random_range(0.0..1.0);
        let parent = compute_d1(&e, &g, &r, a).unwrap().err;
        for c in r.children() {
            assert!(compute_d1(&e, &g, &c, a).unwrap().err <= parent);
        }
    }
}

#[test]
fn visits_scale_linearly_in_support() {
    let dom = Domain::unit(2).unwrap();
    let g = GridSpec::uniform(dom, 1 << 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut visits = Vec::new();
    for s in [2000, 4000, 8000] {
        let pts: Vec<[f64; 2]> = (0..s).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)]).collect();
        let e = EmpiricalDist::from_points(dom, pts.iter().map(|p| &p[..])).unwrap();
        let tree = build_tree(&e, &g, &g.root()).unwrap();
        let bound = 4 * e.support_len() as u64 * 12;
        assert!(tree.visits() <= 2 * bound, "visits {} above 2 · 2^d s log M", tree.visits());
        visits.push(tree.visits() as f64);
    }
    for w in visits.windows(2) {
        let ratio = w[1] / w[0];
        assert!(ratio <= 2.0 * 1.2, "visit ratio {ratio}");
    }
}

#[test]
fn brute_guard_reports_overflow() {
    let dom = Domain::unit(2).unwrap();
    let g = GridSpec::uniform(dom, 1 << 10).unwrap();
    let pts: [&[f64]; 1] = [&[0.5, 0.5]];
    let e = EmpiricalDist::from_points(dom, pts).unwrap();
    let err = brute_d1(&e, &g, &g.root(), 0.0, BRUTE_D1_LIMIT).unwrap_err();
    assert!(matches!(err, khist_core::Error::OracleTooLarge { .. }));
}
