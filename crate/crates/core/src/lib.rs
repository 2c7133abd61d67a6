//! Learning multidimensional k-histograms by greedy dyadic splitting.
//!
//! The crate is `no_std` (with `alloc`). It provides
//!
//! - grids, dyadic rectangles, empirical distributions and histograms with
//!   exact algebra (mass, flattening, ℓ1 and squared ℓ2 distances);
//! - the D-distance machinery: sparse dyadic trees, maximum dyadic
//!   discrepancy against a constant and best constant fits;
//! - the greedy splitting learners for ℓ1 (fixed or sample-adaptive grid) and
//!   squared ℓ2;
//! - sample-size formulas and structural conversions;
//! - brute-force oracles used to check the approximation guarantees on small
//!   instances.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod ddist;
pub mod empirical;
mod error;
pub mod geometry;
pub mod histogram;
pub mod oracle;
pub mod split;
pub mod theory;

pub use ddist::{brute_d1, build_tree, compute_d1, fit_d1, D1Result, DFitResult, SparseDyadicTree};
pub use empirical::EmpiricalDist;
pub use error::{Error, Result};
pub use geometry::{volume, Domain, DomainKind, DyadicRect, GridSpec, Interval, Rect};
pub use histogram::{
    flatten, l1_dist, l2_sq_dist, mass, renormalize, DyadicLayout, HistKind, Histogram, MassFn, Piece,
};
pub use oracle::{dk_distance, opt_hier_l2, opt_partial_hier_dk, DkDistance, OracleGuard, SignedMass};
pub use split::{
    adaptive_greedy_split, build_adaptive_grid, default_gamma, greedy_split, greedy_split_l2, piece_bound,
    SplitOutcome, SplitParams, SplitTrace,
};
pub use theory::{sample_budget, strictly_greater_region, to_hierarchical, FormulaId, SampleBudget};
