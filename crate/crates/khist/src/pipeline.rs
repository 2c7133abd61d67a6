//! Learner runs, evaluations and oracle runs, each producing a report.

use std::fmt;
use std::time::{Duration, Instant};

use khist_core::oracle::HierL2Opt;
use khist_core::{
    build_adaptive_grid, default_gamma, dk_distance, greedy_split, greedy_split_l2, l1_dist, l2_sq_dist, opt_hier_l2,
    opt_partial_hier_dk, renormalize, sample_budget, Domain, DomainKind, EmpiricalDist, FormulaId, GridSpec,
    Histogram, OracleGuard, SignedMass, SplitParams,
};

use crate::error::{CliError, Result};
use crate::format::num;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L1,
    L2,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    Adaptive,
    Fixed,
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn extend(&mut self, other: Report) {
        self.entries.extend(other.entries);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Wall-clock time per phase. Kept out of reports so that reports are
/// reproducible.
#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub phases: Vec<(&'static str, Duration)>,
}

impl Timings {
    fn time<T>(&mut self, phase: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.phases.push((phase, start.elapsed()));
        out
    }

    pub fn total(&self) -> Duration {
        self.phases.iter().map(|(_, d)| *d).sum()
    }
}

impl fmt::Display for Timings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.phases {
            writeln!(f, "time.{k} = {:.6}", v.as_secs_f64())?;
        }
        Ok(())
    }
}

/// Everything a learning run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub k: usize,
    pub xi: f64,
    pub eps: f64,
    pub delta: f64,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub metric: Metric,
    pub grid: GridChoice,
    /// Cells per axis of a fixed grid; the lattice when absent.
    pub cells: Option<usize>,
    pub normalize: bool,
    pub c: f64,
    pub max_levels: Option<u32>,
    /// Largest grid on which the `D_k` error is computed exactly.
    pub guard: OracleGuard,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            k: 1,
            xi: 1.0,
            eps: 0.1,
            delta: 0.05,
            gamma: None,
            seed: 0,
            metric: Metric::L1,
            grid: GridChoice::Adaptive,
            cells: None,
            normalize: false,
            c: 1.0,
            max_levels: None,
            guard: OracleGuard::default(),
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.k == 0 {
            return bad("--k must be at least 1".into());
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return bad(format!("--xi must be positive, got {}", self.xi));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("--eps must lie in (0, 1), got {}", self.eps));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("--delta must lie in (0, 1), got {}", self.delta));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("--gamma must be positive, got {g}"));
            }
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("--C must be positive, got {}", self.c));
        }
        Ok(())
    }
}

fn domain_text(d: &Domain) -> String {
    match d.kind() {
        DomainKind::Discrete { m } => format!("discrete {m}"),
        DomainKind::Unit => "unit".into(),
    }
}

fn fixed_grid(domain: Domain, cells: Option<usize>) -> Result<GridSpec> {
    match (cells, domain.kind()) {
        (Some(c), _) => Ok(GridSpec::uniform(domain, c)?),
        (None, DomainKind::Discrete { .. }) => Ok(GridSpec::lattice(domain)?),
        (None, DomainKind::Unit) => Err(CliError::Config("a fixed grid on the unit cube needs --cells".into())),
    }
}

/// Result of [`run_learn`].
#[derive(Debug, Clone)]
pub struct LearnRun {
    /// The hypothesis as written (renormalized when requested).
    pub hist: Histogram,
    pub report: Report,
    pub timings: Timings,
}

/// Learns a hypothesis from `samples` and reports its size and errors.
///
/// Errors are measured before any renormalization. The `D_k` error against
/// the samples is computed only when the grid is within the oracle guard.
pub fn run_learn(cfg: &LearnConfig, samples: &EmpiricalDist, truth: Option<&Histogram>) -> Result<LearnRun> {
    cfg.validate()?;
    let domain = *samples.domain();
    if let Some(t) = truth {
        if t.domain() != &domain {
            return Err(CliError::Config("truth and samples live on different domains".into()));
        }
    }
    let mut timings = Timings::default();
    let (learner, grid) = timings.time("grid", || -> Result<(&str, GridSpec)> {
        Ok(match (cfg.metric, cfg.grid) {
            (Metric::L1, GridChoice::Adaptive) => ("l1-adaptive", build_adaptive_grid(samples)?),
            (Metric::L1, GridChoice::Fixed) => ("l1-fixed", fixed_grid(domain, cfg.cells)?),
            (Metric::L2, _) => {
                if !domain.is_discrete() {
                    return Err(khist_core::Error::UnsupportedDomain("the l2 learner needs a discrete domain".into()).into());
                }
                ("l2-fixed", fixed_grid(domain, cfg.cells)?)
            }
        })
    })?;
    let d = domain.dim();
    let gamma = cfg.gamma.unwrap_or_else(|| default_gamma(cfg.eps, cfg.k, cfg.xi, d, grid.levels()));
    let params = SplitParams { k: cfg.k, xi: cfg.xi, gamma, max_levels: cfg.max_levels, normalize_output: false };
    let outcome = timings.time("learn", || match cfg.metric {
        Metric::L1 => greedy_split(samples, &grid, &params),
        Metric::L2 => greedy_split_l2(samples, &grid, &params),
    })?;
    let hist = &outcome.hist;

    let mut r = Report::default();
    r.push("command", "learn");
    r.push("learner", learner);
    r.push("metric", cfg.metric.name());
    r.push("domain", domain_text(&domain));
    r.push("dim", d);
    r.push("k", cfg.k);
    r.push("xi", num(cfg.xi));
    r.push("eps", num(cfg.eps));
    r.push("delta", num(cfg.delta));
    r.push("gamma", num(gamma));
    r.push("seed", cfg.seed);
    r.push("C", num(cfg.c));
    r.push("normalize", cfg.normalize);
    r.push("n", samples.n());
    r.push("support", samples.support_len());
    r.push("grid_cells", grid.side());
    r.push("grid_levels", grid.levels());
    let padded: usize = (0..d).map(|i| grid.axis(i).windows(2).filter(|w| w[0] == w[1]).count()).sum();
    r.push("grid_zero_width_cells", padded);
    r.push("rounds", outcome.trace.iterations.len());
    r.push("pieces", outcome.leaves);
    r.push("piece_bound", outcome.bound);
    r.push("piece_bound_ok", outcome.leaves as u64 <= outcome.bound);
    r.push("gamma_slack", num(outcome.leaves as f64 * gamma));
    r.push("total_mass", num(outcome.total_mass));
    r.push("tree_visits", outcome.trace.visits);

    let formula = match (cfg.metric, cfg.grid) {
        (Metric::L2, _) => Some(FormulaId::L2),
        (Metric::L1, GridChoice::Adaptive) => Some(FormulaId::AdaptiveL1),
        (Metric::L1, GridChoice::Fixed) => domain.is_discrete().then_some(FormulaId::FixedGridL1),
    };
    match formula {
        Some(f) => {
            let b = sample_budget(f, cfg.k, d, domain.kind(), cfg.eps, cfg.delta, cfg.xi, cfg.c)?;
            r.push("budget_n", b.n);
        }
        None => r.push("budget_n", "n/a"),
    }

    timings.time("metrics", || -> Result<()> {
        if grid.count_descendants(&grid.root()) <= cfg.guard.max_dyadic_rects {
            let dk = dk_distance(&SignedMass::between(samples, hist, &grid)?, cfg.k, &cfg.guard)?;
            r.push("dk_error_empirical", num(dk.value));
        } else {
            r.push("dk_error_empirical", "skipped");
        }
        if domain.is_discrete() {
            r.push("l2sq_error_empirical", num(l2_sq_dist(samples, hist)?));
        }
        if let Some(t) = truth {
            r.push("l1_error_truth", num(l1_dist(t, hist)?));
            if domain.is_discrete() {
                r.push("l2sq_error_truth", num(l2_sq_dist(t, hist)?));
            }
        }
        Ok(())
    })?;

    let hist = if cfg.normalize {
        let (h, scale) = renormalize(hist)?;
        r.push("scale", num(scale));
        h
    } else {
        outcome.hist
    };
    Ok(LearnRun { hist, report: r, timings })
}

/// Compares a hypothesis with a truth and/or samples.
pub fn run_eval(h: &Histogram, truth: Option<&Histogram>, samples: Option<&EmpiricalDist>, k: usize) -> Result<Report> {
    let mut r = Report::default();
    r.push("command", "eval");
    r.push("domain", domain_text(h.domain()));
    r.push("dim", h.domain().dim());
    r.push("pieces", h.len());
    r.push("total_mass", num(h.total_mass()));
    if let Some(t) = truth {
        r.push("l1_error_truth", num(l1_dist(t, h)?));
        if h.domain().is_discrete() {
            r.push("l2sq_error_truth", num(l2_sq_dist(t, h)?));
        }
    }
    if let Some(e) = samples {
        r.push("n", e.n());
        if h.domain().is_discrete() {
            r.push("l2sq_error_empirical", num(l2_sq_dist(e, h)?));
        }
        if let Some(layout) = h.layout() {
            let guard = OracleGuard::default();
            if layout.grid.count_descendants(&layout.grid.root()) <= guard.max_dyadic_rects {
                let dk = dk_distance(&SignedMass::between(e, h, &layout.grid)?, k, &guard)?;
                r.push("k", k);
                r.push("dk_error_empirical", num(dk.value));
            }
        }
    }
    Ok(r)
}

/// Exact optimum of a small instance, with the hypothesis achieving it.
pub fn run_oracle(
    samples: &EmpiricalDist,
    metric: Metric,
    k: usize,
    cells: Option<usize>,
    guard: &OracleGuard,
) -> Result<(Histogram, Report)> {
    if k == 0 {
        return Err(CliError::Config("--k must be at least 1".into()));
    }
    let grid = fixed_grid(*samples.domain(), cells)?;
    let mut r = Report::default();
    r.push("command", "oracle");
    r.push("metric", metric.name());
    r.push("domain", domain_text(samples.domain()));
    r.push("dim", samples.domain().dim());
    r.push("k", k);
    r.push("n", samples.n());
    r.push("grid_cells", grid.side());
    let hist = match metric {
        Metric::L1 => {
            let opt = opt_partial_hier_dk(samples, &grid, k, guard)?;
            r.push("opt_partial_dk", num(opt.value));
            r.push("supports_solved", opt.solved);
            opt.hist
        }
        Metric::L2 => {
            let HierL2Opt { value, hist, partitions } = opt_hier_l2(samples, &grid, k, guard)?;
            r.push("opt_hier_l2sq", num(value));
            r.push("partitions", partitions);
            hist
        }
    };
    r.push("pieces", hist.len());
    Ok((hist, r))
}

/// Values of `h` on a dense grid: every lattice point of a discrete domain,
/// or the centres of `cells^d` equal cells of the unit cube. One line per
/// point: coordinates, then value.
pub fn dense_dump(h: &Histogram, cells: usize) -> Result<String> {
    let d = h.domain().dim();
    let axis: Vec<f64> = match h.domain().kind() {
        DomainKind::Discrete { m } => (1..=m).map(|x| x as f64).collect(),
        DomainKind::Unit => (0..cells).map(|j| (j as f64 + 0.5) / cells as f64).collect(),
    };
    let total = (axis.len() as u128).pow(d as u32);
    if total > 4_000_000 {
        return Err(CliError::Config(format!("dense grid of {total} points is too large")));
    }
    let mut out = String::new();
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    for _ in 0..total {
        for (p, &i) in point.iter_mut().zip(&idx) {
            *p = axis[i];
        }
        let row: Vec<String> = point.iter().map(|&c| num(c)).collect();
        out.push_str(&row.join(","));
        out.push(',');
        out.push_str(&num(h.eval(&point)?));
        out.push('\n');
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < axis.len() {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{gen_truth, sample_from};

    #[test]
    fn report_lines_in_order() {
        let mut r = Report::default();
        r.push("b", 1);
        r.push("a", "x");
        assert_eq!(r.to_string(), "b = 1\na = x\n");
        assert_eq!(r.get("a"), Some("x"));
    }

    #[test]
    fn learn_reports_bound() {
        let truth = gen_truth(3, Domain::discrete(2, 16).unwrap(), 4).unwrap();
        let e = sample_from(&truth, 2000, 5).unwrap();
        let cfg = LearnConfig { k: 3, ..Default::default() };
        let run = run_learn(&cfg, &e, Some(&truth)).unwrap();
        assert_eq!(run.report.get("piece_bound_ok"), Some("true"));
        assert!(run.report.get("l1_error_truth").is_some());
    }

    #[test]
    fn l2_on_unit_rejected() {
        let truth = gen_truth(1, Domain::unit(1).unwrap(), 4).unwrap();
        let e = sample_from(&truth, 20, 5).unwrap();
        let cfg = LearnConfig { metric: Metric::L2, ..Default::default() };
        let err = run_learn(&cfg, &e, None).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_VALIDATION);
    }

    #[test]
    fn dense_dump_lines() {
        let truth = gen_truth(1, Domain::discrete(2, 3).unwrap(), 4).unwrap();
        let text = dense_dump(&truth, 0).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("1,1,"));
    }
}
