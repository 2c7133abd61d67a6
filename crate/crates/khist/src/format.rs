//! Text formats for samples and hypotheses.
//!
//! Samples: a header `# dim=<d> domain=discrete <m>` or `# dim=<d> domain=unit`,
//! then one comma-separated point per line.
//!
//! Hypotheses: a header `# dim=<d> domain=... kind=<arbitrary|hierarchical|partial>`,
//! for dyadic kinds one `# grid <axis> b0,b1,...` line per axis, then one
//! piece per line as `lo0,hi0,lo1,hi1,...,value`, followed by
//! ` @ <level> <j0> <j1> ...` when the piece is a dyadic cell.
//!
//! Numbers are written in shortest round-trip form, so a file read back
//! reproduces the hypothesis bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use khist_core::{Domain, DomainKind, DyadicRect, EmpiricalDist, GridSpec, HistKind, Histogram, Piece, Rect};

use crate::error::{CliError, Result};

/// Formats a number so that parsing it returns the same `f64`.
pub fn num(x: f64) -> String {
    format!("{}", x + 0.0)
}

fn domain_header(domain: &Domain) -> String {
    match domain.kind() {
        DomainKind::Discrete { m } => format!("dim={} domain=discrete {m}", domain.dim()),
        DomainKind::Unit => format!("dim={} domain=unit", domain.dim()),
    }
}

struct Header {
    domain: Domain,
    kind: Option<HistKind>,
}

fn parse_header(line: &str, path: &Path, lineno: usize) -> Result<Header> {
    let err = |msg: String| CliError::Parse { path: path.to_path_buf(), line: lineno, msg };
    let body = line.strip_prefix('#').ok_or_else(|| err("expected a '# dim=... domain=...' header".into()))?;
    let mut dim = None;
    let mut domain = None;
    let mut kind = None;
    let mut tokens = body.split_whitespace().peekable();
    while let Some(tok) = tokens.next() {
        let (key, value) = tok.split_once('=').ok_or_else(|| err(format!("unexpected header token '{tok}'")))?;
        match key {
            "dim" => dim = Some(value.parse::<usize>().map_err(|_| err(format!("bad dimension '{value}'")))?),
            "domain" => {
                domain = Some(match value {
                    "unit" => None,
                    "discrete" => {
                        let m = tokens.next().ok_or_else(|| err("discrete domain needs a size".into()))?;
                        let m = m.strip_prefix("m=").unwrap_or(m);
                        Some(m.parse::<u64>().map_err(|_| err(format!("bad domain size '{m}'")))?)
                    }
                    other => return Err(err(format!("unknown domain '{other}'"))),
                })
            }
            "kind" => {
                kind = Some(match value {
                    "arbitrary" => HistKind::Arbitrary,
                    "hierarchical" => HistKind::Hierarchical,
                    "partial" => HistKind::Partial,
                    other => return Err(err(format!("unknown kind '{other}'"))),
                })
            }
            other => return Err(err(format!("unknown header key '{other}'"))),
        }
    }
    let dim = dim.ok_or_else(|| err("header lacks dim=".into()))?;
    let domain = domain.ok_or_else(|| err("header lacks domain=".into()))?;
    let domain = match domain {
        Some(m) => Domain::discrete(dim, m),
        None => Domain::unit(dim),
    }
    .map_err(|e| err(e.to_string()))?;
    Ok(Header { domain, kind })
}

fn parse_numbers(text: &str, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| CliError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                msg: format!("'{t}' is not a finite number"),
            })
        })
        .collect()
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Points of a sample file, in file order.
pub fn parse_sample_points(text: &str, path: &Path) -> Result<(Domain, Vec<Vec<f64>>)> {
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or_else(|| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty sample file".into(),
    })?;
    let domain = parse_header(header, path, hl)?.domain;
    let mut points = Vec::new();
    for (lineno, line) in it {
        if line.starts_with('#') {
            continue;
        }
        let p = parse_numbers(line, path, lineno)?;
        let err = |msg: String| CliError::Parse { path: path.to_path_buf(), line: lineno, msg };
        if p.len() != domain.dim() {
            return Err(err(format!("expected {} coordinates, found {}", domain.dim(), p.len())));
        }
        domain.check_point(&p).map_err(|e| err(e.to_string()))?;
        points.push(p);
    }
    Ok((domain, points))
}

pub fn parse_samples(text: &str, path: &Path) -> Result<EmpiricalDist> {
    let (domain, points) = parse_sample_points(text, path)?;
    if points.is_empty() {
        return Err(CliError::Parse { path: path.to_path_buf(), line: 1, msg: "no samples".into() });
    }
    Ok(EmpiricalDist::from_points(domain, points.iter().map(|p| &p[..]))?)
}

pub fn read_samples(path: &Path) -> Result<EmpiricalDist> {
    parse_samples(&read(path)?, path)
}

pub fn write_samples(domain: &Domain, points: &[Vec<f64>]) -> String {
    let mut out = format!("# {}\n", domain_header(domain));
    for p in points {
        let row: Vec<String> = p.iter().map(|&c| num(c)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn kind_name(kind: HistKind) -> &'static str {
    match kind {
        HistKind::Arbitrary => "arbitrary",
        HistKind::Hierarchical => "hierarchical",
        HistKind::Partial => "partial",
    }
}

pub fn write_hypothesis(h: &Histogram) -> String {
    let mut out = format!("# {} kind={}\n", domain_header(h.domain()), kind_name(h.kind()));
    if let Some(layout) = h.layout() {
        for (i, axis) in layout.grid.axes().iter().enumerate() {
            let row: Vec<String> = axis.iter().map(|&b| num(b)).collect();
            let _ = writeln!(out, "# grid {i} {}", row.join(","));
        }
    }
    for (i, p) in h.pieces().iter().enumerate() {
        let mut row: Vec<String> = p.rect.sides().iter().flat_map(|s| [num(s.lo), num(s.hi)]).collect();
        row.push(num(p.value));
        out.push_str(&row.join(","));
        if let Some(layout) = h.layout() {
            let c = &layout.cells[i];
            let _ = write!(out, " @ {}", c.level);
            for j in &c.index {
                let _ = write!(out, " {j}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_hypothesis(text: &str, path: &Path) -> Result<Histogram> {
    let err = |line: usize, msg: String| CliError::Parse { path: path.to_path_buf(), line, msg };
    let mut it = lines(text);
    let (hl, header) = it.next().ok_or_else(|| err(1, "empty hypothesis file".into()))?;
    let Header { domain, kind } = parse_header(header, path, hl)?;
    let kind = kind.ok_or_else(|| err(hl, "header lacks kind=".into()))?;
    let d = domain.dim();
    let mut axes: Vec<Option<Vec<f64>>> = vec![None; d];
    let mut pieces = Vec::new();
    let mut cells = Vec::new();
    for (lineno, line) in it {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(grid_line) = rest.strip_prefix("grid") {
                let (axis, values) = grid_line
                    .trim()
                    .split_once(' ')
                    .ok_or_else(|| err(lineno, "grid line needs an axis and boundaries".into()))?;
                let axis: usize = axis.parse().ok().filter(|&a| a < d).ok_or_else(|| err(lineno, format!("bad axis '{axis}'")))?;
                axes[axis] = Some(parse_numbers(values, path, lineno)?);
            }
            continue;
        }
        let (body, cell) = match line.split_once('@') {
            Some((b, c)) => (b.trim(), Some(c.trim())),
            None => (line, None),
        };
        let nums = parse_numbers(body, path, lineno)?;
        if nums.len() != 2 * d + 1 {
            return Err(err(lineno, format!("expected {} numbers, found {}", 2 * d + 1, nums.len())));
        }
        let bounds: Vec<(f64, f64)> = nums[..2 * d].chunks(2).map(|c| (c[0], c[1])).collect();
        let rect = Rect::from_bounds(&bounds).map_err(|e| err(lineno, e.to_string()))?;
        pieces.push((lineno, Piece { rect, value: nums[2 * d] }));
        if let Some(cell) = cell {
            let parts: Vec<u32> = cell
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| err(lineno, format!("bad cell index '{t}'"))))
                .collect::<Result<_>>()?;
            if parts.len() != d + 1 {
                return Err(err(lineno, format!("cell needs a level and {d} indices")));
            }
            cells.push(DyadicRect::new(parts[0], parts[1..].to_vec()));
        }
    }
    let dyadic = !cells.is_empty() || kind == HistKind::Hierarchical;
    if !dyadic {
        let pieces = pieces.into_iter().map(|(_, p)| p).collect();
        return Ok(match kind {
            HistKind::Partial => Histogram::partial(domain, pieces)?,
            _ => Histogram::arbitrary(domain, pieces)?,
        });
    }
    if cells.len() != pieces.len() {
        return Err(err(hl, "every piece of a dyadic hypothesis needs an '@ level index' suffix".into()));
    }
    let axes: Vec<Vec<f64>> = axes
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.ok_or_else(|| err(hl, format!("missing '# grid {i}' line"))))
        .collect::<Result<_>>()?;
    let grid = GridSpec::new(domain, axes)?;
    for ((lineno, p), c) in pieces.iter().zip(&cells) {
        grid.check_member(c).map_err(|e| err(*lineno, e.to_string()))?;
        if grid.rect_of(c) != p.rect {
            return Err(err(*lineno, "piece bounds do not match its dyadic cell".into()));
        }
    }
    let values = pieces.iter().map(|(_, p)| p.value).collect();
    Ok(match kind {
        HistKind::Hierarchical => Histogram::hierarchical(grid, cells, values)?,
        _ => Histogram::partial_hierarchical(grid, cells, values)?,
    })
}

pub fn read_hypothesis(path: &Path) -> Result<Histogram> {
    parse_hypothesis(&read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn samples_aggregate() {
        let text = "# dim=2 domain=discrete 16\n1,2\n3,4\n1,2\n";
        let e = parse_samples(text, p()).unwrap();
        assert_eq!(e.n(), 3);
        assert_eq!(e.support_len(), 2);
        assert!((e.mass_at(&[1.0, 2.0]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn out_of_domain_reports_line() {
        let text = "# dim=1 domain=unit\n0.5\n\n1.5\n";
        match parse_samples(text, p()) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "# dim=2 domain=unit\n0.5\n";
        assert!(matches!(parse_samples(text, p()), Err(CliError::Parse { line: 2, .. })));
        let text = "# dim=1 domain=unit\nabc\n";
        assert!(matches!(parse_samples(text, p()), Err(CliError::Parse { line: 2, .. })));
    }

    #[test]
    fn hypothesis_round_trip() {
        let dom = Domain::unit(2).unwrap();
        let grid = GridSpec::uniform(dom, 4).unwrap();
        let cells = vec![DyadicRect::new(1, vec![0, 0]), DyadicRect::new(1, vec![0, 1]), DyadicRect::new(1, vec![1, 0]), DyadicRect::new(1, vec![1, 1])];
        let h = Histogram::hierarchical(grid, cells, vec![0.1, 1.0 / 3.0, 2.0, 1.0 - 0.1 - 1.0 / 3.0]).unwrap();
        let text = write_hypothesis(&h);
        let back = parse_hypothesis(&text, p()).unwrap();
        assert_eq!(back, h);
        assert_eq!(write_hypothesis(&back), text);

        let arb = Histogram::partial(dom, vec![Piece { rect: Rect::from_bounds(&[(0.1, 0.7), (0.0, 0.3)]).unwrap(), value: 0.7 }])
            .unwrap();
        assert_eq!(parse_hypothesis(&write_hypothesis(&arb), p()).unwrap(), arb);
    }
}
