use crate::args::CompareArgs;
use crate::error::CliError;
use crate::output::{emit, render_json};
use crate::sources::parse_sources;
use anfield_core::graph::bfs_neighbourhood;
use anfield_core::{hyperanf_seq, harmonic_centrality};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Serialize)]
struct CompareReport {
    cells: usize,
    max_rel_error: f64,
    mean_rel_error: f64,
    /// Fraction of vertex pairs ranked the same way by both centralities.
    pairwise_agreement: f64,
    topk: usize,
    topk_overlap: usize,
}

/// Estimates keyed by (vertex, radius).
type Table = BTreeMap<(usize, usize), f64>;

pub fn run(args: CompareArgs) -> Result<(), CliError> {
    let (approx, exact) = match (&args.graph, &args.approx, &args.exact) {
        (Some(graph), None, None) => in_process_tables(&args, graph)?,
        (None, Some(approx), Some(exact)) => (load_table(approx)?, load_table(exact)?),
        _ => {
            return Err(CliError::Parameter(String::from(
                "pass either --graph or both --approx and --exact",
            )))
        }
    };

    if approx.keys().ne(exact.keys()) {
        return Err(CliError::Consistency(String::from(
            "the two tables cover different (vertex, h) cells",
        )));
    }
    if approx.is_empty() {
        return Err(CliError::Consistency(String::from("the tables are empty")));
    }

    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0f64;
    for (key, &a) in &approx {
        let e = exact[key];
        // Cells with a zero oracle value fall back to absolute error.
        let rel = if e > 0.0 { (a - e).abs() / e } else { (a - e).abs() };
        max_rel = max_rel.max(rel);
        sum_rel += rel;
    }

    let approx_centrality = centralities(&approx);
    let exact_centrality = centralities(&exact);
    let report = CompareReport {
        cells: approx.len(),
        max_rel_error: max_rel,
        mean_rel_error: sum_rel / approx.len() as f64,
        pairwise_agreement: pairwise_agreement(&approx_centrality, &exact_centrality),
        topk: args.topk,
        topk_overlap: top_k_overlap(&approx_centrality, &exact_centrality, args.topk),
    };
    emit(args.out.as_deref(), &render_json(&report))
}

fn in_process_tables(args: &CompareArgs, graph: &Path) -> Result<(Table, Table), CliError> {
    let hmax = args.hmax.ok_or_else(|| {
        CliError::Parameter(String::from("--hmax is required with --graph"))
    })?;
    let g = super::load_graph(graph, args.directed)?;
    let sources = parse_sources(&args.sources, g.n())?;
    let kind = super::counter_kind(&args.sketch)?;

    let (table, _) = hyperanf_seq(&g, hmax, &sources, kind, true)
        .map_err(|e| CliError::Parameter(e.to_string()))?;
    let mut approx = Table::new();
    for (v, row) in table.rows().iter().enumerate() {
        for (h, &estimate) in row.iter().enumerate() {
            approx.insert((v, h), estimate);
        }
    }

    let mut exact = Table::new();
    for v in 0..g.n() {
        let counts = bfs_neighbourhood(&g, v, hmax, &sources)
            .map_err(|e| CliError::Parameter(e.to_string()))?;
        for (h, &count) in counts.iter().enumerate() {
            exact.insert((v, h), count as f64);
        }
    }
    Ok((approx, exact))
}

/// Reads the first table of a CSV file: a `vertex,h,<value>` header, then
/// numeric rows up to a blank line or the end.
fn load_table(path: &Path) -> Result<Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.starts_with("vertex,h,") => {}
        _ => {
            return Err(CliError::parse(
                path,
                "expected a 'vertex,h,<value>' header row",
            ))
        }
    }
    let mut table = Table::new();
    for (idx, line) in lines {
        if line.is_empty() {
            break;
        }
        let mut cells = line.split(',');
        let row = (|| {
            let vertex: usize = cells.next()?.parse().ok()?;
            let h: usize = cells.next()?.parse().ok()?;
            let value: f64 = cells.next()?.parse().ok()?;
            if cells.next().is_some() || !value.is_finite() {
                return None;
            }
            Some(((vertex, h), value))
        })();
        match row {
            Some((key, value)) => {
                if table.insert(key, value).is_some() {
                    return Err(CliError::parse(
                        path,
                        format!("line {}: duplicate cell", idx + 1),
                    ));
                }
            }
            None => {
                return Err(CliError::parse(
                    path,
                    format!("line {}: expected 'vertex,h,value'", idx + 1),
                ))
            }
        }
    }
    if table.is_empty() {
        return Err(CliError::parse(path, "no data rows"));
    }
    Ok(table)
}

/// Truncated harmonic centrality per vertex from the cells with h >= 1.
fn centralities(table: &Table) -> Vec<(usize, f64)> {
    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    for (&(v, h), &value) in table {
        if h >= 1 {
            rows.entry(v).or_default().push((h, value));
        }
    }
    rows.into_iter()
        .map(|(v, cells)| {
            let hmax = cells.iter().map(|&(h, _)| h).max().unwrap_or(0);
            let mut by_radius = vec![0.0; hmax + 1];
            for (h, value) in cells {
                by_radius[h] = value;
            }
            // Reuse the largest-radius-first convention of the row helper.
            by_radius.reverse();
            (v, harmonic_centrality(&by_radius))
        })
        .collect()
}

fn pairwise_agreement(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0u64;
    let mut total = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            let ord_a = a[i].1.total_cmp(&a[j].1);
            let ord_b = b[i].1.total_cmp(&b[j].1);
            total += 1;
            if ord_a == ord_b {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

/// Overlap between the two top-k sets, ranking by descending centrality
/// with the vertex id as the deterministic tiebreak.
fn top_k_overlap(a: &[(usize, f64)], b: &[(usize, f64)], k: usize) -> usize {
    let top = |rows: &[(usize, f64)]| -> Vec<usize> {
        let mut sorted = rows.to_vec();
        sorted.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        sorted.into_iter().take(k).map(|(v, _)| v).collect()
    };
    let top_a = top(a);
    top(b).iter().filter(|v| top_a.contains(v)).count()
}
