use crate::args::{AnfArgs, FormatArg};
use crate::error::CliError;
use crate::output::{emit, fmt_f64, render_json, write_bytes, Csv};
use crate::sources::parse_sources;
use anfield_core::{fixpoint_radius, hyperanf_seq, Counter, CounterKind, EstimateTable};
use serde::Serialize;

#[derive(Serialize)]
struct EstimateRow {
    vertex: usize,
    h: usize,
    estimate: f64,
}

#[derive(Serialize)]
struct AnfReport {
    hmax: usize,
    rows: Vec<EstimateRow>,
}

pub fn run(args: AnfArgs) -> Result<(), CliError> {
    let g = super::load_graph(&args.graph.graph, args.graph.directed)?;
    let sources = parse_sources(&args.sources, g.n())?;
    let kind = super::counter_kind(&args.sketch)?;
    if args.dump_sketches.is_some() && !matches!(kind, CounterKind::Hll { .. }) {
        return Err(CliError::Parameter(String::from(
            "--dump-sketches requires --kind hll",
        )));
    }
    let reflexive = !args.no_reflexive;

    let (table, finals): (EstimateTable, Vec<Counter>) = match args.hmax {
        Some(hmax) => {
            if args.epsilon.is_some() {
                return Err(CliError::Parameter(String::from(
                    "--epsilon only applies without --hmax",
                )));
            }
            hyperanf_seq(&g, hmax, &sources, kind, reflexive)
                .map_err(|e| CliError::Parameter(e.to_string()))?
        }
        None => {
            let epsilon = args.epsilon.unwrap_or(0.0);
            let (table, h_star) = fixpoint_radius(&g, &sources, kind, epsilon, reflexive)
                .map_err(|e| CliError::Parameter(e.to_string()))?;
            // Re-deriving the counters at the fixpoint radius keeps the
            // two paths byte-identical for the same radius.
            let (_, finals) = hyperanf_seq(&g, h_star, &sources, kind, reflexive)
                .map_err(|e| CliError::Parameter(e.to_string()))?;
            (table, finals)
        }
    };

    if let Some(dump) = &args.dump_sketches {
        let mut bytes = Vec::new();
        for counter in &finals {
            match counter {
                Counter::Hll(sketch) => bytes.extend_from_slice(&sketch.to_bytes()),
                Counter::Exact(_) => unreachable!("kind checked above"),
            }
        }
        write_bytes(dump, &bytes)?;
    }

    let mut rows = Vec::new();
    for (vertex, row) in table.rows().iter().enumerate() {
        for (h, &estimate) in row.iter().enumerate() {
            rows.push(EstimateRow {
                vertex,
                h,
                estimate,
            });
        }
    }
    let rendered = match args.output.format {
        FormatArg::Json => render_json(&AnfReport {
            hmax: table.h_max(),
            rows,
        }),
        FormatArg::Csv => {
            let mut csv = Csv::new("vertex,h,estimate");
            for row in &rows {
                csv.row(&[
                    row.vertex.to_string(),
                    row.h.to_string(),
                    fmt_f64(row.estimate),
                ]);
            }
            csv.finish()
        }
    };
    emit(args.output.out.as_deref(), &rendered)
}
