use crate::args::{ExactArgs, FormatArg};
use crate::error::CliError;
use crate::output::{emit, fmt_f64, render_json, Csv};
use crate::sources::parse_sources;
use anfield_core::graph::{bfs_neighbourhood, exact_harmonic_classic, truncated_harmonic_oracle};
use serde::Serialize;

#[derive(Serialize)]
struct CountRow {
    vertex: usize,
    h: usize,
    count: u64,
}

#[derive(Serialize)]
struct HarmonicRow {
    vertex: usize,
    classic: f64,
    truncated: f64,
}

#[derive(Serialize)]
struct ExactReport {
    counts: Vec<CountRow>,
    harmonic: Vec<HarmonicRow>,
}

pub fn run(args: ExactArgs) -> Result<(), CliError> {
    let g = super::load_graph(&args.graph.graph, args.graph.directed)?;
    let sources = parse_sources(&args.sources, g.n())?;

    let mut counts = Vec::new();
    let mut harmonic = Vec::new();
    for v in 0..g.n() {
        let cumulative = bfs_neighbourhood(&g, v, args.hmax, &sources)
            .map_err(|e| CliError::Parameter(e.to_string()))?;
        for (h, &count) in cumulative.iter().enumerate() {
            counts.push(CountRow {
                vertex: v,
                h,
                count,
            });
        }
        let truncated = if args.hmax == 0 {
            0.0
        } else {
            truncated_harmonic_oracle(&g, v, args.hmax)
                .map_err(|e| CliError::Parameter(e.to_string()))?
        };
        harmonic.push(HarmonicRow {
            vertex: v,
            classic: exact_harmonic_classic(&g, v),
            truncated,
        });
    }

    let rendered = match args.output.format {
        FormatArg::Json => render_json(&ExactReport { counts, harmonic }),
        FormatArg::Csv => {
            let mut csv = Csv::new("vertex,h,count");
            for row in &counts {
                csv.row(&[
                    row.vertex.to_string(),
                    row.h.to_string(),
                    row.count.to_string(),
                ]);
            }
            csv.section("vertex,harmonic_classic,harmonic_truncated");
            for row in &harmonic {
                csv.row(&[
                    row.vertex.to_string(),
                    fmt_f64(row.classic),
                    fmt_f64(row.truncated),
                ]);
            }
            csv.finish()
        }
    };
    emit(args.output.out.as_deref(), &rendered)
}
