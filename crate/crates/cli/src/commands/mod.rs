mod anf;
mod compare;
mod exact;
mod generate;
mod simulate;

use crate::args::{Cli, Command, KindArg, SketchArgs};
use crate::error::CliError;
use anfield_core::graph::parse_edge_list;
use anfield_core::{CounterKind, Graph};
use std::path::Path;

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Exact(args) => exact::run(args),
        Command::Anf(args) => anf::run(args),
        Command::Simulate(args) => simulate::run(args),
        Command::Compare(args) => compare::run(args),
        Command::Gen(args) => generate::run(args),
    }
}

/// Loads an edge-list graph. The `--directed` flag overrides the file
/// header; without it the header (or undirected default) applies.
pub fn load_graph(path: &Path, directed: bool) -> Result<Graph, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let outcome =
        parse_edge_list(&text, directed.then_some(true), None).map_err(|e| CliError::parse(path, e))?;
    Ok(outcome.graph)
}

pub fn counter_kind(sketch: &SketchArgs) -> Result<CounterKind, CliError> {
    match sketch.kind {
        KindArg::Exact => Ok(CounterKind::Exact),
        KindArg::Hll => {
            let b = sketch.registers_log2;
            if !(4..=16).contains(&b) {
                return Err(CliError::Parameter(format!(
                    "--registers-log2 must be between 4 and 16, got {}",
                    b
                )));
            }
            Ok(CounterKind::Hll {
                precision: b,
                seed: sketch.seed,
            })
        }
    }
}
