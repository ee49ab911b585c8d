use crate::args::{GenArgs, ShapeArg};
use crate::error::CliError;
use crate::output::emit;
use anfield_core::graph::{gen_graph, GenSpec};

pub fn run(args: GenArgs) -> Result<(), CliError> {
    let spec = match args.shape {
        ShapeArg::Path => GenSpec::Path(require(args.n, "--n", "path")?),
        ShapeArg::Ring => GenSpec::Ring(require(args.n, "--n", "ring")?),
        ShapeArg::Grid => {
            reject(args.n.is_some(), "--n", "grid")?;
            GenSpec::Grid(
                require(args.rows, "--rows", "grid")?,
                require(args.cols, "--cols", "grid")?,
            )
        }
        ShapeArg::Gnp => GenSpec::Gnp {
            n: require(args.n, "--n", "gnp")?,
            p: require(args.p, "--p", "gnp")?,
            seed: args.seed,
        },
    };
    if !matches!(args.shape, ShapeArg::Grid) {
        reject(args.rows.is_some(), "--rows", shape_name(args.shape))?;
        reject(args.cols.is_some(), "--cols", shape_name(args.shape))?;
    }
    if !matches!(args.shape, ShapeArg::Gnp) {
        reject(args.p.is_some(), "--p", shape_name(args.shape))?;
    }
    let g = gen_graph(spec).map_err(|e| CliError::Parameter(e.to_string()))?;
    emit(args.out.as_deref(), &g.to_edge_list())
}

fn shape_name(shape: ShapeArg) -> &'static str {
    match shape {
        ShapeArg::Path => "path",
        ShapeArg::Ring => "ring",
        ShapeArg::Grid => "grid",
        ShapeArg::Gnp => "gnp",
    }
}

fn require<T>(value: Option<T>, flag: &str, shape: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Parameter(format!("{} is required for --shape {}", flag, shape)))
}

fn reject(present: bool, flag: &str, shape: &str) -> Result<(), CliError> {
    if present {
        return Err(CliError::Parameter(format!(
            "{} does not apply to --shape {}",
            flag, shape
        )));
    }
    Ok(())
}
