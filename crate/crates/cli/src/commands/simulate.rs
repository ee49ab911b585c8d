use crate::args::{FormatArg, ProgramArg, SchedulerArg, SimulateArgs};
use crate::error::CliError;
use crate::output::{emit, fmt_f64, render_json, write_bytes, Csv};
use crate::sources::parse_sources;
use anfield_core::programs::ElectionValue;
use anfield_core::runtime::{run as run_network, ChurnScript, DeviceId, Slot, Trace};
use anfield_core::{
    Counter, CounterKind, Graph, HyperAnfProgram, LeaderElectionProgram, NetworkState, Scheduler,
    SchedulerPolicy, SourceSet,
};
use serde::Serialize;
use std::num::NonZeroU32;
use std::path::{Path, PathBuf};

#[derive(Serialize)]
struct AnfDevice {
    device: DeviceId,
    /// Estimates by radius, h = 0 first.
    estimates: Vec<f64>,
    converged_at_sweep: Option<u64>,
}

#[derive(Serialize)]
struct AnfSimReport {
    program: &'static str,
    hmax: usize,
    devices: Vec<AnfDevice>,
}

#[derive(Serialize)]
struct ElectionDevice {
    device: DeviceId,
    strength: f64,
    leader: DeviceId,
    is_leader: bool,
    converged_at_sweep: Option<u64>,
}

#[derive(Serialize)]
struct ElectionSimReport {
    program: &'static str,
    hmax: usize,
    grain: u32,
    devices: Vec<ElectionDevice>,
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let g = super::load_graph(&args.graph.graph, args.graph.directed)?;
    if g.is_directed() {
        return Err(CliError::Parameter(String::from(
            "simulate requires an undirected graph",
        )));
    }
    let sources = parse_sources(&args.sources, g.n())?;
    let kind = super::counter_kind(&args.sketch)?;
    let events = match (args.events, args.sweeps) {
        (Some(events), _) => events,
        (None, Some(sweeps)) => sweeps * g.n() as u64,
        (None, None) => (args.hmax as u64 + 2) * g.n() as u64,
    };
    let (churn, churn_path) = load_churn(args.churn.as_deref())?;
    let policy = match args.scheduler {
        SchedulerArg::Rr => SchedulerPolicy::RoundRobin,
        SchedulerArg::Random => SchedulerPolicy::RandomSweep {
            seed: args.sketch.seed,
        },
    };

    match args.program {
        ProgramArg::Anf => run_anf(&args, &g, &sources, kind, policy, &churn, &churn_path, events),
        ProgramArg::Election => {
            if args.dump_sketches.is_some() {
                return Err(CliError::Parameter(String::from(
                    "--dump-sketches only applies to the anf program",
                )));
            }
            run_election(&args, &g, &sources, kind, policy, &churn, &churn_path, events)
        }
    }
}

fn load_churn(path: Option<&Path>) -> Result<(ChurnScript, PathBuf), CliError> {
    match path {
        None => Ok((ChurnScript::empty(), PathBuf::from("<no script>"))),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let script = ChurnScript::parse(&text).map_err(|e| CliError::script(path, e))?;
            Ok((script, path.to_path_buf()))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_anf(
    args: &SimulateArgs,
    g: &Graph,
    sources: &SourceSet,
    kind: CounterKind,
    policy: SchedulerPolicy,
    churn: &ChurnScript,
    churn_path: &Path,
    events: u64,
) -> Result<(), CliError> {
    if args.dump_sketches.is_some() && !matches!(kind, CounterKind::Hll { .. }) {
        return Err(CliError::Parameter(String::from(
            "--dump-sketches requires --kind hll",
        )));
    }
    let program = HyperAnfProgram::new(args.hmax, kind);
    let mut net = NetworkState::from_graph(g, sources);
    let mut sched = Scheduler::new(policy);
    let trace = run_network(&mut net, &program, &mut sched, churn, events)
        .map_err(|e| CliError::script(churn_path, e))?;

    let devices = summarize(&trace, &net, |out| {
        let mut estimates = out.estimates.clone();
        estimates.reverse();
        estimates
    });
    let devices: Vec<AnfDevice> = devices
        .into_iter()
        .map(|(device, estimates, converged_at_sweep)| AnfDevice {
            device,
            estimates: estimates.unwrap_or_default(),
            converged_at_sweep,
        })
        .collect();

    if let Some(dump) = &args.dump_sketches {
        let mut bytes = Vec::new();
        for uid in net.live_ids() {
            let export = net.device(uid).and_then(|d| d.export());
            let counter = export
                .and_then(|e| e.get(&(args.hmax as Slot)))
                .ok_or_else(|| {
                    CliError::Consistency(format!("device {} has no sketch to dump", uid))
                })?;
            match counter {
                Counter::Hll(sketch) => bytes.extend_from_slice(&sketch.to_bytes()),
                Counter::Exact(_) => {
                    return Err(CliError::Consistency(format!(
                        "device {} exported a non-sketch counter",
                        uid
                    )))
                }
            }
        }
        write_bytes(dump, &bytes)?;
    }

    let rendered = match args.output.format {
        FormatArg::Json => render_json(&AnfSimReport {
            program: "anf",
            hmax: args.hmax,
            devices,
        }),
        FormatArg::Csv => {
            let mut csv = Csv::new("device,h,estimate");
            for d in &devices {
                for (h, &estimate) in d.estimates.iter().enumerate() {
                    csv.row(&[d.device.to_string(), h.to_string(), fmt_f64(estimate)]);
                }
            }
            append_convergence(
                &mut csv,
                devices.iter().map(|d| (d.device, d.converged_at_sweep)),
            );
            csv.finish()
        }
    };
    emit(args.output.out.as_deref(), &rendered)
}

#[allow(clippy::too_many_arguments)]
fn run_election(
    args: &SimulateArgs,
    g: &Graph,
    sources: &SourceSet,
    kind: CounterKind,
    policy: SchedulerPolicy,
    churn: &ChurnScript,
    churn_path: &Path,
    events: u64,
) -> Result<(), CliError> {
    let grain = args.grain.unwrap_or(args.hmax as u32);
    let grain = NonZeroU32::new(grain)
        .ok_or_else(|| CliError::Parameter(String::from("--grain must be at least 1")))?;
    let program = LeaderElectionProgram::new(grain, args.hmax, kind);
    let mut net: NetworkState<ElectionValue> = NetworkState::from_graph(g, sources);
    let mut sched = Scheduler::new(policy);
    let trace = run_network(&mut net, &program, &mut sched, churn, events)
        .map_err(|e| CliError::script(churn_path, e))?;

    let devices: Vec<ElectionDevice> = summarize(&trace, &net, |out| {
        (out.strength, out.claim.uid, out.is_leader)
    })
    .into_iter()
    .filter_map(|(device, fields, converged_at_sweep)| {
        fields.map(|(strength, leader, is_leader)| ElectionDevice {
            device,
            strength,
            leader,
            is_leader,
            converged_at_sweep,
        })
    })
    .collect();

    let rendered = match args.output.format {
        FormatArg::Json => render_json(&ElectionSimReport {
            program: "election",
            hmax: args.hmax,
            grain: grain.get(),
            devices,
        }),
        FormatArg::Csv => {
            let mut csv = Csv::new("device,strength,leader,is_leader");
            for d in &devices {
                csv.row(&[
                    d.device.to_string(),
                    fmt_f64(d.strength),
                    d.leader.to_string(),
                    d.is_leader.to_string(),
                ]);
            }
            append_convergence(
                &mut csv,
                devices.iter().map(|d| (d.device, d.converged_at_sweep)),
            );
            csv.finish()
        }
    };
    emit(args.output.out.as_deref(), &rendered)
}

/// Per live device: the projection of its final output (None if it never
/// fired successfully) and the first sweep at or after the last churn from
/// which its output stayed put.
fn summarize<V, O: Clone + PartialEq, T>(
    trace: &Trace<O>,
    net: &NetworkState<V>,
    project: impl Fn(&O) -> T,
) -> Vec<(DeviceId, Option<T>, Option<u64>)> {
    let finals = trace.final_outputs();
    let from_sweep = trace.last_churn_sweep();
    net.live_ids()
        .into_iter()
        .map(|uid| {
            let out = finals.get(&uid).map(&project);
            let converged = trace.converged_at_sweep(uid, from_sweep);
            (uid, out, converged)
        })
        .collect()
}

fn append_convergence(csv: &mut Csv, rows: impl Iterator<Item = (DeviceId, Option<u64>)>) {
    csv.section("device,converged_at_sweep");
    for (device, converged) in rows {
        let cell = converged.map(|s| s.to_string()).unwrap_or_default();
        csv.row(&[device.to_string(), cell]);
    }
}
