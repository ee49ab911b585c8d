//! Device programs built on the runtime.
//!
//! [`HyperAnfProgram`] estimates, per device, the sizes of its distance-h
//! neighbourhoods for every radius up to a bound: slot `i` carries the
//! counter for radius `i`, rebuilt each firing as the union of the device's
//! own radius `i-1` counter with the neighbours' exported ones. Estimates
//! feed [`harmonic_centrality`], and [`LeaderElectionProgram`] gossips the
//! best (centrality, uid) claim within a hop bound on top of that.

use crate::hll::{Counter, CounterKind};
use crate::runtime::{Context, DeviceId, FieldProgram, FireError, Slot, SOURCE_SENSOR};
use alloc::vec::Vec;
use core::num::NonZeroU32;

/// Truncated harmonic centrality of an estimate row ordered largest radius
/// first: with `len = H + 1` entries this is `sum over h in 1..=H` of the
/// radius-h estimate divided by `h`. Rows with at most one entry (radius 0
/// only) score 0.
pub fn harmonic_centrality(estimates: &[f64]) -> f64 {
    let len = estimates.len();
    if len <= 1 {
        return 0.0;
    }
    estimates[..len - 1]
        .iter()
        .enumerate()
        .map(|(i, &e)| e / (len - 1 - i) as f64)
        .sum()
}

/// Core of both programs: rebuilds counters for radii `0..=h_max`, exports
/// them at slots `0..=h_max`, and returns the estimates ordered largest
/// radius first.
///
/// `unwrap` projects a counter out of a slot value, `wrap` injects one;
/// they let the election program share slots with its claim type.
fn evaluate_anf<V: Clone>(
    ctx: &mut Context<'_, V>,
    h_max: usize,
    kind: CounterKind,
    unwrap: impl Fn(&V) -> Option<&Counter>,
    wrap: impl Fn(Counter) -> V,
) -> Result<Vec<f64>, FireError> {
    let source = ctx.sensor_bool(SOURCE_SENSOR)?;
    let own = if source { Some(ctx.uid()) } else { None };
    let mut counters = Vec::with_capacity(h_max + 1);
    counters.push(Counter::init(kind, own)?);
    for i in 1..=h_max {
        let slot = (i - 1) as Slot;
        let mut cur = counters[i - 1].clone();
        for (device, value) in ctx.neighbor_values(slot) {
            let counter = unwrap(value).ok_or(FireError::SlotType { device, slot })?;
            cur.merge(counter)?;
        }
        counters.push(cur);
    }
    let estimates = counters.iter().rev().map(|c| c.estimate()).collect();
    for (i, c) in counters.into_iter().enumerate() {
        ctx.export(i as Slot, wrap(c));
    }
    Ok(estimates)
}

/// Distributed neighbourhood-size estimation up to a fixed radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperAnfProgram {
    h_max: usize,
    kind: CounterKind,
}

/// Per-firing result of [`HyperAnfProgram`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnfOutput {
    /// `estimates[i]` approximates the number of sources within distance
    /// `h_max - i`, so the largest radius comes first and the last entry is
    /// the radius-0 value (1 for a source, 0 otherwise).
    pub estimates: Vec<f64>,
}

impl HyperAnfProgram {
    pub fn new(h_max: usize, kind: CounterKind) -> Self {
        HyperAnfProgram { h_max, kind }
    }

    pub fn h_max(&self) -> usize {
        self.h_max
    }

    pub fn kind(&self) -> CounterKind {
        self.kind
    }
}

impl FieldProgram for HyperAnfProgram {
    type Value = Counter;
    type Output = AnfOutput;

    fn evaluate(&self, ctx: &mut Context<'_, Counter>) -> Result<AnfOutput, FireError> {
        let estimates = evaluate_anf(ctx, self.h_max, self.kind, |v| Some(v), |c| c)?;
        Ok(AnfOutput { estimates })
    }
}

/// A leadership claim circulating through the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderClaim {
    pub strength: f64,
    pub uid: DeviceId,
    /// Distance, in gossip hops, from the claimed leader.
    pub hops: u32,
}

impl LeaderClaim {
    /// Strict preference: stronger wins, ties go to the higher uid, and
    /// among copies of the same claim the one with fewer hops.
    fn beats(&self, other: &LeaderClaim) -> bool {
        match self.strength.total_cmp(&other.strength) {
            core::cmp::Ordering::Greater => true,
            core::cmp::Ordering::Less => false,
            core::cmp::Ordering::Equal => match self.uid.cmp(&other.uid) {
                core::cmp::Ordering::Greater => true,
                core::cmp::Ordering::Less => false,
                core::cmp::Ordering::Equal => self.hops < other.hops,
            },
        }
    }
}

/// Slot value of [`LeaderElectionProgram`]: counters below, a claim at the
/// top slot.
#[derive(Debug, Clone, PartialEq)]
pub enum ElectionValue {
    Counter(Counter),
    Claim(LeaderClaim),
}

/// Per-firing result of [`LeaderElectionProgram`].
#[derive(Debug, Clone, PartialEq)]
pub struct ElectionOutput {
    pub is_leader: bool,
    /// This device's own centrality estimate.
    pub strength: f64,
    /// Best claim known to this device, itself included.
    pub claim: LeaderClaim,
}

/// Elects the device with the highest truncated harmonic centrality within
/// `grain` gossip hops; the highest uid breaks ties.
///
/// Each firing recomputes the device's own claim from scratch and keeps
/// the best among it and the neighbours' claims aged by one hop, dropping
/// any that would exceed `grain`. Nothing is replayed from the store, so a
/// dead leader's claims gain hops at every round of gossip until they all
/// expire and the election heals on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeaderElectionProgram {
    grain: NonZeroU32,
    h_max: usize,
    kind: CounterKind,
}

impl LeaderElectionProgram {
    pub fn new(grain: NonZeroU32, h_max: usize, kind: CounterKind) -> Self {
        LeaderElectionProgram { grain, h_max, kind }
    }

    pub fn grain(&self) -> u32 {
        self.grain.get()
    }

    pub fn h_max(&self) -> usize {
        self.h_max
    }

    pub fn kind(&self) -> CounterKind {
        self.kind
    }

    fn claim_slot(&self) -> Slot {
        (self.h_max + 1) as Slot
    }
}

impl FieldProgram for LeaderElectionProgram {
    type Value = ElectionValue;
    type Output = ElectionOutput;

    fn evaluate(&self, ctx: &mut Context<'_, ElectionValue>) -> Result<ElectionOutput, FireError> {
        let estimates = evaluate_anf(
            ctx,
            self.h_max,
            self.kind,
            |v| match v {
                ElectionValue::Counter(c) => Some(c),
                ElectionValue::Claim(_) => None,
            },
            ElectionValue::Counter,
        )?;
        let strength = harmonic_centrality(&estimates);
        let slot = self.claim_slot();
        let mut best = LeaderClaim {
            strength,
            uid: ctx.uid(),
            hops: 0,
        };
        for (device, value) in ctx.neighbor_values(slot) {
            let claim = match value {
                ElectionValue::Claim(c) => c,
                ElectionValue::Counter(_) => {
                    return Err(FireError::SlotType { device, slot })
                }
            };
            let hops = claim.hops + 1;
            if hops > self.grain.get() {
                continue;
            }
            let candidate = LeaderClaim {
                strength: claim.strength,
                uid: claim.uid,
                hops,
            };
            if candidate.beats(&best) {
                best = candidate;
            }
        }
        ctx.export(slot, ElectionValue::Claim(best));
        Ok(ElectionOutput {
            is_leader: best.uid == ctx.uid(),
            strength,
            claim: best,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anf::hyperanf_seq;
    use crate::graph::{gen_graph, GenSpec, SourceSet};
    use crate::runtime::{
        fire, run, ChurnScript, NetworkState, Scheduler, SchedulerPolicy, Trace,
    };
    use alloc::vec;

    fn exact() -> CounterKind {
        CounterKind::Exact
    }

    fn grain(g: u32) -> NonZeroU32 {
        NonZeroU32::new(g).unwrap()
    }

    fn run_round_robin<P: FieldProgram>(
        net: &mut NetworkState<P::Value>,
        program: &P,
        sweeps: u64,
    ) -> Trace<P::Output> {
        let events = net.num_live() as u64 * sweeps;
        let mut sched = Scheduler::new(SchedulerPolicy::RoundRobin);
        run(net, program, &mut sched, &ChurnScript::empty(), events).unwrap()
    }

    #[test]
    fn isolated_source_counts_only_itself() {
        let mut net: NetworkState<Counter> = NetworkState::new();
        net.add_device(5, true).unwrap();
        let out = fire(&mut net, 5, &HyperAnfProgram::new(2, exact())).unwrap();
        assert_eq!(out.estimates, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn isolated_non_source_counts_nothing() {
        let mut net: NetworkState<Counter> = NetworkState::new();
        net.add_device(5, false).unwrap();
        let out = fire(&mut net, 5, &HyperAnfProgram::new(1, exact())).unwrap();
        assert_eq!(out.estimates, vec![0.0, 0.0]);
    }

    #[test]
    fn path_estimates_match_ball_sizes_after_enough_sweeps() {
        let g = gen_graph(GenSpec::Path(3)).unwrap();
        let mut net = NetworkState::from_graph(&g, &SourceSet::all(3));
        let program = HyperAnfProgram::new(2, exact());
        let trace = run_round_robin(&mut net, &program, 3);
        let finals = trace.final_outputs();
        assert_eq!(finals[&0].estimates, vec![3.0, 2.0, 1.0]);
        assert_eq!(finals[&1].estimates, vec![3.0, 3.0, 1.0]);
        assert_eq!(finals[&2].estimates, vec![3.0, 2.0, 1.0]);

        // The top-slot exports equal the sequential counters bit for bit.
        let (_, seq) = hyperanf_seq(&g, 2, &SourceSet::all(3), exact(), true).unwrap();
        for v in 0..3u64 {
            let export = net.device(v).unwrap().export().unwrap();
            assert_eq!(export[&2], seq[v as usize]);
        }
    }

    #[test]
    fn harmonic_centrality_frozen_values() {
        assert_eq!(harmonic_centrality(&[3.0, 3.0, 1.0]), 4.5);
        assert_eq!(harmonic_centrality(&[3.0, 2.0, 1.0]), 3.5);
        assert_eq!(harmonic_centrality(&[1.0]), 0.0);
        assert_eq!(harmonic_centrality(&[]), 0.0);
        // Matches the sum over h of estimate(h) / h.
        assert_eq!(harmonic_centrality(&[5.0, 4.0, 2.0, 1.0]), 5.0 / 3.0 + 2.0 + 2.0);
    }

    #[test]
    fn single_device_elects_itself() {
        let mut net: NetworkState<ElectionValue> = NetworkState::new();
        net.add_device(0, true).unwrap();
        let program = LeaderElectionProgram::new(grain(1), 1, exact());
        let out = fire(&mut net, 0, &program).unwrap();
        assert!(out.is_leader);
        assert_eq!(out.claim.uid, 0);
        assert_eq!(out.strength, 1.0);
    }

    #[test]
    fn equal_strength_breaks_ties_to_higher_uid() {
        let g = gen_graph(GenSpec::Path(2)).unwrap();
        let mut net = NetworkState::from_graph(&g, &SourceSet::all(2));
        let program = LeaderElectionProgram::new(grain(2), 2, exact());
        let finals = run_round_robin(&mut net, &program, 6).final_outputs();
        for uid in 0..2u64 {
            assert_eq!(finals[&uid].claim.uid, 1);
            assert_eq!(finals[&uid].strength, 3.0);
        }
        assert!(!finals[&0].is_leader);
        assert!(finals[&1].is_leader);
    }

    #[test]
    fn path_centre_wins_the_election() {
        let g = gen_graph(GenSpec::Path(3)).unwrap();
        let mut net = NetworkState::from_graph(&g, &SourceSet::all(3));
        let program = LeaderElectionProgram::new(grain(2), 2, exact());
        let finals = run_round_robin(&mut net, &program, 6).final_outputs();
        for uid in 0..3u64 {
            assert_eq!(finals[&uid].claim.uid, 1);
        }
        assert_eq!(finals[&0].strength, 3.5);
        assert_eq!(finals[&1].strength, 4.5);
        assert_eq!(finals[&2].strength, 3.5);
        assert!(finals[&1].is_leader && !finals[&0].is_leader && !finals[&2].is_leader);
    }

    #[test]
    fn small_grain_yields_local_leaders() {
        // With grain 1 a claim only reaches direct neighbours, so the path
        // ends cannot learn about the centre and elect themselves.
        let g = gen_graph(GenSpec::Path(5)).unwrap();
        let mut net = NetworkState::from_graph(&g, &SourceSet::all(5));
        let program = LeaderElectionProgram::new(grain(1), 4, exact());
        let finals = run_round_robin(&mut net, &program, 8).final_outputs();
        let leaders: Vec<DeviceId> = (0..5u64)
            .map(|uid| finals[&uid].claim.uid)
            .collect();
        assert_eq!(leaders, vec![0, 2, 2, 2, 4]);
        let elected: Vec<DeviceId> = (0..5u64)
            .filter(|uid| finals[uid].is_leader)
            .collect();
        assert_eq!(elected, vec![0, 2, 4]);
    }

    #[test]
    fn incompatible_sketch_seeds_abort_the_firing() {
        let g = gen_graph(GenSpec::Path(2)).unwrap();
        let mut net = NetworkState::from_graph(&g, &SourceSet::all(2));
        let seed_one = CounterKind::Hll {
            precision: 4,
            seed: 1,
        };
        let seed_two = CounterKind::Hll {
            precision: 4,
            seed: 2,
        };
        fire(&mut net, 0, &HyperAnfProgram::new(1, seed_one)).unwrap();
        let err = fire(&mut net, 1, &HyperAnfProgram::new(1, seed_two)).unwrap_err();
        assert!(matches!(err, FireError::Sketch(_)));
        assert!(net.device(1).unwrap().export().is_none());
    }

    #[test]
    fn hll_and_exact_agree_on_tiny_networks() {
        let g = gen_graph(GenSpec::Ring(4)).unwrap();
        let kind = CounterKind::Hll {
            precision: 10,
            seed: 7,
        };
        let mut net = NetworkState::from_graph(&g, &SourceSet::all(4));
        let program = HyperAnfProgram::new(2, kind);
        let finals = run_round_robin(&mut net, &program, 3).final_outputs();
        // At this precision four distinct items land in four registers, so
        // the linear-counting estimate is exact to within a hair.
        for uid in 0..4u64 {
            let est = &finals[&uid].estimates;
            assert!((est[0] - 4.0).abs() < 0.05, "radius-2 estimate {}", est[0]);
            assert!((est[1] - 3.0).abs() < 0.05, "radius-1 estimate {}", est[1]);
        }
    }
}
