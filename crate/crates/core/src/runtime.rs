//! A deterministic simulator for a network of devices firing in
//! asynchronous rounds.
//!
//! Each device repeatedly evaluates a [`FieldProgram`] against a context
//! exposing three capabilities:
//!
//! * neighbourhood observation: per-slot maps from neighbours to the value
//!   they exported at that slot in their own latest firing, plus the firing
//!   device's value computed in the current evaluation
//!   ([`Context::nbr_field`]);
//! * state preservation: a per-device store carried across firings
//!   ([`Context::rep_update`]);
//! * domain restriction: a device exports only the slots of the branch it
//!   evaluated, and a slot map only ever contains devices that exported
//!   that slot, so devices in different branches are invisible to each
//!   other.
//!
//! Slot ids are chosen statically by the program, so alignment across
//! devices holds by construction. A firing replaces the device's export
//! atomically; there is no expiry, topology is authoritative: a device
//! never reads exports of non-neighbours or dead devices. Everything is
//! driven single-threaded by a seeded fair scheduler interleaved with a
//! scripted churn sequence, making whole runs reproducible byte for byte.

use crate::graph::{Graph, SourceSet};
use crate::hll::SketchError;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Device identifier; doubles as the vertex id and the sketch item id.
pub type DeviceId = u64;

/// Export slot identifier, fixed per program site.
pub type Slot = u32;

/// Name of the boolean sensor that marks membership in the source set `C`.
pub const SOURCE_SENSOR: &str = "source";

#[derive(Debug, Clone, PartialEq)]
pub enum SensorValue {
    Bool(bool),
    U64(u64),
    F64(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FireError {
    #[error("device {0} does not exist")]
    UnknownDevice(DeviceId),
    #[error("device {0} is dead and cannot fire")]
    DeadDevice(DeviceId),
    #[error("sensor '{0}' missing or of the wrong type")]
    MissingSensor(String),
    #[error("neighbour {device} exported an unexpected value type at slot {slot}")]
    SlotType { device: DeviceId, slot: Slot },
    #[error(transparent)]
    Sketch(#[from] SketchError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptError {
    #[error("churn script parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("churn script entry {index} is invalid: {reason}")]
    Invalid { index: usize, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetError {
    #[error("device {0} does not exist")]
    UnknownDevice(DeviceId),
    #[error("device {0} is dead")]
    DeadDevice(DeviceId),
    #[error("device {0} already exists")]
    DuplicateDevice(DeviceId),
    #[error("self-edges are not allowed (device {0})")]
    SelfEdge(DeviceId),
}

/// One device: identity, sensors, the slot values published by its latest
/// firing, and the persistent store backing `rep`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState<V> {
    uid: DeviceId,
    sensors: BTreeMap<String, SensorValue>,
    export: Option<BTreeMap<Slot, V>>,
    rep: BTreeMap<Slot, V>,
    alive: bool,
}

impl<V> DeviceState<V> {
    fn new(uid: DeviceId, source: bool) -> Self {
        let mut sensors = BTreeMap::new();
        sensors.insert(SOURCE_SENSOR.to_string(), SensorValue::Bool(source));
        DeviceState {
            uid,
            sensors,
            export: None,
            rep: BTreeMap::new(),
            alive: true,
        }
    }

    pub fn uid(&self) -> DeviceId {
        self.uid
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    pub fn sensor(&self, name: &str) -> Option<&SensorValue> {
        self.sensors.get(name)
    }

    /// Latest export, or `None` if the device has never fired (or is dead).
    pub fn export(&self) -> Option<&BTreeMap<Slot, V>> {
        if self.alive {
            self.export.as_ref()
        } else {
            None
        }
    }
}

/// The whole simulated network: devices, live undirected topology, and an
/// event counter.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState<V> {
    devices: BTreeMap<DeviceId, DeviceState<V>>,
    adjacency: BTreeMap<DeviceId, BTreeSet<DeviceId>>,
    clock: u64,
}

impl<V> Default for NetworkState<V> {
    fn default() -> Self {
        NetworkState {
            devices: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            clock: 0,
        }
    }
}

impl<V> NetworkState<V> {
    pub fn new() -> Self {
        Self::default()
    }

    /// One device per graph vertex (uid = vertex id), edges copied over,
    /// `source` sensors taken from the source set.
    pub fn from_graph(g: &Graph, sources: &SourceSet) -> Self {
        let mut net = NetworkState::new();
        for v in 0..g.n() {
            net.add_device(v as DeviceId, sources.contains(v)).unwrap();
        }
        for u in 0..g.n() {
            for &v in g.neighbors(u) {
                if u < v {
                    net.link(u as DeviceId, v as DeviceId).unwrap();
                }
            }
        }
        net
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn device(&self, uid: DeviceId) -> Option<&DeviceState<V>> {
        self.devices.get(&uid)
    }

    /// Live device ids in ascending order.
    pub fn live_ids(&self) -> Vec<DeviceId> {
        self.devices
            .values()
            .filter(|d| d.alive)
            .map(|d| d.uid)
            .collect()
    }

    pub fn num_live(&self) -> usize {
        self.devices.values().filter(|d| d.alive).count()
    }

    /// Live neighbours of `d`, ascending.
    pub fn neighbors_of(&self, d: DeviceId) -> impl Iterator<Item = DeviceId> + '_ {
        self.adjacency.get(&d).into_iter().flatten().copied()
    }

    /// Adds a device, or revives a dead one with completely fresh state.
    pub fn add_device(&mut self, uid: DeviceId, source: bool) -> Result<(), NetError> {
        if let Some(existing) = self.devices.get(&uid) {
            if existing.alive {
                return Err(NetError::DuplicateDevice(uid));
            }
        }
        self.devices.insert(uid, DeviceState::new(uid, source));
        Ok(())
    }

    /// Marks a device dead, dropping its export, store, and every incident
    /// edge (the topology only relates live devices).
    pub fn remove_device(&mut self, uid: DeviceId) -> Result<(), NetError> {
        let dev = self
            .devices
            .get_mut(&uid)
            .ok_or(NetError::UnknownDevice(uid))?;
        if !dev.alive {
            return Err(NetError::DeadDevice(uid));
        }
        dev.alive = false;
        dev.export = None;
        dev.rep.clear();
        if let Some(peers) = self.adjacency.remove(&uid) {
            for p in peers {
                if let Some(back) = self.adjacency.get_mut(&p) {
                    back.remove(&uid);
                }
            }
        }
        Ok(())
    }

    /// Adds an undirected edge between two live devices. Idempotent.
    pub fn link(&mut self, u: DeviceId, v: DeviceId) -> Result<(), NetError> {
        if u == v {
            return Err(NetError::SelfEdge(u));
        }
        self.require_alive(u)?;
        self.require_alive(v)?;
        self.adjacency.entry(u).or_default().insert(v);
        self.adjacency.entry(v).or_default().insert(u);
        Ok(())
    }

    /// Removes an edge if present. Removing an absent edge is a no-op.
    pub fn unlink(&mut self, u: DeviceId, v: DeviceId) -> Result<(), NetError> {
        self.require_alive(u)?;
        self.require_alive(v)?;
        if let Some(s) = self.adjacency.get_mut(&u) {
            s.remove(&v);
        }
        if let Some(s) = self.adjacency.get_mut(&v) {
            s.remove(&u);
        }
        Ok(())
    }

    pub fn set_source(&mut self, uid: DeviceId, source: bool) -> Result<(), NetError> {
        self.require_alive(uid)?;
        let dev = self.devices.get_mut(&uid).unwrap();
        dev.sensors
            .insert(SOURCE_SENSOR.to_string(), SensorValue::Bool(source));
        Ok(())
    }

    fn require_alive(&self, uid: DeviceId) -> Result<(), NetError> {
        match self.devices.get(&uid) {
            None => Err(NetError::UnknownDevice(uid)),
            Some(d) if !d.alive => Err(NetError::DeadDevice(uid)),
            Some(_) => Ok(()),
        }
    }

    fn apply(&mut self, event: &ChurnEvent) -> Result<(), NetError> {
        match *event {
            ChurnEvent::AddEdge(u, v) => self.link(u, v),
            ChurnEvent::RemoveEdge(u, v) => self.unlink(u, v),
            ChurnEvent::AddDevice(u) => self.add_device(u, false),
            ChurnEvent::RemoveDevice(u) => self.remove_device(u),
            ChurnEvent::SetSource(u, s) => self.set_source(u, s),
        }
    }

    /// Densely renumbers the live devices (ascending uid) into a graph plus
    /// the source set read from their sensors. Returns the uid of each
    /// vertex so callers can map results back.
    pub fn snapshot_graph(&self) -> (Graph, SourceSet, Vec<DeviceId>) {
        let uids = self.live_ids();
        let index: BTreeMap<DeviceId, usize> =
            uids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut edges = Vec::new();
        for (&u, peers) in &self.adjacency {
            for &v in peers {
                if u < v {
                    edges.push((index[&u], index[&v]));
                }
            }
        }
        let graph = Graph::from_edges(uids.len(), false, edges).unwrap();
        let source_ids: Vec<usize> = uids
            .iter()
            .filter(|&&u| {
                matches!(
                    self.devices[&u].sensor(SOURCE_SENSOR),
                    Some(SensorValue::Bool(true))
                )
            })
            .map(|u| index[u])
            .collect();
        let sources = SourceSet::from_ids(uids.len(), &source_ids).unwrap();
        (graph, sources, uids)
    }
}

/// Evaluation context handed to a program while one device fires.
pub struct Context<'a, V> {
    uid: DeviceId,
    sensors: &'a BTreeMap<String, SensorValue>,
    devices: &'a BTreeMap<DeviceId, DeviceState<V>>,
    neighbor_ids: &'a [DeviceId],
    rep: &'a mut BTreeMap<Slot, V>,
    export: BTreeMap<Slot, V>,
}

impl<V> Context<'_, V> {
    pub fn uid(&self) -> DeviceId {
        self.uid
    }

    pub fn sensor(&self, name: &str) -> Option<&SensorValue> {
        self.sensors.get(name)
    }

    pub fn sensor_bool(&self, name: &str) -> Result<bool, FireError> {
        match self.sensors.get(name) {
            Some(SensorValue::Bool(b)) => Ok(*b),
            _ => Err(FireError::MissingSensor(name.to_string())),
        }
    }

    /// The neighbouring field at `slot`: this device's own value as computed
    /// in the current evaluation, then each live neighbour's latest export
    /// at that slot in ascending uid order. Neighbours that never fired, or
    /// whose branch did not export the slot, are simply absent.
    pub fn nbr_field<'c>(
        &'c self,
        slot: Slot,
        own: &'c V,
    ) -> impl Iterator<Item = (DeviceId, &'c V)> + 'c {
        core::iter::once((self.uid, own)).chain(self.neighbor_values(slot))
    }

    /// Like [`Context::nbr_field`] but without the self entry.
    pub fn neighbor_values<'c>(
        &'c self,
        slot: Slot,
    ) -> impl Iterator<Item = (DeviceId, &'c V)> + 'c {
        self.neighbor_ids.iter().filter_map(move |id| {
            self.devices
                .get(id)
                .filter(|d| d.alive)
                .and_then(|d| d.export.as_ref())
                .and_then(|e| e.get(&slot))
                .map(|v| (*id, v))
        })
    }

    /// Publishes `value` at `slot`. The full slot map replaces the device's
    /// export atomically when the firing completes.
    pub fn export(&mut self, slot: Slot, value: V) {
        self.export.insert(slot, value);
    }

    /// Time evolution: applies `step` to the value this device stored at
    /// `slot` in its previous firing (or to `init` on the first one), stores
    /// the result and returns it.
    pub fn rep_update(&mut self, slot: Slot, init: V, step: impl FnOnce(&V) -> V) -> V
    where
        V: Clone,
    {
        let prev = self.rep.get(&slot).unwrap_or(&init);
        let next = step(prev);
        self.rep.insert(slot, next.clone());
        next
    }
}

/// A program evaluated by devices. Implementations must be deterministic
/// functions of the context; all device state lives in the runtime.
pub trait FieldProgram {
    /// Type of exported slot values.
    type Value: Clone;
    /// Observable per-firing result recorded in traces.
    type Output: Clone + PartialEq;

    fn evaluate(&self, ctx: &mut Context<'_, Self::Value>) -> Result<Self::Output, FireError>;
}

/// Fires one device: evaluates the program and atomically installs the new
/// export and `rep` store. An evaluation error aborts the firing, leaving
/// the device exactly as it was.
pub fn fire<P: FieldProgram>(
    net: &mut NetworkState<P::Value>,
    d: DeviceId,
    program: &P,
) -> Result<P::Output, FireError> {
    let dev = net.devices.get(&d).ok_or(FireError::UnknownDevice(d))?;
    if !dev.alive {
        return Err(FireError::DeadDevice(d));
    }
    let sensors = dev.sensors.clone();
    let mut rep = dev.rep.clone();
    let neighbor_ids: Vec<DeviceId> = net.neighbors_of(d).collect();
    let mut ctx = Context {
        uid: d,
        sensors: &sensors,
        devices: &net.devices,
        neighbor_ids: &neighbor_ids,
        rep: &mut rep,
        export: BTreeMap::new(),
    };
    let result = program.evaluate(&mut ctx);
    let export = ctx.export;
    net.clock += 1;
    if result.is_ok() {
        let dev = net.devices.get_mut(&d).unwrap();
        dev.export = Some(export);
        dev.rep = rep;
    }
    result
}

/// Scheduling policy for choosing which device fires next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerPolicy {
    /// Ascending uid order, repeated.
    RoundRobin,
    /// A fresh seeded permutation of the live devices per sweep.
    RandomSweep { seed: u64 },
}

/// Fair scheduler: firings are organized in sweeps, and every sweep fires
/// each device that was live when the sweep started exactly once. Devices
/// removed mid-sweep are skipped; devices added mid-sweep join the next
/// sweep.
#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    rng: Option<ChaCha8Rng>,
    queue: VecDeque<DeviceId>,
    sweeps_started: u64,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy) -> Self {
        let rng = match policy {
            SchedulerPolicy::RoundRobin => None,
            SchedulerPolicy::RandomSweep { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Scheduler {
            policy,
            rng,
            queue: VecDeque::new(),
            sweeps_started: 0,
        }
    }

    pub fn policy(&self) -> SchedulerPolicy {
        self.policy
    }

    /// Index of the sweep currently being emitted (0 before any firing).
    pub fn current_sweep(&self) -> u64 {
        self.sweeps_started.saturating_sub(1)
    }

    /// Next live device to fire and the index of the sweep it belongs to.
    /// `live` must be ascending.
    fn next_device(&mut self, live: &[DeviceId]) -> Option<(DeviceId, u64)> {
        loop {
            if let Some(d) = self.queue.pop_front() {
                if live.binary_search(&d).is_ok() {
                    return Some((d, self.current_sweep()));
                }
                continue;
            }
            if live.is_empty() {
                return None;
            }
            let mut order: Vec<DeviceId> = live.to_vec();
            if let Some(rng) = self.rng.as_mut() {
                order.shuffle(rng);
            }
            self.queue.extend(order);
            self.sweeps_started += 1;
        }
    }
}

/// A scripted churn event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChurnEvent {
    AddEdge(DeviceId, DeviceId),
    RemoveEdge(DeviceId, DeviceId),
    AddDevice(DeviceId),
    RemoveDevice(DeviceId),
    SetSource(DeviceId, bool),
}

/// A churn event bound to the firing-event index it precedes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChurnEntry {
    pub at: u64,
    pub event: ChurnEvent,
}

/// An ordered, timed sequence of topology and sensor changes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChurnScript {
    entries: Vec<ChurnEntry>,
}

impl ChurnScript {
    pub fn empty() -> Self {
        ChurnScript::default()
    }

    /// Wraps entries, rejecting decreasing event indices.
    pub fn from_entries(entries: Vec<ChurnEntry>) -> Result<Self, ScriptError> {
        for (i, pair) in entries.windows(2).enumerate() {
            if pair[1].at < pair[0].at {
                return Err(ScriptError::Invalid {
                    index: i + 1,
                    reason: format!(
                        "event index {} decreases below {}",
                        pair[1].at, pair[0].at
                    ),
                });
            }
        }
        Ok(ChurnScript { entries })
    }

    /// Parses the script text format: one
    /// `<event-index> <op> <args...>` per line, `#` comments, blank lines
    /// ignored. Ops: `add-edge u v`, `remove-edge u v`, `add-device u`,
    /// `remove-device u`, `set-source u 0|1`.
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut entries = Vec::new();
        let mut prev_at: Option<u64> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let at = parse_u64(parts.next(), line, "event index")?;
            if let Some(prev) = prev_at {
                if at < prev {
                    return Err(ScriptError::Parse {
                        line,
                        reason: format!("event index {} decreases below {}", at, prev),
                    });
                }
            }
            prev_at = Some(at);
            let op = parts.next().ok_or_else(|| ScriptError::Parse {
                line,
                reason: String::from("missing operation"),
            })?;
            let event = match op {
                "add-edge" | "remove-edge" => {
                    let u = parse_u64(parts.next(), line, "device id")?;
                    let v = parse_u64(parts.next(), line, "device id")?;
                    if op == "add-edge" {
                        ChurnEvent::AddEdge(u, v)
                    } else {
                        ChurnEvent::RemoveEdge(u, v)
                    }
                }
                "add-device" => ChurnEvent::AddDevice(parse_u64(parts.next(), line, "device id")?),
                "remove-device" => {
                    ChurnEvent::RemoveDevice(parse_u64(parts.next(), line, "device id")?)
                }
                "set-source" => {
                    let u = parse_u64(parts.next(), line, "device id")?;
                    let flag = match parts.next() {
                        Some("0") => false,
                        Some("1") => true,
                        _ => {
                            return Err(ScriptError::Parse {
                                line,
                                reason: String::from("set-source flag must be 0 or 1"),
                            })
                        }
                    };
                    ChurnEvent::SetSource(u, flag)
                }
                other => {
                    return Err(ScriptError::Parse {
                        line,
                        reason: format!("unknown operation '{}'", other),
                    })
                }
            };
            if parts.next().is_some() {
                return Err(ScriptError::Parse {
                    line,
                    reason: String::from("trailing tokens"),
                });
            }
            entries.push(ChurnEntry { at, event });
        }
        Ok(ChurnScript { entries })
    }

    pub fn entries(&self) -> &[ChurnEntry] {
        &self.entries
    }

    /// Event index of the last entry, if any.
    pub fn last_index(&self) -> Option<u64> {
        self.entries.last().map(|e| e.at)
    }

    /// Checks every entry against the evolving device population, starting
    /// from `initial` live devices: edges and sensors may only reference
    /// present devices, devices are added at most once and removed only
    /// while present.
    pub fn validate(&self, initial: &BTreeSet<DeviceId>) -> Result<(), ScriptError> {
        let mut present = initial.clone();
        for (index, entry) in self.entries.iter().enumerate() {
            let fail = |reason: String| ScriptError::Invalid { index, reason };
            match entry.event {
                ChurnEvent::AddEdge(u, v) | ChurnEvent::RemoveEdge(u, v) => {
                    if u == v {
                        return Err(fail(format!("self-edge on device {}", u)));
                    }
                    for d in [u, v] {
                        if !present.contains(&d) {
                            return Err(fail(format!("unknown device {}", d)));
                        }
                    }
                }
                ChurnEvent::AddDevice(u) => {
                    if !present.insert(u) {
                        return Err(fail(format!("device {} already present", u)));
                    }
                }
                ChurnEvent::RemoveDevice(u) => {
                    if !present.remove(&u) {
                        return Err(fail(format!("unknown device {}", u)));
                    }
                }
                ChurnEvent::SetSource(u, _) => {
                    if !present.contains(&u) {
                        return Err(fail(format!("unknown device {}", u)));
                    }
                }
            }
        }
        Ok(())
    }
}

fn parse_u64(token: Option<&str>, line: usize, what: &str) -> Result<u64, ScriptError> {
    let token = token.ok_or_else(|| ScriptError::Parse {
        line,
        reason: format!("missing {}", what),
    })?;
    token.parse::<u64>().map_err(|_| ScriptError::Parse {
        line,
        reason: format!("'{}' is not a valid {}", token, what),
    })
}

/// One firing as recorded in a [`Trace`]. An `Err` output means the firing
/// aborted and the device kept its previous export.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringRecord<O> {
    pub event: u64,
    pub sweep: u64,
    pub device: DeviceId,
    pub output: Result<O, FireError>,
}

/// Complete record of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<O> {
    pub firings: Vec<FiringRecord<O>>,
    /// `(event index, sweep)` of every churn entry that was applied.
    pub churn_applied: Vec<(u64, u64)>,
}

impl<O> Default for Trace<O> {
    fn default() -> Self {
        Trace {
            firings: Vec::new(),
            churn_applied: Vec::new(),
        }
    }
}

impl<O: Clone + PartialEq> Trace<O> {
    /// Sweep of the last applied churn entry (0 when there was none).
    pub fn last_churn_sweep(&self) -> u64 {
        self.churn_applied.last().map(|&(_, s)| s).unwrap_or(0)
    }

    /// Latest successful output of each device.
    pub fn final_outputs(&self) -> BTreeMap<DeviceId, O> {
        let mut out = BTreeMap::new();
        for rec in &self.firings {
            if let Ok(o) = &rec.output {
                out.insert(rec.device, o.clone());
            }
        }
        out
    }

    /// First sweep at or after `from_sweep` from which every later firing of
    /// `device` produced the same output as its final one. `None` if the
    /// device never fired successfully from that sweep on.
    pub fn converged_at_sweep(&self, device: DeviceId, from_sweep: u64) -> Option<u64> {
        let outputs: Vec<(u64, &O)> = self
            .firings
            .iter()
            .filter(|r| r.device == device && r.sweep >= from_sweep)
            .filter_map(|r| r.output.as_ref().ok().map(|o| (r.sweep, o)))
            .collect();
        let (_, final_output) = *outputs.last()?;
        let mut converged = None;
        for &(sweep, out) in &outputs {
            if out == final_output {
                converged.get_or_insert(sweep);
            } else {
                converged = None;
            }
        }
        converged
    }
}

/// Runs `total_events` firing events, applying churn entries right before
/// the event index they are bound to. Fully deterministic given the initial
/// network, the scheduler seed, and the script.
///
/// The script is validated against the network's current live devices
/// before anything runs.
pub fn run<P: FieldProgram>(
    net: &mut NetworkState<P::Value>,
    program: &P,
    scheduler: &mut Scheduler,
    churn: &ChurnScript,
    total_events: u64,
) -> Result<Trace<P::Output>, ScriptError> {
    churn.validate(&net.live_ids().into_iter().collect())?;
    let mut trace = Trace::default();
    let mut cursor = 0;
    let entries = churn.entries();
    for event in 0..total_events {
        while cursor < entries.len() && entries[cursor].at <= event {
            let index = cursor;
            net.apply(&entries[index].event)
                .map_err(|e| ScriptError::Invalid {
                    index,
                    reason: e.to_string(),
                })?;
            trace.churn_applied.push((event, scheduler.current_sweep()));
            cursor += 1;
        }
        let live = net.live_ids();
        if let Some((d, sweep)) = scheduler.next_device(&live) {
            let output = fire(net, d, program);
            trace.firings.push(FiringRecord {
                event,
                sweep,
                device: d,
                output,
            });
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_graph, GenSpec};
    use alloc::vec;

    /// Exports its uid at slot 0; outputs the uids visible in its slot-0
    /// neighbouring field (self included).
    struct VisibleUids;

    impl FieldProgram for VisibleUids {
        type Value = u64;
        type Output = Vec<u64>;

        fn evaluate(&self, ctx: &mut Context<'_, u64>) -> Result<Vec<u64>, FireError> {
            let own = ctx.uid();
            let seen: Vec<u64> = ctx.nbr_field(0, &own).map(|(_, &v)| v).collect();
            ctx.export(0, own);
            Ok(seen)
        }
    }

    /// Counts its own firings through the rep store.
    struct FiringCounter;

    impl FieldProgram for FiringCounter {
        type Value = u64;
        type Output = u64;

        fn evaluate(&self, ctx: &mut Context<'_, u64>) -> Result<u64, FireError> {
            Ok(ctx.rep_update(0, 0, |prev| prev + 1))
        }
    }

    /// Domain restriction: sources export at slot 1, the rest at slot 2;
    /// each device outputs how many devices it sees in its own branch.
    struct BranchCensus;

    impl FieldProgram for BranchCensus {
        type Value = u64;
        type Output = usize;

        fn evaluate(&self, ctx: &mut Context<'_, u64>) -> Result<usize, FireError> {
            let source = ctx.sensor_bool(SOURCE_SENSOR)?;
            let slot = if source { 1 } else { 2 };
            let own = ctx.uid();
            let count = ctx.nbr_field(slot, &own).count();
            ctx.export(slot, own);
            Ok(count)
        }
    }

    fn p3_net() -> NetworkState<u64> {
        let g = gen_graph(GenSpec::Path(3)).unwrap();
        NetworkState::from_graph(&g, &SourceSet::all(3))
    }

    #[test]
    fn isolated_device_sees_only_itself() {
        let mut net: NetworkState<u64> = NetworkState::new();
        net.add_device(7, true).unwrap();
        let seen = fire(&mut net, 7, &VisibleUids).unwrap();
        assert_eq!(seen, vec![7]);
    }

    #[test]
    fn identical_context_gives_identical_exports() {
        let mut net = p3_net();
        fire(&mut net, 0, &VisibleUids).unwrap();
        let first = net.device(0).unwrap().export().unwrap().clone();
        let out = fire(&mut net, 0, &VisibleUids).unwrap();
        assert_eq!(&first, net.device(0).unwrap().export().unwrap());
        assert_eq!(out, vec![0]);
    }

    #[test]
    fn neighbour_reads_follow_topology() {
        let mut net = p3_net();
        fire(&mut net, 1, &VisibleUids).unwrap();
        fire(&mut net, 0, &VisibleUids).unwrap();
        // 0 sees itself and 1's export.
        assert_eq!(fire(&mut net, 0, &VisibleUids).unwrap(), vec![0, 1]);
        net.unlink(0, 1).unwrap();
        assert_eq!(fire(&mut net, 0, &VisibleUids).unwrap(), vec![0]);
    }

    #[test]
    fn dead_devices_cannot_fire_and_are_not_read() {
        let mut net = p3_net();
        fire(&mut net, 2, &VisibleUids).unwrap();
        net.remove_device(2).unwrap();
        assert_eq!(fire(&mut net, 2, &VisibleUids), Err(FireError::DeadDevice(2)));
        // 1 no longer sees 2's old export.
        fire(&mut net, 1, &VisibleUids).unwrap();
        assert_eq!(fire(&mut net, 1, &VisibleUids).unwrap(), vec![1]);
        assert!(net.device(2).unwrap().export().is_none());
    }

    #[test]
    fn rep_store_survives_firings() {
        let mut net: NetworkState<u64> = NetworkState::new();
        net.add_device(0, false).unwrap();
        for expected in 1..=4 {
            assert_eq!(fire(&mut net, 0, &FiringCounter).unwrap(), expected);
        }
    }

    #[test]
    fn branches_are_mutually_invisible() {
        // P4 with sources {0, 1}: each branch only counts its own members.
        let g = gen_graph(GenSpec::Path(4)).unwrap();
        let sources = SourceSet::from_ids(4, &[0, 1]).unwrap();
        let mut net = NetworkState::from_graph(&g, &sources);
        let mut sched = Scheduler::new(SchedulerPolicy::RoundRobin);
        let trace = run(&mut net, &BranchCensus, &mut sched, &ChurnScript::empty(), 8).unwrap();
        let finals = trace.final_outputs();
        assert_eq!(finals[&0], 2); // sees itself and source 1
        assert_eq!(finals[&1], 2); // sees itself and source 0; 2 is hidden
        assert_eq!(finals[&2], 2); // sees itself and non-source 3
        assert_eq!(finals[&3], 2);
    }

    #[test]
    fn run_is_deterministic() {
        let script = ChurnScript::parse("3 remove-edge 0 1\n5 set-source 2 0\n").unwrap();
        let make = || {
            let mut net = p3_net();
            let mut sched = Scheduler::new(SchedulerPolicy::RandomSweep { seed: 99 });
            run(&mut net, &VisibleUids, &mut sched, &script, 12).unwrap()
        };
        assert_eq!(make(), make());
    }

    #[test]
    fn empty_network_gives_empty_trace() {
        let mut net: NetworkState<u64> = NetworkState::new();
        let mut sched = Scheduler::new(SchedulerPolicy::RoundRobin);
        let trace = run(&mut net, &VisibleUids, &mut sched, &ChurnScript::empty(), 10).unwrap();
        assert!(trace.firings.is_empty());
    }

    #[test]
    fn random_sweeps_partition_into_permutations() {
        let g = gen_graph(GenSpec::Ring(6)).unwrap();
        let mut net = NetworkState::from_graph(&g, &SourceSet::all(6));
        let mut sched = Scheduler::new(SchedulerPolicy::RandomSweep { seed: 4 });
        let trace = run(&mut net, &VisibleUids, &mut sched, &ChurnScript::empty(), 30).unwrap();
        for (sweep, chunk) in trace.firings.chunks(6).enumerate() {
            let mut devices: Vec<DeviceId> = chunk.iter().map(|r| r.device).collect();
            assert!(chunk.iter().all(|r| r.sweep == sweep as u64));
            devices.sort_unstable();
            assert_eq!(devices, vec![0, 1, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn scheduler_skips_devices_removed_mid_sweep() {
        let script = ChurnScript::parse("1 remove-device 2\n").unwrap();
        let mut net = p3_net();
        let mut sched = Scheduler::new(SchedulerPolicy::RoundRobin);
        let trace = run(&mut net, &VisibleUids, &mut sched, &script, 7).unwrap();
        let fired: Vec<DeviceId> = trace.firings.iter().map(|r| r.device).collect();
        // Sweep 0 loses device 2; later sweeps alternate 0, 1.
        assert_eq!(fired, vec![0, 1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn churn_script_parses_and_validates() {
        let text = "# warm-up\n0 add-edge 0 2\n2 set-source 1 0\n2 add-device 9\n4 remove-device 9\n";
        let script = ChurnScript::parse(text).unwrap();
        assert_eq!(script.entries().len(), 4);
        assert_eq!(script.last_index(), Some(4));
        let initial: BTreeSet<DeviceId> = [0, 1, 2].into_iter().collect();
        script.validate(&initial).unwrap();

        let err = ChurnScript::parse("5 add-edge 0 1\n3 add-edge 1 2\n").unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 2, .. }));
        let err = ChurnScript::parse("0 set-source 1 yes\n").unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 1, .. }));
        let err = ChurnScript::parse("0 teleport 1\n").unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 1, .. }));

        let bad = ChurnScript::parse("0 add-edge 0 9\n").unwrap();
        assert!(matches!(
            bad.validate(&initial).unwrap_err(),
            ScriptError::Invalid { index: 0, .. }
        ));
    }

    #[test]
    fn run_rejects_scripts_referencing_unknown_devices() {
        let script = ChurnScript::parse("2 remove-device 17\n").unwrap();
        let mut net = p3_net();
        let mut sched = Scheduler::new(SchedulerPolicy::RoundRobin);
        let err = run(&mut net, &VisibleUids, &mut sched, &script, 5).unwrap_err();
        assert!(matches!(err, ScriptError::Invalid { index: 0, .. }));
    }

    #[test]
    fn snapshot_graph_remaps_to_dense_ids() {
        let mut net: NetworkState<u64> = NetworkState::new();
        for uid in [2u64, 5, 9] {
            net.add_device(uid, uid == 5).unwrap();
        }
        net.link(2, 9).unwrap();
        let (graph, sources, uids) = net.snapshot_graph();
        assert_eq!(uids, vec![2, 5, 9]);
        assert_eq!(graph.n(), 3);
        assert_eq!(graph.neighbors(0), &[2]);
        assert!(sources.contains(1));
        assert!(!sources.contains(0));
    }

    #[test]
    fn converged_at_sweep_finds_the_stable_suffix() {
        let mut trace: Trace<u64> = Trace::default();
        for (sweep, out) in [(0, 1u64), (1, 2), (2, 3), (3, 3), (4, 3)] {
            trace.firings.push(FiringRecord {
                event: sweep,
                sweep,
                device: 0,
                output: Ok(out),
            });
        }
        assert_eq!(trace.converged_at_sweep(0, 0), Some(2));
        assert_eq!(trace.converged_at_sweep(0, 3), Some(3));
        assert_eq!(trace.converged_at_sweep(1, 0), None);
    }
}
