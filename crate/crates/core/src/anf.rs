//! Synchronous HyperANF: iterate the counter-union recurrence over the whole
//! graph, producing per-vertex estimates of `N(v, h, C)` for `h = 0..=h_max`.
//!
//! Iterations are double-buffered: every counter for step `i` is computed
//! from the step `i-1` snapshot, so vertex processing order cannot matter.
//! The i-th counter of vertex `v` is the union over `adj(v) ∪ {v}` of the
//! previous counters (the self term makes the recurrence agree with the
//! definition `dist(v, v) = 0`); the pure edge-union variant is available
//! with `reflexive = false` for comparison.

use crate::graph::{Graph, SourceSet};
use crate::hll::{Counter, CounterKind, SketchError};
use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnfError {
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error("source set length {got} does not match vertex count {expected}")]
    SourceSetLength { got: usize, expected: usize },
    #[error("epsilon must be a non-negative number")]
    BadEpsilon,
}

/// Per-vertex neighbourhood-function estimates for radii `0..=h_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTable {
    h_max: usize,
    kind: CounterKind,
    rows: Vec<Vec<f64>>,
}

impl EstimateTable {
    pub fn h_max(&self) -> usize {
        self.h_max
    }

    pub fn kind(&self) -> CounterKind {
        self.kind
    }

    /// One row per vertex, each of length `h_max + 1`.
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, v: usize) -> &[f64] {
        &self.rows[v]
    }

    pub fn get(&self, v: usize, h: usize) -> f64 {
        self.rows[v][h]
    }
}

/// One Jacobi step: unions the previous snapshot's counters into each
/// vertex's next counter. Reading only `prev` makes the result independent
/// of any processing order.
pub fn anf_step(
    g: &Graph,
    prev: &[Counter],
    kind: CounterKind,
    reflexive: bool,
) -> Result<Vec<Counter>, AnfError> {
    let mut next = Vec::with_capacity(g.n());
    for v in 0..g.n() {
        let mut c = if reflexive {
            prev[v].clone()
        } else {
            Counter::init(kind, None)?
        };
        for &u in g.neighbors(v) {
            c.merge(&prev[u])?;
        }
        next.push(c);
    }
    Ok(next)
}

fn base_counters(
    g: &Graph,
    sources: &SourceSet,
    kind: CounterKind,
) -> Result<Vec<Counter>, AnfError> {
    if sources.len() != g.n() {
        return Err(AnfError::SourceSetLength {
            got: sources.len(),
            expected: g.n(),
        });
    }
    (0..g.n())
        .map(|v| {
            let member = sources.contains(v).then_some(v as u64);
            Counter::init(kind, member).map_err(AnfError::from)
        })
        .collect()
}

/// Runs the recurrence for `h_max` iterations. Returns the estimate table
/// and the final (radius `h_max`) counter of every vertex.
pub fn hyperanf_seq(
    g: &Graph,
    h_max: usize,
    sources: &SourceSet,
    kind: CounterKind,
    reflexive: bool,
) -> Result<(EstimateTable, Vec<Counter>), AnfError> {
    let mut current = base_counters(g, sources, kind)?;
    let mut rows: Vec<Vec<f64>> = current
        .iter()
        .map(|c| {
            let mut row = Vec::with_capacity(h_max + 1);
            row.push(c.estimate());
            row
        })
        .collect();
    for _ in 1..=h_max {
        let next = anf_step(g, &current, kind, reflexive)?;
        for (row, c) in rows.iter_mut().zip(&next) {
            row.push(c.estimate());
        }
        current = next;
    }
    Ok((
        EstimateTable {
            h_max,
            kind,
            rows,
        },
        current,
    ))
}

/// Iterates until every vertex's estimate moves by at most
/// `epsilon * previous` in one step, then discards the unchanged step.
///
/// Returns the table for radii `0..=h_star`. With exact counters and
/// `epsilon = 0`, `h_star` is the largest eccentricity that still grows a
/// ball, i.e. the graph's (per-component) diameter bound.
pub fn fixpoint_radius(
    g: &Graph,
    sources: &SourceSet,
    kind: CounterKind,
    epsilon: f64,
    reflexive: bool,
) -> Result<(EstimateTable, usize), AnfError> {
    if !(epsilon >= 0.0) {
        return Err(AnfError::BadEpsilon);
    }
    let mut current = base_counters(g, sources, kind)?;
    let mut estimates: Vec<f64> = current.iter().map(Counter::estimate).collect();
    let mut rows: Vec<Vec<f64>> = estimates.iter().map(|&e| alloc::vec![e]).collect();
    let mut h_star = 0;
    while h_star < g.n() {
        let next = anf_step(g, &current, kind, reflexive)?;
        let next_estimates: Vec<f64> = next.iter().map(Counter::estimate).collect();
        let stable = estimates
            .iter()
            .zip(&next_estimates)
            .all(|(&old, &new)| (new - old).abs() <= epsilon * old);
        if stable {
            break;
        }
        for (row, &e) in rows.iter_mut().zip(&next_estimates) {
            row.push(e);
        }
        current = next;
        estimates = next_estimates;
        h_star += 1;
    }
    Ok((
        EstimateTable {
            h_max: h_star,
            kind,
            rows,
        },
        h_star,
    ))
}
