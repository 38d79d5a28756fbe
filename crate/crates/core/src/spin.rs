//! q-spin systems: interaction matrix, external fields, configurations,
//! pinnings, and configuration weights.
//!
//! The weight of a configuration is the product of the interaction over edges
//! and the field over vertices. Weights are carried as an exact zero or a
//! log-value, so partition functions over hundreds of vertices never
//! underflow. All values are immutable and all operations are pure.

use std::collections::BTreeMap;
use std::ops::{Mul, MulAssign};

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::{Error, Result};

/// A non-negative weight, either exactly zero or `exp` of the stored log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogWeight {
    Zero,
    Finite(f64),
}

impl LogWeight {
    pub const ONE: LogWeight = LogWeight::Finite(0.0);

    /// Wraps a plain non-negative value.
    pub fn from_value(w: f64) -> LogWeight {
        assert!(w >= 0.0, "weights are non-negative");
        if w == 0.0 {
            LogWeight::Zero
        } else {
            LogWeight::Finite(w.ln())
        }
    }

    pub fn value(self) -> f64 {
        match self {
            LogWeight::Zero => 0.0,
            LogWeight::Finite(l) => l.exp(),
        }
    }

    pub fn ln(self) -> Option<f64> {
        match self {
            LogWeight::Zero => None,
            LogWeight::Finite(l) => Some(l),
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, LogWeight::Zero)
    }

    pub fn is_positive(self) -> bool {
        !self.is_zero()
    }
}

impl Mul for LogWeight {
    type Output = LogWeight;
    fn mul(self, other: LogWeight) -> LogWeight {
        match (self, other) {
            (LogWeight::Finite(a), LogWeight::Finite(b)) => LogWeight::Finite(a + b),
            _ => LogWeight::Zero,
        }
    }
}

impl MulAssign for LogWeight {
    fn mul_assign(&mut self, other: LogWeight) {
        *self = *self * other;
    }
}

/// An assignment of spins `0..q` to vertices. Ordering is lexicographic in
/// the spin vector, which fixes state indices everywhere downstream.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Configuration {
    spins: Vec<u8>,
}

impl Configuration {
    pub fn new(spins: Vec<u8>) -> Configuration {
        Configuration { spins }
    }

    pub fn constant(n: usize, spin: u8) -> Configuration {
        Configuration { spins: vec![spin; n] }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spin(&self, v: usize) -> u8 {
        self.spins[v]
    }

    pub fn set(&mut self, v: usize, spin: u8) {
        self.spins[v] = spin;
    }

    pub fn spins(&self) -> &[u8] {
        &self.spins
    }
}

/// A partial configuration: spins fixed on a subset of vertices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pinning {
    pinned: BTreeMap<usize, u8>,
}

impl Pinning {
    pub fn empty() -> Pinning {
        Pinning::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u8)>) -> Result<Pinning> {
        let mut pinned = BTreeMap::new();
        for (v, s) in pairs {
            if pinned.insert(v, s).is_some() {
                return Err(Error::InvalidParam(format!("vertex {v} pinned twice")));
            }
        }
        Ok(Pinning { pinned })
    }

    pub fn len(&self) -> usize {
        self.pinned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pinned.is_empty()
    }

    pub fn get(&self, v: usize) -> Option<u8> {
        self.pinned.get(&v).copied()
    }

    pub fn is_pinned(&self, v: usize) -> bool {
        self.pinned.contains_key(&v)
    }

    /// Pinned `(vertex, spin)` pairs in vertex order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, u8)> + '_ {
        self.pinned.iter().map(|(&v, &s)| (v, s))
    }

    pub fn vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.pinned.keys().copied()
    }

    pub fn matches(&self, cfg: &Configuration) -> bool {
        self.pairs().all(|(v, s)| cfg.spin(v) == s)
    }
}

/// A q-spin system: graph, symmetric non-negative interaction matrix, and
/// positive external-field vector.
#[derive(Clone, Debug)]
pub struct SpinSystem {
    graph: Graph,
    q: usize,
    interaction: Vec<f64>,
    field: Vec<f64>,
}

impl SpinSystem {
    /// Builds a system from a row-major `q x q` interaction matrix and a
    /// length-`q` field vector.
    pub fn new(graph: Graph, q: usize, interaction: Vec<f64>, field: Vec<f64>) -> Result<SpinSystem> {
        if q < 2 {
            return Err(Error::InvalidParam(format!("q must be >= 2, got {q}")));
        }
        if interaction.len() != q * q {
            return Err(Error::InvalidParam("interaction matrix must be q x q".into()));
        }
        if field.len() != q {
            return Err(Error::InvalidParam("field vector must have length q".into()));
        }
        for i in 0..q {
            for j in 0..q {
                let a = interaction[i * q + j];
                if !(a >= 0.0) {
                    return Err(Error::InvalidParam("interaction entries must be >= 0".into()));
                }
                if a != interaction[j * q + i] {
                    return Err(Error::InvalidParam("interaction matrix must be symmetric".into()));
                }
            }
        }
        if field.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidParam("field entries must be > 0".into()));
        }
        Ok(SpinSystem { graph, q, interaction, field })
    }

    /// Hardcore model at fugacity `lambda`: spin 1 is "occupied", adjacent
    /// occupied vertices are forbidden, and an occupied vertex carries weight
    /// `lambda`.
    pub fn hardcore(graph: Graph, lambda: f64) -> Result<SpinSystem> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidParam(format!("fugacity must be > 0, got {lambda}")));
        }
        SpinSystem::new(graph, 2, vec![1.0, 1.0, 1.0, 0.0], vec![1.0, lambda])
    }

    /// Uniform distribution on proper `k`-colorings: interaction `J - I`,
    /// all-ones field.
    pub fn coloring(graph: Graph, k: usize) -> Result<SpinSystem> {
        if k < 2 {
            return Err(Error::InvalidParam(format!("colorings need k >= 2, got {k}")));
        }
        let mut interaction = vec![1.0; k * k];
        for i in 0..k {
            interaction[i * k + i] = 0.0;
        }
        SpinSystem::new(graph, k, interaction, vec![1.0; k])
    }

    /// Monomer-dimer model at fugacity `lambda`: the hardcore model on the
    /// line graph. Returns the system plus the map from line-graph vertex to
    /// original edge, so occupied sets can be reported as matchings.
    pub fn monomer_dimer(graph: &Graph, lambda: f64) -> Result<(SpinSystem, Vec<(usize, usize)>)> {
        if graph.m() == 0 {
            return Err(Error::InvalidParam("monomer-dimer model needs at least one edge".into()));
        }
        let (line, edge_map) = graph.line_graph();
        Ok((SpinSystem::hardcore(line, lambda)?, edge_map))
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn interaction(&self, i: u8, j: u8) -> f64 {
        self.interaction[i as usize * self.q + j as usize]
    }

    pub fn field(&self, i: u8) -> f64 {
        self.field[i as usize]
    }

    /// Exact configuration weight in log form.
    pub fn weight(&self, cfg: &Configuration) -> LogWeight {
        assert_eq!(cfg.len(), self.n(), "configuration length mismatch");
        let mut log = 0.0;
        for &(u, v) in self.graph.edges() {
            let a = self.interaction(cfg.spin(u), cfg.spin(v));
            if a == 0.0 {
                return LogWeight::Zero;
            }
            log += a.ln();
        }
        for v in 0..self.n() {
            log += self.field(cfg.spin(v)).ln();
        }
        LogWeight::Finite(log)
    }

    /// Weight factor local to vertex `v` at spin `s` given the other spins:
    /// `h(s) * prod over neighbors of A(s, spin(u))`. The full conditional at
    /// `v` is proportional to this across `s`.
    pub fn local_weight(&self, cfg: &Configuration, v: usize, s: u8) -> f64 {
        let mut w = self.field(s);
        for &u in self.graph.neighbors(v) {
            w *= self.interaction(s, cfg.spin(u));
            if w == 0.0 {
                return 0.0;
            }
        }
        w
    }
}

/// Cap-bounded feasibility test for a pinning: searches for any positive-
/// weight extension by pruned backtracking, spending at most `cap`
/// (vertex, spin) trials.
pub fn is_feasible_pinning(sys: &SpinSystem, pinning: &Pinning, cap: u64) -> Result<bool> {
    for (v, s) in pinning.pairs() {
        if v >= sys.n() {
            return Err(Error::InvalidParam(format!("pinned vertex {v} out of range")));
        }
        if s as usize >= sys.q() {
            return Err(Error::InvalidParam(format!("pinned spin {s} out of range")));
        }
    }
    let mut cfg = Configuration::constant(sys.n(), 0);
    let mut trials = 0u64;
    extend_feasible(sys, pinning, &mut cfg, 0, cap, &mut trials)
}

fn extend_feasible(
    sys: &SpinSystem,
    pinning: &Pinning,
    cfg: &mut Configuration,
    v: usize,
    cap: u64,
    trials: &mut u64,
) -> Result<bool> {
    if v == sys.n() {
        return Ok(true);
    }
    let choices: &[u8] = &match pinning.get(v) {
        Some(s) => vec![s],
        None => (0..sys.q() as u8).collect(),
    };
    for &s in choices {
        *trials += 1;
        if *trials > cap {
            return Err(Error::CapExceeded(format!(
                "feasibility search exceeded {cap} trials"
            )));
        }
        if partial_weight_positive(sys, cfg, v, s) {
            cfg.set(v, s);
            if extend_feasible(sys, pinning, cfg, v + 1, cap, trials)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Positive iff assigning spin `s` at `v` keeps every edge into the already
/// assigned prefix `0..v` positive (the field is positive by invariant).
fn partial_weight_positive(sys: &SpinSystem, cfg: &Configuration, v: usize, s: u8) -> bool {
    sys.graph()
        .neighbors(v)
        .iter()
        .filter(|&&u| u < v)
        .all(|&u| sys.interaction(s, cfg.spin(u)) > 0.0)
}
