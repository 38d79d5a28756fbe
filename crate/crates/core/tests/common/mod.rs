//! Shared instance suite for the integration and acceptance tests.

use glauber_lab::exact::{enumerate, StateSpace};
use glauber_lab::graph::{generate, Graph, GraphFamily};
use glauber_lab::spin::SpinSystem;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Hardcore,
    Coloring,
    MonomerDimer,
}

pub struct Instance {
    pub name: String,
    pub kind: ModelKind,
    /// The graph the spin system lives on (the line graph for matchings).
    pub system: SpinSystem,
    /// Max degree of the base graph (the monomer-dimer theory constants are
    /// stated in terms of it).
    pub base_max_degree: usize,
    pub lambda: f64,
}

impl Instance {
    pub fn space(&self) -> StateSpace {
        enumerate(&self.system).expect("suite instances are enumerable")
    }

    pub fn n(&self) -> usize {
        self.system.n()
    }
}

pub fn path(n: usize) -> Graph {
    generate(&GraphFamily::Path { n }, 0).unwrap()
}

pub fn cycle(n: usize) -> Graph {
    generate(&GraphFamily::Cycle { n }, 0).unwrap()
}

pub fn star(leaves: usize) -> Graph {
    generate(&GraphFamily::CompleteBipartite { a: 1, b: leaves }, 0).unwrap()
}

pub fn complete(n: usize) -> Graph {
    generate(&GraphFamily::Complete { n }, 0).unwrap()
}

pub fn hardcore_instance(name: &str, g: Graph, lambda: f64) -> Instance {
    let base_max_degree = g.max_degree();
    Instance {
        name: format!("hardcore-{name}-lambda{lambda}"),
        kind: ModelKind::Hardcore,
        system: SpinSystem::hardcore(g, lambda).unwrap(),
        base_max_degree,
        lambda,
    }
}

pub fn coloring_instance(name: &str, g: Graph, k: usize) -> Instance {
    let base_max_degree = g.max_degree();
    Instance {
        name: format!("coloring-{name}-k{k}"),
        kind: ModelKind::Coloring,
        system: SpinSystem::coloring(g, k).unwrap(),
        base_max_degree,
        lambda: f64::NAN,
    }
}

pub fn matching_instance(name: &str, g: Graph, lambda: f64) -> Instance {
    let base_max_degree = g.max_degree();
    let (system, _) = SpinSystem::monomer_dimer(&g, lambda).unwrap();
    Instance {
        name: format!("matching-{name}-lambda{lambda}"),
        kind: ModelKind::MonomerDimer,
        system,
        base_max_degree,
        lambda,
    }
}

/// The acceptance suite: hardcore at three fugacities on paths, cycles, and
/// stars up to n = 8; colorings with at least Delta + 2 colors up to n = 5;
/// monomer-dimer at fugacity 1 on graphs with at most 7 edges.
pub fn acceptance_suite() -> Vec<Instance> {
    let mut suite = Vec::new();
    for &lambda in &[0.3, 1.0, 2.0] {
        suite.push(hardcore_instance("p5", path(5), lambda));
        suite.push(hardcore_instance("p8", path(8), lambda));
        suite.push(hardcore_instance("c5", cycle(5), lambda));
        suite.push(hardcore_instance("c8", cycle(8), lambda));
        suite.push(hardcore_instance("star5", star(5), lambda));
        suite.push(hardcore_instance("star7", star(7), lambda));
    }
    suite.push(coloring_instance("p4", path(4), 4));
    suite.push(coloring_instance("p5", path(5), 4));
    suite.push(coloring_instance("p5", path(5), 5));
    suite.push(coloring_instance("c4", cycle(4), 4));
    suite.push(coloring_instance("c5", cycle(5), 4));
    suite.push(coloring_instance("c5", cycle(5), 5));
    suite.push(coloring_instance("k4", complete(4), 5));
    suite.push(coloring_instance("star3", star(3), 5));
    suite.push(coloring_instance("star3", star(3), 6));
    for g in [path(4), path(5), cycle(5), cycle(6), complete(4), star(3), cycle(7)] {
        let name = format!("m{}e{}", g.n(), g.m());
        suite.push(matching_instance(&name, g, 1.0));
    }
    suite
}
