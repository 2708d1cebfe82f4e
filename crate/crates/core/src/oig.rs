//! One-inclusion graphs.

use serde::Serialize;

use crate::concept::{Behavior, ConceptClass, GroupFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Edge {
    /// Endpoint labeled 0 at `coord`; always the smaller index.
    pub u: usize,
    /// Endpoint labeled 1 at `coord`.
    pub v: usize,
    pub coord: usize,
}

impl Edge {
    pub fn other(&self, w: usize) -> usize {
        if w == self.u {
            self.v
        } else {
            self.u
        }
    }
}

#[derive(Clone, Debug)]
pub struct Oig {
    vertices: ConceptClass,
    edges: Vec<Edge>,
    incident: Vec<Vec<usize>>,
    groups: Vec<Behavior>,
    group_index: Vec<Vec<usize>>,
}

/// Builds the one-inclusion graph of `class` with no group index.
pub fn build_oig(class: &ConceptClass) -> Oig {
    Oig::build(class, None)
}

/// Edges whose differing coordinate lies in `g`.
pub fn g_relevant_edges(oig: &Oig, g: &Behavior) -> Vec<usize> {
    oig.edges
        .iter()
        .enumerate()
        .filter(|(_, e)| g.get(e.coord))
        .map(|(i, _)| i)
        .collect()
}

impl Oig {
    pub fn build(class: &ConceptClass, groups: Option<&GroupFamily>) -> Oig {
        let n = class.points();
        let members = class.members();
        let mut edges = Vec::new();
        for (i, b) in members.iter().enumerate() {
            for c in 0..n {
                if !b.get(c) {
                    if let Some(j) = class.index_of(&b.with(c, true)) {
                        edges.push(Edge { u: i, v: j, coord: c });
                    }
                }
            }
        }
        edges.sort_by_key(|e| (e.u, e.v));
        let mut incident = vec![Vec::new(); members.len()];
        for (id, e) in edges.iter().enumerate() {
            incident[e.u].push(id);
            incident[e.v].push(id);
        }
        let mut oig = Oig {
            vertices: class.clone(),
            edges,
            incident,
            groups: Vec::new(),
            group_index: Vec::new(),
        };
        if let Some(g) = groups {
            oig.index_groups(g);
        }
        oig
    }

    /// Replaces the group index with one for `groups`.
    pub fn index_groups(&mut self, groups: &GroupFamily) {
        assert_eq!(groups.points(), self.points(), "groups and OIG on different point sets");
        self.groups = groups.groups().to_vec();
        self.group_index = self
            .groups
            .iter()
            .map(|g| g_relevant_edges(self, g))
            .collect();
    }

    pub fn vertices(&self) -> &ConceptClass {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Behavior {
        self.vertices.members()[i]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn points(&self) -> usize {
        self.vertices.points()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edge ids at vertex `w`, ascending.
    pub fn incident(&self, w: usize) -> &[usize] {
        &self.incident[w]
    }

    pub fn groups(&self) -> &[Behavior] {
        &self.groups
    }

    pub fn group_index(&self) -> &[Vec<usize>] {
        &self.group_index
    }

    /// Edge joining `a` and `b`, if any.
    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.incident[a]
            .iter()
            .copied()
            .find(|&id| self.edges[id].other(a) == b)
    }

    pub fn dump(&self) -> OigDump {
        OigDump {
            points: self.points(),
            vertices: self.vertices.members().iter().map(|b| b.to_string()).collect(),
            edges: self.edges.clone(),
            group_index: self
                .groups
                .iter()
                .zip(&self.group_index)
                .map(|(g, ids)| GroupEdges { group: g.to_string(), edges: ids.clone() })
                .collect(),
        }
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph oig {\n");
        for (i, b) in self.vertices.members().iter().enumerate() {
            s.push_str(&format!("  v{i} [label=\"{b}\"];\n"));
        }
        for e in &self.edges {
            s.push_str(&format!("  v{} -- v{} [label=\"{}\"];\n", e.u, e.v, e.coord));
        }
        s.push_str("}\n");
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupEdges {
    pub group: String,
    pub edges: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OigDump {
    pub points: usize,
    pub vertices: Vec<String>,
    pub edges: Vec<Edge>,
    pub group_index: Vec<GroupEdges>,
}
