//! Finite internal graphs with semi-infinite tails attached at boundary vertices.
//!
//! Internal arcs are indexed in the order of (terminal, origin). The coin at a
//! vertex acts on the arcs pointing into it: internal arcs first (by origin),
//! then the first incoming arc of every tail attached there, in attachment order.

use crate::error::{Error, Result};
use serde::Deserialize;
use std::collections::BTreeSet;

/// Simple undirected connected graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph on `n` vertices. Self-loops, multi-edges and disconnected inputs are rejected.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n || v >= n || u == v {
                return Err(Error::InvalidEdge(u, v));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::DuplicateEdge(u, v));
            }
        }
        if edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let g = Graph {
            n,
            edges: seen.into_iter().collect(),
        };
        if !g.is_connected() {
            return Err(Error::DisconnectedGraph);
        }
        Ok(g)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Input(format!("cycle needs at least 3 vertices, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|k| (k, (k + 1) % n)).collect();
        Graph::new(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph::new(n, &edges)
    }

    /// Parses `cycle:<n>` or `complete:<n>`.
    pub fn preset(name: &str) -> Result<Self> {
        let (kind, size) = name
            .split_once(':')
            .ok_or_else(|| Error::Input(format!("unknown preset {name}")))?;
        let n: usize = size
            .parse()
            .map_err(|_| Error::Input(format!("bad preset size {size}")))?;
        match kind {
            "cycle" => Graph::cycle(n),
            "complete" => Graph::complete(n),
            _ => Err(Error::Input(format!("unknown preset {name}"))),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    fn neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    fn is_connected(&self) -> bool {
        let adj = self.neighbours();
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().all(|&s| s)
    }

    /// Two-colourability.
    pub fn is_bipartite(&self) -> bool {
        let adj = self.neighbours();
        let mut colour = vec![None; self.n];
        colour[0] = Some(false);
        let mut stack = vec![0];
        while let Some(u) = stack.pop() {
            let cu = colour[u].unwrap();
            for &w in &adj[u] {
                match colour[w] {
                    None => {
                        colour[w] = Some(!cu);
                        stack.push(w);
                    }
                    Some(cw) if cw == cu => return false,
                    _ => {}
                }
            }
        }
        true
    }
}

/// One slot of the coin space at a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Internal arc index.
    Arc(usize),
    /// Tail index; stands for the first incoming arc of that tail.
    Tail(usize),
}

#[derive(Debug, Clone)]
pub struct TailedGraph {
    graph: Graph,
    arcs: Vec<(usize, usize)>,
    reverse: Vec<usize>,
    incoming: Vec<Vec<usize>>,
    tails: Vec<usize>,
    tails_at: Vec<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
struct TailSpec {
    vertex: usize,
    count: usize,
}

#[derive(Debug, Deserialize)]
struct GraphSpec {
    vertices: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    tails: Vec<TailSpec>,
}

impl TailedGraph {
    /// Attaches `count` tails at each listed vertex. Tails are numbered in list order.
    pub fn new(graph: Graph, tails: &[(usize, usize)]) -> Result<Self> {
        let n = graph.num_vertices();
        let mut arcs = Vec::with_capacity(2 * graph.edges().len());
        for &(u, v) in graph.edges() {
            arcs.push((u, v));
            arcs.push((v, u));
        }
        arcs.sort_by_key(|&(o, t)| (t, o));
        let index = |o: usize, t: usize| arcs.binary_search_by_key(&(t, o), |&(a, b)| (b, a)).unwrap();
        let reverse: Vec<usize> = arcs.iter().map(|&(o, t)| index(t, o)).collect();
        let mut incoming = vec![Vec::new(); n];
        for (k, &(_, t)) in arcs.iter().enumerate() {
            incoming[t].push(k);
        }
        let mut tail_list = Vec::new();
        let mut tails_at = vec![Vec::new(); n];
        for &(v, count) in tails {
            if v >= n {
                return Err(Error::UnknownBoundaryVertex(v));
            }
            if count == 0 {
                return Err(Error::ZeroTailCount(v));
            }
            for _ in 0..count {
                tails_at[v].push(tail_list.len());
                tail_list.push(v);
            }
        }
        Ok(TailedGraph {
            graph,
            arcs,
            reverse,
            incoming,
            tails: tail_list,
            tails_at,
        })
    }

    /// Parses the JSON graph format `{"vertices", "edges", "tails": [{"vertex", "count"}]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GraphSpec = serde_json::from_str(text).map_err(|e| Error::Input(e.to_string()))?;
        let edges: Vec<_> = spec.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = Graph::new(spec.vertices, &edges)?;
        let tails: Vec<_> = spec.tails.iter().map(|t| (t.vertex, t.count)).collect();
        TailedGraph::new(graph, &tails)
    }

    /// One tail at each listed vertex.
    pub fn with_single_tails(graph: Graph, vertices: &[usize]) -> Result<Self> {
        let tails: Vec<_> = vertices.iter().map(|&v| (v, 1)).collect();
        TailedGraph::new(graph, &tails)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_tails(&self) -> usize {
        self.tails.len()
    }

    /// (origin, terminal) of an internal arc.
    pub fn arc(&self, a: usize) -> (usize, usize) {
        self.arcs[a]
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn arc_index(&self, origin: usize, terminal: usize) -> Option<usize> {
        self.arcs
            .binary_search_by_key(&(terminal, origin), |&(o, t)| (t, o))
            .ok()
    }

    pub fn reverse(&self, a: usize) -> usize {
        self.reverse[a]
    }

    /// Internal arcs with terminal `v`.
    pub fn incoming(&self, v: usize) -> &[usize] {
        &self.incoming[v]
    }

    /// Boundary vertex of tail `j`.
    pub fn tail_vertex(&self, j: usize) -> usize {
        self.tails[j]
    }

    pub fn tails_at(&self, v: usize) -> &[usize] {
        &self.tails_at[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        !self.tails_at[v].is_empty()
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.num_vertices()).filter(|&v| self.is_boundary(v)).collect()
    }

    /// Internal degree.
    pub fn internal_degree(&self, v: usize) -> usize {
        self.incoming[v].len()
    }

    /// Degree counting tails.
    pub fn degree(&self, v: usize) -> usize {
        self.incoming[v].len() + self.tails_at[v].len()
    }

    /// Coin slots at `v`: internal incoming arcs, then tails.
    pub fn slots(&self, v: usize) -> Vec<Slot> {
        let mut s: Vec<Slot> = self.incoming[v].iter().map(|&a| Slot::Arc(a)).collect();
        s.extend(self.tails_at[v].iter().map(|&j| Slot::Tail(j)));
        s
    }

    /// Position of slot `s` in the coin basis at vertex `v`.
    pub fn slot_position(&self, v: usize, s: Slot) -> Option<usize> {
        match s {
            Slot::Arc(a) => self.incoming[v].iter().position(|&b| b == a),
            Slot::Tail(j) => self.tails_at[v]
                .iter()
                .position(|&k| k == j)
                .map(|p| p + self.incoming[v].len()),
        }
    }

    /// Vertex-local tail count at a boundary vertex.
    pub fn tail_count(&self, v: usize) -> Result<usize> {
        if v >= self.num_vertices() {
            return Err(Error::UnknownBoundaryVertex(v));
        }
        match self.tails_at[v].len() {
            0 => Err(Error::NotBoundaryVertex(v)),
            c => Ok(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn c4_with_three_tails() {
        let tg = TailedGraph::with_single_tails(Graph::cycle(4).unwrap(), &[0, 1, 2]).unwrap();
        assert_eq!(tg.num_arcs(), 8);
        assert_eq!(tg.num_tails(), 3);
        assert_eq!((tg.degree(0), tg.internal_degree(0)), (3, 2));
        assert_eq!((tg.degree(3), tg.internal_degree(3)), (2, 2));
        let s = tg.slots(0);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0], Slot::Arc(tg.arc_index(1, 0).unwrap()));
        assert_eq!(s[1], Slot::Arc(tg.arc_index(3, 0).unwrap()));
        assert_eq!(s[2], Slot::Tail(0));
        assert_eq!(tg.boundary_vertices(), vec![0, 1, 2]);
    }

    #[test]
    fn k4_double_tail() {
        let tg = TailedGraph::new(Graph::complete(4).unwrap(), &[(0, 2)]).unwrap();
        assert_eq!(tg.num_arcs(), 12);
        assert_eq!(tg.degree(0), 5);
        assert_eq!(tg.tail_count(0), Ok(2));
        assert_eq!(tg.tail_count(1), Err(Error::NotBoundaryVertex(1)));
        assert_eq!(tg.slot_position(0, Slot::Tail(1)), Some(4));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Graph::new(3, &[(0, 1)]), Err(Error::DisconnectedGraph));
        assert_eq!(Graph::new(3, &[(0, 0), (1, 2)]), Err(Error::InvalidEdge(0, 0)));
        assert_eq!(Graph::new(3, &[(0, 5)]), Err(Error::InvalidEdge(0, 5)));
        assert_eq!(
            Graph::new(3, &[(0, 1), (1, 0), (1, 2)]),
            Err(Error::DuplicateEdge(1, 0))
        );
        let g = Graph::cycle(4).unwrap();
        assert_eq!(
            TailedGraph::new(g.clone(), &[(7, 1)]).unwrap_err(),
            Error::UnknownBoundaryVertex(7)
        );
        assert_eq!(TailedGraph::new(g, &[(1, 0)]).unwrap_err(), Error::ZeroTailCount(1));
    }

    #[test]
    fn json_roundtrip() {
        let tg = TailedGraph::from_json(r#"{"vertices": 4, "edges": [[0,1],[1,2],[2,3],[3,0]], "tails": [{"vertex": 0, "count": 1}, {"vertex": 2, "count": 2}]}"#).unwrap();
        assert_eq!(tg.num_tails(), 3);
        assert_eq!(tg.tails_at(2), &[1, 2]);
        assert!(tg.graph().is_bipartite());
        assert!(!Graph::complete(4).unwrap().is_bipartite());
    }

    proptest! {
        #[test]
        fn arc_bookkeeping(n in 3usize..9, extra in proptest::collection::vec((0usize..9, 0usize..9), 0..8)) {
            let mut edges: Vec<(usize, usize)> = (0..n).map(|k| (k, (k + 1) % n)).collect();
            for (u, v) in extra {
                let (u, v) = (u % n, v % n);
                if u != v && !edges.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u)) {
                    edges.push((u, v));
                }
            }
            let tg = TailedGraph::with_single_tails(Graph::new(n, &edges).unwrap(), &[0]).unwrap();
            prop_assert_eq!(tg.num_arcs(), 2 * edges.len());
            for a in 0..tg.num_arcs() {
                let (o, t) = tg.arc(a);
                prop_assert_eq!(tg.reverse(tg.reverse(a)), a);
                prop_assert_eq!(tg.arc(tg.reverse(a)), (t, o));
                if a > 0 {
                    let (po, pt) = tg.arc(a - 1);
                    prop_assert!((pt, po) < (t, o));
                }
            }
            let total: usize = (0..n).map(|v| tg.internal_degree(v)).sum();
            prop_assert_eq!(total, tg.num_arcs());
        }
    }
}
