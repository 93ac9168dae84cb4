use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndpointMark {
    Tail,
    Arrow,
    Circle,
}

/// Partial ancestral graph. `mark(i, j)` is the mark at the `j` end of the
/// edge between `i` and `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pag {
    vertices: Vec<String>,
    marks: Vec<Vec<Option<EndpointMark>>>,
    pub sepsets: BTreeMap<(usize, usize), Vec<usize>>,
}

impl Pag {
    pub fn new(vertices: Vec<String>) -> Self {
        let n = vertices.len();
        Pag {
            vertices,
            marks: vec![vec![None; n]; n],
            sepsets: BTreeMap::new(),
        }
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.marks[i][j].is_some()
    }

    pub fn mark(&self, i: usize, j: usize) -> Option<EndpointMark> {
        self.marks[i][j]
    }

    pub(crate) fn set_mark(&mut self, i: usize, j: usize, m: EndpointMark) {
        debug_assert!(self.marks[i][j].is_some(), "no edge {i}-{j}");
        self.marks[i][j] = Some(m);
    }

    pub(crate) fn add_edge(&mut self, i: usize, j: usize) {
        assert_ne!(i, j, "self-loop");
        self.marks[i][j] = Some(EndpointMark::Circle);
        self.marks[j][i] = Some(EndpointMark::Circle);
    }

    /// Edges as `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.vertices.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.adjacent(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.vertices.len())
            .filter(|&j| self.adjacent(i, j))
            .collect()
    }

    pub fn sepset(&self, i: usize, j: usize) -> Option<&[usize]> {
        self.sepsets
            .get(&(i.min(j), i.max(j)))
            .map(|v| v.as_slice())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypedEdge {
    Directed(String, String),
    /// Endpoints stored in lexical order.
    Bidirected(String, String),
}

impl TypedEdge {
    pub fn bidirected(a: &str, b: &str) -> Self {
        if a <= b {
            TypedEdge::Bidirected(a.into(), b.into())
        } else {
            TypedEdge::Bidirected(b.into(), a.into())
        }
    }

    /// Unordered endpoint pair, lexical order.
    pub fn adjacency(&self) -> (String, String) {
        match self {
            TypedEdge::Directed(a, b) | TypedEdge::Bidirected(a, b) => {
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmgMeta {
    pub alpha: f64,
    pub bins: usize,
    pub seed: u64,
}

/// Acyclic directed mixed graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Admg {
    vertices: Vec<String>,
    directed: BTreeSet<(usize, usize)>,
    bidirected: BTreeSet<(usize, usize)>,
    pub meta: AdmgMeta,
}

#[derive(Serialize, Deserialize)]
struct AdmgFile {
    vertices: Vec<String>,
    directed: Vec<[String; 2]>,
    bidirected: Vec<[String; 2]>,
    meta: AdmgMeta,
}

impl Admg {
    pub fn new(vertices: Vec<String>) -> Result<Self> {
        let uniq: BTreeSet<&String> = vertices.iter().collect();
        if uniq.len() != vertices.len() {
            return Err(Error::Graph("duplicate vertex names".into()));
        }
        Ok(Admg {
            vertices,
            directed: BTreeSet::new(),
            bidirected: BTreeSet::new(),
            meta: AdmgMeta::default(),
        })
    }

    fn idx(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::Graph(format!("unknown vertex `{name}`")))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    /// Adds `from -> to`, rejecting self-loops and edges that close a directed cycle.
    pub fn add_directed(&mut self, from: &str, to: &str) -> Result<()> {
        let (a, b) = (self.idx(from)?, self.idx(to)?);
        if a == b {
            return Err(Error::Graph(format!("self-loop on `{from}`")));
        }
        if self.reaches(b, a) {
            return Err(Error::Graph(format!("`{from}` -> `{to}` closes a cycle")));
        }
        self.directed.insert((a, b));
        Ok(())
    }

    pub fn add_bidirected(&mut self, a: &str, b: &str) -> Result<()> {
        let (a, b) = (self.idx(a)?, self.idx(b)?);
        if a == b {
            return Err(Error::Graph("bidirected self-loop".into()));
        }
        self.bidirected.insert((a.min(b), a.max(b)));
        Ok(())
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.directed
            .iter()
            .map(|&(a, b)| (self.vertices[a].as_str(), self.vertices[b].as_str()))
    }

    pub fn bidirected_edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.bidirected
            .iter()
            .map(|&(a, b)| (self.vertices[a].as_str(), self.vertices[b].as_str()))
    }

    pub fn edge_count(&self) -> usize {
        self.directed.len() + self.bidirected.len()
    }

    pub fn typed_edges(&self) -> BTreeSet<TypedEdge> {
        self.directed_edges()
            .map(|(a, b)| TypedEdge::Directed(a.into(), b.into()))
            .chain(
                self.bidirected_edges()
                    .map(|(a, b)| TypedEdge::bidirected(a, b)),
            )
            .collect()
    }

    /// Unordered adjacent pairs regardless of edge type.
    pub fn adjacencies(&self) -> BTreeSet<(String, String)> {
        self.typed_edges()
            .iter()
            .map(TypedEdge::adjacency)
            .collect()
    }

    pub fn children(&self, name: &str) -> Vec<&str> {
        let Some(i) = self.index_of(name) else {
            return Vec::new();
        };
        self.directed
            .iter()
            .filter(|e| e.0 == i)
            .map(|e| self.vertices[e.1].as_str())
            .collect()
    }

    pub(crate) fn child_indices(&self, i: usize) -> Vec<usize> {
        self.directed
            .iter()
            .filter(|e| e.0 == i)
            .map(|e| e.1)
            .collect()
    }

    pub fn parents(&self, name: &str) -> Vec<&str> {
        let Some(i) = self.index_of(name) else {
            return Vec::new();
        };
        self.directed
            .iter()
            .filter(|e| e.1 == i)
            .map(|e| self.vertices[e.0].as_str())
            .collect()
    }

    fn reaches(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.vertices.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend(self.child_indices(v));
        }
        false
    }

    /// Kahn's algorithm over the directed part.
    pub fn is_acyclic(&self) -> bool {
        let n = self.vertices.len();
        let mut indeg = vec![0usize; n];
        for &(_, b) in &self.directed {
            indeg[b] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut visited = 0;
        while let Some(v) = queue.pop() {
            visited += 1;
            for c in self.child_indices(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        visited == n
    }

    pub fn to_json(&self) -> String {
        let file = AdmgFile {
            vertices: self.vertices.clone(),
            directed: self
                .directed_edges()
                .map(|(a, b)| [a.to_string(), b.to_string()])
                .collect(),
            bidirected: self
                .bidirected_edges()
                .map(|(a, b)| [a.to_string(), b.to_string()])
                .collect(),
            meta: self.meta.clone(),
        };
        serde_json::to_string_pretty(&file).expect("graph serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: AdmgFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
        let mut g = Admg::new(f.vertices)?;
        for [a, b] in &f.directed {
            g.add_directed(a, b)?;
        }
        for [a, b] in &f.bidirected {
            g.add_bidirected(a, b)?;
        }
        g.meta = f.meta;
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

/// 0/1 adjacency matrix with rows and columns in lexical vertex order.
/// Bidirected edges set both entries.
pub fn adjacency_matrix(g: &Admg) -> (Vec<String>, Vec<Vec<u8>>) {
    let mut names = g.vertices.clone();
    names.sort();
    let pos = |v: &str| names.iter().position(|n| n == v).expect("vertex");
    let mut m = vec![vec![0u8; names.len()]; names.len()];
    for (a, b) in g.directed_edges() {
        m[pos(a)][pos(b)] = 1;
    }
    for (a, b) in g.bidirected_edges() {
        m[pos(a)][pos(b)] = 1;
        m[pos(b)][pos(a)] = 1;
    }
    (names, m)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GraphOverlap {
    pub common: BTreeSet<TypedEdge>,
    pub only_a: BTreeSet<TypedEdge>,
    pub only_b: BTreeSet<TypedEdge>,
}

pub fn graph_overlap(a: &Admg, b: &Admg) -> Result<GraphOverlap> {
    let va: BTreeSet<&String> = a.vertices.iter().collect();
    let vb: BTreeSet<&String> = b.vertices.iter().collect();
    if va != vb {
        return Err(Error::Graph("graphs have different vertex sets".into()));
    }
    let (ea, eb) = (a.typed_edges(), b.typed_edges());
    Ok(GraphOverlap {
        common: ea.intersection(&eb).cloned().collect(),
        only_a: ea.difference(&eb).cloned().collect(),
        only_b: eb.difference(&ea).cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(vs: &[&str], directed: &[(&str, &str)], bi: &[(&str, &str)]) -> Admg {
        let mut g = Admg::new(vs.iter().map(|s| s.to_string()).collect()).unwrap();
        for (a, b) in directed {
            g.add_directed(a, b).unwrap();
        }
        for (a, b) in bi {
            g.add_bidirected(a, b).unwrap();
        }
        g
    }

    #[test]
    fn single_edge_matrix() {
        let (names, m) = adjacency_matrix(&graph(&["B", "A"], &[("A", "B")], &[]));
        assert_eq!(names, vec!["A", "B"]);
        assert_eq!(m, vec![vec![0, 1], vec![0, 0]]);
    }

    #[test]
    fn bidirected_sets_both_entries() {
        let (_, m) = adjacency_matrix(&graph(&["A", "B"], &[], &[("B", "A")]));
        assert_eq!(m, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn self_overlap_has_no_differences() {
        let g = graph(&["A", "B", "C"], &[("A", "B")], &[("B", "C")]);
        let o = graph_overlap(&g, &g).unwrap();
        assert_eq!(o.common.len(), 2);
        assert!(o.only_a.is_empty() && o.only_b.is_empty());
    }

    #[test]
    fn overlap_counts_shared_edges() {
        let vs = ["A", "B", "C", "D", "E"];
        let a = graph(
            &vs,
            &[("A", "B"), ("B", "C"), ("C", "D"), ("A", "E")],
            &[("D", "E")],
        );
        let b = graph(
            &vs,
            &[("A", "B"), ("B", "C"), ("A", "C")],
            &[("E", "D"), ("B", "E")],
        );
        let o = graph_overlap(&a, &b).unwrap();
        // Set-algebra oracle on the typed edge lists.
        let ea = a.typed_edges();
        let eb = b.typed_edges();
        let brute_common = ea.iter().filter(|e| eb.contains(*e)).count();
        assert_eq!(o.common.len(), brute_common);
        assert_eq!((o.common.len(), o.only_a.len(), o.only_b.len()), (3, 2, 2));
    }

    #[test]
    fn overlap_rejects_vertex_mismatch() {
        let a = graph(&["A", "B"], &[], &[]);
        let b = graph(&["A", "C"], &[], &[]);
        assert!(graph_overlap(&a, &b).is_err());
    }

    #[test]
    fn cycles_rejected_and_json_roundtrips() {
        let mut g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "C")], &[("A", "C")]);
        assert!(g.add_directed("C", "A").is_err());
        assert!(g.is_acyclic());
        g.meta = AdmgMeta {
            alpha: 0.05,
            bins: 5,
            seed: 3,
        };
        assert_eq!(Admg::from_json(&g.to_json()).unwrap(), g);
    }
}
