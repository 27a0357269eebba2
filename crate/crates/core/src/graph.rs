//! Directed graphs with edge labels from a finite generator list.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: u32,
    pub target: u32,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledGraph {
    pub vertices: u32,
    pub labels: u32,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("edge {0:?} leaves the vertex set")]
    OutOfRange(Edge),
    #[error("vertex {vertex} emits label {label} twice")]
    NotProper { vertex: u32, label: u32 },
}

impl LabeledGraph {
    pub fn new(vertices: u32, labels: u32, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let g = LabeledGraph { vertices, labels, edges };
        g.validate()?;
        Ok(g)
    }

    /// Checks ranges and that no vertex emits two edges with one label.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.source >= self.vertices || e.target >= self.vertices || e.label >= self.labels {
                return Err(GraphError::OutOfRange(*e));
            }
            if !seen.insert((e.source, e.label)) {
                return Err(GraphError::NotProper {
                    vertex: e.source,
                    label: e.label,
                });
            }
        }
        Ok(())
    }

    /// The directed path `0 → 1 → … → n−1` with label 0.
    pub fn path(n: u32) -> Self {
        let edges = (1..n).map(|i| Edge { source: i - 1, target: i, label: 0 }).collect();
        LabeledGraph { vertices: n, labels: 1, edges }
    }

    /// The directed cycle on `n` vertices with label 0.
    pub fn cycle(n: u32) -> Self {
        let edges = (0..n).map(|i| Edge { source: i, target: (i + 1) % n, label: 0 }).collect();
        LabeledGraph { vertices: n, labels: 1, edges }
    }

    /// In-degree plus out-degree per vertex.
    pub fn degrees(&self) -> Vec<u32> {
        let mut d = vec![0; self.vertices as usize];
        for e in &self.edges {
            d[e.source as usize] += 1;
            d[e.target as usize] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// Undirected adjacency lists.
    pub fn neighbours(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.vertices as usize];
        for e in &self.edges {
            adj[e.source as usize].push(e.target);
            adj[e.target as usize].push(e.source);
        }
        adj
    }

    /// Same vertices, edges filtered.
    pub fn filter_edges(&self, keep: impl Fn(&Edge) -> bool) -> Self {
        LabeledGraph {
            vertices: self.vertices,
            labels: self.labels,
            edges: self.edges.iter().copied().filter(|e| keep(e)).collect(),
        }
    }

    pub fn is_subgraph_of(&self, other: &LabeledGraph) -> bool {
        let set: std::collections::HashSet<&Edge> = other.edges.iter().collect();
        self.vertices == other.vertices && self.edges.iter().all(|e| set.contains(e))
    }

    /// Diagonal power: vertices are `l`-tuples (mixed radix, first coordinate
    /// least significant); `(x) → (y)` with label `t` iff `x_j → y_j` with
    /// label `t` for every `j`.
    pub fn diagonal_power(&self, l: u32) -> Option<LabeledGraph> {
        let n = self.vertices as u64;
        let total = n.checked_pow(l)?;
        let total32 = u32::try_from(total).ok()?;
        let mut out_by_label: Vec<Vec<Option<u32>>> = vec![vec![None; self.vertices as usize]; self.labels as usize];
        for e in &self.edges {
            out_by_label[e.label as usize][e.source as usize] = Some(e.target);
        }
        let mut edges = Vec::new();
        for v in 0..total {
            for (t, outs) in out_by_label.iter().enumerate() {
                let mut rest = v;
                let mut target = 0u64;
                let mut scale = 1u64;
                let mut ok = true;
                for _ in 0..l {
                    match outs[(rest % n) as usize] {
                        Some(y) => target += y as u64 * scale,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                    rest /= n;
                    scale *= n;
                }
                if ok {
                    edges.push(Edge { source: v as u32, target: target as u32, label: t as u32 });
                }
            }
        }
        Some(LabeledGraph { vertices: total32, labels: self.labels, edges })
    }

    /// Disjoint union, vertices of the `i`-th graph shifted by the sizes of
    /// the earlier ones.
    pub fn disjoint_union(graphs: &[LabeledGraph]) -> LabeledGraph {
        let mut offset = 0;
        let mut edges = Vec::new();
        let labels = graphs.iter().map(|g| g.labels).max().unwrap_or(0);
        for g in graphs {
            edges.extend(g.edges.iter().map(|e| Edge {
                source: e.source + offset,
                target: e.target + offset,
                label: e.label,
            }));
            offset += g.vertices;
        }
        LabeledGraph { vertices: offset, labels, edges }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_of_cycle() {
        let c = LabeledGraph::cycle(4);
        let p = c.diagonal_power(2).unwrap();
        assert_eq!(p.vertices, 16);
        assert_eq!(p.edges.len(), 16);
        p.validate().unwrap();
    }

    #[test]
    fn improper_rejected() {
        let e = Edge { source: 0, target: 1, label: 0 };
        assert!(LabeledGraph::new(2, 1, vec![e, Edge { target: 0, ..e }]).is_err());
    }
}
