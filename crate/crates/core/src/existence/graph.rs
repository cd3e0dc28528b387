//! Difference-constraint graphs over one payment slice.

use serde::{Deserialize, Serialize};

/// Weighted directed edge `from → to`, encoding `p[to] − p[from] ≤ weight`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// Constraint graph of one agent and one profile of the others' reports.
///
/// Vertex 0 is the base vertex standing for payment zero; vertex `k + 1`
/// stands for the payment at the `k`-th grid report. Base edges carry the
/// participation bound, edges between report vertices carry the gap bound
/// and always run from the smaller report to the larger one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintGraph {
    vertices: usize,
    edges: Vec<Edge>,
}

impl ConstraintGraph {
    pub const BASE: usize = 0;

    /// Builds the graph from the participation bounds `upper[k]` and a gap
    /// oracle `gap(lower, upper)` over grid indices.
    pub fn build<E>(upper: &[f64], mut gap: impl FnMut(usize, usize) -> Result<f64, E>) -> Result<Self, E> {
        let m = upper.len();
        let mut edges = Vec::with_capacity(m + m * m.saturating_sub(1) / 2);
        for (k, &bound) in upper.iter().enumerate() {
            edges.push(Edge {
                from: Self::BASE,
                to: k + 1,
                weight: bound,
            });
            for lower in 0..k {
                edges.push(Edge {
                    from: lower + 1,
                    to: k + 1,
                    weight: gap(lower, k)?,
                });
            }
        }
        Ok(Self { vertices: m + 1, edges })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Every edge goes from a lower vertex index to a higher one.
    pub fn is_forward(&self) -> bool {
        self.edges.iter().all(|e| e.from < e.to)
    }

    /// Shortest distances from the base vertex by one pass in index order,
    /// valid because the graph is a DAG topologically sorted by index.
    /// Entry `k` is the distance to report vertex `k + 1`.
    pub fn forward_pass(&self) -> Vec<f64> {
        debug_assert!(self.is_forward());
        let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.vertices];
        for e in &self.edges {
            incoming[e.to].push((e.from, e.weight));
        }
        let mut dist = vec![f64::INFINITY; self.vertices];
        dist[Self::BASE] = 0.0;
        for v in 1..self.vertices {
            dist[v] = incoming[v]
                .iter()
                .map(|&(u, w)| dist[u] + w)
                .fold(f64::INFINITY, f64::min);
        }
        dist.split_off(1)
    }

    /// Bellman–Ford distances from the base vertex. Returns `None` on a
    /// negative cycle, which cannot occur for a forward graph.
    pub fn bellman_ford(&self) -> Option<Vec<f64>> {
        let mut dist = vec![f64::INFINITY; self.vertices];
        dist[Self::BASE] = 0.0;
        for _ in 1..self.vertices {
            let mut changed = false;
            for e in &self.edges {
                if dist[e.from].is_finite() && dist[e.from] + e.weight < dist[e.to] {
                    dist[e.to] = dist[e.from] + e.weight;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if self
            .edges
            .iter()
            .any(|e| dist[e.from].is_finite() && dist[e.from] + e.weight < dist[e.to])
        {
            return None;
        }
        Some(dist.split_off(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_vertex() {
        let g = ConstraintGraph::build(&[0.7], |_, _| Ok::<_, ()>(0.0)).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.forward_pass(), vec![0.7]);
    }

    #[test]
    fn zero_gaps_flatten_to_first_bound() {
        let bounds = [0.2, 0.5, 0.9, 1.3];
        let g = ConstraintGraph::build(&bounds, |_, _| Ok::<_, ()>(0.0)).unwrap();
        assert_eq!(g.forward_pass(), vec![0.2; 4]);
    }

    proptest! {
        #[test]
        fn forward_pass_matches_bellman_ford(
            bounds in prop::collection::vec(-2.0f64..2.0, 1..9),
            gaps in prop::collection::vec(-1.0f64..1.0, 36),
        ) {
            let g = ConstraintGraph::build(&bounds, |lo, hi| Ok::<_, ()>(gaps[(hi * (hi - 1) / 2 + lo) % gaps.len()])).unwrap();
            prop_assert!(g.is_forward());
            let dp = g.forward_pass();
            let bf = g.bellman_ford().unwrap();
            for (a, b) in dp.iter().zip(&bf) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
