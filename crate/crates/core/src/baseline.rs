//! Online k-wing search over the raw graph, used as the reference answer.

use std::collections::VecDeque;

use crate::decomposition::WingLabeling;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, EdgeKey, VertexId};

/// Answer to a personalized k-wing query. Wings are in canonical order:
/// edges sorted by key inside a wing, wings sorted by their smallest
/// edge incident to the query vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WingResult {
    pub query: VertexId,
    pub k: u32,
    pub wings: Vec<Vec<EdgeKey>>,
}

impl WingResult {
    pub fn new(query: VertexId, k: u32, mut wings: Vec<Vec<EdgeKey>>) -> Self {
        for w in &mut wings {
            w.sort_unstable();
        }
        let first_incident =
            |w: &Vec<EdgeKey>| w.iter().copied().filter(|e| incident(*e, query)).min();
        wings.sort_by_key(|w| first_incident(w));
        WingResult { query, k, wings }
    }

    pub fn edge_total(&self) -> usize {
        self.wings.iter().map(|w| w.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.wings.is_empty()
    }
}

#[inline]
pub(crate) fn incident(e: EdgeKey, q: VertexId) -> bool {
    match q.side {
        crate::graph::Side::U => e.u == q.ordinal,
        crate::graph::Side::V => e.v == q.ordinal,
    }
}

pub(crate) fn check_query(g_has_vertex: bool, q: VertexId, k: u32) -> Result<()> {
    if !g_has_vertex {
        return Err(Error::not_found(format!(
            "query vertex {}{} is not in the graph",
            q.side, q.ordinal
        )));
    }
    if k < 1 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(())
}

/// BFS from each unvisited ψ ≥ k edge at `q`, crossing butterflies whose four
/// edges all have ψ ≥ k.
pub fn baseline_search(
    g: &BipartiteGraph,
    labeling: &WingLabeling,
    q: VertexId,
    k: u32,
) -> Result<WingResult> {
    check_query(g.contains_vertex(q), q, k)?;
    let mut visited = vec![false; g.edge_capacity()];
    let mut wings = Vec::new();
    let mut queue = VecDeque::new();
    for seed in g.incident_edges(q) {
        if visited[seed.index()] || labeling.psi_or_zero(seed) < k {
            continue;
        }
        visited[seed.index()] = true;
        queue.push_back(seed);
        let mut wing = Vec::new();
        while let Some(x) = queue.pop_front() {
            wing.push(g.key(x).expect("live edge"));
            g.for_each_butterfly(x, |b| {
                let others = b.others();
                if others.iter().all(|o| labeling.psi_or_zero(*o) >= k) {
                    for o in others {
                        if !visited[o.index()] {
                            visited[o.index()] = true;
                            queue.push_back(o);
                        }
                    }
                }
            });
        }
        wings.push(wing);
    }
    Ok(WingResult::new(q, k, wings))
}
