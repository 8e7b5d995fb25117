//! EquiWing: one super node per k-butterfly equivalence class.

use std::collections::{BTreeSet, VecDeque};

use crate::baseline::WingResult;
use crate::decomposition::WingLabeling;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, VertexId};
use crate::supergraph::{QueryStats, SeedSource, SnId, SuperGraph};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquiWingIndex {
    pub(crate) sg: SuperGraph,
    pub(crate) next_id: SnId,
}

impl EquiWingIndex {
    pub(crate) fn from_parts(sg: SuperGraph) -> Self {
        let next_id = sg.max_id().map_or(1, |m| m + 1);
        EquiWingIndex { sg, next_id }
    }

    pub fn super_graph(&self) -> &SuperGraph {
        &self.sg
    }

    pub fn node_count(&self) -> usize {
        self.sg.node_count()
    }

    pub fn super_edge_count(&self) -> usize {
        self.sg.super_edge_count()
    }

    pub fn query(&self, q: VertexId, k: u32) -> Result<WingResult> {
        Ok(self.sg.query(q, k, SeedSource::Hash)?.0)
    }

    pub fn query_with_stats(&self, q: VertexId, k: u32) -> Result<(WingResult, QueryStats)> {
        self.sg.query(q, k, SeedSource::Hash)
    }

    /// Re-key the index onto another label table (e.g. a reloaded graph).
    pub fn rebind(&self, g: &BipartiteGraph) -> Result<Self> {
        Ok(EquiWingIndex {
            sg: self.sg.rebind(g.labels())?,
            next_id: self.next_id,
        })
    }
}

/// Build the index level by level. Each unvisited edge of Φ_k starts a class
/// grown over butterflies whose edges all have ψ ≥ k; higher-level edges met
/// on the way remember the class and are linked to their own class later.
pub fn build_equiwing(g: &BipartiteGraph, labeling: &WingLabeling) -> Result<EquiWingIndex> {
    labeling.check_matches(g)?;
    let cap = g.edge_capacity();
    let mut node_of = vec![0 as SnId; cap];
    let mut pending: Vec<Vec<SnId>> = vec![Vec::new(); cap];
    let mut sg = SuperGraph::new(g.labels().clone());
    let mut links: BTreeSet<(SnId, SnId)> = BTreeSet::new();
    let mut queue = VecDeque::new();
    let mut next: SnId = 1;

    for (k, level) in labeling.levels() {
        for &e in level {
            if node_of[e.index()] != 0 {
                continue;
            }
            let id = next;
            next += 1;
            node_of[e.index()] = id;
            queue.push_back(e);
            let mut members = Vec::new();
            while let Some(x) = queue.pop_front() {
                members.push(g.key(x).expect("labeled edges are live"));
                for p in std::mem::take(&mut pending[x.index()]) {
                    links.insert((p, id));
                }
                g.for_each_butterfly(x, |b| {
                    let others = b.others();
                    if others.iter().any(|&y| labeling.psi_or_zero(y) < k) {
                        return;
                    }
                    for y in others {
                        if labeling.psi_or_zero(y) == k {
                            if node_of[y.index()] == 0 {
                                node_of[y.index()] = id;
                                queue.push_back(y);
                            }
                        } else {
                            let pl = &mut pending[y.index()];
                            if pl.last() != Some(&id) {
                                pl.push(id);
                            }
                        }
                    }
                });
            }
            sg.add_node(id, k, members)?;
        }
    }
    for (a, b) in links {
        sg.add_super_edge(a, b).map_err(|e| match e {
            Error::Consistency(m) => Error::consistency(format!("index construction: {m}")),
            other => other,
        })?;
    }
    Ok(EquiWingIndex { sg, next_id: next })
}

pub fn query_equiwing(idx: &EquiWingIndex, q: VertexId, k: u32) -> Result<WingResult> {
    idx.query(q, k)
}
