//! EquiWing-Comp: merges same-level super nodes that are connected through
//! strictly higher-level nodes.

use std::collections::{BTreeMap, HashMap};

use crate::baseline::WingResult;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, VertexId};
use crate::index::EquiWingIndex;
use crate::supergraph::{QueryStats, SeedSource, SnId, SuperGraph};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquiWingCompIndex {
    pub(crate) sg: SuperGraph,
    /// Original snID to the id of the merged node that absorbed it.
    pub(crate) merge_log: BTreeMap<SnId, SnId>,
}

impl EquiWingCompIndex {
    pub fn super_graph(&self) -> &SuperGraph {
        &self.sg
    }

    pub fn merge_log(&self) -> &BTreeMap<SnId, SnId> {
        &self.merge_log
    }

    pub fn node_count(&self) -> usize {
        self.sg.node_count()
    }

    pub fn super_edge_count(&self) -> usize {
        self.sg.super_edge_count()
    }

    pub fn query(&self, q: VertexId, k: u32, seeds: SeedSource) -> Result<WingResult> {
        Ok(self.sg.query(q, k, seeds)?.0)
    }

    pub fn query_with_stats(
        &self,
        q: VertexId,
        k: u32,
        seeds: SeedSource,
    ) -> Result<(WingResult, QueryStats)> {
        self.sg.query(q, k, seeds)
    }

    pub fn rebind(&self, g: &BipartiteGraph) -> Result<Self> {
        Ok(EquiWingCompIndex {
            sg: self.sg.rebind(g.labels())?,
            merge_log: self.merge_log.clone(),
        })
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// For each level k (top down) the groups of level-k nodes that share a
/// component of the super graph induced by levels ≥ k.
pub(crate) fn merge_groups(src: &SuperGraph) -> BTreeMap<u32, Vec<Vec<SnId>>> {
    let ids: Vec<SnId> = src.nodes().map(|n| n.id).collect();
    let slot: HashMap<SnId, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut uf = UnionFind::new(ids.len());
    let mut out = BTreeMap::new();
    let levels: Vec<(u32, Vec<SnId>)> = src
        .levels()
        .map(|(k, s)| (k, s.iter().copied().collect()))
        .collect();
    for (k, level) in levels.into_iter().rev() {
        for &id in &level {
            for (kk, n) in src.neighbors(id) {
                if kk < k {
                    break;
                }
                uf.union(slot[&id], slot[&n]);
            }
        }
        let mut groups: BTreeMap<usize, Vec<SnId>> = BTreeMap::new();
        for &id in &level {
            groups.entry(uf.find(slot[&id])).or_default().push(id);
        }
        let mut gs: Vec<Vec<SnId>> = groups.into_values().collect();
        gs.sort_unstable();
        out.insert(k, gs);
    }
    out
}

/// Materialize merged nodes for the given groups into `dst`, recording each
/// constituent in `log`. A merged node keeps its smallest constituent id.
pub(crate) fn materialize_groups(
    src: &SuperGraph,
    groups: &[Vec<SnId>],
    k: u32,
    dst: &mut SuperGraph,
    log: &mut BTreeMap<SnId, SnId>,
) -> Result<()> {
    for group in groups {
        let new_id = *group.iter().min().expect("groups are non-empty");
        let mut members = Vec::new();
        for id in group {
            members.extend_from_slice(&src.node(*id).expect("group node exists").members);
            log.insert(*id, new_id);
        }
        dst.add_node(new_id, k, members)?;
    }
    Ok(())
}

pub fn compress(idx: &EquiWingIndex) -> Result<EquiWingCompIndex> {
    let src = idx.super_graph();
    let mut sg = SuperGraph::new(src.labels().clone());
    let mut merge_log = BTreeMap::new();
    for (k, groups) in merge_groups(src) {
        materialize_groups(src, &groups, k, &mut sg, &mut merge_log)?;
    }
    for (a, b) in src.super_edges() {
        let (ma, mb) = (merge_log[&a], merge_log[&b]);
        if ma != mb {
            sg.add_super_edge(ma, mb)?;
        }
    }
    Ok(EquiWingCompIndex { sg, merge_log })
}

pub fn query_comp(
    idx: &EquiWingCompIndex,
    q: VertexId,
    k: u32,
    seeds: SeedSource,
) -> Result<WingResult> {
    idx.query(q, k, seeds)
}

/// |nodes of EquiWing| / |nodes of EquiWing-Comp|.
pub fn compression_ratio(ew: &EquiWingIndex, ewc: &EquiWingCompIndex) -> Result<f64> {
    if ewc.node_count() == 0 {
        return Err(Error::invalid("compressed index is empty"));
    }
    Ok(ew.node_count() as f64 / ewc.node_count() as f64)
}
