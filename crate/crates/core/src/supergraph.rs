//! Super-graph storage shared by both index flavours, and the index query.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use crate::baseline::{check_query, WingResult};
use crate::decomposition::WingLabeling;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, EdgeKey, Side, VertexId, VertexLabels};

pub type SnId = u32;

/// Neighbour entry ordered by wing number descending, then id.
type Ranked = (Reverse<u32>, SnId);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuperNode {
    pub id: SnId,
    pub k: u32,
    /// Sorted edge keys.
    pub members: Vec<EdgeKey>,
    vertices: Vec<VertexId>,
}

impl SuperNode {
    fn new(id: SnId, k: u32, mut members: Vec<EdgeKey>) -> Self {
        members.sort_unstable();
        members.dedup();
        let mut vertices: Vec<VertexId> = members
            .iter()
            .flat_map(|e| [VertexId::u(e.u), VertexId::v(e.v)])
            .collect();
        vertices.sort_unstable();
        vertices.dedup();
        SuperNode {
            id,
            k,
            members,
            vertices,
        }
    }

    /// Distinct endpoints of the member edges, sorted.
    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn contains_vertex(&self, q: VertexId) -> bool {
        self.vertices.binary_search(&q).is_ok()
    }
}

/// Where a query finds its starting super nodes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SeedSource {
    /// Per-vertex seed lists.
    #[default]
    Hash,
    /// Scan every node at levels k..=k_max and test membership.
    LevelScan,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub seeds_examined: usize,
    pub nodes_touched: usize,
    pub super_edges_scanned: usize,
    pub edges_emitted: usize,
}

/// Index contents with snIDs abstracted away: nodes as (k, members) and super
/// edges as pairs of node representatives (smallest member).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalIndex {
    pub nodes: BTreeSet<(u32, Vec<EdgeKey>)>,
    pub super_edges: BTreeSet<(EdgeKey, EdgeKey)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SuperGraph {
    labels: VertexLabels,
    nodes: BTreeMap<SnId, SuperNode>,
    adj: HashMap<SnId, BTreeSet<Ranked>>,
    seeds: HashMap<VertexId, BTreeSet<Ranked>>,
    edge_node: HashMap<EdgeKey, SnId>,
    levels: BTreeMap<u32, BTreeSet<SnId>>,
    edge_count: usize,
}

impl SuperGraph {
    pub fn new(labels: VertexLabels) -> Self {
        SuperGraph {
            labels,
            ..Default::default()
        }
    }

    pub fn labels(&self) -> &VertexLabels {
        &self.labels
    }

    pub(crate) fn labels_mut(&mut self) -> &mut VertexLabels {
        &mut self.labels
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn super_edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn node(&self, id: SnId) -> Option<&SuperNode> {
        self.nodes.get(&id)
    }

    /// Nodes in snID order.
    pub fn nodes(&self) -> impl Iterator<Item = &SuperNode> + '_ {
        self.nodes.values()
    }

    pub fn max_id(&self) -> Option<SnId> {
        self.nodes.keys().next_back().copied()
    }

    pub fn node_of_edge(&self, e: EdgeKey) -> Option<SnId> {
        self.edge_node.get(&e).copied()
    }

    pub fn k_max(&self) -> u32 {
        self.levels.keys().next_back().copied().unwrap_or(0)
    }

    pub fn level_nodes(&self, k: u32) -> impl Iterator<Item = SnId> + '_ {
        self.levels
            .get(&k)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    pub fn levels(&self) -> impl Iterator<Item = (u32, &BTreeSet<SnId>)> + '_ {
        self.levels.iter().map(|(&k, s)| (k, s))
    }

    /// Neighbours as (k, id), highest k first.
    pub fn neighbors(&self, id: SnId) -> impl Iterator<Item = (u32, SnId)> + '_ {
        self.adj
            .get(&id)
            .into_iter()
            .flat_map(|s| s.iter().map(|&(Reverse(k), n)| (k, n)))
    }

    /// Seed nodes of `q` as (k, id), highest k first.
    pub fn seeds(&self, q: VertexId) -> impl Iterator<Item = (u32, SnId)> + '_ {
        self.seeds
            .get(&q)
            .into_iter()
            .flat_map(|s| s.iter().map(|&(Reverse(k), n)| (k, n)))
    }

    /// Vertices that have at least one seed entry.
    pub fn seeded_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.seeds.keys().copied()
    }

    /// Super edges as (a, b) with a < b, sorted.
    pub fn super_edges(&self) -> Vec<(SnId, SnId)> {
        let mut out: Vec<(SnId, SnId)> = self
            .adj
            .iter()
            .flat_map(|(&a, s)| {
                s.iter()
                    .filter(move |&&(_, b)| a < b)
                    .map(move |&(_, b)| (a, b))
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn has_super_edge(&self, a: SnId, b: SnId) -> bool {
        match (self.nodes.get(&a), self.adj.get(&a)) {
            (Some(_), Some(s)) => self
                .nodes
                .get(&b)
                .is_some_and(|nb| s.contains(&(Reverse(nb.k), b))),
            _ => false,
        }
    }

    pub(crate) fn add_node(&mut self, id: SnId, k: u32, members: Vec<EdgeKey>) -> Result<()> {
        if self.nodes.contains_key(&id) {
            return Err(Error::consistency(format!("duplicate super node id {id}")));
        }
        if k == 0 || members.is_empty() {
            return Err(Error::consistency(format!(
                "super node {id} must have k >= 1 and at least one member"
            )));
        }
        let node = SuperNode::new(id, k, members);
        for e in &node.members {
            if let Some(prev) = self.edge_node.insert(*e, id) {
                return Err(Error::consistency(format!(
                    "edge ({}, {}) assigned to super nodes {prev} and {id}",
                    e.u, e.v
                )));
            }
        }
        for &x in &node.vertices {
            self.seeds.entry(x).or_default().insert((Reverse(k), id));
        }
        self.levels.entry(k).or_default().insert(id);
        self.nodes.insert(id, node);
        Ok(())
    }

    /// Remove a node with all incident super edges and seed entries.
    pub(crate) fn remove_node(&mut self, id: SnId) -> Option<SuperNode> {
        let node = self.nodes.remove(&id)?;
        if let Some(nbrs) = self.adj.remove(&id) {
            for (_, n) in nbrs {
                if let Some(s) = self.adj.get_mut(&n) {
                    s.remove(&(Reverse(node.k), id));
                    if s.is_empty() {
                        self.adj.remove(&n);
                    }
                }
                self.edge_count -= 1;
            }
        }
        for &x in &node.vertices {
            if let Some(s) = self.seeds.get_mut(&x) {
                s.remove(&(Reverse(node.k), id));
                if s.is_empty() {
                    self.seeds.remove(&x);
                }
            }
        }
        for e in &node.members {
            if self.edge_node.get(e) == Some(&id) {
                self.edge_node.remove(e);
            }
        }
        if let Some(s) = self.levels.get_mut(&node.k) {
            s.remove(&id);
            if s.is_empty() {
                self.levels.remove(&node.k);
            }
        }
        Some(node)
    }

    /// Returns false if the edge already existed.
    pub(crate) fn add_super_edge(&mut self, a: SnId, b: SnId) -> Result<bool> {
        let ka = self
            .nodes
            .get(&a)
            .ok_or_else(|| Error::consistency(format!("super edge to unknown node {a}")))?
            .k;
        let kb = self
            .nodes
            .get(&b)
            .ok_or_else(|| Error::consistency(format!("super edge to unknown node {b}")))?
            .k;
        if ka == kb {
            return Err(Error::consistency(format!(
                "super edge ({a}, {b}) joins two nodes with wing number {ka}"
            )));
        }
        let fresh = self.adj.entry(a).or_default().insert((Reverse(kb), b));
        if fresh {
            self.adj.entry(b).or_default().insert((Reverse(ka), a));
            self.edge_count += 1;
        }
        Ok(fresh)
    }

    pub(crate) fn remove_super_edge(&mut self, a: SnId, b: SnId) -> bool {
        let (Some(ka), Some(kb)) = (
            self.nodes.get(&a).map(|n| n.k),
            self.nodes.get(&b).map(|n| n.k),
        ) else {
            return false;
        };
        let removed = self
            .adj
            .get_mut(&a)
            .is_some_and(|s| s.remove(&(Reverse(kb), b)));
        if removed {
            if let Some(s) = self.adj.get_mut(&b) {
                s.remove(&(Reverse(ka), a));
            }
            for n in [a, b] {
                if self.adj.get(&n).is_some_and(|s| s.is_empty()) {
                    self.adj.remove(&n);
                }
            }
            self.edge_count -= 1;
        }
        removed
    }

    pub fn contains_query_vertex(&self, q: VertexId) -> bool {
        (q.ordinal as usize) < self.labels.len(q.side)
    }

    /// Personalized k-wing query by traversal of super edges with k' ≥ k.
    pub fn query(
        &self,
        q: VertexId,
        k: u32,
        source: SeedSource,
    ) -> Result<(WingResult, QueryStats)> {
        check_query(self.contains_query_vertex(q), q, k)?;
        let mut stats = QueryStats::default();
        let mut seed_ids: Vec<SnId> = Vec::new();
        match source {
            SeedSource::Hash => {
                for (kk, id) in self.seeds(q) {
                    stats.seeds_examined += 1;
                    if kk < k {
                        break;
                    }
                    seed_ids.push(id);
                }
            }
            SeedSource::LevelScan => {
                for (_, ids) in self.levels.range(k..) {
                    for id in ids {
                        stats.seeds_examined += 1;
                        if self.nodes[id].contains_vertex(q) {
                            seed_ids.push(*id);
                        }
                    }
                }
            }
        }

        let mut visited: HashSet<SnId> = HashSet::new();
        let mut queue = VecDeque::new();
        let mut wings = Vec::new();
        for s in seed_ids {
            if !visited.insert(s) {
                continue;
            }
            queue.push_back(s);
            let mut wing = Vec::new();
            while let Some(id) = queue.pop_front() {
                stats.nodes_touched += 1;
                wing.extend_from_slice(&self.nodes[&id].members);
                if let Some(nbrs) = self.adj.get(&id) {
                    for &(Reverse(kk), n) in nbrs {
                        stats.super_edges_scanned += 1;
                        if kk < k {
                            break;
                        }
                        if visited.insert(n) {
                            queue.push_back(n);
                        }
                    }
                }
            }
            stats.edges_emitted += wing.len();
            wings.push(wing);
        }
        Ok((WingResult::new(q, k, wings), stats))
    }

    pub fn canonical(&self) -> CanonicalIndex {
        let rep = |id: &SnId| self.nodes[id].members[0];
        let nodes = self
            .nodes
            .values()
            .map(|n| (n.k, n.members.clone()))
            .collect();
        let super_edges = self
            .super_edges()
            .iter()
            .map(|(a, b)| {
                let (x, y) = (rep(a), rep(b));
                (x.min(y), x.max(y))
            })
            .collect();
        CanonicalIndex { nodes, super_edges }
    }

    /// Check that the nodes partition the ψ ≥ 1 edges of `g` with matching
    /// levels and that no super edge joins equal levels.
    pub fn check_partition(&self, g: &BipartiteGraph, labeling: &WingLabeling) -> Result<()> {
        let mut expected = 0usize;
        for (e, key) in g.edges() {
            let k = labeling.psi_or_zero(e);
            if k == 0 {
                if self.edge_node.contains_key(&key) {
                    return Err(Error::consistency(format!(
                        "edge ({}, {}) has wing number 0 but is indexed",
                        key.u, key.v
                    )));
                }
                continue;
            }
            expected += 1;
            let id = self.edge_node.get(&key).ok_or_else(|| {
                Error::consistency(format!("edge ({}, {}) is not indexed", key.u, key.v))
            })?;
            if self.nodes[id].k != k {
                return Err(Error::consistency(format!(
                    "edge ({}, {}) has wing number {k} but sits in node {id} of level {}",
                    key.u, key.v, self.nodes[id].k
                )));
            }
        }
        let total: usize = self.nodes.values().map(|n| n.members.len()).sum();
        if total != expected || self.edge_node.len() != expected {
            return Err(Error::consistency(format!(
                "index holds {total} member edges, graph has {expected} edges with wing number >= 1"
            )));
        }
        for (a, b) in self.super_edges() {
            if self.nodes[&a].k == self.nodes[&b].k {
                return Err(Error::consistency(format!(
                    "super edge ({a}, {b}) joins equal levels"
                )));
            }
        }
        Ok(())
    }

    /// Translate the index into the ordinal space of another label table by
    /// matching labels. Fails if a member vertex is unknown there.
    pub fn rebind(&self, target: &VertexLabels) -> Result<SuperGraph> {
        if &self.labels == target {
            return Ok(self.clone());
        }
        let map_side = |side: Side| -> Vec<Option<u32>> {
            self.labels
                .names(side)
                .iter()
                .map(|l| target.get(side, l))
                .collect()
        };
        let (mu, mv) = (map_side(Side::U), map_side(Side::V));
        let mut out = SuperGraph::new(target.clone());
        for n in self.nodes.values() {
            let mut members = Vec::with_capacity(n.members.len());
            for e in &n.members {
                match (mu[e.u as usize], mv[e.v as usize]) {
                    (Some(u), Some(v)) => members.push(EdgeKey::new(u, v)),
                    _ => {
                        return Err(Error::invalid(format!(
                            "index edge ({}, {}) has no counterpart in the graph",
                            self.labels.name(VertexId::u(e.u)),
                            self.labels.name(VertexId::v(e.v))
                        )))
                    }
                }
            }
            out.add_node(n.id, n.k, members)?;
        }
        for (a, b) in self.super_edges() {
            out.add_super_edge(a, b)?;
        }
        Ok(out)
    }
}
