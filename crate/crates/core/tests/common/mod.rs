//! Fixtures and brute-force oracles shared by the integration tests. Nothing
//! here calls into the library's peeling, index or traversal code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use equiwing::{BipartiteGraph, EdgeKey, Side, VertexId};
use proptest::prelude::*;

/// Running example: left column (v1..v8) is side U, right column (u1..u7) is side V.
pub const RUNNING_EXAMPLE: &[(&str, &str)] = &[
    ("v1", "u1"),
    ("v1", "u2"),
    ("v2", "u1"),
    ("v2", "u2"),
    ("v2", "u3"),
    ("v2", "u4"),
    ("v3", "u2"),
    ("v3", "u3"),
    ("v3", "u4"),
    ("v4", "u3"),
    ("v4", "u4"),
    ("v5", "u3"),
    ("v5", "u4"),
    ("v5", "u5"),
    ("v5", "u6"),
    ("v6", "u4"),
    ("v6", "u5"),
    ("v6", "u6"),
    ("v6", "u7"),
    ("v7", "u5"),
    ("v7", "u6"),
    ("v7", "u7"),
    ("v8", "u5"),
    ("v8", "u6"),
    ("v8", "u7"),
];

pub fn running_example() -> BipartiteGraph {
    BipartiteGraph::from_label_pairs(RUNNING_EXAMPLE.iter().copied())
}

/// Equivalence classes of the running example, in creation order.
pub fn example_classes(g: &BipartiteGraph) -> Vec<(u32, Vec<EdgeKey>)> {
    let mut nu4 = Vec::new();
    for a in ["v2", "v3", "v4", "v5"] {
        for b in ["u3", "u4"] {
            nu4.push((a, b));
        }
    }
    let mut nu6 = Vec::new();
    for a in ["v6", "v7", "v8"] {
        for b in ["u5", "u6", "u7"] {
            nu6.push((a, b));
        }
    }
    vec![
        (1, keys(g, &[("v1", "u1"), ("v1", "u2"), ("v2", "u1")])),
        (2, keys(g, &[("v2", "u2"), ("v3", "u2")])),
        (2, keys(g, &[("v6", "u4")])),
        (3, keys(g, &nu4)),
        (3, keys(g, &[("v5", "u5"), ("v5", "u6")])),
        (4, keys(g, &nu6)),
    ]
}

pub fn key(g: &BipartiteGraph, u: &str, v: &str) -> EdgeKey {
    let l = g.labels();
    EdgeKey::new(
        l.get(Side::U, u)
            .unwrap_or_else(|| panic!("no U vertex {u}")),
        l.get(Side::V, v)
            .unwrap_or_else(|| panic!("no V vertex {v}")),
    )
}

pub fn keys(g: &BipartiteGraph, pairs: &[(&str, &str)]) -> Vec<EdgeKey> {
    let mut out: Vec<EdgeKey> = pairs.iter().map(|(u, v)| key(g, u, v)).collect();
    out.sort();
    out
}

pub fn uvert(g: &BipartiteGraph, l: &str) -> VertexId {
    VertexId::u(g.labels().get(Side::U, l).unwrap())
}

/// Plain edge set, independent of the library's adjacency structure.
pub fn edge_set(g: &BipartiteGraph) -> BTreeSet<EdgeKey> {
    g.edges().map(|(_, k)| k).collect()
}

/// Every butterfly of `edges` as its four edge keys, by enumerating vertex quadruples.
pub fn all_butterflies(edges: &BTreeSet<EdgeKey>) -> Vec<[EdgeKey; 4]> {
    let mut by_u: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for e in edges {
        by_u.entry(e.u).or_default().insert(e.v);
    }
    let us: Vec<u32> = by_u.keys().copied().collect();
    let mut out = Vec::new();
    for i in 0..us.len() {
        for j in i + 1..us.len() {
            let common: Vec<u32> = by_u[&us[i]].intersection(&by_u[&us[j]]).copied().collect();
            for a in 0..common.len() {
                for b in a + 1..common.len() {
                    let (u, w, v, x) = (us[i], us[j], common[a], common[b]);
                    out.push([
                        EdgeKey::new(u, v),
                        EdgeKey::new(u, x),
                        EdgeKey::new(w, v),
                        EdgeKey::new(w, x),
                    ]);
                }
            }
        }
    }
    out
}

pub fn brute_support(edges: &BTreeSet<EdgeKey>) -> HashMap<EdgeKey, u64> {
    let mut sup: HashMap<EdgeKey, u64> = edges.iter().map(|e| (*e, 0)).collect();
    for b in all_butterflies(edges) {
        for e in b {
            *sup.get_mut(&e).unwrap() += 1;
        }
    }
    sup
}

/// Edges surviving repeated deletion of edges with support < k.
pub fn k_fixpoint(edges: &BTreeSet<EdgeKey>, k: u64) -> BTreeSet<EdgeKey> {
    let mut cur = edges.clone();
    loop {
        let sup = brute_support(&cur);
        let next: BTreeSet<EdgeKey> = cur.iter().copied().filter(|e| sup[e] >= k).collect();
        if next.len() == cur.len() {
            return cur;
        }
        cur = next;
    }
}

/// ψ(e) = largest k whose fixpoint keeps e.
pub fn oracle_psi(edges: &BTreeSet<EdgeKey>) -> BTreeMap<EdgeKey, u32> {
    let mut psi: BTreeMap<EdgeKey, u32> = edges.iter().map(|e| (*e, 0)).collect();
    let mut k = 1u64;
    loop {
        let keep = k_fixpoint(edges, k);
        if keep.is_empty() {
            return psi;
        }
        for e in keep {
            psi.insert(e, k as u32);
        }
        k += 1;
    }
}

struct Dsu(HashMap<EdgeKey, EdgeKey>);

impl Dsu {
    fn new<'a>(items: impl IntoIterator<Item = &'a EdgeKey>) -> Self {
        Dsu(items.into_iter().map(|e| (*e, *e)).collect())
    }
    fn find(&mut self, x: EdgeKey) -> EdgeKey {
        let p = self.0[&x];
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.0.insert(x, r);
        r
    }
    fn union(&mut self, a: EdgeKey, b: EdgeKey) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0.insert(ra.max(rb), ra.min(rb));
        }
    }
    fn groups(&mut self) -> Vec<Vec<EdgeKey>> {
        let keys: Vec<EdgeKey> = self.0.keys().copied().collect();
        let mut g: BTreeMap<EdgeKey, Vec<EdgeKey>> = BTreeMap::new();
        for k in keys {
            let r = self.find(k);
            g.entry(r).or_default().push(k);
        }
        g.into_values()
            .map(|mut v| {
                v.sort();
                v
            })
            .collect()
    }
}

fn touches(e: EdgeKey, q: VertexId) -> bool {
    match q.side {
        Side::U => e.u == q.ordinal,
        Side::V => e.v == q.ordinal,
    }
}

/// Every k-wing of `edges`: fixpoint, then butterfly-connected groups.
pub fn oracle_level_wings(edges: &BTreeSet<EdgeKey>, k: u64) -> Vec<Vec<EdgeKey>> {
    let keep = k_fixpoint(edges, k);
    let mut dsu = Dsu::new(keep.iter());
    for b in all_butterflies(&keep) {
        for e in &b[1..] {
            dsu.union(b[0], *e);
        }
    }
    dsu.groups()
}

/// The k-wings containing q, sorted by their smallest q-incident edge.
pub fn wings_of(level: &[Vec<EdgeKey>], q: VertexId) -> Vec<Vec<EdgeKey>> {
    let mut wings: Vec<Vec<EdgeKey>> = level
        .iter()
        .filter(|w| w.iter().any(|e| touches(*e, q)))
        .cloned()
        .collect();
    wings.sort_by_key(|w| w.iter().copied().filter(|e| touches(*e, q)).min());
    wings
}

/// Definitional k-wings containing q.
pub fn oracle_wings(edges: &BTreeSet<EdgeKey>, q: VertexId, k: u64) -> Vec<Vec<EdgeKey>> {
    wings_of(&oracle_level_wings(edges, k), q)
}

/// Equivalence classes: ψ = k edges joined when they share a butterfly whose
/// edges all have ψ ≥ k. Super edges: for every butterfly with minimum level
/// m ≥ 1, the class of its level-m edges links to the class of each higher edge.
pub struct OracleIndex {
    pub nodes: BTreeSet<(u32, Vec<EdgeKey>)>,
    pub super_edges: BTreeSet<(EdgeKey, EdgeKey)>,
}

pub fn oracle_index(edges: &BTreeSet<EdgeKey>) -> OracleIndex {
    let psi = oracle_psi(edges);
    let indexed: Vec<EdgeKey> = psi
        .iter()
        .filter(|(_, &k)| k > 0)
        .map(|(e, _)| *e)
        .collect();
    let mut dsu = Dsu::new(indexed.iter());
    let bfs = all_butterflies(edges);
    for b in &bfs {
        let m = b.iter().map(|e| psi[e]).min().unwrap();
        if m == 0 {
            continue;
        }
        let low: Vec<EdgeKey> = b.iter().copied().filter(|e| psi[e] == m).collect();
        for e in &low[1..] {
            dsu.union(low[0], *e);
        }
    }
    let groups = dsu.groups();
    let mut rep: HashMap<EdgeKey, EdgeKey> = HashMap::new();
    let mut nodes = BTreeSet::new();
    for g in groups {
        for e in &g {
            rep.insert(*e, g[0]);
        }
        nodes.insert((psi[&g[0]], g));
    }
    let mut super_edges = BTreeSet::new();
    for b in &bfs {
        let m = b.iter().map(|e| psi[e]).min().unwrap();
        if m == 0 {
            continue;
        }
        let low = rep[b.iter().find(|e| psi[e] == m).unwrap()];
        for e in b.iter().filter(|e| psi[e] > m) {
            let hi = rep[e];
            super_edges.insert((low.min(hi), low.max(hi)));
        }
    }
    OracleIndex { nodes, super_edges }
}

/// Same-level classes merged when connected through strictly higher classes.
pub fn oracle_comp_nodes(ix: &OracleIndex) -> BTreeSet<(u32, Vec<EdgeKey>)> {
    let level: HashMap<EdgeKey, u32> = ix.nodes.iter().map(|(k, m)| (m[0], *k)).collect();
    let mut out = BTreeSet::new();
    let levels: BTreeSet<u32> = level.values().copied().collect();
    for &k in &levels {
        let alive: Vec<EdgeKey> = level
            .iter()
            .filter(|(_, &l)| l >= k)
            .map(|(r, _)| *r)
            .collect();
        let mut dsu = Dsu::new(alive.iter());
        for (a, b) in &ix.super_edges {
            if level[a] >= k && level[b] >= k {
                dsu.union(*a, *b);
            }
        }
        let mut merged: BTreeMap<EdgeKey, Vec<EdgeKey>> = BTreeMap::new();
        for (k2, m) in &ix.nodes {
            if *k2 == k {
                let r = dsu.find(m[0]);
                merged.entry(r).or_default().extend(m.iter().copied());
            }
        }
        for (_, mut m) in merged {
            m.sort();
            out.insert((k, m));
        }
    }
    out
}

/// Small random bipartite graphs given as label pairs.
pub fn arb_graph(
    max_side: usize,
    max_edges: usize,
) -> impl Strategy<Value = Vec<(String, String)>> {
    (2..=max_side, 2..=max_side).prop_flat_map(move |(nu, nv)| {
        proptest::collection::vec((0..nu, 0..nv), 0..=max_edges).prop_map(|pairs| {
            pairs
                .into_iter()
                .map(|(a, b)| (format!("a{a}"), format!("b{b}")))
                .collect()
        })
    })
}

/// Random graphs biased towards dense blocks so that wings are non-trivial.
pub fn arb_dense_graph(max_side: usize) -> impl Strategy<Value = Vec<(String, String)>> {
    (3..=max_side, 3..=max_side).prop_flat_map(|(nu, nv)| {
        proptest::collection::vec(proptest::bool::weighted(0.55), nu * nv).prop_map(move |bits| {
            let mut out = Vec::new();
            for (i, b) in bits.into_iter().enumerate() {
                if b {
                    out.push((format!("a{}", i / nv), format!("b{}", i % nv)));
                }
            }
            out
        })
    })
}

pub fn graph_of(pairs: &[(String, String)]) -> BipartiteGraph {
    BipartiteGraph::from_label_pairs(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())))
}

pub fn all_vertices(g: &BipartiteGraph) -> Vec<VertexId> {
    let mut out: Vec<VertexId> = (0..g.u_count() as u32).map(VertexId::u).collect();
    out.extend((0..g.v_count() as u32).map(VertexId::v));
    out
}

pub fn unique(v: &[EdgeKey]) -> bool {
    let s: HashSet<_> = v.iter().collect();
    s.len() == v.len()
}
