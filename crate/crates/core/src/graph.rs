//! Bipartite graph storage, edge-list loading and butterfly enumeration.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    U,
    V,
}

impl Side {
    pub fn token(self) -> &'static str {
        match self {
            Side::U => "U",
            Side::V => "V",
        }
    }

    pub fn from_token(s: &str) -> Option<Side> {
        match s {
            "U" | "u" => Some(Side::U),
            "V" | "v" => Some(Side::V),
            _ => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A vertex is a side tag plus a dense ordinal within that side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId {
    pub side: Side,
    pub ordinal: u32,
}

impl VertexId {
    pub fn u(ordinal: u32) -> Self {
        VertexId {
            side: Side::U,
            ordinal,
        }
    }

    pub fn v(ordinal: u32) -> Self {
        VertexId {
            side: Side::V,
            ordinal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Endpoint ordinals of an edge. Stable across mutations, unlike `EdgeId` slots
/// which are only meaningful for one graph instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey {
    pub u: u32,
    pub v: u32,
}

impl EdgeKey {
    pub fn new(u: u32, v: u32) -> Self {
        EdgeKey { u, v }
    }
}

/// Label tables for both sides. Ordinals are assigned in first-seen order.
#[derive(Clone, Debug, Default)]
pub struct VertexLabels {
    u: Vec<String>,
    v: Vec<String>,
    u_lookup: HashMap<String, u32>,
    v_lookup: HashMap<String, u32>,
}

impl PartialEq for VertexLabels {
    fn eq(&self, other: &Self) -> bool {
        self.u == other.u && self.v == other.v
    }
}

impl Eq for VertexLabels {}

impl VertexLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self, side: Side) -> usize {
        match side {
            Side::U => self.u.len(),
            Side::V => self.v.len(),
        }
    }

    pub fn names(&self, side: Side) -> &[String] {
        match side {
            Side::U => &self.u,
            Side::V => &self.v,
        }
    }

    pub fn get(&self, side: Side, label: &str) -> Option<u32> {
        match side {
            Side::U => self.u_lookup.get(label).copied(),
            Side::V => self.v_lookup.get(label).copied(),
        }
    }

    pub fn name(&self, id: VertexId) -> &str {
        &self.names(id.side)[id.ordinal as usize]
    }

    pub fn try_name(&self, id: VertexId) -> Option<&str> {
        self.names(id.side)
            .get(id.ordinal as usize)
            .map(|s| s.as_str())
    }

    /// Returns the ordinal for `label`, appending it if unseen.
    pub fn intern(&mut self, side: Side, label: &str) -> u32 {
        let (names, lookup) = match side {
            Side::U => (&mut self.u, &mut self.u_lookup),
            Side::V => (&mut self.v, &mut self.v_lookup),
        };
        if let Some(&o) = lookup.get(label) {
            return o;
        }
        let o = names.len() as u32;
        names.push(label.to_string());
        lookup.insert(label.to_string(), o);
        o
    }

    /// Resolve a label that may exist on either side. `side` restricts the search.
    pub fn resolve(&self, label: &str, side: Option<Side>) -> Result<VertexId> {
        match side {
            Some(s) => self
                .get(s, label)
                .map(|ordinal| VertexId { side: s, ordinal })
                .ok_or_else(|| Error::not_found(format!("vertex {label} on side {s}"))),
            None => match (self.get(Side::U, label), self.get(Side::V, label)) {
                (Some(o), None) => Ok(VertexId::u(o)),
                (None, Some(o)) => Ok(VertexId::v(o)),
                (Some(_), Some(_)) => Err(Error::invalid(format!(
                    "vertex label {label} exists on both sides; specify a side"
                ))),
                (None, None) => Err(Error::not_found(format!("vertex {label}"))),
            },
        }
    }
}

/// The three other edges of a butterfly through a pivot edge (u, v), with the
/// fourth corner vertices w (side U) and x (side V).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ButterflyRef {
    pub w: u32,
    pub x: u32,
    /// Edge (u, x).
    pub ux: EdgeId,
    /// Edge (w, v).
    pub wv: EdgeId,
    /// Edge (w, x).
    pub wx: EdgeId,
}

impl ButterflyRef {
    #[inline]
    pub fn others(&self) -> [EdgeId; 3] {
        [self.ux, self.wv, self.wx]
    }
}

/// A 2x2 biclique in canonical form: `us[0] < us[1]`, `vs[0] < vs[1]`.
/// `edges` are ordered (us0,vs0), (us0,vs1), (us1,vs0), (us1,vs1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Butterfly {
    pub us: [u32; 2],
    pub vs: [u32; 2],
    pub edges: [EdgeId; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeListFormat {
    /// KONECT `out.*` files: `%` comments, extra weight/timestamp columns ignored.
    Konect,
    /// Exactly two whitespace-separated tokens per line.
    TwoColumn,
}

impl EdgeListFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "konect" => Some(EdgeListFormat::Konect),
            "two-column" | "tsv" | "plain" => Some(EdgeListFormat::TwoColumn),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadReport {
    pub graph: BipartiteGraph,
    pub duplicates: usize,
    pub lines: usize,
}

#[derive(Clone, Debug, Default)]
pub struct BipartiteGraph {
    labels: VertexLabels,
    u_adj: Vec<Vec<(u32, EdgeId)>>,
    v_adj: Vec<Vec<(u32, EdgeId)>>,
    endpoints: Vec<Option<EdgeKey>>,
    live: usize,
}

impl BipartiteGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from label pairs; duplicates are ignored.
    pub fn from_label_pairs<'a, I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut g = BipartiteGraph::new();
        for (a, b) in pairs {
            g.insert_edge_by_label(a, b);
        }
        g
    }

    pub fn labels(&self) -> &VertexLabels {
        &self.labels
    }

    pub fn u_count(&self) -> usize {
        self.u_adj.len()
    }

    pub fn v_count(&self) -> usize {
        self.v_adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.live
    }

    /// One past the largest `EdgeId` ever handed out.
    pub fn edge_capacity(&self) -> usize {
        self.endpoints.len()
    }

    pub fn is_live(&self, e: EdgeId) -> bool {
        matches!(self.endpoints.get(e.index()), Some(Some(_)))
    }

    pub fn key(&self, e: EdgeId) -> Option<EdgeKey> {
        self.endpoints.get(e.index()).copied().flatten()
    }

    pub fn endpoints(&self, e: EdgeId) -> Result<(VertexId, VertexId)> {
        let k = self
            .key(e)
            .ok_or_else(|| Error::not_found(format!("edge id {}", e.0)))?;
        Ok((VertexId::u(k.u), VertexId::v(k.v)))
    }

    pub fn edge_id(&self, key: EdgeKey) -> Option<EdgeId> {
        let adj = self.u_adj.get(key.u as usize)?;
        adj.binary_search_by_key(&key.v, |&(v, _)| v)
            .ok()
            .map(|i| adj[i].1)
    }

    pub fn edge_by_label(&self, u: &str, v: &str) -> Option<EdgeId> {
        let u = self.labels.get(Side::U, u)?;
        let v = self.labels.get(Side::V, v)?;
        self.edge_id(EdgeKey::new(u, v))
    }

    /// Live edges in `EdgeId` order.
    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, EdgeKey)> + '_ {
        self.endpoints
            .iter()
            .enumerate()
            .filter_map(|(i, k)| k.map(|k| (EdgeId(i as u32), k)))
    }

    /// Sorted `(v ordinal, edge)` pairs adjacent to `u`.
    pub fn u_neighbors(&self, u: u32) -> &[(u32, EdgeId)] {
        self.u_adj
            .get(u as usize)
            .map(|a| a.as_slice())
            .unwrap_or(&[])
    }

    /// Sorted `(u ordinal, edge)` pairs adjacent to `v`.
    pub fn v_neighbors(&self, v: u32) -> &[(u32, EdgeId)] {
        self.v_adj
            .get(v as usize)
            .map(|a| a.as_slice())
            .unwrap_or(&[])
    }

    pub fn neighbors(&self, x: VertexId) -> &[(u32, EdgeId)] {
        match x.side {
            Side::U => self.u_neighbors(x.ordinal),
            Side::V => self.v_neighbors(x.ordinal),
        }
    }

    pub fn degree(&self, x: VertexId) -> usize {
        self.neighbors(x).len()
    }

    pub fn contains_vertex(&self, x: VertexId) -> bool {
        match x.side {
            Side::U => (x.ordinal as usize) < self.u_adj.len(),
            Side::V => (x.ordinal as usize) < self.v_adj.len(),
        }
    }

    /// Incident edges of `x` in `EdgeKey` order.
    pub fn incident_edges(&self, x: VertexId) -> Vec<EdgeId> {
        match x.side {
            Side::U => self
                .u_neighbors(x.ordinal)
                .iter()
                .map(|&(_, e)| e)
                .collect(),
            Side::V => {
                // v_adj is sorted by u ordinal, which is already EdgeKey order.
                self.v_neighbors(x.ordinal)
                    .iter()
                    .map(|&(_, e)| e)
                    .collect()
            }
        }
    }

    pub fn add_vertex(&mut self, side: Side, label: &str) -> u32 {
        let o = self.labels.intern(side, label);
        let adj = match side {
            Side::U => &mut self.u_adj,
            Side::V => &mut self.v_adj,
        };
        if adj.len() <= o as usize {
            adj.resize_with(o as usize + 1, Vec::new);
        }
        o
    }

    /// Insert (u, v) by ordinals. Returns the id and whether the edge is new.
    pub fn insert_edge(&mut self, key: EdgeKey) -> Result<(EdgeId, bool)> {
        if key.u as usize >= self.u_adj.len() || key.v as usize >= self.v_adj.len() {
            return Err(Error::invalid(format!(
                "edge ({}, {}) references an unknown vertex",
                key.u, key.v
            )));
        }
        let adj = &mut self.u_adj[key.u as usize];
        match adj.binary_search_by_key(&key.v, |&(v, _)| v) {
            Ok(i) => Ok((adj[i].1, false)),
            Err(i) => {
                let e = EdgeId(self.endpoints.len() as u32);
                adj.insert(i, (key.v, e));
                let vadj = &mut self.v_adj[key.v as usize];
                let j = vadj.partition_point(|&(u, _)| u < key.u);
                vadj.insert(j, (key.u, e));
                self.endpoints.push(Some(key));
                self.live += 1;
                Ok((e, true))
            }
        }
    }

    pub fn insert_edge_by_label(&mut self, u: &str, v: &str) -> (EdgeId, bool) {
        let u = self.add_vertex(Side::U, u);
        let v = self.add_vertex(Side::V, v);
        self.insert_edge(EdgeKey::new(u, v))
            .expect("vertices were just added")
    }

    /// Remove a live edge. Its id is retired and never reused.
    pub fn delete_edge(&mut self, e: EdgeId) -> Result<EdgeKey> {
        let key = self
            .key(e)
            .ok_or_else(|| Error::not_found(format!("edge id {}", e.0)))?;
        let adj = &mut self.u_adj[key.u as usize];
        if let Ok(i) = adj.binary_search_by_key(&key.v, |&(v, _)| v) {
            adj.remove(i);
        }
        let vadj = &mut self.v_adj[key.v as usize];
        if let Ok(j) = vadj.binary_search_by_key(&key.u, |&(u, _)| u) {
            vadj.remove(j);
        }
        self.endpoints[e.index()] = None;
        self.live -= 1;
        Ok(key)
    }

    /// Calls `f` once per butterfly containing `e`. No-op for a dead edge.
    #[inline]
    pub fn for_each_butterfly<F: FnMut(ButterflyRef)>(&self, e: EdgeId, mut f: F) {
        let Some(key) = self.key(e) else { return };
        let (u, v) = (key.u, key.v);
        let nu = &self.u_adj[u as usize];
        for &(w, wv) in &self.v_adj[v as usize] {
            if w == u {
                continue;
            }
            let nw = &self.u_adj[w as usize];
            let (mut i, mut j) = (0usize, 0usize);
            while i < nu.len() && j < nw.len() {
                let (a, b) = (nu[i].0, nw[j].0);
                if a < b {
                    i += 1;
                } else if a > b {
                    j += 1;
                } else {
                    if a != v {
                        f(ButterflyRef {
                            w,
                            x: a,
                            ux: nu[i].1,
                            wv,
                            wx: nw[j].1,
                        });
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
    }

    pub fn butterfly_support(&self, e: EdgeId) -> Result<u64> {
        if !self.is_live(e) {
            return Err(Error::not_found(format!("edge id {}", e.0)));
        }
        let mut n = 0u64;
        self.for_each_butterfly(e, |_| n += 1);
        Ok(n)
    }

    /// All butterflies through `e`, canonicalized and sorted.
    pub fn butterflies_containing(&self, e: EdgeId) -> Result<Vec<Butterfly>> {
        let key = self
            .key(e)
            .ok_or_else(|| Error::not_found(format!("edge id {}", e.0)))?;
        let mut out = Vec::new();
        self.for_each_butterfly(e, |b| {
            out.push(canonical_butterfly(key, e, &b));
        });
        out.sort();
        Ok(out)
    }
}

fn canonical_butterfly(key: EdgeKey, e: EdgeId, b: &ButterflyRef) -> Butterfly {
    // Place each edge at (row, col) with rows ordered by u and cols by v.
    let (u0, u1) = (key.u.min(b.w), key.u.max(b.w));
    let (v0, v1) = (key.v.min(b.x), key.v.max(b.x));
    let mut edges = [EdgeId(0); 4];
    let place = |uu: u32, vv: u32| (usize::from(uu == u1)) * 2 + usize::from(vv == v1);
    edges[place(key.u, key.v)] = e;
    edges[place(key.u, b.x)] = b.ux;
    edges[place(b.w, key.v)] = b.wv;
    edges[place(b.w, b.x)] = b.wx;
    Butterfly {
        us: [u0, u1],
        vs: [v0, v1],
        edges,
    }
}

/// Parse an edge list. The first column is side U, the second side V.
pub fn load_edge_list<R: BufRead>(reader: R, format: EdgeListFormat) -> Result<LoadReport> {
    let mut g = BipartiteGraph::new();
    let mut duplicates = 0usize;
    let mut lines = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        lines += 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') || t.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        let ok = match format {
            EdgeListFormat::TwoColumn => toks.len() == 2,
            EdgeListFormat::Konect => {
                toks.len() >= 2 && toks[2..].iter().all(|s| s.parse::<f64>().is_ok())
            }
        };
        if !ok {
            return Err(Error::parse(
                i + 1,
                format!("expected two vertex tokens, got {:?}", t),
            ));
        }
        let (_, fresh) = g.insert_edge_by_label(toks[0], toks[1]);
        if !fresh {
            duplicates += 1;
        }
    }
    Ok(LoadReport {
        graph: g,
        duplicates,
        lines,
    })
}

pub fn load_edge_list_file(path: &std::path::Path, format: EdgeListFormat) -> Result<LoadReport> {
    let f = std::fs::File::open(path)?;
    load_edge_list(std::io::BufReader::new(f), format)
}
