//! Incremental maintenance of wing numbers and both indices under single-edge
//! insertion and deletion.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::comp::{compress, materialize_groups, merge_groups, EquiWingCompIndex};
use crate::decomposition::{wing_decomposition, WingLabeling};
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, ButterflyRef, EdgeId, EdgeKey, Side, VertexId};
use crate::index::{build_equiwing, EquiWingIndex};
use crate::supergraph::{SnId, SuperGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MutationKind {
    Insert,
    Delete,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeMutation {
    pub kind: MutationKind,
    pub u: String,
    pub v: String,
}

impl EdgeMutation {
    pub fn insert(u: impl Into<String>, v: impl Into<String>) -> Self {
        EdgeMutation {
            kind: MutationKind::Insert,
            u: u.into(),
            v: v.into(),
        }
    }

    pub fn delete(u: impl Into<String>, v: impl Into<String>) -> Self {
        EdgeMutation {
            kind: MutationKind::Delete,
            u: u.into(),
            v: v.into(),
        }
    }
}

/// Edges and super nodes a pending mutation may affect.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateScope {
    pub kind: MutationKind,
    pub edge: EdgeKey,
    pub edge_id: EdgeId,
    /// Largest butterfly gain of an edge incident to the new edge (insert only).
    pub delta: u32,
    /// Upper bound on the new edge's wing number (insert) or its current wing number (delete).
    pub upper_bound: u32,
    /// E′, including the mutated edge.
    pub affected_edges: BTreeSet<EdgeId>,
    /// χ′: super nodes holding an edge of E′.
    pub affected_nodes: BTreeSet<SnId>,
    pub induced_u: BTreeSet<u32>,
    pub induced_v: BTreeSet<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdateReport {
    /// (edge, old ψ, new ψ) for every edge whose wing number changed or
    /// which appeared or disappeared.
    pub wing_changes: Vec<(EdgeKey, Option<u32>, Option<u32>)>,
    /// Super nodes that were removed and rebuilt. A superset of the scope's
    /// nodes when a rebuilt class absorbs or splits a neighbour.
    pub affected_nodes: BTreeSet<SnId>,
    pub added_nodes: BTreeSet<SnId>,
    /// Highest level whose nodes or outgoing super edges changed; 0 if none.
    pub max_touched_level: u32,
    /// Set when local repair failed a consistency check and the index was
    /// rebuilt from scratch instead.
    pub fallback: bool,
}

#[inline]
fn for_each_butterfly_without<F: FnMut(ButterflyRef)>(
    g: &BipartiteGraph,
    x: EdgeId,
    gone: Option<EdgeId>,
    mut f: F,
) {
    g.for_each_butterfly(x, |b| {
        if let Some(z) = gone {
            if b.ux == z || b.wv == z || b.wx == z {
                return;
            }
        }
        f(b)
    });
}

/// Per-edge flags over dense edge ids, cleared in time proportional to use.
struct Marks {
    on: Vec<bool>,
    list: Vec<EdgeId>,
}

impl Marks {
    fn new(capacity: usize) -> Self {
        Marks {
            on: vec![false; capacity],
            list: Vec::new(),
        }
    }

    /// True when `y` was not marked before.
    fn mark(&mut self, y: EdgeId) -> bool {
        let fresh = !std::mem::replace(&mut self.on[y.index()], true);
        if fresh {
            self.list.push(y);
        }
        fresh
    }

    fn contains(&self, y: EdgeId) -> bool {
        self.on[y.index()]
    }

    /// Marked edges in marking order; clears the marks.
    fn take(&mut self) -> Vec<EdgeId> {
        for y in &self.list {
            self.on[y.index()] = false;
        }
        std::mem::take(&mut self.list)
    }
}

/// |a ∩ b| over sorted neighbour lists, ignoring ordinal `skip`.
fn intersection_size(a: &[(u32, EdgeId)], b: &[(u32, EdgeId)], skip: u32) -> u32 {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if a[i].0 != skip {
                    n += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Largest number of butterflies that (u′, v′) adds to a single edge incident
/// to it. Valid whether or not the edge is currently in `g`.
fn delta_of(g: &BipartiteGraph, e: EdgeKey) -> u32 {
    let mut best = 0;
    for &(v, _) in g.u_neighbors(e.u) {
        if v != e.v {
            best = best.max(intersection_size(g.v_neighbors(v), g.v_neighbors(e.v), e.u));
        }
    }
    for &(w, _) in g.v_neighbors(e.v) {
        if w != e.u {
            best = best.max(intersection_size(g.u_neighbors(w), g.u_neighbors(e.u), e.v));
        }
    }
    best
}

/// Δ for a not-yet-inserted edge, from pre-insertion neighbourhoods.
pub fn compute_delta(g: &BipartiteGraph, e: EdgeKey) -> Result<u32> {
    if g.edge_id(e).is_some() {
        return Err(Error::invalid(format!(
            "edge ({}, {}) is already present",
            e.u, e.v
        )));
    }
    Ok(delta_of(g, e))
}

/// Butterflies through `e` whose other three edges all have ψ ≥ max(k, 0).
/// Unlabeled edges count as ψ = 0.
pub fn k_level_butterfly_count(
    g: &BipartiteGraph,
    labeling: &WingLabeling,
    e: EdgeId,
    k: i64,
) -> Result<u64> {
    if !g.is_live(e) {
        return Err(Error::not_found(format!("edge id {}", e.0)));
    }
    let th = k.max(0) as u64;
    let mut n = 0;
    g.for_each_butterfly(e, |b| {
        if b.others()
            .iter()
            .all(|&y| labeling.psi_or_zero(y) as u64 >= th)
        {
            n += 1;
        }
    });
    Ok(n)
}

struct Bounds {
    delta: u32,
    tight: u32,
    loose: u32,
}

fn bounds(g: &BipartiteGraph, labeling: &WingLabeling, e: EdgeId) -> Result<Bounds> {
    let key = g
        .key(e)
        .ok_or_else(|| Error::invalid(format!("edge id {} is not in the graph", e.0)))?;
    let delta = delta_of(g, key);
    let mut mins = Vec::new();
    g.for_each_butterfly(e, |b| {
        mins.push(
            b.others()
                .iter()
                .map(|&y| labeling.psi_or_zero(y))
                .min()
                .unwrap_or(0),
        );
    });
    mins.sort_unstable_by(|a, b| b.cmp(a));
    let s = mins.len() as u32;
    let count = |th: u32| mins.partition_point(|&m| m >= th) as u32;
    let l = (1..=s).rev().find(|&k| count(k) >= k).unwrap_or(0);
    let start = (labeling.k_max() + delta).min(s);
    let tight = (1..=start)
        .rev()
        .find(|&k| count(k.saturating_sub(delta)) >= k)
        .unwrap_or(0);
    let loose = if s == 0 { 0 } else { l + delta };
    Ok(Bounds {
        delta,
        tight,
        loose,
    })
}

/// Upper bound on ψ′ of a just-inserted edge: the largest k with at least k
/// butterflies whose other edges reach level k, shifted up by Δ. The new edge
/// is in `g` but not yet labeled.
pub fn wing_upper_bound(g: &BipartiteGraph, labeling: &WingLabeling, e: EdgeId) -> Result<u32> {
    Ok(bounds(g, labeling, e)?.loose)
}

/// max{k : |butterflies at level k − Δ| ≥ k}. Never above `wing_upper_bound`.
pub fn tight_wing_upper_bound(
    g: &BipartiteGraph,
    labeling: &WingLabeling,
    e: EdgeId,
) -> Result<u32> {
    Ok(bounds(g, labeling, e)?.tight)
}

fn node_of(idx: &EquiWingIndex, g: &BipartiteGraph, y: EdgeId) -> Option<SnId> {
    g.key(y).and_then(|k| idx.sg.node_of_edge(k))
}

/// Compute E′ and χ′ for a mutation. For an insertion the edge must already
/// be in `g` and unlabeled; for a deletion it must still be in `g`.
pub fn affected_edges(
    g: &BipartiteGraph,
    labeling: &WingLabeling,
    idx: &EquiWingIndex,
    kind: MutationKind,
    e: EdgeId,
) -> Result<UpdateScope> {
    let key = g
        .key(e)
        .ok_or_else(|| Error::invalid(format!("edge id {} is not in the graph", e.0)))?;
    let (delta, upper_bound, changed) = match kind {
        MutationKind::Insert => {
            if labeling.get(e).is_some() {
                return Err(Error::invalid(
                    "inserted edge already carries a wing number",
                ));
            }
            let b = bounds(g, labeling, e)?;
            (
                b.delta,
                b.loose,
                insertion_candidates(g, labeling, e, b.loose, b.delta),
            )
        }
        MutationKind::Delete => {
            let a = labeling
                .wing_number(e)
                .map_err(|_| Error::invalid(format!("edge id {} has no wing number", e.0)))?;
            (
                0,
                a,
                deletion_cascade(g, labeling, e, a).into_keys().collect(),
            )
        }
    };

    let mut affected_nodes = BTreeSet::new();
    if kind == MutationKind::Delete {
        affected_nodes.extend(node_of(idx, g, e));
    }
    for &y in &changed {
        affected_nodes.extend(node_of(idx, g, y));
    }
    let mut affected = BTreeSet::new();
    affected.insert(e);
    affected.extend(changed.iter().copied());
    for id in &affected_nodes {
        let node = idx
            .sg
            .node(*id)
            .ok_or_else(|| Error::consistency(format!("missing super node {id}")))?;
        for m in &node.members {
            let y = g.edge_id(*m).ok_or_else(|| {
                Error::invalid(format!("index edge ({}, {}) is not in the graph", m.u, m.v))
            })?;
            affected.insert(y);
        }
    }
    let mut induced_u = BTreeSet::new();
    let mut induced_v = BTreeSet::new();
    for &y in &affected {
        let k = g.key(y).expect("affected edges are live");
        induced_u.insert(k.u);
        induced_v.insert(k.v);
    }
    Ok(UpdateScope {
        kind,
        edge: key,
        edge_id: e,
        delta,
        upper_bound,
        affected_edges: affected,
        affected_nodes,
        induced_u,
        induced_v,
    })
}

/// Edges that may rise after inserting `e`. For each level t up to the bound,
/// grow from `e` through butterflies whose other edges sit at level ≥ t − Δ,
/// keeping edges below t that still see at least t such butterflies.
fn insertion_candidates(
    g: &BipartiteGraph,
    labeling: &WingLabeling,
    e: EdgeId,
    ub: u32,
    delta: u32,
) -> BTreeSet<EdgeId> {
    let mut found = BTreeSet::new();
    let mut seen = Marks::new(g.edge_capacity());
    for t in 1..=ub {
        let lo = t.saturating_sub(delta);
        let ok = |y: EdgeId| y == e || labeling.psi_or_zero(y) >= lo;
        let level_count = |y: EdgeId| {
            let mut n = 0u32;
            g.for_each_butterfly(y, |b| {
                if b.others().iter().all(|&z| ok(z)) {
                    n += 1;
                }
            });
            n
        };
        seen.take();
        seen.mark(e);
        let mut queue = VecDeque::from([e]);
        while let Some(x) = queue.pop_front() {
            let mut next = Vec::new();
            g.for_each_butterfly(x, |b| {
                let others = b.others();
                if others.iter().all(|&z| ok(z)) {
                    next.extend(others);
                }
            });
            for y in next {
                if seen.contains(y) {
                    continue;
                }
                let p = labeling.psi_or_zero(y);
                seen.mark(y);
                if p >= lo && p < t && level_count(y) >= t {
                    found.insert(y);
                    queue.push_back(y);
                }
            }
        }
    }
    found
}

/// Exact effect of deleting `e` (ψ = a): for each level t ≤ a, peel the
/// level-t bitruss with `e` removed. Returns each dropped edge with its new ψ.
fn deletion_cascade(
    g: &BipartiteGraph,
    labeling: &WingLabeling,
    e: EdgeId,
    a: u32,
) -> BTreeMap<EdgeId, u32> {
    const UNSEEN: u8 = 0;
    const BOUND: u8 = 1;
    const EXACT: u8 = 2;
    let cap = g.edge_capacity();
    let mut new_psi: BTreeMap<EdgeId, u32> = BTreeMap::new();
    let mut processed = vec![false; cap];
    let mut removed = vec![false; cap];
    let mut state = vec![UNSEEN; cap];
    let mut sup = vec![0u64; cap];
    let mut lost = vec![0u64; cap];
    let mut dirty: Vec<EdgeId> = Vec::new();
    let mut hit: Vec<EdgeId> = Vec::new();
    for t in 1..=a {
        for y in dirty.drain(..) {
            processed[y.index()] = false;
            removed[y.index()] = false;
            state[y.index()] = UNSEEN;
        }
        removed[e.index()] = true;
        dirty.push(e);
        let mut queue = VecDeque::from([e]);
        while let Some(x) = queue.pop_front() {
            let present = |y: EdgeId, processed: &[bool]| {
                !processed[y.index()] && labeling.psi_or_zero(y) >= t
            };
            g.for_each_butterfly(x, |b| {
                let others = b.others();
                if others.iter().all(|&y| present(y, &processed)) {
                    for y in others {
                        if lost[y.index()] == 0 {
                            hit.push(y);
                        }
                        lost[y.index()] += 1;
                    }
                }
            });
            processed[x.index()] = true;
            for y in hit.drain(..) {
                let i = y.index();
                let l = std::mem::take(&mut lost[i]);
                if removed[i] {
                    continue;
                }
                // ψ(y) bounds y's level-t support from below, so the exact
                // count is only needed once the losses could take it under t.
                if state[i] == UNSEEN {
                    state[i] = BOUND;
                    sup[i] = labeling.psi_or_zero(y) as u64;
                    dirty.push(y);
                }
                if state[i] == BOUND && sup[i] < t as u64 + l {
                    let mut n = 0u64;
                    g.for_each_butterfly(y, |b| {
                        if b.others().iter().all(|&z| present(z, &processed)) {
                            n += 1;
                        }
                    });
                    sup[i] = n;
                    state[i] = EXACT;
                } else {
                    sup[i] = sup[i].saturating_sub(l);
                }
                if state[i] == EXACT && sup[i] < t as u64 {
                    removed[i] = true;
                    queue.push_back(y);
                    new_psi.entry(y).or_insert(t - 1);
                }
            }
        }
    }
    new_psi
}

/// Level-wise peel of `region` against the full graph, with edges outside the
/// region pinned at their current ψ. Exact when the region contains every
/// edge whose ψ changes.
///
/// Supports are counted once. A pinned edge at level p dies on the way from p
/// to p + 1, and each butterfly is decremented once, when its first edge dies.
fn constrained_peel(
    g: &BipartiteGraph,
    labeling: &WingLabeling,
    region: &BTreeSet<EdgeId>,
    gone: Option<EdgeId>,
) -> HashMap<EdgeId, u32> {
    let cap = g.edge_capacity();
    let pinned = |y: EdgeId| labeling.psi_or_zero(y);
    let mut in_region = vec![false; cap];
    for &y in region {
        in_region[y.index()] = true;
    }
    let mut dead = vec![false; cap];
    let alive = |y: EdgeId, t: u32, dead: &[bool]| {
        !dead[y.index()] && (in_region[y.index()] || pinned(y) >= t.saturating_sub(1).max(1))
    };

    let mut sup = vec![0u64; cap];
    let mut border = Marks::new(cap);
    for &x in region {
        let mut n = 0u64;
        for_each_butterfly_without(g, x, gone, |b| {
            let others = b.others();
            if others.iter().all(|&y| alive(y, 1, &dead)) {
                n += 1;
                for y in others {
                    if !in_region[y.index()] {
                        border.mark(y);
                    }
                }
            }
        });
        sup[x.index()] = n;
    }
    let mut border_levels: BTreeMap<u32, Vec<EdgeId>> = BTreeMap::new();
    for y in border.take() {
        border_levels.entry(pinned(y)).or_default().push(y);
    }

    // Kill `x`: every butterfly it still closes loses one support on its live
    // region edges. Region edges that fall under `t` are pushed to `low`.
    let kill =
        |x: EdgeId, t: u32, dead: &mut Vec<bool>, sup: &mut Vec<u64>, low: &mut Vec<EdgeId>| {
            for_each_butterfly_without(g, x, gone, |b| {
                let others = b.others();
                if !others.iter().all(|&y| alive(y, t, dead)) {
                    return;
                }
                for y in others {
                    if in_region[y.index()] {
                        let s = &mut sup[y.index()];
                        *s -= 1;
                        if *s + 1 == t as u64 {
                            low.push(y);
                        }
                    }
                }
            });
            dead[x.index()] = true;
        };
    let mut result: HashMap<EdgeId, u32> = HashMap::with_capacity(region.len());
    let mut live: Vec<EdgeId> = region.iter().copied().collect();
    let mut t = 1u32;
    while !live.is_empty() {
        let mut low: Vec<EdgeId> = Vec::new();
        if t >= 2 {
            if let Some(ys) = border_levels.remove(&(t - 1)) {
                for y in ys {
                    kill(y, t, &mut dead, &mut sup, &mut low);
                }
            }
        }
        let mut queue: VecDeque<EdgeId> = live
            .iter()
            .copied()
            .filter(|y| sup[y.index()] < t as u64)
            .collect();
        queue.extend(low);
        while let Some(x) = queue.pop_front() {
            if dead[x.index()] {
                continue;
            }
            result.insert(x, t - 1);
            let mut fell = Vec::new();
            kill(x, t, &mut dead, &mut sup, &mut fell);
            queue.extend(fell);
        }
        live.retain(|y| !dead[y.index()]);
        t += 1;
    }
    result
}

/// Append labels that `g` has and the index does not yet know.
fn sync_labels(g: &BipartiteGraph, sg: &mut SuperGraph) -> Result<()> {
    for side in [Side::U, Side::V] {
        let have = sg.labels().len(side);
        let names = g.labels().names(side);
        if have > names.len() || names[..have] != sg.labels().names(side)[..] {
            return Err(Error::invalid(
                "index vertex table is not a prefix of the graph's; rebind the index first",
            ));
        }
        for name in &names[have..] {
            sg.labels_mut().intern(side, name);
        }
    }
    Ok(())
}

struct Plan {
    classes: Vec<(u32, Vec<EdgeId>)>,
    /// Class index per edge id, or `NO_CLASS`.
    class_of: Vec<u32>,
}

const NO_CLASS: u32 = u32::MAX;

/// Grow classes over `r` with new wing numbers. Fails with a surviving node
/// when a class reaches an equal-level edge outside `r`.
fn plan_classes(
    g: &BipartiteGraph,
    idx: &EquiWingIndex,
    r: &BTreeSet<EdgeId>,
    new: &[u32],
    gone: Option<EdgeId>,
) -> std::result::Result<Plan, SnId> {
    let cap = g.edge_capacity();
    let mut in_r = vec![false; cap];
    for &y in r {
        in_r[y.index()] = true;
    }
    let mut order: Vec<(u32, EdgeId)> = r
        .iter()
        .map(|&y| (new[y.index()], y))
        .filter(|&(k, _)| k >= 1)
        .collect();
    order.sort_unstable();
    let mut class_of = vec![NO_CLASS; cap];
    let mut classes = Vec::new();
    let mut queue = VecDeque::new();
    for (k, y) in order {
        if class_of[y.index()] != NO_CLASS {
            continue;
        }
        let ci = classes.len() as u32;
        class_of[y.index()] = ci;
        queue.push_back(y);
        let mut members = Vec::new();
        let mut conflict = None;
        while let Some(x) = queue.pop_front() {
            members.push(x);
            for_each_butterfly_without(g, x, gone, |b| {
                let others = b.others();
                if others.iter().any(|&z| new[z.index()] < k) {
                    return;
                }
                for z in others {
                    if new[z.index()] != k {
                        continue;
                    }
                    if in_r[z.index()] {
                        if class_of[z.index()] == NO_CLASS {
                            class_of[z.index()] = ci;
                            queue.push_back(z);
                        }
                    } else if conflict.is_none() {
                        conflict = node_of(idx, g, z);
                    }
                }
            });
        }
        if let Some(mu) = conflict {
            return Err(mu);
        }
        classes.push((k, members));
    }
    Ok(Plan { classes, class_of })
}

/// Apply a mutation whose scope was computed by [`affected_edges`]. For an
/// insertion the edge is already in `g`; for a deletion it is removed here.
pub fn apply_update(
    g: &mut BipartiteGraph,
    labeling: &mut WingLabeling,
    idx: &mut EquiWingIndex,
    scope: &UpdateScope,
) -> Result<UpdateReport> {
    let e = scope.edge_id;
    let insert = scope.kind == MutationKind::Insert;
    if g.key(e) != Some(scope.edge) {
        return Err(Error::invalid("scope does not match the graph state"));
    }
    if insert == labeling.get(e).is_some() {
        return Err(Error::invalid("scope does not match the labeling state"));
    }
    sync_labels(g, &mut idx.sg)?;
    let gone = (!insert).then_some(e);

    let region: BTreeSet<EdgeId> = scope
        .affected_edges
        .iter()
        .copied()
        .filter(|&y| Some(y) != gone)
        .collect();
    let new_map = constrained_peel(g, labeling, &region, gone);
    let lab: &WingLabeling = labeling;
    let old = |y: EdgeId| lab.get(y);
    let new_opt = |y: EdgeId| {
        if Some(y) == gone {
            None
        } else {
            new_map.get(&y).copied().or_else(|| lab.get(y))
        }
    };
    let mut new_vec: Vec<u32> = (0..g.edge_capacity())
        .map(|i| lab.psi_or_zero(EdgeId(i as u32)))
        .collect();
    for (&y, &k) in &new_map {
        new_vec[y.index()] = k;
    }
    if let Some(z) = gone {
        new_vec[z.index()] = 0;
    }
    let new = |y: EdgeId| new_vec[y.index()];

    let mut wing_changes = Vec::new();
    let mut changed: BTreeSet<EdgeId> = BTreeSet::new();
    for &y in scope.affected_edges.iter() {
        if old(y) != new_opt(y) {
            wing_changes.push((g.key(y).expect("live"), old(y), new_opt(y)));
            changed.insert(y);
        }
    }
    let mut touched: BTreeSet<EdgeId> = changed.clone();
    touched.insert(e);

    let mut rebuild: BTreeSet<SnId> = scope
        .affected_nodes
        .iter()
        .copied()
        .filter(|id| idx.sg.node(*id).is_some())
        .collect();
    for &y in &changed {
        rebuild.extend(node_of(idx, g, y));
    }
    // Butterflies that appear, vanish or change their lowest level can merge
    // or split the classes of their lowest-level edges.
    let min_level_edges = |x: EdgeId, out: &mut Marks| {
        g.for_each_butterfly(x, |b| {
            let edges = [x, b.ux, b.wv, b.wx];
            let has_e = edges.contains(&e);
            if !(insert && has_e) {
                let m = edges
                    .iter()
                    .map(|&y| old(y).unwrap_or(0))
                    .min()
                    .unwrap_or(0);
                if m >= 1 {
                    for &y in &edges {
                        if old(y) == Some(m) {
                            out.mark(y);
                        }
                    }
                }
            }
            if !(!insert && has_e) {
                let m = edges.iter().map(|&y| new(y)).min().unwrap_or(0);
                if m >= 1 {
                    for &y in &edges {
                        if new(y) == m {
                            out.mark(y);
                        }
                    }
                }
            }
        });
    };
    let mut marks = Marks::new(g.edge_capacity());
    for &x in &touched {
        min_level_edges(x, &mut marks);
    }
    for y in marks.take() {
        rebuild.extend(node_of(idx, g, y));
    }

    let members_of = |ids: &BTreeSet<SnId>| -> Result<BTreeSet<EdgeId>> {
        let mut out = BTreeSet::new();
        for id in ids {
            for m in &idx.sg.node(*id).expect("node exists").members {
                out.insert(g.edge_id(*m).ok_or_else(|| {
                    Error::consistency(format!("index edge ({}, {}) is not in the graph", m.u, m.v))
                })?);
            }
        }
        Ok(out)
    };

    let (r, plan) = loop {
        let mut r = members_of(&rebuild)?;
        r.extend(changed.iter().copied());
        if insert {
            r.insert(e);
        }
        if let Some(z) = gone {
            r.remove(&z);
        }
        match plan_classes(g, idx, &r, &new_vec, gone) {
            Ok(plan) => break (r, plan),
            Err(mu) => {
                if !rebuild.insert(mu) {
                    return Err(Error::consistency(format!(
                        "class growth reached node {mu} twice"
                    )));
                }
            }
        }
    };

    // Surviving nodes whose outgoing super edges may have changed.
    let mut owners: BTreeSet<SnId> = BTreeSet::new();
    let mut probe: BTreeSet<EdgeId> = r.clone();
    probe.insert(e);
    for &x in &probe {
        min_level_edges(x, &mut marks);
    }
    for y in marks.take() {
        owners.extend(node_of(idx, g, y));
    }
    let owners: Vec<SnId> = owners.difference(&rebuild).copied().collect();

    let first_id = idx.next_id;
    let class_id = |ci: usize| first_id + ci as SnId;
    let class_of = |z: EdgeId| -> Option<SnId> {
        match plan.class_of[z.index()] {
            NO_CLASS => node_of(idx, g, z).filter(|id| !rebuild.contains(id)),
            ci => Some(class_id(ci as usize)),
        }
    };
    let mut links: BTreeSet<(SnId, SnId)> = BTreeSet::new();
    let mut broken: Option<String> = None;
    let (mut higher, mut level) = (Marks::new(g.edge_capacity()), Marks::new(g.edge_capacity()));
    let mut link_from = |owner: SnId, k: u32, members: &[EdgeId]| {
        for &x in members {
            for_each_butterfly_without(g, x, gone, |b| {
                let others = b.others();
                if others.iter().any(|&z| new(z) < k) {
                    return;
                }
                for z in others {
                    if new(z) > k {
                        higher.mark(z);
                    } else {
                        level.mark(z);
                    }
                }
            });
        }
        for z in higher.take() {
            match class_of(z) {
                Some(c) => {
                    links.insert((owner, c));
                }
                None => broken = Some(format!("edge {} has no class", z.0)),
            }
        }
        for z in level.take() {
            if class_of(z) != Some(owner) {
                broken = Some(format!("edge {} split from its class", z.0));
            }
        }
    };
    for (ci, (k, members)) in plan.classes.iter().enumerate() {
        link_from(class_id(ci), *k, members);
    }
    let mut owner_levels = Vec::new();
    for &mu in &owners {
        let node = idx.sg.node(mu).expect("surviving node");
        let members: Vec<EdgeId> = node.members.iter().filter_map(|m| g.edge_id(*m)).collect();
        owner_levels.push((mu, node.k));
        link_from(mu, node.k, &members);
    }

    let mut max_touched_level = 0;
    for id in &rebuild {
        max_touched_level = max_touched_level.max(idx.sg.node(*id).expect("node").k);
    }
    for (k, _) in &plan.classes {
        max_touched_level = max_touched_level.max(*k);
    }
    for (_, k) in &owner_levels {
        max_touched_level = max_touched_level.max(*k);
    }

    for &y in &r {
        if new(y) >= 1 && class_of(y).is_none() {
            broken.get_or_insert_with(|| format!("edge {} left unindexed", y.0));
        }
    }
    let new_nodes: Vec<(SnId, u32, Vec<EdgeKey>)> = plan
        .classes
        .iter()
        .enumerate()
        .map(|(ci, (k, members))| {
            (
                class_id(ci),
                *k,
                members.iter().map(|&y| g.key(y).expect("live")).collect(),
            )
        })
        .collect();
    let new_psi: Vec<(EdgeId, u32)> = new_map.iter().map(|(&y, &k)| (y, k)).collect();

    // Commit: labeling and graph first, then the index.
    for (y, k) in new_psi {
        labeling.set(y, k);
    }
    if let Some(z) = gone {
        labeling.remove(z);
        g.delete_edge(z)?;
    }

    let mut report = UpdateReport {
        wing_changes,
        affected_nodes: rebuild.clone(),
        added_nodes: BTreeSet::new(),
        max_touched_level,
        fallback: false,
    };
    let committed = (|| -> Result<()> {
        if let Some(msg) = broken {
            return Err(Error::consistency(msg));
        }
        for id in &rebuild {
            idx.sg.remove_node(*id);
        }
        for &(mu, k) in &owner_levels {
            let up: Vec<SnId> = idx
                .sg
                .neighbors(mu)
                .take_while(|&(kk, _)| kk > k)
                .map(|(_, n)| n)
                .collect();
            for n in up {
                idx.sg.remove_super_edge(mu, n);
            }
        }
        for (id, k, keys) in new_nodes {
            idx.sg.add_node(id, k, keys)?;
            report.added_nodes.insert(id);
        }
        idx.next_id = first_id + plan.classes.len() as SnId;
        for &(a, b) in &links {
            idx.sg.add_super_edge(a, b)?;
        }
        if cfg!(debug_assertions) {
            idx.sg.check_partition(g, labeling)?;
        }
        Ok(())
    })();
    if committed.is_err() {
        *labeling = wing_decomposition(g);
        let labels = idx.sg.labels().clone();
        *idx = build_equiwing(g, labeling)?;
        if idx.sg.labels() != &labels {
            return Err(Error::consistency("vertex tables diverged during rebuild"));
        }
        report.fallback = true;
        report.max_touched_level = u32::MAX;
    }
    Ok(report)
}

/// Apply a mutation to a shadow EquiWing and recompress only the levels it
/// touched into `comp`.
pub fn apply_update_comp(
    g: &mut BipartiteGraph,
    labeling: &mut WingLabeling,
    shadow: &mut EquiWingIndex,
    comp: &mut EquiWingCompIndex,
    scope: &UpdateScope,
) -> Result<UpdateReport> {
    let report = apply_update(g, labeling, shadow, scope)?;
    sync_labels(g, &mut comp.sg)?;
    if report.fallback {
        *comp = compress(shadow)?;
    } else if report.max_touched_level > 0 {
        recompress_levels(shadow, comp, report.max_touched_level)?;
    }
    Ok(report)
}

/// Rebuild the merged nodes of levels ≤ `top`. Higher levels are kept as is.
fn recompress_levels(shadow: &EquiWingIndex, comp: &mut EquiWingCompIndex, top: u32) -> Result<()> {
    let src = shadow.super_graph();
    let low: Vec<SnId> = comp
        .sg
        .levels()
        .take_while(|&(k, _)| k <= top)
        .flat_map(|(_, ids)| ids.iter().copied())
        .collect();
    for id in low {
        comp.sg.remove_node(id);
    }
    comp.merge_log
        .retain(|orig, _| src.node(*orig).is_some_and(|n| n.k > top));
    for (k, groups) in merge_groups(src).range(..=top) {
        materialize_groups(src, groups, *k, &mut comp.sg, &mut comp.merge_log)?;
    }
    for (a, b) in src.super_edges() {
        let (ma, mb) = (comp.merge_log[&a], comp.merge_log[&b]);
        let low_end = comp
            .sg
            .node(ma)
            .map_or(0, |n| n.k)
            .min(comp.sg.node(mb).map_or(0, |n| n.k));
        if ma != mb && low_end <= top {
            comp.sg.add_super_edge(ma, mb)?;
        }
    }
    Ok(())
}

/// A stored compressed index whose merge log does not refer to `shadow`'s
/// node ids is replaced by a fresh compression, provided both describe the
/// same structure.
fn align_comp(shadow: &EquiWingIndex, comp: EquiWingCompIndex) -> Result<EquiWingCompIndex> {
    let src = shadow.super_graph();
    let aligned = comp.merge_log.len() == src.node_count()
        && src.nodes().all(|n| {
            comp.merge_log
                .get(&n.id)
                .and_then(|m| comp.sg.node(*m))
                .is_some_and(|m| {
                    m.k == n.k && n.members.iter().all(|e| m.members.binary_search(e).is_ok())
                })
        });
    if aligned {
        return Ok(comp);
    }
    let fresh = compress(shadow)?;
    if fresh.sg.canonical() != comp.sg.canonical() {
        return Err(Error::invalid("compressed index does not match the graph"));
    }
    Ok(fresh)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MutationOutcome {
    pub mutation: EdgeMutation,
    /// Insert of an existing edge; nothing changed.
    pub noop: bool,
    pub scope: Option<UpdateScope>,
    pub report: Option<UpdateReport>,
}

/// Graph, wing numbers and indices kept in step under edge mutations.
#[derive(Clone, Debug)]
pub struct WingMaintainer {
    graph: BipartiteGraph,
    labeling: WingLabeling,
    index: EquiWingIndex,
    comp: Option<EquiWingCompIndex>,
}

impl WingMaintainer {
    pub fn new(graph: BipartiteGraph) -> Result<Self> {
        let labeling = wing_decomposition(&graph);
        let index = build_equiwing(&graph, &labeling)?;
        Ok(WingMaintainer {
            graph,
            labeling,
            index,
            comp: None,
        })
    }

    /// Also maintain a compressed index.
    pub fn with_comp(mut self) -> Result<Self> {
        self.comp = Some(compress(&self.index)?);
        Ok(self)
    }

    /// Reuse a stored index. It is rebound to the graph's vertex tables and
    /// must describe exactly the graph's wing structure.
    pub fn from_parts(
        graph: BipartiteGraph,
        index: EquiWingIndex,
        comp: Option<EquiWingCompIndex>,
    ) -> Result<Self> {
        let labeling = wing_decomposition(&graph);
        let index = index.rebind(&graph)?;
        index
            .sg
            .check_partition(&graph, &labeling)
            .map_err(|e| Error::invalid(format!("index does not match the graph: {e}")))?;
        let comp = match comp {
            Some(c) => Some(align_comp(&index, c.rebind(&graph)?)?),
            None => None,
        };
        Ok(WingMaintainer {
            graph,
            labeling,
            index,
            comp,
        })
    }

    pub fn graph(&self) -> &BipartiteGraph {
        &self.graph
    }

    pub fn labeling(&self) -> &WingLabeling {
        &self.labeling
    }

    pub fn index(&self) -> &EquiWingIndex {
        &self.index
    }

    pub fn comp(&self) -> Option<&EquiWingCompIndex> {
        self.comp.as_ref()
    }

    pub fn apply(&mut self, m: &EdgeMutation) -> Result<MutationOutcome> {
        match m.kind {
            MutationKind::Insert => self.insert(&m.u, &m.v),
            MutationKind::Delete => self.delete(&m.u, &m.v),
        }
    }

    pub fn insert(&mut self, u: &str, v: &str) -> Result<MutationOutcome> {
        let mutation = EdgeMutation::insert(u, v);
        if self.graph.edge_by_label(u, v).is_some() {
            return Ok(MutationOutcome {
                mutation,
                noop: true,
                scope: None,
                report: None,
            });
        }
        let key = EdgeKey::new(
            self.graph.add_vertex(Side::U, u),
            self.graph.add_vertex(Side::V, v),
        );
        let delta = compute_delta(&self.graph, key)?;
        let (e, _) = self.graph.insert_edge(key)?;
        let scope = affected_edges(
            &self.graph,
            &self.labeling,
            &self.index,
            MutationKind::Insert,
            e,
        )?;
        if scope.delta != delta {
            return Err(Error::consistency("Δ changed across insertion"));
        }
        self.finish(mutation, scope)
    }

    pub fn delete(&mut self, u: &str, v: &str) -> Result<MutationOutcome> {
        let mutation = EdgeMutation::delete(u, v);
        let e = self
            .graph
            .edge_by_label(u, v)
            .ok_or_else(|| Error::not_found(format!("edge ({u}, {v})")))?;
        let scope = affected_edges(
            &self.graph,
            &self.labeling,
            &self.index,
            MutationKind::Delete,
            e,
        )?;
        self.finish(mutation, scope)
    }

    fn finish(&mut self, mutation: EdgeMutation, scope: UpdateScope) -> Result<MutationOutcome> {
        let report = match &mut self.comp {
            Some(c) => apply_update_comp(
                &mut self.graph,
                &mut self.labeling,
                &mut self.index,
                c,
                &scope,
            )?,
            None => apply_update(&mut self.graph, &mut self.labeling, &mut self.index, &scope)?,
        };
        Ok(MutationOutcome {
            mutation,
            noop: false,
            scope: Some(scope),
            report: Some(report),
        })
    }

    pub fn into_parts(
        self,
    ) -> (
        BipartiteGraph,
        WingLabeling,
        EquiWingIndex,
        Option<EquiWingCompIndex>,
    ) {
        (self.graph, self.labeling, self.index, self.comp)
    }

    /// Resolve a vertex label, optionally restricted to one side.
    pub fn vertex(&self, label: &str, side: Option<Side>) -> Result<VertexId> {
        self.graph.labels().resolve(label, side)
    }
}
