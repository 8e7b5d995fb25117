//! Wing-number (bitruss) decomposition by bottom-up peeling.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, EdgeId};

/// Tie-breaking order among equal-support edges in the bucket queue.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PeelOrder {
    #[default]
    Fifo,
    Lifo,
}

/// Wing number per edge, plus level buckets Φ_k for k ≥ 1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WingLabeling {
    psi: Vec<Option<u32>>,
    buckets: BTreeMap<u32, BTreeSet<EdgeId>>,
}

impl WingLabeling {
    pub fn wing_number(&self, e: EdgeId) -> Result<u32> {
        self.get(e)
            .ok_or_else(|| Error::not_found(format!("edge id {} has no wing number", e.0)))
    }

    pub fn get(&self, e: EdgeId) -> Option<u32> {
        self.psi.get(e.index()).copied().flatten()
    }

    /// ψ(e), or 0 for an edge that has not been labeled.
    #[inline]
    pub fn psi_or_zero(&self, e: EdgeId) -> u32 {
        self.get(e).unwrap_or(0)
    }

    pub fn k_max(&self) -> u32 {
        self.buckets.keys().next_back().copied().unwrap_or(0)
    }

    /// Φ_k in `EdgeId` order; empty for k = 0 (ψ = 0 edges are not bucketed).
    pub fn level(&self, k: u32) -> impl Iterator<Item = EdgeId> + '_ {
        self.buckets
            .get(&k)
            .into_iter()
            .flat_map(|s| s.iter().copied())
    }

    pub fn level_len(&self, k: u32) -> usize {
        self.buckets.get(&k).map_or(0, |s| s.len())
    }

    /// Non-empty levels in ascending order.
    pub fn levels(&self) -> impl Iterator<Item = (u32, &BTreeSet<EdgeId>)> + '_ {
        self.buckets.iter().map(|(&k, s)| (k, s))
    }

    /// Labeled edges, ascending by id.
    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, u32)> + '_ {
        self.psi
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (EdgeId(i as u32), p)))
    }

    pub fn len(&self) -> usize {
        self.psi.iter().filter(|p| p.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn set(&mut self, e: EdgeId, k: u32) {
        self.remove(e);
        if self.psi.len() <= e.index() {
            self.psi.resize(e.index() + 1, None);
        }
        self.psi[e.index()] = Some(k);
        if k > 0 {
            self.buckets.entry(k).or_default().insert(e);
        }
    }

    pub(crate) fn remove(&mut self, e: EdgeId) {
        if let Some(Some(old)) = self.psi.get(e.index()).copied() {
            self.psi[e.index()] = None;
            if let Some(b) = self.buckets.get_mut(&old) {
                b.remove(&e);
                if b.is_empty() {
                    self.buckets.remove(&old);
                }
            }
        }
    }

    /// Check that exactly the live edges of `g` carry a label.
    pub fn check_matches(&self, g: &BipartiteGraph) -> Result<()> {
        for (e, _) in g.edges() {
            if self.get(e).is_none() {
                return Err(Error::invalid(format!(
                    "labeling has no wing number for live edge {}",
                    e.0
                )));
            }
        }
        for (e, _) in self.iter() {
            if !g.is_live(e) {
                return Err(Error::invalid(format!(
                    "labeling refers to edge {} which is not in the graph",
                    e.0
                )));
            }
        }
        Ok(())
    }
}

pub fn wing_decomposition(g: &BipartiteGraph) -> WingLabeling {
    wing_decomposition_with(g, PeelOrder::Fifo)
}

pub fn wing_decomposition_with(g: &BipartiteGraph, order: PeelOrder) -> WingLabeling {
    let cap = g.edge_capacity();
    let mut sup = vec![0u64; cap];
    let mut max_sup = 0u64;
    for (e, _) in g.edges() {
        let mut n = 0u64;
        g.for_each_butterfly(e, |_| n += 1);
        sup[e.index()] = n;
        max_sup = max_sup.max(n);
    }

    let mut buckets: Vec<VecDeque<u32>> = vec![VecDeque::new(); max_sup as usize + 1];
    for (e, _) in g.edges() {
        buckets[sup[e.index()] as usize].push_back(e.0);
    }

    let mut peeled = vec![false; cap];
    let mut psi: Vec<Option<u32>> = vec![None; cap];
    let mut remaining = g.edge_count();
    let mut level = 0u64;
    let mut b = 0usize;
    while remaining > 0 {
        while buckets[b].is_empty() {
            b += 1;
        }
        let raw = match order {
            PeelOrder::Fifo => buckets[b].pop_front(),
            PeelOrder::Lifo => buckets[b].pop_back(),
        }
        .expect("bucket is non-empty");
        let e = EdgeId(raw);
        if peeled[e.index()] || sup[e.index()] != b as u64 {
            continue;
        }
        level = level.max(b as u64);
        psi[e.index()] = Some(level as u32);
        peeled[e.index()] = true;
        remaining -= 1;
        g.for_each_butterfly(e, |bf| {
            let others = bf.others();
            if others.iter().any(|o| peeled[o.index()]) {
                return;
            }
            for o in others {
                let s = &mut sup[o.index()];
                if *s > level {
                    *s -= 1;
                    buckets[*s as usize].push_back(o.0);
                }
            }
        });
    }

    let mut lab = WingLabeling {
        psi,
        buckets: BTreeMap::new(),
    };
    for (e, k) in lab.iter().collect::<Vec<_>>() {
        if k > 0 {
            lab.buckets.entry(k).or_default().insert(e);
        }
    }
    lab
}
