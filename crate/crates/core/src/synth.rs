//! Seeded synthetic bipartite graphs with planted dense blocks.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub u: usize,
    pub v: usize,
    /// Probability of each background edge, over all U×V pairs.
    pub p: f64,
    /// Planted blocks tile both sides in order; 0 disables them.
    pub block_min: usize,
    pub block_max: usize,
    pub p_in: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            u: 2400,
            v: 2400,
            p: 0.0007,
            block_min: 8,
            block_max: 40,
            p_in: 0.8,
            seed: 1,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) || !(0.0..=1.0).contains(&self.p_in) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        if self.block_max > 0 && (self.block_min == 0 || self.block_min > self.block_max) {
            return Err(Error::invalid("block sizes need 1 <= min <= max"));
        }
        Ok(())
    }
}

/// Edges as 1-based (u, v) pairs, sorted and deduplicated.
pub fn generate_edges(cfg: &SynthConfig) -> Result<Vec<(usize, usize)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    if cfg.block_max > 0 {
        let (mut su, mut sv) = (0usize, 0usize);
        while su < cfg.u && sv < cfg.v {
            let size = rng.gen_range(cfg.block_min..=cfg.block_max);
            let (eu, ev) = ((su + size).min(cfg.u), (sv + size).min(cfg.v));
            for a in su..eu {
                for b in sv..ev {
                    if rng.gen_bool(cfg.p_in) {
                        edges.insert((a + 1, b + 1));
                    }
                }
            }
            su = eu;
            sv = ev;
        }
    }
    if cfg.u > 0 && cfg.v > 0 && cfg.p > 0.0 {
        let expected = cfg.p * cfg.u as f64 * cfg.v as f64;
        let count = expected.round() as usize;
        for _ in 0..count {
            let a = rng.gen_range(0..cfg.u);
            let b = rng.gen_range(0..cfg.v);
            edges.insert((a + 1, b + 1));
        }
    }
    Ok(edges.into_iter().collect())
}

pub fn generate_graph(cfg: &SynthConfig) -> Result<BipartiteGraph> {
    let mut g = BipartiteGraph::new();
    for (a, b) in generate_edges(cfg)? {
        g.insert_edge_by_label(&a.to_string(), &b.to_string());
    }
    Ok(g)
}

/// KONECT-style text: a `% bip unweighted` header, then one edge per line.
pub fn to_konect(edges: &[(usize, usize)]) -> String {
    let mut out = String::from("% bip unweighted\n");
    for (a, b) in edges {
        let _ = writeln!(out, "{a} {b}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let cfg = SynthConfig {
            u: 60,
            v: 50,
            p: 0.02,
            block_min: 4,
            block_max: 9,
            p_in: 0.7,
            seed: 7,
        };
        let a = generate_edges(&cfg).unwrap();
        assert_eq!(a, generate_edges(&cfg).unwrap());
        let other = generate_edges(&SynthConfig {
            seed: 8,
            ..cfg.clone()
        })
        .unwrap();
        assert_ne!(a, other);
        assert!(a
            .iter()
            .all(|&(x, y)| (1..=60).contains(&x) && (1..=50).contains(&y)));
    }

    #[test]
    fn rejects_bad_probability() {
        let cfg = SynthConfig {
            p: 1.5,
            ..SynthConfig::default()
        };
        assert!(generate_edges(&cfg).is_err());
    }
}
