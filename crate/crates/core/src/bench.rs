//! Query latency by degree bucket: vertices sorted by non-increasing degree,
//! cut into equal buckets, a seeded sample of query vertices per bucket.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baseline::baseline_search;
use crate::comp::EquiWingCompIndex;
use crate::decomposition::WingLabeling;
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, VertexId};
use crate::index::EquiWingIndex;
use crate::supergraph::SeedSource;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub k: u32,
    pub buckets: usize,
    pub queries_per_bucket: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            k: 4,
            buckets: 10,
            queries_per_bucket: 100,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BucketResult {
    pub bucket: usize,
    pub degree_max: usize,
    pub degree_min: usize,
    pub queries: usize,
    /// Mean wing edges returned per query.
    pub mean_result_edges: f64,
    pub baseline_us: f64,
    pub equiwing_us: f64,
    pub comp_us: f64,
    /// All engines returned identical answers for every sampled query.
    pub agree: bool,
}

pub fn run_bench(
    g: &BipartiteGraph,
    labeling: &WingLabeling,
    ew: &EquiWingIndex,
    ewc: &EquiWingCompIndex,
    cfg: &BenchConfig,
) -> Result<Vec<BucketResult>> {
    if cfg.k < 1 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if cfg.buckets == 0 {
        return Err(Error::invalid("need at least one bucket"));
    }
    let mut vertices: Vec<VertexId> = (0..g.u_count() as u32)
        .map(VertexId::u)
        .chain((0..g.v_count() as u32).map(VertexId::v))
        .collect();
    vertices.sort_by_key(|&x| (std::cmp::Reverse(g.degree(x)), x));
    let n = vertices.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    for b in 0..cfg.buckets {
        let (lo, hi) = (b * n / cfg.buckets, (b + 1) * n / cfg.buckets);
        if lo >= hi {
            continue;
        }
        let bucket = &vertices[lo..hi];
        let sample: Vec<VertexId> = bucket
            .choose_multiple(&mut rng, cfg.queries_per_bucket.min(bucket.len()))
            .copied()
            .collect();
        let (mut tb, mut te, mut tc) = (0f64, 0f64, 0f64);
        let mut edges = 0usize;
        let mut agree = true;
        for &q in &sample {
            let t = Instant::now();
            let base = baseline_search(g, labeling, q, cfg.k)?;
            tb += t.elapsed().as_secs_f64();
            let t = Instant::now();
            let r1 = ew.query(q, cfg.k)?;
            te += t.elapsed().as_secs_f64();
            let t = Instant::now();
            let r2 = ewc.query(q, cfg.k, SeedSource::Hash)?;
            tc += t.elapsed().as_secs_f64();
            agree &= base == r1 && base == r2;
            edges += base.edge_total();
        }
        let m = sample.len().max(1) as f64;
        out.push(BucketResult {
            bucket: b + 1,
            degree_max: g.degree(bucket[0]),
            degree_min: g.degree(bucket[bucket.len() - 1]),
            queries: sample.len(),
            mean_result_edges: edges as f64 / m,
            baseline_us: tb * 1e6 / m,
            equiwing_us: te * 1e6 / m,
            comp_us: tc * 1e6 / m,
            agree,
        });
    }
    Ok(out)
}

/// Tab-separated table with a header row.
pub fn format_table(rows: &[BucketResult]) -> String {
    let mut s = String::from(
        "bucket\tdegree_max\tdegree_min\tqueries\tmean_result_edges\tbaseline_us\tequiwing_us\tcomp_us\tagree\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{:.1}\t{:.2}\t{:.2}\t{:.2}\t{}",
            r.bucket,
            r.degree_max,
            r.degree_min,
            r.queries,
            r.mean_result_edges,
            r.baseline_us,
            r.equiwing_us,
            r.comp_us,
            r.agree
        );
    }
    s
}
