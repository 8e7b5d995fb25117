//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p equiwing --test acceptance -- --nocapture` to see
//! the report.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use equiwing::bench::{run_bench, BenchConfig};
use equiwing::dynamic::*;
use equiwing::format::{
    deserialize_comp, deserialize_equiwing, serialize_comp, serialize_equiwing,
};
use equiwing::synth::{generate_graph, SynthConfig};
use equiwing::*;
use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;
type Check = fn() -> Outcome;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)*) => {
        if !$cond {
            return Err(format!($($msg)*));
        }
    };
}

fn within(start: Instant, budget: Duration) -> Outcome {
    let took = start.elapsed();
    ensure!(took <= budget, "took {took:.1?}, budget {budget:?}");
    Ok(format!("{took:.2?}"))
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let g = running_example();
    let lab = wing_decomposition(&g);
    let mut expected = BTreeMap::new();
    for (k, members) in example_classes(&g) {
        for e in members {
            expected.insert(e, k);
        }
    }
    ensure!(
        expected.len() == 25,
        "fixture covers {} edges",
        expected.len()
    );
    for (e, key) in g.edges() {
        let got = lab.wing_number(e).map_err(|x| x.to_string())?;
        ensure!(
            got == expected[&key],
            "ψ{key:?} = {got}, want {}",
            expected[&key]
        );
    }
    ensure!(
        oracle_psi(&edge_set(&g)) == expected,
        "fixture disagrees with the oracle"
    );
    within(t, Duration::from_secs(1))
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let g = running_example();
    let idx = build_equiwing(&g, &wing_decomposition(&g)).map_err(|e| e.to_string())?;
    let sg = idx.super_graph();
    let classes = example_classes(&g);
    ensure!(sg.node_count() == 6, "{} nodes", sg.node_count());
    let mut sizes: Vec<usize> = sg.nodes().map(|n| n.members.len()).collect();
    sizes.sort();
    ensure!(sizes == vec![1, 2, 2, 3, 8, 9], "sizes {sizes:?}");
    let mut ks: Vec<u32> = sg.nodes().map(|n| n.k).collect();
    ks.sort();
    ensure!(ks == vec![1, 2, 2, 3, 3, 4], "levels {ks:?}");
    // Classes named ν1..ν6 by their fixture position.
    let name = |id: SnId| {
        let n = sg.node(id).unwrap();
        classes
            .iter()
            .position(|(_, m)| *m == n.members)
            .map(|i| i + 1)
    };
    let mut edges = BTreeSet::new();
    for (a, b) in sg.super_edges() {
        let (x, y) = (
            name(a).ok_or("unknown node")?,
            name(b).ok_or("unknown node")?,
        );
        edges.insert((x.min(y), x.max(y)));
    }
    let want = BTreeSet::from([(1, 2), (2, 4), (3, 4), (3, 5), (3, 6), (5, 6)]);
    ensure!(edges == want, "super edges {edges:?}");
    within(t, Duration::from_secs(1))
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let g = running_example();
    let ew = build_equiwing(&g, &wing_decomposition(&g)).map_err(|e| e.to_string())?;
    let ewc = compress(&ew).map_err(|e| e.to_string())?;
    let sg = ewc.super_graph();
    ensure!(sg.node_count() == 5, "{} nodes", sg.node_count());
    ensure!(
        sg.super_edge_count() == 5,
        "{} super edges",
        sg.super_edge_count()
    );
    let two: Vec<_> = sg.nodes().filter(|n| n.k == 2).collect();
    let want = keys(&g, &[("v2", "u2"), ("v3", "u2"), ("v6", "u4")]);
    ensure!(
        two.len() == 1 && two[0].members == want,
        "ψ=2 nodes {two:?}"
    );
    let ratio = compression_ratio(&ew, &ewc).map_err(|e| e.to_string())?;
    let close = (ratio - 1.2).abs() < 1e-12;
    ensure!(close, "ratio {ratio}");
    within(t, Duration::from_secs(1))
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let g = running_example();
    let lab = wing_decomposition(&g);
    let ew = build_equiwing(&g, &lab).map_err(|e| e.to_string())?;
    let ewc = compress(&ew).map_err(|e| e.to_string())?;
    let q = uvert(&g, "v5");
    let mut first = Vec::new();
    for a in ["v2", "v3", "v4", "v5"] {
        for b in ["u3", "u4"] {
            first.push((a, b));
        }
    }
    let mut second = vec![("v5", "u5"), ("v5", "u6")];
    for a in ["v6", "v7", "v8"] {
        for b in ["u5", "u6", "u7"] {
            second.push((a, b));
        }
    }
    let want = vec![keys(&g, &first), keys(&g, &second)];
    let base = baseline_search(&g, &lab, q, 3).map_err(|e| e.to_string())?;
    let r1 = ew.query(q, 3).map_err(|e| e.to_string())?;
    let r2 = ewc
        .query(q, 3, SeedSource::Hash)
        .map_err(|e| e.to_string())?;
    let r3 = ewc
        .query(q, 3, SeedSource::LevelScan)
        .map_err(|e| e.to_string())?;
    ensure!(base.wings == want, "baseline {:?}", base.wings);
    ensure!(r1 == base && r2 == base && r3 == base, "engines disagree");
    within(t, Duration::from_secs(1))
}

fn random_pairs(rng: &mut ChaCha8Rng, max_side: usize, max_edges: usize) -> Vec<(String, String)> {
    let nu = rng.gen_range(2..=max_side);
    let nv = rng.gen_range(2..=max_side);
    let m = rng.gen_range(0..=max_edges.min(nu * nv));
    (0..m)
        .map(|_| {
            (
                format!("a{}", rng.gen_range(0..nu)),
                format!("b{}", rng.gen_range(0..nv)),
            )
        })
        .collect()
}

/// Criterion 8 on one query: only ψ ≥ k nodes touched, every edge once.
fn linear_access(
    sg: &SuperGraph,
    r: &WingResult,
    stats: &QueryStats,
    k: u32,
) -> std::result::Result<(), String> {
    let mut seen = HashSet::new();
    let mut touched = BTreeSet::new();
    for w in &r.wings {
        for e in w {
            ensure!(seen.insert(*e), "edge {e:?} emitted twice");
            touched.insert(sg.node_of_edge(*e).ok_or("result edge outside the index")?);
        }
    }
    ensure!(
        stats.edges_emitted == seen.len(),
        "emitted {} for {} edges",
        stats.edges_emitted,
        seen.len()
    );
    ensure!(
        stats.nodes_touched == touched.len(),
        "touched {} nodes, result spans {}",
        stats.nodes_touched,
        touched.len()
    );
    for id in &touched {
        ensure!(
            sg.node(*id).unwrap().k >= k,
            "node {id} below k={k} touched"
        );
    }
    // Each touched node scans its ≥ k neighbours plus at most one lower one.
    let bound: usize = touched
        .iter()
        .map(|id| sg.neighbors(*id).filter(|(kk, _)| *kk >= k).count() + 1)
        .sum();
    ensure!(
        stats.super_edges_scanned <= bound,
        "scanned {} > {bound}",
        stats.super_edges_scanned
    );
    Ok(())
}

/// Criteria 5 and 8 share one sweep.
fn oracle_sweep() -> (Outcome, Outcome) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut queries, mut nonempty) = (0usize, 0usize);
    let mut linear: std::result::Result<(), String> = Ok(());
    for graph_no in 0..200 {
        let g = graph_of(&random_pairs(&mut rng, 12, 60));
        let edges = edge_set(&g);
        let lab = wing_decomposition(&g);
        let ew = build_equiwing(&g, &lab).unwrap();
        let ewc = compress(&ew).unwrap();
        for k in 1..=lab.k_max() {
            let level = oracle_level_wings(&edges, k as u64);
            for q in all_vertices(&g) {
                let want = wings_of(&level, q);
                let base = baseline_search(&g, &lab, q, k).unwrap();
                let (r1, s1) = ew.query_with_stats(q, k).unwrap();
                let (r2, s2) = ewc.query_with_stats(q, k, SeedSource::Hash).unwrap();
                let (r3, _) = ewc.query_with_stats(q, k, SeedSource::LevelScan).unwrap();
                for (engine, r) in [
                    ("baseline", &base),
                    ("equiwing", &r1),
                    ("comp", &r2),
                    ("comp/levels", &r3),
                ] {
                    if r.wings != want {
                        return (
                            Err(format!(
                                "graph {graph_no}: {engine} differs at q={q:?} k={k}"
                            )),
                            Err("sweep aborted".into()),
                        );
                    }
                }
                if linear.is_ok() {
                    linear = linear_access(ew.super_graph(), &r1, &s1, k)
                        .and_then(|_| linear_access(ewc.super_graph(), &r2, &s2, k))
                        .map_err(|e| format!("graph {graph_no}, q={q:?}, k={k}: {e}"));
                }
                queries += 1;
                nonempty += usize::from(!want.is_empty());
            }
        }
    }
    let c5 = within(t, Duration::from_secs(120))
        .map(|took| format!("200 graphs, {queries} queries ({nonempty} non-empty), {took}"));
    let c8 = linear.map(|_| format!("{queries} instrumented queries per engine"));
    (c5, c8)
}

fn assert_queries_match(
    m: &WingMaintainer,
    fresh: &EquiWingIndex,
    fresh_comp: &EquiWingCompIndex,
    kmax: u32,
) -> std::result::Result<(), String> {
    let comp = m.comp().unwrap();
    for q in all_vertices(m.graph()) {
        if m.graph().degree(q) == 0 {
            continue;
        }
        for k in 1..=kmax.max(1) {
            let want = fresh.query(q, k).unwrap();
            ensure!(
                m.index().query(q, k).unwrap() == want,
                "equiwing query q={q:?} k={k}"
            );
            ensure!(
                comp.query(q, k, SeedSource::Hash).unwrap() == want,
                "comp query q={q:?} k={k}"
            );
            ensure!(
                fresh_comp.query(q, k, SeedSource::Hash).unwrap() == want,
                "fresh comp q={q:?} k={k}"
            );
        }
    }
    Ok(())
}

fn check_mutation(
    before: &WingMaintainer,
    after: &WingMaintainer,
    scope: &UpdateScope,
    report: &UpdateReport,
) -> std::result::Result<(), String> {
    let (gb, ga) = (before.graph(), after.graph());
    let edges = edge_set(ga);

    // (a) ψ against the definitional oracle.
    let expected = oracle_psi(&edges);
    for (e, key) in ga.edges() {
        ensure!(
            after.labeling().wing_number(e).ok() == Some(expected[&key]),
            "(a) ψ of {key:?}"
        );
    }

    // (b) query equivalence with from-scratch indices.
    let lab = wing_decomposition(ga);
    let fresh = build_equiwing(ga, &lab).unwrap();
    let fresh_comp = compress(&fresh).unwrap();
    ensure!(
        after.index().super_graph().canonical() == fresh.super_graph().canonical(),
        "(b) equiwing structure"
    );
    ensure!(
        after.comp().unwrap().super_graph().canonical() == fresh_comp.super_graph().canonical(),
        "(b) comp structure"
    );
    assert_queries_match(after, &fresh, &fresh_comp, lab.k_max())
        .map_err(|e| format!("(b) {e}"))?;

    let new_psi = |k: EdgeKey| {
        ga.edge_id(k)
            .map(|e| after.labeling().wing_number(e).unwrap())
    };
    let old_psi = |k: EdgeKey| {
        gb.edge_id(k)
            .map(|e| before.labeling().wing_number(e).unwrap())
    };
    if scope.kind == MutationKind::Insert {
        // (c) upper bound soundness.
        let a = new_psi(scope.edge).unwrap();
        ensure!(
            a <= scope.upper_bound,
            "(c) ψ′ {a} > bound {}",
            scope.upper_bound
        );
        let loose = wing_upper_bound(ga, before.labeling(), scope.edge_id).unwrap();
        ensure!(a <= loose, "(c) ψ′ {a} > loose bound {loose}");
        // (d) per-edge increase at most Δ.
        for (_, key) in gb.edges() {
            let (o, n) = (old_psi(key).unwrap(), new_psi(key).unwrap());
            ensure!(
                n >= o && n - o <= scope.delta,
                "(d) {key:?}: {o} -> {n}, Δ={}",
                scope.delta
            );
        }
    } else {
        for (_, key) in ga.edges() {
            ensure!(
                new_psi(key).unwrap() <= old_psi(key).unwrap(),
                "deletion raised ψ of {key:?}"
            );
        }
    }

    // (e) changed edges inside E′, changed nodes inside χ′.
    for (e, key) in ga.edges().chain(gb.edges()) {
        if old_psi(key) != new_psi(key) {
            ensure!(
                scope.affected_edges.contains(&e),
                "(e) changed edge {key:?} outside E′"
            );
        }
    }
    let kept = after.index().super_graph().canonical().nodes;
    for n in before.index().super_graph().nodes() {
        if !kept.contains(&(n.k, n.members.clone())) {
            ensure!(
                report.affected_nodes.contains(&n.id),
                "(e) node {} changed outside χ′",
                n.id
            );
        }
    }
    Ok(())
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let (mut steps, mut fallbacks, mut changing) = (0usize, 0usize, 0usize);
    for seq in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seq);
        let start = graph_of(&random_pairs(&mut rng, 12, 40));
        let mut m = WingMaintainer::new(start).unwrap().with_comp().unwrap();
        for step in 0..200 {
            let g = m.graph();
            let delete = g.edge_count() > 0 && (g.edge_count() >= 60 || rng.gen_bool(0.5));
            let (u, v) = if delete {
                let (_, key) = g.edges().choose(&mut rng).unwrap();
                let l = g.labels();
                (
                    l.name(VertexId::u(key.u)).to_string(),
                    l.name(VertexId::v(key.v)).to_string(),
                )
            } else {
                loop {
                    let u = format!("a{}", rng.gen_range(0..12));
                    let v = format!("b{}", rng.gen_range(0..12));
                    if g.edge_by_label(&u, &v).is_none() {
                        break (u, v);
                    }
                }
            };
            let before = m.clone();
            let out = if delete {
                m.delete(&u, &v)
            } else {
                m.insert(&u, &v)
            }
            .map_err(|e| format!("sequence {seq} step {step}: {e}"))?;
            ensure!(!out.noop, "sequence {seq} step {step}: unexpected no-op");
            let report = out.report.as_ref().unwrap();
            fallbacks += usize::from(report.fallback);
            changing += usize::from(report.wing_changes.len() > 1);
            check_mutation(&before, &m, out.scope.as_ref().unwrap(), report).map_err(|e| {
                format!(
                    "sequence {seq} step {step} ({}{u}:{v}): {e}",
                    if delete { "-" } else { "+" }
                )
            })?;
            steps += 1;
        }
    }
    ensure!(fallbacks == 0, "{fallbacks} full-rebuild fallbacks");
    within(t, Duration::from_secs(300)).map(|took| {
        format!("100 sequences, {steps} mutations ({changing} moved other wing numbers), {took}")
    })
}

fn criterion_7() -> Outcome {
    let t = Instant::now();
    let mut m = WingMaintainer::new(running_example()).unwrap();
    let out = m.insert("v4", "u6").map_err(|e| e.to_string())?;
    let scope = out.scope.unwrap();
    ensure!(scope.upper_bound == 4, "bound {}", scope.upper_bound);
    // Fixture order names ν1..ν6 and matches creation order.
    let g = running_example();
    let classes = example_classes(&g);
    let before = build_equiwing(&g, &wing_decomposition(&g)).unwrap();
    let names: BTreeSet<usize> = scope
        .affected_nodes
        .iter()
        .map(|id| {
            let n = before.super_graph().node(*id).unwrap();
            classes.iter().position(|(_, mm)| *mm == n.members).unwrap() + 1
        })
        .collect();
    ensure!(names == BTreeSet::from([3, 4, 5]), "χ′ = {names:?}");
    let sg = m.index().super_graph();
    let mut ks: Vec<u32> = sg.nodes().map(|n| n.k).collect();
    ks.sort();
    ensure!(ks == vec![1, 2, 3, 4], "levels {ks:?}");
    within(t, Duration::from_secs(1))
}

fn criterion_9() -> Outcome {
    let t = Instant::now();
    let g = generate_graph(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let lab = wing_decomposition(&g);
    let ew = build_equiwing(&g, &lab).map_err(|e| e.to_string())?;
    let ewc = compress(&ew).map_err(|e| e.to_string())?;
    ensure!(
        (40_000..=60_000).contains(&g.edge_count()),
        "{} edges",
        g.edge_count()
    );
    ensure!(
        ewc.node_count() <= ew.node_count(),
        "comp {} > equiwing {}",
        ewc.node_count(),
        ew.node_count()
    );
    let rows =
        run_bench(&g, &lab, &ew, &ewc, &BenchConfig::default()).map_err(|e| e.to_string())?;
    ensure!(rows.len() == 10, "{} buckets", rows.len());
    let mut worst = f64::INFINITY;
    for r in &rows {
        ensure!(r.agree, "bucket {}: engines disagree", r.bucket);
        ensure!(
            r.equiwing_us < r.baseline_us && r.comp_us < r.baseline_us,
            "bucket {}: baseline {:.1}us, equiwing {:.1}us, comp {:.1}us",
            r.bucket,
            r.baseline_us,
            r.equiwing_us,
            r.comp_us
        );
        worst = worst.min(r.baseline_us / r.equiwing_us.max(r.comp_us));
    }
    within(t, Duration::from_secs(600)).map(|took| {
        format!(
            "{} edges, nodes {} -> {}, smallest speedup {worst:.1}x, {took}",
            g.edge_count(),
            ew.node_count(),
            ewc.node_count()
        )
    })
}

fn round_trip(g: &BipartiteGraph) -> std::result::Result<(), String> {
    let ew = build_equiwing(g, &wing_decomposition(g)).unwrap();
    let ewc = compress(&ew).unwrap();
    let text = serialize_equiwing(&ew).map_err(|e| e.to_string())?;
    let back = deserialize_equiwing(&text).map_err(|e| e.to_string())?;
    ensure!(
        back.super_graph() == ew.super_graph(),
        "equiwing differs after reload"
    );
    ensure!(
        serialize_equiwing(&back).unwrap() == text,
        "equiwing bytes differ"
    );
    let text = serialize_comp(&ewc).map_err(|e| e.to_string())?;
    let back = deserialize_comp(&text).map_err(|e| e.to_string())?;
    ensure!(
        back.super_graph() == ewc.super_graph(),
        "comp differs after reload"
    );
    ensure!(
        back.merge_log() == ewc.merge_log(),
        "merge log differs after reload"
    );
    ensure!(serialize_comp(&back).unwrap() == text, "comp bytes differ");
    Ok(())
}

fn criterion_10() -> Outcome {
    let mut fixtures = vec![running_example(), BipartiteGraph::new()];
    let mut grown = WingMaintainer::new(running_example()).unwrap();
    grown.insert("v4", "u6").unwrap();
    fixtures.push(grown.graph().clone());
    for g in &fixtures {
        round_trip(g)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut nonempty = 0;
    for i in 0..20 {
        let g = graph_of(&random_pairs(&mut rng, 12, 60));
        nonempty += usize::from(wing_decomposition(&g).k_max() > 0);
        round_trip(&g).map_err(|e| format!("random index {i}: {e}"))?;
    }
    Ok(format!(
        "{} fixtures, 20 random indices ({nonempty} non-empty)",
        fixtures.len()
    ))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    })
}

#[test]
fn acceptance() {
    let checks: [(u32, &str, Check); 4] = [
        (1, "running example wing numbers", criterion_1),
        (2, "running example EquiWing index", criterion_2),
        (3, "running example compression", criterion_3),
        (4, "running example query, all engines", criterion_4),
    ];
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    for (n, what, f) in checks {
        results.push((n, what, guarded(f)));
    }
    let (c5, c8) = match catch_unwind(oracle_sweep) {
        Ok(r) => r,
        Err(_) => (Err("panicked".into()), Err("panicked".into())),
    };
    results.push((5, "oracle equivalence sweep", c5));
    results.push((6, "dynamic soundness sweep", guarded(criterion_6)));
    results.push((7, "running example insertion", guarded(criterion_7)));
    results.push((8, "linear access counters", c8));
    results.push((
        9,
        "synthetic latency by degree decile",
        guarded(criterion_9),
    ));
    results.push((10, "index file round trip", guarded(criterion_10)));

    let mut failed = Vec::new();
    for (n, what, r) in &results {
        match r {
            Ok(detail) => println!("criterion {n:>2}: PASS  {what} ({detail})"),
            Err(why) => {
                println!("criterion {n:>2}: FAIL  {what}: {why}");
                failed.push(*n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
