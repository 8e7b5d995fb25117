use std::cmp::Ordering;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use equiwing::bench::{format_table, run_bench, BenchConfig};
use equiwing::dynamic::{EdgeMutation, MutationOutcome, WingMaintainer};
use equiwing::format::{
    deserialize_comp, deserialize_equiwing, serialize_comp, serialize_equiwing, sniff_kind,
    write_atomic, IndexKind,
};
use equiwing::graph::load_edge_list_file;
use equiwing::synth::{generate_edges, to_konect, SynthConfig};
use equiwing::{
    baseline_search, build_equiwing, compress, compression_ratio, wing_decomposition,
    BipartiteGraph, EdgeListFormat, EquiWingCompIndex, EquiWingIndex, Error, SeedSource, Side,
    SuperGraph, VertexId, VertexLabels, WingResult,
};

#[derive(Parser, Debug)]
#[command(
    name = "equiwing",
    version,
    about = "Personalized k-wing search on bipartite graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the wing number of every edge.
    Decompose(DecomposeArgs),
    /// Build an index file from an edge list.
    Build(BuildArgs),
    /// Return the k-wings containing a vertex.
    Query(QueryArgs),
    /// Apply edge mutations to a graph and its index in place.
    Update(UpdateArgs),
    /// Summarize an index file.
    Stats(StatsArgs),
    /// Time baseline and indexed queries by degree bucket.
    Bench(BenchArgs),
    /// Write a seeded synthetic graph with planted dense blocks.
    Gen(GenArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum GraphFormat {
    Konect,
    TwoColumn,
}

impl From<GraphFormat> for EdgeListFormat {
    fn from(f: GraphFormat) -> Self {
        match f {
            GraphFormat::Konect => EdgeListFormat::Konect,
            GraphFormat::TwoColumn => EdgeListFormat::TwoColumn,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OutputFormat {
    Text,
    Jsonlines,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SideArg {
    U,
    V,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::U => Side::U,
            SideArg::V => Side::V,
        }
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Engine {
    Index,
    Baseline,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Seeds {
    Hash,
    Levels,
}

#[derive(Args, Debug)]
struct GraphInput {
    /// Edge list; first column is side U, second side V.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value = "konect")]
    input_format: GraphFormat,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct BuildArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(long)]
    out: PathBuf,
    /// Write the compressed index.
    #[arg(long)]
    comp: bool,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long, required_unless_present = "graph")]
    index: Option<PathBuf>,
    /// Query vertex label.
    #[arg(short = 'q', long = "vertex")]
    q: String,
    #[arg(short = 'k', long)]
    k: u32,
    /// Side of the query vertex when the label exists on both sides.
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    #[arg(long, value_enum, default_value = "text")]
    format: OutputFormat,
    #[arg(long, value_enum, default_value = "index")]
    engine: Engine,
    /// Graph file, required by the baseline engine.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "konect")]
    input_format: GraphFormat,
    /// Seed lookup for compressed indices.
    #[arg(long, value_enum, default_value = "hash")]
    seeds: Seeds,
    /// Print query time to stderr.
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct UpdateArgs {
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    input: GraphInput,
    /// Insert edge U:V. Repeatable; mutations apply in command-line order.
    #[arg(long = "insert", value_name = "U:V")]
    insert: Vec<String>,
    /// Delete edge U:V. Repeatable.
    #[arg(long = "delete", value_name = "U:V")]
    delete: Vec<String>,
    /// Delete every edge of a vertex, given as u:LABEL or v:LABEL.
    #[arg(long = "delete-vertex", value_name = "SIDE:LABEL")]
    delete_vertex: Vec<String>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    index: PathBuf,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    input: GraphInput,
    #[arg(short = 'k', long, default_value_t = 4)]
    k: u32,
    #[arg(long, default_value_t = 10)]
    buckets: usize,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 2400)]
    u: usize,
    #[arg(long, default_value_t = 2400)]
    v: usize,
    /// Background edge probability.
    #[arg(long, default_value_t = 0.0007)]
    p: f64,
    /// Smallest planted block side; set --block-max 0 to disable blocks.
    #[arg(long, default_value_t = 8)]
    block_min: usize,
    #[arg(long, default_value_t = 40)]
    block_max: usize,
    #[arg(long, default_value_t = 0.8)]
    p_in: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Parse { .. } | Error::Format(_) => 2,
            Error::NotFound(_) | Error::InvalidArgument(_) => 3,
            Error::Consistency(_) => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult = Result<(), Failure>;

macro_rules! out {
    ($($t:tt)*) => {
        writeln!(std::io::stdout().lock(), $($t)*)?
    };
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Build(a) => cmd_build(a),
        Command::Query(a) => cmd_query(a),
        Command::Update(a) => {
            let sub = matches
                .subcommand_matches("update")
                .expect("update subcommand");
            cmd_update(a, sub)
        }
        Command::Stats(a) => cmd_stats(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_graph(input: &GraphInput) -> Result<BipartiteGraph, Failure> {
    let report = load_edge_list_file(&input.graph, input.input_format.into())?;
    if report.duplicates > 0 {
        eprintln!(
            "warning: {} duplicate edge line(s) ignored in {}",
            report.duplicates,
            input.graph.display()
        );
    }
    Ok(report.graph)
}

enum LoadedIndex {
    EquiWing(EquiWingIndex),
    Comp(EquiWingCompIndex),
}

impl LoadedIndex {
    fn super_graph(&self) -> &SuperGraph {
        match self {
            LoadedIndex::EquiWing(i) => i.super_graph(),
            LoadedIndex::Comp(i) => i.super_graph(),
        }
    }
}

fn load_index(path: &Path) -> Result<LoadedIndex, Failure> {
    let text = fs::read_to_string(path)?;
    Ok(match sniff_kind(&text)? {
        IndexKind::EquiWing => LoadedIndex::EquiWing(deserialize_equiwing(&text)?),
        IndexKind::Comp => LoadedIndex::Comp(deserialize_comp(&text)?),
    })
}

/// Numeric labels compare as numbers, anything else lexically.
fn label_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

fn pair_cmp(a: &(String, String), b: &(String, String)) -> Ordering {
    label_cmp(&a.0, &b.0).then_with(|| label_cmp(&a.1, &b.1))
}

/// Wings as label pairs, sorted for display.
fn labeled_wings(r: &WingResult, labels: &VertexLabels) -> Vec<Vec<(String, String)>> {
    let q_label = labels.name(r.query).to_string();
    let touches = |e: &(String, String)| match r.query.side {
        Side::U => e.0 == q_label,
        Side::V => e.1 == q_label,
    };
    let mut wings: Vec<Vec<(String, String)>> = r
        .wings
        .iter()
        .map(|w| {
            let mut edges: Vec<(String, String)> = w
                .iter()
                .map(|e| {
                    (
                        labels.name(VertexId::u(e.u)).to_string(),
                        labels.name(VertexId::v(e.v)).to_string(),
                    )
                })
                .collect();
            edges.sort_by(pair_cmp);
            edges
        })
        .collect();
    wings.sort_by(|a, b| {
        let fa = a.iter().find(|e| touches(e));
        let fb = b.iter().find(|e| touches(e));
        match (fa, fb) {
            (Some(x), Some(y)) => pair_cmp(x, y),
            _ => Ordering::Equal,
        }
    });
    wings
}

fn cmd_decompose(a: DecomposeArgs) -> CliResult {
    let g = load_graph(&a.input)?;
    let t = Instant::now();
    let lab = wing_decomposition(&g);
    let elapsed = t.elapsed();
    let labels = g.labels();
    let mut rows: Vec<((String, String), u32)> = g
        .edges()
        .map(|(e, k)| {
            (
                (
                    labels.name(VertexId::u(k.u)).to_string(),
                    labels.name(VertexId::v(k.v)).to_string(),
                ),
                lab.psi_or_zero(e),
            )
        })
        .collect();
    rows.sort_by(|x, y| pair_cmp(&x.0, &y.0));
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for ((u, v), k) in rows {
        match a.format {
            OutputFormat::Text => writeln!(out, "{u} {v} {k}")?,
            OutputFormat::Jsonlines => writeln!(
                out,
                "{}",
                serde_json::json!({"u": u, "v": v, "wing_number": k})
            )?,
        }
    }
    eprintln!("k_max: {}", lab.k_max());
    eprintln!("# time decompose_ms={:.3}", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

fn cmd_build(a: BuildArgs) -> CliResult {
    let g = load_graph(&a.input)?;
    let t = Instant::now();
    let lab = wing_decomposition(&g);
    let ew = build_equiwing(&g, &lab)?;
    let (text, nodes, edges, ratio) = if a.comp {
        let ewc = compress(&ew)?;
        let ratio = compression_ratio(&ew, &ewc).ok();
        (
            serialize_comp(&ewc)?,
            ewc.node_count(),
            ewc.super_edge_count(),
            ratio,
        )
    } else {
        (
            serialize_equiwing(&ew)?,
            ew.node_count(),
            ew.super_edge_count(),
            None,
        )
    };
    let elapsed = t.elapsed();
    write_atomic(&a.out, &text)?;
    out!("edges: {}", g.edge_count());
    out!("k_max: {}", lab.k_max());
    out!("super_nodes: {nodes}");
    out!("super_edges: {edges}");
    if a.comp {
        match ratio {
            Some(r) => out!("compression_ratio: {r:.4}"),
            None => out!("compression_ratio: undefined (empty index)"),
        }
    }
    out!("# time build_ms={:.3}", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

fn print_result(r: &WingResult, labels: &VertexLabels, format: OutputFormat) -> CliResult {
    let wings = labeled_wings(r, labels);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match format {
        OutputFormat::Text => {
            writeln!(
                out,
                "query {} k={} wings={}",
                labels.name(r.query),
                r.k,
                wings.len()
            )?;
            for (i, w) in wings.iter().enumerate() {
                writeln!(out)?;
                writeln!(out, "wing {} size={}", i + 1, w.len())?;
                for (u, v) in w {
                    writeln!(out, "{u} {v}")?;
                }
            }
        }
        OutputFormat::Jsonlines => {
            for (i, w) in wings.iter().enumerate() {
                let edges: Vec<[&str; 2]> =
                    w.iter().map(|(u, v)| [u.as_str(), v.as_str()]).collect();
                writeln!(
                    out,
                    "{}",
                    serde_json::json!({"wing_index": i + 1, "size": w.len(), "edges": edges})
                )?;
            }
        }
    }
    Ok(())
}

fn cmd_query(a: QueryArgs) -> CliResult {
    let side = a.side.map(Side::from);
    if a.k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()).into());
    }
    let t;
    let (result, labels) = match a.engine {
        Engine::Baseline => {
            let path = a.graph.clone().ok_or_else(|| {
                Failure::from(Error::InvalidArgument(
                    "the baseline engine needs --graph".into(),
                ))
            })?;
            let g = load_graph(&GraphInput {
                graph: path,
                input_format: a.input_format,
            })?;
            let lab = wing_decomposition(&g);
            let q = g.labels().resolve(&a.q, side)?;
            t = Instant::now();
            (baseline_search(&g, &lab, q, a.k)?, g.labels().clone())
        }
        Engine::Index => {
            let path = a.index.clone().ok_or_else(|| {
                Failure::from(Error::InvalidArgument(
                    "the index engine needs --index".into(),
                ))
            })?;
            let idx = load_index(&path)?;
            let labels = idx.super_graph().labels().clone();
            let q = labels.resolve(&a.q, side)?;
            t = Instant::now();
            let r = match &idx {
                LoadedIndex::EquiWing(i) => i.query(q, a.k)?,
                LoadedIndex::Comp(i) => i.query(
                    q,
                    a.k,
                    match a.seeds {
                        Seeds::Hash => SeedSource::Hash,
                        Seeds::Levels => SeedSource::LevelScan,
                    },
                )?,
            };
            (r, labels)
        }
    };
    let elapsed = t.elapsed();
    print_result(&result, &labels, a.format)?;
    if a.timing {
        eprintln!("# time query_us={:.3}", elapsed.as_secs_f64() * 1e6);
    }
    Ok(())
}

fn parse_edge_arg(s: &str) -> Result<(String, String), Failure> {
    match s.split_once(':') {
        Some((u, v)) if !u.is_empty() && !v.is_empty() => Ok((u.to_string(), v.to_string())),
        _ => Err(Error::InvalidArgument(format!("expected U:V, got {s:?}")).into()),
    }
}

/// Mutations in command-line order across --insert, --delete and --delete-vertex.
fn ordered_mutations(
    a: &UpdateArgs,
    m: &ArgMatches,
    g: &BipartiteGraph,
) -> Result<Vec<EdgeMutation>, Failure> {
    let mut tagged: Vec<(usize, EdgeMutation)> = Vec::new();
    let idx =
        |id: &str| -> Vec<usize> { m.indices_of(id).map(|i| i.collect()).unwrap_or_default() };
    for (pos, s) in idx("insert").into_iter().zip(&a.insert) {
        let (u, v) = parse_edge_arg(s)?;
        tagged.push((pos, EdgeMutation::insert(u, v)));
    }
    for (pos, s) in idx("delete").into_iter().zip(&a.delete) {
        let (u, v) = parse_edge_arg(s)?;
        tagged.push((pos, EdgeMutation::delete(u, v)));
    }
    for (pos, s) in idx("delete_vertex").into_iter().zip(&a.delete_vertex) {
        let (side, label) = parse_edge_arg(s)?;
        let side = Side::from_token(&side)
            .ok_or_else(|| Failure::from(Error::InvalidArgument(format!("bad side in {s:?}"))))?;
        let x = g.labels().resolve(&label, Some(side))?;
        for (other, _) in g.neighbors(x) {
            let other_label = g.labels().name(match side {
                Side::U => VertexId::v(*other),
                Side::V => VertexId::u(*other),
            });
            let (u, v) = match side {
                Side::U => (label.clone(), other_label.to_string()),
                Side::V => (other_label.to_string(), label.clone()),
            };
            tagged.push((pos, EdgeMutation::delete(u, v)));
        }
    }
    tagged.sort_by_key(|(p, _)| *p);
    Ok(tagged.into_iter().map(|(_, m)| m).collect())
}

fn write_graph(path: &Path, g: &BipartiteGraph) -> CliResult {
    let labels = g.labels();
    let mut text = String::from("% bip unweighted\n");
    for (_, k) in g.edges() {
        text.push_str(labels.name(VertexId::u(k.u)));
        text.push(' ');
        text.push_str(labels.name(VertexId::v(k.v)));
        text.push('\n');
    }
    write_atomic(path, &text)?;
    Ok(())
}

fn describe(o: &MutationOutcome) -> String {
    let verb = match o.mutation.kind {
        equiwing::dynamic::MutationKind::Insert => "insert",
        equiwing::dynamic::MutationKind::Delete => "delete",
    };
    let head = format!("{verb} {}:{}", o.mutation.u, o.mutation.v);
    match (&o.scope, &o.report) {
        (Some(s), Some(r)) => format!(
            "{head} affected_edges={} affected_nodes={} rebuilt_nodes={} wing_changes={} bound={}{}",
            s.affected_edges.len(),
            s.affected_nodes.len(),
            r.affected_nodes.len(),
            r.wing_changes.len(),
            s.upper_bound,
            if r.fallback { " fallback=full-rebuild" } else { "" }
        ),
        _ => format!("{head} no-op (edge already present)"),
    }
}

fn cmd_update(a: UpdateArgs, m: &ArgMatches) -> CliResult {
    let g = load_graph(&a.input)?;
    let mutations = ordered_mutations(&a, m, &g)?;
    if mutations.is_empty() {
        return Err(Error::InvalidArgument("no mutations given".into()).into());
    }
    let loaded = load_index(&a.index)?;
    let mut maint = match loaded {
        LoadedIndex::EquiWing(ew) => WingMaintainer::from_parts(g, ew, None)?,
        LoadedIndex::Comp(ewc) => {
            let shadow = build_equiwing(&g, &wing_decomposition(&g))?;
            WingMaintainer::from_parts(g, shadow, Some(ewc))?
        }
    };
    let mut log = Vec::new();
    for mutation in &mutations {
        let t = Instant::now();
        let outcome = maint.apply(mutation)?;
        let elapsed = t.elapsed();
        log.push(describe(&outcome));
        log.push(format!(
            "# time update_ms={:.3}",
            elapsed.as_secs_f64() * 1e3
        ));
    }
    let text = match maint.comp() {
        Some(c) => serialize_comp(c)?,
        None => serialize_equiwing(maint.index())?,
    };
    write_graph(&a.input.graph, maint.graph())?;
    write_atomic(&a.index, &text)?;
    for line in &log {
        out!("{line}");
    }
    out!("edges: {}", maint.graph().edge_count());
    let sg = match maint.comp() {
        Some(c) => c.super_graph(),
        None => maint.index().super_graph(),
    };
    out!("super_nodes: {}", sg.node_count());
    out!("super_edges: {}", sg.super_edge_count());
    Ok(())
}

fn cmd_stats(a: StatsArgs) -> CliResult {
    let idx = load_index(&a.index)?;
    let sg = idx.super_graph();
    let (kind, ratio) = match &idx {
        LoadedIndex::EquiWing(ew) => {
            let ratio = compress(ew)
                .ok()
                .and_then(|c| compression_ratio(ew, &c).ok());
            ("equiwing", ratio)
        }
        LoadedIndex::Comp(c) => {
            let ratio =
                (c.node_count() > 0).then(|| c.merge_log().len() as f64 / c.node_count() as f64);
            ("equiwing-comp", ratio)
        }
    };
    out!("kind: {kind}");
    out!("super_nodes: {}", sg.node_count());
    out!("super_edges: {}", sg.super_edge_count());
    out!(
        "member_edges: {}",
        sg.nodes().map(|n| n.members.len()).sum::<usize>()
    );
    out!("k_max: {}", sg.k_max());
    match ratio {
        Some(r) => out!("compression_ratio: {r:.4}"),
        None => out!("compression_ratio: undefined (empty index)"),
    }
    for (k, ids) in sg.levels() {
        let edges: usize = ids
            .iter()
            .map(|id| sg.node(*id).map_or(0, |n| n.members.len()))
            .sum();
        out!("level {k} nodes={} edges={edges}", ids.len());
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let g = load_graph(&a.input)?;
    let t = Instant::now();
    let lab = wing_decomposition(&g);
    let ew = build_equiwing(&g, &lab)?;
    let build = t.elapsed();
    let t = Instant::now();
    let ewc = compress(&ew)?;
    let comp_time = t.elapsed();
    out!(
        "# graph edges={} k_max={} equiwing_nodes={} comp_nodes={}",
        g.edge_count(),
        lab.k_max(),
        ew.node_count(),
        ewc.node_count()
    );
    out!(
        "# time build_ms={:.3} compress_ms={:.3}",
        build.as_secs_f64() * 1e3,
        comp_time.as_secs_f64() * 1e3
    );
    let rows = run_bench(
        &g,
        &lab,
        &ew,
        &ewc,
        &BenchConfig {
            k: a.k,
            buckets: a.buckets,
            queries_per_bucket: a.queries,
            seed: a.seed,
        },
    )?;
    write!(std::io::stdout().lock(), "{}", format_table(&rows))?;
    if rows.iter().any(|r| !r.agree) {
        return Err(Error::Consistency("engines disagreed on a sampled query".into()).into());
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CliResult {
    let cfg = SynthConfig {
        u: a.u,
        v: a.v,
        p: a.p,
        block_min: a.block_min,
        block_max: a.block_max,
        p_in: a.p_in,
        seed: a.seed,
    };
    let edges = generate_edges(&cfg)?;
    let text = to_konect(&edges);
    match &a.out {
        Some(path) => {
            write_atomic(path, &text)?;
            eprintln!("wrote {} edges to {}", edges.len(), path.display());
        }
        None => write!(std::io::stdout().lock(), "{text}")?,
    }
    Ok(())
}
