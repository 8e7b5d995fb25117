//! Line-oriented text format for both index flavours, with a trailing
//! SHA-256 checksum over everything before the checksum line.
//!
//! ```text
//! EQUIWING v1 | EQUIWING-COMP v1
//! G <|U|> <|V|> <nodes> <super edges>
//! U <label>                      one per U vertex, in ordinal order
//! V <label>                      one per V vertex, in ordinal order
//! L <k>                          comp only, before each level's nodes
//! N <snID> <k> <member count>
//! <u label> <v label>            member edges
//! E <snID> <snID>
//! S <U|V> <label> <snID>...      seed list, highest level first
//! M <original snID> <merged snID>   comp only
//! C <sha256 hex>
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::comp::EquiWingCompIndex;
use crate::error::{Error, Result};
use crate::graph::{EdgeKey, Side, VertexId, VertexLabels};
use crate::index::EquiWingIndex;
use crate::supergraph::{SnId, SuperGraph};

const EW_HEADER: &str = "EQUIWING v1";
const EWC_HEADER: &str = "EQUIWING-COMP v1";

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn check_label(l: &str) -> Result<()> {
    if l.is_empty() || l.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!(
            "vertex label {l:?} cannot be serialized (empty or contains whitespace)"
        )));
    }
    Ok(())
}

fn write_body(sg: &SuperGraph, header: &str, log: Option<&BTreeMap<SnId, SnId>>) -> Result<String> {
    let labels = sg.labels();
    let mut out = String::new();
    let _ = writeln!(out, "{header}");
    let _ = writeln!(
        out,
        "G {} {} {} {}",
        labels.len(Side::U),
        labels.len(Side::V),
        sg.node_count(),
        sg.super_edge_count()
    );
    for side in [Side::U, Side::V] {
        for l in labels.names(side) {
            check_label(l)?;
            let _ = writeln!(out, "{side} {l}");
        }
    }
    let write_node = |out: &mut String, id: SnId| {
        let n = sg.node(id).expect("node exists");
        let _ = writeln!(out, "N {} {} {}", n.id, n.k, n.members.len());
        for e in &n.members {
            let _ = writeln!(
                out,
                "{} {}",
                labels.name(VertexId::u(e.u)),
                labels.name(VertexId::v(e.v))
            );
        }
    };
    if log.is_some() {
        for (k, ids) in sg.levels() {
            let _ = writeln!(out, "L {k}");
            for &id in ids {
                write_node(&mut out, id);
            }
        }
    } else {
        for n in sg.nodes() {
            write_node(&mut out, n.id);
        }
    }
    for (a, b) in sg.super_edges() {
        let _ = writeln!(out, "E {a} {b}");
    }
    let mut seeded: Vec<VertexId> = sg.seeded_vertices().collect();
    seeded.sort_unstable();
    for q in seeded {
        let _ = write!(out, "S {} {}", q.side, labels.name(q));
        for (_, id) in sg.seeds(q) {
            let _ = write!(out, " {id}");
        }
        out.push('\n');
    }
    if let Some(log) = log {
        for (o, m) in log {
            let _ = writeln!(out, "M {o} {m}");
        }
    }
    Ok(out)
}

fn seal(mut body: String) -> String {
    let digest = hex_digest(body.as_bytes());
    let _ = writeln!(body, "C {digest}");
    body
}

pub fn serialize_equiwing(idx: &EquiWingIndex) -> Result<String> {
    Ok(seal(write_body(idx.super_graph(), EW_HEADER, None)?))
}

pub fn serialize_comp(idx: &EquiWingCompIndex) -> Result<String> {
    Ok(seal(write_body(
        idx.super_graph(),
        EWC_HEADER,
        Some(idx.merge_log()),
    )?))
}

/// Strip and verify the checksum line; returns the body.
fn unseal(text: &str) -> Result<&str> {
    if !text.ends_with('\n') {
        return Err(Error::format("truncated index file (no final newline)"));
    }
    let trimmed = &text[..text.len() - 1];
    let start = trimmed.rfind('\n').map_or(0, |i| i + 1);
    let last = &trimmed[start..];
    let Some(digest) = last.strip_prefix("C ") else {
        return Err(Error::format(
            "truncated index file (missing checksum line)",
        ));
    };
    let body = &text[..start];
    if hex_digest(body.as_bytes()) != digest.trim() {
        return Err(Error::format("checksum mismatch"));
    }
    Ok(body)
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
}

impl<'a> Lines<'a> {
    fn new(body: &'a str) -> Self {
        Lines {
            inner: body.lines().enumerate().peekable(),
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        self.inner.next().map(|(i, l)| (i + 1, l))
    }

    fn peek_tag(&mut self) -> Option<&'a str> {
        self.inner
            .peek()
            .map(|(_, l)| l.split_whitespace().next().unwrap_or(""))
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.next()
            .ok_or_else(|| Error::format(format!("unexpected end of file, expected {what}")))
    }
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::format(format!("line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| bad(line, format!("expected {what}")))
}

struct Parsed {
    sg: SuperGraph,
    log: BTreeMap<SnId, SnId>,
}

fn parse(text: &str, comp: bool) -> Result<Parsed> {
    let body = unseal(text)?;
    let mut lines = Lines::new(body);
    let header = if comp { EWC_HEADER } else { EW_HEADER };
    let (_, h) = lines.expect("header")?;
    if h.trim_end() != header {
        return Err(Error::format(format!(
            "unsupported header {h:?}, expected {header:?}"
        )));
    }

    let (ln, g) = lines.expect("G line")?;
    let mut t = g.split_whitespace();
    if t.next() != Some("G") {
        return Err(bad(ln, "expected G line"));
    }
    let nu: usize = num(ln, t.next(), "|U|")?;
    let nv: usize = num(ln, t.next(), "|V|")?;
    let n_nodes: usize = num(ln, t.next(), "node count")?;
    let n_edges: usize = num(ln, t.next(), "super edge count")?;

    let mut labels = VertexLabels::new();
    for (side, n) in [(Side::U, nu), (Side::V, nv)] {
        for _ in 0..n {
            let (ln, l) = lines.expect("vertex table line")?;
            let mut t = l.split_whitespace();
            if t.next() != Some(side.token()) {
                return Err(bad(ln, format!("expected {side} vertex line")));
            }
            let label = t.next().ok_or_else(|| bad(ln, "missing label"))?;
            if t.next().is_some() {
                return Err(bad(ln, "trailing tokens"));
            }
            if labels.get(side, label).is_some() {
                return Err(bad(ln, format!("duplicate {side} label {label}")));
            }
            labels.intern(side, label);
        }
    }

    let mut sg = SuperGraph::new(labels.clone());
    let mut current_level: Option<u32> = None;
    let mut prev_id: Option<(u32, SnId)> = None;
    loop {
        match lines.peek_tag() {
            Some("L") if comp => {
                let (ln, l) = lines.next().expect("peeked");
                let mut t = l.split_whitespace().skip(1);
                let k: u32 = num(ln, t.next(), "level")?;
                if current_level.is_some_and(|c| c >= k) {
                    return Err(bad(ln, "levels must be strictly ascending"));
                }
                current_level = Some(k);
            }
            Some("N") => {
                let (ln, l) = lines.next().expect("peeked");
                let mut t = l.split_whitespace().skip(1);
                let id: SnId = num(ln, t.next(), "snID")?;
                let k: u32 = num(ln, t.next(), "wing number")?;
                let count: usize = num(ln, t.next(), "member count")?;
                if comp && current_level != Some(k) {
                    return Err(bad(ln, "node level does not match its L marker"));
                }
                let order = if comp { (k, id) } else { (0, id) };
                if prev_id.is_some_and(|p| p >= order) {
                    return Err(bad(ln, "nodes out of order"));
                }
                prev_id = Some(order);
                let mut members = Vec::with_capacity(count);
                for _ in 0..count {
                    let (ln, m) = lines.expect("member edge")?;
                    let mut t = m.split_whitespace();
                    let (Some(a), Some(b), None) = (t.next(), t.next(), t.next()) else {
                        return Err(bad(ln, "expected member edge"));
                    };
                    let u = labels
                        .get(Side::U, a)
                        .ok_or_else(|| bad(ln, format!("unknown U vertex {a}")))?;
                    let v = labels
                        .get(Side::V, b)
                        .ok_or_else(|| bad(ln, format!("unknown V vertex {b}")))?;
                    members.push(EdgeKey::new(u, v));
                }
                sg.add_node(id, k, members)
                    .map_err(|e| bad(ln, e.to_string()))?;
            }
            _ => break,
        }
    }
    if sg.node_count() != n_nodes {
        return Err(Error::format(format!(
            "expected {n_nodes} nodes, found {}",
            sg.node_count()
        )));
    }

    while lines.peek_tag() == Some("E") {
        let (ln, l) = lines.next().expect("peeked");
        let mut t = l.split_whitespace().skip(1);
        let a: SnId = num(ln, t.next(), "snID")?;
        let b: SnId = num(ln, t.next(), "snID")?;
        if !sg
            .add_super_edge(a, b)
            .map_err(|e| bad(ln, e.to_string()))?
        {
            return Err(bad(ln, "duplicate super edge"));
        }
    }
    if sg.super_edge_count() != n_edges {
        return Err(Error::format(format!(
            "expected {n_edges} super edges, found {}",
            sg.super_edge_count()
        )));
    }

    let mut seen_seeds = 0usize;
    while lines.peek_tag() == Some("S") {
        let (ln, l) = lines.next().expect("peeked");
        let mut t = l.split_whitespace().skip(1);
        let side = t
            .next()
            .and_then(Side::from_token)
            .ok_or_else(|| bad(ln, "expected side U or V"))?;
        let label = t.next().ok_or_else(|| bad(ln, "missing label"))?;
        let ord = labels
            .get(side, label)
            .ok_or_else(|| bad(ln, format!("unknown vertex {label}")))?;
        let ids: Vec<SnId> = t
            .map(|x| x.parse().map_err(|_| bad(ln, "bad snID")))
            .collect::<Result<_>>()?;
        let derived: Vec<SnId> = sg
            .seeds(VertexId { side, ordinal: ord })
            .map(|(_, id)| id)
            .collect();
        if ids != derived {
            return Err(bad(ln, "seed list does not match node contents"));
        }
        seen_seeds += 1;
    }
    if seen_seeds != sg.seeded_vertices().count() {
        return Err(Error::format("seed table is incomplete"));
    }

    let mut log = BTreeMap::new();
    if comp {
        while lines.peek_tag() == Some("M") {
            let (ln, l) = lines.next().expect("peeked");
            let mut t = l.split_whitespace().skip(1);
            let o: SnId = num(ln, t.next(), "snID")?;
            let m: SnId = num(ln, t.next(), "snID")?;
            if sg.node(m).is_none() {
                return Err(bad(ln, format!("merge target {m} is not a node")));
            }
            log.insert(o, m);
        }
        let targets: BTreeSet<SnId> = log.values().copied().collect();
        if sg.nodes().any(|n| !targets.contains(&n.id)) {
            return Err(Error::format("merge log does not cover every node"));
        }
    }
    if let Some((ln, l)) = lines.next() {
        return Err(bad(ln, format!("unexpected content {l:?}")));
    }
    Ok(Parsed { sg, log })
}

pub fn deserialize_equiwing(text: &str) -> Result<EquiWingIndex> {
    let p = parse(text, false)?;
    Ok(EquiWingIndex::from_parts(p.sg))
}

pub fn deserialize_comp(text: &str) -> Result<EquiWingCompIndex> {
    let p = parse(text, true)?;
    Ok(EquiWingCompIndex {
        sg: p.sg,
        merge_log: p.log,
    })
}

/// Which flavour a serialized index is, from its header line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexKind {
    EquiWing,
    Comp,
}

pub fn sniff_kind(text: &str) -> Result<IndexKind> {
    match text.lines().next().map(str::trim_end) {
        Some(EW_HEADER) => Ok(IndexKind::EquiWing),
        Some(EWC_HEADER) => Ok(IndexKind::Comp),
        Some(h) => Err(Error::format(format!("unsupported header {h:?}"))),
        None => Err(Error::format("empty index file")),
    }
}

/// Write to a sibling temp file and rename over `path`.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}
