//! Event-stream ingestion, synthetic generators and split manifests.
//!
//! Loaded streams are chronological, timestamps are shifted to start at 0
//! and node ids are dense. JODIE files keep their numeric ids (items are
//! offset past the users); generic edge lists map tokens to ids in order of
//! first appearance and keep the original tokens as labels.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Split;
use crate::rng::keyed_rng;
use crate::temporal_graph::{stream_intensity, Event, GraphError, NodeId, StreamStats, TemporalStore};

pub const JODIE_HEADER: &str = "user_id,item_id,timestamp,state_label,comma_separated_list_of_features";
const MANIFEST_MAGIC: &str = "# caw split manifest v1";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: header {found:?} does not match the JODIE header")]
    Header { path: PathBuf, found: String },
    #[error("{path}:{line}: {msg}")]
    Row { path: PathBuf, line: usize, msg: String },
    #[error("unknown dataset format {0:?}")]
    Format(String),
    #[error("bad synthetic dataset {0:?}; expected synthetic:pairwise:<pairs>:<rounds>, synthetic:triadic:<nodes>:<rounds> or synthetic:poisson:<nodes>:<tau>:<T>")]
    Synthetic(String),
    #[error("generator parameter: {0}")]
    Generator(String),
}

impl DataError {
    fn io(path: &Path, source: io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn row(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        DataError::Row {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }
}

/// Counters for rows that were repaired rather than rejected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadWarnings {
    /// Rows whose timestamp was below the previous row's.
    pub reordered: usize,
    pub self_loops: usize,
}

/// A chronological event stream over dense node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub events: Vec<Event>,
    pub n_nodes: usize,
    pub attr_dim: usize,
    /// Original token of every node id.
    pub labels: Vec<String>,
    /// Number of user ids when the stream is bipartite.
    pub n_users: Option<usize>,
    /// Amount subtracted from the raw timestamps.
    pub time_offset: f64,
    pub warnings: LoadWarnings,
}

impl EventStream {
    /// Wraps already chronological events on nodes `0..n_nodes`.
    pub fn from_events(events: Vec<Event>, n_nodes: usize) -> Self {
        let attr_dim = events.first().map_or(0, |e| e.attrs.len());
        Self {
            events,
            n_nodes,
            attr_dim,
            labels: (0..n_nodes).map(|i| i.to_string()).collect(),
            n_users: None,
            time_offset: 0.0,
            warnings: LoadWarnings::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.t).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n_nodes as u32).map(NodeId)
    }

    pub fn store(&self, alpha: f64) -> Result<TemporalStore, GraphError> {
        TemporalStore::from_events(alpha, &self.events)
    }

    /// Counts over the whole node space, including nodes without links.
    pub fn stats(&self) -> Option<StreamStats> {
        let (first, last) = (self.events.first()?, self.events.last()?);
        Some(StreamStats {
            n_nodes: self.n_nodes,
            n_events: self.events.len(),
            t_min: first.t,
            t_max: last.t,
            tau: stream_intensity(self.n_nodes, self.events.len(), last.t - first.t),
        })
    }

    /// Node id of a label.
    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.labels.iter().position(|l| l == label).map(|i| NodeId(i as u32))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    JodieCsv,
    EdgeList,
    Synthetic,
}

impl FromStr for Format {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jodie" | "jodie-csv" => Ok(Format::JodieCsv),
            "edges" | "edge-list" => Ok(Format::EdgeList),
            "synthetic" => Ok(Format::Synthetic),
            _ => Err(DataError::Format(s.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::JodieCsv => "jodie-csv",
            Format::EdgeList => "edge-list",
            Format::Synthetic => "synthetic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generator {
    Pairwise { pairs: usize, rounds: usize },
    Triadic { nodes: usize, rounds: usize },
    Poisson { nodes: usize, tau: f64, horizon: f64 },
}

impl FromStr for Generator {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || DataError::Synthetic(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let int = |x: &str| x.parse::<usize>().map_err(|_| bad());
        let real = |x: &str| x.parse::<f64>().map_err(|_| bad());
        match parts.as_slice() {
            ["synthetic", "pairwise", p, r] => Ok(Generator::Pairwise {
                pairs: int(p)?,
                rounds: int(r)?,
            }),
            ["synthetic", "triadic", n, r] => Ok(Generator::Triadic {
                nodes: int(n)?,
                rounds: int(r)?,
            }),
            ["synthetic", "poisson", n, tau, h] => Ok(Generator::Poisson {
                nodes: int(n)?,
                tau: real(tau)?,
                horizon: real(h)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Generator::Pairwise { pairs, rounds } => write!(f, "synthetic:pairwise:{pairs}:{rounds}"),
            Generator::Triadic { nodes, rounds } => write!(f, "synthetic:triadic:{nodes}:{rounds}"),
            Generator::Poisson { nodes, tau, horizon } => write!(f, "synthetic:poisson:{nodes}:{tau}:{horizon}"),
        }
    }
}

/// Where a stream comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetSpec {
    File { path: PathBuf, format: Format },
    Synthetic(Generator),
}

/// A loaded dataset plus generator ground truth, when there is one.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub stream: EventStream,
    /// Events that count as positive queries; `None` means all of them.
    pub positives: Option<Vec<bool>>,
}

impl DatasetSpec {
    /// Parses `synthetic:*` ids or a file path; the format of a file is
    /// sniffed from its header unless given.
    pub fn parse(dataset: &str, format: Option<Format>) -> Result<Self, DataError> {
        if dataset.starts_with("synthetic:") || format == Some(Format::Synthetic) {
            return Ok(DatasetSpec::Synthetic(dataset.parse()?));
        }
        let path = PathBuf::from(dataset);
        let format = match format {
            Some(f) => f,
            None => sniff_format(&path)?,
        };
        Ok(DatasetSpec::File { path, format })
    }

    pub fn load(&self, seed: u64) -> Result<Dataset, DataError> {
        match self {
            DatasetSpec::File { path, format } => {
                let stream = match format {
                    Format::JodieCsv => load_jodie_csv(path)?,
                    Format::EdgeList => load_edge_list(path)?,
                    Format::Synthetic => return Err(DataError::Format(path.display().to_string())),
                };
                Ok(Dataset { stream, positives: None })
            }
            DatasetSpec::Synthetic(g) => match *g {
                Generator::Pairwise { pairs, rounds } => Ok(Dataset {
                    stream: gen_pairwise(seed, pairs, rounds)?,
                    positives: None,
                }),
                Generator::Triadic { nodes, rounds } => {
                    let t = gen_triadic(seed, nodes, rounds)?;
                    Ok(Dataset {
                        stream: t.stream,
                        positives: Some(t.is_closure),
                    })
                }
                Generator::Poisson { nodes, tau, horizon } => Ok(Dataset {
                    stream: gen_poisson(nodes, tau, horizon, seed)?,
                    positives: None,
                }),
            },
        }
    }
}

fn sniff_format(path: &Path) -> Result<Format, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| DataError::io(path, e))?;
    Ok(if first.trim_end_matches(['\r', '\n']) == JODIE_HEADER {
        Format::JodieCsv
    } else {
        Format::EdgeList
    })
}

fn read_lines(path: &Path) -> Result<Vec<String>, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(|e| DataError::io(path, e))
}

fn parse_time(path: &Path, line: usize, tok: &str) -> Result<f64, DataError> {
    match tok.trim().parse::<f64>() {
        Ok(t) if t.is_finite() => Ok(t),
        _ => Err(DataError::row(path, line, format!("bad timestamp {tok:?}"))),
    }
}

fn parse_attrs<'a>(path: &Path, line: usize, toks: impl Iterator<Item = &'a str>) -> Result<Vec<f64>, DataError> {
    toks.map(|x| match x.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::row(path, line, format!("bad attribute {x:?}"))),
    })
    .collect()
}

struct RawRow {
    u: usize,
    v: usize,
    t: f64,
    attrs: Vec<f64>,
}

/// Stable sort by time, counting rows that arrived out of order.
fn sort_rows(rows: &mut [RawRow]) -> usize {
    let reordered = rows.windows(2).filter(|w| w[1].t < w[0].t).count();
    if reordered > 0 {
        rows.sort_by(|a, b| a.t.total_cmp(&b.t));
    }
    reordered
}

fn shift_times(events: &mut [Event]) -> f64 {
    let offset = events.first().map_or(0.0, |e| e.t);
    if offset != 0.0 {
        for e in events.iter_mut() {
            e.t -= offset;
        }
    }
    offset
}

/// Loads a JODIE-style CSV (users, items, timestamps, state label, features).
pub fn load_jodie_csv(path: impl AsRef<Path>) -> Result<EventStream, DataError> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let header = lines.first().map(|h| h.trim_end_matches('\r')).unwrap_or("");
    if header != JODIE_HEADER {
        return Err(DataError::Header {
            path: path.to_path_buf(),
            found: header.to_string(),
        });
    }
    let mut rows = Vec::with_capacity(lines.len().saturating_sub(1));
    let mut attr_dim = None;
    for (i, raw) in lines.iter().enumerate().skip(1) {
        let line = i + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = raw.split(',').collect();
        if toks.len() < 4 {
            return Err(DataError::row(path, line, format!("expected at least 4 fields, found {}", toks.len())));
        }
        let id = |x: &str, what: &str| {
            x.trim()
                .parse::<u32>()
                .map(|v| v as usize)
                .map_err(|_| DataError::row(path, line, format!("bad {what} id {x:?}")))
        };
        let u = id(toks[0], "user")?;
        let v = id(toks[1], "item")?;
        let t = parse_time(path, line, toks[2])?;
        let attrs = parse_attrs(path, line, toks[4..].iter().copied())?;
        match attr_dim {
            None => attr_dim = Some(attrs.len()),
            Some(d) if d != attrs.len() => {
                return Err(DataError::row(path, line, format!("{} features, earlier rows have {d}", attrs.len())));
            }
            _ => {}
        }
        rows.push(RawRow { u, v, t, attrs });
    }
    let reordered = sort_rows(&mut rows);
    let n_users = rows.iter().map(|r| r.u + 1).max().unwrap_or(0);
    let n_items = rows.iter().map(|r| r.v + 1).max().unwrap_or(0);
    let n_nodes = n_users + n_items;
    if n_nodes > u32::MAX as usize {
        return Err(DataError::row(path, 0, "node ids exceed the 32-bit id space"));
    }
    let mut events: Vec<Event> = rows
        .into_iter()
        .map(|r| Event::new(NodeId(r.u as u32), NodeId((n_users + r.v) as u32), r.t).with_attrs(r.attrs))
        .collect();
    let time_offset = shift_times(&mut events);
    let mut labels: Vec<String> = (0..n_users).map(|i| format!("u{i}")).collect();
    labels.extend((0..n_items).map(|i| format!("i{i}")));
    if reordered > 0 {
        log::warn!("{}: {reordered} rows out of chronological order were sorted", path.display());
    }
    Ok(EventStream {
        events,
        n_nodes,
        attr_dim: attr_dim.unwrap_or(0),
        labels,
        n_users: Some(n_users),
        time_offset,
        warnings: LoadWarnings {
            reordered,
            self_loops: 0,
        },
    })
}

/// Loads `u v t [attrs..]` rows separated by whitespace or commas. Lines
/// starting with `#` or `%` are comments.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<EventStream, DataError> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let mut tokens: Vec<(String, String)> = Vec::new();
    let mut rows = Vec::new();
    let mut attr_dim = None;
    for (i, raw) in lines.iter().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') || body.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if toks.len() < 3 {
            return Err(DataError::row(path, line, format!("expected `u v t`, found {} fields", toks.len())));
        }
        let t = parse_time(path, line, toks[2])?;
        let attrs = parse_attrs(path, line, toks[3..].iter().copied())?;
        match attr_dim {
            None => attr_dim = Some(attrs.len()),
            Some(d) if d != attrs.len() => {
                return Err(DataError::row(path, line, format!("{} attributes, earlier rows have {d}", attrs.len())));
            }
            _ => {}
        }
        rows.push(RawRow {
            u: tokens.len(),
            v: 0,
            t,
            attrs,
        });
        tokens.push((toks[0].to_string(), toks[1].to_string()));
    }
    let reordered = sort_rows(&mut rows);

    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut labels = Vec::new();
    let mut intern = |tok: &str| {
        *ids.entry(tok.to_string()).or_insert_with(|| {
            labels.push(tok.to_string());
            (labels.len() - 1) as u32
        })
    };
    let mut events = Vec::with_capacity(rows.len());
    let mut self_loops = 0;
    for r in rows {
        let (a, b) = &tokens[r.u];
        if a == b {
            self_loops += 1;
            continue;
        }
        let u = intern(a);
        let v = intern(b);
        events.push(Event::new(NodeId(u), NodeId(v), r.t).with_attrs(r.attrs));
    }
    let time_offset = shift_times(&mut events);
    if reordered > 0 {
        log::warn!("{}: {reordered} rows out of chronological order were sorted", path.display());
    }
    if self_loops > 0 {
        log::warn!("{}: dropped {self_loops} self-loops", path.display());
    }
    Ok(EventStream {
        n_nodes: labels.len(),
        events,
        attr_dim: attr_dim.unwrap_or(0),
        labels,
        n_users: None,
        time_offset,
        warnings: LoadWarnings { reordered, self_loops },
    })
}

fn write_attrs<W: Write>(w: &mut W, attrs: &[f64], sep: char) -> io::Result<()> {
    for a in attrs {
        write!(w, "{sep}{a}")?;
    }
    Ok(())
}

/// Writes `label_u label_v t [attrs..]` rows; loading the output again
/// reproduces the stream.
pub fn write_edge_list<W: Write>(stream: &EventStream, w: W) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    for e in &stream.events {
        write!(w, "{} {} {}", stream.labels[e.u.index()], stream.labels[e.v.index()], e.t)?;
        write_attrs(&mut w, &e.attrs, ' ')?;
        writeln!(w)?;
    }
    w.flush()
}

/// Writes a bipartite stream in the JODIE layout with state label 0.
pub fn write_jodie_csv<W: Write>(stream: &EventStream, w: W) -> io::Result<()> {
    let n_users = stream
        .n_users
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "stream is not bipartite"))?;
    let mut w = BufWriter::new(w);
    writeln!(w, "{JODIE_HEADER}")?;
    for e in &stream.events {
        let (u, v) = (e.u.index(), e.v.index());
        if u >= n_users || v < n_users {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "event does not go from a user to an item"));
        }
        write!(w, "{},{},{},0", u, v - n_users, e.t)?;
        write_attrs(&mut w, &e.attrs, ',')?;
        writeln!(w)?;
    }
    w.flush()
}

/// Poisson link stream: links arrive at total rate `tau * n / 2` on
/// uniformly random node pairs, so every node sees intensity `tau`.
pub fn gen_poisson(n_nodes: usize, tau: f64, horizon: f64, seed: u64) -> Result<EventStream, DataError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(DataError::Generator(format!("tau must be positive, got {tau}")));
    }
    if n_nodes < 2 {
        return Err(DataError::Generator("need at least 2 nodes".into()));
    }
    let mut rng = keyed_rng(seed, &[0x9015]);
    let gap = Exp::new(tau * n_nodes as f64 / 2.0).map_err(|e| DataError::Generator(e.to_string()))?;
    let mut events = Vec::new();
    let mut t = gap.sample(&mut rng);
    while t < horizon {
        let u = rng.random_range(0..n_nodes);
        let mut v = rng.random_range(0..n_nodes - 1);
        if v >= u {
            v += 1;
        }
        events.push(Event::new(NodeId(u as u32), NodeId(v as u32), t));
        t += gap.sample(&mut rng);
    }
    Ok(EventStream::from_events(events, n_nodes))
}

/// Disjoint pairs `(2k, 2k + 1)` that all interact once per round at a
/// shared timestamp. Round times are increasing with random gaps.
pub fn gen_pairwise(seed: u64, n_pairs: usize, n_rounds: usize) -> Result<EventStream, DataError> {
    if n_pairs < 2 {
        return Err(DataError::Generator(format!("need at least 2 pairs, got {n_pairs}")));
    }
    let mut rng = keyed_rng(seed, &[0x9a12]);
    let mut events = Vec::with_capacity(n_pairs * n_rounds);
    let mut t = 0.0;
    let mut order: Vec<usize> = (0..n_pairs).collect();
    for _ in 0..n_rounds {
        t += 1.0 + rng.random::<f64>();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for &k in &order {
            let (a, b) = (NodeId(2 * k as u32), NodeId(2 * k as u32 + 1));
            let (u, v) = if rng.random::<bool>() { (a, b) } else { (b, a) };
            events.push(Event::new(u, v, t));
        }
    }
    Ok(EventStream::from_events(events, 2 * n_pairs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriadicConfig {
    pub n_nodes: usize,
    pub n_rounds: usize,
    /// Probability that a round closes a wedge.
    pub p_close: f64,
    /// Number of most recent links that wedges are drawn from.
    pub window: usize,
}

impl TriadicConfig {
    pub fn new(n_nodes: usize, n_rounds: usize) -> Self {
        Self {
            n_nodes,
            n_rounds,
            p_close: 0.5,
            window: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TriadicStream {
    pub stream: EventStream,
    /// Whether each event closed a wedge of the recent window.
    pub is_closure: Vec<bool>,
}

/// One link per round at `t = round + 1`. With probability `p_close` the
/// link closes a wedge `u - w - v` formed by recent links, otherwise it
/// joins a random pair without a common recent neighbour.
pub fn gen_triadic(seed: u64, n_nodes: usize, n_rounds: usize) -> Result<TriadicStream, DataError> {
    gen_triadic_with(seed, TriadicConfig::new(n_nodes, n_rounds))
}

pub fn gen_triadic_with(seed: u64, cfg: TriadicConfig) -> Result<TriadicStream, DataError> {
    if cfg.n_nodes < 3 {
        return Err(DataError::Generator(format!("need at least 3 nodes, got {}", cfg.n_nodes)));
    }
    if !(0.0..=1.0).contains(&cfg.p_close) || cfg.window == 0 {
        return Err(DataError::Generator("p_close must lie in [0, 1] and window be positive".into()));
    }
    let mut rng = keyed_rng(seed, &[0x7a1d]);
    let n = cfg.n_nodes as u32;
    let mut events: Vec<Event> = Vec::with_capacity(cfg.n_rounds);
    let mut is_closure = Vec::with_capacity(cfg.n_rounds);
    for round in 0..cfg.n_rounds {
        let recent = &events[events.len().saturating_sub(cfg.window)..];
        let neighbours = |w: NodeId| -> BTreeSet<NodeId> {
            recent
                .iter()
                .filter_map(|e| {
                    if e.u == w {
                        Some(e.v)
                    } else if e.v == w {
                        Some(e.u)
                    } else {
                        None
                    }
                })
                .collect()
        };
        let mut link = None;
        if !recent.is_empty() && rng.random::<f64>() < cfg.p_close {
            let e = recent.choose(&mut rng).expect("non-empty window");
            let (w, u) = if rng.random::<bool>() { (e.u, e.v) } else { (e.v, e.u) };
            let others: Vec<NodeId> = neighbours(w).into_iter().filter(|&x| x != u).collect();
            if let Some(&v) = others.choose(&mut rng) {
                link = Some((u, v, true));
            }
        }
        if link.is_none() {
            for _ in 0..100 {
                let u = NodeId(rng.random_range(0..n));
                let v = NodeId(rng.random_range(0..n));
                if u == v {
                    continue;
                }
                if neighbours(u).is_disjoint(&neighbours(v)) {
                    link = Some((u, v, false));
                    break;
                }
            }
        }
        let Some((u, v, closed)) = link else {
            continue;
        };
        events.push(Event::new(u, v, (round + 1) as f64));
        is_closure.push(closed);
    }
    Ok(TriadicStream {
        stream: EventStream::from_events(events, cfg.n_nodes),
        is_closure,
    })
}

/// Writes a split as tab-separated records.
pub fn write_split_manifest<W: Write>(split: &Split, w: W) -> io::Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{MANIFEST_MAGIC}")?;
    writeln!(w, "train\t{}\t{}", split.train.start, split.train.end)?;
    writeln!(w, "val\t{}\t{}", split.val.start, split.val.end)?;
    writeln!(w, "test\t{}\t{}", split.test.start, split.test.end)?;
    writeln!(w, "t_train\t{}", split.t_train)?;
    writeln!(w, "t_val\t{}", split.t_val)?;
    write!(w, "masked")?;
    for n in &split.masked {
        write!(w, "\t{n}")?;
    }
    writeln!(w)?;
    w.flush()
}

pub fn read_split_manifest(path: impl AsRef<Path>) -> Result<Split, DataError> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    if lines.first().map(String::as_str) != Some(MANIFEST_MAGIC) {
        return Err(DataError::row(path, 1, "not a split manifest"));
    }
    let mut split = Split::default();
    for (i, raw) in lines.iter().enumerate().skip(1) {
        let line = i + 1;
        let toks: Vec<&str> = raw.split('\t').collect();
        let idx = |k: usize| -> Result<usize, DataError> {
            toks.get(k)
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| DataError::row(path, line, "bad event index"))
        };
        match toks[0] {
            "train" => split.train = idx(1)?..idx(2)?,
            "val" => split.val = idx(1)?..idx(2)?,
            "test" => split.test = idx(1)?..idx(2)?,
            "t_train" => split.t_train = parse_time(path, line, toks.get(1).unwrap_or(&""))?,
            "t_val" => split.t_val = parse_time(path, line, toks.get(1).unwrap_or(&""))?,
            "masked" => {
                for tok in &toks[1..] {
                    let n = tok
                        .parse::<u32>()
                        .map_err(|_| DataError::row(path, line, format!("bad node id {tok:?}")))?;
                    split.masked.insert(NodeId(n));
                }
            }
            "" => {}
            other => return Err(DataError::row(path, line, format!("unknown record {other:?}"))),
        }
    }
    Ok(split)
}
