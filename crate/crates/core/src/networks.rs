//! Article and domain networks.
//!
//! The domain network is induced from the article network through a
//! domain-by-article membership matrix `A` whose entries are `1/n_d` for
//! the `n_d` articles of domain `d`:
//!
//! ```text
//! D = sqrt∘(A) · S · sqrt∘(A)ᵀ,   D_de = Σ_{i∈d, j∈e} S_ij / sqrt(n_d · n_e)
//! ```
//!
//! where `sqrt∘` is the elementwise square root. The diagonal of `D`
//! measures reuse inside a domain; it is kept in [`DomainNetwork`] but
//! zeroed in the network itself.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::DMatrix;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::article_sim::{csv_field, SimilarityMatrix};
use crate::corpus::Article;

pub const ATTR_DOMAIN: &str = "domain";
pub const ATTR_BIAS: &str = "bias_label";

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown node id {0:?}")]
    UnknownNode(String),
    #[error("article {0:?} is not covered by the membership matrix")]
    UncoveredArticle(String),
    #[error("article {article:?} belongs to both {first:?} and {second:?}")]
    ArticleInTwoDomains { article: String, first: String, second: String },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("graphml: {0}")]
    GraphMl(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub attributes: BTreeMap<String, String>,
}

/// Undirected weighted graph stored as a dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedNetwork {
    nodes: Vec<Node>,
    weights: Vec<f64>,
}

impl WeightedNetwork {
    pub fn new(nodes: Vec<Node>) -> Result<Self, NetworkError> {
        let mut seen = BTreeSet::new();
        for n in &nodes {
            if !seen.insert(n.id.as_str()) {
                return Err(NetworkError::Invalid(format!("duplicate node id {:?}", n.id)));
            }
        }
        let k = nodes.len();
        Ok(Self { nodes, weights: vec![0.0; k * k] })
    }

    /// Nodes without attributes.
    pub fn from_ids<I, S>(ids: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(ids.into_iter().map(|id| Node { id: id.into(), attributes: BTreeMap::new() }).collect())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.len() + j]
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<(), NetworkError> {
        if i == j {
            return Err(NetworkError::Invalid("self-loops are not allowed".into()));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(NetworkError::Invalid(format!("weight {w} is not a finite non-negative number")));
        }
        let n = self.len();
        self.weights[i * n + j] = w;
        self.weights[j * n + i] = w;
        Ok(())
    }

    pub fn set_attribute(&mut self, i: usize, key: &str, value: impl Into<String>) {
        self.nodes[i].attributes.insert(key.to_string(), value.into());
    }

    pub fn attribute(&self, i: usize, key: &str) -> Option<&str> {
        self.nodes[i].attributes.get(key).map(String::as_str)
    }

    /// Weighted degree.
    pub fn degree(&self, i: usize) -> f64 {
        (0..self.len()).map(|j| self.weight(i, j)).sum()
    }

    /// Sum of undirected edge weights (each edge once).
    pub fn total_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    /// Positive-weight edges with `i < j`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j, self.weight(i, j)))).filter(|e| e.2 > 0.0)
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    /// The subgraph on the given node indices, in the given order.
    pub fn subgraph(&self, keep: &[usize]) -> WeightedNetwork {
        let nodes = keep.iter().map(|&i| self.nodes[i].clone()).collect();
        let k = keep.len();
        let mut weights = vec![0.0; k * k];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                weights[a * k + b] = self.weight(i, j);
            }
        }
        WeightedNetwork { nodes, weights }
    }

    /// Same nodes and edges with nodes sorted by id.
    pub fn sorted_by_id(&self) -> WeightedNetwork {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.nodes[a].id.cmp(&self.nodes[b].id));
        self.subgraph(&order)
    }

    /// Scales weights so the largest is 1. Used for display only.
    pub fn normalize_max(&mut self) {
        let max = self.weights.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            self.weights.iter_mut().for_each(|w| *w /= max);
        }
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.len(), &self.weights)
    }
}

/// Keeps pairs with weight strictly above `min_weight`; every article in
/// `articles` becomes a node, isolates included.
pub fn build_article_network(
    m: &SimilarityMatrix,
    articles: &[Article],
    min_weight: f64,
) -> Result<WeightedNetwork, NetworkError> {
    let by_id: BTreeMap<&str, &Article> = articles.iter().map(|a| (a.id.as_str(), a)).collect();
    let nodes = m
        .node_ids()
        .iter()
        .map(|id| {
            let article = by_id.get(id.as_str()).ok_or_else(|| NetworkError::UnknownNode(id.clone()))?;
            let mut attributes = BTreeMap::new();
            attributes.insert(ATTR_DOMAIN.to_string(), article.domain.clone());
            attributes.insert(ATTR_BIAS.to_string(), article.bias_label.clone().unwrap_or_default());
            Ok(Node { id: id.clone(), attributes })
        })
        .collect::<Result<Vec<_>, NetworkError>>()?;
    let mut net = WeightedNetwork::new(nodes)?;
    for i in 0..m.len() {
        for j in (i + 1)..m.len() {
            let w = m.get(i, j);
            if w > min_weight {
                net.set_weight(i, j, w)?;
            }
        }
    }
    Ok(net)
}

/// Domain-by-article membership with `1/n_d` weights.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    domains: Vec<String>,
    articles: Vec<String>,
    domain_of: Vec<usize>,
    counts: Vec<usize>,
}

impl MembershipMatrix {
    /// Domains sorted by name, articles in input order.
    pub fn from_pairs<I, A, D>(pairs: I) -> Result<Self, NetworkError>
    where
        I: IntoIterator<Item = (A, D)>,
        A: Into<String>,
        D: Into<String>,
    {
        let mut assigned: BTreeMap<String, String> = BTreeMap::new();
        let mut articles = Vec::new();
        for (a, d) in pairs {
            let (a, d) = (a.into(), d.into());
            match assigned.get(&a) {
                Some(existing) if *existing != d => {
                    return Err(NetworkError::ArticleInTwoDomains { article: a, first: existing.clone(), second: d });
                }
                Some(_) => {}
                None => {
                    assigned.insert(a.clone(), d);
                    articles.push(a);
                }
            }
        }
        let domains: Vec<String> = assigned.values().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let domain_of: Vec<usize> = articles
            .iter()
            .map(|a| domains.binary_search(&assigned[a]).expect("domain present"))
            .collect();
        let mut counts = vec![0; domains.len()];
        domain_of.iter().for_each(|&d| counts[d] += 1);
        Ok(Self { domains, articles, domain_of, counts })
    }

    pub fn from_articles(articles: &[Article]) -> Result<Self, NetworkError> {
        Self::from_pairs(articles.iter().map(|a| (a.id.as_str(), a.domain.as_str())))
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn articles(&self) -> &[String] {
        &self.articles
    }

    pub fn domain_of(&self, article: &str) -> Option<&str> {
        let i = self.articles.iter().position(|a| a == article)?;
        Some(&self.domains[self.domain_of[i]])
    }

    pub fn article_count(&self, domain: usize) -> usize {
        self.counts[domain]
    }

    /// Entry (d, a): `1/n_d` if article a is in domain d, else 0.
    pub fn value(&self, domain: usize, article: usize) -> f64 {
        if self.domain_of[article] == domain {
            1.0 / self.counts[domain] as f64
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainNetwork {
    pub network: WeightedNetwork,
    /// `D_dd` before zeroing: within-domain reuse.
    pub self_similarity: Vec<f64>,
}

pub fn induce_domain_network(
    s: &WeightedNetwork,
    membership: &MembershipMatrix,
) -> Result<DomainNetwork, NetworkError> {
    let columns: Vec<usize> = s
        .nodes()
        .iter()
        .map(|n| {
            membership
                .articles()
                .iter()
                .position(|a| *a == n.id)
                .ok_or_else(|| NetworkError::UncoveredArticle(n.id.clone()))
        })
        .collect::<Result<_, _>>()?;
    if let Some(extra) = membership.articles().iter().find(|a| s.index_of(a).is_none()) {
        return Err(NetworkError::UnknownNode(extra.clone()));
    }
    let nd = membership.domains().len();
    let root_a = DMatrix::from_fn(nd, s.len(), |d, i| membership.value(d, columns[i]).sqrt());
    let d = &root_a * s.to_matrix() * root_a.transpose();

    let mut labels: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new(); nd];
    for (i, node) in s.nodes().iter().enumerate() {
        if let Some(label) = node.attributes.get(ATTR_BIAS).filter(|l| !l.is_empty()) {
            let dom = membership.domain_of[columns[i]];
            *labels[dom].entry(label.clone()).or_default() += 1;
        }
    }
    let nodes = membership
        .domains()
        .iter()
        .zip(&labels)
        .map(|(dom, counts)| {
            // Most frequent article label; ties go to the lexically first.
            let label = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .map(|(l, _)| l.clone())
                .unwrap_or_default();
            let mut attributes = BTreeMap::new();
            attributes.insert(ATTR_BIAS.to_string(), label);
            Node { id: dom.clone(), attributes }
        })
        .collect();
    let mut network = WeightedNetwork::new(nodes)?;
    for i in 0..nd {
        for j in (i + 1)..nd {
            // Average the two triangles so the result is exactly symmetric.
            let w = 0.5 * (d[(i, j)] + d[(j, i)]);
            network.set_weight(i, j, w.max(0.0))?;
        }
    }
    let self_similarity = (0..nd).map(|i| d[(i, i)]).collect();
    Ok(DomainNetwork { network, self_similarity })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    GraphMl,
    EdgeCsv,
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn attribute_keys(n: &WeightedNetwork) -> BTreeSet<&str> {
    n.nodes().iter().flat_map(|node| node.attributes.keys().map(String::as_str)).collect()
}

/// GraphML with nodes sorted by id and edges by (min id, max id). Weights
/// are written with round-trip precision.
pub fn write_graphml<W: Write>(n: &WeightedNetwork, mut out: W) -> io::Result<()> {
    let n = n.sorted_by_id();
    let keys: Vec<&str> = attribute_keys(&n).into_iter().collect();
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(out, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
    for (k, key) in keys.iter().enumerate() {
        writeln!(out, r#"  <key id="n{k}" for="node" attr.name="{}" attr.type="string"/>"#, xml_escape(key))?;
    }
    writeln!(out, r#"  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>"#)?;
    writeln!(out, r#"  <graph id="G" edgedefault="undirected">"#)?;
    for node in n.nodes() {
        write!(out, r#"    <node id="{}">"#, xml_escape(&node.id))?;
        for (k, key) in keys.iter().enumerate() {
            if let Some(v) = node.attributes.get(*key) {
                write!(out, r#"<data key="n{k}">{}</data>"#, xml_escape(v))?;
            }
        }
        writeln!(out, "</node>")?;
    }
    for (i, j, w) in n.edges() {
        writeln!(
            out,
            r#"    <edge source="{}" target="{}"><data key="weight">{w:?}</data></edge>"#,
            xml_escape(&n.nodes()[i].id),
            xml_escape(&n.nodes()[j].id)
        )?;
    }
    writeln!(out, "  </graph>")?;
    writeln!(out, "</graphml>")
}

/// `source,target,weight` rows with six-decimal weights.
pub fn write_edge_csv<W: Write>(n: &WeightedNetwork, mut out: W) -> io::Result<()> {
    let n = n.sorted_by_id();
    writeln!(out, "source,target,weight")?;
    for (i, j, w) in n.edges() {
        writeln!(out, "{},{},{w:.6}", csv_field(&n.nodes()[i].id), csv_field(&n.nodes()[j].id))?;
    }
    Ok(())
}

/// `id,<attribute keys...>` rows, one per node.
pub fn write_node_csv<W: Write>(n: &WeightedNetwork, mut out: W) -> io::Result<()> {
    let n = n.sorted_by_id();
    let keys: Vec<&str> = attribute_keys(&n).into_iter().collect();
    write!(out, "id")?;
    for k in &keys {
        write!(out, ",{}", csv_field(k))?;
    }
    writeln!(out)?;
    for node in n.nodes() {
        write!(out, "{}", csv_field(&node.id))?;
        for k in &keys {
            write!(out, ",{}", csv_field(node.attributes.get(*k).map_or("", String::as_str)))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes `path` (GraphML) or `path` plus a `.nodes.csv` sidecar (edge CSV).
pub fn export_network(n: &WeightedNetwork, format: ExportFormat, path: &Path) -> Result<(), NetworkError> {
    let io_err = |p: &Path| {
        let p = p.display().to_string();
        move |source| NetworkError::Io { path: p, source }
    };
    let mut buf = Vec::new();
    match format {
        ExportFormat::GraphMl => write_graphml(n, &mut buf).map_err(io_err(path))?,
        ExportFormat::EdgeCsv => {
            write_edge_csv(n, &mut buf).map_err(io_err(path))?;
            let sidecar = node_csv_path(path);
            let mut nodes = Vec::new();
            write_node_csv(n, &mut nodes).map_err(io_err(&sidecar))?;
            fs::write(&sidecar, nodes).map_err(io_err(&sidecar))?;
        }
    }
    fs::write(path, buf).map_err(io_err(path))
}

/// `edges.csv` -> `edges.nodes.csv`.
pub fn node_csv_path(edge_csv: &Path) -> std::path::PathBuf {
    let stem = edge_csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    edge_csv.with_file_name(format!("{stem}.nodes.csv"))
}

/// Reads undirected GraphML: node `data` become string attributes, the edge
/// attribute named `weight` (default 1.0) becomes the edge weight.
pub fn parse_graphml(text: &str) -> Result<WeightedNetwork, NetworkError> {
    let err = |e: &dyn std::fmt::Display| NetworkError::GraphMl(e.to_string());
    let mut reader = Reader::from_str(text);

    let mut key_names: BTreeMap<String, String> = BTreeMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut edges: Vec<(String, String, f64)> = Vec::new();
    let mut weight_key: Option<String> = None;

    enum Ctx {
        None,
        Node,
        Edge,
    }
    let mut ctx = Ctx::None;
    let mut data_key: Option<String> = None;
    let mut data_text = String::new();

    loop {
        let event = reader.read_event().map_err(|e| err(&e))?;
        match event {
            Event::Eof => break,
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let mut attrs = BTreeMap::new();
                for a in e.attributes() {
                    let a = a.map_err(|e| err(&e))?;
                    let k = String::from_utf8_lossy(a.key.as_ref()).into_owned();
                    let v = a.unescape_value().map_err(|e| err(&e))?.into_owned();
                    attrs.insert(k, v);
                }
                match e.name().as_ref() {
                    b"key" => {
                        let id = attrs.get("id").cloned().ok_or_else(|| err(&"key without id"))?;
                        let name = attrs.get("attr.name").cloned().unwrap_or_else(|| id.clone());
                        if name == "weight" && attrs.get("for").is_none_or(|f| f == "edge" || f == "all") {
                            weight_key = Some(id.clone());
                        }
                        key_names.insert(id, name);
                    }
                    b"graph" => {
                        if attrs.get("edgedefault").is_some_and(|d| d == "directed") {
                            return Err(err(&"directed graphs are not supported"));
                        }
                    }
                    b"node" => {
                        let id = attrs.get("id").cloned().ok_or_else(|| err(&"node without id"))?;
                        nodes.push(Node { id, attributes: BTreeMap::new() });
                        if !is_empty {
                            ctx = Ctx::Node;
                        }
                    }
                    b"edge" => {
                        let s = attrs.get("source").cloned().ok_or_else(|| err(&"edge without source"))?;
                        let t = attrs.get("target").cloned().ok_or_else(|| err(&"edge without target"))?;
                        edges.push((s, t, 1.0));
                        if !is_empty {
                            ctx = Ctx::Edge;
                        }
                    }
                    b"data" if !is_empty => {
                        data_key = attrs.get("key").cloned();
                        data_text.clear();
                    }
                    _ => {}
                }
            }
            Event::Text(t) if data_key.is_some() => {
                data_text.push_str(&t.decode().map_err(|e| err(&e))?);
            }
            Event::GeneralRef(r) if data_key.is_some() => {
                if let Some(c) = r.resolve_char_ref().map_err(|e| err(&e))? {
                    data_text.push(c);
                } else {
                    let name = r.decode().map_err(|e| err(&e))?;
                    let resolved = quick_xml::escape::resolve_predefined_entity(&name)
                        .ok_or_else(|| err(&format!("unknown entity &{name};")))?;
                    data_text.push_str(resolved);
                }
            }
            Event::End(ref e) => match e.name().as_ref() {
                b"data" => {
                    if let Some(key) = data_key.take() {
                        let value = std::mem::take(&mut data_text);
                        match ctx {
                            Ctx::Node => {
                                let name = key_names.get(&key).cloned().unwrap_or(key);
                                nodes.last_mut().expect("inside node").attributes.insert(name, value);
                            }
                            Ctx::Edge if weight_key.as_deref() == Some(key.as_str()) => {
                                let w: f64 = value
                                    .trim()
                                    .parse()
                                    .map_err(|e| err(&format!("bad weight {value:?}: {e}")))?;
                                edges.last_mut().expect("inside edge").2 = w;
                            }
                            _ => {}
                        }
                    }
                }
                b"node" | b"edge" => ctx = Ctx::None,
                _ => {}
            },
            _ => {}
        }
    }
    let mut net = WeightedNetwork::new(nodes)?;
    for (s, t, w) in edges {
        let i = net.index_of(&s).ok_or(NetworkError::UnknownNode(s))?;
        let j = net.index_of(&t).ok_or(NetworkError::UnknownNode(t))?;
        net.set_weight(i, j, w)?;
    }
    Ok(net)
}

pub fn read_graphml(path: &Path) -> Result<WeightedNetwork, NetworkError> {
    let text = fs::read_to_string(path)
        .map_err(|source| NetworkError::Io { path: path.display().to_string(), source })?;
    parse_graphml(&text)
}
