//! Clustering and evaluation against bias labels.

mod ensemble;
mod louvain;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::article_sim::csv_field;
use crate::corpus::BiasScale;
use crate::networks::{WeightedNetwork, ATTR_BIAS};

pub use ensemble::{co_association, ensemble_clusters, CoAssociationLouvain, ConsensusMethod};
pub use louvain::{bookkeeping_modularity, louvain, MIN_LEVEL_GAIN, RESTARTS};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("partitions cover different node sets")]
    NodeSetMismatch,
    #[error("partition does not cover node {0:?}")]
    Uncovered(String),
    #[error("network has zero total edge weight")]
    ZeroWeight,
    #[error("duplicate node id {0:?} in partition")]
    DuplicateNode(String),
    #[error("node {node:?} has bias label {label:?} outside the scale")]
    UnknownLabel { node: String, label: String },
    #[error("ensemble needs at least two events, got {0}")]
    TooFewEvents(usize),
    #[error("empty domain set")]
    NoDomains,
    #[error("partition csv line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Node id to cluster id. Cluster ids are contiguous from 0, numbered by
/// first appearance in ascending node-id order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: BTreeMap<String, usize>,
}

impl Partition {
    pub fn from_labels<I, S, L>(ids: I, labels: L) -> Result<Self, AnalysisError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
        L: IntoIterator<Item = usize>,
    {
        let mut raw = BTreeMap::new();
        for (id, label) in ids.into_iter().zip(labels) {
            let id = id.into();
            if raw.contains_key(&id) {
                return Err(AnalysisError::DuplicateNode(id));
            }
            raw.insert(id, label);
        }
        let mut relabel = BTreeMap::new();
        let assignment = raw
            .into_iter()
            .map(|(id, label)| {
                let next = relabel.len();
                (id, *relabel.entry(label).or_insert(next))
            })
            .collect();
        Ok(Self { assignment })
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.assignment.values().max().map_or(0, |m| m + 1)
    }

    /// (node id, cluster) in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.assignment.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        self.assignment.keys().map(String::as_str)
    }

    /// Members of each cluster, clusters in id order.
    pub fn clusters(&self) -> Vec<Vec<&str>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (id, c) in self.iter() {
            out[c].push(id);
        }
        out
    }

    /// The partition on a subset of its nodes, relabeled contiguously.
    pub fn restrict<'a, I>(&self, ids: I) -> Result<Self, AnalysisError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut keep = Vec::new();
        let mut labels = Vec::new();
        for id in ids {
            let c = self.get(id).ok_or_else(|| AnalysisError::Uncovered(id.to_string()))?;
            keep.push(id.to_string());
            labels.push(c);
        }
        Self::from_labels(keep, labels)
    }

    /// `node_id,cluster` rows in id order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "node_id,cluster")?;
        for (id, c) in self.iter() {
            writeln!(out, "{},{c}", csv_field(id))?;
        }
        Ok(())
    }

    /// Reads the `node_id,cluster` format (ids without commas or quotes).
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self, AnalysisError> {
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let parse = |message: String| AnalysisError::Parse { line: i + 1, message };
            let line = line.map_err(|e| parse(e.to_string()))?;
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let (id, c) = line.rsplit_once(',').ok_or_else(|| parse("expected node_id,cluster".into()))?;
            ids.push(id.to_string());
            labels.push(c.trim().parse().map_err(|e| parse(format!("bad cluster {c:?}: {e}")))?);
        }
        Self::from_labels(ids, labels)
    }
}

/// Weighted modularity by direct double sum over node pairs:
/// `Q = 1/2m Σ_ij [W_ij - γ k_i k_j / 2m] δ(c_i, c_j)`.
pub fn modularity(n: &WeightedNetwork, p: &Partition, resolution: f64) -> Result<f64, AnalysisError> {
    let labels: Vec<usize> = n
        .nodes()
        .iter()
        .map(|node| p.get(&node.id).ok_or_else(|| AnalysisError::Uncovered(node.id.clone())))
        .collect::<Result<_, _>>()?;
    let degree: Vec<f64> = (0..n.len()).map(|i| n.degree(i)).collect();
    let two_m: f64 = degree.iter().sum();
    if two_m <= 0.0 {
        return Err(AnalysisError::ZeroWeight);
    }
    let mut q = 0.0;
    for i in 0..n.len() {
        for j in 0..n.len() {
            if labels[i] == labels[j] {
                q += n.weight(i, j) - resolution * degree[i] * degree[j] / two_m;
            }
        }
    }
    Ok(q / two_m)
}

fn pairs(x: u64) -> i128 {
    i128::from(x) * (i128::from(x) - 1) / 2
}

/// Adjusted Rand Index from the contingency table. Integer arithmetic up to
/// one final division, so symmetric cases come out exact. When the
/// expected and maximum index coincide (both partitions all-singletons or
/// both a single cluster) the result is 1.
pub fn adjusted_rand_index(p1: &Partition, p2: &Partition) -> Result<f64, AnalysisError> {
    if p1.len() != p2.len() || p1.node_ids().ne(p2.node_ids()) {
        return Err(AnalysisError::NodeSetMismatch);
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows = vec![0u64; p1.cluster_count()];
    let mut cols = vec![0u64; p2.cluster_count()];
    for ((_, a), (_, b)) in p1.iter().zip(p2.iter()) {
        *table.entry((a, b)).or_default() += 1;
        rows[a] += 1;
        cols[b] += 1;
    }
    let index: i128 = table.values().map(|&c| pairs(c)).sum();
    let sum_a: i128 = rows.iter().map(|&c| pairs(c)).sum();
    let sum_b: i128 = cols.iter().map(|&c| pairs(c)).sum();
    let total = pairs(p1.len() as u64);
    // ARI = (index - Ea*Eb/T) / ((Ea+Eb)/2 - Ea*Eb/T), scaled by 2T.
    let numerator = 2 * (index * total - sum_a * sum_b);
    let denominator = (sum_a + sum_b) * total - 2 * sum_a * sum_b;
    if denominator == 0 {
        return Ok(1.0);
    }
    Ok(numerator as f64 / denominator as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasLabels {
    /// Clusters over the labeled nodes, numbered like any [`Partition`].
    pub partition: Partition,
    /// Nodes with no label, in network order.
    pub excluded: Vec<String>,
}

/// Groups nodes by their `bias_label` attribute. Unlabeled nodes are
/// excluded rather than grouped.
pub fn bias_partition(n: &WeightedNetwork, scale: &BiasScale) -> Result<BiasLabels, AnalysisError> {
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut excluded = Vec::new();
    for node in n.nodes() {
        match node.attributes.get(ATTR_BIAS).map(String::as_str) {
            None | Some("") => excluded.push(node.id.clone()),
            Some(label) => {
                let level = scale.index_of(label).ok_or_else(|| AnalysisError::UnknownLabel {
                    node: node.id.clone(),
                    label: label.to_string(),
                })?;
                ids.push(node.id.clone());
                labels.push(level);
            }
        }
    }
    Ok(BiasLabels { partition: Partition::from_labels(ids, labels)?, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Article,
    Domain,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Level::Article => "article",
            Level::Domain => "domain",
        })
    }
}

/// One row of the clusters-versus-labels comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub event_id: String,
    pub level: Level,
    /// ARI between clusters and bias labels over labeled nodes; `None` when
    /// no node is labeled.
    pub ari: Option<f64>,
    /// Modularity of the bias labeling on the labeled subgraph; `None` when
    /// that subgraph has no edges.
    pub label_modularity: Option<f64>,
    pub cluster_count: usize,
    pub node_count: usize,
    pub excluded_count: usize,
}

pub fn evaluate(
    event_id: &str,
    level: Level,
    n: &WeightedNetwork,
    clusters: &Partition,
    scale: &BiasScale,
    resolution: f64,
) -> Result<EvaluationReport, AnalysisError> {
    let labels = bias_partition(n, scale)?;
    let labeled: Vec<&str> = labels.partition.node_ids().collect();
    let ari = if labeled.is_empty() {
        None
    } else {
        Some(adjusted_rand_index(&clusters.restrict(labeled.iter().copied())?, &labels.partition)?)
    };
    let keep: Vec<usize> = n
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, node)| labels.partition.get(&node.id).is_some())
        .map(|(i, _)| i)
        .collect();
    let label_modularity = match modularity(&n.subgraph(&keep), &labels.partition, resolution) {
        Ok(q) => Some(q),
        Err(AnalysisError::ZeroWeight) => None,
        Err(e) => return Err(e),
    };
    Ok(EvaluationReport {
        event_id: event_id.to_string(),
        level,
        ari,
        label_modularity,
        cluster_count: clusters.cluster_count(),
        node_count: n.len(),
        excluded_count: labels.excluded.len(),
    })
}

/// Set of nodes shared by all inputs, for callers aligning partitions.
pub fn common_nodes<'a>(parts: &[&'a Partition]) -> BTreeSet<&'a str> {
    let mut iter = parts.iter();
    let Some(first) = iter.next() else {
        return BTreeSet::new();
    };
    let mut common: BTreeSet<&str> = first.node_ids().collect();
    for p in iter {
        common.retain(|id| p.get(id).is_some());
    }
    common
}
