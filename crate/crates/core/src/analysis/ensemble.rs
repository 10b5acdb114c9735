//! Consensus over per-event domain clusterings.

use std::collections::BTreeSet;

use super::{louvain, AnalysisError, Partition};
use crate::networks::WeightedNetwork;

/// Combines partitions that all cover the same node set.
pub trait ConsensusMethod {
    fn consensus(&self, partitions: &[Partition]) -> Result<Partition, AnalysisError>;
}

/// Louvain on the co-association matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoAssociationLouvain {
    pub resolution: f64,
    pub seed: u64,
}

impl Default for CoAssociationLouvain {
    fn default() -> Self {
        Self { resolution: 1.0, seed: 0 }
    }
}

impl ConsensusMethod for CoAssociationLouvain {
    fn consensus(&self, partitions: &[Partition]) -> Result<Partition, AnalysisError> {
        let m = co_association(partitions)?;
        Ok(louvain(&m, self.resolution, self.seed))
    }
}

/// `M_ij` = fraction of partitions placing i and j together, zero diagonal.
pub fn co_association(partitions: &[Partition]) -> Result<WeightedNetwork, AnalysisError> {
    let first = partitions.first().ok_or(AnalysisError::TooFewEvents(0))?;
    let ids: Vec<&str> = first.node_ids().collect();
    if partitions.iter().any(|p| p.len() != ids.len() || p.node_ids().ne(ids.iter().copied())) {
        return Err(AnalysisError::NodeSetMismatch);
    }
    let mut net = WeightedNetwork::from_ids(ids.iter().copied()).expect("partition ids are unique");
    let labels: Vec<Vec<usize>> = partitions.iter().map(|p| p.iter().map(|(_, c)| c).collect()).collect();
    let events = partitions.len() as f64;
    for i in 0..ids.len() {
        for j in (i + 1)..ids.len() {
            let shared = labels.iter().filter(|l| l[i] == l[j]).count();
            if shared > 0 {
                net.set_weight(i, j, shared as f64 / events).expect("valid weight");
            }
        }
    }
    Ok(net)
}

/// Extends each event's domain partition to `all_domains` (absent domains
/// become fresh singletons) and takes the co-association consensus.
pub fn ensemble_clusters(
    per_event: &[(String, Partition)],
    all_domains: &BTreeSet<String>,
    method: &dyn ConsensusMethod,
) -> Result<Partition, AnalysisError> {
    if all_domains.is_empty() {
        return Err(AnalysisError::NoDomains);
    }
    if per_event.len() < 2 {
        return Err(AnalysisError::TooFewEvents(per_event.len()));
    }
    let extended = per_event
        .iter()
        .map(|(_, p)| {
            if let Some(stray) = p.node_ids().find(|id| !all_domains.contains(*id)) {
                return Err(AnalysisError::Uncovered(stray.to_string()));
            }
            let mut next = p.cluster_count();
            let labels: Vec<usize> = all_domains
                .iter()
                .map(|d| {
                    p.get(d).unwrap_or_else(|| {
                        next += 1;
                        next - 1
                    })
                })
                .collect();
            Partition::from_labels(all_domains.iter().cloned(), labels)
        })
        .collect::<Result<Vec<_>, _>>()?;
    method.consensus(&extended)
}
