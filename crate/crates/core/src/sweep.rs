//! Threshold sensitivity: article networks over a (tau1, tau2) grid and the
//! mean distance between them.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::article_sim::Metric;
use crate::event::{EventError, EventScores};
use crate::matching::MatchParams;
use crate::networks::WeightedNetwork;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("networks have different node sets")]
    NodeSetMismatch,
    #[error("sweep needs at least one event")]
    NoEvents,
    #[error(transparent)]
    Event(#[from] EventError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    tau1_values: Vec<f64>,
    tau2_values: Vec<f64>,
}

impl SweepGrid {
    pub fn new(tau1_values: Vec<f64>, tau2_values: Vec<f64>) -> Result<Self, SweepError> {
        check_axis("tau1", &tau1_values, |v| v > 0.0 && v < 1.0)?;
        check_axis("tau2", &tau2_values, |v| v > 0.0 && v <= 1.0)?;
        Ok(Self { tau1_values, tau2_values })
    }

    pub fn tau1_values(&self) -> &[f64] {
        &self.tau1_values
    }

    pub fn tau2_values(&self) -> &[f64] {
        &self.tau2_values
    }
}

/// 0.1 to 0.9 in steps of 0.1, then 0.99, on both axes.
pub fn default_axis() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).chain([0.99]).collect()
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { tau1_values: default_axis(), tau2_values: default_axis() }
    }
}

fn check_axis(name: &str, values: &[f64], in_range: impl Fn(f64) -> bool) -> Result<(), SweepError> {
    if values.is_empty() {
        return Err(SweepError::InvalidGrid(format!("{name} has no values")));
    }
    if let Some(v) = values.iter().find(|v| !in_range(**v)) {
        return Err(SweepError::InvalidGrid(format!("{name} value {v} out of range")));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SweepError::InvalidGrid(format!("{name} values must be strictly ascending")));
    }
    Ok(())
}

/// Mean absolute weight difference over ordered off-diagonal pairs.
pub fn network_distance(a: &WeightedNetwork, b: &WeightedNetwork) -> Result<f64, SweepError> {
    if a.len() != b.len() || a.nodes().iter().zip(b.nodes()).any(|(x, y)| x.id != y.id) {
        return Err(SweepError::NodeSetMismatch);
    }
    let n = a.len();
    if n < 2 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += (a.weight(i, j) - b.weight(i, j)).abs();
            }
        }
    }
    Ok(sum / (n * (n - 1)) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Tau1,
    Tau2,
}

/// Square, symmetric matrix of mean distances over one axis' grid values.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceSurface {
    pub axis: Axis,
    pub grid: Vec<f64>,
    values: Vec<f64>,
}

impl DistanceSurface {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    /// Grid values label rows and columns; six decimals throughout.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let name = match self.axis {
            Axis::Tau1 => "tau1",
            Axis::Tau2 => "tau2",
        };
        write!(out, "{name}")?;
        for v in &self.grid {
            write!(out, ",{v:.6}")?;
        }
        writeln!(out)?;
        for (i, v) in self.grid.iter().enumerate() {
            write!(out, "{v:.6}")?;
            for j in 0..self.len() {
                write!(out, ",{:.6}", self.get(i, j))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Article networks for every grid cell, indexed `[tau1][tau2]`.
pub fn grid_networks(event: &EventScores, grid: &SweepGrid, metric: Metric) -> Result<Vec<Vec<WeightedNetwork>>, SweepError> {
    let cells: Vec<(usize, usize)> = (0..grid.tau1_values.len())
        .flat_map(|i| (0..grid.tau2_values.len()).map(move |j| (i, j)))
        .collect();
    let built = cells
        .par_iter()
        .map(|&(i, j)| {
            let p = MatchParams::new(grid.tau1_values[i], grid.tau2_values[j])
                .map_err(|e| SweepError::InvalidGrid(e.to_string()))?;
            Ok(event.article_network(&p, metric)?)
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    let mut rows = vec![Vec::with_capacity(grid.tau2_values.len()); grid.tau1_values.len()];
    for ((i, _), net) in cells.into_iter().zip(built) {
        rows[i].push(net);
    }
    Ok(rows)
}

/// Both surfaces, averaged with equal weight per event. Events are reduced
/// in id order, so the result does not depend on input order.
pub fn run_sweep(events: &[EventScores], grid: &SweepGrid, metric: Metric) -> Result<(DistanceSurface, DistanceSurface), SweepError> {
    if events.is_empty() {
        return Err(SweepError::NoEvents);
    }
    let mut ordered: Vec<&EventScores> = events.iter().collect();
    ordered.sort_by(|a, b| a.event_id.cmp(&b.event_id));
    let nets = ordered
        .iter()
        .map(|e| grid_networks(e, grid, metric))
        .collect::<Result<Vec<_>, _>>()?;

    let n1 = grid.tau1_values.len();
    let n2 = grid.tau2_values.len();
    let surface_tau1 = surface(Axis::Tau1, &grid.tau1_values, n2, |v, w, k| {
        nets.iter().map(|cells| network_distance(&cells[v][k], &cells[w][k])).collect()
    })?;
    let surface_tau2 = surface(Axis::Tau2, &grid.tau2_values, n1, |v, w, k| {
        nets.iter().map(|cells| network_distance(&cells[k][v], &cells[k][w])).collect()
    })?;
    Ok((surface_tau1, surface_tau2))
}

/// `distances(v, w, k)` gives per-event distances between axis values v and
/// w with the other axis fixed at its k-th value.
fn surface<F>(axis: Axis, grid: &[f64], others: usize, distances: F) -> Result<DistanceSurface, SweepError>
where
    F: Fn(usize, usize, usize) -> Result<Vec<f64>, SweepError> + Sync,
{
    let n = grid.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|v| ((v + 1)..n).map(move |w| (v, w))).collect();
    let means = pairs
        .par_iter()
        .map(|&(v, w)| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for k in 0..others {
                for d in distances(v, w, k)? {
                    sum += d;
                    count += 1;
                }
            }
            Ok(sum / count as f64)
        })
        .collect::<Result<Vec<f64>, SweepError>>()?;
    let mut values = vec![0.0; n * n];
    for (&(v, w), m) in pairs.iter().zip(means) {
        values[v * n + w] = m;
        values[w * n + v] = m;
    }
    Ok(DistanceSurface { axis, grid: grid.to_vec(), values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(n: usize, edges: &[(usize, usize, f64)]) -> WeightedNetwork {
        let mut g = WeightedNetwork::from_ids((0..n).map(|i| format!("n{i}"))).unwrap();
        for &(i, j, w) in edges {
            g.set_weight(i, j, w).unwrap();
        }
        g
    }

    #[test]
    fn distance_examples() {
        let k3 = net(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);
        assert_eq!(network_distance(&k3, &k3).unwrap(), 0.0);
        assert_eq!(network_distance(&k3, &net(3, &[])).unwrap(), 1.0);

        let a = net(4, &[(0, 1, 0.5), (2, 3, 1.0)]);
        let b = net(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        assert!((network_distance(&a, &b).unwrap() - 1.0 / 12.0).abs() < 1e-15);

        assert_eq!(network_distance(&net(1, &[]), &net(1, &[])).unwrap(), 0.0);
        assert!(matches!(network_distance(&net(2, &[]), &net(3, &[])), Err(SweepError::NodeSetMismatch)));
    }

    #[test]
    fn default_grid() {
        let g = SweepGrid::default();
        assert_eq!(g.tau1_values().len(), 10);
        assert_eq!(g.tau1_values()[0], 0.1);
        assert_eq!(g.tau1_values()[8], 0.9);
        assert_eq!(g.tau2_values()[9], 0.99);
    }

    #[test]
    fn grid_validation() {
        assert!(SweepGrid::new(vec![], vec![0.1]).is_err());
        assert!(SweepGrid::new(vec![0.5, 0.5], vec![0.1]).is_err());
        assert!(SweepGrid::new(vec![0.6, 0.5], vec![0.1]).is_err());
        assert!(SweepGrid::new(vec![1.0], vec![0.1]).is_err());
        assert!(SweepGrid::new(vec![0.5], vec![1.0]).is_ok());
        assert!(SweepGrid::new(vec![0.5], vec![0.0]).is_err());
    }

    #[test]
    fn surface_csv() {
        let s = DistanceSurface { axis: Axis::Tau1, grid: vec![0.1, 0.5], values: vec![0.0, 0.25, 0.25, 0.0] };
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "tau1,0.100000,0.500000\n0.100000,0.000000,0.250000\n0.500000,0.250000,0.000000\n"
        );
    }
}
