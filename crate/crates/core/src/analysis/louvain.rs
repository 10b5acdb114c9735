//! Two-phase Louvain modularity maximization on weighted undirected graphs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Partition;
use crate::networks::WeightedNetwork;

/// A level stops when its modularity gain is at most this.
pub const MIN_LEVEL_GAIN: f64 = 1e-9;
/// A node only moves when its gain beats staying by more than this.
const MOVE_EPS: f64 = 1e-12;

/// Compressed graph for one Louvain level. Neighbor lists exclude the node
/// itself; aggregated intra-community weight lives in `self_loop`.
#[derive(Debug, Clone)]
struct LevelGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    two_m: f64,
}

impl LevelGraph {
    fn len(&self) -> usize {
        self.adj.len()
    }

    fn from_network(n: &WeightedNetwork, order: &[usize]) -> Self {
        let k = order.len();
        let mut adj = vec![Vec::new(); k];
        for (a, &i) in order.iter().enumerate() {
            for (b, &j) in order.iter().enumerate() {
                let w = n.weight(i, j);
                if a != b && w > 0.0 {
                    adj[a].push((b, w));
                }
            }
        }
        let degree: Vec<f64> = adj.iter().map(|row| row.iter().map(|e| e.1).sum()).collect();
        let two_m = degree.iter().sum();
        Self { adj, self_loop: vec![0.0; k], degree, two_m }
    }

    /// Collapses each community into one node.
    fn aggregate(&self, community: &[usize], count: usize) -> Self {
        let mut weights = vec![std::collections::BTreeMap::<usize, f64>::new(); count];
        let mut self_loop = vec![0.0; count];
        for i in 0..self.len() {
            let ci = community[i];
            self_loop[ci] += self.self_loop[i];
            for &(j, w) in &self.adj[i] {
                let cj = community[j];
                if ci == cj {
                    self_loop[ci] += w;
                } else {
                    *weights[ci].entry(cj).or_default() += w;
                }
            }
        }
        let adj: Vec<Vec<(usize, f64)>> = weights.into_iter().map(|m| m.into_iter().collect()).collect();
        let degree = (0..count)
            .map(|c| self_loop[c] + adj[c].iter().map(|e| e.1).sum::<f64>())
            .collect();
        Self { adj, self_loop, degree, two_m: self.two_m }
    }
}

/// Per-community sums: `inner` is the ordered-pair weight inside the
/// community (self loops once), `total` the summed degree.
#[derive(Debug, Clone)]
pub(crate) struct Bookkeeping {
    inner: Vec<f64>,
    total: Vec<f64>,
    resolution: f64,
    two_m: f64,
}

impl Bookkeeping {
    fn singletons(g: &LevelGraph, resolution: f64) -> Self {
        Self { inner: g.self_loop.clone(), total: g.degree.clone(), resolution, two_m: g.two_m }
    }

    /// Sums for an arbitrary assignment; ids must be below the node count.
    fn from_partition(g: &LevelGraph, community: &[usize], resolution: f64) -> Self {
        let mut book = Self { inner: vec![0.0; g.len()], total: vec![0.0; g.len()], resolution, two_m: g.two_m };
        for i in 0..g.len() {
            let c = community[i];
            book.total[c] += g.degree[i];
            book.inner[c] += g.self_loop[i];
            book.inner[c] += g.adj[i].iter().filter(|e| community[e.0] == c).map(|e| e.1).sum::<f64>();
        }
        book
    }

    fn remove(&mut self, g: &LevelGraph, node: usize, community: usize, links_in: f64) {
        self.total[community] -= g.degree[node];
        self.inner[community] -= 2.0 * links_in + g.self_loop[node];
    }

    fn insert(&mut self, g: &LevelGraph, node: usize, community: usize, links_in: f64) {
        self.total[community] += g.degree[node];
        self.inner[community] += 2.0 * links_in + g.self_loop[node];
    }

    /// Gain of joining `community` relative to being alone, scaled by m.
    fn gain(&self, g: &LevelGraph, node: usize, community: usize, links_in: f64) -> f64 {
        links_in - self.resolution * self.total[community] * g.degree[node] / self.two_m
    }

    pub(crate) fn modularity(&self) -> f64 {
        if self.two_m <= 0.0 {
            return 0.0;
        }
        self.inner
            .iter()
            .zip(&self.total)
            .map(|(inner, total)| inner / self.two_m - self.resolution * (total / self.two_m).powi(2))
            .sum()
    }
}

/// Weight from one node to each neighboring community.
struct Neighbors {
    weight: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl Neighbors {
    fn new(communities: usize) -> Self {
        Self { weight: vec![0.0; communities], seen: vec![false; communities], touched: Vec::new() }
    }

    /// Leaves `touched` sorted ascending.
    fn collect(&mut self, g: &LevelGraph, node: usize, community: &[usize]) {
        for &c in &self.touched {
            self.weight[c] = 0.0;
            self.seen[c] = false;
        }
        self.touched.clear();
        for &(j, w) in &g.adj[node] {
            let c = community[j];
            if !self.seen[c] {
                self.seen[c] = true;
                self.touched.push(c);
            }
            self.weight[c] += w;
        }
        self.touched.sort_unstable();
    }
}

/// Local moving until a full pass makes no move. Returns whether any node moved.
fn local_moving(g: &LevelGraph, community: &mut [usize], book: &mut Bookkeeping, rng: Option<&mut ChaCha8Rng>) -> bool {
    let n = g.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut nb = Neighbors::new(n);
    let mut moved_any = false;
    let mut rng = rng;
    let mut size = vec![0usize; n];
    community.iter().for_each(|&c| size[c] += 1);
    loop {
        if let Some(r) = rng.as_deref_mut() {
            order.shuffle(r);
        }
        let mut moved = false;
        for &node in &order {
            nb.collect(g, node, community);
            let current = community[node];
            let links_current = nb.weight[current];
            book.remove(g, node, current, links_current);

            let mut best = current;
            let mut best_gain = book.gain(g, node, current, links_current);
            // `touched` is ascending, so ties keep the lowest community id.
            for &c in &nb.touched {
                if c == current {
                    continue;
                }
                let gain = book.gain(g, node, c, nb.weight[c]);
                if gain > best_gain + MOVE_EPS {
                    best = c;
                    best_gain = gain;
                }
            }
            // An empty community gains exactly zero.
            if best_gain < -MOVE_EPS {
                if let Some(empty) = size.iter().position(|&k| k == 0) {
                    best = empty;
                }
            }
            book.insert(g, node, best, nb.weight[best]);
            if best != current {
                size[current] -= 1;
                size[best] += 1;
                community[node] = best;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        moved_any = true;
    }
    moved_any
}

/// Renumbers communities contiguously by first appearance.
fn renumber(community: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for c in community.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

/// Independent visiting orders tried per call; the best partition wins.
pub const RESTARTS: usize = 8;

/// Louvain clustering.
///
/// With seed 0 the first run visits nodes in ascending id order and
/// equal-gain moves go to the lowest community id; the remaining
/// `RESTARTS - 1` runs shuffle the order from a fixed stream. A non-zero
/// seed shuffles every run from that seed. The best modularity wins, ties
/// going to the earliest run, so the result is deterministic in the graph
/// and seed. Isolated nodes stay singletons.
///
/// Within a run, once aggregation stalls the partition is projected back
/// down through every level with another round of local moving at each
/// one, and the run restarts from the refined partition until modularity
/// stops improving.
pub fn louvain(n: &WeightedNetwork, resolution: f64, seed: u64) -> Partition {
    assert!(resolution > 0.0, "resolution must be positive");
    let mut order: Vec<usize> = (0..n.len()).collect();
    order.sort_by(|&a, &b| n.nodes()[a].id.cmp(&n.nodes()[b].id));
    let base = LevelGraph::from_network(n, &order);

    // membership[k] is the community of original node order[k].
    let mut best: Vec<usize> = (0..order.len()).collect();
    if base.two_m > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best_q = f64::NEG_INFINITY;
        for run in 0..RESTARTS {
            let shuffled = seed != 0 || run > 0;
            let membership = single_run(&base, resolution, shuffled.then_some(&mut rng));
            let q = Bookkeeping::from_partition(&base, &membership, resolution).modularity();
            if q > best_q + MIN_LEVEL_GAIN {
                best_q = q;
                best = membership;
            }
        }
    }
    let ids = order.iter().map(|&i| n.nodes()[i].id.clone());
    Partition::from_labels(ids, best).expect("unique node ids")
}

fn single_run(base: &LevelGraph, resolution: f64, mut rng: Option<&mut ChaCha8Rng>) -> Vec<usize> {
    let mut membership: Vec<usize> = (0..base.len()).collect();
    let mut best = Bookkeeping::from_partition(base, &membership, resolution).modularity();
    loop {
        let mut candidate = membership.clone();
        let count = renumber(&mut candidate);
        let levels = coarsen(base.aggregate(&candidate, count), resolution, rng.as_deref_mut());
        candidate = refine(base, candidate, &levels, resolution, rng.as_deref_mut());
        renumber(&mut candidate);
        let q = Bookkeeping::from_partition(base, &candidate, resolution).modularity();
        if q - best <= MIN_LEVEL_GAIN {
            return membership;
        }
        best = q;
        membership = candidate;
    }
}

/// One coarsening level: the graph and the community of each of its nodes.
type Level = (LevelGraph, Vec<usize>);

/// Local moving and aggregation until a level gains nothing. The last
/// level's communities are the coarsest partition.
fn coarsen(mut graph: LevelGraph, resolution: f64, mut rng: Option<&mut ChaCha8Rng>) -> Vec<Level> {
    let mut levels = Vec::new();
    loop {
        let mut community: Vec<usize> = (0..graph.len()).collect();
        let mut book = Bookkeeping::singletons(&graph, resolution);
        let before = book.modularity();
        let moved = local_moving(&graph, &mut community, &mut book, rng.as_deref_mut());
        let gain = book.modularity() - before;
        let count = renumber(&mut community);
        if !moved || gain <= MIN_LEVEL_GAIN {
            levels.push((graph, community));
            return levels;
        }
        let next = graph.aggregate(&community, count);
        levels.push((graph, community));
        graph = next;
    }
}

/// Projects the coarsest partition down to `base`, local moving at each level.
fn refine(
    base: &LevelGraph,
    start: Vec<usize>,
    levels: &[Level],
    resolution: f64,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Vec<usize> {
    // Community of each node at the coarsest level.
    let mut labels = levels.last().map(|l| l.1.clone()).unwrap_or_default();
    for k in (0..levels.len()).rev() {
        let (graph, community) = &levels[k];
        let mut projected: Vec<usize> = community.iter().map(|&c| labels[c]).collect();
        if k + 1 < levels.len() {
            let mut book = Bookkeeping::from_partition(graph, &projected, resolution);
            local_moving(graph, &mut projected, &mut book, rng.as_deref_mut());
        }
        labels = projected;
    }
    // `labels` now covers the first level, whose nodes are `start`'s communities.
    let mut membership: Vec<usize> = start.iter().map(|&c| labels[c]).collect();
    let mut book = Bookkeeping::from_partition(base, &membership, resolution);
    local_moving(base, &mut membership, &mut book, rng);
    membership
}

/// Modularity through the same insert/remove bookkeeping Louvain uses:
/// start from singletons, move every node into its cluster, then sum
/// `inner/2m - γ(total/2m)^2` per community.
pub fn bookkeeping_modularity(n: &WeightedNetwork, p: &Partition, resolution: f64) -> Option<f64> {
    let order: Vec<usize> = (0..n.len()).collect();
    let g = LevelGraph::from_network(n, &order);
    let target: Vec<usize> = n.nodes().iter().map(|node| p.get(&node.id)).collect::<Option<_>>()?;
    // Community ids are node indices until moved; park targets past them.
    let mut community: Vec<usize> = order.clone();
    let mut book = Bookkeeping::singletons(&g, resolution);
    book.inner.resize(2 * n.len(), 0.0);
    book.total.resize(2 * n.len(), 0.0);
    let mut nb = Neighbors::new(2 * n.len());
    for node in 0..g.len() {
        nb.collect(&g, node, &community);
        let from = community[node];
        let to = n.len() + target[node];
        book.remove(&g, node, from, nb.weight[from]);
        book.insert(&g, node, to, nb.weight[to]);
        community[node] = to;
    }
    Some(book.modularity())
}
