//! Balanced k-way partitioning of the pose graph and partition-quality
//! metrics (cut edges, balance, communication-volume factor).
//!
//! The multi-level partitioner (coarsen / initial partition / refine) lives
//! in [`multilevel`]; this module holds the data model, the sequential
//! baseline that splits poses into contiguous index ranges, and the
//! metrics.

pub mod multilevel;

pub use multilevel::{multilevel_partition, Preset, WeightedGraph};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PoseGraph;

/// Default allowed imbalance fraction.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Assignment of pose nodes (dense indices) to blocks in [N].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// assignment[node] = block id.
    pub assignment: Vec<u32>,
    pub num_blocks: u32,
    /// Allowed imbalance fraction.
    pub epsilon: f64,
}

impl Partition {
    /// Validates the partition invariants: every node assigned to a block
    /// in range, no empty blocks, and max block size within
    /// (1 + epsilon) * ceil(total / N).
    pub fn new(assignment: Vec<u32>, num_blocks: u32, epsilon: f64) -> Result<Self> {
        if num_blocks == 0 {
            return Err(Error::Infeasible("need at least one block".into()));
        }
        if epsilon < 0.0 {
            return Err(Error::Param(format!("epsilon must be >= 0, got {epsilon}")));
        }
        let mut sizes = vec![0usize; num_blocks as usize];
        for (node, &b) in assignment.iter().enumerate() {
            if b >= num_blocks {
                return Err(Error::Infeasible(format!(
                    "node {node} assigned to block {b} of {num_blocks}"
                )));
            }
            sizes[b as usize] += 1;
        }
        if let Some(b) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Infeasible(format!("block {b} is empty")));
        }
        let cap = balance_cap(assignment.len(), num_blocks as usize, epsilon);
        let max = *sizes.iter().max().expect("non-empty");
        if max as f64 > cap + 1e-9 {
            return Err(Error::Infeasible(format!(
                "largest block has {max} nodes, cap is {cap:.2}"
            )));
        }
        Ok(Self { assignment, num_blocks, epsilon })
    }

    pub fn block_of(&self, node: usize) -> u32 {
        self.assignment[node]
    }

    /// Node lists per block, each sorted ascending.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.num_blocks as usize];
        for (node, &b) in self.assignment.iter().enumerate() {
            blocks[b as usize].push(node);
        }
        blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks().iter().map(Vec::len).collect()
    }
}

pub(crate) fn balance_cap(total: usize, num_blocks: usize, epsilon: f64) -> f64 {
    (1.0 + epsilon) * (total as f64 / num_blocks as f64).ceil()
}

/// Quality numbers of a partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionMetrics {
    /// Undirected edges whose endpoints lie in different blocks.
    pub cut_edges: usize,
    /// Max block weight over the ideal block weight.
    pub balance: f64,
    /// Communication-volume factor: mean over vertices of the number of
    /// external blocks the vertex has neighbors in.
    pub cvolume: f64,
}

/// Sequential baseline: contiguous global index ranges of near-equal size
/// (the first `total mod N` blocks get one extra node).
pub fn sequential_partition(graph: &PoseGraph, num_blocks: u32) -> Result<Partition> {
    let n = graph.num_nodes();
    if num_blocks == 0 || num_blocks as usize > n {
        return Err(Error::Infeasible(format!(
            "cannot split {n} nodes into {num_blocks} non-empty blocks"
        )));
    }
    let nb = num_blocks as usize;
    let base = n / nb;
    let extra = n % nb;
    let mut assignment = Vec::with_capacity(n);
    for b in 0..nb {
        let size = base + usize::from(b < extra);
        assignment.extend(std::iter::repeat_n(b as u32, size));
    }
    Partition::new(assignment, num_blocks, 0.0)
}

/// Computes cut edges, balance and communication volume for a partition of
/// the pose graph.
pub fn metrics(graph: &PoseGraph, partition: &Partition) -> PartitionMetrics {
    let assignment = &partition.assignment;
    let n = graph.num_nodes();

    // distinct undirected pairs crossing blocks
    let mut cut_pairs = std::collections::HashSet::new();
    for (s, t) in graph.edge_indices() {
        if assignment[s] != assignment[t] {
            cut_pairs.insert((s.min(t), s.max(t)));
        }
    }

    // external-block sets per vertex
    let adj = graph.undirected_adjacency();
    let mut external_total = 0usize;
    for v in 0..n {
        let mut ext = std::collections::HashSet::new();
        for &w in &adj[v] {
            if assignment[w] != assignment[v] {
                ext.insert(assignment[w]);
            }
        }
        external_total += ext.len();
    }

    let sizes = partition.block_sizes();
    let ideal = n as f64 / partition.num_blocks as f64;
    let balance = sizes.iter().copied().max().unwrap_or(0) as f64 / ideal;

    PartitionMetrics {
        cut_edges: cut_pairs.len(),
        balance,
        cvolume: external_total as f64 / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::g2o::parse_g2o_str;
    use crate::graph::synthetic::{generate, SyntheticConfig, SyntheticKind};

    fn path_graph(n: usize) -> PoseGraph {
        let mut text = String::new();
        for i in 0..n - 1 {
            text.push_str(&format!("EDGE_SE2 {i} {} 1 0 0 1 0 0 1 0 1\n", i + 1));
        }
        parse_g2o_str(&text).unwrap()
    }

    #[test]
    fn sequential_makes_contiguous_equal_blocks() {
        let g = path_graph(10);
        let p = sequential_partition(&g, 5).unwrap();
        assert_eq!(p.assignment, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
    }

    #[test]
    fn sequential_on_path_cuts_one_edge_per_boundary() {
        let g = path_graph(8);
        let p = sequential_partition(&g, 2).unwrap();
        let m = metrics(&g, &p);
        assert_eq!(m.cut_edges, 1);
        assert_eq!(m.balance, 1.0);
    }

    #[test]
    fn single_block_has_zero_cut_and_cvolume() {
        let g = path_graph(5);
        let p = sequential_partition(&g, 1).unwrap();
        let m = metrics(&g, &p);
        assert_eq!(m.cut_edges, 0);
        assert_eq!(m.cvolume, 0.0);
    }

    #[test]
    fn two_node_cut_metrics_by_hand() {
        let g = path_graph(2);
        let p = sequential_partition(&g, 2).unwrap();
        let m = metrics(&g, &p);
        assert_eq!(m.cut_edges, 1);
        // each vertex has one external partition: (1 + 1) / 2
        assert_eq!(m.cvolume, 1.0);
    }

    #[test]
    fn cvolume_matches_brute_force_recount() {
        let data = generate(&SyntheticConfig {
            kind: SyntheticKind::Manhattan2d { width: 6, height: 6, steps: 28 },
            rot_noise: 0.02,
            trans_noise: 0.02,
            loop_probability: 0.6,
            seed: 5,
        })
        .unwrap();
        let g = &data.graph;
        let n = g.num_nodes();
        let p = Partition::new((0..n).map(|i| (i % 3) as u32).collect(), 3, 0.5).unwrap();
        let m = metrics(g, &p);

        // independent recount straight from the edge list
        let mut per_vertex: Vec<std::collections::BTreeSet<u32>> = vec![Default::default(); n];
        for (s, t) in g.edge_indices() {
            if p.assignment[s] != p.assignment[t] {
                per_vertex[s].insert(p.assignment[t]);
                per_vertex[t].insert(p.assignment[s]);
            }
        }
        let expect: usize = per_vertex.iter().map(|s| s.len()).sum();
        assert_eq!(m.cvolume, expect as f64 / n as f64);
    }

    #[test]
    fn invalid_partitions_are_rejected() {
        assert!(Partition::new(vec![0, 0, 2], 2, 0.0).is_err()); // out of range
        assert!(Partition::new(vec![0, 0, 0], 2, 0.0).is_err()); // empty block
        assert!(Partition::new(vec![0, 0, 0, 1], 2, 0.0).is_err()); // imbalance
        assert!(Partition::new(vec![0, 0, 1, 1], 2, 0.0).is_ok());
    }
}
