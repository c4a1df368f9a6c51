//! Multi-level k-way partitioning: coarsen by heavy-edge matching, grow an
//! initial partition on the coarsest graph, then uncoarsen with greedy
//! boundary refinement at every level. Presets trade effort for quality by
//! scaling the number of initial-partition seeds, refinement passes, and
//! V-cycle repetitions.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{balance_cap, Partition};
use crate::error::{Error, Result};
use crate::graph::PoseGraph;

/// Undirected weighted graph: vertex weights count merged poses, edge
/// weights count merged measurements.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    pub vertex_weights: Vec<i64>,
    /// adjacency[v] = sorted (neighbor, edge weight) pairs.
    pub adjacency: Vec<Vec<(u32, i64)>>,
}

impl WeightedGraph {
    pub fn num_vertices(&self) -> usize {
        self.vertex_weights.len()
    }

    pub fn total_vertex_weight(&self) -> i64 {
        self.vertex_weights.iter().sum()
    }

    /// Symmetrizes a pose graph: unit vertex weights, edge weight = number
    /// of directed measurements between the pair.
    pub fn from_pose_graph(graph: &PoseGraph) -> Self {
        let n = graph.num_nodes();
        let mut pair_weight = std::collections::BTreeMap::new();
        for (s, t) in graph.edge_indices() {
            let key = (s.min(t) as u32, s.max(t) as u32);
            *pair_weight.entry(key).or_insert(0i64) += 1;
        }
        let mut adjacency = vec![Vec::new(); n];
        for (&(u, v), &w) in &pair_weight {
            adjacency[u as usize].push((v, w));
            adjacency[v as usize].push((u, w));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self { vertex_weights: vec![1; n], adjacency }
    }

    /// Sum of edge weights crossing blocks (each undirected edge counted
    /// once).
    pub fn cut_weight(&self, assignment: &[u32]) -> i64 {
        let mut cut = 0;
        for (u, list) in self.adjacency.iter().enumerate() {
            for &(v, w) in list {
                if (v as usize) > u && assignment[u] != assignment[v as usize] {
                    cut += w;
                }
            }
        }
        cut
    }
}

/// Effort presets: (initial-partition seeds, refinement passes, V-cycles).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fast,
    Eco,
    Strong,
    Highest,
}

impl Preset {
    pub fn knobs(self) -> (usize, usize, usize) {
        match self {
            Preset::Fast => (4, 1, 1),
            Preset::Eco => (8, 2, 1),
            Preset::Strong => (16, 3, 2),
            Preset::Highest => (32, 4, 3),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fast => "fast",
            Preset::Eco => "eco",
            Preset::Strong => "strong",
            Preset::Highest => "highest",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Preset::Fast),
            "eco" => Ok(Preset::Eco),
            "strong" => Ok(Preset::Strong),
            "highest" => Ok(Preset::Highest),
            other => Err(Error::Param(format!("unknown preset {other:?}"))),
        }
    }
}

/// One coarsening step: maximal matching by descending edge rating
/// weight(e) / min(vw_u, vw_v), matched pairs merged with summed weights
/// and parallel edges collapsed. Returns the coarser graph and the
/// fine-to-coarse vertex map.
pub fn coarsen(g: &WeightedGraph) -> (WeightedGraph, Vec<u32>) {
    let n = g.num_vertices();
    let mut edges: Vec<(f64, u32, u32, i64)> = Vec::new();
    for (u, list) in g.adjacency.iter().enumerate() {
        for &(v, w) in list {
            if (v as usize) > u {
                let rating =
                    w as f64 / g.vertex_weights[u].min(g.vertex_weights[v as usize]) as f64;
                edges.push((rating, u as u32, v, w));
            }
        }
    }
    edges.sort_unstable_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut mate = vec![u32::MAX; n];
    for &(_, u, v, _) in &edges {
        if mate[u as usize] == u32::MAX && mate[v as usize] == u32::MAX {
            mate[u as usize] = v;
            mate[v as usize] = u;
        }
    }

    // coarse ids in order of the smaller endpoint
    let mut map = vec![u32::MAX; n];
    let mut next = 0u32;
    for u in 0..n {
        if map[u] != u32::MAX {
            continue;
        }
        map[u] = next;
        let m = mate[u];
        if m != u32::MAX {
            map[m as usize] = next;
        }
        next += 1;
    }

    let coarse_n = next as usize;
    let mut vertex_weights = vec![0i64; coarse_n];
    for u in 0..n {
        vertex_weights[map[u] as usize] += g.vertex_weights[u];
    }
    let mut pair_weight = std::collections::BTreeMap::new();
    for (u, list) in g.adjacency.iter().enumerate() {
        for &(v, w) in list {
            if (v as usize) > u {
                let (cu, cv) = (map[u], map[v as usize]);
                if cu != cv {
                    let key = (cu.min(cv), cu.max(cv));
                    *pair_weight.entry(key).or_insert(0i64) += w;
                }
            }
        }
    }
    let mut adjacency = vec![Vec::new(); coarse_n];
    for (&(u, v), &w) in &pair_weight {
        adjacency[u as usize].push((v, w));
        adjacency[v as usize].push((u, w));
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }

    (WeightedGraph { vertex_weights, adjacency }, map)
}

/// Greedy region growing from random seeds, repeated `attempts` times,
/// keeping the best valid assignment by cut weight.
pub fn initial_partition(
    g: &WeightedGraph,
    num_blocks: u32,
    epsilon: f64,
    attempts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<u32>> {
    let n = g.num_vertices();
    let nb = num_blocks as usize;
    let total = g.total_vertex_weight();
    let cap = balance_cap(total as usize, nb, epsilon);
    if let Some(v) = g.vertex_weights.iter().position(|&w| w as f64 > cap + 1e-9) {
        return Err(Error::Infeasible(format!(
            "vertex {v} weighs {} but the block cap is {cap:.2}",
            g.vertex_weights[v]
        )));
    }
    if nb > n {
        return Err(Error::Infeasible(format!(
            "cannot split {n} vertices into {nb} non-empty blocks"
        )));
    }
    if nb == 1 {
        return Ok(vec![0; n]);
    }

    let mut best: Option<(i64, Vec<u32>)> = None;
    for _ in 0..attempts.max(1) {
        if let Some(assignment) = grow_regions(g, nb, cap, rng) {
            let cut = g.cut_weight(&assignment);
            if best.as_ref().is_none_or(|(c, _)| cut < *c) {
                best = Some((cut, assignment));
            }
        }
    }
    if best.is_none() {
        // balance-first fallback: heaviest vertex to the lightest block
        if let Some(assignment) = balance_greedy(g, nb, cap) {
            let cut = g.cut_weight(&assignment);
            best = Some((cut, assignment));
        }
    }
    best.map(|(_, a)| a)
        .ok_or_else(|| Error::Infeasible("no balanced initial partition found".into()))
}

fn grow_regions(g: &WeightedGraph, nb: usize, cap: f64, rng: &mut ChaCha8Rng) -> Option<Vec<u32>> {
    let n = g.num_vertices();
    let mut assignment = vec![u32::MAX; n];
    let mut remaining: i64 = g.total_vertex_weight();
    let mut unassigned = n;

    for b in 0..nb - 1 {
        let target = remaining as f64 / (nb - b) as f64;
        // random unassigned seed
        let mut seed = rng.random_range(0..n);
        while assignment[seed] != u32::MAX {
            seed = rng.random_range(0..n);
        }
        assignment[seed] = b as u32;
        let mut weight = g.vertex_weights[seed];
        unassigned -= 1;

        // connectivity of unassigned vertices to the growing region
        let mut link = vec![0i64; n];
        for &(v, w) in &g.adjacency[seed] {
            if assignment[v as usize] == u32::MAX {
                link[v as usize] += w;
            }
        }
        while (weight as f64) < target && unassigned > nb - 1 - b {
            // best-connected feasible vertex; fall back to the smallest
            // unassigned id when the frontier is empty
            let mut pick: Option<(i64, usize)> = None;
            for v in 0..n {
                if assignment[v] != u32::MAX {
                    continue;
                }
                if weight as f64 + g.vertex_weights[v] as f64 > cap {
                    continue;
                }
                let key = (link[v], std::cmp::Reverse(v));
                if pick.is_none_or(|(bw, bv)| key > (bw, std::cmp::Reverse(bv))) {
                    pick = Some((link[v], v));
                }
            }
            let Some((_, v)) = pick else { break };
            assignment[v] = b as u32;
            weight += g.vertex_weights[v];
            unassigned -= 1;
            for &(u, w) in &g.adjacency[v] {
                if assignment[u as usize] == u32::MAX {
                    link[u as usize] += w;
                }
            }
        }
        remaining -= weight;
    }

    // last block takes the rest
    let mut last_weight = 0i64;
    for v in 0..n {
        if assignment[v] == u32::MAX {
            assignment[v] = (nb - 1) as u32;
            last_weight += g.vertex_weights[v];
        }
    }
    if last_weight == 0 || last_weight as f64 > cap + 1e-9 {
        return None;
    }
    // all blocks non-empty by construction of the seeds
    Some(assignment)
}

fn balance_greedy(g: &WeightedGraph, nb: usize, cap: f64) -> Option<Vec<u32>> {
    let n = g.num_vertices();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by_key(|&v| (std::cmp::Reverse(g.vertex_weights[v]), v));
    let mut loads = vec![0i64; nb];
    let mut counts = vec![0usize; nb];
    let mut assignment = vec![0u32; n];
    for v in order {
        let b = (0..nb)
            .min_by_key(|&b| (loads[b], b))
            .expect("at least one block");
        if loads[b] as f64 + g.vertex_weights[v] as f64 > cap + 1e-9 {
            return None;
        }
        assignment[v] = b as u32;
        loads[b] += g.vertex_weights[v];
        counts[b] += 1;
    }
    if counts.iter().any(|&c| c == 0) {
        return None;
    }
    Some(assignment)
}

/// Greedy boundary refinement: repeatedly applies the positive-gain move
/// that most reduces the cut without breaking balance, sweeping until no
/// improving move remains or `passes` sweeps are done. The cut never
/// increases.
pub fn refine(
    g: &WeightedGraph,
    assignment: &mut Vec<u32>,
    num_blocks: u32,
    epsilon: f64,
    passes: usize,
) {
    let n = g.num_vertices();
    let nb = num_blocks as usize;
    if nb <= 1 {
        return;
    }
    let total = g.total_vertex_weight();
    let cap = balance_cap(total as usize, nb, epsilon);

    let mut loads = vec![0i64; nb];
    let mut counts = vec![0usize; nb];
    for v in 0..n {
        loads[assignment[v] as usize] += g.vertex_weights[v];
        counts[assignment[v] as usize] += 1;
    }

    for _ in 0..passes.max(1) {
        let mut moved = false;
        let mut sweep = true;
        while sweep {
            sweep = false;
            // steepest feasible positive-gain move
            let mut best: Option<(i64, usize, usize)> = None;
            for v in 0..n {
                let own = assignment[v] as usize;
                if counts[own] <= 1 {
                    continue;
                }
                let mut w_to = vec![0i64; nb];
                for &(u, w) in &g.adjacency[v] {
                    w_to[assignment[u as usize] as usize] += w;
                }
                for t in 0..nb {
                    if t == own {
                        continue;
                    }
                    if loads[t] as f64 + g.vertex_weights[v] as f64 > cap + 1e-9 {
                        continue;
                    }
                    let gain = w_to[t] - w_to[own];
                    if gain > 0
                        && best.is_none_or(|(bg, bv, _)| (gain, std::cmp::Reverse(v)) > (bg, std::cmp::Reverse(bv)))
                    {
                        best = Some((gain, v, t));
                    }
                }
            }
            if let Some((_, v, t)) = best {
                let own = assignment[v] as usize;
                loads[own] -= g.vertex_weights[v];
                counts[own] -= 1;
                loads[t] += g.vertex_weights[v];
                counts[t] += 1;
                assignment[v] = t as u32;
                moved = true;
                sweep = true;
            }
        }
        if !moved {
            break;
        }
    }
}

/// Full V-cycle multi-level partitioning of a pose graph. Deterministic
/// given (graph, num_blocks, preset, epsilon, seed).
pub fn multilevel_partition(
    graph: &PoseGraph,
    num_blocks: u32,
    preset: Preset,
    epsilon: f64,
    seed: u64,
) -> Result<Partition> {
    let n = graph.num_nodes();
    if num_blocks == 0 || num_blocks as usize > n {
        return Err(Error::Infeasible(format!(
            "cannot split {n} nodes into {num_blocks} non-empty blocks"
        )));
    }
    if num_blocks == 1 {
        return Partition::new(vec![0; n], 1, epsilon);
    }
    let base = WeightedGraph::from_pose_graph(graph);
    let (seeds, passes, cycles) = preset.knobs();
    let threshold = 30 * num_blocks as usize;

    let mut best: Option<(i64, Vec<u32>)> = None;
    for cycle in 0..cycles {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(cycle as u64));

        // coarsening chain
        let mut levels: Vec<(WeightedGraph, Vec<u32>)> = Vec::new();
        let mut current = base.clone();
        while current.num_vertices() > threshold {
            let (coarse, map) = coarsen(&current);
            if coarse.num_vertices() as f64 > 0.95 * current.num_vertices() as f64 {
                break; // matching stalled
            }
            levels.push((std::mem::replace(&mut current, coarse), map));
        }

        let mut assignment = initial_partition(&current, num_blocks, epsilon, seeds, &mut rng)?;
        refine(&current, &mut assignment, num_blocks, epsilon, passes);

        // uncoarsen with refinement at each level
        while let Some((fine, map)) = levels.pop() {
            let mut fine_assignment = vec![0u32; fine.num_vertices()];
            for (v, &cv) in map.iter().enumerate() {
                fine_assignment[v] = assignment[cv as usize];
            }
            refine(&fine, &mut fine_assignment, num_blocks, epsilon, passes);
            assignment = fine_assignment;
        }

        let cut = base.cut_weight(&assignment);
        if best.as_ref().is_none_or(|(c, _)| cut < *c) {
            best = Some((cut, assignment));
        }
    }

    let (_, assignment) = best.expect("at least one cycle");
    Partition::new(assignment, num_blocks, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::synthetic::{generate, SyntheticConfig, SyntheticKind};
    use crate::partition::{metrics, sequential_partition};

    fn path_weighted(n: usize) -> WeightedGraph {
        let mut adjacency = vec![Vec::new(); n];
        for u in 0..n - 1 {
            adjacency[u].push(((u + 1) as u32, 1));
            adjacency[u + 1].push((u as u32, 1));
        }
        for l in &mut adjacency {
            l.sort_unstable();
        }
        WeightedGraph { vertex_weights: vec![1; n], adjacency }
    }

    #[test]
    fn coarsen_merges_one_pair_on_a_path_of_three() {
        let g = path_weighted(3);
        let (coarse, map) = coarsen(&g);
        assert_eq!(coarse.num_vertices(), 2);
        assert_eq!(map.len(), 3);
        assert_eq!(coarse.total_vertex_weight(), 3);
    }

    #[test]
    fn coarsen_contracts_the_heaviest_rated_edge_first() {
        // star 0-1 (weight 100), 0-2, 0-3 (weight 1)
        let mut adjacency = vec![Vec::new(); 4];
        for (v, w) in [(1u32, 100i64), (2, 1), (3, 1)] {
            adjacency[0].push((v, w));
            adjacency[v as usize].push((0, w));
        }
        for l in &mut adjacency {
            l.sort_unstable();
        }
        let g = WeightedGraph { vertex_weights: vec![1; 4], adjacency };
        let (_, map) = coarsen(&g);
        assert_eq!(map[0], map[1], "heavy edge must be contracted");
        assert_ne!(map[2], map[3], "0 is already matched, 2 and 3 stay apart");
    }

    #[test]
    fn coarsen_preserves_total_vertex_weight() {
        let data = generate(&SyntheticConfig {
            kind: SyntheticKind::Manhattan2d { width: 5, height: 5, steps: 19 },
            rot_noise: 0.01,
            trans_noise: 0.01,
            loop_probability: 0.7,
            seed: 2,
        })
        .unwrap();
        let g = WeightedGraph::from_pose_graph(&data.graph);
        let before = g.total_vertex_weight();
        let (coarse, _) = coarsen(&g);
        assert_eq!(coarse.total_vertex_weight(), before);
    }

    #[test]
    fn initial_partition_bisects_a_path_optimally() {
        let g = path_weighted(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = initial_partition(&g, 2, 0.0, 8, &mut rng).unwrap();
        assert_eq!(g.cut_weight(&a), 1);
    }

    #[test]
    fn initial_partition_single_block_is_trivial() {
        let g = path_weighted(5);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = initial_partition(&g, 1, 0.0, 4, &mut rng).unwrap();
        assert!(a.iter().all(|&b| b == 0));
    }

    #[test]
    fn initial_partition_rejects_oversized_vertices() {
        let mut g = path_weighted(3);
        g.vertex_weights = vec![10, 1, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            initial_partition(&g, 2, 0.0, 4, &mut rng),
            Err(Error::Infeasible(_))
        ));
    }

    /// Exhaustive optimum over balanced assignments (desk scale only).
    fn exhaustive_best_cut(g: &WeightedGraph, nb: usize, epsilon: f64) -> i64 {
        let n = g.num_vertices();
        let cap = balance_cap(g.total_vertex_weight() as usize, nb, epsilon);
        let mut best = i64::MAX;
        let mut assignment = vec![0u32; n];
        fn rec(
            v: usize,
            n: usize,
            nb: usize,
            cap: f64,
            g: &WeightedGraph,
            assignment: &mut Vec<u32>,
            loads: &mut Vec<i64>,
            best: &mut i64,
        ) {
            if v == n {
                if loads.iter().all(|&l| l > 0) {
                    let cut = g.cut_weight(assignment);
                    if cut < *best {
                        *best = cut;
                    }
                }
                return;
            }
            for b in 0..nb {
                if loads[b] as f64 + g.vertex_weights[v] as f64 > cap + 1e-9 {
                    continue;
                }
                assignment[v] = b as u32;
                loads[b] += g.vertex_weights[v];
                rec(v + 1, n, nb, cap, g, assignment, loads, best);
                loads[b] -= g.vertex_weights[v];
            }
        }
        let mut loads = vec![0i64; nb];
        rec(0, n, nb, cap, g, &mut assignment, &mut loads, &mut best);
        best
    }

    #[test]
    fn initial_partition_is_near_exhaustive_optimum_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // random connected 12-vertex graph
        let data = generate(&SyntheticConfig {
            kind: SyntheticKind::Manhattan2d { width: 4, height: 4, steps: 11 },
            rot_noise: 0.01,
            trans_noise: 0.01,
            loop_probability: 0.6,
            seed: 7,
        })
        .unwrap();
        let g = WeightedGraph::from_pose_graph(&data.graph);
        let opt = exhaustive_best_cut(&g, 3, 0.25);
        let mut a = initial_partition(&g, 3, 0.25, 16, &mut rng).unwrap();
        assert!(g.cut_weight(&a) >= opt, "oracle must lower-bound any valid cut");
        refine(&g, &mut a, 3, 0.25, 3);
        let refined = g.cut_weight(&a);
        assert!(
            refined <= opt + 2,
            "refined cut {refined} far above exhaustive optimum {opt}"
        );
    }

    #[test]
    fn refine_never_increases_cut_and_fixes_perturbed_bisections() {
        let g = path_weighted(6);
        let eps = 0.34; // allows 4-vertex blocks so single moves are feasible
        let mut perturbed = vec![0u32, 0, 1, 1, 0, 1];
        let before = g.cut_weight(&perturbed);
        refine(&g, &mut perturbed, 2, eps, 3);
        let after = g.cut_weight(&perturbed);
        assert!(after <= before);
        assert_eq!(after, exhaustive_best_cut(&g, 2, eps));

        // already optimal stays put
        let mut optimal = vec![0u32, 0, 0, 1, 1, 1];
        refine(&g, &mut optimal, 2, 0.0, 2);
        assert_eq!(optimal, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn refine_monotonicity_on_random_inputs() {
        let data = generate(&SyntheticConfig {
            kind: SyntheticKind::Manhattan2d { width: 6, height: 6, steps: 39 },
            rot_noise: 0.02,
            trans_noise: 0.02,
            loop_probability: 0.5,
            seed: 8,
        })
        .unwrap();
        let g = WeightedGraph::from_pose_graph(&data.graph);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let mut a: Vec<u32> = (0..g.num_vertices())
                .map(|_| rng.random_range(0..4u32))
                .collect();
            // patch empty blocks so the input is valid
            for b in 0..4 {
                if !a.contains(&b) {
                    let idx = rng.random_range(0..a.len());
                    a[idx] = b;
                }
            }
            let before = g.cut_weight(&a);
            refine(&g, &mut a, 4, 1.0, 2);
            assert!(g.cut_weight(&a) <= before);
        }
    }

    #[test]
    fn multilevel_single_block_and_determinism() {
        let data = generate(&SyntheticConfig {
            kind: SyntheticKind::Grid3d { nx: 3, ny: 3, nz: 2 },
            rot_noise: 0.05,
            trans_noise: 0.05,
            loop_probability: 0.4,
            seed: 10,
        })
        .unwrap();
        let p1 = multilevel_partition(&data.graph, 1, Preset::Fast, 0.05, 1).unwrap();
        assert!(p1.assignment.iter().all(|&b| b == 0));

        let a = multilevel_partition(&data.graph, 4, Preset::Eco, 0.05, 11).unwrap();
        let b = multilevel_partition(&data.graph, 4, Preset::Eco, 0.05, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multilevel_beats_sequential_on_lattice() {
        // 5x5 2D lattice-ish walk, N=5
        let data = generate(&SyntheticConfig {
            kind: SyntheticKind::Manhattan2d { width: 5, height: 5, steps: 60 },
            rot_noise: 0.02,
            trans_noise: 0.02,
            loop_probability: 0.8,
            seed: 12,
        })
        .unwrap();
        let ml = multilevel_partition(&data.graph, 5, Preset::Eco, 0.05, 13).unwrap();
        let seq = sequential_partition(&data.graph, 5).unwrap();
        let m_ml = metrics(&data.graph, &ml);
        let m_seq = metrics(&data.graph, &seq);
        assert!(
            m_ml.cut_edges <= m_seq.cut_edges,
            "multilevel {} vs sequential {}",
            m_ml.cut_edges,
            m_seq.cut_edges
        );
    }

    #[test]
    fn sequential_cut_exceeds_multilevel_on_cross_range_closures() {
        let data = generate(&SyntheticConfig {
            kind: SyntheticKind::Manhattan2d { width: 8, height: 8, steps: 220 },
            rot_noise: 0.02,
            trans_noise: 0.02,
            loop_probability: 0.6,
            seed: 14,
        })
        .unwrap();
        let ml = multilevel_partition(&data.graph, 5, Preset::Highest, 0.05, 15).unwrap();
        let seq = sequential_partition(&data.graph, 5).unwrap();
        assert!(metrics(&data.graph, &seq).cut_edges > metrics(&data.graph, &ml).cut_edges);
    }

    #[test]
    fn effort_ordering_holds_in_the_median() {
        let mut highest_cuts = Vec::new();
        let mut fast_cuts = Vec::new();
        for seed in 0..10u64 {
            let data = generate(&SyntheticConfig {
                kind: SyntheticKind::Manhattan2d { width: 10, height: 10, steps: 499 },
                rot_noise: 0.02,
                trans_noise: 0.02,
                loop_probability: 0.4,
                seed: 100 + seed,
            })
            .unwrap();
            let h = multilevel_partition(&data.graph, 5, Preset::Highest, 0.05, seed).unwrap();
            let f = multilevel_partition(&data.graph, 5, Preset::Fast, 0.05, seed).unwrap();
            highest_cuts.push(metrics(&data.graph, &h).cut_edges);
            fast_cuts.push(metrics(&data.graph, &f).cut_edges);
        }
        highest_cuts.sort_unstable();
        fast_cuts.sort_unstable();
        assert!(
            highest_cuts[5] <= fast_cuts[5],
            "median highest {} vs fast {}",
            highest_cuts[5],
            fast_cuts[5]
        );
    }
}
