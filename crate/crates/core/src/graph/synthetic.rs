//! Synthetic pose-graph generators at desk scale: a 3D grid with lattice
//! loop closures, a torus-surface lattice, and a Manhattan-style 2D random
//! walk with revisit loop closures.
//!
//! Every generator builds a ground-truth trajectory first, then derives
//! measurements from it: Rm = Ri' Rj Re and Tm = Ri'(Tj - Ti) + Te, so a
//! noiseless run is exactly consistent and has zero cost at ground truth.
//! Rotation noise is exp of a skew-symmetric Gaussian (a Langevin-style
//! sampler with concentration 1/rot_noise^2), translation noise is
//! Gaussian. Noise parameters are standard deviations — zero means exact
//! measurements — and the information weights are the matching inverse
//! variances (1.0 when noiseless).

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Edge, Measurement, Pose, PoseGraph, PoseId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// nx x ny x nz lattice traversed in a snake; closures between lattice
    /// neighbors that are not chain neighbors.
    Grid3d { nx: usize, ny: usize, nz: usize },
    /// major x minor lattice on a torus surface; wrap-around lattice edges
    /// appear as closures.
    Torus { major: usize, minor: usize },
    /// Random walk of `steps` moves on a width x height city grid; repeated
    /// visits to neighboring cells create long-range closures.
    Manhattan2d { width: usize, height: usize, steps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    /// Rotation noise standard deviation (radians); 0 = exact.
    pub rot_noise: f64,
    /// Translation noise standard deviation; 0 = exact.
    pub trans_noise: f64,
    /// Probability of adding each candidate loop-closure edge.
    pub loop_probability: f64,
    pub seed: u64,
}

pub struct SyntheticDataset {
    pub graph: PoseGraph,
    pub ground_truth: Vec<Pose>,
}

pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    if !(0.0..=1.0).contains(&cfg.loop_probability) {
        return Err(Error::Param(format!(
            "loop probability must be in [0,1], got {}",
            cfg.loop_probability
        )));
    }
    if cfg.rot_noise < 0.0 || cfg.trans_noise < 0.0 {
        return Err(Error::Param("noise standard deviations must be >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (dim, positions, chain, closures) = match cfg.kind {
        SyntheticKind::Grid3d { nx, ny, nz } => grid3d_skeleton(nx, ny, nz)?,
        SyntheticKind::Torus { major, minor } => torus_skeleton(major, minor)?,
        SyntheticKind::Manhattan2d { width, height, steps } => {
            manhattan_skeleton(width, height, steps, &mut rng)?
        }
    };

    let n = positions.len();
    let ground_truth: Vec<Pose> = positions
        .into_iter()
        .map(|p| Pose { rotation: random_rotation(dim, &mut rng), translation: p })
        .collect();

    let kappa = if cfg.rot_noise > 0.0 { 1.0 / (cfg.rot_noise * cfg.rot_noise) } else { 1.0 };
    let tau = if cfg.trans_noise > 0.0 { 1.0 / (cfg.trans_noise * cfg.trans_noise) } else { 1.0 };

    let make_edge = |i: usize, j: usize, rng: &mut ChaCha8Rng| -> Result<Edge> {
        let (pi, pj) = (&ground_truth[i], &ground_truth[j]);
        let noise_rot = noisy_rotation(dim, cfg.rot_noise, rng);
        let rel_rot = pi.rotation.transpose() * &pj.rotation * noise_rot;
        let mut rel_trans = pi.rotation.transpose() * (&pj.translation - &pi.translation);
        for k in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            rel_trans[k] += cfg.trans_noise * z;
        }
        Ok(Edge {
            src: PoseId::new(0, i as u32),
            dst: PoseId::new(0, j as u32),
            meas: Measurement::new(rel_rot, rel_trans, kappa, tau)?,
        })
    };

    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, j) in chain {
        seen.insert((i, j));
        edges.push(make_edge(i, j, &mut rng)?);
    }
    for (i, j) in closures {
        // sample first so the edge count consumes randomness deterministically
        let coin: f64 = rng.random();
        if coin < cfg.loop_probability && !seen.contains(&(j, i)) && seen.insert((i, j)) {
            edges.push(make_edge(i, j, &mut rng)?);
        }
    }

    debug_assert_eq!(ground_truth.len(), n);
    let graph = PoseGraph::new(dim, edges)?;
    Ok(SyntheticDataset { graph, ground_truth })
}

type Skeleton = (usize, Vec<DVector<f64>>, Vec<(usize, usize)>, Vec<(usize, usize)>);

fn grid3d_skeleton(nx: usize, ny: usize, nz: usize) -> Result<Skeleton> {
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(Error::Param("grid3d needs at least 2 nodes per axis".into()));
    }
    let idx = |x: usize, y: usize, z: usize| (z * ny + y) * nx + x;
    let mut order = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            // snake along x so consecutive chain nodes are lattice neighbors
            let ys = if z % 2 == 0 { y } else { ny - 1 - y };
            for x in 0..nx {
                let xs = if ys % 2 == 0 { x } else { nx - 1 - x };
                order.push((xs, ys, z));
            }
        }
    }
    let mut pos_of = vec![DVector::zeros(3); nx * ny * nz];
    let mut seq_of = vec![0usize; nx * ny * nz];
    for (seq, &(x, y, z)) in order.iter().enumerate() {
        pos_of[seq] = DVector::from_vec(vec![x as f64, y as f64, z as f64]);
        seq_of[idx(x, y, z)] = seq;
    }
    let chain: Vec<(usize, usize)> = (0..order.len() - 1).map(|k| (k, k + 1)).collect();
    let mut closures = Vec::new();
    for &(x, y, z) in &order {
        let a = seq_of[idx(x, y, z)];
        let mut push = |b: usize| {
            if a.abs_diff(b) > 1 {
                closures.push((a.min(b), a.max(b)));
            }
        };
        if x + 1 < nx {
            push(seq_of[idx(x + 1, y, z)]);
        }
        if y + 1 < ny {
            push(seq_of[idx(x, y + 1, z)]);
        }
        if z + 1 < nz {
            push(seq_of[idx(x, y, z + 1)]);
        }
    }
    closures.sort_unstable();
    closures.dedup();
    Ok((3, pos_of, chain, closures))
}

fn torus_skeleton(major: usize, minor: usize) -> Result<Skeleton> {
    if major < 3 || minor < 3 {
        return Err(Error::Param("torus needs at least 3 nodes per ring".into()));
    }
    let big_r = 2.0;
    let small_r = 0.8;
    let idx = |u: usize, v: usize| u * minor + v;
    let n = major * minor;
    let mut positions = vec![DVector::zeros(3); n];
    for u in 0..major {
        let phi = 2.0 * std::f64::consts::PI * u as f64 / major as f64;
        for v in 0..minor {
            let psi = 2.0 * std::f64::consts::PI * v as f64 / minor as f64;
            let ring = big_r + small_r * psi.cos();
            positions[idx(u, v)] = DVector::from_vec(vec![
                ring * phi.cos(),
                ring * phi.sin(),
                small_r * psi.sin(),
            ]);
        }
    }
    // chain: minor rings in sequence (u-major order)
    let chain: Vec<(usize, usize)> = (0..n - 1).map(|k| (k, k + 1)).collect();
    let mut closures = Vec::new();
    for u in 0..major {
        for v in 0..minor {
            let a = idx(u, v);
            for b in [idx((u + 1) % major, v), idx(u, (v + 1) % minor)] {
                if a.abs_diff(b) > 1 {
                    closures.push((a.min(b), a.max(b)));
                }
            }
        }
    }
    closures.sort_unstable();
    closures.dedup();
    Ok((3, positions, chain, closures))
}

fn manhattan_skeleton(
    width: usize,
    height: usize,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Skeleton> {
    if width < 2 || height < 2 {
        return Err(Error::Param("manhattan2d needs at least a 2x2 grid".into()));
    }
    if steps < 1 {
        return Err(Error::Param("manhattan2d needs at least one step".into()));
    }
    let n = steps + 1;
    let mut cells: Vec<(i64, i64)> = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let (mut cx, mut cy) = ((width / 2) as i64, (height / 2) as i64);
    let mut heading = 0usize;
    cells.push((cx, cy));
    positions.push(DVector::from_vec(vec![cx as f64, cy as f64]));
    const DIRS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
    for _ in 0..steps {
        // street-following walk: keep heading with high probability, turn
        // otherwise; never leave the city grid
        let in_bounds = |dir: usize| {
            let (nx, ny) = (cx + DIRS[dir].0, cy + DIRS[dir].1);
            nx >= 0 && ny >= 0 && (nx as usize) < width && (ny as usize) < height
        };
        let keep: f64 = rng.random();
        if keep >= 0.7 || !in_bounds(heading) {
            let options: Vec<usize> = (0..4).filter(|&d| d != heading && in_bounds(d)).collect();
            heading = options[rng.random_range(0..options.len())];
        }
        cx += DIRS[heading].0;
        cy += DIRS[heading].1;
        cells.push((cx, cy));
        positions.push(DVector::from_vec(vec![cx as f64, cy as f64]));
    }
    let chain: Vec<(usize, usize)> = (0..n - 1).map(|k| (k, k + 1)).collect();
    // candidate closures: earlier visits to the same or an adjacent cell
    let mut closures = Vec::new();
    for a in 0..n {
        for b in (a + 2)..n {
            let (ax, ay) = cells[a];
            let (bx, by) = cells[b];
            if (ax - bx).abs() + (ay - by).abs() <= 1 {
                closures.push((a, b));
            }
        }
    }
    Ok((2, positions, chain, closures))
}

/// Uniform-ish random rotation: polar factor of a Gaussian matrix with the
/// determinant sign corrected.
pub fn random_rotation(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(mut q) = crate::geometry::polar_factor(&a.as_view()) {
            if q.determinant() < 0.0 {
                // flip one column to land in SO(d)
                for k in 0..d {
                    q[(k, 0)] = -q[(k, 0)];
                }
            }
            return q;
        }
    }
}

/// Rotation noise: exp of a skew-symmetric matrix with Gaussian entries of
/// standard deviation `sigma`.
fn noisy_rotation(d: usize, sigma: f64, rng: &mut impl Rng) -> DMatrix<f64> {
    if sigma == 0.0 {
        return DMatrix::identity(d, d);
    }
    if d == 2 {
        let theta = sigma * rng.sample::<f64, _>(StandardNormal);
        let (s, c) = theta.sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    } else {
        let w = [
            sigma * rng.sample::<f64, _>(StandardNormal),
            sigma * rng.sample::<f64, _>(StandardNormal),
            sigma * rng.sample::<f64, _>(StandardNormal),
        ];
        rodrigues(&w)
    }
}

fn rodrigues(w: &[f64; 3]) -> DMatrix<f64> {
    let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let eye = DMatrix::identity(3, 3);
    if theta < 1e-14 {
        return eye;
    }
    let k = DMatrix::from_row_slice(
        3,
        3,
        &[0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0],
    ) / theta;
    &eye + &k * theta.sin() + &k * &k * (1.0 - theta.cos())
}
