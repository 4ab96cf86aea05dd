//! Exact k-nearest-neighbor pools and the neighbor-sampling strategies.
//!
//! Every point gets a precomputed pool of its `pool_size` nearest neighbors
//! (squared Euclidean, ties by smaller index, self excluded). Training then
//! samples `k` of them per step with one of three strategies.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const KNN_MAGIC: [u8; 4] = *b"KNN1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// The `k` nearest pool entries, deterministically.
    Closest,
    /// `k` pool entries uniformly without replacement.
    Uniform,
    /// `k` pool entries without replacement, weight `1/rank`.
    Biased,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Closest, Strategy::Uniform, Strategy::Biased];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Closest => "closest",
            Strategy::Uniform => "uniform",
            Strategy::Biased => "biased",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closest" => Ok(Strategy::Closest),
            "uniform" => Ok(Strategy::Uniform),
            "biased" => Ok(Strategy::Biased),
            other => Err(Error::InvalidConfig(format!("unknown sampling strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborConfig {
    pub k: usize,
    pub pool_size: usize,
    pub strategy: Strategy,
    pub seed: u64,
}

impl NeighborConfig {
    /// Pool of `4 * k` candidates, biased sampling.
    pub fn with_k(k: usize) -> Self {
        Self { k, pool_size: 4 * k, strategy: Strategy::Biased, seed: 0 }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > self.pool_size {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= k <= pool_size, got k={} pool_size={}",
                self.k, self.pool_size
            )));
        }
        if self.pool_size >= n {
            return Err(Error::PoolTooLarge { pool_size: self.pool_size, n });
        }
        Ok(())
    }
}

/// Per-point candidate neighbors sorted by ascending squared distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPool {
    pool_size: usize,
    indices: Vec<u32>,
    distances: Vec<f64>,
}

impl NeighborPool {
    pub fn n(&self) -> usize {
        self.indices.len() / self.pool_size.max(1)
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    pub fn indices(&self, point: usize) -> &[u32] {
        &self.indices[point * self.pool_size..(point + 1) * self.pool_size]
    }

    pub fn distances(&self, point: usize) -> &[f64] {
        &self.distances[point * self.pool_size..(point + 1) * self.pool_size]
    }

    /// Keeps only the first `pool_size` entries of every row.
    pub fn truncated(&self, pool_size: usize) -> Result<Self> {
        if pool_size == 0 || pool_size > self.pool_size {
            return Err(Error::InvalidConfig(format!(
                "cannot truncate a pool of {} to {pool_size}",
                self.pool_size
            )));
        }
        let n = self.n();
        let mut indices = Vec::with_capacity(n * pool_size);
        let mut distances = Vec::with_capacity(n * pool_size);
        for p in 0..n {
            indices.extend_from_slice(&self.indices(p)[..pool_size]);
            distances.extend_from_slice(&self.distances(p)[..pool_size]);
        }
        Ok(Self { pool_size, indices, distances })
    }
}

/// Exact kNN pools over the rows of `points`.
pub fn build_knn_pool(points: &DMatrix<f64>, pool_size: usize) -> Result<NeighborPool> {
    let (n, d) = (points.nrows(), points.ncols());
    if pool_size == 0 {
        return Err(Error::InvalidConfig("pool_size must be positive".into()));
    }
    if pool_size >= n {
        return Err(Error::PoolTooLarge { pool_size, n });
    }
    let rows: Vec<f64> = points.transpose().as_slice().to_vec();
    let row = |i: usize| &rows[i * d..(i + 1) * d];

    let per_point: Vec<Vec<(f64, u32)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let query = row(i);
            let mut cand: Vec<(f64, u32)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist = query.iter().zip(row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    (dist, j as u32)
                })
                .collect();
            let cmp = |x: &(f64, u32), y: &(f64, u32)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
            if pool_size < cand.len() {
                cand.select_nth_unstable_by(pool_size - 1, cmp);
                cand.truncate(pool_size);
            }
            cand.sort_unstable_by(cmp);
            cand
        })
        .collect();

    let mut indices = Vec::with_capacity(n * pool_size);
    let mut distances = Vec::with_capacity(n * pool_size);
    for cand in per_point {
        for (dist, j) in cand {
            indices.push(j);
            distances.push(dist);
        }
    }
    Ok(NeighborPool { pool_size, indices, distances })
}

pub fn encode_pool(pool: &NeighborPool) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + pool.indices.len() * 12);
    out.extend_from_slice(&KNN_MAGIC);
    out.extend_from_slice(&(pool.n() as u64).to_le_bytes());
    out.extend_from_slice(&(pool.pool_size as u32).to_le_bytes());
    for (idx, dist) in pool.indices.iter().zip(&pool.distances) {
        out.extend_from_slice(&idx.to_le_bytes());
        out.extend_from_slice(&dist.to_le_bytes());
    }
    out
}

pub fn decode_pool(bytes: &[u8]) -> Result<NeighborPool> {
    if bytes.len() < 4 || bytes[..4] != KNN_MAGIC {
        return Err(Error::BadMagic { expected: KNN_MAGIC, found: bytes[..bytes.len().min(4)].to_vec() });
    }
    if bytes.len() < 16 {
        return Err(Error::TruncatedFile { expected: 16, found: bytes.len() as u64 });
    }
    let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let pool_size = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = 16 + (n * pool_size * 12) as u64;
    if (bytes.len() as u64) < expected {
        return Err(Error::TruncatedFile { expected, found: bytes.len() as u64 });
    }
    let mut indices = Vec::with_capacity(n * pool_size);
    let mut distances = Vec::with_capacity(n * pool_size);
    for chunk in bytes[16..expected as usize].chunks_exact(12) {
        indices.push(u32::from_le_bytes(chunk[..4].try_into().unwrap()));
        distances.push(f64::from_le_bytes(chunk[4..].try_into().unwrap()));
    }
    Ok(NeighborPool { pool_size, indices, distances })
}

pub fn save_pool(pool: &NeighborPool, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pool(pool)).map_err(|e| Error::io(path, e))
}

pub fn load_pool(path: impl AsRef<Path>) -> Result<NeighborPool> {
    let path = path.as_ref();
    decode_pool(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledNeighborhood {
    pub center: usize,
    pub neighbors: Vec<usize>,
}

impl SampledNeighborhood {
    /// `[center, neighbors...]`, the row order used for kernel encodings.
    pub fn point_order(&self) -> Vec<usize> {
        std::iter::once(self.center).chain(self.neighbors.iter().copied()).collect()
    }
}

/// Draws `cfg.k` neighbors of `center` from its pool.
///
/// Only the first `cfg.pool_size` pool entries are candidates. Sampled
/// neighbors are returned in pool-rank order.
pub fn sample_neighborhood<R: Rng + ?Sized>(
    pool: &NeighborPool,
    center: usize,
    cfg: &NeighborConfig,
    rng: &mut R,
) -> SampledNeighborhood {
    let all = pool.indices(center);
    let candidates = &all[..cfg.pool_size.clamp(1, all.len())];
    let k = cfg.k.min(candidates.len());
    let mut ranks: Vec<usize> = match cfg.strategy {
        Strategy::Closest => (0..k).collect(),
        Strategy::Uniform => rand::seq::index::sample(rng, candidates.len(), k).into_vec(),
        Strategy::Biased => {
            // Successive weighted draws without replacement.
            let mut weights: Vec<f64> = (1..=candidates.len()).map(|r| 1.0 / r as f64).collect();
            let mut total: f64 = weights.iter().sum();
            let mut picked = Vec::with_capacity(k);
            for _ in 0..k {
                let mut u = rng.random::<f64>() * total;
                let mut choice = None;
                for (r, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    choice = Some(r);
                    if u < w {
                        break;
                    }
                    u -= w;
                }
                let r = choice.expect("pool has remaining candidates");
                total -= weights[r];
                weights[r] = 0.0;
                picked.push(r);
            }
            picked
        }
    };
    ranks.sort_unstable();
    SampledNeighborhood {
        center,
        neighbors: ranks.into_iter().map(|r| candidates[r] as usize).collect(),
    }
}
