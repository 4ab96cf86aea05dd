//! Row-normalized neighborhood encodings and their gradients.
//!
//! For a point set `x_0..x_K` every kind builds a raw kernel `K(i, j)` from
//! the squared distance `D(i, j) = |x_i - x_j|^2`, self-pairs included, and
//! normalizes each row to sum to one:
//!
//! | kind    | `K(i, j)`              |
//! |---------|------------------------|
//! | heat    | `exp(-D / (4 eps))`    |
//! | linear  | `sqrt(D)`              |
//! | squared | `D`                    |
//! | inverse | `1 / (1 + D)`          |

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Heat,
    Linear,
    Squared,
    Inverse,
}

impl KernelKind {
    pub const ALL: [KernelKind; 4] =
        [KernelKind::Heat, KernelKind::Linear, KernelKind::Squared, KernelKind::Inverse];
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Heat => "heat",
            KernelKind::Linear => "linear",
            KernelKind::Squared => "squared",
            KernelKind::Inverse => "inverse",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat" => Ok(KernelKind::Heat),
            "linear" => Ok(KernelKind::Linear),
            "squared" => Ok(KernelKind::Squared),
            "inverse" => Ok(KernelKind::Inverse),
            other => Err(Error::InvalidConfig(format!("unknown kernel kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// Heat-kernel scale; ignored by the other kinds.
    pub epsilon: f64,
}

impl KernelConfig {
    pub fn heat(epsilon: f64) -> Self {
        Self { kind: KernelKind::Heat, epsilon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Heat && !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon {} must be > 0", self.epsilon)));
        }
        Ok(())
    }

    fn value(&self, sq_dist: f64) -> f64 {
        match self.kind {
            KernelKind::Heat => (-sq_dist / (4.0 * self.epsilon)).exp(),
            KernelKind::Linear => sq_dist.sqrt(),
            KernelKind::Squared => sq_dist,
            KernelKind::Inverse => 1.0 / (1.0 + sq_dist),
        }
    }

    /// Coefficient `c` with `dK(i,j)/dx_i = c * (x_i - x_j)`.
    fn slope(&self, value: f64) -> f64 {
        match self.kind {
            KernelKind::Heat => -value / (2.0 * self.epsilon),
            // Subgradient 0 at coincident points.
            KernelKind::Linear => {
                if value > 0.0 {
                    1.0 / value
                } else {
                    0.0
                }
            }
            KernelKind::Squared => 2.0,
            KernelKind::Inverse => -2.0 * value * value,
        }
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self::heat(0.8)
    }
}

/// A `(K+1) x (K+1)` row-stochastic encoding of a point set.
///
/// Rows follow the order of the input points, `[center, neighbors...]`
/// wherever a sampled neighborhood is encoded.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodEncoding {
    pub w: DMatrix<f64>,
}

struct RawKernel {
    k: DMatrix<f64>,
    row_sums: Vec<f64>,
}

fn raw_kernel(points: &DMatrix<f64>, cfg: &KernelConfig) -> Result<RawKernel> {
    cfg.validate()?;
    let m = points.nrows();
    if m < 2 {
        return Err(Error::ShapeMismatch(format!("need at least 2 points, got {m}")));
    }
    let d = points.ncols();
    // Pairwise squared distances, symmetric.
    let mut diffs = vec![0.0; m * m];
    for i in 0..m {
        for j in (i + 1)..m {
            let mut s = 0.0;
            for c in 0..d {
                let t = points[(i, c)] - points[(j, c)];
                s += t * t;
            }
            diffs[i * m + j] = s;
            diffs[j * m + i] = s;
        }
    }
    let k = DMatrix::from_fn(m, m, |i, j| cfg.value(diffs[i * m + j]));
    let mut row_sums = Vec::with_capacity(m);
    for i in 0..m {
        let s: f64 = k.row(i).iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::DegenerateRow { row: i });
        }
        row_sums.push(s);
    }
    Ok(RawKernel { k, row_sums })
}

pub fn encode_neighborhood(
    points: &DMatrix<f64>,
    cfg: &KernelConfig,
) -> Result<NeighborhoodEncoding> {
    let raw = raw_kernel(points, cfg)?;
    let m = points.nrows();
    let w = DMatrix::from_fn(m, m, |i, j| raw.k[(i, j)] / raw.row_sums[i]);
    Ok(NeighborhoodEncoding { w })
}

/// Gradient of `<upstream, W(points)>` with respect to `points`.
pub fn encode_neighborhood_grad(
    points: &DMatrix<f64>,
    cfg: &KernelConfig,
    upstream: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let m = points.nrows();
    if upstream.shape() != (m, m) {
        return Err(Error::ShapeMismatch(format!(
            "upstream {:?} for {m} points",
            upstream.shape()
        )));
    }
    let raw = raw_kernel(points, cfg)?;
    // dL/dK(i,j) = (U(i,j) - sum_l U(i,l) W(i,l)) / s_i
    let mut dk = DMatrix::zeros(m, m);
    for i in 0..m {
        let s = raw.row_sums[i];
        let centered: f64 = (0..m).map(|l| upstream[(i, l)] * raw.k[(i, l)] / s).sum();
        for j in 0..m {
            dk[(i, j)] = (upstream[(i, j)] - centered) / s;
        }
    }
    let d = points.ncols();
    let mut grad = DMatrix::zeros(m, d);
    for i in 0..m {
        for j in (i + 1)..m {
            // K is symmetric, so both (i,j) and (j,i) entries share a slope.
            let coef = (dk[(i, j)] + dk[(j, i)]) * cfg.slope(raw.k[(i, j)]);
            if coef == 0.0 {
                continue;
            }
            for c in 0..d {
                let delta = coef * (points[(i, c)] - points[(j, c)]);
                grad[(i, c)] += delta;
                grad[(j, c)] -= delta;
            }
        }
    }
    Ok(grad)
}

/// Shannon entropy of each row's off-diagonal mass, renormalized.
pub fn off_diagonal_entropy(w: &DMatrix<f64>) -> Vec<f64> {
    (0..w.nrows())
        .map(|i| {
            let total: f64 = (0..w.ncols()).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
            (0..w.ncols())
                .filter(|&j| j != i)
                .map(|j| w[(i, j)] / total)
                .filter(|&p| p > 0.0)
                .map(|p| -p * p.ln())
                .sum()
        })
        .collect()
}
