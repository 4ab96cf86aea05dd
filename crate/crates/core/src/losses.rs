//! Contrastive alignment, geometric regularization and the combined
//! batch objective.
//!
//! The combined loss for a batch of `B` pairs is
//!
//! ```text
//! total = con(X, Y) + con(Y, X) + alpha * (geo(X) + geo(Y))
//! ```
//!
//! where `con` is a temperature-scaled softmax over cosine similarities
//! (summed over the batch, halved) and `geo` averages the squared Frobenius
//! distance between neighborhood encodings before and after alignment.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{encode_neighborhood, encode_neighborhood_grad, KernelConfig};
use crate::neighborhood::{sample_neighborhood, NeighborConfig, NeighborPool};
use crate::network::{backward, forward, MlpGrads, MlpParams, Mode};

const MIN_ROW_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub temperature: f64,
    pub alpha: f64,
    /// Encoding used in the frozen input spaces.
    pub kernel: KernelConfig,
    /// Heat scale in the aligned space; the kernel kind is shared.
    pub epsilon_aligned: f64,
    pub neighbor: NeighborConfig,
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature {} must be > 0", self.temperature)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha {} must be >= 0", self.alpha)));
        }
        self.kernel.validate()?;
        self.aligned_kernel().validate()
    }

    pub fn aligned_kernel(&self) -> KernelConfig {
        KernelConfig { kind: self.kernel.kind, epsilon: self.epsilon_aligned }
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            temperature: 0.04,
            alpha: 0.5,
            kernel: KernelConfig::heat(0.8),
            epsilon_aligned: 0.8,
            neighbor: NeighborConfig::with_k(150),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BatchLossReport {
    pub total: f64,
    pub contrastive_xy: f64,
    pub contrastive_yx: f64,
    pub geo_x: f64,
    pub geo_y: f64,
    /// Neighborhoods dropped because an encoding row was degenerate.
    pub skipped: usize,
}

impl BatchLossReport {
    pub fn is_finite(&self) -> bool {
        [self.total, self.contrastive_xy, self.contrastive_yx, self.geo_x, self.geo_y]
            .iter()
            .all(|v| v.is_finite())
    }
}

fn normalized_rows(z: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut u = z.clone();
    let mut norms = Vec::with_capacity(z.nrows());
    for (r, mut row) in u.row_iter_mut().enumerate() {
        let n = row.norm();
        if !(n >= MIN_ROW_NORM) {
            return Err(Error::ZeroVectorRow { row: r });
        }
        row /= n;
        norms.push(n);
    }
    Ok((u, norms))
}

/// Backpropagates through `u = z / |z|` row by row.
fn unnormalize_grad(grad_u: &DMatrix<f64>, u: &DMatrix<f64>, norms: &[f64]) -> DMatrix<f64> {
    let mut g = grad_u.clone();
    for (r, mut row) in g.row_iter_mut().enumerate() {
        let radial = row.dot(&u.row(r));
        row -= u.row(r) * radial;
        row /= norms[r];
    }
    g
}

/// One direction of the contrastive loss: row `i` of `zx` is the anchor and
/// row `i` of `zy` its positive, other rows of `zy` the negatives.
///
/// Returns the value and gradients with respect to both inputs.
pub fn contrastive_loss(
    zx: &DMatrix<f64>,
    zy: &DMatrix<f64>,
    temperature: f64,
) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    if zx.shape() != zy.shape() {
        return Err(Error::ShapeMismatch(format!(
            "contrastive inputs {:?} vs {:?}",
            zx.shape(),
            zy.shape()
        )));
    }
    let b = zx.nrows();
    let (ux, nx) = normalized_rows(zx)?;
    let (uy, ny) = normalized_rows(zy)?;
    let logits = (&ux * uy.transpose()) / temperature;

    let mut loss = 0.0;
    // dL/dlogits
    let mut g = DMatrix::zeros(b, b);
    for i in 0..b {
        let row = logits.row(i);
        let max = row.max();
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - logits[(i, i)];
        for j in 0..b {
            g[(i, j)] = 0.5 * (logits[(i, j)] - log_z).exp();
        }
        g[(i, i)] -= 0.5;
    }
    loss *= 0.5;
    g /= temperature;
    let grad_ux = &g * &uy;
    let grad_uy = g.tr_mul(&ux);
    Ok((loss, unnormalize_grad(&grad_ux, &ux, &nx), unnormalize_grad(&grad_uy, &uy, &ny)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricLoss {
    pub value: f64,
    /// Gradient per neighborhood, `None` where it was skipped.
    pub grads: Vec<Option<DMatrix<f64>>>,
    pub skipped: usize,
}

fn neighborhood_term(
    original: &DMatrix<f64>,
    aligned: &DMatrix<f64>,
    kernel: &KernelConfig,
    kernel_aligned: &KernelConfig,
    scale: f64,
) -> Result<Option<(f64, DMatrix<f64>)>> {
    let w_orig = match encode_neighborhood(original, kernel) {
        Ok(e) => e.w,
        Err(Error::DegenerateRow { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let w_aligned = match encode_neighborhood(aligned, kernel_aligned) {
        Ok(e) => e.w,
        Err(Error::DegenerateRow { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let diff = &w_aligned - &w_orig;
    let value = scale * diff.norm_squared();
    let upstream = diff * (2.0 * scale);
    let grad = encode_neighborhood_grad(aligned, kernel_aligned, &upstream)?;
    Ok(Some((value, grad)))
}

/// `(1/B) * sum |W(original_b) - W(aligned_b)|_F^2` with gradients flowing
/// into the aligned point sets only.
pub fn geometric_loss(
    original: &[DMatrix<f64>],
    aligned: &[DMatrix<f64>],
    kernel: &KernelConfig,
    kernel_aligned: &KernelConfig,
) -> Result<GeometricLoss> {
    if original.len() != aligned.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} original vs {} aligned neighborhoods",
            original.len(),
            aligned.len()
        )));
    }
    if original.is_empty() {
        return Ok(GeometricLoss { value: 0.0, grads: Vec::new(), skipped: 0 });
    }
    let scale = 1.0 / original.len() as f64;
    let terms = original
        .par_iter()
        .zip(aligned.par_iter())
        .map(|(o, a)| {
            if o.nrows() != a.nrows() {
                return Err(Error::ShapeMismatch(format!(
                    "neighborhood of {} original vs {} aligned points",
                    o.nrows(),
                    a.nrows()
                )));
            }
            neighborhood_term(o, a, kernel, kernel_aligned, scale)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = GeometricLoss { value: 0.0, grads: Vec::with_capacity(terms.len()), skipped: 0 };
    for term in terms {
        match term {
            Some((v, g)) => {
                out.value += v;
                out.grads.push(Some(g));
            }
            None => {
                out.skipped += 1;
                out.grads.push(None);
            }
        }
    }
    Ok(out)
}

/// Frozen inputs of one alignment problem.
#[derive(Debug, Clone, Copy)]
pub struct AlignmentData<'a> {
    pub a: &'a DMatrix<f64>,
    pub b: &'a DMatrix<f64>,
    pub pool_a: &'a NeighborPool,
    pub pool_b: &'a NeighborPool,
}

struct HeadPass {
    outputs: DMatrix<f64>,
    tape: crate::network::ForwardTape,
    /// Input rows of every neighborhood, `[center, neighbors...]`.
    neighborhoods: Vec<Vec<usize>>,
}

/// Forwards the batch centers, followed by every sampled neighbor, through
/// one head in a single pass. Center `c` of the batch is output row `c`;
/// its `k` neighbors occupy rows `B + c*k .. B + (c+1)*k`.
fn run_head<R: Rng + ?Sized>(
    params: &MlpParams,
    data: &DMatrix<f64>,
    pool: &NeighborPool,
    centers: &[usize],
    cfg: &LossConfig,
    rng: &mut R,
) -> Result<HeadPass> {
    let mut rows: Vec<usize> = centers.to_vec();
    let mut neighborhoods = Vec::new();
    if cfg.alpha > 0.0 {
        let samples: Vec<_> = centers
            .iter()
            .map(|&c| sample_neighborhood(pool, c, &cfg.neighbor, rng))
            .collect();
        for s in &samples {
            rows.extend_from_slice(&s.neighbors);
        }
        neighborhoods = samples.iter().map(|s| s.point_order()).collect();
    }
    let inputs = DMatrix::from_fn(rows.len(), data.ncols(), |r, c| data[(rows[r], c)]);
    let (outputs, tape) = forward(params, &inputs, Mode::Train, rng)?;
    Ok(HeadPass { outputs, tape, neighborhoods })
}

/// Adds `alpha * geo` terms for one head into `upstream`, returns `geo`.
fn geometric_head(
    pass: &HeadPass,
    data: &DMatrix<f64>,
    cfg: &LossConfig,
    upstream: &mut DMatrix<f64>,
) -> Result<(f64, usize)> {
    if pass.neighborhoods.is_empty() {
        return Ok((0.0, 0));
    }
    let b = pass.neighborhoods.len();
    let k = pass.neighborhoods[0].len() - 1;
    let out_rows = |c: usize| -> Vec<usize> { std::iter::once(c).chain(b + c * k..b + (c + 1) * k).collect() };
    let original: Vec<DMatrix<f64>> = pass
        .neighborhoods
        .iter()
        .map(|nb| DMatrix::from_fn(nb.len(), data.ncols(), |r, c| data[(nb[r], c)]))
        .collect();
    let aligned: Vec<DMatrix<f64>> = (0..b)
        .map(|c| {
            let rows = out_rows(c);
            DMatrix::from_fn(rows.len(), pass.outputs.ncols(), |r, col| pass.outputs[(rows[r], col)])
        })
        .collect();
    let geo = geometric_loss(&original, &aligned, &cfg.kernel, &cfg.aligned_kernel())?;
    for (c, grad) in geo.grads.iter().enumerate() {
        if let Some(grad) = grad {
            for (r, out_row) in out_rows(c).into_iter().enumerate() {
                for col in 0..grad.ncols() {
                    upstream[(out_row, col)] += cfg.alpha * grad[(r, col)];
                }
            }
        }
    }
    Ok((geo.value, geo.skipped))
}

/// Loss and parameter gradients of both heads for one batch of pairs.
pub fn gera_batch_loss<R: Rng + ?Sized>(
    batch: &[(usize, usize)],
    data: &AlignmentData<'_>,
    params_x: &MlpParams,
    params_y: &MlpParams,
    cfg: &LossConfig,
    rng: &mut R,
) -> Result<(BatchLossReport, MlpGrads, MlpGrads)> {
    cfg.validate()?;
    if params_x.d_out() != params_y.d_out() {
        return Err(Error::ShapeMismatch(format!(
            "heads map to {} and {} dimensions",
            params_x.d_out(),
            params_y.d_out()
        )));
    }
    let b = batch.len();
    let centers_a: Vec<usize> = batch.iter().map(|p| p.0).collect();
    let centers_b: Vec<usize> = batch.iter().map(|p| p.1).collect();
    let pass_x = run_head(params_x, data.a, data.pool_a, &centers_a, cfg, rng)?;
    let pass_y = run_head(params_y, data.b, data.pool_b, &centers_b, cfg, rng)?;

    let zx = pass_x.outputs.rows(0, b).into_owned();
    let zy = pass_y.outputs.rows(0, b).into_owned();
    let (c_xy, gx1, gy1) = contrastive_loss(&zx, &zy, cfg.temperature)?;
    let (c_yx, gy2, gx2) = contrastive_loss(&zy, &zx, cfg.temperature)?;

    let mut up_x = DMatrix::zeros(pass_x.outputs.nrows(), pass_x.outputs.ncols());
    let mut up_y = DMatrix::zeros(pass_y.outputs.nrows(), pass_y.outputs.ncols());
    up_x.rows_mut(0, b).copy_from(&(gx1 + gx2));
    up_y.rows_mut(0, b).copy_from(&(gy1 + gy2));
    let (geo_x, skipped_x) = geometric_head(&pass_x, data.a, cfg, &mut up_x)?;
    let (geo_y, skipped_y) = geometric_head(&pass_y, data.b, cfg, &mut up_y)?;

    let (grads_x, _) = backward(params_x, &pass_x.tape, &up_x)?;
    let (grads_y, _) = backward(params_y, &pass_y.tape, &up_y)?;
    let report = BatchLossReport {
        total: c_xy + c_yx + cfg.alpha * (geo_x + geo_y),
        contrastive_xy: c_xy,
        contrastive_yx: c_yx,
        geo_x,
        geo_y,
        skipped: skipped_x + skipped_y,
    };
    Ok((report, grads_x, grads_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;
    use crate::neighborhood::{build_knn_pool, Strategy};
    use crate::network::{finite_diff_check, init_mlp, GradCheckConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(r: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, d, |_, _| r.random_range(-1.0..1.0))
    }

    /// Direct transcription of the loss with explicit cosines and softmax.
    fn contrastive_oracle(zx: &DMatrix<f64>, zy: &DMatrix<f64>, t: f64) -> f64 {
        let b = zx.nrows();
        let cos = |i: usize, j: usize| {
            let (x, y) = (zx.row(i), zy.row(j));
            x.dot(&y) / (x.norm() * y.norm())
        };
        -0.5 * (0..b)
            .map(|i| {
                let num = (cos(i, i) / t).exp();
                let den: f64 = (0..b).map(|j| (cos(i, j) / t).exp()).sum();
                (num / den).ln()
            })
            .sum::<f64>()
    }

    #[test]
    fn singleton_batch_has_zero_loss() {
        let zx = DMatrix::from_row_slice(1, 3, &[1.0, 2.0, 3.0]);
        let zy = DMatrix::from_row_slice(1, 3, &[-1.0, 0.5, 0.0]);
        let (loss, gx, gy) = contrastive_loss(&zx, &zy, 0.04).unwrap();
        assert_eq!(loss, 0.0);
        assert!(gx.iter().chain(gy.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn orthonormal_pair_of_pairs() {
        let e = DMatrix::<f64>::identity(2, 2);
        let (loss, _, _) = contrastive_loss(&e, &e, 1.0).unwrap();
        let expected = -(std::f64::consts::E / (std::f64::consts::E + 1.0)).ln();
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn zero_row_fails_fast() {
        let zx = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let zy = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(contrastive_loss(&zx, &zy, 1.0), Err(Error::ZeroVectorRow { row: 1 })));
    }

    #[test]
    fn contrastive_matches_oracle_and_finite_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let (zx, zy) = (random_matrix(&mut r, 8, 16), random_matrix(&mut r, 8, 16));
        let t = 0.3;
        let (loss, gx, gy) = contrastive_loss(&zx, &zy, t).unwrap();
        assert!((loss - contrastive_oracle(&zx, &zy, t)).abs() < 1e-12);
        assert!(loss >= 0.0);

        let cfg = GradCheckConfig { samples: usize::MAX, ..Default::default() };
        let rx = finite_diff_check(zx.as_slice(), gx.as_slice(), |f| {
            contrastive_oracle(&DMatrix::from_column_slice(8, 16, f), &zy, t)
        }, &cfg);
        let ry = finite_diff_check(zy.as_slice(), gy.as_slice(), |f| {
            contrastive_oracle(&zx, &DMatrix::from_column_slice(8, 16, f), t)
        }, &cfg);
        assert!(rx.passed, "{rx:?}");
        assert!(ry.passed, "{ry:?}");

        // Scale invariance of cosine makes every gradient row orthogonal to its input row.
        for (z, g) in [(&zx, &gx), (&zy, &gy)] {
            for i in 0..8 {
                assert!(z.row(i).dot(&g.row(i)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn identity_and_isometric_alignment_have_zero_geometric_loss() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let original: Vec<_> = (0..5).map(|_| random_matrix(&mut r, 4, 3)).collect();
        let q = random_matrix(&mut r, 3, 3).qr().q();
        let shift = random_matrix(&mut r, 1, 3);
        let moved: Vec<_> = original
            .iter()
            .map(|p| {
                let mut m = p * q.transpose();
                for mut row in m.row_iter_mut() {
                    row += &shift;
                }
                m
            })
            .collect();
        for kind in KernelKind::ALL {
            let k = KernelConfig { kind, epsilon: 0.8 };
            assert_eq!(geometric_loss(&original, &original, &k, &k).unwrap().value, 0.0);
            let geo = geometric_loss(&original, &moved, &k, &k).unwrap();
            assert!(geo.value < 1e-12, "{kind}: {}", geo.value);
        }
    }

    #[test]
    fn squared_kernel_hand_computed_value() {
        let original = vec![DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 3.0])];
        let aligned = vec![DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 5.0])];
        // Raw squared distances: original [[0,1,9],[1,0,4],[9,4,0]],
        // aligned [[0,1,25],[1,0,16],[25,16,0]].
        let w_o: [[f64; 3]; 3] = [[0.0, 0.1, 0.9], [0.2, 0.0, 0.8], [9.0 / 13.0, 4.0 / 13.0, 0.0]];
        let w_a = [[0.0, 1.0 / 26.0, 25.0 / 26.0], [1.0 / 17.0, 0.0, 16.0 / 17.0], [25.0 / 41.0, 16.0 / 41.0, 0.0]];
        let expected: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| (w_o[i][j] - w_a[i][j]).powi(2))
            .sum();
        let k = KernelConfig { kind: KernelKind::Squared, epsilon: 1.0 };
        let geo = geometric_loss(&original, &aligned, &k, &k).unwrap();
        assert!((geo.value - expected).abs() < 1e-15);
        assert!(geo.value > 0.0);
    }

    #[test]
    fn degenerate_neighborhoods_are_skipped() {
        let original = vec![DMatrix::from_element(3, 2, 1.0), DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 2.0, 0.0, 0.0, 1.0])];
        let aligned = original.clone();
        let k = KernelConfig { kind: KernelKind::Linear, epsilon: 1.0 };
        let geo = geometric_loss(&original, &aligned, &k, &k).unwrap();
        assert_eq!(geo.skipped, 1);
        assert!(geo.grads[0].is_none() && geo.grads[1].is_some());
    }

    struct Fixture {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        pool_a: NeighborPool,
        pool_b: NeighborPool,
        px: MlpParams,
        py: MlpParams,
        batch: Vec<(usize, usize)>,
    }

    fn fixture(dims_a: &[usize], dims_b: &[usize], k: usize, seed: u64) -> Fixture {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let n = 30;
        let a = random_matrix(&mut r, n, dims_a[0]);
        let b = random_matrix(&mut r, n, dims_b[0]);
        Fixture {
            pool_a: build_knn_pool(&a, 4 * k).unwrap(),
            pool_b: build_knn_pool(&b, 4 * k).unwrap(),
            a,
            b,
            px: init_mlp(dims_a, 0.0, seed).unwrap(),
            py: init_mlp(dims_b, 0.0, seed + 1).unwrap(),
            batch: vec![(0, 3), (5, 1), (9, 9), (17, 20)],
        }
    }

    fn loss_cfg(alpha: f64, k: usize) -> LossConfig {
        LossConfig {
            temperature: 0.5,
            alpha,
            kernel: KernelConfig::heat(0.8),
            epsilon_aligned: 0.8,
            neighbor: NeighborConfig { k, pool_size: 4 * k, strategy: Strategy::Biased, seed: 0 },
        }
    }

    fn evaluate(f: &Fixture, px: &MlpParams, py: &MlpParams, cfg: &LossConfig) -> (BatchLossReport, MlpGrads, MlpGrads) {
        let data = AlignmentData { a: &f.a, b: &f.b, pool_a: &f.pool_a, pool_b: &f.pool_b };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        gera_batch_loss(&f.batch, &data, px, py, cfg, &mut rng).unwrap()
    }

    #[test]
    fn report_identity_and_alpha_zero() {
        let f = fixture(&[6, 10, 4], &[5, 10, 4], 3, 1);
        let (r0, _, _) = evaluate(&f, &f.px, &f.py, &loss_cfg(0.0, 3));
        assert_eq!(r0.total, r0.contrastive_xy + r0.contrastive_yx);
        assert_eq!((r0.geo_x, r0.geo_y), (0.0, 0.0));
        let (r, _, _) = evaluate(&f, &f.px, &f.py, &loss_cfg(0.5, 3));
        assert!((r.total - (r.contrastive_xy + r.contrastive_yx + 0.5 * (r.geo_x + r.geo_y))).abs() < 1e-10);
        assert!(r.geo_x > 0.0 && r.geo_y > 0.0);
        assert!((r.contrastive_xy - r0.contrastive_xy).abs() < 1e-12);
    }

    #[test]
    fn total_gradient_is_linear_in_alpha() {
        let f = fixture(&[6, 10, 4], &[5, 10, 4], 3, 2);
        let flat = |cfg: LossConfig| {
            let (_, gx, gy) = evaluate(&f, &f.px, &f.py, &cfg);
            let mut v = gx.to_flat();
            v.extend(gy.to_flat());
            v
        };
        let (g0, g1, gh) = (flat(loss_cfg(0.0, 3)), flat(loss_cfg(1.0, 3)), flat(loss_cfg(0.5, 3)));
        for i in 0..g0.len() {
            let expect = g0[i] + 0.5 * (g1[i] - g0[i]);
            assert!((gh[i] - expect).abs() < 1e-10 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn full_loss_gradient_check() {
        let f = fixture(&[6, 10, 4], &[6, 10, 4], 3, 3);
        let cfg = loss_cfg(0.5, 3);
        let (_, gx, gy) = evaluate(&f, &f.px, &f.py, &cfg);
        let mut x0 = f.px.to_flat();
        let split = x0.len();
        x0.extend(f.py.to_flat());
        let mut analytic = gx.to_flat();
        analytic.extend(gy.to_flat());
        let report = finite_diff_check(&x0, &analytic, |flat| {
            let (mut px, mut py) = (f.px.clone(), f.py.clone());
            px.set_flat(&flat[..split]);
            py.set_flat(&flat[split..]);
            evaluate(&f, &px, &py, &cfg).0.total
        }, &GradCheckConfig { samples: 200, tolerance: 1e-4, ..Default::default() });
        assert_eq!(report.checked, 200);
        assert!(report.passed, "{report:?}");
    }
}
