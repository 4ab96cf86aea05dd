//! Mini-batch training of both alignment heads with Adam.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::losses::{gera_batch_loss, AlignmentData, BatchLossReport, LossConfig};
use crate::neighborhood::Strategy;
use crate::network::{decode_mlp, encode_mlp, init_mlp, MlpGrads, MlpParams};
use crate::store::PairIndex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 2e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of updates applied so far.
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || state.m.len() != state.v.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub hidden: Vec<usize>,
    pub out_dim: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Pin every parallel section to one thread.
    pub deterministic: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 2000,
            epochs: 50,
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            hidden: vec![8000],
            out_dim: 768,
            dropout: 0.3,
            seed: 0,
            deterministic: false,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`], in rendering order.
pub const CONFIG_KEYS: &[&str] = &[
    "batch_size",
    "learning_rate",
    "epochs",
    "beta1",
    "beta2",
    "adam_eps",
    "hidden",
    "out_dim",
    "dropout",
    "temperature",
    "alpha",
    "kernel",
    "epsilon",
    "epsilon_aligned",
    "k",
    "pool_size",
    "strategy",
    "seed",
    "deterministic",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{key} = {value:?}: {e}")))
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "learning_rate" => self.adam.learning_rate = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "beta1" => self.adam.beta1 = parse_value(key, value)?,
            "beta2" => self.adam.beta2 = parse_value(key, value)?,
            "adam_eps" => self.adam.eps = parse_value(key, value)?,
            "hidden" => {
                self.hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|v| parse_value(key, v.trim())).collect::<Result<_>>()?
                }
            }
            "out_dim" => self.out_dim = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "temperature" => self.loss.temperature = parse_value(key, value)?,
            "alpha" => self.loss.alpha = parse_value(key, value)?,
            "kernel" => self.loss.kernel.kind = value.parse::<KernelKind>()?,
            "epsilon" => self.loss.kernel.epsilon = parse_value(key, value)?,
            "epsilon_aligned" => self.loss.epsilon_aligned = parse_value(key, value)?,
            "k" => self.loss.neighbor.k = parse_value(key, value)?,
            "pool_size" => self.loss.neighbor.pool_size = parse_value(key, value)?,
            "strategy" => self.loss.neighbor.strategy = value.parse::<Strategy>()?,
            "seed" => self.seed = parse_value(key, value)?,
            "deterministic" => self.deterministic = parse_value(key, value)?,
            other => return Err(Error::InvalidConfig(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "batch_size" => self.batch_size.to_string(),
            "learning_rate" => self.adam.learning_rate.to_string(),
            "epochs" => self.epochs.to_string(),
            "beta1" => self.adam.beta1.to_string(),
            "beta2" => self.adam.beta2.to_string(),
            "adam_eps" => self.adam.eps.to_string(),
            "hidden" => self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
            "out_dim" => self.out_dim.to_string(),
            "dropout" => self.dropout.to_string(),
            "temperature" => self.loss.temperature.to_string(),
            "alpha" => self.loss.alpha.to_string(),
            "kernel" => self.loss.kernel.kind.to_string(),
            "epsilon" => self.loss.kernel.epsilon.to_string(),
            "epsilon_aligned" => self.loss.epsilon_aligned.to_string(),
            "k" => self.loss.neighbor.k.to_string(),
            "pool_size" => self.loss.neighbor.pool_size.to_string(),
            "strategy" => self.loss.neighbor.strategy.to_string(),
            "seed" => self.seed.to_string(),
            "deterministic" => self.deterministic.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("expected key = value, got {raw:?}"),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::InvalidConfig("batch_size must be >= 2".into()));
        }
        if !(self.adam.learning_rate >= 0.0 && self.adam.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::InvalidConfig("adam betas must lie in [0, 1)".into()));
        }
        if self.out_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        self.loss.validate()
    }

    pub fn layer_dims(&self, d_in: usize) -> Vec<usize> {
        let mut dims = vec![d_in];
        dims.extend(&self.hidden);
        dims.push(self.out_dim);
        dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSeeds {
    pub init_x: u64,
    pub init_y: u64,
    pub shuffle: u64,
    pub sampling: u64,
}

impl TrainSeeds {
    pub fn derive(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            init_x: rng.next_u64(),
            init_y: rng.next_u64(),
            shuffle: rng.next_u64(),
            sampling: rng.next_u64(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step: usize,
    pub report: BatchLossReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub epoch_seconds: Vec<f64>,
    pub seeds: TrainSeeds,
    pub batch_size: usize,
}

impl TrainLog {
    pub fn epoch_mean_total(&self, epoch: usize) -> Option<f64> {
        let totals: Vec<f64> =
            self.steps.iter().filter(|s| s.epoch == epoch).map(|s| s.report.total).collect();
        (!totals.is_empty()).then(|| totals.iter().sum::<f64>() / totals.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,step,total,contrastive_xy,contrastive_yx,geo_x,geo_y,skipped\n");
        for s in &self.steps {
            let r = &s.report;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.epoch, s.step, r.total, r.contrastive_xy, r.contrastive_yx, r.geo_x, r.geo_y, r.skipped
            );
        }
        out
    }

    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,seconds,mean_total\n");
        for (e, secs) in self.epoch_seconds.iter().enumerate() {
            let mean = self.epoch_mean_total(e).unwrap_or(f64::NAN);
            let _ = writeln!(out, "{e},{secs},{mean}");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params_x: MlpParams,
    pub params_y: MlpParams,
    pub log: TrainLog,
}

fn apply_adam(params: &mut MlpParams, grads: &MlpGrads, state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    let mut flat = params.to_flat();
    adam_update(&mut flat, &grads.to_flat(), state, cfg)?;
    params.set_flat(&flat);
    Ok(())
}

/// Trains both heads on shuffled mini-batches of `pairs`.
///
/// Each epoch drops its last incomplete batch; a batch size above the pair
/// count is reduced to the pair count.
pub fn train(data: &AlignmentData<'_>, pairs: &PairIndex, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if pairs.m() < 2 {
        return Err(Error::InvalidConfig(format!("need at least 2 pairs, got {}", pairs.m())));
    }
    if data.pool_a.n() != data.a.nrows() || data.pool_b.n() != data.b.nrows() {
        return Err(Error::InvalidConfig("neighbor pools do not cover the embeddings".into()));
    }
    if cfg.loss.alpha > 0.0 {
        let neighbor = &cfg.loss.neighbor;
        neighbor.validate(data.a.nrows().min(data.b.nrows()))?;
        if neighbor.pool_size > data.pool_a.pool_size().min(data.pool_b.pool_size()) {
            return Err(Error::InvalidConfig(format!(
                "pool_size {} exceeds the precomputed pools ({} / {})",
                neighbor.pool_size,
                data.pool_a.pool_size(),
                data.pool_b.pool_size()
            )));
        }
    }
    if cfg.deterministic {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| train_inner(data, pairs, cfg))
    } else {
        train_inner(data, pairs, cfg)
    }
}

fn train_inner(data: &AlignmentData<'_>, pairs: &PairIndex, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let batch_size = cfg.batch_size.min(pairs.m());
    if batch_size < cfg.batch_size {
        log::warn!("batch_size {} reduced to the {} available pairs", cfg.batch_size, pairs.m());
    }
    let seeds = TrainSeeds::derive(cfg.seed);
    let mut params_x = init_mlp(&cfg.layer_dims(data.a.ncols()), cfg.dropout, seeds.init_x)?;
    let mut params_y = init_mlp(&cfg.layer_dims(data.b.ncols()), cfg.dropout, seeds.init_y)?;
    let mut state_x = AdamState::new(params_x.param_count());
    let mut state_y = AdamState::new(params_y.param_count());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seeds.shuffle);
    let mut sampling_rng = ChaCha8Rng::seed_from_u64(seeds.sampling);

    let steps_per_epoch = pairs.m() / batch_size;
    let mut log = TrainLog {
        steps: Vec::with_capacity(cfg.epochs * steps_per_epoch),
        epoch_seconds: Vec::with_capacity(cfg.epochs),
        seeds,
        batch_size,
    };
    let mut order = pairs.pairs.clone();
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks_exact(batch_size) {
            let (report, gx, gy) =
                gera_batch_loss(batch, data, &params_x, &params_y, &cfg.loss, &mut sampling_rng)?;
            if !report.is_finite() {
                return Err(Error::NonFiniteLoss { step, report: format!("{report:?}") });
            }
            apply_adam(&mut params_x, &gx, &mut state_x, &cfg.adam)?;
            apply_adam(&mut params_y, &gy, &mut state_y, &cfg.adam)?;
            log.steps.push(StepRecord { epoch, step, report });
            step += 1;
        }
        log.epoch_seconds.push(started.elapsed().as_secs_f64());
        if let Some(mean) = log.epoch_mean_total(epoch) {
            log::debug!("epoch {epoch}: mean loss {mean:.6}");
        }
    }
    if !params_x.is_finite() || !params_y.is_finite() {
        return Err(Error::NonFiniteLoss { step, report: "parameters diverged".into() });
    }
    Ok(TrainOutcome { params_x, params_y, log })
}

pub fn encode_checkpoint(params_x: &MlpParams, params_y: &MlpParams) -> Vec<u8> {
    let mut out = Vec::new();
    encode_mlp(params_x, &mut out);
    encode_mlp(params_y, &mut out);
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(MlpParams, MlpParams)> {
    let mut pos = 0;
    let x = decode_mlp(bytes, &mut pos)?;
    let y = decode_mlp(bytes, &mut pos)?;
    Ok((x, y))
}

/// Writes both heads as two consecutive MLP1 records.
pub fn save_checkpoint(params_x: &MlpParams, params_y: &MlpParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(params_x, params_y)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(MlpParams, MlpParams)> {
    let path = path.as_ref();
    decode_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighborhood::build_knn_pool;
    use crate::network::predict;
    use crate::store::{synth_paired_dataset, SynthConfig};
    use nalgebra::DMatrix;

    #[test]
    fn adam_zero_gradient_keeps_params_and_decays_moments() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState { m: vec![0.5, -0.5], v: vec![0.25, 0.25], step: 3 };
        let cfg = AdamConfig::default();
        let before = p.clone();
        adam_update(&mut p, &[0.0, 0.0], &mut s, &cfg).unwrap();
        assert_eq!(s.m, vec![0.45, -0.45]);
        assert!((s.v[0] - 0.25 * 0.999).abs() < 1e-15);
        // Moments are nonzero, so params move, but the step came only from history.
        assert!(p.iter().zip(&before).all(|(a, b)| (a - b).abs() <= cfg.learning_rate * 2.0));

        let mut q = vec![3.0, 4.0];
        let mut fresh = AdamState::new(2);
        adam_update(&mut q, &[0.0, 0.0], &mut fresh, &cfg).unwrap();
        assert_eq!(q, vec![3.0, 4.0]);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let cfg = AdamConfig { learning_rate: 0.01, ..Default::default() };
        let mut p = vec![0.0; 4];
        let g = [3.0, -0.2, 1e-3, -50.0];
        adam_update(&mut p, &g, &mut AdamState::new(4), &cfg).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            assert!((pi + 0.01 * gi.signum()).abs() < 1e-7, "{pi}");
        }
        let mut wrong = AdamState::new(3);
        assert!(matches!(adam_update(&mut p, &g, &mut wrong, &cfg), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn adam_minimizes_quadratic() {
        // f(w) = |w|^2, gradient 2w; simulated directly.
        let cfg = AdamConfig { learning_rate: 0.1, ..Default::default() };
        let mut w = vec![1.0, 1.0];
        let mut s = AdamState::new(2);
        for _ in 0..100 {
            let g: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
            adam_update(&mut w, &g, &mut s, &cfg).unwrap();
        }
        let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
        assert!(norm < 0.05, "|w| = {norm}");
    }

    #[test]
    fn config_text_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.apply_text("# comment\nalpha = 0\nkernel=squared # trailing\nhidden = 64,32\nstrategy = uniform\n").unwrap();
        assert_eq!(cfg.loss.alpha, 0.0);
        assert_eq!(cfg.loss.kernel.kind, KernelKind::Squared);
        assert_eq!(cfg.hidden, vec![64, 32]);
        assert_eq!(cfg.loss.neighbor.strategy, Strategy::Uniform);
        let mut again = TrainConfig::default();
        again.apply_text(&cfg.render()).unwrap();
        assert_eq!(again, cfg);
        assert!(matches!(cfg.apply_text("nonsense = 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(cfg.apply_text("\nalpha"), Err(Error::Parse { line: 2, .. })));
    }

    struct Setup {
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        pool_a: crate::neighborhood::NeighborPool,
        pool_b: crate::neighborhood::NeighborPool,
    }

    fn setup(n: usize, seed: u64) -> Setup {
        let (a, b, _) = synth_paired_dataset(&SynthConfig {
            latent_dim: 4,
            n_points: n,
            d_a: 32,
            d_b: 48,
            noise_std: 0.05,
            seed,
        })
        .unwrap();
        Setup {
            pool_a: build_knn_pool(&a.values, 20).unwrap(),
            pool_b: build_knn_pool(&b.values, 20).unwrap(),
            a: a.values,
            b: b.values,
        }
    }

    fn small_cfg() -> TrainConfig {
        let mut cfg = TrainConfig {
            batch_size: 25,
            epochs: 3,
            hidden: vec![32],
            out_dim: 16,
            dropout: 0.1,
            seed: 5,
            ..Default::default()
        };
        cfg.adam.learning_rate = 1e-3;
        cfg.loss.temperature = 0.1;
        cfg.loss.neighbor = crate::neighborhood::NeighborConfig::with_k(5);
        cfg
    }

    #[test]
    fn zero_learning_rate_leaves_init_untouched() {
        let s = setup(200, 1);
        let data = AlignmentData { a: &s.a, b: &s.b, pool_a: &s.pool_a, pool_b: &s.pool_b };
        let mut cfg = small_cfg();
        cfg.adam.learning_rate = 0.0;
        let out = train(&data, &PairIndex::identity(100), &cfg).unwrap();
        let seeds = TrainSeeds::derive(cfg.seed);
        assert_eq!(out.params_x, init_mlp(&cfg.layer_dims(32), cfg.dropout, seeds.init_x).unwrap());
        assert_eq!(out.params_y, init_mlp(&cfg.layer_dims(48), cfg.dropout, seeds.init_y).unwrap());
        assert_eq!(out.log.steps.len(), 3 * 4);
    }

    #[test]
    fn deterministic_runs_repeat_exactly() {
        let s = setup(200, 2);
        let data = AlignmentData { a: &s.a, b: &s.b, pool_a: &s.pool_a, pool_b: &s.pool_b };
        let mut cfg = small_cfg();
        cfg.deterministic = true;
        let pairs = PairIndex::identity(90);
        let one = train(&data, &pairs, &cfg).unwrap();
        let two = train(&data, &pairs, &cfg).unwrap();
        assert_eq!(one.params_x, two.params_x);
        assert_eq!(one.params_y, two.params_y);
        assert_eq!(one.log.steps, two.log.steps);
        assert_eq!(one.log.seeds, two.log.seeds);
        // 90 pairs, batches of 25: the trailing 15 are dropped.
        assert_eq!(one.log.steps.len(), 3 * 3);
        for s in &one.log.steps {
            let r = s.report;
            assert!((r.total - (r.contrastive_xy + r.contrastive_yx + cfg.loss.alpha * (r.geo_x + r.geo_y))).abs() < 1e-10);
        }
        let parallel = train(&data, &pairs, &TrainConfig { deterministic: false, ..cfg.clone() }).unwrap();
        assert_eq!(parallel.params_x, one.params_x);
    }

    #[test]
    fn training_reduces_loss() {
        let s = setup(2000, 3);
        let data = AlignmentData { a: &s.a, b: &s.b, pool_a: &s.pool_a, pool_b: &s.pool_b };
        let mut cfg = small_cfg();
        cfg.epochs = 200;
        cfg.batch_size = 50;
        let a_before = s.a.clone();
        let out = train(&data, &PairIndex::identity(100), &cfg).unwrap();
        let first = out.log.epoch_mean_total(0).unwrap();
        let last = out.log.epoch_mean_total(cfg.epochs - 1).unwrap();
        assert!(last < first, "first {first}, last {last}");
        assert_eq!(s.a, a_before);
    }

    #[test]
    fn rejects_bad_configs() {
        let s = setup(100, 4);
        let data = AlignmentData { a: &s.a, b: &s.b, pool_a: &s.pool_a, pool_b: &s.pool_b };
        let pairs = PairIndex::identity(50);
        let mut cfg = small_cfg();
        cfg.batch_size = 1;
        assert!(matches!(train(&data, &pairs, &cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = small_cfg();
        cfg.loss.neighbor.pool_size = 40;
        assert!(matches!(train(&data, &pairs, &cfg), Err(Error::InvalidConfig(_))));
        assert!(matches!(train(&data, &PairIndex::identity(1), &small_cfg()), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("heads.ckpt");
        let px = init_mlp(&[32, 16, 8], 0.3, 1).unwrap();
        let py = init_mlp(&[48, 16, 8], 0.3, 2).unwrap();
        save_checkpoint(&px, &py, &path).unwrap();
        let (qx, qy) = load_checkpoint(&path).unwrap();
        assert_eq!((&qx, &qy), (&px, &py));
        let x = DMatrix::from_fn(5, 32, |r, c| ((r * 7 + c) as f64).sin());
        let (y1, y2) = (predict(&px, &x).unwrap(), predict(&qx, &x).unwrap());
        assert!(y1.iter().zip(y2.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));

        let bytes = fs::read(&path).unwrap();
        assert!(matches!(decode_checkpoint(&bytes[..bytes.len() / 2]), Err(Error::TruncatedFile { .. } | Error::BadMagic { .. })));
        assert!(matches!(decode_checkpoint(b"XXXX"), Err(Error::BadMagic { .. })));
    }
}
