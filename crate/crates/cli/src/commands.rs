use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use gera_core::baselines::{procrustes_fit, save_procrustes, AsifModel};
use gera_core::eval::{
    bench_inference, class_prototypes, linear_fit, neighbor_rank_metric, precision_at_k, zero_shot_classify,
    AsifRetriever, Direction, HeadRetriever, MetricRecords,
};
use gera_core::kernels::KernelKind;
use gera_core::losses::AlignmentData;
use gera_core::neighborhood::{build_knn_pool, load_pool, save_pool, NeighborPool, Strategy};
use gera_core::network::{init_mlp, predict, MlpParams};
use gera_core::store::{
    l2_normalize, load_embeddings, load_pairs, save_embeddings, save_pairs, synth_paired_dataset, EmbeddingMatrix,
    PairIndex, SynthConfig,
};
use gera_core::trainer::{load_checkpoint, save_checkpoint, train as run_training, TrainConfig, TrainOutcome};
use gera_core::Error;
use nalgebra::DMatrix;

use crate::{
    BaselineArgs, BaselineKind, BenchArgs, CliError, CliResult, DataArgs, EvalArgs, KnnArgs, NormalizeArgs,
    SweepArgs, SynthArgs, TrainArgs, TrainFlags,
};

fn at(path: &Path) -> impl FnOnce(Error) -> CliError + '_ {
    move |source| match source {
        // Already names its path.
        Error::Io { .. } => CliError::Data(source),
        source => CliError::File { path: path.to_path_buf(), source },
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(())
}

fn make_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    Ok(())
}

fn parse_list<T: FromStr>(text: &str, flag: &str) -> CliResult<Vec<T>> {
    let items: Result<Vec<T>, _> = text.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).map(T::from_str).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::Usage(format!("--{flag}: cannot parse list {text:?}"))),
    }
}

fn load_emb(path: &Path) -> CliResult<EmbeddingMatrix> {
    load_embeddings(path).map_err(at(path))
}

fn load_data(d: &DataArgs) -> CliResult<(EmbeddingMatrix, EmbeddingMatrix)> {
    Ok((load_emb(&d.a)?, load_emb(&d.b)?))
}

fn load_pair_file(path: &Path, a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> CliResult<PairIndex> {
    load_pairs(path, a.n(), b.n()).map_err(at(path))
}

/// Whether a config text assigns `key`.
fn text_sets(text: &str, key: &str) -> bool {
    text.lines().any(|l| {
        let l = l.split('#').next().unwrap_or("");
        l.split_once('=').is_some_and(|(k, _)| k.trim() == key)
    })
}

/// Defaults, then the config file, then flags. An unset pool size follows
/// `4 * k`.
pub(crate) fn resolve_config(flags: &TrainFlags) -> CliResult<TrainConfig> {
    let mut cfg = TrainConfig::default();
    let mut pool_set = false;
    if let Some(path) = &flags.config {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.clone(), source })?;
        cfg.apply_text(&text).map_err(at(path))?;
        pool_set = text_sets(&text, "pool_size");
    }
    let overrides: [(&str, Option<String>); 18] = [
        ("batch_size", flags.batch_size.map(|v| v.to_string())),
        ("learning_rate", flags.learning_rate.map(|v| v.to_string())),
        ("epochs", flags.epochs.map(|v| v.to_string())),
        ("beta1", flags.beta1.map(|v| v.to_string())),
        ("beta2", flags.beta2.map(|v| v.to_string())),
        ("adam_eps", flags.adam_eps.map(|v| v.to_string())),
        ("hidden", flags.hidden.clone()),
        ("out_dim", flags.out_dim.map(|v| v.to_string())),
        ("dropout", flags.dropout.map(|v| v.to_string())),
        ("temperature", flags.temperature.map(|v| v.to_string())),
        ("alpha", flags.alpha.map(|v| v.to_string())),
        ("kernel", flags.kernel.clone()),
        ("epsilon", flags.epsilon.map(|v| v.to_string())),
        ("epsilon_aligned", flags.epsilon_aligned.map(|v| v.to_string())),
        ("k", flags.k.map(|v| v.to_string())),
        ("pool_size", flags.pool_size.map(|v| v.to_string())),
        ("strategy", flags.strategy.clone()),
        ("seed", flags.seed.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v).map_err(|e| CliError::Usage(format!("--{}: {e}", key.replace('_', "-"))))?;
        }
    }
    if flags.deterministic {
        cfg.deterministic = true;
    }
    if !(pool_set || flags.pool_size.is_some()) {
        cfg.loss.neighbor.pool_size = 4 * cfg.loss.neighbor.k;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_label(cfg: &TrainConfig) -> &'static str {
    if cfg.loss.alpha == 0.0 {
        "contrastive-only"
    } else {
        "gera"
    }
}

/// Pool of the requested size, clamped below the point count.
fn pool_for(points: &DMatrix<f64>, pool_size: usize) -> CliResult<NeighborPool> {
    Ok(build_knn_pool(points, pool_size.min(points.nrows() - 1).max(1))?)
}

fn emit(records: &MetricRecords, out: Option<&Path>) -> CliResult<()> {
    let text = records.render();
    print!("{text}");
    if let Some(path) = out {
        write_text(path, &text)?;
    }
    Ok(())
}

/// Held-out scoring shared by `eval`, `baseline` and `sweep`: precision@k
/// in both directions and neighbor rank in both modalities.
fn score_aligned(
    records: &mut MetricRecords,
    aligned_a: &DMatrix<f64>,
    aligned_b: &DMatrix<f64>,
    original_a: &DMatrix<f64>,
    original_b: &DMatrix<f64>,
    ks: &[usize],
    rank_k: usize,
) -> CliResult<()> {
    let truth: Vec<usize> = (0..aligned_a.nrows()).collect();
    for (dir, q, g) in [(Direction::AToB, aligned_a, aligned_b), (Direction::BToA, aligned_b, aligned_a)] {
        let res = precision_at_k(q, g, &truth, ks, dir)?;
        for (k, p) in res.precision_at {
            records.push("precision", format!("{dir}@{k}"), p);
        }
    }
    if rank_k > 0 {
        let ra = neighbor_rank_metric(original_a, aligned_a, rank_k)?;
        let rb = neighbor_rank_metric(original_b, aligned_b, rank_k)?;
        records.push("neighbor_rank", format!("a@{rank_k}"), ra);
        records.push("neighbor_rank", format!("b@{rank_k}"), rb);
        records.push("neighbor_rank", format!("mean@{rank_k}"), (ra + rb) / 2.0);
    }
    Ok(())
}

fn held_out(a: &EmbeddingMatrix, b: &EmbeddingMatrix, pairs: &PairIndex) -> (DMatrix<f64>, DMatrix<f64>) {
    (a.select_rows(&pairs.a_indices()), b.select_rows(&pairs.b_indices()))
}

pub fn synth(args: SynthArgs) -> CliResult<()> {
    if args.train_pairs + args.test_pairs > args.n {
        return Err(CliError::Usage(format!(
            "--train-pairs {} plus --test-pairs {} exceed --n {}",
            args.train_pairs, args.test_pairs, args.n
        )));
    }
    let cfg = SynthConfig {
        latent_dim: args.latent,
        n_points: args.n,
        d_a: args.da,
        d_b: args.db,
        noise_std: args.noise,
        seed: args.seed,
    };
    let (a, b, pairs) = synth_paired_dataset(&cfg)?;
    make_dir(&args.out)?;
    save_embeddings(&a, args.out.join("a.emb"))?;
    save_embeddings(&b, args.out.join("b.emb"))?;
    save_pairs(&pairs, args.out.join("pairs.tsv"))?;
    if args.train_pairs > 0 {
        let p = PairIndex::new((0..args.train_pairs).map(|i| (i, i)).collect(), args.n, args.n)?;
        save_pairs(&p, args.out.join("train_pairs.tsv"))?;
    }
    if args.test_pairs > 0 {
        let p = PairIndex::new((args.n - args.test_pairs..args.n).map(|i| (i, i)).collect(), args.n, args.n)?;
        save_pairs(&p, args.out.join("test_pairs.tsv"))?;
    }
    println!("synth\tn\t{}\nsynth\td_a\t{}\nsynth\td_b\t{}", args.n, args.da, args.db);
    Ok(())
}

pub fn normalize(args: NormalizeArgs) -> CliResult<()> {
    let m = load_emb(&args.input)?;
    let (normed, zero_rows) = l2_normalize(&m);
    if !zero_rows.is_empty() {
        log::warn!("{} zero rows left unchanged", zero_rows.len());
    }
    save_embeddings(&normed, &args.output)?;
    println!("normalize\tzero_rows\t{}", zero_rows.len());
    Ok(())
}

pub fn knn(args: KnnArgs) -> CliResult<()> {
    let m = load_emb(&args.emb)?;
    let pool = build_knn_pool(&m.values, args.pool_size).map_err(at(&args.emb))?;
    save_pool(&pool, &args.out)?;
    println!("knn\tn\t{}\nknn\tpool_size\t{}", pool.n(), pool.pool_size());
    Ok(())
}

/// Trains on already-loaded data, building pools when none are supplied.
fn train_loaded(
    a: &EmbeddingMatrix,
    b: &EmbeddingMatrix,
    pairs: &PairIndex,
    pools: Option<(NeighborPool, NeighborPool)>,
    cfg: &TrainConfig,
) -> CliResult<TrainOutcome> {
    let (pool_a, pool_b) = match pools {
        Some(p) => p,
        None => {
            // Contrastive-only runs never sample neighbors.
            let size = if cfg.loss.alpha > 0.0 { cfg.loss.neighbor.pool_size } else { 1 };
            (pool_for(&a.values, size)?, pool_for(&b.values, size)?)
        }
    };
    let data = AlignmentData { a: &a.values, b: &b.values, pool_a: &pool_a, pool_b: &pool_b };
    Ok(run_training(&data, pairs, cfg)?)
}

fn write_run(dir: &Path, cfg: &TrainConfig, outcome: &TrainOutcome) -> CliResult<()> {
    make_dir(dir)?;
    save_checkpoint(&outcome.params_x, &outcome.params_y, dir.join("model.ckpt"))?;
    write_text(&dir.join("train_log.csv"), &outcome.log.to_csv())?;
    write_text(&dir.join("epochs.csv"), &outcome.log.epochs_csv())?;
    write_text(&dir.join("resolved.cfg"), &cfg.render())?;
    Ok(())
}

fn train_records(cfg: &TrainConfig, outcome: &TrainOutcome) -> MetricRecords {
    let mut rec = MetricRecords::default();
    rec.push("run", "label", run_label(cfg));
    rec.push("train", "steps", outcome.log.steps.len());
    rec.push("train", "batch_size", outcome.log.batch_size);
    if let Some(last) = cfg.epochs.checked_sub(1).and_then(|e| outcome.log.epoch_mean_total(e)) {
        rec.push("train", "final_epoch_loss", last);
    }
    rec.push("train", "seconds", outcome.log.epoch_seconds.iter().sum::<f64>());
    rec
}

pub fn train(args: TrainArgs) -> CliResult<()> {
    let cfg = resolve_config(&args.flags)?;
    let (a, b) = load_data(&args.data)?;
    let pairs = load_pair_file(&args.pairs, &a, &b)?;
    let pools = match (&args.pool_a, &args.pool_b) {
        (Some(pa), Some(pb)) => Some((load_pool(pa).map_err(at(pa))?, load_pool(pb).map_err(at(pb))?)),
        (None, None) => None,
        _ => return Err(CliError::Usage("--pool-a and --pool-b go together".into())),
    };
    let outcome = train_loaded(&a, &b, &pairs, pools, &cfg)?;
    write_run(&args.out, &cfg, &outcome)?;
    emit(&train_records(&cfg, &outcome), None)
}

fn load_run(dir: &Path) -> CliResult<(TrainConfig, MlpParams, MlpParams)> {
    let cfg_path = dir.join("resolved.cfg");
    let text = fs::read_to_string(&cfg_path).map_err(|source| Error::Io { path: cfg_path.clone(), source })?;
    let mut cfg = TrainConfig::default();
    cfg.apply_text(&text).map_err(at(&cfg_path))?;
    let ckpt = dir.join("model.ckpt");
    let (px, py) = load_checkpoint(&ckpt).map_err(at(&ckpt))?;
    Ok((cfg, px, py))
}

fn read_labels(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let label = line.parse::<usize>().map_err(|e| CliError::File {
            path: path.to_path_buf(),
            source: Error::Parse { line: i + 1, message: format!("{line:?}: {e}") },
        })?;
        labels.push(label);
    }
    Ok(labels)
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let ks = parse_list::<usize>(&args.ks, "ks")?;
    let zs = match (&args.zs_samples, &args.zs_labels, &args.zs_prompts) {
        (Some(s), Some(l), Some(p)) => Some((s, l, p)),
        (None, None, None) => None,
        _ => return Err(CliError::Usage("--zs-samples, --zs-labels and --zs-prompts go together".into())),
    };
    let (cfg, px, py) = load_run(&args.run)?;
    let (a, b) = load_data(&args.data)?;
    let pairs = load_pair_file(&args.pairs, &a, &b)?;
    let (ta, tb) = held_out(&a, &b, &pairs);
    let za = predict(&px, &ta)?;
    let zb = predict(&py, &tb)?;
    let mut rec = MetricRecords::default();
    rec.push("run", "label", run_label(&cfg));
    rec.push("run", "alpha", cfg.loss.alpha);
    score_aligned(&mut rec, &za, &zb, &ta, &tb, &ks, args.rank_k)?;

    if let Some((samples, labels, prompts)) = zs {
        let samples_m = load_emb(samples)?;
        let labels = read_labels(labels)?;
        let per_class = prompts
            .split(',')
            .map(|p| {
                let path = PathBuf::from(p.trim());
                let m = load_emb(&path)?;
                Ok(predict(&py, &m.values)?)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let protos = class_prototypes(&per_class)?;
        let res = zero_shot_classify(&predict(&px, &samples_m.values)?, &protos, &labels)?;
        rec.push("zero_shot", "top1", res.top1);
        for (c, acc) in res.per_class.iter().enumerate() {
            rec.push("zero_shot", format!("class_{c}"), acc);
        }
    }
    emit(&rec, args.out.as_deref())
}

pub fn baseline(args: BaselineArgs) -> CliResult<()> {
    let ks = parse_list::<usize>(&args.ks, "ks")?;
    let (a, b) = load_data(&args.data)?;
    let train_pairs = load_pair_file(&args.train_pairs, &a, &b)?;
    let test_pairs = load_pair_file(&args.test_pairs, &a, &b)?;
    let (ta, tb) = held_out(&a, &b, &test_pairs);
    let (fa, fb) = held_out(&a, &b, &train_pairs);
    let mut rec = MetricRecords::default();
    let (za, zb) = match args.method {
        BaselineKind::Procrustes => {
            let model = procrustes_fit(&fa, &fb)?;
            if let Some(path) = &args.model_out {
                save_procrustes(&model, path)?;
            }
            rec.push("run", "label", "procrustes");
            rec.push("procrustes", "orthogonality_error", model.orthogonality_error());
            (model.map_a(&ta)?, model.map_b(&tb)?)
        }
        BaselineKind::Asif => {
            let k = args.asif_k.min(train_pairs.m());
            if k < args.asif_k {
                log::warn!("asif k {} reduced to the {} anchors", args.asif_k, train_pairs.m());
            }
            let model = AsifModel::new(fa, fb, k, args.asif_p)?;
            rec.push("run", "label", "asif");
            rec.push("asif", "anchors", model.m());
            rec.push("asif", "k", k);
            (model.encode_a(&ta)?, model.encode_b(&tb)?)
        }
        BaselineKind::Contrastive => {
            let mut cfg = resolve_config(&args.flags)?;
            cfg.loss.alpha = 0.0;
            let outcome = train_loaded(&a, &b, &train_pairs, None, &cfg)?;
            if let Some(dir) = &args.model_out {
                write_run(dir, &cfg, &outcome)?;
            }
            rec = train_records(&cfg, &outcome);
            (predict(&outcome.params_x, &ta)?, predict(&outcome.params_y, &tb)?)
        }
    };
    score_aligned(&mut rec, &za, &zb, &ta, &tb, &ks, args.rank_k)?;
    emit(&rec, args.out.as_deref())
}

pub fn bench(args: BenchArgs) -> CliResult<()> {
    let anchor_counts = parse_list::<usize>(&args.anchors, "anchors")?;
    let (a, b) = load_data(&args.data)?;
    let max_m = *anchor_counts.iter().max().unwrap();
    if args.queries == 0 || args.gallery == 0 {
        return Err(CliError::Usage("--queries and --gallery must be positive".into()));
    }
    if max_m > a.n().min(b.n()) || args.gallery > b.n() || args.queries > a.n() {
        return Err(CliError::Usage(format!(
            "{} anchors, {} gallery rows and {} queries do not fit {} / {} points",
            max_m,
            args.gallery,
            args.queries,
            a.n(),
            b.n()
        )));
    }
    let queries = a.values.rows(0, args.queries).into_owned();
    let gallery = b.values.rows(b.n() - args.gallery, args.gallery).into_owned();
    let (head_x, head_y) = match &args.run {
        Some(dir) => {
            let (_, px, py) = load_run(dir)?;
            (px, py)
        }
        None => {
            let hidden = parse_list::<usize>(&args.hidden, "hidden")?;
            let dims = |d: usize| [vec![d], hidden.clone(), vec![args.out_dim]].concat();
            (init_mlp(&dims(a.d()), 0.0, 1)?, init_mlp(&dims(b.d()), 0.0, 2)?)
        }
    };
    let head = HeadRetriever::new(head_x, &predict(&head_y, &gallery)?);

    // Timing stays on one thread regardless of --threads.
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    let mut rec = MetricRecords::default();
    let mut csv = String::from("x,y,series\n");
    let (mut asif_lat, mut head_lat) = (Vec::new(), Vec::new());
    for &m in &anchor_counts {
        let anchors: Vec<usize> = (0..m).collect();
        let model = AsifModel::new(a.select_rows(&anchors), b.select_rows(&anchors), args.asif_k.min(m), args.asif_p)?;
        let asif = AsifRetriever::new(model, &gallery)?;
        let (t_asif, t_head) = single.install(|| -> CliResult<_> {
            Ok((
                bench_inference(&asif, &queries, args.repetitions)?,
                bench_inference(&head, &queries, args.repetitions)?,
            ))
        })?;
        rec.push("latency", format!("asif@{m}"), t_asif.median_secs);
        rec.push("latency_p95", format!("asif@{m}"), t_asif.p95_secs);
        rec.push("latency", format!("head@{m}"), t_head.median_secs);
        rec.push("latency_p95", format!("head@{m}"), t_head.p95_secs);
        let _ = writeln!(csv, "{m},{},asif", t_asif.median_secs);
        let _ = writeln!(csv, "{m},{},head", t_head.median_secs);
        asif_lat.push(t_asif.median_secs);
        head_lat.push(t_head.median_secs);
    }
    if anchor_counts.len() >= 2 {
        let x: Vec<f64> = anchor_counts.iter().map(|&m| m as f64).collect();
        let (asif_slope, _, asif_r2) = linear_fit(&x, &asif_lat);
        let (head_slope, _, head_r2) = linear_fit(&x, &head_lat);
        rec.push("latency_fit", "asif_slope", asif_slope);
        rec.push("latency_fit", "asif_r2", asif_r2);
        rec.push("latency_fit", "head_slope", head_slope);
        rec.push("latency_fit", "head_r2", head_r2);
        rec.push("latency_fit", "head_to_asif_slope", head_slope / asif_slope);
    }
    if let Some(path) = &args.csv {
        write_text(path, &csv)?;
    }
    emit(&rec, args.out.as_deref())
}

pub fn sweep(args: SweepArgs) -> CliResult<()> {
    let ks = parse_list::<usize>(&args.ks, "ks")?;
    let kernels = parse_list::<KernelKind>(&args.kernels, "kernels")?;
    let strategies = parse_list::<Strategy>(&args.strategies, "strategies")?;
    let base = resolve_config(&args.flags)?;
    let (a, b) = load_data(&args.data)?;
    let train_pairs = load_pair_file(&args.train_pairs, &a, &b)?;
    let test_pairs = load_pair_file(&args.test_pairs, &a, &b)?;
    let (ta, tb) = held_out(&a, &b, &test_pairs);

    let pool_of = |k: usize| args.flags.pool_size.unwrap_or(4 * k);
    let widest = ks.iter().map(|&k| pool_of(k)).max().unwrap();
    let pool_a = pool_for(&a.values, widest)?;
    let pool_b = pool_for(&b.values, widest)?;
    let data = AlignmentData { a: &a.values, b: &b.values, pool_a: &pool_a, pool_b: &pool_b };

    let mut csv = String::from("kernel,strategy,k,p5_a_to_b,p5_b_to_a,neighbor_rank,final_epoch_loss,seconds\n");
    for &kind in &kernels {
        for &strategy in &strategies {
            for &k in &ks {
                let mut cfg = base.clone();
                cfg.loss.kernel.kind = kind;
                cfg.loss.neighbor.strategy = strategy;
                cfg.loss.neighbor.k = k;
                cfg.loss.neighbor.pool_size = pool_of(k).min(pool_a.pool_size()).min(pool_b.pool_size());
                let started = Instant::now();
                let outcome = run_training(&data, &train_pairs, &cfg)?;
                let seconds = started.elapsed().as_secs_f64();
                let za = predict(&outcome.params_x, &ta)?;
                let zb = predict(&outcome.params_y, &tb)?;
                let mut rec = MetricRecords::default();
                score_aligned(&mut rec, &za, &zb, &ta, &tb, &[5], 5)?;
                let get = |key: &str, metric: &str| rec.get(metric, key).unwrap_or("nan").to_string();
                let final_loss = cfg.epochs.checked_sub(1).and_then(|e| outcome.log.epoch_mean_total(e)).unwrap_or(f64::NAN);
                let line = format!(
                    "{kind},{strategy},{k},{},{},{},{final_loss},{seconds:.3}",
                    get("a_to_b@5", "precision"),
                    get("b_to_a@5", "precision"),
                    get("mean@5", "neighbor_rank"),
                );
                println!("{line}");
                csv.push_str(&line);
                csv.push('\n');
            }
        }
    }
    write_text(&args.out, &csv)
}
