use std::fs;
use std::path::{Path, PathBuf};

use gera_cli::{help_text, run_cli, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use gera_core::store::{load_embeddings, save_embeddings, EmbeddingMatrix};
use nalgebra::DMatrix;

const SUBCOMMANDS: [&str; 8] = ["synth", "normalize", "knn", "train", "eval", "baseline", "bench", "sweep"];

fn gera(args: &[&str]) -> i32 {
    run_cli(std::iter::once("gera").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Set UPDATE_GOLDEN=1 to rewrite the files after an intended change.
#[test]
fn help_matches_golden_files() {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let names = std::iter::once(None).chain(SUBCOMMANDS.iter().map(|s| Some(*s)));
    for name in names {
        let text = help_text(name);
        let file = golden_dir().join(format!("{}.txt", name.unwrap_or("gera")));
        if update {
            fs::create_dir_all(golden_dir()).unwrap();
            fs::write(&file, &text).unwrap();
        } else {
            let expected = fs::read_to_string(&file).unwrap_or_else(|e| panic!("{}: {e}", file.display()));
            assert_eq!(text, expected, "help for {name:?} drifted from {}", file.display());
        }
    }
}

#[test]
fn every_flag_shows_a_default_or_is_required() {
    for name in SUBCOMMANDS {
        let text = help_text(Some(name));
        let usage = text.lines().find(|l| l.starts_with("Usage:")).unwrap().to_string();
        // Each flag is a "--name <VALUE>" line followed by its description.
        let mut blocks: Vec<String> = Vec::new();
        for l in text.lines().map(str::trim_start) {
            if l.starts_with("--") || l.starts_with("-h") {
                blocks.push(l.to_string());
            } else if let Some(last) = blocks.last_mut() {
                last.push(' ');
                last.push_str(l);
            }
        }
        for line in blocks.iter().filter(|b| b.starts_with("--")) {
            let flag = line.split_whitespace().next().unwrap();
            if ["--deterministic", "--threads"].contains(&flag) {
                continue;
            }
            let documented = line.contains("[default: ");
            let required = usage.contains(&format!("{flag} <"));
            let optional_input = line.contains("when absent")
                || line.contains("Also write")
                || line.starts_with("--zs-")
                || line.starts_with("--config")
                || line.starts_with("--model-out")
                || line.starts_with("--csv");
            assert!(documented || required || optional_input, "{name}: {line}");
        }
    }
}

#[test]
fn exit_codes() {
    assert_eq!(gera(&["--help"]), EXIT_OK);
    assert_eq!(gera(&["train", "--help"]), EXIT_OK);
    assert_eq!(gera(&[]), EXIT_USAGE);
    assert_eq!(gera(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(gera(&["synth", "--n", "ten", "--out", "x"]), EXIT_USAGE);
    // Required flag missing: rejected before any work.
    assert_eq!(gera(&["train", "--a", "a.emb", "--b", "b.emb", "--out", "run"]), EXIT_USAGE);
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.emb");
    assert_eq!(gera(&["knn", "--emb", p(&missing), "--out", p(&dir.path().join("k"))]), EXIT_DATA);
    assert_eq!(gera(&["--threads", "0", "synth", "--out", p(dir.path())]), EXIT_USAGE);
}

#[test]
fn synth_writes_files_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (one, two) = (dir.path().join("one"), dir.path().join("two"));
    for out in [&one, &two] {
        let code = gera(&["synth", "--latent", "4", "--n", "200", "--da", "32", "--db", "48", "--noise", "0.05",
            "--seed", "7", "--out", p(out), "--train-pairs", "50", "--test-pairs", "100"]);
        assert_eq!(code, EXIT_OK);
    }
    for f in ["a.emb", "b.emb", "pairs.tsv", "train_pairs.tsv", "test_pairs.tsv"] {
        assert_eq!(fs::read(one.join(f)).unwrap(), fs::read(two.join(f)).unwrap(), "{f}");
    }
    let a = load_embeddings(one.join("a.emb")).unwrap();
    assert_eq!((a.n(), a.d()), (200, 32));
    assert_eq!(load_embeddings(one.join("b.emb")).unwrap().d(), 48);
    let test = fs::read_to_string(one.join("test_pairs.tsv")).unwrap();
    assert_eq!(test.lines().filter(|l| !l.starts_with('#')).count(), 100);
    assert_eq!(gera(&["synth", "--n", "10", "--train-pairs", "8", "--test-pairs", "8", "--out", p(&one)]), EXIT_USAGE);
}

#[test]
fn normalize_passes_zero_rows_through() {
    let dir = tempfile::tempdir().unwrap();
    let m = EmbeddingMatrix::from_rows(2, 2, &[3.0, 4.0, 0.0, 0.0], "t").unwrap();
    let (input, output) = (dir.path().join("in.emb"), dir.path().join("out.emb"));
    save_embeddings(&m, &input).unwrap();
    assert_eq!(gera(&["normalize", "--input", p(&input), "--output", p(&output)]), EXIT_OK);
    let n = load_embeddings(&output).unwrap();
    assert_eq!(n.values, DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.0, 0.0]));
}

fn read_records(path: &Path) -> Vec<(String, String, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_string(), f[1].to_string(), f[2].to_string())
        })
        .collect()
}

fn value(recs: &[(String, String, String)], metric: &str, key: &str) -> String {
    recs.iter().find(|r| r.0 == metric && r.1 == key).map(|r| r.2.clone()).unwrap_or_default()
}

struct Pipeline {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Pipeline {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        assert_eq!(gera(&["synth", "--n", "400", "--seed", "3", "--train-pairs", "60", "--test-pairs", "100",
            "--out", p(&root)]), EXIT_OK);
        for v in ["a", "b"] {
            let (raw, normed) = (root.join(format!("{v}.emb")), root.join(format!("{v}n.emb")));
            assert_eq!(gera(&["normalize", "--input", p(&raw), "--output", p(&normed)]), EXIT_OK);
            assert_eq!(gera(&["knn", "--emb", p(&normed), "--pool-size", "20", "--out",
                p(&root.join(format!("{v}.knn")))]), EXIT_OK);
        }
        fs::write(root.join("gera.cfg"), "# small run\nbatch_size = 20\nhidden = 16\nout_dim = 8\nk = 5\nlearning_rate = 0.001\n").unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_str().unwrap().to_string()
    }

    fn train(&self, run: &str, extra: &[&str]) -> i32 {
        let (a, b, pairs, pa, pb, cfg, out) = (
            self.path("an.emb"), self.path("bn.emb"), self.path("train_pairs.tsv"),
            self.path("a.knn"), self.path("b.knn"), self.path("gera.cfg"), self.path(run),
        );
        let mut args = vec!["train", "--a", &a, "--b", &b, "--pairs", &pairs, "--pool-a", &pa, "--pool-b", &pb,
            "--config", &cfg, "--epochs", "5", "--out", &out];
        args.extend_from_slice(extra);
        gera(&args)
    }

    fn eval(&self, run: &str, extra: &[&str]) -> Vec<(String, String, String)> {
        let (a, b, pairs, dir, out) =
            (self.path("an.emb"), self.path("bn.emb"), self.path("test_pairs.tsv"), self.path(run), self.path(&format!("{run}.tsv")));
        let mut args = vec!["eval", "--a", &a, "--b", &b, "--run", &dir, "--pairs", &pairs, "--out", &out];
        args.extend_from_slice(extra);
        assert_eq!(gera(&args), EXIT_OK);
        read_records(Path::new(&out))
    }
}

#[test]
fn end_to_end_train_and_eval() {
    let pipe = Pipeline::new();
    assert_eq!(pipe.train("run", &[]), EXIT_OK);
    for f in ["model.ckpt", "train_log.csv", "epochs.csv", "resolved.cfg"] {
        assert!(pipe.root.join("run").join(f).exists(), "{f}");
    }
    let resolved = fs::read_to_string(pipe.root.join("run/resolved.cfg")).unwrap();
    assert!(resolved.contains("epochs = 5") && resolved.contains("pool_size = 20") && resolved.contains("k = 5"));
    let log = fs::read_to_string(pipe.root.join("run/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 5 * 3);

    let recs = pipe.eval("run", &[]);
    assert_eq!(value(&recs, "run", "label"), "gera");
    for key in ["a_to_b@1", "a_to_b@5", "a_to_b@10", "b_to_a@1", "b_to_a@5", "b_to_a@10"] {
        let v: f64 = value(&recs, "precision", key).parse().unwrap();
        assert!((0.0..=1.0).contains(&v), "{key} = {v}");
    }
    let rank: f64 = value(&recs, "neighbor_rank", "mean@5").parse().unwrap();
    assert!(rank.is_finite() && rank >= 3.0);
}

#[test]
fn alpha_zero_is_labeled_contrastive_only() {
    let pipe = Pipeline::new();
    assert_eq!(pipe.train("run0", &["--alpha", "0"]), EXIT_OK);
    let recs = pipe.eval("run0", &[]);
    assert_eq!(value(&recs, "run", "label"), "contrastive-only");
}

#[test]
fn seeded_training_is_reproducible() {
    let pipe = Pipeline::new();
    for run in ["r1", "r2"] {
        assert_eq!(pipe.train(run, &["--seed", "5"]), EXIT_OK);
    }
    assert_eq!(fs::read(pipe.root.join("r1/model.ckpt")).unwrap(), fs::read(pipe.root.join("r2/model.ckpt")).unwrap());
    assert_eq!(pipe.train("r3", &["--seed", "6"]), EXIT_OK);
    assert_ne!(fs::read(pipe.root.join("r1/model.ckpt")).unwrap(), fs::read(pipe.root.join("r3/model.ckpt")).unwrap());
}

#[test]
fn zero_shot_evaluation() {
    let pipe = Pipeline::new();
    assert_eq!(pipe.train("run", &[]), EXIT_OK);
    let b = load_embeddings(pipe.root.join("bn.emb")).unwrap();
    let a = load_embeddings(pipe.root.join("an.emb")).unwrap();
    // Three classes whose prompts are B rows; samples are the paired A rows.
    let mut prompts = Vec::new();
    for c in 0..3 {
        let rows: Vec<usize> = (0..4).map(|i| 200 + 10 * c + i).collect();
        let m = EmbeddingMatrix::new(b.select_rows(&rows), "prompts", gera_core::Dtype::F64).unwrap();
        let path = pipe.root.join(format!("class{c}.emb"));
        save_embeddings(&m, &path).unwrap();
        prompts.push(path.to_str().unwrap().to_string());
    }
    let sample_rows: Vec<usize> = (0..3).flat_map(|c| (0..4).map(move |i| 200 + 10 * c + i)).collect();
    let samples = EmbeddingMatrix::new(a.select_rows(&sample_rows), "samples", gera_core::Dtype::F64).unwrap();
    save_embeddings(&samples, pipe.root.join("zs.emb")).unwrap();
    fs::write(pipe.root.join("labels.txt"), "0\n0\n0\n0\n1\n1\n1\n1\n2\n2\n2\n2\n").unwrap();

    let (s, l, pr) = (pipe.path("zs.emb"), pipe.path("labels.txt"), prompts.join(","));
    let recs = pipe.eval("run", &["--zs-samples", &s, "--zs-labels", &l, "--zs-prompts", &pr]);
    let top1: f64 = value(&recs, "zero_shot", "top1").parse().unwrap();
    assert!((0.0..=1.0).contains(&top1));
    assert!(!value(&recs, "zero_shot", "class_2").is_empty());

    fs::write(pipe.root.join("bad_labels.txt"), "0\nseven\n").unwrap();
    let (a_, b_, dir, pairs, bad) =
        (pipe.path("an.emb"), pipe.path("bn.emb"), pipe.path("run"), pipe.path("test_pairs.tsv"), pipe.path("bad_labels.txt"));
    let code = gera(&["eval", "--a", &a_, "--b", &b_, "--run", &dir, "--pairs", &pairs,
        "--zs-samples", &s, "--zs-labels", &bad, "--zs-prompts", &pr]);
    assert_eq!(code, EXIT_DATA);
    assert_eq!(gera(&["eval", "--a", &a_, "--b", &b_, "--run", &dir, "--pairs", &pairs, "--zs-samples", &s]), EXIT_USAGE);
}

#[test]
fn baselines_run() {
    let pipe = Pipeline::new();
    let (a, b, tr, te) = (pipe.path("an.emb"), pipe.path("bn.emb"), pipe.path("train_pairs.tsv"), pipe.path("test_pairs.tsv"));
    let prc = pipe.path("model.prc");
    for method in ["procrustes", "asif"] {
        let out = pipe.path(&format!("{method}.tsv"));
        let code = gera(&["baseline", method, "--a", &a, "--b", &b, "--train-pairs", &tr, "--test-pairs", &te,
            "--model-out", &prc, "--out", &out]);
        assert_eq!(code, EXIT_OK, "{method}");
        let recs = read_records(Path::new(&out));
        assert_eq!(value(&recs, "run", "label"), method);
        assert!(value(&recs, "precision", "a_to_b@5").parse::<f64>().unwrap() > 0.0);
    }
    assert!(Path::new(&prc).exists());
    let recs = read_records(Path::new(&pipe.path("procrustes.tsv")));
    // An orthogonal map preserves every neighbor ranking.
    assert_eq!(value(&recs, "neighbor_rank", "mean@5"), "3");

    let (cfg, out) = (pipe.path("gera.cfg"), pipe.path("contrastive.tsv"));
    let code = gera(&["baseline", "contrastive", "--a", &a, "--b", &b, "--train-pairs", &tr, "--test-pairs", &te,
        "--config", &cfg, "--epochs", "3", "--out", &out]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(value(&read_records(Path::new(&out)), "run", "label"), "contrastive-only");
}

#[test]
fn bench_and_sweep_write_outputs() {
    let pipe = Pipeline::new();
    let (a, b, csv, out) = (pipe.path("an.emb"), pipe.path("bn.emb"), pipe.path("lat.csv"), pipe.path("lat.tsv"));
    let code = gera(&["bench", "--a", &a, "--b", &b, "--anchors", "50,100", "--gallery", "50", "--queries", "5",
        "--repetitions", "2", "--hidden", "8", "--out-dim", "4", "--csv", &csv, "--out", &out]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 1 + 4);
    assert!(!value(&read_records(Path::new(&out)), "latency_fit", "asif_slope").is_empty());
    assert_eq!(gera(&["bench", "--a", &a, "--b", &b, "--anchors", "5000"]), EXIT_USAGE);

    let (tr, te, cfg, sweep) = (pipe.path("train_pairs.tsv"), pipe.path("test_pairs.tsv"), pipe.path("gera.cfg"), pipe.path("sweep.csv"));
    let code = gera(&["sweep", "--a", &a, "--b", &b, "--train-pairs", &tr, "--test-pairs", &te, "--config", &cfg,
        "--epochs", "1", "--ks", "3,4", "--kernels", "heat,inverse", "--strategies", "uniform", "--out", &sweep]);
    assert_eq!(code, EXIT_OK);
    let text = fs::read_to_string(&sweep).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.lines().nth(1).unwrap().starts_with("heat,uniform,3,"));
    assert_eq!(gera(&["sweep", "--a", &a, "--b", &b, "--train-pairs", &tr, "--test-pairs", &te, "--kernels", "cubic",
        "--out", &sweep]), EXIT_USAGE);
}

#[test]
fn bad_config_file_is_a_data_error() {
    let pipe = Pipeline::new();
    fs::write(pipe.root.join("gera.cfg"), "batch_size = 20\nnot a pair\n").unwrap();
    assert_eq!(pipe.train("run", &[]), EXIT_DATA);
    fs::write(pipe.root.join("gera.cfg"), "learning_rate = -1\n").unwrap();
    assert_eq!(pipe.train("run", &[]), EXIT_DATA);
}
