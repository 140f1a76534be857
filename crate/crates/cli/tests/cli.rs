use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn pngbert(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pngbert"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env("PNGBERT_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

const TINY: &str = r#"
seed = 3
max_len = 96

[model]
num_layers = 2
hidden_size = 16
num_heads = 2
ff_size = 32
max_positions = 96
dropout_rate = 0.1

[train]
batch_size = 4
num_steps = 6
warmup_steps = 1

[finetune]
batch_size = 4
num_steps = 5
warmup_steps = 1
"#;

/// Writes the tiny config, then runs `build` with vocab size 64.
fn setup(dir: &Path) -> PathBuf {
    let cfg = dir.join("tiny.toml");
    let text = format!(
        "{TINY}\n[paths]\nlexicon = {:?}\ncorpus = {:?}\nsupervised = {:?}\n",
        data("toy_lexicon.txt"),
        data("toy_corpus.txt"),
        data("toy_supervised.txt")
    );
    std::fs::write(&cfg, text).unwrap();
    ok(&pngbert(dir, &["build", "--config", cfg.to_str().unwrap(), "--vocab-size", "64"]));
    cfg
}

#[test]
fn build_sizes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let bpe = std::fs::read(dir.path().join("subwords.bpe")).unwrap();
    let vocab = std::fs::read(dir.path().join("vocab.txt")).unwrap();
    let model = pngbert::frontend::SubwordModel::load(dir.path().join("subwords.bpe")).unwrap();
    assert_eq!(model.vocab().len(), 64);

    let stdout = ok(&pngbert(dir.path(), &["build", "--config", cfg.to_str().unwrap(), "--vocab-size", "64"]));
    assert!(stdout.contains("subwords=65"), "{stdout}");
    assert!(stdout.contains("total_ids="));
    assert_eq!(std::fs::read(dir.path().join("subwords.bpe")).unwrap(), bpe);
    assert_eq!(std::fs::read(dir.path().join("vocab.txt")).unwrap(), vocab);
    assert!(dir.path().join("build.config.toml").exists());
    assert!(dir.path().join("masked.tsv").exists());
}

#[test]
fn missing_lexicon_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = data("toy_corpus.txt");
    let out = pngbert(
        dir.path(),
        &["build", "--lexicon", "/nonexistent/lex.txt", "--corpus", corpus.to_str().unwrap()],
    );
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().last().unwrap();
    assert!(line.starts_with("error[io]: "), "{err}");
    assert!(line.contains("/nonexistent/lex.txt"));
}

#[test]
fn bad_policy_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pngbert(dir.path(), &["build", "--policy", "sometimes"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]: "));
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = setup(d);
    let cfg = cfg.to_str().unwrap();
    let inputs: Vec<Vec<u8>> = ["toy_lexicon.txt", "toy_corpus.txt", "toy_supervised.txt"]
        .iter()
        .map(|f| std::fs::read(data(f)).unwrap())
        .collect();

    let stdout = ok(&pngbert(d, &["pretrain", "--config", cfg]));
    assert!(stdout.contains("steps=6"), "{stdout}");
    let ckpt = std::fs::read(d.join("model.ckpt")).unwrap();
    let log = std::fs::read_to_string(d.join("pretrain_loss.tsv")).unwrap();
    assert_eq!(log.lines().count(), 7);

    // the echoed config replays the run bit for bit
    let echoed = d.join("pretrain.config.toml");
    let echoed_text = std::fs::read_to_string(&echoed).unwrap();
    ok(&pngbert(d, &["pretrain", "--config", echoed.to_str().unwrap()]));
    assert_eq!(std::fs::read(d.join("model.ckpt")).unwrap(), ckpt);
    assert_eq!(std::fs::read_to_string(&echoed).unwrap(), echoed_text);

    let stdout = ok(&pngbert(d, &["eval", "--config", cfg, "--mode", "g2p"]));
    assert!(stdout.starts_with("mode=G2P\taccuracy="), "{stdout}");

    let stdout = ok(&pngbert(d, &["encode", "--config", cfg, "--text", "two."]));
    assert!(stdout.contains("phonemes=2\thidden=16\tsymbols=T UW"), "{stdout}");
    let enc = pngbert::adapter::read_phoneme_encoding(d.join("encoding.bin")).unwrap();
    assert_eq!(enc.dim(), (2, 16));

    let stdout = ok(&pngbert(d, &["attention", "--config", cfg, "--text", "press one."]));
    assert!(stdout.contains("files=4"), "{stdout}");
    for l in 0..2 {
        for h in 0..2 {
            let grid = std::fs::read_to_string(d.join(format!("attention/layer{l}_head{h}.tsv"))).unwrap();
            for row in grid.lines() {
                let sum: f64 = row.split('\t').map(|v| v.parse::<f64>().unwrap()).sum();
                assert!((sum - 1.0).abs() < 1e-5, "row sums to {sum}");
            }
        }
    }

    let stdout = ok(&pngbert(d, &["finetune", "--config", cfg, "--trainable-top-layers", "1"]));
    assert!(stdout.contains("trainable_top_layers=1"), "{stdout}");
    let tuned = pngbert::encoder::Checkpoint::<f32>::load(d.join("finetuned.ckpt")).unwrap();
    let base = pngbert::encoder::Checkpoint::<f32>::load(d.join("model.ckpt")).unwrap();
    assert_eq!(tuned.params.layers[0], base.params.layers[0]);
    assert_eq!(tuned.params.token_embedding, base.params.token_embedding);
    assert_ne!(tuned.params.layers[1], base.params.layers[1]);
    assert!(tuned.head.is_some());

    for (f, before) in ["toy_lexicon.txt", "toy_corpus.txt", "toy_supervised.txt"].iter().zip(&inputs) {
        assert_eq!(&std::fs::read(data(f)).unwrap(), before, "{f} was modified");
    }
}

#[test]
fn same_seed_same_checkpoint() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = setup(a.path());
    let cb = setup(b.path());
    ok(&pngbert(a.path(), &["pretrain", "--config", ca.to_str().unwrap(), "--seed", "9"]));
    ok(&pngbert(b.path(), &["pretrain", "--config", cb.to_str().unwrap(), "--seed", "9"]));
    assert_eq!(
        std::fs::read(a.path().join("model.ckpt")).unwrap(),
        std::fs::read(b.path().join("model.ckpt")).unwrap()
    );
}

#[test]
fn checkpoint_from_other_vocab_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = setup(d);
    let cfg = cfg.to_str().unwrap();
    ok(&pngbert(d, &["pretrain", "--config", cfg, "--steps", "1"]));
    ok(&pngbert(d, &["build", "--config", cfg, "--vocab-size", "60"]));
    let out = pngbert(d, &["encode", "--config", cfg, "--text", "two."]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[shape]"));
}
