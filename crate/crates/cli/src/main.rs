//! `pngbert`: build, pre-train, evaluate, fine-tune and inspect the encoder.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use pngbert::adapter::{extract_phoneme_states, finetune, load_supervised, write_phoneme_encoding, FreezeSpec};
use pngbert::encoder::{export_attention, forward, write_attention_grids, Checkpoint, Mode};
use pngbert::frontend::{load_lexicon, train_bpe, SubwordModel};
use pngbert::pretrain::{evaluate, pretrain_examples, StepLog, EVAL_SEED};
use pngbert::rng::{substream, Stream};
use pngbert::sequence::batch_io::write_masked;
use pngbert::sequence::{apply_masking, MaskedInput};
use pngbert::Frontend;

use crate::config::{required, RunConfig};

#[derive(Parser)]
#[command(name = "pngbert", version, about = "Joint phoneme and grapheme BERT encoder")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run config; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// consistent | plain | g2p | p2g
    #[arg(long, global = true)]
    policy: Option<String>,
    #[arg(long, global = true)]
    trainable_top_layers: Option<usize>,
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    subwords: Option<PathBuf>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the subword model and write the joint vocabulary
    Build {
        #[arg(long)]
        vocab_size: Option<usize>,
    },
    /// Masked-LM pre-training from scratch
    Pretrain {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Token accuracy of a checkpoint on a corpus
    Eval {
        /// mlm | g2p | p2g
        #[arg(long)]
        mode: Option<String>,
    },
    /// Fine-tune the top layers and a regression head on per-phoneme targets
    Finetune {
        #[arg(long)]
        supervised: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Write the final-layer states at phoneme positions
    Encode {
        #[arg(long)]
        text: String,
        #[arg(long, default_value = "encoding.bin")]
        output: String,
    },
    /// Export attention matrices and alignment scores
    Attention {
        #[arg(long)]
        text: String,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Build { .. } => "build",
            Command::Pretrain { .. } => "pretrain",
            Command::Eval { .. } => "eval",
            Command::Finetune { .. } => "finetune",
            Command::Encode { .. } => "encode",
            Command::Attention { .. } => "attention",
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut c = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let o = &cli.common;
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = &o.out_dir {
        c.out_dir = v.clone();
    }
    if let Some(v) = &o.policy {
        c.policy = v.clone();
    }
    if let Some(v) = o.trainable_top_layers {
        c.finetune.trainable_top_layers = v;
    }
    for (flag, slot) in [
        (&o.lexicon, &mut c.paths.lexicon),
        (&o.corpus, &mut c.paths.corpus),
        (&o.subwords, &mut c.paths.subwords),
        (&o.checkpoint, &mut c.paths.checkpoint),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    match &cli.command {
        Command::Build { vocab_size: Some(v) } => c.build.vocab_size = *v,
        Command::Pretrain { steps: Some(s) } => c.train.num_steps = *s,
        Command::Eval { mode: Some(m) } => c.eval.mode = m.clone(),
        Command::Finetune { supervised, steps } => {
            if supervised.is_some() {
                c.paths.supervised.clone_from(supervised);
            }
            if let Some(s) = steps {
                c.finetune.num_steps = *s;
            }
        }
        _ => {}
    }
    // pin derived paths so the echoed config replays the run unchanged
    c.paths.subwords = Some(c.subwords_path());
    c.paths.checkpoint = Some(c.checkpoint_path());
    c.policy()?;
    c.eval_mode()?;
    Ok(c)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| pngbert::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn frontend(c: &RunConfig) -> Result<Frontend> {
    let lexicon = load_lexicon(required(&c.paths.lexicon, "lexicon")?)?;
    let subwords = SubwordModel::load(c.subwords_path())?;
    Ok(Frontend::new(lexicon, subwords)?)
}

fn load_checkpoint(c: &RunConfig, fe: &Frontend) -> Result<Checkpoint<f32>> {
    let path = c.checkpoint_path();
    let ckpt = Checkpoint::<f32>::load(&path)?;
    if ckpt.config.vocab_size != fe.vocab.len() {
        bail!(pngbert::Error::ShapeMismatch {
            tensor: "embeddings.token".into(),
            expected: vec![fe.vocab.len(), ckpt.config.hidden_size],
            found: vec![ckpt.config.vocab_size, ckpt.config.hidden_size],
        });
    }
    info!("loaded {} (step {})", path.display(), ckpt.step);
    Ok(ckpt)
}

fn write_log(path: &Path, log: &[StepLog]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(w, "step\tloss\tlr")?;
    for l in log {
        writeln!(w, "{}", l.to_line())?;
    }
    Ok(w.flush()?)
}

fn cmd_build(c: &RunConfig) -> Result<()> {
    let lexicon = load_lexicon(required(&c.paths.lexicon, "lexicon")?)?;
    let corpus = read_lines(&required(&c.paths.corpus, "corpus")?)?;
    let model = train_bpe(&corpus, c.build.vocab_size)?;
    let subwords = c.subwords_path();
    model.save(&subwords)?;
    let fe = Frontend::new(lexicon, model)?;
    let vocab_path = c.out_dir.join("vocab.txt");
    fe.vocab.save(&vocab_path)?;

    let prepared = fe.prepare(&corpus, c.max_len)?;
    let mut rng = substream(c.seed, Stream::Masking);
    let policy = c.policy()?;
    let masked: Vec<MaskedInput> = prepared
        .examples
        .iter()
        .map(|e| apply_masking(e, &policy, &mut rng, &fe.vocab))
        .collect();
    let masked_path = c.out_dir.join("masked.tsv");
    let file = File::create(&masked_path).with_context(|| format!("creating {}", masked_path.display()))?;
    write_masked(BufWriter::new(file), &masked)?;

    println!(
        "phonemes={}\tsubwords={}\ttotal_ids={}\tsentences={}\tskipped={}",
        fe.vocab.phoneme_count(),
        fe.vocab.subword_count(),
        fe.vocab.len(),
        prepared.examples.len(),
        prepared.skipped
    );
    info!(
        "wrote {}, {}, {}",
        subwords.display(),
        vocab_path.display(),
        masked_path.display()
    );
    Ok(())
}

fn cmd_pretrain(c: &RunConfig) -> Result<()> {
    let fe = frontend(c)?;
    let corpus = read_lines(&required(&c.paths.corpus, "corpus")?)?;
    let prepared = fe.prepare(&corpus, c.max_len)?;
    if prepared.skipped > 0 {
        log::warn!("skipped {} sentences longer than {}", prepared.skipped, c.max_len);
    }
    if prepared.examples.is_empty() {
        bail!(pngbert::Error::NoUsableData {
            skipped: prepared.skipped
        });
    }
    let model = c.model_config(fe.vocab.len());
    let train = c.train_config()?;
    let every = (train.num_steps / 20).max(1);
    let out = pretrain_examples::<f32>(&prepared.examples, &fe.vocab, &model, &train, None, |l| {
        if l.step % every == 0 || l.step + 1 == train.num_steps {
            info!("step {}\tloss {:.4}\tlr {:.2e}", l.step, l.loss, l.lr);
        }
    })?;
    let path = c.checkpoint_path();
    out.checkpoint.save(&path)?;
    write_log(&c.out_dir.join("pretrain_loss.tsv"), &out.log)?;
    let last = out.log.last().map_or(f64::NAN, |l| l.loss);
    println!(
        "checkpoint={}\tsteps={}\tparameters={}\tfinal_loss={last:.4}",
        path.display(),
        out.checkpoint.step,
        out.checkpoint.params.num_parameters()
    );
    Ok(())
}

fn cmd_eval(c: &RunConfig) -> Result<()> {
    let fe = frontend(c)?;
    let ckpt = load_checkpoint(c, &fe)?;
    let corpus = read_lines(&required(&c.paths.corpus, "corpus")?)?;
    let prepared = fe.prepare(&corpus, c.max_len.min(ckpt.config.max_positions))?;
    let report = evaluate(
        &ckpt.params,
        &ckpt.config,
        &prepared.examples,
        &fe.vocab,
        c.eval_mode()?,
        &c.policy()?,
        EVAL_SEED ^ c.seed,
    )?;
    println!("{}\tchance={:.4}", report.summary(), 1.0 / fe.vocab.len() as f64);
    Ok(())
}

fn cmd_finetune(c: &RunConfig) -> Result<()> {
    let fe = frontend(c)?;
    let ckpt = load_checkpoint(c, &fe)?;
    let examples = load_supervised(
        required(&c.paths.supervised, "supervised")?,
        &fe,
        c.max_len.min(ckpt.config.max_positions),
    )?;
    let freeze = FreezeSpec::top(c.finetune.trainable_top_layers);
    let out = finetune(&ckpt, &examples, freeze, &c.finetune_config()?)?;
    let path = c.out_dir.join("finetuned.ckpt");
    out.checkpoint.save(&path)?;
    write_log(&c.out_dir.join("finetune_loss.tsv"), &out.log)?;
    println!(
        "checkpoint={}\ttrainable_top_layers={}\thead_mse_before={:.5}\thead_mse_after={:.5}",
        path.display(),
        freeze.trainable_top_layers,
        out.initial_mse,
        out.final_mse
    );
    Ok(())
}

fn cmd_encode(c: &RunConfig, text: &str, output: &str) -> Result<()> {
    let fe = frontend(c)?;
    let ckpt = load_checkpoint(c, &fe)?;
    let input = fe.encode(text, ckpt.config.max_positions)?;
    let trace = forward(&input, &[], &ckpt.params, &ckpt.config, Mode::Eval)?;
    let enc = extract_phoneme_states(&trace, &input, &fe.vocab);
    let path = c.out_dir.join(output);
    write_phoneme_encoding(&path, &enc)?;
    println!(
        "encoding={}\tphonemes={}\thidden={}\tsymbols={}",
        path.display(),
        enc.states.nrows(),
        enc.states.ncols(),
        enc.phoneme_symbols.join(" ")
    );
    Ok(())
}

fn cmd_attention(c: &RunConfig, text: &str) -> Result<()> {
    let fe = frontend(c)?;
    let ckpt = load_checkpoint(c, &fe)?;
    let input = fe.encode(text, ckpt.config.max_positions)?;
    let trace = forward(&input, &[], &ckpt.params, &ckpt.config, Mode::Eval)?;
    let export = export_attention(&trace, &input);
    let dir = c.out_dir.join("attention");
    let files = write_attention_grids(&dir, &export.record)?;
    let tokens: Vec<&str> = input
        .token_ids
        .iter()
        .map(|&t| fe.vocab.symbol(t).unwrap_or("?"))
        .collect();
    std::fs::write(dir.join("tokens.txt"), tokens.join("\n") + "\n")
        .with_context(|| format!("writing {}", dir.display()))?;
    let scores: Vec<String> = export.layer_scores.iter().map(|s| format!("{s:.4}")).collect();
    println!(
        "dir={}\tfiles={}\tbaseline={:.4}\tlayer_scores={}",
        dir.display(),
        files.len(),
        export.baseline,
        scores.join(",")
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let c = resolve(&cli)?;
    let echoed = c.emit(cli.command.name())?;
    info!("resolved config written to {}\n{}", echoed.display(), c.to_toml());
    match &cli.command {
        Command::Build { .. } => cmd_build(&c),
        Command::Pretrain { .. } => cmd_pretrain(&c),
        Command::Eval { .. } => cmd_eval(&c),
        Command::Finetune { .. } => cmd_finetune(&c),
        Command::Encode { text, output } => cmd_encode(&c, text, output),
        Command::Attention { text } => cmd_attention(&c, text),
    }
}

fn category(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<pngbert::Error>() {
            return e.category();
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
        if cause.is::<toml::de::Error>() {
            return "config";
        }
    }
    "internal"
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PNGBERT_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let detail: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("error[{}]: {}", category(&e), detail.join(": "));
            ExitCode::FAILURE
        }
    }
}
