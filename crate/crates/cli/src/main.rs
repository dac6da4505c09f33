//! `rfspeech`: simulate a radar speech corpus, train the Radio UNet,
//! recover speech, score it and plot the artifacts.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use rfspeech_core::metrics::{evaluate, synthesize, Variant};
use rfspeech_core::model::{corpus_pairs, infer, read_loss_csv, CropPolicy, LossLog, NormStats, Trainer, TrainingState, LOSS_CSV_HEADER};
use rfspeech_core::signal::{read_matrix_dump, wav, write_matrix_dump, MatrixDump, MEL_DUMP_MAGIC};
use rfspeech_core::sim::{build_corpus, build_corpus_from_clips, synth, Corpus, Split};

pub const FINAL_CHECKPOINT: &str = "final.ckpt";

#[derive(Parser)]
#[command(name = "rfspeech", version, about = "Speech recovery from radar-sensed loudspeaker vibration", after_long_help = config::key_reference())]
struct Cli {
    /// JSON run configuration; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override radar.rng_seed and train.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Overwrite existing non-empty output directories.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a paired speech / RF corpus.
    Simulate(SimulateArgs),
    /// Train the network on a corpus.
    Train(TrainArgs),
    /// Recover speech from one RF trace.
    Infer(InferArgs),
    /// Score the test split.
    Eval(EvalArgs),
    /// Render a Mel dump or loss log as a PPM image.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output corpus directory [default: paths.corpus].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory of WAV clips instead of synthetic speech.
    #[arg(long)]
    speech_dir: Option<PathBuf>,
    /// Number of synthetic clips.
    #[arg(long)]
    clips: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus directory [default: paths.corpus].
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Run directory [default: paths.run].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    lr: Option<f32>,
    /// Use fixed crops (clip order, frame 0) instead of random ones.
    #[arg(long)]
    fixed_crops: bool,
    /// Continue from a checkpoint in the run directory.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// Checkpoint file (with its .json sidecar).
    #[arg(long)]
    checkpoint: PathBuf,
    /// RF trace, 16-bit mono WAV at 5100 Hz.
    #[arg(long)]
    rf: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "griffinlim")]
    variant: Variant,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint file [default: <paths.run>/final.ckpt].
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Corpus directory [default: paths.corpus].
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory [default: paths.eval].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated variants [default: eval.variants].
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
}

#[derive(Args)]
struct PlotArgs {
    /// Mel dump or loss CSV.
    input: PathBuf,
    /// Output PPM path.
    #[arg(long)]
    out: PathBuf,
}

/// Create `dir`, refusing to reuse a non-empty one unless forced.
fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .with_context(|| format!("reading {}", dir.display()))?
            .next()
            .is_some();
        if non_empty && !force {
            bail!("output directory {} is not empty; pass --force to overwrite", dir.display());
        }
        if non_empty {
            fs::remove_dir_all(dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("missing {what}: {} does not exist", path.display());
    }
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<Corpus> {
    require(&dir.join("manifest.json"), "corpus manifest (run `rfspeech simulate` first)")?;
    Ok(Corpus::load(dir)?)
}

fn load_checkpoint(path: &Path) -> Result<TrainingState> {
    require(path, "checkpoint (run `rfspeech train` first)")?;
    require(&TrainingState::sidecar_path(path), "checkpoint sidecar")?;
    Ok(TrainingState::load(path)?)
}

fn cmd_simulate(cfg: &mut RunConfig, a: SimulateArgs, force: bool) -> Result<()> {
    if let Some(d) = a.speech_dir {
        cfg.corpus.speech_dir = Some(d);
    }
    if let Some(n) = a.clips {
        cfg.corpus.synthetic_clips = n;
    }
    let out = a.out.unwrap_or_else(|| cfg.paths.corpus.clone());
    cfg.validate()?;
    prepare_dir(&out, force)?;
    let manifest = match &cfg.corpus.speech_dir {
        Some(dir) => build_corpus(dir, &cfg.radar, cfg.corpus.split, &out)?,
        None => {
            let clips = synth::synthetic_clips(cfg.corpus.synthetic_clips, cfg.radar.rng_seed)?;
            build_corpus_from_clips(clips, &cfg.radar, cfg.corpus.split, &out)?
        }
    };
    cfg.write_snapshot(&out)?;
    let total: f64 = manifest.clips.iter().map(|c| c.duration_s).sum();
    println!(
        "corpus {}: {} clips ({:.1} s), {} train / {} test",
        out.display(),
        manifest.clips.len(),
        total,
        manifest.count(Split::Train),
        manifest.count(Split::Test)
    );
    Ok(())
}

fn checkpoint_name(step: u64) -> String {
    format!("step{step:06}.ckpt")
}

fn cmd_train(cfg: &mut RunConfig, a: TrainArgs, force: bool) -> Result<()> {
    if let Some(s) = a.steps {
        cfg.train.steps = s;
    }
    if let Some(lr) = a.lr {
        cfg.train.lr = lr;
    }
    if a.fixed_crops {
        cfg.train.crop = CropPolicy::Fixed;
    }
    cfg.validate()?;
    let corpus_dir = a.corpus.unwrap_or_else(|| cfg.paths.corpus.clone());
    let out = a.out.unwrap_or_else(|| cfg.paths.run.clone());
    let corpus = load_corpus(&corpus_dir)?;
    let pairs = corpus_pairs(&corpus, Split::Train)?;
    let state = match &a.resume {
        Some(ckpt) => {
            let s = load_checkpoint(ckpt)?;
            if s.model != cfg.model {
                bail!("checkpoint {} was trained with a different model config", ckpt.display());
            }
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            s
        }
        None => {
            prepare_dir(&out, force)?;
            let stats = NormStats::fit(&pairs)?;
            TrainingState::new(cfg.model.clone(), stats, cfg.train.lr, cfg.train.seed)?
        }
    };
    let remaining = cfg.train.steps.saturating_sub(state.step);
    cfg.write_snapshot(&out)?;
    let mut trainer = Trainer::new(state, &pairs, &cfg.train)?;
    trainer.set_lr(cfg.train.lr);
    let mut log = LossLog::open(&out.join("loss.csv"), a.resume.is_some())?;
    let every = cfg.train.checkpoint_every;
    trainer.run(remaining, |rec, state| {
        log.record(rec)?;
        if every > 0 && rec.step % every == 0 {
            state.save(&out.join(checkpoint_name(rec.step)))?;
        }
        if rec.step % 50 == 0 {
            log::info!("step {} loss {:.4}", rec.step, rec.l1_loss);
        }
        Ok(())
    })?;
    let state = trainer.into_state();
    state.save(&out.join(FINAL_CHECKPOINT))?;
    println!("trained to step {}; checkpoint {}", state.step, out.join(FINAL_CHECKPOINT).display());
    Ok(())
}

fn cmd_infer(a: InferArgs, force: bool) -> Result<()> {
    let state = load_checkpoint(&a.checkpoint)?;
    require(&a.rf, "RF trace")?;
    let rf = wav::read(&a.rf)?;
    prepare_dir(&a.out, force)?;
    let mel = infer(&state, &rf)?;
    let dump_path = a.out.join("mel.r2smel");
    write_matrix_dump(&dump_path, &MatrixDump::from_mel(&mel))?;
    let speech = synthesize(Some(&state), &rf, a.variant, rfspeech_core::signal::DEFAULT_GL_ITERS)?;
    let wav_path = a.out.join("speech.wav");
    wav::write(&wav_path, &speech)?;
    println!(
        "{} frames -> {} and {}",
        mel.n_frames(),
        dump_path.display(),
        wav_path.display()
    );
    Ok(())
}

fn cmd_eval(cfg: &mut RunConfig, a: EvalArgs, threads: usize, force: bool) -> Result<()> {
    if let Some(v) = a.variants {
        cfg.eval.variants = v;
    }
    cfg.validate()?;
    let ckpt = a.checkpoint.unwrap_or_else(|| cfg.paths.run.join(FINAL_CHECKPOINT));
    let state = load_checkpoint(&ckpt)?;
    let corpus = load_corpus(&a.corpus.unwrap_or_else(|| cfg.paths.corpus.clone()))?;
    let out = a.out.unwrap_or_else(|| cfg.paths.eval.clone());
    prepare_dir(&out, force)?;
    let report = evaluate(&corpus, Some(&state), &cfg.eval.variants, cfg.eval.griffin_lim_iters, threads)?;
    report.write(&out.join("report.json"), &out.join("report.csv"))?;
    cfg.write_snapshot(&out)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<()> {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let image = if bytes.starts_with(MEL_DUMP_MAGIC) {
        plot::mel_heatmap(&read_matrix_dump(&a.input)?)
    } else if bytes.starts_with(LOSS_CSV_HEADER.as_bytes()) {
        plot::loss_curve(&read_loss_csv(&a.input)?)?
    } else {
        // Neither format: report the dump parser's verdict with its offset.
        MatrixDump::from_bytes(&bytes)?;
        unreachable!("a dump without the magic cannot parse");
    };
    fs::write(&a.out, image.to_ppm()).with_context(|| format!("writing {}", a.out.display()))?;
    println!("{}x{} image -> {}", image.width, image.height, a.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        bail!("--threads must be at least 1");
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_seed(cli.seed)?;
    match cli.cmd {
        Command::Simulate(a) => cmd_simulate(&mut cfg, a, cli.force),
        Command::Train(a) => cmd_train(&mut cfg, a, cli.force),
        Command::Infer(a) => cmd_infer(a, cli.force),
        Command::Eval(a) => cmd_eval(&mut cfg, a, cli.threads, cli.force),
        Command::Plot(a) => cmd_plot(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
