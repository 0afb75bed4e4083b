use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use hme_core::api::{recognize_with_oracle, Recognizer};
use hme_core::config::Config;
use hme_core::eval::{confusions_csv, EvalReport};
use hme_core::extract::{read_manifest, write_manifest, PeRule};
use hme_core::ink::{load_inkml_file, parse_strokes_json, write_inkml};
use hme_core::model::train::{prepare_examples, write_metrics_csv};
use hme_core::model::{train, Checkpoint, Control};
use hme_core::pipeline::{build_manifest, evaluate, load_inkml_dir};
use hme_core::srt::{to_lg, Srt};
use hme_core::synth::{render, LayoutGenerator};

#[derive(Parser)]
#[command(name = "hme", version, about = "Online handwritten math expression recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config sources shared by the commands that need one.
#[derive(clap::Args)]
struct ConfigArgs {
    /// `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set epochs=20`; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                text.parse::<Config>().with_context(|| format!("in {}", p.display()))?
            }
            None => Config::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Inkml,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a directory of InkML (+LG) files into a training manifest
    ExtractPaths {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated path sources (PE1, PE2, PE3, CQ)
        #[arg(long)]
        rules: Option<String>,
        #[arg(long)]
        pe3_count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Train a classifier on a manifest
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss CSV; defaults to the checkpoint path with `.metrics.csv`
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Recognize one expression and print the result as JSON
    Recognize {
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// Guessed from the file extension when omitted
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        /// Classify with the sample's own ground truth instead of a model
        #[arg(long)]
        oracle: bool,
    },
    /// Score a labelled test directory
    Eval {
        #[arg(long, required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// JSON report; text and confusion CSVs are written next to it
        #[arg(long)]
        report: PathBuf,
        /// Score the ground truth against itself
        #[arg(long)]
        oracle: bool,
    },
    /// Serve recognition over HTTP
    Serve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Only allow this origin (default: any)
        #[arg(long)]
        cors_origin: Option<String>,
    },
    /// Write synthetic InkML + LG samples
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 6)]
        max_symbols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a complete config file with the effective values
    Config {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::ExtractPaths { input, out, rules, pe3_count, seed, cfg } => {
            let mut cfg = cfg.load()?;
            if let Some(r) = rules {
                cfg.set("rules", &r)?;
            }
            if let Some(n) = pe3_count {
                cfg.extract.pe3_count = n;
            }
            if let Some(s) = seed {
                cfg.extract.seed = s;
            }
            extract_paths(&input, &out, &cfg)
        }
        Command::Train { manifest, out, metrics, cfg } => {
            let metrics = metrics.unwrap_or_else(|| out.with_extension("metrics.csv"));
            train_cmd(&manifest, &out, &metrics, &cfg.load()?)
        }
        Command::Recognize { checkpoint, input, format, oracle } => {
            recognize_cmd(checkpoint.as_deref(), &input, format, oracle)
        }
        Command::Eval { checkpoint, input, report, oracle } => eval_cmd(checkpoint.as_deref(), &input, &report, oracle),
        Command::Serve { checkpoint, bind, cors_origin } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let rec = Recognizer::from_checkpoint(&ck)?;
            let origin = cors_origin.map(|o| o.parse()).transpose().context("invalid --cors-origin")?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(hme_core::service::serve(rec, bind, origin))?;
            Ok(())
        }
        Command::Synth { out, count, max_symbols, seed } => synth(&out, count, max_symbols, seed),
        Command::Config { cfg } => {
            print!("{}", cfg.load()?.to_text());
            Ok(())
        }
    }
}

fn extract_paths(input: &Path, out: &Path, cfg: &Config) -> Result<()> {
    let (samples, unreadable) = load_inkml_dir(input).with_context(|| format!("listing {}", input.display()))?;
    for (p, e) in &unreadable {
        eprintln!("warning: skipping {}: {e}", p.display());
    }
    let (records, skipped) = build_manifest(&samples, &cfg.extract, cfg.recognize.spacing);
    for (id, e) in &skipped {
        eprintln!("warning: skipping sample {id}: {e}");
    }
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    write_manifest(BufWriter::new(file), &records)?;

    let mut counts: BTreeMap<&str, usize> = cfg.extract.rules.iter().map(|r| (r.name(), 0)).collect();
    for r in &records {
        *counts.entry(r.rule.name()).or_default() += 1;
    }
    for rule in PeRule::ALL {
        if let Some(n) = counts.get(rule.name()) {
            eprintln!("{:<4} {n}", rule.name());
        }
    }
    eprintln!(
        "{} paths from {} samples; skipped {} unreadable files and {} unusable samples",
        records.len(),
        samples.len() - skipped.len(),
        unreadable.len(),
        skipped.len()
    );
    Ok(())
}

fn train_cmd(manifest: &Path, out: &Path, metrics: &Path, cfg: &Config) -> Result<()> {
    let file = File::open(manifest).with_context(|| format!("opening {}", manifest.display()))?;
    let records = read_manifest(BufReader::new(file))?;
    let save = |params| Checkpoint::new(params, cfg.recognize.spacing, cfg.recognize.off_stroke).save(out);
    if cfg.train.epochs == 0 {
        save(&hme_core::model::ModelParams::init(cfg.train.hyper))?;
        write_metrics_csv(File::create(metrics)?, &[])?;
        eprintln!("epochs = 0: wrote initial weights to {}", out.display());
        return Ok(());
    }
    let examples = prepare_examples(&records, cfg.recognize.off_stroke)?;
    eprintln!("training on {} paths", examples.len());
    let outcome = train(&examples, &cfg.train, |m, _| {
        let val = m.val_total.map(|v| format!("  val {v:.4}")).unwrap_or_default();
        eprintln!("epoch {:>4}  loss {:.4}  ctc {:.4}  constraint {:.4}{val}", m.epoch, m.total, m.ctc, m.ce);
        Control::Continue
    })?;
    save(&outcome.best)?;
    write_metrics_csv(BufWriter::new(File::create(metrics)?), &outcome.history)?;
    eprintln!("wrote {} and {}", out.display(), metrics.display());
    Ok(())
}

fn recognize_cmd(checkpoint: Option<&Path>, input: &Path, format: Option<InputFormat>, oracle: bool) -> Result<()> {
    let format = match format {
        Some(f) => f,
        None if input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) => InputFormat::Json,
        None => InputFormat::Inkml,
    };
    let sample = match format {
        InputFormat::Inkml => load_inkml_file(input)?,
        InputFormat::Json => {
            let bytes = std::fs::read(input).with_context(|| format!("reading {}", input.display()))?;
            parse_strokes_json(&input.display().to_string(), &bytes)?
        }
    };
    let result = if oracle {
        let opts = match checkpoint {
            Some(p) => Recognizer::from_checkpoint(&Checkpoint::load(p)?)?.options().clone(),
            None => Default::default(),
        };
        recognize_with_oracle(&sample, &opts)?
    } else {
        let ck = Checkpoint::load(checkpoint.expect("required by clap"))?;
        Recognizer::from_checkpoint(&ck)?.recognize(&sample)?
    };
    let text = serde_json::to_string_pretty(&result)?;
    println!("{text}");
    Ok(())
}

fn eval_cmd(checkpoint: Option<&Path>, input: &Path, report_path: &Path, oracle: bool) -> Result<()> {
    let (samples, unreadable) = load_inkml_dir(input).with_context(|| format!("listing {}", input.display()))?;
    for (p, e) in &unreadable {
        eprintln!("warning: skipping {}: {e}", p.display());
    }
    let report = if oracle {
        let truths: Vec<&Srt> = samples.iter().filter_map(|s| s.ground_truth.as_ref()).collect();
        let pairs: Vec<(Option<&Srt>, &Srt)> = truths.iter().map(|&t| (Some(t), t)).collect();
        EvalReport::from_pairs(&pairs, samples.len() - truths.len())
    } else {
        let ck = Checkpoint::load(checkpoint.expect("required by clap"))?;
        let rec = Recognizer::from_checkpoint(&ck)?;
        evaluate(rec.params(), &samples, rec.options())
    };
    std::fs::write(report_path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", report_path.display()))?;
    let text = report.to_text();
    std::fs::write(report_path.with_extension("txt"), &text)?;
    std::fs::write(report_path.with_extension("nodes.csv"), confusions_csv(&report.node_confusions))?;
    std::fs::write(report_path.with_extension("edges.csv"), confusions_csv(&report.edge_confusions))?;
    print!("{text}");
    Ok(())
}

fn synth(out: &Path, count: usize, max_symbols: usize, seed: u64) -> Result<()> {
    if max_symbols == 0 {
        bail!("--max-symbols must be positive");
    }
    std::fs::create_dir_all(out)?;
    let mut gen = LayoutGenerator::new(seed, max_symbols);
    for i in 0..count {
        let id = format!("synth_{i:04}");
        let sample = render(&id, &gen.next_layout(), 0.02, seed.wrapping_add(i as u64))?;
        let truth = sample.ground_truth.as_ref().context("rendered sample has no ground truth")?;
        std::fs::write(out.join(format!("{id}.inkml")), write_inkml(&sample))?;
        let mut lg = BufWriter::new(File::create(out.join(format!("{id}.lg")))?);
        write!(lg, "{}", to_lg(truth))?;
        lg.flush()?;
    }
    eprintln!("wrote {count} samples to {}", out.display());
    Ok(())
}
