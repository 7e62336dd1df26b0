use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use divgen::data::{parse_mr, tokenize, LoadOptions};
use divgen::decoding::NBestEntry;
use divgen::metrics::MetricsReport;
use divgen::pipeline::{self, LoadedModel};
use divgen::training::{read_assignments, summarize_assignments, Precision};
use divgen::{Error, RunConfig};

use crate::args::{
    AssignmentArgs, Command, DecodeOverrides, EvaluateArgs, GenerateArgs, Overrides, PrecisionArg, TrainArgs,
};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => train(a),
        Command::Generate(a) => generate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Assignments(a) => assignments(a),
    }
}

/// 2 for configuration and usage problems, 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_config() => 2,
        _ => 1,
    }
}

fn load_config(common: &Overrides, fallback: Option<&Path>) -> Result<RunConfig> {
    let mut cfg = match (&common.config, fallback) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(path)) if path.is_file() => RunConfig::load(path)?,
        _ => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    if let Some(p) = common.precision {
        cfg.precision = match p {
            PrecisionArg::P32 => Precision::F32,
            PrecisionArg::P64 => Precision::F64,
        };
    }
    Ok(cfg)
}

fn apply_decode(cfg: &mut RunConfig, d: &DecodeOverrides) {
    if let Some(a) = d.alpha {
        cfg.decode.alpha = a;
    }
    if let Some(b) = d.beta {
        cfg.decode.beta = b;
    }
    if let Some(n) = d.beam_size {
        cfg.decode.beam_size = n;
    }
    if let Some(n) = d.max_len {
        cfg.decode.max_len = n;
    }
    if d.block_repeats {
        cfg.decode.block_repeat_beginnings = true;
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.common, None)?;
    if let Some(out) = args.output {
        cfg.output_dir = out;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    let train_path = cfg
        .data
        .train
        .clone()
        .ok_or_else(|| Error::Config("no training data configured (data.train)".into()))?;
    let train = pipeline::load_examples(&train_path, &cfg)?;
    let valid = match &cfg.data.valid {
        Some(p) => Some(pipeline::load_examples(p, &cfg)?),
        None => None,
    };
    let report = pipeline::train(&cfg, &train, valid.as_deref(), &cfg.output_dir)?;
    println!(
        "trained {} member(s) for {} epoch(s) on {} instances; artifacts in {}",
        report.members,
        report.epochs.len(),
        report.train_instances,
        cfg.output_dir.display()
    );
    if let Some(ppl) = report.epochs.last().and_then(|e| e.valid_perplexity.as_ref()) {
        for (k, p) in ppl.iter().enumerate() {
            println!("member {k}: validation perplexity {p:.4}");
        }
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut cfg = load_config(&args.common, Some(&args.run.join("config.json")))?;
    apply_decode(&mut cfg, &args.decode);
    cfg.decode.validate().map_err(Error::Config)?;
    let input = fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;

    let valid_path = args.valid.clone().or_else(|| cfg.data.valid.clone());
    let member = match (args.member, valid_path) {
        (Some(m), _) => m,
        (None, Some(path)) => {
            let valid = pipeline::load_examples(&path, &cfg)?;
            let (m, ppl) = pipeline::select_member(&args.run, &valid)?;
            log::info!("validation perplexities {ppl:?}; using member {m}");
            m
        }
        (None, None) => {
            log::warn!("no validation data and no --member; using member 0");
            0
        }
    };
    let model = LoadedModel::load(&args.run, member)?.with_precision(cfg.precision);

    let mut text = String::new();
    let mut nbest = String::new();
    for (i, line) in input.lines().enumerate() {
        let mr = parse_mr(line).with_context(|| format!("input line {}", i + 1))?;
        let (source, hyps) = model.decode(&mr, &cfg.decode)?;
        text.push_str(&hyps[0].words(&source, &model.vocab).join(" "));
        text.push('\n');
        for (rank, h) in hyps.iter().enumerate() {
            let entry = NBestEntry::new(line.trim(), rank + 1, h, &source, &model.vocab);
            nbest.push_str(&serde_json::to_string(&entry)?);
            nbest.push('\n');
        }
    }
    match &args.output {
        Some(path) => fs::write(path, &text).map_err(|e| Error::io(path, e))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    if let Some(path) = &args.nbest {
        fs::write(path, &nbest).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let generated = fs::read_to_string(&args.generated).map_err(|e| Error::io(&args.generated, e))?;
    let outputs: Vec<Vec<String>> = generated.lines().map(tokenize).collect();
    let examples = divgen::data::load_dataset(&args.data, LoadOptions::default())?;
    let mut report = MetricsReport::compute(&outputs, &examples)?;
    if let Some(run) = &args.run {
        report.perplexity = Some(LoadedModel::load(run, args.member)?.perplexity(&examples)?);
    }
    print!("{}", report.to_table());
    match &args.json {
        Some(path) => fs::write(path, report.to_json()).map_err(|e| Error::io(path, e))?,
        None => println!("{}", report.to_json()),
    }
    Ok(())
}

fn assignments(args: AssignmentArgs) -> Result<()> {
    let file = fs::File::open(&args.log).map_err(|e| Error::io(&args.log, e))?;
    let log = read_assignments(file)?;
    let labels = match &args.labels {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let parsed = text
                .lines()
                .enumerate()
                .map(|(i, l)| {
                    l.trim()
                        .parse::<usize>()
                        .with_context(|| format!("{} line {}: bad label", path.display(), i + 1))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(parsed)
        }
        None => None,
    };
    let summary = summarize_assignments(&log, args.members.unwrap_or(0), labels.as_deref());
    match summary.epoch {
        Some(e) => println!("epoch {e}"),
        None => println!("empty log"),
    }
    let total: usize = summary.counts.iter().sum();
    for (k, c) in summary.counts.iter().enumerate() {
        let pct = if total == 0 { 0.0 } else { 100.0 * *c as f64 / total as f64 };
        println!("member {k}: {c} ({pct:.1}%)");
    }
    if let Some(p) = summary.purity {
        println!("purity: {:.4}", p);
    }
    Ok(())
}
