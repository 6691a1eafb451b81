//! The `procsift` command line: artifact generation, training, evaluation,
//! the HTTP service and an interactive single-session terminal.
//!
//! Exit codes: 0 on success, 1 on a domain error (bad artifact, infeasible
//! request, I/O), 2 on a usage error.

use std::error::Error;
use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aaf::Budget;
use crate::eval::{evaluate, sweep_training_fraction, train_tagger, EvalOptions, MetricsTable, ReportFormat, SweepSpec};
use crate::fixtures::{CARE_JSON, CARE_RESTRICTED_JSON};
use crate::model::{parse_model, serialize_model, AttrValue, Knowledge, StepType};
use crate::pipeline::{PipelineConfig, SmoothingDenominator};
use crate::reasoner::Semantics;
use crate::service::wire::{ApiConfig, ApiEvent, ApiExplain, ApiQuery, ApiStep, API_VERSION};
use crate::service::{serve, LiveSession, ServiceConfig, SessionSpec};
use crate::synth::{generate_dataset, generate_syn_model, read_dataset, write_dataset, Dataset, DatasetSpec, SynModelSpec};
use crate::tagger::{ArchSpec, EmbeddingConfig, Tagger, TrainConfig};

type DomainResult = Result<(), Box<dyn Error>>;

#[derive(Debug, Parser)]
#[command(name = "procsift", version, about = "Interpret low-level event traces against a declarative process model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Process models.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Labelled trace datasets.
    #[command(subcommand)]
    Data(DataCmd),
    /// Neural taggers.
    #[command(subcommand)]
    Tagger(TaggerCmd),
    /// Accuracy and latency of the tagger, mapping and reasoner scenarios.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Run the HTTP session service.
    Serve(ServeArgs),
    /// Interpret one trace interactively from the terminal.
    Repl(ReplArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// Randomly generated model with the synthetic benchmark's statistics.
    Syn,
    /// The toy care flow with a loose mapping.
    Care,
    /// The toy care flow with the restricted mapping and a precedence constraint.
    CareRestricted,
}

#[derive(Debug, Subcommand)]
enum ModelCmd {
    /// Write a model document.
    Gen {
        #[arg(long, value_enum, default_value = "syn")]
        preset: Preset,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum DataCmd {
    /// Generate valid labelled traces of the model; writes the dataset and a manifest.
    Gen {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated `length:count` pairs, e.g. `20:500,40:500`.
        #[arg(long, value_parser = parse_lengths)]
        lengths: Lengths,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Lengths(Vec<(usize, usize)>);

fn parse_lengths(s: &str) -> Result<Lengths, String> {
    s.split(',')
        .map(|part| {
            let (len, count) = part.split_once(':').ok_or_else(|| format!("expected length:count, got {part:?}"))?;
            let num = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
            Ok((num(len)?, num(count)?))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Lengths)
}

fn parse_arch(s: &str) -> Result<ArchSpec, String> {
    ArchSpec::from_name(s).ok_or_else(|| format!("unknown architecture {s:?}; use MA or MB_<window>"))
}

fn parse_k(s: &str) -> Result<K, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(K(None));
    }
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(K(Some(k))),
        _ => Err(format!("expected `auto` or a positive integer, got {s:?}")),
    }
}

fn parse_fractions(s: &str) -> Result<Fractions, String> {
    s.split(',')
        .map(|x| match x.trim().parse::<u32>() {
            Ok(r) if (1..=100).contains(&r) => Ok(r),
            _ => Err(format!("fractions are integers in 1..=100, got {x:?}")),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Fractions)
}

fn parse_holdout(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if (0.0..1.0).contains(&x) => Ok(x),
        _ => Err(format!("expected a fraction in [0, 1), got {s:?}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct K(Option<usize>);

#[derive(Debug, Clone, PartialEq)]
struct Fractions(Vec<u32>);

/// The seeded train/test split shared by training and evaluation.
#[derive(Debug, Clone, Args)]
struct SplitArgs {
    /// Share of traces (per length) held out as the test set.
    #[arg(long, default_value = "0.2", value_parser = parse_holdout)]
    holdout: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

impl SplitArgs {
    fn split(&self, ds: &Dataset) -> (Dataset, Dataset) {
        if self.holdout == 0.0 {
            return (ds.clone(), Dataset::default());
        }
        ds.split(self.holdout, self.split_seed)
    }
}

#[derive(Debug, Clone, Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Seed for initialization, batch order and dropout.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// One-hot event types instead of a learned embedding.
    #[arg(long)]
    one_hot: bool,
}

impl TrainArgs {
    fn config(&self, arch: &ArchSpec) -> TrainConfig {
        let d = TrainConfig::for_arch(arch);
        TrainConfig {
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            seed: self.seed,
            ..d
        }
    }

    fn embedding(&self) -> EmbeddingConfig {
        if self.one_hot {
            EmbeddingConfig::one_hot()
        } else {
            EmbeddingConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
enum TaggerCmd {
    /// Train on the training part of the split; the held-out part records validation loss.
    Train {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "MB_5", value_parser = parse_arch)]
        arch: ArchSpec,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
}

#[derive(Debug, Clone, Args)]
struct PipelineArgs {
    /// Beam width, or `auto` for the mapping's maximum degree.
    #[arg(long, default_value = "auto", value_parser = parse_k)]
    k: K,
    #[arg(long, default_value_t = 0.001)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pseudo_count: f64,
    /// Count only the valid activities in the smoothing denominator.
    #[arg(long)]
    valid_denominator: bool,
    /// Solver budget (decisions plus conflicts) per reasoner query.
    #[arg(long)]
    budget: Option<u64>,
}

impl PipelineArgs {
    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.k.0,
            gamma: self.gamma,
            pseudo_count: self.pseudo_count,
            denominator: if self.valid_denominator { SmoothingDenominator::Valid } else { SmoothingDenominator::Universe },
        }
    }

    fn api(&self) -> ApiConfig {
        let p = self.pipeline();
        ApiConfig {
            k: p.k,
            gamma: Some(p.gamma),
            pseudo_count: Some(p.pseudo_count),
            denominator: Some(p.denominator),
            budget: self.budget,
        }
    }

    fn eval(&self, parallel: bool) -> EvalOptions {
        EvalOptions {
            pipeline: self.pipeline(),
            budget: self.budget.map_or_else(Budget::default, |nodes| Budget { nodes }),
            parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Plot,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Plot => ReportFormat::PlotData,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct ReportArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate traces in parallel (per-event times then include contention).
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Subcommand)]
enum EvalCmd {
    /// Score a trained tagger on the held-out part of the split (all traces with `--holdout 0`).
    Run {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        tagger: PathBuf,
        /// Training fraction recorded in the rows.
        #[arg(long, default_value_t = 100)]
        fraction: u32,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Retrain on growing shares of the training part and score each on the held-out part.
    Sweep {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "MB_5", value_parser = parse_arch)]
        arch: ArchSpec,
        #[arg(long, default_value = "20,40,60,80,90,100", value_parser = parse_fractions)]
        fractions: Fractions,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory of model documents [env: PROCSIFT_MODEL_DIR]
    #[arg(long)]
    model_dir: Option<PathBuf>,
    /// Directory of trained taggers [env: PROCSIFT_TAGGER_DIR]
    #[arg(long)]
    tagger_dir: Option<PathBuf>,
    /// Write one journal per session here [env: PROCSIFT_JOURNAL_DIR]
    #[arg(long)]
    journal_dir: Option<PathBuf>,
    /// Drop sessions idle for this many seconds.
    #[arg(long, default_value_t = 1800)]
    idle_ttl_secs: u64,
    #[arg(long, default_value_t = 1024)]
    max_sessions: usize,
}

#[derive(Debug, Args)]
struct ReplArgs {
    #[arg(long)]
    model: PathBuf,
    /// Trained tagger; without one, valid activities are ranked uniformly.
    #[arg(long)]
    tagger: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
}

fn load_model(path: &Path) -> Result<Knowledge, Box<dyn Error>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(parse_model(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> DomainResult {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn report(table: &MetricsTable, args: &ReportArgs, stdout: &mut dyn Write) -> DomainResult {
    emit(&table.render(args.format.into())?, args.out.as_deref(), stdout)
}

/// Runs the command line on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command, stdin, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let stdin = std::io::stdin();
    run(std::env::args_os(), &mut stdin.lock(), &mut std::io::stdout(), &mut std::io::stderr())
}

fn dispatch(cmd: Command, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> DomainResult {
    match cmd {
        Command::Model(ModelCmd::Gen { preset, seed, out }) => {
            let doc = match preset {
                Preset::Syn => serialize_model(&generate_syn_model(&SynModelSpec::default(), seed)?),
                Preset::Care => serialize_model(&parse_model(CARE_JSON)?),
                Preset::CareRestricted => serialize_model(&parse_model(CARE_RESTRICTED_JSON)?),
            };
            emit(&doc, out.as_deref(), stdout)
        }
        Command::Data(DataCmd::Gen { model, lengths, seed, out }) => {
            let k = load_model(&model)?;
            let spec = DatasetSpec { lengths: lengths.0, seed, generator: Default::default() };
            let ds = generate_dataset(&k, &spec)?;
            let m = write_dataset(&out, &k, &ds, &spec)?;
            writeln!(stderr, "wrote {} traces, {} events to {}", m.traces, m.events, out.display())?;
            Ok(())
        }
        Command::Tagger(TaggerCmd::Train { model, data, arch, out, split, train }) => {
            let k = load_model(&model)?;
            let ds = read_dataset(&data, &k)?;
            let (trn, val) = split.split(&ds);
            let cfg = train.config(&arch);
            writeln!(stderr, "training {} on {} traces ({} held out), {} epochs", arch.name(), trn.len(), val.len(), cfg.epochs)?;
            let t = train_tagger(&k, &trn, &val, &arch, &train.embedding(), &cfg)?;
            let last = |v: &[f64]| v.last().map_or("-".to_string(), |x| format!("{x:.4}"));
            writeln!(stderr, "loss {} (validation {})", last(&t.meta().train_loss), last(&t.meta().validation_loss))?;
            t.save(&out)?;
            Ok(())
        }
        Command::Eval(EvalCmd::Run { model, data, tagger, fraction, split, pipeline, report: r }) => {
            let k = Arc::new(load_model(&model)?);
            let ds = read_dataset(&data, &k)?;
            let test = if split.holdout == 0.0 { ds } else { split.split(&ds).1 };
            let t = Tagger::load(&tagger)?;
            let ev = evaluate(&test, &t, &k, &pipeline.eval(r.parallel), &t.arch().name(), fraction)?;
            if ev.total.deviations + ev.total.unresolved > 0 {
                writeln!(stderr, "{} deviations, {} unresolved events", ev.total.deviations, ev.total.unresolved)?;
            }
            report(&ev.table, &r, stdout)
        }
        Command::Eval(EvalCmd::Sweep { model, data, arch, fractions, split, train, pipeline, report: r }) => {
            let k = Arc::new(load_model(&model)?);
            let ds = read_dataset(&data, &k)?;
            let (trn, test) = split.split(&ds);
            if test.is_empty() {
                return Err("the sweep needs a held-out test set (--holdout > 0)".into());
            }
            let spec = SweepSpec {
                fractions: fractions.0,
                train: train.config(&arch),
                embedding: train.embedding(),
                seed: train.seed,
                arch,
            };
            let table = sweep_training_fraction(&trn, &test, &k, &spec, &pipeline.eval(r.parallel), |ev| {
                if let Some(row) = ev.table.rows.last() {
                    let _ = writeln!(
                        stderr,
                        "fraction {:>3}%: T {:.2} T+A {:.2} T+R {:.2}",
                        row.fraction, row.acc_t, row.acc_ta, row.acc_tr
                    );
                }
            })?;
            report(&table, &r, stdout)
        }
        Command::Serve(a) => {
            let env = ServiceConfig::from_env();
            let config = ServiceConfig {
                model_dir: a.model_dir.or(env.model_dir),
                tagger_dir: a.tagger_dir.or(env.tagger_dir),
                journal_dir: a.journal_dir.or(env.journal_dir),
                idle_ttl: Duration::from_secs(a.idle_ttl_secs),
                max_sessions: a.max_sessions,
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(a.addr, config))?;
            Ok(())
        }
        Command::Repl(a) => {
            let k = Arc::new(load_model(&a.model)?);
            let tagger = match &a.tagger {
                Some(p) => Some((p.display().to_string(), Arc::new(Tagger::load(p)?))),
                None => None,
            };
            let spec = SessionSpec { knowledge: k, model: a.model.display().to_string(), tagger, config: a.pipeline.api() };
            let mut live = LiveSession::new("repl".into(), spec, None)?;
            repl(&mut live, stdin, stdout)?;
            Ok(())
        }
    }
}

const REPL_HELP: &str = "\
commands:
  event <type> [name=value ...]              feed the next event
  query <index> <activity> [<step> <instance>] [skeptical]
  explain <index> <activity> [<step> <instance>]
  state                                      session state as JSON
  finalize                                   close the trace
  help | quit
";

fn step_line(s: &ApiStep) -> String {
    let ranked: Vec<String> = s.ranked.iter().map(|r| format!("{} {:.3}", r.activity, r.probability)).collect();
    let mut line = format!("#{} {} -> ", s.index, s.event_type);
    if s.deviation {
        line.push_str("DEVIATION");
    } else {
        line.push_str(&ranked.join(", "));
    }
    line.push_str(&format!("  [valid: {}]", s.valid.join(" ")));
    if s.unresolved {
        line.push_str(" (unresolved)");
    }
    line
}

fn parse_reading(words: &[&str]) -> Result<(usize, String, Option<StepType>, Option<u32>, bool), String> {
    let skeptical = words.last() == Some(&"skeptical");
    let words = if skeptical { &words[..words.len() - 1] } else { words };
    let index = words.first().and_then(|w| w.parse().ok()).ok_or("expected an event index")?;
    let activity = words.get(1).ok_or("expected an activity")?.to_string();
    let (step, instance) = match words.get(2..) {
        Some([]) | None => (None, None),
        Some([s, j]) => (
            Some(StepType::from_name(s).ok_or_else(|| format!("unknown step {s:?}"))?),
            Some(j.parse().map_err(|_| format!("bad instance {j:?}"))?),
        ),
        Some(_) => return Err("give both step and instance, or neither".into()),
    };
    Ok((index, activity, step, instance, skeptical))
}

fn json<T: serde::Serialize>(x: &T) -> String {
    serde_json::to_string(x).expect("api payloads serialize")
}

/// Reads commands until end of input or `quit`; errors are reported and the loop continues.
pub fn repl(live: &mut LiveSession, input: &mut dyn BufRead, out: &mut dyn Write) -> std::io::Result<()> {
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let Some((&cmd, rest)) = words.split_first() else { continue };
        let result: Result<String, String> = match cmd {
            "quit" | "exit" => return Ok(()),
            "help" => Ok(REPL_HELP.trim_end().to_string()),
            "event" | "e" => match rest.split_first() {
                None => Err("expected an event type".into()),
                Some((etype, attrs)) => {
                    let attrs = attrs
                        .iter()
                        .map(|kv| {
                            let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected name=value, got {kv:?}"))?;
                            let v = v.parse::<f64>().map_or_else(|_| AttrValue::Cat(v.to_string()), AttrValue::Num);
                            Ok((k.to_string(), v))
                        })
                        .collect::<Result<_, String>>();
                    attrs.and_then(|attrs| {
                        let ev = ApiEvent { etype: etype.to_string(), attrs, index: None };
                        live.push(&ev).map(|s| step_line(&s)).map_err(|e| e.to_string())
                    })
                }
            },
            "query" | "q" => parse_reading(rest).and_then(|(index, activity, step, instance, skeptical)| {
                let semantics = if skeptical { Semantics::Skeptical } else { Semantics::Credulous };
                let q = ApiQuery { v: API_VERSION, index, activity, step, instance, semantics };
                live.query(&q).map(|a| json(&a)).map_err(|e| e.to_string())
            }),
            "explain" | "x" => parse_reading(rest).and_then(|(index, activity, step, instance, _)| {
                let q = ApiExplain { v: API_VERSION, index, activity, step, instance };
                live.explain(&q).map(|a| json(&a)).map_err(|e| e.to_string())
            }),
            "state" => Ok(json(&live.state())),
            "finalize" => live.finalize().map(|s| json(&s)).map_err(|e| e.to_string()),
            other => Err(format!("unknown command {other:?}; try `help`")),
        };
        match result {
            Ok(text) => writeln!(out, "{text}")?,
            Err(e) => writeln!(out, "error: {e}")?,
        }
    }
}

#[cfg(test)]
mod tests;
