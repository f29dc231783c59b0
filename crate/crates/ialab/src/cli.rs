//! The `ialab` command line.
//!
//! Exit codes: 0 success, 1 domain error (bad file, unknown token, illegal
//! play), 2 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ialab_core::corpus::{self, build_vocab, GenConfig, RECONSTRUCT_BUDGET};
use ialab_core::experiment::{Cell, ExperimentSpec, Report, TestKind};
use ialab_core::play::{self, reconstruct, PlayError, Reconstruction};
use ialab_core::seqmodel::{self, init_model, EpochLog, ModelConfig, TrainObserver};
use ialab_core::{make_arena, parse_type, Lang, MoveRef, Rule, TypeTree, Violation};

use crate::corpus_file::{self, LoadedCorpus};
use crate::model_file;
use crate::parallel::{self, SharedProgress};
use crate::pointed_file;
use crate::report;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "IALAB_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "ialab", version, about = "Generate, check and learn plays of Idealized Algol game semantics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a corpus of random legal plays.
    Gen(GenArgs),
    /// Check pointed plays or pointer-free corpus plays for legality.
    Check(CheckArgs),
    /// Apply random token edits to every play of a corpus.
    Perturb(PerturbArgs),
    /// Train an LSTM model on a corpus.
    Train(TrainArgs),
    /// Per-token perplexity of a model on a corpus.
    Eval(EvalArgs),
    /// Run the perturbation or cross-language experiment over a grid.
    Experiment(ExperimentArgs),
    /// Render SVG figures from a report CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LangArg {
    Seq,
    Conc,
}

impl From<LangArg> for Lang {
    fn from(l: LangArg) -> Lang {
        match l {
            LangArg::Seq => Lang::Sequential,
            LangArg::Conc => Lang::Concurrent,
        }
    }
}

fn parse_arena(s: &str) -> Result<TypeTree, String> {
    parse_type(s).map_err(|e| e.to_string())
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x <= 1.0 => Ok(x),
        _ => Err("expected a number in (0, 1]".into()),
    }
}

fn parse_probability(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if (0.0..=1.0).contains(&x) => Ok(x),
        _ => Err("expected a number in [0, 1]".into()),
    }
}

fn parse_positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        _ => Err("expected a positive number".into()),
    }
}

fn parse_non_negative_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.is_finite() => Ok(x),
        _ => Err("expected a non-negative number".into()),
    }
}

fn parse_positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err("expected a positive integer".into()),
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Arena type, e.g. "(unit -> unit) -> unit".
    #[arg(long, value_parser = parse_arena)]
    arena: TypeTree,
    #[arg(long, value_enum)]
    lang: LangArg,
    #[arg(long, value_parser = parse_positive)]
    count: usize,
    #[arg(long, default_value_t = 50, value_parser = parse_positive)]
    max_len: usize,
    /// Probability of stopping at a point with no pending question.
    #[arg(long, default_value_t = 0.05, value_parser = parse_probability)]
    p_stop: f64,
    /// Keep only plays in which every question is answered.
    #[arg(long)]
    complete_only: bool,
    #[arg(long)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputFormat {
    /// Corpus files start with `#version`, anything else is pointed.
    Auto,
    Pointed,
    Tokens,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Pointed-play file or corpus file; `-` reads standard input.
    input: PathBuf,
    /// Language to check against; corpus files default to their header.
    #[arg(long, value_enum)]
    lang: Option<LangArg>,
    /// Arena of a pointed-play file.
    #[arg(long, value_parser = parse_arena)]
    arena: Option<TypeTree>,
    #[arg(long, value_enum, default_value = "auto")]
    format: InputFormat,
}

#[derive(Debug, Args)]
struct PerturbArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Edit budget as a fraction of each play's length.
    #[arg(long, default_value_t = 0.1, value_parser = parse_fraction)]
    ratio: f64,
    #[arg(long)]
    seed: u64,
    /// Re-roll each play until no pointer assignment makes it legal.
    #[arg(long)]
    require_illegal: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Model hyperparameters; unset flags keep the command's defaults.
#[derive(Debug, Args, Default)]
struct ModelArgs {
    #[arg(long, value_parser = parse_positive)]
    embed_dim: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    hidden_dim: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    layers: Option<usize>,
    /// Truncated backpropagation window.
    #[arg(long, value_parser = parse_positive)]
    unroll: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    batch: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    epochs: Option<usize>,
    /// Initial learning rate.
    #[arg(long, value_parser = parse_positive_f64)]
    lr: Option<f64>,
    /// Epochs at the initial rate before decay starts.
    #[arg(long)]
    lr_flat_epochs: Option<usize>,
    #[arg(long, value_parser = parse_positive_f64)]
    lr_decay: Option<f64>,
    #[arg(long, value_parser = parse_positive_f64)]
    max_grad_norm: Option<f64>,
    #[arg(long, value_parser = parse_non_negative_f64)]
    init_scale: Option<f64>,
}

impl ModelArgs {
    fn apply(&self, cfg: &mut ModelConfig) {
        let set = |dst: &mut usize, src: Option<usize>| *dst = src.unwrap_or(*dst);
        set(&mut cfg.embed_dim, self.embed_dim);
        set(&mut cfg.hidden_dim, self.hidden_dim);
        set(&mut cfg.layers, self.layers);
        set(&mut cfg.unroll, self.unroll);
        set(&mut cfg.batch, self.batch);
        set(&mut cfg.epochs, self.epochs);
        set(&mut cfg.lr.flat_epochs, self.lr_flat_epochs);
        cfg.lr.initial = self.lr.unwrap_or(cfg.lr.initial);
        cfg.lr.decay = self.lr_decay.unwrap_or(cfg.lr.decay);
        cfg.max_grad_norm = self.max_grad_norm.unwrap_or(cfg.max_grad_norm);
        cfg.init_scale = self.init_scale.unwrap_or(cfg.init_scale);
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Seeds weight initialisation.
    #[arg(long)]
    seed: u64,
    /// Where to write the model.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 1, value_parser = parse_positive)]
    threads: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExperimentKind {
    Perturb,
    Cross,
    /// Both tests on the same trained models.
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Grid {
    /// Orders 1-2, widths 1 and 5, 10k plays, 128 units.
    Desk,
    /// Orders 1-3, widths 1 and 5, 10k and 100k plays, 200 units.
    Full,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentKind,
    #[arg(long, value_enum, default_value = "desk")]
    grid: Grid,
    #[arg(long)]
    seed: u64,
    #[arg(long, env = OUT_DIR_ENV, default_value = "ialab-out")]
    out_dir: PathBuf,
    /// Grid cells trained at the same time.
    #[arg(long, default_value_t = 1, value_parser = parse_positive)]
    threads: usize,
    #[arg(long, value_enum, value_delimiter = ',')]
    langs: Option<Vec<LangArg>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    orders: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    widths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_positive)]
    train_sizes: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_positive)]
    validation_size: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    test_size: Option<usize>,
    #[arg(long, value_parser = parse_positive)]
    max_len: Option<usize>,
    #[arg(long, value_parser = parse_fraction)]
    ratio: Option<f64>,
    /// Cells whose model would be larger are skipped.
    #[arg(long, value_parser = parse_positive)]
    max_parameters: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Report CSV written by `experiment`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, env = OUT_DIR_ENV, default_value = "ialab-out")]
    out_dir: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(String),
}

type Outcome = Result<i32, Failure>;

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

fn with_path(path: &Path) -> impl Fn(&dyn std::fmt::Display) -> Failure + '_ {
    move |e| Failure::Domain(format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().ansi().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a, stdout),
        Command::Check(a) => check(a, stdout, stderr),
        Command::Perturb(a) => perturb(a, stdout),
        Command::Train(a) => train(a, stdout),
        Command::Eval(a) => eval(a, stdout),
        Command::Experiment(a) => experiment(a, stdout, stderr),
        Command::Plot(a) => plot(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(Failure::Domain(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| with_path(p)(&e)),
        None => stdout.write_all(text.as_bytes()).map_err(domain),
    }
}

fn read_input(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::Read::read_to_string(&mut io::stdin(), &mut s).map_err(domain)?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| with_path(path)(&e))
    }
}

fn load_corpus(path: &Path) -> Result<LoadedCorpus, Failure> {
    corpus_file::read_corpus(path).map_err(|e| with_path(path)(&e))
}

fn gen(a: GenArgs, stdout: &mut dyn Write) -> Outcome {
    let arena = make_arena(&a.arena);
    let cfg = GenConfig { max_len: a.max_len, p_stop: a.p_stop, complete_only: a.complete_only };
    let c = corpus::generate_corpus(&arena, a.lang.into(), a.count, &cfg, a.seed).map_err(domain)?;
    emit(a.out.as_deref(), &corpus_file::format_corpus(&c, &build_vocab(&arena)), stdout)?;
    Ok(0)
}

fn violation_text(v: Violation) -> String {
    format!("illegal {v}")
}

fn check(a: CheckArgs, stdout: &mut dyn Write, stderr: &mut (dyn Write + Send)) -> Outcome {
    let text = read_input(&a.input)?;
    let tokens = match a.format {
        InputFormat::Tokens => true,
        InputFormat::Pointed => false,
        InputFormat::Auto => text.starts_with("#version"),
    };
    let mut lines = Vec::new();
    let mut illegal = 0;
    if tokens {
        let loaded = corpus_file::parse_corpus(&text).map_err(|e| with_path(&a.input)(&e))?;
        if let Some(tree) = &a.arena {
            if *tree != *loaded.arena.type_tree() {
                return Err(Failure::Usage(format!("--arena {tree} does not match the corpus arena {}", loaded.corpus.arena)));
            }
        }
        let lang = a.lang.map_or(loaded.corpus.lang, Lang::from);
        for (i, p) in loaded.corpus.plays.iter().enumerate() {
            let moves: Vec<MoveRef> = p.move_refs().collect();
            let verdict = match reconstruct(&loaded.arena, lang, &moves, RECONSTRUCT_BUDGET) {
                Reconstruction::Unique(_) => "legal".to_string(),
                Reconstruction::Ambiguous => "ambiguous".to_string(),
                Reconstruction::Undetermined => "undetermined".to_string(),
                Reconstruction::Illegal(v) => {
                    illegal += 1;
                    let _ = writeln!(stderr, "play {}: {}", i + 1, violation_text(v));
                    violation_text(v)
                }
            };
            lines.push(verdict);
        }
    } else {
        let tree = a.arena.ok_or_else(|| Failure::Usage("--arena is required for pointed plays".into()))?;
        let lang: Lang = a.lang.ok_or_else(|| Failure::Usage("--lang is required for pointed plays".into()))?.into();
        let arena = make_arena(&tree);
        let plays = pointed_file::parse_pointed(&arena, &text).map_err(|e| with_path(&a.input)(&e))?;
        for (i, p) in plays.iter().enumerate() {
            let verdict = match play::check(&arena, lang, &p.play) {
                Ok(v) => v.violation,
                Err(PlayError::Malformed { index }) => Some(Violation { rule: Rule::Justification, index }),
                Err(e) => return Err(Failure::Domain(format!("play {} (line {}): {e}", i + 1, p.lines[0]))),
            };
            lines.push(match verdict {
                None => "legal".to_string(),
                Some(v) => {
                    illegal += 1;
                    let line = p.lines.get(v.index).or(p.lines.last()).copied().unwrap_or(0);
                    let _ = writeln!(stderr, "play {} (line {line}): {}", i + 1, violation_text(v));
                    violation_text(v)
                }
            });
        }
    }
    for l in lines {
        writeln!(stdout, "{l}").map_err(domain)?;
    }
    Ok(if illegal > 0 { 1 } else { 0 })
}

fn perturb(a: PerturbArgs, stdout: &mut dyn Write) -> Outcome {
    let loaded = load_corpus(&a.corpus)?;
    let c = corpus::perturb_corpus(&loaded.arena, &loaded.corpus, a.ratio, a.seed, a.require_illegal).map_err(domain)?;
    emit(a.out.as_deref(), &corpus_file::format_corpus(&c, &loaded.vocab), stdout)?;
    Ok(0)
}

struct EpochLines<'a>(&'a mut dyn Write);

impl TrainObserver for EpochLines<'_> {
    fn on_epoch(&mut self, log: &EpochLog) {
        let _ = writeln!(self.0, "epoch {} lr {} ppl {}", log.epoch, log.learning_rate, log.perplexity());
    }
}

fn train(a: TrainArgs, stdout: &mut dyn Write) -> Outcome {
    let loaded = load_corpus(&a.corpus)?;
    let mut cfg = ModelConfig::new(loaded.vocab.len());
    cfg.seed = a.seed;
    a.model.apply(&mut cfg);
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut model = init_model(&cfg).map_err(domain)?;
    seqmodel::train(&mut model, &loaded.corpus.token_stream(), &mut EpochLines(stdout)).map_err(domain)?;
    model_file::save_model(&model, &a.out).map_err(|e| with_path(&a.out)(&e))?;
    Ok(0)
}

fn eval(a: EvalArgs, stdout: &mut dyn Write) -> Outcome {
    let model = model_file::load_model(&a.model).map_err(|e| with_path(&a.model)(&e))?;
    let loaded = load_corpus(&a.corpus)?;
    if loaded.vocab.len() != model.config().vocab_size {
        return Err(Failure::Domain(format!(
            "corpus vocabulary has {} tokens, model expects {}",
            loaded.vocab.len(),
            model.config().vocab_size
        )));
    }
    let e = parallel::perplexity(&model, &loaded.corpus.plays, a.threads).map_err(domain)?;
    writeln!(stdout, "PPL={}\ntokens={}\nbits={}", e.perplexity(), e.tokens, e.total_bits).map_err(domain)?;
    Ok(0)
}

struct StageLines<'a>(std::sync::Mutex<&'a mut (dyn Write + Send)>);

impl SharedProgress for StageLines<'_> {
    fn stage(&self, c: &Cell, stage: &str) {
        let mut w = self.0.lock().expect("progress writer poisoned");
        let _ = writeln!(w, "{} order {} width {} n {}: {stage}", c.lang.short_name(), c.order, c.width, c.train_size);
    }
}

fn experiment_spec(a: &ExperimentArgs) -> ExperimentSpec {
    let mut spec = match a.grid {
        Grid::Desk => ExperimentSpec::desk(),
        Grid::Full => ExperimentSpec::full(),
    };
    spec.seed = a.seed;
    if let Some(l) = &a.langs {
        spec.langs = l.iter().map(|&l| l.into()).collect();
    }
    if let Some(o) = &a.orders {
        spec.orders = o.clone();
    }
    if let Some(w) = &a.widths {
        spec.widths = w.clone();
    }
    if let Some(s) = &a.train_sizes {
        spec.train_sizes = s.clone();
    }
    spec.validation_size = a.validation_size.unwrap_or(spec.validation_size);
    spec.test_size = a.test_size.unwrap_or(spec.test_size);
    spec.gen.max_len = a.max_len.unwrap_or(spec.gen.max_len);
    spec.ratio = a.ratio.unwrap_or(spec.ratio);
    spec.max_parameters = a.max_parameters.unwrap_or(spec.max_parameters);
    let mut cfg = spec.model.config(1, 0);
    a.model.apply(&mut cfg);
    spec.model.embed_dim = cfg.embed_dim;
    spec.model.hidden_dim = cfg.hidden_dim;
    spec.model.layers = cfg.layers;
    spec.model.unroll = cfg.unroll;
    spec.model.batch = cfg.batch;
    spec.model.epochs = cfg.epochs;
    spec.model.lr = cfg.lr;
    spec.model.max_grad_norm = cfg.max_grad_norm;
    spec.model.init_scale = cfg.init_scale;
    spec
}

/// Writes `<name>.csv` and one SVG per (language, size) into `dir`.
fn write_report(dir: &Path, name: &str, rows: &[report::Row], stdout: &mut dyn Write) -> Result<(), Failure> {
    let csv = dir.join(format!("{name}.csv"));
    fs::write(&csv, report::to_csv(rows)).map_err(|e| with_path(&csv)(&e))?;
    writeln!(stdout, "{}", csv.display()).map_err(domain)?;
    for fig in report::figures(rows) {
        let path = dir.join(format!("{name}-{}.svg", fig.file_stem()));
        fs::write(&path, &fig.svg).map_err(|e| with_path(&path)(&e))?;
        writeln!(stdout, "{}", path.display()).map_err(domain)?;
    }
    Ok(())
}

fn experiment(a: ExperimentArgs, stdout: &mut dyn Write, stderr: &mut (dyn Write + Send)) -> Outcome {
    let spec = experiment_spec(&a);
    let kinds: &[TestKind] = match a.kind {
        ExperimentKind::Perturb => &[TestKind::Perturbed],
        ExperimentKind::Cross => &[TestKind::CrossLanguage],
        ExperimentKind::Both => &[TestKind::Perturbed, TestKind::CrossLanguage],
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| with_path(&a.out_dir)(&e))?;
    let reports: Vec<Report> = {
        let progress = StageLines(std::sync::Mutex::new(&mut *stderr));
        parallel::run_experiments(&spec, kinds, a.threads, &progress)
    };
    for r in &reports {
        for c in &r.cells {
            if let ialab_core::experiment::Outcome::Skipped(why) = &c.outcome {
                let cell = c.cell;
                let _ = writeln!(stderr, "skipped {} order {} width {} n {}: {why}", cell.lang.short_name(), cell.order, cell.width, cell.train_size);
            }
        }
        write_report(&a.out_dir, r.kind.name(), &report::rows(r), stdout)?;
    }
    Ok(0)
}

fn plot(a: PlotArgs, stdout: &mut dyn Write) -> Outcome {
    let text = fs::read_to_string(&a.report).map_err(|e| with_path(&a.report)(&e))?;
    let rows = report::from_csv(&text).map_err(|e| with_path(&a.report)(&e))?;
    if rows.is_empty() {
        return Err(Failure::Domain(format!("{}: report has no rows", a.report.display())));
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| with_path(&a.out_dir)(&e))?;
    let stem = a.report.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    for fig in report::figures(&rows) {
        let path = a.out_dir.join(format!("{stem}-{}.svg", fig.file_stem()));
        fs::write(&path, &fig.svg).map_err(|e| with_path(&path)(&e))?;
        writeln!(stdout, "{}", path.display()).map_err(domain)?;
    }
    Ok(0)
}
