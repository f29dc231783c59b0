//! Perplexity-based experiments over a grid of arenas.
//!
//! Each grid cell fixes a language, an arena (uniform tree of the given order
//! and width) and a training-set size. A model is trained on legal plays of
//! the cell and then measured on three corpora: its training data, fresh
//! validation plays, and a test corpus that is either perturbed legal plays
//! of the same language or legal plays of the other language.
//!
//! Corpus seeds are derived from the experiment seed and a role label
//! (`train`, `validation`, `test-perturbed`, `test-cross`, `perturb`), which
//! keeps the random streams behind different roles apart.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::arena::{make_arena, Arena, TypeTree};
use crate::corpus::{self, Corpus, GenConfig};
use crate::play::Lang;
use crate::rng;
use crate::seqmodel::{self, init_model, LrSchedule, LstmModel, ModelConfig, TrainObserver};

pub const TRAIN: &str = "train";
pub const VALIDATION: &str = "validation";
pub const TEST_PERTURBED: &str = "test-perturbed";
pub const TEST_CROSS: &str = "test-cross";

/// Model hyperparameters shared by every cell; the vocabulary comes from the arena.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelTemplate {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub unroll: usize,
    pub batch: usize,
    pub epochs: usize,
    pub lr: LrSchedule,
    pub max_grad_norm: f64,
    pub init_scale: f64,
}

impl Default for ModelTemplate {
    fn default() -> Self {
        let d = ModelConfig::new(1);
        ModelTemplate {
            embed_dim: d.embed_dim,
            hidden_dim: d.hidden_dim,
            layers: d.layers,
            unroll: d.unroll,
            batch: d.batch,
            epochs: d.epochs,
            lr: d.lr,
            max_grad_norm: d.max_grad_norm,
            init_scale: d.init_scale,
        }
    }
}

impl ModelTemplate {
    pub fn config(&self, vocab_size: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_size,
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            layers: self.layers,
            unroll: self.unroll,
            batch: self.batch,
            epochs: self.epochs,
            lr: self.lr,
            max_grad_norm: self.max_grad_norm,
            init_scale: self.init_scale,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub langs: Vec<Lang>,
    pub orders: Vec<usize>,
    pub widths: Vec<usize>,
    pub train_sizes: Vec<usize>,
    pub validation_size: usize,
    pub test_size: usize,
    pub gen: GenConfig,
    /// Normalised edit distance of perturbed test plays.
    pub ratio: f64,
    pub seed: u64,
    pub model: ModelTemplate,
    /// Cells whose model would exceed this many parameters are skipped.
    pub max_parameters: usize,
}

impl ExperimentSpec {
    /// Orders 1–3, widths 1 and 5, 10k and 100k training plays, 10k
    /// validation and test plays of at most 50 moves, 0.1 edit ratio, and
    /// the two-layer 200-unit model.
    pub fn full() -> Self {
        ExperimentSpec {
            langs: Lang::ALL.to_vec(),
            orders: alloc::vec![1, 2, 3],
            widths: alloc::vec![1, 5],
            train_sizes: alloc::vec![10_000, 100_000],
            validation_size: 10_000,
            test_size: 10_000,
            gen: GenConfig::default(),
            ratio: 0.1,
            seed: 0,
            model: ModelTemplate::default(),
            max_parameters: 2_000_000,
        }
    }

    /// Orders 1–2, widths 1 and 5, 10k training plays, 128 hidden units.
    pub fn desk() -> Self {
        let mut spec = ExperimentSpec::full();
        spec.orders = alloc::vec![1, 2];
        spec.train_sizes = alloc::vec![10_000];
        spec.model.hidden_dim = 128;
        spec.model.embed_dim = 128;
        spec
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &lang in &self.langs {
            for &train_size in &self.train_sizes {
                for &width in &self.widths {
                    for &order in &self.orders {
                        out.push(Cell { lang, order, width, train_size });
                    }
                }
            }
        }
        out
    }

    /// Seed of the corpus with the given role.
    pub fn corpus_seed(&self, role: &str) -> u64 {
        rng::derive_seed(self.seed, role)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    /// Language of the training plays.
    pub lang: Lang,
    pub order: usize,
    pub width: usize,
    pub train_size: usize,
}

impl Cell {
    pub fn arena(&self) -> Arena {
        make_arena(&TypeTree::uniform(self.order, self.width))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    Perturbed,
    CrossLanguage,
}

impl TestKind {
    pub fn name(self) -> &'static str {
        match self {
            TestKind::Perturbed => "perturbed",
            TestKind::CrossLanguage => "cross",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perplexities {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Perplexities {
    pub fn test_over_validation(&self) -> f64 {
        self.test / self.validation
    }

    pub fn validation_over_train(&self) -> f64 {
        self.validation / self.train
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done(Perplexities),
    /// The cell could not be run; the reason is kept for the report.
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub cell: Cell,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: TestKind,
    pub cells: Vec<CellReport>,
}

impl Report {
    pub fn completed(&self) -> impl Iterator<Item = (&Cell, &Perplexities)> {
        self.cells.iter().filter_map(|c| match &c.outcome {
            Outcome::Done(p) => Some((&c.cell, p)),
            Outcome::Skipped(_) => None,
        })
    }

    pub fn get(&self, cell: &Cell) -> Option<&Outcome> {
        self.cells.iter().find(|c| c.cell == *cell).map(|c| &c.outcome)
    }
}

/// Progress hooks for long experiment runs.
pub trait Progress: TrainObserver {
    fn on_stage(&mut self, _cell: &Cell, _stage: &str) {}
}

impl Progress for () {}

/// A trained model with its corpora, before any test set is applied.
pub struct TrainedCell {
    pub cell: Cell,
    pub arena: Arena,
    pub model: LstmModel,
    pub train: Corpus,
    pub validation: Corpus,
    pub train_perplexity: f64,
    pub validation_perplexity: f64,
}

fn gen_corpus(spec: &ExperimentSpec, arena: &Arena, lang: Lang, count: usize, role: &str) -> Result<Corpus, String> {
    corpus::generate_corpus(arena, lang, count, &spec.gen, spec.corpus_seed(role)).map_err(|e| e.to_string())
}

/// Generates the training and validation corpora of a cell and trains its model.
pub fn train_cell(spec: &ExperimentSpec, cell: Cell, progress: &mut dyn Progress) -> Result<TrainedCell, String> {
    let arena = cell.arena();
    let mut config = spec.model.config(arena.move_count() + 1, spec.seed);
    let params = config.parameter_count();
    if params > spec.max_parameters {
        return Err(format!("model needs {params} parameters, budget is {}", spec.max_parameters));
    }
    progress.on_stage(&cell, "generating");
    let train = gen_corpus(spec, &arena, cell.lang, cell.train_size, TRAIN)?;
    let validation = gen_corpus(spec, &arena, cell.lang, spec.validation_size, VALIDATION)?;
    let stream = train.token_stream();
    // tiny corpora cannot fill `batch` rows of at least two tokens
    config.batch = config.batch.min(stream.len() / 2).max(1);
    let mut model = init_model(&config).map_err(|e| e.to_string())?;
    progress.on_stage(&cell, "training");
    seqmodel::train(&mut model, &stream, progress).map_err(|e| e.to_string())?;
    progress.on_stage(&cell, "evaluating");
    let eval = |c: &Corpus| seqmodel::perplexity(&model, &c.plays).map(|e| e.perplexity()).map_err(|e| e.to_string());
    let train_perplexity = eval(&train)?;
    let validation_perplexity = eval(&validation)?;
    Ok(TrainedCell { cell, arena, model, train, validation, train_perplexity, validation_perplexity })
}

/// The test corpus of a cell for one kind of test.
pub fn test_corpus(spec: &ExperimentSpec, trained: &TrainedCell, kind: TestKind) -> Result<Corpus, String> {
    let cell = trained.cell;
    match kind {
        TestKind::Perturbed => {
            let fresh = gen_corpus(spec, &trained.arena, cell.lang, spec.test_size, TEST_PERTURBED)?;
            corpus::perturb_corpus(&trained.arena, &fresh, spec.ratio, spec.corpus_seed(rng::PERTURB), false)
                .map_err(|e| e.to_string())
        }
        TestKind::CrossLanguage => gen_corpus(spec, &trained.arena, cell.lang.other(), spec.test_size, TEST_CROSS),
    }
}

pub fn evaluate_cell(spec: &ExperimentSpec, trained: &TrainedCell, kind: TestKind) -> Result<Perplexities, String> {
    let test = test_corpus(spec, trained, kind)?;
    let test = seqmodel::perplexity(&trained.model, &test.plays).map_err(|e| e.to_string())?.perplexity();
    Ok(Perplexities { train: trained.train_perplexity, validation: trained.validation_perplexity, test })
}

/// Trains one cell and measures every requested test on it. Failures are
/// confined to the cell.
pub fn run_cell(spec: &ExperimentSpec, cell: Cell, kinds: &[TestKind], progress: &mut dyn Progress) -> Vec<CellReport> {
    let trained = train_cell(spec, cell, progress);
    kinds
        .iter()
        .map(|&kind| {
            let outcome = match &trained {
                Err(reason) => Outcome::Skipped(reason.clone()),
                Ok(t) => {
                    progress.on_stage(&cell, kind.name());
                    match evaluate_cell(spec, t, kind) {
                        Ok(p) => Outcome::Done(p),
                        Err(reason) => Outcome::Skipped(reason),
                    }
                }
            };
            CellReport { cell, outcome }
        })
        .collect()
}

/// Runs every cell once and builds one report per requested test kind.
pub fn run_experiments(spec: &ExperimentSpec, kinds: &[TestKind], progress: &mut dyn Progress) -> Vec<Report> {
    let mut reports: Vec<Report> = kinds.iter().map(|&kind| Report { kind, cells: Vec::new() }).collect();
    for cell in spec.cells() {
        for (report, cr) in reports.iter_mut().zip(run_cell(spec, cell, kinds, progress)) {
            report.cells.push(cr);
        }
    }
    reports
}

/// Models tested on perturbed plays of their own language.
pub fn run_perturbation_experiment(spec: &ExperimentSpec, progress: &mut dyn Progress) -> Report {
    run_experiments(spec, &[TestKind::Perturbed], progress).remove(0)
}

/// Models tested on legal plays of the other language.
pub fn run_cross_language_experiment(spec: &ExperimentSpec, progress: &mut dyn Progress) -> Report {
    run_experiments(spec, &[TestKind::CrossLanguage], progress).remove(0)
}
