//! Thread-parallel evaluation and experiment cells.
//!
//! Results match the single-threaded functions exactly: per-play bits do not
//! depend on which plays share a batch, their sum is order-independent, and
//! cells own all of their state.

use std::sync::Mutex;
use std::thread;

use ialab_core::experiment::{run_cell, CellReport, ExperimentSpec, Progress, Report, TestKind};
use ialab_core::seqmodel::{play_bits, Evaluation, LstmModel, ModelError};
use ialab_core::TokenSeq;

/// [`ialab_core::seqmodel::perplexity`] over `threads` worker threads.
pub fn perplexity(model: &LstmModel, plays: &[TokenSeq], threads: usize) -> Result<Evaluation, ModelError> {
    let tokens: usize = plays.iter().map(|p| p.ids().len()).sum();
    if tokens == 0 {
        return Err(ModelError::EmptyCorpus);
    }
    let threads = threads.clamp(1, plays.len());
    if threads == 1 {
        return Ok(Evaluation::from_play_bits(&play_bits(model, plays)?, tokens));
    }
    let chunk = plays.len().div_ceil(threads);
    let parts: Vec<Result<Vec<f64>, ModelError>> = thread::scope(|s| {
        let handles: Vec<_> = plays.chunks(chunk).map(|c| s.spawn(move || play_bits(model, c))).collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect()
    });
    let mut bits = Vec::with_capacity(plays.len());
    for p in parts {
        bits.extend(p?);
    }
    Ok(Evaluation::from_play_bits(&bits, tokens))
}

/// Receives stage messages from cells running on worker threads.
pub trait SharedProgress: Sync {
    fn stage(&self, cell: &ialab_core::experiment::Cell, stage: &str);
}

impl SharedProgress for () {
    fn stage(&self, _: &ialab_core::experiment::Cell, _: &str) {}
}

struct Forward<'a>(&'a dyn SharedProgress);

impl ialab_core::seqmodel::TrainObserver for Forward<'_> {}

impl Progress for Forward<'_> {
    fn on_stage(&mut self, cell: &ialab_core::experiment::Cell, stage: &str) {
        self.0.stage(cell, stage);
    }
}

/// [`ialab_core::experiment::run_experiments`] with up to `threads` cells in
/// flight. Reports list cells in grid order.
pub fn run_experiments(spec: &ExperimentSpec, kinds: &[TestKind], threads: usize, progress: &dyn SharedProgress) -> Vec<Report> {
    let cells = spec.cells();
    let next = Mutex::new(0usize);
    let done: Mutex<Vec<(usize, Vec<CellReport>)>> = Mutex::new(Vec::new());
    thread::scope(|s| {
        for _ in 0..threads.clamp(1, cells.len().max(1)) {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("work queue poisoned");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some(&cell) = cells.get(i) else { break };
                let reports = run_cell(spec, cell, kinds, &mut Forward(progress));
                done.lock().expect("results poisoned").push((i, reports));
            });
        }
    });
    let mut done = done.into_inner().expect("results poisoned");
    done.sort_by_key(|(i, _)| *i);
    let mut reports: Vec<Report> = kinds.iter().map(|&kind| Report { kind, cells: Vec::new() }).collect();
    for (_, cell_reports) in done {
        for (report, cr) in reports.iter_mut().zip(cell_reports) {
            report.cells.push(cr);
        }
    }
    reports
}
