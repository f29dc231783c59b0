//! File formats, reports, parallel runners and the command line for
//! `ialab-core`.

pub mod cli;
pub mod corpus_file;
pub mod model_file;
pub mod parallel;
pub mod pointed_file;
pub mod report;
