//! File formats, preprocessing and the command-line front end for
//! `fnnstat-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagram;
pub mod error;
pub mod exec;
pub mod fixture;
pub mod ingest;
pub mod model_file;
pub mod output;
pub mod plot;
pub mod report;
pub mod scenario;
