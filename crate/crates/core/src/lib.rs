#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod entropy;
pub mod expr;
pub mod fluxfield;
pub mod forms;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod par;
pub mod scheme;
