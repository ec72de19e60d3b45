//! Library half of the experiment runner; the `latsphere` binary is a thin
//! wrapper around [`experiment`] parsing and [`runner::run`].

pub mod experiment;
pub mod runner;
