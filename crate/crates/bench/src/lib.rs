//! Reproducible synthetic experiments for the RGN solvers.

pub mod config;
pub mod experiment;

pub use config::{ExperimentConfig, Init, Problem, Scaling, Solver};
pub use experiment::{generate_problem, run, ExperimentReport, GeneratedProblem};
