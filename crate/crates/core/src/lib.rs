//! Pitch-by-pitch at-bat model: a zero-sum stochastic game between pitcher
//! and batter, with learned control, outcome and patience models.

pub mod cli;
pub mod config;
pub mod control;
pub mod features;
pub mod game;
pub mod ingest;
pub mod outcome;
pub mod patience;
pub mod pipeline;
mod quadrature;
pub mod service;
pub mod sim;
pub mod solver;
pub mod store;
pub mod zones;
