//! Tools for two-player nonlocal game strategies: scoring, membership in
//! the local polytope with certificates, second-player guessing analyses,
//! and a constructive classicalization pipeline for strategies that let the
//! second player learn the first player's output with certainty.

pub mod classical;
pub mod classicalize;
pub mod generator;
pub mod guessing;
pub mod io;
pub mod model;
pub mod numerics;
pub mod simplex;

pub use model::{Correlation, Game, SecondPlayerStates, Strategy};
pub use numerics::CMatrix;
