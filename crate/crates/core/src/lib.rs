//! Optimal liquidation combining interbank limit orders, market-order
//! impulses, and internal market-making liquidity.
//!
//! The library solves the reduced dynamic-programming equation for the
//! liquidation value `h(t, q)` on a uniform time grid times integer
//! inventory, extracts the optimal controls (limit-order depth,
//! market-making spread, market-order timing and size), and validates the
//! resulting strategy by Monte Carlo simulation of the controlled
//! fill/impulse dynamics.

pub mod analysis;
pub mod cli;
pub mod grid_io;
pub mod manifest;
pub mod params;
pub mod sim;
pub mod solver;

pub use params::{GridSpec, ModelParams, RunConfig, SimConfig};
pub use solver::{solve, PolicyGrid, ValueGrid};
