//! Monte Carlo laboratory for stable fluctuations of additive martingales in
//! supercritical branching random walks.

pub mod engine;
pub mod harness;
pub mod models;
pub mod rng;
pub mod special;
pub mod stablelim;
pub mod verify;
