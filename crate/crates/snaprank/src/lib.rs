//! Adversarially trained ranker for anomalous snapshots of attributed
//! graphs. A generator learns a selection distribution over candidate
//! snapshots while a discriminator learns to separate its picks from
//! labeled anomalies; at evaluation time the generator's distribution
//! ranks the pool.

pub mod bench;
pub mod config;
pub mod eval;
pub mod graph;
pub mod io;
pub mod model;
pub mod tensor;
pub mod trainer;
