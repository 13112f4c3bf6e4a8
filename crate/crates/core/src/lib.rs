//! Benchmark harness for conversational helpers that guide a navigating agent
//! through graph-structured indoor worlds.

pub mod bench;
pub mod dialog;
pub mod helper;
pub mod metrics;
pub mod neuralcore;
pub mod parse_step;
pub mod performer;
pub mod tasks;
pub mod ui_gateway;
pub mod world;
