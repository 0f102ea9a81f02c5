//! Multimodal question answering with a hierarchy of tool-using agents.

pub mod actlang;
pub mod agents;
pub mod backend;
pub mod cli;
pub mod engine;
pub mod eval;
pub mod registry;
pub mod tools;
pub mod trace;
pub mod value;
pub mod world;
