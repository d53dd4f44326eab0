//! Task-knowledge extraction for a simulated household agent.
//!
//! The agent notices a gap in what it knows (no goal for the object it is
//! looking at), asks a language model through a templated few-shot prompt,
//! checks the answer against its own lexicon, situation and body, repairs
//! or escalates failures to a human, then plans, acts, and compiles the
//! verified goal into a rule so the same question is never asked twice.

pub mod world;
pub mod agent;
pub mod bundled;
pub mod eval;
pub mod llm;
pub mod memory;
pub mod oversight;
pub mod parser;
pub mod planner;
pub mod prompt;
pub mod verify;
