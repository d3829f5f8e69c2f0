//! Training-free dataset condensation for content-based recommendation.
//!
//! The library shrinks a user-item interaction dataset into a small synthetic
//! one: item contents are condensed into short titles by an LLM backend
//! (a deterministic mock by default), and users are condensed into a handful
//! of synthetic users whose histories merge similar real users, selected by
//! clustering over trained user embeddings and extracted interests. A compact
//! content-based recommender and a ranking-metric harness verify that training
//! on the condensed data approaches full-data performance.

pub mod commands;
pub mod condenser;
pub mod config;
pub mod datamodel;
pub mod eval;
pub mod evopro;
pub mod llm;
pub mod manifest;
pub mod recmodel;
pub mod synth;
pub mod textenc;
