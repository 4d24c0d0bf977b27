//! Seismic nowcasting toolkit.
//!
//! The pipeline runs catalog → spatial bins → biweekly log-energy series →
//! bin graph → features → trained pattern models → skill metrics. A separate
//! monthly path builds the two-parameter EMA nowcast filter and scores it by
//! ROC skill.

pub mod autodiff;
pub mod catalog;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod graph;
pub mod gridding;
pub mod models;
pub mod nowcast;
pub mod synthetic;
mod textio;

pub use error::{Error, Result};
