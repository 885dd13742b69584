//! Texture classification by mathematical morphology, nearest-neighbour rules
//! and genetic feature selection.

pub mod analyze;
pub mod classify;
pub mod error;
pub mod features;
pub mod imagecore;
pub mod granulometry;
pub mod morphology;
pub mod select;
pub mod synthkit;

pub use error::{Error, Result};
