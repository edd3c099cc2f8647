//! Building blocks for TREC-style test collections: file formats, pooling,
//! effectiveness measures, judging reliability and document cleaning.

pub mod error;
pub mod measures;
pub mod model;
pub mod pooling;
pub mod reliability;
pub mod sanitize;
pub mod seed;

pub use error::{Error, Result};
