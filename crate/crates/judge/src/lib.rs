//! Backend for a relevance judging campaign: hands out assignments and
//! cleaned documents, records judgments in an append-only log and exports
//! merged qrels with agreement and noise reports.

pub mod api;
pub mod campaign;
pub mod error;

pub use api::{router, serve, AppState};
pub use campaign::{Campaign, CampaignConfig};
pub use error::{JudgeError, Result};
