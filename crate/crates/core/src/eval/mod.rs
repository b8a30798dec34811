//! Gallery ranking, CMC and mAP, and repeated-trial retrieval protocols.

mod metrics;
mod protocol;

pub use metrics::{average_precision, cmc_curve, rank_gallery, rank_queries, RankingResult};
pub use protocol::{run_protocol, Embedder, EvalProtocol, ProtocolResult, TrialMetrics};
