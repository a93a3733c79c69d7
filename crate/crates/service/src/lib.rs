//! Competition scoring service: authenticated submissions scored against a
//! hidden ground truth, a persistent append-only history, and a leaderboard.

pub mod error;
pub mod http;
pub mod platform;
pub mod store;
pub mod teams;

pub use error::{Result, ServiceError};
pub use http::{router, serve, serve_on, ServiceConfig};
pub use platform::{LeaderboardEntry, Platform, SubmissionRecord, SubmitResponse};
pub use teams::{Team, Teams};
