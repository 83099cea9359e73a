//! Debrief analytics engine for team healthcare simulations.
//!
//! Sessions are ingested from positioning, voice and utterance streams into an
//! append-only store, sealed, and then analysed over phase-filtered windows:
//! the priority chart, the hexbin ward map, the speech sociogram and the
//! communication network.

pub mod analytics;
pub mod annotation;
pub mod ingest;
pub mod interaction;
pub mod interactions;
pub mod model;
pub mod render;
pub mod session;
pub mod share;
pub mod spatial;
pub mod usage;

pub use analytics::{get_analytics, AnalyticsData, AnalyticsError, AnalyticsParams, AnalyticsPayload};
pub use model::{EntityRole, Millis, Phase, SessionTimeline, TimeWindow, WardLayout};
pub use session::Session;
