//! Synthetic ward scenarios with known ground truth, and independent
//! re-implementations of the analytics to check the engine against.

pub mod campaign;
pub mod generate;
pub mod oracle;
pub mod random;
pub mod script;

pub use campaign::{check_seed, run_campaign, CampaignReport, CheckKind, SeedReport};
pub use generate::{generate_session, GeneratedSession, GroundTruth};
pub use random::{random_script, shift_script};
pub use script::{ScenarioScript, ScriptError};
