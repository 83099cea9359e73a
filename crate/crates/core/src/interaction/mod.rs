mod coder;
mod fformation;
mod network;
mod sociogram;

pub use coder::{code_utterance, CoderError, ExternalCoder, RuleCoder, UtteranceCoder};
pub use fformation::{
    angular_difference, detect_f_formations, formation_between, formation_intervals,
    FFormationPair, FormationInstant, FormationKind, FormationParams,
};
pub use network::{compute_comm_network, CodePairCount, CommNetwork, WindowSizeError};
pub use sociogram::{compute_sociogram, SociogramEdge, SociogramGraph};
