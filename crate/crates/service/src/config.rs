use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use debriefkit_core::ingest::VadParams;
use debriefkit_core::AnalyticsParams;

pub const ENV_PREFIX: &str = "DEBRIEFKIT_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment {key}={value}: {message}")]
    Env {
        key: String,
        value: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Service settings. Loaded from TOML, then overridden by `DEBRIEFKIT_*`
/// variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    pub port: u16,
    pub session_root: PathBuf,
    /// Required as `?token=` on room connections when set.
    pub room_token: Option<String>,
    /// External utterance coder command line; the built-in rules otherwise.
    pub coder: Option<Vec<String>>,
    pub analytics: AnalyticsParams,
    pub vad: VadParams,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1".into(),
            port: 7878,
            session_root: PathBuf::from("sessions"),
            room_token: None,
            coder: None,
            analytics: AnalyticsParams::default(),
            vad: VadParams::default(),
        }
    }
}

fn parse_env<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::Env {
        key: key.to_owned(),
        value: value.to_owned(),
        message: e.to_string(),
    })
}

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.message().to_owned(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    /// File (if any), then the process environment, then validation.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        config.apply_env(std::env::vars())?;
        config.validate()?;
        Ok(config)
    }

    /// Applies every `DEBRIEFKIT_*` pair; unrelated variables are ignored.
    pub fn apply_env(
        &mut self,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<(), ConfigError> {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let a = &mut self.analytics;
            let v = &mut self.vad;
            match name {
                "BIND" => self.bind = value.clone(),
                "PORT" => self.port = parse_env(&key, &value)?,
                "SESSION_ROOT" => self.session_root = PathBuf::from(&value),
                "ROOM_TOKEN" => self.room_token = Some(value.clone()).filter(|t| !t.is_empty()),
                "CODER" => {
                    let argv: Vec<String> = value.split_whitespace().map(str::to_owned).collect();
                    self.coder = (!argv.is_empty()).then_some(argv);
                }
                "HEX_RADIUS_MM" => a.hex_radius_mm = parse_env(&key, &value)?,
                "SPEED_THRESHOLD_MM_S" => a.speed_threshold_mm_s = parse_env(&key, &value)?,
                "DISCUSSION_DIST_MM" => a.discussion_dist_mm = parse_env(&key, &value)?,
                "DIST_FACE_MM" => a.dist_face_mm = parse_env(&key, &value)?,
                "DIST_SIDE_MM" => a.dist_side_mm = parse_env(&key, &value)?,
                "ANGLE_TOL_DEG" => a.angle_tol_deg = parse_env(&key, &value)?,
                "NETWORK_WINDOW_SIZE" => a.network_window_size = parse_env(&key, &value)?,
                "VAD_FRAME_MS" => v.frame_ms = parse_env(&key, &value)?,
                "VAD_ENERGY_RATIO" => v.energy_ratio_threshold = parse_env(&key, &value)?,
                "VAD_MIN_SEGMENT_MS" => v.min_segment_ms = parse_env(&key, &value)?,
                "VAD_MERGE_GAP_MS" => v.merge_gap_ms = parse_env(&key, &value)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.analytics
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.vad.frame_ms == 0 || !(self.vad.energy_ratio_threshold > 0.0) {
            return Err(ConfigError::Invalid(
                "vad frame_ms and energy_ratio_threshold must be positive".into(),
            ));
        }
        if self.coder.as_ref().is_some_and(|c| c.is_empty()) {
            return Err(ConfigError::Invalid("coder command is empty".into()));
        }
        Ok(())
    }
}
