use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use debriefkit_core::model::{CommCode, EntityRole, Millis, WardLayout};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScriptError {
    #[error("invalid script: {0}")]
    Invalid(String),
    #[error("script json: {0}")]
    Json(String),
}

fn invalid(msg: impl Into<String>) -> ScriptError {
    ScriptError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Bed {
        bed: u8,
        #[serde(default)]
        offset_mm: [f64; 2],
    },
    Point {
        point: [f64; 2],
    },
}

/// Arrive at `target` by `t_ms`, then stay for `dwell_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_ms: Millis,
    pub target: Target,
    #[serde(default)]
    pub dwell_ms: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechItem {
    pub from_ms: Millis,
    pub to_ms: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<EntityRole>,
    /// Left out of the utterance file when absent, so the coder assigns it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CommCode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Markers {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handover_ends_ms: Option<Millis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sn_enter_ms: Option<Millis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doctor_enter_ms: Option<Millis>,
}

/// `scenario-script.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    pub seed: u64,
    pub duration_ms: Millis,
    pub cast: Vec<EntityRole>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<WardLayout>,
    #[serde(default)]
    pub markers: Markers,
    #[serde(default)]
    pub waypoints: BTreeMap<EntityRole, Vec<Waypoint>>,
    #[serde(default)]
    pub speech_plan: BTreeMap<EntityRole, Vec<SpeechItem>>,
    /// Intervals with no tracker samples.
    #[serde(default)]
    pub dropouts: BTreeMap<EntityRole, Vec<[Millis; 2]>>,
    /// Upper bound on a sample's lag behind its tick, in ms (below 100).
    #[serde(default)]
    pub timing_jitter_ms: Millis,
}

impl ScenarioScript {
    pub fn from_json(bytes: &[u8]) -> Result<Self, ScriptError> {
        let script: ScenarioScript =
            serde_json::from_slice(bytes).map_err(|e| ScriptError::Json(e.to_string()))?;
        script.validate()?;
        Ok(script)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }

    pub fn layout(&self) -> WardLayout {
        self.layout.clone().unwrap_or_else(WardLayout::standard)
    }

    pub fn validate(&self) -> Result<(), ScriptError> {
        if self.duration_ms == 0 || self.duration_ms % 100 != 0 {
            return Err(invalid("duration_ms must be a positive multiple of 100"));
        }
        if self.timing_jitter_ms >= 100 {
            return Err(invalid("timing_jitter_ms must be below 100"));
        }
        let layout = self.layout();
        layout.validate().map_err(|e| invalid(e.to_string()))?;
        let in_cast = |role: &EntityRole| self.cast.contains(role);

        for (role, wps) in &self.waypoints {
            if !in_cast(role) {
                return Err(invalid(format!("{role} has waypoints but is not in the cast")));
            }
            if !role.is_trackable() {
                return Err(invalid(format!("{role} is not tracked")));
            }
            for w in wps {
                if let Target::Bed { bed, .. } = w.target {
                    if !layout.beds.iter().any(|b| b.id == bed) {
                        return Err(invalid(format!("{role}: no bed {bed}")));
                    }
                }
                if w.t_ms >= self.duration_ms {
                    return Err(invalid(format!("{role}: waypoint at {} past the end", w.t_ms)));
                }
            }
            for pair in wps.windows(2) {
                if pair[1].t_ms < pair[0].t_ms + pair[0].dwell_ms {
                    return Err(invalid(format!(
                        "{role}: waypoint at {} starts before the previous dwell ends",
                        pair[1].t_ms
                    )));
                }
            }
        }

        for (role, items) in &self.speech_plan {
            if !in_cast(role) {
                return Err(invalid(format!("{role} speaks but is not in the cast")));
            }
            for s in items {
                if s.from_ms >= s.to_ms || s.to_ms > self.duration_ms {
                    return Err(invalid(format!(
                        "{role}: speech window [{}, {}) outside the session",
                        s.from_ms, s.to_ms
                    )));
                }
                if s.partner.is_some_and(|p| p == *role || !in_cast(&p)) {
                    return Err(invalid(format!("{role}: bad speech partner")));
                }
            }
            for pair in items.windows(2) {
                if pair[1].from_ms < pair[0].to_ms {
                    return Err(invalid(format!("{role}: speech windows overlap or are unordered")));
                }
            }
        }

        for (role, spans) in &self.dropouts {
            if spans.iter().any(|[a, b]| a >= b) {
                return Err(invalid(format!("{role}: empty dropout interval")));
            }
        }

        let m = [
            self.markers.handover_ends_ms,
            self.markers.sn_enter_ms,
            self.markers.doctor_enter_ms,
        ];
        if m.windows(2).any(|w| w[0].is_none() && w[1].is_some()) {
            return Err(invalid("a phase marker is set while an earlier one is not"));
        }
        let set: Vec<Millis> = m.iter().flatten().copied().collect();
        if set.windows(2).any(|w| w[0] >= w[1]) || set.iter().any(|t| *t > self.duration_ms) {
            return Err(invalid("phase markers must increase and lie within the session"));
        }
        Ok(())
    }
}
