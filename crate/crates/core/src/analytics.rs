//! Visualisation dispatch and the payload envelope served to clients.

use serde::{Deserialize, Serialize};

use crate::interaction::{
    compute_comm_network, compute_sociogram, CommNetwork, FormationParams, SociogramGraph,
    WindowSizeError,
};
use crate::model::{resolve_phase_window, Millis, ModelError, Phase, SessionTimeline, TimeWindow};
use crate::session::Session;
use crate::share::VizId;
use crate::spatial::{
    compute_priority_breakdown, compute_ward_map, PriorityBreakdown, PriorityParams, WardMap,
    DEFAULT_HEX_RADIUS_MM,
};

pub const ENGINE_VERSION: &str = concat!("debriefkit-core/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("unknown visualisation `{0}`")]
    UnknownViz(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    WindowSize(#[from] WindowSizeError),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Tunables shared by all analytics. Every payload records the values used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsParams {
    pub hex_radius_mm: f64,
    pub speed_threshold_mm_s: f64,
    pub discussion_dist_mm: f64,
    pub dist_face_mm: f64,
    pub dist_side_mm: f64,
    pub angle_tol_deg: f64,
    pub network_window_size: usize,
}

impl Default for AnalyticsParams {
    fn default() -> Self {
        let f = FormationParams::default();
        let p = PriorityParams::default();
        AnalyticsParams {
            hex_radius_mm: DEFAULT_HEX_RADIUS_MM,
            speed_threshold_mm_s: p.speed_threshold_mm_s,
            discussion_dist_mm: p.discussion_dist_mm,
            dist_face_mm: f.dist_face_mm,
            dist_side_mm: f.dist_side_mm,
            angle_tol_deg: f.angle_tol_deg,
            network_window_size: 2,
        }
    }
}

impl AnalyticsParams {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        let positive = [
            ("hex_radius_mm", self.hex_radius_mm),
            ("speed_threshold_mm_s", self.speed_threshold_mm_s),
            ("discussion_dist_mm", self.discussion_dist_mm),
            ("dist_face_mm", self.dist_face_mm),
            ("dist_side_mm", self.dist_side_mm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(AnalyticsError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.angle_tol_deg > 0.0 && self.angle_tol_deg <= 180.0) {
            return Err(AnalyticsError::InvalidParams(format!(
                "angle_tol_deg must be in (0, 180], got {}",
                self.angle_tol_deg
            )));
        }
        if self.network_window_size < 2 {
            return Err(WindowSizeError(self.network_window_size).into());
        }
        Ok(())
    }

    pub fn formation(&self) -> FormationParams {
        FormationParams {
            dist_face_mm: self.dist_face_mm,
            dist_side_mm: self.dist_side_mm,
            angle_tol_deg: self.angle_tol_deg,
        }
    }

    pub fn priority(&self) -> PriorityParams {
        PriorityParams {
            speed_threshold_mm_s: self.speed_threshold_mm_s,
            discussion_dist_mm: self.discussion_dist_mm,
            formation: self.formation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnalyticsData {
    Priority(PriorityBreakdown),
    Wardmap(WardMap),
    Sociogram(SociogramGraph),
    Network(CommNetwork),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticsPayload {
    pub viz: VizId,
    pub session_id: String,
    pub engine_version: &'static str,
    pub window: TimeWindow,
    pub params: AnalyticsParams,
    pub data: AnalyticsData,
}

impl AnalyticsPayload {
    /// Canonical serialization; identical inputs give identical bytes.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("payload serializes");
        out.push(b'\n');
        out
    }
}

/// Picks the analysis window: explicit bounds win over a phase filter; with
/// neither, the whole session.
pub fn select_window(
    timeline: &SessionTimeline,
    phase: Option<Phase>,
    from_ms: Option<Millis>,
    to_ms: Option<Millis>,
) -> Result<TimeWindow, ModelError> {
    if from_ms.is_some() || to_ms.is_some() {
        return TimeWindow::within(
            from_ms.unwrap_or(0),
            to_ms.unwrap_or(timeline.end_ms),
            timeline.end_ms,
        );
    }
    resolve_phase_window(timeline, phase.unwrap_or(Phase::All))
}

pub fn get_analytics(
    session: &Session,
    viz: &str,
    window: &TimeWindow,
    params: &AnalyticsParams,
) -> Result<AnalyticsPayload, AnalyticsError> {
    let viz: VizId = viz
        .parse()
        .map_err(|_| AnalyticsError::UnknownViz(viz.to_owned()))?;
    params.validate()?;
    let window = TimeWindow::within(window.from_ms, window.to_ms, session.timeline().end_ms)?;
    let data = match viz {
        VizId::Priority => {
            AnalyticsData::Priority(compute_priority_breakdown(session, &window, &params.priority()))
        }
        VizId::Wardmap => {
            AnalyticsData::Wardmap(compute_ward_map(session, &window, params.hex_radius_mm))
        }
        VizId::Sociogram => {
            AnalyticsData::Sociogram(compute_sociogram(session, &window, &params.formation()))
        }
        VizId::Network => AnalyticsData::Network(compute_comm_network(
            session.utterances(),
            &window,
            params.network_window_size,
        )?),
        VizId::Snippet => return Err(AnalyticsError::UnknownViz(viz.to_string())),
    };
    Ok(AnalyticsPayload {
        viz,
        session_id: session.id().to_owned(),
        engine_version: ENGINE_VERSION,
        window,
        params: *params,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WardLayout;

    fn session() -> Session {
        Session::new(
            "s1",
            WardLayout::standard(),
            SessionTimeline::with_markers(Some(1000), None, None, 5000).unwrap(),
        )
    }

    #[test]
    fn unknown_viz() {
        let s = session();
        let w = s.timeline().whole();
        assert_eq!(
            get_analytics(&s, "heatmap", &w, &Default::default()),
            Err(AnalyticsError::UnknownViz("heatmap".into()))
        );
    }

    #[test]
    fn zero_tick_priority_is_flagged() {
        let s = session();
        let p = get_analytics(&s, "priority", &TimeWindow::new(2000, 2000).unwrap(), &Default::default())
            .unwrap();
        match p.data {
            AnalyticsData::Priority(b) => assert!(b.empty && b.tick_count == 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn window_selection() {
        let t = *session().timeline();
        assert_eq!(
            select_window(&t, Some(Phase::HandoverEnds), None, None).unwrap(),
            TimeWindow::new(1000, 5000).unwrap()
        );
        assert_eq!(
            select_window(&t, Some(Phase::DoctorEnters), None, None),
            Err(ModelError::PhaseUnset(Phase::DoctorEnters))
        );
        assert_eq!(
            select_window(&t, Some(Phase::DoctorEnters), Some(10), None).unwrap(),
            TimeWindow::new(10, 5000).unwrap()
        );
        assert!(select_window(&t, None, Some(0), Some(6000)).is_err());
    }

    #[test]
    fn payload_is_stamped_and_stable() {
        let s = session();
        let w = s.timeline().whole();
        let a = get_analytics(&s, "sociogram", &w, &Default::default()).unwrap().to_json_bytes();
        let b = get_analytics(&s, "sociogram", &w, &Default::default()).unwrap().to_json_bytes();
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
        assert_eq!(v["engine_version"], ENGINE_VERSION);
        assert_eq!(v["viz"], "sociogram");
        assert_eq!(v["params"]["dist_face_mm"], 1500.0);
    }

    #[test]
    fn params_are_checked() {
        let bad = AnalyticsParams {
            hex_radius_mm: 0.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(AnalyticsError::InvalidParams(_))));
        let bad = AnalyticsParams {
            network_window_size: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
