//! Browser bindings for three operations: generate a seeded ward scenario,
//! render one of its analytics for a phase, and classify a navigation
//! sequence. The plain functions carry the logic so they test natively.

use wasm_bindgen::prelude::*;

use debriefkit_core::analytics::{get_analytics, select_window, AnalyticsParams};
use debriefkit_core::model::Phase;
use debriefkit_core::render::render_svg;
use debriefkit_core::usage::classify_strategy;
use debriefkit_core::Session;
use debriefkit_lab::{generate_session, random_script};

/// A generated session held by the page.
#[wasm_bindgen]
pub struct Scenario {
    session: Session,
    summary: String,
}

impl Scenario {
    pub fn generate(seed: u64) -> Result<Scenario, String> {
        let script = random_script(seed);
        let generated = generate_session(&script).map_err(|e| e.to_string())?;
        let id = format!("seed-{seed}");
        let session = generated.to_session(&id).map_err(|e| e.to_string())?;
        let t = session.timeline();
        let summary = serde_json::json!({
            "session_id": id,
            "duration_ms": script.duration_ms,
            "cast": script.cast,
            "markers": t.markers(),
            "positions": generated.positions.len(),
            "voice_segments": generated.voice.len(),
            "utterances": generated.utterances.len(),
        })
        .to_string();
        Ok(Scenario { session, summary })
    }

    fn payload(&self, viz: &str, phase: &str, hex_radius_mm: f64) -> Result<debriefkit_core::AnalyticsPayload, String> {
        let phase: Phase = phase.parse().map_err(|e: debriefkit_core::model::ModelError| e.to_string())?;
        let window = select_window(self.session.timeline(), Some(phase), None, None).map_err(|e| e.to_string())?;
        let params = AnalyticsParams {
            hex_radius_mm,
            ..AnalyticsParams::default()
        };
        get_analytics(&self.session, viz, &window, &params).map_err(|e| e.to_string())
    }

    pub fn svg(&self, viz: &str, phase: &str, hex_radius_mm: f64) -> Result<String, String> {
        let payload = self.payload(viz, phase, hex_radius_mm)?;
        Ok(render_svg(&payload, self.session.layout()))
    }

    pub fn json(&self, viz: &str, phase: &str, hex_radius_mm: f64) -> Result<String, String> {
        let payload = self.payload(viz, phase, hex_radius_mm)?;
        String::from_utf8(payload.to_json_bytes()).map_err(|e| e.to_string())
    }

    pub fn summary_json(&self) -> &str {
        &self.summary
    }
}

/// Labels a comma or space separated list of phase names.
pub fn classify(sequence: &str) -> Result<String, String> {
    let phases = sequence
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<Phase>().map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    classify_strategy(&phases)
        .map(|l| l.as_str().to_owned())
        .map_err(|e| e.to_string())
}

#[wasm_bindgen]
impl Scenario {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32) -> Result<Scenario, JsValue> {
        Scenario::generate(seed as u64).map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn summary(&self) -> String {
        self.summary.clone()
    }

    /// SVG markup for `viz` over `phase`.
    pub fn render(&self, viz: &str, phase: &str, hex_radius_mm: f64) -> Result<String, JsValue> {
        self.svg(viz, phase, hex_radius_mm).map_err(|e| JsValue::from_str(&e))
    }

    /// The analytics payload as JSON text.
    pub fn payload_json(&self, viz: &str, phase: &str, hex_radius_mm: f64) -> Result<String, JsValue> {
        self.json(viz, phase, hex_radius_mm).map_err(|e| JsValue::from_str(&e))
    }
}

#[wasm_bindgen(js_name = classifyStrategy)]
pub fn classify_js(sequence: &str) -> Result<String, JsValue> {
    classify(sequence).map_err(|e| JsValue::from_str(&e))
}
