//! Navigation strategies and topic coverage from debrief logs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::Phase;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UsageError {
    #[error("no phase selections to classify")]
    EmptySequence,
    #[error("theme has frequency {0} but appears in no session")]
    DivisionByZero(u64),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyLabel {
    #[serde(rename = "S1_SINGLE_PHASE")]
    SinglePhase,
    #[serde(rename = "S2_ALL_THEN_FOCUS")]
    AllThenFocus,
    #[serde(rename = "S3_TWO_PHASE_ALTERNATION")]
    TwoPhaseAlternation,
    #[serde(rename = "S4_PROGRESSIVE")]
    Progressive,
    #[serde(rename = "S5_COMPLEX")]
    Complex,
}

impl StrategyLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyLabel::SinglePhase => "S1_SINGLE_PHASE",
            StrategyLabel::AllThenFocus => "S2_ALL_THEN_FOCUS",
            StrategyLabel::TwoPhaseAlternation => "S3_TWO_PHASE_ALTERNATION",
            StrategyLabel::Progressive => "S4_PROGRESSIVE",
            StrategyLabel::Complex => "S5_COMPLEX",
        }
    }
}

/// Drops consecutive repeats.
pub fn collapse_repeats(selections: &[Phase]) -> Vec<Phase> {
    let mut out: Vec<Phase> = Vec::with_capacity(selections.len());
    for p in selections {
        if out.last() != Some(p) {
            out.push(*p);
        }
    }
    out
}

/// Ordered decision table over the collapsed selection sequence.
pub fn classify_strategy(selections: &[Phase]) -> Result<StrategyLabel, UsageError> {
    if selections.is_empty() {
        return Err(UsageError::EmptySequence);
    }
    let d = collapse_repeats(selections);
    let distinct: BTreeSet<Phase> = d.iter().copied().collect();
    let revisits = distinct.len() < d.len();
    let label = if distinct.len() == 1 {
        StrategyLabel::SinglePhase
    } else if d.len() == 2 && d[0] == Phase::All {
        StrategyLabel::AllThenFocus
    } else if !distinct.contains(&Phase::All) && distinct.len() == 2 && revisits {
        StrategyLabel::TwoPhaseAlternation
    } else if d[0] == Phase::All && d.len() >= 3 && !revisits {
        StrategyLabel::Progressive
    } else {
        StrategyLabel::Complex
    };
    Ok(label)
}

/// Mean mentions of a theme per session in which it appeared.
pub fn coverage_index(theme_frequency: u64, sessions_with_theme: u64) -> Result<f64, UsageError> {
    match (theme_frequency, sessions_with_theme) {
        (0, 0) => Ok(0.0),
        (f, 0) => Err(UsageError::DivisionByZero(f)),
        (f, s) => Ok(f as f64 / s as f64),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub session_id: String,
    pub label: StrategyLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThemeCount {
    pub theme: String,
    pub frequency: u64,
    pub sessions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub theme: String,
    pub frequency: u64,
    pub sessions: u64,
    pub coverage: f64,
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, UsageError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| UsageError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| UsageError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `strategies.csv`: `session_id,label`.
pub fn strategies_csv(rows: &[StrategyRow]) -> Result<String, UsageError> {
    if rows.is_empty() {
        return Ok("session_id,label\n".into());
    }
    to_csv(rows)
}

/// `coverage.csv`: `theme,frequency,sessions,coverage`.
pub fn coverage_csv(themes: &[ThemeCount]) -> Result<String, UsageError> {
    let rows = themes
        .iter()
        .map(|t| {
            Ok(CoverageRow {
                theme: t.theme.clone(),
                frequency: t.frequency,
                sessions: t.sessions,
                coverage: coverage_index(t.frequency, t.sessions)?,
            })
        })
        .collect::<Result<Vec<_>, UsageError>>()?;
    if rows.is_empty() {
        return Ok("theme,frequency,sessions,coverage\n".into());
    }
    to_csv(&rows)
}

pub fn parse_theme_counts(text: &str) -> Result<Vec<ThemeCount>, UsageError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| UsageError::Csv(e.to_string())))
        .collect()
}
