//! Seeded sessions run through the engine and the oracles side by side.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use debriefkit_core::analytics::AnalyticsParams;
use debriefkit_core::interaction::compute_comm_network;
use debriefkit_core::interaction::compute_sociogram;
use debriefkit_core::model::{resolve_phase_window, Millis, Phase, TimeWindow};
use debriefkit_core::spatial::{compute_priority_breakdown, compute_ward_map};
use debriefkit_core::Session;

use crate::generate::generate_session;
use crate::oracle::{
    oracle_network, oracle_priority, oracle_sociogram, oracle_wardmap, OracleInput,
    OracleThresholds,
};
use crate::random::random_script;

const EPS: f64 = 1e-9;

/// Engine against oracle, internal consistency of one payload, or sums over
/// a partition of the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CheckKind {
    Oracle,
    Conservation,
    Additivity,
}

impl CheckKind {
    pub const ALL: [CheckKind; 3] = [CheckKind::Oracle, CheckKind::Conservation, CheckKind::Additivity];
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SeedReport {
    pub seed: u64,
    pub duration_ms: Millis,
    pub entities: usize,
    pub checks: BTreeMap<CheckKind, u64>,
    pub failures: Vec<(CheckKind, String)>,
}

impl SeedReport {
    fn check(&mut self, kind: CheckKind, ok: bool, what: impl FnOnce() -> String) {
        *self.checks.entry(kind).or_insert(0) += 1;
        if !ok {
            self.failures.push((kind, what()));
        }
    }

    pub fn total_checks(&self) -> u64 {
        self.checks.values().sum()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CampaignReport {
    pub sessions: u64,
    pub max_duration_ms: Millis,
    pub entity_range: (usize, usize),
    pub checks: BTreeMap<CheckKind, u64>,
    pub failed_sessions: u64,
    pub failures: Vec<(u64, CheckKind, String)>,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.failed_sessions == 0
    }

    pub fn checks_of(&self, kind: CheckKind) -> u64 {
        self.checks.get(&kind).copied().unwrap_or(0)
    }

    pub fn failures_of(&self, kind: CheckKind) -> usize {
        self.failures.iter().filter(|f| f.1 == kind).count()
    }

    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} sessions (up to {} ms, {}-{} entities), {} sessions with failures\n",
            self.sessions, self.max_duration_ms, self.entity_range.0, self.entity_range.1, self.failed_sessions
        );
        for kind in CheckKind::ALL {
            let _ = writeln!(
                out,
                "  {kind:?}: {} checks, {} failed",
                self.checks_of(kind),
                self.failures_of(kind)
            );
        }
        for (seed, kind, f) in self.failures.iter().take(20) {
            let _ = writeln!(out, "  seed {seed} [{kind:?}]: {f}");
        }
        out
    }
}

fn thresholds(p: &AnalyticsParams) -> OracleThresholds {
    OracleThresholds {
        dist_face_mm: p.dist_face_mm,
        dist_side_mm: p.dist_side_mm,
        angle_tol_deg: p.angle_tol_deg,
        speed_threshold_mm_s: p.speed_threshold_mm_s,
        discussion_dist_mm: p.discussion_dist_mm,
        hex_radius_mm: p.hex_radius_mm,
        network_window_size: p.network_window_size,
    }
}

fn compare_window(
    rep: &mut SeedReport,
    session: &Session,
    input: &OracleInput,
    w: &TimeWindow,
    params: &AnalyticsParams,
    with_sociogram: bool,
) {
    let th = thresholds(params);

    let engine = compute_priority_breakdown(session, w, &params.priority());
    let oracle = oracle_priority(input, w, &th);
    rep.check(CheckKind::Oracle, engine.member_ticks == oracle.member_ticks, || {
        format!("priority {w}: member_ticks {} vs {}", engine.member_ticks, oracle.member_ticks)
    });
    for (b, n) in &engine.counts {
        let want = oracle.counts.get(b.as_str()).copied().unwrap_or(0);
        rep.check(CheckKind::Oracle, *n == want, || format!("priority {w}: {} {n} vs {want}", b.as_str()));
        let f = engine.fractions.get(b).copied().unwrap_or(0.0);
        let wf = oracle.fractions.get(b.as_str()).copied().unwrap_or(0.0);
        rep.check(CheckKind::Oracle, (f - wf).abs() < EPS, || format!("priority {w}: {} fraction {f} vs {wf}", b.as_str()));
    }
    let total: u64 = engine.counts.values().sum();
    rep.check(CheckKind::Conservation, total == engine.member_ticks, || {
        format!("priority {w}: counts sum {total} != member ticks {}", engine.member_ticks)
    });
    if !engine.empty {
        let fsum: f64 = engine.fractions.values().sum();
        rep.check(CheckKind::Conservation, (fsum - 1.0).abs() < 1e-9, || format!("priority {w}: fractions sum {fsum}"));
    }

    let engine = compute_ward_map(session, w, params.hex_radius_mm);
    let oracle = oracle_wardmap(input, w, &th);
    rep.check(CheckKind::Oracle, engine.cells.len() == oracle.cells.len(), || {
        format!("wardmap {w}: {} cells vs {}", engine.cells.len(), oracle.cells.len())
    });
    for c in &engine.cells {
        match oracle.cells.get(&(c.entity, c.q, c.r)) {
            None => rep.check(CheckKind::Oracle, false, || format!("wardmap {w}: extra cell {} ({},{})", c.entity, c.q, c.r)),
            Some((n, voiced)) => {
                let frac = *voiced as f64 / *n as f64;
                rep.check(CheckKind::Oracle, 
                    c.sample_count == *n
                        && (c.voice_fraction - frac).abs() < EPS
                        && c.filled == (frac > 0.5),
                    || format!("wardmap {w}: cell {} ({},{}) differs", c.entity, c.q, c.r),
                );
            }
        }
    }

    let mut per_entity: BTreeMap<_, u64> = BTreeMap::new();
    for c in &engine.cells {
        *per_entity.entry(c.entity).or_insert(0) += c.sample_count;
    }
    rep.check(CheckKind::Conservation, per_entity == oracle.tracked_ticks, || {
        format!("wardmap {w}: per-entity samples differ from tracked ticks")
    });

    let engine = compute_comm_network(session.utterances(), w, params.network_window_size)
        .expect("validated window size");
    let oracle = oracle_network(input, w, &th);
    for (code, n) in &engine.node_counts {
        let want = oracle.nodes.get(code).copied().unwrap_or(0);
        rep.check(CheckKind::Oracle, *n == want, || format!("network {w}: node {code} {n} vs {want}"));
    }
    let engine_edges: BTreeMap<_, _> = engine
        .edge_counts
        .iter()
        .filter(|e| e.count > 0)
        .map(|e| ((e.a, e.b), e.count))
        .collect();
    rep.check(CheckKind::Oracle, engine_edges == oracle.edges, || format!("network {w}: edge counts differ"));

    if with_sociogram {
        let engine = compute_sociogram(session, w, &params.formation());
        let oracle = oracle_sociogram(input, w, &th);
        let nodes: BTreeMap<_, _> = engine
            .nodes
            .iter()
            .filter(|(_, ms)| **ms > 0)
            .map(|(e, ms)| (*e, *ms))
            .collect();
        rep.check(CheckKind::Oracle, nodes == oracle.nodes, || format!("sociogram {w}: node weights differ"));
        let edges: BTreeMap<_, _> = engine
            .edges
            .iter()
            .filter(|e| e.ms > 0)
            .map(|e| ((e.from, e.to), e.ms))
            .collect();
        rep.check(CheckKind::Oracle, edges == oracle.edges, || format!("sociogram {w}: edge weights differ"));
        for e in &engine.edges {
            let speaker = engine.nodes.get(&e.from).copied().unwrap_or(0);
            rep.check(CheckKind::Conservation, e.ms <= speaker, || {
                format!("sociogram {w}: edge {}->{} exceeds speaker time", e.from, e.to)
            });
        }
    }
}

/// Sums over the pieces of a partition must equal the whole.
fn check_additivity(rep: &mut SeedReport, session: &Session, cuts: &[Millis], params: &AnalyticsParams) {
    let end = session.timeline().end_ms;
    let whole = session.timeline().whole();
    let mut bounds = vec![0];
    bounds.extend(cuts.iter().copied().filter(|c| *c > 0 && *c < end));
    bounds.push(end);
    bounds.sort();
    bounds.dedup();
    let pieces: Vec<TimeWindow> = bounds
        .windows(2)
        .map(|b| TimeWindow::within(b[0], b[1], end).expect("ordered bounds"))
        .collect();

    let full = compute_priority_breakdown(session, &whole, &params.priority());
    let mut counts: BTreeMap<_, u64> = BTreeMap::new();
    for p in &pieces {
        for (b, n) in compute_priority_breakdown(session, p, &params.priority()).counts {
            *counts.entry(b).or_insert(0) += n;
        }
    }
    let mut weighted: BTreeMap<_, f64> = BTreeMap::new();
    for p in &pieces {
        let part = compute_priority_breakdown(session, p, &params.priority());
        for (b, f) in &part.fractions {
            *weighted.entry(*b).or_insert(0.0) += f * part.member_ticks as f64;
        }
    }
    if full.member_ticks > 0 {
        for (b, f) in &full.fractions {
            let avg = weighted.get(b).copied().unwrap_or(0.0) / full.member_ticks as f64;
            rep.check(CheckKind::Additivity, (avg - f).abs() < EPS, || {
                format!("priority {}: weighted average {avg} vs {f}", b.as_str())
            });
        }
    }
    counts.retain(|_, n| *n > 0);
    let mut want = full.counts.clone();
    want.retain(|_, n| *n > 0);
    rep.check(CheckKind::Additivity, counts == want, || "priority counts are not additive".into());

    let full = compute_ward_map(session, &whole, params.hex_radius_mm);
    let mut cells: BTreeMap<_, u64> = BTreeMap::new();
    for p in &pieces {
        for c in compute_ward_map(session, p, params.hex_radius_mm).cells {
            *cells.entry((c.entity, c.q, c.r)).or_insert(0) += c.sample_count;
        }
    }
    let want: BTreeMap<_, u64> = full
        .cells
        .iter()
        .map(|c| ((c.entity, c.q, c.r), c.sample_count))
        .collect();
    rep.check(CheckKind::Additivity, cells == want, || "ward map samples are not additive".into());

    let full = compute_sociogram(session, &whole, &params.formation());
    let mut nodes: BTreeMap<_, u64> = BTreeMap::new();
    let mut edges: BTreeMap<_, u64> = BTreeMap::new();
    for p in &pieces {
        let g = compute_sociogram(session, p, &params.formation());
        for (e, ms) in g.nodes {
            *nodes.entry(e).or_insert(0) += ms;
        }
        for e in g.edges {
            *edges.entry((e.from, e.to)).or_insert(0) += e.ms;
        }
    }
    nodes.retain(|_, ms| *ms > 0);
    edges.retain(|_, ms| *ms > 0);
    let want_nodes: BTreeMap<_, _> = full.nodes.iter().filter(|(_, m)| **m > 0).map(|(e, m)| (*e, *m)).collect();
    let want_edges: BTreeMap<_, _> = full
        .edges
        .iter()
        .filter(|e| e.ms > 0)
        .map(|e| ((e.from, e.to), e.ms))
        .collect();
    rep.check(CheckKind::Additivity, nodes == want_nodes, || "sociogram nodes are not additive".into());
    rep.check(CheckKind::Additivity, edges == want_edges, || "sociogram edges are not additive".into());

    let size = params.network_window_size;
    let full = compute_comm_network(session.utterances(), &whole, size).expect("size");
    let mut nodes: BTreeMap<_, u64> = BTreeMap::new();
    let mut edges: BTreeMap<_, u64> = BTreeMap::new();
    for p in &pieces {
        let n = compute_comm_network(session.utterances(), p, size).expect("size");
        for (c, k) in n.node_counts {
            *nodes.entry(c).or_insert(0) += k;
        }
        for e in n.edge_counts {
            *edges.entry((e.a, e.b)).or_insert(0) += e.count;
        }
    }
    let want_edges: BTreeMap<_, _> = full.edge_counts.iter().map(|e| ((e.a, e.b), e.count)).collect();
    edges.retain(|k, v| *v > 0 || want_edges.contains_key(k));
    rep.check(CheckKind::Additivity, nodes == full.node_counts, || "network nodes are not additive".into());
    rep.check(CheckKind::Additivity, edges == want_edges, || "network edges are not additive".into());
}

/// One seeded session: engine against oracles on several windows, plus
/// conservation and additivity.
pub fn check_seed(seed: u64) -> SeedReport {
    let mut rep = SeedReport {
        seed,
        ..Default::default()
    };
    let script = random_script(seed);
    rep.duration_ms = script.duration_ms;
    rep.entities = script.cast.len();
    let generated = match generate_session(&script) {
        Ok(g) => g,
        Err(e) => {
            rep.check(CheckKind::Oracle, false, || format!("generation failed: {e}"));
            return rep;
        }
    };
    let session = match generated.to_session(&format!("seed-{seed}")) {
        Ok(s) => s,
        Err(e) => {
            rep.check(CheckKind::Oracle, false, || format!("ingest failed: {e}"));
            return rep;
        }
    };
    let input = OracleInput::from_session(&session, &script.cast);
    let end = session.timeline().end_ms;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut params = AnalyticsParams::default();

    compare_window(&mut rep, &session, &input, &session.timeline().whole(), &params, true);
    for phase in Phase::MARKED {
        if let Ok(w) = resolve_phase_window(session.timeline(), phase) {
            compare_window(&mut rep, &session, &input, &w, &params, false);
        }
    }
    // An unaligned window exercises the millisecond clipping.
    let a = rng.random_range(0..end);
    let b = rng.random_range(a..=end);
    let odd = TimeWindow::within(a, b, end).expect("ordered");
    compare_window(&mut rep, &session, &input, &odd, &params, true);

    params.network_window_size = 3;
    params.dist_face_mm = 1200.0;
    params.angle_tol_deg = 30.0;
    compare_window(&mut rep, &session, &input, &odd, &params, false);

    let params = AnalyticsParams::default();
    let mut cuts: Vec<Millis> = session.timeline().markers().iter().flatten().copied().collect();
    cuts.push(rng.random_range(0..end));
    cuts.push(a);
    check_additivity(&mut rep, &session, &cuts, &params);
    rep
}

pub fn run_campaign(seeds: std::ops::Range<u64>) -> CampaignReport {
    let reports: Vec<SeedReport> = seeds.into_par_iter().map(check_seed).collect();
    let mut out = CampaignReport {
        entity_range: (usize::MAX, 0),
        ..Default::default()
    };
    for r in reports {
        out.sessions += 1;
        out.max_duration_ms = out.max_duration_ms.max(r.duration_ms);
        out.entity_range.0 = out.entity_range.0.min(r.entities);
        out.entity_range.1 = out.entity_range.1.max(r.entities);
        for (k, n) in &r.checks {
            *out.checks.entry(*k).or_insert(0) += n;
        }
        if !r.failures.is_empty() {
            out.failed_sessions += 1;
            out.failures.extend(r.failures.into_iter().map(|(k, f)| (r.seed, k, f)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_campaign_agrees() {
        let report = run_campaign(0..8);
        assert!(report.passed(), "{}", report.summary());
        for kind in CheckKind::ALL {
            assert!(report.checks_of(kind) > 0, "{kind:?}");
        }
    }
}
