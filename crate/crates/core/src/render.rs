//! Static SVG renderings of the four visualisations on a fixed canvas.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write;

use crate::analytics::{AnalyticsData, AnalyticsPayload};
use crate::interaction::{CommNetwork, SociogramGraph};
use crate::model::{ColorMap, CommCode, EntityRole, WardLayout};
use crate::spatial::{hex_center, Behaviour, PriorityBreakdown, WardMap};

pub const CANVAS_W: f64 = 1000.0;
pub const CANVAS_H: f64 = 800.0;

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_W}" height="{CANVAS_H}" viewBox="0 0 {CANVAS_W} {CANVAS_H}" font-family="sans-serif">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="20" y="36" font-size="22">{}</text>"#, escape(title)).unwrap();
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_svg(payload: &AnalyticsPayload, layout: &WardLayout) -> String {
    let colors = layout.color_map().unwrap_or_default();
    let title = format!(
        "{} {}, {} ms to {} ms",
        payload.session_id, payload.viz, payload.window.from_ms, payload.window.to_ms
    );
    let mut s = open(&title);
    match &payload.data {
        AnalyticsData::Priority(b) => priority(&mut s, b),
        AnalyticsData::Wardmap(m) => ward_map(&mut s, m, layout, &colors),
        AnalyticsData::Sociogram(g) => sociogram(&mut s, g, &colors),
        AnalyticsData::Network(n) => network(&mut s, n),
    }
    s.push_str("</svg>\n");
    s
}

fn priority(s: &mut String, b: &PriorityBreakdown) {
    let (left, top, bar_h, gap, width) = (380.0, 90.0, 60.0, 34.0, 540.0);
    for (i, behaviour) in Behaviour::ALL.iter().enumerate() {
        let y = top + i as f64 * (bar_h + gap);
        let f = b.fraction(*behaviour);
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="15" text-anchor="end">{}</text>"#,
            left - 12.0,
            y + bar_h / 2.0 + 5.0,
            escape(behaviour.label())
        )
        .unwrap();
        writeln!(
            s,
            r##"<rect x="{left:.1}" y="{y:.1}" width="{width:.1}" height="{bar_h:.1}" fill="#eeeeee"/>"##
        )
        .unwrap();
        writeln!(
            s,
            r##"<rect x="{left:.1}" y="{y:.1}" width="{:.1}" height="{bar_h:.1}" fill="#4a78b5"/>"##,
            width * f
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="14">{:.1}%</text>"#,
            left + width * f + 6.0,
            y + bar_h / 2.0 + 5.0,
            f * 100.0
        )
        .unwrap();
    }
    if b.empty {
        writeln!(s, r#"<text x="20" y="780" font-size="14">no ticks in window</text>"#).unwrap();
    }
}

/// Millimetre-to-pixel transform that fits the room on the canvas below the
/// title.
struct Fit {
    scale: f64,
    dx: f64,
    dy: f64,
}

impl Fit {
    fn new(layout: &WardLayout) -> Self {
        let (w, h) = (layout.width_mm(), layout.height_mm());
        let (avail_w, avail_h) = (CANVAS_W - 40.0, CANVAS_H - 80.0);
        let scale = (avail_w / w).min(avail_h / h);
        Fit {
            scale,
            dx: 20.0 + (avail_w - w * scale) / 2.0,
            dy: 60.0 + (avail_h - h * scale) / 2.0,
        }
    }

    fn pt(&self, x: f64, y: f64) -> (f64, f64) {
        (self.dx + x * self.scale, self.dy + y * self.scale)
    }
}

fn ward_map(s: &mut String, m: &WardMap, layout: &WardLayout, colors: &ColorMap) {
    let fit = Fit::new(layout);
    let (x0, y0) = fit.pt(0.0, 0.0);
    writeln!(
        s,
        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333333"/>"##,
        layout.width_mm() * fit.scale,
        layout.height_mm() * fit.scale
    )
    .unwrap();
    for bed in &layout.beds {
        let (cx, cy) = fit.pt(bed.center_mm[0], bed.center_mm[1]);
        writeln!(
            s,
            r##"<circle cx="{cx:.1}" cy="{cy:.1}" r="{:.1}" fill="#f4f4f4" stroke="#999999"/>"##,
            bed.radius_mm * fit.scale
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{cx:.1}" y="{cy:.1}" font-size="14" text-anchor="middle">bed {}</text>"#,
            bed.id
        )
        .unwrap();
    }
    let r = m.hex_radius_mm;
    for cell in &m.cells {
        let (cx, cy) = hex_center(cell.q, cell.r, r);
        let points: Vec<String> = (0..6)
            .map(|i| {
                let a = PI / 180.0 * (60.0 * i as f64 - 30.0);
                let (px, py) = fit.pt(cx + r * a.cos(), cy + r * a.sin());
                format!("{px:.1},{py:.1}")
            })
            .collect();
        let color = colors.color(cell.entity);
        let fill = if cell.filled { color.as_str() } else { "none" };
        writeln!(
            s,
            r#"<polygon points="{}" fill="{fill}" fill-opacity="0.6" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        )
        .unwrap();
    }
}

fn ring(n: usize, i: usize, radius: f64) -> (f64, f64) {
    let a = -PI / 2.0 + 2.0 * PI * i as f64 / n as f64;
    (CANVAS_W / 2.0 + radius * a.cos(), CANVAS_H / 2.0 + 30.0 + radius * a.sin())
}

fn arrow_marker(s: &mut String) {
    s.push_str(concat!(
        r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" "##,
        r##"markerWidth="6" markerHeight="6" orient="auto-start-reverse">"##,
        r##"<path d="M 0 0 L 10 5 L 0 10 z" fill="#555555"/></marker></defs>"##,
        "\n"
    ));
}

fn sociogram(s: &mut String, g: &SociogramGraph, colors: &ColorMap) {
    arrow_marker(s);
    let roles: Vec<EntityRole> = EntityRole::ALL
        .into_iter()
        .filter(|r| g.nodes.contains_key(r))
        .collect();
    let at: BTreeMap<EntityRole, (f64, f64)> = roles
        .iter()
        .enumerate()
        .map(|(i, r)| (*r, ring(roles.len(), i, 280.0)))
        .collect();
    let max_node = g.nodes.values().copied().max().unwrap_or(0).max(1) as f64;
    let max_edge = g.edges.iter().map(|e| e.ms).max().unwrap_or(0).max(1) as f64;
    let node_r = |ms: u64| 18.0 + 42.0 * (ms as f64 / max_node).sqrt();
    for e in &g.edges {
        let ((x1, y1), (x2, y2)) = (at[&e.from], at[&e.to]);
        // Offset the pair sideways so a->b and b->a do not overlap.
        let (dx, dy) = (x2 - x1, y2 - y1);
        let len = (dx * dx + dy * dy).sqrt().max(1.0);
        let (nx, ny) = (-dy / len * 8.0, dx / len * 8.0);
        let pull = node_r(g.nodes[&e.to]) / len;
        writeln!(
            s,
            r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#555555" stroke-width="{:.1}" marker-end="url(#arrow)"/>"##,
            x1 + nx,
            y1 + ny,
            x2 - dx * pull + nx,
            y2 - dy * pull + ny,
            1.0 + 11.0 * e.ms as f64 / max_edge
        )
        .unwrap();
    }
    for r in &roles {
        let (x, y) = at[r];
        writeln!(
            s,
            r##"<circle cx="{x:.1}" cy="{y:.1}" r="{:.1}" fill="{}" stroke="#222222"/>"##,
            node_r(g.nodes[r]),
            colors.color(*r)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-size="15" text-anchor="middle">{} {:.1} s</text>"#,
            y + node_r(g.nodes[r]) + 18.0,
            r,
            g.nodes[r] as f64 / 1000.0
        )
        .unwrap();
    }
}

fn network(s: &mut String, n: &CommNetwork) {
    let at: BTreeMap<CommCode, (f64, f64)> = CommCode::ALL
        .iter()
        .enumerate()
        .map(|(i, c)| (*c, ring(6, i, 280.0)))
        .collect();
    let max_node = n.node_counts.values().copied().max().unwrap_or(0).max(1) as f64;
    let max_edge = n.edge_counts.iter().map(|e| e.count).max().unwrap_or(0).max(1) as f64;
    for e in &n.edge_counts {
        let ((x1, y1), (x2, y2)) = (at[&e.a], at[&e.b]);
        writeln!(
            s,
            r##"<line x1="{x1:.1}" y1="{y1:.1}" x2="{x2:.1}" y2="{y2:.1}" stroke="#7a5195" stroke-opacity="0.7" stroke-width="{:.1}"/>"##,
            1.0 + 14.0 * e.count as f64 / max_edge
        )
        .unwrap();
    }
    for code in CommCode::ALL {
        let (x, y) = at[&code];
        let count = n.node_counts.get(&code).copied().unwrap_or(0);
        let r = 10.0 + 40.0 * (count as f64 / max_node).sqrt();
        writeln!(
            s,
            r##"<circle cx="{x:.1}" cy="{y:.1}" r="{r:.1}" fill="#ef5675" stroke="#222222"/>"##
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" font-size="15" text-anchor="middle">{} ({count})</text>"#,
            y + r + 18.0,
            code.label()
        )
        .unwrap();
    }
}
