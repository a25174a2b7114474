use std::fmt::Write as _;

use super::{StickMap, SurveyNetwork};

const CANVAS_PX: f64 = 800.0;
const MARGIN_PX: f64 = 40.0;
const SCALE_BAR_M: f64 = 10.0;

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Plan-view SVG of a stick map: east to the right, north up, one `<line>`
/// per shot, a dot and a "name (depth m)" label per station, and a 10 m
/// scale bar.
pub fn stickmap_svg(map: &StickMap, net: &SurveyNetwork) -> String {
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, p) in &map.stations {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    let extent = (max_x - min_x).max(max_y - min_y).max(SCALE_BAR_M);
    let scale = (CANVAS_PX - 2.0 * MARGIN_PX) / extent;
    let width = (max_x - min_x) * scale + 2.0 * MARGIN_PX;
    let height = (max_y - min_y) * scale + 3.0 * MARGIN_PX;
    let px = |x: f64| MARGIN_PX + (x - min_x) * scale;
    let py = |y: f64| MARGIN_PX + (max_y - y) * scale;

    let depths = net.measured_depths();
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    out.push_str("  <g stroke=\"black\" stroke-width=\"1.5\">\n");
    for s in &net.segments {
        let (Some(a), Some(b)) = (map.position(&s.from), map.position(&s.to)) else {
            continue;
        };
        let _ = writeln!(
            out,
            r#"    <line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            px(a.x),
            py(a.y),
            px(b.x),
            py(b.y)
        );
    }
    out.push_str("  </g>\n  <g font-family=\"sans-serif\" font-size=\"10\">\n");
    for (name, p) in &map.stations {
        let depth = depths.get(name).copied().unwrap_or(p.z);
        let _ = writeln!(
            out,
            r#"    <circle cx="{:.3}" cy="{:.3}" r="3" fill="red"/>"#,
            px(p.x),
            py(p.y)
        );
        let _ = writeln!(
            out,
            r#"    <text x="{:.3}" y="{:.3}">{} ({depth:.1} m)</text>"#,
            px(p.x) + 5.0,
            py(p.y) - 5.0,
            escape(name)
        );
    }
    out.push_str("  </g>\n");
    let bar_y = height - MARGIN_PX;
    let _ = writeln!(
        out,
        r#"  <rect x="{MARGIN_PX:.3}" y="{bar_y:.3}" width="{:.3}" height="4" fill="black"/>"#,
        SCALE_BAR_M * scale
    );
    let _ = writeln!(
        out,
        r#"  <text x="{MARGIN_PX:.3}" y="{:.3}" font-family="sans-serif" font-size="10">{SCALE_BAR_M} m</text>"#,
        bar_y + 16.0
    );
    out.push_str("</svg>\n");
    out
}
