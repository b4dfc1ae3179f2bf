//! SVG overlays: rollout heat maps and graph debug views.

use crate::layout::Span;
use crate::pagegraph::PageGraph;
use crate::synthdoc::{PAGE_HEIGHT, PAGE_WIDTH};

/// 256-step sequential ramp from pale yellow through orange to deep red,
/// piecewise-linear in sRGB. Input is clamped to [0, 1].
pub fn ramp_color(t: f64) -> String {
    const STOPS: [(f64, [u8; 3]); 3] = [
        (0.0, [255, 255, 204]),
        (0.5, [253, 141, 60]),
        (1.0, [128, 0, 38]),
    ];
    let step = (t.clamp(0.0, 1.0) * 255.0).round() / 255.0;
    let (mut lo, mut hi) = (STOPS[0], STOPS[1]);
    if step > STOPS[1].0 {
        lo = STOPS[1];
        hi = STOPS[2];
    }
    let f = if hi.0 > lo.0 { (step - lo.0) / (hi.0 - lo.0) } else { 0.0 };
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(lo.1[0], hi.1[0]),
        mix(lo.1[1], hi.1[1]),
        mix(lo.1[2], hi.1[2])
    )
}

fn svg_header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {width} {height}\" \
         width=\"{width}\" height=\"{height}\">\n\
         <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    )
}

/// Color every span rectangle by its rollout row weight; the query span gets
/// a blue outline and marker dot.
pub fn rollout_overlay_svg(spans: &[Span], weights: &[f64], query: usize) -> String {
    let max_weight = weights
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != query)
        .map(|(_, w)| *w)
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut svg = svg_header(PAGE_WIDTH, PAGE_HEIGHT);
    for (i, span) in spans.iter().enumerate() {
        let fill = ramp_color(weights.get(i).copied().unwrap_or(0.0) / max_weight);
        svg.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{}\" \
             stroke=\"#bbbbbb\" stroke-width=\"0.5\"><title>{} w={:.6}</title></rect>\n",
            span.x0,
            span.y0,
            span.x1 - span.x0,
            span.y1 - span.y0,
            fill,
            span.span_id,
            weights.get(i).copied().unwrap_or(0.0),
        ));
    }
    if let Some(span) = spans.get(query) {
        svg.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
             stroke=\"#1d4ed8\" stroke-width=\"2\"/>\n\
             <circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"5\" fill=\"#1d4ed8\"/>\n",
            span.x0,
            span.y0,
            span.x1 - span.x0,
            span.y1 - span.y0,
            span.x0 - 8.0,
            (span.y0 + span.y1) / 2.0,
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// One rectangle per span plus an arrow per directional edge.
pub fn graph_debug_svg(g: &PageGraph) -> String {
    let mut svg = svg_header(PAGE_WIDTH, PAGE_HEIGHT);
    svg.push_str(
        "<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" \
         markerWidth=\"6\" markerHeight=\"6\" orient=\"auto-start-reverse\">\
         <path d=\"M 0 0 L 10 5 L 0 10 z\" fill=\"#475569\"/></marker></defs>\n",
    );
    for span in &g.spans {
        svg.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#e2e8f0\" \
             stroke=\"#64748b\" stroke-width=\"0.8\"><title>{}: {}</title></rect>\n",
            span.x0,
            span.y0,
            span.x1 - span.x0,
            span.y1 - span.y0,
            span.span_id,
            span.text(),
        ));
    }
    for (i, dirs) in g.direction_edges.iter().enumerate() {
        let a = &g.spans[i];
        let (ax, ay) = ((a.x0 + a.x1) / 2.0, (a.y0 + a.y1) / 2.0);
        for j in dirs.iter().flatten() {
            let b = &g.spans[*j];
            let (bx, by) = ((b.x0 + b.x1) / 2.0, (b.y0 + b.y1) / 2.0);
            svg.push_str(&format!(
                "<line x1=\"{ax:.1}\" y1=\"{ay:.1}\" x2=\"{bx:.1}\" y2=\"{by:.1}\" \
                 stroke=\"#475569\" stroke-width=\"0.7\" marker-end=\"url(#arrow)\"/>\n"
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}
