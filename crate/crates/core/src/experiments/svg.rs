//! Deterministic SVG rendering of forests, matchings and height fields.
//! Coordinates are quarter units with the y axis pointing up.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::surface::{LiftedFace, SuperpositionGraph, SurfaceGraph, Topology, Vec2};
use crate::temperley::DimerConfig;
use crate::wilson::OrientedCrsf;

/// Largest grid side that can be rendered.
pub const SVG_GRID_CAP: usize = 2048;

pub enum RenderItem<'a> {
    /// The bare primal lattice.
    Lattice,
    /// Forest edges, with cycle edges in a distinct stroke.
    Crsf(&'a OrientedCrsf),
    Dimers(&'a SuperpositionGraph, &'a DimerConfig),
    /// One value per canonical face of `G`.
    HeightHeatmap(&'a SuperpositionGraph, &'a [f64]),
}

struct Canvas {
    out: String,
    height: i64,
}

impl Canvas {
    fn new(t: Topology) -> Self {
        let (nx, ny) = t.dims();
        let (w, h) = match t {
            Topology::Torus { .. } => (4 * nx as i64, 4 * ny as i64),
            Topology::Annulus { .. } => (4 * nx as i64, 4 * (ny as i64 - 1)),
        };
        let scale = (2000.0 / (w.max(h) + 4) as f64).min(2.0);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="-2 -2 {} {}" width="{:.0}" height="{:.0}">"#,
            w + 4,
            h + 4,
            (w + 4) as f64 * scale,
            (h + 4) as f64 * scale
        );
        let _ = writeln!(out, r#"<rect x="-2" y="-2" width="{}" height="{}" fill="white"/>"#, w + 4, h + 4);
        Self { out, height: h }
    }

    fn y(&self, y: i64) -> i64 {
        self.height - y
    }

    /// One path element of unit segments `(start, displacement)`.
    fn segments(&mut self, segs: impl Iterator<Item = (Vec2, Vec2)>, stroke: &str, width: f64) {
        let mut d = String::new();
        for (p, v) in segs {
            let _ = write!(d, "M{} {}l{} {}", p.x, self.y(p.y), v.x, -v.y);
        }
        if !d.is_empty() {
            let _ = writeln!(
                self.out,
                r#"<path d="{d}" stroke="{stroke}" stroke-width="{width}" stroke-linecap="round" fill="none"/>"#
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn heat_colour(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t * 2.0;
        (u, u, 1.0)
    } else {
        let u = (1.0 - t) * 2.0;
        (1.0, u, u)
    };
    format!("#{:02x}{:02x}{:02x}", (r * 255.0).round() as u8, (g * 255.0).round() as u8, (b * 255.0).round() as u8)
}

pub fn render_svg(g: &SurfaceGraph, item: &RenderItem) -> Result<String> {
    let (nx, ny) = g.topology.dims();
    let side = nx.max(ny);
    if side > SVG_GRID_CAP {
        return Err(Error::SizeCap { what: "render grid side", size: side, cap: SVG_GRID_CAP });
    }
    let mut c = Canvas::new(g.topology);
    let p = &g.primal;
    match item {
        RenderItem::Lattice => {
            c.segments((0..p.n_edges()).map(|e| (p.positions[p.edges[e].tail], p.edges[e].disp)), "#bbbbbb", 0.3);
        }
        RenderItem::Crsf(t) => {
            let on_cycle: std::collections::HashSet<_> = t.cycles.iter().flat_map(|c| c.edges.iter().copied()).collect();
            let tree = t.out_edge.iter().enumerate().filter_map(|(v, h)| h.filter(|h| !on_cycle.contains(h)).map(|h| (v, h)));
            c.segments(tree.map(|(v, h)| (p.positions[v], p.disp(h))), "#2b4c7e", 0.8);
            let cyc = t.cycles.iter().flat_map(|cy| cy.edges.iter().map(|&h| (p.positions[p.tail(h)], p.disp(h))));
            c.segments(cyc, "#d62728", 1.6);
        }
        RenderItem::Dimers(s, m) => {
            m.validate(s)?;
            let segs = m.white_to_black.iter().enumerate().map(|(w, &b)| {
                let e = s.edge_between(w, b).expect("validated matching");
                let bp = s.positions[b];
                let step = s.edges[e].step;
                (bp, step.scale(2))
            });
            c.segments(segs, "#333333", 1.0);
        }
        RenderItem::HeightHeatmap(s, values) => {
            if values.len() != s.faces.len() {
                return Err(Error::Config(format!("{} values for {} faces", values.len(), s.faces.len())));
            }
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = if hi > lo { hi - lo } else { 1.0 };
            for (f, v) in values.iter().enumerate() {
                let m = s.face_mid(LiftedFace::new(f, [0, 0]));
                let _ = writeln!(
                    c.out,
                    r#"<rect x="{}" y="{}" width="2" height="2" fill="{}"/>"#,
                    m.x - 1,
                    c.y(m.y) - 1,
                    heat_colour((v - lo) / span)
                );
            }
        }
    }
    Ok(c.finish())
}
