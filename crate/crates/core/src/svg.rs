//! Minimal SVG 1.1 writer for figures: polylines, polygons and dots in
//! world coordinates, fitted into a square canvas with the y axis up.

use std::fmt::Write as _;

use crate::geom::Vec2;

#[derive(Debug, Clone)]
enum Shape {
    Path { points: Vec<Vec2>, closed: bool, stroke: String, width: f64 },
    Dots { points: Vec<Vec2>, fill: String, radius: f64 },
    Label { at: Vec2, text: String },
}

#[derive(Debug, Clone, Default)]
pub struct Figure {
    title: String,
    shapes: Vec<Shape>,
}

impl Figure {
    pub fn new(title: &str) -> Self {
        Figure {
            title: title.to_string(),
            shapes: Vec::new(),
        }
    }

    pub fn curve(&mut self, points: &[Vec2], closed: bool, stroke: &str) -> &mut Self {
        self.shapes.push(Shape::Path {
            points: points.to_vec(),
            closed,
            stroke: stroke.to_string(),
            width: 1.5,
        });
        self
    }

    pub fn thin_curve(&mut self, points: &[Vec2], closed: bool, stroke: &str) -> &mut Self {
        self.shapes.push(Shape::Path {
            points: points.to_vec(),
            closed,
            stroke: stroke.to_string(),
            width: 0.5,
        });
        self
    }

    pub fn dots(&mut self, points: &[Vec2], fill: &str) -> &mut Self {
        self.shapes.push(Shape::Dots {
            points: points.to_vec(),
            fill: fill.to_string(),
            radius: 2.5,
        });
        self
    }

    pub fn label(&mut self, at: Vec2, text: &str) -> &mut Self {
        self.shapes.push(Shape::Label {
            at,
            text: text.to_string(),
        });
        self
    }

    fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut add = |p: &Vec2| {
            if p.is_finite() {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        };
        for s in &self.shapes {
            match s {
                Shape::Path { points, .. } | Shape::Dots { points, .. } => points.iter().for_each(&mut add),
                Shape::Label { at, .. } => add(at),
            }
        }
        if !lo.x.is_finite() {
            return (Vec2::new(-1.0, -1.0), Vec2::new(1.0, 1.0));
        }
        (lo, hi)
    }

    /// Renders to an SVG document of `size × size` pixels.
    pub fn render(&self, size: f64) -> String {
        let (lo, hi) = self.bounds();
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let margin = 0.05 * size;
        let k = (size - 2.0 * margin) / span;
        let cx = 0.5 * (lo.x + hi.x);
        let cy = 0.5 * (lo.y + hi.y);
        let map = |p: Vec2| (0.5 * size + k * (p.x - cx), 0.5 * size - k * (p.y - cy));

        let mut out = String::new();
        let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        let _ = writeln!(out, "<title>{}</title>", escape(&self.title));
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for s in &self.shapes {
            match s {
                Shape::Path { points, closed, stroke, width } => {
                    let pts: Vec<String> = points
                        .iter()
                        .map(|p| {
                            let (x, y) = map(*p);
                            format!("{x:.3},{y:.3}")
                        })
                        .collect();
                    let tag = if *closed { "polygon" } else { "polyline" };
                    let _ = writeln!(
                        out,
                        r#"<{tag} points="{}" fill="none" stroke="{}" stroke-width="{width}"/>"#,
                        pts.join(" "),
                        escape(stroke)
                    );
                }
                Shape::Dots { points, fill, radius } => {
                    for p in points {
                        let (x, y) = map(*p);
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{x:.3}" cy="{y:.3}" r="{radius}" fill="{}"/>"#,
                            escape(fill)
                        );
                    }
                }
                Shape::Label { at, text } => {
                    let (x, y) = map(*at);
                    let _ = writeln!(
                        out,
                        r#"<text x="{x:.3}" y="{y:.3}" font-family="sans-serif" font-size="12">{}</text>"#,
                        escape(text)
                    );
                }
            }
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_shapes_inside_the_canvas() {
        let mut f = Figure::new("a < b");
        f.curve(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 2.0)], true, "black")
            .dots(&[Vec2::new(0.5, 0.5)], "red");
        let s = f.render(200.0);
        assert!(s.contains("<polygon") && s.contains("<circle"));
        assert!(s.contains("a &lt; b"));
        assert!(s.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_figure_is_valid() {
        assert!(Figure::new("empty").render(100.0).contains("<svg"));
    }
}
