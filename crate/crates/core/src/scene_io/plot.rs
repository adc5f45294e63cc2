use std::fmt::Write as _;

use super::{PathFile, SceneFile};
use crate::error::{PlanError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    /// Width in pixels of one panel.
    pub panel_size: f64,
    /// Samples per Bézier piece when drawing the path.
    pub samples_per_piece: usize,
    pub control_polytopes: bool,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            panel_size: 600.0,
            samples_per_piece: 32,
            control_polytopes: true,
        }
    }
}

/// Renders boxes, an optional path and its control polytopes. Planar scenes
/// give one panel; 3-D scenes give the xy, xz and yz projections side by side.
pub fn plot_svg(scene: &SceneFile, path: Option<&PathFile>, options: &PlotOptions) -> Result<String> {
    let set = scene.to_box_set()?;
    if let Some(path) = path {
        path.validate_against(&set, f64::INFINITY)?;
    }
    let views: Vec<(usize, usize)> = match scene.dim {
        2 => vec![(0, 1)],
        3 => vec![(0, 1), (0, 2), (1, 2)],
        d => return Err(PlanError::InvalidInput(format!("can only plot 2-D or 3-D scenes, got {d}-D"))),
    };
    let size = options.panel_size;
    let margin = 10.0;
    let width = views.len() as f64 * (size + margin) + margin;
    let height = size + 2.0 * margin;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();

    let pieces = match path {
        Some(p) => {
            let curve = p.to_path()?;
            let mut sampled = Vec::new();
            for piece in curve.pieces() {
                let n = options.samples_per_piece.max(2);
                let pts: Vec<Vec<f64>> = (0..=n)
                    .map(|s| {
                        let t = piece.start() + piece.duration() * s as f64 / n as f64;
                        piece.eval(t.min(piece.end()))
                    })
                    .collect::<Result<_>>()?;
                sampled.push((pts, piece.points().to_vec()));
            }
            sampled
        }
        None => Vec::new(),
    };

    for (panel, &(ax, ay)) in views.iter().enumerate() {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for b in set.boxes() {
            for (k, a) in [ax, ay].into_iter().enumerate() {
                lo[k] = lo[k].min(b.lower()[a]);
                hi[k] = hi[k].max(b.upper()[a]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let scale = size / span;
        let ox = margin + panel as f64 * (size + margin);
        let map = |x: f64, y: f64| (ox + (x - lo[0]) * scale, margin + size - (y - lo[1]) * scale);

        writeln!(svg, r#"<g fill="rgb(200,220,255)" fill-opacity="0.35" stroke="rgb(60,90,160)" stroke-width="0.6">"#).unwrap();
        for b in set.boxes() {
            let (x0, y1) = map(b.lower()[ax], b.lower()[ay]);
            let (x1, y0) = map(b.upper()[ax], b.upper()[ay]);
            writeln!(
                svg,
                r#"<rect x="{x0:.3}" y="{y0:.3}" width="{:.3}" height="{:.3}"/>"#,
                x1 - x0,
                y1 - y0
            )
            .unwrap();
        }
        svg.push_str("</g>\n");

        for (samples, control) in &pieces {
            if options.control_polytopes {
                let hull = convex_hull(control.iter().map(|p| map(p[ax], p[ay])).collect());
                let points: Vec<String> = hull.iter().map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
                writeln!(
                    svg,
                    r#"<polygon points="{}" fill="rgb(230,80,80)" fill-opacity="0.25" stroke="none"/>"#,
                    points.join(" ")
                )
                .unwrap();
            }
            let points: Vec<String> = samples
                .iter()
                .map(|p| {
                    let (x, y) = map(p[ax], p[ay]);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="black" stroke-width="1.5"/>"#,
                points.join(" ")
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Andrew's monotone chain; returns the hull counter-clockwise.
fn convex_hull(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    if points.len() < 3 {
        return points;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * points.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(points.iter())
        } else {
            Box::new(points.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}
