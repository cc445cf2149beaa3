//! Minimal SVG polyline output.

use std::fmt::Write;

const SIZE: f64 = 800.0;
const MARGIN: f64 = 0.05;

/// A square SVG with one polyline through `points`, scaled to fit with a 5%
/// margin on each side. The y axis points up.
pub fn polyline(points: &[[f64; 2]]) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span = (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let scale = SIZE * (1.0 - 2.0 * MARGIN) / span;
    let cx = 0.5 * (x0 + x1);
    let cy = 0.5 * (y0 + y1);
    let mut coords = String::with_capacity(points.len() * 16);
    for p in points {
        let u = 0.5 * SIZE + (p[0] - cx) * scale;
        let v = 0.5 * SIZE - (p[1] - cy) * scale;
        let _ = write!(coords, "{u:.3},{v:.3} ");
    }
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.5\" points=\"{}\"/>\n</svg>\n",
        coords.trim_end()
    )
}
