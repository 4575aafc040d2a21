//! Output formats: canonical JSON and SVG pictures of planar scenes.

use std::fmt::Write;

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::Result;
use crate::scene::Scene;
use crate::tspace::QuotientComplex;

/// Significant digits kept for every float in canonical JSON.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Rounds `x` to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

fn canonicalize(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0));
            *value = Number::from_f64(if x == 0.0 { 0.0 } else { x })
                .map(Value::Number)
                .unwrap_or(Value::Null);
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Serializes into a value with rounded floats. Object keys come out sorted
/// because `serde_json::Map` is ordered.
pub fn canonical_value<T: Serialize>(value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    canonicalize(&mut v);
    Ok(v)
}

/// Pretty canonical JSON with a trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(&canonical_value(value)?)?;
    text.push('\n');
    Ok(text)
}

/// SVG of a planar complex: boundary curves, one trajectory per class and
/// the tangency contacts (red on the convex side, blue on the concave side).
pub fn complex_svg(scene: &Scene, complex: &QuotientComplex) -> String {
    const WIDTH: f64 = 640.0;
    let bbox = scene.bbox();
    let (w, h) = (bbox.max[0] - bbox.min[0], bbox.max[1] - bbox.min[1]);
    let scale = WIDTH / w;
    let height = h * scale;
    let map = |p: &[f64]| ((p[0] - bbox.min[0]) * scale, (bbox.max[1] - p[1]) * scale);
    let path = |points: &[Vec<f64>], closed: bool| {
        let mut s = String::new();
        for p in points {
            let (x, y) = map(p);
            let _ = write!(s, "{x:.2},{y:.2} ");
        }
        if closed {
            if let Some(p) = points.first() {
                let (x, y) = map(p);
                let _ = write!(s, "{x:.2},{y:.2}");
            }
        }
        s.trim_end().to_string()
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.2} {height:.2}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for class in &complex.classes {
        let _ = writeln!(
            svg,
            r##"<polyline fill="none" stroke="#9ab" stroke-width="0.6" points="{}"/>"##,
            path(&class.representative.polyline, false)
        );
    }
    for curve in complex.curves() {
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#,
            path(curve.points(), true)
        );
    }
    for class in complex.classes.iter().filter(|c| c.has_tangency()) {
        for c in class.contacts.iter().filter(|c| c.multiplicity >= 2) {
            let (x, y) = map(&c.coords);
            let color = if c.side > 0 { "#c22" } else { "#22c" };
            let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{color}"/>"#);
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounding_and_key_order() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        let text = canonical_json(&json!({"b": 1.0000000000001, "a": [2.5e-20, -0.0]})).unwrap();
        assert_eq!(text, "{\n  \"a\": [\n    2.5e-20,\n    0.0\n  ],\n  \"b\": 1.0\n}\n");
    }
}
