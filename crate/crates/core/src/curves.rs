//! Planar boundary extraction: marching squares on the bbox lattice,
//! followed by Newton projection of every vertex onto `z = 0`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geom::{dist, lerp, project_on_segment};
use crate::scene::Scene;

/// A closed boundary curve as a projected polyline, counterclockwise.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    points: Vec<Vec<f64>>,
    /// Arc length from `points[0]` to `points[i]`.
    cum: Vec<f64>,
    length: f64,
}

impl BoundaryCurve {
    fn new(points: Vec<Vec<f64>>) -> Self {
        let mut cum = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for i in 0..points.len() {
            cum.push(acc);
            acc += dist(&points[i], &points[(i + 1) % points.len()]);
        }
        BoundaryCurve {
            points,
            cum,
            length: acc,
        }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Curve parameter (arc length) of vertex `i`.
    pub fn param_of_vertex(&self, i: usize) -> f64 {
        self.cum[i % self.points.len()]
    }

    pub fn wrap(&self, param: f64) -> f64 {
        param.rem_euclid(self.length)
    }

    /// Polyline point at `param` (not projected).
    pub fn point_at(&self, param: f64) -> Vec<f64> {
        let t = self.wrap(param);
        let i = match self.cum.binary_search_by(|c| c.total_cmp(&t)) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let j = (i + 1) % self.points.len();
        let seg = dist(&self.points[i], &self.points[j]);
        let s = if seg > 0.0 { (t - self.cum[i]) / seg } else { 0.0 };
        lerp(&self.points[i], &self.points[j], s.clamp(0.0, 1.0))
    }

    /// Parameter of the polyline point nearest to `p`, and its distance.
    pub fn locate(&self, p: &[f64]) -> (f64, f64) {
        let n = self.points.len();
        let mut best = (0.0, f64::INFINITY);
        for i in 0..n {
            let j = (i + 1) % n;
            let (s, d) = project_on_segment(p, &self.points[i], &self.points[j]);
            if d < best.1 {
                let seg = dist(&self.points[i], &self.points[j]);
                best = (self.wrap(self.cum[i] + s * seg), d);
            }
        }
        best
    }
}

/// Locates `p` on the nearest of `curves`: `(curve index, param, distance)`.
pub fn locate_on_curves(curves: &[BoundaryCurve], p: &[f64]) -> (usize, f64, f64) {
    curves
        .iter()
        .enumerate()
        .map(|(c, curve)| {
            let (t, d) = curve.locate(p);
            (c, t, d)
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap_or((0, 0.0, f64::INFINITY))
}

fn edge_id(n1: usize, i: usize, j: usize, vertical: bool) -> usize {
    2 * (i * n1 + j) + usize::from(vertical)
}

/// Extracts all closed components of `z = 0` with `cells` lattice cells per
/// axis. Every vertex is projected to `|z| <= tol.contact / 10`.
pub fn extract_curves(scene: &Scene, cells: usize) -> Result<Vec<BoundaryCurve>> {
    if scene.dimension() != 2 {
        return Err(Error::Unsupported("curve extraction needs dimension 2".into()));
    }
    let n1 = cells + 1;
    let bbox = scene.bbox();
    let lattice = bbox.lattice(n1);
    let zs = lattice
        .iter()
        .map(|p| scene.z_at(p))
        .collect::<Result<Vec<f64>>>()?;
    for (k, z) in zs.iter().enumerate() {
        if bbox.lattice_on_wall(n1, k) && *z <= 0.0 {
            return Err(Error::CurveExtraction(format!(
                "level set touches the bounding box near {:?}",
                lattice[k]
            )));
        }
    }
    let at = |i: usize, j: usize| i * n1 + j;
    let inside = |k: usize| zs[k] <= 0.0;

    // Crossing point on each lattice edge with a sign change.
    let mut edge_points: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut crossing = |a: usize, b: usize, id: usize| -> usize {
        edge_points.entry(id).or_insert_with(|| {
            let s = zs[a] / (zs[a] - zs[b]);
            lerp(&lattice[a], &lattice[b], s)
        });
        id
    };

    let mut segments: Vec<(usize, usize)> = Vec::new();
    for i in 0..cells {
        for j in 0..cells {
            let (a, b, c, d) = (at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1));
            let ins = [inside(a), inside(b), inside(c), inside(d)];
            // Edges in cyclic order: ab, bc, dc, ad.
            let edges = [
                (a, b, edge_id(n1, i, j, false)),
                (b, c, edge_id(n1, i + 1, j, true)),
                (d, c, edge_id(n1, i, j + 1, false)),
                (a, d, edge_id(n1, i, j, true)),
            ];
            let flips = [ins[0] != ins[1], ins[1] != ins[2], ins[3] != ins[2], ins[0] != ins[3]];
            let crossed: Vec<usize> = (0..4).filter(|&e| flips[e]).collect();
            let mut ids = [0usize; 4];
            for &e in &crossed {
                let (p, q, id) = edges[e];
                ids[e] = crossing(p, q, id);
            }
            match crossed.len() {
                0 => {}
                2 => segments.push((ids[crossed[0]], ids[crossed[1]])),
                4 => {
                    let center: Vec<f64> = lerp(&lattice[a], &lattice[c], 0.5);
                    let center_inside = scene.z_at(&center)? <= 0.0;
                    if center_inside == ins[0] {
                        // a and c connected through the center: cut off b and d.
                        segments.push((ids[0], ids[1]));
                        segments.push((ids[2], ids[3]));
                    } else {
                        segments.push((ids[3], ids[0]));
                        segments.push((ids[1], ids[2]));
                    }
                }
                _ => unreachable!("a square has an even number of sign changes"),
            }
        }
    }

    let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, &(p, q)) in segments.iter().enumerate() {
        incident.entry(p).or_default().push(s);
        incident.entry(q).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut curves = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let first = segments[start].0;
        let mut ids = vec![first];
        let mut current = segments[start].1;
        while current != first {
            ids.push(current);
            let next = incident[&current]
                .iter()
                .copied()
                .find(|&s| !used[s])
                .ok_or_else(|| Error::CurveExtraction("open level-set component".into()))?;
            used[next] = true;
            let (p, q) = segments[next];
            current = if p == current { q } else { p };
        }
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(ids.len());
        for id in ids {
            let raw = &edge_points[&id];
            let q = scene
                .project_to_boundary(raw, scene.tol().contact / 10.0)
                .ok_or_else(|| {
                    Error::CurveExtraction(format!("projection onto z = 0 failed near {raw:?}"))
                })?;
            if pts.last().is_none_or(|l| dist(l, &q) > 1e-12) {
                pts.push(q);
            }
        }
        while pts.len() > 1 && dist(&pts[0], pts.last().unwrap()) <= 1e-12 {
            pts.pop();
        }
        if pts.len() < 3 {
            continue;
        }
        let area: f64 = (0..pts.len())
            .map(|k| {
                let (p, q) = (&pts[k], &pts[(k + 1) % pts.len()]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum();
        if area < 0.0 {
            pts.reverse();
        }
        let lowest = (0..pts.len())
            .min_by(|&x, &y| pts[x][0].total_cmp(&pts[y][0]).then(pts[x][1].total_cmp(&pts[y][1])))
            .unwrap();
        pts.rotate_left(lowest);
        curves.push(BoundaryCurve::new(pts));
    }
    curves.sort_by(|a, b| {
        a.points[0][0]
            .total_cmp(&b.points[0][0])
            .then(a.points[0][1].total_cmp(&b.points[0][1]))
    });
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geom::BBox;
    use crate::scene::ToleranceSet;

    fn scene(z: &str, half: f64) -> Scene {
        Scene::new(
            2,
            parse(z, 2).unwrap(),
            vec![parse("0", 2).unwrap(), parse("1", 2).unwrap()],
            parse("x1", 2).unwrap(),
            BBox {
                min: vec![-half, -half],
                max: vec![half, half],
            },
            ToleranceSet::defaults(2),
        )
        .unwrap()
    }

    #[test]
    fn unit_circle_is_one_projected_loop() {
        let s = scene("x0^2 + x1^2 - 1", 1.5);
        let curves = extract_curves(&s, 64).unwrap();
        assert_eq!(curves.len(), 1);
        let c = &curves[0];
        for p in c.points() {
            assert!(s.z_at(p).unwrap().abs() <= 1e-7);
        }
        assert!((c.length() - 2.0 * std::f64::consts::PI).abs() < 1e-2);
        let (t, d) = c.locate(&[0.0, 1.0]);
        assert!(d < 1e-3);
        assert!(dist(&c.point_at(t), &[0.0, 1.0]) < 1e-3);
    }

    #[test]
    fn annulus_has_two_loops() {
        let s = scene("-(x0^2 + x1^2 - 1) * (4 - x0^2 - x1^2)", 2.5);
        let curves = extract_curves(&s, 64).unwrap();
        assert_eq!(curves.len(), 2);
        let (c, _, d) = locate_on_curves(&curves, &[0.0, 1.0]);
        assert!(d < 1e-3);
        let (c2, _, _) = locate_on_curves(&curves, &[0.0, 2.0]);
        assert_ne!(c, c2);
    }

    #[test]
    fn touching_the_box_is_reported() {
        let s = scene("x0^2 + x1^2 - 4", 1.5);
        assert!(matches!(extract_curves(&s, 32), Err(Error::CurveExtraction(_))));
    }
}
