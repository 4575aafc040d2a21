//! Multiplicity of boundary contacts and the tangency strata `d_j^{+/-} X`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{extract_curves, BoundaryCurve};
use crate::error::{Error, Result};
use crate::geom::{dist, lerp, norm};
use crate::scene::Scene;

/// A classified boundary point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub coords: Vec<f64>,
    pub multiplicity: usize,
    /// Sign of the first non-vanishing Lie derivative `L_v^(j) z`.
    pub side: i8,
    pub fval: f64,
    /// `|L_v^(j) z|` at the point: how far the decisive derivative is from
    /// the zero threshold.
    pub margin: f64,
}

impl BoundaryPoint {
    /// Membership in `d_1^+ X = {z = 0, L_v z >= 0}`.
    pub fn on_plus(&self) -> bool {
        self.multiplicity >= 2 || self.side > 0
    }

    /// Membership in `d_k^+ X`: multiplicity above `k`, or exactly `k` on the
    /// `+` side.
    pub fn in_plus_stratum(&self, k: usize) -> bool {
        self.multiplicity > k || (self.multiplicity == k && self.side > 0)
    }

    /// Multiplicities above the ambient dimension are not traversally generic.
    pub fn is_generic(&self, dimension: usize) -> bool {
        self.multiplicity <= dimension
    }

    pub fn stratum_label(&self) -> String {
        format!("{}{}", self.multiplicity, if self.side > 0 { '+' } else { '-' })
    }
}

/// Deepest accepted multiplicity: the dimension itself in the plane, and
/// `dimension + 1` (flagged non-generic) in space.
pub fn max_multiplicity(dimension: usize) -> usize {
    if dimension >= 3 {
        dimension + 1
    } else {
        dimension
    }
}

/// Smallest `j >= 1` with `|L_v^(j) z(p)| > tol.deriv_zero`, its sign and
/// magnitude.
pub fn multiplicity_at(scene: &Scene, p: &[f64]) -> Result<(usize, i8, f64)> {
    let z = scene.z_at(p)?;
    if z.abs() > scene.tol().contact {
        return Err(Error::NotOnBoundary {
            coords: p.to_vec(),
            z,
        });
    }
    let tower = scene.tower();
    let deepest = max_multiplicity(scene.dimension());
    for (j, lz) in tower.iter().enumerate().take(deepest + 1).skip(1) {
        let value = lz.eval(p)?;
        if value.abs() > scene.tol().deriv_zero {
            return Ok((j, if value > 0.0 { 1 } else { -1 }, value.abs()));
        }
    }
    Err(Error::DegenerateContact {
        coords: p.to_vec(),
        order: deepest,
    })
}

pub fn classify(scene: &Scene, p: &[f64]) -> Result<BoundaryPoint> {
    let (multiplicity, side, margin) = multiplicity_at(scene, p)?;
    Ok(BoundaryPoint {
        coords: p.to_vec(),
        multiplicity,
        side,
        fval: scene.f_at(p)?,
        margin,
    })
}

/// A tangency point located on an extracted boundary curve.
#[derive(Debug, Clone)]
pub struct CurveTangency {
    pub curve: usize,
    pub param: f64,
    pub point: BoundaryPoint,
}

/// Residual to which each tangency root is refined.
const TANGENCY_RESIDUAL: f64 = 1e-10;

/// Zeros of `L_v z` along each curve, refined by bisection between sign
/// changes (each trial point is re-projected onto `z = 0`), then
/// classified. Ordered by curve, then by curve parameter.
pub fn tangencies_on_curves(scene: &Scene, curves: &[BoundaryCurve]) -> Result<Vec<CurveTangency>> {
    let lz = &scene.tower()[1];
    let target = 1e-13;
    let mut out = Vec::new();
    for (ci, curve) in curves.iter().enumerate() {
        let pts = curve.points();
        let vals = pts
            .iter()
            .map(|p| Ok(lz.eval(p)?))
            .collect::<Result<Vec<f64>>>()?;
        let n = pts.len();
        let mut found: Vec<CurveTangency> = Vec::new();
        for i in 0..n {
            let j = (i + 1) % n;
            if (vals[i] > 0.0) == (vals[j] > 0.0) {
                continue;
            }
            let eval_at = |s: f64| -> Result<(Vec<f64>, f64)> {
                let raw = lerp(&pts[i], &pts[j], s);
                let q = scene.project_to_boundary(&raw, target).ok_or_else(|| {
                    Error::CurveExtraction(format!("projection failed near {raw:?}"))
                })?;
                let v = lz.eval(&q)?;
                Ok((q, v))
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            let lo_positive = vals[i] > 0.0;
            let (mut best, mut best_val) = eval_at(0.5)?;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let (q, v) = eval_at(mid)?;
                if v.abs() < best_val.abs() {
                    best = q;
                    best_val = v;
                }
                if v.abs() < TANGENCY_RESIDUAL || hi - lo < 1e-16 {
                    break;
                }
                if (v > 0.0) == lo_positive {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let param = curve.wrap(curve.param_of_vertex(i) + 0.5 * (lo + hi) * dist(&pts[i], &pts[j]));
            if found.iter().any(|t| dist(&t.point.coords, &best) <= scene.tol().cluster) {
                continue;
            }
            found.push(CurveTangency {
                curve: ci,
                param,
                point: classify(scene, &best)?,
            });
        }
        found.sort_by(|a, b| a.param.total_cmp(&b.param));
        out.extend(found);
    }
    Ok(out)
}

/// All isolated points of `d_2 X` in a planar scene.
pub fn tangency_locus_2d(scene: &Scene) -> Result<Vec<BoundaryPoint>> {
    if scene.dimension() != 2 {
        return Err(Error::Unsupported("tangency_locus_2d needs dimension 2".into()));
    }
    let curves = extract_curves(scene, scene.tol().grid)?;
    Ok(tangencies_on_curves(scene, &curves)?
        .into_iter()
        .map(|t| t.point)
        .collect())
}

fn gradient_of(e: &crate::Expression, dimension: usize) -> Vec<crate::Expression> {
    (0..dimension).map(|i| e.differentiate(i)).collect()
}

/// Gauss-Newton toward `{z = 0, L_v z = 0}` with the minimum-norm step.
fn refine_to_fold(scene: &Scene, p: &[f64], grad_lz: &[crate::Expression]) -> Option<Vec<f64>> {
    let lz = &scene.tower()[1];
    let mut q = p.to_vec();
    for _ in 0..40 {
        let f0 = scene.z_at(&q).ok()?;
        let f1 = lz.eval(&q).ok()?;
        if f0.abs() < 1e-13 && f1.abs() < 1e-12 {
            break;
        }
        let g0 = scene.grad_z_at(&q).ok()?;
        let g1: Vec<f64> = grad_lz.iter().map(|g| g.eval(&q)).collect::<std::result::Result<_, _>>().ok()?;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let (a, b, d) = (dot(&g0, &g0), dot(&g0, &g1), dot(&g1, &g1));
        let det = a * d - b * b;
        if det.abs() < 1e-300 {
            return None;
        }
        // (J J^T)^{-1} F
        let y0 = (d * f0 - b * f1) / det;
        let y1 = (-b * f0 + a * f1) / det;
        for k in 0..q.len() {
            q[k] -= g0[k] * y0 + g1[k] * y1;
        }
        if !scene.bbox().contains(&q) {
            return None;
        }
    }
    let ok = scene.z_at(&q).ok()?.abs() <= scene.tol().contact / 10.0
        && lz.eval(&q).ok()?.abs() <= TANGENCY_RESIDUAL * 100.0;
    ok.then_some(q)
}

/// Random points on the boundary shell of a spatial scene: bbox samples
/// projected onto `z = 0`. Deterministic for a given `seed`.
pub fn sample_boundary_3d(scene: &Scene, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bbox = scene.bbox();
    let target = scene.tol().contact / 10.0;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 100 * count.max(1) {
        attempts += 1;
        let raw: Vec<f64> = bbox
            .min
            .iter()
            .zip(&bbox.max)
            .map(|(lo, hi)| rng.gen_range(*lo..*hi))
            .collect();
        if let Some(q) = scene.project_to_boundary(&raw, target) {
            if bbox.contains(&q) {
                out.push(q);
            }
        }
    }
    out
}

/// Classifies `count` random boundary samples and adds, for every sample
/// nearly tangent to `v`, a representative refined onto `d_2 X`.
pub fn stratum_sample_3d(scene: &Scene, count: usize, seed: u64) -> Result<Vec<BoundaryPoint>> {
    if scene.dimension() != 3 {
        return Err(Error::Unsupported("stratum_sample_3d needs dimension 3".into()));
    }
    let grad_lz = gradient_of(&scene.tower()[1], 3);
    let samples = sample_boundary_3d(scene, count, seed);
    let lz = &scene.tower()[1];
    let results: Vec<Result<Vec<BoundaryPoint>>> = samples
        .par_iter()
        .map(|p| {
            let mut out = vec![classify(scene, p)?];
            let g = scene.grad_z_at(p)?;
            let mut v = vec![0.0; 3];
            scene.field_at(p, &mut v)?;
            let near_tangent = lz.eval(p)?.abs() < 0.05 * norm(&g) * norm(&v);
            if near_tangent {
                if let Some(q) = refine_to_fold(scene, p, &grad_lz) {
                    out.push(classify(scene, &q)?);
                }
            }
            Ok(out)
        })
        .collect();
    let mut points = Vec::new();
    for r in results {
        points.extend(r?);
    }
    points.sort_by(|a, b| {
        a.coords
            .iter()
            .zip(&b.coords)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(points)
}

/// Number of points per stratum label (`"1-"`, `"2+"`, ...).
pub fn stratum_counts(points: &[BoundaryPoint]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for p in points {
        *counts.entry(p.stratum_label()).or_insert(0) += 1;
    }
    counts
}
