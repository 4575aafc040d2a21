//! Canonical local models: for a word ω, the domain `{℘ <= 0}` with
//!
//! ```text
//! ℘(u, x) = Π_i [ (u - i)^ω_i + Σ_{l=0}^{ω_i - 2} x_{i,l} (u - i)^l ],  i = 1..len(ω)
//! ```
//!
//! and the field `∂/∂u`. The trajectory through the coefficient origin has
//! type ω; nearby trajectories split its contacts.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{add, mul, pow, sub, Expression};
use crate::geom::BBox;
use crate::scene::{Scene, ToleranceSet};
use crate::tracer::{trace, Omega};

/// Largest number of free coefficients a model scene may carry.
pub const MAX_FREE: usize = 2;
/// Default coefficient perturbation.
pub const EPSILON: f64 = 1e-2;
/// Half-width of the coefficient box around the base coefficients.
const COEFFICIENT_BOX: f64 = 0.5;

#[derive(Debug, Clone, Serialize)]
pub struct LocalModel {
    pub omega: Omega,
    /// `x_{i,l}` values keyed by `(i, l)`, `i` counted from 1.
    pub coefficients: BTreeMap<(usize, usize), f64>,
    pub u_window: [f64; 2],
    /// Coefficients beyond the first [`MAX_FREE`] are frozen at their values.
    pub truncated: bool,
}

/// All coefficient slots `(i, l)` of ω in the fixed variable order.
pub fn coefficient_slots(omega: &Omega) -> Vec<(usize, usize)> {
    omega
        .0
        .iter()
        .enumerate()
        .flat_map(|(k, &w)| (0..w.saturating_sub(1)).map(move |l| (k + 1, l)))
        .collect()
}

impl LocalModel {
    /// Model with all coefficients zero. Rejects words that break the parity
    /// law, and words needing more than [`MAX_FREE`] coefficients.
    pub fn new(omega: Omega) -> Result<Self> {
        if !omega.check_parity() || !omega.norm().is_multiple_of(2) {
            return Err(Error::LocalModel(format!(
                "{omega} is not an admissible combinatorial type"
            )));
        }
        if omega.reduced_norm() > MAX_FREE {
            return Err(Error::LocalModel(format!(
                "{omega} needs {} coefficients; at most {MAX_FREE} fit the dimension cap",
                omega.reduced_norm()
            )));
        }
        Ok(Self::build(omega, false))
    }

    /// As [`LocalModel::new`], freezing the coefficients past the cap at zero.
    pub fn truncated(omega: Omega) -> Result<Self> {
        if !omega.check_parity() || !omega.norm().is_multiple_of(2) {
            return Err(Error::LocalModel(format!(
                "{omega} is not an admissible combinatorial type"
            )));
        }
        let truncated = omega.reduced_norm() > MAX_FREE;
        Ok(Self::build(omega, truncated))
    }

    fn build(omega: Omega, truncated: bool) -> Self {
        let coefficients = coefficient_slots(&omega).into_iter().map(|s| (s, 0.0)).collect();
        let len = omega.0.len() as f64;
        LocalModel {
            omega,
            coefficients,
            u_window: [0.0, len + 1.0],
            truncated,
        }
    }

    pub fn with_coefficient(mut self, slot: (usize, usize), value: f64) -> Result<Self> {
        match self.coefficients.get_mut(&slot) {
            Some(c) => {
                *c = value;
                Ok(self)
            }
            None => Err(Error::LocalModel(format!("{} has no coefficient {slot:?}", self.omega))),
        }
    }

    /// Slots that are coordinates of the model scene, in variable order.
    pub fn free_slots(&self) -> Vec<(usize, usize)> {
        coefficient_slots(&self.omega).into_iter().take(MAX_FREE).collect()
    }

    /// Scene dimension: `u`, the free coefficients, and one inert direction
    /// when there is no free coefficient.
    pub fn dimension(&self) -> usize {
        (1 + self.free_slots().len()).max(2)
    }

    /// Base point: `u` at the first root, free coefficients at their values.
    pub fn base_point(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dimension()];
        p[0] = 1.0;
        for (k, slot) in self.free_slots().iter().enumerate() {
            p[k + 1] = self.coefficients[slot];
        }
        p
    }
}

/// `℘` as an expression in `u = x0` and the free coefficients `x1, x2`.
/// Frozen coefficients enter as constants.
pub fn build_polynomial(m: &LocalModel) -> Result<Expression> {
    let dim = m.dimension();
    let free = m.free_slots();
    let u = Expression::var(0);
    let mut product = Expression::constant(1.0);
    for (k, &w) in m.omega.0.iter().enumerate() {
        let i = k + 1;
        let shifted = sub(u.clone(), Expression::constant(i as f64));
        let mut factor = pow(shifted.clone(), w as u32);
        for l in 0..w.saturating_sub(1) {
            let coefficient = match free.iter().position(|s| *s == (i, l)) {
                Some(v) if v + 1 < dim => Expression::var(v + 1),
                _ => Expression::constant(m.coefficients[&(i, l)]),
            };
            factor = add(factor, mul(coefficient, pow(shifted.clone(), l as u32)));
        }
        product = mul(product, factor);
    }
    Ok(product)
}

/// The model as a scene: `z = ℘`, `v = ∂/∂u`, `f = u`. The box spans the
/// `u` window and a band around the base coefficients.
pub fn model_scene(m: &LocalModel) -> Result<Scene> {
    let dim = m.dimension();
    let z = build_polynomial(m)?;
    let mut v = vec![Expression::constant(1.0)];
    v.extend((1..dim).map(|_| Expression::constant(0.0)));
    let base = m.base_point();
    let mut min = vec![m.u_window[0]];
    let mut max = vec![m.u_window[1]];
    for c in &base[1..] {
        min.push(c - COEFFICIENT_BOX);
        max.push(c + COEFFICIENT_BOX);
    }
    Ok(Scene::new(
        dim,
        z,
        v,
        Expression::var(0),
        BBox { min, max },
        ToleranceSet::defaults(dim),
    )?
    .with_name(format!("local model {}", m.omega)))
}

/// Types of every trajectory on the `u`-line through `point` (other
/// coordinates fixed), left to right. Empty when the line misses `X`.
pub fn line_types(scene: &Scene, m: &LocalModel, point: &[f64]) -> Result<Vec<Omega>> {
    const SAMPLES: usize = 4000;
    let [a, b] = m.u_window;
    let at = |u: f64| {
        let mut p = point.to_vec();
        p[0] = u;
        p
    };
    let zs = (0..=SAMPLES)
        .map(|k| scene.z_at(&at(a + (b - a) * k as f64 / SAMPLES as f64)))
        .collect::<Result<Vec<f64>>>()?;
    // One seed per run of samples inside the contact band: its deepest point.
    let band = scene.tol().contact;
    let mut seeds = Vec::new();
    let mut k = 0;
    while k <= SAMPLES {
        if zs[k] > band {
            k += 1;
            continue;
        }
        let start = k;
        while k <= SAMPLES && zs[k] <= band {
            k += 1;
        }
        let deepest = (start..k).min_by(|&x, &y| zs[x].total_cmp(&zs[y])).unwrap();
        seeds.push(deepest);
    }
    let mut out = Vec::new();
    let mut last_end = f64::NEG_INFINITY;
    for s in seeds {
        let u = a + (b - a) * s as f64 / SAMPLES as f64;
        if u <= last_end {
            continue;
        }
        let rec = trace(scene, &at(u))?;
        last_end = rec.divisor.contacts.last().map(|c| c.coords[0]).unwrap_or(u);
        out.push(rec.omega);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct Perturbation {
    pub slot: (usize, usize),
    pub delta: f64,
    pub omegas: Vec<Omega>,
    pub parity_ok: bool,
    /// `Σ|ω'| <= |ω|` and `Σ|ω'|' <= |ω|'` over the split trajectories.
    pub norms_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundtripReport {
    pub omega: Omega,
    pub recovered: Omega,
    pub dimension: usize,
    pub truncated: bool,
    pub margin: f64,
    pub non_generic: bool,
    pub perturbations: Vec<Perturbation>,
    pub passed: bool,
}

/// Builds the model of `w`, checks that the trajectory through the base
/// point has type `w`, then perturbs each free coefficient by `±eps` and
/// checks parity and norm monotonicity of what the contacts split into.
pub fn roundtrip(w: &Omega, truncate: bool, eps: f64) -> Result<RoundtripReport> {
    let model = if truncate {
        LocalModel::truncated(w.clone())?
    } else {
        LocalModel::new(w.clone())?
    };
    let scene = model_scene(&model)?;
    let base = model.base_point();
    let rec = trace(&scene, &base)?;
    let mut jobs = Vec::new();
    for (k, slot) in model.free_slots().into_iter().enumerate() {
        for delta in [-eps, eps] {
            let mut p = base.clone();
            p[k + 1] += delta;
            jobs.push((slot, delta, p));
        }
    }
    let perturbations = jobs
        .par_iter()
        .map(|(slot, delta, p)| {
            let omegas = line_types(&scene, &model, p)?;
            let parity_ok = omegas.iter().all(|o| o.check_parity() && o.norm() % 2 == 0);
            let total: usize = omegas.iter().map(|o| o.norm()).sum();
            let reduced: usize = omegas.iter().map(|o| o.reduced_norm()).sum();
            Ok(Perturbation {
                slot: *slot,
                delta: *delta,
                parity_ok,
                norms_ok: total <= w.norm() && reduced <= w.reduced_norm(),
                omegas,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = rec.omega == *w && perturbations.iter().all(|p| p.parity_ok && p.norms_ok);
    Ok(RoundtripReport {
        omega: w.clone(),
        recovered: rec.omega,
        dimension: model.dimension(),
        truncated: model.truncated,
        margin: rec.margin,
        non_generic: rec.non_generic,
        perturbations,
        passed,
    })
}

/// Parses `"1,2,1"`.
pub fn parse_omega(text: &str) -> Result<Omega> {
    let word = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::LocalModel(format!("bad word {text:?}: {e}")))?;
    if word.is_empty() || word.contains(&0) {
        return Err(Error::LocalModel(format!("bad word {text:?}")));
    }
    Ok(Omega(word))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[usize]) -> Omega {
        Omega(v.to_vec())
    }

    #[test]
    fn polynomial_examples() {
        let m = LocalModel::new(w(&[1, 2, 1])).unwrap();
        let p = build_polynomial(&m).unwrap();
        for u in [0.3, 1.7, 2.5] {
            let want = (u - 1.0) * (u - 2.0f64).powi(2) * (u - 3.0);
            assert!((p.eval(&[u, 0.0]).unwrap() - want).abs() < 1e-12);
        }
        assert_eq!(p.degree_in(0), Some(4));

        let m = LocalModel::new(w(&[2])).unwrap();
        let p = build_polynomial(&m).unwrap();
        let c = 0.37;
        assert!((p.eval(&[1.6, c]).unwrap() - (0.36 + c)).abs() < 1e-12);

        let m = LocalModel::new(w(&[1, 1])).unwrap();
        let p = build_polynomial(&m).unwrap();
        assert_eq!(m.dimension(), 2);
        assert!((p.eval(&[2.5, 9.0]).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn scene_dimensions() {
        assert_eq!(model_scene(&LocalModel::new(w(&[1, 2, 1])).unwrap()).unwrap().dimension(), 2);
        assert_eq!(model_scene(&LocalModel::new(w(&[2])).unwrap()).unwrap().dimension(), 2);
        assert_eq!(model_scene(&LocalModel::new(w(&[3, 1])).unwrap()).unwrap().dimension(), 3);
        assert!(matches!(LocalModel::new(w(&[1, 4, 1])), Err(Error::LocalModel(_))));
        let t = LocalModel::truncated(w(&[1, 4, 1])).unwrap();
        assert!(t.truncated);
        assert_eq!(t.free_slots(), vec![(2, 0), (2, 1)]);
    }

    #[test]
    fn inadmissible_words() {
        for bad in [&[1, 2][..], &[3], &[1, 1, 1], &[2, 1]] {
            assert!(LocalModel::new(w(bad)).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn split_and_empty_quadratics() {
        let m = LocalModel::new(w(&[2])).unwrap();
        let s = model_scene(&m).unwrap();
        assert_eq!(line_types(&s, &m, &[1.0, -0.1]).unwrap(), vec![w(&[1, 1])]);
        assert!(line_types(&s, &m, &[1.0, 0.1]).unwrap().is_empty());
        let m = LocalModel::new(w(&[1, 2, 1])).unwrap();
        let s = model_scene(&m).unwrap();
        assert_eq!(
            line_types(&s, &m, &[1.0, -0.01]).unwrap(),
            vec![w(&[1, 1]), w(&[1, 1])]
        );
    }

    #[test]
    fn roundtrips() {
        for (word, truncate) in [
            (&[1, 1][..], false),
            (&[2], false),
            (&[1, 2, 1], false),
            (&[3, 1], false),
            (&[1, 4, 1], true),
        ] {
            let r = roundtrip(&w(word), truncate, EPSILON).unwrap();
            assert_eq!(r.recovered, w(word));
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn parse_words() {
        assert_eq!(parse_omega("1, 2,1").unwrap(), w(&[1, 2, 1]));
        assert!(parse_omega("1,,2").is_err());
        assert!(parse_omega("0").is_err());
    }
}
