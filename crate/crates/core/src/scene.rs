//! Flow problems: domain `{z <= 0}`, field `v`, Lyapunov candidate `f`.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, parse, Expression};
use crate::geom::{norm, BBox};

/// Numerical thresholds used throughout the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    /// Lower bound for `|grad z|` on the boundary.
    pub regularity: f64,
    /// `|z|` below which a point counts as a boundary contact.
    pub contact: f64,
    /// `|L_v^(k) z|` below which an evaluated Lie derivative counts as zero.
    pub deriv_zero: f64,
    pub ode_rel: f64,
    pub ode_abs: f64,
    /// Matching radius for contact points of one trajectory.
    pub cluster: f64,
    /// Samples per axis for validation grids and level-set marching.
    pub grid: usize,
}

impl ToleranceSet {
    pub fn defaults(dimension: usize) -> Self {
        ToleranceSet {
            regularity: 1e-3,
            contact: 1e-6,
            deriv_zero: 1e-6,
            ode_rel: 1e-10,
            ode_abs: 1e-12,
            cluster: 1e-5,
            grid: if dimension >= 3 { 32 } else { 64 },
        }
    }

    pub fn check(&self, bbox_diameter: f64) -> Result<()> {
        let reals = [
            ("regularity", self.regularity),
            ("contact", self.contact),
            ("deriv_zero", self.deriv_zero),
            ("ode_rel", self.ode_rel),
            ("ode_abs", self.ode_abs),
            ("cluster", self.cluster),
        ];
        for (name, value) in reals {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidScene(format!(
                    "tolerance {name} must be positive, got {value}"
                )));
            }
        }
        if self.grid < 4 {
            return Err(Error::InvalidScene("tolerance grid must be >= 4".into()));
        }
        if self.deriv_zero >= 1.0 {
            return Err(Error::InvalidScene("tolerance deriv_zero must be < 1".into()));
        }
        if self.contact >= bbox_diameter {
            return Err(Error::InvalidScene(
                "tolerance contact must be smaller than the bbox diameter".into(),
            ));
        }
        Ok(())
    }
}

/// Optional tolerance fields as they appear in a scene file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deriv_zero: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ode_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ode_abs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

impl ToleranceOverrides {
    pub fn apply(&self, base: &ToleranceSet) -> ToleranceSet {
        ToleranceSet {
            regularity: self.regularity.unwrap_or(base.regularity),
            contact: self.contact.unwrap_or(base.contact),
            deriv_zero: self.deriv_zero.unwrap_or(base.deriv_zero),
            ode_rel: self.ode_rel.unwrap_or(base.ode_rel),
            ode_abs: self.ode_abs.unwrap_or(base.ode_abs),
            cluster: self.cluster.unwrap_or(base.cluster),
            grid: self.grid.unwrap_or(base.grid),
        }
    }
}

/// On-disk scene document. Expressions are DSL strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dimension: usize,
    pub z: String,
    pub v: Vec<String>,
    pub f: String,
    pub bbox: BBox,
    #[serde(default)]
    pub tol: ToleranceOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_betti: Option<Vec<usize>>,
}

/// A validated-shape flow problem. Immutable once built; derived
/// expressions (Lie tower, gradient) are computed lazily and cached.
#[derive(Debug, Clone)]
pub struct Scene {
    name: Option<String>,
    dimension: usize,
    z: Expression,
    v: Vec<Expression>,
    f: Expression,
    bbox: BBox,
    tol: ToleranceSet,
    reference_betti: Option<Vec<usize>>,
    tower: OnceLock<Vec<Expression>>,
    grad_z: OnceLock<Vec<Expression>>,
    lie_f: OnceLock<Expression>,
}

impl Scene {
    pub fn new(
        dimension: usize,
        z: Expression,
        v: Vec<Expression>,
        f: Expression,
        bbox: BBox,
        tol: ToleranceSet,
    ) -> Result<Self> {
        if !(2..=3).contains(&dimension) {
            return Err(Error::InvalidScene(format!(
                "dimension must be 2 or 3, got {dimension}"
            )));
        }
        if v.len() != dimension {
            return Err(Error::InvalidScene(format!(
                "field has {} components, expected {dimension}",
                v.len()
            )));
        }
        if bbox.min.len() != dimension || bbox.max.len() != dimension {
            return Err(Error::InvalidScene("bbox dimension mismatch".into()));
        }
        if bbox.min.iter().zip(&bbox.max).any(|(lo, hi)| lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::InvalidScene("bbox min must be below max".into()));
        }
        for e in std::iter::once(&z).chain(&v).chain(std::iter::once(&f)) {
            if let Some(i) = e.max_var() {
                if i >= dimension {
                    return Err(Error::InvalidScene(format!(
                        "expression {e} uses x{i} in dimension {dimension}"
                    )));
                }
            }
        }
        tol.check(bbox.diameter())?;
        Ok(Scene {
            name: None,
            dimension,
            z,
            v,
            f,
            bbox,
            tol,
            reference_betti: None,
            tower: OnceLock::new(),
            grad_z: OnceLock::new(),
            lie_f: OnceLock::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn with_reference_betti(mut self, betti: Vec<usize>) -> Self {
        self.reference_betti = Some(betti);
        self
    }

    /// Returns a copy with replaced tolerances (derived caches are kept).
    pub fn with_tolerances(&self, tol: ToleranceSet) -> Result<Self> {
        tol.check(self.bbox.diameter())?;
        let mut s = self.clone();
        s.tol = tol;
        Ok(s)
    }

    pub fn from_file_struct(file: &SceneFile) -> Result<Self> {
        let d = file.dimension;
        let z = parse(&file.z, d)?;
        let v = file
            .v
            .iter()
            .map(|s| parse(s, d))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let f = parse(&file.f, d)?;
        let tol = file.tol.apply(&ToleranceSet::defaults(d));
        let mut scene = Scene::new(d, z, v, f, file.bbox.clone(), tol)?;
        scene.name = file.name.clone();
        scene.reference_betti = file.reference_betti.clone();
        Ok(scene)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: SceneFile = serde_json::from_str(text)?;
        Self::from_file_struct(&file)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_file_struct(&self) -> SceneFile {
        let t = &self.tol;
        SceneFile {
            name: self.name.clone(),
            dimension: self.dimension,
            z: self.z.to_string(),
            v: self.v.iter().map(ToString::to_string).collect(),
            f: self.f.to_string(),
            bbox: self.bbox.clone(),
            tol: ToleranceOverrides {
                regularity: Some(t.regularity),
                contact: Some(t.contact),
                deriv_zero: Some(t.deriv_zero),
                ode_rel: Some(t.ode_rel),
                ode_abs: Some(t.ode_abs),
                cluster: Some(t.cluster),
                grid: Some(t.grid),
            },
            reference_betti: self.reference_betti.clone(),
        }
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }
    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn z(&self) -> &Expression {
        &self.z
    }
    pub fn v(&self) -> &[Expression] {
        &self.v
    }
    pub fn f(&self) -> &Expression {
        &self.f
    }
    pub fn bbox(&self) -> &BBox {
        &self.bbox
    }
    pub fn tol(&self) -> &ToleranceSet {
        &self.tol
    }
    pub fn reference_betti(&self) -> Option<&[usize]> {
        self.reference_betti.as_deref()
    }

    /// `L_v g = sum_i v_i * dg/dx_i`, simplified.
    pub fn lie_derivative(&self, g: &Expression) -> Expression {
        self.v
            .iter()
            .enumerate()
            .fold(Expression::constant(0.0), |acc, (i, vi)| {
                expr::add(acc, expr::mul(vi.clone(), g.differentiate(i)))
            })
            .simplify()
    }

    /// `[z, L_v z, ..., L_v^(order) z]`.
    pub fn lie_tower(&self, order: usize) -> Vec<Expression> {
        let cached = self.tower();
        if order < cached.len() {
            return cached[..=order].to_vec();
        }
        let mut out = cached.to_vec();
        while out.len() <= order {
            let next = self.lie_derivative(out.last().unwrap());
            out.push(next);
        }
        out
    }

    /// Cached tower through order `dimension + 1`, the deepest order any
    /// classification needs.
    pub fn tower(&self) -> &[Expression] {
        self.tower.get_or_init(|| {
            let mut out = vec![self.z.clone()];
            for _ in 0..=self.dimension {
                let next = self.lie_derivative(out.last().unwrap());
                out.push(next);
            }
            out
        })
    }

    pub fn grad_z(&self) -> &[Expression] {
        self.grad_z
            .get_or_init(|| (0..self.dimension).map(|i| self.z.differentiate(i)).collect())
    }

    /// `L_v f`, the Lyapunov rate.
    pub fn lyapunov_rate(&self) -> &Expression {
        self.lie_f.get_or_init(|| self.lie_derivative(&self.f))
    }

    pub fn z_at(&self, p: &[f64]) -> Result<f64> {
        Ok(self.z.eval(p)?)
    }

    pub fn f_at(&self, p: &[f64]) -> Result<f64> {
        Ok(self.f.eval(p)?)
    }

    pub fn field_at(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        for (o, vi) in out.iter_mut().zip(&self.v) {
            *o = vi.eval(p)?;
        }
        Ok(())
    }

    pub fn grad_z_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.grad_z().iter().map(|g| Ok(g.eval(p)?)).collect()
    }

    /// Newton projection along `grad z` onto the level set `z = 0`.
    /// Returns `None` if the iteration stalls on a vanishing gradient or does
    /// not reach `|z| <= target`.
    pub fn project_to_boundary(&self, p: &[f64], target: f64) -> Option<Vec<f64>> {
        let mut q = p.to_vec();
        for _ in 0..60 {
            let z = self.z_at(&q).ok()?;
            if z.abs() <= target {
                return Some(q);
            }
            let g = self.grad_z_at(&q).ok()?;
            let g2: f64 = g.iter().map(|x| x * x).sum();
            if g2 == 0.0 || !g2.is_finite() {
                return None;
            }
            for (qi, gi) in q.iter_mut().zip(&g) {
                *qi -= z * gi / g2;
            }
        }
        let z = self.z_at(&q).ok()?;
        (z.abs() <= target).then_some(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationCheck {
    EmptyDomain,
    BboxContainment,
    Regularity,
    Lyapunov,
    VanishingField,
    Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub check: ValidationCheck,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub grid: usize,
    pub interior_samples: usize,
    pub shell_samples: usize,
    pub lyapunov_min: Option<f64>,
    pub regularity_min: Option<f64>,
    pub field_min_norm: Option<f64>,
    pub bbox_contained: bool,
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn failed(&self, check: ValidationCheck) -> bool {
        self.failures.iter().any(|f| f.check == check)
    }
}

/// Samples the standing hypotheses on the lattice of `tol.grid` points per
/// axis: Lyapunov positivity on `X`, regularity of `z` on the boundary
/// shell, containment of `X` away from the bbox walls, and a nonvanishing
/// field on the whole box.
pub fn validate(scene: &Scene) -> ValidationReport {
    let n = scene.tol.grid;
    let lattice = scene.bbox.lattice(n);
    let mut failures = Vec::new();
    let mut fail = |check, message: String| failures.push(ValidationFailure { check, message });

    let mut zs = Vec::with_capacity(lattice.len());
    for p in &lattice {
        match scene.z_at(p) {
            Ok(z) => zs.push(z),
            Err(e) => {
                fail(ValidationCheck::Evaluation, format!("z at {p:?}: {e}"));
                zs.push(f64::NAN);
            }
        }
    }

    let bbox_contained = lattice
        .iter()
        .enumerate()
        .filter(|(k, _)| scene.bbox.lattice_on_wall(n, *k))
        .all(|(k, _)| zs[k] > 0.0);
    if !bbox_contained {
        fail(
            ValidationCheck::BboxContainment,
            "domain reaches the bounding-box walls".into(),
        );
    }

    // Shell candidates: lattice edges with a sign change of z, plus the
    // lattice point of smallest |z|, each projected onto z = 0.
    let d = scene.dimension;
    let strides: Vec<usize> = (0..d).map(|axis| n.pow((d - 1 - axis) as u32)).collect();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for (k, p) in lattice.iter().enumerate() {
        for &stride in &strides {
            let i = (k / stride) % n;
            if i + 1 >= n {
                continue;
            }
            let (za, zb) = (zs[k], zs[k + stride]);
            if za.is_nan() || zb.is_nan() || (za <= 0.0) == (zb <= 0.0) {
                continue;
            }
            let s = za / (za - zb);
            starts.push(crate::geom::lerp(p, &lattice[k + stride], s));
        }
    }
    if let Some((k, _)) = zs
        .iter()
        .enumerate()
        .filter(|(_, z)| !z.is_nan())
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
    {
        starts.push(lattice[k].clone());
    }

    // A tight projection target keeps isolated critical points of z from
    // passing the regularity check on a half-converged Newton iterate.
    let target = scene.tol.contact * 1e-3;
    let mut shell = Vec::new();
    let mut regularity_min: Option<f64> = None;
    for s in &starts {
        if let Some(q) = scene.project_to_boundary(s, target) {
            if let Ok(g) = scene.grad_z_at(&q) {
                let gn = norm(&g);
                regularity_min = Some(regularity_min.map_or(gn, |m| m.min(gn)));
                shell.push(q);
            }
        }
    }

    let inside: Vec<&Vec<f64>> = lattice
        .iter()
        .zip(&zs)
        .filter(|(_, z)| **z <= 0.0)
        .map(|(p, _)| p)
        .collect();
    if inside.is_empty() && shell.is_empty() {
        fail(ValidationCheck::EmptyDomain, "no sample of X found".into());
    }
    match regularity_min {
        None => fail(
            ValidationCheck::Regularity,
            "no boundary point could be located".into(),
        ),
        Some(m) if m <= scene.tol.regularity => fail(
            ValidationCheck::Regularity,
            format!("min |grad z| on the boundary is {m:e}"),
        ),
        _ => {}
    }

    let mut lyapunov_min: Option<f64> = None;
    for p in inside.iter().copied().chain(shell.iter()) {
        match scene.lyapunov_rate().eval(p) {
            Ok(r) => lyapunov_min = Some(lyapunov_min.map_or(r, |m| m.min(r))),
            Err(e) => fail(ValidationCheck::Evaluation, format!("L_v f at {p:?}: {e}")),
        }
    }
    if let Some(m) = lyapunov_min {
        if m <= 0.0 {
            fail(
                ValidationCheck::Lyapunov,
                format!("min L_v f over X is {m:e}"),
            );
        }
    }

    let mut field_min_norm: Option<f64> = None;
    let mut v = vec![0.0; d];
    for p in &lattice {
        match scene.field_at(p, &mut v) {
            Ok(()) => {
                let vn = norm(&v);
                field_min_norm = Some(field_min_norm.map_or(vn, |m| m.min(vn)));
            }
            Err(e) => fail(ValidationCheck::Evaluation, format!("v at {p:?}: {e}")),
        }
    }
    if field_min_norm.is_some_and(|m| m <= 0.0) {
        fail(
            ValidationCheck::VanishingField,
            "field vanishes on the bounding box".into(),
        );
    }

    ValidationReport {
        passed: failures.is_empty(),
        grid: n,
        interior_samples: inside.len(),
        shell_samples: shell.len(),
        lyapunov_min,
        regularity_min,
        field_min_norm,
        bbox_contained,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn scene2(z: &str, v: [&str; 2], f: &str, half: f64) -> Scene {
        Scene::new(
            2,
            parse(z, 2).unwrap(),
            v.iter().map(|s| parse(s, 2).unwrap()).collect(),
            parse(f, 2).unwrap(),
            BBox {
                min: vec![-half, -half],
                max: vec![half, half],
            },
            ToleranceSet::defaults(2),
        )
        .unwrap()
    }

    fn same(e: &Expression, text: &str) {
        let want = parse(text, 2).unwrap();
        for p in [[0.3, -0.2], [1.4, 0.9], [-0.7, 1.1]] {
            let (a, b) = (e.eval(&p).unwrap(), want.eval(&p).unwrap());
            assert!((a - b).abs() < 1e-12, "{e} vs {text}");
        }
    }

    #[test]
    fn lie_derivative_examples() {
        let s = scene2("x0^2 + x1^2 - 1", ["0", "1"], "x1", 1.5);
        assert_eq!(s.lie_derivative(s.z()).to_string(), "2.0 * x1");
        assert_eq!(s.lie_derivative(&parse("2*x1", 2).unwrap()).to_string(), "2.0");
        let h = scene2("x0^2 + x1^2 - 1", ["1", "0"], "x0", 1.5);
        assert_eq!(h.lie_derivative(&parse("x1", 2).unwrap()).to_string(), "0.0");
    }

    #[test]
    fn disk_and_annulus_towers() {
        let disk = scene2("x0^2 + x1^2 - 1", ["0", "1"], "x1", 1.5);
        let t = disk.lie_tower(2);
        assert_eq!(t.len(), 3);
        same(&t[0], "x0^2 + x1^2 - 1");
        same(&t[1], "2*x1");
        same(&t[2], "2");
        assert_eq!(disk.lie_tower(1).len(), 2);
        assert_eq!(disk.lie_tower(6).len(), 7);

        let ann = scene2("-(x0^2 + x1^2 - 1) * (4 - x0^2 - x1^2)", ["0", "1"], "x1", 2.5);
        same(&ann.lie_tower(1)[1], "2*x1*(2*(x0^2 + x1^2) - 5)");
    }

    #[test]
    fn validation_examples() {
        let ok = validate(&scene2("x0^2 + x1^2 - 1", ["0", "1"], "x1", 1.5));
        assert!(ok.passed, "{:?}", ok.failures);
        assert_eq!(ok.lyapunov_min, Some(1.0));

        let bad = validate(&scene2("x0^2 + x1^2 - 1", ["0", "1"], "-x1", 1.5));
        assert!(!bad.passed);
        assert!(bad.failed(ValidationCheck::Lyapunov));

        let point = validate(&scene2("x0^2 + x1^2", ["0", "1"], "x1", 1.0));
        assert!(point.failed(ValidationCheck::Regularity), "{:?}", point.failures);

        let walls = validate(&scene2("x0^2 + x1^2 - 4", ["0", "1"], "x1", 1.5));
        assert!(walls.failed(ValidationCheck::BboxContainment));
    }

    #[test]
    fn validation_is_deterministic() {
        let s = scene2("-(x0^2 + x1^2 - 1) * (4 - x0^2 - x1^2)", ["0", "1"], "x1", 2.5);
        assert_eq!(validate(&s), validate(&s));
    }

    #[test]
    fn rejects_malformed_scenes() {
        let text = r#"{"dimension":2,"z":"x0^2+x2^2-1","v":["0","1"],"f":"x1",
            "bbox":{"min":[-2,-2],"max":[2,2]}}"#;
        assert!(Scene::from_json_str(text).is_err());
        let text = r#"{"dimension":2,"z":"x0^2+x1^2-1","v":["0","1"],"f":"x1",
            "bbox":{"min":[-2,-2],"max":[2,2]},"tol":{"contact":-1}}"#;
        assert!(matches!(Scene::from_json_str(text), Err(Error::InvalidScene(_))));
    }

    #[test]
    fn scene_file_round_trip() {
        let s = scene2("x0^2 + x1^2 - 1", ["0", "1"], "x1", 1.5).with_reference_betti(vec![1, 0]);
        let text = serde_json::to_string(&s.to_file_struct()).unwrap();
        let back = Scene::from_json_str(&text).unwrap();
        assert_eq!(back.tol(), s.tol());
        assert_eq!(back.reference_betti(), Some(&[1usize, 0][..]));
        assert_eq!(back.z().to_string(), s.z().to_string());
    }
}
