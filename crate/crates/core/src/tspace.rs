//! The trajectory space as a finite quotient: classes of trajectories
//! matched by their contact sets, the planar quotient graph, the map Γ from
//! the boundary, fiber statistics, the `+` filtration and Betti numbers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::{debug, warn};
use serde::Serialize;

use crate::curves::{extract_curves, locate_on_curves, BoundaryCurve};
use crate::error::{Error, Result};
use crate::geom::dist;
use crate::scene::Scene;
use crate::strata::{stratum_sample_3d, tangencies_on_curves, BoundaryPoint};
use crate::tracer::{trace, trace_batch, Omega, TrajectoryRecord};

/// Arc samples traced per boundary arc.
pub const ARC_SAMPLES: usize = 3;

/// A point of `T(v)`: all traces sharing one contact set.
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryClass {
    pub id: usize,
    pub omega: Omega,
    pub contacts: Vec<BoundaryPoint>,
    pub members: usize,
    #[serde(skip)]
    pub representative: TrajectoryRecord,
}

impl TrajectoryClass {
    pub fn has_tangency(&self) -> bool {
        self.omega.0.iter().any(|&m| m >= 2)
    }

    pub fn fiber(&self) -> usize {
        self.contacts.len()
    }

    pub fn plus_fiber(&self) -> usize {
        self.contacts.iter().filter(|c| c.on_plus()).count()
    }
}

/// Two contact sets describe the same trajectory: same length and
/// pairwise within `tol` in flow order.
pub fn same_contact_set(a: &[Vec<f64>], b: &[Vec<f64>], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(p, q)| dist(p, q) <= tol)
}

/// Classes keyed by a spatial hash of their first contact.
#[derive(Debug, Clone)]
pub struct ClassRegistry {
    tol: f64,
    cell: f64,
    classes: Vec<TrajectoryClass>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl ClassRegistry {
    pub fn new(tol: f64) -> Self {
        ClassRegistry {
            tol,
            cell: 4.0 * tol,
            classes: Vec::new(),
            buckets: HashMap::new(),
        }
    }

    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|x| (x / self.cell).floor() as i64).collect()
    }

    pub fn find(&self, contacts: &[Vec<f64>]) -> Option<usize> {
        let first = contacts.first()?;
        let base = self.key(first);
        let d = base.len();
        for offset in 0..3usize.pow(d as u32) {
            let mut key = base.clone();
            let mut o = offset;
            for k in key.iter_mut() {
                *k += (o % 3) as i64 - 1;
                o /= 3;
            }
            if let Some(ids) = self.buckets.get(&key) {
                for &id in ids {
                    let theirs: Vec<Vec<f64>> =
                        self.classes[id].contacts.iter().map(|c| c.coords.clone()).collect();
                    if same_contact_set(contacts, &theirs, self.tol) {
                        return Some(id);
                    }
                }
            }
        }
        None
    }

    /// Class id of `rec`, creating a class when none matches.
    pub fn insert(&mut self, rec: &TrajectoryRecord) -> usize {
        let coords = rec.contact_coords();
        if let Some(id) = self.find(&coords) {
            self.classes[id].members += 1;
            return id;
        }
        let id = self.classes.len();
        let key = self.key(&coords[0]);
        self.buckets.entry(key).or_default().push(id);
        self.classes.push(TrajectoryClass {
            id,
            omega: rec.omega.clone(),
            contacts: rec.divisor.contacts.clone(),
            members: 1,
            representative: rec.clone(),
        });
        id
    }

    pub fn classes(&self) -> &[TrajectoryClass] {
        &self.classes
    }

    pub fn into_classes(self) -> Vec<TrajectoryClass> {
        self.classes
    }
}

/// Quotient graph assembled from cyclic boundary sequences.
#[derive(Debug, Clone, Serialize)]
pub struct Graph {
    /// Class ids of the vertices, ascending.
    pub vertices: Vec<usize>,
    pub edges: Vec<GraphEdge>,
    /// Per cycle, its arcs in cyclic order.
    pub arcs: Vec<Vec<ArcRef>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphEdge {
    /// Vertex indices (into `Graph::vertices`); equal for a loop.
    pub ends: (usize, usize),
    /// Classes carried by the edge, ascending.
    pub classes: Vec<usize>,
}

/// Arc between the cut at position `start` and the next cut at `end`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ArcRef {
    pub start: usize,
    pub end: usize,
    pub edge: usize,
}

fn find_root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Builds the quotient graph from boundary cycles of `(class, is_cut)`
/// points. Cut classes become vertices; the runs between consecutive cuts
/// are arcs, and arcs sharing a class are glued into one edge.
pub fn assemble_graph(cycles: &[Vec<(usize, bool)>]) -> Result<Graph> {
    let vertices: Vec<usize> = cycles
        .iter()
        .flatten()
        .filter(|(_, cut)| *cut)
        .map(|(c, _)| *c)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let vertex_of: HashMap<usize, usize> = vertices.iter().enumerate().map(|(i, c)| (*c, i)).collect();

    // (cycle, start, end, bounding classes, interior classes)
    type RawArc = (usize, usize, usize, (usize, usize), BTreeSet<usize>);
    let mut raw_arcs: Vec<RawArc> = Vec::new();
    for (ci, cycle) in cycles.iter().enumerate() {
        let cuts: Vec<usize> = (0..cycle.len()).filter(|&i| cycle[i].1).collect();
        if cuts.is_empty() {
            return Err(Error::InconsistentQuotient(format!(
                "boundary cycle {ci} has no tangency cut"
            )));
        }
        for (k, &start) in cuts.iter().enumerate() {
            let end = cuts[(k + 1) % cuts.len()];
            let mut interior = BTreeSet::new();
            let mut i = (start + 1) % cycle.len();
            while i != end {
                interior.insert(cycle[i].0);
                i = (i + 1) % cycle.len();
            }
            if cuts.len() == 1 {
                // A single cut: the arc runs all the way around.
                let mut i = (start + 1) % cycle.len();
                while i != start {
                    interior.insert(cycle[i].0);
                    i = (i + 1) % cycle.len();
                }
            }
            if interior.is_empty() {
                return Err(Error::InconsistentQuotient(format!(
                    "arc between positions {start} and {end} of cycle {ci} carries no samples"
                )));
            }
            raw_arcs.push((ci, start, end, (cycle[start].0, cycle[end].0), interior));
        }
    }

    let mut parent: Vec<usize> = (0..raw_arcs.len()).collect();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (a, arc) in raw_arcs.iter().enumerate() {
        for class in &arc.4 {
            match owner.get(class) {
                Some(&b) => {
                    let (ra, rb) = (find_root(&mut parent, a), find_root(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
                None => {
                    owner.insert(*class, a);
                }
            }
        }
    }

    let mut edge_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut edges: Vec<GraphEdge> = Vec::new();
    let mut ends: Vec<BTreeSet<usize>> = Vec::new();
    let mut arcs: Vec<Vec<ArcRef>> = vec![Vec::new(); cycles.len()];
    for (a, raw) in raw_arcs.iter().enumerate() {
        let root = find_root(&mut parent, a);
        let e = *edge_of_root.entry(root).or_insert_with(|| {
            edges.push(GraphEdge {
                ends: (0, 0),
                classes: Vec::new(),
            });
            ends.push(BTreeSet::new());
            edges.len() - 1
        });
        let &(ci, start, end, (c0, c1), ref interior) = raw;
        ends[e].insert(vertex_of[&c0]);
        ends[e].insert(vertex_of[&c1]);
        let mut classes: BTreeSet<usize> = edges[e].classes.iter().copied().collect();
        classes.extend(interior.iter().copied());
        edges[e].classes = classes.into_iter().collect();
        arcs[ci].push(ArcRef { start, end, edge: e });
    }
    for (e, set) in ends.iter().enumerate() {
        let v: Vec<usize> = set.iter().copied().collect();
        edges[e].ends = match v.as_slice() {
            [a] => (*a, *a),
            [a, b] => (*a, *b),
            _ => {
                return Err(Error::InconsistentQuotient(format!(
                    "edge {e} has {} distinct endpoints",
                    v.len()
                )))
            }
        };
    }
    Ok(Graph {
        vertices,
        edges,
        arcs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact2d,
    Sampled3d,
}

/// A cell of the planar quotient: a vertex (one class with a tangency) or
/// an edge (a family of `(1,1)` classes).
#[derive(Debug, Clone, Serialize)]
pub struct Cell {
    pub id: usize,
    pub dim: usize,
    pub classes: Vec<usize>,
    /// Distinct ω labels of the member classes.
    pub omega: Vec<Omega>,
    /// Bounding 0-cell ids of a 1-cell.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ends: Option<(usize, usize)>,
}

/// A boundary arc between two consecutive cuts and the 1-cell it feeds.
#[derive(Debug, Clone, Serialize)]
pub struct ArcInfo {
    pub curve: usize,
    pub from: f64,
    pub to: f64,
    pub cell: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct QuotientComplex {
    pub mode: Mode,
    pub dimension: usize,
    pub classes: Vec<TrajectoryClass>,
    pub cells: Vec<Cell>,
    pub arcs: Vec<ArcInfo>,
    /// Samples skipped because their contact was degenerate (sampled mode).
    pub trace_failures: usize,
    #[serde(skip)]
    curves: Vec<BoundaryCurve>,
    #[serde(skip)]
    class_cell: Vec<Option<usize>>,
    #[serde(skip)]
    cluster: f64,
}

impl QuotientComplex {
    /// Boundary curves the planar complex was cut from.
    pub fn curves(&self) -> &[BoundaryCurve] {
        &self.curves
    }

    pub fn zero_cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.dim == 0)
    }

    pub fn one_cells(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.dim == 1)
    }

    pub fn vertex_count(&self) -> usize {
        self.zero_cells().count()
    }

    pub fn edge_count(&self) -> usize {
        self.one_cells().count()
    }

    pub fn cell_of_class(&self, class: usize) -> Option<usize> {
        self.class_cell.get(class).copied().flatten()
    }

    pub fn find_class(&self, contacts: &[Vec<f64>]) -> Option<usize> {
        self.classes.iter().position(|c| {
            let theirs: Vec<Vec<f64>> = c.contacts.iter().map(|p| p.coords.clone()).collect();
            same_contact_set(contacts, &theirs, self.cluster)
        })
    }

    /// Degree of every 0-cell (loops count twice), ascending.
    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut deg: BTreeMap<usize, usize> = self.zero_cells().map(|c| (c.id, 0)).collect();
        for e in self.one_cells() {
            let (a, b) = e.ends.unwrap();
            *deg.get_mut(&a).unwrap() += 1;
            *deg.get_mut(&b).unwrap() += 1;
        }
        let mut d: Vec<usize> = deg.into_values().collect();
        d.sort_unstable();
        d
    }

    /// Graph of the complex as `(vertex count, edge endpoint pairs)` with
    /// vertices renumbered `0..V`.
    pub fn graph_shape(&self) -> (usize, Vec<(usize, usize)>) {
        let index: BTreeMap<usize, usize> =
            self.zero_cells().enumerate().map(|(i, c)| (c.id, i)).collect();
        let edges = self
            .one_cells()
            .map(|e| {
                let (a, b) = e.ends.unwrap();
                (index[&a], index[&b])
            })
            .collect();
        (index.len(), edges)
    }
}

struct CyclePoint {
    param: f64,
    class: usize,
    cut: bool,
}

/// Builds the exact planar quotient.
pub fn build_complex_2d(scene: &Scene) -> Result<QuotientComplex> {
    build_complex_2d_with(scene, scene.tol().grid, ARC_SAMPLES)
}

/// As [`build_complex_2d`] with explicit curve resolution and arc sampling.
/// An inconsistent quotient triggers one retry at doubled density.
pub fn build_complex_2d_with(scene: &Scene, grid: usize, samples: usize) -> Result<QuotientComplex> {
    match build_once(scene, grid, samples) {
        Err(Error::InconsistentQuotient(msg)) => {
            warn!("{msg}; refining arcs");
            build_once(scene, 2 * grid, 2 * samples)
        }
        other => other,
    }
}

fn build_once(scene: &Scene, grid: usize, samples: usize) -> Result<QuotientComplex> {
    if scene.dimension() != 2 {
        return Err(Error::Unsupported("build_complex_2d needs dimension 2".into()));
    }
    let cluster = scene.tol().cluster;
    let curves = extract_curves(scene, grid)?;
    let tangencies = tangencies_on_curves(scene, &curves)?;
    let seeds: Vec<Vec<f64>> = tangencies.iter().map(|t| t.point.coords.clone()).collect();
    let tangency_recs = trace_batch(scene, &seeds)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut registry = ClassRegistry::new(cluster);
    let mut points: Vec<Vec<CyclePoint>> = (0..curves.len()).map(|_| Vec::new()).collect();
    for rec in &tangency_recs {
        let class = registry.insert(rec);
        for c in &rec.divisor.contacts {
            let (ci, param, _) = locate_on_curves(&curves, &c.coords);
            let duplicate = points[ci].iter().any(|p| {
                p.class == class && {
                    let d = (p.param - param).abs();
                    d.min(curves[ci].length() - d) <= cluster
                }
            });
            if !duplicate {
                points[ci].push(CyclePoint {
                    param,
                    class,
                    cut: true,
                });
            }
        }
    }

    // Arcs between consecutive cuts, sampled at interior fractions.
    let mut arc_bounds: Vec<(usize, f64, f64)> = Vec::new();
    for (ci, curve) in curves.iter().enumerate() {
        let mut cuts: Vec<f64> = points[ci].iter().map(|p| p.param).collect();
        if cuts.is_empty() {
            return Err(Error::InconsistentQuotient(format!(
                "boundary curve {ci} has no tangency point"
            )));
        }
        cuts.sort_by(f64::total_cmp);
        for k in 0..cuts.len() {
            let a = cuts[k];
            let b = if k + 1 < cuts.len() {
                cuts[k + 1]
            } else {
                cuts[0] + curve.length()
            };
            arc_bounds.push((ci, a, b));
        }
    }
    let target = scene.tol().contact / 10.0;
    let mut arc_seeds = Vec::new();
    for &(ci, a, b) in &arc_bounds {
        for k in 1..=samples {
            let raw = curves[ci].point_at(a + (b - a) * k as f64 / (samples + 1) as f64);
            let q = scene.project_to_boundary(&raw, target).ok_or_else(|| {
                Error::CurveExtraction(format!("projection failed near {raw:?}"))
            })?;
            arc_seeds.push(q);
        }
    }
    let arc_recs = trace_batch(scene, &arc_seeds)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for (arc, recs) in arc_recs.chunks(samples).enumerate() {
        let n = recs[0].divisor.contacts.len();
        if recs.iter().any(|r| r.divisor.contacts.len() != n) {
            return Err(Error::InconsistentQuotient(format!(
                "traces from arc {arc} disagree on contact count"
            )));
        }
        if let Some(r) = recs.iter().find(|r| r.omega.0.iter().any(|&m| m >= 2)) {
            return Err(Error::InconsistentQuotient(format!(
                "arc sample {:?} meets a tangency ({})",
                r.seed, r.omega
            )));
        }
    }
    for rec in &arc_recs {
        let class = registry.insert(rec);
        for c in &rec.divisor.contacts {
            let (ci, param, _) = locate_on_curves(&curves, &c.coords);
            points[ci].push(CyclePoint {
                param,
                class,
                cut: false,
            });
        }
    }
    for pts in points.iter_mut() {
        pts.sort_by(|a, b| a.param.total_cmp(&b.param).then(b.cut.cmp(&a.cut)));
    }
    let cycles: Vec<Vec<(usize, bool)>> = points
        .iter()
        .map(|pts| pts.iter().map(|p| (p.class, p.cut)).collect())
        .collect();
    let graph = assemble_graph(&cycles)?;
    let classes = registry.into_classes();
    for &v in &graph.vertices {
        if !classes[v].has_tangency() {
            return Err(Error::InconsistentQuotient(format!(
                "vertex class {v} has no tangency contact"
            )));
        }
    }

    let mut cells = Vec::new();
    let mut class_cell = vec![None; classes.len()];
    for &v in &graph.vertices {
        class_cell[v] = Some(cells.len());
        cells.push(Cell {
            id: cells.len(),
            dim: 0,
            classes: vec![v],
            omega: vec![classes[v].omega.clone()],
            ends: None,
        });
    }
    let first_edge = cells.len();
    for e in &graph.edges {
        let id = cells.len();
        let labels: BTreeSet<Omega> = e.classes.iter().map(|&c| classes[c].omega.clone()).collect();
        for &c in &e.classes {
            class_cell[c] = Some(id);
        }
        cells.push(Cell {
            id,
            dim: 1,
            classes: e.classes.clone(),
            omega: labels.into_iter().collect(),
            ends: Some((e.ends.0, e.ends.1)),
        });
    }
    let mut arcs = Vec::new();
    for (ci, refs) in graph.arcs.iter().enumerate() {
        for r in refs {
            let from = points[ci][r.start].param;
            let mut to = points[ci][r.end].param;
            if to <= from {
                to += curves[ci].length();
            }
            arcs.push(ArcInfo {
                curve: ci,
                from,
                to,
                cell: first_edge + r.edge,
            });
        }
    }
    debug!(
        "quotient: {} classes, {} vertices, {} edges",
        classes.len(),
        graph.vertices.len(),
        graph.edges.len()
    );
    Ok(QuotientComplex {
        mode: Mode::Exact2d,
        dimension: 2,
        classes,
        cells,
        arcs,
        trace_failures: 0,
        curves,
        class_cell,
        cluster,
    })
}

/// Sampled quotient of a spatial scene: classes of the trajectories through
/// `count` random boundary samples (plus refined fold representatives).
pub fn build_complex_3d(scene: &Scene, count: usize, seed: u64) -> Result<QuotientComplex> {
    if scene.dimension() != 3 {
        return Err(Error::Unsupported("build_complex_3d needs dimension 3".into()));
    }
    let samples = stratum_sample_3d(scene, count, seed)?;
    let seeds: Vec<Vec<f64>> = samples.into_iter().map(|p| p.coords).collect();
    let mut registry = ClassRegistry::new(scene.tol().cluster);
    let mut failures = 0;
    for r in trace_batch(scene, &seeds) {
        match r {
            Ok(rec) => {
                registry.insert(&rec);
            }
            Err(Error::DegenerateContact { coords, .. }) => {
                debug!("skipping degenerate contact at {coords:?}");
                failures += 1;
            }
            Err(e) => return Err(e),
        }
    }
    let classes = registry.into_classes();
    let n = classes.len();
    Ok(QuotientComplex {
        mode: Mode::Sampled3d,
        dimension: 3,
        classes,
        cells: Vec::new(),
        arcs: Vec::new(),
        trace_failures: failures,
        curves: Vec::new(),
        class_cell: vec![None; n],
        cluster: scene.tol().cluster,
    })
}

/// Image of a boundary point under Γ.
#[derive(Debug, Clone, Serialize)]
pub struct GammaImage {
    pub cell: Option<usize>,
    /// Matching class, when the trajectory was itself sampled.
    pub class: Option<usize>,
    pub omega: Omega,
    pub contacts: Vec<Vec<f64>>,
}

/// Traces from `p` and places its trajectory in the complex: an existing
/// class if its contact set matches one, otherwise the 1-cell whose arcs
/// carry its first contact.
pub fn gamma_map(scene: &Scene, complex: &QuotientComplex, p: &[f64]) -> Result<GammaImage> {
    let rec = trace(scene, p)?;
    let contacts = rec.contact_coords();
    if let Some(class) = complex.find_class(&contacts) {
        return Ok(GammaImage {
            cell: complex.cell_of_class(class),
            class: Some(class),
            omega: rec.omega,
            contacts,
        });
    }
    let tangent = rec.omega.0.iter().any(|&m| m >= 2);
    if complex.mode == Mode::Exact2d && !tangent {
        let (ci, param, _) = locate_on_curves(&complex.curves, &contacts[0]);
        let length = complex.curves[ci].length();
        for arc in complex.arcs.iter().filter(|a| a.curve == ci) {
            for shift in [0.0, length] {
                let t = param + shift;
                if t > arc.from && t < arc.to {
                    return Ok(GammaImage {
                        cell: Some(arc.cell),
                        class: None,
                        omega: rec.omega,
                        contacts,
                    });
                }
            }
        }
    }
    Err(Error::UnmatchedClass { coords: p.to_vec() })
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberStatistics {
    /// `|fiber|` -> number of classes.
    pub histogram: BTreeMap<usize, usize>,
    /// `|fiber ∩ d_1^+ X|` -> number of classes.
    pub plus_histogram: BTreeMap<usize, usize>,
    pub max_fiber: usize,
    pub max_plus_fiber: usize,
    pub fiber_bound: usize,
    pub plus_bound: usize,
    /// Classes exceeding `ceil(n / (j - 1))` contacts on `d_j^+ X` (dim 3).
    pub stratum_violations: usize,
    pub violations: Vec<String>,
}

impl FiberStatistics {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn fiber_statistics(complex: &QuotientComplex) -> FiberStatistics {
    let n = complex.dimension - 1;
    let mut histogram = BTreeMap::new();
    let mut plus_histogram = BTreeMap::new();
    let mut violations = Vec::new();
    let mut stratum_violations = 0;
    for c in &complex.classes {
        *histogram.entry(c.fiber()).or_insert(0) += 1;
        *plus_histogram.entry(c.plus_fiber()).or_insert(0) += 1;
        if c.fiber() > n + 2 {
            violations.push(format!("class {} has {} contacts > {}", c.id, c.fiber(), n + 2));
        }
        if c.plus_fiber() > n + 1 {
            violations.push(format!(
                "class {} has {} contacts on the + side > {}",
                c.id,
                c.plus_fiber(),
                n + 1
            ));
        }
        if complex.dimension == 3 {
            for j in 2..=n + 1 {
                let count = c.contacts.iter().filter(|p| p.in_plus_stratum(j)).count();
                let bound = n.div_ceil(j - 1);
                if count > bound {
                    stratum_violations += 1;
                    violations.push(format!(
                        "class {} has {count} contacts in stratum {j}+ > {bound}",
                        c.id
                    ));
                }
            }
        }
    }
    FiberStatistics {
        max_fiber: histogram.keys().max().copied().unwrap_or(0),
        max_plus_fiber: plus_histogram.keys().max().copied().unwrap_or(0),
        histogram,
        plus_histogram,
        fiber_bound: n + 2,
        plus_bound: n + 1,
        stratum_violations,
        violations,
    }
}

/// Classes meeting `d_k^+ X`: some contact of multiplicity above `k`, or
/// exactly `k` on the `+` side.
pub fn filtration(complex: &QuotientComplex, k: usize) -> BTreeSet<usize> {
    complex
        .classes
        .iter()
        .filter(|c| c.contacts.iter().any(|p| p.in_plus_stratum(k)))
        .map(|c| c.id)
        .collect()
}

/// Rank over the two-element field of a 0/1 matrix given by columns.
fn rank_gf2(rows: usize, columns: &[Vec<usize>]) -> usize {
    let words = rows.div_ceil(64).max(1);
    let mut mat: Vec<Vec<u64>> = columns
        .iter()
        .map(|col| {
            let mut bits = vec![0u64; words];
            for &r in col {
                bits[r / 64] ^= 1 << (r % 64);
            }
            bits
        })
        .collect();
    let mut rank = 0;
    for r in 0..rows {
        let Some(pivot) = (rank..mat.len()).find(|&c| mat[c][r / 64] >> (r % 64) & 1 == 1) else {
            continue;
        };
        mat.swap(rank, pivot);
        for c in 0..mat.len() {
            if c != rank && mat[c][r / 64] >> (r % 64) & 1 == 1 {
                let (src, dst) = if c < rank {
                    let (a, b) = mat.split_at_mut(rank);
                    (&b[0], &mut a[c])
                } else {
                    let (a, b) = mat.split_at_mut(c);
                    (&a[rank], &mut b[0])
                };
                for w in 0..words {
                    dst[w] ^= src[w];
                }
            }
        }
        rank += 1;
    }
    rank
}

/// `(b0, b1)` of a multigraph over the two-element field.
pub fn graph_betti(vertices: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let columns: Vec<Vec<usize>> = edges
        .iter()
        .map(|&(a, b)| if a == b { Vec::new() } else { vec![a, b] })
        .collect();
    let rank = rank_gf2(vertices, &columns);
    vec![vertices - rank, edges.len() - rank]
}

pub fn betti(complex: &QuotientComplex) -> Result<Vec<usize>> {
    if complex.mode != Mode::Exact2d {
        return Err(Error::Unsupported(
            "Betti numbers need the exact planar quotient".into(),
        ));
    }
    let (v, edges) = complex.graph_shape();
    Ok(graph_betti(v, &edges))
}

/// The quotient graph in DOT: 0-cells labelled by ω, 1-cells as edges.
pub fn to_dot(complex: &QuotientComplex) -> String {
    let mut out = String::from("graph trajectory_space {\n");
    for c in complex.zero_cells() {
        out.push_str(&format!("  c{} [label=\"{}\"];\n", c.id, c.omega[0]));
    }
    for e in complex.one_cells() {
        let (a, b) = e.ends.unwrap();
        let label: Vec<String> = e.omega.iter().map(|w| w.to_string()).collect();
        out.push_str(&format!(
            "  c{a} -- c{b} [label=\"{}\", id=\"c{}\"];\n",
            label.join(" "),
            e.id
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geom::BBox;
    use crate::scene::ToleranceSet;

    fn scene2(z: &str, v: [&str; 2], half: f64) -> Scene {
        Scene::new(
            2,
            parse(z, 2).unwrap(),
            v.iter().map(|s| parse(s, 2).unwrap()).collect(),
            parse("x1", 2).unwrap(),
            BBox {
                min: vec![-half, -half],
                max: vec![half, half],
            },
            ToleranceSet::defaults(2),
        )
        .unwrap()
    }

    fn disk() -> Scene {
        scene2("x0^2 + x1^2 - 1", ["0", "1"], 1.5)
    }

    fn annulus() -> Scene {
        scene2("-(x0^2 + x1^2 - 1) * (4 - x0^2 - x1^2)", ["0", "1"], 2.5)
    }

    #[test]
    fn assemble_disk_cycle() {
        // Singletons 0 and 1 cut the circle; chords 2, 3 appear on both arcs.
        let cycle = vec![(0, true), (2, false), (3, false), (1, true), (3, false), (2, false)];
        let g = assemble_graph(&[cycle]).unwrap();
        assert_eq!(g.vertices, vec![0, 1]);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].ends, (0, 1));
        assert_eq!(g.edges[0].classes, vec![2, 3]);
    }

    #[test]
    fn assemble_loop_and_errors() {
        let g = assemble_graph(&[vec![(0, true), (5, false)]]).unwrap();
        assert_eq!(g.edges[0].ends, (0, 0));
        assert!(matches!(
            assemble_graph(&[vec![(1, false), (2, false)]]),
            Err(Error::InconsistentQuotient(_))
        ));
        // One family touching three cut classes.
        let bad = vec![(0, true), (7, false), (1, true), (7, false), (2, true), (8, false)];
        assert!(matches!(assemble_graph(&[bad]), Err(Error::InconsistentQuotient(_))));
    }

    #[test]
    fn betti_of_small_graphs() {
        assert_eq!(graph_betti(2, &[(0, 1)]), vec![1, 0]);
        assert_eq!(graph_betti(4, &[(0, 1), (1, 2), (1, 2), (2, 3)]), vec![1, 1]);
        assert_eq!(graph_betti(1, &[(0, 0)]), vec![1, 1]);
        assert_eq!(graph_betti(4, &[(0, 1), (2, 3)]), vec![2, 0]);
        assert_eq!(graph_betti(3, &[]), vec![3, 0]);
    }

    #[test]
    fn disk_complex() {
        let s = disk();
        let cx = build_complex_2d(&s).unwrap();
        assert_eq!((cx.vertex_count(), cx.edge_count()), (2, 1));
        assert_eq!(betti(&cx).unwrap(), vec![1, 0]);
        for c in cx.zero_cells() {
            assert_eq!(c.omega, vec![Omega(vec![2])]);
        }
        for c in cx.one_cells() {
            assert_eq!(c.omega, vec![Omega(vec![1, 1])]);
        }
        let stats = fiber_statistics(&cx);
        assert_eq!(stats.histogram[&1], 2);
        assert_eq!(stats.max_fiber, 2);
        assert!(stats.ok());
        let f2 = filtration(&cx, 2);
        assert_eq!(f2.len(), 2);
        assert_eq!(filtration(&cx, 1).len(), cx.classes.len());
    }

    #[test]
    fn annulus_complex() {
        let s = annulus();
        let cx = build_complex_2d(&s).unwrap();
        assert_eq!((cx.vertex_count(), cx.edge_count()), (4, 4));
        assert_eq!(cx.degree_sequence(), vec![1, 1, 3, 3]);
        assert_eq!(betti(&cx).unwrap(), vec![1, 1]);
        let stats = fiber_statistics(&cx);
        assert_eq!(stats.max_fiber, 3);
        assert_eq!(stats.max_plus_fiber, 2);
        assert!(stats.ok());
        let f2 = filtration(&cx, 2);
        assert_eq!(f2.len(), 2);
        for id in f2 {
            assert_eq!(cx.classes[id].omega, Omega(vec![2]));
        }
        let dot = to_dot(&cx);
        assert_eq!(dot.matches(" -- ").count(), 4);
    }

    #[test]
    fn gamma_examples() {
        let s = disk();
        let cx = build_complex_2d(&s).unwrap();
        let h = 0.75f64.sqrt();
        let a = gamma_map(&s, &cx, &[0.5, h]).unwrap();
        let b = gamma_map(&s, &cx, &[0.5, -h]).unwrap();
        assert_eq!(a.cell, b.cell);
        assert!(same_contact_set(&a.contacts, &b.contacts, 1e-8));
        assert_eq!(cx.cells[a.cell.unwrap()].dim, 1);
        let top = gamma_map(&s, &cx, &[1.0, 0.0]).unwrap();
        let cell = &cx.cells[top.cell.unwrap()];
        assert_eq!(cell.dim, 0);
        assert_eq!(top.class, Some(cell.classes[0]));

        let s = annulus();
        let cx = build_complex_2d(&s).unwrap();
        let r3 = 3f64.sqrt();
        let ids: Vec<_> = [[1.0, r3], [1.0, -r3], [1.0, 0.0]]
            .iter()
            .map(|p| gamma_map(&s, &cx, p).unwrap().class)
            .collect();
        assert!(ids[0].is_some());
        assert!(ids.iter().all(|c| *c == ids[0]));
        assert_eq!(cx.classes[ids[0].unwrap()].fiber(), 3);
    }

    #[test]
    fn disjoint_disks() {
        let s = scene2(
            "((x0 - 2)^2 + x1^2 - 1) * ((x0 + 2)^2 + x1^2 - 1)",
            ["0", "1"],
            3.5,
        );
        let cx = build_complex_2d(&s).unwrap();
        assert_eq!(betti(&cx).unwrap(), vec![2, 0]);
    }

    #[test]
    fn class_count_is_stable_under_denser_arcs() {
        let s = annulus();
        let a = build_complex_2d_with(&s, 64, 3).unwrap();
        let b = build_complex_2d_with(&s, 64, 6).unwrap();
        assert_eq!((a.vertex_count(), a.edge_count()), (b.vertex_count(), b.edge_count()));
    }

    #[test]
    fn ball_sampled_fibers() {
        let s = Scene::new(
            3,
            parse("x0^2 + x1^2 + x2^2 - 1", 3).unwrap(),
            ["0", "0", "1"].iter().map(|e| parse(e, 3).unwrap()).collect(),
            parse("x2", 3).unwrap(),
            BBox {
                min: vec![-1.5; 3],
                max: vec![1.5; 3],
            },
            ToleranceSet::defaults(3),
        )
        .unwrap();
        let cx = build_complex_3d(&s, 300, 1).unwrap();
        let stats = fiber_statistics(&cx);
        assert!(stats.max_fiber <= 4);
        assert!(stats.ok(), "{:?}", stats.violations);
        assert!(betti(&cx).is_err());
    }
}
