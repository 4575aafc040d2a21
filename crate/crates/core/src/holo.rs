//! Boundary-only reconstruction. `extract_boundary_data` is the one stage
//! that looks inside the domain: it records the flow order between contact
//! points and the values of `f` on them. `reconstruct` sees nothing but
//! that record, and `verify_reconstruction` compares its output with the
//! scene.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{dist, project_on_segment};
use crate::scene::Scene;
use crate::strata::{stratum_sample_3d, tangencies_on_curves};
use crate::tracer::{boundary_seeds, trace, trace_batch, TrajectoryRecord};
use crate::tspace::{
    assemble_graph, build_complex_2d, gamma_map, graph_betti, same_contact_set, ClassRegistry,
    GammaImage, QuotientComplex,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    pub coords: Vec<f64>,
    pub f: f64,
}

/// Contact samples and the flow order between them: `[i, j]` means sample
/// `j` is reached from sample `i` along the flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub samples: Vec<Sample>,
    pub relations: Vec<[usize; 2]>,
}

impl BoundaryData {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

struct SampleIndex {
    tol: f64,
    samples: Vec<Sample>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl SampleIndex {
    fn key(&self, p: &[f64]) -> Vec<i64> {
        p.iter().map(|x| (x / (4.0 * self.tol)).floor() as i64).collect()
    }

    fn id_of(&mut self, coords: &[f64], f: f64) -> usize {
        let base = self.key(coords);
        for offset in 0..3usize.pow(base.len() as u32) {
            let mut key = base.clone();
            let mut o = offset;
            for k in key.iter_mut() {
                *k += (o % 3) as i64 - 1;
                o /= 3;
            }
            if let Some(ids) = self.buckets.get(&key) {
                if let Some(&id) = ids.iter().find(|&&id| dist(&self.samples[id].coords, coords) <= self.tol) {
                    return id;
                }
            }
        }
        let id = self.samples.len();
        self.buckets.entry(base).or_default().push(id);
        self.samples.push(Sample {
            id,
            coords: coords.to_vec(),
            f,
        });
        id
    }
}

/// Traces the trajectories through `density` boundary seeds (plus every
/// tangency point in the plane) and records their contacts and flow order.
/// With `strict`, only contacts on `d_1^+ X` are kept.
pub fn extract_boundary_data(scene: &Scene, density: usize, strict: bool) -> Result<BoundaryData> {
    let mut seeds = Vec::new();
    if scene.dimension() == 2 {
        let curves = crate::curves::extract_curves(scene, scene.tol().grid)?;
        seeds.extend(
            tangencies_on_curves(scene, &curves)?
                .into_iter()
                .map(|t| t.point.coords),
        );
        seeds.extend(boundary_seeds(scene, density, 0)?);
    } else {
        seeds.extend(stratum_sample_3d(scene, density, 0)?.into_iter().map(|p| p.coords));
    }
    let records = trace_batch(scene, &seeds)
        .into_iter()
        .collect::<Result<Vec<TrajectoryRecord>>>()?;
    let mut index = SampleIndex {
        tol: scene.tol().cluster,
        samples: Vec::new(),
        buckets: HashMap::new(),
    };
    let mut relations = BTreeSet::new();
    for rec in &records {
        let ids: Vec<usize> = rec
            .divisor
            .contacts
            .iter()
            .filter(|c| !strict || c.on_plus())
            .map(|c| index.id_of(&c.coords, c.fval))
            .collect();
        for a in 0..ids.len() {
            for b in a + 1..ids.len() {
                if ids[a] != ids[b] {
                    relations.insert([ids[a], ids[b]]);
                }
            }
        }
    }
    Ok(BoundaryData {
        samples: index.samples,
        relations: relations.into_iter().collect(),
    })
}

/// Every breach of the order axioms: unknown ids, reflexive or symmetric
/// pairs, pairs against `f`, and cycles.
pub fn order_violations(data: &BoundaryData) -> Vec<String> {
    let n = data.samples.len();
    let mut out = Vec::new();
    for (k, s) in data.samples.iter().enumerate() {
        if s.id != k {
            out.push(format!("sample at position {k} has id {}", s.id));
        }
    }
    let set: BTreeSet<[usize; 2]> = data.relations.iter().copied().collect();
    for &[i, j] in &data.relations {
        if i >= n || j >= n {
            out.push(format!("relation [{i}, {j}] refers to an unknown sample"));
            continue;
        }
        if i == j {
            out.push(format!("relation [{i}, {i}] is reflexive"));
        } else if i < j && set.contains(&[j, i]) {
            out.push(format!("relations [{i}, {j}] and [{j}, {i}] are both present"));
        }
        if data.samples[j].f <= data.samples[i].f && i != j {
            out.push(format!("relation [{i}, {j}] does not increase f"));
        }
    }
    // Cycle check by topological sort.
    let mut indeg = vec![0usize; n];
    let mut next: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &[i, j] in &set {
        if i < n && j < n && i != j {
            next[i].push(j);
            indeg[j] += 1;
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut seen = 0;
    while let Some(i) = stack.pop() {
        seen += 1;
        for &j in &next[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                stack.push(j);
            }
        }
    }
    if seen < n {
        out.push(format!("the relation has a cycle through {} samples", n - seen));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructedClass {
    pub id: usize,
    /// Sample ids in flow order.
    pub samples: Vec<usize>,
    pub interval: [f64; 2],
}

/// Quotient graph rebuilt from the data (planar case).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelGraph {
    /// Class id of each vertex.
    pub vertices: Vec<usize>,
    /// Endpoints as vertex indices.
    pub edges: Vec<(usize, usize)>,
    pub betti: Vec<usize>,
    /// Boundary cycles as sample ids in order.
    pub cycles: Vec<Vec<usize>>,
    /// Per cycle position, the model cell (vertices first, then edges).
    pub cells: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reconstruction {
    pub classes: Vec<ReconstructedClass>,
    /// Class id of every sample.
    pub class_of: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelGraph>,
    /// Why the planar model could not be built from the samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_error: Option<String>,
}

fn root(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Classes are the components of the comparability graph; each must be a
/// chain in `f`. In the plane the quotient graph is rebuilt from the
/// sample positions alone.
pub fn reconstruct(data: &BoundaryData) -> Result<Reconstruction> {
    let violations = order_violations(data);
    if !violations.is_empty() {
        return Err(Error::OrderViolation(violations.join("; ")));
    }
    let n = data.samples.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for &[i, j] in &data.relations {
        let (a, b) = (root(&mut parent, i), root(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        members.entry(r).or_default().push(i);
    }
    let related: BTreeSet<[usize; 2]> = data.relations.iter().copied().collect();
    let mut classes = Vec::new();
    let mut class_of = vec![0; n];
    for (_, mut ids) in members {
        ids.sort_by(|&a, &b| data.samples[a].f.total_cmp(&data.samples[b].f).then(a.cmp(&b)));
        // A chain: every earlier sample precedes every later one.
        for x in 0..ids.len() {
            for y in x + 1..ids.len() {
                if !related.contains(&[ids[x], ids[y]]) && !implied(&related, ids[x], ids[y], &ids) {
                    return Err(Error::OrderViolation(format!(
                        "samples {} and {} share a class but are not comparable",
                        ids[x], ids[y]
                    )));
                }
            }
        }
        let id = classes.len();
        for &i in &ids {
            class_of[i] = id;
        }
        let interval = [data.samples[ids[0]].f, data.samples[*ids.last().unwrap()].f];
        classes.push(ReconstructedClass {
            id,
            samples: ids,
            interval,
        });
    }
    let dimension = data.samples.first().map(|s| s.coords.len()).unwrap_or(0);
    let (model, model_error) = if dimension == 2 && n > 0 {
        match planar_model(data, &classes, &class_of) {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };
    Ok(Reconstruction {
        classes,
        class_of,
        model,
        model_error,
    })
}

/// `a` precedes `b` through a path inside the class.
fn implied(related: &BTreeSet<[usize; 2]>, a: usize, b: usize, class: &[usize]) -> bool {
    let mut stack = vec![a];
    let mut seen = BTreeSet::from([a]);
    while let Some(i) = stack.pop() {
        for &j in class {
            if related.contains(&[i, j]) && seen.insert(j) {
                if j == b {
                    return true;
                }
                stack.push(j);
            }
        }
    }
    false
}

/// Chains samples into closed cycles. Shortest links between nearby
/// samples are accepted first as long as they keep every degree at most two
/// and close no cycle; the resulting paths are then joined or closed,
/// again shortest gap first.
fn chain_cycles(points: &[Vec<f64>]) -> Result<Vec<Vec<usize>>> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Reconstruction("too few samples to chain".into()));
    }
    let k = 8.min(n - 1);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        let mut near: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist(&points[i], &points[j]), j))
            .collect();
        near.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        for &(d, j) in &near[..k] {
            pairs.push((d, i.min(j), i.max(j)));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    pairs.dedup_by(|a, b| a.1 == b.1 && a.2 == b.2);
    let mut parent: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    fn link(i: usize, j: usize, parent: &mut [usize], adj: &mut [Vec<usize>], size: &mut [usize]) {
        adj[i].push(j);
        adj[j].push(i);
        let (a, b) = (root(parent, i), root(parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
            size[a.min(b)] += size[a.max(b)];
        }
    }
    for &(_, i, j) in &pairs {
        if adj[i].len() < 2 && adj[j].len() < 2 && root(&mut parent, i) != root(&mut parent, j) {
            link(i, j, &mut parent, &mut adj, &mut size);
        }
    }
    loop {
        let ends: Vec<usize> = (0..n).filter(|&i| adj[i].len() < 2).collect();
        if ends.is_empty() {
            break;
        }
        let mut best: Option<(f64, usize, usize)> = None;
        for (x, &i) in ends.iter().enumerate() {
            for &j in &ends[x + 1..] {
                let same = root(&mut parent, i) == root(&mut parent, j);
                if same && size[root(&mut parent, i)] < 3 {
                    continue;
                }
                let d = dist(&points[i], &points[j]);
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else {
            return Err(Error::Reconstruction(
                "samples could not be chained into closed curves".into(),
            ));
        };
        link(i, j, &mut parent, &mut adj, &mut size);
    }
    let mut seen = vec![false; n];
    let mut cycles = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut cycle = vec![start];
        seen[start] = true;
        let mut prev = start;
        let mut cur = adj[start][0];
        while cur != start {
            if seen[cur] {
                return Err(Error::Reconstruction("sample chain is not a simple cycle".into()));
            }
            seen[cur] = true;
            cycle.push(cur);
            let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
            prev = cur;
            cur = next;
        }
        cycles.push(cycle);
    }
    Ok(cycles)
}

fn planar_model(
    data: &BoundaryData,
    classes: &[ReconstructedClass],
    class_of: &[usize],
) -> Result<ModelGraph> {
    let points: Vec<Vec<f64>> = data.samples.iter().map(|s| s.coords.clone()).collect();
    let cycles = chain_cycles(&points)?;
    let seq: Vec<Vec<(usize, bool)>> = cycles
        .iter()
        .map(|c| {
            c.iter()
                .map(|&s| {
                    let class = class_of[s];
                    (class, classes[class].samples.len() != 2)
                })
                .collect()
        })
        .collect();
    let graph = assemble_graph(&seq)?;
    let vertex_of: HashMap<usize, usize> = graph.vertices.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let v = graph.vertices.len();
    let mut cells: Vec<Vec<usize>> = seq.iter().map(|c| vec![0; c.len()]).collect();
    for (ci, arcs) in graph.arcs.iter().enumerate() {
        let len = seq[ci].len();
        for arc in arcs {
            cells[ci][arc.start] = vertex_of[&seq[ci][arc.start].0];
            let mut i = (arc.start + 1) % len;
            while i != arc.end {
                cells[ci][i] = v + arc.edge;
                i = (i + 1) % len;
            }
        }
    }
    let edges: Vec<(usize, usize)> = graph.edges.iter().map(|e| e.ends).collect();
    Ok(ModelGraph {
        betti: graph_betti(v, &edges),
        vertices: graph.vertices,
        edges,
        cycles,
        cells,
    })
}

/// `α(p)`: the place of the trajectory through `p` in the quotient, paired
/// with `f(p)`.
pub fn alpha_embed(scene: &Scene, complex: &QuotientComplex, p: &[f64]) -> Result<(GammaImage, f64)> {
    let image = gamma_map(scene, complex, p)?;
    Ok((image, scene.f_at(p)?))
}

/// Multigraph isomorphism (loops allowed) by backtracking.
pub fn graph_isomorphic(a: (usize, &[(usize, usize)]), b: (usize, &[(usize, usize)])) -> bool {
    let (n, ea) = a;
    let (m, eb) = b;
    if n != m || ea.len() != eb.len() {
        return false;
    }
    let matrix = |n: usize, edges: &[(usize, usize)]| {
        let mut mat = vec![vec![0usize; n]; n];
        for &(x, y) in edges {
            mat[x][y] += 1;
            if x != y {
                mat[y][x] += 1;
            }
        }
        mat
    };
    let (ma, mb) = (matrix(n, ea), matrix(n, eb));
    let degrees = |mat: &[Vec<usize>]| -> Vec<usize> {
        (0..n).map(|i| mat[i].iter().sum::<usize>() + mat[i][i]).collect()
    };
    let (da, db) = (degrees(&ma), degrees(&mb));
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    fn extend(
        i: usize,
        map: &mut [usize],
        used: &mut [bool],
        m: (&[Vec<usize>], &[Vec<usize>]),
        d: (&[usize], &[usize]),
    ) -> bool {
        if i == map.len() {
            return true;
        }
        for j in 0..map.len() {
            if used[j] || d.0[i] != d.1[j] || m.0[i][i] != m.1[j][j] {
                continue;
            }
            if (0..i).all(|k| m.0[i][k] == m.1[j][map[k]]) {
                map[i] = j;
                used[j] = true;
                if extend(i + 1, map, used, m, d) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }
    extend(0, &mut map, &mut used, (&ma, &mb), (&da, &db))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructionReport {
    /// Fraction of interior probes whose trajectory lands in a model cell
    /// with `f(p)` inside the decorated interval (planar data only).
    pub interior_acceptance: Option<f64>,
    pub probes: usize,
    pub leaf_consistency: f64,
    pub order_axiom_failures: usize,
    pub class_count_match: bool,
    pub reconstructed_classes: usize,
    pub geometric_classes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub graph_isomorphic: Option<bool>,
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub probes: usize,
    /// Trajectories checked for leaf consistency.
    pub leaves: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            probes: 10_000,
            leaves: 100,
            seed: 0,
        }
    }
}

/// Nearest segment of the model cycles: `(cycle, position, fraction, length)`.
fn locate_on_model(data: &BoundaryData, model: &ModelGraph, p: &[f64]) -> (usize, usize, f64, f64) {
    let mut best = (0, 0, 0.0, 0.0, f64::INFINITY);
    for (ci, cycle) in model.cycles.iter().enumerate() {
        for k in 0..cycle.len() {
            let a = &data.samples[cycle[k]].coords;
            let b = &data.samples[cycle[(k + 1) % cycle.len()]].coords;
            let (s, d) = project_on_segment(p, a, b);
            if d < best.4 {
                best = (ci, k, s, dist(a, b), d);
            }
        }
    }
    (best.0, best.1, best.2, best.3)
}

fn probe_accepted(scene: &Scene, data: &BoundaryData, model: &ModelGraph, p: &[f64]) -> bool {
    let Ok(rec) = trace(scene, p) else {
        return false;
    };
    let Ok(fp) = scene.f_at(p) else {
        return false;
    };
    let mut candidates: Option<BTreeSet<usize>> = None;
    let mut f_est = Vec::new();
    for c in &rec.divisor.contacts {
        let (ci, k, s, len) = locate_on_model(data, model, &c.coords);
        let cycle = &model.cycles[ci];
        let k1 = (k + 1) % cycle.len();
        let here: BTreeSet<usize> = [model.cells[ci][k], model.cells[ci][k1]].into_iter().collect();
        candidates = Some(match candidates {
            None => here,
            Some(prev) => prev.intersection(&here).copied().collect(),
        });
        let (fa, fb) = (data.samples[cycle[k]].f, data.samples[cycle[k1]].f);
        f_est.push((fa + s * (fb - fa), len * len + 1e-9));
    }
    let Some(cells) = candidates else {
        return false;
    };
    let (lo, slo) = f_est[0];
    let (hi, shi) = *f_est.last().unwrap();
    !cells.is_empty() && fp >= lo - slo && fp <= hi + shi
}

fn random_interior(scene: &Scene, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bbox = scene.bbox();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 1000 * count.max(1) {
        attempts += 1;
        let p: Vec<f64> = bbox
            .min
            .iter()
            .zip(&bbox.max)
            .map(|(lo, hi)| rng.gen_range(*lo..*hi))
            .collect();
        if scene.z_at(&p).is_ok_and(|z| z < -scene.tol().contact) {
            out.push(p);
        }
    }
    out
}

/// Compares a reconstruction with the scene it came from.
pub fn verify_reconstruction(
    scene: &Scene,
    data: &BoundaryData,
    rec: &Reconstruction,
    opts: VerifyOptions,
) -> Result<ReconstructionReport> {
    let probes = random_interior(scene, opts.probes, opts.seed);
    let interior_acceptance = match &rec.model {
        Some(model) if scene.dimension() == 2 && !probes.is_empty() => {
            let hits = probes
                .par_iter()
                .filter(|p| probe_accepted(scene, data, model, p))
                .count();
            Some(hits as f64 / probes.len() as f64)
        }
        _ => None,
    };

    // Leaf consistency: points along one trajectory share its contact set.
    let leaves: Vec<bool> = probes
        .par_iter()
        .take(opts.leaves)
        .map(|p| {
            let Ok(base) = trace(scene, p) else {
                return false;
            };
            let contacts = base.contact_coords();
            let poly = &base.polyline;
            if poly.len() < 3 {
                return true;
            }
            (1..5).all(|k| {
                let q = &poly[k * (poly.len() - 1) / 5];
                trace(scene, q).is_ok_and(|r| same_contact_set(&r.contact_coords(), &contacts, scene.tol().cluster))
            })
        })
        .collect();
    let leaf_consistency = if leaves.is_empty() {
        1.0
    } else {
        leaves.iter().filter(|b| **b).count() as f64 / leaves.len() as f64
    };

    // Geometric partition of the samples by their traced contact sets.
    let seeds: Vec<Vec<f64>> = data.samples.iter().map(|s| s.coords.clone()).collect();
    let traced = trace_batch(scene, &seeds);
    let mut registry = ClassRegistry::new(scene.tol().cluster);
    let mut geo = Vec::with_capacity(traced.len());
    for r in &traced {
        geo.push(r.as_ref().ok().map(|r| registry.insert(r)));
    }
    let mut forward: HashMap<usize, usize> = HashMap::new();
    let mut backward: HashMap<usize, usize> = HashMap::new();
    let mut class_count_match = geo.iter().all(Option::is_some);
    for (s, g) in geo.iter().enumerate() {
        let (Some(g), r) = (*g, rec.class_of[s]) else {
            continue;
        };
        if *forward.entry(r).or_insert(g) != g || *backward.entry(g).or_insert(r) != r {
            class_count_match = false;
        }
    }
    class_count_match &= forward.len() == rec.classes.len();

    let graph_isomorphic = match &rec.model {
        None if rec.model_error.is_some() => Some(false),
        Some(model) => {
            let complex = build_complex_2d(scene)?;
            let (v, edges) = complex.graph_shape();
            Some(graph_isomorphic(
                (v, &edges),
                (model.vertices.len(), &model.edges),
            ))
        }
        None => None,
    };

    Ok(ReconstructionReport {
        interior_acceptance,
        probes: probes.len(),
        leaf_consistency,
        order_axiom_failures: order_violations(data).len(),
        class_count_match,
        reconstructed_classes: rec.classes.len(),
        geometric_classes: registry.classes().len(),
        graph_isomorphic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geom::BBox;
    use crate::scene::ToleranceSet;

    fn scene2(z: &str, half: f64) -> Scene {
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

    fn sample(id: usize, f: f64) -> Sample {
        Sample {
            id,
            coords: vec![id as f64, f],
            f,
        }
    }

    #[test]
    fn order_axioms() {
        let good = BoundaryData {
            samples: vec![sample(0, -1.0), sample(1, 0.0), sample(2, 1.0)],
            relations: vec![[0, 1], [1, 2], [0, 2]],
        };
        assert!(order_violations(&good).is_empty());
        let rec = reconstruct(&good).unwrap();
        assert_eq!(rec.classes.len(), 1);
        assert_eq!(rec.classes[0].samples, vec![0, 1, 2]);
        assert_eq!(rec.classes[0].interval, [-1.0, 1.0]);

        let mut reversed = good.clone();
        reversed.relations[0] = [1, 0];
        assert!(matches!(reconstruct(&reversed), Err(Error::OrderViolation(_))));
        let mut symmetric = good.clone();
        symmetric.relations.push([2, 0]);
        assert!(!order_violations(&symmetric).is_empty());
        let reflexive = BoundaryData {
            samples: vec![sample(0, 0.0)],
            relations: vec![[0, 0]],
        };
        assert!(!order_violations(&reflexive).is_empty());
    }

    #[test]
    fn empty_relations_give_singleton_classes() {
        let data = BoundaryData {
            samples: vec![sample(0, 0.5), sample(1, 0.2)],
            relations: vec![],
        };
        let rec = reconstruct(&data).unwrap();
        assert_eq!(rec.classes.len(), 2);
        for c in &rec.classes {
            assert_eq!(c.interval[0], c.interval[1]);
        }
    }

    #[test]
    fn disk_extraction_examples() {
        let s = scene2("x0^2 + x1^2 - 1", 1.5);
        let data = extract_boundary_data(&s, 64, false).unwrap();
        let find = |p: [f64; 2]| {
            data.samples
                .iter()
                .find(|q| dist(&q.coords, &p) < 1e-7)
                .map(|q| q.id)
        };
        let top = find([1.0, 0.0]).unwrap();
        assert!(data.relations.iter().all(|r| r[0] != top && r[1] != top));
        for r in &data.relations {
            assert!(data.samples[r[1]].f > data.samples[r[0]].f);
        }
        let rec = reconstruct(&data).unwrap();
        for c in &rec.classes {
            if c.samples.len() == 2 {
                let x0 = data.samples[c.samples[0]].coords[0];
                let h = (1.0 - x0 * x0).sqrt();
                assert!((c.interval[0] + h).abs() < 1e-7 && (c.interval[1] - h).abs() < 1e-7);
            }
        }
        let model = rec.model.as_ref().unwrap();
        assert_eq!((model.vertices.len(), model.edges.len()), (2, 1));
    }

    #[test]
    fn annulus_chain_and_model() {
        let s = scene2("-(x0^2 + x1^2 - 1) * (4 - x0^2 - x1^2)", 2.5);
        let data = extract_boundary_data(&s, 96, false).unwrap();
        let rec = reconstruct(&data).unwrap();
        let r3 = 3f64.sqrt();
        let chain = rec.classes.iter().find(|c| c.samples.len() == 3).unwrap();
        assert!((chain.interval[0] + r3).abs() < 1e-8 && (chain.interval[1] - r3).abs() < 1e-8);
        let model = rec.model.as_ref().unwrap();
        assert_eq!((model.vertices.len(), model.edges.len()), (4, 4));
        assert_eq!(model.betti, vec![1, 1]);
        let report = verify_reconstruction(
            &s,
            &data,
            &rec,
            VerifyOptions {
                probes: 300,
                leaves: 20,
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(report.interior_acceptance, Some(1.0));
        assert!(report.class_count_match);
        assert_eq!(report.graph_isomorphic, Some(true));
        assert_eq!(report.leaf_consistency, 1.0);
    }

    #[test]
    fn isomorphism() {
        let path = [(0, 1), (1, 2), (1, 2), (2, 3)];
        let shuffled = [(3, 2), (2, 0), (0, 2), (0, 1)];
        assert!(graph_isomorphic((4, &path), (4, &shuffled)));
        let cycle = [(0, 1), (1, 2), (2, 3), (3, 0)];
        assert!(!graph_isomorphic((4, &path), (4, &cycle)));
        assert!(graph_isomorphic((1, &[(0, 0)]), (1, &[(0, 0)])));
        assert!(!graph_isomorphic((2, &[(0, 0)]), (2, &[(0, 1)])));
    }

    #[test]
    fn wire_format_round_trip() {
        let data = BoundaryData {
            samples: vec![sample(0, -1.0), sample(1, 1.0)],
            relations: vec![[0, 1]],
        };
        let text = data.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["samples"][0]["coords"].is_array());
        assert_eq!(v["relations"][0], serde_json::json!([0, 1]));
        assert_eq!(BoundaryData::from_json(&text).unwrap(), data);
    }
}
