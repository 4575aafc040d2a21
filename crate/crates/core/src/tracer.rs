//! Trajectory integration, contact detection and divisors.
//!
//! A trajectory is integrated backward and forward from its seed until `z`
//! exceeds `tol.contact` in both directions. Along the dense path the tracer
//! collects two kinds of events: crossings of `z = 0` and extrema of `z`
//! (zeros of `L_v z`). Extrema with `|z| <= tol.contact` are tangency
//! candidates. Consecutive candidate events that are not separated by a
//! deeper extremum stay within the contact band the whole time between them,
//! and are merged into a single contact. That rule makes a grazing chord
//! (two crossings around a shallow extremum) and a singleton (a seed whose
//! path exits immediately in both directions) come out as one contact.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::extract_curves;
use crate::error::{Error, Result};
use crate::geom::dist;
use crate::ode::{hermite, Dopri5, Node, StepControl};
use crate::scene::Scene;
use crate::strata::{classify, sample_boundary_3d, BoundaryPoint};

/// Combinatorial type of a trajectory: multiplicities of its contacts in
/// flow order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Omega(pub Vec<usize>);

impl Omega {
    pub fn norm(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn reduced_norm(&self) -> usize {
        self.0.iter().map(|w| w.saturating_sub(1)).sum()
    }

    /// Endpoints odd and interior entries even, or a single even entry.
    pub fn check_parity(&self) -> bool {
        match self.0.as_slice() {
            [] => false,
            [w] => w % 2 == 0,
            [first, inner @ .., last] => {
                first % 2 == 1 && last % 2 == 1 && inner.iter().all(|w| w % 2 == 0)
            }
        }
    }
}

impl fmt::Display for Omega {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// `(|w|, |w|')`.
pub fn norms(w: &Omega) -> (usize, usize) {
    (w.norm(), w.reduced_norm())
}

/// The contacts of one trajectory with the boundary, in flow order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divisor {
    pub contacts: Vec<BoundaryPoint>,
    pub is_singleton: bool,
}

pub fn omega_of(d: &Divisor) -> Omega {
    Omega(d.contacts.iter().map(|c| c.multiplicity).collect())
}

/// `(m(γ), m'(γ))`: total and reduced multiplicity of the divisor.
pub fn gamma_multiplicities(d: &Divisor) -> (usize, usize) {
    let m = d.contacts.iter().map(|c| c.multiplicity).sum();
    let reduced = d.contacts.iter().map(|c| c.multiplicity - 1).sum();
    (m, reduced)
}

pub fn check_parity(d: &Divisor) -> bool {
    omega_of(d).check_parity()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: Vec<f64>,
    pub divisor: Divisor,
    pub omega: Omega,
    /// Path samples from the first to the last contact.
    pub polyline: Vec<Vec<f64>>,
    /// Smallest decisive-derivative magnitude over the contacts.
    pub margin: f64,
    /// Some contact has multiplicity above the dimension.
    pub non_generic: bool,
}

impl TrajectoryRecord {
    pub fn contact_coords(&self) -> Vec<Vec<f64>> {
        self.divisor.contacts.iter().map(|c| c.coords.clone()).collect()
    }
}

/// Sub-samples per integration step used for event scanning.
const SCAN: usize = 4;
/// Arc-length cap per direction, in bbox diameters.
const ARC_CAP: f64 = 100.0;

fn step_control(scene: &Scene) -> StepControl {
    StepControl {
        rel: scene.tol().ode_rel,
        abs: scene.tol().ode_abs,
        max_displacement: scene.bbox().diameter() / (4.0 * scene.tol().grid as f64),
    }
}

/// Integrates `sign * v` from `seed` until `z > tol.contact`.
fn integrate(scene: &Scene, seed: &[f64], sign: f64) -> Result<Vec<Node>> {
    let rhs = |x: &[f64], out: &mut [f64]| -> Result<()> {
        scene.field_at(x, out)?;
        out.iter_mut().for_each(|o| *o *= sign);
        Ok(())
    };
    let mut solver = Dopri5::new(rhs, step_control(scene));
    let mut nodes = vec![solver.start(seed)?];
    let cap = ARC_CAP * scene.bbox().diameter();
    let mut length = 0.0;
    loop {
        let last = nodes.last().unwrap();
        let next = solver.step(last)?;
        length += dist(&last.x, &next.x);
        if let Some(t) = first_exit(scene, last, &next, sign)? {
            let x = hermite(last, &next, t);
            let mut dx = vec![0.0; x.len()];
            scene.field_at(&x, &mut dx)?;
            dx.iter_mut().for_each(|d| *d *= sign);
            nodes.push(Node { t, x, dx });
            return Ok(nodes);
        }
        if !scene.bbox().contains(&next.x) {
            return Err(Error::EscapedBbox { coords: next.x });
        }
        nodes.push(next);
        if length > cap {
            return Err(Error::NonTraversing {
                seed: seed.to_vec(),
                cap,
            });
        }
    }
}

/// Earliest time in the step `a -> b` where the path is outside the contact
/// band. Checks the scan sub-samples and any maximum of `z` between them, so
/// a short excursion outside `X` inside one step is not skipped.
fn first_exit(scene: &Scene, a: &Node, b: &Node, sign: f64) -> Result<Option<f64>> {
    let band = scene.tol().contact;
    let lz = &scene.tower()[1];
    let mut prev = (a.t, sign * lz.eval(&a.x)?);
    for k in 1..=SCAN {
        let t = a.t + (b.t - a.t) * k as f64 / SCAN as f64;
        let x = hermite(a, b, t);
        let rate = sign * lz.eval(&x)?;
        let (t0, rate0) = prev;
        if rate0 > 0.0 && rate <= 0.0 {
            let tm = bisect(t0, t, |s| Ok(sign * lz.eval(&hermite(a, b, s))? > 0.0))?;
            if scene.z_at(&hermite(a, b, tm))? > band {
                return Ok(Some(tm));
            }
        }
        if scene.z_at(&x)? > band {
            return Ok(Some(t));
        }
        prev = (t, rate);
    }
    Ok(None)
}

/// Forward-time dense path through both half-trajectories.
struct Path {
    nodes: Vec<Node>,
}

impl Path {
    fn at(&self, t: f64) -> Vec<f64> {
        let i = match self.nodes.binary_search_by(|n| n.t.total_cmp(&t)) {
            Ok(i) => return self.nodes[i].x.clone(),
            Err(0) => return self.nodes[0].x.clone(),
            Err(i) if i >= self.nodes.len() => return self.nodes.last().unwrap().x.clone(),
            Err(i) => i - 1,
        };
        hermite(&self.nodes[i], &self.nodes[i + 1], t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    Crossing,
    Max,
    Min,
}

#[derive(Debug, Clone)]
struct Event {
    t: f64,
    x: Vec<f64>,
    z: f64,
    kind: EventKind,
}

/// Bisects `pred` (true at `lo`, false at `hi`) down to floating resolution.
fn bisect(mut lo: f64, mut hi: f64, mut pred: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        if pred(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn scan_events(scene: &Scene, path: &Path) -> Result<Vec<Event>> {
    let lz = &scene.tower()[1];
    let mut ts = Vec::new();
    for w in path.nodes.windows(2) {
        for k in 0..SCAN {
            ts.push(w[0].t + (w[1].t - w[0].t) * k as f64 / SCAN as f64);
        }
    }
    ts.push(path.nodes.last().unwrap().t);
    let mut zs = Vec::with_capacity(ts.len());
    let mut lzs = Vec::with_capacity(ts.len());
    for &t in &ts {
        let x = path.at(t);
        zs.push(scene.z_at(&x)?);
        lzs.push(lz.eval(&x)?);
    }
    // Extrema first; z is monotone between them, so scanning the samples
    // together with the extrema cannot step over a pair of crossings.
    let mut events = Vec::new();
    let mut profile: Vec<(f64, f64)> = Vec::with_capacity(ts.len());
    for k in 0..ts.len() {
        profile.push((ts[k], zs[k]));
        if k + 1 == ts.len() {
            break;
        }
        let rising = lzs[k] > 0.0;
        if rising != (lzs[k + 1] > 0.0) {
            let t = bisect(ts[k], ts[k + 1], |t| Ok((lz.eval(&path.at(t))? > 0.0) == rising))?;
            let x = path.at(t);
            let z = scene.z_at(&x)?;
            profile.push((t, z));
            events.push(Event {
                t,
                z,
                x,
                kind: if rising { EventKind::Max } else { EventKind::Min },
            });
        }
    }
    for w in profile.windows(2) {
        let ((t0, z0), (t1, z1)) = (w[0], w[1]);
        let inside = z0 <= 0.0;
        if inside != (z1 <= 0.0) {
            let t = bisect(t0, t1, |t| Ok((scene.z_at(&path.at(t))? <= 0.0) == inside))?;
            let x = path.at(t);
            events.push(Event {
                t,
                z: scene.z_at(&x)?,
                x,
                kind: EventKind::Crossing,
            });
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(events)
}

/// Groups band events into contacts and picks one representative each.
fn contacts_from_events(scene: &Scene, events: &[Event]) -> Vec<(f64, Vec<f64>)> {
    let band = scene.tol().contact;
    let mut clusters: Vec<Vec<&Event>> = Vec::new();
    let mut open = false;
    for e in events {
        let candidate = e.kind == EventKind::Crossing || e.z.abs() <= band;
        if !candidate {
            open = false;
            continue;
        }
        if open {
            clusters.last_mut().unwrap().push(e);
        } else {
            clusters.push(vec![e]);
            open = true;
        }
    }
    clusters
        .into_iter()
        .map(|cluster| {
            let rep = cluster
                .iter()
                .filter(|e| e.kind != EventKind::Crossing)
                .min_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
                .or_else(|| cluster.first())
                .unwrap();
            (rep.t, rep.x.clone())
        })
        .collect()
}

/// Traces the trajectory through `seed` and assembles its divisor.
pub fn trace(scene: &Scene, seed: &[f64]) -> Result<TrajectoryRecord> {
    if seed.len() != scene.dimension() {
        return Err(Error::InvalidScene(format!(
            "seed has {} coordinates, scene dimension is {}",
            seed.len(),
            scene.dimension()
        )));
    }
    let z0 = scene.z_at(seed)?;
    if z0 > scene.tol().contact {
        return Err(Error::SeedOutside {
            coords: seed.to_vec(),
            z: z0,
        });
    }
    let backward = integrate(scene, seed, -1.0)?;
    let forward = integrate(scene, seed, 1.0)?;
    let mut nodes: Vec<Node> = backward
        .into_iter()
        .skip(1)
        .rev()
        .map(|n| Node {
            t: -n.t,
            x: n.x,
            dx: n.dx.into_iter().map(|d| -d).collect(),
        })
        .collect();
    nodes.extend(forward);
    let path = Path { nodes };
    let events = scan_events(scene, &path)?;
    let picked = contacts_from_events(scene, &events);
    if picked.is_empty() {
        return Err(Error::SeedOutside {
            coords: seed.to_vec(),
            z: z0,
        });
    }
    let contacts = picked
        .iter()
        .map(|(_, x)| classify(scene, x))
        .collect::<Result<Vec<BoundaryPoint>>>()?;
    let (t_first, t_last) = (picked[0].0, picked.last().unwrap().0);
    let mut polyline = vec![contacts[0].coords.clone()];
    if contacts.len() > 1 {
        polyline.extend(
            path.nodes
                .iter()
                .filter(|n| n.t > t_first && n.t < t_last)
                .map(|n| n.x.clone()),
        );
        polyline.push(contacts.last().unwrap().coords.clone());
    }
    let omega = Omega(contacts.iter().map(|c| c.multiplicity).collect());
    let is_singleton = contacts.len() == 1 && contacts[0].multiplicity % 2 == 0;
    let margin = contacts.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    let non_generic = contacts.iter().any(|c| !c.is_generic(scene.dimension()));
    Ok(TrajectoryRecord {
        seed: seed.to_vec(),
        divisor: Divisor {
            contacts,
            is_singleton,
        },
        omega,
        polyline,
        margin,
        non_generic,
    })
}

/// Traces every seed in parallel; results keep the seed order.
pub fn trace_batch(scene: &Scene, seeds: &[Vec<f64>]) -> Vec<Result<TrajectoryRecord>> {
    seeds.par_iter().map(|s| trace(scene, s)).collect()
}

/// `count` seeds on the boundary: evenly spaced by arc length over the
/// extracted curves in the plane, random projected samples in space.
pub fn boundary_seeds(scene: &Scene, count: usize, rng_seed: u64) -> Result<Vec<Vec<f64>>> {
    if scene.dimension() == 3 {
        return Ok(sample_boundary_3d(scene, count, rng_seed));
    }
    let curves = extract_curves(scene, scene.tol().grid)?;
    let total: f64 = curves.iter().map(|c| c.length()).sum();
    let mut seeds = Vec::with_capacity(count);
    for k in 0..count {
        let mut s = total * (k as f64 + 0.5) / count as f64;
        for c in &curves {
            if s < c.length() {
                let raw = c.point_at(s);
                let q = scene
                    .project_to_boundary(&raw, scene.tol().contact / 10.0)
                    .ok_or_else(|| Error::CurveExtraction(format!("projection failed near {raw:?}")))?;
                seeds.push(q);
                break;
            }
            s -= c.length();
        }
    }
    Ok(seeds)
}
