//! Command-line front end. [`run`] parses arguments, runs one pipeline
//! inside a worker pool of the requested size and maps the outcome to an
//! exit code.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::holo::{
    extract_boundary_data, order_violations, reconstruct, verify_reconstruction, BoundaryData,
    VerifyOptions,
};
use crate::localmodel::{parse_omega, roundtrip, EPSILON};
use crate::render::{canonical_json, canonical_value, complex_svg};
use crate::scene::{validate, Scene, ValidationReport};
use crate::strata::{stratum_counts, stratum_sample_3d, tangency_locus_2d};
use crate::tracer::{boundary_seeds, check_parity, gamma_multiplicities, norms, trace_batch};
use crate::tspace::{
    betti, build_complex_2d, build_complex_3d, fiber_statistics, filtration, to_dot,
    QuotientComplex,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_PIPELINE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Default random seed for every sampler the CLI drives.
const RNG_SEED: u64 = 0;

#[derive(Debug, Parser)]
#[command(name = "trajspace", version, about = "Trajectory spaces of traversing flows")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Args)]
struct RunConfig {
    /// Write outputs into this directory instead of stdout.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Boundary sampling density: seeds per boundary in the plane, shell
    /// samples in space.
    #[arg(long, global = true, value_name = "K")]
    seed_grid: Option<usize>,
    /// Override the contact tolerance of the scene.
    #[arg(long, global = true, value_name = "X")]
    tol_contact: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the standing hypotheses of a scene.
    Validate { scene: PathBuf },
    /// Tangency strata of the boundary.
    Stratify { scene: PathBuf },
    /// Trace trajectories from boundary seeds.
    Trace {
        scene: PathBuf,
        /// Number of automatic boundary seeds.
        #[arg(long, value_name = "K", conflicts_with = "seeds")]
        grid: Option<usize>,
        /// JSON file with a list of seed points.
        #[arg(long, value_name = "FILE")]
        seeds: Option<PathBuf>,
        /// Omit trajectory polylines from the output.
        #[arg(long)]
        no_polyline: bool,
    },
    /// Build the quotient complex of the trajectory space.
    Complex {
        scene: PathBuf,
        /// Also emit the graph in DOT.
        #[arg(long)]
        dot: bool,
        /// Also emit an SVG picture (planar scenes).
        #[arg(long)]
        svg: bool,
    },
    /// Boundary-data extraction, reconstruction and verification.
    Holography {
        #[command(subcommand)]
        stage: Holography,
    },
    /// Round-trip multiplicity words through their local models.
    Roundtrip {
        /// Word such as 1,2,1; repeatable.
        #[arg(long, required = true, value_name = "W")]
        omega: Vec<String>,
        /// Coefficient perturbation.
        #[arg(long, default_value_t = EPSILON)]
        epsilon: f64,
    },
    /// Run every pipeline on a scene and collect the verdicts.
    Report {
        scene: PathBuf,
        /// Interior probes for the holography check.
        #[arg(long, default_value_t = 2000)]
        probes: usize,
    },
}

#[derive(Debug, Subcommand)]
enum Holography {
    /// Boundary samples, f values and the flow order between them.
    Extract {
        scene: PathBuf,
        /// Keep only contacts on the convex side.
        #[arg(long)]
        strict: bool,
    },
    /// Rebuild classes and the quotient model from a boundary-data file.
    Reconstruct {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
    },
    /// Reconstruct from a boundary-data file and check against the scene.
    Verify {
        scene: PathBuf,
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        probes: usize,
    },
}

/// Exit code of a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ValidationFailed(_) | Error::InvalidScene(_) | Error::Expr(_) => EXIT_VALIDATION,
        Error::OrderViolation(_) => EXIT_INVARIANT,
        _ => EXIT_PIPELINE,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.config.threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = match pool.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_PIPELINE;
        }
    };
    pool.install(|| match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    })
}

/// Where documents go: files in `--out`, or stdout.
struct Sink<'a> {
    dir: Option<&'a Path>,
}

impl Sink<'_> {
    fn json(&self, name: &str, value: &Value) -> Result<()> {
        let text = canonical_json(value)?;
        self.text(&format!("{name}.json"), &text, true)
    }

    fn text(&self, file: &str, text: &str, to_stdout: bool) -> Result<()> {
        match self.dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let path = dir.join(file);
                fs::write(&path, text)?;
                info!("wrote {}", path.display());
            }
            None if to_stdout => print!("{text}"),
            None => {}
        }
        Ok(())
    }
}

fn load_scene(path: &Path, config: &RunConfig) -> Result<Scene> {
    let scene = Scene::from_path(path)?;
    match config.tol_contact {
        Some(contact) => {
            let mut tol = scene.tol().clone();
            tol.contact = contact;
            scene.with_tolerances(tol)
        }
        None => Ok(scene),
    }
}

/// Validates and fails with exit 1 unless the scene passes.
fn checked_scene(path: &Path, config: &RunConfig) -> Result<Scene> {
    let scene = load_scene(path, config)?;
    let report = validate(&scene);
    if !report.passed {
        let reasons: Vec<String> = report.failures.iter().map(|f| f.message.clone()).collect();
        return Err(Error::ValidationFailed(reasons.join("; ")));
    }
    Ok(scene)
}

fn density(config: &RunConfig, scene: &Scene) -> usize {
    config
        .seed_grid
        .unwrap_or(if scene.dimension() == 2 { 96 } else { 2000 })
}

fn execute(cli: &Cli) -> Result<i32> {
    let config = &cli.config;
    let sink = Sink {
        dir: config.out.as_deref(),
    };
    match &cli.command {
        Command::Validate { scene } => {
            let scene = load_scene(scene, config)?;
            let report = validate(&scene);
            sink.json("validation", &canonical_value(&report)?)?;
            Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Stratify { scene } => {
            let scene = checked_scene(scene, config)?;
            sink.json("strata", &stratify(&scene, config)?)?;
            Ok(EXIT_OK)
        }
        Command::Trace {
            scene,
            grid,
            seeds,
            no_polyline,
        } => {
            let scene = checked_scene(scene, config)?;
            let seeds: Vec<Vec<f64>> = match seeds {
                Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
                None => boundary_seeds(
                    &scene,
                    grid.or(config.seed_grid).unwrap_or(64),
                    RNG_SEED,
                )?,
            };
            let (doc, code) = trace_document(&scene, &seeds, *no_polyline)?;
            sink.json("trajectories", &doc)?;
            Ok(code)
        }
        Command::Complex { scene, dot, svg } => {
            let scene = checked_scene(scene, config)?;
            let complex = build_complex(&scene, config)?;
            let mut doc = complex_document(&complex)?;
            if *dot {
                let text = to_dot(&complex);
                match sink.dir {
                    Some(_) => sink.text("complex.dot", &text, false)?,
                    None => {
                        doc.insert("dot".into(), Value::String(text));
                    }
                }
            }
            if *svg {
                if scene.dimension() != 2 {
                    return Err(Error::Unsupported("SVG output needs a planar scene".into()));
                }
                let text = complex_svg(&scene, &complex);
                match sink.dir {
                    Some(_) => sink.text("complex.svg", &text, false)?,
                    None => {
                        doc.insert("svg".into(), Value::String(text));
                    }
                }
            }
            let ok = fiber_statistics(&complex).ok() && filtration_nested(&complex);
            sink.json("complex", &Value::Object(doc))?;
            Ok(if ok { EXIT_OK } else { EXIT_INVARIANT })
        }
        Command::Holography { stage } => holography(stage, config, &sink),
        Command::Roundtrip { omega, epsilon } => {
            let words = omega
                .iter()
                .map(|w| parse_omega(w))
                .collect::<Result<Vec<_>>>()?;
            let reports = words
                .iter()
                .map(|w| roundtrip(w, true, *epsilon))
                .collect::<Result<Vec<_>>>()?;
            let passed = reports.iter().all(|r| r.passed);
            sink.json("roundtrip", &canonical_value(&reports)?)?;
            Ok(if passed { EXIT_OK } else { EXIT_INVARIANT })
        }
        Command::Report { scene, probes } => {
            let (doc, code) = report(scene, config, *probes);
            sink.json("report", &Value::Object(doc))?;
            Ok(code)
        }
    }
}

fn holography(stage: &Holography, config: &RunConfig, sink: &Sink) -> Result<i32> {
    match stage {
        Holography::Extract { scene, strict } => {
            let scene = checked_scene(scene, config)?;
            let data = extract_boundary_data(&scene, density(config, &scene), *strict)?;
            sink.json("boundary_data", &canonical_value(&data)?)?;
            Ok(EXIT_OK)
        }
        Holography::Reconstruct { data } => {
            let data = BoundaryData::from_json(&fs::read_to_string(data)?)?;
            let rec = reconstruct(&data)?;
            sink.json("reconstruction", &canonical_value(&rec)?)?;
            Ok(EXIT_OK)
        }
        Holography::Verify {
            scene,
            data,
            probes,
        } => {
            let scene = checked_scene(scene, config)?;
            let data = BoundaryData::from_json(&fs::read_to_string(data)?)?;
            let rec = reconstruct(&data)?;
            let opts = VerifyOptions {
                probes: *probes,
                ..VerifyOptions::default()
            };
            let report = verify_reconstruction(&scene, &data, &rec, opts)?;
            let verdicts = holography_verdicts(&report);
            let ok = verdicts.values().all(|v| v == &Value::Bool(true));
            sink.json(
                "verification",
                &json!({ "report": canonical_value(&report)?, "verdicts": verdicts }),
            )?;
            Ok(if ok { EXIT_OK } else { EXIT_INVARIANT })
        }
    }
}

fn stratify(scene: &Scene, config: &RunConfig) -> Result<Value> {
    let points = if scene.dimension() == 2 {
        tangency_locus_2d(scene)?
    } else {
        stratum_sample_3d(scene, density(config, scene), RNG_SEED)?
    };
    let counts = stratum_counts(&points);
    // In space the generic shell samples are only counted.
    let listed: Vec<_> = points
        .iter()
        .filter(|p| scene.dimension() == 2 || p.multiplicity >= 2)
        .collect();
    canonical_value(&json!({
        "dimension": scene.dimension(),
        "samples": points.len(),
        "counts": counts,
        "points": listed,
    }))
}

/// Trajectory records in seed order; failed seeds carry their error.
/// Exit 2 if any seed failed, 3 if a divisor breaks the parity law.
fn trace_document(scene: &Scene, seeds: &[Vec<f64>], no_polyline: bool) -> Result<(Value, i32)> {
    let mut code = EXIT_OK;
    let mut out = Vec::with_capacity(seeds.len());
    for (seed, r) in seeds.iter().zip(trace_batch(scene, seeds)) {
        match r {
            Ok(mut rec) => {
                if !check_parity(&rec.divisor) {
                    code = code.max(EXIT_INVARIANT);
                }
                if no_polyline {
                    rec.polyline.clear();
                }
                let mut v = canonical_value(&rec)?;
                if no_polyline {
                    if let Value::Object(m) = &mut v {
                        m.remove("polyline");
                    }
                }
                out.push(v);
            }
            Err(e) => {
                code = code.max(EXIT_PIPELINE);
                out.push(json!({ "seed": canonical_value(seed)?, "error": e.to_string() }));
            }
        }
    }
    Ok((Value::Array(out), code))
}

fn build_complex(scene: &Scene, config: &RunConfig) -> Result<QuotientComplex> {
    if scene.dimension() == 2 {
        build_complex_2d(scene)
    } else {
        build_complex_3d(scene, density(config, scene), RNG_SEED)
    }
}

fn filtration_nested(complex: &QuotientComplex) -> bool {
    (1..=complex.dimension).all(|k| filtration(complex, k + 1).is_subset(&filtration(complex, k)))
}

fn complex_document(complex: &QuotientComplex) -> Result<Map<String, Value>> {
    let adjacency: Vec<Value> = complex
        .one_cells()
        .filter_map(|c| c.ends.map(|(a, b)| json!([c.id, a, b])))
        .collect();
    let filtrations: Map<String, Value> = (1..=complex.dimension)
        .map(|k| (k.to_string(), json!(filtration(complex, k))))
        .collect();
    let betti = match betti(complex) {
        Ok(b) => json!(b),
        Err(Error::Unsupported(_)) => Value::Null,
        Err(e) => return Err(e),
    };
    let doc = json!({
        "mode": complex.mode,
        "dimension": complex.dimension,
        "vertices": complex.vertex_count(),
        "edges": complex.edge_count(),
        "degree_sequence": complex.degree_sequence(),
        "cells": complex.cells,
        "adjacency": adjacency,
        "classes": complex.classes,
        "trace_failures": complex.trace_failures,
        "fibers": fiber_statistics(complex),
        "filtration": filtrations,
        "filtration_nested": filtration_nested(complex),
        "betti": betti,
    });
    match canonical_value(&doc)? {
        Value::Object(m) => Ok(m),
        _ => unreachable!("complex document is an object"),
    }
}

fn holography_verdicts(report: &crate::holo::ReconstructionReport) -> Map<String, Value> {
    let mut v = Map::new();
    v.insert("order_axioms".into(), json!(report.order_axiom_failures == 0));
    v.insert("class_partition".into(), json!(report.class_count_match));
    v.insert("leaf_consistency".into(), json!(report.leaf_consistency >= 1.0));
    if let Some(a) = report.interior_acceptance {
        v.insert("interior_acceptance".into(), json!(a >= 0.999));
    }
    if let Some(iso) = report.graph_isomorphic {
        v.insert("graph_isomorphic".into(), json!(iso));
    }
    v
}

/// The whole pipeline. Stops at the first hard failure and keeps what was
/// computed before it.
fn report(path: &Path, config: &RunConfig, probes: usize) -> (Map<String, Value>, i32) {
    let mut doc = Map::new();
    let mut verdicts = Map::new();
    let outcome = report_stages(path, config, probes, &mut doc, &mut verdicts);
    let passed = outcome.is_ok() && verdicts.values().all(|v| v == &Value::Bool(true));
    let code = match &outcome {
        Err(e) => {
            doc.insert("error".into(), json!(e.to_string()));
            exit_code(e)
        }
        Ok(()) if passed => EXIT_OK,
        Ok(()) => EXIT_INVARIANT,
    };
    doc.insert("verdicts".into(), Value::Object(verdicts));
    doc.insert("passed".into(), json!(passed));
    (doc, code)
}

fn report_stages(
    path: &Path,
    config: &RunConfig,
    probes: usize,
    doc: &mut Map<String, Value>,
    verdicts: &mut Map<String, Value>,
) -> Result<()> {
    let scene = load_scene(path, config)?;
    doc.insert("scene".into(), canonical_value(&scene.to_file_struct())?);

    let validation: ValidationReport = validate(&scene);
    doc.insert("validation".into(), canonical_value(&validation)?);
    verdicts.insert("validation".into(), json!(validation.passed));
    if !validation.passed {
        return Err(Error::ValidationFailed(
            validation
                .failures
                .iter()
                .map(|f| f.message.clone())
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }

    doc.insert("strata".into(), stratify(&scene, config)?);

    let complex = build_complex(&scene, config)?;
    let cx = complex_document(&complex)?;
    let fibers_ok = fiber_statistics(&complex).ok();
    let betti = cx.get("betti").cloned().unwrap_or(Value::Null);
    doc.insert("complex".into(), Value::Object(cx));
    verdicts.insert("fiber_bounds".into(), json!(fibers_ok));
    verdicts.insert("filtration_nested".into(), json!(filtration_nested(&complex)));
    let divisors_ok = complex.classes.iter().all(|c| {
        let d = &c.representative.divisor;
        let f_increasing = d.contacts.windows(2).all(|w| w[0].fval < w[1].fval);
        check_parity(d)
            && c.omega.norm() % 2 == 0
            && f_increasing
            && gamma_multiplicities(d) == norms(&c.omega)
    });
    verdicts.insert("divisor_laws".into(), json!(divisors_ok));
    if let (Some(reference), Value::Array(_)) = (scene.reference_betti(), &betti) {
        verdicts.insert("betti_reference".into(), json!(betti == json!(reference)));
    }

    let data = extract_boundary_data(&scene, density(config, &scene), false)?;
    let violations = order_violations(&data);
    let rec = reconstruct(&data)?;
    let opts = VerifyOptions {
        probes,
        ..VerifyOptions::default()
    };
    let report = verify_reconstruction(&scene, &data, &rec, opts)?;
    let model = rec.model.as_ref().map(|m| {
        json!({ "vertices": m.vertices.len(), "edges": m.edges, "betti": m.betti })
    });
    doc.insert(
        "holography".into(),
        canonical_value(&json!({
            "samples": data.samples.len(),
            "relations": data.relations.len(),
            "order_violations": violations,
            "classes": rec.classes.len(),
            "model": model,
            "model_error": rec.model_error,
            "report": report,
        }))?,
    );
    for (k, v) in holography_verdicts(&report) {
        verdicts.insert(format!("holography_{k}"), v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_and_help_codes() {
        assert_eq!(run(["trajspace"]), EXIT_USAGE);
        assert_eq!(run(["trajspace", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["trajspace", "--help"]), EXIT_OK);
        assert_eq!(run(["trajspace", "--version"]), EXIT_OK);
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::OrderViolation("x".into())), EXIT_INVARIANT);
        assert_eq!(exit_code(&Error::ValidationFailed("x".into())), EXIT_VALIDATION);
        assert_eq!(exit_code(&Error::Unsupported("x".into())), EXIT_PIPELINE);
    }
}
