//! The subcommands. Each p value is an isolated task producing a CSV row, a
//! set of output files and a manifest record; the driver writes them in p
//! order, so outputs do not depend on the worker count.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use plap_core::analysis::{constrained_eigen_with_symmetry, generators, symmetry_defect, symmetry_report_csv, SymmetryClass, SymmetryRow};
use plap_core::cdm::EigenpairResult;
use plap_core::io::{format_opt, format_sig, read_field, write_field, write_mesh, write_vtk};
use plap_core::radial::{run_radial_cdm, run_radial_cmpa, RadialSpace};
use plap_core::reference::{asymptotic_constants, disk_constants, Source, Value};
use plap_core::solve::{solve_levels, EmSource, LevelConfig, Solution};
use plap_core::{DomainSpec, Error, FeSpace};
use serde_json::{json, Value as Json};

use crate::config::RunConfig;
use crate::output::{csv, p_label, OutDir};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// First eigenpair by constrained descent.
    First,
    /// First and second eigenpairs.
    Second,
    /// First and second eigenpairs plus constrained eigenvalues of the chosen classes.
    Sweep,
    /// First and second radial eigenpairs of the unit disk.
    Radial,
    /// Closed-form limits for p → 1 and p → ∞.
    Reference,
    /// Second eigenpair, constrained eigenvalues and symmetry defects.
    Symmetry,
}

const EM_PRESETS: [&str; 3] = ["two-bump", "ring", "asym"];

#[derive(Default)]
struct Point {
    row: Vec<String>,
    files: Vec<(String, String)>,
    record: serde_json::Map<String, Json>,
    diagnostics: Vec<Json>,
    symmetry: Option<SymmetryRow>,
}

impl Point {
    fn new(p: f64) -> Self {
        let mut pt = Point::default();
        pt.row.push(format_sig(p));
        pt.record.insert("p".into(), json!(p));
        pt
    }

    fn fail(&mut self, stage: &str, err: &Error) {
        log::warn!("{stage} failed: {err}");
        let mut d = json!({ "stage": stage, "error": err.to_string() });
        if let Error::Stalled { best, iterations, w_norm, .. } | Error::MaxIterations { best, iterations, w_norm, .. } = err {
            d["iterations"] = json!(iterations);
            d["w_norm"] = json!(w_norm);
            d["last_lambda"] = json!(best.lambda);
            d["last_rayleigh"] = json!(best.rayleigh);
        }
        if let Error::AlNotConverged { iterations, last_residual, .. } = err {
            d["iterations"] = json!(iterations);
            d["last_residual"] = json!(last_residual);
        }
        self.diagnostics.push(d);
    }
}

fn eigen_record(e: &EigenpairResult) -> Json {
    json!({
        "lambda": e.lambda,
        "rayleigh": e.rayleigh,
        "iterations": e.iterations,
        "al_iterations": e.al_iterations,
        "w_norm_final": e.w_norm_final,
        "consistent": e.consistent,
    })
}

pub struct Runner {
    pub command: Command,
    pub cfg: RunConfig,
    spec: DomainSpec,
    level: LevelConfig,
    classes: Vec<SymmetryClass>,
}

impl Runner {
    pub fn new(command: Command, cfg: RunConfig) -> Result<Self> {
        let spec = cfg.domain.resolve()?;
        let em = if EM_PRESETS.contains(&cfg.em.as_str()) {
            EmSource::Preset(cfg.em.clone())
        } else {
            let text = std::fs::read_to_string(&cfg.em)
                .with_context(|| format!("--em {:?} is neither a preset ({}) nor a readable field file", cfg.em, EM_PRESETS.join(", ")))?;
            let coarse = FeSpace::new(plap_core::mesh::build_domain(&spec, cfg.triangles)?)?;
            let u = read_field(&coarse, &text).with_context(|| format!("reading {}", cfg.em))?;
            EmSource::Nodal(coarse.nodal_values(&u))
        };
        let level = LevelConfig {
            triangles: cfg.triangles,
            refine: cfg.refine,
            cdm: cfg.cdm.clone(),
            cmpa: cfg.cmpa.clone(),
            em,
        };
        let classes = if cfg.classes.is_empty() && command == Command::Symmetry {
            SymmetryClass::ALL.into_iter().filter(|&c| generators(&spec, c).is_ok()).collect()
        } else {
            for &c in &cfg.classes {
                generators(&spec, c)?;
            }
            cfg.classes.clone()
        };
        if command == Command::Radial && spec != DomainSpec::disk(1.0) {
            bail!("the radial method is implemented for the unit disk only");
        }
        Ok(Runner {
            command,
            cfg,
            spec,
            level,
            classes,
        })
    }

    /// Half domains get half the triangles, matching the full mesh density,
    /// and a preset midpoint since a nodal one only fits the full mesh.
    fn half_level(&self) -> LevelConfig {
        let mut level = self.level.clone();
        level.triangles = (level.triangles / 2).max(8);
        if let EmSource::Nodal(_) = level.em {
            level.em = EmSource::default();
        }
        level
    }

    pub fn run(&self, out: &mut OutDir) -> Result<Json> {
        let start = Instant::now();
        let mut manifest = json!({
            "command": self.command,
            "config": self.cfg,
            "domain": self.spec,
            "classes": self.classes.iter().map(|c| c.name()).collect::<Vec<_>>(),
            "version": env!("CARGO_PKG_VERSION"),
        });
        if self.command == Command::Reference {
            out.write("reference.csv", &self.reference()?)?;
            manifest["wall_time_s"] = json!(start.elapsed().as_secs_f64());
            return Ok(manifest);
        }
        if self.command != Command::Radial {
            let mut mesh = plap_core::mesh::build_domain(&self.spec, self.cfg.triangles)?;
            for _ in 0..self.cfg.refine {
                mesh = mesh.refine();
            }
            manifest["mesh"] = json!(mesh.metrics());
            manifest["mesh"]["vertices"] = json!(mesh.vertices().len());
            out.write("mesh.txt", &write_mesh(&mesh))?;
        }
        let ps = &self.cfg.p;
        let points = parallel_map(ps.len(), self.cfg.threads, |i| self.point(ps[i]));
        let mut rows = Vec::new();
        let mut records = Vec::new();
        let mut sym = Vec::new();
        let mut failures = 0;
        for (p, pt) in ps.iter().zip(points) {
            for (name, contents) in &pt.files {
                out.write(name, contents)?;
            }
            if !pt.diagnostics.is_empty() {
                failures += 1;
                out.write_json(&format!("diagnostics_p{}.json", p_label(*p)), &json!({ "p": p, "failures": pt.diagnostics }))?;
            }
            rows.push(pt.row);
            sym.extend(pt.symmetry);
            records.push(Json::Object(pt.record));
        }
        let (name, table) = self.table(&rows, &sym);
        out.write(name, &table)?;
        manifest["points"] = json!(records);
        manifest["failures"] = json!(failures);
        manifest["wall_time_s"] = json!(start.elapsed().as_secs_f64());
        Ok(manifest)
    }

    fn table(&self, rows: &[Vec<String>], sym: &[SymmetryRow]) -> (&'static str, String) {
        match self.command {
            Command::First => ("eigenvalues.csv", csv("p,lambda1", rows)),
            Command::Second => ("eigenvalues.csv", csv("p,lambda1,lambda2", rows)),
            Command::Sweep => {
                let mut h = String::from("p,lambda1,lambda2");
                for c in &self.classes {
                    h.push_str(&format!(",lambda_{c}"));
                }
                ("eigenvalues.csv", csv(&h, rows))
            }
            Command::Radial => ("radial.csv", csv("p,lambda1,lambda2_rad", rows)),
            Command::Symmetry => ("symmetry.csv", symmetry_report_csv(&self.classes, sym)),
            Command::Reference => unreachable!("reference has no p rows"),
        }
    }

    fn point(&self, p: f64) -> Point {
        let start = Instant::now();
        let mut pt = Point::new(p);
        match self.command {
            Command::First => self.eigen_point(p, false, &mut pt),
            Command::Second => self.eigen_point(p, true, &mut pt),
            Command::Sweep => {
                self.eigen_point(p, true, &mut pt);
                let mut recs = Vec::new();
                for &c in &self.classes {
                    let lambda = match constrained_eigen_with_symmetry(&self.spec, c, p, &self.half_level()) {
                        Ok(s) => Some(s.lambda),
                        Err(e) => {
                            pt.fail(&format!("constrained {c}"), &e);
                            None
                        }
                    };
                    pt.row.push(format_opt(lambda));
                    recs.push(json!({ "class": c.name(), "lambda": lambda }));
                }
                pt.record.insert("classes".into(), json!(recs));
            }
            Command::Radial => self.radial_point(p, &mut pt),
            Command::Symmetry => self.symmetry_point(p, &mut pt),
            Command::Reference => unreachable!("reference has no p rows"),
        }
        pt.record.insert("wall_time_s".into(), json!(start.elapsed().as_secs_f64()));
        pt.record.insert("ok".into(), json!(pt.diagnostics.is_empty()));
        pt
    }

    fn solve(&self, p: f64, second: bool, pt: &mut Point) -> Option<Solution> {
        match solve_levels(&self.spec, p, &self.level, second) {
            Ok(s) => Some(s),
            Err(e) => {
                pt.fail(if second { "second eigenpair" } else { "first eigenpair" }, &e);
                if second {
                    // keep λ₁ when only the mountain pass failed
                    self.solve(p, false, pt)
                } else {
                    None
                }
            }
        }
    }

    fn eigen_point(&self, p: f64, second: bool, pt: &mut Point) {
        let sol = self.solve(p, second, pt);
        let lambda1 = sol.as_ref().map(|s| s.first.lambda);
        let lambda2 = sol.as_ref().and_then(|s| s.second.as_ref()).map(|s| s.eigenpair.lambda);
        pt.row.push(format_opt(lambda1));
        if second {
            pt.row.push(format_opt(lambda2));
        }
        if let Some(sol) = sol {
            self.eigen_files(p, &sol, pt);
        }
    }

    fn eigen_files(&self, p: f64, sol: &Solution, pt: &mut Point) {
        let l = p_label(p);
        let space = &sol.space;
        let mut fields = vec![("u1", &sol.first.u)];
        pt.files.push((format!("u1_p{l}.field"), write_field(space, &sol.first.u)));
        pt.files.push((format!("trace_cdm_p{l}.csv"), sol.first.history_csv()));
        pt.record.insert("first".into(), eigen_record(&sol.first));
        if let Some(s) = &sol.second {
            fields.push(("u2", &s.eigenpair.u));
            pt.files.push((format!("u2_p{l}.field"), write_field(space, &s.eigenpair.u)));
            pt.files.push((format!("trace_cmpa_p{l}.csv"), s.trace_csv()));
            pt.record.insert("second".into(), eigen_record(&s.eigenpair));
        }
        match write_vtk(space, &format!("{} p={l}", self.spec.name()), &fields) {
            Ok(v) => pt.files.push((format!("eigen_p{l}.vtk"), v)),
            Err(e) => pt.fail("vtk", &e),
        }
        pt.record.insert("levels".into(), json!(sol.levels));
    }

    fn radial_point(&self, p: f64, pt: &mut Point) {
        let l = p_label(p);
        let space = match RadialSpace::new(self.cfg.intervals) {
            Ok(s) => s,
            Err(e) => {
                pt.fail("radial grid", &e);
                pt.row.extend([String::new(), String::new()]);
                return;
            }
        };
        pt.record.insert("intervals".into(), json!(self.cfg.intervals));
        let first = run_radial_cdm(&space, p, &self.cfg.cdm).map_err(|e| pt.fail("radial first eigenpair", &e)).ok();
        let second = first.as_ref().and_then(|f| {
            run_radial_cmpa(&space, &f.u, None, p, &self.cfg.cmpa)
                .map_err(|e| pt.fail("radial second eigenpair", &e))
                .ok()
        });
        pt.row.push(format_opt(first.as_ref().map(|f| f.lambda)));
        pt.row.push(format_opt(second.as_ref().map(|s| s.eigenpair.lambda)));
        for (tag, e) in [("u1", first.as_ref()), ("u2", second.as_ref().map(|s| &s.eigenpair))] {
            if let Some(e) = e {
                match space.profile_csv(&e.u, p) {
                    Ok(s) => pt.files.push((format!("radial_{tag}_p{l}.csv"), s)),
                    Err(err) => pt.fail("radial profile", &err),
                }
                pt.record.insert(if tag == "u1" { "first" } else { "second" }.into(), eigen_record(e));
            }
        }
        if let Some(f) = &first {
            pt.files.push((format!("radial_trace_cdm_p{l}.csv"), f.history_csv()));
        }
        if let Some(s) = &second {
            pt.files.push((format!("radial_trace_cmpa_p{l}.csv"), s.trace_csv()));
        }
    }

    fn symmetry_point(&self, p: f64, pt: &mut Point) {
        let sol = self.solve(p, true, pt);
        let u2 = sol.as_ref().and_then(|s| s.second.as_ref().map(|c| (&s.space, &c.eigenpair)));
        let mut row = SymmetryRow {
            p,
            lambda2: u2.map(|(_, e)| e.lambda),
            lambda_class: Vec::new(),
            defect_class: Vec::new(),
        };
        let mut recs = Vec::new();
        for &c in &self.classes {
            let lambda = match constrained_eigen_with_symmetry(&self.spec, c, p, &self.half_level()) {
                Ok(s) => Some(s.lambda),
                Err(Error::UnsupportedSymmetry { .. }) => None,
                Err(e) => {
                    pt.fail(&format!("constrained {c}"), &e);
                    None
                }
            };
            let defect = u2.and_then(|(space, e)| {
                symmetry_defect(space, &self.spec, &e.u, c)
                    .map_err(|err| pt.fail(&format!("defect {c}"), &err))
                    .ok()
            });
            row.lambda_class.push(lambda);
            row.defect_class.push(defect);
            recs.push(json!({ "class": c.name(), "lambda": lambda, "defect": defect }));
        }
        pt.symmetry = Some(row);
        pt.record.insert("classes".into(), json!(recs));
        if let Some(sol) = &sol {
            self.eigen_files(p, sol, pt);
        }
    }

    fn reference(&self) -> Result<String> {
        let cell = |name: &str, v: Value| {
            let source = match v.source {
                Source::Formula => "formula",
                Source::Constant => "constant",
            };
            vec![name.to_string(), format_sig(v.value), source.to_string()]
        };
        let rows = match &self.spec {
            DomainSpec::Disk { radius } if *radius == 1.0 => {
                let d = disk_constants();
                vec![
                    cell("h1", d.h1),
                    cell("h2", d.h2),
                    cell("h2_rad", d.h2_rad),
                    cell("Lambda1", d.lambda1),
                    cell("Lambda2", d.lambda2),
                    cell("Lambda2_rad", d.lambda2_rad),
                ]
            }
            spec => {
                let a = asymptotic_constants(spec)?;
                let mut rows = vec![cell("h1", a.h1)];
                if let Some(h2) = a.h2 {
                    rows.push(cell("h2", h2));
                }
                rows.push(cell("Lambda1", a.lambda1));
                rows.push(cell("Lambda2", a.lambda2));
                rows
            }
        };
        Ok(csv("name,value,source", &rows))
    }
}

/// `f(0..n)` on at most `threads` scoped workers, results in index order.
pub fn parallel_map<T: Send>(n: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = threads.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let mut out: Vec<(usize, T)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break local;
                        }
                        local.push((i, f(i)));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, t)| t).collect()
}
