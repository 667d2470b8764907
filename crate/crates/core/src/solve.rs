//! Eigenpairs of a domain on a hierarchy of meshes: solve on a coarse mesh,
//! then refine uniformly and restart every solver from the prolongated
//! result of the previous level.

use serde::Serialize;

use crate::cdm::{default_initial_guess, run_cdm, CdmConfig, EigenpairResult};
use crate::cmpa::{em_preset, run_cmpa, run_cmpa_from_path, transfer_path, CmpaConfig, CmpaResult};
use crate::error::Result;
use crate::fem::{FeFunction, FeSpace};
use crate::mesh::{build_domain, DomainSpec};

/// Intermediate point of the initial mountain-pass path.
#[derive(Clone, Debug)]
pub enum EmSource {
    Preset(String),
    /// Values at every vertex of the coarsest mesh.
    Nodal(Vec<f64>),
}

impl Default for EmSource {
    fn default() -> Self {
        EmSource::Preset("two-bump".into())
    }
}

#[derive(Clone, Debug)]
pub struct LevelConfig {
    /// Target size of the coarsest mesh.
    pub triangles: usize,
    /// Number of uniform refinements after the coarsest solve.
    pub refine: usize,
    pub cdm: CdmConfig,
    pub cmpa: CmpaConfig,
    pub em: EmSource,
}

impl Default for LevelConfig {
    fn default() -> Self {
        LevelConfig {
            triangles: 5000,
            refine: 0,
            cdm: CdmConfig::default(),
            cmpa: CmpaConfig::default(),
            em: EmSource::default(),
        }
    }
}

/// Per-level record of a hierarchy run.
#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub triangles: usize,
    pub vertices: usize,
    pub h: f64,
    pub lambda1: f64,
    pub cdm_iterations: usize,
    pub cdm_al_iterations: usize,
    pub lambda2: Option<f64>,
    pub cmpa_iterations: Option<usize>,
    pub cmpa_al_iterations: Option<usize>,
}

impl LevelSummary {
    fn new(space: &FeSpace, first: &EigenpairResult, second: Option<&CmpaResult>) -> Self {
        let mesh = space.mesh();
        LevelSummary {
            triangles: mesh.triangles().len(),
            vertices: mesh.vertices().len(),
            h: mesh.h(),
            lambda1: first.lambda,
            cdm_iterations: first.iterations,
            cdm_al_iterations: first.al_iterations,
            lambda2: second.map(|s| s.eigenpair.lambda),
            cmpa_iterations: second.map(|s| s.eigenpair.iterations),
            cmpa_al_iterations: second.map(|s| s.eigenpair.al_iterations),
        }
    }
}

/// Finest-level results plus the per-level history.
#[derive(Clone, Debug)]
pub struct Solution {
    pub space: FeSpace,
    pub first: EigenpairResult,
    pub second: Option<CmpaResult>,
    pub levels: Vec<LevelSummary>,
}

/// First eigenpair of `spec`, and the second one as well when `second` is set.
pub fn solve_levels(spec: &DomainSpec, p: f64, cfg: &LevelConfig, second: bool) -> Result<Solution> {
    let mut space = FeSpace::new(build_domain(spec, cfg.triangles)?)?;
    let e0 = default_initial_guess(&space, p)?;
    let mut first = run_cdm(&space, &e0, p, &cfg.cdm)?;
    let mut pass = if second {
        let em = match &cfg.em {
            EmSource::Preset(name) => em_preset(&space, name)?,
            EmSource::Nodal(values) => space.from_nodal_values(values)?,
        };
        Some(run_cmpa(&space, &first.u, &em, p, &cfg.cmpa)?)
    } else {
        None
    };
    let mut levels = vec![LevelSummary::new(&space, &first, pass.as_ref())];
    for _ in 0..cfg.refine {
        let (mesh, parents) = space.mesh().refine_with_parents();
        let fine = FeSpace::new(mesh)?;
        let lift = |u: &FeFunction| fine.prolongate(&space, &parents, u);
        let next_first = run_cdm(&fine, &lift(&first.u)?, p, &cfg.cdm)?;
        let next_pass = match &pass {
            Some(prev) => {
                let path = transfer_path(&fine, &prev.path, &next_first.u, p, lift)?;
                Some(run_cmpa_from_path(&fine, path, p, &cfg.cmpa)?)
            }
            None => None,
        };
        levels.push(LevelSummary::new(&fine, &next_first, next_pass.as_ref()));
        first = next_first;
        pass = next_pass;
        space = fine;
    }
    Ok(Solution {
        space,
        first,
        second: pass,
        levels,
    })
}
