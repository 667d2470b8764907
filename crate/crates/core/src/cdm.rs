//! Constrained descent: explicit Euler steps along the descent direction,
//! each followed by rescaling onto `S`, converging to the first eigenpair.

use serde::{Deserialize, Serialize};

use crate::descent::{descent_direction_from, eigenvalue_estimate, DescentResult};
use crate::error::{Error, Result};
use crate::fem::{FeFunction, FeSpace, VariationalSpace};
use crate::plap_inverse::AlConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CdmConfig {
    pub dt0: f64,
    pub dt_min: f64,
    pub w_tol: f64,
    pub max_iter: usize,
    pub al: AlConfig,
}

impl Default for CdmConfig {
    fn default() -> Self {
        CdmConfig {
            dt0: 1.0,
            dt_min: 1e-6,
            w_tol: 1e-6,
            max_iter: 500,
            al: AlConfig::default(),
        }
    }
}

impl CdmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt0 > 0.0 && self.dt_min > 0.0 && self.dt_min < self.dt0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < dt_min < dt0, got dt_min = {}, dt0 = {}",
                self.dt_min, self.dt0
            )));
        }
        if !(self.w_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("w_tol and max_iter must be positive".into()));
        }
        self.al.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub i_value: f64,
    pub w_norm: f64,
    pub dt: f64,
}

#[derive(Clone, Debug)]
pub struct EigenpairResult {
    /// `(1/ν)^{p−1}` at the final iterate.
    pub lambda: f64,
    /// `I(u)/J(u)` at the final iterate.
    pub rayleigh: f64,
    pub u: FeFunction,
    pub w_norm_final: f64,
    pub iterations: usize,
    pub history: Vec<HistoryEntry>,
    /// False when the estimate and the Rayleigh quotient differ by more than 0.1%.
    pub consistent: bool,
    /// Total inner iterations of the inverse p-Laplacian.
    pub al_iterations: usize,
}

impl EigenpairResult {
    pub(crate) fn from_descent<V: VariationalSpace>(
        space: &V,
        u: FeFunction,
        d: &DescentResult,
        p: f64,
        iterations: usize,
        history: Vec<HistoryEntry>,
        al_iterations: usize,
    ) -> Result<Self> {
        let lambda = eigenvalue_estimate(d.nu, p)?;
        let rayleigh = space.rayleigh(&u, p)?;
        Ok(EigenpairResult {
            lambda,
            rayleigh,
            u,
            w_norm_final: d.w_norm,
            iterations,
            history,
            consistent: ((lambda - rayleigh) / rayleigh).abs() <= 1e-3,
            al_iterations,
        })
    }

    /// CSV with header `iter,I,w_norm,dt`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,I,w_norm,dt\n");
        for h in &self.history {
            s.push_str(&format!("{},{:e},{:e},{:e}\n", h.iter, h.i_value, h.w_norm, h.dt));
        }
        s
    }
}

/// Positive initial guess: distance to the Dirichlet boundary, scaled onto `S`.
pub fn default_initial_guess(space: &FeSpace, p: f64) -> Result<FeFunction> {
    let dist = space.mesh().distance_to_dirichlet();
    let u = space.from_nodal_values(&dist)?;
    space.scale_to_s(&u, p)
}

/// Inner tolerance tied to the current step size: far from an eigenfunction
/// a rough direction suffices.
pub(crate) fn inner_config(al: &AlConfig, w_norm: f64) -> AlConfig {
    AlConfig {
        tol: (1e-2 * w_norm).clamp(al.tol, al.tol.max(1e-4)),
        ..al.clone()
    }
}

/// Runs the descent from `e0` (scaled onto `S` first).
pub fn run_cdm<V: VariationalSpace>(space: &V, e0: &FeFunction, p: f64, cfg: &CdmConfig) -> Result<EigenpairResult> {
    cfg.validate()?;
    let mut u = space.scale_to_s(e0, p)?;
    let mut i_u = space.eval_i(&u, p)?;
    let mut d = descent_direction_from(space, &u, p, &inner_config(&cfg.al, f64::INFINITY), None)?;
    let mut al_iterations = d.al_iterations;
    let mut history = vec![HistoryEntry {
        iter: 0,
        i_value: i_u,
        w_norm: d.w_norm,
        dt: 0.0,
    }];
    log::debug!("cdm p={p}: I0={i_u:.8} |w|={:.3e}", d.w_norm);
    let mut tight = false;
    for iter in 1..=cfg.max_iter {
        if d.w_norm <= cfg.w_tol {
            return EigenpairResult::from_descent(space, u, &d, p, iter - 1, history, al_iterations);
        }
        let mut dt = cfg.dt0;
        let mut found = None;
        while dt >= cfg.dt_min {
            let cand = space.scale_to_s(&u.add_scaled(dt, &d.w), p)?;
            let i_c = space.eval_i(&cand, p)?;
            if i_c <= i_u {
                found = Some((cand, i_c));
                break;
            }
            dt *= 0.5;
        }
        let Some((next, i_next)) = found else {
            if !tight {
                // a loose inner solve may have spoilt the direction
                tight = true;
                d = descent_direction_from(space, &u, p, &cfg.al, Some(&d.al_state))?;
                al_iterations += d.al_iterations;
                continue;
            }
            let best = EigenpairResult::from_descent(space, u, &d, p, iter - 1, history, al_iterations)?;
            return Err(Error::Stalled {
                method: "cdm",
                iterations: iter - 1,
                dt_min: cfg.dt_min,
                w_norm: d.w_norm,
                best: Box::new(best),
            });
        };
        u = next;
        i_u = i_next;
        let al = inner_config(&cfg.al, d.w_norm);
        tight = al.tol <= cfg.al.tol;
        d = descent_direction_from(space, &u, p, &al, Some(&d.al_state))?;
        al_iterations += d.al_iterations;
        log::debug!("cdm p={p} it={iter}: I={i_u:.10} |w|={:.3e} dt={dt} al={}", d.w_norm, d.al_iterations);
        history.push(HistoryEntry {
            iter,
            i_value: i_u,
            w_norm: d.w_norm,
            dt,
        });
    }
    if d.w_norm <= cfg.w_tol {
        return EigenpairResult::from_descent(space, u, &d, p, cfg.max_iter, history, al_iterations);
    }
    let w_norm = d.w_norm;
    let best = EigenpairResult::from_descent(space, u, &d, p, cfg.max_iter, history, al_iterations)?;
    Err(Error::MaxIterations {
        method: "cdm",
        iterations: cfg.max_iter,
        w_norm,
        best: Box::new(best),
    })
}
