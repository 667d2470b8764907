//! Descent direction on `S`: the tangent vector closest to `−u`.
//!
//! With `v = (−Δ_p)^{−1}(|u|^{p−2}u)` and `ν = ∫|u|^{p−2}u v`, the direction is
//! `w = −u + v/ν`. Then `⟨J'(u), w⟩ = 0` and `⟨I'(u), w⟩ ≤ 0`, with equality
//! exactly at eigenfunctions, where `(1/ν)^{p−1}` is the eigenvalue.

use crate::error::{Error, Result};
use crate::fem::{DualVector, FeFunction, VariationalSpace};
use crate::plap_inverse::{try_invert_p_laplacian, AlConfig, AlState};

#[derive(Clone, Debug)]
pub struct DescentResult {
    pub w: FeFunction,
    pub v: FeFunction,
    pub nu: f64,
    pub w_norm: f64,
    /// Final state of the inner solve, reusable as a warm start.
    pub al_state: AlState,
    pub al_iterations: usize,
    /// False when the inner solve stopped at its iteration cap.
    pub al_converged: bool,
}

impl DescentResult {
    pub fn eigenvalue_estimate(&self, p: f64) -> Result<f64> {
        eigenvalue_estimate(self.nu, p)
    }
}

/// `(1/ν)^{p−1}`
pub fn eigenvalue_estimate(nu: f64, p: f64) -> Result<f64> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::NonPositiveNu(nu));
    }
    Ok(nu.powf(1.0 - p))
}

pub fn descent_direction<V: VariationalSpace>(space: &V, u: &FeFunction, p: f64, al: &AlConfig) -> Result<DescentResult> {
    descent_direction_from(space, u, p, al, None)
}

/// As [`descent_direction`], warm-starting the inner solve from `warm`.
pub fn descent_direction_from<V: VariationalSpace>(
    space: &V,
    u: &FeFunction,
    p: f64,
    al: &AlConfig,
    warm: Option<&AlState>,
) -> Result<DescentResult> {
    let j = space.eval_j(u, p)?;
    if (j - 1.0).abs() > 1e-8 {
        return Err(Error::NotOnConstraint(j));
    }
    let density = DualVector::from_vec_unchecked(space.density_action(u.coeffs(), p));
    let (sol, al_converged) = try_invert_p_laplacian(space, &density, p, al, warm)?;
    if !al_converged {
        log::warn!(
            "inverse p-Laplacian stopped after {} iterations at residual {:.3e}",
            sol.history.len(),
            sol.state.residual
        );
    }
    let nu = density.pair(&sol.u);
    if !(nu > 0.0) {
        return Err(Error::NonPositiveNu(nu));
    }
    let w = u.scaled(-1.0).add_scaled(1.0 / nu, &sol.u);
    let w_norm = space.norm_w1p(&w, p)?;
    Ok(DescentResult {
        w,
        v: sol.u,
        nu,
        w_norm,
        al_iterations: sol.history.len(),
        al_state: sol.state,
        al_converged,
    })
}
