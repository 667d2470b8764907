//! Inverse of the discrete p-Laplacian by an augmented Lagrangian splitting.
//!
//! For a right-hand side `f` the iteration keeps a cellwise flux `s ≈ ∇u` and
//! a multiplier `η`, and repeats
//!
//! 1. `r K u = f + ∇ᵀW(r s − η)` (one linear Laplace solve),
//! 2. per cell, `s = m q/|q|` where `q = r∇u + η` and `m^{p−1} + r m = |q|`,
//! 3. `η ← η + r(∇u − s)`,
//!
//! until both `‖∇u − s‖/‖∇u‖` and `r‖s_n − s_{n−1}‖/‖η‖` (in `L²`) are below
//! `tol`. The primal residual alone is not enough: for large `r` it becomes
//! tiny long before `u` is accurate. A fixed point satisfies
//! `η = |∇u|^{p−2}∇u` and `∇ᵀWη = f`, the discrete equation `−Δ_p u = f`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{check_exponent, norm, DualVector, FeFunction, VariationalSpace};
use crate::mesh::pairwise_sum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlConfig {
    /// Penalty parameter; `None` picks it from the exponent.
    pub r: Option<f64>,
    /// Relative tolerance on the primal and dual residuals.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative tolerance of the scalar flux equation.
    pub newton_tol: f64,
    /// Relative residual of the inner linear solves.
    pub linear_rel_tol: f64,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            r: None,
            tol: 1e-8,
            max_iter: 20_000,
            newton_tol: 1e-14,
            linear_rel_tol: 1e-11,
        }
    }
}

// Measured fastest penalties for right-hand sides of unit `L^p` density on
// domains of unit size; log-interpolated in p.
const PENALTY_TABLE: [(f64, f64); 9] = [
    (1.1, 1e4),
    (1.2, 300.0),
    (1.3, 30.0),
    (1.5, 3.0),
    (2.0, 1.0),
    (3.0, 0.35),
    (5.0, 0.1),
    (8.0, 0.03),
    (10.0, 0.015),
];

/// Default penalty parameter for exponent `p`.
pub fn default_penalty(p: f64) -> f64 {
    let t = &PENALTY_TABLE;
    if p <= t[0].0 {
        return t[0].1;
    }
    if p >= t[t.len() - 1].0 {
        return t[t.len() - 1].1;
    }
    let k = t.iter().position(|&(q, _)| q >= p).expect("inside table");
    let (p0, r0) = t[k - 1];
    let (p1, r1) = t[k];
    let w = (p - p0) / (p1 - p0);
    (r0.ln() * (1.0 - w) + r1.ln() * w).exp()
}

impl AlConfig {
    pub fn penalty<V: VariationalSpace>(&self, space: &V, p: f64) -> f64 {
        self.r.unwrap_or_else(|| space.default_penalty(p))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")))
            }
        };
        if let Some(r) = self.r {
            positive("r", r)?;
        }
        positive("tol", self.tol)?;
        positive("newton_tol", self.newton_tol)?;
        positive("linear_rel_tol", self.linear_rel_tol)?;
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Iterate of the splitting: `s` and `eta` hold `flux_dim` values per cell.
#[derive(Clone, Debug)]
pub struct AlState {
    pub u: FeFunction,
    pub s: Vec<f64>,
    pub eta: Vec<f64>,
    pub residual: f64,
    /// `r ‖s_n − s_{n−1}‖ / ‖η‖` of the last step.
    pub dual_residual: f64,
    pub iteration: usize,
}

impl AlState {
    pub fn zero<V: VariationalSpace>(space: &V) -> Self {
        let nf = space.n_cells() * space.flux_dim();
        AlState {
            u: FeFunction::zeros(space.n_free()),
            s: vec![0.0; nf],
            eta: vec![0.0; nf],
            residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iteration: 0,
        }
    }

    /// State consistent with an approximate solution `v`: `s = ∇v`, `η = |∇v|^{p−2}∇v`.
    pub fn from_solution<V: VariationalSpace>(space: &V, v: &FeFunction, p: f64) -> Self {
        let d = space.flux_dim();
        let mut s = vec![0.0; space.n_cells() * d];
        space.gradient(v.coeffs(), &mut s);
        let mut eta = s.clone();
        for e in eta.chunks_exact_mut(d) {
            let n = norm(e);
            let f = if n > 0.0 { n.powf(p - 2.0) } else { 0.0 };
            e.iter_mut().for_each(|c| *c *= f);
        }
        AlState {
            u: v.clone(),
            s,
            eta,
            residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iteration: 0,
        }
    }

    /// The state for `c·f` given the state for `f`, using the homogeneity of
    /// `−Δ_p` (`u` and `s` scale by `c^{1/(p−1)}`, `η` by `c`).
    pub fn rescaled(&self, c: f64, p: f64) -> Self {
        let cu = c.signum() * c.abs().powf(1.0 / (p - 1.0));
        AlState {
            u: self.u.scaled(cu),
            s: self.s.iter().map(|v| cu * v).collect(),
            eta: self.eta.iter().map(|v| c * v).collect(),
            residual: self.residual,
            dual_residual: self.dual_residual,
            iteration: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AlSolution {
    pub u: FeFunction,
    /// Absolute residuals `‖∇u − s‖_{L²}` per iteration.
    pub history: Vec<f64>,
    pub state: AlState,
    /// Largest relative residual of the scalar flux equation in the last step 2.
    pub flux_residual: f64,
    pub linear_iterations: usize,
}

impl AlSolution {
    /// CSV with header `iter,residual`.
    pub fn history_csv(&self) -> String {
        let mut s = String::from("iter,residual\n");
        for (i, r) in self.history.iter().enumerate() {
            s.push_str(&format!("{},{:e}\n", i + 1, r));
        }
        s
    }
}

/// Nonnegative root of `m^{p−1} + r m = rhs` by Newton's method inside a
/// shrinking bracket, falling back to bisection when Newton leaves it.
pub fn solve_flux_magnitude(p: f64, r: f64, rhs_norm: f64, newton_tol: f64) -> f64 {
    solve_flux_magnitude_from(p, r, rhs_norm, newton_tol, None)
}

/// As [`solve_flux_magnitude`], starting Newton from `guess` when it lies in the bracket.
pub fn solve_flux_magnitude_from(p: f64, r: f64, rhs_norm: f64, newton_tol: f64, guess: Option<f64>) -> f64 {
    flux_root(p, r, rhs_norm, newton_tol, guess).0
}

// Returns the root and the absolute residual of the equation at the root.
fn flux_root(p: f64, r: f64, rhs_norm: f64, newton_tol: f64, guess: Option<f64>) -> (f64, f64) {
    if !(rhs_norm > 0.0) {
        return (0.0, 0.0);
    }
    if p == 2.0 {
        let m = rhs_norm / (1.0 + r);
        return (m, (m + r * m - rhs_norm).abs());
    }
    let e = p - 1.0;
    // both terms are nonnegative, so the root lies below either of them
    let mut hi = (rhs_norm / r).min(rhs_norm.powf(1.0 / e));
    let mut lo = 0.0f64;
    let mut m = match guess {
        Some(g) if g > 0.0 && g < hi => g,
        _ => hi,
    };
    let tol = newton_tol * rhs_norm;
    let mut best = (m, f64::INFINITY);
    for _ in 0..200 {
        let pm = m.powf(e);
        let f = pm + r * m - rhs_norm;
        if f.abs() < best.1 {
            best = (m, f.abs());
        }
        if f.abs() <= tol {
            return (m, f.abs());
        }
        if f > 0.0 {
            hi = m;
        } else {
            lo = m;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return best;
        }
        let df = if m > 0.0 { e * pm / m + r } else { f64::INFINITY };
        let next = m - f / df;
        m = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    best
}

/// Relative residual of the scalar flux equation.
pub fn flux_equation_residual(p: f64, r: f64, rhs_norm: f64, m: f64) -> f64 {
    let f = m.powf(p - 1.0) + r * m - rhs_norm;
    if rhs_norm > 0.0 {
        f.abs() / rhs_norm
    } else {
        f.abs()
    }
}

/// Solves `−Δ_p u = f` from the zero initial state. Returns the solution and
/// the residual history.
pub fn invert_p_laplacian<V: VariationalSpace>(
    space: &V,
    f: &DualVector,
    p: f64,
    cfg: &AlConfig,
) -> Result<(FeFunction, Vec<f64>)> {
    let sol = invert_p_laplacian_from(space, f, p, cfg, None)?;
    Ok((sol.u, sol.history))
}

/// As [`invert_p_laplacian`], starting from `warm` when given.
pub fn invert_p_laplacian_from<V: VariationalSpace>(
    space: &V,
    f: &DualVector,
    p: f64,
    cfg: &AlConfig,
    warm: Option<&AlState>,
) -> Result<AlSolution> {
    let (sol, converged) = try_invert_p_laplacian(space, f, p, cfg, warm)?;
    if converged {
        Ok(sol)
    } else {
        Err(Error::AlNotConverged {
            iterations: sol.history.len(),
            last_residual: sol.history.last().copied().unwrap_or(f64::INFINITY),
            history: sol.history,
        })
    }
}

/// As [`invert_p_laplacian_from`], returning the last iterate with a
/// convergence flag instead of an error when `max_iter` is exhausted.
pub fn try_invert_p_laplacian<V: VariationalSpace>(
    space: &V,
    f: &DualVector,
    p: f64,
    cfg: &AlConfig,
    warm: Option<&AlState>,
) -> Result<(AlSolution, bool)> {
    iterate(space, f, p, cfg, warm, cfg.max_iter, true)
}

/// Runs exactly `iterations` steps of the splitting, ignoring the tolerance.
pub fn run_al_iterations<V: VariationalSpace>(
    space: &V,
    f: &DualVector,
    p: f64,
    cfg: &AlConfig,
    warm: Option<&AlState>,
    iterations: usize,
) -> Result<AlSolution> {
    Ok(iterate(space, f, p, cfg, warm, iterations, false)?.0)
}

fn iterate<V: VariationalSpace>(
    space: &V,
    f: &DualVector,
    p: f64,
    cfg: &AlConfig,
    warm: Option<&AlState>,
    max_iter: usize,
    stop_on_tol: bool,
) -> Result<(AlSolution, bool)> {
    check_exponent(p)?;
    cfg.validate()?;
    space.check_dim(f.len())?;
    let r = cfg.penalty(space, p);
    let d = space.flux_dim();
    let nc = space.n_cells();
    let weights = space.cell_weights();
    let mut state = match warm {
        Some(w) => {
            if w.u.len() != space.n_free() || w.s.len() != nc * d || w.eta.len() != nc * d {
                return Err(Error::DimensionMismatch {
                    expected: space.n_free(),
                    got: w.u.len(),
                });
            }
            w.clone()
        }
        None => AlState::zero(space),
    };
    state.iteration = 0;
    if f.values().iter().all(|&v| v == 0.0) {
        let zero = AlState::zero(space);
        let sol = AlSolution {
            u: zero.u.clone(),
            history: vec![0.0],
            state: AlState {
                residual: 0.0,
                dual_residual: 0.0,
                ..zero
            },
            flux_residual: 0.0,
            linear_iterations: 0,
        };
        return Ok((sol, true));
    }

    let n = space.n_free();
    let mut u = std::mem::replace(&mut state.u, FeFunction::zeros(0)).into_coeffs();
    let mut flux = vec![0.0; nc * d];
    let mut rhs = vec![0.0; n];
    let mut g = vec![0.0; nc * d];
    let mut err_terms = vec![0.0; nc];
    let mut norm_terms = vec![0.0; nc];
    let mut ds_terms = vec![0.0; nc];
    let mut eta_terms = vec![0.0; nc];
    let mut history = Vec::new();
    // a warm state may already look stationary; the first solve must be tight
    // enough to register the change of f
    let mut rel_residual = if warm.is_some() { cfg.tol } else { 1.0f64 };
    let mut linear_iterations = 0;
    let mut flux_residual = 0.0f64;
    let mut converged = false;

    for it in 1..=max_iter {
        // step 1
        for k in 0..nc * d {
            flux[k] = r * state.s[k] - state.eta[k];
        }
        space.gradient_transpose(&flux, &mut rhs);
        for (b, fv) in rhs.iter_mut().zip(f.values()) {
            *b = (*b + fv) / r;
        }
        // inexact inner solves, two orders of magnitude below the splitting error
        let inner_tol = (1e-2 * rel_residual).clamp(cfg.linear_rel_tol, 1e-4);
        linear_iterations += space.solve_laplace(&rhs, &mut u, inner_tol)?;
        space.gradient(&u, &mut g);

        // steps 2 and 3
        flux_residual = 0.0;
        for c in 0..nc {
            let gc = &g[c * d..(c + 1) * d];
            let mut q = [0.0; 2];
            for k in 0..d {
                q[k] = r * gc[k] + state.eta[c * d + k];
            }
            let qn = norm(&q[..d]);
            let previous = norm(&state.s[c * d..(c + 1) * d]);
            let (m, fres) = flux_root(p, r, qn, cfg.newton_tol, Some(previous));
            if qn > 0.0 {
                flux_residual = flux_residual.max(fres / qn);
            }
            let scale = if qn > 0.0 { m / qn } else { 0.0 };
            let (mut diff2, mut g2, mut ds2, mut eta2) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..d {
                let s = scale * q[k];
                let ds = s - state.s[c * d + k];
                state.s[c * d + k] = s;
                let diff = gc[k] - s;
                state.eta[c * d + k] += r * diff;
                diff2 += diff * diff;
                g2 += gc[k] * gc[k];
                ds2 += ds * ds;
                eta2 += state.eta[c * d + k] * state.eta[c * d + k];
            }
            err_terms[c] = weights[c] * diff2;
            norm_terms[c] = weights[c] * g2;
            ds_terms[c] = weights[c] * ds2;
            eta_terms[c] = weights[c] * eta2;
        }
        let residual = pairwise_sum(&err_terms).sqrt();
        let grad_norm = pairwise_sum(&norm_terms).sqrt();
        history.push(residual);
        rel_residual = if grad_norm > 0.0 { residual / grad_norm } else { 1.0 };
        let eta_norm = pairwise_sum(&eta_terms).sqrt();
        state.dual_residual = if eta_norm > 0.0 {
            r * pairwise_sum(&ds_terms).sqrt() / eta_norm
        } else {
            0.0
        };
        state.residual = residual;
        state.iteration = it;
        if !residual.is_finite() {
            break;
        }
        if stop_on_tol && rel_residual.max(state.dual_residual) <= cfg.tol {
            converged = true;
            break;
        }
    }
    state.u = FeFunction::from_vec_unchecked(u);
    let sol = AlSolution {
        u: state.u.clone(),
        history,
        state,
        flux_residual,
        linear_iterations,
    };
    Ok((sol, converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FeSpace;
    use crate::mesh::{build_domain, DomainSpec};

    #[test]
    fn flux_equation_examples() {
        assert_eq!(solve_flux_magnitude(2.0, 3.0, 8.0, 1e-14), 2.0);
        assert!((solve_flux_magnitude(3.0, 1.0, 6.0, 1e-14) - 2.0).abs() < 1e-13);
        // bisection oracle for m^0.5 + 2m = 5
        let (mut lo, mut hi) = (0.0f64, 2.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid.sqrt() + 2.0 * mid > 5.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let m = solve_flux_magnitude(1.5, 2.0, 5.0, 1e-14);
        assert!((m - lo).abs() < 1e-12, "{m} vs {lo}");
        assert!((m - 1.8247).abs() < 1e-4);
        assert_eq!(solve_flux_magnitude(1.5, 2.0, 0.0, 1e-14), 0.0);
    }

    #[test]
    fn flux_magnitude_monotone_and_accurate() {
        for p in [1.05, 1.1, 1.5, 2.5, 4.0, 10.0] {
            for r in [1e-3, 0.05, 1.0, 1e3, 1e7] {
                let mut prev = 0.0;
                for k in -40..=20 {
                    let rhs = 10f64.powf(k as f64 * 0.5);
                    let m = solve_flux_magnitude(p, r, rhs, 1e-14);
                    assert!(m >= prev, "p={p} r={r} rhs={rhs}");
                    if rhs.powf(1.0 / (p - 1.0)) < 1e-290 {
                        // root below the smallest normal double
                        continue;
                    }
                    assert!(flux_equation_residual(p, r, rhs, m) < 1e-12, "p={p} r={r} rhs={rhs} m={m}");
                    prev = m;
                }
            }
        }
    }

    #[test]
    fn penalty_table_interpolates() {
        assert_eq!(default_penalty(1.1), 1e4);
        assert_eq!(default_penalty(1.0), 1e4);
        assert_eq!(default_penalty(10.0), 0.015);
        assert_eq!(default_penalty(20.0), 0.015);
        assert!((default_penalty(2.0) - 1.0).abs() < 1e-12);
        let mid = default_penalty(2.4);
        assert!(mid < 1.0 && mid > 0.35);
        let ps: Vec<f64> = (0..100).map(|k| 1.1 + 0.09 * k as f64).collect();
        assert!(ps.windows(2).all(|w| default_penalty(w[1]) <= default_penalty(w[0])));
    }

    #[test]
    fn p2_equals_linear_solve() {
        let space = FeSpace::new(build_domain(&DomainSpec::square(2.0), 2000).unwrap()).unwrap();
        let f = DualVector::new(space.density_action(space.interpolate(|x| 1.0 + x[0] * x[1]).coeffs(), 2.0)).unwrap();
        let direct = space.stiffness().solve(&f, 1e-12).unwrap();
        let (u, hist) = invert_p_laplacian(&space, &f, 2.0, &AlConfig { r: Some(1.0), ..AlConfig::default() }).unwrap();
        let diff = u.add_scaled(-1.0, &direct);
        let rel = (space.i_value(diff.coeffs(), 2.0) / space.i_value(direct.coeffs(), 2.0)).sqrt();
        assert!(rel < 1e-6, "{rel} after {} iterations", hist.len());
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let space = FeSpace::new(build_domain(&DomainSpec::square(1.0), 200).unwrap()).unwrap();
        let (u, _) = invert_p_laplacian(&space, &DualVector::zeros(space.n_free()), 3.0, &AlConfig::default()).unwrap();
        assert!(u.coeffs().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reports_non_convergence() {
        let space = FeSpace::new(build_domain(&DomainSpec::square(1.0), 200).unwrap()).unwrap();
        let f = DualVector::new(vec![1.0; space.n_free()]).unwrap();
        let cfg = AlConfig {
            max_iter: 3,
            ..AlConfig::default()
        };
        match invert_p_laplacian(&space, &f, 3.0, &cfg) {
            Err(Error::AlNotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
