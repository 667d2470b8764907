//! Radially symmetric problems on the unit disk as weighted one-dimensional
//! problems on `(0, 1)`: `I(u) = ∫₀¹ r|u'|^p dr`, `J(u) = ∫₀¹ r|u|^p dr`, natural
//! at `r = 0` and Dirichlet at `r = 1`, discretized by P1 elements on a
//! uniform grid. Both functionals are the planar ones divided by `2π`.

use crate::cdm::{run_cdm, CdmConfig, EigenpairResult};
use crate::cmpa::{run_cmpa, CmpaConfig, CmpaResult};
use crate::error::{Error, Result};
use crate::fem::{power_moments, FeFunction, PowerFn, VariationalSpace};
use crate::mesh::pairwise_sum;

const RADIAL_PENALTY: f64 = 1e-2;

/// Smallest grid accepted by the eigenvalue drivers.
pub const MIN_INTERVALS: usize = 100;

/// P1 space on `r_i = i/n` with free nodes `0..n`; `u(1) = 0`.
#[derive(Clone, Debug)]
pub struct RadialSpace {
    n: usize,
    weights: Vec<f64>,
    // LDLᵀ factors of the tridiagonal stiffness
    pivots: Vec<f64>,
    lower: Vec<f64>,
}

impl RadialSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 intervals, got {n}")));
        }
        let h = 1.0 / n as f64;
        let weights: Vec<f64> = (0..n)
            .map(|i| {
                let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                0.5 * (b * b - a * a)
            })
            .collect();
        // K_ii = n²(w_{i−1} + w_i), K_{i,i+1} = −n² w_i
        let n2 = (n * n) as f64;
        let mut pivots = vec![0.0; n];
        let mut lower = vec![0.0; n];
        for i in 0..n {
            let diag = n2 * (weights[i] + if i > 0 { weights[i - 1] } else { 0.0 });
            pivots[i] = if i > 0 {
                let off = -n2 * weights[i - 1];
                lower[i] = off / pivots[i - 1];
                diag - lower[i] * off
            } else {
                diag
            };
        }
        Ok(RadialSpace {
            n,
            weights,
            pivots,
            lower,
        })
    }

    pub fn intervals(&self) -> usize {
        self.n
    }

    /// `r_i` for the free nodes.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    fn node(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// Nodal interpolant; the value at `r = 1` is dropped.
    pub fn interpolate(&self, f: impl Fn(f64) -> f64) -> FeFunction {
        FeFunction::from_vec_unchecked((0..self.n).map(|i| f(self.node(i))).collect())
    }

    #[inline]
    fn ends(&self, u: &[f64], i: usize) -> (f64, f64) {
        (u[i], if i + 1 < self.n { u[i + 1] } else { 0.0 })
    }

    /// CSV `r,u` including `r = 1`, scaled by `(2π)^{−1/p}` so that the planar
    /// `L^p` norm of the profile is `J(u)^{1/p}`.
    pub fn profile_csv(&self, u: &FeFunction, p: f64) -> Result<String> {
        self.check_dim(u.len())?;
        let c = (2.0 * std::f64::consts::PI).powf(-1.0 / p);
        let mut s = String::from("r,u\n");
        for (i, v) in u.coeffs().iter().enumerate() {
            s.push_str(&format!("{:.6},{:.6e}\n", self.node(i), c * v));
        }
        s.push_str(&format!("{:.6},{:.6e}\n", 1.0, 0.0));
        Ok(s)
    }

    /// Exact discrete solution of `−Δ_p u = f`: the flux of cell `j` balances
    /// the load of nodes `0..=j`.
    pub fn exact_inverse(&self, f: &[f64], p: f64) -> Result<FeFunction> {
        self.check_dim(f.len())?;
        let n = self.n as f64;
        let mut u = vec![0.0; self.n];
        let mut load = 0.0;
        let mut grads = vec![0.0; self.n];
        for (j, g) in grads.iter_mut().enumerate() {
            load += f[j];
            let sigma = -load / (n * self.weights[j]);
            *g = sigma.signum() * sigma.abs().powf(1.0 / (p - 1.0));
        }
        let mut next = 0.0;
        for j in (0..self.n).rev() {
            u[j] = next - grads[j] / n;
            next = u[j];
        }
        Ok(FeFunction::from_vec_unchecked(u))
    }

    /// `1 − r²`, a positive start for the first eigenfunction.
    pub fn default_initial_guess(&self) -> FeFunction {
        self.interpolate(|r| 1.0 - r * r)
    }

    /// `(1 − r)(1 − 2.5 r)`, sign-changing with one interior node.
    pub fn default_em(&self) -> FeFunction {
        self.interpolate(|r| (1.0 - r) * (1.0 - 2.5 * r))
    }
}

impl VariationalSpace for RadialSpace {
    fn n_free(&self) -> usize {
        self.n
    }

    fn n_cells(&self) -> usize {
        self.n
    }

    fn flux_dim(&self) -> usize {
        1
    }

    fn cell_weights(&self) -> &[f64] {
        &self.weights
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n as f64;
        for (i, g) in out.iter_mut().enumerate() {
            let (a, b) = self.ends(u, i);
            *g = (b - a) * n;
        }
    }

    fn gradient_transpose(&self, flux: &[f64], out: &mut [f64]) {
        let n = self.n as f64;
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, f) in flux.iter().enumerate() {
            let wf = self.weights[i] * f * n;
            out[i] -= wf;
            if i + 1 < self.n {
                out[i + 1] += wf;
            }
        }
    }

    fn solve_laplace(&self, rhs: &[f64], x: &mut [f64], _rel_tol: f64) -> Result<usize> {
        let n = self.n;
        self.check_dim(rhs.len())?;
        let n2 = (n * n) as f64;
        for i in 0..n {
            x[i] = rhs[i] - if i > 0 { self.lower[i] * x[i - 1] } else { 0.0 };
        }
        for i in (0..n).rev() {
            let off = if i + 1 < n { -n2 * self.weights[i] * x[i + 1] } else { 0.0 };
            x[i] = (x[i] - off) / self.pivots[i];
        }
        Ok(1)
    }

    fn j_value(&self, u: &[f64], p: f64) -> f64 {
        let f = PowerFn { q: p, odd: false };
        let h = 1.0 / self.n as f64;
        let terms: Vec<f64> = (0..self.n)
            .map(|i| {
                let (a, b) = self.ends(u, i);
                let [k0, k1, _] = power_moments(f, a, b);
                h * (self.node(i) * k0 + h * k1)
            })
            .collect();
        pairwise_sum(&terms)
    }

    fn density_action(&self, u: &[f64], p: f64) -> Vec<f64> {
        let g = PowerFn { q: p - 1.0, odd: true };
        let h = 1.0 / self.n as f64;
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let (a, b) = self.ends(u, i);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            let r0 = self.node(i);
            let [k0, k1, k2] = power_moments(g, a, b);
            out[i] += h * (r0 * (k0 - k1) + h * (k1 - k2));
            if i + 1 < self.n {
                out[i + 1] += h * (r0 * k1 + h * k2);
            }
        }
        out
    }

    fn l2_norm_sq(&self, u: &[f64]) -> f64 {
        self.j_value(u, 2.0)
    }

    // The 1D gradient maps free nodes one to one onto cells, so the
    // equilibrium flux is fixed by f alone and a small penalty converges in
    // about ten iterations for every p.
    fn default_penalty(&self, _p: f64) -> f64 {
        RADIAL_PENALTY
    }
}

fn check_intervals(space: &RadialSpace) -> Result<()> {
    if space.intervals() < MIN_INTERVALS {
        return Err(Error::InvalidConfig(format!(
            "radial runs need at least {MIN_INTERVALS} intervals, got {}",
            space.intervals()
        )));
    }
    Ok(())
}

/// First radial eigenpair from `1 − r²`.
pub fn run_radial_cdm(space: &RadialSpace, p: f64, cfg: &CdmConfig) -> Result<EigenpairResult> {
    check_intervals(space)?;
    run_cdm(space, &space.default_initial_guess(), p, cfg)
}

/// Second radial eigenpair by the mountain pass through `em`, or through
/// [`RadialSpace::default_em`] when `None`.
pub fn run_radial_cmpa(
    space: &RadialSpace,
    u1: &FeFunction,
    em: Option<&FeFunction>,
    p: f64,
    cfg: &CmpaConfig,
) -> Result<CmpaResult> {
    check_intervals(space)?;
    let default = space.default_em();
    run_cmpa(space, u1, em.unwrap_or(&default), p, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_half() {
        let s = RadialSpace::new(7).unwrap();
        let total: f64 = s.cell_weights().iter().sum();
        assert!((total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_for_one_minus_r() {
        // u = 1 − r is exact in the space
        let s = RadialSpace::new(10).unwrap();
        let u = s.interpolate(|r| 1.0 - r);
        // ∫ r dr = 1/2, ∫ r (1−r)^p dr = 1/((p+1)(p+2))
        assert!((s.i_value(u.coeffs(), 3.0) - 0.5).abs() < 1e-14);
        for p in [1.5, 2.0, 3.7] {
            let exact = 1.0 / ((p + 1.0) * (p + 2.0));
            assert!((s.j_value(u.coeffs(), p) - exact).abs() < 1e-14, "p = {p}");
        }
    }

    #[test]
    fn density_pairs_to_j() {
        let s = RadialSpace::new(40).unwrap();
        let u = s.interpolate(|r| (1.0 - r) * (0.3 - r));
        for p in [1.2, 2.0, 4.5] {
            let d = s.density_action(u.coeffs(), p);
            let pair: f64 = d.iter().zip(u.coeffs()).map(|(a, b)| a * b).sum();
            assert!((pair - s.j_value(u.coeffs(), p)).abs() < 1e-13);
        }
    }

    #[test]
    fn laplace_solve_is_exact() {
        let s = RadialSpace::new(50).unwrap();
        let x0: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let mut g = vec![0.0; 50];
        s.gradient(&x0, &mut g);
        let mut b = vec![0.0; 50];
        s.gradient_transpose(&g, &mut b);
        let mut x = vec![0.0; 50];
        s.solve_laplace(&b, &mut x, 1e-12).unwrap();
        for (a, e) in x.iter().zip(&x0) {
            assert!((a - e).abs() < 1e-10);
        }
    }

    #[test]
    fn profile_has_endpoint_and_scaling() {
        let s = RadialSpace::new(4).unwrap();
        let u = s.interpolate(|_| 1.0);
        let csv = s.profile_csv(&u, 2.0).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "r,u");
        assert_eq!(lines.len(), 6);
        assert!(lines[5].starts_with("1.000000,0"));
        let v: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).powf(-0.5)).abs() < 1e-6);
    }

    #[test]
    fn small_grids_are_rejected_by_drivers() {
        let s = RadialSpace::new(20).unwrap();
        assert!(run_radial_cdm(&s, 2.0, &CdmConfig::default()).is_err());
    }

    #[test]
    fn first_eigenvalue_p2() {
        let s = RadialSpace::new(400).unwrap();
        let res = run_radial_cdm(&s, 2.0, &CdmConfig::default()).unwrap();
        // j₀,₁²
        assert!((res.lambda - 5.783186).abs() / 5.783186 < 1e-3, "{}", res.lambda);
    }
}
