//! P1 finite elements: the functionals `I(u) = ∫|∇u|^p` and `J(u) = ∫|u|^p`,
//! their derivatives, scaling onto `S = {J = 1}` and the Rayleigh quotient.
//!
//! `VariationalSpace` abstracts what the inverse p-Laplacian and the descent
//! methods need from a discretization, so the same algorithms run on planar
//! meshes and on the weighted 1D radial problem.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linsolve::{assemble_stiffness, barycentric_gradients, StiffnessOperator};
use crate::mesh::{pairwise_sum, Mesh, Point};

/// Coefficients of a finite element function, one per free degree of freedom.
#[derive(Clone, Debug, PartialEq)]
pub struct FeFunction {
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig(format!("coefficient {i} is not finite")));
        }
        Ok(FeFunction { coeffs })
    }

    pub fn zeros(n: usize) -> Self {
        FeFunction { coeffs: vec![0.0; n] }
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        FeFunction { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn scaled(&self, c: f64) -> FeFunction {
        FeFunction {
            coeffs: self.coeffs.iter().map(|v| c * v).collect(),
        }
    }

    /// `self + t * dir`
    pub fn add_scaled(&self, t: f64, dir: &FeFunction) -> FeFunction {
        assert_eq!(self.len(), dir.len());
        FeFunction {
            coeffs: self.coeffs.iter().zip(&dir.coeffs).map(|(a, b)| a + t * b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A linear functional stored by its action on each nodal basis function.
#[derive(Clone, Debug, PartialEq)]
pub struct DualVector {
    values: Vec<f64>,
}

impl DualVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("dual vector has non-finite entries".into()));
        }
        Ok(DualVector { values })
    }

    pub fn zeros(n: usize) -> Self {
        DualVector { values: vec![0.0; n] }
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        DualVector { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> DualVector {
        DualVector {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// `⟨d, v⟩`, summed in a fixed pairwise order.
    pub fn pair(&self, v: &FeFunction) -> f64 {
        assert_eq!(self.len(), v.len());
        let prod: Vec<f64> = self.values.iter().zip(v.coeffs()).map(|(a, b)| a * b).collect();
        pairwise_sum(&prod)
    }

    pub fn norm2(&self) -> f64 {
        crate::linsolve::norm2(&self.values)
    }
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// What the inverse p-Laplacian and the descent methods need from a discretization.
///
/// The discrete gradient is piecewise constant on `n_cells` cells with
/// `flux_dim` components; `cell_weights` are the cell measures (including any
/// radial weight), so `I(u) = Σ_T w_T |∇u_T|^p` exactly.
pub trait VariationalSpace {
    fn n_free(&self) -> usize;
    fn n_cells(&self) -> usize;
    fn flux_dim(&self) -> usize;
    fn cell_weights(&self) -> &[f64];

    /// Writes the cell gradients of `u`, `flux_dim` values per cell.
    fn gradient(&self, u: &[f64], out: &mut [f64]);

    /// `out_i = Σ_T w_T flux_T · ∇φ_i`, the weak divergence of a cellwise flux.
    fn gradient_transpose(&self, flux: &[f64], out: &mut [f64]);

    /// Solves `K x = rhs` for the Laplace stiffness `K = ∇ᵀ W ∇`, using `x` as
    /// initial guess. Returns the number of inner iterations.
    fn solve_laplace(&self, rhs: &[f64], x: &mut [f64], rel_tol: f64) -> Result<usize>;

    /// `J(u) = ∫ |u|^p`
    fn j_value(&self, u: &[f64], p: f64) -> f64;

    /// Action of `|u|^{p−2}u` on every basis function: `∫ |u|^{p−2} u φ_i`.
    fn density_action(&self, u: &[f64], p: f64) -> Vec<f64>;

    /// Squared L² norm, used for relative comparisons.
    fn l2_norm_sq(&self, u: &[f64]) -> f64;

    /// Penalty used by the inverse when none is configured.
    fn default_penalty(&self, p: f64) -> f64 {
        crate::plap_inverse::default_penalty(p)
    }

    fn i_value(&self, u: &[f64], p: f64) -> f64 {
        let d = self.flux_dim();
        let mut g = vec![0.0; self.n_cells() * d];
        self.gradient(u, &mut g);
        let terms: Vec<f64> = self
            .cell_weights()
            .iter()
            .zip(g.chunks_exact(d))
            .map(|(w, gt)| w * norm(gt).powf(p))
            .collect();
        pairwise_sum(&terms)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n == self.n_free() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.n_free(),
                got: n,
            })
        }
    }

    fn eval_i(&self, u: &FeFunction, p: f64) -> Result<f64> {
        check_exponent(p)?;
        self.check_dim(u.len())?;
        Ok(self.i_value(u.coeffs(), p))
    }

    fn eval_j(&self, u: &FeFunction, p: f64) -> Result<f64> {
        check_exponent(p)?;
        self.check_dim(u.len())?;
        Ok(self.j_value(u.coeffs(), p))
    }

    /// `⟨I'(u), φ_i⟩ = p ∫ |∇u|^{p−2} ∇u·∇φ_i`; cells with zero gradient contribute 0.
    fn eval_i_prime(&self, u: &FeFunction, p: f64) -> Result<DualVector> {
        check_exponent(p)?;
        self.check_dim(u.len())?;
        let d = self.flux_dim();
        let mut g = vec![0.0; self.n_cells() * d];
        self.gradient(u.coeffs(), &mut g);
        for gt in g.chunks_exact_mut(d) {
            let n = norm(gt);
            let f = if n > 0.0 { p * n.powf(p - 2.0) } else { 0.0 };
            gt.iter_mut().for_each(|c| *c *= f);
        }
        let mut out = vec![0.0; self.n_free()];
        self.gradient_transpose(&g, &mut out);
        Ok(DualVector::from_vec_unchecked(out))
    }

    /// `⟨J'(u), φ_i⟩ = p ∫ |u|^{p−2} u φ_i`
    fn eval_j_prime(&self, u: &FeFunction, p: f64) -> Result<DualVector> {
        check_exponent(p)?;
        self.check_dim(u.len())?;
        let mut out = self.density_action(u.coeffs(), p);
        out.iter_mut().for_each(|v| *v *= p);
        Ok(DualVector::from_vec_unchecked(out))
    }

    /// `c u` with `c = J(u)^{−1/p}`, so that `J(c u) = 1`.
    fn scale_to_s(&self, u: &FeFunction, p: f64) -> Result<FeFunction> {
        let j = self.eval_j(u, p)?;
        if !(j > 0.0) || !j.is_finite() {
            return Err(Error::ZeroFunction);
        }
        let c = j.powf(-1.0 / p);
        if c == 1.0 {
            return Ok(u.clone());
        }
        Ok(u.scaled(c))
    }

    /// `‖v‖ = I(v)^{1/p}`
    fn norm_w1p(&self, v: &FeFunction, p: f64) -> Result<f64> {
        Ok(self.eval_i(v, p)?.powf(1.0 / p))
    }

    fn rayleigh(&self, u: &FeFunction, p: f64) -> Result<f64> {
        let j = self.eval_j(u, p)?;
        if !(j > 0.0) {
            return Err(Error::ZeroFunction);
        }
        Ok(self.eval_i(u, p)? / j)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    match v {
        [x] => x.abs(),
        [x, y] => x.hypot(*y),
        _ => v.iter().map(|c| c * c).sum::<f64>().sqrt(),
    }
}

/// P1 space over the free vertices of a mesh, with the cached Laplace stiffness.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    // free slot of each local vertex, usize::MAX for Dirichlet vertices
    local_free: Vec<[usize; 3]>,
    stiffness: StiffnessOperator,
}

impl FeSpace {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let stiffness = assemble_stiffness(&mesh)?;
        let mut areas = Vec::with_capacity(mesh.triangles().len());
        let mut grads = Vec::with_capacity(mesh.triangles().len());
        let mut local_free = Vec::with_capacity(mesh.triangles().len());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let area = mesh.triangle_area(t);
            areas.push(area);
            grads.push(barycentric_gradients(tri.map(|v| mesh.vertices()[v]), area));
            local_free.push(tri.map(|v| mesh.free_index(v).unwrap_or(usize::MAX)));
        }
        Ok(FeSpace {
            mesh,
            areas,
            grads,
            local_free,
            stiffness,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn stiffness(&self) -> &StiffnessOperator {
        &self.stiffness
    }

    #[inline]
    fn local_values(&self, t: usize, u: &[f64]) -> [f64; 3] {
        self.local_free[t].map(|i| if i == usize::MAX { 0.0 } else { u[i] })
    }

    /// Nodal interpolant of `f`; Dirichlet vertices are dropped.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> FeFunction {
        FeFunction::from_vec_unchecked(
            self.mesh
                .free_vertices()
                .iter()
                .map(|&v| f(self.mesh.vertices()[v]))
                .collect(),
        )
    }

    /// Values at all mesh vertices, zero on Dirichlet vertices.
    pub fn nodal_values(&self, u: &FeFunction) -> Vec<f64> {
        (0..self.mesh.vertices().len())
            .map(|v| self.mesh.free_index(v).map_or(0.0, |i| u.coeffs()[i]))
            .collect()
    }

    /// Interpolates `u` from `coarse` onto this space, built on the mesh
    /// returned with `parents` by [`Mesh::refine_with_parents`] of the coarse mesh.
    pub fn prolongate(&self, coarse: &FeSpace, parents: &[[usize; 2]], u: &FeFunction) -> Result<FeFunction> {
        coarse.check_dim(u.len())?;
        self.check_dim_vertices(parents.len())?;
        let vals = coarse.nodal_values(u);
        if let Some(bad) = parents.iter().flatten().find(|&&v| v >= vals.len()) {
            return Err(Error::InvalidMesh(format!("parent vertex {bad} is not a coarse vertex")));
        }
        let fine: Vec<f64> = parents.iter().map(|[a, b]| 0.5 * (vals[*a] + vals[*b])).collect();
        self.from_nodal_values(&fine)
    }

    /// Inverse of `nodal_values`; values at Dirichlet vertices are ignored.
    pub fn from_nodal_values(&self, values: &[f64]) -> Result<FeFunction> {
        self.check_dim_vertices(values.len())?;
        FeFunction::new(self.mesh.free_vertices().iter().map(|&v| values[v]).collect())
    }

    fn check_dim_vertices(&self, n: usize) -> Result<()> {
        if n == self.mesh.vertices().len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.mesh.vertices().len(),
                got: n,
            })
        }
    }

    /// `∫ u v` computed exactly with the P1 mass matrix.
    pub fn l2_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.areas.len())
            .map(|t| {
                let a = self.local_values(t, u);
                let b = self.local_values(t, v);
                let s = a[0] * (2.0 * b[0] + b[1] + b[2])
                    + a[1] * (b[0] + 2.0 * b[1] + b[2])
                    + a[2] * (b[0] + b[1] + 2.0 * b[2]);
                self.areas[t] * s / 12.0
            })
            .collect();
        pairwise_sum(&terms)
    }
}

impl VariationalSpace for FeSpace {
    fn n_free(&self) -> usize {
        self.mesh.n_free()
    }

    fn n_cells(&self) -> usize {
        self.areas.len()
    }

    fn flux_dim(&self) -> usize {
        2
    }

    fn cell_weights(&self) -> &[f64] {
        &self.areas
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        for (t, g) in out.chunks_exact_mut(2).enumerate() {
            let vals = self.local_values(t, u);
            let gr = &self.grads[t];
            g[0] = vals[0] * gr[0][0] + vals[1] * gr[1][0] + vals[2] * gr[2][0];
            g[1] = vals[0] * gr[0][1] + vals[1] * gr[1][1] + vals[2] * gr[2][1];
        }
    }

    fn gradient_transpose(&self, flux: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (t, f) in flux.chunks_exact(2).enumerate() {
            let w = self.areas[t];
            for k in 0..3 {
                let i = self.local_free[t][k];
                if i != usize::MAX {
                    out[i] += w * (f[0] * self.grads[t][k][0] + f[1] * self.grads[t][k][1]);
                }
            }
        }
    }

    fn solve_laplace(&self, rhs: &[f64], x: &mut [f64], rel_tol: f64) -> Result<usize> {
        self.stiffness.solve_into(rhs, x, rel_tol)
    }

    fn j_value(&self, u: &[f64], p: f64) -> f64 {
        let terms: Vec<f64> = (0..self.areas.len())
            .map(|t| self.areas[t] * triangle_j(self.local_values(t, u), p))
            .collect();
        pairwise_sum(&terms)
    }

    fn density_action(&self, u: &[f64], p: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free()];
        for t in 0..self.areas.len() {
            let vals = self.local_values(t, u);
            if vals == [0.0; 3] {
                continue;
            }
            let w = triangle_density(vals, p);
            for k in 0..3 {
                let i = self.local_free[t][k];
                if i != usize::MAX {
                    out[i] += self.areas[t] * w[k];
                }
            }
        }
        out
    }

    fn l2_norm_sq(&self, u: &[f64]) -> f64 {
        self.l2_inner(u, u)
    }
}

fn gauss_legendre_01() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(12))
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((0.5 * (1.0 - x), 0.5 * w));
    }
    rule
}

/// `f(t) = |t|^q` (even) or `|t|^q sgn t` (odd).
#[derive(Clone, Copy)]
pub(crate) struct PowerFn {
    pub q: f64,
    pub odd: bool,
}

impl PowerFn {
    #[inline]
    fn eval(self, t: f64) -> f64 {
        let m = t.abs().powf(self.q);
        if self.odd && t < 0.0 {
            -m
        } else {
            m
        }
    }

    // antiderivative of |t|^m sgn(t)^parity: |t|^{m+1} sgn(t)^{parity+1} / (m+1)
    #[inline]
    fn primitive(abs_pow: f64, t: f64, m: f64, odd_integrand: bool) -> f64 {
        let v = abs_pow / (m + 1.0);
        if !odd_integrand && t < 0.0 {
            -v
        } else {
            v
        }
    }
}

/// `[K0, K1, K2]` with `K_k = ∫₀¹ f(x0 + s (x1 − x0)) s^k ds`.
///
/// Uses the exact antiderivative unless both values share a sign and lie
/// close together, where the closed form cancels and Gauss–Legendre
/// quadrature is exact to rounding (the integrand is analytic far from 0).
pub(crate) fn power_moments(f: PowerFn, x0: f64, x1: f64) -> [f64; 3] {
    let d = x1 - x0;
    let scale = x0.abs().max(x1.abs());
    if d == 0.0 {
        let v = f.eval(x0);
        return [v, v / 2.0, v / 3.0];
    }
    if d.abs() <= 0.5 * scale {
        let mut k = [0.0; 3];
        for &(s, w) in gauss_legendre_01() {
            let v = w * f.eval(x0 + s * d);
            k[0] += v;
            k[1] += v * s;
            k[2] += v * s * s;
        }
        return k;
    }
    // M_j(x) = ∫^x f(t) t^j dt, integrand |t|^{q+j} with parity (odd + j)
    let mut diff = [0.0; 3];
    let (a0, a1) = (x0.abs().powf(f.q + 1.0), x1.abs().powf(f.q + 1.0));
    let (mut p0, mut p1) = (a0, a1);
    for (j, dj) in diff.iter_mut().enumerate() {
        let m = f.q + j as f64;
        let odd_integrand = f.odd ^ (j % 2 == 1);
        *dj = PowerFn::primitive(p1, x1, m, odd_integrand) - PowerFn::primitive(p0, x0, m, odd_integrand);
        p0 *= x0.abs();
        p1 *= x1.abs();
    }
    [
        diff[0] / d,
        (diff[1] - x0 * diff[0]) / (d * d),
        (diff[2] - 2.0 * x0 * diff[1] + x0 * x0 * diff[0]) / (d * d * d),
    ]
}

fn sort3(v: [f64; 3]) -> ([f64; 3], [usize; 3]) {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    ([v[idx[0]], v[idx[1]], v[idx[2]]], idx)
}

/// `∫_T |u|^p / |T|` for the linear function with vertex values `vals`.
///
/// The values `a ≤ b ≤ c` split the distribution of `u` over `T` into two
/// linear ramps meeting at `b`; each is a one-dimensional moment integral.
pub fn triangle_j(vals: [f64; 3], p: f64) -> f64 {
    let ([a, b, c], _) = sort3(vals);
    let f = PowerFn { q: p, odd: false };
    let span = c - a;
    if span == 0.0 {
        return f.eval(a);
    }
    let theta = (b - a) / span;
    let lo = if theta > 0.0 { power_moments(f, a, b)[1] } else { 0.0 };
    let hi = if theta < 1.0 { power_moments(f, c, b)[1] } else { 0.0 };
    2.0 * (theta * lo + (1.0 - theta) * hi)
}

/// `∫_T |u|^{p−2} u φ_k / |T|` for the three vertex basis functions.
pub fn triangle_density(vals: [f64; 3], p: f64) -> [f64; 3] {
    let (sorted, idx) = sort3(vals);
    let [a, b, c] = sorted;
    let g = PowerFn { q: p - 1.0, odd: true };
    let span = c - a;
    if span == 0.0 {
        let v = g.eval(a) / 3.0;
        return [v; 3];
    }
    let theta = (b - a) / span;
    let mut w = [0.0; 3];
    if theta > 0.0 {
        // level sets with u in [a, b]; s runs from a to b
        let [_, k1, k2] = power_moments(g, a, b);
        w[0] += theta * (k1 - 0.5 * (1.0 + theta) * k2);
        w[1] += theta * 0.5 * k2;
        w[2] += theta * 0.5 * theta * k2;
    }
    if theta < 1.0 {
        // u in [b, c]; s runs from c to b
        let [_, k1, k2] = power_moments(g, c, b);
        let om = 1.0 - theta;
        w[0] += om * 0.5 * om * k2;
        w[1] += om * 0.5 * k2;
        w[2] += om * (k1 - 0.5 * (2.0 - theta) * k2);
    }
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[idx[k]] = 2.0 * w[k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_domain, BoundaryTag, DomainSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_right_triangle() -> FeSpace {
        // the vertex carrying the value 0 is Dirichlet, the other two are free
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let tags = vec![BoundaryTag::Dirichlet, BoundaryTag::Natural, BoundaryTag::Natural];
        FeSpace::new(Mesh::new(v, vec![[0, 1, 2]], tags).unwrap()).unwrap()
    }

    #[test]
    fn unit_triangle_closed_forms() {
        let space = unit_right_triangle();
        let u = FeFunction::new(vec![1.0, 2.0]).unwrap();
        assert!((space.eval_i(&u, 2.0).unwrap() - 2.5).abs() < 1e-14);
        assert!((space.eval_j(&u, 2.0).unwrap() - 7.0 / 12.0).abs() < 1e-15);
        assert!((space.norm_w1p(&u, 2.0).unwrap() - 2.5f64.sqrt()).abs() < 1e-14);
        assert!((triangle_j([0.7, 0.7, 0.7], 3.3) - 0.7f64.powf(3.3)).abs() < 1e-15);
    }

    #[test]
    fn two_equal_values_agree_with_neighbours() {
        for p in [1.1, 2.0, 3.7, 9.0] {
            let exact = triangle_j([0.3, 1.0, 1.0], p);
            let near = triangle_j([0.3, 1.0, 1.0 + 1e-13], p);
            assert!((exact - near).abs() <= 1e-12 * exact);
            let d0 = triangle_density([0.3, 1.0, 1.0], p);
            let d1 = triangle_density([0.3, 1.0 - 1e-13, 1.0], p);
            for k in 0..3 {
                assert!((d0[k] - d1[k]).abs() <= 1e-12 * d0[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn density_pairs_to_j() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = rng.gen_range(1.05..10.0);
            let v: [f64; 3] = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let d = triangle_density(v, p);
            let pair = d[0] * v[0] + d[1] * v[1] + d[2] * v[2];
            let j = triangle_j(v, p);
            assert!((pair - j).abs() <= 1e-12 * j.max(1e-300), "{v:?} {p}: {pair} vs {j}");
        }
    }

    #[test]
    fn p2_matches_mass_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let v: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let mass = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[0] * v[1] + v[1] * v[2] + v[2] * v[0]) / 6.0;
            assert!((triangle_j(v, 2.0) - mass).abs() < 1e-14);
            let d = triangle_density(v, 2.0);
            let m0 = (2.0 * v[0] + v[1] + v[2]) / 12.0;
            assert!((d[0] - m0).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let rule = gauss_legendre(12);
        for k in 0..23 {
            let s: f64 = rule.iter().map(|(x, w)| w * x.powi(k)).sum();
            assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "degree {k}");
        }
    }

    #[test]
    fn moments_branches_agree_near_threshold() {
        for f in [PowerFn { q: 2.5, odd: false }, PowerFn { q: 0.3, odd: true }] {
            for (x0, x1) in [(1.0, 1.999), (1.0, 2.001), (-1.0, -2.0001), (2.0, 1.0001)] {
                let a = power_moments(f, x0, x1);
                // shift slightly across the branch switch
                let b = power_moments(f, x0, x1 * (1.0 + 1e-12));
                for k in 0..3 {
                    assert!((a[k] - b[k]).abs() <= 1e-10 * a[k].abs());
                }
            }
        }
    }

    fn square_space(n: usize) -> FeSpace {
        FeSpace::new(build_domain(&DomainSpec::square(2.0), n).unwrap()).unwrap()
    }

    #[test]
    fn homogeneity_and_euler_identities() {
        let space = square_space(600);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = FeFunction::new((0..space.n_free()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        for p in [1.2, 2.0, 4.0] {
            let i = space.eval_i(&u, p).unwrap();
            let j = space.eval_j(&u, p).unwrap();
            for c in [-2.0f64, 0.5, 3.0] {
                let uc = u.scaled(c);
                assert!((space.eval_i(&uc, p).unwrap() - c.abs().powf(p) * i).abs() < 1e-10 * i * c.abs().powf(p));
                assert!((space.eval_j(&uc, p).unwrap() - c.abs().powf(p) * j).abs() < 1e-10 * j * c.abs().powf(p));
            }
            let ip = space.eval_i_prime(&u, p).unwrap().pair(&u);
            assert!((ip / (p * i) - 1.0).abs() < 1e-10);
            let jp = space.eval_j_prime(&u, p).unwrap().pair(&u);
            assert!((jp / (p * j) - 1.0).abs() < 1e-10);
        }
        let zero = FeFunction::zeros(space.n_free());
        assert_eq!(space.eval_i(&zero, 2.0).unwrap(), 0.0);
        assert!(space.eval_i_prime(&zero, 3.0).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(space.eval_i_prime(&zero, 1.5).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(matches!(space.eval_i(&u, 1.0), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn scaling_and_rayleigh() {
        let space = square_space(600);
        let u = space.interpolate(|x| x[0] * (2.0 - x[0]) * x[1] * (2.0 - x[1]));
        let p = 3.7;
        let s = space.scale_to_s(&u, p).unwrap();
        assert!((space.eval_j(&s, p).unwrap() - 1.0).abs() < 1e-12);
        let again = space.scale_to_s(&s, p).unwrap();
        assert!(again.coeffs().iter().zip(s.coeffs()).all(|(a, b)| (a - b).abs() <= 1e-15 * b.abs().max(1.0)));
        let r = space.rayleigh(&u, p).unwrap();
        assert!((space.rayleigh(&u.scaled(3.0), p).unwrap() / r - 1.0).abs() < 1e-12);
        let zero = FeFunction::zeros(space.n_free());
        assert!(matches!(space.scale_to_s(&zero, 2.0), Err(Error::ZeroFunction)));
        // J(u) = 16 at p = 2 scales by 1/4
        let j = space.eval_j(&u, 2.0).unwrap();
        let u16 = u.scaled(4.0 / j.sqrt());
        let s16 = space.scale_to_s(&u16, 2.0).unwrap();
        assert!((s16.coeffs()[0] / u16.coeffs()[0] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn norm_is_root_of_i() {
        let space = square_space(600);
        let u = space.interpolate(|x| x[0] * x[1]);
        let i = space.eval_i(&u, 5.0).unwrap();
        let target = u.scaled((32.0 / i).powf(0.2));
        assert!((space.norm_w1p(&target, 5.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn density_reflection_antisymmetry() {
        // u odd about x1 = 1, paired with a basis function and its mirror image
        let space = square_space(800);
        let mesh = space.mesh();
        let u = space.interpolate(|x| {
            let odd = |y: f64| (y - 1.0) * (1.0 + (y - 1.0).powi(2));
            odd(x[0]) * x[1] * (2.0 - x[1])
        });
        let d = space.density_action(u.coeffs(), 2.7);
        let loc = mesh.vertex_locator();
        for (slot, &v) in mesh.free_vertices().iter().enumerate() {
            let x = mesh.vertices()[v];
            let mirror = loc.find([2.0 - x[0], x[1]]).unwrap();
            let mslot = mesh.free_index(mirror).unwrap();
            assert!((d[slot] + d[mslot]).abs() < 1e-14, "{x:?}");
        }
    }
}
