#![allow(dead_code)]

//! Test-side oracles independent of the library kernels.

use plap_core::{FeFunction, FeSpace, VariationalSpace};

/// Tanh-sinh nodes `(x, 1 − x, weight)` on `(0, 1)`; both coordinates are
/// kept so integrands singular at either end never see a rounded endpoint.
pub fn tanh_sinh(h: f64) -> Vec<(f64, f64, f64)> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut nodes = Vec::new();
    let kmax = (4.0 / h).ceil() as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = half_pi * t.sinh();
        let x = 1.0 / (1.0 + (-2.0 * u).exp());
        let xc = 1.0 / (1.0 + (2.0 * u).exp());
        let w = h * half_pi * t.cosh() / (2.0 * u.cosh().powi(2));
        if w > 1e-300 && x > 0.0 && xc > 0.0 {
            nodes.push((x, xc, w));
        }
    }
    nodes
}

type P = [f64; 2];

// Sutherland–Hodgman clip of the triangle to `sign·u ≥ 0`.
fn clip(pts: &[(P, f64)], sign: f64) -> Vec<(P, f64)> {
    let mut out = Vec::new();
    for i in 0..pts.len() {
        let (a, ua) = pts[i];
        let (b, ub) = pts[(i + 1) % pts.len()];
        let (sa, sb) = (sign * ua, sign * ub);
        if sa >= 0.0 {
            out.push((a, ua));
        }
        if (sa > 0.0 && sb < 0.0) || (sa < 0.0 && sb > 0.0) {
            let t = ua / (ua - ub);
            out.push(([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])], 0.0));
        }
    }
    out
}

/// `∫_T |u|^p φ / |T|` over the reference triangle for linear `u` with
/// vertex values `vals` and linear weight `phi` (vertex values), by nested
/// tanh-sinh quadrature on the Duffy-mapped pieces where `u` keeps one sign.
pub fn reference_moment(vals: [f64; 3], phi: [f64; 3], p: f64, signed: bool) -> f64 {
    let corners: [P; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let rule = tanh_sinh(1.0 / 48.0);
    let pts: Vec<(P, f64)> = corners.iter().zip(vals).map(|(&c, v)| (c, v)).collect();
    let weight_at = |x: P| phi[0] * (1.0 - x[0] - x[1]) + phi[1] * x[0] + phi[2] * x[1];
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        let poly = clip(&pts, sign);
        for k in 1..poly.len().saturating_sub(1) {
            let (q0, u0) = poly[0];
            let (q1, u1) = poly[k];
            let (q2, u2) = poly[k + 1];
            let e1 = [q1[0] - q0[0], q1[1] - q0[1]];
            let e2 = [q2[0] - q0[0], q2[1] - q0[1]];
            let jac = (e1[0] * e2[1] - e1[1] * e2[0]).abs();
            if jac == 0.0 {
                continue;
            }
            let mut piece = 0.0;
            for &(s, _, ws) in &rule {
                for &(t, tc, wt) in &rule {
                    // u along the ray, written so values near a zero corner keep precision
                    let u = u0 + s * (tc * (u1 - u0) + t * (u2 - u0));
                    let x = [q0[0] + s * (tc * e1[0] + t * e2[0]), q0[1] + s * (tc * e1[1] + t * e2[1])];
                    let m = u.abs().powf(p);
                    let f = if signed { m * u.signum() } else { m };
                    piece += ws * wt * s * f * weight_at(x);
                }
            }
            total += jac * piece;
        }
    }
    // |T_ref| = 1/2
    2.0 * total
}

/// `∫_T |u|^p / |T|`
pub fn oracle_triangle_j(vals: [f64; 3], p: f64) -> f64 {
    reference_moment(vals, [1.0; 3], p, false)
}

/// `∫_T |u|^{p−2} u φ_k / |T|`
pub fn oracle_triangle_density(vals: [f64; 3], p: f64) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut phi = [0.0; 3];
        phi[k] = 1.0;
        *o = reference_moment(vals, phi, p - 1.0, true);
    }
    out
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Relative `W^{1,2}` seminorm distance `|u − v| / |v|`.
pub fn rel_h1<V: VariationalSpace>(space: &V, u: &FeFunction, v: &FeFunction) -> f64 {
    let d = u.add_scaled(-1.0, v);
    (space.i_value(d.coeffs(), 2.0) / space.i_value(v.coeffs(), 2.0)).sqrt()
}

/// A smooth function vanishing on the boundary of `(0,a)×(0,b)`, shifted to
/// be sign-changing when `shift` is nonzero.
pub fn rect_bubble(space: &FeSpace, a: f64, b: f64, shift: f64) -> FeFunction {
    space.interpolate(|x| (x[0] * (a - x[0]) * x[1] * (b - x[1])) * (x[0] / a - shift + 0.3 * x[1] / b))
}
