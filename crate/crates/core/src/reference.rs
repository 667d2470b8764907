//! Closed-form limits of the eigenvalues as `p → 1` (Cheeger constants) and
//! as `p → ∞` (reciprocal radii of one or two inscribed disks).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{CutAxis, DomainSpec, Point};
use std::f64::consts::PI;

/// First Cheeger constant of the unit-radius half disk.
pub const HALF_DISK_CHEEGER: f64 = 3.1543;

/// How a constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Formula,
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Value {
    pub value: f64,
    pub source: Source,
}

impl Value {
    fn formula(value: f64) -> Self {
        Value {
            value,
            source: Source::Formula,
        }
    }

    fn constant(value: f64) -> Self {
        Value {
            value,
            source: Source::Constant,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticConstants {
    /// `lim_{p→1} λ₁`
    pub h1: Value,
    /// `lim_{p→1} λ₂`, known here only for disks.
    pub h2: Option<Value>,
    /// `lim_{p→∞} λ₁^{1/p}`, the reciprocal inradius.
    pub lambda1: Value,
    /// `lim_{p→∞} λ₂^{1/p}`, the reciprocal radius of two equal disjoint inscribed disks.
    pub lambda2: Value,
}

/// Limits for the unit disk, including those of the second radial eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiskConstants {
    pub h1: Value,
    pub h2: Value,
    pub h2_rad: Value,
    pub lambda1: Value,
    pub lambda2: Value,
    pub lambda2_rad: Value,
}

pub fn disk_constants() -> DiskConstants {
    DiskConstants {
        h1: Value::formula(2.0),
        h2: Value::constant(HALF_DISK_CHEEGER),
        // Cheeger constant of the disk of radius ½, shared by the annulus ½ < r < 1
        h2_rad: Value::formula(4.0),
        lambda1: Value::formula(1.0),
        lambda2: Value::formula(2.0),
        // largest annulus of width 2/3 around an inner disk of radius 1/3
        lambda2_rad: Value::formula(3.0),
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDomain(format!("{name} must be positive, got {v}")))
    }
}

/// `(4 − π) / (a + b − √((a − b)² + πab))`
pub fn cheeger_rectangle(a: f64, b: f64) -> Result<f64> {
    check_positive("a", a)?;
    check_positive("b", b)?;
    Ok((4.0 - PI) / (a + b - ((a - b).powi(2) + PI * a * b).sqrt()))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn triangle_area(t: &[Point; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1])).abs()
}

/// `(per + √(4π|T|)) / (2|T|)`: the Cheeger set of a triangle is the union
/// of disks of radius `1/h` inside it.
pub fn cheeger_triangle(t: [Point; 3]) -> Result<f64> {
    let area = triangle_area(&t);
    let per = dist(t[0], t[1]) + dist(t[1], t[2]) + dist(t[2], t[0]);
    if !(area > 1e-14 * per * per) {
        return Err(Error::InvalidDomain("degenerate triangle".into()));
    }
    Ok((per + (4.0 * PI * area).sqrt()) / (2.0 * area))
}

enum Shape {
    Disk(f64),
    HalfDisk(f64),
    // rectangles [0,a]×[0,b] as four vertices, or triangles; counter-clockwise
    Polygon(Vec<Point>),
}

fn shape(spec: &DomainSpec) -> Result<Shape> {
    spec.validate()?;
    let rect = |a: f64, b: f64| vec![[0.0, 0.0], [a, 0.0], [a, b], [0.0, b]];
    let iso = |base: f64, height: f64| vec![[0.0, 0.0], [base, 0.0], [base / 2.0, height]];
    Ok(match spec.normalized() {
        DomainSpec::Disk { radius } => Shape::Disk(radius),
        DomainSpec::Rectangle { a, b } => Shape::Polygon(rect(a, b)),
        DomainSpec::IsoTriangle { base, height } => Shape::Polygon(iso(base, height)),
        DomainSpec::EquiTriangle { .. } => unreachable!("normalized away"),
        DomainSpec::HalfDomain { parent, axis, .. } => match (parent.normalized(), axis) {
            (DomainSpec::Disk { radius }, _) => Shape::HalfDisk(radius),
            (DomainSpec::Rectangle { a, b }, CutAxis::Vertical) => Shape::Polygon(rect(a / 2.0, b)),
            (DomainSpec::Rectangle { a, b }, CutAxis::Horizontal) => Shape::Polygon(rect(a, b / 2.0)),
            (DomainSpec::Rectangle { a, .. }, CutAxis::Diagonal) => Shape::Polygon(vec![[0.0, 0.0], [a, 0.0], [0.0, a]]),
            (DomainSpec::IsoTriangle { base, height }, _) => {
                Shape::Polygon(vec![[0.0, 0.0], [base / 2.0, 0.0], [0.0, height]])
            }
            (other, _) => {
                return Err(Error::InvalidDomain(format!("no half domain of {}", other.name())));
            }
        },
    })
}

/// First Cheeger constant of a supported domain.
pub fn cheeger_constant(spec: &DomainSpec) -> Result<Value> {
    match shape(spec)? {
        Shape::Disk(r) => Ok(Value::formula(2.0 / r)),
        Shape::HalfDisk(r) => Ok(Value::constant(HALF_DISK_CHEEGER / r)),
        Shape::Polygon(v) if v.len() == 4 => Ok(Value::formula(cheeger_rectangle(v[1][0], v[2][1])?)),
        Shape::Polygon(v) => Ok(Value::formula(cheeger_triangle([v[0], v[1], v[2]])?)),
    }
}

fn inradius(poly: &[Point]) -> f64 {
    if poly.len() == 4 {
        return 0.5 * (poly[1][0] - poly[0][0]).min(poly[2][1] - poly[1][1]);
    }
    let t = [poly[0], poly[1], poly[2]];
    let per = dist(t[0], t[1]) + dist(t[1], t[2]) + dist(t[2], t[0]);
    2.0 * triangle_area(&t) / per
}

// Centre of the disk of radius r tangent to both sides at corner k.
fn corner_centre(poly: &[Point], k: usize, r: f64) -> Point {
    let n = poly.len();
    let (v, prev, next) = (poly[k], poly[(k + n - 1) % n], poly[(k + 1) % n]);
    let unit = |q: Point| {
        let l = dist(q, v);
        [(q[0] - v[0]) / l, (q[1] - v[1]) / l]
    };
    let (e1, e2) = (unit(prev), unit(next));
    let bis = [e1[0] + e2[0], e1[1] + e2[1]];
    let bl = bis[0].hypot(bis[1]);
    let half_angle = ((e1[0] * e2[0] + e1[1] * e2[1]).clamp(-1.0, 1.0).acos()) / 2.0;
    let d = r / half_angle.sin();
    [v[0] + d * bis[0] / bl, v[1] + d * bis[1] / bl]
}

/// Radius of two equal disjoint disks in a rectangle or triangle. An optimal
/// pair can be pushed into two corners, each disk tangent to that corner's
/// sides; for every pair of corners the radius grows until the disks touch
/// or reach the inradius.
fn two_disk_radius(poly: &[Point]) -> f64 {
    let r1 = inradius(poly);
    let mut best: f64 = 0.0;
    for i in 0..poly.len() {
        for j in i + 1..poly.len() {
            let gap = |r: f64| dist(corner_centre(poly, i, r), corner_centre(poly, j, r)) - 2.0 * r;
            let r = if gap(r1) >= 0.0 {
                r1
            } else {
                let (mut lo, mut hi) = (0.0, r1);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if gap(mid) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            };
            best = best.max(r);
        }
    }
    best
}

/// `(Λ₁, Λ₂)`: reciprocals of the inradius and of the two-disk radius.
pub fn infty_eigenvalues(spec: &DomainSpec) -> Result<(f64, f64)> {
    match shape(spec)? {
        Shape::Disk(r) => Ok((1.0 / r, 2.0 / r)),
        Shape::HalfDisk(_) => Err(Error::InvalidDomain("half disks have no closed-form infinity eigenvalues".into())),
        Shape::Polygon(v) => Ok((1.0 / inradius(&v), 1.0 / two_disk_radius(&v))),
    }
}

pub fn asymptotic_constants(spec: &DomainSpec) -> Result<AsymptoticConstants> {
    let h1 = cheeger_constant(spec)?;
    let (l1, l2) = infty_eigenvalues(spec)?;
    let h2 = match spec.normalized() {
        DomainSpec::Disk { radius } => Some(Value::constant(HALF_DISK_CHEEGER / radius)),
        _ => None,
    };
    Ok(AsymptoticConstants {
        h1,
        h2,
        lambda1: Value::formula(l1),
        lambda2: Value::formula(l2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CutCondition;

    #[test]
    fn rectangle_scaling_law() {
        let h = cheeger_rectangle(2.0, 2.0).unwrap();
        assert!((cheeger_rectangle(1.0, 1.0).unwrap() - 2.0 * h).abs() < 1e-12);
        let h3 = cheeger_rectangle(1.3, 0.4).unwrap();
        assert!((cheeger_rectangle(3.9, 1.2).unwrap() - h3 / 3.0).abs() < 1e-12);
        assert!(cheeger_rectangle(-1.0, 1.0).is_err());
    }

    #[test]
    fn triangle_is_symmetric_in_vertices() {
        let t = [[0.0, 0.0], [1.0, 0.0], [0.3, 0.8]];
        let a = cheeger_triangle(t).unwrap();
        let b = cheeger_triangle([t[2], t[0], t[1]]).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(cheeger_triangle([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
    }

    #[test]
    fn two_disks_in_squares_and_long_rectangles() {
        // square side 2: disks in opposite corners, r = 2 − √2
        let (l1, l2) = infty_eigenvalues(&DomainSpec::square(2.0)).unwrap();
        assert!((l1 - 1.0).abs() < 1e-12);
        assert!((l2 - 1.0 / (2.0 - 2f64.sqrt())).abs() < 1e-9);
        // long strip: two disks of the full inradius fit side by side
        let (l1, l2) = infty_eigenvalues(&DomainSpec::rectangle(5.0, 1.0)).unwrap();
        assert!((l1 - 2.0).abs() < 1e-12 && (l2 - 2.0).abs() < 1e-9);
    }

    #[test]
    fn half_domains() {
        let sq = DomainSpec::square(2.0);
        let diag = sq.clone().half(CutAxis::Diagonal, CutCondition::Dirichlet);
        let (l1, _) = infty_eigenvalues(&diag).unwrap();
        assert!((l1 - 1.0 / (2.0 - 2f64.sqrt())).abs() < 1e-9);
        let vert = sq.half(CutAxis::Vertical, CutCondition::Dirichlet);
        assert!((infty_eigenvalues(&vert).unwrap().0 - 2.0).abs() < 1e-12);
        let hd = DomainSpec::disk(1.0).half(CutAxis::Horizontal, CutCondition::Dirichlet);
        assert_eq!(cheeger_constant(&hd).unwrap().source, Source::Constant);
        assert!(infty_eigenvalues(&hd).is_err());
    }

    #[test]
    fn disk_scaling() {
        let c = asymptotic_constants(&DomainSpec::disk(0.5)).unwrap();
        assert!((c.h1.value - 4.0).abs() < 1e-12);
        assert!((c.lambda2.value - 4.0).abs() < 1e-12);
        assert!(c.h2.is_some());
    }

    #[test]
    fn published_constants() {
        let close = |a: f64, b: f64, tol: f64| assert!((a - b).abs() <= tol, "{a} vs {b}");
        close(cheeger_rectangle(2.0, 2.0).unwrap(), 1.8862, 5e-5);
        close(cheeger_rectangle(1.0, 1.0).unwrap(), 3.7725, 5e-5);
        close(cheeger_rectangle(2.0, 1.75).unwrap(), 2.0215, 5e-5);
        let s5 = 5f64.sqrt();
        let iso = DomainSpec::iso_triangle(1.0, 1.0);
        close(cheeger_constant(&iso).unwrap().value, 1.0 + s5 + (2.0 * PI).sqrt(), 1e-12);
        close(cheeger_constant(&iso).unwrap().value, 5.7427, 5e-5);
        let (l1, l2) = infty_eigenvalues(&iso).unwrap();
        close(l1, 1.0 + s5, 1e-12);
        close(l2, 1.0 + 9.0 / s5, 1e-9);
        let s13 = 13f64.sqrt();
        let low = DomainSpec::iso_triangle(1.0, 0.75);
        close(cheeger_constant(&low).unwrap().value, 2.0 / 3.0 * (2.0 + s13 + (6.0 * PI).sqrt()), 1e-12);
        close(cheeger_constant(&low).unwrap().value, 6.631, 5e-4);
        let (l1, l2) = infty_eigenvalues(&low).unwrap();
        close(l1, 3.737, 5e-4);
        close(l2, 2.0 / 3.0 * (5.0 + s13), 1e-9);
        let half = low.half(CutAxis::Horizontal, CutCondition::Natural);
        close(cheeger_constant(&half).unwrap().value, 2.0 / 3.0 * (5.0 + s13 + 2.0 * (3.0 * PI).sqrt()), 1e-12);
        close(cheeger_constant(&half).unwrap().value, 9.830, 5e-4);
        let d = disk_constants();
        assert_eq!((d.h1.value, d.h2_rad.value, d.lambda2_rad.value), (2.0, 4.0, 3.0));
        assert_eq!(d.h2.source, Source::Constant);
    }
}
