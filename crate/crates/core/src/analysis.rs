//! Symmetry classes of eigenfunctions: defects measuring how far a function
//! is from a class, and eigenvalues constrained to a class computed on half
//! domains.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FeFunction, FeSpace, VariationalSpace};
use crate::mesh::{build_domain, CutAxis, CutCondition, DomainSpec, Point};
use crate::solve::{solve_levels, LevelConfig, Solution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymmetryClass {
    /// Odd about the vertical midline, even about the horizontal one.
    S1,
    /// Odd about the diagonal `x₁ = x₂`, even about the other diagonal (squares).
    S2,
    /// Even about the horizontal symmetry line.
    SE,
    /// Odd about the horizontal symmetry line.
    SO,
    /// Odd under the point reflection through the centre.
    CenterOdd,
}

impl SymmetryClass {
    pub const ALL: [SymmetryClass; 5] = [
        SymmetryClass::S1,
        SymmetryClass::S2,
        SymmetryClass::SE,
        SymmetryClass::SO,
        SymmetryClass::CenterOdd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SymmetryClass::S1 => "S1",
            SymmetryClass::S2 => "S2",
            SymmetryClass::SE => "SE",
            SymmetryClass::SO => "SO",
            SymmetryClass::CenterOdd => "center-odd",
        }
    }
}

impl fmt::Display for SymmetryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SymmetryClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SymmetryClass::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown symmetry class {s:?}")))
    }
}

/// Affine isometry `x ↦ Ax + b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Isometry {
    pub linear: [[f64; 2]; 2],
    pub offset: Point,
}

impl Isometry {
    pub fn apply(&self, x: Point) -> Point {
        let [[a, b], [c, d]] = self.linear;
        [a * x[0] + b * x[1] + self.offset[0], c * x[0] + d * x[1] + self.offset[1]]
    }

    fn reflect_x(c: f64) -> Self {
        Isometry {
            linear: [[-1.0, 0.0], [0.0, 1.0]],
            offset: [2.0 * c, 0.0],
        }
    }

    fn reflect_y(c: f64) -> Self {
        Isometry {
            linear: [[1.0, 0.0], [0.0, -1.0]],
            offset: [0.0, 2.0 * c],
        }
    }

    fn point(c: Point) -> Self {
        Isometry {
            linear: [[-1.0, 0.0], [0.0, -1.0]],
            offset: [2.0 * c[0], 2.0 * c[1]],
        }
    }
}

/// One defining relation `u = sign · (u ∘ map)` of a class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Generator {
    pub map: Isometry,
    pub sign: f64,
}

fn unsupported(class: SymmetryClass, spec: &DomainSpec) -> Error {
    Error::UnsupportedSymmetry {
        class: class.name().into(),
        domain: spec.name(),
    }
}

/// Generators of `class` on the meshes produced by `build_domain(spec, ·)`.
pub fn generators(spec: &DomainSpec, class: SymmetryClass) -> Result<Vec<Generator>> {
    spec.validate()?;
    let odd = |map| Generator { map, sign: -1.0 };
    let even = |map| Generator { map, sign: 1.0 };
    use SymmetryClass::*;
    let gens = match (spec.normalized(), class) {
        (DomainSpec::Rectangle { a, b }, S1) => vec![odd(Isometry::reflect_x(a / 2.0)), even(Isometry::reflect_y(b / 2.0))],
        (DomainSpec::Rectangle { a, b }, S2) if (a - b).abs() <= 1e-12 * a => vec![
            odd(Isometry {
                linear: [[0.0, 1.0], [1.0, 0.0]],
                offset: [0.0, 0.0],
            }),
            even(Isometry {
                linear: [[0.0, -1.0], [-1.0, 0.0]],
                offset: [a, a],
            }),
        ],
        (DomainSpec::Rectangle { b, .. }, SE) => vec![even(Isometry::reflect_y(b / 2.0))],
        (DomainSpec::Rectangle { b, .. }, SO) => vec![odd(Isometry::reflect_y(b / 2.0))],
        (DomainSpec::Rectangle { a, b }, CenterOdd) => vec![odd(Isometry::point([a / 2.0, b / 2.0]))],
        (DomainSpec::Disk { .. }, S1) => vec![odd(Isometry::reflect_x(0.0)), even(Isometry::reflect_y(0.0))],
        (DomainSpec::Disk { .. } | DomainSpec::IsoTriangle { .. }, SE) => vec![even(Isometry::reflect_y(0.0))],
        (DomainSpec::Disk { .. } | DomainSpec::IsoTriangle { .. }, SO) => vec![odd(Isometry::reflect_y(0.0))],
        (DomainSpec::Disk { .. }, CenterOdd) => vec![odd(Isometry::point([0.0, 0.0]))],
        _ => return Err(unsupported(class, spec)),
    };
    Ok(gens)
}

/// `u ∘ T` as a function on the same mesh.
fn compose(space: &FeSpace, u: &FeFunction, map: &Isometry, what: &str) -> Result<FeFunction> {
    space.check_dim(u.len())?;
    let mesh = space.mesh();
    let locator = mesh.vertex_locator();
    let values = space.nodal_values(u);
    let moved: Vec<f64> = mesh
        .vertices()
        .iter()
        .map(|&x| locator.find(map.apply(x)).map(|k| values[k]))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::MeshNotInvariant(what.into()))?;
    space.from_nodal_values(&moved)
}

/// `‖u − σ (u ∘ T)‖_{L²} / ‖u‖_{L²}` for one generator.
pub fn generator_defect(space: &FeSpace, u: &FeFunction, g: &Generator) -> Result<f64> {
    let norm = space.l2_norm_sq(u.coeffs()).sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroFunction);
    }
    let image = compose(space, u, &g.map, "the symmetry map")?;
    let diff = u.add_scaled(-g.sign, &image);
    Ok(space.l2_norm_sq(diff.coeffs()).sqrt() / norm)
}

/// Largest generator defect of `class`: zero exactly when `u` has the symmetry.
pub fn symmetry_defect(space: &FeSpace, spec: &DomainSpec, u: &FeFunction, class: SymmetryClass) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for g in generators(spec, class)? {
        let d = generator_defect(space, u, &g).map_err(|e| match e {
            Error::MeshNotInvariant(_) => Error::MeshNotInvariant(class.name().into()),
            other => other,
        })?;
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Half domain realizing a class, whether its eigenvalue is the second one
/// there, and the reflection extending half-domain functions to the domain.
#[derive(Clone, Debug)]
pub struct HalfProblem {
    pub half: DomainSpec,
    pub second: bool,
    pub extension: Generator,
}

/// Odd classes cut the domain along their nodal line with a Dirichlet
/// condition and take the first eigenpair of the half. Even classes cut with
/// a natural condition; the first eigenfunction of that half is already in
/// the class, so the sign-changing one is the second eigenpair.
pub fn half_problem(spec: &DomainSpec, class: SymmetryClass) -> Result<HalfProblem> {
    use SymmetryClass::*;
    let gens = generators(spec, class)?;
    let (axis, cut, second) = match (spec.normalized(), class) {
        (DomainSpec::Rectangle { .. }, S1) => (CutAxis::Vertical, CutCondition::Dirichlet, false),
        (DomainSpec::Rectangle { .. }, S2) => (CutAxis::Diagonal, CutCondition::Dirichlet, false),
        (_, SO) => (CutAxis::Horizontal, CutCondition::Dirichlet, false),
        (_, SE) => (CutAxis::Horizontal, CutCondition::Natural, true),
        _ => return Err(unsupported(class, spec)),
    };
    Ok(HalfProblem {
        half: spec.clone().half(axis, cut),
        second,
        extension: gens[0],
    })
}

/// Eigenpair constrained to a symmetry class.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    pub class: SymmetryClass,
    pub lambda: f64,
    pub problem: HalfProblem,
    pub solution: Solution,
    parent: DomainSpec,
    triangles: usize,
    refine: usize,
}

impl SymmetricEigen {
    /// The half-domain eigenfunction.
    pub fn half_function(&self) -> &FeFunction {
        match &self.solution.second {
            Some(s) => &s.eigenpair.u,
            None => &self.solution.first.u,
        }
    }

    /// A space on the whole domain whose mesh restricts to the half mesh.
    pub fn full_space(&self) -> Result<FeSpace> {
        let mut mesh = build_domain(&self.parent, 2 * self.triangles)?;
        for _ in 0..self.refine {
            mesh = mesh.refine();
        }
        FeSpace::new(mesh)
    }

    /// Extends the half-domain eigenfunction by the class reflection and
    /// scales it onto `S` of the whole domain.
    pub fn extend(&self, full: &FeSpace, p: f64) -> Result<FeFunction> {
        let half = &self.solution.space;
        let half_vals = half.nodal_values(self.half_function());
        let locator = half.mesh().vertex_locator();
        let g = &self.problem.extension;
        let values: Vec<f64> = full
            .mesh()
            .vertices()
            .iter()
            .map(|&x| match locator.find(x) {
                Some(k) => Some(half_vals[k]),
                None => locator.find(g.map.apply(x)).map(|k| g.sign * half_vals[k]),
            })
            .collect::<Option<_>>()
            .ok_or_else(|| Error::MeshNotInvariant(self.class.name().into()))?;
        full.scale_to_s(&full.from_nodal_values(&values)?, p)
    }
}

/// Smallest eigenvalue with an eigenfunction in `class`, computed on the
/// half domain with `cfg`; the mode is sign-changing on the whole domain.
pub fn constrained_eigen_with_symmetry(
    spec: &DomainSpec,
    class: SymmetryClass,
    p: f64,
    cfg: &LevelConfig,
) -> Result<SymmetricEigen> {
    let problem = half_problem(spec, class)?;
    let solution = solve_levels(&problem.half, p, cfg, problem.second)?;
    let lambda = match &solution.second {
        Some(s) => s.eigenpair.lambda,
        None => solution.first.lambda,
    };
    Ok(SymmetricEigen {
        class,
        lambda,
        problem,
        solution,
        parent: spec.clone(),
        triangles: cfg.triangles,
        refine: cfg.refine,
    })
}

/// One row of a symmetry report; `classes[i]` pairs with `lambda_class[i]`
/// and `defect_class[i]`.
#[derive(Clone, Debug, Serialize)]
pub struct SymmetryRow {
    pub p: f64,
    pub lambda2: Option<f64>,
    pub lambda_class: Vec<Option<f64>>,
    pub defect_class: Vec<Option<f64>>,
}

/// CSV with header `p,lambda2,lambda_<C>...,defect_<C>...`, six significant digits.
pub fn symmetry_report_csv(classes: &[SymmetryClass], rows: &[SymmetryRow]) -> String {
    let mut s = String::from("p,lambda2");
    for c in classes {
        s.push_str(&format!(",lambda_{c}"));
    }
    for c in classes {
        s.push_str(&format!(",defect_{c}"));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&crate::io::format_sig(r.p));
        s.push(',');
        s.push_str(&crate::io::format_opt(r.lambda2));
        for v in r.lambda_class.iter().chain(&r.defect_class) {
            s.push(',');
            s.push_str(&crate::io::format_opt(*v));
        }
        s.push('\n');
    }
    s
}
