//! Mountain pass search for the second eigenpair: a discrete path on `S`
//! from `u₁` to `−u₁` is deformed by moving its highest point downhill.

use serde::{Deserialize, Serialize};

use crate::cdm::{inner_config, EigenpairResult, HistoryEntry};
use crate::descent::{descent_direction_from, DescentResult};
use crate::error::{Error, Result};
use crate::fem::{FeFunction, FeSpace, VariationalSpace};
use crate::plap_inverse::{AlConfig, AlState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CmpaConfig {
    /// Number of path segments.
    pub segments: usize,
    /// Initial Euler step for the moving point, halved until its `I` drops.
    pub step: f64,
    pub dt_min: f64,
    pub w_tol: f64,
    pub max_iter: usize,
    /// Arc-length redistribution period, 0 disables it.
    pub reparam_every: usize,
    /// A segment next to the maximizer longer than this multiple of the mean
    /// segment length gets a midpoint.
    pub split_factor: f64,
    pub al: AlConfig,
}

impl Default for CmpaConfig {
    fn default() -> Self {
        CmpaConfig {
            segments: 21,
            step: 0.5,
            dt_min: 1e-6,
            w_tol: 1e-5,
            max_iter: 3000,
            reparam_every: 10,
            split_factor: 2.0,
            al: AlConfig::default(),
        }
    }
}

impl CmpaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segments < 4 {
            return Err(Error::InvalidConfig(format!("need at least 4 path segments, got {}", self.segments)));
        }
        if !(self.step > 0.0 && self.dt_min > 0.0 && self.dt_min < self.step) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < dt_min < step, got dt_min = {}, step = {}",
                self.dt_min, self.step
            )));
        }
        if !(self.w_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("w_tol and max_iter must be positive".into()));
        }
        if !(self.split_factor > 1.0) {
            return Err(Error::InvalidConfig("split_factor must exceed 1".into()));
        }
        self.al.validate()
    }
}

/// Points `z₀ = u₁, …, z_P = −u₁` on `S`.
#[derive(Clone, Debug)]
pub struct Path {
    points: Vec<FeFunction>,
}

impl Path {
    /// Checks that there are at least three points, all of one length, and
    /// that the endpoints are opposite.
    pub fn new(points: Vec<FeFunction>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidConfig("a path needs at least three points".into()));
        }
        let n = points[0].len();
        if let Some(bad) = points.iter().find(|z| z.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let (a, b) = (&points[0], &points[points.len() - 1]);
        if a.coeffs().iter().zip(b.coeffs()).any(|(x, y)| *x != -*y) {
            return Err(Error::InvalidConfig("path endpoints must be opposite".into()));
        }
        Ok(Path { points })
    }

    pub fn points(&self) -> &[FeFunction] {
        &self.points
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn into_points(self) -> Vec<FeFunction> {
        self.points
    }
}

/// Carries a path to another space: interior points go through `map` and
/// are scaled onto `S`, the endpoints become `±u1`.
pub fn transfer_path<V: VariationalSpace>(
    space: &V,
    path: &Path,
    u1: &FeFunction,
    p: f64,
    map: impl Fn(&FeFunction) -> Result<FeFunction>,
) -> Result<Path> {
    let u1 = space.scale_to_s(u1, p)?;
    let n = path.points().len();
    let mut points = Vec::with_capacity(n);
    points.push(u1.clone());
    for z in &path.points()[1..n - 1] {
        points.push(space.scale_to_s(&map(z)?, p)?);
    }
    points.push(u1.scaled(-1.0));
    Path::new(points)
}

/// Two straight legs `u₁ → e_M → −u₁`, each split into `⌊P/2⌋` and `P − ⌊P/2⌋`
/// pieces, with every point scaled onto `S`.
pub fn build_initial_path<V: VariationalSpace>(
    space: &V,
    u1: &FeFunction,
    em: &FeFunction,
    segments: usize,
    p: f64,
) -> Result<Path> {
    if segments < 2 {
        return Err(Error::InvalidConfig("a path needs at least two segments".into()));
    }
    space.check_dim(u1.len())?;
    space.check_dim(em.len())?;
    let u1 = space.scale_to_s(u1, p).map_err(|_| Error::ZeroFunction)?;
    let minus = u1.scaled(-1.0);
    let em_s = space.scale_to_s(em, p).map_err(|_| Error::PathThroughZero)?;
    let same = |a: &FeFunction, b: &FeFunction| a.coeffs().iter().zip(b.coeffs()).all(|(x, y)| (x - y).abs() <= 1e-12);
    if same(&em_s, &u1) || same(&em_s, &minus) {
        return Err(Error::InvalidConfig("e_M must differ from ±u₁".into()));
    }
    let k = segments / 2;
    let mut points = Vec::with_capacity(segments + 1);
    points.push(u1.clone());
    for j in 1..k {
        points.push(leg_point(space, &u1, em, j as f64 / k as f64, p)?);
    }
    points.push(em_s);
    let rest = segments - k;
    for j in 1..rest {
        points.push(leg_point(space, em, &minus, j as f64 / rest as f64, p)?);
    }
    points.push(minus);
    Path::new(points)
}

fn leg_point<V: VariationalSpace>(space: &V, a: &FeFunction, b: &FeFunction, t: f64, p: f64) -> Result<FeFunction> {
    let z = a.scaled(1.0 - t).add_scaled(t, b);
    space.scale_to_s(&z, p).map_err(|_| Error::PathThroughZero)
}

/// Smallest index attaining the largest value.
pub fn path_maximizer(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct CmpaResult {
    /// Eigenpair at the final maximizer; its history holds the per-iteration
    /// path maximum.
    pub eigenpair: EigenpairResult,
    pub path: Path,
}

impl CmpaResult {
    /// CSV with header `iter,max_I`.
    pub fn trace_csv(&self) -> String {
        trace_csv(&self.eigenpair.history)
    }
}

pub fn trace_csv(history: &[HistoryEntry]) -> String {
    let mut s = String::from("iter,max_I\n");
    for h in history {
        s.push_str(&format!("{},{:e}\n", h.iter, h.i_value));
    }
    s
}

struct Node {
    z: FeFunction,
    i: f64,
    warm: Option<AlState>,
}

struct Deformer<'a, V: VariationalSpace> {
    space: &'a V,
    p: f64,
    nodes: Vec<Node>,
    // chords[k] = ‖z_{k+1} − z_k‖
    chords: Vec<f64>,
    // probe half-width of the tangent line search, in units of τ
    climb_h: f64,
}

impl<'a, V: VariationalSpace> Deformer<'a, V> {
    fn new(space: &'a V, path: Path, p: f64) -> Result<Self> {
        let nodes = path
            .into_points()
            .into_iter()
            .map(|z| {
                let i = space.eval_i(&z, p)?;
                Ok(Node { z, i, warm: None })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut d = Deformer {
            space,
            p,
            nodes,
            chords: Vec::new(),
            climb_h: 0.1,
        };
        d.recompute_chords()?;
        Ok(d)
    }

    fn recompute_chords(&mut self) -> Result<()> {
        self.chords = self
            .nodes
            .windows(2)
            .map(|w| self.distance(&w[0].z, &w[1].z))
            .collect::<Result<_>>()?;
        Ok(())
    }

    fn set_point(&mut self, m: usize, z: FeFunction, i: f64) -> Result<()> {
        self.nodes[m].z = z;
        self.nodes[m].i = i;
        if m > 0 {
            self.chords[m - 1] = self.distance(&self.nodes[m - 1].z, &self.nodes[m].z)?;
        }
        if m + 1 < self.nodes.len() {
            self.chords[m] = self.distance(&self.nodes[m].z, &self.nodes[m + 1].z)?;
        }
        Ok(())
    }

    fn values(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.i).collect()
    }

    fn max_index(&self) -> usize {
        path_maximizer(&self.values())
    }

    fn distance(&self, a: &FeFunction, b: &FeFunction) -> Result<f64> {
        self.space.norm_w1p(&a.add_scaled(-1.0, b), self.p)
    }

    fn point_on_segment(&self, a: usize, t: f64) -> Option<Node> {
        let z = self.nodes[a].z.scaled(1.0 - t).add_scaled(t, &self.nodes[a + 1].z);
        let z = self.space.scale_to_s(&z, self.p).ok()?;
        let i = self.space.eval_i(&z, self.p).ok()?;
        let warm = if t < 0.5 { &self.nodes[a].warm } else { &self.nodes[a + 1].warm };
        Some(Node { z, i, warm: warm.clone() })
    }

    /// Inserts the midpoint of a segment next to the maximizer when it lies
    /// above the maximizer or the segment is overlong, and drops the interior
    /// node whose neighbours are closest so the count stays fixed. Returns
    /// the new maximizer.
    fn refine_around(&mut self, split_factor: f64) -> Result<usize> {
        let last = self.nodes.len() - 1;
        for _ in 0..4 {
            let m = self.max_index();
            if m == 0 || m == last {
                return Ok(m);
            }
            let chords = &self.chords;
            let mean = chords.iter().sum::<f64>() / chords.len() as f64;
            let mut pick: Option<(usize, Node)> = None;
            for a in [m - 1, m] {
                let Some(mid) = self.point_on_segment(a, 0.5) else { continue };
                let wanted = mid.i > self.nodes[m].i || chords[a] > split_factor * mean;
                if wanted && pick.as_ref().map_or(true, |(_, n)| mid.i > n.i) {
                    pick = Some((a, mid));
                }
            }
            let Some((a, node)) = pick else { return Ok(m) };
            let mut victim = None;
            let mut best = f64::INFINITY;
            for k in 1..last {
                if k + 1 >= a && k <= a + 2 {
                    continue;
                }
                let d = self.distance(&self.nodes[k - 1].z, &self.nodes[k + 1].z)?;
                if d < best {
                    best = d;
                    victim = Some(k);
                }
            }
            let Some(k) = victim else { return Ok(m) };
            self.nodes.insert(a + 1, node);
            self.nodes.remove(if k > a { k + 1 } else { k });
            self.recompute_chords()?;
        }
        Ok(self.max_index())
    }

    fn tangent(&self, m: usize) -> FeFunction {
        self.nodes[m + 1].z.add_scaled(-1.0, &self.nodes[m - 1].z)
    }

    /// Moves the interior maximizer `m` to the highest point of the line
    /// `z_m + sτ`, `|s| ≤ ½`, through it along the path tangent `τ`, found
    /// from a parabola through `s = 0, ±h`; `h` shrinks with the offsets
    /// found. The discrete maximum then tracks the point where the path
    /// crosses the ridge.
    fn climb(&mut self, m: usize) -> Result<()> {
        let (z, i, s) = self.line_max(m, &self.nodes[m].z, self.nodes[m].i, self.climb_h);
        self.climb_h = (4.0 * s.abs()).clamp(1e-4, 0.1);
        if i > self.nodes[m].i {
            self.set_point(m, z, i)?;
        }
        Ok(())
    }

    /// Highest point of `z + sτ` near `s = 0` from a parabola through
    /// `s = 0, ±h`, with `τ` the tangent at `m` and `|s| ≤ 0.1`. Returns `z`
    /// itself when nothing higher is found.
    fn line_max(&self, m: usize, z: &FeFunction, y0: f64, h: f64) -> (FeFunction, f64, f64) {
        let tau = self.tangent(m);
        let at = |s: f64| -> Option<(FeFunction, f64)> {
            let z = self.space.scale_to_s(&z.add_scaled(s, &tau), self.p).ok()?;
            let i = self.space.eval_i(&z, self.p).ok()?;
            Some((z, i))
        };
        let keep = || (z.clone(), y0, 0.0);
        let (Some((_, ym)), Some((_, yp))) = (at(-h), at(h)) else { return keep() };
        let curv = yp + ym - 2.0 * y0;
        if !(curv < 0.0) {
            return keep();
        }
        let s = (-h * (yp - ym) / (2.0 * curv)).clamp(-0.1, 0.1);
        match at(s) {
            Some((zs, i)) if i > y0 => (zs, i, s),
            _ => (z.clone(), y0, s),
        }
    }

    /// `w` without its `L²` component along the path tangent at `m`, so the
    /// moving point descends along the ridge instead of sliding off it.
    fn ridge_direction(&self, m: usize, w: &FeFunction) -> Option<FeFunction> {
        if m == 0 || m + 1 >= self.nodes.len() {
            return None;
        }
        let tau = self.tangent(m);
        let tt = self.space.l2_norm_sq(tau.coeffs());
        if !(tt > 0.0) {
            return None;
        }
        let plus = self.space.l2_norm_sq(w.add_scaled(1.0, &tau).coeffs());
        let minus = self.space.l2_norm_sq(w.add_scaled(-1.0, &tau).coeffs());
        let wt = (plus - minus) / 4.0;
        Some(w.add_scaled(-wt / tt, &tau))
    }

    /// Lowers the interior maximizer `m` along the ridge part of `w`, or
    /// along `w` itself, halving the step from `cfg.step`. A step is first
    /// judged by the ridge height it reaches, which avoids cycling between a
    /// step and the next climb; near flat ridges that test drowns in noise,
    /// so it falls back to the height of the moved point. Returns the step.
    fn deform(&mut self, m: usize, w: &FeFunction, i_max: f64, cfg: &CmpaConfig) -> Result<Option<f64>> {
        let ridge = self.ridge_direction(m, w);
        let mut attempts = Vec::new();
        if let Some(r) = &ridge {
            attempts.push((r, true));
            attempts.push((r, false));
        }
        attempts.push((w, false));
        for (dir, judged) in attempts {
            let mut dt = cfg.step;
            let floor = if judged { cfg.dt_min.max(cfg.step / 64.0) } else { cfg.dt_min };
            while dt >= floor {
                let cand = self.space.scale_to_s(&self.nodes[m].z.add_scaled(dt, dir), self.p)?;
                let i_c = self.space.eval_i(&cand, self.p)?;
                let (cand, i_c) = if judged {
                    let (z, i, _) = self.line_max(m, &cand, i_c, self.climb_h);
                    (z, i)
                } else {
                    (cand, i_c)
                };
                if i_c < i_max {
                    self.set_point(m, cand, i_c)?;
                    return Ok(Some(dt));
                }
                dt *= 0.5;
            }
        }
        Ok(None)
    }

    /// Re-spaces the points on each side of `m` evenly in arc length; kept
    /// only if the path maximum does not rise.
    fn reparametrize(&mut self, m: usize) -> Result<()> {
        let old_max = self.nodes[m].i;
        let chords = self.chords.clone();
        let mut fresh: Vec<Option<Node>> = (0..self.nodes.len()).map(|_| None).collect();
        for (lo, hi) in [(0, m), (m, self.nodes.len() - 1)] {
            if hi <= lo + 1 {
                continue;
            }
            let mut cum = vec![0.0];
            for c in &chords[lo..hi] {
                cum.push(cum.last().unwrap() + c);
            }
            let total = cum[cum.len() - 1];
            if !(total > 0.0) {
                continue;
            }
            for j in lo + 1..hi {
                let target = total * (j - lo) as f64 / (hi - lo) as f64;
                let seg = cum.partition_point(|&c| c <= target).clamp(1, hi - lo) - 1;
                let len = cum[seg + 1] - cum[seg];
                let t = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
                let (a, b) = (&self.nodes[lo + seg], &self.nodes[lo + seg + 1]);
                let z = a.z.scaled(1.0 - t).add_scaled(t, &b.z);
                let Ok(z) = self.space.scale_to_s(&z, self.p) else { return Ok(()) };
                let i = self.space.eval_i(&z, self.p)?;
                if i > old_max {
                    return Ok(());
                }
                let warm = if t < 0.5 { a.warm.clone() } else { b.warm.clone() };
                fresh[j] = Some(Node { z, i, warm });
            }
        }
        for (node, f) in self.nodes.iter_mut().zip(fresh) {
            if let Some(f) = f {
                *node = f;
            }
        }
        self.recompute_chords()
    }
}

/// Deforms the path through `e_M` until the tangent descent direction at the
/// highest point has norm at most `w_tol`.
pub fn run_cmpa<V: VariationalSpace>(
    space: &V,
    u1: &FeFunction,
    em: &FeFunction,
    p: f64,
    cfg: &CmpaConfig,
) -> Result<CmpaResult> {
    cfg.validate()?;
    let path = build_initial_path(space, u1, em, cfg.segments, p)?;
    run_cmpa_from_path(space, path, p, cfg)
}

/// As [`run_cmpa`] from a given path, for instance one prolongated from a
/// coarser mesh.
pub fn run_cmpa_from_path<V: VariationalSpace>(space: &V, path: Path, p: f64, cfg: &CmpaConfig) -> Result<CmpaResult> {
    cfg.validate()?;
    for z in path.points() {
        space.check_dim(z.len())?;
        let j = space.eval_j(z, p)?;
        if (j - 1.0).abs() > 1e-8 {
            return Err(Error::NotOnConstraint(j));
        }
    }
    let mut path = Deformer::new(space, path, p)?;
    let last = path.nodes.len() - 1;
    let mut history = Vec::new();
    let mut al_iterations = 0;
    let mut w_prev = f64::INFINITY;

    let finish = |path: Deformer<V>, m: usize, d: &DescentResult, iters: usize, history: Vec<HistoryEntry>, al: usize| {
        let u = path.nodes[m].z.clone();
        let eigenpair = EigenpairResult::from_descent(space, u, d, p, iters, history, al)?;
        let points = path.nodes.into_iter().map(|n| n.z).collect();
        Ok::<_, Error>((eigenpair, Path { points }))
    };

    for iter in 0..=cfg.max_iter {
        let mut m = path.max_index();
        if m == 0 || m == last {
            log::warn!("cmpa: path maximum sits at an endpoint");
        } else {
            if iter > 0 && cfg.reparam_every > 0 && iter % cfg.reparam_every == 0 {
                path.reparametrize(m)?;
            }
            m = path.refine_around(cfg.split_factor)?;
            if m != 0 && m != last {
                path.climb(m)?;
                m = path.max_index();
            }
        }
        let al = inner_config(&cfg.al, w_prev);
        let mut tight = al.tol <= cfg.al.tol;
        let mut d = descent_direction_from(space, &path.nodes[m].z, p, &al, path.nodes[m].warm.as_ref())?;
        al_iterations += d.al_iterations;
        let i_max = path.nodes[m].i;
        log::debug!("cmpa p={p} it={iter}: max I={i_max:.10} at {m} |w|={:.3e}", d.w_norm);
        let moved = loop {
            path.nodes[m].warm = Some(d.al_state.clone());
            let at_end = m == 0 || m == last;
            let moved = if d.w_norm <= cfg.w_tol || iter == cfg.max_iter || at_end {
                None
            } else {
                path.deform(m, &d.w, i_max, cfg)?
            };
            if moved.is_some() || tight || d.w_norm <= cfg.w_tol || iter == cfg.max_iter || at_end {
                break moved;
            }
            // a loose inner solve may have spoilt the direction
            tight = true;
            d = descent_direction_from(space, &path.nodes[m].z, p, &cfg.al, path.nodes[m].warm.as_ref())?;
            al_iterations += d.al_iterations;
        };
        w_prev = d.w_norm;
        let Some(dt) = moved else {
            history.push(HistoryEntry {
                iter,
                i_value: i_max,
                w_norm: d.w_norm,
                dt: 0.0,
            });
            let w_norm = d.w_norm;
            let converged = w_norm <= cfg.w_tol;
            let capped = iter == cfg.max_iter;
            let (eigenpair, path) = finish(path, m, &d, iter, history, al_iterations)?;
            if converged {
                return Ok(CmpaResult { eigenpair, path });
            }
            if capped {
                return Err(Error::MaxIterations {
                    method: "cmpa",
                    iterations: iter,
                    w_norm,
                    best: Box::new(eigenpair),
                });
            }
            return Err(Error::Stalled {
                method: "cmpa",
                iterations: iter,
                dt_min: cfg.dt_min,
                w_norm,
                best: Box::new(eigenpair),
            });
        };
        history.push(HistoryEntry {
            iter,
            i_value: i_max,
            w_norm: d.w_norm,
            dt,
        });
    }
    unreachable!("the loop returns at iter == max_iter")
}

/// Named mountain-pass midpoints built from the distance to the Dirichlet
/// boundary `d` and the bounding box centre `c` with half-widths `h`:
/// `two-bump` is `d·(x−c_x)/h_x`, `ring` is `d·(ρ/ρ_max − ½)` with `ρ = |x − c|`,
/// and `asym` is `d·((x−c_x)/h_x + ½(y−c_y)/h_y)`.
pub fn em_preset(space: &FeSpace, name: &str) -> Result<FeFunction> {
    let mesh = space.mesh();
    let dist = mesh.distance_to_dirichlet();
    let (lo, hi) = mesh.bounding_box();
    let c = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let h = [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0];
    let rho_max = h[0].hypot(h[1]).min(h[0].max(h[1]));
    let shape: Box<dyn Fn([f64; 2]) -> f64> = match name {
        "two-bump" => Box::new(|x| (x[0] - c[0]) / h[0]),
        "ring" => Box::new(|x| (x[0] - c[0]).hypot(x[1] - c[1]) / rho_max - 0.5),
        "asym" => Box::new(|x| (x[0] - c[0]) / h[0] + 0.5 * (x[1] - c[1]) / h[1]),
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown e_M preset {other:?}, expected two-bump, ring or asym"
            )))
        }
    };
    let values: Vec<f64> = mesh
        .vertices()
        .iter()
        .zip(&dist)
        .map(|(&x, &d)| d * shape(x))
        .collect();
    space.from_nodal_values(&values)
}
