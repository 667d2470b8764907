//! Run configuration: a JSON document whose keys mirror the command-line
//! flags; flags override the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plap_core::analysis::SymmetryClass;
use plap_core::cdm::CdmConfig;
use plap_core::cmpa::CmpaConfig;
use plap_core::DomainSpec;
use serde::{Deserialize, Serialize};

/// A named domain or an explicit specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DomainArg {
    Name(String),
    Spec(DomainSpec),
}

impl DomainArg {
    /// Names: `disk`, `square` (side 2), `rectangle` (2 × 1.75), `triangle`
    /// (base 1, height 1), `triangle-low` (base 1, height 3/4), or
    /// `disk:R`, `rect:A,B`, `iso:BASE,HEIGHT`, `equi:SIDE`.
    pub fn resolve(&self) -> Result<DomainSpec> {
        let name = match self {
            DomainArg::Spec(s) => {
                s.validate()?;
                return Ok(s.clone());
            }
            DomainArg::Name(n) => n.trim(),
        };
        let spec = match name {
            "disk" => DomainSpec::disk(1.0),
            "square" => DomainSpec::square(2.0),
            "rectangle" => DomainSpec::rectangle(2.0, 1.75),
            "triangle" => DomainSpec::iso_triangle(1.0, 1.0),
            "triangle-low" => DomainSpec::iso_triangle(1.0, 0.75),
            other => {
                let (kind, args) = other
                    .split_once(':')
                    .with_context(|| format!("unknown domain {other:?}"))?;
                let nums: Vec<f64> = args
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| format!("bad numbers in domain {other:?}"))?;
                match (kind, nums.as_slice()) {
                    ("disk", [r]) => DomainSpec::disk(*r),
                    ("rect", [a, b]) => DomainSpec::rectangle(*a, *b),
                    ("iso", [b, h]) => DomainSpec::iso_triangle(*b, *h),
                    ("equi", [s]) => DomainSpec::equi_triangle(*s),
                    _ => bail!("unknown domain {other:?}"),
                }
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainArg,
    pub p: Vec<f64>,
    /// Target triangle count of the coarsest mesh.
    pub triangles: usize,
    /// Uniform refinements after the coarsest solve.
    pub refine: usize,
    /// Penalty of the inner solver; automatic when absent.
    pub r: Option<f64>,
    /// Preset name or path of a field file on the coarsest mesh.
    pub em: String,
    pub out: PathBuf,
    /// Worker cap for p sweeps.
    pub threads: usize,
    /// Recorded in the manifest; the solvers themselves are deterministic.
    pub seed: u64,
    /// Subintervals of the radial method.
    pub intervals: usize,
    /// Classes of the symmetry report and of extra sweep columns.
    pub classes: Vec<SymmetryClass>,
    pub cdm: CdmConfig,
    pub cmpa: CmpaConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: DomainArg::Name("disk".into()),
            p: vec![2.0],
            triangles: 5000,
            refine: 0,
            r: None,
            em: "two-bump".into(),
            out: PathBuf::from("out"),
            threads: 1,
            seed: 0,
            intervals: 1000,
            classes: Vec::new(),
            cdm: CdmConfig::default(),
            cmpa: CmpaConfig::default(),
        }
    }
}

pub const VALIDATED_P: (f64, f64) = (1.1, 10.0);
pub const ACCEPTED_P: (f64, f64) = (1.05, 12.0);

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Checks ranges and pushes the penalty override into both solvers.
    pub fn finalize(mut self) -> Result<Self> {
        for &p in &self.p {
            if !(ACCEPTED_P.0..=ACCEPTED_P.1).contains(&p) {
                bail!("p = {p} outside the accepted range [{}, {}]", ACCEPTED_P.0, ACCEPTED_P.1);
            }
            if !(VALIDATED_P.0..=VALIDATED_P.1).contains(&p) {
                log::warn!("p = {p} is outside the validated range [{}, {}]", VALIDATED_P.0, VALIDATED_P.1);
            }
        }
        if self.threads == 0 {
            bail!("threads must be at least 1");
        }
        if self.triangles < 8 {
            bail!("triangles must be at least 8");
        }
        if let Some(r) = self.r {
            if !(r > 0.0 && r.is_finite()) {
                bail!("r must be positive, got {r}");
            }
            self.cdm.al.r = Some(r);
            self.cmpa.al.r = Some(r);
        }
        self.cdm.validate()?;
        self.cmpa.validate()?;
        self.domain.resolve()?;
        Ok(self)
    }
}

/// `a,b,c` or `start:step:end` (inclusive); empty means no values.
pub fn parse_p_list(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let [a, h, b] = s.split(':').collect::<Vec<_>>()[..] {
        let (a, h, b): (f64, f64, f64) = (a.trim().parse()?, h.trim().parse()?, b.trim().parse()?);
        if !(h > 0.0) || b < a {
            bail!("bad range {s:?}");
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        // round to the step's decimals so 1.1:0.1:2.0 yields exact labels
        return Ok((0..=n).map(|k| ((a + k as f64 * h) * 1e9).round() / 1e9).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad p value {t:?}")))
        .collect()
}
