//! `plap`: batch driver for p-Laplacian eigenvalue computations.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;

use commands::{Command, Runner};
use config::{parse_p_list, DomainArg, RunConfig};
use output::OutDir;

#[derive(Parser, Debug)]
#[command(name = "plap", version, about = "Dirichlet eigenpairs of the p-Laplacian on planar domains")]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// JSON configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,

    /// disk, square, rectangle, triangle, triangle-low, disk:R, rect:A,B, iso:BASE,HEIGHT or equi:SIDE.
    #[arg(long)]
    domain: Option<String>,

    /// Comma list or START:STEP:END; an empty string selects no values.
    #[arg(long = "p", allow_hyphen_values = true)]
    p: Option<String>,

    /// Target triangle count of the coarsest mesh.
    #[arg(long)]
    triangles: Option<usize>,

    /// Uniform refinements after the coarsest solve.
    #[arg(long)]
    refine: Option<usize>,

    /// Penalty of the inner solver (automatic by default).
    #[arg(long)]
    r: Option<f64>,

    /// Mountain-pass midpoint: two-bump, ring, asym, or a field file on the coarsest mesh.
    #[arg(long)]
    em: Option<String>,

    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Maximum number of p values solved concurrently.
    #[arg(long)]
    threads: Option<usize>,

    /// Recorded in the manifest.
    #[arg(long)]
    seed: Option<u64>,

    /// Subintervals of the radial method.
    #[arg(long)]
    intervals: Option<usize>,

    /// Comma list of symmetry classes (S1, S2, SE, SO, center-odd).
    #[arg(long)]
    classes: Option<String>,
}

impl Cli {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &self.domain {
            cfg.domain = DomainArg::Name(d.clone());
        }
        if let Some(p) = &self.p {
            cfg.p = parse_p_list(p)?;
        }
        if let Some(c) = &self.classes {
            cfg.classes = c
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::parse)
                .collect::<Result<_, _>>()?;
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = &self.$field { cfg.$field = v.clone(); } )* };
        }
        set!(triangles, refine, em, out, threads, seed, intervals);
        if self.r.is_some() {
            cfg.r = self.r;
        }
        cfg.finalize()
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = cli.config()?;
    let mut out = OutDir::create(&cfg.out)?;
    let runner = Runner::new(cli.command, cfg)?;
    let manifest = runner.run(&mut out)?;
    let failures = manifest["failures"].as_u64().unwrap_or(0);
    let files = out.finish(manifest)?;
    if failures > 0 {
        log::warn!("{failures} p value(s) had solver failures; see the diagnostics files");
    }
    println!("wrote {} files to {}", files.len(), runner.cfg.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
