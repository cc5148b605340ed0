//! surface-forge: build surfaces from scenario files, check them against
//! their structural identities, export OBJ meshes and JSON/CSV reports.
//!
//! Exit codes: 0 when every residual is under tolerance, 2 on invalid
//! input, 3 on numeric failure or a residual above tolerance.

mod commands;
mod obj;
mod report;
mod run;
mod scenario;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surface_forge_core::quatgeo::{ImVec3, Stencil, SurfaceGrid};
use surface_forge_core::GeomError;

use crate::report::ResidualReport;
use crate::scenario::Scenario;

/// Error with its exit code and the module that raised it.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub module: String,
    pub message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: 2, module: "input".into(), message: message.into() }
    }

    pub fn validation_from(e: GeomError) -> Self {
        Self::validation(e.to_string())
    }

    /// Input-shaped errors keep exit code 2 even when found during compute.
    pub fn numeric(module: &str, e: GeomError) -> Self {
        let code = match e {
            GeomError::Invalid(_) | GeomError::GridTooSmall { .. } | GeomError::Shape(_) | GeomError::Domain(_) => 2,
            _ => 3,
        };
        Self { code, module: module.into(), message: e.to_string() }
    }

    fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::validation(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.module, self.message)
    }
}

#[derive(Parser)]
#[command(name = "surface-forge", version, about = "Bonnet-problem surface construction and verification")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance applied to every residual.
    #[arg(long)]
    tol: Option<f64>,
    /// Grid override `nx,ny,h`.
    #[arg(long)]
    grid: Option<String>,
    /// Worker threads for parallel stages.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Verb {
    /// Build the scenario surface, write OBJ meshes and report.json.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Recompute a scenario's residuals, or check an OBJ mesh.
    Verify {
        #[command(flatten)]
        common: Common,
        /// OBJ mesh written by `generate`.
        #[arg(long, conflicts_with = "scenario")]
        mesh: Option<PathBuf>,
        /// Uniform vertex noise amplitude, seeded by SURFACE_FORGE_SEED.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Run the scenario over family parameter values and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// t, T, lambda0 or D.
        #[arg(long)]
        param: String,
        /// Values separated by `;` (or `,` for scalar parameters).
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Theta values of a period matrix, or periods of a finite-gap scenario.
    ThetaEval {
        #[command(flatten)]
        common: Common,
    },
    /// First integral, H -> y -> H round trip and PVI residual (type B).
    PviRoundtrip {
        #[command(flatten)]
        common: Common,
        /// Check PVI on the +theta image instead of -theta.
        #[arg(long)]
        plus: bool,
    },
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| Failure::io(&p, e))
}

fn load(c: &Common) -> Result<Scenario, Failure> {
    let path = c.scenario.as_ref().ok_or_else(|| Failure::validation("--scenario is required"))?;
    Scenario::from_json(&read(path)?)?.prepare(c.grid.as_deref(), c.tol)
}

fn seed() -> u64 {
    std::env::var("SURFACE_FORGE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0)
}

fn finish_report(report: &ResidualReport, out: Option<&Path>) -> Result<bool, Failure> {
    let json = report.to_json();
    if let Some(dir) = out {
        write(dir, "report.json", &json)?;
    }
    print!("{json}");
    for r in report.residuals.iter().filter(|r| !r.pass) {
        eprintln!("residual {} = {:e} fails tolerance {:e}", r.name, r.value, r.tol);
    }
    Ok(report.passed)
}

fn mesh_surface(path: &Path, grid: Option<&str>, noise: Option<f64>) -> Result<SurfaceGrid, Failure> {
    let mesh = obj::parse_obj(&read(path)?).map_err(|e| Failure::io(path, e))?;
    let lattice = match (grid, mesh.lattice) {
        (Some(g), _) => {
            let (nx, ny, h) = scenario::GridSpec::parse_override(g)?;
            surface_forge_core::quatgeo::Lattice::new(nx, ny, 0.0, 0.0, h, h)
        }
        (None, Some(l)) => l,
        (None, None) => return Err(Failure::validation("mesh has no lattice header; pass --grid nx,ny,h")),
    };
    if lattice.len() != mesh.vertices.len() {
        return Err(Failure::validation(format!("grid has {} nodes, mesh {} vertices", lattice.len(), mesh.vertices.len())));
    }
    if lattice.nx < scenario::MIN_NODES || lattice.ny < scenario::MIN_NODES {
        return Err(Failure::validation(format!("mesh grid {}x{} is too small", lattice.nx, lattice.ny)));
    }
    let mut f = mesh.vertices;
    if let Some(a) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(seed());
        for p in &mut f {
            *p = ImVec3::new(p.x1 + a * rng.gen_range(-1.0..1.0), p.x2 + a * rng.gen_range(-1.0..1.0), p.x3 + a * rng.gen_range(-1.0..1.0));
        }
    }
    SurfaceGrid::from_immersion(lattice, f, Stencil::Fourth).map_err(|e| Failure::numeric("quatgeo", e))
}

fn execute(verb: Verb) -> Result<bool, Failure> {
    match verb {
        Verb::Generate { common } => {
            let s = load(&common)?;
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let o = run::run(&s)?;
            for (name, text) in &o.meshes {
                write(&out, name, text)?;
            }
            finish_report(&o.report, Some(&out))
        }
        Verb::Verify { common, mesh, noise } => {
            let report = match mesh {
                Some(path) => run::verify_mesh(&mesh_surface(&path, common.grid.as_deref(), noise)?, common.tol)?,
                None => run::run(&load(&common)?)?.report,
            };
            finish_report(&report, common.out.as_deref())
        }
        Verb::Sweep { common, param, values } => {
            let s = load(&common)?;
            let p = commands::SweepParam::parse(&param)?;
            let vals = commands::parse_values(p, &values)?;
            let (csv, ok) = commands::sweep(&s, p, &vals)?;
            if let Some(dir) = &common.out {
                write(dir, "sweep.csv", &csv)?;
            }
            print!("{csv}");
            Ok(ok)
        }
        Verb::ThetaEval { common } => {
            let path = common.scenario.as_ref().ok_or_else(|| Failure::validation("--scenario is required"))?;
            let json = commands::theta_eval(&read(path)?)?;
            if let Some(dir) = &common.out {
                write(dir, "theta.json", &json)?;
            }
            print!("{json}");
            Ok(true)
        }
        Verb::PviRoundtrip { common, plus } => {
            let s = load(&common)?;
            let report = commands::pvi_roundtrip(&s, !plus)?;
            finish_report(&report, common.out.as_deref())
        }
    }
}

fn threads(verb: &Verb) -> Option<usize> {
    match verb {
        Verb::Generate { common }
        | Verb::Verify { common, .. }
        | Verb::Sweep { common, .. }
        | Verb::ThetaEval { common }
        | Verb::PviRoundtrip { common, .. } => common.threads,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = threads(&cli.verb) {
        if n == 0 || rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            eprintln!("error [input] cannot use {n} threads");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    let result = execute(cli.verb);
    eprintln!("runtime {:.3} s", start.elapsed().as_secs_f64());
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(f) => {
            eprintln!("error {f}");
            ExitCode::from(f.code)
        }
    }
}
