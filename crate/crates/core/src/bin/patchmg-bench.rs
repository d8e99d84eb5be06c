use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use patchmg::bench::{
    run_global_config, run_single_patch_config, write_global_row, write_single_patch_row, MeshKind, GLOBAL_HEADER,
    SINGLE_PATCH_HEADER,
};
use patchmg::mesh::PatchKind;
use patchmg::pmg::SmootherKind;

/// Iteration-count experiments for the patch-smoothed multigrid solver.
#[derive(Parser)]
#[command(name = "patchmg-bench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CG on one standalone patch preconditioned by a local p-multigrid V-cycle.
    SinglePatch(Common),
    /// GMRES on a multilevel hierarchy preconditioned by the global V-cycle.
    Global(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Polynomial degrees (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "3")]
    degree: Vec<usize>,
    /// Refinement levels (global runs); defaults to 5 in 2D and 3 in 3D.
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long, default_value = "cartesian")]
    mesh: MeshKind,
    /// Distortion factors (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    distortion: Vec<f64>,
    /// Coefficient of the first patch cell (single-patch runs).
    #[arg(long, value_delimiter = ',', default_value = "1")]
    mu: Vec<f64>,
    #[arg(long, default_value = "jacobi")]
    smoother: SmootherKind,
    /// Local V-cycles per patch solve (global runs).
    #[arg(long, default_value_t = 1)]
    nmg: usize,
    /// Realizations per configuration; defaults to 20 (single-patch) or 1 (global).
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Kershaw anisotropy parameter.
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn single_patch(c: &Common) -> Result<(), Box<dyn std::error::Error>> {
    let kind = match c.mesh {
        MeshKind::Cartesian => PatchKind::Cartesian,
        MeshKind::SimplexPatch => PatchKind::Simplex,
        MeshKind::Kershaw => return Err("single-patch runs support cartesian and simplex-patch meshes".into()),
    };
    let realizations = c.realizations.unwrap_or(20);
    let mut out = open(&c.out)?;
    writeln!(out, "{SINGLE_PATCH_HEADER}")?;
    for &p in &c.degree {
        for &delta in &c.distortion {
            for &mu in &c.mu {
                let row = run_single_patch_config(kind, c.dim, p, delta, mu, c.smoother, realizations, c.seed, c.tol)?;
                if row.rejected > 0 {
                    eprintln!("p={p} delta={delta} mu={mu}: {} realizations rejected as degenerate", row.rejected);
                }
                write_single_patch_row(&mut out, &row)?;
                out.flush()?;
            }
        }
    }
    Ok(())
}

fn global(c: &Common) -> Result<(), Box<dyn std::error::Error>> {
    let levels = c.levels.unwrap_or(if c.dim == 2 { 5 } else { 3 });
    let realizations = c.realizations.unwrap_or(1);
    let mut out = open(&c.out)?;
    writeln!(out, "{GLOBAL_HEADER}")?;
    for &p in &c.degree {
        for &delta in &c.distortion {
            for r in 0..realizations as u64 {
                let row = run_global_config(
                    c.dim,
                    p,
                    levels,
                    c.mesh,
                    delta,
                    c.epsilon,
                    c.smoother,
                    c.nmg,
                    c.seed.wrapping_add(r),
                    c.tol,
                )?;
                write_global_row(&mut out, &row)?;
                out.flush()?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SinglePatch(c) => single_patch(c),
        Command::Global(c) => global(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
