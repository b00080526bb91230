use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use divfree_stokes::study::{parse_levels, run_convergence_study, RunConfig};

#[derive(Parser)]
#[command(name = "divfree-stokes", version, about = "Convergence studies for divergence-free mixed Stokes elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve on a sequence of uniform meshes and tabulate the errors.
    Run {
        /// Velocity degree.
        #[arg(long)]
        k: usize,
        /// Pressure degree, `k` (Raviart–Thomas) or `k - 1` (BDM).
        #[arg(long)]
        l: usize,
        #[arg(long, default_value = "ex1")]
        example: String,
        /// Refinement levels `A:B`, mesh size `h = 2^-level`.
        #[arg(long, default_value = "3:7")]
        levels: String,
        /// Output directory for CSV, markdown, VTK and JSON files.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        postprocess: bool,
        #[arg(long)]
        vtk: bool,
        /// Run the invariant suite on n = 2 and n = 4 after the study.
        #[arg(long)]
        properties: bool,
        /// Fault injection: pair multipliers with the global edge normal.
        #[arg(long)]
        debug_flip_normals: bool,
        /// Largest accepted relative residual of the linear solve.
        #[arg(long, default_value_t = 1e-10)]
        residual_tolerance: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            k,
            l,
            example,
            levels,
            out,
            postprocess,
            vtk,
            properties,
            debug_flip_normals,
            residual_tolerance,
        } => {
            let (first, last) = match parse_levels(&levels) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let mut run = RunConfig::new(k, l, &example, first, last);
            run.out_dir = out;
            run.postprocess = postprocess;
            run.vtk = vtk;
            run.properties = properties;
            run.flip_normals = debug_flip_normals;
            run.residual_tolerance = residual_tolerance;
            if let Err(e) = run.validate() {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if vtk && run.out_dir.is_none() {
                eprintln!("warning: --vtk without --out writes nothing");
            }
            match run_convergence_study(&run) {
                Ok(output) => {
                    print!("{}", output.markdown);
                    if let Some(report) = &output.properties {
                        for p in &report.properties {
                            let mark = if p.passed { "pass" } else { "FAIL" };
                            println!("{mark} {} (worst {:.3e}, tolerance {:.1e})", p.name, p.worst, p.tolerance);
                        }
                        if !report.passed {
                            eprintln!("violated properties: {}", report.failures().join(", "));
                            return ExitCode::FAILURE;
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
