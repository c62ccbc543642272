use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crimesim::convergence::{convergence_test, ConvergenceReport, TEST_NAMES};
use crimesim::diagnostics::{
    boundedness_audit_with, mass_ledger_check, min_v_lower_bound_check, refinement_blowup_classifier,
};
use crimesim::io::{load_scenario_with_overrides, read_diagnostics_csv, read_manifest, run_scenario, DIAGNOSTICS_FILE};
use crimesim::{Error, FinalStatus};

#[derive(Parser)]
#[command(name = "crimesim", version, about = "Cross-diffusion urban crime simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write snapshots, diagnostics and a manifest.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        ny: Option<usize>,
        /// `key.path=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Audit a finished run directory.
    Audit { run_dir: PathBuf },
    /// Grid-refinement blow-up classification.
    Classify {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [64usize, 128, 256])]
        grids: Vec<usize>,
    },
    /// Manufactured-solution convergence tests.
    Convergence {
        /// One of laplacian, diffusion, full, temporal, or all.
        #[arg(long, default_value = "all")]
        test: String,
    },
}

fn exit_for(e: &Error) -> ExitCode {
    match e {
        Error::Validation { .. }
        | Error::ScenarioParse { .. }
        | Error::UnknownTest(_)
        | Error::InvalidRefinement(_) => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn simulate(
    scenario: &Path,
    out: &Path,
    nx: Option<usize>,
    ny: Option<usize>,
    mut overrides: Vec<String>,
) -> Result<ExitCode, Error> {
    if let Some(n) = nx {
        overrides.push(format!("grid.nx={n}"));
    }
    if let Some(n) = ny {
        overrides.push(format!("grid.ny={n}"));
    }
    let s = load_scenario_with_overrides(scenario, &overrides)?;
    let m = run_scenario(&s, out)?;
    println!(
        "{}: {:?} at t = {} after {} steps ({:.1} s), peak linf(u) = {:.6e}",
        s.name, m.final_status, m.final_time, m.steps, m.wall_time_s, m.peak_linf_u
    );
    if let Some(c) = &m.cause {
        println!("cause: {c}");
    }
    println!("outputs written to {}", out.display());
    Ok(if m.final_status == FinalStatus::Failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn audit(dir: &Path) -> Result<ExitCode, Error> {
    let manifest = read_manifest(dir)?;
    let rec = read_diagnostics_csv(&dir.join(DIAGNOSTICS_FILE))?;
    let first = rec.rows.first().ok_or(Error::EmptyRecord)?;
    println!(
        "run `{}`: {:?}, {} rows",
        manifest.scenario.name,
        manifest.final_status,
        rec.len()
    );

    let mv = min_v_lower_bound_check(&rec, first.min_v)?;
    println!(
        "{}  min_v lower bound        worst ratio {:.6} at t = {}",
        mark(mv.passed),
        mv.worst_ratio,
        mv.worst_t
    );
    let ml = mass_ledger_check(&rec)?;
    println!(
        "{}  mass ledger              defect {:.3e}, clipped {:.3e}, worst flux-div {:.3e}",
        mark(ml.closes(1e-3)),
        ml.cumulative_defect,
        ml.clipped_mass,
        ml.worst_flux_div
    );
    match boundedness_audit_with(
        &rec,
        manifest.scenario.model.m,
        manifest.scenario.diagnostics.plateau_factor,
    ) {
        Ok(b) => {
            for mon in &b.monitors {
                let label = if b.in_bounded_regime {
                    mark(mon.plateaued)
                } else {
                    "INFO"
                };
                println!(
                    "{label}  plateau {:<16} sup {:.6e}, middle half {:.6e}, last quarter {:.6e}",
                    mon.name, mon.sup, mon.middle_half_sup, mon.last_quarter_sup
                );
            }
            if !b.in_bounded_regime {
                println!("      (m <= 3/2: plateau results are informational)");
            }
        }
        Err(e) => println!("SKIP  boundedness audit: {e}"),
    }
    Ok(if manifest.final_status == FinalStatus::Failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn classify(scenario: &Path, grids: &[usize]) -> Result<ExitCode, Error> {
    let s = load_scenario_with_overrides(scenario, &[])?;
    let grids: Vec<(usize, usize)> = grids.iter().map(|&n| (n, n)).collect();
    let r = refinement_blowup_classifier(&s, &grids)?;
    for ((g, p), st) in r.grids.iter().zip(&r.peaks).zip(&r.statuses) {
        println!("{}x{}  peak linf(u) = {:.6e}  ({:?})", g.0, g.1, p, st);
    }
    println!("classification: {:?}", r.classification);
    Ok(ExitCode::SUCCESS)
}

fn print_convergence(r: &ConvergenceReport) {
    let range = match r.max_ratio {
        Some(hi) => format!("[{}, {}]", r.min_ratio, hi),
        None => format!(">= {}", r.min_ratio),
    };
    println!(
        "{}  {:<10} errors {:?}  ratios {:?}  expected {range}",
        mark(r.passed),
        r.test,
        r.errors,
        r.ratios
    );
}

fn convergence(test: &str) -> Result<ExitCode, Error> {
    let names: Vec<&str> = if test == "all" { TEST_NAMES.to_vec() } else { vec![test] };
    let mut ok = true;
    for name in names {
        let r = convergence_test(name)?;
        print_convergence(&r);
        ok &= r.passed;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            out,
            nx,
            ny,
            overrides,
        } => simulate(&scenario, &out, nx, ny, overrides),
        Command::Audit { run_dir } => audit(&run_dir),
        Command::Classify { scenario, grids } => classify(&scenario, &grids),
        Command::Convergence { test } => convergence(&test),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    }
}
