use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ngo_core::{InitMode, PhaseMethod};
use ngo_harness::report::write_csv;
use ngo_harness::runs::{run_asymptotic_compare, run_convergence, run_hopping, run_solutions, run_timeseries};
use ngo_harness::{HarnessError, Overrides, ReferenceCache, Result, RunConfig};

/// Nonlinear geometric optics solvers: sweeps, time series and timings.
#[derive(Parser)]
#[command(name = "ngo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single scalar NGO runs; writes the reconstructed solutions.
    Scalar(Common),
    /// Single 2×2 system NGO runs; writes the reconstructed solutions.
    System(Common),
    /// NGO and direct kinetic runs: slices at p = 0, densities, timings.
    Hopping(Common),
    /// ℓ∞ error against a resolved reference for every (ε, N_ts).
    Convergence(Common),
    /// Distance between the NGO profile and the limit model.
    Asymptotic(Common),
    /// ℛ(t) = |∫ u x dx| of the NGO and reference runs.
    Timeseries(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset used when the file names none.
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated ε values.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Comma-separated spatial resolutions.
    #[arg(long, value_delimiter = ',')]
    nts: Option<Vec<usize>>,
    /// corrected | uncorrected
    #[arg(long)]
    init: Option<InitMode>,
    /// exact | upwind1 | spectral_rk4
    #[arg(long)]
    phase: Option<PhaseMethod>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, default_preset: &str) -> Result<RunConfig> {
        let preset = self.preset.as_deref().unwrap_or(default_preset);
        let mut cfg = RunConfig::load(self.config.as_deref(), preset)?;
        cfg.apply(&Overrides {
            epsilons: self.epsilon.clone(),
            n_ts: self.nts.clone(),
            init: self.init,
            phase: self.phase,
            out: self.out.clone(),
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn written(path: &Path) {
    println!("wrote {}", path.display());
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scalar(args) => single(&args.resolve("scalar_smooth")?)?,
        Command::System(args) => single(&args.resolve("system")?)?,
        Command::Convergence(args) => {
            let cfg = args.resolve("scalar_smooth")?;
            let report = run_convergence(&cfg, &ReferenceCache::new())?;
            for r in &report.rows {
                println!("ε = {:<8} N_ts = {:<5} error = {:.3e}  ({:.3} s)", r.epsilon, r.n_ts, r.linf_error, r.wall_seconds);
            }
            written(&report.write(&cfg.out, &format!("convergence_{}", cfg.kind))?);
        }
        Command::Asymptotic(args) => {
            let cfg = args.resolve("scalar_smooth")?;
            let report = run_asymptotic_compare(&cfg)?;
            for r in &report.rows {
                println!("ε = {:<8} N_ts = {:<5} distance = {:.3e}", r.epsilon, r.n_ts, r.linf_error);
            }
            written(&report.write(&cfg.out, "asymptotic")?);
        }
        Command::Timeseries(args) => {
            let cfg = args.resolve("scalar_timeseries")?;
            let ts = run_timeseries(&cfg)?;
            for r in &ts.gaps.rows {
                println!("ε = {:<8} N_ts = {:<5} max |ℛ_ngo − ℛ_ref| = {:.3e}", r.epsilon, r.n_ts, r.linf_error);
            }
            written(&write_csv(&cfg.out, "timeseries", &ts.series)?);
            written(&write_csv(&cfg.out, "snapshots", &ts.snapshots)?);
            written(&ts.gaps.write(&cfg.out, "timeseries_gap")?);
        }
        Command::Hopping(args) => {
            let cfg = args.resolve("hopping")?;
            let out = run_hopping(&cfg)?;
            for c in &out.cases {
                print!("ε = {:<10} NGO {:.3} s", c.epsilon, c.ngo_seconds);
                if let Some(r) = &c.reference {
                    print!(
                        ", direct {:.3} s; slice error {:.3e}, density error {:.3e}",
                        r.seconds, r.slice_error, r.density_error
                    );
                }
                println!();
            }
            written(&write_csv(&cfg.out, "hopping_slices", &out.slices)?);
            written(&write_csv(&cfg.out, "hopping_densities", &out.densities)?);
            let mut timings = out.timings;
            for c in &out.cases {
                timings.note(&format!("ngo_mass_drift[eps={}]", c.epsilon), (c.ngo_mass.1 - c.ngo_mass.0).abs());
                timings.note(
                    &format!("ngo_averaged_mass_drift[eps={}]", c.epsilon),
                    (c.ngo_averaged_mass.1 - c.ngo_averaged_mass.0).abs(),
                );
                if let Some(r) = &c.reference {
                    timings.note(&format!("direct_mass_drift[eps={}]", c.epsilon), r.mass_drift);
                    timings.note(&format!("time_ratio_direct_over_ngo[eps={}]", c.epsilon), r.seconds / c.ngo_seconds);
                }
            }
            written(&timings.write(&cfg.out, "hopping_timings")?);
        }
    }
    Ok(())
}

fn single(cfg: &RunConfig) -> Result<()> {
    let (rows, timings) = run_solutions(cfg)?;
    for (eps, n, secs) in timings {
        println!("ε = {eps:<8} N_ts = {n:<5} {secs:.3} s");
    }
    written(&write_csv(&cfg.out, &format!("{}_solution", cfg.kind), &rows)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code: HarnessError = e;
            ExitCode::from(code.exit_code() as u8)
        }
    }
}
