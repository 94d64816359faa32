//! `pspin`: simulate, solve, compare and the reference oracles.
//!
//! Exit status is 0 on success, 1 on a domain failure (including a failed
//! comparison) and 2 on a usage error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use pspin_core::ck::{solve_ck, ConstraintMode};
use pspin_core::compare::{compare_grids, convergence_study};
use pspin_core::config::{read_config, Overrides, RunConfig};
use pspin_core::io::{self, Manifest, PlotPoint};
use pspin_core::langevin::simulate;
use pspin_core::model::DisorderMode;
use pspin_core::oracles::{
    bessel_h, beta_zero_solution, catalan, h_series_nc, kernel_mc_check, nc_pairings_enumerate, NcKernel,
};
use pspin_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "pspin", version, about = "Soft-spin p-spin Langevin dynamics and their two-time limit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    mode: Option<ConstraintMode>,
    #[arg(long)]
    disorder: Option<DisorderMode>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = read_config(&self.config)?;
        Overrides { seed: self.seed, realizations: self.realizations, mode: self.mode, disorder: self.disorder }
            .apply(&mut cfg);
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the Langevin simulator and write averaged observables.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the limit equations and write R, C, K and chi.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare simulator output against a solver output.
    Compare {
        #[arg(long)]
        empirical: PathBuf,
        #[arg(long)]
        limit: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
        /// Also write the difference table and long-format plot data here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reference computations.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
    /// Monte-Carlo check of the gradient covariance kernel.
    KernelCheck {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Number of random `(x, y)` pairs.
        #[arg(long, default_value_t = 1)]
        points: usize,
    },
    /// Simulator-vs-solver sup differences over a grid of N and h.
    ConvergenceStudy {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "n-list", value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long = "h-list", value_delimiter = ',', required = true)]
        h_list: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum Oracle {
    /// Catalan/Bessel series h(tau).
    Bessel {
        #[arg(long)]
        tau: f64,
    },
    Catalan {
        #[arg(long)]
        n: usize,
    },
    /// List the non-crossing pairings of 2n points.
    NcPairings {
        #[arg(long)]
        n: usize,
    },
    /// Truncated pairing series with a constant kernel.
    HSeries {
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        tau: f64,
        #[arg(long = "n-max", default_value_t = 4)]
        n_max: usize,
    },
    /// Closed forms with no interaction and constant f' = z.
    BetaZero {
        #[arg(long)]
        z: f64,
        #[arg(long, default_value_t = 1.0)]
        k0: f64,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        t: f64,
    },
}

fn stamp(m: &mut Manifest, started: Instant) {
    m.set("run.version", env!("CARGO_PKG_VERSION"));
    m.set("run.wall_seconds", format!("{:.3}", started.elapsed().as_secs_f64()));
}

fn cmd_simulate(run: &RunArgs, out: &Path) -> Result<bool> {
    let cfg = run.load()?;
    let started = Instant::now();
    let obs = simulate(&cfg.model, &cfg.sim)?;
    let mut m = cfg.to_manifest();
    stamp(&mut m, started);
    let files = io::write_observables(out, &obs, &mut m)?;
    println!("{} realizations, {} snapshots, {} files in {}", obs.n_realizations, obs.len(), files.len(), out.display());
    Ok(true)
}

fn cmd_solve(run: &RunArgs, out: &Path) -> Result<bool> {
    let cfg = run.load()?;
    let started = Instant::now();
    let sol = solve_ck(&cfg.model, &cfg.solver)?;
    let mut m = cfg.to_manifest();
    stamp(&mut m, started);
    io::write_solution(out, &sol, &mut m)?;
    println!(
        "{} grid times, max corrector sweeps {}, K(T) = {:.10}",
        sol.len(),
        sol.diagnostics.max_sweeps(),
        sol.k.last().copied().unwrap_or(f64::NAN)
    );
    Ok(true)
}

fn cmd_compare(empirical: &Path, limit: &Path, tol: f64, out: Option<&Path>) -> Result<bool> {
    let obs = io::read_observables(empirical)?;
    let sol = io::read_solution(limit)?;
    let rep = compare_grids(&obs, &sol, tol)?;
    print!("{}", rep.summary());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        io::write_atomic(&dir.join("differences.csv"), rep.table().as_bytes())?;
        let mut points = Vec::new();
        let stride = rep.solver_stride;
        for s in 0..rep.times.len() {
            for t in 0..=s {
                let (ts, tt) = (rep.times[s], rep.times[t]);
                points.push(PlotPoint { s: ts, t: tt, value: obs.c.get(s, t), source: "C_empirical" });
                points.push(PlotPoint { s: ts, t: tt, value: sol.c_at(s * stride, t * stride), source: "C_limit" });
                points.push(PlotPoint { s: ts, t: tt, value: obs.chi.get(s, t), source: "chi_empirical" });
                points.push(PlotPoint { s: ts, t: tt, value: sol.chi_at(s * stride, t * stride), source: "chi_limit" });
            }
        }
        io::write_plot_csv(&dir.join("plot.csv"), &points)?;
        io::write_atomic(&dir.join("report.txt"), rep.summary().as_bytes())?;
    }
    Ok(rep.passed())
}

fn cmd_oracle(which: &Oracle) -> Result<bool> {
    match *which {
        Oracle::Bessel { tau } => {
            if !(tau >= 0.0) {
                return Err(Error::InvalidConfig(format!("tau must be >= 0, got {tau}")));
            }
            println!("{:.15}", bessel_h(tau));
        }
        Oracle::Catalan { n } => println!("{}", catalan(n)?),
        Oracle::NcPairings { n } => {
            let all = nc_pairings_enumerate(n)?;
            for p in &all {
                let pairs: Vec<String> = p.pairs_one_based().iter().map(|(a, b)| format!("({a},{b})")).collect();
                let cr: Vec<String> = p.cr().iter().map(|i| (i + 1).to_string()).collect();
                println!("{}  cr={{{}}}", pairs.join(" "), cr.join(","));
            }
            println!("count {}", all.len());
        }
        Oracle::HSeries { c, tau, n_max } => {
            let v = h_series_nc(NcKernel::Constant(c), tau, 0.0, n_max, None)?;
            println!("{:.10}  truncation bound {:.3e}", v.value, v.truncation_bound);
        }
        Oracle::BetaZero { z, k0, s, t } => {
            let v = beta_zero_solution(z, k0, s, t)?;
            println!("R {:.10}\nC {:.10}\nK {:.10}", v.r, v.c, v.k);
        }
    }
    Ok(true)
}

fn cmd_kernel_check(run: &RunArgs, samples: usize, points: usize) -> Result<bool> {
    let cfg = run.load()?;
    let n = cfg.model.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed() ^ 0x6b65_726e);
    let mut draw = || -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..points.max(1)).map(|_| (draw(), draw())).collect();
    let rep = kernel_mc_check(&cfg.model, samples, &pts, cfg.seed())?;
    println!("point\ti\tj\tempirical\tpredicted\tstderr\tz");
    for e in &rep.entries {
        println!(
            "{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.2e}\t{:+.2}",
            e.point,
            e.i,
            e.j,
            e.empirical,
            e.predicted,
            e.stderr,
            e.z_score()
        );
    }
    let worst = rep.max_abs_z();
    println!("max |z| = {worst:.3}");
    Ok(worst <= 5.0)
}

fn cmd_convergence(run: &RunArgs, ns: &[usize], hs: &[f64], out: Option<&Path>) -> Result<bool> {
    let cfg = run.load()?;
    let table = convergence_study(&cfg.model, &cfg.sim, &cfg.solver, ns, hs)?;
    let text = table.render();
    print!("{text}");
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        io::write_atomic(&dir.join("convergence.tsv"), text.as_bytes())?;
        cfg.to_manifest().write(&dir.join(io::MANIFEST_FILE))?;
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { run, out } => cmd_simulate(run, out),
        Command::Solve { run, out } => cmd_solve(run, out),
        Command::Compare { empirical, limit, tol, out } => cmd_compare(empirical, limit, *tol, out.as_deref()),
        Command::Oracle { which } => cmd_oracle(which),
        Command::KernelCheck { run, samples, points } => cmd_kernel_check(run, *samples, *points),
        Command::ConvergenceStudy { run, n_list, h_list, out } => cmd_convergence(run, n_list, h_list, out.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
