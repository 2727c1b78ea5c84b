//! Command-line front end: seeded, scriptable, CSV-emitting.
//!
//! Exit codes: 0 ok, 2 grid error, 3 Monte Carlo / numeric flag, 64 usage.

use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use fkpp::branching::{self, BranchingConfig};
use fkpp::config::RunConfig;
use fkpp::control::{self, ConstantPolicy, Policy, RampPolicy};
use fkpp::error::Error;
use fkpp::levy::SpeedMethod;
use fkpp::{reaction, semigroup};

const EXIT_GRID: u8 = 2;
const EXIT_MC: u8 = 3;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "fkpp", version, about = "Numerical laboratory for convex reaction-diffusion fronts")]
struct Cli {
    /// Plain-text key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master random seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread count (results are thread-count invariant).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write CSV here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Turn soft flags (saturation, cap hits) into a nonzero exit.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    /// Horizon t.
    #[arg(long)]
    t: Option<f64>,
    /// Evaluation point x.
    #[arg(long)]
    x: Option<f64>,
    /// Bracket-gap tolerance for the solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Monte Carlo paths (control) or runs (branching).
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Front speed q by all three formulas.
    Speed(Overrides),
    /// Trotter-bracket solution profile at time t.
    Solve(Overrides),
    /// Bracket gap as the splitting count n doubles.
    Bounds(Overrides),
    /// PDE front median vs the closed-form median bounds.
    Median {
        #[command(flatten)]
        over: Overrides,
        /// Comma-separated horizons.
        #[arg(long, default_value = "1,2,4")]
        t_list: String,
    },
    /// Policy values of the control functional vs the PDE solution.
    Control(Overrides),
    /// Branching simulator: per-run outcomes or the speed experiment.
    Branch {
        #[command(flatten)]
        over: Overrides,
        /// Comma-separated horizons for the speed experiment.
        #[arg(long, default_value = "1,2,4")]
        t_list: String,
        /// Emit one row per run instead of the speed summary.
        #[arg(long)]
        per_run: bool,
    },
    /// Empirical extinction fraction vs the generating-function root.
    Extinction(Overrides),
}

/// Decimal output with 9 significant digits (scientific far from 1).
fn g9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..=9).contains(&mag) {
        format!("{x:.8e}")
    } else {
        format!("{:.*}", (8 - mag).max(0) as usize, x)
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

/// Map library errors to exit codes; `mc_context` decides whether domain
/// errors came from a Monte Carlo command (3) or config plumbing (64).
fn classify(err: Error, mc_context: bool) -> Failure {
    let code = match &err {
        Error::GridTooSmall(_) => EXIT_GRID,
        Error::NoCrossing(_) => EXIT_GRID,
        Error::Config(_) => EXIT_USAGE,
        Error::Domain(_) => {
            if mc_context {
                EXIT_MC
            } else {
                EXIT_USAGE
            }
        }
    };
    Failure::new(code, err.to_string())
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        None => RunConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text).map_err(|e| classify(e, false))?
        }
    };
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed);
    }
    Ok(cfg)
}

fn apply_overrides(cfg: &mut RunConfig, over: &Overrides) {
    if let Some(t) = over.t {
        cfg.set("t", t);
    }
    if let Some(x) = over.x {
        cfg.set("x", x);
    }
    if let Some(tol) = over.tol {
        cfg.set("tol", tol);
    }
}

fn parse_t_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Failure::new(EXIT_USAGE, format!("bad t_list entry {s:?}")))
        })
        .collect()
}

fn cmd_speed(cfg: &RunConfig, strict: bool) -> Result<String, Failure> {
    let model = cfg.model().map_err(|e| classify(e, false))?;
    let rf = reaction::ReactionFn::new(cfg.offspring().map_err(|e| classify(e, false))?)
        .map_err(|e| classify(e, false))?;
    let mut out = String::from("method,q,theta_star,saturated\n");
    let mut any_saturated = false;
    for method in SpeedMethod::ALL {
        let r = model
            .front_speed_by(rf.gamma(), method)
            .map_err(|e| classify(e, false))?;
        any_saturated |= r.saturated;
        out.push_str(&format!(
            "{},{},{},{}\n",
            method.name(),
            g9(r.q),
            g9(r.theta_star),
            r.saturated
        ));
    }
    if strict && any_saturated {
        return Err(Failure::new(EXIT_MC, format!("{out}saturated speed formula")));
    }
    Ok(out)
}

fn solve_outcome(cfg: &RunConfig) -> Result<(semigroup::SolveOutcome, f64), Failure> {
    let model = cfg.model().map_err(|e| classify(e, false))?;
    let rf = reaction::ReactionFn::new(cfg.offspring().map_err(|e| classify(e, false))?)
        .map_err(|e| classify(e, false))?;
    let u0 = cfg.grid().map_err(|e| classify(e, false))?;
    let t = cfg.t().map_err(|e| classify(e, false))?;
    let tol = cfg.tol().map_err(|e| classify(e, false))?;
    let n_max = cfg.n_max().map_err(|e| classify(e, false))?;
    let outcome =
        semigroup::solve(&model, &rf, &u0, t, tol, n_max).map_err(|e| classify(e, false))?;
    Ok((outcome, t))
}

fn cmd_solve(cfg: &RunConfig, strict: bool) -> Result<String, Failure> {
    let (outcome, _) = solve_outcome(cfg)?;
    if strict && !outcome.converged {
        return Err(Failure::new(EXIT_GRID, "bracket gap tolerance not reached"));
    }
    let mut out = String::from("x,lower,mid,upper\n");
    for i in 0..outcome.mid.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            g9(outcome.mid.x(i)),
            g9(outcome.bracket.lower.values()[i]),
            g9(outcome.mid.values()[i]),
            g9(outcome.bracket.upper.values()[i]),
        ));
    }
    Ok(out)
}

fn cmd_bounds(cfg: &RunConfig) -> Result<String, Failure> {
    let model = cfg.model().map_err(|e| classify(e, false))?;
    let rf = reaction::ReactionFn::new(cfg.offspring().map_err(|e| classify(e, false))?)
        .map_err(|e| classify(e, false))?;
    let u0 = cfg.grid().map_err(|e| classify(e, false))?;
    let t = cfg.t().map_err(|e| classify(e, false))?;
    let x = cfg.x().map_err(|e| classify(e, false))?;
    let mut out = String::from("n,lower_at_x,upper_at_x,gap\n");
    let mut n = 1;
    while n <= 64 {
        let bracket = semigroup::trotter_bounds(&model, &rf, &u0, t, n)
            .map_err(|e| classify(e, false))?;
        out.push_str(&format!(
            "{n},{},{},{}\n",
            g9(bracket.lower.eval(x)),
            g9(bracket.upper.eval(x)),
            g9(bracket.gap),
        ));
        n *= 2;
    }
    Ok(out)
}

fn cmd_median(cfg: &RunConfig, t_list: &[f64]) -> Result<String, Failure> {
    let mut out = String::from("t,median,lo,hi\n");
    for &t in t_list {
        let mut cfg_t = cfg.clone();
        cfg_t.set("t", t);
        let (outcome, _) = solve_outcome(&cfg_t)?;
        let m = semigroup::median(&outcome.mid, 0.5).map_err(|e| classify(e, false))?;
        // Best closed-form bounds over a small (b, n) menu.
        let mut best_lo = f64::NEG_INFINITY;
        let mut best_hi = f64::INFINITY;
        for &b in &[0.6, 0.75, 0.9] {
            for n in [1, 2, 4] {
                let (lo, hi) = semigroup::median_bounds_dyadic(t, n, b)
                    .map_err(|e| classify(e, false))?;
                best_lo = best_lo.max(lo);
                best_hi = best_hi.min(hi);
            }
        }
        out.push_str(&format!("{},{},{},{}\n", g9(t), g9(m), g9(best_lo), g9(best_hi)));
    }
    Ok(out)
}

fn cmd_control(cfg: &RunConfig) -> Result<String, Failure> {
    let model = cfg.model().map_err(|e| classify(e, false))?;
    let rf = reaction::ReactionFn::new(cfg.offspring().map_err(|e| classify(e, false))?)
        .map_err(|e| classify(e, false))?;
    let u0 = cfg.grid().map_err(|e| classify(e, false))?;
    let t = cfg.t().map_err(|e| classify(e, false))?;
    let x = cfg.x().map_err(|e| classify(e, false))?;
    let tol = cfg.tol().map_err(|e| classify(e, false))?;
    let n_max = cfg.n_max().map_err(|e| classify(e, false))?;
    let n_paths = cfg.n_paths().map_err(|e| classify(e, false))?;
    let j_steps = cfg.j_steps().map_err(|e| classify(e, false))?;
    let seed = cfg.seed().map_err(|e| classify(e, false))?;

    let outcome = semigroup::solve(&model, &rf, &u0, t, tol, n_max).map_err(|e| classify(e, false))?;
    let mid = outcome.mid.eval(x);
    let gap = outcome.bracket.gap;

    let zero = ConstantPolicy::new(0.0, "zero");
    let minus_one = ConstantPolicy::new(-1.0, "minus-one");
    let ramp = RampPolicy {
        t,
        z_start: rf.gamma(),
        z_end: -1.0,
    };
    let optimal =
        control::optimal_policy(&model, &rf, &u0, t, j_steps).map_err(|e| classify(e, true))?;
    let policies: [&dyn Policy; 4] = [&zero, &minus_one, &ramp, &optimal];

    let mut out = String::from("policy,mean,stderr,solve_mid,solve_gap\n");
    for (k, policy) in policies.iter().enumerate() {
        let est = control::estimate_value(
            &model,
            x,
            t,
            *policy,
            &rf,
            &u0,
            n_paths,
            j_steps,
            seed.wrapping_add(k as u64),
        )
        .map_err(|e| classify(e, true))?;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            policy.name(),
            g9(est.mean),
            g9(est.stderr),
            g9(mid),
            g9(gap)
        ));
    }
    let checkpoints = [0.0, 0.25 * t, 0.5 * t, 0.75 * t, t];
    let report = control::martingale_check(
        &model,
        &rf,
        optimal.snapshots(),
        x,
        t,
        &checkpoints,
        n_paths,
        seed.wrapping_add(17),
    )
    .map_err(|e| classify(e, true))?;
    out.push_str(&format!(
        "martingale_max_dev,{},{},{},{}\n",
        g9(report.max_deviation),
        g9(report.max_stderr),
        g9(mid),
        g9(gap)
    ));
    Ok(out)
}

fn branching_config(cfg: &RunConfig) -> Result<BranchingConfig, Failure> {
    let model = cfg.model().map_err(|e| classify(e, false))?;
    let law = cfg.offspring().map_err(|e| classify(e, false))?;
    let mut bc = BranchingConfig::new(model, law);
    bc.cap = cfg.cap().map_err(|e| classify(e, false))?;
    Ok(bc)
}

fn cmd_branch(
    cfg: &RunConfig,
    t_list: &[f64],
    per_run: bool,
    strict: bool,
) -> Result<String, Failure> {
    let bc = branching_config(cfg)?;
    let n_runs = cfg.n_runs().map_err(|e| classify(e, false))?;
    let seed = cfg.seed().map_err(|e| classify(e, false))?;
    if per_run {
        let t = cfg.t().map_err(|e| classify(e, false))?;
        let mut out = String::from("t,run,status,n_particles,rightmost\n");
        for i in 0..n_runs {
            let mut rng = fkpp::seeding::stream(seed, i as u64);
            let run = branching::simulate(&bc, t, &mut rng);
            out.push_str(&format!(
                "{},{i},{},{},{}\n",
                g9(t),
                run.status.name(),
                run.n_particles,
                if run.rightmost.is_finite() {
                    g9(run.rightmost)
                } else {
                    "-inf".into()
                }
            ));
        }
        return Ok(out);
    }
    let rows =
        branching::speed_experiment(&bc, t_list, n_runs, seed).map_err(|e| classify(e, true))?;
    let capped: usize = rows.iter().map(|r| r.capped_runs).sum();
    let mut out = String::from("t,median_speed,q10,q90,extinct_frac,capped_runs\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            g9(r.t),
            g9(r.median_speed),
            g9(r.q10),
            g9(r.q90),
            g9(r.extinct_frac),
            r.capped_runs
        ));
    }
    if strict && capped > 0 {
        return Err(Failure::new(EXIT_MC, format!("{out}runs hit the particle cap")));
    }
    Ok(out)
}

fn cmd_extinction(cfg: &RunConfig) -> Result<String, Failure> {
    let bc = branching_config(cfg)?;
    let n_runs = cfg.n_runs().map_err(|e| classify(e, false))?;
    let seed = cfg.seed().map_err(|e| classify(e, false))?;
    let t_long = cfg.t_long().map_err(|e| classify(e, false))?;
    let estimate = branching::extinction_estimate(&bc, t_long, n_runs, seed);
    let alpha = bc.law.extinction_prob().value;
    Ok(format!(
        "t_long,n_runs,estimate,alpha,abs_error\n{},{n_runs},{},{},{}\n",
        g9(t_long),
        g9(estimate),
        g9(alpha),
        g9((estimate - alpha).abs())
    ))
}

fn run(cli: &Cli) -> Result<String, Failure> {
    if let Some(n) = cli.threads {
        // Results are seed-keyed per work item, so this only affects wall
        // time, never output.
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    }
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Speed(over) => {
            apply_overrides(&mut cfg, over);
            cmd_speed(&cfg, cli.strict)
        }
        Command::Solve(over) => {
            apply_overrides(&mut cfg, over);
            cmd_solve(&cfg, cli.strict)
        }
        Command::Bounds(over) => {
            apply_overrides(&mut cfg, over);
            cmd_bounds(&cfg)
        }
        Command::Median { over, t_list } => {
            apply_overrides(&mut cfg, over);
            cmd_median(&cfg, &parse_t_list(t_list)?)
        }
        Command::Control(over) => {
            apply_overrides(&mut cfg, over);
            if let Some(n) = over.n {
                cfg.set("n_paths", n);
            }
            cmd_control(&cfg)
        }
        Command::Branch {
            over,
            t_list,
            per_run,
        } => {
            apply_overrides(&mut cfg, over);
            if let Some(n) = over.n {
                cfg.set("n_runs", n);
            }
            cmd_branch(&cfg, &parse_t_list(t_list)?, *per_run, cli.strict)
        }
        Command::Extinction(over) => {
            apply_overrides(&mut cfg, over);
            if let Some(n) = over.n {
                cfg.set("n_runs", n);
            }
            cmd_extinction(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(csv) => {
            match &cli.out {
                Some(path) => {
                    if let Err(e) = fs::write(path, &csv) {
                        eprintln!("{}: {e}", path.display());
                        return ExitCode::from(EXIT_USAGE);
                    }
                }
                None => {
                    let mut stdout = std::io::stdout();
                    let _ = stdout.write_all(csv.as_bytes());
                }
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("fkpp: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
