//! Event-driven branching Lévy process simulator.
//!
//! Each particle lives an `Exp(1)` lifetime, moves by exact `L`-increments
//! over its lifetime (no time discretization needed), and is replaced at
//! death by `N` children at its position. The simulator verifies the
//! Skorokhod–McKean identity `u(t,x) = E_x[prod_i u0(x - L_t^i)]`, the
//! extinction probability, and the rightmost-particle speed law.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridFn;
use crate::levy::LevyModel;
use crate::reaction::OffspringLaw;
use crate::seeding;

#[derive(Debug, Clone)]
pub struct BranchingConfig {
    pub model: LevyModel,
    pub law: OffspringLaw,
    /// Maximum live particles before a run aborts with `CapExceeded`.
    pub cap: usize,
    /// Initial position `L_0`.
    pub start: f64,
}

impl BranchingConfig {
    pub fn new(model: LevyModel, law: OffspringLaw) -> Self {
        BranchingConfig {
            model,
            law,
            cap: 1_000_000,
            start: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Alive,
    Extinct,
    CapExceeded,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Alive => "ALIVE",
            Status::Extinct => "EXTINCT",
            Status::CapExceeded => "CAP_EXCEEDED",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    /// Final particle positions `L_t^i`; empty unless `Alive` with
    /// positions requested.
    pub positions: Vec<f64>,
    /// `sup_i L_t^i`, with `sup emptyset = -inf`.
    pub rightmost: f64,
    pub n_particles: usize,
}

#[derive(Clone, Copy)]
enum Mode {
    /// Keep every final position.
    Full,
    /// Track only the running maximum.
    MaxOnly,
}

fn simulate_core<R: Rng + ?Sized>(
    config: &BranchingConfig,
    t: f64,
    rng: &mut R,
    mode: Mode,
) -> RunOutcome {
    // Children get generator streams keyed by (run key, particle id), so
    // the outcome does not depend on traversal order details.
    let run_key: u64 = rng.gen();
    let mut next_id: u64 = 0;
    // (particle id, birth position, remaining horizon)
    let mut stack: Vec<(u64, f64, f64)> = vec![(0, config.start, t)];
    next_id += 1;
    let mut positions = Vec::new();
    let mut rightmost = f64::NEG_INFINITY;
    let mut n_particles = 0usize;

    while let Some((id, pos, remaining)) = stack.pop() {
        if stack.len() + n_particles >= config.cap {
            return RunOutcome {
                status: Status::CapExceeded,
                positions: Vec::new(),
                rightmost: f64::NEG_INFINITY,
                n_particles: stack.len() + n_particles + 1,
            };
        }
        let mut prng = seeding::stream(run_key, id);
        let tau: f64 = prng.sample(Exp1);
        if tau >= remaining {
            // Lifetime truncated at the horizon: the particle is alive at t.
            let end = pos + config.model.sample_increment(remaining, &mut prng);
            n_particles += 1;
            rightmost = rightmost.max(end);
            if let Mode::Full = mode {
                positions.push(end);
            }
        } else {
            let branch_pos = pos + config.model.sample_increment(tau, &mut prng);
            let n = self_sample(&config.law, &mut prng);
            for _ in 0..n {
                stack.push((next_id, branch_pos, remaining - tau));
                next_id += 1;
            }
        }
    }

    let status = if n_particles == 0 {
        Status::Extinct
    } else {
        Status::Alive
    };
    RunOutcome {
        status,
        positions,
        rightmost,
        n_particles,
    }
}

fn self_sample<R: Rng + ?Sized>(law: &OffspringLaw, rng: &mut R) -> u32 {
    law.sample(rng)
}

/// One run of the branching process up to time `t`, exact in distribution.
pub fn simulate<R: Rng + ?Sized>(config: &BranchingConfig, t: f64, rng: &mut R) -> RunOutcome {
    if t <= 0.0 {
        return RunOutcome {
            status: Status::Alive,
            positions: vec![config.start],
            rightmost: config.start,
            n_particles: 1,
        };
    }
    simulate_core(config, t, rng, Mode::Full)
}

/// Genealogy-only run: reports whether any lineage is alive at `t`,
/// exiting at the first survivor. Positions are never sampled, which is
/// what makes long horizons (t = 30) affordable.
fn survives<R: Rng + ?Sized>(config: &BranchingConfig, t: f64, rng: &mut R) -> bool {
    let mut stack: Vec<f64> = vec![t];
    while let Some(remaining) = stack.pop() {
        // A population this large goes extinct with probability
        // alpha^cap, far below any resolvable tolerance.
        if stack.len() >= config.cap {
            return true;
        }
        let tau: f64 = rng.sample(Exp1);
        if tau >= remaining {
            return true;
        }
        let n = self_sample(&config.law, rng);
        for _ in 0..n {
            stack.push(remaining - tau);
        }
    }
    false
}

/// Fraction of runs extinct by `t_long`; compare against
/// `reaction::extinction_prob`.
pub fn extinction_estimate(config: &BranchingConfig, t_long: f64, n_runs: usize, seed: u64) -> f64 {
    let extinct: usize = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::stream(seed, i as u64);
            usize::from(!survives(config, t_long, &mut rng))
        })
        .sum();
    extinct as f64 / n_runs as f64
}

/// Monte Carlo estimate of the Skorokhod–McKean product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McKeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_runs: usize,
    /// Runs excluded because they hit the particle cap.
    pub capped_runs: usize,
    /// Set when more than 1% of runs were capped.
    pub flagged: bool,
}

/// Estimate `u(t, x) = E[prod_i u0(x - L_t^i)]` with the empty product
/// equal to 1 on extinction. Capped runs are excluded and counted.
pub fn mckean_check(
    config: &BranchingConfig,
    u0: &GridFn,
    t: f64,
    x: f64,
    n_runs: usize,
    seed: u64,
) -> Result<McKeanEstimate> {
    if n_runs < 2 {
        return Err(Error::domain("mckean_check requires n_runs >= 2"));
    }
    let samples: Vec<Option<f64>> = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::stream(seed, i as u64);
            let run = simulate(config, t, &mut rng);
            match run.status {
                Status::CapExceeded => None,
                _ => Some(
                    run.positions
                        .iter()
                        .map(|&l| u0.eval(x - l))
                        .product::<f64>(),
                ),
            }
        })
        .collect();
    let capped_runs = samples.iter().filter(|s| s.is_none()).count();
    let kept: Vec<f64> = samples.into_iter().flatten().collect();
    if kept.len() < 2 {
        return Err(Error::domain("all runs hit the particle cap"));
    }
    let n = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / n;
    let var = kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McKeanEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n_runs,
        capped_runs,
        flagged: capped_runs as f64 > 0.01 * n_runs as f64,
    })
}

/// One row of the speed experiment: conditional quantiles of `M_t / t`
/// over non-extinct, non-capped runs.
#[derive(Debug, Clone, Copy)]
pub struct SpeedRow {
    pub t: f64,
    pub median_speed: f64,
    pub q10: f64,
    pub q90: f64,
    pub extinct_frac: f64,
    pub capped_runs: usize,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx]
}

/// Empirical speed law: per horizon, the median and [10%, 90%] quantiles
/// of `M_t / t` conditioned on survival.
pub fn speed_experiment(
    config: &BranchingConfig,
    t_list: &[f64],
    n_runs: usize,
    seed: u64,
) -> Result<Vec<SpeedRow>> {
    let gamma = config.law.mean() - 1.0;
    for w in t_list.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::domain("t_list must be strictly ascending"));
        }
    }
    let mut rows = Vec::with_capacity(t_list.len());
    for (ti, &t) in t_list.iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::domain("speed_experiment requires t > 0"));
        }
        // Mean population e^{gamma t} must fit under the cap, otherwise
        // most runs abort and the conditional statistics are meaningless.
        if gamma > 0.0 && (gamma * t).exp() > config.cap as f64 {
            return Err(Error::domain(format!(
                "horizon t = {t} implies mean population above the cap {}",
                config.cap
            )));
        }
        let results: Vec<(Status, f64)> = (0..n_runs)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeding::stream(seed, ((ti as u64) << 40) | i as u64);
                let run = simulate_core(config, t, &mut rng, Mode::MaxOnly);
                (run.status, run.rightmost)
            })
            .collect();
        let capped_runs = results
            .iter()
            .filter(|(s, _)| *s == Status::CapExceeded)
            .count();
        let extinct = results
            .iter()
            .filter(|(s, _)| *s == Status::Extinct)
            .count();
        let mut speeds: Vec<f64> = results
            .iter()
            .filter(|(s, _)| *s == Status::Alive)
            .map(|&(_, m)| m / t)
            .collect();
        if speeds.is_empty() {
            return Err(Error::domain(format!("no surviving runs at t = {t}")));
        }
        speeds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(SpeedRow {
            t,
            median_speed: quantile(&speeds, 0.5),
            q10: quantile(&speeds, 0.1),
            q90: quantile(&speeds, 0.9),
            extinct_frac: extinct as f64 / n_runs as f64,
            capped_runs,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dyadic_bbm() -> BranchingConfig {
        BranchingConfig::new(LevyModel::standard_brownian(), OffspringLaw::dyadic())
    }

    #[test]
    fn no_branching_matches_levy_marginal() {
        let law = OffspringLaw::new(vec![(1, 1.0)]).unwrap();
        let config = BranchingConfig::new(LevyModel::standard_brownian(), law);
        let n = 20_000;
        let mut vals = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = seeding::stream(21, i as u64);
            let run = simulate(&config, 1.0, &mut rng);
            assert_eq!(run.n_particles, 1);
            assert_eq!(run.status, Status::Alive);
            vals.push(run.rightmost);
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(mean, 0.0, epsilon = 0.03);
        assert_abs_diff_eq!(var, 1.0, epsilon = 0.04);
    }

    #[test]
    fn pure_death_extinction_curve() {
        // Single Exp(1) clock: P(extinct by t) = 1 - e^{-t}.
        let law = OffspringLaw::new(vec![(0, 1.0)]).unwrap();
        let config = BranchingConfig::new(LevyModel::standard_brownian(), law);
        let n = 20_000;
        let t = 0.7;
        let p = extinction_estimate(&config, t, n, 31);
        let want = 1.0 - (-t).exp();
        let stderr = (want * (1.0 - want) / n as f64).sqrt();
        assert!((p - want).abs() <= 3.0 * stderr, "p {p} want {want}");
    }

    #[test]
    fn yule_population_growth() {
        // E|I_t| = e^{(E(N)-1) t}; Yule variance e^t (e^t - 1).
        let config = dyadic_bbm();
        for &t in &[0.5f64, 1.0, 2.0] {
            let n = 20_000;
            let mut counts = Vec::with_capacity(n);
            for i in 0..n {
                let mut rng = seeding::stream(101 + t.to_bits(), i as u64);
                counts.push(simulate(&config, t, &mut rng).n_particles as f64);
            }
            let mean = counts.iter().sum::<f64>() / n as f64;
            let want = t.exp();
            let stderr = (want * (want - 1.0) / n as f64).sqrt();
            assert!(
                (mean - want).abs() <= 3.0 * stderr,
                "t {t} mean {mean} want {want}"
            );
        }
    }

    #[test]
    fn drift_only_speed_is_exact() {
        let config = BranchingConfig::new(LevyModel::drift_only(0.7), OffspringLaw::dyadic());
        let rows = speed_experiment(&config, &[2.0], 200, 41).unwrap();
        assert_abs_diff_eq!(rows[0].median_speed, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[0].q10, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(rows[0].q90, 0.7, epsilon = 1e-12);
        assert_eq!(rows[0].extinct_frac, 0.0);
    }

    #[test]
    fn extinction_quarter_three_quarters() {
        let law = OffspringLaw::new(vec![(0, 0.25), (2, 0.75)]).unwrap();
        let config = BranchingConfig::new(LevyModel::standard_brownian(), law);
        let n = 5_000;
        let p = extinction_estimate(&config, 30.0, n, 51);
        let want = 1.0 / 3.0;
        let stderr = (want * (1.0 - want) / n as f64).sqrt();
        assert!((p - want).abs() <= 3.0 * stderr, "p {p}");
        // Dyadic never dies.
        assert_eq!(extinction_estimate(&dyadic_bbm(), 30.0, 200, 52), 0.0);
    }

    #[test]
    fn mckean_trivial_cases() {
        let config = dyadic_bbm();
        let ones = GridFn::constant(-5.0, 5.0, 101, 1.0).unwrap();
        let est = mckean_check(&config, &ones, 1.0, 0.0, 500, 61).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
        assert!(!est.flagged);

        let zeros = GridFn::constant(-5.0, 5.0, 101, 0.0).unwrap();
        let est = mckean_check(&config, &zeros, 1.0, 0.0, 500, 61).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn seed_determinism_and_t_zero() {
        let config = dyadic_bbm();
        let mut a = seeding::stream(71, 0);
        let mut b = seeding::stream(71, 0);
        let ra = simulate(&config, 1.5, &mut a);
        let rb = simulate(&config, 1.5, &mut b);
        assert_eq!(ra.status, rb.status);
        assert_eq!(ra.positions, rb.positions);

        let mut rng = seeding::stream(71, 1);
        let r0 = simulate(&config, 0.0, &mut rng);
        assert_eq!(r0.n_particles, 1);
        assert_eq!(r0.rightmost, 0.0);
    }

    #[test]
    fn cap_aborts_run() {
        let mut config = dyadic_bbm();
        config.cap = 4;
        let mut seen = false;
        for i in 0..50 {
            let mut rng = seeding::stream(81, i);
            let run = simulate(&config, 3.0, &mut rng);
            if run.status == Status::CapExceeded {
                assert!(run.positions.is_empty());
                seen = true;
            }
        }
        assert!(seen);
        assert!(speed_experiment(&config, &[20.0], 10, 82).is_err());
    }
}
