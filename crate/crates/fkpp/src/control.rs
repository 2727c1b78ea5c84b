//! Monte Carlo evaluation of the pathwise control functional
//!
//! ```text
//! Xi(t, X, Z; u0) = e^{int_0^t Z dr} u0(X_t)
//!                   - int_0^t e^{int_0^s Z dr} f_hat(Z_s) ds
//! ```
//!
//! whose supremum over bounded adapted controls equals the PDE solution.
//! Every suboptimal policy gives a lower bound on `u(t, x)`; the feedback
//! policy `z = f'(u(t-s, x))` attains the supremum.
//!
//! Controls are restricted to Markov (state-feedback) policies, which is
//! sufficient because the optimizer is Markov. Both integrals use
//! left-endpoint sums on the path ladder, matching the adaptedness of `Z`
//! (the integrand at `s_j` only uses information available at `s_j`).

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridFn;
use crate::levy::LevyModel;
use crate::reaction::ReactionFn;
use crate::seeding;
use crate::semigroup;

/// A time-discretized trajectory of `X = x - L` on a uniform ladder.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub t: f64,
    /// `J + 1` states, `states[0] = x`.
    pub states: Vec<f64>,
}

impl PathSample {
    pub fn j_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.t / self.j_steps() as f64
    }
}

/// Exact skeleton sampling: `X_{s_{j+1}} = X_{s_j} - increment(L, dt)`.
pub fn sample_path<R: Rng + ?Sized>(
    model: &LevyModel,
    x: f64,
    t: f64,
    j_steps: usize,
    rng: &mut R,
) -> Result<PathSample> {
    if j_steps < 1 {
        return Err(Error::domain("sample_path requires J >= 1"));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("sample_path requires t > 0, got {t}")));
    }
    let dt = t / j_steps as f64;
    let mut states = Vec::with_capacity(j_steps + 1);
    let mut pos = x;
    states.push(pos);
    for _ in 0..j_steps {
        pos -= model.sample_increment(dt, rng);
        states.push(pos);
    }
    Ok(PathSample { t, states })
}

/// Markov control rule `(s, x) -> z`, clamped downstream to `[-1, gamma]`.
pub trait Policy: Sync {
    fn z(&self, s: f64, x: f64) -> f64;
    fn name(&self) -> &str;
}

pub struct ConstantPolicy {
    pub value: f64,
    name: String,
}

impl ConstantPolicy {
    pub fn new(value: f64, name: impl Into<String>) -> Self {
        ConstantPolicy {
            value,
            name: name.into(),
        }
    }
}

impl Policy for ConstantPolicy {
    fn z(&self, _s: f64, _x: f64) -> f64 {
        self.value
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Linear time ramp from `z_start` at `s = 0` to `z_end` at `s = t`.
pub struct RampPolicy {
    pub t: f64,
    pub z_start: f64,
    pub z_end: f64,
}

impl Policy for RampPolicy {
    fn z(&self, s: f64, _x: f64) -> f64 {
        self.z_start + (self.z_end - self.z_start) * (s / self.t).clamp(0.0, 1.0)
    }

    fn name(&self) -> &str {
        "ramp"
    }
}

/// Feedback policy `z(s, x) = f'(u(t - s, x))` built from solver
/// snapshots: nearest snapshot in time, linear interpolation in space.
pub struct OptimalPolicy {
    t: f64,
    rf: ReactionFn,
    snapshots: Vec<GridFn>,
}

impl OptimalPolicy {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn snapshots(&self) -> &[GridFn] {
        &self.snapshots
    }

    /// `u(tau, x)` by nearest snapshot in time.
    pub fn u_at(&self, tau: f64, x: f64) -> f64 {
        let j = self.snapshot_index(tau);
        self.snapshots[j].eval(x).clamp(0.0, 1.0)
    }

    fn snapshot_index(&self, tau: f64) -> usize {
        let n = self.snapshots.len() - 1;
        let frac = (tau / self.t).clamp(0.0, 1.0);
        (frac * n as f64).round() as usize
    }
}

impl Policy for OptimalPolicy {
    fn z(&self, s: f64, x: f64) -> f64 {
        self.rf.f_prime(self.u_at(self.t - s, x)).unwrap()
    }

    fn name(&self) -> &str {
        "optimal"
    }
}

/// Solve the PDE once and wrap the snapshot ladder as a feedback policy.
pub fn optimal_policy(
    model: &LevyModel,
    rf: &ReactionFn,
    u0: &GridFn,
    t: f64,
    j_steps: usize,
) -> Result<OptimalPolicy> {
    let snapshots = semigroup::snapshots(model, rf, u0, t, j_steps)?;
    Ok(OptimalPolicy {
        t,
        rf: rf.clone(),
        snapshots,
    })
}

/// Pathwise value of the functional, plus how many policy outputs had to
/// be clamped into `[-1, gamma]`.
#[derive(Debug, Clone, Copy)]
pub struct XiValue {
    pub value: f64,
    pub clamped_steps: usize,
}

/// Discretized functional: left-endpoint sums for both integrals, the
/// running exponent accumulated once per step.
pub fn xi(path: &PathSample, policy: &dyn Policy, rf: &ReactionFn, u0: &GridFn) -> XiValue {
    let j_steps = path.j_steps();
    let dt = path.dt();
    let gamma = rf.gamma();
    let mut exponent = 0.0f64;
    let mut integral = 0.0;
    let mut clamped_steps = 0;
    for j in 0..j_steps {
        let s = dt * j as f64;
        let raw = policy.z(s, path.states[j]);
        let z = raw.clamp(-1.0, gamma);
        if z != raw {
            clamped_steps += 1;
        }
        integral += dt * exponent.exp() * rf.fhat(z).unwrap();
        exponent += z * dt;
    }
    let value = exponent.exp() * u0.eval(path.states[j_steps]) - integral;
    XiValue {
        value,
        clamped_steps,
    }
}

/// Monte Carlo estimate of `E_x[Xi]` under a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub j_steps: usize,
    pub clamped_steps: usize,
}

/// Seeded estimate of the policy value at `(t, x)`. Path `i` draws from
/// the stream keyed by `(seed, i)`, and the reduction runs in path-index
/// order, so the estimate is identical for any number of workers.
#[allow(clippy::too_many_arguments)] // the problem has this many knobs
pub fn estimate_value(
    model: &LevyModel,
    x: f64,
    t: f64,
    policy: &dyn Policy,
    rf: &ReactionFn,
    u0: &GridFn,
    n_paths: usize,
    j_steps: usize,
    seed: u64,
) -> Result<ValueEstimate> {
    if n_paths < 100 {
        return Err(Error::domain(format!(
            "estimate_value requires n_paths >= 100, got {n_paths}"
        )));
    }
    let evals: Vec<XiValue> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::stream(seed, i as u64);
            let path = sample_path(model, x, t, j_steps, &mut rng).expect("validated above");
            xi(&path, policy, rf, u0)
        })
        .collect();
    let n = n_paths as f64;
    let mean = evals.iter().map(|e| e.value).sum::<f64>() / n;
    let var = evals.iter().map(|e| (e.value - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(ValueEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n_paths,
        j_steps,
        clamped_steps: evals.iter().map(|e| e.clamped_steps).sum(),
    })
}

/// Monte Carlo flatness check of the martingale
/// `M_s = u(t-s, X_s) + int_0^s f(u(t-r, X_r)) dr`.
#[derive(Debug, Clone)]
pub struct MartingaleReport {
    /// `(s, mean M_s, stderr)` per checkpoint.
    pub checkpoints: Vec<(f64, f64, f64)>,
    /// `u(t, x) = M_0`, the flat reference level.
    pub reference: f64,
    pub max_deviation: f64,
    pub max_stderr: f64,
}

/// Estimate `E[M_s]` at each checkpoint from seeded paths on the snapshot
/// ladder (`J = snapshots.len() - 1` path steps) and report the largest
/// deviation from `u(t, x)`.
#[allow(clippy::too_many_arguments)]
pub fn martingale_check(
    model: &LevyModel,
    rf: &ReactionFn,
    u_snapshots: &[GridFn],
    x: f64,
    t: f64,
    checkpoints: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    if u_snapshots.len() < 2 {
        return Err(Error::domain("martingale_check needs at least 2 snapshots"));
    }
    let j_steps = u_snapshots.len() - 1;
    let dt = t / j_steps as f64;
    let mut indices = Vec::with_capacity(checkpoints.len());
    for &s in checkpoints {
        if !(0.0..=t + 1e-12).contains(&s) {
            return Err(Error::domain(format!("checkpoint {s} outside [0, {t}]")));
        }
        indices.push(((s / dt).round() as usize).min(j_steps));
    }
    // u(t - s_j, .) is snapshot J - j on the shared ladder.
    let u_at = |j: usize, pos: f64| u_snapshots[j_steps - j].eval(pos).clamp(0.0, 1.0);

    let sums: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::stream(seed, i as u64);
            let path = sample_path(model, x, t, j_steps, &mut rng).expect("t > 0");
            let mut running = 0.0;
            let mut m_values = Vec::with_capacity(j_steps + 1);
            for j in 0..=j_steps {
                m_values.push(u_at(j, path.states[j]) + running);
                if j < j_steps {
                    running += dt * rf.f(u_at(j, path.states[j])).unwrap();
                }
            }
            indices.iter().map(|&j| m_values[j]).collect()
        })
        .collect();

    let reference = u_snapshots[j_steps].eval(x).clamp(0.0, 1.0);
    let n = n_paths as f64;
    let mut rows = Vec::with_capacity(indices.len());
    let mut max_deviation = 0.0f64;
    let mut max_stderr = 0.0f64;
    for (c, &s) in checkpoints.iter().enumerate() {
        let mean = sums.iter().map(|v| v[c]).sum::<f64>() / n;
        let var = sums.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let stderr = (var / n).sqrt();
        rows.push((s, mean, stderr));
        max_deviation = max_deviation.max((mean - reference).abs());
        max_stderr = max_stderr.max(stderr);
    }
    Ok(MartingaleReport {
        checkpoints: rows,
        reference,
        max_deviation,
        max_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::OffspringLaw;
    use approx::assert_abs_diff_eq;

    fn bm() -> LevyModel {
        LevyModel::standard_brownian()
    }

    fn heaviside() -> GridFn {
        GridFn::heaviside(-15.0, 15.0, 2001).unwrap()
    }

    #[test]
    fn path_drift_is_exact() {
        let model = LevyModel::drift_only(0.7);
        let mut rng = seeding::stream(1, 0);
        let path = sample_path(&model, 2.0, 1.0, 10, &mut rng).unwrap();
        for (j, &s) in path.states.iter().enumerate() {
            assert_abs_diff_eq!(s, 2.0 - 0.7 * 0.1 * j as f64, epsilon = 1e-12);
        }
        let tiny = sample_path(&model, 0.0, 1.0, 1, &mut rng).unwrap();
        assert_eq!(tiny.states.len(), 2);
    }

    #[test]
    fn path_terminal_variance() {
        let n = 100_000;
        let mut acc = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = seeding::stream(5, i as u64);
            let path = sample_path(&bm(), 0.0, 1.0, 100, &mut rng).unwrap();
            acc.push(path.states[100]);
        }
        let mean = acc.iter().sum::<f64>() / n as f64;
        let var = acc.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(var, 1.0, epsilon = 0.02);
    }

    #[test]
    fn xi_closed_forms() {
        let rf = ReactionFn::dyadic();
        let u0 = heaviside();
        let mut rng = seeding::stream(9, 0);
        let t = 1.0;
        for _ in 0..50 {
            let path = sample_path(&bm(), 0.0, t, 200, &mut rng).unwrap();
            // Z = 0: Xi = u0(X_t) - t/4 pathwise (f_hat(0) = 1/4).
            let zero = ConstantPolicy::new(0.0, "zero");
            let got = xi(&path, &zero, &rf, &u0);
            let want = u0.eval(path.states[200]) - t / 4.0;
            assert_abs_diff_eq!(got.value, want, epsilon = 1e-12);
            assert_eq!(got.clamped_steps, 0);

            // Z = -1: Xi = e^{-t} u0(X_t) (f_hat(-1) = 0).
            let minus = ConstantPolicy::new(-1.0, "minus-one");
            let got = xi(&path, &minus, &rf, &u0);
            assert_abs_diff_eq!(got.value, (-t).exp() * u0.eval(path.states[200]), epsilon = 1e-12);
        }
    }

    #[test]
    fn xi_stationary_top() {
        // u0 = 1, Z = gamma: continuum Xi = 1; left sums carry an O(dt)
        // quadrature bias.
        let rf = ReactionFn::dyadic();
        let u0 = GridFn::constant(-15.0, 15.0, 2001, 1.0).unwrap();
        let mut rng = seeding::stream(2, 0);
        let path = sample_path(&bm(), 0.0, 1.0, 200, &mut rng).unwrap();
        let gamma_policy = ConstantPolicy::new(rf.gamma(), "gamma");
        let got = xi(&path, &gamma_policy, &rf, &u0);
        assert_abs_diff_eq!(got.value, 1.0, epsilon = 0.01);
    }

    #[test]
    fn estimate_value_zero_policy() {
        // E[Xi] = P(X_1 >= 0) - 1/4 = 0.25 under Z = 0.
        let rf = ReactionFn::dyadic();
        let u0 = heaviside();
        let zero = ConstantPolicy::new(0.0, "zero");
        let est = estimate_value(&bm(), 0.0, 1.0, &zero, &rf, &u0, 20_000, 200, 3).unwrap();
        assert!((est.mean - 0.25).abs() <= 3.0 * est.stderr, "mean {} stderr {}", est.mean, est.stderr);
    }

    #[test]
    fn estimate_value_stationary_constant() {
        let law = OffspringLaw::new(vec![(0, 0.25), (2, 0.75)]).unwrap();
        let rf = ReactionFn::new(law).unwrap();
        let alpha = rf.alpha();
        let u0 = GridFn::constant(-15.0, 15.0, 2001, alpha).unwrap();
        let policy = ConstantPolicy::new(rf.f_prime(alpha).unwrap(), "stationary");
        let est = estimate_value(&bm(), 0.0, 1.0, &policy, &rf, &u0, 500, 200, 4).unwrap();
        // Pathwise constant up to interpolation rounding, so essentially
        // zero variance; mean differs from alpha only by the left-sum
        // quadrature bias.
        assert!(est.stderr < 1e-12, "stderr {}", est.stderr);
        assert_abs_diff_eq!(est.mean, alpha, epsilon = 0.01);
    }

    #[test]
    fn estimate_value_is_deterministic() {
        let rf = ReactionFn::dyadic();
        let u0 = heaviside();
        let zero = ConstantPolicy::new(0.0, "zero");
        let a = estimate_value(&bm(), 0.0, 1.0, &zero, &rf, &u0, 500, 50, 7).unwrap();
        let b = estimate_value(&bm(), 0.0, 1.0, &zero, &rf, &u0, 500, 50, 7).unwrap();
        assert_eq!(a, b);
        assert!(estimate_value(&bm(), 0.0, 1.0, &zero, &rf, &u0, 50, 50, 7).is_err());
    }

    #[test]
    fn optimal_policy_stationary_cases() {
        let rf = ReactionFn::dyadic();
        let ones = GridFn::constant(-5.0, 5.0, 201, 1.0).unwrap();
        let pol = optimal_policy(&bm(), &rf, &ones, 1.0, 20).unwrap();
        for &(s, x) in &[(0.0, 0.0), (0.5, 1.0), (0.9, -2.0)] {
            assert_abs_diff_eq!(pol.z(s, x), rf.gamma(), epsilon = 1e-9);
        }

        let law = OffspringLaw::new(vec![(0, 0.25), (2, 0.75)]).unwrap();
        let rf = ReactionFn::new(law).unwrap();
        let at_alpha = GridFn::constant(-5.0, 5.0, 201, rf.alpha()).unwrap();
        let pol = optimal_policy(&bm(), &rf, &at_alpha, 1.0, 20).unwrap();
        let want = rf.f_prime(rf.alpha()).unwrap();
        assert_abs_diff_eq!(pol.z(0.3, 0.7), want, epsilon = 1e-6);
    }

    #[test]
    fn martingale_trivial_cases() {
        let rf = ReactionFn::dyadic();
        // u0 = 1: M_s = 1 identically.
        let ones = GridFn::constant(-5.0, 5.0, 201, 1.0).unwrap();
        let snaps = semigroup::snapshots(&bm(), &rf, &ones, 1.0, 20).unwrap();
        let rep =
            martingale_check(&bm(), &rf, &snaps, 0.0, 1.0, &[0.0, 0.5, 1.0], 200, 11).unwrap();
        assert_abs_diff_eq!(rep.reference, 1.0, epsilon = 1e-12);
        assert!(rep.max_deviation < 1e-10, "deviation {}", rep.max_deviation);

        // s = 0 checkpoint is exactly the reference for any data.
        let u0 = heaviside();
        let snaps = semigroup::snapshots(&bm(), &rf, &u0, 1.0, 20).unwrap();
        let rep = martingale_check(&bm(), &rf, &snaps, 0.0, 1.0, &[0.0], 200, 11).unwrap();
        assert_abs_diff_eq!(rep.checkpoints[0].1, rep.reference, epsilon = 1e-12);
    }
}
