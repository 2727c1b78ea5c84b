//! The Markov semigroup `P_t`, the Trotter sandwich
//! `(R o P)^n <= U <= (P o R)^n`, a bracket-refinement solver, a Picard
//! iteration oracle, and front/median diagnostics.
//!
//! `P_t` acts on grid functions by discrete convolution with the transition
//! kernel of `X = -L`; the kernel is tabulated on grid offsets from the
//! analytic normal distribution for pure-Brownian models and from the
//! cached empirical sample otherwise. Mass beyond the grid lands on the
//! extension constants.

use crate::error::{Error, Result};
use crate::grid::GridFn;
use crate::levy::LevyModel;
use crate::normal::phi_inv;
use crate::reaction::ReactionFn;

/// Tail mass below which the transition kernel is truncated per side.
const KERNEL_TAIL: f64 = 1e-8;

/// Fraction of kernel mass allowed to fall beyond half the grid span.
const OFF_GRID_LIMIT: f64 = 0.2;

/// Interior margin (fraction of points per side) over which bracket gaps
/// are measured, keeping boundary extrapolation effects out of the gap.
const GAP_MARGIN: f64 = 0.1;

/// Transition kernel of the X-increment over one time step, tabulated on
/// grid offsets `j*h` for `j` in `j_min..j_min + weights.len()`.
#[derive(Debug, Clone)]
pub struct Kernel {
    j_min: isize,
    weights: Vec<f64>,
}

impl Kernel {
    /// Tabulate the kernel for time step `dt` on offsets of spacing `h`.
    /// `span` is the grid width used for the off-grid mass check.
    pub fn build(model: &LevyModel, dt: f64, h: f64, span: f64) -> Result<Kernel> {
        if !(dt > 0.0) {
            return Err(Error::domain(format!("kernel requires dt > 0, got {dt}")));
        }
        if model.is_deterministic() {
            return Kernel::point_mass(-model.drift() * dt, h, span);
        }
        let lo = model.quantile_x(dt, KERNEL_TAIL)?;
        let hi = model.quantile_x(dt, 1.0 - KERNEL_TAIL)?;
        let half_span = 0.5 * span;
        let off_grid = model.cdf_x(dt, -half_span)? + (1.0 - model.cdf_x(dt, half_span)?);
        if off_grid > OFF_GRID_LIMIT {
            return Err(Error::GridTooSmall(format!(
                "kernel mass {off_grid:.3} beyond half-span {half_span} exceeds {OFF_GRID_LIMIT}"
            )));
        }
        let j_min = (lo / h).floor() as isize - 1;
        let j_max = (hi / h).ceil() as isize + 1;
        let n = (j_max - j_min + 1) as usize;
        let mut weights = Vec::with_capacity(n);
        let mut prev = 0.0; // tail mass below the first edge lumps left
        for j in j_min..=j_max {
            let edge = if j == j_max {
                1.0
            } else {
                model.cdf_x(dt, (j as f64 + 0.5) * h)?
            };
            weights.push(edge - prev);
            prev = edge;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Kernel { j_min, weights })
    }

    /// Degenerate kernel: a point mass at `offset`, split linearly between
    /// the two neighbouring grid offsets when it is not grid-aligned.
    fn point_mass(offset: f64, h: f64, span: f64) -> Result<Kernel> {
        if offset.abs() > 0.5 * span {
            return Err(Error::GridTooSmall(format!(
                "deterministic shift {offset} exceeds half the grid span"
            )));
        }
        let s = offset / h;
        let j = s.floor() as isize;
        let w = s - j as f64;
        if w.abs() < 1e-9 {
            Ok(Kernel {
                j_min: j,
                weights: vec![1.0],
            })
        } else if (1.0 - w).abs() < 1e-9 {
            Ok(Kernel {
                j_min: j + 1,
                weights: vec![1.0],
            })
        } else {
            Ok(Kernel {
                j_min: j,
                weights: vec![1.0 - w, w],
            })
        }
    }

    /// Convolve: `out(x) = sum_j w_j * gf(x + j*h)`, extension constants
    /// supplying values beyond the grid. The extensions pass through
    /// unchanged because the weights sum to one.
    pub fn apply(&self, gf: &GridFn) -> GridFn {
        let m = gf.len();
        let mut values = vec![0.0; m];
        for (i, out) in values.iter_mut().enumerate() {
            let mut acc = 0.0;
            let base = i as isize + self.j_min;
            for (k, &w) in self.weights.iter().enumerate() {
                acc += w * gf.value_at(base + k as isize);
            }
            *out = acc;
        }
        let mut out = GridFn::new(gf.x_min(), gf.x_max(), values, gf.left_ext, gf.right_ext)
            .expect("same shape as input");
        out.clamp(0.0, 1.0);
        out
    }
}

/// `P_dt` applied to a grid function.
pub fn apply_p(model: &LevyModel, dt: f64, gf: &GridFn) -> Result<GridFn> {
    let kernel = Kernel::build(model, dt, gf.h(), gf.x_max() - gf.x_min())?;
    Ok(kernel.apply(gf))
}

/// `R_dt` applied pointwise to every grid value and both extensions.
pub fn apply_r(rf: &ReactionFn, dt: f64, gf: &GridFn) -> Result<GridFn> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("apply_r requires dt > 0, got {dt}")));
    }
    let mut out = gf.map(|v| rf.flow(v.clamp(0.0, 1.0), dt).unwrap());
    out.clamp(0.0, 1.0);
    Ok(out)
}

/// Two-sided Trotter bracket after `n` splitting steps.
#[derive(Debug, Clone)]
pub struct Bracket {
    pub lower: GridFn,
    pub upper: GridFn,
    pub n: usize,
    /// Max of `upper - lower` over the interior grid.
    pub gap: f64,
}

fn interior_gap(lower: &GridFn, upper: &GridFn) -> f64 {
    let m = lower.len();
    let margin = ((m as f64 * GAP_MARGIN) as usize).min(m / 2);
    (margin..m - margin)
        .map(|i| upper.values()[i] - lower.values()[i])
        .fold(0.0, f64::max)
}

/// `lower = (R_{t/n} o P_{t/n})^n u0` and `upper = (P_{t/n} o R_{t/n})^n u0`.
pub fn trotter_bounds(
    model: &LevyModel,
    rf: &ReactionFn,
    u0: &GridFn,
    t: f64,
    n: usize,
) -> Result<Bracket> {
    if n < 1 {
        return Err(Error::domain("trotter_bounds requires n >= 1"));
    }
    if !(t >= 0.0) {
        return Err(Error::domain(format!("trotter_bounds requires t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(Bracket {
            lower: u0.clone(),
            upper: u0.clone(),
            n,
            gap: 0.0,
        });
    }
    let dt = t / n as f64;
    let kernel = Kernel::build(model, dt, u0.h(), u0.x_max() - u0.x_min())?;
    let mut lower = u0.clone();
    let mut upper = u0.clone();
    for _ in 0..n {
        lower = apply_r(rf, dt, &kernel.apply(&lower))?;
        upper = kernel.apply(&apply_r(rf, dt, &upper)?);
    }
    let gap = interior_gap(&lower, &upper);
    Ok(Bracket {
        lower,
        upper,
        n,
        gap,
    })
}

/// Solution estimate from bracket refinement.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Midpoint of the final bracket, reported as "the solution". The gap
    /// is always reported alongside; no convergence rate is claimed.
    pub mid: GridFn,
    pub bracket: Bracket,
    pub converged: bool,
}

/// Double `n` from 1 until the bracket gap drops below `tol` or `n_max` is
/// hit (flagged, not fatal).
pub fn solve(
    model: &LevyModel,
    rf: &ReactionFn,
    u0: &GridFn,
    t: f64,
    tol: f64,
    n_max: usize,
) -> Result<SolveOutcome> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("solve requires tol > 0, got {tol}")));
    }
    let mut n = 1;
    loop {
        let bracket = trotter_bounds(model, rf, u0, t, n)?;
        let converged = bracket.gap < tol;
        if converged || n * 2 > n_max {
            let mid = bracket.lower.zip_with(&bracket.upper, |a, b| 0.5 * (a + b));
            return Ok(SolveOutcome {
                mid,
                bracket,
                converged,
            });
        }
        n *= 2;
    }
}

/// Bracket-midpoint snapshots of `u(k t/n, .)` for `k = 0..=n`, from one
/// pass of both splitting sequences. Each stage of the lower (upper)
/// sequence bounds the solution at its own time from below (above).
pub fn snapshots(
    model: &LevyModel,
    rf: &ReactionFn,
    u0: &GridFn,
    t: f64,
    n: usize,
) -> Result<Vec<GridFn>> {
    if n < 1 {
        return Err(Error::domain("snapshots requires n >= 1"));
    }
    let dt = t / n as f64;
    let kernel = Kernel::build(model, dt, u0.h(), u0.x_max() - u0.x_min())?;
    let mut lower = u0.clone();
    let mut upper = u0.clone();
    let mut out = Vec::with_capacity(n + 1);
    out.push(u0.clone());
    for _ in 0..n {
        lower = apply_r(rf, dt, &kernel.apply(&lower))?;
        upper = kernel.apply(&apply_r(rf, dt, &upper)?);
        out.push(lower.zip_with(&upper, |a, b| 0.5 * (a + b)));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub u: GridFn,
    pub iterations: usize,
    pub j_steps: usize,
    pub converged: bool,
}

/// Picard iteration on the mild identity
/// `u(t,x) = E_x[ u0(X_t) + int_0^t f(u(t-s, X_s)) ds ]`,
/// discretized on a uniform time ladder with left-endpoint quadrature and
/// one-step transition kernels. Independent of the splitting solver; used
/// as its oracle.
///
/// The ladder has `J = max(32, ceil(t / time_step))` levels. Writing
/// `A_j = P_delta^j u0` and `S_j` for the quadrature of the Duhamel
/// integral, the left-endpoint sum satisfies the recursion
/// `S_j = delta * f(u_j) + P_delta S_{j-1}`, which is what is iterated.
pub fn picard_solve(
    model: &LevyModel,
    rf: &ReactionFn,
    u0: &GridFn,
    t: f64,
    time_step: f64,
    max_iter: usize,
    tol: f64,
) -> Result<PicardOutcome> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("picard_solve requires t >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(PicardOutcome {
            u: u0.clone(),
            iterations: 0,
            j_steps: 0,
            converged: true,
        });
    }
    if !(time_step > 0.0) {
        return Err(Error::domain("picard_solve requires time_step > 0"));
    }
    let j_steps = ((t / time_step).ceil() as usize).max(32);
    let delta = t / j_steps as f64;
    let kernel = Kernel::build(model, delta, u0.h(), u0.x_max() - u0.x_min())?;

    // A_j = P_delta^j u0, fixed across iterations.
    let mut a = Vec::with_capacity(j_steps + 1);
    a.push(u0.clone());
    for j in 1..=j_steps {
        a.push(kernel.apply(&a[j - 1]));
    }

    let f_of = |gf: &GridFn| gf.map(|v| rf.f(v.clamp(0.0, 1.0)).unwrap());
    let mut current = a.clone();
    for iter in 1..=max_iter {
        let mut next = Vec::with_capacity(j_steps + 1);
        next.push(u0.clone());
        let zero = GridFn::constant(u0.x_min(), u0.x_max(), u0.len(), 0.0)?;
        let mut s = zero;
        let mut diff = 0.0f64;
        for j in 1..=j_steps {
            s = f_of(&current[j]).zip_with(&s, |fv, sv| delta * fv + sv);
            let mut uj = a[j].zip_with(&s, |av, sv| av + sv);
            uj.clamp(0.0, 1.0);
            diff = diff.max(uj.max_abs_diff(&current[j]));
            next.push(uj);
            if j < j_steps {
                s = kernel.apply_signed(&s);
            }
        }
        current = next;
        if diff < tol {
            return Ok(PicardOutcome {
                u: current.pop().unwrap(),
                iterations: iter,
                j_steps,
                converged: true,
            });
        }
    }
    Ok(PicardOutcome {
        u: current.pop().unwrap(),
        iterations: max_iter,
        j_steps,
        converged: false,
    })
}

impl Kernel {
    /// As [`apply`](Self::apply) but without clamping into `[0, 1]`; used
    /// for signed intermediates such as Duhamel quadrature terms.
    fn apply_signed(&self, gf: &GridFn) -> GridFn {
        let m = gf.len();
        let mut values = vec![0.0; m];
        for (i, out) in values.iter_mut().enumerate() {
            let mut acc = 0.0;
            let base = i as isize + self.j_min;
            for (k, &w) in self.weights.iter().enumerate() {
                acc += w * gf.value_at(base + k as isize);
            }
            *out = acc;
        }
        GridFn::new(gf.x_min(), gf.x_max(), values, gf.left_ext, gf.right_ext)
            .expect("same shape as input")
    }
}

/// Interpolated crossing point `u(x) = level` for monotone data.
pub fn median(gf: &GridFn, level: f64) -> Result<f64> {
    let vals = gf.values();
    if vals[0] >= level {
        return Err(Error::NoCrossing(format!(
            "grid starts at {} >= level {level}",
            vals[0]
        )));
    }
    for i in 1..vals.len() {
        if vals[i] >= level {
            let w = (level - vals[i - 1]) / (vals[i] - vals[i - 1]);
            return Ok(gf.x(i - 1) + w * gf.h());
        }
    }
    Err(Error::NoCrossing(format!(
        "grid values never reach level {level}"
    )))
}

/// Both sides of the dyadic-BBM median inequality
///
/// ```text
/// -sqrt(t/n) PhiInv(1/(2b)) - (n-1) sqrt(t/n) PhiInv(1/(e^{t/n}(1-b)+b))
///     <= m(t) <= -sqrt(t) PhiInv(1/(e^t + 1))
/// ```
///
/// valid for `1/2 < b < 1` and `n >= 1`. Returns `(lo, hi)`.
pub fn median_bounds_dyadic(t: f64, n: usize, b: f64) -> Result<(f64, f64)> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("median bounds require t > 0, got {t}")));
    }
    if n < 1 {
        return Err(Error::domain("median bounds require n >= 1"));
    }
    if !(b > 0.5 && b < 1.0) {
        return Err(Error::domain(format!("median bounds require 1/2 < b < 1, got {b}")));
    }
    let p_hi = 1.0 / (t.exp() + 1.0);
    if p_hi <= 0.0 {
        return Err(Error::domain(format!("t = {t} too large: e^t overflows")));
    }
    let hi = -t.sqrt() * phi_inv(p_hi);
    let root = (t / n as f64).sqrt();
    let delta = t / n as f64;
    let p_lo = 1.0 / (delta.exp() * (1.0 - b) + b);
    let lo = -root * phi_inv(1.0 / (2.0 * b)) - (n as f64 - 1.0) * root * phi_inv(p_lo);
    Ok((lo, hi))
}
