//! Offspring laws and the reaction nonlinearity `f(u) = G(u) - u`.
//!
//! `G` is the probability generating function of the offspring count `N`.
//! The branching rate is normalized to 1, which is what pins the
//! nonlinearity to exactly `G(u) - u`; a general rate `lambda` would
//! rescale it to `lambda (G(u) - u)` and is not implemented.
//!
//! The reaction semigroup `R_t` is the flow of `dr/dt = f(r)` and
//! `Q_t(q) = 1 - R_t(1 - q)` the complementary flow of `dq/dt = g(q)` with
//! `g(v) = -f(1 - v)`.

use crate::error::{Error, Result};
use crate::opt::bisect;

/// Finite-support offspring distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringLaw {
    pmf: Vec<(u32, f64)>,
}

impl OffspringLaw {
    /// Build a law from `(k, p_k)` pairs. Probabilities must be
    /// nonnegative and sum to 1 within 1e-12; they are renormalized so the
    /// stored pmf sums to 1 up to rounding.
    pub fn new(pmf: Vec<(u32, f64)>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::domain("offspring pmf must be nonempty"));
        }
        let mut total = 0.0;
        for &(_, p) in &pmf {
            if p < 0.0 {
                return Err(Error::domain(format!("offspring probability {p} is negative")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "offspring probabilities sum to {total}, expected 1"
            )));
        }
        let pmf = pmf.into_iter().map(|(k, p)| (k, p / total)).collect();
        Ok(OffspringLaw { pmf })
    }

    /// Dyadic branching: always two offspring, `G(s) = s^2`.
    pub fn dyadic() -> Self {
        OffspringLaw::new(vec![(2, 1.0)]).unwrap()
    }

    pub fn pmf(&self) -> &[(u32, f64)] {
        &self.pmf
    }

    /// `E(N) = G'(1)`.
    pub fn mean(&self) -> f64 {
        self.pmf.iter().map(|&(k, p)| k as f64 * p).sum()
    }

    fn prob_of(&self, k: u32) -> f64 {
        self.pmf.iter().filter(|&&(j, _)| j == k).map(|&(_, p)| p).sum()
    }

    /// `G(s) = E(s^N)` for `s` in `[0, 1]`, with `0^0 = 1` and `G(1) = 1`
    /// by construction.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::domain(format!("pgf requires s in [0,1], got {s}")));
        }
        if s == 1.0 {
            return Ok(1.0);
        }
        Ok(self.pmf.iter().map(|&(k, p)| p * s.powi(k as i32)).sum())
    }

    /// `G'(s)`, with `G'(1) = E(N)` by construction.
    pub fn pgf_prime(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::domain(format!("pgf_prime requires s in [0,1], got {s}")));
        }
        if s == 1.0 {
            return Ok(self.mean());
        }
        Ok(self
            .pmf
            .iter()
            .filter(|&&(k, _)| k >= 1)
            .map(|&(k, p)| p * k as f64 * s.powi(k as i32 - 1))
            .sum())
    }

    /// Draw an offspring count by inverse-CDF over the finite pmf.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(k, p) in &self.pmf {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.pmf.last().map(|&(k, _)| k).unwrap()
    }

    /// Smallest nonnegative root of `G(s) = s` on `[0, 1]`, the extinction
    /// probability. The law `{1: 1}` has `G(s) = s` everywhere and is
    /// reported with the degeneracy flag set (value 0).
    pub fn extinction_prob(&self) -> ExtinctionRoot {
        if (self.prob_of(1) - 1.0).abs() < 1e-15 {
            return ExtinctionRoot {
                value: 0.0,
                degenerate: true,
            };
        }
        let p0 = self.prob_of(0);
        if p0 == 0.0 {
            return ExtinctionRoot {
                value: 0.0,
                degenerate: false,
            };
        }
        if self.mean() <= 1.0 {
            // Critical or subcritical: the only root in [0,1] is 1.
            return ExtinctionRoot {
                value: 1.0,
                degenerate: false,
            };
        }
        // G(s) - s is convex with value p0 > 0 at 0 and negative just left
        // of 1, so the smaller of its two roots is bisected directly.
        let h = |s: f64| self.pgf(s).unwrap() - s;
        let value = bisect(h, 0.0, 1.0 - 1e-9, 1e-12);
        ExtinctionRoot {
            value,
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ExtinctionRoot {
    pub value: f64,
    /// The law `{1: 1}` makes every point a fixed point of `G`.
    pub degenerate: bool,
}

/// The nonlinearity `f(u) = G(u) - u` together with its roots and slope.
#[derive(Debug, Clone)]
pub struct ReactionFn {
    law: OffspringLaw,
    alpha: f64,
    beta: f64,
    gamma: f64,
    degenerate: bool,
}

impl ReactionFn {
    pub fn new(law: OffspringLaw) -> Result<Self> {
        let root = law.extinction_prob();
        let gamma = law.mean() - 1.0;
        Ok(ReactionFn {
            alpha: root.value,
            beta: 1.0 - root.value,
            gamma,
            degenerate: root.degenerate,
            law,
        })
    }

    pub fn dyadic() -> Self {
        ReactionFn::new(OffspringLaw::dyadic()).unwrap()
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }

    /// Extinction probability, the smaller root of `f`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `beta = 1 - alpha`, the larger root of `g`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `gamma = f'(1) = E(N) - 1`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// `f(u) = G(u) - u`.
    pub fn f(&self, u: f64) -> Result<f64> {
        Ok(self.law.pgf(u)? - u)
    }

    /// `f'(u) = G'(u) - 1`.
    pub fn f_prime(&self, u: f64) -> Result<f64> {
        Ok(self.law.pgf_prime(u)? - 1.0)
    }

    /// `g(v) = -f(1 - v)`; concave, `g(0) = 0`, `g'(0) = gamma`, larger
    /// root `beta`.
    pub fn g(&self, v: f64) -> Result<f64> {
        Ok(-self.f(1.0 - v)?)
    }

    /// Convex conjugate `f_hat(z) = sup_{v in [0,1]} [ v z - f(v) ]` on the
    /// control range `z in [-1, gamma]`.
    ///
    /// Because solutions live in `[0, 1]` and the optimal control satisfies
    /// `z = f'(v)` with `v` in `[0, 1]`, restricting the supremum to
    /// `[0, 1]` agrees with the unrestricted conjugate on this range.
    pub fn fhat(&self, z: f64) -> Result<f64> {
        let tol = 1e-9;
        if z < -1.0 - tol || z > self.gamma + tol {
            return Err(Error::domain(format!(
                "fhat requires z in [-1, {}], got {z}",
                self.gamma
            )));
        }
        let z = z.clamp(-1.0, self.gamma);
        let slope0 = self.f_prime(0.0)?;
        let slope1 = self.f_prime(1.0)?;
        let v = if z <= slope0 {
            0.0
        } else if z >= slope1 {
            1.0
        } else {
            self.invert_f_prime(z)
        };
        Ok(v * z - self.f(v)?)
    }

    /// Solve `f'(v) = z` for `v` in `(0, 1)`; `f'` is increasing there.
    fn invert_f_prime(&self, z: f64) -> f64 {
        let max_k = self.law.pmf.iter().map(|&(k, _)| k).max().unwrap_or(0);
        if max_k <= 2 {
            // Quadratic G: G'(s) = p1 + 2 p2 s, closed form.
            let p1 = self.law.prob_of(1);
            let p2 = self.law.prob_of(2);
            if p2 > 0.0 {
                return ((z + 1.0 - p1) / (2.0 * p2)).clamp(0.0, 1.0);
            }
        }
        bisect(|v| self.law.pgf_prime(v).unwrap() - 1.0 - z, 0.0, 1.0, 1e-14)
    }

    /// Reaction semigroup `R_t(r0)`: the flow of `dr/dt = f(r)` from `r0`,
    /// clamped to `[0, 1]`.
    pub fn flow(&self, r0: f64, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&r0) {
            return Err(Error::domain(format!("flow requires r0 in [0,1], got {r0}")));
        }
        if !(t >= 0.0) {
            return Err(Error::domain(format!("flow requires t >= 0, got {t}")));
        }
        let rhs = |r: f64| self.law.pgf(r.clamp(0.0, 1.0)).unwrap() - r.clamp(0.0, 1.0);
        Ok(integrate(&rhs, r0, t, 1e-10).clamp(0.0, 1.0))
    }

    /// `Q_t(q0) = 1 - R_t(1 - q0)`.
    pub fn q_flow(&self, q0: f64, t: f64) -> Result<f64> {
        Ok(1.0 - self.flow(1.0 - q0, t)?)
    }

    /// `Q_delta^{-1}(b)`: run the `q` flow backward for time `delta` from
    /// `b`, i.e. integrate `dq/ds = -g(q)` forward.
    pub fn q_inverse(&self, b: f64, delta: f64) -> Result<f64> {
        if !(b > 0.0 && b < self.beta) {
            return Err(Error::domain(format!(
                "q_inverse requires b in (0, beta = {}), got {b}",
                self.beta
            )));
        }
        if !(delta > 0.0) {
            return Err(Error::domain(format!("q_inverse requires delta > 0, got {delta}")));
        }
        let rhs = |q: f64| self.f(1.0 - q.clamp(0.0, 1.0)).unwrap();
        Ok(integrate(&rhs, b, delta, 1e-10).clamp(0.0, 1.0))
    }
}

/// Adaptive RK4 (step doubling with local extrapolation) for the scalar
/// autonomous equation `y' = rhs(y)` over `[0, t]`, absolute tolerance
/// `abs_tol` on the whole interval.
fn integrate<F: Fn(f64) -> f64>(rhs: &F, y0: f64, t: f64, abs_tol: f64) -> f64 {
    if t == 0.0 {
        return y0;
    }
    let rk4 = |y: f64, h: f64| {
        let k1 = rhs(y);
        let k2 = rhs(y + 0.5 * h * k1);
        let k3 = rhs(y + 0.5 * h * k2);
        let k4 = rhs(y + h * k3);
        y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let mut y = y0;
    let mut s = 0.0;
    let mut h = (t / 16.0).min(0.1);
    let h_min = t * 1e-12;
    while s < t {
        if s + h > t {
            h = t - s;
        }
        let big = rk4(y, h);
        let half = rk4(y, 0.5 * h);
        let small = rk4(half, 0.5 * h);
        let err = (big - small).abs() / 15.0;
        let tol_here = abs_tol * (h / t).max(1e-3);
        if err <= tol_here || h <= h_min {
            y = small + (small - big) / 15.0;
            s += h;
            if err > 0.0 {
                h = (h * 0.9 * (tol_here / err).powf(0.2)).clamp(h * 0.2, h * 5.0);
            } else {
                h *= 5.0;
            }
        } else {
            h = (h * 0.9 * (tol_here / err).powf(0.25)).max(h_min);
        }
    }
    y
}
