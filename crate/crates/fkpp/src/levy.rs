//! One-dimensional Lévy process models with finite-activity jumps.
//!
//! A model describes the process `L` through its drift `b`, diffusion scale
//! `sigma` and a compound-Poisson jump part (intensity `lambda`, finite jump
//! pmf). The cumulant generating function is taken in the untruncated form
//!
//! ```text
//! Lambda(theta) = b*theta + sigma^2*theta^2/2
//!                 + lambda * sum_k p_k (exp(theta*y_k) - 1)
//! ```
//!
//! which differs from the truncated-compensator convention only by a
//! relabelling of the drift: here `b` is the total linear drift, so
//! `E[L_1] = Lambda'(0) = b + lambda * sum_k p_k y_k`.
//!
//! The distribution and quantile functions are for `X_t = -L_t` started at
//! zero; spatial shifts are applied by callers.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::normal::{phi, phi_inv};
use crate::opt::{bisect, golden_max, golden_min};
use crate::seeding;

/// Default evaluation cap for the cumulant generating function.
pub const DEFAULT_THETA_MAX: f64 = 50.0;

/// Default sample size for empirical (Monte Carlo) distribution functions.
pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

/// Default seed for the cached empirical samples.
pub const DEFAULT_MC_SEED: u64 = 0x4c45_5659;

/// Drift / diffusion / finite-activity jump triple for the process `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    drift: f64,
    diffusion: f64,
    jump_intensity: f64,
    jumps: Vec<(f64, f64)>,
    theta_max: f64,
}

impl LevyModel {
    /// Build a model, validating the jump pmf. `jumps` holds
    /// `(size, probability)` pairs; probabilities must be nonnegative and
    /// sum to 1 (within 1e-12) whenever `jump_intensity > 0`.
    pub fn new(
        drift: f64,
        diffusion: f64,
        jump_intensity: f64,
        jumps: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if !(diffusion >= 0.0) {
            return Err(Error::domain(format!("diffusion must be >= 0, got {diffusion}")));
        }
        if !(jump_intensity >= 0.0) {
            return Err(Error::domain(format!(
                "jump_intensity must be >= 0, got {jump_intensity}"
            )));
        }
        if jump_intensity > 0.0 {
            if jumps.is_empty() {
                return Err(Error::domain("jump_intensity > 0 requires a jump pmf"));
            }
            let mut total = 0.0;
            for &(_, p) in &jumps {
                if p < 0.0 {
                    return Err(Error::domain(format!("jump probability {p} is negative")));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::domain(format!(
                    "jump probabilities sum to {total}, expected 1"
                )));
            }
        }
        Ok(LevyModel {
            drift,
            diffusion,
            jump_intensity,
            jumps,
            theta_max: DEFAULT_THETA_MAX,
        })
    }

    pub fn with_theta_max(mut self, theta_max: f64) -> Result<Self> {
        if !(theta_max > 0.0) {
            return Err(Error::domain(format!("theta_max must be > 0, got {theta_max}")));
        }
        self.theta_max = theta_max;
        Ok(self)
    }

    /// Standard Brownian motion: `sigma = 1`, no drift, no jumps.
    pub fn standard_brownian() -> Self {
        LevyModel::new(0.0, 1.0, 0.0, vec![]).unwrap()
    }

    /// Degenerate model `L_t = b t`.
    pub fn drift_only(b: f64) -> Self {
        LevyModel::new(b, 0.0, 0.0, vec![]).unwrap()
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn jump_intensity(&self) -> f64 {
        self.jump_intensity
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// True when the path is nonrandom, i.e. `L_t = b t`.
    pub fn is_deterministic(&self) -> bool {
        self.diffusion == 0.0 && self.jump_intensity == 0.0
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_intensity > 0.0
    }

    fn cgf_unchecked(&self, theta: f64) -> f64 {
        let mut v = self.drift * theta + 0.5 * self.diffusion * self.diffusion * theta * theta;
        if self.jump_intensity > 0.0 {
            let mut jump_term = 0.0;
            for &(y, p) in &self.jumps {
                jump_term += p * ((theta * y).exp() - 1.0);
            }
            v += self.jump_intensity * jump_term;
        }
        v
    }

    /// Cumulant generating function `Lambda(theta) = log E[e^{theta L_1}]`.
    pub fn cgf(&self, theta: f64) -> Result<f64> {
        if theta.abs() > self.theta_max {
            return Err(Error::domain(format!(
                "|theta| = {} exceeds theta_max = {}",
                theta.abs(),
                self.theta_max
            )));
        }
        Ok(self.cgf_unchecked(theta))
    }

    /// `E[L_1] = Lambda'(0)`.
    pub fn mean_increment(&self) -> f64 {
        let mut m = self.drift;
        if self.jump_intensity > 0.0 {
            let jump_mean: f64 = self.jumps.iter().map(|&(y, p)| p * y).sum();
            m += self.jump_intensity * jump_mean;
        }
        m
    }

    /// `Var(L_1) = Lambda''(0)`.
    pub fn variance_rate(&self) -> f64 {
        let mut v = self.diffusion * self.diffusion;
        if self.jump_intensity > 0.0 {
            let jump_sq: f64 = self.jumps.iter().map(|&(y, p)| p * y * y).sum();
            v += self.jump_intensity * jump_sq;
        }
        v
    }

    /// Exact draw of the increment `L_{t+dt} - L_t`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        debug_assert!(dt > 0.0);
        let mut inc = self.drift * dt;
        if self.diffusion > 0.0 {
            let g: f64 = StandardNormal.sample(rng);
            inc += self.diffusion * dt.sqrt() * g;
        }
        if self.jump_intensity > 0.0 {
            let k = Poisson::new(self.jump_intensity * dt).unwrap().sample(rng) as u64;
            for _ in 0..k {
                inc += self.sample_jump(rng);
            }
        }
        inc
    }

    fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for &(y, p) in &self.jumps {
            acc += p;
            if u < acc {
                return y;
            }
        }
        self.jumps.last().map(|&(y, _)| y).unwrap_or(0.0)
    }

    /// Sorted empirical sample of `X_t = -L_t`, cached per
    /// `(model, t, n, seed)`. Concurrent fills produce identical content
    /// because the sample is fully determined by the key.
    pub fn empirical_sample(&self, t: f64, n: usize, seed: u64) -> Arc<Vec<f64>> {
        let key = self.cache_key(t, n, seed);
        if let Some(s) = MC_CACHE.lock().unwrap().get(&key) {
            return Arc::clone(s);
        }
        let mut rng = seeding::stream(seed, 0);
        let mut sample: Vec<f64> = (0..n).map(|_| -self.sample_increment(t, &mut rng)).collect();
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let arc = Arc::new(sample);
        let mut cache = MC_CACHE.lock().unwrap();
        Arc::clone(cache.entry(key).or_insert(arc))
    }

    fn cache_key(&self, t: f64, n: usize, seed: u64) -> Vec<u64> {
        let mut key = vec![
            self.drift.to_bits(),
            self.diffusion.to_bits(),
            self.jump_intensity.to_bits(),
            t.to_bits(),
            n as u64,
            seed,
        ];
        for &(y, p) in &self.jumps {
            key.push(y.to_bits());
            key.push(p.to_bits());
        }
        key
    }

    /// `F_t(y) = P(X_t <= y)` for `X_t = -L_t`, `X_0 = 0`.
    pub fn cdf_x(&self, t: f64, y: f64) -> Result<f64> {
        self.cdf_x_with(t, y, DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED)
    }

    /// As [`cdf_x`](Self::cdf_x) with explicit Monte Carlo sample size and
    /// seed for models that need an empirical distribution.
    pub fn cdf_x_with(&self, t: f64, y: f64, mc_samples: usize, mc_seed: u64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("cdf_x requires t > 0, got {t}")));
        }
        if self.is_deterministic() {
            return Ok(if y >= -self.drift * t { 1.0 } else { 0.0 });
        }
        if !self.has_jumps() {
            // X_t ~ N(-b t, sigma^2 t)
            let sd = self.diffusion * t.sqrt();
            return Ok(phi((y + self.drift * t) / sd));
        }
        let sample = self.empirical_sample(t, mc_samples, mc_seed);
        let count = sample.partition_point(|&v| v <= y);
        Ok(count as f64 / sample.len() as f64)
    }

    /// Generalized inverse `F_t^{-1}(p) = inf { x : F_t(x) >= p }`.
    pub fn quantile_x(&self, t: f64, p: f64) -> Result<f64> {
        self.quantile_x_with(t, p, DEFAULT_MC_SAMPLES, DEFAULT_MC_SEED)
    }

    pub fn quantile_x_with(&self, t: f64, p: f64, mc_samples: usize, mc_seed: u64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::domain(format!("quantile_x requires t > 0, got {t}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("quantile_x requires p in (0,1), got {p}")));
        }
        if self.is_deterministic() {
            return Ok(-self.drift * t);
        }
        if !self.has_jumps() {
            return Ok(-self.drift * t + self.diffusion * t.sqrt() * phi_inv(p));
        }
        let sample = self.empirical_sample(t, mc_samples, mc_seed);
        let n = sample.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        Ok(sample[k - 1])
    }

    /// Legendre transform `Lambda_hat(r) = sup_theta [ r*theta - Lambda(theta) ]`
    /// over `theta` in `[-theta_max, theta_max]`.
    ///
    /// Convexity of `Lambda` makes the inner function concave, so a coarse
    /// scan plus golden-section refinement finds the supremum. If the
    /// maximizer sits on the cap boundary the result carries a saturation
    /// flag and equals the boundary value.
    pub fn legendre(&self, r: f64) -> Conjugate {
        let obj = |theta: f64| r * theta - self.cgf_unchecked(theta);
        let (lo, hi) = (-self.theta_max, self.theta_max);
        // Coarse scan to bracket the maximizer.
        let n_scan = 64;
        let step = (hi - lo) / n_scan as f64;
        let mut best_i = 0usize;
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..=n_scan {
            let v = obj(lo + step * i as f64);
            if v > best_v {
                best_v = v;
                best_i = i;
            }
        }
        let a = lo + step * best_i.saturating_sub(1) as f64;
        let b = (lo + step * (best_i + 1) as f64).min(hi);
        let (mut theta_star, mut value) = golden_max(obj, a, b, 1e-10);
        // The boundary itself may dominate the interior refinement.
        for boundary in [lo, hi] {
            let v = obj(boundary);
            if v > value {
                value = v;
                theta_star = boundary;
            }
        }
        let saturated = (self.theta_max - theta_star.abs()) < 1e-6;
        Conjugate {
            value,
            theta_star,
            saturated,
        }
    }

    /// Front speed `q = inf_{theta > 0} (Lambda(theta) + gamma) / theta`
    /// computed by the requested method. All methods agree on the bundled
    /// models to within cross-check tolerance.
    ///
    /// For a deterministic model `L_t = b t` the infimum is not attained
    /// (`Lambda(theta) = b theta`, so the objective decreases to `b`); the
    /// exact value `q = b` is returned with the saturation flag set.
    pub fn front_speed_by(&self, gamma: f64, method: SpeedMethod) -> Result<SpeedResult> {
        if !(gamma > 0.0) {
            return Err(Error::domain(format!("front_speed requires gamma > 0, got {gamma}")));
        }
        if self.is_deterministic() {
            return Ok(SpeedResult {
                q: self.drift,
                theta_star: self.theta_max,
                method,
                saturated: true,
            });
        }
        match method {
            SpeedMethod::InfForm => {
                let obj = |theta: f64| (self.cgf_unchecked(theta) + gamma) / theta;
                let (theta_star, q) = golden_min(obj, 1e-9, self.theta_max, 1e-10);
                let saturated = self.theta_max - theta_star < 1e-6;
                Ok(SpeedResult {
                    q,
                    theta_star,
                    method,
                    saturated,
                })
            }
            SpeedMethod::SupForm => {
                // q = sup{ r : Lambda_hat(r) < gamma }, bisected in r.
                let mut lo = self.mean_increment();
                let mut hi = lo + 1.0;
                let mut doublings = 0;
                while self.legendre(hi).value < gamma {
                    lo = hi;
                    hi = lo + (hi - self.mean_increment()).max(1.0) * 2.0;
                    doublings += 1;
                    if doublings > 80 {
                        break;
                    }
                }
                let q = bisect(|r| self.legendre(r).value - gamma, lo, hi, 1e-8);
                let conj = self.legendre(q);
                Ok(SpeedResult {
                    q,
                    theta_star: conj.theta_star,
                    method,
                    saturated: conj.saturated,
                })
            }
            SpeedMethod::PerspectiveForm => {
                // q = -sup_{theta<0} [ gamma*theta + theta*Lambda(-1/theta) ],
                // the conjugate of the perspective-type function of Lambda.
                let obj = |theta: f64| gamma * theta + theta * self.cgf_unchecked(-1.0 / theta);
                let hi = -1.0 / self.theta_max;
                let lo = -1e8;
                let (theta_star, v) = golden_max(obj, lo, hi, 1e-10);
                let saturated = (theta_star - hi).abs() < 1e-6;
                Ok(SpeedResult {
                    q: -v,
                    theta_star: -1.0 / theta_star,
                    method,
                    saturated,
                })
            }
        }
    }

    /// Front speed by the primary (infimum) form.
    pub fn front_speed(&self, gamma: f64) -> Result<SpeedResult> {
        self.front_speed_by(gamma, SpeedMethod::InfForm)
    }
}

type SampleCache = HashMap<Vec<u64>, Arc<Vec<f64>>>;

static MC_CACHE: LazyLock<Mutex<SampleCache>> = LazyLock::new(|| Mutex::new(HashMap::new()));

/// Result of a numerical Legendre transform.
#[derive(Debug, Clone, Copy)]
pub struct Conjugate {
    pub value: f64,
    pub theta_star: f64,
    /// Maximizer hit the `theta_max` cap; the value is the boundary value.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpeedMethod {
    InfForm,
    SupForm,
    PerspectiveForm,
}

impl SpeedMethod {
    pub const ALL: [SpeedMethod; 3] = [
        SpeedMethod::InfForm,
        SpeedMethod::SupForm,
        SpeedMethod::PerspectiveForm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SpeedMethod::InfForm => "inf_form",
            SpeedMethod::SupForm => "sup_form",
            SpeedMethod::PerspectiveForm => "perspective_form",
        }
    }
}

/// Front speed together with the optimizing tilt.
#[derive(Debug, Clone, Copy)]
pub struct SpeedResult {
    pub q: f64,
    pub theta_star: f64,
    pub method: SpeedMethod,
    pub saturated: bool,
}
