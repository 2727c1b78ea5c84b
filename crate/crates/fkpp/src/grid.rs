//! Sampled functions on a uniform one-dimensional grid with constant
//! extrapolation beyond both ends.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    x_min: f64,
    x_max: f64,
    values: Vec<f64>,
    pub left_ext: f64,
    pub right_ext: f64,
}

impl GridFn {
    pub fn new(
        x_min: f64,
        x_max: f64,
        values: Vec<f64>,
        left_ext: f64,
        right_ext: f64,
    ) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::domain("grid needs at least 2 points"));
        }
        if !(x_max > x_min) {
            return Err(Error::domain(format!("need x_max > x_min, got [{x_min}, {x_max}]")));
        }
        Ok(GridFn {
            x_min,
            x_max,
            values,
            left_ext,
            right_ext,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(
        x_min: f64,
        x_max: f64,
        m: usize,
        f: F,
        left_ext: f64,
        right_ext: f64,
    ) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain("grid needs at least 2 points"));
        }
        let h = (x_max - x_min) / (m - 1) as f64;
        let values = (0..m).map(|i| f(x_min + h * i as f64)).collect();
        GridFn::new(x_min, x_max, values, left_ext, right_ext)
    }

    pub fn constant(x_min: f64, x_max: f64, m: usize, c: f64) -> Result<Self> {
        GridFn::from_fn(x_min, x_max, m, |_| c, c, c)
    }

    /// Heaviside initial condition `1{x >= 0}`.
    pub fn heaviside(x_min: f64, x_max: f64, m: usize) -> Result<Self> {
        GridFn::from_fn(x_min, x_max, m, |x| if x >= 0.0 { 1.0 } else { 0.0 }, 0.0, 1.0)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.values.len() - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + self.h() * i as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value at signed index, using the extension constants outside.
    pub fn value_at(&self, i: isize) -> f64 {
        if i < 0 {
            self.left_ext
        } else if i as usize >= self.values.len() {
            self.right_ext
        } else {
            self.values[i as usize]
        }
    }

    /// Linear interpolation inside the grid, constant outside.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x_min {
            if x < self.x_min {
                return self.left_ext;
            }
            return self.values[0];
        }
        if x >= self.x_max {
            if x > self.x_max {
                return self.right_ext;
            }
            return *self.values.last().unwrap();
        }
        let s = (x - self.x_min) / self.h();
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Pointwise map over values and both extension constants.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> GridFn {
        GridFn {
            x_min: self.x_min,
            x_max: self.x_max,
            values: self.values.iter().map(|&v| f(v)).collect(),
            left_ext: f(self.left_ext),
            right_ext: f(self.right_ext),
        }
    }

    pub fn max_abs_diff(&self, other: &GridFn) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_monotone_nondecreasing(&self, tol: f64) -> bool {
        self.values.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    /// Pointwise combination of two grids on the same axis.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &GridFn, f: F) -> GridFn {
        debug_assert_eq!(self.values.len(), other.values.len());
        GridFn {
            x_min: self.x_min,
            x_max: self.x_max,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            left_ext: f(self.left_ext, other.left_ext),
            right_ext: f(self.right_ext, other.right_ext),
        }
    }

    /// Clamp values and extensions into `[lo, hi]`.
    pub fn clamp(&mut self, lo: f64, hi: f64) {
        for v in &mut self.values {
            *v = v.clamp(lo, hi);
        }
        self.left_ext = self.left_ext.clamp(lo, hi);
        self.right_ext = self.right_ext.clamp(lo, hi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn heaviside_and_eval() {
        let g = GridFn::heaviside(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.values(), &[0.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(g.eval(-5.0), 0.0);
        assert_eq!(g.eval(5.0), 1.0);
        assert_abs_diff_eq!(g.eval(-0.25), 0.5, epsilon = 1e-15);
        assert_eq!(g.value_at(-1), 0.0);
        assert_eq!(g.value_at(5), 1.0);
    }

    #[test]
    fn map_touches_extensions() {
        let g = GridFn::heaviside(-1.0, 1.0, 5).unwrap().map(|v| 1.0 - v);
        assert_eq!(g.left_ext, 1.0);
        assert_eq!(g.right_ext, 0.0);
    }
}
