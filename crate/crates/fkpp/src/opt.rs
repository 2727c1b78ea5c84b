//! One-dimensional search primitives: golden-section extremization and
//! bisection. These back the Legendre transforms, the speed formulas and
//! the extinction-probability root find.

/// Inverse golden ratio, (sqrt(5) - 1) / 2.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimize a unimodal function on `[a, b]` by golden-section search.
///
/// Returns `(x_min, f(x_min))`. The interval is shrunk until its width is
/// below `xtol`; for a function that is locally quadratic around the
/// minimizer the error in the *value* is O(xtol^2).
pub fn golden_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    debug_assert!(b > a);
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > xtol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Maximize a unimodal function on `[a, b]`; see [`golden_min`].
pub fn golden_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    let (x, v) = golden_min(|x| -f(x), a, b, xtol);
    (x, -v)
}

/// Find a root of `f` on `[a, b]` by bisection, assuming `f(a)` and `f(b)`
/// have opposite signs (either may be zero). Returns the midpoint of the
/// final bracket once its width is below `xtol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64) -> f64 {
    let (mut a, mut b) = (a, b);
    let fa = f(a);
    if fa == 0.0 {
        return a;
    }
    let positive_at_a = fa > 0.0;
    while b - a > xtol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == positive_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
