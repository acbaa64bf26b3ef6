//! Adaptive Simpson quadrature.
//!
//! Used as an independent numerical oracle for closed-form expectations
//! (perturbation moments, the Gaussian tail, Laplacian moments), both in the
//! test suites and in the `check` command of the harness.

/// An abscissa together with its function value.
type Sample = (f64, f64);

fn simpson(a: Sample, b: Sample, fm: f64) -> f64 {
    (b.0 - a.0) / 6.0 * (a.1 + 4.0 * fm + b.1)
}

fn recurse(
    f: &impl Fn(f64) -> f64,
    a: Sample,
    b: Sample,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = (0.5 * (a.0 + b.0), fm);
    let flm = f(0.5 * (a.0 + m.0));
    let frm = f(0.5 * (m.0 + b.0));
    let left = simpson(a, m, flm);
    let right = simpson(m, b, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        recurse(f, a, m, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, frm, right, 0.5 * tol, depth - 1)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let a = (a, f(a));
    let b = (b, f(b));
    let fm = f(0.5 * (a.0 + b.0));
    let whole = simpson(a, b, fm);
    recurse(&f, a, b, fm, whole, tol, 50)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_polynomial_exactly() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-12);
        assert!((v - 9.0).abs() < 1e-12);
    }

    #[test]
    fn integrates_cosine() {
        let v = integrate(|x| x.cos(), 0.0, PI / 2.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn handles_sharp_gaussian() {
        let v = integrate(
            |x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            -10.0,
            10.0,
            1e-12,
        );
        assert!((v - 1.0).abs() < 1e-10, "v = {v}");
    }
}
