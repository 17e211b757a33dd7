//! One-dimensional quadrature.

use gauss_quad::GaussLegendre;

/// Composite Gauss–Legendre rule with `panels` equal panels of `nodes` points each.
pub fn gauss_legendre_composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, nodes: usize) -> f64 {
    let rule = GaussLegendre::new(nodes).expect("at least two Gauss-Legendre nodes");
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let lo = a + i as f64 * w;
            rule.integrate(lo, lo + w, &mut f)
        })
        .sum()
}

/// Adaptive Simpson integration to absolute tolerance `tol`.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let c = 0.5 * (a + b);
    let fc = f(c);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(&mut f, a, b, fa, fc, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fc: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let d = 0.5 * (a + c);
    let e = 0.5 * (c + b);
    let fd = f(d);
    let fe = f(e);
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, c, fa, fd, fc, left, tol / 2.0, depth - 1)
            + simpson_step(f, c, b, fc, fe, fb, right, tol / 2.0, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_smooth_functions() {
        let v = gauss_legendre_composite(|x| x.powi(5), 0.0, 2.0, 3, 8);
        assert!((v - 64.0 / 6.0).abs() < 1e-12);
        let v = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12, 40);
        assert!((v - 2.0).abs() < 1e-10);
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, 1e-9, 10), 0.0);
    }
}
