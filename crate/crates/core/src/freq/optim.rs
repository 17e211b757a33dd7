//! Derivative-free Nelder–Mead simplex search.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop once the spread of objective values over the simplex is below this.
    pub f_tol: f64,
    /// ...and every vertex is within this distance of the best one.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 4000, f_tol: 1e-11, x_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Minimum<const N: usize> {
    pub x: [f64; N],
    pub f: f64,
    pub converged: bool,
    pub evals: usize,
}

/// Minimizes `f` starting from `x0` with initial edge lengths `step`.
///
/// Non-finite objective values are treated as `+inf`, so infeasible regions are simply
/// never accepted. `x0` itself must be feasible.
pub fn nelder_mead<const N: usize, F>(mut f: F, x0: [f64; N], step: [f64; N], opts: NelderMeadOptions) -> Minimum<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut evals = 0usize;
    let mut eval = |x: &[f64; N], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<([f64; N], f64)> = Vec::with_capacity(N + 1);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0, f0));
    for i in 0..N {
        let mut x = x0;
        let mut h = step[i];
        // shrink toward x0 until the vertex is feasible
        let mut fx = f64::INFINITY;
        for _ in 0..30 {
            x[i] = x0[i] + h;
            fx = eval(&x, &mut evals);
            if fx.is_finite() {
                break;
            }
            h *= -0.5;
        }
        simplex.push((x, fx));
    }

    let (alpha, gamma, rho, shrink) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0];
        let worst = simplex[N];
        let spread = worst.1 - best.1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(best.0.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.is_finite() && spread <= opts.f_tol * (1.0 + best.1.abs()) && size <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = [0.0; N];
        for (x, _) in &simplex[..N] {
            for j in 0..N {
                centroid[j] += x[j] / N as f64;
            }
        }
        let along = |t: f64| {
            let mut p = [0.0; N];
            for j in 0..N {
                p[j] = centroid[j] + t * (worst.0[j] - centroid[j]);
            }
            p
        };

        let xr = along(-alpha);
        let fr = eval(&xr, &mut evals);
        if fr < best.1 {
            let xe = along(-gamma);
            let fe = eval(&xe, &mut evals);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = along(-rho);
            (xc, eval(&xc, &mut evals))
        } else {
            let xc = along(rho);
            (xc, eval(&xc, &mut evals))
        };
        if fc < worst.1.min(fr) {
            simplex[N] = (xc, fc);
            continue;
        }
        for v in simplex.iter_mut().skip(1) {
            for j in 0..N {
                v.0[j] = best.0[j] + shrink * (v.0[j] - best.0[j]);
            }
            v.1 = eval(&v.0, &mut evals);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Minimum { x: simplex[0].0, f: simplex[0].1, converged, evals }
}
