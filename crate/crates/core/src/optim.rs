//! Derivative-free minimization (Nelder-Mead simplex).

/// Result of a simplex minimization.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub fval: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder-Mead with adaptive restarts. `scale` sets the initial simplex edge
/// per coordinate. Converges when both the simplex spread and the function
/// spread fall below `tol` (relative to the best vertex).
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: &[f64],
    tol: f64,
    max_iter: usize,
) -> MinimizeResult {
    assert_eq!(x0.len(), scale.len());
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut best = x0.to_vec();
    let mut best_f = f(&best);
    let mut total_iters = 0;

    for restart in 0..3 {
        let shrink = 0.5f64.powi(restart);
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut fvals: Vec<f64> = Vec::with_capacity(n + 1);
        simplex.push(best.clone());
        fvals.push(best_f);
        for i in 0..n {
            let mut v = best.clone();
            v[i] += scale[i] * shrink;
            fvals.push(f(&v));
            simplex.push(v);
        }

        let mut converged = false;
        while total_iters < max_iter {
            total_iters += 1;
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap());
            let (lo, hi, hi2) = (order[0], order[n], order[n - 1]);

            let f_scale = fvals[lo].abs().max(1.0);
            let x_scale: f64 = simplex[lo]
                .iter()
                .map(|v| v.abs())
                .fold(0.0, f64::max)
                .max(1e-300);
            let x_spread = (0..n)
                .map(|i| {
                    simplex
                        .iter()
                        .map(|v| v[i])
                        .fold(f64::NEG_INFINITY, f64::max)
                        - simplex.iter().map(|v| v[i]).fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max);
            if (fvals[hi] - fvals[lo]).abs() <= tol * f_scale && x_spread <= tol * x_scale {
                converged = true;
                break;
            }

            // centroid of all but the worst vertex
            let mut c = vec![0.0; n];
            for (idx, v) in simplex.iter().enumerate() {
                if idx != hi {
                    for i in 0..n {
                        c[i] += v[i] / n as f64;
                    }
                }
            }

            let refl: Vec<f64> = (0..n).map(|i| c[i] + alpha * (c[i] - simplex[hi][i])).collect();
            let f_refl = f(&refl);
            if f_refl < fvals[lo] {
                let exp: Vec<f64> =
                    (0..n).map(|i| c[i] + gamma * (refl[i] - c[i])).collect();
                let f_exp = f(&exp);
                if f_exp < f_refl {
                    simplex[hi] = exp;
                    fvals[hi] = f_exp;
                } else {
                    simplex[hi] = refl;
                    fvals[hi] = f_refl;
                }
            } else if f_refl < fvals[hi2] {
                simplex[hi] = refl;
                fvals[hi] = f_refl;
            } else {
                let contr: Vec<f64> =
                    (0..n).map(|i| c[i] + rho * (simplex[hi][i] - c[i])).collect();
                let f_contr = f(&contr);
                if f_contr < fvals[hi] {
                    simplex[hi] = contr;
                    fvals[hi] = f_contr;
                } else {
                    let lo_v = simplex[lo].clone();
                    for idx in 0..=n {
                        if idx == lo {
                            continue;
                        }
                        for i in 0..n {
                            simplex[idx][i] = lo_v[i] + sigma * (simplex[idx][i] - lo_v[i]);
                        }
                        fvals[idx] = f(&simplex[idx]);
                    }
                }
            }
        }

        let lo = (0..=n)
            .min_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap())
            .unwrap();
        if fvals[lo] < best_f {
            best = simplex[lo].clone();
            best_f = fvals[lo];
        }
        if converged && restart > 0 {
            return MinimizeResult {
                x: best,
                fval: best_f,
                iterations: total_iters,
                converged: true,
            };
        }
        if converged && restart == 0 {
            // one confirmation restart from the found optimum
            continue;
        }
    }
    MinimizeResult {
        x: best,
        fval: best_f,
        iterations: total_iters,
        converged: total_iters < max_iter,
    }
}
