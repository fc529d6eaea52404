//! Derivative-free minimization over a box-bounded domain.
//!
//! The variance-parameter search space is tiny (one coordinate per random
//! factor, four at most in practice), so a Nelder-Mead simplex with
//! projection onto the lower bounds is sufficient. A coordinate pattern
//! search is run afterwards to polish the solution and to verify local
//! optimality near the boundary, where the simplex can collapse.

/// Options for one Nelder-Mead run.
#[derive(Debug, Clone)]
pub struct NmOptions {
    pub max_evals: usize,
    /// Relative spread of function values across the simplex at which to stop.
    pub rel_tol: f64,
    /// Maximum vertex distance (infinity norm) at which to stop.
    pub param_tol: f64,
    /// Initial simplex edge length.
    pub init_step: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_evals: 10_000,
            rel_tol: 1e-10,
            param_tol: 1e-8,
            init_step: 0.4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64]) {
    for (v, lo) in x.iter_mut().zip(lower) {
        if *v < *lo {
            *v = *lo;
        }
    }
}

/// Nelder-Mead with reflection/expansion/contraction/shrink and projection
/// of every candidate onto `lower`. Convergence requires both the relative
/// function spread and the simplex diameter criteria to hold.
pub fn nelder_mead<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    opts: &NmOptions,
    evals_used: usize,
) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1);
    assert_eq!(lower.len(), n);
    let mut evals = evals_used;

    let mut eval = |x: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: x0 plus a step along each coordinate.
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut p0 = x0.to_vec();
    project(&mut p0, lower);
    let f0 = eval(&p0, &mut evals);
    simplex.push((p0.clone(), f0));
    for i in 0..n {
        let mut p = p0.clone();
        p[i] += opts.init_step;
        project(&mut p, lower);
        let fp = eval(&p, &mut evals);
        simplex.push((p, fp));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;

    while evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));

        let f_best = simplex[0].1;
        let f_worst = simplex[n].1;
        let f_spread = f_worst - f_best;
        let diam = simplex[1..]
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if f_spread <= opts.rel_tol * (f_best.abs() + opts.rel_tol) && diam <= opts.param_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v;
            }
        }
        for c in centroid.iter_mut() {
            *c /= n as f64;
        }

        let worst = simplex[n].clone();
        let mut reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst.0)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        project(&mut reflected, lower);
        let f_r = eval(&reflected, &mut evals);

        if f_r < simplex[0].1 {
            // Try to expand.
            let mut expanded: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + gamma * alpha * (c - w))
                .collect();
            project(&mut expanded, lower);
            let f_e = eval(&expanded, &mut evals);
            simplex[n] = if f_e < f_r {
                (expanded, f_e)
            } else {
                (reflected, f_r)
            };
            continue;
        }
        if f_r < simplex[n - 1].1 {
            simplex[n] = (reflected, f_r);
            continue;
        }

        // Contraction (outside if the reflection improved on the worst).
        let (anchor, f_anchor) = if f_r < worst.1 {
            (&reflected, f_r)
        } else {
            (&worst.0, worst.1)
        };
        let mut contracted: Vec<f64> = centroid
            .iter()
            .zip(anchor)
            .map(|(c, a)| c + rho * (a - c))
            .collect();
        project(&mut contracted, lower);
        let f_c = eval(&contracted, &mut evals);
        if f_c < f_anchor {
            simplex[n] = (contracted, f_c);
            continue;
        }

        // Shrink towards the best vertex.
        let best = simplex[0].0.clone();
        for (p, fp) in simplex.iter_mut().skip(1) {
            for (v, b) in p.iter_mut().zip(&best) {
                *v = b + sigma * (*v - b);
            }
            project(p, lower);
            *fp = eval(p, &mut evals);
            if evals >= opts.max_evals {
                break;
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    OptimResult {
        x: simplex[0].0.clone(),
        fx: simplex[0].1,
        evals,
        converged,
    }
}

/// Coordinate pattern search with shrinking steps. Returns the refined point
/// and whether any step produced an improvement larger than `accept_tol`.
pub fn pattern_polish<F>(
    mut f: F,
    x: &[f64],
    fx: f64,
    lower: &[f64],
    max_evals: usize,
    mut evals: usize,
    accept_tol: f64,
) -> (OptimResult, bool)
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best = x.to_vec();
    let mut f_best = fx;
    let mut improved_significantly = false;

    for &h in &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7] {
        loop {
            let mut moved = false;
            for i in 0..best.len() {
                for dir in [1.0, -1.0] {
                    if evals >= max_evals {
                        return (
                            OptimResult {
                                x: best,
                                fx: f_best,
                                evals,
                                converged: false,
                            },
                            improved_significantly,
                        );
                    }
                    let mut cand = best.clone();
                    cand[i] += dir * h;
                    project(&mut cand, lower);
                    if cand == best {
                        continue;
                    }
                    evals += 1;
                    let fc = f(&cand);
                    if fc < f_best {
                        if f_best - fc > accept_tol {
                            improved_significantly = true;
                        }
                        best = cand;
                        f_best = fc;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
    }
    (
        OptimResult {
            x: best,
            fx: f_best,
            evals,
            converged: true,
        },
        improved_significantly,
    )
}

/// Coordinate-wise parabolic refinement. Near the optimum the objective is
/// locally quadratic; fitting a parabola through `x - h, x, x + h` and
/// jumping to its vertex pins the minimizer far below the resolution that a
/// direct-search method can reach, and the fixed point does not depend on
/// the search path that led here. Coordinates at the lower bound stay there
/// unless the inward probe improves the objective.
pub fn quadratic_refine<F>(
    mut f: F,
    x: &[f64],
    fx: f64,
    lower: &[f64],
    h: f64,
    sweeps: usize,
    max_evals: usize,
    mut evals: usize,
) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let mut best = x.to_vec();
    let mut f_best = fx;
    for _ in 0..sweeps {
        for i in 0..best.len() {
            if evals + 3 > max_evals {
                return OptimResult {
                    x: best,
                    fx: f_best,
                    evals,
                    converged: false,
                };
            }
            if best[i] < lower[i] + h {
                // too close to the bound for a centered parabola; the
                // pattern search already resolved this region
                continue;
            }
            let mut xm = best.clone();
            xm[i] -= h;
            let mut xp = best.clone();
            xp[i] += h;
            evals += 2;
            let fm = f(&xm);
            let fp = f(&xp);
            let denom = fp + fm - 2.0 * f_best;
            if !(denom > 0.0) || !denom.is_finite() {
                continue;
            }
            let step = (0.5 * h * (fm - fp) / denom).clamp(-h, h);
            if step == 0.0 {
                continue;
            }
            let mut cand = best.clone();
            cand[i] = (cand[i] + step).max(lower[i]);
            evals += 1;
            let fc = f(&cand);
            // The vertex improvement shrinks below float resolution as the
            // iteration contracts; accept moves within a noise band so the
            // contraction can finish instead of stalling one step short.
            if fc <= f_best + 1e-11 * (1.0 + f_best.abs()) {
                best = cand;
                f_best = f_best.min(fc);
            }
        }
    }
    OptimResult {
        x: best,
        fx: f_best,
        evals,
        converged: true,
    }
}
