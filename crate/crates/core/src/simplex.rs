//! Derivative-free Nelder-Mead minimizer with restarts.
//!
//! Uses the dimension-adaptive coefficients of Gao and Han (2012), which
//! behave better than the textbook values beyond a handful of dimensions.

/// Stopping and restart controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Largest allowed coordinate distance from the best vertex.
    pub x_tol: f64,
    /// Largest allowed spread between the best and worst objective values.
    pub f_tol: f64,
    /// Edge length of the axis-aligned starting simplex.
    pub initial_step: f64,
    /// Restarts from the current best point after convergence.
    pub max_restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_evals: 50_000,
            x_tol: 1e-6,
            f_tol: 1e-12,
            initial_step: 0.1,
            max_restarts: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// The final simplex met both tolerances.
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimizes `f` starting from `x0`. Deterministic for a deterministic `f`.
pub fn minimize<F>(f: F, x0: &[f64], opts: &SimplexOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(!x0.is_empty(), "cannot minimize over zero dimensions");
    let mut obj = Counted { f, evals: 0 };
    let mut best_x = x0.to_vec();
    let mut best_f = obj.eval(&best_x);
    let mut converged = false;

    for restart in 0..=opts.max_restarts {
        let (x, fx, ok) = run_once(&mut obj, &best_x, opts);
        let improvement = best_f - fx;
        let improved = fx < best_f;
        if improved {
            best_x = x;
            best_f = fx;
        }
        converged = ok;
        if !ok || obj.evals >= opts.max_evals {
            break;
        }
        // A restart that no longer moves the minimum ends the search.
        if restart > 0 && (!improved || improvement <= opts.f_tol) {
            break;
        }
    }

    Minimum {
        x: best_x,
        f: best_f,
        evaluations: obj.evals,
        converged,
    }
}

fn run_once<F>(obj: &mut Counted<F>, start: &[f64], opts: &SimplexOptions) -> (Vec<f64>, f64, bool)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let nf = n as f64;
    let rho = 1.0;
    let chi = 1.0 + 2.0 / nf;
    let gamma = 0.75 - 1.0 / (2.0 * nf);
    let sigma = 1.0 - 1.0 / nf;

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = obj.eval(start);
    simplex.push((start.to_vec(), f0));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += opts.initial_step;
        let fx = obj.eval(&x);
        simplex.push((x, fx));
    }

    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = &simplex[0];
        let spread = simplex[n].1 - best.1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(best.0.iter()).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diameter <= opts.x_tol && spread <= opts.f_tol {
            return (simplex[0].0.clone(), simplex[0].1, true);
        }
        if obj.evals >= opts.max_evals {
            return (simplex[0].0.clone(), simplex[0].1, false);
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / nf;
            }
        }
        let along = |t: f64, worst: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(worst)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let worst = simplex[n].0.clone();
        let f_worst = simplex[n].1;
        let f_second = simplex[n - 1].1;
        let f_best = simplex[0].1;

        let xr = along(rho, &worst);
        let fr = obj.eval(&xr);
        if fr < f_best {
            let xe = along(rho * chi, &worst);
            let fe = obj.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[n] = (xr, fr);
            continue;
        }
        if fr < f_worst {
            let xc = along(rho * gamma, &worst);
            let fc = obj.eval(&xc);
            if fc <= fr {
                simplex[n] = (xc, fc);
                continue;
            }
        } else {
            let xc = along(-gamma, &worst);
            let fc = obj.eval(&xc);
            if fc < f_worst {
                simplex[n] = (xc, fc);
                continue;
            }
        }
        // shrink toward the best vertex
        let anchor = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = anchor
                .iter()
                .zip(&vertex.0)
                .map(|(a, v)| a + sigma * (v - a))
                .collect();
            let fx = obj.eval(&x);
            *vertex = (x, fx);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        x.windows(2)
            .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
            .sum()
    }

    #[test]
    fn quadratic_bowl() {
        let target = [0.3, -1.2, 2.0, 0.05];
        let f = |x: &[f64]| {
            x.iter()
                .zip(target)
                .map(|(a, t)| (a - t).powi(2))
                .sum::<f64>()
        };
        let m = minimize(f, &[0.0; 4], &SimplexOptions::default());
        assert!(m.converged);
        for (a, t) in m.x.iter().zip(target) {
            assert!((a - t).abs() < 1e-5, "{:?}", m.x);
        }
        assert!(m.f < 1e-11);
    }

    #[test]
    fn rosenbrock_two_dimensions() {
        let opts = SimplexOptions {
            initial_step: 0.5,
            ..Default::default()
        };
        let m = minimize(rosenbrock, &[-1.2, 1.0], &opts);
        assert!(m.converged);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5,
            "{:?}",
            m.x
        );
    }

    #[test]
    fn budget_exhaustion_reports_not_converged() {
        let opts = SimplexOptions {
            max_evals: 30,
            ..Default::default()
        };
        let m = minimize(rosenbrock, &[-1.2, 1.0, 0.5], &opts);
        assert!(!m.converged);
        assert!(m.evaluations <= 30 + 4);
        assert!(m.f <= rosenbrock(&[-1.2, 1.0, 0.5]));
    }

    #[test]
    fn deterministic() {
        let a = minimize(rosenbrock, &[0.0, 0.0, 0.0], &SimplexOptions::default());
        let b = minimize(rosenbrock, &[0.0, 0.0, 0.0], &SimplexOptions::default());
        assert_eq!(a, b);
    }

    #[test]
    fn nan_is_treated_as_uphill() {
        let f = |x: &[f64]| {
            if x[0] < -0.5 {
                f64::NAN
            } else {
                (x[0] - 1.0).powi(2) + x[1] * x[1]
            }
        };
        let m = minimize(f, &[0.0, 0.0], &SimplexOptions::default());
        assert!((m.x[0] - 1.0).abs() < 1e-5);
    }
}
