//! Limited-memory BFGS minimizer with a strong-Wolfe line search.
//!
//! Deterministic: no randomness, fixed evaluation order. Accepted steps
//! satisfy the sufficient-decrease condition, so the objective trace is
//! monotone non-increasing; the curvature condition keeps the quasi-Newton
//! history well conditioned.

const MEMORY: usize = 8;
const ARMIJO_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_BRACKET: usize = 20;
const MAX_ZOOM: usize = 40;

pub(crate) struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Objective at every accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
    #[allow(dead_code)] // asserted by the unit tests
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

struct Probe {
    step: f64,
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    slope: f64,
}

/// Strong-Wolfe line search (bracket then zoom). Returns a step satisfying
/// both conditions, or `None` when no acceptable step is representable.
fn wolfe_search<F>(
    objective: &mut F,
    x: &[f64],
    direction: &[f64],
    value0: f64,
    slope0: f64,
) -> Option<Probe>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let eval = |objective: &mut F, step: f64| -> Probe {
        let cand: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + step * di)
            .collect();
        let (value, grad) = objective(&cand);
        let slope = dot(&grad, direction);
        Probe {
            step,
            x: cand,
            value,
            grad,
            slope,
        }
    };

    let zoom = |objective: &mut F, mut lo: Probe, mut hi: Probe| -> Option<Probe> {
        for _ in 0..MAX_ZOOM {
            let step = 0.5 * (lo.step + hi.step);
            if !(step.is_finite() && (step - lo.step).abs() > 1e-18) {
                break;
            }
            let probe = eval(objective, step);
            if !probe.value.is_finite()
                || probe.value > value0 + ARMIJO_C1 * step * slope0
                || probe.value >= lo.value
            {
                hi = probe;
            } else {
                if probe.slope.abs() <= -WOLFE_C2 * slope0 {
                    return Some(probe);
                }
                if probe.slope * (hi.step - lo.step) >= 0.0 {
                    hi = Probe {
                        step: lo.step,
                        x: lo.x.clone(),
                        value: lo.value,
                        grad: lo.grad.clone(),
                        slope: lo.slope,
                    };
                }
                lo = probe;
            }
        }
        // The interval collapsed without meeting the curvature condition;
        // fall back to the best sufficient-decrease point found.
        if lo.step > 0.0 && lo.value <= value0 + ARMIJO_C1 * lo.step * slope0 {
            Some(lo)
        } else {
            None
        }
    };

    let mut prev = Probe {
        step: 0.0,
        x: x.to_vec(),
        value: value0,
        grad: Vec::new(),
        slope: slope0,
    };
    let mut step = 1.0;
    for round in 0..MAX_BRACKET {
        let probe = eval(objective, step);
        if !probe.value.is_finite()
            || probe.value > value0 + ARMIJO_C1 * step * slope0
            || (round > 0 && probe.value >= prev.value)
        {
            return zoom(objective, prev, probe);
        }
        if probe.slope.abs() <= -WOLFE_C2 * slope0 {
            return Some(probe);
        }
        if probe.slope >= 0.0 {
            return zoom(objective, probe, prev);
        }
        step *= 2.0;
        prev = probe;
    }
    None
}

/// Minimizes `objective` from `x0`. Stops when the gradient infinity norm
/// drops below `tolerance`, after `max_iterations` accepted steps, or when
/// the line search cannot make progress.
pub(crate) fn lbfgs_minimize<F>(
    mut objective: F,
    x0: Vec<f64>,
    tolerance: f64,
    max_iterations: usize,
) -> OptimOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut value, mut grad) = objective(&x);
    let mut trace = vec![value];
    let mut s_history: Vec<Vec<f64>> = Vec::new();
    let mut y_history: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;

    while iterations < max_iterations {
        if inf_norm(&grad) < tolerance {
            return OptimOutcome {
                x,
                value,
                iterations,
                trace,
                converged: true,
            };
        }

        // Two-loop recursion for the search direction.
        let mut direction: Vec<f64> = grad.iter().map(|g| -g).collect();
        let k = s_history.len();
        let mut alphas = vec![0.0; k];
        for i in (0..k).rev() {
            let rho = 1.0 / dot(&y_history[i], &s_history[i]);
            let alpha = rho * dot(&s_history[i], &direction);
            alphas[i] = alpha;
            for (d, y) in direction.iter_mut().zip(&y_history[i]) {
                *d -= alpha * y;
            }
        }
        if k > 0 {
            let last = k - 1;
            let gamma = dot(&s_history[last], &y_history[last])
                / dot(&y_history[last], &y_history[last]);
            for d in direction.iter_mut() {
                *d *= gamma;
            }
        }
        for i in 0..k {
            let rho = 1.0 / dot(&y_history[i], &s_history[i]);
            let beta = rho * dot(&y_history[i], &direction);
            for (d, s) in direction.iter_mut().zip(&s_history[i]) {
                *d += (alphas[i] - beta) * s;
            }
        }

        // Fall back to steepest descent when curvature information is unusable.
        let mut slope = dot(&grad, &direction);
        if !(slope < 0.0) {
            s_history.clear();
            y_history.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &direction);
            if !(slope < 0.0) {
                break; // zero gradient; nothing left to do
            }
        }

        let Some(accepted) = wolfe_search(&mut objective, &x, &direction, value, slope) else {
            break; // no representable step makes progress
        };

        let s: Vec<f64> = accepted.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = accepted.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 {
            if s_history.len() == MEMORY {
                s_history.remove(0);
                y_history.remove(0);
            }
            s_history.push(s);
            y_history.push(y);
        }

        x = accepted.x;
        value = accepted.value;
        grad = accepted.grad;
        trace.push(value);
        iterations += 1;
    }

    let converged = inf_norm(&grad) < tolerance;
    OptimOutcome {
        x,
        value,
        iterations,
        trace,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic_bowl() {
        // f(x) = sum (x_i - i)^2
        let f = |x: &[f64]| {
            let value: f64 = x.iter().enumerate().map(|(i, &v)| (v - i as f64).powi(2)).sum();
            let grad: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, &v)| 2.0 * (v - i as f64))
                .collect();
            (value, grad)
        };
        let out = lbfgs_minimize(f, vec![5.0; 4], 1e-8, 200);
        assert!(out.converged);
        for (i, v) in out.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let value = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let grad = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (value, grad)
        };
        let out = lbfgs_minimize(f, vec![-1.2, 1.0], 1e-8, 500);
        assert!(out.converged, "stopped after {} iterations", out.iterations);
        assert!((out.x[0] - 1.0).abs() < 1e-5);
        assert!((out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn trace_is_monotone_non_increasing() {
        let f = |x: &[f64]| {
            let value = x[0].powi(4) + x[1].powi(2) + (x[0] * x[1] - 1.0).powi(2);
            let grad = vec![
                4.0 * x[0].powi(3) + 2.0 * x[1] * (x[0] * x[1] - 1.0),
                2.0 * x[1] + 2.0 * x[0] * (x[0] * x[1] - 1.0),
            ];
            (value, grad)
        };
        let out = lbfgs_minimize(f, vec![3.0, -2.0], 1e-10, 300);
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }
}
