//! Nelder-Mead downhill simplex.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexConfig {
    pub max_iterations: usize,
    /// Stop once the spread of function values across the simplex is below this.
    pub ftol: f64,
    /// Edge length of the initial simplex along each coordinate axis.
    pub initial_step: f64,
    /// Known lower bound of the objective; reaching it within `ftol` ends the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        SimplexConfig {
            max_iterations: 2000,
            ftol: 1e-8,
            initial_step: 0.5,
            lower_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// `(iteration, best value)` each time the best vertex improved,
    /// starting with iteration 0 for the initial simplex.
    pub history: Vec<(usize, f64)>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimizes `f` from `x0`. Non-finite objective values are treated as
/// `+∞`, so a failed evaluation simply loses every comparison.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    config: &SimplexConfig,
) -> SimplexResult {
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += config.initial_step;
        let fx = eval(&x);
        simplex.push((x, fx));
    }
    sort(&mut simplex);

    let mut sum = vertex_sum(&simplex, n);
    let mut history = vec![(0, simplex[0].1)];
    let mut iterations = 0;
    let mut converged = n == 0;

    while !converged && iterations < config.max_iterations {
        let spread = simplex[n].1 - simplex[0].1;
        let at_floor = config
            .lower_bound
            .is_some_and(|lb| simplex[0].1 <= lb + config.ftol);
        if at_floor || (spread.is_finite() && spread.abs() <= config.ftol) {
            converged = true;
            break;
        }
        iterations += 1;

        // Centroid of all vertices but the worst.
        let centroid: Vec<f64> = sum
            .iter()
            .zip(&simplex[n].0)
            .map(|(s, w)| (s - w) / n as f64)
            .collect();
        let toward = |coef: f64, from: &[f64]| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };

        let worst = simplex[n].0.clone();
        let f_worst = simplex[n].1;
        let f_second = simplex[n - 1].1;
        let f_best = simplex[0].1;

        let xr = toward(REFLECT, &worst);
        let fr = eval(&xr);
        let mut replacement = None;
        if fr < f_best {
            let xe = toward(EXPAND, &worst);
            let fe = eval(&xe);
            replacement = Some(if fe < fr { (xe, fe) } else { (xr, fr) });
        } else if fr < f_second {
            replacement = Some((xr, fr));
        } else {
            let (xc, fc) = if fr < f_worst {
                let xc = toward(REFLECT * CONTRACT, &worst);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = toward(-CONTRACT, &worst);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(f_worst) {
                replacement = Some((xc, fc));
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&vertex.0)
                        .map(|(b, v)| b + SHRINK * (v - b))
                        .collect();
                    let fx = eval(&x);
                    *vertex = (x, fx);
                }
                sum = vertex_sum(&simplex, n);
            }
        }
        if let Some(new) = replacement {
            for ((s, o), v) in sum.iter_mut().zip(&worst).zip(&new.0) {
                *s += v - o;
            }
            simplex[n] = new;
        }
        sort(&mut simplex);
        if simplex[0].1 < history.last().map(|h| h.1).unwrap_or(f64::INFINITY) {
            history.push((iterations, simplex[0].1));
        }
    }

    let (x, fx) = simplex.swap_remove(0);
    SimplexResult {
        x,
        fx,
        iterations,
        evaluations,
        converged,
        history,
    }
}

fn vertex_sum(simplex: &[(Vec<f64>, f64)], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| simplex.iter().map(|(x, _)| x[j]).sum())
        .collect()
}

/// Stable sort by value, so ties keep their earlier position.
fn sort(simplex: &mut [(Vec<f64>, f64)]) {
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
}
