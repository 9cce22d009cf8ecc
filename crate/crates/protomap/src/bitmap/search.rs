//! Derivative-free pattern search over a box, optionally intersected with
//! a fixed-sum hyperplane: poll the 2N scaled basis directions, move to
//! the best improving point, halve the step on failure.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;

use super::Error;

#[derive(Debug, Clone)]
pub struct PatternSearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub polls: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct PatternSearchOptions {
    pub initial_step: f64,
    pub step_tolerance: f64,
    /// Evaluate the polls of one iteration in parallel.
    pub parallel: bool,
    pub max_iterations: usize,
}

impl Default for PatternSearchOptions {
    fn default() -> Self {
        PatternSearchOptions {
            initial_step: 0.25,
            step_tolerance: 1e-3,
            parallel: false,
            max_iterations: 10_000,
        }
    }
}

/// Projects `x` onto the box `[lower, upper]`, and when `sum_target` is
/// given, onto its intersection with the hyperplane Σx = s: the clamp
/// point is shifted by a common offset found by bisection, which is the
/// Euclidean projection onto the intersection.
pub fn project_feasible(
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    sum_target: Option<f64>,
) -> Option<Vec<f64>> {
    let clamp = |shift: f64| -> Vec<f64> {
        x.iter()
            .zip(lower.iter().zip(upper))
            .map(|(&v, (&lo, &hi))| (v + shift).clamp(lo, hi))
            .collect()
    };
    let Some(target) = sum_target else {
        return Some(clamp(0.0));
    };
    let min_sum: f64 = lower.iter().sum();
    let max_sum: f64 = upper.iter().sum();
    if target < min_sum - 1e-9 || target > max_sum + 1e-9 {
        return None;
    }
    let span: f64 = x
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&lo, &hi))| (v - lo).abs().max((hi - v).abs()))
        .fold(1.0, f64::max);
    let (mut s_lo, mut s_hi) = (-span, span);
    for _ in 0..200 {
        let mid = 0.5 * (s_lo + s_hi);
        let sum: f64 = clamp(mid).iter().sum();
        if sum < target {
            s_lo = mid;
        } else {
            s_hi = mid;
        }
    }
    Some(clamp(0.5 * (s_lo + s_hi)))
}

/// Minimizes `objective` from the feasible point `x0`.
///
/// Polls `x ± s·e_i` (projected) for every coordinate; an iteration that
/// finds no improvement halves `s`, and the search stops once `s` drops
/// below the tolerance. Objective values are cached on coordinates rounded
/// to 1e-4 since polling revisits points.
pub fn pattern_search<F>(
    objective: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    sum_target: Option<f64>,
    opts: &PatternSearchOptions,
) -> Result<PatternSearchResult, Error>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::BadDimensions);
    }
    let feasible = |x: &[f64]| -> bool {
        x.iter()
            .zip(lower.iter().zip(upper))
            .all(|(&v, (&lo, &hi))| v >= lo - 1e-9 && v <= hi + 1e-9)
            && sum_target.map_or(true, |t| {
                (x.iter().sum::<f64>() - t).abs() <= 1e-7 * n.max(1) as f64
            })
    };
    if !feasible(x0) {
        return Err(Error::InfeasibleStart);
    }

    let cache: Mutex<HashMap<Vec<i64>, f64>> = Mutex::new(HashMap::new());
    let key = |x: &[f64]| -> Vec<i64> { x.iter().map(|v| (v * 1e4).round() as i64).collect() };
    let eval = |x: &[f64]| -> f64 {
        let k = key(x);
        if let Some(&v) = cache.lock().unwrap().get(&k) {
            return v;
        }
        let v = objective(x);
        cache.lock().unwrap().insert(k, v);
        v
    };

    let mut x = x0.to_vec();
    let mut fx = eval(&x);
    let mut step = opts.initial_step;
    let mut polls = 0usize;
    let mut iterations = 0usize;
    while step >= opts.step_tolerance && iterations < opts.max_iterations {
        iterations += 1;
        let x_ref = &x;
        let candidates: Vec<Vec<f64>> = (0..n)
            .flat_map(|i| {
                [step, -step].into_iter().filter_map(move |d| {
                    let mut probe = x_ref.clone();
                    probe[i] += d;
                    project_feasible(&probe, lower, upper, sum_target)
                })
            })
            .filter(|c| c.iter().zip(x_ref).any(|(a, b)| (a - b).abs() > 1e-12))
            .collect();
        polls += candidates.len();
        let best = if opts.parallel {
            candidates
                .into_par_iter()
                .map(|c| {
                    let v = eval(&c);
                    (c, v)
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        } else {
            candidates
                .into_iter()
                .map(|c| {
                    let v = eval(&c);
                    (c, v)
                })
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        };
        match best {
            Some((c, v)) if v < fx - 1e-15 => {
                x = c;
                fx = v;
            }
            _ => step *= 0.5,
        }
    }
    Ok(PatternSearchResult {
        x,
        value: fx,
        polls,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quadratic_interior_minimum() {
        let f = |x: &[f64]| (x[0] - 0.3) * (x[0] - 0.3);
        let opts = PatternSearchOptions {
            initial_step: 0.5,
            ..Default::default()
        };
        let r = pattern_search(f, &[0.9], &[0.0], &[1.0], None, &opts).unwrap();
        assert!((r.x[0] - 0.3).abs() <= 1e-3, "got {}", r.x[0]);
    }

    #[test]
    fn constant_objective_returns_start() {
        let f = |_: &[f64]| 1.0;
        let r = pattern_search(f, &[0.4, 0.6], &[0.0, 0.0], &[1.0, 1.0], None, &Default::default())
            .unwrap();
        assert_eq!(r.x, vec![0.4, 0.6]);
        assert_eq!(r.value, 1.0);
    }

    #[test]
    fn boundary_minimum_respects_projection() {
        // minimum of (x-2)² + (y+1)² over [0,1]² is the corner (1, 0)
        let f = |x: &[f64]| (x[0] - 2.0) * (x[0] - 2.0) + (x[1] + 1.0) * (x[1] + 1.0);
        let r = pattern_search(
            f,
            &[0.2, 0.8],
            &[0.0, 0.0],
            &[1.0, 1.0],
            None,
            &Default::default(),
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() <= 1e-3);
        assert!(r.x[1].abs() <= 1e-3);
    }

    #[test]
    fn sum_constraint_maintained() {
        // minimize ||x - (1,0,0)||² over the probability simplex scaled by 1.5
        let f = |x: &[f64]| {
            (x[0] - 1.0) * (x[0] - 1.0) + x[1] * x[1] + x[2] * x[2]
        };
        let x0 = vec![0.5; 3];
        let r = pattern_search(
            f,
            &x0,
            &[0.0; 3],
            &[1.0; 3],
            Some(1.5),
            &Default::default(),
        )
        .unwrap();
        assert_relative_eq!(r.x.iter().sum::<f64>(), 1.5, epsilon = 1e-6);
        assert!(r.x[0] > 0.95);
    }

    #[test]
    fn infeasible_start_rejected() {
        let f = |_: &[f64]| 0.0;
        let err = pattern_search(f, &[2.0], &[0.0], &[1.0], None, &Default::default());
        assert!(matches!(err, Err(Error::InfeasibleStart)));
    }

    #[test]
    fn projection_onto_box_and_plane() {
        let p = project_feasible(&[0.9, 0.9], &[0.0, 0.0], &[1.0, 1.0], Some(1.0)).unwrap();
        assert_relative_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        assert_relative_eq!(p[0], 0.5, epsilon = 1e-9);
        // empty intersection
        assert!(project_feasible(&[0.5], &[0.0], &[1.0], Some(2.0)).is_none());
    }
}
