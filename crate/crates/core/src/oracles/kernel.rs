//! Projected subgradient on `max_i f_i(x)` with a running dual lower bound.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// A nominal problem at fixed noise: convex `f_i` over a compact convex domain.
pub(crate) trait NominalKernel {
    fn constraints(&self) -> usize;

    fn value(&self, constraint: usize, x: &DVector<f64>) -> f64;

    fn subgradient(&self, constraint: usize, x: &DVector<f64>) -> DVector<f64>;

    fn project(&self, x: &DVector<f64>) -> DVector<f64>;

    fn origin(&self) -> DVector<f64>;

    fn domain_diameter(&self) -> f64;

    /// Upper bound on subgradient norms over the domain.
    fn lipschitz(&self) -> f64;

    /// Lower bound on `min_{x in D} sum_i weights_i f_i(x)`.
    fn dual_bound(&self, weights: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum NominalVerdict {
    Feasible {
        x: DVector<f64>,
        iterations: usize,
    },
    Infeasible {
        weights: Vec<f64>,
        bound: f64,
        iterations: usize,
    },
}

/// Default inner budget `50 ceil(1/eps^2)`.
pub fn default_budget(eps: f64) -> usize {
    50 * (1.0 / (eps * eps)).ceil() as usize
}

fn dual_check_due(t: usize) -> bool {
    t <= 32 || t.is_multiple_of(8)
}

/// Runs until `max_i f_i(x) <= eps`, until some weighting proves the
/// minimum positive, or until `budget` subgradient steps were taken.
///
/// Two weightings are tried: exponential weights on the cumulative
/// constraint values, and the frequency with which each constraint was the
/// active one. Ties for the active constraint go to the lowest index.
pub(crate) fn solve_nominal<K: NominalKernel + ?Sized>(
    kernel: &K,
    eps: f64,
    budget: usize,
    warm_start: Option<&DVector<f64>>,
) -> Result<NominalVerdict> {
    let m = kernel.constraints();
    let mut x = match warm_start {
        Some(w) => kernel.project(w),
        None => kernel.origin(),
    };
    let diameter = kernel.domain_diameter();
    let lipschitz = kernel.lipschitz();

    let mut cumulative = vec![0.0; m];
    let mut active = vec![0usize; m];
    let mut scale = 0.0_f64;
    let mut values = vec![0.0; m];

    for t in 1..=budget.max(1) {
        for (i, v) in values.iter_mut().enumerate() {
            *v = kernel.value(i, &x);
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("nominal constraint value"));
        }
        let (worst, top) =
            values.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
            );
        if top <= eps {
            return Ok(NominalVerdict::Feasible { x, iterations: t - 1 });
        }
        if t > budget {
            break;
        }
        if t == 1 {
            let spread = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            scale = (lipschitz * diameter + spread).max(f64::MIN_POSITIVE);
        }
        for (c, v) in cumulative.iter_mut().zip(&values) {
            *c += v;
        }
        active[worst] += 1;

        if dual_check_due(t) {
            for weights in [hedge_weights(&cumulative, t, scale), frequency_weights(&active, t)] {
                let bound = kernel.dual_bound(&weights)?;
                if bound > 0.0 {
                    return Ok(NominalVerdict::Infeasible {
                        weights,
                        bound,
                        iterations: t,
                    });
                }
            }
        }

        let g = kernel.subgradient(worst, &x);
        let norm = g.norm();
        if norm == 0.0 {
            // x minimizes f_worst, whose minimum then exceeds eps.
            let mut weights = vec![0.0; m];
            weights[worst] = 1.0;
            let bound = kernel.dual_bound(&weights)?;
            if bound > 0.0 {
                return Ok(NominalVerdict::Infeasible {
                    weights,
                    bound,
                    iterations: t,
                });
            }
            continue;
        }
        let step = diameter / (lipschitz.max(norm) * (t as f64).sqrt());
        x = kernel.project(&(&x - g * step));
    }
    Err(Error::Budget {
        iterations: budget,
        detail: "nominal oracle neither reached eps-feasibility nor a positive dual bound".into(),
    })
}

fn hedge_weights(cumulative: &[f64], t: usize, scale: f64) -> Vec<f64> {
    let m = cumulative.len();
    if m == 1 {
        return vec![1.0];
    }
    let rate = (8.0 * (m as f64).ln() / t as f64).sqrt() / scale;
    let top = cumulative.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = cumulative.iter().map(|c| (rate * (c - top)).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn frequency_weights(active: &[usize], t: usize) -> Vec<f64> {
    active.iter().map(|&c| c as f64 / t as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_lie_in_simplex() {
        let w = hedge_weights(&[1.0, -3.0, 0.5], 10, 2.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&v| v >= 0.0));
        assert!(w[0] > w[2] && w[2] > w[1]);
        let f = frequency_weights(&[3, 1], 4);
        assert_eq!(f, vec![0.75, 0.25]);
    }

    #[test]
    fn budget_formula() {
        assert_eq!(default_budget(0.1), 5000);
        assert_eq!(default_budget(0.3), 50 * 12);
    }
}
