//! Independent certification of candidate solutions.
//!
//! Worst-case violations are recomputed from the instance data with their
//! own formulas: closed forms for LP and SDP, the trust-region solver for
//! QP, and sampling of the noise set for anything else.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::linalg::{frobenius_dot, serde_dense, square_side, symmetrize, unvectorize};
use crate::oracles::{Instance, RobustLpInstance, RobustQpInstance, RobustSdpInstance};
use crate::robust::{InfeasibilityCertificate, RobustProblem};
use crate::trustregion::{trs_max_on_ball, trs_min_on_ball, TrsProblem};
use crate::uncertainty::{sample_ball, sample_sphere, UncertaintySet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerificationMethod {
    ClosedForm,
    Trs,
    /// Values are lower bounds on the true worst case.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessCertificate {
    pub method: VerificationMethod,
    /// `max_{u in U} f_i(x, u)` per constraint.
    pub violations: Vec<f64>,
    #[serde(with = "serde_dense::vectors")]
    pub maximizers: Vec<DVector<f64>>,
    /// Absolute accuracy of `violations` for the exact methods; `None` when sampled.
    pub tolerance: Option<f64>,
    /// Number of noise samples per constraint when sampled.
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub passed: bool,
    pub threshold: f64,
    pub worst_violation: f64,
    pub worst_constraint: usize,
    /// Constraints whose worst case exceeds the threshold.
    pub offending: Vec<usize>,
}

fn check_point(x: &DVector<f64>, dim: usize) -> Result<()> {
    ensure_dim(dim, x.len())?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("candidate solution"))
    }
}

fn normalized_or_zero(v: DVector<f64>) -> DVector<f64> {
    let norm = v.norm();
    if norm > 0.0 {
        v / norm
    } else {
        v
    }
}

/// `a_i · x - b_i + ||P^T x||`, attained at `u = P^T x / ||P^T x||`.
pub fn worst_case_violation_lp(instance: &RobustLpInstance, x: &DVector<f64>) -> Result<RobustnessCertificate> {
    check_point(x, instance.dim())?;
    let p = instance.noise_shape();
    let spread_vec = DVector::from_fn(p.ncols(), |k, _| p.column(k).dot(x));
    let spread = spread_vec.norm();
    let maximizer = normalized_or_zero(spread_vec);
    let violations = instance
        .offsets()
        .iter()
        .enumerate()
        .map(|(i, b)| instance.nominal(i).dot(x) - b + spread)
        .collect();
    Ok(RobustnessCertificate {
        method: VerificationMethod::ClosedForm,
        violations,
        maximizers: vec![maximizer; instance.offsets().len()],
        tolerance: Some(0.0),
        samples: None,
    })
}

/// Worst case of each quadratic-in-noise constraint through the
/// trust-region solver, accurate to `eps`.
pub fn worst_case_violation_qp(
    instance: &RobustQpInstance,
    x: &DVector<f64>,
    eps: f64,
) -> Result<RobustnessCertificate> {
    check_point(x, instance.dim())?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "verification accuracy must be positive, got {eps}"
        )));
    }
    let ys: Vec<DVector<f64>> = instance.noise_matrices().iter().map(|pk| pk * x).collect();
    let y = DMatrix::from_columns(&ys);
    let gram = y.transpose() * &y;
    let mut violations = Vec::new();
    let mut maximizers = Vec::new();
    for i in 0..instance.num_constraints() {
        let (a, b, c) = instance.nominal(i);
        let y0 = a * x;
        let cross = y.transpose() * &y0;
        let constant = y0.dot(&y0) - b.dot(x) - c;
        let tolerance = eps.min(1e-9 * (1.0 + gram.norm() + cross.norm()));
        let sol = trs_max_on_ball(&TrsProblem::new(gram.clone(), cross, tolerance)?)?;
        violations.push(sol.value + constant);
        maximizers.push(sol.point);
    }
    Ok(RobustnessCertificate {
        method: VerificationMethod::Trs,
        violations,
        maximizers,
        tolerance: Some(eps),
        samples: None,
    })
}

/// `A_i • X - b_i + ||(P_1 • X, ..., P_K • X)||` for `X` flattened column-major.
pub fn worst_case_violation_sdp(instance: &RobustSdpInstance, x: &DVector<f64>) -> Result<RobustnessCertificate> {
    let n = instance.side();
    if square_side(x.len()) != Some(n) {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: x.len(),
        });
    }
    check_point(x, n * n)?;
    let matrix = unvectorize(x, n);
    let spread_vec = DVector::from_iterator(
        instance.noise_dim(),
        instance.noise_matrices().iter().map(|pk| frobenius_dot(pk, &matrix)),
    );
    let spread = spread_vec.norm();
    let maximizer = normalized_or_zero(spread_vec);
    let m = instance.num_constraints();
    let violations = (0..m)
        .map(|i| {
            let (a, b) = instance.nominal(i);
            frobenius_dot(a, &matrix) - b + spread
        })
        .collect();
    Ok(RobustnessCertificate {
        method: VerificationMethod::ClosedForm,
        violations,
        maximizers: vec![maximizer; m],
        tolerance: Some(0.0),
        samples: None,
    })
}

/// Largest `f_i(x, u)` over the center, `count / 2` sphere samples and
/// `count - count / 2` ball samples of each noise set. A lower bound only.
pub fn worst_case_violation_sampled<P: RobustProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    count: usize,
    seed: u64,
) -> Result<RobustnessCertificate> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "sampled verification needs at least one sample".into(),
        ));
    }
    check_point(x, problem.decision_dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    let mut maximizers = Vec::new();
    for i in 0..problem.num_constraints() {
        let set = problem.noise_set(i);
        let mut best_u = DVector::zeros(set.dim());
        let mut best = problem.evaluate(i, x, &best_u);
        for s in 0..count {
            let u = if s < count / 2 {
                sample_sphere(set, &mut rng)
            } else {
                sample_ball(set, &mut rng)
            };
            let value = problem.evaluate(i, x, &u);
            if value > best {
                best = value;
                best_u = u;
            }
        }
        violations.push(best);
        maximizers.push(best_u);
    }
    Ok(RobustnessCertificate {
        method: VerificationMethod::Sampled,
        violations,
        maximizers,
        tolerance: None,
        samples: Some(count),
    })
}

/// Exact certificate for any supported family.
pub fn certify(instance: &Instance, x: &DVector<f64>, eps: f64) -> Result<RobustnessCertificate> {
    match instance {
        Instance::Lp(i) => worst_case_violation_lp(i, x),
        Instance::Qp(i) => worst_case_violation_qp(i, x, eps),
        Instance::Sdp(i) => worst_case_violation_sdp(i, x),
    }
}

/// Passes iff every worst-case violation is at most `threshold`.
pub fn check_epsilon_robust(certificate: &RobustnessCertificate, threshold: f64) -> Result<RobustnessReport> {
    if certificate.violations.is_empty() {
        return Err(Error::InvalidArgument("certificate has no constraints".into()));
    }
    if certificate.violations.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("certificate violations"));
    }
    let (worst_constraint, worst_violation) =
        certificate
            .violations
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |(bi, bv), (i, v)| if v > bv { (i, v) } else { (bi, bv) },
            );
    let offending: Vec<usize> = certificate
        .violations
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(i, _)| i)
        .collect();
    Ok(RobustnessReport {
        passed: offending.is_empty(),
        threshold,
        worst_violation,
        worst_constraint,
        offending,
    })
}

/// Recomputes `min_{x in D} sum_i w_i f_i(x, u_i)` for the weights and
/// noise stored in an infeasibility certificate. A positive result proves
/// the nominal problem at that noise, and hence the robust problem,
/// infeasible.
pub fn recompute_infeasibility_bound(instance: &Instance, certificate: &InfeasibilityCertificate) -> Result<f64> {
    let problem = instance.problem();
    let m = problem.num_constraints();
    ensure_dim(m, certificate.weights.len())?;
    ensure_dim(m, certificate.noise.len())?;
    if certificate.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument(
            "certificate weights must be finite and non-negative".into(),
        ));
    }
    if certificate.weights.iter().all(|&w| w == 0.0) {
        return Err(Error::InvalidArgument("certificate weights are all zero".into()));
    }
    for (i, u) in certificate.noise.iter().enumerate() {
        let set = problem.noise_set(i);
        ensure_dim(set.dim(), u.len())?;
        if !set.contains(u) {
            return Err(Error::InvalidArgument(format!(
                "certificate noise {i} lies outside the uncertainty set"
            )));
        }
    }
    let w = &certificate.weights;
    let noise = &certificate.noise;
    match instance {
        Instance::Lp(inst) => {
            let p = inst.noise_shape();
            let mut combined = DVector::zeros(inst.dim());
            let mut offset = 0.0;
            for i in 0..m {
                combined += (inst.nominal(i) + p * &noise[i]) * w[i];
                offset += w[i] * inst.offsets()[i];
            }
            Ok(-combined.norm() - offset)
        }
        Instance::Qp(inst) => {
            let n = inst.dim();
            let mut hessian = DMatrix::zeros(n, n);
            let mut linear = DVector::zeros(n);
            let mut constant = 0.0;
            for i in 0..m {
                let (a, b, c) = inst.nominal(i);
                let mut mat = a.clone();
                for (uk, pk) in noise[i].iter().zip(inst.noise_matrices()) {
                    mat += pk * *uk;
                }
                hessian += mat.transpose() * &mat * w[i];
                linear += b * w[i];
                constant += w[i] * c;
            }
            let tolerance = 1e-10 * (1.0 + hessian.norm() + linear.norm());
            let sol = trs_min_on_ball(&TrsProblem::new(hessian, linear * -0.5, tolerance)?)?;
            Ok(sol.dual_bound - constant)
        }
        Instance::Sdp(inst) => {
            let n = inst.side();
            let mut combined = DMatrix::zeros(n, n);
            let mut offset = 0.0;
            for i in 0..m {
                let (a, b) = inst.nominal(i);
                let mut mat = a.clone();
                for (uk, pk) in noise[i].iter().zip(inst.noise_matrices()) {
                    mat += pk * *uk;
                }
                combined += mat * w[i];
                offset += w[i] * b;
            }
            let eig = SymmetricEigen::new(symmetrize(&combined));
            let negative = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| l * l).sum::<f64>();
            Ok(-negative.sqrt() - offset)
        }
    }
}
