//! Inter-cluster-aware regularization of the distributed MMSE precoders.
//!
//! With the eigendecomposition `B^H H^H H B = U diag(lambda) U^H` and the
//! leakage diagonal `sigma_ii = [U^H B^H Sigma B U]_ii`, the regularization
//! factor minimizing the cluster's error trace solves
//!
//! ```text
//! sum_i lambda_i / (lambda_i + gamma)^3 * (gamma - sigma_ii - k/P_m) = 0,
//! ```
//!
//! whose root lies in `[k/P_m, k/P_m + max sigma_ii]`. The precoder/receiver
//! scaling is `t_m = P_m / sum_i lambda_i / (lambda_i + gamma)^2`.

use crate::error::{Error, Result};
use crate::linalg::trace_re;
use crate::CMat;

/// Negative roundoff on `sigma` below this magnitude is clipped to zero.
const SIGMA_CLIP: f64 = 1e-9;

/// Eigenvalues, leakage diagonal, and cluster constants for one gateway.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationInputs {
    /// Eigenvalues of `B^H H^H H B`, descending, at least one positive.
    pub lambda: Vec<f64>,
    /// Leakage diagonal entries, non-negative, one per eigenvalue.
    pub sigma: Vec<f64>,
    /// Users per cluster `k`.
    pub users_per_cluster: usize,
    /// Cluster power budget `P_m`.
    pub cluster_power: f64,
}

impl RegularizationInputs {
    /// Validate and normalize the inputs. Tiny negative `sigma` roundoff is
    /// clipped to zero; anything worse is rejected.
    pub fn new(lambda: Vec<f64>, sigma: Vec<f64>, k: usize, p_m: f64) -> Result<Self> {
        if lambda.is_empty() || lambda.len() != k {
            return Err(Error::Config(format!(
                "expected {k} eigenvalues, got {}",
                lambda.len()
            )));
        }
        if sigma.len() != lambda.len() {
            return Err(Error::Config("lambda and sigma length mismatch".into()));
        }
        if !(p_m > 0.0) {
            return Err(Error::Config("cluster power must be positive".into()));
        }
        if lambda.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Config("eigenvalues must be descending".into()));
        }
        if lambda.iter().any(|&l| l < 0.0 || !l.is_finite()) {
            return Err(Error::Config("eigenvalues must be finite and non-negative".into()));
        }
        if !lambda.iter().any(|&l| l > 0.0) {
            return Err(Error::Config("at least one eigenvalue must be positive".into()));
        }
        let mut sigma = sigma;
        for s in sigma.iter_mut() {
            if *s < 0.0 && *s > -SIGMA_CLIP {
                *s = 0.0;
            }
            if *s < 0.0 || !s.is_finite() {
                return Err(Error::Config("sigma entries must be finite and non-negative".into()));
            }
        }
        Ok(RegularizationInputs {
            lambda,
            sigma,
            users_per_cluster: k,
            cluster_power: p_m,
        })
    }
}

/// Diagonal of `U^H B^H Sigma B U`, clipped at zero from below.
///
/// `U` must be unitary within `1e-10`.
pub fn sigma_diagonal(u: &CMat, b: &CMat, sigma: &CMat) -> Result<Vec<f64>> {
    let k = u.nrows();
    let orth = (u.adjoint() * u - CMat::identity(k, k)).norm();
    if orth > 1e-10 {
        return Err(Error::Numerical(format!(
            "sigma_diagonal: U is not unitary (deviation {orth:.3e})"
        )));
    }
    let inner = u.adjoint() * b.adjoint() * sigma * b * u;
    Ok((0..k).map(|i| inner[(i, i)].re.max(0.0)).collect())
}

/// Root of the regularization equation, found by bisection on
/// `[k/P_m, k/P_m + max sigma_ii]`.
///
/// When every `sigma_ii` equals a common value `s` the root is returned
/// exactly as `k/P_m + s`.
pub fn solve_gamma(inp: &RegularizationInputs) -> f64 {
    let base = inp.users_per_cluster as f64 / inp.cluster_power;
    let first = inp.sigma[0];
    if inp.sigma.iter().all(|&s| s == first) {
        return base + first;
    }
    let max_sigma = inp.sigma.iter().cloned().fold(0.0, f64::max);
    let residual = |gamma: f64| -> f64 {
        inp.lambda
            .iter()
            .zip(&inp.sigma)
            .map(|(&l, &s)| {
                let d = l + gamma;
                l / (d * d * d) * (gamma - s - base)
            })
            .sum()
    };
    // residual(lo) <= 0 <= residual(hi) by the sign of (gamma - sigma - k/P).
    let mut lo = base;
    let mut hi = base + max_sigma;
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if residual(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scaling `t = P_m / sum_i lambda_i / (lambda_i + gamma)^2`.
///
/// Zero eigenvalues contribute nothing; all-zero eigenvalues are an error.
pub fn scaling_tm(lambda: &[f64], gamma: f64, p_m: f64) -> Result<f64> {
    let denom: f64 = lambda
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| {
            let d = l + gamma;
            l / (d * d)
        })
        .sum();
    if !(denom > 0.0) {
        return Err(Error::Numerical("zero channel: no positive eigenvalues".into()));
    }
    Ok(p_m / denom)
}

/// Closed-form approximation `gamma = k/P_m + trace(B^H Sigma B)/k`.
pub fn gamma_closed_form(b: &CMat, sigma_hat: &CMat, k: usize, p_m: f64) -> f64 {
    let projected = b.adjoint() * sigma_hat * b;
    k as f64 / p_m + trace_re(&projected).max(0.0) / k as f64
}

/// Scalar error objective whose minimizer the regularization root equation
/// characterizes:
///
/// ```text
/// J(gamma) = sum_i -2 lambda_i/(lambda_i+gamma)
///          + (lambda_i^2 + sigma_ii lambda_i + (k/P_m) lambda_i) / (lambda_i+gamma)^2
/// ```
fn objective(lambda: &[f64], sigma: &[f64], k_over_p: f64, gamma: f64) -> f64 {
    lambda
        .iter()
        .zip(sigma)
        .map(|(&l, &s)| {
            let d = l + gamma;
            -2.0 * l / d + (l * l + s * l + k_over_p * l) / (d * d)
        })
        .sum()
}

/// Brute-force oracle: minimize the error objective on a geometric grid
/// over `[k/(10 P_m), 10 (k/P_m + max sigma_ii)]` and return the best grid
/// point. Independent of [`solve_gamma`]'s root-finding path.
pub fn gamma_oracle_grid(
    h_mm: &CMat,
    b: &CMat,
    sigma: &CMat,
    k: usize,
    p_m: f64,
    grid_points: usize,
) -> Result<f64> {
    if grid_points < 100 {
        return Err(Error::Config("grid_points must be at least 100".into()));
    }
    let gram = b.adjoint() * (h_mm.adjoint() * h_mm) * b;
    let (lambda, u) = crate::linalg::hermitian_eigen(&gram);
    let lambda: Vec<f64> = lambda.into_iter().map(|l| l.max(0.0)).collect();
    let sig = sigma_diagonal(&u, b, sigma)?;
    let k_over_p = k as f64 / p_m;
    let max_sigma = sig.iter().cloned().fold(0.0, f64::max);
    let lo = k_over_p / 10.0;
    let hi = 10.0 * (k_over_p + max_sigma);
    let ratio = (hi / lo).powf(1.0 / (grid_points - 1) as f64);
    let mut best_gamma = lo;
    let mut best_val = f64::INFINITY;
    let mut gamma = lo;
    for _ in 0..grid_points {
        let val = objective(&lambda, &sig, k_over_p, gamma);
        if val < best_val {
            best_val = val;
            best_gamma = gamma;
        }
        gamma *= ratio;
    }
    Ok(best_gamma)
}
