//! On-ground beamforming reference solver.
//!
//! With every coefficient applied on the ground, each gateway optimizes the
//! joint matrix `F_m = B_m T_m` directly. The sum MSE is minimized by
//! cyclic descent: with receiver gains fixed, each `F_m` solves a least
//! squares problem with a quadratic power constraint (a Lagrange multiplier
//! found by bisection); with precoders fixed, the diagonal receiver gains
//! have a closed form. Cost descent is guaranteed at every half-step.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitize, RANK_TOL};
use crate::metrics;
use crate::scenario::ChannelRealization;
use crate::{C64, CMat};

/// Feasibility slack for accepting the unconstrained solution.
const FEAS_TOL: f64 = 1e-12;
/// Internal bisection target on `|phi(nu) - P|`, relative to `P`. Tighter
/// than the contract (`1e-9 P`) so consecutive sweeps cannot climb.
const PHI_TOL: f64 = 1e-12;
/// Acceptance threshold on `|phi(nu) - P|`, relative to `P`.
const PHI_ACCEPT: f64 = 1e-9;
const MAX_BISECT: usize = 200;

/// State of the alternating minimization.
#[derive(Debug, Clone)]
pub struct OgbfState {
    /// Joint precoder `F_m` per cluster (`n x k`).
    pub f: Vec<CMat>,
    /// Diagonal receiver gains per cluster.
    pub d: Vec<Vec<f64>>,
    /// Lagrange multiplier of the last precoder update per cluster.
    pub nu: Vec<f64>,
    /// Sum MSE recorded after every half-step (precoder, then receiver).
    pub smse_history: Vec<f64>,
}

/// The per-cluster quadratic subproblem
/// `min trace{F^H A F - F^H X - X^H F}` subject to `trace{F F^H} <= P`.
#[derive(Debug, Clone)]
pub struct QuadraticSubproblem {
    /// Hermitian PSD `n x n` matrix `A_m`.
    pub a: CMat,
    /// `n x k` matrix `X_m`.
    pub x: CMat,
    /// Power budget `P_m`.
    pub power: f64,
}

/// Assemble `A_m = sum_p H_pm^H D_p^H D_p H_pm` and `X_m = H_mm^H D_m^H`
/// for cluster `m` given all receiver gains.
pub fn build_subproblem(
    ch: &ChannelRealization,
    d: &[Vec<f64>],
    m: usize,
    power: f64,
) -> QuadraticSubproblem {
    let mc = ch.cluster_count();
    let n = ch.feed_sets[m].len();
    let mut a = CMat::zeros(n, n);
    for p in 0..mc {
        let mut scaled = ch.cluster_block(p, m);
        for (row, &gain) in d[p].iter().enumerate() {
            for c in scaled.row_mut(row).iter_mut() {
                *c *= C64::new(gain, 0.0);
            }
        }
        a += scaled.adjoint() * scaled;
    }
    hermitize(&mut a);
    let h_mm = ch.cluster_block(m, m);
    let mut x = h_mm.adjoint();
    for (col, &gain) in d[m].iter().enumerate() {
        for c in x.column_mut(col).iter_mut() {
            *c *= C64::new(gain, 0.0);
        }
    }
    QuadraticSubproblem { a, x, power }
}

/// Power used by the constrained solution,
/// `phi(nu) = sum_i ||x_i||^2 / (gamma_i + nu)^2`, with `x_i^H` the rows of
/// `U^H X`. Strictly decreasing in `nu` wherever positive; returns infinity
/// when a zero eigenvalue meets a nonzero row at `nu = 0`.
pub fn phi(nu: f64, eigvals: &[f64], xt: &CMat) -> f64 {
    let mut acc = 0.0;
    for (i, &g) in eigvals.iter().enumerate() {
        let num: f64 = xt.row(i).iter().map(|c| c.norm_sqr()).sum();
        if num == 0.0 {
            continue;
        }
        let d = g + nu;
        if d <= 0.0 {
            return f64::INFINITY;
        }
        acc += num / (d * d);
    }
    acc
}

/// Solve the quadratic subproblem.
///
/// Returns `nu = 0` with the (pseudo-inverse) unconstrained solution when it
/// is feasible; otherwise bisects `phi(nu) = P` and returns
/// `F = U (Gamma + nu I)^{-1} U^H X`.
pub fn find_multiplier(sub: &QuadraticSubproblem) -> Result<(f64, CMat)> {
    let n = sub.a.nrows();
    let (raw_vals, u) = hermitian_eigen(&sub.a);
    let max_val = raw_vals.first().copied().unwrap_or(0.0).max(0.0);
    // Eigenvalues below the rank threshold are treated as exactly zero.
    let vals: Vec<f64> = raw_vals
        .iter()
        .map(|&v| if v > RANK_TOL * max_val { v } else { 0.0 })
        .collect();
    let xt = u.adjoint() * &sub.x;

    // Unconstrained (pseudo-inverse) candidate. It only exists when X has
    // no mass on A's null space; otherwise the objective keeps improving
    // along null directions and the power constraint must bind.
    let mut ft = xt.clone();
    let mut null_mass = 0.0;
    let mut total_mass = 0.0;
    for i in 0..n {
        let row_mass: f64 = xt.row(i).iter().map(|c| c.norm_sqr()).sum();
        total_mass += row_mass;
        if vals[i] == 0.0 {
            null_mass += row_mass;
        }
        let scale = if vals[i] > 0.0 { 1.0 / vals[i] } else { 0.0 };
        for c in ft.row_mut(i).iter_mut() {
            *c *= C64::new(scale, 0.0);
        }
    }
    let unconstrained_power: f64 = ft.iter().map(|c| c.norm_sqr()).sum();
    if null_mass <= 1e-20 * total_mass && unconstrained_power <= sub.power * (1.0 + FEAS_TOL) {
        return Ok((0.0, &u * ft));
    }

    // Bracket the root of phi(nu) = P, doubling the upper end.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut grow = 0;
    while phi(hi, &vals, &xt) >= sub.power {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Numerical(format!(
                "multiplier bracket did not close: phi({hi:.3e}) >= {:.3e}",
                sub.power
            )));
        }
    }
    let mut nu = 0.5 * (lo + hi);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_BISECT {
        nu = 0.5 * (lo + hi);
        let value = phi(nu, &vals, &xt);
        residual = value - sub.power;
        if residual.abs() <= PHI_TOL * sub.power {
            break;
        }
        if value > sub.power {
            lo = nu;
        } else {
            hi = nu;
        }
    }
    if residual.abs() > PHI_ACCEPT * sub.power {
        return Err(Error::Numerical(format!(
            "multiplier bisection did not converge: bracket [{lo:.6e}, {hi:.6e}], |phi - P| = {:.3e}",
            residual.abs()
        )));
    }
    let mut ft = xt;
    for i in 0..n {
        let scale = 1.0 / (vals[i] + nu);
        for c in ft.row_mut(i).iter_mut() {
            *c *= C64::new(scale, 0.0);
        }
    }
    Ok((nu, &u * ft))
}

/// Closed-form receiver gains `d_j = Re([G_m]_jj) / [C_m]_jj` with
/// `C_m = I + sum_p H_mp F_p F_p^H H_mp^H` and `G_m = F_m^H H_mm^H`.
/// The denominator is bounded below by one.
pub fn update_receivers(ch: &ChannelRealization, f: &[CMat]) -> Vec<Vec<f64>> {
    let mc = ch.cluster_count();
    let k = ch.users_per_cluster();
    let mut out = Vec::with_capacity(mc);
    for m in 0..mc {
        let mut c_diag = vec![1.0f64; k];
        for p in 0..mc {
            let prop = ch.cluster_block(m, p) * &f[p];
            for j in 0..k {
                c_diag[j] += prop.row(j).iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
        }
        let g = f[m].adjoint() * ch.cluster_block(m, m).adjoint();
        out.push((0..k).map(|j| g[(j, j)].re / c_diag[j]).collect());
    }
    out
}

/// Alternating minimization over `{F_m}` and `{D_m}`, starting from unit
/// receiver gains. Stops when the relative SMSE decrease over one full
/// sweep falls below `tol` or after `max_iter` sweeps.
pub fn ogbf_alternating(
    ch: &ChannelRealization,
    cluster_power: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<OgbfState> {
    if !(tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    if max_iter == 0 {
        return Err(Error::Config("max_iter must be at least 1".into()));
    }
    let mc = ch.cluster_count();
    if cluster_power.len() != mc {
        return Err(Error::Config("one power budget per cluster required".into()));
    }
    let k = ch.users_per_cluster();
    let mut d: Vec<Vec<f64>> = vec![vec![1.0; k]; mc];
    let mut f: Vec<CMat> = ch
        .feed_sets
        .iter()
        .map(|set| CMat::zeros(set.len(), k))
        .collect();
    let mut nu = vec![0.0f64; mc];
    let mut history = Vec::new();
    let mut prev_sweep = f64::INFINITY;
    for _ in 0..max_iter {
        // Precoder half-step: the M subproblems are independent given D.
        for m in 0..mc {
            let sub = build_subproblem(ch, &d, m, cluster_power[m]);
            let (mult, fm) = find_multiplier(&sub)
                .map_err(|e| e.context(&format!("cluster {m}")))?;
            nu[m] = mult;
            f[m] = fm;
        }
        history.push(metrics::smse(ch, &f, &d).0);
        // Receiver half-step.
        d = update_receivers(ch, &f);
        let (total, _) = metrics::smse(ch, &f, &d);
        history.push(total);
        if prev_sweep.is_finite() {
            let decrease = (prev_sweep - total) / prev_sweep.abs().max(f64::MIN_POSITIVE);
            if decrease < tol {
                break;
            }
        }
        prev_sweep = total;
    }
    Ok(OgbfState {
        f,
        d,
        nu,
        smse_history: history,
    })
}

/// Closed-form single-gateway design with a common receiver scaling:
/// `F = sqrt(t) (H^H H + gamma I)^{-1} H^H` on the full channel, with
/// `gamma = K / P` and `t` fixing `trace(F F^H) = P`.
pub fn ogbf_single_gateway(ch: &ChannelRealization, power: f64) -> Result<CMat> {
    if !(power > 0.0) {
        return Err(Error::Config("power must be positive".into()));
    }
    let h = &ch.h_tilde;
    let users = h.nrows() as f64;
    let gamma = users / power;
    let mut gram = h.adjoint() * h;
    hermitize(&mut gram);
    let (raw_vals, u) = hermitian_eigen(&gram);
    let max_val = raw_vals.first().copied().unwrap_or(0.0).max(0.0);
    let vals: Vec<f64> = raw_vals
        .iter()
        .map(|&v| if v > RANK_TOL * max_val { v } else { 0.0 })
        .collect();
    let t = crate::regularization::scaling_tm(&vals, gamma, power)?;
    let mut xt = u.adjoint() * h.adjoint();
    for (i, &l) in vals.iter().enumerate() {
        let scale = if l > 0.0 || gamma > 0.0 { 1.0 / (l + gamma) } else { 0.0 };
        for c in xt.row_mut(i).iter_mut() {
            *c *= C64::new(scale, 0.0);
        }
    }
    Ok(u * xt * C64::new(t.sqrt(), 0.0))
}
