//! On-board beamforming network designs and distributed gateway precoders.
//!
//! All beamforming matrices are semi-unitary (`B^H B = I_k`); any invertible
//! factor removed during orthonormalization is absorbed by the precoder.
//! Four designs are provided:
//!
//! - **adaptive**: the `k` leading eigenvectors of `H_mm^H H_mm`, which
//!   attain the Poincare separation lower bound on the noise-enhancement
//!   trace `trace{(B^H H^H H B)^{-1}}`;
//! - **nulling**: the adaptive design restricted to the null space of the
//!   protected users' channel, via null-space projection;
//! - **coarse**: the adaptive design applied to the expected Gramian
//!   `E[H_mm^H H_mm]`, fixed across channel realizations;
//! - **prefixed**: an externally supplied matrix, orthonormalized.
//!
//! The gateway precoder for a fixed `B` is the regularized inversion
//! `T = sqrt(t) (B^H H^H H B + gamma I)^{-1} B^H H^H` with the power
//! constraint active.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitize, RANK_TOL};
use crate::regularization::scaling_tm;
use crate::scenario::{ChannelRealization, ExpectedGramians};
use crate::{C64, CMat};

/// Which design produced a beamformer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BfnMode {
    Adaptive,
    Nulling,
    Coarse,
    Prefixed,
}

/// One cluster's beamformer along with the null-steering byproducts.
#[derive(Debug, Clone)]
pub struct ClusterBeamformer {
    /// Semi-unitary `n x k` beamforming matrix.
    pub b: CMat,
    pub mode: BfnMode,
    /// Null-space basis of the protected channel (`n x (n - k_bar)`).
    pub null_basis: Option<CMat>,
    /// Inner beamformer on the projected channel (`(n - k_bar) x k`).
    pub inner: Option<CMat>,
    /// Protected users' channel rows (`k_bar x n`).
    pub protected_channel: Option<CMat>,
    /// Projected channel `Q = H_mm V0` (`k x (n - k_bar)`).
    pub projected_channel: Option<CMat>,
}

impl ClusterBeamformer {
    fn plain(b: CMat, mode: BfnMode) -> Self {
        ClusterBeamformer {
            b,
            mode,
            null_basis: None,
            inner: None,
            protected_channel: None,
            projected_channel: None,
        }
    }
}

/// Per-cluster beamformers of one scheme.
#[derive(Debug, Clone)]
pub struct BeamformerSet {
    pub per_cluster: Vec<ClusterBeamformer>,
}

/// Adaptive design: the `k` leading eigenvectors of `H_mm^H H_mm`.
///
/// Requires the intra-cluster channel to have rank `k`.
pub fn bfn_adaptive(h_mm: &CMat) -> Result<CMat> {
    let k = h_mm.nrows();
    let mut gram = h_mm.adjoint() * h_mm;
    hermitize(&mut gram);
    let (vals, vecs) = hermitian_eigen(&gram);
    if vals.is_empty() || vals[k - 1] <= RANK_TOL * vals[0].max(0.0) || vals[0] <= 0.0 {
        return Err(Error::Numerical("intra-cluster channel rank-deficient".into()));
    }
    Ok(vecs.columns(0, k).into_owned())
}

/// Null-steering design: project onto the null space of the protected
/// users' channel `h_bar`, then apply the adaptive design to the projected
/// channel `Q = H_mm V0`.
pub fn bfn_nulling(h_mm: &CMat, h_bar: &CMat) -> Result<ClusterBeamformer> {
    let k = h_mm.nrows();
    let n = h_mm.ncols();
    let k_bar = h_bar.nrows();
    if k_bar > n - k {
        return Err(Error::Config(format!(
            "null steering infeasible: k_bar > n - k (k_bar={k_bar}, n={n}, k={k})"
        )));
    }
    if k_bar == 0 {
        let b = bfn_adaptive(h_mm)?;
        return Ok(ClusterBeamformer {
            null_basis: Some(CMat::identity(n, n)),
            inner: Some(b.clone()),
            protected_channel: Some(h_bar.clone()),
            projected_channel: Some(h_mm.clone()),
            ..ClusterBeamformer::plain(b, BfnMode::Nulling)
        });
    }
    if h_bar.ncols() != n {
        return Err(Error::Config("protected channel column count mismatch".into()));
    }
    // Eigenvectors of h_bar^H h_bar beyond the first k_bar span the null
    // space of h_bar.
    let mut gram = h_bar.adjoint() * h_bar;
    hermitize(&mut gram);
    let (vals, vecs) = hermitian_eigen(&gram);
    if vals[k_bar - 1] <= RANK_TOL * vals[0].max(0.0) || vals[0] <= 0.0 {
        return Err(Error::Numerical("protected-user channel rank-deficient".into()));
    }
    let null_basis = vecs.columns(k_bar, n - k_bar).into_owned();
    let projected = h_mm * &null_basis;
    let inner = bfn_adaptive(&projected)
        .map_err(|e| e.context("null-projected channel"))?;
    let b = &null_basis * &inner;
    Ok(ClusterBeamformer {
        b,
        mode: BfnMode::Nulling,
        null_basis: Some(null_basis),
        inner: Some(inner),
        protected_channel: Some(h_bar.clone()),
        projected_channel: Some(projected),
    })
}

/// Coarse design: the `k` leading eigenvectors of an expected Gramian.
/// Fixed across all realizations of an experiment.
pub fn bfn_coarse(g_expected: &CMat, k: usize) -> Result<CMat> {
    let n = g_expected.nrows();
    if k == 0 || k > n {
        return Err(Error::Config(format!("invalid beam count k={k} for n={n}")));
    }
    let (vals, vecs) = hermitian_eigen(g_expected);
    if vals[k - 1] <= RANK_TOL * vals[0].max(0.0) || vals[0] <= 0.0 {
        return Err(Error::Numerical("expected Gramian rank-deficient".into()));
    }
    Ok(vecs.columns(0, k).into_owned())
}

/// Orthonormalize the columns of a given full-rank matrix (thin QR); the
/// discarded triangular factor is absorbed by the precoder.
pub fn bfn_prefixed(b_given: &CMat) -> Result<CMat> {
    let k = b_given.ncols();
    if b_given.nrows() < k {
        return Err(Error::Config("prefixed beamformer has more columns than rows".into()));
    }
    let qr = b_given.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    for i in 0..k {
        let d = r[(i, i)];
        if d.norm() <= RANK_TOL.sqrt() * max_diag || max_diag == 0.0 {
            return Err(Error::Numerical("prefixed beamformer rank-deficient".into()));
        }
        // Make the implicit triangular factor's diagonal real positive so
        // a semi-unitary input round-trips unchanged.
        let phase = d / C64::new(d.norm(), 0.0);
        for c in q.column_mut(i).iter_mut() {
            *c *= phase;
        }
    }
    Ok(q)
}

/// Distributed MMSE precoder for a fixed beamformer:
/// `T = sqrt(t) (B^H H^H H B + gamma I)^{-1} B^H H^H`, with `t` from the
/// closed form making `trace(T T^H) = P_m`.
pub fn precoder_tm(b: &CMat, h_mm: &CMat, gamma: f64, p_m: f64) -> Result<(CMat, f64)> {
    let k = b.ncols();
    if gamma < 0.0 {
        return Err(Error::Config("gamma must be non-negative".into()));
    }
    if !(p_m > 0.0) {
        return Err(Error::Config("cluster power must be positive".into()));
    }
    let mut gram = b.adjoint() * (h_mm.adjoint() * h_mm) * b;
    hermitize(&mut gram);
    let (vals, _) = hermitian_eigen(&gram);
    let lambda: Vec<f64> = vals
        .iter()
        .map(|&l| if l > RANK_TOL * vals[0].max(0.0) { l } else { 0.0 })
        .collect();
    if gamma == 0.0 && lambda.contains(&0.0) {
        return Err(Error::Numerical(
            "zero-forcing precoder requires a full-rank reduced Gramian".into(),
        ));
    }
    let t = scaling_tm(&lambda, gamma, p_m)?;
    let mut shifted = gram;
    for i in 0..k {
        shifted[(i, i)] += C64::new(gamma, 0.0);
    }
    let rhs = b.adjoint() * h_mm.adjoint();
    let solved = shifted
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("regularized Gramian is singular".into()))?;
    Ok((solved * C64::new(t.sqrt(), 0.0), t))
}

/// Aggregate expected leakage Gramian
/// `Sigma_hat_m = sum_{p != m} E[H_pm^H H_pm]` with unit weights.
pub fn build_sigma_hat(gramians: &ExpectedGramians, m: usize) -> CMat {
    let mc = gramians.cluster_count();
    let n = gramians.gram(m, m).nrows();
    let mut sigma = CMat::zeros(n, n);
    for p in 0..mc {
        if p != m {
            sigma += gramians.gram(m, p);
        }
    }
    hermitize(&mut sigma);
    sigma
}

/// Instantaneous leakage Gramian `Sigma_m = sum_{p != m} H_pm^H H_pm` from
/// the current realization.
pub fn build_sigma_instantaneous(ch: &ChannelRealization, m: usize) -> CMat {
    let mc = ch.cluster_count();
    let n = ch.feed_sets[m].len();
    let mut sigma = CMat::zeros(n, n);
    for p in 0..mc {
        if p != m {
            let block = ch.cluster_block(p, m);
            sigma += block.adjoint() * block;
        }
    }
    hermitize(&mut sigma);
    sigma
}

/// Build rank-`k` semi-unitary matrices deterministically from a seed;
/// used as competitors in optimality checks and as generic test inputs.
pub fn random_semi_unitary(rng: &mut impl rand::Rng, n: usize, k: usize) -> CMat {
    loop {
        let raw = CMat::from_fn(n, k, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        if let Ok(q) = bfn_prefixed(&raw) {
            return q;
        }
    }
}

#[allow(dead_code)]
fn semi_unitary_deviation(b: &CMat) -> f64 {
    let k = b.ncols();
    (b.adjoint() * b - CMat::identity(k, k)).norm()
}
