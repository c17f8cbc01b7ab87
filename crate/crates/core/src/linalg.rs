//! Complex linear-algebra helpers with deterministic conventions.
//!
//! Eigenvectors of a Hermitian matrix are only defined up to a unit-modulus
//! phase (and up to ordering). Every decomposition here applies the same
//! convention — eigenvalues sorted descending, each eigenvector scaled so
//! that its largest-magnitude component is real positive — so repeated runs
//! produce identical matrices.

use crate::{C64, CMat};

/// Relative threshold below which an eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Hermitian eigendecomposition `G = U diag(vals) U^H`.
///
/// Returns eigenvalues in descending order with the eigenvector columns
/// reordered and phase-fixed to match. The input must be Hermitian; only
/// roundoff-level asymmetry is tolerated.
pub fn hermitian_eigen(g: &CMat) -> (Vec<f64>, CMat) {
    assert_eq!(g.nrows(), g.ncols(), "hermitian_eigen: matrix must be square");
    let n = g.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let se = g.clone().symmetric_eigen();
    // Stable sort keeps the decomposition's order for equal eigenvalues.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        se.eigenvalues[b]
            .partial_cmp(&se.eigenvalues[a])
            .expect("hermitian_eigen: non-finite eigenvalue")
    });
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.column_mut(dst).copy_from(&se.eigenvectors.column(src));
    }
    phase_fix_columns(&mut vecs);
    (vals, vecs)
}

/// Scale each column by a unit-modulus factor so that its largest-magnitude
/// component (ties broken by lowest row index) becomes real positive.
pub fn phase_fix_columns(m: &mut CMat) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_mag = 0.0f64;
        for (i, c) in col.iter().enumerate() {
            let mag = c.norm_sqr();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        if best_mag > 0.0 {
            let pivot = col[best];
            let phase = pivot / C64::new(pivot.norm(), 0.0);
            let corr = phase.conj();
            for c in col.iter_mut() {
                *c *= corr;
            }
        }
    }
}

/// Replace `a` with its Hermitian part `(a + a^H)/2`.
pub fn hermitize(a: &mut CMat) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "hermitize: matrix must be square");
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * C64::new(0.5, 0.0);
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
}

/// Columns of `m` restricted to `indices`, in the given order.
pub fn select_columns(m: &CMat, indices: &[usize]) -> CMat {
    let mut out = CMat::zeros(m.nrows(), indices.len());
    for (dst, &src) in indices.iter().enumerate() {
        out.column_mut(dst).copy_from(&m.column(src));
    }
    out
}

/// `trace(m)` restricted to the real part (imaginary roundoff discarded).
pub fn trace_re(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.nrows().min(m.ncols()) {
        acc += m[(i, i)].re;
    }
    acc
}

/// Squared Frobenius norm.
pub fn frob_sqr(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum()
}

/// SplitMix64 step; the stable hash used everywhere seeds are derived.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of `(seed, stream, index)` used for sub-seed
/// derivation. Independent of platform, process, and execution order.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index)
}
