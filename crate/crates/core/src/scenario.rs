//! System geometry, synthetic channel model, and channel statistics.
//!
//! Beams sit on a hexagonal grid and are grouped row-major into `M`
//! contiguous clusters of `k` beams; feeds sit on a denser hexagonal grid
//! over the same footprint. Each user is drawn uniformly inside its beam's
//! disc, and the user-link entry for a user at planar distance `d` from a
//! feed is
//!
//! ```text
//! h = g0 * exp(-alpha d^2) * exp(i (kappa d + jitter)),
//! ```
//!
//! a Gaussian gain roll-off with a distance-proportional carrier phase
//! (`kappa` fixed at one turn per beam radius) and a bounded random phase
//! perturbation per entry per trial. Nearby feeds therefore stay mutually
//! coherent under expectation while distant ones decohere, which gives the
//! expected channel Gramians the off-diagonal structure a real feed array
//! exhibits; fully independent phases would make every expected Gramian
//! diagonal and reduce statistics-based beamforming to feed selection.
//! Everything is a pure function of the scenario and a seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{derive_seed, hermitize};
use crate::{C64, CMat};

/// Seed stream tags so gramian draws never collide with trial draws.
const GRAMIAN_STREAM: u64 = 1;

/// Carrier phase advance per beam radius of distance. A quarter turn keeps
/// adjacent feeds mutually coherent under user jitter while the phase still
/// sweeps a few turns across the footprint.
const PHASE_TURNS_PER_RADIUS: f64 = 0.25;

/// Half-width of the per-entry random phase, as a fraction of pi.
const PHASE_JITTER: f64 = 0.25;

/// Peak amplitude and quadratic-exponent roll-off of the beam gain model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainParams {
    pub g0: f64,
    pub alpha: f64,
}

/// Scenario configuration file contents (a single JSON object).
///
/// Unknown keys are rejected. `P` defaults to the total user count,
/// `alpha` to the value putting the beam edge 3 dB (in power) below peak.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "N")]
    pub feed_count: usize,
    #[serde(rename = "M")]
    pub cluster_count: usize,
    pub k: usize,
    pub n: usize,
    #[serde(default)]
    pub k_bar: usize,
    #[serde(rename = "P", default)]
    pub total_power: Option<f64>,
    #[serde(default = "default_beam_radius")]
    pub beam_radius: f64,
    #[serde(default = "default_g0")]
    pub g0: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_gramian_samples")]
    pub gramian_samples: usize,
    #[serde(default = "default_gramian_seed")]
    pub gramian_seed: u64,
}

fn default_beam_radius() -> f64 {
    1.0
}

fn default_g0() -> f64 {
    1.0
}

fn default_gramian_samples() -> usize {
    500
}

fn default_gramian_seed() -> u64 {
    0x5EED_0000_0000_0001
}

impl ScenarioConfig {
    /// Minimal config with all optional fields at their defaults.
    pub fn new(feed_count: usize, cluster_count: usize, k: usize, n: usize) -> Self {
        ScenarioConfig {
            feed_count,
            cluster_count,
            k,
            n,
            k_bar: 0,
            total_power: None,
            beam_radius: default_beam_radius(),
            g0: default_g0(),
            alpha: None,
            gramian_samples: default_gramian_samples(),
            gramian_seed: default_gramian_seed(),
        }
    }
}

/// Static system dimensions, powers, geometry, and gain model.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Total feed count `N`.
    pub feed_count: usize,
    /// Gateway/cluster count `M`.
    pub cluster_count: usize,
    /// Users per cluster `k` (one per beam).
    pub users_per_cluster: usize,
    /// Feeds per cluster `n`, with `k <= n <= N`.
    pub feeds_per_cluster: usize,
    /// Total satellite power `P` (noise-normalized).
    pub total_power: f64,
    /// Per-cluster power `P_m`, summing to `P`.
    pub cluster_power: Vec<f64>,
    /// Off-cluster users protected by null steering, `k_bar <= n - k`.
    pub protected_users: usize,
    /// Beam-center coordinates, one per user, grouped row-major by cluster.
    pub beam_centers: Vec<[f64; 2]>,
    /// Radius of every beam disc.
    pub beam_radius: f64,
    /// Feed coordinates.
    pub feed_positions: Vec<[f64; 2]>,
    pub gain: GainParams,
    /// Sample count for expected-Gramian estimation.
    pub gramian_samples: usize,
    /// Seed for channel statistics, separate from trial seeds.
    pub gramian_seed: u64,
}

impl Scenario {
    /// Total user count `K = k * M`.
    pub fn total_users(&self) -> usize {
        self.users_per_cluster * self.cluster_count
    }

    /// User indices belonging to cluster `m`.
    pub fn cluster_users(&self, m: usize) -> std::ops::Range<usize> {
        m * self.users_per_cluster..(m + 1) * self.users_per_cluster
    }

    /// Centroid of cluster `m`'s beam centers.
    pub fn cluster_centroid(&self, m: usize) -> [f64; 2] {
        let users = self.cluster_users(m);
        let len = users.len() as f64;
        let (mut x, mut y) = (0.0, 0.0);
        for u in users {
            x += self.beam_centers[u][0];
            y += self.beam_centers[u][1];
        }
        [x / len, y / len]
    }
}

/// One draw of the user-link channel with the per-cluster feed assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Full `K x N` user-link channel.
    pub h_tilde: CMat,
    /// Feed index sets `S_m`, each of size `n`, sorted ascending. Sets may
    /// overlap across clusters.
    pub feed_sets: Vec<Vec<usize>>,
    /// Drawn user positions, one per user.
    pub user_positions: Vec<[f64; 2]>,
    pub trial_seed: u64,
}

impl ChannelRealization {
    pub fn cluster_count(&self) -> usize {
        self.feed_sets.len()
    }

    pub fn total_users(&self) -> usize {
        self.h_tilde.nrows()
    }

    pub fn users_per_cluster(&self) -> usize {
        self.total_users() / self.cluster_count()
    }

    /// Block `H_mp`: rows of cluster `m`'s users restricted to the columns
    /// of gateway `p`'s feed set.
    ///
    /// Panics if `m` or `p` is out of range.
    pub fn cluster_block(&self, m: usize, p: usize) -> CMat {
        let mc = self.cluster_count();
        assert!(m < mc && p < mc, "cluster_block: index out of range (m={m}, p={p}, M={mc})");
        let k = self.users_per_cluster();
        let set = &self.feed_sets[p];
        let mut out = CMat::zeros(k, set.len());
        for (row, u) in (m * k..(m + 1) * k).enumerate() {
            for (col, &j) in set.iter().enumerate() {
                out[(row, col)] = self.h_tilde[(u, j)];
            }
        }
        out
    }

    /// Single-gateway view: one cluster holding every user, with all `N`
    /// feeds available. Used by the on-ground single-gateway reference.
    pub fn single_gateway_view(&self) -> ChannelRealization {
        ChannelRealization {
            h_tilde: self.h_tilde.clone(),
            feed_sets: vec![(0..self.h_tilde.ncols()).collect()],
            user_positions: self.user_positions.clone(),
            trial_seed: self.trial_seed,
        }
    }
}

/// Sample-mean estimates of the expected channel Gramians.
#[derive(Debug, Clone)]
pub struct ExpectedGramians {
    /// `grams[m][p]` estimates `E[H_pm^H H_pm]`: the `n x n` Gramian of the
    /// channel from gateway `m`'s feeds to cluster `p`'s users.
    grams: Vec<Vec<CMat>>,
    pub sample_count: usize,
    pub seed: u64,
}

impl ExpectedGramians {
    /// Estimate of `E[H_pm^H H_pm]` (gateway `m`'s feeds, cluster `p`'s users).
    pub fn gram(&self, m: usize, p: usize) -> &CMat {
        &self.grams[m][p]
    }

    pub fn cluster_count(&self) -> usize {
        self.grams.len()
    }
}

/// Build the scenario geometry from a configuration record.
///
/// Beam centers are laid on a hexagonal grid and grouped row-major into `M`
/// contiguous clusters of `k`; feeds are laid on a denser hexagonal grid
/// covering the same footprint.
pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let (n_feeds, m, k, n) = (cfg.feed_count, cfg.cluster_count, cfg.k, cfg.n);
    if m == 0 || k == 0 || n == 0 || n_feeds == 0 {
        return Err(Error::Config("N, M, k, n must all be positive".into()));
    }
    if k > n {
        return Err(Error::Config(format!("k > n (k={k}, n={n})")));
    }
    if n > n_feeds {
        return Err(Error::Config(format!("n > N (n={n}, N={n_feeds})")));
    }
    if cfg.k_bar > n - k {
        return Err(Error::Config(format!(
            "k_bar > n - k (k_bar={}, n={n}, k={k})",
            cfg.k_bar
        )));
    }
    if !(cfg.beam_radius > 0.0) {
        return Err(Error::Config("beam_radius must be positive".into()));
    }
    if !(cfg.g0 > 0.0) {
        return Err(Error::Config("g0 must be positive".into()));
    }
    let total_users = k * m;
    let total_power = cfg.total_power.unwrap_or(total_users as f64);
    if !(total_power > 0.0) {
        return Err(Error::Config("P must be positive".into()));
    }
    let alpha = match cfg.alpha {
        Some(a) if a >= 0.0 => a,
        Some(_) => return Err(Error::Config("alpha must be non-negative".into())),
        // Power gain exp(-2 alpha R^2) = 1/2 at one beam radius.
        None => 0.5 * std::f64::consts::LN_2 / (cfg.beam_radius * cfg.beam_radius),
    };
    if cfg.gramian_samples == 0 {
        return Err(Error::Config("gramian_samples must be at least 1".into()));
    }

    let beam_centers = hex_grid(total_users, 3.0_f64.sqrt() * cfg.beam_radius);
    let feed_positions = feed_grid(n_feeds, &beam_centers, cfg.beam_radius);

    Ok(Scenario {
        feed_count: n_feeds,
        cluster_count: m,
        users_per_cluster: k,
        feeds_per_cluster: n,
        total_power,
        cluster_power: vec![total_power / m as f64; m],
        protected_users: cfg.k_bar,
        beam_centers,
        beam_radius: cfg.beam_radius,
        feed_positions,
        gain: GainParams { g0: cfg.g0, alpha },
        gramian_samples: cfg.gramian_samples,
        gramian_seed: cfg.gramian_seed,
    })
}

/// Hexagonal grid of `count` points with nearest-neighbor spacing `pitch`,
/// filled row-major in rows of about `sqrt(count)` columns.
fn hex_grid(count: usize, pitch: f64) -> Vec<[f64; 2]> {
    let cols = (count as f64).sqrt().ceil() as usize;
    let row_height = pitch * 3.0_f64.sqrt() / 2.0;
    (0..count)
        .map(|i| {
            let row = i / cols;
            let col = i % cols;
            let offset = if row % 2 == 1 { pitch / 2.0 } else { 0.0 };
            [col as f64 * pitch + offset, row as f64 * row_height]
        })
        .collect()
}

/// Denser hexagonal grid of `count` feeds covering the beam footprint
/// (bounding box of the beam centers expanded by one beam radius).
fn feed_grid(count: usize, beam_centers: &[[f64; 2]], beam_radius: f64) -> Vec<[f64; 2]> {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for c in beam_centers {
        x0 = x0.min(c[0]);
        y0 = y0.min(c[1]);
        x1 = x1.max(c[0]);
        y1 = y1.max(c[1]);
    }
    x0 -= beam_radius;
    y0 -= beam_radius;
    x1 += beam_radius;
    y1 += beam_radius;
    let cols = (count as f64).sqrt().ceil() as usize;
    let rows = count.div_ceil(cols);
    let dx = if cols > 1 { (x1 - x0) / (cols - 1) as f64 } else { 0.0 };
    let dy = if rows > 1 { (y1 - y0) / (rows - 1) as f64 } else { 0.0 };
    (0..count)
        .map(|i| {
            let row = i / cols;
            let col = i % cols;
            let offset = if row % 2 == 1 { dx / 2.0 } else { 0.0 };
            let x = if cols > 1 { x0 + col as f64 * dx + offset } else { (x0 + x1) / 2.0 };
            let y = if rows > 1 { y0 + row as f64 * dy } else { (y0 + y1) / 2.0 };
            [x, y]
        })
        .collect()
}

fn dist_sqr(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Expected power gain `|h_uj|^2` per (user, feed) pair with every user
/// pinned at its beam center. Input to [`select_feeds`].
pub fn beam_center_gain(sc: &Scenario) -> nalgebra::DMatrix<f64> {
    let users = sc.total_users();
    nalgebra::DMatrix::from_fn(users, sc.feed_count, |u, j| {
        let amp = sc.gain.g0
            * (-sc.gain.alpha * dist_sqr(sc.beam_centers[u], sc.feed_positions[j])).exp();
        amp * amp
    })
}

/// Select each cluster's `n` feeds by total mean gain over its users.
///
/// Feed `j`'s score for cluster `m` is the sum of `mean_gain[u][j]` over the
/// cluster's users; the `n` highest-scoring feeds win, ties broken by lower
/// index. Sets may overlap across clusters and are returned sorted.
pub fn select_feeds(sc: &Scenario, mean_gain: &nalgebra::DMatrix<f64>) -> Result<Vec<Vec<usize>>> {
    let n = sc.feeds_per_cluster;
    let mut sets = Vec::with_capacity(sc.cluster_count);
    for m in 0..sc.cluster_count {
        let scores: Vec<f64> = (0..sc.feed_count)
            .map(|j| sc.cluster_users(m).map(|u| mean_gain[(u, j)]).sum())
            .collect();
        let mut order: Vec<usize> = (0..sc.feed_count).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("select_feeds: non-finite score")
                .then(a.cmp(&b))
        });
        let mut set: Vec<usize> = order[..n].to_vec();
        if set.iter().any(|&j| scores[j] <= 0.0) {
            return Err(Error::Config(format!(
                "insufficient coverage: cluster {m} has fewer than {n} feeds with positive score"
            )));
        }
        set.sort_unstable();
        sets.push(set);
    }
    Ok(sets)
}

/// Draw one channel realization. A pure function of `(sc, trial_seed)`.
///
/// Each user is drawn uniformly inside its beam disc, then entry `(u, j)`
/// gets amplitude `g0 * exp(-alpha d^2)` and phase `kappa d + jitter` with
/// `d` the user-feed distance and the jitter independent per entry (see
/// the module docs).
pub fn sample_channel(sc: &Scenario, trial_seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let users = sc.total_users();
    let user_positions: Vec<[f64; 2]> = (0..users)
        .map(|u| {
            let r = sc.beam_radius * rng.random::<f64>().sqrt();
            let theta = std::f64::consts::TAU * rng.random::<f64>();
            [
                sc.beam_centers[u][0] + r * theta.cos(),
                sc.beam_centers[u][1] + r * theta.sin(),
            ]
        })
        .collect();
    let kappa = std::f64::consts::TAU * PHASE_TURNS_PER_RADIUS / sc.beam_radius;
    let mut h_tilde = CMat::zeros(users, sc.feed_count);
    for u in 0..users {
        for j in 0..sc.feed_count {
            let d_sqr = dist_sqr(user_positions[u], sc.feed_positions[j]);
            let amp = sc.gain.g0 * (-sc.gain.alpha * d_sqr).exp();
            let jitter = PHASE_JITTER * std::f64::consts::PI * (2.0 * rng.random::<f64>() - 1.0);
            let phase = kappa * d_sqr.sqrt() + jitter;
            h_tilde[(u, j)] = C64::new(amp * phase.cos(), amp * phase.sin());
        }
    }
    let feed_sets = select_feeds(sc, &beam_center_gain(sc))
        .expect("sample_channel: scenario passed validation but has no coverage");
    ChannelRealization {
        h_tilde,
        feed_sets,
        user_positions,
        trial_seed,
    }
}

/// Estimate `E[H_pm^H H_pm]` for every gateway pair by averaging over
/// `samples` independent channel draws seeded from `seed`.
pub fn estimate_expected_gramians(
    sc: &Scenario,
    samples: usize,
    seed: u64,
) -> Result<ExpectedGramians> {
    if samples == 0 {
        return Err(Error::Config("gramian sample count must be at least 1".into()));
    }
    let mc = sc.cluster_count;
    let n = sc.feeds_per_cluster;
    let mut acc = vec![vec![CMat::zeros(n, n); mc]; mc];
    for i in 0..samples {
        let ch = sample_channel(sc, derive_seed(seed, GRAMIAN_STREAM, i as u64));
        for m in 0..mc {
            for p in 0..mc {
                let block = ch.cluster_block(p, m);
                acc[m][p] += block.adjoint() * block;
            }
        }
    }
    let scale = C64::new(1.0 / samples as f64, 0.0);
    for row in acc.iter_mut() {
        for g in row.iter_mut() {
            *g *= scale;
            hermitize(g);
        }
    }
    Ok(ExpectedGramians {
        grams: acc,
        sample_count: samples,
        seed,
    })
}
