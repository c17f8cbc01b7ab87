//! Analytic performance evaluation.
//!
//! The sum MSE is evaluated in closed form (expectation over unit-variance
//! symbols and noise for a fixed channel); SINR is computed from the `K x K`
//! effective symbol-to-user matrix. dB values use `10 log10`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{derive_seed, select_columns, trace_re};
use crate::scenario::{sample_channel, ChannelRealization, Scenario};
use crate::{C64, CMat};

/// Seed stream tag for power-calibration draws.
const CALIBRATION_STREAM: u64 = 2;

/// Result of one Monte Carlo trial.
///
/// `t` and `gamma` are per-cluster and empty for the on-ground schemes,
/// which have no common scaling or regularization factor.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub scheme: String,
    pub regularizer: String,
    pub snr_db: f64,
    pub trial: usize,
    /// Total SMSE; always the sum of `trace_em` in accumulation order.
    pub smse: f64,
    /// Per-cluster error traces.
    pub trace_em: Vec<f64>,
    /// Per-user SINR in dB.
    pub sinr_db: Vec<f64>,
    /// Per-cluster scaling `t_m`.
    pub t: Vec<f64>,
    /// Per-cluster regularization factor.
    pub gamma: Vec<f64>,
    pub seed: u64,
}

/// Closed-form SMSE and per-cluster error traces for joint precoders `f`
/// and diagonal receiver gains `d`.
pub fn smse(ch: &ChannelRealization, f: &[CMat], d: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let mc = ch.cluster_count();
    let k = ch.users_per_cluster();
    let mut per_cluster = Vec::with_capacity(mc);
    for m in 0..mc {
        // trace{I - D H F - (D H F)^H + F^H A F + D D^H} with
        // A = sum_p H_pm^H D_p^2 H_pm.
        let h_mm = ch.cluster_block(m, m);
        let hf = &h_mm * &f[m];
        let mut cross = 0.0;
        for j in 0..k {
            cross += d[m][j] * hf[(j, j)].re;
        }
        let mut quad = 0.0;
        for p in 0..mc {
            let mut prop = ch.cluster_block(p, m) * &f[m];
            for (row, &gain) in d[p].iter().enumerate() {
                for c in prop.row_mut(row).iter_mut() {
                    *c *= C64::new(gain, 0.0);
                }
            }
            quad += prop.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        let gains: f64 = d[m].iter().map(|&g| g * g).sum();
        per_cluster.push(k as f64 - 2.0 * cross + quad + gains);
    }
    (per_cluster.iter().sum(), per_cluster)
}

/// Effective `K x K` symbol-to-user matrix: column block `m` is
/// `H_tilde S_m F_m`, so entry `(u, v)` is the gain from symbol `v` to
/// user `u`.
pub fn effective_matrix(ch: &ChannelRealization, f: &[CMat]) -> CMat {
    let users = ch.total_users();
    let k = ch.users_per_cluster();
    let mut w = CMat::zeros(users, users);
    for (m, fm) in f.iter().enumerate() {
        let h_m = select_columns(&ch.h_tilde, &ch.feed_sets[m]);
        let block = h_m * fm;
        w.view_mut((0, m * k), (users, k)).copy_from(&block);
    }
    w
}

/// Per-user SINR (linear) from an effective matrix, with unit noise:
/// `|W_uu|^2 / (sum_{v != u} |W_uv|^2 + 1)`.
pub fn sinr_from_effective(w: &CMat) -> Vec<f64> {
    let users = w.nrows();
    (0..users)
        .map(|u| {
            let mut interference = 0.0;
            for v in 0..users {
                if v != u {
                    interference += w[(u, v)].norm_sqr();
                }
            }
            w[(u, u)].norm_sqr() / (interference + 1.0)
        })
        .collect()
}

/// Per-user SINR (linear) for joint precoders `f`.
pub fn sinr_per_user(ch: &ChannelRealization, f: &[CMat]) -> Vec<f64> {
    sinr_from_effective(&effective_matrix(ch, f))
}

/// Per-user SIR (linear, noiseless) from an effective matrix. A user with
/// no interference reports the infinity sentinel, which histograms exclude.
pub fn sir_from_effective(w: &CMat) -> Vec<f64> {
    let users = w.nrows();
    (0..users)
        .map(|u| {
            let mut interference = 0.0;
            for v in 0..users {
                if v != u {
                    interference += w[(u, v)].norm_sqr();
                }
            }
            let signal = w[(u, u)].norm_sqr();
            if interference == 0.0 {
                f64::INFINITY
            } else {
                signal / interference
            }
        })
        .collect()
}

/// SIR without precoding: every gateway transmits through its beamformer
/// with the equal-power identity precoder `T_m = sqrt(P_m / k) I`.
pub fn sir_no_precoding(ch: &ChannelRealization, bfn: &[CMat], cluster_power: &[f64]) -> Vec<f64> {
    let k = ch.users_per_cluster();
    let f: Vec<CMat> = bfn
        .iter()
        .zip(cluster_power)
        .map(|(b, &p)| b * C64::new((p / k as f64).sqrt(), 0.0))
        .collect();
    sir_from_effective(&effective_matrix(ch, &f))
}

/// Power budget matching a target SNR for a given expectation ratio
/// `E[trace((H H^H)^2) / trace(H H^H)]`.
pub fn power_for_ratio(ratio: f64, users: usize, snr_target: f64) -> f64 {
    snr_target * users as f64 / ratio
}

/// Sample-mean estimate of `E[trace((H H^H)^2) / trace(H H^H)]` over
/// `samples` channel draws.
pub fn mean_power_ratio(sc: &Scenario, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Config("calibration sample count must be at least 1".into()));
    }
    let mut acc = 0.0;
    for i in 0..samples {
        let ch = sample_channel(sc, derive_seed(seed, CALIBRATION_STREAM, i as u64));
        let gram = &ch.h_tilde * ch.h_tilde.adjoint();
        let num = trace_re(&(&gram * &gram));
        let den = trace_re(&gram);
        acc += num / den;
    }
    Ok(acc / samples as f64)
}

/// Calibrate the total power `P` so the matched-filter reference
/// `F = sqrt(P)/sqrt(trace(H^H H)) H^H` attains `snr_target` (linear) on
/// average: `P = snr_target * K / E[trace((H H^H)^2)/trace(H H^H)]`.
pub fn calibrate_power(sc: &Scenario, samples: usize, seed: u64, snr_target: f64) -> Result<f64> {
    let ratio = mean_power_ratio(sc, samples, seed)?;
    Ok(power_for_ratio(ratio, sc.total_users(), snr_target))
}

/// Dispersion `max(t) / min(t)` of the per-cluster scalings.
pub fn tm_dispersion(t: &[f64]) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::Config("dispersion of an empty scaling list".into()));
    }
    if t.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Numerical("scaling values must be positive".into()));
    }
    let max = t.iter().cloned().fold(f64::MIN, f64::max);
    let min = t.iter().cloned().fold(f64::MAX, f64::min);
    Ok(max / min)
}

/// Power ratio in dB.
pub fn db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Linear power ratio from dB.
pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One histogram bin; the end bins are open-ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistBin {
    pub low_db: f64,
    pub high_db: f64,
    pub count: u64,
}

/// 1 dB histogram over [-10, 40) dB with open under/overflow bins.
/// Non-finite values (the no-interference sentinel) are excluded.
pub fn sinr_histogram(values_db: &[f64]) -> Vec<HistBin> {
    const LOW: f64 = -10.0;
    const HIGH: f64 = 40.0;
    const BINS: usize = 50;
    let mut counts = vec![0u64; BINS + 2];
    for &v in values_db {
        if !v.is_finite() {
            continue;
        }
        let idx = if v < LOW {
            0
        } else if v >= HIGH {
            BINS + 1
        } else {
            1 + (v - LOW).floor() as usize
        };
        counts[idx] += 1;
    }
    let mut bins = Vec::with_capacity(BINS + 2);
    bins.push(HistBin {
        low_db: f64::NEG_INFINITY,
        high_db: LOW,
        count: counts[0],
    });
    for i in 0..BINS {
        bins.push(HistBin {
            low_db: LOW + i as f64,
            high_db: LOW + (i + 1) as f64,
            count: counts[i + 1],
        });
    }
    bins.push(HistBin {
        low_db: HIGH,
        high_db: f64::INFINITY,
        count: counts[BINS + 1],
    });
    bins
}

/// Monte Carlo estimate of the SMSE: draws unit-variance complex Gaussian
/// symbols and noise and averages `||s_m - D_m y_m||^2` over all clusters.
/// Independent of the closed form in [`smse`]; used as its test oracle.
pub fn smse_monte_carlo(
    ch: &ChannelRealization,
    f: &[CMat],
    d: &[Vec<f64>],
    draws: usize,
    seed: u64,
) -> f64 {
    let mc = ch.cluster_count();
    let k = ch.users_per_cluster();
    // Effective symbol blocks D_m H_mp F_p, precomputed once.
    let mut blocks = vec![vec![CMat::zeros(k, k); mc]; mc];
    for m in 0..mc {
        for p in 0..mc {
            let mut block = ch.cluster_block(m, p) * &f[p];
            for (row, &gain) in d[m].iter().enumerate() {
                for c in block.row_mut(row).iter_mut() {
                    *c *= C64::new(gain, 0.0);
                }
            }
            blocks[m][p] = block;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = move || loop {
        // Box-Muller; unit-variance complex sample.
        let u1 = rng.random::<f64>();
        let u2 = rng.random::<f64>();
        if u1 > 0.0 {
            let r = (-u1.ln()).sqrt();
            let a = std::f64::consts::TAU * u2;
            return C64::new(r * a.cos(), r * a.sin());
        }
    };
    let mut acc = 0.0;
    let mut s = vec![CMat::zeros(k, 1); mc];
    for _ in 0..draws {
        for sm in s.iter_mut() {
            for c in sm.iter_mut() {
                *c = gauss();
            }
        }
        for m in 0..mc {
            let mut shat = CMat::zeros(k, 1);
            for p in 0..mc {
                shat += &blocks[m][p] * &s[p];
            }
            for j in 0..k {
                shat[(j, 0)] += C64::new(d[m][j], 0.0) * gauss();
            }
            acc += (&shat - &s[m]).iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
    }
    acc / draws as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_scenario, ScenarioConfig};

    fn identity_channel(k: usize) -> ChannelRealization {
        ChannelRealization {
            h_tilde: CMat::identity(k, k),
            feed_sets: vec![(0..k).collect()],
            user_positions: vec![[0.0, 0.0]; k],
            trial_seed: 0,
        }
    }

    #[test]
    fn smse_identity_channel_unit_everything() {
        let k = 3;
        let ch = identity_channel(k);
        let (total, per) = smse(&ch, &[CMat::identity(k, k)], &[vec![1.0; k]]);
        assert!((total - k as f64).abs() < 1e-12);
        assert_eq!(per.len(), 1);
    }

    #[test]
    fn smse_zero_precoder_and_gains() {
        let k = 4;
        let ch = identity_channel(k);
        let (total, _) = smse(&ch, &[CMat::zeros(k, k)], &[vec![0.0; k]]);
        assert!((total - k as f64).abs() < 1e-15);
    }

    #[test]
    fn smse_total_is_exact_sum_of_parts() {
        let sc = build_scenario(&ScenarioConfig::new(10, 2, 2, 4)).unwrap();
        let ch = crate::scenario::sample_channel(&sc, 3);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let f: Vec<CMat> = (0..2)
            .map(|_| {
                CMat::from_fn(4, 2, |_, _| {
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })
            })
            .collect();
        let d: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..2).map(|_| rng.random::<f64>()).collect())
            .collect();
        let (total, per) = smse(&ch, &f, &d);
        assert_eq!(total, per.iter().sum::<f64>());
    }

    #[test]
    fn smse_matches_monte_carlo_oracle() {
        let sc = build_scenario(&ScenarioConfig::new(8, 2, 2, 3)).unwrap();
        let ch = crate::scenario::sample_channel(&sc, 10);
        let state = crate::ogbf::ogbf_alternating(&ch, &[2.0, 2.0], 1e-8, 20).unwrap();
        let (total, _) = smse(&ch, &state.f, &state.d);
        let mc = smse_monte_carlo(&ch, &state.f, &state.d, 200_000, 42);
        assert!(
            (total - mc).abs() <= 0.02 * total,
            "closed form {total} vs sample mean {mc}"
        );
    }

    #[test]
    fn sinr_diagonal_effective_matrix() {
        let w = CMat::identity(4, 4) * C64::new(2.0, 0.0);
        for s in sinr_from_effective(&w) {
            assert!((s - 4.0).abs() < 1e-15);
        }
        assert!(sinr_from_effective(&CMat::zeros(3, 3))
            .iter()
            .all(|&s| s == 0.0));
    }

    #[test]
    fn sinr_matches_double_loop_oracle() {
        let sc = build_scenario(&ScenarioConfig::new(10, 2, 2, 4)).unwrap();
        let ch = crate::scenario::sample_channel(&sc, 4);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let f: Vec<CMat> = (0..2)
            .map(|_| {
                CMat::from_fn(4, 2, |_, _| {
                    C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                })
            })
            .collect();
        let got = sinr_per_user(&ch, &f);
        // Oracle: accumulate signal and interference user by user,
        // cluster by cluster, straight from the definitions.
        let k = 2;
        for u in 0..4 {
            let mut signal = 0.0;
            let mut interference = 0.0;
            for m in 0..2 {
                let h_u = select_columns(&ch.h_tilde, &ch.feed_sets[m]).row(u).into_owned();
                for col in 0..k {
                    let mut gain = C64::new(0.0, 0.0);
                    for j in 0..4 {
                        gain += h_u[j] * f[m][(j, col)];
                    }
                    let v = m * k + col;
                    if v == u {
                        signal = gain.norm_sqr();
                    } else {
                        interference += gain.norm_sqr();
                    }
                }
            }
            let expect = signal / (interference + 1.0);
            assert!((got[u] - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }

    #[test]
    fn sir_single_user_is_infinite() {
        let ch = identity_channel(1);
        let sir = sir_no_precoding(&ch, &[CMat::identity(1, 1)], &[1.0]);
        assert_eq!(sir, vec![f64::INFINITY]);
    }

    #[test]
    fn sir_symmetric_epsilon_case() {
        let k = 4;
        let eps = 1e-2;
        let mut w = CMat::identity(k, k);
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    w[(i, j)] = C64::new(eps, 0.0);
                }
            }
        }
        let expect = 1.0 / ((k - 1) as f64 * eps * eps);
        for s in sir_from_effective(&w) {
            assert!((s - expect).abs() <= 1e-9 * expect);
        }
    }

    #[test]
    fn no_precoding_sir_has_low_tail_on_full_reuse() {
        // Without precoding, full frequency reuse leaves most users
        // interference-dominated, with a wide spread toward very low SIR.
        let mut cfg = ScenarioConfig::new(40, 4, 4, 10);
        cfg.alpha = Some(0.1155);
        let sc = build_scenario(&cfg).unwrap();
        let mut all_db = Vec::new();
        for seed in 0..10u64 {
            let ch = crate::scenario::sample_channel(&sc, seed);
            let bfn: Vec<CMat> = (0..4)
                .map(|m| crate::obbf::bfn_adaptive(&ch.cluster_block(m, m)).unwrap())
                .collect();
            let sir = sir_no_precoding(&ch, &bfn, &sc.cluster_power);
            all_db.extend(sir.into_iter().filter(|s| s.is_finite()).map(db));
        }
        let below_zero = all_db.iter().filter(|&&v| v < 0.0).count();
        assert!(below_zero * 10 >= all_db.len(), "only {below_zero} of {} below 0 dB", all_db.len());
        let min = all_db.iter().cloned().fold(f64::MAX, f64::min);
        let max = all_db.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max - min > 5.0, "no spread: [{min}, {max}]");
    }

    #[test]
    fn calibration_is_linear_and_round_trips() {
        let sc = build_scenario(&ScenarioConfig::new(10, 2, 2, 4)).unwrap();
        let p1 = calibrate_power(&sc, 200, 77, 1.0).unwrap();
        let p2 = calibrate_power(&sc, 200, 77, 2.0).unwrap();
        assert!((p2 - 2.0 * p1).abs() <= 1e-12 * p2);
        // Round trip: evaluate the SNR definition on fresh draws.
        let p = calibrate_power(&sc, 500, 77, from_db(10.0)).unwrap();
        let fresh = mean_power_ratio(&sc, 500, 78).unwrap();
        let snr = p * fresh / sc.total_users() as f64;
        assert!(
            (snr - from_db(10.0)).abs() <= 0.02 * from_db(10.0),
            "snr round trip {snr}"
        );
    }

    #[test]
    fn calibration_identity_ratio_gives_k_times_target() {
        assert_eq!(power_for_ratio(1.0, 16, 3.0), 48.0);
    }

    #[test]
    fn dispersion_values() {
        assert_eq!(tm_dispersion(&[1.0, 2.0, 4.0]).unwrap(), 4.0);
        assert_eq!(tm_dispersion(&[3.0, 3.0]).unwrap(), 1.0);
        assert!(tm_dispersion(&[1.0, 0.0]).is_err());
        assert!(tm_dispersion(&[]).is_err());
    }

    #[test]
    fn histogram_bins_and_exclusions() {
        let bins = sinr_histogram(&[-20.0, -10.0, -9.5, 0.0, 39.9, 40.0, 55.0, f64::INFINITY]);
        assert_eq!(bins.len(), 52);
        assert_eq!(bins[0].count, 1); // -20 in the underflow bin
        assert_eq!(bins[1].count, 2); // [-10, -9): -10 and -9.5
        assert_eq!(bins[11].count, 1); // [0, 1)
        assert_eq!(bins[50].count, 1); // [39, 40)
        assert_eq!(bins[51].count, 2); // 40 and 55 overflow; infinity excluded
        let total: u64 = bins.iter().map(|b| b.count).sum();
        assert_eq!(total, 7);
    }
}
