//! Monte Carlo experiment orchestration.
//!
//! An experiment sweeps schemes and SNR points over seeded trials. The
//! total power at each SNR point is calibrated once against the
//! matched-filter reference and shared by all schemes; every scheme at one
//! `(snr, trial)` pair sees the same channel because the trial seed is a
//! stable hash of `(master_seed, snr index, trial index)`. Results are
//! byte-identical regardless of how many workers run the trials.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{derive_seed, hermitian_eigen, hermitize};
use crate::metrics::{self, TrialResult};
use crate::obbf;
use crate::ogbf;
use crate::regularization::{self, RegularizationInputs};
use crate::scenario::{
    build_scenario, estimate_expected_gramians, sample_channel, ChannelRealization,
    ExpectedGramians, Scenario, ScenarioConfig,
};
use crate::{C64, CMat};

/// Seed stream tag for the pre-fixed beamformer statistics.
const PREFIXED_STREAM: u64 = 3;

/// Precoding schemes the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "ogbf")]
    Ogbf,
    #[serde(rename = "ogbf-single")]
    OgbfSingle,
    #[serde(rename = "obbf-adaptive")]
    ObbfAdaptive,
    #[serde(rename = "obbf-nulling")]
    ObbfNulling,
    #[serde(rename = "obbf-coarse")]
    ObbfCoarse,
    #[serde(rename = "obbf-prefixed")]
    ObbfPrefixed,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Ogbf => "ogbf",
            Scheme::OgbfSingle => "ogbf-single",
            Scheme::ObbfAdaptive => "obbf-adaptive",
            Scheme::ObbfNulling => "obbf-nulling",
            Scheme::ObbfCoarse => "obbf-coarse",
            Scheme::ObbfPrefixed => "obbf-prefixed",
        }
    }

    /// Schemes that build an on-board beamformer and gateway precoder.
    pub fn is_obbf(&self) -> bool {
        !matches!(self, Scheme::Ogbf | Scheme::OgbfSingle)
    }
}

/// Regularization factor used by the on-board schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularizer {
    /// Numerical root with expected leakage Gramians.
    #[serde(rename = "lemma1-expected")]
    Lemma1Expected,
    /// Numerical root with the current realization's leakage Gramians.
    #[serde(rename = "lemma1-instantaneous")]
    Lemma1Instantaneous,
    /// Closed form `k/P_m + trace(B^H Sigma_hat B)/k`.
    #[serde(rename = "closed-form")]
    ClosedForm,
    /// Single-cluster factor `k/P_m`, ignoring leakage.
    #[serde(rename = "intra-cluster")]
    IntraCluster,
}

impl Regularizer {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regularizer::Lemma1Expected => "lemma1-expected",
            Regularizer::Lemma1Instantaneous => "lemma1-instantaneous",
            Regularizer::ClosedForm => "closed-form",
            Regularizer::IntraCluster => "intra-cluster",
        }
    }
}

/// Experiment configuration file contents. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario_path: PathBuf,
    pub schemes: Vec<Scheme>,
    pub snr_db_list: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub regularizer: Regularizer,
    pub output_path: PathBuf,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("schemes non-empty".into()));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::Config(format!("duplicate scheme {}", s.as_str())));
            }
        }
        if self.snr_db_list.is_empty() {
            return Err(Error::Config("snr_db_list non-empty".into()));
        }
        if self.snr_db_list.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("snr_db_list entries must be finite".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Aggregate row: per-scheme, per-SNR means over all trials and users.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub scheme: String,
    pub regularizer: String,
    pub snr_db: f64,
    /// dB of the linear-average SINR (used for ordering comparisons).
    pub mean_sinr_db: f64,
    /// Average of the per-user dB values.
    pub mean_sinr_db_avg: f64,
    /// Mean of the per-trial scaling dispersion, when the scheme has one.
    pub mean_tm_dispersion: Option<f64>,
}

/// All trial rows plus aggregates, canonically ordered.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<TrialResult>,
    pub aggregates: Vec<AggregateRow>,
}

/// Per-scheme mean SINR curves, persisted as the JSON summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schemes: BTreeMap<String, SchemeCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeCurve {
    pub regularizer: String,
    pub snr_db: Vec<f64>,
    pub mean_sinr_db: Vec<f64>,
    pub mean_sinr_db_avg: Vec<f64>,
}

/// Scenario, statistics, and fixed designs shared by every trial.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    pub scenario: Scenario,
    pub gramians: ExpectedGramians,
    /// Pre-fixed beamformer per cluster (only when a scheme needs it).
    pub prefixed: Option<Vec<CMat>>,
}

/// Load an experiment configuration, resolving relative scenario and
/// output paths against the configuration file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    if let Some(dir) = path.parent() {
        if cfg.scenario_path.is_relative() {
            cfg.scenario_path = dir.join(&cfg.scenario_path);
        }
        if cfg.output_path.is_relative() {
            cfg.output_path = dir.join(&cfg.output_path);
        }
    }
    Ok(cfg)
}

/// Load and build a scenario from its JSON configuration file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    build_scenario(&cfg)
}

/// Estimate gramians and fixed designs for a scenario.
pub fn prepare_context(scenario: Scenario, need_prefixed: bool) -> Result<ExperimentContext> {
    let gramians =
        estimate_expected_gramians(&scenario, scenario.gramian_samples, scenario.gramian_seed)?;
    let prefixed = if need_prefixed {
        Some(prefixed_bfn(&scenario)?)
    } else {
        None
    };
    Ok(ExperimentContext {
        scenario,
        gramians,
        prefixed,
    })
}

/// Baseline beamformer standing in for an externally supplied matrix: the
/// coarse design of a mismatched scenario (roll-off doubled, beam grid
/// displaced by one beam radius), evaluated on the true feed sets and
/// orthonormalized. It plays the role of a fixed network that was not
/// designed for this system.
fn prefixed_bfn(sc: &Scenario) -> Result<Vec<CMat>> {
    let mut mismatched = sc.clone();
    mismatched.gain.alpha *= 2.0;
    for c in mismatched.beam_centers.iter_mut() {
        c[0] += sc.beam_radius;
        c[1] += sc.beam_radius;
    }
    let true_sets = {
        let ch = sample_channel(sc, 0);
        ch.feed_sets
    };
    let mc = sc.cluster_count;
    let n = sc.feeds_per_cluster;
    let mut acc = vec![CMat::zeros(n, n); mc];
    for i in 0..sc.gramian_samples {
        let mut ch = sample_channel(&mismatched, derive_seed(sc.gramian_seed, PREFIXED_STREAM, i as u64));
        ch.feed_sets = true_sets.clone();
        for (m, gram) in acc.iter_mut().enumerate() {
            let block = ch.cluster_block(m, m);
            *gram += block.adjoint() * block;
        }
    }
    acc.iter_mut()
        .enumerate()
        .map(|(m, gram)| {
            *gram *= C64::new(1.0 / sc.gramian_samples as f64, 0.0);
            hermitize(gram);
            let coarse = obbf::bfn_coarse(gram, sc.users_per_cluster)
                .map_err(|e| e.context(&format!("prefixed design, cluster {m}")))?;
            obbf::bfn_prefixed(&coarse)
        })
        .collect()
}

/// The `k_bar` off-cluster users nearest (by beam center) to cluster `m`'s
/// centroid, ties broken by lower user index.
fn protected_user_indices(sc: &Scenario, m: usize) -> Result<Vec<usize>> {
    let k_bar = sc.protected_users;
    if k_bar == 0 {
        return Ok(Vec::new());
    }
    let own = sc.cluster_users(m);
    let centroid = sc.cluster_centroid(m);
    let mut candidates: Vec<usize> = (0..sc.total_users()).filter(|u| !own.contains(u)).collect();
    if candidates.len() < k_bar {
        return Err(Error::Config(format!(
            "not enough off-cluster users to protect (need {k_bar}, have {})",
            candidates.len()
        )));
    }
    candidates.sort_by(|&a, &b| {
        let da = dist_sqr(sc.beam_centers[a], centroid);
        let db = dist_sqr(sc.beam_centers[b], centroid);
        da.partial_cmp(&db).unwrap().then(a.cmp(&b))
    });
    candidates.truncate(k_bar);
    Ok(candidates)
}

fn dist_sqr(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Protected users' channel rows restricted to cluster `m`'s feed set.
fn protected_channel(ch: &ChannelRealization, users: &[usize], m: usize) -> CMat {
    let set = &ch.feed_sets[m];
    let mut out = CMat::zeros(users.len(), set.len());
    for (row, &u) in users.iter().enumerate() {
        for (col, &j) in set.iter().enumerate() {
            out[(row, col)] = ch.h_tilde[(u, j)];
        }
    }
    out
}

/// Per-cluster on-board design of one trial: beamformers, precoders, and
/// the scalars that produced them.
#[derive(Debug, Clone)]
pub struct ObbfDesign {
    /// Beamformers per cluster, with null-steering byproducts when the
    /// scheme has them.
    pub bfn: obbf::BeamformerSet,
    /// Gateway precoder per cluster (`k x k`).
    pub precoder: Vec<CMat>,
    /// Scaling `t_m` per cluster.
    pub t: Vec<f64>,
    /// Regularization factor per cluster.
    pub gamma: Vec<f64>,
    /// Power budget per cluster.
    pub cluster_power: Vec<f64>,
}

/// Build the per-cluster beamformers and precoders of an on-board scheme
/// for one channel realization (see the scheme/regularizer tables).
pub fn design_obbf(
    ctx: &ExperimentContext,
    scheme: Scheme,
    regularizer: Regularizer,
    ch: &ChannelRealization,
    cluster_power: &[f64],
) -> Result<ObbfDesign> {
    if !scheme.is_obbf() {
        return Err(Error::Config(format!(
            "{} is not an on-board scheme",
            scheme.as_str()
        )));
    }
    let sc = &ctx.scenario;
    let k = sc.users_per_cluster;
    let mc = sc.cluster_count;
    let with_ctx =
        |e: Error, m: usize| e.context(&format!("scheme {} cluster {m}", scheme.as_str()));
    let protected = if scheme == Scheme::ObbfNulling {
        (0..mc)
            .map(|m| protected_user_indices(sc, m))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut design = ObbfDesign {
        bfn: obbf::BeamformerSet {
            per_cluster: Vec::with_capacity(mc),
        },
        precoder: Vec::with_capacity(mc),
        t: Vec::with_capacity(mc),
        gamma: Vec::with_capacity(mc),
        cluster_power: cluster_power.to_vec(),
    };
    for m in 0..mc {
        let h_mm = ch.cluster_block(m, m);
        let beamformer = match scheme {
            Scheme::ObbfAdaptive => obbf::ClusterBeamformer::plain(
                obbf::bfn_adaptive(&h_mm).map_err(|e| with_ctx(e, m))?,
                obbf::BfnMode::Adaptive,
            ),
            Scheme::ObbfNulling => {
                let h_bar = protected_channel(ch, &protected[m], m);
                obbf::bfn_nulling(&h_mm, &h_bar).map_err(|e| with_ctx(e, m))?
            }
            Scheme::ObbfCoarse => obbf::ClusterBeamformer::plain(
                obbf::bfn_coarse(ctx.gramians.gram(m, m), k).map_err(|e| with_ctx(e, m))?,
                obbf::BfnMode::Coarse,
            ),
            Scheme::ObbfPrefixed => obbf::ClusterBeamformer::plain(
                ctx.prefixed
                    .as_ref()
                    .ok_or_else(|| {
                        Error::Config("prefixed beamformers were not prepared".into())
                    })?[m]
                    .clone(),
                obbf::BfnMode::Prefixed,
            ),
            _ => unreachable!(),
        };
        let b = beamformer.b.clone();
        let p_m = cluster_power[m];
        let gm = match regularizer {
            Regularizer::IntraCluster => k as f64 / p_m,
            Regularizer::ClosedForm => {
                let sigma = obbf::build_sigma_hat(&ctx.gramians, m);
                regularization::gamma_closed_form(&b, &sigma, k, p_m)
            }
            Regularizer::Lemma1Expected | Regularizer::Lemma1Instantaneous => {
                let sigma = if regularizer == Regularizer::Lemma1Expected {
                    obbf::build_sigma_hat(&ctx.gramians, m)
                } else {
                    obbf::build_sigma_instantaneous(ch, m)
                };
                let mut reduced = b.adjoint() * (h_mm.adjoint() * &h_mm) * &b;
                hermitize(&mut reduced);
                let (vals, u) = hermitian_eigen(&reduced);
                let lambda: Vec<f64> = vals.iter().map(|&l| l.max(0.0)).collect();
                let sig = regularization::sigma_diagonal(&u, &b, &sigma)
                    .map_err(|e| with_ctx(e, m))?;
                let inp = RegularizationInputs::new(lambda, sig, k, p_m)
                    .map_err(|e| with_ctx(e, m))?;
                regularization::solve_gamma(&inp)
            }
        };
        let (t_mat, tm) = obbf::precoder_tm(&b, &h_mm, gm, p_m).map_err(|e| with_ctx(e, m))?;
        design.bfn.per_cluster.push(beamformer);
        design.precoder.push(t_mat);
        design.t.push(tm);
        design.gamma.push(gm);
    }
    Ok(design)
}

/// Run one trial of one scheme at total power `p_total`.
pub fn run_trial(
    ctx: &ExperimentContext,
    scheme: Scheme,
    regularizer: Regularizer,
    p_total: f64,
    snr_db: f64,
    trial: usize,
    trial_seed: u64,
) -> Result<TrialResult> {
    let sc = &ctx.scenario;
    let ch = sample_channel(sc, trial_seed);
    let scale = p_total / sc.total_power;
    let cluster_power: Vec<f64> = sc.cluster_power.iter().map(|p| p * scale).collect();

    let (f, d, t, gamma): (Vec<CMat>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>);
    let eval_ch: ChannelRealization;
    match scheme {
        Scheme::Ogbf => {
            let state = ogbf::ogbf_alternating(&ch, &cluster_power, 1e-8, 100)
                .map_err(|e| e.context(&format!("scheme {}", scheme.as_str())))?;
            f = state.f;
            d = state.d;
            t = Vec::new();
            gamma = Vec::new();
            eval_ch = ch;
        }
        Scheme::OgbfSingle => {
            let view = ch.single_gateway_view();
            let state = ogbf::ogbf_alternating(&view, &[p_total], 1e-8, 100)
                .map_err(|e| e.context(&format!("scheme {}", scheme.as_str())))?;
            f = state.f;
            d = state.d;
            t = Vec::new();
            gamma = Vec::new();
            eval_ch = view;
        }
        _ => {
            let design = design_obbf(ctx, scheme, regularizer, &ch, &cluster_power)?;
            let k = sc.users_per_cluster;
            f = design
                .bfn
                .iter()
                .zip(&design.precoder)
                .map(|(b, tm)| b * tm)
                .collect();
            d = design.t.iter().map(|&tm| vec![1.0 / tm.sqrt(); k]).collect();
            t = design.t;
            gamma = design.gamma;
            eval_ch = ch;
        }
    }

    let (total, trace_em) = metrics::smse(&eval_ch, &f, &d);
    let sinr = metrics::sinr_per_user(&eval_ch, &f);
    if sinr.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical(format!(
            "scheme {}: non-finite SINR",
            scheme.as_str()
        )));
    }
    Ok(TrialResult {
        scheme: scheme.as_str().to_string(),
        regularizer: regularizer.as_str().to_string(),
        snr_db,
        trial,
        smse: total,
        trace_em,
        sinr_db: sinr.iter().map(|&s| metrics::db(s)).collect(),
        t,
        gamma,
        seed: trial_seed,
    })
}

/// Run a whole experiment on `workers` threads. Output is independent of
/// the worker count; on a trial failure the completed rows are flushed to
/// the output path before the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ResultTable> {
    cfg.validate()?;
    let scenario = load_scenario(&cfg.scenario_path)?;
    let need_prefixed = cfg.schemes.contains(&Scheme::ObbfPrefixed);
    let ctx = prepare_context(scenario, need_prefixed)?;

    let powers: Vec<f64> = cfg
        .snr_db_list
        .iter()
        .map(|&snr| {
            metrics::calibrate_power(
                &ctx.scenario,
                ctx.scenario.gramian_samples,
                derive_seed(ctx.scenario.gramian_seed, 2, 0),
                metrics::from_db(snr),
            )
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut tasks = Vec::new();
    for &scheme in &cfg.schemes {
        for (si, &snr) in cfg.snr_db_list.iter().enumerate() {
            for trial in 0..cfg.trials {
                tasks.push((scheme, si, snr, trial));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<TrialResult>> = pool.install(|| {
        use rayon::prelude::*;
        tasks
            .par_iter()
            .map(|&(scheme, si, snr, trial)| {
                let seed = derive_seed(cfg.master_seed, si as u64, trial as u64);
                run_trial(&ctx, scheme, cfg.regularizer, powers[si], snr, trial, seed)
            })
            .collect()
    });

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut first_error = None;
    for outcome in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    sort_rows(&mut rows);
    if let Some(e) = first_error {
        // Flush what completed; ignore secondary write failures.
        let partial = ResultTable {
            rows,
            aggregates: Vec::new(),
        };
        let _ = write_results(&partial, &cfg.output_path);
        return Err(e);
    }
    let aggregates = aggregate(&rows);
    Ok(ResultTable { rows, aggregates })
}

fn sort_rows(rows: &mut [TrialResult]) {
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.snr_db.partial_cmp(&b.snr_db).unwrap())
            .then(a.trial.cmp(&b.trial))
    });
}

/// Per-(scheme, snr) means recomputed from the sorted trial rows.
pub fn aggregate(rows: &[TrialResult]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(String, u64), Vec<&TrialResult>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.scheme.clone(), row.snr_db.to_bits()))
            .or_default()
            .push(row);
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((scheme, snr_bits), members) in groups {
        let mut linear_sum = 0.0;
        let mut db_sum = 0.0;
        let mut count = 0usize;
        let mut disp_sum = 0.0;
        let mut disp_count = 0usize;
        for row in &members {
            for &v in &row.sinr_db {
                linear_sum += metrics::from_db(v);
                db_sum += v;
                count += 1;
            }
            if !row.t.is_empty() {
                if let Ok(d) = metrics::tm_dispersion(&row.t) {
                    disp_sum += d;
                    disp_count += 1;
                }
            }
        }
        out.push(AggregateRow {
            scheme,
            regularizer: members[0].regularizer.clone(),
            snr_db: f64::from_bits(snr_bits),
            mean_sinr_db: metrics::db(linear_sum / count as f64),
            mean_sinr_db_avg: db_sum / count as f64,
            mean_tm_dispersion: if disp_count > 0 {
                Some(disp_sum / disp_count as f64)
            } else {
                None
            },
        });
    }
    out
}

/// Path of the JSON summary written alongside a CSV output path.
pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.json")
}

/// Write the result table as CSV plus a JSON summary alongside.
///
/// CSV columns: `scheme,regularizer,snr_db,trial,cluster_or_user_scope,metric,value`.
pub fn write_results(table: &ResultTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("scheme,regularizer,snr_db,trial,cluster_or_user_scope,metric,value\n");
    for row in &table.rows {
        let prefix = format!(
            "{},{},{},{}",
            row.scheme, row.regularizer, row.snr_db, row.trial
        );
        out.push_str(&format!("{prefix},total,smse,{}\n", row.smse));
        for (m, v) in row.trace_em.iter().enumerate() {
            out.push_str(&format!("{prefix},cluster:{m},trace_em,{v}\n"));
        }
        for (u, v) in row.sinr_db.iter().enumerate() {
            out.push_str(&format!("{prefix},user:{u},sinr_db,{v}\n"));
        }
        for (m, v) in row.gamma.iter().enumerate() {
            out.push_str(&format!("{prefix},cluster:{m},gamma,{v}\n"));
        }
        for (m, v) in row.t.iter().enumerate() {
            out.push_str(&format!("{prefix},cluster:{m},t,{v}\n"));
        }
        if !row.t.is_empty() {
            let d = metrics::tm_dispersion(&row.t)
                .map_err(|e| e.context("writing tm_dispersion"))?;
            out.push_str(&format!("{prefix},total,tm_dispersion,{d}\n"));
        }
        out.push_str(&format!("{prefix},total,seed,{}\n", row.seed));
    }
    for agg in &table.aggregates {
        let prefix = format!("{},{},{},", agg.scheme, agg.regularizer, agg.snr_db);
        out.push_str(&format!("{prefix},all,mean_sinr_db,{}\n", agg.mean_sinr_db));
        out.push_str(&format!(
            "{prefix},all,mean_sinr_db_avg,{}\n",
            agg.mean_sinr_db_avg
        ));
        if let Some(d) = agg.mean_tm_dispersion {
            out.push_str(&format!("{prefix},all,mean_tm_dispersion,{d}\n"));
        }
    }
    let mut file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    file.write_all(out.as_bytes())
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;

    let summary = summarize(table);
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::Io(format!("summary serialization: {e}")))?;
    let spath = summary_path(path);
    std::fs::write(&spath, json.as_bytes())
        .map_err(|e| Error::Io(format!("{}: {e}", spath.display())))?;
    Ok(())
}

/// Build the JSON summary structure from a result table.
pub fn summarize(table: &ResultTable) -> Summary {
    let mut schemes: BTreeMap<String, SchemeCurve> = BTreeMap::new();
    for agg in &table.aggregates {
        let curve = schemes.entry(agg.scheme.clone()).or_insert_with(|| SchemeCurve {
            regularizer: agg.regularizer.clone(),
            snr_db: Vec::new(),
            mean_sinr_db: Vec::new(),
            mean_sinr_db_avg: Vec::new(),
        });
        curve.snr_db.push(agg.snr_db);
        curve.mean_sinr_db.push(agg.mean_sinr_db);
        curve.mean_sinr_db_avg.push(agg.mean_sinr_db_avg);
    }
    // Curves ordered by SNR regardless of aggregate grouping order.
    for curve in schemes.values_mut() {
        let mut order: Vec<usize> = (0..curve.snr_db.len()).collect();
        order.sort_by(|&a, &b| curve.snr_db[a].partial_cmp(&curve.snr_db[b]).unwrap());
        curve.snr_db = order.iter().map(|&i| curve.snr_db[i]).collect();
        curve.mean_sinr_db = order.iter().map(|&i| curve.mean_sinr_db[i]).collect();
        curve.mean_sinr_db_avg = order.iter().map(|&i| curve.mean_sinr_db_avg[i]).collect();
    }
    Summary { schemes }
}

/// Read back `sinr_db` values for one scheme at one SNR point from a
/// results CSV (aggregate rows are skipped).
pub fn read_sinr_values(path: &Path, scheme: &str, snr_db: f64) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Config(format!(
                "{}: line {} has {} fields, expected 7",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        if fields[0] != scheme || fields[5] != "sinr_db" || fields[3].is_empty() {
            continue;
        }
        let snr: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Config(format!("{}: bad snr_db on line {}", path.display(), lineno + 1)))?;
        if (snr - snr_db).abs() > 1e-9 {
            continue;
        }
        let value: f64 = fields[6]
            .parse()
            .map_err(|_| Error::Config(format!("{}: bad value on line {}", path.display(), lineno + 1)))?;
        values.push(value);
    }
    Ok(values)
}
