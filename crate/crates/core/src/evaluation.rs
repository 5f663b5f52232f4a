//! Detection and recovery metrics (F1, NMSE), ground-truth generation, and
//! the experiment sweep over complex size and triangle fill fraction with
//! plot-ready CSV output.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SgmError};
use crate::inference::{infer_from_samples, prune_triangles, InferenceOptions};
use crate::model::{assemble_full_precision, sample, SgmParams};
use crate::simplicial::SimplicialComplex;

/// Regeneration budget for complexes whose 1-skeleton has no 3-clique.
const MAX_TRIAL_ATTEMPTS: usize = 64;

/// Harmonic mean of precision and recall over index sets. Both sets empty
/// counts as a perfect score; exactly one empty scores zero.
pub fn f1_score(true_set: &[usize], predicted_set: &[usize]) -> f64 {
    let truth: HashSet<usize> = true_set.iter().copied().collect();
    let predicted: HashSet<usize> = predicted_set.iter().copied().collect();
    match (truth.is_empty(), predicted.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    let tp = truth.intersection(&predicted).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / predicted.len() as f64;
    let recall = tp / truth.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Squared estimation error over all parameter blocks, normalized by the
/// squared truth norm:
/// `(|dv_hat - d_v|^2 + |dt_hat - d_t|^2 + (k_hat - k)^2) / (|d_v|^2 + |d_t|^2 + k^2)`.
pub fn nmse(estimate: &SgmParams, truth: &SgmParams) -> Result<f64> {
    if estimate.d_v.len() != truth.d_v.len() {
        return Err(SgmError::DimensionMismatch {
            expected: truth.d_v.len(),
            got: estimate.d_v.len(),
        });
    }
    if estimate.d_t.len() != truth.d_t.len() {
        return Err(SgmError::DimensionMismatch {
            expected: truth.d_t.len(),
            got: estimate.d_t.len(),
        });
    }
    let denominator = truth.d_v.norm_squared() + truth.d_t.norm_squared() + truth.k * truth.k;
    if denominator <= 0.0 {
        return Err(SgmError::ZeroTruthNorm);
    }
    let numerator = (&estimate.d_v - &truth.d_v).norm_squared()
        + (&estimate.d_t - &truth.d_t).norm_squared()
        + (estimate.k - truth.k).powi(2);
    Ok(numerator / denominator)
}

/// Draws ground-truth parameters: vertex weights and filled-triangle weights
/// uniform on `d_range`, unfilled triangles at zero, and the edge self-term
/// set to `k_margin` times the largest eigenvalue of
/// `B1^T diag(d_V) B1 + B2 diag(d_T) B2^T`, which makes the joint precision
/// positive definite for any margin above one.
///
/// The draw order is all vertices first, then filled triangles in index
/// order; unfilled triangles consume no randomness.
pub fn generate_ground_truth(
    complex: &SimplicialComplex,
    flags: &[bool],
    d_range: [f64; 2],
    k_margin: f64,
    seed: u64,
) -> Result<SgmParams> {
    if flags.len() != complex.n_triangles() {
        return Err(SgmError::DimensionMismatch {
            expected: complex.n_triangles(),
            got: flags.len(),
        });
    }
    let [lo, hi] = d_range;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(SgmError::InvalidInput(
            "d_range must satisfy 0 < lo <= hi".into(),
        ));
    }
    if !(k_margin > 1.0 && k_margin.is_finite()) {
        return Err(SgmError::InvalidInput("k_margin must exceed 1".into()));
    }
    if complex.n_edges() == 0 {
        return Err(SgmError::InvalidInput(
            "ground truth requires at least one edge".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = move || lo + (hi - lo) * rng.random::<f64>();
    let d_v = DVector::from_fn(complex.n_vertices(), |_, _| draw());
    let d_t = DVector::from_fn(
        complex.n_triangles(),
        |t, _| if flags[t] { draw() } else { 0.0 },
    );

    let inc = complex.incidence_matrices();
    let b1 = inc.b1_real();
    let b2 = inc.b2_real();
    let m = b1.transpose() * DMatrix::from_diagonal(&d_v) * &b1
        + &b2 * DMatrix::from_diagonal(&d_t) * b2.transpose();
    let lambda_max = m.symmetric_eigen().eigenvalues.max();
    Ok(SgmParams {
        d_v,
        d_t,
        k: k_margin * lambda_max,
    })
}

/// Sweep settings. All fields have paper defaults except `base_seed`, which
/// must be supplied so runs are reproducible by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_vertex_counts")]
    pub vertex_counts: Vec<usize>,
    #[serde(default = "default_fill_fractions")]
    pub fill_fractions: Vec<f64>,
    #[serde(default = "default_edge_probability")]
    pub edge_probability: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_d_range")]
    pub d_range: [f64; 2],
    #[serde(default = "default_k_margin")]
    pub k_margin: f64,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    pub base_seed: u64,
}

fn default_vertex_counts() -> Vec<usize> {
    vec![10, 30, 50]
}

fn default_fill_fractions() -> Vec<f64> {
    vec![0.10, 0.30, 0.50]
}

fn default_edge_probability() -> f64 {
    0.3
}

fn default_trials() -> usize {
    20
}

fn default_samples() -> usize {
    50_000
}

fn default_d_range() -> [f64; 2] {
    [0.2, 1.0]
}

fn default_k_margin() -> f64 {
    1.5
}

fn default_thresholds() -> Vec<f64> {
    vec![0.01, 0.05, 0.1]
}

impl ExperimentConfig {
    /// Paper defaults around the given seed.
    pub fn with_base_seed(base_seed: u64) -> Self {
        Self {
            vertex_counts: default_vertex_counts(),
            fill_fractions: default_fill_fractions(),
            edge_probability: default_edge_probability(),
            trials: default_trials(),
            samples: default_samples(),
            d_range: default_d_range(),
            k_margin: default_k_margin(),
            thresholds: default_thresholds(),
            base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertex_counts.is_empty() || self.vertex_counts.iter().any(|&n| n < 2) {
            return Err(SgmError::InvalidInput(
                "vertex_counts must be nonempty with entries >= 2".into(),
            ));
        }
        if self.fill_fractions.is_empty()
            || self.fill_fractions.iter().any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(SgmError::InvalidInput(
                "fill_fractions must be nonempty probabilities".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.edge_probability) {
            return Err(SgmError::InvalidInput(
                "edge_probability must lie in [0, 1]".into(),
            ));
        }
        if self.trials == 0 {
            return Err(SgmError::InvalidInput("trials must be at least 1".into()));
        }
        if self.samples == 0 {
            return Err(SgmError::InvalidInput("samples must be at least 1".into()));
        }
        let [lo, hi] = self.d_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(SgmError::InvalidInput(
                "d_range must satisfy 0 < lo <= hi".into(),
            ));
        }
        if !(self.k_margin > 1.0 && self.k_margin.is_finite()) {
            return Err(SgmError::InvalidInput("k_margin must exceed 1".into()));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !t.is_finite() || *t < 0.0)
        {
            return Err(SgmError::InvalidInput(
                "thresholds must be nonempty and nonnegative".into(),
            ));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SgmError::InvalidInput(
                "thresholds must be strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

/// One completed trial. `f1` is aligned with the config's threshold list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n_vertices: usize,
    pub fill_fraction: f64,
    pub trial: usize,
    pub seed: u64,
    pub f1: Vec<f64>,
    pub nmse: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_ms: u64,
}

/// A trial that errored; the sweep continues past these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub n_vertices: usize,
    pub fill_fraction: f64,
    pub trial: usize,
    pub seed: u64,
    pub message: String,
}

/// Median and quartiles of F1 (at one threshold) and NMSE over a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n_vertices: usize,
    pub fill_fraction: f64,
    pub threshold: f64,
    pub f1_median: f64,
    pub f1_q1: f64,
    pub f1_q3: f64,
    pub nmse_median: f64,
    pub nmse_q1: f64,
    pub nmse_q3: f64,
}

/// Full sweep output: the resolved config, per-trial records in deterministic
/// `(cell, trial)` order, failures, and per-cell summaries. `meta` is free-form
/// provenance (tool version and the like) carried through serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
    pub summaries: Vec<CellSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}

/// Runs every `(n_vertices, fill_fraction, trial)` cell of the sweep. Trials
/// execute in parallel but are collected in deterministic order, and each
/// derives its own seed from `(base_seed, cell, trial)`, so reports are
/// identical across thread counts (wall times aside).
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let mut tasks = Vec::new();
    for &n in &config.vertex_counts {
        for &p in &config.fill_fractions {
            for trial in 0..config.trials {
                tasks.push((n, p, trial));
            }
        }
    }

    let outcomes: Vec<std::result::Result<TrialRecord, TrialFailure>> = tasks
        .par_iter()
        .map(|&(n, p, trial)| run_trial(config, n, p, trial))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(record) => records.push(record),
            Err(failure) => failures.push(failure),
        }
    }
    let summaries = summarize(config, &records);
    Ok(ExperimentReport {
        config: config.clone(),
        records,
        failures,
        summaries,
        meta: None,
    })
}

fn run_trial(
    config: &ExperimentConfig,
    n_vertices: usize,
    fill_fraction: f64,
    trial: usize,
) -> std::result::Result<TrialRecord, TrialFailure> {
    let mut seed = 0;
    for attempt in 0..MAX_TRIAL_ATTEMPTS {
        seed = trial_seed(config.base_seed, n_vertices, fill_fraction, trial, attempt);
        let fail = |message: String| TrialFailure {
            n_vertices,
            fill_fraction,
            trial,
            seed,
            message,
        };

        let (complex, flags) = SimplicialComplex::random(
            n_vertices,
            config.edge_probability,
            fill_fraction,
            splitmix64(seed ^ 0x01),
        )
        .map_err(|e| fail(e.to_string()))?;
        if complex.n_triangles() == 0 {
            continue; // no candidate triangles: redraw with the next seed
        }

        let started = Instant::now();
        let result = (|| -> Result<TrialRecord> {
            let truth = generate_ground_truth(
                &complex,
                &flags,
                config.d_range,
                config.k_margin,
                splitmix64(seed ^ 0x02),
            )?;
            let omega = assemble_full_precision(&complex, &truth)?;
            let draws = sample(&omega, config.samples, splitmix64(seed ^ 0x03))?;
            let opts = InferenceOptions {
                thresholds: config.thresholds.clone(),
                ..Default::default()
            };
            let outcome = infer_from_samples(&draws, &complex, &opts)?;

            let estimate = SgmParams {
                d_v: outcome.d_v_hat.clone(),
                d_t: outcome.d_t_hat.clone(),
                k: outcome.k_hat,
            };
            let nmse_value = nmse(&estimate, &truth)?;
            let true_set: Vec<usize> = flags
                .iter()
                .enumerate()
                .filter(|(_, &f)| f)
                .map(|(i, _)| i)
                .collect();
            let f1 = config
                .thresholds
                .iter()
                .map(|&t| f1_score(&true_set, &prune_triangles(&outcome.d_t_hat, t)))
                .collect();

            Ok(TrialRecord {
                n_vertices,
                fill_fraction,
                trial,
                seed,
                f1,
                nmse: nmse_value,
                iterations: outcome.iterations,
                converged: outcome.converged,
                runtime_ms: started.elapsed().as_millis() as u64,
            })
        })();
        return result.map_err(|e| fail(e.to_string()));
    }
    Err(TrialFailure {
        n_vertices,
        fill_fraction,
        trial,
        seed,
        message: format!("no 3-cliques after {MAX_TRIAL_ATTEMPTS} regeneration attempts"),
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn trial_seed(
    base: u64,
    n_vertices: usize,
    fill_fraction: f64,
    trial: usize,
    attempt: usize,
) -> u64 {
    let mut h = splitmix64(base);
    for x in [
        n_vertices as u64,
        fill_fraction.to_bits(),
        trial as u64,
        attempt as u64,
    ] {
        h = splitmix64(h ^ x);
    }
    h
}

/// Per-cell, per-threshold medians and quartiles, in the config's cell order.
pub fn summarize(config: &ExperimentConfig, records: &[TrialRecord]) -> Vec<CellSummary> {
    let mut summaries = Vec::new();
    for &n in &config.vertex_counts {
        for &p in &config.fill_fractions {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|r| r.n_vertices == n && r.fill_fraction == p)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let nmse_values: Vec<f64> = cell.iter().map(|r| r.nmse).collect();
            let (nmse_q1, nmse_median, nmse_q3) = quartiles(&nmse_values);
            for (i, &threshold) in config.thresholds.iter().enumerate() {
                let f1_values: Vec<f64> = cell.iter().map(|r| r.f1[i]).collect();
                let (f1_q1, f1_median, f1_q3) = quartiles(&f1_values);
                summaries.push(CellSummary {
                    n_vertices: n,
                    fill_fraction: p,
                    threshold,
                    f1_median,
                    f1_q1,
                    f1_q3,
                    nmse_median,
                    nmse_q1,
                    nmse_q3,
                });
            }
        }
    }
    summaries
}

/// Linearly interpolated quartiles `(q1, median, q3)` of a nonempty slice.
fn quartiles(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("metric values are finite"));
    (
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.5),
        quantile(&sorted, 0.75),
    )
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let position = q * (sorted.len() - 1) as f64;
    let below = position.floor() as usize;
    let above = position.ceil() as usize;
    let weight = position - below as f64;
    sorted[below] * (1.0 - weight) + sorted[above] * weight
}

/// Writes `trials.csv` (one row per trial and threshold) and `summary.csv`
/// (one row per cell and threshold) under `dir`, returning the two paths.
pub fn emit_plot_data(report: &ExperimentReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if report.records.is_empty() {
        return Err(SgmError::InvalidInput(
            "report contains no trial records".into(),
        ));
    }
    std::fs::create_dir_all(dir)?;

    let trials_path = dir.join("trials.csv");
    let mut writer = csv::Writer::from_path(&trials_path)?;
    writer.write_record([
        "n_vertices",
        "p",
        "trial",
        "seed",
        "threshold",
        "f1",
        "nmse",
        "iterations",
        "converged",
        "runtime_ms",
    ])?;
    for record in &report.records {
        for (i, &threshold) in report.config.thresholds.iter().enumerate() {
            writer.write_record([
                record.n_vertices.to_string(),
                record.fill_fraction.to_string(),
                record.trial.to_string(),
                record.seed.to_string(),
                threshold.to_string(),
                record.f1[i].to_string(),
                record.nmse.to_string(),
                record.iterations.to_string(),
                record.converged.to_string(),
                record.runtime_ms.to_string(),
            ])?;
        }
    }
    writer.flush()?;

    let summary_path = dir.join("summary.csv");
    let mut writer = csv::Writer::from_path(&summary_path)?;
    writer.write_record([
        "n_vertices",
        "p",
        "threshold",
        "f1_median",
        "f1_q1",
        "f1_q3",
        "nmse_median",
        "nmse_q1",
        "nmse_q3",
    ])?;
    for s in &report.summaries {
        writer.write_record([
            s.n_vertices.to_string(),
            s.fill_fraction.to_string(),
            s.threshold.to_string(),
            s.f1_median.to_string(),
            s.f1_q1.to_string(),
            s.f1_q3.to_string(),
            s.nmse_median.to_string(),
            s.nmse_q1.to_string(),
            s.nmse_q3.to_string(),
        ])?;
    }
    writer.flush()?;

    Ok((trials_path, summary_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            vertex_counts: vec![6],
            fill_fractions: vec![0.4],
            edge_probability: 0.5,
            trials: 2,
            samples: 400,
            thresholds: vec![0.01, 0.05, 0.1],
            ..ExperimentConfig::with_base_seed(7)
        }
    }

    fn normalize(report: &ExperimentReport) -> ExperimentReport {
        let mut r = report.clone();
        for record in &mut r.records {
            record.runtime_ms = 0;
        }
        r
    }

    #[test]
    fn f1_trivial_cases() {
        assert_eq!(f1_score(&[0, 1], &[0, 1]), 1.0);
        assert_abs_diff_eq!(f1_score(&[0, 1], &[0]), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(f1_score(&[0, 1], &[2, 3]), 0.0);
        assert_eq!(f1_score(&[], &[]), 1.0);
        assert_eq!(f1_score(&[], &[0]), 0.0);
        assert_eq!(f1_score(&[0], &[]), 0.0);
    }

    #[test]
    fn f1_matches_brute_force_on_all_subset_pairs() {
        let subsets: Vec<Vec<usize>> = (0u32..32)
            .map(|mask| (0..5).filter(|i| mask & (1 << i) != 0).collect())
            .collect();
        for truth in &subsets {
            for predicted in &subsets {
                let tp = truth.iter().filter(|i| predicted.contains(i)).count() as f64;
                let fp = predicted.iter().filter(|i| !truth.contains(i)).count() as f64;
                let fn_ = truth.iter().filter(|i| !predicted.contains(i)).count() as f64;
                let expected = if truth.is_empty() && predicted.is_empty() {
                    1.0
                } else if truth.is_empty() || predicted.is_empty() || tp == 0.0 {
                    0.0
                } else {
                    2.0 * tp / (2.0 * tp + fp + fn_)
                };
                let got = f1_score(truth, predicted);
                assert_abs_diff_eq!(got, expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn f1_invariant_under_simultaneous_relabeling() {
        let relabel = |s: &[usize]| -> Vec<usize> { s.iter().map(|&i| 4 - i).collect() };
        let truth = vec![0, 1, 3];
        let predicted = vec![1, 2];
        assert_eq!(
            f1_score(&truth, &predicted),
            f1_score(&relabel(&truth), &relabel(&predicted))
        );
    }

    #[test]
    fn nmse_trivial_and_hand_computed_cases() {
        let truth = SgmParams {
            d_v: DVector::from_vec(vec![1.0]),
            d_t: DVector::from_vec(vec![1.0]),
            k: 2.0,
        };
        assert_eq!(nmse(&truth, &truth).unwrap(), 0.0);

        let zeros = SgmParams {
            d_v: DVector::zeros(1),
            d_t: DVector::zeros(1),
            k: 0.0,
        };
        assert_abs_diff_eq!(nmse(&zeros, &truth).unwrap(), 1.0, epsilon = 1e-15);

        let estimate = SgmParams {
            d_v: DVector::from_vec(vec![1.0]),
            d_t: DVector::from_vec(vec![0.0]),
            k: 2.0,
        };
        assert_abs_diff_eq!(nmse(&estimate, &truth).unwrap(), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn nmse_is_invariant_under_block_reordering() {
        let truth = SgmParams {
            d_v: DVector::from_vec(vec![0.3, 0.9]),
            d_t: DVector::from_vec(vec![0.5]),
            k: 2.0,
        };
        let estimate = SgmParams {
            d_v: DVector::from_vec(vec![0.4, 0.7]),
            d_t: DVector::from_vec(vec![0.1]),
            k: 2.5,
        };
        let swap = |p: &SgmParams| SgmParams {
            d_v: p.d_t.clone(),
            d_t: p.d_v.clone(),
            k: p.k,
        };
        assert_eq!(
            nmse(&estimate, &truth).unwrap(),
            nmse(&swap(&estimate), &swap(&truth)).unwrap()
        );
    }

    #[test]
    fn nmse_error_cases() {
        let truth = SgmParams {
            d_v: DVector::from_vec(vec![1.0]),
            d_t: DVector::zeros(0),
            k: 1.0,
        };
        let wrong_dim = SgmParams {
            d_v: DVector::from_vec(vec![1.0, 2.0]),
            d_t: DVector::zeros(0),
            k: 1.0,
        };
        assert!(matches!(
            nmse(&wrong_dim, &truth).unwrap_err(),
            SgmError::DimensionMismatch { .. }
        ));
        let zero_truth = SgmParams {
            d_v: DVector::zeros(1),
            d_t: DVector::zeros(0),
            k: 0.0,
        };
        assert!(matches!(
            nmse(&truth, &zero_truth).unwrap_err(),
            SgmError::ZeroTruthNorm
        ));
    }

    #[test]
    fn ground_truth_respects_range_flags_and_margin() {
        let (complex, flags) = SimplicialComplex::random(8, 0.6, 0.5, 11).unwrap();
        assert!(complex.n_triangles() > 0, "seed must yield candidates");
        let params = generate_ground_truth(&complex, &flags, [0.2, 1.0], 1.5, 99).unwrap();
        for v in params.d_v.iter() {
            assert!((0.2..=1.0).contains(v));
        }
        for (t, value) in params.d_t.iter().enumerate() {
            if flags[t] {
                assert!((0.2..=1.0).contains(value));
            } else {
                assert_eq!(*value, 0.0);
            }
        }

        // Eigenvalues of O_E = kI - M are k - lambda_i(M): the smallest is
        // (margin - 1) * lambda_max.
        let inc = complex.incidence_matrices();
        let b1 = inc.b1_real();
        let b2 = inc.b2_real();
        let m = b1.transpose() * DMatrix::from_diagonal(&params.d_v) * &b1
            + &b2 * DMatrix::from_diagonal(&params.d_t) * b2.transpose();
        let eigen = m.clone().symmetric_eigen().eigenvalues;
        let lambda_max = eigen.max();
        assert_abs_diff_eq!(params.k, 1.5 * lambda_max, epsilon = 1e-12 * lambda_max);
        let omega_e = DMatrix::identity(complex.n_edges(), complex.n_edges()) * params.k - m;
        let min_eig = omega_e.symmetric_eigen().eigenvalues.min();
        assert_abs_diff_eq!(min_eig, 0.5 * lambda_max, epsilon = 1e-9 * lambda_max);
    }

    #[test]
    fn ground_truth_is_deterministic_and_handles_empty_fill() {
        let (complex, flags) = SimplicialComplex::random(7, 0.5, 0.0, 4).unwrap();
        let a = generate_ground_truth(&complex, &flags, [0.2, 1.0], 1.5, 5).unwrap();
        let b = generate_ground_truth(&complex, &flags, [0.2, 1.0], 1.5, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.d_t.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut config = small_config();
        config.trials = 0;
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.edge_probability = 1.2;
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.d_range = [0.0, 1.0];
        assert!(config.validate().is_err());
        let mut config = small_config();
        config.thresholds = vec![0.05, 0.01];
        assert!(config.validate().is_err());
        assert!(small_config().validate().is_ok());
    }

    #[test]
    fn experiment_is_reproducible_and_ordered() {
        let config = small_config();
        let a = run_experiment(&config).unwrap();
        let b = run_experiment(&config).unwrap();
        assert_eq!(normalize(&a), normalize(&b));
        assert_eq!(a.records.len() + a.failures.len(), 2);
        let trials: Vec<usize> = a.records.iter().map(|r| r.trial).collect();
        let mut sorted = trials.clone();
        sorted.sort_unstable();
        assert_eq!(trials, sorted);
        for record in &a.records {
            assert_f1_bounds(record);
        }
    }

    fn assert_f1_bounds(record: &TrialRecord) {
        assert_eq!(record.f1.len(), 3);
        for &f in &record.f1 {
            assert!((0.0..=1.0).contains(&f));
        }
        assert!(record.nmse >= 0.0);
    }

    #[test]
    fn experiment_is_independent_of_thread_count() {
        let config = small_config();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = single.install(|| run_experiment(&config)).unwrap();
        let b = quad.install(|| run_experiment(&config)).unwrap();
        assert_eq!(normalize(&a), normalize(&b));
    }

    #[test]
    fn experiment_regenerates_clique_free_complexes() {
        // Sparse 4-vertex graphs frequently have no 3-clique; the retry loop
        // must still produce a full set of records.
        let config = ExperimentConfig {
            vertex_counts: vec![4],
            fill_fractions: vec![1.0],
            edge_probability: 0.45,
            trials: 3,
            samples: 200,
            ..ExperimentConfig::with_base_seed(17)
        };
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.records.len(), 3);
        assert!(report.failures.is_empty());
    }

    #[test]
    fn summaries_and_plot_files_have_the_counting_contract() {
        let config = ExperimentConfig {
            trials: 1,
            ..small_config()
        };
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.summaries.len(), 3); // one per threshold

        let dir = tempfile::tempdir().unwrap();
        let (trials_path, summary_path) = emit_plot_data(&report, dir.path()).unwrap();
        let trials = std::fs::read_to_string(&trials_path).unwrap();
        let summary = std::fs::read_to_string(&summary_path).unwrap();
        assert_eq!(trials.lines().count(), 1 + 3); // header + one row per threshold
        assert_eq!(summary.lines().count(), 1 + 3);

        // Quartiles of a single value all equal that value.
        for s in &report.summaries {
            assert_eq!(s.f1_q1, s.f1_median);
            assert_eq!(s.f1_median, s.f1_q3);
            assert_eq!(s.nmse_q1, s.nmse_q3);
        }

        // Round-trip: parsed rows reproduce the in-memory values exactly.
        let mut reader = csv::Reader::from_path(&summary_path).unwrap();
        for (row, s) in reader.records().zip(&report.summaries) {
            let row = row.unwrap();
            assert_eq!(row[0].parse::<usize>().unwrap(), s.n_vertices);
            assert_eq!(row[2].parse::<f64>().unwrap(), s.threshold);
            assert_eq!(row[3].parse::<f64>().unwrap(), s.f1_median);
            assert_eq!(row[6].parse::<f64>().unwrap(), s.nmse_median);
        }
    }

    #[test]
    fn quartiles_interpolate_linearly() {
        let (q1, median, q3) = quartiles(&[4.0, 1.0, 3.0, 2.0]);
        assert_abs_diff_eq!(q1, 1.75, epsilon = 1e-15);
        assert_abs_diff_eq!(median, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(q3, 3.25, epsilon = 1e-15);
        let (q1, median, q3) = quartiles(&[5.0]);
        assert_eq!((q1, median, q3), (5.0, 5.0, 5.0));
    }

    #[test]
    fn emit_rejects_empty_reports() {
        let config = small_config();
        let report = ExperimentReport {
            config,
            records: vec![],
            failures: vec![],
            summaries: vec![],
            meta: None,
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_plot_data(&report, dir.path()).is_err());
    }

    #[test]
    fn config_json_round_trip_applies_defaults() {
        let json = r#"{"base_seed": 42}"#;
        let config: ExperimentConfig = serde_json::from_str(json).unwrap();
        assert_eq!(config, ExperimentConfig::with_base_seed(42));
        let full = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&full).unwrap();
        assert_eq!(back, config);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"base_seed":1,"bogus":2}"#).is_err());
    }
}
