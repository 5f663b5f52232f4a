//! File formats for every artifact the tools exchange: complexes, model
//! parameters, sample matrices, inference results, experiment configs and
//! reports. JSON for structured data (with an optional `meta` provenance
//! object), CSV for bulk numerics (with `#` comment lines for provenance).

use std::collections::BTreeMap;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, SgmError};
use crate::evaluation::{ExperimentConfig, ExperimentReport};
use crate::inference::InferenceResult;
use crate::model::{PrecisionScope, SampleMatrix, SgmParams};
use crate::simplicial::SimplicialComplex;

fn format_error(path: &Path, message: impl Into<String>) -> SgmError {
    SgmError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| format_error(path, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| format_error(path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| format_error(path, e.to_string()))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComplexFile {
    n_vertices: usize,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    triangle_flags: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<Value>,
}

/// Writes a complex (and optionally its fill flags) as JSON. Simplices are
/// stored in the canonical order the complex already maintains.
pub fn save_complex(
    path: &Path,
    complex: &SimplicialComplex,
    flags: Option<&[bool]>,
    meta: Option<&Value>,
) -> Result<()> {
    if let Some(flags) = flags {
        if flags.len() != complex.n_triangles() {
            return Err(SgmError::DimensionMismatch {
                expected: complex.n_triangles(),
                got: flags.len(),
            });
        }
    }
    write_json(
        path,
        &ComplexFile {
            n_vertices: complex.n_vertices(),
            edges: complex.edges().to_vec(),
            triangles: complex.triangles().to_vec(),
            triangle_flags: flags.map(<[bool]>::to_vec),
            meta: meta.cloned(),
        },
    )
}

/// Reads a complex file. Simplex lists must already be in canonical form
/// (each simplex ascending, lists lexicographically sorted) so that the
/// optional flag vector stays aligned with the triangle order.
pub fn load_complex(path: &Path) -> Result<(SimplicialComplex, Option<Vec<bool>>)> {
    let file: ComplexFile = read_json(path)?;
    if !is_canonical(&file.edges) || !is_canonical(&file.triangles) {
        return Err(format_error(
            path,
            "simplices must be ascending within each entry and sorted lexicographically",
        ));
    }
    if let Some(flags) = &file.triangle_flags {
        if flags.len() != file.triangles.len() {
            return Err(format_error(
                path,
                format!(
                    "triangle_flags has {} entries for {} triangles",
                    flags.len(),
                    file.triangles.len()
                ),
            ));
        }
    }
    let complex = SimplicialComplex::new(file.n_vertices, file.edges, file.triangles)?;
    Ok((complex, file.triangle_flags))
}

fn is_canonical<const N: usize>(simplices: &[[usize; N]]) -> bool {
    simplices.iter().all(|s| s.windows(2).all(|w| w[0] < w[1]))
        && simplices.windows(2).all(|w| w[0] < w[1])
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    k: f64,
    #[serde(rename = "d_V")]
    d_v: Vec<f64>,
    #[serde(rename = "d_T")]
    d_t: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<Value>,
}

pub fn save_params(path: &Path, params: &SgmParams, meta: Option<&Value>) -> Result<()> {
    write_json(
        path,
        &ParamsFile {
            k: params.k,
            d_v: params.d_v.iter().copied().collect(),
            d_t: params.d_t.iter().copied().collect(),
            meta: meta.cloned(),
        },
    )
}

pub fn load_params(path: &Path) -> Result<SgmParams> {
    let file: ParamsFile = read_json(path)?;
    Ok(SgmParams {
        d_v: DVector::from_vec(file.d_v),
        d_t: DVector::from_vec(file.d_t),
        k: file.k,
    })
}

/// Writes a sample matrix as CSV: optional `#`-prefixed provenance lines,
/// then a header naming each column (`e0,e1,...` for edge-only data,
/// `v*,e*,t*` blocks for full-model draws), then one row per sample.
pub fn save_samples(path: &Path, samples: &SampleMatrix, comments: &[String]) -> Result<()> {
    let header = match samples.scope {
        PrecisionScope::Edge { n_edges } => column_labels(&[('e', n_edges)]),
        PrecisionScope::Full {
            n_vertices,
            n_edges,
            n_triangles,
        } => column_labels(&[('v', n_vertices), ('e', n_edges), ('t', n_triangles)]),
        PrecisionScope::Subset => {
            return Err(SgmError::InvalidInput(
                "subset-scoped samples have no column naming scheme".into(),
            ))
        }
    };
    if header.len() != samples.data.ncols() {
        return Err(SgmError::DimensionMismatch {
            expected: header.len(),
            got: samples.data.ncols(),
        });
    }

    let file = std::fs::File::create(path).map_err(|e| format_error(path, e.to_string()))?;
    let mut raw = BufWriter::new(file);
    for comment in comments {
        writeln!(raw, "# {comment}")?;
    }
    let mut writer = csv::Writer::from_writer(raw);
    writer.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..samples.data.nrows() {
        row.clear();
        row.extend(samples.data.row(i).iter().map(|v| v.to_string()));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

fn column_labels(blocks: &[(char, usize)]) -> Vec<String> {
    blocks
        .iter()
        .flat_map(|&(prefix, count)| (0..count).map(move |i| format!("{prefix}{i}")))
        .collect()
}

/// Reads a sample CSV, skipping `#` comment lines. The scope is recovered
/// from the header: pure `e*` columns give edge-scoped data, `v*,e*,t*`
/// blocks give full-model data.
pub fn load_samples(path: &Path) -> Result<SampleMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| format_error(path, e.to_string()))?;
    let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#'));
    let header_line = lines
        .next()
        .ok_or_else(|| format_error(path, "missing header row"))?;
    let header: Vec<&str> = header_line.split(',').map(str::trim).collect();
    let scope = parse_scope(&header).ok_or_else(|| {
        format_error(
            path,
            "header must be e0..e{n} or contiguous v*,e*,t* blocks in that order",
        )
    })?;

    let n_cols = header.len();
    let mut values: Vec<f64> = Vec::new();
    let mut n_rows = 0;
    for (row_index, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(format_error(
                path,
                format!(
                    "row {} has {} fields, expected {n_cols}",
                    row_index + 2,
                    fields.len()
                ),
            ));
        }
        for field in fields {
            let value: f64 = field.trim().parse().map_err(|_| {
                format_error(
                    path,
                    format!("row {}: invalid float {field:?}", row_index + 2),
                )
            })?;
            values.push(value);
        }
        n_rows += 1;
    }
    let data = DMatrix::from_row_iterator(n_rows, n_cols, values);
    Ok(SampleMatrix { data, scope })
}

fn parse_scope(header: &[&str]) -> Option<PrecisionScope> {
    let counts = contiguous_blocks(header)?;
    match counts.as_slice() {
        [('e', n_edges)] => Some(PrecisionScope::Edge { n_edges: *n_edges }),
        [('v', n_vertices), ('e', n_edges)] => Some(PrecisionScope::Full {
            n_vertices: *n_vertices,
            n_edges: *n_edges,
            n_triangles: 0,
        }),
        [('v', n_vertices), ('e', n_edges), ('t', n_triangles)] => Some(PrecisionScope::Full {
            n_vertices: *n_vertices,
            n_edges: *n_edges,
            n_triangles: *n_triangles,
        }),
        _ => None,
    }
}

/// Groups `v3`-style labels into `(prefix, count)` runs, requiring indices
/// to count up from zero within each run.
fn contiguous_blocks(header: &[&str]) -> Option<Vec<(char, usize)>> {
    let mut blocks: Vec<(char, usize)> = Vec::new();
    for label in header {
        let mut chars = label.chars();
        let prefix = chars.next()?;
        let index: usize = chars.as_str().parse().ok()?;
        match blocks.last_mut() {
            Some((last, count)) if *last == prefix => {
                if index != *count {
                    return None;
                }
                *count += 1;
            }
            _ => {
                if index != 0 {
                    return None;
                }
                blocks.push((prefix, 1));
            }
        }
    }
    (!blocks.is_empty()).then_some(blocks)
}

/// On-disk form of an inference result. Thresholds appear as string keys of
/// `active_triangles` (e.g. `"0.05"`), matching their shortest decimal form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredResult {
    pub k_hat: f64,
    #[serde(rename = "d_V_hat")]
    pub d_v_hat: Vec<f64>,
    #[serde(rename = "d_T_hat")]
    pub d_t_hat: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub active_triangles: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

impl StoredResult {
    pub fn from_result(result: &InferenceResult, meta: Option<&Value>) -> Self {
        Self {
            k_hat: result.k_hat,
            d_v_hat: result.d_v_hat.iter().copied().collect(),
            d_t_hat: result.d_t_hat.iter().copied().collect(),
            objective_trace: result.objective_trace.clone(),
            converged: result.converged,
            iterations: result.iterations,
            active_triangles: result
                .active_triangles
                .iter()
                .map(|(threshold, active)| (threshold.to_string(), active.clone()))
                .collect(),
            meta: meta.cloned(),
        }
    }

    /// The stored point estimate as model parameters.
    pub fn params(&self) -> SgmParams {
        SgmParams {
            d_v: DVector::from_vec(self.d_v_hat.clone()),
            d_t: DVector::from_vec(self.d_t_hat.clone()),
            k: self.k_hat,
        }
    }
}

pub fn save_result(path: &Path, result: &InferenceResult, meta: Option<&Value>) -> Result<()> {
    write_json(path, &StoredResult::from_result(result, meta))
}

pub fn load_result(path: &Path) -> Result<StoredResult> {
    read_json(path)
}

pub fn load_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = read_json(path)?;
    config.validate()?;
    Ok(config)
}

pub fn save_experiment_config(path: &Path, config: &ExperimentConfig) -> Result<()> {
    write_json(path, config)
}

pub fn save_report(path: &Path, report: &ExperimentReport) -> Result<()> {
    write_json(path, report)
}

pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::run_experiment;
    use crate::inference::InferenceOptions;
    use crate::model::{assemble_full_precision, sample};
    use nalgebra::DVector;

    fn sample_complex() -> (SimplicialComplex, Vec<bool>) {
        SimplicialComplex::random(7, 0.6, 0.5, 3).unwrap()
    }

    #[test]
    fn complex_round_trip_with_flags_and_meta() {
        let (complex, flags) = sample_complex();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("complex.json");
        let meta = serde_json::json!({"tool": "test", "seed": 3});
        save_complex(&path, &complex, Some(&flags), Some(&meta)).unwrap();
        let (loaded, loaded_flags) = load_complex(&path).unwrap();
        assert_eq!(loaded, complex);
        assert_eq!(loaded_flags.as_deref(), Some(flags.as_slice()));

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"meta\""));
        assert!(text.contains("\"n_vertices\""));
    }

    #[test]
    fn complex_load_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");

        std::fs::write(&path, r#"{"n_vertices":3,"edges":[[1,0]],"triangles":[]}"#).unwrap();
        assert!(matches!(load_complex(&path), Err(SgmError::Format { .. })));

        std::fs::write(
            &path,
            r#"{"n_vertices":3,"edges":[[0,2],[0,1]],"triangles":[]}"#,
        )
        .unwrap();
        assert!(matches!(load_complex(&path), Err(SgmError::Format { .. })));

        std::fs::write(
            &path,
            r#"{"n_vertices":3,"edges":[[0,1]],"triangles":[],"triangle_flags":[true]}"#,
        )
        .unwrap();
        assert!(matches!(load_complex(&path), Err(SgmError::Format { .. })));

        std::fs::write(
            &path,
            r#"{"n_vertices":3,"edges":[],"triangles":[],"bogus":1}"#,
        )
        .unwrap();
        assert!(matches!(load_complex(&path), Err(SgmError::Format { .. })));
    }

    #[test]
    fn params_round_trip_uses_spec_key_names() {
        let params = SgmParams {
            d_v: DVector::from_vec(vec![0.25, 0.5]),
            d_t: DVector::from_vec(vec![0.75]),
            k: 3.5,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        save_params(&path, &params, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"d_V\"") && text.contains("\"d_T\"") && text.contains("\"k\""));
        assert_eq!(load_params(&path).unwrap(), params);
    }

    #[test]
    fn edge_samples_round_trip_with_comments() {
        let samples = SampleMatrix {
            data: DMatrix::from_row_slice(2, 3, &[1.5, -2.25, 0.125, 4.0, 5.5, -6.75]),
            scope: PrecisionScope::Edge { n_edges: 3 },
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        save_samples(&path, &samples, &["made by a test".into(), "seed 1".into()]).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# made by a test\n# seed 1\ne0,e1,e2\n"));
        let loaded = load_samples(&path).unwrap();
        assert_eq!(loaded, samples);
    }

    #[test]
    fn full_samples_round_trip_preserves_scope_and_values() {
        let (complex, flags) = sample_complex();
        let truth =
            crate::evaluation::generate_ground_truth(&complex, &flags, [0.2, 1.0], 1.5, 9).unwrap();
        let omega = assemble_full_precision(&complex, &truth).unwrap();
        let draws = sample(&omega, 5, 10).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("full.csv");
        save_samples(&path, &draws, &[]).unwrap();
        let loaded = load_samples(&path).unwrap();
        assert_eq!(loaded.scope, draws.scope);
        // Shortest-round-trip float formatting reproduces values exactly.
        assert_eq!(loaded.data, draws.data);
    }

    #[test]
    fn sample_load_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");

        std::fs::write(&path, "e0,e2\n1.0,2.0\n").unwrap();
        assert!(matches!(load_samples(&path), Err(SgmError::Format { .. })));

        std::fs::write(&path, "x0,x1\n1.0,2.0\n").unwrap();
        assert!(matches!(load_samples(&path), Err(SgmError::Format { .. })));

        std::fs::write(&path, "e0,e1\n1.0\n").unwrap();
        assert!(matches!(load_samples(&path), Err(SgmError::Format { .. })));

        std::fs::write(&path, "e0,e1\n1.0,oops\n").unwrap();
        assert!(matches!(load_samples(&path), Err(SgmError::Format { .. })));

        std::fs::write(&path, "# only a comment\n").unwrap();
        assert!(matches!(load_samples(&path), Err(SgmError::Format { .. })));
    }

    #[test]
    fn result_round_trip_keys_thresholds_as_strings() {
        let (complex, _) = sample_complex();
        let truth = crate::evaluation::generate_ground_truth(
            &complex,
            &vec![true; complex.n_triangles()],
            [0.2, 1.0],
            1.5,
            4,
        )
        .unwrap();
        let omega = assemble_full_precision(&complex, &truth).unwrap();
        let draws = sample(&omega, 400, 5).unwrap();
        let result =
            crate::inference::infer_from_samples(&draws, &complex, &InferenceOptions::default())
                .unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("result.json");
        save_result(&path, &result, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for key in ["\"k_hat\"", "\"d_V_hat\"", "\"d_T_hat\"", "\"0.05\""] {
            assert!(text.contains(key), "missing {key}");
        }
        let stored = load_result(&path).unwrap();
        assert_eq!(stored.k_hat, result.k_hat);
        assert_eq!(stored.iterations, result.iterations);
        assert_eq!(stored.active_triangles.len(), 3);
        for (threshold, active) in &result.active_triangles {
            assert_eq!(stored.active_triangles[&threshold.to_string()], *active);
        }
    }

    #[test]
    fn config_and_report_round_trip() {
        let config = ExperimentConfig {
            vertex_counts: vec![5],
            fill_fractions: vec![0.5],
            edge_probability: 0.6,
            trials: 1,
            samples: 200,
            ..ExperimentConfig::with_base_seed(11)
        };
        let report = run_experiment(&config).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("config.json");
        save_experiment_config(&config_path, &config).unwrap();
        assert_eq!(load_experiment_config(&config_path).unwrap(), config);

        let report_path = dir.path().join("report.json");
        save_report(&report_path, &report).unwrap();
        assert_eq!(load_report(&report_path).unwrap(), report);
    }

    #[test]
    fn config_load_validates_contents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"base_seed": 1, "trials": 0}"#).unwrap();
        assert!(load_experiment_config(&path).is_err());
    }
}
