//! Command-line front end. Every subcommand reads and writes the shared file
//! formats, embeds tool-version provenance in its outputs, and prints the
//! resolved seed whenever randomness is involved. Exit codes: 0 on success,
//! 1 for usage errors, 2 for runtime failures.

use std::error::Error;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rand::Rng;
use serde_json::{json, Value};
use sgm_core::io;
use sgm_core::model::{assemble_full_precision, sample};
use sgm_core::{
    emit_plot_data, f1_score, generate_ground_truth, infer_from_samples, nmse, run_experiment,
    ExperimentReport, InferenceOptions, SimplicialComplex,
};

const TOOL: &str = concat!("sgm ", env!("CARGO_PKG_VERSION"));

type RunResult = Result<(), Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "sgm",
    version,
    about = "Gaussian models on 2-dimensional simplicial complexes: \
             generation, sampling, inference, evaluation, experiment sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random complex plus ground-truth parameters.
    ///
    /// The complex (with fill flags) goes to --out; the parameters go to a
    /// sibling file with extension `.params.json`.
    Generate {
        /// Number of vertices.
        #[arg(long)]
        vertices: usize,
        /// Independent probability of each edge.
        #[arg(long, value_name = "Q")]
        edge_prob: f64,
        /// Fraction of 3-cliques filled as triangles.
        #[arg(long, value_name = "P")]
        fill: f64,
        /// RNG seed; drawn at random and printed when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Complex output path (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw joint Gaussian samples and keep the edge block as CSV.
    Sample {
        /// Complex file (JSON).
        #[arg(long)]
        complex: PathBuf,
        /// Model parameters (JSON).
        #[arg(long)]
        params: PathBuf,
        /// Number of sample vectors.
        #[arg(long, value_name = "M")]
        samples: usize,
        /// RNG seed; drawn at random and printed when omitted.
        #[arg(long)]
        seed: Option<u64>,
        /// Samples output path (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover parameters and active triangles from edge observations.
    ///
    /// Candidate triangles are the 3-cliques of the complex's edge graph; the
    /// result reports the surviving candidates at each pruning threshold.
    Infer {
        /// Complex file (JSON); only its edges constrain the model.
        #[arg(long)]
        complex: PathBuf,
        /// Edge observations (CSV).
        #[arg(long)]
        data: PathBuf,
        /// Result output path (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Relative objective-change convergence tolerance.
        #[arg(long, value_name = "TOL")]
        tol: Option<f64>,
        /// Cap on block-coordinate sweeps.
        #[arg(long, value_name = "N")]
        max_iters: Option<usize>,
        /// Comma-separated pruning thresholds for active-triangle reporting.
        #[arg(long, value_delimiter = ',', value_name = "T1,T2,...")]
        thresholds: Option<Vec<f64>>,
    },
    /// Score an inference result against ground-truth parameters.
    Eval {
        /// Inference result (JSON).
        #[arg(long)]
        result: PathBuf,
        /// Ground-truth parameters (JSON).
        #[arg(long)]
        truth: PathBuf,
        /// Metrics output path (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full detection/recovery sweep described by a JSON config.
    ///
    /// Writes report.json, trials.csv and summary.csv into --out-dir. The
    /// SGM_THREADS environment variable caps trial parallelism.
    Experiment {
        /// Experiment configuration (JSON); base_seed is mandatory.
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Re-emit plotting CSVs from a stored experiment report.
    PlotData {
        /// Report file, or a directory containing report.json.
        #[arg(long)]
        report: PathBuf,
        /// Summary CSV output path; trials.csv lands beside it.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses and dispatches one invocation, returning the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn dispatch(command: Command) -> RunResult {
    match command {
        Command::Generate {
            vertices,
            edge_prob,
            fill,
            seed,
            out,
        } => generate(vertices, edge_prob, fill, seed, &out),
        Command::Sample {
            complex,
            params,
            samples,
            seed,
            out,
        } => draw_samples(&complex, &params, samples, seed, &out),
        Command::Infer {
            complex,
            data,
            out,
            tol,
            max_iters,
            thresholds,
        } => run_inference(&complex, &data, &out, tol, max_iters, thresholds),
        Command::Eval { result, truth, out } => evaluate(&result, &truth, &out),
        Command::Experiment { config, out_dir } => experiment(&config, &out_dir),
        Command::PlotData { report, out } => plot_data(&report, &out),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    let seed = seed.unwrap_or_else(|| rand::rng().random());
    println!("resolved seed: {seed}");
    seed
}

fn generate(
    vertices: usize,
    edge_prob: f64,
    fill: f64,
    seed: Option<u64>,
    out: &Path,
) -> RunResult {
    let seed = resolve_seed(seed);
    let (complex, flags) = SimplicialComplex::random(vertices, edge_prob, fill, seed)?;
    let truth = generate_ground_truth(&complex, &flags, [0.2, 1.0], 1.5, seed ^ 0x02)?;

    let config = json!({
        "vertices": vertices,
        "edge_prob": edge_prob,
        "fill": fill,
        "seed": seed,
    });
    let meta = json!({ "tool": TOOL, "config": config });
    io::save_complex(out, &complex, Some(&flags), Some(&meta))?;

    let params_path = out.with_extension("params.json");
    let params_meta = json!({
        "tool": TOOL,
        "config": config,
        "complex": out.display().to_string(),
    });
    io::save_params(&params_path, &truth, Some(&params_meta))?;

    println!(
        "wrote {} ({} vertices, {} edges, {} of {} candidate triangles filled) and {}",
        out.display(),
        complex.n_vertices(),
        complex.n_edges(),
        flags.iter().filter(|&&f| f).count(),
        complex.n_triangles(),
        params_path.display(),
    );
    Ok(())
}

fn draw_samples(
    complex_path: &Path,
    params_path: &Path,
    samples: usize,
    seed: Option<u64>,
    out: &Path,
) -> RunResult {
    let seed = resolve_seed(seed);
    let (complex, _) = io::load_complex(complex_path)?;
    let params = io::load_params(params_path)?;
    let omega = assemble_full_precision(&complex, &params)?;
    let draws = sample(&omega, samples, seed)?;
    let edge = draws.edge_block()?;

    let comments = vec![
        format!("tool: {TOOL}"),
        format!("seed: {seed}"),
        format!("complex: {}", complex_path.display()),
        format!("params: {}", params_path.display()),
        format!("samples: {samples}"),
    ];
    io::save_samples(out, &edge, &comments)?;
    println!(
        "wrote {} ({} rows, {} edge columns)",
        out.display(),
        samples,
        complex.n_edges()
    );
    Ok(())
}

fn run_inference(
    complex_path: &Path,
    data_path: &Path,
    out: &Path,
    tol: Option<f64>,
    max_iters: Option<usize>,
    thresholds: Option<Vec<f64>>,
) -> RunResult {
    let (complex, _) = io::load_complex(complex_path)?;
    let data = io::load_samples(data_path)?;

    let mut opts = InferenceOptions::default();
    if let Some(tol) = tol {
        opts.objective_tolerance = tol;
    }
    if let Some(iters) = max_iters {
        opts.max_outer_iterations = iters;
    }
    if let Some(mut list) = thresholds {
        list.sort_by(f64::total_cmp);
        list.dedup();
        opts.thresholds = list;
    }

    let result = infer_from_samples(&data, &complex, &opts)?;
    let meta = json!({
        "tool": TOOL,
        "complex": complex_path.display().to_string(),
        "data": data_path.display().to_string(),
        "options": {
            "objective_tolerance": opts.objective_tolerance,
            "kkt_tolerance": opts.kkt_tolerance,
            "max_outer_iterations": opts.max_outer_iterations,
            "max_inner_iterations": opts.max_inner_iterations,
            "thresholds": opts.thresholds,
            "init_scale": opts.init_scale,
            "d_v_floor": opts.d_v_floor,
        },
    });
    io::save_result(out, &result, Some(&meta))?;
    println!(
        "wrote {} (converged: {}, sweeps: {}, k_hat: {:.6})",
        out.display(),
        result.converged,
        result.iterations,
        result.k_hat,
    );
    Ok(())
}

fn evaluate(result_path: &Path, truth_path: &Path, out: &Path) -> RunResult {
    let stored = io::load_result(result_path)?;
    let truth = io::load_params(truth_path)?;
    let score = nmse(&stored.params(), &truth)?;

    let truth_active: Vec<usize> = truth
        .d_t
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d > 0.0)
        .map(|(t, _)| t)
        .collect();
    let mut f1 = serde_json::Map::new();
    for (threshold, active) in &stored.active_triangles {
        f1.insert(threshold.clone(), json!(f1_score(active, &truth_active)));
    }

    let metrics = json!({
        "nmse": score,
        "f1": f1,
        "meta": {
            "tool": TOOL,
            "result": result_path.display().to_string(),
            "truth": truth_path.display().to_string(),
        },
    });
    write_pretty_json(out, &metrics)?;
    println!("wrote {} (nmse: {score:.6e})", out.display());
    Ok(())
}

fn experiment(config_path: &Path, out_dir: &Path) -> RunResult {
    let config = io::load_experiment_config(config_path)?;
    println!("resolved base seed: {}", config.base_seed);

    let mut report = match sweep_threads()? {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()?;
            pool.install(|| run_experiment(&config))?
        }
        None => run_experiment(&config)?,
    };
    report.meta = Some(json!({ "tool": TOOL }));
    if !report.failures.is_empty() {
        eprintln!(
            "{} of {} trials failed; see report.json",
            report.failures.len(),
            { report.failures.len() + report.records.len() }
        );
    }

    std::fs::create_dir_all(out_dir).map_err(|e| at_path(out_dir, e))?;
    let report_path = out_dir.join("report.json");
    io::save_report(&report_path, &report)?;
    let (trials_path, summary_path) = emit_plot_data(&report, out_dir)?;
    let comments = provenance_comments(&report);
    prepend_comments(&trials_path, &comments)?;
    prepend_comments(&summary_path, &comments)?;

    println!(
        "wrote {}, {} and {}",
        report_path.display(),
        trials_path.display(),
        summary_path.display(),
    );
    Ok(())
}

fn plot_data(report_arg: &Path, out: &Path) -> RunResult {
    let report_path = if report_arg.is_dir() {
        report_arg.join("report.json")
    } else {
        report_arg.to_owned()
    };
    let report = io::load_report(&report_path)?;

    let dir = match out.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.to_owned(),
        _ => PathBuf::from("."),
    };
    let (trials_path, summary_path) = emit_plot_data(&report, &dir)?;
    let final_summary = if out == summary_path.as_path() {
        summary_path
    } else {
        std::fs::rename(&summary_path, out).map_err(|e| at_path(out, e))?;
        out.to_owned()
    };
    let comments = provenance_comments(&report);
    prepend_comments(&trials_path, &comments)?;
    prepend_comments(&final_summary, &comments)?;

    println!(
        "wrote {} and {}",
        final_summary.display(),
        trials_path.display()
    );
    Ok(())
}

/// Optional cap on experiment parallelism, from SGM_THREADS.
fn sweep_threads() -> Result<Option<usize>, Box<dyn Error>> {
    match std::env::var("SGM_THREADS") {
        Ok(raw) => {
            let threads: usize = raw
                .trim()
                .parse()
                .map_err(|_| format!("SGM_THREADS must be a positive integer, got {raw:?}"))?;
            if threads == 0 {
                return Err("SGM_THREADS must be a positive integer, got 0".into());
            }
            Ok(Some(threads))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(format!("SGM_THREADS: {e}").into()),
    }
}

fn provenance_comments(report: &ExperimentReport) -> Vec<String> {
    vec![
        format!("tool: {TOOL}"),
        format!(
            "config: {}",
            serde_json::to_string(&report.config).unwrap_or_default()
        ),
    ]
}

/// Inserts `#`-prefixed provenance lines above an existing CSV body.
fn prepend_comments(path: &Path, comments: &[String]) -> RunResult {
    let body = std::fs::read_to_string(path).map_err(|e| at_path(path, e))?;
    let mut text = String::new();
    for comment in comments {
        text.push_str("# ");
        text.push_str(comment);
        text.push('\n');
    }
    text.push_str(&body);
    std::fs::write(path, text).map_err(|e| at_path(path, e))?;
    Ok(())
}

fn write_pretty_json(path: &Path, value: &Value) -> RunResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| at_path(path, e))?;
    Ok(())
}

fn at_path(path: &Path, err: std::io::Error) -> Box<dyn Error> {
    format!("{}: {err}", path.display()).into()
}
