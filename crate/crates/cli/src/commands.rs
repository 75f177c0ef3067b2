use std::collections::BTreeMap;
use std::time::Instant;

use repsel::eval::{outlier_f1, BinaryClassificationReport};
use repsel::io::{read_data, write_data, write_matrix};
use repsel::kernel::median_heuristic_gamma;
use repsel::selection::{detect_outliers, FlaggedSample, OutlierMode};
use repsel::sketch::{SketchIteration, SKETCH_ALGORITHM};
use repsel::solver::solve_full;
use repsel::synthdata::{self, GeneratorStep, LabeledDataset};
use repsel::{
    build_gram, lambda_critical, select, solve_sketched, Error, KernelMatrix, KernelSpec,
    RepresentationMatrix, SelectionConfig, SelectionResult, SketchConfig, SolveDiagnostics,
    SolverConfig,
};
use serde::Serialize;

use crate::args::{
    BenchArgs, DatasetChoice, GramArgs, InputArgs, KernelArgs, KernelChoice, OutlierChoice,
    OutliersArgs, SelectArgs, SolveArgs, SynthArgs,
};
use crate::report::{emit_json, print_warnings, read_with_digest, sha256_hex, write_bytes, VERSION};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct KernelInfo {
    pub kind: &'static str,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_source: Option<&'static str>,
    pub psd_repair: bool,
}

struct Loaded {
    kernel: KernelMatrix,
    labels: Option<Vec<i64>>,
    info: KernelInfo,
    digest: String,
}

fn psd_repair_enabled(args: &KernelArgs, precomputed: bool) -> bool {
    if args.psd_repair {
        true
    } else if args.no_psd_repair {
        false
    } else {
        precomputed
    }
}

fn load_kernel(
    path: &std::path::Path,
    labeled: bool,
    args: &KernelArgs,
    precomputed: bool,
) -> Result<Loaded, CliError> {
    let (bytes, digest) = read_with_digest(path)?;
    let csv = read_data(bytes.as_slice(), labeled)?;
    let repair = psd_repair_enabled(args, precomputed);
    let n = csv.data.n_samples();
    if precomputed {
        if csv.data.dim() != n {
            return Err(Error::NotSquare {
                rows: n,
                cols: csv.data.dim(),
            }
            .into());
        }
        let spec = KernelSpec {
            psd_repair: repair,
            ..KernelSpec::precomputed()
        };
        // rows are samples, so the parsed matrix is K transposed
        let values = csv.data.values().transpose().to_owned();
        let kernel = KernelMatrix::from_precomputed(values, &spec)?;
        return Ok(Loaded {
            kernel,
            labels: csv.labels,
            info: KernelInfo {
                kind: "precomputed",
                n,
                gamma: None,
                gamma_source: None,
                psd_repair: repair,
            },
            digest,
        });
    }
    let (base, gamma, source) = match args.kernel {
        KernelChoice::Linear => (KernelSpec::linear(), None, None),
        KernelChoice::Cosine => (KernelSpec::cosine(), None, None),
        KernelChoice::Rbf => {
            let (g, src) = match args.gamma {
                Some(g) => (g, "given"),
                None => {
                    let scale = args.gamma_scale.unwrap_or(crate::args::GAMMA_SCALE);
                    if !(scale > 0.0) || !scale.is_finite() {
                        return Err(CliError::usage("--gamma-scale must be finite and > 0"));
                    }
                    (scale * median_heuristic_gamma(&csv.data), "median_heuristic")
                }
            };
            (KernelSpec::rbf(g), Some(g), Some(src))
        }
        KernelChoice::Precomputed => unreachable!("handled above"),
    };
    let spec = KernelSpec {
        psd_repair: repair,
        ..base
    };
    let kernel = build_gram(&csv.data, &spec)?;
    Ok(Loaded {
        kernel,
        labels: csv.labels,
        info: KernelInfo {
            kind: spec.kind.name(),
            n,
            gamma,
            gamma_source: source,
            psd_repair: repair,
        },
        digest,
    })
}

fn load_input(input: &InputArgs) -> Result<Loaded, CliError> {
    match (&input.input, &input.gram) {
        (_, Some(gram)) => load_kernel(gram, input.labeled, &input.kernel, true),
        (Some(path), None) => load_kernel(
            path,
            input.labeled,
            &input.kernel,
            input.kernel.kernel == KernelChoice::Precomputed,
        ),
        (None, None) => Err(CliError::usage("one of --input or --gram is required")),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SketchSummary {
    pub algorithm: &'static str,
    pub config: SketchConfig,
    pub sampled_indices: Vec<usize>,
    pub history: Vec<SketchIteration>,
}

struct Solved {
    rep: RepresentationMatrix,
    diagnostics: SolveDiagnostics,
    lambda: f64,
    lambda_critical: f64,
    sketch: Option<SketchSummary>,
}

fn run_solver(
    kernel: &KernelMatrix,
    args: &SolveArgs,
    warnings: &mut Vec<String>,
) -> Result<Solved, CliError> {
    let alpha = args.lambda_alpha.unwrap_or(crate::args::LAMBDA_ALPHA);
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(CliError::usage("--lambda-alpha must be finite and > 0"));
    }
    let lambda_crit = lambda_critical(kernel.values())?;
    if alpha <= 1.0 {
        warnings.push(format!(
            "lambda-alpha {alpha} is at or below 1: lambda does not exceed the critical value, so every row is zero"
        ));
    }
    let lambda = alpha * lambda_crit;
    let config = SolverConfig {
        lambda,
        rho: args.rho,
        tol_abs: args.tol_abs,
        tol_rel: args.tol_rel,
        max_iter: args.max_iter,
    };
    let (rep, diagnostics, sketch) = match args.sketch {
        None => {
            let (rep, diag) = solve_full(kernel, &config)?;
            (rep, diag, None)
        }
        Some(spec) => {
            let sk = spec.config(args.seed);
            let out = solve_sketched(kernel, &sk, &config)?;
            warnings.extend(out.state.warnings.iter().cloned());
            let summary = SketchSummary {
                algorithm: SKETCH_ALGORITHM,
                config: sk,
                sampled_indices: out.state.sampled_indices,
                history: out.state.history,
            };
            (out.representation, out.diagnostics, Some(summary))
        }
    };
    if !diagnostics.converged {
        let msg = format!(
            "ADMM stopped at the iteration cap ({}) without meeting the tolerances",
            diagnostics.iterations
        );
        if args.strict {
            return Err(CliError::numerical(msg));
        }
        warnings.push(msg);
    }
    Ok(Solved {
        rep,
        diagnostics,
        lambda,
        lambda_critical: lambda_crit,
        sketch,
    })
}

#[derive(Serialize)]
struct GramReport<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a GramArgs,
    input_digest: String,
    output_digest: String,
    kernel: KernelInfo,
}

pub fn gram(args: &GramArgs) -> Result<(), CliError> {
    let loaded = load_kernel(
        &args.input,
        args.labeled,
        &args.kernel,
        args.kernel.kernel == KernelChoice::Precomputed,
    )?;
    let mut buf = Vec::new();
    write_matrix(&mut buf, loaded.kernel.values())?;
    write_bytes(&args.output, &buf)?;
    emit_json(
        args.report.as_deref(),
        &GramReport {
            version: VERSION,
            command: "gram",
            config: args,
            input_digest: loaded.digest,
            output_digest: format!("sha256:{}", sha256_hex(&buf)),
            kernel: loaded.info,
        },
    )
}

#[derive(Serialize)]
struct SelectReport<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a SelectArgs,
    input_digest: String,
    kernel: KernelInfo,
    lambda: f64,
    lambda_critical: f64,
    diagnostics: SolveDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    sketch: Option<SketchSummary>,
    selection: SelectionResult,
    warnings: Vec<String>,
}

pub fn select_cmd(args: &SelectArgs) -> Result<(), CliError> {
    let loaded = load_input(&args.input)?;
    let mut warnings = Vec::new();
    let solved = run_solver(&loaded.kernel, &args.solve, &mut warnings)?;
    let config = SelectionConfig {
        row_tol: args.row_tol,
        diversity_tau: args.tau,
        outlier_theta: args.theta,
        max_k: args.max_k,
    };
    let selection = select(&loaded.kernel, &solved.rep, &config)?;
    if selection.representatives.is_empty() {
        warnings.push("no representatives selected".to_string());
    }
    print_warnings(&warnings);
    emit_json(
        args.output.as_deref(),
        &SelectReport {
            version: VERSION,
            command: "select",
            config: args,
            input_digest: loaded.digest,
            kernel: loaded.info,
            lambda: solved.lambda,
            lambda_critical: solved.lambda_critical,
            diagnostics: solved.diagnostics,
            sketch: solved.sketch,
            selection,
            warnings,
        },
    )
}

#[derive(Serialize)]
struct OutliersReport<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a OutliersArgs,
    input_digest: String,
    kernel: KernelInfo,
    lambda: f64,
    lambda_critical: f64,
    diagnostics: SolveDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    sketch: Option<SketchSummary>,
    /// Samples that received a decision: all of them, or the final sketch.
    evaluated: usize,
    flagged: Vec<FlaggedSample>,
    scores: BTreeMap<usize, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f1: Option<BinaryClassificationReport>,
    warnings: Vec<String>,
}

pub fn outliers(args: &OutliersArgs) -> Result<(), CliError> {
    let loaded = load_input(&args.input)?;
    let mut warnings = Vec::new();
    let solved = run_solver(&loaded.kernel, &args.solve, &mut warnings)?;
    let mode = args
        .mode
        .unwrap_or(OutlierMode::Threshold(crate::args::OUTLIER_THETA));
    let report = match detect_outliers(&solved.rep, mode) {
        Ok(r) => r,
        Err(Error::NoNonzeroRows) => {
            warnings.push("representation has no nonzero rows; nothing to score".to_string());
            Default::default()
        }
        Err(e) => return Err(e.into()),
    };
    warnings.extend(report.warnings.iter().cloned());
    let universe: Vec<usize> = match &solved.sketch {
        Some(s) => s.sampled_indices.clone(),
        None => (0..loaded.kernel.n()).collect(),
    };
    let f1 = match &loaded.labels {
        Some(labels) => {
            let mut pos = vec![usize::MAX; labels.len()];
            for (k, &i) in universe.iter().enumerate() {
                pos[i] = k;
            }
            let truth: Vec<bool> = universe.iter().map(|&i| labels[i] < 0).collect();
            let predicted: Vec<usize> = report.flagged.iter().map(|f| pos[f.index]).collect();
            Some(outlier_f1(&truth, &predicted)?)
        }
        None => None,
    };
    print_warnings(&warnings);
    emit_json(
        args.output.as_deref(),
        &OutliersReport {
            version: VERSION,
            command: "outliers",
            config: args,
            input_digest: loaded.digest,
            kernel: loaded.info,
            lambda: solved.lambda,
            lambda_critical: solved.lambda_critical,
            diagnostics: solved.diagnostics,
            sketch: solved.sketch,
            evaluated: universe.len(),
            flagged: report.flagged,
            scores: report.scores,
            f1,
            warnings,
        },
    )
}

fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn generate(args: &SynthArgs) -> Result<LabeledDataset, CliError> {
    let seed = args.seed;
    let base = match args.dataset {
        DatasetChoice::Swissroll => synthdata::swiss_roll(args.n1, args.noise, seed)?,
        DatasetChoice::Sphere => synthdata::sphere(args.n1, args.radius, args.noise, seed)?,
        DatasetChoice::Trefoil => synthdata::trefoil(args.n1, args.noise, seed)?,
        DatasetChoice::Clusters => {
            if args.clusters == 0 || args.n1 % args.clusters != 0 {
                return Err(CliError::usage("--n1 must be a positive multiple of --clusters"));
            }
            synthdata::clustered_gaussians(args.clusters, args.n1 / args.clusters, args.separation, 3, seed)?
        }
    };
    let embedded = synthdata::embed_dataset(&base, args.ambient, Some(sub_seed(seed, 1)))?;
    let out_seed = sub_seed(seed, 2);
    Ok(match args.outliers {
        OutlierChoice::Uniform => synthdata::inject_uniform_outliers(&embedded, args.n2, out_seed)?,
        OutlierChoice::Repetitive => synthdata::inject_repetitive_outliers(
            &embedded,
            args.n2,
            args.repeat_fraction,
            out_seed,
        )?,
        OutlierChoice::Structured => {
            synthdata::inject_structured_outliers(&embedded, args.n2, args.rank, out_seed)?
        }
    })
}

#[derive(Serialize)]
struct SynthReport<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a SynthArgs,
    output_digest: String,
    n_samples: usize,
    n_inliers: usize,
    n_outliers: usize,
    steps: Vec<GeneratorStep>,
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let ds = generate(args)?;
    let codes: Vec<i64> = ds.labels.iter().map(|l| l.code()).collect();
    let mut buf = Vec::new();
    write_data(&mut buf, &ds.data, Some(&codes))?;
    write_bytes(&args.output, &buf)?;
    emit_json(
        args.report.as_deref(),
        &SynthReport {
            version: VERSION,
            command: "synth",
            config: args,
            output_digest: format!("sha256:{}", sha256_hex(&buf)),
            n_samples: ds.n_samples(),
            n_inliers: ds.count_inliers(),
            n_outliers: ds.n_samples() - ds.count_inliers(),
            steps: ds.steps,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchSeconds {
    pub gram: f64,
    pub full: f64,
    pub sketched: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub sketch: SketchConfig,
    pub full_iterations: usize,
    pub sketched_iterations: usize,
    pub full_converged: bool,
    pub sketched_converged: bool,
    pub full_objective: f64,
    pub sketched_objective: f64,
    /// Sketched minus full objective on the full problem.
    pub objective_gap: f64,
    /// Wall-clock measurements; the only fields that vary between runs.
    pub seconds: BenchSeconds,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchTimings {
    /// Least-squares slope of log(seconds) against log(n); needs two sizes.
    pub full_exponent: Option<f64>,
    pub sketched_exponent: Option<f64>,
}

#[derive(Serialize)]
struct BenchReport<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a BenchArgs,
    rows: Vec<BenchRow>,
    timings: BenchTimings,
    warnings: Vec<String>,
}

fn loglog_slope(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, t)| ((n as f64).ln(), t.max(1e-9).ln()))
        .collect();
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn bench_row(args: &BenchArgs, n: usize, warnings: &mut Vec<String>) -> Result<BenchRow, CliError> {
    let n2 = n / 2;
    let base = synthdata::swiss_roll(n - n2, 0.0, args.seed)?;
    let embedded = synthdata::embed_dataset(&base, args.ambient, Some(sub_seed(args.seed, 1)))?;
    let ds = synthdata::inject_uniform_outliers(&embedded, n2, sub_seed(args.seed, 2))?;

    let t = Instant::now();
    let gamma = args.gamma_scale * median_heuristic_gamma(&ds.data);
    let kernel = build_gram(&ds.data, &KernelSpec::rbf(gamma))?;
    let gram_secs = t.elapsed().as_secs_f64();

    let config = SolverConfig::new(args.lambda_alpha * lambda_critical(kernel.values())?);
    let t = Instant::now();
    let (_, full) = solve_full(&kernel, &config)?;
    let full_secs = t.elapsed().as_secs_f64();

    let sk = SketchConfig {
        r: args.sketch.r.min(n),
        ..args.sketch.config(args.seed)
    };
    let t = Instant::now();
    let out = solve_sketched(&kernel, &sk, &config)?;
    let sketched_secs = t.elapsed().as_secs_f64();
    warnings.extend(out.state.warnings.iter().map(|w| format!("n = {n}: {w}")));
    if !full.converged || !out.diagnostics.converged {
        warnings.push(format!("n = {n}: a solve hit the iteration cap"));
    }
    Ok(BenchRow {
        n,
        sketch: sk,
        full_iterations: full.iterations,
        sketched_iterations: out.state.history.iter().map(|h| h.solver_iterations).sum(),
        full_converged: full.converged,
        sketched_converged: out.diagnostics.converged,
        full_objective: full.objective,
        sketched_objective: out.diagnostics.objective,
        objective_gap: out.diagnostics.objective - full.objective,
        seconds: BenchSeconds {
            gram: gram_secs,
            full: full_secs,
            sketched: sketched_secs,
        },
    })
}

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    if !(args.lambda_alpha > 0.0) || !(args.gamma_scale > 0.0) {
        return Err(CliError::usage("--lambda-alpha and --gamma-scale must be > 0"));
    }
    let mut warnings = Vec::new();
    let mut rows = Vec::new();
    for &n in &args.sizes.0 {
        rows.push(bench_row(args, n, &mut warnings)?);
    }
    let full: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.seconds.full)).collect();
    let sketched: Vec<(usize, f64)> = rows.iter().map(|r| (r.n, r.seconds.sketched)).collect();
    print_warnings(&warnings);
    emit_json(
        args.output.as_deref(),
        &BenchReport {
            version: VERSION,
            command: "bench",
            config: args,
            timings: BenchTimings {
                full_exponent: loglog_slope(&full),
                sketched_exponent: loglog_slope(&sketched),
            },
            rows,
            warnings,
        },
    )
}
