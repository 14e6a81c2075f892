use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use patdens::config::{Format, RunConfig};
use patdens::deckopt::{
    asymptotic_gap_report, deck_density, lattice_path_svg, optimize_deck, AnnealConfig, DeckProblem, Mode,
};
use patdens::feasibility::{
    analytic_argmax, boundary_csv, c_closed_form, c_numeric, euler_lagrange_residual, extremal_density_1010,
    feasible_interval, xi_root, AscentConfig,
};
use patdens::heisenberg::{first_row_equals_counts, matrix_of_word, minor, minor_scan, GeneratorSpec};
use patdens::limitshape::{
    entropy, one_run_zero, phi_forward, phi_jacobian, phi_jacobian_fd, shape_entropy, solve_limit_shape,
    DensityTargets, ExpPolynomial, Reconstruction,
};
use patdens::measures::{
    density_of_measure, fmt12, measure_of_word, moments_identity_check, round_word, sample_word, wasserstein,
    word_convergence_check, Atom, Cell,
};
use patdens::patterns::{
    block_counts_polynomial, check_relations, count_all, count_pattern, density, independence_rank, BlockSequence,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use patdens::sampler::{calibrate_multipliers, limit_multipliers, mcmc_sample, CalibrationConfig, GibbsSpec};
use patdens::verify::{run_all, table};
use patdens::{BinaryWord, Error, Result, StepMeasure};

/// Subsequence pattern densities in binary words.
#[derive(Parser)]
#[command(name = "patdens", version)]
struct Cli {
    /// `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; format inferred from its extension unless --format is given.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Number of occurrences of a pattern as a subsequence of a word, of
    /// every pattern up to a length (--max-len), or a block polynomial (--blocks).
    Count(CountArgs),
    /// Count divided by binomial(n, m), or densities, moments and entropy of a
    /// step measure given with --measure.
    Density(DensityArgs),
    /// Check the algebraic relations among short pattern counts on a word.
    Relations {
        #[arg(long)]
        word: BinaryWord,
    },
    /// Numeric Jacobian rank of pattern counts as functions of block lengths.
    Independence {
        /// Comma-separated patterns.
        #[arg(long, value_delimiter = ',', required = true)]
        patterns: Vec<BinaryWord>,
        /// Comma-separated block lengths, starting with a block of ones.
        #[arg(long, value_delimiter = ',', conflicts_with = "generic")]
        blocks: Option<Vec<f64>>,
        /// Use this many seeded random block lengths.
        #[arg(long, default_value_t = 8)]
        generic: usize,
        /// Hold the total length fixed.
        #[arg(long)]
        fixed_length: bool,
    },
    /// Wasserstein distance between two words or step measures. With only
    /// one side: its measure, or with --refine the convergence of words to it.
    Wasserstein(WassersteinArgs),
    /// The constant C in rho_tau <= C rho_1^k (1 - rho_1)^l.
    Cvalue {
        #[arg(long)]
        tau: BinaryWord,
        #[arg(long)]
        grid: Option<usize>,
        /// Report the closed form only.
        #[arg(long)]
        closed_form: bool,
        /// Euler-Lagrange residual of the analytic maximizer or of the uniform
        /// measure instead of the optimization.
        #[arg(long, value_enum)]
        el_check: Option<ElCandidate>,
    },
    /// Attainable range of rho_tau at a given rho_1.
    Interval {
        #[arg(long)]
        tau: BinaryWord,
        #[arg(long)]
        rho1: f64,
        #[arg(long)]
        grid: Option<usize>,
        /// For 1010: also build the extremal density (CSV with --out).
        #[arg(long)]
        extremal: bool,
    },
    /// Entropy-maximizing density for rho_1 and rho_{1^i 0} targets.
    Limitshape {
        /// For example "rho1=0.5,rho110=0.3333".
        #[arg(long, required_unless_present = "coeffs", conflicts_with = "coeffs")]
        targets: Option<String>,
        /// Forward map instead: exponent coefficients a_0,...,a_k.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        coeffs: Option<Vec<f64>>,
        #[arg(long)]
        grid: Option<usize>,
        /// Also write an SVG plot of f here.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Metropolis sampler for the exponentially tilted measure on words.
    Sample(SampleArgs),
    /// Arrange a deck to maximize a pattern density.
    Brbr(BrbrArgs),
    /// Matrices of a word under the unitriangular generators of a mask.
    Heisenberg {
        #[arg(long)]
        mask: BinaryWord,
        #[arg(long)]
        word: BinaryWord,
        #[arg(long)]
        check_minors: bool,
        /// Also the upper-right minor of this order.
        #[arg(long)]
        upper_right: Option<usize>,
    },
    /// Run the acceptance suite and print a pass/fail table.
    VerifyAll {
        /// Add wall-clock times to the table.
        #[arg(long)]
        timings: bool,
    },
}

#[derive(Args)]
struct CountArgs {
    #[arg(long, required_unless_present = "max_len")]
    pattern: Option<BinaryWord>,
    #[arg(long, required_unless_present = "blocks")]
    word: Option<BinaryWord>,
    /// Block lengths starting with a block of ones, instead of a word.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["word", "max_len"])]
    blocks: Option<Vec<f64>>,
    /// Count every pattern of length up to this.
    #[arg(long, conflicts_with = "pattern")]
    max_len: Option<usize>,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    pattern: Option<BinaryWord>,
    #[arg(long, conflicts_with = "measure")]
    word: Option<BinaryWord>,
    /// Step measure: "w:v,w:v,..." cells, optionally "|x:m,..." atoms, or JSON.
    #[arg(long)]
    measure: Option<MeasureArg>,
    /// Check the moment identity up to this order.
    #[arg(long, requires = "measure")]
    moments: Option<u32>,
    /// Entropy of the measure.
    #[arg(long, requires = "measure")]
    entropy: bool,
}

#[derive(Args)]
struct WassersteinArgs {
    #[arg(long, conflicts_with = "measure_a", required_unless_present = "measure_a")]
    word_a: Option<BinaryWord>,
    #[arg(long, conflicts_with = "measure_b")]
    word_b: Option<BinaryWord>,
    #[arg(long)]
    measure_a: Option<MeasureArg>,
    #[arg(long)]
    measure_b: Option<MeasureArg>,
    /// Include both measures in JSON output.
    #[arg(long)]
    show_measures: bool,
    /// Word lengths for the convergence check against side a.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["word_b", "measure_b"])]
    refine: Option<Vec<usize>>,
    /// Patterns whose density gaps the convergence check reports.
    #[arg(long, requires = "refine")]
    pattern: Vec<BinaryWord>,
    /// Sample the words i.i.d. from side a instead of rounding its distribution function.
    #[arg(long, requires = "refine")]
    sampled: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ElCandidate {
    Analytic,
    Uniform,
}

#[derive(Clone)]
struct MeasureArg(StepMeasure);

impl std::str::FromStr for MeasureArg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s)
                .map(MeasureArg)
                .map_err(|e| Error::InvalidArgument(format!("measure JSON: {e}")));
        }
        let pairs = |part: &str| -> Result<Vec<(f64, f64)>> {
            part.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| {
                    let (a, b) = t
                        .split_once(':')
                        .ok_or_else(|| Error::InvalidArgument(format!("expected a:b, got {t:?}")))?;
                    let f = |x: &str| {
                        x.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidArgument(format!("not a number: {x:?}")))
                    };
                    Ok((f(a)?, f(b)?))
                })
                .collect()
        };
        let (cells, atoms) = s.split_once('|').unwrap_or((s, ""));
        let cells = pairs(cells)?.into_iter().map(|(w, v)| Cell { w, v }).collect();
        let atoms = pairs(atoms)?.into_iter().map(|(x, m)| Atom { x, m }).collect();
        StepMeasure::new(cells, atoms).map(MeasureArg)
    }
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    /// Repeat once per constrained pattern.
    #[arg(long, required = true)]
    pattern: Vec<BinaryWord>,
    /// Target density per pattern; multipliers are calibrated to reach them.
    #[arg(long)]
    target: Vec<f64>,
    /// Fixed multiplier per pattern instead of targets.
    #[arg(long, allow_negative_numbers = true)]
    multiplier: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    sweeps: usize,
    #[arg(long, default_value_t = 100)]
    burn_in: usize,
    #[arg(long, default_value_t = 10)]
    trace_every: usize,
}

#[derive(Args)]
struct BrbrArgs {
    #[arg(long, required_unless_present = "gap_report")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "gap_report")]
    ones: Option<usize>,
    #[arg(long, default_value = "1010")]
    pattern: BinaryWord,
    #[arg(long, default_value = "anneal")]
    mode: Mode,
    #[arg(long)]
    restarts: Option<usize>,
    /// Annealing steps per restart.
    #[arg(long)]
    steps: Option<u64>,
    /// Starting arrangement.
    #[arg(long)]
    initial: Option<BinaryWord>,
    /// Also write the annealing trace as CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Only evaluate the --initial arrangement.
    #[arg(long, requires = "initial")]
    evaluate: bool,
    /// Optimum against the limit 3/(4e^2) at these sizes (pattern 1010, n/2 ones).
    #[arg(long, value_delimiter = ',')]
    gap_report: Option<Vec<usize>>,
}

fn num(x: f64) -> Value {
    Value::String(fmt12(x))
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn measure_json(mu: &StepMeasure) -> Value {
    json!({
        "cells": mu.cells().iter().map(|c| json!({"w": num(c.w), "v": num(c.v)})).collect::<Vec<_>>(),
        "atoms": mu.atoms().iter().map(|a| json!({"x": num(a.x), "m": num(a.m)})).collect::<Vec<_>>(),
    })
}

struct Output {
    out: Option<PathBuf>,
    format: Option<Format>,
}

impl Output {
    fn format(&self) -> Option<Format> {
        self.format.or_else(|| self.out.as_deref().and_then(Format::from_path))
    }

    fn write(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => write_file(p, text),
            None => stdout(text),
        }
    }

    fn json(&self, v: &Value) -> Result<()> {
        let text = serde_json::to_string_pretty(v).expect("serializable") + "\n";
        self.write(&text)
    }

    /// Scalar commands print the bare number unless JSON was asked for.
    fn scalar(&self, x: String, v: Value) -> Result<()> {
        match self.format() {
            Some(Format::Json) => self.json(&v),
            Some(f) => Err(Error::InvalidArgument(format!("{f:?} output is not available here"))),
            None => self.write(&(x + "\n")),
        }
    }

    /// Writes an artifact to `--out` in the requested format and the JSON
    /// summary to stdout; without an artifact format the summary goes to
    /// `--out`.
    fn artifact(&self, summary: &Value, artifact: impl FnOnce(Format) -> Result<String>) -> Result<Option<PathBuf>> {
        match self.format() {
            Some(f @ (Format::Csv | Format::Svg)) => {
                let text = artifact(f)?;
                self.write(&text)?;
                if self.out.is_some() {
                    stdout(&(serde_json::to_string_pretty(summary).expect("serializable") + "\n"))?;
                }
                Ok(self.out.clone())
            }
            _ => {
                self.json(summary)?;
                Ok(None)
            }
        }
    }
}

/// Writes to stdout; a closed pipe (as with `| head`) is not an error.
fn stdout(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io(e.to_string())),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn no_format(f: Format) -> Result<String> {
    Err(Error::InvalidArgument(format!("{f:?} output is not available here")))
}

/// Limit shape matching the targets when every pattern is `1` or `1^i 0`.
fn reference_shape(patterns: &[BinaryWord], targets: &[f64], cfg: &RunConfig) -> Option<StepMeasure> {
    let mut rho1 = None;
    let mut constraints = Vec::new();
    for (p, &t) in patterns.iter().zip(targets) {
        let bits = p.bits();
        if bits == [1] {
            rho1 = Some(t);
        } else if bits.len() >= 2 && bits[bits.len() - 1] == 0 && bits[..bits.len() - 1].iter().all(|&b| b == 1) {
            constraints.push((bits.len() - 1, t));
        } else {
            return None;
        }
    }
    let targets = DensityTargets::new(rho1?, constraints).ok()?;
    solve_limit_shape(&targets, cfg.shape_grid, &cfg.limit_config()).ok().map(|s| s.f)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.format.is_some() {
        cfg.format = cli.format;
    }
    cfg.validate()?;
    if let Some(n) = cfg.thread_count()? {
        // ignore a second initialization; the pool is already set
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = Output {
        out: cfg.out.clone(),
        format: cfg.format,
    };
    match cli.cmd {
        Cmd::Count(a) => match (a.pattern, a.word, a.blocks, a.max_len) {
            (Some(p), None, Some(b), None) => {
                let v = block_counts_polynomial(&p, &BlockSequence::new(b)?)?;
                out.scalar(fmt12(v), json!({"pattern": p.to_string(), "count": num(v)}))
            }
            (None, Some(w), None, Some(k)) => {
                let counts = count_all(&w, k)?;
                out.json(&json!({
                    "word_len": w.len(),
                    "counts": counts.entries.iter().map(|(p, c)| (p.to_string(), json!(c.to_string()))).collect::<serde_json::Map<_, _>>(),
                }))
            }
            (Some(p), Some(w), None, None) => {
                let c = count_pattern(&p, &w)?;
                out.scalar(c.to_string(), json!({"pattern": p.to_string(), "word_len": w.len(), "count": c.to_string()}))
            }
            _ => Err(Error::InvalidArgument(
                "give --pattern with --word or --blocks, or --word with --max-len".into(),
            )),
        },
        Cmd::Density(a) => density_cmd(a, &out),
        Cmd::Relations { word } => {
            let checks = check_relations(&word);
            let all = checks.iter().all(|c| c.pass);
            out.json(&json!({
                "word_len": word.len(),
                "all_hold": all,
                "relations": checks.iter().map(|c| json!({
                    "relation": c.relation,
                    "lhs": c.lhs.to_string(),
                    "rhs": c.rhs.to_string(),
                    "pass": c.pass,
                })).collect::<Vec<_>>(),
            }))
        }
        Cmd::Independence {
            patterns,
            blocks,
            generic,
            fixed_length,
        } => {
            let blocks = match blocks {
                Some(b) => BlockSequence::new(b)?,
                None => BlockSequence::generic(generic, cfg.seed),
            };
            let r = independence_rank(&patterns, &blocks, &cfg.rank_config(fixed_length))?;
            out.json(&json!({
                "patterns": patterns.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "rank": r.rank,
                "singular_values": nums(&r.singular_values),
                "point": nums(&r.point),
                "degenerate_point": r.degenerate_point,
            }))
        }
        Cmd::Wasserstein(a) => wasserstein_cmd(a, &cfg, &out),
        Cmd::Cvalue {
            tau,
            grid,
            el_check: Some(which),
            ..
        } => {
            let g = match which {
                ElCandidate::Analytic => analytic_argmax(&tau, grid.unwrap_or(cfg.grid))?,
                ElCandidate::Uniform => StepMeasure::uniform_grid(&[1.0])?,
            };
            let r = euler_lagrange_residual(&tau, &g)?;
            out.json(&json!({
                "tau": tau.to_string(),
                "candidate": match which { ElCandidate::Analytic => "analytic", ElCandidate::Uniform => "uniform" },
                "el_residual": num(r),
                "stationary": r < 1e-3,
            }))
        }
        Cmd::Cvalue { tau, grid, closed_form, .. } => {
            let closed = c_closed_form(&tau)?;
            let mut summary = json!({"tau": tau.to_string()});
            if let Some(c) = closed {
                summary["C_closed"] = num(c);
            }
            if tau.to_string() == "10101" {
                summary["xi"] = num(xi_root());
            }
            let c = if closed_form {
                closed.ok_or_else(|| Error::InvalidArgument(format!("no closed form known for {tau}")))?
            } else {
                let r = c_numeric(&tau, grid.unwrap_or(cfg.grid), &AscentConfig::default())?;
                summary["C_numeric"] = num(r.value);
                if let Some(c) = closed {
                    summary["rel_err"] = num((r.value - c).abs() / c);
                }
                summary["iterations"] = json!(r.iterations);
                summary["argmax_measure"] = measure_json(&r.argmax);
                r.value
            };
            out.artifact(&summary, |f| match f {
                Format::Csv => Ok(boundary_csv(&tau, c, 200)),
                f => no_format(f),
            })?;
            Ok(())
        }
        Cmd::Interval {
            tau,
            rho1,
            grid,
            extremal,
        } => {
            let iv = feasible_interval(&tau, rho1, grid.unwrap_or(cfg.grid), &AscentConfig::default())?;
            let mut summary = json!({
                "tau": tau.to_string(),
                "rho1": num(iv.rho1),
                "c": num(iv.c),
                "lower": num(0.0),
                "upper": num(iv.upper),
                "closed_form": iv.closed_form,
            });
            if !extremal {
                return out.json(&summary);
            }
            if tau.to_string() != "1010" {
                return Err(Error::InvalidArgument("the extremal density is built for 1010 only".into()));
            }
            let n = grid.unwrap_or(cfg.shape_grid);
            let f = extremal_density_1010(rho1, n)?;
            summary["extremal_rho_1010"] = num(density_of_measure(&tau, &f)?);
            summary["ones_until"] = num(rho1 / std::f64::consts::E);
            out.artifact(&summary, |fmt| match fmt {
                Format::Csv => Ok(step_csv(&f, n)),
                Format::Svg => Ok(f.svg()),
                Format::Json => unreachable!(),
            })
            .map(|_| ())
        }
        Cmd::Limitshape {
            coeffs: Some(coeffs),
            grid,
            svg,
            ..
        } => forward_cmd(coeffs, grid.unwrap_or(cfg.shape_grid), svg, &cfg, &out),
        Cmd::Limitshape { targets, grid, svg, .. } => {
            let targets = DensityTargets::parse(targets.as_deref().unwrap_or_default())?;
            let grid = grid.unwrap_or(cfg.shape_grid);
            let shape = solve_limit_shape(&targets, grid, &cfg.limit_config())?;
            let summary = json!({
                "coeffs": nums(&shape.p.coeffs),
                "rho1": num(shape.rho1),
                "entropy": num(shape.entropy),
                "residuals": nums(&shape.residuals),
                "newton_steps": shape.newton_steps,
            });
            if let Some(p) = &svg {
                write_file(p, &shape.f.svg())?;
            }
            match (out.format(), &out.out) {
                (Some(Format::Csv), Some(p)) => {
                    // CSV curve plus a JSON sidecar next to it
                    write_file(p, &shape.csv(grid))?;
                    let text = serde_json::to_string_pretty(&summary).expect("serializable") + "\n";
                    write_file(&p.with_extension("json"), &text)
                }
                _ => out
                    .artifact(&summary, |f| match f {
                        Format::Csv => Ok(shape.csv(grid)),
                        Format::Svg => Ok(shape.f.svg()),
                        Format::Json => unreachable!(),
                    })
                    .map(|_| ()),
            }
        }
        Cmd::Sample(a) => sample(a, &cfg, &out),
        Cmd::Brbr(a) => brbr(a, &cfg, &out),
        Cmd::Heisenberg {
            mask,
            word,
            check_minors,
            upper_right,
        } => {
            let spec = GeneratorSpec::from_word(&mask)?;
            let m = matrix_of_word(&spec, &word);
            let report = first_row_equals_counts(&spec, &word);
            let mut v = json!({
                "mask": mask.to_string(),
                "word": word.to_string(),
                "matrix": m.rows().iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "first_row_equals_counts": report.pass,
            });
            if check_minors {
                v["min_minor_by_order"] = minor_scan(&m)
                    .iter()
                    .map(|s| json!({"order": s.order, "min": s.min.to_string()}))
                    .collect();
            }
            if let Some(k) = upper_right {
                let d = m.dim();
                if k == 0 || k > d {
                    return Err(Error::InvalidArgument(format!("minor order must lie in 1..={d}")));
                }
                let rows: Vec<usize> = (0..k).collect();
                let cols: Vec<usize> = (d - k..d).collect();
                v["upper_right_minor"] = json!({"order": k, "value": minor(&m, &rows, &cols).to_string()});
            }
            out.json(&v)
        }
        Cmd::VerifyAll { timings } => {
            let results = run_all(cfg.seed);
            match out.format() {
                Some(Format::Json) => out.json(&serde_json::to_value(&results).expect("serializable"))?,
                _ => out.write(&table(&results, timings))?,
            }
            let failed = results.iter().filter(|r| !r.pass).count();
            if failed > 0 {
                eprintln!("{failed} of {} criteria failed", results.len());
                std::process::exit(1);
            }
            Ok(())
        }
    }
}

fn sample(a: SampleArgs, cfg: &RunConfig, out: &Output) -> Result<()> {
    let k = a.pattern.len();
    let reference = if a.target.len() == k {
        reference_shape(&a.pattern, &a.target, cfg)
    } else {
        None
    };
    let (multipliers, calibration) = match (a.target.len(), a.multiplier.len()) {
        (t, 0) if t == k => {
            let targets: Vec<(BinaryWord, f64)> = a.pattern.iter().cloned().zip(a.target.iter().copied()).collect();
            let initial = reference.as_ref().and_then(|r| limit_multipliers(r, &a.pattern).ok());
            let cal_cfg = CalibrationConfig {
                seed: cfg.seed,
                initial,
                ..CalibrationConfig::default()
            };
            let cal = calibrate_multipliers(&targets, a.n, &cal_cfg)?;
            (cal.multipliers.clone(), Some(cal))
        }
        (0, m) if m == k => (a.multiplier.clone(), None),
        _ => {
            return Err(Error::InvalidArgument(
                "give one --target per --pattern, or one --multiplier per --pattern".into(),
            ))
        }
    };
    let mut spec = GibbsSpec::new(a.n, a.pattern.clone(), multipliers, cfg.seed)?;
    spec.sweeps = a.sweeps;
    spec.burn_in = a.burn_in;
    spec.trace_every = a.trace_every;
    let (word, stats) = mcmc_sample(&spec, reference.as_ref())?;
    let mut summary = json!({
        "n": a.n,
        "patterns": a.pattern.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
        "multipliers": nums(&spec.multipliers),
        "mean_densities": nums(&stats.mean_densities),
        "acceptance_rate": num(stats.acceptance_rate),
        "samples": stats.samples,
        "drift_checks": stats.drift_checks,
        "drift_mismatches": stats.drift_mismatches,
        "final_word": word.to_string(),
    });
    if let Some(r) = &reference {
        summary["dW_to_reference"] = num(wasserstein(&stats.empirical_measure(), r));
    }
    if let Some(c) = &calibration {
        summary["calibration_stages"] = json!(c.trace.len());
    }
    out.artifact(&summary, |f| match f {
        Format::Csv => Ok(stats.trace_csv(&a.pattern)),
        f => no_format(f),
    })?;
    Ok(())
}

fn brbr(a: BrbrArgs, cfg: &RunConfig, out: &Output) -> Result<()> {
    if let Some(sizes) = &a.gap_report {
        let mut anneal = AnnealConfig::default();
        if let Some(r) = a.restarts {
            anneal.restarts = r;
        }
        if let Some(s) = a.steps {
            anneal.steps = s;
        }
        let rows = asymptotic_gap_report(&a.pattern, sizes, 100, usize::MAX, &anneal, cfg.seed)?;
        return out.json(&json!(rows
            .iter()
            .map(|r| json!({
                "n": r.n,
                "optimum": r.optimum.map(num),
                "method": r.method,
                "shape_density": num(r.shape_density),
                "asymptote": num(r.asymptote),
            }))
            .collect::<Vec<_>>()));
    }
    let (n, ones) = (a.n.expect("required"), a.ones.expect("required"));
    if a.evaluate {
        let deck = a.initial.expect("required");
        if deck.len() != n || deck.ones() != ones {
            return Err(Error::InvalidArgument(format!(
                "--initial has length {} with {} ones, expected {n} and {ones}",
                deck.len(),
                deck.ones()
            )));
        }
        let (count, d) = deck_density(&a.pattern, &deck)?;
        return out.json(&json!({
            "word": deck.to_string(),
            "exact_count": count.to_string(),
            "density": num(d),
        }));
    }
    let mut prob = DeckProblem::new(n, ones, a.pattern, a.mode)?;
    prob.initial = a.initial;
    if let Some(r) = a.restarts {
        prob.anneal.restarts = r;
    }
    if let Some(s) = a.steps {
        prob.anneal.steps = s;
    }
    let r = optimize_deck(&prob, cfg.seed)?;
    let trace_csv = || {
        let mut s = String::from("step,temperature,density\n");
        for t in &r.trace {
            s.push_str(&format!("{},{},{}\n", t.step, fmt12(t.temperature), fmt12(t.density)));
        }
        s
    };
    if let Some(p) = &a.trace {
        write_file(p, &trace_csv())?;
    }
    let method = match r.method {
        Mode::Exhaustive => "exhaustive",
        Mode::Anneal => "anneal",
        Mode::Ascent => "ascent",
    };
    let mut summary = json!({
        "best_word": r.best.to_string(),
        "exact_count": r.count.to_string(),
        "density": num(r.density),
        "method": method,
        "trace_file": a.trace.as_ref().map(|p| p.display().to_string()),
    });
    if let Some(d) = r.initial_density {
        summary["initial_density"] = num(d);
    }
    out.artifact(&summary, |f| match f {
        Format::Csv => Ok(trace_csv()),
        Format::Svg => Ok(lattice_path_svg(&r.best)),
        Format::Json => unreachable!(),
    })?;
    Ok(())
}

fn density_cmd(a: DensityArgs, out: &Output) -> Result<()> {
    match (a.pattern, a.word, a.measure) {
        (Some(p), Some(w), None) => {
            let d = density(&p, &w)?;
            out.scalar(fmt12(d), json!({"pattern": p.to_string(), "word_len": w.len(), "density": num(d)}))
        }
        (p, None, Some(MeasureArg(mu))) => {
            let d = p.as_ref().map(|p| density_of_measure(p, &mu)).transpose()?;
            if let (Some(d), None, false) = (d, a.moments, a.entropy) {
                let p = p.expect("set");
                return out.scalar(fmt12(d), json!({"pattern": p.to_string(), "density": num(d)}));
            }
            let mut v = json!({});
            if let (Some(p), Some(d)) = (&p, d) {
                v["pattern"] = json!(p.to_string());
                v["density"] = num(d);
            }
            if a.entropy {
                v["entropy"] = num(entropy(&mu)?);
            }
            if let Some(k) = a.moments {
                v["moments"] = moments_identity_check(&mu, k)?
                    .iter()
                    .map(|m| json!({"n": m.n, "moment": num(m.moment), "pattern_sum": num(m.pattern_sum), "pass": m.pass}))
                    .collect();
            }
            if v.as_object().is_some_and(|o| o.is_empty()) {
                return Err(Error::InvalidArgument("with --measure give --pattern, --moments or --entropy".into()));
            }
            out.json(&v)
        }
        _ => Err(Error::InvalidArgument("give --pattern with --word, or --measure".into())),
    }
}

fn wasserstein_cmd(a: WassersteinArgs, cfg: &RunConfig, out: &Output) -> Result<()> {
    let side = |w: Option<BinaryWord>, m: Option<MeasureArg>| -> Result<Option<StepMeasure>> {
        match (w, m) {
            (Some(w), _) => measure_of_word(&w).map(Some),
            (None, Some(m)) => Ok(Some(m.0)),
            (None, None) => Ok(None),
        }
    };
    let mu_a = side(a.word_a, a.measure_a)?.expect("clap requires side a");
    let mu_b = side(a.word_b, a.measure_b)?;
    if let Some(sizes) = a.refine {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let hosts: Vec<BinaryWord> = sizes
            .iter()
            .map(|&n| if a.sampled { sample_word(&mu_a, n, &mut rng) } else { round_word(&mu_a, n) })
            .collect();
        let r = word_convergence_check(&hosts, &mu_a, &a.pattern, 1e-12)?;
        return out.json(&json!({
            "patterns": a.pattern.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
            "rows": r.rows.iter().map(|row| json!({
                "n": row.n,
                "wasserstein": num(row.wasserstein),
                "density_gaps": nums(&row.density_gaps),
            })).collect::<Vec<_>>(),
            "decreasing": r.decreasing,
        }));
    }
    let Some(mu_b) = mu_b else {
        return out.json(&json!({"measure": measure_json(&mu_a)}));
    };
    let d = wasserstein(&mu_a, &mu_b);
    if a.show_measures {
        return out.json(&json!({"wasserstein": num(d), "a": measure_json(&mu_a), "b": measure_json(&mu_b)}));
    }
    out.scalar(fmt12(d), json!({"wasserstein": num(d)}))
}

/// `x,f` rows at the midpoints of a uniform grid.
fn step_csv(f: &StepMeasure, grid: usize) -> String {
    let mut s = String::from("x,f\n");
    for i in 0..grid {
        let x = (i as f64 + 0.5) / grid as f64;
        s.push_str(&format!("{},{}\n", fmt12(x), fmt12(f.value_at(x))));
    }
    s
}

/// Forward map from exponent coefficients: densities, Jacobian, entropy.
fn forward_cmd(coeffs: Vec<f64>, grid: usize, svg: Option<PathBuf>, cfg: &RunConfig, out: &Output) -> Result<()> {
    let lc = cfg.limit_config();
    let p = ExpPolynomial::new(coeffs)?;
    let phi = phi_forward(&p, &lc)?;
    let jac = phi_jacobian(&p, &lc)?;
    let fd = phi_jacobian_fd(&p, cfg.fd_step, &lc)?;
    let rows = |m: &nalgebra::DMatrix<f64>| -> Value {
        (0..m.nrows()).map(|i| nums(&m.row(i).iter().copied().collect::<Vec<_>>())).collect()
    };
    let f = Reconstruction::new(&p, phi.rho1, grid.max(256)).grid_measure(grid)?;
    let summary = json!({
        "coeffs": nums(&p.coeffs),
        "rho1": num(phi.rho1),
        "densities": phi.densities.iter().enumerate().map(|(i, d)| (format!("rho_{}", one_run_zero(i)), num(*d))).collect::<serde_json::Map<_, _>>(),
        "jacobian": rows(&jac),
        "jacobian_fd": rows(&fd),
        "det": num(jac.determinant()),
        "entropy": num(shape_entropy(&p, phi.rho1, &lc)?),
    });
    if let Some(path) = &svg {
        write_file(path, &f.svg())?;
    }
    out.artifact(&summary, |fmt| match fmt {
        Format::Csv => Ok(step_csv(&f, grid)),
        Format::Svg => Ok(f.svg()),
        Format::Json => unreachable!(),
    })
    .map(|_| ())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
