//! Subcommands of the `alin` binary. Each returns the process exit code:
//! 0 when the solver certified optimality, 2 when it ran out of
//! iterations. Input errors surface as `Err` and map to exit code 1.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use alin_core::alin::{run, AlinOutcome};
use alin_core::io::{read_matrix_market, read_vector, write_matrix_market, write_vector};
use alin_core::penalties::{build_diff_1d, build_identity, build_stacked, build_tv_2d, build_tv_3d};
use alin_core::{AlinConfig, GridShape, PenaltySpec, Problem, RunStatus, SparseMatrix, Variant};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{at_path, usage, CliResult};
use crate::imaging::{blur_operator, read_pgm, write_pgm, ImageGrid};
use crate::oracle::{admm_oracle, subgradient_oracle, AdmmConfig, OracleProblem};
use crate::synth::{synth_generate, SynthSpec};
use crate::trace::{plot_rows, read_trace, write_plot_csv, write_trace};

pub const EXIT_OPTIMAL: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_MAX_ITERATIONS: i32 = 2;

/// Overrides `--seed` when set.
pub const SEED_ENV: &str = "ALIN_SEED";

#[derive(Debug, Parser)]
#[command(name = "alin", version, about = "Generalized lasso by alternating linearization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve ½‖y − Xβ‖² + λ‖Rβ‖₁ from files.
    Solve(SolveArgs),
    /// Write a seeded synthetic regression problem.
    Synth(SynthArgs),
    /// Total-variation denoising of a PGM image.
    Denoise(DenoiseArgs),
    /// Total-variation deblurring of a PGM image under the neighbor-average blur.
    Deblur(DeblurArgs),
    /// Reference solution by subgradient descent (or ADMM).
    Oracle(OracleArgs),
    /// Convert a JSON-lines trace to CSV of iteration vs. log error.
    TracePlot(TracePlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    /// Descent test after both subproblems.
    Alin,
    /// Peaceman–Rachford: always update.
    Pr,
    /// Douglas–Rachford, updating after the penalty subproblem only.
    DrH,
    /// Douglas–Rachford, updating after the loss subproblem only.
    DrF,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Alin => Variant::Alin,
            VariantArg::Pr => Variant::PeacemanRachford,
            VariantArg::DrH => Variant::DouglasRachfordAfterH,
            VariantArg::DrF => Variant::DouglasRachfordAfterF,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Design matrix X (Matrix Market coordinate file).
    #[arg(long = "x", value_name = "FILE", required_unless_present = "identity_design", conflicts_with = "identity_design")]
    pub x: Option<PathBuf>,
    /// Use X = I (signal approximation).
    #[arg(long)]
    pub identity_design: bool,
    /// Response vector, one value per line.
    #[arg(long = "y", value_name = "FILE")]
    pub y: PathBuf,
    /// identity | diff1d | tv2d | tv3d | stacked:W*NAME,W*NAME,... | path to a Matrix Market R.
    #[arg(long, default_value = "identity")]
    pub penalty: String,
    /// Grid dimensions for tv2d/tv3d, e.g. 16x16 or 8x8x4.
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<GridShape>,
    /// Penalty weight λ > 0.
    #[arg(long)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Descent-test parameter γ in (0, 1).
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Absolute part of the stopping tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub eps: f64,
    /// Relative part of the stopping tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub eps_rel: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Alin)]
    pub variant: VariantArg,
}

impl SolverArgs {
    pub fn config(&self) -> AlinConfig {
        AlinConfig {
            gamma: self.gamma,
            eps_abs: self.eps,
            eps_rel: self.eps_rel,
            max_iterations: self.max_iter,
            variant: self.variant.into(),
            ..AlinConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Starting point (default: y when X = I, else zero).
    #[arg(long, value_name = "FILE")]
    pub beta0: Option<PathBuf>,
    /// Write the iteration trace as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    /// Write β*, one value per line (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub sd: f64,
    /// RNG seed; the ALIN_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving X.mtx, y.txt and beta_true.txt.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DenoiseArgs {
    /// Noisy input image (PGM, P2 or P5).
    #[arg(long, value_name = "FILE")]
    pub image: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    /// Output image (8-bit PGM, values clamped to [0, 1]).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DeblurArgs {
    /// Observed image (PGM, P2 or P5).
    #[arg(long, value_name = "FILE")]
    pub image: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    /// Blur the input first, i.e. treat it as the clean image.
    #[arg(long)]
    pub blur: bool,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleMethod {
    Subgradient,
    Admm,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub iters: usize,
    #[arg(long, value_enum, default_value_t = OracleMethod::Subgradient)]
    pub method: OracleMethod,
    /// Write the best β, one value per line.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TracePlotArgs {
    #[arg(long, value_name = "FILE")]
    pub trace: PathBuf,
    /// Optimal objective; defaults to the best value in the trace.
    #[arg(long)]
    pub reference: Option<f64>,
    /// CSV destination (stdout when absent).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn parse_shape(s: &str) -> Result<GridShape, String> {
    let dims = s
        .split(['x', 'X', ','])
        .map(|t| t.trim().parse::<usize>().map_err(|e| format!("bad dimension {t:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    GridShape::new(&dims).map_err(|e| e.to_string())
}

fn grid_penalty(name: &str, shape: Option<&GridShape>, p: usize) -> CliResult<SparseMatrix> {
    let need_shape = |ndim: usize| -> CliResult<&GridShape> {
        let s = shape.ok_or_else(|| usage(format!("penalty {name} needs --shape")))?;
        if s.ndim() != ndim || s.size() != p {
            return Err(usage(format!(
                "shape {:?} does not fit penalty {name} on {p} coefficients",
                s.dims()
            )));
        }
        Ok(s)
    };
    Ok(match name {
        "identity" => build_identity(p)?,
        "diff1d" => build_diff_1d(p)?,
        "tv2d" => build_tv_2d(need_shape(2)?)?,
        "tv3d" => build_tv_3d(need_shape(3)?)?,
        other => return Err(usage(format!("unknown penalty {other:?}"))),
    })
}

/// Builds `R` from a penalty name, a `stacked:` list or a file path.
pub fn build_penalty(spec: &str, shape: Option<&GridShape>, p: usize) -> CliResult<SparseMatrix> {
    if let Some(list) = spec.strip_prefix("stacked:") {
        let blocks = list
            .split(',')
            .map(|item| {
                let (w, name) = item
                    .split_once('*')
                    .ok_or_else(|| usage(format!("stacked block {item:?} must look like W*NAME")))?;
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|e| usage(format!("stacked weight {w:?}: {e}")))?;
                Ok((w, grid_penalty(name.trim(), shape, p)?))
            })
            .collect::<CliResult<Vec<_>>>()?;
        return Ok(build_stacked(&blocks)?);
    }
    if matches!(spec, "identity" | "diff1d" | "tv2d" | "tv3d") {
        return grid_penalty(spec, shape, p);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(usage(format!("unknown penalty {spec:?} (and no such file)")));
    }
    let r = at_path(path, read_matrix_market(path))?;
    if r.ncols() != p {
        return Err(usage(format!(
            "{}: R has {} columns, X has {p}",
            path.display(),
            r.ncols()
        )));
    }
    Ok(r)
}

pub fn load_problem(args: &ProblemArgs) -> CliResult<Problem> {
    let y = at_path(&args.y, read_vector(&args.y))?;
    let x = match &args.x {
        Some(path) => at_path(path, read_matrix_market(path))?,
        None => SparseMatrix::identity(y.len()),
    };
    if x.nrows() != y.len() {
        return Err(usage(format!(
            "X has {} rows but y has {} entries",
            x.nrows(),
            y.len()
        )));
    }
    let r = build_penalty(&args.penalty, args.shape.as_ref(), x.ncols())?;
    Ok(Problem::new(x, y, PenaltySpec::new(args.lambda, r)?)?)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn status_code(status: RunStatus) -> i32 {
    match status {
        RunStatus::Optimal => EXIT_OPTIMAL,
        RunStatus::MaxIterations => EXIT_MAX_ITERATIONS,
    }
}

fn report(out: &AlinOutcome) {
    eprintln!(
        "status {:?} after {} iterations, objective {:.12e}",
        out.status,
        out.trace.len(),
        out.objective()
    );
}

fn save_trace(out: &AlinOutcome, path: Option<&PathBuf>) -> CliResult<()> {
    if let Some(path) = path {
        write_trace(&out.trace, create(path)?)?;
    }
    Ok(())
}

fn write_beta(beta: &[f64], path: Option<&PathBuf>) -> CliResult<()> {
    match path {
        Some(path) => at_path(path, write_vector(beta, path)),
        None => {
            let mut w = io::stdout().lock();
            for v in beta {
                writeln!(w, "{v:e}")?;
            }
            Ok(())
        }
    }
}

pub fn cmd_solve(args: &SolveArgs) -> CliResult<i32> {
    let problem = load_problem(&args.problem)?;
    let beta0 = match &args.beta0 {
        Some(path) => Some(at_path(path, read_vector(path))?),
        None => None,
    };
    let out = run(&problem, &args.solver.config(), beta0.as_deref())?;
    report(&out);
    save_trace(&out, args.trace.as_ref())?;
    write_beta(&out.beta, args.out.as_ref())?;
    Ok(status_code(out.status))
}

/// `ALIN_SEED` when set and parseable, else the flag value.
pub fn effective_seed(flag: u64) -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|e| usage(format!("{SEED_ENV}={v:?}: {e}"))),
        Err(_) => Ok(flag),
    }
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<i32> {
    let spec = SynthSpec {
        n: args.n,
        p: args.p,
        sd: args.sd,
        seed: effective_seed(args.seed)?,
    };
    let s = synth_generate(&spec)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let x_path = args.out_dir.join("X.mtx");
    at_path(&x_path, write_matrix_market(&s.x, &x_path))?;
    let y_path = args.out_dir.join("y.txt");
    at_path(&y_path, write_vector(&s.y, &y_path))?;
    let b_path = args.out_dir.join("beta_true.txt");
    at_path(&b_path, write_vector(&s.beta_true, &b_path))?;
    eprintln!("wrote {} ({}×{}, seed {})", args.out_dir.display(), spec.n, spec.p, spec.seed);
    Ok(EXIT_OPTIMAL)
}

/// TV denoising: `X = I`, `R = tv2d`, started at the noisy image.
pub fn denoise(image: &ImageGrid, lambda: f64, config: &AlinConfig) -> CliResult<AlinOutcome> {
    let r = build_tv_2d(&image.shape())?;
    let problem = Problem::identity_design(image.values().to_vec(), PenaltySpec::new(lambda, r)?)?;
    Ok(run(&problem, config, None)?)
}

/// TV deblurring under [`blur_operator`], started at the observation.
pub fn deblur(observed: &ImageGrid, lambda: f64, config: &AlinConfig) -> CliResult<AlinOutcome> {
    let shape = observed.shape();
    let x = blur_operator(&shape)?;
    let r = build_tv_2d(&shape)?;
    let y = observed.values().to_vec();
    let problem = Problem::new(x, y.clone(), PenaltySpec::new(lambda, r)?)?;
    Ok(run(&problem, config, Some(&y))?)
}

fn image_result(out: &AlinOutcome, like: &ImageGrid) -> CliResult<ImageGrid> {
    Ok(ImageGrid::new(like.height(), like.width(), out.beta.clone())?.clamped())
}

pub fn cmd_denoise(args: &DenoiseArgs) -> CliResult<i32> {
    let img = read_pgm(&args.image)?;
    let out = denoise(&img, args.lambda, &args.solver.config())?;
    report(&out);
    save_trace(&out, args.trace.as_ref())?;
    write_pgm(&image_result(&out, &img)?, &args.out)?;
    Ok(status_code(out.status))
}

pub fn cmd_deblur(args: &DeblurArgs) -> CliResult<i32> {
    let mut img = read_pgm(&args.image)?;
    if args.blur {
        let b = blur_operator(&img.shape())?;
        img = ImageGrid::new(img.height(), img.width(), b.matvec(img.values())?)?;
    }
    let out = deblur(&img, args.lambda, &args.solver.config())?;
    report(&out);
    save_trace(&out, args.trace.as_ref())?;
    write_pgm(&image_result(&out, &img)?, &args.out)?;
    Ok(status_code(out.status))
}

pub fn cmd_oracle(args: &OracleArgs) -> CliResult<i32> {
    let problem = load_problem(&args.problem)?;
    let op = OracleProblem {
        x: problem.x(),
        y: problem.y(),
        r: problem.penalty().r(),
        lambda: problem.penalty().lambda(),
    };
    let res = match args.method {
        OracleMethod::Subgradient => subgradient_oracle(&op, args.iters)?,
        OracleMethod::Admm => admm_oracle(
            &op,
            &AdmmConfig {
                max_iterations: args.iters,
                ..AdmmConfig::default()
            },
        )?,
    };
    println!("{:.15e}", res.objective);
    if let Some(path) = &args.out {
        at_path(path, write_vector(&res.beta, path))?;
    }
    Ok(EXIT_OPTIMAL)
}

pub fn cmd_trace_plot(args: &TracePlotArgs) -> CliResult<i32> {
    let records = read_trace(BufReader::new(File::open(&args.trace)?))?;
    let rows = plot_rows(&records, args.reference);
    match &args.out {
        Some(path) => write_plot_csv(&rows, create(path)?)?,
        None => write_plot_csv(&rows, io::stdout().lock())?,
    }
    Ok(EXIT_OPTIMAL)
}

pub fn execute(cli: &Cli) -> CliResult<i32> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Deblur(a) => cmd_deblur(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::TracePlot(a) => cmd_trace_plot(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn shapes_parse() {
        assert_eq!(parse_shape("16x16").unwrap().dims(), &[16, 16]);
        assert_eq!(parse_shape("8,8,4").unwrap().dims(), &[8, 8, 4]);
        assert!(parse_shape("3xa").is_err());
        assert!(parse_shape("0x3").is_err());
    }

    #[test]
    fn penalty_specs() {
        let s = parse_shape("2x3").unwrap();
        assert_eq!(build_penalty("identity", None, 4).unwrap().nrows(), 4);
        assert_eq!(build_penalty("diff1d", None, 4).unwrap().nrows(), 3);
        assert_eq!(build_penalty("tv2d", Some(&s), 6).unwrap().nrows(), 7);
        assert!(build_penalty("tv2d", None, 6).is_err());
        assert!(build_penalty("tv2d", Some(&s), 5).is_err());
        let st = build_penalty("stacked:0.2*identity, 0.5*tv2d", Some(&s), 6).unwrap();
        assert_eq!(st.nrows(), 13);
        assert_eq!(st.row(0).1, &[0.2]);
        assert!(build_penalty("stacked:identity", None, 6).is_err());
        assert!(build_penalty("no-such-penalty", None, 6).is_err());
    }

    #[test]
    fn variant_mapping() {
        assert_eq!(Variant::from(VariantArg::Pr), Variant::PeacemanRachford);
        assert_eq!(Variant::from(VariantArg::DrH), Variant::DouglasRachfordAfterH);
    }
}
