mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lasserre_core::embed::ColumnWeighting;
use lasserre_core::io::to_canonical_json;
use lasserre_core::pipeline::{run_pipeline, PipelineConfig, SolveFile};
use lasserre_core::problems::{generate, oracle, Family, FamilyName, ProblemKind, ProblemSpec};
use lasserre_core::relaxation::Tolerances;
use lasserre_core::rounding::RoundingMode;
use lasserre_core::sdpsolve::{check_certificate, SolverSettings};
use lasserre_core::seeds::SeedStrategy;
use serde::Serialize;

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CAPACITY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "lasserre", version, about = "Lasserre relaxations with seeded propagation rounding")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Master seed for generation and rounding.
    #[arg(long, global = true, env = "LASSERRE_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, env = "LASSERRE_THREADS", default_value_t = 0)]
    threads: usize,
    /// PSD tolerance for the solver and moment validation.
    #[arg(long, global = true, env = "LASSERRE_TOL_PSD", default_value_t = 1e-6)]
    tol_psd: f64,
    /// Primal residual tolerance for the solver.
    #[arg(long, global = true, env = "LASSERRE_TOL_PRIMAL", default_value_t = 1e-6)]
    tol_primal: f64,
    #[arg(long, global = true, env = "LASSERRE_MAX_ITERS", default_value_t = 50_000)]
    max_iters: usize,
    #[arg(long, global = true, env = "LASSERRE_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Solve, select seeds and round; writes one record per strategy.
    Run(RunArgs),
    /// Exact optimum by enumeration.
    Oracle(OracleArgs),
    /// Aggregate records into a table.
    Report(ReportArgs),
    /// Re-check a stored solve: moment validation and certificate.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    kind: String,
    #[arg(long)]
    family: String,
    /// Vertex count (all families except grid).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Degree for random-regular.
    #[arg(long)]
    degree: Option<usize>,
    /// Edge probability for gnp.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    /// Label count for unique-games and two-csp.
    #[arg(long)]
    k: Option<usize>,
    /// Hard moment constraints for independent-set and partial-3-coloring.
    #[arg(long)]
    strict: bool,
    /// Output file; defaults to a name derived from the arguments under --out-dir.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Weighting {
    Raw,
    DegreeNormalized,
}

#[derive(Args, Debug)]
struct RunArgs {
    instance: PathBuf,
    /// Relaxation level r.
    #[arg(long, short = 'r')]
    level: usize,
    /// Comma-separated: greedy, volume, random, exhaustive.
    #[arg(long, value_delimiter = ',', default_value = "greedy")]
    strategies: Vec<String>,
    /// Comma-separated: independent, threshold.
    #[arg(long, value_delimiter = ',', default_value = "independent,threshold")]
    modes: Vec<String>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Seed variables per strategy (default r - 1).
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long, value_enum, default_value = "raw")]
    weighting: Weighting,
    /// Skip the brute-force oracle.
    #[arg(long)]
    no_oracle: bool,
    /// Also store the solved moment matrices for `validate`.
    #[arg(long)]
    save_solve: bool,
}

#[derive(Args, Debug)]
struct OracleArgs {
    instance: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Glob of record files, e.g. 'out/records/*.json'.
    records: String,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    solve: PathBuf,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(error: anyhow::Error) -> Self {
        Failure { code: EXIT_USAGE, error }
    }
}

impl From<lasserre_core::Error> for Failure {
    fn from(e: lasserre_core::Error) -> Self {
        use lasserre_core::Error as E;
        let code = match e {
            E::Capacity { .. } => EXIT_CAPACITY,
            E::InvalidArgument(_)
            | E::InvalidSpec(_)
            | E::InvalidInstance(_)
            | E::LevelBudget { .. }
            | E::LabelCount { .. }
            | E::ScopeTooLarge { .. } => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        Failure { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::usage(error)
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.global.threads > 0 {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global();
    }
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(&cli.global, a),
        Command::Run(a) => cmd_run(&cli.global, a),
        Command::Oracle(a) => cmd_oracle(&cli.global, a),
        Command::Report(a) => cmd_report(a),
        Command::Validate(a) => cmd_validate(&cli.global, a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_instance(path: &Path) -> Result<ProblemSpec, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::usage)?;
    Ok(ProblemSpec::from_json(&text)?)
}

fn need<T>(value: Option<T>, flag: &str, family: &str) -> anyhow::Result<T> {
    value.ok_or_else(|| anyhow!("--{flag} is required for the {family} family"))
}

fn cmd_gen(g: &Global, a: &GenArgs) -> CmdResult {
    let kind: ProblemKind = a.kind.parse()?;
    let name: FamilyName = a.family.parse()?;
    let family = match name {
        FamilyName::Ring => Family::Ring { n: need(a.n, "n", "ring")? },
        FamilyName::Grid => Family::Grid {
            rows: need(a.rows, "rows", "grid")?,
            cols: need(a.cols, "cols", "grid")?,
        },
        FamilyName::RandomRegular => Family::RandomRegular {
            n: need(a.n, "n", "random-regular")?,
            degree: need(a.degree, "degree", "random-regular")?,
        },
        FamilyName::Gnp => Family::Gnp {
            n: need(a.n, "n", "gnp")?,
            p: need(a.p, "p", "gnp")?,
        },
        FamilyName::PlantedBisection => Family::PlantedBisection {
            n: need(a.n, "n", "planted-bisection")?,
            p_in: need(a.p_in, "p-in", "planted-bisection")?,
            p_out: need(a.p_out, "p-out", "planted-bisection")?,
        },
    };
    let mut spec = generate(kind, &family, a.k, g.seed)?;
    spec.params.strict = a.strict;
    let path = a.output.clone().unwrap_or_else(|| {
        g.out_dir.join(format!(
            "{kind}-{}-n{}-s{}.json",
            family.name(),
            family.vertices(),
            g.seed
        ))
    });
    write_file(&path, &spec.to_canonical_json()?)?;
    println!("{}", path.display());
    Ok(0)
}

fn short(hash: &str) -> &str {
    &hash[..16.min(hash.len())]
}

fn cmd_run(g: &Global, a: &RunArgs) -> CmdResult {
    let spec = read_instance(&a.instance)?;
    let strategies = a
        .strategies
        .iter()
        .map(|s| s.parse::<SeedStrategy>())
        .collect::<Result<Vec<_>, _>>()?;
    let modes = a
        .modes
        .iter()
        .map(|s| s.parse::<RoundingMode>())
        .collect::<Result<Vec<_>, _>>()?;
    let config = PipelineConfig {
        r: a.level,
        strategies,
        modes,
        trials: a.trials,
        master_seed: g.seed,
        seed_count: a.seeds,
        weighting: match a.weighting {
            Weighting::Raw => ColumnWeighting::Raw,
            Weighting::DegreeNormalized => ColumnWeighting::DegreeNormalized,
        },
        solver: SolverSettings {
            eps_primal: g.tol_primal,
            eps_psd: g.tol_psd,
            max_iters: g.max_iters,
            ..SolverSettings::default()
        },
        tolerances: Tolerances {
            psd: g.tol_psd,
            ..Tolerances::default()
        },
        oracle: !a.no_oracle,
    };
    let id = a
        .instance
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into());
    let out = run_pipeline(&spec, &id, &config)?;

    let records_dir = g.out_dir.join("records");
    let config_hash = config.hash();
    let stem = format!("{}-{}", short(&out.records[0].instance_hash), short(&config_hash));
    for rec in &out.records {
        let path = records_dir.join(format!("{stem}-{}.json", rec.strategy));
        write_file(&path, &rec.to_json())?;
        println!("{}", path.display());
    }
    write_file(
        &records_dir.join(format!("{stem}.timing")),
        &serde_json::to_string_pretty(&out.times).expect("timings serialize"),
    )?;
    if a.save_solve {
        for s in &out.solves {
            let path = g
                .out_dir
                .join("solves")
                .join(format!("{}-r{}-{}.json", short(&out.records[0].instance_hash), a.level, s.case));
            write_file(&path, &to_canonical_json(s))?;
            println!("{}", path.display());
        }
    }

    let mut code = 0;
    for rec in &out.records {
        if let Some(e) = &rec.error {
            eprintln!("error ({}): {}", rec.strategy, e.message);
            let c = match e.class.as_str() {
                "capacity" => EXIT_CAPACITY,
                "usage" => EXIT_USAGE,
                _ => EXIT_NUMERICAL,
            };
            code = code.max(c);
        } else if !rec.converged {
            eprintln!("warning ({}): the SDP solve did not converge", rec.strategy);
            code = code.max(EXIT_NUMERICAL);
        }
    }
    Ok(code)
}

#[derive(Serialize)]
struct OracleReport<'a> {
    instance_hash: String,
    kind: ProblemKind,
    n: usize,
    k: usize,
    opt_value: f64,
    witness: &'a [usize],
    enumerated: u64,
}

fn cmd_oracle(g: &Global, a: &OracleArgs) -> CmdResult {
    let spec = read_instance(&a.instance)?;
    let result = oracle(&spec)?;
    let hash = spec.hash()?;
    let report = OracleReport {
        instance_hash: hash.clone(),
        kind: spec.kind,
        n: spec.n,
        k: spec.k(),
        opt_value: result.opt_value,
        witness: &result.witness,
        enumerated: result.enumerated,
    };
    let path = g.out_dir.join("oracle").join(format!("{}.json", short(&hash)));
    write_file(&path, &to_canonical_json(&report))?;
    println!("opt {}", result.opt_value);
    println!("{}", path.display());
    Ok(0)
}

fn cmd_report(a: &ReportArgs) -> CmdResult {
    let text = report::build(&a.records, matches!(a.format, Format::Json))?;
    match &a.output {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_validate(g: &Global, a: &ValidateArgs) -> CmdResult {
    let text = fs::read_to_string(&a.solve)
        .with_context(|| format!("reading {}", a.solve.display()))?;
    let file: SolveFile = serde_json::from_str(&text).context("parsing solve file")?;
    let relax = file.relaxation()?;
    let solution = file.solution()?;
    let certificate = check_certificate(&relax.sdp, &solution);
    let moments = relax.moments(&solution)?;
    let tol = Tolerances {
        psd: g.tol_psd,
        ..Tolerances::default()
    };
    let validation = moments.validate(&tol);
    for issue in &certificate.issues {
        println!(
            "certificate {:?}: stored {} recomputed {}",
            issue.quantity, issue.stored, issue.recomputed
        );
    }
    println!("moments: {validation}");
    if certificate.is_clean() && validation.is_valid() {
        println!("ok");
        Ok(0)
    } else {
        println!("invalid");
        Ok(EXIT_NUMERICAL)
    }
}
