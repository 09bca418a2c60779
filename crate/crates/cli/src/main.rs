use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use popcert::certify::{
    certify_archimedean, certify_coercive, certify_compact, certify_stable_compact, closed_generators, ladder,
    CertifyError, CertifyOptions, CertifyOutcome,
};
use popcert::exactcert::{verify_identity, CertificateFile};
use popcert::poly::rational::parse_fraction;
use popcert::reductions::{generate, label_for, Construction, Pop, StableInstance};
use popcert::sat::{brute_force_solve_capped, parse_cnf, OneInThreeInstance, SatOutcome, BRUTE_FORCE_CAP};
use popcert::sdp::{solve_feasibility, SdpProblem, SdpStatus, SolverOptions, DEFAULT_DIM_CAP, DEFAULT_MAX_ITER, DEFAULT_TOL};
use popcert::sos::numeric_residual;
use popcert::{parse_poly, Polynomial, Rational};

const INCONCLUSIVE: u8 = 2;

#[derive(Parser)]
#[command(name = "popcert", version, about = "Hardness instances and exact SOS certificates for polynomial optimization")]
struct Cli {
    #[command(flatten)]
    config: Config,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Flags win over environment variables,
/// which win over defaults.
#[derive(Args)]
struct Config {
    /// Solver tolerance
    #[arg(long, global = true, env = "POPCERT_TOL", default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Largest total SDP dimension attempted
    #[arg(long, global = true, default_value_t = DEFAULT_DIM_CAP)]
    dim_cap: usize,
    /// Upper end of the level ladder when neither --r nor --ladder is given
    #[arg(long, global = true, env = "POPCERT_RMAX", default_value_t = 3)]
    r_max: u32,
    #[arg(long, global = true, env = "POPCERT_SEED", default_value_t = 0)]
    seed: u64,
    /// Largest variable count the SAT oracle enumerates
    #[arg(long, global = true, default_value_t = BRUTE_FORCE_CAP)]
    brute_force_cap: usize,
    /// Initial denominator power `p` for rounding to `2^-p`
    #[arg(long, global = true, default_value_t = 30)]
    denom_power: u32,
    /// Number of seeded samples for the consequence and sphere checks
    #[arg(long, global = true, default_value_t = 1000)]
    samples: usize,
    /// Use only single generators and the full product in compactness templates
    #[arg(long, global = true)]
    restricted_products: bool,
}

#[derive(Args)]
struct Level {
    /// Single level
    #[arg(long, conflicts_with = "ladder")]
    r: Option<u32>,
    /// Try levels in order up to this one, stopping at the first certificate
    #[arg(long)]
    ladder: Option<u32>,
}

#[derive(Args)]
struct Output {
    /// Certificate path (default: `<input stem>.cert.json` beside the input)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a hardness construction for a ONE-IN-THREE instance
    Gen {
        construction: String,
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coercivity certificate for a polynomial
    Coercive {
        #[arg(long)]
        poly: PathBuf,
        #[command(flatten)]
        level: Level,
        #[command(flatten)]
        output: Output,
    },
    /// Compactness certificate for a closed set
    Compact {
        #[arg(long)]
        pop: PathBuf,
        /// Radius override `R`; without it only the template is described
        #[arg(long)]
        radius: Option<String>,
        #[command(flatten)]
        level: Level,
        #[command(flatten)]
        output: Output,
    },
    /// Archimedean certificate `R - |x|^2` in the quadratic module
    Archimedean {
        /// JSON list of polynomials, or a set file
        #[arg(long)]
        polys: PathBuf,
        #[arg(long = "R")]
        big_r: String,
        #[command(flatten)]
        level: Level,
        #[command(flatten)]
        output: Output,
    },
    /// Stable-compactness certificate for a generated instance
    Stable {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        level: Level,
        #[command(flatten)]
        output: Output,
    },
    /// Check a certificate file exactly
    Verify {
        #[arg(long)]
        cert: PathBuf,
    },
    /// Ground-truth label of a construction from the SAT oracle
    Oracle {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        construction: String,
    },
    /// Solve an SDP feasibility problem
    SdpSolve {
        #[arg(long)]
        problem: PathBuf,
    },
}

impl Config {
    fn certify_options(&self) -> CertifyOptions {
        CertifyOptions {
            solver: SolverOptions {
                tol: self.tol,
                max_iter: self.max_iter,
                dim_cap: self.dim_cap,
                ..SolverOptions::default()
            },
            denom_power: self.denom_power,
            seed: self.seed,
            samples: self.samples,
            restricted_products: self.restricted_products,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || self.dim_cap == 0 || self.brute_force_cap == 0 {
            bail!("tol, max-iter, dim-cap and brute-force-cap must be positive");
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn rational(text: &str) -> Result<Rational> {
    parse_fraction(text).map_err(|e| anyhow::anyhow!("not a rational number: {text} ({e})"))
}

fn certificate_path(input: &Path, out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| {
        let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        input.with_file_name(format!("{stem}.cert.json"))
    })
}

fn run_levels<F>(level: &Level, first: u32, r_max: u32, mut attempt: F) -> Result<CertifyOutcome>
where
    F: FnMut(u32) -> Result<CertifyOutcome, CertifyError>,
{
    let out = match (level.r, level.ladder) {
        (Some(r), _) => attempt(r),
        (None, Some(last)) => ladder(first, last, attempt),
        (None, None) => ladder(first, r_max, attempt),
    };
    Ok(out?)
}

/// Writes the certificate of a certified outcome, prints the report, and maps the
/// status to an exit code.
fn finish(outcome: CertifyOutcome, input: &Path, out: &Option<PathBuf>) -> Result<u8> {
    let path = certificate_path(input, out);
    let shown = match &outcome.certificate {
        Some(cert) if outcome.is_certified() => {
            write(&path, &CertificateFile::Exact(cert.clone()).to_json())?;
            Some(path.display().to_string())
        }
        _ => None,
    };
    println!("{}", outcome.report_json(shown.as_deref()));
    Ok(if outcome.is_certified() { 0 } else { INCONCLUSIVE })
}

fn load_instance(path: &Path) -> Result<OneInThreeInstance> {
    Ok(parse_cnf(&read(path)?)?)
}

fn load_generators(text: &str) -> Result<(Vec<String>, Vec<Polynomial>)> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.is_array() {
        let polys: Vec<Polynomial> = serde_json::from_value(value)?;
        let mut vars: Vec<String> = Vec::new();
        for p in &polys {
            for v in p.vars() {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        let polys = polys.iter().map(|p| p.align_to(&vars)).collect::<Result<_, _>>()?;
        return Ok((vars, polys));
    }
    let set: Pop = serde_json::from_value(value)?;
    Ok((set.vars().to_vec(), closed_generators(&set)?))
}

fn run(cli: Cli) -> Result<u8> {
    let cfg = &cli.config;
    cfg.validate()?;
    let opts = cfg.certify_options();
    match &cli.command {
        Command::Gen { construction, cnf, out } => {
            let c: Construction = construction.parse()?;
            let inst = load_instance(cnf)?;
            write(out, &generate(&inst, c).to_json())?;
            Ok(0)
        }
        Command::Coercive { poly, level, output } => {
            let p = parse_poly(&read(poly)?)?;
            let outcome = run_levels(level, 1, cfg.r_max, |r| certify_coercive(&p, r, &opts))?;
            finish(outcome, poly, &output.out)
        }
        Command::Compact { pop, radius, level, output } => {
            let set = Pop::from_json(&read(pop)?)?;
            let radius = radius.as_deref().map(rational).transpose()?;
            let outcome = run_levels(level, 0, cfg.r_max, |r| certify_compact(&set, r, radius.as_ref(), &opts))?;
            finish(outcome, pop, &output.out)
        }
        Command::Archimedean { polys, big_r, level, output } => {
            let (vars, gs) = load_generators(&read(polys)?)?;
            let radius = rational(big_r)?;
            let outcome = run_levels(level, 0, cfg.r_max, |r| certify_archimedean(&vars, &gs, r, &radius, &opts))?;
            finish(outcome, polys, &output.out)
        }
        Command::Stable { instance, level, output } => {
            let si = StableInstance::from_json(&read(instance)?)?;
            let outcome = run_levels(level, 0, cfg.r_max, |r| certify_stable_compact(&si, r, &opts))?;
            finish(outcome, instance, &output.out)
        }
        Command::Verify { cert } => match CertificateFile::from_json(&read(cert)?)? {
            CertificateFile::Exact(c) => match verify_identity(&c) {
                Ok(()) => {
                    println!("{}", json!({"verified": true, "denominator_bits": c.max_denominator_bits()}));
                    Ok(0)
                }
                Err(e) => bail!("certificate does not verify: {e}"),
            },
            CertificateFile::Numeric(c) => {
                let residual = numeric_residual(&c.template, &c.multipliers);
                println!("{}", json!({"verified": false, "form": "numeric", "residual": residual}));
                Ok(INCONCLUSIVE)
            }
        },
        Command::Oracle { cnf, construction } => {
            let c: Construction = construction.parse()?;
            let inst = load_instance(cnf)?;
            let outcome = brute_force_solve_capped(&inst, cfg.brute_force_cap)?;
            let witness = match &outcome {
                SatOutcome::Sat(a) => Some(a.signs()),
                SatOutcome::Unsat => None,
            };
            let report = json!({
                "construction": c.to_string(),
                "sat": outcome.is_sat(),
                "label": label_for(outcome.is_sat(), c).to_string(),
                "assignment": witness,
            });
            println!("{report}");
            Ok(0)
        }
        Command::SdpSolve { problem } => {
            let p = SdpProblem::from_json(&read(problem)?)?;
            let sol = solve_feasibility(&p, &opts.solver)?;
            println!("{}", sol.to_json());
            Ok(if sol.status == SdpStatus::Inconclusive { INCONCLUSIVE } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // clap would exit with 2, which here means inconclusive
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", if first.starts_with("error:") { first.to_string() } else { format!("error: {first}") });
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
