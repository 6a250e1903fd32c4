use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use cpumap::battery::{phi, simulate_charging, BatteryConfig, EnvJson, EnvState};
use cpumap::choi::{
    build_fixed_point_choi, check_fixed_point, check_unital, ChoiJson, ChoiMatrix,
    FixedPointSpec, VectorJson, PSD_TOL, RESIDUAL_TOL,
};
use cpumap::cpu_map::{
    apply_dual_choi, evolve_linear, kraus_from_fixed_point, EvolutionTrace,
};
use cpumap::io::{fmt_f64, to_json_string};
use cpumap::matcore::{ComplexMatrix, HermitianObservable, MatrixJson};
use cpumap::metric::{build_profile, MetricParams, DEFAULT_OFFSET_FRACTION};
use cpumap::random::{random_density, seeded_rng};
use cpumap::{selftest, Error};

#[derive(Debug, Parser)]
#[command(name = "cpumap", version, about = "Fixed-point CPU maps, battery charging and dilation profiles")]
struct Cli {
    /// Seed for every randomised default (initial states, self-test draws).
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Defaults to the `--out` extension, then JSON.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Override the pass threshold of residual checks.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build Z_A from an observable and a vector.
    ChoiBuild {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long = "v")]
        v: PathBuf,
        /// Write Z_A even when it is not positive semidefinite.
        #[arg(long)]
        allow_non_cp: bool,
    },
    /// Report unitality, fixed-point and positivity residuals of a Choi matrix.
    ChoiCheck {
        #[arg(long = "Z")]
        z: PathBuf,
        #[arg(long = "A")]
        a: PathBuf,
    },
    /// Kraus operators of the fixed-point map.
    KrausExtract {
        #[arg(long = "A")]
        a: PathBuf,
        #[arg(long = "v")]
        v: PathBuf,
    },
    /// Apply the dual map of a Choi matrix to an observable.
    MapApply {
        #[arg(long = "Z")]
        z: PathBuf,
        #[arg(long = "B")]
        b: PathBuf,
    },
    /// Linear growth of an observable under a fixed-point map.
    Evolve {
        #[arg(long = "Z")]
        z: PathBuf,
        #[arg(long = "A0")]
        a0: PathBuf,
        /// Density matrix; a seeded random state when omitted.
        #[arg(long)]
        rho: Option<PathBuf>,
        /// `start:stop:count` (inclusive) or a comma-separated list.
        #[arg(long)]
        times: String,
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
    },
    /// Charging rate phi of an environment state.
    BatteryPhi {
        #[arg(long)]
        env: PathBuf,
    },
    /// Charging trajectory of the number operator.
    BatterySim {
        #[arg(long)]
        env: PathBuf,
        #[arg(long)]
        rho: Option<PathBuf>,
        #[arg(long)]
        times: String,
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
    },
    /// Dilation profile over a radial grid.
    MetricProfile {
        #[arg(long = "M")]
        mass: f64,
        /// Defaults to 0.1·M.
        #[arg(long)]
        r0: Option<f64>,
        #[arg(long, default_value_t = cpumap::battery::DEFAULT_TRUNCATION)]
        d: usize,
        #[arg(long)]
        grid: String,
        /// Embed the environment state of every record (JSON only).
        #[arg(long)]
        verbose: bool,
    },
    /// Run the seeded invariant suite.
    Selftest,
}

#[derive(Debug)]
enum CliError {
    Validation(Error),
    Rejected { code: &'static str, detail: String },
    Io(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Validation(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            _ => 2,
        }
    }

    fn to_json(&self) -> String {
        let (code, detail) = match self {
            CliError::Validation(e) => (e.code(), e.to_string()),
            CliError::Rejected { code, detail } => (*code, detail.clone()),
            CliError::Io(detail) => ("IoError", detail.clone()),
        };
        serde_json::json!({ "error": code, "detail": detail }).to_string()
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn read_matrix(path: &Path) -> CliResult<ComplexMatrix> {
    Ok(ComplexMatrix::try_from(read_json::<MatrixJson>(path)?)?)
}

fn read_observable(path: &Path) -> CliResult<HermitianObservable> {
    Ok(HermitianObservable::new(read_matrix(path)?)?)
}

fn read_spec(a: &Path, v: &Path) -> CliResult<FixedPointSpec> {
    let a = read_observable(a)?;
    let v = read_json::<VectorJson>(v)?.to_vec()?;
    Ok(FixedPointSpec::new(a, v)?)
}

fn read_choi(path: &Path) -> CliResult<ChoiMatrix> {
    Ok(ChoiMatrix::try_from(read_json::<ChoiJson>(path)?)?)
}

fn read_env(path: &Path) -> CliResult<EnvState> {
    Ok(EnvState::try_from(read_json::<EnvJson>(path)?)?)
}

fn read_rho(path: Option<&Path>, dim: usize, seed: u64) -> CliResult<ComplexMatrix> {
    match path {
        Some(p) => read_matrix(p),
        None => Ok(random_density(&mut seeded_rng(seed), dim)),
    }
}

/// `start:stop:count` with inclusive endpoints, or `a,b,c`.
fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = |detail: String| CliError::Rejected { code: "InvalidGrid", detail };
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(format!("not a number: {s:?}")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, count] => {
            let (start, stop) = (number(start)?, number(stop)?);
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad point count {count:?}")))?;
            match count {
                0 => Err(bad("grid needs at least one point".into())),
                1 => Ok(vec![start]),
                _ => {
                    let step = (stop - start) / (count - 1) as f64;
                    Ok((0..count)
                        .map(|k| if k == count - 1 { stop } else { start + step * k as f64 })
                        .collect())
                }
            }
        }
        [single] => single.split(',').map(number).collect(),
        _ => Err(bad(format!("expected start:stop:count, got {text:?}"))),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    to_json_string(value)
}

fn render_trace(trace: &EvolutionTrace, format: Format) -> String {
    match format {
        Format::Csv => trace.to_csv(),
        Format::Json => json(&trace.to_json_value()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    let format = cli.format.unwrap_or_else(|| match out.and_then(|p| p.extension()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Json,
    });
    let tol = cli.tolerance.unwrap_or(RESIDUAL_TOL);
    match cli.command {
        Command::ChoiBuild { a, v, allow_non_cp } => {
            let spec = read_spec(&a, &v)?;
            let z = build_fixed_point_choi(&spec);
            if !allow_non_cp && !z.is_completely_positive(cli.tolerance.unwrap_or(PSD_TOL)) {
                return Err(CliError::Rejected {
                    code: "NotCompletelyPositive",
                    detail: "Z_A has a negative eigenvalue; pass --allow-non-cp to write it anyway".into(),
                });
            }
            emit(out, &json(&z))
        }
        Command::ChoiCheck { z, a } => {
            let z = read_choi(&z)?;
            let a = read_observable(&a)?;
            let unital = check_unital(&z);
            let fixed = check_fixed_point(&z, &a)?;
            let cp = z.is_completely_positive(PSD_TOL);
            let report = format!(
                "unital_residual {}\nfixed_point_residual {}\ncompletely_positive {cp}\n",
                fmt_f64(unital),
                fmt_f64(fixed)
            );
            emit(out, &report)?;
            if unital > tol || fixed > tol {
                return Err(CliError::Rejected {
                    code: "ResidualExceeded",
                    detail: format!("residuals {unital:e}, {fixed:e} exceed {tol:e}"),
                });
            }
            Ok(())
        }
        Command::KrausExtract { a, v } => {
            let spec = read_spec(&a, &v)?;
            emit(out, &json(&kraus_from_fixed_point(&spec)?))
        }
        Command::MapApply { z, b } => {
            let z = read_choi(&z)?;
            let b = read_observable(&b)?;
            emit(out, &json(apply_dual_choi(&z, &b)?.matrix()))
        }
        Command::Evolve { z, a0, rho, times, rate } => {
            let z = read_choi(&z)?;
            let a0 = read_observable(&a0)?;
            let rho = read_rho(rho.as_deref(), z.dim(), cli.seed)?;
            let trace = evolve_linear(&z, &a0, &rho, &parse_grid(&times)?, rate)?;
            emit(out, &render_trace(&trace, format))
        }
        Command::BatteryPhi { env } => {
            let env = read_env(&env)?;
            emit(out, &format!("{}\n", fmt_f64(phi(&env))))
        }
        Command::BatterySim { env, rho, times, rate } => {
            let env = read_env(&env)?;
            let rho = read_rho(rho.as_deref(), env.dim(), cli.seed)?;
            let cfg = BatteryConfig::new(env, rho, rate)?;
            let trace = simulate_charging(&cfg, &parse_grid(&times)?)?;
            emit(out, &render_trace(&trace, format))
        }
        Command::MetricProfile { mass, r0, d, grid, verbose } => {
            let r0 = r0.unwrap_or(DEFAULT_OFFSET_FRACTION * mass);
            let params = MetricParams::new(mass, r0, d, parse_grid(&grid)?)?;
            let profile = build_profile(&params)?;
            let text = match format {
                Format::Csv => profile.to_csv(),
                Format::Json => profile.to_json(verbose),
            };
            emit(out, &text)
        }
        Command::Selftest => {
            let report = selftest::run(cli.seed);
            emit(out, &report.render())?;
            if !report.all_passed() {
                return Err(CliError::Rejected {
                    code: "SelftestFailed",
                    detail: format!("{} of {} checks failed", report.failed(), report.checks.len()),
                });
            }
            Ok(())
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("CPUMAP_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        if n > 0 {
            // Ignored if a pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
