use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use spiketrans_cli::commands::{cmd_law, cmd_predict, cmd_shrink, cmd_tau, cmd_truncation_opt, PredictArgs};
use spiketrans_cli::output::write_file;
use spiketrans_cli::spec::{Grid, Metrics, Mode, Outputs, Trials, TrialsRule};
use spiketrans_cli::{figure_ids, figure_spec, run_experiment, write_outputs, CliError, ExperimentSpec};
use spiketrans_core::orthopoly::{DEFAULT_DEGREE, DEFAULT_MAX_ELL};
use spiketrans_core::Setting;

#[derive(Parser)]
#[command(name = "spiketrans", version, about = "Spiked matrices under elementwise transformations")]
struct Cli {
    /// Maximum worker threads for Monte Carlo (0 = all logical cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Directory for experiment outputs.
    #[arg(long, global = true, env = "SPIKETRANS_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    Asymmetric,
    Symmetric,
}

impl From<SettingArg> for Setting {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::Asymmetric => Setting::Asymmetric,
            SettingArg::Symmetric => Setting::Symmetric,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// τ(f, μ) and its per-order components as JSON.
    Tau {
        /// gaussian, cauchy, bimodal, or a JSON measure spec.
        #[arg(long)]
        measure: String,
        /// identity, relu, heaviside, score, truncate:<c>, hermite:<k>, optimal_series:<K>, or JSON.
        #[arg(long)]
        transform: String,
        /// Basis degree K.
        #[arg(long, default_value_t = DEFAULT_DEGREE)]
        degree: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_ELL)]
        max_ell: usize,
    },
    /// Limiting outliers and cosines of a spiked model as JSON.
    Predict {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        tau: f64,
        /// Signal strengths (comma separated or repeated).
        #[arg(long = "sigma", value_delimiter = ',', required = true, allow_negative_numbers = true)]
        sigmas: Vec<f64>,
        #[arg(long, value_enum, default_value = "asymmetric")]
        setting: SettingArg,
        /// Leading nonzero order for the Hadamard-power prediction (τ is then τ_ℓ).
        #[arg(long)]
        ell: Option<usize>,
        /// Limit of n^{ℓ−1} Σ u_i^{2ℓ}; 3 for Gaussian vectors at ℓ = 2.
        #[arg(long, default_value_t = 3.0)]
        m2l_u: f64,
        #[arg(long, default_value_t = 3.0)]
        m2l_v: f64,
    },
    /// Marchenko–Pastur (or semicircle) density table as CSV.
    Law {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 2001)]
        points: usize,
        #[arg(long)]
        semicircle: bool,
        /// Write to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run an experiment spec (TOML).
    Simulate {
        spec: PathBuf,
        /// Override the spec's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the spec's replicate count.
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Binomial-count experiment through the logistic link.
    Binomial {
        /// Number of trials m, or `sqrt_n` for ⌊√n⌋.
        #[arg(long)]
        trials: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long = "sigma", value_delimiter = ',', required = true)]
        sigmas: Vec<f64>,
        #[arg(long, default_value_t = 25)]
        reps: usize,
        #[arg(long)]
        seed: u64,
        /// Also report the KS distance of the bulk to Marchenko–Pastur.
        #[arg(long)]
        esd: bool,
    },
    /// Truncation level maximizing τ(f_c, μ) as JSON.
    TruncationOpt {
        #[arg(long)]
        measure: String,
        #[arg(long, default_value_t = 0.1)]
        lo: f64,
        #[arg(long, default_value_t = 20.0)]
        hi: f64,
    },
    /// Shrink singular values of a unit-noise matrix.
    Shrink {
        #[arg(long)]
        gamma: f64,
        #[arg(long = "values", value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// eta_star, identity, or hard:<level>.
        #[arg(long, default_value = "eta_star")]
        rule: String,
        /// Remaining singular values, used to check the noise normalization.
        #[arg(long, value_delimiter = ',')]
        bulk: Option<Vec<f64>>,
    },
    /// Run one of the bundled figure specs.
    Reproduce {
        /// Figure id, e.g. fig2-right.
        #[arg(required_unless_present = "list")]
        figure: Option<String>,
        /// List available figure ids.
        #[arg(long)]
        list: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
    },
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), CliError> {
    match output {
        Some(path) => write_file(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            let newline = if text.ends_with('\n') { "" } else { "\n" };
            match write!(out, "{text}{newline}").and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io("stdout", e)),
                _ => Ok(()),
            }
        }
    }
}

fn run_spec(mut spec: ExperimentSpec, seed: Option<u64>, reps: Option<usize>, cli: &Cli) -> Result<(), CliError> {
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(reps) = reps {
        spec.reps = reps;
    }
    spec.validate()?;
    let quiet = cli.quiet;
    let mut progress = |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    let result = run_experiment(&spec, cli.jobs, &mut progress)?;
    for path in write_outputs(&spec, &result, &cli.out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn binomial_spec(trials: &str, n: usize, gamma: f64, sigmas: Vec<f64>, reps: usize, seed: u64, esd: bool) -> Result<ExperimentSpec, CliError> {
    let trials = match trials {
        "sqrt_n" => Trials::Rule(TrialsRule::SqrtN),
        m => Trials::Count(m.parse().map_err(|_| CliError::Validation(format!("invalid trial count `{m}`")))?),
    };
    let tag = match trials {
        Trials::Count(m) => m.to_string(),
        Trials::Rule(_) => "sqrt_n".into(),
    };
    let name = format!("binomial-m{tag}-n{n}");
    Ok(ExperimentSpec {
        outputs: Outputs {
            csv: format!("{name}.csv"),
            json: format!("{name}.json"),
            svg: Some(format!("{name}.svg")),
            runs_csv: None,
        },
        name,
        setting: Setting::Asymmetric,
        gamma,
        n_grid: vec![n],
        sigma_grid: Grid::Values(sigmas),
        reps,
        seed,
        vector_scheme: None,
        scaling_exponent: None,
        measure: None,
        transforms: Vec::new(),
        mode: Mode::Binomial { trials },
        metrics: Metrics { esd, ..Metrics::default() },
    })
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Tau {
            measure,
            transform,
            degree,
            max_ell,
        } => emit(&cmd_tau(measure, transform, *degree, *max_ell)?, None),
        Command::Predict {
            gamma,
            tau,
            sigmas,
            setting,
            ell,
            m2l_u,
            m2l_v,
        } => {
            let args = PredictArgs {
                gamma: *gamma,
                tau: *tau,
                sigmas: sigmas.clone(),
                setting: (*setting).into(),
                ell: *ell,
                m2l_u: *m2l_u,
                m2l_v: *m2l_v,
            };
            emit(&cmd_predict(&args)?, None)
        }
        Command::Law {
            gamma,
            points,
            semicircle,
            output,
        } => emit(&cmd_law(*gamma, *points, *semicircle)?, output.as_deref()),
        Command::Simulate { spec, seed, reps } => run_spec(ExperimentSpec::load(spec)?, *seed, *reps, cli),
        Command::Binomial {
            trials,
            n,
            gamma,
            sigmas,
            reps,
            seed,
            esd,
        } => run_spec(binomial_spec(trials, *n, *gamma, sigmas.clone(), *reps, *seed, *esd)?, None, None, cli),
        Command::TruncationOpt { measure, lo, hi } => emit(&cmd_truncation_opt(measure, *lo, *hi)?, None),
        Command::Shrink {
            gamma,
            values,
            rule,
            bulk,
        } => emit(&cmd_shrink(*gamma, values, rule, bulk.as_deref())?, None),
        Command::Reproduce { figure, list, seed, reps } => {
            if *list {
                for id in figure_ids() {
                    println!("{id}");
                }
                return Ok(());
            }
            let id = figure.as_deref().expect("clap requires a figure id");
            run_spec(figure_spec(id)?, *seed, *reps, cli)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
