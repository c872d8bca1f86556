//! Command-line driver: summarize, estimate, effects, simulate, recover,
//! lrtest.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/model validation error,
//! 4 estimation did not converge (outputs are still written).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rpmixl::{
    chi_square_upper_tail, default_effect_variables, effects_table, estimate, generate_draw_block,
    recovery_experiment, render_report, simulate_dataset, CovariateGenConfig, Dataset, DrawConfig,
    EffectsScope, Error, LoadOptions, MarginalEffectsTable, ModelContext, ModelSpec,
    OptimizerConfig, ParameterVector, ReportOptions, ResultsDocument,
};

#[derive(Parser)]
#[command(
    name = "rpmixl",
    version,
    about = "Random-parameters multinomial logit estimation by simulated maximum likelihood"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-column mean, standard deviation, max, and min of a dataset.
    Summarize {
        /// Input CSV file.
        #[arg(long)]
        data: PathBuf,
        /// Emit the machine-readable summary instead of the text table.
        #[arg(long)]
        json: bool,
    },
    /// Fit the model by simulated maximum likelihood and write the results
    /// document (marginal effects included).
    Estimate {
        #[command(flatten)]
        inputs: DataModelArgs,
        #[command(flatten)]
        draws: DrawArgs,
        /// Report absolute t-statistics instead of signed ones.
        #[arg(long = "abs-t")]
        abs_t: bool,
        /// Output path of the machine-readable results document.
        #[arg(long)]
        out: PathBuf,
        /// Optional output path of the rendered text report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Optimizer iteration cap.
        #[arg(long, default_value_t = 500)]
        max_iterations: usize,
        /// Label recorded in the report header (defaults to the model file stem).
        #[arg(long)]
        label: Option<String>,
    },
    /// Average discrete-change marginal effects for an estimated model.
    Effects {
        /// Results document produced by `estimate`.
        #[arg(long)]
        results: PathBuf,
        #[command(flatten)]
        inputs: DataModelArgs,
        /// Variables to evaluate (defaults to every utility variable).
        #[arg(long, value_delimiter = ',')]
        variables: Vec<String>,
        /// Restrict the average to observations observed at 0.
        #[arg(long)]
        observed_zero_only: bool,
        /// Output path of the effects document (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset from known parameters.
    Simulate {
        /// Model document.
        #[arg(long)]
        model: PathBuf,
        /// Parameter document (theta values and covariate probabilities).
        #[arg(long)]
        params: PathBuf,
        /// Number of observations.
        #[arg(long)]
        n: usize,
        /// Generator seed.
        #[arg(long)]
        seed: u64,
        /// Output CSV path (a .meta.json sidecar records the truth).
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate and re-estimate across seeds, reporting bias and coverage.
    Recover {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        params: PathBuf,
        /// Observations per replication.
        #[arg(long)]
        n: usize,
        /// Halton draws per observation.
        #[arg(long)]
        draws: usize,
        /// Number of replications (seeds are consecutive from --seed).
        #[arg(long)]
        seeds: usize,
        /// Base seed of the first replication.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        burn_in: usize,
        /// Output path of the recovery report.
        #[arg(long)]
        out: PathBuf,
    },
    /// Likelihood-ratio test between two nested results documents.
    Lrtest {
        #[arg(long)]
        restricted: PathBuf,
        #[arg(long)]
        unrestricted: PathBuf,
    },
}

#[derive(Args)]
struct DataModelArgs {
    /// Input CSV file.
    #[arg(long)]
    data: PathBuf,
    /// Model document.
    #[arg(long)]
    model: PathBuf,
    /// Outcome-label remappings, FROM=TO (repeatable).
    #[arg(long = "label-map", value_name = "FROM=TO")]
    label_map: Vec<String>,
    /// Columns that must contain only 0/1 values.
    #[arg(long, value_delimiter = ',')]
    binary: Vec<String>,
}

#[derive(Args)]
struct DrawArgs {
    /// Halton draws per observation.
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    /// Initial Halton points discarded per dimension.
    #[arg(long, default_value_t = 10)]
    burn_in: usize,
    /// Seed for deterministic draw-order shuffling.
    #[arg(long)]
    shuffle_seed: Option<u64>,
}

impl DrawArgs {
    fn config(&self) -> DrawConfig {
        DrawConfig {
            n_draws: self.draws,
            burn_in: self.burn_in,
            shuffle_seed: self.shuffle_seed,
            ..DrawConfig::default()
        }
    }
}

impl DataModelArgs {
    fn load(&self) -> Result<(ModelSpec, Dataset), Error> {
        let spec = ModelSpec::parse(&std::fs::read_to_string(&self.model)?)?;
        let mut label_map = BTreeMap::new();
        for mapping in &self.label_map {
            let (from, to) = mapping.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("label mapping `{mapping}` is not FROM=TO"))
            })?;
            label_map.insert(from.to_string(), to.to_string());
        }
        let opts = LoadOptions {
            declared_binary: self.binary.clone(),
            label_map,
        };
        let dataset = Dataset::load_csv(&self.data, &spec, &opts)?;
        Ok((spec, dataset))
    }
}

/// TOML parameter document for `simulate` and `recover`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsDocument {
    #[serde(default)]
    theta: BTreeMap<String, f64>,
    #[serde(default)]
    covariates: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct SimulateSidecar<'a> {
    parameter_names: Vec<String>,
    theta_true: &'a [f64],
    gen: &'a CovariateGenConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Summarize { data, json } => {
            let (dataset, skipped) = Dataset::load_csv_numeric(&data)?;
            for column in &skipped {
                eprintln!("note: skipping non-numeric column `{column}`");
            }
            let table = dataset.summarize();
            if json {
                println!("{}", serde_json::to_string_pretty(&table).expect("summary"));
            } else {
                print!("{}", table.to_text());
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Estimate {
            inputs,
            draws,
            abs_t,
            out,
            report,
            max_iterations,
            label,
        } => {
            let (spec, dataset) = inputs.load()?;
            let draw_config = draws.config();
            let optimizer = OptimizerConfig {
                max_iterations,
                ..OptimizerConfig::default()
            };
            let result = estimate(&dataset, &spec, &draw_config, &optimizer)?;
            let converged = result.converged;

            let ctx = ModelContext::new(&spec, &dataset)?;
            let block =
                generate_draw_block(dataset.n_observations(), spec.n_random(), &draw_config)?;
            let effects = effects_table(
                &ctx,
                &result.theta_hat,
                &block,
                &default_effect_variables(&ctx),
                EffectsScope::AllObservations,
            )?;

            let model_label = label.unwrap_or_else(|| file_stem(&inputs.model));
            let doc = ResultsDocument::new(model_label, &spec, &dataset, result, Some(effects));
            std::fs::write(&out, doc.to_json())?;

            let text = render_report(&doc, &ReportOptions { absolute_t: abs_t })?;
            print!("{text}");
            if let Some(report_path) = report {
                std::fs::write(&report_path, &text)?;
            }
            if converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("warning: estimation did not converge; outputs written anyway");
                Ok(ExitCode::from(4))
            }
        }

        Command::Effects {
            results,
            inputs,
            variables,
            observed_zero_only,
            out,
        } => {
            let doc = ResultsDocument::from_json(&std::fs::read_to_string(&results)?)?;
            let (spec, dataset) = inputs.load()?;
            if spec.alternatives().labels() != doc.alternatives.as_slice() {
                return Err(Error::MismatchedRun(format!(
                    "model alternatives {:?} do not match the results document {:?}",
                    spec.alternatives().labels(),
                    doc.alternatives
                )));
            }
            let ctx = ModelContext::new(&spec, &dataset)?;
            let theta =
                ParameterVector::new(doc.result.theta_hat.as_slice().to_vec(), ctx.layout())?;
            let block = generate_draw_block(
                dataset.n_observations(),
                spec.n_random(),
                &doc.result.draw_config,
            )?;
            let scope = if observed_zero_only {
                EffectsScope::ObservedZeroOnly
            } else {
                EffectsScope::AllObservations
            };
            let variables = if variables.is_empty() {
                default_effect_variables(&ctx)
            } else {
                variables
            };
            let table = effects_table(&ctx, &theta, &block, &variables, scope)?;
            print_effects(&table);
            if let Some(out) = out {
                std::fs::write(
                    &out,
                    serde_json::to_string_pretty(&table).expect("effects") + "\n",
                )?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Simulate {
            model,
            params,
            n,
            seed,
            out,
        } => {
            let spec = ModelSpec::parse(&std::fs::read_to_string(&model)?)?;
            let (theta, gen) = read_params(&params, &spec, n, seed)?;
            let dataset = simulate_dataset(&spec, &theta, &gen)?;
            dataset.write_csv(&out, &spec)?;
            let sidecar = SimulateSidecar {
                parameter_names: spec.parameter_layout().names(),
                theta_true: theta.as_slice(),
                gen: &gen,
            };
            let sidecar_path = sidecar_path(&out);
            std::fs::write(
                &sidecar_path,
                serde_json::to_string_pretty(&sidecar).expect("sidecar") + "\n",
            )?;
            println!(
                "wrote {} observations to {} (truth in {})",
                dataset.n_observations(),
                out.display(),
                sidecar_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Recover {
            model,
            params,
            n,
            draws,
            seeds,
            seed,
            burn_in,
            out,
        } => {
            let spec = ModelSpec::parse(&std::fs::read_to_string(&model)?)?;
            let (theta, gen) = read_params(&params, &spec, n, seed)?;
            let draw_config = DrawConfig {
                n_draws: draws,
                burn_in,
                ..DrawConfig::default()
            };
            let report = recovery_experiment(
                &spec,
                &theta,
                &gen,
                &draw_config,
                seeds,
                &OptimizerConfig::default(),
            )?;
            std::fs::write(
                &out,
                serde_json::to_string_pretty(&report).expect("recovery report") + "\n",
            )?;
            println!(
                "{:<32} {:>10} {:>12} {:>10}",
                "Parameter", "Truth", "Mean bias", "Coverage"
            );
            for p in &report.per_parameter {
                println!(
                    "{:<32} {:>10.3} {:>12.4} {:>9.1}%",
                    p.name,
                    p.true_value,
                    p.mean_bias,
                    100.0 * p.coverage
                );
            }
            println!(
                "overall: {:.1}% of parameter-seed pairs within 3 standard errors",
                100.0 * report.overall_coverage
            );
            Ok(ExitCode::SUCCESS)
        }

        Command::Lrtest {
            restricted,
            unrestricted,
        } => {
            let restricted_doc =
                ResultsDocument::from_json(&std::fs::read_to_string(&restricted)?)?;
            let unrestricted_doc =
                ResultsDocument::from_json(&std::fs::read_to_string(&unrestricted)?)?;
            let ll_r = restricted_doc.result.ll_beta;
            let ll_u = unrestricted_doc.result.ll_beta;
            if unrestricted_doc.parameters.len() <= restricted_doc.parameters.len() {
                return Err(Error::InvalidConfig(format!(
                    "unrestricted model must have more parameters ({} vs {})",
                    unrestricted_doc.parameters.len(),
                    restricted_doc.parameters.len()
                )));
            }
            if ll_u < ll_r {
                return Err(Error::RestrictedBetter {
                    restricted: ll_r,
                    unrestricted: ll_u,
                });
            }
            let df = unrestricted_doc.parameters.len() - restricted_doc.parameters.len();
            let chi2 = 2.0 * (ll_u - ll_r);
            let p = chi_square_upper_tail(chi2, df)?;
            println!("LR chi-square: {chi2:.4}");
            println!("Degrees of freedom: {df}");
            println!("p-value: {p:.6}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_params(
    path: &Path,
    spec: &ModelSpec,
    n: usize,
    seed: u64,
) -> Result<(ParameterVector, CovariateGenConfig), Error> {
    let raw: ParamsDocument = toml::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| Error::InvalidConfig(format!("parameter document: {e}")))?;
    let layout = spec.parameter_layout();
    let mut theta = vec![0.0; layout.len()];
    for (name, value) in &raw.theta {
        let index = layout
            .position(name)
            .ok_or_else(|| Error::UnknownParameter(name.clone()))?;
        theta[index] = *value;
    }
    let theta = ParameterVector::new(theta, &layout)?;

    // Referenced columns first (model order), then any extra generator
    // columns in sorted order.
    let referenced: Vec<String> = spec
        .referenced_columns()
        .into_iter()
        .map(str::to_string)
        .collect();
    let mut columns: Vec<(String, f64)> = referenced
        .iter()
        .map(|name| {
            (
                name.clone(),
                raw.covariates.get(name).copied().unwrap_or(0.5),
            )
        })
        .collect();
    for (name, p) in &raw.covariates {
        if !referenced.contains(name) {
            columns.push((name.clone(), *p));
        }
    }
    Ok((
        theta,
        CovariateGenConfig {
            columns,
            n_observations: n,
            seed,
        },
    ))
}

fn print_effects(table: &MarginalEffectsTable) {
    print!("{:<28}", "Variable");
    for alt in &table.alternatives {
        print!(" {alt:>12}");
    }
    println!();
    for row in &table.rows {
        print!("{:<28}", row.variable);
        for e in &row.effects {
            print!(" {e:>12.3}");
        }
        println!();
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}
