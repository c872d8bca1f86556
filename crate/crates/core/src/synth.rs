//! Synthetic data generation from known parameters and parameter-recovery
//! experiments.
//!
//! The generator is deliberately independent of the estimation path: its own
//! pseudo-random streams (one per observation), its own coefficient
//! arithmetic, and a plain softmax. Recovery success therefore cannot come
//! from shared code or shared noise.

use serde::{Deserialize, Serialize};

use crate::bfgs::OptimizerConfig;
use crate::data::{Dataset, Observation};
use crate::draws::DrawConfig;
use crate::error::{Error, Result};
use crate::estimate::{estimate, EstimationResult};
use crate::likelihood::ParameterVector;
use crate::model::{ModelSpec, ParamRole};
use crate::parallel;
use crate::rng::SplitMix64;

/// Bernoulli covariate generator configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateGenConfig {
    /// (column name, Bernoulli probability) in dataset column order.
    pub columns: Vec<(String, f64)>,
    pub n_observations: usize,
    pub seed: u64,
}

impl CovariateGenConfig {
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.n_observations == 0 {
            return Err(Error::InvalidConfig(
                "n_observations must be at least 1".into(),
            ));
        }
        for (name, p) in &self.columns {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidConfig(format!(
                    "probability {p} for column `{name}` outside [0, 1]"
                )));
            }
        }
        for referenced in spec.referenced_columns() {
            if !self.columns.iter().any(|(name, _)| name == referenced) {
                return Err(Error::MissingColumn(referenced.to_string()));
            }
        }
        Ok(())
    }
}

/// Simulates a dataset: covariates ~ Bernoulli, one normal disturbance per
/// random entry, outcome sampled from the logit probabilities of the realized
/// utilities. Deterministic given the seed; observation `i` consumes only
/// stream `i`.
pub fn simulate_dataset(
    spec: &ModelSpec,
    theta_true: &ParameterVector,
    gen: &CovariateGenConfig,
) -> Result<Dataset> {
    gen.validate(spec)?;
    let layout = spec.parameter_layout();
    if theta_true.len() != layout.len() {
        return Err(Error::ShapeMismatch(format!(
            "theta has {} values, layout expects {}",
            theta_true.len(),
            layout.len()
        )));
    }
    let theta = theta_true.as_slice();
    let n_alternatives = spec.alternatives().len();
    let column_index = |name: &str| gen.columns.iter().position(|(c, _)| c == name);

    // Resolve indices once, outside the per-observation loop.
    struct SimEntry {
        alt: usize,
        col: Option<usize>,
        random: Option<SimRandom>,
        fixed_theta: usize,
    }
    struct SimRandom {
        mean: usize,
        scale: usize,
        dim: usize,
        mean_shifters: Vec<(usize, usize)>,
        variance_shifters: Vec<(usize, usize)>,
    }
    let mut entries = Vec::new();
    let mut dim = 0usize;
    for (i, entry) in spec.entries().iter().enumerate() {
        let alt = spec
            .alternatives()
            .index_of(&entry.alternative)
            .expect("validated spec");
        let col = if entry.is_constant() {
            None
        } else {
            Some(column_index(&entry.variable).expect("validated columns"))
        };
        let shifters = |role: ParamRole, names: &[String]| -> Vec<(usize, usize)> {
            let thetas: Vec<usize> = layout
                .descriptors()
                .iter()
                .filter(|d| d.entry == i && d.role == role)
                .map(|d| d.index)
                .collect();
            names
                .iter()
                .zip(thetas)
                .map(|(name, t)| (column_index(name).expect("validated columns"), t))
                .collect()
        };
        let random = if entry.is_random() {
            let r = SimRandom {
                mean: layout.index_of_role(i, ParamRole::RandomMean).unwrap(),
                scale: layout.index_of_role(i, ParamRole::RandomScale).unwrap(),
                dim,
                mean_shifters: shifters(ParamRole::MeanShifter, &entry.mean_shifters),
                variance_shifters: shifters(ParamRole::VarianceShifter, &entry.variance_shifters),
            };
            dim += 1;
            Some(r)
        } else {
            None
        };
        entries.push(SimEntry {
            alt,
            col,
            random,
            fixed_theta: layout.index_of_role(i, ParamRole::FixedBeta).unwrap_or(0),
        });
    }
    let n_random = dim;

    let mut observations = Vec::with_capacity(gen.n_observations);
    for i in 0..gen.n_observations {
        let mut rng = SplitMix64::stream(gen.seed, i as u64);
        // Stream consumption order: covariates, disturbances, outcome draw.
        let values: Vec<f64> = gen
            .columns
            .iter()
            .map(|(_, p)| if rng.next_f64() < *p { 1.0 } else { 0.0 })
            .collect();
        let disturbances: Vec<f64> = (0..n_random).map(|_| rng.next_normal()).collect();

        let mut utilities = vec![0.0; n_alternatives];
        for entry in &entries {
            let x = match entry.col {
                None => 1.0,
                Some(c) => values[c],
            };
            let coef = match &entry.random {
                None => theta[entry.fixed_theta],
                Some(r) => {
                    let mut m = theta[r.mean];
                    for &(col, t) in &r.mean_shifters {
                        m += theta[t] * values[col];
                    }
                    let mut w = 0.0;
                    for &(col, t) in &r.variance_shifters {
                        w += theta[t] * values[col];
                    }
                    m + theta[r.scale] * w.exp() * disturbances[r.dim]
                }
            };
            utilities[entry.alt] += coef * x;
        }
        // Plain softmax, intentionally distinct from the estimator's
        // stabilized version.
        let exps: Vec<f64> = utilities.iter().map(|u| u.exp()).collect();
        let total: f64 = exps.iter().sum();
        let u = rng.next_f64() * total;
        let mut cumulative = 0.0;
        let mut chosen = n_alternatives - 1;
        for (k, e) in exps.iter().enumerate() {
            cumulative += e;
            if u < cumulative {
                chosen = k;
                break;
            }
        }
        observations.push(Observation { chosen, values });
    }

    Dataset::from_parts(
        gen.columns.iter().map(|(name, _)| name.clone()).collect(),
        observations,
        n_alternatives,
        format!("simulated(seed={})", gen.seed),
    )
}

/// One estimation replication inside a recovery experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub seed: u64,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// |θ̂ − θ_true| < 3·se per parameter (scales compared by absolute value).
    pub within_3se: Vec<bool>,
    pub converged: bool,
}

/// Per-parameter recovery summary across replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecovery {
    pub name: String,
    pub true_value: f64,
    pub mean_bias: f64,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub parameter_names: Vec<String>,
    pub theta_true: Vec<f64>,
    pub n_observations: usize,
    pub draw_config: DrawConfig,
    pub replications: Vec<Replication>,
    pub per_parameter: Vec<ParamRecovery>,
    /// Fraction of (parameter, seed) pairs within 3 standard errors.
    pub overall_coverage: f64,
}

/// Simulates and re-estimates `n_seeds` datasets (seeds `gen.seed + k`),
/// recording bias and 3·se coverage per parameter. Replications run
/// concurrently; the report is assembled in seed order.
pub fn recovery_experiment(
    spec: &ModelSpec,
    theta_true: &ParameterVector,
    gen: &CovariateGenConfig,
    draws: &DrawConfig,
    n_seeds: usize,
    optimizer: &OptimizerConfig,
) -> Result<RecoveryReport> {
    if n_seeds == 0 {
        return Err(Error::InvalidConfig("n_seeds must be at least 1".into()));
    }
    gen.validate(spec)?;
    let layout = spec.parameter_layout();
    if theta_true.len() != layout.len() {
        return Err(Error::ShapeMismatch(format!(
            "theta has {} values, layout expects {}",
            theta_true.len(),
            layout.len()
        )));
    }
    let scale_roles: Vec<bool> = layout
        .descriptors()
        .iter()
        .map(|d| d.role == ParamRole::RandomScale)
        .collect();

    let runs: Vec<Result<(u64, EstimationResult)>> = parallel::map_ordered(n_seeds, |k| {
        let seed = gen.seed + k as u64;
        let replication_gen = CovariateGenConfig {
            seed,
            ..gen.clone()
        };
        let wrap = |e: Error| Error::Replication {
            seed,
            source: Box::new(e),
        };
        let dataset = simulate_dataset(spec, theta_true, &replication_gen).map_err(wrap)?;
        let result = estimate(&dataset, spec, draws, optimizer).map_err(wrap)?;
        Ok((seed, result))
    });

    let mut replications = Vec::with_capacity(n_seeds);
    for run in runs {
        let (seed, result) = run?;
        let mut std_errors = Vec::with_capacity(layout.len());
        let mut within = Vec::with_capacity(layout.len());
        for (i, is_scale) in scale_roles.iter().enumerate() {
            let se = result.covariance[i][i].sqrt();
            let truth = theta_true.get(i);
            let est = result.theta_hat.get(i);
            let bias = if *is_scale {
                est.abs() - truth.abs()
            } else {
                est - truth
            };
            std_errors.push(se);
            within.push(bias.abs() < 3.0 * se);
        }
        replications.push(Replication {
            seed,
            estimates: result.theta_hat.as_slice().to_vec(),
            std_errors,
            within_3se: within,
            converged: result.converged,
        });
    }

    let per_parameter: Vec<ParamRecovery> = layout
        .descriptors()
        .iter()
        .map(|d| {
            let truth = theta_true.get(d.index);
            let mut bias_sum = 0.0;
            let mut hits = 0usize;
            for rep in &replications {
                let est = rep.estimates[d.index];
                bias_sum += if scale_roles[d.index] {
                    est.abs() - truth.abs()
                } else {
                    est - truth
                };
                hits += rep.within_3se[d.index] as usize;
            }
            ParamRecovery {
                name: d.name.clone(),
                true_value: truth,
                mean_bias: bias_sum / replications.len() as f64,
                coverage: hits as f64 / replications.len() as f64,
            }
        })
        .collect();

    let total_pairs = layout.len() * replications.len();
    let total_hits: usize = replications
        .iter()
        .map(|r| r.within_3se.iter().filter(|&&w| w).count())
        .sum();

    Ok(RecoveryReport {
        parameter_names: layout.names(),
        theta_true: theta_true.as_slice().to_vec(),
        n_observations: gen.n_observations,
        draw_config: draws.clone(),
        replications,
        per_parameter,
        overall_coverage: total_hits as f64 / total_pairs as f64,
    })
}
