//! Realized coefficients, logit choice probabilities, and the simulated
//! log-likelihood.
//!
//! Per-observation simulated probabilities may be computed on the worker
//! pool; the final log-likelihood is always the ordered sum of per-observation
//! terms, so the result is bit-identical for any worker count.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation};
use crate::draws::DrawBlock;
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParamRole, ParameterLayout};
use crate::parallel;

/// Probabilities below this floor are clamped before the log (line searches
/// probe bad regions; the likelihood must stay finite).
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Packed estimable parameters aligned to a `ParameterLayout`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector {
    values: Vec<f64>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, layout: &ParameterLayout) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "parameter vector has {} values, layout expects {}",
                values.len(),
                layout.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch(format!(
                "parameter `{}` is not finite",
                layout.descriptors()[bad].name
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(layout: &ParameterLayout) -> Self {
        Self {
            values: vec![0.0; layout.len()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// A log-likelihood together with its per-observation terms (retained for
/// BHHH scores) and the number of floored probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodValue {
    pub loglik: f64,
    pub per_obs: Vec<f64>,
    pub underflows: usize,
}

/// Logit probabilities of a utility vector, stabilized by max subtraction.
pub fn choice_probabilities(utilities: &[f64]) -> Vec<f64> {
    let mut probs = utilities.to_vec();
    softmax_in_place(&mut probs);
    probs
}

fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// A model specification bound to a dataset: column and theta indices are
/// resolved once so likelihood evaluations run on plain slices.
pub struct ModelContext<'a> {
    spec: &'a ModelSpec,
    dataset: &'a Dataset,
    layout: ParameterLayout,
    entries: Vec<CompiledEntry>,
    n_alternatives: usize,
    n_random: usize,
}

struct CompiledEntry {
    alt: usize,
    /// Covariate column; `None` for a constant (x = 1).
    col: Option<usize>,
    coef: CompiledCoef,
}

enum CompiledCoef {
    Fixed {
        theta: usize,
    },
    Random {
        mean: usize,
        scale: usize,
        dim: usize,
        /// (covariate column, theta index) per mean shifter.
        mean_shifters: Vec<(usize, usize)>,
        /// (covariate column, theta index) per variance shifter.
        variance_shifters: Vec<(usize, usize)>,
    },
}

impl<'a> ModelContext<'a> {
    pub fn new(spec: &'a ModelSpec, dataset: &'a Dataset) -> Result<Self> {
        let layout = spec.parameter_layout();
        let mut entries = Vec::with_capacity(spec.entries().len());
        let mut dim = 0usize;
        for (i, entry) in spec.entries().iter().enumerate() {
            let alt = spec
                .alternatives()
                .index_of(&entry.alternative)
                .expect("validated spec");
            let col = if entry.is_constant() {
                None
            } else {
                Some(
                    dataset
                        .column_index(&entry.variable)
                        .ok_or_else(|| Error::MissingColumn(entry.variable.clone()))?,
                )
            };
            let coef = if entry.is_random() {
                let mean = layout
                    .index_of_role(i, ParamRole::RandomMean)
                    .expect("random entry has a mean");
                let scale = layout
                    .index_of_role(i, ParamRole::RandomScale)
                    .expect("random entry has a scale");
                let shifter_indices =
                    |role: ParamRole, names: &[String]| -> Result<Vec<(usize, usize)>> {
                        let thetas: Vec<usize> = layout
                            .descriptors()
                            .iter()
                            .filter(|d| d.entry == i && d.role == role)
                            .map(|d| d.index)
                            .collect();
                        names
                            .iter()
                            .zip(thetas)
                            .map(|(name, theta)| {
                                let col = dataset
                                    .column_index(name)
                                    .ok_or_else(|| Error::MissingColumn(name.clone()))?;
                                Ok((col, theta))
                            })
                            .collect()
                    };
                let mean_shifters = shifter_indices(ParamRole::MeanShifter, &entry.mean_shifters)?;
                let variance_shifters =
                    shifter_indices(ParamRole::VarianceShifter, &entry.variance_shifters)?;
                let coef = CompiledCoef::Random {
                    mean,
                    scale,
                    dim,
                    mean_shifters,
                    variance_shifters,
                };
                dim += 1;
                coef
            } else {
                CompiledCoef::Fixed {
                    theta: layout
                        .index_of_role(i, ParamRole::FixedBeta)
                        .expect("fixed entry has a beta"),
                }
            };
            entries.push(CompiledEntry { alt, col, coef });
        }
        Ok(Self {
            spec,
            dataset,
            layout,
            entries,
            n_alternatives: spec.alternatives().len(),
            n_random: dim,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    pub fn n_random(&self) -> usize {
        self.n_random
    }

    /// Realized coefficient of one compiled entry for a given observation
    /// row and draw vector. The raw scale enters multiplicatively (its sign
    /// is absorbed by the symmetric disturbance).
    fn coefficient(
        &self,
        entry: &CompiledEntry,
        theta: &[f64],
        values: &[f64],
        draw: &[f64],
    ) -> f64 {
        match &entry.coef {
            CompiledCoef::Fixed { theta: t } => theta[*t],
            CompiledCoef::Random {
                mean,
                scale,
                dim,
                mean_shifters,
                variance_shifters,
            } => {
                let mut m = theta[*mean];
                for &(col, t) in mean_shifters {
                    m += theta[t] * values[col];
                }
                let spread = if variance_shifters.is_empty() {
                    theta[*scale]
                } else {
                    let mut w = 0.0;
                    for &(col, t) in variance_shifters {
                        w += theta[t] * values[col];
                    }
                    theta[*scale] * w.exp()
                };
                m + spread * draw[*dim]
            }
        }
    }

    /// Per-entry realized coefficients for one observation and draw vector.
    pub fn realized_coefficients(
        &self,
        theta: &ParameterVector,
        obs: &Observation,
        draw: &[f64],
    ) -> Vec<f64> {
        assert_eq!(
            draw.len(),
            self.n_random,
            "draw length must match random entries"
        );
        self.entries
            .iter()
            .map(|e| self.coefficient(e, theta.as_slice(), &obs.values, draw))
            .collect()
    }

    fn utilities_into(&self, theta: &[f64], values: &[f64], draw: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for entry in &self.entries {
            let x = match entry.col {
                None => 1.0,
                Some(c) => values[c],
            };
            if x == 0.0 {
                continue;
            }
            out[entry.alt] += self.coefficient(entry, theta, values, draw) * x;
        }
    }

    /// Draw-averaged choice probabilities for one covariate row, using the
    /// given `n_draws × n_dims` draw slice.
    pub fn simulated_probabilities(
        &self,
        theta: &[f64],
        values: &[f64],
        draws: &[f64],
    ) -> Vec<f64> {
        let n_dims = self.n_random;
        let n_draws = draws.len().checked_div(n_dims).unwrap_or(1);
        let mut acc = vec![0.0; self.n_alternatives];
        let mut buf = vec![0.0; self.n_alternatives];
        for r in 0..n_draws {
            let draw = if n_dims == 0 {
                &[][..]
            } else {
                &draws[r * n_dims..(r + 1) * n_dims]
            };
            self.utilities_into(theta, values, draw, &mut buf);
            softmax_in_place(&mut buf);
            for (a, b) in acc.iter_mut().zip(buf.iter()) {
                *a += b;
            }
        }
        for a in acc.iter_mut() {
            *a /= n_draws as f64;
        }
        acc
    }

    fn check_shapes(&self, theta: &ParameterVector, block: &DrawBlock) -> Result<()> {
        if theta.len() != self.layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "theta has {} values, layout expects {}",
                theta.len(),
                self.layout.len()
            )));
        }
        if block.n_obs() != self.dataset.n_observations() {
            return Err(Error::ShapeMismatch(format!(
                "draw block covers {} observations, dataset has {}",
                block.n_obs(),
                self.dataset.n_observations()
            )));
        }
        if block.n_dims() != self.n_random {
            return Err(Error::ShapeMismatch(format!(
                "draw block has {} dimensions, model has {} random entries",
                block.n_dims(),
                self.n_random
            )));
        }
        Ok(())
    }

    /// Simulated log-likelihood: the probability of each observation's chosen
    /// outcome is the mean over draws of the logit probability at the
    /// realized coefficients.
    pub fn simulated_loglik(
        &self,
        theta: &ParameterVector,
        block: &DrawBlock,
    ) -> Result<LikelihoodValue> {
        self.check_shapes(theta, block)?;
        let t = theta.as_slice();
        let rows = parallel::map_ordered(self.dataset.n_observations(), |n| {
            let obs = &self.dataset.observations()[n];
            let p = self.simulated_prob_chosen(t, &obs.values, obs.chosen, block.observation(n));
            floored_log(p)
        });
        Ok(collect_loglik(rows))
    }

    fn simulated_prob_chosen(
        &self,
        theta: &[f64],
        values: &[f64],
        chosen: usize,
        draws: &[f64],
    ) -> f64 {
        let n_dims = self.n_random;
        let n_draws = draws.len().checked_div(n_dims).unwrap_or(1);
        let mut buf = vec![0.0; self.n_alternatives];
        let mut acc = 0.0;
        for r in 0..n_draws {
            let draw = if n_dims == 0 {
                &[][..]
            } else {
                &draws[r * n_dims..(r + 1) * n_dims]
            };
            self.utilities_into(theta, values, draw, &mut buf);
            softmax_in_place(&mut buf);
            acc += buf[chosen];
        }
        acc / n_draws as f64
    }

    /// Simulated log-likelihood plus per-observation score vectors
    /// (∂ ln P̂ₙ/∂θ, analytic). The scores feed the optimizer and the BHHH
    /// covariance estimator.
    pub fn simulated_loglik_with_scores(
        &self,
        theta: &ParameterVector,
        block: &DrawBlock,
    ) -> Result<(LikelihoodValue, Vec<Vec<f64>>)> {
        self.check_shapes(theta, block)?;
        let t = theta.as_slice();
        let rows = parallel::map_ordered(self.dataset.n_observations(), |n| {
            let obs = &self.dataset.observations()[n];
            self.prob_and_score(t, &obs.values, obs.chosen, block.observation(n))
        });
        let mut per_obs = Vec::with_capacity(rows.len());
        let mut scores = Vec::with_capacity(rows.len());
        for (lp, score) in rows {
            per_obs.push(lp);
            scores.push(score);
        }
        Ok((collect_loglik(per_obs), scores))
    }

    /// Analytic gradient of the simulated log-likelihood (ordered sum of the
    /// per-observation scores).
    pub fn simulated_gradient(
        &self,
        theta: &ParameterVector,
        block: &DrawBlock,
    ) -> Result<Vec<f64>> {
        let (_, scores) = self.simulated_loglik_with_scores(theta, block)?;
        let mut grad = vec![0.0; self.layout.len()];
        for score in &scores {
            for (g, s) in grad.iter_mut().zip(score.iter()) {
                *g += s;
            }
        }
        Ok(grad)
    }

    fn prob_and_score(
        &self,
        theta: &[f64],
        values: &[f64],
        chosen: usize,
        draws: &[f64],
    ) -> (f64, Vec<f64>) {
        let n_dims = self.n_random;
        let n_draws = draws.len().checked_div(n_dims).unwrap_or(1);
        let n_params = self.layout.len();
        let mut probs = vec![0.0; self.n_alternatives];
        // Per-entry (x, effective disturbance) saved between the utility and
        // score passes of each draw.
        let mut aux = vec![(0.0, 0.0); self.entries.len()];
        let mut acc_p = 0.0;
        let mut acc_score = vec![0.0; n_params];
        for r in 0..n_draws {
            let draw = if n_dims == 0 {
                &[][..]
            } else {
                &draws[r * n_dims..(r + 1) * n_dims]
            };
            probs.fill(0.0);
            for (ei, entry) in self.entries.iter().enumerate() {
                let x = match entry.col {
                    None => 1.0,
                    Some(c) => values[c],
                };
                let (beta, effective_draw) = match &entry.coef {
                    CompiledCoef::Fixed { theta: t } => (theta[*t], 0.0),
                    CompiledCoef::Random {
                        mean,
                        scale,
                        dim,
                        mean_shifters,
                        variance_shifters,
                    } => {
                        let mut m = theta[*mean];
                        for &(col, t) in mean_shifters {
                            m += theta[t] * values[col];
                        }
                        let wexp = if variance_shifters.is_empty() {
                            1.0
                        } else {
                            let mut w = 0.0;
                            for &(col, t) in variance_shifters {
                                w += theta[t] * values[col];
                            }
                            w.exp()
                        };
                        let ev = wexp * draw[*dim];
                        (m + theta[*scale] * ev, ev)
                    }
                };
                aux[ei] = (x, effective_draw);
                if x != 0.0 {
                    probs[entry.alt] += beta * x;
                }
            }
            softmax_in_place(&mut probs);
            let p = probs[chosen];
            acc_p += p;
            for (ei, entry) in self.entries.iter().enumerate() {
                let (x, ev) = aux[ei];
                if x == 0.0 {
                    continue;
                }
                let indicator = if entry.alt == chosen { 1.0 } else { 0.0 };
                let w = p * (indicator - probs[entry.alt]) * x;
                match &entry.coef {
                    CompiledCoef::Fixed { theta: t } => acc_score[*t] += w,
                    CompiledCoef::Random {
                        mean,
                        scale,
                        mean_shifters,
                        variance_shifters,
                        ..
                    } => {
                        acc_score[*mean] += w;
                        acc_score[*scale] += w * ev;
                        for &(col, t) in mean_shifters {
                            acc_score[t] += w * values[col];
                        }
                        for &(col, t) in variance_shifters {
                            acc_score[t] += w * theta[*scale] * ev * values[col];
                        }
                    }
                }
            }
        }
        let p_bar = acc_p / n_draws as f64;
        if p_bar > PROBABILITY_FLOOR {
            let mut score = acc_score;
            for s in score.iter_mut() {
                *s /= acc_p;
            }
            (p_bar.ln(), score)
        } else {
            // Floored region (also reached on NaN): the likelihood is
            // constant there.
            (PROBABILITY_FLOOR.ln(), vec![0.0; n_params])
        }
    }

    /// Exact multinomial-logit log-likelihood with all disturbances at zero:
    /// random coefficients collapse to their deterministic part
    /// (mean + mean-shifter terms). No draws are consumed.
    pub fn mnl_loglik(&self, theta: &ParameterVector) -> Result<LikelihoodValue> {
        if theta.len() != self.layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "theta has {} values, layout expects {}",
                theta.len(),
                self.layout.len()
            )));
        }
        let t = theta.as_slice();
        let zero_draw = vec![0.0; self.n_random];
        let rows = parallel::map_ordered(self.dataset.n_observations(), |n| {
            let obs = &self.dataset.observations()[n];
            let mut buf = vec![0.0; self.n_alternatives];
            self.utilities_into(t, &obs.values, &zero_draw, &mut buf);
            softmax_in_place(&mut buf);
            floored_log(buf[obs.chosen])
        });
        Ok(collect_loglik(rows))
    }

    /// Central-difference gradient of the simulated log-likelihood with
    /// per-coordinate step h = max(1e-6, 1e-6·|θᵢ|).
    pub fn loglik_gradient(&self, theta: &ParameterVector, block: &DrawBlock) -> Result<Vec<f64>> {
        self.check_shapes(theta, block)?;
        let mut grad = vec![0.0; theta.len()];
        let mut probe = theta.as_slice().to_vec();
        for i in 0..probe.len() {
            let h = 1e-6_f64.max(1e-6 * probe[i].abs());
            let original = probe[i];
            probe[i] = original + h;
            let up = self
                .simulated_loglik(&ParameterVector::new(probe.clone(), &self.layout)?, block)?
                .loglik;
            probe[i] = original - h;
            let down = self
                .simulated_loglik(&ParameterVector::new(probe.clone(), &self.layout)?, block)?
                .loglik;
            probe[i] = original;
            grad[i] = (up - down) / (2.0 * h);
        }
        Ok(grad)
    }
}

// `!(p > floor)` also catches NaN from overflowed utilities: the likelihood
// must never propagate a NaN into the optimizer.
fn floored_log(p: f64) -> f64 {
    if p > PROBABILITY_FLOOR {
        p.ln()
    } else {
        PROBABILITY_FLOOR.ln()
    }
}

fn collect_loglik(per_obs: Vec<f64>) -> LikelihoodValue {
    let floor_log = PROBABILITY_FLOOR.ln();
    let underflows = per_obs.iter().filter(|&&v| v == floor_log).count();
    let loglik = per_obs.iter().sum();
    LikelihoodValue {
        loglik,
        per_obs,
        underflows,
    }
}
