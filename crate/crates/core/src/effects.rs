//! Average discrete-change marginal effects of binary indicators.
//!
//! For every observation the indicator is forced to 1 and to 0, every
//! dependent quantity is rebuilt (derived interaction columns, mean/variance
//! shifter values), and the draw-averaged probabilities are differenced with
//! the same draw block on both sides (common random numbers).

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::draws::DrawBlock;
use crate::error::{Error, Result};
use crate::likelihood::{ModelContext, ParameterVector};
use crate::parallel;

/// Which observations enter the average.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum EffectsScope {
    /// Average over all observations regardless of the observed value.
    #[default]
    AllObservations,
    /// Sensitivity variant: only observations observed at 0.
    ObservedZeroOnly,
}

/// Effects of one variable on every alternative's choice probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectsRow {
    pub variable: String,
    pub effects: Vec<f64>,
}

/// Marginal-effect rows keyed by variable; columns follow the alternative
/// order of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalEffectsTable {
    pub alternatives: Vec<String>,
    pub rows: Vec<EffectsRow>,
}

impl MarginalEffectsTable {
    pub fn row(&self, variable: &str) -> Option<&EffectsRow> {
        self.rows.iter().find(|r| r.variable == variable)
    }
}

/// Average discrete-change effects of flipping `variable` from 0 to 1 on the
/// probability of each alternative.
pub fn average_discrete_effects(
    ctx: &ModelContext<'_>,
    theta: &ParameterVector,
    block: &DrawBlock,
    variable: &str,
    scope: EffectsScope,
) -> Result<Vec<f64>> {
    let dataset = ctx.dataset();
    let col = dataset
        .column_index(variable)
        .ok_or_else(|| Error::MissingColumn(variable.to_string()))?;
    if !dataset.columns()[col].binary {
        return Err(Error::NotBinary(variable.to_string()));
    }
    if block.n_obs() != dataset.n_observations() || block.n_dims() != ctx.n_random() {
        return Err(Error::ShapeMismatch(
            "draw block does not match dataset/model".into(),
        ));
    }
    let n_alternatives = ctx.spec().alternatives().len();
    let t = theta.as_slice();

    let diffs = parallel::map_ordered(dataset.n_observations(), |n| {
        let obs = &dataset.observations()[n];
        if scope == EffectsScope::ObservedZeroOnly && obs.values[col] != 0.0 {
            return None;
        }
        let on = counterfactual_row(dataset, &obs.values, col, variable, 1.0);
        let off = counterfactual_row(dataset, &obs.values, col, variable, 0.0);
        let p_on = ctx.simulated_probabilities(t, &on, block.observation(n));
        let p_off = ctx.simulated_probabilities(t, &off, block.observation(n));
        Some(
            p_on.iter()
                .zip(p_off.iter())
                .map(|(a, b)| a - b)
                .collect::<Vec<f64>>(),
        )
    });

    let mut sums = vec![0.0; n_alternatives];
    let mut count = 0usize;
    for diff in diffs.into_iter().flatten() {
        for (s, d) in sums.iter_mut().zip(diff.iter()) {
            *s += d;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidConfig(format!(
            "no observations with {variable} = 0 to average over"
        )));
    }
    for s in sums.iter_mut() {
        *s /= count as f64;
    }
    Ok(sums)
}

/// Effects for a list of variables, assembled in the given order.
pub fn effects_table(
    ctx: &ModelContext<'_>,
    theta: &ParameterVector,
    block: &DrawBlock,
    variables: &[String],
    scope: EffectsScope,
) -> Result<MarginalEffectsTable> {
    let rows = variables
        .iter()
        .map(|variable| {
            Ok(EffectsRow {
                variable: variable.clone(),
                effects: average_discrete_effects(ctx, theta, block, variable, scope)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MarginalEffectsTable {
        alternatives: ctx.spec().alternatives().labels().to_vec(),
        rows,
    })
}

/// Variables that get a marginal-effects row by default: every non-constant
/// utility variable, in layout order (constants and pure shifters excluded).
pub fn default_effect_variables(ctx: &ModelContext<'_>) -> Vec<String> {
    let spec = ctx.spec();
    let mut out = Vec::new();
    for descriptor in ctx.layout().descriptors() {
        let entry = &spec.entries()[descriptor.entry];
        if entry.is_constant() {
            continue;
        }
        let owns_row = matches!(
            descriptor.role,
            crate::model::ParamRole::FixedBeta | crate::model::ParamRole::RandomMean
        );
        if owns_row && !out.contains(&entry.variable) {
            out.push(entry.variable.clone());
        }
    }
    out
}

/// A covariate row with `target` forced to `forced` and every derived
/// interaction column recomputed in derivation order. A directly forced
/// interaction column is not overwritten by its own derivation.
fn counterfactual_row(
    dataset: &Dataset,
    values: &[f64],
    target: usize,
    target_name: &str,
    forced: f64,
) -> Vec<f64> {
    let mut row = values.to_vec();
    row[target] = forced;
    for derivation in &dataset.provenance().derivations {
        if derivation.name == target_name {
            continue;
        }
        let (Some(out), Some(left), Some(right)) = (
            dataset.column_index(&derivation.name),
            dataset.column_index(&derivation.left),
            dataset.column_index(&derivation.right),
        ) else {
            continue;
        };
        row[out] = row[left] * row[right];
    }
    row
}
