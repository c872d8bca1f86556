//! The machine-readable results document and its table rendering.
//!
//! The text table follows the conventional layout: constants, random parameters
//! with their standard-deviation and share rows, heterogeneity-in-mean rows,
//! heterogeneity-in-variance rows, fixed parameters, interaction effects,
//! and a fit footer.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::effects::MarginalEffectsTable;
use crate::error::{Error, Result};
use crate::estimate::{CovarianceMethod, EstimationResult};
use crate::model::{ModelSpec, ParamRole};

/// One parameter's identity inside the results document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterRecord {
    pub name: String,
    pub role: ParamRole,
    /// Index of the owning utility entry.
    pub entry: usize,
    pub alternative: String,
    pub variable: String,
    /// Shifter column for mean/variance-shifter coefficients.
    pub shifter: Option<String>,
}

/// Lossless record of an estimation run: every estimation field plus the
/// layout's parameter identities, optional marginal effects, and the
/// interaction provenance needed to section the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub model_label: String,
    pub alternatives: Vec<String>,
    pub base_alternative: String,
    pub n_observations: usize,
    pub parameters: Vec<ParameterRecord>,
    pub result: EstimationResult,
    pub effects: Option<MarginalEffectsTable>,
    pub interaction_variables: Vec<String>,
}

impl ResultsDocument {
    pub fn new(
        model_label: impl Into<String>,
        spec: &ModelSpec,
        dataset: &Dataset,
        result: EstimationResult,
        effects: Option<MarginalEffectsTable>,
    ) -> Self {
        let parameters = spec
            .parameter_layout()
            .descriptors()
            .iter()
            .map(|d| {
                let entry = &spec.entries()[d.entry];
                ParameterRecord {
                    name: d.name.clone(),
                    role: d.role,
                    entry: d.entry,
                    alternative: entry.alternative.clone(),
                    variable: entry.variable.clone(),
                    shifter: d.shifter.clone(),
                }
            })
            .collect();
        Self {
            model_label: model_label.into(),
            alternatives: spec.alternatives().labels().to_vec(),
            base_alternative: spec.alternatives().base_label().to_string(),
            n_observations: dataset.n_observations(),
            parameters,
            result,
            effects,
            interaction_variables: dataset
                .provenance()
                .derivations
                .iter()
                .map(|d| d.name.clone())
                .collect(),
        }
    }

    pub fn parameter_names(&self) -> Vec<&str> {
        self.parameters.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ResultsFormat(e.to_string()))
    }
}

/// Rendering options.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReportOptions {
    /// Print |t| instead of signed t-statistics.
    pub absolute_t: bool,
}

const NAME_WIDTH: usize = 52;

/// Renders the fixed-width text table. Deterministic: equal documents yield
/// byte-identical text.
pub fn render_report(doc: &ResultsDocument, opts: &ReportOptions) -> Result<String> {
    let n_params = doc.parameters.len();
    if doc.result.theta_hat.len() != n_params || doc.result.t_stats.len() != n_params {
        return Err(Error::ResultsFormat(format!(
            "document lists {n_params} parameters but the result carries {} estimates / {} t-statistics",
            doc.result.theta_hat.len(),
            doc.result.t_stats.len()
        )));
    }
    if let Some(effects) = &doc.effects {
        if effects.alternatives != doc.alternatives {
            return Err(Error::MismatchedRun(format!(
                "effects were computed for alternatives {:?}, results for {:?}",
                effects.alternatives, doc.alternatives
            )));
        }
    }
    let rho_check = 1.0 - doc.result.ll_beta / doc.result.ll_zero;
    if (doc.result.rho_squared - rho_check).abs() > 1e-12 {
        return Err(Error::ResultsFormat(format!(
            "rho-squared {} inconsistent with its log-likelihood fields (expected {rho_check})",
            doc.result.rho_squared
        )));
    }

    let mut out = String::new();
    let mut rendered = 0usize;

    out.push_str("Random parameters multinomial logit model with heterogeneity in means\n");
    out.push_str(&format!(
        "Model: {}    Observations: {}    Base alternative: {}\n",
        doc.model_label, doc.n_observations, doc.base_alternative
    ));
    let dc = &doc.result.draw_config;
    out.push_str(&format!(
        "Draws: {} Halton per observation (burn-in {}{})\n\n",
        dc.n_draws,
        dc.burn_in,
        match dc.shuffle_seed {
            Some(seed) => format!(", shuffle seed {seed}"),
            None => String::new(),
        }
    ));

    out.push_str(&format!(
        "{:<NAME_WIDTH$} {:>10} {:>8}",
        "Parameter", "Estimate", "t-stat"
    ));
    if doc.effects.is_some() {
        out.push_str("   Marginal effects:");
        for alt in &doc.alternatives {
            out.push_str(&format!(" {alt:>12}"));
        }
    }
    out.push('\n');
    let rule_len = NAME_WIDTH
        + 20
        + if doc.effects.is_some() {
            20 + 13 * doc.alternatives.len()
        } else {
            0
        };
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');

    let t_of = |index: usize| {
        let t = doc.result.t_stats[index];
        if opts.absolute_t {
            t.abs()
        } else {
            t
        }
    };
    let effects_cells = |doc: &ResultsDocument, variable: &str| -> String {
        let Some(effects) = &doc.effects else {
            return String::new();
        };
        match effects.row(variable) {
            Some(row) => {
                let mut cells = String::from("                    ");
                for e in &row.effects {
                    cells.push_str(&format!(" {e:>12.3}"));
                }
                cells
            }
            None => String::new(),
        }
    };
    let parameter_line = |out: &mut String,
                          rendered: &mut usize,
                          label: &str,
                          estimate: f64,
                          t: f64,
                          cells: &str| {
        out.push_str(&format!(
            "{label:<NAME_WIDTH$} {estimate:>10.3} {t:>8.3}{cells}\n"
        ));
        *rendered += 1;
    };

    let index_of = |record: &ParameterRecord| record_index(doc, record);

    // Constants first.
    for record in &doc.parameters {
        if record.role == ParamRole::FixedBeta && record.variable == crate::model::CONSTANT {
            let i = index_of(record);
            parameter_line(
                &mut out,
                &mut rendered,
                &format!("Constant [{}]", record.alternative),
                doc.result.theta_hat.get(i),
                t_of(i),
                "",
            );
        }
    }

    // Random parameters with their scale and share rows.
    let random_means: Vec<&ParameterRecord> = doc
        .parameters
        .iter()
        .filter(|p| p.role == ParamRole::RandomMean)
        .collect();
    if !random_means.is_empty() {
        out.push_str("Random parameters in utility functions\n");
        for record in &random_means {
            let i = index_of(record);
            parameter_line(
                &mut out,
                &mut rendered,
                &format!("{} [{}]", record.variable, record.alternative),
                doc.result.theta_hat.get(i),
                t_of(i),
                &effects_cells(doc, &record.variable),
            );
            if let Some(scale) = doc
                .parameters
                .iter()
                .find(|p| p.role == ParamRole::RandomScale && p.entry == record.entry)
            {
                let j = index_of(scale);
                // Sign of the raw scale is unidentified; the distribution's
                // standard deviation |s| is what the row reports.
                parameter_line(
                    &mut out,
                    &mut rendered,
                    "  Standard deviation of parameter distribution",
                    doc.result.theta_hat.get(j).abs(),
                    doc.result.t_stats[j].abs(),
                    "",
                );
            }
            if let Some(share) = doc
                .result
                .shares
                .iter()
                .find(|s| s.parameter == record.name)
            {
                if share.degenerate {
                    out.push_str(&format!(
                        "  Distribution is a point mass: {:.2}% above zero\n",
                        100.0 * share.above_zero
                    ));
                } else {
                    out.push_str(&format!(
                        "  Share above zero: {:.2}%   below zero: {:.2}%\n",
                        100.0 * share.above_zero,
                        100.0 * share.below_zero
                    ));
                }
            }
        }
    }

    // Heterogeneity rows.
    for (role, header, sep) in [
        (
            ParamRole::MeanShifter,
            "Heterogeneity in the mean of the random parameter\n",
            " : ",
        ),
        (
            ParamRole::VarianceShifter,
            "Heterogeneity in the variance of the random parameter\n",
            " : ",
        ),
    ] {
        let rows: Vec<&ParameterRecord> =
            doc.parameters.iter().filter(|p| p.role == role).collect();
        if rows.is_empty() {
            continue;
        }
        out.push_str(header);
        for record in rows {
            let i = index_of(record);
            let shifter = record.shifter.as_deref().unwrap_or("?");
            parameter_line(
                &mut out,
                &mut rendered,
                &format!("{}{sep}{shifter} [{}]", record.variable, record.alternative),
                doc.result.theta_hat.get(i),
                t_of(i),
                "",
            );
        }
    }

    // Fixed parameters, interactions split out.
    for (want_interaction, header) in [
        (false, "Fixed parameters in utility functions\n"),
        (true, "Interaction effects\n"),
    ] {
        let rows: Vec<&ParameterRecord> = doc
            .parameters
            .iter()
            .filter(|p| {
                p.role == ParamRole::FixedBeta
                    && p.variable != crate::model::CONSTANT
                    && doc.interaction_variables.contains(&p.variable) == want_interaction
            })
            .collect();
        if rows.is_empty() {
            continue;
        }
        out.push_str(header);
        for record in rows {
            let i = index_of(record);
            parameter_line(
                &mut out,
                &mut rendered,
                &format!("{} [{}]", record.variable, record.alternative),
                doc.result.theta_hat.get(i),
                t_of(i),
                &effects_cells(doc, &record.variable),
            );
        }
    }

    if rendered != n_params {
        return Err(Error::ResultsFormat(format!(
            "rendered {rendered} of {n_params} parameters"
        )));
    }

    // Fit footer.
    out.push_str(&"-".repeat(rule_len));
    out.push('\n');
    out.push_str(&format!(
        "{:<NAME_WIDTH$} {:>10}\n",
        "Number of observations", doc.n_observations
    ));
    out.push_str(&format!(
        "{:<NAME_WIDTH$} {:>10.3}\n",
        "Log likelihood at zero, LL(0)", doc.result.ll_zero
    ));
    out.push_str(&format!(
        "{:<NAME_WIDTH$} {:>10.3}\n",
        "Log likelihood at convergence, LL(beta)", doc.result.ll_beta
    ));
    out.push_str(&format!(
        "{:<NAME_WIDTH$} {:>10.3}\n",
        "rho-squared = 1 - LL(beta)/LL(0)", doc.result.rho_squared
    ));
    out.push_str(&format!(
        "Converged: {} ({})    Iterations: {}    Covariance: {}\n",
        if doc.result.converged { "yes" } else { "no" },
        doc.result.stop_reason,
        doc.result.iterations,
        match doc.result.covariance_method {
            CovarianceMethod::Hessian => "Hessian",
            CovarianceMethod::Bhhh => "BHHH",
        }
    ));
    Ok(out)
}

fn record_index(doc: &ResultsDocument, record: &ParameterRecord) -> usize {
    doc.parameters
        .iter()
        .position(|p| std::ptr::eq(p, record) || p.name == record.name)
        .expect("record comes from this document")
}
