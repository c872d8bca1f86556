//! Model specification: alternatives, utility entries, and the parameter
//! layout that packs every estimable coefficient into one vector.
//!
//! A model document is TOML with top-level keys `alternatives`, `base`,
//! `label_column`, and a `utilities` list; unknown keys are a hard error.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel variable name for alternative-specific constants.
pub const CONSTANT: &str = "constant";

/// Whether a coefficient is fixed across observations or randomly distributed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefficientKind {
    Fixed,
    Random,
}

/// Mixing distribution of a random coefficient. Only the normal is supported;
/// the field exists so other values are rejected explicitly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distribution {
    Normal,
}

/// The ordered set of outcome alternatives and the normalization alternative.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlternativeSet {
    labels: Vec<String>,
    base_index: usize,
}

impl AlternativeSet {
    pub fn new(labels: Vec<String>, base_index: usize) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::ModelSemantic {
                path: "alternatives".into(),
                message: format!("need at least 2 alternatives, got {}", labels.len()),
            });
        }
        let mut seen = BTreeSet::new();
        for (i, label) in labels.iter().enumerate() {
            check_name(label, &format!("alternatives[{i}]"))?;
            if !seen.insert(label.as_str()) {
                return Err(Error::ModelSemantic {
                    path: format!("alternatives[{i}]"),
                    message: format!("duplicate alternative `{label}`"),
                });
            }
        }
        if base_index >= labels.len() {
            return Err(Error::ModelSemantic {
                path: "base".into(),
                message: format!(
                    "base index {base_index} out of range for {} alternatives",
                    labels.len()
                ),
            });
        }
        Ok(Self { labels, base_index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn base_index(&self) -> usize {
        self.base_index
    }

    pub fn base_label(&self) -> &str {
        &self.labels[self.base_index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One term of an alternative's utility: a variable (or constant) with a
/// fixed or random coefficient, plus the covariates that shift the random
/// coefficient's mean and variance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtilityEntry {
    pub alternative: String,
    pub variable: String,
    pub kind: CoefficientKind,
    pub mean_shifters: Vec<String>,
    pub variance_shifters: Vec<String>,
    pub distribution: Distribution,
}

impl UtilityEntry {
    pub fn fixed(alternative: impl Into<String>, variable: impl Into<String>) -> Self {
        Self {
            alternative: alternative.into(),
            variable: variable.into(),
            kind: CoefficientKind::Fixed,
            mean_shifters: Vec::new(),
            variance_shifters: Vec::new(),
            distribution: Distribution::Normal,
        }
    }

    pub fn random(alternative: impl Into<String>, variable: impl Into<String>) -> Self {
        Self {
            alternative: alternative.into(),
            variable: variable.into(),
            kind: CoefficientKind::Random,
            mean_shifters: Vec::new(),
            variance_shifters: Vec::new(),
            distribution: Distribution::Normal,
        }
    }

    pub fn with_mean_shifters(mut self, shifters: &[&str]) -> Self {
        self.mean_shifters = shifters.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_variance_shifters(mut self, shifters: &[&str]) -> Self {
        self.variance_shifters = shifters.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn is_constant(&self) -> bool {
        self.variable == CONSTANT
    }

    pub fn is_random(&self) -> bool {
        self.kind == CoefficientKind::Random
    }
}

/// A validated model specification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    alternatives: AlternativeSet,
    entries: Vec<UtilityEntry>,
    label_column: String,
}

impl ModelSpec {
    pub fn new(
        alternatives: AlternativeSet,
        entries: Vec<UtilityEntry>,
        label_column: impl Into<String>,
    ) -> Result<Self> {
        let label_column = label_column.into();
        check_name(&label_column, "label_column")?;
        if entries.is_empty() {
            return Err(Error::ModelSemantic {
                path: "utilities".into(),
                message: "at least one utility entry is required".into(),
            });
        }
        let mut pairs = BTreeSet::new();
        for (i, entry) in entries.iter().enumerate() {
            let path = format!("utilities[{i}]");
            let alt_index =
                alternatives
                    .index_of(&entry.alternative)
                    .ok_or_else(|| Error::ModelSemantic {
                        path: format!("{path}.alt"),
                        message: format!("unknown alternative `{}`", entry.alternative),
                    })?;
            if !entry.is_constant() {
                check_name(&entry.variable, &format!("{path}.var"))?;
            }
            if alt_index == alternatives.base_index() && entry.is_constant() {
                return Err(Error::ModelSemantic {
                    path: format!("{path}.var"),
                    message: format!(
                        "the base alternative `{}` cannot carry a constant",
                        entry.alternative
                    ),
                });
            }
            if !pairs.insert((entry.alternative.clone(), entry.variable.clone())) {
                return Err(Error::ModelSemantic {
                    path: path.clone(),
                    message: format!(
                        "duplicate entry for `{}` on alternative `{}`",
                        entry.variable, entry.alternative
                    ),
                });
            }
            match entry.kind {
                CoefficientKind::Fixed => {
                    if !entry.mean_shifters.is_empty() || !entry.variance_shifters.is_empty() {
                        return Err(Error::ModelSemantic {
                            path,
                            message: "mean/variance shifters are only valid on random entries"
                                .into(),
                        });
                    }
                }
                CoefficientKind::Random => {
                    for (kind, list) in [
                        ("het_mean", &entry.mean_shifters),
                        ("het_var", &entry.variance_shifters),
                    ] {
                        let mut seen = BTreeSet::new();
                        for (j, shifter) in list.iter().enumerate() {
                            let spath = format!("{path}.{kind}[{j}]");
                            check_name(shifter, &spath)?;
                            if shifter == &entry.variable {
                                return Err(Error::ModelSemantic {
                                    path: spath,
                                    message: format!(
                                        "shifter `{shifter}` duplicates the entry's own variable"
                                    ),
                                });
                            }
                            if !seen.insert(shifter.as_str()) {
                                return Err(Error::ModelSemantic {
                                    path: spath,
                                    message: format!("duplicate shifter `{shifter}`"),
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(Self {
            alternatives,
            entries,
            label_column,
        })
    }

    /// Parses and validates a TOML model document.
    pub fn parse(document: &str) -> Result<Self> {
        let raw: RawDocument =
            toml::from_str(document).map_err(|e| Error::ModelSyntax(e.to_string()))?;
        let base_index = raw
            .alternatives
            .iter()
            .position(|l| l == &raw.base)
            .ok_or_else(|| Error::ModelSemantic {
                path: "base".into(),
                message: format!("base `{}` is not one of the alternatives", raw.base),
            })?;
        let alternatives = AlternativeSet::new(raw.alternatives, base_index)?;
        let mut entries = Vec::with_capacity(raw.utilities.len());
        for (i, util) in raw.utilities.into_iter().enumerate() {
            let kind = match util.kind.as_str() {
                "fixed" => CoefficientKind::Fixed,
                "random" => CoefficientKind::Random,
                other => {
                    return Err(Error::ModelSemantic {
                        path: format!("utilities[{i}].kind"),
                        message: format!("expected \"fixed\" or \"random\", got `{other}`"),
                    })
                }
            };
            let distribution = match util.dist.as_str() {
                "normal" => Distribution::Normal,
                other => {
                    return Err(Error::ModelSemantic {
                        path: format!("utilities[{i}].dist"),
                        message: format!("unsupported distribution `{other}` (only \"normal\")"),
                    })
                }
            };
            entries.push(UtilityEntry {
                alternative: util.alt,
                variable: util.var,
                kind,
                mean_shifters: util.het_mean,
                variance_shifters: util.het_var,
                distribution,
            });
        }
        Self::new(alternatives, entries, raw.label_column)
    }

    pub fn alternatives(&self) -> &AlternativeSet {
        &self.alternatives
    }

    pub fn entries(&self) -> &[UtilityEntry] {
        &self.entries
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    /// Random entries paired with their position in `entries`.
    pub fn random_entries(&self) -> impl Iterator<Item = (usize, &UtilityEntry)> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_random())
    }

    pub fn n_random(&self) -> usize {
        self.entries.iter().filter(|e| e.is_random()).count()
    }

    /// Every dataset column the model reads (variables and shifters),
    /// deduplicated in first-use order. Constants are excluded.
    pub fn referenced_columns(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for entry in &self.entries {
            for name in std::iter::once(&entry.variable)
                .chain(entry.mean_shifters.iter())
                .chain(entry.variance_shifters.iter())
            {
                if name != CONSTANT && seen.insert(name.as_str()) {
                    out.push(name.as_str());
                }
            }
        }
        out
    }

    /// Projection used to seed the optimizer: every entry becomes fixed and
    /// all shifters are dropped.
    pub fn to_all_fixed(&self) -> ModelSpec {
        let entries = self
            .entries
            .iter()
            .map(|e| UtilityEntry {
                alternative: e.alternative.clone(),
                variable: e.variable.clone(),
                kind: CoefficientKind::Fixed,
                mean_shifters: Vec::new(),
                variance_shifters: Vec::new(),
                distribution: Distribution::Normal,
            })
            .collect();
        ModelSpec {
            alternatives: self.alternatives.clone(),
            entries,
            label_column: self.label_column.clone(),
        }
    }

    /// Deterministic parameter layout for this specification.
    pub fn parameter_layout(&self) -> ParameterLayout {
        ParameterLayout::for_spec(self)
    }
}

/// Role of one position in the packed parameter vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamRole {
    FixedBeta,
    RandomMean,
    RandomScale,
    MeanShifter,
    VarianceShifter,
}

impl fmt::Display for ParamRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParamRole::FixedBeta => "fixed",
            ParamRole::RandomMean => "random mean",
            ParamRole::RandomScale => "random scale",
            ParamRole::MeanShifter => "mean shifter",
            ParamRole::VarianceShifter => "variance shifter",
        };
        f.write_str(s)
    }
}

/// One estimable parameter: its unique name, role, owning entry, and the
/// column it multiplies when it is a shifter coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamDescriptor {
    pub name: String,
    pub role: ParamRole,
    /// Index of the owning entry in `ModelSpec::entries`.
    pub entry: usize,
    /// Position in the packed theta vector.
    pub index: usize,
    /// Shifter column for MeanShifter / VarianceShifter roles.
    pub shifter: Option<String>,
}

/// The packed, deterministic ordering of all estimable parameters.
///
/// Order: fixed constants (alternative order), remaining fixed entries
/// (specification order), then per random entry (specification order):
/// mean, scale, its mean shifters, its variance shifters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParameterLayout {
    descriptors: Vec<ParamDescriptor>,
}

impl ParameterLayout {
    pub fn for_spec(spec: &ModelSpec) -> Self {
        let mut descriptors = Vec::new();
        let mut push = |name: String, role: ParamRole, entry: usize, shifter: Option<String>| {
            let index = descriptors.len();
            descriptors.push(ParamDescriptor {
                name,
                role,
                entry,
                index,
                shifter,
            });
        };

        // Fixed constants in alternative order.
        for alt in 0..spec.alternatives().len() {
            for (i, entry) in spec.entries().iter().enumerate() {
                if entry.is_constant()
                    && !entry.is_random()
                    && spec.alternatives().index_of(&entry.alternative) == Some(alt)
                {
                    push(entry_name(entry), ParamRole::FixedBeta, i, None);
                }
            }
        }
        // Remaining fixed entries in specification order.
        for (i, entry) in spec.entries().iter().enumerate() {
            if !entry.is_random() && !entry.is_constant() {
                push(entry_name(entry), ParamRole::FixedBeta, i, None);
            }
        }
        // Random entries: mean, scale, shifters.
        for (i, entry) in spec.entries().iter().enumerate() {
            if entry.is_random() {
                push(entry_name(entry), ParamRole::RandomMean, i, None);
                push(
                    format!("{}:sd", entry_name(entry)),
                    ParamRole::RandomScale,
                    i,
                    None,
                );
                for shifter in &entry.mean_shifters {
                    push(
                        format!("{}:mean({})", entry_name(entry), shifter),
                        ParamRole::MeanShifter,
                        i,
                        Some(shifter.clone()),
                    );
                }
                for shifter in &entry.variance_shifters {
                    push(
                        format!("{}:var({})", entry_name(entry), shifter),
                        ParamRole::VarianceShifter,
                        i,
                        Some(shifter.clone()),
                    );
                }
            }
        }
        Self { descriptors }
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[ParamDescriptor] {
        &self.descriptors
    }

    pub fn names(&self) -> Vec<String> {
        self.descriptors.iter().map(|d| d.name.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.descriptors.iter().position(|d| d.name == name)
    }

    /// Theta index of the descriptor with the given role owned by `entry`,
    /// if any.
    pub fn index_of_role(&self, entry: usize, role: ParamRole) -> Option<usize> {
        self.descriptors
            .iter()
            .find(|d| d.entry == entry && d.role == role)
            .map(|d| d.index)
    }
}

fn entry_name(entry: &UtilityEntry) -> String {
    format!("{}:{}", entry.alternative, entry.variable)
}

/// Names must be usable in reports, layouts, and CSV headers.
fn check_name(name: &str, path: &str) -> Result<()> {
    if name.is_empty() {
        return Err(Error::ModelSemantic {
            path: path.into(),
            message: "name must be non-empty".into(),
        });
    }
    if name.contains([':', ',', '\n']) {
        return Err(Error::ModelSemantic {
            path: path.into(),
            message: format!("name `{name}` may not contain ':', ',' or newlines"),
        });
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    alternatives: Vec<String>,
    base: String,
    label_column: String,
    utilities: Vec<RawUtility>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUtility {
    alt: String,
    var: String,
    kind: String,
    #[serde(default)]
    het_mean: Vec<String>,
    #[serde(default)]
    het_var: Vec<String>,
    #[serde(default = "default_dist")]
    dist: String,
}

fn default_dist() -> String {
    "normal".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_doc() -> &'static str {
        r#"
            alternatives = ["non_surgical", "surgical", "fatal"]
            base = "surgical"
            label_column = "outcome"

            [[utilities]]
            alt = "non_surgical"
            var = "pedestrian"
            kind = "fixed"
        "#
    }

    /// A full crash-outcome layout: two constants, two random coefficients
    /// with one mean shifter each, and eleven fixed variables.
    fn study_doc() -> String {
        let mut doc = String::from(
            r#"
            alternatives = ["non_surgical", "surgical", "fatal"]
            base = "surgical"
            label_column = "outcome"

            [[utilities]]
            alt = "non_surgical"
            var = "constant"
            kind = "fixed"

            [[utilities]]
            alt = "fatal"
            var = "constant"
            kind = "fixed"

            [[utilities]]
            alt = "fatal"
            var = "male"
            kind = "random"
            het_mean = ["motorcycle"]

            [[utilities]]
            alt = "fatal"
            var = "rural_road"
            kind = "random"
            het_mean = ["nighttime"]
        "#,
        );
        let fixed = [
            ("non_surgical", "pedestrian"),
            ("fatal", "bus"),
            ("fatal", "truck"),
            ("fatal", "age_over_65"),
            ("non_surgical", "weekday"),
            ("fatal", "wet_pavement"),
            ("non_surgical", "low_visibility"),
            ("fatal", "speeding"),
            ("fatal", "overtaking"),
            ("non_surgical", "lowvis_bus"),
            ("fatal", "overtaking_wet"),
        ];
        for (alt, var) in fixed {
            doc.push_str(&format!(
                "\n[[utilities]]\nalt = \"{alt}\"\nvar = \"{var}\"\nkind = \"fixed\"\n"
            ));
        }
        doc
    }

    #[test]
    fn parses_minimal_document() {
        let spec = ModelSpec::parse(minimal_doc()).unwrap();
        assert_eq!(spec.entries().len(), 1);
        assert_eq!(spec.parameter_layout().len(), 1);
        assert_eq!(spec.alternatives().base_label(), "surgical");
    }

    #[test]
    fn study_layout_has_19_parameters() {
        let spec = ModelSpec::parse(&study_doc()).unwrap();
        let layout = spec.parameter_layout();
        assert_eq!(layout.len(), 19);
        let count = |role: ParamRole| {
            layout
                .descriptors()
                .iter()
                .filter(|d| d.role == role)
                .count()
        };
        // 2 constants + 11 fixed variables, 2 random means, 2 scales,
        // 2 mean shifters.
        assert_eq!(count(ParamRole::FixedBeta), 13);
        assert_eq!(count(ParamRole::RandomMean), 2);
        assert_eq!(count(ParamRole::RandomScale), 2);
        assert_eq!(count(ParamRole::MeanShifter), 2);
        assert_eq!(count(ParamRole::VarianceShifter), 0);
        // Constants come first, in alternative order.
        assert_eq!(layout.descriptors()[0].name, "non_surgical:constant");
        assert_eq!(layout.descriptors()[1].name, "fatal:constant");
    }

    #[test]
    fn unknown_alternative_is_named_in_error() {
        let doc = r#"
            alternatives = ["non_surgical", "surgical", "fatal"]
            base = "surgical"
            label_column = "outcome"

            [[utilities]]
            alt = "minor"
            var = "pedestrian"
            kind = "fixed"
        "#;
        let err = ModelSpec::parse(doc).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("minor"), "{msg}");
        assert!(msg.contains("utilities[0].alt"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let doc = r#"
            alternatives = ["a", "b"]
            base = "a"
            label_column = "outcome"
            extra = 1

            [[utilities]]
            alt = "b"
            var = "x"
            kind = "fixed"
        "#;
        assert!(matches!(ModelSpec::parse(doc), Err(Error::ModelSyntax(_))));
    }

    #[test]
    fn shifter_on_fixed_entry_is_rejected() {
        let doc = r#"
            alternatives = ["a", "b"]
            base = "a"
            label_column = "outcome"

            [[utilities]]
            alt = "b"
            var = "x"
            kind = "fixed"
            het_mean = ["z"]
        "#;
        let err = ModelSpec::parse(doc).unwrap_err();
        assert!(err.to_string().contains("shifters"), "{err}");
    }

    #[test]
    fn base_constant_is_rejected() {
        let doc = r#"
            alternatives = ["a", "b"]
            base = "a"
            label_column = "outcome"

            [[utilities]]
            alt = "a"
            var = "constant"
            kind = "fixed"
        "#;
        assert!(ModelSpec::parse(doc).is_err());
    }

    #[test]
    fn non_normal_distribution_is_rejected() {
        let doc = r#"
            alternatives = ["a", "b"]
            base = "a"
            label_column = "outcome"

            [[utilities]]
            alt = "b"
            var = "x"
            kind = "random"
            dist = "lognormal"
        "#;
        let err = ModelSpec::parse(doc).unwrap_err();
        assert!(err.to_string().contains("lognormal"), "{err}");
    }

    #[test]
    fn duplicate_entry_is_rejected() {
        let doc = r#"
            alternatives = ["a", "b"]
            base = "a"
            label_column = "outcome"

            [[utilities]]
            alt = "b"
            var = "x"
            kind = "fixed"

            [[utilities]]
            alt = "b"
            var = "x"
            kind = "random"
        "#;
        let err = ModelSpec::parse(doc).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn layout_is_deterministic() {
        let a = ModelSpec::parse(&study_doc()).unwrap().parameter_layout();
        let b = ModelSpec::parse(&study_doc()).unwrap().parameter_layout();
        assert_eq!(a, b);
    }

    #[test]
    fn all_fixed_projection_only_has_fixed_roles() {
        let spec = ModelSpec::parse(&study_doc()).unwrap();
        let fixed = spec.to_all_fixed();
        let layout = fixed.parameter_layout();
        assert!(layout
            .descriptors()
            .iter()
            .all(|d| d.role == ParamRole::FixedBeta));
        assert_eq!(layout.len(), 15); // one coefficient per entry
    }

    #[test]
    fn random_entry_descriptor_count() {
        let doc = r#"
            alternatives = ["a", "b"]
            base = "a"
            label_column = "outcome"

            [[utilities]]
            alt = "b"
            var = "x"
            kind = "random"
            het_mean = ["z1", "z2"]
        "#;
        let spec = ModelSpec::parse(doc).unwrap();
        let layout = spec.parameter_layout();
        // mean + scale + two mean shifters
        assert_eq!(layout.len(), 4);
        assert_eq!(layout.descriptors()[0].role, ParamRole::RandomMean);
        assert_eq!(layout.descriptors()[1].role, ParamRole::RandomScale);
        assert_eq!(layout.descriptors()[2].role, ParamRole::MeanShifter);
        assert_eq!(layout.descriptors()[3].role, ParamRole::MeanShifter);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        /// Random well-formed specs for the counting identity.
        fn arb_spec() -> impl Strategy<Value = ModelSpec> {
            (2usize..5, 1usize..8, 0usize..3).prop_flat_map(|(n_alts, n_vars, _)| {
                let alts: Vec<String> = (0..n_alts).map(|i| format!("alt{i}")).collect();
                let vars: Vec<String> = (0..n_vars).map(|i| format!("x{i}")).collect();
                let entry = (0..n_alts, 0..n_vars, any::<bool>(), 0usize..3, 0usize..3);
                proptest::collection::vec(entry, 1..10).prop_filter_map(
                    "unique (alt, var) pairs",
                    move |raw| {
                        let mut seen = BTreeSet::new();
                        let mut entries = Vec::new();
                        for (alt, var, random, n_mean, n_var) in raw {
                            if !seen.insert((alt, var)) {
                                continue;
                            }
                            let mut e = if random {
                                UtilityEntry::random(alts[alt].clone(), vars[var].clone())
                            } else {
                                UtilityEntry::fixed(alts[alt].clone(), vars[var].clone())
                            };
                            if random {
                                e.mean_shifters =
                                    (0..n_mean).map(|k| format!("zm{var}_{k}")).collect();
                                e.variance_shifters =
                                    (0..n_var).map(|k| format!("zv{var}_{k}")).collect();
                            }
                            entries.push(e);
                        }
                        if entries.is_empty() {
                            return None;
                        }
                        let alternatives =
                            AlternativeSet::new(alts.clone(), 0).expect("valid alternatives");
                        ModelSpec::new(alternatives, entries, "outcome").ok()
                    },
                )
            })
        }

        proptest! {
            #[test]
            fn parameter_count_formula_holds(spec in arb_spec()) {
                let layout = spec.parameter_layout();
                let n_fixed = spec.entries().iter().filter(|e| !e.is_random()).count();
                let n_random = spec.n_random();
                let n_mean: usize = spec.entries().iter().map(|e| e.mean_shifters.len()).sum();
                let n_var: usize = spec.entries().iter().map(|e| e.variance_shifters.len()).sum();
                prop_assert_eq!(layout.len(), n_fixed + 2 * n_random + n_mean + n_var);
                // Indices contiguous from zero, names unique.
                for (i, d) in layout.descriptors().iter().enumerate() {
                    prop_assert_eq!(d.index, i);
                }
                let names: BTreeSet<_> = layout.descriptors().iter().map(|d| &d.name).collect();
                prop_assert_eq!(names.len(), layout.len());
            }
        }
    }
}
