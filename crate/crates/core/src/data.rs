//! Dataset ingestion, validation, interaction columns, and summary
//! statistics.
//!
//! The on-disk format is a plain comma-separated file with a header row:
//! the chosen-outcome column holds alternative labels (matched exactly),
//! every other column holds finite numeric values with a decimal point.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// A column name plus whether every observed value is 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnSchema {
    pub name: String,
    pub binary: bool,
}

/// One row: the chosen alternative's index and the covariate values in
/// schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub chosen: usize,
    pub values: Vec<f64>,
}

/// Record of one derived interaction column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub name: String,
    pub left: String,
    pub right: String,
}

/// Where the data came from and which columns were derived.
#[derive(Clone, Debug, Default)]
pub struct Provenance {
    pub source: String,
    pub derivations: Vec<Derivation>,
}

/// Validated observations. Immutable after construction; interaction
/// derivation returns a new dataset.
#[derive(Clone, Debug)]
pub struct Dataset {
    columns: Vec<ColumnSchema>,
    observations: Vec<Observation>,
    provenance: Provenance,
}

/// Equality covers the data content (schema and observations); provenance is
/// a log and intentionally excluded so a round-tripped dataset compares equal.
impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.columns == other.columns && self.observations == other.observations
    }
}

/// Load-time options: columns that must contain only 0/1, and an explicit
/// remapping applied to outcome labels before matching.
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    pub declared_binary: Vec<String>,
    pub label_map: BTreeMap<String, String>,
}

impl Dataset {
    /// Builds a dataset from already-parsed rows, enforcing the invariants.
    pub fn from_parts(
        column_names: Vec<String>,
        observations: Vec<Observation>,
        n_alternatives: usize,
        source: impl Into<String>,
    ) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = std::collections::BTreeSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        for (row, obs) in observations.iter().enumerate() {
            if obs.values.len() != column_names.len() {
                return Err(Error::ShapeMismatch(format!(
                    "row {row} has {} values, expected {}",
                    obs.values.len(),
                    column_names.len()
                )));
            }
            if obs.chosen >= n_alternatives {
                return Err(Error::ShapeMismatch(format!(
                    "row {row} chose alternative {} of {n_alternatives}",
                    obs.chosen
                )));
            }
            for (col, &v) in obs.values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::BadCell {
                        row,
                        column: column_names[col].clone(),
                        message: format!("non-finite value {v}"),
                    });
                }
            }
        }
        let columns = column_names
            .into_iter()
            .enumerate()
            .map(|(c, name)| ColumnSchema {
                binary: observations.iter().all(|o| {
                    let v = o.values[c];
                    v == 0.0 || v == 1.0
                }),
                name,
            })
            .collect();
        Ok(Self {
            columns,
            observations,
            provenance: Provenance {
                source: source.into(),
                derivations: Vec::new(),
            },
        })
    }

    /// Loads a CSV file against the expectations of a model specification:
    /// the label column must be present and every referenced variable must
    /// resolve to a column.
    pub fn load_csv(path: impl AsRef<Path>, spec: &ModelSpec, opts: &LoadOptions) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::None)
            .from_path(path)?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| Error::BadCell {
                row: 0,
                column: String::new(),
                message: e.to_string(),
            })?
            .iter()
            .map(|h| h.to_string())
            .collect();

        let label_pos = headers
            .iter()
            .position(|h| h == spec.label_column())
            .ok_or_else(|| Error::MissingColumn(spec.label_column().to_string()))?;
        let column_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_pos)
            .map(|(_, h)| h.clone())
            .collect();
        for var in spec.referenced_columns() {
            if !column_names.iter().any(|c| c == var) {
                return Err(Error::MissingColumn(var.to_string()));
            }
        }
        for declared in &opts.declared_binary {
            if !column_names.iter().any(|c| c == declared) {
                return Err(Error::MissingColumn(declared.clone()));
            }
        }

        let mut observations = Vec::new();
        for (row_idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::BadCell {
                row: row_idx,
                column: String::new(),
                message: e.to_string(),
            })?;
            if record.len() != headers.len() {
                return Err(Error::BadCell {
                    row: row_idx,
                    column: String::new(),
                    message: format!("{} fields, expected {}", record.len(), headers.len()),
                });
            }
            let raw_label = &record[label_pos];
            let label = opts
                .label_map
                .get(raw_label)
                .map(String::as_str)
                .unwrap_or(raw_label);
            let chosen =
                spec.alternatives()
                    .index_of(label)
                    .ok_or_else(|| Error::UnknownLabel {
                        row: row_idx,
                        label: raw_label.to_string(),
                    })?;
            let mut values = Vec::with_capacity(column_names.len());
            for (field_idx, field) in record.iter().enumerate() {
                if field_idx == label_pos {
                    continue;
                }
                let column = &headers[field_idx];
                let v: f64 = field.parse().map_err(|_| Error::BadCell {
                    row: row_idx,
                    column: column.clone(),
                    message: format!("cannot parse `{field}` as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::BadCell {
                        row: row_idx,
                        column: column.clone(),
                        message: format!("non-finite value {v}"),
                    });
                }
                if opts.declared_binary.iter().any(|c| c == column) && v != 0.0 && v != 1.0 {
                    return Err(Error::NonBinaryValue {
                        row: row_idx,
                        column: column.clone(),
                        value: v,
                    });
                }
                values.push(v);
            }
            observations.push(Observation { chosen, values });
        }
        Self::from_parts(
            column_names,
            observations,
            spec.alternatives().len(),
            path.display().to_string(),
        )
    }

    /// Loads a CSV file without a model: every column that parses as numeric
    /// in all rows is kept, the rest (e.g. an outcome-label column) are
    /// returned as skipped.
    pub fn load_csv_numeric(path: impl AsRef<Path>) -> Result<(Self, Vec<String>)> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(Error::from)?
            .iter()
            .map(|h| h.to_string())
            .collect();
        let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
        for record in reader.records() {
            let record = record?;
            rows.push(
                record
                    .iter()
                    .map(|field| field.parse::<f64>().ok().filter(|v| v.is_finite()))
                    .collect(),
            );
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let numeric: Vec<usize> = (0..headers.len())
            .filter(|&c| {
                rows.iter()
                    .all(|r| r.get(c).map(|v| v.is_some()) == Some(true))
            })
            .collect();
        let skipped = (0..headers.len())
            .filter(|c| !numeric.contains(c))
            .map(|c| headers[c].clone())
            .collect();
        let observations = rows
            .iter()
            .map(|r| Observation {
                chosen: 0,
                values: numeric.iter().map(|&c| r[c].unwrap()).collect(),
            })
            .collect();
        let dataset = Self::from_parts(
            numeric.iter().map(|&c| headers[c].clone()).collect(),
            observations,
            1,
            path.display().to_string(),
        )?;
        Ok((dataset, skipped))
    }

    /// Writes the dataset back to CSV: label column first, covariates in
    /// schema order. Values use the shortest round-trip decimal form, so
    /// reloading yields an equal dataset.
    pub fn write_csv(&self, path: impl AsRef<Path>, spec: &ModelSpec) -> Result<()> {
        let mut writer = csv::Writer::from_path(path.as_ref())?;
        let mut header = vec![spec.label_column().to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        writer.write_record(&header)?;
        for obs in &self.observations {
            let mut record = vec![spec.alternatives().label(obs.chosen).to_string()];
            record.extend(obs.values.iter().map(|v| v.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// New dataset with an elementwise-product column appended.
    pub fn derive_interaction(&self, a: &str, b: &str, name: &str) -> Result<Dataset> {
        let ia = self
            .column_index(a)
            .ok_or_else(|| Error::MissingColumn(a.into()))?;
        let ib = self
            .column_index(b)
            .ok_or_else(|| Error::MissingColumn(b.into()))?;
        if self.column_index(name).is_some() {
            return Err(Error::DuplicateColumn(name.into()));
        }
        let mut out = self.clone();
        let mut all_binary = true;
        for obs in &mut out.observations {
            let v = obs.values[ia] * obs.values[ib];
            all_binary &= v == 0.0 || v == 1.0;
            obs.values.push(v);
        }
        out.columns.push(ColumnSchema {
            name: name.to_string(),
            binary: all_binary,
        });
        out.provenance.derivations.push(Derivation {
            name: name.to_string(),
            left: a.to_string(),
            right: b.to_string(),
        });
        Ok(out)
    }

    /// Per-column mean, population standard deviation (divisor N), max, min.
    pub fn summarize(&self) -> SummaryTable {
        let n = self.observations.len() as f64;
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(c, schema)| {
                let mut sum = 0.0;
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for obs in &self.observations {
                    let v = obs.values[c];
                    sum += v;
                    min = min.min(v);
                    max = max.max(v);
                }
                let mean = sum / n;
                let mut ss = 0.0;
                for obs in &self.observations {
                    let d = obs.values[c] - mean;
                    ss += d * d;
                }
                ColumnSummary {
                    column: schema.name.clone(),
                    mean,
                    sd: (ss / n).sqrt(),
                    max,
                    min,
                }
            })
            .collect();
        SummaryTable { columns }
    }

    pub fn n_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn is_binary(&self, name: &str) -> Option<bool> {
        self.column_index(name).map(|i| self.columns[i].binary)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.observations[row].values[col]
    }
}

/// Table-2-style per-column summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
    pub max: f64,
    pub min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub columns: Vec<ColumnSummary>,
}

impl SummaryTable {
    /// Aligned text rendering.
    pub fn to_text(&self) -> String {
        let name_width = self
            .columns
            .iter()
            .map(|c| c.column.len())
            .max()
            .unwrap_or(8)
            .max("Variable".len());
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_width$}  {:>10}  {:>10}  {:>10}  {:>10}\n",
            "Variable", "Mean", "Std. Dev.", "Max.", "Min."
        ));
        for c in &self.columns {
            out.push_str(&format!(
                "{:<name_width$}  {:>10.3}  {:>10.3}  {:>10.3}  {:>10.3}\n",
                c.column, c.mean, c.sd, c.max, c.min
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AlternativeSet, ModelSpec, UtilityEntry};
    use crate::rng::SplitMix64;

    fn three_way_spec() -> ModelSpec {
        let alts = AlternativeSet::new(
            vec!["non_surgical".into(), "surgical".into(), "fatal".into()],
            1,
        )
        .unwrap();
        ModelSpec::new(
            alts,
            vec![
                UtilityEntry::fixed("fatal", "male"),
                UtilityEntry::fixed("non_surgical", "pedestrian"),
            ],
            "outcome",
        )
        .unwrap()
    }

    fn write_temp(content: &str) -> tempfile::TempFile {
        tempfile::TempFile::new(content)
    }

    // Minimal self-contained temp-file helper; the test suite has no tempdir
    // dependency.
    mod tempfile {
        use std::path::PathBuf;
        use std::sync::atomic::{AtomicU64, Ordering};

        static COUNTER: AtomicU64 = AtomicU64::new(0);

        pub struct TempFile {
            pub path: PathBuf,
        }

        impl TempFile {
            pub fn new(content: &str) -> Self {
                let id = COUNTER.fetch_add(1, Ordering::Relaxed);
                let path = std::env::temp_dir()
                    .join(format!("rpmixl-data-test-{}-{id}.csv", std::process::id()));
                std::fs::write(&path, content).unwrap();
                Self { path }
            }
        }

        impl Drop for TempFile {
            fn drop(&mut self) {
                let _ = std::fs::remove_file(&self.path);
            }
        }
    }

    #[test]
    fn loads_valid_rows() {
        let file = write_temp(
            "outcome,male,pedestrian\nfatal,1,0\nsurgical,0,0\nnon_surgical,1,1\nfatal,0,1\n",
        );
        let ds = Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap();
        assert_eq!(ds.n_observations(), 4);
        assert_eq!(ds.observations()[0].chosen, 2);
        assert_eq!(ds.observations()[1].chosen, 1);
        assert!(ds.is_binary("male").unwrap());
    }

    #[test]
    fn trailing_space_label_is_rejected() {
        let file = write_temp("outcome,male,pedestrian\nfatal ,1,0\n");
        let err =
            Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap_err();
        match err {
            Error::UnknownLabel { row, label } => {
                assert_eq!(row, 0);
                assert_eq!(label, "fatal ");
            }
            other => panic!("expected UnknownLabel, got {other}"),
        }
    }

    #[test]
    fn label_map_remaps_before_matching() {
        let file = write_temp("outcome,male,pedestrian\nFatal,1,0\n");
        let mut opts = LoadOptions::default();
        opts.label_map.insert("Fatal".into(), "fatal".into());
        let ds = Dataset::load_csv(&file.path, &three_way_spec(), &opts).unwrap();
        assert_eq!(ds.observations()[0].chosen, 2);
    }

    #[test]
    fn non_binary_value_in_declared_binary_column() {
        let file = write_temp("outcome,male,pedestrian\nfatal,2,0\n");
        let opts = LoadOptions {
            declared_binary: vec!["male".into()],
            ..Default::default()
        };
        let err = Dataset::load_csv(&file.path, &three_way_spec(), &opts).unwrap_err();
        match err {
            Error::NonBinaryValue { row, column, value } => {
                assert_eq!(row, 0);
                assert_eq!(column, "male");
                assert_eq!(value, 2.0);
            }
            other => panic!("expected NonBinaryValue, got {other}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let file = write_temp("outcome,male\nfatal,1\n");
        let err =
            Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("pedestrian"), "{err}");
    }

    #[test]
    fn unparseable_cell_names_row_and_column() {
        let file = write_temp("outcome,male,pedestrian\nfatal,yes,0\n");
        let err =
            Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap_err();
        match err {
            Error::BadCell { row, column, .. } => {
                assert_eq!(row, 0);
                assert_eq!(column, "male");
            }
            other => panic!("expected BadCell, got {other}"),
        }
    }

    #[test]
    fn interaction_is_elementwise_product() {
        let file = write_temp(
            "outcome,low_visibility,bus,male,pedestrian\nfatal,1,1,0,0\nsurgical,1,0,0,0\n",
        );
        let ds = Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap();
        let ds = ds
            .derive_interaction("low_visibility", "bus", "lowvis_bus")
            .unwrap();
        let col = ds.column_index("lowvis_bus").unwrap();
        assert_eq!(ds.value(0, col), 1.0);
        assert_eq!(ds.value(1, col), 0.0);
        assert_eq!(ds.provenance().derivations.len(), 1);
        // Original columns untouched.
        assert_eq!(ds.value(0, ds.column_index("bus").unwrap()), 1.0);
    }

    #[test]
    fn duplicate_interaction_name_is_rejected() {
        let file = write_temp("outcome,male,pedestrian\nfatal,1,0\n");
        let ds = Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap();
        let ds = ds.derive_interaction("male", "pedestrian", "mp").unwrap();
        let err = ds
            .derive_interaction("male", "pedestrian", "mp")
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateColumn(_)));
    }

    #[test]
    fn interaction_commutes() {
        let file =
            write_temp("outcome,male,pedestrian\nfatal,1,0\nsurgical,1,1\nnon_surgical,0,1\n");
        let ds = Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap();
        let ab = ds.derive_interaction("male", "pedestrian", "i").unwrap();
        let ba = ds.derive_interaction("pedestrian", "male", "i").unwrap();
        let col = ab.column_index("i").unwrap();
        for row in 0..ds.n_observations() {
            assert_eq!(ab.value(row, col), ba.value(row, col));
        }
    }

    #[test]
    fn summary_basic_values() {
        let file = write_temp(
            "outcome,male,pedestrian\nfatal,1,1\nsurgical,0,1\nnon_surgical,1,1\nfatal,1,1\n",
        );
        let ds = Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap();
        let table = ds.summarize();
        let male = &table.columns[0];
        assert_eq!(male.mean, 0.75);
        assert_eq!(male.min, 0.0);
        assert_eq!(male.max, 1.0);
        // Constant column has zero spread.
        let ped = &table.columns[1];
        assert_eq!(ped.sd, 0.0);
    }

    // Divisor-N oracle: for a 0/1 column the population sd equals
    // sqrt(p(1 - p)) with p the mean. Checked on random columns against the
    // direct sum-of-squares route.
    #[test]
    fn binary_sd_matches_bernoulli_formula() {
        let mut rng = SplitMix64::new(77);
        for _ in 0..50 {
            let n = 3 + (rng.next_u64() % 60) as usize;
            let mut rows = String::from("outcome,male,pedestrian\n");
            let mut ones = 0usize;
            for _ in 0..n {
                let v = if rng.next_f64() < 0.4 { 1 } else { 0 };
                ones += v;
                rows.push_str(&format!("fatal,{v},0\n"));
            }
            let file = write_temp(&rows);
            let ds =
                Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap();
            let table = ds.summarize();
            let p = ones as f64 / n as f64;
            assert!(
                (table.columns[0].sd - (p * (1.0 - p)).sqrt()).abs() < 1e-12,
                "n={n}, p={p}"
            );
        }
    }

    #[test]
    fn duplication_leaves_summary_unchanged() {
        let file = write_temp("outcome,male,pedestrian\nfatal,1,0\nsurgical,0,1\nfatal,1,1\n");
        let spec = three_way_spec();
        let ds = Dataset::load_csv(&file.path, &spec, &LoadOptions::default()).unwrap();
        let mut doubled = String::from("outcome,male,pedestrian\n");
        for _ in 0..2 {
            doubled.push_str("fatal,1,0\nsurgical,0,1\nfatal,1,1\n");
        }
        let file2 = write_temp(&doubled);
        let ds2 = Dataset::load_csv(&file2.path, &spec, &LoadOptions::default()).unwrap();
        assert_eq!(ds.summarize(), ds2.summarize());
    }

    #[test]
    fn csv_round_trip_is_identity() {
        let spec = three_way_spec();
        let file = write_temp(
            "outcome,male,pedestrian\nfatal,1,0.125\nsurgical,0,0.333333333333333314829616256247\nnon_surgical,1,1\n",
        );
        let ds = Dataset::load_csv(&file.path, &spec, &LoadOptions::default()).unwrap();
        let out = std::env::temp_dir().join(format!("rpmixl-rt-{}.csv", std::process::id()));
        ds.write_csv(&out, &spec).unwrap();
        let back = Dataset::load_csv(&out, &spec, &LoadOptions::default()).unwrap();
        std::fs::remove_file(&out).ok();
        assert_eq!(ds, back);
    }

    #[test]
    fn numeric_load_skips_label_columns() {
        let file = write_temp("outcome,male,note,age\nfatal,1,ok,0.5\nsurgical,0,bad,0.25\n");
        let (ds, skipped) = Dataset::load_csv_numeric(&file.path).unwrap();
        assert_eq!(skipped, vec!["outcome".to_string(), "note".to_string()]);
        assert_eq!(ds.n_columns(), 2);
        assert_eq!(ds.n_observations(), 2);
        assert_eq!(ds.value(1, ds.column_index("age").unwrap()), 0.25);
    }

    #[test]
    fn empty_file_is_rejected() {
        let file = write_temp("outcome,male,pedestrian\n");
        let err =
            Dataset::load_csv(&file.path, &three_way_spec(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }
}
