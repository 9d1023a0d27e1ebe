//! Datasets, train/holdout splitting, and column-subset permutation.
//!
//! A [`Dataset`] is an immutable feature matrix plus a label vector. The
//! permutation machinery reorders the rows of a chosen column subset with a
//! single shared row ordering, leaving every other column and the labels
//! untouched; this is the data operation all four tests are built on.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// Immutable regression dataset: an `n x p` feature matrix (row major),
/// a length-`n` label vector, and one name per feature column.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<f64>,
    column_names: Vec<String>,
    n_rows: usize,
    n_features: usize,
}

impl Dataset {
    /// Builds a dataset from rows, validating the type invariants: matching
    /// row/label counts, rectangular shape, finite entries, unique names.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        labels: Vec<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n_rows = rows.len();
        let n_features = column_names.len();
        if labels.len() != n_rows {
            return Err(Error::invalid(format!(
                "label count {} does not match row count {}",
                labels.len(),
                n_rows
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate column name `{name}`")));
            }
        }
        let mut features = Vec::with_capacity(n_rows * n_features);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::invalid(format!(
                    "row {i} has {} values, expected {n_features}",
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "non-finite feature value at row {i}, column `{}`",
                        column_names[j]
                    )));
                }
            }
            features.extend_from_slice(&row);
        }
        for (i, v) in labels.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite label at row {i}")));
            }
        }
        Ok(Dataset {
            features,
            labels,
            column_names,
            n_rows,
            n_features,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Copies out feature column `j`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i)[j]).collect()
    }

    /// New dataset containing the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            column_names: self.column_names.clone(),
            n_rows: indices.len(),
            n_features: self.n_features,
        }
    }
}

/// The tested column subset S. Indices are stored sorted and distinct;
/// bounds are checked against a concrete dataset at use time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSet {
    indices: Vec<usize>,
}

impl FeatureSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut indices: Vec<usize> = indices.into_iter().collect();
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::invalid(format!("duplicate feature index {}", w[0])));
            }
        }
        Ok(FeatureSet { indices })
    }

    pub fn single(index: usize) -> Self {
        FeatureSet {
            indices: vec![index],
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Checks that the set is usable against a dataset with `p` features:
    /// non-empty, every index in range.
    pub fn validate_for(&self, p: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::invalid("feature set is empty"));
        }
        if let Some(&bad) = self.indices.iter().find(|&&j| j >= p) {
            return Err(Error::invalid(format!(
                "feature index {bad} out of range for {p} columns"
            )));
        }
        Ok(())
    }
}

/// A row reordering of length `n`, together with the seed it was drawn from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    order: Vec<usize>,
    seed: u64,
}

impl Permutation {
    /// Draws a uniform permutation of `{0, .., n-1}` (Fisher-Yates). The
    /// identity is a possible outcome like any other ordering.
    pub fn sample(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("cannot sample a permutation of length 0"));
        }
        let mut rng = seed::rng(seed);
        let mut order: Vec<usize> = (0..n).collect();
        // Standard Fisher-Yates, swapping i with a uniform index in [0, i].
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        Ok(Permutation { order, seed })
    }

    /// Wraps an explicit ordering, validating that it is a bijection.
    pub fn from_order(order: Vec<usize>, seed: u64) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || seen[v] {
                return Err(Error::invalid("order is not a permutation of 0..n"));
            }
            seen[v] = true;
        }
        Ok(Permutation { order, seed })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            order: (0..n).collect(),
            seed: 0,
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// The inverse ordering: `perm.apply` then `perm.inverse().apply` is the
    /// identity.
    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0usize; self.order.len()];
        for (i, &v) in self.order.iter().enumerate() {
            inv[v] = i;
        }
        Permutation {
            order: inv,
            seed: self.seed,
        }
    }
}

/// Splits a dataset into `(train, holdout)` with `|holdout| =
/// round(n * holdout_fraction)`. The assignment is a seeded shuffle; the two
/// parts are row-disjoint and their union is the input.
pub fn split(dataset: &Dataset, holdout_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "holdout_fraction must be in (0, 1), got {holdout_fraction}"
        )));
    }
    let n = dataset.n_rows();
    let n_holdout = (n as f64 * holdout_fraction).round() as usize;
    let n_train = n.saturating_sub(n_holdout);
    if n_train < 2 || n_holdout < 2 {
        return Err(Error::invalid(format!(
            "split of {n} rows at fraction {holdout_fraction} leaves a part with fewer than 2 rows"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut seed::rng(seed));
    let holdout = dataset.select_rows(&indices[..n_holdout]);
    let train = dataset.select_rows(&indices[n_holdout..]);
    Ok((train, holdout))
}

/// Draws a uniform permutation of `{0, .., n-1}`.
pub fn sample_permutation(n: usize, seed: u64) -> Result<Permutation> {
    Permutation::sample(n, seed)
}

/// Reorders the rows of every column in `s` by `perm`, jointly: all S
/// columns share the one row ordering, so dependence within S is preserved.
/// Columns outside `s` and the labels are returned unchanged.
pub fn permute_columns(dataset: &Dataset, s: &FeatureSet, perm: &Permutation) -> Result<Dataset> {
    if perm.len() != dataset.n_rows() {
        return Err(Error::invalid(format!(
            "permutation length {} does not match row count {}",
            perm.len(),
            dataset.n_rows()
        )));
    }
    if let Some(&bad) = s.indices().iter().find(|&&j| j >= dataset.n_features()) {
        return Err(Error::invalid(format!(
            "feature index {bad} out of range for {} columns",
            dataset.n_features()
        )));
    }
    let mut out = dataset.clone();
    for &j in s.indices() {
        for (i, &src) in perm.order().iter().enumerate() {
            out.features[i * out.n_features + j] = dataset.features[src * dataset.n_features + j];
        }
    }
    Ok(out)
}

/// Ordinal encoding specification: column name to ordered category list.
/// A column listed here is encoded as the 0-based position of each cell in
/// its category list.
pub type EncodingSpec = BTreeMap<String, Vec<String>>;

/// Loads a comma-separated, UTF-8, headered file. Columns named in
/// `encoding` are mapped to ordinal codes in the given order; everything
/// else must parse as a finite number. Rows with missing values are
/// rejected, not imputed.
pub fn load_csv(path: &Path, label_column: &str, encoding: &EncodingSpec) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::invalid(format!("cannot read `{}`: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::invalid(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() {
        return Err(Error::invalid("empty file: no header row"));
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::invalid(format!("label column `{label_column}` not in header")))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let parse_cell = |value: &str, column: &str, row: usize| -> Result<f64> {
        if let Some(categories) = encoding.get(column) {
            return categories
                .iter()
                .position(|c| c == value)
                .map(|code| code as f64)
                .ok_or_else(|| Error::Csv {
                    row,
                    column: column.to_owned(),
                    message: format!("category `{value}` not in encoding spec"),
                });
        }
        let v: f64 = value.trim().parse().map_err(|_| Error::Csv {
            row,
            column: column.to_owned(),
            message: format!("cannot parse `{value}` as a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::Csv {
                row,
                column: column.to_owned(),
                message: format!("non-finite value `{value}`"),
            });
        }
        Ok(v)
    };

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row_no = r + 1;
        let record = record.map_err(|e| Error::Csv {
            row: row_no,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                row: row_no,
                column: String::new(),
                message: format!("{} fields, expected {}", record.len(), headers.len()),
            });
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (c, value) in record.iter().enumerate() {
            if value.is_empty() {
                return Err(Error::Csv {
                    row: row_no,
                    column: headers[c].clone(),
                    message: "missing value".into(),
                });
            }
            if c == label_idx {
                labels.push(parse_cell(value, &headers[c], row_no)?);
            } else {
                row.push(parse_cell(value, &headers[c], row_no)?);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid("empty file: no data rows"));
    }
    Dataset::from_rows(rows, labels, feature_names)
}

/// Writes a dataset back out in the same CSV dialect `load_csv` reads, with
/// the label as the last column. Numbers are rendered in shortest
/// round-trippable form, so load -> write -> load is the identity.
pub fn write_csv(dataset: &Dataset, label_name: &str, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header: Vec<&str> = dataset.column_names().iter().map(String::as_str).collect();
    header.push(label_name);
    writeln!(out, "{}", header.join(","))?;
    for i in 0..dataset.n_rows() {
        let mut fields: Vec<String> = dataset.row(i).iter().map(|v| v.to_string()).collect();
        fields.push(dataset.label(i).to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
