//! Canonical survey dataset: variable catalog, observation rows, binary
//! coding, scaling, and diagnostics.
//!
//! Rows hold alternative-specific attributes (one value per alternative and
//! attribute), binary-coded generic covariates, the chosen alternative, an
//! availability mask, and optional binary indicators. A dataset is immutable
//! after construction and safe to share across estimation workers.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Names an indicator and the alternative it asks about.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorVar {
    pub name: String,
    pub alternative: usize,
}

/// Declares every variable in the dataset and which category it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableCatalog {
    pub alternatives: Vec<String>,
    /// Index of the reference alternative (its ASC is fixed to zero).
    pub reference: usize,
    pub alt_specific_vars: Vec<String>,
    pub generic_vars: Vec<String>,
    pub indicator_vars: Vec<IndicatorVar>,
}

impl VariableCatalog {
    pub fn new(
        alternatives: Vec<String>,
        reference: &str,
        alt_specific_vars: Vec<String>,
        generic_vars: Vec<String>,
        indicator_vars: Vec<IndicatorVar>,
    ) -> Result<Self> {
        if alternatives.is_empty() {
            return Err(Error::InvalidCatalog("no alternatives declared".into()));
        }
        let reference = alternatives
            .iter()
            .position(|a| a == reference)
            .ok_or_else(|| Error::InvalidCatalog(format!("reference `{reference}` is not an alternative")))?;
        for ind in &indicator_vars {
            if ind.alternative >= alternatives.len() {
                return Err(Error::InvalidCatalog(format!(
                    "indicator `{}` refers to alternative index {} out of range",
                    ind.name, ind.alternative
                )));
            }
        }
        let catalog = VariableCatalog {
            alternatives,
            reference,
            alt_specific_vars,
            generic_vars,
            indicator_vars,
        };
        catalog.check_unique_names()?;
        Ok(catalog)
    }

    fn check_unique_names(&self) -> Result<()> {
        let mut seen: Vec<&str> = Vec::new();
        let all = self
            .alternatives
            .iter()
            .chain(self.alt_specific_vars.iter())
            .chain(self.generic_vars.iter())
            .map(String::as_str)
            .chain(self.indicator_vars.iter().map(|i| i.name.as_str()));
        for name in all {
            if seen.contains(&name) {
                return Err(Error::InvalidCatalog(format!("duplicate name `{name}`")));
            }
            seen.push(name);
        }
        Ok(())
    }

    pub fn n_alternatives(&self) -> usize {
        self.alternatives.len()
    }

    pub fn n_alt_vars(&self) -> usize {
        self.alt_specific_vars.len()
    }

    pub fn n_generic(&self) -> usize {
        self.generic_vars.len()
    }

    pub fn n_indicators(&self) -> usize {
        self.indicator_vars.len()
    }

    pub fn alternative_index(&self, name: &str) -> Result<usize> {
        self.alternatives
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn generic_index(&self, name: &str) -> Result<usize> {
        self.generic_vars
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }
}

/// One observation: attributes, covariates, chosen alternative, availability,
/// optional indicators. Fields are public plain data; [`ObservationRow::new`]
/// validates the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRow {
    /// `[alternative x alt_specific_var]` attribute values.
    pub alt_attributes: Mat,
    /// Binary-coded respondent covariates, each exactly 0 or 1.
    pub generic: Vec<f64>,
    /// Index of the chosen alternative.
    pub choice: usize,
    /// Per-alternative availability mask.
    pub availability: Vec<bool>,
    /// Binary indicator responses aligned with the catalog, absent for
    /// RP-only rows.
    pub indicators: Option<Vec<f64>>,
}

impl ObservationRow {
    pub fn new(
        alt_attributes: Mat,
        generic: Vec<f64>,
        choice: usize,
        availability: Vec<bool>,
        indicators: Option<Vec<f64>>,
    ) -> Result<Self> {
        let row = ObservationRow { alt_attributes, generic, choice, availability, indicators };
        row.check(0)?;
        Ok(row)
    }

    /// Validates this row's internal invariants, reporting `row_index` in
    /// error messages.
    pub fn check(&self, row_index: usize) -> Result<()> {
        let n_alts = self.availability.len();
        if self.alt_attributes.rows() != n_alts {
            return Err(Error::DimensionMismatch {
                context: "alt_attributes rows",
                expected: n_alts,
                actual: self.alt_attributes.rows(),
            });
        }
        let n_avail = self.availability.iter().filter(|&&a| a).count();
        if n_avail < 2 {
            return Err(Error::InvalidRow {
                row: row_index,
                message: format!("only {n_avail} alternative(s) available, need at least 2"),
            });
        }
        if self.choice >= n_alts {
            return Err(Error::InvalidRow {
                row: row_index,
                message: format!("choice index {} out of range", self.choice),
            });
        }
        if !self.availability[self.choice] {
            return Err(Error::InvalidRow {
                row: row_index,
                message: format!("chosen alternative {} is unavailable", self.choice),
            });
        }
        for (i, &g) in self.generic.iter().enumerate() {
            if g != 0.0 && g != 1.0 {
                return Err(Error::InvalidRow {
                    row: row_index,
                    message: format!("generic variable {i} has non-binary value {g}"),
                });
            }
        }
        if let Some(inds) = &self.indicators {
            for (j, &v) in inds.iter().enumerate() {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::InvalidRow {
                        row: row_index,
                        message: format!("indicator {j} has non-binary value {v}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Immutable validated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyDataset {
    pub catalog: VariableCatalog,
    pub rows: Vec<ObservationRow>,
    /// Multiplier already applied to each alt-specific variable at load.
    pub scale_factors: Vec<f64>,
}

impl SurveyDataset {
    /// Builds a dataset from already-scaled rows, validating every row
    /// against the catalog.
    pub fn new(
        catalog: VariableCatalog,
        rows: Vec<ObservationRow>,
        scale_factors: Vec<f64>,
    ) -> Result<Self> {
        if scale_factors.len() != catalog.n_alt_vars() {
            return Err(Error::DimensionMismatch {
                context: "scale_factors",
                expected: catalog.n_alt_vars(),
                actual: scale_factors.len(),
            });
        }
        if scale_factors.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidSpec("scale factors must be strictly positive".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            row.check(i)?;
            Self::check_row_dims(&catalog, row, i)?;
        }
        Ok(SurveyDataset { catalog, rows, scale_factors })
    }

    /// Applies `scale_factors` to raw attribute values, then validates.
    pub fn from_unscaled(
        catalog: VariableCatalog,
        mut rows: Vec<ObservationRow>,
        scale_factors: Vec<f64>,
    ) -> Result<Self> {
        for row in &mut rows {
            for i in 0..row.alt_attributes.rows() {
                for (a, &s) in scale_factors.iter().enumerate() {
                    row.alt_attributes[(i, a)] *= s;
                }
            }
        }
        Self::new(catalog, rows, scale_factors)
    }

    fn check_row_dims(catalog: &VariableCatalog, row: &ObservationRow, index: usize) -> Result<()> {
        if row.availability.len() != catalog.n_alternatives() {
            return Err(Error::InvalidRow {
                row: index,
                message: format!(
                    "availability length {} does not match {} alternatives",
                    row.availability.len(),
                    catalog.n_alternatives()
                ),
            });
        }
        if row.alt_attributes.cols() != catalog.n_alt_vars() {
            return Err(Error::InvalidRow {
                row: index,
                message: format!(
                    "attribute columns {} do not match {} alt-specific variables",
                    row.alt_attributes.cols(),
                    catalog.n_alt_vars()
                ),
            });
        }
        if row.generic.len() != catalog.n_generic() {
            return Err(Error::InvalidRow {
                row: index,
                message: format!(
                    "generic length {} does not match {} generic variables",
                    row.generic.len(),
                    catalog.n_generic()
                ),
            });
        }
        if let Some(inds) = &row.indicators {
            if inds.len() != catalog.n_indicators() {
                return Err(Error::InvalidRow {
                    row: index,
                    message: format!(
                        "indicator length {} does not match {} indicator variables",
                        inds.len(),
                        catalog.n_indicators()
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Likert coding used throughout: responses 1-3 map to 1, responses 4-5 map
/// to 0. `binarize_likert_with` flips the mapping when asked.
pub fn binarize_likert(response: i64) -> Result<f64> {
    binarize_likert_with(response, false)
}

pub fn binarize_likert_with(response: i64, flip: bool) -> Result<f64> {
    let coded = match response {
        1..=3 => 1.0,
        4 | 5 => 0.0,
        _ => return Err(Error::LikertOutOfRange { value: response }),
    };
    Ok(if flip { 1.0 - coded } else { coded })
}

/// One-hot bin membership for `value` over left-closed, right-open bins.
/// `edges` of length k produce k+1 bins; values past the last edge land in
/// the overflow bin.
pub fn categorize_continuous(value: f64, bin_edges: &[f64]) -> Result<Vec<f64>> {
    if bin_edges.is_empty() {
        return Err(Error::InvalidBinEdges);
    }
    if bin_edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidBinEdges);
    }
    let mut bin = bin_edges.len();
    for (i, &edge) in bin_edges.iter().enumerate() {
        if value < edge {
            bin = i;
            break;
        }
    }
    let mut out = vec![0.0; bin_edges.len() + 1];
    out[bin] = 1.0;
    Ok(out)
}

/// Outcome of one invariant check in [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: Option<String>,
}

/// Dataset health report: counts, means, availability frequencies, invariant
/// pass/fail, and non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetDiagnostics {
    pub n_rows: usize,
    pub generic_means: Vec<f64>,
    pub attribute_means: Vec<f64>,
    pub indicator_means: Vec<f64>,
    pub availability_counts: Vec<usize>,
    pub choice_counts: Vec<usize>,
    pub invariants: Vec<InvariantCheck>,
    pub warnings: Vec<String>,
}

impl DatasetDiagnostics {
    pub fn all_pass(&self) -> bool {
        self.invariants.iter().all(|c| c.pass)
    }
}

/// Never mutates and never fails: invariant violations come back as failed
/// checks, oddities (an alternative never chosen) as warnings.
pub fn validate(dataset: &SurveyDataset) -> DatasetDiagnostics {
    let cat = &dataset.catalog;
    let n = dataset.rows.len();
    let mut generic_sums = vec![0.0; cat.n_generic()];
    let mut attr_sums = vec![0.0; cat.n_alt_vars()];
    let mut ind_sums = vec![0.0; cat.n_indicators()];
    let mut ind_counts = vec![0usize; cat.n_indicators()];
    let mut avail_counts = vec![0usize; cat.n_alternatives()];
    let mut choice_counts = vec![0usize; cat.n_alternatives()];

    let mut row_failures: Vec<String> = Vec::new();
    for (i, row) in dataset.rows.iter().enumerate() {
        if let Err(e) = row.check(i).and_then(|_| SurveyDataset::check_row_dims(cat, row, i)) {
            row_failures.push(e.to_string());
            continue;
        }
        for (m, &g) in row.generic.iter().enumerate() {
            generic_sums[m] += g;
        }
        for a in 0..cat.n_alt_vars() {
            for alt in 0..cat.n_alternatives() {
                attr_sums[a] += row.alt_attributes[(alt, a)];
            }
        }
        if let Some(inds) = &row.indicators {
            for (j, &v) in inds.iter().enumerate() {
                ind_sums[j] += v;
                ind_counts[j] += 1;
            }
        }
        for (alt, &av) in row.availability.iter().enumerate() {
            if av {
                avail_counts[alt] += 1;
            }
        }
        if row.choice < choice_counts.len() {
            choice_counts[row.choice] += 1;
        }
    }

    let mut invariants = vec![InvariantCheck {
        name: "rows_conform",
        pass: row_failures.is_empty(),
        detail: row_failures.first().cloned(),
    }];
    invariants.push(InvariantCheck {
        name: "scale_factors_positive",
        pass: dataset.scale_factors.iter().all(|&s| s > 0.0),
        detail: None,
    });

    let mut warnings = Vec::new();
    for (alt, &count) in choice_counts.iter().enumerate() {
        if count == 0 && n > 0 {
            warnings.push(format!("alternative `{}` is never chosen", cat.alternatives[alt]));
        }
    }

    let denom = if n == 0 { 1.0 } else { n as f64 };
    DatasetDiagnostics {
        n_rows: n,
        generic_means: generic_sums.iter().map(|s| s / denom).collect(),
        attribute_means: attr_sums
            .iter()
            .map(|s| s / (denom * cat.n_alternatives().max(1) as f64))
            .collect(),
        indicator_means: ind_sums
            .iter()
            .zip(ind_counts.iter())
            .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect(),
        availability_counts: avail_counts,
        choice_counts,
        invariants,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_catalog() -> VariableCatalog {
        VariableCatalog::new(
            vec!["car".into(), "bus".into(), "train".into()],
            "train",
            vec!["cost".into()],
            vec!["license".into(), "young".into()],
            vec![],
        )
        .unwrap()
    }

    fn row(choice: usize) -> ObservationRow {
        ObservationRow::new(
            Mat::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]),
            vec![1.0, 0.0],
            choice,
            vec![true, true, true],
            None,
        )
        .unwrap()
    }

    #[test]
    fn catalog_rejects_duplicates_and_bad_reference() {
        let err = VariableCatalog::new(
            vec!["car".into(), "car".into()],
            "car",
            vec![],
            vec![],
            vec![],
        );
        assert!(matches!(err, Err(Error::InvalidCatalog(_))));
        let err = VariableCatalog::new(vec!["car".into()], "bus", vec![], vec![], vec![]);
        assert!(matches!(err, Err(Error::InvalidCatalog(_))));
    }

    #[test]
    fn row_rejects_unavailable_choice() {
        let err = ObservationRow::new(
            Mat::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]),
            vec![],
            1,
            vec![true, false, true],
            None,
        );
        assert!(matches!(err, Err(Error::InvalidRow { row: 0, .. })));
    }

    #[test]
    fn row_requires_two_available() {
        let err = ObservationRow::new(
            Mat::from_rows(&[vec![1.0], vec![2.0]]),
            vec![],
            0,
            vec![true, false],
            None,
        );
        assert!(err.is_err());
    }

    #[test]
    fn likert_coding_matches_published_mapping() {
        assert_eq!(binarize_likert(3).unwrap(), 1.0);
        assert_eq!(binarize_likert(5).unwrap(), 0.0);
        assert_eq!(binarize_likert(1).unwrap(), 1.0);
        assert_eq!(binarize_likert(4).unwrap(), 0.0);
        assert!(matches!(binarize_likert(0), Err(Error::LikertOutOfRange { value: 0 })));
        assert!(binarize_likert(6).is_err());
        // flip inverts the image
        assert_eq!(binarize_likert_with(3, true).unwrap(), 0.0);
        assert_eq!(binarize_likert_with(5, true).unwrap(), 1.0);
    }

    #[test]
    fn categorize_respects_boundaries() {
        assert_eq!(categorize_continuous(30.0, &[25.0, 45.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        // left-closed at the edge
        assert_eq!(categorize_continuous(25.0, &[25.0, 45.0]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(categorize_continuous(70.0, &[25.0, 45.0]).unwrap(), vec![0.0, 0.0, 1.0]);
        assert_eq!(categorize_continuous(10.0, &[25.0, 45.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(categorize_continuous(1.0, &[]).is_err());
        assert!(categorize_continuous(1.0, &[2.0, 2.0]).is_err());
    }

    #[test]
    fn scaling_applies_at_load() {
        let catalog = small_catalog();
        let rows = vec![row(0), row(2)];
        let ds = SurveyDataset::from_unscaled(catalog, rows, vec![0.01]).unwrap();
        assert!((ds.rows[0].alt_attributes[(0, 0)] - 0.01).abs() < 1e-15);
        assert!((ds.rows[1].alt_attributes[(2, 0)] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn scaling_by_one_is_identity() {
        let catalog = small_catalog();
        let rows = vec![row(1)];
        let ds = SurveyDataset::from_unscaled(catalog.clone(), rows.clone(), vec![1.0]).unwrap();
        assert_eq!(ds.rows, rows);
    }

    #[test]
    fn validate_reports_and_warns() {
        let catalog = small_catalog();
        // 5 rows; alternative 1 never chosen
        let rows = vec![row(0), row(0), row(2), row(2), row(2)];
        let ds = SurveyDataset::new(catalog, rows, vec![1.0]).unwrap();
        let diag = validate(&ds);
        assert_eq!(diag.n_rows, 5);
        assert!(diag.all_pass());
        assert_eq!(diag.choice_counts, vec![2, 0, 3]);
        assert_eq!(diag.warnings.len(), 1);
        assert!(diag.warnings[0].contains("bus"));
        assert_eq!(diag.generic_means, vec![1.0, 0.0]);
    }

    #[test]
    fn validate_flags_nonbinary_generic_with_row_index() {
        let catalog = small_catalog();
        let mut bad = row(0);
        bad.generic[1] = 2.0;
        let ds = SurveyDataset { catalog, rows: vec![row(1), bad], scale_factors: vec![1.0] };
        let diag = validate(&ds);
        assert!(!diag.all_pass());
        let check = diag.invariants.iter().find(|c| c.name == "rows_conform").unwrap();
        assert!(!check.pass);
        assert!(check.detail.as_ref().unwrap().contains("row 1"));
    }
}
