//! Multinomial logit choice core: utilities, probabilities, log-likelihood,
//! analytic score, reference fixing, and maximum-likelihood estimation.
//!
//! Utilities follow `V_i = asc_i + beta_attr . attr_i + beta_generic_i . x
//! + beta_latent_i . z`: attribute coefficients are shared across
//! alternatives while generic and latent coefficients are
//! alternative-specific with the reference alternative's row fixed at zero.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{ObservationRow, SurveyDataset, VariableCatalog};
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};
use crate::math;
use crate::opt::{maximize, Objective, OptimOutcome, OptimizerConfig};
use crate::stats::{param_stats, FitStatistics, ParamStat};

/// Shape of a choice model parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChoiceDims {
    pub n_alts: usize,
    pub n_alt_vars: usize,
    pub n_generic: usize,
    pub n_latents: usize,
}

impl ChoiceDims {
    pub fn from_catalog(catalog: &VariableCatalog, n_latents: usize) -> Self {
        ChoiceDims {
            n_alts: catalog.n_alternatives(),
            n_alt_vars: catalog.n_alt_vars(),
            n_generic: catalog.n_generic(),
            n_latents,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_alts
            + self.n_alt_vars
            + self.n_alts * self.n_generic
            + self.n_alts * self.n_latents
    }
}

/// MNL/ICLV choice parameters with a per-parameter frozen mask.
///
/// Packed layout: `asc | beta_attr | beta_generic (row-major) | beta_latent
/// (row-major)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceModelParams {
    pub asc: Vec<f64>,
    pub beta_attr: Vec<f64>,
    pub beta_generic: Mat,
    pub beta_latent: Mat,
    /// Flat mask over the packed layout; `true` = frozen at its value.
    pub fixed: Vec<bool>,
}

impl ChoiceModelParams {
    /// All-zero parameters with every coordinate free.
    pub fn zeros(dims: ChoiceDims) -> Self {
        ChoiceModelParams {
            asc: vec![0.0; dims.n_alts],
            beta_attr: vec![0.0; dims.n_alt_vars],
            beta_generic: Mat::zeros(dims.n_alts, dims.n_generic),
            beta_latent: Mat::zeros(dims.n_alts, dims.n_latents),
            fixed: vec![false; dims.n_params()],
        }
    }

    /// Zeros with the reference alternative's ASC, generic row, and latent
    /// row fixed at zero for identifiability.
    pub fn identified(dims: ChoiceDims, reference: usize) -> Self {
        let mut p = Self::zeros(dims);
        p.fixed[reference] = true;
        for m in 0..dims.n_generic {
            let idx = p.generic_offset(m, reference);
            p.fixed[idx] = true;
        }
        for h in 0..dims.n_latents {
            let idx = p.latent_offset(h, reference);
            p.fixed[idx] = true;
        }
        p
    }

    pub fn dims(&self) -> ChoiceDims {
        ChoiceDims {
            n_alts: self.asc.len(),
            n_alt_vars: self.beta_attr.len(),
            n_generic: self.beta_generic.cols(),
            n_latents: self.beta_latent.cols(),
        }
    }

    fn generic_offset(&self, m: usize, alt: usize) -> usize {
        self.asc.len() + self.beta_attr.len() + alt * self.beta_generic.cols() + m
    }

    fn latent_offset(&self, h: usize, alt: usize) -> usize {
        self.asc.len()
            + self.beta_attr.len()
            + self.asc.len() * self.beta_generic.cols()
            + alt * self.beta_latent.cols()
            + h
    }

    pub fn n_params(&self) -> usize {
        self.dims().n_params()
    }

    pub fn n_free(&self) -> usize {
        self.fixed.iter().filter(|&&f| !f).count()
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.asc);
        out.extend_from_slice(&self.beta_attr);
        out.extend_from_slice(self.beta_generic.as_slice());
        out.extend_from_slice(self.beta_latent.as_slice());
        out
    }

    pub fn unpack(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let (i, a) = (self.asc.len(), self.beta_attr.len());
        let g = self.beta_generic.as_slice().len();
        self.asc.copy_from_slice(&flat[..i]);
        self.beta_attr.copy_from_slice(&flat[i..i + a]);
        self.beta_generic.as_mut_slice().copy_from_slice(&flat[i + a..i + a + g]);
        self.beta_latent.as_mut_slice().copy_from_slice(&flat[i + a + g..]);
    }

    pub fn with_packed(&self, flat: &[f64]) -> Self {
        let mut p = self.clone();
        p.unpack(flat);
        p
    }

    /// Human-readable name per packed coordinate.
    pub fn param_names(&self, catalog: &VariableCatalog, latent_names: &[String]) -> Vec<String> {
        let dims = self.dims();
        let mut names = Vec::with_capacity(dims.n_params());
        for alt in &catalog.alternatives {
            names.push(format!("ASC_{alt}"));
        }
        for var in &catalog.alt_specific_vars {
            names.push(var.clone());
        }
        for alt in &catalog.alternatives {
            for var in &catalog.generic_vars {
                names.push(format!("{var}:{alt}"));
            }
        }
        for alt in &catalog.alternatives {
            for h in 0..dims.n_latents {
                let latent = latent_names.get(h).map(String::as_str).unwrap_or("latent");
                names.push(format!("{latent}:{alt}"));
            }
        }
        names
    }

    fn check_row(&self, row: &ObservationRow, latent: &[f64]) -> Result<()> {
        let dims = self.dims();
        if row.availability.len() != dims.n_alts {
            return Err(Error::DimensionMismatch {
                context: "alternatives",
                expected: dims.n_alts,
                actual: row.availability.len(),
            });
        }
        if row.alt_attributes.cols() != dims.n_alt_vars {
            return Err(Error::DimensionMismatch {
                context: "alt-specific variables",
                expected: dims.n_alt_vars,
                actual: row.alt_attributes.cols(),
            });
        }
        if row.generic.len() != dims.n_generic {
            return Err(Error::DimensionMismatch {
                context: "generic variables",
                expected: dims.n_generic,
                actual: row.generic.len(),
            });
        }
        if latent.len() != dims.n_latents {
            return Err(Error::DimensionMismatch {
                context: "latent vector",
                expected: dims.n_latents,
                actual: latent.len(),
            });
        }
        Ok(())
    }
}

/// Systematic utility of every alternative for one row. The extreme-value
/// disturbance lives in the probability formula and is never sampled here.
pub fn utility(params: &ChoiceModelParams, row: &ObservationRow, latent: &[f64]) -> Result<Vec<f64>> {
    params.check_row(row, latent)?;
    let dims = params.dims();
    let mut v = Vec::with_capacity(dims.n_alts);
    for i in 0..dims.n_alts {
        let mut u = params.asc[i];
        u += dot(&params.beta_attr, row.alt_attributes.row(i));
        u += dot(params.beta_generic.row(i), &row.generic);
        u += dot(params.beta_latent.row(i), latent);
        v.push(u);
    }
    Ok(v)
}

/// Softmax over available alternatives; unavailable ones get probability
/// exactly zero.
pub fn choice_probabilities(utilities: &[f64], availability: &[bool]) -> Result<Vec<f64>> {
    if utilities.len() != availability.len() {
        return Err(Error::DimensionMismatch {
            context: "availability",
            expected: utilities.len(),
            actual: availability.len(),
        });
    }
    math::softmax_masked(utilities, availability).ok_or(Error::NoAvailableAlternative)
}

const NO_LATENTS: &[Vec<f64>] = &[];

fn latent_for_row<'a>(latents: Option<&'a [Vec<f64>]>, row: usize) -> &'a [f64] {
    match latents {
        Some(ls) => &ls[row],
        None => {
            let _ = NO_LATENTS;
            &[]
        }
    }
}

/// Sum over rows of the log probability of the chosen alternative.
pub fn log_likelihood(
    params: &ChoiceModelParams,
    dataset: &SurveyDataset,
    latents: Option<&[Vec<f64>]>,
) -> Result<f64> {
    if let Some(ls) = latents {
        if ls.len() != dataset.n_rows() {
            return Err(Error::DimensionMismatch {
                context: "per-row latents",
                expected: dataset.n_rows(),
                actual: ls.len(),
            });
        }
    }
    let mut ll = 0.0;
    for (r, row) in dataset.rows.iter().enumerate() {
        let v = utility(params, row, latent_for_row(latents, r))?;
        let p = choice_probabilities(&v, &row.availability)?;
        ll += math::ln(p[row.choice]);
    }
    Ok(ll)
}

/// Log-likelihood at all-zero parameters: every row contributes
/// `ln(1/n_available)`.
pub fn null_log_likelihood(dataset: &SurveyDataset) -> f64 {
    dataset
        .rows
        .iter()
        .map(|row| {
            let n = row.availability.iter().filter(|&&a| a).count();
            -math::ln(n as f64)
        })
        .sum()
}

/// Analytic score of [`log_likelihood`] in the packed layout. Entries for
/// fixed parameters are forced to zero.
pub fn gradient(
    params: &ChoiceModelParams,
    dataset: &SurveyDataset,
    latents: Option<&[Vec<f64>]>,
) -> Result<Vec<f64>> {
    let dims = params.dims();
    let mut grad = vec![0.0; dims.n_params()];
    let attr_base = dims.n_alts;
    let generic_base = attr_base + dims.n_alt_vars;
    let latent_base = generic_base + dims.n_alts * dims.n_generic;
    for (r, row) in dataset.rows.iter().enumerate() {
        let z = latent_for_row(latents, r);
        let v = utility(params, row, z)?;
        let p = choice_probabilities(&v, &row.availability)?;
        for i in 0..dims.n_alts {
            let w = if i == row.choice { 1.0 - p[i] } else { -p[i] };
            if w == 0.0 {
                continue;
            }
            grad[i] += w;
            for a in 0..dims.n_alt_vars {
                grad[attr_base + a] += w * row.alt_attributes[(i, a)];
            }
            for m in 0..dims.n_generic {
                grad[generic_base + i * dims.n_generic + m] += w * row.generic[m];
            }
            for h in 0..dims.n_latents {
                grad[latent_base + i * dims.n_latents + h] += w * z[h];
            }
        }
    }
    for (g, &fix) in grad.iter_mut().zip(params.fixed.iter()) {
        if fix {
            *g = 0.0;
        }
    }
    Ok(grad)
}

struct MnlObjective<'a> {
    template: &'a ChoiceModelParams,
    dataset: &'a SurveyDataset,
    latents: Option<&'a [Vec<f64>]>,
}

impl Objective for MnlObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let p = self.template.with_packed(x);
        log_likelihood(&p, self.dataset, self.latents).unwrap_or(f64::NEG_INFINITY)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let p = self.template.with_packed(x);
        gradient(&p, self.dataset, self.latents).expect("dimensions checked at entry")
    }

    fn n_rows(&self) -> usize {
        self.dataset.n_rows()
    }

    fn gradient_rows(&self, x: &[f64], rows: &[usize]) -> Vec<f64> {
        let p = self.template.with_packed(x);
        let mut grad = vec![0.0; p.n_params()];
        let dims = p.dims();
        let attr_base = dims.n_alts;
        let generic_base = attr_base + dims.n_alt_vars;
        let latent_base = generic_base + dims.n_alts * dims.n_generic;
        for &r in rows {
            let row = &self.dataset.rows[r];
            let z = latent_for_row(self.latents, r);
            let v = utility(&p, row, z).expect("dimensions checked at entry");
            let probs = choice_probabilities(&v, &row.availability).expect("validated row");
            for i in 0..dims.n_alts {
                let w = if i == row.choice { 1.0 - probs[i] } else { -probs[i] };
                if w == 0.0 {
                    continue;
                }
                grad[i] += w;
                for a in 0..dims.n_alt_vars {
                    grad[attr_base + a] += w * row.alt_attributes[(i, a)];
                }
                for m in 0..dims.n_generic {
                    grad[generic_base + i * dims.n_generic + m] += w * row.generic[m];
                }
                for h in 0..dims.n_latents {
                    grad[latent_base + i * dims.n_latents + h] += w * z[h];
                }
            }
        }
        let scale = 1.0 / rows.len().max(1) as f64;
        for (g, &fix) in grad.iter_mut().zip(p.fixed.iter()) {
            *g = if fix { 0.0 } else { *g * scale };
        }
        grad
    }
}

/// A fitted choice model. `converged` is false when the optimizer hit its
/// iteration budget before reaching the gradient tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct MnlFit {
    pub params: ChoiceModelParams,
    pub stats: FitStatistics,
    pub converged: bool,
    pub iterations: usize,
    pub grad_inf_norm: f64,
}

/// Maximum-likelihood estimation from `init`, which must already respect the
/// fixed mask.
pub fn estimate(
    dataset: &SurveyDataset,
    init: &ChoiceModelParams,
    latents: Option<&[Vec<f64>]>,
    cfg: &OptimizerConfig,
) -> Result<MnlFit> {
    // surface dimension errors before optimizing
    log_likelihood(init, dataset, latents)?;
    let obj = MnlObjective { template: init, dataset, latents };
    let OptimOutcome { x, value, grad_inf_norm, converged, iterations } =
        maximize(&obj, init.pack(), cfg);
    let params = init.with_packed(&x);
    let stats = FitStatistics::from_lls(
        null_log_likelihood(dataset),
        value,
        params.n_free(),
        dataset.n_rows(),
    );
    Ok(MnlFit { params, stats, converged, iterations, grad_inf_norm })
}

/// Per-parameter standard errors and t-tests at a converged optimum via the
/// numerical Hessian of the log-likelihood.
pub fn std_errors_and_ttests(
    params: &ChoiceModelParams,
    dataset: &SurveyDataset,
    latents: Option<&[Vec<f64>]>,
    catalog: &VariableCatalog,
    latent_names: &[String],
) -> Result<Vec<ParamStat>> {
    log_likelihood(params, dataset, latents)?;
    let names = params.param_names(catalog, latent_names);
    let grad_fn = |x: &[f64]| {
        let p = params.with_packed(x);
        gradient(&p, dataset, latents).expect("dimensions checked at entry")
    };
    Ok(param_stats(&names, &params.pack(), &params.fixed, grad_fn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{IndicatorVar, ObservationRow, VariableCatalog};

    fn catalog() -> VariableCatalog {
        VariableCatalog::new(
            vec!["car".into(), "bus".into()],
            "bus",
            vec!["cost".into()],
            vec![],
            Vec::<IndicatorVar>::new(),
        )
        .unwrap()
    }

    fn row(costs: [f64; 2], choice: usize) -> ObservationRow {
        ObservationRow::new(
            Mat::from_rows(&[vec![costs[0]], vec![costs[1]]]),
            vec![],
            choice,
            vec![true, true],
            None,
        )
        .unwrap()
    }

    fn dataset(rows: Vec<ObservationRow>) -> SurveyDataset {
        SurveyDataset::new(catalog(), rows, vec![1.0]).unwrap()
    }

    #[test]
    fn zero_params_give_zero_utilities() {
        let p = ChoiceModelParams::zeros(ChoiceDims {
            n_alts: 2,
            n_alt_vars: 1,
            n_generic: 0,
            n_latents: 0,
        });
        let v = utility(&p, &row([1.0, 2.0], 0), &[]).unwrap();
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn utility_hand_arithmetic() {
        // asc = [0.643, 0], cost coefficient -0.609, costs [1, 2]
        let mut p = ChoiceModelParams::zeros(ChoiceDims {
            n_alts: 2,
            n_alt_vars: 1,
            n_generic: 0,
            n_latents: 0,
        });
        p.asc = vec![0.643, 0.0];
        p.beta_attr = vec![-0.609];
        let v = utility(&p, &row([1.0, 2.0], 0), &[]).unwrap();
        assert!((v[0] - 0.034).abs() < 1e-12);
        assert!((v[1] + 1.218).abs() < 1e-12);
    }

    #[test]
    fn probability_anchors() {
        let p = choice_probabilities(&[0.0, 0.0, 0.0], &[true, true, true]).unwrap();
        for &pi in &p {
            assert!((pi - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = choice_probabilities(&[2f64.ln(), 0.0], &[true, true]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
        // unavailable middle renormalizes over the rest
        let p = choice_probabilities(&[5.0, 1.0, 3.0], &[true, false, true]).unwrap();
        let denom = 5f64.exp() + 3f64.exp();
        assert_eq!(p[1], 0.0);
        assert!((p[0] - 5f64.exp() / denom).abs() < 1e-12);
        assert!((p[2] - 3f64.exp() / denom).abs() < 1e-12);
        assert!(choice_probabilities(&[1.0], &[false]).is_err());
    }

    #[test]
    fn translation_invariance() {
        let base = choice_probabilities(&[0.4, -1.0, 2.2], &[true, true, true]).unwrap();
        let shifted = choice_probabilities(&[100.4, 99.0, 102.2], &[true, true, true]).unwrap();
        for (a, b) in base.iter().zip(shifted.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn null_ll_matches_zero_params() {
        let ds = dataset(vec![row([1.0, 2.0], 0), row([0.5, 0.5], 1), row([3.0, 1.0], 1)]);
        let p = ChoiceModelParams::zeros(ChoiceDims {
            n_alts: 2,
            n_alt_vars: 1,
            n_generic: 0,
            n_latents: 0,
        });
        let ll0 = null_log_likelihood(&ds);
        assert!((ll0 - 3.0 * (1.0f64 / 2.0).ln()).abs() < 1e-12);
        assert!((log_likelihood(&p, &ds, None).unwrap() - ll0).abs() < 1e-12);
    }

    #[test]
    fn null_ll_mixed_availability() {
        let catalog = VariableCatalog::new(
            vec!["a".into(), "b".into(), "c".into()],
            "a",
            vec![],
            vec![],
            vec![],
        )
        .unwrap();
        let full = ObservationRow::new(Mat::zeros(3, 0), vec![], 0, vec![true; 3], None).unwrap();
        let partial =
            ObservationRow::new(Mat::zeros(3, 0), vec![], 0, vec![true, true, false], None)
                .unwrap();
        let ds = SurveyDataset::new(catalog, vec![full.clone(), full, partial], vec![]).unwrap();
        let expect = 2.0 * (1.0f64 / 3.0).ln() + (1.0f64 / 2.0).ln();
        assert!((null_log_likelihood(&ds) - expect).abs() < 1e-12);
    }

    #[test]
    fn asc_gradient_is_share_difference_at_zero() {
        // 3 rows, choices [0, 0, 1]; at zero params P = 1/2 each
        let ds = dataset(vec![row([0.0, 0.0], 0), row([0.0, 0.0], 0), row([0.0, 0.0], 1)]);
        let p = ChoiceModelParams::zeros(ChoiceDims {
            n_alts: 2,
            n_alt_vars: 1,
            n_generic: 0,
            n_latents: 0,
        });
        let g = gradient(&p, &ds, None).unwrap();
        // observed count - n * uniform share
        assert!((g[0] - (2.0 - 1.5)).abs() < 1e-12);
        assert!((g[1] - (1.0 - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn fixed_entries_zeroed_in_gradient() {
        let ds = dataset(vec![row([1.0, 2.0], 0)]);
        let dims = ChoiceDims { n_alts: 2, n_alt_vars: 1, n_generic: 0, n_latents: 0 };
        let p = ChoiceModelParams::identified(dims, 1);
        let g = gradient(&p, &ds, None).unwrap();
        assert_eq!(g[1], 0.0);
        assert_ne!(g[0], 0.0);
    }

    #[test]
    fn single_row_half_probability() {
        let ds = dataset(vec![row([0.0, 0.0], 1)]);
        let p = ChoiceModelParams::zeros(ChoiceDims {
            n_alts: 2,
            n_alt_vars: 1,
            n_generic: 0,
            n_latents: 0,
        });
        assert!((log_likelihood(&p, &ds, None).unwrap() - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn estimate_recovers_cost_sign_and_reports_stats() {
        // strongly cost-driven choices
        let mut rows = Vec::new();
        for k in 0..40 {
            let (c0, c1) = (1.0 + (k % 3) as f64, 2.0 + (k % 2) as f64);
            rows.push(row([c0, c1], if c0 < c1 { 0 } else { 1 }));
        }
        let ds = dataset(rows);
        let dims = ChoiceDims { n_alts: 2, n_alt_vars: 1, n_generic: 0, n_latents: 0 };
        let init = ChoiceModelParams::identified(dims, 1);
        let fit = estimate(&ds, &init, None, &OptimizerConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.params.beta_attr[0] < 0.0);
        assert!(fit.stats.final_ll >= fit.stats.null_ll);
        assert!((fit.stats.rho_square - (1.0 - fit.stats.final_ll / fit.stats.null_ll)).abs() < 1e-12);
        assert_eq!(fit.stats.n_params, 2); // ASC_car + cost
        // reference stays pinned
        assert_eq!(fit.params.asc[1], 0.0);
    }

    #[test]
    fn estimate_from_optimum_stays_put() {
        let ds = dataset(vec![row([1.0, 2.0], 0), row([2.0, 1.0], 1), row([1.5, 1.5], 0)]);
        let dims = ChoiceDims { n_alts: 2, n_alt_vars: 1, n_generic: 0, n_latents: 0 };
        let init = ChoiceModelParams::identified(dims, 1);
        let first = estimate(&ds, &init, None, &OptimizerConfig::default()).unwrap();
        let again = estimate(&ds, &first.params, None, &OptimizerConfig::default()).unwrap();
        assert!(again.converged);
        assert!(again.iterations <= 2);
        assert!((again.stats.final_ll - first.stats.final_ll).abs() < 1e-8);
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let dims = ChoiceDims { n_alts: 3, n_alt_vars: 2, n_generic: 2, n_latents: 1 };
        let mut p = ChoiceModelParams::zeros(dims);
        let flat: Vec<f64> = (0..p.n_params()).map(|i| i as f64 * 0.1).collect();
        p.unpack(&flat);
        assert_eq!(p.pack(), flat);
        assert_eq!(p.beta_generic[(1, 0)], flat[3 + 2 + 2] );
    }
}
