//! Model fit statistics and inferential statistics: rho-square/AIC/BIC
//! identities, numerical Hessians, standard errors, and t-tests.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{invert, Mat};
use crate::math;

/// Likelihood-based fit summary. `n_params` counts free parameters only.
#[derive(Debug, Clone, PartialEq)]
pub struct FitStatistics {
    pub null_ll: f64,
    pub final_ll: f64,
    pub rho_square: f64,
    pub aic: f64,
    pub bic: f64,
    pub n_params: usize,
    pub n_obs: usize,
}

impl FitStatistics {
    pub fn from_lls(null_ll: f64, final_ll: f64, n_params: usize, n_obs: usize) -> Self {
        let k = n_params as f64;
        FitStatistics {
            null_ll,
            final_ll,
            rho_square: 1.0 - final_ll / null_ll,
            aic: 2.0 * k - 2.0 * final_ll,
            bic: math::ln(n_obs as f64) * k - 2.0 * final_ll,
            n_params,
            n_obs,
        }
    }
}

/// Value, standard error, and t-test for one parameter. `std_err` is `None`
/// for fixed parameters and for entries flagged by a singular Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStat {
    pub name: String,
    pub value: f64,
    pub std_err: Option<f64>,
    pub t_stat: Option<f64>,
    pub fixed: bool,
}

/// Central-difference step for parameter value `v`: `1e-4 * max(1, |v|)`.
#[inline]
pub fn hessian_step(v: f64) -> f64 {
    1e-4 * v.abs().max(1.0)
}

/// Numerical Hessian of a log-likelihood restricted to `free` coordinates,
/// obtained by central differences of the analytic gradient and then
/// symmetrized. `grad` maps the full packed vector to the full packed
/// gradient.
pub fn hessian_free<G>(grad: G, x: &[f64], free: &[usize]) -> Mat
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let p = free.len();
    let mut hess = Mat::zeros(p, p);
    let mut point = x.to_vec();
    for (col, &j) in free.iter().enumerate() {
        let h = hessian_step(x[j]);
        point[j] = x[j] + h;
        let gp = grad(&point);
        point[j] = x[j] - h;
        let gm = grad(&point);
        point[j] = x[j];
        for (row, &i) in free.iter().enumerate() {
            hess[(row, col)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    // enforce symmetry lost to finite differencing
    for r in 0..p {
        for c in r + 1..p {
            let avg = 0.5 * (hess[(r, c)] + hess[(c, r)]);
            hess[(r, c)] = avg;
            hess[(c, r)] = avg;
        }
    }
    hess
}

/// Standard errors from a log-likelihood Hessian over free parameters:
/// `sqrt(diag(-H^-1))`. A singular Hessian or a non-positive diagonal entry
/// yields `None` in that position.
pub fn std_errors_from_hessian(hessian: &Mat) -> Vec<Option<f64>> {
    let p = hessian.rows();
    let mut neg = hessian.clone();
    neg.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
    match invert(&neg) {
        Some(cov) => (0..p)
            .map(|i| {
                let v = cov[(i, i)];
                if v.is_finite() && v > 0.0 {
                    Some(math::sqrt(v))
                } else {
                    None
                }
            })
            .collect(),
        None => vec![None; p],
    }
}

/// Assembles per-parameter statistics for a converged model: numerical
/// Hessian over the free coordinates, standard errors, `t = value/std_err`.
/// Fixed parameters report no standard error or t-test.
pub fn param_stats<G>(
    names: &[String],
    values: &[f64],
    fixed_mask: &[bool],
    grad: G,
) -> Vec<ParamStat>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    assert_eq!(names.len(), values.len());
    assert_eq!(names.len(), fixed_mask.len());
    let free: Vec<usize> = (0..values.len()).filter(|&i| !fixed_mask[i]).collect();
    let hess = hessian_free(&grad, values, &free);
    let errs = std_errors_from_hessian(&hess);
    let mut out = Vec::with_capacity(values.len());
    let mut free_pos = 0;
    for i in 0..values.len() {
        if fixed_mask[i] {
            out.push(ParamStat {
                name: names[i].clone(),
                value: values[i],
                std_err: None,
                t_stat: None,
                fixed: true,
            });
        } else {
            let se = errs[free_pos];
            out.push(ParamStat {
                name: names[i].clone(),
                value: values[i],
                std_err: se,
                t_stat: se.map(|s| values[i] / s),
                fixed: false,
            });
            free_pos += 1;
        }
    }
    out
}
