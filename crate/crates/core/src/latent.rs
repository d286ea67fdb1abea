//! Structural functions mapping generic covariates to latent variable
//! values: linear, sigmoid, rectifier, and soft rectifier, each with an
//! optional Gaussian disturbance.

use alloc::string::String;
use alloc::vec::Vec;

use crate::data::SurveyDataset;
use crate::error::{Error, Result};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentFunction {
    Linear,
    Sigmoid,
    Relu,
    Softplus,
}

impl LatentFunction {
    /// Applies the function to the inner linear index `z`.
    pub fn apply(self, z: f64) -> f64 {
        match self {
            LatentFunction::Linear => z,
            LatentFunction::Sigmoid => math::sigmoid(z),
            LatentFunction::Relu => z.max(0.0),
            LatentFunction::Softplus => math::softplus(z),
        }
    }

    /// Derivative with respect to `z`. The rectifier uses subgradient 0 at
    /// its kink.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            LatentFunction::Linear => 1.0,
            LatentFunction::Sigmoid => {
                let s = math::sigmoid(z);
                s * (1.0 - s)
            }
            LatentFunction::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            LatentFunction::Softplus => math::sigmoid(z),
        }
    }
}

/// Declares one latent variable: its function family, which generic
/// covariates feed it, the loadings on those inputs, an intercept, and the
/// disturbance scale (0 = deterministic).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSpec {
    pub name: String,
    pub function: LatentFunction,
    /// Indices into the catalog's generic variables.
    pub inputs: Vec<usize>,
    pub loadings: Vec<f64>,
    pub intercept: f64,
    pub noise_std: f64,
}

impl LatentSpec {
    pub fn new(
        name: String,
        function: LatentFunction,
        inputs: Vec<usize>,
        loadings: Vec<f64>,
        intercept: f64,
        noise_std: f64,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidSpec(alloc::format!("latent `{name}` has no inputs")));
        }
        if loadings.len() != inputs.len() {
            return Err(Error::DimensionMismatch {
                context: "latent loadings",
                expected: inputs.len(),
                actual: loadings.len(),
            });
        }
        if noise_std < 0.0 {
            return Err(Error::InvalidSpec(alloc::format!("latent `{name}` has negative noise_std")));
        }
        Ok(LatentSpec { name, function, inputs, loadings, intercept, noise_std })
    }

    /// Inner linear index `z = loadings . inputs + intercept (+ noise)`.
    pub fn linear_index(&self, generic: &[f64], noise_draw: Option<f64>) -> Result<f64> {
        let mut z = self.intercept;
        for (k, &m) in self.inputs.iter().enumerate() {
            let x = *generic.get(m).ok_or_else(|| {
                Error::UnknownVariable(alloc::format!("generic index {m} missing for `{}`", self.name))
            })?;
            z += self.loadings[k] * x;
        }
        if let Some(noise) = noise_draw {
            z += noise * self.noise_std;
        }
        Ok(z)
    }
}

/// Evaluates one latent for one row. `noise_draw` is a standard-normal
/// draw scaled by `noise_std`; pass `None` for the deterministic value.
pub fn eval_latent(spec: &LatentSpec, generic: &[f64], noise_draw: Option<f64>) -> Result<f64> {
    Ok(spec.function.apply(spec.linear_index(generic, noise_draw)?))
}

/// Evaluates one latent over every dataset row. With `noise_std > 0` each
/// row draws from its own stream, so the value for row `i` depends only on
/// `(seed, i)`.
pub fn eval_latent_batch(spec: &LatentSpec, dataset: &SurveyDataset, seed: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dataset.n_rows());
    for (i, row) in dataset.rows.iter().enumerate() {
        let noise = if spec.noise_std > 0.0 {
            let mut rng = rng::stream_rng(seed, i as u64);
            Some(rng::standard_normal(&mut rng))
        } else {
            None
        };
        out.push(eval_latent(spec, &row.generic, noise)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ObservationRow, SurveyDataset, VariableCatalog};
    use crate::linalg::Mat;
    use alloc::vec;

    fn spec(function: LatentFunction, noise_std: f64) -> LatentSpec {
        LatentSpec::new(
            "attitude".into(),
            function,
            vec![0, 1],
            vec![0.5, -1.0],
            0.2,
            noise_std,
        )
        .unwrap()
    }

    #[test]
    fn anchor_values() {
        // z = 0.5*1 - 1*1 + 0.2 = -0.3
        let linear = eval_latent(&spec(LatentFunction::Linear, 0.0), &[1.0, 1.0], None).unwrap();
        assert!((linear + 0.3).abs() < 1e-15);
        // sigmoid(0) = 0.5 with inputs that zero the index
        let s = LatentSpec::new("s".into(), LatentFunction::Sigmoid, vec![0], vec![1.0], 0.0, 0.0)
            .unwrap();
        assert_eq!(eval_latent(&s, &[0.0], None).unwrap(), 0.5);
        let r = LatentSpec::new("r".into(), LatentFunction::Relu, vec![0], vec![-3.0], 0.0, 0.0)
            .unwrap();
        assert_eq!(eval_latent(&r, &[1.0], None).unwrap(), 0.0);
        let sp = LatentSpec::new("sp".into(), LatentFunction::Softplus, vec![0], vec![1.0], 0.0, 0.0)
            .unwrap();
        assert!((eval_latent(&sp, &[0.0], None).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn missing_input_is_an_error() {
        let s = spec(LatentFunction::Linear, 0.0);
        assert!(eval_latent(&s, &[1.0], None).is_err());
    }

    #[test]
    fn functions_are_nondecreasing() {
        for f in [
            LatentFunction::Linear,
            LatentFunction::Sigmoid,
            LatentFunction::Relu,
            LatentFunction::Softplus,
        ] {
            let mut prev = f.apply(-10.0);
            let mut z = -10.0;
            while z <= 10.0 {
                let v = f.apply(z);
                assert!(v >= prev - 1e-15, "{f:?} decreased at {z}");
                prev = v;
                z += 0.25;
            }
        }
    }

    #[test]
    fn sigmoid_stays_in_open_unit_interval() {
        for &z in &[-700.0, -30.0, 0.0, 30.0, 700.0] {
            let v = LatentFunction::Sigmoid.apply(z);
            assert!(v >= 0.0 && v <= 1.0);
        }
        assert!(LatentFunction::Sigmoid.apply(-30.0) > 0.0);
        assert!(LatentFunction::Sigmoid.apply(30.0) < 1.0);
    }

    fn tiny_dataset(n: usize) -> SurveyDataset {
        let catalog = VariableCatalog::new(
            vec!["a".into(), "b".into()],
            "b",
            vec![],
            vec!["g0".into(), "g1".into()],
            vec![],
        )
        .unwrap();
        let rows = (0..n)
            .map(|_| {
                ObservationRow::new(
                    Mat::zeros(2, 0),
                    vec![1.0, 1.0],
                    0,
                    vec![true, true],
                    None,
                )
                .unwrap()
            })
            .collect();
        SurveyDataset::new(catalog, rows, vec![]).unwrap()
    }

    #[test]
    fn batch_without_noise_matches_rowwise_eval() {
        let ds = tiny_dataset(4);
        let s = spec(LatentFunction::Softplus, 0.0);
        let batch = eval_latent_batch(&s, &ds, 9).unwrap();
        for (i, row) in ds.rows.iter().enumerate() {
            assert_eq!(batch[i], eval_latent(&s, &row.generic, None).unwrap());
        }
    }

    #[test]
    fn batch_is_seed_deterministic() {
        let ds = tiny_dataset(6);
        let s = spec(LatentFunction::Linear, 0.7);
        let a = eval_latent_batch(&s, &ds, 11).unwrap();
        let b = eval_latent_batch(&s, &ds, 11).unwrap();
        let c = eval_latent_batch(&s, &ds, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_is_centered_on_deterministic_value() {
        let n = 100_000;
        let ds = tiny_dataset(n);
        let noise_std = 0.5;
        let s = spec(LatentFunction::Linear, noise_std);
        let deterministic = eval_latent(&s, &[1.0, 1.0], None).unwrap();
        let vals = eval_latent_batch(&s, &ds, 3).unwrap();
        let mean: f64 = vals.iter().sum::<f64>() / n as f64;
        let bound = 3.0 * noise_std / (n as f64).sqrt();
        assert!((mean - deterministic).abs() < bound, "mean {mean} vs {deterministic}");
    }
}
