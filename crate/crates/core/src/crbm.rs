//! Conditional Restricted Boltzmann Machine over (one-hot choice, binary
//! latent vector), conditioned on observed covariates.
//!
//! The energy of a joint state is
//!
//! ```text
//! E(y, x*, x) = - sum_i y_i c_i  - sum_j x*_j c_j  - sum_ij x*_j D_ij y_i
//!               - sum_i y_i (B_i . attr_i)         - sum_jm x*_j G_jm x_m
//! ```
//!
//! so lower energy means higher probability. Latents are conditionally
//! independent given the visible side, which gives closed-form conditionals
//! and the free energy `F(y) = -c_y - B_y.attr_y - sum_j ln(1 + e^{a_j(y)})`.
//! Training is contrastive divergence over mini-batches; an exact
//! enumeration path (small latent counts) provides the likelihood oracle.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{ObservationRow, SurveyDataset, VariableCatalog};
use crate::error::{Error, Result};
use crate::linalg::{dot, inf_norm, Mat};
use crate::math;
use crate::rng::stream_rng;

/// Largest latent count for which `2^J` enumeration is allowed.
pub const ENUMERATION_GUARD: usize = 20;

/// Shape of a C-RBM parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrbmDims {
    pub n_alts: usize,
    pub n_latents: usize,
    pub n_alt_vars: usize,
    pub n_generic: usize,
}

impl CrbmDims {
    pub fn from_catalog(catalog: &VariableCatalog, n_latents: usize) -> Self {
        CrbmDims {
            n_alts: catalog.n_alternatives(),
            n_latents,
            n_alt_vars: catalog.n_alt_vars(),
            n_generic: catalog.n_generic(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_alts
            + self.n_latents
            + self.n_alts * self.n_latents
            + self.n_alts * self.n_alt_vars
            + self.n_latents * self.n_generic
    }
}

/// How the generic-covariate term enters the energy. `Bilinear` couples it
/// with the latent state (`x*_j G_jm x_m`); `Constant` keeps the literal
/// latent-free reading (`G_jm x_m`), which is constant in the state and
/// therefore drops out of every conditional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GenericTerm {
    #[default]
    Bilinear,
    Constant,
}

/// C-RBM parameters with a per-coordinate frozen mask.
///
/// Packed layout: `alt_bias | latent_bias | latent_choice (row-major, alts x
/// latents) | alt_input (alts x alt_vars) | generic_latent (latents x
/// generic)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbmParams {
    /// Per-alternative bias `c_i`.
    pub alt_bias: Vec<f64>,
    /// Per-latent bias `c_j`.
    pub latent_bias: Vec<f64>,
    /// Latent-choice coupling `D_ij`, `[alternative x latent]`.
    pub latent_choice: Mat,
    /// Conditional weights on each alternative's own attributes, `B_i`.
    pub alt_input: Mat,
    /// Conditional weights from generic covariates to latents, `G_jm`.
    pub generic_latent: Mat,
    pub fixed: Vec<bool>,
    pub generic_term: GenericTerm,
}

impl CrbmParams {
    pub fn zeros(dims: CrbmDims) -> Self {
        CrbmParams {
            alt_bias: vec![0.0; dims.n_alts],
            latent_bias: vec![0.0; dims.n_latents],
            latent_choice: Mat::zeros(dims.n_alts, dims.n_latents),
            alt_input: Mat::zeros(dims.n_alts, dims.n_alt_vars),
            generic_latent: Mat::zeros(dims.n_latents, dims.n_generic),
            fixed: vec![false; dims.n_params()],
            generic_term: GenericTerm::Bilinear,
        }
    }

    /// Weights drawn `Normal(0, std)`, biases zero.
    pub fn random_init(dims: CrbmDims, std: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut p = Self::zeros(dims);
        for w in p.latent_choice.as_mut_slice() {
            *w = crate::rng::standard_normal(rng) * std;
        }
        for w in p.alt_input.as_mut_slice() {
            *w = crate::rng::standard_normal(rng) * std;
        }
        for w in p.generic_latent.as_mut_slice() {
            *w = crate::rng::standard_normal(rng) * std;
        }
        p
    }

    /// Fixes the reference alternative's bias at zero and one row of the
    /// generic-latent matrix (the last latent's) at zero for
    /// identifiability.
    pub fn apply_identification(&mut self, reference: usize) {
        let dims = self.dims();
        self.alt_bias[reference] = 0.0;
        self.fixed[reference] = true;
        if dims.n_latents > 0 && dims.n_generic > 0 {
            let zero_row = dims.n_latents - 1;
            let base = dims.n_alts
                + dims.n_latents
                + dims.n_alts * dims.n_latents
                + dims.n_alts * dims.n_alt_vars
                + zero_row * dims.n_generic;
            for m in 0..dims.n_generic {
                self.generic_latent[(zero_row, m)] = 0.0;
                self.fixed[base + m] = true;
            }
        }
    }

    pub fn dims(&self) -> CrbmDims {
        CrbmDims {
            n_alts: self.alt_bias.len(),
            n_latents: self.latent_bias.len(),
            n_alt_vars: self.alt_input.cols(),
            n_generic: self.generic_latent.cols(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.dims().n_params()
    }

    pub fn n_free(&self) -> usize {
        self.fixed.iter().filter(|&&f| !f).count()
    }

    pub fn pack(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.alt_bias);
        out.extend_from_slice(&self.latent_bias);
        out.extend_from_slice(self.latent_choice.as_slice());
        out.extend_from_slice(self.alt_input.as_slice());
        out.extend_from_slice(self.generic_latent.as_slice());
        out
    }

    pub fn unpack(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut at = 0;
        let mut take = |len: usize| {
            let slice = &flat[at..at + len];
            at += len;
            slice
        };
        let n = self.alt_bias.len();
        self.alt_bias.copy_from_slice(take(n));
        let n = self.latent_bias.len();
        self.latent_bias.copy_from_slice(take(n));
        let n = self.latent_choice.as_slice().len();
        self.latent_choice.as_mut_slice().copy_from_slice(take(n));
        let n = self.alt_input.as_slice().len();
        self.alt_input.as_mut_slice().copy_from_slice(take(n));
        let n = self.generic_latent.as_slice().len();
        self.generic_latent.as_mut_slice().copy_from_slice(take(n));
    }

    pub fn with_packed(&self, flat: &[f64]) -> Self {
        let mut p = self.clone();
        p.unpack(flat);
        p
    }

    pub fn param_names(&self, catalog: &VariableCatalog) -> Vec<String> {
        let dims = self.dims();
        let mut names = Vec::with_capacity(dims.n_params());
        for alt in &catalog.alternatives {
            names.push(format!("c_{alt}"));
        }
        for j in 0..dims.n_latents {
            names.push(format!("c_z{j}"));
        }
        for alt in &catalog.alternatives {
            for j in 0..dims.n_latents {
                names.push(format!("D_{alt}:z{j}"));
            }
        }
        for alt in &catalog.alternatives {
            for var in &catalog.alt_specific_vars {
                names.push(format!("B_{alt}:{var}"));
            }
        }
        for j in 0..dims.n_latents {
            for var in &catalog.generic_vars {
                names.push(format!("G_z{j}:{var}"));
            }
        }
        names
    }

    fn check_row(&self, row: &ObservationRow) -> Result<()> {
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
        Ok(())
    }

    /// Latent pre-activation `a_j(y) = D_yj + G_j.x + c_j`.
    fn latent_activation(&self, y: usize, row: &ObservationRow, j: usize) -> f64 {
        let mut a = self.latent_bias[j] + self.latent_choice[(y, j)];
        if self.generic_term == GenericTerm::Bilinear {
            a += dot(self.generic_latent.row(j), &row.generic);
        }
        a
    }

    /// Visible-side bias of alternative `i`: `c_i + B_i.attr_i`.
    fn visible_bias(&self, i: usize, row: &ObservationRow) -> f64 {
        self.alt_bias[i] + dot(self.alt_input.row(i), row.alt_attributes.row(i))
    }

    /// Energy term that does not depend on the joint state (only present in
    /// the `Constant` generic-term reading).
    fn state_free_energy_offset(&self, row: &ObservationRow) -> f64 {
        match self.generic_term {
            GenericTerm::Bilinear => 0.0,
            GenericTerm::Constant => {
                let mut acc = 0.0;
                for j in 0..self.latent_bias.len() {
                    acc += dot(self.generic_latent.row(j), &row.generic);
                }
                -acc
            }
        }
    }
}

/// State of the Gibbs chain: one-hot choice (stored as the hot index) and
/// binary latents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GibbsState {
    pub y: usize,
    pub xstar: Vec<bool>,
    pub step: usize,
}

/// Energy of a joint state. All terms enter negatively, so lower energy
/// means higher probability.
pub fn energy(y: usize, xstar: &[bool], row: &ObservationRow, params: &CrbmParams) -> Result<f64> {
    params.check_row(row)?;
    let dims = params.dims();
    if xstar.len() != dims.n_latents {
        return Err(Error::DimensionMismatch {
            context: "latent state",
            expected: dims.n_latents,
            actual: xstar.len(),
        });
    }
    let mut e = -params.visible_bias(y, row);
    for (j, &on) in xstar.iter().enumerate() {
        if !on {
            continue;
        }
        e -= params.latent_bias[j] + params.latent_choice[(y, j)];
        if params.generic_term == GenericTerm::Bilinear {
            e -= dot(params.generic_latent.row(j), &row.generic);
        }
    }
    e += params.state_free_energy_offset(row);
    Ok(e)
}

/// Closed-form free energy: `e^{-F(y)} = sum over x* of e^{-E(y, x*, x)}`.
pub fn free_energy(y: usize, row: &ObservationRow, params: &CrbmParams) -> Result<f64> {
    params.check_row(row)?;
    let mut f = -params.visible_bias(y, row);
    for j in 0..params.latent_bias.len() {
        f -= math::softplus(params.latent_activation(y, row, j));
    }
    f += params.state_free_energy_offset(row);
    Ok(f)
}

/// `p(x*_j = 1 | y, x)` for every latent; independent across latents.
pub fn p_latent_given_visible(y: usize, row: &ObservationRow, params: &CrbmParams) -> Result<Vec<f64>> {
    params.check_row(row)?;
    Ok((0..params.latent_bias.len())
        .map(|j| math::sigmoid(params.latent_activation(y, row, j)))
        .collect())
}

/// Choice distribution given a mean-field latent vector (entries in [0,1]).
pub fn p_choice_given_latent_mean(
    latent: &[f64],
    row: &ObservationRow,
    params: &CrbmParams,
) -> Result<Vec<f64>> {
    params.check_row(row)?;
    let dims = params.dims();
    if latent.len() != dims.n_latents {
        return Err(Error::DimensionMismatch {
            context: "latent state",
            expected: dims.n_latents,
            actual: latent.len(),
        });
    }
    let scores: Vec<f64> = (0..dims.n_alts)
        .map(|i| params.visible_bias(i, row) + dot(params.latent_choice.row(i), latent))
        .collect();
    math::softmax_masked(&scores, &row.availability).ok_or(Error::NoAvailableAlternative)
}

/// `p(y | x*, x)` over available alternatives for a binary latent state.
pub fn p_choice_given_latent(
    xstar: &[bool],
    row: &ObservationRow,
    params: &CrbmParams,
) -> Result<Vec<f64>> {
    let latent: Vec<f64> = xstar.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    p_choice_given_latent_mean(&latent, row, params)
}

/// Runs `k` sweeps of the blocked Gibbs sampler starting from choice
/// `start_y`: sample `x* ~ p(x*|y,x)`, then `y ~ p(y|x*,x)`.
pub fn gibbs_chain(
    row: &ObservationRow,
    params: &CrbmParams,
    start_y: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GibbsState> {
    params.check_row(row)?;
    let dims = params.dims();
    let mut y = start_y;
    let mut xstar = vec![false; dims.n_latents];
    for _ in 0..k {
        let probs = p_latent_given_visible(y, row, params)?;
        for (j, &p) in probs.iter().enumerate() {
            xstar[j] = rng.random::<f64>() < p;
        }
        let choice_probs = p_choice_given_latent(&xstar, row, params)?;
        y = sample_categorical(&choice_probs, rng);
    }
    Ok(GibbsState { y, xstar, step: k })
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Averaged CD-k gradient estimate over `rows`, in the packed layout.
///
/// The positive phase pairs the observed choice with its mean-field latent
/// probabilities; the negative phase pairs the chain-end choice with its
/// own. Each row draws from the stream `(seed, round, row)`, so the
/// estimate does not depend on how rows are batched.
pub fn cd_gradient(
    dataset: &SurveyDataset,
    rows: &[usize],
    params: &CrbmParams,
    cd_steps: usize,
    seed: u64,
    round: u64,
) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; params.n_params()];
    for &r in rows {
        let row = &dataset.rows[r];
        let mut rng = stream_rng(seed, round.wrapping_mul(0x1_0000_0000).wrapping_add(r as u64));
        let state = gibbs_chain(row, params, row.choice, cd_steps, &mut rng)?;
        accumulate_phase_difference(&mut grad, params, row, row.choice, state.y)?;
    }
    let scale = 1.0 / rows.len().max(1) as f64;
    for (g, &fix) in grad.iter_mut().zip(params.fixed.iter()) {
        *g = if fix { 0.0 } else { *g * scale };
    }
    Ok(grad)
}

/// Adds `stats(y_pos) - stats(y_neg)` to `grad`, where the latent side uses
/// the mean-field probabilities of each phase's choice.
fn accumulate_phase_difference(
    grad: &mut [f64],
    params: &CrbmParams,
    row: &ObservationRow,
    y_pos: usize,
    y_neg: usize,
) -> Result<()> {
    let mu_pos = p_latent_given_visible(y_pos, row, params)?;
    let mu_neg = p_latent_given_visible(y_neg, row, params)?;
    accumulate_weighted_stats(grad, params, row, y_pos, &mu_pos, 1.0);
    accumulate_weighted_stats(grad, params, row, y_neg, &mu_neg, -1.0);
    Ok(())
}

/// Sufficient statistics of a (choice, mean-field latent) pair, scaled by
/// `w`, added into the packed gradient layout.
fn accumulate_weighted_stats(
    grad: &mut [f64],
    params: &CrbmParams,
    row: &ObservationRow,
    y: usize,
    mu: &[f64],
    w: f64,
) {
    let dims = params.dims();
    let latent_bias_base = dims.n_alts;
    let d_base = latent_bias_base + dims.n_latents;
    let b_base = d_base + dims.n_alts * dims.n_latents;
    let g_base = b_base + dims.n_alts * dims.n_alt_vars;

    grad[y] += w;
    for (j, &m) in mu.iter().enumerate() {
        grad[latent_bias_base + j] += w * m;
        grad[d_base + y * dims.n_latents + j] += w * m;
    }
    for a in 0..dims.n_alt_vars {
        grad[b_base + y * dims.n_alt_vars + a] += w * row.alt_attributes[(y, a)];
    }
    if params.generic_term == GenericTerm::Bilinear {
        for (j, &m) in mu.iter().enumerate() {
            for (mm, &x) in row.generic.iter().enumerate() {
                grad[g_base + j * dims.n_generic + mm] += w * m * x;
            }
        }
    }
}

/// Exact marginal log-likelihood `sum_rows ln p(y_row | x_row)` where the
/// choice normalizer runs over the row's available alternatives. Guarded to
/// small latent counts.
pub fn exact_log_likelihood(dataset: &SurveyDataset, params: &CrbmParams) -> Result<f64> {
    let j = params.dims().n_latents;
    if j > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard { latents: j, guard: ENUMERATION_GUARD });
    }
    let mut ll = 0.0;
    for row in &dataset.rows {
        let mut neg_f = Vec::with_capacity(params.alt_bias.len());
        for (i, &avail) in row.availability.iter().enumerate() {
            if avail {
                neg_f.push(-free_energy(i, row, params)?);
            }
        }
        let log_z = math::logsumexp(&neg_f);
        ll += -free_energy(row.choice, row, params)? - log_z;
    }
    Ok(ll)
}

/// Analytic gradient of [`exact_log_likelihood`] in the packed layout
/// (positive phase minus the exact model expectation over available
/// choices). Fixed entries are zeroed.
pub fn exact_ll_gradient(dataset: &SurveyDataset, params: &CrbmParams) -> Result<Vec<f64>> {
    let j = params.dims().n_latents;
    if j > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard { latents: j, guard: ENUMERATION_GUARD });
    }
    let mut grad = vec![0.0; params.n_params()];
    for row in &dataset.rows {
        let mu_data = p_latent_given_visible(row.choice, row, params)?;
        accumulate_weighted_stats(&mut grad, params, row, row.choice, &mu_data, 1.0);

        // model expectation p(y'|x) over available alternatives
        let mut scores = vec![f64::NEG_INFINITY; params.alt_bias.len()];
        for (i, &avail) in row.availability.iter().enumerate() {
            if avail {
                scores[i] = -free_energy(i, row, params)?;
            }
        }
        let probs = math::softmax_masked(&scores, &row.availability)
            .ok_or(Error::NoAvailableAlternative)?;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                let mu = p_latent_given_visible(i, row, params)?;
                accumulate_weighted_stats(&mut grad, params, row, i, &mu, -p);
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

/// One joint state of the enumerated distribution `p(y, x* | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub y: usize,
    /// Bit `j` set means `x*_j = 1`.
    pub xstar_bits: u32,
    pub prob: f64,
}

/// Enumerates `p(y, x* | x)` from raw energies over available alternatives
/// and all `2^J` latent states. This route never touches the closed-form
/// free energy, so it can serve as its oracle.
pub fn enumerate_joint(row: &ObservationRow, params: &CrbmParams) -> Result<Vec<JointState>> {
    let dims = params.dims();
    if dims.n_latents > ENUMERATION_GUARD {
        return Err(Error::EnumerationGuard { latents: dims.n_latents, guard: ENUMERATION_GUARD });
    }
    let n_states = 1usize << dims.n_latents;
    let mut states = Vec::new();
    let mut neg_energies = Vec::new();
    for (y, &avail) in row.availability.iter().enumerate() {
        if !avail {
            continue;
        }
        for bits in 0..n_states {
            let xstar = xstar_from_bits(bits as u32, dims.n_latents);
            let e = energy(y, &xstar, row, params)?;
            neg_energies.push(-e);
            states.push((y, bits as u32));
        }
    }
    let log_z = math::logsumexp(&neg_energies);
    Ok(states
        .into_iter()
        .zip(neg_energies)
        .map(|((y, xstar_bits), ne)| JointState { y, xstar_bits, prob: math::exp(ne - log_z) })
        .collect())
}

pub fn xstar_from_bits(bits: u32, n_latents: usize) -> Vec<bool> {
    (0..n_latents).map(|j| bits & (1 << j) != 0).collect()
}

/// Per-epoch training trace entry. Wall time is measured by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: usize,
    pub reconstruction_error: f64,
    pub exact_ll: Option<f64>,
    pub grad_inf_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbmTrainConfig {
    pub batch_size: usize,
    pub cd_steps: usize,
    pub learning_rate: f64,
    /// Multiplies the learning rate once per epoch (1 = constant).
    pub lr_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Track the exact log-likelihood per epoch when the latent count
    /// permits enumeration.
    pub track_exact_ll: bool,
    /// Abort when the parameter infinity norm exceeds this bound.
    pub max_param_norm: f64,
}

impl Default for CrbmTrainConfig {
    fn default() -> Self {
        CrbmTrainConfig {
            batch_size: 32,
            cd_steps: 1,
            learning_rate: 0.01,
            lr_decay: 1.0,
            epochs: 100,
            seed: 0,
            track_exact_ll: false,
            max_param_norm: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: CrbmParams,
    pub trace: Vec<TraceRow>,
    /// Epoch at which the divergence guard tripped, if it did.
    pub diverged_at: Option<usize>,
}

/// Mini-batch CD training. Deterministic given `(init, config)`: batch
/// order, Gibbs noise, and reductions all derive from the config seed.
pub fn train(
    dataset: &SurveyDataset,
    init: &CrbmParams,
    config: &CrbmTrainConfig,
) -> Result<TrainOutcome> {
    if config.batch_size == 0 || config.epochs == 0 || config.learning_rate <= 0.0 {
        return Err(Error::InvalidSpec("training config values must be positive".into()));
    }
    let n = dataset.n_rows();
    let mut params = init.clone();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut diverged_at = None;
    let track_ll = config.track_exact_ll && params.dims().n_latents <= ENUMERATION_GUARD;
    let n_batches = n.div_ceil(config.batch_size).max(1);

    let mut lr = config.learning_rate;
    'epochs: for epoch in 0..config.epochs {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng = stream_rng(config.seed, u64::MAX - epoch as u64);
        order.shuffle(&mut shuffle_rng);

        let mut grad_norm_sum = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let round = (epoch * n_batches + b) as u64 + 1;
            let grad = cd_gradient(dataset, batch, &params, config.cd_steps, config.seed, round)?;
            grad_norm_sum += inf_norm(&grad);
            let mut flat = params.pack();
            for (x, g) in flat.iter_mut().zip(grad.iter()) {
                *x += lr * g;
            }
            params.unpack(&flat);
            if inf_norm(&flat) > config.max_param_norm {
                diverged_at = Some(epoch);
                trace.push(trace_row(dataset, &params, epoch, grad_norm_sum / (b + 1) as f64, track_ll)?);
                break 'epochs;
            }
        }
        lr *= config.lr_decay;
        trace.push(trace_row(dataset, &params, epoch, grad_norm_sum / n_batches as f64, track_ll)?);
    }
    Ok(TrainOutcome { params, trace, diverged_at })
}

fn trace_row(
    dataset: &SurveyDataset,
    params: &CrbmParams,
    epoch: usize,
    grad_inf_norm: f64,
    track_ll: bool,
) -> Result<TraceRow> {
    Ok(TraceRow {
        epoch,
        reconstruction_error: reconstruction_error(dataset, params)?,
        exact_ll: if track_ll { Some(exact_log_likelihood(dataset, params)?) } else { None },
        grad_inf_norm,
    })
}

/// Deterministic mean-field reconstruction error: squared distance between
/// the observed one-hot choice and `p(y | mu(y_data), x)`, averaged over
/// rows.
pub fn reconstruction_error(dataset: &SurveyDataset, params: &CrbmParams) -> Result<f64> {
    let mut total = 0.0;
    for row in &dataset.rows {
        let mu = p_latent_given_visible(row.choice, row, params)?;
        let probs = p_choice_given_latent_mean(&mu, row, params)?;
        for (i, &p) in probs.iter().enumerate() {
            let target = if i == row.choice { 1.0 } else { 0.0 };
            total += (target - p) * (target - p);
        }
    }
    Ok(total / dataset.n_rows().max(1) as f64)
}

/// Statistics for one latent unit in the significance report.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStats {
    pub index: usize,
    /// Choice-coupling column `D_{., j}`.
    pub choice_weights: Vec<f64>,
    /// Conditional loadings `G_{j, .}`.
    pub loadings: Vec<f64>,
    pub choice_t: Vec<Option<f64>>,
    pub loading_t: Vec<Option<f64>>,
    pub significant: bool,
    pub duplicate_of: Option<usize>,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentReport {
    pub latents: Vec<LatentStats>,
    pub t_threshold: f64,
    /// Indices of kept latents, in order.
    pub kept: Vec<usize>,
}

/// Latent count above which standard errors switch from the exact-likelihood
/// Hessian to the outer-product (Fisher) approximation built from CD scores.
pub const HESSIAN_GUARD: usize = 12;

/// Scores each latent after training: t-tests on its choice column and
/// loadings, a keep flag (any |t| on the choice column at or above the
/// threshold), and duplicate detection by cosine similarity of stacked
/// `[D column; G row]` vectors.
pub fn extract_significant_latents(
    params: &CrbmParams,
    dataset: &SurveyDataset,
    t_threshold: f64,
) -> Result<LatentReport> {
    let dims = params.dims();
    let packed = params.pack();
    let free: Vec<usize> = (0..packed.len()).filter(|&i| !params.fixed[i]).collect();

    let hessian = if dims.n_latents <= HESSIAN_GUARD {
        let grad_fn = |x: &[f64]| {
            let p = params.with_packed(x);
            exact_ll_gradient(dataset, &p).expect("within enumeration guard")
        };
        crate::stats::hessian_free(grad_fn, &packed, &free)
    } else {
        // Fisher approximation from per-row CD-derived scores.
        cd_fisher_neg_hessian(dataset, params, &free)?
    };
    let errs = crate::stats::std_errors_from_hessian(&hessian);
    let mut se_full: Vec<Option<f64>> = vec![None; packed.len()];
    for (pos, &idx) in free.iter().enumerate() {
        se_full[idx] = errs[pos];
    }

    let d_base = dims.n_alts + dims.n_latents;
    let g_base = d_base + dims.n_alts * dims.n_latents + dims.n_alts * dims.n_alt_vars;

    let mut latents = Vec::with_capacity(dims.n_latents);
    for j in 0..dims.n_latents {
        let choice_weights = params.latent_choice.col(j);
        let loadings = params.generic_latent.row(j).to_vec();
        let choice_t: Vec<Option<f64>> = (0..dims.n_alts)
            .map(|i| {
                let idx = d_base + i * dims.n_latents + j;
                se_full[idx].map(|se| packed[idx] / se)
            })
            .collect();
        let loading_t: Vec<Option<f64>> = (0..dims.n_generic)
            .map(|m| {
                let idx = g_base + j * dims.n_generic + m;
                se_full[idx].map(|se| packed[idx] / se)
            })
            .collect();
        let significant = choice_t.iter().flatten().any(|t| t.abs() >= t_threshold);
        latents.push(LatentStats {
            index: j,
            choice_weights,
            loadings,
            choice_t,
            loading_t,
            significant,
            duplicate_of: None,
            kept: false,
        });
    }

    // duplicate detection over stacked [D column; G row] vectors
    for j2 in 1..dims.n_latents {
        for j1 in 0..j2 {
            if latents[j1].duplicate_of.is_some() {
                continue;
            }
            let a = stacked(&latents[j1]);
            let b = stacked(&latents[j2]);
            if cosine(&a, &b) > 0.99 {
                latents[j2].duplicate_of = Some(j1);
                break;
            }
        }
    }

    let mut kept = Vec::new();
    for l in latents.iter_mut() {
        l.kept = l.significant && l.duplicate_of.is_none();
        if l.kept {
            kept.push(l.index);
        }
    }
    Ok(LatentReport { latents, t_threshold, kept })
}

fn stacked(l: &LatentStats) -> Vec<f64> {
    let mut v = l.choice_weights.clone();
    v.extend_from_slice(&l.loadings);
    v
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = math::sqrt(dot(a, a));
    let nb = math::sqrt(dot(b, b));
    if na < 1e-12 || nb < 1e-12 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Outer-product-of-scores approximation to the negative Hessian, with each
/// row's score estimated by CD. Used for latent counts past the enumeration
/// guard.
fn cd_fisher_neg_hessian(
    dataset: &SurveyDataset,
    params: &CrbmParams,
    free: &[usize],
) -> Result<Mat> {
    let p = free.len();
    let mut fisher = Mat::zeros(p, p);
    for r in 0..dataset.n_rows() {
        let g = cd_gradient(dataset, &[r], params, 5, 0xF15E9, r as u64)?;
        for (a, &i) in free.iter().enumerate() {
            for (b, &j) in free.iter().enumerate() {
                fisher[(a, b)] += g[i] * g[j];
            }
        }
    }
    // Fisher approximates -H of the log-likelihood; return H.
    fisher.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
    Ok(fisher)
}
