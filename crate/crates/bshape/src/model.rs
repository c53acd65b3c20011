//! Dataset representation, data-driven prior construction, variance-model
//! selection and the log posterior density.
//!
//! The observation model for gene `g` at design point `X_k` is
//! `Y_jkg = F_g(X_k) + ε_jkg` with `ε_jkg ~ Normal(μ_g, σ_g²(F_g(X_k)+μ_g)^ξ_g)`
//! and `F_g` a shape-restricted Bernstein curve. Priors are built from crude
//! estimates on the data: the onset lives in `[0, X̂_g]` as a scaled
//! `Beta(φ₁, φ₂)`, the coefficients in `[0, coeff_scale_g]` as i.i.d. scaled
//! `Beta(φ₃, φ₄)`, and the background `μ_g` is uniform on `[0, 2Ȳ_0g]`. The
//! hyperparameters `φ` get uniform hyperpriors on data-derived boxes.

use thiserror::Error;

use crate::bernstein::{basis_eval, validate_shape};
use crate::rngs;
use crate::special::beta_ln_pdf;
use crate::Curve;

/// Base of the plug-in variance and of `Q_kg` is clamped here so that
/// near-zero means in normalized data cannot produce a zero variance.
pub const VAR_FLOOR: f64 = 1e-8;

/// Lower φ bounds are floored here so the hyperprior box never touches
/// nonpositive beta shapes when α − 0.5 ≤ 0 on unusual data.
const PHI_LOWER_FLOOR: f64 = 1e-2;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("design points must be strictly increasing from 0 to 1")]
    BadDesign,
    #[error("gene {0}: replicate block at time index {1} does not match the replicate count")]
    RaggedReplicates(usize, usize),
    #[error("gene {0}: non-finite intensity")]
    NonFinite(usize),
    #[error("gene {0}: variance selection needs at least two replicates per time point")]
    NeedReplicates(usize),
    #[error("beta moment matching infeasible: mean {mean}, variance {variance}")]
    InfeasibleMoments { mean: f64, variance: f64 },
    #[error("every gene is degenerate (no rise above twice the background)")]
    AllDegenerate,
    #[error("hyperprior construction degenerate: onset ratio mean {0} outside (0,1)")]
    DegenerateHyperprior(f64),
}

/// Time-course intensities: `values[g][k][j]` is replicate `j` of gene `g`
/// at design point `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeCourseDataset {
    pub design_points: Vec<f64>,
    pub replicate_counts: Vec<usize>,
    pub values: Vec<Vec<Vec<f64>>>,
    pub gene_ids: Vec<String>,
}

impl TimeCourseDataset {
    pub fn new(
        design_points: Vec<f64>,
        replicate_counts: Vec<usize>,
        values: Vec<Vec<Vec<f64>>>,
        gene_ids: Vec<String>,
    ) -> Result<Self, ModelError> {
        let k = design_points.len();
        if k < 2
            || design_points[0] != 0.0
            || *design_points.last().unwrap() != 1.0
            || design_points.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(ModelError::BadDesign);
        }
        if replicate_counts.len() != k || replicate_counts.contains(&0) {
            return Err(ModelError::BadDesign);
        }
        if values.len() != gene_ids.len() {
            return Err(ModelError::BadDesign);
        }
        for (g, gene) in values.iter().enumerate() {
            if gene.len() != k {
                return Err(ModelError::RaggedReplicates(g, gene.len()));
            }
            for (idx, block) in gene.iter().enumerate() {
                if block.len() != replicate_counts[idx] {
                    return Err(ModelError::RaggedReplicates(g, idx));
                }
                if block.iter().any(|y| !y.is_finite()) {
                    return Err(ModelError::NonFinite(g));
                }
            }
        }
        Ok(Self {
            design_points,
            replicate_counts,
            values,
            gene_ids,
        })
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.design_points.len()
    }

    /// Replicate means Ȳ_kg over `j` for one gene.
    pub fn replicate_means(&self, g: usize) -> Vec<f64> {
        self.values[g]
            .iter()
            .map(|block| block.iter().sum::<f64>() / block.len() as f64)
            .collect()
    }
}

/// Data-derived prior geometry for one gene.
#[derive(Debug, Clone, PartialEq)]
pub struct GenePriorSpec {
    /// index into the original dataset gene list
    pub gene_index: usize,
    /// X̂_g: the onset prior lives on [0, onset_scale]
    pub onset_scale: f64,
    /// k(g): one past the last sub-background mean before the peak
    pub onset_floor_index: usize,
    /// k̃(g): index of the largest replicate mean
    pub peak_index: usize,
    /// coefficients live on [0, coeff_scale]: twice the largest replicate
    /// at the peak-mean time point
    pub coeff_scale: f64,
    /// background prior is Uniform(0, mu_bound) with mu_bound = 2Ȳ_0g
    pub mu_bound: f64,
    /// X̃_g = X_{k(g)}
    pub xtilde: f64,
}

pub type PhiBounds = [(f64, f64); 4];

/// Prior geometry for all genes plus the hyperprior box.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpecs {
    pub genes: Vec<GenePriorSpec>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub phi_bounds: PhiBounds,
    /// original indices of genes excluded as degenerate (no rise above twice
    /// the background)
    pub degenerate: Vec<usize>,
}

/// Match a Beta(α, β) to a given mean and variance.
pub fn beta_moment_match(mean: f64, variance: f64) -> Result<(f64, f64), ModelError> {
    // the negated comparisons also reject NaN inputs
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(mean > 0.0 && mean < 1.0) || !(variance > 0.0) || variance >= mean * (1.0 - mean) {
        return Err(ModelError::InfeasibleMoments { mean, variance });
    }
    let kappa = mean * (1.0 - mean) / variance - 1.0;
    Ok((mean * kappa, (1.0 - mean) * kappa))
}

/// Construct the per-gene prior geometry and the hyperprior box from crude
/// estimates on the data.
pub fn build_prior_specs(ds: &TimeCourseDataset) -> Result<PriorSpecs, ModelError> {
    let mut genes = Vec::new();
    let mut degenerate = Vec::new();
    for g in 0..ds.n_genes() {
        let ybar = ds.replicate_means(g);
        let ybar0 = ybar[0];
        if ybar0 <= 0.0 {
            degenerate.push(g);
            continue;
        }
        // peak index: largest mean, smallest index on ties
        let peak_index = ybar
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |best, (idx, &v)| {
                if v > best.1 {
                    (idx, v)
                } else {
                    best
                }
            })
            .0;
        if ybar[peak_index] <= 2.0 * ybar0 {
            degenerate.push(g);
            continue;
        }
        let onset_floor_index = (0..=peak_index)
            .filter(|&k| ybar[k] <= 2.0 * ybar0)
            .max()
            .expect("index 0 always qualifies")
            + 1;
        // midpoint of k(g) and k̃(g), rounded up to an integer index
        let mid = (onset_floor_index + peak_index).div_ceil(2);
        let coeff_scale = 2.0
            * ds.values[g][peak_index]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
        genes.push(GenePriorSpec {
            gene_index: g,
            onset_scale: ds.design_points[mid],
            onset_floor_index,
            peak_index,
            coeff_scale,
            mu_bound: 2.0 * ybar0,
            xtilde: ds.design_points[onset_floor_index],
        });
    }
    if genes.is_empty() {
        return Err(ModelError::AllDegenerate);
    }

    let ratios: Vec<f64> = genes.iter().map(|s| s.xtilde / s.onset_scale).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(mean > 0.0 && mean < 1.0) {
        return Err(ModelError::DegenerateHyperprior(mean));
    }
    let variance = if spread < 1e-8 {
        // identical ratios across genes (synthetic data): substitute a mild
        // spread instead of an infeasible zero variance
        mean * (1.0 - mean) / 100.0
    } else {
        (spread / 4.0).powi(2)
    };
    let (alpha1, alpha2) = beta_moment_match(mean, variance)?;
    let phi_bounds = [
        ((alpha1 - 0.5).max(PHI_LOWER_FLOOR), alpha1 + 0.5),
        ((alpha2 - 0.5).max(PHI_LOWER_FLOOR), alpha2 + 0.5),
        (0.5, 1.5),
        (0.5, 1.5),
    ];
    Ok(PriorSpecs {
        genes,
        alpha1,
        alpha2,
        phi_bounds,
        degenerate,
    })
}

/// Unbiased per-time-point replicate variances σ̃²_kg for one gene.
pub fn replicate_variances(ds: &TimeCourseDataset, g: usize) -> Result<Vec<f64>, ModelError> {
    let mut out = Vec::with_capacity(ds.n_times());
    for block in &ds.values[g] {
        if block.len() < 2 {
            return Err(ModelError::NeedReplicates(g));
        }
        let mean = block.iter().sum::<f64>() / block.len() as f64;
        let ss: f64 = block.iter().map(|y| (y - mean).powi(2)).sum();
        out.push(ss / (block.len() - 1) as f64);
    }
    Ok(out)
}

/// Pick the variance exponent ξ_g ∈ {0, 1, 2} minimizing the spread of
/// `Q_kg = σ̃²_kg / Ȳ_kg^ξ`, and return it with the plug-in scale
/// `σ̂_g² = mean_k Q_kg` at the chosen exponent. Ties break to the
/// smaller exponent.
pub fn select_variance_exponent(
    ds: &TimeCourseDataset,
    g: usize,
) -> Result<(u8, f64), ModelError> {
    let tilde = replicate_variances(ds, g)?;
    let ybar = ds.replicate_means(g);
    let kk = (ds.n_times() - 1) as f64;
    let mut best: Option<(u8, f64, f64)> = None;
    for xi in 0u8..=2 {
        let q: Vec<f64> = tilde
            .iter()
            .zip(&ybar)
            .map(|(&v, &m)| v / m.max(VAR_FLOOR).powi(xi as i32))
            .collect();
        let qbar = q.iter().sum::<f64>() / q.len() as f64;
        let spread = q.iter().map(|x| (x - qbar).powi(2)).sum::<f64>() / kk;
        if best.is_none_or(|(_, s, _)| spread < s) {
            best = Some((xi, spread, qbar));
        }
    }
    let (xi, _, sigma2) = best.unwrap();
    // constant data has zero replicate variance everywhere; keep the
    // invariant σ² > 0 without changing the selected exponent
    Ok((xi, sigma2.max(1e-300)))
}

/// Per-gene variance structure used by the likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceModel {
    pub xi: Vec<u8>,
    pub sigma2: Vec<f64>,
    pub replicate_var: Vec<Vec<f64>>,
}

/// Shared hyperparameters φ = (φ₁, φ₂, φ₃, φ₄).
pub type HyperParams = [f64; 4];

/// Per-gene parameters: onset, Bernstein coefficients b₂..b_n, background.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneState {
    pub onset: f64,
    pub coeffs: Vec<f64>,
    pub background: f64,
}

impl GeneState {
    pub fn curve(&self) -> Curve {
        Curve::new(self.onset, self.coeffs.clone()).expect("gene state holds a valid curve")
    }
}

/// One point in the posterior's support.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub phi: HyperParams,
    pub genes: Vec<GeneState>,
    pub order: usize,
}

/// Sufficient statistics of one gene's observations: per design point the
/// replicate count, sum and sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneSummary {
    pub counts: Vec<usize>,
    pub sums: Vec<f64>,
    pub sumsqs: Vec<f64>,
}

impl GeneSummary {
    fn from_blocks(blocks: &[Vec<f64>]) -> Self {
        GeneSummary {
            counts: blocks.iter().map(Vec::len).collect(),
            sums: blocks.iter().map(|b| b.iter().sum()).collect(),
            sumsqs: blocks
                .iter()
                .map(|b| b.iter().map(|y| y * y).sum())
                .collect(),
        }
    }

    fn empty(n_times: usize) -> Self {
        GeneSummary {
            counts: vec![0; n_times],
            sums: vec![0.0; n_times],
            sumsqs: vec![0.0; n_times],
        }
    }
}

/// The fitted model: design, per-gene data summaries, prior geometry,
/// variance structure and the hyperprior box. Genes flagged degenerate by
/// [`build_prior_specs`] are not part of the model; `gene_ids` maps model
/// gene slots back to dataset identifiers.
#[derive(Debug, Clone)]
pub struct Model {
    pub design: Vec<f64>,
    pub summaries: Vec<GeneSummary>,
    pub specs: Vec<GenePriorSpec>,
    pub variance: VarianceModel,
    pub phi_bounds: PhiBounds,
    pub order: usize,
    pub gene_ids: Vec<String>,
    pub degenerate: Vec<usize>,
}

impl Model {
    /// Build the model from a dataset: prior specs, variance selection and
    /// observation summaries. `order` is the shared Bernstein order
    /// (the prior puts mass 1 on it; 15 unless overridden).
    pub fn from_dataset(ds: &TimeCourseDataset, order: usize) -> Result<Self, ModelError> {
        let specs = build_prior_specs(ds)?;
        let mut summaries = Vec::with_capacity(specs.genes.len());
        let mut xi = Vec::new();
        let mut sigma2 = Vec::new();
        let mut replicate_var = Vec::new();
        let mut gene_ids = Vec::new();
        for spec in &specs.genes {
            let g = spec.gene_index;
            summaries.push(GeneSummary::from_blocks(&ds.values[g]));
            let (x, s2) = select_variance_exponent(ds, g)?;
            xi.push(x);
            sigma2.push(s2);
            replicate_var.push(replicate_variances(ds, g)?);
            gene_ids.push(ds.gene_ids[g].clone());
        }
        Ok(Model {
            design: ds.design_points.clone(),
            summaries,
            specs: specs.genes,
            variance: VarianceModel {
                xi,
                sigma2,
                replicate_var,
            },
            phi_bounds: specs.phi_bounds,
            order,
            gene_ids,
            degenerate: specs.degenerate,
        })
    }

    /// A model with no observations: the posterior is the prior. Used for
    /// prior-recovery checks and prior Monte Carlo.
    pub fn prior_only(
        design: Vec<f64>,
        specs: Vec<GenePriorSpec>,
        phi_bounds: PhiBounds,
        order: usize,
    ) -> Self {
        let n_genes = specs.len();
        let n_times = design.len();
        Model {
            design,
            summaries: vec![GeneSummary::empty(n_times); n_genes],
            specs,
            variance: VarianceModel {
                xi: vec![0; n_genes],
                sigma2: vec![1.0; n_genes],
                replicate_var: vec![vec![0.0; n_times]; n_genes],
            },
            phi_bounds,
            order,
            gene_ids: (0..n_genes).map(|g| format!("gene{g}")).collect(),
            degenerate: Vec::new(),
        }
    }

    pub fn n_genes(&self) -> usize {
        self.specs.len()
    }

    pub fn in_support(&self, state: &ModelState) -> bool {
        if state.genes.len() != self.n_genes() {
            return false;
        }
        for (&phi, &(lo, hi)) in state.phi.iter().zip(&self.phi_bounds) {
            if !(lo..=hi).contains(&phi) {
                return false;
            }
        }
        for (gene, spec) in state.genes.iter().zip(&self.specs) {
            if gene.coeffs.len() + 1 != state.order {
                return false;
            }
            if !validate_shape(&gene.coeffs, gene.onset) {
                return false;
            }
            if !(0.0..=spec.onset_scale).contains(&gene.onset) {
                return false;
            }
            if gene.coeffs.iter().any(|&b| b > spec.coeff_scale) {
                return false;
            }
            if !(0.0..=spec.mu_bound).contains(&gene.background) {
                return false;
            }
        }
        true
    }

    /// log π_g(c, b, μ | φ) for one gene.
    pub fn gene_log_prior(&self, g: usize, gene: &GeneState, phi: &HyperParams) -> f64 {
        let spec = &self.specs[g];
        let mut lp =
            beta_ln_pdf(gene.onset / spec.onset_scale, phi[0], phi[1]) - spec.onset_scale.ln();
        for &b in &gene.coeffs {
            lp += beta_ln_pdf(b / spec.coeff_scale, phi[2], phi[3]) - spec.coeff_scale.ln();
        }
        lp - spec.mu_bound.ln()
    }

    /// Curve values F_g(X_k) at the design points.
    pub fn curve_at_design(&self, gene: &GeneState) -> Vec<f64> {
        let curve = gene.curve();
        self.design.iter().map(|&x| curve.eval(x)).collect()
    }

    /// Gene log likelihood with the plug-in variance taken from a possibly
    /// different state `(var_f, var_mu)` — the sampler evaluates both sides
    /// of an acceptance ratio under the variance of the current state.
    #[allow(clippy::needless_range_loop)] // several parallel arrays share k
    pub fn gene_loglik_from(
        &self,
        g: usize,
        f: &[f64],
        mu: f64,
        var_f: &[f64],
        var_mu: f64,
    ) -> f64 {
        let s = &self.summaries[g];
        let xi = self.variance.xi[g];
        let sigma2 = self.variance.sigma2[g];
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let mut ll = 0.0;
        if xi == 0 {
            // homoscedastic: hoist the constant log-variance term
            let inv2 = 0.5 / sigma2;
            let mut total_m = 0usize;
            for k in 0..self.design.len() {
                let mk = s.counts[k];
                if mk == 0 {
                    continue;
                }
                total_m += mk;
                let mean = f[k] + mu;
                let quad = s.sumsqs[k] - 2.0 * mean * s.sums[k] + mk as f64 * mean * mean;
                ll -= quad * inv2;
            }
            ll -= 0.5 * total_m as f64 * (ln2pi + sigma2.ln());
        } else {
            for k in 0..self.design.len() {
                let mk = s.counts[k];
                if mk == 0 {
                    continue;
                }
                let var = sigma2 * plugin_base(var_f[k] + var_mu, xi);
                let mean = f[k] + mu;
                let quad = s.sumsqs[k] - 2.0 * mean * s.sums[k] + mk as f64 * mean * mean;
                ll += -0.5 * mk as f64 * (ln2pi + var.ln()) - 0.5 * quad / var;
            }
        }
        ll
    }

    /// Gene log likelihood with the variance evaluated at the same state.
    pub fn gene_loglik(&self, g: usize, gene: &GeneState) -> f64 {
        let f = self.curve_at_design(gene);
        self.gene_loglik_from(g, &f, gene.background, &f, gene.background)
    }

    /// log of the joint posterior density (up to the normalizing constant):
    /// likelihood, per-gene priors, and the constant hyperprior over its
    /// box. −∞ outside the support.
    pub fn log_posterior(&self, state: &ModelState) -> f64 {
        if !self.in_support(state) {
            return f64::NEG_INFINITY;
        }
        let mut lp = self.log_hyperprior();
        for (g, gene) in state.genes.iter().enumerate() {
            lp += self.gene_log_prior(g, gene, &state.phi);
            lp += self.gene_loglik(g, gene);
        }
        lp
    }

    /// log ψ(φ): the product of reciprocal box widths (constant on the box).
    pub fn log_hyperprior(&self) -> f64 {
        -self
            .phi_bounds
            .iter()
            .map(|(lo, hi)| (hi - lo).ln())
            .sum::<f64>()
    }

    /// Draw a state from the full hierarchical prior.
    pub fn sample_prior<R: rand::Rng>(&self, rng: &mut R) -> ModelState {
        let phi = [
            rngs::uniform(rng, self.phi_bounds[0].0, self.phi_bounds[0].1),
            rngs::uniform(rng, self.phi_bounds[1].0, self.phi_bounds[1].1),
            rngs::uniform(rng, self.phi_bounds[2].0, self.phi_bounds[2].1),
            rngs::uniform(rng, self.phi_bounds[3].0, self.phi_bounds[3].1),
        ];
        let genes = self
            .specs
            .iter()
            .map(|spec| loop {
                let onset = spec.onset_scale * rngs::beta(rng, phi[0], phi[1]);
                let coeffs: Vec<f64> = (0..self.order - 1)
                    .map(|_| spec.coeff_scale * rngs::beta(rng, phi[2], phi[3]))
                    .collect();
                let background = rngs::uniform(rng, 0.0, spec.mu_bound);
                // a.s. valid; redraw on the measure-zero failure anyway
                if validate_shape(&coeffs, onset) {
                    break GeneState {
                        onset,
                        coeffs,
                        background,
                    };
                }
            })
            .collect();
        ModelState {
            phi,
            genes,
            order: self.order,
        }
    }
}

/// The heteroscedastic base `(F+μ)^ξ`, clamped away from zero.
pub fn plugin_base(mean: f64, xi: u8) -> f64 {
    match xi {
        0 => 1.0,
        1 => mean.max(VAR_FLOOR),
        _ => {
            let b = mean.max(VAR_FLOOR);
            b * b
        }
    }
}

/// Basis values φ_{i,n}(u) for i = 0..=n (used by callers that cache
/// design-point evaluations).
pub fn basis_row(n: usize, u: f64) -> Vec<f64> {
    (0..=n).map(|i| basis_eval(i, n, u).unwrap()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn uniform_design(k: usize) -> Vec<f64> {
        (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
    }

    /// Hand-built 3-gene, 6-time-point dataset with known prior geometry.
    fn walkthrough_dataset() -> TimeCourseDataset {
        let design = uniform_design(6); // 0, 0.2, 0.4, 0.6, 0.8, 1
        // gene 0: background 1, rises above 2 at k=2, peaks at k=4
        let g0 = vec![
            vec![1.0, 1.0],
            vec![1.5, 1.5],
            vec![3.0, 3.0],
            vec![5.0, 5.0],
            vec![6.0, 8.0],
            vec![4.0, 4.0],
        ];
        // gene 1: background 0.5, rises late, peaks at the end
        let g1 = vec![
            vec![0.5, 0.5],
            vec![0.6, 0.6],
            vec![0.9, 0.9],
            vec![0.8, 0.8],
            vec![2.0, 2.0],
            vec![3.0, 5.0],
        ];
        // gene 2: never exceeds twice its background — degenerate
        let g2 = vec![
            vec![2.0, 2.0],
            vec![2.5, 2.5],
            vec![3.0, 3.0],
            vec![3.5, 3.5],
            vec![3.0, 3.0],
            vec![2.0, 2.0],
        ];
        TimeCourseDataset::new(
            design,
            vec![2; 6],
            vec![g0, g1, g2],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap()
    }

    #[test]
    fn replicate_means_basic() {
        let ds = walkthrough_dataset();
        let means = ds.replicate_means(0);
        assert_eq!(means[0], 1.0);
        assert_eq!(means[4], 7.0);
        // arithmetic mean of (1,2,3,4)
        let ds2 = TimeCourseDataset::new(
            vec![0.0, 1.0],
            vec![4, 4],
            vec![vec![vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 2.0, 2.0, 2.0]]],
            vec!["x".into()],
        )
        .unwrap();
        assert_eq!(ds2.replicate_means(0)[0], 2.5);
    }

    #[test]
    fn replicate_means_match_naive_sum_oracle() {
        let mut rng = crate::rngs::stream(21, 0);
        let blocks: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.random::<f64>() * 10.0).collect())
            .collect();
        let design = uniform_design(5);
        let ds = TimeCourseDataset::new(design, vec![4; 5], vec![blocks.clone()], vec!["g".into()])
            .unwrap();
        let means = ds.replicate_means(0);
        for (k, block) in blocks.iter().enumerate() {
            let mut acc = 0.0;
            for &v in block {
                acc += v;
            }
            assert_eq!(means[k], acc / 4.0);
        }
    }

    #[test]
    fn beta_moment_match_uniform_and_rejection() {
        let (a, b) = beta_moment_match(0.5, 1.0 / 12.0).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        assert!(beta_moment_match(0.3, 0.3 * 0.7).is_err());
        assert!(beta_moment_match(0.0, 0.01).is_err());
    }

    #[test]
    fn beta_moment_match_quadrature_round_trip() {
        // compute Beta(α,β) moments by Riemann sum, then re-match
        let (alpha, beta) = (2.7771, 2.4481);
        let n = 400_000;
        let (mut mass, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let w = beta_ln_pdf(u, alpha, beta).exp() / n as f64;
            mass += w;
            m1 += u * w;
            m2 += u * u * w;
        }
        m1 /= mass;
        m2 /= mass;
        let var = m2 - m1 * m1;
        let (a, b) = beta_moment_match(m1, var).unwrap();
        assert!((a - alpha).abs() < 1e-6, "a={a}");
        assert!((b - beta).abs() < 1e-6, "b={b}");
    }

    #[test]
    fn prior_specs_walkthrough() {
        let ds = walkthrough_dataset();
        let specs = build_prior_specs(&ds).unwrap();
        assert_eq!(specs.degenerate, vec![2]);
        assert_eq!(specs.genes.len(), 2);

        // gene 0: Ȳ = (1, 1.5, 3, 5, 7, 4); 2Ȳ₀ = 2; peak k̃ = 4;
        // last k ≤ 4 with Ȳ ≤ 2 is k = 1, so k(g) = 2; midpoint of (2,4) = 3
        let s0 = &specs.genes[0];
        assert_eq!(s0.peak_index, 4);
        assert_eq!(s0.onset_floor_index, 2);
        assert_eq!(s0.xtilde, 0.4);
        assert_eq!(s0.onset_scale, 0.6);
        assert_eq!(s0.mu_bound, 2.0);
        assert_eq!(s0.coeff_scale, 16.0); // 2 · max(6, 8)

        // gene 1: Ȳ = (0.5, 0.6, 0.9, 0.8, 2, 4); 2Ȳ₀ = 1; peak k̃ = 5;
        // last k ≤ 5 with Ȳ ≤ 1 is k = 3, so k(g) = 4; (4+5) odd → index 5
        let s1 = &specs.genes[1];
        assert_eq!(s1.peak_index, 5);
        assert_eq!(s1.onset_floor_index, 4);
        assert_eq!(s1.xtilde, 0.8);
        assert_eq!(s1.onset_scale, 1.0);
        assert_eq!(s1.coeff_scale, 10.0);

        // determinism: identical datasets yield bit-identical specs
        let again = build_prior_specs(&walkthrough_dataset()).unwrap();
        assert_eq!(specs, again);
    }

    #[test]
    fn prior_specs_variance_floor_on_identical_ratios() {
        // two copies of the same gene profile → zero spread of X̃/X̂
        let design = uniform_design(6);
        let gene = vec![
            vec![1.0, 1.0],
            vec![1.5, 1.5],
            vec![3.0, 3.0],
            vec![5.0, 5.0],
            vec![7.0, 7.0],
            vec![4.0, 4.0],
        ];
        let ds = TimeCourseDataset::new(
            design,
            vec![2; 6],
            vec![gene.clone(), gene],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let specs = build_prior_specs(&ds).unwrap();
        assert!(specs.alpha1 > 0.0 && specs.alpha2 > 0.0);
        let m = 0.4 / 0.6;
        let expect = beta_moment_match(m, m * (1.0 - m) / 100.0).unwrap();
        assert_eq!((specs.alpha1, specs.alpha2), expect);
    }

    #[test]
    fn variance_exponent_recovery() {
        // mean profile straddling 1 so that over- and under-deflation of Q
        // both show up in its spread
        let means: [f64; 16] = [
            0.15, 0.2, 0.3, 0.45, 0.65, 0.9, 1.2, 1.6, 2.1, 2.7, 3.3, 3.8, 4.0, 3.4, 2.4, 1.5,
        ];
        let design: Vec<f64> = (0..16).map(|i| i as f64 / 15.0).collect();
        let mut hits = [0usize; 3];
        let n_trials = 200usize;
        for truth in 0u8..=2 {
            let mut correct = 0usize;
            for trial in 0..n_trials {
                let mut rng = crate::rngs::stream(1000 + trial as u64, truth as u64);
                let s = 0.15;
                let blocks: Vec<Vec<f64>> = means
                    .iter()
                    .map(|&m| {
                        (0..4)
                            .map(|_| {
                                let sd = s * m.powf(truth as f64 / 2.0);
                                m + sd * crate::rngs::standard_normal(&mut rng)
                            })
                            .collect()
                    })
                    .collect();
                let ds = TimeCourseDataset::new(
                    design.clone(),
                    vec![4; 16],
                    vec![blocks],
                    vec!["g".into()],
                )
                .unwrap();
                let (xi, sigma2) = select_variance_exponent(&ds, 0).unwrap();
                assert!(sigma2 > 0.0);
                if xi == truth {
                    correct += 1;
                }
            }
            hits[truth as usize] = correct;
        }
        for (truth, &correct) in hits.iter().enumerate() {
            assert!(
                correct * 100 >= 90 * n_trials,
                "xi={truth}: {correct}/{n_trials}"
            );
        }
    }

    #[test]
    fn variance_exponent_tie_breaks_to_zero() {
        let design = uniform_design(4);
        let blocks = vec![vec![2.0, 2.0]; 4];
        let ds =
            TimeCourseDataset::new(design, vec![2; 4], vec![blocks], vec!["g".into()]).unwrap();
        let (xi, _) = select_variance_exponent(&ds, 0).unwrap();
        assert_eq!(xi, 0);
    }

    #[test]
    fn log_posterior_single_observation_hand_oracle() {
        // one gene, one design point, one replicate, ξ = 0
        let spec = GenePriorSpec {
            gene_index: 0,
            onset_scale: 0.5,
            onset_floor_index: 1,
            peak_index: 2,
            coeff_scale: 4.0,
            mu_bound: 1.0,
            xtilde: 0.25,
        };
        let phi_bounds = [(2.0, 3.0), (2.0, 3.0), (0.5, 1.5), (0.5, 1.5)];
        let mut model = Model::prior_only(vec![0.7], vec![spec], phi_bounds, 3);
        let y = 1.4;
        model.summaries[0] = GeneSummary {
            counts: vec![1],
            sums: vec![y],
            sumsqs: vec![y * y],
        };
        model.variance.sigma2[0] = 0.09;

        let gene = GeneState {
            onset: 0.2,
            coeffs: vec![1.0, 2.0],
            background: 0.3,
        };
        let state = ModelState {
            phi: [2.5, 2.5, 1.0, 1.0],
            genes: vec![gene.clone()],
            order: 3,
        };

        // by hand: F(0.7) with c=0.2, u=0.625, n=3:
        // F = 1·3u²(1−u) + 2·u³
        let u: f64 = 0.625;
        let f = 3.0 * u * u * (1.0 - u) + 2.0 * u.powi(3);
        let sigma2 = 0.09;
        let ll = -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln()
            - 0.5 * (y - f - 0.3f64).powi(2) / sigma2;
        let prior = beta_ln_pdf(0.2 / 0.5, 2.5, 2.5) - 0.5f64.ln()
            + (beta_ln_pdf(0.25, 1.0, 1.0) - 4.0f64.ln())
            + (beta_ln_pdf(0.5, 1.0, 1.0) - 4.0f64.ln())
            - 1.0f64.ln();
        let hyper = -(1.0f64.ln() * 2.0 + 1.0f64.ln() * 2.0);
        let expect = ll + prior + hyper;
        let got = model.log_posterior(&state);
        assert!((got - expect).abs() < 1e-12, "got {got} expect {expect}");

        // outside support
        let mut bad = state.clone();
        bad.genes[0].background = 2.0;
        assert_eq!(model.log_posterior(&bad), f64::NEG_INFINITY);
    }

    #[test]
    fn log_posterior_phi_difference_is_prior_ratio() {
        let ds = walkthrough_dataset();
        let model = Model::from_dataset(&ds, 5).unwrap();
        let mut rng = crate::rngs::stream(33, 0);
        let state = {
            let mut s = model.sample_prior(&mut rng);
            s.phi = [
                model.phi_bounds[0].0 + 0.1,
                model.phi_bounds[1].0 + 0.1,
                0.8,
                1.2,
            ];
            s
        };
        let mut other = state.clone();
        other.phi = [
            model.phi_bounds[0].0 + 0.3,
            model.phi_bounds[1].0 + 0.2,
            1.1,
            0.7,
        ];
        let diff = model.log_posterior(&other) - model.log_posterior(&state);
        let prior_diff: f64 = (0..model.n_genes())
            .map(|g| {
                model.gene_log_prior(g, &state.genes[g], &other.phi)
                    - model.gene_log_prior(g, &state.genes[g], &state.phi)
            })
            .sum();
        assert!((diff - prior_diff).abs() < 1e-10);
    }

    #[test]
    fn likelihood_location_shift_identity() {
        // ξ=0: shifting every observation and μ by δ leaves the likelihood
        // unchanged
        let ds = walkthrough_dataset();
        let mut model = Model::from_dataset(&ds, 5).unwrap();
        model.variance.xi[0] = 0;
        let mut rng = crate::rngs::stream(34, 0);
        let state = model.sample_prior(&mut rng);
        let delta = 0.37;

        let mut shifted = model.clone();
        let s = &mut shifted.summaries[0];
        for k in 0..s.counts.len() {
            let m = s.counts[k] as f64;
            s.sumsqs[k] += 2.0 * delta * s.sums[k] + m * delta * delta;
            s.sums[k] += m * delta;
        }
        let mut gene = state.genes[0].clone();
        let base = model.gene_loglik(0, &gene);
        gene.background += delta;
        let moved = shifted.gene_loglik(0, &gene);
        assert!((base - moved).abs() < 1e-9, "{base} vs {moved}");
    }

    #[test]
    fn likelihood_invariant_under_replicate_reordering() {
        let design = uniform_design(4);
        let blocks = vec![
            vec![0.9, 1.0, 1.1],
            vec![1.4, 1.5, 1.6],
            vec![2.9, 3.0, 3.1],
            vec![4.9, 5.0, 5.1],
        ];
        let mut swapped = blocks.clone();
        swapped[1].reverse();
        swapped[3].rotate_left(1);
        let mk = |v: Vec<Vec<f64>>| {
            TimeCourseDataset::new(design.clone(), vec![3; 4], vec![v], vec!["g".into()]).unwrap()
        };
        let d1 = mk(blocks);
        let d2 = mk(swapped);
        if let (Ok(m1), Ok(m2)) = (Model::from_dataset(&d1, 4), Model::from_dataset(&d2, 4)) {
            let mut rng = crate::rngs::stream(35, 0);
            let state = m1.sample_prior(&mut rng);
            assert_eq!(m1.log_posterior(&state), m2.log_posterior(&state));
        } else {
            panic!("walkthrough data should build a model");
        }
    }

    #[test]
    fn sample_prior_supports_and_marginal_mean() {
        let ds = walkthrough_dataset();
        let model = Model::from_dataset(&ds, 6).unwrap();
        let mut rng = crate::rngs::stream(36, 0);
        let n = 100_000;
        let mut ratio_sum = 0.0;
        let mut ratio_sq = 0.0;
        for i in 0..n {
            let s = model.sample_prior(&mut rng);
            debug_assert!(model.in_support(&s));
            if i < 200 {
                // prior draws must carry positive density under the
                // acceptance-ratio densities
                for g in 0..model.n_genes() {
                    assert!(model.gene_log_prior(g, &s.genes[g], &s.phi).is_finite());
                }
            }
            let r = s.genes[0].onset / model.specs[0].onset_scale;
            ratio_sum += r;
            ratio_sq += r * r;
        }
        let mean = ratio_sum / n as f64;
        let sd = (ratio_sq / n as f64 - mean * mean).sqrt();

        // marginal Beta mean integrated over the uniform φ box (midpoint rule)
        let (a_lo, a_hi) = model.phi_bounds[0];
        let (b_lo, b_hi) = model.phi_bounds[1];
        let m = 400;
        let mut expect = 0.0;
        for i in 0..m {
            let p1 = a_lo + (a_hi - a_lo) * (i as f64 + 0.5) / m as f64;
            for j in 0..m {
                let p2 = b_lo + (b_hi - b_lo) * (j as f64 + 0.5) / m as f64;
                expect += p1 / (p1 + p2);
            }
        }
        expect /= (m * m) as f64;
        let se = sd / (n as f64).sqrt();
        assert!(
            (mean - expect).abs() < 3.0 * se + 1e-4,
            "mean {mean} expect {expect} se {se}"
        );
    }

    #[test]
    fn sample_prior_uniform_coeffs_under_unit_phi() {
        // force φ₃ = φ₄ = 1: coefficients are uniform on (0, coeff_scale)
        let spec = GenePriorSpec {
            gene_index: 0,
            onset_scale: 0.5,
            onset_floor_index: 1,
            peak_index: 2,
            coeff_scale: 3.0,
            mu_bound: 1.0,
            xtilde: 0.25,
        };
        let model = Model::prior_only(
            vec![0.0, 1.0],
            vec![spec],
            [(2.0, 3.0), (2.0, 3.0), (1.0, 1.0), (1.0, 1.0)],
            15,
        );
        let mut rng = crate::rngs::stream(37, 0);
        let n = 100_000;
        let mut draws: Vec<f64> = Vec::with_capacity(n + 14);
        while draws.len() < n {
            let s = model.sample_prior(&mut rng);
            for &b in &s.genes[0].coeffs {
                draws.push(b / 3.0);
            }
        }
        draws.truncate(n);
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &u) in draws.iter().enumerate() {
            let hi = (i + 1) as f64 / n as f64 - u;
            let lo = u - i as f64 / n as f64;
            ks = ks.max(hi.abs()).max(lo.abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }
}
