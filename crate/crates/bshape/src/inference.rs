//! Posterior summaries and shape-hypothesis testing: feature posteriors,
//! the posterior mode, posterior/prior shape probabilities with Bayes
//! factors, and posterior-predictive checks.

use rand::Rng;
use thiserror::Error;

use crate::model::{plugin_base, GeneState, Model, ModelState};
use crate::rngs;
use crate::sampler::SampleStore;
use crate::{Curve, Features};

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("sample store is empty")]
    EmptyStore,
    #[error("prior probability must lie strictly inside (0, 1), got {0}")]
    DegeneratePrior(f64),
    #[error("posterior probability must lie in [0, 1], got {0}")]
    BadPosterior(f64),
}

/// The scalar estimands tracked per gene: the seven profile features plus
/// the raw area under the curve on [0, 1] used for convergence monitoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimand {
    Ton,
    Tmax,
    Max,
    Tslope,
    Slope,
    L1Norm,
    Tend,
    Auc,
}

impl Estimand {
    /// The seven feature-table estimands.
    pub const FEATURES: [Estimand; 7] = [
        Estimand::Ton,
        Estimand::Tmax,
        Estimand::Max,
        Estimand::Tslope,
        Estimand::Slope,
        Estimand::L1Norm,
        Estimand::Tend,
    ];

    /// The six estimands monitored for convergence: onset, time to maximum,
    /// maximum, steepest-slope time, steepest slope, and area under the
    /// curve on [0, 1].
    pub const DIAGNOSTICS: [Estimand; 6] = [
        Estimand::Ton,
        Estimand::Tmax,
        Estimand::Max,
        Estimand::Tslope,
        Estimand::Slope,
        Estimand::Auc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimand::Ton => "Ton",
            Estimand::Tmax => "Tmax",
            Estimand::Max => "Max",
            Estimand::Tslope => "Tslope",
            Estimand::Slope => "Slope",
            Estimand::L1Norm => "L1norm",
            Estimand::Tend => "Tend",
            Estimand::Auc => "AUC",
        }
    }

    pub fn pick(self, draw: &FeatureDraw) -> f64 {
        match self {
            Estimand::Ton => draw.features.ton,
            Estimand::Tmax => draw.features.tmax,
            Estimand::Max => draw.features.max_val,
            Estimand::Tslope => draw.features.tslope,
            Estimand::Slope => draw.features.slope,
            Estimand::L1Norm => draw.features.l1_norm,
            Estimand::Tend => draw.features.tend,
            Estimand::Auc => draw.auc,
        }
    }
}

/// All estimands of one gene in one draw, extracted in a single pass.
#[derive(Debug, Clone, Copy)]
pub struct FeatureDraw {
    pub features: Features,
    pub auc: f64,
}

pub fn feature_draw(gene: &GeneState) -> FeatureDraw {
    let curve = gene.curve();
    FeatureDraw {
        features: curve.features(),
        auc: curve.integral(0.0, 1.0).expect("bounds are ordered"),
    }
}

/// Summary of one estimand's sample: mean, standard deviation and the
/// sample support (the min/max over the retained draws).
#[derive(Debug, Clone)]
pub struct FeaturePosterior {
    pub estimand: Estimand,
    pub sample_mean: f64,
    pub sample_stdv: f64,
    pub support: (f64, f64),
    pub draws: Vec<f64>,
}

fn summarize(estimand: Estimand, draws: Vec<f64>) -> FeaturePosterior {
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let lo = draws.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = draws.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    FeaturePosterior {
        estimand,
        sample_mean: mean,
        sample_stdv: var.sqrt(),
        support: (lo, hi),
        draws,
    }
}

/// Apply feature extraction to every retained draw of one gene and
/// aggregate the seven per-feature samples.
pub fn feature_posteriors(
    store: &SampleStore,
    gene: usize,
) -> Result<Vec<FeaturePosterior>, InferenceError> {
    if store.n_draws() == 0 {
        return Err(InferenceError::EmptyStore);
    }
    let per_draw: Vec<FeatureDraw> = store
        .draws()
        .map(|s| feature_draw(&s.genes[gene]))
        .collect();
    Ok(Estimand::FEATURES
        .iter()
        .map(|&e| summarize(e, per_draw.iter().map(|d| e.pick(d)).collect()))
        .collect())
}

/// Same aggregation over an explicit curve sample (used for prior feature
/// tables).
pub fn feature_sample_summary(curves: &[Curve]) -> Vec<FeaturePosterior> {
    let per_draw: Vec<FeatureDraw> = curves
        .iter()
        .map(|c| FeatureDraw {
            features: c.features(),
            auc: c.integral(0.0, 1.0).expect("bounds are ordered"),
        })
        .collect();
    Estimand::FEATURES
        .iter()
        .map(|&e| summarize(e, per_draw.iter().map(|d| e.pick(d)).collect()))
        .collect()
}

/// The retained draw with the highest posterior density; ties break to the
/// first occurrence (chain order, then draw order).
pub fn posterior_mode<'s>(
    store: &'s SampleStore,
    model: &Model,
) -> Result<(&'s ModelState, f64), InferenceError> {
    let mut best: Option<(&ModelState, f64)> = None;
    for draw in store.draws() {
        let lp = model.log_posterior(draw);
        match best {
            Some((_, cur)) if lp <= cur => {}
            _ => best = Some((draw, lp)),
        }
    }
    best.ok_or(InferenceError::EmptyStore)
}

/// Fraction of curves satisfying a shape predicate.
pub fn shape_probability<'a, I, P>(curves: I, predicate: P) -> f64
where
    I: IntoIterator<Item = &'a Curve>,
    P: Fn(&Curve) -> bool,
{
    let mut total = 0usize;
    let mut hits = 0usize;
    for c in curves {
        total += 1;
        if predicate(c) {
            hits += 1;
        }
    }
    if total == 0 {
        return f64::NAN;
    }
    hits as f64 / total as f64
}

/// Posterior shape probability of one gene over the retained draws.
pub fn posterior_shape_probability<P: Fn(&Curve) -> bool>(
    store: &SampleStore,
    gene: usize,
    predicate: P,
) -> Result<f64, InferenceError> {
    if store.n_draws() == 0 {
        return Err(InferenceError::EmptyStore);
    }
    let curves: Vec<Curve> = store.draws().map(|s| s.genes[gene].curve()).collect();
    Ok(shape_probability(curves.iter(), predicate))
}

/// One curve draw from a single gene's hierarchical prior: fresh φ from
/// the hyperprior box, then the gene's onset and coefficients given φ.
pub fn sample_prior_gene_curve<R: Rng>(model: &Model, gene: usize, rng: &mut R) -> Curve {
    let spec = &model.specs[gene];
    loop {
        let phi1 = rngs::uniform(rng, model.phi_bounds[0].0, model.phi_bounds[0].1);
        let phi2 = rngs::uniform(rng, model.phi_bounds[1].0, model.phi_bounds[1].1);
        let phi3 = rngs::uniform(rng, model.phi_bounds[2].0, model.phi_bounds[2].1);
        let phi4 = rngs::uniform(rng, model.phi_bounds[3].0, model.phi_bounds[3].1);
        let onset = spec.onset_scale * rngs::beta(rng, phi1, phi2);
        let coeffs: Vec<f64> = (0..model.order - 1)
            .map(|_| spec.coeff_scale * rngs::beta(rng, phi3, phi4))
            .collect();
        if let Ok(c) = Curve::new(onset, coeffs) {
            return c;
        }
    }
}

/// Monte Carlo estimate of a prior shape probability for one gene, with
/// its binomial standard error.
pub fn prior_shape_probability<R: Rng, P: Fn(&Curve) -> bool>(
    model: &Model,
    gene: usize,
    predicate: P,
    n_draws: usize,
    rng: &mut R,
) -> (f64, f64) {
    let mut hits = 0usize;
    for _ in 0..n_draws {
        if predicate(&sample_prior_gene_curve(model, gene, rng)) {
            hits += 1;
        }
    }
    let p = hits as f64 / n_draws as f64;
    let se = (p * (1.0 - p) / n_draws as f64).sqrt();
    (p, se)
}

/// Posterior and prior probability of a shape hypothesis with their ratio
/// and the Bayes factor (posterior odds over prior odds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeTestResult {
    pub posterior_prob: f64,
    pub prior_prob: f64,
    pub ratio: f64,
    pub bayes_factor: f64,
}

/// Bayes factor from a posterior and a prior probability:
/// `(po/(1−po)) / (pr/(1−pr))`; +∞ when po = 1. Degenerate priors (0 or 1)
/// are rejected.
pub fn bayes_factor(po: f64, pr: f64) -> Result<f64, InferenceError> {
    if !(pr > 0.0 && pr < 1.0) {
        return Err(InferenceError::DegeneratePrior(pr));
    }
    if !(0.0..=1.0).contains(&po) {
        return Err(InferenceError::BadPosterior(po));
    }
    if po == 1.0 {
        return Ok(f64::INFINITY);
    }
    let posterior_odds = po / (1.0 - po);
    let prior_odds = pr / (1.0 - pr);
    Ok(posterior_odds / prior_odds)
}

pub fn shape_test(po: f64, pr: f64) -> Result<ShapeTestResult, InferenceError> {
    Ok(ShapeTestResult {
        posterior_prob: po,
        prior_prob: pr,
        ratio: po / pr,
        bayes_factor: bayes_factor(po, pr)?,
    })
}

/// Parameters of one posterior draw as seen by a discrepancy measure:
/// curve values at the design points, the background, and the plug-in
/// variance per design point.
#[derive(Debug, Clone)]
pub struct PredictiveParams {
    pub f: Vec<f64>,
    pub mu: f64,
    pub var: Vec<f64>,
}

/// Default discrepancy: the standardized residual sum of squares of one
/// gene, `Σ_k Σ_j (y_jk − F(X_k) − μ)² / σ̂²_k`.
pub fn standardized_rss(blocks: &[Vec<f64>], params: &PredictiveParams) -> f64 {
    let mut t = 0.0;
    for (k, block) in blocks.iter().enumerate() {
        let mean = params.f[k] + params.mu;
        for &y in block {
            t += (y - mean).powi(2) / params.var[k];
        }
    }
    t
}

/// Posterior-predictive p-value for one gene under an arbitrary
/// discrepancy `T(y, θ)`.
///
/// For each retained draw, replicate data are simulated from the
/// observation model at the drawn parameters (with the plug-in variance of
/// that draw) and the discrepancy is compared between replicated and
/// observed data: the result is the fraction of draws with
/// `T(y_rep, θ) ≥ T(y, θ)` (ties count).
pub fn posterior_predictive_check<R, T>(
    store: &SampleStore,
    model: &Model,
    observed: &[Vec<f64>],
    gene: usize,
    discrepancy: T,
    rng: &mut R,
) -> Result<f64, InferenceError>
where
    R: Rng,
    T: Fn(&[Vec<f64>], &PredictiveParams) -> f64,
{
    if store.n_draws() == 0 {
        return Err(InferenceError::EmptyStore);
    }
    let xi = model.variance.xi[gene];
    let sigma2 = model.variance.sigma2[gene];
    let counts: Vec<usize> = observed.iter().map(Vec::len).collect();
    let mut exceed = 0usize;
    let mut total = 0usize;
    for state in store.draws() {
        let g = &state.genes[gene];
        let f = model.curve_at_design(g);
        let var: Vec<f64> = f
            .iter()
            .map(|&fk| sigma2 * plugin_base(fk + g.background, xi))
            .collect();
        let params = PredictiveParams {
            f,
            mu: g.background,
            var,
        };
        let replicated: Vec<Vec<f64>> = counts
            .iter()
            .enumerate()
            .map(|(k, &mk)| {
                let mean = params.f[k] + params.mu;
                let sd = params.var[k].sqrt();
                (0..mk)
                    .map(|_| mean + sd * rngs::standard_normal(rng))
                    .collect()
            })
            .collect();
        let t_obs = discrepancy(observed, &params);
        let t_rep = discrepancy(&replicated, &params);
        total += 1;
        if t_rep >= t_obs {
            exceed += 1;
        }
    }
    Ok(exceed as f64 / total as f64)
}
