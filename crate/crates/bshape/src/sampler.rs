//! Metropolis-within-Gibbs posterior sampler.
//!
//! One iteration is a full sweep of five update families, in order:
//!
//! 1. `(φ₁, φ₂)` — joint uniform proposal on the hyperprior box,
//! 2. `(φ₃, φ₄)` — likewise,
//! 3. onsets `c_g` — per gene, independence proposal from the conditional
//!    onset prior with the prior-density correction in the ratio,
//! 4. coefficients `b_{i,g}` — per gene and coordinate, independence
//!    proposal from the conditional coefficient prior with correction,
//! 5. backgrounds `μ_g` — per gene, uniform proposal equal to the prior
//!    (the correction cancels).
//!
//! Genes and coordinates are visited in ascending index order; there is no
//! randomized scan. All ratios are evaluated in log space, and the plug-in
//! heteroscedastic variance is recomputed from the current state at the
//! start of each accept/reject evaluation and enters both sides of that
//! ratio.
//!
//! Chains are independently seeded streams of one master seed; running them
//! on any number of threads yields bit-identical output. A chain checkpoint
//! (magic header `BSHAPE-CHAIN-v1`) carries the retained draws, acceptance
//! counters, the current state and the exact generator position, so a
//! resumed chain continues the original draw sequence bit for bit.

use std::io::{self, BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bernstein::basis_values;
use crate::model::{GeneState, Model, ModelState};
use crate::rngs::{self, CHAIN_BASE};
use crate::special::{beta_ln_pdf, ln_beta};

/// Magic header of the chain checkpoint format.
pub const CHAIN_MAGIC: &str = "BSHAPE-CHAIN-v1";

/// Proposals whose conditional-prior log density falls below ln(1e−300) at
/// either correction point are rejected outright.
const LN_DENSITY_GUARD: f64 = -690.7755278982137;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("chain config invalid: {0}")]
    BadConfig(&'static str),
    #[error("Gelman–Rubin needs at least 2 chains with 10 draws each")]
    TooFewChains,
    #[error("checkpoint i/o: {0}")]
    Io(#[from] io::Error),
    #[error("checkpoint line {0}: {1}")]
    Format(usize, String),
}

/// Chain schedule. One iteration is one full sweep of families (1)–(5).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub iterations: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub order: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_chains: 5,
            iterations: 200_000,
            burn_in: 20_000,
            thin: 100,
            seed: 0,
            order: 15,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n_chains == 0 {
            return Err(SamplerError::BadConfig("need at least one chain"));
        }
        if self.burn_in >= self.iterations {
            return Err(SamplerError::BadConfig("burn-in must be below iterations"));
        }
        if self.thin == 0 {
            return Err(SamplerError::BadConfig("thinning interval must be ≥ 1"));
        }
        if self.order < 3 {
            return Err(SamplerError::BadConfig("order must be ≥ 3"));
        }
        Ok(())
    }

    /// Retained draws per chain: ⌊(iterations − burn_in)/thin⌋.
    pub fn retained_per_chain(&self) -> u64 {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Accepted/proposed counts per update family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AcceptCounters {
    pub phi12: (u64, u64),
    pub phi34: (u64, u64),
    pub onset: (u64, u64),
    pub coeff: (u64, u64),
    pub background: (u64, u64),
}

/// One chain's output: thinned post-burn-in draws plus everything needed to
/// resume it exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub chain_index: usize,
    pub stream_id: u64,
    pub draws: Vec<ModelState>,
    pub accept: AcceptCounters,
    pub final_state: ModelState,
    pub rng_word_pos: u128,
    pub iterations_done: u64,
}

/// Thinned post-burn-in draws of all chains.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStore {
    pub config: ChainConfig,
    pub chains: Vec<ChainRun>,
}

impl SampleStore {
    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    /// All draws, chains concatenated in index order.
    pub fn draws(&self) -> impl Iterator<Item = &ModelState> {
        self.chains.iter().flat_map(|c| c.draws.iter())
    }

    /// Per-chain series of a scalar estimand.
    pub fn estimand_series<F: Fn(&ModelState) -> f64>(&self, extract: F) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.draws.iter().map(&extract).collect())
            .collect()
    }
}

/// Classic Gelman–Rubin potential scale reduction over per-chain series of
/// one scalar estimand: R̂ = sqrt(((n−1)/n·W + B/n)/W). Chains are trimmed
/// to the shortest length. Zero within-chain variance reports +∞ (a
/// degenerate chain, not convergence).
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64, SamplerError> {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m < 2 || n < 10 {
        return Err(SamplerError::TooFewChains);
    }
    let nf = n as f64;
    let means: Vec<f64> = chains
        .iter()
        .map(|c| c[..n].iter().sum::<f64>() / nf)
        .collect();
    let within: f64 = chains
        .iter()
        .zip(&means)
        .map(|(c, &mu)| c[..n].iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m as f64;
    let grand = means.iter().sum::<f64>() / m as f64;
    let between = nf * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0);
    if within == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((((nf - 1.0) / nf * within + between / nf) / within).sqrt())
}

/// A live chain: model reference, current state, cached per-gene basis
/// matrices and curve values at the design points, and the generator.
pub struct Chain<'m> {
    model: &'m Model,
    state: ModelState,
    rng: ChaCha8Rng,
    accept: AcceptCounters,
    /// per gene: flattened (K+1) × (order−1) basis values at the design
    /// points for the current onset
    basis: Vec<Vec<f64>>,
    /// per gene: F_g(X_k)
    fvals: Vec<Vec<f64>>,
    /// per gene: (ln(c/X̂), ln(1−c/X̂)) for the φ₁/φ₂ ratio
    ln_onset: Vec<(f64, f64)>,
    /// per gene per coefficient: (ln(b/S), ln(1−b/S)) for the φ₃/φ₄ ratio
    ln_coeff: Vec<Vec<(f64, f64)>>,
    // scratch buffers reused across proposals
    scratch_basis: Vec<f64>,
    scratch_f: Vec<f64>,
    scratch_row: Vec<f64>,
}

impl<'m> Chain<'m> {
    pub fn new(model: &'m Model, state: ModelState, rng: ChaCha8Rng) -> Self {
        let n_times = model.design.len();
        let nc = state.order - 1;
        let mut chain = Chain {
            model,
            state,
            rng,
            accept: AcceptCounters::default(),
            basis: Vec::new(),
            fvals: Vec::new(),
            ln_onset: Vec::new(),
            ln_coeff: Vec::new(),
            scratch_basis: vec![0.0; n_times * nc],
            scratch_f: vec![0.0; n_times],
            scratch_row: vec![0.0; nc + 2],
        };
        chain.rebuild_caches();
        chain
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn accept_counters(&self) -> AcceptCounters {
        self.accept
    }

    pub fn into_parts(self) -> (ModelState, ChaCha8Rng, AcceptCounters) {
        (self.state, self.rng, self.accept)
    }

    fn rebuild_caches(&mut self) {
        let n_times = self.model.design.len();
        let nc = self.state.order - 1;
        self.basis.clear();
        self.fvals.clear();
        self.ln_onset.clear();
        self.ln_coeff.clear();
        for g in 0..self.state.genes.len() {
            let mut b = vec![0.0; n_times * nc];
            let mut f = vec![0.0; n_times];
            Self::fill_basis(
                self.model,
                self.state.order,
                self.state.genes[g].onset,
                &mut b,
                &mut self.scratch_row,
            );
            Self::fill_f(&self.state.genes[g].coeffs, &b, &mut f);
            self.basis.push(b);
            self.fvals.push(f);
            let gene = &self.state.genes[g];
            let spec = &self.model.specs[g];
            let u = gene.onset / spec.onset_scale;
            self.ln_onset.push((u.ln(), (1.0 - u).ln()));
            self.ln_coeff.push(
                gene.coeffs
                    .iter()
                    .map(|&b| {
                        let v = b / spec.coeff_scale;
                        (v.ln(), (1.0 - v).ln())
                    })
                    .collect(),
            );
        }
    }

    /// Basis rows at every design point for onset `c`: zero where X_k ≤ c.
    fn fill_basis(model: &Model, order: usize, c: f64, out: &mut [f64], row: &mut [f64]) {
        let nc = order - 1;
        for (k, &x) in model.design.iter().enumerate() {
            let dst = &mut out[k * nc..(k + 1) * nc];
            if x <= c {
                dst.fill(0.0);
            } else {
                let u = (x - c) / (1.0 - c);
                basis_values(order, u, row);
                dst.copy_from_slice(&row[2..]);
            }
        }
    }

    fn fill_f(coeffs: &[f64], basis: &[f64], out: &mut [f64]) {
        let nc = coeffs.len();
        for (k, slot) in out.iter_mut().enumerate() {
            let row = &basis[k * nc..(k + 1) * nc];
            *slot = row.iter().zip(coeffs).map(|(w, b)| w * b).sum();
        }
    }

    fn metropolis(&mut self, log_ratio: f64) -> bool {
        self.rng.random::<f64>().ln() < log_ratio
    }

    /// Family (1): joint uniform proposal for (φ₁, φ₂). The likelihood and
    /// every φ₃/φ₄ prior factor cancel; what remains is the product over
    /// genes of the onset-prior ratio.
    pub fn update_phi12(&mut self) {
        let (lo1, hi1) = self.model.phi_bounds[0];
        let (lo2, hi2) = self.model.phi_bounds[1];
        let cand1 = rngs::uniform(&mut self.rng, lo1, hi1);
        let cand2 = rngs::uniform(&mut self.rng, lo2, hi2);
        let ratio = self.phi12_log_ratio(cand1, cand2);
        self.accept.phi12.1 += 1;
        if self.metropolis(ratio) {
            self.state.phi[0] = cand1;
            self.state.phi[1] = cand2;
            self.accept.phi12.0 += 1;
        }
    }

    fn phi12_log_ratio(&self, cand1: f64, cand2: f64) -> f64 {
        let g = self.state.genes.len() as f64;
        if g == 0.0 {
            return 0.0;
        }
        let (sum_ln, sum_ln1m) = self
            .ln_onset
            .iter()
            .fold((0.0, 0.0), |acc, &(a, b)| (acc.0 + a, acc.1 + b));
        (cand1 - self.state.phi[0]) * sum_ln + (cand2 - self.state.phi[1]) * sum_ln1m
            - g * (ln_beta(cand1, cand2) - ln_beta(self.state.phi[0], self.state.phi[1]))
    }

    /// Family (2): joint uniform proposal for (φ₃, φ₄); the coefficient
    /// prior factors are the only ones that do not cancel.
    pub fn update_phi34(&mut self) {
        let (lo3, hi3) = self.model.phi_bounds[2];
        let (lo4, hi4) = self.model.phi_bounds[3];
        let cand3 = rngs::uniform(&mut self.rng, lo3, hi3);
        let cand4 = rngs::uniform(&mut self.rng, lo4, hi4);
        let ratio = self.phi34_log_ratio(cand3, cand4);
        self.accept.phi34.1 += 1;
        if self.metropolis(ratio) {
            self.state.phi[2] = cand3;
            self.state.phi[3] = cand4;
            self.accept.phi34.0 += 1;
        }
    }

    fn phi34_log_ratio(&self, cand3: f64, cand4: f64) -> f64 {
        let count: usize = self.ln_coeff.iter().map(Vec::len).sum();
        if count == 0 {
            return 0.0;
        }
        let (sum_ln, sum_ln1m) = self
            .ln_coeff
            .iter()
            .flatten()
            .fold((0.0, 0.0), |acc, &(a, b)| (acc.0 + a, acc.1 + b));
        (cand3 - self.state.phi[2]) * sum_ln + (cand4 - self.state.phi[3]) * sum_ln1m
            - count as f64
                * (ln_beta(cand3, cand4) - ln_beta(self.state.phi[2], self.state.phi[3]))
    }

    /// Family (3): per-gene onset update. Independence proposal from the
    /// conditional onset prior; the prior factors cancel against the
    /// correction, leaving the likelihood ratio under the current-state
    /// plug-in variance.
    pub fn update_onsets(&mut self) {
        for g in 0..self.state.genes.len() {
            let spec = &self.model.specs[g];
            let u_new = rngs::beta(&mut self.rng, self.state.phi[0], self.state.phi[1]);
            let cand = spec.onset_scale * u_new;
            self.accept.onset.1 += 1;

            let u_old = self.state.genes[g].onset / spec.onset_scale;
            // correction-point guard: both beta densities must be sane
            if beta_ln_pdf(u_old, self.state.phi[0], self.state.phi[1]) < LN_DENSITY_GUARD
                || beta_ln_pdf(u_new, self.state.phi[0], self.state.phi[1]) < LN_DENSITY_GUARD
            {
                continue;
            }
            if cand >= 1.0 {
                continue;
            }

            Self::fill_basis(
                self.model,
                self.state.order,
                cand,
                &mut self.scratch_basis,
                &mut self.scratch_row,
            );
            Self::fill_f(
                &self.state.genes[g].coeffs,
                &self.scratch_basis,
                &mut self.scratch_f,
            );
            let mu = self.state.genes[g].background;
            let ratio = self
                .model
                .gene_loglik_from(g, &self.scratch_f, mu, &self.fvals[g], mu)
                - self
                    .model
                    .gene_loglik_from(g, &self.fvals[g], mu, &self.fvals[g], mu);
            if self.metropolis(ratio) {
                self.state.genes[g].onset = cand;
                std::mem::swap(&mut self.basis[g], &mut self.scratch_basis);
                std::mem::swap(&mut self.fvals[g], &mut self.scratch_f);
                self.ln_onset[g] = (u_new.ln(), (1.0 - u_new).ln());
                self.accept.onset.0 += 1;
            }
        }
    }

    /// Family (4): coordinate-wise coefficient updates. Independence
    /// proposal from the conditional coefficient prior with the prior
    /// correction (cancelling to a likelihood ratio); proposals that would
    /// leave the shape class are rejected.
    pub fn update_coeffs(&mut self) {
        let nc = self.state.order - 1;
        for g in 0..self.state.genes.len() {
            let spec = &self.model.specs[g];
            for i in 0..nc {
                let v_new = rngs::beta(&mut self.rng, self.state.phi[2], self.state.phi[3]);
                let cand = spec.coeff_scale * v_new;
                self.accept.coeff.1 += 1;

                let v_old = self.state.genes[g].coeffs[i] / spec.coeff_scale;
                if beta_ln_pdf(v_old, self.state.phi[2], self.state.phi[3]) < LN_DENSITY_GUARD
                    || beta_ln_pdf(v_new, self.state.phi[2], self.state.phi[3]) < LN_DENSITY_GUARD
                {
                    continue;
                }
                let old = self.state.genes[g].coeffs[i];
                self.state.genes[g].coeffs[i] = cand;
                let valid = crate::bernstein::validate_shape(
                    &self.state.genes[g].coeffs,
                    self.state.genes[g].onset,
                );
                self.state.genes[g].coeffs[i] = old;
                if !valid {
                    continue;
                }

                let delta = cand - old;
                let basis = &self.basis[g];
                for (k, slot) in self.scratch_f.iter_mut().enumerate() {
                    *slot = self.fvals[g][k] + delta * basis[k * nc + i];
                }
                let mu = self.state.genes[g].background;
                let ratio = self
                    .model
                    .gene_loglik_from(g, &self.scratch_f, mu, &self.fvals[g], mu)
                    - self
                        .model
                        .gene_loglik_from(g, &self.fvals[g], mu, &self.fvals[g], mu);
                if self.metropolis(ratio) {
                    self.state.genes[g].coeffs[i] = cand;
                    std::mem::swap(&mut self.fvals[g], &mut self.scratch_f);
                    self.ln_coeff[g][i] = (v_new.ln(), (1.0 - v_new).ln());
                    self.accept.coeff.0 += 1;
                }
            }
        }
    }

    /// Family (5): per-gene background update. The uniform proposal equals
    /// the prior, so the ratio is a pure likelihood ratio.
    pub fn update_backgrounds(&mut self) {
        for g in 0..self.state.genes.len() {
            let spec = &self.model.specs[g];
            let cand = rngs::uniform(&mut self.rng, 0.0, spec.mu_bound);
            self.accept.background.1 += 1;
            let mu = self.state.genes[g].background;
            let ratio = self
                .model
                .gene_loglik_from(g, &self.fvals[g], cand, &self.fvals[g], mu)
                - self
                    .model
                    .gene_loglik_from(g, &self.fvals[g], mu, &self.fvals[g], mu);
            if self.metropolis(ratio) {
                self.state.genes[g].background = cand;
                self.accept.background.0 += 1;
            }
        }
    }

    /// One full sweep, families (1)–(5).
    pub fn sweep(&mut self) {
        self.update_phi12();
        self.update_phi34();
        self.update_onsets();
        self.update_coeffs();
        self.update_backgrounds();
        debug_assert!(self.model.in_support(&self.state), "state left the support");
    }
}

#[allow(clippy::too_many_arguments)]
fn advance_chain(
    model: &Model,
    config: &ChainConfig,
    chain_index: usize,
    rng: ChaCha8Rng,
    state: ModelState,
    start_iteration: u64,
    mut draws: Vec<ModelState>,
    accept: AcceptCounters,
) -> ChainRun {
    let mut chain = Chain::new(model, state, rng);
    chain.accept = accept;
    for t in start_iteration + 1..=config.iterations {
        chain.sweep();
        if t > config.burn_in && (t - config.burn_in).is_multiple_of(config.thin) {
            draws.push(chain.state.clone());
        }
    }
    let (final_state, rng, accept) = chain.into_parts();
    ChainRun {
        chain_index,
        stream_id: CHAIN_BASE + chain_index as u64,
        draws,
        accept,
        final_state,
        rng_word_pos: rng.get_word_pos(),
        iterations_done: config.iterations,
    }
}

/// Run `config.n_chains` independent chains from prior-sampled initial
/// states. Chains run on separate threads but are independently seeded and
/// collected in index order, so the result does not depend on the thread
/// count.
pub fn run_chains(config: &ChainConfig, model: &Model) -> Result<SampleStore, SamplerError> {
    config.validate()?;
    let chains: Vec<ChainRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.n_chains)
            .map(|index| {
                scope.spawn(move || {
                    let mut rng = rngs::stream(config.seed, CHAIN_BASE + index as u64);
                    let init = model.sample_prior(&mut rng);
                    advance_chain(
                        model,
                        config,
                        index,
                        rng,
                        init,
                        0,
                        Vec::with_capacity(config.retained_per_chain() as usize),
                        AcceptCounters::default(),
                    )
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    Ok(SampleStore {
        config: *config,
        chains,
    })
}

/// Continue a checkpointed chain to `config.iterations` total sweeps. The
/// generator resumes at its exact recorded position: the concatenated run
/// is bit-identical to one uninterrupted run of the same length.
pub fn resume_chain(
    config: &ChainConfig,
    model: &Model,
    run: &ChainRun,
) -> Result<ChainRun, SamplerError> {
    config.validate()?;
    if run.iterations_done > config.iterations {
        return Err(SamplerError::BadConfig(
            "checkpoint is already past the requested iteration count",
        ));
    }
    let mut rng = rngs::stream(config.seed, run.stream_id);
    rng.set_word_pos(run.rng_word_pos);
    Ok(advance_chain(
        model,
        config,
        run.chain_index,
        rng,
        run.final_state.clone(),
        run.iterations_done,
        run.draws.clone(),
        run.accept,
    ))
}

fn write_state_fields(out: &mut String, state: &ModelState) {
    for phi in state.phi {
        out.push(',');
        out.push_str(&phi.to_string());
    }
    for gene in &state.genes {
        out.push(',');
        out.push_str(&gene.onset.to_string());
        out.push(',');
        out.push_str(&gene.background.to_string());
        for b in &gene.coeffs {
            out.push(',');
            out.push_str(&b.to_string());
        }
    }
}

/// Write one chain as a self-describing checkpoint. Values are printed in
/// shortest round-trip decimal form, so a read-back reproduces every float
/// bit for bit.
pub fn write_checkpoint<W: Write>(
    w: &mut W,
    config: &ChainConfig,
    run: &ChainRun,
) -> io::Result<()> {
    writeln!(w, "{CHAIN_MAGIC}")?;
    writeln!(w, "meta,chain_index,{}", run.chain_index)?;
    writeln!(w, "meta,stream_id,{}", run.stream_id)?;
    writeln!(w, "meta,seed,{}", config.seed)?;
    writeln!(w, "meta,n_chains,{}", config.n_chains)?;
    writeln!(w, "meta,iterations,{}", config.iterations)?;
    writeln!(w, "meta,burn_in,{}", config.burn_in)?;
    writeln!(w, "meta,thin,{}", config.thin)?;
    writeln!(w, "meta,order,{}", config.order)?;
    let n_genes = run.final_state.genes.len();
    writeln!(w, "meta,n_genes,{n_genes}")?;
    writeln!(
        w,
        "columns,iteration,phi1,phi2,phi3,phi4,[onset,background,b2..b{}]x{}",
        config.order, n_genes
    )?;
    let mut line = String::new();
    for (idx, draw) in run.draws.iter().enumerate() {
        let iteration = config.burn_in + (idx as u64 + 1) * config.thin;
        line.clear();
        line.push_str("draw,");
        line.push_str(&iteration.to_string());
        write_state_fields(&mut line, draw);
        writeln!(w, "{line}")?;
    }
    for (name, (acc, prop)) in [
        ("phi12", run.accept.phi12),
        ("phi34", run.accept.phi34),
        ("onset", run.accept.onset),
        ("coeff", run.accept.coeff),
        ("background", run.accept.background),
    ] {
        writeln!(w, "accept,{name},{acc},{prop}")?;
    }
    line.clear();
    line.push_str("state,");
    line.push_str(&run.iterations_done.to_string());
    line.push(',');
    line.push_str(&run.rng_word_pos.to_string());
    write_state_fields(&mut line, &run.final_state);
    writeln!(w, "{line}")?;
    writeln!(w, "end")
}

fn parse_state_fields(
    fields: &[&str],
    n_genes: usize,
    order: usize,
    line_no: usize,
) -> Result<ModelState, SamplerError> {
    let nc = order - 1;
    let expect = 4 + n_genes * (2 + nc);
    if fields.len() != expect {
        return Err(SamplerError::Format(
            line_no,
            format!("expected {expect} state fields, found {}", fields.len()),
        ));
    }
    let num = |s: &str| -> Result<f64, SamplerError> {
        s.parse()
            .map_err(|_| SamplerError::Format(line_no, format!("bad float {s:?}")))
    };
    let phi = [
        num(fields[0])?,
        num(fields[1])?,
        num(fields[2])?,
        num(fields[3])?,
    ];
    let mut genes = Vec::with_capacity(n_genes);
    let mut pos = 4;
    for _ in 0..n_genes {
        let onset = num(fields[pos])?;
        let background = num(fields[pos + 1])?;
        let coeffs = fields[pos + 2..pos + 2 + nc]
            .iter()
            .map(|s| num(s))
            .collect::<Result<Vec<f64>, _>>()?;
        genes.push(GeneState {
            onset,
            coeffs,
            background,
        });
        pos += 2 + nc;
    }
    Ok(ModelState { phi, genes, order })
}

/// Read a checkpoint produced by [`write_checkpoint`].
pub fn read_checkpoint<R: BufRead>(r: R) -> Result<(ChainConfig, ChainRun), SamplerError> {
    let mut lines = r.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| SamplerError::Format(1, "empty file".into()))?;
    if first? != CHAIN_MAGIC {
        return Err(SamplerError::Format(1, format!("missing {CHAIN_MAGIC}")));
    }
    let mut config = ChainConfig {
        n_chains: 0,
        iterations: 0,
        burn_in: 0,
        thin: 1,
        seed: 0,
        order: 0,
    };
    let mut chain_index = 0usize;
    let mut stream_id = 0u64;
    let mut n_genes = 0usize;
    let mut draws = Vec::new();
    let mut accept = AcceptCounters::default();
    let mut final_state: Option<(u64, u128, ModelState)> = None;
    let mut saw_end = false;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line == "end" {
            saw_end = true;
            break;
        }
        let mut parts = line.split(',');
        let tag = parts.next().unwrap_or("");
        let rest: Vec<&str> = parts.collect();
        match tag {
            "meta" => {
                if rest.len() != 2 {
                    return Err(SamplerError::Format(line_no, "bad meta line".into()));
                }
                let val = rest[1];
                let parse_u64 = |v: &str| {
                    v.parse::<u64>()
                        .map_err(|_| SamplerError::Format(line_no, format!("bad integer {v:?}")))
                };
                match rest[0] {
                    "chain_index" => chain_index = parse_u64(val)? as usize,
                    "stream_id" => stream_id = parse_u64(val)?,
                    "seed" => config.seed = parse_u64(val)?,
                    "n_chains" => config.n_chains = parse_u64(val)? as usize,
                    "iterations" => config.iterations = parse_u64(val)?,
                    "burn_in" => config.burn_in = parse_u64(val)?,
                    "thin" => config.thin = parse_u64(val)?,
                    "order" => config.order = parse_u64(val)? as usize,
                    "n_genes" => n_genes = parse_u64(val)? as usize,
                    other => {
                        return Err(SamplerError::Format(
                            line_no,
                            format!("unknown meta key {other:?}"),
                        ))
                    }
                }
            }
            "columns" => {}
            "draw" => {
                let state = parse_state_fields(&rest[1..], n_genes, config.order, line_no)?;
                draws.push(state);
            }
            "accept" => {
                if rest.len() != 3 {
                    return Err(SamplerError::Format(line_no, "bad accept line".into()));
                }
                let acc = rest[1].parse::<u64>().map_err(|_| {
                    SamplerError::Format(line_no, format!("bad integer {:?}", rest[1]))
                })?;
                let prop = rest[2].parse::<u64>().map_err(|_| {
                    SamplerError::Format(line_no, format!("bad integer {:?}", rest[2]))
                })?;
                match rest[0] {
                    "phi12" => accept.phi12 = (acc, prop),
                    "phi34" => accept.phi34 = (acc, prop),
                    "onset" => accept.onset = (acc, prop),
                    "coeff" => accept.coeff = (acc, prop),
                    "background" => accept.background = (acc, prop),
                    other => {
                        return Err(SamplerError::Format(
                            line_no,
                            format!("unknown family {other:?}"),
                        ))
                    }
                }
            }
            "state" => {
                if rest.len() < 2 {
                    return Err(SamplerError::Format(line_no, "bad state line".into()));
                }
                let done = rest[0].parse::<u64>().map_err(|_| {
                    SamplerError::Format(line_no, format!("bad integer {:?}", rest[0]))
                })?;
                let pos = rest[1].parse::<u128>().map_err(|_| {
                    SamplerError::Format(line_no, format!("bad integer {:?}", rest[1]))
                })?;
                let state = parse_state_fields(&rest[2..], n_genes, config.order, line_no)?;
                final_state = Some((done, pos, state));
            }
            other => {
                return Err(SamplerError::Format(
                    line_no,
                    format!("unknown record {other:?}"),
                ));
            }
        }
    }
    if !saw_end {
        return Err(SamplerError::Format(0, "truncated checkpoint".into()));
    }
    let (iterations_done, rng_word_pos, final_state) = final_state
        .ok_or_else(|| SamplerError::Format(0, "checkpoint has no state record".into()))?;
    Ok((
        config,
        ChainRun {
            chain_index,
            stream_id,
            draws,
            accept,
            final_state,
            rng_word_pos,
            iterations_done,
        },
    ))
}
