//! The pipeline commands. Every command validates its own config subset,
//! reads what it needs from disk, and writes CSV/SVG artifacts under the
//! output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use bshape::analysis::{
    colocalization_probs, group_ton_tmax, kmeans_profiles, motif_onset_tests, neighbor_rank_tests,
    profile_grid, topk_odds_ratio, within_group_similarity, Alternative,
    GeneAnnotation, ProfileGrid,
};
use bshape::data::{
    parse_annotations, parse_dataset, simulate_dataset, write_dataset, CurveFamily, NoiseScale,
    SimSpec,
};
use bshape::inference::{
    bayes_factor, feature_draw, posterior_mode, posterior_predictive_check,
    posterior_shape_probability, prior_shape_probability, sample_prior_gene_curve,
    standardized_rss, Estimand, FeatureDraw,
};
use bshape::model::{Model, ModelState, TimeCourseDataset};
use bshape::rngs;
use bshape::sampler::{
    gelman_rubin, read_checkpoint, run_chains, write_checkpoint, ChainConfig, SampleStore,
};

use crate::config::RunConfig;
use crate::svg::{Plot, PALETTE};

/// Command failures carry the exit code the process should end with:
/// 2 for data/file problems, 3 for numerical/statistical failures.
#[derive(Debug)]
pub struct CmdError {
    pub exit_code: i32,
    pub message: String,
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CmdError {}

pub fn data_err(msg: impl Into<String>) -> CmdError {
    CmdError {
        exit_code: 2,
        message: msg.into(),
    }
}

pub fn numeric_err(msg: impl Into<String>) -> CmdError {
    CmdError {
        exit_code: 3,
        message: msg.into(),
    }
}

type CmdResult = Result<(), CmdError>;

// ───────────────────────────── shared helpers ────────────────────────────

fn ensure_out_dir(cfg: &RunConfig) -> Result<(), CmdError> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| data_err(format!("cannot create output dir {}: {e}", cfg.out.display())))
}

fn write_text(path: &Path, content: &str) -> Result<(), CmdError> {
    fs::write(path, content)
        .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))
}

fn load_dataset(cfg: &RunConfig) -> Result<TimeCourseDataset, CmdError> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| data_err("no dataset given; pass --data PATH (or data= in the config)"))?;
    let file = fs::File::open(path)
        .map_err(|e| data_err(format!("cannot open dataset {}: {e}", path.display())))?;
    parse_dataset(BufReader::new(file))
        .map_err(|e| data_err(format!("dataset {}: {e}", path.display())))
}

fn build_model(cfg: &RunConfig, ds: &TimeCourseDataset) -> Result<Model, CmdError> {
    let model = Model::from_dataset(ds, cfg.order)
        .map_err(|e| numeric_err(format!("model construction failed: {e}")))?;
    for &g in &model.degenerate {
        eprintln!(
            "warning: gene {:?} never rises above twice its background; excluded from the fit",
            ds.gene_ids[g]
        );
    }
    Ok(model)
}

fn chain_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.join("chains")
}

fn chain_config(cfg: &RunConfig) -> ChainConfig {
    ChainConfig {
        n_chains: cfg.chains,
        iterations: cfg.iters,
        burn_in: cfg.burnin,
        thin: cfg.thin,
        seed: cfg.seed,
        order: cfg.order,
    }
}

/// Read every chain checkpoint under `out/chains`. Errors name the
/// prerequisite command when nothing is there.
fn read_store(cfg: &RunConfig, model: &Model) -> Result<SampleStore, CmdError> {
    let dir = chain_dir(cfg);
    let mut paths: Vec<PathBuf> = match fs::read_dir(&dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("chain_") && n.ends_with(".csv"))
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    if paths.is_empty() {
        return Err(data_err(format!(
            "no chain files in {}; run `bshape fit` first",
            dir.display()
        )));
    }
    paths.sort();
    let mut chains = Vec::with_capacity(paths.len());
    let mut config = None;
    for path in &paths {
        let file = fs::File::open(path)
            .map_err(|e| data_err(format!("cannot open {}: {e}", path.display())))?;
        let (cfg_read, run) = read_checkpoint(BufReader::new(file))
            .map_err(|e| data_err(format!("{}: {e}", path.display())))?;
        if run.final_state.genes.len() != model.n_genes() {
            return Err(data_err(format!(
                "{}: checkpoint has {} genes but the dataset yields {}; re-run `bshape fit`",
                path.display(),
                run.final_state.genes.len(),
                model.n_genes()
            )));
        }
        config = Some(cfg_read);
        chains.push(run);
    }
    chains.sort_by_key(|c| c.chain_index);
    Ok(SampleStore {
        config: config.unwrap(),
        chains,
    })
}

/// Features of every retained draw for one gene, chain by chain.
fn feature_series(store: &SampleStore, gene: usize) -> Vec<Vec<FeatureDraw>> {
    store
        .chains
        .iter()
        .map(|c| c.draws.iter().map(|s| feature_draw(&s.genes[gene])).collect())
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => "NA".to_string(),
    }
}

/// The Bayes factor is undefined when the Monte Carlo prior probability
/// lands exactly on 0 or 1; those rows get an NA marker instead of
/// aborting the table.
fn fmt_bayes_factor(po: f64, pr: f64) -> String {
    match bayes_factor(po, pr) {
        Ok(bf) => bf.to_string(),
        Err(_) => "NA".to_string(),
    }
}

// ──────────────────────────────── simulate ───────────────────────────────

pub fn cmd_simulate(cfg: &RunConfig) -> CmdResult {
    ensure_out_dir(cfg)?;
    let family = match cfg.sim_family.as_str() {
        "bump" => CurveFamily::Bump {
            amplitude: (1.0, 2.0),
            peak: (0.3, 0.55),
            width_left: (0.3, 0.45),
            width_right: (0.1, 0.18),
        },
        "prior" => CurveFamily::PriorIid {
            coeff_scale: 2.0,
            alpha: 1.0,
            beta: 1.0,
        },
        "risefall" => CurveFamily::RiseFall {
            amplitude: (1.0, 2.0),
            start: (0.05, 0.15),
            end: (0.35, 0.5),
        },
        other => {
            return Err(data_err(format!(
                "unknown sim_family {other:?}; expected bump, prior or risefall"
            )))
        }
    };
    let spec = SimSpec {
        n_genes: cfg.sim_genes,
        design: (0..cfg.sim_points)
            .map(|i| i as f64 / (cfg.sim_points - 1) as f64)
            .collect(),
        replicates: cfg.sim_replicates,
        order: cfg.order,
        onset_range: (0.05, 0.35),
        mu_range: (0.05, 0.2),
        family,
        xi: cfg.sim_xi,
        noise: NoiseScale::RelMax(cfg.sim_noise_rel),
    };
    let mut rng = rngs::stream(cfg.seed, rngs::STREAM_SIMULATE);
    let (ds, truths) =
        simulate_dataset(&spec, &mut rng).map_err(|e| data_err(format!("simulate: {e}")))?;

    let data_path = cfg.out.join("data.csv");
    let file = fs::File::create(&data_path)
        .map_err(|e| data_err(format!("cannot write {}: {e}", data_path.display())))?;
    let mut w = BufWriter::new(file);
    write_dataset(&mut w, &ds).map_err(|e| data_err(format!("write data.csv: {e}")))?;
    drop(w);

    let mut truth_csv =
        String::from("gene_id,mu,sigma,ton,tmax,max,tslope,slope,l1norm,tend\n");
    for (g, truth) in truths.iter().enumerate() {
        match &truth.curve {
            Some(curve) => {
                let f = curve.features();
                let _ = writeln!(
                    truth_csv,
                    "{},{},{},{},{},{},{},{},{},{}",
                    ds.gene_ids[g],
                    truth.mu,
                    truth.sigma,
                    f.ton,
                    f.tmax,
                    f.max_val,
                    f.tslope,
                    f.slope,
                    f.l1_norm,
                    f.tend
                );
            }
            None => {
                let _ = writeln!(
                    truth_csv,
                    "{},{},{},NA,NA,NA,NA,NA,NA,NA",
                    ds.gene_ids[g], truth.mu, truth.sigma
                );
            }
        }
    }
    write_text(&cfg.out.join("truth.csv"), &truth_csv)?;
    println!(
        "simulated {} genes × {} time points × {} replicates → {}",
        cfg.sim_genes,
        cfg.sim_points,
        cfg.sim_replicates,
        data_path.display()
    );
    Ok(())
}

// ────────────────────────────────── fit ──────────────────────────────────

pub fn cmd_fit(cfg: &RunConfig) -> CmdResult {
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = build_model(cfg, &ds)?;
    let chain_cfg = chain_config(cfg);
    chain_cfg
        .validate()
        .map_err(|e| data_err(format!("chain schedule: {e}")))?;
    let store =
        run_chains(&chain_cfg, &model).map_err(|e| numeric_err(format!("sampler: {e}")))?;

    let dir = chain_dir(cfg);
    fs::create_dir_all(&dir)
        .map_err(|e| data_err(format!("cannot create {}: {e}", dir.display())))?;
    for run in &store.chains {
        let path = dir.join(format!("chain_{}.csv", run.chain_index));
        let file = fs::File::create(&path)
            .map_err(|e| data_err(format!("cannot write {}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_checkpoint(&mut w, &chain_cfg, run)
            .map_err(|e| data_err(format!("write {}: {e}", path.display())))?;
    }

    // model geometry and acceptance summary
    let mut gm = String::from("gene_id,xi,sigma2,onset_scale,coeff_scale,mu_bound,xtilde\n");
    for (g, spec) in model.specs.iter().enumerate() {
        let _ = writeln!(
            gm,
            "{},{},{},{},{},{},{}",
            model.gene_ids[g],
            model.variance.xi[g],
            model.variance.sigma2[g],
            spec.onset_scale,
            spec.coeff_scale,
            spec.mu_bound,
            spec.xtilde
        );
    }
    write_text(&cfg.out.join("gene_model.csv"), &gm)?;

    let mut summary = String::from("key,value\n");
    let _ = writeln!(summary, "n_genes,{}", model.n_genes());
    let _ = writeln!(summary, "excluded_degenerate,{}", model.degenerate.len());
    let _ = writeln!(summary, "order,{}", model.order);
    let _ = writeln!(summary, "seed,{}", cfg.seed);
    let _ = writeln!(summary, "chains,{}", cfg.chains);
    let _ = writeln!(summary, "iterations,{}", cfg.iters);
    let _ = writeln!(summary, "burn_in,{}", cfg.burnin);
    let _ = writeln!(summary, "thin,{}", cfg.thin);
    let _ = writeln!(summary, "retained_draws,{}", store.n_draws());
    for (i, &(lo, hi)) in model.phi_bounds.iter().enumerate() {
        let _ = writeln!(summary, "phi{}_bounds,{lo}..{hi}", i + 1);
    }
    for run in &store.chains {
        let a = run.accept;
        let rate = |x: (u64, u64)| x.0 as f64 / x.1.max(1) as f64;
        let _ = writeln!(
            summary,
            "chain{}_accept(phi12;phi34;onset;coeff;background),{};{};{};{};{}",
            run.chain_index,
            rate(a.phi12),
            rate(a.phi34),
            rate(a.onset),
            rate(a.coeff),
            rate(a.background)
        );
    }
    write_text(&cfg.out.join("fit_summary.csv"), &summary)?;
    println!(
        "fitted {} genes, {} retained draws → {}",
        model.n_genes(),
        store.n_draws(),
        dir.display()
    );
    Ok(())
}

// ──────────────────────────────── diagnose ───────────────────────────────

pub fn cmd_diagnose(cfg: &RunConfig) -> CmdResult {
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = build_model(cfg, &ds)?;
    let store = read_store(cfg, &model)?;
    if store.chains.len() < 2 {
        return Err(numeric_err(
            "convergence diagnostics need at least 2 chains; re-run `bshape fit` with --chains 2 or more",
        ));
    }
    let mut csv = String::from("gene_id,estimand,rhat,pass\n");
    let mut worst: f64 = 0.0;
    let mut n_pass = 0usize;
    let mut n_total = 0usize;
    for g in 0..model.n_genes() {
        let series = feature_series(&store, g);
        for est in Estimand::DIAGNOSTICS {
            let chains: Vec<Vec<f64>> = series
                .iter()
                .map(|c| c.iter().map(|d| est.pick(d)).collect())
                .collect();
            let rhat =
                gelman_rubin(&chains).map_err(|e| numeric_err(format!("Gelman–Rubin: {e}")))?;
            if rhat.is_infinite() {
                eprintln!(
                    "warning: degenerate chain for gene {:?} estimand {}",
                    model.gene_ids[g],
                    est.name()
                );
            }
            let pass = rhat < 1.1;
            n_total += 1;
            if pass {
                n_pass += 1;
            }
            worst = worst.max(rhat);
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                model.gene_ids[g],
                est.name(),
                rhat,
                if pass { 1 } else { 0 }
            );
        }
    }
    write_text(&cfg.out.join("diagnostics.csv"), &csv)?;
    println!(
        "{n_pass}/{n_total} estimand chains converged (R-hat < 1.1); worst R-hat {worst}"
    );
    Ok(())
}

// ──────────────────────────────── features ───────────────────────────────

pub fn cmd_features(cfg: &RunConfig) -> CmdResult {
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = build_model(cfg, &ds)?;
    let store = read_store(cfg, &model)?;
    let (mode, _) =
        posterior_mode(&store, &model).map_err(|e| numeric_err(format!("posterior mode: {e}")))?;
    let mode = mode.clone();

    let mut csv = String::from(
        "gene_id,estimand,post_mode,post_mean,post_stdv,post_min,post_max,prior_mean,prior_stdv,prior_min,prior_max\n",
    );
    let mut rng = rngs::stream(cfg.seed, rngs::STREAM_PRIOR_MC);
    for g in 0..model.n_genes() {
        let mode_draw = feature_draw(&mode.genes[g]);
        let posterior: Vec<FeatureDraw> = store
            .draws()
            .map(|s| feature_draw(&s.genes[g]))
            .collect();
        // prior sample for the same gene
        let prior: Vec<FeatureDraw> = (0..cfg.prior_draws)
            .map(|_| {
                let curve = sample_prior_gene_curve(&model, g, &mut rng);
                FeatureDraw {
                    features: curve.features(),
                    auc: curve.integral(0.0, 1.0).expect("ordered bounds"),
                }
            })
            .collect();
        for est in Estimand::FEATURES {
            let post: Vec<f64> = posterior.iter().map(|d| est.pick(d)).collect();
            let pri: Vec<f64> = prior.iter().map(|d| est.pick(d)).collect();
            let stats = |v: &[f64]| {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (mean, var.sqrt(), lo, hi)
            };
            let (pm, psd, plo, phi) = stats(&post);
            let (qm, qsd, qlo, qhi) = stats(&pri);
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{}",
                model.gene_ids[g],
                est.name(),
                est.pick(&mode_draw),
                pm,
                psd,
                plo,
                phi,
                qm,
                qsd,
                qlo,
                qhi
            );
        }
    }
    write_text(&cfg.out.join("features.csv"), &csv)?;
    println!("wrote feature posteriors for {} genes", model.n_genes());
    Ok(())
}


// ─────────────────────────────── test-shape ──────────────────────────────

pub fn cmd_test_shape(cfg: &RunConfig) -> CmdResult {
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = build_model(cfg, &ds)?;
    let store = read_store(cfg, &model)?;

    let mut rng = rngs::stream(cfg.seed, rngs::STREAM_PRIOR_MC);
    // prior probabilities depend on the gene only through its onset scale
    // (unimodality is invariant to the coefficient scale), so cache by X̂
    let mut prior_cache: BTreeMap<(u64, u64), (f64, f64)> = BTreeMap::new();
    let mut csv = String::from("gene_id,hypothesis,tau,po,pr,pr_se,po_over_pr,bayes_factor\n");
    for g in 0..model.n_genes() {
        let scale_key = model.specs[g].onset_scale.to_bits();
        for &tau in &cfg.tau {
            let po = posterior_shape_probability(&store, g, |c| c.is_unimodal_on(tau))
                .map_err(|e| numeric_err(format!("posterior probability: {e}")))?;
            let key = (scale_key, tau.to_bits());
            let (pr, pr_se) = match prior_cache.get(&key) {
                Some(&v) => v,
                None => {
                    let v = prior_shape_probability(
                        &model,
                        g,
                        |c| c.is_unimodal_on(tau),
                        cfg.prior_draws,
                        &mut rng,
                    );
                    prior_cache.insert(key, v);
                    v
                }
            };
            let _ = writeln!(
                csv,
                "{},unimodal_on,{},{},{},{},{},{}",
                model.gene_ids[g],
                tau,
                po,
                pr,
                pr_se,
                po / pr,
                fmt_bayes_factor(po, pr)
            );
        }
        // increasing before the global maximum: gene-independent prior
        let po = posterior_shape_probability(&store, g, |c| c.increasing_before_max())
            .map_err(|e| numeric_err(format!("posterior probability: {e}")))?;
        let key = (0u64, u64::MAX);
        let (pr, pr_se) = match prior_cache.get(&key) {
            Some(&v) => v,
            None => {
                let v = prior_shape_probability(
                    &model,
                    g,
                    |c| c.increasing_before_max(),
                    cfg.prior_draws,
                    &mut rng,
                );
                prior_cache.insert(key, v);
                v
            }
        };
        let _ = writeln!(
            csv,
            "{},increasing_before_max,,{},{},{},{},{}",
            model.gene_ids[g],
            po,
            pr,
            pr_se,
            po / pr,
            fmt_bayes_factor(po, pr)
        );
    }
    write_text(&cfg.out.join("shape_tests.csv"), &csv)?;
    println!(
        "wrote shape tests for {} genes over {} tau values",
        model.n_genes(),
        cfg.tau.len()
    );
    Ok(())
}

// ───────────────────────────────── cluster ───────────────────────────────

struct ClusterArtifacts {
    profile_labels: Vec<usize>,
    mode: ModelState,
    grids: Vec<ProfileGrid>,
}

fn compute_clusters(
    cfg: &RunConfig,
    model: &Model,
    store: &SampleStore,
) -> Result<ClusterArtifacts, CmdError> {
    let (mode, _) =
        posterior_mode(store, model).map_err(|e| numeric_err(format!("posterior mode: {e}")))?;
    let mode = mode.clone();
    let grids: Vec<ProfileGrid> = mode
        .genes
        .iter()
        .enumerate()
        .map(|(g, gene)| profile_grid(&gene.curve(), g, cfg.grid))
        .collect();
    let profile_labels = kmeans_profiles(&grids, cfg.k_profiles.min(model.n_genes()), cfg.seed)
        .map_err(|e| numeric_err(format!("profile clustering: {e}")))?;
    Ok(ClusterArtifacts {
        profile_labels,
        mode,
        grids,
    })
}

pub fn cmd_cluster(cfg: &RunConfig) -> CmdResult {
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = build_model(cfg, &ds)?;
    let store = read_store(cfg, &model)?;
    write_cluster_outputs(cfg, &model, &store)?;
    Ok(())
}

fn write_cluster_outputs(
    cfg: &RunConfig,
    model: &Model,
    store: &SampleStore,
) -> Result<ClusterArtifacts, CmdError> {
    let art = compute_clusters(cfg, model, store)?;

    let mut csv = String::from("gene_id,cluster\n");
    for (g, &label) in art.profile_labels.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", model.gene_ids[g], label);
    }
    write_text(&cfg.out.join("profile_clusters.csv"), &csv)?;

    // (Ton, Tmax) groups from the posterior-mode features
    let features: Vec<(f64, f64)> = art
        .mode
        .genes
        .iter()
        .map(|gene| {
            let f = gene.curve().features();
            (f.ton, f.tmax)
        })
        .collect();
    let groups = group_ton_tmax(&features, cfg.k_groups.min(model.n_genes()), cfg.seed)
        .map_err(|e| numeric_err(format!("onset/peak grouping: {e}")))?;
    let mut csv = String::from("gene_id,group,ton,tmax\n");
    for (g, &label) in groups.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            model.gene_ids[g], label, features[g].0, features[g].1
        );
    }
    write_text(&cfg.out.join("ton_tmax_groups.csv"), &csv)?;

    // per-group pairwise similarity over the onset/peak groups
    let sims = within_group_similarity(&groups, &art.grids)
        .map_err(|e| numeric_err(format!("group similarity: {e}")))?;
    let mut csv = String::from("group,n_genes,mean,stdv\n");
    for row in &sims {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            row.group.map_or("all".to_string(), |g| g.to_string()),
            row.n_genes,
            fmt_opt(row.mean),
            fmt_opt(row.stdv)
        );
    }
    write_text(&cfg.out.join("group_similarity.csv"), &csv)?;

    // scatter of (Ton, Tmax) colored by group
    let mut plot = Plot::new(480.0, 360.0, (0.0, 1.0), (0.0, 1.0));
    plot.title("onset vs time-to-maximum groups");
    plot.axes("Ton", "Tmax", 5);
    for (g, &(ton, tmax)) in features.iter().enumerate() {
        plot.circle(ton, tmax, 3.0, PALETTE[groups[g] % PALETTE.len()]);
    }
    write_text(&cfg.out.join("ton_tmax.svg"), &plot.finish())?;

    // posterior-mode profiles colored by expression cluster
    let y_max = art
        .grids
        .iter()
        .flat_map(|p| p.values.iter().cloned())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let mut plot = Plot::new(560.0, 360.0, (0.0, 1.0), (0.0, y_max * 1.05));
    plot.title("posterior-mode profiles by cluster");
    plot.axes("t", "expression", 5);
    for (g, grid) in art.grids.iter().enumerate() {
        let pts: Vec<(f64, f64)> = grid
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| (j as f64 / (grid.values.len() - 1) as f64, v))
            .collect();
        plot.polyline(&pts, PALETTE[art.profile_labels[g] % PALETTE.len()], 1.2);
    }
    write_text(&cfg.out.join("profiles.svg"), &plot.finish())?;

    println!(
        "clustered {} genes into {} profile clusters and {} onset/peak groups",
        model.n_genes(),
        cfg.k_profiles.min(model.n_genes()),
        cfg.k_groups.min(model.n_genes())
    );
    Ok(art)
}

// ────────────────────────────────── assoc ────────────────────────────────

fn load_annotations(cfg: &RunConfig) -> Result<Vec<GeneAnnotation>, CmdError> {
    let path = cfg.annotations.as_ref().ok_or_else(|| {
        data_err("no annotation file given; pass --annotations PATH (or annotations= in the config)")
    })?;
    let file = fs::File::open(path)
        .map_err(|e| data_err(format!("cannot open annotations {}: {e}", path.display())))?;
    parse_annotations(BufReader::new(file))
        .map_err(|e| data_err(format!("annotations {}: {e}", path.display())))
}

pub fn cmd_assoc(cfg: &RunConfig) -> CmdResult {
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = build_model(cfg, &ds)?;
    let store = read_store(cfg, &model)?;
    let annotations = load_annotations(cfg)?;
    write_assoc_outputs(cfg, &model, &store, &annotations)
}

fn write_assoc_outputs(
    cfg: &RunConfig,
    model: &Model,
    store: &SampleStore,
    annotations: &[GeneAnnotation],
) -> CmdResult {
    let art = compute_clusters(cfg, model, store)?;

    // keep annotations for genes present in the model, in model order
    let mut by_id: BTreeMap<&str, &GeneAnnotation> = BTreeMap::new();
    for a in annotations {
        by_id.insert(a.gene_id.as_str(), a);
    }
    let mut kept: Vec<&GeneAnnotation> = Vec::new();
    for id in &model.gene_ids {
        match by_id.get(id.as_str()) {
            Some(a) => kept.push(a),
            None => {
                return Err(data_err(format!(
                    "annotation file has no entry for gene {id:?}"
                )))
            }
        }
    }
    // genome order restricted to the kept genes: sort model indices by
    // genome position
    let mut genome_order: Vec<usize> = (0..kept.len()).collect();
    genome_order.sort_by_key(|&g| kept[g].genome_pos);

    // motif/onset tests over posterior-mode onsets
    let onsets: Vec<(String, f64)> = art
        .mode
        .genes
        .iter()
        .enumerate()
        .map(|(g, gene)| (model.gene_ids[g].clone(), gene.onset))
        .collect();
    let kept_owned: Vec<GeneAnnotation> = kept.iter().map(|a| (*a).clone()).collect();
    let (rows, skipped) = motif_onset_tests(&kept_owned, &onsets)
        .map_err(|e| numeric_err(format!("motif tests: {e}")))?;
    for motif in &skipped {
        eprintln!("warning: motif class {motif} has an empty side; skipped");
    }
    let mut csv = String::from("motif,n_with,n_without,z,p\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{},{}", r.motif, r.n_with, r.n_without, r.z, r.p);
    }
    write_text(&cfg.out.join("motif_tests.csv"), &csv)?;

    // colocalization of the profile clusters along the genome
    let mut csv = String::from("n,p_random,p_neighbor\n");
    for n in 2..=5usize.min(kept.len()) {
        let (p_random, p_neighbor) =
            colocalization_probs(&art.profile_labels, &genome_order, n)
                .map_err(|e| numeric_err(format!("colocalization: {e}")))?;
        let _ = writeln!(csv, "{n},{p_random},{p_neighbor}");
    }
    write_text(&cfg.out.join("colocalization.csv"), &csv)?;

    // near-versus-far rank-correlation tests
    let g = kept.len();
    let max_radius = (g - 1) / 2;
    let mut csv = String::from("z1,z2,z,p,n_near,n_far\n");
    let mut z1 = 2usize;
    while z1 + 10 <= max_radius {
        let z2 = z1 + 10;
        match neighbor_rank_tests(&art.grids, &genome_order, z1, z2, true) {
            Ok(res) => {
                let _ = writeln!(csv, "{z1},{z2},{},{},{},{}", res.z, res.p, res.n_near, res.n_far);
            }
            Err(e) => eprintln!("warning: neighbor test Rn({z1}) vs RCn({z2}) skipped: {e}"),
        }
        z1 += 2;
    }
    write_text(&cfg.out.join("neighbor_tests.csv"), &csv)?;

    // total-expression (L1-norm) versus the structural class
    let l1: Vec<f64> = art
        .mode
        .genes
        .iter()
        .map(|gene| gene.curve().features().l1_norm)
        .collect();
    let labels: Vec<bool> = kept.iter().map(|a| a.structural).collect();
    let mut csv = String::from("m,odds_ratio,labeled_top,unlabeled_top,labeled_rest,unlabeled_rest,degenerate\n");
    for m in [5usize, 10, 20] {
        if m >= g {
            continue;
        }
        match topk_odds_ratio(&l1, &labels, m) {
            Ok(or) => {
                let _ = writeln!(
                    csv,
                    "{m},{},{},{},{},{},{}",
                    or.odds,
                    or.counts.0,
                    or.counts.1,
                    or.counts.2,
                    or.counts.3,
                    if or.degenerate { 1 } else { 0 }
                );
            }
            Err(e) => eprintln!("warning: odds ratio at m={m} skipped: {e}"),
        }
    }
    write_text(&cfg.out.join("l1_odds.csv"), &csv)?;

    let structural: Vec<f64> = l1
        .iter()
        .zip(&labels)
        .filter(|(_, &s)| s)
        .map(|(&v, _)| v)
        .collect();
    let other: Vec<f64> = l1
        .iter()
        .zip(&labels)
        .filter(|(_, &s)| !s)
        .map(|(&v, _)| v)
        .collect();
    let mut csv = String::from("n_structural,n_other,z,p\n");
    if !structural.is_empty() && !other.is_empty() {
        let res = wilcoxon_greater(&structural, &other)?;
        let _ = writeln!(csv, "{},{},{},{}", structural.len(), other.len(), res.0, res.1);
    } else {
        eprintln!("warning: structural comparison skipped (one side empty)");
    }
    write_text(&cfg.out.join("structural_wilcoxon.csv"), &csv)?;

    println!("wrote association tables for {} annotated genes", g);
    Ok(())
}

fn wilcoxon_greater(a: &[f64], b: &[f64]) -> Result<(f64, f64), CmdError> {
    bshape::analysis::wilcoxon_rank_sum(a, b, Alternative::Greater)
        .map(|r| (r.z, r.p))
        .map_err(|e| numeric_err(format!("rank-sum test: {e}")))
}

// ────────────────────────────────── report ───────────────────────────────

pub fn cmd_report(cfg: &RunConfig) -> CmdResult {
    ensure_out_dir(cfg)?;
    let ds = load_dataset(cfg)?;
    let model = build_model(cfg, &ds)?;
    let store = read_store(cfg, &model)?;

    cmd_diagnose(cfg)?;
    cmd_features(cfg)?;
    cmd_test_shape(cfg)?;
    let art = write_cluster_outputs(cfg, &model, &store)?;

    match &cfg.annotations {
        Some(_) => {
            let annotations = load_annotations(cfg)?;
            write_assoc_outputs(cfg, &model, &store, &annotations)?;
        }
        None => {
            println!("no annotation file given; association tables skipped");
        }
    }

    // per-gene predictive checks
    let mut rng = rngs::stream(cfg.seed, rngs::STREAM_PPC);
    let mut csv = String::from("gene_id,ppp\n");
    for g in 0..model.n_genes() {
        let observed = &ds.values[model.specs[g].gene_index];
        let ppp = posterior_predictive_check(&store, &model, observed, g, standardized_rss, &mut rng)
            .map_err(|e| numeric_err(format!("predictive check: {e}")))?;
        let _ = writeln!(csv, "{},{}", model.gene_ids[g], ppp);
    }
    write_text(&cfg.out.join("predictive_checks.csv"), &csv)?;

    // per-gene fit plots: data overlaid with the posterior-mode curve
    let plot_dir = cfg.out.join("plots");
    fs::create_dir_all(&plot_dir)
        .map_err(|e| data_err(format!("cannot create {}: {e}", plot_dir.display())))?;
    for g in 0..model.n_genes() {
        let gene = &art.mode.genes[g];
        let curve = gene.curve();
        let orig = model.specs[g].gene_index;
        let mut y_max = 0.0f64;
        for block in &ds.values[orig] {
            for &v in block {
                y_max = y_max.max(v);
            }
        }
        y_max = y_max.max(curve.features().max_val + gene.background) * 1.05;
        let mut plot = Plot::new(480.0, 320.0, (0.0, 1.0), (0.0, y_max.max(1e-9)));
        plot.title(&model.gene_ids[g]);
        plot.axes("t", "intensity", 5);
        let pts: Vec<(f64, f64)> = (0..=256)
            .map(|j| {
                let t = j as f64 / 256.0;
                (t, curve.eval(t) + gene.background)
            })
            .collect();
        plot.polyline(&pts, PALETTE[0], 1.6);
        for (k, &x) in ds.design_points.iter().enumerate() {
            for &y in &ds.values[orig][k] {
                plot.circle(x, y.max(0.0), 2.0, PALETTE[1]);
            }
        }
        plot.label(0.02, y_max * 0.95, "mode + background", PALETTE[0]);
        write_text(
            &plot_dir.join(format!("{}.svg", model.gene_ids[g])),
            &plot.finish(),
        )?;
    }
    println!("report complete under {}", cfg.out.display());
    Ok(())
}
