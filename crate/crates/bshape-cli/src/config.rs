//! Run configuration: defaults, overridden by a flat `key=value` config
//! file, overridden by command-line flags (flags win).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Everything a pipeline run needs. Field names double as config-file keys
/// (see `Config file` in the README).
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub chains: usize,
    pub iters: u64,
    pub burnin: u64,
    pub thin: u64,
    pub order: usize,
    pub k_profiles: usize,
    pub k_groups: usize,
    pub tau: Vec<f64>,
    pub grid: usize,
    pub prior_draws: usize,
    // synthetic-data knobs (simulate command)
    pub sim_genes: usize,
    pub sim_points: usize,
    pub sim_replicates: usize,
    pub sim_xi: u8,
    pub sim_noise_rel: f64,
    pub sim_family: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            annotations: None,
            out: PathBuf::from("out"),
            seed: 0,
            chains: 5,
            iters: 200_000,
            burnin: 20_000,
            thin: 100,
            order: 15,
            k_profiles: 5,
            k_groups: 6,
            tau: vec![0.6667, 0.8333, 1.0],
            grid: 256,
            prior_draws: 2000,
            sim_genes: 10,
            sim_points: 16,
            sim_replicates: 4,
            sim_xi: 0,
            sim_noise_rel: 0.05,
            sim_family: "bump".to_string(),
        }
    }
}

/// Parse a flat `key=value` config file; `#` starts a comment.
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", idx + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

impl RunConfig {
    /// Overlay config-file values onto the defaults.
    pub fn apply_file(&mut self, map: &BTreeMap<String, String>) -> Result<(), String> {
        fn set<T: std::str::FromStr>(
            slot: &mut T,
            map: &BTreeMap<String, String>,
            key: &str,
        ) -> Result<(), String> {
            if let Some(v) = map.get(key) {
                *slot = v
                    .parse()
                    .map_err(|_| format!("config key {key}: cannot parse {v:?}"))?;
            }
            Ok(())
        }
        if let Some(v) = map.get("data") {
            self.data = Some(PathBuf::from(v));
        }
        if let Some(v) = map.get("annotations") {
            self.annotations = Some(PathBuf::from(v));
        }
        if let Some(v) = map.get("out") {
            self.out = PathBuf::from(v);
        }
        set(&mut self.seed, map, "seed")?;
        set(&mut self.chains, map, "chains")?;
        set(&mut self.iters, map, "iters")?;
        set(&mut self.burnin, map, "burnin")?;
        set(&mut self.thin, map, "thin")?;
        set(&mut self.order, map, "order")?;
        set(&mut self.k_profiles, map, "k_profiles")?;
        set(&mut self.k_groups, map, "k_groups")?;
        set(&mut self.grid, map, "grid")?;
        set(&mut self.prior_draws, map, "prior_draws")?;
        set(&mut self.sim_genes, map, "sim_genes")?;
        set(&mut self.sim_points, map, "sim_points")?;
        set(&mut self.sim_replicates, map, "sim_replicates")?;
        set(&mut self.sim_xi, map, "sim_xi")?;
        set(&mut self.sim_noise_rel, map, "sim_noise_rel")?;
        if let Some(v) = map.get("sim_family") {
            self.sim_family = v.clone();
        }
        if let Some(v) = map.get("tau") {
            self.tau = v
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("config key tau: cannot parse {t:?}"))
                })
                .collect::<Result<Vec<f64>, String>>()?;
        }
        Ok(())
    }

    /// Validate the knob ranges that every command relies on.
    pub fn validate(&self) -> Result<(), String> {
        if self.order < 3 {
            return Err("order must be at least 3".into());
        }
        if self.thin == 0 {
            return Err("thin must be at least 1".into());
        }
        if self.burnin >= self.iters {
            return Err("burnin must be below iters".into());
        }
        if self.chains == 0 {
            return Err("chains must be at least 1".into());
        }
        if self.grid < 64 {
            return Err("grid must be at least 64".into());
        }
        if self.prior_draws < 100 {
            return Err("prior-draws must be at least 100".into());
        }
        if self
            .tau
            .iter()
            .any(|&t| !(t > 0.0 && t <= 1.0) || !t.is_finite())
        {
            return Err("tau values must lie in (0, 1]".into());
        }
        if self.tau.is_empty() {
            return Err("tau list must not be empty".into());
        }
        Ok(())
    }
}
