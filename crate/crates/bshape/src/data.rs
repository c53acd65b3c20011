//! Dataset ingestion, synthetic data generation and annotation files.
//!
//! The dataset format is CSV with header `gene_id,time,replicate,intensity`.
//! Times may be decimals (`1.5`) or fractions (`1/3`) in any unit; they are
//! rescaled to `[0, 1]` by an exact rational division by the largest time
//! before any float conversion, so rational hour grids land on their exact
//! design points.

use std::collections::BTreeMap;
use std::io::BufRead;

use rand::Rng;
use thiserror::Error;

use crate::analysis::GeneAnnotation;
use crate::model::{ModelError, TimeCourseDataset};
use crate::rngs;
use crate::Curve;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Schema(String),
    #[error("simulation spec invalid: {0}")]
    BadSimSpec(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Exact nonnegative rational, reduced, for time rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Ratio {
    // ordering works because both are kept nonnegative and reduced with
    // cross-multiplication-safe magnitudes (≤ 10^18)
    num: i128,
    den: i128,
}

impl Ratio {
    fn new(num: i128, den: i128) -> Ratio {
        debug_assert!(den > 0);
        let g = gcd(num.abs(), den);
        Ratio {
            num: num / g.max(1),
            den: den / g.max(1),
        }
    }

    /// Parse `"12"`, `"1.5"` or `"1/3"`.
    fn parse(s: &str) -> Option<Ratio> {
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let num: i128 = p.trim().parse().ok()?;
            let den: i128 = q.trim().parse().ok()?;
            if den <= 0 || num < 0 {
                return None;
            }
            return Some(Ratio::new(num, den));
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if frac_part.len() > 18 || int_part.len() > 18 {
            return None;
        }
        let int_val: i128 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().ok()?
        };
        if int_val < 0 {
            return None;
        }
        let mut num = int_val;
        let mut den = 1i128;
        for ch in frac_part.chars() {
            let d = ch.to_digit(10)? as i128;
            num = num.checked_mul(10)?.checked_add(d)?;
            den = den.checked_mul(10)?;
        }
        Some(Ratio::new(num, den))
    }

    fn div(self, other: Ratio) -> Option<Ratio> {
        if other.num == 0 {
            return None;
        }
        let num = self.num.checked_mul(other.den)?;
        let den = self.den.checked_mul(other.num)?;
        Some(Ratio::new(num, den))
    }

    fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn is_one(self) -> bool {
        self.num == self.den
    }
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Ratio {
    /// Numeric order by cross-multiplication (the derived `Ord` is only a
    /// structural key order for map lookups). Magnitudes stay ≤ 10^18, so
    /// the products fit i128.
    fn cmp_value(&self, other: &Ratio) -> std::cmp::Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

const DATASET_HEADER: &str = "gene_id,time,replicate,intensity";

/// Parse a time-course dataset. Validates a rectangular replicate
/// structure: every gene must carry the same set of time points, with the
/// same per-time replicate count for every gene.
pub fn parse_dataset<R: BufRead>(reader: R) -> Result<TimeCourseDataset, DataError> {
    struct Row {
        line: usize,
        gene: String,
        time: Ratio,
        /// plain f64 parse of the time field (falls back to the ratio for
        /// fraction syntax)
        time_direct: f64,
        replicate: String,
        intensity: f64,
    }
    let mut rows: Vec<Row> = Vec::new();
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(DataError::Schema("empty dataset file".into())),
    };
    if header.trim() != DATASET_HEADER {
        return Err(DataError::Schema(format!(
            "expected header {DATASET_HEADER:?}, found {header:?}"
        )));
    }
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(line_no, format!("expected 4 fields, found {}", fields.len())));
        }
        let time = Ratio::parse(fields[1])
            .ok_or_else(|| parse_err(line_no, format!("bad time {:?}", fields[1])))?;
        let time_direct = fields[1].trim().parse::<f64>().unwrap_or_else(|_| time.to_f64());
        let intensity: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("non-numeric intensity {:?}", fields[3])))?;
        if !intensity.is_finite() {
            return Err(parse_err(line_no, "non-finite intensity"));
        }
        rows.push(Row {
            line: line_no,
            gene: fields[0].trim().to_string(),
            time,
            time_direct,
            replicate: fields[2].trim().to_string(),
            intensity,
        });
    }
    if rows.is_empty() {
        return Err(DataError::Schema("dataset has no data rows".into()));
    }

    // time axis: sorted unique rationals, rescaled by the maximum
    let mut times: Vec<Ratio> = rows.iter().map(|r| r.time).collect();
    times.sort_by(|a, b| a.cmp_value(b));
    times.dedup();
    let max_time = *times.last().unwrap();
    if max_time.num == 0 {
        return Err(DataError::Schema("all time points are zero".into()));
    }
    // direct f64 parses of the raw time strings, used verbatim when the
    // grid is already normalized (the ratio→f64 reconversion of a long
    // decimal can land one ulp off its shortest-round-trip string)
    let mut direct: BTreeMap<Ratio, f64> = BTreeMap::new();
    for r in &rows {
        direct.entry(r.time).or_insert(r.time_direct);
    }
    let design_points: Vec<f64> = times
        .iter()
        .map(|t| {
            if max_time.is_one() {
                // already normalized: keep the parsed values bit for bit
                direct[t]
            } else {
                t.div(max_time).map(Ratio::to_f64).unwrap_or(f64::NAN)
            }
        })
        .collect();
    if design_points.iter().any(|x| !x.is_finite()) {
        return Err(DataError::Schema("time rescaling overflowed".into()));
    }
    let time_index: BTreeMap<Ratio, usize> =
        times.iter().enumerate().map(|(i, &t)| (t, i)).collect();

    // genes in order of first appearance
    let mut gene_ids: Vec<String> = Vec::new();
    let mut gene_index: BTreeMap<String, usize> = BTreeMap::new();
    for r in &rows {
        if !gene_index.contains_key(&r.gene) {
            gene_index.insert(r.gene.clone(), gene_ids.len());
            gene_ids.push(r.gene.clone());
        }
    }

    // collect replicates per (gene, time); replicate ids must be unique
    let mut cells: Vec<Vec<Vec<(String, f64, usize)>>> =
        vec![vec![Vec::new(); times.len()]; gene_ids.len()];
    for r in &rows {
        let g = gene_index[&r.gene];
        let k = time_index[&r.time];
        let cell = &mut cells[g][k];
        if cell.iter().any(|(id, _, _)| *id == r.replicate) {
            return Err(parse_err(
                r.line,
                format!(
                    "duplicate replicate {:?} for gene {:?} at time index {k}",
                    r.replicate, r.gene
                ),
            ));
        }
        cell.push((r.replicate.clone(), r.intensity, r.line));
    }

    // replicate counts per time point must agree across genes
    let mut replicate_counts = vec![0usize; times.len()];
    for (k, count) in replicate_counts.iter_mut().enumerate() {
        *count = cells[0][k].len();
        for (g, gene_cells) in cells.iter().enumerate() {
            if gene_cells[k].len() != *count {
                let line = gene_cells[k]
                    .first()
                    .map(|(_, _, l)| *l)
                    .unwrap_or(rows[0].line);
                return Err(parse_err(
                    line,
                    format!(
                        "gene {:?} has {} replicates at time index {k}, expected {}",
                        gene_ids[g],
                        gene_cells[k].len(),
                        count
                    ),
                ));
            }
        }
        if *count == 0 {
            return Err(DataError::Schema(format!(
                "no observations at time index {k}"
            )));
        }
    }

    // order replicates numerically when possible, lexicographically otherwise
    let values: Vec<Vec<Vec<f64>>> = cells
        .into_iter()
        .map(|gene_cells| {
            gene_cells
                .into_iter()
                .map(|mut cell| {
                    cell.sort_by(|(a, _, _), (b, _, _)| match (a.parse::<u64>(), b.parse::<u64>())
                    {
                        (Ok(x), Ok(y)) => x.cmp(&y),
                        _ => a.cmp(b),
                    });
                    cell.into_iter().map(|(_, v, _)| v).collect()
                })
                .collect()
        })
        .collect();

    TimeCourseDataset::new(design_points, replicate_counts, values, gene_ids).map_err(Into::into)
}

/// Write a dataset in the `parse_dataset` schema (normalized times; a
/// write/parse round trip reproduces the dataset exactly).
pub fn write_dataset<W: std::io::Write>(
    w: &mut W,
    ds: &TimeCourseDataset,
) -> Result<(), std::io::Error> {
    writeln!(w, "{DATASET_HEADER}")?;
    for (g, gene) in ds.gene_ids.iter().enumerate() {
        for (k, &t) in ds.design_points.iter().enumerate() {
            for (j, v) in ds.values[g][k].iter().enumerate() {
                writeln!(w, "{gene},{t},{},{v}", j + 1)?;
            }
        }
    }
    Ok(())
}

/// True curve families for the synthetic generator.
#[derive(Debug, Clone)]
pub enum CurveFamily {
    /// i.i.d. scaled-beta coefficients: the model's own prior shape.
    PriorIid {
        coeff_scale: f64,
        alpha: f64,
        beta: f64,
    },
    /// An asymmetric bump in coefficient space: wide left shoulder (steep,
    /// identifiable takeoff at the onset) and a narrow right flank
    /// (localized peak). Ranges are sampled uniformly per gene.
    Bump {
        amplitude: (f64, f64),
        peak: (f64, f64),
        width_left: (f64, f64),
        width_right: (f64, f64),
    },
    /// Rises from zero and returns to exactly zero before t = 1 — outside
    /// the zero-then-positive class; used to exercise predictive checks.
    RiseFall {
        amplitude: (f64, f64),
        start: (f64, f64),
        end: (f64, f64),
    },
}

/// Noise scale: per-gene σ_g as a fraction of the curve maximum, or fixed.
#[derive(Debug, Clone, Copy)]
pub enum NoiseScale {
    RelMax(f64),
    Absolute(f64),
}

/// Generator configuration implementing the observation model
/// `Y = F(X_k) + μ + ε`, `ε ~ Normal(0, σ²(F+μ)^ξ)`.
#[derive(Debug, Clone)]
pub struct SimSpec {
    pub n_genes: usize,
    pub design: Vec<f64>,
    pub replicates: usize,
    pub order: usize,
    pub onset_range: (f64, f64),
    pub mu_range: (f64, f64),
    pub family: CurveFamily,
    pub xi: u8,
    pub noise: NoiseScale,
}

impl SimSpec {
    /// The 16-point, 4-replicate bump-family configuration used by the
    /// recovery experiments.
    pub fn recovery_default(n_genes: usize) -> SimSpec {
        SimSpec {
            n_genes,
            design: (0..16).map(|i| i as f64 / 15.0).collect(),
            replicates: 4,
            order: 15,
            onset_range: (0.05, 0.35),
            mu_range: (0.05, 0.2),
            family: CurveFamily::Bump {
                amplitude: (1.0, 2.0),
                peak: (0.3, 0.55),
                width_left: (0.3, 0.45),
                width_right: (0.1, 0.18),
            },
            xi: 0,
            noise: NoiseScale::RelMax(0.05),
        }
    }
}

/// Ground truth for one simulated gene. `curve` is present for the families
/// inside the shape class; `fvals` always carries F at the design points.
#[derive(Debug, Clone)]
pub struct SimTruth {
    pub curve: Option<Curve>,
    pub fvals: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

/// Draw a dataset plus ground truth from the generator.
pub fn simulate_dataset<R: Rng>(
    spec: &SimSpec,
    rng: &mut R,
) -> Result<(TimeCourseDataset, Vec<SimTruth>), DataError> {
    if spec.n_genes == 0 {
        return Err(DataError::BadSimSpec("need at least one gene"));
    }
    if spec.replicates == 0 {
        return Err(DataError::BadSimSpec("need at least one replicate"));
    }
    if spec.order < 3 {
        return Err(DataError::BadSimSpec("order must be ≥ 3"));
    }
    match spec.noise {
        NoiseScale::RelMax(s) | NoiseScale::Absolute(s) if s <= 0.0 => {
            return Err(DataError::BadSimSpec("noise scale must be positive"))
        }
        _ => {}
    }
    let mut values = Vec::with_capacity(spec.n_genes);
    let mut truths = Vec::with_capacity(spec.n_genes);
    let mut gene_ids = Vec::with_capacity(spec.n_genes);
    for g in 0..spec.n_genes {
        let truth = draw_truth(spec, rng)?;
        let blocks: Vec<Vec<f64>> = truth
            .fvals
            .iter()
            .map(|&f| {
                (0..spec.replicates)
                    .map(|_| {
                        let mean = f + truth.mu;
                        let sd = truth.sigma * crate::model::plugin_base(mean, spec.xi).sqrt();
                        mean + sd * rngs::standard_normal(rng)
                    })
                    .collect()
            })
            .collect();
        values.push(blocks);
        truths.push(truth);
        gene_ids.push(format!("gene{:03}", g));
    }
    let ds = TimeCourseDataset::new(
        spec.design.clone(),
        vec![spec.replicates; spec.design.len()],
        values,
        gene_ids,
    )?;
    Ok((ds, truths))
}

fn draw_truth<R: Rng>(spec: &SimSpec, rng: &mut R) -> Result<SimTruth, DataError> {
    let mu = rngs::uniform(rng, spec.mu_range.0, spec.mu_range.1);
    let (curve, fvals, max_val) = match &spec.family {
        CurveFamily::PriorIid {
            coeff_scale,
            alpha,
            beta,
        } => {
            let onset = rngs::uniform(rng, spec.onset_range.0, spec.onset_range.1);
            let coeffs: Vec<f64> = (0..spec.order - 1)
                .map(|_| coeff_scale * rngs::beta(rng, *alpha, *beta))
                .collect();
            let curve = Curve::new(onset, coeffs)
                .map_err(|_| DataError::BadSimSpec("prior-iid family drew an invalid curve"))?;
            let fvals: Vec<f64> = spec.design.iter().map(|&x| curve.eval(x)).collect();
            let max_val = curve.features().max_val;
            (Some(curve), fvals, max_val)
        }
        CurveFamily::Bump {
            amplitude,
            peak,
            width_left,
            width_right,
        } => {
            let onset = rngs::uniform(rng, spec.onset_range.0, spec.onset_range.1);
            let amp = rngs::uniform(rng, amplitude.0, amplitude.1);
            let ppos = rngs::uniform(rng, peak.0, peak.1);
            let wl = rngs::uniform(rng, width_left.0, width_left.1);
            let wr = rngs::uniform(rng, width_right.0, width_right.1);
            let n = spec.order;
            let coeffs: Vec<f64> = (2..=n)
                .map(|i| {
                    let x = i as f64 / n as f64;
                    let w = if x < ppos { wl } else { wr };
                    amp * (-0.5 * ((x - ppos) / w).powi(2)).exp()
                })
                .collect();
            let curve = Curve::new(onset, coeffs)
                .map_err(|_| DataError::BadSimSpec("bump family drew an invalid curve"))?;
            let fvals: Vec<f64> = spec.design.iter().map(|&x| curve.eval(x)).collect();
            let max_val = curve.features().max_val;
            (Some(curve), fvals, max_val)
        }
        CurveFamily::RiseFall {
            amplitude,
            start,
            end,
        } => {
            let amp = rngs::uniform(rng, amplitude.0, amplitude.1);
            let s = rngs::uniform(rng, start.0, start.1);
            let e = rngs::uniform(rng, end.0, end.1);
            if !(s < e && e < 1.0) {
                return Err(DataError::BadSimSpec("rise-fall window must satisfy start < end < 1"));
            }
            let f = move |t: f64| {
                if t <= s || t >= e {
                    0.0
                } else {
                    let u = (t - s) / (e - s);
                    amp * (std::f64::consts::PI * u).sin().powi(2)
                }
            };
            let fvals: Vec<f64> = spec.design.iter().map(|&x| f(x)).collect();
            (None, fvals, amp)
        }
    };
    let sigma = match spec.noise {
        NoiseScale::RelMax(rel) => rel * max_val,
        NoiseScale::Absolute(s) => s,
    };
    if sigma <= 0.0 {
        return Err(DataError::BadSimSpec("noise scale must be positive"));
    }
    Ok(SimTruth {
        curve,
        fvals,
        mu,
        sigma,
    })
}

const ANNOTATION_HEADER: &str = "gene_id,genome_pos,early,taag,catg,structural,name";

/// Parse the annotation file: `gene_id,genome_pos,early,taag,catg,structural,name`
/// with 0/1 booleans. Genome positions must form a permutation of 0..G−1.
pub fn parse_annotations<R: BufRead>(reader: R) -> Result<Vec<GeneAnnotation>, DataError> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(DataError::Schema("empty annotation file".into())),
    };
    if header.trim() != ANNOTATION_HEADER {
        return Err(DataError::Schema(format!(
            "expected header {ANNOTATION_HEADER:?}, found {header:?}"
        )));
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_err(line_no, format!("expected 7 fields, found {}", fields.len())));
        }
        let genome_pos: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad genome position {:?}", fields[1])))?;
        let flag = |s: &str| -> Result<bool, DataError> {
            match s.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(parse_err(line_no, format!("bad boolean {other:?}"))),
            }
        };
        let name = fields[6].trim();
        out.push(GeneAnnotation {
            gene_id: fields[0].trim().to_string(),
            genome_pos,
            early: flag(fields[2])?,
            taag: flag(fields[3])?,
            catg: flag(fields[4])?,
            structural: flag(fields[5])?,
            name: if name.is_empty() {
                None
            } else {
                Some(name.to_string())
            },
        });
    }
    let mut seen = vec![false; out.len()];
    for a in &out {
        if a.genome_pos >= out.len() || seen[a.genome_pos] {
            return Err(DataError::Schema(format!(
                "genome positions must form a permutation of 0..{}",
                out.len().saturating_sub(1)
            )));
        }
        seen[a.genome_pos] = true;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn ratio_parsing_and_division() {
        assert_eq!(Ratio::parse("0.5"), Some(Ratio::new(1, 2)));
        assert_eq!(Ratio::parse("1/3"), Some(Ratio::new(1, 3)));
        assert_eq!(Ratio::parse("12"), Some(Ratio::new(12, 1)));
        assert_eq!(Ratio::parse("-1"), None);
        assert_eq!(Ratio::parse("x"), None);
        let third = Ratio::parse("1/3").unwrap();
        let seventy_two = Ratio::parse("72").unwrap();
        assert_eq!(third.div(seventy_two), Some(Ratio::new(1, 216)));
    }

    #[test]
    fn parses_the_fractional_hour_grid_exactly() {
        // hours over a 72-hour course: rescaling must hit the exact design
        // fractions
        let hours = [
            "0", "1/3", "2/3", "1", "2", "3", "6", "9", "12", "15", "18", "24", "30", "48", "60",
            "72",
        ];
        let expected = [
            0.0,
            1.0 / 216.0,
            1.0 / 108.0,
            1.0 / 72.0,
            1.0 / 36.0,
            1.0 / 24.0,
            1.0 / 12.0,
            1.0 / 8.0,
            1.0 / 6.0,
            5.0 / 24.0,
            0.25,
            1.0 / 3.0,
            5.0 / 12.0,
            2.0 / 3.0,
            5.0 / 6.0,
            1.0,
        ];
        let mut csv = String::from("gene_id,time,replicate,intensity\n");
        for h in &hours {
            for r in 1..=2 {
                csv.push_str(&format!("g1,{h},{r},1.0\n"));
            }
        }
        let ds = parse_dataset(Cursor::new(csv)).unwrap();
        assert_eq!(ds.design_points.len(), 16);
        for (got, want) in ds.design_points.iter().zip(&expected) {
            assert_eq!(got, want);
        }
    }

    #[test]
    fn dataset_round_trip_is_identity() {
        let spec = SimSpec::recovery_default(3);
        let mut rng = crate::rngs::stream(4, crate::rngs::STREAM_SIMULATE);
        let (ds, _) = simulate_dataset(&spec, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let back = parse_dataset(Cursor::new(buf)).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn parse_errors_name_lines() {
        let csv = "gene_id,time,replicate,intensity\ng1,0,1,1.0\ng1,1,1,abc\n";
        match parse_dataset(Cursor::new(csv)) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let empty = "";
        assert!(matches!(
            parse_dataset(Cursor::new(empty)),
            Err(DataError::Schema(_))
        ));
        // inconsistent replicate structure
        let ragged =
            "gene_id,time,replicate,intensity\ng1,0,1,1.0\ng1,1,1,2.0\ng1,1,2,2.1\ng2,0,1,1.0\ng2,1,1,2.0\n";
        assert!(matches!(
            parse_dataset(Cursor::new(ragged)),
            Err(DataError::Parse { .. })
        ));
        // duplicate replicate id
        let dup = "gene_id,time,replicate,intensity\ng1,0,1,1.0\ng1,0,1,1.1\ng1,1,1,2.0\n";
        assert!(matches!(
            parse_dataset(Cursor::new(dup)),
            Err(DataError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn simulate_zero_noise_limit_and_determinism() {
        let mut spec = SimSpec::recovery_default(2);
        spec.noise = NoiseScale::Absolute(1e-300);
        let mut rng = crate::rngs::stream(9, crate::rngs::STREAM_SIMULATE);
        let (ds, truths) = simulate_dataset(&spec, &mut rng).unwrap();
        for (g, truth) in truths.iter().enumerate() {
            for (k, &f) in truth.fvals.iter().enumerate() {
                for &y in &ds.values[g][k] {
                    assert_eq!(y, f + truth.mu);
                }
            }
        }
        // σ ≤ 0 rejected
        spec.noise = NoiseScale::Absolute(0.0);
        let mut rng2 = crate::rngs::stream(9, crate::rngs::STREAM_SIMULATE);
        assert!(simulate_dataset(&spec, &mut rng2).is_err());
        // fixed seed → identical dataset
        spec.noise = NoiseScale::RelMax(0.1);
        let mk = || {
            let mut r = crate::rngs::stream(10, crate::rngs::STREAM_SIMULATE);
            simulate_dataset(&spec, &mut r).unwrap().0
        };
        assert_eq!(mk(), mk());
    }

    #[test]
    fn simulate_heteroscedastic_noise_scales_with_mean() {
        let mut spec = SimSpec::recovery_default(1);
        spec.xi = 2;
        spec.replicates = 60;
        spec.noise = NoiseScale::RelMax(0.05);
        let mut rng = crate::rngs::stream(11, crate::rngs::STREAM_SIMULATE);
        let (ds, truths) = simulate_dataset(&spec, &mut rng).unwrap();
        let truth = &truths[0];
        // compare replicate sd at the highest-mean vs lowest-mean point
        let sd = |k: usize| {
            let block = &ds.values[0][k];
            let m = block.iter().sum::<f64>() / block.len() as f64;
            (block.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (block.len() - 1) as f64).sqrt()
        };
        let mut hi = 0;
        let mut lo = 0;
        for k in 0..truth.fvals.len() {
            if truth.fvals[k] > truth.fvals[hi] {
                hi = k;
            }
            if truth.fvals[k] < truth.fvals[lo] {
                lo = k;
            }
        }
        assert!(sd(hi) > sd(lo), "sd(high mean) {} vs sd(low mean) {}", sd(hi), sd(lo));
    }

    #[test]
    fn rise_fall_family_returns_to_zero() {
        let spec = SimSpec {
            family: CurveFamily::RiseFall {
                amplitude: (2.0, 2.0),
                start: (0.1, 0.1),
                end: (0.45, 0.45),
            },
            ..SimSpec::recovery_default(1)
        };
        let mut rng = crate::rngs::stream(12, crate::rngs::STREAM_SIMULATE);
        let (_, truths) = simulate_dataset(&spec, &mut rng).unwrap();
        let f = &truths[0].fvals;
        assert_eq!(f[0], 0.0);
        assert_eq!(*f.last().unwrap(), 0.0);
        assert!(f.iter().cloned().fold(f64::MIN, f64::max) > 1.5);
        assert!(truths[0].curve.is_none());
    }

    #[test]
    fn annotations_parse_and_validate_permutation() {
        let csv = "gene_id,genome_pos,early,taag,catg,structural,name\n\
                   g1,1,1,0,1,0,lef1\n\
                   g2,0,0,1,0,1,\n\
                   g3,2,0,0,0,0,vp39\n";
        let anns = parse_annotations(Cursor::new(csv)).unwrap();
        assert_eq!(anns.len(), 3);
        assert_eq!(anns[0].genome_pos, 1);
        assert!(anns[0].early && !anns[0].taag);
        assert_eq!(anns[1].name, None);
        assert_eq!(anns[2].name.as_deref(), Some("vp39"));

        let bad = "gene_id,genome_pos,early,taag,catg,structural,name\n\
                   g1,0,1,0,1,0,\n\
                   g2,0,0,1,0,1,\n";
        assert!(parse_annotations(Cursor::new(bad)).is_err());
    }
}
