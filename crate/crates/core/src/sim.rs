//! Synthetic evaluation datasets with known ground truth.
//!
//! The generative model is the fitted one: a fully crossed design of objects
//! (test items) by facet levels, response
//! `y = fixed part + sum_f b_f[level] + eps` with `b_f ~ N(0, sigma2_f)` and
//! `eps ~ N(0, residual_sd^2)`.
//!
//! Randomness is fully reproducible: all draws come from ChaCha8 seeded with
//! `spec.seed`, using separate documented streams per purpose (0 random
//! effects, 1 covariates, 2 residuals, 3 cell dropout) so that adding, say, a
//! covariate never disturbs the residual draws. Replication `i` of a
//! Monte-Carlo study uses the derived seed
//! `splitmix64(seed + (i+1) * 0x9E3779B97F4A7C15)`, which makes results
//! independent of scheduling order.

use indexmap::IndexMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::EvalDataset;
use crate::error::{Error, Result};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Distribution of one per-object covariate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "dist", rename_all = "lowercase")]
pub enum CovariateSpec {
    Normal { mean: f64, sd: f64 },
}

fn default_object_factor() -> String {
    "object".to_string()
}

fn default_response_name() -> String {
    "score".to_string()
}

/// Ground-truth description of a simulated dataset.
///
/// Fixed-effect keys: `intercept`, a covariate name, `factor=I` (deviation
/// added when the factor is at level index `I`), `factor=I:cov`, or
/// `factor=I:factor2=J`. Level labels are `{factor}{index}` zero-padded.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SimSpec {
    pub n_objects: usize,
    #[serde(default = "default_object_factor")]
    pub object_factor: String,
    #[serde(default)]
    pub facet_levels: IndexMap<String, usize>,
    #[serde(default)]
    pub fixed_effects: IndexMap<String, f64>,
    /// True variance per random factor (object factor or facet); factors not
    /// listed contribute no random effect.
    #[serde(default)]
    pub variance_components: IndexMap<String, f64>,
    pub residual_sd: f64,
    /// Per-object covariates, constant across a given object's rows.
    #[serde(default)]
    pub covariates: IndexMap<String, CovariateSpec>,
    /// Probability of dropping each design cell, for unbalanced-data tests.
    #[serde(default)]
    pub cell_dropout: f64,
    pub seed: u64,
    #[serde(default = "default_response_name")]
    pub response_name: String,
}

impl SimSpec {
    pub fn new(n_objects: usize, residual_sd: f64, seed: u64) -> SimSpec {
        SimSpec {
            n_objects,
            object_factor: default_object_factor(),
            facet_levels: IndexMap::new(),
            fixed_effects: IndexMap::new(),
            variance_components: IndexMap::new(),
            residual_sd,
            covariates: IndexMap::new(),
            cell_dropout: 0.0,
            seed,
            response_name: default_response_name(),
        }
    }

    pub fn with_seed(&self, seed: u64) -> SimSpec {
        let mut s = self.clone();
        s.seed = seed;
        s
    }

    fn validate(&self) -> Result<()> {
        if self.n_objects == 0 {
            return Err(Error::SimSpec("n_objects must be at least 1".into()));
        }
        if !(self.residual_sd > 0.0) || !self.residual_sd.is_finite() {
            return Err(Error::SimSpec("residual_sd must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.cell_dropout) {
            return Err(Error::SimSpec("cell_dropout must be in [0, 1)".into()));
        }
        for (f, &m) in &self.facet_levels {
            if m == 0 {
                return Err(Error::SimSpec(format!("facet `{f}` must have >= 1 level")));
            }
            if *f == self.object_factor {
                return Err(Error::SimSpec(format!(
                    "facet `{f}` collides with the object factor name"
                )));
            }
        }
        for (f, &v) in &self.variance_components {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::SimSpec(format!(
                    "variance component for `{f}` must be finite and >= 0"
                )));
            }
            if *f != self.object_factor && !self.facet_levels.contains_key(f) {
                return Err(Error::SimSpec(format!(
                    "variance component refers to unknown factor `{f}`"
                )));
            }
        }
        for name in self.covariates.keys() {
            if *name == self.object_factor || self.facet_levels.contains_key(name) {
                return Err(Error::SimSpec(format!(
                    "covariate `{name}` collides with a factor name"
                )));
            }
        }
        for (spec, _) in self.parsed_fixed_effects()? {
            let _ = spec; // parsing is the validation
        }
        Ok(())
    }

    fn factor_level_count(&self, name: &str) -> Option<usize> {
        if name == self.object_factor {
            Some(self.n_objects)
        } else {
            self.facet_levels.get(name).copied()
        }
    }

    fn parsed_fixed_effects(&self) -> Result<Vec<(SimTerm, f64)>> {
        self.fixed_effects
            .iter()
            .map(|(key, &coef)| Ok((self.parse_term(key)?, coef)))
            .collect()
    }

    fn parse_atom(&self, atom: &str) -> Result<SimAtom> {
        if let Some((factor, idx)) = atom.split_once('=') {
            let m = self.factor_level_count(factor).ok_or_else(|| {
                Error::SimSpec(format!("fixed effect references unknown factor `{factor}`"))
            })?;
            let index: usize = idx.parse().map_err(|_| {
                Error::SimSpec(format!("bad level index in fixed-effect key `{atom}`"))
            })?;
            if index >= m {
                return Err(Error::SimSpec(format!(
                    "level index {index} out of range for factor `{factor}` ({m} levels)"
                )));
            }
            Ok(SimAtom::Level {
                factor: factor.to_string(),
                index,
            })
        } else if self.covariates.contains_key(atom) {
            Ok(SimAtom::Covariate(atom.to_string()))
        } else {
            Err(Error::SimSpec(format!(
                "fixed effect key `{atom}` is neither `factor=index` nor a declared covariate"
            )))
        }
    }

    fn parse_term(&self, key: &str) -> Result<SimTerm> {
        if key == "intercept" {
            return Ok(SimTerm::Intercept);
        }
        // split at a ':' that separates atoms; level atoms contain '=' but no ':'
        match key.split_once(':') {
            None => Ok(SimTerm::Single(self.parse_atom(key)?)),
            Some((a, b)) => Ok(SimTerm::Product(self.parse_atom(a)?, self.parse_atom(b)?)),
        }
    }
}

#[derive(Debug, Clone)]
enum SimAtom {
    Level { factor: String, index: usize },
    Covariate(String),
}

#[derive(Debug, Clone)]
enum SimTerm {
    Intercept,
    Single(SimAtom),
    Product(SimAtom, SimAtom),
}

/// Realized draws behind one simulated dataset: the random effects per
/// factor, their centered sample variances, and the residual sample variance
/// over the kept rows. These are the oracle values that estimation is
/// checked against.
#[derive(Debug, Clone)]
pub struct SimTruth {
    pub effects: IndexMap<String, Vec<f64>>,
    pub realized_variance: IndexMap<String, f64>,
    pub realized_residual_variance: f64,
}

fn centered_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
}

fn pad_width(count: usize) -> usize {
    count.saturating_sub(1).to_string().len()
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Derived seed for replication `index` of a study based at `seed`.
pub fn replication_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15)))
}

/// Generate one dataset.
pub fn simulate(spec: &SimSpec) -> Result<EvalDataset> {
    simulate_with_truth(spec).map(|(ds, _)| ds)
}

/// Generate one dataset along with the realized ground truth.
pub fn simulate_with_truth(spec: &SimSpec) -> Result<(EvalDataset, SimTruth)> {
    spec.validate()?;
    let terms = spec.parsed_fixed_effects()?;

    let factor_names: Vec<String> = std::iter::once(spec.object_factor.clone())
        .chain(spec.facet_levels.keys().cloned())
        .collect();
    let level_counts: Vec<usize> = std::iter::once(spec.n_objects)
        .chain(spec.facet_levels.values().copied())
        .collect();

    // Stream 0: random intercepts, factor by factor in declaration order.
    // Factors without a positive variance component consume no randomness.
    let mut effects: IndexMap<String, Vec<f64>> = IndexMap::new();
    {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(0);
        for (name, &m) in factor_names.iter().zip(&level_counts) {
            let sigma2 = spec.variance_components.get(name).copied().unwrap_or(0.0);
            let draws = if sigma2 > 0.0 {
                let dist = Normal::new(0.0, sigma2.sqrt()).expect("finite sd");
                (0..m).map(|_| dist.sample(&mut rng)).collect()
            } else {
                vec![0.0; m]
            };
            effects.insert(name.clone(), draws);
        }
    }

    // Stream 1: per-object covariates.
    let mut covariate_values: IndexMap<String, Vec<f64>> = IndexMap::new();
    {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(1);
        for (name, cs) in &spec.covariates {
            let CovariateSpec::Normal { mean, sd } = cs;
            let values = if *sd > 0.0 {
                let dist = Normal::new(*mean, *sd).map_err(|e| {
                    Error::SimSpec(format!("covariate `{name}`: bad distribution ({e})"))
                })?;
                (0..spec.n_objects).map(|_| dist.sample(&mut rng)).collect()
            } else {
                vec![*mean; spec.n_objects]
            };
            covariate_values.insert(name.clone(), values);
        }
    }

    let n_cells: usize = spec.n_objects * spec.facet_levels.values().product::<usize>().max(1);

    // Stream 2: residuals, row order. Stream 3: dropout decisions.
    let mut resid_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    resid_rng.set_stream(2);
    let resid_dist = Normal::new(0.0, spec.residual_sd).expect("positive sd");
    let mut drop_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    drop_rng.set_stream(3);

    let labels: Vec<Vec<String>> = factor_names
        .iter()
        .zip(&level_counts)
        .map(|(name, &m)| {
            let w = pad_width(m);
            (0..m).map(|i| format!("{name}{i:0w$}")).collect()
        })
        .collect();

    let n_facets = spec.facet_levels.len();
    let mut response = Vec::with_capacity(n_cells);
    let mut codes: Vec<Vec<u32>> = vec![Vec::with_capacity(n_cells); factor_names.len()];
    let mut cov_columns: Vec<Vec<f64>> =
        vec![Vec::with_capacity(n_cells); covariate_values.len()];
    let mut kept_residuals = Vec::with_capacity(n_cells);

    // indices[0] = object, indices[1..] = facets; last facet varies fastest
    let mut indices = vec![0usize; 1 + n_facets];
    for _ in 0..n_cells {
        let eps: f64 = resid_dist.sample(&mut resid_rng);
        let keep = if spec.cell_dropout > 0.0 {
            rand::Rng::random::<f64>(&mut drop_rng) >= spec.cell_dropout
        } else {
            true
        };

        if keep {
            let object = indices[0];
            let mut value = eps;
            for (fi, name) in factor_names.iter().enumerate() {
                value += effects[name][indices[fi]];
            }
            let atom_value = |atom: &SimAtom| -> f64 {
                match atom {
                    SimAtom::Level { factor, index } => {
                        let fi = factor_names.iter().position(|f| f == factor).unwrap();
                        if indices[fi] == *index {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    SimAtom::Covariate(name) => covariate_values[name][object],
                }
            };
            for (term, coef) in &terms {
                value += coef
                    * match term {
                        SimTerm::Intercept => 1.0,
                        SimTerm::Single(a) => atom_value(a),
                        SimTerm::Product(a, b) => atom_value(a) * atom_value(b),
                    };
            }

            response.push(value);
            for (fi, code_col) in codes.iter_mut().enumerate() {
                code_col.push(indices[fi] as u32);
            }
            for (ci, name) in covariate_values.keys().enumerate() {
                cov_columns[ci].push(covariate_values[name][object]);
            }
            kept_residuals.push(eps);
        }

        // advance the mixed-radix counter, last facet fastest
        for pos in (0..indices.len()).rev() {
            indices[pos] += 1;
            if indices[pos] < level_counts[pos] {
                break;
            }
            indices[pos] = 0;
        }
    }

    if response.is_empty() {
        return Err(Error::EmptyData);
    }

    let factors: Vec<(String, Vec<String>, Vec<u32>)> = factor_names
        .iter()
        .cloned()
        .zip(labels)
        .zip(codes)
        .map(|((name, levels), codes)| (name, levels, codes))
        .collect();
    let covariates: Vec<(String, Vec<f64>)> = covariate_values
        .keys()
        .cloned()
        .zip(cov_columns)
        .collect();

    let ds = EvalDataset::from_columns(
        spec.response_name.clone(),
        response,
        factors,
        covariates,
        Some(spec.object_factor.clone()),
    )?;

    let realized_variance = effects
        .iter()
        .map(|(k, v)| (k.clone(), centered_variance(v)))
        .collect();
    let truth = SimTruth {
        realized_variance,
        realized_residual_variance: centered_variance(&kept_residuals),
        effects,
    };
    Ok((ds, truth))
}

/// Per-replication values plus summary statistics.
#[derive(Debug, Clone)]
pub struct McSummary {
    pub values: Vec<f64>,
    pub mean: f64,
    pub median: f64,
}

impl McSummary {
    fn from_values(values: Vec<f64>) -> McSummary {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut summary = McSummary {
            median: 0.0,
            mean,
            values,
        };
        summary.median = summary.quantile(0.5);
        summary
    }

    /// Linearly interpolated sample quantile, `q` in [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        let mut sorted = self.values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let n = sorted.len();
        if n == 1 {
            return sorted[0];
        }
        let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }

    /// Fraction of replications for which `pred` holds.
    pub fn fraction(&self, pred: impl Fn(f64) -> bool) -> f64 {
        self.values.iter().filter(|&&v| pred(v)).count() as f64 / self.values.len() as f64
    }
}

/// Run `analysis` over `replications` independently simulated datasets.
/// Replication `i` simulates with [`replication_seed`]`(spec.seed, i)`, so
/// results do not depend on execution order; with the `parallel` feature the
/// replications run on the rayon pool.
pub fn mc_replications<R, F>(spec: &SimSpec, replications: usize, analysis: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&EvalDataset, &SimTruth, usize) -> Result<R> + Sync,
{
    run_replications(spec, replications, &analysis, cfg!(feature = "parallel"))
}

/// Sequential variant regardless of compiled features (results identical).
pub fn mc_replications_sequential<R, F>(
    spec: &SimSpec,
    replications: usize,
    analysis: F,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&EvalDataset, &SimTruth, usize) -> Result<R> + Sync,
{
    run_replications(spec, replications, &analysis, false)
}

fn run_replications<R, F>(
    spec: &SimSpec,
    replications: usize,
    analysis: &F,
    parallel: bool,
) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(&EvalDataset, &SimTruth, usize) -> Result<R> + Sync,
{
    if replications == 0 {
        return Err(Error::SimSpec("replications must be >= 1".into()));
    }
    let run_one = |i: usize| -> Result<R> {
        let rep_spec = spec.with_seed(replication_seed(spec.seed, i));
        let (ds, truth) = simulate_with_truth(&rep_spec).map_err(|e| Error::Replication {
            index: i,
            source: Box::new(e),
        })?;
        analysis(&ds, &truth, i).map_err(|e| Error::Replication {
            index: i,
            source: Box::new(e),
        })
    };

    let results: Vec<Result<R>>;
    #[cfg(feature = "parallel")]
    {
        results = if parallel {
            (0..replications).into_par_iter().map(run_one).collect()
        } else {
            (0..replications).map(run_one).collect()
        };
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = parallel;
        results = (0..replications).map(run_one).collect();
    }

    // first error by replication index, independent of scheduling
    results.into_iter().collect()
}

/// Monte-Carlo study returning one number per replication plus summaries.
pub fn mc_study<F>(spec: &SimSpec, replications: usize, analysis: F) -> Result<McSummary>
where
    F: Fn(&EvalDataset) -> Result<f64> + Sync,
{
    let values = mc_replications(spec, replications, |ds, _, _| analysis(ds))?;
    Ok(McSummary::from_values(values))
}

/// Sequential variant of [`mc_study`] (identical results).
pub fn mc_study_sequential<F>(spec: &SimSpec, replications: usize, analysis: F) -> Result<McSummary>
where
    F: Fn(&EvalDataset) -> Result<f64> + Sync,
{
    let values = mc_replications_sequential(spec, replications, |ds, _, _| analysis(ds))?;
    Ok(McSummary::from_values(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basic_spec() -> SimSpec {
        let mut spec = SimSpec::new(50, 0.5, 42);
        spec.facet_levels.insert("lambda".into(), 3);
        spec.variance_components.insert("object".into(), 1.0);
        spec.fixed_effects.insert("intercept".into(), 2.0);
        spec
    }

    #[test]
    fn equal_seeds_are_bitwise_identical() {
        let spec = basic_spec();
        let a = simulate(&spec).unwrap();
        let b = simulate(&spec).unwrap();
        assert_eq!(a, b);
        let c = simulate(&spec.with_seed(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn level_counts_match_spec() {
        let mut spec = SimSpec::new(7, 1.0, 1);
        spec.facet_levels.insert("lambda".into(), 3);
        spec.facet_levels.insert("noise".into(), 2);
        spec.facet_levels.insert("seed".into(), 5);
        let ds = simulate(&spec).unwrap();
        assert_eq!(ds.n_rows(), 7 * 3 * 2 * 5);
        assert_eq!(ds.factor("object").unwrap().n_levels(), 7);
        assert_eq!(ds.factor("lambda").unwrap().n_levels(), 3);
        assert_eq!(ds.factor("noise").unwrap().n_levels(), 2);
        assert_eq!(ds.factor("seed").unwrap().n_levels(), 5);
        assert_eq!(ds.object_of_interest(), "object");
    }

    #[test]
    fn zero_variance_zero_noise_gives_constant_response() {
        let mut spec = SimSpec::new(10, 1e-9, 7);
        spec.fixed_effects.insert("intercept".into(), 5.0);
        let ds = simulate(&spec).unwrap();
        for &y in ds.response() {
            assert!((y - 5.0).abs() < 1e-6);
        }
    }

    #[test]
    fn sample_variance_of_random_intercepts_matches() {
        let mut spec = SimSpec::new(100_000, 1e-9, 9);
        spec.variance_components.insert("object".into(), 4.0);
        let (_, truth) = simulate_with_truth(&spec).unwrap();
        let v = truth.realized_variance["object"];
        assert!((v - 4.0).abs() < 0.1, "v = {v}");
    }

    #[test]
    fn fixed_effect_terms_apply() {
        let mut spec = SimSpec::new(4, 1e-9, 3);
        spec.facet_levels.insert("system".into(), 2);
        spec.fixed_effects.insert("intercept".into(), 1.0);
        spec.fixed_effects.insert("system=1".into(), 0.5);
        let ds = simulate(&spec).unwrap();
        let sys = ds.factor("system").unwrap();
        for i in 0..ds.n_rows() {
            let want = if sys.codes()[i] == 1 { 1.5 } else { 1.0 };
            assert!((ds.response()[i] - want).abs() < 1e-6);
        }
    }

    #[test]
    fn covariate_slopes_apply_per_object() {
        let mut spec = SimSpec::new(20, 1e-9, 5);
        spec.covariates.insert(
            "d".into(),
            CovariateSpec::Normal { mean: 0.0, sd: 1.0 },
        );
        spec.fixed_effects.insert("d".into(), 2.0);
        let ds = simulate(&spec).unwrap();
        let d = ds.covariate("d").unwrap();
        for i in 0..ds.n_rows() {
            assert!((ds.response()[i] - 2.0 * d[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn dropout_produces_unbalanced_data() {
        let mut spec = SimSpec::new(40, 1.0, 11);
        spec.facet_levels.insert("lambda".into(), 3);
        spec.cell_dropout = 0.2;
        let ds = simulate(&spec).unwrap();
        assert!(ds.n_rows() < 120);
        assert!(ds.n_rows() > 60);
        let report = ds
            .validate_crossing(&["object".to_string(), "lambda".to_string()])
            .unwrap();
        assert!(report.fraction("object", "lambda").unwrap() < 1.0);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut spec = SimSpec::new(0, 1.0, 1);
        assert!(simulate(&spec).is_err());
        spec.n_objects = 5;
        spec.residual_sd = 0.0;
        assert!(simulate(&spec).is_err());
        spec.residual_sd = 1.0;
        spec.fixed_effects.insert("nosuch=1".into(), 1.0);
        assert!(simulate(&spec).is_err());
        spec.fixed_effects.clear();
        spec.variance_components.insert("ghost".into(), 1.0);
        assert!(simulate(&spec).is_err());
    }

    #[test]
    fn single_replication_summary_is_the_value() {
        let spec = basic_spec();
        let s = mc_study(&spec, 1, |ds| Ok(ds.response()[0])).unwrap();
        assert_eq!(s.values.len(), 1);
        assert_eq!(s.mean, s.values[0]);
        assert_eq!(s.median, s.values[0]);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let spec = basic_spec();
        let f = |ds: &EvalDataset| Ok(ds.response().iter().sum::<f64>());
        let a = mc_study(&spec, 8, f).unwrap();
        let b = mc_study_sequential(&spec, 8, f).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn replication_errors_carry_the_index() {
        let spec = basic_spec();
        let err = mc_study(&spec, 4, |ds| {
            if ds.n_rows() > 0 {
                Err(Error::Structural("boom".into()))
            } else {
                Ok(0.0)
            }
        })
        .unwrap_err();
        match err {
            Error::Replication { index, .. } => assert_eq!(index, 0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let s = McSummary::from_values(vec![4.0, 1.0, 2.0, 3.0]);
        assert_eq!(s.quantile(0.0), 1.0);
        assert_eq!(s.quantile(1.0), 4.0);
        assert_eq!(s.median, 2.5);
    }
}
