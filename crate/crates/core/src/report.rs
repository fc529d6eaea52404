//! Assemble the individual analyses into one reproducibility report: a
//! best-configuration system comparison, a comparison pooling all
//! configurations, a variance decomposition, and optional conditional tests
//! per data-property covariate.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::EvalDataset;
use crate::error::{Error, Result};
use crate::fit::FitOptions;
use crate::formula::ModelSpec;
use crate::inference::{glrt, ConditionalOptions, ConditionalTest, GlrtResult, GridPoint};
use crate::vca::{vca, VcaReport};

/// What to compare and condition on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    pub system_factor: String,
    /// Configuration (meta-parameter) factors; at least one.
    pub config_factors: Vec<String>,
    pub object_factor: String,
    /// Covariates to run conditional tests on.
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Restrict the variance decomposition to one system's rows.
    #[serde(default)]
    pub vca_system: Option<String>,
    /// Grid points per conditional interaction.
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default)]
    pub fit: FitOptions,
}

fn default_grid() -> usize {
    25
}

/// One conditional section: test plus inline prediction grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalSection {
    pub covariate: String,
    pub glrt: GlrtResult,
    pub grid: Vec<GridPoint>,
}

/// Best-configuration comparison section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseBestSection {
    /// Per system: the selected configuration, as factor -> level label.
    pub selected: IndexMap<String, IndexMap<String, String>>,
    pub glrt: GlrtResult,
}

/// Full reproducibility report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproReport {
    pub dataset_fingerprint: String,
    pub pairwise_best: PairwiseBestSection,
    pub under_variation: GlrtResult,
    pub vca: VcaReport,
    pub conditional: Vec<ConditionalSection>,
}

fn m0_m1(ds: &EvalDataset, system: &str, object: &str) -> Result<(ModelSpec, ModelSpec)> {
    let response = ds.response_name();
    let m0 = ModelSpec::parse(&format!("{response} ~ 1 + (1|{object})"))?;
    let m1 = ModelSpec::parse(&format!("{response} ~ 1 + {system} + (1|{object})"))?;
    Ok((m0, m1))
}

/// Highest-mean configuration per system; ties resolved by declaration order
/// of the configuration levels.
pub fn best_configurations(
    ds: &EvalDataset,
    system_factor: &str,
    config_factors: &[String],
) -> Result<IndexMap<String, Vec<u32>>> {
    let system = ds.factor(system_factor)?;
    let configs: Vec<&crate::data::Factor> = config_factors
        .iter()
        .map(|f| ds.factor(f))
        .collect::<Result<_>>()?;

    // mean score per (system level, config combo)
    let mut sums: IndexMap<(u32, Vec<u32>), (f64, usize)> = IndexMap::new();
    let y = ds.response();
    for i in 0..ds.n_rows() {
        let key = (
            system.codes()[i],
            configs.iter().map(|f| f.codes()[i]).collect::<Vec<u32>>(),
        );
        let entry = sums.entry(key).or_insert((0.0, 0));
        entry.0 += y[i];
        entry.1 += 1;
    }

    let mut best: IndexMap<String, (Vec<u32>, f64)> = IndexMap::new();
    for (sys_idx, sys_level) in system.levels().iter().enumerate() {
        // iterate combos in lexicographic level order for deterministic ties
        let mut combos: Vec<(&Vec<u32>, f64)> = sums
            .iter()
            .filter(|((s, _), _)| *s == sys_idx as u32)
            .map(|((_, combo), (sum, n))| (combo, sum / *n as f64))
            .collect();
        combos.sort_by(|a, b| a.0.cmp(b.0));
        let mut chosen: Option<(Vec<u32>, f64)> = None;
        for (combo, mean) in combos {
            let better = match &chosen {
                None => true,
                Some((_, best_mean)) => mean > *best_mean,
            };
            if better {
                chosen = Some((combo.clone(), mean));
            }
        }
        if let Some(c) = chosen {
            best.insert(sys_level.clone(), c);
        }
    }
    Ok(best.into_iter().map(|(k, (combo, _))| (k, combo)).collect())
}

/// Run the full report pipeline.
pub fn build_report(ds: &EvalDataset, config: &ReportConfig) -> Result<ReproReport> {
    let system = ds.factor(&config.system_factor)?;
    if system.n_levels() < 2 {
        return Err(Error::Structural(format!(
            "system factor `{}` has {} level(s); need at least 2 systems to compare",
            config.system_factor,
            system.n_levels()
        )));
    }
    if config.config_factors.is_empty() {
        return Err(Error::Structural(
            "at least one configuration factor is required".into(),
        ));
    }
    ds.factor(&config.object_factor)?;

    // --- best-configuration comparison ---
    let best = best_configurations(ds, &config.system_factor, &config.config_factors)?;
    let config_codes: Vec<&[u32]> = config
        .config_factors
        .iter()
        .map(|f| ds.factor(f).map(|fac| fac.codes()))
        .collect::<Result<_>>()?;
    let sys_codes = system.codes();
    let sys_levels = system.levels();
    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| {
            let level = &sys_levels[sys_codes[i] as usize];
            match best.get(level) {
                Some(combo) => config_codes
                    .iter()
                    .zip(combo)
                    .all(|(codes, &want)| codes[i] == want),
                None => false,
            }
        })
        .collect();
    let best_ds = ds.select_rows(&keep)?;
    let (m0, m1) = m0_m1(ds, &config.system_factor, &config.object_factor)?;
    let pairwise_glrt = glrt(&best_ds, &m0, &m1, &config.fit)?;

    let selected: IndexMap<String, IndexMap<String, String>> = best
        .iter()
        .map(|(sys_level, combo)| {
            let assignment: IndexMap<String, String> = config
                .config_factors
                .iter()
                .zip(combo)
                .map(|(f, &code)| {
                    let label = ds.factor(f).unwrap().levels()[code as usize].clone();
                    (f.clone(), label)
                })
                .collect();
            (sys_level.clone(), assignment)
        })
        .collect();

    // --- pooled comparison over all configurations ---
    let under_variation = glrt(ds, &m0, &m1, &config.fit)?;

    // --- variance decomposition ---
    let vca_ds = match &config.vca_system {
        Some(sys) => {
            let code = system.level_index(sys).ok_or_else(|| {
                Error::Structural(format!(
                    "vca_system `{sys}` is not a level of `{}`",
                    config.system_factor
                ))
            })?;
            let rows: Vec<usize> = (0..ds.n_rows())
                .filter(|&i| sys_codes[i] == code)
                .collect();
            ds.select_rows(&rows)?
        }
        None => ds.clone(),
    };
    let mut random = vec![config.object_factor.clone()];
    random.extend(config.config_factors.iter().cloned());
    let vca_report = vca(&vca_ds, &random, &config.object_factor, &config.fit)?;

    // --- conditional tests on the best-configuration subset ---
    let cond_opts = ConditionalOptions {
        fit: config.fit.clone(),
        ..Default::default()
    };
    let mut conditional = Vec::new();
    for cov in &config.covariates {
        let ConditionalTest { glrt, model } = crate::inference::glrt_conditional(
            &best_ds,
            cov,
            &config.system_factor,
            &config.object_factor,
            &cond_opts,
        )?;
        conditional.push(ConditionalSection {
            covariate: cov.clone(),
            glrt,
            grid: model.grid(config.grid_points),
        });
    }

    Ok(ReproReport {
        dataset_fingerprint: ds.fingerprint(),
        pairwise_best: PairwiseBestSection {
            selected,
            glrt: pairwise_glrt,
        },
        under_variation,
        vca: vca_report,
        conditional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate, SimSpec};

    fn sign_reversal_spec(seed: u64) -> SimSpec {
        // the competitor wins only at its best lambda and loses elsewhere
        let mut spec = SimSpec::new(120, 0.3, seed);
        spec.object_factor = "sentence".into();
        spec.facet_levels.insert("system".into(), 2);
        spec.facet_levels.insert("lambda".into(), 3);
        spec.variance_components.insert("sentence".into(), 0.25);
        spec.fixed_effects.insert("intercept".into(), 1.0);
        spec.fixed_effects.insert("system=1".into(), 0.8);
        spec.fixed_effects.insert("system=1:lambda=1".into(), -1.6);
        spec.fixed_effects.insert("system=1:lambda=2".into(), -1.6);
        spec
    }

    fn config() -> ReportConfig {
        ReportConfig {
            system_factor: "system".into(),
            config_factors: vec!["lambda".into()],
            object_factor: "sentence".into(),
            covariates: vec![],
            vca_system: None,
            grid_points: 5,
            fit: FitOptions::default(),
        }
    }

    #[test]
    fn sign_reversal_scenario() {
        let ds = simulate(&sign_reversal_spec(7)).unwrap();
        let report = build_report(&ds, &config()).unwrap();

        // competitor wins at its best configuration...
        let best = report.pairwise_best.glrt.effect_size.unwrap();
        assert!(best < 0.0, "pairwise best effect size {best}");
        // ...but loses pooled over configurations
        let pooled = report.under_variation.effect_size.unwrap();
        assert!(pooled > 0.0, "pooled effect size {pooled}");
        assert!(report.pairwise_best.glrt.p_value.unwrap() < 0.01);
        assert!(report.under_variation.p_value.unwrap() < 0.01);
        // competitor's selected lambda is its good one (index 0)
        assert_eq!(report.pairwise_best.selected["system1"]["lambda"], "lambda0");
    }

    #[test]
    fn single_configuration_sections_coincide() {
        let mut spec = sign_reversal_spec(11);
        spec.facet_levels.insert("lambda".into(), 1);
        spec.fixed_effects.shift_remove("system=1:lambda=1");
        spec.fixed_effects.shift_remove("system=1:lambda=2");
        let ds = simulate(&spec).unwrap();
        let report = build_report(&ds, &config()).unwrap();
        assert_eq!(
            report.pairwise_best.glrt.stat,
            report.under_variation.stat
        );
        assert_eq!(
            report.pairwise_best.glrt.effect_size,
            report.under_variation.effect_size
        );
    }

    #[test]
    fn pairwise_best_equals_direct_glrt_on_filtered_rows() {
        let ds = simulate(&sign_reversal_spec(13)).unwrap();
        let report = build_report(&ds, &config()).unwrap();

        let best = best_configurations(&ds, "system", &["lambda".to_string()]).unwrap();
        let sys = ds.factor("system").unwrap();
        let lambda = ds.factor("lambda").unwrap();
        let keep: Vec<usize> = (0..ds.n_rows())
            .filter(|&i| {
                let level = &sys.levels()[sys.codes()[i] as usize];
                lambda.codes()[i] == best[level][0]
            })
            .collect();
        let filtered = ds.select_rows(&keep).unwrap();
        let (m0, m1) = m0_m1(&ds, "system", "sentence").unwrap();
        let direct = glrt(&filtered, &m0, &m1, &FitOptions::default()).unwrap();
        assert!((report.pairwise_best.glrt.stat - direct.stat).abs() < 1e-10);
    }

    #[test]
    fn report_round_trips_through_json() {
        let ds = simulate(&sign_reversal_spec(17)).unwrap();
        let report = build_report(&ds, &config()).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: ReproReport = serde_json::from_str(&json).unwrap();
        let json2 = serde_json::to_string(&back).unwrap();
        assert_eq!(json, json2);
    }

    #[test]
    fn fewer_than_two_systems_is_structural() {
        let mut spec = sign_reversal_spec(19);
        spec.facet_levels.insert("system".into(), 1);
        spec.fixed_effects.clear();
        let ds = simulate(&spec).unwrap();
        assert!(matches!(
            build_report(&ds, &config()),
            Err(Error::Structural(_))
        ));
    }
}
