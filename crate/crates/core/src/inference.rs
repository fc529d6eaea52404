//! Likelihood-ratio tests for nested mixed models and effect sizes.
//!
//! The restricted model must be a term-subset of the general model with the
//! same random structure; both are fitted by full ML (REML likelihoods are
//! not comparable across fixed-effect structures). The test statistic
//! `deviance(restricted) - deviance(general)` is referred to a chi-square
//! with as many degrees of freedom as the general model adds retained
//! design columns.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::EvalDataset;
use crate::design::{build_design, standardize_covariates, ScalingRecord};
use crate::error::{Error, Result};
use crate::fit::{fit, Criterion, FitOptions, FittedModel};
use crate::formula::{FixedTerm, ModelSpec};

/// Result of a generalized likelihood ratio test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlrtResult {
    /// `deviance(restricted) - deviance(general)`, clamped at 0.
    pub stat: f64,
    /// Difference in retained fixed-effect columns.
    pub df: usize,
    /// Upper chi-square tail at `stat`; withheld when either fit failed to
    /// converge.
    pub p_value: Option<f64>,
    /// The likelihood ratio `l_0 / l_1 = exp(-stat/2)`.
    pub lambda_ratio: f64,
    /// Standardized mean difference (baseline minus competitor), present for
    /// two-level system comparisons.
    pub effect_size: Option<f64>,
    pub converged_restricted: bool,
    pub converged_general: bool,
    /// Aliased columns dropped in either design.
    pub dropped_columns: Vec<String>,
}

fn chi_square_sf(stat: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("df >= 1");
    dist.sf(stat)
}

/// Test `restricted` against `general` on `ds`. Nesting is verified
/// syntactically; both models are fitted by ML.
pub fn glrt(
    ds: &EvalDataset,
    restricted: &ModelSpec,
    general: &ModelSpec,
    opts: &FitOptions,
) -> Result<GlrtResult> {
    let (result, _, _) = glrt_with_fits(ds, restricted, general, opts)?;
    Ok(result)
}

/// As [`glrt`] but also returns both fitted models.
pub fn glrt_with_fits(
    ds: &EvalDataset,
    restricted: &ModelSpec,
    general: &ModelSpec,
    opts: &FitOptions,
) -> Result<(GlrtResult, FittedModel, FittedModel)> {
    if !restricted.is_nested_in(general) {
        return Err(Error::NotNested(format!(
            "`{restricted}` is not a term-subset of `{general}` with the same random structure"
        )));
    }

    let dm_r = build_design(ds, restricted)?;
    let dm_g = build_design(ds, general)?;
    let df = dm_g
        .n_fixed()
        .checked_sub(dm_r.n_fixed())
        .ok_or_else(|| Error::NotNested("general model has fewer columns than restricted".into()))?;
    if df == 0 {
        return Err(Error::DegenerateTest(
            "the general model adds no identifiable fixed-effect columns (all added columns \
             are aliased); the test has zero degrees of freedom"
                .into(),
        ));
    }

    let y = ds.response();
    let fit_r = fit(&dm_r, y, Criterion::Ml, opts)?;
    let fit_g = fit(&dm_g, y, Criterion::Ml, opts)?;

    let stat = (fit_r.deviance - fit_g.deviance).max(0.0);
    let converged = fit_r.converged && fit_g.converged;
    let p_value = converged.then(|| chi_square_sf(stat, df));

    // Effect size when the comparison adds exactly one two-level factor.
    let added = restricted.added_terms(general);
    let effect_size = match added.as_slice() {
        [FixedTerm::Main(name)] if ds.has_factor(name) => {
            let f = ds.factor(name)?;
            if f.n_levels() == 2 {
                let a: Vec<f64> = y
                    .iter()
                    .zip(f.codes())
                    .filter(|(_, &c)| c == 0)
                    .map(|(v, _)| *v)
                    .collect();
                let b: Vec<f64> = y
                    .iter()
                    .zip(f.codes())
                    .filter(|(_, &c)| c == 1)
                    .map(|(v, _)| *v)
                    .collect();
                if a.is_empty() || b.is_empty() {
                    None
                } else {
                    Some(standardized_mean_difference(&a, &b)?)
                }
            } else {
                None
            }
        }
        _ => None,
    };

    let mut dropped = dm_r.dropped.clone();
    for d in &dm_g.dropped {
        if !dropped.contains(d) {
            dropped.push(d.clone());
        }
    }

    Ok((
        GlrtResult {
            stat,
            df,
            p_value,
            lambda_ratio: (-stat / 2.0).exp(),
            effect_size,
            converged_restricted: fit_r.converged,
            converged_general: fit_g.converged,
            dropped_columns: dropped,
        },
        fit_r,
        fit_g,
    ))
}

/// Options for the conditional (data-property) test.
#[derive(Debug, Clone)]
pub struct ConditionalOptions {
    /// Test only the interaction coefficient (df = 1) instead of the joint
    /// system + interaction block (df = 2).
    pub interaction_only: bool,
    /// Z-score the covariate before fitting (recommended for conditioning;
    /// the test statistic is unaffected). Defaults to on.
    pub standardize: bool,
    pub fit: FitOptions,
}

impl Default for ConditionalOptions {
    fn default() -> Self {
        ConditionalOptions {
            interaction_only: false,
            standardize: true,
            fit: FitOptions::default(),
        }
    }
}

/// Fitted interaction structure for plotting: per-level intercepts/slopes on
/// the original covariate scale, plus the covariate range for grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionModel {
    pub factor: String,
    pub covariate: String,
    pub levels: Vec<String>,
    /// (level, intercept, slope) of the population-level line per level, on
    /// the original covariate scale.
    pub lines: Vec<LevelLine>,
    pub covariate_min: f64,
    pub covariate_max: f64,
    pub scaling: Option<ScalingRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelLine {
    pub level: String,
    pub intercept: f64,
    pub slope: f64,
}

/// One grid point of predicted population-level scores.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridPoint {
    pub covariate_value: f64,
    pub level: String,
    pub predicted_score: f64,
}

impl InteractionModel {
    /// Evenly spaced prediction grid over the observed covariate range, one
    /// line per factor level; columns (covariate_value, level, predicted).
    pub fn grid(&self, points: usize) -> Vec<GridPoint> {
        let points = points.max(2);
        let step = (self.covariate_max - self.covariate_min) / (points - 1) as f64;
        let mut out = Vec::with_capacity(points * self.lines.len());
        for i in 0..points {
            let x = self.covariate_min + step * i as f64;
            for line in &self.lines {
                out.push(GridPoint {
                    covariate_value: x,
                    level: line.level.clone(),
                    predicted_score: line.intercept + line.slope * x,
                });
            }
        }
        out
    }
}

/// Result of a conditional test: the GLRT plus the fitted interaction lines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalTest {
    pub glrt: GlrtResult,
    pub model: InteractionModel,
}

pub(crate) fn extract_interaction_model(
    ds: &EvalDataset,
    fm: &FittedModel,
    factor: &str,
    covariate: &str,
    scaling: Option<&ScalingRecord>,
) -> Result<InteractionModel> {
    let f = ds.factor(factor)?;
    let cov_orig = ds.covariate(covariate)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in cov_orig {
        lo = lo.min(v);
        hi = hi.max(v);
    }

    // Coefficients are on the fitted (possibly standardized) scale; a missing
    // (aliased, dropped) coefficient contributes zero.
    let coef = |name: &str| fm.coefficient(name).unwrap_or(0.0);
    let base_intercept = coef("(Intercept)");
    let base_slope = coef(covariate);
    let mut lines = Vec::new();
    for (i, level) in f.levels().iter().enumerate() {
        let (dev_i, dev_s) = if i == 0 {
            (0.0, 0.0)
        } else {
            (
                coef(&format!("{factor}={level}")),
                coef(&format!("{factor}={level}:{covariate}")),
            )
        };
        let (mut intercept, mut slope) = (base_intercept + dev_i, base_slope + dev_s);
        if let Some(sc) = scaling.and_then(|s| s.get(covariate)) {
            // y = a + b*(x-mean)/sd  =>  intercept a - b*mean/sd, slope b/sd
            intercept -= slope * sc.mean / sc.sd;
            slope /= sc.sd;
        }
        lines.push(LevelLine {
            level: level.clone(),
            intercept,
            slope,
        });
    }

    Ok(InteractionModel {
        factor: factor.to_string(),
        covariate: covariate.to_string(),
        levels: f.levels().to_vec(),
        lines,
        covariate_min: lo,
        covariate_max: hi,
        scaling: scaling.cloned(),
    })
}

/// Conditional system comparison: fits `y ~ 1 + d + (1|object)` against
/// `y ~ 1 + d + system + system:d + (1|object)` (jointly, df = 2) or, with
/// `interaction_only`, tests just the interaction coefficient (df = 1).
pub fn glrt_conditional(
    ds: &EvalDataset,
    covariate: &str,
    system_factor: &str,
    object_factor: &str,
    opts: &ConditionalOptions,
) -> Result<ConditionalTest> {
    if !ds.has_covariate(covariate) {
        return Err(Error::UnknownCovariate(covariate.to_string()));
    }
    ds.factor(system_factor)?;
    ds.factor(object_factor)?;

    let (fit_ds, scaling) = if opts.standardize {
        let (d, record) = standardize_covariates(ds, &[covariate.to_string()])?;
        (d, Some(record))
    } else {
        (ds.clone(), None)
    };

    let response = ds.response_name();
    let random = vec![object_factor.to_string()];
    let restricted_terms: Vec<FixedTerm> = if opts.interaction_only {
        vec![
            FixedTerm::Main(covariate.to_string()),
            FixedTerm::Main(system_factor.to_string()),
        ]
    } else {
        vec![FixedTerm::Main(covariate.to_string())]
    };
    let general_terms = vec![
        FixedTerm::Main(covariate.to_string()),
        FixedTerm::Main(system_factor.to_string()),
        FixedTerm::interaction(system_factor, covariate),
    ];
    let restricted = ModelSpec::new(response, restricted_terms, random.clone(), false)?;
    let general = ModelSpec::new(response, general_terms, random, false)?;

    let (glrt, _, fit_g) = glrt_with_fits(&fit_ds, &restricted, &general, &opts.fit)?;
    let model = extract_interaction_model(ds, &fit_g, system_factor, covariate, scaling.as_ref())?;
    Ok(ConditionalTest { glrt, model })
}

/// Cohen's d with the pooled standard deviation,
/// `(mean_a - mean_b) / s_pooled`. The first argument is the baseline, so a
/// negative value means the competitor scored higher.
pub fn standardized_mean_difference(scores_a: &[f64], scores_b: &[f64]) -> Result<f64> {
    if scores_a.is_empty() || scores_b.is_empty() {
        return Err(Error::Structural(
            "effect size requires two non-empty score vectors".into(),
        ));
    }
    let (na, nb) = (scores_a.len() as f64, scores_b.len() as f64);
    let mean_a = scores_a.iter().sum::<f64>() / na;
    let mean_b = scores_b.iter().sum::<f64>() / nb;
    let ss_a: f64 = scores_a.iter().map(|v| (v - mean_a) * (v - mean_a)).sum();
    let ss_b: f64 = scores_b.iter().map(|v| (v - mean_b) * (v - mean_b)).sum();
    let dof = na + nb - 2.0;
    let s_pooled = if dof > 0.0 { ((ss_a + ss_b) / dof).sqrt() } else { 0.0 };
    if s_pooled == 0.0 {
        return if mean_a == mean_b {
            Ok(0.0)
        } else {
            Err(Error::InfiniteEffectSize)
        };
    }
    Ok((mean_a - mean_b) / s_pooled)
}
