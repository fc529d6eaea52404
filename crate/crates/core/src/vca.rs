//! Variance component analysis and the reliability coefficient.
//!
//! The decomposition fits an intercept-plus-random-intercepts model by REML:
//! each named factor contributes one variance component, and everything else
//! (including factor interactions, which have no replication of their own in
//! a one-observation-per-cell design) lands in the residual. Reliability is
//! the share of total variance attributable to the object-of-interest factor.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::EvalDataset;
use crate::design::build_design;
use crate::error::{Error, Result};
use crate::fit::{fit, Criterion, FitOptions, FittedModel};
use crate::formula::{FixedTerm, ModelSpec};
use crate::inference::{extract_interaction_model, GlrtResult, InteractionModel};

/// Qualitative reliability bands (Koo & Li cutoffs on the variance share).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpretation {
    Poor,
    Moderate,
    Good,
    Excellent,
}

impl Interpretation {
    pub fn from_phi(phi: f64) -> Interpretation {
        if phi < 0.50 {
            Interpretation::Poor
        } else if phi < 0.75 {
            Interpretation::Moderate
        } else if phi < 0.90 {
            Interpretation::Good
        } else {
            Interpretation::Excellent
        }
    }
}

impl std::fmt::Display for Interpretation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Interpretation::Poor => "poor",
            Interpretation::Moderate => "moderate",
            Interpretation::Good => "good",
            Interpretation::Excellent => "excellent",
        };
        write!(f, "{s}")
    }
}

/// Binary verdict against a plain threshold on the variance share
/// (e.g. 0.8 for the stricter published convention).
pub fn reliable_at(phi: f64, threshold: f64) -> bool {
    phi >= threshold
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VcaComponent {
    pub name: String,
    pub variance: f64,
    pub percent: f64,
}

/// Variance decomposition plus the reliability coefficient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VcaReport {
    pub components: Vec<VcaComponent>,
    pub phi: f64,
    pub object_of_interest: String,
    pub interpretation: Interpretation,
    pub converged: bool,
}

/// Reliability as the ratio of the object-of-interest variance to the total.
/// Pure arithmetic over a component map that must include the object.
pub fn compute_phi(
    components: &IndexMap<String, f64>,
    object_of_interest: &str,
) -> Result<(f64, Interpretation)> {
    let mut total = 0.0;
    for (name, &v) in components {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::NegativeComponent {
                name: name.clone(),
                value: v,
            });
        }
        total += v;
    }
    let substantial = *components
        .get(object_of_interest)
        .ok_or_else(|| Error::UnknownComponent(object_of_interest.to_string()))?;
    if total <= 0.0 {
        return Err(Error::UndefinedReliability);
    }
    let phi = substantial / total;
    Ok((phi, Interpretation::from_phi(phi)))
}

/// Build a [`VcaReport`] from already-estimated components.
pub fn report_from_components(
    components: &IndexMap<String, f64>,
    object_of_interest: &str,
    converged: bool,
) -> Result<VcaReport> {
    let (phi, interpretation) = compute_phi(components, object_of_interest)?;
    let total: f64 = components.values().sum();
    let list = components
        .iter()
        .map(|(name, &variance)| VcaComponent {
            name: name.clone(),
            variance,
            percent: 100.0 * variance / total,
        })
        .collect();
    Ok(VcaReport {
        components: list,
        phi,
        object_of_interest: object_of_interest.to_string(),
        interpretation,
        converged,
    })
}

/// Fit the variance decomposition `Y = mu + sum_f b_f + eps` by REML over the
/// named random factors and report shares and reliability.
pub fn vca(
    ds: &EvalDataset,
    random_factors: &[String],
    object_of_interest: &str,
    opts: &FitOptions,
) -> Result<VcaReport> {
    if !random_factors.iter().any(|f| f == object_of_interest) {
        return Err(Error::ModelSpec(format!(
            "object of interest `{object_of_interest}` must be one of the random factors"
        )));
    }
    let spec = ModelSpec::intercept_with_random(ds.response_name(), random_factors.to_vec())?;
    let dm = build_design(ds, &spec)?;
    let fm = fit(&dm, ds.response(), Criterion::Reml, opts)?;
    if !fm.converged {
        return Err(Error::NonConvergence {
            evals: fm.evals,
            criterion: fm.criterion.to_string(),
            detail: format!(
                "variance decomposition did not converge; last deviance {:.6}",
                fm.deviance
            ),
        });
    }
    report_from_components(&fm.sigma2, object_of_interest, fm.converged)
}

/// Result of the meta-parameter interaction analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InteractionAnalysis {
    /// GLRT of the interaction block (`meta:d`), df = retained interaction
    /// columns.
    pub glrt: GlrtResult,
    pub model: InteractionModel,
    pub fit: FittedModel,
}

/// Treat one facet as a fixed effect, add a data-property covariate and their
/// interaction, and test the interaction block:
/// `y ~ 1 + meta + d + (1|object)` vs `y ~ 1 + meta + d + meta:d + (1|object)`
/// by ML. Returns per-level prediction lines for plotting.
pub fn vca_with_interactions(
    ds: &EvalDataset,
    fixed_meta: &str,
    covariate: &str,
    object_of_interest: &str,
    opts: &FitOptions,
) -> Result<InteractionAnalysis> {
    ds.factor(fixed_meta)?;
    if !ds.has_covariate(covariate) {
        return Err(Error::UnknownCovariate(covariate.to_string()));
    }
    ds.factor(object_of_interest)?;

    let (fit_ds, scaling) =
        match crate::design::standardize_covariates(ds, &[covariate.to_string()]) {
            Ok((d, record)) => (d, Some(record)),
            // constant covariate: leave as-is, aliasing will flag degeneracy
            Err(Error::ZeroVarianceCovariate(_)) => (ds.clone(), None),
            Err(e) => return Err(e),
        };

    let response = ds.response_name();
    let random = vec![object_of_interest.to_string()];
    let restricted = ModelSpec::new(
        response,
        vec![
            FixedTerm::Main(fixed_meta.to_string()),
            FixedTerm::Main(covariate.to_string()),
        ],
        random.clone(),
        false,
    )?;
    let general = ModelSpec::new(
        response,
        vec![
            FixedTerm::Main(fixed_meta.to_string()),
            FixedTerm::Main(covariate.to_string()),
            FixedTerm::interaction(fixed_meta, covariate),
        ],
        random,
        false,
    )?;

    let (glrt, _, fit_g) =
        crate::inference::glrt_with_fits(&fit_ds, &restricted, &general, opts).map_err(|e| {
            match e {
                Error::DegenerateTest(msg) => Error::DegenerateTest(format!(
                    "interaction of `{fixed_meta}` with `{covariate}` is not identifiable \
                     (is the covariate constant?): {msg}"
                )),
                other => other,
            }
        })?;
    let model = extract_interaction_model(ds, &fit_g, fixed_meta, covariate, scaling.as_ref())?;
    Ok(InteractionAnalysis {
        glrt,
        model,
        fit: fit_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn components(entries: &[(&str, f64)]) -> IndexMap<String, f64> {
        entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn phi_trivial_cases() {
        let (phi, interp) = compute_phi(&components(&[("s", 1.0), ("residual", 0.0)]), "s").unwrap();
        assert_eq!(phi, 1.0);
        assert_eq!(interp, Interpretation::Excellent);

        let (phi, interp) = compute_phi(&components(&[("s", 0.0), ("residual", 1.0)]), "s").unwrap();
        assert_eq!(phi, 0.0);
        assert_eq!(interp, Interpretation::Poor);
    }

    #[test]
    fn phi_band_boundaries() {
        assert_eq!(Interpretation::from_phi(0.4999), Interpretation::Poor);
        assert_eq!(Interpretation::from_phi(0.50), Interpretation::Moderate);
        assert_eq!(Interpretation::from_phi(0.7499), Interpretation::Moderate);
        assert_eq!(Interpretation::from_phi(0.75), Interpretation::Good);
        assert_eq!(Interpretation::from_phi(0.8999), Interpretation::Good);
        assert_eq!(Interpretation::from_phi(0.90), Interpretation::Excellent);
        assert!(reliable_at(0.81, 0.8));
        assert!(!reliable_at(0.79, 0.8));
    }

    /// The published middle and bottom variance blocks are internally
    /// consistent; the ratios below are the exact arithmetic.
    #[test]
    fn phi_on_published_variance_blocks() {
        let rouge2 = components(&[
            ("summary_id", 0.00992),
            ("lambda", 0.00131),
            ("random_seed", 0.00008),
            ("noise_distribution", 0.00003),
            ("residual", 0.00449),
        ]);
        let (phi, interp) = compute_phi(&rouge2, "summary_id").unwrap();
        assert!((phi - 0.627).abs() < 0.001, "phi = {phi}");
        assert_eq!(interp, Interpretation::Moderate);

        let rouge_l = components(&[
            ("summary_id", 0.00875),
            ("lambda", 0.00519),
            ("random_seed", 0.00004),
            ("noise_distribution", 0.00001),
            ("residual", 0.00428),
        ]);
        let (phi, interp) = compute_phi(&rouge_l, "summary_id").unwrap();
        assert!((phi - 0.479).abs() < 0.001, "phi = {phi}");
        assert_eq!(interp, Interpretation::Poor);
    }

    #[test]
    fn report_percents_sum_to_100() {
        let report = report_from_components(
            &components(&[("s", 2.0), ("lambda", 1.0), ("residual", 1.0)]),
            "s",
            true,
        )
        .unwrap();
        let total: f64 = report.components.iter().map(|c| c.percent).sum();
        assert!((total - 100.0).abs() < 1e-9);
        assert!((report.phi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn phi_errors() {
        assert!(matches!(
            compute_phi(&components(&[("s", 0.0), ("residual", 0.0)]), "s"),
            Err(Error::UndefinedReliability)
        ));
        assert!(matches!(
            compute_phi(&components(&[("s", 1.0)]), "missing"),
            Err(Error::UnknownComponent(_))
        ));
        assert!(matches!(
            compute_phi(&components(&[("s", -0.1), ("residual", 1.0)]), "s"),
            Err(Error::NegativeComponent { .. })
        ));
    }

    #[test]
    fn removing_zero_component_leaves_phi_unchanged() {
        let with_zero = components(&[("s", 2.0), ("noise", 0.0), ("residual", 1.0)]);
        let without = components(&[("s", 2.0), ("residual", 1.0)]);
        let (a, _) = compute_phi(&with_zero, "s").unwrap();
        let (b, _) = compute_phi(&without, "s").unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn phi_is_monotone_in_substantial_variance(
            s1 in 0.0f64..10.0, s2 in 0.0f64..10.0, rest in 0.01f64..10.0
        ) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let (phi_lo, _) = compute_phi(&components(&[("s", lo), ("residual", rest)]), "s").unwrap();
            let (phi_hi, _) = compute_phi(&components(&[("s", hi), ("residual", rest)]), "s").unwrap();
            prop_assert!(phi_hi >= phi_lo - 1e-15);
        }

        #[test]
        fn phi_is_scale_invariant(c in 0.01f64..100.0, s in 0.0f64..5.0, r in 0.01f64..5.0) {
            let (phi1, _) = compute_phi(&components(&[("s", s), ("residual", r)]), "s").unwrap();
            let (phi2, _) = compute_phi(&components(&[("s", s * c), ("residual", r * c)]), "s").unwrap();
            prop_assert!((phi1 - phi2).abs() < 1e-12);
        }
    }
}
