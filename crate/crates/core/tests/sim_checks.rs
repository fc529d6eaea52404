//! Monte-Carlo checks of estimation accuracy, test calibration, and power
//! that go beyond the acceptance gate: conditional-test uniformity under the
//! null, power under generated interaction effects, and recovery of known
//! generating parameters.

mod common;

use common::*;
use evalvar::design::build_design;
use evalvar::fit::{fit, Criterion, FitOptions, RESIDUAL_KEY};
use evalvar::formula::ModelSpec;
use evalvar::inference::{glrt_conditional, ConditionalOptions};
use evalvar::sim::{mc_replications, simulate, SimSpec};
use evalvar::vca::vca_with_interactions;
use evalvar::{mc_study, CovariateSpec};

fn conditional_spec(n_sentences: usize, slope_gap: f64, seed: u64) -> SimSpec {
    let mut spec = SimSpec::new(n_sentences, 1.0, seed);
    spec.object_factor = "sentence".into();
    spec.facet_levels.insert("system".into(), 2);
    spec.variance_components.insert("sentence".into(), 1.0);
    spec.covariates
        .insert("d".into(), CovariateSpec::Normal { mean: 0.0, sd: 1.0 });
    spec.fixed_effects.insert("d".into(), 0.5);
    if slope_gap != 0.0 {
        spec.fixed_effects.insert("system=1:d".into(), slope_gap);
    }
    spec
}

#[test]
fn conditional_null_p_values_are_uniform() {
    let spec = conditional_spec(150, 0.0, 5150);
    let opts = ConditionalOptions::default();
    let p_values = mc_replications(&spec, 2000, |ds, _, _| {
        let r = glrt_conditional(ds, "d", "system", "sentence", &opts)?;
        Ok(r.glrt.p_value.expect("fits converge"))
    })
    .unwrap();
    let d = ks_uniform_stat(&p_values);
    let crit = ks_critical_01(p_values.len());
    assert!(d < crit, "KS {d:.4} >= critical {crit:.4}");
    assert_eq!(
        p_values.len(),
        2000,
        "every replication should produce a p-value"
    );
}

#[test]
fn conditional_test_has_power_against_slope_gaps() {
    // slopes differing by 0.5 * sd(d) at 500 sentences
    let spec = conditional_spec(500, 0.5, 6001);
    let opts = ConditionalOptions::default();
    let rejections = mc_replications(&spec, 200, |ds, _, _| {
        let r = glrt_conditional(ds, "d", "system", "sentence", &opts)?;
        Ok(r.glrt.p_value.expect("fits converge") < 0.05)
    })
    .unwrap();
    let rate = rejections.iter().filter(|&&r| r).count() as f64 / 200.0;
    assert!(rate > 0.9, "power {rate} too low");
}

#[test]
fn interaction_only_test_is_df1() {
    let spec = conditional_spec(100, 0.4, 777);
    let ds = simulate(&spec).unwrap();
    let opts = ConditionalOptions {
        interaction_only: true,
        ..Default::default()
    };
    let r = glrt_conditional(&ds, "d", "system", "sentence", &opts).unwrap();
    assert_eq!(r.glrt.df, 1);
    let joint = glrt_conditional(&ds, "d", "system", "sentence", &ConditionalOptions::default())
        .unwrap();
    assert_eq!(joint.glrt.df, 2);
}

fn meta_interaction_spec(slopes: [f64; 3], seed: u64) -> SimSpec {
    let mut spec = SimSpec::new(500, 1.0, seed);
    spec.object_factor = "sentence".into();
    spec.facet_levels.insert("lambda".into(), 3);
    spec.variance_components.insert("sentence".into(), 1.0);
    spec.covariates
        .insert("d".into(), CovariateSpec::Normal { mean: 0.0, sd: 1.0 });
    spec.fixed_effects.insert("d".into(), 0.3);
    for (i, s) in slopes.iter().enumerate() {
        if *s != 0.0 {
            spec.fixed_effects.insert(format!("lambda={i}:d"), *s);
        }
    }
    spec
}

#[test]
fn meta_interaction_power_with_distinct_slopes() {
    // slopes (0, 0, -0.5): the df=2 interaction block should reject
    let spec = meta_interaction_spec([0.0, 0.0, -0.5], 31412);
    let opts = FitOptions::default();
    let rejections = mc_replications(&spec, 150, |ds, _, _| {
        let a = vca_with_interactions(ds, "lambda", "d", "sentence", &opts)?;
        assert_eq!(a.glrt.df, 2);
        Ok(a.glrt.p_value.expect("fits converge") < 0.05)
    })
    .unwrap();
    let rate = rejections.iter().filter(|&&r| r).count() as f64 / 150.0;
    assert!(rate > 0.9, "power {rate} too low");
}

#[test]
fn meta_interaction_null_p_values_are_uniform() {
    let spec = meta_interaction_spec([0.0, 0.0, 0.0], 9090);
    let opts = FitOptions::default();
    let p_values = mc_replications(&spec, 1000, |ds, _, _| {
        let a = vca_with_interactions(ds, "lambda", "d", "sentence", &opts)?;
        Ok(a.glrt.p_value.expect("fits converge"))
    })
    .unwrap();
    let d = ks_uniform_stat(&p_values);
    let crit = ks_critical_01(p_values.len());
    assert!(d < crit, "KS {d:.4} >= critical {crit:.4}");
}

#[test]
fn constant_covariate_interaction_is_degenerate() {
    let mut spec = meta_interaction_spec([0.0, 0.0, 0.0], 11);
    spec.covariates
        .insert("d".into(), CovariateSpec::Normal { mean: 1.0, sd: 0.0 });
    let ds = simulate(&spec).unwrap();
    let err = vca_with_interactions(&ds, "lambda", "d", "sentence", &FitOptions::default())
        .unwrap_err();
    assert!(
        matches!(err, evalvar::Error::DegenerateTest(_)),
        "unexpected: {err}"
    );
}

#[test]
fn ml_estimates_recover_generating_parameters() {
    // two systems, 500 sentences, sigma2_s = 4, sigma2_res = 1, shift 0.5
    let mut spec = SimSpec::new(500, 1.0, 112358);
    spec.object_factor = "sentence".into();
    spec.facet_levels.insert("system".into(), 2);
    spec.variance_components.insert("sentence".into(), 4.0);
    spec.fixed_effects.insert("system=1".into(), 0.5);

    let model = ModelSpec::parse("score ~ 1 + system + (1|sentence)").unwrap();
    let opts = FitOptions::default();
    let per_rep = mc_replications(&spec, 50, |ds, _, _| {
        let dm = build_design(ds, &model)?;
        let fm = fit(&dm, ds.response(), Criterion::Reml, &opts)?;
        Ok([
            (fm.sigma2["sentence"] - 4.0).abs() / 4.0,
            (fm.sigma2[RESIDUAL_KEY] - 1.0).abs() / 1.0,
        ])
    })
    .unwrap();
    for (idx, name) in [(0, "sentence"), (1, "residual")] {
        let mut v: Vec<f64> = per_rep.iter().map(|r| r[idx]).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (v[24] + v[25]);
        assert!(median < 0.10, "median relative error for {name}: {median}");
    }
}

#[test]
fn estimated_phi_tracks_the_population_ratio() {
    // (sigma2_s, sigma2_lambda, sigma2_res) = (9, 3, 1): phi = 9/13
    let mut spec = SimSpec::new(400, 1.0, 271);
    spec.object_factor = "sentence".into();
    spec.facet_levels.insert("lambda".into(), 8);
    spec.variance_components.insert("sentence".into(), 9.0);
    spec.variance_components.insert("lambda".into(), 3.0);

    let opts = FitOptions::default();
    let phis = mc_replications(&spec, 80, |ds, _, _| {
        let report = evalvar::vca(
            ds,
            &["sentence".to_string(), "lambda".to_string()],
            "sentence",
            &opts,
        )?;
        Ok(report.phi)
    })
    .unwrap();
    let mut v = phis.clone();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = 0.5 * (v[39] + v[40]);
    let truth = 9.0 / 13.0;
    assert!(
        (median - truth).abs() < 0.05,
        "median phi {median:.3} vs population {truth:.3}"
    );
}

#[test]
fn balanced_icc_matches_the_anova_closed_form() {
    // single system, pure sentence structure: phi is the one-way ICC
    let mut spec = SimSpec::new(60, 1.0, 999);
    spec.object_factor = "sentence".into();
    spec.facet_levels.insert("rep".into(), 6);
    spec.variance_components.insert("sentence".into(), 2.0);
    let ds = simulate(&spec).unwrap();

    let report = evalvar::vca(
        &ds,
        &["sentence".to_string()],
        "sentence",
        &FitOptions::default(),
    )
    .unwrap();

    let codes: Vec<usize> = ds
        .factor("sentence")
        .unwrap()
        .codes()
        .iter()
        .map(|&c| c as usize)
        .collect();
    let (msb, msw, _, n_per) = balanced_anova(ds.response(), &codes, 60);
    let icc1 = (msb - msw) / (msb + (n_per as f64 - 1.0) * msw);
    assert!(
        (report.phi - icc1).abs() < 0.01,
        "phi {} vs ICC {icc1}",
        report.phi
    );
}

#[test]
fn monotone_nesting_holds_across_simulations() {
    let m0 = ModelSpec::parse("score ~ 1 + (1|sentence)").unwrap();
    let m1 = ModelSpec::parse("score ~ 1 + system + (1|sentence)").unwrap();
    let opts = FitOptions::default();
    let mut spec = SimSpec::new(80, 0.7, 4242);
    spec.object_factor = "sentence".into();
    spec.facet_levels.insert("system".into(), 2);
    spec.variance_components.insert("sentence".into(), 0.5);
    spec.fixed_effects.insert("system=1".into(), 0.1);

    mc_replications(&spec, 10, |ds, _, _| {
        let f0 = fit(&build_design(ds, &m0)?, ds.response(), Criterion::Ml, &opts)?;
        let f1 = fit(&build_design(ds, &m1)?, ds.response(), Criterion::Ml, &opts)?;
        assert!(
            f1.deviance <= f0.deviance + 1e-6,
            "general {} vs restricted {}",
            f1.deviance,
            f0.deviance
        );
        Ok(())
    })
    .unwrap();
}

#[test]
fn crossing_report_on_spec_shaped_design() {
    // drop exactly one (lambda, seed) cell: fraction 14/15 for that pair
    let mut spec = SimSpec::new(4, 1.0, 31);
    spec.facet_levels.insert("lambda".into(), 3);
    spec.facet_levels.insert("seed".into(), 5);
    let ds = simulate(&spec).unwrap();
    let lambda = ds.factor("lambda").unwrap().codes().to_vec();
    let seed = ds.factor("seed").unwrap().codes().to_vec();
    let keep: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| !(lambda[i] == 2 && seed[i] == 4))
        .collect();
    let sub = ds.select_rows(&keep).unwrap();
    let report = sub
        .validate_crossing(&["lambda".to_string(), "seed".to_string()])
        .unwrap();
    let frac = report.fraction("lambda", "seed").unwrap();
    assert!((frac - 14.0 / 15.0).abs() < 1e-12, "fraction {frac}");
}

#[test]
fn mc_null_rejection_rate_is_calibrated() {
    // compact version of the calibration run for the study driver itself
    let mut spec = SimSpec::new(120, 1.0, 8088);
    spec.object_factor = "sentence".into();
    spec.facet_levels.insert("system".into(), 2);
    spec.variance_components.insert("sentence".into(), 1.0);
    let m0 = ModelSpec::parse("score ~ 1 + (1|sentence)").unwrap();
    let m1 = ModelSpec::parse("score ~ 1 + system + (1|sentence)").unwrap();
    let opts = FitOptions::default();
    let summary = mc_study(&spec, 400, |ds| {
        Ok(evalvar::glrt(ds, &m0, &m1, &opts)?.p_value.unwrap())
    })
    .unwrap();
    let rate = summary.fraction(|p| p < 0.05);
    assert!(
        (0.02..=0.09).contains(&rate),
        "rejection rate {rate} at 400 replications"
    );
}
