//! Numeric design matrices from a dataset and a model specification.
//!
//! Factor fixed effects use reference-level (treatment) coding with the
//! first-appearing level as the reference, so a two-level factor contributes
//! one indicator column whose coefficient is the deviation from the baseline
//! mean. Interactions are elementwise products of the coded columns.
//! Rank-deficient fixed-effect matrices are repaired by dropping aliased
//! columns in left-to-right order; the dropped names are recorded.

use serde::{Deserialize, Serialize};

use crate::data::EvalDataset;
use crate::error::{Error, Result};
use crate::formula::{FixedTerm, ModelSpec};
use crate::linalg::Mat;

/// Recipe for one fixed-effect column. Levels are stored by label so a
/// design can be re-materialized on new data with the same meaning.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnDesc {
    Intercept,
    /// Indicator of `factor == level`.
    FactorLevel { factor: String, level: String },
    Covariate(String),
    /// Indicator of `factor == level` times the covariate value.
    FactorCovariate {
        factor: String,
        level: String,
        covariate: String,
    },
    /// Product of two indicators.
    FactorFactor {
        factor_a: String,
        level_a: String,
        factor_b: String,
        level_b: String,
    },
}

impl ColumnDesc {
    pub fn name(&self) -> String {
        match self {
            ColumnDesc::Intercept => "(Intercept)".into(),
            ColumnDesc::FactorLevel { factor, level } => format!("{factor}={level}"),
            ColumnDesc::Covariate(c) => c.clone(),
            ColumnDesc::FactorCovariate {
                factor,
                level,
                covariate,
            } => format!("{factor}={level}:{covariate}"),
            ColumnDesc::FactorFactor {
                factor_a,
                level_a,
                factor_b,
                level_b,
            } => format!("{factor_a}={level_a}:{factor_b}={level_b}"),
        }
    }

    fn values(&self, ds: &EvalDataset) -> Result<Vec<f64>> {
        let n = ds.n_rows();
        match self {
            ColumnDesc::Intercept => Ok(vec![1.0; n]),
            ColumnDesc::FactorLevel { factor, level } => {
                let f = ds.factor(factor)?;
                let code = f
                    .level_index(level)
                    .ok_or_else(|| Error::Structural(format!(
                        "level `{level}` of factor `{factor}` is not declared in the dataset"
                    )))?;
                Ok(f.codes()
                    .iter()
                    .map(|&c| if c == code { 1.0 } else { 0.0 })
                    .collect())
            }
            ColumnDesc::Covariate(c) => Ok(ds.covariate(c)?.to_vec()),
            ColumnDesc::FactorCovariate {
                factor,
                level,
                covariate,
            } => {
                let ind = ColumnDesc::FactorLevel {
                    factor: factor.clone(),
                    level: level.clone(),
                }
                .values(ds)?;
                let cov = ds.covariate(covariate)?;
                Ok(ind.iter().zip(cov).map(|(i, c)| i * c).collect())
            }
            ColumnDesc::FactorFactor {
                factor_a,
                level_a,
                factor_b,
                level_b,
            } => {
                let a = ColumnDesc::FactorLevel {
                    factor: factor_a.clone(),
                    level: level_a.clone(),
                }
                .values(ds)?;
                let b = ColumnDesc::FactorLevel {
                    factor: factor_b.clone(),
                    level: level_b.clone(),
                }
                .values(ds)?;
                Ok(a.iter().zip(&b).map(|(x, y)| x * y).collect())
            }
        }
    }
}

/// One random-intercept block of Z: an N x m indicator matrix represented by
/// the per-row level code. Every row has exactly one nonzero entry, equal to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ZBlock {
    pub factor: String,
    pub n_levels: usize,
    pub codes: Vec<u32>,
}

/// Fixed- and random-effect design matrices for one model on one dataset.
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    pub x: Mat,
    pub z_blocks: Vec<ZBlock>,
    pub columns: Vec<ColumnDesc>,
    pub column_names: Vec<String>,
    /// Names of aliased fixed-effect columns that were dropped.
    pub dropped: Vec<String>,
}

impl DesignMatrices {
    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_fixed(&self) -> usize {
        self.x.cols()
    }

    /// Re-materialize this design (same retained columns, no new aliasing
    /// pass) on another dataset, e.g. a prediction grid. The new dataset must
    /// declare the referenced factor levels.
    pub fn for_new_data(&self, ds: &EvalDataset) -> Result<DesignMatrices> {
        let cols: Vec<Vec<f64>> = self
            .columns
            .iter()
            .map(|d| d.values(ds))
            .collect::<Result<_>>()?;
        let n = ds.n_rows();
        let mut x = Mat::zeros(n, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for i in 0..n {
                *x.at_mut(i, j) = col[i];
            }
        }
        let z_blocks = self
            .z_blocks
            .iter()
            .map(|zb| {
                let f = ds.factor(&zb.factor)?;
                Ok(ZBlock {
                    factor: zb.factor.clone(),
                    n_levels: f.n_levels(),
                    codes: f.codes().to_vec(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(DesignMatrices {
            x,
            z_blocks,
            columns: self.columns.clone(),
            column_names: self.column_names.clone(),
            dropped: self.dropped.clone(),
        })
    }
}

enum Role {
    Factor,
    Covariate,
}

fn role(ds: &EvalDataset, name: &str) -> Result<Role> {
    if ds.has_factor(name) {
        Ok(Role::Factor)
    } else if ds.has_covariate(name) {
        Ok(Role::Covariate)
    } else {
        Err(Error::UnknownTerm(name.to_string()))
    }
}

/// Expand a term into candidate column descriptors.
fn expand_term(ds: &EvalDataset, term: &FixedTerm) -> Result<Vec<ColumnDesc>> {
    match term {
        FixedTerm::Intercept => Ok(vec![ColumnDesc::Intercept]),
        FixedTerm::Main(name) => match role(ds, name)? {
            Role::Covariate => Ok(vec![ColumnDesc::Covariate(name.clone())]),
            Role::Factor => {
                let f = ds.factor(name)?;
                Ok(f.levels()[1..]
                    .iter()
                    .map(|lvl| ColumnDesc::FactorLevel {
                        factor: name.clone(),
                        level: lvl.clone(),
                    })
                    .collect())
            }
        },
        FixedTerm::Interaction(a, b) => {
            let (ra, rb) = (role(ds, a)?, role(ds, b)?);
            match (ra, rb) {
                (Role::Covariate, Role::Covariate) => Err(Error::ModelSpec(format!(
                    "interaction `{a}:{b}` multiplies two covariates; only factor:factor and \
                     factor:covariate interactions are supported"
                ))),
                (Role::Factor, Role::Covariate) => factor_cov_columns(ds, a, b),
                (Role::Covariate, Role::Factor) => factor_cov_columns(ds, b, a),
                (Role::Factor, Role::Factor) => {
                    let fa = ds.factor(a)?;
                    let fb = ds.factor(b)?;
                    let mut out = Vec::new();
                    for la in &fa.levels()[1..] {
                        for lb in &fb.levels()[1..] {
                            out.push(ColumnDesc::FactorFactor {
                                factor_a: a.clone(),
                                level_a: la.clone(),
                                factor_b: b.clone(),
                                level_b: lb.clone(),
                            });
                        }
                    }
                    Ok(out)
                }
            }
        }
    }
}

fn factor_cov_columns(ds: &EvalDataset, factor: &str, cov: &str) -> Result<Vec<ColumnDesc>> {
    let f = ds.factor(factor)?;
    Ok(f.levels()[1..]
        .iter()
        .map(|lvl| ColumnDesc::FactorCovariate {
            factor: factor.to_string(),
            level: lvl.clone(),
            covariate: cov.to_string(),
        })
        .collect())
}

/// Build design matrices for `spec` on `ds`.
pub fn build_design(ds: &EvalDataset, spec: &ModelSpec) -> Result<DesignMatrices> {
    if spec.response != ds.response_name() {
        return Err(Error::ModelSpec(format!(
            "formula response `{}` does not match dataset response `{}`",
            spec.response,
            ds.response_name()
        )));
    }
    for r in &spec.random_factors {
        if !ds.has_factor(r) {
            return Err(Error::UnknownFactor(r.clone()));
        }
    }

    let n = ds.n_rows();
    let mut candidates: Vec<ColumnDesc> = Vec::new();
    for term in &spec.fixed_terms {
        candidates.extend(expand_term(ds, term)?);
    }

    // Aliasing repair: keep columns left to right, dropping any whose
    // residual after projection onto the kept ones is numerically zero.
    let mut kept: Vec<(ColumnDesc, Vec<f64>)> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut dropped = Vec::new();
    for desc in candidates {
        let col = desc.values(ds)?;
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            dropped.push(desc.name());
            continue;
        }
        let mut resid = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = crate::linalg::dot(q, &resid);
                for (r, qv) in resid.iter_mut().zip(q) {
                    *r -= proj * qv;
                }
            }
        }
        let rnorm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= 1e-8 * norm0 {
            dropped.push(desc.name());
            continue;
        }
        for r in resid.iter_mut() {
            *r /= rnorm;
        }
        basis.push(resid);
        kept.push((desc, col));
    }

    if kept.is_empty() {
        return Err(Error::ModelSpec(
            "no identifiable fixed-effect columns remain after aliasing repair".into(),
        ));
    }

    let mut x = Mat::zeros(n, kept.len());
    for (j, (_, col)) in kept.iter().enumerate() {
        for i in 0..n {
            *x.at_mut(i, j) = col[i];
        }
    }
    let columns: Vec<ColumnDesc> = kept.iter().map(|(d, _)| d.clone()).collect();
    let column_names = columns.iter().map(|d| d.name()).collect();

    let z_blocks = spec
        .random_factors
        .iter()
        .map(|name| {
            let f = ds.factor(name)?;
            Ok(ZBlock {
                factor: name.clone(),
                n_levels: f.n_levels(),
                codes: f.codes().to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DesignMatrices {
        x,
        z_blocks,
        columns,
        column_names,
        dropped,
    })
}

/// Per-covariate centering/scaling constants, kept so fitted effects can be
/// mapped back to the original scale.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CovariateScale {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct ScalingRecord {
    pub scales: Vec<CovariateScale>,
}

impl ScalingRecord {
    pub fn get(&self, name: &str) -> Option<&CovariateScale> {
        self.scales.iter().find(|s| s.name == name)
    }

    /// Map an original-scale covariate value to the standardized scale.
    pub fn transform(&self, name: &str, value: f64) -> f64 {
        match self.get(name) {
            Some(s) => (value - s.mean) / s.sd,
            None => value,
        }
    }
}

/// Z-score the named covariates (denominator n-1), returning the transformed
/// dataset and the applied constants.
pub fn standardize_covariates(
    ds: &EvalDataset,
    names: &[String],
) -> Result<(EvalDataset, ScalingRecord)> {
    let mut out = ds.clone();
    let mut record = ScalingRecord::default();
    for name in names {
        let values = out.covariate(name)?.to_vec();
        let n = values.len();
        if n < 2 {
            return Err(Error::ZeroVarianceCovariate(name.clone()));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if sd == 0.0 || !sd.is_finite() {
            return Err(Error::ZeroVarianceCovariate(name.clone()));
        }
        let transformed = values.iter().map(|v| (v - mean) / sd).collect();
        out = out.replace_covariate(name, transformed)?;
        record.scales.push(CovariateScale {
            name: name.clone(),
            mean,
            sd,
        });
    }
    Ok((out, record))
}
