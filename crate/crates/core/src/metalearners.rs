//! Per-episode classification heads.
//!
//! Prototypical networks average each class's support vectors and score a
//! query by a softmax over cosine similarity / tau. The ridge head fits a
//! closed-form ridge regression from support vectors to one-hot targets in
//! its dual form, `W = X^T (X X^T + lambda I)^-1 Y`, which only needs an
//! `NK x NK` solve.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::check_temperature;
use crate::vector::{softmax, Vector};

pub const DEFAULT_RIDGE_LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetaLearner {
    Pn,
    Rrml {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
}

fn default_lambda() -> f64 {
    DEFAULT_RIDGE_LAMBDA
}

impl Default for MetaLearner {
    fn default() -> Self {
        MetaLearner::Pn
    }
}

impl MetaLearner {
    pub fn name(&self) -> &'static str {
        match self {
            MetaLearner::Pn => "pn",
            MetaLearner::Rrml { .. } => "rrml",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prototypes {
    pub vectors: Vec<Vector>,
}

pub fn compute_prototypes(support: &[Vec<Vector>]) -> Result<Prototypes> {
    let vectors = support
        .iter()
        .map(|class| Vector::mean(class))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prototypes { vectors })
}

/// Softmax over `cos(query, c_k) / tau`.
pub fn classify_pn(query: &Vector, prototypes: &Prototypes, tau: f64) -> Result<Vec<f64>> {
    check_temperature(tau)?;
    let logits = prototypes
        .vectors
        .iter()
        .map(|c| {
            query.check_dim(c.dim())?;
            Ok(query.cosine(c)? / tau)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(softmax(&logits))
}

/// Index of the largest probability; ties go to the lowest index.
pub fn predict(probabilities: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probabilities.iter().enumerate().skip(1) {
        if p > probabilities[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    /// `dim x n_classes`
    pub weights: DMatrix<f64>,
    pub lambda: f64,
}

fn design_matrix(rows: &[Vector]) -> Result<DMatrix<f64>> {
    let dim = rows
        .first()
        .ok_or_else(|| Error::ShapeMismatch("ridge fit needs at least one row".into()))?
        .dim();
    for r in rows {
        r.check_dim(dim)?;
    }
    Ok(DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]))
}

/// Fits `W = X^T (X X^T + lambda I)^-1 Y` with `Y` the one-hot targets.
pub fn rrml_fit(support: &[Vector], classes: &[usize], n_classes: usize, lambda: f64) -> Result<RidgeModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("ridge lambda must be >= 0, got {lambda}")));
    }
    if support.len() != classes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows but {} targets",
            support.len(),
            classes.len()
        )));
    }
    if let Some(&bad) = classes.iter().find(|&&c| c >= n_classes) {
        return Err(Error::ShapeMismatch(format!("class {bad} >= {n_classes}")));
    }
    let x = design_matrix(support)?;
    let n = support.len();
    let y = DMatrix::from_fn(n, n_classes, |i, k| (classes[i] == k) as u8 as f64);
    let mut gram = &x * x.transpose();
    for i in 0..n {
        gram[(i, i)] += lambda;
    }
    let alpha = if lambda > 0.0 {
        gram.cholesky()
            .ok_or_else(|| Error::Numerical("ridge system is not positive definite".into()))?
            .solve(&y)
    } else {
        gram.lu()
            .solve(&y)
            .ok_or_else(|| Error::Numerical("singular ridge system at lambda = 0".into()))?
    };
    let weights = x.transpose() * alpha;
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numerical("non-finite ridge weights".into()));
    }
    Ok(RidgeModel { weights, lambda })
}

/// Softmax over the ridge scores `query^T W`.
pub fn rrml_predict(model: &RidgeModel, query: &Vector) -> Result<Vec<f64>> {
    query.check_dim(model.weights.nrows())?;
    let scores: Vec<f64> = (0..model.weights.ncols())
        .map(|k| {
            model
                .weights
                .column(k)
                .iter()
                .zip(query.iter())
                .map(|(w, q)| w * q)
                .sum()
        })
        .collect();
    Ok(softmax(&scores))
}
