//! Training objectives with analytic gradients.
//!
//! * [`loss_lg`] pulls each sample toward its class label vector and away from
//!   the other labels (softmax over raw inner products / tau).
//! * [`loss_label`] spreads the label vectors apart.
//! * [`loss_all`] is their sum.
//! * [`loss_ce`] is the cross-entropy baseline over cosine similarities to
//!   prototypes.
//!
//! All softmax terms are evaluated in log space with max subtraction.

mod gradcheck;

pub use gradcheck::{check_loss_inputs, finite_diff_check, numeric_gradient};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::{axpy, log_sum_exp, Vector};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Cross-entropy over the cosine-softmax classifier.
    Ce,
    /// Label-guided loss only.
    Lg,
    /// Label-guided loss plus the label separation term.
    LgPlusLabel,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Ce, LossKind::Lg, LossKind::LgPlusLabel];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Lg => "lg",
            LossKind::LgPlusLabel => "lg_plus_label",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            kind: LossKind::LgPlusLabel,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

/// Loss value plus gradients. `grad_v` follows the sample (or query) inputs,
/// `grad_u` the label (or prototype) inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad_v: Vec<Vec<f64>>,
    pub grad_u: Vec<Vec<f64>>,
}

impl LossResult {
    fn zeros(n_v: usize, n_u: usize, dim: usize) -> Self {
        LossResult {
            value: 0.0,
            grad_v: vec![vec![0.0; dim]; n_v],
            grad_u: vec![vec![0.0; dim]; n_u],
        }
    }

    /// Concatenated gradients, `grad_v` first, matching [`check_loss_inputs`].
    pub fn flat_grad(&self) -> Vec<f64> {
        self.grad_v
            .iter()
            .chain(&self.grad_u)
            .flatten()
            .copied()
            .collect()
    }
}

pub(crate) fn check_temperature(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(tau))
    }
}

fn common_dim(groups: &[&[Vector]]) -> Result<usize> {
    let dim = groups
        .iter()
        .flat_map(|g| g.iter())
        .map(Vector::dim)
        .next()
        .ok_or_else(|| Error::ShapeMismatch("no input vectors".into()))?;
    for v in groups.iter().flat_map(|g| g.iter()) {
        v.check_dim(dim)?;
    }
    Ok(dim)
}

/// Label-guided loss over a batch of samples with class ids indexing `labels`.
///
/// Every sample of a class shares one label vector, so the per-sample sums over
/// same-label batch entries collapse to a single term per class whenever each
/// class has the same number of samples in the batch, which is always true for
/// an N-way episode. This function evaluates that per-class form.
pub fn loss_lg(
    samples: &[Vector],
    classes: &[usize],
    labels: &[Vector],
    tau: f64,
) -> Result<LossResult> {
    check_temperature(tau)?;
    if samples.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    if samples.len() != classes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples but {} class ids",
            samples.len(),
            classes.len()
        )));
    }
    if let Some(&bad) = classes.iter().find(|&&c| c >= labels.len()) {
        return Err(Error::ShapeMismatch(format!(
            "class id {bad} but only {} labels",
            labels.len()
        )));
    }
    let dim = common_dim(&[samples, labels])?;
    let n = labels.len();
    let c = samples.len() as f64;
    let mut out = LossResult::zeros(samples.len(), n, dim);
    let mut logits = vec![0.0; n];

    for (t, (v, &y)) in samples.iter().zip(classes).enumerate() {
        for (z, u) in logits.iter_mut().zip(labels) {
            *z = v.dot(u) / tau;
        }
        let lse = log_sum_exp(&logits);
        out.value += (lse - logits[y]) / c;
        for (r, u) in labels.iter().enumerate() {
            let p = (logits[r] - lse).exp();
            let coeff = (p - if r == y { 1.0 } else { 0.0 }) / (c * tau);
            axpy(&mut out.grad_v[t], coeff, u);
            axpy(&mut out.grad_u[r], coeff, v);
        }
    }
    Ok(out)
}

/// Label separation loss. The numerator keeps the self inner product
/// `u_i . u_i` and the denominator includes it once, so a single label gives
/// exactly zero.
pub fn loss_label(labels: &[Vector], tau: f64) -> Result<LossResult> {
    check_temperature(tau)?;
    if labels.is_empty() {
        return Err(Error::ShapeMismatch("no labels".into()));
    }
    let dim = common_dim(&[labels])?;
    let n = labels.len();
    let mut out = LossResult::zeros(0, n, dim);
    let mut logits = vec![0.0; n];
    let nf = n as f64;

    for (i, ui) in labels.iter().enumerate() {
        for (z, uj) in logits.iter_mut().zip(labels) {
            *z = ui.dot(uj) / tau;
        }
        let lse = log_sum_exp(&logits);
        out.value += (lse - logits[i]) / nf;
        // z_ij = u_i . u_j / tau feeds both u_i and u_j; the diagonal feeds u_i twice.
        for (j, uj) in labels.iter().enumerate() {
            let p = (logits[j] - lse).exp();
            let g = (p - if i == j { 1.0 } else { 0.0 }) / (nf * tau);
            axpy(&mut out.grad_u[i], g, uj);
            axpy(&mut out.grad_u[j], g, ui);
        }
    }
    Ok(out)
}

pub fn loss_all(
    samples: &[Vector],
    classes: &[usize],
    labels: &[Vector],
    tau: f64,
) -> Result<LossResult> {
    let mut out = loss_lg(samples, classes, labels, tau)?;
    let label = loss_label(labels, tau)?;
    out.value += label.value;
    for (g, h) in out.grad_u.iter_mut().zip(&label.grad_u) {
        axpy(g, 1.0, h);
    }
    Ok(out)
}

/// Cross-entropy of the cosine-softmax classifier, averaged over queries.
/// `grad_u` holds gradients with respect to the prototypes.
pub fn loss_ce(
    queries: &[Vector],
    classes: &[usize],
    prototypes: &[Vector],
    tau: f64,
) -> Result<LossResult> {
    check_temperature(tau)?;
    if queries.is_empty() {
        return Err(Error::ShapeMismatch("no queries".into()));
    }
    if queries.len() != classes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} queries but {} class ids",
            queries.len(),
            classes.len()
        )));
    }
    if let Some(&bad) = classes.iter().find(|&&c| c >= prototypes.len()) {
        return Err(Error::ShapeMismatch(format!(
            "class id {bad} but only {} prototypes",
            prototypes.len()
        )));
    }
    let dim = common_dim(&[queries, prototypes])?;
    let proto_norms = norms(prototypes)?;
    let query_norms = norms(queries)?;
    let n = prototypes.len();
    let c = queries.len() as f64;
    let mut out = LossResult::zeros(queries.len(), n, dim);
    let mut cos = vec![0.0; n];
    let mut logits = vec![0.0; n];

    for (t, (q, &y)) in queries.iter().zip(classes).enumerate() {
        let qn = query_norms[t];
        for k in 0..n {
            cos[k] = q.dot(&prototypes[k]) / (qn * proto_norms[k]);
            logits[k] = cos[k] / tau;
        }
        let lse = log_sum_exp(&logits);
        out.value += (lse - logits[y]) / c;
        for (k, proto) in prototypes.iter().enumerate() {
            let p = (logits[k] - lse).exp();
            let g = (p - if k == y { 1.0 } else { 0.0 }) / (c * tau);
            let pn = proto_norms[k];
            // d cos(a, b) / da = b / (|a||b|) - cos * a / |a|^2
            axpy(&mut out.grad_v[t], g / (qn * pn), proto);
            axpy(&mut out.grad_v[t], -g * cos[k] / (qn * qn), q);
            axpy(&mut out.grad_u[k], g / (qn * pn), q);
            axpy(&mut out.grad_u[k], -g * cos[k] / (pn * pn), proto);
        }
    }
    Ok(out)
}

fn norms(vs: &[Vector]) -> Result<Vec<f64>> {
    vs.iter()
        .map(|v| {
            let n = v.norm();
            if n == 0.0 {
                Err(Error::ZeroNorm)
            } else {
                Ok(n)
            }
        })
        .collect()
}
