//! Test-time label-guided scaler.
//!
//! For each class the K support vectors and K copies of the class label vector
//! form a candidate set of 2K points. A Gaussian mixture with one component per
//! candidate (initialized at the candidate) is fitted by EM, and each support
//! vector is replaced by the weighted mean of itself and the label vector,
//! using the fitted mixture weights of its own component and of its paired
//! label copy.
//!
//! Components are isotropic (`sigma^2 I`) with a variance floor; with 2K points
//! in a high-dimensional space a full covariance would be singular. The fusion
//! step only consumes mixture weights.

use serde::{Deserialize, Serialize};

use crate::data::EmbeddedEpisode;
use crate::error::{Error, Result};
use crate::vector::{axpy, log_sum_exp, Vector};

/// Components whose total responsibility falls below this keep their mean.
const DEAD_COMPONENT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    Fixed,
    IsotropicUpdated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPairing {
    /// Support `i` fuses with the weight of label copy `K + i`.
    Paired,
    /// Support `i` fuses with the summed weight of all label copies.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalerConfig {
    pub max_iter: usize,
    pub ll_tolerance: f64,
    pub init_variance: f64,
    pub var_floor: f64,
    pub variance_mode: VarianceMode,
    pub pairing: WeightPairing,
}

impl Default for ScalerConfig {
    fn default() -> Self {
        ScalerConfig {
            max_iter: 50,
            ll_tolerance: 1e-6,
            init_variance: 1.0,
            var_floor: 1e-4,
            variance_mode: VarianceMode::IsotropicUpdated,
            pairing: WeightPairing::Paired,
        }
    }
}

impl ScalerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if self.max_iter == 0
            || !positive(self.ll_tolerance)
            || !positive(self.init_variance)
            || !positive(self.var_floor)
        {
            return Err(Error::Config(format!("invalid scaler config {self:?}")));
        }
        Ok(())
    }
}

/// K support vectors followed by K copies of the label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    vectors: Vec<Vector>,
    k_shot: usize,
}

impl CandidateSet {
    pub fn vectors(&self) -> &[Vector] {
        &self.vectors
    }

    pub fn k_shot(&self) -> usize {
        self.k_shot
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

pub fn build_candidate_set(support: &[Vector], label: &Vector) -> Result<CandidateSet> {
    if support.is_empty() {
        return Err(Error::ShapeMismatch("candidate set needs K >= 1".into()));
    }
    for s in support {
        s.check_dim(label.dim())?;
    }
    let k = support.len();
    let mut vectors = Vec::with_capacity(2 * k);
    vectors.extend(support.iter().cloned());
    vectors.extend(std::iter::repeat_n(label.clone(), k));
    Ok(CandidateSet { vectors, k_shot: k })
}

/// Mixture parameters plus the log-likelihood after each EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmState {
    pub means: Vec<Vector>,
    pub variances: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_likelihood: Vec<f64>,
}

impl GmmState {
    /// One component per point, centred on it, equal weights.
    pub fn init(points: &[Vector], init_variance: f64) -> Self {
        let n = points.len();
        GmmState {
            means: points.to_vec(),
            variances: vec![init_variance; n],
            weights: vec![1.0 / n as f64; n],
            log_likelihood: Vec::new(),
        }
    }

    pub fn num_components(&self) -> usize {
        self.means.len()
    }
}

fn log_normal_isotropic(x: &[f64], mean: &[f64], variance: f64) -> f64 {
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
    let d = x.len() as f64;
    -0.5 * d * (2.0 * std::f64::consts::PI * variance).ln() - sq / (2.0 * variance)
}

/// Responsibilities `gamma[i][k] = P(z_i = k | x_i)` and the mixture
/// log-likelihood of `points`, both computed in log space.
pub fn e_step(points: &[Vector], state: &GmmState) -> (Vec<Vec<f64>>, f64) {
    let mut ll = 0.0;
    let mut log_terms = vec![0.0; state.num_components()];
    let resp = points
        .iter()
        .map(|x| {
            for (k, t) in log_terms.iter_mut().enumerate() {
                *t = state.weights[k].ln()
                    + log_normal_isotropic(x, &state.means[k], state.variances[k]);
            }
            let lse = log_sum_exp(&log_terms);
            ll += lse;
            log_terms.iter().map(|t| (t - lse).exp()).collect()
        })
        .collect();
    (resp, ll)
}

pub fn m_step(
    points: &[Vector],
    resp: &[Vec<f64>],
    prev: &GmmState,
    config: &ScalerConfig,
) -> GmmState {
    let n = points.len() as f64;
    let dim = points[0].dim();
    let k_count = prev.num_components();
    let mut means = Vec::with_capacity(k_count);
    let mut variances = Vec::with_capacity(k_count);
    let mut weights = Vec::with_capacity(k_count);

    for k in 0..k_count {
        let mass: f64 = resp.iter().map(|row| row[k]).sum();
        weights.push(mass / n);
        if mass < DEAD_COMPONENT {
            means.push(prev.means[k].clone());
            variances.push(config.var_floor);
            continue;
        }
        let mut mean = vec![0.0; dim];
        for (x, row) in points.iter().zip(resp) {
            axpy(&mut mean, row[k] / mass, x);
        }
        let variance = match config.variance_mode {
            VarianceMode::Fixed => prev.variances[k],
            VarianceMode::IsotropicUpdated => {
                let spread: f64 = points
                    .iter()
                    .zip(resp)
                    .map(|(x, row)| {
                        row[k]
                            * x.iter()
                                .zip(&mean)
                                .map(|(a, b)| (a - b) * (a - b))
                                .sum::<f64>()
                    })
                    .sum();
                (spread / (dim as f64 * mass)).max(config.var_floor)
            }
        };
        means.push(Vector::from_vec_unchecked(mean));
        variances.push(variance);
    }
    GmmState {
        means,
        variances,
        weights,
        log_likelihood: prev.log_likelihood.clone(),
    }
}

/// Runs EM from the per-candidate initialization until the log-likelihood gain
/// drops below `ll_tolerance` or `max_iter` M-steps have run. The returned
/// trace has one entry per evaluated state, starting with the initial one.
pub fn em_fit(candidates: &CandidateSet, config: &ScalerConfig) -> GmmState {
    let points = candidates.vectors();
    let mut state = GmmState::init(points, config.init_variance);
    let (mut resp, mut ll) = e_step(points, &state);
    let mut trace = vec![ll];
    for _ in 0..config.max_iter {
        state = m_step(points, &resp, &state, config);
        let (next_resp, next_ll) = e_step(points, &state);
        trace.push(next_ll);
        let gain = next_ll - ll;
        resp = next_resp;
        ll = next_ll;
        if gain < config.ll_tolerance {
            break;
        }
    }
    state.log_likelihood = trace;
    state
}

/// `(w_s * s + w_u * u) / (w_s + w_u)`
pub fn fuse(support: &Vector, label: &Vector, w_support: f64, w_label: f64) -> Result<Vector> {
    support.check_dim(label.dim())?;
    if w_support < 0.0 || w_label < 0.0 || !(w_support + w_label > 0.0) {
        return Err(Error::Numerical(format!(
            "cannot fuse with weights {w_support} and {w_label}"
        )));
    }
    let total = w_support + w_label;
    let (a, b) = (w_support / total, w_label / total);
    Vector::new(
        support
            .iter()
            .zip(label.iter())
            .map(|(s, u)| a * s + b * u)
            .collect(),
    )
}

/// Scales the support vectors of one class.
pub fn scale_class(support: &[Vector], label: &Vector, config: &ScalerConfig) -> Result<Vec<Vector>> {
    let candidates = build_candidate_set(support, label)?;
    let state = em_fit(&candidates, config);
    let k = support.len();
    let pooled: f64 = state.weights[k..].iter().sum();
    support
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let w_label = match config.pairing {
                WeightPairing::Paired => state.weights[k + i],
                WeightPairing::Pooled => pooled,
            };
            fuse(s, label, state.weights[i], w_label)
        })
        .collect()
}

/// Replaces each class's support vectors by their scaled versions. Query and
/// label vectors are passed through unchanged.
pub fn scale_support_set(episode: &EmbeddedEpisode, config: &ScalerConfig) -> Result<EmbeddedEpisode> {
    config.validate()?;
    episode.check()?;
    let support_reps = episode
        .support_reps
        .iter()
        .zip(&episode.label_reps)
        .map(|(support, label)| scale_class(support, label, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(EmbeddedEpisode {
        class_names: episode.class_names.clone(),
        support_reps,
        query_reps: episode.query_reps.clone(),
        label_reps: episode.label_reps.clone(),
    })
}

#[cfg(test)]
mod tests;
