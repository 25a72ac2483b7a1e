use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;

fn v(x: &[f64]) -> Vector {
    Vector::new(x.to_vec()).unwrap()
}

fn randn(rng: &mut impl Rng, dim: usize, scale: f64) -> Vector {
    v(&(0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect::<Vec<_>>())
}

/// Direct-space Gaussian density, written independently of the log-space code.
fn density(x: &[f64], mean: &[f64], var: f64) -> f64 {
    let d = x.len() as f64;
    let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b).powi(2)).sum();
    (2.0 * std::f64::consts::PI * var).powf(-d / 2.0) * (-sq / (2.0 * var)).exp()
}

fn reference_e_step(points: &[Vector], s: &GmmState) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|x| {
            let num: Vec<f64> = (0..s.means.len())
                .map(|k| s.weights[k] * density(x, &s.means[k], s.variances[k]))
                .collect();
            let den: f64 = num.iter().sum();
            num.iter().map(|n| n / den).collect()
        })
        .collect()
}

fn reference_m_step(points: &[Vector], g: &[Vec<f64>], floor: f64) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let d = points[0].dim();
    let mut means = Vec::new();
    let mut vars = Vec::new();
    let mut weights = Vec::new();
    for k in 0..g[0].len() {
        let nk: f64 = g.iter().map(|r| r[k]).sum();
        let mut mu = vec![0.0; d];
        for (x, r) in points.iter().zip(g) {
            for j in 0..d {
                mu[j] += r[k] * x[j];
            }
        }
        mu.iter_mut().for_each(|m| *m /= nk);
        let mut s = 0.0;
        for (x, r) in points.iter().zip(g) {
            for j in 0..d {
                s += r[k] * (x[j] - mu[j]).powi(2);
            }
        }
        vars.push((s / (nk * d as f64)).max(floor));
        weights.push(nk / points.len() as f64);
        means.push(mu);
    }
    (means, vars, weights)
}

#[test]
fn candidate_set_construction() {
    let c = build_candidate_set(&[v(&[1.0, 0.0])], &v(&[0.0, 1.0])).unwrap();
    assert_eq!(c.vectors(), &[v(&[1.0, 0.0]), v(&[0.0, 1.0])]);

    let c = build_candidate_set(&[v(&[1.0, 0.0]), v(&[2.0, 0.0])], &v(&[0.0, 1.0])).unwrap();
    assert_eq!(c.len(), 4);
    assert_eq!(c.vectors()[2], c.vectors()[3]);

    let c = build_candidate_set(&[v(&[1.0, 1.0])], &v(&[1.0, 1.0])).unwrap();
    assert_eq!(c.vectors()[0], c.vectors()[1]);

    assert!(build_candidate_set(&[v(&[1.0])], &v(&[0.0, 1.0])).is_err());
    assert!(build_candidate_set(&[], &v(&[0.0, 1.0])).is_err());
}

#[test]
fn e_step_dominant_component() {
    let points = [v(&[0.0, 0.0]), v(&[3.0, 0.0]), v(&[0.0, -2.0])];
    let mut s = GmmState::init(&points, 1.0);
    s.weights = vec![1.0 - 2e-300, 1e-300, 1e-300];
    s.variances = vec![100.0, 1.0, 1.0];
    let (g, _) = e_step(&points, &s);
    for row in &g {
        assert!(row[0] > 1.0 - 1e-12, "{row:?}");
    }
}

#[test]
fn e_step_symmetric_midpoint() {
    let means = [v(&[-1.0, 0.0]), v(&[1.0, 0.0])];
    let s = GmmState::init(&means, 0.7);
    let (g, _) = e_step(&[v(&[0.0, 3.0])], &s);
    assert!((g[0][0] - 0.5).abs() < 1e-15);
    assert!((g[0][1] - 0.5).abs() < 1e-15);
}

#[test]
fn e_step_matches_direct_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let points: Vec<Vector> = (0..5).map(|_| randn(&mut rng, 3, 1.0)).collect();
        let means: Vec<Vector> = (0..3).map(|_| randn(&mut rng, 3, 1.0)).collect();
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let state = GmmState {
            means,
            variances: (0..3).map(|_| rng.random_range(0.5..2.0)).collect(),
            weights: raw.iter().map(|w| w / total).collect(),
            log_likelihood: vec![],
        };
        let (g, ll) = e_step(&points, &state);
        let expected = reference_e_step(&points, &state);
        for (a, b) in g.iter().flatten().zip(expected.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
        let direct_ll: f64 = points
            .iter()
            .map(|x| {
                (0..3)
                    .map(|k| state.weights[k] * density(x, &state.means[k], state.variances[k]))
                    .sum::<f64>()
                    .ln()
            })
            .sum();
        assert!((ll - direct_ll).abs() < 1e-10);
    }
}

#[test]
fn m_step_hard_assignment() {
    let points = [v(&[1.0, 2.0]), v(&[-1.0, 0.5]), v(&[3.0, 3.0])];
    let prev = GmmState::init(&[v(&[0.0, 0.0]), v(&[0.0, 0.0]), v(&[0.0, 0.0])], 1.0);
    let eye: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| (i == j) as u8 as f64).collect()).collect();
    let cfg = ScalerConfig::default();
    let s = m_step(&points, &eye, &prev, &cfg);
    assert_eq!(s.means, points);
    assert!(s.weights.iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-15));
    assert!(s.variances.iter().all(|&x| x == cfg.var_floor));
}

#[test]
fn m_step_uniform_responsibilities() {
    let points = [v(&[1.0, 2.0]), v(&[-1.0, 0.5]), v(&[3.0, 3.0]), v(&[0.0, 0.0])];
    let prev = GmmState::init(&points, 1.0);
    let uniform = vec![vec![0.25; 4]; 4];
    let s = m_step(&points, &uniform, &prev, &ScalerConfig::default());
    let mean = Vector::mean(&points).unwrap();
    for m in &s.means {
        for (a, b) in m.iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn m_step_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = ScalerConfig::default();
    for _ in 0..20 {
        let points: Vec<Vector> = (0..4).map(|_| randn(&mut rng, 5, 1.0)).collect();
        let g: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let r: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..1.0)).collect();
                let t: f64 = r.iter().sum();
                r.iter().map(|x| x / t).collect()
            })
            .collect();
        let prev = GmmState::init(&points, 1.0);
        let s = m_step(&points, &g, &prev, &cfg);
        let (means, vars, weights) = reference_m_step(&points, &g, cfg.var_floor);
        for k in 0..4 {
            for (a, b) in s.means[k].iter().zip(&means[k]) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((s.variances[k] - vars[k]).abs() < 1e-12);
            assert!((s.weights[k] - weights[k]).abs() < 1e-12);
        }
    }
}

#[test]
fn m_step_fixed_variance_and_dead_component() {
    let points = [v(&[1.0]), v(&[2.0])];
    let mut prev = GmmState::init(&points, 0.3);
    prev.means = vec![v(&[5.0]), v(&[7.0])];
    let g = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
    let cfg = ScalerConfig {
        variance_mode: VarianceMode::Fixed,
        ..ScalerConfig::default()
    };
    let s = m_step(&points, &g, &prev, &cfg);
    assert_eq!(s.variances[0], 0.3);
    assert_eq!(s.means[0], v(&[1.5]));
    // Component 1 received nothing: mean kept, variance floored, weight zero.
    assert_eq!(s.means[1], v(&[7.0]));
    assert_eq!(s.variances[1], cfg.var_floor);
    assert_eq!(s.weights[1], 0.0);
}

#[test]
fn em_identical_pair_keeps_equal_weights() {
    let c = build_candidate_set(&[v(&[0.4, -0.2])], &v(&[0.4, -0.2])).unwrap();
    let s = em_fit(&c, &ScalerConfig::default());
    assert_eq!(s.weights[0], s.weights[1]);
    assert!((s.weights[0] - 0.5).abs() < 1e-15);
}

#[test]
fn em_symmetric_pair_stays_balanced_every_iteration() {
    let points = [v(&[-1.0, 0.0]), v(&[1.0, 0.0])];
    let cfg = ScalerConfig::default();
    let mut state = GmmState::init(&points, cfg.init_variance);
    for _ in 0..cfg.max_iter {
        let (g, _) = e_step(&points, &state);
        state = m_step(&points, &g, &state, &cfg);
        assert!((state.weights[0] - 0.5).abs() < 1e-15);
        assert!((state.weights[1] - 0.5).abs() < 1e-15);
    }
    let c = build_candidate_set(&[v(&[-1.0, 0.0])], &v(&[1.0, 0.0])).unwrap();
    let fitted = em_fit(&c, &cfg);
    assert!(fitted.weights.iter().all(|w| (w - 0.5).abs() < 1e-15));
}

#[test]
fn em_trace_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for mode in [VarianceMode::IsotropicUpdated, VarianceMode::Fixed] {
        let cfg = ScalerConfig {
            variance_mode: mode,
            ..ScalerConfig::default()
        };
        for _ in 0..50 {
            let support: Vec<Vector> = (0..2).map(|_| randn(&mut rng, 8, 0.5)).collect();
            let c = build_candidate_set(&support, &randn(&mut rng, 8, 0.5)).unwrap();
            let s = em_fit(&c, &cfg);
            assert!(s.log_likelihood.len() >= 2);
            for w in s.log_likelihood.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{mode:?}: {:?}", s.log_likelihood);
            }
            assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(s.variances.iter().all(|&x| x >= cfg.var_floor));
        }
    }
}

#[test]
fn em_stops_at_max_iter() {
    let c = build_candidate_set(&[v(&[0.0, 0.0]), v(&[0.3, 0.1])], &v(&[1.0, 1.0])).unwrap();
    let cfg = ScalerConfig {
        max_iter: 1,
        ..ScalerConfig::default()
    };
    assert_eq!(em_fit(&c, &cfg).log_likelihood.len(), 2);
}

#[test]
fn fuse_examples() {
    let s = v(&[4.0, 0.0]);
    let u = v(&[0.0, 4.0]);
    assert_eq!(fuse(&s, &u, 1.0, 0.0).unwrap(), s);
    assert_eq!(fuse(&s, &u, 0.3, 0.3).unwrap(), v(&[2.0, 2.0]));
    assert_eq!(fuse(&s, &u, 1.0, 3.0).unwrap(), v(&[1.0, 3.0]));
    assert!(fuse(&s, &u, 0.0, 0.0).is_err());
    assert!(fuse(&s, &u, -1.0, 2.0).is_err());
}

fn episode(support: Vec<Vec<Vector>>, labels: Vec<Vector>) -> EmbeddedEpisode {
    let n = labels.len();
    EmbeddedEpisode {
        class_names: (0..n).map(|i| format!("c{i}")).collect(),
        query_reps: labels.iter().map(|l| vec![l.clone()]).collect(),
        support_reps: support,
        label_reps: labels,
    }
}

#[test]
fn scaling_is_identity_when_label_equals_supports() {
    let l = v(&[0.5, 1.5, -1.0]);
    let ep = episode(vec![vec![l.clone(), l.clone(), l.clone()]], vec![l.clone()]);
    let out = scale_support_set(&ep, &ScalerConfig::default()).unwrap();
    assert_eq!(out, ep);
}

#[test]
fn one_shot_scaling_is_midpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let support: Vec<Vec<Vector>> = (0..3).map(|_| vec![randn(&mut rng, 6, 1.0)]).collect();
    let labels: Vec<Vector> = (0..3).map(|_| randn(&mut rng, 6, 1.0)).collect();
    let ep = episode(support.clone(), labels.clone());
    let out = scale_support_set(&ep, &ScalerConfig::default()).unwrap();
    for c in 0..3 {
        for ((o, s), u) in out.support_reps[c][0].iter().zip(support[c][0].iter()).zip(labels[c].iter()) {
            assert!((o - 0.5 * (s + u)).abs() < 1e-12);
        }
    }
    assert_eq!(out.query_reps, ep.query_reps);
    assert_eq!(out.label_reps, ep.label_reps);
}

/// Step-by-step pipeline built from the direct-density reference EM.
fn reference_scale(support: &[Vector], label: &Vector, cfg: &ScalerConfig) -> Vec<Vec<f64>> {
    let k = support.len();
    let mut points: Vec<Vector> = support.to_vec();
    points.extend(std::iter::repeat_n(label.clone(), k));
    let n = points.len();
    let mut state = GmmState::init(&points, cfg.init_variance);
    let ll = |s: &GmmState| -> f64 {
        points
            .iter()
            .map(|x| {
                (0..n)
                    .map(|j| s.weights[j] * density(x, &s.means[j], s.variances[j]))
                    .sum::<f64>()
                    .ln()
            })
            .sum()
    };
    let mut prev = ll(&state);
    for _ in 0..cfg.max_iter {
        let g = reference_e_step(&points, &state);
        let (means, vars, weights) = reference_m_step(&points, &g, cfg.var_floor);
        state.means = means.into_iter().map(|m| v(&m)).collect();
        state.variances = vars;
        state.weights = weights;
        let cur = ll(&state);
        let gain = cur - prev;
        prev = cur;
        if gain < cfg.ll_tolerance {
            break;
        }
    }
    (0..k)
        .map(|i| {
            let (a, b) = (state.weights[i], state.weights[k + i]);
            support[i]
                .iter()
                .zip(label.iter())
                .map(|(s, u)| (a * s + b * u) / (a + b))
                .collect()
        })
        .collect()
}

#[test]
fn scaling_matches_reference_pipeline() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = ScalerConfig {
        max_iter: 8,
        var_floor: 0.05,
        ..ScalerConfig::default()
    };
    for _ in 0..10 {
        let support: Vec<Vec<Vector>> = (0..3)
            .map(|_| (0..3).map(|_| randn(&mut rng, 3, 0.6)).collect())
            .collect();
        let labels: Vec<Vector> = (0..3).map(|_| randn(&mut rng, 3, 0.6)).collect();
        let out = scale_support_set(&episode(support.clone(), labels.clone()), &cfg).unwrap();
        for c in 0..3 {
            let expected = reference_scale(&support[c], &labels[c], &cfg);
            for (o, e) in out.support_reps[c].iter().zip(&expected) {
                for (a, b) in o.iter().zip(e) {
                    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn pooled_pairing_uses_total_label_weight() {
    let support = vec![v(&[0.0, 0.0]), v(&[1.0, 0.0])];
    let label = v(&[0.0, 1.0]);
    let base = ScalerConfig::default();
    let pooled = ScalerConfig {
        pairing: WeightPairing::Pooled,
        ..base
    };
    let state = em_fit(&build_candidate_set(&support, &label).unwrap(), &base);
    let total: f64 = state.weights[2..].iter().sum();
    let out = scale_class(&support, &label, &pooled).unwrap();
    for (i, o) in out.iter().enumerate() {
        let e = fuse(&support[i], &label, state.weights[i], total).unwrap();
        assert_eq!(o, &e);
    }
}

#[test]
fn label_copies_stay_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let support: Vec<Vector> = (0..5).map(|_| randn(&mut rng, 16, 1.0)).collect();
    let c = build_candidate_set(&support, &randn(&mut rng, 16, 1.0)).unwrap();
    let s = em_fit(&c, &ScalerConfig::default());
    for k in 6..10 {
        assert_eq!(s.weights[k], s.weights[5]);
        assert_eq!(s.means[k], s.means[5]);
    }
}

proptest! {
    #[test]
    fn scaling_is_permutation_equivariant(
        raw in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 3),
        label in prop::collection::vec(-2.0f64..2.0, 4),
        rot in 1usize..3,
    ) {
        let support: Vec<Vector> = raw.iter().map(|x| v(x)).collect();
        let label = v(&label);
        let cfg = ScalerConfig::default();
        let base = scale_class(&support, &label, &cfg).unwrap();
        let mut rotated = support.clone();
        rotated.rotate_left(rot);
        let out = scale_class(&rotated, &label, &cfg).unwrap();
        let mut expected = base.clone();
        expected.rotate_left(rot);
        for (a, b) in out.iter().zip(&expected) {
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fused_point_is_no_farther_than_endpoints(
        s in prop::collection::vec(-3.0f64..3.0, 3),
        u in prop::collection::vec(-3.0f64..3.0, 3),
        m in prop::collection::vec(-3.0f64..3.0, 3),
        ws in 0.0f64..1.0,
        wu in 0.001f64..1.0,
    ) {
        let (s, u, m) = (v(&s), v(&u), v(&m));
        let f = fuse(&s, &u, ws, wu).unwrap();
        prop_assert!(f.distance(&m) <= s.distance(&m).max(u.distance(&m)) + 1e-12);
    }
}
