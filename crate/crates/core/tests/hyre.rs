mod common;

use std::time::Instant;

use common::{normal_matrix, rng, simplex};
use dashu_float::FBig;
use hyre_core::ensemble::{build_ensemble, sigmoid, Architecture, EnsembleConfig};
use hyre_core::hyre::{
    best_head, cumulative_head_losses, generalized_update, per_point_losses, point_loss, weighted_combine,
    weighted_predict, BeliefState, Combine, Outcome, PointLoss, Prediction,
};
use hyre_core::tasks::Dataset;
use hyre_core::{Error, Matrix};
use proptest::prelude::*;
use rand::Rng as _;

/// `exp(-L_k) / Σ_j exp(-L_j)` evaluated with 256-bit mantissas and no max-subtraction.
fn extended_weights(losses: &[f64]) -> Vec<f64> {
    let exps: Vec<FBig> = losses
        .iter()
        .map(|&l| FBig::try_from(-l).unwrap().with_precision(256).value().exp())
        .collect();
    let total = exps.iter().fold(FBig::ZERO.with_precision(256).value(), |acc, e| acc + e);
    exps.iter().map(|e| (e / &total).to_f64().value()).collect()
}

fn belief_from(losses: &[f64]) -> BeliefState {
    let mut b = BeliefState::uniform(losses.len()).unwrap();
    b.accumulate(losses).unwrap();
    b
}

#[test]
fn init_and_weight_examples() {
    assert_eq!(BeliefState::uniform(4).unwrap().weights(), vec![0.25; 4]);
    assert_eq!(BeliefState::uniform(1).unwrap().weights(), vec![1.0]);
    let w = BeliefState::uniform(100).unwrap().weights();
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert!(matches!(BeliefState::uniform(0), Err(Error::InvalidArgument(_))));

    assert_eq!(belief_from(&[3.0; 5]).weights(), vec![0.2; 5]);
    let two = belief_from(&[0.0, 1.0]).weights();
    assert!((two[0] - 0.731059).abs() < 5e-7 && (two[1] - 0.268941).abs() < 5e-7);
    let three = belief_from(&[0.0, 1.0, 2.0]).weights();
    for (a, e) in three.iter().zip([0.665241, 0.244728, 0.090031]) {
        assert!((a - e).abs() < 5e-7);
    }
    let shifted = belief_from(&[1000.0, 1001.0, 1002.0]).weights();
    for (a, b) in three.iter().zip(&shifted) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn point_loss_examples() {
    let zo = PointLoss::zero_one();
    assert_eq!(point_loss(zo, Prediction::Scalar(2.3), Outcome::Label(true)).unwrap(), 0.0);
    assert_eq!(
        point_loss(PointLoss::SquaredError, Prediction::Scalar(2.0), Outcome::Real(1.0)).unwrap(),
        1.0
    );
    let pair = Prediction::Pair { chosen: 0.7, rejected: 0.7 };
    assert_eq!(point_loss(PointLoss::preference(), pair, Outcome::Preferred).unwrap(), 1.0);
    assert!(matches!(
        point_loss(PointLoss::SquaredError, Prediction::Scalar(0.0), Outcome::Label(true)),
        Err(Error::InvalidArgument(_))
    ));
    assert!(matches!(
        point_loss(zo, pair, Outcome::Preferred),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn accumulate_examples() {
    let mut b = belief_from(&[0.5, 1.5, 2.0]);
    let before = b.clone();
    b.accumulate(&[0.0; 3]).unwrap();
    assert_eq!(b, before);

    let (v1, v2) = ([0.25, 1.0, 3.0], [0.5, 0.125, 2.0]);
    let mut seq = BeliefState::uniform(3).unwrap();
    seq.accumulate(&v1).unwrap();
    seq.accumulate(&v2).unwrap();
    let sum: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
    assert_eq!(seq, belief_from(&sum));

    assert!(matches!(b.accumulate(&[-0.1, 0.0, 0.0]), Err(Error::InvalidArgument(_))));
    assert!(matches!(b.accumulate(&[f64::INFINITY, 0.0, 0.0]), Err(Error::InvalidArgument(_))));
}

#[test]
fn zero_one_accumulation_counts_errors() {
    let mut r = rng(12);
    let (k, n) = (6, 16);
    let outputs = normal_matrix(k, n, &mut r);
    let labels: Vec<bool> = (0..n).map(|_| r.random()).collect();
    let data = Dataset::binary(Matrix::zeros(n, 1), labels.clone()).unwrap();
    let mut b = BeliefState::uniform(k).unwrap();
    b.accumulate(&cumulative_head_losses(&outputs, &data, PointLoss::zero_one()).unwrap())
        .unwrap();
    for h in 0..k {
        let errors = (0..n).filter(|&i| (outputs.get(h, i) > 0.0) != labels[i]).count();
        assert_eq!(b.cumulative_losses()[h], errors as f64);
    }
}

#[test]
fn weights_match_extended_precision_oracle() {
    let mut r = rng(2024);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = r.random_range(1..=5);
        let losses: Vec<f64> = (0..k).map(|_| r.random_range(0.0..100.0)).collect();
        let got = belief_from(&losses).weights();
        for (a, b) in got.iter().zip(extended_weights(&losses)) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-12, "worst abs error {worst:e}");
    assert!(start.elapsed().as_secs_f64() < 1.0, "{:?}", start.elapsed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn shift_invariance(losses in prop::collection::vec(0.0f64..1e3, 1..8), c in 0.0f64..1e3) {
        let a = belief_from(&losses).weights();
        let shifted: Vec<f64> = losses.iter().map(|l| l + c).collect();
        let b = belief_from(&shifted).weights();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12, "{} vs {}", x, y);
        }
    }

    #[test]
    fn sequential_equals_batch(
        batches in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 1..20)
    ) {
        let mut seq = BeliefState::uniform(4).unwrap();
        let mut total = vec![0.0; 4];
        for b in &batches {
            seq.accumulate(b).unwrap();
            for (t, v) in total.iter_mut().zip(b) {
                *t += v;
            }
        }
        let batch = belief_from(&total).weights();
        for (x, y) in seq.weights().iter().zip(&batch) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn simplex_and_monotone(losses in prop::collection::vec(0.0f64..1e6, 1..10)) {
        let w = belief_from(&losses).weights();
        let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for a in 0..losses.len() {
            for b in 0..losses.len() {
                if losses[a] < losses[b] {
                    prop_assert!(w[a] >= w[b]);
                    // Beyond ~700 above the minimum both weights underflow to zero.
                    if losses[b] - losses[a] < 30.0 && losses[b] - min < 700.0 {
                        prop_assert!(w[a] > w[b]);
                    }
                }
            }
        }
    }
}

#[test]
fn shift_invariance_at_exact_constant() {
    let losses = [0.3, 2.0, 5.5, 1.25];
    let a = belief_from(&losses).weights();
    let b = belief_from(&losses.map(|l| l + 1000.0)).weights();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn generalized_update_examples() {
    let losses = [0.4, 1.9, 0.0, 3.2];
    let from_uniform = generalized_update(&[0.25; 4], &losses).unwrap();
    let via_weights = belief_from(&losses).weights();
    for (a, b) in from_uniform.iter().zip(&via_weights) {
        assert!((a - b).abs() < 1e-12);
    }

    let coin = generalized_update(&[0.5, 0.5], &[-(0.9f64.ln()), -(0.1f64.ln())]).unwrap();
    assert!((coin[0] - 0.9).abs() < 1e-12 && (coin[1] - 0.1).abs() < 1e-12);

    let (d1, d2) = ([0.2, 1.0, 0.5], [1.5, 0.1, 0.7]);
    let prior = [0.2, 0.5, 0.3];
    let chained = generalized_update(&generalized_update(&prior, &d1).unwrap(), &d2).unwrap();
    let summed: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + b).collect();
    let once = generalized_update(&prior, &summed).unwrap();
    for (a, b) in chained.iter().zip(&once) {
        assert!((a - b).abs() < 1e-12);
    }

    assert!(matches!(
        generalized_update(&[0.5, 0.6], &[0.0, 0.0]),
        Err(Error::InvalidArgument(_))
    ));
}

/// Enumerable hypothesis spaces: biased coins with a random prior, random flip sequences.
#[test]
fn generalized_update_is_bayes_with_log_likelihood_loss() {
    let mut r = rng(77);
    for _ in 0..100 {
        let k = r.random_range(2..=6);
        let bias: Vec<f64> = (0..k).map(|_| r.random_range(0.05..0.95)).collect();
        let prior = simplex(k, &mut r);
        let flips: Vec<bool> = (0..r.random_range(1..30)).map(|_| r.random()).collect();

        let mut post = prior.clone();
        for &heads in &flips {
            let nll: Vec<f64> = bias.iter().map(|&p| -(if heads { p } else { 1.0 - p }).ln()).collect();
            post = generalized_update(&post, &nll).unwrap();
        }

        let joint: Vec<f64> = (0..k)
            .map(|h| {
                prior[h]
                    * flips
                        .iter()
                        .map(|&f| if f { bias[h] } else { 1.0 - bias[h] })
                        .product::<f64>()
            })
            .collect();
        let evidence: f64 = joint.iter().sum();
        for (a, j) in post.iter().zip(&joint) {
            assert!((a - j / evidence).abs() < 1e-12);
        }
    }
}

#[test]
fn weighted_predict_examples() {
    let mut c = EnsembleConfig::new(Architecture::SharedBase, 5, 3);
    c.hidden = vec![8];
    let m = build_ensemble(&c).unwrap();
    let mut r = rng(3);
    let x = normal_matrix(12, 3, &mut r);
    let out = m.forward(&x).unwrap();

    let uniform = weighted_predict(&m, &BeliefState::uniform(5).unwrap(), &x, Combine::Raw).unwrap();
    for n in 0..12 {
        let mean = (0..5).map(|k| out.get(k, n)).sum::<f64>() / 5.0;
        assert!((uniform[n] - mean).abs() < 1e-12);
    }

    let one_hot = belief_from(&[0.0, 1e6, 1e6, 1e6, 1e6]);
    let raw = weighted_predict(&m, &one_hot, &x, Combine::Raw).unwrap();
    let prob = weighted_predict(&m, &one_hot, &x, Combine::Probabilities).unwrap();
    for n in 0..12 {
        assert!((raw[n] - out.get(0, n)).abs() < 1e-9);
        assert!((prob[n] - sigmoid(out.get(0, n))).abs() < 1e-9);
    }

    for _ in 0..20 {
        let w = simplex(5, &mut r);
        let got = weighted_combine(&out, &w, Combine::Raw).unwrap();
        for n in 0..12 {
            let dot: f64 = (0..5).map(|k| w[k] * out.get(k, n)).sum();
            assert!((got[n] - dot).abs() <= 1e-12 * (1.0 + dot.abs()));
        }
    }

    assert!(matches!(
        weighted_predict(&m, &BeliefState::uniform(4).unwrap(), &x, Combine::Raw),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn best_head_examples() {
    let mut c = EnsembleConfig::new(Architecture::Vanilla, 5, 2);
    c.hidden = vec![8];
    let mut identical = build_ensemble(&c).unwrap();
    if let hyre_core::ensemble::Body::Vanilla { members } = &mut identical.body {
        let first = members[0].clone();
        members.iter_mut().for_each(|m| *m = first.clone());
    }
    let mut r = rng(5);
    let x = normal_matrix(50, 2, &mut r);
    let labels: Vec<bool> = (0..50).map(|_| r.random()).collect();
    let data = Dataset::binary(x.clone(), labels.clone()).unwrap();
    assert_eq!(best_head(&identical, &data, PointLoss::zero_one()).unwrap(), 0);

    for seed in 0..10 {
        c.seed = seed;
        let m = build_ensemble(&c).unwrap();
        let out = m.forward(&x).unwrap();
        let mut brute = (usize::MAX, usize::MAX);
        for k in 0..5 {
            let errors = (0..50).filter(|&i| (out.get(k, i) > 0.0) != labels[i]).count();
            if errors < brute.1 {
                brute = (k, errors);
            }
        }
        assert_eq!(best_head(&m, &data, PointLoss::zero_one()).unwrap(), brute.0);
    }

    // Relabel to agree with head 3 exactly.
    let m = build_ensemble(&c).unwrap();
    let out = m.forward(&x).unwrap();
    let agree: Vec<bool> = (0..50).map(|i| out.get(3, i) > 0.0).collect();
    let per = per_point_losses(&out, &Dataset::binary(x.clone(), agree.clone()).unwrap(), PointLoss::zero_one())
        .unwrap();
    assert!(per.row(3).iter().all(|&l| l == 0.0));
    let best = best_head(&m, &Dataset::binary(x.clone(), agree).unwrap(), PointLoss::zero_one()).unwrap();
    assert!(per.row(best).iter().all(|&l| l == 0.0) && best <= 3);

    let empty = data.select(&[]);
    assert!(matches!(
        best_head(&m, &empty, PointLoss::zero_one()),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn belief_record_round_trip() {
    let mut b = BeliefState::uniform(4)
        .unwrap()
        .with_temperature(2.5)
        .unwrap()
        .with_log_prior(vec![0.0, -1.0, 0.5, 1e-7])
        .unwrap();
    b.accumulate(&[0.1, 0.2, 1.0 / 3.0, 12.0]).unwrap();
    let back: BeliefState = b.to_string().parse().unwrap();
    assert_eq!(back, b);
    for (x, y) in back.weights().iter().zip(b.weights()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    assert!(matches!("k = 2\n".parse::<BeliefState>(), Err(Error::Format(_))));
}
