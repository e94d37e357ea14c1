use super::*;
use crate::fewshot::{reject_unknown, Decision, RejectionRule};
use crate::seed::rng_from;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn top_n_examples() {
    let perfect: Vec<Vec<usize>> = (0..5)
        .map(|t| {
            let mut r = vec![t];
            r.extend((0..5).filter(|&c| c != t));
            r
        })
        .collect();
    let truths: Vec<usize> = (0..5).collect();
    for n in 1..=3 {
        assert_eq!(top_n_accuracy(&perfect, &truths, n), 1.0);
    }
    let second: Vec<Vec<usize>> = truths
        .iter()
        .map(|&t| {
            let other = (t + 1) % 10;
            let mut r = vec![other, t];
            r.extend((0..10).filter(|&c| c != t && c != other));
            r
        })
        .collect();
    assert_eq!(top_n_accuracy(&second, &truths, 1), 0.0);
    assert_eq!(top_n_accuracy(&second, &truths, 2), 1.0);
    assert_eq!(top_n_accuracy(&second, &truths, 3), 1.0);
}

#[test]
fn random_rankings_hit_chance() {
    let mut rng = rng_from(1);
    let mut rankings = Vec::new();
    let mut truths = Vec::new();
    for _ in 0..10_000 {
        let mut r: Vec<usize> = (0..10).collect();
        r.shuffle(&mut rng);
        rankings.push(r);
        truths.push(rng.gen_range(0..10));
    }
    assert!((top_n_accuracy(&rankings, &truths, 1) - 0.1).abs() < 0.01);
}

#[test]
fn ranking_breaks_ties_low() {
    assert_eq!(ranking(&[0.2, 0.5, 0.5, 0.1]), vec![1, 2, 0, 3]);
}

#[test]
fn prf1_examples() {
    let mut t = ConfusionTally::new(3);
    t.tp[0] = 3;
    t.fp[0] = 1;
    t.fn_[0] = 3;
    t.total = 7;
    let s = prf1(&t)[0];
    assert!((s.precision - 0.75).abs() < 1e-12);
    assert!((s.recall - 0.5).abs() < 1e-12);
    assert!((s.f1 - 0.6).abs() < 1e-12);
    assert_eq!(
        prf1(&t)[2],
        ClassScores {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0
        }
    );

    let perfect = ConfusionTally::from_predictions(3, &[0, 1, 2, 2], &[0, 1, 2, 2]);
    assert!(prf1(&perfect)
        .iter()
        .all(|s| s.precision == 1.0 && s.recall == 1.0 && s.f1 == 1.0));
    assert_eq!(perfect.micro_accuracy(), 1.0);
}

#[test]
fn micro_accuracy_is_tp_over_total() {
    let mut rng = rng_from(2);
    let preds: Vec<usize> = (0..500).map(|_| rng.gen_range(0..4)).collect();
    let truths: Vec<usize> = (0..500).map(|_| rng.gen_range(0..4)).collect();
    let t = ConfusionTally::from_predictions(4, &preds, &truths);
    let hits = preds.iter().zip(&truths).filter(|(p, y)| p == y).count();
    assert_eq!(t.micro_accuracy(), hits as f64 / 500.0);
    assert!(t.tp.iter().sum::<u64>() <= t.total);
}

#[test]
fn rmse_examples() {
    assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
    let p = [0.3, 1.2, -0.4];
    let t = [0.1, 1.0, 0.4];
    let scaled = |v: &[f64]| v.iter().map(|x| x * 3.0).collect::<Vec<_>>();
    assert!((rmse(&scaled(&p), &scaled(&t)).unwrap() - 3.0 * rmse(&p, &t).unwrap()).abs() < 1e-12);
    assert!(matches!(
        rmse(&[1.0], &[]),
        Err(EvalError::LengthMismatch(1, 0))
    ));
}

#[test]
fn volume_binning() {
    assert_eq!(
        volume_bin_classify(&[49.0], &[51.0], 2, (0.0, 100.0)).unwrap(),
        0.0
    );
    for n in [2, 3, 5, 10] {
        let v = [12.0, 400.0, 3700.0];
        assert_eq!(volume_bin_classify(&v, &v, n, VOLUME_RANGE).unwrap(), 1.0);
    }
    assert_eq!(volume_bin(-5.0, 5, VOLUME_RANGE), 0);
    assert_eq!(volume_bin(1e9, 5, VOLUME_RANGE), 4);
    let brute = |v: f64, n: usize, (lo, hi): (f64, f64)| {
        let v = v.clamp(lo, hi);
        let w = (hi - lo) / n as f64;
        (0..n).rev().find(|&i| v >= lo + i as f64 * w).unwrap()
    };
    let mut rng = rng_from(3);
    for _ in 0..1000 {
        let v = rng.gen_range(-100.0..4000.0);
        for n in [2, 3, 5, 10] {
            assert_eq!(
                volume_bin(v, n, VOLUME_RANGE),
                brute(v, n, VOLUME_RANGE),
                "{v} {n}"
            );
        }
    }
}

fn blob_pool(classes: usize, per_class: usize, spread: f64, seed: u64) -> OpenSetPool {
    let mut rng = rng_from(seed);
    OpenSetPool {
        classes: (0..classes)
            .map(|c| {
                (0..per_class)
                    .map(|_| {
                        (0..4)
                            .map(|k| if k == c % 4 { 5.0 * (1 + c / 4) as f64 } else { 0.0 } + spread * { let z: f64 = StandardNormal.sample(&mut rng); z })
                            .collect()
                    })
                    .collect()
            })
            .collect(),
    }
}

#[test]
fn open_set_knownness() {
    let pool = blob_pool(8, 10, 0.3, 4);
    let mut cfg = OpenSetConfig {
        trials: 1000,
        n_way: 3,
        k_shot: 5,
        p_known: 0.5,
    };
    let scores = open_set_trial(&pool, cfg, &mut rng_from(5)).unwrap();
    let frac = scores.iter().filter(|s| s.known).count() as f64 / 1000.0;
    assert!((frac - 0.5).abs() < 0.05, "{frac}");
    assert_eq!(
        scores,
        open_set_trial(&pool, cfg, &mut rng_from(5)).unwrap()
    );
    // separated blobs: known queries are much closer to a prototype
    assert!(roc_auc(&scores).unwrap().auc > 0.95);
    cfg.p_known = 0.0;
    let all_unknown = open_set_trial(&pool, cfg, &mut rng_from(6)).unwrap();
    assert!(all_unknown.iter().all(|s| !s.known));
    cfg.n_way = 8;
    assert!(matches!(
        open_set_trial(&pool, cfg, &mut rng_from(6)),
        Err(EvalError::EmptyPool(_))
    ));
}

fn scores_from(known: &[f64], unknown: &[f64]) -> Vec<OpenSetScore> {
    known
        .iter()
        .map(|&d| OpenSetScore {
            distance: d,
            known: true,
        })
        .chain(unknown.iter().map(|&d| OpenSetScore {
            distance: d,
            known: false,
        }))
        .collect()
}

fn mann_whitney(scores: &[OpenSetScore]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for u in scores.iter().filter(|s| !s.known) {
        for k in scores.iter().filter(|s| s.known) {
            pairs += 1.0;
            if u.distance > k.distance {
                wins += 1.0;
            } else if u.distance == k.distance {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

#[test]
fn roc_examples() {
    let sep = roc_auc(&scores_from(&[0.1, 0.2, 0.3], &[1.0, 2.0])).unwrap();
    assert_eq!(sep.auc, 1.0);
    assert_eq!(sep.points.first(), Some(&(0.0, 0.0)));
    assert_eq!(sep.points.last(), Some(&(1.0, 1.0)));
    assert!(matches!(
        roc_auc(&scores_from(&[0.1], &[])),
        Err(EvalError::SingleClassScores)
    ));

    let mut rng = rng_from(7);
    let draw =
        |rng: &mut crate::seed::Rng, n| (0..n).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>();
    let same = scores_from(&draw(&mut rng, 5000), &draw(&mut rng, 5000));
    assert!((roc_auc(&same).unwrap().auc - 0.5).abs() < 0.02);

    // rounded values create ties the oracle scores as one half
    let k: Vec<f64> = (0..100)
        .map(|_| (rng.gen::<f64>() * 20.0).round())
        .collect();
    let u: Vec<f64> = (0..100)
        .map(|_| (rng.gen::<f64>() * 20.0 + 4.0).round())
        .collect();
    let s = scores_from(&k, &u);
    let curve = roc_auc(&s).unwrap();
    assert!((curve.auc - mann_whitney(&s)).abs() < 1e-6);
    for w in curve.points.windows(2) {
        assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
    }
    let flipped: Vec<OpenSetScore> = s
        .iter()
        .map(|x| OpenSetScore {
            distance: -x.distance,
            ..*x
        })
        .collect();
    assert!((roc_auc(&flipped).unwrap().auc - (1.0 - curve.auc)).abs() < 1e-12);
}

#[test]
fn threshold_sweep_reproduces_the_curve() {
    let s = scores_from(&[0.5, 1.0, 1.0, 2.0, 0.2], &[1.0, 3.0, 2.5, 0.7]);
    let curve = roc_auc(&s).unwrap();
    for (&(fpr, tpr), &t) in curve.points.iter().zip(&curve.thresholds) {
        assert_eq!(rates_at(&s, t), (fpr, tpr));
        if let Some(rule) = RejectionRule::new(t) {
            let rejected = |known: bool| {
                let group: Vec<&OpenSetScore> = s.iter().filter(|x| x.known == known).collect();
                group
                    .iter()
                    .filter(|x| reject_unknown(&[x.distance], rule) == Decision::Reject)
                    .count() as f64
                    / group.len() as f64
            };
            assert_eq!((rejected(true), rejected(false)), (fpr, tpr));
        }
    }
}

#[test]
fn position_map_examples() {
    let mut all = Vec::new();
    let mut corners_only = Vec::new();
    for r in 0..5 {
        for c in 0..5 {
            all.push(((r, c), true));
            let corner = (r == 0 || r == 4) && (c == 0 || c == 4);
            corners_only.push(((r, c), corner));
        }
    }
    let m = position_accuracy_map(&all, 5, 5);
    assert!(m.cells.iter().flatten().all(|v| *v == Some(1.0)));
    let m = position_accuracy_map(&corners_only, 5, 5);
    assert_eq!(m.corners, Some(1.0));
    assert_eq!(m.center, Some(0.0));
    assert_eq!(m.edges, Some(0.0));
    assert_eq!(m.inner, Some(0.0));
    assert_eq!(m.rows[0], Some(0.4));
    assert_eq!(m.columns[2], Some(0.0));
}

fn decaying(rt60: f64, len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed);
    let k = 3.0 * std::f64::consts::LN_10 / (rt60 * 16_000.0);
    (0..len)
        .map(|n| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (-k * n as f64).exp() * z
        })
        .collect()
}

#[test]
fn air_correlation_examples() {
    let a = decaying(0.4, 8000, 1);
    assert!((air_pool_correlation(&[&a], &[&a]) - 1.0).abs() < 1e-12);
    let p = decay_profile(&a, 8000);
    let neg: Vec<f64> = p.iter().map(|v| -v).collect();
    assert!((pearson(&p, &neg) + 1.0).abs() < 1e-12);

    let short: Vec<Vec<f64>> = (0..3).map(|i| decaying(0.1, 8000, 10 + i)).collect();
    let short2: Vec<Vec<f64>> = (0..3).map(|i| decaying(0.1, 8000, 20 + i)).collect();
    let long: Vec<Vec<f64>> = (0..3).map(|i| decaying(1.2, 16000, 30 + i)).collect();
    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|x| x.as_slice()).collect()
    }
    let matched = air_pool_correlation(&refs(&short), &refs(&short2));
    let mismatched = air_pool_correlation(&refs(&short), &refs(&long));
    assert!(mismatched < matched, "{mismatched} vs {matched}");
}

#[test]
fn reports_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let rows = vec![ClassRow::new(
        "room-a",
        4,
        ClassScores {
            precision: 1.0,
            recall: 0.5,
            f1: 2.0 / 3.0,
        },
    )];
    write_class_csv(&dir.path().join("classes.csv"), &rows).unwrap();
    let text = std::fs::read_to_string(dir.path().join("classes.csv")).unwrap();
    assert!(text.starts_with("class,support,precision,recall,f1\nroom-a,4,1.0,0.5,"));
    let map = position_accuracy_map(&[((0, 1), true)], 2, 2);
    write_position_csv(&dir.path().join("pos.csv"), &map).unwrap();
    let text = std::fs::read_to_string(dir.path().join("pos.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.contains("0,1,1,1\n"));
    write_summary_json(&dir.path().join("s.json"), &serde_json::json!({"auc": 0.5})).unwrap();
    assert!(std::fs::read_to_string(dir.path().join("s.json"))
        .unwrap()
        .ends_with("}\n"));
}

#[test]
fn roc_curve_survives_json() {
    let curve = roc_auc(&scores_from(&[0.1, 0.4, 0.3], &[1.0, 0.35])).unwrap();
    assert_eq!(curve.thresholds.first(), Some(&f64::INFINITY));
    assert_eq!(curve.thresholds.last(), Some(&f64::NEG_INFINITY));
    let text = serde_json::to_string(&curve).unwrap();
    assert!(text.contains("\"inf\"") && text.contains("\"-inf\"") && !text.contains("null"));
    let back: RocCurve = serde_json::from_str(&text).unwrap();
    assert_eq!(back, curve);
}
