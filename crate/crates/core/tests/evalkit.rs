use amptcr_core::evalkit::{
    calibrate, fold_runner, ols_fit, pearson_r2, roc_auc, AuditedLabels, FoldPlan, Task, TrainOutput,
};
use proptest::prelude::*;

/// Pairwise definition: P(score_pos > score_neg) + ½ P(tie).
fn brute_auc(s: &[f64], y: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1.0 && y[j] == 0.0 {
                den += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (4usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..12).prop_map(|v| v as f64 / 4.0), n),
            prop::collection::vec(prop::bool::ANY, n),
        )
            .prop_filter_map("needs both classes", |(s, b)| {
                let y: Vec<f64> = b.iter().map(|&x| if x { 1.0 } else { 0.0 }).collect();
                (y.contains(&1.0) && y.contains(&0.0)).then_some((s, y))
            })
    })
}

fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..50).prop_flat_map(|n| {
        (prop::collection::vec(-10.0f64..10.0, n), prop::collection::vec(-10.0f64..10.0, n))
    })
}

proptest! {
    #[test]
    fn auc_matches_pairwise_count((s, y) in scored()) {
        let a = roc_auc(&s, &y).unwrap();
        prop_assert!((a - brute_auc(&s, &y)).abs() < 1e-12);
    }

    #[test]
    fn auc_ignores_monotone_transforms((s, y) in scored()) {
        let t: Vec<f64> = s.iter().map(|v| (2.0 * v).exp() + 3.0).collect();
        prop_assert_eq!(roc_auc(&s, &y).unwrap(), roc_auc(&t, &y).unwrap());
    }

    #[test]
    fn calibrated_fit_is_identity((yhat, y) in paired()) {
        let Ok(params) = ols_fit(&yhat, &y) else { return Ok(()) };
        prop_assume!(params.p.abs() > 1e-3);
        let c = calibrate(&yhat, &params);
        let again = ols_fit(&c, &y).unwrap();
        prop_assert!((again.p - 1.0).abs() < 1e-9, "{:?}", again);
        prop_assert!(again.q.abs() < 1e-9 * (1.0 + params.q.abs() / params.p.abs()), "{:?}", again);
    }

    #[test]
    fn calibration_keeps_order_and_pearson((yhat, y) in paired()) {
        let Ok(params) = ols_fit(&yhat, &y) else { return Ok(()) };
        prop_assume!(params.p.abs() > 1e-3);
        let c = calibrate(&yhat, &params);
        for i in 0..yhat.len() {
            for j in 0..yhat.len() {
                if yhat[i] < yhat[j] {
                    if params.p > 0.0 { prop_assert!(c[i] <= c[j]); } else { prop_assert!(c[i] >= c[j]); }
                }
            }
        }
        if let (Ok(a), Ok(b)) = (pearson_r2(&yhat, &y), pearson_r2(&c, &y)) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn kfold_partitions_indices(n in 6usize..80, k in 2usize..6, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let splits = FoldPlan::kfold(k, seed).splits(n).unwrap();
        let mut seen = vec![0usize; n];
        for s in &splits {
            for &i in &s.validation { seen[i] += 1; }
            prop_assert_eq!(s.train.len() + s.validation.len(), n);
            prop_assert!(s.train.iter().all(|i| !s.validation.contains(i)));
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = splits.iter().map(|s| s.validation.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn random_split_sizes(n in 10usize..80, k in 2usize..5, f in 0.5f64..0.9, seed in any::<u64>()) {
        let plan = FoldPlan::random_split(k, f, seed);
        let splits = plan.splits(n).unwrap();
        prop_assert_eq!(splits.len(), k);
        for s in &splits {
            prop_assert_eq!(s.validation.len(), plan.validation_size(n));
            prop_assert_eq!(s.train.len() + s.validation.len(), n);
        }
    }
}

#[test]
fn runner_never_reads_validation_labels_while_training() {
    let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
    let labels = AuditedLabels::new(y.clone());
    let plan = FoldPlan::kfold(5, 9);
    let result = fold_runner(&labels, &plan, Task::Regression, true, |req| {
        let m = req.train_labels.iter().sum::<f64>() / req.train_labels.len() as f64;
        Ok(TrainOutput {
            train_preds: req.train_labels.iter().map(|v| 0.5 * v + 0.1 * m).collect(),
            validation_preds: req.validation.iter().map(|&i| (i as f64).cos()).collect(),
        })
    })
    .unwrap();
    assert_eq!(result.samples.len(), 30);
    assert_eq!(labels.leaks(&plan.splits(30).unwrap()), 0);
    assert!(!labels.reads().is_empty());
}

#[test]
fn fold_seeds_follow_plan_seed() {
    let y: Vec<f64> = (0..12).map(|i| i as f64).collect();
    let mut seeds = Vec::new();
    fold_runner(&y, &FoldPlan::kfold(3, 100), Task::Regression, false, |req| {
        seeds.push(req.seed);
        Ok(TrainOutput {
            train_preds: req.train_labels.to_vec(),
            validation_preds: vec![0.0; req.validation.len()],
        })
    })
    .unwrap();
    assert_eq!(seeds, vec![100, 101, 102]);
}
