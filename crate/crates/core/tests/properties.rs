use proptest::prelude::*;

use adapo::arm::{reward_table, RewardConfig};
use adapo::domain::{AnswerId, Query, TypeCounts};
use adapo::dynkl::{kl_coefficients, KlConfig};
use adapo::env::{enumerate_trajectories, make_suite, DifficultySpec};
use adapo::metrics::{evaluate, EvalMetrics};
use adapo::policy::{softmax, TabularPolicy};
use adapo::trainer::{train, Algorithm, TrainConfig, TrainerSettings};

fn counts() -> impl Strategy<Value = TypeCounts> {
    (0usize..50, 0usize..50, 0usize..50, 0usize..50)
        .prop_filter("non-empty", |(a, b, c, d)| a + b + c + d > 0)
        .prop_map(|(a, b, c, d)| TypeCounts::new(a, b, c, d))
}

proptest! {
    #[test]
    fn accuracy_flow_is_conserved(c in counts()) {
        let m = EvalMetrics::from_counts(c).unwrap();
        prop_assert!(m.flow_residual().abs() < 1e-12);
        prop_assert!((m.delta - (m.acc_t2 - m.acc_t1)).abs() < 1e-15);
        for v in [Some(m.acc_t1), Some(m.acc_t2), m.m_01, m.m_10].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(m.m_01.is_none(), c.zero_one + c.zero_zero == 0);
        prop_assert_eq!(m.m_10.is_none(), c.one_one + c.one_zero == 0);
    }

    #[test]
    fn enumeration_is_a_distribution(
        logits in proptest::collection::vec(-6.0f64..6.0, 3 + 9),
        gt in 0usize..3,
    ) {
        let policy = TabularPolicy::from_logits(1, 3, &logits[..3], &logits[3..]).unwrap();
        let q = Query { id: 0, ground_truth: AnswerId(gt) };
        let all = enumerate_trajectories(&policy, &q).unwrap();
        prop_assert_eq!(all.len(), 9);
        let total: f64 = all.iter().map(|(_, p)| p).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let first_right: f64 = all.iter().filter(|(t, _)| t.ttype.first_correct()).map(|(_, p)| p).sum();
        prop_assert!((first_right - softmax(&logits[..3])[gt]).abs() < 1e-12);
    }

    #[test]
    fn reward_gap_sign_drives_kl_split(p in 0.0f64..=1.0) {
        let reward = RewardConfig::default();
        let kl = KlConfig::default();
        let table = reward_table(p, &reward);
        let b = kl_coefficients(table.zero_one, table.one_one, &kl);
        prop_assert!(b.beta1 >= kl.beta_base && b.beta2 >= kl.beta_base);
        prop_assert!(b.beta1 == kl.beta_base || b.beta2 == kl.beta_base);
        if p > reward.theta {
            prop_assert!(table.zero_one > table.one_one && b.beta1 > b.beta2);
        } else if p < reward.theta {
            prop_assert!(table.zero_one < table.one_one && b.beta1 < b.beta2);
        }
        // Correct endpoints always beat incorrect ones.
        prop_assert!(table.one_one.min(table.zero_one) > table.one_zero.max(table.zero_zero));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn training_keeps_metrics_valid(seed in 0u64..1000, alg in 0usize..3) {
        let (suite, mut policy) = make_suite(8, 3, &DifficultySpec::default(), seed).unwrap();
        let algorithm = [Algorithm::Adapo, Algorithm::GrpoFixed, Algorithm::Score][alg];
        let cfg = TrainConfig {
            trainer: TrainerSettings {
                algorithm,
                iterations: 20,
                fixed: Some(adapo::trainer::FixedRewardConfig::preservation_favoring()),
                score: Some(adapo::trainer::ScoreConfig::for_iterations(20)),
                ..TrainerSettings::default()
            },
            eval_interval: 5,
            seed,
            ..TrainConfig::default()
        };
        let log = train(&cfg, &suite, &mut policy).unwrap();
        prop_assert!(policy.params().iter().all(|x| x.is_finite()));
        prop_assert_eq!(log.final_metrics, evaluate(&policy, &suite).unwrap());
        for r in &log.records {
            if let Some(loss) = r.loss {
                prop_assert!(loss.is_finite());
            }
            prop_assert!(r.n_filtered <= suite.len());
            prop_assert_eq!(r.type_counts.total(), cfg.trainer.group_size * (suite.len() - r.n_filtered));
            if let Some(m) = r.eval {
                prop_assert!(m.flow_residual().abs() < 1e-12);
            }
        }
    }
}
