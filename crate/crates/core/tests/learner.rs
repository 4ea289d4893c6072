mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riskrl::agent::LearningRate;
use riskrl::{Dist, Learner, StateKey, Table, Transition};

type Model = Vec<Vec<Vec<(f64, f64, Option<usize>)>>>;

/// Three states, two or three actions, stochastic rewards and transitions.
fn model() -> Model {
    vec![
        vec![
            vec![(1.0, 1.0, None)],
            vec![(1.0, 0.0, Some(1))],
            vec![(0.5, 0.0, None), (0.5, 3.0, None)],
        ],
        vec![
            vec![(1.0, 0.5, None)],
            vec![(0.5, 0.0, Some(2)), (0.5, 0.0, Some(0))],
        ],
        vec![
            vec![(0.5, 4.0, None), (0.5, 0.0, None)],
            vec![(1.0, 1.0, Some(1))],
        ],
    ]
}

fn key(s: usize) -> StateKey {
    StateKey(vec![s as i32])
}

fn sample(outcomes: &[(f64, f64, Option<usize>)], rng: &mut impl Rng) -> (f64, Option<usize>) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(p, r, next) in outcomes {
        acc += p;
        if u < acc {
            return (r, next);
        }
    }
    let &(_, r, next) = outcomes.last().unwrap();
    (r, next)
}

#[test]
fn converged_greedy_policy_matches_value_iteration() {
    let model = model();
    let gamma = 0.9;
    let q = common::value_iteration(&model, gamma);
    let greedy = |row: &[f64]| {
        (0..row.len())
            .fold(0, |b, a| if row[a] > row[b] { a } else { b })
    };
    // The oracle's action gaps are wide enough for the test to mean something.
    for row in &q {
        let mut sorted = row.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert!(sorted[0] - sorted[1] > 0.2, "gaps too small: {q:?}");
    }

    let n_actions = 3;
    let mut table = Table::new(n_actions, 8, 0.0).unwrap();
    let mut cfg = Learner {
        gamma,
        kappa: 0.01,
        ..Learner::default()
    };
    let steps = 300_000;
    let lr = LearningRate {
        start: 0.5,
        end: 0.02,
        steps,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for t in 0..steps {
        let s = rng.gen_range(0..model.len());
        let a = rng.gen_range(0..model[s].len());
        let (reward, next) = sample(&model[s][a], &mut rng);
        let next_state = next.unwrap_or(0);
        cfg.lr = lr.at(t);
        table
            .qr_update(
                &Transition {
                    state: key(s),
                    action: a,
                    reward,
                    next_state: key(next_state),
                    next_legal: (0..model[next_state].len()).collect(),
                    terminal: next.is_none(),
                },
                &cfg,
            )
            .unwrap();
    }

    for (s, row) in q.iter().enumerate() {
        let legal: Vec<usize> = (0..row.len()).collect();
        assert_eq!(table.greedy_target_action(&key(s), &legal).unwrap(), greedy(row), "state {s}");
        for (a, &v) in row.iter().enumerate() {
            let learned = table.get(&key(s), a).expectation();
            assert!((learned - v).abs() < 0.15, "Q({s},{a}) learned {learned}, oracle {v}");
        }
    }
    // The two-point terminal arm splits its quantiles evenly.
    let split = table.get(&key(0), 2);
    assert!(split.values()[..4].iter().all(|&v| v < 0.3), "{split:?}");
    assert!(split.values()[4..].iter().all(|&v| v > 2.7), "{split:?}");
}

proptest! {
    #[test]
    fn update_keeps_values_sorted_and_finite(
        init in prop::collection::vec(-3.0..3.0f64, 8),
        reward in -5.0..5.0f64,
        terminal in any::<bool>(),
        lr in 0.0..2.0f64,
        kappa in 0.01..2.0f64,
    ) {
        let mut table = Table::new(2, 8, 0.0).unwrap();
        let s = key(0);
        table.set(&s, 0, Dist::from_unsorted(init).unwrap()).unwrap();
        let cfg = Learner { lr, kappa, ..Learner::default() };
        let tr = Transition {
            state: s.clone(),
            action: 0,
            reward,
            next_state: s.clone(),
            next_legal: vec![0, 1],
            terminal,
        };
        let loss = table.qr_update(&tr, &cfg).unwrap();
        prop_assert!(loss.is_finite() && loss >= 0.0);
        let v = table.get(&s, 0).values();
        prop_assert!(v.iter().all(|x| x.is_finite()));
        prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn checkpoint_round_trips_exactly(
        rows in prop::collection::vec((prop::collection::vec(-50i32..50, 0..4), 0usize..3, prop::collection::vec(-1e6..1e6f64, 4)), 0..10),
    ) {
        let mut table = Table::new(3, 4, 0.25).unwrap();
        for (k, a, v) in rows {
            table.set(&StateKey(k), a, Dist::from_unsorted(v).unwrap()).unwrap();
        }
        let mut buf = Vec::new();
        table.write_to(&mut buf).unwrap();
        let back = Table::read_from(buf.as_slice()).unwrap();
        prop_assert_eq!(back, table);
    }
}
