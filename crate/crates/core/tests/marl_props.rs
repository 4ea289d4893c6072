use proptest::prelude::*;
use riskrl::marl::{individual_argmax, joint_argmax, DEFAULT_ENUMERATION_CAP};
use riskrl::{igm_check, mean_shape_compose, Dist};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn agents(max_m: usize, n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), 1..=max_m)
}

/// `M` agents × up to 5 actions × 8 quantiles.
fn instance() -> impl Strategy<Value = Vec<Vec<Vec<f64>>>> {
    (1usize..=3, 1usize..=5).prop_flat_map(|(m, a)| {
        prop::collection::vec(prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 8), a), m)
    })
}

fn to_dists(raw: &[Vec<Vec<f64>>]) -> Vec<Vec<Dist>> {
    raw.iter()
        .map(|acts| acts.iter().map(|v| Dist::from_unsorted(v.clone()).unwrap()).collect())
        .collect()
}

proptest! {
    #[test]
    fn composition_preserves_the_mean(raw in agents(4, 8)) {
        let dists: Vec<Dist> = raw.iter().map(|v| Dist::from_unsorted(v.clone()).unwrap()).collect();
        let joint = mean_shape_compose(&dists).unwrap();
        let expect: f64 = raw.iter().map(|v| mean(v)).sum();
        prop_assert!((joint.expectation() - expect).abs() < 1e-10);
        // Shape part is zero-mean.
        let shape: Vec<f64> = joint.values().iter().map(|z| z - expect).collect();
        prop_assert!(mean(&shape).abs() < 1e-10);
    }

    #[test]
    fn composition_is_sorted_and_permutation_invariant(raw in agents(4, 6)) {
        let dists: Vec<Dist> = raw.iter().map(|v| Dist::from_unsorted(v.clone()).unwrap()).collect();
        let joint = mean_shape_compose(&dists).unwrap();
        prop_assert!(joint.values().windows(2).all(|w| w[0] <= w[1]));
        let mut rev = dists.clone();
        rev.reverse();
        let other = mean_shape_compose(&rev).unwrap();
        for (x, y) in joint.values().iter().zip(other.values()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn igm_holds_against_brute_force(raw in instance()) {
        let dists = to_dists(&raw);
        prop_assert!(igm_check(&dists, DEFAULT_ENUMERATION_CAP).unwrap());

        // Independent oracle: maximise the sum of per-agent means directly.
        let means: Vec<Vec<f64>> = raw.iter().map(|acts| acts.iter().map(|v| mean(v)).collect()).collect();
        let mut best = (f64::NEG_INFINITY, vec![]);
        let mut joint = vec![0usize; means.len()];
        'outer: loop {
            let value: f64 = joint.iter().zip(&means).map(|(&a, m)| m[a]).sum();
            if value > best.0 + 1e-12 {
                best = (value, joint.clone());
            }
            for i in (0..joint.len()).rev() {
                joint[i] += 1;
                if joint[i] < means[i].len() {
                    continue 'outer;
                }
                joint[i] = 0;
            }
            break;
        }
        prop_assert_eq!(joint_argmax(&dists, DEFAULT_ENUMERATION_CAP).unwrap(), best.1.clone());
        prop_assert_eq!(individual_argmax(&dists).unwrap(), best.1);
    }
}
