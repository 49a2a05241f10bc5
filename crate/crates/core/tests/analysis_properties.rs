use proptest::prelude::*;
use subchal_core::analysis::{classical_mds, pairwise_jaccard_matrix, spearman, DistanceMatrix};
use subchal_core::expr::jaccard_distance;
use subchal_core::MembershipVector;

fn membership(flags: Vec<bool>) -> MembershipVector {
    let ids = (0..flags.len()).map(|i| format!("S{i:03}")).collect();
    MembershipVector::from_flags(ids, flags)
}

/// Independent set-based Jaccard distance.
fn jaccard_oracle(a: &[bool], b: &[bool]) -> f64 {
    use std::collections::BTreeSet;
    let set = |v: &[bool]| v.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect::<BTreeSet<_>>();
    let (a, b) = (set(a), set(b));
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        1.0 - a.intersection(&b).count() as f64 / union as f64
    }
}

fn planar_distances(points: &[(f64, f64)]) -> DistanceMatrix {
    let labels = (0..points.len()).map(|i| format!("P{i:02}")).collect();
    let d = points.iter().map(|a| points.iter().map(|b| (a.0 - b.0).hypot(a.1 - b.1)).collect()).collect();
    DistanceMatrix::new(labels, d).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn jaccard_is_a_metric(
        a in prop::collection::vec(any::<bool>(), 30),
        b in prop::collection::vec(any::<bool>(), 30),
        c in prop::collection::vec(any::<bool>(), 30),
    ) {
        let (ma, mb, mc) = (membership(a.clone()), membership(b.clone()), membership(c));
        let ab = jaccard_distance(&ma, &mb).unwrap();
        let ba = jaccard_distance(&mb, &ma).unwrap();
        let ac = jaccard_distance(&ma, &mc).unwrap();
        let cb = jaccard_distance(&mc, &mb).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((ab - jaccard_oracle(&a, &b)).abs() < 1e-15);
        prop_assert_eq!(jaccard_distance(&ma, &ma).unwrap(), 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!(ab <= ac + cb + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn mds_recovers_planar_configurations(points in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..15)) {
        let dm = planar_distances(&points);
        let emb = classical_mds(&dm).unwrap();
        for i in 0..points.len() {
            for j in 0..points.len() {
                prop_assert!((emb.distance(i, j) - dm.d[i][j]).abs() < 1e-6, "({i},{j})");
            }
        }
    }

    #[test]
    fn mds_distances_follow_a_permutation(
        points in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 4..12),
        seed in any::<u64>(),
    ) {
        let dm = planar_distances(&points);
        let mut perm: Vec<usize> = (0..points.len()).collect();
        // Fisher-Yates driven by a simple LCG keeps the test free of extra dependencies.
        let mut state = seed;
        for i in (1..perm.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (state >> 33) as usize % (i + 1));
        }
        let a = classical_mds(&dm).unwrap();
        let b = classical_mds(&dm.permuted(&perm)).unwrap();
        for i in 0..perm.len() {
            for j in 0..perm.len() {
                prop_assert!((b.distance(i, j) - a.distance(perm[i], perm[j])).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn spearman_ignores_monotone_maps(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let Some(r) = spearman(&x, &y).unwrap() else { return Ok(()) };
        let fx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let gy: Vec<f64> = y.iter().map(|v| 3.0 * v - 1.0).collect();
        prop_assert!((spearman(&fx, &gy).unwrap().unwrap() - r).abs() < 1e-12);
        prop_assert!((spearman(&y, &x).unwrap().unwrap() - r).abs() < 1e-12);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        prop_assert!((spearman(&x, &neg).unwrap().unwrap() + r).abs() < 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
    }
}

#[test]
fn jaccard_examples_and_matrix() {
    let a = membership(vec![true, true, false]);
    let b = membership(vec![false, true, true]);
    let empty = membership(vec![false; 3]);
    assert!((jaccard_distance(&a, &b).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(jaccard_distance(&empty, &empty).unwrap(), 0.0);
    assert_eq!(jaccard_distance(&a, &membership(vec![false, false, true])).unwrap(), 1.0);
    assert!(jaccard_distance(&a, &membership(vec![true; 4])).is_err());

    let labels: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let dm = pairwise_jaccard_matrix(&labels, &[a.clone(), b, empty]).unwrap();
    for i in 0..3 {
        assert_eq!(dm.d[i][i], 0.0);
        for j in 0..3 {
            assert_eq!(dm.d[i][j], dm.d[j][i]);
        }
    }
}

#[test]
fn equilateral_triangle_is_exact() {
    let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let d = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
    let emb = classical_mds(&DistanceMatrix::new(labels, d).unwrap()).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!((emb.distance(i, j) - 1.0).abs() < 1e-6);
    }
    let centroid = emb.coordinates.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    assert!(centroid[0].abs() < 1e-12 && centroid[1].abs() < 1e-12);
}

#[test]
fn distance_matrix_json_round_trip() {
    let dm = planar_distances(&[(0.0, 0.0), (1.0, 0.5), (-2.0, 3.0)]);
    let back: DistanceMatrix = serde_json::from_str(&serde_json::to_string(&dm).unwrap()).unwrap();
    assert_eq!(back, dm);
}
