use byzopt::assignment::{
    construct_sparsest, decoding_capability, sparsity_by_definition, sparsity_by_row_zeros, AssignmentError,
    AssignmentMatrix, ZeroPattern, RANK_TOL,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `sp` from the support pattern alone: the smallest `m` such that every
/// `m`-subset of columns (as bitmasks) touches every row.
fn sparsity_oracle(support: &[Vec<bool>], n: usize) -> usize {
    let row_masks: Vec<u32> =
        support.iter().map(|r| r.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| 1 << i).sum()).collect();
    (1..=n)
        .find(|&m| {
            (0u32..1 << n).filter(|c| c.count_ones() as usize == m).all(|c| row_masks.iter().all(|r| r & c != 0))
        })
        .unwrap_or(n + 1)
}

fn random_matrix(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
    let k = rng.gen_range(1..=6);
    let n = rng.gen_range(1..=6);
    let density = rng.gen_range(0.2..0.9);
    let mut support: Vec<Vec<bool>> = (0..k).map(|_| (0..n).map(|_| rng.gen_bool(density)).collect()).collect();
    if rng.gen_bool(0.15) {
        let j = rng.gen_range(0..k);
        support[j] = vec![false; n];
    }
    // every column needs some mass; use a row other than a forced zero one
    for i in 0..n {
        if support.iter().all(|r| !r[i]) {
            let j = rng.gen_range(0..k);
            if support[j].iter().any(|&b| b) || k == 1 {
                support[j][i] = true;
            } else {
                support[(j + 1) % k][i] = true;
            }
        }
    }
    let rows = support.iter().map(|r| r.iter().map(|&b| if b { rng.gen_range(0.1..2.0) } else { 0.0 }).collect()).collect();
    (rows, support)
}

#[test]
fn sparsity_agrees_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut zero_row_cases = 0;
    for case in 0..1000 {
        let (rows, support) = random_matrix(&mut rng);
        let a = AssignmentMatrix::normalized(&rows).unwrap();
        let n = a.n();
        let by_def = sparsity_by_definition(&a);
        let by_rows = sparsity_by_row_zeros(&a);
        let oracle = sparsity_oracle(&support, n);
        assert_eq!(by_def.value, by_rows.value, "case {case}: {rows:?}");
        assert_eq!(by_def.value, oracle, "case {case}: {rows:?}");
        if support.iter().any(|r| r.iter().all(|&b| !b)) {
            assert_eq!(by_def.value, n + 1);
            zero_row_cases += 1;
        }
    }
    assert!(zero_row_cases > 20, "only {zero_row_cases} all-zero-row matrices drawn");
}

#[test]
fn sparsity_examples() {
    let identity = AssignmentMatrix::<f64>::identity(3).unwrap();
    assert_eq!(sparsity_by_definition(&identity).value, 3);
    let ones = AssignmentMatrix::<f64>::normalized(&[vec![1.0; 4]]).unwrap();
    assert_eq!(sparsity_by_row_zeros(&ones).value, 1);
    let zero_row = AssignmentMatrix::<f64>::new(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
    assert_eq!(sparsity_by_definition(&zero_row).value, 3);
    assert_eq!(sparsity_by_row_zeros(&zero_row).value, 3);
}

#[test]
fn matrix_validation() {
    assert!(matches!(AssignmentMatrix::<f64>::new(&[vec![0.5, 1.0]]), Err(AssignmentError::ColumnSum { .. })));
    assert!(matches!(AssignmentMatrix::<f64>::new(&[vec![1.0, 1.0], vec![0.0]]), Err(AssignmentError::Ragged)));
    assert!(matches!(AssignmentMatrix::<f64>::new(&[vec![-0.5, 1.0], vec![1.5, 0.0]]), Err(AssignmentError::BadEntry { .. })));
    assert!(matches!(AssignmentMatrix::<f64>::new(&[]), Err(AssignmentError::Empty)));
}

#[test]
fn decoding_capability_examples() {
    let rep3 = AssignmentMatrix::<f64>::repetition(1, 3).unwrap();
    assert!(decoding_capability(&rep3, 1, RANK_TOL));
    assert!(!decoding_capability(&rep3, 2, RANK_TOL));
    let identity = AssignmentMatrix::<f64>::identity(3).unwrap();
    assert!(decoding_capability(&identity, 0, RANK_TOL));
    assert!(!decoding_capability(&identity, 1, RANK_TOL));
    // columns (a, 1 − a) with distinct a: any two are independent
    let a = [0.1, 0.3, 0.5, 0.7, 0.9];
    let two = AssignmentMatrix::<f64>::new(&[a.to_vec(), a.iter().map(|x| 1.0 - x).collect()]).unwrap();
    assert!(decoding_capability(&two, 1, RANK_TOL));
    assert!(!decoding_capability(&two, 2, RANK_TOL));
}

proptest! {
    #[test]
    fn construct_sparsest_hits_target(k in 1usize..=6, n in 1usize..=7, s_raw in 1usize..=7, seed in any::<u64>(), cyclic in any::<bool>()) {
        let s = s_raw.min(n);
        let pattern = if cyclic { ZeroPattern::Cyclic } else { ZeroPattern::Seeded(seed) };
        match construct_sparsest::<f64>(k, n, s, pattern) {
            Ok(a) => {
                prop_assert_eq!(sparsity_by_definition(&a).value, s);
                prop_assert_eq!(sparsity_by_row_zeros(&a).value, s);
                for j in 0..k {
                    let zeros = (0..n).filter(|&i| a.entry(j, i) == 0.0).count();
                    prop_assert_eq!(zeros, s - 1);
                }
            }
            // the cyclic pattern fails only where no pattern can succeed
            Err(AssignmentError::InfeasiblePattern { .. }) => prop_assert!(!cyclic || k * (n - s + 1) < n),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn encode_is_linear(k in 1usize..=3, copies in 1usize..=3, d in prop::collection::vec(-10.0f64..10.0, 3)) {
        let a = AssignmentMatrix::<f64>::repetition(k, copies).unwrap();
        let y = a.encode(&d[..k]);
        for (i, v) in y.iter().enumerate() {
            prop_assert_eq!(*v, d[i / copies]);
        }
    }
}
