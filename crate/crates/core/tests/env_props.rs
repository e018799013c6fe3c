use proptest::prelude::*;
use treerpo::env::{generate_task, verify, Vocabulary, ANSWER, STOP};

proptest! {
    #[test]
    fn planted_solution_is_accepted(d in 1usize..5, m in 2u64..=100, seed in any::<u64>()) {
        let task = generate_task(d, m, seed).unwrap();
        prop_assert!(!task.prompt.is_empty());
        prop_assert!(!task.prompt.contains(&STOP));
        let mut path = task.prompt.clone();
        path.push(ANSWER);
        path.extend(&task.ground_truth);
        path.push(STOP);
        let r = verify(&task, &path).unwrap();
        prop_assert_eq!(r.reward, 1.0);
        prop_assert_eq!(r.parsed_answer, Some(task.ground_truth.clone()));
    }

    #[test]
    fn ground_truth_is_canonical_and_in_range(d in 1usize..5, m in 2u64..=100, seed in any::<u64>()) {
        let task = generate_task(d, m, seed).unwrap();
        let digits: String = task.ground_truth.iter().map(|t| char::from(b'0' + *t as u8)).collect();
        let value: u64 = digits.parse().unwrap();
        prop_assert!(value < m);
        prop_assert_eq!(digits, value.to_string());
    }

    #[test]
    fn verifier_is_pure_and_binary(
        seed in any::<u64>(),
        tail in proptest::collection::vec(0usize..Vocabulary::SIZE, 0..12),
    ) {
        let task = generate_task(1, 10, seed).unwrap();
        let mut path = task.prompt.clone();
        path.extend(&tail);
        let a = verify(&task, &path).unwrap();
        let b = verify(&task, &path).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.reward == 0.0 || a.reward == 1.0);
        if a.reward == 1.0 {
            prop_assert_eq!(a.parsed_answer.as_deref(), Some(&task.ground_truth[..]));
            prop_assert!(a.terminated);
        }
    }
}
