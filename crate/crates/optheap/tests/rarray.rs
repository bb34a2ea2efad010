use optheap::rarray::ResizableArray;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_vec_reference(ops in prop::collection::vec(0u8..10, 0..600)) {
        let mut a = ResizableArray::new();
        let mut v: Vec<u32> = Vec::new();
        for (k, op) in ops.into_iter().enumerate() {
            // Grows are a bit more likely, so long runs reach several sizes.
            if op < 6 {
                a.grow(k as u32);
                v.push(k as u32);
            } else {
                prop_assert_eq!(a.shrink().ok(), v.pop());
            }
            prop_assert!(a.last_work() <= optheap::rarray::STEP);
            prop_assert_eq!(a.len(), v.len());
            prop_assert!(a.allocated() <= 6 * a.len().max(1), "{} for {}", a.allocated(), a.len());
            if let Some(y) = a.copy_capacity() {
                prop_assert!(y == 2 * a.capacity() || 2 * y == a.capacity());
            }
            prop_assert!(a.iter().copied().eq(v.iter().copied()));
        }
        for i in 0..v.len() {
            prop_assert_eq!(*a.get(i).unwrap(), v[i]);
        }
        prop_assert!(a.get(v.len()).is_err());
    }

    #[test]
    fn writes_survive_copies(n in 1usize..300, shrinks in 0usize..300) {
        let mut a = ResizableArray::new();
        for i in 0..n {
            a.grow(0u64);
            *a.get_mut(i).unwrap() = i as u64 * 3;
        }
        for _ in 0..shrinks.min(n) {
            a.shrink().unwrap();
        }
        for (i, &x) in a.iter().enumerate() {
            prop_assert_eq!(x, i as u64 * 3);
        }
    }
}
