use optheap::counter::Counter;
use proptest::prelude::*;

fn value_of(d: &[u8]) -> u128 {
    d.iter().rev().fold(0u128, |acc, &x| acc * 2 + x as u128)
}

// Regularity straight from the definition: look left past the filler digit.
fn regular(d: &[u8]) -> bool {
    if d.last() == Some(&0) {
        return false;
    }
    (0..d.len()).all(|i| {
        let before = |skip: u8| d[..i].iter().rev().find(|&&y| y != skip).copied();
        match d[i] {
            3 => matches!(before(2), Some(0 | 1)),
            0 => matches!(before(1), Some(2 | 3)),
            1 | 2 => true,
            _ => false,
        }
    })
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Inc(usize),
    Dec(usize),
}

fn steps() -> impl Strategy<Value = Vec<Step>> {
    prop::collection::vec((any::<bool>(), 0usize..12).prop_map(|(up, i)| if up { Step::Inc(i) } else { Step::Dec(i) }), 0..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn random_sequences_stay_regular(seq in steps()) {
        let mut c = Counter::<()>::new();
        let mut value = 0u128;
        for s in seq {
            match s {
                Step::Inc(i) => {
                    let i = i.min(c.len());
                    c.inc(i);
                    value += 1 << i;
                }
                Step::Dec(i) => {
                    if c.is_empty() {
                        continue;
                    }
                    let i = i % c.len();
                    c.dec(i);
                    value -= 1 << i;
                }
            }
            let d = c.digits();
            prop_assert!(regular(&d), "{:?}", d);
            prop_assert!(c.blocks_linked(), "{:?}", d);
            prop_assert_eq!(value_of(&d), value);
            prop_assert_eq!(c.value(), value);
            let k = c.last_counts();
            prop_assert!(k.fixes <= 2, "{} fixes on {:?}", k.fixes, d);
            prop_assert!(k.digit_writes <= 5, "{} writes on {:?}", k.digit_writes, d);
        }
    }

    #[test]
    fn increments_then_decrements_return_to_zero(pos in prop::collection::vec(0usize..6, 1..60)) {
        let mut c = Counter::<()>::new();
        let mut done = Vec::new();
        for p in pos {
            let p = p.min(c.len());
            c.inc(p);
            done.push(p);
        }
        for p in done.into_iter().rev() {
            c.dec(p);
            prop_assert!(regular(&c.digits()));
        }
        prop_assert!(c.is_empty());
        prop_assert_eq!(c.value(), 0);
    }

    #[test]
    fn from_digits_accepts_every_regular_string(d in prop::collection::vec(0u8..4, 0..8)) {
        prop_assume!(regular(&d));
        let c = Counter::<()>::from_digits(&d);
        prop_assert!(c.blocks_linked());
        prop_assert_eq!(c.value(), value_of(&d));
    }
}

#[test]
fn all_short_regular_strings_survive_any_single_step() {
    // Every regular string of up to six digits, every legal position.
    let mut checked = 0;
    for len in 0..=6u32 {
        for code in 0..4u32.pow(len) {
            let d: Vec<u8> = (0..len).map(|k| ((code / 4u32.pow(k)) % 4) as u8).collect();
            if !regular(&d) {
                continue;
            }
            for i in 0..=d.len() {
                let mut c = Counter::<()>::from_digits(&d);
                c.inc(i);
                assert!(regular(&c.digits()) && c.value() == value_of(&d) + (1 << i), "inc {i} on {d:?}");
                if i < d.len() {
                    let mut c = Counter::<()>::from_digits(&d);
                    c.dec(i);
                    assert!(regular(&c.digits()) && c.value() == value_of(&d) - (1 << i), "dec {i} on {d:?}");
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}
