//! Extended regular binary counter.
//!
//! Digits are in {0,1,2,3}, least significant first. Every 3 is preceded by a
//! 0 or 1 with only 2s in between, and every 0 by a 2 or 3 with only 1s in
//! between. Increments and decrements at any position touch O(1) digits,
//! and each touched digit pair is realised on trees by one join or one split
//! through a [`Host`].
//!
//! The counter can run detached from any trees ([`Pure`]), which is how the
//! numeral system itself is tested.

use std::fmt;

use arrayvec::ArrayVec;

use crate::rarray::ResizableArray;

/// Where a tree is spliced into the root's child list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Place<T> {
    After(T),
    Before(T),
    Alone,
}

/// Pieces left after splitting a tree of rank `j + 1`.
///
/// `last` is the detached last subtree (rank `j`). `rest` is what remains
/// of the split tree. `single` is the extra subtree detached when the last
/// group of `rest` would otherwise have one member.
#[derive(Debug, Clone, Copy)]
pub struct Split<T> {
    pub last: T,
    pub rest: T,
    pub rest_rank: usize,
    pub single: Option<(T, usize)>,
}

/// Structure-layer operations a counter drives when attached to a root.
pub trait Host {
    type Tree: Copy + Eq + fmt::Debug;

    /// Joins two trees of equal rank, with exactly one element comparison.
    fn join(&mut self, a: Self::Tree, b: Self::Tree) -> Self::Tree;
    /// Splits a tree of the given rank. No element comparisons.
    fn split(&mut self, t: Self::Tree, rank: usize) -> Split<Self::Tree>;
    fn link(&mut self, t: Self::Tree, at: Place<Self::Tree>);
    fn unlink(&mut self, t: Self::Tree);
}

/// Host for a counter with no trees behind it.
#[derive(Debug, Default, Clone, Copy)]
pub struct Pure;

impl Host for Pure {
    type Tree = ();

    fn join(&mut self, _: (), _: ()) {}

    fn split(&mut self, _: (), rank: usize) -> Split<()> {
        Split { last: (), rest: (), rest_rank: rank - 1, single: None }
    }

    fn link(&mut self, _: (), _: Place<()>) {}

    fn unlink(&mut self, _: ()) {}
}

#[derive(Debug, Clone)]
pub struct Slot<T> {
    forward: usize,
    trees: ArrayVec<T, 4>,
}

impl<T> Slot<T> {
    fn new(pos: usize) -> Self {
        Slot { forward: pos + 1, trees: ArrayVec::new() }
    }
}

/// Work done by the most recent increment or decrement.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounts {
    pub fixes: u32,
    pub digit_writes: u32,
}

enum Borrow {
    Done,
    // The split tree kept its rank; the rank-j piece is the one to hand out.
    Kept,
}

#[derive(Debug, Clone)]
pub struct Counter<T> {
    slots: ResizableArray<Slot<T>>,
    reserved: Option<T>,
    pending: ArrayVec<(T, usize), 4>,
    counts: OpCounts,
}

impl<T: Copy + Eq + fmt::Debug> Default for Counter<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Copy + Eq + fmt::Debug> Counter<T> {
    pub fn new() -> Self {
        Counter {
            slots: ResizableArray::new(),
            reserved: None,
            pending: ArrayVec::new(),
            counts: OpCounts::default(),
        }
    }

    /// Number of digits, ℓ.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn digit(&self, i: usize) -> usize {
        self.slots.get(i).map_or(0, |s| s.trees.len())
    }

    pub fn digits(&self) -> Vec<u8> {
        self.slots.iter().map(|s| s.trees.len() as u8).collect()
    }

    pub fn forward(&self, i: usize) -> usize {
        self.slot(i).forward
    }

    pub fn trees(&self, i: usize) -> &[T] {
        self.slots.get(i).map_or(&[], |s| s.trees.as_slice())
    }

    pub fn value(&self) -> u128 {
        self.slots.iter().enumerate().map(|(i, s)| (s.trees.len() as u128) << i).sum()
    }

    pub fn is_regular(&self) -> bool {
        is_regular(&self.digits())
    }

    /// True when every block member points at its block's distinguishing digit.
    pub fn blocks_linked(&self) -> bool {
        let d = self.digits();
        let n = d.len();
        for i in 0..n {
            let (skip, end) = match d[i] {
                0 | 1 => (2, 3),
                _ => (1, 0),
            };
            let mut k = i + 1;
            while k < n && d[k] == skip {
                k += 1;
            }
            if k < n && d[k] == end && (i..k).any(|m| self.forward(m) != k) {
                return false;
            }
        }
        true
    }

    pub fn last_counts(&self) -> OpCounts {
        self.counts
    }

    /// Objects allocated for slot storage.
    pub fn allocated(&self) -> usize {
        self.slots.allocated()
    }

    pub fn iter_trees(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.slots.iter().enumerate().flat_map(|(i, s)| s.trees.iter().map(move |&t| (i, t)))
    }

    /// Replaces `old` by `new` in slot `i` without changing any digit.
    pub fn retarget(&mut self, i: usize, old: T, new: T) -> bool {
        match self.slots.get_mut(i) {
            Ok(s) => match s.trees.iter_mut().find(|t| **t == old) {
                Some(t) => {
                    *t = new;
                    true
                }
                None => false,
            },
            Err(_) => false,
        }
    }

    fn slot(&self, i: usize) -> &Slot<T> {
        self.slots.get(i).expect("slot index")
    }

    fn slot_mut(&mut self, i: usize) -> &mut Slot<T> {
        self.slots.get_mut(i).expect("slot index")
    }

    fn ensure(&mut self, i: usize) {
        while self.slots.len() <= i {
            let pos = self.slots.len();
            self.slots.grow(Slot::new(pos));
        }
    }

    fn trim(&mut self) {
        while self.slots.len() > 0 && self.digit(self.slots.len() - 1) == 0 {
            self.slots.shrink().expect("nonempty");
        }
    }

    fn relink(&mut self, p: usize) {
        let f = match self.digit(p + 1) {
            0 | 3 => p + 1,
            _ => self.forward(p + 1),
        };
        self.slot_mut(p).forward = f;
    }

    fn place(&self, r: usize) -> Place<T> {
        let last = |i: usize| self.trees(i).last().copied();
        let first = |i: usize| self.trees(i).first().copied();
        if let Some(t) = last(r) {
            return Place::After(t);
        }
        if r > 0 {
            if let Some(t) = last(r - 1) {
                return Place::After(t);
            }
        }
        if let Some(t) = first(r + 1) {
            return Place::Before(t);
        }
        // Only reachable in transient states; scan outward.
        if let Some(t) = (0..r.saturating_sub(1)).rev().find_map(last) {
            return Place::After(t);
        }
        match (r + 2..self.len()).find_map(first) {
            Some(t) => Place::Before(t),
            None => Place::Alone,
        }
    }

    fn store<H: Host<Tree = T>>(&mut self, h: &mut H, r: usize, t: T) {
        self.ensure(r);
        let at = self.place(r);
        h.link(t, at);
        self.slot_mut(r).trees.push(t);
    }

    fn take_at<H: Host<Tree = T>>(&mut self, h: &mut H, i: usize, k: usize) -> T {
        let t = self.slot_mut(i).trees.remove(k);
        h.unlink(t);
        t
    }

    fn free_index(&self, i: usize, from: usize) -> usize {
        let r = self.reserved;
        from + self.trees(i)[from..]
            .iter()
            .position(|&t| Some(t) != r)
            .expect("unreserved tree in slot")
    }

    /// Joins the two earliest-stored unreserved trees of slot `j` and stores
    /// the result in slot `j + 1`.
    fn join_pair<H: Host<Tree = T>>(&mut self, h: &mut H, j: usize) {
        let k = self.free_index(j, 0);
        let a = self.take_at(h, j, k);
        let k = self.free_index(j, k);
        let b = self.take_at(h, j, k);
        let w = h.join(a, b);
        self.store(h, j + 1, w);
    }

    /// Turns a 3 at `j` into a 1 and carries into `j + 1`.
    pub fn fix_carry<H: Host<Tree = T>>(&mut self, h: &mut H, j: usize) {
        assert_eq!(self.digit(j), 3, "fix_carry needs d_j = 3");
        self.counts.fixes += 1;
        self.counts.digit_writes += 2;
        self.join_pair(h, j);
        self.slot_mut(j).forward =
            if self.digit(j + 1) == 3 { j + 1 } else { self.forward(j + 1) };
    }

    /// Turns a 0 at `j` into a 2 by splitting a tree borrowed from `j + 1`.
    ///
    /// Split outcomes other than two rank-`j` trees are folded back in here:
    /// a tree that keeps rank `j + 1` goes back to its slot, and a leftover of
    /// lower rank is queued for an increment once the decrement finishes.
    fn fix_borrow<H: Host<Tree = T>>(&mut self, h: &mut H, j: usize) -> Borrow {
        assert!(self.digit(j) == 0 && j + 1 < self.len(), "fix_borrow needs d_j = 0, j < ℓ-1");
        self.counts.fixes += 1;
        self.counts.digit_writes += 2;
        let k = self.free_index(j + 1, 0);
        let a = self.take_at(h, j + 1, k);
        let s = h.split(a, j + 1);
        let out = match s.single {
            None if s.rest_rank == j => {
                self.store(h, j, s.last);
                self.store(h, j, s.rest);
                self.relink(j);
                Borrow::Done
            }
            None if s.rest_rank == j + 1 => {
                self.store(h, j + 1, s.rest);
                self.store(h, j, s.last);
                self.relink(j);
                Borrow::Kept
            }
            Some((z, zr)) if zr == j && s.rest_rank <= j => {
                self.store(h, j, s.last);
                self.store(h, j, z);
                self.relink(j);
                self.pending.push((s.rest, s.rest_rank));
                Borrow::Done
            }
            Some((z, zr)) if zr + 1 == j && s.rest_rank + 2 <= j => {
                self.store(h, j, s.last);
                self.store(h, j - 1, z);
                self.counts.digit_writes += 1;
                if self.digit(j - 1) >= 3 {
                    self.join_pair(h, j - 1);
                    self.counts.digit_writes += 2;
                }
                self.relink(j);
                self.relink(j - 1);
                self.pending.push((s.rest, s.rest_rank));
                Borrow::Done
            }
            _ => panic!(
                "unexpected split outcome at rank {}: rest rank {}, single {:?}",
                j + 1,
                s.rest_rank,
                s.single.map(|p| p.1)
            ),
        };
        self.trim();
        out
    }

    /// Adds `t` (rank `i`) to slot `i`; the value grows by 2^i.
    pub fn increment<H: Host<Tree = T>>(&mut self, h: &mut H, i: usize, t: T) {
        self.counts = OpCounts::default();
        self.inc_at(h, i, t);
    }

    fn inc_at<H: Host<Tree = T>>(&mut self, h: &mut H, i: usize, t: T) {
        assert!(i <= self.len(), "increment at {i} beyond length {}", self.len());
        self.ensure(i);
        if self.digit(i) == 3 {
            self.fix_carry(h, i);
        }
        let j = self.forward(i);
        if j < self.len() && self.digit(j) == 3 {
            self.fix_carry(h, j);
        }
        self.store(h, i, t);
        self.counts.digit_writes += 1;
        if self.digit(i) == 3 {
            self.fix_carry(h, i);
        }
    }

    /// Removes some rank-`i` tree; the value drops by 2^i.
    pub fn decrement<H: Host<Tree = T>>(&mut self, h: &mut H, i: usize) -> T {
        self.dec_at(h, i, None)
    }

    /// Removes the given tree, which must sit in slot `i`.
    pub fn remove<H: Host<Tree = T>>(&mut self, h: &mut H, i: usize, t: T) -> T {
        assert!(self.trees(i).contains(&t), "tree not in slot {i}");
        self.dec_at(h, i, Some(t))
    }

    fn dec_at<H: Host<Tree = T>>(&mut self, h: &mut H, i: usize, want: Option<T>) -> T {
        assert!(i < self.len(), "decrement at {i} with length {}", self.len());
        self.counts = OpCounts::default();
        self.reserved = want;
        let mut got = None;
        if self.digit(i) == 0 {
            if let Borrow::Kept = self.fix_borrow(h, i) {
                got = Some(self.take_last(h, i));
            }
        }
        if got.is_none() {
            let j = self.forward(i);
            if j + 1 < self.len() && self.digit(j) == 0 {
                self.fix_borrow(h, j);
            }
            got = Some(match want {
                Some(t) => {
                    let k = self.trees(i).iter().position(|&x| x == t).expect("reserved tree");
                    self.reserved = None;
                    self.counts.digit_writes += 1;
                    self.take_at(h, i, k)
                }
                None => self.take_last(h, i),
            });
            if i + 1 < self.len() && self.digit(i) == 0 {
                self.fix_borrow(h, i);
            }
        }
        self.reserved = None;
        self.trim();
        while let Some((t, k)) = self.pending.pop() {
            self.inc_at(h, k, t);
        }
        got.expect("decrement result")
    }

    fn take_last<H: Host<Tree = T>>(&mut self, h: &mut H, i: usize) -> T {
        let k = self.digit(i).checked_sub(1).expect("nonzero digit");
        self.counts.digit_writes += 1;
        self.take_at(h, i, k)
    }

    /// Drains every stored tree, leaving the counter at zero.
    pub fn drain<H: Host<Tree = T>>(&mut self, h: &mut H) -> Vec<(usize, T)> {
        let all: Vec<_> = self.iter_trees().collect();
        for &(_, t) in &all {
            h.unlink(t);
        }
        while self.slots.len() > 0 {
            self.slots.shrink().expect("nonempty");
        }
        all
    }
}

impl Counter<()> {
    /// Pure counter with the given digits and block links set.
    pub fn from_digits(d: &[u8]) -> Self {
        let mut c = Counter::new();
        for (i, &x) in d.iter().enumerate() {
            c.ensure(i);
            for _ in 0..x {
                c.slot_mut(i).trees.push(());
            }
        }
        for i in (0..d.len()).rev() {
            if i + 1 < d.len() {
                c.relink(i);
            }
        }
        c
    }

    pub fn inc(&mut self, i: usize) {
        self.increment(&mut Pure, i, ());
    }

    pub fn dec(&mut self, i: usize) {
        self.decrement(&mut Pure, i);
    }
}

/// Regularity of a digit string, least significant digit first.
pub fn is_regular(d: &[u8]) -> bool {
    if d.last() == Some(&0) {
        return false;
    }
    // Automaton state: last non-2 digit was 0/1, last non-1 digit was 2/3.
    let (mut low, mut high) = (false, false);
    for &x in d {
        match x {
            0 if high => (low, high) = (true, false),
            1 => low = true,
            2 => high = true,
            3 if low => (low, high) = (false, true),
            _ => return false,
        }
    }
    true
}

pub fn format_digits(d: &[u8]) -> String {
    d.iter().map(u8::to_string).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    // Definition check, independent of the automaton in `is_regular`.
    fn regular_by_definition(d: &[u8]) -> bool {
        if d.last() == Some(&0) || d.iter().any(|&x| x > 3) {
            return false;
        }
        d.iter().enumerate().all(|(i, &x)| {
            let before = |skip: u8| d[..i].iter().rev().find(|&&y| y != skip).copied();
            match x {
                3 => matches!(before(2), Some(0 | 1)),
                0 => matches!(before(1), Some(2 | 3)),
                _ => true,
            }
        })
    }

    fn value(d: &[u8]) -> u128 {
        d.iter().enumerate().map(|(i, &x)| (x as u128) << i).sum()
    }

    #[test]
    fn automaton_matches_definition_on_all_short_strings() {
        for len in 0..=7u32 {
            for code in 0..4u32.pow(len) {
                let d: Vec<u8> = (0..len).map(|k| ((code >> (2 * k)) & 3) as u8).collect();
                assert_eq!(is_regular(&d), regular_by_definition(&d), "{d:?}");
            }
        }
    }

    #[test]
    fn regularity_examples() {
        assert!(!is_regular(&[2, 3]));
        assert!(is_regular(&[1, 3]));
        assert!(is_regular(&[]));
    }

    #[test]
    fn fresh_counter_is_zero() {
        let c = Counter::<()>::new();
        assert_eq!(c.digits(), Vec::<u8>::new());
        assert_eq!(c.value(), 0);
    }

    #[test]
    fn first_increment() {
        let mut c = Counter::new();
        c.inc(0);
        assert_eq!(c.digits(), [1]);
    }

    #[test]
    fn five_increments_at_zero() {
        let mut c = Counter::new();
        for _ in 0..5 {
            c.inc(0);
        }
        assert_eq!(c.value(), 5);
        assert!(regular_by_definition(&c.digits()));
    }

    #[test]
    fn fix_carry_on_single_three() {
        let mut c = Counter::from_digits(&[3]);
        c.fix_carry(&mut Pure, 0);
        assert_eq!(c.digits(), [1, 1]);
        assert_eq!(c.value(), 3);
        assert_eq!(c.last_counts().digit_writes, 2);
    }

    #[test]
    fn fix_carry_intermediate_state() {
        let mut c = Counter::from_digits(&[3, 2, 3]);
        c.fix_carry(&mut Pure, 0);
        assert_eq!(c.digits(), [1, 3, 3]);
        assert_eq!(c.forward(0), 1);
    }

    #[test]
    fn fix_borrow_examples() {
        let mut c = Counter::from_digits(&[0, 2]);
        c.fix_borrow(&mut Pure, 0);
        assert_eq!(c.digits(), [2, 1]);
        assert_eq!(c.value(), 4);
        let mut c = Counter::from_digits(&[0, 3]);
        c.fix_borrow(&mut Pure, 0);
        assert_eq!(c.digits(), [2, 2]);
    }

    #[test]
    fn increment_example() {
        let mut c = Counter::from_digits(&[1, 3]);
        c.inc(1);
        assert_eq!(c.digits(), [1, 2, 1]);
        assert_eq!(value(&c.digits()), 9);
    }

    #[test]
    fn decrement_examples() {
        let mut c = Counter::from_digits(&[2, 1]);
        c.dec(1);
        assert_eq!(c.digits(), [2]);
        let mut c = Counter::from_digits(&[1, 2, 1]);
        c.dec(0);
        assert_eq!(c.value(), 8);
        assert!(regular_by_definition(&c.digits()));
    }

    #[test]
    fn value_examples() {
        assert_eq!(Counter::from_digits(&[3]).value(), 3);
        assert_eq!(Counter::from_digits(&[1, 2, 1]).value(), 9);
    }

    #[test]
    #[should_panic]
    fn increment_beyond_length_panics() {
        Counter::new().inc(1);
    }

    #[test]
    #[should_panic]
    fn decrement_of_zero_panics() {
        Counter::new().dec(0);
    }
}
