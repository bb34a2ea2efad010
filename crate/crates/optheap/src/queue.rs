//! The priority queue: two trees, two counters, one violation structure.
//!
//! T1 holds the minimum at its root `t1`. T2, when present, is a tree of
//! larger rank picked up by a meld; its children are moved below `t1` a few
//! at a time until the two ranks meet, and then T2 goes below `t1` whole.
//! Nodes live in a caller-owned [`Forest`], so two queues over the same
//! forest can be melded in constant time.

use std::collections::LinkedList;
use std::marker::PhantomData;

use arrayvec::ArrayVec;
use serde::Serialize;
use thiserror::Error;

use crate::counter::{Counter, Host, Place, Split};
use crate::rarray::ResizableArray;
use crate::tree::{Forest, NodeId};
use crate::violations::{walk, Entry, ViolationStructure};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueueError {
    #[error("queue is empty")]
    Empty,
    #[error("queue still holds {0} elements")]
    NotEmpty(usize),
    #[error("new element is greater than the old one")]
    NotDecrease,
}

/// Tunables. The defaults are the ones every bound in the docs refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Config {
    /// Violation array entries added per insert, decrease or meld.
    pub extension: usize,
    /// T2-to-T1 transfer steps per decrease or meld.
    pub transfers: usize,
    /// Units of dismissed storage released per operation.
    pub reclaim_budget: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config { extension: 4, transfers: 2, reclaim_budget: 16 }
    }
}

/// Labels for [`OpStats::reductions`].
pub const REDUCTION_KINDS: [&str; 11] =
    ["retry", "1", "2", "3", "4", "5", "parent", "t2-child", "shared", "nested", "lone"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// A refill tree came from a place the reduction was about to edit;
    /// nothing was changed for good.
    Retry = 0,
    Case1 = 1,
    Case2 = 2,
    Case3 = 3,
    Case4 = 4,
    Case5 = 5,
    /// The parent is a child of `t1`.
    Parent = 6,
    /// The violation is a child of `t2`.
    T2Child = 7,
    /// Two of the violations share a parent.
    Shared = 8,
    /// One violation's sibling is another's parent.
    Nested = 9,
    /// A rank-0 violation is its parent's only child.
    Lone = 10,
}

/// Work done by one public operation.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpStats {
    pub comparisons: u64,
    pub edits: u64,
    pub fixes: u64,
    pub digit_writes: u64,
    pub reductions: [u32; 11],
}

/// Largest cost of a single counter operation seen so far.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CounterPeaks {
    pub inc_comparisons: u64,
    pub dec_comparisons: u64,
    pub fixes: u32,
    pub digit_writes: u32,
}

#[derive(Debug)]
enum Payload {
    Counter(#[allow(dead_code)] Counter<NodeId>),
    Array(#[allow(dead_code)] ResizableArray<Entry>),
}

#[derive(Debug)]
struct Garbage {
    units: usize,
    _payload: Payload,
}

/// Dismissed structures, released a bounded amount at a time.
#[derive(Debug, Default)]
pub struct Pile {
    items: LinkedList<Garbage>,
    units: usize,
}

impl Pile {
    fn push_counter(&mut self, c: Counter<NodeId>) {
        let units = c.allocated().max(1);
        self.units += units;
        self.items.push_back(Garbage { units, _payload: Payload::Counter(c) });
    }

    fn push_array(&mut self, a: ResizableArray<Entry>) {
        let units = a.allocated().max(1);
        self.units += units;
        self.items.push_back(Garbage { units, _payload: Payload::Array(a) });
    }

    fn append(&mut self, other: &mut Pile) {
        self.units += other.units;
        other.units = 0;
        self.items.append(&mut other.items);
    }

    fn step(&mut self, mut budget: usize) {
        while budget > 0 {
            let Some(g) = self.items.front_mut() else { break };
            let take = budget.min(g.units);
            g.units -= take;
            self.units -= take;
            budget -= take;
            if g.units == 0 {
                self.items.pop_front();
            }
        }
    }

    /// Storage units still held.
    pub fn units(&self) -> usize {
        self.units
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Counter host for the children of one root.
pub(crate) struct Root<'a, T: Ord> {
    pub(crate) f: &'a mut Forest<T>,
    pub(crate) vs: &'a mut ViolationStructure,
    pub(crate) root: NodeId,
    /// Current minimum, the guard of new list entries.
    pub(crate) t1: NodeId,
    pub(crate) tag: u32,
    /// Children of the minimum are never violations.
    pub(crate) clears: bool,
    /// Children of `t2` may be smaller than it; record every new one.
    pub(crate) marks: bool,
}

impl<T: Ord> Host for Root<'_, T> {
    type Tree = NodeId;

    fn join(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let r = self.f.rank(a);
        let w = self.f.join(a, b);
        self.vs.refile(self.f, self.t1, w, r);
        w
    }

    fn split(&mut self, t: NodeId, rank: usize) -> Split<NodeId> {
        let (c, single) = self.f.split(t);
        self.vs.refile(self.f, self.t1, t, rank);
        Split {
            last: c,
            rest: t,
            rest_rank: self.f.rank(t),
            single: single.map(|z| (z, self.f.rank(z))),
        }
    }

    fn link(&mut self, t: NodeId, at: Place<NodeId>) {
        match at {
            Place::After(s) => self.f.insert_after(s, t),
            Place::Before(s) => self.f.insert_before(s, t),
            Place::Alone => self.f.push_last(self.root, t),
        }
        self.f.nm(t).slot_tag = self.tag;
        if self.clears {
            self.vs.delist(self.f, t);
        } else if self.marks && !self.f.is_listed(t) {
            self.vs.record(self.f, self.t1, t);
        }
        if self.f.last_child(self.root) == Some(t) {
            let r = self.f.rank(t) + 1;
            if self.f.rank(self.root) != r {
                self.f.set_rank(self.root, r);
            }
        }
    }

    fn unlink(&mut self, t: NodeId) {
        let last = self.f.last_child(self.root) == Some(t);
        self.f.cut(t);
        self.f.nm(t).slot_tag = 0;
        if last {
            self.f.refresh_rank(self.root);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    One,
    Two,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum CounterOp {
    Inc(usize, NodeId),
    Dec(usize),
    Remove(usize, NodeId),
}

/// Worst-case efficient meldable priority queue over nodes of a [`Forest`].
#[derive(Debug)]
pub struct PriorityQueue<T> {
    pub(crate) t1: Option<NodeId>,
    pub(crate) t2: Option<NodeId>,
    pub(crate) c1: Counter<NodeId>,
    pub(crate) c1_tag: u32,
    pub(crate) c2: Counter<NodeId>,
    pub(crate) c2_tag: u32,
    pub(crate) vs: ViolationStructure,
    pile: Pile,
    size: usize,
    config: Config,
    pub(crate) stats: OpStats,
    peaks: CounterPeaks,
    pub(crate) retries: u64,
    pub(crate) retry_streak: u32,
    _elem: PhantomData<fn() -> T>,
}

/// Takes the isolated top tree off a root about to become a child, so the
/// root's last group keeps at least two members.
pub(crate) fn normalize<T: Ord>(
    f: &mut Forest<T>,
    vs: &mut ViolationStructure,
    c: &mut Counter<NodeId>,
    root: NodeId,
    t1: NodeId,
    tag: u32,
) -> ArrayVec<NodeId, 4> {
    let mut out = ArrayVec::new();
    loop {
        let l = c.len();
        if l < 2 || c.digit(l - 1) != 1 || c.digit(l - 2) != 0 || out.is_full() {
            return out;
        }
        let mut h = Root { f: &mut *f, vs: &mut *vs, root, t1, tag, clears: false, marks: false };
        out.push(c.decrement(&mut h, l - 1));
    }
}

impl<T: Ord> PriorityQueue<T> {
    pub fn new(f: &mut Forest<T>) -> Self {
        Self::with_config(f, Config::default())
    }

    pub fn with_config(f: &mut Forest<T>, config: Config) -> Self {
        PriorityQueue {
            t1: None,
            t2: None,
            c1: Counter::new(),
            c1_tag: f.fresh_tag(),
            c2: Counter::new(),
            c2_tag: f.fresh_tag(),
            vs: ViolationStructure::new(f.fresh_tag()),
            pile: Pile::default(),
            size: 0,
            config,
            stats: OpStats::default(),
            peaks: CounterPeaks::default(),
            retries: 0,
            retry_streak: 0,
            _elem: PhantomData,
        }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn config(&self) -> Config {
        self.config
    }

    /// Cost of the most recent public operation.
    pub fn last_stats(&self) -> OpStats {
        self.stats
    }

    pub fn counter_peaks(&self) -> CounterPeaks {
        self.peaks
    }

    /// Reductions abandoned because a counter operation reshaped a tree the
    /// reduction was about to use.
    pub fn retries(&self) -> u64 {
        self.retries
    }

    pub fn t1(&self) -> Option<NodeId> {
        self.t1
    }

    pub fn t2(&self) -> Option<NodeId> {
        self.t2
    }

    pub fn counter1(&self) -> &Counter<NodeId> {
        &self.c1
    }

    pub fn counter2(&self) -> &Counter<NodeId> {
        &self.c2
    }

    pub fn violations(&self) -> &ViolationStructure {
        &self.vs
    }

    pub fn pile(&self) -> &Pile {
        &self.pile
    }

    /// Auxiliary storage held: violation array, counters and pile, in slots.
    pub fn space(&self) -> usize {
        self.vs.array.allocated() + self.c1.allocated() + self.c2.allocated() + self.pile.units()
    }

    /// Whether `x` is a child of `t1`.
    pub(crate) fn under_t1(&self, f: &Forest<T>, x: NodeId) -> bool {
        f.n(x).slot_tag == self.c1_tag
    }

    pub(crate) fn under_t2(&self, f: &Forest<T>, x: NodeId) -> bool {
        self.t2.is_some() && f.n(x).slot_tag == self.c2_tag
    }

    pub fn find_min(&self) -> Result<NodeId, QueueError> {
        self.t1.ok_or(QueueError::Empty)
    }

    /// Releases the auxiliary structures of an empty queue.
    pub fn destroy(&mut self) -> Result<(), QueueError> {
        if self.size != 0 {
            return Err(QueueError::NotEmpty(self.size));
        }
        self.pile = Pile::default();
        self.vs.array = ResizableArray::new();
        self.c1 = Counter::new();
        self.c2 = Counter::new();
        Ok(())
    }

    fn begin(&mut self) {
        self.stats = OpStats::default();
    }

    fn end(&mut self, f: &Forest<T>, m0: crate::tree::Meter) {
        let m = f.meter();
        self.stats.comparisons = m.comparisons - m0.comparisons;
        self.stats.edits = m.edits - m0.edits;
        self.pile.step(self.config.reclaim_budget);
    }

    pub(crate) fn counter_op(
        &mut self,
        f: &mut Forest<T>,
        side: Side,
        op: CounterOp,
    ) -> Option<NodeId> {
        let t1 = self.t1.expect("queue root");
        let (c, root, tag, clears) = match side {
            Side::One => (&mut self.c1, t1, self.c1_tag, true),
            Side::Two => (&mut self.c2, self.t2.expect("second root"), self.c2_tag, false),
        };
        let before = f.meter().comparisons;
        let mut h = Root { f: &mut *f, vs: &mut self.vs, root, t1, tag, clears, marks: !clears };
        let (out, dec) = match op {
            CounterOp::Inc(i, t) => {
                c.increment(&mut h, i, t);
                (None, false)
            }
            CounterOp::Dec(i) => (Some(c.decrement(&mut h, i)), true),
            CounterOp::Remove(i, t) => (Some(c.remove(&mut h, i, t)), true),
        };
        let counts = c.last_counts();
        let spent = f.meter().comparisons - before;
        self.stats.fixes += counts.fixes as u64;
        self.stats.digit_writes += counts.digit_writes as u64;
        let p = &mut self.peaks;
        if dec {
            p.dec_comparisons = p.dec_comparisons.max(spent);
        } else {
            p.inc_comparisons = p.inc_comparisons.max(spent);
        }
        p.fixes = p.fixes.max(counts.fixes);
        p.digit_writes = p.digit_writes.max(counts.digit_writes);
        out
    }

    /// Adds a detached rank-0 node.
    pub fn insert(&mut self, f: &mut Forest<T>, x: NodeId) {
        debug_assert!(f.is_detached(x) && f.rank(x) == 0 && f.last_child(x).is_none());
        let m0 = f.meter();
        self.begin();
        self.size += 1;
        match self.t1 {
            None => self.t1 = Some(x),
            Some(t1) => {
                let mut y = x;
                if !f.le(t1, x) {
                    f.swap(x, t1);
                    self.vs.rehome(f, x);
                    self.t1 = Some(x);
                    y = t1;
                }
                self.counter_op(f, Side::One, CounterOp::Inc(0, y));
                let root = self.t1.expect("root");
                if self.t2.is_some_and(|t2| f.rank(t2) <= f.rank(root)) {
                    self.merge_t2(f);
                }
            }
        }
        self.extend(f);
        self.end(f, m0);
    }

    fn extend(&mut self, f: &Forest<T>) {
        if let Some(t1) = self.t1 {
            self.vs.extend(self.config.extension, f.rank(t1));
        }
    }

    /// Moves `x`'s counter slot, if any, over to `y`, which takes its place.
    fn retarget_slot(&mut self, f: &Forest<T>, x: NodeId, y: NodeId) {
        let tag = f.n(x).slot_tag;
        let r = f.rank(x);
        if tag == self.c1_tag {
            assert!(self.c1.retarget(r, x, y));
        } else if tag == self.c2_tag && self.t2.is_some() {
            assert!(self.c2.retarget(r, x, y));
        }
    }

    /// Exchanges `x` with the minimum root. Returns the old root, which now
    /// sits where `x` was.
    fn promote(&mut self, f: &mut Forest<T>, x: NodeId) -> NodeId {
        let t1 = self.t1.expect("queue root");
        self.vs.delist(f, x);
        self.retarget_slot(f, x, t1);
        f.swap(x, t1);
        self.vs.rehome(f, x);
        self.t1 = Some(x);
        if self.t2 == Some(x) {
            self.t2 = Some(t1);
        }
        t1
    }

    /// Records `y` as violating unless it holds a place that never is.
    fn mark(&mut self, f: &mut Forest<T>, y: NodeId) {
        self.vs.delist(f, y);
        if Some(y) == self.t1 || Some(y) == self.t2 || self.under_t1(f, y) {
            return;
        }
        let t1 = self.t1.expect("queue root");
        self.vs.record(f, t1, y);
    }

    /// Replaces the element of `x` by the no larger `v`.
    pub fn decrease(&mut self, f: &mut Forest<T>, x: NodeId, v: T) -> Result<(), QueueError> {
        if v > *f.element(x) {
            return Err(QueueError::NotDecrease);
        }
        let m0 = f.meter();
        self.begin();
        f.set_elem(x, v);
        let t1 = self.t1.expect("decrease on an empty queue");
        if x != t1 {
            let pos = if f.le(t1, x) { x } else { self.promote(f, x) };
            self.mark(f, pos);
            self.reduce_up_to(f, 1);
            self.extend(f);
            for _ in 0..self.config.transfers {
                self.transfer(f);
            }
        }
        self.end(f, m0);
        Ok(())
    }

    fn reduce_up_to(&mut self, f: &mut Forest<T>, k: usize) {
        for _ in 0..k {
            if !self.reduce(f) {
                break;
            }
        }
    }

    /// Moves one child of rank `rank(t1)` from `t2` to `t1`, then merges
    /// T2 below `t1` once its rank no longer exceeds `rank(t1)`.
    fn transfer(&mut self, f: &mut Forest<T>) {
        let (Some(t1), Some(t2)) = (self.t1, self.t2) else { return };
        let k = f.rank(t1);
        if k < f.rank(t2) {
            let y = self.counter_op(f, Side::Two, CounterOp::Dec(k)).expect("tree");
            self.counter_op(f, Side::One, CounterOp::Inc(k, y));
        }
        if f.rank(t2) <= f.rank(t1) {
            self.merge_t2(f);
        }
    }

    pub(crate) fn merge_t2(&mut self, f: &mut Forest<T>) {
        let (t1, t2) = (self.t1.expect("root"), self.t2.expect("second root"));
        let extra = normalize(f, &mut self.vs, &mut self.c2, t2, t1, self.c2_tag);
        let old = std::mem::take(&mut self.c2);
        self.pile.push_counter(old);
        self.c2_tag = f.fresh_tag();
        self.t2 = None;
        self.counter_op(f, Side::One, CounterOp::Inc(f.rank(t2), t2));
        for e in extra {
            self.counter_op(f, Side::One, CounterOp::Inc(f.rank(e), e));
        }
    }

    /// Melds two queues over the same forest.
    pub fn meld(self, other: Self, f: &mut Forest<T>) -> Self {
        let m0 = f.meter();
        let (mut w, mut l) = match (self.t1, other.t1) {
            (_, None) => (self, other),
            (None, _) => (other, self),
            (Some(a), Some(b)) => {
                if f.le(a, b) {
                    (self, other)
                } else {
                    (other, self)
                }
            }
        };
        w.begin();
        w.pile.append(&mut l.pile);
        let Some(lt1) = l.t1 else {
            w.pile.push_array(std::mem::take(&mut l.vs.array));
            w.pile.push_counter(l.c1);
            w.pile.push_counter(l.c2);
            w.end(f, m0);
            return w;
        };
        let t1 = w.t1.expect("root");
        w.size += l.size;

        // Highest rank wins the T2 spot; ties keep t1.
        let mut s = t1;
        for u in [w.t2, Some(lt1), l.t2].into_iter().flatten() {
            if f.rank(u) > f.rank(s) {
                s = u;
            }
        }

        // Roots going below another root first shed an isolated top tree.
        let mut moved: ArrayVec<NodeId, 16> = ArrayVec::new();
        if let Some(wt2) = w.t2 {
            if wt2 != s {
                moved.push(wt2);
                moved.extend(normalize(f, &mut w.vs, &mut w.c2, wt2, t1, w.c2_tag));
            }
        }
        if lt1 != s {
            moved.push(lt1);
            moved.extend(normalize(f, &mut l.vs, &mut l.c1, lt1, lt1, l.c1_tag));
        }
        if let Some(lt2) = l.t2 {
            if lt2 != s {
                moved.push(lt2);
                moved.extend(normalize(f, &mut l.vs, &mut l.c2, lt2, lt1, l.c2_tag));
            }
        }
        l.vs.spill(f, lt1);
        w.pile.push_array(std::mem::take(&mut l.vs.array));

        // Install the new T2 with its counter.
        let old_c2 = if s == t1 {
            w.t2 = None;
            let tag = f.fresh_tag();
            let c = std::mem::take(&mut w.c2);
            w.c2_tag = tag;
            Some(c)
        } else if Some(s) == w.t2 {
            None
        } else {
            let (c, tag) = if s == lt1 {
                (std::mem::take(&mut l.c1), l.c1_tag)
            } else {
                (std::mem::take(&mut l.c2), l.c2_tag)
            };
            w.t2 = Some(s);
            let old = std::mem::replace(&mut w.c2, c);
            w.c2_tag = tag;
            Some(old)
        };
        if let Some(c) = old_c2 {
            w.pile.push_counter(c);
        }
        w.pile.push_counter(l.c1);
        w.pile.push_counter(l.c2);

        let side = if s == t1 { Side::One } else { Side::Two };
        for u in moved {
            w.counter_op(f, side, CounterOp::Inc(f.rank(u), u));
        }
        w.reduce_up_to(f, 2);
        w.extend(f);
        for _ in 0..w.config.transfers {
            w.transfer(f);
        }
        w.end(f, m0);
        w
    }

    /// Removes the minimum and returns its node, fully detached.
    pub fn delete_min(&mut self, f: &mut Forest<T>) -> Result<NodeId, QueueError> {
        let m0 = f.meter();
        self.begin();
        let out = self.remove_root(f);
        self.end(f, m0);
        out
    }

    /// Removes `x` from the queue; it comes back detached.
    pub fn delete(&mut self, f: &mut Forest<T>, x: NodeId) -> Result<(), QueueError> {
        let m0 = f.meter();
        self.begin();
        let t1 = self.t1.ok_or(QueueError::Empty)?;
        if x != t1 {
            let pos = self.promote(f, x);
            self.mark(f, pos);
        }
        let got = self.remove_root(f)?;
        debug_assert_eq!(got, x);
        self.end(f, m0);
        Ok(())
    }

    fn remove_root(&mut self, f: &mut Forest<T>) -> Result<NodeId, QueueError> {
        let old = self.t1.ok_or(QueueError::Empty)?;

        // T2 joins the children of t1: t1's children go below t2 (their ranks
        // are all smaller), t1 takes over t2's child list and counter, and
        // the bare t2 node is added at rank 0.
        if let Some(t2) = self.t2.take() {
            self.t2 = Some(t2);
            let kids = {
                let mut h = Root {
                    f: &mut *f,
                    vs: &mut self.vs,
                    root: old,
                    t1: old,
                    tag: self.c1_tag,
                    clears: true,
                    marks: false,
                };
                self.c1.drain(&mut h)
            };
            for (r, c) in kids {
                self.counter_op(f, Side::Two, CounterOp::Inc(r, c));
            }
            f.adopt(old, t2);
            std::mem::swap(&mut self.c1, &mut self.c2);
            std::mem::swap(&mut self.c1_tag, &mut self.c2_tag);
            self.t2 = None;
            let dismissed = std::mem::take(&mut self.c2);
            self.pile.push_counter(dismissed);
            self.c2_tag = f.fresh_tag();
            let kids: Vec<NodeId> = self.c1.iter_trees().map(|(_, t)| t).collect();
            for c in kids {
                self.vs.delist(f, c);
            }
            self.counter_op(f, Side::One, CounterOp::Inc(0, t2));
        }

        // Candidates: children of t1, then active, then inactive violations.
        let mut best: Option<NodeId> = None;
        let mut cands: Vec<NodeId> = self.c1.iter_trees().map(|(_, t)| t).collect();
        cands.extend(self.vs.active_list(f));
        cands.extend(walk(f, f.n(old).vhead));
        for c in cands {
            best = match best {
                Some(b) if f.le(b, c) => Some(b),
                _ => Some(c),
            };
        }
        self.size -= 1;
        let Some(x) = best else {
            debug_assert!(f.last_child(old).is_none() && f.n(old).vhead.is_none());
            self.t1 = None;
            return Ok(old);
        };

        // Take x out of the tree.
        if self.under_t1(f, x) {
            self.counter_op(f, Side::One, CounterOp::Remove(f.rank(x), x));
        } else {
            self.vs.delist(f, x);
            self.detach_violation(f, x);
        }
        while let Some(c) = f.last_child(x) {
            f.cut(c);
            f.refresh_rank(x);
            self.counter_op(f, Side::One, CounterOp::Inc(f.rank(c), c));
        }

        // x becomes the root.
        let want = f.rank(old);
        while self.vs.size() < want {
            self.vs.extend(want - self.vs.size(), want);
        }
        f.swap(x, old);
        self.t1 = Some(x);
        self.vs.rehome(f, x);
        let mut pending = walk(f, f.n(x).vhead);
        pending.extend(walk(f, f.n(old).vhead));
        for y in pending {
            self.vs.delist(f, y);
            if !self.under_t1(f, y) {
                self.vs.record(f, x, y);
            }
        }
        debug_assert!(f.is_detached(old) && f.n(old).vhead.is_none());

        while self.reduce(f) {}
        self.vs.trim(2, f.rank(x));
        Ok(old)
    }

    /// Takes the violation `x` out of T1, filling its place with a tree of
    /// the same rank from below `t1`.
    fn detach_violation(&mut self, f: &mut Forest<T>, x: NodeId) {
        let r = f.rank(x);
        let y = self.counter_op(f, Side::One, CounterOp::Dec(r)).expect("tree");
        if y == x {
            return;
        }
        if !self.under_t1(f, x) {
            // y lands where x was; it may be smaller than its new parent.
            f.replace(x, y);
            self.mark(f, y);
            return;
        }
        // The decrement moved x up below t1.
        if f.rank(x) == f.rank(y) {
            assert!(self.c1.retarget(r, x, y));
            f.replace(x, y);
            f.nm(y).slot_tag = self.c1_tag;
            f.nm(x).slot_tag = 0;
        } else {
            self.counter_op(f, Side::One, CounterOp::Inc(f.rank(y), y));
            self.counter_op(f, Side::One, CounterOp::Remove(f.rank(x), x));
        }
    }
}
