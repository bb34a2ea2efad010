//! Violation reductions.
//!
//! Three active violations `x1, x2, x3` of one rank `r` are turned into at
//! most two, using O(1) comparisons. Subtrees that leave their place go below
//! `t1`, where they stop being violations; a place that must keep its rank is
//! refilled by a tree of that rank taken from below `t1`.
//!
//! Besides the textbook cases this handles the shapes they assume away: a
//! parent that is itself a child of `t1`, a violation directly below `t2`,
//! two violations under one parent, a sibling that is another violation's
//! parent, and a lone rank-0 child.

use arrayvec::ArrayVec;

use crate::queue::{CounterOp, PriorityQueue, Reduction, Side};
use crate::tree::{Forest, NodeId};

/// A violation with its parent and the other member of its last-two pair.
#[derive(Debug, Clone, Copy)]
struct Leg {
    x: NodeId,
    s: Option<NodeId>,
    p: NodeId,
}

impl Leg {
    fn s(&self) -> NodeId {
        self.s.expect("sibling")
    }
}

type Shape = (usize, Option<NodeId>, Option<NodeId>, Option<NodeId>);

enum Acquire {
    Got(NodeId),
    Infeasible,
    Retry,
}

type Pieces = ArrayVec<NodeId, 16>;

impl<T: Ord> PriorityQueue<T> {
    /// Performs one reduction if some rank holds three active violations
    /// and the reduction fits. Returns whether the structure changed.
    pub(crate) fn reduce(&mut self, f: &mut Forest<T>) -> bool {
        let Some(r) = self.vs.reducible_rank() else { return false };
        let changed = match self.reduce_at(f, r) {
            Some(Reduction::Retry) => {
                self.stats.reductions[0] += 1;
                self.retry_streak += 1;
                self.retry_streak <= 3
            }
            Some(kind) => {
                self.stats.reductions[kind as usize] += 1;
                self.retry_streak = 0;
                true
            }
            None => false,
        };
        if let (Some(t1), Some(t2)) = (self.t1, self.t2) {
            if f.rank(t2) <= f.rank(t1) {
                self.merge_t2(f);
            }
        }
        changed
    }

    fn reduce_at(&mut self, f: &mut Forest<T>, r: usize) -> Option<Reduction> {
        let x1 = self.vs.first_at(r).expect("reducible rank");
        let x2 = f.n(x1).vnext.expect("second violation");
        let x3 = f.n(x2).vnext.expect("third violation");
        let xs = [x1, x2, x3];
        debug_assert!(xs.iter().all(|&x| f.rank(x) == r && self.vs.is_active(f, x)));
        let len = self.c1.len();

        if r < len {
            for x in xs {
                if self.under_t2(f, x) {
                    continue;
                }
                if let Some(plan) = f.case1_plan(x) {
                    for &y in &plan {
                        self.vs.delist(f, y);
                        f.cut(y);
                    }
                    for &y in &plan {
                        self.add_below_t1(f, y);
                    }
                    return Some(Reduction::Case1);
                }
            }
        }

        if let Some(&x) = xs.iter().find(|&&x| self.under_t2(f, x)) {
            if r > len {
                return None;
            }
            self.counter_op(f, Side::Two, CounterOp::Remove(r, x));
            self.vs.delist(f, x);
            self.add_below_t1(f, x);
            return Some(Reduction::T2Child);
        }

        let legs = xs.map(|x| leg(f, x));

        if let Some(l) = legs.iter().find(|l| self.under_t1(f, l.p)) {
            let (x, p) = (l.x, l.p);
            self.counter_op(f, Side::One, CounterOp::Remove(f.rank(p), p));
            self.vs.delist(f, x);
            f.cut(x);
            let mut pieces = Pieces::new();
            pieces.push(x);
            self.strip(f, p, &mut pieces);
            self.add_all(f, pieces);
            return Some(Reduction::Parent);
        }

        if let Some(l) = legs.iter().find(|l| l.s.is_none()) {
            return self.lone(f, *l);
        }

        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    continue;
                }
                if a < b && legs[a].p == legs[b].p {
                    return self.shared(f, legs[a], legs[b]);
                }
                if legs[a].s == Some(legs[b].p) {
                    return self.nested(f, legs[a], legs[b]);
                }
            }
        }

        let mut legs = legs;
        legs.sort_by_key(|l| std::cmp::Reverse(f.rank(l.s())));
        let d = legs.map(|l| f.rank(l.s()) as i64 - r as i64);
        match (d[0], d[1], d[2]) {
            (1, 1, _) | (0, 0, _) | (0, -1, _) => {
                let (a, b) = if f.le(legs[0].p, legs[1].p) {
                    (legs[0], legs[1])
                } else {
                    (legs[1], legs[0])
                };
                self.swap_sibling(f, a, b).map(|done| if done { Reduction::Case2 } else { Reduction::Retry })
            }
            (1, 0, _) => {
                if f.le(legs[0].p, legs[1].p) {
                    self.swap_sibling(f, legs[0], legs[1]).map(|done| if done { Reduction::Case3 } else { Reduction::Retry })
                } else {
                    self.lift_sibling(f, legs[0], legs[1]).map(|done| if done { Reduction::Case3 } else { Reduction::Retry })
                }
            }
            (-1, -1, -1) => {
                let (p0, p1, p2) = (legs[0].p, legs[1].p, legs[2].p);
                let m01 = if f.le(p0, p1) { 0 } else { 1 };
                let m = if f.le(legs[m01].p, p2) { m01 } else { 2 };
                let others: ArrayVec<Leg, 2> =
                    (0..3).filter(|&i| i != m).map(|i| legs[i]).collect();
                self.triple(f, legs[m], others[0], others[1]).map(|done| if done { Reduction::Case4 } else { Reduction::Retry })
            }
            (1, -1, -1) => {
                if !f.le(legs[0].p, legs[1].p) {
                    self.lift_sibling(f, legs[0], legs[1]).map(|done| if done { Reduction::Case5 } else { Reduction::Retry })
                } else if !f.le(legs[0].p, legs[2].p) {
                    self.lift_sibling(f, legs[0], legs[2]).map(|done| if done { Reduction::Case5 } else { Reduction::Retry })
                } else {
                    self.triple(f, legs[0], legs[1], legs[2]).map(|done| if done { Reduction::Case5 } else { Reduction::Retry })
                }
            }
            other => unreachable!("sibling ranks {other:?} around rank {r}"),
        }
    }

    /// Adds a detached tree below `t1`, splitting it first if its rank is
    /// beyond the counter's length.
    pub(crate) fn add_below_t1(&mut self, f: &mut Forest<T>, t: NodeId) {
        let mut stack: Vec<NodeId> = vec![t];
        while let Some(t) = stack.pop() {
            let q = f.rank(t);
            if q <= self.c1.len() {
                self.counter_op(f, Side::One, CounterOp::Inc(q, t));
            } else {
                self.vs.delist(f, t);
                let (c, single) = f.split(t);
                stack.push(t);
                stack.push(c);
                stack.extend(single);
            }
        }
    }

    fn add_all(&mut self, f: &mut Forest<T>, pieces: Pieces) {
        for t in pieces {
            self.add_below_t1(f, t);
        }
    }

    /// Detaches `p`'s trailing lonely children and `p` itself as pieces.
    /// `p` has already lost children at its end.
    fn strip(&mut self, f: &mut Forest<T>, p: NodeId, out: &mut Pieces) {
        self.vs.delist(f, p);
        while let Some(l) = f.last_child(p) {
            if !f.lonely(l, f.left(l), None) {
                break;
            }
            f.cut(l);
            out.push(l);
        }
        f.refresh_rank(p);
        out.push(p);
    }

    /// Puts `new` where `old` is, with the same rank; `old` comes out
    /// detached. `violating` says whether `new` may be smaller than its new
    /// parent; roots' children are handled by their counters' rules.
    fn fill(&mut self, f: &mut Forest<T>, old: NodeId, new: NodeId, violating: bool) {
        let tag = f.n(old).slot_tag;
        let r = f.rank(old);
        debug_assert_eq!(f.rank(new), r);
        f.replace(old, new);
        if tag == self.c1_tag {
            assert!(self.c1.retarget(r, old, new));
            f.nm(new).slot_tag = tag;
            f.nm(old).slot_tag = 0;
            self.vs.delist(f, new);
        } else if self.under_t2(f, old) {
            assert!(self.c2.retarget(r, old, new));
            f.nm(new).slot_tag = tag;
            f.nm(old).slot_tag = 0;
            self.mark_violating(f, new);
        } else if violating {
            self.mark_violating(f, new);
        }
    }

    fn mark_violating(&mut self, f: &mut Forest<T>, y: NodeId) {
        self.vs.delist(f, y);
        if !self.under_t1(f, y) && Some(y) != self.t2 {
            let t1 = self.t1.expect("root");
            self.vs.record(f, t1, y);
        }
    }

    /// Takes a rank-`q` tree from below `t1` for a refill, making sure the
    /// decrement did not reshape any parent the reduction is about to edit.
    fn acquire(&mut self, f: &mut Forest<T>, q: usize, parents: &[NodeId], touched: &[NodeId]) -> Acquire {
        if q >= self.c1.len() {
            return Acquire::Infeasible;
        }
        let shape = |f: &Forest<T>, p: NodeId| -> Shape {
            let a = f.last_child(p);
            let b = a.and_then(|a| f.left(a));
            let c = b.and_then(|b| f.left(b));
            (f.rank(p), a, b, c)
        };
        let before: ArrayVec<Shape, 3> = parents.iter().map(|&p| shape(f, p)).collect();
        let y = self.counter_op(f, Side::One, CounterOp::Dec(q)).expect("tree");
        let moved = touched.contains(&y)
            || parents.iter().zip(&before).any(|(&p, b)| shape(f, p) != *b);
        if moved {
            self.add_below_t1(f, y);
            self.retries += 1;
            return Acquire::Retry;
        }
        Acquire::Got(y)
    }

    /// Removes `xa` from `pa` and puts `sb` among `pa`'s children in rank
    /// order. Returns false, leaving `sb` alone, if `pa` already has three
    /// children of its rank. A neighbour of `xa` left alone is cut off.
    fn graft(&mut self, f: &mut Forest<T>, pa: NodeId, xa: NodeId, sb: NodeId, out: &mut Pieces) -> bool {
        let old_rank = f.rank(pa);
        let l = f.left(xa);
        f.cut(xa);
        let q = f.rank(sb);
        let mut at = f.last_child(pa);
        let mut succ = None;
        while let Some(c) = at {
            if f.rank(c) <= q {
                break;
            }
            succ = Some(c);
            at = f.left(c);
        }
        let mut same = 0;
        let mut z = at;
        while let Some(c) = z {
            if f.rank(c) != q {
                break;
            }
            same += 1;
            z = f.left(c);
        }
        let placed = same < 3;
        if placed {
            match (at, succ) {
                (Some(a), _) => f.insert_after(a, sb),
                (None, Some(s)) => f.insert_before(s, sb),
                (None, None) => f.push_last(pa, sb),
            }
        }
        if let Some(l) = l {
            if f.lonely(l, f.left(l), f.next_sibling(l)) {
                debug_assert!(!f.is_last(l));
                self.vs.delist(f, l);
                f.cut(l);
                out.push(l);
            }
        }
        debug_assert_eq!(f.last_child(pa).map_or(0, |c| f.rank(c) + 1), old_rank);
        placed
    }

    /// Cases 2 and 3(a): `a` keeps its parent, which takes over `b`'s
    /// sibling; `b`'s parent is rebuilt and refilled.
    fn swap_sibling(&mut self, f: &mut Forest<T>, a: Leg, b: Leg) -> Option<bool> {
        let q = f.rank(b.p);
        let touched = [a.x, b.x, a.p, b.p, a.s(), b.s()];
        let y = match self.acquire(f, q, &[a.p, b.p], &touched) {
            Acquire::Got(y) => y,
            Acquire::Infeasible => return None,
            Acquire::Retry => return Some(false),
        };
        let mut pieces = Pieces::new();
        self.vs.delist(f, a.x);
        self.vs.delist(f, b.x);
        f.cut(b.x);
        f.cut(b.s());
        pieces.push(a.x);
        pieces.push(b.x);
        if !self.graft(f, a.p, a.x, b.s(), &mut pieces) {
            self.vs.delist(f, b.s());
            pieces.push(b.s());
        }
        self.fill(f, b.p, y, true);
        self.strip(f, b.p, &mut pieces);
        self.add_all(f, pieces);
        Some(true)
    }

    /// Case 3(b): `a.s` (rank r+1) replaces `b.p`; `a.p` is rebuilt and
    /// refilled with a tree of rank r+2.
    fn lift_sibling(&mut self, f: &mut Forest<T>, a: Leg, b: Leg) -> Option<bool> {
        let q = f.rank(a.p);
        let touched = [a.x, b.x, a.p, b.p, a.s(), b.s()];
        let y = match self.acquire(f, q, &[a.p, b.p], &touched) {
            Acquire::Got(y) => y,
            Acquire::Infeasible => return None,
            Acquire::Retry => return Some(false),
        };
        let mut pieces = Pieces::new();
        let bp_listed = f.n(b.p).vprev.is_some();
        self.vs.delist(f, a.x);
        self.vs.delist(f, b.x);
        f.cut(a.x);
        f.cut(b.x);
        f.cut(a.s());
        pieces.push(a.x);
        pieces.push(b.x);
        self.fill(f, b.p, a.s(), bp_listed);
        self.strip(f, b.p, &mut pieces);
        self.fill(f, a.p, y, true);
        self.strip(f, a.p, &mut pieces);
        self.add_all(f, pieces);
        Some(true)
    }

    /// Cases 4 and 5(a): `a` has the smallest parent. The siblings of `b`
    /// and `c` are joined into `a.x`'s place; `b.x` and `c.x` are joined
    /// into `b.p`'s place, and `c.p`'s place gets a tree from below `t1`.
    fn triple(&mut self, f: &mut Forest<T>, a: Leg, b: Leg, c: Leg) -> Option<bool> {
        let q = f.rank(c.p);
        let touched = [a.x, b.x, c.x, a.p, b.p, c.p, a.s(), b.s(), c.s()];
        let y = match self.acquire(f, q, &[a.p, b.p, c.p], &touched) {
            Acquire::Got(y) => y,
            Acquire::Infeasible => return None,
            Acquire::Retry => return Some(false),
        };
        let mut pieces = Pieces::new();
        for x in [a.x, b.x, c.x] {
            self.vs.delist(f, x);
        }
        f.cut(b.x);
        f.cut(c.x);
        let (sb, sc) = (b.s(), c.s());
        let listed = f.n(sb).vprev.is_some() || f.n(sc).vprev.is_some();
        self.vs.delist(f, sb);
        self.vs.delist(f, sc);
        f.cut(sb);
        f.cut(sc);
        let w = f.join(sb, sc);
        f.replace(a.x, w);
        if listed {
            self.mark_violating(f, w);
        }
        pieces.push(a.x);
        let v = f.join(b.x, c.x);
        self.fill(f, b.p, v, true);
        self.strip(f, b.p, &mut pieces);
        self.fill(f, c.p, y, true);
        self.strip(f, c.p, &mut pieces);
        self.add_all(f, pieces);
        Some(true)
    }

    /// Two violations are the last two children of one parent.
    fn shared(&mut self, f: &mut Forest<T>, a: Leg, b: Leg) -> Option<Reduction> {
        let p = a.p;
        let touched = [a.x, b.x, p];
        let y = match self.acquire(f, f.rank(p), &[p], &touched) {
            Acquire::Got(y) => y,
            Acquire::Infeasible => return None,
            Acquire::Retry => return Some(Reduction::Retry),
        };
        let mut pieces = Pieces::new();
        for x in [a.x, b.x] {
            self.vs.delist(f, x);
            f.cut(x);
            pieces.push(x);
        }
        self.fill(f, p, y, true);
        self.strip(f, p, &mut pieces);
        self.add_all(f, pieces);
        Some(Reduction::Shared)
    }

    /// `a`'s sibling is `b`'s parent: both parents are rebuilt and `a.p`
    /// is refilled.
    fn nested(&mut self, f: &mut Forest<T>, a: Leg, b: Leg) -> Option<Reduction> {
        let touched = [a.x, b.x, a.p, b.p];
        let y = match self.acquire(f, f.rank(a.p), &[a.p, b.p], &touched) {
            Acquire::Got(y) => y,
            Acquire::Infeasible => return None,
            Acquire::Retry => return Some(Reduction::Retry),
        };
        let mut pieces = Pieces::new();
        for x in [a.x, b.x] {
            self.vs.delist(f, x);
            f.cut(x);
            pieces.push(x);
        }
        f.cut(b.p);
        self.strip(f, b.p, &mut pieces);
        self.fill(f, a.p, y, true);
        self.strip(f, a.p, &mut pieces);
        self.add_all(f, pieces);
        Some(Reduction::Nested)
    }

    /// A rank-0 violation that is its parent's only child. If it is in fact
    /// no smaller than the parent it is simply dropped; otherwise the two
    /// trade places, moving the violation up one rank.
    fn lone(&mut self, f: &mut Forest<T>, l: Leg) -> Option<Reduction> {
        let (x, p) = (l.x, l.p);
        if Some(p) == self.t2 || Some(p) == self.t1 {
            return None;
        }
        self.vs.delist(f, x);
        if f.le(p, x) {
            return Some(Reduction::Lone);
        }
        self.vs.delist(f, p);
        let tag = f.n(p).slot_tag;
        if tag == self.c1_tag {
            assert!(self.c1.retarget(f.rank(p), p, x));
        } else if self.under_t2(f, p) {
            assert!(self.c2.retarget(f.rank(p), p, x));
        }
        f.swap(x, p);
        // Each list stays with its guard; p is larger than x's members may be.
        f.swap_lists(x, p);
        self.mark_violating(f, x);
        Some(Reduction::Lone)
    }
}

fn leg<T: Ord>(f: &Forest<T>, x: NodeId) -> Leg {
    if f.is_last(x) {
        Leg { x, s: f.left(x), p: f.n(x).right.expect("parent") }
    } else {
        let s = f.next_sibling(x).expect("second-last child");
        debug_assert!(f.is_last(s), "{x} is neither last nor second-last");
        Leg { x, s: Some(s), p: f.n(s).right.expect("parent") }
    }
}
