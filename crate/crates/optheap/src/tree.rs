//! Nodes, multi-way trees and the rank rules.
//!
//! Nodes live in an arena owned by [`Forest`]; a [`NodeId`] is a stable
//! handle. Children are kept in non-decreasing rank order. A node's `right`
//! link is its right sibling, or its parent when it is the last child, so
//! parents are reachable in O(1) only from last children.
//!
//! Rank rules, for every node: its rank is one more than the rank of its
//! last child (zero when childless); at most three children share a rank;
//! children split into groups of consecutive or equal ranks, each with at
//! least two members. The one exception is a lone rank-0 child, which is
//! what joining two single nodes produces.

use std::fmt::{self, Write as _};

use arrayvec::ArrayVec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node<T> {
    pub(crate) elem: T,
    pub(crate) rank: u32,
    pub(crate) left: Option<NodeId>,
    pub(crate) right: Option<NodeId>,
    pub(crate) last_child: Option<NodeId>,
    pub(crate) vhead: Option<NodeId>,
    pub(crate) vprev: Option<NodeId>,
    pub(crate) vnext: Option<NodeId>,
    /// Id of the counter whose slots hold this node, or 0.
    pub(crate) slot_tag: u32,
    /// Id of the violation array this node is active in, or 0.
    pub(crate) active_tag: u32,
    pub(crate) live: bool,
}

/// Instrumentation shared by every queue in a forest.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Meter {
    pub comparisons: u64,
    pub edits: u64,
}

/// Arena of nodes plus the comparison and edit meters.
#[derive(Debug, Clone)]
pub struct Forest<T> {
    pub(crate) nodes: Vec<Node<T>>,
    free: Vec<NodeId>,
    pub(crate) meter: Meter,
    next_tag: u32,
}

impl<T: Ord> Default for Forest<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Ord> Forest<T> {
    pub fn new() -> Self {
        Forest { nodes: Vec::new(), free: Vec::new(), meter: Meter::default(), next_tag: 0 }
    }

    /// Allocates a detached rank-0 node holding `elem`.
    pub fn alloc(&mut self, elem: T) -> NodeId {
        let node = Node {
            elem,
            rank: 0,
            left: None,
            right: None,
            last_child: None,
            vhead: None,
            vprev: None,
            vnext: None,
            slot_tag: 0,
            active_tag: 0,
            live: true,
        };
        match self.free.pop() {
            Some(id) => {
                self.nodes[id.index()] = node;
                id
            }
            None => {
                self.nodes.push(node);
                NodeId(self.nodes.len() as u32 - 1)
            }
        }
    }

    /// Returns a detached node's slot to the arena and hands back its element.
    pub fn release(&mut self, x: NodeId) -> T
    where
        T: Clone,
    {
        assert!(self.is_detached(x), "release of an attached node {x}");
        let n = &mut self.nodes[x.index()];
        n.live = false;
        self.free.push(x);
        n.elem.clone()
    }

    pub fn live_nodes(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    pub fn meter(&self) -> Meter {
        self.meter
    }

    pub(crate) fn fresh_tag(&mut self) -> u32 {
        self.next_tag += 1;
        self.next_tag
    }

    pub(crate) fn n(&self, x: NodeId) -> &Node<T> {
        let n = &self.nodes[x.index()];
        debug_assert!(n.live, "stale handle {x}");
        n
    }

    pub(crate) fn nm(&mut self, x: NodeId) -> &mut Node<T> {
        &mut self.nodes[x.index()]
    }

    pub fn element(&self, x: NodeId) -> &T {
        &self.n(x).elem
    }

    pub(crate) fn set_elem(&mut self, x: NodeId, v: T) {
        self.nm(x).elem = v;
    }

    pub fn rank(&self, x: NodeId) -> usize {
        self.n(x).rank as usize
    }

    pub(crate) fn set_rank(&mut self, x: NodeId, r: usize) {
        self.meter.edits += 1;
        self.nm(x).rank = r as u32;
    }

    /// `a <= b`, counted as one element comparison; ties favour `a`.
    pub fn le(&mut self, a: NodeId, b: NodeId) -> bool {
        self.meter.comparisons += 1;
        self.n(a).elem <= self.n(b).elem
    }

    pub fn left(&self, x: NodeId) -> Option<NodeId> {
        self.n(x).left
    }

    pub fn last_child(&self, x: NodeId) -> Option<NodeId> {
        self.n(x).last_child
    }

    pub fn is_detached(&self, x: NodeId) -> bool {
        let n = self.n(x);
        n.left.is_none() && n.right.is_none()
    }

    pub fn is_last(&self, x: NodeId) -> bool {
        self.n(x).right.is_some_and(|r| self.n(r).last_child == Some(x))
    }

    pub fn next_sibling(&self, x: NodeId) -> Option<NodeId> {
        if self.is_last(x) {
            None
        } else {
            self.n(x).right
        }
    }

    /// Parent of `x`, walking right along the sibling list.
    pub fn parent(&self, x: NodeId) -> Option<NodeId> {
        let mut y = x;
        loop {
            let r = self.n(y).right?;
            if self.n(r).last_child == Some(y) {
                return Some(r);
            }
            y = r;
        }
    }

    /// Children from first to last.
    pub fn children(&self, x: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut c = self.n(x).last_child;
        while let Some(y) = c {
            out.push(y);
            c = self.n(y).left;
        }
        out.reverse();
        out
    }

    fn set_left(&mut self, x: NodeId, v: Option<NodeId>) {
        self.meter.edits += 1;
        self.nm(x).left = v;
    }

    fn set_right(&mut self, x: NodeId, v: Option<NodeId>) {
        self.meter.edits += 1;
        self.nm(x).right = v;
    }

    fn set_last(&mut self, x: NodeId, v: Option<NodeId>) {
        self.meter.edits += 1;
        self.nm(x).last_child = v;
    }

    /// Unlinks `x` from its sibling list. Ranks are left untouched.
    pub(crate) fn cut(&mut self, x: NodeId) {
        let (l, r) = (self.n(x).left, self.n(x).right);
        let Some(r) = r else { return };
        if self.n(r).last_child == Some(x) {
            self.set_last(r, l);
            if let Some(l) = l {
                self.set_right(l, Some(r));
            }
        } else {
            self.set_left(r, l);
            if let Some(l) = l {
                self.set_right(l, Some(r));
            }
        }
        self.set_left(x, None);
        self.set_right(x, None);
    }

    /// Links detached `x` as the new last child of `p`.
    pub(crate) fn push_last(&mut self, p: NodeId, x: NodeId) {
        let l = self.n(p).last_child;
        self.set_left(x, l);
        self.set_right(x, Some(p));
        if let Some(l) = l {
            self.set_right(l, Some(x));
        }
        self.set_last(p, Some(x));
    }

    pub(crate) fn insert_after(&mut self, s: NodeId, x: NodeId) {
        let r = self.n(s).right.expect("sibling list");
        if self.n(r).last_child == Some(s) {
            self.push_last(r, x);
        } else {
            self.set_left(x, Some(s));
            self.set_right(x, Some(r));
            self.set_left(r, Some(x));
            self.set_right(s, Some(x));
        }
    }

    pub(crate) fn insert_before(&mut self, s: NodeId, x: NodeId) {
        let l = self.n(s).left;
        self.set_left(x, l);
        self.set_right(x, Some(s));
        self.set_left(s, Some(x));
        if let Some(l) = l {
            self.set_right(l, Some(x));
        }
    }

    /// Puts detached `new` into the sibling position of `old`, detaching `old`.
    pub(crate) fn replace(&mut self, old: NodeId, new: NodeId) {
        let (l, r) = (self.n(old).left, self.n(old).right);
        self.set_left(new, l);
        self.set_right(new, r);
        if let Some(l) = l {
            self.set_right(l, Some(new));
        }
        if let Some(r) = r {
            if self.n(r).last_child == Some(old) {
                self.set_last(r, Some(new));
            } else {
                self.set_left(r, Some(new));
            }
        }
        self.set_left(old, None);
        self.set_right(old, None);
    }

    /// Moves every child of `src` under the childless `dst`, with the rank.
    pub(crate) fn adopt(&mut self, dst: NodeId, src: NodeId) {
        debug_assert!(self.n(dst).last_child.is_none());
        let Some(c) = self.n(src).last_child else { return };
        self.set_right(c, Some(dst));
        self.set_last(dst, Some(c));
        self.set_last(src, None);
        let r = self.rank(src);
        self.set_rank(dst, r);
        self.set_rank(src, 0);
    }

    /// Recomputes the rank of `x` from its last child.
    pub(crate) fn refresh_rank(&mut self, x: NodeId) {
        let r = self.n(x).last_child.map_or(0, |c| self.rank(c) + 1);
        if r != self.rank(x) {
            self.set_rank(x, r);
        }
    }

    /// Joins two detached trees of equal rank. Exactly one comparison.
    pub fn join(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.rank(a), self.rank(b), "join of unequal ranks");
        let (w, l) = if self.le(a, b) { (a, b) } else { (b, a) };
        self.push_last(w, l);
        let r = self.rank(w) + 1;
        self.set_rank(w, r);
        w
    }

    /// Whether `y`, with the given neighbours, would form a group on its own.
    pub(crate) fn lonely(&self, y: NodeId, prev: Option<NodeId>, next: Option<NodeId>) -> bool {
        let r = self.rank(y);
        let near = |z: Option<NodeId>| z.is_some_and(|z| self.rank(z).abs_diff(r) <= 1);
        if near(prev) || near(next) {
            return false;
        }
        !(prev.is_none() && next.is_none() && r == 0)
    }

    /// Splits a detached tree: detaches its last subtree and, if the last
    /// group is left with one member, that member as well. No comparisons.
    pub fn split(&mut self, a: NodeId) -> (NodeId, Option<NodeId>) {
        let c = self.n(a).last_child.expect("split of a rank-0 node");
        self.cut(c);
        let mut single = None;
        if let Some(l) = self.n(a).last_child {
            if self.lonely(l, self.n(l).left, None) {
                self.cut(l);
                single = Some(l);
            }
        }
        self.refresh_rank(a);
        (c, single)
    }

    /// Nodes to detach for `x` to leave its parent without changing the
    /// parent's rank: `x` itself plus any sibling left alone in its group.
    /// `None` if that would disturb the parent's last group.
    pub fn case1_plan(&self, x: NodeId) -> Option<ArrayVec<NodeId, 3>> {
        let mut plan = ArrayVec::new();
        plan.push(x);
        let l = self.n(x).left;
        let Some(r) = self.next_sibling(x) else {
            let l = l?;
            if self.rank(l) != self.rank(x) || self.lonely(l, self.n(l).left, None) {
                return None;
            }
            return Some(plan);
        };
        let rr = self.next_sibling(r);
        let mut keep_l = l;
        let mut keep_r = true;
        for _ in 0..2 {
            if let Some(y) = keep_l {
                let next = if keep_r { Some(r) } else { rr };
                if self.lonely(y, self.n(y).left, next) {
                    plan.push(y);
                    keep_l = self.n(y).left;
                }
            }
            if keep_r && self.lonely(r, keep_l, rr) {
                if rr.is_none() {
                    return None;
                }
                plan.push(r);
                keep_r = false;
            }
        }
        Some(plan)
    }

    /// Exchanges the structural positions of `x` and `y`. Elements, handles
    /// and membership in violation lists stay with the nodes; the list a node
    /// guards moves with its position.
    pub fn swap(&mut self, x: NodeId, y: NodeId) {
        if x == y {
            return;
        }
        let s = |z: Option<NodeId>| {
            z.map(|z| if z == x { y } else if z == y { x } else { z })
        };
        let pos = |f: &Self, z: NodeId| {
            let n = f.n(z);
            (n.left, n.right, n.last_child, n.rank, n.vhead, n.slot_tag, f.is_last(z))
        };
        let px = pos(self, x);
        let py = pos(self, y);
        for (z, p) in [(x, py), (y, px)] {
            let (l, r, c, rank, vh, tag, _) = p;
            let n = self.nm(z);
            n.left = s(l);
            n.right = s(r);
            n.last_child = s(c);
            n.rank = rank;
            n.vhead = vh;
            n.slot_tag = tag;
        }
        for (z, p) in [(x, py), (y, px)] {
            let is_last = p.6;
            let (l, r, c, vh) = (self.n(z).left, self.n(z).right, self.n(z).last_child, self.n(z).vhead);
            if let Some(l) = l {
                self.nm(l).right = Some(z);
            }
            if let Some(r) = r {
                if is_last {
                    self.nm(r).last_child = Some(z);
                } else {
                    self.nm(r).left = Some(z);
                }
            }
            if let Some(c) = c {
                self.nm(c).right = Some(z);
            }
            if let Some(h) = vh {
                self.nm(h).vprev = Some(z);
            }
        }
        self.meter.edits += 12;
    }

    /// Exchanges the violation lists guarded by `x` and `y`.
    pub(crate) fn swap_lists(&mut self, x: NodeId, y: NodeId) {
        let (hx, hy) = (self.n(x).vhead, self.n(y).vhead);
        self.nm(x).vhead = hy;
        self.nm(y).vhead = hx;
        if let Some(h) = hy {
            self.nm(h).vprev = Some(x);
        }
        if let Some(h) = hx {
            self.nm(h).vprev = Some(y);
        }
    }

    /// Whether `x` is on some violation list.
    pub fn is_listed(&self, x: NodeId) -> bool {
        self.n(x).vprev.is_some()
    }

    /// Parenthesised dump: `(<element>:<rank> child child ...)`.
    pub fn dump(&self, x: NodeId) -> String
    where
        T: fmt::Display,
    {
        let mut s = String::new();
        self.dump_into(x, &mut s);
        s
    }

    fn dump_into(&self, x: NodeId, s: &mut String)
    where
        T: fmt::Display,
    {
        let _ = write!(s, "({}:{}", self.n(x).elem, self.rank(x));
        for c in self.children(x) {
            s.push(' ');
            self.dump_into(c, s);
        }
        s.push(')');
    }

    /// Number of nodes in the subtree of `x`.
    pub fn subtree_size(&self, x: NodeId) -> usize {
        let mut stack = vec![x];
        let mut n = 0;
        while let Some(y) = stack.pop() {
            n += 1;
            let mut c = self.n(y).last_child;
            while let Some(z) = c {
                stack.push(z);
                c = self.n(z).left;
            }
        }
        n
    }

    /// Rank-rule breaches at `x` itself (not its descendants).
    pub fn node_faults(&self, x: NodeId) -> Vec<String> {
        let mut out = Vec::new();
        let kids = self.children(x);
        let want = kids.last().map_or(0, |&c| self.rank(c) + 1);
        if self.rank(x) != want {
            out.push(format!("{x}: rank {} but last child implies {want}", self.rank(x)));
        }
        for w in kids.windows(2) {
            if self.rank(w[0]) > self.rank(w[1]) {
                out.push(format!("{x}: children out of rank order"));
            }
        }
        for w in kids.windows(4) {
            if self.rank(w[0]) == self.rank(w[3]) {
                out.push(format!("{x}: four children of rank {}", self.rank(w[0])));
            }
        }
        for (k, &c) in kids.iter().enumerate() {
            let prev = k.checked_sub(1).map(|k| kids[k]);
            if self.lonely(c, prev, kids.get(k + 1).copied()) {
                out.push(format!("{x}: child {c} of rank {} is alone in its group", self.rank(c)));
            }
        }
        out
    }
}

/// F_0 = F_1 = 1.
pub fn fib(r: usize) -> u128 {
    let (mut a, mut b) = (1u128, 1u128);
    for _ in 0..r {
        (a, b) = (b, a.saturating_add(b));
    }
    a
}
