//! Violation bookkeeping.
//!
//! A violation is a node that may be smaller than its parent. Every
//! violation sits in exactly one doubly linked list threaded through the
//! nodes' `vprev`/`vnext` fields. The head of a list has its `vprev` pointing
//! at the list's guard, so unlinking never needs to know which list it is.
//!
//! The minimum root guards two lists. Active violations are recorded in a
//! per-rank array and kept rank-consecutive in the active list; violations
//! whose rank does not fit the array yet go to the inactive list, which is
//! the root's own guarded list. Ranks holding three or more active
//! violations are threaded on the reducible list.

use crate::rarray::ResizableArray;
use crate::tree::{Forest, NodeId};

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Entry {
    first: Option<NodeId>,
    count: u32,
    prev: u32,
    next: u32,
}

impl Entry {
    fn empty() -> Self {
        Entry { first: None, count: 0, prev: NIL, next: NIL }
    }
}

#[derive(Debug, Clone)]
pub struct ViolationStructure {
    pub(crate) tag: u32,
    pub(crate) array: ResizableArray<Entry>,
    reducible: u32,
    pub(crate) active_head: Option<NodeId>,
    active_tail: Option<NodeId>,
    active: usize,
}

impl ViolationStructure {
    pub fn new(tag: u32) -> Self {
        ViolationStructure {
            tag,
            array: ResizableArray::new(),
            reducible: NIL,
            active_head: None,
            active_tail: None,
            active: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.array.len()
    }

    pub fn active_count(&self) -> usize {
        self.active
    }

    pub fn count_at(&self, r: usize) -> usize {
        self.array.get(r).map_or(0, |e| e.count as usize)
    }

    pub fn first_at(&self, r: usize) -> Option<NodeId> {
        self.array.get(r).ok().and_then(|e| e.first)
    }

    /// First rank holding at least three active violations.
    pub fn reducible_rank(&self) -> Option<usize> {
        (self.reducible != NIL).then_some(self.reducible as usize)
    }

    pub fn reduction_possible(&self) -> bool {
        self.reducible != NIL
    }

    pub fn reducible_ranks(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut r = self.reducible;
        while r != NIL {
            out.push(r as usize);
            r = self.entry(r as usize).next;
        }
        out
    }

    fn entry(&self, r: usize) -> &Entry {
        self.array.get(r).expect("violation array index")
    }

    fn entry_mut(&mut self, r: usize) -> &mut Entry {
        self.array.get_mut(r).expect("violation array index")
    }

    /// Grows the array by up to `k` entries, never past `max_rank + 1`.
    pub fn extend(&mut self, k: usize, max_rank: usize) {
        for _ in 0..k {
            if self.array.len() > max_rank {
                break;
            }
            self.array.grow(Entry::empty());
        }
    }

    /// Drops up to `k` empty trailing entries beyond `max_rank + 1`.
    pub fn trim(&mut self, k: usize, max_rank: usize) {
        for _ in 0..k {
            let n = self.array.len();
            if n <= max_rank + 1 || self.entry(n - 1).count > 0 {
                break;
            }
            self.array.shrink().expect("nonempty");
        }
    }

    fn link_reducible(&mut self, r: usize) {
        let head = self.reducible;
        {
            let e = self.entry_mut(r);
            e.prev = NIL;
            e.next = head;
        }
        if head != NIL {
            self.entry_mut(head as usize).prev = r as u32;
        }
        self.reducible = r as u32;
    }

    fn unlink_reducible(&mut self, r: usize) {
        let (p, n) = {
            let e = self.entry(r);
            (e.prev, e.next)
        };
        if p == NIL {
            self.reducible = n;
        } else {
            self.entry_mut(p as usize).next = n;
        }
        if n != NIL {
            self.entry_mut(n as usize).prev = p;
        }
        let e = self.entry_mut(r);
        e.prev = NIL;
        e.next = NIL;
    }

    pub fn is_active<T: Ord>(&self, f: &Forest<T>, y: NodeId) -> bool {
        f.n(y).active_tag == self.tag
    }

    pub fn is_listed<T: Ord>(f: &Forest<T>, y: NodeId) -> bool {
        f.n(y).vprev.is_some()
    }

    /// Records `y` as a violation of the root `t1`.
    pub fn record<T: Ord>(&mut self, f: &mut Forest<T>, t1: NodeId, y: NodeId) {
        debug_assert!(!Self::is_listed(f, y), "{y} already listed");
        let r = f.rank(y);
        if r >= self.array.len() {
            push_guarded(f, t1, y);
            return;
        }
        match self.entry(r).first {
            Some(first) => {
                let next = f.n(first).vnext;
                f.nm(y).vprev = Some(first);
                f.nm(y).vnext = next;
                f.nm(first).vnext = Some(y);
                match next {
                    Some(nx) => f.nm(nx).vprev = Some(y),
                    None => self.active_tail = Some(y),
                }
            }
            None => {
                let head = self.active_head;
                f.nm(y).vprev = Some(t1);
                f.nm(y).vnext = head;
                match head {
                    Some(h) => f.nm(h).vprev = Some(y),
                    None => self.active_tail = Some(y),
                }
                self.active_head = Some(y);
                self.entry_mut(r).first = Some(y);
            }
        }
        f.nm(y).active_tag = self.tag;
        self.active += 1;
        let e = self.entry_mut(r);
        e.count += 1;
        if e.count == 3 {
            self.link_reducible(r);
        }
    }

    /// Removes `y` from whatever violation list holds it.
    pub fn delist<T: Ord>(&mut self, f: &mut Forest<T>, y: NodeId) {
        if self.is_active(f, y) {
            let r = f.rank(y);
            self.unfile(f, y, r);
        } else if Self::is_listed(f, y) {
            unlink_guarded(f, y);
        }
    }

    /// Re-files an active violation whose rank just changed from `old`.
    pub fn refile<T: Ord>(&mut self, f: &mut Forest<T>, t1: NodeId, y: NodeId, old: usize) {
        if self.is_active(f, y) {
            self.unfile(f, y, old);
            self.record(f, t1, y);
        }
    }

    fn unfile<T: Ord>(&mut self, f: &mut Forest<T>, y: NodeId, r: usize) {
        let (p, n) = (f.n(y).vprev, f.n(y).vnext);
        if self.entry(r).first == Some(y) {
            let tag = self.tag;
            let same = n.filter(|&n| f.n(n).active_tag == tag && f.rank(n) == r);
            self.entry_mut(r).first = same;
        }
        if self.active_head == Some(y) {
            self.active_head = n;
            if let Some(n) = n {
                f.nm(n).vprev = p;
            }
        } else {
            let p = p.expect("active list link");
            f.nm(p).vnext = n;
            if let Some(n) = n {
                f.nm(n).vprev = Some(p);
            }
        }
        if self.active_tail == Some(y) {
            self.active_tail = if self.active_head.is_none() { None } else { p };
        }
        let node = f.nm(y);
        node.vprev = None;
        node.vnext = None;
        node.active_tag = 0;
        self.active -= 1;
        let e = self.entry_mut(r);
        e.count -= 1;
        if e.count == 2 {
            self.unlink_reducible(r);
        }
    }

    /// Points the active list's head back at a new root.
    pub fn rehome<T: Ord>(&self, f: &mut Forest<T>, t1: NodeId) {
        if let Some(h) = self.active_head {
            f.nm(h).vprev = Some(t1);
        }
    }

    /// Moves the whole active list in front of `t1`'s guarded list and
    /// empties this structure's list. Used when the structure is dismissed.
    pub fn spill<T: Ord>(&mut self, f: &mut Forest<T>, t1: NodeId) {
        let (Some(h), Some(t)) = (self.active_head, self.active_tail) else {
            return;
        };
        let old = f.n(t1).vhead;
        f.nm(t).vnext = old;
        if let Some(o) = old {
            f.nm(o).vprev = Some(t);
        }
        f.nm(h).vprev = Some(t1);
        f.nm(t1).vhead = Some(h);
        self.active_head = None;
        self.active_tail = None;
    }

    /// Active violations from head to tail.
    pub fn active_list<T: Ord>(&self, f: &Forest<T>) -> Vec<NodeId> {
        walk(f, self.active_head)
    }
}

/// Pushes `y` onto the front of the list guarded by `g`.
pub fn push_guarded<T: Ord>(f: &mut Forest<T>, g: NodeId, y: NodeId) {
    let head = f.n(g).vhead;
    f.nm(y).vprev = Some(g);
    f.nm(y).vnext = head;
    if let Some(h) = head {
        f.nm(h).vprev = Some(y);
    }
    f.nm(g).vhead = Some(y);
}

fn unlink_guarded<T: Ord>(f: &mut Forest<T>, y: NodeId) {
    let (p, n) = (f.n(y).vprev.expect("listed"), f.n(y).vnext);
    if f.n(p).vhead == Some(y) {
        f.nm(p).vhead = n;
        if let Some(n) = n {
            f.nm(n).vprev = Some(p);
        }
    } else {
        f.nm(p).vnext = n;
        if let Some(n) = n {
            f.nm(n).vprev = Some(p);
        }
    }
    let node = f.nm(y);
    node.vprev = None;
    node.vnext = None;
}

/// Nodes of the list starting at `head`.
pub fn walk<T: Ord>(f: &Forest<T>, head: Option<NodeId>) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut c = head;
    while let Some(y) = c {
        out.push(y);
        c = f.n(y).vnext;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(size: usize) -> (Forest<i64>, NodeId, ViolationStructure) {
        let mut f = Forest::new();
        let t1 = f.alloc(0);
        let mut vs = ViolationStructure::new(f.fresh_tag());
        vs.extend(size, size);
        (f, t1, vs)
    }

    /// A detached node of the given rank (rank set directly; no children).
    fn ranked(f: &mut Forest<i64>, key: i64, r: usize) -> NodeId {
        let x = f.alloc(key);
        f.nm(x).rank = r as u32;
        x
    }

    #[test]
    fn active_runs_stay_consecutive() {
        let (mut f, t1, mut vs) = setup(4);
        let ranks = [1, 3, 1, 2, 3, 1];
        let ys: Vec<NodeId> = ranks.iter().enumerate().map(|(i, &r)| ranked(&mut f, i as i64 + 1, r)).collect();
        for &y in &ys {
            vs.record(&mut f, t1, y);
        }
        let order: Vec<usize> = vs.active_list(&f).iter().map(|&y| f.rank(y)).collect();
        let mut seen = Vec::new();
        for r in order {
            if seen.last() != Some(&r) {
                assert!(!seen.contains(&r), "rank {r} split in two runs");
                seen.push(r);
            }
        }
        assert_eq!((vs.count_at(1), vs.count_at(2), vs.count_at(3)), (3, 1, 2));
        assert_eq!(vs.reducible_ranks(), vec![1]);
        assert_eq!(vs.active_count(), 6);
    }

    #[test]
    fn reducible_list_follows_counts() {
        let (mut f, t1, mut vs) = setup(3);
        let ys: Vec<NodeId> = (0..3).map(|i| ranked(&mut f, i + 1, 2)).collect();
        for &y in &ys {
            vs.record(&mut f, t1, y);
        }
        assert_eq!(vs.reducible_rank(), Some(2));
        vs.delist(&mut f, ys[1]);
        assert!(!vs.reduction_possible());
        assert_eq!(vs.count_at(2), 2);
        assert!(!ViolationStructure::is_listed(&f, ys[1]));
    }

    #[test]
    fn rank_beyond_array_goes_inactive() {
        let (mut f, t1, mut vs) = setup(2);
        let y = ranked(&mut f, 5, 4);
        vs.record(&mut f, t1, y);
        assert_eq!(vs.active_count(), 0);
        assert_eq!(walk(&f, f.n(t1).vhead), vec![y]);
        assert_eq!(f.n(y).vprev, Some(t1));
        vs.delist(&mut f, y);
        assert_eq!(f.n(t1).vhead, None);
    }

    #[test]
    fn delisting_the_head_repoints_the_next() {
        let (mut f, t1, mut vs) = setup(3);
        let a = ranked(&mut f, 1, 0);
        let b = ranked(&mut f, 2, 1);
        vs.record(&mut f, t1, a);
        vs.record(&mut f, t1, b);
        let head = vs.active_list(&f)[0];
        vs.delist(&mut f, head);
        let rest = vs.active_list(&f);
        assert_eq!(rest.len(), 1);
        assert_eq!(f.n(rest[0]).vprev, Some(t1));
    }

    #[test]
    fn refile_moves_between_ranks() {
        let (mut f, t1, mut vs) = setup(4);
        let y = ranked(&mut f, 1, 1);
        vs.record(&mut f, t1, y);
        f.nm(y).rank = 3;
        vs.refile(&mut f, t1, y, 1);
        assert_eq!((vs.count_at(1), vs.count_at(3)), (0, 1));
        assert_eq!(vs.first_at(3), Some(y));
    }

    #[test]
    fn spill_hands_active_list_to_guard() {
        let (mut f, t1, mut vs) = setup(3);
        let old = ranked(&mut f, 9, 5);
        push_guarded(&mut f, t1, old);
        let ys: Vec<NodeId> = (0..3).map(|i| ranked(&mut f, i + 1, i as usize)).collect();
        for &y in &ys {
            vs.record(&mut f, t1, y);
        }
        vs.spill(&mut f, t1);
        let list = walk(&f, f.n(t1).vhead);
        assert_eq!(list.len(), 4);
        assert_eq!(list.last(), Some(&old));
        assert_eq!(f.n(list[0]).vprev, Some(t1));
        assert!(vs.active_list(&f).is_empty());
    }

    #[test]
    fn extend_and_trim_respect_rank_cap() {
        let (_, _, mut vs) = setup(0);
        vs.extend(10, 3);
        assert_eq!(vs.size(), 4);
        vs.trim(10, 1);
        assert_eq!(vs.size(), 2);
    }
}
