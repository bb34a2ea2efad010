//! Verification plumbing: whole-structure validator, sorted-multiset oracle,
//! trace files, a lockstep runner, trace generators and cost summaries.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::counter::Counter;
use crate::queue::{Config, OpStats, PriorityQueue, QueueError};
use crate::tree::{fib, Forest, NodeId};
use crate::violations::walk;

// ---------------------------------------------------------------- validator

/// Multiplier in the rank bound `max rank <= ceil(1.44 lg n)`.
pub const RANK_FACTOR: f64 = 1.44;

/// Invariant breaches found by [`validate`]; empty when healthy.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Report {
    pub faults: Vec<String>,
    pub max_rank: usize,
    pub max_children: usize,
    pub longest_list: usize,
}

impl Report {
    pub fn healthy(&self) -> bool {
        self.faults.is_empty()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.faults.is_empty() {
            return write!(f, "healthy");
        }
        for (i, s) in self.faults.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// ceil(1.44 lg n), with n = 0 or 1 giving 0.
pub fn rank_bound(n: usize) -> usize {
    if n <= 1 {
        return 0;
    }
    (RANK_FACTOR * (n as f64).log2()).ceil() as usize
}

/// Longest violation list a node may guard in a queue of `n` elements.
pub fn list_bound(n: usize) -> usize {
    8 * (rank_bound(n) + 1)
}

/// Full O(n) scan of every structural invariant.
pub fn validate<T: Ord + Clone>(q: &PriorityQueue<T>, f: &Forest<T>) -> Report {
    let mut rep = Report::default();
    let mut out: Vec<String> = Vec::new();
    let Some(t1) = q.t1 else {
        if q.len() != 0 {
            out.push(format!("size {} but no root", q.len()));
        }
        if q.t2.is_some() {
            out.push("t2 without t1".into());
        }
        rep.faults = out;
        return rep;
    };
    let n = q.len();

    // Collect nodes, parents and roots.
    let mut order: Vec<(NodeId, Option<NodeId>)> = Vec::new();
    let mut stack = vec![(t1, None)];
    if let Some(t2) = q.t2 {
        stack.push((t2, None));
    }
    while let Some((x, p)) = stack.pop() {
        order.push((x, p));
        if order.len() > n + 1 {
            break;
        }
        for c in f.children(x) {
            stack.push((c, Some(x)));
        }
    }
    if order.len() != n {
        out.push(format!("size {n} but {} nodes reachable", order.len()));
    }
    if !f.is_detached(t1) {
        out.push(format!("root {t1} has sibling links"));
    }

    // Rank rules, order and sizes.
    let mut max_rank = 0;
    let mut max_children = 0;
    let min = f.element(t1);
    for &(x, p) in &order {
        let r = f.rank(x);
        max_rank = max_rank.max(r);
        let kids = f.children(x).len();
        max_children = max_children.max(kids);
        if (f.subtree_size(x) as u128) < fib(r) {
            out.push(format!("{x}: rank {r} subtree smaller than F_{r}"));
        }
        if f.element(x) < min {
            out.push(format!("{x} is smaller than t1"));
        }
        match p {
            Some(p) => {
                if Some(p) != q.t1 && Some(p) != q.t2 {
                    out.extend(f.node_faults(x));
                }
                if f.element(x) < f.element(p) && f.n(x).vprev.is_none() {
                    out.push(format!("{x} is smaller than its parent {p} but not recorded"));
                }
                if f.n(x).vprev.is_some() && (Some(p) == q.t1) {
                    out.push(format!("{x} is a child of t1 but recorded as violating"));
                }
            }
            None => {
                if f.n(x).vprev.is_some() {
                    out.push(format!("root {x} recorded as violating"));
                }
            }
        }
    }
    if max_rank > rank_bound(n).max(1) {
        out.push(format!("max rank {max_rank} exceeds ceil(1.44 lg {n}) = {}", rank_bound(n)));
    }
    if max_children > 2 * max_rank.max(1) {
        out.push(format!("a node has {max_children} children, more than 2 x max rank {max_rank}"));
    }
    rep.max_rank = max_rank;
    rep.max_children = max_children;

    // Roots against their counters.
    let roots = [(Some(t1), &q.c1, q.c1_tag, "t1"), (q.t2, &q.c2, q.c2_tag, "t2")];
    for (root, c, tag, name) in roots {
        let Some(root) = root else {
            if !c.is_empty() {
                out.push(format!("{name} absent but its counter holds {:?}", c.digits()));
            }
            continue;
        };
        if !c.is_regular() {
            out.push(format!("{name} counter {:?} is not regular", c.digits()));
        }
        if !c.blocks_linked() {
            out.push(format!("{name} counter {:?} has stale forward links", c.digits()));
        }
        if f.rank(root) != c.len() {
            out.push(format!("{name} rank {} but counter length {}", f.rank(root), c.len()));
        }
        let kids = f.children(root);
        let mut held: Vec<NodeId> = c.iter_trees().map(|(_, t)| t).collect();
        for (i, t) in c.iter_trees() {
            if f.rank(t) != i {
                out.push(format!("{name} slot {i} holds {t} of rank {}", f.rank(t)));
            }
        }
        let mut k2 = kids.clone();
        held.sort();
        k2.sort();
        if held != k2 {
            out.push(format!("{name} counter does not mirror its children"));
        }
        for w in kids.windows(2) {
            if f.rank(w[0]) > f.rank(w[1]) {
                out.push(format!("{name} children out of rank order"));
            }
        }
        for &k in &kids {
            if f.n(k).slot_tag != tag {
                out.push(format!("{name} child {k} carries a foreign slot tag"));
            }
        }
    }
    if let Some(t2) = q.t2 {
        if f.rank(t1) >= f.rank(t2) {
            out.push(format!("rank(t1) = {} is not below rank(t2) = {}", f.rank(t1), f.rank(t2)));
        }
    }

    // Violation lists.
    let vs = &q.vs;
    let active = vs.active_list(f);
    if active.len() != vs.active_count() {
        out.push(format!("active list has {} nodes, count says {}", active.len(), vs.active_count()));
    }
    let mut per_rank: BTreeMap<usize, usize> = BTreeMap::new();
    let mut seen_ranks: Vec<usize> = Vec::new();
    for (i, &y) in active.iter().enumerate() {
        let r = f.rank(y);
        *per_rank.entry(r).or_default() += 1;
        if seen_ranks.last() != Some(&r) {
            if seen_ranks.contains(&r) {
                out.push(format!("active violations of rank {r} are not consecutive"));
            }
            seen_ranks.push(r);
            if vs.first_at(r) != Some(y) {
                out.push(format!("array entry {r} does not point at the first of its run"));
            }
        }
        if f.n(y).active_tag != vs.tag {
            out.push(format!("{y} on the active list without the active tag"));
        }
        if r >= vs.size() {
            out.push(format!("{y} active at rank {r} beyond array size {}", vs.size()));
        }
        let want = if i == 0 { Some(t1) } else { Some(active[i - 1]) };
        if f.n(y).vprev != want {
            out.push(format!("{y} has a broken back link in the active list"));
        }
    }
    for r in 0..vs.size() {
        let c = per_rank.get(&r).copied().unwrap_or(0);
        if vs.count_at(r) != c {
            out.push(format!("array entry {r} counts {} but {c} are listed", vs.count_at(r)));
        }
    }
    let mut red = vs.reducible_ranks();
    red.sort();
    let want: Vec<usize> = per_rank.iter().filter(|(_, &c)| c >= 3).map(|(&r, _)| r).collect();
    if red != want {
        out.push(format!("reducible ranks {red:?}, expected {want:?}"));
    }
    let mut in_t1_lists: BTreeSet<NodeId> = active.iter().copied().collect();
    let mut longest = active.len();
    for &(x, _) in &order {
        let list = walk(f, f.n(x).vhead);
        longest = longest.max(list.len());
        if let Some(&h) = list.first() {
            if f.n(h).vprev != Some(x) {
                out.push(format!("head of {x}'s list does not point back at it"));
            }
        }
        for &y in &list {
            if f.element(y) < f.element(x) {
                out.push(format!("{x} guards the smaller {y}"));
            }
            if Some(y) == q.t1 || Some(y) == q.t2 {
                out.push(format!("root {y} is on a violation list"));
            }
            if x == t1 {
                in_t1_lists.insert(y);
            }
        }
    }
    if longest > list_bound(n) {
        out.push(format!("a violation list holds {longest} nodes, bound {}", list_bound(n)));
    }
    rep.longest_list = longest;

    // Second-smallest element sits at t2, below t1, or on t1's lists.
    if n >= 2 {
        let second = order.iter().filter(|&&(x, _)| x != t1).map(|&(x, _)| f.element(x)).min();
        if let Some(second) = second {
            let ok = order.iter().any(|&(x, p)| {
                f.element(x) == second
                    && (Some(x) == q.t2 || p == Some(t1) || in_t1_lists.contains(&x))
            });
            if !ok {
                out.push("second-smallest element is not a candidate of t1".into());
            }
        }
    }
    rep.faults = out;
    rep
}

/// At most two active violations per rank; expected right after a delete-min.
pub fn active_sparse<T: Ord>(q: &PriorityQueue<T>) -> Option<String> {
    let vs = &q.vs;
    (0..vs.size())
        .find(|&r| vs.count_at(r) > 2)
        .map(|r| format!("{} active violations of rank {r} after delete-min", vs.count_at(r)))
}

// ------------------------------------------------------------------- traces

/// One line of a trace file. Nodes are named by insertion sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    New(u32),
    Insert(u32, i64),
    DeleteMin(u32),
    Decrease(u32, u64, i64),
    Delete(u32, u64),
    Meld(u32, u32, u32),
    Destroy(u32),
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Op::New(q) => write!(f, "new {q}"),
            Op::Insert(q, k) => write!(f, "insert {q} {k}"),
            Op::DeleteMin(q) => write!(f, "deletemin {q}"),
            Op::Decrease(q, s, k) => write!(f, "decrease {q} {s} {k}"),
            Op::Delete(q, s) => write!(f, "delete {q} {s}"),
            Op::Meld(a, b, c) => write!(f, "meld {a} {b} -> {c}"),
            Op::Destroy(q) => write!(f, "destroy {q}"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

/// Parses a trace; blank lines and `#` comments are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<Op>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| ParseError { line: i + 1, msg };
        let w: Vec<&str> = line.split_whitespace().collect();
        let num = |k: usize| -> Result<i64, ParseError> {
            let s = w.get(k).ok_or_else(|| err(format!("`{}` needs more fields", w[0])))?;
            s.parse::<i64>().map_err(|e| err(format!("bad number `{s}`: {e}")))
        };
        let id = |k: usize| -> Result<u32, ParseError> {
            let v = num(k)?;
            u32::try_from(v).map_err(|_| err(format!("bad queue id {v}")))
        };
        let seq = |k: usize| -> Result<u64, ParseError> {
            let v = num(k)?;
            u64::try_from(v).map_err(|_| err(format!("bad node number {v}")))
        };
        let (op, arity) = match w[0] {
            "new" => (Op::New(id(1)?), 2),
            "insert" => (Op::Insert(id(1)?, num(2)?), 3),
            "deletemin" => (Op::DeleteMin(id(1)?), 2),
            "decrease" => (Op::Decrease(id(1)?, seq(2)?, num(3)?), 4),
            "delete" => (Op::Delete(id(1)?, seq(2)?), 3),
            "meld" => {
                if w.get(3) != Some(&"->") {
                    return Err(err("meld needs `meld <q> <q> -> <q>`".into()));
                }
                (Op::Meld(id(1)?, id(2)?, id(4)?), 5)
            }
            "destroy" => (Op::Destroy(id(1)?), 2),
            other => return Err(err(format!("unknown operation `{other}`"))),
        };
        if w.len() != arity {
            return Err(err(format!("`{}` takes {} fields, got {}", w[0], arity - 1, w.len() - 1)));
        }
        out.push(op);
    }
    Ok(out)
}

pub fn format_trace(ops: &[Op]) -> String {
    let mut s = String::new();
    for op in ops {
        s.push_str(&op.to_string());
        s.push('\n');
    }
    s
}

// ------------------------------------------------------------------- runner

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Insert,
    DeleteMin,
    Decrease,
    Delete,
    Meld,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Insert => "insert",
            OpKind::DeleteMin => "deletemin",
            OpKind::Decrease => "decrease",
            OpKind::Delete => "delete",
            OpKind::Meld => "meld",
        }
    }
}

/// Cost of one executed operation, with the target queue's size before it.
#[derive(Debug, Clone, Copy)]
pub struct Sample {
    pub kind: OpKind,
    pub n: usize,
    pub stats: OpStats,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RunError {
    #[error("queue {0} does not exist")]
    NoQueue(u32),
    #[error("queue {0} already exists")]
    QueueExists(u32),
    #[error("node {0} is not live in queue {1}")]
    NoNode(u64, u32),
    #[error("meld of queue {0} with itself")]
    SelfMeld(u32),
    #[error("queue {q}: got {got:?}, oracle expects {want:?}")]
    Mismatch { q: u32, got: Option<i64>, want: Option<i64> },
    #[error("queue {q}: {err}, but the oracle disagrees")]
    Unexpected { q: u32, err: QueueError },
    #[error("queue {q}: invariant breach\n{report}")]
    Invalid { q: u32, report: String },
}

/// A failed run: which operation, and why.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("op {index} (`{op}`): {err}")]
pub struct Divergence {
    pub index: usize,
    pub op: Op,
    pub err: RunError,
}

/// Executes traces against live queues and a sorted-multiset oracle.
pub struct Runner {
    pub f: Forest<i64>,
    config: Config,
    queues: HashMap<u32, PriorityQueue<i64>>,
    oracle: HashMap<u32, BTreeSet<(i64, u64)>>,
    members: HashMap<u32, Vec<u64>>,
    nodes: Vec<Option<NodeId>>,
    keys: Vec<i64>,
    /// Group label of each element. A meld relabels only the smaller side.
    owner: Vec<u32>,
    label: HashMap<u32, u32>,
    holder: HashMap<u32, u32>,
    next_label: u32,
    pos: Vec<usize>,
    /// Validate the touched queue every this many operations; 0 never.
    pub validate_every: usize,
    /// Record a [`Sample`] per operation.
    pub record: bool,
    pub samples: Vec<Sample>,
    pub executed: usize,
    /// Largest space / size ratio seen on queues of at least 64 elements.
    pub peak_ratio: f64,
}

impl Runner {
    pub fn new(config: Config) -> Self {
        Runner {
            f: Forest::new(),
            config,
            queues: HashMap::new(),
            oracle: HashMap::new(),
            members: HashMap::new(),
            nodes: Vec::new(),
            keys: Vec::new(),
            owner: Vec::new(),
            label: HashMap::new(),
            holder: HashMap::new(),
            next_label: 0,
            pos: Vec::new(),
            validate_every: 0,
            record: false,
            samples: Vec::new(),
            executed: 0,
            peak_ratio: 0.0,
        }
    }

    pub fn queue(&self, q: u32) -> Option<&PriorityQueue<i64>> {
        self.queues.get(&q)
    }

    pub fn queue_ids(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.queues.keys().copied().collect();
        v.sort();
        v
    }

    /// Live node numbers of queue `q`, in no particular order.
    pub fn live(&self, q: u32) -> &[u64] {
        self.members.get(&q).map_or(&[], |v| v.as_slice())
    }

    pub fn key_of(&self, seq: u64) -> i64 {
        self.keys[seq as usize]
    }

    pub fn run(&mut self, ops: &[Op]) -> Result<(), Divergence> {
        for (index, &op) in ops.iter().enumerate() {
            self.step(op).map_err(|err| Divergence { index, op, err })?;
        }
        Ok(())
    }

    /// Validates every live queue now, regardless of `validate_every`.
    pub fn validate_all(&self) -> Result<(), RunError> {
        for q in self.queue_ids() {
            self.audit(q, false)?;
        }
        Ok(())
    }

    fn unlist(&mut self, seq: u64) {
        let q = self.holder[&self.owner[seq as usize]];
        let p = self.pos[seq as usize];
        let v = self.members.get_mut(&q).expect("member list");
        v.swap_remove(p);
        if let Some(&moved) = v.get(p) {
            self.pos[moved as usize] = p;
        }
        self.nodes[seq as usize] = None;
    }

    fn node(&self, q: u32, seq: u64) -> Result<NodeId, RunError> {
        match self.nodes.get(seq as usize) {
            Some(Some(x)) if self.label.get(&q) == Some(&self.owner[seq as usize]) => Ok(*x),
            _ => Err(RunError::NoNode(seq, q)),
        }
    }

    fn after(&mut self, kind: OpKind, n: usize, q: u32) -> Result<(), RunError> {
        self.executed += 1;
        let queue = &self.queues[&q];
        if self.record {
            self.samples.push(Sample { kind, n, stats: queue.last_stats() });
        }
        if queue.len() >= 64 {
            let ratio = queue.space() as f64 / queue.len() as f64;
            self.peak_ratio = self.peak_ratio.max(ratio);
        }
        if self.validate_every == 0 || self.executed % self.validate_every != 0 {
            return Ok(());
        }
        self.audit(q, kind == OpKind::DeleteMin)
    }

    fn audit(&self, q: u32, after_delete_min: bool) -> Result<(), RunError> {
        let queue = &self.queues[&q];
        let mut report = validate(queue, &self.f);
        if after_delete_min {
            report.faults.extend(active_sparse(queue));
        }
        let mut got: Vec<i64> = Vec::new();
        let mut stack: Vec<NodeId> = queue.t1().into_iter().chain(queue.t2()).collect();
        while let Some(x) = stack.pop() {
            got.push(*self.f.element(x));
            stack.extend(self.f.children(x));
        }
        got.sort();
        let want: Vec<i64> = self.oracle[&q].iter().map(|&(k, _)| k).collect();
        if got != want {
            report.faults.push(format!("elements {got:?} differ from the oracle's {want:?}"));
        }
        if report.healthy() {
            Ok(())
        } else {
            Err(RunError::Invalid { q, report: report.to_string() })
        }
    }

    fn check_freed(&self, q: u32, x: NodeId) -> Result<(), RunError> {
        if self.f.is_detached(x) && self.f.last_child(x).is_none() {
            Ok(())
        } else {
            Err(RunError::Invalid { q, report: format!("removed node {x} is still linked") })
        }
    }

    /// Executes one operation in lockstep with the oracle.
    pub fn step(&mut self, op: Op) -> Result<(), RunError> {
        match op {
            Op::New(q) => {
                if self.queues.contains_key(&q) {
                    return Err(RunError::QueueExists(q));
                }
                let queue = PriorityQueue::with_config(&mut self.f, self.config);
                self.queues.insert(q, queue);
                self.oracle.insert(q, BTreeSet::new());
                self.members.insert(q, Vec::new());
                self.label.insert(q, self.next_label);
                self.holder.insert(self.next_label, q);
                self.next_label += 1;
                Ok(())
            }
            Op::Insert(q, k) => {
                let queue = self.queues.get_mut(&q).ok_or(RunError::NoQueue(q))?;
                let n = queue.len();
                let seq = self.nodes.len() as u64;
                let x = self.f.alloc(k);
                queue.insert(&mut self.f, x);
                self.nodes.push(Some(x));
                self.keys.push(k);
                self.owner.push(self.label[&q]);
                let v = self.members.get_mut(&q).expect("member list");
                self.pos.push(v.len());
                v.push(seq);
                self.oracle.get_mut(&q).expect("oracle").insert((k, seq));
                self.after(OpKind::Insert, n, q)
            }
            Op::DeleteMin(q) => {
                let queue = self.queues.get_mut(&q).ok_or(RunError::NoQueue(q))?;
                let n = queue.len();
                let want = self.oracle[&q].first().map(|&(k, _)| k);
                match queue.delete_min(&mut self.f) {
                    Ok(x) => {
                        let got = *self.f.element(x);
                        if Some(got) != want {
                            return Err(RunError::Mismatch { q, got: Some(got), want });
                        }
                        self.check_freed(q, x)?;
                        let seq = self.oracle[&q]
                            .range((got, 0)..=(got, u64::MAX))
                            .map(|&(_, s)| s)
                            .find(|&s| self.nodes[s as usize] == Some(x))
                            .expect("returned node is in the oracle");
                        self.oracle.get_mut(&q).expect("oracle").remove(&(got, seq));
                        self.unlist(seq);
                        self.f.release(x);
                    }
                    Err(QueueError::Empty) if want.is_none() => {}
                    Err(err) => return Err(RunError::Unexpected { q, err }),
                }
                self.after(OpKind::DeleteMin, n, q)
            }
            Op::Decrease(q, seq, k) => {
                if !self.queues.contains_key(&q) {
                    return Err(RunError::NoQueue(q));
                }
                let x = self.node(q, seq)?;
                let old = self.keys[seq as usize];
                let queue = self.queues.get_mut(&q).expect("queue");
                let n = queue.len();
                match queue.decrease(&mut self.f, x, k) {
                    Ok(()) if k <= old => {
                        let o = self.oracle.get_mut(&q).expect("oracle");
                        o.remove(&(old, seq));
                        o.insert((k, seq));
                        self.keys[seq as usize] = k;
                    }
                    Ok(()) => return Err(RunError::Unexpected { q, err: QueueError::NotDecrease }),
                    // Rejected by both sides: a no-op.
                    Err(QueueError::NotDecrease) if k > old => return Ok(()),
                    Err(err) => return Err(RunError::Unexpected { q, err }),
                }
                self.after(OpKind::Decrease, n, q)
            }
            Op::Delete(q, seq) => {
                if !self.queues.contains_key(&q) {
                    return Err(RunError::NoQueue(q));
                }
                let x = self.node(q, seq)?;
                let queue = self.queues.get_mut(&q).expect("queue");
                let n = queue.len();
                queue.delete(&mut self.f, x).map_err(|err| RunError::Unexpected { q, err })?;
                self.check_freed(q, x)?;
                let k = self.keys[seq as usize];
                self.oracle.get_mut(&q).expect("oracle").remove(&(k, seq));
                self.unlist(seq);
                self.f.release(x);
                self.after(OpKind::Delete, n, q)
            }
            Op::Meld(a, b, c) => {
                if a == b {
                    return Err(RunError::SelfMeld(a));
                }
                for id in [a, b] {
                    if !self.queues.contains_key(&id) {
                        return Err(RunError::NoQueue(id));
                    }
                }
                if c != a && c != b && self.queues.contains_key(&c) {
                    return Err(RunError::QueueExists(c));
                }
                let qa = self.queues.remove(&a).expect("queue");
                let qb = self.queues.remove(&b).expect("queue");
                let n = qa.len().max(qb.len());
                let melded = qa.meld(qb, &mut self.f);
                let (oa, ob) = (self.oracle.remove(&a).expect("oracle"), self.oracle.remove(&b).expect("oracle"));
                let (ma, mb) = (self.members.remove(&a).expect("members"), self.members.remove(&b).expect("members"));
                // Small-into-large keeps the oracle's meld cost logarithmic amortized.
                let (la, lb) = (self.label.remove(&a).expect("label"), self.label.remove(&b).expect("label"));
                let ((mut big_o, small_o), (mut big_m, small_m), (big_l, small_l)) = if ma.len() >= mb.len() {
                    ((oa, ob), (ma, mb), (la, lb))
                } else {
                    ((ob, oa), (mb, ma), (lb, la))
                };
                self.holder.remove(&small_l);
                self.holder.insert(big_l, c);
                self.label.insert(c, big_l);
                for s in small_m {
                    self.owner[s as usize] = big_l;
                    self.pos[s as usize] = big_m.len();
                    big_m.push(s);
                }
                big_o.extend(small_o);
                self.queues.insert(c, melded);
                self.oracle.insert(c, big_o);
                self.members.insert(c, big_m);
                self.after(OpKind::Meld, n, c)
            }
            Op::Destroy(q) => {
                let queue = self.queues.get_mut(&q).ok_or(RunError::NoQueue(q))?;
                let empty = self.oracle[&q].is_empty();
                match queue.destroy() {
                    Ok(()) if empty => {
                        self.queues.remove(&q);
                        self.oracle.remove(&q);
                        self.members.remove(&q);
                        let l = self.label.remove(&q).expect("label");
                        self.holder.remove(&l);
                        Ok(())
                    }
                    Err(QueueError::NotEmpty(_)) if !empty => Ok(()),
                    Ok(()) => Err(RunError::Unexpected { q, err: QueueError::NotEmpty(0) }),
                    Err(err) => Err(RunError::Unexpected { q, err }),
                }
            }
        }
    }
}

// --------------------------------------------------------------------- fuzz

/// Relative weights of the generated operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpMix {
    pub insert: u32,
    pub delete_min: u32,
    pub decrease: u32,
    pub delete: u32,
    pub meld: u32,
}

impl Default for OpMix {
    fn default() -> Self {
        OpMix { insert: 40, delete_min: 20, decrease: 25, delete: 8, meld: 7 }
    }
}

pub struct FuzzOutcome {
    pub trace: Vec<Op>,
    pub verdict: Result<(), Divergence>,
    pub runner: Runner,
}

/// Generates a random trace and executes it in lockstep with the oracle.
///
/// Keys are drawn from a narrow range so ties happen. The trace depends only
/// on the arguments, and replaying it reproduces the verdict.
pub fn fuzz(seed: u64, n_ops: usize, n_queues: u32, mix: OpMix, config: Config, validate_every: usize) -> FuzzOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = [mix.insert, mix.delete_min, mix.decrease, mix.delete, mix.meld];
    let pick = WeightedIndex::new(weights).expect("op mix needs a positive weight");
    let mut run = Runner::new(config);
    run.validate_every = validate_every;
    let mut trace = Vec::new();
    let mut next_q = 0u32;
    let exec = |run: &mut Runner, trace: &mut Vec<Op>, op: Op| {
        trace.push(op);
        run.step(op).map_err(|err| Divergence { index: trace.len() - 1, op, err })
    };
    let mut verdict = Ok(());
    for _ in 0..n_queues.max(1) {
        verdict = verdict.and_then(|_| exec(&mut run, &mut trace, Op::New(next_q)));
        next_q += 1;
    }
    let mut done = 0;
    while verdict.is_ok() && done < n_ops {
        done += 1;
        let ids = run.queue_ids();
        let q = ids[rng.gen_range(0..ids.len())];
        let live = run.live(q);
        let op = match pick.sample(&mut rng) {
            0 => Op::Insert(q, rng.gen_range(-(1i64 << 12)..(1i64 << 12))),
            1 => Op::DeleteMin(q),
            2 if !live.is_empty() => {
                let s = live[rng.gen_range(0..live.len())];
                Op::Decrease(q, s, run.key_of(s) - rng.gen_range(0..(1i64 << 10)))
            }
            3 if !live.is_empty() => Op::Delete(q, live[rng.gen_range(0..live.len())]),
            4 if ids.len() >= 2 => {
                let mut b = q;
                while b == q {
                    b = ids[rng.gen_range(0..ids.len())];
                }
                let c = if rng.gen_bool(0.5) { q } else { b };
                verdict = exec(&mut run, &mut trace, Op::Meld(q, b, c));
                if verdict.is_err() {
                    break;
                }
                next_q += 1;
                Op::New(next_q - 1)
            }
            _ => Op::DeleteMin(q),
        };
        verdict = exec(&mut run, &mut trace, op);
    }
    if verdict.is_ok() {
        if let Err(err) = run.validate_all() {
            let index = trace.len().saturating_sub(1);
            let op = trace.last().copied().unwrap_or(Op::New(0));
            verdict = Err(Divergence { index, op, err });
        }
    }
    FuzzOutcome { trace, verdict, runner: run }
}

/// Replays `ops` and reports a structural failure, ignoring traces that
/// are merely ill-formed (unknown queues or nodes).
pub fn replay_fails(ops: &[Op], config: Config, validate_every: usize) -> Option<Divergence> {
    let mut run = Runner::new(config);
    run.validate_every = validate_every;
    let res = run.run(ops).and_then(|_| {
        run.validate_all().map_err(|err| Divergence {
            index: ops.len().saturating_sub(1),
            op: ops.last().copied().unwrap_or(Op::New(0)),
            err,
        })
    });
    match res {
        Err(d) if matches!(d.err, RunError::Mismatch { .. } | RunError::Unexpected { .. } | RunError::Invalid { .. }) => Some(d),
        _ => None,
    }
}

/// Greedy delta debugging: drops chunks of operations while the trace still
/// fails. Removing an insert renumbers later nodes, which is fine; variants
/// that stop making sense are rejected by [`replay_fails`].
pub fn shrink(ops: &[Op], config: Config) -> Vec<Op> {
    let mut cur: Vec<Op> = match replay_fails(ops, config, 1) {
        Some(d) => ops[..=d.index.min(ops.len() - 1)].to_vec(),
        None => return ops.to_vec(),
    };
    let mut chunk = cur.len() / 2;
    while chunk >= 1 {
        let mut i = 0;
        let mut progress = false;
        while i < cur.len() {
            let end = (i + chunk).min(cur.len());
            let mut cand = cur[..i].to_vec();
            cand.extend_from_slice(&cur[end..]);
            match replay_fails(&cand, config, 1) {
                Some(d) => {
                    cand.truncate(d.index + 1);
                    cur = cand;
                    progress = true;
                }
                None => i += chunk,
            }
        }
        if !progress {
            chunk /= 2;
        }
    }
    cur
}

// ---------------------------------------------------------------- workloads

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Workload {
    Drain,
    Sorted,
    Reverse,
    Random,
    DijkstraLike,
    MeldHeavy,
    DecreaseHeavy,
}

impl Workload {
    pub const ALL: [Workload; 7] = [
        Workload::Drain,
        Workload::Sorted,
        Workload::Reverse,
        Workload::Random,
        Workload::DijkstraLike,
        Workload::MeldHeavy,
        Workload::DecreaseHeavy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Workload::Drain => "drain",
            Workload::Sorted => "sorted",
            Workload::Reverse => "reverse",
            Workload::Random => "random",
            Workload::DijkstraLike => "dijkstra-like",
            Workload::MeldHeavy => "meld-heavy",
            Workload::DecreaseHeavy => "decrease-heavy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|w| w.name() == s)
    }
}

/// Low key bits carry the node number, so keys are distinct and the
/// generator can predict every delete-min without running the queue.
const SEQ_BITS: u32 = 24;

/// Generator-side model of the queues a workload builds.
#[derive(Default)]
struct Model {
    ops: Vec<Op>,
    keys: Vec<i64>,
    sets: HashMap<u32, BTreeSet<(i64, u64)>>,
    live: HashMap<u32, Vec<u64>>,
    pos: Vec<usize>,
    next_q: u32,
}

impl Model {
    fn new_queue(&mut self) -> u32 {
        let q = self.next_q;
        self.next_q += 1;
        self.ops.push(Op::New(q));
        self.sets.insert(q, BTreeSet::new());
        self.live.insert(q, Vec::new());
        q
    }

    fn insert(&mut self, q: u32, value: i64) {
        let seq = self.keys.len() as u64;
        let k = (value << SEQ_BITS) | seq as i64;
        self.ops.push(Op::Insert(q, k));
        self.keys.push(k);
        let v = self.live.get_mut(&q).expect("queue");
        self.pos.push(v.len());
        v.push(seq);
        self.sets.get_mut(&q).expect("queue").insert((k, seq));
    }

    fn forget(&mut self, q: u32, seq: u64) {
        let v = self.live.get_mut(&q).expect("queue");
        let p = self.pos[seq as usize];
        v.swap_remove(p);
        if let Some(&m) = v.get(p) {
            self.pos[m as usize] = p;
        }
        let k = self.keys[seq as usize];
        self.sets.get_mut(&q).expect("queue").remove(&(k, seq));
    }

    fn delete_min(&mut self, q: u32) {
        self.ops.push(Op::DeleteMin(q));
        if let Some(&(_, s)) = self.sets[&q].first() {
            self.forget(q, s);
        }
    }

    fn delete(&mut self, q: u32, seq: u64) {
        self.ops.push(Op::Delete(q, seq));
        self.forget(q, seq);
    }

    fn decrease(&mut self, q: u32, seq: u64, by: i64) {
        let old = self.keys[seq as usize];
        let k = old - (by << SEQ_BITS);
        self.ops.push(Op::Decrease(q, seq, k));
        let set = self.sets.get_mut(&q).expect("queue");
        set.remove(&(old, seq));
        set.insert((k, seq));
        self.keys[seq as usize] = k;
    }

    /// Melds `b` into `a`; the result keeps the name `a`.
    fn meld(&mut self, a: u32, b: u32) {
        self.ops.push(Op::Meld(a, b, a));
        let mut sb = self.sets.remove(&b).expect("queue");
        let mut lb = self.live.remove(&b).expect("queue");
        let sa = self.sets.get_mut(&a).expect("queue");
        let la = self.live.get_mut(&a).expect("queue");
        // Small into large.
        if lb.len() > la.len() {
            std::mem::swap(sa, &mut sb);
            std::mem::swap(la, &mut lb);
        }
        sa.extend(sb);
        for s in lb {
            self.pos[s as usize] = la.len();
            la.push(s);
        }
    }

    fn random_live(&self, q: u32, rng: &mut ChaCha8Rng) -> Option<u64> {
        let v = &self.live[&q];
        (!v.is_empty()).then(|| v[rng.gen_range(0..v.len())])
    }

    fn len(&self, q: u32) -> usize {
        self.live[&q].len()
    }
}

/// Trace of a named workload that inserts `n` elements in total.
pub fn workload(w: Workload, n: usize, seed: u64) -> Vec<Op> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Model::default();
    let big = 1i64 << 30;
    match w {
        Workload::Drain | Workload::Sorted | Workload::Reverse => {
            let q = m.new_queue();
            for i in 0..n {
                let v = match w {
                    Workload::Drain => rng.gen_range(0..big),
                    Workload::Sorted => i as i64,
                    _ => (n - i) as i64,
                };
                m.insert(q, v);
            }
            for _ in 0..n {
                m.delete_min(q);
            }
        }
        Workload::Random => {
            let q = m.new_queue();
            let mut inserted = 0;
            while inserted < n {
                match rng.gen_range(0..100) {
                    0..=49 => {
                        m.insert(q, rng.gen_range(0..big));
                        inserted += 1;
                    }
                    50..=69 => m.delete_min(q),
                    70..=89 => {
                        if let Some(s) = m.random_live(q, &mut rng) {
                            m.decrease(q, s, rng.gen_range(0..1 << 20));
                        }
                    }
                    _ => {
                        if let Some(s) = m.random_live(q, &mut rng) {
                            m.delete(q, s);
                        }
                    }
                }
            }
            while m.len(q) > 0 {
                m.delete_min(q);
            }
        }
        Workload::DijkstraLike => {
            let q = m.new_queue();
            for _ in 0..n {
                m.insert(q, rng.gen_range(0..big));
            }
            while m.len(q) > 0 {
                m.delete_min(q);
                for _ in 0..4 {
                    if let Some(s) = m.random_live(q, &mut rng) {
                        m.decrease(q, s, rng.gen_range(0..1 << 16));
                    }
                }
            }
        }
        Workload::DecreaseHeavy => {
            let q = m.new_queue();
            for _ in 0..n {
                m.insert(q, rng.gen_range(0..big));
            }
            for i in 0..4 * n {
                if let Some(s) = m.random_live(q, &mut rng) {
                    m.decrease(q, s, rng.gen_range(0..1 << 20));
                }
                if i % 16 == 15 {
                    m.delete_min(q);
                }
            }
        }
        Workload::MeldHeavy => {
            // A pool of eight queues whose sizes spread over all scales.
            let mut pool: Vec<u32> = (0..8).map(|_| m.new_queue()).collect();
            let mut inserted = 0;
            while inserted < n {
                let i = rng.gen_range(0..pool.len());
                let q = pool[i];
                match rng.gen_range(0..100) {
                    0..=59 => {
                        m.insert(q, rng.gen_range(0..big));
                        inserted += 1;
                    }
                    60..=69 => {
                        let mut j = i;
                        while j == i {
                            j = rng.gen_range(0..pool.len());
                        }
                        m.meld(q, pool[j]);
                        pool[j] = m.new_queue();
                    }
                    70..=84 => {
                        if let Some(s) = m.random_live(q, &mut rng) {
                            m.decrease(q, s, rng.gen_range(0..1 << 20));
                        }
                    }
                    85..=94 => m.delete_min(q),
                    _ => {
                        if let Some(s) = m.random_live(q, &mut rng) {
                            m.delete(q, s);
                        }
                    }
                }
            }
            while pool.len() > 1 {
                let b = pool.pop().expect("queue");
                m.meld(pool[pool.len() - 1], b);
            }
        }
    }
    m.ops
}

// ------------------------------------------------------------------ measure

/// Cost summary for one operation kind and size bucket.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub op: &'static str,
    pub n_bucket: u32,
    pub max_comparisons: u64,
    pub mean_comparisons: f64,
    pub max_fixes: u64,
    pub max_edits: u64,
}

/// floor(lg n), and 0 for n <= 1.
pub fn bucket(n: usize) -> u32 {
    n.max(1).ilog2()
}

pub fn summarize(samples: &[Sample]) -> Vec<StatsRow> {
    #[derive(Default)]
    struct Acc {
        max_c: u64,
        sum_c: u64,
        count: u64,
        max_f: u64,
        max_e: u64,
    }
    let mut acc: BTreeMap<(OpKind, u32), Acc> = BTreeMap::new();
    for s in samples {
        let a = acc.entry((s.kind, bucket(s.n))).or_default();
        a.max_c = a.max_c.max(s.stats.comparisons);
        a.sum_c += s.stats.comparisons;
        a.count += 1;
        a.max_f = a.max_f.max(s.stats.fixes);
        a.max_e = a.max_e.max(s.stats.edits);
    }
    acc.into_iter()
        .map(|((k, b), a)| StatsRow {
            op: k.name(),
            n_bucket: b,
            max_comparisons: a.max_c,
            mean_comparisons: a.sum_c as f64 / a.count as f64,
            max_fixes: a.max_f,
            max_edits: a.max_e,
        })
        .collect()
}

/// Runs a trace with instrumentation on and no validation.
pub fn measure(ops: &[Op], config: Config) -> Result<(Vec<StatsRow>, Runner), Divergence> {
    let mut run = Runner::new(config);
    run.record = true;
    run.run(ops)?;
    Ok((summarize(&run.samples), run))
}

// ------------------------------------------------------------------- bounds

/// Additive slack in the delete-min comparison bound.
pub const DELETE_MIN_SLACK: f64 = 32.0;

/// Retained auxiliary space per element never exceeds this factor.
pub const SPACE_FACTOR: f64 = 1.5;

/// Rate at which inactive violations can pile up: at most two new
/// violations per operation against `extension` new array entries.
pub fn epsilon(config: Config) -> f64 {
    2.0 / config.extension.max(1) as f64
}

/// Comparison budget of one delete-min in a queue of `n` elements.
pub fn delete_min_bound(n: usize, eps: f64, slack: f64) -> f64 {
    (69.12 + 21.0 * eps) * (n.max(2) as f64).log2() + slack
}

/// Default configuration, with the extension rate taken from
/// `OPTHEAP_EPSILON_RATE` when set.
pub fn config_from_env() -> Result<Config, String> {
    let mut c = Config::default();
    if let Ok(v) = std::env::var("OPTHEAP_EPSILON_RATE") {
        c.extension = v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&k| k > 0)
            .ok_or_else(|| format!("OPTHEAP_EPSILON_RATE must be a positive integer, got `{v}`"))?;
    }
    Ok(c)
}

// ---------------------------------------------------------- counter scripts

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterCmd {
    Inc(usize),
    Dec(usize),
    AssertRegular,
    AssertValue(u128),
}

/// Parses a counter script. Commands go one per line or are separated by
/// `;`; `#` starts a comment.
pub fn parse_counter_script(text: &str) -> Result<Vec<(usize, CounterCmd)>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for part in line.split(';') {
            let w: Vec<&str> = part.split_whitespace().collect();
            if w.is_empty() {
                continue;
            }
            let err = |msg: String| ParseError { line: i + 1, msg };
            let arg = |name: &str| -> Result<&str, ParseError> {
                match w.len() {
                    2 => Ok(w[1]),
                    _ => Err(err(format!("`{name}` takes one argument"))),
                }
            };
            let pos = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad position `{s}`: {e}")));
            let cmd = match w[0] {
                "inc" => CounterCmd::Inc(pos(arg("inc")?)?),
                "dec" => CounterCmd::Dec(pos(arg("dec")?)?),
                "assert-regular" if w.len() == 1 => CounterCmd::AssertRegular,
                "assert-value" => {
                    let s = arg("assert-value")?;
                    CounterCmd::AssertValue(s.parse().map_err(|e| err(format!("bad value `{s}`: {e}")))?)
                }
                other => return Err(err(format!("unknown counter command `{other}`"))),
            };
            out.push((i + 1, cmd));
        }
    }
    Ok(out)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct ScriptFailure {
    pub line: usize,
    pub msg: String,
}

/// Runs a counter script on a pure counter and returns the final digits.
pub fn run_counter_script(cmds: &[(usize, CounterCmd)]) -> Result<Vec<u8>, ScriptFailure> {
    let mut c = Counter::<()>::new();
    for &(line, cmd) in cmds {
        let fail = |msg: String| ScriptFailure { line, msg };
        match cmd {
            CounterCmd::Inc(i) => {
                if i > c.len() {
                    return Err(fail(format!("inc {i} on {:?} would leave a gap of zeros", c.digits())));
                }
                c.inc(i);
            }
            CounterCmd::Dec(i) => {
                if i >= c.len() {
                    return Err(fail(format!("dec {i} on {:?}: value {} has no 2^{i} to give", c.digits(), c.value())));
                }
                c.dec(i);
            }
            CounterCmd::AssertRegular => {
                if !c.is_regular() || !c.blocks_linked() {
                    return Err(fail(format!("{:?} is not regular", c.digits())));
                }
            }
            CounterCmd::AssertValue(v) => {
                if c.value() != v {
                    return Err(fail(format!("value is {}, expected {v}", c.value())));
                }
            }
        }
    }
    Ok(c.digits())
}
