//! The descriptor-driven parsing engine.
//!
//! A [`Session`] executes the slot table over one input. Work items are
//! descriptors `(L, c_U, c_I)`; calls and returns go through a call-return
//! forest whose edges are labelled `match` or `fail`, so a nonterminal that
//! fails resumes its caller at the caller's failure continuation instead of
//! simply being dropped.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use indexmap::IndexSet;

use crate::grammar::slots::{Atom, FailCont, MatchCont, NtId, SlotId, SlotKind};
use crate::grammar::CompiledGrammar;
use crate::lexer::{LexSession, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Descriptor {
    pub slot: SlotId,
    pub c_u: usize,
    pub c_i: usize,
}

/// `(L, i, j, k)`: slot `L` with the dot after atom `θ`, the nonterminal
/// spanning from `i`, `θ` from `j` to `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BsrElement {
    pub slot: SlotId,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

/// Result of one nonterminal invocation as stored in the popped cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Match(usize),
    Fail,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Match(h) => write!(f, "{h}"),
            Outcome::Fail => write!(f, "fail"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeLabel {
    Match,
    Fail,
}

/// Edge from a nonterminal node `(X, j)` to the slot node `(L, i)` that
/// receives its results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CrfEdge {
    pub slot: SlotId,
    pub i: usize,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    /// Descriptors taken from the queue.
    pub descriptors: usize,
    /// Descriptors processed more than once; stays 0.
    pub reprocessed: usize,
    /// Size of the seen set `U`.
    pub seen: usize,
    pub bsr: usize,
    pub crf_nodes: usize,
    pub crf_edges: usize,
    pub popped: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FurthestFailure {
    /// Skip-adjusted position where no expected token matched.
    pub position: usize,
    pub expected: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ParseResult {
    pub matched: bool,
    /// Right extents of complete start-symbol matches from 0.
    pub extents: BTreeSet<usize>,
    pub max_extent: Option<usize>,
    /// Some extent reaches the end of input once trailing skips are consumed.
    pub full: bool,
    pub input_len: usize,
    /// Sorted.
    pub bsr: Vec<BsrElement>,
    pub popped: BTreeSet<(NtId, usize, Outcome)>,
    pub furthest_failure: Option<FurthestFailure>,
    pub stats: Stats,
    pub trace: Vec<String>,
}

impl ParseResult {
    /// Extents of `nt` invoked at `j` according to the popped cache.
    pub fn popped_for(&self, nt: NtId, j: usize) -> impl Iterator<Item = Outcome> + '_ {
        self.popped
            .range((nt, j, Outcome::Match(0))..=(nt, j, Outcome::Fail))
            .map(|&(_, _, o)| o)
    }
}

pub fn parse(grammar: &CompiledGrammar, input: &str) -> ParseResult {
    parse_with(grammar, input, &ParseOptions::default())
}

pub fn parse_with(grammar: &CompiledGrammar, input: &str, options: &ParseOptions) -> ParseResult {
    let mut session = Session::new(grammar, input, options);
    session.run();
    session.finish()
}

/// Mutable state of one parse: queue `R`, seen set `U`, BSR set, CRF and
/// popped cache.
pub struct Session<'g> {
    grammar: &'g CompiledGrammar,
    lex: LexSession<'g>,
    queue: VecDeque<Descriptor>,
    seen: HashSet<Descriptor>,
    processed: HashSet<Descriptor>,
    bsr: IndexSet<BsrElement>,
    crf: HashMap<(NtId, usize), Vec<CrfEdge>>,
    edges: HashSet<(NtId, usize, CrfEdge)>,
    popped: IndexSet<(NtId, usize, Outcome)>,
    popped_at: HashMap<(NtId, usize), Vec<Outcome>>,
    furthest: Option<(usize, BTreeSet<TokenId>)>,
    descriptors: usize,
    reprocessed: usize,
    trace: Option<Vec<String>>,
}

impl<'g> Session<'g> {
    pub fn new(grammar: &'g CompiledGrammar, input: &str, options: &ParseOptions) -> Self {
        Session {
            grammar,
            lex: LexSession::new(&grammar.lex, input),
            queue: VecDeque::new(),
            seen: HashSet::new(),
            processed: HashSet::new(),
            bsr: IndexSet::new(),
            crf: HashMap::new(),
            edges: HashSet::new(),
            popped: IndexSet::new(),
            popped_at: HashMap::new(),
            furthest: None,
            descriptors: 0,
            reprocessed: 0,
            trace: options.trace.then(Vec::new),
        }
    }

    /// Parses from the start symbol at position 0 until the queue is empty.
    pub fn run(&mut self) {
        let start = self.grammar.slots.start;
        self.crf.entry((start, 0)).or_default();
        self.add_nt(start, 0);
        self.drain();
    }

    /// Processes queued descriptors until none are left.
    pub fn drain(&mut self) {
        while let Some(d) = self.queue.pop_front() {
            self.descriptors += 1;
            if !self.processed.insert(d) {
                self.reprocessed += 1;
            }
            self.log(|s| format!("desc ({}, {}, {})", s.display_slot(d.slot), d.c_u, d.c_i));
            self.process(d);
        }
    }

    fn process(&mut self, d: Descriptor) {
        let slots = &self.grammar.slots;
        let Descriptor {
            slot: mut l,
            c_u,
            mut c_i,
        } = d;
        loop {
            let slot = slots.slot(l);
            let nt = slot.nt;
            match slot.kind {
                SlotKind::Failure => return self.rtn(nt, c_u, Outcome::Fail),
                SlotKind::Abandon => return,
                SlotKind::Epsilon | SlotKind::Body if slot.after.is_none() => {
                    if slot.kind == SlotKind::Epsilon {
                        self.add_bsr(BsrElement {
                            slot: slot.canonical,
                            i: c_u,
                            j: c_i,
                            k: c_i,
                        });
                    }
                    self.rtn(nt, c_u, Outcome::Match(c_i));
                    match slot.on_match {
                        MatchCont::End { then: Some(next) } => {
                            l = next;
                            c_i = c_u;
                        }
                        _ => return,
                    }
                }
                SlotKind::Epsilon | SlotKind::Body => {
                    let fail_to = match slot.on_fail {
                        FailCont::Slot(s) => s,
                        FailCont::NtFailure | FailCont::Abandon => unreachable!("body slots fail over to a slot"),
                    };
                    let MatchCont::Next(next) = slot.on_match else {
                        unreachable!("dot before an atom has a successor slot")
                    };
                    let Some(b) = self.test_select(l, c_i) else {
                        self.record_failure(l, c_i);
                        l = fail_to;
                        c_i = c_u;
                        continue;
                    };
                    match slot.after.expect("checked above") {
                        Atom::Terminal(_) => {
                            self.add_bsr(BsrElement {
                                slot: slots.slot(next).canonical,
                                i: c_u,
                                j: c_i,
                                k: b,
                            });
                            l = next;
                            c_i = b;
                        }
                        Atom::Call(y) | Atom::And(y) => return self.call(next, fail_to, y, c_u, c_i),
                        Atom::Not(y) => return self.call(fail_to, next, y, c_u, c_i),
                        Atom::Fail => unreachable!("testSelect never selects fail"),
                    }
                }
            }
        }
    }

    /// The greatest extent available for the suffix after the dot of `l`
    /// at `c_i`, or `None` when no expected token starts there.
    pub fn test_select(&mut self, l: SlotId, c_i: usize) -> Option<usize> {
        let slot = self.grammar.slots.slot(l);
        let mut b = slot.nullable_suffix.then_some(c_i);
        for (token, r) in self.lex.tokens(c_i).iter() {
            if slot.first_suffix.contains(token) && b.is_none_or(|b| r > b) {
                b = Some(r);
            }
        }
        b
    }

    fn record_failure(&mut self, l: SlotId, c_i: usize) {
        let pos = self.lex.skip_from(c_i);
        let expected = &self.grammar.slots.slot(l).first_suffix;
        match &mut self.furthest {
            Some((p, set)) if *p == pos => set.extend(expected.iter()),
            Some((p, _)) if *p > pos => {}
            _ => self.furthest = Some((pos, expected.iter().collect())),
        }
    }

    /// Invokes `x` at `j` on behalf of slot nodes `(l_m, i)` and `(l_f, i)`.
    pub fn call(&mut self, l_m: SlotId, l_f: SlotId, x: NtId, i: usize, j: usize) {
        let fresh = !self.crf.contains_key(&(x, j));
        if fresh {
            self.crf.insert((x, j), Vec::new());
        }
        let match_edge = CrfEdge {
            slot: l_m,
            i,
            label: EdgeLabel::Match,
        };
        let fail_edge = CrfEdge {
            slot: l_f,
            i,
            label: EdgeLabel::Fail,
        };
        for edge in [match_edge, fail_edge] {
            if !self.edges.insert((x, j, edge)) {
                continue;
            }
            self.crf.get_mut(&(x, j)).expect("node created above").push(edge);
            self.log(|s| {
                let label = if edge.label == EdgeLabel::Match {
                    "match"
                } else {
                    "fail"
                };
                format!(
                    "crf ({}, {}) -{label}-> ({}, {})",
                    s.nt_name(x),
                    j,
                    s.display_slot(edge.slot),
                    i
                )
            });
            if fresh {
                continue;
            }
            let results = self.popped_at.get(&(x, j)).cloned().unwrap_or_default();
            for h in results {
                match (edge.label, h) {
                    (EdgeLabel::Match, Outcome::Match(h)) => self.add_match(l_m, i, j, h),
                    (EdgeLabel::Fail, Outcome::Fail) => self.add_fail(l_f, i, j),
                    _ => {}
                }
            }
        }
        if fresh {
            self.add_nt(x, j);
        }
    }

    /// Records the result `h` of `x` invoked at `j` and passes it to every
    /// caller waiting on an edge with the matching label.
    pub fn rtn(&mut self, x: NtId, j: usize, h: Outcome) {
        if !self.popped.insert((x, j, h)) {
            return;
        }
        self.popped_at.entry((x, j)).or_default().push(h);
        self.log(|s| format!("pop ({}, {}, {})", s.nt_name(x), j, h));
        let edges = self.crf.get(&(x, j)).cloned().unwrap_or_default();
        for edge in edges {
            match (edge.label, h) {
                (EdgeLabel::Match, Outcome::Match(h)) => self.add_match(edge.slot, edge.i, j, h),
                (EdgeLabel::Fail, Outcome::Fail) => self.add_fail(edge.slot, edge.i, j),
                _ => {}
            }
        }
    }

    /// Continues slot `l` after its nonterminal atom matched from `j` to `h`.
    ///
    /// When `l` is a failover target (the match edge of a `!Y` call) the
    /// match means the caller failed: the alternate restarts at `i` and
    /// nothing is recorded.
    pub fn add_match(&mut self, l: SlotId, i: usize, j: usize, h: usize) {
        let slot = self.grammar.slots.slot(l);
        if slot.is_failover_target() {
            return self.add_desc(l, i, i);
        }
        self.add_bsr(BsrElement {
            slot: slot.canonical,
            i,
            j,
            k: h,
        });
        if slot.lookahead_before() {
            self.add_desc(l, i, j);
        } else {
            self.add_desc(l, i, h);
        }
    }

    /// Continues slot `l` after its nonterminal atom failed at `j`.
    pub fn add_fail(&mut self, l: SlotId, i: usize, j: usize) {
        let slot = self.grammar.slots.slot(l);
        if slot.lookahead_before() {
            // Only reachable for `!Y`: record the zero-width success.
            self.add_bsr(BsrElement {
                slot: slot.canonical,
                i,
                j,
                k: j,
            });
            self.add_desc(l, i, j);
        } else {
            self.add_desc(l, i, i);
        }
    }

    pub fn add_nt(&mut self, x: NtId, i: usize) {
        let entry = self.grammar.slots.nt(x).entry;
        self.add_desc(entry, i, i);
    }

    pub fn add_desc(&mut self, slot: SlotId, c_u: usize, c_i: usize) {
        let d = Descriptor { slot, c_u, c_i };
        if self.seen.insert(d) {
            self.queue.push_back(d);
        }
    }

    fn add_bsr(&mut self, e: BsrElement) {
        if self.bsr.insert(e) {
            self.log(|s| format!("bsr ({}, {}, {}, {})", s.bsr_label(e.slot), e.i, e.j, e.k));
        }
    }

    fn log(&mut self, line: impl FnOnce(&crate::grammar::SlotTable) -> String) {
        if let Some(trace) = &mut self.trace {
            trace.push(line(&self.grammar.slots));
        }
    }

    pub fn bsr(&self) -> impl Iterator<Item = &BsrElement> {
        self.bsr.iter()
    }

    pub fn seen(&self) -> &HashSet<Descriptor> {
        &self.seen
    }

    pub fn queue(&self) -> &VecDeque<Descriptor> {
        &self.queue
    }

    pub fn crf_edges(&self, x: NtId, j: usize) -> &[CrfEdge] {
        self.crf.get(&(x, j)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn popped(&self) -> impl Iterator<Item = &(NtId, usize, Outcome)> {
        self.popped.iter()
    }

    pub fn stats(&self) -> Stats {
        Stats {
            descriptors: self.descriptors,
            reprocessed: self.reprocessed,
            seen: self.seen.len(),
            bsr: self.bsr.len(),
            crf_nodes: self.crf.len(),
            crf_edges: self.edges.len(),
            popped: self.popped.len(),
        }
    }

    pub fn finish(mut self) -> ParseResult {
        let slots = &self.grammar.slots;
        let start = slots.start;
        let extents: BTreeSet<usize> = complete_extents(slots, self.bsr.iter(), start, 0).collect();
        let input_len = self.lex.len();
        let full = extents.iter().any(|&k| self.lex.skip_from(k) == input_len);
        let mut bsr: Vec<BsrElement> = self.bsr.iter().copied().collect();
        bsr.sort();
        let furthest_failure = self.furthest.take().map(|(position, expected)| FurthestFailure {
            position,
            expected: expected.into_iter().map(|t| slots.token_name(t).to_string()).collect(),
        });
        ParseResult {
            matched: !extents.is_empty(),
            max_extent: extents.last().copied(),
            extents,
            full,
            input_len,
            stats: self.stats(),
            bsr,
            popped: self.popped.iter().copied().collect(),
            furthest_failure,
            trace: self.trace.take().unwrap_or_default(),
        }
    }
}

/// Where a BSR element's atom actually ends: lookaheads consume nothing, so
/// their elements end at the pivot.
pub fn effective_end(slots: &crate::grammar::SlotTable, e: &BsrElement) -> usize {
    if slots.slot(e.slot).lookahead_before() {
        e.j
    } else {
        e.k
    }
}

/// Right extents of complete matches of `nt` from `i` in a BSR set.
pub fn complete_extents<'a>(
    slots: &'a crate::grammar::SlotTable,
    bsr: impl Iterator<Item = &'a BsrElement> + 'a,
    nt: NtId,
    i: usize,
) -> impl Iterator<Item = usize> + 'a {
    bsr.filter(move |e| {
        let slot = slots.slot(e.slot);
        e.i == i && slot.nt == nt && slot.is_complete()
    })
    .map(move |e| effective_end(slots, e))
}
