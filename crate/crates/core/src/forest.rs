//! Reading parse trees out of a BSR set.
//!
//! A BSR element `(X ::= αθ·β, i, j, k)` only records where the last atom
//! `θ` sits. Trees are rebuilt by walking predecessors right to left and
//! descending into the complete elements of nonterminal atoms. Elements left
//! behind by abandoned alternates never lie on a chain that starts at a
//! complete element, so they are ignored.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{effective_end, BsrElement};
use crate::grammar::slots::{Atom, NtId, SlotKind, SlotTable};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(untagged)]
pub enum ParseTree {
    Node {
        nt: String,
        /// 1-based alternate index.
        alt: usize,
        i: usize,
        k: usize,
        children: Vec<ParseTree>,
    },
    Leaf {
        token: String,
        i: usize,
        k: usize,
    },
    /// Zero-width marker for `&Y` or `!Y`.
    Lookahead {
        lookahead: String,
        i: usize,
        k: usize,
    },
}

impl ParseTree {
    pub fn extent(&self) -> (usize, usize) {
        match self {
            ParseTree::Node { i, k, .. } | ParseTree::Leaf { i, k, .. } | ParseTree::Lookahead { i, k, .. } => (*i, *k),
        }
    }

    /// Leaves left to right.
    pub fn leaves(&self) -> Vec<(&str, usize, usize)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<(&'a str, usize, usize)>) {
        match self {
            ParseTree::Node { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
            ParseTree::Leaf { token, i, k } => out.push((token, *i, *k)),
            ParseTree::Lookahead { .. } => {}
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("trees always serialize")
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseTree::Node { nt, children, .. } => {
                write!(f, "{nt}(")?;
                for (n, c) in children.iter().enumerate() {
                    if n > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            ParseTree::Leaf { token, .. } => write!(f, "{token}"),
            ParseTree::Lookahead { lookahead, .. } => write!(f, "{lookahead}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ForestError {
    #[error("tree cap must be positive")]
    ZeroCap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub trees: Vec<ParseTree>,
    /// More trees exist than the cap allowed.
    pub truncated: bool,
}

/// A BSR set indexed for navigation.
pub struct Forest<'a> {
    slots: &'a SlotTable,
    elements: Vec<BsrElement>,
    /// (slot, i, effective end)
    by_end: HashMap<(u32, usize, usize), Vec<usize>>,
    /// (slot, i, pivot)
    by_pivot: HashMap<(u32, usize, usize), Vec<usize>>,
    /// (nonterminal, i, effective end) of complete elements
    complete: HashMap<(NtId, usize, usize), Vec<usize>>,
    /// (called nonterminal, pivot, k) of elements whose atom is a call or `&`
    callers: HashMap<(NtId, usize, usize), Vec<usize>>,
}

impl<'a> Forest<'a> {
    pub fn new(slots: &'a SlotTable, bsr: &[BsrElement]) -> Self {
        let mut elements = bsr.to_vec();
        elements.sort();
        elements.dedup();
        let mut forest = Forest {
            slots,
            elements,
            by_end: HashMap::new(),
            by_pivot: HashMap::new(),
            complete: HashMap::new(),
            callers: HashMap::new(),
        };
        for (n, e) in forest.elements.iter().enumerate() {
            let slot = slots.slot(e.slot);
            let end = effective_end(slots, e);
            forest.by_end.entry((e.slot.0, e.i, end)).or_default().push(n);
            forest.by_pivot.entry((e.slot.0, e.i, e.j)).or_default().push(n);
            if slot.is_complete() {
                forest.complete.entry((slot.nt, e.i, end)).or_default().push(n);
            }
            if let Some(Atom::Call(y) | Atom::And(y)) = slot.before {
                forest.callers.entry((y, e.j, e.k)).or_default().push(n);
            }
        }
        forest
    }

    pub fn elements(&self) -> &[BsrElement] {
        &self.elements
    }

    fn collect(&self, ids: Option<&Vec<usize>>) -> Vec<BsrElement> {
        ids.map(|ids| ids.iter().map(|&n| self.elements[n]).collect())
            .unwrap_or_default()
    }

    /// Right extents of complete matches of `nt` from `i`.
    pub fn complete_matches(&self, nt: NtId, i: usize) -> BTreeSet<usize> {
        self.complete
            .keys()
            .filter(|&&(x, from, _)| x == nt && from == i)
            .map(|&(_, _, k)| k)
            .collect()
    }

    /// Elements `(X ::= α·θβ, i, l, j)` for `e = (X ::= αθ·β, i, j, k)`.
    pub fn predecessors(&self, e: &BsrElement) -> Vec<BsrElement> {
        let slot = self.slots.slot(e.slot);
        if slot.kind != SlotKind::Body || slot.dot < 2 {
            return Vec::new();
        }
        self.collect(self.by_end.get(&(e.slot.0 - 1, e.i, e.j)))
    }

    /// Complete elements of the nonterminal before the dot of `e`, spanning
    /// `e`'s atom.
    pub fn children(&self, e: &BsrElement) -> Vec<BsrElement> {
        match self.slots.slot(e.slot).before {
            Some(Atom::Call(y) | Atom::And(y)) => self.collect(self.complete.get(&(y, e.j, e.k))),
            _ => Vec::new(),
        }
    }

    /// Elements one dot further along the same alternate, continuing `e`.
    pub fn successors(&self, e: &BsrElement) -> Vec<BsrElement> {
        let slot = self.slots.slot(e.slot);
        if slot.kind != SlotKind::Body || slot.after.is_none() {
            return Vec::new();
        }
        self.collect(self.by_pivot.get(&(e.slot.0 + 1, e.i, effective_end(self.slots, e))))
    }

    /// Elements whose nonterminal atom is spanned by the complete element `e`.
    pub fn parents(&self, e: &BsrElement) -> Vec<BsrElement> {
        let slot = self.slots.slot(e.slot);
        if !slot.is_complete() {
            return Vec::new();
        }
        self.collect(self.callers.get(&(slot.nt, e.i, effective_end(self.slots, e))))
    }

    /// Up to `cap` distinct trees for `nt` spanning `i..k`, ordered by
    /// alternate and then pivot.
    pub fn extract_trees(&self, nt: NtId, i: usize, k: usize, cap: usize) -> Result<Extraction, ForestError> {
        if cap == 0 {
            return Err(ForestError::ZeroCap);
        }
        let mut ex = Extractor {
            forest: self,
            limit: cap + 1,
            trees: HashMap::new(),
            seqs: HashMap::new(),
            active: HashSet::new(),
        };
        let mut trees = ex.trees_for(nt, i, k);
        let truncated = trees.len() > cap;
        trees.truncate(cap);
        Ok(Extraction { trees, truncated })
    }
}

struct Extractor<'f, 'a> {
    forest: &'f Forest<'a>,
    limit: usize,
    trees: HashMap<(NtId, usize, usize), Vec<ParseTree>>,
    seqs: HashMap<(u32, usize, usize), Vec<Vec<ParseTree>>>,
    active: HashSet<(NtId, usize, usize)>,
}

impl Extractor<'_, '_> {
    fn trees_for(&mut self, nt: NtId, i: usize, k: usize) -> Vec<ParseTree> {
        if let Some(done) = self.trees.get(&(nt, i, k)) {
            return done.clone();
        }
        // A same-position cycle cannot occur in an accepted grammar; guard anyway.
        if !self.active.insert((nt, i, k)) {
            return Vec::new();
        }
        let slots = self.forest.slots;
        let mut roots = self.forest.collect(self.forest.complete.get(&(nt, i, k)));
        roots.sort_by_key(|e| (slots.slot(e.slot).alt, e.j, e.slot));
        let name = slots.nt_name(nt).to_string();
        let mut out = Vec::new();
        'roots: for root in roots {
            let slot = slots.slot(root.slot);
            let alt = slot.alt.expect("complete slots belong to an alternate") + 1;
            let child_lists = if slot.kind == SlotKind::Epsilon {
                vec![Vec::new()]
            } else {
                self.sequences(&root)
            };
            for children in child_lists {
                let tree = ParseTree::Node {
                    nt: name.clone(),
                    alt,
                    i,
                    k,
                    children,
                };
                if !out.contains(&tree) {
                    out.push(tree);
                }
                if out.len() >= self.limit {
                    break 'roots;
                }
            }
        }
        self.active.remove(&(nt, i, k));
        self.trees.insert((nt, i, k), out.clone());
        out
    }

    /// Child lists for the alternate prefix ending with element `e`.
    fn sequences(&mut self, e: &BsrElement) -> Vec<Vec<ParseTree>> {
        let slots = self.forest.slots;
        let slot = slots.slot(e.slot);
        let atom = slot.before.expect("body element has an atom before the dot");
        let atom_trees = match atom {
            Atom::Terminal(t) => vec![ParseTree::Leaf {
                token: slots.token_name(t).to_string(),
                i: e.j,
                k: e.k,
            }],
            Atom::Call(y) => self.trees_for(y, e.j, e.k),
            Atom::And(_) | Atom::Not(_) => vec![ParseTree::Lookahead {
                lookahead: slots.atom_name(atom),
                i: e.j,
                k: e.j,
            }],
            Atom::Fail => Vec::new(),
        };
        if atom_trees.is_empty() {
            return Vec::new();
        }
        let prefixes = self.prefixes(e.slot.0 - 1, slot.dot - 1, e.i, e.j);
        let mut out = Vec::new();
        for prefix in &prefixes {
            for t in &atom_trees {
                let mut list = prefix.clone();
                list.push(t.clone());
                out.push(list);
                if out.len() >= self.limit {
                    return out;
                }
            }
        }
        out
    }

    /// Child lists for the first `dot` atoms of an alternate, spanning `i..end`.
    fn prefixes(&mut self, slot: u32, dot: usize, i: usize, end: usize) -> Vec<Vec<ParseTree>> {
        if dot == 0 {
            return if end == i { vec![Vec::new()] } else { Vec::new() };
        }
        if let Some(cached) = self.seqs.get(&(slot, i, end)) {
            return cached.clone();
        }
        let mut elements = self.forest.collect(self.forest.by_end.get(&(slot, i, end)));
        elements.sort_by_key(|p| (p.j, p.k));
        let mut lists = Vec::new();
        'outer: for p in elements {
            for list in self.sequences(&p) {
                if !lists.contains(&list) {
                    lists.push(list);
                }
                if lists.len() >= self.limit {
                    break 'outer;
                }
            }
        }
        self.seqs.insert((slot, i, end), lists.clone());
        lists
    }
}
