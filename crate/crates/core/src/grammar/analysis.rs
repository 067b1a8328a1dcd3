//! Nullable and FIRST fixpoints, and the left-recursion gate.
//!
//! Lookaheads are treated as transparent: they are nullable and contribute
//! no tokens. FIRST is therefore an over-approximation, which is all the
//! `testSelect` filter needs.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::ast::{Diagnostic, Expr, ExprKind, Grammar};
use crate::lexer::END_TOKEN;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nullable {
    nt: BTreeMap<String, bool>,
    end_is_empty: bool,
}

impl Nullable {
    pub fn of(&self, nonterminal: &str) -> bool {
        self.nt.get(nonterminal).copied().unwrap_or(false)
    }

    pub fn expr(&self, e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Literal(name) => self.end_is_empty && name == END_TOKEN,
            ExprKind::Nonterminal(name) => self.of(name),
            ExprKind::Empty => true,
            ExprKind::Fail => false,
            ExprKind::Seq(items) => items.iter().all(|i| self.expr(i)),
            ExprKind::Ordered(alts) | ExprKind::Unordered(alts) => alts.iter().any(|a| self.expr(a)),
            ExprKind::And(_) | ExprKind::Not(_) | ExprKind::Opt(_) | ExprKind::Star(_) => true,
            ExprKind::Plus(inner) | ExprKind::Group(inner) => self.expr(inner),
        }
    }

    pub fn seq(&self, items: &[Expr]) -> bool {
        items.iter().all(|i| self.expr(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, bool)> {
        self.nt.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

fn nullable_fixpoint(grammar: &Grammar, end_is_empty: bool) -> Nullable {
    let mut result = Nullable {
        nt: grammar.rules.keys().map(|k| (k.clone(), false)).collect(),
        end_is_empty,
    };
    loop {
        let mut changed = false;
        for rule in grammar.rules.values() {
            if !result.of(&rule.name) && result.expr(&rule.body) {
                result.nt.insert(rule.name.clone(), true);
                changed = true;
            }
        }
        if !changed {
            return result;
        }
    }
}

/// Least fixpoint of "can match the empty string".
pub fn compute_nullable(grammar: &Grammar) -> Nullable {
    nullable_fixpoint(grammar, false)
}

pub type TokenNames = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstSets {
    nt: BTreeMap<String, TokenNames>,
}

impl FirstSets {
    pub fn of(&self, nonterminal: &str) -> &TokenNames {
        static EMPTY: TokenNames = BTreeSet::new();
        self.nt.get(nonterminal).unwrap_or(&EMPTY)
    }

    pub fn expr(&self, e: &Expr, nullable: &Nullable) -> TokenNames {
        let mut out = TokenNames::new();
        self.add_expr(e, nullable, &mut out);
        out
    }

    /// FIRST of a sequence of expressions, e.g. the suffix after a slot's dot.
    pub fn seq(&self, items: &[Expr], nullable: &Nullable) -> TokenNames {
        let mut out = TokenNames::new();
        self.add_seq(items, nullable, &mut out);
        out
    }

    fn add_seq(&self, items: &[Expr], nullable: &Nullable, out: &mut TokenNames) {
        for item in items {
            self.add_expr(item, nullable, out);
            if !nullable.expr(item) {
                break;
            }
        }
    }

    fn add_expr(&self, e: &Expr, nullable: &Nullable, out: &mut TokenNames) {
        match &e.kind {
            ExprKind::Literal(name) => {
                out.insert(name.clone());
            }
            ExprKind::Nonterminal(name) => out.extend(self.of(name).iter().cloned()),
            ExprKind::Empty | ExprKind::Fail | ExprKind::And(_) | ExprKind::Not(_) => {}
            ExprKind::Seq(items) => self.add_seq(items, nullable, out),
            ExprKind::Ordered(alts) | ExprKind::Unordered(alts) => {
                alts.iter().for_each(|a| self.add_expr(a, nullable, out))
            }
            ExprKind::Opt(inner) | ExprKind::Star(inner) | ExprKind::Plus(inner) | ExprKind::Group(inner) => {
                self.add_expr(inner, nullable, out)
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TokenNames)> {
        self.nt.iter().map(|(k, v)| (k.as_str(), v))
    }
}

/// Least fixpoint of the FIRST sets of every nonterminal.
pub fn compute_first(grammar: &Grammar, nullable: &Nullable) -> FirstSets {
    let mut sets = FirstSets {
        nt: grammar.rules.keys().map(|k| (k.clone(), TokenNames::new())).collect(),
    };
    loop {
        let mut changed = false;
        for rule in grammar.rules.values() {
            let first = sets.expr(&rule.body, nullable);
            let entry = sets.nt.get_mut(&rule.name).expect("every rule has an entry");
            if !first.is_subset(entry) {
                entry.extend(first);
                changed = true;
            }
        }
        if !changed {
            return sets;
        }
    }
}

/// Collects the nonterminals `e` can invoke without consuming input and
/// returns whether `e` itself can succeed without consuming input.
fn leading_calls(e: &Expr, zero_width: &Nullable, out: &mut Vec<String>) -> bool {
    match &e.kind {
        ExprKind::Literal(_) | ExprKind::Empty | ExprKind::Fail => zero_width.expr(e),
        ExprKind::Nonterminal(name) => {
            out.push(name.clone());
            zero_width.of(name)
        }
        ExprKind::Seq(items) => items.iter().all(|i| leading_calls(i, zero_width, out)),
        ExprKind::Ordered(alts) | ExprKind::Unordered(alts) => alts
            .iter()
            .fold(false, |acc, a| leading_calls(a, zero_width, out) | acc),
        ExprKind::And(inner) | ExprKind::Not(inner) | ExprKind::Opt(inner) | ExprKind::Star(inner) => {
            leading_calls(inner, zero_width, out);
            true
        }
        ExprKind::Plus(inner) | ExprKind::Group(inner) => leading_calls(inner, zero_width, out),
    }
}

/// The "can invoke at the same input position" relation, per nonterminal.
/// `$` counts as zero-width here since it consumes nothing.
pub fn same_position_calls(grammar: &Grammar) -> BTreeMap<String, BTreeSet<String>> {
    let zero_width = nullable_fixpoint(grammar, true);
    grammar
        .rules
        .values()
        .map(|rule| {
            let mut calls = Vec::new();
            leading_calls(&rule.body, &zero_width, &mut calls);
            (rule.name.clone(), calls.into_iter().collect())
        })
        .collect()
}

/// Reports every left-recursive cycle; an empty result means the grammar
/// is accepted.
pub fn check_left_recursion(grammar: &Grammar) -> Vec<Diagnostic> {
    let relation = same_position_calls(grammar);
    let mut graph: DiGraph<&str, ()> = DiGraph::new();
    let index: BTreeMap<&str, NodeIndex> = grammar
        .rules
        .keys()
        .map(|name| (name.as_str(), graph.add_node(name.as_str())))
        .collect();
    for (from, targets) in &relation {
        for to in targets {
            if let (Some(&a), Some(&b)) = (index.get(from.as_str()), index.get(to.as_str())) {
                graph.add_edge(a, b, ());
            }
        }
    }

    let mut components: Vec<Vec<NodeIndex>> = tarjan_scc(&graph)
        .into_iter()
        .filter(|scc| scc.len() > 1 || graph.contains_edge(scc[0], scc[0]))
        .collect();
    for scc in &mut components {
        scc.sort();
    }
    components.sort();

    components
        .into_iter()
        .map(|scc| {
            let cycle = find_cycle(&graph, &scc);
            let names: Vec<&str> = cycle.iter().map(|&n| graph[n]).collect();
            let mut members: Vec<&str> = scc.iter().map(|&n| graph[n]).collect();
            members.sort_by_key(|m| grammar.rules.get_index_of(*m));
            let loc = grammar.rules[graph[scc[0]]].loc;
            Diagnostic::new(
                loc,
                format!(
                    "left recursion: {} (involves {})",
                    names.join(" -> "),
                    members.join(", ")
                ),
            )
        })
        .collect()
}

/// Every nonterminal lying on some left-recursive cycle.
pub fn left_recursive_nonterminals(grammar: &Grammar) -> BTreeSet<String> {
    let relation = same_position_calls(grammar);
    // A reaches itself through the transitive closure.
    let mut result = BTreeSet::new();
    for start in relation.keys() {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&String> = relation[start].iter().collect();
        while let Some(n) = stack.pop() {
            if n == start {
                result.insert(start.clone());
                break;
            }
            if seen.insert(n) {
                if let Some(next) = relation.get(n) {
                    stack.extend(next.iter());
                }
            }
        }
    }
    result
}

/// Shortest cycle through the first node of `scc`, closed back to itself.
fn find_cycle(graph: &DiGraph<&str, ()>, scc: &[NodeIndex]) -> Vec<NodeIndex> {
    let start = scc[0];
    let mut parent: BTreeMap<NodeIndex, NodeIndex> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        let mut succ: Vec<NodeIndex> = graph.neighbors(n).filter(|m| scc.contains(m)).collect();
        succ.sort();
        for m in succ {
            if m == start {
                let mut path = vec![start];
                let mut cur = n;
                while cur != start {
                    path.push(cur);
                    cur = parent[&cur];
                }
                path.push(start);
                let last = path.len() - 1;
                path[1..last].reverse();
                return path;
            }
            if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(m) {
                e.insert(n);
                queue.push_back(m);
            }
        }
    }
    vec![start, start]
}
