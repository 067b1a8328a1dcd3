//! Rewrites sugar into the core form the slot compiler understands.
//!
//! After desugaring a rule body is an `Ordered` or `Unordered` list of
//! alternates, or a single alternate. An alternate is `Empty` or a `Seq` of
//! atoms: `Literal`, `Nonterminal`, `Fail`, `And(Nonterminal)` and
//! `Not(Nonterminal)`. Everything else moves into fresh nonterminals:
//!
//! ```text
//! α?  =>  R : α / eps ;
//! α*  =>  R : α R / eps ;
//! α+  =>  P : α R ;  R : α R / eps ;
//! (α), nested choices, lookahead bodies other than a nonterminal  =>  G : α ;
//! ```
//!
//! Fresh names have the form `#Owner.kind<n>` where `Owner` is the user rule
//! the sugar came from. `#` never occurs in DSL identifiers.

use indexmap::IndexMap;

use super::ast::{Expr, ExprKind, Grammar, Loc, Rule};

pub const FRESH_MARKER: char = '#';

pub fn is_fresh_name(name: &str) -> bool {
    name.starts_with(FRESH_MARKER)
}

pub fn desugar(grammar: &Grammar) -> Grammar {
    let mut d = Desugarer {
        taken: grammar.rules.keys().cloned().collect(),
        out: IndexMap::new(),
        pending: Vec::new(),
        counters: IndexMap::new(),
    };
    for rule in grammar.rules.values() {
        let owner = owner_of(&rule.name).to_string();
        let body = d.body(&rule.body, &owner);
        d.out.insert(
            rule.name.clone(),
            Rule {
                name: rule.name.clone(),
                body,
                loc: rule.loc,
            },
        );
        while let Some((name, body, loc)) = d.pending.pop() {
            let owner = owner_of(&name).to_string();
            let body = d.body(&body, &owner);
            d.out.insert(name.clone(), Rule { name, body, loc });
        }
    }
    Grammar {
        rules: d.out,
        start: grammar.start.clone(),
        tokens: grammar.tokens.clone(),
        skip: grammar.skip.clone(),
    }
}

/// The user rule a (possibly fresh) nonterminal belongs to.
fn owner_of(name: &str) -> &str {
    match name.strip_prefix(FRESH_MARKER) {
        Some(rest) => rest.split('.').next().unwrap_or(rest),
        None => name,
    }
}

struct Desugarer {
    taken: Vec<String>,
    out: IndexMap<String, Rule>,
    /// Fresh rules whose bodies still need desugaring.
    pending: Vec<(String, Expr, Loc)>,
    counters: IndexMap<String, usize>,
}

impl Desugarer {
    fn fresh(&mut self, owner: &str, kind: &str) -> String {
        loop {
            let n = self.counters.entry(owner.to_string()).or_insert(0);
            *n += 1;
            let name = format!("{FRESH_MARKER}{owner}.{kind}{n}");
            if !self.taken.contains(&name) {
                self.taken.push(name.clone());
                return name;
            }
        }
    }

    /// Defines a fresh nonterminal for `body` and returns a reference to it.
    fn extract(&mut self, owner: &str, kind: &str, body: Expr, loc: Loc) -> Expr {
        let name = self.fresh(owner, kind);
        // Processed in creation order: pending is a stack, so insert at the bottom.
        self.pending.insert(0, (name.clone(), body, loc));
        Expr::nt(&name).at(loc)
    }

    fn body(&mut self, e: &Expr, owner: &str) -> Expr {
        match &e.kind {
            ExprKind::Ordered(alts) => Expr::ordered(alts.iter().map(|a| self.alternate(a, owner)).collect()).at(e.loc),
            ExprKind::Unordered(alts) => {
                Expr::unordered(alts.iter().map(|a| self.alternate(a, owner)).collect()).at(e.loc)
            }
            ExprKind::Group(inner) => self.body(inner, owner),
            _ => self.alternate(e, owner),
        }
    }

    fn alternate(&mut self, e: &Expr, owner: &str) -> Expr {
        let mut atoms = Vec::new();
        self.flatten(e, owner, &mut atoms);
        if atoms.is_empty() {
            Expr::eps().at(e.loc)
        } else {
            Expr::seq(atoms).at(e.loc)
        }
    }

    fn flatten(&mut self, e: &Expr, owner: &str, atoms: &mut Vec<Expr>) {
        match &e.kind {
            ExprKind::Seq(items) => items.iter().for_each(|i| self.flatten(i, owner, atoms)),
            ExprKind::Empty => {}
            _ => atoms.push(self.atom(e, owner)),
        }
    }

    fn atom(&mut self, e: &Expr, owner: &str) -> Expr {
        let loc = e.loc;
        match &e.kind {
            ExprKind::Literal(_) | ExprKind::Nonterminal(_) | ExprKind::Fail => e.clone(),
            ExprKind::Empty | ExprKind::Seq(_) => {
                // Only reachable through lookahead bodies; wrap so the atom stays atomic.
                self.extract(owner, "grp", e.clone(), loc)
            }
            ExprKind::Group(inner) => self.extract(owner, "grp", (**inner).clone(), loc),
            ExprKind::Ordered(_) | ExprKind::Unordered(_) => self.extract(owner, "alt", e.clone(), loc),
            ExprKind::And(inner) => Expr::and(self.lookahead_body(inner, owner)).at(loc),
            ExprKind::Not(inner) => Expr::not(self.lookahead_body(inner, owner)).at(loc),
            ExprKind::Opt(inner) => {
                let body = Expr::ordered(vec![ungroup(inner), Expr::eps().at(loc)]).at(loc);
                self.extract(owner, "opt", body, loc)
            }
            ExprKind::Star(inner) => self.star(inner, owner, loc),
            ExprKind::Plus(inner) => {
                let rest = self.star(inner, owner, loc);
                let body = Expr::seq(vec![ungroup(inner), rest]).at(loc);
                self.extract(owner, "plus", body, loc)
            }
        }
    }

    fn star(&mut self, inner: &Expr, owner: &str, loc: Loc) -> Expr {
        let name = self.fresh(owner, "star");
        let body = Expr::ordered(vec![
            Expr::seq(vec![ungroup(inner), Expr::nt(&name).at(loc)]).at(loc),
            Expr::eps().at(loc),
        ])
        .at(loc);
        self.pending.insert(0, (name.clone(), body, loc));
        Expr::nt(&name).at(loc)
    }

    fn lookahead_body(&mut self, inner: &Expr, owner: &str) -> Expr {
        match &inner.kind {
            ExprKind::Nonterminal(_) => inner.clone(),
            ExprKind::Group(g) => self.extract(owner, "la", (**g).clone(), inner.loc),
            _ => self.extract(owner, "la", inner.clone(), inner.loc),
        }
    }
}

/// A group used as the body of a fresh rule needs no extra nonterminal.
fn ungroup(e: &Expr) -> Expr {
    match &e.kind {
        ExprKind::Group(inner) => (**inner).clone(),
        _ => e.clone(),
    }
}

/// True when `grammar` is already in desugared form.
pub fn is_desugared(grammar: &Grammar) -> bool {
    fn atom_ok(e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Literal(_) | ExprKind::Nonterminal(_) | ExprKind::Fail => true,
            ExprKind::And(inner) | ExprKind::Not(inner) => matches!(inner.kind, ExprKind::Nonterminal(_)),
            _ => false,
        }
    }
    fn alt_ok(e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Empty => true,
            ExprKind::Seq(items) => !items.is_empty() && items.iter().all(atom_ok),
            _ => false,
        }
    }
    grammar.rules.values().all(|r| match &r.body.kind {
        ExprKind::Ordered(alts) | ExprKind::Unordered(alts) => !alts.is_empty() && alts.iter().all(alt_ok),
        _ => alt_ok(&r.body),
    })
}
