//! Compilation of a desugared grammar into grammar slots.
//!
//! Each nonterminal `X : τ1 / … / τp` becomes, per alternate, one slot per
//! dot position, every slot failing over to the first slot of the next
//! alternate, and a trailing `X : . ∅` slot that reports failure of `X`.
//!
//! An unordered `X : τ1 | … | τp` is emitted twice: a fail variant of every
//! alternate, chained on failure exactly like an ordered rule, and a pass
//! variant of `τ2 … τp`. A fail variant that succeeds returns and then falls
//! through to the next pass variant; a pass variant continues with the next
//! pass variant on either outcome, the last one abandoning the descriptor.

use std::fmt;

use super::analysis::{compute_first, compute_nullable};
use super::ast::{ExprKind, Grammar};
use crate::lexer::{LexTable, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotId(pub u32);

impl SlotId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NtId(pub u32);

impl NtId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense set of token ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSet {
    bits: Vec<u64>,
}

impl TokenSet {
    pub fn insert(&mut self, id: TokenId) {
        let (word, bit) = (id.index() / 64, id.index() % 64);
        if self.bits.len() <= word {
            self.bits.resize(word + 1, 0);
        }
        self.bits[word] |= 1 << bit;
    }

    pub fn contains(&self, id: TokenId) -> bool {
        let (word, bit) = (id.index() / 64, id.index() % 64);
        self.bits.get(word).is_some_and(|w| w & (1 << bit) != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.bits.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64)
                .filter(move |b| bits & (1 << b) != 0)
                .map(move |b| TokenId((w * 64 + b) as u32))
        })
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&w| w == 0)
    }
}

impl FromIterator<TokenId> for TokenSet {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        let mut set = TokenSet::default();
        iter.into_iter().for_each(|t| set.insert(t));
        set
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Plain,
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Atom {
    Terminal(TokenId),
    Call(NtId),
    And(NtId),
    Not(NtId),
    Fail,
}

impl Atom {
    pub fn is_lookahead(self) -> bool {
        matches!(self, Atom::And(_) | Atom::Not(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    /// A position inside a sequence alternate.
    Body,
    /// The single slot of an `eps` alternate.
    Epsilon,
    /// The synthesized `X : . ∅` alternate.
    Failure,
    /// End of the pass-variant chain of an unordered rule.
    Abandon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchCont {
    Next(SlotId),
    /// Dot at the end: return, then optionally continue in-descriptor.
    End {
        then: Option<SlotId>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailCont {
    Slot(SlotId),
    NtFailure,
    Abandon,
}

#[derive(Debug, Clone)]
pub struct Slot {
    pub id: SlotId,
    pub nt: NtId,
    /// 0-based alternate index; `None` for the failure and abandon slots.
    pub alt: Option<usize>,
    pub variant: Variant,
    pub kind: SlotKind,
    pub dot: usize,
    pub before: Option<Atom>,
    pub after: Option<Atom>,
    pub on_match: MatchCont,
    pub on_fail: FailCont,
    pub nullable_suffix: bool,
    pub first_suffix: TokenSet,
    /// The slot BSR elements are recorded under (the plain or fail variant).
    pub canonical: SlotId,
}

impl Slot {
    /// Slots entered only by failing over, never by progressing a match.
    pub fn is_failover_target(&self) -> bool {
        match self.kind {
            SlotKind::Body => self.dot == 0,
            SlotKind::Epsilon | SlotKind::Failure | SlotKind::Abandon => true,
        }
    }

    pub fn lookahead_before(&self) -> bool {
        self.before.is_some_and(Atom::is_lookahead)
    }

    /// Dot at the end of a complete alternate.
    pub fn is_complete(&self) -> bool {
        match self.kind {
            SlotKind::Body => self.after.is_none(),
            SlotKind::Epsilon => true,
            SlotKind::Failure | SlotKind::Abandon => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NtInfo {
    pub name: String,
    pub entry: SlotId,
    pub unordered: bool,
    pub alternates: Vec<Vec<Atom>>,
    /// Canonical slot ids of each alternate, indexed by dot.
    pub alt_slots: Vec<Vec<SlotId>>,
    pub nullable: bool,
    pub first: TokenSet,
}

#[derive(Debug, Clone)]
pub struct SlotTable {
    pub slots: Vec<Slot>,
    pub nts: Vec<NtInfo>,
    pub start: NtId,
    token_names: Vec<String>,
}

impl SlotTable {
    pub fn slot(&self, id: SlotId) -> &Slot {
        &self.slots[id.index()]
    }

    pub fn nt(&self, id: NtId) -> &NtInfo {
        &self.nts[id.index()]
    }

    pub fn nt_id(&self, name: &str) -> Option<NtId> {
        self.nts.iter().position(|n| n.name == name).map(|i| NtId(i as u32))
    }

    pub fn nt_name(&self, id: NtId) -> &str {
        &self.nts[id.index()].name
    }

    pub fn token_name(&self, id: TokenId) -> &str {
        &self.token_names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Whether any nonterminal reachable from `nt` has an unordered rule.
    pub fn reaches_unordered(&self, nt: NtId) -> bool {
        let mut seen = vec![false; self.nts.len()];
        let mut stack = vec![nt];
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n.index()], true) {
                continue;
            }
            let info = self.nt(n);
            if info.unordered {
                return true;
            }
            for atom in info.alternates.iter().flatten() {
                if let Atom::Call(m) | Atom::And(m) | Atom::Not(m) = atom {
                    stack.push(*m);
                }
            }
        }
        false
    }

    pub fn atom_name(&self, atom: Atom) -> String {
        match atom {
            Atom::Terminal(t) => self.token_name(t).to_string(),
            Atom::Call(n) => self.nt_name(n).to_string(),
            Atom::And(n) => format!("&{}", self.nt_name(n)),
            Atom::Not(n) => format!("!{}", self.nt_name(n)),
            Atom::Fail => "fail".to_string(),
        }
    }

    /// The slot with its variant, e.g. `X : "a" . B (alt1, fail)`.
    pub fn display_slot(&self, id: SlotId) -> String {
        self.render_slot(id, true)
    }

    /// The slot as it appears in BSR elements, without variant.
    pub fn bsr_label(&self, id: SlotId) -> String {
        self.render_slot(id, false)
    }

    fn render_slot(&self, id: SlotId, with_variant: bool) -> String {
        let slot = self.slot(id);
        let nt = self.nt(slot.nt);
        let name = &nt.name;
        let alt = match slot.alt {
            None => String::new(),
            Some(a) => match slot.variant {
                Variant::Fail if with_variant => format!(" (alt{}, fail)", a + 1),
                Variant::Pass if with_variant => format!(" (alt{}, pass)", a + 1),
                _ => format!(" (alt{})", a + 1),
            },
        };
        match slot.kind {
            SlotKind::Failure => format!("{name} : . fail"),
            SlotKind::Abandon => format!("{name} : abandon"),
            SlotKind::Epsilon => format!("{name} : eps .{alt}"),
            SlotKind::Body => {
                let atoms = &nt.alternates[slot.alt.expect("body slots belong to an alternate")];
                let mut parts: Vec<String> = atoms.iter().map(|&a| self.atom_name(a)).collect();
                parts.insert(slot.dot, ".".to_string());
                format!("{name} : {}{alt}", parts.join(" "))
            }
        }
    }

    pub fn display_tokens(&self, set: &TokenSet) -> String {
        let names: Vec<&str> = set.iter().map(|t| self.token_name(t)).collect();
        format!("{{{}}}", names.join(", "))
    }
}

impl fmt::Display for SlotTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for slot in &self.slots {
            write!(f, "{:>4}  {}", slot.id.0, self.display_slot(slot.id))?;
            match slot.on_match {
                MatchCont::Next(_) => {}
                MatchCont::End { then: Some(next) } => write!(f, "  [return, then {}]", next.0)?,
                MatchCont::End { then: None } if slot.is_complete() => write!(f, "  [return]")?,
                MatchCont::End { then: None } => {}
            }
            if slot.kind == SlotKind::Body && slot.after.is_some() {
                match slot.on_fail {
                    FailCont::Slot(s) => write!(f, "  fail->{}", s.0)?,
                    FailCont::NtFailure => write!(f, "  fail->rtn")?,
                    FailCont::Abandon => write!(f, "  fail->abandon")?,
                }
                write!(f, "  first={}", self.display_tokens(&slot.first_suffix))?;
                if slot.nullable_suffix {
                    write!(f, " nullable")?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// One alternate's shape before ids are assigned.
enum AltShape {
    Epsilon,
    Seq(Vec<Atom>),
}

impl AltShape {
    fn slot_count(&self) -> usize {
        match self {
            AltShape::Epsilon => 1,
            AltShape::Seq(atoms) => atoms.len() + 1,
        }
    }
}

/// Compiles a desugared, left-recursion-free grammar against the token ids
/// of `lex`.
pub fn compile_slots(grammar: &Grammar, lex: &LexTable) -> SlotTable {
    let nullable = compute_nullable(grammar);
    let first = compute_first(grammar, &nullable);
    let nt_ids: Vec<&str> = grammar.rules.keys().map(String::as_str).collect();
    let nt_of = |name: &str| NtId(nt_ids.iter().position(|n| *n == name).expect("validated reference") as u32);
    let token_of = |name: &str| lex.lookup(name).expect("validated token");

    let atom_of = |e: &super::ast::Expr| -> Atom {
        match &e.kind {
            ExprKind::Literal(name) => Atom::Terminal(token_of(name)),
            ExprKind::Nonterminal(name) => Atom::Call(nt_of(name)),
            ExprKind::Fail => Atom::Fail,
            ExprKind::And(inner) | ExprKind::Not(inner) => {
                let ExprKind::Nonterminal(name) = &inner.kind else {
                    panic!("lookahead body must be a nonterminal after desugaring")
                };
                if matches!(e.kind, ExprKind::And(_)) {
                    Atom::And(nt_of(name))
                } else {
                    Atom::Not(nt_of(name))
                }
            }
            _ => panic!("not an atom after desugaring: {e}"),
        }
    };

    let mut table = SlotTable {
        slots: Vec::new(),
        nts: Vec::new(),
        start: nt_of(&grammar.start),
        token_names: (0..lex.len())
            .map(|i| lex.name(TokenId(i as u32)).to_string())
            .collect(),
    };

    for (index, rule) in grammar.rules.values().enumerate() {
        let nt = NtId(index as u32);
        let (unordered, alt_exprs): (bool, Vec<&super::ast::Expr>) = match &rule.body.kind {
            ExprKind::Ordered(alts) => (false, alts.iter().collect()),
            ExprKind::Unordered(alts) => (true, alts.iter().collect()),
            _ => (false, vec![&rule.body]),
        };
        let shapes: Vec<AltShape> = alt_exprs
            .iter()
            .map(|e| match &e.kind {
                ExprKind::Empty => AltShape::Epsilon,
                ExprKind::Seq(items) => AltShape::Seq(items.iter().map(atom_of).collect()),
                _ => panic!("alternate not in desugared form: {e}"),
            })
            .collect();
        // Suffix analyses per alternate and dot, from the source expressions.
        let suffixes: Vec<Vec<(bool, TokenSet)>> = alt_exprs
            .iter()
            .map(|e| match &e.kind {
                ExprKind::Seq(items) => (0..=items.len())
                    .map(|dot| {
                        let rest = &items[dot..];
                        let set = first.seq(rest, &nullable).iter().map(|n| token_of(n)).collect();
                        (nullable.seq(rest), set)
                    })
                    .collect(),
                _ => vec![(true, TokenSet::default())],
            })
            .collect();

        let base = table.slots.len() as u32;
        let p = shapes.len();
        // Layout: primary variant of every alternate, the ∅ slot, then for
        // unordered rules the pass variants of alternates 2..p and an abandon slot.
        let mut primary_start = Vec::with_capacity(p);
        let mut next = base;
        for shape in &shapes {
            primary_start.push(SlotId(next));
            next += shape.slot_count() as u32;
        }
        let failure = SlotId(next);
        next += 1;
        let mut pass_start = vec![None; p];
        let mut abandon = None;
        if unordered && p >= 2 {
            for (a, shape) in shapes.iter().enumerate().skip(1) {
                pass_start[a] = Some(SlotId(next));
                next += shape.slot_count() as u32;
            }
            abandon = Some(SlotId(next));
        }

        let primary_variant = if unordered { Variant::Fail } else { Variant::Plain };
        for (a, shape) in shapes.iter().enumerate() {
            let fail_to = primary_start.get(a + 1).copied().unwrap_or(failure);
            let then = if unordered {
                pass_start.get(a + 1).copied().flatten()
            } else {
                None
            };
            emit_alternate(
                &mut table,
                nt,
                a,
                primary_variant,
                shape,
                &suffixes[a],
                primary_start[a],
                primary_start[a],
                fail_to,
                then,
            );
        }
        table.slots.push(Slot {
            id: failure,
            nt,
            alt: None,
            variant: primary_variant,
            kind: SlotKind::Failure,
            dot: 0,
            before: None,
            after: None,
            on_match: MatchCont::End { then: None },
            on_fail: FailCont::NtFailure,
            nullable_suffix: false,
            first_suffix: TokenSet::default(),
            canonical: failure,
        });
        if let Some(abandon) = abandon {
            for (a, shape) in shapes.iter().enumerate().skip(1) {
                let next_pass = pass_start.get(a + 1).copied().flatten();
                emit_alternate(
                    &mut table,
                    nt,
                    a,
                    Variant::Pass,
                    shape,
                    &suffixes[a],
                    pass_start[a].expect("pass variant laid out"),
                    primary_start[a],
                    next_pass.unwrap_or(abandon),
                    next_pass,
                );
            }
            table.slots.push(Slot {
                id: abandon,
                nt,
                alt: None,
                variant: Variant::Pass,
                kind: SlotKind::Abandon,
                dot: 0,
                before: None,
                after: None,
                on_match: MatchCont::End { then: None },
                on_fail: FailCont::Abandon,
                nullable_suffix: false,
                first_suffix: TokenSet::default(),
                canonical: abandon,
            });
        }
        debug_assert_eq!(table.slots.len() as u32, abandon.map_or(failure.0, |a| a.0) + 1);

        let alt_slots = shapes
            .iter()
            .enumerate()
            .map(|(a, s)| {
                (0..s.slot_count())
                    .map(|d| SlotId(primary_start[a].0 + d as u32))
                    .collect()
            })
            .collect();
        table.nts.push(NtInfo {
            name: rule.name.clone(),
            entry: primary_start[0],
            unordered,
            alternates: shapes
                .into_iter()
                .map(|s| match s {
                    AltShape::Epsilon => Vec::new(),
                    AltShape::Seq(atoms) => atoms,
                })
                .collect(),
            alt_slots,
            nullable: nullable.of(&rule.name),
            first: first.of(&rule.name).iter().map(|n| token_of(n)).collect(),
        });
    }
    table
}

#[allow(clippy::too_many_arguments)]
#[allow(clippy::needless_range_loop)]
fn emit_alternate(
    table: &mut SlotTable,
    nt: NtId,
    alt: usize,
    variant: Variant,
    shape: &AltShape,
    suffixes: &[(bool, TokenSet)],
    start: SlotId,
    canonical_start: SlotId,
    fail_to: SlotId,
    then: Option<SlotId>,
) {
    match shape {
        AltShape::Epsilon => table.slots.push(Slot {
            id: start,
            nt,
            alt: Some(alt),
            variant,
            kind: SlotKind::Epsilon,
            dot: 0,
            before: None,
            after: None,
            on_match: MatchCont::End { then },
            on_fail: FailCont::Slot(fail_to),
            nullable_suffix: true,
            first_suffix: TokenSet::default(),
            canonical: canonical_start,
        }),
        AltShape::Seq(atoms) => {
            for dot in 0..=atoms.len() {
                let id = SlotId(start.0 + dot as u32);
                let on_match = if dot < atoms.len() {
                    MatchCont::Next(SlotId(id.0 + 1))
                } else {
                    MatchCont::End { then }
                };
                table.slots.push(Slot {
                    id,
                    nt,
                    alt: Some(alt),
                    variant,
                    kind: SlotKind::Body,
                    dot,
                    before: dot.checked_sub(1).map(|d| atoms[d]),
                    after: atoms.get(dot).copied(),
                    on_match,
                    on_fail: FailCont::Slot(fail_to),
                    nullable_suffix: suffixes[dot].0,
                    first_suffix: suffixes[dot].1.clone(),
                    canonical: SlotId(canonical_start.0 + dot as u32),
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::desugar::desugar;
    use crate::grammar::dsl::parse_grammar;

    fn compile(text: &str) -> SlotTable {
        let g = desugar(&parse_grammar(text).unwrap());
        let lex = LexTable::compile(&g.token_defs()).unwrap();
        compile_slots(&g, &lex)
    }

    fn fail_target(t: &SlotTable, id: u32) -> String {
        match t.slots[id as usize].on_fail {
            FailCont::Slot(s) => t.display_slot(s),
            other => format!("{other:?}"),
        }
    }

    #[test]
    fn ordered_chain() {
        let t = compile(r#"X : "a" / "b" ;"#);
        let shown: Vec<String> = (0..t.len() as u32).map(|i| t.display_slot(SlotId(i))).collect();
        assert_eq!(
            shown,
            vec![
                r#"X : . "a" (alt1)"#,
                r#"X : "a" . (alt1)"#,
                r#"X : . "b" (alt2)"#,
                r#"X : "b" . (alt2)"#,
                "X : . fail",
            ]
        );
        assert_eq!(fail_target(&t, 0), r#"X : . "b" (alt2)"#);
        assert_eq!(fail_target(&t, 2), "X : . fail");
        assert_eq!(t.slots[1].on_match, MatchCont::End { then: None });
        assert_eq!(t.slots[4].on_fail, FailCont::NtFailure);
        assert_eq!(t.nts[0].entry, SlotId(0));
    }

    #[test]
    fn epsilon_rule_is_single_slot() {
        let t = compile("X : eps ;");
        assert_eq!(t.len(), 2);
        assert_eq!(t.slots[0].kind, SlotKind::Epsilon);
        assert!(t.slots[0].is_complete());
        assert_eq!(t.display_slot(SlotId(0)), "X : eps . (alt1)");
        assert_eq!(t.slots[1].kind, SlotKind::Failure);
    }

    #[test]
    fn unordered_duplicates_alternates() {
        let t = compile(r#"X : "a" | "b" ;"#);
        let shown: Vec<String> = (0..t.len() as u32).map(|i| t.display_slot(SlotId(i))).collect();
        assert_eq!(
            shown,
            vec![
                r#"X : . "a" (alt1, fail)"#,
                r#"X : "a" . (alt1, fail)"#,
                r#"X : . "b" (alt2, fail)"#,
                r#"X : "b" . (alt2, fail)"#,
                "X : . fail",
                r#"X : . "b" (alt2, pass)"#,
                r#"X : "b" . (alt2, pass)"#,
                "X : abandon",
            ]
        );
        // fail variant of τ1: failure chains to the next fail variant, success
        // falls through to the pass variant of τ2.
        assert_eq!(fail_target(&t, 0), r#"X : . "b" (alt2, fail)"#);
        assert_eq!(t.slots[1].on_match, MatchCont::End { then: Some(SlotId(5)) });
        assert_eq!(fail_target(&t, 2), "X : . fail");
        assert_eq!(t.slots[3].on_match, MatchCont::End { then: None });
        assert_eq!(fail_target(&t, 5), "X : abandon");
        assert_eq!(t.slots[6].on_match, MatchCont::End { then: None });
        assert_eq!(t.slots[5].canonical, SlotId(2));
        assert_eq!(t.slots[7].on_fail, FailCont::Abandon);
    }

    #[test]
    fn suffix_analyses() {
        let t = compile(r#"S : "a" S / !B "c" / B? ; B : "b" ;"#);
        let s = |i: usize| &t.slots[i];
        assert_eq!(t.display_tokens(&s(0).first_suffix), r#"{"a"}"#);
        // Token ids follow first use, so "c" precedes "b".
        assert_eq!(t.display_tokens(&s(1).first_suffix), r#"{"a", "c", "b"}"#);
        // S is nullable through its last alternate.
        assert!(s(1).nullable_suffix);
        assert!(!s(0).nullable_suffix);
        assert!(s(2).nullable_suffix);
        // `!B "c"`: lookahead is transparent.
        assert_eq!(t.display_tokens(&s(3).first_suffix), r#"{"c"}"#);
        assert!(s(4).lookahead_before());
        // `B?` is nullable.
        assert!(s(6).nullable_suffix);
    }

    #[test]
    fn failure_chains_terminate() {
        let t = compile(r#"S : A "x" | B | eps ; A : "a" / B ; B : "b" | "c" "d" ;"#);
        for slot in &t.slots {
            let mut cur = slot.on_fail;
            let mut steps = 0;
            while let FailCont::Slot(next) = cur {
                let s = t.slot(next);
                assert_eq!(s.nt, slot.nt);
                if s.kind == SlotKind::Failure || s.kind == SlotKind::Abandon {
                    break;
                }
                cur = s.on_fail;
                steps += 1;
                assert!(steps <= t.len(), "cyclic failure chain");
            }
        }
    }

    #[test]
    fn reaches_unordered_is_transitive() {
        let t = compile(r#"S : A "x" ; A : B ; B : "b" | "c" ; C : "c" ;"#);
        assert!(t.reaches_unordered(t.nt_id("S").unwrap()));
        assert!(!t.reaches_unordered(t.nt_id("C").unwrap()));
    }
}
