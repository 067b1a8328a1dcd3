//! Reference interpreter used to check the engine.
//!
//! Each expression evaluates at a position to a set of end positions plus a
//! flag saying whether some way of evaluating it fails. Without unordered
//! choice this is ordinary PEG semantics: at most one extent, and the flag is
//! set exactly when there is none.
//!
//! ```text
//! a        ({r}, false) if tokens(pos) has a:r, else (∅, true)
//! eps      ({pos}, false)
//! fail     (∅, true)
//! α β      ⋃ β@x over x ∈ α.E;  failed if α failed or any β@x failed
//! α / β    α.E ∪ (β.E if α failed);  failed if both failed
//! α | β    α.E ∪ β.E;  failed if both failed
//! &α       ({pos} if α.E ≠ ∅);  failed if α failed
//! !α       ({pos} if α failed);  failed if α.E ≠ ∅
//! ```

use std::collections::{BTreeSet, HashMap};

use crate::forest::ParseTree;
use crate::grammar::{CompiledGrammar, Expr, ExprKind, Grammar};
use crate::lexer::{LexSession, LexTable};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvalResult {
    pub extents: BTreeSet<usize>,
    pub failed: bool,
}

impl EvalResult {
    fn at(pos: usize) -> Self {
        EvalResult {
            extents: BTreeSet::from([pos]),
            failed: false,
        }
    }

    fn fail() -> Self {
        EvalResult {
            extents: BTreeSet::new(),
            failed: true,
        }
    }
}

/// Evaluator over a desugared grammar and one input.
pub struct Oracle<'g> {
    grammar: &'g Grammar,
    lex: LexSession<'g>,
    memo: HashMap<(&'g str, usize), EvalResult>,
    /// Nonterminal evaluations performed, memo hits excluded.
    pub evaluations: usize,
}

impl<'g> Oracle<'g> {
    pub fn new(grammar: &'g Grammar, lex: &'g LexTable, input: &str) -> Self {
        Oracle {
            grammar,
            lex: LexSession::new(lex, input),
            memo: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn for_compiled(grammar: &'g CompiledGrammar, input: &str) -> Self {
        Oracle::new(&grammar.core, &grammar.lex, input)
    }

    pub fn eval_start(&mut self) -> EvalResult {
        let start = self.grammar.start.clone();
        self.eval_nt(&start, 0)
    }

    pub fn eval_nt(&mut self, name: &str, pos: usize) -> EvalResult {
        let rule = self
            .grammar
            .rule(name)
            .unwrap_or_else(|| panic!("unknown nonterminal `{name}`"));
        let key = (rule.name.as_str(), pos);
        if let Some(done) = self.memo.get(&key) {
            return done.clone();
        }
        self.evaluations += 1;
        let result = self.eval(&rule.body, pos);
        self.memo.insert(key, result.clone());
        result
    }

    pub fn eval(&mut self, e: &'g Expr, pos: usize) -> EvalResult {
        match &e.kind {
            ExprKind::Literal(name) => {
                let id = self
                    .lex
                    .table()
                    .lookup(name)
                    .unwrap_or_else(|| panic!("unknown token `{name}`"));
                match self.lex.tokens(pos).get(id) {
                    Some(r) => EvalResult::at(r),
                    None => EvalResult::fail(),
                }
            }
            ExprKind::Empty => EvalResult::at(pos),
            ExprKind::Fail => EvalResult::fail(),
            ExprKind::Nonterminal(name) => self.eval_nt(name, pos),
            ExprKind::Group(inner) => self.eval(inner, pos),
            ExprKind::Seq(items) => self.eval_seq(items, pos),
            ExprKind::Ordered(alts) => {
                let mut out = EvalResult::fail();
                for alt in alts {
                    let r = self.eval(alt, pos);
                    out.extents.extend(r.extents);
                    if !r.failed {
                        out.failed = false;
                        break;
                    }
                }
                out
            }
            ExprKind::Unordered(alts) => {
                let mut out = EvalResult::fail();
                for alt in alts {
                    let r = self.eval(alt, pos);
                    out.extents.extend(r.extents);
                    out.failed &= r.failed;
                }
                out
            }
            ExprKind::And(inner) => {
                let r = self.eval(inner, pos);
                EvalResult {
                    extents: if r.extents.is_empty() {
                        BTreeSet::new()
                    } else {
                        BTreeSet::from([pos])
                    },
                    failed: r.failed,
                }
            }
            ExprKind::Not(inner) => {
                let r = self.eval(inner, pos);
                EvalResult {
                    extents: if r.failed {
                        BTreeSet::from([pos])
                    } else {
                        BTreeSet::new()
                    },
                    failed: !r.extents.is_empty(),
                }
            }
            ExprKind::Opt(_) | ExprKind::Star(_) | ExprKind::Plus(_) => {
                panic!("the oracle evaluates desugared grammars only: {e}")
            }
        }
    }

    fn eval_seq(&mut self, items: &'g [Expr], pos: usize) -> EvalResult {
        let Some((first, rest)) = items.split_first() else {
            return EvalResult::at(pos);
        };
        let head = self.eval(first, pos);
        let mut out = EvalResult {
            extents: BTreeSet::new(),
            failed: head.failed,
        };
        for x in head.extents {
            let tail = self.eval_seq(rest, x);
            out.extents.extend(tail.extents);
            out.failed |= tail.failed;
        }
        out
    }

    /// The derivation a committed PEG parser would produce for `name` at
    /// `pos`, or `None` if it fails. Only meaningful without unordered choice.
    pub fn witness(&mut self, name: &str, pos: usize) -> Option<ParseTree> {
        let rule = self.grammar.rule(name)?;
        let alts: Vec<&'g Expr> = match &rule.body.kind {
            ExprKind::Ordered(alts) | ExprKind::Unordered(alts) => alts.iter().collect(),
            _ => vec![&rule.body],
        };
        for (n, alt) in alts.into_iter().enumerate() {
            if let Some((children, k)) = self.witness_alternate(alt, pos) {
                return Some(ParseTree::Node {
                    nt: rule.name.clone(),
                    alt: n + 1,
                    i: pos,
                    k,
                    children,
                });
            }
        }
        None
    }

    fn witness_alternate(&mut self, alt: &'g Expr, pos: usize) -> Option<(Vec<ParseTree>, usize)> {
        let atoms: &[Expr] = match &alt.kind {
            ExprKind::Empty => &[],
            ExprKind::Seq(items) => items,
            _ => std::slice::from_ref(alt),
        };
        let mut children = Vec::new();
        let mut at = pos;
        for atom in atoms {
            match &atom.kind {
                ExprKind::Literal(name) => {
                    let r = self.eval(atom, at).extents.first().copied()?;
                    children.push(ParseTree::Leaf {
                        token: name.clone(),
                        i: at,
                        k: r,
                    });
                    at = r;
                }
                ExprKind::Nonterminal(name) => {
                    let tree = self.witness(name, at)?;
                    at = tree.extent().1;
                    children.push(tree);
                }
                ExprKind::And(_) | ExprKind::Not(_) => {
                    self.eval(atom, at).extents.first()?;
                    children.push(ParseTree::Lookahead {
                        lookahead: atom.to_string(),
                        i: at,
                        k: at,
                    });
                }
                _ => return None,
            }
        }
        Some((children, at))
    }
}

/// Extents and failure flag of the start symbol at 0.
pub fn eval_start(grammar: &CompiledGrammar, input: &str) -> EvalResult {
    Oracle::for_compiled(grammar, input).eval_start()
}
