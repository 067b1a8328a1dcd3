//! Helpers shared by the integration tests: random grammars, a naive
//! backtracking evaluator and a reference regex matcher.
#![allow(dead_code)]

use std::collections::BTreeSet;

use pegll::grammar::{Expr, ExprKind, Grammar};
use pegll::CompiledGrammar;
use rand::rngs::StdRng;
use rand::Rng;

pub const ALPHABET: [char; 3] = ['a', 'b', 'c'];

#[derive(Debug, Clone, Copy)]
pub struct GrammarShape {
    pub max_nonterminals: usize,
    pub max_alternates: usize,
    pub max_atoms: usize,
    pub unordered: bool,
    pub lookahead: bool,
}

impl GrammarShape {
    pub fn mixed() -> Self {
        GrammarShape {
            max_nonterminals: 5,
            max_alternates: 3,
            max_atoms: 4,
            unordered: true,
            lookahead: true,
        }
    }

    pub fn pure_peg() -> Self {
        GrammarShape {
            unordered: false,
            ..Self::mixed()
        }
    }
}

const NAMES: [&str; 5] = ["S", "A", "B", "C", "D"];

/// A random grammar already in desugared form. May be left-recursive.
pub fn random_grammar(rng: &mut StdRng, shape: GrammarShape) -> Grammar {
    let count = rng.random_range(1..=shape.max_nonterminals);
    let names = &NAMES[..count];
    let rules: Vec<(&str, Expr)> = names
        .iter()
        .map(|&name| {
            let alt_count = rng.random_range(1..=shape.max_alternates);
            let alts: Vec<Expr> = (0..alt_count).map(|_| random_alternate(rng, names, shape)).collect();
            let body = if alts.len() == 1 && rng.random_bool(0.5) {
                alts.into_iter().next().unwrap()
            } else if shape.unordered && rng.random_bool(0.5) {
                Expr::unordered(alts)
            } else {
                Expr::ordered(alts)
            };
            (name, body)
        })
        .collect();
    Grammar::from_rules(rules)
}

fn random_alternate(rng: &mut StdRng, names: &[&str], shape: GrammarShape) -> Expr {
    if rng.random_bool(0.12) {
        return Expr::eps();
    }
    let len = rng.random_range(1..=shape.max_atoms);
    let atoms = (0..len)
        .map(|_| {
            let roll = rng.random_range(0..100);
            let nt = names[rng.random_range(0..names.len())];
            match roll {
                0..45 => Expr::lit(&ALPHABET[rng.random_range(0..ALPHABET.len())].to_string()),
                45..75 => Expr::nt(nt),
                75..85 if shape.lookahead => Expr::and(Expr::nt(nt)),
                85..97 if shape.lookahead => Expr::not(Expr::nt(nt)),
                97..100 => Expr::fail(),
                _ => Expr::nt(nt),
            }
        })
        .collect();
    Expr::seq(atoms)
}

/// Draws random grammars until one passes the left-recursion gate.
pub fn accepted_grammar(rng: &mut StdRng, shape: GrammarShape) -> CompiledGrammar {
    loop {
        if let Ok(g) = CompiledGrammar::new(random_grammar(rng, shape)) {
            return g;
        }
    }
}

pub fn random_input(rng: &mut StdRng, max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
        .collect()
}

/// Unmemoized backtracking evaluator with the set-and-flag semantics,
/// matching literals directly against the characters. Counts one step per
/// expression evaluation and gives up once `limit` is exceeded.
pub struct Naive<'g> {
    grammar: &'g Grammar,
    input: Vec<char>,
    pub steps: u64,
    limit: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NaiveResult {
    pub extents: BTreeSet<usize>,
    pub failed: bool,
}

pub struct OutOfSteps;

impl<'g> Naive<'g> {
    pub fn new(grammar: &'g Grammar, input: &str, limit: u64) -> Self {
        Naive {
            grammar,
            input: input.chars().collect(),
            steps: 0,
            limit,
        }
    }

    pub fn run(&mut self) -> Result<NaiveResult, OutOfSteps> {
        let start = Expr::nt(&self.grammar.start);
        self.eval(&start, 0)
    }

    pub fn eval(&mut self, e: &Expr, pos: usize) -> Result<NaiveResult, OutOfSteps> {
        self.steps += 1;
        if self.steps > self.limit {
            return Err(OutOfSteps);
        }
        let at = |p: usize| NaiveResult {
            extents: BTreeSet::from([p]),
            failed: false,
        };
        let fail = || NaiveResult {
            extents: BTreeSet::new(),
            failed: true,
        };
        Ok(match &e.kind {
            ExprKind::Literal(name) => {
                let text: String = serde_json::from_str(name).expect("literal token names are quoted");
                let text: Vec<char> = text.chars().collect();
                if self.input[pos.min(self.input.len())..].starts_with(&text) {
                    at(pos + text.len())
                } else {
                    fail()
                }
            }
            ExprKind::Empty => at(pos),
            ExprKind::Fail => fail(),
            ExprKind::Nonterminal(name) => {
                let body = &self.grammar.rules[name].body;
                self.eval(body, pos)?
            }
            ExprKind::Group(inner) => self.eval(inner, pos)?,
            ExprKind::Seq(items) => {
                let mut current = at(pos);
                for item in items {
                    let mut next = NaiveResult {
                        extents: BTreeSet::new(),
                        failed: current.failed,
                    };
                    for &x in &current.extents {
                        let r = self.eval(item, x)?;
                        next.extents.extend(r.extents);
                        next.failed |= r.failed;
                    }
                    current = next;
                }
                current
            }
            ExprKind::Ordered(alts) => {
                let mut out = fail();
                for alt in alts {
                    let r = self.eval(alt, pos)?;
                    out.extents.extend(r.extents);
                    if !r.failed {
                        out.failed = false;
                        break;
                    }
                }
                out
            }
            ExprKind::Unordered(alts) => {
                let mut out = fail();
                for alt in alts {
                    let r = self.eval(alt, pos)?;
                    out.extents.extend(r.extents);
                    out.failed &= r.failed;
                }
                out
            }
            ExprKind::And(inner) => {
                let r = self.eval(inner, pos)?;
                NaiveResult {
                    extents: if r.extents.is_empty() {
                        BTreeSet::new()
                    } else {
                        BTreeSet::from([pos])
                    },
                    failed: r.failed,
                }
            }
            ExprKind::Not(inner) => {
                let r = self.eval(inner, pos)?;
                NaiveResult {
                    extents: if r.failed {
                        BTreeSet::from([pos])
                    } else {
                        BTreeSet::new()
                    },
                    failed: !r.extents.is_empty(),
                }
            }
            ExprKind::Opt(_) | ExprKind::Star(_) | ExprKind::Plus(_) => {
                panic!("naive evaluator expects desugared input")
            }
        })
    }
}

/// Regex AST used only by the tests, rendered to pattern text for the lexer
/// and matched here by direct enumeration of end positions.
#[derive(Debug, Clone)]
pub enum Re {
    Char(char),
    Class(Vec<(char, char)>, bool),
    Any,
    Concat(Vec<Re>),
    Alt(Vec<Re>),
    Star(Box<Re>),
    Plus(Box<Re>),
    Opt(Box<Re>),
}

impl Re {
    pub fn random(rng: &mut StdRng, depth: usize) -> Re {
        let leaf = depth == 0 || rng.random_bool(0.3);
        if leaf {
            return match rng.random_range(0..10) {
                0..6 => Re::Char(ALPHABET[rng.random_range(0..ALPHABET.len())]),
                6..9 => {
                    let lo = rng.random_range(0..ALPHABET.len());
                    let hi = rng.random_range(lo..ALPHABET.len());
                    Re::Class(vec![(ALPHABET[lo], ALPHABET[hi])], rng.random_bool(0.3))
                }
                _ => Re::Any,
            };
        }
        match rng.random_range(0..5) {
            0 => Re::Concat(
                (0..rng.random_range(2..=3))
                    .map(|_| Re::random(rng, depth - 1))
                    .collect(),
            ),
            1 => Re::Alt(
                (0..rng.random_range(2..=3))
                    .map(|_| Re::random(rng, depth - 1))
                    .collect(),
            ),
            2 => Re::Star(Box::new(Re::random(rng, depth - 1))),
            3 => Re::Plus(Box::new(Re::random(rng, depth - 1))),
            _ => Re::Opt(Box::new(Re::random(rng, depth - 1))),
        }
    }

    pub fn pattern(&self) -> String {
        match self {
            Re::Char(c) => c.to_string(),
            Re::Class(ranges, negated) => {
                let body: String = ranges
                    .iter()
                    .map(|&(lo, hi)| if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") })
                    .collect();
                format!("[{}{body}]", if *negated { "^" } else { "" })
            }
            Re::Any => ".".into(),
            Re::Concat(parts) => parts.iter().map(|p| p.operand()).collect(),
            Re::Alt(parts) => parts.iter().map(|p| p.operand()).collect::<Vec<_>>().join("|"),
            Re::Star(inner) => format!("{}*", inner.operand()),
            Re::Plus(inner) => format!("{}+", inner.operand()),
            Re::Opt(inner) => format!("{}?", inner.operand()),
        }
    }

    fn operand(&self) -> String {
        match self {
            Re::Char(_) | Re::Class(..) | Re::Any => self.pattern(),
            _ => format!("({})", self.pattern()),
        }
    }

    pub fn accepts_empty(&self) -> bool {
        self.ends(&[], 0).contains(&0)
    }

    /// Every position where a match starting at `pos` can end.
    pub fn ends(&self, input: &[char], pos: usize) -> BTreeSet<usize> {
        let one = |ok: bool| if ok { BTreeSet::from([pos + 1]) } else { BTreeSet::new() };
        let c = input.get(pos).copied();
        match self {
            Re::Char(x) => one(c == Some(*x)),
            Re::Class(ranges, negated) => {
                one(c.is_some_and(|c| ranges.iter().any(|&(lo, hi)| lo <= c && c <= hi) != *negated))
            }
            Re::Any => one(c.is_some()),
            Re::Concat(parts) => parts.iter().fold(BTreeSet::from([pos]), |acc, p| {
                acc.into_iter().flat_map(|x| p.ends(input, x)).collect()
            }),
            Re::Alt(parts) => parts.iter().flat_map(|p| p.ends(input, pos)).collect(),
            Re::Star(inner) => closure(inner, input, BTreeSet::from([pos])),
            Re::Plus(inner) => closure(inner, input, inner.ends(input, pos)),
            Re::Opt(inner) => {
                let mut out = inner.ends(input, pos);
                out.insert(pos);
                out
            }
        }
    }

    pub fn longest(&self, input: &[char], pos: usize) -> Option<usize> {
        self.ends(input, pos).into_iter().filter(|&e| e > pos).max()
    }
}

fn closure(inner: &Re, input: &[char], seed: BTreeSet<usize>) -> BTreeSet<usize> {
    let mut all = seed.clone();
    let mut frontier: Vec<usize> = seed.into_iter().collect();
    while let Some(x) = frontier.pop() {
        for e in inner.ends(input, x) {
            if all.insert(e) {
                frontier.push(e);
            }
        }
    }
    all
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = logs.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = logs.iter().map(|&(x, _)| (x - mx).powi(2)).sum();
    num / den
}
