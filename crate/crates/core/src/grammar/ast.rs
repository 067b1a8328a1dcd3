use std::fmt;

use indexmap::IndexMap;

use crate::lexer::{literal_token_name, TokenDef, END_TOKEN};

/// 1-based source position. `Loc::default()` marks synthesized nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub loc: Loc,
    pub message: String,
}

impl Diagnostic {
    pub fn new(loc: Loc, message: impl Into<String>) -> Self {
        Diagnostic {
            loc,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.loc, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    /// Reference to a token by name (inline literals are named by their
    /// quoted text).
    Literal(String),
    Nonterminal(String),
    Empty,
    Fail,
    Seq(Vec<Expr>),
    Ordered(Vec<Expr>),
    Unordered(Vec<Expr>),
    And(Box<Expr>),
    Not(Box<Expr>),
    Opt(Box<Expr>),
    Star(Box<Expr>),
    Plus(Box<Expr>),
    Group(Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr {
            kind,
            loc: Loc::default(),
        }
    }

    pub fn at(mut self, loc: Loc) -> Self {
        self.loc = loc;
        self
    }

    pub fn token(name: &str) -> Self {
        Expr::new(ExprKind::Literal(name.to_string()))
    }

    /// An inline literal, e.g. `lit("a")` for `"a"`.
    pub fn lit(text: &str) -> Self {
        Expr::new(ExprKind::Literal(literal_token_name(text)))
    }

    pub fn nt(name: &str) -> Self {
        Expr::new(ExprKind::Nonterminal(name.to_string()))
    }

    pub fn eps() -> Self {
        Expr::new(ExprKind::Empty)
    }

    pub fn fail() -> Self {
        Expr::new(ExprKind::Fail)
    }

    pub fn seq(items: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Seq(items))
    }

    pub fn ordered(alts: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Ordered(alts))
    }

    pub fn unordered(alts: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Unordered(alts))
    }

    pub fn and(e: Expr) -> Self {
        Expr::new(ExprKind::And(Box::new(e)))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Self {
        Expr::new(ExprKind::Not(Box::new(e)))
    }

    pub fn opt(e: Expr) -> Self {
        Expr::new(ExprKind::Opt(Box::new(e)))
    }

    pub fn star(e: Expr) -> Self {
        Expr::new(ExprKind::Star(Box::new(e)))
    }

    pub fn plus(e: Expr) -> Self {
        Expr::new(ExprKind::Plus(Box::new(e)))
    }

    pub fn group(e: Expr) -> Self {
        Expr::new(ExprKind::Group(Box::new(e)))
    }

    /// Calls `f` on this expression and every subexpression, parents first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Seq(items) | ExprKind::Ordered(items) | ExprKind::Unordered(items) => {
                items.iter().for_each(|e| e.walk(f))
            }
            ExprKind::And(e)
            | ExprKind::Not(e)
            | ExprKind::Opt(e)
            | ExprKind::Star(e)
            | ExprKind::Plus(e)
            | ExprKind::Group(e) => e.walk(f),
            ExprKind::Literal(_) | ExprKind::Nonterminal(_) | ExprKind::Empty | ExprKind::Fail => {}
        }
    }

    pub fn has_unordered(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e.kind, ExprKind::Unordered(_)));
        found
    }

    fn precedence(&self) -> u8 {
        match self.kind {
            ExprKind::Ordered(_) | ExprKind::Unordered(_) => 0,
            ExprKind::Seq(ref items) if items.len() > 1 => 1,
            _ => 2,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        match &self.kind {
            ExprKind::Literal(name) | ExprKind::Nonterminal(name) => write!(f, "{name}"),
            ExprKind::Empty => write!(f, "eps"),
            ExprKind::Fail => write!(f, "fail"),
            ExprKind::Seq(items) => {
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    item.fmt_at(f, 2)?;
                }
                Ok(())
            }
            ExprKind::Ordered(alts) | ExprKind::Unordered(alts) => {
                let sep = if matches!(self.kind, ExprKind::Ordered(_)) {
                    " / "
                } else {
                    " | "
                };
                for (i, alt) in alts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "{sep}")?;
                    }
                    alt.fmt_at(f, 1)?;
                }
                Ok(())
            }
            ExprKind::And(e) => {
                write!(f, "&")?;
                e.fmt_at(f, 2)
            }
            ExprKind::Not(e) => {
                write!(f, "!")?;
                e.fmt_at(f, 2)
            }
            ExprKind::Opt(e) => {
                e.fmt_at(f, 2)?;
                write!(f, "?")
            }
            ExprKind::Star(e) => {
                e.fmt_at(f, 2)?;
                write!(f, "*")
            }
            ExprKind::Plus(e) => {
                e.fmt_at(f, 2)?;
                write!(f, "+")
            }
            ExprKind::Group(e) => {
                write!(f, "(")?;
                e.fmt_at(f, 0)?;
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub name: String,
    pub body: Expr,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub rules: IndexMap<String, Rule>,
    pub start: String,
    pub tokens: Vec<TokenDef>,
    pub skip: Vec<TokenDef>,
}

impl Grammar {
    /// Builds a grammar from rules, defining every inline literal they use.
    /// The first rule is the start symbol.
    pub fn from_rules<S: Into<String>>(rules: impl IntoIterator<Item = (S, Expr)>) -> Grammar {
        let mut grammar = Grammar {
            rules: IndexMap::new(),
            start: String::new(),
            tokens: Vec::new(),
            skip: Vec::new(),
        };
        for (name, body) in rules {
            let name = name.into();
            if grammar.start.is_empty() {
                grammar.start = name.clone();
            }
            grammar.rules.insert(
                name.clone(),
                Rule {
                    name,
                    body,
                    loc: Loc::default(),
                },
            );
        }
        grammar.define_literals();
        grammar
    }

    /// Adds a literal token definition for every quoted literal referenced
    /// by a rule and not yet defined.
    pub fn define_literals(&mut self) {
        let mut found = Vec::new();
        for rule in self.rules.values() {
            rule.body.walk(&mut |e| {
                if let ExprKind::Literal(name) = &e.kind {
                    if name.starts_with('"') && !found.contains(name) {
                        found.push(name.clone());
                    }
                }
            });
        }
        for name in found {
            if self.tokens.iter().any(|t| t.name == name) {
                continue;
            }
            let text: String = serde_json::from_str(&name).unwrap_or_else(|_| name.trim_matches('"').to_string());
            self.tokens.push(TokenDef::literal(&text));
        }
    }

    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.get(name)
    }

    pub fn has_token(&self, name: &str) -> bool {
        name == END_TOKEN || self.tokens.iter().any(|t| t.name == name)
    }

    /// All token definitions, ordinary ones first.
    pub fn token_defs(&self) -> Vec<TokenDef> {
        self.tokens.iter().chain(self.skip.iter()).cloned().collect()
    }

    pub fn has_unordered(&self) -> bool {
        self.rules.values().any(|r| r.body.has_unordered())
    }

    /// Checks the structural invariants: references resolve, the start rule
    /// exists and token and nonterminal names are disjoint.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        if !self.rules.contains_key(&self.start) {
            diags.push(Diagnostic::new(
                Loc::default(),
                format!("start rule `{}` is not defined", self.start),
            ));
        }
        for token in self.tokens.iter().chain(&self.skip) {
            if self.rules.contains_key(&token.name) {
                diags.push(Diagnostic::new(
                    Loc::default(),
                    format!("`{}` is defined both as a token and as a rule", token.name),
                ));
            }
        }
        for rule in self.rules.values() {
            rule.body.walk(&mut |e| match &e.kind {
                ExprKind::Nonterminal(name) if !self.rules.contains_key(name) => {
                    diags.push(Diagnostic::new(e.loc, format!("unknown nonterminal `{name}`")));
                }
                ExprKind::Literal(name) if !self.has_token(name) => {
                    diags.push(Diagnostic::new(e.loc, format!("unknown token `{name}`")));
                }
                ExprKind::Literal(name) if self.skip.iter().any(|s| &s.name == name) => {
                    diags.push(Diagnostic::new(e.loc, format!("skip token `{name}` used in a rule")));
                }
                _ => {}
            });
        }
        diags
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start {} ;", self.start)?;
        for t in &self.tokens {
            if !t.is_literal {
                writeln!(f, "{} = /{}/ ;", t.name, t.pattern)?;
            }
        }
        for t in &self.skip {
            writeln!(f, "skip {} = /{}/ ;", t.name, t.pattern)?;
        }
        for rule in self.rules.values() {
            writeln!(f, "{} : {} ;", rule.name, rule.body)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_parenthesizes_nested_choices() {
        let e = Expr::seq(vec![
            Expr::group(Expr::ordered(vec![Expr::lit("a"), Expr::lit("b")])),
            Expr::star(Expr::nt("X")),
            Expr::not(Expr::seq(vec![Expr::lit("c"), Expr::lit("d")])),
        ]);
        assert_eq!(e.to_string(), r#"("a" / "b") X* !("c" "d")"#);
    }

    #[test]
    fn from_rules_defines_literals() {
        let g = Grammar::from_rules([
            ("S", Expr::seq(vec![Expr::lit("a"), Expr::nt("S")])),
            ("T", Expr::lit("a")),
        ]);
        assert_eq!(g.start, "S");
        assert_eq!(g.tokens, vec![TokenDef::literal("a")]);
        assert!(g.validate().is_empty());
    }

    #[test]
    fn validate_reports_unknown_names() {
        let g = Grammar::from_rules([("S", Expr::seq(vec![Expr::nt("Q"), Expr::token("id")]))]);
        let msgs: Vec<String> = g.validate().into_iter().map(|d| d.message).collect();
        assert_eq!(msgs, vec!["unknown nonterminal `Q`", "unknown token `id`"]);
    }
}
