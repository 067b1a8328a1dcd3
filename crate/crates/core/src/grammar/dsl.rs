//! Parser for the grammar DSL.
//!
//! ```text
//! // comment
//! start Expr ;
//! num = /[0-9]+/ ;
//! skip ws = / +/ ;
//! Expr : Term ("+" Term)* ;
//! Term : num / "(" Expr ")" ;
//! ```
//!
//! A rule uses either `/` (ordered) or `|` (unordered) between its
//! alternates, never both at the same level.

use indexmap::IndexMap;

use super::ast::{Diagnostic, Expr, ExprKind, Grammar, Loc, Rule};
use crate::lexer::{literal_token_name, Regex, TokenDef, END_TOKEN};

/// Parses DSL text into a grammar with every identifier resolved to either
/// a token or a nonterminal.
pub fn parse_grammar(text: &str) -> Result<Grammar, Vec<Diagnostic>> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        diags: Vec::new(),
    };
    let mut rules: IndexMap<String, Rule> = IndexMap::new();
    let mut tokens: Vec<(TokenDef, Loc)> = Vec::new();
    let mut start: Option<(String, Loc)> = None;

    loop {
        p.skip_trivia();
        if p.at_end() {
            break;
        }
        match p.statement() {
            Some(Statement::Start(name, loc)) => {
                if start.is_some() {
                    p.diags.push(Diagnostic::new(loc, "duplicate start directive"));
                }
                start = Some((name, loc));
            }
            Some(Statement::Token(def, loc)) => tokens.push((def, loc)),
            Some(Statement::Rule(rule)) => {
                if rules.contains_key(&rule.name) {
                    p.diags
                        .push(Diagnostic::new(rule.loc, format!("duplicate rule `{}`", rule.name)));
                } else {
                    rules.insert(rule.name.clone(), rule);
                }
            }
            None => p.recover(),
        }
    }
    let mut diags = p.diags;

    let mut named: Vec<String> = Vec::new();
    for (def, loc) in &tokens {
        if def.name == END_TOKEN {
            diags.push(Diagnostic::new(*loc, "token name `$` is reserved"));
        } else if named.contains(&def.name) {
            diags.push(Diagnostic::new(*loc, format!("duplicate token `{}`", def.name)));
        } else if rules.contains_key(&def.name) {
            diags.push(Diagnostic::new(
                *loc,
                format!("`{}` is defined both as a token and as a rule", def.name),
            ));
        }
        named.push(def.name.clone());
        match Regex::parse(&def.pattern) {
            Err(e) => diags.push(Diagnostic::new(*loc, format!("token `{}`: {e}", def.name))),
            Ok(re) if re.accepts_empty() => diags.push(Diagnostic::new(
                *loc,
                format!("token `{}`: pattern accepts empty string", def.name),
            )),
            Ok(_) => {}
        }
    }

    let start = match start {
        Some((name, loc)) => {
            if !rules.contains_key(&name) {
                diags.push(Diagnostic::new(loc, format!("start rule `{name}` is not defined")));
            }
            name
        }
        None => match rules.keys().next() {
            Some(first) => first.clone(),
            None => {
                if diags.is_empty() {
                    diags.push(Diagnostic::new(Loc { line: 1, col: 1 }, "grammar has no rules"));
                }
                String::new()
            }
        },
    };

    for rule in rules.values_mut() {
        resolve(&mut rule.body, &named);
    }
    let known: Vec<String> = rules.keys().cloned().collect();
    for rule in rules.values() {
        rule.body.walk(&mut |e| {
            if let ExprKind::Nonterminal(name) = &e.kind {
                if !known.contains(name) {
                    diags.push(Diagnostic::new(e.loc, format!("unknown nonterminal `{name}`")));
                }
            }
        });
    }

    if !diags.is_empty() {
        diags.sort_by_key(|d| d.loc);
        return Err(diags);
    }

    let (skip, tokens): (Vec<TokenDef>, Vec<TokenDef>) = tokens.into_iter().map(|(d, _)| d).partition(|d| d.is_skip);
    let mut grammar = Grammar {
        rules,
        start,
        tokens,
        skip,
    };
    grammar.define_literals();
    Ok(grammar)
}

/// Identifiers naming a token become `Literal` references.
fn resolve(e: &mut Expr, tokens: &[String]) {
    match &mut e.kind {
        ExprKind::Nonterminal(name) if tokens.contains(name) => {
            e.kind = ExprKind::Literal(std::mem::take(name));
        }
        ExprKind::Seq(items) | ExprKind::Ordered(items) | ExprKind::Unordered(items) => {
            items.iter_mut().for_each(|i| resolve(i, tokens))
        }
        ExprKind::And(inner)
        | ExprKind::Not(inner)
        | ExprKind::Opt(inner)
        | ExprKind::Star(inner)
        | ExprKind::Plus(inner)
        | ExprKind::Group(inner) => resolve(inner, tokens),
        _ => {}
    }
}

enum Statement {
    Start(String, Loc),
    Token(TokenDef, Loc),
    Rule(Rule),
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    diags: Vec<Diagnostic>,
}

impl Parser {
    fn loc(&self) -> Loc {
        Loc {
            line: self.line,
            col: self.col,
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&mut self, loc: Loc, message: impl Into<String>) {
        self.diags.push(Diagnostic::new(loc, message));
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek_at(1) == Some('/') => {
                    while self.peek().is_some_and(|c| c != '\n') {
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    /// Skips to just past the next `;`.
    fn recover(&mut self) {
        while let Some(c) = self.bump() {
            if c == ';' {
                break;
            }
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_trivia();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Option<()> {
        if self.eat(c) {
            Some(())
        } else {
            let loc = self.loc();
            let found = self.peek().map_or("end of input".to_string(), |f| format!("`{f}`"));
            self.error(loc, format!("expected `{c}`, found {found}"));
            None
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.skip_trivia();
        let start = self.pos;
        if !self.peek().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') {
            return None;
        }
        while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        Some(self.chars[start..self.pos].iter().collect())
    }

    fn expect_ident(&mut self) -> Option<String> {
        let loc = self.loc();
        let id = self.ident();
        if id.is_none() {
            self.error(loc, "expected identifier");
        }
        id
    }

    fn statement(&mut self) -> Option<Statement> {
        self.skip_trivia();
        let loc = self.loc();
        let word = self.expect_ident()?;
        match word.as_str() {
            "start" => {
                let name = self.expect_ident()?;
                self.expect(';')?;
                Some(Statement::Start(name, loc))
            }
            "skip" => {
                let name = self.expect_ident()?;
                let pattern = self.token_pattern()?;
                Some(Statement::Token(TokenDef::skip(name, pattern), loc))
            }
            "eps" => {
                self.error(loc, "`eps` is reserved");
                None
            }
            _ => {
                self.skip_trivia();
                match self.peek() {
                    Some('=') => {
                        let pattern = self.token_pattern()?;
                        Some(Statement::Token(TokenDef::regex(word, pattern), loc))
                    }
                    Some(':') => {
                        self.bump();
                        let body = self.choice()?;
                        self.expect(';')?;
                        Some(Statement::Rule(Rule { name: word, body, loc }))
                    }
                    _ => {
                        let here = self.loc();
                        self.error(here, format!("expected `:` or `=` after `{word}`"));
                        None
                    }
                }
            }
        }
    }

    /// `= /regex/ ;`
    fn token_pattern(&mut self) -> Option<String> {
        self.expect('=')?;
        self.expect('/')?;
        let mut pattern = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    let loc = self.loc();
                    self.error(loc, "unterminated regex");
                    return None;
                }
                Some('/') => break,
                Some('\\') => {
                    let Some(next) = self.bump() else { continue };
                    if next != '/' {
                        pattern.push('\\');
                    }
                    pattern.push(next);
                }
                Some(c) => pattern.push(c),
            }
        }
        self.expect(';')?;
        Some(pattern)
    }

    fn choice(&mut self) -> Option<Expr> {
        self.skip_trivia();
        let loc = self.loc();
        let mut alts = vec![self.sequence()?];
        let mut op: Option<char> = None;
        loop {
            self.skip_trivia();
            let here = self.loc();
            let c = match self.peek() {
                Some(c @ ('/' | '|')) => c,
                _ => break,
            };
            self.bump();
            match op {
                Some(prev) if prev != c => {
                    self.error(
                        here,
                        "mixed choice operators `/` and `|`; parenthesize the nested choice",
                    );
                    return None;
                }
                _ => op = Some(c),
            }
            alts.push(self.sequence()?);
        }
        Some(match op {
            None => alts.pop().unwrap(),
            Some('/') => Expr::ordered(alts).at(loc),
            Some(_) => Expr::unordered(alts).at(loc),
        })
    }

    fn sequence(&mut self) -> Option<Expr> {
        self.skip_trivia();
        let loc = self.loc();
        let mut items = Vec::new();
        loop {
            self.skip_trivia();
            match self.peek() {
                None | Some('/' | '|' | ')' | ';') => break,
                _ => items.push(self.prefixed()?),
            }
        }
        if items.is_empty() {
            self.error(loc, "empty alternative; write `eps` to match nothing");
            return None;
        }
        Some(Expr::seq(items).at(loc))
    }

    fn prefixed(&mut self) -> Option<Expr> {
        self.skip_trivia();
        let loc = self.loc();
        match self.peek() {
            Some('&') => {
                self.bump();
                Some(Expr::and(self.prefixed()?).at(loc))
            }
            Some('!') => {
                self.bump();
                Some(Expr::not(self.prefixed()?).at(loc))
            }
            _ => self.suffixed(),
        }
    }

    fn suffixed(&mut self) -> Option<Expr> {
        self.skip_trivia();
        let loc = self.loc();
        let mut e = self.primary()?;
        loop {
            let wrap: fn(Expr) -> Expr = match self.peek() {
                Some('?') => Expr::opt,
                Some('*') => Expr::star,
                Some('+') => Expr::plus,
                _ => break,
            };
            self.bump();
            e = wrap(e).at(loc);
        }
        Some(e)
    }

    fn primary(&mut self) -> Option<Expr> {
        self.skip_trivia();
        let loc = self.loc();
        match self.peek() {
            Some('"') => {
                let text = self.string()?;
                if text.is_empty() {
                    self.error(loc, "empty literal; write `eps` to match nothing");
                    return None;
                }
                Some(Expr::new(ExprKind::Literal(literal_token_name(&text))).at(loc))
            }
            Some('$') => {
                self.bump();
                Some(Expr::token(END_TOKEN).at(loc))
            }
            Some('(') => {
                self.bump();
                let inner = self.choice()?;
                self.expect(')')?;
                Some(Expr::group(inner).at(loc))
            }
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                let id = self.ident()?;
                match id.as_str() {
                    "eps" => Some(Expr::eps().at(loc)),
                    "start" | "skip" => {
                        self.error(loc, format!("`{id}` is a reserved word"));
                        None
                    }
                    _ => Some(Expr::nt(&id).at(loc)),
                }
            }
            Some(c) => {
                self.error(loc, format!("unexpected `{c}`"));
                None
            }
            None => {
                self.error(loc, "unexpected end of input");
                None
            }
        }
    }

    fn string(&mut self) -> Option<String> {
        let loc = self.loc();
        self.bump();
        let mut text = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    self.error(loc, "unterminated string literal");
                    return None;
                }
                Some('"') => return Some(text),
                Some('\\') => match self.bump() {
                    Some('n') => text.push('\n'),
                    Some('t') => text.push('\t'),
                    Some('r') => text.push('\r'),
                    Some(c) => text.push(c),
                    None => {
                        self.error(loc, "unterminated string literal");
                        return None;
                    }
                },
                Some(c) => text.push(c),
            }
        }
    }
}
