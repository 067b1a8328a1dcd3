//! A small regular-expression dialect for token definitions and its
//! Thompson construction.
//!
//! Supported syntax: literal characters, escapes (`\n`, `\t`, `\r`, `\d`,
//! `\w`, `\s` and any escaped punctuation), character classes with ranges
//! and negation, `.`, grouping, alternation and the postfix operators `*`,
//! `+` and `?`. A quantifier may not directly follow another quantifier.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("regex error at offset {offset}: {message}")]
pub struct RegexError {
    pub offset: usize,
    pub message: String,
}

/// A set of characters given as inclusive ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharClass {
    pub ranges: Vec<(char, char)>,
    pub negated: bool,
}

impl CharClass {
    pub fn single(c: char) -> Self {
        CharClass {
            ranges: vec![(c, c)],
            negated: false,
        }
    }

    pub fn any() -> Self {
        CharClass {
            ranges: Vec::new(),
            negated: true,
        }
    }

    pub fn matches(&self, c: char) -> bool {
        let hit = self.ranges.iter().any(|&(lo, hi)| lo <= c && c <= hi);
        hit != self.negated
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Regex {
    /// Matches the empty string.
    Empty,
    Class(CharClass),
    Concat(Vec<Regex>),
    Alt(Vec<Regex>),
    Star(Box<Regex>),
    Plus(Box<Regex>),
    Opt(Box<Regex>),
}

impl Regex {
    pub fn parse(pattern: &str) -> Result<Regex, RegexError> {
        let mut p = RegexParser {
            chars: pattern.chars().collect(),
            pos: 0,
        };
        let re = p.alternation()?;
        if p.pos < p.chars.len() {
            return Err(p.error("unmatched ')'"));
        }
        Ok(re)
    }

    /// A regex matching exactly `text`.
    pub fn literal(text: &str) -> Regex {
        let parts: Vec<Regex> = text.chars().map(|c| Regex::Class(CharClass::single(c))).collect();
        match parts.len() {
            0 => Regex::Empty,
            1 => parts.into_iter().next().unwrap(),
            _ => Regex::Concat(parts),
        }
    }

    pub fn accepts_empty(&self) -> bool {
        match self {
            Regex::Empty | Regex::Star(_) | Regex::Opt(_) => true,
            Regex::Class(_) => false,
            Regex::Concat(parts) => parts.iter().all(Regex::accepts_empty),
            Regex::Alt(parts) => parts.iter().any(Regex::accepts_empty),
            Regex::Plus(inner) => inner.accepts_empty(),
        }
    }
}

/// Escapes `text` so that it parses back as a literal pattern.
pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' | '/' | '.' | '[' | ']' | '(' | ')' | '|' | '*' | '+' | '?' | '^' | '-' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

fn class_char(c: char) -> String {
    match c {
        '\\' | ']' | '[' | '^' | '-' => format!("\\{c}"),
        '\n' => "\\n".into(),
        '\t' => "\\t".into(),
        '\r' => "\\r".into(),
        _ => c.to_string(),
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regex::Empty => write!(f, "()"),
            Regex::Class(class) => {
                if class.negated && class.ranges.is_empty() {
                    return write!(f, ".");
                }
                if !class.negated && class.ranges.len() == 1 && class.ranges[0].0 == class.ranges[0].1 {
                    return write!(f, "{}", escape(&class.ranges[0].0.to_string()));
                }
                write!(f, "[")?;
                if class.negated {
                    write!(f, "^")?;
                }
                for &(lo, hi) in &class.ranges {
                    if lo == hi {
                        write!(f, "{}", class_char(lo))?;
                    } else {
                        write!(f, "{}-{}", class_char(lo), class_char(hi))?;
                    }
                }
                write!(f, "]")
            }
            Regex::Concat(parts) => {
                for part in parts {
                    match part {
                        Regex::Alt(_) | Regex::Concat(_) => write!(f, "({part})")?,
                        _ => write!(f, "{part}")?,
                    }
                }
                Ok(())
            }
            Regex::Alt(parts) => {
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "|")?;
                    }
                    match part {
                        Regex::Alt(_) => write!(f, "({part})")?,
                        _ => write!(f, "{part}")?,
                    }
                }
                Ok(())
            }
            Regex::Star(inner) => write_postfix(f, inner, '*'),
            Regex::Plus(inner) => write_postfix(f, inner, '+'),
            Regex::Opt(inner) => write_postfix(f, inner, '?'),
        }
    }
}

fn write_postfix(f: &mut fmt::Formatter<'_>, inner: &Regex, op: char) -> fmt::Result {
    match inner {
        Regex::Class(_) => write!(f, "{inner}{op}"),
        Regex::Empty => write!(f, "(){op}"),
        _ => write!(f, "({inner}){op}"),
    }
}

struct RegexParser {
    chars: Vec<char>,
    pos: usize,
}

impl RegexParser {
    fn error(&self, message: &str) -> RegexError {
        RegexError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn alternation(&mut self) -> Result<Regex, RegexError> {
        let mut alts = vec![self.concat()?];
        while self.peek() == Some('|') {
            self.pos += 1;
            alts.push(self.concat()?);
        }
        Ok(if alts.len() == 1 {
            alts.pop().unwrap()
        } else {
            Regex::Alt(alts)
        })
    }

    fn concat(&mut self) -> Result<Regex, RegexError> {
        let mut parts = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            parts.push(self.postfix()?);
        }
        Ok(match parts.len() {
            0 => Regex::Empty,
            1 => parts.pop().unwrap(),
            _ => Regex::Concat(parts),
        })
    }

    fn postfix(&mut self) -> Result<Regex, RegexError> {
        let mut atom = self.atom()?;
        if let Some(op) = self.peek().filter(|c| matches!(c, '*' | '+' | '?')) {
            self.pos += 1;
            atom = match op {
                '*' => Regex::Star(Box::new(atom)),
                '+' => Regex::Plus(Box::new(atom)),
                _ => Regex::Opt(Box::new(atom)),
            };
            if matches!(self.peek(), Some('*' | '+' | '?')) {
                return Err(self.error("repeated quantifier"));
            }
        }
        Ok(atom)
    }

    fn atom(&mut self) -> Result<Regex, RegexError> {
        let c = self.peek().ok_or_else(|| self.error("unexpected end of pattern"))?;
        self.pos += 1;
        match c {
            '(' => {
                let inner = self.alternation()?;
                if self.peek() != Some(')') {
                    return Err(self.error("missing ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            '[' => self.class(),
            '.' => Ok(Regex::Class(CharClass::any())),
            '*' | '+' | '?' => {
                self.pos -= 1;
                Err(self.error("quantifier without operand"))
            }
            '\\' => self.escape(),
            _ => Ok(Regex::Class(CharClass::single(c))),
        }
    }

    fn escape(&mut self) -> Result<Regex, RegexError> {
        let c = self.peek().ok_or_else(|| self.error("dangling escape"))?;
        self.pos += 1;
        Ok(Regex::Class(match c {
            'd' => CharClass {
                ranges: vec![('0', '9')],
                negated: false,
            },
            'w' => CharClass {
                ranges: vec![('0', '9'), ('A', 'Z'), ('_', '_'), ('a', 'z')],
                negated: false,
            },
            's' => CharClass {
                ranges: vec![('\t', '\n'), ('\r', '\r'), (' ', ' ')],
                negated: false,
            },
            _ => CharClass::single(unescape(c)),
        }))
    }

    fn class_member(&mut self) -> Result<char, RegexError> {
        let c = self.peek().ok_or_else(|| self.error("unterminated character class"))?;
        self.pos += 1;
        if c == '\\' {
            let e = self.peek().ok_or_else(|| self.error("dangling escape"))?;
            self.pos += 1;
            return Ok(unescape(e));
        }
        Ok(c)
    }

    fn class(&mut self) -> Result<Regex, RegexError> {
        let mut class = CharClass {
            ranges: Vec::new(),
            negated: false,
        };
        if self.peek() == Some('^') {
            class.negated = true;
            self.pos += 1;
        }
        loop {
            match self.peek() {
                None => return Err(self.error("unterminated character class")),
                Some(']') => {
                    self.pos += 1;
                    break;
                }
                Some(_) => {
                    let lo = self.class_member()?;
                    let hi = if self.peek() == Some('-') && self.chars.get(self.pos + 1).is_some_and(|&c| c != ']') {
                        self.pos += 1;
                        self.class_member()?
                    } else {
                        lo
                    };
                    if hi < lo {
                        return Err(self.error("inverted range in character class"));
                    }
                    class.ranges.push((lo, hi));
                }
            }
        }
        if class.ranges.is_empty() && !class.negated {
            return Err(self.error("empty character class"));
        }
        Ok(Regex::Class(class))
    }
}

fn unescape(c: char) -> char {
    match c {
        'n' => '\n',
        't' => '\t',
        'r' => '\r',
        other => other,
    }
}

/// State of a Thompson automaton. `Split` and `Jump` are epsilon moves.
#[derive(Debug, Clone)]
pub(crate) enum State {
    Char(CharClass, usize),
    Split(usize, usize),
    Jump(usize),
    Accept(usize),
}

/// Thompson NFA over several patterns; each pattern ends in its own
/// `Accept` state tagged with the pattern's index.
#[derive(Debug, Clone)]
pub(crate) struct Nfa {
    states: Vec<State>,
    starts: Vec<usize>,
    patterns: usize,
}

impl Nfa {
    pub(crate) fn build(patterns: &[Regex]) -> Nfa {
        let mut nfa = Nfa {
            states: Vec::new(),
            starts: Vec::new(),
            patterns: patterns.len(),
        };
        for (idx, re) in patterns.iter().enumerate() {
            let accept = nfa.push(State::Accept(idx));
            let start = nfa.compile(re, accept);
            nfa.starts.push(start);
        }
        nfa
    }

    fn push(&mut self, state: State) -> usize {
        self.states.push(state);
        self.states.len() - 1
    }

    /// Compiles `re` so that it continues to `next`; returns the entry state.
    fn compile(&mut self, re: &Regex, next: usize) -> usize {
        match re {
            Regex::Empty => self.push(State::Jump(next)),
            Regex::Class(class) => self.push(State::Char(class.clone(), next)),
            Regex::Concat(parts) => parts.iter().rev().fold(next, |acc, part| self.compile(part, acc)),
            Regex::Alt(parts) => {
                let entries: Vec<usize> = parts.iter().map(|p| self.compile(p, next)).collect();
                entries
                    .into_iter()
                    .rev()
                    .reduce(|acc, entry| self.push(State::Split(entry, acc)))
                    .expect("alternation has at least one branch")
            }
            Regex::Star(inner) => {
                let split = self.push(State::Split(usize::MAX, next));
                let body = self.compile(inner, split);
                self.states[split] = State::Split(body, next);
                split
            }
            Regex::Plus(inner) => {
                let split = self.push(State::Split(usize::MAX, next));
                let body = self.compile(inner, split);
                self.states[split] = State::Split(body, next);
                body
            }
            Regex::Opt(inner) => {
                let body = self.compile(inner, next);
                self.push(State::Split(body, next))
            }
        }
    }

    fn add_closure(&self, state: usize, set: &mut Vec<usize>, seen: &mut [bool]) {
        let mut stack = vec![state];
        while let Some(s) = stack.pop() {
            if std::mem::replace(&mut seen[s], true) {
                continue;
            }
            match self.states[s] {
                State::Split(a, b) => {
                    stack.push(b);
                    stack.push(a);
                }
                State::Jump(a) => stack.push(a),
                State::Char(..) | State::Accept(_) => set.push(s),
            }
        }
    }

    /// Scans `input` from `start` once and returns, for every pattern, the
    /// end of its longest match (exclusive), if any.
    pub(crate) fn longest_matches(&self, input: &[char], start: usize) -> Vec<Option<usize>> {
        let mut best = vec![None; self.patterns];
        let mut seen = vec![false; self.states.len()];
        let mut current = Vec::new();
        for &s in &self.starts {
            self.add_closure(s, &mut current, &mut seen);
        }
        let mut pos = start;
        loop {
            for &s in &current {
                if let State::Accept(idx) = self.states[s] {
                    best[idx] = Some(pos);
                }
            }
            let Some(&c) = input.get(pos) else { break };
            seen.iter_mut().for_each(|b| *b = false);
            let mut next = Vec::new();
            for &s in &current {
                if let State::Char(ref class, to) = self.states[s] {
                    if class.matches(c) {
                        self.add_closure(to, &mut next, &mut seen);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            current = next;
            pos += 1;
        }
        best
    }
}
