//! All-matches lexing.
//!
//! Instead of committing to one maximal-munch token, [`LexTable::scan`]
//! reports every token type that matches at a position together with its
//! greatest right extent. The parser then decides which one to consume.

pub mod regex;

use std::fmt;

use thiserror::Error;

use self::regex::Nfa;
pub use self::regex::{Regex, RegexError};

/// Name of the reserved end-of-input token.
pub const END_TOKEN: &str = "$";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenDef {
    pub name: String,
    /// Regex source; for literal tokens this is the literal text itself.
    pub pattern: String,
    pub is_skip: bool,
    pub is_literal: bool,
}

impl TokenDef {
    pub fn regex(name: impl Into<String>, pattern: impl Into<String>) -> Self {
        TokenDef {
            name: name.into(),
            pattern: pattern.into(),
            is_skip: false,
            is_literal: false,
        }
    }

    pub fn skip(name: impl Into<String>, pattern: impl Into<String>) -> Self {
        TokenDef {
            is_skip: true,
            ..TokenDef::regex(name, pattern)
        }
    }

    /// An exact-match token named after its quoted text, e.g. `"if"`.
    pub fn literal(text: &str) -> Self {
        TokenDef {
            name: literal_token_name(text),
            pattern: text.to_string(),
            is_skip: false,
            is_literal: true,
        }
    }

    fn to_regex(&self) -> Result<Regex, RegexError> {
        if self.is_literal {
            Ok(Regex::literal(&self.pattern))
        } else {
            Regex::parse(&self.pattern)
        }
    }
}

/// Token name used for an inline grammar literal.
pub fn literal_token_name(text: &str) -> String {
    serde_json::to_string(text).expect("strings always serialize")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("token `{name}`: {source}")]
    Syntax { name: String, source: RegexError },
    #[error("token `{name}`: pattern accepts empty string")]
    AcceptsEmpty { name: String },
    #[error("token `{name}` defined more than once")]
    Duplicate { name: String },
    #[error("token name `{END_TOKEN}` is reserved")]
    Reserved,
}

/// Compiled token automata: one combined NFA for ordinary tokens and one
/// for skip tokens.
#[derive(Debug, Clone)]
pub struct LexTable {
    names: Vec<String>,
    literal: Vec<bool>,
    tokens: Nfa,
    skips: Nfa,
    skip_names: Vec<String>,
}

impl LexTable {
    pub fn compile(defs: &[TokenDef]) -> Result<LexTable, Vec<LexError>> {
        let mut errors = Vec::new();
        let mut names: Vec<String> = Vec::new();
        let mut literal = Vec::new();
        let mut token_res = Vec::new();
        let mut skip_names: Vec<String> = Vec::new();
        let mut skip_res = Vec::new();
        for def in defs {
            if def.name == END_TOKEN {
                errors.push(LexError::Reserved);
                continue;
            }
            if names.contains(&def.name) || skip_names.contains(&def.name) {
                errors.push(LexError::Duplicate { name: def.name.clone() });
                continue;
            }
            let re = match def.to_regex() {
                Ok(re) => re,
                Err(source) => {
                    errors.push(LexError::Syntax {
                        name: def.name.clone(),
                        source,
                    });
                    continue;
                }
            };
            if re.accepts_empty() {
                errors.push(LexError::AcceptsEmpty { name: def.name.clone() });
                continue;
            }
            if def.is_skip {
                skip_names.push(def.name.clone());
                skip_res.push(re);
            } else {
                names.push(def.name.clone());
                literal.push(def.is_literal);
                token_res.push(re);
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(LexTable {
            names,
            literal,
            tokens: Nfa::build(&token_res),
            skips: Nfa::build(&skip_res),
            skip_names,
        })
    }

    /// Number of token ids, including the end token.
    pub fn len(&self) -> usize {
        self.names.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end_token(&self) -> TokenId {
        TokenId(self.names.len() as u32)
    }

    pub fn name(&self, id: TokenId) -> &str {
        self.names.get(id.index()).map(String::as_str).unwrap_or(END_TOKEN)
    }

    pub fn is_literal(&self, id: TokenId) -> bool {
        self.literal.get(id.index()).copied().unwrap_or(false)
    }

    pub fn lookup(&self, name: &str) -> Option<TokenId> {
        if name == END_TOKEN {
            return Some(self.end_token());
        }
        self.names.iter().position(|n| n == name).map(|i| TokenId(i as u32))
    }

    pub fn skip_names(&self) -> &[String] {
        &self.skip_names
    }

    /// Advances past skip tokens, each time consuming the longest skip match.
    pub fn skip_from(&self, input: &[char], mut pos: usize) -> usize {
        while let Some(end) = self.skips.longest_matches(input, pos).into_iter().flatten().max() {
            pos = end;
        }
        pos
    }

    /// The all-matching-tokens map at `pos`, computed without memoization.
    pub fn scan(&self, input: &[char], pos: usize) -> TokenMap {
        let base = self.skip_from(input, pos);
        let mut entries: Vec<(TokenId, usize)> = self
            .tokens
            .longest_matches(input, base)
            .into_iter()
            .enumerate()
            .filter_map(|(i, end)| end.map(|e| (TokenId(i as u32), e)))
            .collect();
        if base == input.len() {
            entries.push((self.end_token(), input.len()));
        }
        TokenMap { base, entries }
    }
}

/// Tokens matching at a position, each with its greatest right extent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMap {
    /// Position after skip tokens were consumed.
    pub base: usize,
    /// Sorted by token id.
    pub entries: Vec<(TokenId, usize)>,
}

impl TokenMap {
    pub fn get(&self, id: TokenId) -> Option<usize> {
        self.entries
            .binary_search_by_key(&id, |&(t, _)| t)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, usize)> + '_ {
        self.entries.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn display<'a>(&'a self, table: &'a LexTable) -> impl fmt::Display + 'a {
        DisplayMap { map: self, table }
    }
}

struct DisplayMap<'a> {
    map: &'a TokenMap,
    table: &'a LexTable,
}

impl fmt::Display for DisplayMap<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (tok, end)) in self.map.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", self.table.name(tok), end)?;
        }
        write!(f, "}}")
    }
}

/// Per-parse view of an input with memoized token maps.
#[derive(Debug)]
pub struct LexSession<'a> {
    table: &'a LexTable,
    input: Vec<char>,
    memo: Vec<Option<TokenMap>>,
}

impl<'a> LexSession<'a> {
    pub fn new(table: &'a LexTable, input: &str) -> Self {
        let input: Vec<char> = input.chars().collect();
        let memo = vec![None; input.len() + 1];
        LexSession { table, input, memo }
    }

    pub fn table(&self) -> &'a LexTable {
        self.table
    }

    pub fn input(&self) -> &[char] {
        &self.input
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    pub fn tokens(&mut self, pos: usize) -> &TokenMap {
        let slot = &mut self.memo[pos];
        if slot.is_none() {
            *slot = Some(self.table.scan(&self.input, pos));
        }
        slot.as_ref().unwrap()
    }

    pub fn skip_from(&mut self, pos: usize) -> usize {
        self.tokens(pos).base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(defs: &[TokenDef]) -> LexTable {
        LexTable::compile(defs).unwrap()
    }

    fn chars(s: &str) -> Vec<char> {
        s.chars().collect()
    }

    #[test]
    fn single_token_table() {
        let t = table(&[TokenDef::regex("a", "a")]);
        assert_eq!(t.len(), 2);
        assert_eq!(t.lookup("a"), Some(TokenId(0)));
        assert_eq!(t.lookup("$"), Some(t.end_token()));
    }

    #[test]
    fn compile_errors() {
        let err = LexTable::compile(&[TokenDef::regex("a", "a**")]).unwrap_err();
        assert!(matches!(&err[0], LexError::Syntax { .. }));
        let err = LexTable::compile(&[TokenDef::regex("x", "(x|)")]).unwrap_err();
        assert_eq!(err, vec![LexError::AcceptsEmpty { name: "x".into() }]);
        assert_eq!(err[0].to_string(), "token `x`: pattern accepts empty string");
        let err = LexTable::compile(&[TokenDef::regex("a", "a"), TokenDef::regex("a", "b")]).unwrap_err();
        assert!(matches!(&err[0], LexError::Duplicate { .. }));
        assert!(LexTable::compile(&[TokenDef::literal("")]).is_err());
    }

    #[test]
    fn all_tokens_with_greatest_extent() {
        let t = table(&[TokenDef::regex("a", "a"), TokenDef::regex("aa", "aa")]);
        let input = chars("aaa");
        let map = t.scan(&input, 0);
        assert_eq!(map.base, 0);
        assert_eq!(map.entries, vec![(TokenId(0), 1), (TokenId(1), 2)]);
        assert_eq!(map.display(&t).to_string(), "{a:1, aa:2}");
    }

    #[test]
    fn end_token_only_at_end() {
        let t = table(&[TokenDef::regex("a", "a"), TokenDef::regex("aa", "aa")]);
        let input = chars("aaa");
        let map = t.scan(&input, 3);
        assert_eq!(map.entries, vec![(t.end_token(), 3)]);
        assert_eq!(t.scan(&input, 2).get(t.end_token()), None);
    }

    #[test]
    fn skip_prefix_is_consumed() {
        let t = table(&[TokenDef::regex("id", "[a-z]+"), TokenDef::skip("ws", " +")]);
        let input = chars("  ab");
        let map = t.scan(&input, 0);
        assert_eq!(map.base, 2);
        assert_eq!(map.entries, vec![(TokenId(0), 4)]);
        let trailing = chars("ab  ");
        assert_eq!(t.scan(&trailing, 2).entries, vec![(t.end_token(), 4)]);
    }

    #[test]
    fn alternating_skip_tokens_reach_fixpoint() {
        let t = table(&[
            TokenDef::regex("x", "x"),
            TokenDef::skip("ws", " +"),
            TokenDef::skip("comment", "#[^\\n]*\\n"),
        ]);
        let input = chars("  # hi\n  #\nx");
        assert_eq!(t.skip_from(&input, 0), 11);
    }

    #[test]
    fn memo_is_transparent() {
        let t = table(&[
            TokenDef::regex("id", "[a-z]+"),
            TokenDef::literal("ab"),
            TokenDef::skip("ws", " "),
        ]);
        let text = "ab abc  a";
        let mut session = LexSession::new(&t, text);
        let input = chars(text);
        for pos in 0..=input.len() {
            let fresh = t.scan(&input, pos);
            assert_eq!(session.tokens(pos), &fresh);
            assert_eq!(session.tokens(pos), &fresh);
        }
    }

    #[test]
    fn literal_names_are_quoted() {
        assert_eq!(TokenDef::literal("if").name, "\"if\"");
        let t = table(&[TokenDef::literal("a*")]);
        assert_eq!(t.scan(&chars("a*"), 0).entries, vec![(TokenId(0), 2)]);
    }
}
