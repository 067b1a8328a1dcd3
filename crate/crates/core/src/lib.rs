//! Generalized LL parsing for parsing expression grammars.
//!
//! Grammars mix PEG ordered choice (`/`) and lookahead (`&`, `!`) with
//! context-free unordered choice (`|`). The engine returns every match
//! extent together with a BSR set from which parse trees can be read.
//!
//! ```
//! use pegll::{parse, CompiledGrammar};
//!
//! let g = CompiledGrammar::from_dsl(r#"S : "a" | "a" "b" ;"#).unwrap();
//! let r = parse(&g, "ab");
//! assert_eq!(r.extents.into_iter().collect::<Vec<_>>(), vec![1, 2]);
//! ```

pub mod cli;
pub mod engine;
pub mod forest;
pub mod grammar;
pub mod lexer;
pub mod oracle;

pub use engine::{parse, parse_with, BsrElement, Outcome, ParseOptions, ParseResult};
pub use forest::{Forest, ParseTree};
pub use grammar::{CompiledGrammar, GrammarError};
pub use oracle::{EvalResult, Oracle};
