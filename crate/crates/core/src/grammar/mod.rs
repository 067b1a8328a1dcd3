//! Grammar front end: DSL, desugaring, analyses and slot compilation.

pub mod analysis;
pub mod ast;
pub mod desugar;
pub mod dsl;
pub mod slots;

use std::fmt;

use thiserror::Error;

pub use self::analysis::{check_left_recursion, compute_first, compute_nullable, FirstSets, Nullable};
pub use self::ast::{Diagnostic, Expr, ExprKind, Grammar, Loc, Rule};
pub use self::desugar::desugar;
pub use self::dsl::parse_grammar;
pub use self::slots::{Atom, NtId, SlotId, SlotKind, SlotTable, TokenSet};
use crate::lexer::LexTable;

/// Every problem found while loading a grammar.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct GrammarError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for GrammarError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl GrammarError {
    fn new(diagnostics: Vec<Diagnostic>) -> Self {
        GrammarError { diagnostics }
    }
}

/// A grammar ready to parse with: desugared, checked for left recursion,
/// with its lexer and slot table built.
#[derive(Debug, Clone)]
pub struct CompiledGrammar {
    /// The grammar as written.
    pub source: Grammar,
    /// The desugared grammar the slots were compiled from.
    pub core: Grammar,
    pub lex: LexTable,
    pub slots: SlotTable,
}

impl CompiledGrammar {
    pub fn from_dsl(text: &str) -> Result<Self, GrammarError> {
        let grammar = parse_grammar(text).map_err(GrammarError::new)?;
        Self::new(grammar)
    }

    pub fn new(source: Grammar) -> Result<Self, GrammarError> {
        let diags = source.validate();
        if !diags.is_empty() {
            return Err(GrammarError::new(diags));
        }
        let core = desugar(&source);
        let diags = check_left_recursion(&core);
        if !diags.is_empty() {
            return Err(GrammarError::new(diags));
        }
        let lex = LexTable::compile(&core.token_defs()).map_err(|errs| {
            GrammarError::new(
                errs.into_iter()
                    .map(|e| Diagnostic::new(Loc::default(), e.to_string()))
                    .collect(),
            )
        })?;
        let slots = slots::compile_slots(&core, &lex);
        Ok(CompiledGrammar {
            source,
            core,
            lex,
            slots,
        })
    }

    pub fn nullable(&self) -> Nullable {
        compute_nullable(&self.core)
    }

    pub fn first(&self) -> FirstSets {
        compute_first(&self.core, &self.nullable())
    }
}
