//! The `pegll` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::engine::{parse_with, BsrElement, ParseOptions, ParseResult};
use crate::forest::Forest;
use crate::grammar::CompiledGrammar;
use crate::oracle::{self, EvalResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_MATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pegll",
    version,
    about = "Generalized parsing for PEGs with unordered choice"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a grammar and print its analyses and slot table.
    Check {
        grammar: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Parse an input and report match extents.
    Parse {
        #[command(flatten)]
        io: InputArgs,
        /// Print up to N parse trees.
        #[arg(long, value_name = "N")]
        trees: Option<usize>,
        /// Print the BSR set.
        #[arg(long)]
        bsr: bool,
        /// Print every match extent.
        #[arg(long)]
        extents: bool,
        /// Print the engine trace.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        json: bool,
    },
    /// Run the engine and the reference interpreter and compare results.
    Compare {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
struct InputArgs {
    grammar: PathBuf,
    /// Input file.
    input: Option<PathBuf>,
    /// Inline input instead of a file.
    #[arg(short = 'e', value_name = "STRING", conflicts_with = "input")]
    expr: Option<String>,
    /// Accept only matches covering the whole input.
    #[arg(long)]
    full: bool,
}

struct Failure(i32);

type Outcome = Result<i32, Failure>;

/// Runs the command line with `args` (including the program name) and
/// returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Check { grammar, json } => check(&grammar, json, out, err),
        Command::Parse {
            io,
            trees,
            bsr,
            extents,
            trace,
            json,
        } => {
            let flags = ParseFlags {
                trees,
                bsr,
                extents,
                trace,
                json,
            };
            parse_cmd(&io, &flags, out, err)
        }
        Command::Compare { io, json } => compare(&io, json, out, err),
    };
    match result {
        Ok(code) | Err(Failure(code)) => code,
    }
}

fn load_grammar(path: &Path, err: &mut dyn Write) -> Result<CompiledGrammar, Failure> {
    let text = fs::read_to_string(path).map_err(|e| {
        let _ = writeln!(err, "error: cannot read grammar {}: {e}", path.display());
        Failure(EXIT_USAGE)
    })?;
    CompiledGrammar::from_dsl(&text).map_err(|e| {
        for d in &e.diagnostics {
            let _ = writeln!(err, "{}:{d}", path.display());
        }
        Failure(EXIT_USAGE)
    })
}

fn load_input(io: &InputArgs, err: &mut dyn Write) -> Result<String, Failure> {
    match (&io.input, &io.expr) {
        (_, Some(text)) => Ok(text.clone()),
        (Some(path), None) => fs::read_to_string(path).map_err(|e| {
            let _ = writeln!(err, "error: cannot read input {}: {e}", path.display());
            Failure(EXIT_USAGE)
        }),
        (None, None) => {
            let _ = writeln!(err, "error: an input file or -e STRING is required");
            Err(Failure(EXIT_USAGE))
        }
    }
}

fn io_error(_: std::io::Error) -> Failure {
    Failure(EXIT_USAGE)
}

fn check(path: &Path, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let g = load_grammar(path, err)?;
    let nullable = g.nullable();
    let first = g.first();
    if json {
        let nts: Vec<Value> = g
            .slots
            .nts
            .iter()
            .map(|nt| {
                json!({
                    "name": nt.name,
                    "nullable": nullable.of(&nt.name),
                    "first": first.of(&nt.name).iter().collect::<Vec<_>>(),
                })
            })
            .collect();
        let slots: Vec<String> = (0..g.slots.len())
            .map(|n| g.slots.display_slot(crate::grammar::SlotId(n as u32)))
            .collect();
        let doc = json!({ "ok": true, "nonterminals": nts, "slots": slots });
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&doc).expect("json values serialize")
        )
        .map_err(io_error)?;
        return Ok(EXIT_OK);
    }
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(io_error);
    w(
        out,
        format!(
            "ok: {} rules ({} after desugaring), {} slots",
            g.source.rules.len(),
            g.core.rules.len(),
            g.slots.len()
        ),
    )?;
    w(out, "\nnullable / first:".into())?;
    let width = g.slots.nts.iter().map(|n| n.name.chars().count()).max().unwrap_or(0);
    for nt in &g.slots.nts {
        let mark = if nullable.of(&nt.name) { "nullable" } else { "        " };
        let set: Vec<&str> = first.of(&nt.name).iter().map(String::as_str).collect();
        w(out, format!("  {:width$}  {mark}  {{{}}}", nt.name, set.join(", ")))?;
    }
    w(out, "\nslots:".into())?;
    write!(out, "{}", g.slots).map_err(io_error)?;
    Ok(EXIT_OK)
}

struct ParseFlags {
    trees: Option<usize>,
    bsr: bool,
    extents: bool,
    trace: bool,
    json: bool,
}

fn set_text(set: impl IntoIterator<Item = usize>) -> String {
    let items: Vec<String> = set.into_iter().map(|k| k.to_string()).collect();
    format!("{{{}}}", items.join(", "))
}

fn bsr_json(g: &CompiledGrammar, e: &BsrElement) -> Value {
    json!({ "slot": g.slots.bsr_label(e.slot), "i": e.i, "j": e.j, "k": e.k })
}

/// The extent whose trees are printed: the full-input one under `--full`,
/// otherwise the greatest.
fn tree_extent(g: &CompiledGrammar, result: &ParseResult, input: &str, full: bool) -> Option<usize> {
    if !full {
        return result.max_extent;
    }
    let chars: Vec<char> = input.chars().collect();
    result
        .extents
        .iter()
        .rev()
        .copied()
        .find(|&k| g.lex.skip_from(&chars, k) == chars.len())
}

fn parse_cmd(io: &InputArgs, flags: &ParseFlags, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    if flags.trees == Some(0) {
        let _ = writeln!(err, "error: --trees must be at least 1");
        return Err(Failure(EXIT_USAGE));
    }
    let g = load_grammar(&io.grammar, err)?;
    let input = load_input(io, err)?;
    let result = parse_with(&g, &input, &ParseOptions { trace: flags.trace });
    let accepted = if io.full { result.full } else { result.matched };
    let tree_k = tree_extent(&g, &result, &input, io.full);
    let extraction = match (flags.trees, tree_k) {
        (Some(cap), Some(k)) => {
            let forest = Forest::new(&g.slots, &result.bsr);
            Some(
                forest
                    .extract_trees(g.slots.start, 0, k, cap)
                    .expect("cap checked above"),
            )
        }
        _ => None,
    };

    if flags.json {
        let mut doc = json!({
            "matched": result.matched,
            "accepted": accepted,
            "extents": result.extents,
            "max_extent": result.max_extent,
            "full": result.full,
            "furthest_failure": result.furthest_failure.as_ref().map(|f| json!({
                "position": f.position,
                "expected": f.expected,
            })),
            "stats": {
                "descriptors": result.stats.descriptors,
                "reprocessed": result.stats.reprocessed,
                "seen": result.stats.seen,
                "bsr": result.stats.bsr,
                "crf_nodes": result.stats.crf_nodes,
                "crf_edges": result.stats.crf_edges,
                "popped": result.stats.popped,
            },
        });
        if flags.bsr {
            doc["bsr"] = result.bsr.iter().map(|e| bsr_json(&g, e)).collect();
        }
        if flags.trees.is_some() {
            let (trees, truncated) = match &extraction {
                Some(ex) => (ex.trees.iter().map(|t| t.to_json()).collect(), ex.truncated),
                None => (Vec::new(), false),
            };
            doc["trees"] = Value::Array(trees);
            doc["truncated"] = Value::Bool(truncated);
        }
        if flags.trace {
            doc["trace"] = json!(result.trace);
        }
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&doc).expect("json values serialize")
        )
        .map_err(io_error)?;
        return Ok(if accepted { EXIT_OK } else { EXIT_NO_MATCH });
    }

    if flags.trace {
        for line in &result.trace {
            writeln!(out, "{line}").map_err(io_error)?;
        }
    }
    if flags.bsr {
        for e in &result.bsr {
            writeln!(out, "bsr ({}, {}, {}, {})", g.slots.bsr_label(e.slot), e.i, e.j, e.k).map_err(io_error)?;
        }
    }
    match (result.matched, accepted) {
        (true, true) if io.full => writeln!(out, "full match: {}", result.input_len),
        (true, true) => writeln!(out, "match: {}", result.max_extent.expect("matched")),
        (true, false) => writeln!(
            out,
            "no full match: input length {}, extents {}",
            result.input_len,
            set_text(result.extents.iter().copied())
        ),
        (false, _) => writeln!(out, "no match"),
    }
    .map_err(io_error)?;
    if flags.extents {
        writeln!(out, "extents: {}", set_text(result.extents.iter().copied())).map_err(io_error)?;
    }
    if !accepted {
        if let Some(f) = &result.furthest_failure {
            writeln!(
                out,
                "furthest failure at {}: expected {}",
                f.position,
                f.expected.join(", ")
            )
            .map_err(io_error)?;
        }
    }
    if let Some(ex) = &extraction {
        for tree in &ex.trees {
            writeln!(out, "{tree}").map_err(io_error)?;
        }
        if ex.truncated {
            writeln!(out, "(more trees exist; raise --trees to see them)").map_err(io_error)?;
        }
    }
    Ok(if accepted { EXIT_OK } else { EXIT_NO_MATCH })
}

fn compare(io: &InputArgs, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let g = load_grammar(&io.grammar, err)?;
    let input = load_input(io, err)?;
    let engine = parse_with(&g, &input, &ParseOptions::default());
    let EvalResult { extents, failed } = oracle::eval_start(&g, &input);
    let chars: Vec<char> = input.chars().collect();
    let oracle_full = extents.iter().any(|&k| g.lex.skip_from(&chars, k) == chars.len());
    let agree = if io.full {
        engine.full == oracle_full
    } else {
        engine.extents == extents
    };
    if json {
        let doc = json!({
            "agree": agree,
            "engine": { "extents": engine.extents, "full": engine.full },
            "oracle": { "extents": extents, "failed": failed, "full": oracle_full },
        });
        writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&doc).expect("json values serialize")
        )
        .map_err(io_error)?;
    } else {
        writeln!(out, "engine: extents {}", set_text(engine.extents.iter().copied())).map_err(io_error)?;
        writeln!(
            out,
            "oracle: extents {}, failed {}",
            set_text(extents.iter().copied()),
            failed
        )
        .map_err(io_error)?;
        if io.full {
            writeln!(out, "full match: engine {}, oracle {}", engine.full, oracle_full).map_err(io_error)?;
        }
        writeln!(out, "{}", if agree { "agree" } else { "DISAGREE" }).map_err(io_error)?;
    }
    Ok(if agree { EXIT_OK } else { EXIT_NO_MATCH })
}
