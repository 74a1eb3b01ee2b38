//! Command-line front end: wires input files through the pipeline and
//! maps errors to exit codes (1 for program errors, 2 for usage).

use std::io::Read;
use std::process::ExitCode;

use clap::Parser;

use funlog_core::pipeline::{run, Mode, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "funlog",
    about = "Grounder for disjunctive logic programs with function symbols",
    version
)]
struct Cli {
    /// Program files, concatenated in order; standard input when empty.
    inputs: Vec<String>,

    /// Pipeline stage to print.
    #[arg(long, value_parser = parse_mode, default_value = "ground")]
    mode: ModeArg,

    /// Refuse to create terms nested deeper than this bound. Without it
    /// grounding of function-recursive programs may not terminate.
    #[arg(long = "maxNesting", value_name = "K")]
    max_nesting: Option<u32>,

    /// Print interned ids (@k) instead of nested terms, plus the
    /// function tables.
    #[arg(long = "show-ids")]
    show_ids: bool,

    /// Print grounding statistics to standard error.
    #[arg(long)]
    stats: bool,

    /// Run the brute-force reference path instead of the grounder.
    #[arg(long, hide = true)]
    oracle: bool,

    /// Use plain backtracking instead of backjumping over function
    /// atoms; output must not change.
    #[arg(long = "no-backjump", hide = true)]
    no_backjump: bool,
}

#[derive(Debug, Clone, Copy)]
struct ModeArg(Mode);

fn parse_mode(s: &str) -> Result<ModeArg, String> {
    Ok(ModeArg(match s {
        "parse" => Mode::Parse,
        "rewrite" => Mode::Rewrite,
        "reorder" => Mode::Reorder,
        "depgraph" => Mode::Depgraph,
        "ground" => Mode::Ground,
        "answersets" => Mode::AnswerSets,
        other => {
            return Err(format!(
                "unknown mode '{other}' (expected parse|rewrite|reorder|depgraph|ground|answersets)"
            ))
        }
    }))
}

fn main() -> ExitCode {
    // Accept the single-dash spelling -maxNesting=k as an alias.
    let args: Vec<String> = std::env::args()
        .map(|a| {
            if let Some(rest) = a.strip_prefix("-maxNesting=") {
                format!("--maxNesting={rest}")
            } else {
                a
            }
        })
        .collect();
    let cli = Cli::parse_from(args);

    let mut input = String::new();
    if cli.inputs.is_empty() {
        if let Err(e) = std::io::stdin().read_to_string(&mut input) {
            eprintln!("error reading standard input: {e}");
            return ExitCode::from(2);
        }
    } else {
        for path in &cli.inputs {
            match std::fs::read_to_string(path) {
                Ok(text) => {
                    input.push_str(&text);
                    if !text.ends_with('\n') {
                        input.push('\n');
                    }
                }
                Err(e) => {
                    eprintln!("error reading {path}: {e}");
                    return ExitCode::from(2);
                }
            }
        }
    }

    let cfg = RunConfig {
        mode: cli.mode.0,
        max_nesting: cli.max_nesting,
        show_ids: cli.show_ids,
        oracle: cli.oracle,
        stats: cli.stats,
        backjump: !cli.no_backjump,
    };
    match run(&cfg, &input) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", out.stdout);
            if let Some(stats) = &out.stats {
                eprint!("{stats}");
            }
            ExitCode::SUCCESS
        }
        Err(funlog_core::pipeline::PipelineError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
