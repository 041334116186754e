//! Source text to obligations in one call, and the whole command-line
//! pipeline.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{analyze, Analysis};
use crate::ast::{Obligation, Pos};
use crate::diagnostic::{has_errors, Diagnostic};
use crate::discharge::{discharge_all, Bounds, Summary};
use crate::frontend::parse_source;
use crate::pog::{generate, PogOptions};
use crate::render::{obligation_report, render_obligations, ObligationReport, RenderStyle};

#[derive(Debug, Clone)]
pub struct Generated {
    /// Absent when parsing or analysis reported errors.
    pub analysis: Option<Analysis>,
    pub obligations: Vec<Obligation>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Generated {
    pub fn has_errors(&self) -> bool {
        has_errors(&self.diagnostics)
    }
}

/// Parses, analyses and generates. Obligations are only produced when no
/// error diagnostics were reported.
pub fn generate_source(source: &str, file: &str, opts: &PogOptions) -> Generated {
    let (module, mut diagnostics) = parse_source(source, file);
    if has_errors(&diagnostics) {
        return Generated {
            analysis: None,
            obligations: Vec::new(),
            diagnostics,
        };
    }
    let (analysis, d) = analyze(module, file);
    diagnostics.extend(d);
    if has_errors(&diagnostics) {
        return Generated {
            analysis: None,
            obligations: Vec::new(),
            diagnostics,
        };
    }
    let out = generate(&analysis, opts);
    diagnostics.extend(out.diagnostics);
    Generated {
        analysis: Some(analysis),
        obligations: out.obligations,
        diagnostics,
    }
}

/// Inputs and switches for one invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input_paths: Vec<PathBuf>,
    pub emit_json: bool,
    pub discharge_enabled: bool,
    pub bounds: Bounds,
    pub experimental_loop_functions: bool,
    pub max_paths: usize,
    /// Files processed at once, and threads per discharge run.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input_paths: Vec::new(),
            emit_json: false,
            discharge_enabled: false,
            bounds: Bounds::default(),
            experimental_loop_functions: false,
            max_paths: PogOptions::default().max_paths,
            jobs: 1,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_ERRORS: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// What a run printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutput {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

struct FileOutcome {
    path: String,
    obligations: Vec<Obligation>,
    summary: Option<Summary>,
    stderr: String,
    exit_code: i32,
}

#[derive(Serialize)]
struct FileReport<'a> {
    file: &'a str,
    obligations: Vec<ObligationReport>,
    summary: &'a Summary,
}

fn process_file(path: &Path, config: &RunConfig) -> FileOutcome {
    let name = path.display().to_string();
    let mut out = FileOutcome {
        path: name.clone(),
        obligations: Vec::new(),
        summary: None,
        stderr: String::new(),
        exit_code: EXIT_OK,
    };
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let d = Diagnostic::error(
                &Arc::from(name.as_str()),
                Pos::new(1, 1),
                format!("cannot read file: {e}"),
            );
            out.stderr = format!("{d}\n");
            out.exit_code = EXIT_ERRORS;
            return out;
        }
    };
    let opts = PogOptions {
        experimental_loop_functions: config.experimental_loop_functions,
        max_paths: config.max_paths,
    };
    let g = generate_source(&source, &name, &opts);
    for d in &g.diagnostics {
        out.stderr.push_str(&format!("{d}\n"));
    }
    if g.has_errors() {
        out.exit_code = EXIT_ERRORS;
        return out;
    }
    if config.discharge_enabled {
        let module = &g.analysis.as_ref().expect("analysis present without errors").module;
        match discharge_all(&g.obligations, &config.bounds, module, config.jobs) {
            Ok(s) => {
                if s.failed > 0 {
                    out.exit_code = EXIT_FAILED;
                }
                out.summary = Some(s);
            }
            Err(e) => {
                out.stderr.push_str(&format!("{name}: internal error: {e}\n"));
                out.exit_code = EXIT_INTERNAL;
            }
        }
    }
    out.obligations = g.obligations;
    out
}

fn render_summary_text(s: &Summary) -> String {
    let mut out = String::new();
    for r in &s.results {
        out.push_str(&format!(
            "Obligation {}: {} ({} cases)\n",
            r.ordinal, r.status, r.cases_tried
        ));
        if let Some(cx) = &r.counterexample {
            out.push_str(&format!("  counterexample: {cx}\n"));
        }
        if let Some(f) = &r.fault {
            out.push_str(&format!("  fault: {f}\n"));
        }
        if let Some(why) = &r.reason {
            out.push_str(&format!("  stopped: {why}\n"));
        }
    }
    out.push('\n');
    out.push_str(&s.table());
    out
}

/// Parses, analyses, generates and optionally discharges each input in
/// path order. Exit code: 0 clean, 1 a discharge failed, 2 diagnostics
/// errors or unreadable input, 3 internal error; the highest applies.
pub fn run(config: &RunConfig) -> RunOutput {
    let style = RenderStyle::default();
    if config.input_paths.is_empty() {
        return RunOutput {
            stdout: String::new(),
            stderr: "error: no input files\n".into(),
            exit_code: EXIT_ERRORS,
        };
    }
    if config.discharge_enabled {
        if let Err(e) = config.bounds.validate() {
            return RunOutput {
                stdout: String::new(),
                stderr: format!("error: {e}\n"),
                exit_code: EXIT_ERRORS,
            };
        }
    }
    let process = |p: &PathBuf| {
        std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| process_file(p, config))).unwrap_or_else(|_| {
            FileOutcome {
                path: p.display().to_string(),
                obligations: Vec::new(),
                summary: None,
                stderr: format!("{}: internal error: generator panicked\n", p.display()),
                exit_code: EXIT_INTERNAL,
            }
        })
    };
    let outcomes: Vec<FileOutcome> = if config.jobs > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build() {
            Ok(pool) => pool.install(|| config.input_paths.par_iter().map(process).collect()),
            Err(_) => config.input_paths.iter().map(process).collect(),
        }
    } else {
        config.input_paths.iter().map(process).collect()
    };

    let mut stdout = String::new();
    let mut stderr = String::new();
    let exit_code = outcomes.iter().map(|o| o.exit_code).max().unwrap_or(EXIT_OK);
    for o in &outcomes {
        stderr.push_str(&o.stderr);
    }
    if config.emit_json {
        let json = if config.discharge_enabled {
            let files: Vec<FileReport> = outcomes
                .iter()
                .filter_map(|o| {
                    o.summary.as_ref().map(|s| FileReport {
                        file: &o.path,
                        obligations: o.obligations.iter().map(|x| obligation_report(x, &style)).collect(),
                        summary: s,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&files)
        } else {
            let all: Vec<ObligationReport> = outcomes
                .iter()
                .flat_map(|o| o.obligations.iter().map(|x| obligation_report(x, &style)))
                .collect();
            serde_json::to_string_pretty(&all)
        };
        stdout = json.expect("reports serialize");
        stdout.push('\n');
    } else {
        let many = outcomes.len() > 1;
        for o in &outcomes {
            if o.exit_code == EXIT_ERRORS || o.exit_code == EXIT_INTERNAL {
                continue;
            }
            if many {
                stdout.push_str(&format!("-- {}\n", o.path));
            }
            if !o.obligations.is_empty() {
                stdout.push_str(&render_obligations(&o.obligations, &style));
                stdout.push_str("\n\n");
            }
            if let Some(s) = &o.summary {
                stdout.push_str(&render_summary_text(s));
                stdout.push('\n');
            }
        }
    }
    RunOutput {
        stdout,
        stderr,
        exit_code,
    }
}
