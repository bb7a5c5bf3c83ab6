//! Source-to-source injection of state-update notifications.
//!
//! Every statement that assigns a named constant to an unblocked manifest
//! variable gets a `__stt_update("var", CONST);` line right above it. The
//! injected lines are whole lines, so removing them restores the input.

use std::collections::HashMap;
use std::fmt;

use crate::svscan::{assignments, mask_source, VariableManifest};

pub const RUNTIME_FUNCTION: &str = "__stt_update";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionSite {
    pub file: String,
    pub line: usize,
    pub variable: String,
    pub constant: String,
    pub constant_value: i64,
}

/// An assignment that qualifies for instrumentation but cannot be rewritten
/// by inserting a line above it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionConflict {
    pub file: String,
    pub line: usize,
    pub variable: String,
    pub reason: &'static str,
}

impl fmt::Display for InjectionConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CONFLICT {}:{} {}", self.file, self.line, self.variable)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instrumented {
    pub text: String,
    pub sites: Vec<InjectionSite>,
    pub conflicts: Vec<InjectionConflict>,
}

fn call_text(variable: &str, constant: &str) -> String {
    format!("{RUNTIME_FUNCTION}(\"{variable}\", {constant});")
}

/// Instruments one file. Sites that were already instrumented by an earlier
/// run are reported again but not duplicated.
pub fn inject(source: &str, file: &str, manifest: &VariableManifest) -> Instrumented {
    // variable name -> constants of every enum it is tracked under
    let mut tracked: HashMap<&str, Vec<(&str, i64)>> = HashMap::new();
    for entry in manifest.entries.iter().filter(|e| !e.blocked) {
        if let Some(def) = manifest.enum_named(&entry.enum_type) {
            tracked
                .entry(entry.name.as_str())
                .or_default()
                .extend(def.constants.iter().map(|(n, v)| (n.as_str(), *v)));
        }
    }

    let masked = mask_source(source);
    let depth = paren_depths(&masked);
    let mut inserts: Vec<(usize, String)> = Vec::new();
    let mut sites = Vec::new();
    let mut conflicts = Vec::new();

    for assignment in assignments(&masked) {
        let Some(constants) = tracked.get(assignment.lhs.as_str()) else {
            continue;
        };
        let Some(&(constant, value)) = constants.iter().find(|(n, _)| *n == assignment.rhs) else {
            continue;
        };
        let conflict = |reason| InjectionConflict {
            file: file.to_owned(),
            line: assignment.line,
            variable: assignment.lhs.clone(),
            reason,
        };

        let line_start = masked[..assignment.start].rfind('\n').map_or(0, |i| i + 1);
        let indent = &source[line_start..assignment.start];
        if !indent.chars().all(|c| c == ' ' || c == '\t') {
            conflicts.push(conflict("assignment does not start its line"));
            continue;
        }
        if depth[assignment.start] != 0 || assignment.terminator == ')' {
            conflicts.push(conflict("assignment inside parentheses"));
            continue;
        }
        if masked[assignment.start..assignment.end].contains('\n') {
            conflicts.push(conflict("assignment spans multiple lines"));
            continue;
        }
        let call = call_text(&assignment.lhs, constant);
        let previous = previous_code_line(source, &masked, line_start);
        match previous {
            Some((raw, _)) if raw.trim() == call => {}
            Some((_, code)) if !ends_statement(code) => {
                conflicts.push(conflict("statement continues from the previous line"));
                continue;
            }
            _ => inserts.push((line_start, format!("{indent}{call}\n"))),
        }
        sites.push(InjectionSite {
            file: file.to_owned(),
            line: assignment.line,
            variable: assignment.lhs.clone(),
            constant: constant.to_owned(),
            constant_value: value,
        });
    }

    let mut text = String::with_capacity(source.len() + inserts.len() * 48);
    let mut copied = 0;
    for (at, line) in &inserts {
        text.push_str(&source[copied..*at]);
        text.push_str(line);
        copied = *at;
    }
    text.push_str(&source[copied..]);
    Instrumented {
        text,
        sites,
        conflicts,
    }
}

fn paren_depths(masked: &str) -> Vec<u32> {
    let mut depth = 0u32;
    masked
        .bytes()
        .map(|b| {
            let here = depth;
            match b {
                b'(' => depth += 1,
                b')' => depth = depth.saturating_sub(1),
                _ => {}
            }
            here
        })
        .collect()
}

/// The closest earlier line with code on it, as (raw text, masked text).
fn previous_code_line<'a>(
    source: &'a str,
    masked: &'a str,
    line_start: usize,
) -> Option<(&'a str, &'a str)> {
    let mut end = line_start.checked_sub(1)?;
    loop {
        let start = masked[..end].rfind('\n').map_or(0, |i| i + 1);
        let code = &masked[start..end];
        if !code.trim().is_empty() {
            return Some((&source[start..end], code));
        }
        end = start.checked_sub(1)?;
    }
}

fn ends_statement(code: &str) -> bool {
    let code = code.trim();
    code.starts_with('#') || code.ends_with([';', '{', '}', ':'])
}

/// Removes every line injected by [`inject`].
pub fn strip(text: &str) -> String {
    text.split_inclusive('\n')
        .filter(|line| !is_injected_line(line))
        .collect()
}

fn is_injected_line(line: &str) -> bool {
    let Some(rest) = line
        .trim_start_matches([' ', '\t'])
        .strip_suffix('\n')
        .and_then(|l| l.strip_prefix(RUNTIME_FUNCTION))
        .and_then(|l| l.strip_prefix("(\""))
    else {
        return false;
    };
    let Some((_, tail)) = rest.split_once("\", ") else {
        return false;
    };
    tail.strip_suffix(");")
        .is_some_and(|c| !c.is_empty() && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_'))
}

/// C declaration of the runtime entry point called by instrumented code.
pub fn emit_runtime_header() -> String {
    format!(
        "#ifndef STATEFUZZ_STT_RUNTIME_H
#define STATEFUZZ_STT_RUNTIME_H

#ifdef __cplusplus
extern \"C\" {{
#endif

/* Records that state variable `name` was assigned `value`. */
void {RUNTIME_FUNCTION}(const char *name, long long value);

#ifdef __cplusplus
}}
#endif

#endif /* STATEFUZZ_STT_RUNTIME_H */
"
    )
}
