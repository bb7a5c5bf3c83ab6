//! Offline discovery of state variables in C-like sources.
//!
//! Matching is textual: comments and literals are masked out, `enum`
//! definitions are pulled out with regular expressions, and every variable
//! of an enumerated type that is assigned one of that type's named
//! constants at least once becomes a candidate state variable.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::sync::LazyLock;

use regex::Regex;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceLocation {
    pub file: String,
    pub line: usize,
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file, self.line)
    }
}

impl SourceLocation {
    fn parse(text: &str) -> Option<Self> {
        let (file, line) = text.rsplit_once(':')?;
        Some(SourceLocation {
            file: file.to_owned(),
            line: line.parse().ok()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumDefinition {
    /// The typedef name when there is one, else the tag, else a name
    /// synthesized from the location.
    pub type_name: String,
    /// Other names the type is spelled with (the tag of a typedef'd enum,
    /// later `typedef enum tag alias;` lines).
    pub aliases: Vec<String>,
    pub constants: Vec<(String, i64)>,
    pub location: SourceLocation,
}

impl EnumDefinition {
    pub fn value_of(&self, constant: &str) -> Option<i64> {
        self.constants
            .iter()
            .find(|(name, _)| name == constant)
            .map(|&(_, v)| v)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.type_name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVariable {
    /// Variable spelling with whitespace removed, e.g. `stream->state`.
    pub name: String,
    pub enum_type: String,
    pub assignment_sites: Vec<SourceLocation>,
    pub blocked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: SourceLocation,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

/// The file handed from the scanner to the instrumenter.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariableManifest {
    pub entries: Vec<StateVariable>,
    /// Definitions of every enum referenced by an entry.
    pub enums: Vec<EnumDefinition>,
    pub source_fingerprint: String,
}

/// Replaces comments and the contents of string and character literals
/// with spaces. Byte offsets and newlines are preserved.
pub fn mask_source(text: &str) -> String {
    #[derive(Clone, Copy, PartialEq)]
    enum Mode {
        Code,
        Line,
        Block,
        Str(u8),
    }
    let bytes = text.as_bytes();
    let mut out = bytes.to_vec();
    let mut mode = Mode::Code;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let next = bytes.get(i + 1).copied();
        match mode {
            Mode::Code => match (b, next) {
                (b'/', Some(b'/')) => {
                    mode = Mode::Line;
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 1;
                }
                (b'/', Some(b'*')) => {
                    mode = Mode::Block;
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 1;
                }
                (b'"' | b'\'', _) => mode = Mode::Str(b),
                _ => {}
            },
            Mode::Line => {
                if b == b'\n' {
                    mode = Mode::Code;
                } else {
                    out[i] = b' ';
                }
            }
            Mode::Block => {
                if b == b'*' && next == Some(b'/') {
                    out[i] = b' ';
                    out[i + 1] = b' ';
                    i += 1;
                    mode = Mode::Code;
                } else if b != b'\n' {
                    out[i] = b' ';
                }
            }
            Mode::Str(quote) => {
                if b == b'\\' && next.is_some() {
                    out[i] = b' ';
                    if next != Some(b'\n') {
                        out[i + 1] = b' ';
                    }
                    i += 1;
                } else if b == quote || b == b'\n' {
                    mode = Mode::Code;
                } else {
                    out[i] = b' ';
                }
            }
        }
        i += 1;
    }
    // Only ASCII bytes were replaced, and only whole characters, except for
    // multi-byte characters inside comments/literals whose bytes all became
    // spaces.
    String::from_utf8(out).expect("masking keeps UTF-8 boundaries")
}

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset].iter().filter(|&&b| b == b'\n').count() + 1
}

static ENUM_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)
        (?P<typedef>\btypedef\s+)?
        \benum\b
        (?:\s+(?:class|struct)\b)?
        (?:\s+(?P<tag>[A-Za-z_]\w*))?
        (?:\s*:\s*[A-Za-z_][\w\s]*?)?
        \s*\{(?P<body>[^{}]*)\}
        (?P<tail>[^;{}]*);",
    )
    .expect("enum regex")
});

static ALIAS_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\btypedef\s+enum\s+([A-Za-z_]\w*)\s+([A-Za-z_]\w*)\s*;").expect("alias regex")
});

static IDENT_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z_]\w*$").expect("ident regex"));

/// Extracts every enum definition in `source`. Malformed definitions are
/// skipped silently; use [`scan_enums_with_diagnostics`] to see why.
pub fn scan_enums(source: &str, path: &str) -> Vec<EnumDefinition> {
    scan_enums_with_diagnostics(source, path, &mut Vec::new())
}

pub fn scan_enums_with_diagnostics(
    source: &str,
    path: &str,
    diagnostics: &mut Vec<Diagnostic>,
) -> Vec<EnumDefinition> {
    let masked = mask_source(source);
    let mut known: HashMap<String, i64> = HashMap::new();
    let mut found: Vec<EnumDefinition> = Vec::new();

    for caps in ENUM_RE.captures_iter(&masked) {
        let whole = caps.get(0).expect("match");
        let location = SourceLocation {
            file: path.to_owned(),
            line: line_of(&masked, whole.start()),
        };
        let body = caps.name("body").expect("body");
        // Evaluate against the original text so character literals survive.
        let constants = match parse_constants(&source[body.range()], &masked[body.range()], &known)
        {
            Ok(c) => c,
            Err(message) => {
                diagnostics.push(Diagnostic { location, message });
                continue;
            }
        };
        let tag = caps.name("tag").map(|m| m.as_str().to_owned());
        let tail = caps.name("tail").map_or("", |m| m.as_str()).trim();
        let typedef_name = if caps.name("typedef").is_some() {
            tail.split(',')
                .map(|s| s.trim().trim_start_matches('*').trim())
                .find(|s| IDENT_RE.is_match(s))
                .map(str::to_owned)
        } else {
            None
        };
        let mut aliases = Vec::new();
        let type_name = match (typedef_name, tag) {
            (Some(name), Some(tag)) => {
                aliases.push(tag);
                name
            }
            (Some(name), None) | (None, Some(name)) => name,
            (None, None) => synthesized_name(path, location.line),
        };
        for (name, value) in &constants {
            known.insert(name.clone(), *value);
        }
        found.push(EnumDefinition {
            type_name,
            aliases,
            constants,
            location,
        });
    }

    for caps in ALIAS_RE.captures_iter(&masked) {
        let (target, alias) = (&caps[1], &caps[2]);
        if let Some(def) = found.iter_mut().find(|d| d.names().any(|n| n == target)) {
            if !def.names().any(|n| n == alias) {
                def.aliases.push(alias.to_owned());
            }
        }
    }
    found
}

fn synthesized_name(path: &str, line: usize) -> String {
    let stem: String = path
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("anon_{stem}_{line}")
}

fn parse_constants(
    original: &str,
    masked: &str,
    known: &HashMap<String, i64>,
) -> std::result::Result<Vec<(String, i64)>, String> {
    let mut constants: Vec<(String, i64)> = Vec::new();
    let mut scope = known.clone();
    let mut next = 0i64;
    let mut offset = 0;
    for piece in masked.split(',') {
        let range = offset..offset + piece.len();
        offset = range.end + 1;
        let item = piece.trim();
        if item.is_empty() {
            // Trailing comma.
            continue;
        }
        let (name, value) = match item.split_once('=') {
            None => (item, next),
            Some((name, _)) => {
                let eq = piece.find('=').expect("contains =");
                let expr = &original[range.start + eq + 1..range.end];
                let value = eval_const_expr(expr, &scope)
                    .ok_or_else(|| format!("cannot evaluate value of `{}`", name.trim()))?;
                (name.trim(), value)
            }
        };
        if !IDENT_RE.is_match(name) {
            return Err(format!("malformed enum constant `{item}`"));
        }
        if constants.iter().any(|(n, _)| n == name) {
            return Err(format!("duplicate enum constant `{name}`"));
        }
        constants.push((name.to_owned(), value));
        scope.insert(name.to_owned(), value);
        next = value.wrapping_add(1);
    }
    Ok(constants)
}

/// Evaluates a C integer constant expression over literals and previously
/// defined enum constants.
pub fn eval_const_expr(expr: &str, known: &HashMap<String, i64>) -> Option<i64> {
    let tokens = tokenize(expr)?;
    let mut parser = ExprParser {
        tokens: &tokens,
        pos: 0,
        known,
    };
    let value = parser.or()?;
    (parser.pos == tokens.len()).then_some(value)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(i64),
    Ident(String),
    Op(&'static str),
}

fn tokenize(expr: &str) -> Option<Vec<Tok>> {
    const OPS: [&str; 14] = [
        "<<", ">>", "(", ")", "+", "-", "*", "/", "%", "|", "&", "^", "~", "!",
    ];
    let bytes = expr.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Num(parse_int_literal(&expr[start..i])?));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Tok::Ident(expr[start..i].to_owned()));
        } else if c == b'\'' {
            let rest = &expr[i + 1..];
            let end = rest.find('\'')?;
            let value = match &rest[..end] {
                "\\0" => 0,
                "\\n" => 10,
                "\\t" => 9,
                "\\\\" => 92,
                s if s.len() == 1 => s.as_bytes()[0] as i64,
                _ => return None,
            };
            out.push(Tok::Num(value));
            i += end + 2;
        } else {
            let op = OPS.iter().find(|op| expr[i..].starts_with(**op))?;
            out.push(Tok::Op(op));
            i += op.len();
        }
    }
    Some(out)
}

fn parse_int_literal(text: &str) -> Option<i64> {
    let digits = text.trim_end_matches(['u', 'U', 'l', 'L']);
    let (radix, body) = if let Some(hex) = digits.strip_prefix("0x").or(digits.strip_prefix("0X")) {
        (16, hex)
    } else if let Some(bin) = digits.strip_prefix("0b").or(digits.strip_prefix("0B")) {
        (2, bin)
    } else if digits.len() > 1 && digits.starts_with('0') {
        (8, &digits[1..])
    } else {
        (10, digits)
    };
    u64::from_str_radix(body, radix).ok().map(|v| v as i64)
}

struct ExprParser<'a> {
    tokens: &'a [Tok],
    pos: usize,
    known: &'a HashMap<String, i64>,
}

impl ExprParser<'_> {
    fn peek_op(&self) -> Option<&'static str> {
        match self.tokens.get(self.pos) {
            Some(Tok::Op(op)) => Some(op),
            _ => None,
        }
    }

    fn binary(
        &mut self,
        ops: &[&str],
        next: fn(&mut Self) -> Option<i64>,
        apply: fn(&str, i64, i64) -> Option<i64>,
    ) -> Option<i64> {
        let mut lhs = next(self)?;
        while let Some(op) = self.peek_op().filter(|op| ops.contains(op)) {
            self.pos += 1;
            let rhs = next(self)?;
            lhs = apply(op, lhs, rhs)?;
        }
        Some(lhs)
    }

    fn or(&mut self) -> Option<i64> {
        self.binary(&["|"], Self::xor, |_, a, b| Some(a | b))
    }

    fn xor(&mut self) -> Option<i64> {
        self.binary(&["^"], Self::and, |_, a, b| Some(a ^ b))
    }

    fn and(&mut self) -> Option<i64> {
        self.binary(&["&"], Self::shift, |_, a, b| Some(a & b))
    }

    fn shift(&mut self) -> Option<i64> {
        self.binary(&["<<", ">>"], Self::additive, |op, a, b| {
            let b = u32::try_from(b).ok().filter(|&b| b < 64)?;
            Some(if op == "<<" { a.wrapping_shl(b) } else { a >> b })
        })
    }

    fn additive(&mut self) -> Option<i64> {
        self.binary(&["+", "-"], Self::multiplicative, |op, a, b| {
            Some(if op == "+" {
                a.wrapping_add(b)
            } else {
                a.wrapping_sub(b)
            })
        })
    }

    fn multiplicative(&mut self) -> Option<i64> {
        self.binary(&["*", "/", "%"], Self::unary, |op, a, b| match op {
            "*" => Some(a.wrapping_mul(b)),
            "/" => a.checked_div(b),
            _ => a.checked_rem(b),
        })
    }

    fn unary(&mut self) -> Option<i64> {
        match self.peek_op() {
            Some(op @ ("-" | "+" | "~" | "!")) => {
                self.pos += 1;
                let v = self.unary()?;
                Some(match op {
                    "-" => v.wrapping_neg(),
                    "+" => v,
                    "~" => !v,
                    _ => (v == 0) as i64,
                })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Option<i64> {
        let tok = self.tokens.get(self.pos)?.clone();
        self.pos += 1;
        match tok {
            Tok::Num(v) => Some(v),
            Tok::Ident(name) => self.known.get(&name).copied(),
            Tok::Op("(") => {
                let v = self.or()?;
                match self.tokens.get(self.pos) {
                    Some(Tok::Op(")")) => {
                        self.pos += 1;
                        Some(v)
                    }
                    _ => None,
                }
            }
            Tok::Op(_) => None,
        }
    }
}

/// An assignment `lhs = IDENT` followed by `;`, `,` or `)`.
#[derive(Debug, Clone)]
pub(crate) struct Assignment {
    /// Byte offset of the first character of the left-hand side.
    pub start: usize,
    /// Byte offset one past the terminator.
    pub end: usize,
    pub lhs: String,
    /// The last member name of the left-hand side (`state` for `s->state`).
    pub member: String,
    pub rhs: String,
    pub terminator: char,
    pub line: usize,
}

static ASSIGN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)
        (?P<lhs>[A-Za-z_]\w*(?:\s*(?:->|\.)\s*[A-Za-z_]\w*|\s*\[[^\]\n]*\])*)
        \s*=\s*
        (?P<rhs>[A-Za-z_]\w*)
        \s*(?P<term>[;,)])",
    )
    .expect("assignment regex")
});

/// Finds plain identifier assignments in masked text.
pub(crate) fn assignments(masked: &str) -> Vec<Assignment> {
    let bytes = masked.as_bytes();
    let mut out = Vec::new();
    for caps in ASSIGN_RE.captures_iter(masked) {
        let lhs = caps.name("lhs").expect("lhs");
        // `get()->state = X` and friends: the left-hand side starts inside
        // an expression we do not model.
        let before = masked[..lhs.start()].trim_end();
        if before.ends_with('.') || before.ends_with("->") {
            continue;
        }
        let normalized: String = lhs.as_str().chars().filter(|c| !c.is_whitespace()).collect();
        let member = normalized
            .rsplit(['.', '>'])
            .next()
            .unwrap_or(&normalized)
            .split('[')
            .next()
            .unwrap_or_default()
            .to_owned();
        let term = caps.name("term").expect("term");
        out.push(Assignment {
            start: lhs.start(),
            end: term.end(),
            lhs: normalized,
            member,
            rhs: caps["rhs"].to_owned(),
            terminator: bytes[term.start()] as char,
            line: line_of(masked, lhs.start()),
        });
    }
    out
}

/// Finds state variables: enum-typed variables assigned one of their
/// type's named constants at least once. Blocklisted names stay in the
/// manifest with `blocked` set.
pub fn find_state_variables(
    sources: &[(String, String)],
    enums: &[EnumDefinition],
    blocklist: &[String],
) -> VariableManifest {
    find_state_variables_with_diagnostics(sources, enums, blocklist, &mut Vec::new())
}

pub fn find_state_variables_with_diagnostics(
    sources: &[(String, String)],
    enums: &[EnumDefinition],
    blocklist: &[String],
    diagnostics: &mut Vec<Diagnostic>,
) -> VariableManifest {
    let mut by_type: HashMap<&str, usize> = HashMap::new();
    for (index, def) in enums.iter().enumerate() {
        for name in def.names() {
            by_type.entry(name).or_insert(index);
        }
    }
    let mut by_constant: HashMap<&str, BTreeSet<usize>> = HashMap::new();
    for (index, def) in enums.iter().enumerate() {
        for (name, _) in &def.constants {
            by_constant.entry(name.as_str()).or_default().insert(index);
        }
    }

    let masked: Vec<(&str, String)> = sources
        .iter()
        .map(|(path, text)| (path.as_str(), mask_source(text)))
        .collect();

    // Declared names (locals, globals, parameters, struct members) with
    // the enum types they are declared with.
    let mut declared: HashMap<String, BTreeSet<usize>> = HashMap::new();
    if !by_type.is_empty() {
        let mut names: Vec<&str> = by_type.keys().copied().collect();
        names.sort_unstable_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        let alternation = names
            .iter()
            .map(|n| regex::escape(n))
            .collect::<Vec<_>>()
            .join("|");
        let decl_re = Regex::new(&format!(
            r"(?P<pre>\btypedef\s+)?(?:\benum\s+)?\b(?P<ty>{alternation})\b(?P<rest>[^;{{}}()]*?)(?P<end>[;)(=])"
        ))
        .expect("declaration regex");
        for (_, text) in &masked {
            for caps in decl_re.captures_iter(text) {
                if caps.name("pre").is_some() || &caps["end"] == "(" {
                    continue;
                }
                let enum_index = by_type[&caps["ty"]];
                for declarator in caps["rest"].split(',') {
                    let ident = declarator
                        .trim()
                        .trim_start_matches(['*', ' ', '\t', '\n'])
                        .trim_start_matches("const ")
                        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                        .next()
                        .unwrap_or_default();
                    if IDENT_RE.is_match(ident) && !by_type.contains_key(ident) {
                        declared
                            .entry(ident.to_owned())
                            .or_default()
                            .insert(enum_index);
                    }
                    // Only the first declarator is reliable after an
                    // initializer or inside a parameter list.
                    if &caps["end"] != ";" {
                        break;
                    }
                }
            }
        }
    }

    let mut found: BTreeMap<(String, String), Vec<SourceLocation>> = BTreeMap::new();
    for (path, text) in &masked {
        for assignment in assignments(text) {
            let Some(owners) = by_constant.get(assignment.rhs.as_str()) else {
                continue;
            };
            let candidates: Vec<usize> = match declared.get(&assignment.member) {
                Some(types) => types.intersection(owners).copied().collect(),
                None => owners.iter().copied().collect(),
            };
            let [enum_index] = candidates[..] else {
                if candidates.len() > 1 {
                    diagnostics.push(Diagnostic {
                        location: SourceLocation {
                            file: path.to_string(),
                            line: assignment.line,
                        },
                        message: format!(
                            "`{}` is ambiguous between {} enum types; skipped",
                            assignment.rhs,
                            candidates.len()
                        ),
                    });
                }
                continue;
            };
            found
                .entry((assignment.lhs.clone(), enums[enum_index].type_name.clone()))
                .or_default()
                .push(SourceLocation {
                    file: path.to_string(),
                    line: assignment.line,
                });
        }
    }

    let mut by_name: BTreeMap<&str, usize> = BTreeMap::new();
    for (name, _) in found.keys() {
        *by_name.entry(name.as_str()).or_default() += 1;
    }
    for (name, count) in by_name.iter().filter(|(_, &c)| c > 1) {
        let first = found
            .iter()
            .find(|((n, _), _)| n == name)
            .map(|(_, sites)| sites[0].clone())
            .expect("present");
        diagnostics.push(Diagnostic {
            location: first,
            message: format!("`{name}` is assigned constants of {count} different enum types"),
        });
    }

    let mut entries: Vec<StateVariable> = found
        .into_iter()
        .map(|((name, enum_type), mut sites)| {
            sites.sort();
            sites.dedup();
            StateVariable {
                blocked: blocklist.contains(&name),
                name,
                enum_type,
                assignment_sites: sites,
            }
        })
        .collect();
    entries.sort_by(|a, b| {
        a.name
            .cmp(&b.name)
            .then_with(|| a.assignment_sites.cmp(&b.assignment_sites))
            .then_with(|| a.enum_type.cmp(&b.enum_type))
    });

    let referenced: BTreeSet<&str> = entries.iter().map(|e| e.enum_type.as_str()).collect();
    let mut used: Vec<EnumDefinition> = enums
        .iter()
        .filter(|d| referenced.contains(d.type_name.as_str()))
        .cloned()
        .collect();
    used.sort_by(|a, b| a.type_name.cmp(&b.type_name).then(a.location.cmp(&b.location)));
    used.dedup_by(|a, b| a.type_name == b.type_name);

    VariableManifest {
        entries,
        enums: used,
        source_fingerprint: fingerprint(sources),
    }
}

/// SHA-256 over the sources in path order.
pub fn fingerprint(sources: &[(String, String)]) -> String {
    let mut sorted: Vec<&(String, String)> = sources.iter().collect();
    sorted.sort();
    let mut hasher = Sha256::new();
    for (path, text) in sorted {
        hasher.update(path.as_bytes());
        hasher.update([0]);
        hasher.update(text.as_bytes());
        hasher.update([0]);
    }
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Convenience: scan every source for enums, then for state variables.
pub fn scan_sources(
    sources: &[(String, String)],
    blocklist: &[String],
    diagnostics: &mut Vec<Diagnostic>,
) -> VariableManifest {
    let mut enums = Vec::new();
    for (path, text) in sources {
        enums.extend(scan_enums_with_diagnostics(text, path, diagnostics));
    }
    find_state_variables_with_diagnostics(sources, &enums, blocklist, diagnostics)
}

const MANIFEST_MAGIC: &str = "#statefuzz-manifest v1";

impl VariableManifest {
    pub fn enum_named(&self, name: &str) -> Option<&EnumDefinition> {
        self.enums.iter().find(|d| d.names().any(|n| n == name))
    }

    pub fn get<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a StateVariable> + 'a {
        self.entries.iter().filter(move |e| e.name == name)
    }

    /// Line-oriented text form. Each variable is one tab-separated record
    /// `name, enum_type, blocked, site_count`; lines starting with `#`
    /// carry the fingerprint, enum definitions and individual sites.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MANIFEST_MAGIC}");
        let _ = writeln!(out, "#fingerprint\t{}", self.source_fingerprint);
        for def in &self.enums {
            let constants: Vec<String> = def
                .constants
                .iter()
                .map(|(n, v)| format!("{n}={v}"))
                .collect();
            let aliases = if def.aliases.is_empty() {
                "-".to_owned()
            } else {
                def.aliases.join(",")
            };
            let _ = writeln!(
                out,
                "#enum\t{}\t{}\t{}\t{}",
                def.type_name,
                aliases,
                def.location,
                constants.join(",")
            );
        }
        for entry in &self.entries {
            for site in &entry.assignment_sites {
                let _ = writeln!(out, "#site\t{}\t{}\t{}", entry.name, entry.enum_type, site);
            }
        }
        for entry in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                entry.name,
                entry.enum_type,
                u8::from(entry.blocked),
                entry.assignment_sites.len()
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut manifest = VariableManifest::default();
        let mut sites: BTreeMap<(String, String), Vec<SourceLocation>> = BTreeMap::new();
        for (index, line) in text.lines().enumerate() {
            let bad = |reason: &str| Error::Manifest {
                line: index + 1,
                reason: reason.to_owned(),
            };
            if line.trim().is_empty() || line == MANIFEST_MAGIC {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[..] {
                ["#fingerprint", hash] => manifest.source_fingerprint = hash.to_owned(),
                ["#enum", type_name, aliases, location, constants] => {
                    let location =
                        SourceLocation::parse(location).ok_or_else(|| bad("bad location"))?;
                    let constants = if constants.is_empty() {
                        Vec::new()
                    } else {
                        constants
                            .split(',')
                            .map(|c| {
                                let (n, v) = c.split_once('=')?;
                                Some((n.to_owned(), v.parse().ok()?))
                            })
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| bad("bad constant list"))?
                    };
                    manifest.enums.push(EnumDefinition {
                        type_name: type_name.to_owned(),
                        aliases: match aliases {
                            "-" => Vec::new(),
                            list => list.split(',').map(str::to_owned).collect(),
                        },
                        constants,
                        location,
                    });
                }
                ["#site", name, enum_type, location] => {
                    let location =
                        SourceLocation::parse(location).ok_or_else(|| bad("bad location"))?;
                    sites
                        .entry((name.to_owned(), enum_type.to_owned()))
                        .or_default()
                        .push(location);
                }
                _ if line.starts_with('#') => {}
                [name, enum_type, blocked, count] => {
                    let blocked = match blocked {
                        "0" => false,
                        "1" => true,
                        _ => return Err(bad("blocked flag must be 0 or 1")),
                    };
                    let count: usize = count.parse().map_err(|_| bad("bad site count"))?;
                    let recorded = sites
                        .remove(&(name.to_owned(), enum_type.to_owned()))
                        .unwrap_or_default();
                    if recorded.len() != count {
                        return Err(bad("site count does not match #site lines"));
                    }
                    manifest.entries.push(StateVariable {
                        name: name.to_owned(),
                        enum_type: enum_type.to_owned(),
                        assignment_sites: recorded,
                        blocked,
                    });
                }
                _ => return Err(bad("expected 4 tab-separated fields")),
            }
        }
        Ok(manifest)
    }
}
