//! Config files: bracketed sections with `key = value` lines.
//!
//! ```text
//! [problem.1]
//! r = 1
//! interval = 0, 1
//! P = "1"
//! R = [["1"]]
//!
//! [problem.2]
//! r = 1
//! interval = 0, 1
//! P = "1"
//! R = [["0"]]
//!
//! [boundary]
//! M = [[1, 0], [0, 0]]
//! N = [[0, 0], [1, 0]]
//!
//! [solver]
//! rel_tol = 1e-10
//! ```
//!
//! Lists may be nested or flat and may span lines while a bracket is open;
//! nesting is only for readability, entries are read row-major. `#` starts a
//! comment outside quotes.

use std::collections::BTreeMap;
use std::fmt;

use funcdet_core::expr::parse_expression;
use funcdet_core::{BoundaryConditions, CMatrix, Expression, Problem, SolverSettings, C64};
use thiserror::Error;

pub use funcdet_core::detratio::METRIC_MISMATCH_WARNING;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: duplicate key `{key}` in [{section}]")]
    DuplicateKey { line: usize, section: String, key: String },
    #[error("missing {what}")]
    Missing { what: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{0}")]
    Problem(#[from] funcdet_core::Error),
}

impl ConfigError {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Syntax { .. } => "config_syntax",
            ConfigError::UnknownSection { .. } => "unknown_section",
            ConfigError::UnknownKey { .. } => "unknown_key",
            ConfigError::DuplicateKey { .. } => "duplicate_key",
            ConfigError::Missing { .. } => "missing_key",
            ConfigError::Value { .. } => "bad_value",
            ConfigError::Dimension(_) => "dimension",
            ConfigError::Problem(e) => crate::report::error_kind(e),
        }
    }
}

/// A parsed right-hand side.
#[derive(Debug, Clone, PartialEq)]
enum Value {
    Item(String),
    List(Vec<Value>),
}

impl Value {
    fn flatten(&self) -> Vec<&str> {
        match self {
            Value::Item(s) => vec![s.as_str()],
            Value::List(v) => v.iter().flat_map(Value::flatten).collect(),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: Value,
}

type Section = BTreeMap<String, Entry>;

#[derive(Debug, Clone)]
struct Document {
    sections: BTreeMap<String, (usize, Section)>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("problem.1", &["r", "interval", "P", "R", "R_im"]),
    ("problem.2", &["r", "interval", "P", "R", "R_im"]),
    ("boundary", &["M", "N"]),
    ("solver", &["rel_tol", "abs_tol", "zero_mode_tol", "oracle_terms", "samples"]),
];

/// Everything a command needs from a config file.
#[derive(Debug, Clone)]
pub struct Config {
    pub p1: Problem,
    pub p2: Problem,
    pub bc: BoundaryConditions,
    pub settings: SolverSettings,
    pub warnings: Vec<String>,
}

impl Config {
    pub fn problem(&self, which: usize) -> &Problem {
        if which == 2 {
            &self.p2
        } else {
            &self.p1
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn bracket_depth(s: &str) -> i64 {
    let mut quoted = false;
    let mut depth = 0;
    for ch in s.chars() {
        match ch {
            '"' => quoted = !quoted,
            '[' if !quoted => depth += 1,
            ']' if !quoted => depth -= 1,
            _ => {}
        }
    }
    depth
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
}

impl Lexer<'_> {
    fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|c| c.is_whitespace()) {
            self.chars.next();
        }
    }

    /// Comma-separated items up to `close` (or the end of input).
    fn items(&mut self, close: Option<char>) -> Result<Vec<Value>, ConfigError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            match (self.chars.peek().copied(), close) {
                (None, None) => return Ok(out),
                (None, Some(c)) => return Err(self.err(format!("missing `{c}`"))),
                (Some(c), Some(want)) if c == want => {
                    self.chars.next();
                    return Ok(out);
                }
                _ => {}
            }
            out.push(self.item()?);
            self.skip_ws();
            match (self.chars.peek().copied(), close) {
                (Some(','), _) => {
                    self.chars.next();
                }
                (None, None) => return Ok(out),
                (Some(c), Some(want)) if c == want => {}
                (Some(c), _) => return Err(self.err(format!("expected `,` before `{c}`"))),
                (None, Some(c)) => return Err(self.err(format!("missing `{c}`"))),
            }
        }
    }

    fn item(&mut self) -> Result<Value, ConfigError> {
        match self.chars.peek().copied() {
            Some('[') => {
                self.chars.next();
                Ok(Value::List(self.items(Some(']'))?))
            }
            Some('"') => {
                self.chars.next();
                let mut s = String::new();
                for c in self.chars.by_ref() {
                    if c == '"' {
                        return Ok(Value::Item(s));
                    }
                    s.push(c);
                }
                Err(self.err("unterminated string"))
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = self.chars.peek() {
                    if matches!(c, ',' | '[' | ']' | '"') {
                        break;
                    }
                    s.push(c);
                    self.chars.next();
                }
                let s = s.trim().to_string();
                if s.is_empty() {
                    return Err(self.err("empty list entry"));
                }
                Ok(Value::Item(s))
            }
        }
    }
}

fn parse_value(src: &str, line: usize) -> Result<Value, ConfigError> {
    let mut lx = Lexer {
        chars: src.chars().peekable(),
        line,
    };
    let mut items = lx.items(None)?;
    if items.len() == 1 {
        Ok(items.pop().expect("one item"))
    } else if items.is_empty() {
        Err(lx.err("empty value"))
    } else {
        Ok(Value::List(items))
    }
}

fn parse_document(text: &str) -> Result<Document, ConfigError> {
    let mut sections: BTreeMap<String, (usize, Section)> = BTreeMap::new();
    let mut current: Option<String> = None;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, strip_comment(l)));
    while let Some((no, raw)) = lines.next() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax {
                    line: no,
                    message: "section header must end with `]`".into(),
                })?
                .trim()
                .to_string();
            if !SECTIONS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::UnknownSection { line: no, name });
            }
            if sections.contains_key(&name) {
                return Err(ConfigError::Syntax {
                    line: no,
                    message: format!("section [{name}] appears twice"),
                });
            }
            sections.insert(name.clone(), (no, Section::new()));
            current = Some(name);
            continue;
        }
        let (key, rhs) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: no,
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim().to_string();
        let section = current.clone().ok_or_else(|| ConfigError::Syntax {
            line: no,
            message: format!("`{key}` appears before any section header"),
        })?;
        let allowed = SECTIONS.iter().find(|(s, _)| *s == section).expect("known section").1;
        if !allowed.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { line: no, section, key });
        }
        let mut rhs = rhs.trim().to_string();
        while bracket_depth(&rhs) > 0 {
            let (_, more) = lines.next().ok_or_else(|| ConfigError::Syntax {
                line: no,
                message: format!("unclosed `[` in `{key}`"),
            })?;
            rhs.push(' ');
            rhs.push_str(more.trim());
        }
        let value = parse_value(&rhs, no)?;
        let sec = &mut sections.get_mut(&section).expect("inserted").1;
        if sec.contains_key(&key) {
            return Err(ConfigError::DuplicateKey { line: no, section, key });
        }
        sec.insert(key, Entry { line: no, value });
    }
    Ok(Document { sections })
}

/// Parses `re`, `re+imi`, `re-imi`, `imi` (with `i` alone meaning one).
pub fn parse_complex(s: &str) -> Option<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let real = |v: &str| v.parse::<f64>().ok().filter(|x| x.is_finite());
    let Some(body) = t.strip_suffix('i') else {
        return real(&t).map(|re| C64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |v: &str| match v {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        _ => real(v),
    };
    match split {
        Some(k) => Some(C64::new(real(&body[..k])?, imag(&body[k..])?)),
        None => Some(C64::new(0.0, imag(body)?)),
    }
}

struct Reader<'a> {
    name: &'a str,
    section: &'a Section,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.section.get(key)
    }

    fn require(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing {
            what: format!("`{key}` in [{}]", self.name),
        })
    }

    fn bad(entry: &Entry, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            line: entry.line,
            key: key.into(),
            message: message.into(),
        }
    }

    fn scalar<'e>(entry: &'e Entry, key: &str) -> Result<&'e str, ConfigError> {
        match &entry.value {
            Value::Item(s) => Ok(s),
            Value::List(_) => Err(Self::bad(entry, key, "expected a single value")),
        }
    }

    fn reals(entry: &Entry, key: &str) -> Result<Vec<f64>, ConfigError> {
        entry
            .value
            .flatten()
            .into_iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Self::bad(entry, key, format!("`{s}` is not a finite number")))
            })
            .collect()
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        let v = Self::reals(e, key)?;
        match v.as_slice() {
            [x] => Ok(Some(*x)),
            _ => Err(Self::bad(e, key, "expected one number")),
        }
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        let s = Self::scalar(e, key)?;
        s.trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Self::bad(e, key, format!("`{s}` is not a non-negative integer")))
    }

    fn expressions(entry: &Entry, key: &str) -> Result<Vec<Expression>, ConfigError> {
        entry
            .value
            .flatten()
            .into_iter()
            .map(|s| parse_expression(s).map_err(|err| Self::bad(entry, key, format!("`{s}`: {err}"))))
            .collect()
    }
}

fn reader<'a>(doc: &'a Document, name: &'a str) -> Result<Reader<'a>, ConfigError> {
    doc.sections
        .get(name)
        .map(|(_, section)| Reader { name, section })
        .ok_or_else(|| ConfigError::Missing {
            what: format!("section [{name}]"),
        })
}

fn load_problem(doc: &Document, name: &str) -> Result<Problem, ConfigError> {
    let rd = reader(doc, name)?;
    let r = rd.count("r")?.ok_or_else(|| ConfigError::Missing {
        what: format!("`r` in [{name}]"),
    })?;
    let iv = rd.require("interval")?;
    let (a, b) = match Reader::reals(iv, "interval")?.as_slice() {
        [a, b] => (*a, *b),
        _ => return Err(Reader::bad(iv, "interval", "expected two numbers `a, b`")),
    };
    let pe = rd.require("P")?;
    let metric = match Reader::expressions(pe, "P")?.as_slice() {
        [m] => m.clone(),
        _ => return Err(Reader::bad(pe, "P", "expected one expression")),
    };
    let re = Reader::expressions(rd.require("R")?, "R")?;
    let im = match rd.get("R_im") {
        Some(e) => Reader::expressions(e, "R_im")?,
        None => Vec::new(),
    };
    Ok(Problem::new(r, (a, b), metric, re, im)?)
}

fn complex_matrix(entry: &Entry, key: &str, n: usize) -> Result<CMatrix, ConfigError> {
    let items = entry.value.flatten();
    if items.len() != n * n {
        let shape = match &entry.value {
            Value::List(rows) if rows.iter().all(|v| matches!(v, Value::List(_))) => {
                format!("{}x{}", rows.len(), items.len() / rows.len().max(1))
            }
            _ => format!("{} entries", items.len()),
        };
        return Err(ConfigError::Dimension(format!(
            "{key} is {shape}, expected {n}x{n} for r = {}",
            n / 2
        )));
    }
    let data = items
        .into_iter()
        .map(|s| parse_complex(s).ok_or_else(|| Reader::bad(entry, key, format!("`{s}` is not a complex number"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CMatrix::from_vec(n, n, data)?)
}

fn load_settings(doc: &Document) -> Result<SolverSettings, ConfigError> {
    let mut s = SolverSettings::default();
    let Ok(rd) = reader(doc, "solver") else { return Ok(s) };
    let positive = |key: &str, v: Option<f64>, into: &mut f64| -> Result<(), ConfigError> {
        if let Some(x) = v {
            if x <= 0.0 {
                return Err(Reader::bad(rd.get(key).expect("present"), key, "must be positive"));
            }
            *into = x;
        }
        Ok(())
    };
    positive("rel_tol", rd.real("rel_tol")?, &mut s.rel_tol)?;
    positive("abs_tol", rd.real("abs_tol")?, &mut s.abs_tol)?;
    positive("zero_mode_tol", rd.real("zero_mode_tol")?, &mut s.zero_mode_tol)?;
    if let Some(n) = rd.count("oracle_terms")? {
        s.oracle_terms = n;
    }
    if let Some(n) = rd.count("samples")? {
        if n < 2 {
            return Err(Reader::bad(rd.get("samples").expect("present"), "samples", "need at least 2"));
        }
        s.samples = n;
    }
    Ok(s)
}

/// Parses a config holding two problems, the shared boundary conditions and
/// optional solver settings.
pub fn load_problem_pair(text: &str) -> Result<Config, ConfigError> {
    let doc = parse_document(text)?;
    let p1 = load_problem(&doc, "problem.1")?;
    let p2 = load_problem(&doc, "problem.2")?;
    if p1.r() != p2.r() {
        return Err(ConfigError::Dimension(format!(
            "problem.1 has r = {}, problem.2 has r = {}",
            p1.r(),
            p2.r()
        )));
    }
    if p1.interval() != p2.interval() {
        return Err(ConfigError::Dimension(format!(
            "problem.1 is on {:?}, problem.2 on {:?}",
            p1.interval(),
            p2.interval()
        )));
    }
    let rd = reader(&doc, "boundary")?;
    let n = 2 * p1.r();
    let m = complex_matrix(rd.require("M")?, "M", n)?;
    let nn = complex_matrix(rd.require("N")?, "N", n)?;
    let bc = BoundaryConditions::new(m, nn)?;
    let settings = load_settings(&doc)?;
    let mut warnings = Vec::new();
    if p1.metric() != p2.metric() {
        warnings.push(METRIC_MISMATCH_WARNING.to_string());
    }
    Ok(Config {
        p1,
        p2,
        bc,
        settings,
        warnings,
    })
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Item(s) => write!(f, "{s:?}"),
            Value::List(v) => {
                write!(f, "[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use funcdet_core::boundary::classify;
    use funcdet_core::BcKind;

    const DIRICHLET: &str = r#"
[problem.1]
r = 1
interval = 0, 1
P = "1"
R = [["1"]]

[problem.2]
r = 1
interval = 0, 1
P = "1"
R = [["0"]]

[boundary]
M = [[1, 0], [0, 0]]
N = [[0, 0], [1, 0]]
"#;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn minimal_dirichlet() {
        let cfg = load_problem_pair(DIRICHLET).unwrap();
        assert_eq!(classify(&cfg.bc).unwrap().kind, BcKind::Separated);
        assert_eq!(cfg.settings, SolverSettings::default());
        assert!(cfg.warnings.is_empty());
        assert_eq!(cfg.p1.p_at(0.3), 1.0);
        assert_eq!(cfg.p1.r_at(0.3)[0], c(1.0, 0.0));
        assert_eq!(cfg.p2.r_at(0.3)[0], c(0.0, 0.0));
    }

    #[test]
    fn three_by_three_m_is_a_dimension_error() {
        let text = DIRICHLET.replace("M = [[1, 0], [0, 0]]", "M = [[1, 0, 0], [0, 0, 0], [0, 0, 0]]");
        let err = load_problem_pair(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Dimension(ref m) if m.contains("3x3")), "{err}");
    }

    #[test]
    fn mismatched_metric_warns() {
        let text = DIRICHLET.replacen("P = \"1\"", "P = \"4\"", 1);
        let cfg = load_problem_pair(&text).unwrap();
        assert_eq!(cfg.warnings, vec![METRIC_MISMATCH_WARNING.to_string()]);
    }

    #[test]
    fn unknown_keys_and_sections() {
        let text = DIRICHLET.replace("[boundary]", "[boundary]\nQ = 1");
        assert!(matches!(load_problem_pair(&text), Err(ConfigError::UnknownKey { ref key, .. }) if key == "Q"));
        let text = format!("{DIRICHLET}\n[solvr]\nrel_tol = 1e-9\n");
        assert!(matches!(load_problem_pair(&text), Err(ConfigError::UnknownSection { .. })));
        let text = format!("{DIRICHLET}\n[solver]\nreltol = 1e-9\n");
        assert!(matches!(load_problem_pair(&text), Err(ConfigError::UnknownKey { .. })));
    }

    #[test]
    fn duplicates_and_missing() {
        let text = DIRICHLET.replacen("r = 1", "r = 1\nr = 1", 1);
        assert!(matches!(load_problem_pair(&text), Err(ConfigError::DuplicateKey { .. })));
        let text = DIRICHLET.replace("N = [[0, 0], [1, 0]]", "");
        assert!(matches!(load_problem_pair(&text), Err(ConfigError::Missing { .. })));
    }

    #[test]
    fn solver_settings_override_defaults() {
        let text = format!("{DIRICHLET}\n[solver]\nrel_tol = 1e-9  # looser\noracle_terms = 50\n");
        let cfg = load_problem_pair(&text).unwrap();
        assert_eq!(cfg.settings.rel_tol, 1e-9);
        assert_eq!(cfg.settings.oracle_terms, 50);
        assert_eq!(cfg.settings.abs_tol, 1e-12);
        let text = format!("{DIRICHLET}\n[solver]\nrel_tol = -1\n");
        assert!(matches!(load_problem_pair(&text), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn multi_line_system() {
        let text = r#"
[problem.1]
r = 2
interval = -1.5, 1.5
P = "1"
R = [["1", "0.5"],
     ["0.5", "2"]]
R_im = [["0", "0.25"],
        ["-0.25", "0"]]
[problem.2]
r = 2
interval = -1.5, 1.5
P = "1"
R = ["1", "0", "0", "1"]
[boundary]
M = [["0.54-0.84i", 0, 0, 0],
     [0, "0.54+0.84i", 0, 0],
     [0, 0, -1, 0],
     [0, 0, 0, -1]]
N = [[-1, 0, 0, 0], [0, -1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
"#;
        let cfg = load_problem_pair(text).unwrap();
        assert_eq!(cfg.p1.r(), 2);
        assert_eq!(cfg.p1.r_at(0.0)[1], c(0.5, 0.25));
        assert_eq!(cfg.bc.m()[(1, 1)], c(0.54, 0.84));
        assert_eq!(cfg.bc.m()[(0, 0)], c(0.54, -0.84));
    }

    #[test]
    fn r_must_match_between_problems() {
        let text = DIRICHLET.replacen("r = 1", "r = 2", 1);
        assert!(load_problem_pair(&text).is_err());
        let text = DIRICHLET.replacen("interval = 0, 1", "interval = 0, 2", 1);
        assert!(matches!(load_problem_pair(&text), Err(ConfigError::Dimension(_))));
    }

    #[test]
    fn bad_expression_names_the_key() {
        let text = DIRICHLET.replacen("R = [[\"1\"]]", "R = [[\"1 + y\"]]", 1);
        let err = load_problem_pair(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Value { ref key, .. } if key == "R"), "{err}");
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1"), Some(c(1.0, 0.0)));
        assert_eq!(parse_complex("-2.5"), Some(c(-2.5, 0.0)));
        assert_eq!(parse_complex("1+2i"), Some(c(1.0, 2.0)));
        assert_eq!(parse_complex("1 - 2i"), Some(c(1.0, -2.0)));
        assert_eq!(parse_complex("1e-3-2e+1i"), Some(c(1e-3, -20.0)));
        assert_eq!(parse_complex("-i"), Some(c(0.0, -1.0)));
        assert_eq!(parse_complex("3i"), Some(c(0.0, 3.0)));
        assert_eq!(parse_complex("2-i"), Some(c(2.0, -1.0)));
        assert_eq!(parse_complex("abc"), None);
        assert_eq!(parse_complex("inf"), None);
        assert_eq!(parse_complex("1+2j"), None);
    }

    #[test]
    fn comments_and_quoted_hashes() {
        let v = parse_value(r#"["a#b", 2] "#, 1).unwrap();
        assert_eq!(v.to_string(), r#"["a#b", "2"]"#);
        assert_eq!(strip_comment(r#"P = "1" # note"#).trim(), r#"P = "1""#);
    }

    #[test]
    fn malformed_lists() {
        assert!(parse_value("[1, 2", 1).is_err());
        assert!(parse_value("[1 2]", 1).is_ok());
        assert!(parse_value("[1,, 2]", 1).is_err());
        assert!(parse_value("\"open", 1).is_err());
    }
}
