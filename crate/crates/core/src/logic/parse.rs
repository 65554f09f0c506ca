use serde::{Deserialize, Serialize};

use super::{Atom, Rule, Term};
use crate::error::{Error, Result};

/// Line layout of a knowledge-base file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactFormat {
    /// `pred(a,b).`
    #[default]
    Prolog,
    /// `a<TAB>pred<TAB>b`
    Tsv,
}

impl std::str::FromStr for FactFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prolog" | "pl" | "nl" => Ok(FactFormat::Prolog),
            "tsv" => Ok(FactFormat::Tsv),
            other => Err(Error::Invalid(format!("unknown fact format `{other}`"))),
        }
    }
}

fn perr(line: usize, text: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        text: text.to_string(),
        message: message.into(),
    }
}

/// Parses one ground fact. Errors report line 1; use [`parse_kb`](super::parse_kb)
/// for multi-line input.
pub fn parse_fact_line(line: &str, format: FactFormat) -> Result<Atom> {
    parse_fact_at(line, format, 1)
}

pub(crate) fn parse_fact_at(line: &str, format: FactFormat, lineno: usize) -> Result<Atom> {
    let text = line.trim();
    if text.is_empty() {
        return Err(perr(lineno, line, "empty line"));
    }
    let atom = match format {
        FactFormat::Prolog => {
            let (atom, rest) = parse_prolog_atom(text).map_err(|m| perr(lineno, line, m))?;
            let rest = rest.trim();
            if !(rest.is_empty() || rest == ".") {
                return Err(perr(lineno, line, "unexpected trailing text"));
            }
            atom
        }
        FactFormat::Tsv => {
            let fields: Vec<&str> = text.split('\t').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(perr(
                    lineno,
                    line,
                    format!("expected 3 tab-separated fields, got {}", fields.len()),
                ));
            }
            if fields.iter().any(|f| f.is_empty()) {
                return Err(perr(lineno, line, "empty field"));
            }
            Atom::parse_args(fields[1], fields[0], fields[2]).map_err(|e| perr(lineno, line, e.to_string()))?
        }
    };
    if !atom.is_ground() {
        return Err(perr(lineno, line, "facts must be ground (argument spelled like a variable)"));
    }
    Ok(atom)
}

/// Parses `head :- b1, b2.` (or a bare fact) in prolog layout.
pub fn parse_rule_line(line: &str) -> Result<Rule> {
    parse_rule_at(line, 1)
}

pub(crate) fn parse_rule_at(line: &str, lineno: usize) -> Result<Rule> {
    let text = line.trim();
    let (head, mut rest) = parse_prolog_atom(text).map_err(|m| perr(lineno, line, m))?;
    rest = rest.trim_start();
    let mut body = Vec::new();
    if let Some(after) = rest.strip_prefix(":-") {
        rest = after;
        loop {
            let (atom, r) = parse_prolog_atom(rest.trim_start()).map_err(|m| perr(lineno, line, m))?;
            body.push(atom);
            let r = r.trim_start();
            if let Some(next) = r.strip_prefix(',') {
                rest = next;
            } else {
                rest = r;
                break;
            }
        }
    }
    let rest = rest.trim();
    if !(rest.is_empty() || rest == ".") {
        return Err(perr(lineno, line, "unexpected trailing text"));
    }
    Rule::new(head, body).map_err(|e| perr(lineno, line, e.to_string()))
}

/// Parses `pred(a, b)` at the start of `text`, returning the rest.
fn parse_prolog_atom(text: &str) -> std::result::Result<(Atom, &str), String> {
    let open = text.find('(').ok_or("missing `(`")?;
    let pred = text[..open].trim();
    if pred.is_empty() || pred.contains(|c: char| c.is_whitespace() || c == ',' || c == ')') {
        return Err(format!("bad predicate name `{pred}`"));
    }
    let close = text[open..].find(')').ok_or("missing `)`")? + open;
    let inner = &text[open + 1..close];
    let args: Vec<&str> = inner.split(',').map(str::trim).collect();
    if args.len() != 2 {
        return Err(format!("arity must be 2, got {}", args.len()));
    }
    if args.iter().any(|a| a.is_empty() || a.contains(|c: char| c.is_whitespace() || c == '(')) {
        return Err("malformed argument".into());
    }
    let atom = Atom::new(
        pred,
        Term::parse(args[0]).map_err(|e| e.to_string())?,
        Term::parse(args[1]).map_err(|e| e.to_string())?,
    );
    Ok((atom, &text[close + 1..]))
}

/// Serializes a fact in the given layout.
pub fn format_atom(atom: &Atom, format: FactFormat) -> String {
    match format {
        FactFormat::Prolog => format!("{}({},{}).", atom.predicate, atom.args[0], atom.args[1]),
        FactFormat::Tsv => format!("{}\t{}\t{}", atom.args[0], atom.predicate, atom.args[1]),
    }
}
