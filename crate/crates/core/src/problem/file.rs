//! Line-oriented problem files.
//!
//! ```text
//! vars x 2
//! vars y 1
//! upper x1 + y1^2
//! lower x1
//! lower x2
//! constraint_x x1 + x2 - 1
//! constraint_xy x1 - y1
//! bound x1 -1 2
//! known h 0.5
//! ```
//!
//! `#` starts a comment. `known h|x|y ...` lines form an optional reference
//! solution that the solver never reads.

use std::path::Path;

use super::{BilevelProblem, Bound, KnownOptimum, ProblemError};
use crate::expr::{parse_expression, Expr};

/// Reads and parses a problem file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<BilevelProblem, ProblemError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io { path: path.to_path_buf(), source })?;
    parse_problem(&text)
}

fn format_err(line: usize, message: impl Into<String>) -> ProblemError {
    ProblemError::Format { line, message: message.into() }
}

fn number(token: &str, line: usize) -> Result<f64, ProblemError> {
    match token {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => token.parse().map_err(|_| format_err(line, format!("`{token}` is not a number"))),
    }
}

fn numbers(tokens: &str, line: usize) -> Result<Vec<f64>, ProblemError> {
    tokens.split_whitespace().map(|t| number(t, line)).collect()
}

/// Parses problem-file text.
pub fn parse_problem(text: &str) -> Result<BilevelProblem, ProblemError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();

    let (mut n, mut m) = (None, None);
    for &(line, l) in &lines {
        let mut it = l.split_whitespace();
        if it.next() != Some("vars") {
            continue;
        }
        let (Some(kind), Some(count), None) = (it.next(), it.next(), it.next()) else {
            return Err(format_err(line, "expected `vars x N` or `vars y M`"));
        };
        let count: usize = count.parse().map_err(|_| format_err(line, format!("`{count}` is not a count")))?;
        let slot = match kind {
            "x" => &mut n,
            "y" => &mut m,
            other => return Err(format_err(line, format!("unknown variable block `{other}`"))),
        };
        if slot.replace(count).is_some() {
            return Err(format_err(line, format!("duplicate `vars {kind}`")));
        }
    }
    let n = n.ok_or_else(|| format_err(lines.first().map_or(1, |l| l.0), "missing `vars x N`"))?;
    let m = m.unwrap_or(0);
    if n == 0 {
        return Err(format_err(1, "`vars x` must be at least 1"));
    }
    let names = BilevelProblem::variable_names(n, m);
    let expr = |src: &str, line: usize| -> Result<Expr, ProblemError> {
        if src.is_empty() {
            return Err(format_err(line, "missing expression"));
        }
        parse_expression(src, &names).map_err(|source| ProblemError::Expr { line, source })
    };

    let mut upper = None;
    let mut lower = Vec::new();
    let mut cx = Vec::new();
    let mut cxy = Vec::new();
    let mut bounds = Vec::new();
    let mut known = KnownOptimum::default();
    let mut has_known = false;
    for &(line, l) in &lines {
        let (head, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        let rest = rest.trim();
        match head {
            "vars" => {}
            "upper" => {
                if upper.replace(expr(rest, line)?).is_some() {
                    return Err(format_err(line, "duplicate `upper`"));
                }
            }
            "lower" => lower.push(expr(rest, line)?),
            "constraint_x" => cx.push(expr(rest, line)?),
            "constraint_xy" => cxy.push(expr(rest, line)?),
            "bound" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let [var, lo, hi] = parts[..] else {
                    return Err(format_err(line, "expected `bound <var> <lo> <hi>`"));
                };
                let var = names
                    .iter()
                    .position(|v| v == var)
                    .ok_or_else(|| format_err(line, format!("undeclared variable `{var}`")))?;
                let (lo, hi) = (number(lo, line)?, number(hi, line)?);
                if lo > hi {
                    return Err(format_err(line, "bound has lo > hi"));
                }
                bounds.push(Bound { var, lo, hi });
            }
            "known" => {
                has_known = true;
                let (what, vals) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                let vals = numbers(vals, line)?;
                match (what, vals.len()) {
                    ("h", 1) => known.h = Some(vals[0]),
                    ("x", len) if len == n => known.x = Some(vals),
                    ("y", len) if len == m => known.y = Some(vals),
                    _ => return Err(format_err(line, format!("malformed `known {what}` line"))),
                }
            }
            other => return Err(format_err(line, format!("unknown directive `{other}`"))),
        }
    }
    let upper = upper.ok_or_else(|| format_err(lines.last().map_or(1, |l| l.0), "missing `upper`"))?;
    if lower.is_empty() {
        return Err(format_err(lines.last().map_or(1, |l| l.0), "missing `lower`"));
    }
    let problem = BilevelProblem::new(n, m, upper, lower, cx, cxy, bounds)?;
    Ok(if has_known { problem.with_known(known) } else { problem })
}
