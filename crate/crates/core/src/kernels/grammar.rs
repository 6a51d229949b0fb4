//! The `name(arg, key=value, ...)` mini-grammar shared by kernel strings.

use crate::error::{parse_error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Positional(String),
    Named(String, String),
}

/// A parsed call with 1-based columns for error reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Call {
    pub name: String,
    pub name_column: usize,
    pub args: Vec<(Arg, usize)>,
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl<'a> Cursor<'a> {
    fn column(&self) -> usize {
        self.chars.get(self.pos).map(|c| c.0 + 1).unwrap_or(self.src.chars().count() + 1)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        match self.peek() {
            Some(x) if x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(x) => Err(parse_error(1, self.column(), format!("expected `{c}`, found `{x}`"))),
            None => Err(parse_error(1, self.column(), format!("expected `{c}`, found end of input"))),
        }
    }

    fn token(&mut self) -> Result<(String, usize)> {
        self.skip_ws();
        let col = self.column();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '+'))
        {
            self.pos += 1;
        }
        if self.pos == start {
            let found = self.peek().map(|c| format!("`{c}`")).unwrap_or("end of input".into());
            return Err(parse_error(1, col, format!("expected a name or number, found {found}")));
        }
        Ok((self.chars[start..self.pos].iter().map(|c| c.1).collect(), col))
    }
}

/// Parses `name(args)`. The whole input must be consumed.
pub fn parse_call(src: &str) -> Result<Call> {
    let mut cur = Cursor {
        chars: src.chars().enumerate().collect(),
        pos: 0,
        src,
    };
    let (name, name_column) = cur.token()?;
    if !name.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
        return Err(parse_error(1, name_column, format!("`{name}` is not a name")));
    }
    cur.eat('(')?;
    let mut args = Vec::new();
    cur.skip_ws();
    if cur.peek() == Some(')') {
        cur.pos += 1;
    } else {
        loop {
            let (first, col) = cur.token()?;
            cur.skip_ws();
            if cur.peek() == Some('=') {
                cur.pos += 1;
                let (value, _) = cur.token()?;
                args.push((Arg::Named(first, value), col));
            } else {
                args.push((Arg::Positional(first), col));
            }
            cur.skip_ws();
            match cur.peek() {
                Some(',') => cur.pos += 1,
                Some(')') => {
                    cur.pos += 1;
                    break;
                }
                Some(c) => return Err(parse_error(1, cur.column(), format!("expected `,` or `)`, found `{c}`"))),
                None => return Err(parse_error(1, cur.column(), "unclosed `(`")),
            }
        }
    }
    cur.skip_ws();
    if let Some(c) = cur.peek() {
        return Err(parse_error(1, cur.column(), format!("trailing input starting at `{c}`")));
    }
    Ok(Call {
        name,
        name_column,
        args,
    })
}

fn parse_f64(s: &str, col: usize) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(1, col, format!("`{s}` is not a finite number"))),
    }
}

impl Call {
    fn named(&self, key: &str) -> Option<(&str, usize)> {
        self.args.iter().find_map(|(a, col)| match a {
            Arg::Named(k, v) if k == key => Some((v.as_str(), *col)),
            _ => None,
        })
    }

    /// Rejects positional arguments, unknown keys and repeated keys.
    pub fn expect_keys(&self, allowed: &[&str]) -> Result<()> {
        let mut seen: Vec<&str> = Vec::new();
        for (a, col) in &self.args {
            match a {
                Arg::Positional(v) => {
                    return Err(parse_error(1, *col, format!("`{}` takes named arguments, got `{v}`", self.name)))
                }
                Arg::Named(k, _) => {
                    if !allowed.contains(&k.as_str()) {
                        return Err(parse_error(
                            1,
                            *col,
                            format!("unknown argument `{k}` for `{}` (expected one of {})", self.name, allowed.join(", ")),
                        ));
                    }
                    if seen.contains(&k.as_str()) {
                        return Err(parse_error(1, *col, format!("argument `{k}` given twice")));
                    }
                    seen.push(k);
                }
            }
        }
        Ok(())
    }

    pub fn number(&self, key: &str) -> Result<f64> {
        match self.named(key) {
            Some((v, col)) => parse_f64(v, col),
            None => Err(parse_error(
                1,
                self.name_column,
                format!("`{}` is missing argument `{key}`", self.name),
            )),
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool> {
        match self.named(key) {
            None => Ok(false),
            Some(("true", _)) => Ok(true),
            Some(("false", _)) => Ok(false),
            Some((v, col)) => Err(parse_error(1, col, format!("`{key}` must be true or false, got `{v}`"))),
        }
    }

    /// All arguments as positional numbers.
    pub fn positional(&self) -> Result<Vec<f64>> {
        self.args
            .iter()
            .map(|(a, col)| match a {
                Arg::Positional(v) => parse_f64(v, *col),
                Arg::Named(k, _) => Err(parse_error(1, *col, format!("`{}` takes positional numbers, got `{k}=`", self.name))),
            })
            .collect()
    }
}
