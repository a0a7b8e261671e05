use super::{Expr, ExprError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

struct Token {
    tok: Tok,
    column: usize,
}

fn syntax(column: usize, message: impl Into<String>) -> ExprError {
    ExprError::Syntax { column, message: message.into() }
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, column });
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            let mut integral = true;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                integral &= chars[i] != '.';
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| syntax(column, format!("malformed number `{text}`")))?;
            out.push(Token { tok: Tok::Num(v, integral), column });
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), column });
        } else {
            return Err(syntax(column, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

struct Parser<'a, S> {
    toks: Vec<Token>,
    pos: usize,
    end_column: usize,
    vars: &'a [S],
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.toks.get(self.pos + offset).map(|t| &t.tok)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_column, |t| t.column)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ExprError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(syntax(self.column(), format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                lhs = lhs + self.term()?;
            } else if self.eat(&Tok::Minus) {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(&Tok::Star) {
                lhs = lhs * self.unary()?;
            } else if self.eat(&Tok::Slash) {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(&Tok::Minus) {
            // A literal directly after `-` becomes a negative constant unless it is a power base.
            if let (Some(Tok::Num(v, _)), next) = (self.peek(), self.peek_at(1)) {
                if next != Some(&Tok::Caret) {
                    let v = -*v;
                    self.pos += 1;
                    return Ok(Expr::Const(v));
                }
            }
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !self.eat(&Tok::Caret) {
            return Ok(base);
        }
        let column = self.column();
        let negative = self.eat(&Tok::Minus);
        match self.peek() {
            Some(Tok::Num(v, true)) if v.abs() <= i32::MAX as f64 => {
                let k = *v as i32;
                self.pos += 1;
                Ok(base.pow(if negative { -k } else { k }))
            }
            Some(Tok::Num(..)) => Err(ExprError::NonIntegerExponent { column }),
            _ => Err(syntax(column, "expected integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let column = self.column();
        match self.peek().cloned() {
            Some(Tok::Num(v, _)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if (name == "max" || name == "min") && self.eat(&Tok::LParen) {
                    let mut args = vec![self.expr()?];
                    while self.eat(&Tok::Comma) {
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`,` or `)`")?;
                    if args.len() < 2 {
                        return Err(syntax(column, format!("{name} needs at least two arguments")));
                    }
                    return Ok(if name == "max" {
                        Expr::Max(args)
                    } else {
                        -Expr::Max(args.into_iter().map(|a| -a).collect())
                    });
                }
                self.vars
                    .iter()
                    .position(|v| v.as_ref() == name)
                    .map(Expr::Var)
                    .ok_or(ExprError::UndeclaredVariable { name, column })
            }
            Some(_) => Err(syntax(column, "expected a number, variable or `(`")),
            None => Err(syntax(column, "unexpected end of input")),
        }
    }
}

/// Parses `src` with variables resolved against `variables` by position.
pub fn parse_expression<S: AsRef<str>>(src: &str, variables: &[S]) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, end_column: src.chars().count() + 1, vars: variables };
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return Err(syntax(p.column(), "unexpected trailing input"));
    }
    Ok(e)
}
