//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//!
//! pred   := conj ('or' conj)*
//! conj   := cmp ('and' cmp)*
//! cmp    := expr ('<' | '<=' | '>' | '>=') expr | '(' pred ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^3^2` is `2^9`.

use super::predicate::{Comparison, Predicate};
use super::{ExprError, Expression, Func, Node, FUNCTIONS, RESERVED};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Eof,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Lt => "`<`".into(),
        Tok::Le => "`<=`".into(),
        Tok::Gt => "`>`".into(),
        Tok::Ge => "`>=`".into(),
        Tok::And => "`and`".into(),
        Tok::Or => "`or`".into(),
        Tok::Eof => "end of input".into(),
    }
}

fn syntax(position: usize, expected: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        position,
        expected: expected.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'<' | b'>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                if eq {
                    i += 1;
                }
                match (c, eq) {
                    (b'<', false) => Tok::Lt,
                    (b'<', true) => Tok::Le,
                    (_, false) => Tok::Gt,
                    (_, true) => Tok::Ge,
                }
            }
            b'&' if bytes.get(i + 1) == Some(&b'&') => {
                i += 1;
                Tok::And
            }
            b'|' if bytes.get(i + 1) == Some(&b'|') => {
                i += 1;
                Tok::Or
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let lit = &text[i..j];
                let v: f64 = lit.parse().map_err(|_| syntax(start, "a number"))?;
                i = j;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = &text[i..j];
                i = j;
                let tok = match word {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    _ => Tok::Ident(word.to_string()),
                };
                out.push((tok, start));
                continue;
            }
            _ => return Err(syntax(start, "an operator, number, identifier or parenthesis")),
        };
        i += 1;
        out.push((tok, start));
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Check that coordinate names are distinct, valid and not reserved.
pub fn validate_coordinates(coordinates: &[String]) -> Result<(), ExprError> {
    for (i, name) in coordinates.iter().enumerate() {
        if !is_identifier(name) {
            return Err(ExprError::InvalidCoordinates(format!(
                "`{name}` is not a valid identifier"
            )));
        }
        if FUNCTIONS.contains(&name.as_str()) || RESERVED.contains(&name.as_str()) {
            return Err(ExprError::InvalidCoordinates(format!("`{name}` is reserved")));
        }
        if coordinates[..i].contains(name) {
            return Err(ExprError::InvalidCoordinates(format!("`{name}` appears twice")));
        }
    }
    Ok(())
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    coords: &'a [String],
}

impl<'a> Parser<'a> {
    fn new(text: &str, coords: &'a [String]) -> Result<Self, ExprError> {
        validate_coordinates(coords)?;
        if text.trim().is_empty() {
            return Err(syntax(0, "an expression"));
        }
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
            coords,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ExprError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.offset(),
                format!("{} but found {}", describe(&tok), describe(self.peek())),
            ))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    lhs = Node::add(lhs, self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    lhs = Node::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    lhs = Node::mul(lhs, self.unary()?);
                }
                Tok::Slash => {
                    self.bump();
                    lhs = Node::div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Node::neg(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::pow(base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Node::Constant(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    return self.call(name, args);
                }
                if let Some(i) = self.coords.iter().position(|c| *c == name) {
                    return Ok(Node::Coordinate(i));
                }
                if name == "pi" {
                    return Ok(Node::Constant(std::f64::consts::PI));
                }
                Err(ExprError::UnknownIdentifier(name))
            }
            t => Err(syntax(
                at,
                format!("a number, identifier or `(` but found {}", describe(&t)),
            )),
        }
    }

    fn call(&mut self, name: String, mut args: Vec<Node>) -> Result<Node, ExprError> {
        if name == "atan2" {
            if args.len() != 2 {
                return Err(ExprError::Arity {
                    function: name,
                    expected: 2,
                    got: args.len(),
                });
            }
            let x = args.pop().unwrap();
            let y = args.pop().unwrap();
            return Ok(Node::atan2(y, x));
        }
        let Some(func) = Func::from_name(&name) else {
            return Err(ExprError::UnknownIdentifier(name));
        };
        if args.len() != 1 {
            return Err(ExprError::Arity {
                function: name,
                expected: 1,
                got: args.len(),
            });
        }
        Ok(Node::call(func, args.pop().unwrap()))
    }

    fn predicate(&mut self) -> Result<Predicate, ExprError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Or {
            self.bump();
            lhs = Predicate::Or(Box::new(lhs), Box::new(self.conjunction()?));
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Predicate, ExprError> {
        let mut lhs = self.comparison()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = Predicate::And(Box::new(lhs), Box::new(self.comparison()?));
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> Result<Predicate, ExprError> {
        if *self.peek() == Tok::LParen {
            // `(` opens either a nested predicate or a parenthesized expression
            let save = self.pos;
            self.bump();
            if let Ok(p) = self.predicate() {
                if *self.peek() == Tok::RParen {
                    self.bump();
                    return Ok(p);
                }
            }
            self.pos = save;
        }
        let lhs = self.expr()?;
        let at = self.offset();
        let op = match self.bump() {
            Tok::Lt => Comparison::Lt,
            Tok::Le => Comparison::Le,
            Tok::Gt => Comparison::Gt,
            Tok::Ge => Comparison::Ge,
            t => {
                return Err(syntax(
                    at,
                    format!("a comparison operator but found {}", describe(&t)),
                ))
            }
        };
        let rhs = self.expr()?;
        let arity = self.coords.len();
        Ok(Predicate::Compare(
            Expression::new(lhs, arity)?,
            op,
            Expression::new(rhs, arity)?,
        ))
    }

    fn finish(&mut self) -> Result<(), ExprError> {
        if *self.peek() != Tok::Eof {
            return Err(syntax(
                self.offset(),
                format!("end of input but found {}", describe(self.peek())),
            ));
        }
        Ok(())
    }
}

/// Parse `text` as an expression over `coordinates`.
pub fn parse(text: &str, coordinates: &[String]) -> Result<Expression, ExprError> {
    let mut p = Parser::new(text, coordinates)?;
    let root = p.expr()?;
    p.finish()?;
    Expression::new(root, coordinates.len())
}

/// Parse a boolean guard such as `H < 0 and r > 0.05`.
pub fn parse_predicate(text: &str, coordinates: &[String]) -> Result<Predicate, ExprError> {
    let mut p = Parser::new(text, coordinates)?;
    let pred = p.predicate()?;
    p.finish()?;
    Ok(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn numbers_with_exponents() {
        let e = parse("1.5e2 + .5 + 2E-1", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), 150.0 + 0.5 + 0.2);
    }

    #[test]
    fn pi_is_builtin() {
        let e = parse("pi", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), std::f64::consts::PI);
    }

    #[test]
    fn unknown_identifier() {
        assert_eq!(
            parse("x + z", &xs()),
            Err(ExprError::UnknownIdentifier("z".into()))
        );
        assert_eq!(
            parse("foo(x)", &xs()),
            Err(ExprError::UnknownIdentifier("foo".into()))
        );
    }

    #[test]
    fn wrong_arity() {
        assert!(matches!(
            parse("sin(x, y)", &xs()),
            Err(ExprError::Arity { got: 2, .. })
        ));
        assert!(matches!(
            parse("atan2(x)", &xs()),
            Err(ExprError::Arity { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("x + * y", &xs()) {
            Err(ExprError::Syntax { position, .. }) => assert_eq!(position, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("(x + y", &xs()), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x y", &xs()), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("", &xs()), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x $ y", &xs()), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn coordinate_names_are_validated() {
        let dup = vec!["x".to_string(), "x".to_string()];
        assert!(matches!(parse("x", &dup), Err(ExprError::InvalidCoordinates(_))));
        let reserved = vec!["sin".to_string()];
        assert!(matches!(parse("1", &reserved), Err(ExprError::InvalidCoordinates(_))));
        let bad = vec!["1x".to_string()];
        assert!(matches!(parse("1", &bad), Err(ExprError::InvalidCoordinates(_))));
    }

    #[test]
    fn predicate_grammar() {
        let p = parse_predicate("(x + 1) > 0 and (y < 1 or y > 2)", &xs()).unwrap();
        assert!(p.eval(&[0.0, 3.0]).unwrap());
        assert!(!p.eval(&[0.0, 1.5]).unwrap());
        assert!(!p.eval(&[-2.0, 0.0]).unwrap());
        let p = parse_predicate("x >= 0 && y <= 0 || x < -5", &xs()).unwrap();
        assert!(p.eval(&[0.0, 0.0]).unwrap());
        assert!(p.eval(&[-6.0, 1.0]).unwrap());
        assert!(parse_predicate("x + 1", &xs()).is_err());
    }
}
