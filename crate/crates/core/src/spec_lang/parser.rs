use super::ast::{Predicate, PredicateTable, Spec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unknown predicate `{name}` at {line}:{col}")]
    UnknownPredicate { name: String, line: usize, col: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Achieve,
    Ensuring,
    Or,
    And,
    Semi,
    LParen,
    RParen,
    Ident(String),
    Eof,
}

struct Lexed {
    toks: Vec<Tok>,
    /// byte offset of each token, for error positions
    offs: Vec<usize>,
    src: String,
}

impl Lexed {
    fn pos(&self, idx: usize) -> (usize, usize) {
        let off = self.offs.get(idx).copied().unwrap_or(self.src.len());
        let mut line = 1;
        let mut col = 1;
        for (i, c) in self.src.char_indices() {
            if i >= off {
                break;
            }
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        (line, col)
    }
}

fn lex(src: &str) -> Result<Lexed, ParseError> {
    let mut toks = Vec::new();
    let mut offs = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        offs.push(i);
        match c {
            '(' => {
                toks.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                toks.push(Tok::RParen);
                i += 1;
            }
            ';' => {
                toks.push(Tok::Semi);
                i += 1;
            }
            _ if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < bytes.len() {
                    let d = bytes[i] as char;
                    if d.is_ascii_alphanumeric() || d == '_' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word = &src[start..i];
                toks.push(match word {
                    "achieve" => Tok::Achieve,
                    "ensuring" => Tok::Ensuring,
                    "or" => Tok::Or,
                    "and" => Tok::And,
                    _ => Tok::Ident(word.to_string()),
                });
            }
            other => {
                let lexed = Lexed { toks, offs, src: src.to_string() };
                let (line, col) = lexed.pos(lexed.toks.len());
                return Err(ParseError::Syntax {
                    line,
                    col,
                    message: format!("unexpected character `{other}`"),
                });
            }
        }
    }
    offs.push(src.len());
    toks.push(Tok::Eof);
    Ok(Lexed { toks, offs, src: src.to_string() })
}

struct Parser<'a> {
    lx: Lexed,
    at: usize,
    table: &'a PredicateTable,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.lx.toks[self.at]
    }

    fn bump(&mut self) -> Tok {
        let t = self.lx.toks[self.at].clone();
        self.at += 1;
        t
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.lx.pos(self.at);
        ParseError::Syntax { line, col, message: message.into() }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {:?}", self.peek())))
        }
    }

    /// Looking past any `(`s, does a specification start here? Used to
    /// decide whether `or` continues a predicate or is specification
    /// choice, and whether `(` opens a sub-spec or a grouped predicate.
    fn starts_spec(&self, mut idx: usize) -> bool {
        while self.lx.toks.get(idx) == Some(&Tok::LParen) {
            idx += 1;
        }
        self.lx.toks.get(idx) == Some(&Tok::Achieve)
    }

    // spec := seq ('or' seq)*
    fn spec(&mut self) -> Result<Spec, ParseError> {
        let mut acc = self.seq()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.seq()?;
            acc = Spec::Choice(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    // seq := ens (';' ens)*
    fn seq(&mut self) -> Result<Spec, ParseError> {
        let mut acc = self.ens()?;
        while *self.peek() == Tok::Semi {
            self.bump();
            let rhs = self.ens()?;
            acc = Spec::Seq(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    // ens := base ('ensuring' predicate)*
    fn ens(&mut self) -> Result<Spec, ParseError> {
        let mut acc = self.base()?;
        while *self.peek() == Tok::Ensuring {
            self.bump();
            let b = self.predicate()?;
            acc = Spec::Ensuring(Box::new(acc), b);
        }
        Ok(acc)
    }

    // base := 'achieve' predicate | '(' spec ')'
    fn base(&mut self) -> Result<Spec, ParseError> {
        match self.peek() {
            Tok::Achieve => {
                self.bump();
                Ok(Spec::Achieve(self.predicate()?))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.spec()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.err("expected `achieve` or `(`")),
        }
    }

    // predicate := pand ('or' pand)*   -- only while the right-hand side
    // is a predicate, not a sub-spec
    fn predicate(&mut self) -> Result<Predicate, ParseError> {
        let mut acc = self.pand()?;
        while *self.peek() == Tok::Or && !self.starts_spec(self.at + 1) {
            self.bump();
            let rhs = self.pand()?;
            acc = Predicate::Or(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    // pand := patom ('and' patom)*
    fn pand(&mut self) -> Result<Predicate, ParseError> {
        let mut acc = self.patom()?;
        while *self.peek() == Tok::And {
            self.bump();
            let rhs = self.patom()?;
            acc = Predicate::And(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn patom(&mut self) -> Result<Predicate, ParseError> {
        match self.bump() {
            Tok::Ident(name) => match self.table.get(&name) {
                Some(atom) => Ok(Predicate::Atom(atom.clone())),
                None => {
                    let (line, col) = self.lx.pos(self.at - 1);
                    Err(ParseError::UnknownPredicate { name, line, col })
                }
            },
            Tok::LParen => {
                let inner = self.predicate()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => {
                self.at -= 1;
                Err(self.err("expected a predicate"))
            }
        }
    }
}

/// Parse a specification, resolving atom names against `table`.
pub fn parse_spec(text: &str, table: &PredicateTable) -> Result<Spec, ParseError> {
    let lx = lex(text)?;
    let mut p = Parser { lx, at: 0, table };
    let spec = p.spec()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err("trailing input after specification"));
    }
    Ok(spec)
}

/// Parse a bare predicate expression.
pub fn parse_predicate(text: &str, table: &PredicateTable) -> Result<Predicate, ParseError> {
    let lx = lex(text)?;
    let mut p = Parser { lx, at: 0, table };
    let pred = p.predicate()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err("trailing input after predicate"));
    }
    Ok(pred)
}
