use super::{is_identifier, BinOp, Expr, Language, Program, Statement, MAX_STATEMENTS};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message} (at `{token}`)")]
pub struct ParseError {
    pub line: usize,
    pub token: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Token {
    text: String,
    line: usize,
}

/// Splits text into lexemes for `lang`. Unknown characters are lex errors.
pub fn tokenize(text: &str, lang: Language) -> Result<Vec<(String, usize)>, ParseError> {
    Ok(lex(text, lang)?.into_iter().map(|t| (t.text, t.line)).collect())
}

fn lex(text: &str, lang: Language) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let bytes = line.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            let start = i;
            if c.is_ascii_alphanumeric() {
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
            } else {
                let two = line.get(i..i + 2);
                i += match (lang, c, two) {
                    (Language::Tgtl, _, Some(":=")) => 2,
                    (Language::Tgtl, ';' | '(' | ')', _) => 1,
                    (Language::Srcl, '+' | '-' | '*' | '=' | '(' | ')', _) => 1,
                    _ => {
                        let ch = line[i..].chars().next().unwrap_or(c);
                        return Err(ParseError {
                            line: line_no,
                            token: ch.to_string(),
                            message: format!("unexpected character for {}", lang.tag()),
                        });
                    }
                };
            }
            tokens.push(Token {
                text: line[start..i].to_string(),
                line: line_no,
            });
        }
    }
    Ok(tokens)
}

struct Parser {
    lang: Language,
    tokens: Vec<Token>,
    pos: usize,
    last_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(|t| t.text.as_str())
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|t| t.line)
            .unwrap_or(self.last_line)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line(),
            token: self.peek().unwrap_or("<eof>").to_string(),
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Option<String> {
        let t = self.tokens.get(self.pos)?.text.clone();
        self.pos += 1;
        Some(t)
    }

    fn expect(&mut self, want: &str) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{want}`")))
        }
    }

    fn identifier(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(t) if is_identifier(t) => Ok(self.bump().unwrap_or_default()),
            _ => Err(self.error("expected identifier")),
        }
    }

    fn op_at(&self) -> Option<BinOp> {
        let t = self.peek()?;
        [BinOp::Add, BinOp::Sub, BinOp::Mul]
            .into_iter()
            .find(|op| op.symbol(self.lang) == t)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.term()?;
        while let Some(op @ (BinOp::Add | BinOp::Sub)) = self.op_at() {
            self.pos += 1;
            let right = self.term()?;
            left = Expr::bin(op, left, right);
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.atom()?;
        while let Some(BinOp::Mul) = self.op_at() {
            self.pos += 1;
            let right = self.atom()?;
            left = Expr::bin(BinOp::Mul, left, right);
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some("(") => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Some(t) if t.bytes().all(|b| b.is_ascii_digit()) => {
                let v = t
                    .parse::<i64>()
                    .map_err(|_| self.error("integer literal out of range"))?;
                self.pos += 1;
                Ok(Expr::Lit(v))
            }
            Some(t) if is_identifier(t) => Ok(Expr::Var(self.bump().unwrap_or_default())),
            _ => Err(self.error("expected expression")),
        }
    }

    fn srcl_statement(&mut self) -> Result<Statement, ParseError> {
        let stmt = match self.peek() {
            Some("let") => {
                self.pos += 1;
                let target = self.identifier()?;
                self.expect("=")?;
                Statement::Assign(target, self.expr()?)
            }
            Some("out") => {
                self.pos += 1;
                Statement::Output(self.expr()?)
            }
            Some("in") => {
                self.pos += 1;
                Statement::Input(self.identifier()?)
            }
            _ => return Err(self.error("expected `let`, `out` or `in`")),
        };
        Ok(stmt)
    }

    fn tgtl_statement(&mut self) -> Result<Statement, ParseError> {
        let stmt = match self.peek() {
            Some("emit") => {
                self.pos += 1;
                Statement::Output(self.expr()?)
            }
            Some("read") => {
                self.pos += 1;
                Statement::Input(self.identifier()?)
            }
            Some(t) if is_identifier(t) => {
                let target = self.identifier()?;
                self.expect(":=")?;
                Statement::Assign(target, self.expr()?)
            }
            _ => return Err(self.error("expected statement")),
        };
        self.expect(";")?;
        Ok(stmt)
    }
}

/// Parses `text` under the grammar of `lang`.
///
/// SRCL is line-oriented: each non-blank line holds exactly one statement.
/// TGTL is free-form with `;` terminators.
pub fn parse(text: &str, lang: Language) -> Result<Program, ParseError> {
    let tokens = lex(text, lang)?;
    let last_line = tokens.last().map(|t| t.line).unwrap_or(1);
    let mut statements = Vec::new();
    match lang {
        Language::Srcl => {
            let mut start = 0;
            while start < tokens.len() {
                let line = tokens[start].line;
                let end = tokens[start..]
                    .iter()
                    .position(|t| t.line != line)
                    .map_or(tokens.len(), |n| start + n);
                let mut p = Parser {
                    lang,
                    tokens: tokens[start..end].to_vec(),
                    pos: 0,
                    last_line: line,
                };
                statements.push(p.srcl_statement()?);
                if p.pos < p.tokens.len() {
                    return Err(p.error("trailing tokens after statement"));
                }
                start = end;
            }
        }
        Language::Tgtl => {
            let mut p = Parser {
                lang,
                tokens,
                pos: 0,
                last_line,
            };
            while p.peek().is_some() {
                statements.push(p.tgtl_statement()?);
            }
        }
    }
    if statements.is_empty() {
        return Err(ParseError {
            line: 1,
            token: "<eof>".into(),
            message: "empty program".into(),
        });
    }
    if statements.len() > MAX_STATEMENTS {
        return Err(ParseError {
            line: last_line,
            token: "<eof>".into(),
            message: format!("more than {MAX_STATEMENTS} statements"),
        });
    }
    Ok(Program::new(lang, statements))
}
