//! A paired straight-line micro-language used as the translation workload.
//!
//! SRCL is the source surface (`let x = a + 1`, `out x`, `in a`), TGTL the
//! target surface (`x := a plus 1 ;`, `emit x ;`, `read a ;`). Both share one
//! abstract syntax, so the exact translation of a source program is the same
//! [`Program`] rendered in the other language.
//!
//! `*`/`times` binds tighter than `+ -`/`plus minus`; all three are
//! left-associative and parentheses group as usual.

mod corpus;
mod interp;
mod mutate;
mod parse;

use std::fmt;

pub use corpus::{generate_corpus, generate_corpus_with, generate_program, CorpusConfig};
pub use interp::{interpret, passes_tests, RuntimeError, RuntimeErrorKind};
pub use mutate::{apply_mutation, mutate, MutateError, Mutation, MutationKind, MUTATION_WEIGHTS};
pub use parse::{parse, tokenize, ParseError};

/// Upper bound on statements per program.
pub const MAX_STATEMENTS: usize = 12;

/// Words that can never be identifiers in either language.
pub const RESERVED: [&str; 8] = ["let", "out", "in", "emit", "read", "plus", "minus", "times"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Language {
    Srcl,
    Tgtl,
}

impl Language {
    pub fn tag(self) -> &'static str {
        match self {
            Language::Srcl => "srcl",
            Language::Tgtl => "tgtl",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "srcl" => Some(Language::Srcl),
            "tgtl" => Some(Language::Tgtl),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul => 2,
        }
    }

    pub fn symbol(self, lang: Language) -> &'static str {
        match (lang, self) {
            (Language::Srcl, BinOp::Add) => "+",
            (Language::Srcl, BinOp::Sub) => "-",
            (Language::Srcl, BinOp::Mul) => "*",
            (Language::Tgtl, BinOp::Add) => "plus",
            (Language::Tgtl, BinOp::Sub) => "minus",
            (Language::Tgtl, BinOp::Mul) => "times",
        }
    }

    pub fn apply(self, a: i64, b: i64) -> i64 {
        match self {
            BinOp::Add => a.wrapping_add(b),
            BinOp::Sub => a.wrapping_sub(b),
            BinOp::Mul => a.wrapping_mul(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Lit(i64),
    Var(String),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, left: Expr, right: Expr) -> Self {
        Expr::Bin(op, Box::new(left), Box::new(right))
    }

    pub fn var(name: &str) -> Self {
        Expr::Var(name.to_string())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(op, _, _) => op.precedence(),
            _ => u8::MAX,
        }
    }

    fn render_into(&self, lang: Language, out: &mut String) {
        match self {
            Expr::Lit(v) => out.push_str(&v.to_string()),
            Expr::Var(name) => out.push_str(name),
            Expr::Bin(op, l, r) => {
                let p = op.precedence();
                render_operand(l, lang, l.precedence() < p, out);
                out.push(' ');
                out.push_str(op.symbol(lang));
                out.push(' ');
                render_operand(r, lang, r.precedence() <= p, out);
            }
        }
    }

    /// Pre-order visit of every sub-expression.
    pub(crate) fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        if let Expr::Bin(_, l, r) = self {
            l.visit(f);
            r.visit(f);
        }
    }

    pub(crate) fn visit_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        f(self);
        if let Expr::Bin(_, l, r) = self {
            l.visit_mut(f);
            r.visit_mut(f);
        }
    }
}

fn render_operand(e: &Expr, lang: Language, parens: bool, out: &mut String) {
    if parens {
        out.push_str("( ");
        e.render_into(lang, out);
        out.push_str(" )");
    } else {
        e.render_into(lang, out);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Statement {
    Assign(String, Expr),
    Output(Expr),
    Input(String),
}

impl Statement {
    pub fn render(&self, lang: Language) -> String {
        let mut out = String::new();
        match (lang, self) {
            (Language::Srcl, Statement::Assign(t, e)) => {
                out.push_str("let ");
                out.push_str(t);
                out.push_str(" = ");
                e.render_into(lang, &mut out);
            }
            (Language::Srcl, Statement::Output(e)) => {
                out.push_str("out ");
                e.render_into(lang, &mut out);
            }
            (Language::Srcl, Statement::Input(t)) => {
                out.push_str("in ");
                out.push_str(t);
            }
            (Language::Tgtl, Statement::Assign(t, e)) => {
                out.push_str(t);
                out.push_str(" := ");
                e.render_into(lang, &mut out);
                out.push_str(" ;");
            }
            (Language::Tgtl, Statement::Output(e)) => {
                out.push_str("emit ");
                e.render_into(lang, &mut out);
                out.push_str(" ;");
            }
            (Language::Tgtl, Statement::Input(t)) => {
                out.push_str("read ");
                out.push_str(t);
                out.push_str(" ;");
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub language: Language,
    pub statements: Vec<Statement>,
}

impl Program {
    pub fn new(language: Language, statements: Vec<Statement>) -> Self {
        Self {
            language,
            statements,
        }
    }

    /// One statement per line, tokens separated by single spaces.
    pub fn render(&self) -> String {
        let lines: Vec<String> = self
            .statements
            .iter()
            .map(|s| s.render(self.language))
            .collect();
        lines.join("\n")
    }

    /// The same program in the other language.
    pub fn translated(&self, language: Language) -> Program {
        Program {
            language,
            statements: self.statements.clone(),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        && !RESERVED.contains(&s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assign_1_plus_2() -> Statement {
        Statement::Assign("x".into(), Expr::bin(BinOp::Add, Expr::Lit(1), Expr::Lit(2)))
    }

    #[test]
    fn render_both_surfaces() {
        let s = assign_1_plus_2();
        assert_eq!(s.render(Language::Srcl), "let x = 1 + 2");
        assert_eq!(s.render(Language::Tgtl), "x := 1 plus 2 ;");
        assert_eq!(Statement::Input("a".into()).render(Language::Tgtl), "read a ;");
        assert_eq!(Statement::Output(Expr::var("a")).render(Language::Srcl), "out a");
    }

    #[test]
    fn minimal_parentheses() {
        let e = Expr::bin(
            BinOp::Mul,
            Expr::bin(BinOp::Add, Expr::var("a"), Expr::Lit(1)),
            Expr::bin(BinOp::Sub, Expr::var("b"), Expr::Lit(2)),
        );
        let s = Statement::Output(e);
        assert_eq!(s.render(Language::Srcl), "out ( a + 1 ) * ( b - 2 )");
        let left_assoc = Expr::bin(
            BinOp::Sub,
            Expr::bin(BinOp::Sub, Expr::var("a"), Expr::var("b")),
            Expr::var("c"),
        );
        assert_eq!(Statement::Output(left_assoc).render(Language::Tgtl), "emit a minus b minus c ;");
        let right_nested = Expr::bin(
            BinOp::Sub,
            Expr::var("a"),
            Expr::bin(BinOp::Sub, Expr::var("b"), Expr::var("c")),
        );
        assert_eq!(
            Statement::Output(right_nested).render(Language::Tgtl),
            "emit a minus ( b minus c ) ;"
        );
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("a1"));
        assert!(!is_identifier("1a"));
        assert!(!is_identifier("emit"));
        assert!(!is_identifier("A"));
        assert!(!is_identifier(""));
    }
}
