use std::collections::HashMap;

use super::{Expr, Program, Statement};
use crate::records::TestCase;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuntimeErrorKind {
    UnassignedIdentifier(String),
    InputExhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("statement {statement}: {kind:?}")]
pub struct RuntimeError {
    pub kind: RuntimeErrorKind,
    pub statement: usize,
}

fn eval(e: &Expr, env: &HashMap<&str, i64>) -> Result<i64, RuntimeErrorKind> {
    match e {
        Expr::Lit(v) => Ok(*v),
        Expr::Var(name) => env
            .get(name.as_str())
            .copied()
            .ok_or_else(|| RuntimeErrorKind::UnassignedIdentifier(name.clone())),
        Expr::Bin(op, l, r) => Ok(op.apply(eval(l, env)?, eval(r, env)?)),
    }
}

/// Runs `program` on `inputs` with wrapping 64-bit arithmetic.
pub fn interpret(program: &Program, inputs: &[i64]) -> Result<Vec<i64>, RuntimeError> {
    let mut env: HashMap<&str, i64> = HashMap::new();
    let mut inputs = inputs.iter();
    let mut output = Vec::new();
    for (idx, stmt) in program.statements.iter().enumerate() {
        let fail = |kind| RuntimeError {
            kind,
            statement: idx,
        };
        match stmt {
            Statement::Assign(target, e) => {
                let v = eval(e, &env).map_err(fail)?;
                env.insert(target, v);
            }
            Statement::Output(e) => output.push(eval(e, &env).map_err(fail)?),
            Statement::Input(target) => {
                let v = *inputs
                    .next()
                    .ok_or_else(|| fail(RuntimeErrorKind::InputExhausted))?;
                env.insert(target, v);
            }
        }
    }
    Ok(output)
}

/// True iff the program runs cleanly and reproduces every expected output.
pub fn passes_tests(program: &Program, tests: &[TestCase]) -> bool {
    tests
        .iter()
        .all(|t| interpret(program, &t.input_values).ok().as_deref() == Some(&t.expected_output[..]))
}
