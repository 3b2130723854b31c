//! Rule-based semantic perturbations of TGTL programs.
//!
//! Each mutation keeps the program grammatical and changes what it computes.
//! [`mutate`] additionally checks the change against the task's tests and
//! resamples any mutant the tests cannot tell apart from the original.

use std::collections::HashSet;

use rand::Rng;

use super::{interpret, BinOp, Expr, Language, Program, Statement, MAX_STATEMENTS};
use crate::records::TestCase;
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutationKind {
    OpSwap,
    ConstOffByOne,
    IdentifierSwap,
    StmtDelete,
    StmtDuplicate,
    StmtSwap,
}

/// Sampling weights; logic-altering kinds dominate.
pub const MUTATION_WEIGHTS: [(MutationKind, f64); 6] = [
    (MutationKind::OpSwap, 0.3),
    (MutationKind::ConstOffByOne, 0.2),
    (MutationKind::IdentifierSwap, 0.2),
    (MutationKind::StmtDelete, 0.1),
    (MutationKind::StmtDuplicate, 0.1),
    (MutationKind::StmtSwap, 0.1),
];

impl MutationKind {
    pub const ALL: [MutationKind; 6] = [
        MutationKind::OpSwap,
        MutationKind::ConstOffByOne,
        MutationKind::IdentifierSwap,
        MutationKind::StmtDelete,
        MutationKind::StmtDuplicate,
        MutationKind::StmtSwap,
    ];

    pub fn label(self) -> &'static str {
        match self {
            MutationKind::OpSwap => "op_swap",
            MutationKind::ConstOffByOne => "const_off_by_one",
            MutationKind::IdentifierSwap => "identifier_swap",
            MutationKind::StmtDelete => "stmt_delete",
            MutationKind::StmtDuplicate => "stmt_duplicate",
            MutationKind::StmtSwap => "stmt_swap",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == label)
    }
}

/// A concrete edit. `occurrence` counts matching nodes in pre-order within
/// the statement (targets of assignments/reads count as identifiers first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mutation {
    OpSwap { stmt: usize, occurrence: usize },
    ConstOffByOne { stmt: usize, occurrence: usize, delta: i64 },
    IdentifierSwap { stmt: usize, occurrence: usize, replacement: String },
    StmtDelete { stmt: usize },
    StmtDuplicate { stmt: usize },
    StmtSwap { first: usize, second: usize },
}

impl Mutation {
    pub fn kind(&self) -> MutationKind {
        match self {
            Mutation::OpSwap { .. } => MutationKind::OpSwap,
            Mutation::ConstOffByOne { .. } => MutationKind::ConstOffByOne,
            Mutation::IdentifierSwap { .. } => MutationKind::IdentifierSwap,
            Mutation::StmtDelete { .. } => MutationKind::StmtDelete,
            Mutation::StmtDuplicate { .. } => MutationKind::StmtDuplicate,
            Mutation::StmtSwap { .. } => MutationKind::StmtSwap,
        }
    }

    pub fn label(&self) -> &'static str {
        self.kind().label()
    }

    /// Statement index the edit applies to.
    pub fn site(&self) -> usize {
        match self {
            Mutation::OpSwap { stmt, .. }
            | Mutation::ConstOffByOne { stmt, .. }
            | Mutation::IdentifierSwap { stmt, .. }
            | Mutation::StmtDelete { stmt }
            | Mutation::StmtDuplicate { stmt } => *stmt,
            Mutation::StmtSwap { first, .. } => *first,
        }
    }
}

fn swapped(op: BinOp) -> BinOp {
    match op {
        BinOp::Add => BinOp::Sub,
        BinOp::Sub => BinOp::Add,
        BinOp::Mul => BinOp::Add,
    }
}

fn stmt_expr_mut(s: &mut Statement) -> Option<&mut Expr> {
    match s {
        Statement::Assign(_, e) | Statement::Output(e) => Some(e),
        Statement::Input(_) => None,
    }
}

fn stmt_expr(s: &Statement) -> Option<&Expr> {
    match s {
        Statement::Assign(_, e) | Statement::Output(e) => Some(e),
        Statement::Input(_) => None,
    }
}

fn count_nodes(s: &Statement, pred: impl Fn(&Expr) -> bool) -> usize {
    let mut n = 0;
    if let Some(e) = stmt_expr(s) {
        e.visit(&mut |node| {
            if pred(node) {
                n += 1;
            }
        });
    }
    n
}

fn is_op(e: &Expr) -> bool {
    matches!(e, Expr::Bin(..))
}

fn is_lit(e: &Expr) -> bool {
    matches!(e, Expr::Lit(_))
}

fn is_var(e: &Expr) -> bool {
    matches!(e, Expr::Var(_))
}

fn identifier_slots(s: &Statement) -> usize {
    let target = usize::from(matches!(s, Statement::Assign(..) | Statement::Input(_)));
    target + count_nodes(s, is_var)
}

/// Applies `m`, or returns `None` if it does not fit the program.
pub fn apply_mutation(program: &Program, m: &Mutation) -> Option<Program> {
    let mut p = program.clone();
    let n = p.statements.len();
    match m {
        Mutation::OpSwap { stmt, occurrence } => {
            let e = stmt_expr_mut(p.statements.get_mut(*stmt)?)?;
            let mut seen = 0;
            let mut hit = false;
            e.visit_mut(&mut |node| {
                if let Expr::Bin(op, _, _) = node {
                    if seen == *occurrence {
                        *op = swapped(*op);
                        hit = true;
                    }
                    seen += 1;
                }
            });
            hit.then_some(p)
        }
        Mutation::ConstOffByOne {
            stmt,
            occurrence,
            delta,
        } => {
            if delta.abs() != 1 {
                return None;
            }
            let e = stmt_expr_mut(p.statements.get_mut(*stmt)?)?;
            let mut seen = 0;
            let mut ok = false;
            e.visit_mut(&mut |node| {
                if let Expr::Lit(v) = node {
                    if seen == *occurrence {
                        if let Some(nv) = v.checked_add(*delta).filter(|nv| *nv >= 0) {
                            *v = nv;
                            ok = true;
                        }
                    }
                    seen += 1;
                }
            });
            ok.then_some(p)
        }
        Mutation::IdentifierSwap {
            stmt,
            occurrence,
            replacement,
        } => {
            if !super::is_identifier(replacement) {
                return None;
            }
            let s = p.statements.get_mut(*stmt)?;
            let mut slot = *occurrence;
            if let Statement::Assign(t, _) | Statement::Input(t) = s {
                if slot == 0 {
                    if t == replacement {
                        return None;
                    }
                    *t = replacement.clone();
                    return Some(p);
                }
                slot -= 1;
            }
            let e = stmt_expr_mut(s)?;
            let mut seen = 0;
            let mut ok = false;
            e.visit_mut(&mut |node| {
                if let Expr::Var(name) = node {
                    if seen == slot && name != replacement {
                        *name = replacement.clone();
                        ok = true;
                    }
                    seen += 1;
                }
            });
            ok.then_some(p)
        }
        Mutation::StmtDelete { stmt } => {
            if n < 2 || *stmt >= n {
                return None;
            }
            p.statements.remove(*stmt);
            Some(p)
        }
        Mutation::StmtDuplicate { stmt } => {
            if n >= MAX_STATEMENTS || *stmt >= n {
                return None;
            }
            let copy = p.statements[*stmt].clone();
            p.statements.insert(stmt + 1, copy);
            Some(p)
        }
        Mutation::StmtSwap { first, second } => {
            if first == second || *first >= n || *second >= n {
                return None;
            }
            if p.statements[*first] == p.statements[*second] {
                return None;
            }
            p.statements.swap(*first, *second);
            Some(p)
        }
    }
}

fn sample_mutation(rng: &mut impl Rng, p: &Program, kind: MutationKind, idents: &[String]) -> Option<Mutation> {
    let n = p.statements.len();
    let pick_stmt_with = |rng: &mut dyn rand::RngCore, f: &dyn Fn(&Statement) -> usize| {
        let sites: Vec<(usize, usize)> = p
            .statements
            .iter()
            .enumerate()
            .flat_map(|(i, s)| (0..f(s)).map(move |o| (i, o)))
            .collect();
        if sites.is_empty() {
            None
        } else {
            Some(sites[rng.gen_range(0..sites.len())])
        }
    };
    match kind {
        MutationKind::OpSwap => {
            let (stmt, occurrence) = pick_stmt_with(rng, &|s| count_nodes(s, is_op))?;
            Some(Mutation::OpSwap { stmt, occurrence })
        }
        MutationKind::ConstOffByOne => {
            let (stmt, occurrence) = pick_stmt_with(rng, &|s| count_nodes(s, is_lit))?;
            let delta = if rng.gen_bool(0.5) { 1 } else { -1 };
            Some(Mutation::ConstOffByOne {
                stmt,
                occurrence,
                delta,
            })
        }
        MutationKind::IdentifierSwap => {
            if idents.len() < 2 {
                return None;
            }
            let (stmt, occurrence) = pick_stmt_with(rng, &identifier_slots)?;
            let replacement = idents[rng.gen_range(0..idents.len())].clone();
            Some(Mutation::IdentifierSwap {
                stmt,
                occurrence,
                replacement,
            })
        }
        MutationKind::StmtDelete => (n >= 2).then(|| Mutation::StmtDelete {
            stmt: rng.gen_range(0..n),
        }),
        MutationKind::StmtDuplicate => (n < MAX_STATEMENTS).then(|| Mutation::StmtDuplicate {
            stmt: rng.gen_range(0..n),
        }),
        MutationKind::StmtSwap => {
            if n < 2 {
                return None;
            }
            let first = rng.gen_range(0..n);
            let mut second = rng.gen_range(0..n - 1);
            if second >= first {
                second += 1;
            }
            Some(Mutation::StmtSwap {
                first: first.min(second),
                second: first.max(second),
            })
        }
    }
}

fn identifiers_of(p: &Program) -> Vec<String> {
    let mut seen = Vec::new();
    let mut add = |name: &str| {
        if !seen.iter().any(|s: &String| s == name) {
            seen.push(name.to_string());
        }
    };
    for s in &p.statements {
        if let Statement::Assign(t, _) | Statement::Input(t) = s {
            add(t);
        }
        if let Some(e) = stmt_expr(s) {
            e.visit(&mut |node| {
                if let Expr::Var(name) = node {
                    add(name);
                }
            });
        }
    }
    seen
}

fn diverges(p: &Program, tests: &[TestCase]) -> bool {
    tests
        .iter()
        .any(|t| interpret(p, &t.input_values).ok().as_deref() != Some(&t.expected_output[..]))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MutateError {
    #[error("program is not TGTL")]
    WrongLanguage,
    #[error("no mutation kinds allowed")]
    NoKinds,
    #[error("only {found} of {requested} distinct divergent mutants after {attempts} attempts")]
    Exhausted {
        requested: usize,
        found: usize,
        attempts: usize,
    },
}

/// Draws `count` distinct mutants of a TGTL program, each labelled with its
/// kind and each failing at least one of `tests`.
pub fn mutate(
    program: &Program,
    kinds: &[MutationKind],
    count: usize,
    seed: u64,
    tests: &[TestCase],
) -> Result<Vec<(String, MutationKind)>, MutateError> {
    if program.language != Language::Tgtl {
        return Err(MutateError::WrongLanguage);
    }
    let weights: Vec<(MutationKind, f64)> = MUTATION_WEIGHTS
        .iter()
        .copied()
        .filter(|(k, _)| kinds.contains(k))
        .collect();
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    if weights.is_empty() || total <= 0.0 {
        return Err(MutateError::NoKinds);
    }
    let mut rng = seeded_rng(seed, 0x6d75_7461);
    let idents = identifiers_of(program);
    let original = program.render();
    let mut seen: HashSet<String> = HashSet::from([original]);
    let mut out = Vec::with_capacity(count);
    let max_attempts = 50 * count.max(1);
    let mut attempts = 0;
    while out.len() < count && attempts < max_attempts {
        attempts += 1;
        let mut roll = rng.gen::<f64>() * total;
        let mut kind = weights[weights.len() - 1].0;
        for (k, w) in &weights {
            if roll < *w {
                kind = *k;
                break;
            }
            roll -= w;
        }
        let Some(m) = sample_mutation(&mut rng, program, kind, &idents) else {
            continue;
        };
        let Some(mutant) = apply_mutation(program, &m) else {
            continue;
        };
        let text = mutant.render();
        if seen.contains(&text) || !diverges(&mutant, tests) {
            continue;
        }
        seen.insert(text.clone());
        out.push((text, kind));
    }
    if out.len() < count {
        return Err(MutateError::Exhausted {
            requested: count,
            found: out.len(),
            attempts,
        });
    }
    Ok(out)
}
