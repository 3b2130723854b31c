use rand::seq::SliceRandom;
use rand::Rng;

use super::{interpret, BinOp, Expr, Language, Program, Statement};
use crate::records::{Extra, TestCase, TranslationTask};
use crate::seeded_rng;

/// Shape of generated programs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub identifiers: Vec<String>,
    pub max_literal: i64,
    pub min_statements: usize,
    pub max_statements: usize,
    pub input_range: i64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            identifiers: ["a", "b", "c", "d", "e", "f", "g", "h"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            max_literal: 9,
            min_statements: 3,
            max_statements: 7,
            input_range: 20,
        }
    }
}

fn gen_expr(rng: &mut impl Rng, cfg: &CorpusConfig, defined: &[String], depth: u32, need_var: bool) -> Expr {
    let split = match depth {
        0 => 0.55,
        1 => 0.3,
        _ => 0.0,
    };
    if rng.gen_bool(split) {
        let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul].choose(rng).unwrap_or(&BinOp::Add);
        let left = gen_expr(rng, cfg, defined, depth + 1, need_var);
        let right = gen_expr(rng, cfg, defined, depth + 1, false);
        return Expr::bin(op, left, right);
    }
    if need_var || rng.gen_bool(0.65) {
        if let Some(name) = defined.choose(rng) {
            return Expr::Var(name.clone());
        }
    }
    Expr::Lit(rng.gen_range(0..=cfg.max_literal))
}

fn pick_target(rng: &mut impl Rng, cfg: &CorpusConfig, defined: &[String], fresh_bias: f64) -> String {
    let fresh: Vec<&String> = cfg.identifiers.iter().filter(|i| !defined.contains(i)).collect();
    if !fresh.is_empty() && (defined.is_empty() || rng.gen_bool(fresh_bias)) {
        return (*fresh.choose(rng).unwrap_or(&&cfg.identifiers[0])).clone();
    }
    defined.choose(rng).cloned().unwrap_or_else(|| cfg.identifiers[0].clone())
}

/// A random SRCL program that reads at least once and writes at least once.
pub fn generate_program(rng: &mut impl Rng, cfg: &CorpusConfig) -> Program {
    let n = rng.gen_range(cfg.min_statements.max(2)..=cfg.max_statements.max(2));
    let mut defined: Vec<String> = Vec::new();
    let mut stmts = Vec::with_capacity(n);

    let first = pick_target(rng, cfg, &defined, 1.0);
    defined.push(first.clone());
    stmts.push(Statement::Input(first));

    for _ in 1..n - 1 {
        let roll: f64 = rng.gen();
        let stmt = if roll < 0.2 {
            let t = pick_target(rng, cfg, &defined, 0.8);
            Statement::Input(t)
        } else if roll < 0.75 {
            let e = gen_expr(rng, cfg, &defined, 0, false);
            let t = pick_target(rng, cfg, &defined, 0.6);
            Statement::Assign(t, e)
        } else {
            Statement::Output(gen_expr(rng, cfg, &defined, 0, true))
        };
        if let Statement::Input(t) | Statement::Assign(t, _) = &stmt {
            if !defined.contains(t) {
                defined.push(t.clone());
            }
        }
        stmts.push(stmt);
    }
    stmts.push(Statement::Output(gen_expr(rng, cfg, &defined, 0, true)));
    Program::new(Language::Srcl, stmts)
}

fn input_count(p: &Program) -> usize {
    p.statements
        .iter()
        .filter(|s| matches!(s, Statement::Input(_)))
        .count()
}

/// `n_tasks` SRCL→TGTL tasks, each with `tests_per_task` tests whose expected
/// outputs come from running the source program. Pure in `seed`.
pub fn generate_corpus(seed: u64, n_tasks: usize, tests_per_task: usize) -> Vec<TranslationTask> {
    generate_corpus_with(seed, n_tasks, tests_per_task, &CorpusConfig::default())
}

pub fn generate_corpus_with(
    seed: u64,
    n_tasks: usize,
    tests_per_task: usize,
    cfg: &CorpusConfig,
) -> Vec<TranslationTask> {
    let mut rng = seeded_rng(seed, 0x636f_7270);
    (0..n_tasks)
        .map(|i| {
            let program = generate_program(&mut rng, cfg);
            let n_inputs = input_count(&program);
            let tests = (0..tests_per_task)
                .map(|_| {
                    let input_values: Vec<i64> = (0..n_inputs)
                        .map(|_| rng.gen_range(-cfg.input_range..=cfg.input_range))
                        .collect();
                    let expected_output = interpret(&program, &input_values)
                        .expect("generated programs define every identifier before use");
                    TestCase {
                        input_values,
                        expected_output,
                    }
                })
                .collect();
            TranslationTask {
                id: format!("s{seed}-t{i:05}"),
                source_lang: Language::Srcl.tag().to_string(),
                target_lang: Language::Tgtl.tag().to_string(),
                source_code: program.render(),
                reference_code: Some(program.translated(Language::Tgtl).render()),
                tests,
                extra: Extra::new(),
            }
        })
        .collect()
}
