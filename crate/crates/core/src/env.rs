//! Synthetic verifiable tasks: left-to-right modular arithmetic chains over a
//! small token vocabulary, plus the exact-match verifier.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub type TokenId = usize;

pub const PLUS: TokenId = 10;
pub const MINUS: TokenId = 11;
pub const TIMES: TokenId = 12;
pub const EQUALS: TokenId = 13;
pub const ANSWER: TokenId = 14;
pub const STOP: TokenId = 15;
pub const PAD: TokenId = 16;

const SYMBOLS: [&str; 17] =
    ["0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "+", "-", "*", "=", "ANSWER", "STOP", "PAD"];

/// The token alphabet. Ids are dense in `[0, size)`; digit `d` has id `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Vocabulary;

impl Vocabulary {
    pub const SIZE: usize = SYMBOLS.len();

    pub fn size(&self) -> usize {
        Self::SIZE
    }

    pub fn tokens(&self) -> &'static [&'static str] {
        &SYMBOLS
    }

    pub fn stop(&self) -> TokenId {
        STOP
    }

    pub fn symbol(&self, id: TokenId) -> Option<&'static str> {
        SYMBOLS.get(id).copied()
    }

    pub fn is_digit(id: TokenId) -> bool {
        id <= 9
    }

    /// Human-readable rendering, e.g. `3 + 4 = ANSWER 7 STOP`.
    pub fn render(&self, ids: &[TokenId]) -> String {
        let mut out = String::new();
        for (i, &id) in ids.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match self.symbol(id) {
                Some(s) => out.push_str(s),
                None => {
                    let _ = write!(out, "<{id}>");
                }
            }
        }
        out
    }
}

/// Decimal digit tokens of `value`, most significant first.
pub fn encode_number(value: u64) -> Vec<TokenId> {
    value.to_string().bytes().map(|b| (b - b'0') as TokenId).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
}

impl Op {
    pub const ALL: [Op; 3] = [Op::Add, Op::Sub, Op::Mul];

    pub fn token(self) -> TokenId {
        match self {
            Op::Add => PLUS,
            Op::Sub => MINUS,
            Op::Mul => TIMES,
        }
    }

    pub fn apply(self, lhs: u64, rhs: u64, modulus: u64) -> u64 {
        let (a, b, m) = (lhs as i128, rhs as i128, modulus as i128);
        let v = match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
        };
        v.rem_euclid(m) as u64
    }
}

/// A verifiable question: prompt tokens and the digits of the exact answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskInstance {
    pub prompt: Vec<TokenId>,
    pub ground_truth: Vec<TokenId>,
    pub modulus: u64,
    pub difficulty: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierResult {
    pub reward: f64,
    pub parsed_answer: Option<Vec<TokenId>>,
    pub terminated: bool,
}

/// Builds a chain task `a1 op a2 op ... op a(k+1) =` with `difficulty` = k
/// operators, evaluated strictly left to right with every intermediate value
/// reduced mod `modulus`.
pub fn generate_task(difficulty: usize, modulus: u64, seed: u64) -> Result<TaskInstance> {
    if difficulty == 0 {
        return Err(Error::config("difficulty", "chain length must be at least 1"));
    }
    if !(2..=100).contains(&modulus) {
        return Err(Error::config("modulus", format!("{modulus} is outside [2, 100]")));
    }
    let mut rng = rng::from_seed(seed);
    let mut operands = Vec::with_capacity(difficulty + 1);
    let mut ops = Vec::with_capacity(difficulty);
    operands.push(rng.gen_range(0..modulus));
    for _ in 0..difficulty {
        ops.push(Op::ALL[rng.gen_range(0..Op::ALL.len())]);
        operands.push(rng.gen_range(0..modulus));
    }
    Ok(build_task(&operands, &ops, modulus, seed))
}

/// Assembles a task from explicit operands and operators.
///
/// Panics if `operands.len() != ops.len() + 1`.
pub fn build_task(operands: &[u64], ops: &[Op], modulus: u64, seed: u64) -> TaskInstance {
    assert_eq!(operands.len(), ops.len() + 1, "operand/operator count mismatch");
    let mut prompt = encode_number(operands[0]);
    let mut value = operands[0] % modulus;
    for (op, &rhs) in ops.iter().zip(&operands[1..]) {
        prompt.push(op.token());
        prompt.extend(encode_number(rhs));
        value = op.apply(value, rhs, modulus);
    }
    prompt.push(EQUALS);
    TaskInstance { prompt, ground_truth: encode_number(value), modulus, difficulty: ops.len(), seed }
}

/// Scores a full path (prompt followed by a completion).
///
/// The answer is the run of tokens after the first `ANSWER` of the completion,
/// up to `STOP` or the end of the path. Reward is 1 only for an exact match
/// that was terminated by `STOP`.
pub fn verify(task: &TaskInstance, full_path_tokens: &[TokenId]) -> Result<VerifierResult> {
    if !full_path_tokens.starts_with(&task.prompt) {
        return Err(Error::Contract("path does not begin with the task prompt".into()));
    }
    let completion = &full_path_tokens[task.prompt.len()..];
    let stop_at = completion.iter().position(|&t| t == STOP);
    let body = &completion[..stop_at.unwrap_or(completion.len())];
    let parsed_answer = body.iter().position(|&t| t == ANSWER).map(|i| body[i + 1..].to_vec());
    let terminated = stop_at.is_some();
    let correct = terminated && parsed_answer.as_deref() == Some(&task.ground_truth[..]);
    Ok(VerifierResult { reward: if correct { 1.0 } else { 0.0 }, parsed_answer, terminated })
}

/// Scoring function applied to leaf paths.
pub trait Verifier: Sync {
    fn verify(&self, task: &TaskInstance, full_path_tokens: &[TokenId]) -> Result<VerifierResult>;
}

/// Binary exact-match verifier; see [`verify`].
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatch;

impl Verifier for ExactMatch {
    fn verify(&self, task: &TaskInstance, full_path_tokens: &[TokenId]) -> Result<VerifierResult> {
        verify(task, full_path_tokens)
    }
}

/// Draws tasks with difficulty uniform in `[min_difficulty, max_difficulty]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSampler {
    pub min_difficulty: usize,
    pub max_difficulty: usize,
    pub modulus: u64,
}

impl Default for TaskSampler {
    fn default() -> Self {
        TaskSampler { min_difficulty: 1, max_difficulty: 2, modulus: 10 }
    }
}

impl TaskSampler {
    pub fn validate(&self) -> Result<()> {
        if self.min_difficulty == 0 {
            return Err(Error::config("min_difficulty", "must be at least 1"));
        }
        if self.max_difficulty < self.min_difficulty {
            return Err(Error::config("max_difficulty", "must not be below min_difficulty"));
        }
        if !(2..=100).contains(&self.modulus) {
            return Err(Error::config("modulus", "must lie in [2, 100]"));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut rng::Rng) -> Result<TaskInstance> {
        let difficulty = rng.gen_range(self.min_difficulty..=self.max_difficulty);
        generate_task(difficulty, self.modulus, rng.gen())
    }

    pub fn sample_many(&self, count: usize, seed: u64) -> Result<Vec<TaskInstance>> {
        let mut rng = rng::from_seed(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }
}

fn join_ids(ids: &[TokenId]) -> String {
    ids.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_ids(field: &str, line: usize) -> Result<Vec<TokenId>> {
    field
        .split_whitespace()
        .map(|s| {
            let id: TokenId = s.parse().map_err(|_| Error::parse(line, format!("bad token id `{s}`")))?;
            if id >= Vocabulary::SIZE {
                return Err(Error::parse(line, format!("token id {id} out of range")));
            }
            Ok(id)
        })
        .collect()
}

/// Writes tasks as `seed,difficulty,modulus,prompt-ids,ground-truth-ids`, one per line.
pub fn write_tasks<W: Write>(mut out: W, tasks: &[TaskInstance]) -> Result<()> {
    for t in tasks {
        writeln!(
            out,
            "{},{},{},{},{}",
            t.seed,
            t.difficulty,
            t.modulus,
            join_ids(&t.prompt),
            join_ids(&t.ground_truth)
        )?;
    }
    Ok(())
}

/// Reads the task-set format written by [`write_tasks`]. Blank lines are skipped.
pub fn read_tasks<R: BufRead>(input: R) -> Result<Vec<TaskInstance>> {
    let mut tasks = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::parse(lineno, format!("expected 5 fields, found {}", fields.len())));
        }
        let num = |s: &str, name: &str| -> Result<u64> {
            s.trim().parse().map_err(|_| Error::parse(lineno, format!("bad {name} `{s}`")))
        };
        let task = TaskInstance {
            seed: num(fields[0], "seed")?,
            difficulty: num(fields[1], "difficulty")? as usize,
            modulus: num(fields[2], "modulus")?,
            prompt: parse_ids(fields[3], lineno)?,
            ground_truth: parse_ids(fields[4], lineno)?,
        };
        if task.prompt.is_empty() || task.prompt.contains(&STOP) {
            return Err(Error::parse(lineno, "prompt must be non-empty and STOP-free"));
        }
        tasks.push(task);
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn completion(task: &TaskInstance, tail: &[TokenId]) -> Vec<TokenId> {
        let mut p = task.prompt.clone();
        p.extend_from_slice(tail);
        p
    }

    #[test]
    fn single_op_chain() {
        let t = build_task(&[3, 4], &[Op::Add], 10, 0);
        assert_eq!(t.prompt, vec![3, PLUS, 4, EQUALS]);
        assert_eq!(t.ground_truth, vec![7]);
    }

    #[test]
    fn two_op_chain_is_left_to_right() {
        let t = build_task(&[3, 4, 2], &[Op::Add, Op::Mul], 10, 0);
        assert_eq!(t.prompt, vec![3, PLUS, 4, TIMES, 2, EQUALS]);
        // (3 + 4) * 2 = 14 = 4 mod 10
        assert_eq!(t.ground_truth, vec![4]);
    }

    #[test]
    fn subtraction_wraps() {
        let t = build_task(&[2, 5], &[Op::Sub], 10, 0);
        assert_eq!(t.ground_truth, vec![7]);
        let t = build_task(&[42, 99], &[Op::Add], 100, 0);
        assert_eq!(t.ground_truth, vec![4, 1]);
    }

    #[test]
    fn mod_two_answers_are_bits() {
        for seed in 0..50 {
            let t = generate_task(1, 2, seed).unwrap();
            assert!(t.ground_truth == vec![0] || t.ground_truth == vec![1]);
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        assert_eq!(generate_task(2, 10, 5).unwrap(), generate_task(2, 10, 5).unwrap());
    }

    #[test]
    fn generation_rejects_bad_config() {
        assert!(matches!(generate_task(0, 10, 1), Err(Error::Config { field, .. }) if field == "difficulty"));
        assert!(matches!(generate_task(1, 1, 1), Err(Error::Config { field, .. }) if field == "modulus"));
        assert!(matches!(generate_task(1, 101, 1), Err(Error::Config { .. })));
    }

    #[test]
    fn verify_examples() {
        let t = build_task(&[3, 4], &[Op::Add], 10, 0);
        let ok = verify(&t, &completion(&t, &[ANSWER, 7, STOP])).unwrap();
        assert_eq!(ok.reward, 1.0);
        assert!(ok.terminated);
        assert_eq!(ok.parsed_answer, Some(vec![7]));

        let wrong = verify(&t, &completion(&t, &[ANSWER, 8, STOP])).unwrap();
        assert_eq!(wrong.reward, 0.0);

        let truncated = verify(&t, &completion(&t, &[ANSWER, 7])).unwrap();
        assert_eq!(truncated.reward, 0.0);
        assert!(!truncated.terminated);

        let no_answer = verify(&t, &completion(&t, &[7, STOP])).unwrap();
        assert_eq!(no_answer.reward, 0.0);
        assert_eq!(no_answer.parsed_answer, None);

        // reasoning tokens before ANSWER are allowed
        let chatty = verify(&t, &completion(&t, &[1, PLUS, ANSWER, 7, STOP])).unwrap();
        assert_eq!(chatty.reward, 1.0);
    }

    #[test]
    fn verify_rejects_foreign_prefix() {
        let t = build_task(&[3, 4], &[Op::Add], 10, 0);
        assert!(matches!(verify(&t, &[4, PLUS]), Err(Error::Contract(_))));
    }

    #[test]
    fn task_file_roundtrip() {
        let tasks = TaskSampler { min_difficulty: 1, max_difficulty: 3, modulus: 37 }.sample_many(20, 9).unwrap();
        let mut buf = Vec::new();
        write_tasks(&mut buf, &tasks).unwrap();
        assert_eq!(read_tasks(&buf[..]).unwrap(), tasks);
    }

    #[test]
    fn task_file_reports_line() {
        let text = "1,1,10,3 10 4 13,7\n1,1,10,3 10\n";
        match read_tasks(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
