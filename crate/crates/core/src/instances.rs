//! Task files and random task generation.
//!
//! ```text
//! # merge two stacks
//! initial:
//! 4 1 2
//! 3 5
//! goal:
//! 4 5 3 1 2
//! ```
//!
//! Each stack is one line of block ids, top first. Blank lines and `#`
//! comments are ignored.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::bw_repr::BlockId;
use crate::planner::{BWConfig, ConfigError};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskFile {
    pub initial: BWConfig,
    pub goal: BWConfig,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("line {line}: `{token}` is not a block id")]
    BadToken { line: usize, token: String },
    #[error("line {line}: stack before any `initial:` or `goal:` header")]
    OutsideSection { line: usize },
    #[error("line {line}: section `{name}` given twice")]
    RepeatedSection { line: usize, name: String },
    #[error("missing `{0}` section")]
    MissingSection(&'static str),
    #[error("line {line}: block {block} appears twice")]
    DuplicateBlock { line: usize, block: BlockId },
    #[error("{section} configuration: {error}")]
    Config { section: &'static str, error: ConfigError },
    #[error("block {block} is in the {present} configuration but not the {absent} one")]
    MismatchedBlocks {
        block: BlockId,
        present: &'static str,
        absent: &'static str,
    },
    #[error("{blocks} blocks cannot fit in {max_stacks} stacks of height {max_height}")]
    Unsatisfiable { blocks: u32, max_stacks: u32, max_height: u32 },
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Initial,
    Goal,
}

pub fn parse_task(text: &str) -> Result<TaskFile, TaskError> {
    let mut sections: [Option<Vec<Vec<BlockId>>>; 2] = [None, None];
    let mut current = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let header = match line {
            "initial:" => Some(Section::Initial),
            "goal:" => Some(Section::Goal),
            _ => None,
        };
        if let Some(section) = header {
            let slot = &mut sections[section as usize];
            if slot.is_some() {
                return Err(TaskError::RepeatedSection {
                    line: line_no,
                    name: line.trim_end_matches(':').to_string(),
                });
            }
            *slot = Some(Vec::new());
            current = Some(section);
            continue;
        }
        let section = current.ok_or(TaskError::OutsideSection { line: line_no })?;
        let stack = line
            .split_whitespace()
            .map(|t| {
                t.parse::<BlockId>().map_err(|_| TaskError::BadToken {
                    line: line_no,
                    token: t.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let stacks = sections[section as usize].as_mut().expect("section opened above");
        for &b in &stack {
            if stacks.iter().flatten().any(|&x| x == b) || stack.iter().filter(|&&x| x == b).count() > 1 {
                return Err(TaskError::DuplicateBlock { line: line_no, block: b });
            }
        }
        stacks.push(stack);
    }
    let [initial, goal] = sections;
    let initial = initial.ok_or(TaskError::MissingSection("initial"))?;
    let goal = goal.ok_or(TaskError::MissingSection("goal"))?;

    // report a block present on one side only before contiguity
    let has = |stacks: &[Vec<BlockId>], b: BlockId| stacks.iter().flatten().any(|&x| x == b);
    for (from, to, present, absent) in [(&initial, &goal, "initial", "goal"), (&goal, &initial, "goal", "initial")] {
        if let Some(&block) = from.iter().flatten().find(|&&b| !has(to, b)) {
            return Err(TaskError::MismatchedBlocks { block, present, absent });
        }
    }
    let initial = BWConfig::new(initial).map_err(|error| TaskError::Config {
        section: "initial",
        error,
    })?;
    let goal = BWConfig::new(goal).map_err(|error| TaskError::Config { section: "goal", error })?;
    Ok(TaskFile { initial, goal })
}

fn write_config(out: &mut String, config: &BWConfig) {
    for stack in config.canonical() {
        let line: Vec<String> = stack.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
}

/// Canonical text: stacks ordered by bottom block.
pub fn serialize_task(task: &TaskFile) -> String {
    let mut out = String::from("initial:\n");
    write_config(&mut out, &task.initial);
    out.push_str("goal:\n");
    write_config(&mut out, &task.goal);
    out
}

/// Drops blocks `1..=s` one at a time, in random order, on the table or on
/// top of a random stack that is below `max_height`.
///
/// The distribution is not uniform over configurations.
fn random_config(rng: &mut Xoshiro256PlusPlus, s: u32, max_stacks: u32, max_height: u32) -> BWConfig {
    let mut order: Vec<BlockId> = (1..=s).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let mut stacks: Vec<Vec<BlockId>> = Vec::new();
    for (placed, b) in order.into_iter().enumerate() {
        let remaining = s - placed as u32;
        let open: Vec<usize> = (0..stacks.len()).filter(|&i| (stacks[i].len() as u32) < max_height).collect();
        // a new stack is allowed only while the rest still fits afterwards
        let free_after_new = (max_stacks.saturating_sub(stacks.len() as u32 + 1)) * max_height
            + open.iter().map(|&i| max_height - stacks[i].len() as u32).sum::<u32>()
            + max_height;
        let can_open = (stacks.len() as u32) < max_stacks && free_after_new >= remaining;
        let choices = open.len() + usize::from(can_open);
        let pick = rng.gen_range(0..choices);
        if pick < open.len() {
            stacks[open[pick]].insert(0, b);
        } else {
            stacks.push(vec![b]);
        }
    }
    BWConfig::new(stacks).expect("generator places every block once")
}

/// Two independent random configurations over blocks `1..=s`.
pub fn random_task(s: u32, max_stacks: u32, max_height: u32, seed: u64) -> Result<TaskFile, TaskError> {
    if s == 0 || s > max_stacks.saturating_mul(max_height) {
        return Err(TaskError::Unsatisfiable {
            blocks: s,
            max_stacks,
            max_height,
        });
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let initial = random_config(&mut rng, s, max_stacks, max_height);
    let goal = random_config(&mut rng, s, max_stacks, max_height);
    Ok(TaskFile { initial, goal })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments_parse() {
        let t = parse_task("initial:\n4 5 3 1 2\ngoal:\n4 1 2\n3 5\n").unwrap();
        assert_eq!(t.initial.stacks(), &[vec![4, 5, 3, 1, 2]]);
        assert_eq!(t.goal.stacks(), &[vec![4, 1, 2], vec![3, 5]]);
        let trivial = parse_task("# one block\ninitial:\n1\n\ngoal:\n1   # same\n").unwrap();
        assert_eq!(trivial.initial, trivial.goal);
    }

    #[test]
    fn parse_errors_name_the_problem() {
        assert_eq!(
            parse_task("initial:\n1 2 3\ngoal:\n1 2\n").unwrap_err(),
            TaskError::MismatchedBlocks {
                block: 3,
                present: "initial",
                absent: "goal"
            }
        );
        assert_eq!(
            parse_task("initial:\n1 x\ngoal:\n1\n").unwrap_err(),
            TaskError::BadToken {
                line: 2,
                token: "x".into()
            }
        );
        assert_eq!(
            parse_task("initial:\n1 2\n2\ngoal:\n1 2\n").unwrap_err(),
            TaskError::DuplicateBlock { line: 3, block: 2 }
        );
        assert_eq!(parse_task("1\ngoal:\n1\n").unwrap_err(), TaskError::OutsideSection { line: 1 });
        assert_eq!(parse_task("initial:\n1\n").unwrap_err(), TaskError::MissingSection("goal"));
        assert!(matches!(
            parse_task("initial:\n1 3\ngoal:\n3 1\n").unwrap_err(),
            TaskError::Config { .. }
        ));
    }

    #[test]
    fn serialization_is_canonical() {
        let t = parse_task("initial:\n3 5\n4 1 2\ngoal:\n4 5 3 1 2\n").unwrap();
        let text = serialize_task(&t);
        assert_eq!(text, "initial:\n4 1 2\n3 5\ngoal:\n4 5 3 1 2\n");
        assert_eq!(parse_task(&text).unwrap(), t);
    }

    #[test]
    fn random_tasks_respect_bounds() {
        for seed in 0..200 {
            let t = random_task(10, 5, 7, seed).unwrap();
            for c in [&t.initial, &t.goal] {
                assert_eq!(c.num_blocks(), 10);
                assert!(c.stacks().len() <= 5);
                assert!(c.stacks().iter().all(|s| s.len() <= 7));
            }
        }
        // tight: every stack must be full
        let t = random_task(6, 2, 3, 4).unwrap();
        assert!(t.initial.stacks().iter().all(|s| s.len() == 3));
        assert_eq!(random_task(10, 5, 7, 9).unwrap(), random_task(10, 5, 7, 9).unwrap());
        let one = random_task(1, 5, 7, 3).unwrap();
        assert_eq!(one.initial.stacks(), &[vec![1]]);
        assert!(random_task(11, 2, 5, 0).is_err());
    }
}
