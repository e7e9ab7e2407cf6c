//! Interleaving enumeration: breadth-first when small, sampled otherwise.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::machine::{Machine, Schedule, State};
use super::serial::SetEffect;
use super::{Scenario, SimError, Simulator};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViolationKind {
    Invariant {
        constraint: String,
    },
    PreconditionFalsified {
        thread: usize,
        operation: String,
        block: String,
        binding: String,
        literal: String,
    },
    NonSerializable {
        initial: Vec<String>,
        final_set: Vec<String>,
        committed: Vec<SetEffect>,
    },
    Deadlock {
        blocked: Vec<usize>,
    },
    /// A thread gave up after the retry limit; a diagnostic, not a failure.
    Livelock {
        thread: usize,
        retries: u32,
    },
}

impl ViolationKind {
    pub fn is_failure(&self) -> bool {
        !matches!(self, ViolationKind::Livelock { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ViolationKind::Invariant { .. } => "invariant",
            ViolationKind::PreconditionFalsified { .. } => "precondition_falsified",
            ViolationKind::NonSerializable { .. } => "non_serializable",
            ViolationKind::Deadlock { .. } => "deadlock",
            ViolationKind::Livelock { .. } => "livelock",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Steps executed when the violation was observed.
    pub time: usize,
    pub schedule: Schedule,
    pub threads: Vec<String>,
    /// The schedule as a plain-text interleaving diagram.
    pub diagram: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Mode {
    Exhaustive,
    Sampled { seed: u64, samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreBounds {
    pub max_threads: usize,
    /// Exhaustive enumeration up to this many threads...
    pub exhaustive_threads: usize,
    /// ...and this many statements over all programs.
    pub exhaustive_statements: usize,
    pub samples: usize,
    pub seed: u64,
    /// Step cap for one sampled run.
    pub max_steps: usize,
}

impl Default for ExploreBounds {
    fn default() -> Self {
        ExploreBounds {
            max_threads: 8,
            exhaustive_threads: 3,
            exhaustive_statements: 24,
            samples: 500,
            seed: 0,
            max_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exploration {
    pub mode: Mode,
    pub threads: Vec<String>,
    pub states: usize,
    pub runs: usize,
    pub violations: Vec<Violation>,
}

impl Exploration {
    pub fn failures(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.kind.is_failure())
    }
}

struct Recorder<'m, 's, 'a> {
    machine: &'m Machine<'s, 'a>,
    labels: Vec<Vec<String>>,
    seen: BTreeSet<ViolationKind>,
    out: Vec<Violation>,
}

impl Recorder<'_, '_, '_> {
    fn record(&mut self, kind: ViolationKind, steps: Vec<(usize, usize)>) {
        if !self.seen.insert(kind.clone()) {
            return;
        }
        let schedule = Schedule { steps };
        self.out.push(Violation {
            kind,
            time: schedule.steps.len(),
            diagram: schedule.diagram(&self.labels),
            schedule,
            threads: self.machine.scenario.labels(),
        });
    }
}

impl PartialOrd for ViolationKind {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ViolationKind {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let key = |v: &ViolationKind| serde_json::to_string(v).unwrap_or_default();
        key(self).cmp(&key(other))
    }
}

/// Explores the interleavings of one scenario. Violations carry a
/// shortest reproducing schedule when enumeration is exhaustive.
pub fn explore(sim: &Simulator, scenario: &Scenario, bounds: &ExploreBounds) -> Result<Exploration, SimError> {
    let n = scenario.threads.len();
    if n > bounds.max_threads {
        return Err(SimError::Bounds {
            threads: n,
            max: bounds.max_threads,
        });
    }
    let m = Machine::new(sim, scenario);
    let init = m.initial()?;
    let mut rec = Recorder {
        machine: &m,
        labels: m.labels(&init),
        seen: BTreeSet::new(),
        out: Vec::new(),
    };
    let exhaustive = n <= bounds.exhaustive_threads && m.statement_count(&init) <= bounds.exhaustive_statements;
    let (mode, states, runs) = if exhaustive {
        let (states, runs) = bfs(&m, init, &mut rec);
        (Mode::Exhaustive, states, runs)
    } else {
        let (states, runs) = sample(&m, init, bounds, &mut rec);
        (
            Mode::Sampled {
                seed: bounds.seed,
                samples: bounds.samples,
            },
            states,
            runs,
        )
    };
    Ok(Exploration {
        mode,
        threads: scenario.labels(),
        states,
        runs,
        violations: rec.out,
    })
}

fn path(parents: &[(usize, (usize, usize))], mut i: usize) -> Vec<(usize, usize)> {
    let mut steps = Vec::new();
    while i != 0 {
        let (p, step) = parents[i];
        steps.push(step);
        i = p;
    }
    steps.reverse();
    steps
}

fn bfs(m: &Machine, init: State, rec: &mut Recorder) -> (usize, usize) {
    let mut index: HashMap<State, usize> = HashMap::new();
    let mut states = vec![init.clone()];
    let mut parents = vec![(0, (0, 0))];
    index.insert(init, 0);
    let mut queue = VecDeque::from([0usize]);
    let mut runs = 0;
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        let enabled = m.enabled_threads(&s);
        if enabled.is_empty() {
            runs += 1;
            for v in m.terminal(&s) {
                rec.record(v, path(&parents, i));
            }
            continue;
        }
        for t in enabled {
            let step = (t, m.pc(&s, t));
            let (next, found) = m.step(&s, t);
            if !found.is_empty() {
                let mut p = path(&parents, i);
                p.push(step);
                for v in found {
                    rec.record(v, p.clone());
                }
            }
            if !index.contains_key(&next) {
                index.insert(next.clone(), states.len());
                states.push(next);
                parents.push((i, step));
                queue.push_back(states.len() - 1);
            }
        }
    }
    (states.len(), runs)
}

fn sample(m: &Machine, init: State, bounds: &ExploreBounds, rec: &mut Recorder) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(bounds.seed);
    let mut states = 0;
    for _ in 0..bounds.samples {
        let mut s = init.clone();
        let mut steps = Vec::new();
        while steps.len() < bounds.max_steps {
            let enabled = m.enabled_threads(&s);
            let Some(&t) = enabled.choose(&mut rng) else {
                for v in m.terminal(&s) {
                    rec.record(v, steps.clone());
                }
                break;
            };
            steps.push((t, m.pc(&s, t)));
            let (next, found) = m.step(&s, t);
            for v in found {
                rec.record(v, steps.clone());
            }
            s = next;
            states += 1;
        }
    }
    (states, bounds.samples)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExploreReport {
    pub threads: usize,
    pub scenarios: usize,
    pub exhaustive: bool,
    pub states: usize,
    pub runs: usize,
    pub violations: Vec<Violation>,
}

impl ExploreReport {
    pub fn failures(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.kind.is_failure())
    }

    pub fn count(&self, kind: &str) -> usize {
        self.violations.iter().filter(|v| v.kind.name() == kind).count()
    }
}

/// Explores every `threads`-thread scenario of the instance.
pub fn explore_all(sim: &Simulator, threads: usize, bounds: &ExploreBounds) -> Result<ExploreReport, SimError> {
    let scenarios = sim.scenarios(threads);
    let mut report = ExploreReport {
        threads,
        scenarios: scenarios.len(),
        exhaustive: true,
        states: 0,
        runs: 0,
        violations: Vec::new(),
    };
    for s in &scenarios {
        let e = explore(sim, s, bounds)?;
        report.exhaustive &= e.mode == Mode::Exhaustive;
        report.states += e.states;
        report.runs += e.runs;
        report.violations.extend(e.violations);
    }
    Ok(report)
}
