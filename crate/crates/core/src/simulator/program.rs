//! Abstract programs bound to concrete heap cells.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::analysis::{synthesize_abstract, AbstractCode, AbstractStmt, SynthesisVerdict};
use crate::kernel::{Binding, Model};
use crate::knowledge::GroundStep;
use crate::symbol::Sym;

use super::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStmt {
    Lock(Sym),
    /// Re-match of the block's precondition against the live heap.
    Validate,
    Update(GroundStep),
    Unlock(Sym),
}

impl fmt::Display for SimStmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimStmt::Lock(n) => write!(f, "lock({n})"),
            SimStmt::Unlock(n) => write!(f, "unlock({n})"),
            SimStmt::Validate => f.write_str("validate"),
            SimStmt::Update(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SimProgram {
    pub operation: Sym,
    pub block: Sym,
    pub target_key: Option<Sym>,
    pub statements: Vec<SimStmt>,
}

impl SimProgram {
    pub fn count(&self, pred: impl Fn(&SimStmt) -> bool) -> usize {
        self.statements.iter().filter(|s| pred(s)).count()
    }

    /// Index of the last update, if any.
    pub fn last_update(&self) -> Option<usize> {
        self.statements.iter().rposition(|s| matches!(s, SimStmt::Update(_)))
    }
}

/// Abstract code per block, at the level of pattern symbols.
#[derive(Debug, Clone, Default)]
pub struct Library {
    codes: BTreeMap<(Sym, Sym), AbstractCode>,
}

impl Library {
    /// The synthesized programs: precondition locks around the first
    /// accepted order, or the declared steps where no order was accepted.
    pub fn from_verdict(model: &Model, verdict: &SynthesisVerdict) -> Library {
        let mut codes = BTreeMap::new();
        for bv in &verdict.blocks {
            let (_, spec) = model
                .find_block(bv.operation.as_str(), bv.block.as_str())
                .expect("verdict block exists");
            let order = bv.order.clone().unwrap_or_else(|| spec.steps.clone());
            codes.insert((bv.operation, bv.block), synthesize_abstract(spec, &bv.locks, &order));
        }
        Library { codes }
    }

    pub fn get(&self, op: Sym, block: Sym) -> Option<&AbstractCode> {
        self.codes.get(&(op, block))
    }

    pub fn set(&mut self, op: Sym, block: Sym, code: AbstractCode) {
        self.codes.insert((op, block), code);
    }

    /// Replaces the lock list of one block, keeping its steps.
    pub fn override_locks(&mut self, op: Sym, block: Sym, locks: &[Sym]) -> Result<(), SimError> {
        let code = self.get(op, block).ok_or_else(|| SimError::UnknownBlock {
            operation: op.to_string(),
            block: block.to_string(),
        })?;
        let mut stmts: Vec<AbstractStmt> = locks.iter().map(|n| AbstractStmt::Lock(*n)).collect();
        stmts.extend(
            code.stmts
                .iter()
                .filter(|s| matches!(s, AbstractStmt::Validate(_) | AbstractStmt::Step(_)))
                .cloned(),
        );
        stmts.extend(locks.iter().map(|n| AbstractStmt::Unlock(*n)));
        self.set(op, block, AbstractCode { stmts });
        Ok(())
    }
}

/// Binds the pattern symbols of `code` to heap cells.
pub fn compile_abstract(
    model: &Model,
    code: &AbstractCode,
    op: Sym,
    block: Sym,
    binding: &Binding,
) -> Result<SimProgram, SimError> {
    let pattern = model.pattern(op, block);
    let is_constant = |s: Sym| model.ops.constants.contains(&s) || pattern.constants.contains(&s);
    let node = |n: Sym| -> Result<Sym, SimError> {
        match binding.get(n) {
            Some(c) => Ok(c),
            None if is_constant(n) => Ok(n),
            None => Err(SimError::Unbound(n.to_string())),
        }
    };
    let mut statements = Vec::with_capacity(code.stmts.len());
    for s in &code.stmts {
        statements.push(match s {
            AbstractStmt::Lock(n) => SimStmt::Lock(node(*n)?),
            AbstractStmt::Unlock(n) => SimStmt::Unlock(node(*n)?),
            AbstractStmt::Validate(_) => SimStmt::Validate,
            AbstractStmt::Step(g) => SimStmt::Update(GroundStep {
                kind: g.kind,
                args: g.args.iter().map(|a| node(*a)).collect::<Result<_, _>>()?,
            }),
        });
    }
    let target_key = target_key(model, op, block, binding);
    Ok(SimProgram {
        operation: op,
        block,
        target_key,
        statements,
    })
}

/// Key of the pattern node `target`, if the block has one.
pub fn target_key(model: &Model, op: Sym, block: Sym, binding: &Binding) -> Option<Sym> {
    let t = Sym::new(super::TARGET);
    let pattern = model.pattern(op, block);
    if let Some((k, _)) = pattern.fresh_keys.iter().find(|(_, o)| *o == Some(t)) {
        return binding.get(*k);
    }
    let (_, spec) = model.find_block(op.as_str(), block.as_str())?;
    spec.precondition
        .iter()
        .find(|l| {
            !l.negated
                && l.atom.pred.as_str() == "key"
                && l.atom.args.len() == 2
                && l.atom.args[0].sym().as_str() == super::TARGET
        })
        .and_then(|l| binding.get(l.atom.args[1].sym()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryError {
    UnlockWithoutLock(Sym),
    LockedTwice(Sym),
    NeverUnlocked(Sym),
    ValidateBeforeLocks,
    UpdateOutsideLocks,
    MissingValidate,
    /// Unlocks must follow the acquisition order.
    UnlockOrder { locked: Vec<Sym>, unlocked: Vec<Sym> },
}

impl fmt::Display for SymmetryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymmetryError::UnlockWithoutLock(n) => write!(f, "unlock({n}) without a matching lock"),
            SymmetryError::LockedTwice(n) => write!(f, "{n} locked twice"),
            SymmetryError::NeverUnlocked(n) => write!(f, "{n} never unlocked"),
            SymmetryError::ValidateBeforeLocks => f.write_str("validation runs before every lock is held"),
            SymmetryError::UpdateOutsideLocks => f.write_str("update outside the locked region"),
            SymmetryError::MissingValidate => f.write_str("no validation before the updates"),
            SymmetryError::UnlockOrder { locked, unlocked } => {
                let j = |v: &[Sym]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",");
                write!(f, "unlock order [{}] differs from lock order [{}]", j(unlocked), j(locked))
            }
        }
    }
}

/// Checks bracketing: locks, one validate, updates, then unlocks in the
/// order the locks were taken.
pub fn check_lock_symmetry(program: &SimProgram) -> Result<(), SymmetryError> {
    let mut locked: Vec<Sym> = Vec::new();
    let mut unlocked: Vec<Sym> = Vec::new();
    let mut validated = false;
    for s in &program.statements {
        match s {
            SimStmt::Lock(n) => {
                if locked.contains(n) {
                    return Err(SymmetryError::LockedTwice(*n));
                }
                if validated {
                    return Err(SymmetryError::ValidateBeforeLocks);
                }
                locked.push(*n);
            }
            SimStmt::Validate => validated = true,
            SimStmt::Update(_) => {
                if !validated {
                    return Err(SymmetryError::MissingValidate);
                }
                if !unlocked.is_empty() {
                    return Err(SymmetryError::UpdateOutsideLocks);
                }
            }
            SimStmt::Unlock(n) => {
                if !locked.contains(n) || unlocked.contains(n) {
                    return Err(SymmetryError::UnlockWithoutLock(*n));
                }
                unlocked.push(*n);
            }
        }
    }
    if let Some(n) = locked.iter().find(|n| !unlocked.contains(n)) {
        return Err(SymmetryError::NeverUnlocked(*n));
    }
    if locked != unlocked {
        return Err(SymmetryError::UnlockOrder { locked, unlocked });
    }
    Ok(())
}
