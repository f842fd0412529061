//! The update phase: check the collected updates, then swap in the new EDB.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use crate::analysis::check_admissible;
use crate::eval::{mark, Marking, Solution};
use crate::parser::parse_facts;
use crate::program::{Database, Goal};
use crate::term::{ground_updates_consistent, Const, Fresh, GroundAtom, GroundUpdate, Sign, UpdateAtom};
use crate::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AbortReason {
    Inconsistent,
    NonGround,
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbortReason::Inconsistent => "inconsistent updates",
            AbortReason::NonGround => "non-ground updates",
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Status {
    Commit,
    Abort(AbortReason),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Commit => f.write_str("COMMIT"),
            Status::Abort(r) => write!(f, "ABORT ({r})"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransactionOutcome {
    /// One per solution; empty on abort.
    pub bindings: Vec<Solution>,
    pub new_edb: BTreeSet<GroundAtom>,
    pub status: Status,
    /// The ground updates that were applied (empty on abort).
    pub updates: BTreeSet<GroundUpdate>,
}

impl TransactionOutcome {
    pub fn committed(&self) -> bool {
        self.status == Status::Commit
    }
}

/// All update atoms demanded by the solutions.
pub fn collect_updates(solutions: &[Solution]) -> Vec<UpdateAtom> {
    let mut out: Vec<UpdateAtom> = Vec::new();
    for s in solutions {
        out.extend(s.updates.iter().cloned());
    }
    out
}

/// Deletions first, then insertions.
pub fn apply_updates(facts: &BTreeSet<GroundAtom>, updates: &BTreeSet<GroundUpdate>) -> BTreeSet<GroundAtom> {
    let mut out = facts.clone();
    for u in updates.iter().filter(|u| u.sign == Sign::Delete) {
        out.remove(&u.atom);
    }
    for u in updates.iter().filter(|u| u.sign == Sign::Insert) {
        out.insert(u.atom.clone());
    }
    out
}

/// Decides commit or abort for a finished marking phase.
pub fn decide(facts: &BTreeSet<GroundAtom>, solutions: Vec<Solution>) -> TransactionOutcome {
    let abort = |reason| TransactionOutcome {
        bindings: Vec::new(),
        new_edb: facts.clone(),
        status: Status::Abort(reason),
        updates: BTreeSet::new(),
    };
    let mut ground: BTreeSet<GroundUpdate> = BTreeSet::new();
    for u in collect_updates(&solutions) {
        match u.to_ground() {
            Some(g) => {
                ground.insert(g);
            }
            None => return abort(AbortReason::NonGround),
        }
    }
    if !ground_updates_consistent(&ground) {
        return abort(AbortReason::Inconsistent);
    }
    TransactionOutcome {
        bindings: solutions,
        new_edb: apply_updates(facts, &ground),
        status: Status::Commit,
        updates: ground,
    }
}

/// Runs the marking phase and the update check. `db` is not touched; the
/// outcome carries the would-be EDB.
pub fn apply_transaction(goal: &Goal, db: &Database, fresh: Fresh) -> Result<(Marking, TransactionOutcome)> {
    let report = check_admissible(db, goal);
    if !report.is_ok() {
        return Err(Error::NotAdmissible(report.to_string().trim_end().to_string()));
    }
    let marking = mark(db, goal, fresh)?;
    let outcome = decide(&db.facts, marking.solutions.clone());
    Ok((marking, outcome))
}

/// One step of writing the new EDB, reported to the test hook.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step<'a> {
    Delete(&'a GroundAtom),
    Insert(&'a GroundAtom),
}

/// Runs a transaction and, on commit, replaces `db.facts`. The new fact
/// set is built aside; `hook` sees every step and may fail it, in which
/// case `db` keeps its old facts.
pub fn execute(
    db: &mut Database,
    goal: &Goal,
    fresh: Fresh,
    hook: &mut dyn FnMut(Step<'_>) -> Result<()>,
) -> Result<TransactionOutcome> {
    let (_, outcome) = apply_transaction(goal, db, fresh)?;
    if !outcome.committed() {
        return Ok(outcome);
    }
    let mut scratch = db.facts.clone();
    for u in outcome.updates.iter().filter(|u| u.sign == Sign::Delete) {
        hook(Step::Delete(&u.atom))?;
        scratch.remove(&u.atom);
    }
    for u in outcome.updates.iter().filter(|u| u.sign == Sign::Insert) {
        hook(Step::Insert(&u.atom))?;
        scratch.insert(u.atom.clone());
    }
    debug_assert_eq!(scratch, outcome.new_edb);
    *db = db.with_facts(scratch)?;
    Ok(outcome)
}

/// Fact-file text: optional `#domain` line, then sorted facts.
pub fn edb_to_string(facts: &BTreeSet<GroundAtom>, domain: &BTreeSet<Const>) -> String {
    let mut out = String::new();
    if !domain.is_empty() {
        let names: Vec<&str> = domain.iter().map(Const::name).collect();
        out.push_str(&format!("#domain {}.\n", names.join(", ")));
    }
    for f in facts {
        out.push_str(&format!("{f}.\n"));
    }
    out
}

/// Writes through a sibling temp file and a rename.
pub fn save_edb(db: &Database, path: &Path) -> Result<()> {
    let text = edb_to_string(&db.facts, &db.domain);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_edb(path: &Path) -> Result<(BTreeSet<GroundAtom>, BTreeSet<Const>)> {
    parse_facts(&fs::read_to_string(path)?)
}
