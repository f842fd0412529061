//! Loading programs and running the commands shared by batch mode and the REPL.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::IsTerminal;
use std::path::Path;

use udatalog::analysis::{check_rules, stratify};
use udatalog::compose::{compose, with_rules};
use udatalog::constraint::Universe;
use udatalog::eval::{mark, stratified_fixpoint, Ctx, Solution};
use udatalog::parser::{parse_goal, parse_program};
use udatalog::program::{Database, Goal};
use udatalog::term::{Const, Fresh, GroundAtom};
use udatalog::transaction::{edb_to_string, execute, load_edb, save_edb, Status, TransactionOutcome};
use udatalog::Error;

pub const EXIT_ABORT: u8 = 1;
pub const EXIT_ANALYSIS: u8 = 2;
pub const EXIT_USAGE: u8 = 3;

const UNIVERSE_TAG: &str = "% universe:";

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub msg: String,
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            msg: msg.into(),
        }
    }

    pub fn analysis(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_ANALYSIS,
            msg: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotStratifiable(_) | Error::NotAdmissible(_) | Error::BoundExceeded(_) | Error::MissingDefinition(_) => EXIT_ANALYSIS,
            _ => EXIT_USAGE,
        };
        Failure { code, msg: e.to_string() }
    }
}

pub type Outcome<T = String> = Result<T, Failure>;

#[derive(Clone, Debug, Default)]
pub struct Config {
    pub domain: Vec<Const>,
    pub unfold_cap: usize,
    pub verbose: bool,
    pub color: bool,
    pub seed: Option<u64>,
}

impl Config {
    pub fn color_enabled(no_color: bool) -> bool {
        !no_color && std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal()
    }

    fn fresh(&self, db: &Database) -> Fresh {
        match self.seed {
            Some(s) => {
                let mut f = Fresh::new(s);
                let vars: Vec<_> = db.rules.iter().flat_map(|r| r.all_vars()).collect();
                f.bump_past(vars.iter());
                f
            }
            None => db.fresh(),
        }
    }

    fn paint(&self, text: &str, code: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }
}

/// Current database, the transactions run so far, and a one-step undo.
pub struct Session {
    pub db: Database,
    pub history: Vec<TransactionOutcome>,
    undo: Option<BTreeSet<GroundAtom>>,
    pub config: Config,
}

/// Reads a program, optionally replacing its facts by a fact file, and
/// widens the domain. A precompiled program refuses constants outside the
/// universe it was built for.
pub fn load(path: &Path, edb: Option<&Path>, config: &Config) -> Outcome<Database> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let mut db = parse_program(&text).map_err(|e| located(path, e))?;
    if let Some(edb) = edb {
        let (facts, domain) = load_edb(edb).map_err(|e| located(edb, e))?;
        db = db.with_facts(facts).map_err(|e| located(edb, e))?;
        db.domain.extend(domain);
    }
    db.domain.extend(config.domain.iter().cloned());
    if let Some(built) = precompiled_universe(&text) {
        let extra: Vec<String> = db.universe().consts().iter().filter(|c| !built.contains(c)).map(|c| c.to_string()).collect();
        if !extra.is_empty() {
            return Err(Failure::analysis(format!(
                "{} was precompiled for another universe; new constants: {}",
                path.display(),
                extra.join(", ")
            )));
        }
    }
    Ok(db)
}

fn located(path: &Path, e: Error) -> Failure {
    let mut f = Failure::from(e);
    f.msg = format!("{}: {}", path.display(), f.msg);
    f
}

fn precompiled_universe(text: &str) -> Option<BTreeSet<Const>> {
    let line = text.lines().find_map(|l| l.strip_prefix(UNIVERSE_TAG))?;
    Some(line.split(',').map(str::trim).filter(|s| !s.is_empty()).map(Const::new).collect())
}

pub fn goal(text: &str) -> Outcome<Goal> {
    parse_goal(text).map_err(Failure::from)
}

impl Session {
    pub fn new(db: Database, config: Config) -> Self {
        Session {
            db,
            history: Vec::new(),
            undo: None,
            config,
        }
    }

    /// Stratification and rule checks.
    pub fn check(&self) -> Outcome {
        let strat = stratify(&self.db)?;
        let report = check_rules(&self.db);
        if !report.is_ok() {
            return Err(Failure::analysis(report.to_string().trim_end()));
        }
        let mut out = self.strata_text(&strat);
        writeln!(out, "ok: {} rules, {} facts", self.db.rules.len(), self.db.facts.len()).unwrap();
        Ok(out)
    }

    pub fn strata(&self) -> Outcome {
        Ok(self.strata_text(&stratify(&self.db)?))
    }

    fn strata_text(&self, strat: &udatalog::analysis::Stratification) -> String {
        let mut out = String::new();
        for level in 0..strat.count() {
            let preds: Vec<String> = strat.preds_at(level).iter().map(|p| p.to_string()).collect();
            writeln!(out, "stratum {level}: {}", preds.join(", ")).unwrap();
        }
        out
    }

    /// Marking phase only.
    pub fn query(&self, goal: &Goal) -> Outcome {
        let m = mark(&self.db, goal, self.config.fresh(&self.db))?;
        Ok(self.solutions_text(&m.solutions))
    }

    fn solutions_text(&self, solutions: &[Solution]) -> String {
        if solutions.is_empty() {
            return "no solutions\n".into();
        }
        let mut out = String::new();
        for s in solutions {
            writeln!(out, "{s}").unwrap();
            if self.config.verbose && !s.updates.is_empty() {
                let ups: Vec<String> = s.updates.iter().map(|u| u.to_string()).collect();
                writeln!(out, "  updates: {}", ups.join(", ")).unwrap();
            }
        }
        out
    }

    /// Full transaction. On commit the session moves to the new EDB and
    /// remembers the old one for `undo`.
    pub fn transaction(&mut self, goal: &Goal) -> Outcome<(String, Status)> {
        let before = self.db.facts.clone();
        let fresh = self.config.fresh(&self.db);
        let outcome = execute(&mut self.db, goal, fresh, &mut |_| Ok(()))?;
        let mut out = self.solutions_text(&outcome.bindings);
        let status = outcome.status;
        let label = match status {
            Status::Commit => self.config.paint(&status.to_string(), "32"),
            Status::Abort(_) => self.config.paint(&status.to_string(), "31"),
        };
        writeln!(out, "{label}").unwrap();
        if status == Status::Commit {
            self.undo = Some(before);
        }
        self.history.push(outcome);
        Ok((out, status))
    }

    pub fn edb(&self) -> String {
        edb_to_string(&self.db.facts, &BTreeSet::new())
    }

    pub fn save(&self, path: &Path) -> Outcome {
        save_edb(&self.db, path).map_err(|e| located(path, e))?;
        Ok(format!("saved {} facts to {}\n", self.db.facts.len(), path.display()))
    }

    pub fn undo(&mut self) -> Outcome {
        let Some(facts) = self.undo.take() else {
            return Err(Failure::usage("nothing to undo"));
        };
        self.db = self.db.with_facts(facts)?;
        Ok("restored the previous EDB\n".into())
    }

    /// Each stratum's model, canonically named and sorted.
    pub fn fixpoint(&self) -> Outcome {
        let strat = stratify(&self.db)?;
        let mut ctx = Ctx::new(self.db.universe(), self.config.fresh(&self.db));
        let fix = stratified_fixpoint(&self.db, &strat, &mut ctx);
        let mut out = String::new();
        for (k, m) in fix.strata.iter().enumerate() {
            writeln!(out, "% M{} ({} iterations)", k + 1, fix.iterations[k]).unwrap();
            out.push_str(&m.to_string());
        }
        Ok(out)
    }

    /// The composed, recursion-free program with a header naming the
    /// universe it is valid for.
    pub fn precompile(&self) -> Outcome {
        let universe: Universe = self.db.universe();
        let mut fresh = self.config.fresh(&self.db);
        let rules = compose(&self.db, &universe, self.config.unfold_cap, &mut fresh)?;
        let composed = with_rules(&self.db, rules, &universe);
        let names: Vec<&str> = universe.consts().iter().map(Const::name).collect();
        let mut out = String::new();
        writeln!(out, "% precompiled by udatalog {}", env!("CARGO_PKG_VERSION")).unwrap();
        writeln!(out, "{UNIVERSE_TAG} {}", names.join(", ")).unwrap();
        out.push_str(&composed.to_source());
        Ok(out)
    }
}
