//! Rules, goals and databases.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::constraint::{CAtom, Constraint, Universe};
use crate::error::{Error, Result};
use crate::formula::QuantifiedFormula;
use crate::term::{Atom, Const, Fresh, GroundAtom, Literal, Sym, Term, UpdateAtom, Var};

/// An intensional rule. Plain rules have no tail; extended rules produced by
/// negative unfolding carry a quantified tail.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    /// Arguments are distinct variables.
    pub head: Atom,
    pub constraint: Constraint,
    pub updates: Vec<UpdateAtom>,
    pub body: Vec<Literal>,
    pub tail: Option<QuantifiedFormula>,
}

impl Rule {
    pub fn head_vars(&self) -> Vec<Var> {
        self.head.vars().cloned().collect()
    }

    pub fn positive_body(&self) -> impl Iterator<Item = &Literal> {
        self.body.iter().filter(|l| l.positive)
    }

    pub fn negative_body(&self) -> impl Iterator<Item = &Literal> {
        self.body.iter().filter(|l| !l.positive)
    }

    /// Free variables of everything right of the arrow.
    pub fn body_vars(&self) -> BTreeSet<Var> {
        let mut out = self.constraint.vars();
        for u in &self.updates {
            out.extend(u.atom.vars().cloned());
        }
        for l in &self.body {
            out.extend(l.atom.vars().cloned());
        }
        if let Some(t) = &self.tail {
            out.extend(t.free_vars());
        }
        out
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = self.body_vars();
        out.extend(self.head.vars().cloned());
        out
    }

    pub fn local_vars(&self) -> BTreeSet<Var> {
        let head: BTreeSet<Var> = self.head.vars().cloned().collect();
        self.body_vars().into_iter().filter(|v| !head.contains(v)).collect()
    }

    /// Every variable name used, bound tail variables included.
    pub fn all_vars(&self) -> BTreeSet<Var> {
        let mut out = self.free_vars();
        if let Some(t) = &self.tail {
            out.extend(t.bound_vars());
        }
        out
    }

    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> Rule {
        let term = |t: &Term| match t {
            Term::Var(v) => Term::Var(f(v)),
            c => c.clone(),
        };
        Rule {
            head: self.head.map_terms(&mut |t| term(t)),
            constraint: self.constraint.rename(&|v| Term::Var(f(v))),
            updates: self.updates.iter().map(|u| u.map_terms(&mut |t| term(t))).collect(),
            body: self
                .body
                .iter()
                .map(|l| Literal {
                    positive: l.positive,
                    atom: l.atom.map_terms(&mut |t| term(t)),
                })
                .collect(),
            tail: self.tail.as_ref().map(|t| t.rename(f)),
        }
    }

    /// Copy whose variables are all fresh.
    pub fn rename_apart(&self, fresh: &mut Fresh) -> Rule {
        let map: BTreeMap<Var, Var> = self.all_vars().into_iter().map(|v| (v, fresh.var())).collect();
        self.rename(&|v| map.get(v).cloned().unwrap_or_else(|| v.clone()))
    }

    /// Predicates the rule depends on, with polarity. Tail literals count as
    /// negative dependencies.
    pub fn dependencies(&self) -> Vec<(Sym, bool)> {
        let mut out: Vec<(Sym, bool)> = self.body.iter().map(|l| (l.atom.pred.clone(), l.positive)).collect();
        if let Some(t) = &self.tail {
            out.extend(t.literals().map(|l| (l.atom.pred.clone(), false)));
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<Const> {
        let mut out = constraint_constants(&self.constraint);
        for a in self.updates.iter().map(|u| &u.atom).chain(self.body.iter().map(|l| &l.atom)) {
            out.extend(atom_constants(a));
        }
        if let Some(t) = &self.tail {
            for d in &t.matrix {
                out.extend(constraint_constants(&d.constraint));
                for l in &d.literals {
                    out.extend(atom_constants(&l.atom));
                }
            }
        }
        out
    }
}

pub(crate) fn atom_constants(a: &Atom) -> impl Iterator<Item = Const> + '_ {
    a.args.iter().filter_map(|t| t.as_const().cloned())
}

pub(crate) fn constraint_constants(c: &Constraint) -> BTreeSet<Const> {
    let mut out = BTreeSet::new();
    for a in c.atoms() {
        let (x, y) = a.terms();
        out.extend(x.as_const().cloned());
        out.extend(y.as_const().cloned());
    }
    out
}

/// Replaces constants and repeated variables in `atom` by fresh variables,
/// recording the equalities in `eqs`.
pub(crate) fn normalize_atom(atom: &Atom, fresh: &mut Fresh, eqs: &mut Vec<CAtom>) -> Atom {
    let mut seen: BTreeSet<Var> = BTreeSet::new();
    let args = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) if seen.insert(v.clone()) => t.clone(),
            _ => {
                let nv = fresh.var();
                eqs.push(CAtom::Eq(Term::Var(nv.clone()), t.clone()));
                Term::Var(nv)
            }
        })
        .collect();
    Atom {
        pred: atom.pred.clone(),
        args,
    }
}

/// A transaction: `?- constraints, updates, literals.`
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Goal {
    pub constraint: Constraint,
    pub updates: Vec<UpdateAtom>,
    pub body: Vec<Literal>,
}

impl Goal {
    /// Variables reported in answers: those whose names do not start with
    /// an underscore, in order of first occurrence.
    pub fn answer_vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        let mut push = |v: &Var| {
            if !v.name().starts_with('_') && !out.contains(v) {
                out.push(v.clone());
            }
        };
        for l in &self.body {
            l.atom.vars().for_each(&mut push);
        }
        for u in &self.updates {
            u.atom.vars().for_each(&mut push);
        }
        for v in self.constraint.vars() {
            push(&v);
        }
        out
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = self.constraint.vars();
        for u in &self.updates {
            out.extend(u.atom.vars().cloned());
        }
        for l in &self.body {
            out.extend(l.atom.vars().cloned());
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<Const> {
        let mut out = constraint_constants(&self.constraint);
        for a in self.updates.iter().map(|u| &u.atom).chain(self.body.iter().map(|l| &l.atom)) {
            out.extend(atom_constants(a));
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum PredKind {
    Extensional,
    Intensional,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct PredInfo {
    pub arity: usize,
    pub kind: PredKind,
}

/// Extensional facts, intensional rules and declared extra constants.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Database {
    pub facts: BTreeSet<GroundAtom>,
    pub rules: Vec<Rule>,
    pub domain: BTreeSet<Const>,
    pub preds: BTreeMap<Sym, PredInfo>,
}

impl Database {
    pub fn is_extensional(&self, pred: &str) -> bool {
        self.preds.get(pred).is_none_or(|i| i.kind == PredKind::Extensional)
    }

    pub fn arity(&self, pred: &str) -> Option<usize> {
        self.preds.get(pred).map(|i| i.arity)
    }

    pub fn rules_for<'a>(&'a self, pred: &'a str) -> impl Iterator<Item = &'a Rule> + 'a {
        self.rules.iter().filter(move |r| &*r.head.pred == pred)
    }

    /// Active domain of facts and rules plus the declared constants.
    pub fn universe(&self) -> Universe {
        let mut consts: BTreeSet<Const> = self.domain.clone();
        for f in &self.facts {
            consts.extend(f.args.iter().cloned());
        }
        for r in &self.rules {
            consts.extend(r.constants());
        }
        Universe::new(consts)
    }

    /// Universe extended with the constants of a goal.
    pub fn universe_for(&self, goal: &Goal) -> Universe {
        self.universe().extended(goal.constants())
    }

    /// Fresh-name source that avoids every variable of the program.
    pub fn fresh(&self) -> Fresh {
        let vars: Vec<Var> = self.rules.iter().flat_map(|r| r.all_vars()).collect();
        Fresh::avoiding(vars.iter())
    }

    /// Same rules over another fact set. Predicates of the new facts must be
    /// extensional with matching arity.
    pub fn with_facts(&self, facts: BTreeSet<GroundAtom>) -> Result<Database> {
        let mut db = self.clone();
        for f in &facts {
            db.declare(&f.pred, f.args.len(), PredKind::Extensional)?;
        }
        db.facts = facts;
        Ok(db)
    }

    fn declare(&mut self, pred: &Sym, arity: usize, kind: PredKind) -> Result<()> {
        match self.preds.get(pred) {
            None => {
                self.preds.insert(pred.clone(), PredInfo { arity, kind });
                Ok(())
            }
            Some(i) if i.arity != arity => Err(Error::Arity {
                pos: Default::default(),
                pred: pred.to_string(),
                expected: i.arity,
                found: arity,
            }),
            Some(i) if i.kind != kind => Err(Error::KindClash {
                pos: Default::default(),
                pred: pred.to_string(),
            }),
            Some(_) => Ok(()),
        }
    }

    /// Checks that a goal mentions only known predicates with the right
    /// arity and updates only extensional ones.
    pub fn check_goal(&self, goal: &Goal) -> Result<()> {
        let check = |a: &Atom| -> Result<()> {
            match self.preds.get(&a.pred) {
                None => Err(Error::UnknownPredicate(a.pred.to_string())),
                Some(i) if i.arity != a.arity() => Err(Error::Arity {
                    pos: Default::default(),
                    pred: a.pred.to_string(),
                    expected: i.arity,
                    found: a.arity(),
                }),
                Some(_) => Ok(()),
            }
        };
        for l in &goal.body {
            check(&l.atom)?;
        }
        for u in &goal.updates {
            if let Some(i) = self.preds.get(&u.atom.pred) {
                if i.kind == PredKind::Intensional {
                    return Err(Error::UpdateOnIntensional {
                        pos: Default::default(),
                        pred: u.atom.pred.to_string(),
                    });
                }
                check(&u.atom)?;
            }
        }
        Ok(())
    }

    /// Canonical source text; parsing it yields an equal database.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        if !self.domain.is_empty() {
            let names: Vec<&str> = self.domain.iter().map(Const::name).collect();
            out.push_str(&format!("#domain {}.\n", names.join(", ")));
        }
        let mentioned: BTreeSet<&str> = self
            .facts
            .iter()
            .map(|f| &*f.pred)
            .chain(self.rules.iter().flat_map(|r| r.updates.iter().map(|u| &*u.atom.pred)))
            .collect();
        let declared: Vec<String> = self
            .preds
            .iter()
            .filter(|(p, i)| i.kind == PredKind::Extensional && !mentioned.contains(&***p))
            .map(|(p, i)| format!("{p}/{}", i.arity))
            .collect();
        if !declared.is_empty() {
            out.push_str(&format!("#extensional {}.\n", declared.join(", ")));
        }
        for f in &self.facts {
            out.push_str(&format!("{f}.\n"));
        }
        for r in &self.rules {
            out.push_str(&format!("{r}\n"));
        }
        out
    }
}

fn body_items(constraint: &Constraint, updates: &[UpdateAtom], body: &[Literal]) -> Vec<String> {
    let mut items: Vec<String> = Vec::new();
    if constraint.is_false() {
        items.push("false".into());
    } else {
        items.extend(constraint.atoms().iter().map(|a| a.to_string()));
    }
    items.extend(updates.iter().map(|u| u.to_string()));
    items.extend(body.iter().map(|l| l.to_string()));
    items
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items = body_items(&self.constraint, &self.updates, &self.body);
        write!(f, "{} :- ", self.head)?;
        if items.is_empty() {
            f.write_str("true")?;
        } else {
            f.write_str(&items.join(", "))?;
        }
        if let Some(t) = &self.tail {
            write!(f, " |> {t}")?;
        }
        f.write_str(".")
    }
}

impl fmt::Debug for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items = body_items(&self.constraint, &self.updates, &self.body);
        if items.is_empty() {
            f.write_str("?- true.")
        } else {
            write!(f, "?- {}.", items.join(", "))
        }
    }
}
