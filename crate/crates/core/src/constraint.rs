//! Equality / disequality constraints over a finite Herbrand universe.
//!
//! A [`Constraint`] is kept in solved form: every equivalence class of terms
//! has one representative (its constant if it has one, otherwise its least
//! variable), non-representative variables map to that representative, and
//! disequalities only mention representatives. The solved form is unique for
//! a given set of equivalence classes, so structural equality coincides with
//! syntactic equivalence up to atom order.
//!
//! Questions whose answer depends on the domain (solvability, entailment,
//! projection of disequality-only variables, negation) are answered relative
//! to a [`Universe`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::term::{Atom, Const, Sign, Term, UpdateAtom, Var};

/// The finite set of constants every variable ranges over.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Universe {
    consts: Vec<Const>,
}

impl Universe {
    pub fn new(consts: impl IntoIterator<Item = Const>) -> Self {
        let set: BTreeSet<Const> = consts.into_iter().collect();
        Universe {
            consts: set.into_iter().collect(),
        }
    }

    pub fn of(names: &[&str]) -> Self {
        Universe::new(names.iter().map(|n| Const::new(n)))
    }

    pub fn consts(&self) -> &[Const] {
        &self.consts
    }

    pub fn len(&self) -> usize {
        self.consts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.consts.is_empty()
    }

    pub fn contains(&self, c: &Const) -> bool {
        self.consts.binary_search(c).is_ok()
    }

    pub fn extended(&self, extra: impl IntoIterator<Item = Const>) -> Universe {
        Universe::new(self.consts.iter().cloned().chain(extra))
    }
}

/// A primitive constraint as written by the user.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum CAtom {
    Eq(Term, Term),
    Neq(Term, Term),
}

impl CAtom {
    pub fn negate(&self) -> CAtom {
        match self {
            CAtom::Eq(a, b) => CAtom::Neq(a.clone(), b.clone()),
            CAtom::Neq(a, b) => CAtom::Eq(a.clone(), b.clone()),
        }
    }

    pub fn terms(&self) -> (&Term, &Term) {
        match self {
            CAtom::Eq(a, b) | CAtom::Neq(a, b) => (a, b),
        }
    }
}

/// Conjunction of equalities and disequalities in solved form, or `false`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    unsat: bool,
    bind: BTreeMap<Var, Term>,
    neqs: BTreeSet<(Var, Term)>,
}

impl Default for Constraint {
    fn default() -> Self {
        Constraint::top()
    }
}

/// A disjunction of constraints. The empty list is `false`.
pub type Disjunction = Vec<Constraint>;

impl Constraint {
    /// The empty conjunction.
    pub fn top() -> Self {
        Constraint {
            unsat: false,
            bind: BTreeMap::new(),
            neqs: BTreeSet::new(),
        }
    }

    pub fn falsum() -> Self {
        Constraint {
            unsat: true,
            bind: BTreeMap::new(),
            neqs: BTreeSet::new(),
        }
    }

    pub fn from_atoms<'a>(atoms: impl IntoIterator<Item = &'a CAtom>) -> Self {
        let mut c = Constraint::top();
        for a in atoms {
            c.add(a);
        }
        c
    }

    pub fn eq(a: Term, b: Term) -> Self {
        let mut c = Constraint::top();
        c.add_eq(&a, &b);
        c
    }

    pub fn neq(a: Term, b: Term) -> Self {
        let mut c = Constraint::top();
        c.add_neq(&a, &b);
        c
    }

    pub fn is_false(&self) -> bool {
        self.unsat
    }

    pub fn is_true(&self) -> bool {
        !self.unsat && self.bind.is_empty() && self.neqs.is_empty()
    }

    pub fn add(&mut self, atom: &CAtom) {
        match atom {
            CAtom::Eq(a, b) => self.add_eq(a, b),
            CAtom::Neq(a, b) => self.add_neq(a, b),
        }
    }

    pub fn with(&self, atom: &CAtom) -> Constraint {
        let mut c = self.clone();
        c.add(atom);
        c
    }

    /// Representative of `t`'s equivalence class.
    pub fn rep(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.bind.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        }
    }

    pub fn apply(&self, t: &Term) -> Term {
        self.rep(t)
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        a.map_terms(&mut |t| self.rep(t))
    }

    /// Applies the equalities to update atoms, sorted and deduplicated.
    pub fn apply_updates(&self, us: &[UpdateAtom]) -> Vec<UpdateAtom> {
        let mut out: Vec<UpdateAtom> = us.iter().map(|u| u.map_terms(&mut |t| self.rep(t))).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn add_eq(&mut self, a: &Term, b: &Term) {
        if self.unsat {
            return;
        }
        let ra = self.rep(a);
        let rb = self.rep(b);
        if ra == rb {
            return;
        }
        match (ra, rb) {
            (Term::Const(_), Term::Const(_)) => self.set_false(),
            (Term::Var(x), c @ Term::Const(_)) | (c @ Term::Const(_), Term::Var(x)) => {
                self.merge(x, c)
            }
            (Term::Var(x), Term::Var(y)) => {
                if x < y {
                    self.merge(y, Term::Var(x))
                } else {
                    self.merge(x, Term::Var(y))
                }
            }
        }
    }

    pub fn add_neq(&mut self, a: &Term, b: &Term) {
        if self.unsat {
            return;
        }
        let ra = self.rep(a);
        let rb = self.rep(b);
        self.add_neq_reps(ra, rb);
    }

    fn add_neq_reps(&mut self, ra: Term, rb: Term) {
        match (ra, rb) {
            (Term::Const(x), Term::Const(y)) => {
                if x == y {
                    self.set_false();
                }
            }
            (Term::Var(x), c @ Term::Const(_)) | (c @ Term::Const(_), Term::Var(x)) => {
                self.neqs.insert((x, c));
            }
            (Term::Var(x), Term::Var(y)) => {
                if x == y {
                    self.set_false();
                } else if x < y {
                    self.neqs.insert((x, Term::Var(y)));
                } else {
                    self.neqs.insert((y, Term::Var(x)));
                }
            }
        }
    }

    fn set_false(&mut self) {
        *self = Constraint::falsum();
    }

    // `old` is a representative; its class joins `new`'s class.
    fn merge(&mut self, old: Var, new: Term) {
        let old_t = Term::Var(old.clone());
        for v in self.bind.values_mut() {
            if *v == old_t {
                *v = new.clone();
            }
        }
        self.bind.insert(old.clone(), new.clone());
        let touched: Vec<(Var, Term)> = self
            .neqs
            .iter()
            .filter(|(x, t)| *x == old || *t == old_t)
            .cloned()
            .collect();
        for n in &touched {
            self.neqs.remove(n);
        }
        for (x, t) in touched {
            let rx = if x == old { new.clone() } else { Term::Var(x) };
            let rt = if t == old_t { new.clone() } else { t };
            self.add_neq_reps(rx, rt);
            if self.unsat {
                return;
            }
        }
    }

    pub fn and(&self, other: &Constraint) -> Constraint {
        if self.unsat || other.unsat {
            return Constraint::falsum();
        }
        let mut c = self.clone();
        for a in other.atoms() {
            c.add(&a);
            if c.unsat {
                break;
            }
        }
        c
    }

    /// The solved form as a list of atoms (`false` yields `[a != a]`-free empty
    /// list; check [`Constraint::is_false`] first).
    pub fn atoms(&self) -> Vec<CAtom> {
        let mut out: Vec<CAtom> = self
            .bind
            .iter()
            .map(|(v, t)| CAtom::Eq(Term::Var(v.clone()), t.clone()))
            .collect();
        out.extend(
            self.neqs
                .iter()
                .map(|(v, t)| CAtom::Neq(Term::Var(v.clone()), t.clone())),
        );
        out
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for (v, t) in &self.bind {
            out.insert(v.clone());
            if let Term::Var(w) = t {
                out.insert(w.clone());
            }
        }
        for (v, t) in &self.neqs {
            out.insert(v.clone());
            if let Term::Var(w) = t {
                out.insert(w.clone());
            }
        }
        out
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.vars().contains(v)
    }

    /// Renames variables. The map need not be injective.
    pub fn rename(&self, f: &impl Fn(&Var) -> Term) -> Constraint {
        if self.unsat {
            return Constraint::falsum();
        }
        let sub = |t: &Term| match t {
            Term::Var(v) => f(v),
            c => c.clone(),
        };
        let mut c = Constraint::top();
        for a in self.atoms() {
            match a {
                CAtom::Eq(x, y) => c.add_eq(&sub(&x), &sub(&y)),
                CAtom::Neq(x, y) => c.add_neq(&sub(&x), &sub(&y)),
            }
        }
        c
    }

    fn neq_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for (v, t) in &self.neqs {
            out.insert(v.clone());
            if let Term::Var(w) = t {
                out.insert(w.clone());
            }
        }
        out
    }

    fn excluded_consts(&self, v: &Var) -> BTreeSet<Const> {
        self.neqs
            .iter()
            .filter(|(x, _)| x == v)
            .filter_map(|(_, t)| t.as_const().cloned())
            .collect()
    }

    /// H-solvability over `universe`.
    pub fn solvable(&self, universe: &Universe) -> bool {
        if self.unsat {
            return false;
        }
        if self.neqs.is_empty() {
            return !universe.is_empty() || self.bind.is_empty();
        }
        let vars: Vec<Var> = self.neq_vars().into_iter().collect();
        let mut found = false;
        self.search(&vars, universe, &mut |_| {
            found = true;
            false
        });
        found
    }

    /// Enumerates assignments of `vars` (representatives) satisfying the
    /// disequalities among them. `f` returns `false` to stop.
    fn search(
        &self,
        vars: &[Var],
        universe: &Universe,
        f: &mut dyn FnMut(&BTreeMap<Var, Const>) -> bool,
    ) {
        let domains: Vec<Vec<Const>> = vars
            .iter()
            .map(|v| {
                let ex = self.excluded_consts(v);
                universe
                    .consts()
                    .iter()
                    .filter(|c| !ex.contains(*c))
                    .cloned()
                    .collect()
            })
            .collect();
        if domains.iter().any(Vec::is_empty) {
            return;
        }
        let var_neqs: Vec<(Var, Var)> = self
            .neqs
            .iter()
            .filter_map(|(x, t)| t.as_var().map(|y| (x.clone(), y.clone())))
            .collect();
        let mut assign = BTreeMap::new();
        search_rec(vars, &domains, &var_neqs, 0, &mut assign, f);
    }

    /// Every assignment to `vars` (in the universe) under which the constraint
    /// is satisfiable. Variables are resolved to representatives first; a
    /// variable bound to a constant gets that constant.
    pub fn for_each_assignment(
        &self,
        vars: &[Var],
        universe: &Universe,
        f: &mut dyn FnMut(&BTreeMap<Var, Const>) -> bool,
    ) {
        if self.unsat {
            return;
        }
        let mut reps: Vec<Var> = Vec::new();
        for v in vars {
            if let Term::Var(r) = self.rep(&Term::Var(v.clone())) {
                if !reps.contains(&r) {
                    reps.push(r);
                }
            }
        }
        let others: BTreeSet<Var> = self
            .neq_vars()
            .into_iter()
            .filter(|v| !reps.contains(v))
            .collect();
        let needs_check = !others.is_empty();
        let project_out = |rep_assign: &BTreeMap<Var, Const>| -> BTreeMap<Var, Const> {
            vars.iter()
                .map(|v| {
                    let c = match self.rep(&Term::Var(v.clone())) {
                        Term::Const(c) => c,
                        Term::Var(r) => rep_assign[&r].clone(),
                    };
                    (v.clone(), c)
                })
                .collect()
        };
        if needs_check {
            self.search(&reps, universe, &mut |ra| {
                let mut c = self.clone();
                for (v, k) in ra {
                    c.add_eq(&Term::Var(v.clone()), &Term::Const(k.clone()));
                }
                if c.solvable(universe) {
                    f(&project_out(ra))
                } else {
                    true
                }
            });
        } else {
            self.search(&reps, universe, &mut |ra| f(&project_out(ra)));
        }
    }

    /// Evaluates the constraint under a total assignment of its variables.
    /// Unassigned variables are treated existentially.
    pub fn holds_under(&self, assign: &BTreeMap<Var, Const>, universe: &Universe) -> bool {
        if self.unsat {
            return false;
        }
        let mut c = self.clone();
        let mut all = true;
        for v in self.vars() {
            match assign.get(&v) {
                Some(k) => {
                    c.add_eq(&Term::Var(v), &Term::Const(k.clone()));
                    if c.unsat {
                        return false;
                    }
                }
                None => all = false,
            }
        }
        all || c.solvable(universe)
    }

    /// `false` when unsolvable over the universe, the constraint otherwise.
    pub fn normalize(&self, universe: &Universe) -> Constraint {
        if self.solvable(universe) {
            self.clone()
        } else {
            Constraint::falsum()
        }
    }

    /// Every universe assignment satisfying `self` satisfies `other`.
    pub fn entails(&self, other: &Constraint, universe: &Universe) -> bool {
        if !self.solvable(universe) {
            return true;
        }
        if other.unsat {
            return false;
        }
        other
            .atoms()
            .iter()
            .all(|a| !self.with(&a.negate()).solvable(universe))
    }

    pub fn equivalent(&self, other: &Constraint, universe: &Universe) -> bool {
        self.entails(other, universe) && other.entails(self, universe)
    }

    /// Existential projection onto `keep`. The result mentions only `keep`
    /// variables.
    pub fn project(&self, keep: &BTreeSet<Var>, universe: &Universe) -> Disjunction {
        if !self.solvable(universe) {
            return Vec::new();
        }
        // Re-root every class that contains a kept variable on its least kept
        // member; classes without kept members lose their bindings.
        let mut classes: BTreeMap<Term, Vec<Var>> = BTreeMap::new();
        for (v, r) in &self.bind {
            classes.entry(r.clone()).or_default().push(v.clone());
        }
        let mut rename: BTreeMap<Var, Term> = BTreeMap::new();
        let mut atoms: Vec<CAtom> = Vec::new();
        let mut seen_reps: BTreeSet<Var> = BTreeSet::new();
        for (rep, members) in &classes {
            match rep {
                Term::Const(_) => {
                    for m in members.iter().filter(|m| keep.contains(*m)) {
                        atoms.push(CAtom::Eq(Term::Var(m.clone()), rep.clone()));
                    }
                }
                Term::Var(r) => {
                    seen_reps.insert(r.clone());
                    let mut all: Vec<Var> = members.clone();
                    all.push(r.clone());
                    let kept: Vec<&Var> = all.iter().filter(|m| keep.contains(*m)).collect();
                    if let Some(k0) = kept.iter().min() {
                        let k0 = (*k0).clone();
                        rename.insert(r.clone(), Term::Var(k0.clone()));
                        for k in kept {
                            if *k != k0 {
                                atoms.push(CAtom::Eq(Term::Var(k.clone()), Term::Var(k0.clone())));
                            }
                        }
                    }
                }
            }
        }
        let ren = |t: &Term| match t {
            Term::Var(v) => rename.get(v).cloned().unwrap_or_else(|| t.clone()),
            c => c.clone(),
        };
        for (v, t) in &self.neqs {
            atoms.push(CAtom::Neq(ren(&Term::Var(v.clone())), ren(t)));
        }
        let base = Constraint::from_atoms(atoms.iter());
        let mut pending = vec![base];
        let mut done: Disjunction = Vec::new();
        while let Some(c) = pending.pop() {
            if !c.solvable(universe) {
                continue;
            }
            let elim = c.vars().into_iter().find(|v| !keep.contains(v));
            let Some(y) = elim else {
                done.push(c);
                continue;
            };
            // `y` only occurs in disequalities here.
            let excluded = c.excluded_consts(&y);
            let partners = c
                .neqs
                .iter()
                .filter(|(x, t)| x == &y || t.as_var() == Some(&y))
                .filter(|(_, t)| t.as_var().is_some())
                .count();
            let avail: Vec<&Const> = universe
                .consts()
                .iter()
                .filter(|k| !excluded.contains(*k))
                .collect();
            if avail.len() > partners {
                let mut d = c.clone();
                d.neqs.retain(|(x, t)| x != &y && t.as_var() != Some(&y));
                pending.push(d);
            } else {
                for k in avail {
                    let mut d = c.clone();
                    d.add_eq(&Term::Var(y.clone()), &Term::Const(k.clone()));
                    if d.unsat {
                        continue;
                    }
                    d.bind.remove(&y);
                    pending.push(d);
                }
            }
        }
        simplify_disjunction(done, universe)
    }

    /// Negation as a minimal disjunction of solvable constraints.
    pub fn neg(&self, universe: &Universe) -> Disjunction {
        if !self.solvable(universe) {
            return vec![Constraint::top()];
        }
        let mut out: Disjunction = self
            .atoms()
            .iter()
            .map(|a| Constraint::from_atoms([a.negate()].iter()))
            .filter(|c| c.solvable(universe))
            .collect();
        out.sort();
        out.dedup();
        // Greedy removal of disjuncts entailed by the rest.
        let mut i = 0;
        while i < out.len() {
            let rest: Vec<Constraint> = out
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, c)| c.clone())
                .collect();
            if entails_disjunction(&out[i], &rest, universe) {
                out.remove(i);
            } else {
                i += 1;
            }
        }
        out
    }
}

fn search_rec(
    vars: &[Var],
    domains: &[Vec<Const>],
    var_neqs: &[(Var, Var)],
    i: usize,
    assign: &mut BTreeMap<Var, Const>,
    f: &mut dyn FnMut(&BTreeMap<Var, Const>) -> bool,
) -> bool {
    if i == vars.len() {
        return f(assign);
    }
    let v = &vars[i];
    for k in &domains[i] {
        let clash = var_neqs.iter().any(|(x, y)| {
            (x == v && assign.get(y) == Some(k)) || (y == v && assign.get(x) == Some(k))
        });
        if clash {
            continue;
        }
        assign.insert(v.clone(), k.clone());
        let go_on = search_rec(vars, domains, var_neqs, i + 1, assign, f);
        assign.remove(v);
        if !go_on {
            return false;
        }
    }
    true
}

/// `c` entails the disjunction `ds`.
pub fn entails_disjunction(c: &Constraint, ds: &[Constraint], universe: &Universe) -> bool {
    fn escapes(cur: &Constraint, ds: &[Constraint], universe: &Universe) -> bool {
        if !cur.solvable(universe) {
            return false;
        }
        let Some((d, rest)) = ds.split_first() else {
            return true;
        };
        if d.unsat {
            return escapes(cur, rest, universe);
        }
        d.atoms()
            .iter()
            .any(|a| escapes(&cur.with(&a.negate()), rest, universe))
    }
    !escapes(c, ds, universe)
}

/// Drops unsolvable disjuncts, duplicates, and disjuncts that entail another.
pub fn simplify_disjunction(mut ds: Disjunction, universe: &Universe) -> Disjunction {
    ds.retain(|d| d.solvable(universe));
    ds.sort();
    ds.dedup();
    let mut kept: Disjunction = Vec::new();
    for d in ds {
        if kept.iter().any(|k| d.entails(k, universe)) {
            continue;
        }
        kept.retain(|k| !k.entails(&d, universe));
        kept.push(d);
    }
    kept.sort();
    kept
}

/// Conjunction of two disjunctions, distributed back into a disjunction.
pub fn and_disjunctions(a: &[Constraint], b: &[Constraint], universe: &Universe) -> Disjunction {
    let mut out = Vec::new();
    for x in a {
        for y in b {
            let c = x.and(y);
            if c.solvable(universe) {
                out.push(c);
            }
        }
    }
    simplify_disjunction(out, universe)
}

/// Negation of a disjunction, as a disjunction.
pub fn neg_disjunction(ds: &[Constraint], universe: &Universe) -> Disjunction {
    let mut acc = vec![Constraint::top()];
    for d in ds {
        acc = and_disjunctions(&acc, &d.neg(universe), universe);
        if acc.is_empty() {
            break;
        }
    }
    acc
}

/// Per insert/delete pair of the same predicate, the argument positions on
/// which they could still differ. `None` when some pair clashes
/// unconditionally.
fn clash_clauses(updates: &[UpdateAtom]) -> Option<Vec<Vec<CAtom>>> {
    let mut clauses = Vec::new();
    for ins in updates.iter().filter(|u| u.sign == Sign::Insert) {
        for del in updates.iter().filter(|u| u.sign == Sign::Delete) {
            if ins.atom.pred != del.atom.pred || ins.atom.arity() != del.atom.arity() {
                continue;
            }
            let mut clause = Vec::new();
            let mut always_distinct = false;
            for (t, s) in ins.atom.args.iter().zip(&del.atom.args) {
                match (t, s) {
                    (Term::Const(a), Term::Const(b)) => {
                        if a != b {
                            always_distinct = true;
                        }
                    }
                    _ if t == s => {}
                    _ => clause.push(CAtom::Neq(t.clone(), s.clone())),
                }
            }
            if always_distinct {
                continue;
            }
            if clause.is_empty() {
                return None;
            }
            clause.sort();
            clause.dedup();
            clauses.push(clause);
        }
    }
    Some(clauses)
}

/// Minimal constraints under which `updates` demand no fact to be both
/// inserted and deleted. Empty result means the set is inconsistent.
pub fn sol(updates: &[UpdateAtom], universe: &Universe) -> Disjunction {
    let Some(clauses) = clash_clauses(updates) else {
        return Vec::new();
    };
    let mut acc = vec![Constraint::top()];
    for clause in clauses {
        let mut next = Vec::new();
        for d in &acc {
            for a in &clause {
                let c = d.with(a);
                if c.solvable(universe) {
                    next.push(c);
                }
            }
        }
        acc = simplify_disjunction(next, universe);
        if acc.is_empty() {
            break;
        }
    }
    acc
}

/// H-solvability of a constraint together with update atoms.
pub fn consistent(c: &Constraint, updates: &[UpdateAtom], universe: &Universe) -> bool {
    if !c.solvable(universe) {
        return false;
    }
    let applied = c.apply_updates(updates);
    let Some(clauses) = clash_clauses(&applied) else {
        return false;
    };
    fn dfs(cur: &Constraint, clauses: &[Vec<CAtom>], universe: &Universe) -> bool {
        let Some((first, rest)) = clauses.split_first() else {
            return true;
        };
        first.iter().any(|a| {
            let next = cur.with(a);
            next.solvable(universe) && dfs(&next, rest, universe)
        })
    }
    dfs(c, &clauses, universe)
}

impl fmt::Display for CAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CAtom::Eq(a, b) => write!(f, "{a}={b}"),
            CAtom::Neq(a, b) => write!(f, "{a}!={b}"),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.unsat {
            return f.write_str("false");
        }
        let atoms = self.atoms();
        if atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
