//! First-order formulas over constraints and literals, and their prenex
//! disjunctive normal form. Used for the tails of extended rules.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::constraint::{CAtom, Constraint, Universe};
use crate::term::{Atom, Const, Fresh, GroundAtom, Literal, Term, Var};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Quantifier {
    Forall,
    Exists,
}

impl Quantifier {
    fn flip(self) -> Self {
        match self {
            Quantifier::Forall => Quantifier::Exists,
            Quantifier::Exists => Quantifier::Forall,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
        }
    }
}

/// Arbitrary formula tree, input to [`to_prenex_dnf`].
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Formula {
    True,
    False,
    Cons(CAtom),
    Lit(Literal),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Quant(Quantifier, Vec<Var>, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn exists(vars: Vec<Var>, f: Formula) -> Formula {
        if vars.is_empty() {
            f
        } else {
            Formula::Quant(Quantifier::Exists, vars, Box::new(f))
        }
    }

    pub fn forall(vars: Vec<Var>, f: Formula) -> Formula {
        if vars.is_empty() {
            f
        } else {
            Formula::Quant(Quantifier::Forall, vars, Box::new(f))
        }
    }

    pub fn from_constraint(c: &Constraint) -> Formula {
        if c.is_false() {
            Formula::False
        } else {
            Formula::And(c.atoms().into_iter().map(Formula::Cons).collect())
        }
    }

    fn nnf(self, negate: bool) -> Formula {
        match (self, negate) {
            (Formula::True, false) | (Formula::False, true) => Formula::True,
            (Formula::True, true) | (Formula::False, false) => Formula::False,
            (Formula::Cons(a), n) => Formula::Cons(if n { a.negate() } else { a }),
            (Formula::Lit(l), n) => Formula::Lit(if n { l.negated() } else { l }),
            (Formula::Not(f), n) => f.nnf(!n),
            (Formula::And(fs), false) | (Formula::Or(fs), true) => {
                Formula::And(fs.into_iter().map(|f| f.nnf(negate)).collect())
            }
            (Formula::Or(fs), false) | (Formula::And(fs), true) => {
                Formula::Or(fs.into_iter().map(|f| f.nnf(negate)).collect())
            }
            (Formula::Quant(q, vs, f), n) => {
                Formula::Quant(if n { q.flip() } else { q }, vs, Box::new(f.nnf(n)))
            }
        }
    }

    fn collect_free(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        let term = |t: &Term, bound: &Vec<Var>, out: &mut BTreeSet<Var>| {
            if let Term::Var(v) = t {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Cons(a) => {
                let (x, y) = a.terms();
                term(x, bound, out);
                term(y, bound, out);
            }
            Formula::Lit(l) => {
                for t in &l.atom.args {
                    term(t, bound, out);
                }
            }
            Formula::And(fs) | Formula::Or(fs) => {
                for f in fs {
                    f.collect_free(bound, out);
                }
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::Quant(_, vs, f) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                f.collect_free(bound, out);
                bound.truncate(n);
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }
}

/// One disjunct of a prenex DNF matrix: a constraint and a conjunction of
/// literals.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Disjunct {
    pub constraint: Constraint,
    pub literals: Vec<Literal>,
}

impl Disjunct {
    pub fn top() -> Self {
        Disjunct {
            constraint: Constraint::top(),
            literals: Vec::new(),
        }
    }

    fn is_top(&self) -> bool {
        self.constraint.is_true() && self.literals.is_empty()
    }

    fn and(&self, other: &Disjunct) -> Disjunct {
        let mut literals = self.literals.clone();
        literals.extend(other.literals.iter().cloned());
        Disjunct {
            constraint: self.constraint.and(&other.constraint),
            literals,
        }
    }

    fn vars(&self) -> BTreeSet<Var> {
        let mut out = self.constraint.vars();
        for l in &self.literals {
            out.extend(l.atom.vars().cloned());
        }
        out
    }

    /// Normalizes; `None` when the disjunct is unsatisfiable.
    fn normalized(&self, universe: &Universe) -> Option<Disjunct> {
        if !self.constraint.solvable(universe) {
            return None;
        }
        let mut literals: Vec<Literal> = self
            .literals
            .iter()
            .map(|l| Literal {
                positive: l.positive,
                atom: self.constraint.apply_atom(&l.atom),
            })
            .collect();
        literals.sort();
        literals.dedup();
        let lits: BTreeSet<&Literal> = literals.iter().collect();
        if literals.iter().any(|l| lits.contains(&l.negated())) {
            return None;
        }
        Some(Disjunct {
            constraint: self.constraint.clone(),
            literals,
        })
    }

    // `self` implies `other` whatever the literals' truth values.
    fn subsumed_by(&self, other: &Disjunct, universe: &Universe) -> bool {
        if other.literals.len() > self.literals.len() {
            return false;
        }
        let mine: BTreeSet<&Literal> = self.literals.iter().collect();
        other.literals.iter().all(|l| {
            let under = Literal {
                positive: l.positive,
                atom: self.constraint.apply_atom(&l.atom),
            };
            mine.contains(&under)
        }) && self.constraint.entails(&other.constraint, universe)
    }
}

fn simplify_matrix(ds: Vec<Disjunct>, universe: &Universe) -> Vec<Disjunct> {
    let mut ds: Vec<Disjunct> = ds.iter().filter_map(|d| d.normalized(universe)).collect();
    if let Some(t) = ds.iter().find(|d| d.is_top()) {
        return vec![t.clone()];
    }
    ds.sort();
    ds.dedup();
    let mut kept: Vec<Disjunct> = Vec::new();
    for d in ds {
        if kept.iter().any(|k| d.subsumed_by(k, universe)) {
            continue;
        }
        kept.retain(|k| !k.subsumed_by(&d, universe));
        kept.push(d);
    }
    kept.sort();
    kept
}

fn and_matrices(a: &[Disjunct], b: &[Disjunct], universe: &Universe) -> Vec<Disjunct> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            if let Some(d) = x.and(y).normalized(universe) {
                out.push(d);
            }
        }
    }
    simplify_matrix(out, universe)
}

/// `Q̃ (c₁,L̃₁ ∨ … ∨ cₙ,L̃ₙ)`. An empty matrix is `false`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuantifiedFormula {
    pub prefix: Vec<(Quantifier, Var)>,
    pub matrix: Vec<Disjunct>,
}

impl QuantifiedFormula {
    pub fn truth() -> Self {
        QuantifiedFormula {
            prefix: Vec::new(),
            matrix: vec![Disjunct::top()],
        }
    }

    pub fn falsity() -> Self {
        QuantifiedFormula {
            prefix: Vec::new(),
            matrix: Vec::new(),
        }
    }

    pub fn is_true(&self) -> bool {
        self.matrix.len() == 1 && self.matrix[0].is_top()
    }

    pub fn is_false(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn bound_vars(&self) -> BTreeSet<Var> {
        self.prefix.iter().map(|(_, v)| v.clone()).collect()
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let bound = self.bound_vars();
        self.matrix
            .iter()
            .flat_map(Disjunct::vars)
            .filter(|v| !bound.contains(v))
            .collect()
    }

    pub fn predicates(&self) -> BTreeSet<(&str, bool)> {
        self.matrix
            .iter()
            .flat_map(|d| d.literals.iter())
            .map(|l| (&*l.atom.pred, l.positive))
            .collect()
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        self.matrix.iter().flat_map(|d| d.literals.iter())
    }

    /// Renames variables (free and bound alike).
    pub fn rename(&self, f: &impl Fn(&Var) -> Var) -> QuantifiedFormula {
        let term = |t: &Term| match t {
            Term::Var(v) => Term::Var(f(v)),
            c => c.clone(),
        };
        QuantifiedFormula {
            prefix: self.prefix.iter().map(|(q, v)| (*q, f(v))).collect(),
            matrix: self
                .matrix
                .iter()
                .map(|d| Disjunct {
                    constraint: d.constraint.rename(&|v| Term::Var(f(v))),
                    literals: d
                        .literals
                        .iter()
                        .map(|l| Literal {
                            positive: l.positive,
                            atom: l.atom.map_terms(&mut |t| term(t)),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Back to a formula tree.
    pub fn to_formula(&self) -> Formula {
        let matrix = Formula::Or(
            self.matrix
                .iter()
                .map(|d| {
                    let mut parts = vec![Formula::from_constraint(&d.constraint)];
                    parts.extend(d.literals.iter().cloned().map(Formula::Lit));
                    Formula::And(parts)
                })
                .collect(),
        );
        self.prefix
            .iter()
            .rev()
            .fold(matrix, |f, (q, v)| Formula::Quant(*q, vec![v.clone()], Box::new(f)))
    }

    /// Conjunction; the bound variables of the operands must be disjoint from
    /// each other and from the other operand's free variables.
    pub fn and(&self, other: &QuantifiedFormula, universe: &Universe) -> QuantifiedFormula {
        let mut prefix = self.prefix.clone();
        prefix.extend(other.prefix.iter().cloned());
        let mut q = QuantifiedFormula {
            prefix,
            matrix: and_matrices(&self.matrix, &other.matrix, universe),
        };
        q.drop_vacuous();
        q
    }

    fn drop_vacuous(&mut self) {
        let used: BTreeSet<Var> = self.matrix.iter().flat_map(Disjunct::vars).collect();
        self.prefix.retain(|(_, v)| used.contains(v));
    }

    /// Truth under a ground assignment of the free variables. Literals are
    /// decided by `lit`, which receives the polarity and the ground atom.
    pub fn eval(
        &self,
        assign: &BTreeMap<Var, Const>,
        universe: &Universe,
        lit: &mut dyn FnMut(bool, &GroundAtom) -> bool,
    ) -> bool {
        let mut assign = assign.clone();
        self.eval_from(0, &mut assign, universe, lit)
    }

    fn eval_from(
        &self,
        i: usize,
        assign: &mut BTreeMap<Var, Const>,
        universe: &Universe,
        lit: &mut dyn FnMut(bool, &GroundAtom) -> bool,
    ) -> bool {
        if i == self.prefix.len() {
            return self.matrix.iter().any(|d| {
                d.constraint.holds_under(assign, universe)
                    && d.literals.iter().all(|l| {
                        let g = ground(&l.atom, assign);
                        match g {
                            Some(g) => lit(l.positive, &g),
                            None => false,
                        }
                    })
            });
        }
        let (q, v) = &self.prefix[i];
        let old = assign.get(v).cloned();
        let mut result = *q == Quantifier::Forall;
        for k in universe.consts() {
            assign.insert(v.clone(), k.clone());
            let r = self.eval_from(i + 1, assign, universe, lit);
            if *q == Quantifier::Forall && !r {
                result = false;
                break;
            }
            if *q == Quantifier::Exists && r {
                result = true;
                break;
            }
        }
        match old {
            Some(o) => {
                assign.insert(v.clone(), o);
            }
            None => {
                assign.remove(v);
            }
        }
        result
    }

    /// Truth of the constraint skeleton `Q̃(c₁ ∨ … ∨ cₙ)`: literals read as true.
    pub fn eval_constraints(&self, assign: &BTreeMap<Var, Const>, universe: &Universe) -> bool {
        self.eval(assign, universe, &mut |_, _| true)
    }
}

fn ground(a: &Atom, assign: &BTreeMap<Var, Const>) -> Option<GroundAtom> {
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Const(c) => Some(c.clone()),
            Term::Var(v) => assign.get(v).cloned(),
        })
        .collect::<Option<Vec<_>>>()?;
    Some(GroundAtom {
        pred: a.pred.clone(),
        args,
    })
}

// Bound variables get fresh names when they clash with a free variable or
// with another binder.
fn rename_binders(f: Formula, taken: &mut BTreeSet<Var>, fresh: &mut Fresh, scope: &BTreeMap<Var, Var>) -> Formula {
    let sub = |t: Term, scope: &BTreeMap<Var, Var>| match t {
        Term::Var(v) => Term::Var(scope.get(&v).cloned().unwrap_or(v)),
        c => c,
    };
    match f {
        Formula::True | Formula::False => f,
        Formula::Cons(CAtom::Eq(a, b)) => Formula::Cons(CAtom::Eq(sub(a, scope), sub(b, scope))),
        Formula::Cons(CAtom::Neq(a, b)) => Formula::Cons(CAtom::Neq(sub(a, scope), sub(b, scope))),
        Formula::Lit(l) => Formula::Lit(Literal {
            positive: l.positive,
            atom: Atom {
                pred: l.atom.pred,
                args: l.atom.args.into_iter().map(|t| sub(t, scope)).collect(),
            },
        }),
        Formula::And(fs) => Formula::And(fs.into_iter().map(|g| rename_binders(g, taken, fresh, scope)).collect()),
        Formula::Or(fs) => Formula::Or(fs.into_iter().map(|g| rename_binders(g, taken, fresh, scope)).collect()),
        Formula::Not(g) => Formula::not(rename_binders(*g, taken, fresh, scope)),
        Formula::Quant(q, vs, g) => {
            let mut inner = scope.clone();
            let mut new_vs = Vec::new();
            for v in vs {
                let nv = if taken.contains(&v) {
                    let mut n = fresh.var();
                    while taken.contains(&n) {
                        n = fresh.var();
                    }
                    n
                } else {
                    v.clone()
                };
                taken.insert(nv.clone());
                inner.insert(v, nv.clone());
                new_vs.push(nv);
            }
            Formula::Quant(q, new_vs, Box::new(rename_binders(*g, taken, fresh, &inner)))
        }
    }
}

fn strip_prefix(f: Formula, prefix: &mut Vec<(Quantifier, Var)>) -> Formula {
    match f {
        Formula::Quant(q, vs, g) => {
            prefix.extend(vs.into_iter().map(|v| (q, v)));
            strip_prefix(*g, prefix)
        }
        Formula::And(fs) => Formula::And(fs.into_iter().map(|g| strip_prefix(g, prefix)).collect()),
        Formula::Or(fs) => Formula::Or(fs.into_iter().map(|g| strip_prefix(g, prefix)).collect()),
        other => other,
    }
}

fn matrix_dnf(f: &Formula, universe: &Universe) -> Vec<Disjunct> {
    match f {
        Formula::True => vec![Disjunct::top()],
        Formula::False => Vec::new(),
        Formula::Cons(a) => simplify_matrix(
            vec![Disjunct {
                constraint: Constraint::from_atoms([a.clone()].iter()),
                literals: Vec::new(),
            }],
            universe,
        ),
        Formula::Lit(l) => vec![Disjunct {
            constraint: Constraint::top(),
            literals: vec![l.clone()],
        }],
        Formula::And(fs) => {
            let mut acc = vec![Disjunct::top()];
            for g in fs {
                let m = matrix_dnf(g, universe);
                acc = and_matrices(&acc, &m, universe);
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
        Formula::Or(fs) => {
            let all = fs.iter().flat_map(|g| matrix_dnf(g, universe)).collect();
            simplify_matrix(all, universe)
        }
        Formula::Not(_) | Formula::Quant(..) => unreachable!("matrix is quantifier-free NNF"),
    }
}

/// Converts to prenex disjunctive normal form. Quantifiers keep their
/// left-to-right order of occurrence; bound variables are renamed only on
/// clashes. The matrix is simplified: unsatisfiable and subsumed disjuncts
/// are dropped, and so are quantifiers over unused variables.
pub fn to_prenex_dnf(f: Formula, fresh: &mut Fresh, universe: &Universe) -> QuantifiedFormula {
    let mut taken = f.free_vars();
    let renamed = rename_binders(f, &mut taken, fresh, &BTreeMap::new());
    let nnf = renamed.nnf(false);
    let mut prefix = Vec::new();
    let matrix = strip_prefix(nnf, &mut prefix);
    let mut q = QuantifiedFormula {
        prefix,
        matrix: matrix_dnf(&matrix, universe),
    };
    q.drop_vacuous();
    if q.is_true() || q.is_false() {
        q.prefix.clear();
    }
    q
}

impl fmt::Display for Disjunct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if !self.constraint.is_true() {
            parts.push(self.constraint.to_string());
        }
        parts.extend(self.literals.iter().map(|l| l.to_string()));
        if parts.is_empty() {
            f.write_str("true")
        } else {
            f.write_str(&parts.join(", "))
        }
    }
}

impl fmt::Display for QuantifiedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_false() {
            return f.write_str("false");
        }
        if self.is_true() {
            return f.write_str("true");
        }
        for (q, v) in &self.prefix {
            write!(f, "{} {} ", q.keyword(), v)?;
        }
        f.write_str("(")?;
        for (i, d) in self.matrix.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for QuantifiedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
