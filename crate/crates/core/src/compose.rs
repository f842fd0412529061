//! Unfolding into a recursion-free program: positive unfolding to a
//! T-stable rule set over a finite universe, then negative unfolding stratum
//! by stratum into quantified tails.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::analysis::stratify;
use crate::constraint::{consistent, sol, Constraint, Universe};
use crate::formula::{to_prenex_dnf, Formula, QuantifiedFormula, Quantifier};
use crate::program::{Database, PredKind, Rule};
use crate::term::{dedup_updates, ground_updates_consistent, sym, Atom, Const, Fresh, GroundAtom, GroundUpdate, Literal, Sym, Term, UpdateAtom, Var};
use crate::{Error, Result};

/// Default bound on unfolding rounds.
pub const DEFAULT_UNFOLD_CAP: usize = 64;

/// `p(X̃) :- p(X̃)` for every extensional predicate.
pub fn id_edb(db: &Database) -> Vec<Rule> {
    db.preds
        .iter()
        .filter(|(_, i)| i.kind == PredKind::Extensional)
        .map(|(p, i)| identity_rule(p, i.arity))
        .collect()
}

fn identity_rule(pred: &Sym, arity: usize) -> Rule {
    let args: Vec<Term> = (1..=arity).map(|k| Term::var(&format!("X{k}"))).collect();
    let atom = Atom {
        pred: pred.clone(),
        args,
    };
    Rule {
        head: atom.clone(),
        constraint: Constraint::top(),
        updates: Vec::new(),
        body: vec![Literal::pos(atom)],
        tail: None,
    }
}

// A tail conjunct remembers which source tail it copies and the current
// names of that tail's free variables, so instances can be compared.
#[derive(Clone)]
struct TailPart {
    id: usize,
    args: Vec<Var>,
    formula: QuantifiedFormula,
}

#[derive(Clone)]
struct Draft {
    head: Atom,
    constraint: Constraint,
    updates: Vec<UpdateAtom>,
    body: Vec<Literal>,
    tails: Vec<TailPart>,
}

impl Draft {
    fn from_rule(r: &Rule, id: usize) -> Draft {
        Draft {
            head: r.head.clone(),
            constraint: r.constraint.clone(),
            updates: r.updates.clone(),
            body: r.body.clone(),
            tails: r
                .tail
                .iter()
                .map(|t| TailPart {
                    id,
                    args: t.free_vars().into_iter().collect(),
                    formula: t.clone(),
                })
                .collect(),
        }
    }

    fn into_rule(self, universe: &Universe) -> Rule {
        let mut tail: Option<QuantifiedFormula> = None;
        for p in self.tails {
            tail = Some(match tail {
                None => p.formula,
                Some(t) => t.and(&p.formula, universe),
            });
        }
        Rule {
            head: self.head,
            constraint: self.constraint,
            updates: self.updates,
            body: self.body,
            tail: tail.filter(|t| !t.is_true()),
        }
    }

    /// Free variables, tail arguments included.
    fn vars(&self) -> BTreeSet<Var> {
        let mut out: BTreeSet<Var> = self.head.vars().cloned().collect();
        out.extend(self.constraint.vars());
        for u in &self.updates {
            out.extend(u.atom.vars().cloned());
        }
        for l in &self.body {
            out.extend(l.atom.vars().cloned());
        }
        for t in &self.tails {
            out.extend(t.args.iter().cloned());
        }
        out
    }

    fn map_vars(&self, f: &impl Fn(&Var) -> Term) -> Draft {
        let term = |t: &Term| match t {
            Term::Var(v) => f(v),
            c => c.clone(),
        };
        let as_var = |v: &Var| match f(v) {
            Term::Var(w) => w,
            Term::Const(_) => v.clone(),
        };
        Draft {
            head: self.head.map_terms(&mut |t| term(t)),
            constraint: self.constraint.rename(f),
            updates: self.updates.iter().map(|u| u.map_terms(&mut |t| term(t))).collect(),
            body: self
                .body
                .iter()
                .map(|l| Literal {
                    positive: l.positive,
                    atom: l.atom.map_terms(&mut |t| term(t)),
                })
                .collect(),
            tails: self
                .tails
                .iter()
                .map(|t| TailPart {
                    id: t.id,
                    args: t.args.iter().map(as_var).collect(),
                    formula: t.formula.rename(&as_var),
                })
                .collect(),
        }
    }

    fn rename_apart(&self, fresh: &mut Fresh) -> Draft {
        let mut names = self.vars();
        for t in &self.tails {
            names.extend(t.formula.bound_vars());
        }
        let map: BTreeMap<Var, Var> = names.into_iter().map(|v| (v, fresh.var())).collect();
        self.map_vars(&|v| Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())))
    }

    /// Substitutes variables by their class representative. Head variables
    /// and tail arguments stay variables; the representative of a class is
    /// its first head variable if any.
    fn tidy(&self) -> Draft {
        let c = &self.constraint;
        let head: Vec<Var> = self.head.vars().cloned().collect();
        let pinned: BTreeSet<Var> = head.iter().cloned().chain(self.tails.iter().flat_map(|t| t.args.iter().cloned())).collect();
        let mut canon: BTreeMap<Term, Var> = BTreeMap::new();
        for v in head.iter().chain(pinned.iter()) {
            canon.entry(c.rep(&Term::Var(v.clone()))).or_insert_with(|| v.clone());
        }
        let mut map: BTreeMap<Var, Term> = BTreeMap::new();
        for v in self.vars() {
            let r = c.rep(&Term::Var(v.clone()));
            let image = if head.contains(&v) {
                Term::Var(v.clone())
            } else if let Some(k) = canon.get(&r) {
                if r.is_ground() && !pinned.contains(&v) {
                    r.clone()
                } else if r.is_ground() {
                    Term::Var(v.clone())
                } else {
                    Term::Var(k.clone())
                }
            } else {
                r.clone()
            };
            map.insert(v, image);
        }
        let mut d = self.map_vars(&|v| map.get(v).cloned().unwrap_or_else(|| Term::Var(v.clone())));
        dedup_updates(&mut d.updates);
        let mut seen = BTreeSet::new();
        d.body.retain(|l| seen.insert(l.clone()));
        d.drop_echoes();
        d
    }

    // Some literal occurs with both signs.
    fn contradictory(&self) -> bool {
        let lits: BTreeSet<&Literal> = self.body.iter().collect();
        self.body.iter().any(|l| l.positive && lits.contains(&l.negated()))
    }

    // A positive literal is redundant next to another one that differs
    // only in variables occurring nowhere else.
    fn drop_echoes(&mut self) {
        let mut uses: BTreeMap<Var, usize> = BTreeMap::new();
        let mut count = |v: &Var| *uses.entry(v.clone()).or_default() += 1;
        self.head.vars().for_each(&mut count);
        self.constraint.vars().iter().for_each(&mut count);
        self.updates.iter().flat_map(|u| u.atom.vars()).for_each(&mut count);
        self.body.iter().flat_map(|l| l.atom.vars()).for_each(&mut count);
        self.tails.iter().flat_map(|t| t.args.iter()).for_each(&mut count);
        let private = |t: &Term| matches!(t, Term::Var(v) if uses[v] == 1);
        let mut keep: Vec<Literal> = Vec::new();
        for l in std::mem::take(&mut self.body) {
            let echo = l.positive
                && keep.iter().any(|k| {
                    k.positive
                        && k.atom.pred == l.atom.pred
                        && k.atom.args.iter().zip(&l.atom.args).all(|(a, b)| a == b || (private(a) && private(b)))
                });
            if !echo {
                keep.push(l);
            }
        }
        self.body = keep;
    }
}

// Ground instance: head tuple with its updates, and the ground body.
type InstanceKey = (Sym, Vec<Const>, BTreeSet<GroundUpdate>);
type GroundBody = BTreeSet<(bool, GroundAtom)>;

fn ground_atom(a: &Atom, assign: &BTreeMap<Var, Const>) -> GroundAtom {
    GroundAtom {
        pred: a.pred.clone(),
        args: a
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => c.clone(),
                Term::Var(v) => assign[v].clone(),
            })
            .collect(),
    }
}

fn ground_instances(d: &Draft, universe: &Universe) -> Vec<(InstanceKey, GroundBody)> {
    let vars: Vec<Var> = d.vars().into_iter().collect();
    let mut out = Vec::new();
    d.constraint.for_each_assignment(&vars, universe, &mut |a| {
        let ups: BTreeSet<GroundUpdate> = d
            .updates
            .iter()
            .map(|u| GroundUpdate {
                sign: u.sign,
                atom: ground_atom(&u.atom, a),
            })
            .collect();
        if !ground_updates_consistent(&ups) {
            return true;
        }
        let mut body: GroundBody = d.body.iter().map(|l| (l.positive, ground_atom(&l.atom, a))).collect();
        for t in &d.tails {
            body.insert((
                true,
                GroundAtom {
                    pred: sym(&format!("|tail{}", t.id)),
                    args: t.args.iter().map(|v| a[v].clone()).collect(),
                },
            ));
        }
        let head = ground_atom(&d.head, a);
        out.push(((head.pred, head.args, ups), body));
        true
    });
    out
}

/// Ground instances seen so far; a new instance counts only if no stored
/// instance with the same head and updates has a smaller body.
#[derive(Default)]
struct Subsumption {
    seen: BTreeMap<InstanceKey, Vec<GroundBody>>,
}

impl Subsumption {
    /// Records `d` and reports whether it contributes a new instance.
    fn admit(&mut self, d: &Draft, universe: &Universe) -> bool {
        let inst = ground_instances(d, universe);
        let fresh_instance = inst.iter().any(|(k, b)| {
            !self
                .seen
                .get(k)
                .is_some_and(|bodies| bodies.iter().any(|s| s.is_subset(b)))
        });
        if fresh_instance {
            for (k, b) in inst {
                let bodies = self.seen.entry(k).or_default();
                if !bodies.iter().any(|s| s.is_subset(&b)) {
                    bodies.retain(|s| !b.is_subset(s));
                    bodies.push(b);
                }
            }
        }
        fresh_instance
    }
}

// Syntactic subsumption: a substitution maps `general` onto `specific`
// with the same head, the same update set, a sub-body, matching tails and
// a weaker constraint. Every instance of `specific` then has an instance
// of `general` with a smaller body.
fn subsumes(general: &Draft, specific: &Draft, universe: &Universe) -> bool {
    if general.head.pred != specific.head.pred || general.body.len() > specific.body.len() || general.tails.len() > specific.tails.len() {
        return false;
    }
    let mut theta: BTreeMap<Var, Term> = BTreeMap::new();
    if !match_args(&general.head.args, &specific.head.args, &mut theta) {
        return false;
    }
    let mut goals: Vec<Item> = general.updates.iter().map(Item::Update).collect();
    goals.extend(general.body.iter().map(Item::Lit));
    goals.extend(general.tails.iter().map(Item::Tail));
    match_items(&goals, specific, &mut theta, &mut |theta| finish(general, specific, theta, universe))
}

#[derive(Clone, Copy)]
enum Item<'a> {
    Update(&'a UpdateAtom),
    Lit(&'a Literal),
    Tail(&'a TailPart),
}

fn match_args(general: &[Term], specific: &[Term], theta: &mut BTreeMap<Var, Term>) -> bool {
    general.len() == specific.len()
        && general.iter().zip(specific).all(|(g, s)| match g {
            Term::Const(_) => g == s,
            Term::Var(v) => theta.entry(v.clone()).or_insert_with(|| s.clone()) == s,
        })
}

fn match_items(goals: &[Item], specific: &Draft, theta: &mut BTreeMap<Var, Term>, done: &mut dyn FnMut(&BTreeMap<Var, Term>) -> bool) -> bool {
    let Some((first, rest)) = goals.split_first() else {
        return done(theta);
    };
    let mut attempt = |g: &[Term], s: &[Term], theta: &mut BTreeMap<Var, Term>| {
        let saved = theta.clone();
        if match_args(g, s, theta) && match_items(rest, specific, theta, done) {
            return true;
        }
        *theta = saved;
        false
    };
    match first {
        Item::Update(u) => specific
            .updates
            .iter()
            .filter(|s| s.sign == u.sign && s.atom.pred == u.atom.pred)
            .any(|s| attempt(&u.atom.args, &s.atom.args, theta)),
        Item::Lit(l) => specific
            .body
            .iter()
            .filter(|s| s.positive == l.positive && s.atom.pred == l.atom.pred)
            .any(|s| attempt(&l.atom.args, &s.atom.args, theta)),
        Item::Tail(t) => {
            let g: Vec<Term> = t.args.iter().cloned().map(Term::Var).collect();
            specific.tails.iter().filter(|s| s.id == t.id).any(|s| {
                let s: Vec<Term> = s.args.iter().cloned().map(Term::Var).collect();
                attempt(&g, &s, theta)
            })
        }
    }
}

fn finish(general: &Draft, specific: &Draft, theta: &BTreeMap<Var, Term>, universe: &Universe) -> bool {
    if !general.constraint.vars().iter().all(|v| theta.contains_key(v)) {
        return false;
    }
    let image = |v: &Var| theta[v].clone();
    let ups: BTreeSet<UpdateAtom> = general.updates.iter().map(|u| u.map_terms(&mut |t| match t {
        Term::Var(v) => image(v),
        c => c.clone(),
    })).collect();
    ups == specific.updates.iter().cloned().collect() && specific.constraint.entails(&general.constraint.rename(&image), universe)
}

// Replaces the chosen positive literals of `rule` by renamed copies of the
// given definitions. `choice[i]` is `None` to keep literal `i`; each option
// carries a flag telling whether it is new in this round. With `need_new`,
// only combinations using at least one new option are produced.
fn expand(
    rule: &Draft,
    choice: &[Option<Vec<(&Draft, bool)>>],
    need_new: bool,
    universe: &Universe,
    fresh: &mut Fresh,
) -> Vec<Draft> {
    let start = Draft {
        head: rule.head.clone(),
        constraint: rule.constraint.clone(),
        updates: rule.updates.clone(),
        body: Vec::new(),
        tails: rule.tails.clone(),
    };
    let mut out = Vec::new();
    expand_rec(rule, choice, 0, start, false, need_new, universe, fresh, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn expand_rec(
    rule: &Draft,
    choice: &[Option<Vec<(&Draft, bool)>>],
    i: usize,
    acc: Draft,
    used_new: bool,
    need_new: bool,
    universe: &Universe,
    fresh: &mut Fresh,
    out: &mut Vec<Draft>,
) {
    if i == rule.body.len() {
        if (used_new || !need_new) && consistent(&acc.constraint, &acc.updates, universe) {
            let d = acc.tidy();
            if !d.contradictory() {
                out.push(d);
            }
        }
        return;
    }
    let lit = &rule.body[i];
    let Some(options) = &choice[i] else {
        let mut next = acc;
        next.body.push(lit.clone());
        expand_rec(rule, choice, i + 1, next, used_new, need_new, universe, fresh, out);
        return;
    };
    for (def, is_new) in options {
        let def = def.rename_apart(fresh);
        let mut next = acc.clone();
        for (v, t) in def.head.args.iter().zip(&lit.atom.args) {
            next.constraint.add_eq(v, t);
        }
        next.constraint = next.constraint.and(&def.constraint);
        if !next.constraint.solvable(universe) {
            continue;
        }
        next.updates.extend(def.updates.iter().cloned());
        if !def.updates.is_empty() && !consistent(&next.constraint, &next.updates, universe) {
            continue;
        }
        next.body.extend(def.body.iter().cloned());
        next.tails.extend(def.tails.iter().cloned());
        expand_rec(rule, choice, i + 1, next, used_new || *is_new, need_new, universe, fresh, out);
    }
}

/// One unfolding step: every positive body literal of each `p` rule is
/// replaced by the body of a `q` rule for its predicate. Rules with a
/// positive literal that `q` does not define yield nothing. Negative
/// literals are kept.
pub fn unfold(p: &[Rule], q: &[Rule], universe: &Universe, fresh: &mut Fresh) -> Vec<Rule> {
    let defs: BTreeMap<Sym, Vec<Draft>> = q.iter().enumerate().fold(BTreeMap::new(), |mut m, (k, r)| {
        m.entry(r.head.pred.clone()).or_insert_with(Vec::new).push(Draft::from_rule(r, k));
        m
    });
    let mut out = Vec::new();
    for (k, r) in p.iter().enumerate() {
        let d = Draft::from_rule(r, q.len() + k);
        let choice: Vec<Option<Vec<(&Draft, bool)>>> = r
            .body
            .iter()
            .map(|l| {
                l.positive
                    .then(|| defs.get(&l.atom.pred).map(|ds| ds.iter().map(|x| (x, false)).collect()).unwrap_or_default())
            })
            .collect();
        out.extend(expand(&d, &choice, false, universe, fresh).into_iter().map(|d| d.into_rule(universe)));
    }
    out
}

/// Name-independent key of a rule: variables renamed by first occurrence.
fn variant_key(r: &Rule) -> String {
    let mut order: Vec<Var> = Vec::new();
    let mut note = |v: &Var| {
        if !order.contains(v) {
            order.push(v.clone());
        }
    };
    r.head.vars().for_each(&mut note);
    r.updates.iter().flat_map(|u| u.atom.vars()).for_each(&mut note);
    r.body.iter().flat_map(|l| l.atom.vars()).for_each(&mut note);
    r.all_vars().iter().for_each(&mut note);
    let map: BTreeMap<Var, Var> = order.iter().enumerate().map(|(k, v)| (v.clone(), Var::new(&format!("V{k}")))).collect();
    r.rename(&|v| map[v].clone()).to_string()
}

/// Iterates `I ↦ unfold(IDB, I ∪ ID_EDB)` from the empty set until the rule
/// set repeats up to renaming. Errors after `cap` rounds.
pub fn tc_fixpoint(db: &Database, universe: &Universe, cap: usize, fresh: &mut Fresh) -> Result<Vec<Rule>> {
    let ids = id_edb(db);
    let mut current: Vec<Rule> = Vec::new();
    let mut keys: BTreeSet<String> = BTreeSet::new();
    for _ in 0..cap {
        let mut q = current.clone();
        q.extend(ids.iter().cloned());
        let mut next = Vec::new();
        let mut next_keys = BTreeSet::new();
        for r in unfold(&db.rules, &q, universe, fresh) {
            if next_keys.insert(variant_key(&r)) {
                next.push(r);
            }
        }
        if next_keys == keys {
            return Ok(current);
        }
        current = next;
        keys = next_keys;
    }
    Err(Error::BoundExceeded(cap))
}

/// Positive unfolding until no new ground instance appears over `universe`.
/// Bodies end up with extensional positive literals only; negative literals
/// and tails are carried along. Errors when a recursive component needs
/// more than `cap` rounds.
pub fn t_stable_pos(db: &Database, universe: &Universe, cap: usize, fresh: &mut Fresh) -> Result<Vec<Rule>> {
    let mut graph: DiGraph<Sym, ()> = DiGraph::new();
    let mut index: BTreeMap<Sym, NodeIndex> = BTreeMap::new();
    for (p, i) in &db.preds {
        if i.kind == PredKind::Intensional {
            index.insert(p.clone(), graph.add_node(p.clone()));
        }
    }
    for r in &db.rules {
        for l in r.positive_body() {
            if let (Some(&a), Some(&b)) = (index.get(&r.head.pred), index.get(&l.atom.pred)) {
                graph.update_edge(a, b, ());
            }
        }
    }
    let drafts: Vec<Draft> = db.rules.iter().enumerate().map(|(k, r)| Draft::from_rule(r, k)).collect();
    let mut done: BTreeMap<Sym, Vec<Draft>> = BTreeMap::new();
    let mut seen = Subsumption::default();
    // Dependencies come first.
    for scc in tarjan_scc(&graph) {
        let members: BTreeSet<Sym> = scc.iter().map(|&n| graph[n].clone()).collect();
        let recursive = scc.len() > 1 || graph.contains_edge(scc[0], scc[0]);
        let rules: Vec<&Draft> = drafts.iter().filter(|d| members.contains(&d.head.pred)).collect();
        // Each kept draft with the round that produced it.
        let mut kept: BTreeMap<Sym, Vec<(Draft, usize)>> = members.iter().map(|p| (p.clone(), Vec::new())).collect();
        let mut round = 0;
        loop {
            round += 1;
            if round > cap {
                return Err(Error::BoundExceeded(cap));
            }
            let mut added: Vec<Draft> = Vec::new();
            for rule in &rules {
                let mut touches_scc = false;
                let choice: Vec<Option<Vec<(&Draft, bool)>>> = rule
                    .body
                    .iter()
                    .map(|l| {
                        if !l.positive || !index.contains_key(&l.atom.pred) {
                            None
                        } else if members.contains(&l.atom.pred) {
                            touches_scc = true;
                            Some(kept[&l.atom.pred].iter().map(|(d, r)| (d, *r + 1 == round)).collect())
                        } else {
                            Some(done[&l.atom.pred].iter().map(|d| (d, false)).collect())
                        }
                    })
                    .collect();
                if round > 1 && !touches_scc {
                    continue;
                }
                for d in expand(rule, &choice, round > 1, universe, fresh) {
                    if !recursive {
                        added.push(d);
                        continue;
                    }
                    let covered = kept[&d.head.pred].iter().map(|(k, _)| k).chain(&added).any(|k| subsumes(k, &d, universe));
                    if !covered && seen.admit(&d, universe) {
                        added.push(d);
                    }
                }
            }
            let stop = added.is_empty() || !recursive;
            for d in added {
                kept.get_mut(&d.head.pred).expect("member").push((d, round));
            }
            if stop {
                break;
            }
        }
        let kept: BTreeMap<Sym, Vec<Draft>> = kept.into_iter().map(|(p, ds)| (p, ds.into_iter().map(|(d, _)| d).collect())).collect();
        done.extend(kept);
    }
    let mut out = Vec::new();
    for p in db.preds.keys() {
        if let Some(ds) = done.remove(p) {
            out.extend(ds.into_iter().map(|d| d.into_rule(universe)));
        }
    }
    Ok(out)
}

/// Formula equivalent to `∧ᵢ ¬∨ⱼ (Z̃ᵢ = Ṽᵢⱼ ∧ bodyᵢⱼ)`, in prenex DNF. Each
/// group pairs the arguments of one negated literal with the rules
/// defining its predicate. Local variables of the bodies end up
/// quantified; a body counts only under constraints that keep its updates
/// consistent.
pub fn neg_c(groups: &[(Vec<Term>, Vec<Rule>)], universe: &Universe, fresh: &mut Fresh) -> QuantifiedFormula {
    let mut conj = Vec::new();
    for (args, defs) in groups {
        let outer: BTreeSet<Var> = args.iter().filter_map(|t| t.as_var().cloned()).collect();
        let mut disj = Vec::new();
        for def in negation_view(defs, universe, fresh) {
            disj.extend(def_formulas(&def, args, &outer, universe, fresh));
        }
        conj.push(Formula::not(Formula::Or(disj)));
    }
    to_prenex_dnf(Formula::And(conj), fresh, universe)
}

// Under negation only the bodies and the consistency of the updates count:
// each definition is split by the constraints that make its updates
// consistent, updates are dropped, and subsumed pieces are discarded.
fn negation_view(defs: &[Rule], universe: &Universe, fresh: &mut Fresh) -> Vec<Rule> {
    let mut kept: Vec<Draft> = Vec::new();
    let mut tail_ids: BTreeMap<String, usize> = BTreeMap::new();
    for def in defs {
        let mut r = def.rename_apart(fresh);
        let mut tails = Vec::new();
        match r.tail.take() {
            // An existential single-disjunct tail is just more body.
            Some(t) if t.matrix.len() == 1 && t.prefix.iter().all(|(q, _)| *q == Quantifier::Exists) => {
                let d = &t.matrix[0];
                r.constraint = r.constraint.and(&d.constraint);
                r.body.extend(d.literals.iter().cloned());
            }
            Some(t) => {
                let (key, args) = canonical_tail(&t);
                let next = tail_ids.len();
                let id = *tail_ids.entry(key).or_insert(next);
                tails.push(TailPart { id, args, formula: t });
            }
            None => {}
        }
        if !r.constraint.solvable(universe) {
            continue;
        }
        let applied = r.constraint.apply_updates(&r.updates);
        for s in sol(&applied, universe) {
            let constraint = r.constraint.and(&s);
            if !constraint.solvable(universe) {
                continue;
            }
            let d = Draft {
                head: r.head.clone(),
                constraint,
                updates: Vec::new(),
                body: r.body.clone(),
                tails: tails.clone(),
            };
            if kept.iter().any(|g| subsumes(g, &d, universe)) {
                continue;
            }
            kept.retain(|g| !subsumes(&d, g, universe));
            kept.push(d);
        }
    }
    kept.into_iter().map(|d| d.into_rule(universe)).collect()
}

// A key equal for tails that differ only in variable names, with the free
// variables in the order the key assigns them.
fn canonical_tail(t: &QuantifiedFormula) -> (String, Vec<Var>) {
    let bound: BTreeSet<Var> = t.prefix.iter().map(|(_, v)| v.clone()).collect();
    let mut order: Vec<Var> = t.prefix.iter().map(|(_, v)| v.clone()).collect();
    let mut note = |v: &Var| {
        if !order.contains(v) {
            order.push(v.clone());
        }
    };
    for d in &t.matrix {
        for a in d.constraint.atoms() {
            let (x, y) = a.terms();
            x.as_var().into_iter().chain(y.as_var()).for_each(&mut note);
        }
        d.literals.iter().flat_map(|l| l.atom.vars()).for_each(&mut note);
    }
    let names: BTreeMap<Var, Var> = order.iter().enumerate().map(|(k, v)| (v.clone(), Var::new(&format!("V{k}")))).collect();
    let mut c = t.rename(&|v| names[v].clone());
    c.matrix.sort();
    let args = order.into_iter().filter(|v| !bound.contains(v)).collect();
    (c.to_string(), args)
}

// `∃ locals (d ∧ literals ∧ tail)` for each projected update-consistent
// constraint `d` of one defining rule, with its head bound to `args`.
fn def_formulas(def: &Rule, args: &[Term], outer: &BTreeSet<Var>, universe: &Universe, fresh: &mut Fresh) -> Vec<Formula> {
    let r = def.rename_apart(fresh);
    let tail_free = r.tail.as_ref().map(|t| t.free_vars()).unwrap_or_default();
    // Head variables become the literal's arguments. A constant argument
    // is substituted unless the tail mentions the variable.
    let mut map: BTreeMap<Var, Term> = BTreeMap::new();
    let mut constraint = r.constraint.clone();
    for (v, t) in r.head.vars().zip(args) {
        match t {
            Term::Var(_) => {
                map.insert(v.clone(), t.clone());
            }
            Term::Const(_) if tail_free.contains(v) => constraint.add_eq(&Term::Var(v.clone()), t),
            Term::Const(_) => {
                map.insert(v.clone(), t.clone());
            }
        }
    }
    let term = |t: &Term| match t {
        Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| t.clone()),
        c => c.clone(),
    };
    let constraint = constraint.rename(&|v| map.get(v).cloned().unwrap_or_else(|| Term::Var(v.clone())));
    let updates: Vec<UpdateAtom> = r.updates.iter().map(|u| u.map_terms(&mut |t| term(t))).collect();
    let literals: Vec<Literal> = r
        .body
        .iter()
        .map(|l| Literal {
            positive: l.positive,
            atom: l.atom.map_terms(&mut |t| term(t)),
        })
        .collect();
    let tail = r.tail.as_ref().map(|t| {
        t.rename(&|v| match map.get(v) {
            Some(Term::Var(w)) => w.clone(),
            _ => v.clone(),
        })
    });
    let mut keep: BTreeSet<Var> = outer.clone();
    for l in &literals {
        keep.extend(l.atom.vars().cloned());
    }
    if let Some(t) = &tail {
        keep.extend(t.free_vars());
    }
    let mut out = Vec::new();
    if !constraint.solvable(universe) {
        return out;
    }
    let applied = constraint.apply_updates(&updates);
    for s in sol(&applied, universe) {
        let cs = constraint.and(&s);
        if !cs.solvable(universe) {
            continue;
        }
        for d in cs.project(&keep, universe) {
            let mut vars: BTreeSet<Var> = d.vars();
            vars.extend(keep.iter().cloned());
            let locals: Vec<Var> = vars.into_iter().filter(|v| !outer.contains(v)).collect();
            let mut parts = vec![Formula::from_constraint(&d)];
            parts.extend(literals.iter().cloned().map(Formula::Lit));
            if let Some(t) = &tail {
                parts.push(t.to_formula());
            }
            out.push(Formula::exists(locals, Formula::And(parts)));
        }
    }
    out
}

/// Replaces the negative literals of each rule by a tail built with
/// [`neg_c`] from the definitions in `defs`. Rules whose constraint,
/// updates and tail skeleton cannot hold together are dropped.
pub fn u_neg(rules: &[Rule], defs: &BTreeMap<Sym, Vec<Rule>>, universe: &Universe, fresh: &mut Fresh) -> Result<Vec<Rule>> {
    let mut out = Vec::new();
    for r in rules {
        let negs: Vec<&Literal> = r.negative_body().collect();
        if negs.is_empty() {
            out.push(r.clone());
            continue;
        }
        let mut groups = Vec::new();
        for l in negs {
            let ds = defs.get(&l.atom.pred).ok_or_else(|| Error::MissingDefinition(l.atom.pred.to_string()))?;
            groups.push((l.atom.args.clone(), ds.clone()));
        }
        let f = neg_c(&groups, universe, fresh);
        let tail = match &r.tail {
            Some(t) => t.and(&f, universe),
            None => f,
        };
        if tail.is_false() || !tail_satisfiable(r, &tail, universe) {
            continue;
        }
        out.push(Rule {
            head: r.head.clone(),
            constraint: r.constraint.clone(),
            updates: r.updates.clone(),
            body: r.positive_body().cloned().collect(),
            tail: (!tail.is_true()).then_some(tail),
        });
    }
    Ok(out)
}

fn tail_satisfiable(r: &Rule, tail: &QuantifiedFormula, universe: &Universe) -> bool {
    let free: Vec<Var> = tail.free_vars().into_iter().collect();
    let mut found = false;
    r.constraint.for_each_assignment(&free, universe, &mut |a| {
        let mut c = r.constraint.clone();
        for (v, k) in a {
            c.add_eq(&Term::Var(v.clone()), &Term::Const(k.clone()));
        }
        found = consistent(&c, &r.updates, universe) && tail.eval_constraints(a, universe);
        !found
    });
    found
}

/// The whole composition: positive unfolding, then negative unfolding
/// stratum by stratum against the identity rules and every lower stratum.
/// The result mentions no intensional predicate in any body or tail.
pub fn compose(db: &Database, universe: &Universe, cap: usize, fresh: &mut Fresh) -> Result<Vec<Rule>> {
    let strat = stratify(db)?;
    let pos = t_stable_pos(db, universe, cap, fresh)?;
    let mut defs: BTreeMap<Sym, Vec<Rule>> = id_edb(db).into_iter().map(|r| (r.head.pred.clone(), vec![r])).collect();
    let mut out = Vec::new();
    for level in 0..strat.count() {
        let stratum: Vec<Rule> = pos.iter().filter(|r| strat.level(&r.head.pred) == level).cloned().collect();
        let done = u_neg(&stratum, &defs, universe, fresh)?;
        for p in strat.preds_at(level) {
            if !db.is_extensional(&p) {
                defs.insert(p.clone(), done.iter().filter(|r| r.head.pred == p).cloned().collect());
            }
        }
        out.extend(done);
    }
    Ok(out)
}

/// `db` with its rules replaced by `rules` and the universe pinned through
/// the domain, so that evaluation sees the same constants.
pub fn with_rules(db: &Database, rules: Vec<Rule>, universe: &Universe) -> Database {
    let mut out = db.clone();
    out.rules = rules;
    out.domain = universe.consts().iter().cloned().collect();
    out
}
