//! Dependency graph, stratification and safety through query invocation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::program::{Database, Goal, PredKind, Rule};
use crate::term::{Sym, Term, Var};

/// Predicates as nodes; an edge `p -> q` labelled `true` (positive) or
/// `false` (negative) when a rule for `p` uses `q`.
pub struct DependencyGraph {
    pub graph: DiGraph<Sym, bool>,
    pub index: BTreeMap<Sym, NodeIndex>,
}

impl DependencyGraph {
    pub fn new(db: &Database) -> Self {
        Self::from_rules(db.preds.keys().cloned(), &db.rules)
    }

    pub fn from_rules(preds: impl IntoIterator<Item = Sym>, rules: &[Rule]) -> Self {
        let mut g = DependencyGraph {
            graph: DiGraph::new(),
            index: BTreeMap::new(),
        };
        for p in preds {
            g.node(&p);
        }
        for r in rules {
            let h = g.node(&r.head.pred);
            for (q, positive) in r.dependencies() {
                let t = g.node(&q);
                if !g.graph.edges_connecting(h, t).any(|e| *e.weight() == positive) {
                    g.graph.add_edge(h, t, positive);
                }
            }
        }
        g
    }

    fn node(&mut self, p: &Sym) -> NodeIndex {
        if let Some(&i) = self.index.get(p) {
            return i;
        }
        let i = self.graph.add_node(p.clone());
        self.index.insert(p.clone(), i);
        i
    }

    pub fn edges_from<'a>(&'a self, p: &Sym) -> impl Iterator<Item = (Sym, bool)> + 'a {
        let i = self.index[p];
        self.graph
            .edges(i)
            .map(move |e| (self.graph[petgraph::visit::EdgeRef::target(&e)].clone(), *e.weight()))
    }
}

/// Predicate levels, 0-based. Level 0 holds the extensional predicates.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Stratification {
    pub levels: BTreeMap<Sym, usize>,
}

impl Stratification {
    pub fn count(&self) -> usize {
        self.levels.values().max().map_or(1, |m| m + 1)
    }

    pub fn level(&self, pred: &str) -> usize {
        self.levels.get(pred).copied().unwrap_or(0)
    }

    pub fn preds_at(&self, level: usize) -> BTreeSet<Sym> {
        self.levels
            .iter()
            .filter(|(_, l)| **l == level)
            .map(|(p, _)| p.clone())
            .collect()
    }

    /// Indices of the rules of each stratum.
    pub fn strata<'a>(&self, rules: &'a [Rule]) -> Vec<Vec<&'a Rule>> {
        let mut out = vec![Vec::new(); self.count()];
        for r in rules {
            out[self.level(&r.head.pred)].push(r);
        }
        out
    }

    /// Checks the stratification conditions against a rule set.
    pub fn validate(&self, db: &Database) -> std::result::Result<(), String> {
        for (p, info) in &db.preds {
            if info.kind == PredKind::Extensional && self.level(p) != 0 {
                return Err(format!("extensional predicate {p} is not at the first level"));
            }
        }
        for r in &db.rules {
            let k = self.level(&r.head.pred);
            for (q, positive) in r.dependencies() {
                let j = self.level(&q);
                if positive && j > k {
                    return Err(format!("{} depends on {q} at a higher level", r.head.pred));
                }
                if !positive && j >= k {
                    return Err(format!("{} depends negatively on {q} at level {} >= {}", r.head.pred, j + 1, k + 1));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Stratification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in 0..self.count() {
            let preds: Vec<String> = self.preds_at(l).iter().map(|p| p.to_string()).collect();
            writeln!(f, "stratum {}: {}", l + 1, preds.join(", "))?;
        }
        Ok(())
    }
}

struct Condensed {
    sccs: Vec<Vec<Sym>>,
    // SCC index of each predicate
    of: BTreeMap<Sym, usize>,
}

fn condense(g: &DependencyGraph) -> Result<Condensed> {
    // tarjan_scc lists components in reverse topological order: dependencies first.
    let sccs: Vec<Vec<Sym>> = tarjan_scc(&g.graph)
        .into_iter()
        .map(|c| {
            let mut ps: Vec<Sym> = c.into_iter().map(|i| g.graph[i].clone()).collect();
            ps.sort();
            ps
        })
        .collect();
    let mut of = BTreeMap::new();
    for (i, c) in sccs.iter().enumerate() {
        for p in c {
            of.insert(p.clone(), i);
        }
    }
    for c in &sccs {
        for p in c {
            for (q, positive) in g.edges_from(p) {
                if !positive && of[&q] == of[p] {
                    return Err(Error::NotStratifiable(cycle_witness(g, &of, p, &q)));
                }
            }
        }
    }
    Ok(Condensed { sccs, of })
}

fn cycle_witness(g: &DependencyGraph, of: &BTreeMap<Sym, usize>, from: &Sym, to: &Sym) -> String {
    // shortest path to -> from inside the component
    let comp = of[from];
    let mut prev: BTreeMap<Sym, (Sym, bool)> = BTreeMap::new();
    let mut queue = VecDeque::from([to.clone()]);
    let mut seen: BTreeSet<Sym> = BTreeSet::from([to.clone()]);
    while let Some(p) = queue.pop_front() {
        if &p == from {
            break;
        }
        for (q, positive) in g.edges_from(&p) {
            if of[&q] == comp && seen.insert(q.clone()) {
                prev.insert(q.clone(), (p.clone(), positive));
                queue.push_back(q);
            }
        }
    }
    let mut steps: Vec<(Sym, bool)> = Vec::new();
    let mut cur = from.clone();
    while &cur != to {
        let (p, positive) = prev[&cur].clone();
        steps.push((cur, positive));
        cur = p;
    }
    steps.reverse();
    let mut out = format!("{from} -> not {to}");
    for (p, positive) in steps {
        out.push_str(&format!(" -> {}{p}", if positive { "" } else { "not " }));
    }
    out
}

/// Canonical stratification: extensional predicates at level 0; each
/// intensional component one level above the highest intensional component
/// it depends on, and at least at level 1 when it negates an extensional
/// predicate.
pub fn stratify(db: &Database) -> Result<Stratification> {
    let g = DependencyGraph::new(db);
    let c = condense(&g)?;
    let mut scc_level = vec![0usize; c.sccs.len()];
    for (i, comp) in c.sccs.iter().enumerate() {
        let mut level = 0;
        for p in comp {
            for (q, positive) in g.edges_from(p) {
                let j = c.of[&q];
                if j == i {
                    continue;
                }
                if db.is_extensional(&q) {
                    if !positive {
                        level = level.max(1);
                    }
                } else {
                    level = level.max(scc_level[j] + 1);
                }
            }
        }
        scc_level[i] = level;
    }
    Ok(Stratification {
        levels: c.of.iter().map(|(p, i)| (p.clone(), scc_level[*i])).collect(),
    })
}

/// A valid stratification where each component sits `extra()` levels above
/// the least level its dependencies allow. Used to test independence from
/// the chosen stratification.
pub fn stratify_with(db: &Database, extra: &mut dyn FnMut() -> usize) -> Result<Stratification> {
    let g = DependencyGraph::new(db);
    let c = condense(&g)?;
    let mut scc_level = vec![0usize; c.sccs.len()];
    for (i, comp) in c.sccs.iter().enumerate() {
        if comp.iter().all(|p| db.is_extensional(p)) {
            continue;
        }
        let mut level = 0;
        for p in comp {
            for (q, positive) in g.edges_from(p) {
                let j = c.of[&q];
                if j != i {
                    level = level.max(scc_level[j] + usize::from(!positive));
                }
            }
        }
        scc_level[i] = level + extra();
    }
    Ok(Stratification {
        levels: c.of.iter().map(|(p, i)| (p.clone(), scc_level[*i])).collect(),
    })
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Reason {
    Head,
    Update,
    Negation,
    Tail,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::Head => "occurs in the head but in no positive body literal",
            Reason::Update => "only occurs in update atom",
            Reason::Negation => "only occurs under negation",
            Reason::Tail => "only occurs free in the tail",
        })
    }
}

/// One unsafe variable. `rule` is a 0-based rule index, `None` for the goal.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Violation {
    pub rule: Option<usize>,
    pub var: Var,
    pub reason: Reason,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule {
            Some(k) => write!(f, "SAFETY rule#{} variable {}: {}", k + 1, self.var, self.reason),
            None => write!(f, "SAFETY goal variable {}: {}", self.var, self.reason),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct AdmissibilityReport {
    /// Problems in rules used by the goal, or in the goal itself.
    pub violations: Vec<Violation>,
    /// Problems in rules the goal never reaches.
    pub warnings: Vec<Violation>,
}

impl AdmissibilityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        for v in &self.warnings {
            writeln!(f, "warning (unreachable): {v}")?;
        }
        Ok(())
    }
}

fn rule_violations(k: usize, r: &Rule, goal_bound: &BTreeSet<usize>) -> Vec<Violation> {
    let mut bound: BTreeSet<Var> = r.positive_body().flat_map(|l| l.atom.vars().cloned()).collect();
    for (i, t) in r.head.args.iter().enumerate() {
        if let (true, Term::Var(v)) = (goal_bound.contains(&i), t) {
            bound.insert(v.clone());
        }
    }
    let bound_reps: BTreeSet<Term> = bound.iter().map(|v| r.constraint.rep(&Term::Var(v.clone()))).collect();
    let is_bound = |v: &Var| {
        let rep = r.constraint.rep(&Term::Var(v.clone()));
        bound.contains(v) || rep.is_ground() || bound_reps.contains(&rep)
    };
    let mut out: Vec<Violation> = Vec::new();
    let report = |v: &Var, reason: Reason, out: &mut Vec<Violation>| {
        if !is_bound(v) && !out.iter().any(|x| &x.var == v) {
            out.push(Violation {
                rule: Some(k),
                var: v.clone(),
                reason,
            });
        }
    };
    for v in r.head.vars() {
        report(v, Reason::Head, &mut out);
    }
    for u in &r.updates {
        for v in u.atom.vars() {
            report(v, Reason::Update, &mut out);
        }
    }
    for l in r.negative_body() {
        for v in l.atom.vars() {
            report(v, Reason::Negation, &mut out);
        }
    }
    if let Some(t) = &r.tail {
        for v in t.free_vars() {
            report(&v, Reason::Tail, &mut out);
        }
    }
    out
}

/// Safety of every rule, with no goal bindings.
pub fn check_rules(db: &Database) -> AdmissibilityReport {
    let none = BTreeSet::new();
    AdmissibilityReport {
        violations: db.rules.iter().enumerate().flat_map(|(k, r)| rule_violations(k, r, &none)).collect(),
        warnings: Vec::new(),
    }
}

/// Safety through query invocation for the rules reachable from `goal`.
pub fn check_admissible(db: &Database, goal: &Goal) -> AdmissibilityReport {
    let mut reachable: BTreeSet<Sym> = BTreeSet::new();
    let mut todo: Vec<Sym> = goal.body.iter().map(|l| l.atom.pred.clone()).collect();
    while let Some(p) = todo.pop() {
        if reachable.insert(p.clone()) {
            for r in db.rules_for(&p) {
                todo.extend(r.dependencies().into_iter().map(|(q, _)| q));
            }
        }
    }
    // Head positions bound to a constant by every goal literal on the predicate.
    let mut goal_bound: BTreeMap<Sym, BTreeSet<usize>> = BTreeMap::new();
    for l in &goal.body {
        let here: BTreeSet<usize> = l
            .atom
            .args
            .iter()
            .enumerate()
            .filter(|(_, t)| goal.constraint.rep(t).is_ground())
            .map(|(i, _)| i)
            .collect();
        goal_bound
            .entry(l.atom.pred.clone())
            .and_modify(|s| *s = s.intersection(&here).cloned().collect())
            .or_insert(here);
    }
    let mut report = AdmissibilityReport::default();
    let none = BTreeSet::new();
    for (k, r) in db.rules.iter().enumerate() {
        let gb = goal_bound.get(&r.head.pred).unwrap_or(&none);
        let vs = rule_violations(k, r, gb);
        if reachable.contains(&r.head.pred) {
            report.violations.extend(vs);
        } else {
            report.warnings.extend(vs);
        }
    }
    let bound: BTreeSet<Term> = goal
        .body
        .iter()
        .filter(|l| l.positive)
        .flat_map(|l| l.atom.vars())
        .map(|v| goal.constraint.rep(&Term::Var(v.clone())))
        .collect();
    for u in &goal.updates {
        for v in u.atom.vars() {
            let rep = goal.constraint.rep(&Term::Var(v.clone()));
            if !rep.is_ground() && !bound.contains(&rep) && !report.violations.iter().any(|x| x.rule.is_none() && &x.var == v) {
                report.violations.push(Violation {
                    rule: None,
                    var: v.clone(),
                    reason: Reason::Update,
                });
            }
        }
    }
    report
}
