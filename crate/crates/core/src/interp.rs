//! Constrained literals and interpretations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::constraint::{consistent, Constraint, Universe};
use crate::term::{dedup_updates, ground_updates_consistent, Const, Fresh, GroundAtom, GroundUpdate, Sym, Term, UpdateAtom, Var};

/// `p(X̃) <- c, ũ` or `not p(X̃) <- c`. Head variables are distinct.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstrainedLiteral {
    pub positive: bool,
    pub pred: Sym,
    pub head: Vec<Var>,
    pub constraint: Constraint,
    pub updates: Vec<UpdateAtom>,
}

/// A ground instance: argument tuple and the ground updates it demands.
pub type Instance = (Vec<Const>, BTreeSet<GroundUpdate>);

impl ConstrainedLiteral {
    pub fn fact(g: &GroundAtom, fresh: &mut Fresh) -> Self {
        let head: Vec<Var> = g.args.iter().map(|_| fresh.var()).collect();
        let mut constraint = Constraint::top();
        for (v, c) in head.iter().zip(&g.args) {
            constraint.add_eq(&Term::Var(v.clone()), &Term::Const(c.clone()));
        }
        ConstrainedLiteral {
            positive: true,
            pred: g.pred.clone(),
            head,
            constraint,
            updates: Vec::new(),
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out: BTreeSet<Var> = self.head.iter().cloned().collect();
        out.extend(self.constraint.vars());
        for u in &self.updates {
            out.extend(u.atom.vars().cloned());
        }
        out
    }

    pub fn is_solvable(&self, universe: &Universe) -> bool {
        consistent(&self.constraint, &self.updates, universe)
    }

    /// Renames the head to `args` and every other variable to a fresh one.
    pub fn instantiate(&self, args: &[Term], fresh: &mut Fresh) -> (Constraint, Vec<UpdateAtom>) {
        let mut map: BTreeMap<Var, Term> = self.head.iter().cloned().zip(args.iter().cloned()).collect();
        for v in self.vars() {
            map.entry(v).or_insert_with(|| Term::Var(fresh.var()));
        }
        let constraint = self.constraint.rename(&|v| map[v].clone());
        let updates = self
            .updates
            .iter()
            .map(|u| {
                u.map_terms(&mut |t| match t {
                    Term::Var(v) => map[v].clone(),
                    c => c.clone(),
                })
            })
            .collect();
        (constraint, updates)
    }

    /// Ground instances with consistent updates.
    pub fn instances(&self, universe: &Universe) -> BTreeSet<Instance> {
        let mut vars = self.head.clone();
        for u in &self.updates {
            for v in u.atom.vars() {
                if !vars.contains(v) {
                    vars.push(v.clone());
                }
            }
        }
        let mut out = BTreeSet::new();
        self.constraint.for_each_assignment(&vars, universe, &mut |a| {
            let args: Vec<Const> = self.head.iter().map(|v| a[v].clone()).collect();
            let ups: BTreeSet<GroundUpdate> = self
                .updates
                .iter()
                .map(|u| {
                    u.map_terms(&mut |t| match t {
                        Term::Var(v) => Term::Const(a[v].clone()),
                        c => c.clone(),
                    })
                    .to_ground()
                    .expect("all update variables assigned")
                })
                .collect();
            if ground_updates_consistent(&ups) {
                out.insert((args, ups));
            }
            true
        });
        out
    }

    /// Renames head variables to `X1..Xn` and the others to `Y1..`, in
    /// order of their current names.
    pub fn canonical(&self) -> ConstrainedLiteral {
        let mut map: BTreeMap<Var, Var> = BTreeMap::new();
        for (i, v) in self.head.iter().enumerate() {
            map.insert(v.clone(), Var::new(&format!("X{}", i + 1)));
        }
        let mut n = 0;
        for v in self.vars() {
            map.entry(v).or_insert_with(|| {
                n += 1;
                Var::new(&format!("Y{n}"))
            });
        }
        let sub = |t: &Term| match t {
            Term::Var(v) => Term::Var(map[v].clone()),
            c => c.clone(),
        };
        let constraint = self.constraint.rename(&|v| Term::Var(map[v].clone()));
        let mut updates: Vec<UpdateAtom> = self
            .updates
            .iter()
            .map(|u| constraint.apply_updates(&[u.map_terms(&mut |t| sub(t))]).remove(0))
            .collect();
        dedup_updates(&mut updates);
        ConstrainedLiteral {
            positive: self.positive,
            pred: self.pred.clone(),
            head: self.head.iter().map(|v| map[v].clone()).collect(),
            constraint,
            updates,
        }
    }
}

impl fmt::Display for ConstrainedLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("not ")?;
        }
        f.write_str(&self.pred)?;
        if !self.head.is_empty() {
            let args: Vec<&str> = self.head.iter().map(Var::name).collect();
            write!(f, "({})", args.join(","))?;
        }
        f.write_str(" <- ")?;
        let mut items: Vec<String> = Vec::new();
        if !self.constraint.is_true() {
            items.push(self.constraint.to_string());
        }
        items.extend(self.updates.iter().map(|u| u.to_string()));
        if items.is_empty() {
            f.write_str("true")
        } else {
            f.write_str(&items.join(", "))
        }
    }
}

impl fmt::Debug for ConstrainedLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Default)]
struct Relation {
    entries: Vec<(ConstrainedLiteral, BTreeSet<Instance>)>,
    covered: BTreeSet<Instance>,
    tuples: BTreeSet<Vec<Const>>,
}

/// A set of constrained literals, indexed by predicate and polarity, kept
/// free of redundancy: a literal whose ground instances are already covered
/// is not stored.
#[derive(Clone, Default)]
pub struct Interpretation {
    rels: BTreeMap<(Sym, bool), Relation>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `lit` unless redundant; returns whether it was added. Stored
    /// literals whose instances `lit` covers are dropped.
    pub fn insert(&mut self, lit: ConstrainedLiteral, universe: &Universe) -> bool {
        let inst = lit.instances(universe);
        if inst.is_empty() {
            return false;
        }
        let rel = self.rels.entry((lit.pred.clone(), lit.positive)).or_default();
        if inst.is_subset(&rel.covered) {
            return false;
        }
        rel.entries.retain(|(_, other)| !other.is_subset(&inst));
        rel.tuples.extend(inst.iter().map(|(t, _)| t.clone()));
        rel.covered.extend(inst.iter().cloned());
        rel.entries.push((lit, inst));
        true
    }

    pub fn literals<'a>(&'a self, pred: &str, positive: bool) -> impl Iterator<Item = &'a ConstrainedLiteral> + 'a {
        self.rels
            .get(&(crate::term::sym(pred), positive))
            .into_iter()
            .flat_map(|r| r.entries.iter().map(|(l, _)| l))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConstrainedLiteral> {
        self.rels.values().flat_map(|r| r.entries.iter().map(|(l, _)| l))
    }

    pub fn len(&self) -> usize {
        self.rels.values().map(|r| r.entries.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Some stored literal of this polarity has a ground instance on `g`.
    pub fn holds(&self, positive: bool, g: &GroundAtom) -> bool {
        self.rels
            .get(&(g.pred.clone(), positive))
            .is_some_and(|r| r.tuples.contains(&g.args))
    }

    /// Union of ground instances per predicate and polarity.
    pub fn expansion(&self) -> BTreeMap<(Sym, bool), BTreeSet<Instance>> {
        self.rels
            .iter()
            .filter(|(_, r)| !r.covered.is_empty())
            .map(|(k, r)| (k.clone(), r.covered.clone()))
            .collect()
    }

    /// Canonically renamed literals, sorted.
    pub fn canonical(&self) -> Vec<ConstrainedLiteral> {
        let mut out: Vec<ConstrainedLiteral> = self.iter().map(ConstrainedLiteral::canonical).collect();
        out.sort_by(|a, b| (&a.pred, !a.positive, a.to_string()).cmp(&(&b.pred, !b.positive, b.to_string())));
        out
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.canonical() {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}
