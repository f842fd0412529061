//! Random programs and brute-force reference evaluators.
#![allow(dead_code)]

pub mod criteria;

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use udatalog::constraint::{CAtom, Constraint, Universe};
use udatalog::eval::{answer_instances, mark};
use udatalog::interp::Instance;
use udatalog::parser::{parse_goal, parse_program};
use udatalog::program::{Database, Goal, PredKind};
use udatalog::term::{Const, Fresh, GroundAtom, GroundUpdate, Sign, Term, Var};

pub struct Case {
    pub seed: u64,
    pub source: String,
    pub db: Database,
    pub goals: Vec<Goal>,
}

struct Pred {
    name: String,
    arity: usize,
}

const VARS: [&str; 3] = ["X", "Y", "Z"];

fn pick_term(rng: &mut StdRng, vars: &[String], consts: &[&str], p_const: f64) -> String {
    if vars.is_empty() || rng.gen_bool(p_const) {
        consts.choose(rng).unwrap().to_string()
    } else {
        vars.choose(rng).unwrap().clone()
    }
}

fn atom_text(name: &str, args: &[String]) -> String {
    if args.is_empty() {
        name.to_string()
    } else {
        format!("{name}({})", args.join(","))
    }
}

/// A stratified, safe program with at most four predicates of arity at
/// most two, at most eight rules, a universe of two or three constants, a
/// random EDB, and five admissible goals.
pub fn random_case(seed: u64) -> Case {
    let mut rng = StdRng::seed_from_u64(seed);
    let consts: Vec<&str> = ["a", "b", "c"][..rng.gen_range(2..=3)].to_vec();
    let n_edb = rng.gen_range(1..=2);
    let n_idb = rng.gen_range(1..=4 - n_edb);
    let edb: Vec<Pred> = (0..n_edb)
        .map(|k| Pred {
            name: format!("e{k}"),
            arity: rng.gen_range(1..=2),
        })
        .collect();
    let idb: Vec<Pred> = (0..n_idb)
        .map(|k| Pred {
            name: format!("p{k}"),
            arity: rng.gen_range(1..=2),
        })
        .collect();
    let n_rules = rng.gen_range(n_idb..=8);
    let mut rules = Vec::new();
    for k in 0..n_rules {
        let i = if k < n_idb { k } else { rng.gen_range(0..n_idb) };
        rules.push(random_rule(&mut rng, i, k < n_idb, &edb, &idb, &consts));
    }
    let mut facts = Vec::new();
    for e in &edb {
        for tuple in tuples(&consts, e.arity) {
            if rng.gen_bool(0.4) {
                facts.push(format!("{}.", atom_text(&e.name, &tuple)));
            }
        }
    }
    let decl: Vec<String> = edb.iter().map(|e| format!("{}/{}", e.name, e.arity)).collect();
    let source = format!(
        "#domain {}.\n#extensional {}.\n{}\n{}\n",
        consts.join(", "),
        decl.join(", "),
        facts.join("\n"),
        rules.join("\n")
    );
    let db = parse_program(&source).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{source}"));
    let all: Vec<&Pred> = idb.iter().chain(idb.iter()).chain(edb.iter()).collect();
    let goals = (0..5)
        .map(|_| {
            let text = random_goal(&mut rng, &all, &edb, &consts);
            parse_goal(&text).unwrap_or_else(|e| panic!("seed {seed}: {e}: {text}"))
        })
        .collect();
    Case { seed, source, db, goals }
}

fn tuples(consts: &[&str], arity: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|t: Vec<String>| {
                consts.iter().map(move |c| {
                    let mut t = t.clone();
                    t.push(c.to_string());
                    t
                })
            })
            .collect();
    }
    out
}

fn random_rule(rng: &mut StdRng, i: usize, exit: bool, edb: &[Pred], idb: &[Pred], consts: &[&str]) -> String {
    let positive: Vec<&Pred> = edb.iter().chain(idb[..if exit { i } else { i + 1 }].iter()).collect();
    let negative: Vec<&Pred> = edb.iter().chain(idb[..i].iter()).collect();
    let mut items = Vec::new();
    let mut bound: Vec<String> = Vec::new();
    let n_pos = if rng.gen_bool(0.3) { 2 } else { 1 };
    let mut recursive = false;
    for _ in 0..n_pos {
        // Recursion stays linear: at most one literal on the head predicate.
        let p = loop {
            let p = positive.choose(rng).unwrap();
            if p.name != idb[i].name || !recursive {
                break p;
            }
        };
        recursive |= p.name == idb[i].name;
        let args: Vec<String> = (0..p.arity)
            .map(|_| {
                let pool: Vec<String> = VARS.iter().map(|v| v.to_string()).collect();
                pick_term(rng, &pool, consts, 0.15)
            })
            .collect();
        for a in &args {
            if a.starts_with(char::is_uppercase) && !bound.contains(a) {
                bound.push(a.clone());
            }
        }
        items.push(atom_text(&p.name, &args));
    }
    if rng.gen_bool(0.35) {
        let q = negative.choose(rng).unwrap();
        let args: Vec<String> = (0..q.arity).map(|_| pick_term(rng, &bound, consts, 0.2)).collect();
        items.push(format!("not {}", atom_text(&q.name, &args)));
    }
    if !bound.is_empty() && rng.gen_bool(0.3) {
        let v = bound.choose(rng).unwrap().clone();
        let c = match rng.gen_range(0..3) {
            0 => format!("{v} = {}", consts.choose(rng).unwrap()),
            1 => format!("{v} != {}", consts.choose(rng).unwrap()),
            _ => format!("{v} != {}", bound.choose(rng).unwrap()),
        };
        if !c.ends_with(&format!("!= {v}")) {
            items.push(c);
        }
    }
    let head = &idb[i];
    let args: Vec<String> = (0..head.arity).map(|_| pick_term(rng, &bound, consts, 0.1)).collect();
    if rng.gen_bool(0.4) {
        let e = edb.choose(rng).unwrap();
        // Updates in recursive rules mention only head terms, so update
        // sets cannot grow along a recursion.
        let pool: Vec<String> = if recursive {
            args.iter().filter(|a| a.starts_with(char::is_uppercase)).cloned().collect()
        } else {
            bound.clone()
        };
        let args: Vec<String> = (0..e.arity).map(|_| pick_term(rng, &pool, consts, 0.2)).collect();
        let sign = if rng.gen_bool(0.5) { '+' } else { '-' };
        items.push(format!("{sign}{}", atom_text(&e.name, &args)));
    }
    format!("{} :- {}.", atom_text(&head.name, &args), items.join(", "))
}

fn random_goal(rng: &mut StdRng, preds: &[&Pred], edb: &[Pred], consts: &[&str]) -> String {
    let p = preds.choose(rng).unwrap();
    let pool: Vec<String> = ["X", "Y"].iter().map(|v| v.to_string()).collect();
    let args: Vec<String> = (0..p.arity).map(|_| pick_term(rng, &pool, consts, 0.25)).collect();
    let bound: Vec<String> = args.iter().filter(|a| a.starts_with(char::is_uppercase)).cloned().collect();
    let mut items = vec![atom_text(&p.name, &args)];
    if rng.gen_bool(0.25) {
        let q = preds.choose(rng).unwrap();
        let qa: Vec<String> = (0..q.arity).map(|_| pick_term(rng, &bound, consts, 0.3)).collect();
        items.push(format!("not {}", atom_text(&q.name, &qa)));
    }
    if !bound.is_empty() && rng.gen_bool(0.2) {
        items.push(format!("{} != {}", bound.choose(rng).unwrap(), consts.choose(rng).unwrap()));
    }
    if rng.gen_bool(0.15) {
        let e = edb.choose(rng).unwrap();
        let ea: Vec<String> = (0..e.arity).map(|_| pick_term(rng, &bound, consts, 0.3)).collect();
        items.push(format!("+{}", atom_text(&e.name, &ea)));
    }
    format!("?- {}.", items.join(", "))
}

// ---------------------------------------------------------------------------
// Ground reference evaluation.

pub type Annotations = BTreeSet<BTreeSet<GroundUpdate>>;

/// Every ground atom with the update sets it can be derived with. An atom
/// with no entry (or an empty set) is false.
pub struct GroundModel {
    pub universe: Vec<Const>,
    pub atoms: BTreeMap<GroundAtom, Annotations>,
}

fn consistent(ups: &BTreeSet<GroundUpdate>) -> bool {
    !ups.iter().any(|u| {
        u.sign == Sign::Insert
            && ups.contains(&GroundUpdate {
                sign: Sign::Delete,
                atom: u.atom.clone(),
            })
    })
}

fn assignments(vars: &[Var], universe: &[Const]) -> Vec<BTreeMap<Var, Const>> {
    let mut out = vec![BTreeMap::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|a: BTreeMap<Var, Const>| {
                universe.iter().map(move |c| {
                    let mut a = a.clone();
                    a.insert(v.clone(), c.clone());
                    a
                })
            })
            .collect();
    }
    out
}

fn value(t: &Term, a: &BTreeMap<Var, Const>) -> Const {
    match t {
        Term::Const(c) => c.clone(),
        Term::Var(v) => a[v].clone(),
    }
}

/// Direct truth of a constraint under a total assignment.
pub fn constraint_holds(c: &Constraint, a: &BTreeMap<Var, Const>) -> bool {
    !c.is_false()
        && c.atoms().iter().all(|x| match x {
            CAtom::Eq(l, r) => value(l, a) == value(r, a),
            CAtom::Neq(l, r) => value(l, a) != value(r, a),
        })
}

fn ground(pred: &udatalog::term::Atom, a: &BTreeMap<Var, Const>) -> GroundAtom {
    GroundAtom {
        pred: pred.pred.clone(),
        args: pred.args.iter().map(|t| value(t, a)).collect(),
    }
}

struct GroundRule {
    head: GroundAtom,
    updates: BTreeSet<GroundUpdate>,
    pos: Vec<GroundAtom>,
    neg: Vec<GroundAtom>,
}

fn levels(db: &Database) -> Option<BTreeMap<String, usize>> {
    let mut level: BTreeMap<String, usize> = db.preds.keys().map(|p| (p.to_string(), 0)).collect();
    let bound = db.preds.len() + 1;
    loop {
        let mut changed = false;
        for r in &db.rules {
            let mut need = 0;
            for l in &r.body {
                let q = level[&*l.atom.pred];
                need = need.max(if l.positive { q } else { q + 1 });
            }
            let h = level.get_mut(&*r.head.pred).unwrap();
            if need > *h {
                *h = need;
                changed = true;
            }
        }
        if level.values().any(|&l| l > bound) {
            return None;
        }
        if !changed {
            return Some(level);
        }
    }
}

// Each positive atom contributes one of its update sets.
fn combine(start: BTreeSet<GroundUpdate>, pos: &[GroundAtom], atoms: &BTreeMap<GroundAtom, Annotations>) -> Vec<BTreeSet<GroundUpdate>> {
    let mut acc = vec![start];
    for g in pos {
        let Some(anns) = atoms.get(g) else {
            return Vec::new();
        };
        let mut next = Vec::new();
        for a in &acc {
            for s in anns {
                let u: BTreeSet<GroundUpdate> = a.union(s).cloned().collect();
                if consistent(&u) {
                    next.push(u);
                }
            }
        }
        next.sort();
        next.dedup();
        acc = next;
    }
    acc
}

/// Stratified perfect model of a plain program over `universe`, by
/// grounding. `None` when the program is not stratifiable.
pub fn ground_model(db: &Database, universe: &[Const]) -> Option<GroundModel> {
    let level = levels(db)?;
    let mut by_level: BTreeMap<usize, Vec<GroundRule>> = BTreeMap::new();
    for r in &db.rules {
        assert!(r.tail.is_none(), "the ground evaluator handles plain rules only");
        let vars: Vec<Var> = r.free_vars().into_iter().collect();
        for a in assignments(&vars, universe) {
            if !constraint_holds(&r.constraint, &a) {
                continue;
            }
            let updates: BTreeSet<GroundUpdate> = r
                .updates
                .iter()
                .map(|u| GroundUpdate {
                    sign: u.sign,
                    atom: ground(&u.atom, &a),
                })
                .collect();
            if !consistent(&updates) {
                continue;
            }
            by_level.entry(level[&*r.head.pred]).or_default().push(GroundRule {
                head: ground(&r.head, &a),
                updates,
                pos: r.positive_body().map(|l| ground(&l.atom, &a)).collect(),
                neg: r.negative_body().map(|l| ground(&l.atom, &a)).collect(),
            });
        }
    }
    let mut atoms: BTreeMap<GroundAtom, Annotations> = BTreeMap::new();
    for f in &db.facts {
        atoms.entry(f.clone()).or_default().insert(BTreeSet::new());
    }
    for rules in by_level.values() {
        loop {
            let mut changed = false;
            for r in rules {
                if r.neg.iter().any(|g| atoms.get(g).is_some_and(|s| !s.is_empty())) {
                    continue;
                }
                for u in combine(r.updates.clone(), &r.pos, &atoms) {
                    changed |= atoms.entry(r.head.clone()).or_default().insert(u);
                }
            }
            if !changed {
                break;
            }
        }
    }
    Some(GroundModel {
        universe: universe.to_vec(),
        atoms,
    })
}

impl GroundModel {
    pub fn holds(&self, g: &GroundAtom) -> bool {
        self.atoms.get(g).is_some_and(|s| !s.is_empty())
    }

    /// Ground answers of a goal: answer-variable values and update sets.
    pub fn answers(&self, goal: &Goal) -> BTreeSet<Instance> {
        let vars: Vec<Var> = goal.vars().into_iter().collect();
        let answer = goal.answer_vars();
        let mut out = BTreeSet::new();
        for a in assignments(&vars, &self.universe) {
            if !constraint_holds(&goal.constraint, &a) {
                continue;
            }
            let updates: BTreeSet<GroundUpdate> = goal
                .updates
                .iter()
                .map(|u| GroundUpdate {
                    sign: u.sign,
                    atom: ground(&u.atom, &a),
                })
                .collect();
            if !consistent(&updates) {
                continue;
            }
            if goal.body.iter().filter(|l| !l.positive).any(|l| self.holds(&ground(&l.atom, &a))) {
                continue;
            }
            let pos: Vec<GroundAtom> = goal.body.iter().filter(|l| l.positive).map(|l| ground(&l.atom, &a)).collect();
            for u in combine(updates, &pos, &self.atoms) {
                out.insert((answer.iter().map(|v| a[v].clone()).collect(), u));
            }
        }
        out
    }

    /// Positive instances per predicate, in the shape of an interpretation
    /// expansion.
    pub fn positive(&self) -> BTreeMap<String, BTreeSet<Instance>> {
        let mut out: BTreeMap<String, BTreeSet<Instance>> = BTreeMap::new();
        for (g, anns) in &self.atoms {
            for u in anns {
                out.entry(g.pred.to_string()).or_default().insert((g.args.clone(), u.clone()));
            }
        }
        out
    }

    /// False ground tuples of `pred`.
    pub fn negative(&self, pred: &str, arity: usize) -> BTreeSet<Vec<Const>> {
        let consts: Vec<&str> = self.universe.iter().map(Const::name).collect();
        tuples(&consts, arity)
            .into_iter()
            .map(|t| t.iter().map(|c| Const::new(c)).collect::<Vec<Const>>())
            .filter(|t| {
                !self.holds(&GroundAtom {
                    pred: udatalog::term::sym(pred),
                    args: t.clone(),
                })
            })
            .collect()
    }
}

/// Library answers for `goal` as ground instances.
pub fn library_answers(db: &Database, goal: &Goal) -> BTreeSet<Instance> {
    let m = mark(db, goal, Fresh::default()).expect("goal evaluates");
    answer_instances(&m.solutions, &goal.answer_vars(), &m.universe)
}

pub fn universe_of(db: &Database) -> Universe {
    db.universe()
}

pub fn extensional_preds(db: &Database) -> Vec<(String, usize)> {
    db.preds
        .iter()
        .filter(|(_, i)| i.kind == PredKind::Extensional)
        .map(|(p, i)| (p.to_string(), i.arity))
        .collect()
}

// ---------------------------------------------------------------------------
// Random constraints and update lists for the constraint-engine checks.

pub fn random_constraint(rng: &mut StdRng, vars: &[Var], consts: &[Const]) -> Constraint {
    let n = rng.gen_range(0..=3);
    let mut atoms = Vec::new();
    for _ in 0..n {
        let l = Term::Var(vars.choose(rng).unwrap().clone());
        let r = if rng.gen_bool(0.5) {
            Term::Var(vars.choose(rng).unwrap().clone())
        } else {
            Term::Const(consts.choose(rng).unwrap().clone())
        };
        atoms.push(if rng.gen_bool(0.5) { CAtom::Eq(l, r) } else { CAtom::Neq(l, r) });
    }
    Constraint::from_atoms(&atoms)
}

pub fn all_assignments(vars: &[Var], universe: &[Const]) -> Vec<BTreeMap<Var, Const>> {
    assignments(vars, universe)
}

pub fn updates_consistent(ups: &BTreeSet<GroundUpdate>) -> bool {
    consistent(ups)
}

pub fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}
