//! One check per acceptance criterion. Each returns a short summary on
//! success and a description of the first mismatch on failure.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use udatalog::analysis::{check_admissible, stratify, stratify_with, Stratification};
use udatalog::compose::{compose, neg_c, t_stable_pos, with_rules, DEFAULT_UNFOLD_CAP};
use udatalog::constraint::{consistent, sol, CAtom, Constraint, Universe};
use udatalog::eval::{answer_instances, stratified_fixpoint, Ctx};
use udatalog::formula::QuantifiedFormula;
use udatalog::interp::Instance;
use udatalog::parser::{parse_goal, parse_program};
use udatalog::program::{Database, Rule};
use udatalog::term::{sym, Atom, Const, GroundAtom, GroundUpdate, Sign, Sym, Term, UpdateAtom, Var};
use udatalog::transaction::{apply_transaction, edb_to_string, execute, AbortReason, Status};

use super::{all_assignments, constraint_holds, ground_model, library_answers, random_case, random_constraint, seeded, updates_consistent};

pub type Outcome = Result<String, String>;

pub const DEPT: &str = include_str!("../../../../programs/dept.udl");

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn dept() -> Database {
    parse_program(DEPT).expect("dept.udl parses")
}

fn c(name: &str) -> Const {
    Const::new(name)
}

fn ga(pred: &str, args: &[&str]) -> GroundAtom {
    GroundAtom::new(pred, args)
}

fn gu(sign: Sign, pred: &str, args: &[&str]) -> GroundUpdate {
    GroundUpdate {
        sign,
        atom: ga(pred, args),
    }
}

fn facts(text: &str) -> BTreeSet<GroundAtom> {
    udatalog::parser::parse_facts(text).expect("facts parse").0
}

// ---------------------------------------------------------------------------

pub fn ins_man_transaction() -> Outcome {
    let db = dept();
    let goal = parse_goal("ins_man(X)").unwrap();
    let (marking, out) = apply_transaction(&goal, &db, db.fresh()).map_err(|e| e.to_string())?;
    ensure!(marking.solutions.len() == 1, "expected one solution, got {}", marking.solutions.len());
    let updates = BTreeSet::from([gu(Sign::Delete, "dep_A", &["c"]), gu(Sign::Insert, "dep_A", &["b"])]);
    let answers = answer_instances(&marking.solutions, &goal.answer_vars(), &marking.universe);
    ensure!(answers == BTreeSet::from([(vec![c("b")], updates.clone())]), "answers {answers:?}");
    ensure!(out.status == Status::Commit, "status {}", out.status);
    ensure!(out.updates == updates, "updates {:?}", out.updates);
    let expected = facts("emp_man(b,b). emp_man(b,c). dep_A(b). dep_B(b).");
    ensure!(out.new_edb == expected, "new EDB {:?}", out.new_edb);
    Ok("X = b, {-dep_A(c), +dep_A(b)}, COMMIT".into())
}

// ---------------------------------------------------------------------------

type Expansion = BTreeMap<(Sym, bool), BTreeSet<Instance>>;

fn tuples(arity: usize, consts: &[Const]) -> Vec<Vec<Const>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out.into_iter().flat_map(|t| consts.iter().map(move |k| [t.clone(), vec![k.clone()]].concat())).collect();
    }
    out
}

fn add_neg(exp: &mut Expansion, pred: &str, arity: usize, consts: &[Const], holds: impl Fn(&[&str]) -> bool) {
    let set = exp.entry((sym(pred), false)).or_default();
    for t in tuples(arity, consts) {
        let names: Vec<&str> = t.iter().map(Const::name).collect();
        if holds(&names) {
            set.insert((t, BTreeSet::new()));
        }
    }
}

fn add_pos(exp: &mut Expansion, pred: &str, args: &[&str], updates: &[GroundUpdate]) {
    exp.entry((sym(pred), true))
        .or_default()
        .insert((args.iter().map(|a| c(a)).collect(), updates.iter().cloned().collect()));
}

fn nonempty(e: &Expansion) -> Expansion {
    e.iter().filter(|(_, s)| !s.is_empty()).map(|(k, s)| (k.clone(), s.clone())).collect()
}

/// `M₁ ⊆ M₂ ⊆ M₃` of the department program as ground instances over
/// {a, b, c}.
fn dept_models(consts: &[Const]) -> Vec<Expansion> {
    use Sign::{Delete, Insert};
    let mut m = Expansion::new();
    add_pos(&mut m, "emp_man", &["b", "b"], &[]);
    add_pos(&mut m, "emp_man", &["b", "c"], &[]);
    add_pos(&mut m, "dep_A", &["b"], &[]);
    add_pos(&mut m, "dep_A", &["c"], &[]);
    add_pos(&mut m, "dep_B", &["b"], &[]);
    add_pos(&mut m, "rem_man", &["b", "b"], &[gu(Delete, "dep_A", &["b"])]);
    add_pos(&mut m, "rem_man", &["b", "c"], &[gu(Delete, "dep_A", &["c"])]);
    let manager = |t: &[&str]| t[0] != "b" || (t[1] != "b" && t[1] != "c");
    add_neg(&mut m, "emp_man", 2, consts, manager);
    add_neg(&mut m, "dep_A", 1, consts, |t| t[0] != "b" && t[0] != "c");
    add_neg(&mut m, "dep_B", 1, consts, |t| t[0] != "b");
    add_neg(&mut m, "rem_man", 2, consts, manager);
    let m1 = m.clone();
    add_pos(&mut m, "ins_man", &["b"], &[gu(Delete, "dep_A", &["c"]), gu(Insert, "dep_A", &["b"])]);
    add_neg(&mut m, "ins_man", 1, consts, |t| t[0] != "b");
    let m2 = m.clone();
    add_pos(&mut m, "change_man", &["b"], &[gu(Delete, "emp_man", &["b", "c"])]);
    add_pos(&mut m, "change_man", &["b"], &[gu(Delete, "emp_man", &["b", "b"])]);
    add_neg(&mut m, "change_man", 1, consts, |t| t[0] != "b");
    vec![m1, m2, m]
}

pub fn dept_fixpoint() -> Outcome {
    let db = dept();
    let consts = db.universe().consts().to_vec();
    ensure!(consts == vec![c("a"), c("b"), c("c")], "universe {consts:?}");
    let levels = [("emp_man", 0), ("dep_A", 0), ("dep_B", 0), ("rem_man", 0), ("ins_man", 1), ("change_man", 2)];
    let strat = Stratification {
        levels: levels.iter().map(|(p, l)| (sym(p), *l)).collect(),
    };
    strat.validate(&db)?;
    let fix = stratified_fixpoint(&db, &strat, &mut Ctx::for_db(&db));
    ensure!(fix.strata.len() == 3, "{} strata", fix.strata.len());
    for (k, (got, want)) in fix.strata.iter().zip(dept_models(&consts)).enumerate() {
        let got = nonempty(&got.expansion());
        ensure!(got == want, "M{} differs:\n got {got:?}\nwant {want:?}", k + 1);
    }
    let stored = fix.fix().len();
    Ok(format!("M1, M2, M3 match; {stored} stored literals"))
}

// ---------------------------------------------------------------------------

fn holds_any(ds: &[Constraint], a: &BTreeMap<Var, Const>) -> bool {
    ds.iter().any(|d| constraint_holds(d, a))
}

fn same_over(ds: &[Constraint], expected: &[Constraint], vars: &[Var], consts: &[Const]) -> bool {
    all_assignments(vars, consts).iter().all(|a| holds_any(ds, a) == holds_any(expected, a))
}

fn term(t: &str) -> Term {
    if t.starts_with(char::is_uppercase) {
        Term::var(t)
    } else {
        Term::Const(c(t))
    }
}

// "X != a, Y = Z" style conjunctions.
fn cons(text: &str) -> Constraint {
    let atoms: Vec<CAtom> = text
        .split(',')
        .map(|part| {
            let (l, r, eq) = match part.split_once("!=") {
                Some((l, r)) => (l, r, false),
                None => {
                    let (l, r) = part.split_once('=').expect("comparison");
                    (l, r, true)
                }
            };
            let (l, r) = (term(l.trim()), term(r.trim()));
            if eq {
                CAtom::Eq(l, r)
            } else {
                CAtom::Neq(l, r)
            }
        })
        .collect();
    Constraint::from_atoms(&atoms)
}

fn upd(sign: Sign, pred: &str, args: &[&str]) -> UpdateAtom {
    let atom = Atom::new(pred, args.iter().map(|a| term(a)).collect());
    match sign {
        Sign::Insert => UpdateAtom::insert(atom),
        Sign::Delete => UpdateAtom::delete(atom),
    }
}

pub fn operator_goldens() -> Outcome {
    let xyz: Vec<Var> = ["X", "Y", "Z"].iter().map(|v| Var::new(v)).collect();
    let u = Universe::of(&["2", "3", "a", "b"]);
    let neg = cons("X = 2, Y = 3").neg(&u);
    ensure!(same_over(&neg, &[cons("X != 2"), cons("Y != 3")], &xyz[..2], u.consts()), "Neg(X=2,Y=3) = {neg:?}");

    let u = Universe::of(&["a", "b", "c", "d"]);
    use Sign::{Delete, Insert};
    let ups = [upd(Insert, "p", &["a", "Y"]), upd(Delete, "p", &["X", "Z"]), upd(Delete, "p", &["X", "b"]), upd(Delete, "p", &["b", "c"])];
    let s = sol(&ups, &u);
    ensure!(same_over(&s, &[cons("X != a"), cons("Y != Z, Y != b")], &xyz, u.consts()), "Sol = {s:?}");

    let clash = sol(&[upd(Insert, "p", &["a"]), upd(Delete, "p", &["a"])], &u);
    ensure!(same_over(&clash, &[], &xyz, u.consts()), "Sol(+p(a),-p(a)) = {clash:?}");
    Ok("Neg and Sol examples hold over 4 constants".into())
}

// ---------------------------------------------------------------------------

type RuleInstance = (GroundAtom, BTreeSet<GroundUpdate>, BTreeSet<(bool, GroundAtom)>);

fn ground(a: &Atom, asg: &BTreeMap<Var, Const>) -> GroundAtom {
    GroundAtom {
        pred: a.pred.clone(),
        args: a
            .args
            .iter()
            .map(|t| match t {
                Term::Const(k) => k.clone(),
                Term::Var(v) => asg[v].clone(),
            })
            .collect(),
    }
}

/// Every ground instance of a tail-free rule.
fn rule_instances(r: &Rule, consts: &[Const]) -> BTreeSet<RuleInstance> {
    assert!(r.tail.is_none());
    let vars: Vec<Var> = r.all_vars().into_iter().collect();
    all_assignments(&vars, consts)
        .into_iter()
        .filter(|a| constraint_holds(&r.constraint, a))
        .map(|a| {
            (
                ground(&r.head, &a),
                r.updates.iter().map(|u| GroundUpdate { sign: u.sign, atom: ground(&u.atom, &a) }).collect(),
                r.body.iter().map(|l| (l.positive, ground(&l.atom, &a))).collect(),
            )
        })
        .collect()
}

fn same_rules(got: &[&Rule], want: &[Rule], consts: &[Const]) -> bool {
    let g: Vec<_> = got.iter().map(|r| rule_instances(r, consts)).collect();
    let w: Vec<_> = want.iter().map(|r| rule_instances(r, consts)).collect();
    g.len() == w.len() && g.iter().all(|x| w.contains(x)) && w.iter().all(|x| g.contains(x))
}

fn rules(text: &str) -> Vec<Rule> {
    parse_program(text).expect("rules parse").rules
}

const REM_1: &str = "rem_man(X,Y) :- -dep_A(Y), emp_man(X,Y).";
const REM_2: &str = "rem_man(X,Y) :- -dep_A(Y), emp_man(X,Z), emp_man(Z,Y).";
const REM_3: &str = "rem_man(X,Y) :- -dep_A(Y), emp_man(X,Z), emp_man(Z,W), emp_man(W,Y).";
const INS_1: &str = "ins_man(X) :- +dep_A(X), -dep_A(Y), emp_man(X,Y).";
const INS_2: &str = "ins_man(X) :- +dep_A(X), -dep_A(Y), emp_man(X,Z), emp_man(Z,Y).";
const INS_3: &str = "ins_man(X) :- +dep_A(X), -dep_A(Y), emp_man(X,Z), emp_man(Z,W), emp_man(W,Y).";

fn of_pred<'a>(rs: &'a [Rule], pred: &str) -> Vec<&'a Rule> {
    rs.iter().filter(|r| &*r.head.pred == pred).collect()
}

pub fn t_stable_goldens() -> Outcome {
    let db = dept();
    let two = Universe::of(&["a", "b"]);
    let pos = t_stable_pos(&db, &two, DEFAULT_UNFOLD_CAP, &mut db.fresh()).map_err(|e| e.to_string())?;
    let rem = of_pred(&pos, "rem_man");
    ensure!(same_rules(&rem, &rules(&format!("{REM_1} {REM_2}")), two.consts()), "rem_man over {{a,b}}: {}", show(&rem));

    let three = Universe::of(&["a", "b", "c"]);
    let pos = t_stable_pos(&db, &three, DEFAULT_UNFOLD_CAP, &mut db.fresh()).map_err(|e| e.to_string())?;
    let rem = of_pred(&pos, "rem_man");
    ensure!(same_rules(&rem, &rules(&format!("{REM_1} {REM_2} {REM_3}")), three.consts()), "rem_man over {{a,b,c}}: {}", show(&rem));
    let ins = of_pred(&pos, "ins_man");
    ensure!(same_rules(&ins, &rules(&format!("{INS_1} {INS_2} {INS_3}")), three.consts()), "ins_man over {{a,b,c}}: {}", show(&ins));
    let change = of_pred(&pos, "change_man");
    let original: Vec<Rule> = of_pred(&db.rules, "change_man").into_iter().cloned().collect();
    ensure!(same_rules(&change, &original, three.consts()), "change_man changed: {}", show(&change));
    Ok("2 rem_man rules over {a,b}; 3 rem_man, 3 ins_man, change_man unchanged over {a,b,c}".into())
}

fn show(rs: &[&Rule]) -> String {
    rs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------

fn relations(pred: &str, consts: &[Const]) -> Vec<GroundAtom> {
    tuples(2, consts).into_iter().map(|t| GroundAtom { pred: sym(pred), args: t }).collect()
}

fn subset(all: &[GroundAtom], mask: u32) -> BTreeSet<GroundAtom> {
    all.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, g)| g.clone()).collect()
}

fn eval(f: &QuantifiedFormula, assign: &BTreeMap<Var, Const>, u: &Universe, facts: &BTreeSet<GroundAtom>) -> bool {
    f.eval(assign, u, &mut |pos, g| pos == facts.contains(g))
}

pub fn negative_unfolding() -> Outcome {
    let u = Universe::of(&["a", "b", "c"]);
    let consts = u.consts().to_vec();
    let x = Var::new("X");

    let db = parse_program("#extensional f/2, q/2. p(X) :- X = a, f(X,Y), q(X,Y).").unwrap();
    let f = neg_c(&[(vec![Term::Var(x.clone())], db.rules.clone())], &u, &mut db.fresh());
    let fs = relations("f", &consts);
    let qs = relations("q", &consts);
    let mut rng = seeded(5);
    for _ in 0..3000 {
        let mut edb = subset(&fs, rng.gen());
        edb.extend(subset(&qs, rng.gen()));
        for k in &consts {
            let want = consts.iter().all(|y| k.name() != "a" || !edb.contains(&ga("f", &[k.name(), y.name()])) || !edb.contains(&ga("q", &[k.name(), y.name()])));
            let got = eval(&f, &BTreeMap::from([(x.clone(), k.clone())]), &u, &edb);
            ensure!(got == want, "neg_c disagrees at X={k} on {edb:?}: {f}");
        }
    }

    let db = dept();
    let out = compose(&db, &u, DEFAULT_UNFOLD_CAP, &mut db.fresh()).map_err(|e| e.to_string())?;
    let change = of_pred(&out, "change_man");
    ensure!(change.len() == 2, "{} change_man rules", change.len());
    let tailed: Vec<&&Rule> = change.iter().filter(|r| r.tail.is_some()).collect();
    ensure!(tailed.len() == 1, "{} change_man rules with tails", tailed.len());
    let r = tailed[0];
    let tail = r.tail.as_ref().unwrap();
    let head = r.head_vars()[0].clone();
    let free: Vec<Var> = tail.free_vars().into_iter().collect();
    let emp = relations("emp_man", &consts);
    for mask in 0u32..(1 << emp.len()) {
        let edb = subset(&emp, mask);
        for k in &consts {
            let want = consts.iter().all(|z| z == k || !edb.contains(&ga("emp_man", &[k.name(), z.name()])));
            // The tail's free variables are fixed by the head through the rule's constraint.
            let mut got = None;
            for mut a in all_assignments(&free, &consts) {
                a.insert(head.clone(), k.clone());
                if constraint_holds(&r.constraint, &a) {
                    let v = eval(tail, &a, &u, &edb);
                    ensure!(got.is_none() || got == Some(v), "tail not determined by the head");
                    got = Some(v);
                }
            }
            ensure!(got == Some(want), "tail {tail} gives {got:?} at X={k} on {edb:?}");
        }
    }
    Ok("Neg_c example and change_man tail match their closed forms".into())
}

// ---------------------------------------------------------------------------

pub fn composed_equals_direct(cases: u64) -> Outcome {
    let mut goals = 0;
    for seed in 0..cases {
        let case = random_case(seed);
        let u = case.db.universe();
        let rules = compose(&case.db, &u, DEFAULT_UNFOLD_CAP, &mut case.db.fresh()).map_err(|e| format!("seed {seed}: {e}"))?;
        let composed = with_rules(&case.db, rules, &u);
        for g in &case.goals {
            let direct = library_answers(&case.db, g);
            let via = library_answers(&composed, g);
            ensure!(direct == via, "seed {seed} goal {g}\n{}\ncomposed:\n{}", case.source, composed.to_source());
            goals += 1;
        }
    }
    Ok(format!("{cases} programs, {goals} goals"))
}

pub fn evaluator_equals_oracle(cases: u64) -> Outcome {
    let mut goals = 0;
    for seed in 0..cases {
        let case = random_case(seed);
        let u = case.db.universe();
        let model = ground_model(&case.db, u.consts()).ok_or(format!("seed {seed}: oracle found no stratification"))?;
        for g in &case.goals {
            ensure!(library_answers(&case.db, g) == model.answers(g), "seed {seed} goal {g}\n{}", case.source);
            goals += 1;
        }
        let strat = stratify(&case.db).map_err(|e| e.to_string())?;
        let fix = stratified_fixpoint(&case.db, &strat, &mut Ctx::for_db(&case.db));
        let exp = fix.fix().expansion();
        let positive = model.positive();
        for (p, info) in &case.db.preds {
            let pos = exp.get(&(p.clone(), true)).cloned().unwrap_or_default();
            ensure!(pos == positive.get(&**p).cloned().unwrap_or_default(), "seed {seed} pred {p}\n{}", case.source);
            let neg: BTreeSet<Vec<Const>> = exp.get(&(p.clone(), false)).map(|s| s.iter().map(|(t, _)| t.clone()).collect()).unwrap_or_default();
            ensure!(neg == model.negative(p, info.arity), "seed {seed} not {p}\n{}", case.source);
        }
    }
    Ok(format!("{cases} programs, {goals} goals, all predicates"))
}

// ---------------------------------------------------------------------------

pub fn stratification_independence(programs: u64) -> Outcome {
    let mut rng = seeded(8);
    for seed in 0..programs {
        let case = random_case(1000 + seed);
        let a = stratify(&case.db).map_err(|e| e.to_string())?;
        let b = stratify_with(&case.db, &mut || rng.gen_range(0..=2)).map_err(|e| e.to_string())?;
        a.validate(&case.db)?;
        b.validate(&case.db)?;
        let fa = stratified_fixpoint(&case.db, &a, &mut Ctx::for_db(&case.db));
        let fb = stratified_fixpoint(&case.db, &b, &mut Ctx::for_db(&case.db));
        ensure!(
            nonempty(&fa.fix().expansion()) == nonempty(&fb.fix().expansion()),
            "seed {seed}: fixpoints differ under {:?} and {:?}\n{}",
            a.levels,
            b.levels,
            case.source
        );
    }
    Ok(format!("{programs} programs, 2 stratifications each"))
}

pub fn update_order_independence(cases: u64) -> Outcome {
    let mut rng = seeded(9);
    let mut checked = 0;
    for seed in 0..cases {
        let case = random_case(seed);
        for g in &case.goals {
            let (_, out) = apply_transaction(g, &case.db, case.db.fresh()).map_err(|e| e.to_string())?;
            if !out.committed() {
                continue;
            }
            let mut steps: Vec<&GroundUpdate> = out.updates.iter().collect();
            for _ in 0..4 {
                steps.shuffle(&mut rng);
                let mut edb = case.db.facts.clone();
                for u in &steps {
                    match u.sign {
                        Sign::Insert => edb.insert(u.atom.clone()),
                        Sign::Delete => edb.remove(&u.atom),
                    };
                }
                ensure!(edb == out.new_edb, "seed {seed} goal {g}: order {steps:?} gives {edb:?}");
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} committed transactions, 4 orders each"))
}

/// Random programs whose goals are likely to abort: two rules demand
/// opposite updates of the same fact.
fn conflict_program(rng: &mut impl Rng) -> String {
    let consts = ["a", "b", "c"];
    let mut out = String::from("#extensional e/1, r/1.\n");
    for k in consts {
        if rng.gen_bool(0.5) {
            out.push_str(&format!("e({k}). "));
        }
        if rng.gen_bool(0.7) {
            out.push_str(&format!("r({k}). "));
        }
    }
    let t = consts[rng.gen_range(0..3)];
    out.push_str(&format!("\np(X) :- r(X), X != {t}, +e({t}).\np(X) :- r(X), -e({}).\n", consts[rng.gen_range(0..3)]));
    out
}

pub fn abort_keeps_edb() -> Outcome {
    let mut rng = seeded(10);
    let mut aborts = 0;
    for seed in 0..200u64 {
        let (db, goals) = if seed % 2 == 0 {
            let case = random_case(seed);
            (case.db, case.goals)
        } else {
            (parse_program(&conflict_program(&mut rng)).unwrap(), vec![parse_goal("p(X)").unwrap()])
        };
        for g in &goals {
            let before = edb_to_string(&db.facts, &db.domain);
            let mut after = db.clone();
            let out = execute(&mut after, g, db.fresh(), &mut |_| Ok(())).map_err(|e| e.to_string())?;
            if let Status::Abort(_) = out.status {
                ensure!(edb_to_string(&after.facts, &after.domain) == before, "seed {seed} goal {g}: EDB changed on abort");
                ensure!(out.new_edb == db.facts, "seed {seed} goal {g}: abort reports a new EDB");
                aborts += 1;
            }
        }
    }
    ensure!(aborts >= 20, "only {aborts} aborts exercised");
    Ok(format!("{aborts} aborts, EDB text unchanged"))
}

pub fn admissible_goals_are_ground(cases: u64) -> Outcome {
    let mut checked = 0;
    for seed in 0..cases {
        let case = random_case(seed);
        for g in &case.goals {
            if !check_admissible(&case.db, g).is_ok() {
                continue;
            }
            let (marking, out) = apply_transaction(g, &case.db, case.db.fresh()).map_err(|e| e.to_string())?;
            ensure!(out.status != Status::Abort(AbortReason::NonGround), "seed {seed} goal {g}: non-ground updates");
            for s in &marking.solutions {
                ensure!(s.updates.iter().all(|u| u.to_ground().is_some()), "seed {seed} goal {g}: {:?}", s.updates);
            }
            checked += 1;
        }
    }
    ensure!(checked > 0, "no admissible goals");
    Ok(format!("{checked} admissible goals"))
}

pub fn constraint_ops(cases: usize) -> Outcome {
    let mut rng = seeded(11);
    let names = ["a", "b", "c", "d"];
    for case in 0..cases {
        let consts: Vec<Const> = names[..rng.gen_range(1..=4)].iter().map(|n| c(n)).collect();
        let u = Universe::new(consts.clone());
        let vars: Vec<Var> = ["X", "Y", "Z"][..rng.gen_range(1..=3)].iter().map(|v| Var::new(v)).collect();
        let c1 = random_constraint(&mut rng, &vars, &consts);
        let c2 = random_constraint(&mut rng, &vars, &consts);
        let all = all_assignments(&vars, &consts);
        let ctx = || format!("case {case}: {c1:?} / {c2:?} over {consts:?}");

        ensure!(c1.solvable(&u) == all.iter().any(|a| constraint_holds(&c1, a)), "solvable, {}", ctx());
        let n = c1.neg(&u);
        ensure!(all.iter().all(|a| holds_any(&n, a) != constraint_holds(&c1, a)), "neg, {}", ctx());
        let both = c1.and(&c2);
        ensure!(all.iter().all(|a| constraint_holds(&both, a) == (constraint_holds(&c1, a) && constraint_holds(&c2, a))), "and, {}", ctx());
        let implied = all.iter().all(|a| !constraint_holds(&c1, a) || constraint_holds(&c2, a));
        ensure!(c1.entails(&c2, &u) == implied, "entails, {}", ctx());

        let keep: BTreeSet<Var> = vars.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
        let p = c1.project(&keep, &u);
        ensure!(p.iter().all(|d| d.vars().is_subset(&keep)), "project leaks variables, {}", ctx());
        let kept: Vec<Var> = keep.iter().cloned().collect();
        for a in all_assignments(&kept, &consts) {
            let extends = all.iter().any(|b| kept.iter().all(|v| a[v] == b[v]) && constraint_holds(&c1, b));
            ensure!(holds_any(&p, &a) == extends, "project onto {keep:?}, {}", ctx());
        }

        let ups: Vec<UpdateAtom> = (0..rng.gen_range(1..=4))
            .map(|_| {
                let mut arg = || {
                    if rng.gen_bool(0.5) {
                        Term::Var(vars.choose(&mut rng).unwrap().clone())
                    } else {
                        Term::Const(consts.choose(&mut rng).unwrap().clone())
                    }
                };
                let atom = Atom::new("p", vec![arg(), arg()]);
                if rng.gen_bool(0.5) {
                    UpdateAtom::insert(atom)
                } else {
                    UpdateAtom::delete(atom)
                }
            })
            .collect();
        let ground_ok = |a: &BTreeMap<Var, Const>| {
            let g: BTreeSet<GroundUpdate> = ups.iter().map(|u| GroundUpdate { sign: u.sign, atom: ground(&u.atom, a) }).collect();
            updates_consistent(&g)
        };
        let s = sol(&ups, &u);
        ensure!(all.iter().all(|a| holds_any(&s, a) == ground_ok(a)), "sol {ups:?}, {}", ctx());
        let want = all.iter().any(|a| constraint_holds(&c1, a) && ground_ok(a));
        ensure!(consistent(&c1, &ups, &u) == want, "consistent {ups:?}, {}", ctx());
    }
    Ok(format!("{cases} random cases: solvable, neg, and, entails, project, sol, consistent"))
}

pub fn properties() -> Outcome {
    let parts = [
        stratification_independence(50)?,
        update_order_independence(200)?,
        abort_keeps_edb()?,
        admissible_goals_are_ground(200)?,
        constraint_ops(1000)?,
    ];
    Ok(parts.join("; "))
}
