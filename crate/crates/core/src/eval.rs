//! Bottom-up marking phase: stratified fixpoint, complements and answers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::analysis::{stratify, Stratification};
use crate::constraint::{consistent, neg_disjunction, sol, Constraint, Universe};
use crate::error::Result;
use crate::formula::QuantifiedFormula;
use crate::interp::{ConstrainedLiteral, Instance, Interpretation};
use crate::program::{Database, Goal, Rule};
use crate::term::{dedup_updates, ground_updates_consistent, Const, Fresh, GroundUpdate, Literal, Sym, Term, UpdateAtom, Var};

/// Shared evaluation context: the universe and the fresh-name source.
pub struct Ctx {
    pub universe: Universe,
    pub fresh: Fresh,
}

impl Ctx {
    pub fn new(universe: Universe, fresh: Fresh) -> Self {
        Ctx { universe, fresh }
    }

    pub fn for_db(db: &Database) -> Self {
        Ctx::new(db.universe(), db.fresh())
    }
}

/// The parts of a rule body or goal that evaluation looks at.
#[derive(Clone, Copy)]
pub struct Body<'a> {
    pub constraint: &'a Constraint,
    pub updates: &'a [UpdateAtom],
    pub literals: &'a [Literal],
    pub tail: Option<&'a QuantifiedFormula>,
}

impl<'a> From<&'a Rule> for Body<'a> {
    fn from(r: &'a Rule) -> Self {
        Body {
            constraint: &r.constraint,
            updates: &r.updates,
            literals: &r.body,
            tail: r.tail.as_ref(),
        }
    }
}

impl<'a> From<&'a Goal> for Body<'a> {
    fn from(g: &'a Goal) -> Self {
        Body {
            constraint: &g.constraint,
            updates: &g.updates,
            literals: &g.body,
            tail: None,
        }
    }
}

/// Answer constraints of a body in `interp`: each combination of stored
/// literals matching the body literals, with H-solvable constraint and
/// updates. Free tail variables are assigned universe constants and the
/// tail is checked against `interp`.
pub fn eval_body(body: Body<'_>, interp: &Interpretation, ctx: &mut Ctx) -> Vec<(Constraint, Vec<UpdateAtom>)> {
    let mut out = Vec::new();
    if !body.constraint.solvable(&ctx.universe) {
        return out;
    }
    join(body, 0, body.constraint.clone(), body.updates.to_vec(), interp, ctx, &mut out);
    out
}

fn join(
    body: Body<'_>,
    i: usize,
    c: Constraint,
    updates: Vec<UpdateAtom>,
    interp: &Interpretation,
    ctx: &mut Ctx,
    out: &mut Vec<(Constraint, Vec<UpdateAtom>)>,
) {
    let Some(lit) = body.literals.get(i) else {
        finish(body, c, updates, interp, ctx, out);
        return;
    };
    for stored in interp.literals(&lit.atom.pred, lit.positive) {
        let (c2, u2) = stored.instantiate(&lit.atom.args, &mut ctx.fresh);
        let next = c.and(&c2);
        if !next.solvable(&ctx.universe) {
            continue;
        }
        let mut ups = updates.clone();
        if !u2.is_empty() {
            ups.extend(u2);
            if !consistent(&next, &ups, &ctx.universe) {
                continue;
            }
        }
        join(body, i + 1, next, ups, interp, ctx, out);
    }
}

fn finish(
    body: Body<'_>,
    c: Constraint,
    updates: Vec<UpdateAtom>,
    interp: &Interpretation,
    ctx: &mut Ctx,
    out: &mut Vec<(Constraint, Vec<UpdateAtom>)>,
) {
    let Some(tail) = body.tail else {
        if consistent(&c, &updates, &ctx.universe) {
            out.push((c, updates));
        }
        return;
    };
    let free: Vec<Var> = tail.free_vars().into_iter().collect();
    let universe = ctx.universe.clone();
    c.for_each_assignment(&free, &universe, &mut |a| {
        let mut ca = c.clone();
        for (v, k) in a {
            ca.add_eq(&Term::Var(v.clone()), &Term::Const(k.clone()));
        }
        if consistent(&ca, &updates, &universe) && tail.eval(a, &universe, &mut |pos, g| interp.holds(pos, g)) {
            out.push((ca, updates.clone()));
        }
        true
    });
}

/// Constrained literals a rule derives from one body answer.
fn derive(rule: &Rule, c: &Constraint, updates: &[UpdateAtom], universe: &Universe) -> Vec<ConstrainedLiteral> {
    let mut ups = c.apply_updates(updates);
    dedup_updates(&mut ups);
    let head = rule.head_vars();
    let mut keep: BTreeSet<Var> = head.iter().cloned().collect();
    for u in &ups {
        keep.extend(u.atom.vars().cloned());
    }
    let mut out = Vec::new();
    for d in c.project(&keep, universe) {
        let mut du = d.apply_updates(&ups);
        dedup_updates(&mut du);
        if consistent(&d, &du, universe) {
            out.push(ConstrainedLiteral {
                positive: true,
                pred: rule.head.pred.clone(),
                head: head.clone(),
                constraint: d,
                updates: du,
            });
        }
    }
    out
}

/// All literals the rules derive in one application over `interp`.
pub fn derivations(rules: &[&Rule], interp: &Interpretation, ctx: &mut Ctx) -> Vec<ConstrainedLiteral> {
    let mut out = Vec::new();
    for r in rules {
        for (c, u) in eval_body(Body::from(*r), interp, ctx) {
            out.extend(derive(r, &c, &u, &ctx.universe));
        }
    }
    out
}

/// One application of the immediate-consequence operator; the result
/// includes `interp`.
pub fn tp_step(rules: &[&Rule], interp: &Interpretation, ctx: &mut Ctx) -> Interpretation {
    let mut next = interp.clone();
    for l in derivations(rules, interp, ctx) {
        next.insert(l, &ctx.universe);
    }
    next
}

/// Complement literals for `preds` (with their arities) given the closed
/// positive part in `interp`.
pub fn comp(interp: &Interpretation, preds: &BTreeMap<Sym, usize>, ctx: &mut Ctx) -> Vec<ConstrainedLiteral> {
    let mut out = Vec::new();
    for (p, &arity) in preds {
        let head: Vec<Var> = (0..arity).map(|_| ctx.fresh.var()).collect();
        let args: Vec<Term> = head.iter().cloned().map(Term::Var).collect();
        let keep: BTreeSet<Var> = head.iter().cloned().collect();
        let mut covered = Vec::new();
        for l in interp.literals(p, true) {
            let (c, u) = l.instantiate(&args, &mut ctx.fresh);
            let u = c.apply_updates(&u);
            for s in sol(&u, &ctx.universe) {
                let cs = c.and(&s);
                if cs.solvable(&ctx.universe) {
                    covered.extend(cs.project(&keep, &ctx.universe));
                }
            }
        }
        for d in neg_disjunction(&covered, &ctx.universe) {
            out.push(ConstrainedLiteral {
                positive: false,
                pred: p.clone(),
                head: head.clone(),
                constraint: d,
                updates: Vec::new(),
            });
        }
    }
    out
}

/// Snapshots `M₁ … Mₙ` and per-stratum iteration counts.
#[derive(Clone)]
pub struct FixpointResult {
    pub strata: Vec<Interpretation>,
    pub iterations: Vec<usize>,
}

impl FixpointResult {
    pub fn fix(&self) -> &Interpretation {
        self.strata.last().expect("at least one stratum")
    }
}

/// Stratum-by-stratum fixpoint with one complement step per stratum.
pub fn stratified_fixpoint(db: &Database, strat: &Stratification, ctx: &mut Ctx) -> FixpointResult {
    let mut interp = Interpretation::new();
    for f in &db.facts {
        let l = ConstrainedLiteral::fact(f, &mut ctx.fresh);
        interp.insert(l, &ctx.universe);
    }
    let strata = strat.strata(&db.rules);
    let mut result = FixpointResult {
        strata: Vec::new(),
        iterations: Vec::new(),
    };
    for (level, rules) in strata.iter().enumerate() {
        let mut rounds = 0;
        loop {
            rounds += 1;
            let mut changed = false;
            for l in derivations(rules, &interp, ctx) {
                changed |= interp.insert(l, &ctx.universe);
            }
            if !changed {
                break;
            }
        }
        let preds: BTreeMap<Sym, usize> = strat
            .preds_at(level)
            .into_iter()
            .filter_map(|p| db.arity(&p).map(|n| (p, n)))
            .collect();
        for l in comp(&interp, &preds, ctx) {
            interp.insert(l, &ctx.universe);
        }
        result.iterations.push(rounds);
        result.strata.push(interp.clone());
    }
    result
}

/// One answer constraint of a goal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Solution {
    /// Over the goal's answer variables and any variables left in `updates`.
    pub constraint: Constraint,
    pub updates: Vec<UpdateAtom>,
}

impl Solution {
    pub fn is_ground(&self) -> bool {
        self.updates.iter().all(UpdateAtom::is_ground)
    }

    /// Ground instances: values of `vars` and the ground update set.
    pub fn instances(&self, vars: &[Var], universe: &Universe) -> BTreeSet<Instance> {
        let mut all = vars.to_vec();
        for u in &self.updates {
            for v in u.atom.vars() {
                if !all.contains(v) {
                    all.push(v.clone());
                }
            }
        }
        let mut out = BTreeSet::new();
        self.constraint.for_each_assignment(&all, universe, &mut |a| {
            let ups: BTreeSet<GroundUpdate> = self
                .updates
                .iter()
                .filter_map(|u| {
                    u.map_terms(&mut |t| match t {
                        Term::Var(v) => Term::Const(a[v].clone()),
                        c => c.clone(),
                    })
                    .to_ground()
                })
                .collect();
            if ground_updates_consistent(&ups) {
                out.insert((vars.iter().map(|v| a[v].clone()).collect::<Vec<Const>>(), ups));
            }
            true
        });
        out
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constraint)
    }
}

/// Answer constraints of `goal` in a fixpoint.
pub fn answers(goal: &Goal, fix: &Interpretation, ctx: &mut Ctx) -> Vec<Solution> {
    ctx.fresh.bump_past(goal.vars().iter());
    let answer_vars = goal.answer_vars();
    let mut out = BTreeSet::new();
    for (c, u) in eval_body(Body::from(goal), fix, ctx) {
        let mut ups = c.apply_updates(&u);
        dedup_updates(&mut ups);
        let mut keep: BTreeSet<Var> = answer_vars.iter().cloned().collect();
        for x in &ups {
            keep.extend(x.atom.vars().cloned());
        }
        for d in c.project(&keep, &ctx.universe) {
            let mut du = d.apply_updates(&ups);
            dedup_updates(&mut du);
            if consistent(&d, &du, &ctx.universe) {
                out.insert(Solution {
                    constraint: d,
                    updates: du,
                });
            }
        }
    }
    out.into_iter().collect()
}

/// Union of the ground instances of a solution set.
pub fn answer_instances(solutions: &[Solution], vars: &[Var], universe: &Universe) -> BTreeSet<Instance> {
    solutions.iter().flat_map(|s| s.instances(vars, universe)).collect()
}

/// Everything the marking phase produces for one goal.
pub struct Marking {
    pub strat: Stratification,
    pub fixpoint: FixpointResult,
    pub solutions: Vec<Solution>,
    pub universe: Universe,
}

/// Stratifies, evaluates and answers `goal`. The universe is extended with
/// the goal's constants.
pub fn mark(db: &Database, goal: &Goal, fresh: Fresh) -> Result<Marking> {
    db.check_goal(goal)?;
    let strat = stratify(db)?;
    let universe = db.universe_for(goal);
    let mut ctx = Ctx::new(universe.clone(), fresh);
    ctx.fresh.bump_past(db.rules.iter().flat_map(|r| r.all_vars()).collect::<Vec<_>>().iter());
    ctx.fresh.bump_past(goal.vars().iter());
    let fixpoint = stratified_fixpoint(db, &strat, &mut ctx);
    let solutions = answers(goal, fixpoint.fix(), &mut ctx);
    Ok(Marking {
        strat,
        fixpoint,
        solutions,
        universe,
    })
}
