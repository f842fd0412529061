//! Syntactic objects shared by every part of the interpreter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Interned-ish name. Cheap to clone, compared by content.
pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(pub Sym);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(sym(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Const(pub Sym);

impl Const {
    pub fn new(name: &str) -> Self {
        Const(sym(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

/// A Datalog term. There are no function symbols.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Const(Const),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Var::new(name))
    }

    pub fn constant(name: &str) -> Self {
        Term::Const(Const::new(name))
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn as_const(&self) -> Option<&Const> {
        match self {
            Term::Const(c) => Some(c),
            Term::Var(_) => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, Term::Const(_))
    }
}

impl From<Var> for Term {
    fn from(v: Var) -> Self {
        Term::Var(v)
    }
}

impl From<Const> for Term {
    fn from(c: Const) -> Self {
        Term::Const(c)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: Sym,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Term>) -> Self {
        Atom { pred: sym(pred), args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.args.iter().filter_map(Term::as_var)
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|t| f(t)).collect(),
        }
    }

    /// Grounds the atom; `None` if some argument is still a variable.
    pub fn to_ground(&self) -> Option<GroundAtom> {
        let args = self
            .args
            .iter()
            .map(|t| t.as_const().cloned())
            .collect::<Option<Vec<_>>>()?;
        Some(GroundAtom {
            pred: self.pred.clone(),
            args,
        })
    }
}

/// A ground extensional fact.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub pred: Sym,
    pub args: Vec<Const>,
}

impl GroundAtom {
    pub fn new(pred: &str, args: &[&str]) -> Self {
        GroundAtom {
            pred: sym(pred),
            args: args.iter().map(|a| Const::new(a)).collect(),
        }
    }

    pub fn to_atom(&self) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().cloned().map(Term::Const).collect(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub positive: bool,
    pub atom: Atom,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            positive: true,
            atom,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            positive: false,
            atom,
        }
    }

    pub fn negated(&self) -> Self {
        Literal {
            positive: !self.positive,
            atom: self.atom.clone(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Sign {
    Insert,
    Delete,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Insert => '+',
            Sign::Delete => '-',
        }
    }
}

/// `+p(t)` or `-p(t)` on an extensional predicate.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UpdateAtom {
    pub sign: Sign,
    pub atom: Atom,
}

impl UpdateAtom {
    pub fn insert(atom: Atom) -> Self {
        UpdateAtom {
            sign: Sign::Insert,
            atom,
        }
    }

    pub fn delete(atom: Atom) -> Self {
        UpdateAtom {
            sign: Sign::Delete,
            atom,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.atom.is_ground()
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> UpdateAtom {
        UpdateAtom {
            sign: self.sign,
            atom: self.atom.map_terms(f),
        }
    }

    pub fn to_ground(&self) -> Option<GroundUpdate> {
        Some(GroundUpdate {
            sign: self.sign,
            atom: self.atom.to_ground()?,
        })
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundUpdate {
    pub sign: Sign,
    pub atom: GroundAtom,
}

impl GroundUpdate {
    pub fn to_update(&self) -> UpdateAtom {
        UpdateAtom {
            sign: self.sign,
            atom: self.atom.to_atom(),
        }
    }
}

/// True when no fact is both inserted and deleted.
pub fn ground_updates_consistent(updates: &BTreeSet<GroundUpdate>) -> bool {
    updates.iter().all(|u| {
        u.sign == Sign::Delete
            || !updates.contains(&GroundUpdate {
                sign: Sign::Delete,
                atom: u.atom.clone(),
            })
    })
}

/// Sorts and removes syntactic duplicates.
pub fn dedup_updates(updates: &mut Vec<UpdateAtom>) {
    updates.sort();
    updates.dedup();
}

/// Source of fresh variable names. One per evaluation session.
#[derive(Clone, Debug)]
pub struct Fresh {
    next: u64,
}

pub const FRESH_PREFIX: &str = "_G";

impl Default for Fresh {
    fn default() -> Self {
        Fresh::new(1)
    }
}

impl Fresh {
    pub fn new(start: u64) -> Self {
        Fresh { next: start }
    }

    /// Reservoir that will never reissue a `_G<n>` name already in use.
    pub fn avoiding<'a>(names: impl IntoIterator<Item = &'a Var>) -> Self {
        let mut next = 1;
        for v in names {
            if let Some(n) = v
                .name()
                .strip_prefix(FRESH_PREFIX)
                .and_then(|s| s.parse::<u64>().ok())
            {
                next = next.max(n + 1);
            }
        }
        Fresh { next }
    }

    pub fn bump_past<'a>(&mut self, names: impl IntoIterator<Item = &'a Var>) {
        let other = Fresh::avoiding(names);
        self.next = self.next.max(other.next);
    }

    pub fn var(&mut self) -> Var {
        let v = Var(sym(&format!("{FRESH_PREFIX}{}", self.next)));
        self.next += 1;
        v
    }
}

/// Variable renaming used when instantiating stored objects.
pub type Renaming = BTreeMap<Var, Var>;

pub fn rename_term(t: &Term, map: &Renaming) -> Term {
    match t {
        Term::Var(v) => Term::Var(map.get(v).cloned().unwrap_or_else(|| v.clone())),
        c => c.clone(),
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => v.fmt(f),
            Term::Const(c) => c.fmt(f),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn write_args<T: fmt::Display>(f: &mut fmt::Formatter<'_>, pred: &str, args: &[T]) -> fmt::Result {
    f.write_str(pred)?;
    if !args.is_empty() {
        f.write_str("(")?;
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_args(f, &self.pred, &self.args)
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_args(f, &self.pred, &self.args)
    }
}

impl fmt::Debug for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.positive {
            f.write_str("not ")?;
        }
        self.atom.fmt(f)
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for UpdateAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sign.symbol(), self.atom)
    }
}

impl fmt::Debug for UpdateAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for GroundUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.sign.symbol(), self.atom)
    }
}

impl fmt::Debug for GroundUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
