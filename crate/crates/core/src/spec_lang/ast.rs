use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// A named, total boolean function over decoded environment states.
pub struct AtomicPredicate {
    name: String,
    /// `Some(b)` for the built-in constants `true`/`false`.
    constant: Option<bool>,
    eval: Box<dyn Fn(&[u8]) -> bool + Send + Sync>,
}

impl AtomicPredicate {
    pub fn new(name: &str, eval: impl Fn(&[u8]) -> bool + Send + Sync + 'static) -> Self {
        AtomicPredicate { name: name.to_string(), constant: None, eval: Box::new(eval) }
    }

    pub fn constant(value: bool) -> Self {
        AtomicPredicate {
            name: if value { "true" } else { "false" }.to_string(),
            constant: Some(value),
            eval: Box::new(move |_| value),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn as_constant(&self) -> Option<bool> {
        self.constant
    }

    pub fn eval(&self, state: &[u8]) -> bool {
        (self.eval)(state)
    }
}

impl fmt::Debug for AtomicPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Name-indexed set of atomic predicates available to the parser.
/// Always contains the constants `true` and `false`.
#[derive(Clone, Debug)]
pub struct PredicateTable {
    atoms: BTreeMap<String, Arc<AtomicPredicate>>,
}

impl PredicateTable {
    pub fn new(mut atoms: BTreeMap<String, Arc<AtomicPredicate>>) -> Self {
        atoms
            .entry("true".into())
            .or_insert_with(|| Arc::new(AtomicPredicate::constant(true)));
        atoms
            .entry("false".into())
            .or_insert_with(|| Arc::new(AtomicPredicate::constant(false)));
        PredicateTable { atoms }
    }

    pub fn empty() -> Self {
        Self::new(BTreeMap::new())
    }

    pub fn insert(&mut self, pred: AtomicPredicate) {
        self.atoms.insert(pred.name().to_string(), Arc::new(pred));
    }

    pub fn get(&self, name: &str) -> Option<&Arc<AtomicPredicate>> {
        self.atoms.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.atoms.keys().map(|s| s.as_str())
    }
}

/// Boolean combination of atomic predicates (no negation at this level;
/// environments expose negated atoms where needed).
#[derive(Clone, Debug)]
pub enum Predicate {
    Atom(Arc<AtomicPredicate>),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn always_true() -> Self {
        Predicate::Atom(Arc::new(AtomicPredicate::constant(true)))
    }

    pub fn atom(p: Arc<AtomicPredicate>) -> Self {
        Predicate::Atom(p)
    }

    pub fn and(self, other: Predicate) -> Predicate {
        Predicate::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Predicate) -> Predicate {
        Predicate::Or(Box::new(self), Box::new(other))
    }

    pub fn eval(&self, state: &[u8]) -> bool {
        match self {
            Predicate::Atom(a) => a.eval(state),
            Predicate::And(l, r) => l.eval(state) && r.eval(state),
            Predicate::Or(l, r) => l.eval(state) || r.eval(state),
        }
    }

    /// Is this syntactically the constant `true`?
    pub fn is_const_true(&self) -> bool {
        matches!(self, Predicate::Atom(a) if a.as_constant() == Some(true))
    }

    /// Node count (atoms and connectives each count one).
    pub fn size(&self) -> usize {
        match self {
            Predicate::Atom(_) => 1,
            Predicate::And(l, r) | Predicate::Or(l, r) => 1 + l.size() + r.size(),
        }
    }

    /// Distinct non-constant atom names, in first-appearance order.
    pub fn collect_atoms(&self, out: &mut Vec<Arc<AtomicPredicate>>) {
        match self {
            Predicate::Atom(a) => {
                if a.as_constant().is_none() && !out.iter().any(|x| x.name() == a.name()) {
                    out.push(a.clone());
                }
            }
            Predicate::And(l, r) | Predicate::Or(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Atom(a) => write!(f, "{}", a.name()),
            Predicate::And(l, r) => {
                fmt_pred_operand(f, l, PredPrec::And, false)?;
                write!(f, " and ")?;
                fmt_pred_operand(f, r, PredPrec::And, true)
            }
            Predicate::Or(l, r) => {
                fmt_pred_operand(f, l, PredPrec::Or, false)?;
                write!(f, " or ")?;
                fmt_pred_operand(f, r, PredPrec::Or, true)
            }
        }
    }
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum PredPrec {
    Or,
    And,
}

fn fmt_pred_operand(
    f: &mut fmt::Formatter<'_>,
    p: &Predicate,
    parent: PredPrec,
    right: bool,
) -> fmt::Result {
    // Parenthesize lower-precedence children, and right children at equal
    // precedence so the canonical form re-parses left-associatively.
    let needs = match (p, parent) {
        (Predicate::Or(..), PredPrec::And) => true,
        (Predicate::Or(..), PredPrec::Or) => right,
        (Predicate::And(..), PredPrec::And) => right,
        _ => false,
    };
    if needs {
        write!(f, "({p})")
    } else {
        write!(f, "{p}")
    }
}

/// Specification AST. `ensuring` binds tighter than `;`, which binds
/// tighter than `or`; all operators associate to the left.
#[derive(Clone, Debug)]
pub enum Spec {
    Achieve(Predicate),
    Ensuring(Box<Spec>, Predicate),
    Seq(Box<Spec>, Box<Spec>),
    Choice(Box<Spec>, Box<Spec>),
}

impl Spec {
    /// Operator node count (one per `achieve`/`ensuring`/`;`/`or`).
    pub fn op_count(&self) -> usize {
        match self {
            Spec::Achieve(_) => 1,
            Spec::Ensuring(inner, _) => 1 + inner.op_count(),
            Spec::Seq(a, b) | Spec::Choice(a, b) => 1 + a.op_count() + b.op_count(),
        }
    }

    /// Distinct non-constant atoms appearing anywhere in the spec.
    pub fn atoms(&self) -> Vec<Arc<AtomicPredicate>> {
        let mut out = Vec::new();
        self.walk_atoms(&mut out);
        out
    }

    fn walk_atoms(&self, out: &mut Vec<Arc<AtomicPredicate>>) {
        match self {
            Spec::Achieve(b) => b.collect_atoms(out),
            Spec::Ensuring(inner, b) => {
                inner.walk_atoms(out);
                b.collect_atoms(out);
            }
            Spec::Seq(a, b) | Spec::Choice(a, b) => {
                a.walk_atoms(out);
                b.walk_atoms(out);
            }
        }
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Copy)]
enum SpecPrec {
    Choice,
    Seq,
    Ensuring,
}

fn spec_prec(s: &Spec) -> SpecPrec {
    match s {
        Spec::Choice(..) => SpecPrec::Choice,
        Spec::Seq(..) => SpecPrec::Seq,
        Spec::Ensuring(..) | Spec::Achieve(_) => SpecPrec::Ensuring,
    }
}

fn fmt_spec_operand(
    f: &mut fmt::Formatter<'_>,
    s: &Spec,
    parent: SpecPrec,
    right: bool,
) -> fmt::Result {
    let prec = spec_prec(s);
    let needs = prec < parent || (prec == parent && right && !matches!(s, Spec::Achieve(_)));
    if needs {
        write!(f, "({s})")
    } else {
        write!(f, "{s}")
    }
}

impl fmt::Display for Spec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Spec::Achieve(b) => write!(f, "achieve {}", PredArg(b)),
            Spec::Ensuring(inner, b) => {
                fmt_spec_operand(f, inner, SpecPrec::Ensuring, false)?;
                write!(f, " ensuring {}", PredArg(b))
            }
            Spec::Seq(a, b) => {
                fmt_spec_operand(f, a, SpecPrec::Seq, false)?;
                write!(f, " ; ")?;
                fmt_spec_operand(f, b, SpecPrec::Seq, true)
            }
            Spec::Choice(a, b) => {
                fmt_spec_operand(f, a, SpecPrec::Choice, false)?;
                write!(f, " or ")?;
                fmt_spec_operand(f, b, SpecPrec::Choice, true)
            }
        }
    }
}

/// Predicate argument position of `achieve`/`ensuring`: non-atomic
/// predicates are parenthesized so `or` inside them cannot be read as
/// specification choice.
struct PredArg<'a>(&'a Predicate);

impl fmt::Display for PredArg<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Predicate::Atom(_) => write!(f, "{}", self.0),
            _ => write!(f, "({})", self.0),
        }
    }
}
