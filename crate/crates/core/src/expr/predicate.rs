use std::fmt;

use super::{ExprError, Expression};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparison {
    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            Comparison::Lt => a < b,
            Comparison::Le => a <= b,
            Comparison::Gt => a > b,
            Comparison::Ge => a >= b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
        }
    }
}

/// Domain guard: comparisons of expressions combined with `and` / `or`.
#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Compare(Expression, Comparison, Expression),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    pub fn eval(&self, z: &[f64]) -> Result<bool, ExprError> {
        Ok(match self {
            Predicate::Compare(a, op, b) => op.holds(a.eval(z)?, b.eval(z)?),
            Predicate::And(a, b) => a.eval(z)? && b.eval(z)?,
            Predicate::Or(a, b) => a.eval(z)? || b.eval(z)?,
        })
    }

    /// Conjunction of two guards.
    pub fn and(self, other: Predicate) -> Predicate {
        Predicate::And(Box::new(self), Box::new(other))
    }

    pub fn reindex(&self, map: &[usize], arity: usize) -> Result<Predicate, ExprError> {
        Ok(match self {
            Predicate::Compare(a, op, b) => {
                Predicate::Compare(a.reindex(map, arity)?, *op, b.reindex(map, arity)?)
            }
            Predicate::And(a, b) => {
                Predicate::And(Box::new(a.reindex(map, arity)?), Box::new(b.reindex(map, arity)?))
            }
            Predicate::Or(a, b) => {
                Predicate::Or(Box::new(a.reindex(map, arity)?), Box::new(b.reindex(map, arity)?))
            }
        })
    }

    pub fn display_with<'a>(&'a self, names: &'a [String]) -> PredicateDisplay<'a> {
        PredicateDisplay { pred: self, names }
    }
}

pub struct PredicateDisplay<'a> {
    pred: &'a Predicate,
    names: &'a [String],
}

impl<'a> fmt::Display for PredicateDisplay<'a> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |p: &'a Predicate| PredicateDisplay {
            pred: p,
            names: self.names,
        };
        match self.pred {
            Predicate::Compare(a, op, b) => write!(
                f,
                "{} {} {}",
                a.display_with(self.names),
                op.symbol(),
                b.display_with(self.names)
            ),
            Predicate::And(a, b) => {
                // `or` inside `and` needs parentheses
                let wrap = |p: &Predicate| matches!(p, Predicate::Or(..));
                for (i, p) in [a, b].into_iter().enumerate() {
                    let p: &'a Predicate = p;
                    if i == 1 {
                        f.write_str(" and ")?;
                    }
                    if wrap(p) {
                        write!(f, "({})", sub(p))?;
                    } else {
                        write!(f, "{}", sub(p))?;
                    }
                }
                Ok(())
            }
            Predicate::Or(a, b) => write!(f, "{} or {}", sub(a), sub(b)),
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::{parse_predicate, Predicate};

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn kepler_energy_guard() {
        let n = names(&["q1", "q2", "p1", "p2"]);
        let p = parse_predicate("(p1^2+p2^2)/2 - 1/sqrt(q1^2+q2^2) < 0", &n).unwrap();
        // H = 0.125 - 1 = -0.875
        assert!(p.eval(&[1.0, 0.0, 0.0, 0.5]).unwrap());
    }

    #[test]
    fn strict_comparison_at_boundary() {
        let n = names(&["x"]);
        let p = parse_predicate("x > 0", &n).unwrap();
        assert!(!p.eval(&[0.0]).unwrap());
    }

    #[test]
    fn conjunction() {
        let n = names(&["x"]);
        let p = parse_predicate("x>0 and x<1", &n).unwrap();
        assert!(p.eval(&[0.5]).unwrap());
        assert!(!p.eval(&[1.5]).unwrap());
    }

    #[test]
    fn guard_errors_propagate() {
        let n = names(&["x"]);
        let p = parse_predicate("ln(x) < 1", &n).unwrap();
        assert!(p.eval(&[-1.0]).is_err());
    }

    #[test]
    fn display_round_trips() {
        let n = names(&["x", "y"]);
        for src in ["x > 0 and (y < 1 or y > 2)", "x < 0 or y >= 1 and x <= 3"] {
            let p = parse_predicate(src, &n).unwrap();
            let printed = p.display_with(&n).to_string();
            let q: Predicate = parse_predicate(&printed, &n).unwrap();
            assert_eq!(p, q, "{printed}");
        }
    }
}
