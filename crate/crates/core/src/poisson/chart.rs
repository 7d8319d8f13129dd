use crate::expr::{parse_predicate, validate_coordinates, Predicate};
use crate::{Error, Result};

/// Local coordinates with a sampling box and an optional domain guard.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    names: Vec<String>,
    bounds: Vec<(f64, f64)>,
    guard: Option<Predicate>,
}

impl Chart {
    pub fn new(names: Vec<String>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Chart("a chart needs at least one coordinate".into()));
        }
        validate_coordinates(&names)?;
        if bounds.len() != names.len() {
            return Err(Error::Dimension {
                expected: names.len(),
                got: bounds.len(),
            });
        }
        for (name, &(lo, hi)) in names.iter().zip(&bounds) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Chart(format!(
                    "interval [{lo}, {hi}] for `{name}` is empty or unbounded"
                )));
            }
        }
        Ok(Chart {
            names,
            bounds,
            guard: None,
        })
    }

    /// Chart named `prefix1 .. prefixN` on the box `[lo, hi]^n`.
    pub fn numbered(prefix: &str, n: usize, lo: f64, hi: f64) -> Result<Self> {
        Chart::new(
            (1..=n).map(|i| format!("{prefix}{i}")).collect(),
            vec![(lo, hi); n],
        )
    }

    pub fn with_guard(mut self, guard: Predicate) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn with_guard_text(self, text: &str) -> Result<Self> {
        let guard = parse_predicate(text, &self.names)?;
        Ok(self.with_guard(guard))
    }

    pub fn without_guard(mut self) -> Self {
        self.guard = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn guard(&self) -> Option<&Predicate> {
        self.guard.as_ref()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// True when `z` lies in the box and satisfies the guard. A guard that
    /// cannot be evaluated at `z` rejects it.
    pub fn admits(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && z.iter()
                .zip(&self.bounds)
                .all(|(v, &(lo, hi))| v.is_finite() && (lo..=hi).contains(v))
            && self.satisfies_guard(z)
    }

    /// Guard only, ignoring the box.
    pub fn satisfies_guard(&self, z: &[f64]) -> bool {
        match &self.guard {
            None => true,
            Some(g) => g.eval(z).unwrap_or(false),
        }
    }

    pub fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Product chart. Names of `other` that clash with names of `self` get a
    /// numeric suffix (`x` becomes `x_2`, then `x_3`, ...). Guards are
    /// combined with `and`.
    pub fn product(&self, other: &Chart) -> Result<Chart> {
        let mut names = self.names.clone();
        for name in &other.names {
            let mut candidate = name.clone();
            let mut suffix = 2;
            while names.contains(&candidate) {
                candidate = format!("{name}_{suffix}");
                suffix += 1;
            }
            names.push(candidate);
        }
        let mut bounds = self.bounds.clone();
        bounds.extend_from_slice(&other.bounds);
        let n = names.len();
        let first: Vec<usize> = (0..self.dim()).collect();
        let second: Vec<usize> = (self.dim()..n).collect();
        let guard = match (&self.guard, &other.guard) {
            (None, None) => None,
            (Some(a), None) => Some(a.reindex(&first, n)?),
            (None, Some(b)) => Some(b.reindex(&second, n)?),
            (Some(a), Some(b)) => Some(a.reindex(&first, n)?.and(b.reindex(&second, n)?)),
        };
        let mut chart = Chart::new(names, bounds)?;
        chart.guard = guard;
        Ok(chart)
    }
}
