//! JSON system and map descriptions shared by the command-line tool and the
//! built-in catalog.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::expr::{parse, Expression, Node};
use crate::integrability::{GeneratingSet, SystemKind};
use crate::liealg::{lie_poisson, StructureConstants};
use crate::poisson::{Chart, PoissonStructure, TwoForm, UpperEntries};
use crate::transform::ChartMap;
use crate::{Error, Result};

/// Half-width of the default target box of a map file.
pub const DEFAULT_TARGET_HALF_WIDTH: f64 = 1e6;

/// A system description: chart, Poisson structure, named functions and the
/// generating set to classify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpecFile {
    pub dimension: usize,
    pub coordinates: Vec<String>,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<String>,
    pub poisson: PoissonSpec,
    pub functions: BTreeMap<String, String>,
    pub system: SystemSection,
}

/// Poisson structure payload. Entry keys are `"i,j"` with 0-based indices or
/// coordinate names; a key with `i > j` stores the negated entry at `(j, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PoissonSpec {
    Canonical {
        pairs: usize,
        #[serde(default)]
        extra: usize,
        /// `order[slot]` is the coordinate index holding canonical slot `slot`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<Vec<usize>>,
    },
    Matrix {
        upper_entries: BTreeMap<String, String>,
    },
    LiePoisson {
        structure_constants: Vec<Vec<Vec<f64>>>,
    },
    SymplecticInverse {
        form_upper_entries: BTreeMap<String, String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub kind: String,
    pub generators: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invariants_pool: Vec<String>,
    /// Expressions in `x1, ..., xk`, one variable per generator.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coinduced_casimirs: Vec<String>,
}

/// A loaded system.
#[derive(Debug, Clone)]
pub struct System {
    pub structure: PoissonStructure,
    pub functions: BTreeMap<String, Expression>,
    pub set: GeneratingSet,
}

impl System {
    pub fn function(&self, name: &str) -> Result<&Expression> {
        self.functions
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("no function named `{name}`")))
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Invalid(format!("cannot read {}: {e}", path.display())))
}

impl SystemSpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("malformed system spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        SystemSpecFile::from_json(&read(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system specs serialize")
    }

    pub fn chart(&self) -> Result<Chart> {
        if self.dimension != self.coordinates.len() {
            return Err(Error::Invalid(format!(
                "dimension {} but {} coordinates",
                self.dimension,
                self.coordinates.len()
            )));
        }
        let chart = Chart::new(
            self.coordinates.clone(),
            self.bounds.iter().map(|b| (b[0], b[1])).collect(),
        )?;
        match &self.guard {
            Some(g) => chart.with_guard_text(g),
            None => Ok(chart),
        }
    }

    pub fn structure(&self) -> Result<PoissonStructure> {
        let chart = self.chart()?;
        match &self.poisson {
            PoissonSpec::Canonical { pairs, extra, order } => match order {
                Some(order) => PoissonStructure::canonical_with_order(chart, *pairs, *extra, order.clone()),
                None => PoissonStructure::canonical(chart, *pairs, *extra),
            },
            PoissonSpec::Matrix { upper_entries } => {
                let entries = upper_map(upper_entries, chart.names())?;
                PoissonStructure::matrix(chart, entries)
            }
            PoissonSpec::LiePoisson { structure_constants } => {
                let c = StructureConstants::from_raw(structure_constants)?;
                lie_poisson(&c)?.with_chart(chart)
            }
            PoissonSpec::SymplecticInverse { form_upper_entries } => {
                let entries = upper_map(form_upper_entries, chart.names())?;
                let form = TwoForm::new(chart.dim(), entries)?;
                PoissonStructure::symplectic_inverse(chart, form)
            }
        }
    }

    pub fn build(&self) -> Result<System> {
        let structure = self.structure()?;
        let names = structure.chart().names().to_vec();
        let functions: BTreeMap<String, Expression> = self
            .functions
            .iter()
            .map(|(name, text)| {
                parse(text, &names)
                    .map(|e| (name.clone(), e))
                    .map_err(|e| Error::Invalid(format!("function `{name}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let lookup = |list: &[String]| -> Result<Vec<(String, Expression)>> {
            list.iter()
                .map(|n| {
                    functions
                        .get(n)
                        .map(|e| (n.clone(), e.clone()))
                        .ok_or_else(|| Error::Invalid(format!("undefined function `{n}`")))
                })
                .collect()
        };
        let kind = SystemKind::from_name(&self.system.kind)
            .ok_or_else(|| Error::Invalid(format!("unknown system kind `{}`", self.system.kind)))?;
        let k = self.system.generators.len();
        let xs: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
        let casimirs = self
            .system
            .coinduced_casimirs
            .iter()
            .map(|c| parse(c, &xs).map_err(|e| Error::Invalid(format!("coinduced Casimir `{c}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let set = GeneratingSet::new(structure.clone(), lookup(&self.system.generators)?, kind)?
            .with_pool(lookup(&self.system.invariants_pool)?)?
            .with_coinduced_casimirs(casimirs)?;
        Ok(System {
            structure,
            functions,
            set,
        })
    }
}

fn index(key: &str, part: &str, names: &[String]) -> Result<usize> {
    let part = part.trim();
    part.parse::<usize>()
        .ok()
        .or_else(|| names.iter().position(|n| n == part))
        .filter(|&i| i < names.len())
        .ok_or_else(|| Error::Invalid(format!("entry key `{key}`: `{part}` is not a coordinate")))
}

fn upper_map(entries: &BTreeMap<String, String>, names: &[String]) -> Result<UpperEntries> {
    let mut out = UpperEntries::new();
    for (key, text) in entries {
        let (a, b) = key
            .split_once(',')
            .ok_or_else(|| Error::Invalid(format!("entry key `{key}` is not of the form `i,j`")))?;
        let (i, j) = (index(key, a, names)?, index(key, b, names)?);
        let e = parse(text, names).map_err(|e| Error::Invalid(format!("entry `{key}`: {e}")))?;
        let (slot, e) = match i.cmp(&j) {
            std::cmp::Ordering::Less => ((i, j), e),
            std::cmp::Ordering::Greater => ((j, i), Expression::new(Node::neg(e.root().clone()), names.len())?),
            std::cmp::Ordering::Equal => {
                return Err(Error::Invalid(format!("entry key `{key}` is on the diagonal")));
            }
        };
        if out.insert(slot, e).is_some() {
            return Err(Error::Invalid(format!("entry `{key}` given twice")));
        }
    }
    Ok(out)
}

/// A coordinate map description, read against a source chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpecFile {
    pub target_coordinates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_box: Option<Vec<[f64; 2]>>,
    pub forward: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<Vec<String>>,
}

impl MapSpecFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("malformed map spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        MapSpecFile::from_json(&read(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map specs serialize")
    }

    pub fn build(&self, source: &Chart) -> Result<ChartMap> {
        let n = self.target_coordinates.len();
        let bounds = match &self.target_box {
            Some(b) => b.iter().map(|b| (b[0], b[1])).collect(),
            None => vec![(-DEFAULT_TARGET_HALF_WIDTH, DEFAULT_TARGET_HALF_WIDTH); n],
        };
        let target = Chart::new(self.target_coordinates.clone(), bounds)?;
        let forward = self
            .forward
            .iter()
            .map(|t| parse(t, source.names()))
            .collect::<std::result::Result<_, _>>()?;
        let inverse = match &self.inverse {
            Some(inv) => Some(
                inv.iter()
                    .map(|t| parse(t, target.names()))
                    .collect::<std::result::Result<_, _>>()?,
            ),
            None => None,
        };
        ChartMap::new(source.clone().without_guard(), target, forward, inverse)
    }
}
