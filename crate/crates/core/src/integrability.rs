//! Sampled verification of integrability and superintegrability conditions
//! for a generating set `F = (F_1, ..., F_k)` on a Poisson manifold.
//!
//! Every "for all points" condition is checked at seeded, guard-satisfying
//! sample points. Verdicts are sampled evidence, not proofs.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::expr::{Expression, Jet2, Predicate};
use crate::liealg::StructureConstants;
use crate::linalg;
use crate::poisson::{BivectorAt, Chart, PoissonStructure, RANK_TOL};
use crate::sampling::Sampler;
use crate::{Error, Result};

/// Largest accepted condition number of the least-squares Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

/// Holdout residuals below this value always pass cross-validation.
pub const CROSS_VALIDATION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    CompletelyIntegrable,
    Superintegrable,
    LieAlgebraSuperintegrable,
    CommutativePartiallyIntegrable,
    PartiallySuperintegrable,
    Unspecified,
}

impl SystemKind {
    pub const ALL: [SystemKind; 5] = [
        SystemKind::CompletelyIntegrable,
        SystemKind::Superintegrable,
        SystemKind::LieAlgebraSuperintegrable,
        SystemKind::CommutativePartiallyIntegrable,
        SystemKind::PartiallySuperintegrable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::CompletelyIntegrable => "completely_integrable",
            SystemKind::Superintegrable => "superintegrable",
            SystemKind::LieAlgebraSuperintegrable => "lie_algebra_superintegrable",
            SystemKind::CommutativePartiallyIntegrable => "commutative_partially_integrable",
            SystemKind::PartiallySuperintegrable => "partially_superintegrable",
            SystemKind::Unspecified => "unspecified",
        }
    }

    pub fn from_name(name: &str) -> Option<SystemKind> {
        SystemKind::ALL
            .into_iter()
            .chain([SystemKind::Unspecified])
            .find(|k| k.name() == name)
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail(String),
    NonRegular(String),
    NotTested(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Pass => "Pass",
            Verdict::Fail(_) => "Fail",
            Verdict::NonRegular(_) => "NonRegular",
            Verdict::NotTested(_) => "NotTested",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("Pass"),
            Verdict::Fail(r) | Verdict::NonRegular(r) | Verdict::NotTested(r) => {
                write!(f, "{} ({r})", self.label())
            }
        }
    }
}

/// A generating set with its ambient structure and optional extras.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingSet {
    ambient: PoissonStructure,
    names: Vec<String>,
    functions: Vec<Expression>,
    guard: Option<Predicate>,
    declared_kind: SystemKind,
    pool_names: Vec<String>,
    pool: Vec<Expression>,
    coinduced_casimirs: Vec<Expression>,
}

impl GeneratingSet {
    pub fn new(
        ambient: PoissonStructure,
        functions: Vec<(String, Expression)>,
        declared_kind: SystemKind,
    ) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::Invalid("a generating set needs at least one function".into()));
        }
        let (names, functions): (Vec<_>, Vec<_>) = functions.into_iter().unzip();
        let set = GeneratingSet {
            ambient,
            names,
            functions,
            guard: None,
            declared_kind,
            pool_names: Vec::new(),
            pool: Vec::new(),
            coinduced_casimirs: Vec::new(),
        };
        set.check(&set.names, &set.functions)?;
        Ok(set)
    }

    pub fn with_guard(mut self, guard: Predicate) -> Self {
        self.guard = Some(guard);
        self
    }

    pub fn with_pool(mut self, pool: Vec<(String, Expression)>) -> Result<Self> {
        let (names, exprs): (Vec<_>, Vec<_>) = pool.into_iter().unzip();
        self.check(&names, &exprs)?;
        self.pool_names = names;
        self.pool = exprs;
        Ok(self)
    }

    /// Casimir candidates `C_λ(x1, ..., xk)` of the coinduced structure.
    pub fn with_coinduced_casimirs(mut self, casimirs: Vec<Expression>) -> Result<Self> {
        for c in &casimirs {
            if c.arity() != self.k() {
                return Err(Error::Dimension {
                    expected: self.k(),
                    got: c.arity(),
                });
            }
        }
        self.coinduced_casimirs = casimirs;
        Ok(self)
    }

    fn check(&self, names: &[String], exprs: &[Expression]) -> Result<()> {
        let n = self.ambient.dim();
        for (i, (name, e)) in names.iter().zip(exprs).enumerate() {
            if names[..i].contains(name) {
                return Err(Error::Invalid(format!("duplicate function name `{name}`")));
            }
            if e.arity() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: e.arity(),
                });
            }
        }
        Ok(())
    }

    pub fn ambient(&self) -> &PoissonStructure {
        &self.ambient
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn functions(&self) -> &[Expression] {
        &self.functions
    }

    pub fn guard(&self) -> Option<&Predicate> {
        self.guard.as_ref()
    }

    pub fn declared_kind(&self) -> SystemKind {
        self.declared_kind
    }

    pub fn pool_names(&self) -> &[String] {
        &self.pool_names
    }

    pub fn pool(&self) -> &[Expression] {
        &self.pool
    }

    pub fn coinduced_casimirs(&self) -> &[Expression] {
        &self.coinduced_casimirs
    }

    pub fn k(&self) -> usize {
        self.functions.len()
    }

    /// Same set with every generator multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let n = self.ambient.dim();
        let mut out = self.clone();
        out.functions = self
            .functions
            .iter()
            .map(|f| {
                Expression::new(
                    crate::expr::Node::mul(crate::expr::Node::Constant(factor), f.root().clone()),
                    n,
                )
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(out)
    }

    /// The ambient chart with this set's guard added to the chart's own.
    pub fn sampling_chart(&self) -> Chart {
        let chart = self.ambient.chart().clone();
        match (&self.guard, chart.guard().cloned()) {
            (None, _) => chart,
            (Some(g), None) => chart.with_guard(g.clone()),
            (Some(g), Some(h)) => chart.with_guard(h.and(g.clone())),
        }
    }

    /// `count` sample points where the guard holds and every generator,
    /// pool function and the ambient bivector can be evaluated.
    pub fn sample(&self, sampler: &mut Sampler, count: usize) -> Result<Vec<Vec<f64>>> {
        let chart = self.sampling_chart();
        sampler.points(&chart, count, |z| {
            self.ambient.bivector_at(z).is_ok()
                && self.functions.iter().chain(&self.pool).all(|f| f.eval_jet2(z).is_ok())
        })
    }

    fn jets(&self, z: &[f64]) -> Result<Vec<Jet2>> {
        Ok(self
            .functions
            .iter()
            .map(|f| f.eval_jet2(z))
            .collect::<std::result::Result<_, _>>()?)
    }

    fn jacobian(jets: &[Jet2]) -> DMatrix<f64> {
        let k = jets.len();
        let n = jets.first().map_or(0, |j| j.gradient.len());
        DMatrix::from_fn(k, n, |i, mu| jets[i].gradient[mu])
    }

    /// Rank of the Jacobian `[∂_μ F_i]` with each row scaled to unit length.
    fn jacobian_rank(jets: &[Jet2], tol_rel: f64) -> usize {
        let mut j = GeneratingSet::jacobian(jets);
        for mut row in j.row_iter_mut() {
            let norm = row.norm();
            if norm > 0.0 {
                row /= norm;
            }
        }
        linalg::numerical_rank(&j, tol_rel, 0.0)
    }

    /// `s_ij = {F_i, F_j}` at `z`, exactly antisymmetric.
    pub fn structure_matrix(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let w = self.ambient.bivector_at(z)?;
        let grads: Vec<Vec<f64>> = self
            .functions
            .iter()
            .map(|f| f.eval_jet1(z).map(|j| j.gradient))
            .collect::<std::result::Result<_, _>>()?;
        Ok(structure_from_gradients(&w, &grads))
    }

    pub fn independence_check(&self, points: &[Vec<f64>], tol_rel: f64) -> Result<Independence> {
        let ranks: Vec<usize> = points
            .iter()
            .map(|z| Ok(GeneratingSet::jacobian_rank(&self.jets(z)?, tol_rel)))
            .collect::<Result<_>>()?;
        let k = self.k();
        Ok(Independence {
            min_rank: ranks.iter().copied().min().unwrap_or(0),
            max_rank: ranks.iter().copied().max().unwrap_or(0),
            failing_points: (0..ranks.len()).filter(|&i| ranks[i] < k).collect(),
            k,
        })
    }

    /// Largest relative component of `∇{F_i, F_j}` orthogonal to the row
    /// space of `dF`, over points and pairs.
    pub fn fiber_factorization_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for z in points {
            let w = self.ambient.bivector_at(z)?;
            worst = worst.max(fiber_residual_at(&w, &self.jets(z)?));
        }
        Ok(worst)
    }

    pub fn corank_structure(&self, points: &[Vec<f64>], tol_rel: f64, abs_floor: f64) -> Result<Corank> {
        let ranks: Vec<usize> = points
            .iter()
            .map(|z| Ok(linalg::antisymmetric_rank(&self.structure_matrix(z)?, tol_rel, abs_floor)))
            .collect::<Result<_>>()?;
        Ok(Corank::from_ranks(self.k(), &ranks))
    }

    /// Per-pair least-squares fit of `{F_i, F_j} = Σ_h c^h_ij F_h` on
    /// `points`, cross-validated on `holdout`.
    pub fn fit_structure_constants(&self, points: &[Vec<f64>], holdout: &[Vec<f64>]) -> Result<Fit> {
        let values = |pts: &[Vec<f64>]| -> Result<Vec<(Vec<f64>, DMatrix<f64>)>> {
            pts.iter()
                .map(|z| {
                    let f: Vec<f64> = self
                        .functions
                        .iter()
                        .map(|f| f.eval(z))
                        .collect::<std::result::Result<_, _>>()?;
                    Ok((f, self.structure_matrix(z)?))
                })
                .collect()
        };
        let train = values(points)?;
        let test = values(holdout)?;
        fit_from_values(self.k(), &train, &test)
    }

    pub fn involution_residual(&self, points: &[Vec<f64>]) -> Result<Involution> {
        let mut inv = Involution::default();
        for z in points {
            let w = self.ambient.bivector_at(z)?;
            let f = gradients(&self.functions, z)?;
            let p = gradients(&self.pool, z)?;
            inv.absorb(&Involution::at(&w, &f, &p));
        }
        Ok(inv)
    }

    /// `max |{S_λ, F_i}|` with `S_λ = C_λ(F_1, ..., F_k)`.
    pub fn pullback_casimir_check(&self, casimirs: &[Expression], points: &[Vec<f64>]) -> Result<f64> {
        let pulled: Vec<Expression> = casimirs
            .iter()
            .map(|c| c.compose(&self.functions))
            .collect::<std::result::Result<_, _>>()?;
        let mut worst: f64 = 0.0;
        for z in points {
            worst = worst.max(self.pullback_at(&pulled, z)?);
        }
        Ok(worst)
    }

    fn pullback_at(&self, pulled: &[Expression], z: &[f64]) -> Result<f64> {
        let w = self.ambient.bivector_at(z)?;
        let f = gradients(&self.functions, z)?;
        let mut worst: f64 = 0.0;
        for s in gradients(pulled, z)? {
            for g in &f {
                worst = worst.max(w.pair(&s, g).abs());
            }
        }
        Ok(worst)
    }

    /// Run every check and issue a verdict for each definition.
    pub fn classify(&self, config: &ClassifyConfig) -> Result<ClassificationReport> {
        let mut sampler = Sampler::new(config.seed);
        let points = self.sample(&mut sampler, config.samples)?;
        let holdout = self.sample(&mut sampler, config.samples)?;
        let per_point: Vec<PointData> = points
            .par_iter()
            .map(|z| self.point_data(z, config))
            .collect::<Result<_>>()?;
        let pulled: Vec<Expression> = self
            .coinduced_casimirs
            .iter()
            .map(|c| c.compose(&self.functions))
            .collect::<std::result::Result<_, _>>()?;
        let pullback = if pulled.is_empty() {
            None
        } else {
            Some(
                points
                    .par_iter()
                    .map(|z| self.pullback_at(&pulled, z))
                    .collect::<Result<Vec<f64>>>()?
                    .into_iter()
                    .fold(0.0, f64::max),
            )
        };
        let fit = match self.fit_structure_constants(&points, &holdout) {
            Ok(fit) => Ok(fit),
            Err(Error::IllConditioned(c)) => Err(format!("ill-conditioned fit (condition number {c:e})")),
            Err(e) => return Err(e),
        };
        Ok(ClassificationReport::assemble(self, config, &per_point, fit, pullback))
    }

    fn point_data(&self, z: &[f64], config: &ClassifyConfig) -> Result<PointData> {
        let w = self.ambient.bivector_at(z)?;
        let jets = self.jets(z)?;
        let grads: Vec<Vec<f64>> = jets.iter().map(|j| j.gradient.clone()).collect();
        let pool = gradients(&self.pool, z)?;
        let s = structure_from_gradients(&w, &grads);
        let joint_jets: Vec<Jet2> = self
            .functions
            .iter()
            .chain(&self.pool)
            .map(|f| f.eval_jet2(z))
            .collect::<std::result::Result<_, _>>()?;
        Ok(PointData {
            jacobian_rank: GeneratingSet::jacobian_rank(&jets, config.rank_tol),
            joint_rank: GeneratingSet::jacobian_rank(&joint_jets, config.rank_tol),
            structure_rank: linalg::antisymmetric_rank(&s, config.rank_tol, config.abs_floor),
            ambient_rank: linalg::antisymmetric_rank(&w.matrix, config.rank_tol, config.abs_floor),
            fiber: fiber_residual_at(&w, &jets),
            involution: Involution::at(&w, &grads, &pool),
        })
    }
}

fn gradients(fs: &[Expression], z: &[f64]) -> Result<Vec<Vec<f64>>> {
    Ok(fs
        .iter()
        .map(|f| f.eval_jet1(z).map(|j| j.gradient))
        .collect::<std::result::Result<_, _>>()?)
}

fn structure_from_gradients(w: &BivectorAt, grads: &[Vec<f64>]) -> DMatrix<f64> {
    let k = grads.len();
    let mut s = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in i + 1..k {
            let v = w.pair(&grads[i], &grads[j]);
            s[(i, j)] = v;
            s[(j, i)] = -v;
        }
    }
    s
}

fn fiber_residual_at(w: &BivectorAt, jets: &[Jet2]) -> f64 {
    let k = jets.len();
    let basis = linalg::column_basis(&GeneratingSet::jacobian(jets).transpose(), RANK_TOL, 0.0);
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let g = DVector::from_vec(w.bracket_gradient(&jets[i], &jets[j]));
            let orth = &g - &basis * (basis.transpose() * &g);
            worst = worst.max(orth.norm() / g.norm().max(1.0));
        }
    }
    worst
}

fn fit_from_values(
    k: usize,
    train: &[(Vec<f64>, DMatrix<f64>)],
    test: &[(Vec<f64>, DMatrix<f64>)],
) -> Result<Fit> {
    let needed = k * k * k / 2 + 10;
    if train.len() < needed {
        return Err(Error::Invalid(format!(
            "fitting {k} generators needs at least {needed} points, got {}",
            train.len()
        )));
    }
    let design = DMatrix::from_fn(train.len(), k, |s, h| train[s].0[h]);
    let condition = linalg::condition_number(&design).powi(2);
    if !(condition <= MAX_GRAM_CONDITION) {
        return Err(Error::IllConditioned(condition));
    }
    let mut constants = StructureConstants::zeros(k);
    for i in 0..k {
        for j in i + 1..k {
            let rhs = DVector::from_iterator(train.len(), train.iter().map(|(_, s)| s[(i, j)]));
            let c = linalg::least_squares(&design, &rhs);
            for h in 0..k {
                constants.set(h, i, j, c[h])?;
            }
        }
    }
    let rms = |data: &[(Vec<f64>, DMatrix<f64>)]| -> f64 {
        let pairs = k * (k - 1) / 2;
        if pairs == 0 || data.is_empty() {
            return 0.0;
        }
        let mut sum = 0.0;
        for (f, s) in data {
            for i in 0..k {
                for j in i + 1..k {
                    let model: f64 = (0..k).map(|h| constants.get(h, i, j) * f[h]).sum();
                    sum += (s[(i, j)] - model).powi(2);
                }
            }
        }
        (sum / (pairs * data.len()) as f64).sqrt()
    };
    let rms_residual = rms(train);
    let holdout_rms = rms(test);
    Ok(Fit {
        cross_validated: holdout_rms <= (10.0 * rms_residual).max(CROSS_VALIDATION_FLOOR),
        constants,
        rms_residual,
        holdout_rms,
        gram_condition: condition,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Independence {
    pub min_rank: usize,
    pub max_rank: usize,
    /// Indices of sample points where the rank drops below `k`.
    pub failing_points: Vec<usize>,
    pub k: usize,
}

impl Independence {
    pub fn passes(&self) -> bool {
        self.failing_points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corank {
    pub m: usize,
    pub min_rank: usize,
    pub max_rank: usize,
    /// True when the structure-matrix rank is the same at every point.
    pub regular: bool,
}

impl Corank {
    fn from_ranks(k: usize, ranks: &[usize]) -> Self {
        let min_rank = ranks.iter().copied().min().unwrap_or(0);
        let max_rank = ranks.iter().copied().max().unwrap_or(0);
        Corank {
            m: k - max_rank,
            min_rank,
            max_rank,
            regular: min_rank == max_rank,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub constants: StructureConstants,
    pub rms_residual: f64,
    pub holdout_rms: f64,
    pub cross_validated: bool,
    pub gram_condition: f64,
}

impl Serialize for Fit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Fit", 5)?;
        st.serialize_field("constants", &self.constants.to_nested())?;
        st.serialize_field("rms_residual", &self.rms_residual)?;
        st.serialize_field("holdout_rms", &self.holdout_rms)?;
        st.serialize_field("cross_validated", &self.cross_validated)?;
        st.serialize_field("gram_condition", &self.gram_condition)?;
        st.end()
    }
}

/// Largest bracket magnitudes per family; `None` for an empty family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Involution {
    /// `{F_i, F_j}`
    pub generators: Option<f64>,
    /// `{f, f'}` for pool pairs
    pub pool: Option<f64>,
    /// `{F_i, f}` for pool members `f`
    pub mixed: Option<f64>,
}

impl Involution {
    fn at(w: &BivectorAt, f: &[Vec<f64>], p: &[Vec<f64>]) -> Self {
        let pairs = |a: &[Vec<f64>], b: &[Vec<f64>], same: bool| -> Option<f64> {
            let mut worst: Option<f64> = None;
            for (i, x) in a.iter().enumerate() {
                let start = if same { i + 1 } else { 0 };
                for y in &b[start.min(b.len())..] {
                    let v = w.pair(x, y).abs();
                    worst = Some(worst.map_or(v, |m: f64| m.max(v)));
                }
            }
            worst
        };
        Involution {
            generators: pairs(f, f, true),
            pool: pairs(p, p, true),
            mixed: pairs(f, p, false),
        }
    }

    fn absorb(&mut self, other: &Involution) {
        let join = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (x, None) => x,
            (None, y) => y,
        };
        self.generators = join(self.generators, other.generators);
        self.pool = join(self.pool, other.pool);
        self.mixed = join(self.mixed, other.mixed);
    }
}

/// Sampling and tolerance settings for [`GeneratingSet::classify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassifyConfig {
    pub samples: usize,
    pub seed: u64,
    /// Brackets below this magnitude count as zero.
    pub bracket_tol: f64,
    /// Largest accepted rms misfit of fitted structure constants.
    pub fit_tol: f64,
    /// Largest accepted fiber-factorization residual.
    pub fiber_tol: f64,
    pub rank_tol: f64,
    /// Singular values below this are zero regardless of the largest one.
    pub abs_floor: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            samples: 200,
            seed: 42,
            bracket_tol: 1e-8,
            fit_tol: 1e-6,
            fiber_tol: 1e-6,
            rank_tol: RANK_TOL,
            abs_floor: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankRange {
    pub min: usize,
    pub max: usize,
}

impl RankRange {
    fn of(values: impl Iterator<Item = usize> + Clone) -> Self {
        RankRange {
            min: values.clone().min().unwrap_or(0),
            max: values.max().unwrap_or(0),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.min == self.max
    }
}

struct PointData {
    jacobian_rank: usize,
    joint_rank: usize,
    structure_rank: usize,
    ambient_rank: usize,
    fiber: f64,
    involution: Involution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub declared_kind: SystemKind,
    pub dimension: usize,
    pub k: usize,
    pub samples: usize,
    pub jacobian_rank: RankRange,
    /// Rank of the generators together with the pool (informational).
    pub joint_rank: RankRange,
    pub structure_matrix_rank: RankRange,
    pub corank_m: usize,
    pub ambient_rank: RankRange,
    pub fiber_factorization_residual: f64,
    pub involution: Involution,
    pub fitted_constants: Option<Fit>,
    pub fit_error: Option<String>,
    pub pullback_casimir_residual: Option<f64>,
    pub verdicts: BTreeMap<SystemKind, Verdict>,
}

impl ClassificationReport {
    fn assemble(
        set: &GeneratingSet,
        config: &ClassifyConfig,
        data: &[PointData],
        fit: std::result::Result<Fit, String>,
        pullback: Option<f64>,
    ) -> Self {
        let k = set.k();
        let dim = set.ambient.dim();
        let jacobian_rank = RankRange::of(data.iter().map(|d| d.jacobian_rank));
        let joint_rank = RankRange::of(data.iter().map(|d| d.joint_rank));
        let structure_matrix_rank = RankRange::of(data.iter().map(|d| d.structure_rank));
        let ambient_rank = RankRange::of(data.iter().map(|d| d.ambient_rank));
        let fiber = data.iter().fold(0.0, |a: f64, d| a.max(d.fiber));
        let mut involution = Involution::default();
        for d in data {
            involution.absorb(&d.involution);
        }
        let corank_m = k - structure_matrix_rank.max;

        let mut report = ClassificationReport {
            declared_kind: set.declared_kind,
            dimension: dim,
            k,
            samples: data.len(),
            jacobian_rank,
            joint_rank,
            structure_matrix_rank,
            corank_m,
            ambient_rank,
            fiber_factorization_residual: fiber,
            involution,
            fitted_constants: fit.as_ref().ok().cloned(),
            fit_error: fit.err(),
            pullback_casimir_residual: pullback,
            verdicts: BTreeMap::new(),
        };
        for kind in SystemKind::ALL {
            let v = report.judge(kind, config);
            report.verdicts.insert(kind, v);
        }
        report
    }

    /// Verdict for the declared kind (`Pass` for an unspecified kind).
    pub fn declared_verdict(&self) -> Verdict {
        self.verdicts
            .get(&self.declared_kind)
            .cloned()
            .unwrap_or(Verdict::Pass)
    }

    fn judge(&self, kind: SystemKind, cfg: &ClassifyConfig) -> Verdict {
        let outcome = match kind {
            SystemKind::CompletelyIntegrable => self.completely_integrable(cfg),
            SystemKind::Superintegrable => self.superintegrable(cfg),
            SystemKind::LieAlgebraSuperintegrable => self
                .superintegrable(cfg)
                .and_then(|()| self.fit_holds(cfg)),
            SystemKind::CommutativePartiallyIntegrable => self.commutative_partially_integrable(cfg),
            SystemKind::PartiallySuperintegrable => self.partially_superintegrable(cfg),
            SystemKind::Unspecified => Ok(()),
        };
        match outcome {
            Ok(()) => Verdict::Pass,
            Err(v) => v,
        }
    }

    fn independent(&self) -> std::result::Result<(), Verdict> {
        if self.jacobian_rank.min < self.k {
            return Err(Verdict::Fail(format!(
                "generators are dependent (Jacobian rank {} < k = {})",
                self.jacobian_rank.min, self.k
            )));
        }
        Ok(())
    }

    fn nondegenerate(&self) -> std::result::Result<usize, Verdict> {
        if self.ambient_rank.min != self.dimension || self.dimension % 2 == 1 {
            return Err(Verdict::Fail(format!(
                "ambient structure is degenerate (rank {}..{} on dimension {})",
                self.ambient_rank.min, self.ambient_rank.max, self.dimension
            )));
        }
        Ok(self.dimension / 2)
    }

    fn small(value: Option<f64>, tol: f64, what: &str) -> std::result::Result<(), Verdict> {
        match value {
            Some(v) if !(v <= tol) => Err(Verdict::Fail(format!("{what} up to {v:e} > {tol:e}"))),
            _ => Ok(()),
        }
    }

    fn regular_ambient(&self) -> std::result::Result<usize, Verdict> {
        if !self.ambient_rank.is_constant() {
            return Err(Verdict::NonRegular(format!(
                "ambient rank varies between {} and {}",
                self.ambient_rank.min, self.ambient_rank.max
            )));
        }
        Ok(self.ambient_rank.max)
    }

    fn regular_structure(&self) -> std::result::Result<(), Verdict> {
        if !self.structure_matrix_rank.is_constant() {
            return Err(Verdict::NonRegular(format!(
                "structure matrix rank varies between {} and {}",
                self.structure_matrix_rank.min, self.structure_matrix_rank.max
            )));
        }
        Ok(())
    }

    fn completely_integrable(&self, cfg: &ClassifyConfig) -> std::result::Result<(), Verdict> {
        let n = self.nondegenerate()?;
        self.independent()?;
        Self::small(self.involution.generators, cfg.bracket_tol, "{F_i, F_j}")?;
        if self.k != n {
            return Err(Verdict::Fail(format!("k = {} differs from n = {n}", self.k)));
        }
        Ok(())
    }

    fn superintegrable(&self, cfg: &ClassifyConfig) -> std::result::Result<(), Verdict> {
        let n = self.nondegenerate()?;
        if !(n <= self.k && self.k < 2 * n) {
            return Err(Verdict::Fail(format!(
                "k = {} outside n <= k < 2n with n = {n}",
                self.k
            )));
        }
        self.independent()?;
        if !(self.fiber_factorization_residual <= cfg.fiber_tol) {
            return Err(Verdict::Fail(format!(
                "brackets do not factor through the generators (residual {:e})",
                self.fiber_factorization_residual
            )));
        }
        self.regular_structure()?;
        if self.corank_m != 2 * n - self.k {
            return Err(Verdict::Fail(format!(
                "corank m = {} differs from 2n - k = {}",
                self.corank_m,
                2 * n - self.k
            )));
        }
        Ok(())
    }

    fn fit_holds(&self, cfg: &ClassifyConfig) -> std::result::Result<(), Verdict> {
        let fit = match (&self.fitted_constants, &self.fit_error) {
            (Some(f), _) => f,
            (None, Some(e)) => return Err(Verdict::Fail(e.clone())),
            (None, None) => return Err(Verdict::Fail("no fit available".into())),
        };
        if !(fit.rms_residual < cfg.fit_tol) {
            return Err(Verdict::Fail(format!(
                "brackets are not constant combinations of the generators (rms {:e})",
                fit.rms_residual
            )));
        }
        if !fit.cross_validated {
            return Err(Verdict::Fail(format!(
                "holdout rms {:e} exceeds 10x training rms {:e}",
                fit.holdout_rms, fit.rms_residual
            )));
        }
        Ok(())
    }

    fn commutative_partially_integrable(&self, cfg: &ClassifyConfig) -> std::result::Result<(), Verdict> {
        self.independent()?;
        Self::small(self.involution.generators, cfg.bracket_tol, "{F_i, F_j}")?;
        Self::small(self.involution.pool, cfg.bracket_tol, "pool brackets")?;
        Self::small(self.involution.mixed, cfg.bracket_tol, "{F_i, pool}")?;
        let rank = self.regular_ambient()?;
        if rank != 2 * self.k {
            return Err(Verdict::Fail(format!("ambient rank {rank} differs from 2k = {}", 2 * self.k)));
        }
        Ok(())
    }

    fn partially_superintegrable(&self, cfg: &ClassifyConfig) -> std::result::Result<(), Verdict> {
        self.independent()?;
        self.fit_holds(cfg)?;
        Self::small(self.involution.mixed, cfg.bracket_tol, "{F_i, pool}")?;
        self.regular_structure()?;
        let rank = self.regular_ambient()?;
        if rank != self.k + self.corank_m {
            return Err(Verdict::Fail(format!(
                "ambient rank {rank} differs from k + m = {}",
                self.k + self.corank_m
            )));
        }
        if self.involution.mixed.is_none() {
            return Err(Verdict::NotTested("invariants pool is empty".into()));
        }
        Self::small(self.involution.pool, cfg.bracket_tol, "pool brackets")?;
        Ok(())
    }
}
