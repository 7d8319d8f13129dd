//! Poisson bivectors and symplectic forms on a coordinate chart.
//!
//! A structure is evaluated at a point as a [`BivectorAt`]: the matrix
//! `W[μ][ν] = w^{μν}` together with its first partial derivatives. With
//! the canonical structure in coordinate order `(q, p)` the matrix is
//! `[[0, -1], [1, 0]]`, i.e. `w^{pq} = {p, q} = +1`.

mod chart;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

pub use chart::Chart;

use crate::expr::{Expression, Jet2};
use crate::liealg::StructureConstants;
use crate::linalg;
use crate::{Error, Result};

/// Strict upper triangle `(i, j)`, `i < j`, of an antisymmetric matrix of
/// expressions. Missing entries are zero.
pub type UpperEntries = BTreeMap<(usize, usize), Expression>;

/// Default relative tolerance for numerical ranks.
pub const RANK_TOL: f64 = 1e-9;

/// Ratio `σ_min / σ_max` below which a symplectic form counts as singular.
const SINGULAR_RATIO: f64 = 1e-14;

/// A closed two-form `Ω = Σ_{i<j} Ω_ij dz^i ∧ dz^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoForm {
    dim: usize,
    entries: UpperEntries,
}

impl TwoForm {
    pub fn new(dim: usize, entries: UpperEntries) -> Result<Self> {
        check_upper(dim, &entries)?;
        Ok(TwoForm { dim, entries })
    }

    /// `Σ_i dp_i ∧ dq^i` in coordinate order `(q^1..q^n, p_1..p_n)`.
    pub fn canonical(pairs: usize) -> Self {
        let dim = 2 * pairs;
        let entries = (0..pairs)
            .map(|i| ((i, pairs + i), Expression::constant(-1.0, dim)))
            .collect();
        TwoForm { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &UpperEntries {
        &self.entries
    }

    /// The form's matrix and its partial derivatives at `z`.
    pub fn eval(&self, z: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        eval_upper(self.dim, &self.entries, z)
    }
}

/// Matrix of a bivector at a point, with `partials[ρ] = ∂_ρ W`.
#[derive(Debug, Clone, PartialEq)]
pub struct BivectorAt {
    pub point: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub partials: Vec<DMatrix<f64>>,
}

impl BivectorAt {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `w(a, b) = Σ_{μν} W[μ][ν] a_μ b_ν`, summed over `μ < ν` so that the
    /// result is exactly antisymmetric in `(a, b)`.
    pub fn pair(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for mu in 0..n {
            for nu in mu + 1..n {
                let w = self.matrix[(mu, nu)];
                if w != 0.0 {
                    s += w * (a[mu] * b[nu] - a[nu] * b[mu]);
                }
            }
        }
        s
    }

    /// `w♯(α)`, component `ν` equal to `Σ_μ W[μ][ν] α_μ`.
    pub fn sharp(&self, alpha: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|nu| (0..n).map(|mu| self.matrix[(mu, nu)] * alpha[mu]).sum())
            .collect()
    }

    /// `max |Σ_cyclic(λμν) Σ_ρ W[λ][ρ] ∂_ρ W[μ][ν]|` over `λ < μ < ν`.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim();
        let term = |l: usize, m: usize, v: usize| -> f64 {
            (0..n).map(|r| self.matrix[(l, r)] * self.partials[r][(m, v)]).sum()
        };
        let mut worst: f64 = 0.0;
        for l in 0..n {
            for m in l + 1..n {
                for v in m + 1..n {
                    let s = term(l, m, v) + term(m, v, l) + term(v, l, m);
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }

    /// Gradient of `{f, g}` from second-order jets of `f` and `g`.
    pub fn bracket_gradient(&self, jf: &Jet2, jg: &Jet2) -> Vec<f64> {
        let n = self.dim();
        let wg: Vec<f64> = (0..n)
            .map(|mu| (0..n).map(|nu| self.matrix[(mu, nu)] * jg.gradient[nu]).sum())
            .collect();
        let fw: Vec<f64> = (0..n)
            .map(|nu| (0..n).map(|mu| jf.gradient[mu] * self.matrix[(mu, nu)]).sum())
            .collect();
        (0..n)
            .map(|r| {
                let mut s = 0.0;
                for mu in 0..n {
                    s += jf.hess(r, mu) * wg[mu] + fw[mu] * jg.hess(mu, r);
                    for nu in 0..n {
                        s += jf.gradient[mu] * self.partials[r][(mu, nu)] * jg.gradient[nu];
                    }
                }
                s
            })
            .collect()
    }

    pub fn rank(&self, tol_rel: f64) -> usize {
        linalg::antisymmetric_rank(&self.matrix, tol_rel, 0.0)
    }
}

/// How a structure is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum StructureKind {
    /// Canonical structure with `pairs` conjugate pairs and `extra` trailing
    /// coordinates in the kernel. Canonical slot `s` (ordered
    /// `q^1..q^m, p_1..p_m, z^1..z^extra`) is chart coordinate `order[s]`.
    Canonical {
        pairs: usize,
        extra: usize,
        order: Vec<usize>,
    },
    /// Bivector given entrywise; an empty map is the zero structure.
    Matrix(UpperEntries),
    /// `w_mn = c^k_mn z_k` on the dual of a Lie algebra.
    LiePoisson(StructureConstants),
    /// Inverse of a nondegenerate two-form, `W = −Ω⁻¹`.
    SymplecticInverse(TwoForm),
    /// Block-diagonal product of two structures.
    Product(Box<PoissonStructure>, Box<PoissonStructure>),
}

impl StructureKind {
    pub fn name(&self) -> &'static str {
        match self {
            StructureKind::Canonical { .. } => "canonical",
            StructureKind::Matrix(_) => "matrix",
            StructureKind::LiePoisson(_) => "lie_poisson",
            StructureKind::SymplecticInverse(_) => "symplectic_inverse",
            StructureKind::Product(..) => "product",
        }
    }
}

/// A Poisson bivector field on a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonStructure {
    chart: Chart,
    kind: StructureKind,
}

impl PoissonStructure {
    /// Canonical structure; the chart must have dimension `2·pairs + extra`.
    pub fn canonical(chart: Chart, pairs: usize, extra: usize) -> Result<Self> {
        let order = (0..2 * pairs + extra).collect();
        PoissonStructure::canonical_with_order(chart, pairs, extra, order)
    }

    /// Canonical structure whose slots are permuted onto the chart.
    pub fn canonical_with_order(
        chart: Chart,
        pairs: usize,
        extra: usize,
        order: Vec<usize>,
    ) -> Result<Self> {
        let n = 2 * pairs + extra;
        if chart.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: chart.dim(),
            });
        }
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invalid(format!(
                    "canonical order {order:?} is not a permutation of 0..{n}"
                )));
            }
        }
        if order.len() != n {
            return Err(Error::Invalid(format!(
                "canonical order has {} slots, chart has {n}",
                order.len()
            )));
        }
        Ok(PoissonStructure {
            chart,
            kind: StructureKind::Canonical {
                pairs,
                extra,
                order,
            },
        })
    }

    pub fn matrix(chart: Chart, entries: UpperEntries) -> Result<Self> {
        check_upper(chart.dim(), &entries)?;
        Ok(PoissonStructure {
            chart,
            kind: StructureKind::Matrix(entries),
        })
    }

    /// The zero structure on a chart.
    pub fn zero(chart: Chart) -> Self {
        PoissonStructure {
            chart,
            kind: StructureKind::Matrix(UpperEntries::new()),
        }
    }

    pub fn symplectic_inverse(chart: Chart, form: TwoForm) -> Result<Self> {
        if form.dim() != chart.dim() {
            return Err(Error::Dimension {
                expected: chart.dim(),
                got: form.dim(),
            });
        }
        Ok(PoissonStructure {
            chart,
            kind: StructureKind::SymplecticInverse(form),
        })
    }

    /// Lie–Poisson structure without checking the constants. See
    /// [`crate::liealg::lie_poisson`] for the validating constructor.
    pub fn lie_poisson_unchecked(chart: Chart, c: StructureConstants) -> Result<Self> {
        if c.dim() != chart.dim() {
            return Err(Error::Dimension {
                expected: chart.dim(),
                got: c.dim(),
            });
        }
        Ok(PoissonStructure {
            chart,
            kind: StructureKind::LiePoisson(c),
        })
    }

    /// Block-diagonal product on the product chart (see [`Chart::product`]).
    pub fn product(&self, other: &PoissonStructure) -> Result<Self> {
        Ok(PoissonStructure {
            chart: self.chart.product(&other.chart)?,
            kind: StructureKind::Product(Box::new(self.clone()), Box::new(other.clone())),
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn kind(&self) -> &StructureKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// Same structure on a chart with a different box or guard.
    pub fn with_chart(&self, chart: Chart) -> Result<Self> {
        if chart.dim() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: chart.dim(),
            });
        }
        Ok(PoissonStructure {
            chart,
            kind: self.kind.clone(),
        })
    }

    /// True when every entry is constant (all partials vanish).
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            StructureKind::Canonical { .. } => true,
            StructureKind::Matrix(e) => e.values().all(Expression::is_constant),
            StructureKind::LiePoisson(c) => c.is_abelian(),
            StructureKind::SymplecticInverse(f) => f.entries().values().all(Expression::is_constant),
            StructureKind::Product(a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Entrywise expressions for the bivector, when they exist (every kind
    /// except a symplectic inverse).
    pub fn upper_entries(&self) -> Option<UpperEntries> {
        let n = self.dim();
        match &self.kind {
            StructureKind::Canonical { pairs, order, .. } => {
                let mut out = UpperEntries::new();
                for i in 0..*pairs {
                    let (q, p) = (order[i], order[pairs + i]);
                    // W[p][q] = 1
                    if q < p {
                        out.insert((q, p), Expression::constant(-1.0, n));
                    } else {
                        out.insert((p, q), Expression::constant(1.0, n));
                    }
                }
                Some(out)
            }
            StructureKind::Matrix(e) => Some(e.clone()),
            StructureKind::LiePoisson(c) => Some(c.bivector_entries()),
            StructureKind::SymplecticInverse(_) => None,
            StructureKind::Product(a, b) => {
                let (na, nb) = (a.dim(), b.dim());
                let first: Vec<usize> = (0..na).collect();
                let second: Vec<usize> = (na..na + nb).collect();
                let mut out = UpperEntries::new();
                for ((i, j), e) in a.upper_entries()? {
                    out.insert((i, j), e.reindex(&first, n).ok()?);
                }
                for ((i, j), e) in b.upper_entries()? {
                    out.insert((na + i, na + j), e.reindex(&second, n).ok()?);
                }
                Some(out)
            }
        }
    }

    /// Bivector matrix and its partial derivatives at `z`.
    pub fn bivector_at(&self, z: &[f64]) -> Result<BivectorAt> {
        self.chart.check_point(z)?;
        let n = self.dim();
        let (matrix, partials) = match &self.kind {
            StructureKind::Canonical { pairs, order, .. } => {
                let mut w = DMatrix::zeros(n, n);
                for i in 0..*pairs {
                    let (q, p) = (order[i], order[pairs + i]);
                    w[(p, q)] = 1.0;
                    w[(q, p)] = -1.0;
                }
                (w, vec![DMatrix::zeros(n, n); n])
            }
            StructureKind::Matrix(e) => eval_upper(n, e, z)?,
            StructureKind::LiePoisson(c) => c.bivector_at(z),
            StructureKind::SymplecticInverse(form) => {
                let (omega, d_omega) = form.eval(z)?;
                invert_form(&omega, &d_omega, z)?
            }
            StructureKind::Product(a, b) => {
                let na = a.dim();
                let ba = a.bivector_at(&z[..na])?;
                let bb = b.bivector_at(&z[na..])?;
                let mut w = DMatrix::zeros(n, n);
                w.view_mut((0, 0), (na, na)).copy_from(&ba.matrix);
                w.view_mut((na, na), (n - na, n - na)).copy_from(&bb.matrix);
                let mut partials = Vec::with_capacity(n);
                for p in &ba.partials {
                    let mut d = DMatrix::zeros(n, n);
                    d.view_mut((0, 0), (na, na)).copy_from(p);
                    partials.push(d);
                }
                for p in &bb.partials {
                    let mut d = DMatrix::zeros(n, n);
                    d.view_mut((na, na), (n - na, n - na)).copy_from(p);
                    partials.push(d);
                }
                (w, partials)
            }
        };
        Ok(BivectorAt {
            point: z.to_vec(),
            matrix,
            partials,
        })
    }

    /// `{f, g}(z) = Σ w^{μν} ∂_μ f ∂_ν g`.
    pub fn bracket(&self, f: &Expression, g: &Expression, z: &[f64]) -> Result<f64> {
        self.check_arity(f)?;
        self.check_arity(g)?;
        let w = self.bivector_at(z)?;
        let a = f.eval_jet1(z)?;
        let b = g.eval_jet1(z)?;
        Ok(w.pair(&a.gradient, &b.gradient))
    }

    /// Hamiltonian vector field `θ_f = w♯(df)`, so that `ḟ' = {f, f'}`
    /// along the flow of `f`.
    pub fn hamiltonian_field(&self, f: &Expression, z: &[f64]) -> Result<Vec<f64>> {
        self.check_arity(f)?;
        let w = self.bivector_at(z)?;
        let a = f.eval_jet1(z)?;
        Ok(w.sharp(&a.gradient))
    }

    /// `w♯(α)`; equals [`hamiltonian_field`](Self::hamiltonian_field) for `α = df`.
    pub fn sharp(&self, alpha: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if alpha.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: alpha.len(),
            });
        }
        Ok(self.bivector_at(z)?.sharp(alpha))
    }

    /// The two-form matrix `Ω_ij` at `z`, for structures that come with one.
    pub fn two_form_at(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.chart.check_point(z)?;
        match &self.kind {
            StructureKind::SymplecticInverse(form) => Ok(form.eval(z)?.0),
            // W² = −1 for the canonical matrix, so Ω = −W⁻¹ = W.
            StructureKind::Canonical { extra: 0, .. } => Ok(self.bivector_at(z)?.matrix),
            other => Err(Error::Variant {
                needed: "symplectic_inverse",
                actual: other.name(),
            }),
        }
    }

    /// `w♭(v) = Ω v`, inverse to [`sharp`](Self::sharp).
    pub fn flat(&self, v: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let omega = self.two_form_at(z)?;
        Ok((omega * DVector::from_column_slice(v)).iter().copied().collect())
    }

    pub fn jacobi_residual(&self, z: &[f64]) -> Result<f64> {
        Ok(self.bivector_at(z)?.jacobi_residual())
    }

    /// Even numerical rank of the bivector at `z`.
    pub fn rank_at(&self, z: &[f64], tol_rel: f64) -> Result<usize> {
        if !(tol_rel > 0.0 && tol_rel < 1.0) {
            return Err(Error::Invalid(format!("rank tolerance {tol_rel} not in (0, 1)")));
        }
        Ok(self.bivector_at(z)?.rank(tol_rel))
    }

    /// `|[θ_f, θ_g](z) − θ_{f,g}(z)|`, computed from exact second
    /// derivatives of `f`, `g` and first derivatives of the bivector.
    pub fn field_commutator_residual(&self, f: &Expression, g: &Expression, z: &[f64]) -> Result<f64> {
        self.check_arity(f)?;
        self.check_arity(g)?;
        let w = self.bivector_at(z)?;
        let jf = f.eval_jet2(z)?;
        let jg = g.eval_jet2(z)?;
        let n = self.dim();
        let theta_f = w.sharp(&jf.gradient);
        let theta_g = w.sharp(&jg.gradient);
        // d[mu][nu] = ∂_ν θ^μ
        let field_jacobian = |j: &Jet2| -> DMatrix<f64> {
            DMatrix::from_fn(n, n, |mu, nu| {
                (0..n)
                    .map(|l| w.partials[nu][(l, mu)] * j.gradient[l] + w.matrix[(l, mu)] * j.hess(l, nu))
                    .sum()
            })
        };
        let df = field_jacobian(&jf);
        let dg = field_jacobian(&jg);
        let commutator: Vec<f64> = (0..n)
            .map(|mu| {
                (0..n)
                    .map(|nu| theta_f[nu] * dg[(mu, nu)] - theta_g[nu] * df[(mu, nu)])
                    .sum()
            })
            .collect();
        let grad_bracket = w.bracket_gradient(&jf, &jg);
        let theta_fg = w.sharp(&grad_bracket);
        let diff: Vec<f64> = commutator.iter().zip(&theta_fg).map(|(a, b)| a - b).collect();
        Ok(linalg::norm(&diff))
    }

    fn check_arity(&self, f: &Expression) -> Result<()> {
        if f.arity() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: f.arity(),
            });
        }
        Ok(())
    }
}

fn check_upper(dim: usize, entries: &UpperEntries) -> Result<()> {
    for (&(i, j), e) in entries {
        if i >= j {
            return Err(Error::Invalid(format!(
                "entry ({i}, {j}) is not in the strict upper triangle"
            )));
        }
        if j >= dim {
            return Err(Error::Index { index: j, dim });
        }
        if e.arity() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: e.arity(),
            });
        }
    }
    Ok(())
}

/// Antisymmetric matrix and partials from strict-upper-triangle entries.
fn eval_upper(n: usize, entries: &UpperEntries, z: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let mut w = DMatrix::zeros(n, n);
    let mut partials = vec![DMatrix::zeros(n, n); n];
    for (&(i, j), e) in entries {
        let jet = e.eval_jet1(z)?;
        w[(i, j)] = jet.value;
        w[(j, i)] = -jet.value;
        for (r, d) in jet.gradient.iter().enumerate() {
            partials[r][(i, j)] = *d;
            partials[r][(j, i)] = -*d;
        }
    }
    Ok((w, partials))
}

/// `W = −Ω⁻¹` and `∂_ρ W = Ω⁻¹ (∂_ρ Ω) Ω⁻¹`, mirrored from the upper
/// triangle so that both stay exactly antisymmetric.
fn invert_form(
    omega: &DMatrix<f64>,
    d_omega: &[DMatrix<f64>],
    z: &[f64],
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let s = linalg::singular_values(omega);
    let singular = match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) => hi == 0.0 || lo / hi < SINGULAR_RATIO,
        _ => false,
    };
    let inv = if singular {
        None
    } else {
        omega.clone().try_inverse()
    };
    let Some(inv) = inv else {
        return Err(Error::SingularForm(z.to_vec()));
    };
    let w = antisymmetrize(&(-&inv));
    let partials = d_omega
        .iter()
        .map(|d| antisymmetrize(&(&inv * d * &inv)))
        .collect();
    Ok((w, partials))
}

fn antisymmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => m[(i, j)],
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => -m[(j, i)],
    })
}
