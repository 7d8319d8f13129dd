//! Structure constants, Lie–Poisson structures and coadjoint generators.

use nalgebra::DMatrix;
use rand::Rng;

use crate::expr::{Expression, Node};
use crate::poisson::{Chart, PoissonStructure, UpperEntries};
use crate::{Error, Result};

/// Largest Jacobi residual accepted by [`lie_poisson`].
pub const JACOBI_TOL: f64 = 1e-12;

/// Structure constants `c[h][i][j]` with `[e_i, e_j] = c^h_ij e_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    k: usize,
    c: Vec<f64>,
}

/// Residuals reported by [`StructureConstants::validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub antisymmetry_residual: f64,
    pub jacobi_residual: f64,
}

impl Validation {
    pub fn passes(&self) -> bool {
        self.antisymmetry_residual == 0.0 && self.jacobi_residual <= JACOBI_TOL
    }
}

impl StructureConstants {
    pub fn zeros(k: usize) -> Self {
        StructureConstants {
            k,
            c: vec![0.0; k * k * k],
        }
    }

    /// The abelian algebra of dimension `k`.
    pub fn abelian(k: usize) -> Self {
        StructureConstants::zeros(k)
    }

    /// Build from `(h, i, j, value)` triples with `i < j`; the `(j, i)`
    /// entries are filled in antisymmetrically. Indices are 0-based.
    pub fn from_upper(k: usize, entries: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut out = StructureConstants::zeros(k);
        for &(h, i, j, v) in entries {
            out.set(h, i, j, v)?;
        }
        Ok(out)
    }

    /// Build from a nested `c[h][i][j]` array without enforcing antisymmetry.
    pub fn from_raw(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let k = nested.len();
        let mut c = Vec::with_capacity(k * k * k);
        for plane in nested {
            if plane.len() != k {
                return Err(Error::Dimension {
                    expected: k,
                    got: plane.len(),
                });
            }
            for row in plane {
                if row.len() != k {
                    return Err(Error::Dimension {
                        expected: k,
                        got: row.len(),
                    });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Invalid("structure constants must be finite".into()));
                }
                c.extend_from_slice(row);
            }
        }
        Ok(StructureConstants { k, c })
    }

    /// `[e_1, e_2] = e_3` and cyclic.
    pub fn so3() -> Self {
        StructureConstants::from_upper(3, &[(2, 0, 1, 1.0), (0, 1, 2, 1.0), (1, 0, 2, -1.0)])
            .expect("valid indices")
    }

    /// `[e_1, e_2] = −e_3`, `[e_2, e_3] = e_1`, `[e_3, e_1] = e_2`.
    pub fn so21() -> Self {
        StructureConstants::from_upper(3, &[(2, 0, 1, -1.0), (0, 1, 2, 1.0), (1, 0, 2, -1.0)])
            .expect("valid indices")
    }

    pub fn dim(&self) -> usize {
        self.k
    }

    pub fn get(&self, h: usize, i: usize, j: usize) -> f64 {
        self.c[(h * self.k + i) * self.k + j]
    }

    /// Set `c^h_ij = v` and `c^h_ji = −v`.
    pub fn set(&mut self, h: usize, i: usize, j: usize, v: f64) -> Result<()> {
        let k = self.k;
        for idx in [h, i, j] {
            if idx >= k {
                return Err(Error::Index { index: idx, dim: k });
            }
        }
        if i == j && v != 0.0 {
            return Err(Error::Invalid(format!("c[{h}][{i}][{i}] must vanish")));
        }
        self.c[(h * k + i) * k + j] = v;
        self.c[(h * k + j) * k + i] = -v;
        Ok(())
    }

    /// Overwrite one entry without touching its antisymmetric partner.
    pub fn set_raw(&mut self, h: usize, i: usize, j: usize, v: f64) -> Result<()> {
        let k = self.k;
        for idx in [h, i, j] {
            if idx >= k {
                return Err(Error::Index { index: idx, dim: k });
            }
        }
        self.c[(h * k + i) * k + j] = v;
        Ok(())
    }

    /// Nested `c[h][i][j]` array.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        let k = self.k;
        (0..k)
            .map(|h| (0..k).map(|i| (0..k).map(|j| self.get(h, i, j)).collect()).collect())
            .collect()
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        StructureConstants {
            k: self.k,
            c: self.c.iter().map(|v| v * s).collect(),
        }
    }

    /// Largest entry difference.
    pub fn distance(&self, other: &StructureConstants) -> f64 {
        assert_eq!(self.k, other.k);
        self.c
            .iter()
            .zip(&other.c)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Constants in the basis `e'_i = Σ_b a[b][i] e_b`. Fails when `a` is
    /// singular.
    pub fn change_basis(&self, a: &DMatrix<f64>) -> Result<Self> {
        let k = self.k;
        if a.nrows() != k || a.ncols() != k {
            return Err(Error::Dimension {
                expected: k,
                got: a.nrows(),
            });
        }
        let inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Invalid("basis change matrix is singular".into()))?;
        let mut out = StructureConstants::zeros(k);
        for h in 0..k {
            for i in 0..k {
                for j in i + 1..k {
                    let mut s = 0.0;
                    for a_ in 0..k {
                        for b in 0..k {
                            for c in 0..k {
                                s += inv[(h, a_)] * self.get(a_, b, c) * a[(b, i)] * a[(c, j)];
                            }
                        }
                    }
                    out.set(h, i, j, s)?;
                }
            }
        }
        Ok(out)
    }

    /// Random antisymmetric constants with entries uniform in `[−1, 1]`.
    /// These almost never satisfy the Jacobi identity.
    pub fn random_antisymmetric(k: usize, rng: &mut impl Rng) -> Self {
        let mut out = StructureConstants::zeros(k);
        for h in 0..k {
            for i in 0..k {
                for j in i + 1..k {
                    out.set(h, i, j, rng.random_range(-1.0..1.0)).expect("in range");
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Validation {
        let k = self.k;
        let mut antisymmetry: f64 = 0.0;
        for h in 0..k {
            for i in 0..k {
                for j in i..k {
                    antisymmetry = antisymmetry.max((self.get(h, i, j) + self.get(h, j, i)).abs());
                }
            }
        }
        let mut jacobi: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    for m in 0..k {
                        let s: f64 = (0..k)
                            .map(|h| {
                                self.get(h, i, j) * self.get(m, h, l)
                                    + self.get(h, j, l) * self.get(m, h, i)
                                    + self.get(h, l, i) * self.get(m, h, j)
                            })
                            .sum();
                        jacobi = jacobi.max(s.abs());
                    }
                }
            }
        }
        Validation {
            antisymmetry_residual: antisymmetry,
            jacobi_residual: jacobi,
        }
    }

    /// `W[m][n] = Σ_k c^k_mn z_k`, with `∂_ρ W[m][n] = c^ρ_mn`. Only the
    /// upper triangle is read, so the result is exactly antisymmetric.
    pub fn bivector_at(&self, z: &[f64]) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let k = self.k;
        let mut w = DMatrix::zeros(k, k);
        let mut partials = vec![DMatrix::zeros(k, k); k];
        for m in 0..k {
            for n in m + 1..k {
                let v: f64 = (0..k).map(|h| self.get(h, m, n) * z[h]).sum();
                w[(m, n)] = v;
                w[(n, m)] = -v;
                for (r, d) in partials.iter_mut().enumerate() {
                    d[(m, n)] = self.get(r, m, n);
                    d[(n, m)] = -self.get(r, m, n);
                }
            }
        }
        (w, partials)
    }

    /// Upper-triangle bivector entries `Σ_k c^k_mn z_k` as expressions.
    pub fn bivector_entries(&self) -> UpperEntries {
        let k = self.k;
        let mut out = UpperEntries::new();
        for m in 0..k {
            for n in m + 1..k {
                let mut sum: Option<Node> = None;
                for h in 0..k {
                    let c = self.get(h, m, n);
                    if c == 0.0 {
                        continue;
                    }
                    let term = if c == 1.0 {
                        Node::Coordinate(h)
                    } else {
                        Node::mul(Node::Constant(c.abs()), Node::Coordinate(h))
                    };
                    sum = Some(match (sum, c < 0.0) {
                        (None, false) => term,
                        (None, true) => Node::neg(term),
                        (Some(s), false) => Node::add(s, term),
                        (Some(s), true) => Node::sub(s, term),
                    });
                }
                if let Some(node) = sum {
                    out.insert((m, n), Expression::new(node, k).expect("indices below k"));
                }
            }
        }
        out
    }
}

/// Chart `z1..zk` on `[−2, 2]^k`.
pub fn coalgebra_chart(k: usize) -> Result<Chart> {
    Chart::numbered("z", k, -2.0, 2.0)
}

/// Lie–Poisson structure of a validated set of constants.
pub fn lie_poisson(c: &StructureConstants) -> Result<PoissonStructure> {
    let v = c.validate();
    if !v.passes() {
        return Err(Error::InvalidConstants {
            antisymmetry: v.antisymmetry_residual,
            jacobi: v.jacobi_residual,
        });
    }
    PoissonStructure::lie_poisson_unchecked(coalgebra_chart(c.dim())?, c.clone())
}

/// `max |{C, z_i}|` over the points and coordinates.
pub fn casimir_residual(c: &StructureConstants, casimir: &Expression, points: &[Vec<f64>]) -> Result<f64> {
    let k = c.dim();
    if casimir.arity() != k {
        return Err(Error::Dimension {
            expected: k,
            got: casimir.arity(),
        });
    }
    let mut worst: f64 = 0.0;
    for z in points {
        if z.len() != k {
            return Err(Error::Dimension { expected: k, got: z.len() });
        }
        let (w, _) = c.bivector_at(z);
        let grad = casimir.eval_jet1(z)?.gradient;
        for i in 0..k {
            // {C, z_i} = Σ_μ W[μ][i] ∂_μ C
            let b: f64 = (0..k).map(|mu| w[(mu, i)] * grad[mu]).sum();
            worst = worst.max(b.abs());
        }
    }
    Ok(worst)
}

/// Matrix of `ad*_{e_m}` in the dual basis: `M[k][n] = −c^n_mk`. With the
/// bracket convention of this crate, `M z = −θ_{z_m}(z)`.
pub fn coadjoint_generator(c: &StructureConstants, m: usize) -> Result<DMatrix<f64>> {
    let k = c.dim();
    if m >= k {
        return Err(Error::Index { index: m, dim: k });
    }
    Ok(DMatrix::from_fn(k, k, |row, col| -c.get(col, m, row)))
}

/// Generic corank of the Lie–Poisson bivector: `k − max rank` over points.
pub fn algebra_corank(c: &StructureConstants, points: &[Vec<f64>], tol_rel: f64) -> usize {
    let k = c.dim();
    let max_rank = points
        .iter()
        .map(|z| crate::linalg::antisymmetric_rank(&c.bivector_at(z).0, tol_rel, 0.0))
        .max()
        .unwrap_or(0);
    k - max_rank
}
