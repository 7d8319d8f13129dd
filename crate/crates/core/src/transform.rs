//! Coordinate maps, push-forwards and pull-backs, canonical-form checks and
//! recursion operators.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::expr::Expression;
use crate::linalg;
use crate::poisson::{Chart, PoissonStructure, TwoForm, RANK_TOL};
use crate::{Error, Result};

/// Default principal-angle threshold (radians) for coinciding distributions.
pub const ANGLE_TOL: f64 = 1e-8;

/// A map between charts given by expressions in the source coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartMap {
    source: Chart,
    target: Chart,
    forward: Vec<Expression>,
    inverse: Option<Vec<Expression>>,
}

impl ChartMap {
    pub fn new(
        source: Chart,
        target: Chart,
        forward: Vec<Expression>,
        inverse: Option<Vec<Expression>>,
    ) -> Result<Self> {
        if forward.len() != target.dim() {
            return Err(Error::Dimension {
                expected: target.dim(),
                got: forward.len(),
            });
        }
        if let Some(e) = forward.iter().find(|e| e.arity() != source.dim()) {
            return Err(Error::Dimension {
                expected: source.dim(),
                got: e.arity(),
            });
        }
        if let Some(inv) = &inverse {
            if inv.len() != source.dim() {
                return Err(Error::Dimension {
                    expected: source.dim(),
                    got: inv.len(),
                });
            }
            if let Some(e) = inv.iter().find(|e| e.arity() != target.dim()) {
                return Err(Error::Dimension {
                    expected: target.dim(),
                    got: e.arity(),
                });
            }
        }
        Ok(ChartMap {
            source,
            target,
            forward,
            inverse,
        })
    }

    /// The identity map of a chart.
    pub fn identity(chart: Chart) -> Self {
        let n = chart.dim();
        let forward: Vec<Expression> = (0..n).map(|i| Expression::coordinate(i, n)).collect();
        ChartMap {
            source: chart.clone(),
            target: chart,
            inverse: Some(forward.clone()),
            forward,
        }
    }

    pub fn source(&self) -> &Chart {
        &self.source
    }

    pub fn target(&self) -> &Chart {
        &self.target
    }

    pub fn forward(&self) -> &[Expression] {
        &self.forward
    }

    pub fn inverse(&self) -> Option<&[Expression]> {
        self.inverse.as_deref()
    }

    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.source.check_point(z)?;
        Ok(self
            .forward
            .iter()
            .map(|e| e.eval(z))
            .collect::<std::result::Result<_, _>>()?)
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let inv = self.inverse.as_ref().ok_or_else(|| Error::Invalid("map has no inverse".into()))?;
        self.target.check_point(y)?;
        Ok(inv.iter().map(|e| e.eval(y)).collect::<std::result::Result<_, _>>()?)
    }

    /// Forward Jacobian `J[a][μ] = ∂φ^a / ∂z^μ` (target × source).
    pub fn jacobian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.source.check_point(z)?;
        let rows: Vec<Vec<f64>> = self
            .forward
            .iter()
            .map(|e| e.eval_jet1(z).map(|j| j.gradient))
            .collect::<std::result::Result<_, _>>()?;
        Ok(DMatrix::from_fn(self.target.dim(), self.source.dim(), |a, mu| rows[a][mu]))
    }

    /// `max |φ(φ⁻¹(φ(z))) − φ(z)|` over the points.
    pub fn round_trip_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for z in points {
            let y = self.apply(z)?;
            let back = self.apply(&self.apply_inverse(&y)?)?;
            for (a, b) in back.iter().zip(&y) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(worst)
    }
}

fn mirror_upper(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => m[(i, j)],
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => -m[(j, i)],
    })
}

/// `J W Jᵀ` at `φ(z)`.
pub fn pushforward_bivector(w: &PoissonStructure, map: &ChartMap, z: &[f64]) -> Result<DMatrix<f64>> {
    if w.dim() != map.source.dim() {
        return Err(Error::Dimension {
            expected: map.source.dim(),
            got: w.dim(),
        });
    }
    let j = map.jacobian(z)?;
    let b = w.bivector_at(z)?;
    Ok(mirror_upper(&(&j * &b.matrix * j.transpose())))
}

/// `Jᵀ Ω(φ(z)) J` for a two-form on the target chart.
pub fn pullback_twoform(omega: &TwoForm, map: &ChartMap, z: &[f64]) -> Result<DMatrix<f64>> {
    if omega.dim() != map.target.dim() {
        return Err(Error::Dimension {
            expected: map.target.dim(),
            got: omega.dim(),
        });
    }
    let j = map.jacobian(z)?;
    let (o, _) = omega.eval(&map.apply(z)?)?;
    Ok(mirror_upper(&(j.transpose() * o * &j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockPattern {
    /// Canonical action-angle block; passive block unconstrained.
    SymplecticAA,
    /// Canonical action-angle block; every other entry vanishes.
    PoissonAA,
    /// Canonical action-angle block; passive block unconstrained.
    PoissonAAWithBlock,
}

impl BlockPattern {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "symplectic-aa" => Some(BlockPattern::SymplecticAA),
            "poisson-aa" => Some(BlockPattern::PoissonAA),
            "poisson-aa-block" => Some(BlockPattern::PoissonAAWithBlock),
            _ => None,
        }
    }
}

/// Which target coordinates are actions, angles and passive coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalFormSpec {
    pub actions: Vec<usize>,
    pub angles: Vec<usize>,
    pub passive: Vec<usize>,
    pub pattern: BlockPattern,
}

impl CanonicalFormSpec {
    /// Spec with every other target coordinate passive.
    pub fn new(actions: Vec<usize>, angles: Vec<usize>, pattern: BlockPattern, dim: usize) -> Result<Self> {
        let passive = (0..dim).filter(|i| !actions.contains(i) && !angles.contains(i)).collect();
        let spec = CanonicalFormSpec {
            actions,
            angles,
            passive,
            pattern,
        };
        spec.validate(dim)?;
        Ok(spec)
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.actions.len() != self.angles.len() {
            return Err(Error::Invalid(format!(
                "{} actions but {} angles",
                self.actions.len(),
                self.angles.len()
            )));
        }
        let mut seen = vec![false; dim];
        for &i in self.actions.iter().chain(&self.angles).chain(&self.passive) {
            if i >= dim {
                return Err(Error::Index { index: i, dim });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::Invalid(format!("index {i} appears in more than one set")));
            }
        }
        Ok(())
    }

    /// Expected entry of the transformed bivector, or `None` if free.
    fn expected(&self, a: usize, b: usize) -> Option<f64> {
        let passive = |i: usize| self.passive.contains(&i);
        if passive(a) && passive(b) {
            return match self.pattern {
                BlockPattern::PoissonAA => Some(0.0),
                BlockPattern::SymplecticAA | BlockPattern::PoissonAAWithBlock => None,
            };
        }
        let pos = |set: &[usize], i: usize| set.iter().position(|&x| x == i);
        match (pos(&self.actions, a), pos(&self.angles, b), pos(&self.angles, a), pos(&self.actions, b)) {
            // {I_i, y^j} = δ_ij
            (Some(i), Some(j), _, _) => Some(if i == j { 1.0 } else { 0.0 }),
            (_, _, Some(i), Some(j)) => Some(if i == j { -1.0 } else { 0.0 }),
            _ => Some(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalFormReport {
    pub passes: bool,
    pub max_deviation: f64,
    pub worst_point: Vec<f64>,
    pub tol: f64,
}

/// Transform `w` by `map` at each point and compare with the block pattern.
pub fn canonical_form_check(
    w: &PoissonStructure,
    map: &ChartMap,
    spec: &CanonicalFormSpec,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<CanonicalFormReport> {
    let n = map.target.dim();
    spec.validate(n)?;
    let needed = map.source.dim().min(n);
    let mut worst = 0.0;
    let mut worst_point = Vec::new();
    for z in points {
        let j = map.jacobian(z)?;
        let rank = linalg::numerical_rank(&j, RANK_TOL, 0.0);
        if rank < needed {
            return Err(Error::Rank {
                rank,
                needed,
                point: z.clone(),
            });
        }
        let m = pushforward_bivector(w, map, z)?;
        for a in 0..n {
            for b in a + 1..n {
                if let Some(e) = spec.expected(a, b) {
                    let d = (m[(a, b)] - e).abs();
                    if d > worst || worst_point.is_empty() {
                        worst = d;
                        worst_point = z.clone();
                    }
                }
            }
        }
    }
    Ok(CanonicalFormReport {
        passes: worst <= tol,
        max_deviation: worst,
        worst_point,
        tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecursionResult {
    pub r: DMatrix<f64>,
    pub r_dual: DMatrix<f64>,
    /// `‖w'♯ − R w♯‖`
    pub residual_forward: f64,
    /// `‖w'♯ − w♯ R_dual‖`
    pub residual_dual: f64,
    pub characteristic_rank: usize,
    pub determinant: f64,
    pub principal_angles: Vec<f64>,
}

/// Recursion operator linking `w` to `w2` at `z`. Both sharp maps must have
/// the same image (within `tol` radians); `R` is `w2♯ (w♯)⁻¹` on that image
/// and the identity on its orthogonal complement.
pub fn recursion_operator(
    w: &PoissonStructure,
    w2: &PoissonStructure,
    z: &[f64],
    tol: f64,
) -> Result<RecursionResult> {
    if w.dim() != w2.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            got: w2.dim(),
        });
    }
    let n = w.dim();
    let a = w.bivector_at(z)?.matrix;
    let b = w2.bivector_at(z)?.matrix;
    let u = linalg::column_basis(&a, RANK_TOL, 0.0);
    let u2 = linalg::column_basis(&b, RANK_TOL, 0.0);
    let r = u.ncols();
    if r != u2.ncols() {
        return Err(Error::DistributionsDiffer(vec![FRAC_PI_2; r.abs_diff(u2.ncols())]));
    }
    let angles = linalg::principal_angles(&u, &u2);
    if angles.iter().any(|t| *t > tol) {
        return Err(Error::DistributionsDiffer(angles));
    }
    let ident = DMatrix::<f64>::identity(n, n);
    // sharp maps act as Wᵀ
    let s = a.transpose();
    let s2 = b.transpose();
    let (r_op, r_dual) = if r == 0 {
        (ident.clone(), ident.clone())
    } else {
        let restricted = u.transpose() * &s * &u;
        let delta = u.transpose() * (&s2 - &s) * &u;
        if linalg::condition_number(&restricted) > 1.0 / (RANK_TOL * RANK_TOL) {
            return Err(Error::SingularRestriction);
        }
        let inv = restricted.try_inverse().ok_or(Error::SingularRestriction)?;
        (
            &ident + &u * (&delta * &inv) * u.transpose(),
            &ident + &u * (&inv * &delta) * u.transpose(),
        )
    };
    let residual_forward = (&s2 - &r_op * &s).norm();
    let residual_dual = (&s2 - &s * &r_dual).norm();
    Ok(RecursionResult {
        determinant: r_op.determinant(),
        r: r_op,
        r_dual,
        residual_forward,
        residual_dual,
        characteristic_rank: r,
        principal_angles: angles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::poisson::UpperEntries;
    use crate::sampling::Sampler;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn qp() -> Chart {
        Chart::new(names(&["q", "p"]), vec![(-2.0, 2.0); 2]).unwrap()
    }

    fn map(src: &Chart, target: &[&str], fwd: &[&str]) -> ChartMap {
        let t = Chart::new(names(target), vec![(-10.0, 10.0); target.len()]).unwrap();
        let f = fwd.iter().map(|e| parse(e, src.names()).unwrap()).collect();
        ChartMap::new(src.clone(), t, f, None).unwrap()
    }

    fn polar() -> ChartMap {
        let c = qp();
        let t = Chart::new(names(&["I", "phi"]), vec![(0.0, 10.0), (-4.0, 4.0)]).unwrap();
        let fwd = vec![
            parse("(q^2+p^2)/2", c.names()).unwrap(),
            parse("atan2(q, p)", c.names()).unwrap(),
        ];
        let inv = vec![
            parse("sqrt(2*I)*sin(phi)", t.names()).unwrap(),
            parse("sqrt(2*I)*cos(phi)", t.names()).unwrap(),
        ];
        ChartMap::new(c, t, fwd, Some(inv)).unwrap()
    }

    fn away_from_origin(n: usize) -> Vec<Vec<f64>> {
        Sampler::new(3).points(&qp(), n, |z| z[0].hypot(z[1]) > 0.1).unwrap()
    }

    #[test]
    fn pushforward_examples() {
        let w = PoissonStructure::canonical(qp(), 1, 0).unwrap();
        let z = [0.3, -0.6];
        let id = ChartMap::identity(qp());
        assert_eq!(pushforward_bivector(&w, &id, &z).unwrap(), w.bivector_at(&z).unwrap().matrix);
        let shear = map(&qp(), &["Q", "P"], &["q", "p + 1.7*q"]);
        assert_eq!(pushforward_bivector(&w, &shear, &z).unwrap(), w.bivector_at(&z).unwrap().matrix);
        let scale = map(&qp(), &["Q", "P"], &["2*q", "p"]);
        assert_eq!(pushforward_bivector(&w, &scale, &z).unwrap()[(1, 0)], 2.0);
    }

    #[test]
    fn polar_pullback_is_canonical() {
        let m = polar();
        let e = |s: &str| parse(s, m.target().names()).unwrap();
        // dI ∧ dφ
        let form = TwoForm::new(2, UpperEntries::from([((0, 1), e("1"))])).unwrap();
        let canonical = TwoForm::canonical(1);
        for z in away_from_origin(50) {
            let pulled = pullback_twoform(&form, &m, &z).unwrap();
            let expected = canonical.eval(&z).unwrap().0;
            assert!((pulled - expected).abs().max() < 1e-10);
        }
        assert!(m.round_trip_residual(&away_from_origin(20)).unwrap() < 1e-10);
        let zero = TwoForm::new(2, UpperEntries::new()).unwrap();
        assert_eq!(pullback_twoform(&zero, &m, &[1.0, 1.0]).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn canonical_form_checks() {
        let w = PoissonStructure::canonical(qp(), 1, 0).unwrap();
        let pts = away_from_origin(100);
        let spec = CanonicalFormSpec::new(vec![0], vec![1], BlockPattern::SymplecticAA, 2).unwrap();
        let rep = canonical_form_check(&w, &polar(), &spec, &pts, 1e-10).unwrap();
        assert!(rep.passes, "{rep:?}");

        let id_spec = CanonicalFormSpec::new(vec![1], vec![0], BlockPattern::PoissonAA, 2).unwrap();
        assert!(canonical_form_check(&w, &ChartMap::identity(qp()), &id_spec, &pts, 1e-12).unwrap().passes);

        let scale = map(&qp(), &["Q", "P"], &["2*q", "p"]);
        let rep = canonical_form_check(&w, &scale, &id_spec, &pts, 1e-10).unwrap();
        assert!(!rep.passes);
        assert_eq!(rep.max_deviation, 1.0);

        let degenerate = map(&qp(), &["Q", "P"], &["q", "2*q"]);
        assert!(matches!(
            canonical_form_check(&w, &degenerate, &id_spec, &pts, 1e-10),
            Err(Error::Rank { rank: 1, .. })
        ));
    }

    #[test]
    fn passive_block_rules() {
        // canonical R^2 × (R^2 with {y1, y2} = 1): passive block is nonzero
        let a = PoissonStructure::canonical(qp(), 1, 0).unwrap();
        let b = PoissonStructure::canonical(Chart::numbered("y", 2, -1.0, 1.0).unwrap(), 1, 0).unwrap();
        let w = a.product(&b).unwrap();
        let id = ChartMap::identity(w.chart().clone());
        let pts = vec![vec![0.1, 0.2, 0.3, 0.4]];
        let with_block = CanonicalFormSpec::new(vec![1], vec![0], BlockPattern::PoissonAAWithBlock, 4).unwrap();
        assert!(canonical_form_check(&w, &id, &with_block, &pts, 1e-12).unwrap().passes);
        let strict = CanonicalFormSpec::new(vec![1], vec![0], BlockPattern::PoissonAA, 4).unwrap();
        assert!(!canonical_form_check(&w, &id, &strict, &pts, 1e-12).unwrap().passes);
        assert!(CanonicalFormSpec::new(vec![1], vec![1], BlockPattern::PoissonAA, 4).is_err());
    }

    #[test]
    fn recursion_identity_and_scaling() {
        let c = Chart::numbered("x", 4, -1.0, 1.0).unwrap();
        let w = PoissonStructure::canonical(c.clone(), 2, 0).unwrap();
        let z = [0.1, 0.2, 0.3, 0.4];
        let res = recursion_operator(&w, &w, &z, ANGLE_TOL).unwrap();
        assert_eq!(res.r, DMatrix::identity(4, 4));
        assert_eq!(res.residual_forward, 0.0);

        // degenerate w: the identity holds off the characteristic subspace
        let c3 = Chart::numbered("x", 3, 0.5, 2.0).unwrap();
        let e = |s: &str| parse(s, c3.names()).unwrap();
        let (a, b) = (e("x3"), e("2*x3"));
        let w = PoissonStructure::matrix(c3.clone(), UpperEntries::from([((0, 1), a)])).unwrap();
        let w2 = PoissonStructure::matrix(c3, UpperEntries::from([((0, 1), b)])).unwrap();
        let res = recursion_operator(&w, &w2, &[1.0, 1.0, 1.5], ANGLE_TOL).unwrap();
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0, 1.0]));
        assert!((&res.r - expected).abs().max() < 1e-12);
        assert!(res.residual_forward < 1e-12 && res.residual_dual < 1e-12);
        assert_eq!(res.characteristic_rank, 2);
        assert!((res.determinant - 4.0).abs() < 1e-12);
    }

    #[test]
    fn recursion_rejects_different_distributions() {
        let w = PoissonStructure::canonical(qp(), 1, 0).unwrap();
        let zero = PoissonStructure::zero(qp());
        assert!(matches!(
            recursion_operator(&w, &zero, &[0.0, 0.0], ANGLE_TOL),
            Err(Error::DistributionsDiffer(_))
        ));
        let c3 = Chart::numbered("x", 3, -1.0, 1.0).unwrap();
        let one = Expression::constant(1.0, 3);
        let a = PoissonStructure::matrix(c3.clone(), UpperEntries::from([((0, 1), one.clone())])).unwrap();
        let b = PoissonStructure::matrix(c3, UpperEntries::from([((0, 2), one)])).unwrap();
        match recursion_operator(&a, &b, &[0.0; 3], ANGLE_TOL) {
            Err(Error::DistributionsDiffer(angles)) => assert!((angles[1] - FRAC_PI_2).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
