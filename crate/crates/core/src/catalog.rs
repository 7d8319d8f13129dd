//! Built-in example systems with their expected verdicts.
//!
//! Every entry is stored as a [`SystemSpecFile`], so exporting an entry and
//! loading it back goes through the same code path as user input.
//!
//! The planar Kepler generators are `M = q1 p2 − q2 p1` and the Runge–Lenz
//! components `A1 = p2 M − q1/r`, `A2 = −p1 M − q2/r`, scaled by
//! `1/sqrt(∓2H)` on the bound (`H < 0`) and unbound (`H > 0`) regions. In the
//! order `(Ã2, Ã1, M)` their brackets are exactly those of so(3), resp.
//! so(2,1). The derivation script is `docs/derive_runge_lenz.py`.

use std::collections::BTreeMap;

use crate::expr::parse;
use crate::integrability::SystemKind;
use crate::liealg::StructureConstants;
use crate::poisson::{Chart, PoissonStructure, UpperEntries};
use crate::specfile::{MapSpecFile, PoissonSpec, System, SystemSection, SystemSpecFile};
use crate::transform::{BlockPattern, CanonicalFormSpec, ChartMap};
use crate::Result;

/// A named coordinate map with the block pattern it should produce.
#[derive(Debug, Clone)]
pub struct ReferenceMap {
    pub name: &'static str,
    pub spec: MapSpecFile,
    pub map: ChartMap,
    pub pattern: CanonicalFormSpec,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub spec: SystemSpecFile,
    pub system: System,
    pub maps: Vec<ReferenceMap>,
    /// Second structure on the same chart, for recursion operators.
    pub companion: Option<SystemSpecFile>,
    /// Expected verdict label per system kind.
    pub expected: BTreeMap<SystemKind, &'static str>,
    pub notes: &'static str,
}

impl CatalogEntry {
    fn new(name: &'static str, spec: SystemSpecFile, expected: [&'static str; 5], notes: &'static str) -> Result<Self> {
        Ok(CatalogEntry {
            name,
            system: spec.build()?,
            spec,
            maps: Vec::new(),
            companion: None,
            expected: SystemKind::ALL.into_iter().zip(expected).collect(),
            notes,
        })
    }

    pub fn companion_structure(&self) -> Result<Option<PoissonStructure>> {
        self.companion.as_ref().map(|s| s.structure()).transpose()
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn functions(v: &[(&str, &str)]) -> BTreeMap<String, String> {
    v.iter().map(|(n, e)| (n.to_string(), e.to_string())).collect()
}

fn section(kind: SystemKind, generators: &[&str], pool: &[&str], casimirs: &[&str]) -> SystemSection {
    SystemSection {
        kind: kind.name().to_string(),
        generators: strings(generators),
        invariants_pool: strings(pool),
        coinduced_casimirs: strings(casimirs),
    }
}

const R: &str = "sqrt(q1^2 + q2^2)";

fn kepler_h() -> String {
    format!("(p1^2 + p2^2)/2 - 1/{R}")
}

/// Kepler functions on the bound (`bound = true`) or unbound region.
fn kepler_functions(bound: bool) -> BTreeMap<String, String> {
    let h = kepler_h();
    let norm = if bound {
        format!("sqrt(-2*({h}))")
    } else {
        format!("sqrt(2*({h}))")
    };
    functions(&[
        ("H", &h),
        ("M", "q1*p2 - q2*p1"),
        ("A1", &format!("(p2*(q1*p2 - q2*p1) - q1/{R}) / {norm}")),
        ("A2", &format!("(-p1*(q1*p2 - q2*p1) - q2/{R}) / {norm}")),
    ])
}

fn kepler_guard(bound: bool) -> String {
    let energy = if bound { "< -0.05" } else { "> 0.05" };
    format!("{} {energy} and q1^2 + q2^2 > 0.0025", kepler_h())
}

fn kepler_spec(bound: bool) -> SystemSpecFile {
    let casimir = if bound { "x1^2 + x2^2 + x3^2" } else { "x1^2 + x2^2 - x3^2" };
    SystemSpecFile {
        dimension: 4,
        coordinates: strings(&["q1", "q2", "p1", "p2"]),
        bounds: vec![[-2.0, 2.0], [-2.0, 2.0], [-1.5, 1.5], [-1.5, 1.5]],
        guard: Some(kepler_guard(bound)),
        poisson: PoissonSpec::Canonical {
            pairs: 2,
            extra: 0,
            order: None,
        },
        functions: kepler_functions(bound),
        system: section(
            SystemKind::LieAlgebraSuperintegrable,
            &["A2", "A1", "M"],
            &["H"],
            &[casimir],
        ),
    }
}

fn oscillator2() -> Result<CatalogEntry> {
    let spec = SystemSpecFile {
        dimension: 4,
        coordinates: strings(&["q1", "q2", "p1", "p2"]),
        bounds: vec![[-2.0, 2.0]; 4],
        guard: None,
        poisson: PoissonSpec::Canonical {
            pairs: 2,
            extra: 0,
            order: None,
        },
        functions: functions(&[
            ("I1", "(q1^2 + p1^2)/2"),
            ("I2", "(q2^2 + p2^2)/2"),
            ("H", "(q1^2 + p1^2)/2 + (q2^2 + p2^2)/2"),
        ]),
        system: section(SystemKind::CompletelyIntegrable, &["I1", "I2"], &[], &[]),
    };
    let mut entry = CatalogEntry::new(
        "oscillator2",
        spec,
        ["Pass", "Pass", "Pass", "Pass", "NotTested"],
        "Two uncoupled harmonic oscillators with their actions as generators. \
         The polar map sends (q_i, p_i) to (I_i, phi_i) with phi_i = atan2(q_i, p_i), \
         singular where q_i = p_i = 0.",
    )?;
    let polar = MapSpecFile {
        target_coordinates: strings(&["I1", "I2", "phi1", "phi2"]),
        target_box: Some(vec![[0.0, 8.0], [0.0, 8.0], [-4.0, 4.0], [-4.0, 4.0]]),
        forward: strings(&["(q1^2 + p1^2)/2", "(q2^2 + p2^2)/2", "atan2(q1, p1)", "atan2(q2, p2)"]),
        inverse: Some(strings(&[
            "sqrt(2*I1)*sin(phi1)",
            "sqrt(2*I2)*sin(phi2)",
            "sqrt(2*I1)*cos(phi1)",
            "sqrt(2*I2)*cos(phi2)",
        ])),
    };
    entry.maps.push(ReferenceMap {
        name: "polar",
        map: polar.build(entry.system.structure.chart())?,
        spec: polar,
        pattern: CanonicalFormSpec::new(vec![0, 1], vec![2, 3], BlockPattern::SymplecticAA, 4)?,
    });
    Ok(entry)
}

fn kepler2(bound: bool) -> Result<CatalogEntry> {
    let (name, notes) = if bound {
        (
            "kepler2_neg",
            "Planar Kepler problem on H < 0 with generators (A2, A1, M); brackets close on so(3). \
             Box q in [-2,2]^2, p in [-1.5,1.5]^2, guard |H| > 0.05 and r > 0.05.",
        )
    } else {
        (
            "kepler2_pos",
            "Planar Kepler problem on H > 0 with generators (A2, A1, M); brackets close on so(2,1). \
             Box q in [-2,2]^2, p in [-1.5,1.5]^2, guard |H| > 0.05 and r > 0.05.",
        )
    };
    CatalogEntry::new(name, kepler_spec(bound), ["Fail", "Pass", "Pass", "Fail", "Pass"], notes)
}

fn so3_rigid() -> Result<CatalogEntry> {
    let spec = SystemSpecFile {
        dimension: 3,
        coordinates: strings(&["z1", "z2", "z3"]),
        bounds: vec![[-2.0, 2.0]; 3],
        guard: None,
        poisson: PoissonSpec::LiePoisson {
            structure_constants: StructureConstants::so3().to_nested(),
        },
        functions: functions(&[("H", "z1^2/2 + z2^2/4 + z3^2/6"), ("C", "z1^2 + z2^2 + z3^2")]),
        system: section(SystemKind::PartiallySuperintegrable, &["H"], &["C"], &[]),
    };
    CatalogEntry::new(
        "so3_rigid",
        spec,
        ["Fail", "Fail", "Fail", "Pass", "Pass"],
        "Free rigid body on so(3)* with principal moments (1, 2, 3). The Casimir C is the pool.",
    )
}

fn kepler_x6_product() -> Result<CatalogEntry> {
    let mut spec = kepler_spec(true);
    spec.dimension = 6;
    spec.coordinates.extend(strings(&["y1", "y2"]));
    spec.bounds.extend([[-1.0, 1.0]; 2]);
    spec.poisson = PoissonSpec::Canonical {
        pairs: 2,
        extra: 2,
        order: None,
    };
    spec.functions.insert("Y1".into(), "y1".into());
    spec.functions.insert("Y2".into(), "y2".into());
    spec.system = section(
        SystemKind::PartiallySuperintegrable,
        &["A2", "A1", "M"],
        &["H", "Y1", "Y2"],
        &["x1^2 + x2^2 + x3^2"],
    );
    CatalogEntry::new(
        "kepler_x6_product",
        spec,
        ["Fail", "Fail", "Fail", "Fail", "Pass"],
        "Bound Kepler generators on the product of canonical R^4 with the zero structure on R^2 \
         (coordinates y1, y2). The ambient rank is 4 = k + m.",
    )
}

fn bi20_spec(twisted: &str) -> SystemSpecFile {
    SystemSpecFile {
        dimension: 5,
        coordinates: strings(&["x1", "x2", "J", "t", "phi"]),
        bounds: vec![[-2.0, 2.0]; 5],
        guard: None,
        poisson: PoissonSpec::Matrix {
            upper_entries: functions(&[("J,t", "1"), ("x2,phi", "1"), ("t,phi", twisted)]),
        },
        functions: functions(&[("J", "J"), ("X1", "x1"), ("X2", "x2")]),
        system: section(SystemKind::CommutativePartiallyIntegrable, &["J", "X2"], &["X1"], &[]),
    }
}

fn bi20_model() -> Result<CatalogEntry> {
    let mut entry = CatalogEntry::new(
        "bi20_model",
        bi20_spec("x1"),
        ["Fail", "Fail", "Fail", "Pass", "Pass"],
        "Rank-4 structure dJ^dt + dx2^dphi + x1 dt^dphi on R^5 with kernel spanned by d/dx1. \
         The companion replaces x1 by x1 + x2 and has the same characteristic distribution.",
    )?;
    entry.companion = Some(bi20_spec("x1 + x2"));
    Ok(entry)
}

/// Every built-in entry, in a fixed order.
pub fn catalog() -> Vec<CatalogEntry> {
    [
        oscillator2(),
        kepler2(true),
        kepler2(false),
        so3_rigid(),
        kepler_x6_product(),
        bi20_model(),
    ]
    .into_iter()
    .map(|e| e.expect("built-in entries are valid"))
    .collect()
}

pub fn entry(name: &str) -> Option<CatalogEntry> {
    catalog().into_iter().find(|e| e.name == name)
}

/// Antisymmetric bivector on R^3 violating the Jacobi identity:
/// `w12 = x3, w13 = x3, w23 = x1`, with Jacobi residual `x1`.
pub fn corrupted_structure() -> PoissonStructure {
    let chart = Chart::numbered("x", 3, 0.5, 2.0).expect("valid chart");
    let e = |s: &str| parse(s, chart.names()).expect("valid expression");
    let entries = UpperEntries::from([((0, 1), e("x3")), ((0, 2), e("x3")), ((1, 2), e("x1"))]);
    PoissonStructure::matrix(chart, entries).expect("valid entries")
}

/// so(3) constants with one entry flipped so antisymmetry fails.
pub fn corrupted_so3() -> StructureConstants {
    let mut c = StructureConstants::so3();
    c.set_raw(2, 0, 1, -1.0).expect("index in range");
    c
}
