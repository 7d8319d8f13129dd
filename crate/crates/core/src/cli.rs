//! Command-line front end.
//!
//! Exit codes: 0 success or pass, 1 input error, 2 check failed,
//! 3 verdict non-regular or not tested, 4 flow aborted.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::catalog::{self, CatalogEntry};
use crate::flows::{self, FlowConfig, FlowStatus};
use crate::integrability::{ClassificationReport, ClassifyConfig, Fit, GeneratingSet, Verdict};
use crate::sampling::Sampler;
use crate::specfile::{MapSpecFile, System, SystemSpecFile};
use crate::transform::{self, BlockPattern, CanonicalFormSpec, ANGLE_TOL};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_FAIL: i32 = 2;
pub const EXIT_UNDECIDED: i32 = 3;
pub const EXIT_ABORTED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "poissonkit", version, about = "Verify Poisson structures and integrable Hamiltonian systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Sampling {
    /// Number of sample points.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Sampling seed.
    #[arg(long, env = "POISSONKIT_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the generating set of a system spec.
    Verify {
        spec: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        /// Brackets below this magnitude count as zero.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Write the machine-readable report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Omit the timestamp from the JSON report.
        #[arg(long)]
        no_meta: bool,
    },
    /// Integrate the Hamiltonian flow of a named function.
    Flow {
        spec: PathBuf,
        #[arg(long)]
        hamiltonian: String,
        /// Initial point as comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Named functions to record along the trajectory.
        #[arg(long, num_args = 1..)]
        monitor: Vec<String>,
        /// Record every n-th step.
        #[arg(long, default_value_t = 1)]
        every: usize,
        /// CSV output path; stdout if absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Fit structure constants to the brackets of the generators.
    Fit {
        spec: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Recursion operator between two structures on the same chart.
    Recursion {
        spec_a: PathBuf,
        spec_b: PathBuf,
        /// Evaluation point as comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        /// Largest principal angle (radians) between characteristic distributions.
        #[arg(long, default_value_t = ANGLE_TOL)]
        tol: f64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check that a coordinate map brings the structure to canonical form.
    CheckMap {
        spec: PathBuf,
        #[arg(long)]
        map: PathBuf,
        /// One of symplectic-aa, poisson-aa, poisson-aa-block.
        #[arg(long)]
        pattern: String,
        /// Action coordinates (target names or indices, comma-separated).
        #[arg(long)]
        actions: String,
        /// Angle coordinates, paired with the actions in order.
        #[arg(long)]
        angles: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, env = "POISSONKIT_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// List or export the built-in systems.
    Catalog {
        #[arg(long)]
        list: bool,
        /// Entry name and output path.
        #[arg(long, num_args = 2, value_names = ["NAME", "OUT"])]
        export: Option<Vec<String>>,
        /// Also write the entry's companion structure here.
        #[arg(long, requires = "export")]
        companion: Option<PathBuf>,
        /// Also write the entry's first reference map here.
        #[arg(long, requires = "export")]
        map: Option<PathBuf>,
    },
}

/// Parse `args` and run; returns the exit code.
pub fn run_from<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = write!(if e.use_stderr() { err as &mut dyn Write } else { out }, "{e}");
            code
        }
    }
}

pub fn run(cli: Cli, out: &mut impl Write, err: &mut impl Write) -> i32 {
    let result = match cli.command {
        Command::Verify {
            spec,
            sampling,
            tol,
            json,
            no_meta,
        } => verify(&spec, &sampling, tol, json.as_deref(), no_meta, out),
        Command::Flow {
            spec,
            hamiltonian,
            from,
            t_end,
            step,
            monitor,
            every,
            csv,
        } => {
            let cfg = FlowConfig {
                step,
                t_end,
                record_every: every,
            };
            flow(&spec, &hamiltonian, &from, &cfg, &monitor, csv.as_deref(), out)
        }
        Command::Fit { spec, sampling, json } => fit(&spec, &sampling, json.as_deref(), out),
        Command::Recursion {
            spec_a,
            spec_b,
            at,
            tol,
            json,
        } => recursion(&spec_a, &spec_b, &at, tol, json.as_deref(), out),
        Command::CheckMap {
            spec,
            map,
            pattern,
            actions,
            angles,
            samples,
            seed,
            tol,
        } => check_map(&spec, &map, &pattern, &actions, &angles, samples, seed, tol, out),
        Command::Catalog {
            list,
            export,
            companion,
            map,
        } => catalog_cmd(list, export.as_deref(), companion.as_deref(), map.as_deref(), out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Invalid(format!("cannot write {}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn emit(out: &mut impl Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::Invalid(format!("cannot write output: {e}")))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn load(path: &Path) -> Result<System> {
    SystemSpecFile::load(path)?.build()
}

fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Invalid(format!("`{v}` is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != dim {
        return Err(Error::Dimension {
            expected: dim,
            got: values.len(),
        });
    }
    Ok(values)
}

fn parse_indices(text: &str, names: &[String]) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            names
                .iter()
                .position(|n| n == s)
                .or_else(|| s.parse().ok().filter(|&i: &usize| i < names.len()))
                .ok_or_else(|| Error::Invalid(format!("`{s}` is not a target coordinate")))
        })
        .collect()
}

fn matrix_text(m: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>12.6}")).collect();
        let _ = writeln!(s, "  [{}]", cells.join(" "));
    }
    s
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

const TOOL: Tool = Tool {
    name: env!("CARGO_PKG_NAME"),
    version: env!("CARGO_PKG_VERSION"),
};

#[derive(Serialize)]
struct Meta {
    generated_at_unix: u64,
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    tool: Tool,
    seed: u64,
    config: &'a ClassifyConfig,
    report: &'a ClassificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<Meta>,
}

/// Human-readable classification report.
pub fn render_report(set: &GeneratingSet, r: &ClassificationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "declared kind: {}", r.declared_kind);
    let _ = writeln!(s, "dimension {}, k = {}, samples {}", r.dimension, r.k, r.samples);
    let _ = writeln!(s, "generators: {}", set.names().join(", "));
    if !set.pool_names().is_empty() {
        let _ = writeln!(s, "invariants pool: {}", set.pool_names().join(", "));
    }
    let range = |x: &crate::integrability::RankRange| {
        if x.is_constant() {
            x.min.to_string()
        } else {
            format!("{}..{}", x.min, x.max)
        }
    };
    let _ = writeln!(s, "jacobian rank: {}", range(&r.jacobian_rank));
    let _ = writeln!(s, "structure matrix rank: {} (corank m = {})", range(&r.structure_matrix_rank), r.corank_m);
    let _ = writeln!(s, "ambient rank: {}", range(&r.ambient_rank));
    let _ = writeln!(s, "fiber factorization residual: {:.3e}", r.fiber_factorization_residual);
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3e}"));
    let _ = writeln!(
        s,
        "involution residuals: generators {}, pool {}, mixed {}",
        opt(r.involution.generators),
        opt(r.involution.pool),
        opt(r.involution.mixed)
    );
    match (&r.fitted_constants, &r.fit_error) {
        (Some(f), _) => {
            let _ = writeln!(
                s,
                "structure-constant fit: rms {:.3e}, holdout rms {:.3e}, gram condition {:.3e}",
                f.rms_residual, f.holdout_rms, f.gram_condition
            );
        }
        (None, Some(e)) => {
            let _ = writeln!(s, "structure-constant fit: {e}");
        }
        (None, None) => {}
    }
    if let Some(p) = r.pullback_casimir_residual {
        let _ = writeln!(s, "pullback Casimir residual: {p:.3e}");
    }
    let _ = writeln!(s, "verdicts:");
    for (kind, v) in &r.verdicts {
        let _ = writeln!(s, "  {kind}: {v}");
    }
    let _ = writeln!(s, "result: {}", r.declared_verdict());
    s
}

fn verify(
    spec: &Path,
    sampling: &Sampling,
    tol: f64,
    json: Option<&Path>,
    no_meta: bool,
    out: &mut impl Write,
) -> Result<i32> {
    let system = load(spec)?;
    let config = ClassifyConfig {
        samples: sampling.samples,
        seed: sampling.seed,
        bracket_tol: tol,
        ..ClassifyConfig::default()
    };
    let report = system.set.classify(&config)?;
    emit(out, &render_report(&system.set, &report))?;
    if let Some(path) = json {
        let meta = (!no_meta).then(|| Meta {
            generated_at_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        });
        let doc = VerifyReport {
            tool: TOOL,
            seed: config.seed,
            config: &config,
            report: &report,
            meta,
        };
        write_file(path, &to_json(&doc))?;
    }
    Ok(match report.declared_verdict() {
        Verdict::Pass => EXIT_OK,
        Verdict::Fail(_) => EXIT_FAIL,
        Verdict::NonRegular(_) | Verdict::NotTested(_) => EXIT_UNDECIDED,
    })
}

fn flow(
    spec: &Path,
    hamiltonian: &str,
    from: &str,
    cfg: &FlowConfig,
    monitor: &[String],
    csv: Option<&Path>,
    out: &mut impl Write,
) -> Result<i32> {
    let system = load(spec)?;
    let w = &system.structure;
    let h = system.function(hamiltonian)?;
    let z0 = parse_point(from, w.dim())?;
    let monitors = monitor
        .iter()
        .map(|n| {
            system
                .functions
                .get(n)
                .map(|e| (n.clone(), e.clone()))
                .ok_or_else(|| Error::UnknownMonitor(n.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let traj = match flows::integrate(w, h, &z0, cfg, &monitors) {
        Ok(t) => t,
        Err(Error::GuardExit(t)) => {
            let mut text = String::new();
            let mut header = vec!["t".to_string()];
            header.extend(w.chart().names().iter().cloned());
            header.extend(monitor.iter().cloned());
            let _ = writeln!(text, "{}", header.join(","));
            let _ = writeln!(text, "# aborted: guard exit at t={t:.16e}");
            match csv {
                Some(path) => write_file(path, &text)?,
                None => emit(out, &text)?,
            }
            return Ok(EXIT_ABORTED);
        }
        Err(e) => return Err(e),
    };
    let mut buf = Vec::new();
    traj.write_csv(w.chart().names(), &mut buf)
        .map_err(|e| Error::Invalid(format!("cannot format CSV: {e}")))?;
    match csv {
        Some(path) => {
            std::fs::write(path, &buf).map_err(|e| io_err(path, e))?;
            let mut s = format!("status: {}\nfinal state: {:?}\n", traj.status, traj.final_state());
            let names: Vec<&str> = monitor.iter().map(String::as_str).collect();
            for (name, drift) in flows::conservation_report(&traj, &names)? {
                let _ = writeln!(s, "max |{name}(t) - {name}(0)| = {drift:.3e}");
            }
            emit(out, &s)?;
        }
        None => out
            .write_all(&buf)
            .map_err(|e| Error::Invalid(format!("cannot write output: {e}")))?,
    }
    Ok(match traj.status {
        FlowStatus::Completed => EXIT_OK,
        FlowStatus::GuardExit(_) | FlowStatus::NonFinite(_) => EXIT_ABORTED,
    })
}

#[derive(Serialize)]
struct FitReport<'a> {
    tool: Tool,
    seed: u64,
    samples: usize,
    generators: &'a [String],
    fit: &'a Fit,
}

fn fit(spec: &Path, sampling: &Sampling, json: Option<&Path>, out: &mut impl Write) -> Result<i32> {
    let system = load(spec)?;
    let set = &system.set;
    let mut sampler = Sampler::new(sampling.seed);
    let points = set.sample(&mut sampler, sampling.samples)?;
    let holdout = set.sample(&mut sampler, sampling.samples)?;
    let f = match set.fit_structure_constants(&points, &holdout) {
        Ok(f) => f,
        Err(e @ Error::IllConditioned(_)) => {
            emit(out, &format!("fit failed: {e}\n"))?;
            return Ok(EXIT_FAIL);
        }
        Err(e) => return Err(e),
    };
    let names = set.names();
    let k = set.k();
    let mut s = String::new();
    for i in 0..k {
        for j in i + 1..k {
            let terms: Vec<String> = (0..k)
                .filter(|&h| f.constants.get(h, i, j).abs() > 1e-12)
                .map(|h| format!("{:+.9} {}", f.constants.get(h, i, j), names[h]))
                .collect();
            let rhs = if terms.is_empty() { "0".to_string() } else { terms.join(" ") };
            let _ = writeln!(s, "{{{}, {}}} = {rhs}", names[i], names[j]);
        }
    }
    let _ = writeln!(
        s,
        "rms residual {:.3e}, holdout rms {:.3e}, gram condition {:.3e}",
        f.rms_residual, f.holdout_rms, f.gram_condition
    );
    let v = f.constants.validate();
    let _ = writeln!(
        s,
        "antisymmetry residual {:.3e}, Jacobi residual {:.3e}",
        v.antisymmetry_residual, v.jacobi_residual
    );
    emit(out, &s)?;
    if let Some(path) = json {
        let doc = FitReport {
            tool: TOOL,
            seed: sampling.seed,
            samples: sampling.samples,
            generators: names,
            fit: &f,
        };
        write_file(path, &to_json(&doc))?;
    }
    let ok = f.rms_residual < ClassifyConfig::default().fit_tol && f.cross_validated;
    Ok(if ok { EXIT_OK } else { EXIT_FAIL })
}

#[derive(Serialize)]
struct RecursionReport {
    tool: Tool,
    point: Vec<f64>,
    r: Vec<Vec<f64>>,
    r_dual: Vec<Vec<f64>>,
    residual_forward: f64,
    residual_dual: f64,
    characteristic_rank: usize,
    determinant: f64,
    principal_angles: Vec<f64>,
}

fn recursion(a: &Path, b: &Path, at: &str, tol: f64, json: Option<&Path>, out: &mut impl Write) -> Result<i32> {
    let wa = SystemSpecFile::load(a)?.structure()?;
    let wb = SystemSpecFile::load(b)?.structure()?;
    let z = parse_point(at, wa.dim())?;
    let res = match transform::recursion_operator(&wa, &wb, &z, tol) {
        Ok(r) => r,
        Err(e @ (Error::DistributionsDiffer(_) | Error::SingularRestriction)) => {
            emit(out, &format!("no recursion operator: {e}\n"))?;
            return Ok(EXIT_FAIL);
        }
        Err(e) => return Err(e),
    };
    let mut s = format!("R at {z:?}:\n{}", matrix_text(&res.r));
    let _ = write!(s, "R dual:\n{}", matrix_text(&res.r_dual));
    let _ = writeln!(s, "residual |w2# - R w#| = {:.3e}", res.residual_forward);
    let _ = writeln!(s, "residual |w2# - w# R_dual| = {:.3e}", res.residual_dual);
    let _ = writeln!(s, "characteristic rank {}, det R = {:.9}", res.characteristic_rank, res.determinant);
    emit(out, &s)?;
    if let Some(path) = json {
        let doc = RecursionReport {
            tool: TOOL,
            point: z,
            r: matrix_rows(&res.r),
            r_dual: matrix_rows(&res.r_dual),
            residual_forward: res.residual_forward,
            residual_dual: res.residual_dual,
            characteristic_rank: res.characteristic_rank,
            determinant: res.determinant,
            principal_angles: res.principal_angles,
        };
        write_file(path, &to_json(&doc))?;
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn check_map(
    spec: &Path,
    map: &Path,
    pattern: &str,
    actions: &str,
    angles: &str,
    samples: usize,
    seed: u64,
    tol: f64,
    out: &mut impl Write,
) -> Result<i32> {
    let system = load(spec)?;
    let w = &system.structure;
    let map = MapSpecFile::load(map)?.build(w.chart())?;
    let pattern = BlockPattern::from_name(pattern)
        .ok_or_else(|| Error::Invalid(format!("unknown pattern `{pattern}`")))?;
    let names = map.target().names();
    let form = CanonicalFormSpec::new(
        parse_indices(actions, names)?,
        parse_indices(angles, names)?,
        pattern,
        names.len(),
    )?;
    let points = Sampler::new(seed).points(&system.set.sampling_chart(), samples, |z| {
        map.jacobian(z).is_ok_and(|j| j.iter().all(|v| v.is_finite()))
    })?;
    match transform::canonical_form_check(w, &map, &form, &points, tol) {
        Ok(rep) => {
            emit(
                out,
                &format!(
                    "{} at {} points: max deviation {:.3e} (tolerance {:.1e}), worst point {:?}\n",
                    if rep.passes { "pass" } else { "fail" },
                    points.len(),
                    rep.max_deviation,
                    tol,
                    rep.worst_point
                ),
            )?;
            Ok(if rep.passes { EXIT_OK } else { EXIT_FAIL })
        }
        Err(e @ Error::Rank { .. }) => {
            emit(out, &format!("fail: {e}\n"))?;
            Ok(EXIT_FAIL)
        }
        Err(e) => Err(e),
    }
}

fn find_entry(name: &str) -> Result<CatalogEntry> {
    catalog::entry(name).ok_or_else(|| Error::Invalid(format!("no catalog entry named `{name}`")))
}

fn catalog_cmd(
    list: bool,
    export: Option<&[String]>,
    companion: Option<&Path>,
    map: Option<&Path>,
    out: &mut impl Write,
) -> Result<i32> {
    if list || export.is_none() {
        let mut s = String::new();
        for e in catalog::catalog() {
            let expected: BTreeMap<String, &str> = e.expected.iter().map(|(k, v)| (k.to_string(), *v)).collect();
            let _ = writeln!(s, "{} ({}): {}", e.name, e.spec.system.kind, e.notes);
            for (k, v) in expected {
                let _ = writeln!(s, "    {k}: {v}");
            }
        }
        emit(out, &s)?;
    }
    if let Some([name, path]) = export {
        let entry = find_entry(name)?;
        write_file(Path::new(path), &(entry.spec.to_json() + "\n"))?;
        if let Some(p) = companion {
            let c = entry
                .companion
                .as_ref()
                .ok_or_else(|| Error::Invalid(format!("`{name}` has no companion structure")))?;
            write_file(p, &(c.to_json() + "\n"))?;
        }
        if let Some(p) = map {
            let m = entry
                .maps
                .first()
                .ok_or_else(|| Error::Invalid(format!("`{name}` has no reference map")))?;
            write_file(p, &(m.spec.to_json() + "\n"))?;
        }
        emit(out, &format!("wrote {name} to {path}\n"))?;
    }
    Ok(EXIT_OK)
}
