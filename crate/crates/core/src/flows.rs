//! Fixed-step RK4 integration of Hamiltonian vector fields with monitored
//! functions.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use crate::expr::Expression;
use crate::integrability::GeneratingSet;
use crate::linalg;
use crate::poisson::PoissonStructure;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub step: f64,
    /// Final time; may be negative to integrate backwards.
    pub t_end: f64,
    /// Record every `record_every`-th step (the final state is always kept).
    pub record_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            step: 1e-3,
            t_end: 0.0,
            record_every: 1,
        }
    }
}

impl FlowConfig {
    pub fn to(t_end: f64) -> Self {
        FlowConfig {
            t_end,
            ..FlowConfig::default()
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Invalid(format!("step {} must be positive", self.step)));
        }
        if !self.t_end.is_finite() {
            return Err(Error::Invalid("t_end must be finite".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Invalid("record_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowStatus {
    Completed,
    /// The state left the guarded domain at this time.
    GuardExit(f64),
    /// The field could not be evaluated, or produced a non-finite state.
    NonFinite(f64),
}

impl fmt::Display for FlowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowStatus::Completed => f.write_str("completed"),
            FlowStatus::GuardExit(t) => write!(f, "guard exit at t={t}"),
            FlowStatus::NonFinite(t) => write!(f, "non-finite state at t={t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub monitor_names: Vec<String>,
    /// `monitors[i][r]` is monitor `i` at recorded time `r`.
    pub monitors: Vec<Vec<f64>>,
    pub status: FlowStatus,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("a trajectory has at least one state")
    }

    pub fn is_complete(&self) -> bool {
        self.status == FlowStatus::Completed
    }

    /// Turn an aborted run into the matching error.
    pub fn into_result(self) -> Result<Trajectory> {
        match self.status {
            FlowStatus::Completed => Ok(self),
            FlowStatus::GuardExit(t) => Err(Error::GuardExit(t)),
            FlowStatus::NonFinite(t) => Err(Error::NonFinite(t)),
        }
    }

    pub fn monitor(&self, name: &str) -> Option<&[f64]> {
        self.monitor_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.monitors[i].as_slice())
    }

    /// CSV with header `t,<coordinates>,<monitors>` and 17 significant
    /// digits per value. An aborted run ends with a `# aborted:` line.
    pub fn write_csv(&self, coordinates: &[String], out: &mut impl Write) -> io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(coordinates.iter().cloned());
        header.extend(self.monitor_names.iter().cloned());
        writeln!(out, "{}", header.join(","))?;
        for (r, (t, z)) in self.times.iter().zip(&self.states).enumerate() {
            let mut row = vec![format!("{t:.16e}")];
            row.extend(z.iter().map(|v| format!("{v:.16e}")));
            row.extend(self.monitors.iter().map(|m| format!("{:.16e}", m[r])));
            writeln!(out, "{}", row.join(","))?;
        }
        match self.status {
            FlowStatus::Completed => Ok(()),
            FlowStatus::GuardExit(t) => writeln!(out, "# aborted: guard exit at t={t:.16e}"),
            FlowStatus::NonFinite(t) => writeln!(out, "# aborted: non-finite state at t={t:.16e}"),
        }
    }
}

/// RK4 trajectory of `ż = θ_H(z)` from `z0`.
pub fn integrate(
    w: &PoissonStructure,
    h: &Expression,
    z0: &[f64],
    cfg: &FlowConfig,
    monitors: &[(String, Expression)],
) -> Result<Trajectory> {
    cfg.validate()?;
    w.chart().check_point(z0)?;
    if h.arity() != w.dim() {
        return Err(Error::Dimension {
            expected: w.dim(),
            got: h.arity(),
        });
    }
    for (_, m) in monitors {
        if m.arity() != w.dim() {
            return Err(Error::Dimension {
                expected: w.dim(),
                got: m.arity(),
            });
        }
    }
    if !w.chart().satisfies_guard(z0) {
        return Err(Error::GuardExit(0.0));
    }
    let field = |z: &[f64]| -> Option<Vec<f64>> {
        w.hamiltonian_field(h, z)
            .ok()
            .filter(|v| v.iter().all(|x| x.is_finite()))
    };

    let steps = (cfg.t_end.abs() / cfg.step).round() as usize;
    let dt = if steps == 0 { 0.0 } else { cfg.t_end / steps as f64 };
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        monitor_names: monitors.iter().map(|(n, _)| n.clone()).collect(),
        monitors: vec![Vec::new(); monitors.len()],
        status: FlowStatus::Completed,
    };
    let record = |traj: &mut Trajectory, t: f64, z: &[f64]| -> Result<()> {
        traj.times.push(t);
        traj.states.push(z.to_vec());
        for (series, (_, m)) in traj.monitors.iter_mut().zip(monitors) {
            series.push(m.eval(z)?);
        }
        Ok(())
    };

    let mut z = z0.to_vec();
    record(&mut traj, 0.0, &z)?;
    let mut recorded_last = true;
    for i in 1..=steps {
        let t = if i == steps { cfg.t_end } else { i as f64 * dt };
        let next = rk4_step(&field, &z, dt);
        let status = match next {
            None => Some(FlowStatus::NonFinite(t)),
            Some(ref n) if n.iter().any(|v| !v.is_finite()) => Some(FlowStatus::NonFinite(t)),
            Some(ref n) if !w.chart().satisfies_guard(n) => Some(FlowStatus::GuardExit(t)),
            Some(_) => None,
        };
        if let Some(status) = status {
            if !recorded_last {
                record(&mut traj, (i - 1) as f64 * dt, &z)?;
            }
            traj.status = status;
            return Ok(traj);
        }
        z = next.expect("checked above");
        recorded_last = i % cfg.record_every == 0 || i == steps;
        if recorded_last {
            record(&mut traj, t, &z)?;
        }
    }
    Ok(traj)
}

fn rk4_step(field: &impl Fn(&[f64]) -> Option<Vec<f64>>, z: &[f64], dt: f64) -> Option<Vec<f64>> {
    let shifted = |k: &[f64], c: f64| -> Vec<f64> { z.iter().zip(k).map(|(a, b)| a + c * b).collect() };
    let k1 = field(z)?;
    let k2 = field(&shifted(&k1, dt / 2.0))?;
    let k3 = field(&shifted(&k2, dt / 2.0))?;
    let k4 = field(&shifted(&k3, dt))?;
    Some(
        (0..z.len())
            .map(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect(),
    )
}

/// `max |m(t) − m(0)|` for each named monitor.
pub fn conservation_report(traj: &Trajectory, names: &[&str]) -> Result<BTreeMap<String, f64>> {
    names
        .iter()
        .map(|&name| {
            let series = traj
                .monitor(name)
                .ok_or_else(|| Error::UnknownMonitor(name.to_string()))?;
            let start = series[0];
            let drift = series.iter().fold(0.0, |a: f64, v| a.max((v - start).abs()));
            Ok((name.to_string(), drift))
        })
        .collect()
}

fn endpoint(w: &PoissonStructure, h: &Expression, z0: &[f64], t: f64, cfg: &FlowConfig) -> Result<Vec<f64>> {
    let c = FlowConfig {
        t_end: t,
        record_every: usize::MAX,
        ..*cfg
    };
    let traj = integrate(w, h, z0, &c, &[])?.into_result()?;
    Ok(traj.final_state().to_vec())
}

/// `|Φ_f^s(Φ_g^t(z0)) − Φ_g^t(Φ_f^s(z0))|`, using `cfg.step`.
pub fn commutation_defect(
    w: &PoissonStructure,
    f: &Expression,
    g: &Expression,
    z0: &[f64],
    s: f64,
    t: f64,
    cfg: &FlowConfig,
) -> Result<f64> {
    let a = endpoint(w, f, &endpoint(w, g, z0, t, cfg)?, s, cfg)?;
    let b = endpoint(w, g, &endpoint(w, f, z0, s, cfg)?, t, cfg)?;
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    Ok(linalg::norm(&d))
}

/// Drift of each generator along the flow of each `S_λ`, keyed by
/// `(S name, generator name)`.
pub fn invariant_fiber_probe(
    set: &GeneratingSet,
    flows: &[(String, Expression)],
    z0: &[f64],
    cfg: &FlowConfig,
) -> Result<BTreeMap<(String, String), f64>> {
    let w = set.ambient().with_chart(set.sampling_chart())?;
    let monitors: Vec<(String, Expression)> = set
        .names()
        .iter()
        .cloned()
        .zip(set.functions().iter().cloned())
        .collect();
    let names: Vec<&str> = set.names().iter().map(String::as_str).collect();
    let mut out = BTreeMap::new();
    for (s_name, s) in flows {
        let traj = integrate(&w, s, z0, cfg, &monitors)?.into_result()?;
        for (f_name, drift) in conservation_report(&traj, &names)? {
            out.insert((s_name.clone(), f_name), drift);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::integrability::SystemKind;
    use crate::liealg::{lie_poisson, StructureConstants};
    use crate::poisson::Chart;
    use std::f64::consts::PI;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn oscillator() -> (PoissonStructure, Expression) {
        let c = Chart::new(names(&["q", "p"]), vec![(-2.0, 2.0); 2]).unwrap();
        let h = parse("(p^2+q^2)/2", c.names()).unwrap();
        (PoissonStructure::canonical(c, 1, 0).unwrap(), h)
    }

    fn r4() -> PoissonStructure {
        let c = Chart::new(names(&["q1", "q2", "p1", "p2"]), vec![(-2.0, 2.0); 4]).unwrap();
        PoissonStructure::canonical(c, 2, 0).unwrap()
    }

    #[test]
    fn oscillator_period() {
        let (w, h) = oscillator();
        let cfg = FlowConfig::to(2.0 * PI).with_record_every(100);
        let traj = integrate(&w, &h, &[1.0, 0.0], &cfg, &[]).unwrap();
        assert!(traj.is_complete());
        let end = traj.final_state();
        assert!((end[0] - 1.0).abs() < 1e-6 && end[1].abs() < 1e-6, "{end:?}");
        assert_eq!(*traj.times.last().unwrap(), 2.0 * PI);
        // q̇ = p, ṗ = −q: at t = π/2 the state is (0, −1)
        let quarter = integrate(&w, &h, &[1.0, 0.0], &FlowConfig::to(PI / 2.0), &[]).unwrap();
        let z = quarter.final_state();
        assert!(z[0].abs() < 1e-9 && (z[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_length_and_constant_hamiltonian() {
        let (w, _) = oscillator();
        let k = parse("4", w.chart().names()).unwrap();
        let traj = integrate(&w, &k, &[0.3, 0.2], &FlowConfig::to(1.0), &[]).unwrap();
        assert!(traj.states.iter().all(|z| z == &[0.3, 0.2]));
        let single = integrate(&w, &k, &[0.3, 0.2], &FlowConfig::to(0.0), &[]).unwrap();
        assert_eq!(single.times, vec![0.0]);
    }

    #[test]
    fn conservation_monitors() {
        let (w, h) = oscillator();
        let q = parse("q", w.chart().names()).unwrap();
        let one = parse("1", w.chart().names()).unwrap();
        let monitors = vec![("H".into(), h.clone()), ("q".into(), q), ("one".into(), one)];
        let traj = integrate(&w, &h, &[1.0, 0.0], &FlowConfig::to(100.0).with_record_every(10), &monitors).unwrap();
        let rep = conservation_report(&traj, &["H", "q", "one"]).unwrap();
        assert!(rep["H"] < 1e-9, "{}", rep["H"]);
        assert!((rep["q"] - 2.0).abs() < 1e-3);
        assert_eq!(rep["one"], 0.0);
        assert!(matches!(
            conservation_report(&traj, &["nope"]),
            Err(Error::UnknownMonitor(_))
        ));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let (w, h) = oscillator();
        let end = |step: f64| -> Vec<f64> {
            integrate(&w, &h, &[1.0, 0.0], &FlowConfig::to(4.0).with_step(step), &[])
                .unwrap()
                .final_state()
                .to_vec()
        };
        let reference = end(0.1 / 4.0);
        let err = |z: Vec<f64>| linalg::norm(&[z[0] - reference[0], z[1] - reference[1]]);
        let coarse = err(end(0.1));
        let fine = err(end(0.05));
        assert!(coarse / fine >= 8.0, "{coarse} / {fine}");
    }

    #[test]
    fn time_reversal() {
        let (w, h) = oscillator();
        let fwd = integrate(&w, &h, &[0.7, -0.4], &FlowConfig::to(3.0), &[]).unwrap();
        let back = integrate(&w, &h, fwd.final_state(), &FlowConfig::to(-3.0), &[]).unwrap();
        let z = back.final_state();
        assert!((z[0] - 0.7).abs() < 1e-7 && (z[1] + 0.4).abs() < 1e-7);
    }

    #[test]
    fn rigid_body_casimir() {
        let w = lie_poisson(&StructureConstants::so3()).unwrap();
        let h = parse("z1^2/2 + z2^2/1 + z3^2/0.8", w.chart().names()).unwrap();
        let c = parse("z1^2+z2^2+z3^2", w.chart().names()).unwrap();
        let cfg = FlowConfig::to(10.0).with_record_every(100);
        let traj = integrate(&w, &h, &[0.3, 0.4, 0.5], &cfg, &[("C".into(), c)]).unwrap();
        assert!(conservation_report(&traj, &["C"]).unwrap()["C"] < 1e-9);
    }

    #[test]
    fn guard_exit_keeps_partial_trajectory() {
        let c = Chart::new(names(&["q", "p"]), vec![(-2.0, 2.0); 2])
            .unwrap()
            .with_guard_text("q > 0")
            .unwrap();
        let w = PoissonStructure::canonical(c, 1, 0).unwrap();
        let h = parse("(p^2+q^2)/2", w.chart().names()).unwrap();
        let traj = integrate(&w, &h, &[1.0, 0.0], &FlowConfig::to(3.0).with_record_every(7), &[]).unwrap();
        match traj.status {
            FlowStatus::GuardExit(t) => assert!((t - PI / 2.0).abs() < 2e-3),
            other => panic!("{other:?}"),
        }
        assert!(traj.final_state()[0] > 0.0);
        let mut csv = Vec::new();
        traj.write_csv(w.chart().names(), &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,q,p\n"));
        assert!(text.trim_end().lines().last().unwrap().starts_with("# aborted: guard exit at t="));
        assert!(matches!(traj.into_result(), Err(Error::GuardExit(_))));
        assert!(matches!(
            integrate(&w, &h, &[-1.0, 0.0], &FlowConfig::to(1.0), &[]),
            Err(Error::GuardExit(_))
        ));
    }

    #[test]
    fn csv_has_full_precision() {
        let (w, h) = oscillator();
        let traj = integrate(&w, &h, &[1.0 / 3.0, 0.0], &FlowConfig::to(0.0), &[("H".into(), h.clone())]).unwrap();
        let mut csv = Vec::new();
        traj.write_csv(w.chart().names(), &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 1.0 / 3.0, 0.0, 1.0 / 18.0]);
    }

    #[test]
    fn commuting_and_non_commuting_flows() {
        let w = r4();
        let n = w.chart().names();
        let i1 = parse("(q1^2+p1^2)/2", n).unwrap();
        let i2 = parse("(q2^2+p2^2)/2", n).unwrap();
        let z0 = [0.5, -0.3, 0.2, 0.8];
        let cfg = FlowConfig::default();
        assert!(commutation_defect(&w, &i1, &i2, &z0, 1.0, 1.0, &cfg).unwrap() < 1e-7);
        assert!(commutation_defect(&w, &i1, &i1, &z0, 1.0, 1.0, &cfg).unwrap() < 1e-12);
        let q1 = parse("q1", n).unwrap();
        let a = commutation_defect(&w, &i1, &q1, &z0, 1.0, 0.5, &cfg).unwrap();
        let b = commutation_defect(&w, &q1, &i1, &z0, 0.5, 1.0, &cfg).unwrap();
        assert!(a > 1e-2);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn fiber_probe() {
        let w = r4();
        let n = w.chart().names().to_vec();
        let set = GeneratingSet::new(w, vec![("P1".into(), parse("p1", &n).unwrap())], SystemKind::Unspecified).unwrap();
        let s = vec![
            ("Q1".to_string(), parse("q1", &n).unwrap()),
            ("P1".to_string(), parse("p1", &n).unwrap()),
        ];
        let table = invariant_fiber_probe(&set, &s, &[0.1, 0.2, 0.3, 0.4], &FlowConfig::to(2.0)).unwrap();
        // along θ_{q1}, ṗ1 = {q1, p1} = −1
        assert!((table[&("Q1".to_string(), "P1".to_string())] - 2.0).abs() < 1e-9);
        assert!(table[&("P1".to_string(), "P1".to_string())] < 1e-9);
    }
}
