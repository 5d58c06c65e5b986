//! The six commands behind the CLI. Each is a function of the configuration
//! and the output directory; artifacts are written atomically under a lock.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::elliptic::SolverSettings;
use crate::error::{Error, Result};
use crate::io::{
    energies_csv, fmt_float, ode_solution_from_parts, parse_trajectory_csv, table_csv,
    termination_records, trajectories_csv, trajectories_from_parts, write_atomic, Envelope,
    LawStop, OutputLock, TerminationRecord,
};
use crate::law::{critical_current, CriticalEstimate, OdeSolution};
use crate::pinning::AuxiliaryFields;
use crate::sim::Coefficients;
use crate::snapshot::Snapshot;
use crate::studies::{
    compare_trajectories, convergence_battery, energy_growth, pde_stop, strictly_decreasing,
    StudyReport,
};
use crate::vortex::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Fields,
    Simulate,
    Law,
    Compare,
    Critical,
    Convergence,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Fields,
        Command::Simulate,
        Command::Law,
        Command::Compare,
        Command::Critical,
        Command::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Fields => "fields",
            Command::Simulate => "simulate",
            Command::Law => "law",
            Command::Compare => "compare",
            Command::Critical => "critical",
            Command::Convergence => "convergence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// What a command reports back: whether its declared thresholds held, the
/// results written to `<command>.json`, and every file it wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub command: Command,
    pub passed: bool,
    pub config_hash: String,
    pub results: serde_json::Value,
    pub files: Vec<String>,
}

struct Writer<'a> {
    lock: &'a OutputLock,
    hash: String,
    files: Vec<String>,
}

impl Writer<'_> {
    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.lock.path(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.bytes(name, text.as_bytes())
    }

    fn snapshot(&mut self, name: &str, s: Snapshot) -> Result<()> {
        self.bytes(name, &s.to_bytes())
    }

    fn json<T: Serialize>(&mut self, name: &str, results: &T) -> Result<()> {
        let e = Envelope::new(&self.hash, results);
        self.text(name, &e.to_json()?)
    }
}

/// Run `command`, writing into `out` (the configured output directory when `None`).
pub fn execute(command: Command, config: &RunConfig, out: Option<&Path>) -> Result<Outcome> {
    config.validate()?;
    let dir = match (out, &config.output_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => d.into(),
        (None, None) => return Err(Error::config("output_dir", "no output directory given")),
    };
    let lock = OutputLock::acquire(dir)?;
    let mut w = Writer {
        lock: &lock,
        hash: config.hash(),
        files: Vec::new(),
    };
    let (passed, results) = match command {
        Command::Fields => fields(config, &mut w)?,
        Command::Simulate => simulate(config, &mut w)?,
        Command::Law => law(config, &mut w)?,
        Command::Compare => compare(config, &mut w)?,
        Command::Critical => critical(config, &mut w)?,
        Command::Convergence => convergence(config, &mut w)?,
    };
    w.json(&format!("{}.json", command.name()), &results)?;
    Ok(Outcome {
        command,
        passed,
        config_hash: w.hash.clone(),
        results,
        files: w.files,
    })
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn fields(config: &RunConfig, w: &mut Writer) -> Result<(bool, serde_json::Value)> {
    let grid = config.grid()?;
    let b = config.landscape()?.realize(grid)?;
    let data = config.boundary_data(&grid)?;
    let params = config.model_params();
    let aux = AuxiliaryFields::solve(
        &b,
        &data,
        params.alpha,
        params.sigma,
        SolverSettings::default(),
    )?;
    let coeffs = Coefficients::from_auxiliary(&aux, b.clone(), &params)?;
    w.snapshot("b.vxf", Snapshot::Scalar(b))?;
    w.snapshot("phi0.vxf", Snapshot::Scalar(aux.phi0.clone()))?;
    w.snapshot("h0.vxf", Snapshot::Scalar(aux.h0.clone()))?;
    w.snapshot("xi0.vxf", Snapshot::Scalar(aux.xi0.clone()))?;
    w.snapshot("X0.vxf", Snapshot::Vector(aux.x0.clone()))?;
    w.snapshot("psi0.vxf", Snapshot::Scalar(aux.psi0.clone()))?;
    w.snapshot("Z.vxf", Snapshot::Vector(aux.z.clone()))?;
    w.snapshot("f_eps.vxf", Snapshot::Scalar(coeffs.f_eps.clone()))?;
    let threshold = config.thresholds.identity_residual;
    let passed = aux.identity_residual < threshold;
    let results = serde_json::json!({
        "identity_residual": aux.identity_residual,
        "threshold": threshold,
        "pass": passed,
        "max_abs_z": aux.z.max_abs(),
        "f_eps_c1_norm": coeffs.f_c1_norm(),
        "stats": to_value(&aux.stats)?,
    });
    Ok((passed, results))
}

fn write_trajectories(w: &mut Writer, stem: &str, trajectories: &[Trajectory]) -> Result<()> {
    w.text(&format!("{stem}.csv"), &trajectories_csv(trajectories))?;
    w.text(
        &format!("{stem}_terminations.json"),
        &serde_json::to_string_pretty(&termination_records(trajectories))?,
    )
}

fn simulate(config: &RunConfig, w: &mut Writer) -> Result<(bool, serde_json::Value)> {
    let case = config.pde_case(None)?;
    let run = case.run()?;
    let tr = &run.tracking.trajectories;
    write_trajectories(w, "trajectories", tr)?;
    let counts: Vec<usize> = run.frames.iter().map(|f| f.vortices.len()).collect();
    w.text("energies.csv", &energies_csv(&run.energies, &counts))?;
    if !run.evolution.is_empty() {
        let rows: Vec<Vec<f64>> = run
            .evolution
            .iter()
            .zip(&run.continuity)
            .map(|(e, c)| {
                vec![
                    e.t,
                    e.energy_rate,
                    e.dissipation,
                    e.work,
                    e.flux,
                    e.residual,
                    c.1,
                ]
            })
            .collect();
        w.text(
            "identities.csv",
            &table_csv(
                &[
                    "t",
                    "energy_rate",
                    "dissipation",
                    "work",
                    "flux",
                    "energy_residual",
                    "continuity_residual",
                ],
                &rows,
            ),
        )?;
    }
    for (k, s) in run.snapshots.iter().enumerate() {
        w.snapshot(&format!("u_{k:05}.vxf"), Snapshot::Complex(s.u.clone()))?;
    }
    w.snapshot("u_final.vxf", Snapshot::Complex(run.final_state.u.clone()))?;
    let (t_star, stop) = pde_stop(tr);
    let results = serde_json::json!({
        "dt": run.dt,
        "steps": run.steps,
        "frames": run.frames.len(),
        "max_modulus": run.max_modulus,
        "forcing_bound_holds": run.forcing_bound_holds,
        "count_change": run.count_change(),
        "t_star": t_star,
        "stop_reason": stop,
        "ambiguities": run.tracking.ambiguities,
        "snapshot_times": run.snapshots.iter().map(|s| s.t).collect::<Vec<_>>(),
    });
    Ok((true, results))
}

fn law_solution(config: &RunConfig) -> Result<OdeSolution> {
    let case = config.pde_case(None)?;
    case.integrate_law(config.law_dt()?)
}

fn write_law(w: &mut Writer, sol: &OdeSolution) -> Result<()> {
    w.text("law.csv", &trajectories_csv(&sol.trajectories()))?;
    w.text(
        "law_stop.json",
        &serde_json::to_string_pretty(&LawStop::of(sol))?,
    )
}

fn law(config: &RunConfig, w: &mut Writer) -> Result<(bool, serde_json::Value)> {
    let sol = law_solution(config)?;
    write_law(w, &sol)?;
    let results = serde_json::json!({
        "t_star": sol.t_star,
        "stop_reason": sol.stop_reason,
        "involved": sol.involved,
        "final_positions": sol.final_positions(),
    });
    Ok((true, results))
}

fn compare(config: &RunConfig, w: &mut Writer) -> Result<(bool, serde_json::Value)> {
    let hash = w.hash.clone();
    let mut report = StudyReport::new("compare");
    let Some(spec) = &config.studies.compare else {
        // Without an inline study, compare what `simulate` and `law` left behind.
        let read =
            |name: &str| -> Result<String> { Ok(std::fs::read_to_string(w.lock.path(name))?) };
        let terms: Vec<TerminationRecord> =
            serde_json::from_str(&read("trajectories_terminations.json")?)?;
        let pde =
            trajectories_from_parts(&parse_trajectory_csv(&read("trajectories.csv")?)?, &terms)?;
        let stop: LawStop = serde_json::from_str(&read("law_stop.json")?)?;
        let ode = ode_solution_from_parts(&parse_trajectory_csv(&read("law.csv")?)?, &stop)?;
        let c = compare_trajectories(&pde, &ode, 0.0)?;
        report.row(
            "stored",
            &hash,
            &[
                ("sup_error", c.sup_error),
                ("window_end", c.window_end),
                ("t_star_pde", c.t_star_pde),
                ("t_star_ode", c.t_star_ode),
            ],
        );
        report.verdict(
            "stop_reasons_match",
            c.stop_pde == c.stop_ode,
            format!("{:?} vs {:?}", c.stop_pde, c.stop_ode),
        );
        w.text("compare.csv", &report_csv(&report))?;
        let results =
            serde_json::json!({"report": to_value(&report)?, "comparisons": [to_value(&c)?]});
        return Ok((report.passed(), results));
    };
    let mut eps = spec.eps.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    let ode = law_solution(config)?;
    write_law(w, &ode)?;
    let runs: Vec<Result<_>> = eps
        .par_iter()
        .map(|&e| {
            let case = config.pde_case(Some(e))?;
            let prepared = case.prepare()?;
            let inf_b = prepared.b.min();
            let run = case.run_prepared(&prepared)?;
            Ok((run, inf_b))
        })
        .collect();
    let mut comparisons = Vec::new();
    let mut growths = Vec::new();
    for (&e, r) in eps.iter().zip(runs) {
        let (run, inf_b) = r?;
        write_trajectories(
            w,
            &format!("trajectories_eps{e}"),
            &run.tracking.trajectories,
        )?;
        let c = compare_trajectories(&run.tracking.trajectories, &ode, spec.guard)?;
        let g = energy_growth(&run, e, inf_b);
        let mut metrics = vec![
            ("eps", e),
            ("sup_error", c.sup_error),
            ("window_end", c.window_end),
            ("t_star_pde", c.t_star_pde),
            ("t_star_ode", c.t_star_ode),
            ("t_star_gap", (c.t_star_pde - c.t_star_ode).abs()),
            ("max_excess", g.max_excess),
            ("excess_threshold", g.threshold),
        ];
        if let Some(t) = g.count_constant_until {
            metrics.push(("count_change", t));
        }
        report.row(format!("eps={e}"), &hash, &metrics);
        comparisons.push(c);
        growths.push(g);
    }
    let errors: Vec<f64> = comparisons.iter().map(|c| c.sup_error).collect();
    report.verdict(
        "trajectory_error_decreases",
        strictly_decreasing(&errors),
        format!("{errors:?}"),
    );
    let reasons_match = comparisons.iter().all(|c| c.stop_pde == c.stop_ode);
    report.verdict(
        "stop_reasons_match",
        reasons_match,
        "PDE and law stop for the same reason",
    );
    let below = growths.iter().all(|g| g.max_excess < g.threshold);
    let excess: Vec<f64> = growths.iter().map(|g| g.max_excess).collect();
    report.verdict(
        "excess_below_threshold",
        below,
        format!("{excess:?} against pi inf b"),
    );
    let monotone = excess.windows(2).all(|p| p[1] <= p[0]);
    report.verdict("excess_non_increasing", monotone, format!("{excess:?}"));
    w.text("compare.csv", &report_csv(&report))?;
    let results = serde_json::json!({
        "report": to_value(&report)?,
        "comparisons": to_value(&comparisons)?,
        "energy_growth": to_value(&growths)?,
    });
    Ok((report.passed(), results))
}

fn report_csv(report: &StudyReport) -> String {
    let mut keys: Vec<&String> = report.rows.iter().flat_map(|r| r.metrics.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut s = String::from("case,config_hash");
    for k in &keys {
        s.push(',');
        s.push_str(k);
    }
    s.push('\n');
    for r in &report.rows {
        s.push_str(&format!("{},{}", r.case, r.config_hash));
        for k in &keys {
            s.push(',');
            if let Some(v) = r.metrics.get(*k) {
                s.push_str(&fmt_float(*v));
            }
        }
        s.push('\n');
    }
    s
}

fn critical(config: &RunConfig, w: &mut Writer) -> Result<(bool, serde_json::Value)> {
    let spec = config
        .confinement()?
        .ok_or_else(|| Error::config("studies.critical", "required for `critical`"))?;
    let c = config.studies.critical.as_ref().expect("checked above");
    let template = config.ode_system()?;
    let initial: Vec<[f64; 2]> = config.vortices.iter().map(|v| v.position).collect();
    let report = critical_current(&template, &initial, &c.lambdas, &spec, c.tolerance)?;
    let rows: Vec<Vec<f64>> = report
        .lambdas
        .iter()
        .zip(&report.verdicts)
        .map(|(l, v)| vec![*l, f64::from(u8::from(*v))])
        .collect();
    w.text("critical.csv", &table_csv(&["lambda", "confined"], &rows))?;
    let verdict = match report.estimate {
        CriticalEstimate::AboveGrid => "above grid".to_string(),
        CriticalEstimate::BelowGrid => "below grid".to_string(),
        CriticalEstimate::Bracket { lambda0, .. } => format!("lambda0 = {lambda0}"),
    };
    let results = serde_json::json!({"verdict": verdict, "report": to_value(&report)?});
    Ok((true, results))
}

fn convergence(config: &RunConfig, w: &mut Writer) -> Result<(bool, serde_json::Value)> {
    let batteries = &config.studies.convergence;
    if batteries.is_empty() {
        return Err(Error::config(
            "studies.convergence",
            "no batteries configured",
        ));
    }
    let mut report = StudyReport::new("convergence");
    let mut estimates = Vec::new();
    for b in batteries {
        for e in convergence_battery(b.target, &b.ladder)? {
            let name = format!("{:?}:{}", b.target, e.quantity).to_lowercase();
            let mut metrics = vec![("order", e.order), ("band_lo", e.band.0)];
            if let Some(hi) = e.band.1 {
                metrics.push(("band_hi", hi));
            }
            let labels: Vec<String> = (0..e.errors.len()).map(|k| format!("error_{k}")).collect();
            metrics.extend(
                labels
                    .iter()
                    .map(String::as_str)
                    .zip(e.errors.iter().copied()),
            );
            report.row(name.clone(), &w.hash, &metrics);
            report.verdict(
                &name,
                e.pass,
                match e.band.1 {
                    Some(hi) => format!("order {:.3} in [{}, {hi}]", e.order, e.band.0),
                    None => format!("order {:.3} at least {}", e.order, e.band.0),
                },
            );
            estimates.push(e);
        }
    }
    w.text("convergence.csv", &report_csv(&report))?;
    let results =
        serde_json::json!({"report": to_value(&report)?, "estimates": to_value(&estimates)?});
    Ok((report.passed(), results))
}
