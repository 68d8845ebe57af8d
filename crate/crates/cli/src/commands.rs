use riccati_kit::classify::{
    classify_equation, classify_solution, principal_solution, Boundedness, BoundednessVerdict,
    SolutionClassification,
};
use riccati_kit::linsys::{classify_system_solution, integrate_system, linearly_independent, ratio_diagnostics};
use riccati_kit::ode::Status;
use riccati_kit::riccati::{
    det_identity_residual, family_solution, fundamental_pair, pair_integral, reciprocity_residual, solve,
};
use riccati_kit::{Error, RiccatiTrajectory};
use serde_json::{json, Value};

use crate::config::{matrix_from_json, matrix_to_json, RunConfig};
use crate::output::{matrix_header, push_matrix, table_csv, trajectory_csv};
use crate::CliError;

/// Residual bound under which `identities` reports `holds`.
pub const IDENTITY_TOL: f64 = 1e-6;

pub struct Outcome {
    pub verdict: String,
    pub confidence: f64,
    pub evidence: Value,
    pub files: Vec<(String, String)>,
}

fn status_json(status: &Status<f64>) -> Value {
    match status {
        Status::RegularOn(t) => json!({"kind": "regular_on", "t_end": t}),
        Status::BlowUpAt {
            time,
            bracket,
            last_norm,
            wide,
        } => json!({
            "kind": "blow_up",
            "time": time,
            "bracket": [bracket.0, bracket.1],
            "last_norm": last_norm,
            "wide": wide,
        }),
    }
}

fn require_regular(rt: &RiccatiTrajectory, what: &str) -> Result<(), CliError> {
    match rt.status().blowup_time() {
        Some(t) => Err(CliError::Numerical(format!("{what} is not regular: escape near t = {t}"))),
        None => Ok(()),
    }
}

fn boundedness_json(b: &BoundednessVerdict<f64>) -> Value {
    let kind = match &b.kind {
        Boundedness::Bounded { sup_norm } => json!({"kind": "bounded", "sup_norm": sup_norm}),
        Boundedness::Unbounded { growth_ratios } => json!({"kind": "unbounded", "growth_ratios": growth_ratios}),
        Boundedness::Inconclusive => json!({"kind": "inconclusive"}),
    };
    json!({
        "verdict": kind,
        "horizon": b.horizon,
        "plateau_rise": b.plateau_rise,
        "growth_ratios": b.growth_ratios,
    })
}

fn classification_json(c: &SolutionClassification<f64>) -> Value {
    json!({
        "class": c.class.as_str(),
        "confidence": c.confidence,
        "low_confidence": c.low_confidence,
        "blowup_time": c.blowup_time,
        "boundedness": c.boundedness.as_ref().map(boundedness_json),
        "final_value": c.final_value.as_ref().map(matrix_to_json),
    })
}

pub fn solve_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.riccati_spec()?;
    let n = spec.dim();
    let rt = solve(&spec, &cfg.z0(n)?, cfg.t1, cfg.horizon, &cfg.integrator.build()?)?;
    let rows = cfg
        .grid()
        .into_iter()
        .filter(|&t| t <= rt.t_end())
        .map(|t| Ok((t, rt.z(t)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    let residual = rt.max_residual(rt.t1(), rt.t_end(), 200)?;
    let (verdict, confidence) = match rt.status() {
        Status::RegularOn(_) => ("regular_on", 1.0),
        Status::BlowUpAt { wide, .. } => ("blow_up", if *wide { 0.7 } else { 1.0 }),
    };
    Ok(Outcome {
        verdict: verdict.into(),
        confidence,
        evidence: json!({
            "status": status_json(rt.status()),
            "knots": rt.trajectory().n_knots(),
            "max_residual": residual,
            "z_end": matrix_to_json(&rt.z(rt.t_end())?),
        }),
        files: vec![("trajectory.csv".into(), trajectory_csv(n, &rows))],
    })
}

pub fn family_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.riccati_spec()?;
    let n = spec.dim();
    let int = cfg.integrator.build()?;
    let (z0, lambda) = (cfg.z0(n)?, cfg.lambda(n)?);
    let base = solve(&spec, &z0, cfg.t1, cfg.horizon, &int)?;
    require_regular(&base, "base solution")?;
    let fd = fundamental_pair(&base)?;
    let direct = solve(&spec, &(&z0 + &lambda), cfg.t1, cfg.horizon, &int)?;
    // stay clear of the direct solution's escape when comparing
    let direct_end = match direct.status().blowup_time() {
        Some(_) => direct.t_end() - 1e-3 * (cfg.horizon - cfg.t1),
        None => direct.t_end(),
    };

    let mut rows = Vec::new();
    let mut blowup = None;
    let mut deviation: f64 = 0.0;
    for t in cfg.grid() {
        match family_solution(&fd, &lambda, t) {
            Ok(z) => {
                if t <= direct_end {
                    let d = direct.z(t)?;
                    deviation = deviation.max((&z - &d).op_norm() / d.op_norm().max(1.0));
                }
                rows.push((t, z));
            }
            Err(Error::FamilyBlowUp { t }) => {
                blowup = Some(t);
                break;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(Outcome {
        verdict: if blowup.is_some() { "family_blow_up" } else { "regular" }.into(),
        confidence: 1.0,
        evidence: json!({
            "lambda": matrix_to_json(&lambda),
            "blowup_time": blowup,
            "direct_status": status_json(direct.status()),
            "max_deviation_vs_direct": deviation,
        }),
        files: vec![("family.csv".into(), trajectory_csv(n, &rows))],
    })
}

pub fn identities_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.riccati_spec()?;
    let n = spec.dim();
    let int = cfg.integrator.build()?;
    let (z0, lambda) = (cfg.z0(n)?, cfg.lambda(n)?);
    let zk = solve(&spec, &z0, cfg.t1, cfg.horizon, &int)?;
    require_regular(&zk, "base solution")?;
    let zj = solve(&spec, &(&z0 + &lambda), cfg.t1, cfg.horizon, &int)?;
    require_regular(&zj, "offset solution")?;

    let mut rows = Vec::new();
    let (mut det_max, mut rec_max): (f64, f64) = (0.0, 0.0);
    for t in cfg.grid() {
        let d = det_identity_residual(&zj, &zk, t)?;
        let r = reciprocity_residual(&zj, &zk, t)?;
        det_max = det_max.max(d);
        rec_max = rec_max.max(r);
        rows.push(vec![t, d, r, pair_integral(&zj, &zk, t)?]);
    }
    let holds = det_max <= IDENTITY_TOL && rec_max <= IDENTITY_TOL;
    Ok(Outcome {
        verdict: if holds { "holds" } else { "violated" }.into(),
        confidence: 1.0,
        evidence: json!({
            "lambda": matrix_to_json(&lambda),
            "tolerance": IDENTITY_TOL,
            "max_det_identity_residual": det_max,
            "max_reciprocity_residual": rec_max,
        }),
        files: vec![(
            "identities.csv".into(),
            table_csv(&["t", "det_identity_residual", "reciprocity_residual", "pair_integral"], &rows),
        )],
    })
}

pub fn classify_solution_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.riccati_spec()?;
    let z0 = cfg.z0(spec.dim())?;
    let c = classify_solution(&spec, &z0, cfg.t1, cfg.horizon, &cfg.integrator.build()?, &cfg.classify.build()?)?;
    let rows: Vec<Vec<f64>> = c
        .boundedness
        .as_ref()
        .map(|b| b.samples.iter().map(|&(t, m)| vec![t, m]).collect())
        .unwrap_or_default();
    Ok(Outcome {
        verdict: c.class.as_str().into(),
        confidence: c.confidence,
        evidence: classification_json(&c),
        files: vec![("mu_norm.csv".into(), table_csv(&["t", "mu_norm"], &rows))],
    })
}

pub fn classify_equation_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.riccati_spec()?;
    let n = spec.dim();
    let sampling = cfg.sampling.build(cfg.seed, cfg.horizon)?;
    let eq = classify_equation(&spec, cfg.t1, &sampling, &cfg.integrator.build()?, &cfg.classify.build()?)?;

    let mut csv = matrix_header("index,class,confidence", n);
    csv.push('\n');
    for (i, s) in eq.samples.iter().enumerate() {
        let (class, conf) = match &s.classification {
            Some(c) => (c.class.as_str(), crate::output::num(c.confidence)),
            None => ("failed", String::new()),
        };
        let mut line = format!("{i},{class},{conf}");
        push_matrix(&mut line, &s.z0);
        csv.push_str(&line);
        csv.push('\n');
    }
    let representatives: Vec<Value> = eq
        .extremal_orbits
        .iter()
        .map(|o| json!(matrix_to_json(&eq.samples[o[0]].z0)))
        .collect();
    Ok(Outcome {
        verdict: eq.verdict.as_str().into(),
        confidence: eq.confidence,
        evidence: json!({
            "samples": eq.samples.len(),
            "regular": eq.regular,
            "normal": eq.normal,
            "extremal": eq.extremal,
            "not_regular": eq.not_regular,
            "failed": eq.failed,
            "extremal_orbits": eq.extremal_orbits,
            "orbit_representatives": representatives,
        }),
        files: vec![("samples.csv".into(), csv)],
    })
}

pub fn principal_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let spec = cfg.riccati_spec()?;
    let n = spec.dim();
    let int = cfg.integrator.build()?;
    let pcfg = cfg.principal.build(cfg.horizon, cfg.classify.build()?)?;
    let rt0 = solve(&spec, &cfg.z0(n)?, cfg.t1, cfg.horizon, &int)?;
    require_regular(&rt0, "base solution")?;
    let fd = fundamental_pair(&rt0)?;
    let p = principal_solution(&rt0, &fd, &pcfg)?;
    let rows = cfg
        .grid()
        .into_iter()
        .map(|t| Ok((t, p.trajectory.z(t)?)))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Outcome {
        verdict: p.classification.class.as_str().into(),
        confidence: p.classification.confidence,
        evidence: json!({
            "z_star_t1": matrix_to_json(&p.z_star_t1),
            "z_star_t1_integrated": matrix_to_json(&p.trajectory.z(cfg.t1)?),
            "lambda": matrix_to_json(&p.lambda),
            "nu_t1": matrix_to_json(&p.nu_t1),
            "residual": p.residual,
            "residual_ok": p.residual_ok,
            "family_deviation": p.family_deviation,
            "family_ok": p.family_ok,
            "classification": classification_json(&p.classification),
        }),
        files: vec![("trajectory.csv".into(), trajectory_csv(n, &rows))],
    })
}

pub fn system_diagnostics_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sys = cfg.system_spec()?;
    let n = sys.dim();
    let sols = cfg
        .solutions
        .as_ref()
        .filter(|s| s.len() == 2)
        .ok_or_else(|| CliError::Validation("config needs exactly two `solutions`".into()))?;
    let mut initial = Vec::new();
    for (k, s) in sols.iter().enumerate() {
        let phi = matrix_from_json(&s.phi, &format!("solutions[{k}].phi"))?;
        let psi = matrix_from_json(&s.psi, &format!("solutions[{k}].psi"))?;
        if phi.dim() != n || psi.dim() != n {
            return Err(CliError::Validation(format!("solutions[{k}]: expected {n}×{n} blocks")));
        }
        initial.push((phi, psi));
    }
    let int = cfg.integrator.build()?;
    let cc = cfg.classify.build()?;

    let mut trajectories = Vec::new();
    let mut solutions = Vec::new();
    for (k, (phi, psi)) in initial.iter().enumerate() {
        let class = classify_system_solution(&sys, phi, psi, cfg.t1, cfg.horizon, &int, &cc)?;
        let st = integrate_system(&sys, phi, psi, cfg.t1, cfg.horizon, &int)?;
        if !st.is_regular() {
            return Err(CliError::Numerical(format!("solutions[{k}]: det Φ vanishes on the horizon")));
        }
        solutions.push(json!({
            "class": class.class.as_str(),
            "z1": matrix_to_json(&class.z1),
            "classification": classification_json(&class.solution),
            "reduction_residual": st.max_residual(200)?,
        }));
        trajectories.push(st);
    }
    let d = ratio_diagnostics(&trajectories[0], &trajectories[1], &cfg.grid())?;
    let rows: Vec<Vec<f64>> = (0..d.grid.len())
        .map(|i| vec![d.grid[i], d.ratio12[i], d.ratio21[i], d.running_sup[i], d.running_inf[i]])
        .collect();
    let (a, b) = (&initial[0], &initial[1]);
    Ok(Outcome {
        verdict: d.verdict.as_str().into(),
        confidence: 1.0,
        evidence: json!({
            "solutions": solutions,
            "linearly_independent": linearly_independent(&a.0, &a.1, &b.0, &b.1),
            "window_start": d.window_start,
            "log_change": d.log_change,
            "window_log_range": d.window_log_range,
            "window_sup": d.window_sup,
            "window_inf": d.window_inf,
            "final_ratio12": d.ratio12.last(),
            "running_sup": d.running_sup.last(),
            "running_inf": d.running_inf.last(),
        }),
        files: vec![(
            "ratio.csv".into(),
            table_csv(&["t", "ratio12", "ratio21", "running_sup", "running_inf"], &rows),
        )],
    })
}

