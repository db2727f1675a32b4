//! Command implementations. Every command writes its artifacts into the output directory and
//! returns whether all enabled verdicts passed.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use ssprofile::continuation::*;
use ssprofile::expander::*;
use ssprofile::residual::*;
use ssprofile::shrinker::*;
use ssprofile::types::fmt17;
use ssprofile::{build_grid_rmin, BoundaryData, Mode, PhysicalParams, ProfileTriple, RadialGrid, Startup};

use crate::config::*;
use crate::error::CliError;
use crate::output::*;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictLine {
    pub name: String,
    pub enabled: bool,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub pass: bool,
    pub files: Vec<String>,
    pub verdicts: Vec<VerdictLine>,
}

fn outcome(verdicts: Vec<VerdictLine>, files: Vec<String>) -> RunOutcome {
    RunOutcome { pass: verdicts.iter().all(|v| !v.enabled || v.pass), files, verdicts }
}

fn verdict(name: &str, enabled: bool, pass: bool, detail: String) -> VerdictLine {
    VerdictLine { name: name.to_string(), enabled, pass, detail }
}

fn status(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

/// Grid numbers as resolved for a run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedGrid {
    pub delta: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub inner: usize,
    pub outer: usize,
    pub nodes: usize,
}

pub fn run_pipeline(cfg: &RunConfig, jobs: usize) -> Result<RunOutcome, CliError> {
    match cfg.command {
        Command::SolveExpander => solve_expander(cfg),
        Command::VerifyResiduals => verify_residuals(cfg),
        Command::Scan => scan(cfg, jobs),
        Command::ShrinkerAudit => shrinker_audit(cfg),
        Command::Constants => constants(cfg),
    }
}

#[derive(Serialize)]
struct PicardSummary {
    iterations: usize,
    distances: Vec<f64>,
    contraction_estimates: Vec<f64>,
    max_ball_distance: f64,
    ball_radius: f64,
}

#[derive(Serialize)]
struct MonitorSummary {
    constants: BootstrapConstants,
    chain_feasible: bool,
    tightest: ChainCheck,
    z_delta: f64,
    z_sup: f64,
    verdict: bool,
}

#[derive(Serialize)]
struct ResidualSummary {
    window: [f64; 2],
    max_rel: [f64; 3],
    max_abs: [f64; 3],
    tolerance: f64,
}

#[derive(Serialize)]
struct SolveReport {
    command: &'static str,
    status: &'static str,
    params: PhysicalParams,
    boundary: BoundaryData,
    p_exponent: f64,
    grid: ResolvedGrid,
    smallness: SmallnessReport,
    picard: PicardSummary,
    mass_identity_error: f64,
    envelopes: EnvelopeConstants,
    monitor: MonitorSummary,
    asymptotics: Option<AsymptoticFit>,
    asymptotics_error: Option<String>,
    residual: ResidualSummary,
    verdicts: Vec<VerdictLine>,
}

fn expander_grid(cfg: &RunConfig, bd: &BoundaryData) -> Result<(RadialGrid, ResolvedGrid), CliError> {
    let r_max = cfg.grid.r_max(bd.delta);
    let r_min = cfg.grid.r_min(bd.delta);
    let grid = build_grid_rmin(bd.delta, r_max, cfg.grid.inner, cfg.grid.outer, r_min)?;
    let res = ResolvedGrid { delta: bd.delta, r_min, r_max, inner: cfg.grid.inner, outer: cfg.grid.outer, nodes: grid.len() };
    Ok((grid, res))
}

fn plot_csv(profile: &ProfileTriple, params: &PhysicalParams, bd: &BoundaryData, env: &EnvelopeConstants) -> String {
    let mut s = String::from("r,P,U,Theta,Uprime,Thetaprime,P_upper,P_lower,U_bound,Uprime_bound,Theta_bound,Thetaprime_bound\n");
    for (i, &r) in profile.r().iter().enumerate() {
        let c = envelope_curves(r, params, bd);
        let row = [
            r,
            profile.p[i],
            profile.u[i],
            profile.theta[i],
            profile.u_prime[i],
            profile.theta_prime[i],
            env.p_upper * c[0],
            env.p_lower * c[0],
            env.u * c[1],
            env.u_prime * c[2],
            env.theta * c[3],
            env.theta_prime * c[4],
        ];
        s.push_str(&row.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn solve_expander(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let p = cfg.params;
    let bd = validate_point(&p, &cfg.boundary)?;
    if cfg.grid.outer < 8 {
        return Err(CliError::Validation { field: "grid.outer".into(), message: "solve-expander needs at least 8 outer nodes".into() });
    }
    let (grid, rg) = expander_grid(cfg, &bd)?;
    let res = picard_solve_with(&p, &bd, &grid, cfg.tol.picard, cfg.tol.max_iter, cfg.tol.smallness)?;
    let global = extend_global(&res.profile, &p, &grid, cfg.tol.ode)?;
    let mass_err = mass_identity_error(&global, &p)?;
    let env = envelope_constants(&global, &p, &bd);
    let search = bootstrap_search(&p, &bd);
    let mon = bootstrap_monitor(&global, &search.constants, &bd, &p);
    let (fit, fit_err) = match fit_asymptotics(&global, default_fit_window(rg.r_max)) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let window = [2.0 * bd.delta, rg.r_max / 2.0];
    let resid = residual_expander(&global, &p).with_window(window);

    let mut v = vec![verdict("picard converged", true, true, format!("{} iterations", res.history.len()))];
    let comp = res.smallness.composite_alpha_lt_1.unwrap_or(res.smallness.composite_alpha_eq_1);
    v.push(verdict("smallness", cfg.checks.smallness, res.smallness.pass, format!("composite {comp:e} vs {:e}", cfg.tol.smallness)));
    v.push(verdict(
        "bootstrap monitor",
        cfg.checks.monitor,
        mon.verdict,
        format!("Z(delta) {:e}, sup Z {:e}; constant chain {}", mon.z_delta, mon.z_sup, if search.feasible { "feasible" } else { "infeasible" }),
    ));
    let worst = resid.max_rel.iter().cloned().fold(0.0, f64::max);
    v.push(verdict("residual", cfg.checks.residual, worst <= cfg.tol.residual, format!("max relative {worst:e} on [{:e}, {:e}]", window[0], window[1])));
    let (fit_pass, fit_detail) = match &fit {
        Some(f) => {
            let ok = [f.rate_p, f.rate_u, f.rate_theta].iter().all(|r| (r - 2.0).abs() <= 2.0 * cfg.tol.rate)
                && f.p_inf > 0.0
                && f.u_inf > 0.0
                && f.theta_inf > 0.0;
            (ok, format!("rates {} {} {}", f.rate_p, f.rate_u, f.rate_theta))
        }
        None => (false, fit_err.clone().unwrap_or_default()),
    };
    v.push(verdict("asymptotics", cfg.checks.asymptotics, fit_pass, fit_detail));
    let out = outcome(v, Vec::new());

    let ratios: Vec<f64> = res.history.iter().filter_map(|h| h.contraction_estimate).collect();
    let report = SolveReport {
        command: Command::SolveExpander.name(),
        status: status(out.pass),
        params: p,
        boundary: bd,
        p_exponent: bd.p_exponent(&p),
        grid: rg,
        smallness: res.smallness.clone(),
        picard: PicardSummary {
            iterations: res.history.len(),
            distances: res.history.iter().map(|h| h.norm_distance).collect(),
            contraction_estimates: ratios,
            max_ball_distance: res.max_ball_distance,
            ball_radius: bd.a_slope / 2.0,
        },
        mass_identity_error: mass_err,
        envelopes: env,
        monitor: MonitorSummary {
            constants: search.constants,
            chain_feasible: search.feasible,
            tightest: search.tightest.clone(),
            z_delta: mon.z_delta,
            z_sup: mon.z_sup,
            verdict: mon.verdict,
        },
        asymptotics: fit,
        asymptotics_error: fit_err,
        residual: ResidualSummary { window, max_rel: resid.max_rel, max_abs: resid.max_abs, tolerance: cfg.tol.residual },
        verdicts: out.verdicts.clone(),
    };
    let dir = &cfg.output_dir;
    let files = vec![
        write_atomic(dir, "profile.csv", global.to_csv().as_bytes())?,
        write_atomic(dir, "residual.csv", resid.to_csv().as_bytes())?,
        write_jsonl(dir, "history.jsonl", &history_records(&res.history))?,
        write_atomic(dir, "plot.csv", plot_csv(&global, &p, &bd, &env).as_bytes())?,
        write_json(dir, "report.json", &report)?,
    ];
    Ok(RunOutcome { files: names(&files), ..out })
}

#[derive(Serialize)]
struct HistoryRecord {
    iter: usize,
    distance: f64,
    contraction: Option<f64>,
}

fn history_records(history: &[IterationState]) -> Vec<HistoryRecord> {
    history.iter().map(|h| HistoryRecord { iter: h.iterate_index, distance: h.norm_distance, contraction: h.contraction_estimate }).collect()
}

fn names(paths: &[std::path::PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect()
}

fn read_profile(path: &Path, startup: Startup, mode: Mode) -> Result<ProfileTriple, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(ProfileTriple::from_csv(&text, startup, mode)?)
}

#[derive(Serialize)]
struct ResidualFileReport {
    command: &'static str,
    status: &'static str,
    mode: &'static str,
    nodes: usize,
    residual: ResidualSummary,
    verdicts: Vec<VerdictLine>,
}

fn verify_residuals(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let p = cfg.params;
    let bd = validate_point(&p, &cfg.boundary)?;
    let path = cfg
        .input_profile
        .as_ref()
        .ok_or_else(|| CliError::Validation { field: "input.profile".into(), message: "verify-residuals needs a profile CSV".into() })?;
    let startup = match cfg.input_mode {
        Mode::Expander => Startup { p_exponent: bd.p_exponent(&p), u_slope: bd.a_slope, theta0: bd.theta0 },
        Mode::Shrinker => Startup { p_exponent: 0.0, u_slope: 0.0, theta0: 0.0 },
    };
    let prof = read_profile(path, startup, cfg.input_mode)?;
    let r_last = *prof.r().last().unwrap();
    let window = [2.0 * bd.delta, r_last / 2.0];
    let rep = match cfg.input_mode {
        Mode::Expander => residual_expander(&prof, &p),
        Mode::Shrinker => residual_shrinker(&prof, &p),
    }
    .with_window(window);
    let worst = rep.max_rel.iter().cloned().fold(0.0, f64::max);
    let out = outcome(
        vec![verdict("residual", cfg.checks.residual, worst <= cfg.tol.residual, format!("max relative {worst:e} on [{:e}, {:e}]", window[0], window[1]))],
        Vec::new(),
    );
    let report = ResidualFileReport {
        command: Command::VerifyResiduals.name(),
        status: status(out.pass),
        mode: if cfg.input_mode == Mode::Shrinker { "shrinker" } else { "expander" },
        nodes: prof.len(),
        residual: ResidualSummary { window, max_rel: rep.max_rel, max_abs: rep.max_abs, tolerance: cfg.tol.residual },
        verdicts: out.verdicts.clone(),
    };
    let dir = &cfg.output_dir;
    let files = vec![write_atomic(dir, "residual.csv", rep.to_csv().as_bytes())?, write_json(dir, "residual.json", &report)?];
    Ok(RunOutcome { files: names(&files), ..out })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub index: usize,
    pub values: Vec<f64>,
    pub status: String,
    pub smallness_composite: Option<f64>,
    pub smallness_pass: bool,
    pub bootstrap_feasible: bool,
    pub bootstrap_tightest: String,
    pub bootstrap_ratio: f64,
    pub picard_converged: bool,
    pub picard_iterations: usize,
    pub picard_last_ratio: Option<f64>,
    pub message: String,
}

fn set_value(params: &mut PhysicalParams, b: &mut BoundarySpec, key: &str, v: f64) {
    match key {
        "physics.alpha" => params.alpha = v,
        "physics.c_v" => params.c_v = v,
        "physics.kappa" => params.kappa = v,
        "physics.gas_r" => params.gas_r = v,
        "physics.mu0" => params.mu0 = v,
        "physics.lambda0" => params.lambda0 = v,
        "boundary.a" => b.a = v,
        "boundary.delta" => b.delta = v,
        "boundary.p_delta" => b.p_delta = v,
        "boundary.theta0" => b.theta0 = Some(v),
        "boundary.eps" => b.eps = Some(v),
        _ => unreachable!("scan keys are checked when the config is parsed"),
    }
}

/// Cartesian product of the axes, first axis slowest.
pub fn lattice(axes: &[ScanAxis]) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for a in axes {
        let vals = a.values();
        pts = pts.into_iter().flat_map(|p| vals.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
    }
    pts
}

/// Evaluates one lattice point: smallness, constant chain, and the inner fixed point.
pub fn scan_point(cfg: &RunConfig, index: usize, values: &[f64]) -> ScanRow {
    let mut params = cfg.params;
    let mut b = cfg.boundary;
    for (a, &v) in cfg.scan.iter().zip(values) {
        set_value(&mut params, &mut b, &a.key, v);
    }
    let mut row = ScanRow {
        index,
        values: values.to_vec(),
        status: String::new(),
        smallness_composite: None,
        smallness_pass: false,
        bootstrap_feasible: false,
        bootstrap_tightest: String::new(),
        bootstrap_ratio: f64::NAN,
        picard_converged: false,
        picard_iterations: 0,
        picard_last_ratio: None,
        message: String::new(),
    };
    let bd = match validate_point(&params, &b) {
        Ok(bd) => bd,
        Err(e) => {
            row.status = "invalid".into();
            row.message = e.to_string();
            return row;
        }
    };
    let sm = check_smallness(&params, &bd, cfg.tol.smallness);
    row.smallness_composite = Some(sm.composite_alpha_lt_1.unwrap_or(sm.composite_alpha_eq_1));
    row.smallness_pass = sm.pass;
    let search = bootstrap_search(&params, &bd);
    row.bootstrap_feasible = search.feasible;
    row.bootstrap_tightest = search.tightest.name.clone();
    row.bootstrap_ratio = search.tightest.ratio;
    let solved = build_grid_rmin(bd.delta, bd.delta, cfg.grid.inner, 0, cfg.grid.r_min(bd.delta))
        .and_then(|g| picard_solve_with(&params, &bd, &g, cfg.tol.picard, cfg.tol.max_iter, cfg.tol.smallness));
    match solved {
        Ok(r) => {
            row.picard_converged = true;
            row.picard_iterations = r.history.len();
            row.picard_last_ratio = r.history.last().and_then(|h| h.contraction_estimate);
        }
        Err(e) => row.message = e.to_string(),
    }
    let failed: Vec<&str> = [("smallness", row.smallness_pass), ("bootstrap", row.bootstrap_feasible), ("picard", row.picard_converged)]
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .collect();
    row.status = if failed.is_empty() { "ok".into() } else { format!("fail:{}", failed.join("+")) };
    row
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn scan_csv(cfg: &RunConfig, rows: &[ScanRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string()];
    header.extend(cfg.scan.iter().map(|a| a.key.clone()));
    header.extend(
        [
            "status",
            "smallness_composite",
            "smallness_pass",
            "bootstrap_feasible",
            "bootstrap_tightest",
            "bootstrap_ratio",
            "picard_converged",
            "picard_iterations",
            "picard_last_ratio",
            "message",
        ]
        .map(String::from),
    );
    let csv_err = |e: csv::Error| CliError::io("scan.csv", std::io::Error::other(e));
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.index.to_string()];
        rec.extend(r.values.iter().map(|v| fmt17(*v)));
        rec.extend([
            r.status.clone(),
            opt(r.smallness_composite),
            r.smallness_pass.to_string(),
            r.bootstrap_feasible.to_string(),
            r.bootstrap_tightest.clone(),
            fmt17(r.bootstrap_ratio),
            r.picard_converged.to_string(),
            r.picard_iterations.to_string(),
            opt(r.picard_last_ratio),
            r.message.clone(),
        ]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| CliError::io("scan.csv", std::io::Error::other(e.to_string())))
}

#[derive(Serialize)]
struct ScanReport<'a> {
    command: &'static str,
    status: &'static str,
    axes: &'a [ScanAxis],
    points: usize,
    ok: usize,
    rows: &'a [ScanRow],
}

/// Runs every lattice point on a pool of `jobs` threads; results are ordered by lattice index.
pub fn scan_rows(cfg: &RunConfig, jobs: usize) -> Result<Vec<ScanRow>, CliError> {
    let pts = lattice(&cfg.scan);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Validation { field: "jobs".into(), message: e.to_string() })?;
    Ok(pool.install(|| pts.par_iter().enumerate().map(|(i, v)| scan_point(cfg, i, v)).collect()))
}

fn scan(cfg: &RunConfig, jobs: usize) -> Result<RunOutcome, CliError> {
    let rows = scan_rows(cfg, jobs)?;
    let ok = rows.iter().filter(|r| r.status == "ok").count();
    let report = ScanReport { command: Command::Scan.name(), status: "pass", axes: &cfg.scan, points: rows.len(), ok, rows: &rows };
    let dir = &cfg.output_dir;
    let files = vec![write_atomic(dir, "scan.csv", &scan_csv(cfg, &rows)?)?, write_json(dir, "scan.json", &report)?];
    let v = vec![verdict("scan completed", true, true, format!("{ok} of {} points ok", rows.len()))];
    Ok(outcome(v, names(&files)))
}

#[derive(Serialize)]
struct AuditFileReport {
    command: &'static str,
    status: &'static str,
    candidate: CandidateKind,
    family: Option<CandidateSpec>,
    params: PhysicalParams,
    eps: f64,
    threshold: f64,
    grid: ResolvedGrid,
    verdict_message: String,
    report: AuditReport,
}

fn shrinker_audit(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let p = cfg.params;
    let au = &cfg.audit;
    let r_max = cfg.grid.r_max.unwrap_or(200.0 * au.eps);
    let r_min = cfg.grid.r_min.unwrap_or(1e-6 * au.eps);
    let zero_start = Startup { p_exponent: 0.0, u_slope: 0.0, theta0: 0.0 };
    let (prof, family) = match au.candidate {
        CandidateKind::Zero => (zero_candidate(au.p_const, &build_grid_rmin(au.eps, r_max, cfg.grid.inner, cfg.grid.outer, r_min)?)?, None),
        CandidateKind::Family => {
            (candidate_profile(&au.family, &build_grid_rmin(au.eps, r_max, cfg.grid.inner, cfg.grid.outer, r_min)?)?, Some(au.family))
        }
        CandidateKind::File => (read_profile(cfg.input_profile.as_ref().unwrap(), zero_start, Mode::Shrinker)?, None),
    };
    let rep = audit_shrinker(&prof, &p, au.eps, au.threshold)?;
    let pass = matches!(rep.verdict, Verdict::Trivial | Verdict::NoSuchShrinker);
    let out = outcome(vec![verdict("audit", true, pass, rep.verdict.message())], Vec::new());
    let grid = ResolvedGrid {
        delta: au.eps,
        r_min: prof.r()[0],
        r_max: *prof.r().last().unwrap(),
        inner: cfg.grid.inner,
        outer: cfg.grid.outer,
        nodes: prof.len(),
    };
    let report = AuditFileReport {
        command: Command::ShrinkerAudit.name(),
        status: status(pass),
        candidate: au.candidate,
        family,
        params: p,
        eps: au.eps,
        threshold: au.threshold,
        grid,
        verdict_message: rep.verdict.message(),
        report: rep,
    };
    let dir = &cfg.output_dir;
    let files = vec![write_atomic(dir, "candidate.csv", prof.to_csv().as_bytes())?, write_json(dir, "audit.json", &report)?];
    Ok(RunOutcome { files: names(&files), ..out })
}

#[derive(Serialize)]
struct ConstantsReport {
    command: &'static str,
    status: &'static str,
    params: PhysicalParams,
    boundary: BoundaryData,
    search: BootstrapSearch,
}

fn constants(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let p = cfg.params;
    let bd = validate_point(&p, &cfg.boundary)?;
    let search = bootstrap_search(&p, &bd);
    let detail = if search.feasible {
        format!("M1 {:e}, M1' {:e}, M2 {:e}", search.constants.m1, search.constants.m1p, search.constants.m2)
    } else {
        format!("infeasible; tightest {} (ratio {:e})", search.tightest.name, search.tightest.ratio)
    };
    let out = outcome(vec![verdict("constant chain", true, search.feasible, detail)], Vec::new());
    let report = ConstantsReport { command: Command::Constants.name(), status: status(out.pass), params: p, boundary: bd, search };
    let files = vec![write_json(&cfg.output_dir, "constants.json", &report)?];
    Ok(RunOutcome { files: names(&files), ..out })
}
