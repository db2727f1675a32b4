use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::quad::{cumulative, cumulative_from_first, cumulative_kernel};
use crate::types::{BoundaryData, Mode, PhysicalParams, ProfileTriple, Regime, Startup};

/// Velocity and temperature with their first derivatives on the inner grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerState {
    pub u: Vec<f64>,
    pub u_prime: Vec<f64>,
    pub theta: Vec<f64>,
    pub theta_prime: Vec<f64>,
}

impl InnerState {
    /// The ball centre (A r, Theta0).
    pub fn seed(grid: &RadialGrid, bd: &BoundaryData) -> Self {
        let n = grid.len();
        InnerState {
            u: grid.nodes.iter().map(|r| bd.a_slope * r).collect(),
            u_prime: vec![bd.a_slope; n],
            theta: vec![bd.theta0; n],
            theta_prime: vec![0.0; n],
        }
    }

    pub fn sub(&self, other: &InnerState) -> InnerState {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        InnerState {
            u: d(&self.u, &other.u),
            u_prime: d(&self.u_prime, &other.u_prime),
            theta: d(&self.theta, &other.theta),
            theta_prime: d(&self.theta_prime, &other.theta_prime),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSet {
    pub v: Vec<f64>,
    pub v_tilde: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub f_u: Vec<f64>,
    pub f_theta: Vec<f64>,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationState {
    pub iterate_index: usize,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub norm_distance: f64,
    pub contraction_estimate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallnessReport {
    pub composite_alpha_lt_1: Option<f64>,
    pub composite_alpha_eq_1: f64,
    pub summands: Vec<(String, f64)>,
    pub threshold: f64,
    pub pass: bool,
    pub division_by_zero: bool,
}

pub fn check_smallness(params: &PhysicalParams, bd: &BoundaryData, threshold: f64) -> SmallnessReport {
    let (a, pd, dl, th) = (bd.a_slope, bd.p_delta, bd.delta, bd.theta0);
    let pw = pd.powf(1.0 - params.alpha);
    let division_by_zero = th == 0.0 || a == 0.0;
    let summands = vec![
        ("A".to_string(), a),
        ("P_delta".to_string(), pd),
        ("delta".to_string(), dl),
        ("P_delta^(1-alpha) delta^2".to_string(), pw * dl * dl),
        ("P_delta^(1-alpha) Theta0 / A".to_string(), pw * th / a),
        ("A delta / Theta0".to_string(), a * dl / th),
        ("A^2 / Theta0".to_string(), a * a / th),
        ("P_delta A".to_string(), pd * a),
    ];
    let composite_alpha_lt_1 = if division_by_zero { None } else { Some(summands.iter().map(|s| s.1).sum()) };
    let composite_alpha_eq_1 = a * (1.0 / dl).ln() + pd + dl;
    let pass = match params.regime() {
        Regime::AlphaLtOne => composite_alpha_lt_1.is_some_and(|c| c < threshold),
        Regime::AlphaOne => composite_alpha_eq_1 < threshold,
    };
    SmallnessReport { composite_alpha_lt_1, composite_alpha_eq_1, summands, threshold, pass, division_by_zero }
}

fn check_denominators(u: &[f64], grid: &RadialGrid) -> Result<()> {
    for (&r, &ui) in grid.nodes.iter().zip(u) {
        if !(r / 2.0 - ui > 0.0) {
            return Err(Error::DenominatorVanishing { r });
        }
    }
    Ok(())
}

/// Ṽ(r) = int_0^r (U' - U/s)/(s/2 - U) ds. The integrand is -d/ds ln(1/2 - U/s), so with U/s -> A at
/// the origin the integral is ln((1/2 - A)/(1/2 - U/r)).
pub fn compute_vtilde(u: &[f64], grid: &RadialGrid, bd: &BoundaryData) -> Result<Vec<f64>> {
    check_denominators(u, grid)?;
    let c = (0.5 - bd.a_slope).ln();
    Ok(grid.nodes.iter().zip(u).map(|(&r, &ui)| c - (0.5 - ui / r).ln()).collect())
}

/// V(r) = int_0^r (U' + (d-1)U/s)/(s/2 - U) ds, finite part: the leading k ln r divergence is kept with
/// the startup profile U = A r below the first node, so only V - V(delta) is meaningful.
pub fn compute_v(u: &[f64], grid: &RadialGrid, params: &PhysicalParams, bd: &BoundaryData) -> Result<Vec<f64>> {
    let vt = compute_vtilde(u, grid, bd)?;
    let d = params.dim();
    let k = bd.p_exponent(params);
    let g: Vec<f64> = grid
        .nodes
        .iter()
        .zip(u)
        .map(|(&r, &ui)| {
            let s = ui / r;
            d * s / (0.5 - s) / r
        })
        .collect();
    let (cum, _) = cumulative_from_first(&g, grid)?;
    let base = k * grid.r_min().ln();
    Ok(vt.iter().zip(&cum).map(|(a, b)| a + base + b).collect())
}

/// P = P_delta exp(V - V(delta)), with delta the last node of `grid`'s inner region.
pub fn density_from_v(v: &[f64], grid: &RadialGrid, bd: &BoundaryData) -> Vec<f64> {
    let vd = v[grid.delta_index()];
    v.iter().map(|x| bd.p_delta * (x - vd).exp()).collect()
}

/// v = (U' + (d-1)U/r)/(r/2 - U), so that P' = P v.
pub fn mass_rate(u: &[f64], u_prime: &[f64], grid: &RadialGrid, params: &PhysicalParams) -> Vec<f64> {
    let d = params.dim();
    grid.nodes
        .iter()
        .zip(u.iter().zip(u_prime))
        .map(|(&r, (&ui, &up))| (up + (d - 1.0) * ui / r) / (r / 2.0 - ui))
        .collect()
}

/// W(r) = (1/(2mu0+lambda0)) int_0^r P^(1-alpha) s/2 ds; closed form r^2/(4(2mu0+lambda0)) at alpha = 1.
pub fn compute_w(p: &[f64], grid: &RadialGrid, params: &PhysicalParams, p_exponent: f64) -> Result<Vec<f64>> {
    let nu = params.nu();
    if params.regime() == Regime::AlphaOne {
        return Ok(grid.nodes.iter().map(|r| r * r / (4.0 * nu)).collect());
    }
    let e = 1.0 - params.alpha;
    let g: Vec<f64> = grid.nodes.iter().zip(p).map(|(&r, &pi)| pi.powf(e) * r / (2.0 * nu)).collect();
    Ok(cumulative(&g, grid, e * p_exponent + 1.0)?.0)
}

/// Z(r) = (C_V/kappa) int_0^r P s/2 ds.
pub fn compute_z(p: &[f64], grid: &RadialGrid, params: &PhysicalParams, p_exponent: f64) -> Result<Vec<f64>> {
    let c = params.c_v / params.kappa;
    let g: Vec<f64> = grid.nodes.iter().zip(p).map(|(&r, &pi)| c * pi * r / 2.0).collect();
    Ok(cumulative(&g, grid, p_exponent + 1.0)?.0)
}

/// F_U for 0 < alpha < 1. The (P R Theta)'/P^alpha summand is integrated by parts, which leaves
/// the boundary term R e^{alpha Ṽ} P^(1-alpha) Theta/(1-alpha) and regular integrands only.
pub fn compute_f_u(
    st: &InnerState,
    p: &[f64],
    v_tilde: &[f64],
    grid: &RadialGrid,
    params: &PhysicalParams,
    bd: &BoundaryData,
) -> Result<Vec<f64>> {
    check_denominators(&st.u, grid)?;
    let (d, al, nu, gr) = (params.dim(), params.alpha, params.nu(), params.gas_r);
    let k = bd.p_exponent(params);
    let e = 1.0 - al;
    let v = mass_rate(&st.u, &st.u_prime, grid, params);
    let n = grid.len();
    let mut regular = vec![0.0; n];
    let mut parts = vec![0.0; n];
    let mut boundary = vec![0.0; n];
    for i in 0..n {
        let r = grid.nodes[i];
        let (u, up, th, thp) = (st.u[i], st.u_prime[i], st.theta[i], st.theta_prime[i]);
        let ew = (al * v_tilde[i]).exp() * p[i].powf(e);
        let vt_prime = (up - u / r) / (r / 2.0 - u);
        regular[i] = ew
            * (-(al / 2.0) * d * u * u / (r / 2.0 - u) + v[i] * u * u + 2.0 * u * up + (d - 1.0) * u * u / r);
        parts[i] = ew * (vt_prime * th + thp);
        boundary[i] = gr * ew * th / e;
    }
    let (ri, _) = cumulative(&regular, grid, e * k + 1.0)?;
    let (pi, _) = cumulative(&parts, grid, e * k + 1.0)?;
    let c = gr * al / e;
    // Without cavitation the boundary term keeps its value at the origin.
    let origin = if k == 0.0 { boundary[0] } else { 0.0 };
    Ok((0..n)
        .map(|i| (-al * v_tilde[i]).exp() * (nu * d * bd.a_slope + ri[i] + boundary[i] - origin - c * pi[i]))
        .collect())
}

/// F_U for alpha = 1: R Theta + U^2 + P^-1 int (d-1) P U^2/s + 2 mu0 P^-1 int P' (d-1) U/s.
pub fn compute_f_u_alpha1(
    st: &InnerState,
    p: &[f64],
    grid: &RadialGrid,
    params: &PhysicalParams,
    bd: &BoundaryData,
) -> Result<Vec<f64>> {
    check_denominators(&st.u, grid)?;
    if let Some(i) = p.iter().position(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument(format!("density must be positive (r = {})", grid.nodes[i])));
    }
    let d = params.dim();
    let k = bd.p_exponent(params);
    let v = mass_rate(&st.u, &st.u_prime, grid, params);
    let n = grid.len();
    let g1: Vec<f64> = (0..n).map(|i| (d - 1.0) * p[i] * st.u[i] * st.u[i] / grid.nodes[i]).collect();
    let g2: Vec<f64> = (0..n).map(|i| p[i] * v[i] * (d - 1.0) * st.u[i] / grid.nodes[i]).collect();
    let (c1, _) = cumulative(&g1, grid, k + 1.0)?;
    let (c2, _) = cumulative(&g2, grid, k - 1.0)?;
    Ok((0..n)
        .map(|i| {
            params.gas_r * st.theta[i] + st.u[i] * st.u[i] + c1[i] / p[i] + 2.0 * params.mu0 * c2[i] / p[i]
        })
        .collect())
}

/// F_Theta, assembled from H = G - (2mu0+lambda0) P^alpha U U' - lambda0 (d-1) P^alpha U^2/r with
/// G = U P (U^2/2 + C_V Theta) + U P R Theta, as H + (d-2)/r int H + (kappa/C_V)(U U' + (d-2)U^2/(2r)).
pub fn compute_f_theta(
    st: &InnerState,
    p: &[f64],
    grid: &RadialGrid,
    params: &PhysicalParams,
    bd: &BoundaryData,
) -> Result<Vec<f64>> {
    let (d, al, nu, cv, kap, gr, l0) =
        (params.dim(), params.alpha, params.nu(), params.c_v, params.kappa, params.gas_r, params.lambda0);
    let k = bd.p_exponent(params);
    let n = grid.len();
    let mut g = vec![0.0; n];
    let mut h2 = vec![0.0; n];
    let mut h3 = vec![0.0; n];
    for i in 0..n {
        let (r, u, up, th) = (grid.nodes[i], st.u[i], st.u_prime[i], st.theta[i]);
        g[i] = u * p[i] * (u * u / 2.0 + cv * th) + u * p[i] * gr * th;
        let pa = p[i].powf(al);
        h2[i] = pa * u * up;
        h3[i] = pa * u * u / r;
    }
    let (cg, _) = cumulative(&g, grid, k + 1.0)?;
    let (c2, _) = cumulative(&h2, grid, al * k + 1.0)?;
    let (c3, _) = cumulative(&h3, grid, al * k + 1.0)?;
    Ok((0..n)
        .map(|i| {
            let (r, u, up) = (grid.nodes[i], st.u[i], st.u_prime[i]);
            let f = (d - 2.0) / r;
            (g[i] + f * cg[i]) - nu * (h2[i] + f * c2[i]) - l0 * (d - 1.0) * (h3[i] + f * c3[i])
                + (kap / cv) * (u * up + (d - 2.0) * u * u / (2.0 * r))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiOutput {
    pub state: InnerState,
    pub p: Vec<f64>,
    pub p_prime: Vec<f64>,
    pub kernels: KernelSet,
}

/// One application of the fixed-point map on the inner grid. Derivatives of the new iterate come
/// from the integral identities themselves rather than from differencing.
pub fn apply_phi(st: &InnerState, grid: &RadialGrid, params: &PhysicalParams, bd: &BoundaryData) -> Result<PhiOutput> {
    let regime = params.regime();
    let (d, al, nu, cv, kap) = (params.dim(), params.alpha, params.nu(), params.c_v, params.kappa);
    let k = bd.p_exponent(params);
    let n = grid.len();
    let r = &grid.nodes;

    let v_tilde = compute_vtilde(&st.u, grid, bd)?;
    let v = compute_v(&st.u, grid, params, bd)?;
    let p = density_from_v(&v, grid, bd);
    let rate = mass_rate(&st.u, &st.u_prime, grid, params);
    let p_prime: Vec<f64> = p.iter().zip(&rate).map(|(a, b)| a * b).collect();
    let w = compute_w(&p, grid, params, k)?;
    let z = compute_z(&p, grid, params, k)?;
    let f_u = match regime {
        Regime::AlphaLtOne => compute_f_u(st, &p, &v_tilde, grid, params, bd)?,
        Regime::AlphaOne => compute_f_u_alpha1(st, &p, grid, params, bd)?,
    };
    let f_theta = compute_f_theta(st, &p, grid, params, bd)?;

    let di = params.d as i32;
    let gu: Vec<f64> = (0..n).map(|i| r[i].powi(di - 1) * f_u[i]).collect();
    let (ku, _) = cumulative_kernel(&gu, grid, &w, d - 1.0)?;
    let u_new: Vec<f64> = (0..n).map(|i| r[i].powi(1 - di) * ku[i] / nu).collect();
    let u_new_prime: Vec<f64> = (0..n)
        .map(|i| {
            let wp = p[i].powf(1.0 - al) * r[i] / (2.0 * nu);
            f_u[i] / nu - (d - 1.0) * u_new[i] / r[i] - wp * u_new[i]
        })
        .collect();

    let th0 = bd.theta0;
    let gt: Vec<f64> = (0..n)
        .map(|i| r[i].powi(di - 2) * (f_theta[i] - cv * th0 * p[i] * r[i] / 2.0))
        .collect();
    let (kt, _) = cumulative_kernel(&gt, grid, &z, d - 1.0)?;
    let mut theta = vec![0.0; n];
    let mut theta_prime = vec![0.0; n];
    for i in 0..n {
        let dev = r[i].powi(2 - di) * kt[i] / kap;
        let t = th0 + dev;
        let tp = (f_theta[i] - kap * (d - 2.0) * dev / r[i] - cv * p[i] * r[i] * t / 2.0) / kap;
        theta[i] = t - st.u[i] * st.u[i] / (2.0 * cv);
        theta_prime[i] = tp - st.u[i] * st.u_prime[i] / cv;
    }
    let state = InnerState { u: u_new, u_prime: u_new_prime, theta, theta_prime };
    for (name, arr) in [("U", &state.u), ("U'", &state.u_prime), ("Theta", &state.theta), ("Theta'", &state.theta_prime)] {
        if arr.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { what: format!("Phi output {name}") });
        }
    }
    Ok(PhiOutput { state, p, p_prime, kernels: KernelSet { v, v_tilde, w, z, f_u, f_theta, regime } })
}

/// The weighted sup-norm on (0, delta] applied to a pair given with its derivatives.
pub fn norm_edelta(x: &InnerState, grid: &RadialGrid, params: &PhysicalParams, bd: &BoundaryData) -> f64 {
    let (a, th0, dl) = (bd.a_slope, bd.theta0, bd.delta);
    let al = params.alpha;
    let k = params.dim() * a;
    let mut sup: f64 = 0.0;
    for (i, &r) in grid.nodes.iter().enumerate() {
        if r > dl * (1.0 + 1e-12) {
            break;
        }
        let (u, up, th, thp) = (x.u[i], x.u_prime[i], x.theta[i], x.theta_prime[i]);
        // r |(U/r)'| = |U' - U/r|
        let slope_dev = (up - u / r).abs();
        let val = match params.regime() {
            Regime::AlphaLtOne => {
                let wgt = a * (r / dl).powf(-(1.0 - al - bd.eps_norm) * k) / (bd.p_delta.powf(1.0 - al) * th0);
                let ta = if a == 0.0 { 0.0 } else { a / th0 };
                (u / r).abs() + up.abs() + if a == 0.0 { 0.0 } else { wgt * slope_dev } + ta * th.abs() + ta * thp.abs() / r
            }
            Regime::AlphaOne => (u / r).abs() + r.powf(-bd.eps_norm) * slope_dev + th.abs() + thp.abs() / r,
        };
        sup = sup.max(val);
    }
    sup
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    pub profile: ProfileTriple,
    pub history: Vec<IterationState>,
    pub kernels: KernelSet,
    pub smallness: SmallnessReport,
    /// Largest E^delta distance of any iterate from the ball centre.
    pub max_ball_distance: f64,
}

pub const DEFAULT_SMALLNESS_THRESHOLD: f64 = 0.1;
pub const CONTRACTION_FAILURE_RATIO: f64 = 0.95;

/// Relative tolerance on U(r_min)/r_min - A used as the alpha = 1 ball condition lim U/r = A.
pub const ALPHA1_SLOPE_TOL: f64 = 1e-2;

/// Picard iteration from the ball centre until the E^delta distance between iterates drops below `tol`.
/// The smallness report is computed and returned but not enforced.
pub fn picard_solve(
    params: &PhysicalParams,
    bd: &BoundaryData,
    grid: &RadialGrid,
    tol: f64,
    max_iter: usize,
) -> Result<PicardResult> {
    picard_solve_with(params, bd, grid, tol, max_iter, DEFAULT_SMALLNESS_THRESHOLD)
}

pub fn picard_solve_with(
    params: &PhysicalParams,
    bd: &BoundaryData,
    grid: &RadialGrid,
    tol: f64,
    max_iter: usize,
    smallness_threshold: f64,
) -> Result<PicardResult> {
    params.validate()?;
    bd.validate_ranges(params)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    if params.regime() == Regime::AlphaLtOne && bd.theta0 == 0.0 {
        return Err(Error::InvalidArgument("theta0 = 0 is not admissible for alpha < 1".into()));
    }
    if (grid.delta - bd.delta).abs() > 1e-12 * bd.delta {
        return Err(Error::InvalidArgument("grid delta does not match boundary delta".into()));
    }
    let smallness = check_smallness(params, bd, smallness_threshold);
    let inner = grid.inner();
    let seed = InnerState::seed(&inner, bd);
    let radius = bd.a_slope / 2.0;
    let mut x = seed.clone();
    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    let mut high_ratios = 0;
    let mut max_ball_distance: f64 = 0.0;
    for iter in 1..=max_iter {
        let out = apply_phi(&x, &inner, params, bd)?;
        let y = out.state;
        let dist = norm_edelta(&y.sub(&x), &inner, params, bd);
        let ball = norm_edelta(&y.sub(&seed), &inner, params, bd);
        max_ball_distance = max_ball_distance.max(ball);
        let contraction = prev.map(|p| if p > 0.0 { dist / p } else { 0.0 });
        history.push(IterationState {
            iterate_index: iter,
            u: y.u.clone(),
            theta: y.theta.clone(),
            norm_distance: dist,
            contraction_estimate: contraction,
        });
        if ball > radius * (1.0 + 1e-12) {
            return Err(Error::BallExit { iter, distance: ball, radius });
        }
        if params.regime() == Regime::AlphaOne && bd.a_slope > 0.0 {
            let slope = y.u[0] / inner.nodes[0];
            let dev = (slope - bd.a_slope).abs();
            if dev > ALPHA1_SLOPE_TOL * bd.a_slope {
                return Err(Error::BallExit { iter, distance: dev, radius: ALPHA1_SLOPE_TOL * bd.a_slope });
            }
        }
        if let Some(c) = contraction {
            if c >= CONTRACTION_FAILURE_RATIO {
                high_ratios += 1;
                if high_ratios >= 2 {
                    return Err(Error::ContractionFailure { iter, ratio: c });
                }
            } else {
                high_ratios = 0;
            }
        }
        x = y;
        if dist < tol {
            return finish(x, &inner, params, bd, history, smallness, max_ball_distance);
        }
        prev = Some(dist);
    }
    let last = history.last().and_then(|h| h.contraction_estimate).unwrap_or(f64::NAN);
    Err(Error::NoConvergence { iterations: max_iter, last_contraction: last })
}

fn finish(
    x: InnerState,
    inner: &RadialGrid,
    params: &PhysicalParams,
    bd: &BoundaryData,
    history: Vec<IterationState>,
    smallness: SmallnessReport,
    max_ball_distance: f64,
) -> Result<PicardResult> {
    let out = apply_phi(&x, inner, params, bd)?;
    let v = compute_v(&x.u, inner, params, bd)?;
    let p = density_from_v(&v, inner, bd);
    let rate = mass_rate(&x.u, &x.u_prime, inner, params);
    let p_prime = p.iter().zip(&rate).map(|(a, b)| a * b).collect();
    let startup = Startup { p_exponent: bd.p_exponent(params), u_slope: bd.a_slope, theta0: bd.theta0 };
    let profile = ProfileTriple::new(
        inner.clone(),
        p,
        x.u,
        x.theta,
        x.u_prime,
        x.theta_prime,
        Some(p_prime),
        startup,
        Mode::Expander,
    )?;
    Ok(PicardResult { profile, history, kernels: out.kernels, smallness, max_ball_distance })
}
