use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expander::mass_rate;
use crate::grid::RadialGrid;
use crate::quad::cumulative_from_first;
use crate::types::{BoundaryData, Mode, PhysicalParams, ProfileTriple};

pub const DEFAULT_RTOL: f64 = 1e-9;
pub const BLOW_UP_FACTOR: f64 = 1e6;

/// Right-hand side of the expander system as a first-order system in y = (P, U, U', Theta, Theta').
pub fn expander_rhs(r: f64, y: &[f64; 5], params: &PhysicalParams) -> [f64; 5] {
    let (d, al, cv, ka, gr, mu, la) =
        (params.dim(), params.alpha, params.c_v, params.kappa, params.gas_r, params.mu0, params.lambda0);
    let nu = 2.0 * mu + la;
    let [p, u, up, th, thp] = *y;
    let div = up + (d - 1.0) * u / r;
    let pp = p * div / (r / 2.0 - u);
    let pa = p.powf(al);
    let pap = al * pa * div / (r / 2.0 - u);
    let lhs_mom = -p * u / 2.0 - r / 2.0 * (pp * u + p * up)
        + pp * u * u
        + 2.0 * p * u * up
        + (d - 1.0) * p * u * u / r
        + gr * (pp * th + p * thp);
    let upp = (lhs_mom - nu * pap * up - la * pap * (d - 1.0) * u / r) / (nu * pa) - (d - 1.0) * up / r
        + (d - 1.0) * u / (r * r);
    let e = u * u / 2.0 + cv * th;
    let ep = u * up + cv * thp;
    let en = p * e;
    let enp = pp * e + p * ep;
    let g = u * p * (e + gr * th);
    let gp = up * p * (e + gr * th) + u * pp * (e + gr * th) + u * p * (ep + gr * thp);
    let lap = upp + (d - 1.0) * up / r - (d - 1.0) * u / (r * r);
    let rhs = 2.0 * mu * pa * (up * up + (d - 1.0) * u * u / (r * r))
        + la * pa * div * div
        + nu * pa * lap * u
        + nu * pap * up * u
        + la * pap * (d - 1.0) * u * u / r;
    let lhs_energy = -en - r / 2.0 * enp + gp + (d - 1.0) / r * g;
    let thpp = (lhs_energy - rhs) / ka - (d - 1.0) * thp / r;
    [pp, up, upp, thp, thpp]
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince 5(4) step; returns the fifth-order solution and the embedded error estimate.
fn dp_step<F: Fn(f64, &[f64; 5]) -> [f64; 5]>(f: &F, r: f64, y: &[f64; 5], h: f64) -> ([f64; 5], [f64; 5]) {
    let mut k = [[0.0; 5]; 7];
    for s in 0..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            for c in 0..5 {
                ys[c] += h * A[s][j] * kj[c];
            }
        }
        k[s] = f(r + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; 5];
    for s in 0..7 {
        for c in 0..5 {
            y5[c] += h * B5[s] * k[s][c];
            err[c] += h * (B5[s] - B4[s]) * k[s][c];
        }
    }
    (y5, err)
}

/// Integrates dy/dr = f(r, y) through every node of `nodes`, landing exactly on each node.
/// `check` is called after every accepted step and may abort the integration.
pub fn integrate_nodes<F, G>(f: &F, nodes: &[f64], y0: [f64; 5], rtol: f64, check: G) -> Result<Vec<[f64; 5]>>
where
    F: Fn(f64, &[f64; 5]) -> [f64; 5],
    G: Fn(f64, &[f64; 5]) -> Result<()>,
{
    let scale: Vec<f64> = y0.iter().map(|v| v.abs().max(f64::MIN_POSITIVE)).collect();
    let atol: Vec<f64> = scale.iter().map(|s| 1e-3 * rtol * s).collect();
    let mut out = vec![y0];
    let mut y = y0;
    let mut h = if nodes.len() > 1 { (nodes[1] - nodes[0]) * 0.1 } else { 0.0 };
    for w in nodes.windows(2) {
        let (mut r, end) = (w[0], w[1]);
        while r < end {
            let last = h >= end - r;
            let step = if last { end - r } else { h };
            if step <= 1e-14 * r.abs().max(1e-300) && !last {
                return Err(Error::StepSizeUnderflow { r });
            }
            let (yn, err) = dp_step(f, r, &y, step);
            let mut en = 0.0;
            for c in 0..5 {
                let sc = atol[c] + rtol * y[c].abs().max(yn[c].abs());
                en += (err[c] / sc).powi(2);
            }
            let en = (en / 5.0).sqrt();
            if !en.is_finite() {
                h = step * 0.2;
                continue;
            }
            if en <= 1.0 {
                r = if last { end } else { r + step };
                y = yn;
                check(r, &y)?;
                for c in 0..5 {
                    if y[c].abs() > BLOW_UP_FACTOR * scale[c] && scale[c] > f64::MIN_POSITIVE {
                        return Err(Error::BlowUp { r });
                    }
                }
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            let proposed = step * fac;
            if en <= 1.0 && last {
                h = h.max(proposed);
            } else {
                h = proposed;
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// Extends the converged inner profile from delta to the end of `grid` by integrating the expander ODEs.
pub fn extend_global(inner: &ProfileTriple, params: &PhysicalParams, grid: &RadialGrid, rtol: f64) -> Result<ProfileTriple> {
    let ni = inner.len();
    if grid.inner_count != ni || (grid.delta - inner.grid.nodes[ni - 1]).abs() > 1e-12 * grid.delta {
        return Err(Error::InvalidArgument("global grid does not extend the inner grid".into()));
    }
    let y0 = [inner.p[ni - 1], inner.u[ni - 1], inner.u_prime[ni - 1], inner.theta[ni - 1], inner.theta_prime[ni - 1]];
    let outer_nodes = &grid.nodes[ni - 1..];
    let f = |r: f64, y: &[f64; 5]| expander_rhs(r, y, params);
    let check = |r: f64, y: &[f64; 5]| {
        if !(r / 2.0 - y[1] > 0.0) {
            return Err(Error::DenominatorVanishing { r });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { r });
        }
        Ok(())
    };
    let states = integrate_nodes(&f, outer_nodes, y0, rtol, check)?;
    let mut p = inner.p.clone();
    let mut u = inner.u.clone();
    let mut up = inner.u_prime.clone();
    let mut th = inner.theta.clone();
    let mut thp = inner.theta_prime.clone();
    for s in &states[1..] {
        p.push(s[0]);
        u.push(s[1]);
        up.push(s[2]);
        th.push(s[3]);
        thp.push(s[4]);
    }
    let rate = mass_rate(&u, &up, grid, params);
    let p_prime = p.iter().zip(&rate).map(|(a, b)| a * b).collect();
    let theta: Vec<f64> = th.iter().map(|&t| if t < 0.0 && t > -1e-300 { 0.0 } else { t }).collect();
    ProfileTriple::new(grid.clone(), p, u, theta, up, thp, Some(p_prime), inner.startup, Mode::Expander)
}

/// Largest deviation between log P(r) - log P(delta) and the integral of the mass rate from delta.
pub fn mass_identity_error(profile: &ProfileTriple, params: &PhysicalParams) -> Result<f64> {
    let di = profile.grid.delta_index();
    let nodes = profile.grid.nodes[di..].to_vec();
    if nodes.len() < 3 {
        return Ok(0.0);
    }
    let g = RadialGrid::from_nodes(nodes)?;
    let rate = mass_rate(&profile.u[di..], &profile.u_prime[di..], &g, params);
    let (cum, _) = cumulative_from_first(&rate, &g)?;
    let lp0 = profile.p[di].ln();
    Ok(cum.iter().enumerate().map(|(j, c)| ((profile.p[di + j].ln() - lp0) - c).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConstants {
    pub m1: f64,
    pub m1p: f64,
    pub m2: f64,
}

/// Ratio bound used for "much less than".
pub const MUCH_LESS: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub name: String,
    pub ratio: f64,
    pub limit: f64,
    pub pass: bool,
}

/// Every inequality of the constant chain as lhs/rhs against its limit.
pub fn chain_checks(c: &BootstrapConstants, params: &PhysicalParams, bd: &BoundaryData) -> Vec<ChainCheck> {
    let (m1, m1p, m2) = (c.m1, c.m1p, c.m2);
    let (a, pd, dl, th) = (bd.a_slope, bd.p_delta, bd.delta, bd.theta0);
    let al = params.alpha;
    let p1a = pd.powf(1.0 - al);
    let p12a = pd.powf(1.0 - 2.0 * al);
    let ml = MUCH_LESS;
    let list: [(&str, f64, f64, f64); 13] = [
        ("M2 << M1", m2, m1, ml),
        ("M1 << M1'", m1, m1p, ml),
        ("M1' << 1", m1p, 1.0, ml),
        ("A << M1", a, m1, ml),
        ("Theta0 << M2", th, m2, ml),
        ("A^2 << P_delta M2", a * a, pd * m2, ml),
        ("M1' log(1/(delta^2 P_delta^(1-alpha))) <= 1", m1p * (1.0 / (dl * dl * p1a)).ln(), 1.0, 1.0),
        ("(P_delta^(1-alpha)/A) M1' <= 1", p1a / a * m1p, 1.0, 1.0),
        ("M2 << M1 P_delta^(1/2+alpha)", m2, m1 * pd.powf(0.5 + al), ml),
        ("M1 M1' << P_delta M2", m1 * m1p, pd * m2, ml),
        ("M1^3 << P_delta^(1-2alpha) Theta0", m1.powi(3), p12a * th, ml),
        ("M1 M1' << Theta0 P_delta^(1-alpha)", m1 * m1p, th * p1a, ml),
        (
            "M1^3/P_delta^(1-2alpha) + M1 M1'/P_delta^(1-alpha) << Theta0",
            m1.powi(3) / p12a + m1 * m1p / p1a,
            th,
            ml,
        ),
    ];
    list.iter()
        .map(|&(name, lhs, rhs, limit)| {
            let ratio = lhs / rhs;
            ChainCheck { name: name.to_string(), ratio, limit, pass: ratio <= limit }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSearch {
    pub constants: BootstrapConstants,
    pub feasible: bool,
    /// Smallest limit/ratio over the chain (> 1 means every inequality holds with room).
    pub slack: f64,
    pub tightest: ChainCheck,
    pub checks: Vec<ChainCheck>,
}

pub const LATTICE_LOG10_MIN: f64 = -24.0;
pub const LATTICE_LOG10_MAX: f64 = 0.0;
pub const LATTICE_STEP: f64 = 0.25;

/// Logarithmic lattice search over (M1, M1', M2). Feasible points are ranked by slack, the minimum of
/// limit/ratio over the chain; when none is feasible the point with the least violation is returned.
pub fn bootstrap_search(params: &PhysicalParams, bd: &BoundaryData) -> BootstrapSearch {
    let steps = ((LATTICE_LOG10_MAX - LATTICE_LOG10_MIN) / LATTICE_STEP).round() as usize + 1;
    let val = |i: usize| 10f64.powf(LATTICE_LOG10_MIN + LATTICE_STEP * i as f64);
    let best = (0..steps * steps * steps)
        .into_par_iter()
        .map(|idx| {
            let (i, j, k) = (idx / (steps * steps), (idx / steps) % steps, idx % steps);
            let c = BootstrapConstants { m1: val(i), m1p: val(j), m2: val(k) };
            let slack = chain_checks(&c, params, bd).iter().map(|ch| ch.limit / ch.ratio).fold(f64::INFINITY, f64::min);
            (slack, idx)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
                    a
                } else {
                    b
                }
            },
        );
    let (i, j, k) = (best.1 / (steps * steps), (best.1 / steps) % steps, best.1 % steps);
    let constants = BootstrapConstants { m1: val(i), m1p: val(j), m2: val(k) };
    let checks = chain_checks(&constants, params, bd);
    let tightest = checks
        .iter()
        .max_by(|a, b| (a.ratio / a.limit).total_cmp(&(b.ratio / b.limit)))
        .cloned()
        .expect("chain is nonempty");
    let feasible = checks.iter().all(|c| c.pass);
    BootstrapSearch { constants, feasible, slack: best.0, tightest, checks }
}

pub fn find_bootstrap_constants(params: &PhysicalParams, bd: &BoundaryData) -> Result<BootstrapConstants> {
    let s = bootstrap_search(params, bd);
    if s.feasible {
        Ok(s.constants)
    } else {
        Err(Error::Infeasible { violated: s.tightest.name, ratio: s.tightest.ratio })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapVerdict {
    pub z: Vec<f64>,
    pub z_delta: f64,
    pub z_sup: f64,
    pub verdict: bool,
}

/// Running supremum Z(r) of the four envelope-normalised magnitudes.
pub fn bootstrap_monitor(
    profile: &ProfileTriple,
    c: &BootstrapConstants,
    bd: &BoundaryData,
    params: &PhysicalParams,
) -> BootstrapVerdict {
    let d = params.dim();
    let su = bd.p_delta.powf(0.5 - params.alpha / 2.0);
    let st = bd.p_delta.sqrt();
    let mut run: f64 = 0.0;
    let z: Vec<f64> = profile
        .r()
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let (u, up, th, thp) = (profile.u[i], profile.u_prime[i], profile.theta[i], profile.theta_prime[i]);
            let wu = (1.0 + su * s).powi(2);
            let wt = (1.0 + st * s).powi(2);
            let val = wu * u.abs() / (c.m1 * s)
                + wu * (up + (d - 1.0) * u / s).abs() / c.m1p
                + wt * th / c.m2
                + wt * thp.abs() / (c.m2 * bd.p_delta * s);
            run = run.max(val);
            run
        })
        .collect();
    let di = profile.grid.delta_index().min(z.len() - 1);
    let z_delta = z[di];
    let z_sup = *z.last().unwrap();
    BootstrapVerdict { z_delta, z_sup, verdict: z_delta <= 0.5 && z_sup <= 0.5, z }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub p_inf: f64,
    pub u_inf: f64,
    pub theta_inf: f64,
    pub rate_p: f64,
    pub rate_u: f64,
    pub rate_theta: f64,
    pub fit_window: [f64; 2],
    /// Root-mean-square fit residual of each model relative to its limit value.
    pub rel_residuals: [f64; 3],
}

pub const MIN_FIT_NODES: usize = 8;

/// f ~ f_inf + c r^(-rate): linear least squares for (f_inf, c) at each trial rate, with the rate
/// chosen to minimise the residual sum of squares.
pub fn fit_power_tail(r: &[f64], f: &[f64]) -> (f64, f64, f64, f64) {
    let solve = |p: f64| -> (f64, f64, f64) {
        let n = r.len() as f64;
        let x: Vec<f64> = r.iter().map(|ri| ri.powf(-p)).collect();
        let (sx, sy) = (x.iter().sum::<f64>(), f.iter().sum::<f64>());
        let (mx, my) = (sx / n, sy / n);
        let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(f).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
        let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let f_inf = my - c * mx;
        let ssr: f64 = x.iter().zip(f).map(|(xi, yi)| (yi - f_inf - c * xi).powi(2)).sum();
        (f_inf, c, ssr)
    };
    let spread = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - f.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread == 0.0 {
        let n = r.len() as f64;
        return (f.iter().sum::<f64>() / n, 0.0, f64::NAN, 0.0);
    }
    let (lo, hi) = (0.25, 8.0);
    let m = 64;
    let mut best = (f64::INFINITY, lo);
    for i in 0..=m {
        let p = lo + (hi - lo) * i as f64 / m as f64;
        let s = solve(p).2;
        if s < best.0 {
            best = (s, p);
        }
    }
    let h = (hi - lo) / m as f64;
    let (mut a, mut b) = ((best.1 - h).max(lo), (best.1 + h).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (solve(x1).2, solve(x2).2);
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = solve(x1).2;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = solve(x2).2;
        }
        if (b - a).abs() < 1e-13 {
            break;
        }
    }
    let p = 0.5 * (a + b);
    let (f_inf, c, ssr) = solve(p);
    (f_inf, c, p, (ssr / r.len() as f64).sqrt())
}

/// Fits P, r U and r^2 Theta to a limit plus a power-law correction over `window`.
pub fn fit_asymptotics(profile: &ProfileTriple, window: [f64; 2]) -> Result<AsymptoticFit> {
    let idx: Vec<usize> = (0..profile.len()).filter(|&i| profile.r()[i] >= window[0] && profile.r()[i] <= window[1]).collect();
    if idx.len() < MIN_FIT_NODES {
        return Err(Error::FitDegenerate(format!("window has {} nodes, need {MIN_FIT_NODES}", idx.len())));
    }
    let r: Vec<f64> = idx.iter().map(|&i| profile.r()[i]).collect();
    let p: Vec<f64> = idx.iter().map(|&i| profile.p[i]).collect();
    let ru: Vec<f64> = idx.iter().map(|&i| profile.r()[i] * profile.u[i]).collect();
    let rt: Vec<f64> = idx.iter().map(|&i| profile.r()[i].powi(2) * profile.theta[i]).collect();
    let (p_inf, _, rate_p, ep) = fit_power_tail(&r, &p);
    let (u_inf, _, rate_u, eu) = fit_power_tail(&r, &ru);
    let (theta_inf, _, rate_theta, et) = fit_power_tail(&r, &rt);
    let rel = |e: f64, v: f64| if v != 0.0 { e / v.abs() } else { e };
    Ok(AsymptoticFit {
        p_inf,
        u_inf,
        theta_inf,
        rate_p,
        rate_u,
        rate_theta,
        fit_window: window,
        rel_residuals: [rel(ep, p_inf), rel(eu, u_inf), rel(et, theta_inf)],
    })
}

pub fn default_fit_window(r_max: f64) -> [f64; 2] {
    [0.6 * r_max, r_max]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConstants {
    pub u: f64,
    pub u_prime: f64,
    pub theta: f64,
    pub theta_prime: f64,
    pub p_upper: f64,
    pub p_lower: f64,
    pub theta_nonnegative: bool,
}

/// Bound curves of the global estimates at radius r, without constants:
/// (P shape, U, U', Theta, Theta').
pub fn envelope_curves(r: f64, params: &PhysicalParams, bd: &BoundaryData) -> [f64; 5] {
    let k = 2.0 * params.dim() * bd.a_slope / (1.0 - 2.0 * bd.a_slope);
    let su = bd.p_delta.powf(0.5 - params.alpha / 2.0);
    let st = bd.p_delta.sqrt();
    let wu = (1.0 + su * r).powi(2);
    let wt = (1.0 + st * r).powi(2);
    [
        bd.p_delta * (r / bd.delta).powf(k).min(1.0),
        bd.a_slope * r / wu,
        bd.a_slope / wu,
        1.0 / wt,
        st * r / wt,
    ]
}

/// Smallest constant for which each global bound holds at every node; for the density,
/// `p_upper` and `p_lower` are the sup and inf of P over its bound curve.
pub fn envelope_constants(profile: &ProfileTriple, params: &PhysicalParams, bd: &BoundaryData) -> EnvelopeConstants {
    let mut e = EnvelopeConstants {
        u: 0.0,
        u_prime: 0.0,
        theta: 0.0,
        theta_prime: 0.0,
        p_upper: 0.0,
        p_lower: f64::INFINITY,
        theta_nonnegative: true,
    };
    for (i, &r) in profile.r().iter().enumerate() {
        let c = envelope_curves(r, params, bd);
        let ratio = profile.p[i] / c[0];
        e.p_upper = e.p_upper.max(ratio);
        e.p_lower = e.p_lower.min(ratio);
        e.u = e.u.max(profile.u[i].abs() / c[1]);
        e.u_prime = e.u_prime.max(profile.u_prime[i].abs() / c[2]);
        e.theta = e.theta.max(profile.theta[i] / c[3]);
        e.theta_prime = e.theta_prime.max(profile.theta_prime[i].abs() / c[4]);
        if profile.theta[i] < 0.0 {
            e.theta_nonnegative = false;
        }
    }
    e
}
