use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::quad::cumulative;
use crate::types::{Mode, PhysicalParams, ProfileTriple, Startup};

pub const DEFAULT_AUDIT_THRESHOLD: f64 = 1e-3;
pub const TRIVIAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CavitationCheck {
    pub eps: f64,
    pub p_eps: f64,
    pub lambda_cap: f64,
    pub ratio1_sup: f64,
    pub ratio2_sup: f64,
}

/// Index of the first node at or beyond `eps`.
fn eps_index(grid: &RadialGrid, eps: f64) -> usize {
    grid.nodes.iter().position(|&r| r >= eps * (1.0 - 1e-12)).unwrap_or(grid.len())
}

/// Cavitation data: the two ratio suprema over nodes below `eps` and the infimum of P beyond.
pub fn check_cavitation(p: &[f64], grid: &RadialGrid, alpha: f64, eps: f64, p_exponent: f64) -> Result<CavitationCheck> {
    if p.len() != grid.len() {
        return Err(Error::InvalidArgument("density length must match the grid".into()));
    }
    if !(eps > grid.r_min()) {
        return Err(Error::InvalidArgument("eps must exceed the first node".into()));
    }
    let ie = eps_index(grid, eps);
    let p_eps = p[ie.min(p.len() - 1)..].iter().cloned().fold(f64::INFINITY, f64::min);
    if !(p_eps > 0.0) {
        return Err(Error::InvalidArgument(format!("density must be positive beyond eps (inf = {p_eps:e})")));
    }
    let pw: Vec<f64> = p.iter().map(|v| v.powf(1.0 - alpha)).collect();
    let pwr: Vec<f64> = pw.iter().zip(&grid.nodes).map(|(v, r)| v * r).collect();
    let k1 = (1.0 - alpha) * p_exponent;
    let (i0, _) = cumulative(&pw, grid, k1)?;
    let (i1, _) = cumulative(&pwr, grid, k1 + 1.0)?;
    let (ip, _) = cumulative(p, grid, p_exponent)?;
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for i in 0..ie {
        let r = grid.nodes[i];
        let q1 = r * i0[i] / i1[i];
        let q2 = ip[i] / (p[i].powf(alpha) * i0[i]);
        if !q1.is_finite() || !q2.is_finite() {
            return Err(Error::DivergentRatio(format!("cavitation ratio undefined at r = {r:e}")));
        }
        s1 = s1.max(q1);
        s2 = s2.max(q2);
    }
    Ok(CavitationCheck { eps, p_eps, lambda_cap: s1.max(s2), ratio1_sup: s1, ratio2_sup: s2 })
}

/// The matrix A(r) and its diagonalization, node by node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixA {
    pub a11: Vec<f64>,
    pub a12: Vec<f64>,
    pub a21: Vec<f64>,
    pub a22: Vec<f64>,
    pub disc: Vec<f64>,
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
    pub q12: Vec<f64>,
    pub q21: Vec<f64>,
    pub d_factor: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixNode {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
    pub disc: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub q12: f64,
    pub q21: f64,
    pub d_factor: f64,
}

impl MatrixNode {
    /// Diagonalizes the 2x2 matrix as Q^{-1} diag(-lambda_min, -lambda_max) Q with Q = [[1, q12], [q21, 1]],
    /// whose rows are left eigenvectors. q12 and q21 are formed without the cancellation in
    /// -lambda_max - a22 when the off-diagonal product is small.
    pub fn from_entries(a11: f64, a12: f64, a21: f64, a22: f64, r: f64) -> Result<Self> {
        let disc = (a11 - a22).powi(2) + 4.0 * a12 * a21;
        if !(disc > 0.0) {
            return Err(Error::EigenDegenerate { r });
        }
        let sq = disc.sqrt();
        let lambda_min = -(a11 + a22 + sq) / 2.0;
        let lambda_max = -(a11 + a22 - sq) / 2.0;
        let s = a11 - a22 + sq;
        let (q12, q21) = if a11 >= a22 {
            (2.0 * a12 / s, -2.0 * a21 / s)
        } else {
            ((lambda_max + a22) / a21, a21 / (lambda_min + a22))
        };
        Ok(MatrixNode { a11, a12, a21, a22, disc, lambda_min, lambda_max, q12, q21, d_factor: 1.0 - q12 * q21 })
    }

    /// Entries of exp(A) = Q^{-1} diag(e^{-lambda_min}, e^{-lambda_max}) Q, row-major.
    pub fn exp_entries(&self) -> [[f64; 2]; 2] {
        let e1 = (-self.lambda_min).exp();
        let e2 = (-self.lambda_max).exp();
        let (q12, q21, d) = (self.q12, self.q21, self.d_factor);
        [[(e1 - q12 * q21 * e2) / d, q12 * (e1 - e2) / d], [q21 * (e2 - e1) / d, (e2 - q12 * q21 * e1) / d]]
    }
}

impl MatrixA {
    pub fn len(&self) -> usize {
        self.a11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a11.is_empty()
    }

    pub fn node(&self, i: usize) -> MatrixNode {
        MatrixNode {
            a11: self.a11[i],
            a12: self.a12[i],
            a21: self.a21[i],
            a22: self.a22[i],
            disc: self.disc[i],
            lambda_min: self.lambda_min[i],
            lambda_max: self.lambda_max[i],
            q12: self.q12[i],
            q21: self.q21[i],
            d_factor: self.d_factor[i],
        }
    }
}

pub fn build_matrix_a(profile: &ProfileTriple, params: &PhysicalParams) -> Result<MatrixA> {
    let (al, cv, ka, gr) = (params.alpha, params.c_v, params.kappa, params.gas_r);
    let nu = params.nu();
    if cv > ka / nu * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument("matrix A requires C_V <= kappa/(2mu0+lambda0)".into()));
    }
    let grid = &profile.grid;
    let r = grid.nodes.as_slice();
    let k = profile.startup.p_exponent;
    let kw = (1.0 - al) * k;
    let mut drift = Vec::with_capacity(r.len());
    for (i, &ri) in r.iter().enumerate() {
        let s = ri / 2.0 + profile.u[i];
        if !(s > 0.0) {
            return Err(Error::DenominatorVanishing { r: ri });
        }
        drift.push(s);
    }
    let pw: Vec<f64> = profile.p.iter().map(|v| v.powf(1.0 - al)).collect();
    let g11: Vec<f64> = profile.p.iter().zip(&drift).map(|(p, s)| p * s).collect();
    let g12: Vec<f64> = profile.p.iter().zip(&profile.theta).map(|(p, t)| p * t).collect();
    let g22: Vec<f64> = pw.iter().zip(&drift).map(|(p, s)| p * s).collect();
    let (c11, _) = cumulative(&g11, grid, k + 1.0)?;
    let (c12, _) = cumulative(&g12, grid, k)?;
    let (c21, _) = cumulative(&pw, grid, kw)?;
    let (c22, _) = cumulative(&g22, grid, kw + 1.0)?;
    let n = r.len();
    let mut m = MatrixA {
        a11: Vec::with_capacity(n),
        a12: Vec::with_capacity(n),
        a21: Vec::with_capacity(n),
        a22: Vec::with_capacity(n),
        disc: Vec::with_capacity(n),
        lambda_min: Vec::with_capacity(n),
        lambda_max: Vec::with_capacity(n),
        q12: Vec::with_capacity(n),
        q21: Vec::with_capacity(n),
        d_factor: Vec::with_capacity(n),
    };
    for i in 0..n {
        let node = MatrixNode::from_entries(
            -cv / ka * c11[i],
            -gr / ka * c12[i],
            -gr / nu * c21[i],
            -c22[i] / nu,
            r[i],
        )?;
        m.a11.push(node.a11);
        m.a12.push(node.a12);
        m.a21.push(node.a21);
        m.a22.push(node.a22);
        m.disc.push(node.disc);
        m.lambda_min.push(node.lambda_min);
        m.lambda_max.push(node.lambda_max);
        m.q12.push(node.q12);
        m.q21.push(node.q21);
        m.d_factor.push(node.d_factor);
    }
    Ok(m)
}

/// The expansion of <exp(A)(a,b), (c,d)> into its four coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub coef_ac: f64,
    pub coef_bd: f64,
    pub coef_bc: f64,
    pub coef_ad: f64,
    pub value: f64,
}

pub fn quadratic_form_terms(node: &MatrixNode, a: f64, b: f64, c: f64, d: f64) -> QuadraticForm {
    let e1 = (-node.lambda_min).exp();
    let e2 = (-node.lambda_max).exp();
    let w = node.q12 * node.q21 / node.d_factor;
    let coef_ac = (1.0 + w) * e1 - w * e2;
    let coef_bd = (1.0 + w) * e2 - w * e1;
    let coef_bc = (e1 - e2) * node.q12 / node.d_factor;
    let coef_ad = (e2 - e1) * node.q21 / node.d_factor;
    let value = coef_ac * a * c + coef_bd * b * d + coef_bc * b * c + coef_ad * a * d;
    QuadraticForm { coef_ac, coef_bd, coef_bc, coef_ad, value }
}

/// Outcome of one bound check; `slack` is bound/value, so slack >= 1 means the bound holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub worst_value: f64,
    pub worst_bound: f64,
    pub slack: f64,
    pub pass: bool,
    pub failing_nodes: usize,
}

impl BoundCheck {
    fn collect(name: &str, pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut worst = (0.0, f64::INFINITY, f64::INFINITY);
        let mut failing = 0;
        for (v, b) in pairs {
            let s = if v == 0.0 { f64::INFINITY } else { b / v };
            if !(v <= b) {
                failing += 1;
            }
            if s < worst.2 || (worst.2.is_infinite() && s.is_infinite() && v > worst.0) {
                worst = (v, b, s);
            }
        }
        BoundCheck {
            name: name.to_string(),
            worst_value: worst.0,
            worst_bound: worst.1,
            slack: worst.2,
            pass: failing == 0,
            failing_nodes: failing,
        }
    }
}

/// b = sup |U/r|.
pub fn velocity_ratio_sup(profile: &ProfileTriple) -> f64 {
    profile.u.iter().zip(profile.r()).map(|(u, r)| (u / r).abs()).fold(0.0, f64::max)
}

/// Nodewise checks of the off-diagonal and exponential bounds used in the energy argument.
pub fn verify_q_bounds(mat: &MatrixA, cav: &CavitationCheck, profile: &ProfileTriple, params: &PhysicalParams) -> Vec<BoundCheck> {
    let (al, ka, gr) = (params.alpha, params.kappa, params.gas_r);
    let nu = params.nu();
    let r = profile.r();
    let b = velocity_ratio_sup(profile);
    let lam = cav.lambda_cap;
    let sup_pt = profile.p.iter().zip(&profile.theta).map(|(p, t)| p.powf(al) * t).fold(0.0, f64::max);
    let ie = eps_index(&profile.grid, cav.eps);
    let gap = 0.5 - b;
    let n = mat.len();
    let mut out = vec![BoundCheck::collect("b < 1/2", std::iter::once((b, 0.5 * (1.0 - 1e-15))))];
    out.push(BoundCheck::collect(
        "|q12| <= 2 nu R Lambda sup(P^alpha Theta) / (kappa (1/2 - b) r)",
        (0..n).map(|i| (mat.q12[i].abs(), 2.0 * nu * gr * lam * sup_pt / (ka * gap * r[i]))),
    ));
    out.push(BoundCheck::collect(
        "|q21| <= 2 R Lambda / ((1/2 - b) r)",
        (0..n).map(|i| (mat.q21[i].abs(), 2.0 * gr * lam / (gap * r[i]))),
    ));
    out.push(BoundCheck::collect(
        "|q12| <= sqrt(nu sup(P^alpha Theta) / kappa)",
        (0..n).map(|i| (mat.q12[i].abs(), (nu * sup_pt / ka).sqrt())),
    ));
    out.push(BoundCheck::collect("|D| >= 1", (0..n).map(|i| (1.0, mat.d_factor[i].abs() * (1.0 + 1e-14)))));
    out.push(BoundCheck::collect("e^sqrt(Delta) <= 2 on (0, eps)", (0..ie).map(|i| (mat.disc[i].sqrt().exp(), 2.0))));
    out.push(BoundCheck::collect("e^lambda_min <= 2 on (0, eps)", (0..ie).map(|i| (mat.lambda_min[i].exp(), 2.0))));
    out.push(BoundCheck::collect(
        "C_V <= kappa P^(-alpha) / (2 nu)",
        profile.p.iter().map(|p| (params.c_v, ka * p.powf(-al) / (2.0 * nu))),
    ));
    out
}

/// C^1 cubic cutoff: 1 on [0, eps], 0 beyond 2 eps. Returns (chi, chi').
pub fn cutoff(r: f64, eps: f64) -> (f64, f64) {
    if r <= eps {
        (1.0, 0.0)
    } else if r >= 2.0 * eps {
        (0.0, 0.0)
    } else {
        let s = (r - eps) / eps;
        (1.0 - s * s * (3.0 - 2.0 * s), -6.0 * s * (1.0 - s) / eps)
    }
}

pub fn hardy_constant(d: u32) -> f64 {
    (2.0 / (d as f64 - 2.0)).powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardyCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub pass: bool,
}

/// Radial integrals over (0, r_max] split at a node; returns (below, above, tail estimate).
struct Integrator<'a> {
    grid: &'a RadialGrid,
    d: f64,
    split: usize,
}

impl Integrator<'_> {
    fn split(&self, f: &[f64], startup: f64) -> Result<(f64, f64, f64)> {
        let g: Vec<f64> = f.iter().zip(&self.grid.nodes).map(|(v, r)| v * r.powf(self.d - 1.0)).collect();
        let (c, _) = cumulative(&g, self.grid, startup + self.d - 1.0)?;
        let n = g.len();
        let lo = if self.split == 0 { 0.0 } else { c[self.split.min(n) - 1] };
        Ok((lo, c[n - 1] - lo, tail(&g, &self.grid.nodes)))
    }

    fn total(&self, f: &[f64], startup: f64) -> Result<f64> {
        let (a, b, _) = self.split(f, startup)?;
        Ok(a + b)
    }
}

/// Power-law extrapolation of int_{r_max}^inf g from the last two nodes.
fn tail(g: &[f64], r: &[f64]) -> f64 {
    let n = g.len();
    let (g1, g0) = (g[n - 1], g[n - 2]);
    if g1 == 0.0 {
        return 0.0;
    }
    if g0 == 0.0 || g1.signum() != g0.signum() {
        return f64::INFINITY;
    }
    let m = -(g1 / g0).ln() / (r[n - 1] / r[n - 2]).ln();
    if m <= 1.0 {
        f64::INFINITY
    } else {
        (g1 * r[n - 1] / (m - 1.0)).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SubIntegrals {
    pub r11: f64,
    pub r12: f64,
    pub r12s: f64,
    pub r12l: f64,
    pub r21_theta: f64,
    pub r21_u: f64,
    pub r22: f64,
    pub r23s: f64,
    pub r23l: f64,
    pub n1: f64,
    pub n2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub lhs1: f64,
    pub lhs2: f64,
    pub lhs_exact: f64,
    pub lhs_lower: f64,
    pub rhs1: f64,
    pub rhs2: f64,
    pub rhs3: f64,
    pub rhs_exact: f64,
    pub rhs_upper: f64,
    pub sub_integrals: SubIntegrals,
    pub hardy_constant: f64,
    /// Sum of the estimated contributions beyond the last node.
    pub tail_budget: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LhsTerms {
    pub lhs1: f64,
    pub lhs2: f64,
    pub lower_bound: f64,
    pub tail: f64,
}

pub fn evaluate_lhs(profile: &ProfileTriple, mat: &MatrixA, params: &PhysicalParams, eps: f64) -> Result<LhsTerms> {
    let grid = &profile.grid;
    let it = Integrator { grid, d: params.dim(), split: eps_index(grid, eps) };
    let n = profile.len();
    let mut form = Vec::with_capacity(n);
    let mut lo_small = Vec::with_capacity(n);
    let mut th_e1 = Vec::with_capacity(n);
    let mut u_e2 = Vec::with_capacity(n);
    for i in 0..n {
        let node = mat.node(i);
        let (tp, up) = (profile.theta_prime[i], profile.u_prime[i]);
        form.push(quadratic_form_terms(&node, tp, up, tp, up).value);
        let (e1, e2) = ((-node.lambda_min).exp(), (-node.lambda_max).exp());
        lo_small.push(e2 * (tp * tp + up * up));
        th_e1.push(e1 * tp * tp);
        u_e2.push(e2 * up * up);
    }
    let (lhs1, lhs2, tl) = it.split(&form, 0.0)?;
    let (ls, _, _) = it.split(&lo_small, 0.0)?;
    let (_, a, _) = it.split(&th_e1, 0.0)?;
    let (_, b, _) = it.split(&u_e2, 0.0)?;
    Ok(LhsTerms { lhs1, lhs2, lower_bound: ls + 0.25 * (a + b), tail: tl })
}

/// Direct check of the Hardy step for f = chi Theta.
pub fn hardy_check(profile: &ProfileTriple, params: &PhysicalParams, eps: f64) -> Result<HardyCheck> {
    let it = Integrator { grid: &profile.grid, d: params.dim(), split: 0 };
    let mut lhs_g = Vec::with_capacity(profile.len());
    let mut rhs_g = Vec::with_capacity(profile.len());
    for (i, &r) in profile.r().iter().enumerate() {
        let (c, cp) = cutoff(r, eps);
        let f = c * profile.theta[i];
        let fp = cp * profile.theta[i] + c * profile.theta_prime[i];
        lhs_g.push((f / r).powi(2));
        rhs_g.push(fp * fp);
    }
    let constant = hardy_constant(params.d);
    let lhs = it.total(&lhs_g, -2.0 + 1e-9)?;
    let rhs = constant * it.total(&rhs_g, 0.0)?;
    Ok(HardyCheck { lhs, rhs, constant, pass: lhs <= rhs * (1.0 + 1e-9) })
}

/// Right-hand side of the weighted energy identity, with each piece stored.
pub fn evaluate_rhs(profile: &ProfileTriple, mat: &MatrixA, params: &PhysicalParams, eps: f64) -> Result<(SubIntegrals, f64, f64)> {
    let (d, al, cv, ka, gr, mu0, la0) =
        (params.dim(), params.alpha, params.c_v, params.kappa, params.gas_r, params.mu0, params.lambda0);
    let nu = params.nu();
    let grid = &profile.grid;
    let it = Integrator { grid, d, split: eps_index(grid, eps) };
    let n = profile.len();
    let cols = 13;
    let mut g = vec![Vec::with_capacity(n); cols];
    for i in 0..n {
        let r = grid.nodes[i];
        let (p, u, th, up, tp) = (profile.p[i], profile.u[i], profile.theta[i], profile.u_prime[i], profile.theta_prime[i]);
        let node = mat.node(i);
        let m = node.exp_entries();
        let e1 = (-node.lambda_min).exp();
        let e2 = (-node.lambda_max).exp();
        let pa = p.powf(al);
        let visc = nu * pa;
        let (chi, _) = cutoff(r, eps);
        let div = up + (d - 1.0) * u / r;
        let frac = al * div / (r / 2.0 + u);
        let n1 = -gr / ka * p * th * (d - 1.0) * u / r
            + 2.0 * mu0 * pa / ka * (up * up + (d - 1.0) * u * u / (r * r))
            + la0 * pa / ka * div * div
            - visc / ka * frac * up * u
            - la0 * pa / ka * frac * (d - 1.0) * u * u / r;
        let n2 = -frac * up - la0 / nu * frac * (d - 1.0) * u / r;
        let r12 = -m[0][1] * (d - 1.0) * u * th / (r * r);
        let vals = [
            -m[1][1] * (d - 1.0) * u * u / (r * r),
            r12 * chi * chi,
            r12 * (1.0 - chi * chi),
            -cv / ka * m[0][0] * p * th * th,
            -m[1][1] * p * u * u / (2.0 * visc),
            -(m[0][1] / (2.0 * visc) + m[1][0] * cv / ka) * p * u * th,
            e1 * node.q12 / node.d_factor * p / visc * u * th,
            (m[0][0] * th + m[1][0] * u) * n1,
            (m[0][1] * th + m[1][1] * u) * n2,
            e1 * tp * tp,
            e2 * up * up,
            e2 * p * u * u / visc,
            e1 * p * th * th,
        ];
        for (c, v) in vals.iter().enumerate() {
            g[c].push(*v);
        }
    }
    let mut s = [(0.0, 0.0, 0.0); 13];
    for c in 0..cols {
        s[c] = it.split(&g[c], 0.0)?;
    }
    let tot = |c: usize| s[c].0 + s[c].1;
    let sub = SubIntegrals {
        r11: tot(0),
        r12s: tot(1),
        r12l: tot(2),
        r12: tot(1) + tot(2),
        r21_theta: tot(3),
        r21_u: tot(4),
        r22: tot(5),
        r23s: s[6].0,
        r23l: s[6].1,
        n1: tot(7),
        n2: tot(8),
    };
    let upper = (tot(9) + tot(10) - tot(11)) / 20.0 - cv / (4.0 * ka) * tot(12);
    let tail_budget: f64 = [0, 1, 2, 3, 4, 5, 7, 8].iter().map(|&c| s[c].2).sum();
    Ok((sub, upper, tail_budget))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    Trivial,
    NoSuchShrinker,
    HypothesesFail { failed: Vec<String> },
    Inconclusive { reason: String },
}

impl Verdict {
    pub fn message(&self) -> String {
        match self {
            Verdict::Trivial => "trivial: identically zero velocity and temperature".into(),
            Verdict::NoSuchShrinker => "no such shrinker: contradiction established numerically".into(),
            Verdict::HypothesesFail { failed } => format!("hypotheses fail: {}", failed.join("; ")),
            Verdict::Inconclusive { reason } => format!("inconclusive: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub hypotheses: Vec<Hypothesis>,
    pub suprema: Vec<(String, f64)>,
    pub cavitation: Option<CavitationCheck>,
    pub bounds: Vec<BoundCheck>,
    pub hardy: HardyCheck,
    pub ledger: EnergyLedger,
    pub verdict: Verdict,
    pub margin: f64,
}

const SUP_R2_THETA: &str = "sup <r>^2 Theta";
const SUP_P: &str = "sup P^(1-alpha)";
const SUP_U_THETA: &str = "sup |U/(r Theta)|";
const SUP_UP_THETAP: &str = "sup_{r>eps} |U'/(r Theta')|";

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        (num / den).abs()
    }
}

/// The four suprema entering the smallness hypothesis.
pub fn hypothesis_suprema(profile: &ProfileTriple, params: &PhysicalParams, eps: f64) -> Vec<(String, f64)> {
    let r = profile.r();
    let mut s = [0.0f64; 4];
    for i in 0..profile.len() {
        s[0] = s[0].max((1.0 + r[i] * r[i]) * profile.theta[i]);
        s[1] = s[1].max(profile.p[i].powf(1.0 - params.alpha));
        s[2] = s[2].max(ratio(profile.u[i], r[i] * profile.theta[i]));
        if r[i] > eps * (1.0 + 1e-12) {
            s[3] = s[3].max(ratio(profile.u_prime[i], r[i] * profile.theta_prime[i]));
        }
    }
    [SUP_R2_THETA, SUP_P, SUP_U_THETA, SUP_UP_THETAP].iter().zip(s).map(|(n, v)| (n.to_string(), v)).collect()
}

fn is_trivial(profile: &ProfileTriple) -> bool {
    let amp = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let pmax = amp(&profile.p);
    let pmin = profile.p.iter().cloned().fold(f64::INFINITY, f64::min);
    amp(&profile.u) <= TRIVIAL_TOL
        && amp(&profile.theta) <= TRIVIAL_TOL
        && amp(&profile.u_prime) <= TRIVIAL_TOL
        && amp(&profile.theta_prime) <= TRIVIAL_TOL
        && pmax - pmin <= TRIVIAL_TOL * pmax
}

/// Runs the whole energy argument on a shrinker candidate and renders a verdict.
pub fn audit_shrinker(profile: &ProfileTriple, params: &PhysicalParams, eps: f64, threshold: f64) -> Result<AuditReport> {
    profile.check(Mode::Shrinker)?;
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument("threshold must be positive".into()));
    }
    let suprema = hypothesis_suprema(profile, params, eps);
    let composite: f64 = suprema.iter().map(|(_, v)| v).sum();
    let nu = params.nu();
    let mut hypotheses = vec![
        Hypothesis { name: "smallness composite".into(), value: composite, threshold, pass: composite < threshold },
        Hypothesis {
            name: "C_V <= kappa/(2mu0+lambda0)".into(),
            value: params.c_v,
            threshold: params.kappa / nu,
            pass: params.c_v <= params.kappa / nu * (1.0 + 1e-12),
        },
        Hypothesis {
            name: "0 < alpha < 1".into(),
            value: params.alpha,
            threshold: 1.0,
            pass: params.alpha > 0.0 && params.alpha < 1.0,
        },
    ];
    let b = velocity_ratio_sup(profile);
    hypotheses.push(Hypothesis { name: "b = sup|U/r| < 1/2".into(), value: b, threshold: 0.5, pass: b < 0.5 });
    let cav = check_cavitation(&profile.p, &profile.grid, params.alpha, eps, profile.startup.p_exponent);
    let cavitation = match &cav {
        Ok(c) => {
            hypotheses.push(Hypothesis { name: "cavitation Lambda finite".into(), value: c.lambda_cap, threshold: f64::INFINITY, pass: true });
            Some(c.clone())
        }
        Err(e) => {
            hypotheses.push(Hypothesis { name: format!("cavitation ({e})"), value: f64::NAN, threshold: f64::INFINITY, pass: false });
            None
        }
    };
    let mat = build_matrix_a(profile, params)?;
    let bounds = match &cavitation {
        Some(c) => verify_q_bounds(&mat, c, profile, params),
        None => Vec::new(),
    };
    let lhs = evaluate_lhs(profile, &mat, params, eps)?;
    let (sub, rhs_upper, rhs_tail) = evaluate_rhs(profile, &mat, params, eps)?;
    let hardy = hardy_check(profile, params, eps)?;
    let rhs1 = sub.r11 + sub.r12;
    let rhs2 = sub.r21_theta + sub.r21_u + sub.r22;
    let rhs3 = sub.n1 + sub.n2;
    let ledger = EnergyLedger {
        lhs1: lhs.lhs1,
        lhs2: lhs.lhs2,
        lhs_exact: lhs.lhs1 + lhs.lhs2,
        lhs_lower: lhs.lower_bound,
        rhs1,
        rhs2,
        rhs3,
        rhs_exact: rhs1 + rhs2 + rhs3,
        rhs_upper,
        sub_integrals: sub,
        hardy_constant: hardy.constant,
        tail_budget: lhs.tail + rhs_tail,
    };

    let mut failed: Vec<String> = Vec::new();
    for h in &hypotheses {
        if !h.pass {
            if h.name == "smallness composite" {
                let worst = suprema.iter().cloned().fold((String::new(), f64::NEG_INFINITY), |a, s| if s.1 > a.1 { s } else { a });
                failed.push(format!("smallness composite {:.3e} >= {:.1e}, dominated by {} = {:.3e}", h.value, threshold, worst.0, worst.1));
            } else {
                failed.push(h.name.clone());
            }
        }
    }
    failed.extend(bounds.iter().filter(|c| !c.pass).map(|c| c.name.clone()));
    if !hardy.pass {
        failed.push("Hardy inequality".into());
    }

    let (verdict, margin) = if is_trivial(profile) {
        (Verdict::Trivial, 0.0)
    } else if !failed.is_empty() {
        (Verdict::HypothesesFail { failed }, f64::NAN)
    } else {
        let margin = (ledger.lhs_lower - ledger.rhs_upper) / ledger.lhs_lower;
        let tol = 1e-12 * ledger.lhs_exact.abs();
        if !(ledger.lhs_exact + tol >= ledger.lhs_lower) {
            (Verdict::Inconclusive { reason: "exact LHS below the lower bound".into() }, margin)
        } else if !(ledger.rhs_exact <= ledger.rhs_upper + tol) {
            (Verdict::Inconclusive { reason: "exact RHS above the upper bound".into() }, margin)
        } else if !(ledger.lhs_lower - ledger.rhs_upper > ledger.tail_budget) {
            (Verdict::Inconclusive { reason: "LHS lower bound does not exceed RHS upper bound beyond the tail budget".into() }, margin)
        } else {
            (Verdict::NoSuchShrinker, margin)
        }
    };
    Ok(AuditReport { hypotheses, suprema, cavitation, bounds, hardy, ledger, verdict, margin })
}

/// Parameters of the synthetic shrinker candidates
/// Theta = theta_amp/(1+r^2)^2, U = u_ratio r Theta, P = p_inf (r^2/(r^2+p_scale^2))^(p_power/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateSpec {
    pub theta_amp: f64,
    pub u_ratio: f64,
    pub p_inf: f64,
    pub p_power: f64,
    pub p_scale: f64,
}

impl CandidateSpec {
    /// A member of the family satisfying the smallness hypothesis at the default threshold.
    pub fn small() -> Self {
        CandidateSpec { theta_amp: 2e-4, u_ratio: 2e-4, p_inf: 1e-8, p_power: 2.0, p_scale: 1.0 }
    }
}

pub fn candidate_profile(spec: &CandidateSpec, grid: &RadialGrid) -> Result<ProfileTriple> {
    let n = grid.len();
    let (mut p, mut pp, mut u, mut up, mut th, mut tp) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (a, c, k, l) = (spec.theta_amp, spec.u_ratio, spec.p_power, spec.p_scale);
    for &r in &grid.nodes {
        let q = 1.0 + r * r;
        let pv = if l == 0.0 { spec.p_inf } else { spec.p_inf * (r * r / (r * r + l * l)).powf(k / 2.0) };
        p.push(pv);
        pp.push(if l == 0.0 { 0.0 } else { pv * k * l * l / (r * (r * r + l * l)) });
        th.push(a / (q * q));
        tp.push(-4.0 * a * r / (q * q * q));
        u.push(c * a * r / (q * q));
        up.push(c * a * (1.0 - 3.0 * r * r) / (q * q * q));
    }
    let k0 = if l == 0.0 { 0.0 } else { k };
    let startup = Startup { p_exponent: k0, u_slope: c * a, theta0: a };
    ProfileTriple::new(grid.clone(), p, u, th, up, tp, Some(pp), startup, Mode::Shrinker)
}

/// U = Theta = 0 with constant density.
pub fn zero_candidate(p_const: f64, grid: &RadialGrid) -> Result<ProfileTriple> {
    let spec = CandidateSpec { theta_amp: 0.0, u_ratio: 0.0, p_inf: p_const, p_power: 0.0, p_scale: 0.0 };
    candidate_profile(&spec, grid)
}
