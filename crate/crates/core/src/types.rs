use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub d: u32,
    pub alpha: f64,
    pub c_v: f64,
    pub kappa: f64,
    pub gas_r: f64,
    pub mu0: f64,
    pub lambda0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    AlphaLtOne,
    AlphaOne,
}

impl PhysicalParams {
    pub fn new(d: u32, alpha: f64, c_v: f64, kappa: f64, gas_r: f64, mu0: f64, lambda0: f64) -> Result<Self> {
        let p = PhysicalParams { d, alpha, c_v, kappa, gas_r, mu0, lambda0 };
        p.validate()?;
        Ok(p)
    }

    /// Parameters for 0 < alpha < 1 with lambda0 fixed by 2 mu0 + d lambda0 = 0.
    pub fn degenerate(d: u32, alpha: f64, c_v: f64, kappa: f64, gas_r: f64, mu0: f64) -> Result<Self> {
        Self::new(d, alpha, c_v, kappa, gas_r, mu0, -2.0 * mu0 / d as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidArgument(s.to_string()));
        if self.d < 3 {
            return bad("d must be at least 3");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return bad("mu0 must be positive");
        }
        if !(self.c_v > 0.0 && self.c_v.is_finite()) {
            return bad("c_v must be positive");
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be positive");
        }
        if !(self.gas_r > 0.0 && self.gas_r.is_finite()) {
            return bad("gas_r must be positive");
        }
        if !self.lambda0.is_finite() {
            return bad("lambda0 must be finite");
        }
        let s = self.bulk_sum();
        let scale = 2.0 * self.mu0 + self.dim() * self.lambda0.abs();
        if self.alpha < 1.0 {
            if s.abs() > 1e-12 * scale {
                return bad("lambda0: alpha < 1 requires 2 mu0 + d lambda0 = 0");
            }
        } else if s <= 1e-12 * scale {
            return bad("lambda0: alpha = 1 requires 2 mu0 + d lambda0 > 0");
        }
        Ok(())
    }

    pub fn dim(&self) -> f64 {
        self.d as f64
    }

    /// 2 mu0 + lambda0.
    pub fn nu(&self) -> f64 {
        2.0 * self.mu0 + self.lambda0
    }

    /// 2 mu0 + d lambda0.
    pub fn bulk_sum(&self) -> f64 {
        2.0 * self.mu0 + self.dim() * self.lambda0
    }

    pub fn regime(&self) -> Regime {
        if self.alpha < 1.0 {
            Regime::AlphaLtOne
        } else {
            Regime::AlphaOne
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub a_slope: f64,
    pub delta: f64,
    pub p_delta: f64,
    pub theta0: f64,
    pub eps_norm: f64,
}

impl BoundaryData {
    pub fn new(params: &PhysicalParams, a_slope: f64, delta: f64, p_delta: f64, theta0: f64, eps_norm: f64) -> Result<Self> {
        let b = BoundaryData { a_slope, delta, p_delta, theta0, eps_norm };
        b.validate(params)?;
        Ok(b)
    }

    /// Boundary data for alpha = 1 with the forced temperature at the origin.
    pub fn alpha_one(params: &PhysicalParams, a_slope: f64, delta: f64, p_delta: f64, eps_norm: f64) -> Result<Self> {
        Self::new(params, a_slope, delta, p_delta, Self::forced_theta0(params, a_slope), eps_norm)
    }

    pub fn forced_theta0(params: &PhysicalParams, a_slope: f64) -> f64 {
        params.bulk_sum() * a_slope / params.gas_r
    }

    /// Exponent of the near-origin density power law, dA/(1/2 - A).
    pub fn p_exponent(&self, params: &PhysicalParams) -> f64 {
        params.dim() * self.a_slope / (0.5 - self.a_slope)
    }

    pub fn validate(&self, params: &PhysicalParams) -> Result<()> {
        if !(self.a_slope > 0.0) {
            return Err(Error::InvalidArgument("a_slope must be positive".into()));
        }
        self.validate_ranges(params)?;
        if params.regime() == Regime::AlphaOne {
            let forced = Self::forced_theta0(params, self.a_slope);
            if (self.theta0 - forced).abs() > 1e-12 * forced.abs().max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidArgument(format!(
                    "theta0: alpha = 1 forces theta0 = {forced:e}"
                )));
            }
        }
        Ok(())
    }

    /// Range checks only; admits a_slope = 0 and an unforced theta0 at alpha = 1.
    pub fn validate_ranges(&self, params: &PhysicalParams) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidArgument(s.to_string()));
        if !(self.a_slope >= 0.0 && self.a_slope < 0.5) {
            return bad("a_slope must lie in (0, 1/2)");
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("delta must be positive");
        }
        if !(self.p_delta > 0.0 && self.p_delta.is_finite()) {
            return bad("p_delta must be positive");
        }
        if !(self.theta0 >= 0.0 && self.theta0.is_finite()) {
            return bad("theta0 must be nonnegative");
        }
        let a = params.alpha;
        if a < 1.0 {
            if !(self.eps_norm > (1.0 - a) / 2.0 && self.eps_norm < 1.0 - a) {
                return bad("eps_norm must lie in ((1-alpha)/2, 1-alpha)");
            }
        } else if !(self.eps_norm > 0.0 && self.eps_norm < 1.0) {
            return bad("eps_norm must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Leading-order behaviour used below the first grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Startup {
    pub p_exponent: f64,
    pub u_slope: f64,
    pub theta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Expander,
    Shrinker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTriple {
    pub grid: RadialGrid,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub u_prime: Vec<f64>,
    pub theta_prime: Vec<f64>,
    /// P' when known analytically (from the mass identity); otherwise differenced on demand.
    pub p_prime: Option<Vec<f64>>,
    pub startup: Startup,
}

impl ProfileTriple {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: RadialGrid,
        p: Vec<f64>,
        u: Vec<f64>,
        theta: Vec<f64>,
        u_prime: Vec<f64>,
        theta_prime: Vec<f64>,
        p_prime: Option<Vec<f64>>,
        startup: Startup,
        mode: Mode,
    ) -> Result<Self> {
        let n = grid.len();
        let lens = [p.len(), u.len(), theta.len(), u_prime.len(), theta_prime.len()];
        if lens.iter().any(|&l| l != n) || p_prime.as_ref().is_some_and(|v| v.len() != n) {
            return Err(Error::InvalidArgument("profile arrays must match the grid length".into()));
        }
        let t = ProfileTriple { grid, p, u, theta, u_prime, theta_prime, p_prime, startup };
        t.check(mode)?;
        Ok(t)
    }

    pub fn check(&self, mode: Mode) -> Result<()> {
        for (i, &r) in self.grid.nodes.iter().enumerate() {
            let vals = [self.p[i], self.u[i], self.theta[i], self.u_prime[i], self.theta_prime[i]];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: format!("profile at r = {r}") });
            }
            if !(self.p[i] > 0.0) {
                return Err(Error::InvalidArgument(format!("density must be positive (r = {r})")));
            }
            if self.theta[i] < 0.0 {
                return Err(Error::InvalidArgument(format!("temperature must be nonnegative (r = {r})")));
            }
            let den = match mode {
                Mode::Expander => r / 2.0 - self.u[i],
                Mode::Shrinker => r / 2.0 + self.u[i],
            };
            if !(den > 0.0) {
                return Err(Error::DenominatorVanishing { r });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn r(&self) -> &[f64] {
        &self.grid.nodes
    }

    /// P', from the stored analytic values or by differencing.
    pub fn p_prime_or_diff(&self) -> Vec<f64> {
        match &self.p_prime {
            Some(v) => v.clone(),
            None => crate::quad::differentiate(&self.p, &self.grid),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,P,U,Theta,Uprime,Thetaprime\n");
        for i in 0..self.len() {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt17(self.grid.nodes[i]),
                fmt17(self.p[i]),
                fmt17(self.u[i]),
                fmt17(self.theta[i]),
                fmt17(self.u_prime[i]),
                fmt17(self.theta_prime[i])
            ));
        }
        s
    }

    /// Parses the profile CSV format; the grid is rebuilt from the node column.
    pub fn from_csv(text: &str, startup: Startup, mode: Mode) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty profile CSV".into()))?;
        if header.trim() != "r,P,U,Theta,Uprime,Thetaprime" {
            return Err(Error::InvalidArgument(format!("unexpected profile header: {header}")));
        }
        let mut cols: [Vec<f64>; 6] = Default::default();
        for (ln, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::InvalidArgument(format!("line {}: expected 6 fields", ln + 2)));
            }
            for (c, f) in fields.iter().enumerate() {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("line {}: bad number {f:?}", ln + 2)))?;
                cols[c].push(v);
            }
        }
        let [r, p, u, th, up, thp] = cols;
        let grid = RadialGrid::from_nodes(r)?;
        Self::new(grid, p, u, th, up, thp, None, startup, mode)
    }
}

/// Decimal text with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}
