use serde::{Deserialize, Serialize};

use crate::quad::differentiate;
use crate::types::{fmt17, PhysicalParams, ProfileTriple};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub r: Vec<f64>,
    /// Per-node residuals, relative to the largest additive term at the node (absolute where all terms vanish).
    pub eq_mass: Vec<f64>,
    pub eq_momentum: Vec<f64>,
    pub eq_energy: Vec<f64>,
    /// Per-node absolute residuals.
    pub abs_mass: Vec<f64>,
    pub abs_momentum: Vec<f64>,
    pub abs_energy: Vec<f64>,
    /// Max relative residual per equation (mass, momentum, energy) over the window, endpoints excluded.
    pub max_rel: [f64; 3],
    pub max_abs: [f64; 3],
    pub window: [f64; 2],
}

const SCALE_FLOOR: f64 = 1e-300;

fn assemble(terms: &[f64]) -> (f64, f64) {
    let sum: f64 = terms.iter().sum();
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let rel = if scale > SCALE_FLOOR { sum / scale } else { sum };
    (rel, sum)
}

impl ResidualReport {
    fn from_terms(r: Vec<f64>, rows: Vec<[(f64, f64); 3]>) -> Self {
        let col = |e: usize, k: usize| -> Vec<f64> { rows.iter().map(|row| if k == 0 { row[e].0 } else { row[e].1 }).collect() };
        let window = [r[0], *r.last().unwrap()];
        let mut rep = ResidualReport {
            eq_mass: col(0, 0),
            eq_momentum: col(1, 0),
            eq_energy: col(2, 0),
            abs_mass: col(0, 1),
            abs_momentum: col(1, 1),
            abs_energy: col(2, 1),
            max_rel: [0.0; 3],
            max_abs: [0.0; 3],
            window,
            r,
        };
        rep.set_window(window);
        rep
    }

    /// Recomputes the maxima over nodes strictly inside the grid and within `window`.
    pub fn set_window(&mut self, window: [f64; 2]) {
        self.window = window;
        let n = self.r.len();
        let mut max_rel = [0.0f64; 3];
        let mut max_abs = [0.0f64; 3];
        for i in 1..n.saturating_sub(1) {
            if self.r[i] < window[0] || self.r[i] > window[1] {
                continue;
            }
            let rel = [self.eq_mass[i], self.eq_momentum[i], self.eq_energy[i]];
            let abs = [self.abs_mass[i], self.abs_momentum[i], self.abs_energy[i]];
            for e in 0..3 {
                max_rel[e] = max_rel[e].max(rel[e].abs());
                max_abs[e] = max_abs[e].max(abs[e].abs());
            }
        }
        self.max_rel = max_rel;
        self.max_abs = max_abs;
    }

    pub fn with_window(mut self, window: [f64; 2]) -> Self {
        self.set_window(window);
        self
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,res_mass,res_mom,res_energy\n");
        for i in 0..self.r.len() {
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt17(self.r[i]),
                fmt17(self.eq_mass[i]),
                fmt17(self.eq_momentum[i]),
                fmt17(self.eq_energy[i])
            ));
        }
        s
    }
}

/// Substitutes the profile into the expander system. U'' and Theta'' are differenced from the sampled
/// first derivatives; (P^alpha)' uses P' from the mass identity.
pub fn residual_expander(profile: &ProfileTriple, params: &PhysicalParams) -> ResidualReport {
    let (d, al, cv, ka, gr, mu, la) =
        (params.dim(), params.alpha, params.c_v, params.kappa, params.gas_r, params.mu0, params.lambda0);
    let nu = params.nu();
    let r = profile.r();
    let pp_all = profile.p_prime_or_diff();
    let upp_all = differentiate(&profile.u_prime, &profile.grid);
    let thpp_all = differentiate(&profile.theta_prime, &profile.grid);
    let rows = (0..profile.len())
        .map(|i| {
            let (r, p, u, up, th, thp) =
                (r[i], profile.p[i], profile.u[i], profile.u_prime[i], profile.theta[i], profile.theta_prime[i]);
            let (pp, upp, thpp) = (pp_all[i], upp_all[i], thpp_all[i]);
            let div = up + (d - 1.0) * u / r;
            let pa = p.powf(al);
            let pap = al * pa * div / (r / 2.0 - u);
            let mass = assemble(&[-r * pp / 2.0, pp * u, p * div]);
            let lap = upp + (d - 1.0) * up / r - (d - 1.0) * u / (r * r);
            let mom = assemble(&[
                -p * u / 2.0,
                -r / 2.0 * (pp * u + p * up),
                pp * u * u + 2.0 * p * u * up,
                (d - 1.0) * p * u * u / r,
                gr * (pp * th + p * thp),
                -nu * pa * lap,
                -nu * pap * up,
                -la * pap * (d - 1.0) * u / r,
            ]);
            let e = u * u / 2.0 + cv * th;
            let ep = u * up + cv * thp;
            let h = e + gr * th;
            let hp = ep + gr * thp;
            let energy = assemble(&[
                -p * e,
                -r / 2.0 * (pp * e + p * ep),
                up * p * h + u * pp * h + u * p * hp,
                (d - 1.0) / r * u * p * h,
                -ka * thpp,
                -ka * (d - 1.0) * thp / r,
                -2.0 * mu * pa * (up * up + (d - 1.0) * u * u / (r * r)),
                -la * pa * div * div,
                -nu * pa * lap * u,
                -nu * pap * up * u,
                -la * pap * (d - 1.0) * u * u / r,
            ]);
            [mass, mom, energy]
        })
        .collect();
    ResidualReport::from_terms(r.to_vec(), rows)
}

/// Substitutes the profile into the shrinker system, whose drift terms carry the opposite sign and
/// whose viscous corrections use the shrinker mass identity.
pub fn residual_shrinker(profile: &ProfileTriple, params: &PhysicalParams) -> ResidualReport {
    let (d, al, cv, ka, gr, mu, la) =
        (params.dim(), params.alpha, params.c_v, params.kappa, params.gas_r, params.mu0, params.lambda0);
    let nu = params.nu();
    let r = profile.r();
    let pp_all = profile.p_prime_or_diff();
    let upp_all = differentiate(&profile.u_prime, &profile.grid);
    let thpp_all = differentiate(&profile.theta_prime, &profile.grid);
    let rows = (0..profile.len())
        .map(|i| {
            let (r, p, u, up, th, thp) =
                (r[i], profile.p[i], profile.u[i], profile.u_prime[i], profile.theta[i], profile.theta_prime[i]);
            let (pp, upp, thpp) = (pp_all[i], upp_all[i], thpp_all[i]);
            let div = up + (d - 1.0) * u / r;
            let pa = p.powf(al);
            let frac = al * div / (r / 2.0 + u);
            let mass = assemble(&[r * pp / 2.0, pp * u, p * div]);
            let lap = upp + (d - 1.0) * up / r - (d - 1.0) * u / (r * r);
            let mom = assemble(&[
                p * u / 2.0,
                r / 2.0 * (pp * u + p * up),
                pp * u * u + 2.0 * p * u * up,
                (d - 1.0) * p * u * u / r,
                gr * (pp * th + p * thp),
                -nu * pa * lap,
                nu * frac * pa * up,
                la * frac * pa * (d - 1.0) * u / r,
            ]);
            let e = u * u / 2.0 + cv * th;
            let ep = u * up + cv * thp;
            let h = e + gr * th;
            let hp = ep + gr * thp;
            let energy = assemble(&[
                p * e,
                r / 2.0 * (pp * e + p * ep),
                up * p * h + u * pp * h + u * p * hp,
                (d - 1.0) / r * u * p * h,
                -ka * thpp,
                -ka * (d - 1.0) * thp / r,
                -2.0 * mu * pa * (up * up + (d - 1.0) * u * u / (r * r)),
                -la * pa * div * div,
                -nu * pa * lap * u,
                nu * frac * pa * up * u,
                la * frac * pa * (d - 1.0) * u * u / r,
            ]);
            [mass, mom, energy]
        })
        .collect();
    ResidualReport::from_terms(r.to_vec(), rows)
}
