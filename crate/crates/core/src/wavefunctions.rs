//! Growth-direction wave functions of a symmetric double quantum well.
//!
//! The axial Schrödinger equation is discretized with second-order central
//! differences on a uniform grid with hard walls. The two lowest bound
//! states give the bonding/antibonding pair ξ₊/ξ₋, from which the localized
//! bottom/top functions ξ_B/ξ_T and the tunnel coupling t_e follow.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::tridiag::SymTridiagonal;
use crate::units::HBAR2_OVER_2M0;

/// Margin added on both sides of the double well by [`PotentialSpec::new`].
pub const DEFAULT_MARGIN_NM: f64 = 15.0;
/// Target grid spacing used by [`PotentialSpec::new`].
pub const DEFAULT_DZ_NM: f64 = 0.01;

const MIN_POINTS: usize = 1000;
const MIN_MARGIN_NM: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub z_min: f64,
    pub z_max: f64,
    pub n_points: usize,
}

/// Double finite square well: bottom dot on [0, h], barrier on [h, h + w],
/// top dot on [h + w, 2h + w]. The potential is zero inside the dots and
/// `well_depth` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub well_depth: f64,
    pub dot_height: f64,
    pub barrier_width: f64,
    pub effective_mass: f64,
    pub grid: GridSpec,
}

impl PotentialSpec {
    /// Potential with the default 15 nm margins and ~0.01 nm spacing.
    pub fn new(well_depth: f64, dot_height: f64, barrier_width: f64, effective_mass: f64) -> Self {
        let total = 2.0 * dot_height + barrier_width;
        let z_min = -DEFAULT_MARGIN_NM;
        let z_max = total + DEFAULT_MARGIN_NM;
        let n_points = (((z_max - z_min) / DEFAULT_DZ_NM).ceil() as usize).max(2 * MIN_POINTS);
        Self {
            well_depth,
            dot_height,
            barrier_width,
            effective_mass,
            grid: GridSpec { z_min, z_max, n_points },
        }
    }

    pub fn with_points(mut self, n_points: usize) -> Self {
        self.grid.n_points = n_points;
        self
    }

    /// Centre of the barrier.
    pub fn midpoint(&self) -> f64 {
        self.dot_height + 0.5 * self.barrier_width
    }

    /// Centre-to-centre distance of the two dots.
    pub fn dot_separation(&self) -> f64 {
        self.dot_height + self.barrier_width
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.well_depth > 0.0) {
            return bad("well depth must be positive");
        }
        if !(self.dot_height > 0.0) {
            return bad("dot height must be positive");
        }
        if !(self.barrier_width >= 0.0) || !self.barrier_width.is_finite() {
            return bad("barrier width must be non-negative and finite");
        }
        if !(self.effective_mass > 0.0) {
            return bad("effective mass must be positive");
        }
        if self.grid.n_points < MIN_POINTS {
            return bad("grid needs at least 1000 points");
        }
        let top = 2.0 * self.dot_height + self.barrier_width;
        if self.grid.z_min > -MIN_MARGIN_NM || self.grid.z_max < top + MIN_MARGIN_NM {
            return bad("grid must extend at least 10 nm beyond both dots");
        }
        Ok(())
    }

    /// Interior grid nodes (the walls sit one spacing beyond the ends).
    pub fn nodes(&self) -> (Vec<f64>, f64) {
        let n = self.grid.n_points;
        let dz = (self.grid.z_max - self.grid.z_min) / (n as f64 + 1.0);
        let z = (0..n).map(|i| self.grid.z_min + (i as f64 + 1.0) * dz).collect();
        (z, dz)
    }

    /// Cell-averaged potential at each node, which keeps the discretization
    /// second order even when the well edges fall between nodes.
    pub fn potential(&self, z: &[f64], dz: f64) -> Vec<f64> {
        let wells = [
            (0.0, self.dot_height),
            (self.dot_height + self.barrier_width, 2.0 * self.dot_height + self.barrier_width),
        ];
        z.iter()
            .map(|&zi| {
                let (a, b) = (zi - 0.5 * dz, zi + 0.5 * dz);
                let inside: f64 = wells
                    .iter()
                    .map(|&(lo, hi)| (b.min(hi) - a.max(lo)).max(0.0))
                    .sum();
                self.well_depth * (1.0 - inside.min(dz) / dz)
            })
            .collect()
    }

    /// Finite-difference Hamiltonian −ħ²/(2m*)∂²_z + U_z(z) in meV.
    pub fn hamiltonian(&self) -> (SymTridiagonal, Vec<f64>, f64) {
        let (z, dz) = self.nodes();
        let u = self.potential(&z, dz);
        let c = HBAR2_OVER_2M0 / self.effective_mass / (dz * dz);
        let diag = u.iter().map(|ui| 2.0 * c + ui).collect();
        let off = vec![-c; z.len() - 1];
        (SymTridiagonal::new(diag, off), z, dz)
    }
}

/// Lowest two eigenpairs of the axial problem.
#[derive(Debug, Clone)]
pub struct AxialEigenstates {
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub xi_plus: Vec<f64>,
    pub xi_minus: Vec<f64>,
}

/// Bonding/antibonding and localized axial functions on a shared grid.
#[derive(Debug, Clone)]
pub struct AxialBasis {
    pub potential: PotentialSpec,
    pub z: Vec<f64>,
    pub dz: f64,
    pub xi_plus: Vec<f64>,
    pub xi_minus: Vec<f64>,
    pub xi_b: Vec<f64>,
    pub xi_t: Vec<f64>,
    pub eps_plus: f64,
    pub eps_minus: f64,
    /// ⟨ξ_B|H_z|ξ_T⟩ with its computed sign (negative for the sign convention used here).
    pub t_e: f64,
}

/// In-plane harmonic ground state φ₀(ρ) = β/√π · exp(−β²ρ²/2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InPlaneGround {
    /// Inverse oscillator length in 1/nm.
    pub beta_e: f64,
}

impl InPlaneGround {
    pub fn from_length(length_nm: f64) -> Result<Self> {
        if !(length_nm > 0.0) {
            return Err(Error::InvalidParameter("oscillator length must be positive".into()));
        }
        Ok(Self { beta_e: 1.0 / length_nm })
    }

    pub fn amplitude(&self, rho: f64) -> f64 {
        self.beta_e / std::f64::consts::PI.sqrt() * (-0.5 * self.beta_e * self.beta_e * rho * rho).exp()
    }

    /// ⟨φ₀|e^{i q·ρ}|φ₀⟩ = exp(−q²/(4β²)).
    pub fn form_factor(&self, q_rho: f64) -> f64 {
        (-q_rho * q_rho / (4.0 * self.beta_e * self.beta_e)).exp()
    }
}

fn inner(a: &[f64], b: &[f64], dz: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dz
}

/// Solves for the two lowest bound states of the double well.
pub fn solve_axial_eigenstates(potential: &PotentialSpec) -> Result<AxialEigenstates> {
    potential.validate()?;
    let (h, z, dz) = potential.hamiltonian();
    let bound = h.count_below(potential.well_depth);
    if bound < 2 {
        return Err(Error::InsufficientBoundStates { found: bound, needed: 2 });
    }
    let norm = dz.sqrt();
    let (v0, _) = h.eigenvector(h.eigenvalue(0), &[])?;
    let (v1, _) = h.eigenvector(h.eigenvalue(1), &[&v0])?;
    let eps_plus = h.rayleigh(&v0);
    let eps_minus = h.rayleigh(&v1);
    let mut xi_plus: Vec<f64> = v0.into_iter().map(|x| x / norm).collect();
    let mut xi_minus: Vec<f64> = v1.into_iter().map(|x| x / norm).collect();

    // ξ₊ non-negative at the barrier centre, ξ₋ positive on the bottom side.
    let zm = potential.midpoint();
    let i_mid = z.partition_point(|&zi| zi < zm).min(z.len() - 1);
    if xi_plus[i_mid] < 0.0 || (xi_plus[i_mid] == 0.0 && xi_plus.iter().sum::<f64>() < 0.0) {
        xi_plus.iter_mut().for_each(|x| *x = -*x);
    }
    let bottom_weight: f64 = z.iter().zip(&xi_minus).filter(|(zi, _)| **zi < zm).map(|(_, x)| *x).sum();
    if bottom_weight < 0.0 {
        xi_minus.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(AxialEigenstates { eps_plus, eps_minus, xi_plus, xi_minus })
}

/// ξ_B = (ξ₊ + ξ₋)/√2, ξ_T = (ξ₊ − ξ₋)/√2.
pub fn build_localized_basis(xi_plus: &[f64], xi_minus: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let b = xi_plus.iter().zip(xi_minus).map(|(p, m)| s * (p + m)).collect();
    let t = xi_plus.iter().zip(xi_minus).map(|(p, m)| s * (p - m)).collect();
    (b, t)
}

/// t_e = ⟨ξ_B| −ħ²/(2m*)∂²_z + U_z |ξ_T⟩ using the same discrete operator as the solver.
pub fn tunnel_matrix_element(xi_b: &[f64], xi_t: &[f64], potential: &PotentialSpec) -> f64 {
    let (h, _, dz) = potential.hamiltonian();
    inner(xi_b, &h.apply(xi_t), dz)
}

impl AxialBasis {
    pub fn solve(potential: &PotentialSpec) -> Result<Self> {
        let eig = solve_axial_eigenstates(potential)?;
        let (z, dz) = potential.nodes();
        let (xi_b, xi_t) = build_localized_basis(&eig.xi_plus, &eig.xi_minus);
        let t_e = tunnel_matrix_element(&xi_b, &xi_t, potential);
        Ok(Self {
            potential: *potential,
            z,
            dz,
            xi_plus: eig.xi_plus,
            xi_minus: eig.xi_minus,
            xi_b,
            xi_t,
            eps_plus: eig.eps_plus,
            eps_minus: eig.eps_minus,
            t_e,
        })
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        inner(a, b, self.dz)
    }

    /// Localized function by dot label.
    pub fn localized(&self, dot: Dot) -> &[f64] {
        match dot {
            Dot::Bottom => &self.xi_b,
            Dot::Top => &self.xi_t,
        }
    }

    /// Centre-to-centre dot separation of the underlying geometry.
    pub fn dot_separation(&self) -> f64 {
        self.potential.dot_separation()
    }

    /// Writes z_nm, xi_plus, xi_minus, xi_B, xi_T as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "z_nm,xi_plus,xi_minus,xi_B,xi_T")?;
        for i in 0..self.z.len() {
            writeln!(
                w,
                "{:.6},{:.10e},{:.10e},{:.10e},{:.10e}",
                self.z[i], self.xi_plus[i], self.xi_minus[i], self.xi_b[i], self.xi_t[i]
            )?;
        }
        Ok(())
    }
}

/// Single-particle dot label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dot {
    Bottom,
    Top,
}

/// Finds the barrier width at which |t_e| equals `target` (meV) by bisection.
///
/// |t_e| decreases monotonically with the barrier width, so the search
/// brackets between a nearly touching pair and a 40 nm barrier.
pub fn barrier_width_for_tunnel_coupling(
    target: f64,
    well_depth: f64,
    dot_height: f64,
    effective_mass: f64,
    rel_tol: f64,
) -> Result<AxialBasis> {
    if !(target > 0.0) {
        return Err(Error::InvalidParameter("target tunnel coupling must be positive".into()));
    }
    let eval = |w: f64| -> Result<AxialBasis> {
        AxialBasis::solve(&PotentialSpec::new(well_depth, dot_height, w, effective_mass))
    };
    let (mut lo, mut hi) = (0.05, 40.0);
    let t_lo = eval(lo)?.t_e.abs();
    let t_hi = eval(hi)?.t_e.abs();
    if !(t_lo >= target && t_hi <= target) {
        return Err(Error::NotBracketed(format!(
            "|t_e| spans [{t_hi:.3e}, {t_lo:.3e}] meV, target {target} meV"
        )));
    }
    // bisect on log|t_e|, which is close to linear in w
    let mut best = None;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let basis = eval(mid)?;
        let t = basis.t_e.abs();
        let done = (t - target).abs() <= rel_tol * target || hi - lo < 1e-9;
        if t > target {
            lo = mid;
        } else {
            hi = mid;
        }
        best = Some(basis);
        if done {
            break;
        }
    }
    Ok(best.expect("at least one bisection step"))
}
