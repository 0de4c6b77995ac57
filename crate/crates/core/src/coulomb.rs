//! Direct Coulomb matrix elements V_BB, V_BT, V_TT.
//!
//! V_ij = e²/(4πε₀ε_r) ∫₀^∞ dq F_ij(q) exp(−q²/(2β²)), i.e. the
//! reciprocal-space q-integral with the angular part and the 1/q of the
//! Coulomb kernel cancelled against the d²q measure. Elements involving
//! inter-dot overlap densities are dropped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::quad::integrate_adaptive;
use crate::units::COULOMB_MEV_NM;
use crate::wavefunctions::{AxialBasis, Dot, InPlaneGround};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoulombElements {
    pub v_bb: f64,
    pub v_bt: f64,
    pub v_tt: f64,
    pub eps_r: f64,
}

impl CoulombElements {
    pub fn get(&self, i: Dot, j: Dot) -> f64 {
        match (i, j) {
            (Dot::Bottom, Dot::Bottom) => self.v_bb,
            (Dot::Top, Dot::Top) => self.v_tt,
            _ => self.v_bt,
        }
    }

    /// Builds elements from explicit values, checking positivity.
    pub fn new(v_bb: f64, v_bt: f64, v_tt: f64, eps_r: f64) -> Result<Self> {
        if !(v_bb > 0.0 && v_bt > 0.0 && v_tt > 0.0 && eps_r > 0.0) {
            return Err(Error::InvalidParameter("Coulomb elements must be positive".into()));
        }
        Ok(Self { v_bb, v_bt, v_tt, eps_r })
    }
}

/// F_ij(q) = ∬ dz dz′ |ξ_i(z)|² |ξ_j(z′)|² exp(−q|z − z′|).
///
/// The exponential kernel factorizes along the grid, so the double sum is
/// evaluated exactly in O(n) with a forward and a backward running sum.
pub fn axial_form_factor(xi_i: &[f64], xi_j: &[f64], dz: f64, q_rho: f64) -> f64 {
    let n = xi_i.len();
    let decay = (-q_rho * dz).exp();
    let rho_j: Vec<f64> = xi_j.iter().map(|x| x * x * dz).collect();
    // left[k] = Σ_{l ≤ k} ρ_j[l] decay^{k−l}; right[k] = Σ_{l > k} ρ_j[l] decay^{l−k}
    let mut total = 0.0;
    let mut left = 0.0;
    let mut lefts = vec![0.0; n];
    for k in 0..n {
        left = left * decay + rho_j[k];
        lefts[k] = left;
    }
    let mut right = 0.0;
    for k in (0..n).rev() {
        total += xi_i[k] * xi_i[k] * dz * (lefts[k] + right);
        right = (right + rho_j[k]) * decay;
    }
    total
}

/// Direct Coulomb matrix element V_ij in meV.
pub fn coulomb_matrix_element(
    i: Dot,
    j: Dot,
    basis: &AxialBasis,
    in_plane: InPlaneGround,
    eps_r: f64,
) -> Result<f64> {
    if !(eps_r > 0.0) {
        return Err(Error::InvalidParameter("dielectric constant must be positive".into()));
    }
    let xi_i = trimmed(basis.localized(i));
    let xi_j = trimmed(basis.localized(j));
    let beta = in_plane.beta_e;
    // u = q/β; the Gaussian is below 1e-21 at u = 10
    let integral = integrate_adaptive(
        |u| {
            let q = u * beta;
            axial_form_factor(&xi_i, &xi_j, basis.dz, q) * (-0.5 * u * u).exp()
        },
        0.0,
        10.0,
        1e-13,
        1e-11,
        200,
    )?;
    Ok(COULOMB_MEV_NM / eps_r * beta * integral.value)
}

/// The three non-negligible elements for a localized basis.
pub fn coulomb_elements(basis: &AxialBasis, in_plane: InPlaneGround, eps_r: f64) -> Result<CoulombElements> {
    let v_bb = coulomb_matrix_element(Dot::Bottom, Dot::Bottom, basis, in_plane, eps_r)?;
    let v_bt = coulomb_matrix_element(Dot::Bottom, Dot::Top, basis, in_plane, eps_r)?;
    let v_tt = coulomb_matrix_element(Dot::Top, Dot::Top, basis, in_plane, eps_r)?;
    CoulombElements::new(v_bb, v_bt, v_tt, eps_r)
}

/// Zeroes the far tails so they cost nothing in the running sums; the
/// dropped density is below 1e-30.
fn trimmed(xi: &[f64]) -> Vec<f64> {
    xi.iter().map(|&x| if x.abs() < 1e-16 { 0.0 } else { x }).collect()
}
