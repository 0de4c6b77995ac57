//! Electron–phonon coupling to bulk acoustic phonons.
//!
//! Deformation-potential coupling to the LA branch and piezoelectric coupling
//! to the LA, TA1 and TA2 branches. The azimuthal integrals are done
//! analytically, the polar integral with Gauss–Legendre quadrature, and the
//! resulting single-particle spectral densities I_μν(ω) are tabulated once
//! per geometry. All tables are rate densities in 1/ps.

use std::f64::consts::PI;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::interp::{bracket, cubic_uniform};
use crate::numerics::quad::GaussLegendre;
use crate::units::{self, HBAR, K_B};
use crate::wavefunctions::{AxialBasis, Dot, InPlaneGround};

/// kg/m³ → meV·ps²/nm⁵
const KG_PER_M3: f64 = 6.241_509_074;
/// e·(C/m²)/ε₀ → meV/nm
const PIEZO_TO_MEV_PER_NM: f64 =
    units::si::E_CHARGE / units::si::EPS0 * 6.241_509_074e21 / 1e9;

/// Material and geometry parameters; defaults are the InAs/GaAs values
/// used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    /// Effective mass in units of m₀.
    pub effective_mass: f64,
    pub eps_r: f64,
    /// Mass density in kg/m³.
    pub density: f64,
    /// Longitudinal sound speed in nm/ps.
    pub c_l: f64,
    /// Transverse sound speed in nm/ps.
    pub c_t: f64,
    /// Deformation potential in eV.
    pub deformation_potential: f64,
    /// Piezoelectric constant in C/m².
    pub piezo_constant: f64,
    /// In-plane oscillator length 1/β_e in nm.
    pub oscillator_length: f64,
    /// Potential depth in meV.
    pub well_depth: f64,
    /// Dot height in nm.
    pub dot_height: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            effective_mass: 0.065,
            eps_r: 12.9,
            density: 5300.0,
            c_l: 5.15,
            c_t: 2.8,
            deformation_potential: -6.66,
            piezo_constant: -0.16,
            oscillator_length: 5.4,
            well_depth: 350.0,
            dot_height: 4.5,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("effective_mass", self.effective_mass),
            ("eps_r", self.eps_r),
            ("density", self.density),
            ("c_l", self.c_l),
            ("c_t", self.c_t),
            ("oscillator_length", self.oscillator_length),
            ("well_depth", self.well_depth),
            ("dot_height", self.dot_height),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite")));
            }
        }
        for (name, v) in [("deformation_potential", self.deformation_potential), ("piezo_constant", self.piezo_constant)] {
            if v == 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be non-zero and finite")));
            }
        }
        Ok(())
    }

    pub fn in_plane(&self) -> InPlaneGround {
        InPlaneGround { beta_e: 1.0 / self.oscillator_length }
    }

    fn density_internal(&self) -> f64 {
        self.density * KG_PER_M3
    }

    fn deformation_mev(&self) -> f64 {
        self.deformation_potential * 1000.0
    }

    /// e·d_p/(ε₀ε_r) in meV/nm.
    fn piezo_field(&self) -> f64 {
        self.piezo_constant * PIEZO_TO_MEV_PER_NM / self.eps_r
    }
}

/// Acoustic phonon branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    LA,
    TA1,
    TA2,
}

/// Coupling channel as tabulated: LA is split into its deformation and
/// piezoelectric parts, which do not interfere after the φ-integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    LaDp,
    LaPe,
    Ta1,
    Ta2,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::LaDp, Channel::LaPe, Channel::Ta1, Channel::Ta2];

    pub fn label(self) -> &'static str {
        match self {
            Channel::LaDp => "LA_DP",
            Channel::LaPe => "LA_PE",
            Channel::Ta1 => "TA1",
            Channel::Ta2 => "TA2",
        }
    }

    pub fn sound_speed(self, m: &MaterialParams) -> f64 {
        match self {
            Channel::LaDp | Channel::LaPe => m.c_l,
            Channel::Ta1 | Channel::Ta2 => m.c_t,
        }
    }

    /// ∫₀^{2π} dφ V|𝒢_s(q)|² for this channel, in meV²·nm³.
    pub fn phi_integrated(self, m: &MaterialParams, q: f64, theta: f64) -> f64 {
        let rho = m.density_internal();
        let p = m.piezo_field();
        let (s, c) = theta.sin_cos();
        let s2 = (2.0 * theta).sin();
        match self {
            Channel::LaDp => 2.0 * PI * HBAR * q * m.deformation_mev().powi(2) / (2.0 * rho * m.c_l),
            Channel::LaPe => PI * 2.25 * HBAR / (2.0 * rho * m.c_l * q) * p * p * s2 * s2 * s * s,
            Channel::Ta1 => PI * HBAR / (2.0 * rho * m.c_t * q) * p * p * s2 * s2,
            Channel::Ta2 => {
                let a = 3.0 * c * c - 1.0;
                PI * HBAR / (2.0 * rho * m.c_t * q) * p * p * a * a * s * s
            }
        }
    }
}

/// √V·𝒢_s(q) in meV·nm^{3/2} for wave number q (1/nm) and polar/azimuthal angles.
pub fn coupling_prefactor(branch: Branch, m: &MaterialParams, q: f64, theta: f64, phi: f64) -> Result<Complex64> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter("phonon wave number must be positive".into()));
    }
    let rho = m.density_internal();
    let p = m.piezo_field();
    let i = Complex64::i();
    Ok(match branch {
        Branch::LA => {
            let dp = (HBAR * q / (2.0 * rho * m.c_l)).sqrt() * m.deformation_mev();
            let pe = 1.5 * (HBAR / (2.0 * rho * m.c_l * q)).sqrt() * p * (2.0 * theta).sin() * theta.sin() * phi.sin();
            Complex64::new(dp, 0.0) - i * pe
        }
        Branch::TA1 => -i * (HBAR / (2.0 * rho * m.c_t * q)).sqrt() * p * (2.0 * theta).sin() * (2.0 * phi).cos(),
        Branch::TA2 => {
            -i * (HBAR / (2.0 * rho * m.c_t * q)).sqrt()
                * p
                * (3.0 * theta.cos().powi(2) - 1.0)
                * theta.sin()
                * (2.0 * phi).sin()
        }
    })
}

/// Single-particle transition μ = (n, m), i.e. the operator a†_n a_m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub n: Dot,
    pub m: Dot,
}

/// The four single-particle transitions in table order: BB, BT, TB, TT.
pub const TRANSITIONS: [Transition; 4] = [
    Transition { n: Dot::Bottom, m: Dot::Bottom },
    Transition { n: Dot::Bottom, m: Dot::Top },
    Transition { n: Dot::Top, m: Dot::Bottom },
    Transition { n: Dot::Top, m: Dot::Top },
];

/// ℱ_μ(q) = exp(−q_ρ²/(4β²)) ∫dz e^{i q_z z} ξ_n(z) ξ_m(z).
pub fn transition_form_factor(mu: Transition, basis: &AxialBasis, in_plane: InPlaneGround, q_rho: f64, q_z: f64) -> Complex64 {
    in_plane.form_factor(q_rho) * axial_fourier(basis.localized(mu.n), basis.localized(mu.m), &basis.z, basis.dz, q_z)
}

fn axial_fourier(a: &[f64], b: &[f64], z: &[f64], dz: f64, k: f64) -> Complex64 {
    let step = Complex64::from_polar(1.0, k * dz);
    let mut phase = Complex64::from_polar(1.0, k * z[0]);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..z.len() {
        acc += phase * (a[i] * b[i]);
        phase *= step;
        // re-anchor periodically to keep the recurrence exact
        if i % 512 == 511 && i + 1 < z.len() {
            phase = Complex64::from_polar(1.0, k * z[i + 1]);
        }
    }
    acc * dz
}

/// Axial Fourier transforms Z_μ(k) tabulated on a uniform k grid.
struct AxialFourierTable {
    k0: f64,
    dk: f64,
    values: [Vec<Complex64>; 4],
}

impl AxialFourierTable {
    fn new(basis: &AxialBasis, k_max: f64, dk: f64) -> Self {
        // support of the products: drop points where both functions are negligible
        let keep: Vec<usize> = (0..basis.z.len())
            .filter(|&i| basis.xi_b[i].abs().max(basis.xi_t[i].abs()) > 1e-12)
            .collect();
        let (lo, hi) = (keep[0], keep[keep.len() - 1] + 1);
        let z = &basis.z[lo..hi];
        let k0 = -3.0 * dk;
        let nk = ((k_max - k0) / dk).ceil() as usize + 4;
        let ks: Vec<f64> = (0..nk).map(|i| k0 + i as f64 * dk).collect();
        let build = |mu: Transition| -> Vec<Complex64> {
            let a = &basis.localized(mu.n)[lo..hi];
            let b = &basis.localized(mu.m)[lo..hi];
            ks.par_iter().map(|&k| axial_fourier(a, b, z, basis.dz, k)).collect()
        };
        let bb = build(TRANSITIONS[0]);
        let bt = build(TRANSITIONS[1]);
        let tt = build(TRANSITIONS[3]);
        Self { k0, dk, values: [bb, bt.clone(), bt, tt] }
    }

    fn eval(&self, mu: usize, k: f64) -> Complex64 {
        if k < 0.0 {
            return cubic_uniform(self.k0, self.dk, &self.values[mu], -k).conj();
        }
        cubic_uniform(self.k0, self.dk, &self.values[mu], k)
    }
}

/// Options for building [`SpectralTables`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableOptions {
    /// Upper end of the frequency grid in meV (ħω_max).
    pub energy_max: f64,
    pub n_omega: usize,
    pub n_theta: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        Self { energy_max: 60.0, n_omega: 2000, n_theta: 128 }
    }
}

/// Branch-resolved single-particle spectral densities I_μν(ω) in 1/ps.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTables {
    /// Angular frequencies in rad/ps, ascending from 0.
    pub omega: Vec<f64>,
    /// channel → per-ω 4×4 matrix over (μ, ν) in [`TRANSITIONS`] order.
    pub channels: [Vec<Matrix4<Complex64>>; 4],
    /// lim_{ω→0} I_μν(ω)/ω per channel.
    pub zero_slope: [Matrix4<Complex64>; 4],
    summed: Vec<Matrix4<Complex64>>,
    summed_slope: Matrix4<Complex64>,
}

/// Energy (meV) below which the frequency grid is log-spaced.
const LOG_LINEAR_SPLIT_MEV: f64 = 2.0;
const LOWEST_LOG_MEV: f64 = 1e-4;

/// Hybrid grid: 0, then log-spaced up to 2 meV, then linear to the maximum.
pub fn omega_grid(energy_max: f64, n: usize) -> Vec<f64> {
    let mut e = vec![0.0];
    let split = LOG_LINEAR_SPLIT_MEV.min(energy_max);
    let (n_log, n_lin) = if energy_max > LOG_LINEAR_SPLIT_MEV { (n / 2, n - 1 - n / 2) } else { (n - 1, 0) };
    let (a, b) = (LOWEST_LOG_MEV.ln(), split.ln());
    for i in 0..n_log {
        e.push((a + (b - a) * i as f64 / (n_log - 1).max(1) as f64).exp());
    }
    for i in 1..=n_lin {
        e.push(split + (energy_max - split) * i as f64 / n_lin as f64);
    }
    e.into_iter().map(units::mev_to_omega).collect()
}

type ChannelSet = [Matrix4<Complex64>; 4];

struct ThetaRule {
    nodes: Vec<(f64, f64)>,
}

impl ThetaRule {
    fn new(n: usize) -> Self {
        Self { nodes: GaussLegendre::new(n).mapped(0.0, PI).collect() }
    }
}

fn tables_at(
    omega: f64,
    material: &MaterialParams,
    in_plane: InPlaneGround,
    fourier: &dyn Fn(usize, f64) -> Complex64,
    rule: &ThetaRule,
) -> [Matrix4<Complex64>; 4] {
    let mut out = [Matrix4::zeros(); 4];
    if omega <= 0.0 {
        return out;
    }
    for (slot, ch) in Channel::ALL.iter().enumerate() {
        let c = ch.sound_speed(material);
        let q = omega / c;
        let mut acc = Matrix4::<Complex64>::zeros();
        for &(theta, w) in &rule.nodes {
            let (s, co) = theta.sin_cos();
            let weight = w * s * ch.phi_integrated(material, q, theta);
            if weight == 0.0 {
                continue;
            }
            let g = in_plane.form_factor(q * s);
            let f: [Complex64; 4] = std::array::from_fn(|mu| g * fourier(mu, q * co));
            for a in 0..4 {
                for b in 0..4 {
                    acc[(a, b)] += f[a].conj() * f[b] * weight;
                }
            }
        }
        let pref = omega * omega / (c * c * c) / (HBAR * HBAR) / (2.0 * PI).powi(3);
        out[slot] = acc * Complex64::new(pref, 0.0);
    }
    out
}

/// Tabulates I^s_μν(ω) for all channels on the hybrid ω grid.
pub fn spectral_density_tables(basis: &AxialBasis, material: &MaterialParams, opts: TableOptions) -> Result<SpectralTables> {
    material.validate()?;
    if opts.n_omega < 16 || opts.n_theta < 8 || !(opts.energy_max > 0.0) {
        return Err(Error::InvalidParameter("table options out of range".into()));
    }
    let in_plane = material.in_plane();
    let omega = omega_grid(opts.energy_max, opts.n_omega);
    let omega_max = *omega.last().expect("non-empty grid");
    let k_max = omega_max / material.c_t.min(material.c_l) * 1.01;
    let fourier_table = AxialFourierTable::new(basis, k_max, 2e-3);
    let fourier = |mu: usize, k: f64| fourier_table.eval(mu, k);
    let rule = ThetaRule::new(opts.n_theta);
    let check_rule = ThetaRule::new(opts.n_theta / 2);

    let rows: Vec<(ChannelSet, ChannelSet)> = omega
        .par_iter()
        .map(|&w| {
            (
                tables_at(w, material, in_plane, &fourier, &rule),
                tables_at(w, material, in_plane, &fourier, &check_rule),
            )
        })
        .collect();

    // convergence: halving the θ rule must not move any entry by more than
    // 0.1% of that channel's peak trace
    for slot in 0..4 {
        let peak = rows.iter().map(|r| r.0[slot].trace().re.abs()).fold(0.0, f64::max);
        for (fine, coarse) in &rows {
            let diff = max_norm(&(fine[slot] - coarse[slot]));
            if diff > 1e-3 * peak + 1e-300 {
                return Err(Error::QuadratureNotConverged { estimate: max_norm(&fine[slot]), error: diff });
            }
        }
    }

    let direct = |mu: usize, k: f64| -> Complex64 {
        let t = TRANSITIONS[mu];
        axial_fourier(basis.localized(t.n), basis.localized(t.m), &basis.z, basis.dz, k)
    };
    let tiny = 1e-6;
    let slope_rows = tables_at(tiny, material, in_plane, &direct, &rule);
    let zero_slope = slope_rows.map(|m| m / Complex64::new(tiny, 0.0));

    let mut channels: [Vec<Matrix4<Complex64>>; 4] = Default::default();
    for (slot, ch) in channels.iter_mut().enumerate() {
        *ch = rows.iter().map(|r| r.0[slot]).collect();
    }
    SpectralTables::new(omega, channels, zero_slope)
}

impl SpectralTables {
    pub fn new(omega: Vec<f64>, channels: [Vec<Matrix4<Complex64>>; 4], zero_slope: [Matrix4<Complex64>; 4]) -> Result<Self> {
        let n = omega.len();
        if n < 2 || omega[0] != 0.0 || omega.windows(2).any(|w| w[1] <= w[0]) || channels.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidParameter("spectral tables need an ascending grid starting at 0".into()));
        }
        let summed = (0..n).map(|i| channels.iter().fold(Matrix4::zeros(), |acc, c| acc + c[i])).collect();
        let summed_slope = zero_slope.iter().fold(Matrix4::zeros(), |acc, m| acc + m);
        Ok(Self { omega, channels, zero_slope, summed, summed_slope })
    }

    pub fn omega_max(&self) -> f64 {
        *self.omega.last().expect("non-empty grid")
    }

    /// Channel-summed I_μν at |ω| by linear interpolation.
    pub fn total(&self, omega: f64) -> Result<Matrix4<Complex64>> {
        let w = omega.abs();
        if w > self.omega_max() {
            return Err(Error::OmegaOutOfRange { omega: w, omega_max: self.omega_max() });
        }
        let i = bracket(&self.omega, w);
        let t = (w - self.omega[i]) / (self.omega[i + 1] - self.omega[i]);
        Ok(self.summed[i] * Complex64::new(1.0 - t, 0.0) + self.summed[i + 1] * Complex64::new(t, 0.0))
    }

    /// One channel at |ω|.
    pub fn channel(&self, channel: Channel, omega: f64) -> Result<Matrix4<Complex64>> {
        let w = omega.abs();
        if w > self.omega_max() {
            return Err(Error::OmegaOutOfRange { omega: w, omega_max: self.omega_max() });
        }
        let slot = Channel::ALL.iter().position(|c| *c == channel).expect("known channel");
        let i = bracket(&self.omega, w);
        let t = (w - self.omega[i]) / (self.omega[i + 1] - self.omega[i]);
        let ch = &self.channels[slot];
        Ok(ch[i] * Complex64::new(1.0 - t, 0.0) + ch[i + 1] * Complex64::new(t, 0.0))
    }

    /// Channel-summed lim_{ω→0} I_μν(ω)/ω.
    pub fn total_zero_slope(&self) -> Matrix4<Complex64> {
        self.summed_slope
    }
}

fn max_norm(m: &Matrix4<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Bose–Einstein occupation n(ω) for ω in rad/ps and T in K.
pub fn bose(omega: f64, temperature: f64) -> f64 {
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// γ(ω) = 2π[J(−ω) n(−ω) + J(ω)(n(ω) + 1)].
///
/// `j_neg` is J(−ω) and `j_pos` is J(ω); the phonon spectral density is
/// supported on positive arguments only, so exactly one of them is non-zero
/// for ω ≠ 0. The ω = 0 point is the limit 2π · 2k_BT/ħ · J′(0), for which
/// callers use [`dephasing_rate`].
pub fn rate_gamma(j_pos: f64, j_neg: f64, omega: f64, temperature: f64) -> f64 {
    let mut g = 0.0;
    if j_neg != 0.0 {
        g += j_neg * bose(-omega, temperature);
    }
    if j_pos != 0.0 {
        g += j_pos * (bose(omega, temperature) + 1.0);
    }
    2.0 * PI * g
}

/// Thermal factor multiplying 2π J(|ω|): n+1 for emission, n for absorption.
pub fn thermal_factor(omega: f64, temperature: f64) -> f64 {
    if omega > 0.0 {
        bose(omega, temperature) + 1.0
    } else {
        bose(-omega, temperature)
    }
}

/// ω → 0 limit of γ for a spectral density with slope J′(0).
pub fn dephasing_rate(slope: f64, temperature: f64) -> f64 {
    2.0 * PI * 2.0 * K_B * temperature / HBAR * slope
}

/// Bath correlation function
/// C(τ) = ∫₀^∞ dω [cos(ωτ) coth(ħω/2k_BT) − i sin(ωτ)] ω² J(ω)
/// for J tabulated on `omega`.
pub fn correlation_function(omega: &[f64], j: &[f64], temperature: f64, taus: &[f64]) -> Vec<Complex64> {
    let tau_max = taus.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    // refine every table interval so that ω-steps stay below 0.05 rad per τ_max
    let mut w_fine = vec![omega[0]];
    let mut j_fine = vec![j[0]];
    for i in 0..omega.len() - 1 {
        let span = omega[i + 1] - omega[i];
        let m = ((span * tau_max / 0.05).ceil() as usize).max(1);
        for s in 1..=m {
            let t = s as f64 / m as f64;
            w_fine.push(omega[i] + t * span);
            j_fine.push(j[i] + t * (j[i + 1] - j[i]));
        }
    }
    let weights: Vec<(f64, f64, f64)> = w_fine
        .iter()
        .zip(&j_fine)
        .map(|(&w, &jv)| {
            if w <= 0.0 {
                (w, 0.0, 0.0)
            } else {
                let x = HBAR * w / (2.0 * K_B * temperature);
                let coth = 1.0 / x.tanh();
                (w, w * w * jv * coth, w * w * jv)
            }
        })
        .collect();
    taus.iter()
        .map(|&tau| {
            let mut re = 0.0;
            let mut im = 0.0;
            for p in weights.windows(2) {
                let h = 0.5 * (p[1].0 - p[0].0);
                re += h * ((p[0].0 * tau).cos() * p[0].1 + (p[1].0 * tau).cos() * p[1].1);
                im -= h * ((p[0].0 * tau).sin() * p[0].2 + (p[1].0 * tau).sin() * p[1].2);
            }
            Complex64::new(re, im)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavefunctions::PotentialSpec;

    fn basis() -> AxialBasis {
        AxialBasis::solve(&PotentialSpec::new(350.0, 4.5, 7.5, 0.065)).unwrap()
    }

    #[test]
    fn piezo_angular_factors_vanish_along_growth_axis() {
        let m = MaterialParams::default();
        let la = coupling_prefactor(Branch::LA, &m, 0.3, 0.0, 1.1).unwrap();
        assert_eq!(la.im, 0.0);
        assert!(la.re.abs() > 0.0);
        for b in [Branch::TA1, Branch::TA2] {
            let g = coupling_prefactor(b, &m, 0.3, 0.0, 0.7).unwrap();
            assert!(g.norm() < 1e-12 * la.norm());
        }
        assert!(coupling_prefactor(Branch::LA, &m, 0.0, 0.3, 0.1).is_err());
    }

    #[test]
    fn phi_integrals_match_numerical_azimuthal_sum() {
        let m = MaterialParams::default();
        let rule = GaussLegendre::new(64);
        for (theta, q) in [(0.4, 0.2), (1.2, 1.5), (2.5, 0.05)] {
            let la_num = rule.integrate(0.0, 2.0 * PI, |p| coupling_prefactor(Branch::LA, &m, q, theta, p).unwrap().norm_sqr());
            let la = Channel::LaDp.phi_integrated(&m, q, theta) + Channel::LaPe.phi_integrated(&m, q, theta);
            assert!((la_num - la).abs() < 1e-10 * la, "{la_num} vs {la}");
            let ta1 = rule.integrate(0.0, 2.0 * PI, |p| coupling_prefactor(Branch::TA1, &m, q, theta, p).unwrap().norm_sqr());
            assert!((ta1 - Channel::Ta1.phi_integrated(&m, q, theta)).abs() < 1e-10 * ta1);
            let ta2 = rule.integrate(0.0, 2.0 * PI, |p| coupling_prefactor(Branch::TA2, &m, q, theta, p).unwrap().norm_sqr());
            assert!((ta2 - Channel::Ta2.phi_integrated(&m, q, theta)).abs() < 1e-10 * ta2.max(1e-30));
        }
    }

    #[test]
    fn form_factor_limits() {
        let b = basis();
        let ip = InPlaneGround::from_length(5.4).unwrap();
        let bb = transition_form_factor(TRANSITIONS[0], &b, ip, 0.0, 0.0);
        let bt = transition_form_factor(TRANSITIONS[1], &b, ip, 0.0, 0.0);
        assert!((bb - 1.0).norm() < 1e-10);
        assert!(bt.norm() < 1e-10);
        let qz = 0.37;
        let fbb = transition_form_factor(TRANSITIONS[0], &b, ip, 0.1, qz);
        let ftt = transition_form_factor(TRANSITIONS[3], &b, ip, 0.1, qz);
        assert!((fbb.norm() - ftt.norm()).abs() < 1e-10);
    }

    #[test]
    fn bose_and_rate_limits() {
        let t = 10.0;
        let w = K_B * t / HBAR;
        assert!((bose(w, t) - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-12);
        let j = 0.3;
        let em = rate_gamma(j, 0.0, w, t);
        let ab = rate_gamma(0.0, j, -w, t);
        assert!((ab / em - (-1.0_f64).exp()).abs() < 1e-10);
        assert!((rate_gamma(j, 0.0, 5.0, 1e-3) - 2.0 * PI * j).abs() < 1e-12);
        assert!(rate_gamma(0.0, j, -5.0, 1e-3) < 1e-300);
    }
}
