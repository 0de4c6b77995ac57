//! Reference computations shared by the integration tests. None of these go
//! through the library's tables, Redfield kernel or integrator.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use qdmsim::hamiltonians::{DeviceModel, FieldSchedule, Sector};
use qdmsim::phonons::{coupling_prefactor, Branch, MaterialParams};
use qdmsim::units::{HBAR, K_B};
use qdmsim::wavefunctions::AxialBasis;

/// Eigenvalues (ascending) and eigenvectors of a real symmetric matrix.
pub fn eig(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = nalgebra::SymmetricEigen::new(h.clone());
    let mut idx: Vec<usize> = (0..h.nrows()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(h.nrows(), h.nrows(), |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

pub fn boltzmann(energies: &[f64], temperature: f64) -> Vec<f64> {
    let e0 = energies[0];
    let w: Vec<f64> = energies.iter().map(|e| (-(e - e0) / (K_B * temperature)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Fixed-step RK4 on iħ dψ/dt = H(t)ψ from the schedule start, starting in
/// eigenstate `index`; returns eigenbasis populations at `t_end`.
pub fn state_vector_populations(device: &DeviceModel, sector: Sector, schedule: &FieldSchedule, index: usize, t_end: f64, dt: f64) -> Vec<f64> {
    let n = sector.dim();
    let h_at = |t: f64| device.hamiltonian(sector, schedule.field_at(t)).map(|x| Complex64::new(x, 0.0));
    let (_, v0) = eig(&device.hamiltonian(sector, schedule.field_at(schedule.t_start)));
    let mut psi: DVector<Complex64> = v0.column(index).map(|x| Complex64::new(x, 0.0));
    let rhs = |t: f64, y: &DVector<Complex64>| -> DVector<Complex64> { (h_at(t) * y) * Complex64::new(0.0, -1.0 / HBAR) };
    let steps = ((t_end - schedule.t_start) / dt).ceil() as usize;
    let h = (t_end - schedule.t_start) / steps as f64;
    let mut t = schedule.t_start;
    for _ in 0..steps {
        let k1 = rhs(t, &psi);
        let k2 = rhs(t + 0.5 * h, &(&psi + &k1 * Complex64::new(0.5 * h, 0.0)));
        let k3 = rhs(t + 0.5 * h, &(&psi + &k2 * Complex64::new(0.5 * h, 0.0)));
        let k4 = rhs(t + h, &(&psi + &k3 * Complex64::new(h, 0.0)));
        psi += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * Complex64::new(h / 6.0, 0.0);
        t += h;
    }
    let (_, v) = eig(&device.hamiltonian(sector, schedule.field_at(t_end)));
    (0..n)
        .map(|i| {
            let amp: Complex64 = (0..n).map(|a| psi[a] * v[(a, i)]).sum();
            amp.norm_sqr()
        })
        .collect()
}

/// ∫ dz e^{ikz} a(z) b(z) by direct summation.
fn fourier(basis: &AxialBasis, a: &[f64], b: &[f64], k: f64) -> Complex64 {
    basis.z.iter().zip(a.iter().zip(b)).map(|(&z, (x, y))| Complex64::from_polar(x * y, k * z)).sum::<Complex64>() * basis.dz
}

/// Spectral density (1/ps) of the zero-field one-electron transition
/// between the bonding and antibonding orbitals at angular frequency ω,
/// from the golden-rule sum over bulk phonons with the φ-dependent
/// couplings integrated numerically.
pub fn golden_rule_density(basis: &AxialBasis, m: &MaterialParams, omega: f64) -> f64 {
    let beta = 1.0 / m.oscillator_length;
    let n_theta = 801;
    let n_phi = 48;
    let mut total = 0.0;
    for (branch, c) in [(Branch::LA, m.c_l), (Branch::TA1, m.c_t), (Branch::TA2, m.c_t)] {
        let q = omega / c;
        // composite Simpson in θ
        let h = PI / (n_theta - 1) as f64;
        let mut acc = 0.0;
        for i in 0..n_theta {
            let theta = i as f64 * h;
            let w = if i == 0 || i == n_theta - 1 { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            let (s, co) = theta.sin_cos();
            if s == 0.0 {
                continue;
            }
            let f = (-(q * s).powi(2) / (4.0 * beta * beta)).exp() * fourier(basis, &basis.xi_plus, &basis.xi_minus, q * co);
            let mut phi_sum = 0.0;
            for j in 0..n_phi {
                let phi = 2.0 * PI * j as f64 / n_phi as f64;
                phi_sum += coupling_prefactor(branch, m, q, theta, phi).unwrap().norm_sqr();
            }
            acc += w * s * phi_sum * (2.0 * PI / n_phi as f64) * f.norm_sqr();
        }
        acc *= h / 3.0;
        total += acc * q * q / c / (HBAR * HBAR) / (2.0 * PI).powi(3);
    }
    total
}

/// Relaxation rate 1/ps of the population difference: emission plus absorption.
pub fn golden_rule_relaxation(j: f64, omega: f64, temperature: f64) -> f64 {
    let n = 1.0 / ((HBAR * omega / (K_B * temperature)).exp() - 1.0);
    2.0 * PI * j * (2.0 * n + 1.0)
}

/// Coefficient of determination of a least-squares line through (x, y).
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

/// Slope of a least-squares line.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
