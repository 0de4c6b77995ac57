//! Time-dependent Bloch–Redfield propagation of the reduced density matrix.
//!
//! The system Hamiltonian is re-diagonalized at every right-hand-side
//! evaluation. Jump operators are A_α = |Ψ_j⟩⟨Ψ_i| for α = (i, j) with
//! frequency ω_α = (E_i − E_j)/ħ, so ω_α > 0 is emission. Their couplings to
//! the single-particle transitions, M_αμ = ⟨Ψ_j|a†_n a_m|Ψ_i⟩, combine the
//! tabulated I_μν(ω) into J_αβ(ω) = Σ M*_αμ M_βν I_μν(ω).

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonians::{DeviceModel, FieldSchedule, Sector};
use crate::numerics::smalleig::{hermitian_min_eigenvalue, jacobi_eigh};
use crate::phonons::{dephasing_rate, thermal_factor, SpectralTables};
use crate::units::HBAR;

type CMat<const N: usize> = SMatrix<Complex64, N, N>;
type RMat<const N: usize> = SMatrix<f64, N, N>;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Phonon bath at temperature `temperature` (K).
#[derive(Debug, Clone)]
pub struct BathSpec {
    pub temperature: f64,
    pub tables: Arc<SpectralTables>,
    /// Include the i = j (ω = 0) channels.
    pub pure_dephasing: bool,
}

impl BathSpec {
    pub fn new(temperature: f64, tables: Arc<SpectralTables>) -> Result<Self> {
        let b = Self { temperature, tables, pure_dephasing: true };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::InvalidParameter("temperature must be positive".into()));
        }
        Ok(())
    }
}

/// How cross terms γ_αβ with α ≠ β are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecularMode {
    /// Keep cross terms inside clusters of near-equal ω, rates at the cluster mean.
    Clustered,
    /// Keep every (α, β) with γ_αβ evaluated at ω_α.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RedfieldOptions {
    pub dissipation: bool,
    pub secular: SecularMode,
    /// Cluster width in meV.
    pub secular_tolerance: f64,
    pub atol: f64,
    pub rtol: f64,
    /// Step ceiling as a multiple of 1/k.
    pub max_step_factor: f64,
    /// Absolute cap on the step in ps.
    pub max_step: f64,
    /// Abort when the smallest eigenvalue of ρ drops below −positivity_abort.
    pub positivity_abort: f64,
    pub max_steps: u64,
    /// Re-gauge eigenvector signs on every evaluation (testing aid).
    pub gauge_jitter: bool,
}

impl Default for RedfieldOptions {
    fn default() -> Self {
        Self {
            dissipation: true,
            secular: SecularMode::Clustered,
            secular_tolerance: 0.01,
            atol: 1e-8,
            rtol: 0.0,
            max_step_factor: 0.05,
            max_step: f64::INFINITY,
            positivity_abort: 1e-5,
            max_steps: 200_000_000,
            gauge_jitter: false,
        }
    }
}

impl RedfieldOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0) || self.rtol < 0.0 || !(self.max_step_factor > 0.0) || !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter("integrator tolerances and step limits must be positive".into()));
        }
        if !(self.secular_tolerance >= 0.0) || !(self.positivity_abort > 0.0) {
            return Err(Error::InvalidParameter("secular tolerance and positivity threshold must be positive".into()));
        }
        Ok(())
    }
}

/// Matrices of a†_n a_m in the sector basis, in BB, BT, TB, TT order
/// (first letter n, second m).
pub fn occupation_transition_matrices(sector: Sector) -> [DMatrix<f64>; 4] {
    match sector {
        Sector::OneElectron => {
            let e = |r: usize, c: usize| {
                let mut m = DMatrix::zeros(2, 2);
                m[(r, c)] = 1.0;
                m
            };
            [e(0, 0), e(0, 1), e(1, 0), e(1, 1)]
        }
        Sector::TwoElectronSinglet => {
            let s = std::f64::consts::SQRT_2;
            let mut tb = DMatrix::zeros(3, 3);
            tb[(1, 0)] = s;
            tb[(2, 1)] = s;
            let bt = tb.transpose();
            let bb = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, 0.0]));
            let tt = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 2.0]));
            [bb, bt, tb, tt]
        }
    }
}

/// Instantaneous eigenbasis of H_S.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFrame {
    pub t: f64,
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns.
    pub eigenvectors: DMatrix<f64>,
    /// ⟨v_i(prev)|v_j(now)⟩ before reordering; absent for the first frame.
    pub overlap_with_prev: Option<DMatrix<f64>>,
}

impl EigenFrame {
    /// Diagonalizes `h`, ordering and signing eigenvectors for continuity with `prev`.
    pub fn new(t: f64, h: &DMatrix<f64>, prev: Option<&EigenFrame>) -> Self {
        let n = h.nrows();
        let eig = nalgebra::SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        let overlap = prev.map(|p| p.eigenvectors.transpose() * &vectors);
        match &overlap {
            Some(ov) => {
                let perm = best_assignment(n, |i, j| ov[(i, j)].abs());
                values = perm.iter().map(|&j| values[j]).collect();
                vectors = DMatrix::from_fn(n, n, |r, c| {
                    let j = perm[c];
                    vectors[(r, j)] * ov[(c, j)].signum()
                });
            }
            None => {
                // deterministic sign: largest component positive
                for c in 0..n {
                    let col = vectors.column(c);
                    let imax = (0..n).max_by(|&a, &b| col[a].abs().total_cmp(&col[b].abs())).unwrap_or(0);
                    if vectors[(imax, c)] < 0.0 {
                        vectors.column_mut(c).neg_mut();
                    }
                }
            }
        }
        Self { t, eigenvalues: values, eigenvectors: vectors, overlap_with_prev: overlap }
    }

    /// Eigenbasis populations ⟨Ψ_i|ρ|Ψ_i⟩.
    pub fn populations(&self, rho: &DMatrix<Complex64>) -> Vec<f64> {
        let n = self.eigenvalues.len();
        (0..n)
            .map(|i| {
                let mut p = C0;
                for a in 0..n {
                    for b in 0..n {
                        p += rho[(a, b)] * self.eigenvectors[(a, i)] * self.eigenvectors[(b, i)];
                    }
                }
                p.re
            })
            .collect()
    }
}

/// Permutation perm[new_index] = column maximizing total |overlap|; ties keep the identity.
fn best_assignment(n: usize, score: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut best: Vec<usize> = (0..n).collect();
    let mut best_score: f64 = (0..n).map(|i| score(i, i)).sum();
    let mut perm: Vec<usize> = (0..n).collect();
    permutations(&mut perm, 0, &mut |p| {
        let s: f64 = (0..n).map(|i| score(i, p[i])).sum();
        if s > best_score + 1e-12 {
            best_score = s;
            best = p.to_vec();
        }
    });
    best
}

fn permutations(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, f);
        p.swap(k, i);
    }
}

/// One jump channel α = (i, j).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpChannel {
    pub i: usize,
    pub j: usize,
    /// (E_i − E_j)/ħ in rad/ps.
    pub omega: f64,
    /// M_αμ in BB, BT, TB, TT order.
    pub m: [f64; 4],
}

/// All ordered eigenstate pairs of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionSet {
    pub channels: Vec<JumpChannel>,
}

pub fn build_transitions(frame: &EigenFrame, occupation: &[DMatrix<f64>; 4]) -> TransitionSet {
    let v = &frame.eigenvectors;
    let n = frame.eigenvalues.len();
    let rotated: Vec<DMatrix<f64>> = occupation.iter().map(|o| v.transpose() * o * v).collect();
    let mut channels = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            channels.push(JumpChannel {
                i,
                j,
                omega: (frame.eigenvalues[i] - frame.eigenvalues[j]) / HBAR,
                m: std::array::from_fn(|mu| rotated[mu][(j, i)]),
            });
        }
    }
    TransitionSet { channels }
}

/// Thermal rate γ_αβ at frequency ω from a 4×4 single-particle matrix.
fn gamma_pair(ma: &[f64; 4], mb: &[f64; 4], i_mat: &nalgebra::Matrix4<Complex64>, factor: f64) -> Complex64 {
    let mut j = C0;
    for mu in 0..4 {
        if ma[mu] == 0.0 {
            continue;
        }
        let mut row = C0;
        for nu in 0..4 {
            row += i_mat[(mu, nu)] * mb[nu];
        }
        j += row * ma[mu];
    }
    j * factor
}

/// Everything needed to evaluate the right-hand side.
#[derive(Debug, Clone)]
pub struct Model {
    pub device: DeviceModel,
    pub sector: Sector,
    pub schedule: FieldSchedule,
    pub bath: Option<BathSpec>,
    pub options: RedfieldOptions,
}

impl Model {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.schedule.validate()?;
        self.options.validate()?;
        if let Some(b) = &self.bath {
            b.validate()?;
        }
        Ok(())
    }

    fn dissipative(&self) -> Option<&BathSpec> {
        if self.options.dissipation {
            self.bath.as_ref()
        } else {
            None
        }
    }
}

struct Kernel<const N: usize> {
    model: Model,
    occupation: [RMat<N>; 4],
    jitter: std::cell::Cell<u64>,
}

impl<const N: usize> Kernel<N> {
    fn new(model: Model) -> Self {
        let occ = occupation_transition_matrices(model.sector);
        let occupation = std::array::from_fn(|mu| RMat::<N>::from_fn(|r, c| occ[mu][(r, c)]));
        Self { model, occupation, jitter: std::cell::Cell::new(0) }
    }

    fn hamiltonian(&self, t: f64) -> RMat<N> {
        let f = self.model.schedule.field_at(t);
        let h = self.model.device.hamiltonian(self.model.sector, f);
        RMat::<N>::from_fn(|r, c| h[(r, c)])
    }

    fn drift(&self, t: f64, rho: &CMat<N>) -> Result<CMat<N>> {
        let h = self.hamiltonian(t);
        let hc: CMat<N> = h.map(|x| Complex64::new(x, 0.0));
        let mut d = (hc * rho - rho * hc) * Complex64::new(0.0, -1.0 / HBAR);
        let Some(bath) = self.model.dissipative() else {
            return Ok(d);
        };
        let (e, mut v) = jacobi_eigh(h);
        if self.model.options.gauge_jitter {
            let mut s = self.jitter.get().wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            self.jitter.set(s);
            for c in 0..N {
                s = s.rotate_left(7);
                if s & 1 == 1 {
                    v.column_mut(c).neg_mut();
                }
            }
        }
        let vc: CMat<N> = v.map(|x| Complex64::new(x, 0.0));
        let rt = vc.transpose() * rho * vc;
        let dt = self.dissipator(bath, &e, &v, &rt)?;
        d += vc * dt * vc.transpose();
        Ok(d)
    }

    fn dissipator(&self, bath: &BathSpec, e: &SVector<f64, N>, v: &RMat<N>, rt: &CMat<N>) -> Result<CMat<N>> {
        let opts = &self.model.options;
        let rotated: [RMat<N>; 4] = std::array::from_fn(|mu| v.transpose() * self.occupation[mu] * v);
        let mut chans: Vec<(usize, usize, f64, [f64; 4])> = Vec::with_capacity(N * N);
        for i in 0..N {
            for j in 0..N {
                if i == j && !bath.pure_dephasing {
                    continue;
                }
                let m = std::array::from_fn(|mu| rotated[mu][(j, i)]);
                chans.push((i, j, (e[i] - e[j]) / HBAR, m));
            }
        }
        let tables = &bath.tables;
        let temp = bath.temperature;
        let rate_matrix = |omega: f64| -> Result<(nalgebra::Matrix4<Complex64>, f64)> {
            if omega.abs() < 1e-12 {
                Ok((tables.total_zero_slope(), dephasing_rate(1.0, temp)))
            } else {
                Ok((tables.total(omega)?, 2.0 * std::f64::consts::PI * thermal_factor(omega, temp)))
            }
        };
        let mut out = CMat::<N>::zeros();
        let mut apply = |a: &(usize, usize, f64, [f64; 4]), b: &(usize, usize, f64, [f64; 4]), g: Complex64| {
            let (ia, ja) = (a.0, a.1);
            let (ib, jb) = (b.0, b.1);
            // A_β ρ A_α†
            out[(jb, ja)] += g * rt[(ib, ia)];
            if ja == jb {
                // −½ A_α†A_β ρ − ½ ρ A_α†A_β with A_α†A_β = |i_α⟩⟨i_β|
                for k in 0..N {
                    out[(ia, k)] -= 0.5 * g * rt[(ib, k)];
                    out[(k, ib)] -= 0.5 * g * rt[(k, ia)];
                }
            }
        };
        match opts.secular {
            SecularMode::Clustered => {
                let tol = opts.secular_tolerance / HBAR;
                let mut order: Vec<usize> = (0..chans.len()).collect();
                order.sort_by(|&x, &y| chans[x].2.total_cmp(&chans[y].2));
                let mut start = 0;
                while start < order.len() {
                    let mut end = start + 1;
                    while end < order.len() && chans[order[end]].2 - chans[order[end - 1]].2 < tol {
                        end += 1;
                    }
                    let members = &order[start..end];
                    let mean = members.iter().map(|&x| chans[x].2).sum::<f64>() / members.len() as f64;
                    let (imat, factor) = rate_matrix(mean)?;
                    for &a in members {
                        for &b in members {
                            let g = gamma_pair(&chans[a].3, &chans[b].3, &imat, factor);
                            if g != C0 {
                                apply(&chans[a], &chans[b], g);
                            }
                        }
                    }
                    start = end;
                }
            }
            SecularMode::Full => {
                // γ_αβ(ω_α) is not Hermitian in (α, β), so build the one-sided
                // ½γ(A_β ρ A_α† − A_α†A_β ρ) and add its adjoint
                let mut half = CMat::<N>::zeros();
                for a in &chans {
                    let (imat, factor) = rate_matrix(a.2)?;
                    for b in &chans {
                        let g = gamma_pair(&a.3, &b.3, &imat, factor);
                        if g == C0 {
                            continue;
                        }
                        half[(b.1, a.1)] += 0.5 * g * rt[(b.0, a.0)];
                        if a.1 == b.1 {
                            for k in 0..N {
                                half[(a.0, k)] -= 0.5 * g * rt[(b.0, k)];
                            }
                        }
                    }
                }
                out = half + half.adjoint();
            }
        }
        Ok(out)
    }

    fn frame(&self, t: f64, prev: Option<&EigenFrame>) -> EigenFrame {
        let h = self.model.device.hamiltonian(self.model.sector, self.model.schedule.field_at(t));
        EigenFrame::new(t, &h, prev)
    }
}

/// Sampled output of a propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub sector: Sector,
    pub times: Vec<f64>,
    pub fields: Vec<f64>,
    pub rho: Vec<DMatrix<Complex64>>,
    /// populations[s][i] = ⟨Ψ_i(t_s)|ρ(t_s)|Ψ_i(t_s)⟩
    pub populations: Vec<Vec<f64>>,
    pub energies: Vec<Vec<f64>>,
    pub trace_err: Vec<f64>,
    pub min_eig: Vec<f64>,
    pub stats: StepStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
    /// Smallest eigenvalue of ρ over all accepted steps.
    pub min_eig: f64,
    /// Largest |tr ρ − 1| over all accepted steps.
    pub max_trace_err: f64,
}

impl Trajectory {
    fn empty(sector: Sector) -> Self {
        Self {
            sector,
            times: vec![],
            fields: vec![],
            rho: vec![],
            populations: vec![],
            energies: vec![],
            trace_err: vec![],
            min_eig: vec![],
            stats: StepStats { min_eig: f64::INFINITY, ..Default::default() },
        }
    }

    pub fn final_populations(&self) -> Option<&[f64]> {
        self.populations.last().map(|p| p.as_slice())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.sector.dim();
        let mut header = vec!["t_ps".to_string(), "F_Vnm".to_string()];
        header.extend((0..n).map(|i| format!("p{i}")));
        for a in 0..n {
            for b in 0..n {
                header.push(format!("re_rho_{a}{b}"));
                header.push(format!("im_rho_{a}{b}"));
            }
        }
        header.push("trace_err".into());
        header.push("min_eig".into());
        writeln!(w, "{}", header.join(","))?;
        for s in 0..self.times.len() {
            let mut row = vec![format!("{:.10e}", self.times[s]), format!("{:.10e}", self.fields[s])];
            row.extend(self.populations[s].iter().map(|p| format!("{p:.12e}")));
            for a in 0..n {
                for b in 0..n {
                    let z = self.rho[s][(a, b)];
                    row.push(format!("{:.12e}", z.re));
                    row.push(format!("{:.12e}", z.im));
                }
            }
            row.push(format!("{:.3e}", self.trace_err[s]));
            row.push(format!("{:.3e}", self.min_eig[s]));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

// Dormand–Prince 5(4)
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Engine<const N: usize> {
    kernel: Kernel<N>,
    t: f64,
    rho: CMat<N>,
    h: f64,
    k1: Option<CMat<N>>,
    frame_t: f64,
    values: SVector<f64, N>,
    vectors: RMat<N>,
    traj: Trajectory,
}

fn hermitize<const N: usize>(m: &CMat<N>) -> CMat<N> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

fn min_eig<const N: usize>(m: &CMat<N>) -> f64 {
    hermitian_min_eigenvalue(m)
}

/// Eigen-decomposition reordered and signed for continuity with `prev`.
fn continued_eigh<const N: usize>(h: RMat<N>, prev: &RMat<N>) -> (SVector<f64, N>, RMat<N>) {
    let (e, v) = jacobi_eigh(h);
    let ov = prev.transpose() * v;
    let perm = best_assignment(N, |i, j| ov[(i, j)].abs());
    let e2 = SVector::<f64, N>::from_fn(|i, _| e[perm[i]]);
    let v2 = RMat::<N>::from_fn(|r, c| v[(r, perm[c])] * ov[(c, perm[c])].signum());
    (e2, v2)
}

impl<const N: usize> Engine<N> {
    fn new(model: Model, rho0: &DMatrix<Complex64>) -> Result<Self> {
        if rho0.nrows() != N || rho0.ncols() != N {
            return Err(Error::InvalidParameter(format!("initial state must be {N}×{N}")));
        }
        let rho = CMat::<N>::from_fn(|r, c| rho0[(r, c)]);
        if (rho - rho.adjoint()).iter().any(|z| z.norm() > 1e-12) {
            return Err(Error::InvalidParameter("initial state must be Hermitian".into()));
        }
        if (rho.trace().re - 1.0).abs() > 1e-8 || min_eig(&rho) < -1e-7 {
            return Err(Error::InvalidParameter("initial state must be a density matrix".into()));
        }
        let t = model.schedule.t_start;
        let sector = model.sector;
        let h0 = (0.05 / model.schedule.k).min(0.01).min(model.options.max_step);
        let kernel = Kernel::<N>::new(model);
        let frame = kernel.frame(t, None);
        let values = SVector::<f64, N>::from_fn(|i, _| frame.eigenvalues[i]);
        let vectors = RMat::<N>::from_fn(|r, c| frame.eigenvectors[(r, c)]);
        let mut e = Self { kernel, t, rho, h: h0, k1: None, frame_t: t, values, vectors, traj: Trajectory::empty(sector) };
        e.record();
        Ok(e)
    }

    fn h_max(&self) -> f64 {
        let o = &self.kernel.model.options;
        (o.max_step_factor / self.kernel.model.schedule.k).min(o.max_step)
    }

    fn record(&mut self) {
        self.sync_frame();
        let rho = DMatrix::from_fn(N, N, |r, c| self.rho[(r, c)]);
        let vc: CMat<N> = self.vectors.map(|x| Complex64::new(x, 0.0));
        let pops = (vc.adjoint() * self.rho * vc).diagonal().iter().map(|z| z.re).collect();
        self.traj.times.push(self.t);
        self.traj.fields.push(self.kernel.model.schedule.field_at(self.t));
        self.traj.energies.push(self.values.iter().copied().collect());
        self.traj.trace_err.push((self.rho.trace().re - 1.0).abs());
        self.traj.min_eig.push(min_eig(&self.rho));
        self.traj.populations.push(pops);
        self.traj.rho.push(rho);
    }

    fn sync_frame(&mut self) {
        if self.frame_t != self.t {
            let (e, v) = continued_eigh(self.kernel.hamiltonian(self.t), &self.vectors);
            self.values = e;
            self.vectors = v;
            self.frame_t = self.t;
        }
    }

    /// One attempted step of size h; returns the error norm and proposal.
    fn attempt(&self, h: f64, k1: &CMat<N>) -> Result<(CMat<N>, CMat<N>, f64)> {
        let (t, y) = (self.t, &self.rho);
        let k = &self.kernel;
        let c = |x: f64| Complex64::new(x * h, 0.0);
        let k2 = k.drift(t + h / 5.0, &(y + k1 * c(A21)))?;
        let k3 = k.drift(t + 3.0 * h / 10.0, &(y + k1 * c(A31) + k2 * c(A32)))?;
        let k4 = k.drift(t + 4.0 * h / 5.0, &(y + k1 * c(A41) + k2 * c(A42) + k3 * c(A43)))?;
        let k5 = k.drift(t + 8.0 * h / 9.0, &(y + k1 * c(A51) + k2 * c(A52) + k3 * c(A53) + k4 * c(A54)))?;
        let k6 = k.drift(t + h, &(y + k1 * c(A61) + k2 * c(A62) + k3 * c(A63) + k4 * c(A64) + k5 * c(A65)))?;
        let y_new = y + k1 * c(B1) + k3 * c(B3) + k4 * c(B4) + k5 * c(B5) + k6 * c(B6);
        let k7 = k.drift(t + h, &y_new)?;
        let err = k1 * c(E1) + k3 * c(E3) + k4 * c(E4) + k5 * c(E5) + k6 * c(E6) + k7 * c(E7);
        let o = &k.model.options;
        let mut norm: f64 = 0.0;
        for idx in 0..N * N {
            let scale = o.atol + o.rtol * y[idx].norm().max(y_new[idx].norm());
            norm = norm.max(err[idx].norm() / scale);
        }
        Ok((y_new, k7, norm))
    }

    /// Integrates to `t_target`, recording a sample at each time in `samples`
    /// (which must lie in (t, t_target]) and at `t_target`.
    fn advance(&mut self, t_target: f64, samples: &[f64]) -> Result<()> {
        let mut stops: Vec<f64> = samples.iter().copied().filter(|&s| s > self.t && s < t_target).collect();
        stops.sort_by(f64::total_cmp);
        stops.push(t_target);
        let abort = self.kernel.model.options.positivity_abort;
        let max_steps = self.kernel.model.options.max_steps;
        for stop in stops {
            while self.t < stop {
                let h_max = self.h_max();
                let mut h = self.h.min(h_max);
                let clamped = self.t + h >= stop;
                if clamped {
                    h = stop - self.t;
                }
                if h < 1e-13 * self.t.abs().max(1.0) {
                    if clamped {
                        self.t = stop;
                        break;
                    }
                    return Err(Error::StepUnderflow { t: self.t, step: h });
                }
                let k1 = match self.k1.take() {
                    Some(k) => k,
                    None => self.kernel.drift(self.t, &self.rho)?,
                };
                let (y_new, k7, err) = self.attempt(h, &k1)?;
                if err <= 1.0 {
                    self.traj.stats.accepted += 1;
                    self.t = if clamped { stop } else { self.t + h };
                    self.rho = hermitize(&y_new);
                    self.k1 = Some(k7);
                    let me = min_eig(&self.rho);
                    self.traj.stats.min_eig = self.traj.stats.min_eig.min(me);
                    self.traj.stats.max_trace_err = self.traj.stats.max_trace_err.max((self.rho.trace().re - 1.0).abs());
                    if me < -abort {
                        return Err(Error::PositivityViolation { t: self.t, min_eig: me, step: h });
                    }
                    self.sync_frame();
                    let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    // a step shortened to hit a sample does not shrink the next one
                    self.h = if clamped { self.h.max(h * grow) } else { h * grow };
                } else {
                    self.traj.stats.rejected += 1;
                    self.k1 = Some(k1);
                    self.h = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                }
                if self.traj.stats.accepted + self.traj.stats.rejected > max_steps {
                    return Err(Error::StepBudget { t: self.t, steps: max_steps });
                }
            }
            self.record();
        }
        Ok(())
    }
}

#[allow(clippy::large_enum_variant)]
enum EngineAny {
    Two(Engine<2>),
    Three(Engine<3>),
}

/// A running propagation that can be advanced in stages.
pub struct Propagation {
    engine: EngineAny,
}

impl Propagation {
    pub fn new(model: Model, rho0: &DMatrix<Complex64>) -> Result<Self> {
        model.validate()?;
        let engine = match model.sector {
            Sector::OneElectron => EngineAny::Two(Engine::new(model, rho0)?),
            Sector::TwoElectronSinglet => EngineAny::Three(Engine::new(model, rho0)?),
        };
        Ok(Self { engine })
    }

    pub fn advance(&mut self, t_target: f64, samples: &[f64]) -> Result<()> {
        match &mut self.engine {
            EngineAny::Two(e) => e.advance(t_target, samples),
            EngineAny::Three(e) => e.advance(t_target, samples),
        }
    }

    pub fn time(&self) -> f64 {
        match &self.engine {
            EngineAny::Two(e) => e.t,
            EngineAny::Three(e) => e.t,
        }
    }

    pub fn trajectory(&self) -> &Trajectory {
        match &self.engine {
            EngineAny::Two(e) => &e.traj,
            EngineAny::Three(e) => &e.traj,
        }
    }

    pub fn into_trajectory(self) -> Trajectory {
        match self.engine {
            EngineAny::Two(e) => e.traj,
            EngineAny::Three(e) => e.traj,
        }
    }
}

/// Right-hand side dρ/dt at time t (in the fixed charge basis).
pub fn drift(rho: &DMatrix<Complex64>, t: f64, model: &Model) -> Result<DMatrix<Complex64>> {
    fn run<const N: usize>(rho: &DMatrix<Complex64>, t: f64, model: &Model) -> Result<DMatrix<Complex64>> {
        let k = Kernel::<N>::new(model.clone());
        let r = CMat::<N>::from_fn(|a, b| rho[(a, b)]);
        let d = k.drift(t, &r)?;
        Ok(DMatrix::from_fn(N, N, |a, b| d[(a, b)]))
    }
    match model.sector {
        Sector::OneElectron => run::<2>(rho, t, model),
        Sector::TwoElectronSinglet => run::<3>(rho, t, model),
    }
}

/// Propagates ρ₀ over the schedule window with `n_samples` equally spaced samples.
pub fn propagate(rho0: &DMatrix<Complex64>, model: Model, n_samples: usize) -> Result<Trajectory> {
    let (t0, t1) = (model.schedule.t_start, model.schedule.t_end);
    let n = n_samples.max(2);
    let samples: Vec<f64> = (1..n - 1).map(|s| t0 + (t1 - t0) * s as f64 / (n - 1) as f64).collect();
    let mut p = Propagation::new(model, rho0)?;
    p.advance(t1, &samples)?;
    Ok(p.into_trajectory())
}

/// |Ψ_i(t)⟩⟨Ψ_i(t)| for the instantaneous eigenstate `index` (0 = ground).
pub fn eigenstate_projector(device: &DeviceModel, sector: Sector, field: f64, index: usize) -> Result<DMatrix<Complex64>> {
    let h = device.hamiltonian(sector, field);
    let frame = EigenFrame::new(0.0, &h, None);
    if index >= frame.eigenvalues.len() {
        return Err(Error::InvalidParameter(format!("eigenstate index {index} out of range")));
    }
    let v = frame.eigenvectors.column(index);
    Ok(DMatrix::from_fn(h.nrows(), h.nrows(), |a, b| Complex64::new(v[a] * v[b], 0.0)))
}
