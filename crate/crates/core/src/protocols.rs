//! Switching experiments: single runs, speed sweeps, Landau–Zener rescaling
//! and the maximum switching speed for a target fidelity.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::TableStore;
use crate::coulomb::coulomb_elements;
use crate::error::{Error, Result};
use crate::hamiltonians::{eigh_sorted, DeviceModel, FieldSchedule, Sector, DEFAULT_EDF_MAX_MEV, DEFAULT_INTRINSIC_REGION_NM};
use crate::phonons::{MaterialParams, SpectralTables, TableOptions};
use crate::redfield::{eigenstate_projector, BathSpec, Model, Propagation, RedfieldOptions, Trajectory};
use crate::units::{HBAR, MEV_PER_V};
use crate::wavefunctions::{barrier_width_for_tunnel_coupling, AxialBasis, PotentialSpec};

/// Tunnel coupling whose geometry fixes the shared dipole length.
pub const REFERENCE_TUNNEL_COUPLING: f64 = 0.5;

/// Dipole length d entering e·d·F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DipoleLength {
    /// Centre-to-centre separation of each geometry.
    Geometric,
    /// Separation of the geometry with t_e = 0.5 meV, shared by all couplings.
    Reference,
    /// Fixed length in nm.
    Fixed(f64),
}

/// Settings shared by every device built for an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceOptions {
    pub material: MaterialParams,
    /// Intrinsic region in nm.
    pub d_i: f64,
    pub dipole_length: DipoleLength,
    /// e·d·f_max in meV.
    pub edf_max: f64,
    /// Relative tolerance of the barrier-width inversion.
    pub inversion_tolerance: f64,
}

impl Default for DeviceOptions {
    fn default() -> Self {
        Self {
            material: MaterialParams::default(),
            d_i: DEFAULT_INTRINSIC_REGION_NM,
            dipole_length: DipoleLength::Reference,
            edf_max: DEFAULT_EDF_MAX_MEV,
            inversion_tolerance: 1e-8,
        }
    }
}

impl DeviceOptions {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if !(self.d_i > 0.0) || !(self.edf_max > 0.0) || !(self.inversion_tolerance > 0.0) {
            return Err(Error::InvalidParameter("d_i, edf_max and inversion_tolerance must be positive".into()));
        }
        if let DipoleLength::Fixed(d) = self.dipole_length {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter("fixed dipole length must be positive".into()));
            }
        }
        Ok(())
    }

    fn potential_for_width(&self, w: f64) -> PotentialSpec {
        let m = &self.material;
        PotentialSpec::new(m.well_depth, m.dot_height, w, m.effective_mass)
    }

    /// Geometry whose |t_e| matches `t_e` (meV).
    pub fn basis_for_tunnel_coupling(&self, t_e: f64) -> Result<AxialBasis> {
        let m = &self.material;
        barrier_width_for_tunnel_coupling(t_e, m.well_depth, m.dot_height, m.effective_mass, self.inversion_tolerance)
    }

    pub fn basis_for_barrier_width(&self, w: f64) -> Result<AxialBasis> {
        AxialBasis::solve(&self.potential_for_width(w))
    }

    fn dipole_for(&self, basis: &AxialBasis) -> Result<f64> {
        Ok(match self.dipole_length {
            DipoleLength::Geometric => basis.dot_separation(),
            DipoleLength::Fixed(d) => d,
            DipoleLength::Reference => self.basis_for_tunnel_coupling(REFERENCE_TUNNEL_COUPLING)?.dot_separation(),
        })
    }

    /// Device model for a solved geometry; the tunnel coupling is |⟨ξ_B|H|ξ_T⟩|.
    pub fn device_for(&self, basis: &AxialBasis) -> Result<DeviceModel> {
        let m = &self.material;
        let coulomb = coulomb_elements(basis, m.in_plane(), m.eps_r)?;
        let device = DeviceModel { t_e: basis.t_e.abs(), d: self.dipole_for(basis)?, d_i: self.d_i, coulomb, material: *m };
        device.validate()?;
        Ok(device)
    }
}

/// Largest level spread of the sector Hamiltonian over a switching protocol.
pub fn max_saturation_gap(device: &DeviceModel, sector: Sector, edf_max: f64) -> f64 {
    let f_max = device.field_for_detuning(edf_max);
    let fields: &[f64] = match sector {
        Sector::OneElectron => &[-f_max, 0.0, f_max],
        Sector::TwoElectronSinglet => &[-2.0 * f_max, -f_max, 0.0],
    };
    fields
        .iter()
        .map(|&f| {
            let (e, _) = eigh_sorted(&device.hamiltonian(sector, f));
            e[e.len() - 1] - e[0]
        })
        .fold(0.0, f64::max)
}

/// Geometry, device and spectral tables for one tunnel coupling.
#[derive(Debug, Clone)]
pub struct SwitchContext {
    pub sector: Sector,
    pub basis: Arc<AxialBasis>,
    pub device: DeviceModel,
    pub tables: Arc<SpectralTables>,
    pub edf_max: f64,
}

impl SwitchContext {
    /// Builds geometry and tables for a target tunnel coupling; the table
    /// range is three times the largest level spread of the protocol.
    pub fn for_tunnel_coupling(sector: Sector, t_e: f64, opts: &DeviceOptions, store: &TableStore, n_omega: usize) -> Result<Self> {
        opts.validate()?;
        let basis = opts.basis_for_tunnel_coupling(t_e)?;
        Self::for_basis(sector, basis, opts, store, n_omega)
    }

    pub fn for_basis(sector: Sector, basis: AxialBasis, opts: &DeviceOptions, store: &TableStore, n_omega: usize) -> Result<Self> {
        let device = opts.device_for(&basis)?;
        let energy_max = 3.0 * max_saturation_gap(&device, sector, opts.edf_max);
        let table_opts = TableOptions { energy_max, n_omega, ..Default::default() };
        let tables = store.get(&basis, &opts.material, table_opts)?;
        Ok(Self { sector, basis: Arc::new(basis), device, tables: Arc::new(tables), edf_max: opts.edf_max })
    }

    pub fn schedule(&self, v: f64) -> Result<FieldSchedule> {
        FieldSchedule::for_speed(self.sector.schedule_variant(), &self.device, v, self.edf_max)
    }
}

/// When the final populations are read out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutSpec {
    /// Maximum population change over one extra 1/k for the run to count as settled.
    pub drift_tolerance: f64,
    /// Number of 1/k extensions beyond the nominal end before giving up.
    pub max_extensions: usize,
}

impl Default for ReadoutSpec {
    fn default() -> Self {
        Self { drift_tolerance: 1e-4, max_extensions: 20 }
    }
}

/// Options of a single switching run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwitchOptions {
    pub redfield: RedfieldOptions,
    pub readout: ReadoutSpec,
    pub pure_dephasing: bool,
    /// Trajectory samples over the nominal window (0 keeps only the endpoints).
    pub n_samples: usize,
}

impl Default for SwitchOptions {
    fn default() -> Self {
        Self { redfield: RedfieldOptions::default(), readout: ReadoutSpec::default(), pure_dephasing: true, n_samples: 0 }
    }
}

/// Result of one switching run.
#[derive(Debug, Clone)]
pub struct SwitchOutcome {
    pub final_populations: Vec<f64>,
    /// Target-state population: Ψ₁ for one electron, Ψ₀ for two.
    pub fidelity: f64,
    pub t_final: f64,
    pub settled: bool,
    pub trajectory: Trajectory,
}

/// Index of the state whose final population is the figure of merit.
pub fn target_state(sector: Sector) -> usize {
    match sector {
        Sector::OneElectron => 1,
        Sector::TwoElectronSinglet => 0,
    }
}

/// Runs one switching protocol at speed `v` (V/ps).
pub fn switch(ctx: &SwitchContext, temperature: f64, v: f64, dissipation: bool, opts: &SwitchOptions) -> Result<SwitchOutcome> {
    let schedule = ctx.schedule(v)?;
    let mut bath = BathSpec::new(temperature, ctx.tables.clone())?;
    bath.pure_dephasing = opts.pure_dephasing;
    let options = RedfieldOptions { dissipation, ..opts.redfield };
    let model = Model { device: ctx.device, sector: ctx.sector, schedule, bath: Some(bath), options };
    // one electron starts in the upper state, two electrons in the ground state
    let rho0 = eigenstate_projector(&ctx.device, ctx.sector, schedule.field_at(schedule.t_start), target_state(ctx.sector))?;
    let mut prop = Propagation::new(model, &rho0)?;
    let n = opts.n_samples;
    let (t0, t1) = (schedule.t_start, schedule.t_end);
    let samples: Vec<f64> = (1..n.max(1)).map(|s| t0 + (t1 - t0) * s as f64 / n as f64).collect();
    prop.advance(t1, &samples)?;

    let window = 1.0 / schedule.k;
    let mut settled = false;
    for _ in 0..opts.readout.max_extensions {
        let before = prop.trajectory().final_populations().expect("sampled").to_vec();
        let t = prop.time() + window;
        prop.advance(t, &[])?;
        let after = prop.trajectory().final_populations().expect("sampled");
        let change = before.iter().zip(after).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if change < opts.readout.drift_tolerance {
            settled = true;
            break;
        }
    }
    let t_final = prop.time();
    let trajectory = prop.into_trajectory();
    let final_populations = trajectory.final_populations().expect("sampled").to_vec();
    let fidelity = final_populations[target_state(ctx.sector)].clamp(0.0, 1.0);
    Ok(SwitchOutcome { final_populations, fidelity, t_final, settled, trajectory })
}

/// Which dissipation settings a sweep covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationMode {
    On,
    Off,
    Both,
}

impl DissipationMode {
    fn flags(self) -> &'static [bool] {
        match self {
            DissipationMode::On => &[true],
            DissipationMode::Off => &[false],
            DissipationMode::Both => &[true, false],
        }
    }
}

/// `per_decade` log-spaced speeds from `v_min` to `v_max` inclusive.
pub fn speed_grid(v_min: f64, v_max: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(v_min > 0.0) || !(v_max > v_min) || per_decade == 0 {
        return Err(Error::InvalidParameter("speed grid needs 0 < v_min < v_max and per_decade ≥ 1".into()));
    }
    let decades = (v_max / v_min).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    Ok((0..=n).map(|i| v_min * 10f64.powf(decades * i as f64 / n as f64)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub sector: Sector,
    /// Tunnel couplings in meV.
    pub tunnel_couplings: Vec<f64>,
    /// Temperatures in K.
    pub temperatures: Vec<f64>,
    /// Switching speeds in V/ps, ascending.
    pub speeds: Vec<f64>,
    pub dissipation: DissipationMode,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.tunnel_couplings.is_empty() || self.temperatures.is_empty() || self.speeds.is_empty() {
            return Err(Error::InvalidParameter("sweep lists must be non-empty".into()));
        }
        if self.speeds.iter().any(|v| !(*v > 0.0)) || self.speeds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("speeds must be positive and ascending".into()));
        }
        if self.temperatures.iter().any(|t| !(*t > 0.0)) || self.tunnel_couplings.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidParameter("temperatures and tunnel couplings must be positive".into()));
        }
        Ok(())
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityRecord {
    pub t_e: f64,
    pub temperature: f64,
    pub v: f64,
    pub dissipation: bool,
    pub final_populations: Vec<f64>,
    pub fidelity: f64,
    pub settled: bool,
    pub steps: u64,
    pub error: Option<String>,
}

/// Runs every (t_e, T, dissipation, v) point on `workers` threads; results
/// are ordered by grid index regardless of completion order.
pub fn run_sweep(spec: &SweepSpec, device: &DeviceOptions, opts: &SwitchOptions, store: &TableStore, n_omega: usize, workers: usize) -> Result<Vec<FidelityRecord>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    pool.install(|| {
        let contexts: Vec<SwitchContext> = spec
            .tunnel_couplings
            .iter()
            .map(|&t| SwitchContext::for_tunnel_coupling(spec.sector, t, device, store, n_omega))
            .collect::<Result<_>>()?;
        let mut grid = Vec::new();
        for (ci, &t_e) in spec.tunnel_couplings.iter().enumerate() {
            for &temp in &spec.temperatures {
                for &diss in spec.dissipation.flags() {
                    for &v in &spec.speeds {
                        grid.push((ci, t_e, temp, diss, v));
                    }
                }
            }
        }
        Ok(grid
            .par_iter()
            .map(|&(ci, t_e, temperature, dissipation, v)| match switch(&contexts[ci], temperature, v, dissipation, opts) {
                Ok(o) => FidelityRecord {
                    t_e,
                    temperature,
                    v,
                    dissipation,
                    fidelity: o.fidelity,
                    settled: o.settled,
                    steps: o.trajectory.stats.accepted,
                    final_populations: o.final_populations,
                    error: None,
                },
                Err(e) => FidelityRecord {
                    t_e,
                    temperature,
                    v,
                    dissipation,
                    final_populations: vec![],
                    fidelity: f64::NAN,
                    settled: false,
                    steps: 0,
                    error: Some(e.to_string()),
                },
            })
            .collect())
    })
}

/// Writes sweep records as CSV.
pub fn write_sweep_csv<W: std::io::Write>(records: &[FidelityRecord], dim: usize, mut w: W) -> std::io::Result<()> {
    let pops: Vec<String> = (0..dim).map(|i| format!("p_final_{i}")).collect();
    writeln!(w, "t_e_meV,T_K,v_Vps,dissipation,{},fidelity,settled,error", pops.join(","))?;
    for r in records {
        let p: Vec<String> = if r.final_populations.is_empty() {
            vec![String::new(); dim]
        } else {
            r.final_populations.iter().map(|x| format!("{x:.10e}")).collect()
        };
        let err = r.error.as_deref().unwrap_or("").replace('"', "'");
        writeln!(
            w,
            "{},{},{:.6e},{},{},{:.10e},{},\"{}\"",
            r.t_e, r.temperature, r.v, r.dissipation, p.join(","), r.fidelity, r.settled, err
        )?;
    }
    Ok(())
}

/// Diabatic passage probability exp(−2π t_e²/(ħ α)) for a detuning sweep rate α in meV/ps.
pub fn landau_zener_probability(t_e: f64, sweep_rate: f64) -> f64 {
    (-2.0 * std::f64::consts::PI * t_e * t_e / (HBAR * sweep_rate.abs())).exp()
}

/// Detuning sweep rate |d(e·d·F)/dt| at the crossing of the one-electron ramp, in meV/ps.
pub fn crossing_sweep_rate(device: &DeviceModel, v: f64) -> f64 {
    MEV_PER_V * device.d * v / device.d_i
}

/// Population-vs-speed curve for one tunnel coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct LzCurve {
    pub t_e: f64,
    /// (v, population), v ascending.
    pub points: Vec<(f64, f64)>,
}

/// Largest pairwise distance between curves after rescaling v → v/t_e²,
/// on a shared log grid over the common range (optionally clipped to `window`).
pub fn lz_collapse(curves: &[LzCurve], window: Option<(f64, f64)>) -> Result<f64> {
    if curves.len() < 2 {
        return Ok(0.0);
    }
    let scaled: Vec<Vec<(f64, f64)>> = curves
        .iter()
        .map(|c| c.points.iter().map(|&(v, p)| ((v / (c.t_e * c.t_e)).ln(), p)).collect())
        .collect();
    let mut lo = scaled.iter().map(|c| c.first().map_or(f64::INFINITY, |p| p.0)).fold(f64::NEG_INFINITY, f64::max);
    let mut hi = scaled.iter().map(|c| c.last().map_or(f64::NEG_INFINITY, |p| p.0)).fold(f64::INFINITY, f64::min);
    if let Some((a, b)) = window {
        lo = lo.max(a.ln());
        hi = hi.min(b.ln());
    }
    if !(hi > lo) {
        return Err(Error::InsufficientOverlap);
    }
    let n = 200;
    let interp = |c: &[(f64, f64)], x: f64| -> f64 {
        let i = c.partition_point(|p| p.0 < x).clamp(1, c.len() - 1);
        let (x0, y0) = c[i - 1];
        let (x1, y1) = c[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    };
    let mut worst: f64 = 0.0;
    for k in 0..=n {
        let x = lo + (hi - lo) * k as f64 / n as f64;
        let ys: Vec<f64> = scaled.iter().map(|c| interp(c, x)).collect();
        let spread = ys.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - ys.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        worst = worst.max(spread);
    }
    Ok(worst)
}

/// Outcome of the maximum-speed search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxSpeed {
    /// Fastest speed (V/ps) with fidelity ≥ target, or None when unreachable.
    pub v_max: Option<f64>,
    /// Coarse scan (v, fidelity).
    pub scan: Vec<(f64, f64)>,
    pub best_fidelity: f64,
}

/// Coarse scan over `speeds`, then bisection in log v on the fast-side
/// boundary of the region with fidelity ≥ `target`.
pub fn max_speed_for_fidelity(
    ctx: &SwitchContext,
    temperature: f64,
    target: f64,
    speeds: &[f64],
    opts: &SwitchOptions,
    bisection_steps: usize,
) -> Result<MaxSpeed> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter("target fidelity must lie in (0, 1)".into()));
    }
    if speeds.is_empty() || speeds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("speeds must be non-empty and ascending".into()));
    }
    let fid = |v: f64| switch(ctx, temperature, v, true, opts).map(|o| o.fidelity);
    let scan: Vec<(f64, f64)> = speeds.par_iter().map(|&v| fid(v).map(|f| (v, f))).collect::<Result<_>>()?;
    let best_fidelity = scan.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let Some(last_ok) = scan.iter().rposition(|p| p.1 >= target) else {
        return Ok(MaxSpeed { v_max: None, scan, best_fidelity });
    };
    if last_ok + 1 == scan.len() {
        return Ok(MaxSpeed { v_max: Some(scan[last_ok].0), scan, best_fidelity });
    }
    let (mut lo, mut hi) = (scan[last_ok].0.ln(), scan[last_ok + 1].0.ln());
    for _ in 0..bisection_steps {
        let mid = 0.5 * (lo + hi);
        if fid(mid.exp())? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MaxSpeed { v_max: Some(lo.exp()), scan, best_fidelity })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speed_grid_is_log_spaced() {
        let g = speed_grid(1e-4, 1.0, 25).unwrap();
        assert_eq!(g.len(), 101);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[100] - 1.0).abs() < 1e-12);
        assert!((g[25] - 1e-3).abs() < 1e-15);
        assert!(speed_grid(1.0, 0.1, 5).is_err());
    }

    #[test]
    fn single_curve_collapses_trivially() {
        let c = LzCurve { t_e: 0.5, points: vec![(0.1, 0.2), (1.0, 0.9)] };
        assert_eq!(lz_collapse(&[c], None).unwrap(), 0.0);
    }

    #[test]
    fn identical_rescaled_curves_collapse() {
        let f = |x: f64| (-1.0 / x).exp();
        let curves: Vec<LzCurve> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&t| LzCurve { t_e: t, points: (0..60).map(|i| 10f64.powf(-4.0 + i as f64 * 0.1)).map(|v| (v, f(v / (t * t)))).collect() })
            .collect();
        assert!(lz_collapse(&curves, None).unwrap() < 0.02);
        let far = vec![
            LzCurve { t_e: 1.0, points: vec![(1.0, 0.0), (2.0, 1.0)] },
            LzCurve { t_e: 1.0, points: vec![(5.0, 0.0), (6.0, 1.0)] },
        ];
        assert!(matches!(lz_collapse(&far, None), Err(Error::InsufficientOverlap)));
    }

    #[test]
    fn landau_zener_limits() {
        assert!((landau_zener_probability(0.5, 1e9) - 1.0).abs() < 1e-6);
        assert!(landau_zener_probability(0.5, 1e-3) < 1e-100);
    }
}
