//! One- and two-electron charge Hamiltonians and electric-field schedules.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coulomb::CoulombElements;
use crate::error::{Error, Result};
use crate::phonons::MaterialParams;
use crate::units::MEV_PER_V;

/// Default size of the diode's intrinsic region in nm.
pub const DEFAULT_INTRINSIC_REGION_NM: f64 = 200.0;
/// Default detuning e·d·f_max at full field, in meV.
pub const DEFAULT_EDF_MAX_MEV: f64 = 10.0;

/// Charge sector of the dot molecule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sector {
    #[serde(rename = "1e")]
    OneElectron,
    #[serde(rename = "2e")]
    TwoElectronSinglet,
}

impl Sector {
    pub fn dim(self) -> usize {
        match self {
            Sector::OneElectron => 2,
            Sector::TwoElectronSinglet => 3,
        }
    }

    /// Labels of the fixed charge basis, in matrix order.
    pub fn basis_labels(self) -> &'static [&'static str] {
        match self {
            Sector::OneElectron => &["B", "T"],
            Sector::TwoElectronSinglet => &["BB", "BT", "TT"],
        }
    }

    /// Field schedule used by this sector's switching protocol.
    pub fn schedule_variant(self) -> ScheduleVariant {
        match self {
            Sector::OneElectron => ScheduleVariant::OneElectronInvert,
            Sector::TwoElectronSinglet => ScheduleVariant::TwoElectronToResonance,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sector::OneElectron => "1e",
            Sector::TwoElectronSinglet => "2e",
        }
    }
}

impl std::str::FromStr for Sector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1e" | "one" => Ok(Sector::OneElectron),
            "2e" | "two" => Ok(Sector::TwoElectronSinglet),
            _ => Err(Error::InvalidParameter(format!("unknown sector '{s}' (expected 1e or 2e)"))),
        }
    }
}

/// Device parameters entering the charge Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    /// Tunnel coupling in meV.
    pub t_e: f64,
    /// Inter-dot separation in nm (sets the Stark shift e·d·F).
    pub d: f64,
    /// Intrinsic region of the diode in nm (sets the speed convention).
    pub d_i: f64,
    pub coulomb: CoulombElements,
    pub material: MaterialParams,
}

impl DeviceModel {
    pub fn validate(&self) -> Result<()> {
        if self.t_e == 0.0 || !self.t_e.is_finite() {
            return Err(Error::InvalidParameter("t_e must be non-zero".into()));
        }
        if !(self.d > 0.0) || !(self.d_i > 0.0) {
            return Err(Error::InvalidParameter("d and d_i must be positive".into()));
        }
        Ok(())
    }

    /// Stark shift e·d·F in meV for a field in V/nm.
    pub fn stark(&self, field: f64) -> f64 {
        MEV_PER_V * self.d * field
    }

    /// Field (V/nm) producing a given detuning (meV).
    pub fn field_for_detuning(&self, detuning: f64) -> f64 {
        detuning / (MEV_PER_V * self.d)
    }

    pub fn hamiltonian(&self, sector: Sector, field: f64) -> DMatrix<f64> {
        match sector {
            Sector::OneElectron => h1e(self, field),
            Sector::TwoElectronSinglet => h2e(self, field),
        }
    }
}

/// H_1e = [[0, t_e], [t_e, e·d·F]] in the {B, T} basis.
pub fn h1e(device: &DeviceModel, field: f64) -> DMatrix<f64> {
    let t = device.t_e;
    DMatrix::from_row_slice(2, 2, &[0.0, t, t, device.stark(field)])
}

/// H_2e in the {BB;s, BT;s, TT;s} basis.
pub fn h2e(device: &DeviceModel, field: f64) -> DMatrix<f64> {
    let v = &device.coulomb;
    let edf = device.stark(field);
    let c = -std::f64::consts::SQRT_2 * device.t_e;
    DMatrix::from_row_slice(
        3,
        3,
        &[v.v_bb - edf, c, 0.0, c, v.v_bt, c, 0.0, c, v.v_tt + edf],
    )
}

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn eigh_sorted(h: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleVariant {
    /// F(t) = −f_max tanh(kt)
    OneElectronInvert,
    /// F(t) = f_max (tanh(kt) − 1)
    TwoElectronToResonance,
    /// F(t) = f_max for all t; f_max may take any sign here.
    Frozen,
}

/// tanh-shaped field ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSchedule {
    pub variant: ScheduleVariant,
    /// V/nm
    pub f_max: f64,
    /// 1/ps
    pub k: f64,
    pub t_start: f64,
    pub t_end: f64,
}

/// k·t at which the ramp starts and the nominal end; tanh(6.5) = 1 − 4.5e−6.
pub const SATURATION_KT: f64 = 6.5;

impl FieldSchedule {
    /// Ramp for a switching speed `v` (V/ps) with full-field detuning `edf_max` (meV).
    pub fn for_speed(variant: ScheduleVariant, device: &DeviceModel, v: f64, edf_max: f64) -> Result<Self> {
        if !(v > 0.0) || !(edf_max > 0.0) {
            return Err(Error::InvalidParameter("speed and e·d·f_max must be positive".into()));
        }
        let f_max = device.field_for_detuning(edf_max);
        let k = v / (device.d_i * f_max);
        let s = Self {
            variant,
            f_max,
            k,
            t_start: -SATURATION_KT / k,
            t_end: SATURATION_KT / k,
        };
        s.validate()?;
        Ok(s)
    }

    /// Constant field over [0, duration]; `k` only sets the integrator's step ceiling.
    pub fn frozen(field: f64, k: f64, duration: f64) -> Result<Self> {
        let s = Self { variant: ScheduleVariant::Frozen, f_max: field, k, t_start: 0.0, t_end: duration };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variant == ScheduleVariant::Frozen {
            if !(self.k > 0.0) || !self.f_max.is_finite() || !(self.t_end > self.t_start) {
                return Err(Error::InvalidParameter("frozen schedule needs k > 0, a finite field and t_end > t_start".into()));
            }
            return Ok(());
        }
        if !(self.k > 0.0) || !(self.f_max > 0.0) {
            return Err(Error::InvalidParameter("k and f_max must be positive".into()));
        }
        if (self.k * self.t_start).tanh().abs() < 1.0 - 1e-5 {
            return Err(Error::InvalidParameter("schedule must start saturated (|tanh(k t_start)| ≥ 1 − 1e−5)".into()));
        }
        if !(self.t_end > self.t_start) {
            return Err(Error::InvalidParameter("t_end must exceed t_start".into()));
        }
        Ok(())
    }

    pub fn field_at(&self, t: f64) -> f64 {
        let th = (self.k * t).tanh();
        match self.variant {
            ScheduleVariant::OneElectronInvert => -self.f_max * th,
            ScheduleVariant::TwoElectronToResonance => self.f_max * (th - 1.0),
            ScheduleVariant::Frozen => self.f_max,
        }
    }

    /// Limit of the field for t → ∞.
    pub fn final_field(&self) -> f64 {
        match self.variant {
            ScheduleVariant::OneElectronInvert => -self.f_max,
            ScheduleVariant::TwoElectronToResonance => 0.0,
            ScheduleVariant::Frozen => self.f_max,
        }
    }

    /// v = k · d_i · f_max in V/ps.
    pub fn switching_speed(&self, d_i: f64) -> f64 {
        switching_speed(self.k, d_i, self.f_max)
    }
}

/// v = k · d_i · f_max.
pub fn switching_speed(k: f64, d_i: f64, f_max: f64) -> f64 {
    k * d_i * f_max
}

/// One row of an energy-spectrum sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub field: f64,
    pub energies: Vec<f64>,
    /// weights[i][b] = |⟨b|Ψ_i⟩|² over the charge basis.
    pub weights: Vec<Vec<f64>>,
    /// Field-independent triplet energy V_BT (two-electron sector only).
    pub triplet: Option<f64>,
}

pub fn spectrum_sweep(device: &DeviceModel, sector: Sector, fields: &[f64]) -> Result<Vec<SpectrumRow>> {
    device.validate()?;
    if fields.iter().any(|f| !f.is_finite()) || fields.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("field grid must be finite and ascending".into()));
    }
    Ok(fields
        .iter()
        .map(|&field| {
            let (energies, vecs) = eigh_sorted(&device.hamiltonian(sector, field));
            let n = energies.len();
            let weights = (0..n).map(|i| (0..n).map(|b| vecs[(b, i)].powi(2)).collect()).collect();
            SpectrumRow {
                field,
                energies,
                weights,
                triplet: matches!(sector, Sector::TwoElectronSinglet).then_some(device.coulomb.v_bt),
            }
        })
        .collect())
}
