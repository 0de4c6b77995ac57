//! Declarative run configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hamiltonians::{Sector, DEFAULT_EDF_MAX_MEV, DEFAULT_INTRINSIC_REGION_NM};
use crate::phonons::MaterialParams;
use crate::protocols::{DeviceOptions, DipoleLength, DissipationMode, ReadoutSpec, SweepSpec, SwitchOptions, speed_grid};
use crate::redfield::RedfieldOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    /// Intrinsic region in nm.
    pub d_i: f64,
    pub dipole_length: DipoleLength,
    /// e·d·f_max in meV.
    pub edf_max: f64,
    pub inversion_tolerance: f64,
}

impl Default for DeviceSection {
    fn default() -> Self {
        Self {
            d_i: DEFAULT_INTRINSIC_REGION_NM,
            dipole_length: DipoleLength::Reference,
            edf_max: DEFAULT_EDF_MAX_MEV,
            inversion_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathSection {
    /// K
    pub temperature: f64,
    pub pure_dephasing: bool,
    pub n_omega: usize,
}

impl Default for BathSection {
    fn default() -> Self {
        Self { temperature: 10.0, pure_dephasing: true, n_omega: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectraSection {
    pub sector: Sector,
    /// meV
    pub t_e: f64,
    /// Detuning range ±edf_range in meV, mapped to fields through d.
    pub edf_range: f64,
    pub n_points: usize,
}

impl Default for SpectraSection {
    fn default() -> Self {
        Self { sector: Sector::OneElectron, t_e: 0.5, edf_range: 10.0, n_points: 401 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralDensitySection {
    pub t_e: f64,
    /// meV
    pub energy_max: f64,
}

impl Default for SpectralDensitySection {
    fn default() -> Self {
        Self { t_e: 0.5, energy_max: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelationSection {
    /// nm
    pub barrier_widths: Vec<f64>,
    /// ps
    pub tau_max: f64,
    pub n_tau: usize,
    /// meV
    pub energy_max: f64,
}

impl Default for CorrelationSection {
    fn default() -> Self {
        Self { barrier_widths: vec![2.0, 4.0, 6.0, 8.0, 10.0], tau_max: 10.0, n_tau: 501, energy_max: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwitchSection {
    pub sector: Sector,
    pub t_e: f64,
    /// V/ps
    pub v: f64,
    pub dissipation: bool,
    pub n_samples: usize,
}

impl Default for SwitchSection {
    fn default() -> Self {
        Self { sector: Sector::OneElectron, t_e: 0.5, v: 0.02, dissipation: true, n_samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub sector: Sector,
    pub tunnel_couplings: Vec<f64>,
    pub temperatures: Vec<f64>,
    pub v_min: f64,
    pub v_max: f64,
    pub per_decade: usize,
    pub dissipation: DissipationMode,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            sector: Sector::OneElectron,
            tunnel_couplings: vec![0.5],
            temperatures: vec![10.0],
            v_min: 1e-4,
            v_max: 1.0,
            per_decade: 25,
            dissipation: DissipationMode::Both,
        }
    }
}

impl SweepSection {
    pub fn spec(&self) -> Result<SweepSpec> {
        let spec = SweepSpec {
            sector: self.sector,
            tunnel_couplings: self.tunnel_couplings.clone(),
            temperatures: self.temperatures.clone(),
            speeds: speed_grid(self.v_min, self.v_max, self.per_decade)?,
            dissipation: self.dissipation,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaxSpeedSection {
    pub sector: Sector,
    pub tunnel_couplings: Vec<f64>,
    pub target: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub per_decade: usize,
    pub bisection_steps: usize,
}

impl Default for MaxSpeedSection {
    fn default() -> Self {
        Self {
            sector: Sector::TwoElectronSinglet,
            tunnel_couplings: vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            target: 0.99,
            v_min: 1e-4,
            v_max: 1.0,
            per_decade: 5,
            bisection_steps: 8,
        }
    }
}

/// Complete configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    /// Spectral-table cache directory; none disables caching.
    pub cache_dir: Option<PathBuf>,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub material: MaterialParams,
    pub device: DeviceSection,
    pub bath: BathSection,
    pub integrator: RedfieldOptions,
    pub readout: ReadoutSpec,
    pub spectra: SpectraSection,
    pub spectral_density: SpectralDensitySection,
    pub correlation: CorrelationSection,
    pub switch: SwitchSection,
    pub sweep: SweepSection,
    pub max_speed: MaxSpeedSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            cache_dir: None,
            workers: 0,
            material: MaterialParams::default(),
            device: DeviceSection::default(),
            bath: BathSection::default(),
            integrator: RedfieldOptions::default(),
            readout: ReadoutSpec::default(),
            spectra: SpectraSection::default(),
            spectral_density: SpectralDensitySection::default(),
            correlation: CorrelationSection::default(),
            switch: SwitchSection::default(),
            sweep: SweepSection::default(),
            max_speed: MaxSpeedSection::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite (got {v})")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn device_options(&self) -> DeviceOptions {
        DeviceOptions {
            material: self.material,
            d_i: self.device.d_i,
            dipole_length: self.device.dipole_length,
            edf_max: self.device.edf_max,
            inversion_tolerance: self.device.inversion_tolerance,
        }
    }

    pub fn switch_options(&self, n_samples: usize) -> SwitchOptions {
        SwitchOptions { redfield: self.integrator, readout: self.readout, pure_dephasing: self.bath.pure_dephasing, n_samples }
    }

    /// Worker count with 0 resolved to the available parallelism.
    pub fn resolved_workers(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        wrap(self.device_options().validate())?;
        wrap(self.integrator.validate())?;
        positive("bath.temperature", self.bath.temperature)?;
        if self.bath.n_omega < 16 {
            return Err(Error::Config("bath.n_omega must be at least 16".into()));
        }
        positive("readout.drift_tolerance", self.readout.drift_tolerance)?;
        positive("spectra.t_e", self.spectra.t_e)?;
        positive("spectra.edf_range", self.spectra.edf_range)?;
        if self.spectra.n_points < 2 {
            return Err(Error::Config("spectra.n_points must be at least 2".into()));
        }
        positive("spectral_density.t_e", self.spectral_density.t_e)?;
        positive("spectral_density.energy_max", self.spectral_density.energy_max)?;
        positive("correlation.tau_max", self.correlation.tau_max)?;
        positive("correlation.energy_max", self.correlation.energy_max)?;
        if self.correlation.n_tau < 2 || self.correlation.barrier_widths.is_empty() {
            return Err(Error::Config("correlation needs n_tau ≥ 2 and at least one barrier width".into()));
        }
        for &w in &self.correlation.barrier_widths {
            positive("correlation.barrier_widths", w)?;
        }
        positive("switch.t_e", self.switch.t_e)?;
        positive("switch.v", self.switch.v)?;
        wrap(self.sweep.spec().map(|_| ()))?;
        let ms = &self.max_speed;
        if !(ms.target > 0.0 && ms.target < 1.0) {
            return Err(Error::Config("max_speed.target must lie in (0, 1)".into()));
        }
        if ms.tunnel_couplings.is_empty() {
            return Err(Error::Config("max_speed.tunnel_couplings must be non-empty".into()));
        }
        for &t in &ms.tunnel_couplings {
            positive("max_speed.tunnel_couplings", t)?;
        }
        wrap(speed_grid(ms.v_min, ms.v_max, ms.per_decade).map(|_| ()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml("[material]\nmass = 1.0"), Err(Error::Config(_))));
    }

    #[test]
    fn partial_files_fill_defaults() {
        let c = RunConfig::from_toml("[bath]\ntemperature = 4.0\n[device]\ndipole_length = { fixed = 11.0 }\n").unwrap();
        assert_eq!(c.bath.temperature, 4.0);
        assert_eq!(c.device.dipole_length, DipoleLength::Fixed(11.0));
        assert_eq!(c.material, MaterialParams::default());
    }

    #[test]
    fn out_of_range_values_fail() {
        assert!(RunConfig::from_toml("[bath]\ntemperature = -1.0").is_err());
        assert!(RunConfig::from_toml("[material]\nc_l = 0.0").is_err());
        assert!(RunConfig::from_toml("[max_speed]\ntarget = 1.5").is_err());
    }
}
