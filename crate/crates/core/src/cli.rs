//! Command line front end.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::cache::TableStore;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::hamiltonians::{spectrum_sweep, Sector};
use crate::phonons::{correlation_function, spectral_density_tables, Channel, SpectralTables, TableOptions};
use crate::protocols::{max_speed_for_fidelity, run_sweep, speed_grid, switch, write_sweep_csv, DipoleLength, DissipationMode, SwitchContext};
use crate::redfield::{build_transitions, occupation_transition_matrices, EigenFrame};
use crate::units::{omega_to_mev, COULOMB_MEV_NM};
use crate::wavefunctions::AxialBasis;

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "QDMSIM_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "qdmsim", version, about = "Charge dynamics of electric-field-switched quantum-dot molecules")]
pub struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output_dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (overrides workers).
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    /// Spectral-table cache directory (overrides cache_dir).
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy levels versus electric field.
    Spectra(SpectraArgs),
    /// Branch-resolved phonon spectral density of the 1e transition at F = 0.
    SpectralDensity(TeArg),
    /// Bath correlation function for a list of barrier widths.
    Correlation(TempArg),
    /// A single switching trajectory.
    Switch(SwitchArgs),
    /// Final populations over a grid of speeds.
    Sweep(SweepArgs),
    /// Fastest switching speed reaching a target fidelity.
    MaxSpeed(MaxSpeedArgs),
    /// Parse, validate and echo the resolved configuration.
    ValidateConfig,
}

#[derive(Debug, Args)]
pub struct TeArg {
    /// Tunnel coupling in meV.
    #[arg(long)]
    pub te: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TempArg {
    /// Temperature in K.
    #[arg(long = "T")]
    pub temperature: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[arg(long)]
    pub sector: Option<Sector>,
    #[arg(long)]
    pub te: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SwitchArgs {
    #[arg(long)]
    pub sector: Option<Sector>,
    #[arg(long)]
    pub te: Option<f64>,
    #[arg(long = "T")]
    pub temperature: Option<f64>,
    /// Switching speed in V/ps.
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub no_dissipation: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub sector: Option<Sector>,
    /// Comma-separated tunnel couplings in meV.
    #[arg(long, value_delimiter = ',')]
    pub te: Option<Vec<f64>>,
    /// Comma-separated temperatures in K.
    #[arg(long = "T", value_delimiter = ',')]
    pub temperatures: Option<Vec<f64>>,
    #[arg(long, value_parser = parse_dissipation)]
    pub dissipation: Option<DissipationMode>,
}

#[derive(Debug, Args)]
pub struct MaxSpeedArgs {
    #[arg(long, value_delimiter = ',')]
    pub te: Option<Vec<f64>>,
    #[arg(long = "T")]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub target: Option<f64>,
}

fn parse_dissipation(s: &str) -> std::result::Result<DissipationMode, String> {
    match s {
        "on" => Ok(DissipationMode::On),
        "off" => Ok(DissipationMode::Off),
        "both" => Ok(DissipationMode::Both),
        _ => Err(format!("expected on, off or both, got '{s}'")),
    }
}

/// Runs the tool and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let payload = json!({ "error": e.kind(), "message": e.to_string(), "exit_code": e.exit_code() });
            eprintln!("{payload}");
            e.exit_code()
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(c) = &cli.cache {
        cfg.cache_dir = Some(c.clone());
    }
    match &cli.command {
        Command::Spectra(a) => {
            set(&mut cfg.spectra.sector, a.sector);
            set(&mut cfg.spectra.t_e, a.te);
        }
        Command::SpectralDensity(a) => set(&mut cfg.spectral_density.t_e, a.te),
        Command::Correlation(a) => set(&mut cfg.bath.temperature, a.temperature),
        Command::Switch(a) => {
            set(&mut cfg.switch.sector, a.sector);
            set(&mut cfg.switch.t_e, a.te);
            set(&mut cfg.bath.temperature, a.temperature);
            set(&mut cfg.switch.v, a.v);
            if a.no_dissipation {
                cfg.switch.dissipation = false;
            }
        }
        Command::Sweep(a) => {
            set(&mut cfg.sweep.sector, a.sector);
            set(&mut cfg.sweep.tunnel_couplings, a.te.clone());
            set(&mut cfg.sweep.temperatures, a.temperatures.clone());
            set(&mut cfg.sweep.dissipation, a.dissipation);
        }
        Command::MaxSpeed(a) => {
            set(&mut cfg.max_speed.tunnel_couplings, a.te.clone());
            set(&mut cfg.bath.temperature, a.temperature);
            set(&mut cfg.max_speed.target, a.target);
        }
        Command::ValidateConfig => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: vec![] })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn finish(self, command: &str, cfg: &RunConfig, started: Instant, summary: Value) -> Result<()> {
        let meta = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config_hash": cfg.hash(),
            "wall_time_s": started.elapsed().as_secs_f64(),
            "outputs": self.files,
            "summary": summary,
            "config": serde_json::to_value(cfg).expect("configuration serializes"),
        });
        let path = self.dir.join(format!("{command}.json"));
        fs::write(path, serde_json::to_string_pretty(&meta).expect("json serializes"))?;
        Ok(())
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let started = Instant::now();
    let store = TableStore::new(cfg.cache_dir.clone());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.resolved_workers())
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::ValidateConfig => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::Spectra(_) => spectra(&cfg, started),
        Command::SpectralDensity(_) => spectral_density(&cfg, started),
        Command::Correlation(_) => correlation(&cfg, started),
        Command::Switch(_) => run_switch(&cfg, &store, started),
        Command::Sweep(_) => sweep(&cfg, &store, started),
        Command::MaxSpeed(_) => max_speed(&cfg, &store, started),
    })
}

fn spectra(cfg: &RunConfig, started: Instant) -> Result<()> {
    let s = &cfg.spectra;
    let opts = cfg.device_options();
    let basis = opts.basis_for_tunnel_coupling(s.t_e)?;
    let device = opts.device_for(&basis)?;
    let n = s.n_points;
    let fields: Vec<f64> = (0..n)
        .map(|i| device.field_for_detuning(-s.edf_range + 2.0 * s.edf_range * i as f64 / (n - 1) as f64))
        .collect();
    let rows = spectrum_sweep(&device, s.sector, &fields)?;
    let mut out = Output::new(&cfg.output_dir)?;
    let mut w = out.create("spectra.csv")?;
    let dim = s.sector.dim();
    let labels = s.sector.basis_labels();
    let mut header = vec!["F_Vnm".to_string(), "edF_meV".to_string()];
    header.extend((0..dim).map(|i| format!("E{i}_meV")));
    for i in 0..dim {
        header.extend(labels.iter().map(|l| format!("w{i}_{l}")));
    }
    if s.sector == Sector::TwoElectronSinglet {
        header.push("triplet_meV".into());
    }
    writeln!(w, "{}", header.join(","))?;
    for r in &rows {
        let mut cells = vec![format!("{:.10e}", r.field), format!("{:.10e}", device.stark(r.field))];
        cells.extend(r.energies.iter().map(|e| format!("{e:.10e}")));
        for wi in &r.weights {
            cells.extend(wi.iter().map(|x| format!("{x:.10e}")));
        }
        if let Some(t) = r.triplet {
            cells.push(format!("{t:.10e}"));
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    let summary = json!({
        "t_e_meV": device.t_e,
        "barrier_width_nm": basis.potential.barrier_width,
        "dipole_length_nm": device.d,
        "coulomb_meV": { "V_BB": device.coulomb.v_bb, "V_BT": device.coulomb.v_bt, "V_TT": device.coulomb.v_tt },
    });
    out.finish("spectra", cfg, started, summary)
}

/// J(ω) of the Ψ₁ → Ψ₀ one-electron transition at zero field, per channel.
fn transition_density(tables: &SpectralTables, t_e: f64) -> Vec<[f64; 4]> {
    let h = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, t_e, t_e, 0.0]);
    let frame = EigenFrame::new(0.0, &h, None);
    let set = build_transitions(&frame, &occupation_transition_matrices(Sector::OneElectron));
    let m = set.channels.iter().find(|c| c.i == 1 && c.j == 0).expect("two-level frame").m;
    (0..tables.omega.len())
        .map(|k| {
            std::array::from_fn(|s| {
                let i = &tables.channels[s][k];
                let mut acc = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        acc += m[a] * m[b] * i[(a, b)].re;
                    }
                }
                acc
            })
        })
        .collect()
}

fn spectral_density(cfg: &RunConfig, started: Instant) -> Result<()> {
    let s = &cfg.spectral_density;
    let opts = cfg.device_options();
    let basis = opts.basis_for_tunnel_coupling(s.t_e)?;
    let tables = spectral_density_tables(
        &basis,
        &cfg.material,
        TableOptions { energy_max: s.energy_max, n_omega: cfg.bath.n_omega, ..Default::default() },
    )?;
    let j = transition_density(&tables, basis.t_e.abs());
    let mut out = Output::new(&cfg.output_dir)?;
    let mut w = out.create("spectral_density.csv")?;
    let names: Vec<&str> = Channel::ALL.iter().map(|c| c.label()).collect();
    writeln!(w, "omega_meV,I_{},I_{},I_{},I_{},total", names[0], names[1], names[2], names[3])?;
    let mut peak = (0.0, 0.0);
    for (k, row) in j.iter().enumerate() {
        let total: f64 = row.iter().sum();
        if total > peak.1 {
            peak = (omega_to_mev(tables.omega[k]), total);
        }
        writeln!(
            w,
            "{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            omega_to_mev(tables.omega[k]),
            row[0],
            row[1],
            row[2],
            row[3],
            total
        )?;
    }
    w.flush()?;
    let summary = json!({ "t_e_meV": basis.t_e.abs(), "barrier_width_nm": basis.potential.barrier_width, "peak_meV": peak.0, "peak_per_ps": peak.1 });
    out.finish("spectral-density", cfg, started, summary)
}

fn correlation(cfg: &RunConfig, started: Instant) -> Result<()> {
    let c = &cfg.correlation;
    let mut opts = cfg.device_options();
    opts.dipole_length = DipoleLength::Geometric;
    let taus: Vec<f64> = (0..c.n_tau).map(|i| c.tau_max * i as f64 / (c.n_tau - 1) as f64).collect();
    let mut out = Output::new(&cfg.output_dir)?;
    let mut wc = out.create("correlation.csv")?;
    let mut wg = out.create("geometry.csv")?;
    writeln!(wc, "w_nm,tau_ps,reC,imC,abs2C")?;
    writeln!(wg, "w_nm,d_nm,t_e_meV,V_BB_meV,V_BT_meV,V_TT_meV,V_point_meV")?;
    let mut decay = Vec::new();
    for &wb in &c.barrier_widths {
        let basis: AxialBasis = opts.basis_for_barrier_width(wb)?;
        let device = opts.device_for(&basis)?;
        let tables = spectral_density_tables(
            &basis,
            &cfg.material,
            TableOptions { energy_max: c.energy_max, n_omega: cfg.bath.n_omega, ..Default::default() },
        )?;
        let j: Vec<f64> = transition_density(&tables, device.t_e).iter().map(|r| r.iter().sum()).collect();
        let cs = correlation_function(&tables.omega, &j, cfg.bath.temperature, &taus);
        let c0 = cs[0].norm_sqr();
        let mut t_1pct = None;
        for (tau, z) in taus.iter().zip(&cs) {
            writeln!(wc, "{wb},{tau:.6e},{:.10e},{:.10e},{:.10e}", z.re, z.im, z.norm_sqr())?;
            if t_1pct.is_none() && z.norm_sqr() < 0.01 * c0 {
                t_1pct = Some(*tau);
            }
        }
        let d = basis.dot_separation();
        let point = COULOMB_MEV_NM / (cfg.material.eps_r * d);
        let v = &device.coulomb;
        writeln!(wg, "{wb},{d:.6},{:.10e},{:.10e},{:.10e},{:.10e},{point:.10e}", device.t_e, v.v_bb, v.v_bt, v.v_tt)?;
        decay.push(json!({ "w_nm": wb, "tau_1pct_ps": t_1pct }));
    }
    wc.flush()?;
    wg.flush()?;
    out.finish("correlation", cfg, started, json!({ "temperature_K": cfg.bath.temperature, "decay": decay }))
}

fn run_switch(cfg: &RunConfig, store: &TableStore, started: Instant) -> Result<()> {
    let s = &cfg.switch;
    let ctx = SwitchContext::for_tunnel_coupling(s.sector, s.t_e, &cfg.device_options(), store, cfg.bath.n_omega)?;
    let o = switch(&ctx, cfg.bath.temperature, s.v, s.dissipation, &cfg.switch_options(s.n_samples))?;
    let mut out = Output::new(&cfg.output_dir)?;
    let mut w = out.create("trajectory.csv")?;
    o.trajectory.write_csv(&mut w)?;
    w.flush()?;
    let st = o.trajectory.stats;
    let summary = json!({
        "sector": s.sector.label(),
        "t_e_meV": ctx.device.t_e,
        "temperature_K": cfg.bath.temperature,
        "v_Vps": s.v,
        "dissipation": s.dissipation,
        "final_populations": o.final_populations,
        "fidelity": o.fidelity,
        "settled": o.settled,
        "t_final_ps": o.t_final,
        "steps_accepted": st.accepted,
        "steps_rejected": st.rejected,
        "min_eigenvalue": st.min_eig,
        "max_trace_error": st.max_trace_err,
    });
    out.finish("switch", cfg, started, summary)
}

fn sweep(cfg: &RunConfig, store: &TableStore, started: Instant) -> Result<()> {
    let spec = cfg.sweep.spec()?;
    let records = run_sweep(&spec, &cfg.device_options(), &cfg.switch_options(0), store, cfg.bath.n_omega, cfg.resolved_workers())?;
    let mut out = Output::new(&cfg.output_dir)?;
    let mut w = out.create("sweep.csv")?;
    write_sweep_csv(&records, spec.sector.dim(), &mut w)?;
    w.flush()?;
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let unsettled = records.iter().filter(|r| r.error.is_none() && !r.settled).count();
    out.finish("sweep", cfg, started, json!({ "points": records.len(), "failed": failed, "unsettled": unsettled }))
}

fn max_speed(cfg: &RunConfig, store: &TableStore, started: Instant) -> Result<()> {
    let m = &cfg.max_speed;
    let speeds = speed_grid(m.v_min, m.v_max, m.per_decade)?;
    let opts = cfg.switch_options(0);
    let mut out = Output::new(&cfg.output_dir)?;
    let mut w = out.create("max_speed.csv")?;
    let mut ws = out.create("max_speed_scan.csv")?;
    writeln!(w, "t_e_meV,T_K,target,v_max_Vps,reachable,best_fidelity")?;
    writeln!(ws, "t_e_meV,v_Vps,fidelity")?;
    let mut results = Vec::new();
    for &t_e in &m.tunnel_couplings {
        let ctx = SwitchContext::for_tunnel_coupling(m.sector, t_e, &cfg.device_options(), store, cfg.bath.n_omega)?;
        let r = max_speed_for_fidelity(&ctx, cfg.bath.temperature, m.target, &speeds, &opts, m.bisection_steps)?;
        let v = r.v_max.map_or(String::new(), |v| format!("{v:.6e}"));
        writeln!(w, "{t_e},{},{},{v},{},{:.10e}", cfg.bath.temperature, m.target, r.v_max.is_some(), r.best_fidelity)?;
        for (v, f) in &r.scan {
            writeln!(ws, "{t_e},{v:.6e},{f:.10e}")?;
        }
        results.push(json!({ "t_e_meV": t_e, "v_max_Vps": r.v_max, "best_fidelity": r.best_fidelity }));
    }
    w.flush()?;
    ws.flush()?;
    out.finish("max-speed", cfg, started, json!({ "results": results }))
}
