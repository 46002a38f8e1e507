//! Configuration ingestion, subcommand dispatch, and result serialization.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::RowDVector;
use thiserror::Error;

use crate::analysis::{
    closed_loop_eigenvalues, compare_gains, published_gain_alternative, published_gain_primary,
    AnalysisError, CompareReport, StabilityReport,
};
use crate::lmi::{synthesize, SynthesisConfig, SynthesisError, SynthesisResult};
use crate::model::{build_coupled_system, Convention, MassSpringParams, ModelError, PwaSystem};
use crate::sdp::SolveStatus;
use crate::sim::{simulate, SimConfig, SimError, Trajectory};

/// Stable process exit codes: 0 success, 2 infeasible synthesis, 1 anything
/// else.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("config: {0}")]
    Config(String),
    #[error("gain: {0}")]
    Gain(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("io: {0}")]
    File(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Simulation settings without a gain; the gain comes from synthesis or from
/// a gain file.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub t_final: f64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub amplitude: f64,
    pub omega: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 50.0,
            x0: vec![1.0, 0.01, 0.01, 0.01],
            y0: vec![0.05, 0.0, 0.01, 1.0],
            amplitude: 1.5,
            omega: 1.5,
        }
    }
}

impl SimSettings {
    pub fn with_gain(&self, gain: Vec<f64>) -> SimConfig {
        SimConfig {
            dt: self.dt,
            t_final: self.t_final,
            x0: self.x0.clone(),
            y0: self.y0.clone(),
            amplitude: self.amplitude,
            omega: self.omega,
            gain,
        }
    }
}

/// Top-level run configuration. Missing keys fall back to the reference
/// scenario; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub params: MassSpringParams,
    pub convention: Convention,
    pub synthesis: SynthesisConfig,
    pub simulation: SimSettings,
}

impl RunConfig {
    pub fn build_system(&self) -> Result<PwaSystem, ModelError> {
        build_coupled_system(&self.params, self.convention)
    }
}

/// Parses and validates a JSON run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, IoError> {
    let cfg: RunConfig =
        serde_json::from_str(text).map_err(|e| IoError::Config(e.to_string()))?;
    cfg.params
        .validate()
        .map_err(|e| IoError::Config(e.to_string()))?;
    cfg.synthesis
        .validate()
        .map_err(|e| IoError::Config(e.to_string()))?;
    if !(cfg.simulation.dt > 0.0) || cfg.simulation.t_final <= cfg.simulation.dt {
        return Err(IoError::Config(format!(
            "simulation: dt must be positive and below t_final (dt = {}, t_final = {})",
            cfg.simulation.dt, cfg.simulation.t_final
        )));
    }
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, IoError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => parse_config(&fs::read_to_string(p)?),
    }
}

/// Reads a gain from an inline JSON array (`[-1.0, 2.0, ...]`), a JSON file
/// with a `gain` field, or a JSON file holding a bare array.
pub fn load_gain(spec: &str) -> Result<Vec<f64>, IoError> {
    let text = if spec.trim_start().starts_with('[') {
        spec.to_string()
    } else {
        fs::read_to_string(spec)?
    };
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| IoError::Gain(e.to_string()))?;
    let arr = match &value {
        serde_json::Value::Array(a) => a.clone(),
        serde_json::Value::Object(o) => o
            .get("gain")
            .and_then(|g| g.as_array())
            .cloned()
            .ok_or_else(|| IoError::Gain("expected a 'gain' array".into()))?,
        _ => return Err(IoError::Gain("expected an array or an object".into())),
    };
    arr.iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| IoError::Gain(format!("non-numeric gain entry: {v}")))
        })
        .collect()
}

/// Writes via a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), IoError> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Fixed CSV schema, one row per integration step. Numbers use shortest
/// round-trip rendering, so every double survives a reparse bit-exactly.
pub const CSV_HEADER: &str = "t,x1,x2,x3,x4,y1,y2,y3,y4,e_norm,u,v,mode_m,mode_s";

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for k in 0..traj.len() {
        let x = &traj.master[k];
        let y = &traj.slave[k];
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            traj.times[k],
            x[0],
            x[1],
            x[2],
            x[3],
            y[0],
            y[1],
            y[2],
            y[3],
            traj.errors[k].norm(),
            traj.drive[k],
            traj.control[k],
            traj.master_modes[k],
            traj.slave_modes[k],
        ));
    }
    out
}

/// gnuplot script plotting positions, velocities, error norm, and inputs
/// from a trajectory CSV, referenced by relative path.
pub fn plot_script(csv_name: &str) -> String {
    format!(
        "# gnuplot script; run from the directory containing the CSV\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set grid\n\
         set multiplot layout 2,2\n\
         set title 'positions'\n\
         plot '{csv}' using 1:2 with lines title 'x1', \\\n\
              '{csv}' using 1:6 with lines title 'y1', \\\n\
              '{csv}' using 1:4 with lines title 'x2', \\\n\
              '{csv}' using 1:8 with lines title 'y2'\n\
         set title 'velocities'\n\
         plot '{csv}' using 1:3 with lines title 'x1dot', \\\n\
              '{csv}' using 1:7 with lines title 'y1dot', \\\n\
              '{csv}' using 1:5 with lines title 'x2dot', \\\n\
              '{csv}' using 1:9 with lines title 'y2dot'\n\
         set title 'synchronization error norm'\n\
         set logscale y\n\
         plot '{csv}' using 1:10 with lines title '|e|'\n\
         unset logscale y\n\
         set title 'inputs'\n\
         plot '{csv}' using 1:11 with lines title 'u', \\\n\
              '{csv}' using 1:12 with lines title 'v'\n\
         unset multiplot\n\
         pause -1\n",
        csv = csv_name
    )
}

/// Serializable view of a stability report (eigenvalues as [re, im] pairs).
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct StabilityReportJson {
    pub mode_eigenvalues: Vec<Vec<[f64; 2]>>,
    pub max_real_part: f64,
    pub hurwitz: bool,
}

impl From<&StabilityReport> for StabilityReportJson {
    fn from(r: &StabilityReport) -> Self {
        Self {
            mode_eigenvalues: r
                .mode_eigenvalues
                .iter()
                .map(|mode| mode.iter().map(|e| [e.re, e.im]).collect())
                .collect(),
            max_real_part: r.max_real_part,
            hurwitz: r.hurwitz,
        }
    }
}

/// Everything a synthesis run produces, in one serializable record.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ResultBundle {
    pub status: SolveStatus,
    pub gain: Option<Vec<f64>>,
    pub multiplier_used: crate::lmi::MultiplierChoice,
    pub worst_margin: f64,
    pub certificate_margins: Vec<(String, f64)>,
    pub iterations: usize,
    pub stability: Option<StabilityReportJson>,
    pub convention: Convention,
    pub alpha1: f64,
    /// Files written by the producing command.
    pub files: Vec<String>,
}

pub fn result_bundle(
    sys: &PwaSystem,
    cfg: &RunConfig,
    result: &SynthesisResult,
    files: Vec<String>,
) -> Result<ResultBundle, IoError> {
    let stability = match &result.gain {
        Some(k) => Some(StabilityReportJson::from(&closed_loop_eigenvalues(sys, k)?)),
        None => None,
    };
    Ok(ResultBundle {
        status: result.status,
        gain: result.gain.as_ref().map(|k| k.iter().copied().collect()),
        multiplier_used: result.multiplier_used,
        worst_margin: result.worst_margin,
        certificate_margins: result.margins.clone(),
        iterations: result.iterations,
        stability,
        convention: cfg.convention,
        alpha1: cfg.synthesis.alpha1,
        files,
    })
}

fn plot_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("gp")
}

/// `synthesize --config c.json --out result.json`
pub fn cmd_synthesize(cfg: &RunConfig, out: &Path) -> Result<i32, IoError> {
    let sys = cfg.build_system()?;
    let result = synthesize(&sys, &cfg.synthesis)?;
    let bundle = result_bundle(&sys, cfg, &result, vec![out.display().to_string()])?;
    write_atomic(out, &serde_json::to_string_pretty(&bundle)?)?;
    Ok(if result.status == SolveStatus::Feasible {
        EXIT_OK
    } else {
        EXIT_INFEASIBLE
    })
}

/// `simulate --config c.json --gain g.json --out traj.csv`; also emits a
/// gnuplot script next to the CSV.
pub fn cmd_simulate(cfg: &RunConfig, gain: Vec<f64>, out: &Path) -> Result<i32, IoError> {
    let sys = cfg.build_system()?;
    let traj = simulate(&sys, &cfg.simulation.with_gain(gain))?;
    write_atomic(out, &trajectory_csv(&traj))?;
    let csv_name = out
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| out.display().to_string());
    write_atomic(&plot_path(out), &plot_script(&csv_name))?;
    if traj.diverged {
        eprintln!("warning: trajectory diverged and was truncated");
    }
    Ok(EXIT_OK)
}

/// `verify --config c.json --gain g.json`: prints a stability report.
pub fn cmd_verify(cfg: &RunConfig, gain: Vec<f64>) -> Result<i32, IoError> {
    let sys = cfg.build_system()?;
    let k = RowDVector::from_row_slice(&gain);
    let report = closed_loop_eigenvalues(&sys, &k)?;
    let json = StabilityReportJson::from(&report);
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(EXIT_OK)
}

/// `compare --config c.json [--gain-a a.json --gain-b b.json] --out r.json`.
/// Defaults to the two published gains.
pub fn cmd_compare(
    cfg: &RunConfig,
    gain_a: Option<Vec<f64>>,
    gain_b: Option<Vec<f64>>,
    out: &Path,
) -> Result<i32, IoError> {
    let sys = cfg.build_system()?;
    let a = gain_a.unwrap_or_else(published_gain_primary);
    let b = gain_b.unwrap_or_else(published_gain_alternative);
    let base = cfg.simulation.with_gain(vec![0.0; sys.n]);
    let report: CompareReport = compare_gains(&sys, &base, &a, &b, None)?;
    write_atomic(out, &serde_json::to_string_pretty(&report)?)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_reference_defaults() {
        let cfg = parse_config("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.params.m1, 100.0);
        assert_eq!(cfg.simulation.x0, vec![1.0, 0.01, 0.01, 0.01]);
        assert_eq!(cfg.simulation.amplitude, 1.5);
        assert_eq!(cfg.synthesis.alpha1, 1e-4);
        assert_eq!(cfg.convention, Convention::Physical);
    }

    #[test]
    fn rejects_negative_mass_and_unknown_keys() {
        let err = parse_config(r#"{"params": {"m1": -1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("m1 must be positive"), "{err}");
        let err = parse_config(r#"{"params": {"mass": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("mass"), "{err}");
        assert!(parse_config("{").is_err());
    }

    #[test]
    fn config_round_trip() {
        let text = r#"{"params": {"m1": 50.0, "d2": 0.02}, "convention": "paper",
                       "simulation": {"dt": 0.01, "t_final": 10.0}}"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.params.m1, 50.0);
        assert_eq!(cfg.params.m2, 1.0); // defaulted
        let reparsed = parse_config(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn gain_parsing() {
        assert_eq!(load_gain("[1.0, -2.5, 3, 4]").unwrap(), vec![1.0, -2.5, 3.0, 4.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("gain.json");
        fs::write(&p, r#"{"gain": [5, 6, 7, 8]}"#).unwrap();
        assert_eq!(load_gain(p.to_str().unwrap()).unwrap(), vec![5.0, 6.0, 7.0, 8.0]);
        assert!(load_gain(r#"{"nogain": 1}"#).is_err());
    }

    #[test]
    fn csv_round_trips_doubles() {
        let cfg = RunConfig::default();
        let sys = cfg.build_system().unwrap();
        let mut settings = cfg.simulation.clone();
        settings.t_final = 0.05;
        let traj = simulate(&sys, &settings.with_gain(vec![-17.0, -4.0, 7.8, -2.4])).unwrap();
        let csv = trajectory_csv(&traj);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        for (k, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 14);
            let x1: f64 = fields[1].parse().unwrap();
            assert_eq!(x1.to_bits(), traj.master[k][0].to_bits());
            let en: f64 = fields[9].parse().unwrap();
            assert_eq!(en.to_bits(), traj.errors[k].norm().to_bits());
        }
        assert_eq!(csv.lines().count(), traj.len() + 1);
    }

    #[test]
    fn simulate_command_writes_csv_and_plot_script() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("traj.csv");
        let mut cfg = RunConfig::default();
        cfg.simulation.t_final = 0.1;
        let code = cmd_simulate(&cfg, vec![0.0; 4], &out).unwrap();
        assert_eq!(code, EXIT_OK);
        assert!(out.exists());
        let script = fs::read_to_string(dir.path().join("traj.gp")).unwrap();
        assert!(script.contains("'traj.csv'"));
    }

    #[test]
    fn simulate_identical_ics_zero_error_column() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("traj.csv");
        let mut cfg = RunConfig::default();
        cfg.simulation.t_final = 0.5;
        cfg.simulation.y0 = cfg.simulation.x0.clone();
        cmd_simulate(&cfg, vec![-100.0, 3.0, 2.0, -1.0], &out).unwrap();
        let csv = fs::read_to_string(&out).unwrap();
        for line in csv.lines().skip(1) {
            let e_norm: f64 = line.split(',').nth(9).unwrap().parse().unwrap();
            assert!(e_norm <= 1e-12);
        }
    }

    #[test]
    fn compare_command_produces_report() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("report.json");
        let mut cfg = RunConfig::default();
        cfg.simulation.t_final = 5.0;
        cfg.simulation.dt = 2e-3;
        let code = cmd_compare(&cfg, None, None, &out).unwrap();
        assert_eq!(code, EXIT_OK);
        let report: CompareReport =
            serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(report.gain_a, published_gain_primary());
        assert_eq!(report.gain_b, published_gain_alternative());
    }
}
