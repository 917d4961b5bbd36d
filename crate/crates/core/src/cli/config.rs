//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::bifurcation::BifurcationOptions;
use crate::analysis::lyapunov::LyapunovOptions;
use crate::analysis::poincare::SectionRule;
use crate::dynamics::{check_sorted, default_initial_state, IntegratorConfig};
use crate::error::{Error, Result};
use crate::model::{FieldState, SystemParams};
use crate::spectrum::Conjugation;

/// Unit of every `η` value in a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
pub enum Units {
    /// Fractions of the dispersive rate `g_m`.
    #[default]
    #[serde(rename = "gm")]
    #[value(name = "gm")]
    GmRelative,
    /// Units of `ω_m`.
    #[serde(rename = "omega")]
    #[value(name = "omega")]
    OmegaRelative,
}

impl Units {
    /// Factor converting a configured `η` to units of `ω_m`.
    pub fn eta_scale(self, p: &SystemParams) -> f64 {
        match self {
            Units::GmRelative => p.g_m,
            Units::OmegaRelative => 1.0,
        }
    }
}

/// Grid given either explicitly or as an inclusive linear range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Linspace(Linspace),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn linspace(start: f64, stop: f64, points: usize) -> Self {
        Grid::Linspace(Linspace { start, stop, points })
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Values(v) => v.clone(),
            Grid::Linspace(l) if l.points == 1 => vec![l.start],
            Grid::Linspace(l) => (0..l.points)
                .map(|k| l.start + (l.stop - l.start) * k as f64 / (l.points - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadySection {
    /// Drive values for a continuation ramp; `params.alpha_in` if absent.
    pub alpha_grid: Option<Grid>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpScanSection {
    pub alpha_grid: Grid,
    pub conjugation: Conjugation,
    pub refine_tol: f64,
    /// Also integrate every grid point and locate the amplification onset.
    pub amplitude_scan: bool,
    /// Onset factor over the sub-threshold median of `max |x₁|`.
    pub threshold_factor: f64,
}

impl Default for EpScanSection {
    fn default() -> Self {
        Self {
            alpha_grid: Grid::linspace(1.0, 200.0, 200),
            conjugation: Conjugation::AsPrinted,
            refine_tol: 1e-10,
            amplitude_scan: false,
            threshold_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EigenSurfaceSection {
    pub alpha_grid: Grid,
    pub eta_grid: Grid,
}

impl Default for EigenSurfaceSection {
    fn default() -> Self {
        Self {
            alpha_grid: Grid::linspace(1.0, 200.0, 200),
            eta_grid: Grid::linspace(0.0, 1.0, 5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BifurcationSection {
    pub eta_grid: Grid,
    pub options: BifurcationOptions,
}

impl Default for BifurcationSection {
    fn default() -> Self {
        Self {
            eta_grid: Grid::linspace(0.0, 0.153, 60),
            options: BifurcationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoincareSection {
    pub rule: SectionRule,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovSection {
    pub options: LyapunovOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: SystemParams,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Initial state for time integration; rest plus a small kick if absent.
    #[serde(default)]
    pub initial_state: Option<FieldState>,
    #[serde(default)]
    pub steady: SteadySection,
    #[serde(default)]
    pub ep_scan: EpScanSection,
    #[serde(default)]
    pub eigen_surface: EigenSurfaceSection,
    #[serde(default)]
    pub bifurcation: BifurcationSection,
    #[serde(default)]
    pub poincare: PoincareSection,
    #[serde(default)]
    pub lyapunov: LyapunovSection,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integrator.validate()?;
        let grids = [
            ("steady.alpha_grid", self.steady.alpha_grid.as_ref()),
            ("ep_scan.alpha_grid", Some(&self.ep_scan.alpha_grid)),
            ("eigen_surface.alpha_grid", Some(&self.eigen_surface.alpha_grid)),
            ("eigen_surface.eta_grid", Some(&self.eigen_surface.eta_grid)),
            ("bifurcation.eta_grid", Some(&self.bifurcation.eta_grid)),
        ];
        for (name, grid) in grids {
            if let Some(g) = grid {
                if let Grid::Linspace(l) = g {
                    if l.points == 0 {
                        return Err(Error::Config(format!("{name}: points must be >= 1")));
                    }
                }
                check_sorted(&g.values(), name)?;
            }
        }
        if !(self.ep_scan.refine_tol > 0.0) || !(self.ep_scan.threshold_factor > 1.0) {
            return Err(Error::Config("ep_scan.refine_tol must be > 0 and threshold_factor > 1".into()));
        }
        if self.initial_state.is_some_and(|s| !s.is_finite()) {
            return Err(Error::Config("initial_state must be finite".into()));
        }
        Ok(())
    }

    /// Parameters with `η` converted to units of `ω_m`.
    pub fn resolved_params(&self) -> SystemParams {
        let mut p = self.params;
        p.eta *= self.units.eta_scale(&self.params);
        p
    }

    pub fn initial(&self) -> FieldState {
        self.initial_state.unwrap_or_else(default_initial_state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"params": {"delta": [1, -1], "g_m": 1.076e-4, "eta": 0.1, "kappa": 0.073,
        "gamma_m": 1.076e-5, "j_m": 4e-4, "alpha_in": 20}}"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.units, Units::GmRelative);
        assert_eq!(cfg.integrator, IntegratorConfig::default());
        assert!((cfg.resolved_params().eta - 1.076e-5).abs() < 1e-20);
        assert_eq!(cfg.bifurcation.eta_grid.values().len(), 60);
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        let top = MINIMAL.replacen('{', r#"{"extra": 1, "#, 1);
        let nested = MINIMAL.replace(r#""alpha_in": 20"#, r#""alpha_in": 20, "alpha": 3"#);
        let section = MINIMAL.replacen('{', r#"{"ep_scan": {"grid": [1, 2]}, "#, 1);
        for text in [top, nested, section] {
            let err = RunConfig::from_json(&text).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{err}");
            assert_eq!(err.exit_code(), 2);
        }
    }

    #[test]
    fn parse_errors_report_position() {
        let err = RunConfig::from_json("{\n \"params\": 3\n}").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn unsorted_grid_fails_validation() {
        let text = MINIMAL.replacen('{', r#"{"steady": {"alpha_grid": [3, 1, 2]}, "#, 1);
        assert!(matches!(RunConfig::from_json(&text), Err(Error::Config(_))));
    }

    #[test]
    fn grids_in_both_forms() {
        assert_eq!(Grid::linspace(0.0, 1.0, 3).values(), vec![0.0, 0.5, 1.0]);
        let g: Grid = serde_json::from_str("[1, 2.5]").unwrap();
        assert_eq!(g.values(), vec![1.0, 2.5]);
        let l: Grid = serde_json::from_str(r#"{"start": 1, "stop": 200, "points": 200}"#).unwrap();
        assert_eq!(l.values()[199], 200.0);
    }
}
