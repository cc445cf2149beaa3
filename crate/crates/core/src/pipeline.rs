//! Integrate, convert to polar form, measure and fit in one call.

use serde::{Deserialize, Serialize};

use crate::boxdim::{build_profile_with, fit_dimension_with, DimensionReport, FitModel, Method,
    SausageProfile, WindowPolicy, DEFAULT_GRID_FACTOR};
use crate::error::Result;
use crate::ode_sim::{integrate, Sample, SystemSpec, Tolerances, Trajectory, DEFAULT_MAX_ANGLE_STEP};
use crate::polar_curve::{to_polar, PolarCurve};

/// Smallest ε the default ladder goes down to.
pub const EPS_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub t_end: f64,
    /// Starting state; `(1, 0)` at the start of the domain when absent.
    pub init: Option<Sample>,
    pub tolerances: Tolerances,
    pub eps_max: f64,
    /// Smallest ε; `max(2 r(t_end), EPS_FLOOR)` when absent.
    pub eps_min: Option<f64>,
    pub method: Method,
    pub model: FitModel,
    pub policy: WindowPolicy,
    pub grid_factor: f64,
    pub mirror: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            t_end: 1e5,
            init: None,
            tolerances: Tolerances::default(),
            eps_max: 0.1,
            eps_min: None,
            method: Method::SausageGrid,
            model: FitModel::HeadCorrected,
            policy: WindowPolicy::AutoPlateau,
            grid_factor: DEFAULT_GRID_FACTOR,
            mirror: true,
        }
    }
}

impl AnalysisConfig {
    pub fn initial_state(&self, sys: &SystemSpec) -> Sample {
        self.init.unwrap_or(Sample {
            t: sys.domain_start(),
            x: 1.0,
            y: 0.0,
        })
    }

    pub fn resolved_eps_min(&self, traj: &Trajectory) -> f64 {
        self.eps_min.unwrap_or_else(|| (2.0 * traj.final_radius()).max(EPS_FLOOR))
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub trajectory: Trajectory,
    pub curve: PolarCurve,
    pub profile: SausageProfile,
    pub report: DimensionReport,
}

pub fn simulate(sys: &SystemSpec, cfg: &AnalysisConfig) -> Result<Trajectory> {
    integrate(sys, cfg.initial_state(sys), cfg.t_end, cfg.tolerances, DEFAULT_MAX_ANGLE_STEP)
}

/// Profile and dimension estimate of an already integrated trajectory.
pub fn analyze_trajectory(trajectory: Trajectory, cfg: &AnalysisConfig) -> Result<Analysis> {
    let curve = to_polar(&trajectory, cfg.mirror)?;
    let eps_min = cfg.resolved_eps_min(&trajectory);
    let profile = build_profile_with(&curve, cfg.eps_max, eps_min, cfg.method, cfg.grid_factor)?;
    let report = fit_dimension_with(&profile, cfg.policy, cfg.model)?;
    Ok(Analysis {
        trajectory,
        curve,
        profile,
        report,
    })
}

pub fn analyze_system(sys: &SystemSpec, cfg: &AnalysisConfig) -> Result<Analysis> {
    analyze_trajectory(simulate(sys, cfg)?, cfg)
}
