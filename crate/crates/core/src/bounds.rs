//! Sector bound suite: |I_j(k)| at pseudo-random points of |arg k| < π/4.
//!
//! Scalar functionals are checked against the closed-form right-hand side. The elastic
//! bounds carry an unspecified constant, so one C per functional is calibrated on a
//! battery of other sources at an independent set of points, frozen, and then applied.

use serde::{Deserialize, Serialize};

use crate::domain::{build_domain_with_mesh, Domain, Shape};
use crate::error::{invalid, Result};
use crate::functionals::{
    calibrate_constant, check_scalar_bound, compute_i_all, elastic_shape, sample_sector, BoundCheck, Functional, Physics,
};
use crate::experiment::ExperimentConfig;
use crate::sobolev::SourceNorms;
use crate::source::{rasterize_source, Bump, BumpKind, SourceDesc, SourcePair};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSuiteConfig {
    pub shape: Shape,
    pub physics: Physics,
    pub source: SourceDesc,
    /// Calibration sources for the elastic constants.
    #[serde(default)]
    pub battery: Vec<SourceDesc>,
    pub points: usize,
    /// Sector points per battery source.
    pub calibration_points: usize,
    pub k_max: f64,
    pub seed: u64,
    pub h: f64,
    pub mesh_spacing: f64,
    /// Gauss–Legendre nodes along the segment 0 → k.
    pub nodes: usize,
}

/// Bound-suite section of an experiment config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSettings {
    pub points: usize,
    pub calibration_points: usize,
    pub k_max: f64,
    /// Voxel size; the experiment's h when absent.
    pub h: Option<f64>,
    /// Mesh spacing; the experiment's mesh spacing (or 2h) when absent.
    pub mesh_spacing: Option<f64>,
    pub nodes: usize,
    /// Calibration sources; [`default_battery`] when empty.
    pub battery: Vec<SourceDesc>,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings { points: 100, calibration_points: 15, k_max: 4.0, h: None, mesh_spacing: None, nodes: 16, battery: vec![] }
    }
}

/// Four sources of mixed kind and width, for calibrating constants.
pub fn default_battery(physics: &Physics) -> Vec<SourceDesc> {
    let g = |c: [f64; 3], s: f64, k: BumpKind| Bump::gaussian(c, 1.0, s).with_kind(k);
    let elastic = matches!(physics, Physics::Elastic(_));
    let pick = |k: BumpKind| if elastic { k } else { BumpKind::Scalar };
    vec![
        SourceDesc { f0: vec![g([0.0, 0.05, 0.0], 0.12, pick(BumpKind::Gradient))], f1: vec![] },
        SourceDesc { f0: vec![], f1: vec![g([0.05, 0.0, 0.05], 0.12, pick(BumpKind::Curl { axis: [0.0, 0.0, 1.0] }))] },
        SourceDesc { f0: vec![g([0.0; 3], 0.18, pick(BumpKind::Vector { dir: [0.0, 0.0, 1.0] }))], f1: vec![] },
        SourceDesc { f0: vec![], f1: vec![g([0.05, 0.05, 0.0], 0.16, pick(BumpKind::Vector { dir: [0.0, 1.0, 0.0] }))] },
    ]
}

impl BoundSuiteConfig {
    pub fn from_experiment(cfg: &ExperimentConfig) -> Self {
        let b = &cfg.bounds;
        let h = b.h.unwrap_or(cfg.h);
        BoundSuiteConfig {
            shape: cfg.shape.clone(),
            physics: cfg.physics,
            source: cfg.source.clone(),
            battery: if b.battery.is_empty() { default_battery(&cfg.physics) } else { b.battery.clone() },
            points: b.points,
            calibration_points: b.calibration_points,
            k_max: b.k_max,
            seed: cfg.seed,
            h,
            mesh_spacing: b.mesh_spacing.or(cfg.mesh_spacing).unwrap_or(2.0 * h),
            nodes: b.nodes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSuiteReport {
    /// Frozen elastic constants for I₀, I₁, I₂.
    pub constants: Option<[f64; 3]>,
    pub checks: Vec<BoundCheck>,
    pub violations: usize,
    pub max_ratio: [f64; 3],
}

impl BoundSuiteReport {
    pub fn pass(&self) -> bool {
        self.violations == 0 && !self.checks.is_empty()
    }
}

const FUNCTIONALS: [Functional; 3] = [Functional::I0, Functional::I1, Functional::I2];

struct Prepared {
    src: SourcePair,
    norms: SourceNorms,
}

fn prepare(desc: &SourceDesc, domain: &Domain, physics: &Physics) -> Result<Prepared> {
    let src = rasterize_source(desc, domain, physics.arity())?;
    let norms = SourceNorms::compute(&src);
    Ok(Prepared { src, norms })
}

fn values(p: &Prepared, domain: &Domain, physics: &Physics, k: num_complex::Complex64, nodes: usize) -> Result<[f64; 3]> {
    Ok(compute_i_all(&p.src, &domain.mesh, physics, k, nodes, true)?.map(|v| v.norm()))
}

pub fn run_bound_suite(cfg: &BoundSuiteConfig) -> Result<BoundSuiteReport> {
    cfg.shape.validate()?;
    cfg.physics.validate()?;
    if cfg.points == 0 || !(cfg.k_max > 0.0) || cfg.nodes == 0 {
        return invalid("bound suite needs points, nodes and k_max > 0");
    }
    let domain = build_domain_with_mesh(&cfg.shape, cfg.h, cfg.mesh_spacing)?;
    let target = prepare(&cfg.source, &domain, &cfg.physics)?;
    let points = sample_sector(cfg.points, cfg.k_max, cfg.seed);

    let constants = match &cfg.physics {
        Physics::Scalar => None,
        Physics::Elastic(params) => {
            if cfg.battery.is_empty() || cfg.calibration_points == 0 {
                return invalid("elastic bounds need a calibration battery");
            }
            let cal_points = sample_sector(cfg.calibration_points, cfg.k_max, cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
            let mut pairs: [Vec<(f64, f64)>; 3] = Default::default();
            for desc in &cfg.battery {
                let p = prepare(desc, &domain, &cfg.physics)?;
                for sp in &cal_points {
                    let v = values(&p, &domain, &cfg.physics, sp.k, cfg.nodes)?;
                    for (j, f) in FUNCTIONALS.iter().enumerate() {
                        pairs[j].push((v[j], elastic_shape(*f, sp.k, &p.norms, params, &domain)?));
                    }
                }
            }
            Some([calibrate_constant(&pairs[0])?, calibrate_constant(&pairs[1])?, calibrate_constant(&pairs[2])?])
        }
    };

    let mut checks = Vec::with_capacity(3 * points.len());
    for sp in &points {
        let raw = compute_i_all(&target.src, &domain.mesh, &cfg.physics, sp.k, cfg.nodes, true)?;
        for (j, f) in FUNCTIONALS.iter().enumerate() {
            checks.push(match (&cfg.physics, constants) {
                (Physics::Elastic(params), Some(c)) => BoundCheck {
                    functional: *f,
                    k: sp.k,
                    value: raw[j].norm(),
                    bound: c[j] * elastic_shape(*f, sp.k, &target.norms, params, &domain)?,
                },
                _ => check_scalar_bound(*f, sp.k, raw[j], &target.norms, &domain)?,
            });
        }
    }
    let violations = checks.iter().filter(|c| !c.pass()).count();
    let mut max_ratio = [0.0f64; 3];
    for c in &checks {
        let j = c.functional.index();
        max_ratio[j] = max_ratio[j].max(c.ratio());
    }
    Ok(BoundSuiteReport { constants, checks, violations, max_ratio })
}
