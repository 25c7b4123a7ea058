//! End-to-end reconstruction experiments: forward sweep, noise, band truncation,
//! synthesis, backward solve and error accounting over a ladder of K.

use std::time::Instant;

use log::info;
use rayon::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::BoundSettings;
use crate::domain::{build_domain_with_mesh, Domain, Shape};
use crate::elastic::forward_sweep_elastic;
use crate::error::{invalid, Error, Result};
use crate::geom;
use crate::fdtd::{cfl_dt, fdtd_backward, BackwardOptions, BoundaryCoupling};
use crate::functionals::{calibrate_constant, stability_ceiling, truncation_k, DataNorms, Physics};
use crate::helmholtz::forward_sweep;
use crate::sobolev::{sobolev_norms_sq, SourceNorms};
use crate::source::{rasterize_source, SourceDesc, SourcePair};
use crate::sweep::{FrequencyGrid, FrequencySweep, C64};
use crate::synthesis::{synthesize_with, Cutoff, TimeTrace};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_true() -> bool {
    true
}

fn default_coupling() -> BoundaryCoupling {
    BoundaryCoupling::Ghost
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub shape: Shape,
    pub source: SourceDesc,
    pub physics: Physics,
    /// Largest stored frequency.
    pub omega_max: f64,
    /// Frequency spacing; π/T_total with T_total = 4D/c_min when absent.
    #[serde(default)]
    pub d_omega: Option<f64>,
    /// Band limits K, ascending.
    pub k_ladder: Vec<f64>,
    /// Target ε of the injected noise on each band (0, K).
    pub noise: f64,
    /// Reconstruction grid spacing.
    pub h: f64,
    /// Boundary mesh spacing; 2h when absent.
    #[serde(default)]
    pub mesh_spacing: Option<f64>,
    /// Voxel size of the source quadrature in the forward sweep; h when absent.
    #[serde(default)]
    pub source_h: Option<f64>,
    pub seed: u64,
    #[serde(default = "default_coupling")]
    pub coupling: BoundaryCoupling,
    /// Scale the source so the signal ε over (0, K_max) is 1.
    #[serde(default = "default_true")]
    pub normalize_signal: bool,
    /// Extra time beyond D/c_min for the backward start.
    #[serde(default)]
    pub t_margin: f64,
    /// Other sources run through the same ladder to calibrate the ceiling constant.
    #[serde(default)]
    pub calibration: Vec<SourceDesc>,
    /// Noise seeds for the main source, also used for calibration.
    #[serde(default)]
    pub calibration_seeds: Vec<u64>,
    #[serde(default)]
    pub record_wall_time: bool,
    /// Correlation length of the noise along ∂Ω; 0 gives independent values per node.
    #[serde(default)]
    pub noise_correlation: f64,
    /// Sector bound-suite settings.
    #[serde(default)]
    pub bounds: BoundSettings,
}

impl ExperimentConfig {
    /// Unit ball, Gaussian f₀, K ∈ {2, 4, 8, 16, 32}/D.
    pub fn example(physics: Physics) -> Self {
        use crate::source::{Bump, BumpKind};
        let shape = Shape::unit_ball();
        let d = shape.diameter();
        let f0 = match physics {
            Physics::Scalar => vec![Bump::gaussian([0.05, 0.0, 0.0], 1.0, 0.2)],
            Physics::Elastic(_) => vec![
                Bump::gaussian([0.05, 0.0, 0.0], 1.0, 0.2).with_kind(BumpKind::Gradient),
                Bump::gaussian([-0.05, 0.05, 0.0], 1.0, 0.2).with_kind(BumpKind::Curl { axis: [0.0, 0.0, 1.0] }),
            ],
        };
        ExperimentConfig {
            shape,
            source: SourceDesc { f0, f1: vec![] },
            physics,
            omega_max: 32.0 / d,
            d_omega: Some(0.25),
            k_ladder: [2.0, 4.0, 8.0, 16.0, 32.0].iter().map(|k| k / d).collect(),
            noise: 1e-2,
            h: 1.0 / 24.0,
            mesh_spacing: None,
            source_h: None,
            seed: 7,
            coupling: BoundaryCoupling::Ghost,
            normalize_signal: true,
            t_margin: 0.2,
            calibration: vec![],
            calibration_seeds: vec![],
            record_wall_time: false,
            noise_correlation: 0.25 * d,
            bounds: BoundSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        self.physics.validate()?;
        for b in self.source.f0.iter().chain(&self.source.f1).chain(self.calibration.iter().flat_map(|s| s.f0.iter().chain(&s.f1))) {
            b.profile.validate()?;
        }
        if self.source.is_empty() {
            return invalid("source has no bumps");
        }
        if !(self.omega_max > 0.0) || !self.omega_max.is_finite() {
            return invalid("omega_max must be positive");
        }
        if let Some(d) = self.d_omega {
            if !(d > 0.0) || d > std::f64::consts::PI / self.t_total() * (1.0 + 1e-12) {
                return invalid(format!("d_omega must lie in (0, π/T_total] = (0, {}]", std::f64::consts::PI / self.t_total()));
            }
        }
        if self.k_ladder.is_empty() {
            return invalid("empty K ladder");
        }
        for w in self.k_ladder.windows(2) {
            if !(w[1] > w[0]) {
                return invalid("K ladder must be strictly increasing");
            }
        }
        if !(self.k_ladder[0] > 0.0) || *self.k_ladder.last().unwrap() > self.omega_max * (1.0 + 1e-12) {
            return invalid("K ladder must lie in (0, omega_max]");
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return invalid("noise level must be nonnegative");
        }
        if !(self.h > 0.0) {
            return invalid("grid spacing must be positive");
        }
        for s in [self.mesh_spacing, self.source_h].into_iter().flatten() {
            if !(s > 0.0) {
                return invalid("mesh spacing and source voxel size must be positive");
            }
        }
        if !(self.noise_correlation >= 0.0) || !self.noise_correlation.is_finite() {
            return invalid("noise correlation length must be nonnegative");
        }
        if !(self.t_margin >= 0.0) {
            return invalid("t_margin must be nonnegative");
        }
        let b = &self.bounds;
        if b.points == 0 || b.calibration_points == 0 || b.nodes == 0 || !(b.k_max > 0.0) {
            return invalid("bound settings need points, calibration points, nodes and k_max > 0");
        }
        if [b.h, b.mesh_spacing].into_iter().flatten().any(|v| !(v > 0.0)) {
            return invalid("bound-suite spacings must be positive");
        }
        let want = match self.physics {
            Physics::Scalar => true,
            Physics::Elastic(_) => false,
        };
        for b in self.source.f0.iter().chain(&self.source.f1) {
            let scalar = matches!(b.kind, crate::source::BumpKind::Scalar);
            if scalar != want {
                return invalid("bump kinds must match the physics (scalar bumps for scalar, vector kinds for elastic)");
            }
        }
        Ok(())
    }

    pub fn t_total(&self) -> f64 {
        4.0 * self.shape.diameter() / self.physics.c_min()
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        match self.d_omega {
            Some(d) => FrequencyGrid::new(d, (self.omega_max / d - 1e-9).ceil().max(1.0) as usize),
            None => FrequencyGrid::for_band(self.omega_max, self.t_total()),
        }
    }

    pub fn domain(&self) -> Result<Domain> {
        build_domain_with_mesh(&self.shape, self.h, self.mesh_spacing.unwrap_or(2.0 * self.h))
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let s = serde_json::to_string(self).expect("config serializes");
        let d = Sha256::digest(s.as_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Seed for row `row` derived from the base seed.
    pub fn row_seed(&self, row: usize) -> u64 {
        derive_seed(self.seed, row)
    }
}

fn derive_seed(seed: u64, row: usize) -> u64 {
    let d = Sha256::digest(format!("{seed}:{row}").as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Forward boundary sweep for either physics.
pub fn physics_sweep(src: &SourcePair, domain: &Domain, physics: &Physics, grid: &FrequencyGrid) -> Result<FrequencySweep> {
    match physics {
        Physics::Scalar => Ok(forward_sweep(src, &domain.mesh, grid)),
        Physics::Elastic(p) => forward_sweep_elastic(src, &domain.mesh, grid, p),
    }
}

/// Complex Gaussian noise on every stored column (real on the static one), rescaled so its
/// ε over the stored band equals `eps_target`. Tangential gradients are dropped.
pub fn add_noise(sweep: &FrequencySweep, eps_target: f64, seed: u64) -> Result<FrequencySweep> {
    add_noise_with(sweep, eps_target, seed, 0.0)
}

/// As [`add_noise`] with the white values smoothed along ∂Ω by a Gaussian kernel of width `corr`.
pub fn add_noise_with(sweep: &FrequencySweep, eps_target: f64, seed: u64, corr: f64) -> Result<FrequencySweep> {
    let mut out = sweep.clone();
    out.tangential = None;
    if eps_target == 0.0 {
        return Ok(out);
    }
    let noise = noise_sweep(sweep, eps_target, seed, corr)?;
    out.values.iter_mut().zip(&noise.values).for_each(|(a, b)| *a += b);
    Ok(out)
}

/// The rescaled perturbation alone.
pub fn noise_sweep(sweep: &FrequencySweep, eps_target: f64, seed: u64, corr: f64) -> Result<FrequencySweep> {
    if !(eps_target >= 0.0) {
        return invalid("noise level must be nonnegative");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = FrequencySweep::zeros(&sweep.mesh, &sweep.grid, sweep.arity, false);
    noise.has_static = sweep.has_static;
    for i in 0..sweep.nodes() {
        for j in 0..sweep.columns() {
            let o = noise.offset(i, j);
            for c in 0..sweep.arity {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                noise.values[o + c] = if j == 0 { C64::new(re, 0.0) } else { C64::new(re, im) };
            }
        }
    }
    if corr > 0.0 {
        noise = smooth_along_boundary(&noise, corr);
    }
    let eps = DataNorms::from_sweep(&noise, sweep.grid.omega_max())?.eps0();
    if eps == 0.0 {
        return Err(Error::Degenerate("noise draw has zero norm".into()));
    }
    Ok(noise.scaled(eps_target / eps))
}

/// nᵢ = Σₘ exp(−|xᵢ − xₘ|²/2ℓ²)·√wₘ·zₘ: a correlated field whose statistics do not depend on the mesh.
fn smooth_along_boundary(white: &FrequencySweep, corr: f64) -> FrequencySweep {
    let mesh = &white.mesh;
    let reach = 4.0 * corr;
    let rows: Vec<Vec<C64>> = (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![C64::new(0.0, 0.0); white.columns() * white.arity];
            for m in 0..mesh.len() {
                let d = geom::dist(mesh.nodes[i], mesh.nodes[m]);
                if d > reach {
                    continue;
                }
                let w = (-d * d / (2.0 * corr * corr)).exp() * mesh.weights[m].sqrt();
                let o = white.offset(m, 0);
                for (a, v) in acc.iter_mut().zip(&white.values[o..o + white.columns() * white.arity]) {
                    *a += w * v;
                }
            }
            acc
        })
        .collect();
    let mut out = white.clone();
    for (i, r) in rows.into_iter().enumerate() {
        let o = out.offset(i, 0);
        out.values[o..o + r.len()].copy_from_slice(&r);
    }
    out
}

/// Samples for synthesizing a trace fine enough for the backward solver.
pub fn trace_samples(grid: &FrequencyGrid, jmax: usize, dt_max: f64) -> usize {
    let period = 2.0 * std::f64::consts::PI / grid.d_omega;
    let need = ((period / dt_max).ceil() as usize).max(2 * jmax + 2);
    need.next_power_of_two()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub k: f64,
    /// ε of the injected noise on (0, K).
    pub epsilon: f64,
    /// −ln ε (absent without noise).
    pub e: Option<f64>,
    pub k_trunc: Option<f64>,
    pub err_l2_f0: Option<f64>,
    pub err_hm1_f1: Option<f64>,
    pub err_h1_f0: Option<f64>,
    pub err_l2_f1: Option<f64>,
    /// Square root of C(ε² + M²/(1 + K^{4/3}E^{1/2})), in the units of the errors.
    pub ceiling: Option<f64>,
    pub wall_s: f64,
    pub config_hash: String,
    pub version: String,
    #[serde(default)]
    pub error: Option<String>,
}

impl ReportRow {
    /// (‖Δf₀‖₀² + ‖Δf₁‖₋₁²)^{1/2} relative to the source.
    pub fn err_total(&self) -> Option<f64> {
        Some((self.err_l2_f0?.powi(2) + self.err_hm1_f1?.powi(2)).sqrt())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrendStats {
    /// Every step satisfies err_{i+1} ≤ (1 + jitter)·err_i.
    pub monotone: bool,
    /// Largest err_{i+1}/err_i − 1 over the ladder.
    pub worst_increase: f64,
    /// Error at K_max over the pure-noise reconstruction at K_max.
    pub plateau_ratio: Option<f64>,
    pub noise_floor: Option<f64>,
    pub below_ceiling: bool,
}

pub const TREND_JITTER: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// Source norm the errors are relative to: (‖f₀‖₀² + ‖f₁‖₋₁²)^{1/2}.
    pub reference_norm: f64,
    /// Scale applied to the source so the signal ε over (0, K_max) is 1.
    pub signal_scale: f64,
    /// A priori aggregate (M₁ scalar, M₂ₑ elastic) relative to the reference norm.
    pub m_rel: f64,
    pub constant_c: Option<f64>,
    /// True when no calibration battery was given and C comes from this run.
    pub self_calibrated: bool,
    pub rows: Vec<ReportRow>,
    pub trend: TrendStats,
}

/// Rasterized and normalized source with its full-band boundary sweep.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub domain: Domain,
    pub src: SourcePair,
    pub sweep: FrequencySweep,
    pub scale: f64,
    pub reference: f64,
    pub m_rel: f64,
}

/// The configured source, scaled as in [`run_sweep`].
pub fn prepare_source(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    prepare(cfg, &cfg.source, &cfg.domain()?)
}

fn prepare(cfg: &ExperimentConfig, desc: &SourceDesc, domain: &Domain) -> Result<Prepared> {
    let grid = cfg.frequency_grid()?;
    let src = rasterize_source(desc, domain, cfg.physics.arity())?;
    let sweep = match cfg.source_h {
        Some(hq) if hq != domain.h => {
            let coarse = domain.with_spacing(hq)?;
            let q = rasterize_source(desc, &coarse, cfg.physics.arity())?;
            physics_sweep(&q, domain, &cfg.physics, &grid)?
        }
        _ => physics_sweep(&src, domain, &cfg.physics, &grid)?,
    };
    let k_max = *cfg.k_ladder.last().unwrap();
    let scale = if cfg.normalize_signal {
        let eps = DataNorms::from_sweep(&sweep, k_max)?.eps0();
        if eps == 0.0 {
            return Err(Error::Degenerate("source produces no boundary data".into()));
        }
        1.0 / eps
    } else {
        1.0
    };
    let src = src.scaled(scale);
    let sweep = sweep.scaled(scale);
    let norms = SourceNorms::compute(&src);
    let reference = (norms.f0(0)?.powi(2) + norms.f1(-1)?.powi(2)).sqrt();
    if reference == 0.0 {
        return Err(Error::Degenerate("zero source".into()));
    }
    let m = match cfg.physics {
        Physics::Scalar => norms.m1()?,
        Physics::Elastic(_) => norms.m2e()?,
    };
    Ok(Prepared { domain: domain.clone(), src, sweep, scale, reference, m_rel: m / reference })
}

/// Band-limit at K, synthesize and solve backward.
pub fn reconstruct_from_sweep(sweep: &FrequencySweep, k: f64, domain: &Domain, physics: &Physics, coupling: BoundaryCoupling, t_margin: f64) -> Result<SourcePair> {
    let trace = synthesize_for_solver(sweep, k, domain, physics)?;
    reconstruct_from_trace(&trace, domain, physics, coupling, t_margin)
}

pub fn synthesize_for_solver(sweep: &FrequencySweep, k: f64, domain: &Domain, physics: &Physics) -> Result<TimeTrace> {
    let jmax = sweep.grid.index_for(k);
    let n_t = trace_samples(&sweep.grid, jmax, cfl_dt(domain.h, physics.c_max()));
    Ok(synthesize_with(sweep, k, Cutoff::Hard, n_t)?.trace)
}

pub fn reconstruct_from_trace(trace: &TimeTrace, domain: &Domain, physics: &Physics, coupling: BoundaryCoupling, t_margin: f64) -> Result<SourcePair> {
    let mut opts = BackwardOptions::new(domain.diameter / physics.c_min() + t_margin);
    opts.coupling = coupling;
    fdtd_backward(trace, domain, physics, &opts)
}

/// Relative errors [‖Δf₀‖₀, ‖Δf₁‖₋₁, ‖Δf₀‖₁, ‖Δf₁‖₀] / reference.
pub fn reconstruction_errors(rec: &SourcePair, truth: &SourcePair, reference: f64) -> Result<[f64; 4]> {
    if rec.grid != truth.grid || rec.arity != truth.arity {
        return Err(Error::Mismatch("reconstruction and truth grids differ".into()));
    }
    let d0: Vec<f64> = rec.f0.iter().zip(&truth.f0).map(|(a, b)| a - b).collect();
    let d1: Vec<f64> = rec.f1.iter().zip(&truth.f1).map(|(a, b)| a - b).collect();
    let n0 = sobolev_norms_sq(&rec.grid, &d0, rec.arity, &[0.0, 1.0]);
    let n1 = sobolev_norms_sq(&rec.grid, &d1, rec.arity, &[-1.0, 0.0]);
    Ok([n0[0].sqrt(), n1[0].sqrt(), n0[1].sqrt(), n1[1].sqrt()].map(|v| v / reference))
}

/// Squared error and ceiling shape for each row of a ladder run.
struct LadderRun {
    rows: Vec<ReportRow>,
    shapes: Vec<Option<f64>>,
}

fn run_ladder(cfg: &ExperimentConfig, p: &Prepared, seed: u64, hash: &str) -> LadderRun {
    let mut rows = Vec::new();
    let mut shapes = Vec::new();
    for (r, &k) in cfg.k_ladder.iter().enumerate() {
        let t0 = Instant::now();
        let e = if cfg.noise > 0.0 && cfg.noise < 1.0 { Some(-cfg.noise.ln()) } else { None };
        let mut row = ReportRow {
            k,
            epsilon: cfg.noise,
            e,
            k_trunc: e.and_then(|e| truncation_k(k, e).ok()),
            err_l2_f0: None,
            err_hm1_f1: None,
            err_h1_f0: None,
            err_l2_f1: None,
            ceiling: None,
            wall_s: 0.0,
            config_hash: hash.to_string(),
            version: VERSION.to_string(),
            error: None,
        };
        let shape = stability_ceiling(cfg.noise * cfg.noise, p.m_rel, k, e, 1.0);
        let result = (|| -> Result<[f64; 4]> {
            let band = p.sweep.truncated(k)?;
            let data = add_noise_with(&band, cfg.noise, derive_seed(seed, r), cfg.noise_correlation)?;
            let rec = reconstruct_from_sweep(&data, k, &p.domain, &cfg.physics, cfg.coupling, cfg.t_margin)?;
            reconstruction_errors(&rec, &p.src, p.reference)
        })();
        match result {
            Ok(errs) => {
                row.err_l2_f0 = Some(errs[0]);
                row.err_hm1_f1 = Some(errs[1]);
                row.err_h1_f0 = Some(errs[2]);
                row.err_l2_f1 = Some(errs[3]);
                shapes.push(Some(shape));
            }
            Err(err) => {
                row.error = Some(err.to_string());
                shapes.push(None);
            }
        }
        if cfg.record_wall_time {
            row.wall_s = t0.elapsed().as_secs_f64();
        }
        info!("K = {k}: {:?}", row.err_total());
        rows.push(row);
    }
    LadderRun { rows, shapes }
}

/// Trend statistics over a finished ladder.
pub fn trend_stats(rows: &[ReportRow], noise_floor: Option<f64>) -> TrendStats {
    let errs: Vec<f64> = rows.iter().filter_map(|r| r.err_total()).collect();
    let mut worst = f64::NEG_INFINITY;
    for w in errs.windows(2) {
        worst = worst.max(w[1] / w[0] - 1.0);
    }
    if errs.len() < 2 {
        worst = 0.0;
    }
    let complete = errs.len() == rows.len();
    let plateau = match (errs.last(), noise_floor) {
        (Some(e), Some(f)) if f > 0.0 => Some(e / f),
        _ => None,
    };
    let below = rows.iter().all(|r| match (r.err_total(), r.ceiling) {
        (Some(e), Some(c)) => e <= c,
        _ => false,
    });
    TrendStats { monotone: complete && worst <= TREND_JITTER, worst_increase: worst, plateau_ratio: plateau, noise_floor, below_ceiling: below }
}

/// Run the configured ladder, calibrate C and assemble the report.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let domain = cfg.domain()?;
    let main = prepare(cfg, &cfg.source, &domain)?;
    let mut run = run_ladder(cfg, &main, cfg.seed, &hash);

    // pure-noise reconstruction at the top of the ladder
    let noise_floor = if cfg.noise > 0.0 {
        let k = *cfg.k_ladder.last().unwrap();
        let band = main.sweep.truncated(k)?;
        let noise = noise_sweep(&band, cfg.noise, cfg.row_seed(cfg.k_ladder.len() - 1), cfg.noise_correlation)?;
        let rec = reconstruct_from_sweep(&noise, k, &domain, &cfg.physics, cfg.coupling, cfg.t_margin)?;
        let zero = SourcePair::zeros(&domain.grid, cfg.physics.arity());
        let e = reconstruction_errors(&rec, &zero, main.reference)?;
        Some((e[0].powi(2) + e[1].powi(2)).sqrt())
    } else {
        None
    };

    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let self_calibrated = cfg.calibration.is_empty() && cfg.calibration_seeds.is_empty();
    if self_calibrated {
        collect_pairs(&run, &mut pairs);
    }
    for &seed in &cfg.calibration_seeds {
        collect_pairs(&run_ladder(cfg, &main, seed, &hash), &mut pairs);
    }
    for desc in &cfg.calibration {
        let p = prepare(cfg, desc, &domain)?;
        collect_pairs(&run_ladder(cfg, &p, cfg.seed, &hash), &mut pairs);
    }
    let c = calibrate_constant(&pairs).ok();
    if let Some(c) = c {
        for (row, s) in run.rows.iter_mut().zip(&run.shapes) {
            if let Some(s) = s {
                row.ceiling = Some((c * s).sqrt());
            }
        }
    }
    let trend = trend_stats(&run.rows, noise_floor);
    Ok(ExperimentReport {
        version: VERSION.to_string(),
        config_hash: hash,
        config: cfg.clone(),
        reference_norm: main.reference,
        signal_scale: main.scale,
        m_rel: main.m_rel,
        constant_c: c,
        self_calibrated,
        rows: run.rows,
        trend,
    })
}

fn collect_pairs(run: &LadderRun, pairs: &mut Vec<(f64, f64)>) {
    for (row, s) in run.rows.iter().zip(&run.shapes) {
        if let (Some(e), Some(s)) = (row.err_total(), s) {
            pairs.push((e * e, *s));
        }
    }
}
