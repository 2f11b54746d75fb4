//! Command execution and CSV emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use epflow_core::csv::{fmt_f64, write_table};
use epflow_core::model::{find_critical_points, DriftModel, SeedGrid};
use epflow_core::montecarlo::{self, Init, SimConfig};
use epflow_core::ratefn;
use epflow_core::spectral::{self, BoundaryTerm, EigOptions, GridPolicy, GridSpec, InitialMeasure};

use crate::config::{
    AdmissibleParams, Command, ConfigError, GridConfig, InitSpec, MgfCheckParams, RateParams, RunConfig,
    SimulateParams, SpectrumParams, SweepParams,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical guard: {0}")]
    Numerical(#[from] epflow_core::Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl RunError {
    /// 1 for configuration and I/O problems, 2 for numerical guards.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical(_) => 2,
            RunError::Config(_) | RunError::Io { .. } => 1,
        }
    }
}

fn numerical<E: Into<epflow_core::Error>>(e: E) -> RunError {
    RunError::Numerical(e.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Overrides the config seed of `simulate` and `mgf-check`.
    pub seed: Option<u64>,
}

type Meta = Vec<(String, String)>;

struct Emitter<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Emitter<'_> {
    fn table(&mut self, name: &str, meta: &Meta, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let io = |source| RunError::Io { path: path.display().to_string(), source };
        let file = File::create(&path).map_err(io)?;
        let mut out = BufWriter::new(file);
        write_table(&mut out, meta, header, rows).map_err(io)?;
        out.flush().map_err(io)?;
        self.written.push(path);
        Ok(())
    }
}

fn grid_from(cfg: &GridConfig) -> Result<GridSpec, RunError> {
    GridSpec::new(cfg.lo.clone(), cfg.hi.clone(), cfg.n.clone()).map_err(numerical)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

fn join_n(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

/// Runs the configured command and returns the files written.
pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(&opts.out_dir)
        .map_err(|source| RunError::Io { path: opts.out_dir.display().to_string(), source })?;
    let mut meta: Meta = cfg.echo.clone();
    if let Some(seed) = opts.seed {
        meta.push(("seed_override".into(), seed.to_string()));
    }
    let mut emit = Emitter { dir: &opts.out_dir, written: Vec::new() };
    let model = match &cfg.model {
        Some(m) => Some(m.build().map_err(numerical)?),
        None => None,
    };
    let need_model = || model.as_ref().ok_or_else(|| RunError::Config(cfg.model().unwrap_err()));
    match &cfg.command {
        Command::Rate(p) => rate(need_model()?, p, &mut meta, &mut emit)?,
        Command::Spectrum(p) => spectrum(need_model()?, p, &mut meta, &mut emit)?,
        Command::Sweep(p) => sweep(need_model()?, p, &mut meta, &mut emit)?,
        Command::Simulate(p) => simulate(need_model()?, p, opts.seed, &mut meta, &mut emit)?,
        Command::MgfCheck(p) => mgf_check(need_model()?, p, opts.seed, &mut meta, &mut emit)?,
        Command::Admissible(p) => admissible(p, &meta, &mut emit)?,
    }
    Ok(emit.written)
}

fn rate(model: &DriftModel, p: &RateParams, meta: &mut Meta, emit: &mut Emitter) -> Result<(), RunError> {
    let alphas = match p.alpha_grid {
        Some((lo, hi, n)) => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
        None => ratefn::default_alpha_grid(model).map_err(numerical)?,
    };
    let curve = ratefn::semiclassical_cgf(model, &alphas).map_err(numerical)?;
    let domain = ratefn::derivative_range(&curve);
    let lo = (domain.0 / p.sigma_step).ceil() as i64;
    let hi = (domain.1 / p.sigma_step).floor() as i64;
    let sigmas: Vec<f64> = (lo..=hi).map(|k| k as f64 * p.sigma_step).collect();
    let rf = ratefn::legendre(&curve, &sigmas).map_err(numerical)?;

    for (j, loc) in curve.locations.iter().enumerate() {
        meta.push((format!("critical_point.{j}"), format!("{} {:?}", join(loc.as_slice()), curve.kinds[j])));
    }
    meta.push(("alpha_range".into(), format!("{};{}", fmt_f64(alphas[0]), fmt_f64(alphas[alphas.len() - 1]))));
    meta.push(("domain".into(), format!("{};{}", fmt_f64(rf.domain.0), fmt_f64(rf.domain.1))));
    meta.push((
        "domain_note".into(),
        "derivative range over the computed alpha grid only; the limiting domain may be wider".into(),
    ));
    meta.push((
        "flat_interval".into(),
        rf.flat_interval.map_or("none".into(), |(a, b)| format!("{};{}", fmt_f64(a), fmt_f64(b))),
    ));
    meta.push(("gc_defect".into(), fmt_f64(ratefn::gc_defect(&curve))));
    meta.push(("rate_gc_defect".into(), fmt_f64(ratefn::rate_gc_defect(&rf))));

    let rows = (0..alphas.len())
        .map(|k| vec![fmt_f64(curve.alphas[k]), fmt_f64(curve.values[k]), curve.argmax[k].to_string()])
        .collect();
    emit.table("cgf.csv", meta, &["alpha", "e", "argmax_j"], rows)?;
    let rows = rf.sigmas.iter().zip(&rf.values).map(|(s, v)| vec![fmt_f64(*s), fmt_f64(*v)]).collect();
    emit.table("rate.csv", meta, &["sigma", "e_star"], rows)
}

fn spectrum_row(eps: f64, alpha: f64, lambda: f64, residual: f64, grid: &GridSpec) -> Vec<String> {
    vec![
        fmt_f64(eps),
        fmt_f64(alpha),
        fmt_f64(lambda),
        fmt_f64(residual),
        join_n(&grid.n),
        join(&grid.lo),
        join(&grid.hi),
    ]
}

const SPECTRUM_HEADER: [&str; 7] = ["eps", "alpha", "lambda", "residual", "n", "box_lo", "box_hi"];

fn spectrum(model: &DriftModel, p: &SpectrumParams, meta: &mut Meta, emit: &mut Emitter) -> Result<(), RunError> {
    let grid = match &p.grid {
        Some(g) => grid_from(g)?,
        None => GridPolicy::default().grid_for(model, p.alpha, p.eps).map_err(numerical)?,
    };
    let op = spectral::assemble(model, p.alpha, p.eps, &grid).map_err(numerical)?;
    let opts = EigOptions { tol: p.tol, max_iter: p.max_iter, ..EigOptions::default() };
    let res = spectral::leading_eigpair(&op, &opts).map_err(numerical)?;
    meta.push(("shift".into(), fmt_f64(op.shift)));
    meta.push(("iterations".into(), res.iterations.to_string()));
    meta.push(("negative_potential_nodes".into(), op.negative_potential_nodes.to_string()));
    emit.table(
        "spectrum.csv",
        meta,
        &SPECTRUM_HEADER,
        vec![spectrum_row(p.eps, p.alpha, res.lambda, res.residual, &grid)],
    )?;
    if p.eigvec {
        let dim = grid.dim();
        let nodes = grid.nodes();
        let names: Vec<String> = (1..=dim).map(|d| format!("x{d}")).chain(["psi".to_string()]).collect();
        let header: Vec<&str> = names.iter().map(String::as_str).collect();
        let rows = res
            .eigvec
            .iter()
            .enumerate()
            .map(|(k, psi)| nodes[k * dim..(k + 1) * dim].iter().map(|x| fmt_f64(*x)).chain([fmt_f64(*psi)]).collect())
            .collect();
        emit.table("eigvec.csv", meta, &header, rows)?;
    }
    Ok(())
}

fn sweep(model: &DriftModel, p: &SweepParams, meta: &mut Meta, emit: &mut Emitter) -> Result<(), RunError> {
    let policy = GridPolicy {
        margin_widths: p.margin_widths,
        points_per_width: p.points_per_width,
        max_peclet: p.max_peclet,
        ..GridPolicy::default()
    };
    let opts = EigOptions { tol: p.tol, ..EigOptions::default() };
    let sw = spectral::e_eps_sweep(model, p.alpha, &p.eps, &policy, &opts).map_err(numerical)?;
    meta.push(("reference".into(), fmt_f64(sw.reference)));
    meta.push(("errors".into(), sw.rows.iter().map(|r| fmt_f64(r.error)).collect::<Vec<_>>().join(";")));
    meta.push(("monotone_within_20pct".into(), sw.monotone.to_string()));
    let rows = sw
        .rows
        .iter()
        .map(|r| spectrum_row(r.eps, p.alpha, r.lambda, r.residual, &r.grid))
        .collect();
    emit.table("sweep.csv", meta, &SPECTRUM_HEADER, rows)
}

fn init_of(spec: &InitSpec) -> Init {
    match spec {
        InitSpec::Point(x) => Init::Point(x.clone()),
        InitSpec::BurnIn { from, duration } => Init::BurnIn { from: from.clone(), duration: *duration },
        InitSpec::Mu0 => Init::Mu0Gaussian,
    }
}

fn simulate(
    model: &DriftModel,
    p: &SimulateParams,
    seed: Option<u64>,
    meta: &mut Meta,
    emit: &mut Emitter,
) -> Result<(), RunError> {
    let mut cfg = SimConfig::new(p.eps, p.dt, p.horizon, p.n_paths, seed.unwrap_or(p.seed), init_of(&p.init));
    if p.g_amplitude != 0.0 {
        cfg.g = BoundaryTerm::GaussianBump { amplitude: p.g_amplitude };
    }
    let ens = montecarlo::simulate(model, &cfg).map_err(numerical)?;
    let est = montecarlo::estimate_mean_ep(&ens);
    meta.push(("mean_ep_rate".into(), fmt_f64(est.mean_ep_rate.mean)));
    meta.push(("mean_ep_rate_se".into(), fmt_f64(est.mean_ep_rate.se)));
    meta.push(("mean_ep_rate_strat".into(), fmt_f64(est.mean_ep_rate_strat.mean)));
    meta.push(("second_moment".into(), fmt_f64(est.second_moment.mean)));
    meta.push(("second_moment_se".into(), fmt_f64(est.second_moment.se)));

    let dim = model.dim();
    let names: Vec<String> = ["path_id", "S_ito", "S_strat"]
        .into_iter()
        .map(String::from)
        .chain((1..=dim).map(|d| format!("x{d}_final")))
        .collect();
    let header: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows = (0..ens.samples.len())
        .map(|k| {
            [k.to_string(), fmt_f64(ens.samples[k]), fmt_f64(ens.strat_samples[k])]
                .into_iter()
                .chain(ens.final_states[k].iter().map(|x| fmt_f64(*x)))
                .collect()
        })
        .collect();
    emit.table("paths.csv", meta, &header, rows)?;

    let mgf = montecarlo::estimate_mgf(&ens, &p.alphas);
    let rows = mgf
        .iter()
        .map(|m| vec![fmt_f64(m.alpha), fmt_f64(m.log_rate), fmt_f64(m.se)])
        .collect();
    let mut mgf_meta = meta.clone();
    for m in mgf.iter().filter(|m| m.degenerate) {
        mgf_meta.push(("degenerate_weights".into(), fmt_f64(m.alpha)));
    }
    if p.horizon > 4.0 {
        mgf_meta.push(("warning".into(), "horizon > 4: exponential estimator is heavy-tailed, values unreliable".into()));
    }
    emit.table("mgf.csv", &mgf_meta, &["alpha", "mgf_log_rate", "se"], rows)?;

    let rows = montecarlo::tail_histogram(&ens, p.histogram_bins)
        .into_iter()
        .map(|(m, r)| vec![fmt_f64(m), fmt_f64(r)])
        .collect();
    emit.table("histogram.csv", meta, &["midpoint", "rate_proxy"], rows)?;

    let rows = ens.second_moments.iter().map(|(t, m)| vec![fmt_f64(*t), fmt_f64(*m)]).collect();
    emit.table("moments.csv", meta, &["t", "mean_sq_norm"], rows)
}

fn mgf_check(
    model: &DriftModel,
    p: &MgfCheckParams,
    seed: Option<u64>,
    meta: &mut Meta,
    emit: &mut Emitter,
) -> Result<(), RunError> {
    let cfg = SimConfig::new(p.eps, p.dt_mc, p.horizon, p.n_paths, seed.unwrap_or(p.seed), init_of(&p.init));
    let ens = montecarlo::simulate(model, &cfg).map_err(numerical)?;
    let mc = montecarlo::estimate_mgf(&ens, &p.alphas);
    let grid = grid_from(&p.grid)?;
    let lam = match &p.init {
        InitSpec::Point(x) => InitialMeasure::PointMass(x.clone()),
        _ => InitialMeasure::Mu0,
    };
    let mut rows = Vec::new();
    for m in &mc {
        let fk = spectral::fk_propagate(model, m.alpha, p.eps, &grid, &BoundaryTerm::Constant, &lam, p.horizon, p.dt_fk)
            .map_err(numerical)?;
        let chi = m.chi(p.horizon);
        // d χ = χ · t · d(log_rate)
        let se = chi * p.horizon * m.se;
        rows.push(vec![fmt_f64(m.alpha), fmt_f64(chi), fmt_f64(se), fmt_f64(fk), fmt_f64((chi - fk) / se)]);
    }
    meta.push(("critical_points".into(), find_critical_points(model, &SeedGrid::for_model(model)).map_err(numerical)?.points.len().to_string()));
    emit.table("mgf_check.csv", meta, &["alpha", "mc_chi", "mc_se", "fk_chi", "z"], rows)
}

fn admissible(p: &AdmissibleParams, meta: &Meta, emit: &mut Emitter) -> Result<(), RunError> {
    for (i, &(k_b, h_b)) in p.panels.iter().enumerate() {
        let raster = ratefn::region_raster(k_b, h_b, p.alpha_range, p.p_range, p.resolution).map_err(numerical)?;
        let mut m = meta.clone();
        m.push(("panel".into(), (i + 1).to_string()));
        m.push(("panel_k_b".into(), fmt_f64(k_b)));
        m.push(("panel_h_b".into(), fmt_f64(h_b)));
        let mut rows = Vec::with_capacity(raster.cells.len());
        for (ip, &pv) in raster.ps.iter().enumerate() {
            for (ia, &a) in raster.alphas.iter().enumerate() {
                rows.push(vec![fmt_f64(a), fmt_f64(pv), u8::from(raster.get(ia, ip)).to_string()]);
            }
        }
        emit.table(&format!("raster_{}.csv", i + 1), &m, &["alpha", "p", "admissible"], rows)?;
    }
    Ok(())
}
