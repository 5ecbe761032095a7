//! Brute-force parameter sweeps with CSV reports.
//!
//! Every grid point runs one denoiser from scratch and is scored against the
//! reference with all metrics. Rows come out in lexicographic order of the
//! parameter tuple `(α, γ, ν, δ)` whatever the evaluation order, and the best
//! row per objective is chosen among converged rows only.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{eps_b, eps_d, eps_e, fmt_sig12, lowpass, pearson};
use crate::noise::{GGParams, GaussianParams};
use crate::par;
use crate::solvers::{
    denoise_mld_gaussian, denoise_mld_gg, denoise_tvl1, DenoiseResult, Method, SolverConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Objective {
    EpsB,
    EpsD,
    EpsE,
    PearsonLowpass,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::EpsB,
        Objective::EpsD,
        Objective::EpsE,
        Objective::PearsonLowpass,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Objective::EpsB => "eps_b",
            Objective::EpsD => "eps_d",
            Objective::EpsE => "eps_e",
            Objective::PearsonLowpass => "pearson_lowpass",
        }
    }

    /// Errors are minimized, correlations maximized.
    pub fn natural_direction(&self) -> Direction {
        match self {
            Objective::EpsB | Objective::EpsD => Direction::Minimize,
            Objective::EpsE | Objective::PearsonLowpass => Direction::Maximize,
        }
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown objective '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    fn better(&self, a: f64, b: f64) -> bool {
        match self {
            Direction::Minimize => a < b,
            Direction::Maximize => a > b,
        }
    }
}

/// Value lists for the generalized-gamma parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GgValues {
    pub gamma: Vec<f64>,
    pub nu: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub method: Method,
    pub alpha_values: Vec<f64>,
    /// Present exactly when `method` is [`Method::MldGg`].
    pub gg_values: Option<GgValues>,
    pub objective: Objective,
    pub direction: Direction,
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamPoint {
    pub alpha: f64,
    pub gg: Option<(f64, f64, f64)>,
}

impl ParamPoint {
    fn key(&self) -> [f64; 4] {
        let (g, n, d) = self.gg.unwrap_or((0.0, 0.0, 0.0));
        [self.alpha, g, n, d]
    }
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn check_values(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "{name} values must be positive, got {bad}"
        )));
    }
    Ok(())
}

impl ParamGrid {
    /// A grid over `alpha_values` for TV-L1 or Gaussian MLD.
    pub fn alpha_only(method: Method, alpha_values: Vec<f64>, objective: Objective) -> Self {
        ParamGrid {
            method,
            alpha_values,
            gg_values: None,
            objective,
            direction: objective.natural_direction(),
        }
    }

    pub fn mld_gg(alpha_values: Vec<f64>, gg: GgValues, objective: Objective) -> Self {
        ParamGrid {
            method: Method::MldGg,
            alpha_values,
            gg_values: Some(gg),
            objective,
            direction: objective.natural_direction(),
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self.direction = objective.natural_direction();
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_values("alpha", &self.alpha_values)?;
        match (&self.gg_values, self.method) {
            (Some(gg), Method::MldGg) => {
                check_values("gamma", &gg.gamma)?;
                check_values("nu", &gg.nu)?;
                check_values("delta", &gg.delta)
            }
            (None, Method::MldGg) => Err(Error::InvalidParameter(
                "mld_gg grids need gamma, nu and delta values".into(),
            )),
            (Some(_), m) => Err(Error::InvalidParameter(format!(
                "{m} grids take no gamma, nu or delta values"
            ))),
            (None, _) => Ok(()),
        }
    }

    /// Keeps every `stride`-th value (starting with the first) of each γ, ν
    /// and δ list; α lists are left whole.
    pub fn thinned(mut self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidParameter("stride must be positive".into()));
        }
        if let Some(gg) = &mut self.gg_values {
            for v in [&mut gg.gamma, &mut gg.nu, &mut gg.delta] {
                *v = v.iter().copied().step_by(stride).collect();
            }
        }
        Ok(self)
    }

    /// All grid points in lexicographic order of `(α, γ, ν, δ)`; duplicate
    /// values are dropped.
    pub fn points(&self) -> Vec<ParamPoint> {
        let alphas = sorted_unique(&self.alpha_values);
        match &self.gg_values {
            None => alphas
                .into_iter()
                .map(|alpha| ParamPoint { alpha, gg: None })
                .collect(),
            Some(gg) => {
                let (gs, ns, ds) = (
                    sorted_unique(&gg.gamma),
                    sorted_unique(&gg.nu),
                    sorted_unique(&gg.delta),
                );
                let mut out = Vec::with_capacity(alphas.len() * gs.len() * ns.len() * ds.len());
                for &alpha in &alphas {
                    for &g in &gs {
                        for &n in &ns {
                            for &d in &ds {
                                out.push(ParamPoint {
                                    alpha,
                                    gg: Some((g, n, d)),
                                });
                            }
                        }
                    }
                }
                out
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The full MLD grid `{0.5, 0.75, 1, 2} × {0.1 i}³, i = 1..20` and the TV-L1
/// grid `{0.01 i}, i = 1..100`, both scored on `eps_b`.
pub fn standard_grids() -> (ParamGrid, ParamGrid) {
    let b: Vec<f64> = (1..=20).map(|i| i as f64 / 10.0).collect();
    let mld = ParamGrid::mld_gg(
        vec![0.5, 0.75, 1.0, 2.0],
        GgValues {
            gamma: b.clone(),
            nu: b.clone(),
            delta: b,
        },
        Objective::EpsB,
    );
    let tv = ParamGrid::alpha_only(
        Method::Tvl1,
        (1..=100).map(|i| i as f64 / 100.0).collect(),
        Objective::EpsB,
    );
    (mld, tv)
}

/// Metrics of one grid point. A metric that is undefined for the output
/// (for instance `eps_e` of a flat image) is NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub point: ParamPoint,
    pub eps_b: f64,
    pub eps_d: f64,
    pub eps_e: f64,
    pub pearson_lowpass: f64,
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub final_step_inf_norm: f64,
}

impl SweepRow {
    pub fn value(&self, objective: Objective) -> f64 {
        match objective {
            Objective::EpsB => self.eps_b,
            Objective::EpsD => self.eps_d,
            Objective::EpsE => self.eps_e,
            Objective::PearsonLowpass => self.pearson_lowpass,
        }
    }

    /// `method,alpha,gamma,nu,delta,eps_b,eps_d,eps_e,converged,iterations`.
    pub fn csv(&self) -> String {
        let gg = match self.point.gg {
            Some((g, n, d)) => format!("{g},{n},{d}"),
            None => ",,".into(),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method,
            self.point.alpha,
            gg,
            fmt_sig12(self.eps_b),
            fmt_sig12(self.eps_d),
            fmt_sig12(self.eps_e),
            self.converged,
            self.iterations
        )
    }
}

pub const SWEEP_CSV_HEADER: &str =
    "method,alpha,gamma,nu,delta,eps_b,eps_d,eps_e,converged,iterations";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub objective: Objective,
    pub direction: Direction,
    pub rows: Vec<SweepRow>,
    /// Best converged row per objective, indexed like [`Objective::ALL`].
    /// The grid's own objective uses the grid's direction, the others their
    /// natural one.
    pub best: [Option<usize>; 4],
}

impl SweepReport {
    pub fn best_for(&self, objective: Objective) -> Option<&SweepRow> {
        let k = Objective::ALL.iter().position(|o| *o == objective)?;
        self.best[k].map(|i| &self.rows[i])
    }

    pub fn best_row(&self) -> Option<&SweepRow> {
        self.best_for(self.objective)
    }

    pub fn all_diverged(&self) -> bool {
        self.rows.iter().all(|r| r.diverged)
    }

    /// Header, one line per row, then one `# best:<objective>=<row>` line per
    /// objective, where `<row>` is the zero-based data row index or `none`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(SWEEP_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.csv());
            out.push('\n');
        }
        for (o, b) in Objective::ALL.iter().zip(&self.best) {
            let b = b.map_or_else(|| "none".to_string(), |i| i.to_string());
            let _ = writeln!(out, "# best:{}={}", o.name(), b);
        }
        out
    }
}

fn select_best(rows: &[SweepRow], objective: Objective, direction: Direction) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, r) in rows.iter().enumerate() {
        let v = r.value(objective);
        if !r.converged || v.is_nan() {
            continue;
        }
        // rows are in lexicographic order, so strict comparison keeps the
        // smallest tuple on ties
        if best.is_none_or(|b| direction.better(v, rows[b].value(objective))) {
            best = Some(k);
        }
    }
    best
}

/// Runs the denoiser selected by `grid.method` at one point.
pub fn denoise_at(
    noisy: &Image,
    method: Method,
    point: &ParamPoint,
    cfg: &SolverConfig,
) -> Result<DenoiseResult> {
    let cfg = SolverConfig {
        alpha: point.alpha,
        ..*cfg
    };
    match (method, point.gg) {
        (Method::MldGg, Some((g, n, d))) => denoise_mld_gg(noisy, &GGParams::new(g, n, d)?, &cfg),
        (Method::MldGg, None) => Err(Error::InvalidParameter(
            "mld_gg needs gamma, nu and delta".into(),
        )),
        (Method::Tvl1, _) => denoise_tvl1(noisy, &cfg),
        (Method::MldGaussian, _) => {
            denoise_mld_gaussian(noisy, &GaussianParams::new(0.0, 1.0)?, &cfg)
        }
    }
}

fn defined(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::UndefinedMetric(_)) => Ok(f64::NAN),
        other => other,
    }
}

/// Runs `grid` on `noisy`, scoring each output against `reference`. `cfg`
/// supplies everything but α. Grid points run in parallel on the current
/// rayon pool; the report does not depend on scheduling.
pub fn run_sweep(
    reference: &Image,
    noisy: &Image,
    grid: &ParamGrid,
    cfg: &SolverConfig,
) -> Result<SweepReport> {
    run_sweep_with(reference, noisy, grid, cfg, |_| {})
}

/// [`run_sweep`] calling `on_row` as each grid point finishes, in completion
/// order.
pub fn run_sweep_with(
    reference: &Image,
    noisy: &Image,
    grid: &ParamGrid,
    cfg: &SolverConfig,
    on_row: impl Fn(&SweepRow) + Sync + Send,
) -> Result<SweepReport> {
    reference.check_same_shape(noisy)?;
    grid.validate()?;
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let noisy_low = lowpass(noisy);
    let rows: Vec<Result<SweepRow>> = par::map_indexed(points.len(), |k| {
        let point = points[k];
        let res = denoise_at(noisy, grid.method, &point, cfg)?;
        let j = &res.image;
        let row = SweepRow {
            method: grid.method,
            point,
            eps_b: defined(eps_b(reference, j))?,
            eps_d: defined(eps_d(reference, j))?,
            eps_e: defined(eps_e(reference, j, false))?,
            pearson_lowpass: defined(pearson(&noisy_low, j))?,
            converged: res.converged,
            diverged: res.diverged,
            iterations: res.iterations,
            final_step_inf_norm: res.final_step_inf_norm,
        };
        on_row(&row);
        Ok(row)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    debug_assert!(rows.windows(2).all(|w| w[0].point.key() < w[1].point.key()));
    let mut best = [None; 4];
    for (k, o) in Objective::ALL.iter().enumerate() {
        let dir = if *o == grid.objective {
            grid.direction
        } else {
            o.natural_direction()
        };
        best[k] = select_best(&rows, *o, dir);
    }
    Ok(SweepReport {
        objective: grid.objective,
        direction: grid.direction,
        rows,
        best,
    })
}
