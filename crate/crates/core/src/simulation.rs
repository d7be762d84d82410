//! Synthetic experiments: instance generation, RMSE metrics and grid runs.

use std::fmt::Write as _;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::interpolation::{projector_pair, PairKind, ProjectorPair};
use crate::linalg::{ensure_same_shape, Matrix};
use crate::rng::{purpose, Stream};
use crate::solver::{default_penalties, solve, SolveConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub sigma: f64,
    pub rho_s: f64,
    pub reps: usize,
    pub seed: u64,
    pub kinds: Vec<PairKind>,
    /// Noise level fed to [`default_penalties`]; `sigma` when unset.
    pub penalty_sigma: Option<f64>,
    /// Multiplies both default penalties.
    pub penalty_scale: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    /// When false the `seconds` column is written as `NA`, making output
    /// files byte-reproducible.
    pub timing: bool,
}

impl SimulationSpec {
    pub fn new(n: usize, m: usize, r: usize, sigma: f64, rho_s: f64) -> Self {
        SimulationSpec {
            n,
            m,
            r,
            sigma,
            rho_s,
            reps: 1,
            seed: 0,
            kinds: vec![PairKind::Identity, PairKind::Single, PairKind::Double],
            penalty_sigma: None,
            penalty_scale: 1.0,
            max_iters: 1000,
            rel_tol: 1e-7,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 || self.m < 4 || !self.n.is_multiple_of(2) || !self.m.is_multiple_of(2) {
            return Err(Error::param(format!(
                "N and M must be even and at least 4, got {}x{}",
                self.n, self.m
            )));
        }
        if self.r == 0 || self.r > self.n.min(self.m) / 2 {
            return Err(Error::param(format!(
                "r must lie in 1..=min(N,M)/2, got {}",
                self.r
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::param(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.rho_s) {
            return Err(Error::param(format!(
                "rho_s must lie in [0, 1], got {}",
                self.rho_s
            )));
        }
        if self.reps == 0 {
            return Err(Error::param("reps must be at least 1"));
        }
        if self.kinds.is_empty() {
            return Err(Error::param("no solver kinds"));
        }
        if let Some(k) = self
            .kinds
            .iter()
            .find(|k| !matches!(k, PairKind::Identity | PairKind::Single | PairKind::Double))
        {
            return Err(Error::param(format!("solver kind {k} is not simulated")));
        }
        if !(self.penalty_scale > 0.0) || !self.penalty_scale.is_finite() {
            return Err(Error::param("penalty_scale must be positive"));
        }
        Ok(())
    }

    /// Penalties used for every kind of this spec.
    pub fn penalties(&self) -> Result<(f64, f64)> {
        let (l1, l2) = default_penalties(self.n, self.penalty_sigma.unwrap_or(self.sigma))?;
        Ok((l1 * self.penalty_scale, l2 * self.penalty_scale))
    }
}

fn parse_list<T: FromStr>(value: &str, offset: usize, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| {
            v.trim().parse::<T>().map_err(|_| Error::Format {
                offset,
                message: format!("bad value {v:?} for {key}"),
            })
        })
        .collect()
}

/// Parses a `key=value` spec file into the grid it describes.
///
/// `N`, `M`, `r`, `sigma` and `rho_s` accept comma-separated lists and the
/// grid is their Cartesian product, in that nesting order. `kinds` is a
/// comma-separated list of pair kinds. `M` defaults to `N`. Blank lines and
/// `#` comments are ignored.
pub fn parse_spec(text: &str) -> Result<Vec<SimulationSpec>> {
    let mut ns: Option<Vec<usize>> = None;
    let mut ms: Option<Vec<usize>> = None;
    let mut rs: Option<Vec<usize>> = None;
    let mut sigmas: Option<Vec<f64>> = None;
    let mut rhos: Option<Vec<f64>> = None;
    let mut base = SimulationSpec::new(0, 0, 0, 0.0, 0.0);

    let mut offset = 0;
    for raw in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += raw.len();
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            offset: line_offset,
            message: format!("expected key=value, got {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let one = |v: Vec<f64>| -> Result<f64> {
            match v.as_slice() {
                [x] => Ok(*x),
                _ => Err(Error::Format {
                    offset: line_offset,
                    message: format!("{key} takes a single value"),
                }),
            }
        };
        match key {
            "N" => ns = Some(parse_list(value, line_offset, key)?),
            "M" => ms = Some(parse_list(value, line_offset, key)?),
            "r" => rs = Some(parse_list(value, line_offset, key)?),
            "sigma" => sigmas = Some(parse_list(value, line_offset, key)?),
            "rho_s" => rhos = Some(parse_list(value, line_offset, key)?),
            "kinds" => base.kinds = parse_list(value, line_offset, key)?,
            "reps" => base.reps = one(parse_list(value, line_offset, key)?)? as usize,
            "seed" => {
                base.seed = value.parse().map_err(|_| Error::Format {
                    offset: line_offset,
                    message: format!("bad seed {value:?}"),
                })?
            }
            "max_iters" => base.max_iters = one(parse_list(value, line_offset, key)?)? as usize,
            "rel_tol" => base.rel_tol = one(parse_list(value, line_offset, key)?)?,
            "penalty_scale" => base.penalty_scale = one(parse_list(value, line_offset, key)?)?,
            "penalty_sigma" => {
                base.penalty_sigma = Some(one(parse_list(value, line_offset, key)?)?)
            }
            "timing" => {
                base.timing = value.parse().map_err(|_| Error::Format {
                    offset: line_offset,
                    message: format!("timing must be true or false, got {value:?}"),
                })?
            }
            _ => {
                return Err(Error::Format {
                    offset: line_offset,
                    message: format!("unknown key {key:?}"),
                })
            }
        }
    }

    let missing = |name: &str| Error::Format {
        offset: text.len(),
        message: format!("missing key {name}"),
    };
    let ns = ns.ok_or_else(|| missing("N"))?;
    let rs = rs.ok_or_else(|| missing("r"))?;
    let sigmas = sigmas.ok_or_else(|| missing("sigma"))?;
    let rhos = rhos.ok_or_else(|| missing("rho_s"))?;

    let mut grid = Vec::new();
    for &n in &ns {
        let m_values = ms.clone().unwrap_or_else(|| vec![n]);
        for &m in &m_values {
            for &r in &rs {
                for &sigma in &sigmas {
                    for &rho_s in &rhos {
                        let spec = SimulationSpec {
                            n,
                            m,
                            r,
                            sigma,
                            rho_s,
                            ..base.clone()
                        };
                        spec.validate()?;
                        grid.push(spec);
                    }
                }
            }
        }
    }
    Ok(grid)
}

/// One synthetic problem with its ground truth.
#[derive(Debug, Clone)]
pub struct Instance {
    pub z: Matrix,
    pub x0: Matrix,
    pub y0: Matrix,
    pub theta: Matrix,
    pub e: Matrix,
    /// The single-interpolation pair that generated the data.
    pub pair0: ProjectorPair,
}

fn gaussian(rows: usize, cols: usize, sigma: f64, stream: &mut Stream) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| sigma * stream.normal()).collect();
    Matrix::from_row_slice(rows, cols, &data)
}

/// Draws `X0 = U0 V0^T` with `(N/2) x r` Gaussian factors, a Bernoulli(`rho_s`)
/// support for `Y0` with Uniform[-5, 5] values, and Gaussian noise.
pub fn generate_instance(spec: &SimulationSpec, rep: usize) -> Result<Instance> {
    spec.validate()?;
    let rep = rep as u64;
    let pair0 = projector_pair(PairKind::Single, spec.n, spec.m)?;
    let (n, m) = pair0.inner_shape();

    let u0 = gaussian(
        n,
        spec.r,
        spec.sigma,
        &mut Stream::new(spec.seed, rep, purpose::LOWRANK_U),
    );
    let v0 = gaussian(
        m,
        spec.r,
        spec.sigma,
        &mut Stream::new(spec.seed, rep, purpose::LOWRANK_V),
    );
    let x0 = &u0 * v0.transpose();

    let mut sparse = Stream::new(spec.seed, rep, purpose::SPARSE);
    let y_data: Vec<f64> = (0..spec.n * spec.m)
        .map(|_| {
            if sparse.bernoulli(spec.rho_s) {
                sparse.uniform_in(-5.0, 5.0)
            } else {
                0.0
            }
        })
        .collect();
    let y0 = Matrix::from_row_slice(spec.n, spec.m, &y_data);

    let e = gaussian(
        spec.n,
        spec.m,
        spec.sigma,
        &mut Stream::new(spec.seed, rep, purpose::NOISE),
    );
    let theta = pair0.lift(&x0) + &y0;
    let z = &theta + &e;
    Ok(Instance {
        z,
        x0,
        y0,
        theta,
        e,
        pair0,
    })
}

/// `||A - B||_F / sqrt(NM)`
pub fn rmse(a: &Matrix, b: &Matrix) -> Result<f64> {
    ensure_same_shape(a, b, "rmse")?;
    if a.is_empty() {
        return Err(Error::shape("rmse of empty matrices"));
    }
    Ok((a - b).norm() / ((a.len()) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub sigma: f64,
    pub rho_s: f64,
    pub rep: usize,
    pub kind: PairKind,
    pub rmse_lowrank: f64,
    pub rmse_sparse: f64,
    pub rmse_theta: f64,
    /// `None` when timing is disabled.
    pub seconds: Option<f64>,
    pub iterations: usize,
    /// `converged`, `max_iters` or `error: <message>`.
    pub status: String,
}

impl GridRow {
    pub fn ok(&self) -> bool {
        !self.status.starts_with("error")
    }
}

pub const CSV_HEADER: &str =
    "N,M,r,sigma,rho_s,rep,kind,rmse_lowrank,rmse_sparse,rmse_theta,seconds,iterations,status";

fn run_one(
    spec: &SimulationSpec,
    inst: &Instance,
    kind: PairKind,
) -> Result<(f64, f64, f64, f64, usize, bool)> {
    let pair = projector_pair(kind, spec.n, spec.m)?;
    let (l1, l2) = spec.penalties()?;
    let config = SolveConfig::new(&inst.z, &pair, l1, l2)
        .max_iters(spec.max_iters)
        .rel_tol(spec.rel_tol);
    let res = solve(&config)?;
    let lowrank = pair.lift(&res.x_hat);
    Ok((
        rmse(&lowrank, &inst.pair0.lift(&inst.x0))?,
        rmse(&res.y_hat, &inst.y0)?,
        rmse(&res.theta_hat, &inst.theta)?,
        res.wall_time.as_secs_f64(),
        res.iterations,
        res.converged,
    ))
}

/// Runs every spec, rep and kind in that nesting order. Solver failures are
/// recorded in the row's status; invalid specs abort the run.
pub fn run_grid(specs: &[SimulationSpec]) -> Result<Vec<GridRow>> {
    if specs.is_empty() {
        return Err(Error::param("empty spec list"));
    }
    for spec in specs {
        spec.validate()?;
    }
    let mut rows = Vec::new();
    for spec in specs {
        for rep in 0..spec.reps {
            let inst = generate_instance(spec, rep)?;
            for &kind in &spec.kinds {
                let mut row = GridRow {
                    n: spec.n,
                    m: spec.m,
                    r: spec.r,
                    sigma: spec.sigma,
                    rho_s: spec.rho_s,
                    rep,
                    kind,
                    rmse_lowrank: f64::NAN,
                    rmse_sparse: f64::NAN,
                    rmse_theta: f64::NAN,
                    seconds: None,
                    iterations: 0,
                    status: String::new(),
                };
                match run_one(spec, &inst, kind) {
                    Ok((lr, sp, th, secs, iters, converged)) => {
                        row.rmse_lowrank = lr;
                        row.rmse_sparse = sp;
                        row.rmse_theta = th;
                        row.seconds = spec.timing.then_some(secs);
                        row.iterations = iters;
                        row.status = if converged { "converged" } else { "max_iters" }.into();
                    }
                    Err(e) => {
                        row.status = format!("error: {}", e.to_string().replace([',', '\n'], ";"))
                    }
                }
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn csv_row(row: &GridRow) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        row.n,
        row.m,
        row.r,
        row.sigma,
        row.rho_s,
        row.rep,
        row.kind,
        row.rmse_lowrank,
        row.rmse_sparse,
        row.rmse_theta,
        row.seconds
            .map_or_else(|| "NA".to_string(), |t| t.to_string()),
        row.iterations,
        row.status
    );
    s
}

pub fn write_csv<W: Write>(rows: &[GridRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", csv_row(row))?;
    }
    Ok(())
}
