//! Experiment runner: config parsing, the seven experiments, CSV output.
//!
//! Config files are flat `key = value` lines; `#` starts a comment and a
//! repeated key appends to a list. Every experiment has a default grid and
//! default parameter lists, so an empty file is a valid config. If any
//! `grid.*` key is given, `grid.domain`, `grid.umin` and `grid.umax` must all
//! be given.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::families::{member, tensor_member};
use crate::grid::{build_grid, l2nu_norm, sample, Domain, GridFunction, LogGrid};
use crate::operators::{
    apply_field, commutation_relations, commutator_defect, sobolev_norm, Basis, Family, Field,
    FieldTag, SobolevSpec,
};
use crate::product::{
    cocycle_defect, elliptic_defect, make_cocycle_pair, solve_cocycle, tame_ratio_from_norms,
    tensor_l2_norm, translate_factor, CocycleParams, TensorSobolev,
};
use crate::record::ExperimentRecord;
use crate::repr::{classify_series, ReprParams};
use crate::sharpness::{cos_bound_check, exponent_fit, sharpness_experiment, SharpnessScan};
use crate::solvers::{
    csc_expansion_check, half_shift, make_coboundary, make_twisted_annihilated, map_limit_nodes,
    map_rhs_parts, solve_map, solve_twisted, twist_limit_nodes, MapParams, TwistParams,
};

/// Column names of the CSV output, in order.
pub const CSV_HEADER: &str = "nu_abs,lambda,L,s,sigma,epsilon,norm_f,norm_g,norm_green,ratio,slope";

/// Uniform-boundedness factor for calibrated scans.
pub const SCAN_BOUND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Verify,
    ScanUpper,
    ScanTame,
    ScanLower,
    ScanMap,
    Cocycle,
    Convergence,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Verify,
        Experiment::ScanUpper,
        Experiment::ScanTame,
        Experiment::ScanLower,
        Experiment::ScanMap,
        Experiment::Cocycle,
        Experiment::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Verify => "verify",
            Experiment::ScanUpper => "scan-upper",
            Experiment::ScanTame => "scan-tame",
            Experiment::ScanLower => "scan-lower",
            Experiment::ScanMap => "scan-map",
            Experiment::Cocycle => "cocycle",
            Experiment::Convergence => "convergence",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown experiment `{s}`")))
    }
}

/// Grid section of a config. `n` holds one resolution per entry; only the
/// convergence study uses more than one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub domain: Domain,
    pub u_min: f64,
    pub u_max: f64,
    pub n: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self, n: usize) -> Result<LogGrid> {
        build_grid(self.domain, self.u_min, self.u_max, n)
    }

    /// The grid at the first listed resolution.
    pub fn primary(&self) -> Result<LogGrid> {
        self.build(self.n[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub experiment: Experiment,
    pub grid: GridSpec,
    pub nu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub l: Vec<f64>,
    pub s: Vec<f64>,
    pub sigma: Vec<f64>,
    pub epsilon: Vec<f64>,
    /// Indices into the smooth test family.
    pub member: Vec<usize>,
    pub tol_residual: f64,
    pub tol_slope: f64,
    pub out: Option<PathBuf>,
}

impl ScanConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        use Experiment::*;
        let desk = GridSpec {
            domain: Domain::FullLine,
            u_min: -9.0,
            u_max: 9.0,
            n: vec![4097],
        };
        let grid = match experiment {
            Verify | ScanUpper | ScanTame => desk,
            ScanLower => GridSpec {
                domain: Domain::PositiveHalf,
                u_min: -0.45,
                u_max: 0.45,
                n: vec![1801],
            },
            ScanMap => GridSpec {
                domain: Domain::FullLine,
                u_min: -6.0,
                u_max: 4.0,
                n: vec![4097],
            },
            Cocycle => GridSpec {
                domain: Domain::PositiveHalf,
                u_min: -5.0,
                u_max: 4.0,
                n: vec![257],
            },
            Convergence => GridSpec {
                domain: Domain::PositiveHalf,
                u_min: -6.0,
                u_max: 1.0,
                n: vec![257, 513, 1025],
            },
        };
        let (nu, lambda, l, s, sigma) = match experiment {
            ScanLower => (
                vec![8.0, 16.0, 32.0, 64.0, 128.0],
                vec![1.0],
                vec![],
                vec![1.0, 2.0],
                vec![0.0],
            ),
            Cocycle => (
                vec![2.0, 3.0],
                vec![],
                vec![0.5, 1.0, 2.0, 4.0],
                vec![1.0],
                vec![],
            ),
            ScanMap => (
                vec![2.0],
                vec![],
                vec![0.5, 1.0, 2.0, 4.0, 8.0],
                vec![1.0, 2.0],
                vec![],
            ),
            Verify => (
                vec![2.0],
                vec![0.25, 0.5, 1.0, 2.0, 4.0],
                vec![0.5, 1.0, std::f64::consts::TAU, 8.0],
                vec![],
                vec![],
            ),
            _ => (
                vec![2.0],
                vec![0.25, 0.5, 1.0, 2.0, 4.0],
                vec![],
                vec![1.0, 2.0],
                vec![],
            ),
        };
        let member = match experiment {
            Cocycle => (0..5).collect(),
            _ => (0..10).collect(),
        };
        Self {
            experiment,
            grid,
            nu,
            lambda,
            l,
            s,
            sigma,
            epsilon: vec![0.5],
            member,
            tol_residual: 1e-12,
            tol_slope: 0.15,
            out: None,
        }
    }

    /// Parses `text` on top of the defaults for `experiment`.
    pub fn parse(experiment: Experiment, text: &str) -> Result<Self> {
        let mut cfg = Self::defaults(experiment);
        let mut lists: Vec<(&'static str, Vec<f64>)> = Vec::new();
        let mut members: Option<Vec<usize>> = None;
        let mut grid_n: Option<Vec<usize>> = None;
        let (mut domain, mut umin, mut umax) = (None, None, None);
        let mut grid_line = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config {
                line,
                message: format!("field `{key}`: {what} `{value}`"),
            };
            let number = || value.parse::<f64>().map_err(|_| bad("not a number:"));
            let count = || {
                value
                    .parse::<usize>()
                    .map_err(|_| bad("not a non-negative integer:"))
            };
            if key.starts_with("grid.") {
                grid_line.get_or_insert(line);
            }
            match key {
                "experiment" => {
                    let e: Experiment = value.parse().map_err(|_| bad("unknown experiment"))?;
                    if e != experiment {
                        return Err(Error::Config {
                            line,
                            message: format!(
                                "field `experiment`: config is for `{e}` but `{experiment}` was requested"
                            ),
                        });
                    }
                }
                "grid.domain" => {
                    domain = Some(match value {
                        "full" | "full-line" => Domain::FullLine,
                        "half" | "positive-half" => Domain::PositiveHalf,
                        _ => return Err(bad("expected `full` or `half`, found")),
                    })
                }
                "grid.umin" => umin = Some(number()?),
                "grid.umax" => umax = Some(number()?),
                "grid.n" => grid_n.get_or_insert_with(Vec::new).push(count()?),
                "member" => members.get_or_insert_with(Vec::new).push(count()?),
                "nu" | "lambda" | "L" | "s" | "sigma" | "epsilon" => {
                    let x = number()?;
                    match lists.iter_mut().find(|e| e.0 == key) {
                        Some(entry) => entry.1.push(x),
                        None => lists.push((key_static(key), vec![x])),
                    }
                }
                "tol.residual" | "tol.slope" => {
                    let x = number()?;
                    if !(x > 0.0) || !x.is_finite() {
                        return Err(bad("tolerance must be positive, found"));
                    }
                    if key == "tol.residual" {
                        cfg.tol_residual = x;
                    } else {
                        cfg.tol_slope = x;
                    }
                }
                "out" => cfg.out = Some(PathBuf::from(value)),
                _ => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown field `{key}`"),
                    })
                }
            }
        }

        if let Some(line) = grid_line {
            let missing = [
                ("grid.domain", domain.is_none()),
                ("grid.umin", umin.is_none()),
                ("grid.umax", umax.is_none()),
            ]
            .into_iter()
            .find(|m| m.1);
            if let Some((field, _)) = missing {
                return Err(Error::Config {
                    line,
                    message: format!("grid section is missing field `{field}`"),
                });
            }
            cfg.grid.domain = domain.unwrap_or(cfg.grid.domain);
            cfg.grid.u_min = umin.unwrap_or(cfg.grid.u_min);
            cfg.grid.u_max = umax.unwrap_or(cfg.grid.u_max);
        }
        if let Some(n) = grid_n {
            cfg.grid.n = n;
        }
        if let Some(m) = members {
            cfg.member = m;
        }
        for (key, values) in lists {
            match key {
                "nu" => cfg.nu = values,
                "lambda" => cfg.lambda = values,
                "L" => cfg.l = values,
                "s" => cfg.s = values,
                "sigma" => cfg.sigma = values,
                _ => cfg.epsilon = values,
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(experiment: Experiment, path: &Path) -> Result<Self> {
        Self::parse(experiment, &fs::read_to_string(path)?)
    }

    /// Checks list lengths and the grid. Errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        use Experiment::*;
        let need: &[&str] = match self.experiment {
            Verify => &["nu", "lambda", "L"],
            ScanUpper | ScanTame => &["nu", "lambda", "s"],
            ScanLower => &["nu", "lambda", "s", "sigma"],
            ScanMap => &["nu", "L", "s", "epsilon"],
            Cocycle => &["nu", "L", "s"],
            Convergence => &["nu"],
        };
        for &field in need {
            if self.list(field).is_empty() {
                return Err(Error::MissingField(field.into()));
            }
        }
        if matches!(
            self.experiment,
            ScanUpper | ScanTame | ScanMap | Cocycle | Verify
        ) && self.member.is_empty()
        {
            return Err(Error::MissingField("member".into()));
        }
        if let Some(&k) = self.member.iter().find(|&&k| k >= 10) {
            return Err(Error::InvalidParameter(format!(
                "field `member`: index {k} must be < 10"
            )));
        }
        if self.grid.n.is_empty() {
            return Err(Error::MissingField("grid.n".into()));
        }
        if self.experiment == Convergence {
            if self.grid.n.len() < 3 {
                return Err(Error::InvalidParameter(
                    "field `grid.n`: the convergence study needs at least 3 resolutions".into(),
                ));
            }
            for w in self.grid.n.windows(2) {
                if w[1] != 2 * w[0] - 1 {
                    return Err(Error::InvalidParameter(format!(
                        "field `grid.n`: {} does not halve the spacing of {}",
                        w[1], w[0]
                    )));
                }
            }
        } else if self.grid.n.len() > 1 {
            return Err(Error::InvalidParameter(
                "field `grid.n`: only the convergence study takes several resolutions".into(),
            ));
        }
        for &n in &self.grid.n {
            self.grid
                .build(n)
                .map_err(|e| Error::InvalidParameter(format!("field `grid`: {e}")))?;
        }
        let reference = match self.experiment {
            ScanUpper | ScanTame => Some(("lambda", &self.lambda)),
            ScanMap | Cocycle => Some(("L", &self.l)),
            _ => None,
        };
        if let Some((field, values)) = reference {
            if !values.contains(&1.0) {
                return Err(Error::InvalidParameter(format!(
                    "field `{field}`: the calibration value 1 must be listed"
                )));
            }
        }
        Ok(())
    }

    fn list(&self, field: &str) -> &[f64] {
        match field {
            "nu" => &self.nu,
            "lambda" => &self.lambda,
            "L" => &self.l,
            "s" => &self.s,
            "sigma" => &self.sigma,
            _ => &self.epsilon,
        }
    }
}

fn key_static(key: &str) -> &'static str {
    ["nu", "lambda", "L", "s", "sigma", "epsilon"]
        .into_iter()
        .find(|k| *k == key)
        .unwrap_or("epsilon")
}

/// One embedded assertion: `measured` against `threshold` in direction
/// `upper` (measured must not exceed) or lower (must not fall below).
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub upper: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            upper: true,
        }
    }

    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            threshold,
            upper: false,
        }
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        if self.upper {
            self.measured <= self.threshold
        } else {
            self.measured >= self.threshold
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.6e} {} {:.6e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            if self.upper { "<=" } else { ">=" },
            self.threshold
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutcome {
    pub records: Vec<ExperimentRecord>,
    pub checks: Vec<Check>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    /// `PASS k/k` or `FAIL j/k` with `j` the number of passing checks.
    pub fn summary(&self) -> String {
        let k = self.checks.len();
        let j = self.checks.iter().filter(|c| c.passed()).count();
        format!("{} {j}/{k}", if j == k { "PASS" } else { "FAIL" })
    }
}

/// Runs the configured experiment and writes the CSV when `out` is set.
pub fn run(config: &ScanConfig) -> Result<RunOutcome> {
    config.validate()?;
    let outcome = match config.experiment {
        Experiment::Verify => run_verify(config)?,
        Experiment::ScanUpper => run_twisted_scan(config, false)?,
        Experiment::ScanTame => run_twisted_scan(config, true)?,
        Experiment::ScanLower => run_scan_lower(config)?,
        Experiment::ScanMap => run_scan_map(config)?,
        Experiment::Cocycle => run_cocycle(config)?,
        Experiment::Convergence => {
            let study = convergence_study(config)?;
            RunOutcome {
                records: study.iter().flat_map(ConvergenceCase::records).collect(),
                checks: study.iter().filter_map(ConvergenceCase::check).collect(),
            }
        }
    };
    if let Some(path) = &config.out {
        emit_csv(&outcome.records, path)?;
    }
    Ok(outcome)
}

fn cmp_opt(a: Option<f64>, b: Option<f64>) -> std::cmp::Ordering {
    use std::cmp::Ordering::*;
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Less,
        (None, Some(_)) => Greater,
        (None, None) => Equal,
    }
}

/// Records sorted by parameter tuple (absent values last); ties keep their
/// input order.
pub fn sorted_records(records: &[ExperimentRecord]) -> Vec<ExperimentRecord> {
    let mut rows = records.to_vec();
    rows.sort_by(|a, b| {
        a.params()
            .iter()
            .zip(b.params().iter())
            .map(|(x, y)| cmp_opt(*x, *y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows
}

/// CSV text: header, then one sorted row per record with 17 significant
/// digits and empty cells for absent values.
pub fn csv_string(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in sorted_records(records) {
        let cells: Vec<String> = r
            .params()
            .iter()
            .chain(r.values().iter())
            .map(|v| v.map(|x| format!("{x:.16e}")).unwrap_or_default())
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn emit_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    fs::write(path, csv_string(records))?;
    Ok(())
}

/// `|a - b|` over nodes not in `skip`, relative to `|b|` over the same nodes.
fn masked_rel_error(a: &GridFunction, b: &GridFunction, skip: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, (x, y)) in a.samples().iter().zip(b.samples()).enumerate() {
        if skip.contains(&i) {
            continue;
        }
        num += (x - y).norm_sqr();
        den += y.norm_sqr();
    }
    if num == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

fn family(config: &ScanConfig, grid: &LogGrid) -> Result<Vec<(usize, GridFunction)>> {
    config
        .member
        .iter()
        .map(|&k| member(k).sample(grid).map(|f| (k, f)))
        .collect()
}

/// Largest ratio-to-reference per group, as one check per group.
fn calibration_checks(name: &str, rows: &[(String, f64, f64)], reference_param: f64) -> Vec<Check> {
    let mut groups: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    groups.dedup();
    groups
        .into_iter()
        .map(|group| {
            let in_group: Vec<_> = rows.iter().filter(|r| r.0 == group).collect();
            let reference = in_group
                .iter()
                .find(|r| r.1 == reference_param)
                .map(|r| r.2)
                .unwrap_or(f64::NAN);
            let worst = in_group
                .iter()
                .map(|r| r.2 / reference)
                .fold(
                    0.0,
                    |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) },
                );
            Check::at_most(
                format!("{name} {group}: max ratio / calibration"),
                worst,
                SCAN_BOUND,
            )
        })
        .collect()
}

fn run_verify(config: &ScanConfig) -> Result<RunOutcome> {
    let grid = config.grid.primary()?;
    let p = ReprParams::principal(config.nu[0]);
    let members = family(config, &grid)?;
    let mut checks = Vec::new();

    let base = sample(&grid, |xi| {
        let u = xi.abs().ln();
        Complex64::new((-(u - 0.3) * (u - 0.3) / 0.5).exp(), 0.0)
    })?;
    for (name, a, b, rhs) in commutation_relations() {
        let d = commutator_defect(a, b, rhs, &base, &p)?;
        checks.push(Check::at_most(format!("commutator {name}"), d, 1e-6));
    }

    let v = FieldTag::cal(Field::V);
    let twisted: Vec<(f64, f64, f64)> = config
        .lambda
        .par_iter()
        .map(|&lambda| -> Result<(f64, f64, f64)> {
            let tp = TwistParams::new(lambda)?;
            let skip = twist_limit_nodes(&grid, &tp);
            let (mut res, mut comm) = (0.0f64, 0.0f64);
            for (_, f0) in &members {
                let g = make_twisted_annihilated(f0, &tp)?;
                let f = solve_twisted(&g, &tp)?;
                let lhs = &apply_field(&f, v, &p)? + &f.scale(Complex64::new(0.0, lambda));
                res = res.max(l2nu_norm(&(&lhs - &g)) / l2nu_norm(&g));
                let a = solve_twisted(&apply_field(&g, v, &p)?, &tp)?;
                let b = apply_field(&f, v, &p)?;
                comm = comm.max(masked_rel_error(&a, &b, &skip));
            }
            Ok((lambda, res, comm))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    for (lambda, res, comm) in twisted {
        checks.push(Check::at_most(
            format!("twisted residual lambda={lambda}"),
            res,
            config.tol_residual,
        ));
        checks.push(Check::at_most(
            format!("twisted V-commutation lambda={lambda}"),
            comm,
            1e-10,
        ));
        records.push(ExperimentRecord {
            lambda: Some(lambda),
            norm_f: Some(res),
            norm_g: Some(config.tol_residual),
            ..Default::default()
        });
    }

    for &l in &config.l {
        let mp = MapParams::new(l)?;
        let skip: Vec<usize> = map_limit_nodes(&grid, &mp)
            .into_iter()
            .map(|x| x.0)
            .collect();
        let mut worst = 0.0f64;
        for (_, f0) in &members {
            let f = solve_map(&make_coboundary(f0, &mp), &mp)?;
            worst = worst.max(masked_rel_error(&f, f0, &skip));
        }
        checks.push(Check::at_most(
            format!("map round trip L={l}"),
            worst,
            1e-10,
        ));
        records.push(ExperimentRecord {
            l: Some(l),
            norm_f: Some(worst),
            norm_g: Some(1e-10),
            ..Default::default()
        });
    }

    for nu in [
        Complex64::new(0.0, 2.0),
        Complex64::new(0.5, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(2.0, 0.0),
    ] {
        let mu = 1.0 - (nu * nu).re;
        let back = classify_series(mu).nu;
        checks.push(Check::at_most(
            format!("series round trip nu={nu}"),
            (back - nu).norm(),
            1e-12,
        ));
    }
    for nu in [4.0, 8.0, 16.0, 64.0] {
        checks.push(Check::at_least(
            format!("cos bound |nu|={nu}"),
            cos_bound_check(nu, 200, 200),
            0.25,
        ));
    }
    for x in [0.5, 1.0, 2.0] {
        let errs: Vec<f64> = [10, 100, 1000, 10_000]
            .iter()
            .map(|&n| csc_expansion_check(x, n))
            .collect::<Result<_>>()?;
        let monotone = errs.windows(2).all(|w| w[1] < w[0]);
        checks.push(Check::at_most(
            format!("csc expansion x={x} (decreasing: {monotone})"),
            if monotone { errs[3] } else { f64::INFINITY },
            1e-3,
        ));
    }

    Ok(RunOutcome { records, checks })
}

/// `scan-tame` (X,V graph norms, `|lambda| |f|_s / |g|_{s+1}`) or
/// `scan-upper` (full norms, `|lambda| |f|_s / ((1 + |lambda|^-s) |g|_{2s+1})`).
fn run_twisted_scan(config: &ScanConfig, tame: bool) -> Result<RunOutcome> {
    let grid = config.grid.primary()?;
    let p = ReprParams::principal(config.nu[0]);
    let basis = if tame { Basis::XVOnly } else { Basis::FullUXV };
    let members = family(config, &grid)?;
    let mut tuples = Vec::new();
    for (k, f0) in &members {
        for &s in &config.s {
            for &lambda in &config.lambda {
                tuples.push((*k, f0, s, lambda));
            }
        }
    }
    let rows: Vec<(usize, f64, f64, f64, f64)> = tuples
        .par_iter()
        .map(|&(k, f0, s, lambda)| -> Result<_> {
            let tp = TwistParams::new(lambda)?;
            let g = make_twisted_annihilated(f0, &tp)?;
            let f = solve_twisted(&g, &tp)?;
            let g_order = if tame { s + 1.0 } else { 2.0 * s + 1.0 };
            let nf = sobolev_norm(&f, &SobolevSpec::new(s, Family::Calligraphic, basis), &p)?;
            let ng = sobolev_norm(
                &g,
                &SobolevSpec::new(g_order, Family::Calligraphic, basis),
                &p,
            )?;
            Ok((k, s, lambda, nf, ng))
        })
        .collect::<Result<_>>()?;
    let weight = |s: f64, lambda: f64| {
        if tame {
            lambda.abs()
        } else {
            lambda.abs() / (1.0 + lambda.abs().powf(-s))
        }
    };
    let records = rows
        .iter()
        .map(|&(_, s, lambda, nf, ng)| {
            let mut r = ExperimentRecord {
                nu_abs: Some(config.nu[0]),
                lambda: Some(lambda),
                s: Some(s),
                ..Default::default()
            }
            .with_norms(nf, ng);
            r.ratio = Some(weight(s, lambda) * nf / ng);
            r
        })
        .collect();
    let keyed: Vec<(String, f64, f64)> = rows
        .iter()
        .map(|&(k, s, lambda, nf, ng)| {
            (
                format!("member={k} s={s}"),
                lambda,
                weight(s, lambda) * nf / ng,
            )
        })
        .collect();
    let name = if tame { "tame twisted" } else { "full twisted" };
    Ok(RunOutcome {
        records,
        checks: calibration_checks(name, &keyed, 1.0),
    })
}

fn run_scan_lower(config: &ScanConfig) -> Result<RunOutcome> {
    let grid = config.grid.primary()?;
    let tol = config.tol_slope;
    let mut outcome = RunOutcome::default();
    for &s in &config.s {
        for &sigma in &config.sigma {
            let scan = SharpnessScan {
                s,
                sigma,
                nu_list: config.nu.clone(),
                lambda: config.lambda[0],
            };
            let report = sharpness_experiment(&scan, &grid)?;
            outcome.records.extend(report.records.iter().copied());
            outcome.records.push(ExperimentRecord {
                lambda: Some(scan.lambda),
                s: Some(s),
                sigma: Some(sigma),
                slope: Some(report.slope_ratio),
                ..Default::default()
            });
            let tag = format!("s={s} sigma={sigma}");
            outcome.checks.push(Check::at_least(
                format!("slope of |f|_s {tag}"),
                report.slope_f,
                2.0 * s + 0.5 - tol,
            ));
            outcome.checks.push(Check::at_least(
                format!("slope of |f|_s on [lambda, lambda(1+1/|nu|)] {tag}"),
                report.slope_f_restricted,
                2.0 * s + 0.5 - tol,
            ));
            outcome.checks.push(Check::at_most(
                format!("slope of |g|_(s+sigma) {tag}"),
                report.slope_g,
                s + sigma + tol,
            ));
            if sigma <= s + 0.2 {
                outcome.checks.push(Check::at_least(
                    format!("ratio slope {tag}"),
                    report.slope_ratio,
                    s + 0.5 - sigma - 2.0 * tol,
                ));
            }
        }
    }
    Ok(outcome)
}

fn run_scan_map(config: &ScanConfig) -> Result<RunOutcome> {
    let grid = config.grid.primary()?;
    let p = ReprParams::principal(config.nu[0]);
    let eps = config.epsilon[0];
    let members = family(config, &grid)?;
    let mut tuples = Vec::new();
    for (k, f0) in &members {
        for &s in &config.s {
            for &l in &config.l {
                for basis in [Basis::FullUXV, Basis::XVOnly] {
                    tuples.push((*k, f0, s, l, basis));
                }
            }
        }
    }
    let rows: Vec<_> = tuples
        .par_iter()
        .map(|&(k, f0, s, l, basis)| -> Result<_> {
            let mp = MapParams::new(l)?;
            let g = make_coboundary(f0, &mp);
            let f = solve_map(&g, &mp)?;
            let spec = SobolevSpec::new(s, Family::Calligraphic, basis).with_epsilon(eps);
            let nf = sobolev_norm(&half_shift(&f, &mp), &spec, &p)?;
            let rhs = map_rhs_parts(&g, &mp, &spec, &p)?;
            Ok((k, s, l, basis, nf, rhs))
        })
        .collect::<Result<_>>()?;
    let mut outcome = RunOutcome::default();
    for basis in [Basis::FullUXV, Basis::XVOnly] {
        let keyed: Vec<(String, f64, f64)> = rows
            .iter()
            .filter(|r| r.3 == basis)
            .map(|r| (format!("member={} s={}", r.0, r.1), r.2, r.4 / r.5.value))
            .collect();
        let name = match basis {
            Basis::XVOnly => "map (X,V norms)",
            _ => "map",
        };
        outcome.checks.extend(calibration_checks(name, &keyed, 1.0));
    }
    // The X,V-only rows carry a negative epsilon column so both variants
    // survive in one CSV without colliding.
    outcome.records = rows
        .iter()
        .map(|(_, s, l, basis, nf, rhs)| {
            let mut r = ExperimentRecord {
                nu_abs: Some(config.nu[0]),
                l: Some(*l),
                s: Some(*s),
                epsilon: Some(if *basis == Basis::XVOnly { -eps } else { eps }),
                norm_green: Some(rhs.green),
                ..Default::default()
            }
            .with_norms(*nf, rhs.g);
            r.ratio = Some(nf / rhs.value);
            r
        })
        .collect();
    Ok(outcome)
}

fn run_cocycle(config: &ScanConfig) -> Result<RunOutcome> {
    let grid = config.grid.primary()?;
    let nu2 = *config.nu.get(1).unwrap_or(&config.nu[0]);
    let ctx = TensorSobolev::new(
        ReprParams::principal(config.nu[0]),
        ReprParams::principal(nu2),
    );
    let s = config.s[0];
    let mut outcome = RunOutcome::default();
    let mut keyed = Vec::new();
    let (mut worst_rt, mut worst_defect) = (0.0f64, 0.0f64);

    for &k in &config.member {
        let p = tensor_member(k, &grid, &grid)?;
        let np = ctx.norm(&p, s)?;
        let shifted = |factor: usize| -> Result<Vec<f64>> {
            config
                .l
                .par_iter()
                .map(|&l| ctx.norm(&translate_factor(&p, factor, l)?.sub(&p)?, s + 3.0))
                .collect()
        };
        let (ng, nf) = (shifted(1)?, shifted(2)?);
        for (a, &l1) in config.l.iter().enumerate() {
            for (b, &l2) in config.l.iter().enumerate() {
                let cp = CocycleParams::new(l1, l2)?;
                let (g, f) = make_cocycle_pair(&p, &cp)?;
                let scale = tensor_l2_norm(&f).max(tensor_l2_norm(&g));
                worst_defect = worst_defect.max(cocycle_defect(&f, &g, &cp)? / scale);
                let q = solve_cocycle(&f, &g, &cp)?;
                worst_rt = worst_rt.max(tensor_l2_norm(&q.sub(&p)?) / tensor_l2_norm(&p));
                let ratio = tame_ratio_from_norms(np, nf[b], ng[a], &cp)?;
                keyed.push((
                    format!("member={k}"),
                    (l1 - 1.0).abs() + (l2 - 1.0).abs(),
                    ratio,
                ));
                let mut r = ExperimentRecord {
                    lambda: Some(l1),
                    l: Some(l2),
                    s: Some(s),
                    ..Default::default()
                }
                .with_norms(np, nf[b].max(ng[a]));
                r.ratio = Some(ratio);
                outcome.records.push(r);
            }
        }
    }
    outcome
        .checks
        .push(Check::at_most("cocycle round trip", worst_rt, 1e-10));
    outcome.checks.push(Check::at_most(
        "cocycle defect of constructed pairs",
        worst_defect,
        1e-13,
    ));
    // Calibration at (L1, L2) = (1, 1), i.e. distance 0 in the key above.
    outcome
        .checks
        .extend(calibration_checks("tame cocycle", &keyed, 0.0));

    let coarse_n = (grid.n_per_branch() - 1) / 2 + 1;
    let coarse = config.grid.build(coarse_n)?;
    for m in [1usize, 2] {
        let mut worst = 0.0f64;
        for &k in &config.member {
            let fine = elliptic_defect(&tensor_member(k, &grid, &grid)?, m, &ctx)?;
            let rough = elliptic_defect(&tensor_member(k, &coarse, &coarse)?, m, &ctx)?;
            worst = worst.max((fine / rough - 1.0).abs());
            if !fine.is_finite() {
                worst = f64::INFINITY;
            }
        }
        outcome.checks.push(Check::at_most(
            format!("elliptic defect m={m}: relative change under refinement"),
            worst,
            0.1,
        ));
    }
    Ok(outcome)
}

/// One quantity tracked over the configured resolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceCase {
    pub name: &'static str,
    /// Index written to the `s` column.
    pub case: usize,
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// Fitted order; `None` when every error sits at the rounding floor.
    pub order: Option<f64>,
    /// Required order, if any.
    pub min_order: Option<f64>,
}

/// Errors below this are treated as rounding.
pub const ROUNDING_FLOOR: f64 = 1e-13;

impl ConvergenceCase {
    fn new(
        name: &'static str,
        case: usize,
        h: Vec<f64>,
        errors: Vec<f64>,
        min_order: Option<f64>,
    ) -> Result<Self> {
        let exact = errors.iter().all(|&e| e <= ROUNDING_FLOOR);
        let order = if exact {
            None
        } else {
            let pts: Vec<(f64, f64)> = h.iter().copied().zip(errors.iter().copied()).collect();
            Some(exponent_fit(&pts)?)
        };
        Ok(Self {
            name,
            case,
            h,
            errors,
            order,
            min_order,
        })
    }

    pub fn exact(&self) -> bool {
        self.order.is_none()
    }

    fn records(&self) -> Vec<ExperimentRecord> {
        self.h
            .iter()
            .zip(&self.errors)
            .map(|(&h, &e)| ExperimentRecord {
                s: Some(self.case as f64),
                epsilon: Some(h),
                ratio: Some(e),
                slope: self.order,
                ..Default::default()
            })
            .collect()
    }

    fn check(&self) -> Option<Check> {
        match (self.order, self.min_order) {
            (Some(order), Some(min)) => {
                Some(Check::at_least(format!("{} order", self.name), order, min))
            }
            (None, _) => Some(Check::at_most(
                format!("{} (exact case, order fit skipped)", self.name),
                self.errors.iter().fold(0.0, |a: f64, &b| a.max(b)),
                ROUNDING_FLOOR,
            )),
            _ => None,
        }
    }
}

/// Quadrature, commutator and exact-solve errors over the configured
/// resolutions.
///
/// The quadrature reference is a Richardson extrapolation of the norm from
/// one extra level beyond the finest configured grid; the commutators have
/// exact value zero.
pub fn convergence_study(config: &ScanConfig) -> Result<Vec<ConvergenceCase>> {
    if config.grid.n.len() < 3 {
        return Err(Error::InvalidParameter(
            "field `grid.n`: the convergence study needs at least 3 resolutions".into(),
        ));
    }
    let grids: Vec<LogGrid> = config
        .grid
        .n
        .iter()
        .map(|&n| config.grid.build(n))
        .collect::<Result<_>>()?;
    let h: Vec<f64> = grids.iter().map(LogGrid::h).collect();
    let p = ReprParams::principal(config.nu[0]);

    // |f|^2 = exp(-xi^2) keeps a nonzero slope in u at the upper end, so the
    // trapezoid rule shows its h^2 term.
    let gaussian = |grid: &LogGrid| sample(grid, |xi| Complex64::new((-0.5 * xi * xi).exp(), 0.0));
    let finest = *config.grid.n.last().expect("checked above");
    let extra = config.grid.build(2 * finest - 1)?;
    let (a, b) = (
        l2nu_norm(&gaussian(grids.last().expect("non-empty"))?),
        l2nu_norm(&gaussian(&extra)?),
    );
    let reference = b + (b - a) / 3.0;
    let quad_err: Vec<f64> = grids
        .iter()
        .map(|g| gaussian(g).map(|f| (l2nu_norm(&f) - reference).abs()))
        .collect::<Result<_>>()?;

    let relations = commutation_relations();
    let comm_err: Vec<f64> = grids
        .par_iter()
        .map(|g| -> Result<f64> {
            // Negligible at both ends, so only interior stencils matter.
            let f = sample(g, |xi| {
                let u = xi.ln() + 2.5;
                Complex64::from_polar((-u * u / 0.32).exp(), 0.7 * u)
            })?;
            relations.iter().try_fold(0.0f64, |acc, (_, a, b, rhs)| {
                Ok(acc.max(commutator_defect(*a, *b, *rhs, &f, &p)?))
            })
        })
        .collect::<Result<_>>()?;

    let exact_err: Vec<f64> = grids
        .iter()
        .map(|g| -> Result<f64> {
            let lambda = 1.0;
            let phi = member(3).sample(g)?;
            let gg = phi.map_with_xi(|xi, z| z * (xi - lambda));
            let f = solve_twisted(&gg, &TwistParams::new(lambda)?)?;
            let lhs = &apply_field(&f, FieldTag::cal(Field::V), &p)?
                + &f.scale(Complex64::new(0.0, lambda));
            Ok(l2nu_norm(&(&lhs - &gg)) / l2nu_norm(&gg))
        })
        .collect::<Result<_>>()?;

    Ok(vec![
        ConvergenceCase::new("l2 quadrature", 0, h.clone(), quad_err, Some(1.75))?,
        ConvergenceCase::new("commutator defect", 1, h.clone(), comm_err, Some(3.5))?,
        ConvergenceCase::new("twisted solve of a factored g", 2, h, exact_err, None)?,
    ])
}
