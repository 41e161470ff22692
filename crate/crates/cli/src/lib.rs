//! Scenario-driven front end: reads a JSON scenario, runs one analysis and
//! writes reports and figures to an output directory.

pub mod scenario;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use protoline::blowup::{blowup_zeros, lift_phi, BlowupZero};
use protoline::fields::{ProtoLineField, Vec2};
use protoline::index::{poincare_hopf_torus, winding_index_lf, IndexResult, PoincareHopfReport};
use protoline::linear::{Case, Darboux};
use protoline::metric::{build_metric, sample_metric, MetricSample};
use protoline::portrait::{make_portrait, Portrait};
use protoline::scan::{case_name, scan_family, ScanRow};
use protoline::singularity::{analyze_in, Flag, SingularityReport, Vanishing};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scenario::{Scenario, DEFAULT_SEED};

pub const DEFAULT_GRID: usize = 8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn numerical(check: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(format!("{check}: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Classify,
    Portrait,
    Scan,
    Index,
    Blowup,
    Metric,
    TorusCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Svg,
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    /// `None` picks the command's default outputs.
    pub format: Option<Format>,
    /// Overrides the scenario's parameter value.
    pub param: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// Everything ran, but some finding is degenerate.
    Degenerate,
    /// A check failed after its outputs were written.
    Failed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Failed => 3,
            Status::Degenerate => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub parameter: Option<ParamValue>,
    pub singularities: Vec<SingularityReport>,
    /// Sum of twice the indices over the singularities where it is known.
    pub twice_index_sum: i32,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(
        scenario: &Scenario,
        param: Option<f64>,
        singularities: Vec<SingularityReport>,
    ) -> Self {
        let twice_index_sum = singularities.iter().filter_map(|s| s.twice_index).sum();
        let all = |f: &dyn Fn(&SingularityReport) -> bool| singularities.iter().all(f);
        let checks = vec![
            Check {
                name: "indices_computed".into(),
                passed: all(&|s| s.twice_index.is_some()),
            },
            Check {
                name: "index_matches_class".into(),
                passed: all(&|s| match (s.darboux, s.twice_index) {
                    (Some(Darboux::Star), Some(k)) => k == -1,
                    (Some(_), Some(k)) => k == 1,
                    _ => true,
                }),
            },
            Check {
                name: "hyperbolic".into(),
                passed: all(&|s| !s.flags.contains(&Flag::NonHyperbolic)),
            },
            Check {
                name: "darbouxian".into(),
                passed: all(&|s| s.case != Case::Degenerate),
            },
        ];
        Report {
            scenario: scenario.display_name().to_string(),
            parameter: scenario
                .param(param)
                .map(|(name, value)| ParamValue { name, value }),
            singularities,
            twice_index_sum,
            checks,
        }
    }

    pub fn status(&self) -> Status {
        if self.singularities.iter().any(|s| s.is_degenerate()) {
            Status::Degenerate
        } else {
            Status::Ok
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupRecord {
    pub location: [f64; 2],
    pub class: String,
    pub zeros: Vec<BlowupZero>,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scenario: String,
    pub spd_fraction: f64,
    pub max_parallelogram_residual: f64,
    /// Sample points where the bracket frame fails to span.
    pub degenerate_points: Vec<[f64; 2]>,
}

struct Run<'a> {
    scenario: &'a Scenario,
    opts: &'a Options,
    files: Vec<PathBuf>,
}

impl Run<'_> {
    fn grid(&self) -> usize {
        self.opts
            .grid
            .or(self.scenario.grid)
            .unwrap_or(DEFAULT_GRID)
    }

    fn seed(&self) -> u64 {
        self.opts
            .seed
            .or(self.scenario.seed)
            .unwrap_or(DEFAULT_SEED)
    }

    fn field(&self) -> Result<ProtoLineField, CliError> {
        self.scenario.field(self.opts.param, self.seed())
    }

    fn wants(&self, f: Format, default: &[Format]) -> bool {
        match self.opts.format {
            Some(g) => g == f,
            None => default.contains(&f),
        }
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.opts.out.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn analyze(&self, l: &ProtoLineField) -> Result<Vec<SingularityReport>, CliError> {
        analyze_in(l, &l.domain, self.grid()).map_err(|e| numerical("singularity analysis", e))
    }
}

/// Runs `cmd` on the scenario at `config`, writing into `opts.out`.
pub fn run(cmd: Command, config: &Path, opts: &Options) -> Result<Outcome, CliError> {
    let scenario = Scenario::load(config)?;
    run_scenario(cmd, &scenario, opts)
}

pub fn run_scenario(
    cmd: Command,
    scenario: &Scenario,
    opts: &Options,
) -> Result<Outcome, CliError> {
    if opts.grid == Some(0) {
        return Err(CliError::Config("`--grid` must be positive".into()));
    }
    if opts.format == Some(Format::Svg) && cmd != Command::Portrait {
        return Err(CliError::Config(
            "svg output is only available for `portrait`".into(),
        ));
    }
    fs::create_dir_all(&opts.out).map_err(|source| CliError::Io {
        path: opts.out.clone(),
        source,
    })?;
    let mut run = Run {
        scenario,
        opts,
        files: Vec::new(),
    };
    let (status, summary) = match cmd {
        Command::Classify => classify(&mut run)?,
        Command::Portrait => portrait(&mut run)?,
        Command::Scan => scan(&mut run)?,
        Command::Index => index(&mut run)?,
        Command::Blowup => blowup(&mut run)?,
        Command::Metric => metric(&mut run)?,
        Command::TorusCheck => torus_check(&mut run)?,
    };
    Ok(Outcome {
        status,
        files: run.files,
        summary,
    })
}

fn summarize(report: &Report) -> String {
    let classes: Vec<String> = report
        .singularities
        .iter()
        .map(|s| {
            format!(
                "{} at ({:.6}, {:.6})",
                s.class_name(),
                s.location[0],
                s.location[1]
            )
        })
        .collect();
    format!("{} singularities: {}", classes.len(), classes.join(", "))
}

fn classify(run: &mut Run) -> Result<(Status, String), CliError> {
    let l = run.field()?;
    let report = Report::new(run.scenario, run.opts.param, run.analyze(&l)?);
    if run.wants(Format::Json, &[Format::Json]) {
        run.write_json("report.json", &report)?;
    }
    if run.wants(Format::Csv, &[]) {
        run.write("report.csv", &report_csv(&report.singularities)?)?;
    }
    Ok((report.status(), summarize(&report)))
}

fn portrait(run: &mut Run) -> Result<(Status, String), CliError> {
    let l = run.field()?;
    let opts = run.scenario.portrait_options(run.grid());
    let p = make_portrait(&l, l.domain.bounds(), &opts).map_err(|e| numerical("portrait", e))?;
    let report = Report::new(run.scenario, run.opts.param, p.singularities.clone());
    if run.wants(Format::Svg, &[Format::Svg, Format::Csv]) {
        let title = match &report.parameter {
            Some(pv) => format!("{} ({} = {})", report.scenario, pv.name, pv.value),
            None => report.scenario.clone(),
        };
        run.write("portrait.svg", svg::render(&p, &title).as_bytes())?;
    }
    if run.wants(Format::Csv, &[Format::Svg, Format::Csv]) {
        run.write("streamlines.csv", &streamlines_csv(&p)?)?;
        run.write("report.csv", &report_csv(&p.singularities)?)?;
    }
    if run.wants(Format::Json, &[]) {
        run.write_json("portrait.json", &p)?;
    }
    let summary = format!(
        "{}; {} streamlines, {} skeleton curves",
        summarize(&report),
        p.streamlines.len(),
        p.skeleton.len()
    );
    Ok((report.status(), summary))
}

fn scan(run: &mut Run) -> Result<(Status, String), CliError> {
    let values = run.scenario.scan_values()?;
    let spec = run.scenario.scan.as_ref().expect("scan_values checked");
    let seed = run.seed();
    let fields = values
        .iter()
        .map(|&v| run.scenario.field(Some(v), seed))
        .collect::<Result<Vec<_>, _>>()?;
    let mut it = fields.into_iter();
    let point = Vec2::new(spec.point[0], spec.point[1]);
    let rows = scan_family(&values, point, spec.radius, |_| {
        Ok(it.next().expect("one per value"))
    })
    .map_err(|e| numerical("scan", e))?;
    if run.wants(Format::Csv, &[Format::Csv]) {
        run.write("scan.csv", &scan_csv(&rows)?)?;
    }
    if run.wants(Format::Json, &[]) {
        run.write_json("scan.json", &rows)?;
    }
    let transitions = rows.iter().filter(|r| r.transition).count();
    Ok((
        Status::Ok,
        format!("{} rows, {transitions} transitions", rows.len()),
    ))
}

fn index(run: &mut Run) -> Result<(Status, String), CliError> {
    let l = run.field()?;
    let results: Vec<IndexResult> = match &run.scenario.index {
        Some(ix) => {
            let c = Vec2::new(ix.center[0], ix.center[1]);
            vec![winding_index_lf(&l, c, ix.radius, ix.samples)
                .map_err(|e| numerical("index", e))?]
        }
        None => run
            .analyze(&l)?
            .iter()
            .map(|s| {
                winding_index_lf(&l, s.p(), s.index_radius, 256).map_err(|e| numerical("index", e))
            })
            .collect::<Result<_, _>>()?,
    };
    if run.wants(Format::Json, &[Format::Json]) {
        run.write_json("index.json", &results)?;
    }
    if run.wants(Format::Csv, &[]) {
        let mut w = csv_writer();
        w.write_record([
            "x",
            "y",
            "radius",
            "samples",
            "twice_index",
            "index",
            "max_step",
        ])
        .map_err(csv_err)?;
        for r in &results {
            w.write_record([
                num(r.center[0]),
                num(r.center[1]),
                num(r.radius),
                r.samples.to_string(),
                r.twice_index.to_string(),
                num(r.index()),
                num(r.max_step),
            ])
            .map_err(csv_err)?;
        }
        run.write("index.csv", &finish(w)?)?;
    }
    let sum: i32 = results.iter().map(|r| r.twice_index).sum();
    Ok((
        Status::Ok,
        format!("{} loops, index sum {}", results.len(), sum as f64 / 2.0),
    ))
}

fn blowup(run: &mut Run) -> Result<(Status, String), CliError> {
    let l = run.field()?;
    let spec = run.scenario.blowup;
    let mut records = Vec::new();
    let mut degenerate = false;
    for s in run.analyze(&l)? {
        if s.vanishing == Vanishing::Both || s.normal_form.is_none() {
            degenerate = true;
            continue;
        }
        let b = lift_phi(&l, s.p(), spec.delta, (spec.radii, spec.thetas))
            .map_err(|e| numerical("blow-up lift", e))?;
        let (class, zeros) = blowup_zeros(&b).map_err(|e| numerical("blow-up zeros", e))?;
        degenerate |= class.case == Case::Degenerate;
        records.push(BlowupRecord {
            location: s.location,
            class: case_name(Some(class.case)).to_string(),
            max_rel_error: zeros.iter().map(|z| z.rel_error).fold(0.0, f64::max),
            zeros,
        });
    }
    if run.wants(Format::Json, &[Format::Json]) {
        run.write_json("blowup.json", &records)?;
    }
    if run.wants(Format::Csv, &[]) {
        let mut w = csv_writer();
        w.write_record([
            "singularity",
            "x",
            "y",
            "class",
            "theta",
            "kind",
            "stability",
            "rel_error",
        ])
        .map_err(csv_err)?;
        for (i, r) in records.iter().enumerate() {
            for z in &r.zeros {
                w.write_record([
                    i.to_string(),
                    num(r.location[0]),
                    num(r.location[1]),
                    r.class.clone(),
                    num(z.theta),
                    format!("{:?}", z.kind),
                    format!("{:?}", z.stability),
                    num(z.rel_error),
                ])
                .map_err(csv_err)?;
            }
        }
        run.write("blowup.csv", &finish(w)?)?;
    }
    let status = if degenerate {
        Status::Degenerate
    } else {
        Status::Ok
    };
    let zeros: usize = records.iter().map(|r| r.zeros.len()).sum();
    Ok((
        status,
        format!(
            "{} singularities blown up, {zeros} zeros on r = 0",
            records.len()
        ),
    ))
}

fn metric(run: &mut Run) -> Result<(Status, String), CliError> {
    let (x, y) = run.scenario.vector_fields(run.opts.param, run.seed())?;
    let m = build_metric(&x, &y);
    let n = run.opts.grid.unwrap_or(run.scenario.sample.n);
    let sample: MetricSample = sample_metric(&m, &run.scenario.domain().bounds(), n)
        .map_err(|e| numerical("metric sampling", e))?;
    let report = MetricReport {
        scenario: run.scenario.display_name().to_string(),
        spd_fraction: sample.spd_fraction,
        max_parallelogram_residual: sample.max_parallelogram_residual,
        degenerate_points: sample
            .points
            .iter()
            .filter(|p| p.g.is_none())
            .map(|p| p.point)
            .collect(),
    };
    if run.wants(Format::Json, &[Format::Json, Format::Csv]) {
        run.write_json("metric.json", &report)?;
    }
    if run.wants(Format::Csv, &[Format::Json, Format::Csv]) {
        let mut w = csv_writer();
        w.write_record([
            "x",
            "y",
            "r4",
            "g11",
            "g12",
            "g22",
            "parallelogram_residual",
        ])
        .map_err(csv_err)?;
        for p in &sample.points {
            let g = |i: usize| p.g.map(|g| num(g[i])).unwrap_or_default();
            w.write_record([
                num(p.point[0]),
                num(p.point[1]),
                num(p.r4),
                g(0),
                g(1),
                g(2),
                p.parallelogram_residual.map(num).unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        run.write("metric.csv", &finish(w)?)?;
    }
    let summary = format!(
        "SPD at {:.1}% of {} samples, {} degenerate",
        100.0 * report.spd_fraction,
        sample.points.len(),
        report.degenerate_points.len()
    );
    let status = if report.spd_fraction == 0.0 {
        Status::Failed
    } else {
        Status::Ok
    };
    Ok((status, summary))
}

fn torus_check(run: &mut Run) -> Result<(Status, String), CliError> {
    let l = run.field()?;
    if !matches!(run.scenario.domain, scenario::DomainSpec::Torus { .. }) {
        return Err(CliError::Config("torus-check needs a torus domain".into()));
    }
    let report: PoincareHopfReport =
        poincare_hopf_torus(&l, run.grid()).map_err(|e| numerical("torus index sum", e))?;
    if run.wants(Format::Json, &[Format::Json]) {
        run.write_json("torus.json", &report)?;
    }
    if run.wants(Format::Csv, &[]) {
        let mut w = csv_writer();
        w.write_record(["x", "y", "twice_index"]).map_err(csv_err)?;
        for s in &report.singularities {
            w.write_record([num(s.point[0]), num(s.point[1]), s.twice_index.to_string()])
                .map_err(csv_err)?;
        }
        run.write("torus.csv", &finish(w)?)?;
    }
    let status = if report.holds {
        Status::Ok
    } else {
        Status::Failed
    };
    Ok((
        status,
        format!(
            "{} singularities, index sum {}",
            report.singularities.len(),
            report.twice_index_sum as f64 / 2.0
        ),
    ))
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Numerical(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner()
        .map_err(|e| CliError::Numerical(format!("csv: {e}")))
}

/// Shortest decimal that round-trips.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn joined(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(num).collect::<Vec<_>>().join(";")
}

pub const STREAMLINE_COLUMNS: [&str; 4] = ["curve_id", "point_index", "x", "y"];

pub fn streamlines_csv(p: &Portrait) -> Result<Vec<u8>, CliError> {
    let mut w = csv_writer();
    w.write_record(STREAMLINE_COLUMNS).map_err(csv_err)?;
    for (id, s) in p.curves().enumerate() {
        for (i, q) in s.points.iter().enumerate() {
            w.write_record([id.to_string(), i.to_string(), num(q[0]), num(q[1])])
                .map_err(csv_err)?;
        }
    }
    finish(w)
}

pub const REPORT_COLUMNS: [&str; 13] = [
    "id",
    "x",
    "y",
    "vanishing",
    "zero_type",
    "twice_index",
    "case",
    "class",
    "kappa",
    "big_phi",
    "fixed_point_angles",
    "fixed_point_slopes",
    "flags",
];

pub fn report_csv(rows: &[SingularityReport]) -> Result<Vec<u8>, CliError> {
    let mut w = csv_writer();
    w.write_record(REPORT_COLUMNS).map_err(csv_err)?;
    for (id, s) in rows.iter().enumerate() {
        let flags: Vec<String> = s.flags.iter().map(flag_name).collect();
        w.write_record([
            id.to_string(),
            num(s.location[0]),
            num(s.location[1]),
            format!("{:?}", s.vanishing),
            format!("{:?}", s.zero_type),
            s.twice_index.map(|k| k.to_string()).unwrap_or_default(),
            format!("{:?}", s.case),
            s.class_name().to_string(),
            s.kappa.map(num).unwrap_or_default(),
            s.big_phi.map(num).unwrap_or_default(),
            joined(s.fixed_points.iter().map(|f| f.theta)),
            joined(s.fixed_points.iter().map(|f| f.slope)),
            flags.join(";"),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

fn flag_name(f: &Flag) -> String {
    match f {
        Flag::BothVanish => "both_vanish".into(),
        Flag::NonHyperbolic => "non_hyperbolic".into(),
        Flag::NonGeneric => "non_generic".into(),
        Flag::Marginal => "marginal".into(),
        Flag::Inconsistent(d) => format!("inconsistent: {d}"),
        Flag::IndexFailed(d) => format!("index_failed: {d}"),
        Flag::IndexMismatch => "index_mismatch".into(),
    }
}

pub const SCAN_COLUMNS: [&str; 11] = [
    "param",
    "class",
    "fixed_points",
    "slopes",
    "convention_class",
    "convention_fixed_points",
    "convention_slopes",
    "convention_slope_at_zero",
    "marginal",
    "transition",
    "error",
];

pub fn scan_csv(rows: &[ScanRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv_writer();
    w.write_record(SCAN_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            num(r.param),
            case_name(Some(r.case)).to_string(),
            r.fixed_points.to_string(),
            joined(r.slopes.iter().copied()),
            case_name(r.convention_case).to_string(),
            r.convention_fixed_points.to_string(),
            joined(r.convention_slopes.iter().copied()),
            num(r.convention_slope_at_zero),
            r.marginal.to_string(),
            r.transition.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}
