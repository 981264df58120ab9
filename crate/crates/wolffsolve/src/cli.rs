//! Batch study front door: evaluate potentials, run solves and radial
//! studies, check conditions, and emit deterministic CSV/JSON tables.
//!
//! Exit codes: 0 success, 2 when a condition check certifies "fails" or a
//! supersolution search comes up empty (the report is still written),
//! 1 on input errors.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conditions::{
    deep_radial_probes, dyadic_origin_balls, energy_ball_ratio, pointwise_kappa, radial_existence,
    radial_ratio_report, weaker_ball_condition, ConditionReport, Verdict,
};
use crate::error::{Error, Result};
use crate::measure::{Measure, MollifiedAtom, Point, RadialSegment};
use crate::potential::{riesz, wolff, PotentialParams};
use crate::radial::{
    make_counterexample, make_powerlaw_example, radial_solve, radial_study, RadialGrid,
};
use crate::solver::{solve, NodeSet, SolveOptions, Solution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT_ERROR: i32 = 1;
pub const EXIT_CONDITION_FAILURE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eval,
    Solve,
    RadialStudy,
    CheckConditions,
    Counterexample,
}

#[derive(Debug, Clone)]
pub enum MeasureSource {
    Path(PathBuf),
    Builtin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A fully resolved study request; `run` is a pure function of it.
#[derive(Debug, Clone)]
pub struct StudySpec {
    pub command: Command,
    pub measure: MeasureSource,
    pub n: usize,
    pub alpha: Option<f64>,
    pub two_alpha: Option<f64>,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: Option<f64>,
    pub beta: Option<f64>,
    pub grid_per_decade: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub probes: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl StudySpec {
    fn effective_alpha(&self) -> Result<f64> {
        match (self.alpha, self.two_alpha) {
            (Some(a), None) => Ok(a),
            (None, Some(t)) => Ok(t / 2.0),
            (None, None) => Ok(0.5), // two_alpha = 1
            (Some(_), Some(_)) => Err(Error::invalid(
                "give either --alpha or --two-alpha, not both",
            )),
        }
    }

    fn params(&self) -> Result<PotentialParams> {
        PotentialParams::new(self.n, self.effective_alpha()?, self.p, self.q, self.r)
    }

    fn resolve_measure(&self) -> Result<Measure> {
        match &self.measure {
            MeasureSource::Path(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::invalid(format!("cannot read measure file {}: {e}", path.display()))
                })?;
                Measure::from_json_str(&text)
            }
            MeasureSource::Builtin(name) => {
                let two_alpha = 2.0 * self.effective_alpha()?;
                match name.as_str() {
                    "counterexample" => {
                        make_counterexample(self.n, two_alpha, self.q, self.beta.unwrap_or(2.0))
                    }
                    "powerlaw" => {
                        make_powerlaw_example(self.n, two_alpha, self.q, self.s.unwrap_or(1.5))
                    }
                    "lebesgue" => Measure::new(
                        self.n,
                        vec![RadialSegment::power(1.0, 0.0, 0.0, 1.0)],
                        vec![],
                    ),
                    "atom" => Measure::new(
                        self.n,
                        vec![],
                        vec![MollifiedAtom {
                            center: Point::origin(self.n),
                            mass: 1.0,
                            radius: 0.1,
                        }],
                    ),
                    "zero" => Ok(Measure::zero(self.n)),
                    other => Err(Error::invalid(format!(
                        "unknown builtin measure {other:?}; expected counterexample, powerlaw, lebesgue, atom or zero"
                    ))),
                }
            }
        }
    }
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        // shortest representation that round-trips
        format!("{v}")
    }
}

fn write_output(spec: &StudySpec, text: &str) -> Result<()> {
    match &spec.out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Log-spaced eval probes with a seeded multiplicative jitter.
fn eval_probe_radii(spec: &StudySpec, scale: f64) -> Vec<f64> {
    let count = spec.probes.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = (1e-3 * scale, 1e2 * scale);
    (0..count)
        .map(|i| {
            let base = lo * (hi / lo).powf(i as f64 / (count - 1) as f64);
            let jitter = ((rng.gen::<f64>() - 0.5) * 0.1).exp();
            base * jitter
        })
        .collect()
}

fn support_scale(m: &Measure) -> f64 {
    m.radial_support_range()
        .map(|(_, hi)| if hi.is_finite() { hi } else { 1.0 })
        .unwrap_or(1.0)
}

/// Run one study and return the process exit code.
pub fn run(spec: &StudySpec) -> Result<i32> {
    let m = spec.resolve_measure()?;
    let params = spec.params()?;
    match spec.command {
        Command::Eval => run_eval(spec, &m, &params),
        Command::Solve => run_solve(spec, &m, &params),
        Command::RadialStudy | Command::Counterexample => run_radial_study(spec, &m, &params),
        Command::CheckConditions => run_check_conditions(spec, &m, &params),
    }
}

fn run_eval(spec: &StudySpec, m: &Measure, params: &PotentialParams) -> Result<i32> {
    let scale = support_scale(m);
    let radii = eval_probe_radii(spec, scale);
    let two_alpha = 2.0 * params.alpha();
    let mut rows = Vec::with_capacity(radii.len());
    for rho in radii {
        let x = Point::radial(spec.n, rho);
        let w = wolff(m, params, &x)?.value;
        let i = if two_alpha < spec.n as f64 {
            riesz(m, two_alpha, &x)?.value
        } else {
            f64::NAN
        };
        rows.push((rho, w, i));
    }
    let text = match spec.format {
        OutputFormat::Csv => {
            let mut out = String::from("radius,wolff,riesz\n");
            for (rho, w, i) in &rows {
                writeln!(out, "{},{},{}", fmt_num(*rho), fmt_num(*w), fmt_num(*i)).unwrap();
            }
            out
        }
        OutputFormat::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|(rho, w, i)| {
                    serde_json::json!({"radius": rho, "wolff": json_num(*w), "riesz": json_num(*i)})
                })
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({ "rows": items }))? + "\n"
        }
    };
    write_output(spec, &text)?;
    Ok(EXIT_OK)
}

fn json_num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!(fmt_num(v))
    }
}

fn solution_csv(sol: &Solution) -> String {
    let mut out = String::from("node_radius_or_index,u,envelope_lower,envelope_upper,residual\n");
    let field = &sol.field;
    let labels: Vec<String> = match &field.nodes {
        NodeSet::Radial { radii } => radii.iter().map(|r| fmt_num(*r)).collect(),
        NodeSet::Atomic { labels } => labels.clone(),
    };
    for (i, label) in labels.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{}",
            label,
            fmt_num(field.values[i]),
            fmt_num(field.envelope_lower[i]),
            fmt_num(field.envelope_upper[i]),
            fmt_num(field.node_residuals.get(i).copied().unwrap_or(0.0)),
        )
        .unwrap();
    }
    out
}

fn run_solve(spec: &StudySpec, m: &Measure, params: &PotentialParams) -> Result<i32> {
    let opts = SolveOptions {
        nodes_per_decade: spec.grid_per_decade,
        tol: spec.tol,
        max_iter: spec.max_iter,
        ..Default::default()
    };
    let sol = solve(m, params, &opts)?;
    let envelope_failed = sol.envelope.c_super.is_none();
    let text = match spec.format {
        OutputFormat::Csv => solution_csv(&sol),
        OutputFormat::Json => {
            let field = serde_json::to_value(&sol.field)?;
            let body = serde_json::json!({
                "field": field,
                "sandwich": {"c_lower": sol.field.sandwich.0, "c_upper": sol.field.sandwich.1},
                "envelope": {
                    "kind": sol.envelope.kind,
                    "c_sub": sol.envelope.c_sub,
                    "c_super": sol.envelope.c_super,
                },
                "residual": sol.field.residual,
                "iterations": sol.field.iterations,
            });
            serde_json::to_string_pretty(&body)? + "\n"
        }
    };
    write_output(spec, &text)?;
    Ok(if envelope_failed {
        EXIT_CONDITION_FAILURE
    } else {
        EXIT_OK
    })
}

fn run_radial_study(spec: &StudySpec, m: &Measure, params: &PotentialParams) -> Result<i32> {
    let grid = RadialGrid::for_measure(m, spec.grid_per_decade, (1e-6, 1e3))?;
    let sol = radial_solve(m, params, &grid, spec.tol, spec.max_iter)?;
    let scale = support_scale(m);
    // fixed 8/decade study scales across [1e-5, 10] x scale
    let (lo, hi) = (1e-5 * scale, 10.0 * scale);
    let count = ((hi / lo).log10() * 8.0).ceil() as usize + 1;
    let scales: Vec<f64> = (0..count)
        .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
        .collect();
    let rows = radial_study(m, params, &sol, &scales)?;
    let text = match spec.format {
        OutputFormat::Csv => {
            let mut out =
                String::from("rho,u,k_term,tail_term,envelope,ratio_5_2,riesz_potential\n");
            for row in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    fmt_num(row.rho),
                    fmt_num(row.u),
                    fmt_num(row.k_term),
                    fmt_num(row.tail_term),
                    fmt_num(row.envelope),
                    fmt_num(row.ratio_5_2),
                    fmt_num(row.riesz_potential),
                )
                .unwrap();
            }
            out
        }
        OutputFormat::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "rho": r.rho,
                        "u": json_num(r.u),
                        "k_term": json_num(r.k_term),
                        "tail_term": json_num(r.tail_term),
                        "envelope": json_num(r.envelope),
                        "ratio_5_2": json_num(r.ratio_5_2),
                        "riesz_potential": json_num(r.riesz_potential),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({
                "rows": items,
                "residual": sol.field.residual,
                "iterations": sol.field.iterations,
                "sandwich": {"c_lower": sol.field.sandwich.0, "c_upper": sol.field.sandwich.1},
            }))? + "\n"
        }
    };
    write_output(spec, &text)?;
    Ok(EXIT_OK)
}

fn run_check_conditions(spec: &StudySpec, m: &Measure, params: &PotentialParams) -> Result<i32> {
    let scale = support_scale(m);
    let mut reports: Vec<ConditionReport> = Vec::new();
    let energy_probes: Vec<(Point, f64)> = dyadic_origin_balls(spec.n, 1, 10)
        .into_iter()
        .map(|(c, r)| (c, r * scale))
        .collect();
    reports.push(energy_ball_ratio(
        m,
        params,
        spec.s.unwrap_or(1.0),
        &energy_probes,
    )?);
    let kappa_probes: Vec<Point> = deep_radial_probes(spec.n)
        .iter()
        .map(|p| Point::radial(spec.n, p.norm() * scale))
        .collect();
    reports.push(pointwise_kappa(m, params, &kappa_probes)?);
    if m.is_radial() && params.p() == 2.0 {
        let weaker_probes: Vec<(Point, f64)> = dyadic_origin_balls(spec.n, 1, 8)
            .into_iter()
            .map(|(c, r)| (c, r * scale))
            .collect();
        reports.push(weaker_ball_condition(m, params, &weaker_probes)?);
        reports.push(radial_existence(m, params)?);
        let ratio_scales: Vec<f64> =
            [1e-2, 1e-3, 1e-4, 1e-5].iter().map(|r| r * scale).collect();
        reports.push(radial_ratio_report(m, params, &ratio_scales)?);
    }
    let any_failure = reports.iter().any(|r| r.verdict == Verdict::Fails);
    let body = serde_json::json!({
        "reports": reports.iter().map(|r| r.to_json()).collect::<Vec<_>>(),
        "any_failure": any_failure,
    });
    let text = serde_json::to_string_pretty(&body)? + "\n";
    write_output(spec, &text)?;
    Ok(if any_failure {
        EXIT_CONDITION_FAILURE
    } else {
        EXIT_OK
    })
}
