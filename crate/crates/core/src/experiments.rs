use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::benchmarking::{extract_interleaved_error, fit_points, rb_run, write_rb_csv, RbConfig};
use crate::circuit::{Census, Circuit};
use crate::compiler::{
    compile_evolution, compile_plans, compile_trotter_step, compile_zz_block, digitize_schedule, plan_for_model,
    EchoAxis, Ordering, Profile, Schedule,
};
use crate::fermion::{spin_hamiltonian, FermionModel};
use crate::linalg::phase_insensitive_overlap;
use crate::pauli::WeightedPauliSum;
use crate::simulator::{
    accessible_subspace, apply_circuit, error_budget, exact_evolve, mode_occupations, other_population, prepare_input,
    state_fidelity, InputKind, NoiseModel, PrepMethod, PureState, State,
};
use crate::tomography::anticommutation_experiment;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Fig3,
    Fig4_3mode,
    Fig4_4mode,
    Fig5_2mode,
    Fig5_3mode,
    DigitalErrorS4,
    DigitalErrorS5,
    RbS3,
    AnticommutationFig2d,
    CensusTableS1,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 10] = [
        ExperimentId::Fig3,
        ExperimentId::Fig4_3mode,
        ExperimentId::Fig4_4mode,
        ExperimentId::Fig5_2mode,
        ExperimentId::Fig5_3mode,
        ExperimentId::DigitalErrorS4,
        ExperimentId::DigitalErrorS5,
        ExperimentId::RbS3,
        ExperimentId::AnticommutationFig2d,
        ExperimentId::CensusTableS1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4_3mode => "fig4_3mode",
            ExperimentId::Fig4_4mode => "fig4_4mode",
            ExperimentId::Fig5_2mode => "fig5_2mode",
            ExperimentId::Fig5_3mode => "fig5_3mode",
            ExperimentId::DigitalErrorS4 => "digital_error_s4",
            ExperimentId::DigitalErrorS5 => "digital_error_s5",
            ExperimentId::RbS3 => "rb_s3",
            ExperimentId::AnticommutationFig2d => "anticommutation_fig2d",
            ExperimentId::CensusTableS1 => "census_table_s1",
        }
    }

    fn default_steps(self) -> usize {
        match self {
            ExperimentId::Fig3 => 8,
            ExperimentId::Fig4_3mode | ExperimentId::DigitalErrorS4 => 3,
            ExperimentId::Fig4_4mode => 4,
            ExperimentId::Fig5_2mode => 2,
            ExperimentId::Fig5_3mode => 1,
            _ => 1,
        }
    }

    fn default_ordering(self) -> Ordering {
        match self {
            ExperimentId::Fig4_4mode => Ordering::OddEvenS6,
            _ => Ordering::CanonicalS5,
        }
    }

    fn uses_steps(self) -> bool {
        !matches!(
            self,
            ExperimentId::RbS3 | ExperimentId::AnticommutationFig2d | ExperimentId::CensusTableS1
        )
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::config("experiment", format!("unknown experiment id '{s}'")))
    }
}

/// Model coefficients. Three modes use `v` and `u`; four modes use
/// V₁ = `v`, V₂ = `v2` (default `v`), U_y = `u`, U_x = `u_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default = "one")]
    pub v: f64,
    #[serde(default = "one")]
    pub u: f64,
    #[serde(default)]
    pub v2: Option<f64>,
    #[serde(default)]
    pub u_x: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            v: 1.0,
            u: 1.0,
            v2: None,
            u_x: 0.0,
        }
    }
}

impl ModelParams {
    fn model(&self, modes: usize) -> Result<FermionModel> {
        let m = match modes {
            2 => FermionModel::two_mode(self.v, self.u),
            3 => FermionModel::three_mode_chain(self.v, self.u),
            4 => FermionModel::asymmetric_hubbard(self.v, self.v2.unwrap_or(self.v), self.u_x, self.u),
            m => return Err(Error::config("model", format!("unsupported mode count {m}"))),
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let fields = [("model.v", self.v), ("model.u", self.u), ("model.u_x", self.u_x)];
        for (name, x) in fields.into_iter().chain(self.v2.map(|x| ("model.v2", x))) {
            if !x.is_finite() {
                return Err(Error::config(name, "must be finite"));
            }
        }
        Ok(())
    }
}

/// Everything a run needs. Unset optional fields take per-experiment
/// defaults; `noise_scale` multiplies the reference gate errors, 0 meaning
/// noiseless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub noise_scale: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ordering: Option<String>,
    #[serde(default)]
    pub model: ModelParams,
    /// Simulated end time for the two-mode run.
    #[serde(default)]
    pub total_time: Option<f64>,
    /// Time per step for the three- and four-mode runs.
    #[serde(default)]
    pub step_time: Option<f64>,
    /// Ramp for the time-dependent runs; `steps` there counts steps per run.
    #[serde(default)]
    pub schedule: Option<Schedule>,
    /// Number of evaluation times of the time-dependent runs, endpoints included.
    #[serde(default)]
    pub time_points: Option<usize>,
    #[serde(default)]
    pub rb: Option<RbConfig>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        Self {
            experiment,
            steps: None,
            noise_scale: 0.0,
            seed: 0,
            ordering: None,
            model: ModelParams::default(),
            total_time: None,
            step_time: None,
            schedule: None,
            time_points: None,
            rb: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or_else(|| self.experiment.default_steps())
    }

    pub fn ordering(&self) -> Result<Ordering> {
        match &self.ordering {
            None => Ok(self.experiment.default_ordering()),
            Some(s) => s
                .parse()
                .map_err(|_| Error::config("ordering", format!("expected s5 or s6, got '{s}'"))),
        }
    }

    pub fn noise(&self) -> Result<Option<NoiseModel>> {
        if self.noise_scale == 0.0 {
            Ok(None)
        } else {
            NoiseModel::reference().scaled(self.noise_scale).map(Some)
        }
    }

    pub fn total_time(&self) -> f64 {
        self.total_time.unwrap_or(5.0)
    }

    pub fn step_time(&self) -> f64 {
        self.step_time.unwrap_or(1.0)
    }

    /// Ordering for a series with `modes` modes: the configured one, else
    /// odd/even for four modes and canonical otherwise.
    pub fn ordering_for(&self, modes: usize) -> Result<Ordering> {
        match &self.ordering {
            Some(_) => self.ordering(),
            None if modes == 4 => Ok(Ordering::OddEvenS6),
            None => Ok(Ordering::CanonicalS5),
        }
    }

    /// Steps per time-dependent run: explicit `steps`, else the schedule's own.
    pub fn schedule_steps(&self) -> usize {
        match (self.steps, &self.schedule) {
            (Some(n), _) => n,
            (None, Some(s)) => s.steps,
            (None, None) => self.experiment.default_steps(),
        }
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule.clone().unwrap_or_else(default_ramp)
    }

    pub fn time_points(&self) -> usize {
        self.time_points.unwrap_or(13)
    }

    pub fn rb_config(&self) -> RbConfig {
        let mut cfg = self.rb.clone().unwrap_or_default();
        cfg.seed = self.seed;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.uses_steps() && self.steps() == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(Error::config("noise_scale", "must be finite and non-negative"));
        }
        self.noise()?;
        self.ordering()?;
        self.model.validate()?;
        for (name, t) in [("total_time", self.total_time), ("step_time", self.step_time)] {
            if let Some(t) = t {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Error::config(name, "must be finite and positive"));
                }
            }
        }
        if let Some(s) = &self.schedule {
            s.validate().map_err(|e| Error::config("schedule", e.to_string()))?;
        }
        if self.time_points() < 2 {
            return Err(Error::config("time_points", "must be at least 2"));
        }
        if let Some(rb) = &self.rb {
            if rb.k_sequences == 0 || rb.m_values.is_empty() {
                return Err(Error::config("rb", "need at least one length and one sequence"));
            }
        }
        Ok(())
    }
}

/// Hopping off until t = 1, linear ramp to 1 by t = 2, then held; U ≡ 1.
pub fn default_ramp() -> Schedule {
    Schedule {
        total_time: 3.0,
        hopping: Profile(vec![(0.0, 0.0), (1.0, 0.0), (2.0, 1.0), (3.0, 1.0)]),
        repulsion: Profile::constant(1.0),
        steps: 2,
    }
}

/// Observables of one evaluation time. `fidelity` compares against the
/// noiseless compiled circuit, `fidelity_exact` against exact evolution, both
/// on basis probabilities. `overlap` is ⟨ψ|ρ|ψ⟩ with the noiseless circuit's
/// state, which also sees phase errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesRow {
    pub time: f64,
    pub occupations: Vec<f64>,
    pub other: f64,
    pub fidelity: f64,
    pub fidelity_exact: f64,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Series {
    pub modes: usize,
    pub rows: Vec<SeriesRow>,
}

impl Series {
    pub fn header(modes: usize) -> Vec<String> {
        let mut h = vec!["time".to_string()];
        h.extend((1..=modes).map(|k| format!("P_mode{k}")));
        h.extend(["P_other", "fidelity", "fidelity_exact", "overlap"].map(String::from));
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::header(self.modes))?;
        for r in &self.rows {
            let mut rec = vec![r.time.to_string()];
            rec.extend(r.occupations.iter().map(f64::to_string));
            rec.extend([r.other, r.fidelity, r.fidelity_exact, r.overlap].map(|x| x.to_string()));
            w.write_record(rec)?;
        }
        finish_csv(w)
    }

    pub fn fidelities(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.fidelity).collect()
    }

    pub fn exact_fidelities(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.fidelity_exact).collect()
    }

    pub fn overlaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.overlap).collect()
    }
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numerical(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(format!("csv encoding: {e}")))
}

fn input_kind(modes: usize) -> Result<InputKind> {
    match modes {
        2 => Ok(InputKind::TwoMode),
        3 => Ok(InputKind::ThreeMode),
        4 => Ok(InputKind::FourMode),
        m => Err(Error::config("model", format!("no input state for {m} modes"))),
    }
}

/// Shared state of one simulated series: the ideal input, the subspace the
/// ideal dynamics can reach, and the gate noise.
struct Evaluator {
    modes: usize,
    input: PureState,
    accessible: Vec<bool>,
    noise: Option<NoiseModel>,
}

impl Evaluator {
    fn new(modes: usize, reach: &WeightedPauliSum, noise: Option<NoiseModel>) -> Result<Self> {
        let input = prepare_input(input_kind(modes)?, PrepMethod::Direct)?;
        let accessible = accessible_subspace(reach, &input.probabilities())?;
        Ok(Self {
            modes,
            input,
            accessible,
            noise,
        })
    }

    fn row(&self, time: f64, circ: &Circuit, exact: &PureState) -> Result<SeriesRow> {
        let start = State::Pure(self.input.clone());
        let ideal_state = apply_circuit(&start, circ, None)?;
        let ideal = ideal_state.probabilities();
        let (measured, overlap) = match (&self.noise, &ideal_state) {
            (Some(nm), State::Pure(psi)) => {
                let rho = apply_circuit(&start, circ, Some(nm))?.to_density();
                let v = DVector::from_column_slice(psi.amplitudes());
                (rho.probabilities(), (v.adjoint() * rho.rho() * &v)[(0, 0)].re)
            }
            _ => (ideal.clone(), 1.0),
        };
        Ok(SeriesRow {
            time,
            occupations: mode_occupations(&measured, self.modes),
            other: other_population(&measured, &self.accessible),
            fidelity: state_fidelity(&ideal, &measured)?,
            fidelity_exact: state_fidelity(&exact.probabilities(), &measured)?,
            overlap,
        })
    }
}

/// Least-squares slope of y against x.
pub fn linear_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Circuit for `k` steps of length `dt`; the empty circuit for k = 0.
fn prefix_circuit(model: &FermionModel, dt: f64, k: usize, ordering: &Ordering) -> Result<Circuit> {
    if k == 0 {
        return Ok(Circuit::new(model.modes));
    }
    compile_evolution(&plan_for_model(model, dt * k as f64, k, ordering.clone())?)
}

/// Time-independent run sampled after every step, k = 0..=steps.
pub fn constant_series(
    model: &FermionModel,
    dt: f64,
    steps: usize,
    ordering: &Ordering,
    noise: Option<NoiseModel>,
) -> Result<Series> {
    let h = spin_hamiltonian(model)?;
    let eval = Evaluator::new(model.modes, &h, noise)?;
    let rows = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let t = dt * k as f64;
            let circ = prefix_circuit(model, dt, k, ordering)?;
            eval.row(t, &circ, &exact_evolve(&h, t, &eval.input)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Series {
        modes: model.modes,
        rows,
    })
}

/// End state at fixed time `t` for each step count in `counts`; the row time
/// is the step count's Δt.
pub fn end_state_series(
    model: &FermionModel,
    t: f64,
    counts: &[usize],
    ordering: &Ordering,
    noise: Option<NoiseModel>,
) -> Result<Series> {
    let h = spin_hamiltonian(model)?;
    let eval = Evaluator::new(model.modes, &h, noise)?;
    let exact = exact_evolve(&h, t, &eval.input)?;
    let rows = counts
        .par_iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::config("steps", "must be at least 1"));
            }
            let circ = compile_evolution(&plan_for_model(model, t, n, ordering.clone())?)?;
            eval.row(t / n as f64, &circ, &exact)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Series {
        modes: model.modes,
        rows,
    })
}

/// Exact evolution under the ramp up to time `t`, by midpoint substeps
/// fine enough that the remaining error is far below plotted precision.
pub fn exact_schedule_evolve(s: &Schedule, modes: usize, t: f64, state: &PureState) -> Result<PureState> {
    const SUBSTEPS_PER_UNIT: f64 = 400.0;
    let m = ((t * SUBSTEPS_PER_UNIT).ceil() as usize).max(1);
    let h = t / m as f64;
    let mut psi = state.clone();
    for j in 0..m {
        let mid = (j as f64 + 0.5) * h;
        let model = crate::compiler::model_for(modes, s.hopping.value(mid), s.repulsion.value(mid))?;
        psi = exact_evolve(&spin_hamiltonian(&model)?, h, &psi)?;
    }
    Ok(psi)
}

/// Time-dependent run evaluated at `points` equally spaced times over the
/// ramp; each time uses its own `steps`-step digitization of [0, t].
pub fn schedule_series(
    s: &Schedule,
    modes: usize,
    steps: usize,
    points: usize,
    ordering: &Ordering,
    noise: Option<NoiseModel>,
) -> Result<(Series, Circuit)> {
    s.validate()?;
    if points < 2 {
        return Err(Error::config("time_points", "must be at least 2"));
    }
    let reach = spin_hamiltonian(&crate::compiler::model_for(modes, 1.0, 1.0)?)?;
    let eval = Evaluator::new(modes, &reach, noise)?;
    let times: Vec<f64> = (0..points)
        .map(|j| s.total_time * j as f64 / (points - 1) as f64)
        .collect();
    let results = times
        .par_iter()
        .map(|&t| -> Result<(SeriesRow, Circuit)> {
            let circ = if t == 0.0 {
                Circuit::new(modes)
            } else {
                compile_plans(&digitize_schedule(&s.truncated(t), steps, modes, ordering.clone())?)?
            };
            let exact = exact_schedule_evolve(s, modes, t, &eval.input)?;
            Ok((eval.row(t, &circ, &exact)?, circ))
        })
        .collect::<Result<Vec<_>>>()?;
    let last = results
        .last()
        .map(|(_, c)| c.clone())
        .unwrap_or_else(|| Circuit::new(modes));
    Ok((
        Series {
            modes,
            rows: results.into_iter().map(|(r, _)| r).collect(),
        },
        last,
    ))
}

/// Files of one run, keyed by file name, plus its summary record.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub files: BTreeMap<String, String>,
    pub summary: BTreeMap<String, Value>,
}

impl RunOutput {
    fn new(cfg: &ExperimentConfig) -> Self {
        let mut summary = BTreeMap::new();
        summary.insert("experiment".into(), json!(cfg.experiment.name()));
        summary.insert("noise_scale".into(), json!(cfg.noise_scale));
        summary.insert("seed".into(), json!(cfg.seed));
        Self {
            files: BTreeMap::new(),
            summary,
        }
    }

    fn set(&mut self, key: &str, value: Value) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)? + "\n")
    }

    /// Writes every file and `summary.json` into `dir`, creating it.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        std::fs::write(dir.join("summary.json"), self.summary_json()?)?;
        Ok(())
    }
}

fn ordering_name(o: &Ordering) -> String {
    match o {
        Ordering::CanonicalS5 => "s5".into(),
        Ordering::OddEvenS6 => "s6".into(),
        Ordering::Custom(labels) => labels.join(","),
    }
}

fn census_value(c: &Census) -> Result<Value> {
    let mut v = serde_json::to_value(c)?;
    v["total"] = json!(c.total());
    Ok(v)
}

/// Census and reference-noise budget of the first step of a model.
fn step_record(model: &FermionModel, dt: f64, ordering: &Ordering) -> Result<(Census, Value)> {
    let step = compile_trotter_step(&plan_for_model(model, dt, 1, ordering.clone())?, 1)?;
    let census = step.census();
    let budget = error_budget(&census, &NoiseModel::reference());
    Ok((
        census,
        json!({ "census": census_value(&census)?, "budget_reference": budget }),
    ))
}

/// Per-step fidelity drop: the negated slope of fidelity against step count.
fn per_step_drop(steps: &[f64], fidelity: &[f64]) -> Value {
    linear_slope(steps, fidelity).map_or(Value::Null, |s| json!(-s))
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_other(series: &Series) -> f64 {
    series.rows.iter().map(|r| r.other).fold(0.0, f64::max)
}

fn end_state_csv(counts: &[usize], series: &Series) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["steps".to_string(), "dt".to_string()];
    header.extend(Series::header(series.modes).into_iter().skip(1));
    w.write_record(header)?;
    for (n, r) in counts.iter().zip(&series.rows) {
        let mut rec = vec![n.to_string(), r.time.to_string()];
        rec.extend(r.occupations.iter().map(f64::to_string));
        rec.extend([r.other, r.fidelity, r.fidelity_exact, r.overlap].map(|x| x.to_string()));
        w.write_record(rec)?;
    }
    finish_csv(w)
}

fn run_fig3(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg);
    let (n, t, ordering, noise) = (cfg.steps(), cfg.total_time(), cfg.ordering()?, cfg.noise()?);
    let model = cfg.model.model(2)?;
    let series = constant_series(&model, t / n as f64, n, &ordering, noise)?;
    let counts: Vec<usize> = (1..=n).collect();
    let ends = end_state_series(&model, t, &counts, &ordering, noise)?;
    let x: Vec<f64> = counts.iter().map(|&k| k as f64).collect();
    let (_, step) = step_record(&model, t / n as f64, &ordering)?;

    out.files.insert("fig3.csv".into(), series.to_csv()?);
    out.files
        .insert("fig3_end_states.csv".into(), end_state_csv(&counts, &ends)?);
    out.set("ordering", json!(ordering_name(&ordering)));
    out.set("steps", json!(n));
    out.set("total_time", json!(t));
    out.set("dt", json!(t / n as f64));
    out.set("per_step_slope", per_step_drop(&x, &ends.fidelities()));
    out.set("per_step_slope_overlap", per_step_drop(&x, &ends.overlaps()));
    out.set("end_fidelities", json!(ends.fidelities()));
    out.set("end_fidelity", json!(ends.rows[n - 1].fidelity));
    out.set("end_fidelity_exact", json!(ends.rows[n - 1].fidelity_exact));
    out.set("min_fidelity_exact", json!(min_of(&ends.exact_fidelities())));
    out.set("step", step);
    Ok(out)
}

/// Phase-insensitive overlap of the canonical and odd/even n-step unitaries.
pub fn ordering_overlap(model: &FermionModel, t: f64, n: usize) -> Result<f64> {
    let u = |o: Ordering| -> Result<_> { compile_evolution(&plan_for_model(model, t, n, o)?)?.unitary() };
    Ok(phase_insensitive_overlap(
        &u(Ordering::CanonicalS5)?,
        &u(Ordering::OddEvenS6)?,
    ))
}

fn run_fig4(cfg: &ExperimentConfig, modes: usize) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg);
    let (n, dt, noise) = (cfg.steps(), cfg.step_time(), cfg.noise()?);
    let ordering = cfg.ordering_for(modes)?;
    let model = cfg.model.model(modes)?;
    let series = constant_series(&model, dt, n, &ordering, noise)?;
    let x: Vec<f64> = (0..=n).map(|k| k as f64).collect();
    let (_, step) = step_record(&model, dt, &ordering)?;
    let last = &series.rows[n];

    out.files
        .insert(format!("{}.csv", cfg.experiment.name()), series.to_csv()?);
    out.set("ordering", json!(ordering_name(&ordering)));
    out.set("steps", json!(n));
    out.set("dt", json!(dt));
    out.set("per_step_slope", per_step_drop(&x, &series.fidelities()));
    out.set("per_step_slope_overlap", per_step_drop(&x, &series.overlaps()));
    out.set("fidelities", json!(series.fidelities()));
    out.set("end_fidelity", json!(last.fidelity));
    out.set("end_fidelity_exact", json!(last.fidelity_exact));
    out.set("min_fidelity_exact", json!(min_of(&series.exact_fidelities())));
    out.set("max_other", json!(max_other(&series)));
    out.set("ordering_overlap", json!(ordering_overlap(&model, dt * n as f64, n)?));
    let full = prefix_circuit(&model, dt, n, &ordering)?.census();
    out.set("census_full_run", census_value(&full)?);
    out.set("budget_full_run", json!(error_budget(&full, &NoiseModel::reference())));
    out.set("step", step);
    Ok(out)
}

fn schedule_record(out: &mut RunOutput, key: &str, series: &Series, circ: &Circuit) -> Result<()> {
    let f = series.fidelities();
    let fe = series.exact_fidelities();
    let census = circ.census();
    out.set(
        key,
        json!({
            "min_fidelity": min_of(&f),
            "mean_fidelity": f.iter().sum::<f64>() / f.len() as f64,
            "min_fidelity_exact": min_of(&fe),
            "mean_fidelity_exact": fe.iter().sum::<f64>() / fe.len() as f64,
            "max_other": max_other(series),
            "census_full_run": census_value(&census)?,
            "budget_full_run": error_budget(&census, &NoiseModel::reference()),
        }),
    );
    Ok(())
}

fn run_fig5(cfg: &ExperimentConfig, modes: usize) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg);
    let (s, steps, points) = (cfg.schedule(), cfg.schedule_steps(), cfg.time_points());
    let ordering = cfg.ordering_for(modes)?;
    let (series, circ) = schedule_series(&s, modes, steps, points, &ordering, cfg.noise()?)?;
    out.files
        .insert(format!("{}.csv", cfg.experiment.name()), series.to_csv()?);
    out.set("ordering", json!(ordering_name(&ordering)));
    out.set("steps", json!(steps));
    out.set("total_time", json!(s.total_time));
    out.set("time_points", json!(points));
    schedule_record(&mut out, "result", &series, &circ)?;
    Ok(out)
}

/// Step counts at which the fixed-time digital error is tabulated.
pub const CONVERGENCE_STEPS: [usize; 5] = [1, 2, 4, 8, 16];

fn run_digital_error_s4(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg);
    let (n, dt, noise) = (cfg.steps(), cfg.step_time(), cfg.noise()?);
    let hopping_only = ModelParams {
        u: 0.0,
        u_x: 0.0,
        ..cfg.model.clone()
    };
    let cases = [
        ("3mode", 3, cfg.model.clone()),
        ("3mode_hopping", 3, hopping_only),
        ("4mode", 4, cfg.model.clone()),
    ];
    for (name, modes, params) in cases {
        let model = params.model(modes)?;
        let ordering = cfg.ordering_for(modes)?;
        let series = constant_series(&model, dt, n, &ordering, noise)?;
        let ends = end_state_series(&model, dt * n as f64, &CONVERGENCE_STEPS, &ordering, None)?;
        out.files.insert(format!("digital_error_{name}.csv"), series.to_csv()?);
        out.set(
            name,
            json!({
                "ordering": ordering_name(&ordering),
                "min_fidelity_exact": min_of(&series.exact_fidelities()),
                "end_fidelity_exact": series.rows[n].fidelity_exact,
                "convergence_steps": CONVERGENCE_STEPS,
                "convergence_fidelity_exact": ends.exact_fidelities(),
            }),
        );
    }
    out.set("steps", json!(n));
    out.set("dt", json!(dt));
    Ok(out)
}

fn run_digital_error_s5(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg);
    let (s, points, noise) = (cfg.schedule(), cfg.time_points(), cfg.noise()?);
    for (name, modes, default_steps) in [("2mode", 2, 2), ("3mode", 3, 1)] {
        let steps = cfg.steps.unwrap_or(default_steps);
        let ordering = cfg.ordering_for(modes)?;
        let (series, circ) = schedule_series(&s, modes, steps, points, &ordering, noise)?;
        out.files.insert(format!("digital_error_{name}.csv"), series.to_csv()?);
        schedule_record(&mut out, name, &series, &circ)?;
        out.summary.get_mut(name).expect("just inserted")["steps"] = json!(steps);
    }
    out.set("total_time", json!(s.total_time));
    out.set("time_points", json!(points));
    Ok(out)
}

/// Clifford two-mode step: V = π/2, U = π and Δt = 1 put every block and
/// Z phase at π/2.
pub fn clifford_step_circuit() -> Result<Circuit> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let plan = plan_for_model(&FermionModel::two_mode(FRAC_PI_2, PI), 1.0, 1, Ordering::CanonicalS5)?;
    compile_trotter_step(&plan, 1)
}

pub fn zz_block_circuit() -> Result<Circuit> {
    compile_zz_block(std::f64::consts::FRAC_PI_2, (0, 1), EchoAxis::X)
}

fn rb_csv(points: &[crate::benchmarking::RbPoint]) -> Result<String> {
    let mut buf = Vec::new();
    write_rb_csv(points, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Numerical(format!("csv encoding: {e}")))
}

fn run_rb(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg);
    let rb = cfg.rb_config();
    let noise = cfg.noise()?;
    let reference = rb_run(&rb, None, noise.as_ref())?;
    let ref_fit = fit_points(&reference)?;
    out.files.insert("rb_reference.csv".into(), rb_csv(&reference)?);
    out.set("p_reference", json!(ref_fit.p));
    out.set("m_values", json!(rb.m_values));
    out.set("k_sequences", json!(rb.k_sequences));
    for (name, circ) in [("zz", zz_block_circuit()?), ("step", clifford_step_circuit()?)] {
        let points = rb_run(&rb, Some(&circ), noise.as_ref())?;
        let fit = fit_points(&points)?;
        let error = extract_interleaved_error(&ref_fit, &fit, 4)?;
        let census = circ.census();
        out.files.insert(format!("rb_{name}.csv"), rb_csv(&points)?);
        out.set(
            name,
            json!({
                "p_interleaved": fit.p,
                "p_sigma": fit.p_sigma(),
                "error": error,
                "census": census_value(&census)?,
                "budget_reference": error_budget(&census, &NoiseModel::reference()),
            }),
        );
    }
    Ok(out)
}

fn run_anticommutation(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg);
    let run = anticommutation_experiment(cfg.noise()?.as_ref())?;
    for (i, d) in run.datasets.iter().enumerate() {
        let mut buf = Vec::new();
        d.write_csv(&mut buf)?;
        let body = String::from_utf8(buf).map_err(|e| Error::Numerical(format!("csv encoding: {e}")))?;
        out.files.insert(format!("qpt_u{}.csv", i + 1), body);
    }
    for (name, chi) in ["chi_u1", "chi_u2", "chi_composed"].iter().zip(&run.reconstructed) {
        out.files
            .insert(format!("{name}.json"), serde_json::to_string_pretty(chi)? + "\n");
    }
    out.set("f1", json!(run.report.f1));
    out.set("f2", json!(run.report.f2));
    out.set("f_composed", json!(run.report.f_composed));
    Ok(out)
}

/// Per-step census and reference budget for the three experiment models.
pub fn census_table() -> Result<BTreeMap<String, Value>> {
    let rows = [
        ("two_mode", FermionModel::two_mode(1.0, 1.0), Ordering::CanonicalS5),
        (
            "three_mode",
            FermionModel::three_mode_chain(1.0, 1.0),
            Ordering::CanonicalS5,
        ),
        (
            "four_mode",
            FermionModel::asymmetric_hubbard(1.0, 1.0, 0.0, 1.0),
            Ordering::OddEvenS6,
        ),
    ];
    rows.into_iter()
        .map(|(name, model, ordering)| {
            let (census, _) = step_record(&model, 1.0, &ordering)?;
            let mut v = census_value(&census)?;
            v["budget"] = json!(error_budget(&census, &NoiseModel::reference()));
            Ok((name.to_string(), v))
        })
        .collect()
}

fn run_census(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut out = RunOutput::new(cfg);
    let table = census_table()?;
    out.files
        .insert("census.json".into(), serde_json::to_string_pretty(&table)? + "\n");
    for (k, v) in table {
        out.set(&k, v);
    }
    Ok(out)
}

/// Runs one experiment and returns its files and summary without touching disk.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    log::info!(
        "running {} (noise scale {}, seed {})",
        cfg.experiment,
        cfg.noise_scale,
        cfg.seed
    );
    match cfg.experiment {
        ExperimentId::Fig3 => run_fig3(cfg),
        ExperimentId::Fig4_3mode => run_fig4(cfg, 3),
        ExperimentId::Fig4_4mode => run_fig4(cfg, 4),
        ExperimentId::Fig5_2mode => run_fig5(cfg, 2),
        ExperimentId::Fig5_3mode => run_fig5(cfg, 3),
        ExperimentId::DigitalErrorS4 => run_digital_error_s4(cfg),
        ExperimentId::DigitalErrorS5 => run_digital_error_s5(cfg),
        ExperimentId::RbS3 => run_rb(cfg),
        ExperimentId::AnticommutationFig2d => run_anticommutation(cfg),
        ExperimentId::CensusTableS1 => run_census(cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Steps,
    NoiseScale,
    Ordering,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Steps => "steps",
            SweepAxis::NoiseScale => "noise_scale",
            SweepAxis::Ordering => "ordering",
        }
    }

    fn applies_to(self, id: ExperimentId) -> bool {
        match self {
            SweepAxis::Steps | SweepAxis::Ordering => id.uses_steps(),
            SweepAxis::NoiseScale => id != ExperimentId::CensusTableS1,
        }
    }

    /// Copy of `cfg` with this axis set to `value`.
    fn apply(self, cfg: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut c = cfg.clone();
        match self {
            SweepAxis::Steps => {
                let n = value
                    .parse()
                    .map_err(|_| Error::config("steps", format!("'{value}' is not a step count")))?;
                c.steps = Some(n);
            }
            SweepAxis::NoiseScale => {
                c.noise_scale = value
                    .parse()
                    .map_err(|_| Error::config("noise_scale", format!("'{value}' is not a number")))?;
            }
            SweepAxis::Ordering => c.ordering = Some(value.to_string()),
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepAxis::Steps, SweepAxis::NoiseScale, SweepAxis::Ordering]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config("axis", format!("expected steps, noise_scale or ordering, got '{s}'")))
    }
}

/// One row per axis value; columns are the scalar summary fields of the
/// runs, nested objects flattened with dotted keys.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub columns: Vec<String>,
    pub rows: Vec<BTreeMap<String, Value>>,
    pub runs: Vec<(String, RunOutput)>,
}

impl SweepTable {
    pub fn column(&self, key: &str) -> Vec<Option<&Value>> {
        self.rows.iter().map(|r| r.get(key)).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(self.columns.iter().map(|c| match r.get(c) {
                None | Some(Value::Null) => String::new(),
                Some(Value::String(s)) => s.clone(),
                Some(v) => v.to_string(),
            }))?;
        }
        finish_csv(w)
    }

    /// Writes `sweep.csv` and one subdirectory per run.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), self.to_csv()?)?;
        for (label, run) in &self.runs {
            run.write_to(&dir.join(label))?;
        }
        Ok(())
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(_) => {}
        scalar => {
            out.insert(prefix.to_string(), scalar.clone());
        }
    }
}

/// Runs the experiment once per axis value, in parallel, and tabulates the
/// summaries in the order of `values`.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<SweepTable> {
    if !axis.applies_to(cfg.experiment) {
        return Err(Error::config(
            "axis",
            format!("{} does not apply to {}", axis.name(), cfg.experiment),
        ));
    }
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    let configs = values.iter().map(|v| axis.apply(cfg, v)).collect::<Result<Vec<_>>>()?;
    let runs = configs.par_iter().map(run).collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(runs.len());
    for (value, out) in values.iter().zip(&runs) {
        let mut row = BTreeMap::new();
        flatten("", &Value::Object(out.summary.clone().into_iter().collect()), &mut row);
        row.insert(axis.name().to_string(), json!(value));
        rows.push(row);
    }
    let mut columns: Vec<String> = vec![axis.name().to_string()];
    let mut rest: Vec<String> = rows
        .iter()
        .flat_map(|r| r.keys().cloned())
        .filter(|k| k != axis.name())
        .collect();
    rest.sort();
    rest.dedup();
    columns.extend(rest);
    let runs = values
        .iter()
        .map(|v| format!("{}_{}", axis.name(), v))
        .zip(runs)
        .collect();
    Ok(SweepTable {
        axis,
        columns,
        rows,
        runs,
    })
}

/// Values from `from` to `to` inclusive: unit steps for step counts, else
/// `points` evenly spaced values.
pub fn axis_range(axis: SweepAxis, from: f64, to: f64, points: usize) -> Result<Vec<String>> {
    match axis {
        SweepAxis::Steps => {
            if from < 1.0 || to < from || from.fract() != 0.0 || to.fract() != 0.0 {
                return Err(Error::config("from", "step ranges need integers 1 ≤ from ≤ to"));
            }
            Ok((from as usize..=to as usize).map(|n| n.to_string()).collect())
        }
        SweepAxis::NoiseScale => {
            if points < 2 || !(from.is_finite() && to.is_finite()) {
                return Err(Error::config("points", "need at least 2 finite points"));
            }
            Ok((0..points)
                .map(|j| (from + (to - from) * j as f64 / (points - 1) as f64).to_string())
                .collect())
        }
        SweepAxis::Ordering => Err(Error::config("axis", "ordering sweeps take explicit values")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip_through_names_and_json() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
            assert_eq!(serde_json::to_value(id).unwrap(), json!(id.name()));
        }
        assert!("fig6".parse::<ExperimentId>().is_err());
    }

    #[test]
    fn config_json_defaults_and_errors() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "fig4_4mode"}"#).unwrap();
        assert_eq!(cfg.steps(), 4);
        assert_eq!(cfg.ordering().unwrap(), Ordering::OddEvenS6);
        assert_eq!(cfg.noise().unwrap(), None);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);

        let field = |text: &str| match ExperimentConfig::from_json(text).unwrap_err() {
            Error::Config { field, .. } => field,
            e => panic!("unexpected {e}"),
        };
        assert_eq!(field(r#"{"experiment": "fig3", "steps": 0}"#), "steps");
        assert_eq!(field(r#"{"experiment": "fig3", "noise_scale": -1}"#), "noise_scale");
        assert_eq!(field(r#"{"experiment": "fig3", "ordering": "s4"}"#), "ordering");
        assert_eq!(field(r#"{"experiment": "fig3", "step_time": 0}"#), "step_time");
        assert_eq!(field(r#"{"experiment": "fig3", "time_points": 1}"#), "time_points");
        assert_eq!(field(r#"{"experiment": "fig3", "typo": 1}"#), "config");
    }

    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 1.0 - 0.15 * v).collect();
        assert!((linear_slope(&x, &y).unwrap() + 0.15).abs() < 1e-12);
        assert_eq!(linear_slope(&[1.0], &[2.0]), None);
        assert_eq!(linear_slope(&[1.0, 1.0], &[2.0, 3.0]), None);
    }

    #[test]
    fn axis_ranges() {
        assert_eq!(axis_range(SweepAxis::Steps, 1.0, 3.0, 0).unwrap(), ["1", "2", "3"]);
        assert_eq!(
            axis_range(SweepAxis::NoiseScale, 0.0, 1.0, 3).unwrap(),
            ["0", "0.5", "1"]
        );
        assert!(axis_range(SweepAxis::Steps, 0.0, 3.0, 0).is_err());
        assert!(axis_range(SweepAxis::Ordering, 0.0, 1.0, 2).is_err());
    }

    #[test]
    fn ideal_digital_series_has_unit_fidelity() {
        let model = FermionModel::three_mode_chain(1.0, 1.0);
        let s = constant_series(&model, 0.5, 3, &Ordering::CanonicalS5, None).unwrap();
        assert_eq!(s.rows.len(), 4);
        assert!(s
            .rows
            .iter()
            .all(|r| (r.fidelity - 1.0).abs() < 1e-12 && r.other < 1e-12));
        assert!((s.rows[0].fidelity_exact - 1.0).abs() < 1e-12);
        for (got, want) in s.rows[0].occupations.iter().zip([1.0, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_lowers_fidelity_and_populates_other_states() {
        let model = FermionModel::three_mode_chain(1.0, 1.0);
        let s = constant_series(&model, 1.0, 2, &Ordering::CanonicalS5, Some(NoiseModel::reference())).unwrap();
        assert!(s.rows[2].fidelity < s.rows[1].fidelity && s.rows[1].fidelity < 1.0);
        assert!(s.rows[2].other > 0.0);
        assert!(s.rows[2].overlap < s.rows[2].fidelity);
    }

    #[test]
    fn exact_schedule_matches_constant_profile() {
        let s = Schedule {
            total_time: 1.5,
            hopping: Profile::constant(0.8),
            repulsion: Profile::constant(1.0),
            steps: 1,
        };
        let input = prepare_input(InputKind::ThreeMode, PrepMethod::Direct).unwrap();
        let by_steps = exact_schedule_evolve(&s, 3, 1.5, &input).unwrap();
        let direct = exact_evolve(
            &spin_hamiltonian(&FermionModel::three_mode_chain(0.8, 1.0)).unwrap(),
            1.5,
            &input,
        )
        .unwrap();
        assert!((by_steps.overlap(&direct).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ramp_is_frozen_before_hopping_starts() {
        let (series, _) = schedule_series(&default_ramp(), 2, 2, 13, &Ordering::CanonicalS5, None).unwrap();
        for r in series.rows.iter().filter(|r| r.time <= 1.0) {
            assert!((r.occupations[0] - 0.5).abs() < 1e-9 && (r.occupations[1] - 1.0).abs() < 1e-9);
        }
        assert!(series.rows.iter().all(|r| r.fidelity_exact > 0.99));
    }

    #[test]
    fn sweep_rejects_inapplicable_axis() {
        let cfg = ExperimentConfig::new(ExperimentId::CensusTableS1);
        assert!(sweep(&cfg, SweepAxis::NoiseScale, &["1".into()]).is_err());
        let cfg = ExperimentConfig::new(ExperimentId::Fig3);
        assert!(sweep(&cfg, SweepAxis::Steps, &[]).is_err());
        assert!(sweep(&cfg, SweepAxis::Steps, &["x".into()]).is_err());
    }

    #[test]
    fn flattening_uses_dotted_keys_and_skips_arrays() {
        let mut out = BTreeMap::new();
        flatten("", &json!({"a": {"b": 1, "c": [1, 2]}, "d": "s5"}), &mut out);
        assert_eq!(out.keys().collect::<Vec<_>>(), ["a.b", "d"]);
    }
}
