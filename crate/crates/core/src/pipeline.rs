//! Solve, embed, select seeds, then round over many seeded trials.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{factorize, laplacian_spectrum, seed_columns, ColumnWeighting};
use crate::error::{Error, Result};
use crate::io;
use crate::problems::{
    evaluate, oracle, predicted_factor, relaxation_cases, repair, search_space, PredictedFactor,
    ProblemKind, ProblemSpec, ORACLE_CAP,
};
use crate::relaxation::{build_sdp, MomentMatrix, Relaxation, Sense, Tolerances};
use crate::rounding::{
    round_independent, round_threshold, sample_seed_assignment, ConditionalTable, RoundingMode,
    RoundingResult,
};
use crate::sdpsolve::{solve, SdpSolution, SolverSettings};
use crate::seeds::{select, SeedSet, SeedStrategy};

pub const RECORD_VERSION: u32 = 1;

const STREAM_SELECT: u64 = 0x100;
const STREAM_TRIAL: u64 = 0x200;

/// Independent generator for `(domain, index)` under one master seed.
pub fn derived_rng(master_seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((domain << 32) | (index & 0xffff_ffff));
    rng
}

fn strategy_code(s: SeedStrategy) -> u64 {
    match s {
        SeedStrategy::Greedy => 0,
        SeedStrategy::Volume => 1,
        SeedStrategy::Random => 2,
        SeedStrategy::Exhaustive => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub r: usize,
    pub strategies: Vec<SeedStrategy>,
    pub modes: Vec<RoundingMode>,
    pub trials: usize,
    pub master_seed: u64,
    /// Seeds per strategy; `r - 1` when absent.
    pub seed_count: Option<usize>,
    pub weighting: ColumnWeighting,
    pub solver: SolverSettings,
    pub tolerances: Tolerances,
    /// Run the brute-force oracle when the instance is within its cap.
    pub oracle: bool,
}

impl PipelineConfig {
    pub fn new(r: usize) -> Self {
        PipelineConfig {
            r,
            strategies: vec![SeedStrategy::Greedy],
            modes: RoundingMode::ALL.to_vec(),
            trials: 100,
            master_seed: 0,
            seed_count: None,
            weighting: ColumnWeighting::Raw,
            solver: SolverSettings::default(),
            tolerances: Tolerances::default(),
            oracle: true,
        }
    }

    pub fn hash(&self) -> String {
        io::sha256_hex(io::to_canonical_json(self).as_bytes())
    }

    pub fn seed_count(&self) -> usize {
        self.seed_count.unwrap_or(self.r.saturating_sub(1))
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.r == 0 {
            return Err(Error::InvalidArgument("relaxation level must be at least 1".into()));
        }
        if self.strategies.is_empty() || self.modes.is_empty() {
            return Err(Error::InvalidArgument("need at least one strategy and one mode".into()));
        }
        let m = self.seed_count();
        if m + 1 > self.r {
            return Err(Error::LevelBudget { level: self.r, seeds: m });
        }
        if m > n {
            return Err(Error::InvalidArgument(format!("{m} seeds for {n} variables")));
        }
        Ok(())
    }
}

/// Error stored in a record instead of aborting a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    /// `capacity`, `usage` or `numerical`.
    pub class: String,
    pub message: String,
}

impl From<&Error> for RecordError {
    fn from(e: &Error) -> Self {
        let class = match e {
            Error::Capacity { .. } => "capacity",
            Error::InvalidArgument(_)
            | Error::InvalidSpec(_)
            | Error::InvalidInstance(_)
            | Error::LevelBudget { .. }
            | Error::LabelCount { .. }
            | Error::ScopeTooLarge { .. } => "usage",
            _ => "numerical",
        };
        RecordError {
            class: class.into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: RoundingMode,
    /// Best and mean native value over trials with a finite raw value.
    pub best_pre_repair: Option<f64>,
    pub mean_pre_repair: Option<f64>,
    /// Best and mean over trials that are feasible after repair.
    pub best_post_repair: Option<f64>,
    pub mean_post_repair: Option<f64>,
    pub best_assignment: Option<Vec<usize>>,
    /// Threshold of the best post-repair result (threshold mode).
    pub best_threshold: Option<f64>,
    pub feasible_before_repair: usize,
    pub feasible_after_repair: usize,
    /// Trials whose assignment repair changed.
    pub repaired: usize,
    pub failed_trials: usize,
    pub error: Option<RecordError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    pub case: String,
    pub value: f64,
    pub scale: f64,
    pub converged: bool,
    pub primal_residual: f64,
    pub psd_residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub record_version: u32,
    pub instance_id: String,
    pub instance_hash: String,
    pub config_hash: String,
    pub kind: ProblemKind,
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub strategy: SeedStrategy,
    pub strategy_tag: String,
    pub sense: Sense,
    pub sdp_value: Option<f64>,
    pub converged: bool,
    pub solves: Vec<SolveSummary>,
    /// `lambda_1 ..= lambda_min(n, r + 2)`.
    pub lambdas: Vec<f64>,
    pub lambda_r1: Option<f64>,
    pub predicted_factor: Option<PredictedFactor>,
    pub seeds: Option<SeedSet>,
    pub modes: Vec<ModeSummary>,
    pub oracle_opt: Option<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub error: Option<RecordError>,
}

impl RunRecord {
    pub fn mode(&self, mode: RoundingMode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    pub fn to_json(&self) -> String {
        io::to_canonical_json(self)
    }
}

/// Wall-clock milliseconds per phase, kept out of records so those stay reproducible.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub solve_ms: f64,
    pub embed_ms: f64,
    pub select_ms: Vec<(SeedStrategy, f64)>,
    pub rounding_ms: Vec<(SeedStrategy, f64)>,
}

/// A stored solution, re-checkable from the instance alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveFile {
    pub format_version: u32,
    pub instance: ProblemSpec,
    pub r: usize,
    pub case: String,
    pub blocks: Vec<Vec<Vec<f64>>>,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub psd_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveFile {
    pub fn new(spec: &ProblemSpec, r: usize, case: &str, s: &SdpSolution) -> Self {
        SolveFile {
            format_version: RECORD_VERSION,
            instance: spec.clone(),
            r,
            case: case.to_string(),
            blocks: s
                .x
                .iter()
                .map(|b| (0..b.nrows()).map(|i| b.row(i).iter().copied().collect()).collect())
                .collect(),
            objective_value: s.objective_value,
            primal_residual: s.primal_residual,
            psd_residual: s.psd_residual,
            iterations: s.iterations,
            converged: s.converged,
        }
    }

    pub fn solution(&self) -> Result<SdpSolution> {
        let mut x = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let d = b.len();
            if b.iter().any(|row| row.len() != d) {
                return Err(Error::InvalidArgument("solve block is not square".into()));
            }
            x.push(nalgebra::DMatrix::from_fn(d, d, |i, j| b[i][j]));
        }
        Ok(SdpSolution {
            x,
            objective_value: self.objective_value,
            primal_residual: self.primal_residual,
            psd_residual: self.psd_residual,
            iterations: self.iterations,
            converged: self.converged,
        })
    }

    /// Rebuild the relaxation this solution belongs to.
    pub fn relaxation(&self) -> Result<Relaxation> {
        let case = relaxation_cases(&self.instance)?
            .into_iter()
            .find(|c| c.label == self.case)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown relaxation case {:?}", self.case)))?;
        build_sdp(&case.instance, self.r)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub records: Vec<RunRecord>,
    pub times: PhaseTimes,
    /// One per relaxation case that was solved.
    pub solves: Vec<SolveFile>,
}

impl PipelineOutput {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged && r.error.is_none())
    }
}

struct Solved {
    summaries: Vec<SolveSummary>,
    sdp_value: f64,
    converged: bool,
    /// Moments of the case whose scaled value is the bound.
    moments: MomentMatrix,
    files: Vec<SolveFile>,
}

fn solve_cases(spec: &ProblemSpec, config: &PipelineConfig) -> Result<Solved> {
    let sense = spec.sense();
    let mut summaries = Vec::new();
    let mut files = Vec::new();
    let mut best: Option<(f64, MomentMatrix)> = None;
    for case in relaxation_cases(spec)? {
        let relax = build_sdp(&case.instance, config.r)?;
        let sol = solve(&relax.sdp, &config.solver)?;
        let value = sol.objective_value * case.scale;
        summaries.push(SolveSummary {
            case: case.label.clone(),
            value,
            scale: case.scale,
            converged: sol.converged,
            primal_residual: sol.primal_residual,
            psd_residual: sol.psd_residual,
            iterations: sol.iterations,
        });
        files.push(SolveFile::new(spec, config.r, &case.label, &sol));
        if best.as_ref().is_none_or(|(b, _)| sense.better(value, *b)) {
            best = Some((value, relax.moments(&sol)?));
        }
    }
    let (sdp_value, moments) = best.expect("relaxation_cases is nonempty");
    Ok(Solved {
        converged: summaries.iter().all(|s| s.converged),
        summaries,
        sdp_value,
        moments,
        files,
    })
}

struct TrialOutcome {
    results: Vec<std::result::Result<RoundingResult, Error>>,
}

/// Round one trial from a conditional table and score it before and after
/// repair. Threshold mode sweeps theta and keeps the best result.
pub fn round_once(
    spec: &ProblemSpec,
    table: &ConditionalTable,
    mode: RoundingMode,
    trial: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RoundingResult> {
    let sense = spec.sense();
    let finish = |assignment: Vec<usize>, threshold: Option<f64>| {
        let raw = evaluate(spec, &assignment);
        let repaired = repair(spec, &assignment);
        let fixed = evaluate(spec, &repaired);
        RoundingResult {
            trial_index: trial,
            mode,
            threshold_used: threshold,
            assignment,
            objective: raw.value,
            feasible: raw.feasible,
            violations: raw.violations,
            repaired,
            repaired_objective: fixed.value,
            repaired_feasible: fixed.feasible,
        }
    };
    match mode {
        RoundingMode::Independent => Ok(finish(round_independent(table, rng), None)),
        RoundingMode::Threshold => {
            let side = 1;
            let mut thetas = table.marginal_values(side);
            thetas.extend([0.0, 0.5, 1.0]);
            thetas.retain(|t| (0.0..=1.0).contains(t));
            thetas.sort_by(f64::total_cmp);
            thetas.dedup();
            let mut best: Option<RoundingResult> = None;
            for theta in thetas {
                let candidate = finish(round_threshold(table, theta, side)?, Some(theta));
                let better = match &best {
                    None => true,
                    Some(b) => match (candidate.repaired_feasible, b.repaired_feasible) {
                        (true, false) => true,
                        (false, true) => false,
                        (true, true) => sense.better(candidate.repaired_objective, b.repaired_objective),
                        (false, false) => sense.better(candidate.objective, b.objective),
                    },
                };
                if better {
                    best = Some(candidate);
                }
            }
            Ok(best.expect("the sweep always has theta = 0.5"))
        }
    }
}

fn run_trial(
    spec: &ProblemSpec,
    moments: &MomentMatrix,
    seeds: &SeedSet,
    config: &PipelineConfig,
    modes: &[RoundingMode],
    trial: usize,
) -> TrialOutcome {
    let mut rng = derived_rng(
        config.master_seed,
        STREAM_TRIAL + strategy_code(seeds.strategy),
        trial as u64,
    );
    let table = sample_seed_assignment(moments, &seeds.variables, config.tolerances.p_min, &mut rng)
        .and_then(|(assignment, cond)| ConditionalTable::from_moments(&cond, assignment));
    let results = modes
        .iter()
        .map(|&mode| match &table {
            Ok(t) => round_once(spec, t, mode, trial, &mut rng),
            Err(e) => Err(e.clone()),
        })
        .collect();
    TrialOutcome { results }
}

fn summarize(
    sense: Sense,
    mode: RoundingMode,
    results: &[&std::result::Result<RoundingResult, Error>],
) -> ModeSummary {
    let mut s = ModeSummary {
        mode,
        best_pre_repair: None,
        mean_pre_repair: None,
        best_post_repair: None,
        mean_post_repair: None,
        best_assignment: None,
        best_threshold: None,
        feasible_before_repair: 0,
        feasible_after_repair: 0,
        repaired: 0,
        failed_trials: 0,
        error: None,
    };
    let (mut raw_sum, mut raw_count) = (0.0, 0usize);
    let (mut fixed_sum, mut fixed_count) = (0.0, 0usize);
    for r in results {
        let r = match r {
            Ok(r) => r,
            Err(e) => {
                s.failed_trials += 1;
                if s.error.is_none() {
                    s.error = Some(e.into());
                }
                continue;
            }
        };
        if r.feasible {
            s.feasible_before_repair += 1;
        }
        if r.repaired != r.assignment {
            s.repaired += 1;
        }
        if r.objective.is_finite() {
            raw_sum += r.objective;
            raw_count += 1;
            if s.best_pre_repair.is_none_or(|b| sense.better(r.objective, b)) {
                s.best_pre_repair = Some(r.objective);
            }
        }
        if r.repaired_feasible && r.repaired_objective.is_finite() {
            s.feasible_after_repair += 1;
            fixed_sum += r.repaired_objective;
            fixed_count += 1;
            if s.best_post_repair.is_none_or(|b| sense.better(r.repaired_objective, b)) {
                s.best_post_repair = Some(r.repaired_objective);
                s.best_assignment = Some(r.repaired.clone());
                s.best_threshold = r.threshold_used;
            }
        }
    }
    s.mean_pre_repair = (raw_count > 0).then(|| raw_sum / raw_count as f64);
    s.mean_post_repair = (fixed_count > 0).then(|| fixed_sum / fixed_count as f64);
    s
}

/// Run the full pipeline once per configured strategy. Phase failures are
/// stored in the records' `error` fields; only configuration errors are
/// returned as `Err`.
pub fn run_pipeline(spec: &ProblemSpec, instance_id: &str, config: &PipelineConfig) -> Result<PipelineOutput> {
    spec.validate()?;
    config.check(spec.n)?;
    let k = spec.k();
    let sense = spec.sense();
    let mut times = PhaseTimes::default();

    let spectrum = laplacian_spectrum(spec.n, &spec.edges);
    let lambdas: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .take(spec.n.min(config.r + 2))
        .copied()
        .collect();
    let oracle_opt = if config.oracle && search_space(spec.n, k) <= ORACLE_CAP {
        oracle(spec).ok().map(|o| o.opt_value)
    } else {
        None
    };
    let base = RunRecord {
        record_version: RECORD_VERSION,
        instance_id: instance_id.to_string(),
        instance_hash: spec.hash()?,
        config_hash: config.hash(),
        kind: spec.kind,
        n: spec.n,
        k,
        r: config.r,
        strategy: SeedStrategy::Greedy,
        strategy_tag: String::new(),
        sense,
        sdp_value: None,
        converged: false,
        solves: Vec::new(),
        lambdas,
        lambda_r1: spectrum.lambda(config.r + 1),
        predicted_factor: predicted_factor(spec, config.r, &spectrum),
        seeds: None,
        modes: Vec::new(),
        oracle_opt,
        trials: config.trials,
        master_seed: config.master_seed,
        error: None,
    };
    let failed = |e: &Error| -> Vec<RunRecord> {
        config
            .strategies
            .iter()
            .map(|&s| RunRecord {
                strategy: s,
                strategy_tag: s.to_string(),
                error: Some(e.into()),
                ..base.clone()
            })
            .collect()
    };

    let clock = Instant::now();
    let solved = match solve_cases(spec, config) {
        Ok(s) => s,
        Err(e) => {
            return Ok(PipelineOutput {
                records: failed(&e),
                times,
                solves: Vec::new(),
            })
        }
    };
    times.solve_ms = clock.elapsed().as_secs_f64() * 1e3;

    let clock = Instant::now();
    let embedding = factorize(&solved.moments);
    let cols = seed_columns(&embedding, config.weighting, &spec.weighted_degrees());
    times.embed_ms = clock.elapsed().as_secs_f64() * 1e3;

    let base = RunRecord {
        sdp_value: Some(solved.sdp_value),
        converged: solved.converged,
        solves: solved.summaries.clone(),
        ..base
    };
    let modes: Vec<RoundingMode> = {
        let mut m = config.modes.clone();
        m.sort();
        m.dedup();
        m
    };
    let mut records = Vec::new();
    for &strategy in &config.strategies {
        let clock = Instant::now();
        let mut rng = derived_rng(config.master_seed, STREAM_SELECT, strategy_code(strategy));
        let seeds = match select(strategy, &cols, config.seed_count(), &mut rng) {
            Ok(s) => s,
            Err(e) => {
                records.push(RunRecord {
                    strategy,
                    strategy_tag: strategy.to_string(),
                    error: Some((&e).into()),
                    ..base.clone()
                });
                continue;
            }
        };
        times.select_ms.push((strategy, clock.elapsed().as_secs_f64() * 1e3));

        let clock = Instant::now();
        let runnable: Vec<RoundingMode> = modes
            .iter()
            .copied()
            .filter(|&m| m != RoundingMode::Threshold || k == 2)
            .collect();
        let outcomes: Vec<TrialOutcome> = (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, &solved.moments, &seeds, config, &runnable, t))
            .collect();
        let summaries = modes
            .iter()
            .map(|&mode| match runnable.iter().position(|&m| m == mode) {
                Some(i) => {
                    let results: Vec<_> = outcomes.iter().map(|o| &o.results[i]).collect();
                    summarize(sense, mode, &results)
                }
                None => ModeSummary {
                    error: Some((&Error::LabelCount { k }).into()),
                    ..summarize(sense, mode, &[])
                },
            })
            .collect();
        times.rounding_ms.push((strategy, clock.elapsed().as_secs_f64() * 1e3));
        records.push(RunRecord {
            strategy,
            strategy_tag: seeds.tag(),
            seeds: Some(seeds),
            modes: summaries,
            ..base.clone()
        });
    }
    Ok(PipelineOutput {
        records,
        times,
        solves: solved.files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_edge() -> ProblemSpec {
        ProblemSpec::new(ProblemKind::MaxCut, 2, vec![(0, 1, 1.0)])
    }

    #[test]
    fn single_edge_rounds_to_one() {
        let mut config = PipelineConfig::new(2);
        config.trials = 10;
        config.strategies = SeedStrategy::ALL.to_vec();
        let out = run_pipeline(&single_edge(), "edge", &config).unwrap();
        assert_eq!(out.records.len(), 4);
        for rec in &out.records {
            assert!(rec.converged, "{rec:?}");
            assert!((rec.sdp_value.unwrap() - 1.0).abs() < 1e-4);
            assert_eq!(rec.oracle_opt, Some(1.0));
            for m in &rec.modes {
                assert_eq!(m.best_post_repair, Some(1.0), "{m:?}");
            }
        }
    }

    #[test]
    fn records_are_deterministic() {
        let mut config = PipelineConfig::new(2);
        config.trials = 8;
        config.master_seed = 42;
        let spec = ProblemSpec::new(
            ProblemKind::MinBisection,
            4,
            vec![(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)],
        );
        let a = run_pipeline(&spec, "c4", &config).unwrap();
        let b = run_pipeline(&spec, "c4", &config).unwrap();
        assert_eq!(a.records[0].to_json(), b.records[0].to_json());
    }

    #[test]
    fn configuration_errors() {
        let mut config = PipelineConfig::new(2);
        config.trials = 0;
        assert!(run_pipeline(&single_edge(), "edge", &config).is_err());
        let mut config = PipelineConfig::new(1);
        config.seed_count = Some(1);
        assert_eq!(
            run_pipeline(&single_edge(), "edge", &config).unwrap_err(),
            Error::LevelBudget { level: 1, seeds: 1 }
        );
    }

    #[test]
    fn capacity_failure_lands_in_record() {
        let mut config = PipelineConfig::new(2);
        config.trials = 1;
        config.solver.dim_cap = 3;
        let out = run_pipeline(&single_edge(), "edge", &config).unwrap();
        let err = out.records[0].error.as_ref().unwrap();
        assert_eq!(err.class, "capacity");
        assert!(!out.all_converged());
    }

    #[test]
    fn solve_file_round_trip() {
        let mut config = PipelineConfig::new(1);
        config.trials = 1;
        let out = run_pipeline(&single_edge(), "edge", &config).unwrap();
        let file = &out.solves[0];
        let text = io::to_canonical_json(file);
        let back: SolveFile = serde_json::from_str(&text).unwrap();
        assert_eq!(&back, file);
        let relax = back.relaxation().unwrap();
        let report = crate::sdpsolve::check_certificate(&relax.sdp, &back.solution().unwrap());
        assert!(report.is_clean(), "{report:?}");
    }
}
