use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::form::{FormOptions, MppResult};
use super::sampling::{is_pf, InstrumentalDensity};
use super::zspace::SurrogateLimitState;
use super::{Method, ReliabilityResult};
use crate::stochastic::{lhs_sample, GaussianSpace, LhsOptions, SampleSet};
use crate::surrogate::{train, SurrogateNet, TrainConfig, TrainReport};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    /// New FEM samples per stage.
    pub n_per_stage: usize,
    pub max_stages: usize,
    /// Half-width, in standard deviations, of the design around the MPP.
    pub halfwidth: f64,
    /// Edge length in z of the hypercube around the previous MPP that stops
    /// the loop.
    pub termination_width: f64,
    /// Samples of the final importance sampling run on the surrogate.
    pub n_is: usize,
    pub seed: u64,
    pub form: FormOptions,
    pub train: TrainConfig,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        AdaptiveConfig {
            n_per_stage: 200,
            max_stages: 5,
            halfwidth: 1.0,
            termination_width: 1.0,
            n_is: 10_000,
            seed: 0,
            form: FormOptions::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub n_new: usize,
    pub n_total: usize,
    pub n_skipped: usize,
    pub mpp_z: Vec<f64>,
    pub mpp_x: Vec<f64>,
    pub beta_form: f64,
    pub pf_form: f64,
    pub beta_sorm: Option<f64>,
    pub pf_sorm: Option<f64>,
    pub sorm_singular: bool,
    pub test_mse: f64,
    /// Largest coordinate shift of the MPP from the previous stage.
    pub mpp_shift: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    /// Final importance sampling estimate on the last surrogate.
    pub result: ReliabilityResult,
    pub net: SurrogateNet,
    pub train_report: TrainReport,
    pub mpp: MppResult,
    pub stages: Vec<StageRecord>,
    /// True when the MPP settled before `max_stages` ran out.
    pub terminated: bool,
    /// Every design point with its FEM limit-state value.
    pub samples: SampleSet,
    pub n_fem: usize,
}

impl AdaptiveResult {
    pub const STAGE_HEADER: &'static str =
        "stage\tn_new\tn_total\tskipped\tbeta_form\tpf_form\tbeta_sorm\tpf_sorm\ttest_mse\tmpp_shift";

    /// Tab-separated stage trace with [`Self::STAGE_HEADER`]; stage wall
    /// times are kept in the records only.
    pub fn stage_table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:e}"));
        let mut s = format!("{}\n", Self::STAGE_HEADER);
        for r in &self.stages {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:e}\t{:e}\t{}\t{}\t{:e}\t{}\n",
                r.stage,
                r.n_new,
                r.n_total,
                r.n_skipped,
                r.beta_form,
                r.pf_form,
                opt(r.beta_sorm),
                opt(r.pf_sorm),
                r.test_mse,
                opt(r.mpp_shift)
            ));
        }
        s
    }
}

/// Design box of one stage in z.
enum Design<'a> {
    Global,
    Local { center: &'a [f64], halfwidth: f64 },
}

impl Design<'_> {
    /// A fresh point of the design region, used to replace a failed sample.
    fn redraw(&self, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Design::Global => {
                let n = Normal::standard();
                let (lo, hi) = (n.cdf(-4.0), n.cdf(4.0));
                (0..dim).map(|_| n.inverse_cdf(lo + rng.random::<f64>() * (hi - lo))).collect()
            }
            Design::Local { center, halfwidth } => {
                center.iter().map(|c| c + halfwidth * (2.0 * rng.random::<f64>() - 1.0)).collect()
            }
        }
    }
}

/// Evaluates a design, redrawing each failed point once and skipping it
/// if the redraw fails too. Returns the evaluated set and the skip count.
fn evaluate_design<F>(
    design: &SampleSet,
    region: &Design,
    space: &GaussianSpace,
    eval: &F,
    calls: &AtomicUsize,
    seed: u64,
) -> Result<(SampleSet, usize)>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let outcomes: Vec<Option<(Vec<f64>, f64)>> = design
        .x
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            calls.fetch_add(1, Ordering::Relaxed);
            match eval(x) {
                Ok(g) => Some((x.clone(), g)),
                Err(e) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(i as u64);
                    let x2 = space.from_standard_normal(&region.redraw(space.dim(), &mut rng));
                    calls.fetch_add(1, Ordering::Relaxed);
                    match eval(&x2) {
                        Ok(g) => {
                            warn!("sample {i} failed ({e}); replaced by a redraw");
                            Some((x2, g))
                        }
                        Err(e2) => {
                            warn!("sample {i} and its redraw failed ({e2}); skipped");
                            None
                        }
                    }
                }
            }
        })
        .collect();
    let skipped = outcomes.iter().filter(|o| o.is_none()).count();
    let (x, g): (Vec<_>, Vec<_>) = outcomes.into_iter().flatten().unzip();
    let mut set = SampleSet::new(design.names.clone(), x, design.provenance)?;
    set.set_g(g)?;
    Ok((set, skipped))
}

/// Adaptive surrogate reliability loop.
///
/// Stage 1 evaluates a global Latin hypercube design with the expensive
/// limit state `eval` (physical inputs), trains a net and locates the MPP
/// on it. Each later stage adds a design of `n_per_stage` points in the box
/// `MPP +- halfwidth` (z units) around the previous MPP, retrains on all
/// points and searches again. The loop stops once the MPP moves less than
/// half the termination width in every coordinate, after which the
/// failure probability is estimated by importance sampling on the net
/// with a unit Gaussian centered at the final MPP.
///
/// Points whose evaluation fails are redrawn once; more than 1% skipped
/// points in a stage aborts the run, as does an MPP search that does not
/// converge. Stage `k` draws its design with seed `seed + k` and the final
/// estimate uses `seed + 100`.
pub fn adaptive_ann_mcis<F>(eval: &F, space: &GaussianSpace, config: &AdaptiveConfig) -> Result<AdaptiveResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if config.n_per_stage < 2 || config.max_stages == 0 {
        return Err(Error::InvalidArgument("adaptive loop needs n_per_stage >= 2 and max_stages >= 1".into()));
    }
    if !(config.halfwidth > 0.0 && config.termination_width > 0.0) {
        return Err(Error::InvalidArgument("design half-width and termination width must be positive".into()));
    }
    let start = Instant::now();
    let calls = AtomicUsize::new(0);
    let mut samples = SampleSet::new(space.names.clone(), Vec::new(), crate::stochastic::Provenance::LhsGlobal)?;
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut previous: Option<MppResult> = None;
    let mut terminated = false;
    let max_skipped = config.n_per_stage / 100;
    let mut last = None;

    for stage in 1..=config.max_stages {
        let stage_start = Instant::now();
        let stage_seed = config.seed.wrapping_add(stage as u64);
        let (opts, region) = match &previous {
            None => (LhsOptions::default(), Design::Global),
            Some(m) => (
                LhsOptions { center: Some(m.z.clone()), halfwidth: Some(vec![config.halfwidth; space.dim()]) },
                Design::Local { center: &m.z, halfwidth: config.halfwidth },
            ),
        };
        let design = lhs_sample(config.n_per_stage, space, &opts, stage_seed)?;
        let (new, skipped) = evaluate_design(&design, &region, space, eval, &calls, stage_seed ^ 0x5eed)?;
        if skipped > max_skipped {
            return Err(Error::InsufficientData(format!(
                "stage {stage}: {skipped} of {} samples failed twice (cap {max_skipped})",
                config.n_per_stage
            )));
        }
        samples.extend(&new)?;
        let (net, report) = train(&samples, &config.train)?;
        let ls = SurrogateLimitState::new(&net, space)?;
        let mpp = ls.mpp(&config.form)?;
        let trace_summary = || {
            stages.iter().map(|r| format!("stage {} beta {:.4}", r.stage, r.beta_form)).collect::<Vec<_>>().join("; ")
        };
        if !mpp.converged {
            return Err(Error::NoConvergence {
                iterations: config.form.max_iter,
                what: format!("MPP search at stage {stage} (previous: {})", trace_summary()),
            });
        }
        let sorm = if mpp.beta > 0.0 { Some(ls.sorm(&mpp)?) } else { None };
        let shift = previous
            .as_ref()
            .map(|p| p.z.iter().zip(&mpp.z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        let record = StageRecord {
            stage,
            n_new: new.len(),
            n_total: samples.len(),
            n_skipped: skipped,
            mpp_z: mpp.z.clone(),
            mpp_x: mpp.x.clone(),
            beta_form: mpp.beta,
            pf_form: mpp.form_pf(),
            beta_sorm: sorm.as_ref().map(|s| s.beta),
            pf_sorm: sorm.as_ref().map(|s| s.pf),
            sorm_singular: sorm.as_ref().is_some_and(|s| s.singular),
            test_mse: report.test_mse,
            mpp_shift: shift,
            seconds: stage_start.elapsed().as_secs_f64(),
        };
        info!(
            "stage {stage}: {} samples, beta {:.4}, pf_form {:.4}, shift {:?}",
            record.n_total, record.beta_form, record.pf_form, record.mpp_shift
        );
        stages.push(record);
        let settled = shift.is_some_and(|s| s <= 0.5 * config.termination_width);
        previous = Some(mpp.clone());
        last = Some((net, report, mpp));
        if settled {
            terminated = true;
            break;
        }
    }

    let (net, train_report, mpp) = last.expect("at least one stage runs");
    let g = |x: &[f64]| net.forward(x);
    let density = InstrumentalDensity::at(mpp.z.clone());
    let mut result = is_pf(&g, space, &density, config.n_is, config.seed.wrapping_add(100))?;
    let n_fem = calls.load(Ordering::Relaxed);
    result.method = Method::AnnMcis;
    result.beta = Some(mpp.beta);
    result.n_model_calls = n_fem;
    result.seconds = start.elapsed().as_secs_f64();
    result.seed = Some(config.seed);
    if !terminated {
        result.warnings.push(format!("MPP did not settle within {} stages", config.max_stages));
    }
    Ok(AdaptiveResult { result, net, train_report, mpp, stages, terminated, samples, n_fem })
}
