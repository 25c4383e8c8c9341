use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use log::warn;
use vscl_core::fem::{assemble_and_solve, fundamental_frequency, FemOptions, PlateModel};
use vscl_core::reliability::{
    adaptive_ann_mcis, is_pf, mcs_pf, AdaptiveConfig, InstrumentalDensity, Method, MppResult, ReliabilityResult,
    SurrogateLimitState,
};
use vscl_core::sensitivity::{garson_si, total_effect_indices, Grouping, SensitivityReport};
use vscl_core::stochastic::{lhs_sample, limit_state, realize, GaussianSpace, LhsOptions, RandomVariableSpec};
use vscl_core::surrogate::{train, SurrogateNet};

use crate::cache::FemCache;
use crate::config::{Model, NetSource, StudyConfig};
use crate::error::{CliError, CliResult};
use crate::record::RunRecord;

pub struct Context {
    pub config: StudyConfig,
    pub out: PathBuf,
    pub cache: Option<PathBuf>,
}

impl Context {
    fn record(&self, command: &str) -> RunRecord {
        let mut r = RunRecord::new(command, self.config.digest(), self.config.model_digest());
        r.seeds.insert("study".into(), self.config.seed);
        r
    }

    fn prepare_out(&self) -> CliResult<()> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&format!("creating {}", self.out.display()), e))
    }

    fn net_path(&self, source: NetSource) -> PathBuf {
        match source {
            NetSource::Train => self.out.join("net.bin"),
            NetSource::Adaptive => self.out.join("net_adaptive.bin"),
        }
    }

    fn load_net(&self, specs: &[RandomVariableSpec]) -> CliResult<SurrogateNet> {
        let source = self.config.method.net;
        let path = self.net_path(source);
        if !path.exists() {
            let hint = match source {
                NetSource::Train => "run `vscl train` first",
                NetSource::Adaptive => "run `vscl reliability adaptive` first",
            };
            return Err(CliError::missing(format!("no trained net at {}; {hint}", path.display())));
        }
        let net = SurrogateNet::load(&path)?;
        let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
        net.check_inputs(&names)
            .map_err(|e| CliError::config(format!("net {} does not match the variables: {e}", path.display())))?;
        Ok(net)
    }

    fn fem_model(&self, specs: Vec<RandomVariableSpec>) -> CliResult<FemModel> {
        let cache = FemCache::new(self.cache.as_deref(), &self.config.model_digest())
            .map_err(|e| CliError::io("creating the FEM cache", e))?;
        let base = self.config.plate_model()?;
        let mut model = FemModel { base, specs, options: self.config.fem.options(1), cache, lambda_r: 0.0 };
        let means: Vec<f64> = model.specs.iter().map(|s| s.mean).collect();
        model.lambda_r = self.config.limit_state.fraction * model.frequency(&means)?;
        Ok(model)
    }
}

/// FEM limit state with cached frequencies.
struct FemModel {
    base: PlateModel,
    specs: Vec<RandomVariableSpec>,
    options: FemOptions,
    cache: FemCache,
    lambda_r: f64,
}

impl FemModel {
    fn frequency(&self, x: &[f64]) -> vscl_core::Result<f64> {
        self.cache.get_or_compute(x, || fundamental_frequency(&realize(&self.base, &self.specs, x)?, &self.options))
    }

    fn g(&self, x: &[f64]) -> vscl_core::Result<f64> {
        limit_state(self.frequency(x)?, self.lambda_r)
    }

    fn finish(&self, record: &mut RunRecord) {
        record.fem_calls = self.cache.misses.load(Ordering::Relaxed);
        record.cache_hits = self.cache.hits.load(Ordering::Relaxed);
        record.cache_corrupt = self.cache.corrupt.load(Ordering::Relaxed);
        if record.cache_corrupt > 0 {
            record.warnings.push(format!("{} corrupt cache entries recomputed", record.cache_corrupt));
        }
    }
}

fn names(specs: &[RandomVariableSpec]) -> Vec<String> {
    specs.iter().map(|s| s.name.clone()).collect()
}

/// Closed-form SSSS frequencies of a homogeneous isotropic plate, when the
/// configured plate is one.
fn navier_frequencies(plate: &PlateModel, count: usize) -> Option<Vec<f64>> {
    let p0 = &plate.plies[0];
    let iso = plate.cutout.is_none()
        && plate.plies.iter().all(|p| {
            p.e1 == p0.e1 && p.e2 == p0.e1 && p.nu12 == p0.nu12 && p.rho == p0.rho && {
                let g = p.e1 / (2.0 * (1.0 + p.nu12));
                (p.g12 - g).abs() <= 1e-9 * g
            }
        });
    if !iso {
        return None;
    }
    let h = plate.total_thickness();
    let d = p0.e1 * h.powi(3) / (12.0 * (1.0 - p0.nu12 * p0.nu12));
    let c = std::f64::consts::PI.powi(2) * (d / (p0.rho * h)).sqrt();
    let mut w: Vec<f64> = (1..=12)
        .flat_map(|m| (1..=12).map(move |n| (m as f64, n as f64)))
        .map(|(m, n)| c * ((m / plate.a).powi(2) + (n / plate.b).powi(2)))
        .collect();
    w.sort_by(f64::total_cmp);
    w.truncate(count);
    Some(w)
}

pub fn validate_fem(ctx: &Context) -> CliResult<String> {
    ctx.prepare_out()?;
    let mut record = ctx.record("validate-fem");
    let v = &ctx.config.validate;
    let base = ctx.config.plate_model()?;
    let options = ctx.config.fem.options(v.modes);
    let analytic = navier_frequencies(&base, v.modes);
    let mut table = String::from("mesh\tmode\tomega\treference\tdeviation_pct\tanalytic\tanalytic_deviation_pct\n");
    let mut fundamentals = Vec::new();
    for &n in &v.meshes {
        let plate = PlateModel { mesh_nx: n, mesh_ny: n, ..base.clone() };
        let start = Instant::now();
        let r = assemble_and_solve(&plate, &options)?;
        record.wall_seconds.insert(format!("mesh_{n}"), start.elapsed().as_secs_f64());
        if r.converged_modes < v.modes {
            record.warnings.push(format!("mesh {n}: {} of {} modes converged", r.converged_modes, v.modes));
        }
        fundamentals.push(r.fundamental());
        for (k, &w) in r.frequencies.iter().enumerate() {
            let cell = |refs: Option<f64>| match refs {
                Some(r) => (format!("{r:e}"), format!("{:.4}", 100.0 * (w - r) / r)),
                None => ("-".into(), "-".into()),
            };
            let (reference, dev) = cell(v.reference.get(k).copied());
            let (an, an_dev) = cell(analytic.as_ref().and_then(|a| a.get(k).copied()));
            writeln!(table, "{n}\t{}\t{w:e}\t{reference}\t{dev}\t{an}\t{an_dev}", k + 1).unwrap();
        }
    }
    if !fundamentals.windows(2).all(|w| w[1] <= w[0]) {
        record.warnings.push(format!("fundamental frequency is not monotone in the mesh: {fundamentals:?}"));
    }
    record.emit(&ctx.out, "validate_fem.tsv", table.as_bytes())?;
    record.save(&ctx.out)?;
    Ok(table)
}

pub fn cmd_train(ctx: &Context) -> CliResult<String> {
    ctx.prepare_out()?;
    let mut record = ctx.record("train");
    let specs = ctx.config.require_variables()?;
    let space = GaussianSpace::new(&specs)?;
    let model = ctx.fem_model(specs)?;
    let tc = &ctx.config.surrogate.train;
    record.seeds.insert("train".into(), tc.seed);
    let mut table = String::from("samples\tn_train\tn_validation\tn_test\tepochs\ttrain_mse\tvalidation_mse\ttest_mse\n");
    let mut last = None;
    for &n in &ctx.config.surrogate.samples {
        let start = Instant::now();
        let mut design = lhs_sample(n, &space, &LhsOptions::default(), ctx.config.seed)?;
        design.evaluate(|x| model.g(x))?;
        record.wall_seconds.insert(format!("fem_{n}"), start.elapsed().as_secs_f64());
        let start = Instant::now();
        let (net, report) = train(&design, tc).map_err(|e| match e {
            vscl_core::Error::InsufficientData(m) => CliError { class: "insufficient-data", message: m, code: 3 },
            e => e.into(),
        })?;
        record.wall_seconds.insert(format!("train_{n}"), start.elapsed().as_secs_f64());
        writeln!(
            table,
            "{n}\t{}\t{}\t{}\t{}\t{:e}\t{:e}\t{:e}",
            report.n_train,
            report.n_validation,
            report.n_test,
            report.epochs,
            report.train_mse,
            report.validation_mse,
            report.test_mse
        )
        .unwrap();
        for w in &report.warnings {
            record.warnings.push(format!("n={n}: {w}"));
        }
        last = Some((design, net, report));
    }
    let (design, net, report) = last.expect("at least one design size");
    let mut history = String::from("epoch\ttrain_mse\tvalidation_mse\ttest_mse\n");
    for (e, a, b, c) in &report.history {
        writeln!(history, "{e}\t{a:e}\t{b:e}\t{c:e}").unwrap();
    }
    record.emit(&ctx.out, "samples.tsv", design.to_table().as_bytes())?;
    record.emit(&ctx.out, "train_report.tsv", table.as_bytes())?;
    record.emit(&ctx.out, "train_history.tsv", history.as_bytes())?;
    record.emit(&ctx.out, "net.bin", &net.to_bytes())?;
    model.finish(&mut record);
    record.save(&ctx.out)?;
    Ok(table)
}

fn mpp_table(specs: &[RandomVariableSpec], mpp: &MppResult) -> String {
    let mut s = String::from("variable\tz\tx\n");
    for (i, spec) in specs.iter().enumerate() {
        writeln!(s, "{}\t{:e}\t{:e}", spec.name, mpp.z[i], mpp.x[i]).unwrap();
    }
    s
}

fn converged_mpp(ls: &SurrogateLimitState, ctx: &Context) -> CliResult<MppResult> {
    let mpp = ls.mpp(&ctx.config.method.form)?;
    if !mpp.converged {
        let last: Vec<String> = mpp.trace.iter().rev().take(3).map(|r| format!("g={:.3e}", r.g)).collect();
        return Err(vscl_core::Error::NoConvergence {
            iterations: ctx.config.method.form.max_iter,
            what: format!("MPP search on the surrogate (last iterates {})", last.join(", ")),
        }
        .into());
    }
    Ok(mpp)
}

/// Sampling limit state on the surrogate that counts queries outside the
/// training box.
fn surrogate_g<'a>(net: &'a SurrogateNet, outside: &'a AtomicUsize) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |x: &[f64]| {
        if net.is_out_of_range(x) {
            outside.fetch_add(1, Ordering::Relaxed);
        }
        net.forward(x)
    }
}

fn note_outside(result: &mut ReliabilityResult, outside: &AtomicUsize) {
    let k = outside.load(Ordering::Relaxed);
    if k > 0 {
        result.warnings.push(format!("{k} surrogate queries outside the training box"));
    }
}

/// Runs `estimate` on the FEM limit state; the estimators take infallible
/// closures, so the first solver error is kept aside and returned after.
fn with_fem<T>(
    model: &FemModel,
    estimate: impl FnOnce(&(dyn Fn(&[f64]) -> f64 + Sync)) -> vscl_core::Result<T>,
) -> CliResult<T> {
    let failure: Mutex<Option<vscl_core::Error>> = Mutex::new(None);
    let g = |x: &[f64]| match model.g(x) {
        Ok(v) => v,
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            f64::NAN
        }
    };
    let out = estimate(&g)?;
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e.into());
    }
    Ok(out)
}

pub fn cmd_reliability(ctx: &Context, method: &str) -> CliResult<String> {
    ctx.prepare_out()?;
    let command = format!("reliability {method}");
    let mut record = ctx.record(&command);
    let specs = ctx.config.require_variables()?;
    let space = GaussianSpace::new(&specs)?;
    let start = Instant::now();
    let seed = ctx.config.seed;
    let mut extra = String::new();
    let result = match method {
        "form" | "sorm" => {
            let net = ctx.load_net(&specs)?;
            let ls = SurrogateLimitState::new(&net, &space)?;
            let mpp = converged_mpp(&ls, ctx)?;
            record.emit(&ctx.out, &format!("mpp_{method}.tsv"), mpp_table(&specs, &mpp).as_bytes())?;
            if method == "form" {
                ReliabilityResult::approximation(Method::Form, mpp.form_pf(), mpp.beta)
            } else {
                let s = ls.sorm(&mpp)?;
                let mut r = ReliabilityResult::approximation(Method::Sorm, s.pf, s.beta);
                if s.singular {
                    r.warnings.push("curvature correction singular; FORM value reported".into());
                }
                writeln!(extra, "curvatures {:?}", s.curvatures).unwrap();
                r
            }
        }
        "mcs" | "mcis" => {
            let cfg = if method == "mcs" { &ctx.config.method.mcs } else { &ctx.config.method.mcis };
            let net = if method == "mcis" || cfg.model == Model::Surrogate { Some(ctx.load_net(&specs)?) } else { None };
            let density = match &net {
                Some(net) if method == "mcis" => {
                    let mpp = converged_mpp(&SurrogateLimitState::new(net, &space)?, ctx)?;
                    Some(InstrumentalDensity::at(mpp.z))
                }
                _ => None,
            };
            let run = |g: &(dyn Fn(&[f64]) -> f64 + Sync)| match &density {
                Some(h) => is_pf(&g, &space, h, cfg.samples, seed),
                None => mcs_pf(&g, &space, cfg.samples, seed),
            };
            match cfg.model {
                Model::Surrogate => {
                    let outside = AtomicUsize::new(0);
                    let net = net.as_ref().expect("surrogate loaded");
                    let g = surrogate_g(net, &outside);
                    let mut r = run(&g)?;
                    r.method = if method == "mcs" { Method::AnnMcs } else { Method::AnnMcis };
                    note_outside(&mut r, &outside);
                    r
                }
                Model::Fem => {
                    let model = ctx.fem_model(specs.clone())?;
                    let mut r = with_fem(&model, run)?;
                    model.finish(&mut record);
                    r.n_model_calls = record.fem_calls;
                    r
                }
            }
        }
        "adaptive" => {
            let model = ctx.fem_model(specs.clone())?;
            let a = &ctx.config.method.adaptive;
            let config = AdaptiveConfig {
                n_per_stage: a.n_per_stage,
                max_stages: a.max_stages,
                halfwidth: a.halfwidth,
                termination_width: a.termination_width,
                n_is: a.n_is,
                seed,
                form: ctx.config.method.form,
                train: ctx.config.surrogate.train.clone(),
            };
            record.seeds.insert("train".into(), config.train.seed);
            let out = adaptive_ann_mcis(&|x: &[f64]| model.g(x), &space, &config)?;
            model.finish(&mut record);
            for s in &out.stages {
                record.wall_seconds.insert(format!("stage_{}", s.stage), s.seconds);
            }
            record.emit(&ctx.out, "stages.tsv", out.stage_table().as_bytes())?;
            record.emit(&ctx.out, "samples_adaptive.tsv", out.samples.to_table().as_bytes())?;
            record.emit(&ctx.out, "mpp_adaptive.tsv", mpp_table(&specs, &out.mpp).as_bytes())?;
            record.emit(&ctx.out, "net_adaptive.bin", &out.net.to_bytes())?;
            extra.push_str(&out.stage_table());
            for w in &out.train_report.warnings {
                record.warnings.push(format!("final training: {w}"));
            }
            let mut r = out.result;
            r.n_model_calls = record.fem_calls;
            r
        }
        other => return Err(CliError::config(format!("unknown reliability method {other:?}"))),
    };
    record.wall_seconds.insert("total".into(), start.elapsed().as_secs_f64());
    record.warnings.extend(result.warnings.iter().cloned());
    let table = format!("{}\n{}\n", ReliabilityResult::TABLE_HEADER, result.table_row());
    record.emit(&ctx.out, &format!("reliability_{method}.tsv"), table.as_bytes())?;
    record.save(&ctx.out)?;
    Ok(format!("{extra}{}", result.report()))
}

pub fn cmd_sensitivity(ctx: &Context) -> CliResult<String> {
    ctx.prepare_out()?;
    let mut record = ctx.record("sensitivity");
    let specs = ctx.config.require_variables()?;
    let space = GaussianSpace::new(&specs)?;
    let net = ctx.load_net(&specs)?;
    let start = Instant::now();
    let seed = ctx.config.seed;
    let singles = Grouping::singletons(&names(&specs));
    let groups = Grouping::by_binding(&specs);
    let mpp = converged_mpp(&SurrogateLimitState::new(&net, &space)?, ctx)?;
    let density = InstrumentalDensity::at(mpp.z.clone());
    let outside = AtomicUsize::new(0);
    let g = surrogate_g(&net, &outside);
    let n = &ctx.config.method.sensitivity;

    let garson = garson_si(&net)?;
    let reports: Vec<(&str, SensitivityReport)> = vec![
        ("garson", garson.clone()),
        ("garson_grouped", garson.pooled(&groups)?),
        ("total_mcs", total_effect_indices(&g, &space, &singles, n.samples, seed, None)?),
        ("total_mcs_grouped", total_effect_indices(&g, &space, &groups, n.samples, seed, None)?),
        ("total_is", total_effect_indices(&g, &space, &singles, n.samples_is, seed, Some(&density))?),
        ("total_is_grouped", total_effect_indices(&g, &space, &groups, n.samples_is, seed, Some(&density))?),
    ];
    record.wall_seconds.insert("total".into(), start.elapsed().as_secs_f64());
    let k = outside.load(Ordering::Relaxed);
    if k > 0 {
        record.warnings.push(format!("{k} surrogate queries outside the training box"));
    }
    let mut text = String::new();
    for (name, r) in &reports {
        record.warnings.extend(r.warnings.iter().map(|w| format!("{name}: {w}")));
        record.emit(&ctx.out, &format!("sensitivity_{name}.tsv"), r.to_table().as_bytes())?;
        record.emit(&ctx.out, &format!("sensitivity_{name}_bars.tsv"), r.bar_chart().as_bytes())?;
        if name.ends_with("grouped") {
            writeln!(text, "# {name}\n{}", r.bar_chart()).unwrap();
        }
    }
    record.save(&ctx.out)?;
    Ok(text)
}

/// Summary of every result and run record found in the output directory.
pub fn cmd_report(out: &Path) -> CliResult<String> {
    let entries = fs::read_dir(out).map_err(|e| CliError::missing(format!("no output directory {}: {e}", out.display())))?;
    let mut files: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    files.sort();
    let mut text = String::new();
    let mut rows = Vec::new();
    for f in &files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("reliability_") && name.ends_with(".tsv") {
            let t = fs::read_to_string(f).map_err(|e| CliError::io(&format!("reading {}", f.display()), e))?;
            let parsed = vscl_core::reliability::parse_result_table(&t)?;
            rows.extend(t.lines().skip(1).zip(parsed).map(|(l, _)| l.to_string()));
        }
    }
    if !rows.is_empty() {
        writeln!(text, "{}", ReliabilityResult::TABLE_HEADER).unwrap();
        for r in &rows {
            writeln!(text, "{r}").unwrap();
        }
    }
    let grouped = out.join("sensitivity_total_is_grouped_bars.tsv");
    if let Ok(t) = fs::read_to_string(&grouped) {
        writeln!(text, "\n# total-effect indices (grouped, importance sampling)\n{t}").unwrap();
    }
    for f in &files {
        let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if name.starts_with("run_") && name.ends_with(".toml") {
            let r = RunRecord::load(f)?;
            let total = r.wall_seconds.get("total").copied().unwrap_or_else(|| r.wall_seconds.values().sum());
            writeln!(
                text,
                "run {:<22} fem {:>6} cache hits {:>6} artifacts {:>2} wall {:.1}s warnings {}",
                r.command,
                r.fem_calls,
                r.cache_hits,
                r.artifacts.len(),
                total,
                r.warnings.len()
            )
            .unwrap();
            for w in &r.warnings {
                warn!("{}: {w}", r.command);
            }
        }
    }
    if text.is_empty() {
        return Err(CliError::missing(format!("nothing to report in {}", out.display())));
    }
    Ok(text)
}
