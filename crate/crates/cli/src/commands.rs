use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anncur_core::corpus::{self, Dataset, SplitAssignment};
use anncur_core::curriculum;
use anncur_core::estimators::{self, regression_metrics};
use anncur_core::simulate::{self, Estimator, EvalSplit, InteractiveConfig, Inputs, SyntheticParams};
use anncur_core::stats;
use anncur_core::textfeat::{self, FeatureTable};
use anncur_core::{par, Execution, RegressorSpec};
use anncur_study::{analyze_export, AnalysisParams, Service};
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::error::CliError;

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::EvalStatic(a) => eval_static(a),
        Command::Simulate(a) => simulate(a),
        Command::LooUsers(a) => loo_users(a),
        Command::GenSynthetic(a) => gen_synthetic(a),
        Command::Order(a) => order(a),
        Command::Analyze(a) => analyze(a),
        Command::Serve(a) => serve(a),
        Command::Tune(a) => tune(a),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_data(d: &DataArgs) -> Result<Dataset, CliError> {
    Ok(corpus::load_timed_dataset(&d.data, d.format(), d.annotator.as_deref())?)
}

fn load_split(s: &SplitArgs, dataset: &Dataset, seed: u64) -> Result<SplitAssignment, CliError> {
    let split = match &s.split {
        Some(p) => SplitAssignment::load(p)?,
        None => corpus::make_splits(dataset, &s.fractions, seed)?,
    };
    split.validate(dataset)?;
    Ok(split)
}

fn load_features(f: &FeatureArgs, dataset: &Dataset) -> Result<Option<FeatureTable>, CliError> {
    match (&f.features, f.bow_dim) {
        (Some(p), _) => Ok(Some(textfeat::load_feature_file(p)?)),
        (None, Some(dim)) => Ok(Some(textfeat::bow_table(&dataset.instances, dim, 0)?)),
        (None, None) => Ok(None),
    }
}

fn require_features(f: &FeatureArgs, dataset: &Dataset) -> Result<FeatureTable, CliError> {
    load_features(f, dataset)?.ok_or_else(|| CliError::Usage("this estimator needs --features or --bow-dim".into()))
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

fn eval_static(a: EvalStaticArgs) -> Result<(), CliError> {
    let dataset = load_data(&a.data)?;
    let split = load_split(&a.split, &dataset, a.seed)?;
    let estimator = match a.estimator {
        Estimator::Regressor(spec) => Estimator::Regressor(a.model.spec(spec.kind)),
        h => h,
    };
    let features = match estimator {
        Estimator::Regressor(_) => Some(require_features(&a.features, &dataset)?),
        Estimator::Heuristic(_) => load_features(&a.features, &dataset)?,
    };
    let scores = a.scores.as_ref().map(textfeat::load_score_file).transpose()?;
    let eval_on: EvalSplit = a.split.eval_on.map_or(EvalSplit::Test, Into::into);
    let inputs = Inputs { features: features.as_ref(), scores: scores.as_ref() };
    let r = simulate::run_static(&dataset, &split, eval_on, &estimator, inputs)?;

    let label = match estimator {
        Estimator::Heuristic(h) => format!("{h:?}").to_lowercase(),
        Estimator::Regressor(spec) => spec.label(),
    };
    let m = r.regression;
    println!("{:<40} {:>7} {:>6} {:>8} {:>8} {:>8} {:>8}", "estimator", "n_train", "n_eval", "rho", "mae", "rmse", "r2");
    println!(
        "{:<40} {:>7} {:>6} {:>8} {:>8} {:>8} {:>8}",
        label,
        r.n_train,
        r.n_eval,
        opt(r.rho),
        opt(m.map(|m| m.mae)),
        opt(m.map(|m| m.rmse)),
        opt(m.and_then(|m| m.r2)),
    );
    if let Some(out) = &a.out {
        let body = json!({ "estimator": label, "result": r });
        write_out(Some(out), &format!("{}\n", serde_json::to_string_pretty(&body).expect("result serializes")))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SeededPoint<'a> {
    seed: u64,
    #[serde(flatten)]
    point: &'a simulate::CurvePoint,
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    if a.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    if a.retrain_every == 0 {
        return Err(CliError::Usage("--retrain-every must be at least 1".into()));
    }
    let dataset = load_data(&a.data)?;
    let split = load_split(&a.split, &dataset, a.seed)?;
    let features = Arc::new(require_features(&a.features, &dataset)?);
    let config = InteractiveConfig {
        spec: a.model.spec(a.estimator),
        seed: a.seed,
        retrain_every: a.retrain_every,
        eval_every: a.eval_every,
        eval_on: a.split.eval_on.map_or(EvalSplit::Test, Into::into),
    };
    let seeds: Vec<u64> = (a.seed..a.seed + a.seeds).collect();
    let exec = if a.jobs == 1 { Execution::Sequential } else { Execution::Parallel };
    let curves =
        par::with_jobs(a.jobs, || simulate::run_interactive_seeds(&dataset, &split, features, &config, &seeds, exec))?;

    let mut jsonl = String::new();
    println!("{}", config.spec.label());
    println!("{:>6} {:>6} {:>10} {:>10} {:>10}", "seed", "steps", "final_rho", "peak_rho", "final_mae");
    for c in &curves {
        for p in &c.points {
            jsonl.push_str(&serde_json::to_string(&SeededPoint { seed: c.seed, point: p }).expect("point serializes"));
            jsonl.push('\n');
        }
        let peak = c.points.iter().filter_map(|p| p.rho).fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
        let last_mae = c.points.iter().rev().find_map(|p| p.mae);
        println!("{:>6} {:>6} {:>10} {:>10} {:>10}", c.seed, c.points.len(), opt(c.final_rho()), opt(peak), opt(last_mae));
    }
    if let Some(out) = &a.out {
        write_out(Some(out), &jsonl)?;
    }
    Ok(())
}

fn loo_users(a: LooArgs) -> Result<(), CliError> {
    let dataset = load_data(&a.data)?;
    let features = require_features(&a.features, &dataset)?;
    let spec = a.model.spec(a.estimator);
    let report = simulate::run_loo_users(&dataset, &spec, &features, Execution::Sequential)?;
    println!("{}", spec.label());
    println!("{:<16} {:>7} {:>6} {:>8} {:>8} {:>8} {:>8}", "annotator", "n_train", "n_eval", "mae", "rmse", "r2", "rho");
    for f in &report.folds {
        let m = f.metrics;
        println!(
            "{:<16} {:>7} {:>6} {:>8.4} {:>8.4} {:>8} {:>8}",
            f.user, f.n_train, f.n_eval, m.mae, m.rmse, opt(m.r2), opt(m.rho)
        );
    }
    let m = report.mean;
    println!("{:<16} {:>7} {:>6} {:>8.4} {:>8.4} {:>8} {:>8}", "mean", "", "", m.mae, m.rmse, opt(m.r2), opt(m.rho));
    if let Some(out) = &a.out {
        write_out(Some(out), &format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")))?;
    }
    Ok(())
}

fn gen_synthetic(a: GenArgs) -> Result<(), CliError> {
    let params = SyntheticParams {
        n: a.n,
        seed: a.seed,
        beta0: a.beta0,
        beta1: a.beta1,
        noise_sigma: a.noise,
        min_tokens: a.min_tokens,
        max_tokens: a.max_tokens,
        vocab_size: a.vocab_size,
        ..SyntheticParams::default()
    };
    let dataset = simulate::gen_synthetic(&params)?;
    write_out(Some(&a.out), &dataset.to_jsonl())?;
    if let Some(p) = &a.split_out {
        write_out(Some(p), &corpus::make_splits(&dataset, &a.fractions, a.seed)?.to_jsonl())?;
    }
    if let Some(p) = &a.features_out {
        let table = textfeat::bow_table(&dataset.instances, a.bow_dim, 0)?;
        write_out(Some(p), &textfeat::write_feature_jsonl(&table))?;
    }
    eprintln!("wrote {} instances to {}", dataset.instances.len(), a.out.display());
    Ok(())
}

fn order(a: OrderArgs) -> Result<(), CliError> {
    let dataset = load_data(&a.data)?;
    let scores = a.scores.as_ref().map(textfeat::load_score_file).transpose()?;
    let items = match a.strategy {
        OrderStrategy::Random => curriculum::random_order(&dataset.instances, a.seed),
        OrderStrategy::Gold => curriculum::gold_order(&dataset.instances).map_err(|e| CliError::Data(e.to_string()))?,
        s => {
            let kind = s.heuristic().expect("heuristic strategy");
            curriculum::precompute_order(&dataset.instances, kind, scores.as_ref())
                .map_err(|e| CliError::Data(e.to_string()))?
        }
    };
    write_out(a.out.as_deref(), &curriculum::order_to_jsonl(&items))
}

fn analyze(a: AnalyzeArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.export)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", a.export.display())))?;
    let params = AnalysisParams { cap_k: a.cap_k, hard_limit: a.hard_limit };
    if !(params.cap_k > 0.0 && params.hard_limit > 0.0) {
        return Err(CliError::Usage("--cap-k and --hard-limit must be positive".into()));
    }
    let report = analyze_export(&text, params)?;
    let body = if a.json {
        format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes"))
    } else {
        report.to_text()
    };
    write_out(a.out.as_deref(), &body)
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let service = match &a.log_dir {
        Some(dir) => {
            let (svc, recovery) = Service::open(dir)?;
            for torn in &recovery.torn {
                eprintln!("warning: cut torn final record: {torn}");
            }
            eprintln!("recovered {} studies from {}", recovery.studies.len(), dir.display());
            svc
        }
        None => {
            eprintln!("warning: no --log-dir or AC_LOG_DIR; studies are kept in memory only");
            Service::ephemeral()
        }
    };
    let service = Arc::new(service);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {}: {e}", a.addr)))?;
        let local = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
        eprintln!("listening on http://{local}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        anncur_study::http::serve(listener, service.clone(), shutdown)
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))
    })?;
    service.close();
    Ok(())
}

/// The regressor grid: ridge at two strengths, GP with a dot-product plus
/// white-noise kernel, and boosted trees.
pub fn tune_grid() -> Vec<RegressorSpec> {
    vec![RegressorSpec::ridge(0.5), RegressorSpec::ridge(1.0), RegressorSpec::gp(1.0, 1.0), RegressorSpec::gbm(100, 0.1, 3)]
}

#[derive(Serialize)]
struct TuneRow {
    model: String,
    features: String,
    mae: f64,
    rmse: f64,
    r2: Option<f64>,
    rho: Option<f64>,
    tau: Option<f64>,
    /// Wall-clock seconds for fitting and predicting.
    seconds: f64,
}

fn tune(a: TuneArgs) -> Result<(), CliError> {
    let dataset = load_data(&a.data)?;
    let split = load_split(&a.split, &dataset, a.seed)?;
    let eval_ids = match a.split.eval_on.map_or(EvalSplit::Dev, Into::into) {
        EvalSplit::Dev if !split.dev.is_empty() => &split.dev,
        EvalSplit::Dev => return Err(CliError::Data("the split has no dev part; use --eval-on test".into())),
        EvalSplit::Test => &split.test,
    };
    let times = dataset.instance_times();
    let pick = |ids: &[String]| -> Vec<(String, f64)> {
        ids.iter().filter_map(|id| times.get(id).map(|t| (id.clone(), *t))).collect()
    };
    let (train, eval) = (pick(&split.train), pick(eval_ids));
    if train.is_empty() || eval.is_empty() {
        return Err(CliError::Data("training or evaluation split has no timed instances".into()));
    }
    let truth: Vec<f64> = eval.iter().map(|p| p.1).collect();
    let y: Vec<f64> = train.iter().map(|p| p.1).collect();

    let mut rows = Vec::new();
    for path in &a.features {
        let table = textfeat::load_feature_file(path)?;
        let rows_of = |set: &[(String, f64)]| -> Result<Vec<&[f64]>, CliError> {
            Ok(set.iter().map(|(id, _)| table.get(id).map(|v| v.as_slice())).collect::<Result<_, _>>()?)
        };
        let (x, xe) = (rows_of(&train)?, rows_of(&eval)?);
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        for spec in tune_grid() {
            let start = Instant::now();
            let model = estimators::fit(&spec, &x, &y).map_err(|e| CliError::Runtime(e.to_string()))?;
            let pred = estimators::predict_batch(&model, &xe, Execution::Sequential)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let seconds = start.elapsed().as_secs_f64();
            let m = regression_metrics(&truth, &pred).map_err(|e| CliError::Runtime(e.to_string()))?;
            let tau = stats::kendall_tau(&truth, &pred).map_err(|e| CliError::Runtime(e.to_string()))?;
            rows.push(TuneRow { model: spec.label(), features: name.clone(), mae: m.mae, rmse: m.rmse, r2: m.r2, rho: m.rho, tau, seconds });
        }
    }

    let mut table = String::new();
    let _ = writeln!(table, "{:<40} {:<20} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9}", "model", "features", "mae", "rmse", "r2", "rho", "tau", "t");
    for r in &rows {
        let _ = writeln!(
            table,
            "{:<40} {:<20} {:>8.4} {:>8.4} {:>8} {:>8} {:>8} {:>9.3}",
            r.model, r.features, r.mae, r.rmse, opt(r.r2), opt(r.rho), opt(r.tau), r.seconds
        );
    }
    print!("{table}");
    if let Some(out) = &a.out {
        let jsonl: String =
            rows.iter().map(|r| format!("{}\n", serde_json::to_string(r).expect("row serializes"))).collect();
        write_out(Some(out), &jsonl)?;
    }
    Ok(())
}
