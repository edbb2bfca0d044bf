//! Implementations of the CLI subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::json;

use seqr_core::adapter::{self, LibraryBundle};
use seqr_core::calibration;
use seqr_core::cost::{self, CostParams, SweepAxis};
use seqr_core::linalg::{Matrix, Vector};
use seqr_core::routing::{self, Method};
use seqr_core::synthgen::{self, LabeledQuery, SynthSpec};

use crate::config::{parse_list, parse_range, parse_switch, FileConfig};
use crate::{core_err, io_err, BenchArgs, CalibrateArgs, CliError, GenArgs, PreprocessArgs,
    RouteArgs, VerifyArgs};

const QUERY_SEED_SALT: u64 = 0x712a_9dd2_8f6c_3b41;

fn init_logging() {
    let _ = env_logger::Builder::from_env(
        env_logger::Env::default().filter_or("SEQR_LOG", "error"),
    )
    .format_timestamp(None)
    .try_init();
}

/// Atomic text output: temp file + rename, or stdout when no path given.
fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            let tmp = {
                let mut os = path.as_os_str().to_owned();
                os.push(".tmp");
                PathBuf::from(os)
            };
            std::fs::write(&tmp, content).map_err(|e| io_err("writing output", e))?;
            std::fs::rename(&tmp, path).map_err(|e| io_err("renaming output", e))
        }
    }
}

fn require_path(
    flag: Option<PathBuf>,
    cfg: &FileConfig,
    key: &str,
) -> Result<PathBuf, CliError> {
    flag.or_else(|| cfg.get_raw(key).map(PathBuf::from))
        .ok_or_else(|| CliError::Usage(format!("--{key} is required")))
}

fn load_bundle(path: &Path) -> Result<LibraryBundle, CliError> {
    let bundle = adapter::load_library(path)
        .map_err(core_err)
        .map_err(|e| match e {
            CliError::Io(msg) => CliError::Io(format!("{}: {msg}", path.display())),
            other => other,
        })?;
    log::info!(
        "loaded library {}: {} adapters, dims {:?}, shared_a={}",
        path.display(),
        bundle.library.n_adapters(),
        bundle.library.dims(),
        bundle.library.is_shared()
    );
    Ok(bundle)
}

fn load_query_file(path: &Path, n: usize) -> Result<Vec<LabeledQuery>, CliError> {
    let (queries, qn) = synthgen::load_queries(path)
        .map_err(core_err)
        .map_err(|e| match e {
            CliError::Io(msg) => CliError::Io(format!("{}: {msg}", path.display())),
            other => other,
        })?;
    if qn != n {
        return Err(CliError::Usage(format!(
            "query dim {qn} does not match library input dim {n}"
        )));
    }
    Ok(queries)
}

fn parse_method(value: &str) -> Result<Method, CliError> {
    value.parse::<Method>().map_err(CliError::Usage)
}

pub fn cmd_gen(args: GenArgs, cfg: &FileConfig) -> Result<(), CliError> {
    init_logging();
    let preset = args
        .preset
        .or_else(|| cfg.get_raw("preset").map(str::to_string));
    let fig3 = match preset.as_deref() {
        None => false,
        Some("fig3") => true,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown gen preset {other:?} (expected fig3)"
            )))
        }
    };

    let seed = args.seed.or(cfg.get("seed")?).unwrap_or(42);
    let n_adapters = args
        .n_adapters
        .or(cfg.get("n_adapters")?)
        .unwrap_or(if fig3 { 10 } else { 8 });
    let m = args.m.or(cfg.get("m")?).unwrap_or(32);
    let n = args.n.or(cfg.get("n")?).unwrap_or(64);
    let r = args.r.or(cfg.get("r")?).unwrap_or(8);
    let shared_a = match args
        .shared_a
        .or_else(|| cfg.get_raw("shared_a").map(str::to_string))
    {
        Some(v) => parse_switch(&v, "shared-a")?,
        None => true,
    };
    let subspace_dim = args.subspace_dim.or(cfg.get("subspace_dim")?).unwrap_or(2);
    let gain = args
        .gain
        .or(cfg.get("gain")?)
        .unwrap_or(if fig3 { 1.8 } else { 3.0 });
    let noise = args.noise.or(cfg.get("noise")?).unwrap_or(0.1);
    let bias = match args.bias.or_else(|| cfg.get_raw("bias").map(str::to_string)) {
        Some(list) => Some(parse_list::<f64>(&list, "bias")?),
        None => None,
    };
    let pairs = args
        .pairs
        .or(cfg.get("pairs")?)
        .unwrap_or(usize::from(fig3));
    let per_task = args
        .per_task
        .or(cfg.get("per_task")?)
        .unwrap_or(if fig3 { 50 } else { 20 });
    let out = require_path(args.out, cfg, "out")?;

    let spec = SynthSpec {
        seed,
        n_adapters,
        m,
        n,
        r,
        shared_a,
        task_subspace_dim: subspace_dim,
        signal_gain: gain,
        noise_level: noise,
        bias_scales: bias,
    };

    let (library, queries) = if pairs > 0 {
        synthgen::gen_mixed(&spec, pairs, per_task).map_err(core_err)?
    } else {
        let library = synthgen::gen_library(&spec).map_err(core_err)?;
        let query_seed = args
            .query_seed
            .or(cfg.get("query_seed")?)
            .unwrap_or(seed ^ QUERY_SEED_SALT);
        let queries =
            synthgen::gen_queries_seeded(&library, &spec, per_task, query_seed).map_err(core_err)?;
        (library, queries)
    };

    let bundle = LibraryBundle::new(library);
    adapter::save_library(&bundle, &out).map_err(core_err)?;

    let queries_out = args
        .queries_out
        .or_else(|| cfg.get_raw("queries_out").map(PathBuf::from));
    if let Some(qpath) = &queries_out {
        synthgen::save_queries(&queries, n, qpath).map_err(core_err)?;
    }

    let summary = json!({
        "generated": {
            "library": out.display().to_string(),
            "queries": queries_out.map(|p| p.display().to_string()),
            "n_adapters": bundle.library.n_adapters(),
            "n_queries": queries.len(),
            "seed": seed,
        }
    });
    println!("{summary}");
    Ok(())
}

pub fn cmd_preprocess(args: PreprocessArgs, cfg: &FileConfig) -> Result<(), CliError> {
    init_logging();
    let library = require_path(args.library, cfg, "library")?;
    let out = require_path(args.out, cfg, "out")?;
    let forms_flag = args
        .forms
        .or_else(|| cfg.get_raw("forms").map(str::to_string))
        .unwrap_or_else(|| "all".to_string());
    let discard_b = match args
        .discard_b
        .or_else(|| cfg.get_raw("discard_b").map(str::to_string))
    {
        Some(v) => parse_switch(&v, "discard-b")?,
        None => false,
    };

    let mut bundle = load_bundle(&library)?;
    let wanted: Vec<&str> = if forms_flag == "all" {
        if bundle.library.is_shared() {
            vec!["arrow", "spectr", "seqr"]
        } else {
            vec!["arrow", "spectr"]
        }
    } else {
        forms_flag.split(',').map(str::trim).collect()
    };
    for form in &wanted {
        match *form {
            "arrow" => {
                bundle.forms.arrow = Some(bundle.library.build_arrow_forms().map_err(core_err)?)
            }
            "spectr" => {
                bundle.forms.spectr = Some(bundle.library.build_spectr_forms().map_err(core_err)?)
            }
            "seqr" => {
                bundle.forms.seqr = Some(bundle.library.build_seqr_forms().map_err(core_err)?)
            }
            other => {
                return Err(CliError::Usage(format!(
                    "unknown form {other:?} (expected arrow|spectr|seqr|all)"
                )))
            }
        }
    }
    bundle.discard_b = discard_b;
    adapter::save_library(&bundle, &out).map_err(core_err)?;
    println!(
        "{}",
        json!({"preprocessed": {"library": out.display().to_string(), "forms": wanted, "discard_b": discard_b}})
    );
    Ok(())
}

/// Groups labeled queries into per-adapter sample lists by task label.
fn group_by_task(queries: &[LabeledQuery], n_adapters: usize) -> Result<Vec<Vec<Vector>>, CliError> {
    let mut grouped = vec![Vec::new(); n_adapters];
    for q in queries {
        if q.task >= n_adapters {
            return Err(CliError::Usage(format!(
                "query task label {} out of range for {} adapters",
                q.task, n_adapters
            )));
        }
        grouped[q.task].push(q.x.clone());
    }
    Ok(grouped)
}

pub fn cmd_calibrate(args: CalibrateArgs, cfg: &FileConfig) -> Result<(), CliError> {
    init_logging();
    let library = require_path(args.library, cfg, "library")?;
    let queries_path = require_path(args.queries, cfg, "queries")?;
    let out = require_path(args.out, cfg, "out")?;
    let method = parse_method(
        &args
            .method
            .or_else(|| cfg.get_raw("method").map(str::to_string))
            .unwrap_or_else(|| "seqr".to_string()),
    )?;

    let mut bundle = load_bundle(&library)?;
    let (_, n, _) = bundle.library.dims();
    let queries = load_query_file(&queries_path, n)?;
    let samples = group_by_task(&queries, bundle.library.n_adapters())?;

    let stats = calibration::calibrate(&bundle, method, &samples).map_err(core_err)?;
    bundle.stats = Some(stats);
    adapter::save_library(&bundle, &out).map_err(core_err)?;
    println!(
        "{}",
        json!({"calibrated": {"library": out.display().to_string(), "method": method.as_str(), "samples": queries.len()}})
    );
    Ok(())
}

struct RouteAccuracy {
    vs_oracle: f64,
    vs_task: f64,
}

fn route_all(
    bundle: &LibraryBundle,
    method: Method,
    queries: &[LabeledQuery],
    k: usize,
    calibrated: bool,
) -> Result<(Vec<routing::RoutingDecision>, RouteAccuracy), CliError> {
    let stats = if calibrated {
        Some(bundle.stats.as_ref().ok_or_else(|| {
            CliError::Usage("--calibrated on requires stored calibration stats".to_string())
        })?)
    } else {
        None
    };
    let mut decisions = Vec::with_capacity(queries.len());
    let mut oracle_hits = 0usize;
    let mut task_hits = 0usize;
    for q in queries {
        let decision = routing::route(bundle, method, &q.x, k, stats).map_err(core_err)?;
        if decision.selected == q.oracle_norm_winner {
            oracle_hits += 1;
        }
        if decision.selected == q.task {
            task_hits += 1;
        }
        decisions.push(decision);
    }
    let total = queries.len().max(1) as f64;
    Ok((
        decisions,
        RouteAccuracy {
            vs_oracle: oracle_hits as f64 / total,
            vs_task: task_hits as f64 / total,
        },
    ))
}

pub fn cmd_route(args: RouteArgs, cfg: &FileConfig) -> Result<(), CliError> {
    init_logging();
    let preset = args
        .preset
        .or_else(|| cfg.get_raw("preset").map(str::to_string));
    let fig3 = match preset.as_deref() {
        None => false,
        Some("fig3") => true,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown route preset {other:?} (expected fig3)"
            )))
        }
    };

    let library = require_path(args.library, cfg, "library")?;
    let queries_path = require_path(args.queries, cfg, "queries")?;
    let method = parse_method(
        &args
            .method
            .or_else(|| cfg.get_raw("method").map(str::to_string))
            .unwrap_or_else(|| "seqr".to_string()),
    )?;
    let calibrated = match args
        .calibrated
        .or_else(|| cfg.get_raw("calibrated").map(str::to_string))
    {
        Some(v) => parse_switch(&v, "calibrated")?,
        None => false,
    };

    let bundle = load_bundle(&library)?;
    let n_adapters = bundle.library.n_adapters();
    let (_, n, _) = bundle.library.dims();
    let queries = load_query_file(&queries_path, n)?;
    if queries.is_empty() {
        return Err(CliError::Usage("query file is empty".to_string()));
    }

    let k_sweep = args
        .k_sweep
        .or_else(|| cfg.get_raw("k_sweep").map(str::to_string))
        .or(if fig3 {
            Some(format!("1..{n_adapters}"))
        } else {
            None
        });

    if let Some(range) = k_sweep {
        let (lo, hi) = parse_range(&range, "k-sweep")?;
        let hi = hi.min(n_adapters);
        if lo > hi {
            return Err(CliError::Usage(format!(
                "--k-sweep range starts at {lo} but the library has only {n_adapters} adapters"
            )));
        }
        let mut csv = format!("k,lag_accuracy,{}_accuracy\n", method.as_str());
        for k in lo..=hi {
            let (_, lag_acc) = route_all(&bundle, Method::Lag, &queries, k, calibrated)?;
            let (_, m_acc) = route_all(&bundle, method, &queries, k, calibrated)?;
            let _ = writeln!(csv, "{k},{},{}", lag_acc.vs_oracle, m_acc.vs_oracle);
        }
        return emit(args.out.as_deref(), &csv);
    }

    let k = args.k.or(cfg.get("k")?).unwrap_or(1);
    let (decisions, accuracy) = route_all(&bundle, method, &queries, k, calibrated)?;

    let mut text = String::new();
    for (i, (decision, query)) in decisions.iter().zip(&queries).enumerate() {
        let record = json!({
            "query": i,
            "task": query.task,
            "oracle": query.oracle_norm_winner,
            "method": decision.method.as_str(),
            "selected": decision.selected,
            "scores": decision.scores,
        });
        let _ = writeln!(text, "{record}");
    }
    let summary = json!({
        "summary": {
            "method": method.as_str(),
            "k": k,
            "calibrated": calibrated,
            "queries": queries.len(),
            "accuracy_vs_oracle": accuracy.vs_oracle,
            "accuracy_vs_task": accuracy.vs_task,
        }
    });
    let _ = writeln!(text, "{summary}");
    emit(args.out.as_deref(), &text)
}

pub fn cmd_bench(args: BenchArgs, cfg: &FileConfig) -> Result<(), CliError> {
    init_logging();
    let seed = args.seed.or(cfg.get("seed")?).unwrap_or(42);
    let fixed = CostParams {
        n_adapters: args.n_adapters.or(cfg.get("n_adapters")?).unwrap_or(1000),
        m: args.m.or(cfg.get("m")?).unwrap_or(4096),
        n: args.n.or(cfg.get("n")?).unwrap_or(4096),
        r: args.r.or(cfg.get("r")?).unwrap_or(8),
        lag_k: args.k.or(cfg.get("k")?).unwrap_or(20),
    };
    fixed.validate().map_err(core_err)?;

    let preset = args
        .preset
        .or_else(|| cfg.get_raw("preset").map(str::to_string));
    match preset.as_deref() {
        Some("table1") => {
            let p = CostParams::table1();
            let mut csv = String::from(
                "method,model_flops,label_2sf,label_1sf,measured_flops,storage_params,z_overhead_flops\n",
            );
            for method in cost::TABLE_METHODS {
                let report =
                    cost::measure_synthetic(method, &p, seed, 1, 4).map_err(core_err)?;
                let (two, one) = cost::paper_labels(report.model_flops);
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{}",
                    method,
                    report.model_flops,
                    two,
                    one,
                    report.measured_flops,
                    report.storage_params,
                    report.z_overhead_flops
                );
            }
            emit(args.out.as_deref(), &csv)
        }
        Some("fig5") => {
            let mut rows = Vec::new();
            for (axis, grid) in [
                (SweepAxis::HiddenDim, default_grid(SweepAxis::HiddenDim)),
                (SweepAxis::NumAdapters, default_grid(SweepAxis::NumAdapters)),
                (SweepAxis::Rank, default_grid(SweepAxis::Rank)),
            ] {
                rows.extend(cost::sweep(axis, &grid, &fixed, seed).map_err(core_err)?);
            }
            emit(args.out.as_deref(), &cost::sweep_csv(&rows))
        }
        Some(other) => Err(CliError::Usage(format!(
            "unknown bench preset {other:?} (expected table1|fig5)"
        ))),
        None => {
            let axis: SweepAxis = args
                .axis
                .or_else(|| cfg.get_raw("axis").map(str::to_string))
                .ok_or_else(|| {
                    CliError::Usage("--axis or --preset is required for bench".to_string())
                })?
                .parse()
                .map_err(CliError::Usage)?;
            let grid = match args.grid.or_else(|| cfg.get_raw("grid").map(str::to_string)) {
                Some(g) => parse_list::<usize>(&g, "grid")?,
                None => default_grid(axis),
            };
            let rows = cost::sweep(axis, &grid, &fixed, seed).map_err(core_err)?;
            emit(args.out.as_deref(), &cost::sweep_csv(&rows))
        }
    }
}

fn default_grid(axis: SweepAxis) -> Vec<usize> {
    match axis {
        SweepAxis::HiddenDim => vec![1024, 2048, 4096, 8192],
        SweepAxis::NumAdapters => vec![10, 100, 1000, 10000],
        SweepAxis::Rank => vec![8, 16, 32, 64, 128, 256],
    }
}

pub fn cmd_verify(args: VerifyArgs, cfg: &FileConfig) -> Result<(), CliError> {
    init_logging();
    let seed = args.seed.or(cfg.get("seed")?).unwrap_or(7);
    let trials = args.trials.or(cfg.get("trials")?).unwrap_or(200);

    let mut failures = 0usize;
    let mut check = |name: &str, outcome: Result<String, String>| match outcome {
        Ok(detail) if detail.is_empty() => println!("ok - {name}"),
        Ok(detail) => println!("ok - {name}: {detail}"),
        Err(why) => {
            println!("FAIL - {name}: {why}");
            failures += 1;
        }
    };

    check("counterexample", verify_counterexample());
    if !args.counterexample {
        check("spectr-norm-equivalence", verify_equivalence(seed, trials, false));
        check("seqr-norm-equivalence", verify_equivalence(seed ^ 0xa5, trials, true));
        check("adversarial-routing", verify_adversarial(seed));
        check("lag-monotonicity", verify_lag(seed));
    }

    if failures > 0 {
        Err(CliError::Verification(format!(
            "{failures} verification check(s) failed"
        )))
    } else {
        Ok(())
    }
}

fn verify_counterexample() -> Result<String, String> {
    let (lib, x) = synthgen::counterexample();
    let arrows = lib.build_arrow_forms().map_err(|e| e.to_string())?;
    let arrow_scores = routing::score_arrow(&arrows, &x).map_err(|e| e.to_string())?;
    let naive_scores = routing::score_naive(&lib, &x).map_err(|e| e.to_string())?;

    let tol = 1e-12;
    let sqrt2 = std::f64::consts::SQRT_2;
    if (arrow_scores[0] - 1.0).abs() > tol || (arrow_scores[1] - 1.0 / sqrt2).abs() > tol {
        return Err(format!("arrow scores {arrow_scores:?}"));
    }
    if (naive_scores[0] - 2.0).abs() > tol || (naive_scores[1] - 5.0_f64.sqrt()).abs() > tol {
        return Err(format!("naive scores {naive_scores:?}"));
    }
    let arrow_winner = routing::select(&arrow_scores).map_err(|e| e.to_string())?;
    let naive_winner = routing::select(&naive_scores).map_err(|e| e.to_string())?;
    if arrow_winner != 0 || naive_winner != 1 {
        return Err(format!(
            "winners: arrow {arrow_winner}, naive {naive_winner}"
        ));
    }
    Ok(format!("arrow winner {arrow_winner}, naive winner {naive_winner}"))
}

fn random_library(rng: &mut ChaCha20Rng, shared: bool) -> LibraryBundle {
    let m = rng.gen_range(2..=32);
    let n = rng.gen_range(2..=32);
    let r = rng.gen_range(1..=m.min(n).min(8));
    let count = rng.gen_range(2..=6);
    let mut mat = |rows: usize, cols: usize| {
        Matrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-3.0..3.0)).collect(),
        )
        .expect("finite")
    };
    let library = if shared {
        let a = mat(r, n);
        let adapters = (0..count).map(|i| (format!("t{i}"), mat(m, r))).collect();
        seqr_core::AdapterLibrary::new_shared(a, adapters).expect("valid")
    } else {
        let adapters = (0..count)
            .map(|i| (format!("t{i}"), mat(m, r), mat(r, n)))
            .collect();
        seqr_core::AdapterLibrary::new_unique(adapters).expect("valid")
    };
    LibraryBundle::new(library)
}

fn verify_equivalence(seed: u64, trials: usize, use_seqr: bool) -> Result<String, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let bundle = random_library(&mut rng, use_seqr);
        let (_, n, _) = bundle.library.dims();
        let x = Vector::new((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .expect("finite");
        let naive = routing::score_naive(&bundle.library, &x).map_err(|e| e.to_string())?;
        let candidate = if use_seqr {
            let forms = bundle.library.build_seqr_forms().map_err(|e| e.to_string())?;
            let shared = bundle.library.shared_a().expect("shared");
            routing::score_seqr(&forms, shared, &x, None)
                .map_err(|e| e.to_string())?
                .scores
        } else {
            let forms = bundle
                .library
                .build_spectr_forms()
                .map_err(|e| e.to_string())?;
            routing::score_spectr(&forms, &x, None).map_err(|e| e.to_string())?
        };
        for (i, (a, b)) in naive.iter().zip(&candidate).enumerate() {
            let rel = (a - b).abs() / a.abs().max(1e-6);
            worst = worst.max(rel);
            if rel > 1e-9 {
                return Err(format!(
                    "trial {trial} adapter {i}: naive {a} vs candidate {b} (rel {rel:.3e})"
                ));
            }
        }
        let margin = {
            let mut sorted = naive.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if sorted[0] > 0.0 {
                (sorted[0] - sorted[1]) / sorted[0]
            } else {
                0.0
            }
        };
        if margin > 1e-6 {
            let w1 = routing::select(&naive).map_err(|e| e.to_string())?;
            let w2 = routing::select(&candidate).map_err(|e| e.to_string())?;
            if w1 != w2 {
                return Err(format!("trial {trial}: argmax {w1} vs {w2}"));
            }
        }
    }
    Ok(format!("{trials} trials, worst rel err {worst:.3e}"))
}

fn verify_adversarial(seed: u64) -> Result<String, String> {
    let (lib, queries) =
        synthgen::gen_arrow_adversarial(3, 12, 16, seed).map_err(|e| e.to_string())?;
    let arrows = lib.build_arrow_forms().map_err(|e| e.to_string())?;
    let spectr = lib.build_spectr_forms().map_err(|e| e.to_string())?;
    let seqr = lib.build_seqr_forms().map_err(|e| e.to_string())?;
    let shared = lib.shared_a().expect("shared");
    for q in &queries {
        let arrow_sel =
            routing::select(&routing::score_arrow(&arrows, &q.x).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        if arrow_sel == q.oracle_norm_winner {
            return Err("arrow unexpectedly found the norm-max adapter".to_string());
        }
        let spectr_sel = routing::select(
            &routing::score_spectr(&spectr, &q.x, None).map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let seqr_sel = routing::select(
            &routing::score_seqr(&seqr, shared, &q.x, None)
                .map_err(|e| e.to_string())?
                .scores,
        )
        .map_err(|e| e.to_string())?;
        if spectr_sel != q.oracle_norm_winner || seqr_sel != q.oracle_norm_winner {
            return Err(format!(
                "norm-max {} but spectr {spectr_sel}, seqr {seqr_sel}",
                q.oracle_norm_winner
            ));
        }
    }
    Ok(format!("{} probes", queries.len()))
}

fn verify_lag(seed: u64) -> Result<String, String> {
    let spec = SynthSpec {
        seed,
        n_adapters: 10,
        m: 16,
        n: 48,
        r: 8,
        shared_a: true,
        task_subspace_dim: 2,
        signal_gain: 1.8,
        noise_level: 0.1,
        bias_scales: None,
    };
    let (lib, queries) = synthgen::gen_mixed(&spec, 1, 20).map_err(|e| e.to_string())?;
    let bundle = {
        let mut b = LibraryBundle::new(lib);
        b.forms.arrow = Some(b.library.build_arrow_forms().map_err(|e| e.to_string())?);
        b.forms.spectr = Some(b.library.build_spectr_forms().map_err(|e| e.to_string())?);
        b
    };
    let arrows = bundle.forms.arrow.as_ref().expect("built");
    let spectr = bundle.forms.spectr.as_ref().expect("built");

    let mut last = -1.0;
    for k in 1..=bundle.library.n_adapters() {
        let mut hits = 0usize;
        for q in &queries {
            let decision = routing::route_lag(arrows, spectr, &q.x, k, None)
                .map_err(|e| e.to_string())?;
            if decision.selected == q.oracle_norm_winner {
                hits += 1;
            }
        }
        let acc = hits as f64 / queries.len() as f64;
        if acc + 1e-12 < last {
            return Err(format!("accuracy dropped to {acc} at k={k}"));
        }
        last = acc;
    }
    if (last - 1.0).abs() > 1e-12 {
        return Err(format!("accuracy at k=N is {last}, expected 1.0"));
    }
    Ok(String::new())
}
