use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use cgp_core::baselines::SpectralConfig;
use cgp_core::ensemble::{self, FitMode, GridPolicy};
use cgp_core::experiment::{self, CgpRunSpec, DslRunSpec};
use cgp_core::metrics::{self, ReplicateResult, SummaryResult};
use cgp_core::model_io;
use cgp_core::rng::sub_seed;
use cgp_core::simdata::{self, ScenarioTable, SwissRollConfig};

use crate::error::{CliError, Result};
use crate::io;
use crate::model_file::{self, Manifest, ModelFile};
use crate::{BenchmarkArgs, FitArgs, ModeArg, PredictArgs, ScenarioArg, SimulateArgs};

impl From<ModeArg> for FitMode {
    fn from(m: ModeArg) -> FitMode {
        match m {
            ModeArg::Exact => FitMode::Exact,
            ModeArg::Lowrank => FitMode::LowRank,
        }
    }
}

fn mode_name(mode: FitMode) -> &'static str {
    match mode {
        FitMode::Exact => "exact",
        FitMode::LowRank => "lowrank",
    }
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    if args.n_pred > 0 && args.test_out.is_none() {
        return Err(CliError::Usage(
            "--test-out is required when --n-pred > 0".into(),
        ));
    }
    let mut cfg = SwissRollConfig::new(
        args.n + args.n_pred,
        args.p,
        args.tau,
        args.hmax,
        args.seed,
    );
    cfg.response_noise_sd = args.response_noise_sd;
    let ds = simdata::gen_swiss_roll(&cfg)?;

    let mut manifest_args = BTreeMap::new();
    manifest_args.insert("command".into(), "simulate".into());
    manifest_args.insert("n".into(), args.n.to_string());
    manifest_args.insert("n_pred".into(), args.n_pred.to_string());
    manifest_args.insert("p".into(), args.p.to_string());
    manifest_args.insert("tau".into(), args.tau.to_string());
    manifest_args.insert("hmax".into(), args.hmax.to_string());
    manifest_args.insert(
        "response_noise_sd".into(),
        args.response_noise_sd.to_string(),
    );
    let manifest = Manifest::new(args.seed, manifest_args);

    if args.n_pred > 0 {
        let (train, test) = simdata::split(&ds, args.n)?;
        io::write_dataset(&args.out, &train.x, &train.y)?;
        let test_out = args.test_out.as_ref().expect("checked above");
        io::write_dataset(test_out, &test.x, &test.y)?;
        model_file::write_manifest_sidecar(test_out, &manifest)?;
    } else {
        io::write_dataset(&args.out, &ds.x, &ds.y)?;
    }
    model_file::write_manifest_sidecar(&args.out, &manifest)?;
    if let Some(latent_out) = &args.latent_out {
        io::write_latent(latent_out, ds.latent.as_ref().expect("synthetic data"))?;
        model_file::write_manifest_sidecar(latent_out, &manifest)?;
    }
    eprintln!(
        "wrote {} rows x {} features to {}",
        args.n + args.n_pred,
        args.p,
        args.out.display()
    );
    Ok(())
}

fn grid_policy(
    stride: usize,
    m_cap: Option<usize>,
    m_phi: usize,
    subsample_cap: usize,
    per_member_phi: bool,
) -> GridPolicy {
    GridPolicy {
        stride,
        m_cap,
        subsample_cap,
        m_phi,
        per_member_phi,
    }
}

pub fn fit(args: FitArgs) -> Result<()> {
    let data = io::read_dataset(&args.train)?;
    let y = data.y.ok_or_else(|| {
        CliError::Parse(format!(
            "{}: training file needs a y column",
            args.train.display()
        ))
    })?;
    let mode: FitMode = args.mode.into();
    let policy = grid_policy(
        args.stride,
        args.m_cap,
        args.m_phi,
        args.subsample_cap,
        args.per_member_phi,
    );
    if mode == FitMode::LowRank && args.m_phi >= data.x.nrows() {
        eprintln!(
            "note: sample-map rank {} >= n = {}; clamping to the identity map (exact-equivalent)",
            args.m_phi,
            data.x.nrows()
        );
    }
    let model = ensemble::fit_ensemble(&data.x, &y, mode, &policy, args.seed)?;

    println!("member   m      lambda        log_ml      weight");
    for (l, member) in model.members.iter().enumerate() {
        println!(
            "{l:6} {m:4} {lambda:11.5} {log_ml:13.4} {weight:11.4e}",
            m = member.config.m,
            lambda = member.config.lambda.expect("fitted").value(),
            log_ml = member.log_ml,
            weight = model.weights[l],
        );
    }
    for (index, message) in &model.dropped {
        eprintln!("note: member {index} dropped: {message}");
    }

    let mut manifest_args = BTreeMap::new();
    manifest_args.insert("command".into(), "fit".into());
    manifest_args.insert("train".into(), args.train.display().to_string());
    manifest_args.insert("mode".into(), mode_name(mode).into());
    manifest_args.insert("stride".into(), args.stride.to_string());
    manifest_args.insert(
        "m_cap".into(),
        args.m_cap.map_or("none".into(), |v| v.to_string()),
    );
    manifest_args.insert("m_phi".into(), args.m_phi.to_string());
    manifest_args.insert("per_member_phi".into(), args.per_member_phi.to_string());
    manifest_args.insert("subsample_cap".into(), args.subsample_cap.to_string());

    let file = ModelFile {
        manifest: Manifest::new(args.seed, manifest_args),
        model: model_io::to_saved(&model),
    };
    model_file::save_model(&args.out, &file)?;
    eprintln!(
        "saved {} members ({} mode) to {}",
        model.members.len(),
        mode_name(mode),
        args.out.display()
    );
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let file = model_file::load_model(&args.model)?;
    let model = model_io::from_saved(file.model)?;
    let data = io::read_dataset(&args.test)?;
    let pred = model.predict(&data.x, args.level)?;
    io::write_predictions(&args.out, &pred.mean, &pred.lower, &pred.upper)?;

    let mut manifest_args = BTreeMap::new();
    manifest_args.insert("command".into(), "predict".into());
    manifest_args.insert("model".into(), args.model.display().to_string());
    manifest_args.insert("test".into(), args.test.display().to_string());
    manifest_args.insert("level".into(), args.level.to_string());
    let manifest = Manifest::new(file.manifest.master_seed, manifest_args);
    model_file::write_manifest_sidecar(&args.out, &manifest)?;
    eprintln!(
        "wrote {} predictions at level {} to {}",
        pred.mean.len(),
        args.level,
        args.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ScenarioReport {
    index: usize,
    method: String,
    n: usize,
    p: usize,
    tau: f64,
    h_max: f64,
    n_pred: usize,
    replicates: Vec<ReplicateResult>,
    summary: SummaryResult,
}

#[derive(Serialize)]
struct BenchmarkReport {
    manifest: Manifest,
    scenarios: Vec<ScenarioReport>,
}

pub fn benchmark(args: BenchmarkArgs) -> Result<()> {
    let methods: Vec<String> = args
        .methods
        .split(',')
        .map(|m| m.trim().to_lowercase())
        .filter(|m| !m.is_empty())
        .collect();
    for m in &methods {
        if m != "cgp" && m != "dsl" {
            return Err(CliError::Usage(format!(
                "unknown method {m:?}; expected cgp or dsl"
            )));
        }
    }
    if methods.is_empty() {
        return Err(CliError::Usage("no methods selected".into()));
    }
    if args.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }

    let scenarios: Vec<SwissRollConfig> = match args.scenario {
        ScenarioArg::Table2 => simdata::scenario_matrix(ScenarioTable::SmallN),
        ScenarioArg::Table4 => simdata::scenario_matrix(ScenarioTable::LargeN),
        ScenarioArg::Custom => {
            let (n, p, tau) = match (args.n, args.p, args.tau) {
                (Some(n), Some(p), Some(tau)) => (n, p, tau),
                _ => {
                    return Err(CliError::Usage(
                        "custom scenario needs --n, --p and --tau".into(),
                    ))
                }
            };
            vec![SwissRollConfig::new(n, p, tau, args.hmax, 0)]
        }
    };
    let default_mode = match args.scenario {
        ScenarioArg::Table4 => FitMode::LowRank,
        _ => FitMode::Exact,
    };
    let mode: FitMode = args.mode.map_or(default_mode, Into::into);
    let n_pred = args.n_pred.unwrap_or(match args.scenario {
        ScenarioArg::Table2 => 100,
        _ => 200,
    });
    let policy = grid_policy(args.stride, args.m_cap, args.m_phi, args.subsample_cap, false);

    fs::create_dir_all(&args.out_dir).map_err(|e| CliError::io(&args.out_dir, e))?;
    let mut reports = Vec::new();
    for (index, scenario) in scenarios.iter().enumerate() {
        let seeds = experiment::replicate_seeds(args.seed, index, args.reps);
        for method in &methods {
            let mut replicates = Vec::with_capacity(args.reps);
            for (r, &seed) in seeds.iter().enumerate() {
                let outcome = match method.as_str() {
                    "cgp" => experiment::run_cgp_replicate(
                        &CgpRunSpec {
                            scenario: *scenario,
                            n_pred,
                            mode,
                            policy: policy.clone(),
                            level: args.level,
                        },
                        seed,
                    ),
                    _ => experiment::run_dsl_replicate(
                        &DslRunSpec {
                            scenario: *scenario,
                            n_pred,
                            spectral: SpectralConfig {
                                n_clust: args.n_clust,
                                sigma_sq: None,
                                kmeans_restarts: 10,
                                seed: 0,
                            },
                            ridge: args.ridge,
                            level: args.level,
                        },
                        seed,
                    ),
                };
                match outcome {
                    Ok(rep) => {
                        eprintln!(
                            "scenario {index} {method} rep {r}: mspe {:.4}, coverage {:.3}, median PI {:.3} ({:.1}s)",
                            rep.mspe, rep.coverage, rep.median_pi_length, rep.runtime_seconds
                        );
                        replicates.push(rep);
                    }
                    Err(e) => eprintln!("scenario {index} {method} rep {r} failed: {e}"),
                }
            }
            if replicates.is_empty() {
                eprintln!("scenario {index} {method}: all replicates failed");
                continue;
            }
            if replicates.len() < 2 {
                eprintln!(
                    "scenario {index} {method}: bootstrap SE not reported (needs >= 2 replicates)"
                );
            }
            let summary = metrics::summarize(&replicates, sub_seed(args.seed, 0xB0 + index as u64))?;
            reports.push(ScenarioReport {
                index,
                method: method.clone(),
                n: scenario.n,
                p: scenario.p,
                tau: scenario.tau,
                h_max: scenario.h_max,
                n_pred,
                replicates,
                summary,
            });
        }
    }

    let mut manifest_args = BTreeMap::new();
    manifest_args.insert("command".into(), "benchmark".into());
    manifest_args.insert(
        "scenario".into(),
        match args.scenario {
            ScenarioArg::Table2 => "table2",
            ScenarioArg::Table4 => "table4",
            ScenarioArg::Custom => "custom",
        }
        .into(),
    );
    manifest_args.insert("reps".into(), args.reps.to_string());
    manifest_args.insert("methods".into(), methods.join(","));
    manifest_args.insert("mode".into(), mode_name(mode).into());
    manifest_args.insert("n_pred".into(), n_pred.to_string());
    manifest_args.insert("stride".into(), args.stride.to_string());
    manifest_args.insert("m_phi".into(), args.m_phi.to_string());
    manifest_args.insert("n_clust".into(), args.n_clust.to_string());
    manifest_args.insert("ridge".into(), args.ridge.to_string());
    let report = BenchmarkReport {
        manifest: Manifest::new(args.seed, manifest_args),
        scenarios: reports,
    };

    let json_path = args.out_dir.join("results.json");
    fs::write(
        &json_path,
        serde_json::to_string_pretty(&report).map_err(CliError::from)?,
    )
    .map_err(|e| CliError::io(&json_path, e))?;

    let csv_path = args.out_dir.join("replicates.csv");
    write_replicates_csv(&csv_path, &report)?;
    eprintln!(
        "wrote {} scenario-method summaries to {}",
        report.scenarios.len(),
        json_path.display()
    );
    Ok(())
}

fn write_replicates_csv(path: &Path, report: &BenchmarkReport) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = || -> std::io::Result<()> {
        writeln!(
            w,
            "scenario,method,n,p,tau,replicate,mspe,coverage,median_pi_length,runtime_seconds,fit_seconds,predict_seconds"
        )?;
        for sc in &report.scenarios {
            for (r, rep) in sc.replicates.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    sc.index,
                    sc.method,
                    sc.n,
                    sc.p,
                    sc.tau,
                    r,
                    rep.mspe,
                    rep.coverage,
                    rep.median_pi_length,
                    rep.runtime_seconds,
                    rep.fit_seconds,
                    rep.predict_seconds
                )?;
            }
        }
        w.flush()
    };
    emit().map_err(|e| CliError::io(path, e))
}
