use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use graspsense::active::{
    run_active_loop, ActiveLog, MotionLikelihoodModel, Selector, LIKELIHOOD_FILE,
};
use graspsense::controller::{
    episode_motion, episode_setup, run_episode, EpisodeLog, EpisodePolicy, MotionKind, MotionSpec,
    SUMMARY_CSV_HEADER,
};
use graspsense::dataset::{generate_dataset, sample_motion, DatasetManifest, MANIFEST_FILE};
use graspsense::models::{
    median, predictor_file_name, ClassifierMetrics, MaterialClassifier, ModelRegistry, Scope,
    CLASSIFIER_FILE,
};
use graspsense::pipeline::{
    evaluate_classifier_on_dataset, evaluate_predictors_on_dataset, train_classifier_on_dataset,
    train_predictors_on_dataset, PredictorRun,
};
use graspsense::Material;
use rayon::prelude::*;

use crate::args::{ActiveArgs, EpisodeArgs, EvalArgs, GenerateArgs, ScopeArg, Task, TrainArgs};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CLASSIFIER_METRICS_FILE: &str = "classifier_metrics.csv";
pub const PREDICTOR_METRICS_FILE: &str = "predictor_metrics.csv";
pub const EPISODE_SUMMARY_FILE: &str = "summary.csv";
pub const ACTIVE_FILE: &str = "active.csv";

const PREDICTOR_CSV_HEADER: &str =
    "scope,material,motion,samples,slip_auc,force_mae,force_std,cell_distance,mean_slip_prob,slip_rate";
const ACTIVE_SUMMARY_HEADER: &str = "seed,material,eig_segments,eig_estimate,eig_confidence,eig_budget_exhausted,random_segments,random_estimate,random_confidence,random_budget_exhausted";

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn parse_material(s: &str) -> CliResult<Material> {
    s.parse()
        .map_err(|e: graspsense::Error| CliError::usage(e.to_string()))
}

fn parse_motion(s: &str) -> CliResult<MotionKind> {
    s.parse()
        .map_err(|e: graspsense::Error| CliError::usage(e.to_string()))
}

/// The given material, or the materials in turn by seed.
fn material_for(fixed: Option<Material>, seed: u64) -> Material {
    fixed.unwrap_or(Material::ALL[(seed % Material::COUNT as u64) as usize])
}

fn open_dataset(dir: &Path) -> CliResult<DatasetManifest> {
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(CliError::usage(format!(
            "{} is not a dataset directory (no {MANIFEST_FILE})",
            dir.display()
        )));
    }
    let manifest = DatasetManifest::read(dir)?;
    if manifest.splits.is_none() {
        return Err(graspsense::Error::InvalidArgument(format!(
            "dataset {} has no split assignment",
            dir.display()
        ))
        .into());
    }
    Ok(manifest)
}

fn require_dir(dir: &Path, what: &str) -> CliResult<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "{what} directory {} does not exist",
            dir.display()
        )))
    }
}

fn load_classifier(dir: &Path) -> CliResult<MaterialClassifier> {
    Ok(MaterialClassifier::load(&dir.join(CLASSIFIER_FILE))?)
}

fn load_likelihood(dir: &Path) -> CliResult<MotionLikelihoodModel> {
    let path = dir.join(LIKELIHOOD_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(MotionLikelihoodModel::from_json(&text)?)
}

pub fn generate(cfg: &RunConfig, out: &Path, args: &GenerateArgs) -> CliResult<()> {
    let mut gen = cfg.generate.clone();
    if let Some(n) = args.trials {
        if n == 0 {
            return Err(CliError::usage("--trials must be at least 1"));
        }
        gen.trials_per_cell = n;
    }
    gen.grip_excursions &= !args.fixed_grip;
    gen.overwrite |= args.overwrite;
    let manifest = generate_dataset(&gen, out)?;
    let effective = RunConfig {
        generate: gen,
        ..cfg.clone()
    };
    effective.echo(out, "run-generate.toml", "generate", args)?;
    println!(
        "generated {} trials in {} cells into {} (digest {:08x})",
        manifest.trials.len(),
        manifest.cell_counts().len(),
        out.display(),
        manifest.content_digest()
    );
    Ok(())
}

fn predictor_rows(run: &PredictorRun, keep: impl Fn(Scope) -> bool) -> String {
    let mut out = format!("{PREDICTOR_CSV_HEADER}\n");
    for r in run.reports.iter().filter(|r| keep(r.scope)) {
        let (scope, material) = match r.scope {
            Scope::Default => ("default", String::new()),
            Scope::Material(m) => ("material", m.to_string()),
        };
        let m = &r.test;
        writeln!(
            out,
            "{scope},{material},{},{},{},{},{},{},{},{}",
            r.motion,
            m.samples,
            m.slip_auc,
            m.force_mae,
            m.force_std,
            m.cell_distance,
            m.mean_slip_prob,
            m.slip_rate
        )
        .expect("writing to a String");
    }
    writeln!(out, "default,,pooled,,{},,,,,", run.pooled_slip_auc).expect("writing to a String");
    out
}

fn print_predictor_run(run: &PredictorRun, keep: impl Fn(Scope) -> bool) {
    for r in run.reports.iter().filter(|r| keep(r.scope)) {
        println!(
            "predictor {} {}: slip AUC {:.4}, force MAE {:.4} N (target std {:.4} N) on {} windows",
            r.scope, r.motion, r.test.slip_auc, r.test.force_mae, r.test.force_std, r.test.samples
        );
    }
    println!(
        "predictors: pooled held-out slip AUC {:.4}",
        run.pooled_slip_auc
    );
}

fn print_classifier(metrics: &ClassifierMetrics, segments: usize) {
    println!(
        "classifier: test accuracy {:.4} on {segments} segments",
        metrics.accuracy
    );
}

pub fn train(cfg: &RunConfig, out: &Path, args: &TrainArgs) -> CliResult<()> {
    if args.task == Task::Classifier
        && (args.scope.is_some() || args.material.is_some() || args.motion.is_some())
    {
        return Err(CliError::usage(
            "--scope, --material and --motion apply to predictor training only",
        ));
    }
    let scope = args.scope.unwrap_or(ScopeArg::All);
    if scope == ScopeArg::Default && args.material.is_some() {
        return Err(CliError::usage("--material needs --scope material or all"));
    }
    let material = args.material.as_deref().map(parse_material).transpose()?;
    let motion = args.motion.as_deref().map(parse_motion).transpose()?;
    let manifest = open_dataset(&args.dataset)?;
    create_dir(out)?;

    if matches!(args.task, Task::Classifier | Task::All) {
        let run = train_classifier_on_dataset(
            &args.dataset,
            &manifest,
            &cfg.classifier,
            !args.no_augment,
        )?;
        run.trained.model.save(&out.join(CLASSIFIER_FILE))?;
        write_file(
            &out.join(CLASSIFIER_METRICS_FILE),
            &run.test_metrics.to_csv(),
        )?;
        write_file(&out.join(LIKELIHOOD_FILE), &run.likelihood.to_json()?)?;
        let mut loss = String::from("epoch,train_loss\n");
        for (i, l) in run.trained.loss_history.iter().enumerate() {
            writeln!(loss, "{i},{l}").expect("writing to a String");
        }
        write_file(&out.join("classifier_loss.csv"), &loss)?;
        print_classifier(&run.test_metrics, run.test_segments);
        cfg.echo(out, "run-train-classifier.toml", "train", args)?;
    }

    if matches!(args.task, Task::Predictor | Task::All) {
        let motions: Vec<MotionKind> = motion.map_or(MotionKind::ALL.to_vec(), |m| vec![m]);
        let materials: Vec<Material> = match scope {
            ScopeArg::Default => Vec::new(),
            _ => material.map_or(Material::ALL.to_vec(), |m| vec![m]),
        };
        let run = train_predictors_on_dataset(
            &args.dataset,
            &manifest,
            &motions,
            &materials,
            &cfg.predictor,
        )?;
        let keep = |s: Scope| match scope {
            ScopeArg::Default => s == Scope::Default,
            ScopeArg::Material => s != Scope::Default,
            ScopeArg::All => true,
        };
        for model in run.registry.models().filter(|m| keep(m.scope())) {
            model.save(&out.join(predictor_file_name(model.scope(), model.motion())))?;
        }
        write_file(
            &out.join(PREDICTOR_METRICS_FILE),
            &predictor_rows(&run, keep),
        )?;
        print_predictor_run(&run, keep);
        cfg.echo(out, "run-train-predictor.toml", "train", args)?;
    }
    Ok(())
}

fn episode_motion_for(kind: MotionKind, seed: u64) -> MotionSpec {
    match kind {
        MotionKind::Shaking => episode_motion(seed),
        MotionKind::Rotation => sample_motion(MotionKind::Rotation, seed),
    }
}

pub fn episode(cfg: &RunConfig, out: &Path, args: &EpisodeArgs) -> CliResult<()> {
    let policy: EpisodePolicy = args
        .policy
        .parse()
        .map_err(|e: graspsense::Error| CliError::usage(e.to_string()))?;
    let motion = parse_motion(&args.motion)?;
    let material = args.material.as_deref().map(parse_material).transpose()?;
    if args.episodes == 0 {
        return Err(CliError::usage("--episodes must be at least 1"));
    }
    let models = match (policy, &args.models) {
        (EpisodePolicy::Reactive, None) => {
            return Err(CliError::usage("the reactive policy needs --models"))
        }
        (EpisodePolicy::Reactive, Some(dir)) => {
            require_dir(dir, "models")?;
            Some((load_classifier(dir)?, ModelRegistry::load_dir(dir)?))
        }
        (EpisodePolicy::Fixed(_), _) => None,
    };
    create_dir(&out.join("episodes"))?;

    let logs = (0..args.episodes as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            let setup = episode_setup(
                material_for(material, seed),
                episode_motion_for(motion, seed),
                seed,
            );
            run_episode(
                &setup,
                policy,
                models.as_ref().map(|(c, r)| (c, r)),
                &cfg.controller,
            )
        })
        .collect::<graspsense::Result<Vec<EpisodeLog>>>()?;

    let mut summary = format!("{SUMMARY_CSV_HEADER}\n");
    for log in &logs {
        let name = format!("episode-{}-{}-{}.csv", log.material, log.motion, log.seed);
        write_file(&out.join("episodes").join(name), &log.to_csv())?;
        writeln!(summary, "{}", log.summary().csv_row()).expect("writing to a String");
    }
    write_file(&out.join(EPISODE_SUMMARY_FILE), &summary)?;
    cfg.echo(out, "run-episode.toml", "episode", args)?;

    if args.summary {
        println!(
            "{:>8} {:>8} {:>6} {:>8} {:>10} {:>10} {:>8} {:>10}",
            "seed", "material", "drop", "slips", "mean_tq", "max_tq", "switch", "latency_s"
        );
        for s in logs.iter().map(EpisodeLog::summary) {
            println!(
                "{:>8} {:>8} {:>6} {:>8} {:>10.4} {:>10.4} {:>8} {:>10}",
                s.seed,
                s.material.to_string(),
                s.dropped,
                s.slip_steps,
                s.mean_torque,
                s.max_torque,
                s.switch_material
                    .map(|m| m.to_string())
                    .unwrap_or_else(|| "-".into()),
                s.switch_latency_s
                    .map(|t| format!("{t:.3}"))
                    .unwrap_or_else(|| "-".into())
            );
        }
    }
    let drops = logs.iter().filter(|l| l.dropped()).count();
    let mean_torque = logs.iter().map(EpisodeLog::mean_torque).sum::<f64>() / logs.len() as f64;
    println!(
        "{} {policy} episodes: {drops} drops, mean torque {mean_torque:.4} Nm",
        logs.len()
    );
    Ok(())
}

fn active_row(seed: u64, material: Material, eig: &ActiveLog, random: &ActiveLog) -> String {
    let part = |l: &ActiveLog| {
        format!(
            "{},{},{},{}",
            l.segments_used(),
            l.estimate(),
            l.final_posterior().max_prob(),
            u8::from(l.budget_exhausted())
        )
    };
    format!("{seed},{material},{},{}", part(eig), part(random))
}

pub fn active(cfg: &RunConfig, out: &Path, args: &ActiveArgs) -> CliResult<()> {
    if !(args.confidence > 0.2 && args.confidence < 1.0) {
        return Err(CliError::usage("--confidence must lie in (0.2, 1)"));
    }
    if args.max_segments == 0 || args.seeds == 0 {
        return Err(CliError::usage(
            "--max-segments and --seeds must be at least 1",
        ));
    }
    let material = args.material.as_deref().map(parse_material).transpose()?;
    require_dir(&args.models, "models")?;
    let classifier = load_classifier(&args.models)?;
    let likelihood = load_likelihood(&args.models)?;
    create_dir(&out.join("trajectories"))?;

    let runs = (0..args.seeds as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i);
            let m = material_for(material, seed);
            let run = |selector| {
                run_active_loop(
                    m,
                    &classifier,
                    &likelihood,
                    args.confidence,
                    args.max_segments,
                    seed,
                    selector,
                )
            };
            Ok((seed, m, run(Selector::Eig)?, run(Selector::Random)?))
        })
        .collect::<graspsense::Result<Vec<_>>>()?;

    let mut table = format!("{ACTIVE_SUMMARY_HEADER}\n");
    for (seed, m, eig, random) in &runs {
        writeln!(table, "{}", active_row(*seed, *m, eig, random)).expect("writing to a String");
        for log in [eig, random] {
            let path = out
                .join("trajectories")
                .join(format!("active-{}-{seed}.csv", log.selector));
            write_file(&path, &log.to_csv())?;
        }
    }
    write_file(&out.join(ACTIVE_FILE), &table)?;
    cfg.echo(out, "run-active.toml", "active", args)?;

    if args.summary {
        println!(
            "{:>8} {:>8} {:>8} {:>10} {:>8} {:>10}",
            "seed", "material", "eig_n", "eig_est", "rand_n", "rand_est"
        );
        for (seed, m, eig, random) in &runs {
            println!(
                "{:>8} {:>8} {:>8} {:>10} {:>8} {:>10}",
                seed,
                m.to_string(),
                eig.segments_used(),
                eig.estimate().to_string(),
                random.segments_used(),
                random.estimate().to_string()
            );
        }
    }
    let segments = |pick: fn(&(u64, Material, ActiveLog, ActiveLog)) -> &ActiveLog| {
        let used: Vec<f64> = runs
            .iter()
            .map(|r| pick(r).segments_used() as f64)
            .collect();
        let correct = runs.iter().filter(|r| pick(r).estimate() == r.1).count();
        (median(&used), correct)
    };
    let (eig_median, eig_correct) = segments(|r| &r.2);
    let (random_median, random_correct) = segments(|r| &r.3);
    println!(
        "median segments to {}: eig {eig_median} vs random {random_median} over {} seeds; correct eig {eig_correct}, random {random_correct}",
        args.confidence,
        runs.len()
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig, out: &Path, args: &EvalArgs) -> CliResult<()> {
    require_dir(&args.models, "models")?;
    let manifest = open_dataset(&args.dataset)?;
    let has_classifier = args.models.join(CLASSIFIER_FILE).is_file();
    let has_predictors = MotionKind::ALL.iter().any(|&m| {
        args.models
            .join(predictor_file_name(Scope::Default, m))
            .is_file()
    });
    if !has_classifier && !has_predictors {
        return Err(graspsense::Error::InvalidArgument(format!(
            "no models found in {}",
            args.models.display()
        ))
        .into());
    }
    create_dir(out)?;
    if has_classifier {
        let classifier = load_classifier(&args.models)?;
        let (metrics, segments) =
            evaluate_classifier_on_dataset(&args.dataset, &manifest, &classifier)?;
        write_file(&out.join(CLASSIFIER_METRICS_FILE), &metrics.to_csv())?;
        print_classifier(&metrics, segments);
    }
    if has_predictors {
        let registry = ModelRegistry::load_dir(&args.models)?;
        let run = evaluate_predictors_on_dataset(&args.dataset, &manifest, &registry)?;
        write_file(
            &out.join(PREDICTOR_METRICS_FILE),
            &predictor_rows(&run, |_| true),
        )?;
        print_predictor_run(&run, |_| true);
    }
    cfg.echo(out, "run-eval.toml", "eval", args)?;
    Ok(())
}

/// `--out`, which every subcommand needs.
pub fn out_dir(out: Option<&PathBuf>) -> CliResult<PathBuf> {
    out.cloned()
        .ok_or_else(|| CliError::usage("--out <DIR> is required"))
}
