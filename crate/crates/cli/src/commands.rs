//! Implementations behind the `stvu` subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use stvu_core::config::{DegradePhase, FlowKind, ModelConfig};
use stvu_core::frame::TimeIndex;
use stvu_core::model::{InferenceOptions, Network};
use stvu_core::train::{Phase, TrainSchedule, Trainer};

use crate::checkpoint;
use crate::dataset;
use crate::error::CliError;
use crate::evalproto::{self, EvalModel, EvalOptions};
use crate::flowio;
use crate::heatmap;
use crate::losslog::FileHooks;
use crate::pngio;

/// Resolve the model configuration: defaults, then the config file, then
/// explicit `--set key=value` overrides.
pub fn resolve_config(
    config_path: Option<&Path>,
    sets: &[String],
) -> Result<ModelConfig, CliError> {
    let mut cfg = ModelConfig::default();
    if let Some(path) = config_path {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(e, path))?;
        cfg.apply(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    }
    for set in sets {
        let (k, v) = set
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("--set expects key=value, got `{set}`")))?;
        cfg.set(k.trim(), v.trim())
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    Ok(cfg)
}

/// Echo the resolved run parameters to stdout and `<out>/run_config.txt`.
fn log_run_config(
    out_dir: &Path,
    cfg: &ModelConfig,
    schedule: Option<&TrainSchedule>,
    seed: u64,
) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str(&format!("seed = {seed}\n"));
    text.push_str(&cfg.emit());
    if let Some(s) = schedule {
        text.push_str(&format!(
            "phase = {}\ntotal_iters = {}\nbatch_size = {}\npatch_size = {}\nlr_init = {}\n\
             lr_decay_factor = {}\nlr_decay_every = {}\ngrad_clip = {}\ncheckpoint_every = {}\n",
            s.phase.as_str(),
            s.total_iters,
            s.batch_size,
            s.patch_size,
            s.lr_init,
            s.lr_decay_factor,
            s.lr_decay_every,
            s.grad_clip.map_or("off".to_string(), |c| c.to_string()),
            s.checkpoint_every
        ));
    }
    print!("{text}");
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(e, out_dir))?;
    pngio::write_atomic(&out_dir.join("run_config.txt"), text.as_bytes())
}

pub struct PrepareArgs {
    pub hr_root: PathBuf,
    pub out: PathBuf,
    pub scale: Option<usize>,
    pub sigma: Option<f64>,
    pub stride: Option<usize>,
    pub phase: Option<String>,
    pub config: Option<PathBuf>,
    pub sets: Vec<String>,
}

pub fn cmd_prepare(args: &PrepareArgs, seed: u64) -> Result<(), CliError> {
    let mut cfg = resolve_config(args.config.as_deref(), &args.sets)?;
    if let Some(s) = args.scale {
        cfg.scale_r = s;
    }
    if let Some(s) = args.sigma {
        cfg.degrade_sigma = s;
    }
    if let Some(s) = args.stride {
        cfg.stride = s;
    }
    if let Some(p) = &args.phase {
        cfg.degrade_phase = match p.as_str() {
            "center" => DegradePhase::Center,
            "topleft" => DegradePhase::TopLeft,
            other => {
                return Err(CliError::Validation(format!(
                    "--phase expects center|topleft, got {other}"
                )))
            }
        };
    }
    let cfg = cfg
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    log_run_config(&args.out, &cfg, None, seed)?;
    let summary = dataset::prepare(
        &args.hr_root,
        &args.out,
        cfg.scale_r,
        cfg.degrade_sigma,
        cfg.degrade_phase,
        cfg.stride,
    )?;
    for (name, reason) in &summary.skipped {
        eprintln!("warning: skipped clip {name}: {reason}");
    }
    println!(
        "prepared {} clip(s) into {} ({} skipped)",
        summary.prepared.len(),
        args.out.display(),
        summary.skipped.len()
    );
    Ok(())
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub out: PathBuf,
    pub preset: String,
    pub config: Option<PathBuf>,
    pub sets: Vec<String>,
    pub resume: Option<PathBuf>,
    pub init: Option<PathBuf>,
    pub cold_start: bool,
    pub iters: Option<u64>,
    pub batch: Option<usize>,
    pub patch: Option<usize>,
    pub lr: Option<f64>,
    pub decay_every: Option<u64>,
    pub decay_factor: Option<f64>,
    pub grad_clip: Option<f64>,
    pub checkpoint_every: Option<u64>,
    pub dry_run: bool,
}

fn resolve_schedule(args: &TrainArgs, phase: Phase) -> Result<TrainSchedule, CliError> {
    let mut s = match (args.preset.as_str(), phase) {
        ("desk", Phase::Pretrain) => TrainSchedule::desk_pretrain(),
        ("desk", Phase::Joint) => TrainSchedule::desk_joint(),
        ("paper", Phase::Pretrain) => TrainSchedule::paper_pretrain(),
        ("paper", Phase::Joint) => TrainSchedule::paper_joint(),
        (other, _) => {
            return Err(CliError::Validation(format!(
                "--preset expects desk|paper, got {other}"
            )))
        }
    };
    if let Some(v) = args.iters {
        s.total_iters = v;
    }
    if let Some(v) = args.batch {
        s.batch_size = v;
    }
    if let Some(v) = args.patch {
        s.patch_size = v;
    }
    if let Some(v) = args.lr {
        s.lr_init = v;
    }
    if let Some(v) = args.decay_every {
        s.lr_decay_every = v;
    }
    if let Some(v) = args.decay_factor {
        s.lr_decay_factor = v;
    }
    if let Some(v) = args.grad_clip {
        s.grad_clip = if v == 0.0 { None } else { Some(v) };
    }
    if let Some(v) = args.checkpoint_every {
        s.checkpoint_every = v;
    }
    if s.total_iters == 0 || s.batch_size == 0 || s.patch_size == 0 {
        return Err(CliError::Validation(
            "iterations, batch size and patch size must be positive".into(),
        ));
    }
    Ok(s)
}

fn run_phase(
    args: &TrainArgs,
    phase: Phase,
    seed: u64,
    make_trainer: impl FnOnce(&ModelConfig, TrainSchedule) -> Result<Trainer<f32>, CliError>,
) -> Result<(), CliError> {
    let tag = phase.as_str();
    // resume restores everything, including the stored schedule and config
    if let Some(resume) = &args.resume {
        let ckpt = checkpoint::load(resume)?;
        if ckpt.phase != phase {
            return Err(CliError::Checkpoint(format!(
                "{} is a {} checkpoint, cannot resume {tag}",
                resume.display(),
                ckpt.phase.as_str()
            )));
        }
        let mut trainer = checkpoint::build_trainer(&ckpt)?;
        println!(
            "resuming {tag} from {} at iteration {}",
            resume.display(),
            trainer.iteration
        );
        log_run_config(&args.out, &ckpt.config, Some(&trainer.schedule), seed)?;
        let (index, meta) = dataset::load_index(&args.data)?;
        dataset::check_meta(&meta, &ckpt.config)?;
        let cfg = ckpt.config.clone().validate().unwrap();
        let mut ds = dataset::load_training_set(&index, &cfg, trainer.schedule.patch_size)?;
        let mut hooks = FileHooks::new(&args.out, tag_static(tag), 50)?;
        trainer
            .run(&mut ds, &mut hooks)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        println!("done; final checkpoint at {}", hooks.final_path().display());
        return Ok(());
    }

    let cfg = resolve_config(args.config.as_deref(), &args.sets)?;
    let schedule = resolve_schedule(args, phase)?;
    log_run_config(&args.out, &cfg, Some(&schedule), seed)?;
    if args.dry_run {
        println!("dry run: schedule validated, nothing trained");
        return Ok(());
    }
    let vcfg = cfg
        .clone()
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let (index, meta) = dataset::load_index(&args.data)?;
    dataset::check_meta(&meta, &cfg)?;
    let mut ds = dataset::load_training_set(&index, &vcfg, schedule.patch_size)?;
    let mut trainer = make_trainer(&cfg, schedule)?;
    let mut hooks = FileHooks::new(&args.out, tag_static(tag), 50)?;
    trainer
        .run(&mut ds, &mut hooks)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    println!("done; final checkpoint at {}", hooks.final_path().display());
    Ok(())
}

fn tag_static(tag: &str) -> &'static str {
    match tag {
        "pretrain" => "pretrain",
        _ => "joint",
    }
}

pub fn cmd_pretrain(args: &TrainArgs, seed: u64) -> Result<(), CliError> {
    run_phase(args, Phase::Pretrain, seed, |cfg, schedule| {
        let vcfg = cfg
            .clone()
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let net: Network<f32> = Network::new(vcfg, seed);
        Ok(Trainer::new_pretrain(net, schedule, seed))
    })
}

pub fn cmd_train(args: &TrainArgs, seed: u64) -> Result<(), CliError> {
    run_phase(args, Phase::Joint, seed, |cfg, schedule| {
        let net: Network<f32> = if let Some(init) = &args.init {
            let ckpt = checkpoint::load(init)?;
            if let Some(diff) = checkpoint::fingerprint_mismatch(cfg, &ckpt.config) {
                return Err(CliError::Checkpoint(diff));
            }
            checkpoint::build_network(&ckpt)?
        } else if args.cold_start {
            let vcfg = cfg
                .clone()
                .validate()
                .map_err(|e| CliError::Validation(e.to_string()))?;
            Network::new(vcfg, seed)
        } else {
            return Err(CliError::Validation(
                "joint training needs --init <pretrain checkpoint> (or --cold-start to skip pretraining)"
                    .into(),
            ));
        };
        Ok(Trainer::new_joint(net, schedule, seed))
    })
}

pub struct UpsampleArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub ckpt: PathBuf,
    pub n_intermediate: usize,
    pub dump_scores: bool,
    pub dump_flows: bool,
    pub config: Option<PathBuf>,
    pub sets: Vec<String>,
}

pub fn cmd_upsample(args: &UpsampleArgs, seed: u64) -> Result<(), CliError> {
    let ckpt = checkpoint::load(&args.ckpt)?;
    // flags/config given alongside a checkpoint must agree with it
    if args.config.is_some() || !args.sets.is_empty() {
        let requested = resolve_config(args.config.as_deref(), &args.sets)?;
        if let Some(diff) = checkpoint::fingerprint_mismatch(&requested, &ckpt.config) {
            return Err(CliError::Checkpoint(diff));
        }
    }
    let net = checkpoint::build_network(&ckpt)?;
    if args.n_intermediate > 0
        && ckpt.config.flow_estimator == FlowKind::PyramidLite
        && net.flow.is_none()
    {
        return Err(CliError::Checkpoint(
            "checkpoint has no flow-estimator parameters; it was not joint-trained \
             (use N = 0 or a zero-flow configuration)"
                .into(),
        ));
    }
    log_run_config(&args.out, &ckpt.config, None, seed)?;
    let clip = pngio::read_frames(&args.input)?;
    let out_clip = net
        .upsample_video(&clip, args.n_intermediate, &InferenceOptions::default())
        .map_err(|e| CliError::Validation(e.to_string()))?;
    pngio::write_frames(&out_clip, &args.out.join("frames"))?;
    println!(
        "wrote {} HR frames to {}",
        out_clip.len(),
        args.out.join("frames").display()
    );

    if args.dump_scores || args.dump_flows {
        // diagnostics for one representative window (the clip center)
        let ws = ckpt.config.window_size;
        let mid = clip.len().saturating_sub(1) / 2;
        let window: Vec<_> = (0..ws)
            .map(|k| {
                let idx = stvu_core::model::reflect_index(
                    mid as isize + k as isize - (ws / 2) as isize,
                    clip.len(),
                );
                clip.frames[idx].clone()
            })
            .collect();
        let t_ins: Vec<TimeIndex> = if args.n_intermediate > 0 && (net.flow.is_some() || ckpt.config.flow_estimator == FlowKind::Zero) {
            (1..=args.n_intermediate)
                .map(|k| TimeIndex::new(k as i64, (args.n_intermediate + 1) as i64))
                .collect()
        } else {
            vec![]
        };
        let opts = InferenceOptions {
            diagnostics: true,
            external_flow: None,
        };
        let result = net
            .forward_window(&window, &t_ins, &opts)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        let diag = result.diagnostics.expect("diagnostics requested");
        let diag_dir = args.out.join("diagnostics");
        fs::create_dir_all(&diag_dir).map_err(|e| CliError::io(e, &diag_dir))?;
        if args.dump_scores {
            for (i, per_frame) in diag.scores.iter().enumerate() {
                for (t, map) in per_frame.iter().enumerate() {
                    heatmap::write_heatmap(map, &diag_dir.join(format!("score_block{i}_t{t}.png")))?;
                }
            }
        }
        if args.dump_flows {
            if let Some((f34, f43)) = &diag.flows {
                flowio::write_flo(f34, &diag_dir.join("flow_center_forward.flo"))?;
                flowio::write_flo(f43, &diag_dir.join("flow_center_backward.flo"))?;
            }
        }
        println!("diagnostics written to {}", diag_dir.display());
    }
    Ok(())
}

pub struct EvaluateArgs {
    pub ckpt: PathBuf,
    pub testset: PathBuf,
    pub out: PathBuf,
    pub ablate: String,
    pub luma: bool,
    pub crop: usize,
}

pub fn cmd_evaluate(args: &EvaluateArgs, seed: u64) -> Result<(), CliError> {
    let ckpt = checkpoint::load(&args.ckpt)?;
    let mut cfg = ckpt.config.clone();
    match args.ablate.as_str() {
        "none" => {}
        "no-efst" => {
            if !cfg.disable_efst {
                return Err(CliError::Ablation(
                    "checkpoint was trained with the full fusion module; its parameter set \
                     does not match an early-fusion-only build (train with disable_efst = true)"
                        .into(),
                ));
            }
        }
        "no-d" => {
            // rewiring only: intermediate passes read fused features
            cfg.use_fused_skips = true;
        }
        other => {
            return Err(CliError::Validation(format!(
                "--ablate expects none|no-efst|no-d, got {other}"
            )))
        }
    }
    let net = {
        let mut ckpt_rewired = ckpt;
        ckpt_rewired.config = cfg.clone();
        checkpoint::build_network(&ckpt_rewired)?
    };
    if cfg.flow_estimator == FlowKind::PyramidLite && net.flow.is_none() {
        return Err(CliError::Checkpoint(
            "evaluation scores intermediate frames; the checkpoint has no flow-estimator \
             parameters (joint-train first)"
                .into(),
        ));
    }
    log_run_config(&args.out, &cfg, None, seed)?;

    let testset = load_testset(&args.testset)?;
    let vcfg = cfg
        .validate()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let opts = EvalOptions {
        crop_border: args.crop,
        luma: args.luma,
    };
    let report = evalproto::evaluate_protocol(&EvalModel::Network(&net), &testset, &vcfg, &opts)?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(e, &args.out))?;
    evalproto::write_frame_csv(&report, &args.out.join("per_frame.csv"))?;
    evalproto::write_json_summary(&report, &args.out.join("summary.json"))?;
    let table = evalproto::render_table(&report);
    pngio::write_atomic(&args.out.join("table.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}

/// Load an HR testset: a directory of clip directories (a prepared
/// dataset root with an `hr/` subtree also works).
pub fn load_testset(root: &Path) -> Result<Vec<(String, stvu_core::Clip)>, CliError> {
    let base = if root.join("hr").is_dir() {
        root.join("hr")
    } else {
        root.to_path_buf()
    };
    let dirs = pngio::list_clip_dirs(&base)?;
    if dirs.is_empty() {
        return Err(CliError::Validation(format!(
            "no clip directories under {}",
            base.display()
        )));
    }
    dirs.into_iter()
        .map(|d| {
            let name = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, pngio::read_frames(&d)?))
        })
        .collect()
}

pub struct DumpScoresArgs {
    pub ckpt: PathBuf,
    pub input: PathBuf,
    pub out: PathBuf,
    pub window_start: usize,
}

pub fn cmd_dump_scores(args: &DumpScoresArgs) -> Result<(), CliError> {
    let ckpt = checkpoint::load(&args.ckpt)?;
    let net = checkpoint::build_network(&ckpt)?;
    let clip = pngio::read_frames(&args.input)?;
    let ws = ckpt.config.window_size;
    if args.window_start + ws > clip.len() {
        return Err(CliError::Validation(format!(
            "window [{}, {}) exceeds the {}-frame clip",
            args.window_start,
            args.window_start + ws,
            clip.len()
        )));
    }
    let window: Vec<_> = clip.frames[args.window_start..args.window_start + ws].to_vec();
    let opts = InferenceOptions {
        diagnostics: true,
        external_flow: None,
    };
    let result = net
        .forward_window(&window, &[], &opts)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let diag = result.diagnostics.expect("diagnostics requested");
    fs::create_dir_all(&args.out).map_err(|e| CliError::io(e, &args.out))?;
    let mut written = 0;
    for (i, per_frame) in diag.scores.iter().enumerate() {
        for (t, map) in per_frame.iter().enumerate() {
            heatmap::write_heatmap(map, &args.out.join(format!("score_block{i}_t{t}.png")))?;
            written += 1;
        }
    }
    println!("wrote {written} heatmaps to {}", args.out.display());
    Ok(())
}
