use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;
use tabe_core::analysis;
use tabe_core::bbox;
use tabe_core::composite::composite_clips;
use tabe_core::io;
use tabe_core::manifest::MaskField;
use tabe_core::metrics::{self, EvalReport};
use tabe_core::pipeline::protocol::SCHEMA_JSON;
use tabe_core::pipeline::{run_pipeline, serve_lines, BackendEndpoints, MockEndpoint, MockMode};
use tabe_core::render::{self, OverlayLayer};
use tabe_core::synth::{GroundTruth, SynthConfig, SyntheticScene};
use tabe_core::target::ReferenceStatistic;
use tabe_core::trainprep;
use tabe_core::{AmodalBox, Connectivity, LoadedManifest, OcclusionVerdict};

use crate::config::{run_config_beside, run_config_in, FileConfig, RunConfig, RUN_CONFIG_VERSION};
use crate::*;

type Result<T> = std::result::Result<T, CliError>;

struct Ctx<'a> {
    cli: &'a Cli,
    config: FileConfig,
}

impl Ctx<'_> {
    /// Writes `value` to `--out` (or stdout) and the effective run config
    /// into `dir` when given, else beside `--out`.
    fn emit<T: Serialize, A: Serialize>(&self, subcommand: &str, args: &A, value: &T, dir: Option<&Path>) -> Result<()> {
        self.config.validate()?;
        let run = RunConfig {
            version: RUN_CONFIG_VERSION,
            subcommand,
            seed: self.cli.seed,
            arguments: args,
            config: &self.config,
            out: self.cli.out.as_deref(),
        };
        match &self.cli.out {
            Some(out) => {
                io::write_json(out, value)?;
                if dir.is_none() {
                    io::write_json(run_config_beside(out), &run)?;
                }
            }
            None => {
                let text = serde_json::to_string_pretty(value).expect("outputs serialize");
                let mut stdout = std::io::stdout().lock();
                writeln!(stdout, "{text}")?;
            }
        }
        if let Some(dir) = dir {
            io::write_json(run_config_in(dir), &run)?;
        }
        Ok(())
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let mut ctx = Ctx {
        cli,
        config: FileConfig::load(cli.config.as_deref())?,
    };
    if let Some(seed) = cli.seed {
        ctx.config.mask_generation.seed = seed;
    }
    match &cli.command {
        Command::Occlusion(a) => occlusion(&mut ctx, a),
        Command::Bbox(a) => bbox_cmd(&mut ctx, a),
        Command::TargetRegion(a) => target_region(&mut ctx, a),
        Command::Composite(a) => composite(&mut ctx, a),
        Command::Trainprep(a) => trainprep_cmd(&mut ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::Pipeline(PipelineCommand::Run(a)) => pipeline_run(&mut ctx, a),
        Command::Pipeline(PipelineCommand::Schema) => {
            print!("{SCHEMA_JSON}");
            Ok(())
        }
        Command::Render(a) => render_cmd(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
        Command::MockServe(a) => mock_serve(&ctx, a),
    }
}

fn load_manifest(path: &Path) -> Result<LoadedManifest> {
    let m = LoadedManifest::load(path)?;
    m.validate()?;
    Ok(m)
}

fn occlusion(ctx: &mut Ctx, a: &OcclusionArgs) -> Result<()> {
    let c = &mut ctx.config.occlusion;
    if let Some(t) = a.t {
        c.derivative_threshold = t;
    }
    if let Some(tau) = a.tau {
        c.occlusion_fraction_threshold = tau;
    }
    if let Some(k) = a.connectivity {
        c.boundary_connectivity = match k {
            ConnectivityArg::Four => Connectivity::Four,
            ConnectivityArg::Eight => Connectivity::Eight,
        };
    }
    if let Some(d) = a.probe_distance {
        c.probe_distance = d;
    }
    if a.no_normalize {
        c.normalize_nearness = false;
    }
    ctx.config.validate()?;
    let m = load_manifest(&a.manifest)?;
    let visible = m.load_masks(MaskField::Visible)?;
    let nearness = m.load_nearness()?;
    let (verdicts, _) = analysis::verdicts_and_boxes(&visible, &nearness, &ctx.config.analysis())?;
    ctx.emit("occlusion", a, &verdicts, None)
}

fn verdicts_for(
    m: &LoadedManifest,
    path: Option<&Path>,
    config: &FileConfig,
) -> Result<(tabe_core::MaskSequence, Vec<tabe_core::NearnessMap>, Vec<OcclusionVerdict>)> {
    let visible = m.load_masks(MaskField::Visible)?;
    let nearness = m.load_nearness()?;
    let verdicts = match path {
        Some(p) => io::read_json(p)?,
        None => analysis::verdicts_and_boxes(&visible, &nearness, &config.analysis())?.0,
    };
    if verdicts.len() != visible.len() {
        return Err(tabe_core::Error::InvalidInput(format!(
            "{} verdicts for {} frames",
            verdicts.len(),
            visible.len()
        ))
        .into());
    }
    Ok((visible, nearness, verdicts))
}

fn bbox_cmd(ctx: &mut Ctx, a: &BboxArgs) -> Result<()> {
    if let Some(p) = a.expand {
        ctx.config.boxes.expansion_percent = p;
    }
    ctx.config.validate()?;
    let m = load_manifest(&a.manifest)?;
    let (visible, _, verdicts) = verdicts_for(&m, a.verdicts.as_deref(), &ctx.config)?;
    let initial = bbox::initial_boxes(&visible)?;
    let boxes = bbox::refine_boxes(&initial, &verdicts, &ctx.config.boxes)?;
    ctx.emit("bbox", a, &boxes, None)
}

fn target_region(ctx: &mut Ctx, a: &TargetRegionArgs) -> Result<()> {
    if let Some(s) = a.statistic {
        ctx.config.target.statistic = match s {
            StatisticArg::Mean => ReferenceStatistic::Mean,
            StatisticArg::Median => ReferenceStatistic::Median,
        };
    }
    ctx.config.validate()?;
    let m = load_manifest(&a.manifest)?;
    let (visible, nearness, verdicts) = verdicts_for(&m, a.verdicts.as_deref(), &ctx.config)?;
    let boxes: Vec<AmodalBox> = io::read_json(&a.boxes)?;
    if boxes.len() != visible.len() {
        return Err(tabe_core::Error::InvalidInput(format!("{} boxes for {} frames", boxes.len(), visible.len())).into());
    }
    let regions = analysis::target_regions(&visible, &nearness, &verdicts, &boxes, &ctx.config.target)?;
    let mut index = Vec::with_capacity(regions.len());
    for r in &regions {
        let rel = format!("{:05}.png", r.frame);
        io::save_mask(&r.mask, a.out_dir.join(&rel))?;
        index.push(json!({"frame": r.frame, "mask": rel, "area": r.mask.area()}));
    }
    let index = json!({"frames": index});
    io::write_json(a.out_dir.join("index.json"), &index)?;
    ctx.emit("target-region", a, &index, Some(&a.out_dir))
}

fn composite(ctx: &mut Ctx, a: &CompositeArgs) -> Result<()> {
    let c = &mut ctx.config.composite;
    if a.verbatim_eq {
        c.verbatim_eq = true;
    }
    if let Some(v) = a.alpha_cut {
        c.alpha_cut = v;
    }
    if let Some(v) = a.alpha_min {
        c.alpha_min = v;
    }
    ctx.config.validate()?;
    let path = composite_clips(&a.scene, &ctx.config.composite, &a.out_dir)?;
    let m = load_manifest(&path)?;
    let summary = json!({"manifest": "manifest.json", "frames": m.manifest.frame_count});
    ctx.emit("composite", a, &summary, Some(&a.out_dir))
}

fn trainprep_cmd(ctx: &mut Ctx, a: &TrainprepArgs) -> Result<()> {
    if let Some(t) = &a.token {
        ctx.config.token = t.clone();
    }
    ctx.config.validate()?;
    let m = load_manifest(&a.manifest)?;
    let visible = m.load_masks(MaskField::Visible)?;
    let verdicts: Vec<OcclusionVerdict> = io::read_json(&a.verdicts)?;
    let frames = m.load_frames()?;
    let cfg = &ctx.config.mask_generation;
    let samples = trainprep::build_training_samples(&frames, &visible, &verdicts, cfg, &ctx.config.token)?;
    let manifest = trainprep::write_training_manifest(&samples, &visible, cfg, &ctx.config.token, &a.out_dir)?;
    let supervised = manifest.frames.iter().filter(|f| f.loss_bit == 1).count();
    let summary = json!({
        "manifest": trainprep::MANIFEST_FILE,
        "frames": manifest.frames.len(),
        "supervised_frames": supervised,
        "prompt": manifest.prompt,
    });
    ctx.emit("trainprep", a, &summary, Some(&a.out_dir))
}

#[derive(Serialize)]
struct SequenceEval<'a> {
    pred_manifest: &'a Path,
    gt_manifest: &'a Path,
    report: EvalReport,
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    if a.pred_manifest.len() != a.gt_manifest.len() {
        return Err(CliError::Config(format!(
            "{} prediction manifests but {} ground-truth manifests",
            a.pred_manifest.len(),
            a.gt_manifest.len()
        )));
    }
    let field = match a.pred_field {
        PredField::Amodal => MaskField::Amodal,
        PredField::Visible => MaskField::Visible,
    };
    let mut sequences = Vec::new();
    for (p, g) in a.pred_manifest.iter().zip(&a.gt_manifest) {
        let pred = load_manifest(p)?.load_masks(field)?;
        let gt = load_manifest(g)?;
        let report = metrics::evaluate_sequence(&pred, &gt.load_masks(MaskField::GtAmodal)?, &gt.load_masks(MaskField::GtVisible)?)?;
        sequences.push(SequenceEval {
            pred_manifest: p,
            gt_manifest: g,
            report,
        });
    }
    let reports: Vec<EvalReport> = sequences.iter().map(|s| s.report.clone()).collect();
    let dataset = metrics::aggregate_reports(&reports);
    eprint!("{}", render::metric_table(&a.label, &dataset.per_sequence_mean));
    eprint!("{}", render::counts_table(&a.label, dataset.sequences, &dataset.counts));
    ctx.emit("eval", a, &json!({"sequences": sequences, "dataset": dataset}), None)
}

fn stats(ctx: &Ctx, a: &StatsArgs) -> Result<()> {
    let mut sequences = Vec::new();
    let mut total = metrics::CategoryCounts::default();
    for g in &a.gt_manifest {
        let gt = load_manifest(g)?;
        let counts = metrics::sequence_counts(&gt.load_masks(MaskField::GtAmodal)?, &gt.load_masks(MaskField::GtVisible)?)?;
        total += counts;
        sequences.push(json!({"gt_manifest": g, "counts": counts}));
    }
    eprint!("{}", render::counts_table(&a.label, a.gt_manifest.len(), &total));
    ctx.emit(
        "stats",
        a,
        &json!({"scenes": a.gt_manifest.len(), "counts": total, "sequences": sequences}),
        None,
    )
}

fn pipeline_run(ctx: &mut Ctx, a: &PipelineRunArgs) -> Result<()> {
    let c = &mut ctx.config;
    if let Some(n) = a.chunk_len {
        c.chunks.target_len = n;
        c.chunks.max_len = c.chunks.max_len.max(n);
    }
    if let Some(n) = a.max_chunk_len {
        c.chunks.max_len = n;
    }
    if let Some(p) = a.bbox_expand {
        c.boxes.expansion_percent = p;
    }
    if a.parallel_chunks {
        c.parallel_chunks = true;
    }
    if let Some(t) = &a.token {
        c.token = t.clone();
    }
    ctx.config.validate()?;
    let manifest = load_manifest(&a.manifest)?;
    let query = io::load_mask(&a.query)?;
    let backends = BackendEndpoints::load(&a.backends)?;
    let out = run_pipeline(&manifest, &query, &backends, &ctx.config.pipeline(), &a.workdir)?;
    let summary = json!({
        "manifest": "manifest.json",
        "frames": out.final_masks.len(),
        "chunks": out.chunks,
        "unoccluded_frames": out.analysis.verdicts.iter().filter(|v| v.is_unoccluded()).count(),
    });
    ctx.emit("pipeline run", a, &summary, Some(&a.workdir))
}

fn render_cmd(ctx: &Ctx, a: &RenderArgs) -> Result<()> {
    let m = load_manifest(&a.manifest)?;
    let frames = m.load_frames()?;
    let palette = [
        (MaskField::GtAmodal, render::GT_AMODAL_COLOR),
        (MaskField::GtVisible, render::GT_VISIBLE_COLOR),
        (MaskField::Amodal, render::PREDICTION_COLOR),
    ];
    let mut layers = Vec::new();
    for (field, color) in palette {
        if m.has_masks(field) {
            layers.push((field.name(), m.load_masks(field)?, color));
        }
    }
    let mut written = Vec::with_capacity(frames.len());
    for (t, frame) in frames.iter().enumerate() {
        let overlay: Vec<OverlayLayer> = layers
            .iter()
            .map(|(_, seq, color)| OverlayLayer {
                mask: seq.get(t),
                color: *color,
                opacity: a.opacity,
            })
            .collect();
        let out = render::render_overlay(frame, &overlay)?;
        let rel = format!("{t:05}.png");
        io::save_frame(&out, a.out_dir.join(&rel))?;
        written.push(rel);
    }
    let layers: Vec<&str> = layers.iter().map(|(n, _, _)| *n).collect();
    ctx.emit("render", a, &json!({"layers": layers, "frames": written}), Some(&a.out_dir))
}

fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        seed: ctx.cli.seed.unwrap_or(0),
        width: a.width,
        height: a.height,
        min_frames: a.min_frames,
        max_frames: a.max_frames,
        occluder: !a.no_occluder,
    };
    let scene = SyntheticScene::generate(&config)?;
    scene.write(&a.out_dir)?;
    let summary = json!({
        "manifest": "manifest.json",
        "scene": tabe_core::synth::SCENE_FILE,
        "query": "query.png",
        "frames": scene.geometry().frame_count,
    });
    ctx.emit("synth", a, &summary, Some(&a.out_dir))
}

fn mock_serve(ctx: &Ctx, a: &MockServeArgs) -> Result<()> {
    let truth = Arc::new(GroundTruth::load(&a.scene)?);
    let mode = match a.mode {
        MockModeArg::Oracle => MockMode::Oracle,
        MockModeArg::Echo => MockMode::Echo,
        MockModeArg::Noisy => MockMode::Noisy,
    };
    let endpoint = MockEndpoint::new(truth, mode, a.noise_rate, ctx.cli.seed.unwrap_or(0))?;
    serve_lines(&endpoint, std::io::stdin().lock(), std::io::stdout().lock())?;
    Ok(())
}
