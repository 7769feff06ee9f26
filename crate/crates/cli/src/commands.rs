//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use rgbdg_core::clustering::{propose, ProposalSet};
use rgbdg_core::evaluation::{match_rank, ContingencyTable, EvaluationReport, MatchReport};
use rgbdg_core::io;
use rgbdg_core::scene::{ActivationHeatmap, BoundingBox, DepthMap, Mode, Scene};
use rgbdg_core::synth;

use crate::{Command, PipelineArgs, PresetArg, SceneArgs};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Propose {
            scene,
            mode,
            out,
            workers,
            pipeline,
        } => cmd_propose(scene, mode.into(), &out, workers, &pipeline),
        Command::Evaluate {
            manifest,
            modes,
            report,
            proposals_out,
            workers,
            pipeline,
        } => cmd_evaluate(
            &manifest,
            &modes.into_iter().map(Mode::from).collect::<Vec<_>>(),
            &report,
            proposals_out.as_deref(),
            workers,
            &pipeline,
        ),
        Command::Synth {
            preset,
            spec,
            count,
            seed,
            noise,
            out,
        } => cmd_synth(preset, spec.as_deref(), count, seed, noise, &out),
        Command::Overlay {
            scene,
            proposals,
            mode,
            out,
        } => cmd_overlay(scene, &proposals, mode.map(Mode::from), &out),
    }
}

/// Load the scene named by the flags: a manifest entry when `--manifest` is
/// given, raw raster files otherwise. In RGB mode the depth rasters are
/// optional and are never read; inactive placeholders keep the scene type
/// complete.
fn load_scene(args: &SceneArgs, mode: Mode) -> Result<Scene> {
    if let Some(manifest_path) = &args.manifest {
        let manifest = io::read_manifest(manifest_path)?;
        let id = args
            .scene_id
            .as_deref()
            .ok_or_else(|| anyhow!("--scene-id is required with --manifest"))?;
        let entry = manifest
            .entry(id)
            .ok_or_else(|| anyhow!("scene '{id}' not found in {}", manifest_path.display()))?;
        return Ok(manifest.load_scene(entry)?);
    }

    let rgb_path = args
        .rgb_heatmap
        .as_deref()
        .ok_or_else(|| anyhow!("either --manifest or --rgb-heatmap is required"))?;
    let rgb = io::read_heatmap(rgb_path)?;
    let (w, h) = (rgb.width(), rgb.height());

    let (depth_heatmap, depth_map) = match mode {
        Mode::Rgbd => {
            let dh_path = args
                .depth_heatmap
                .as_deref()
                .ok_or_else(|| anyhow!("--depth-heatmap is required in rgbd mode"))?;
            let dm_path = args
                .depth_map
                .as_deref()
                .ok_or_else(|| anyhow!("--depth-map is required in rgbd mode"))?;
            (io::read_heatmap(dh_path)?, io::read_depth(dm_path)?)
        }
        Mode::Rgb => (
            ActivationHeatmap::from_fn(w, h, |_, _| [0.0, 0.0, 1.0])?,
            DepthMap::from_fn(w, h, |_, _| 1.0)?,
        ),
    };

    let ground_truth = match &args.ground_truth {
        Some(v) => BoundingBox::new(v[0], v[1], v[2], v[3])?,
        None => BoundingBox::new(0, 0, 0, 0).expect("unit box"),
    };

    Ok(Scene::new(
        args.scene_id.clone().unwrap_or_else(|| "scene".into()),
        rgb,
        depth_heatmap,
        depth_map,
        args.expression.clone().unwrap_or_default(),
        ground_truth,
        args.category.into(),
    )?)
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")
}

fn cmd_propose(
    scene_args: SceneArgs,
    mode: Mode,
    out: &Path,
    workers: usize,
    pipeline: &PipelineArgs,
) -> Result<()> {
    let fusion_cfg = pipeline.fusion_config();
    let region_cfg = pipeline.region_config();
    let cluster_cfg = pipeline.clustering_config(mode);

    let sets: Vec<ProposalSet> = match (&scene_args.manifest, &scene_args.scene_id) {
        // Whole manifest: every entry, in manifest order.
        (Some(manifest_path), None) => {
            let manifest = io::read_manifest(manifest_path)?;
            if manifest.entries.is_empty() {
                bail!("manifest {} has no scenes", manifest_path.display());
            }
            let pool = build_pool(workers)?;
            pool.install(|| {
                manifest
                    .entries
                    .par_iter()
                    .map(|entry| {
                        let scene = manifest.load_scene(entry)?;
                        Ok(propose(&scene, &fusion_cfg, &region_cfg, &cluster_cfg)?)
                    })
                    .collect::<Result<Vec<_>>>()
            })?
        }
        _ => {
            let scene = load_scene(&scene_args, mode)?;
            vec![propose(&scene, &fusion_cfg, &region_cfg, &cluster_cfg)?]
        }
    };

    io::write_proposals(&sets, out)?;
    for set in &sets {
        println!(
            "scene {} ({}): {} proposal(s)",
            set.scene_id,
            set.mode,
            set.proposals.len()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn print_table(title: &str, table: &ContingencyTable) {
    println!("{title}");
    println!("{:<8} {:>7} {:>7} {:>7} {:>7}", "mode", "first", "second", "third", "none");
    for row in &table.rows {
        println!(
            "{:<8} {:>7} {:>7} {:>7} {:>7}",
            row.mode.label(),
            row.counts[0],
            row.counts[1],
            row.counts[2],
            row.counts[3]
        );
    }
}

fn cmd_evaluate(
    manifest_path: &Path,
    modes: &[Mode],
    report_path: &Path,
    proposals_out: Option<&Path>,
    workers: usize,
    pipeline: &PipelineArgs,
) -> Result<()> {
    let manifest = io::read_manifest(manifest_path)?;
    if manifest.entries.is_empty() {
        bail!("manifest {} has no scenes to evaluate", manifest_path.display());
    }
    if modes.is_empty() {
        bail!("--modes must name at least one mode");
    }

    let fusion_cfg = pipeline.fusion_config();
    let region_cfg = pipeline.region_config();
    let cluster_cfgs: Vec<_> = modes
        .iter()
        .map(|&m| pipeline.clustering_config(m))
        .collect();

    // One task per scene; each task runs every requested mode so the
    // per-scene results stay grouped. Collection preserves manifest order,
    // which keeps the output independent of the worker count.
    let pool = build_pool(workers)?;
    let per_scene: Vec<(Vec<MatchReport>, Vec<ProposalSet>)> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let scene = manifest.load_scene(entry)?;
                let mut reports = Vec::with_capacity(cluster_cfgs.len());
                let mut sets = Vec::with_capacity(cluster_cfgs.len());
                for cfg in &cluster_cfgs {
                    let set = propose(&scene, &fusion_cfg, &region_cfg, cfg)?;
                    reports.push(match_rank(&set, &scene.ground_truth, scene.category));
                    sets.push(set);
                }
                Ok((reports, sets))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut reports = Vec::new();
    let mut sets = Vec::new();
    for (r, s) in per_scene {
        reports.extend(r);
        sets.extend(s);
    }

    if let Some(path) = proposals_out {
        io::write_proposals(&sets, path)?;
    }

    let report = EvaluationReport::compile(reports);
    io::write_report(&report, report_path)?;

    println!(
        "evaluated {} scene(s) x {} mode(s)",
        manifest.entries.len(),
        modes.len()
    );
    println!();
    print_table("whole dataset", &report.tables.whole);
    println!();
    print_table("easy category", &report.tables.easy);
    println!();
    print_table("difficult category", &report.tables.difficult);
    println!();
    match (&report.chi_squared_whole, &report.chi_squared_note) {
        (Some(chi), _) => println!(
            "chi-squared (whole dataset): statistic {:.4}, df {}",
            chi.statistic, chi.degrees_of_freedom
        ),
        (None, Some(note)) => println!("chi-squared (whole dataset): unavailable ({note})"),
        (None, None) => {}
    }
    println!("wrote {}", report_path.display());
    Ok(())
}

fn cmd_synth(
    preset: Option<PresetArg>,
    spec_path: Option<&Path>,
    count: u64,
    seed: u64,
    noise: f64,
    out: &Path,
) -> Result<()> {
    let specs: Vec<synth::SynthSpec> = match (preset, spec_path) {
        (Some(PresetArg::DepthCritical), None) => (0..count)
            .map(|k| {
                let mut spec = synth::depth_critical_preset(seed + k);
                spec.noise_amplitude = noise;
                spec
            })
            .collect(),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading spec {}", path.display()))?;
            let mut spec: synth::SynthSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if noise > 0.0 {
                spec.noise_amplitude = noise;
            }
            vec![spec]
        }
        _ => bail!("exactly one of --preset or --spec is required"),
    };

    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;

    let mut entries = Vec::with_capacity(specs.len());
    for spec in &specs {
        let scene = synth::generate(spec)?;
        let scene_dir = out.join(&scene.id);
        std::fs::create_dir_all(&scene_dir)
            .with_context(|| format!("creating {}", scene_dir.display()))?;
        io::write_ppm(&scene.rgb_heatmap, &scene_dir.join("rgb_heatmap.ppm"))?;
        io::write_ppm(&scene.depth_heatmap, &scene_dir.join("depth_heatmap.ppm"))?;
        io::write_pgm16(&scene.depth_map, &scene_dir.join("depth.pgm"))?;
        entries.push(io::ManifestEntry {
            scene_id: scene.id.clone(),
            rgb_heatmap_path: PathBuf::from(&scene.id).join("rgb_heatmap.ppm"),
            depth_heatmap_path: PathBuf::from(&scene.id).join("depth_heatmap.ppm"),
            depth_map_path: PathBuf::from(&scene.id).join("depth.pgm"),
            expression: scene.expression.clone(),
            ground_truth: scene.ground_truth,
            category: scene.category,
        });
    }

    let manifest = io::DatasetManifest {
        entries,
        base_dir: out.to_path_buf(),
    };
    let manifest_path = out.join("manifest.json");
    io::write_manifest(&manifest, &manifest_path)?;
    println!(
        "wrote {} scene(s) and {}",
        specs.len(),
        manifest_path.display()
    );
    Ok(())
}

fn cmd_overlay(
    scene_args: SceneArgs,
    proposals_path: &Path,
    mode: Option<Mode>,
    out: &Path,
) -> Result<()> {
    let sets = io::read_proposals(proposals_path)?;
    // The scene has to exist regardless of mode; default to the fused view
    // unless the chosen proposal set says otherwise. Loading in rgbd mode
    // keeps the depth rasters available for the fused backdrop.
    let scene = load_scene(&scene_args, Mode::Rgbd)?;

    let matching: Vec<&ProposalSet> = sets
        .iter()
        .filter(|s| s.scene_id == scene.id && mode.map(|m| s.mode == m).unwrap_or(true))
        .collect();
    let set = match matching.as_slice() {
        [] => bail!(
            "no proposal set for scene '{}' in {}",
            scene.id,
            proposals_path.display()
        ),
        [one] => *one,
        _ => bail!(
            "multiple proposal sets for scene '{}'; disambiguate with --mode",
            scene.id
        ),
    };

    synth::render_overlay(&scene, set, out)?;
    println!("wrote {}", out.display());
    Ok(())
}
