//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tabe_core::bbox::{adjust_box, fill_missing_boxes, grow_for_occlusion, AmodalBox, Provenance};
use tabe_core::composite::{composite, recover_foreground_color, AlphaMatte, CompositeConfig, CompositeScene};
use tabe_core::data::{FrameImage, Mask, MaskSequence, NearnessMap, VideoGeometry};
use tabe_core::io;
use tabe_core::manifest::LoadedManifest;
use tabe_core::metrics::{evaluate_sequence, iou, non_visible_pixel_iou, EvalReport};
use tabe_core::occlusion::{evaluate_boundary, occlusion_fraction, OcclusionConfig, OcclusionLabel, OcclusionVerdict};
use tabe_core::pipeline::{mock_backends, plan_chunks, run_pipeline, ChunkConfig, MockMode, PipelineConfig};
use tabe_core::render::{counts_table, emit_report_table, COUNT_COLUMNS, METRIC_COLUMNS};
use tabe_core::synth::{GroundTruth, SynthConfig, SyntheticScene};
use tabe_core::trainprep::{build_training_samples, write_training_manifest, MaskGenConfig, DEFAULT_TOKEN};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, p: f64) -> Mask {
    let bits = (0..w * h).map(|_| rng.random_bool(p)).collect();
    Mask::from_bits(w, h, bits).unwrap()
}

fn pixel_set(m: &Mask) -> BTreeSet<(usize, usize)> {
    (0..m.height())
        .flat_map(|y| (0..m.width()).map(move |x| (x, y)))
        .filter(|&(x, y)| m.get(x, y))
        .collect()
}

fn set_iou(a: &BTreeSet<(usize, usize)>, b: &BTreeSet<(usize, usize)>) -> Option<f64> {
    let union = a.union(b).count();
    (union > 0).then(|| a.intersection(b).count() as f64 / union as f64)
}

fn metric_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut skipped = 0;
    for i in 0..1000 {
        let p = rng.random_range(0.0..0.6);
        let a = random_mask(&mut rng, 8, 8, p);
        let b = random_mask(&mut rng, 8, 8, p);
        let want = set_iou(&pixel_set(&a), &pixel_set(&b));
        let got = iou(&a, &b).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("iou pair {i}: {got:?} vs oracle {want:?}"))?;
        skipped += usize::from(got.is_none());
    }
    for i in 0..1000 {
        let amodal = random_mask(&mut rng, 8, 8, 0.5);
        let visible = amodal.and(&random_mask(&mut rng, 8, 8, 0.5)).unwrap();
        let pred = random_mask(&mut rng, 8, 8, 0.5);
        let vis = pixel_set(&visible);
        let p: BTreeSet<_> = pixel_set(&pred).difference(&vis).copied().collect();
        let g: BTreeSet<_> = pixel_set(&amodal).difference(&vis).copied().collect();
        let want = set_iou(&p, &g);
        let got = non_visible_pixel_iou(&pred, &amodal, &visible).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("non-visible pair {i}: {got:?} vs oracle {want:?}"))?;
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("2000 pairs exact, {skipped} empty/empty skipped, {:.2?}", start.elapsed()))
}

/// Mask pixels with a 4-neighbor outside the mask or image.
fn brute_boundary(m: &Mask) -> BTreeSet<(usize, usize)> {
    pixel_set(m)
        .into_iter()
        .filter(|&(x, y)| {
            [(1, 0), (-1, 0), (0, 1), (0, -1)]
                .iter()
                .any(|&(dx, dy)| !m.get_signed(x as i64 + dx, y as i64 + dy))
        })
        .collect()
}

fn occlusion_suite() -> Check {
    let start = Instant::now();
    let cfg = OcclusionConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);

    // flat depth
    for i in 0..50 {
        let mut m = random_mask(&mut rng, 16, 16, 0.4);
        m.set(8, 8, true);
        let level = rng.random_range(-3.0..3.0);
        let z = NearnessMap::constant(16, 16, level).unwrap();
        let f = occlusion_fraction(&m, &z, &cfg).map_err(|e| e.to_string())?;
        ensure(f == 0.0, || format!("flat scene {i}: f_occ = {f}"))?;
    }

    // strip occluder on each side of a 4x4 square in a 10x10 image
    let expected_f = (2.0 + 2.0 * 2f64.sqrt()) / (8.0 + 4.0 * 2f64.sqrt());
    let n = 10usize;
    let flip = |x: usize| n - 1 - x;
    let layouts: [(&str, Box<dyn Fn(usize, usize) -> (usize, usize)>); 4] = [
        ("left", Box::new(|x, y| (x, y))),
        ("right", Box::new(move |x, y| (flip(x), y))),
        ("top", Box::new(|x, y| (y, x))),
        ("bottom", Box::new(move |x, y| (y, flip(x)))),
    ];
    for (side, to_canonical) in &layouts {
        // canonical frame: strip at columns 0..=1, square at 2..=5 x 2..=5
        let strip = |x: usize, y: usize| to_canonical(x, y).0 <= 1;
        let object = |x: usize, y: usize| {
            let (cx, cy) = to_canonical(x, y);
            (2..=5).contains(&cx) && (2..=5).contains(&cy)
        };
        let mask = Mask::from_fn(n, n, |x, y| object(x, y)).unwrap();
        let z = NearnessMap::from_fn(n, n, |x, y| {
            if strip(x, y) {
                0.9
            } else if object(x, y) {
                0.5
            } else {
                0.1
            }
        })
        .unwrap();
        let samples = evaluate_boundary(&mask, &z, &cfg).map_err(|e| e.to_string())?;
        let flagged: BTreeSet<_> = samples.iter().filter(|s| s.flag).map(|s| (s.point.x, s.point.y)).collect();
        let oracle: BTreeSet<_> = brute_boundary(&mask)
            .into_iter()
            .filter(|&(x, y)| {
                (-1i64..=1).any(|dy| {
                    (-1i64..=1).any(|dx| {
                        let (qx, qy) = (x as i64 + dx, y as i64 + dy);
                        (0..n as i64).contains(&qx) && (0..n as i64).contains(&qy) && strip(qx as usize, qy as usize)
                    })
                })
            })
            .collect();
        ensure(flagged == oracle, || format!("{side} strip: flagged {flagged:?}, oracle {oracle:?}"))?;
        let f = occlusion_fraction(&mask, &z, &cfg).map_err(|e| e.to_string())?;
        ensure((f - expected_f).abs() < 1e-12, || format!("{side} strip: f_occ {f}, expected {expected_f}"))?;
    }

    // monotone in t
    let ts = [0.0, 0.02, 0.05, 0.1];
    for i in 0..200 {
        let mut m = random_mask(&mut rng, 16, 16, 0.5);
        m.set(7, 7, true);
        let vals = (0..256).map(|_| rng.random_range(0.0..1.0)).collect();
        let z = NearnessMap::from_values(16, 16, vals, tabe_core::DepthConvention::Nearness).unwrap();
        let fs: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let c = OcclusionConfig {
                    derivative_threshold: t,
                    ..cfg
                };
                occlusion_fraction(&m, &z, &c).unwrap()
            })
            .collect();
        ensure(fs.windows(2).all(|w| w[1] <= w[0]), || format!("scene {i}: f_occ over t = {fs:?}"))?;
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "flat scenes 0, strip sides exact (f_occ {expected_f:.4}), 200 scenes monotone, {:.2?}",
        start.elapsed()
    ))
}

fn random_frame(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> FrameImage {
    let px = (0..w * h)
        .map(|_| std::array::from_fn(|_| rng.random_range(lo..hi)))
        .collect();
    FrameImage::from_pixels(w, h, px).unwrap()
}

fn compositing_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = CompositeConfig::default();
    let (w, h) = (12, 9);
    let mut worst_c: f64 = 0.0;
    let mut worst_i: f64 = 0.0;
    for i in 0..100 {
        let truth = random_frame(&mut rng, w, h, 0.01, 0.99);
        let plate = random_frame(&mut rng, w, h, 0.0, 1.0);
        let bg = random_frame(&mut rng, w, h, 0.0, 1.0);
        let alpha_vals: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.1..=1.0)).collect();
        let alpha = AlphaMatte::new(w, h, alpha_vals.clone()).unwrap();
        let fg_px = (0..w * h)
            .map(|k| {
                let (a, c, p) = (alpha_vals[k], truth.pixels()[k], plate.pixels()[k]);
                std::array::from_fn(|ch| (1.0 - a) * p[ch] + a * c[ch])
            })
            .collect();
        let fg = FrameImage::from_pixels(w, h, fg_px).unwrap();
        let scene = CompositeScene::new(plate, bg.clone(), fg, alpha, Mask::full(w, h).unwrap()).unwrap();
        let c = recover_foreground_color(&scene, &cfg);
        let comp = composite(&scene, &c).unwrap();
        for k in 0..w * h {
            let a = alpha_vals[k];
            for ch in 0..3 {
                worst_c = worst_c.max((c.pixels()[k][ch] - truth.pixels()[k][ch]).abs());
                let direct = (1.0 - a) * bg.pixels()[k][ch] + a * truth.pixels()[k][ch];
                worst_i = worst_i.max((comp.pixels()[k][ch] - direct).abs());
            }
        }
        ensure(worst_c <= 1e-6 && worst_i <= 1e-6, || {
            format!("scene {i}: colour error {worst_c:e}, composite error {worst_i:e}")
        })?;
    }
    // binary mattes on 8-bit images
    for i in 0..100 {
        let q = |rng: &mut ChaCha8Rng| {
            let bytes: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
            FrameImage::from_rgb8(w, h, &bytes).unwrap()
        };
        let (plate, bg, fg) = (q(&mut rng), q(&mut rng), q(&mut rng));
        let matte = random_mask(&mut rng, w, h, 0.5);
        let alpha = AlphaMatte::from_fn(w, h, |x, y| f64::from(u8::from(matte.get(x, y)))).unwrap();
        let scene = CompositeScene::new(plate, bg.clone(), fg.clone(), alpha, matte.clone()).unwrap();
        let comp = composite(&scene, &recover_foreground_color(&scene, &cfg)).unwrap();
        let expected = FrameImage::from_pixels(
            w,
            h,
            (0..w * h)
                .map(|k| if matte.bits()[k] { fg.pixels()[k] } else { bg.pixels()[k] })
                .collect(),
        )
        .unwrap();
        ensure(comp.to_rgb8() == expected.to_rgb8(), || format!("binary scene {i} differs after quantization"))?;
    }
    Ok(format!(
        "100 soft scenes (max colour err {worst_c:.1e}, composite err {worst_i:.1e}), 100 binary scenes bit-exact"
    ))
}

fn bbox_suite() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let n = rng.random_range(5..30usize);
        let base = [rng.random_range(0.0..50.0), rng.random_range(0.0..50.0)];
        let size = [rng.random_range(2.0..20.0), rng.random_range(2.0..20.0)];
        let vel = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let grow = [rng.random_range(-0.05..0.3), rng.random_range(-0.05..0.3)];
        let truth: Vec<[f64; 4]> = (0..n)
            .map(|t| {
                let t = t as f64;
                let x0 = base[0] + vel[0] * t;
                let y0 = base[1] + vel[1] * t;
                [x0, y0, x0 + size[0] + grow[0] * t, y0 + size[1] + grow[1] * t]
            })
            .collect();
        let mut observed: Vec<Option<AmodalBox>> = truth
            .iter()
            .enumerate()
            .map(|(t, c)| {
                let keep = rng.random_bool(0.5);
                keep.then(|| AmodalBox::new(t, c[0], c[1], c[2], c[3], Provenance::Observed).unwrap())
            })
            .collect();
        // at least two observations so extrapolation has a velocity
        for t in [0, n - 1] {
            if observed.iter().flatten().count() < 2 {
                let c = truth[t];
                observed[t] = Some(AmodalBox::new(t, c[0], c[1], c[2], c[3], Provenance::Observed).unwrap());
            }
        }
        let filled = fill_missing_boxes(&observed, VideoGeometry::new(100, 100, n).unwrap()).map_err(|e| e.to_string())?;
        for (t, (b, want)) in filled.iter().zip(&truth).enumerate() {
            if let Some(o) = observed[t] {
                ensure(*b == o, || format!("sequence {i} frame {t}: observed box changed"))?;
            }
            for (g, w) in b.corners().iter().zip(want) {
                worst = worst.max((g - w).abs());
            }
        }
        ensure(worst <= 1e-6, || format!("sequence {i}: gap-fill error {worst:e}"))?;
    }

    let occluded = OcclusionVerdict::new(0, Some(0.5), OcclusionLabel::Occluded).unwrap();
    for i in 0..500 {
        let (x0, y0) = (rng.random_range(-20.0..50.0), rng.random_range(-20.0..50.0));
        let (bw, bh) = (rng.random_range(0.5..30.0), rng.random_range(0.5..30.0));
        let b = AmodalBox::new(0, x0, y0, x0 + bw, y0 + bh, Provenance::Observed).unwrap();
        let target = b.area() * rng.random_range(1.0..5.0);
        let g = grow_for_occlusion(&b, &occluded, target).map_err(|e| e.to_string())?;
        let (c0, c1) = (b.center(), g.center());
        let ok = (c0[0] - c1[0]).abs() <= 1e-6
            && (c0[1] - c1[1]).abs() <= 1e-6
            && (b.width() / b.height() - g.width() / g.height()).abs() <= 1e-6
            && (g.area() - target).abs() <= 1e-6
            && g.width() >= b.width()
            && g.height() >= b.height();
        ensure(ok, || format!("growth case {i}: {b:?} -> {g:?} (target area {target})"))?;
        for p in [-50.0, -20.0, 0.0, 20.0, 100.0] {
            let back = adjust_box(&adjust_box(&b, p).unwrap(), -100.0 * p / (100.0 + p)).unwrap();
            let err = back
                .corners()
                .iter()
                .zip(b.corners())
                .map(|(a, c)| (a - c).abs())
                .fold(0.0, f64::max);
            ensure(err <= 1e-6, || format!("adjust inverse case {i}, p = {p}: error {err:e}"))?;
        }
    }
    Ok(format!(
        "200 gap-fill sequences (max err {worst:.1e}), 500 growth cases, adjust inverse at 5 percentages"
    ))
}

struct Scene {
    scene: SyntheticScene,
    manifest: LoadedManifest,
    query: Mask,
}

fn write_scene(dir: &Path, seed: u64) -> Scene {
    let scene = SyntheticScene::generate(&SynthConfig {
        seed,
        ..Default::default()
    })
    .unwrap();
    let manifest = LoadedManifest::load(scene.write(dir).unwrap()).unwrap();
    let query = io::load_mask(dir.join("query.png")).unwrap();
    Scene { scene, manifest, query }
}

fn run_mock(s: &Scene, mode: MockMode, noise: f64, workdir: &Path) -> Result<(MaskSequence, EvalReport), String> {
    let truth = Arc::new(GroundTruth::from_scene(&s.scene));
    let backends = mock_backends(truth, mode, noise, 7).map_err(|e| e.to_string())?;
    let out = run_pipeline(&s.manifest, &s.query, &backends, &PipelineConfig::default(), workdir).map_err(|e| e.to_string())?;
    let report = evaluate_sequence(&out.final_masks, &s.scene.gt_amodal, &s.scene.gt_visible).map_err(|e| e.to_string())?;
    Ok((out.final_masks, report))
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut frames = 0;
    let mut fully = 0;
    for seed in 0..10u64 {
        let s = write_scene(&dir.path().join(format!("scene{seed}")), seed);
        let n = s.scene.gt_amodal.len();
        let full_here = (0..n)
            .filter(|&t| s.scene.gt_visible.get(t).is_empty() && !s.scene.gt_amodal.get(t).is_empty())
            .count();
        ensure((20..=40).contains(&n) && full_here >= 1, || {
            format!("seed {seed}: {n} frames, {full_here} fully occluded")
        })?;
        frames += n;
        fully += full_here;

        let (masks, report) = run_mock(&s, MockMode::Oracle, 0.0, &dir.path().join(format!("oracle{seed}")))?;
        ensure(masks == s.scene.gt_amodal, || format!("seed {seed}: oracle masks differ from ground truth"))?;
        for (name, v) in [
            ("occlusion_iou", report.occlusion_iou),
            ("full_occlusion_iou", report.full_occlusion_iou),
            ("non_visible_pixel_iou", report.non_visible_pixel_iou),
        ] {
            ensure(v == Some(1.0), || format!("seed {seed}: oracle {name} = {v:?}"))?;
        }

        let (masks, report) = run_mock(&s, MockMode::Echo, 0.0, &dir.path().join(format!("echo{seed}")))?;
        ensure(masks == s.scene.gt_visible, || format!("seed {seed}: echo masks differ from visible masks"))?;
        for fe in report.frames.iter().filter(|f| f.occluded) {
            ensure(fe.non_visible_iou == Some(0.0), || {
                format!("seed {seed} frame {}: echo non-visible IoU {:?}", fe.frame, fe.non_visible_iou)
            })?;
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "10 sequences, {frames} frames ({fully} fully occluded): oracle IoUs 1.0, echo non-visible IoU 0, {:.2?}",
        start.elapsed()
    ))
}

fn verdicts_from(bits: &[bool]) -> Vec<OcclusionVerdict> {
    bits.iter()
        .enumerate()
        .map(|(i, &u)| {
            let label = if u {
                OcclusionLabel::Unoccluded
            } else {
                OcclusionLabel::Occluded
            };
            OcclusionVerdict::new(i, Some(if u { 0.0 } else { 0.5 }), label).unwrap()
        })
        .collect()
}

fn chunk_planner() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = ChunkConfig::default();
    let mut forced = 0;
    for i in 0..500 {
        let n = rng.random_range(1..400usize);
        let density = rng.random_range(0.0..0.3);
        let mut bits: Vec<bool> = (0..n).map(|_| rng.random_bool(density)).collect();
        bits[0] = true;
        let chunks = plan_chunks(&verdicts_from(&bits), &cfg).map_err(|e| e.to_string())?;
        let covered: Vec<usize> = chunks.iter().flat_map(|c| c.frames()).collect();
        ensure(covered == (0..n).collect::<Vec<_>>(), || format!("sequence {i}: cover/order violated"))?;
        for (k, c) in chunks.iter().enumerate() {
            ensure(c.len() <= cfg.max_len, || format!("sequence {i}: chunk {k} has {} frames", c.len()))?;
            if !bits[c.start] {
                forced += 1;
                let prev = &chunks[k - 1];
                let justified = prev.len() == cfg.max_len && !(prev.start + 1..=prev.end + 1).any(|t| bits[t]);
                ensure(justified, || format!("sequence {i}: chunk {k} starts on an occluded frame needlessly"))?;
            } else if k + 1 < chunks.len() && c.len() < cfg.target_len {
                // cut short only for lack of a start within reach after the target
                let reach = c.start + cfg.max_len;
                let later = (c.start + cfg.target_len..=reach.min(n - 1)).any(|t| bits[t]);
                ensure(!later, || format!("sequence {i}: chunk {k} cut short despite a later start"))?;
            }
        }
    }
    let mut bits = vec![false; 40];
    bits[0] = true;
    bits[20] = true;
    let example: Vec<(usize, usize)> = plan_chunks(&verdicts_from(&bits), &cfg)
        .map_err(|e| e.to_string())?
        .iter()
        .map(|c| (c.start, c.end))
        .collect();
    ensure(example == vec![(0, 19), (20, 39)], || format!("40-frame example gave {example:?}"))?;
    Ok(format!("500 sequences valid ({forced} forced starts), 40-frame example [0,19],[20,39]"))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn same_tree(a: &Path, b: &Path, only_json: bool) -> Result<usize, String> {
    let fa = files_under(a);
    ensure(fa == files_under(b), || "artifact sets differ".to_string())?;
    let mut compared = 0;
    for rel in fa {
        if only_json && rel.extension().is_none_or(|e| e != "json") {
            continue;
        }
        let (x, y) = (std::fs::read(a.join(&rel)).unwrap(), std::fs::read(b.join(&rel)).unwrap());
        ensure(x == y, || format!("{} differs", rel.display()))?;
        compared += 1;
    }
    Ok(compared)
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = write_scene(&dir.path().join("scene"), 21);
    let frames = s.manifest.load_frames().map_err(|e| e.to_string())?;
    let analysis = tabe_core::analyze_sequence(&s.scene.gt_visible, &s.scene.nearness, &Default::default())
        .map_err(|e| e.to_string())?;
    let cfg = MaskGenConfig {
        seed: 99,
        ..Default::default()
    };
    for name in ["tp_a", "tp_b"] {
        let samples = build_training_samples(&frames, &s.scene.gt_visible, &analysis.verdicts, &cfg, DEFAULT_TOKEN)
            .map_err(|e| e.to_string())?;
        write_training_manifest(&samples, &s.scene.gt_visible, &cfg, DEFAULT_TOKEN, &dir.path().join(name))
            .map_err(|e| e.to_string())?;
    }
    let tp = same_tree(&dir.path().join("tp_a"), &dir.path().join("tp_b"), false)?;

    let mut runs = 0;
    for (mode, noise) in [(MockMode::Oracle, 0.0), (MockMode::Noisy, 0.02)] {
        let a = dir.path().join(format!("{mode:?}_a"));
        let b = dir.path().join(format!("{mode:?}_b"));
        run_mock(&s, mode, noise, &a)?;
        run_mock(&s, mode, noise, &b)?;
        runs += same_tree(&a, &b, true)?;
    }
    Ok(format!("trainprep: {tp} files identical; pipeline: {runs} JSON artifacts identical over oracle and noisy runs"))
}

fn published_numbers() -> Check {
    let (text, json) = emit_report_table(
        "tabe",
        &EvalReport {
            mean_iou: Some(0.7),
            occlusion_iou: Some(0.658),
            full_occlusion_iou: Some(0.418),
            non_visible_pixel_iou: Some(0.487),
            counts: Default::default(),
            frames: vec![],
        },
    );
    for col in ["Occlusion IoU", "Full Occlusion IoU", "Non Visible Pixel IoU"] {
        ensure(METRIC_COLUMNS.contains(&col) && text.contains(col), || format!("metric column {col:?} missing"))?;
    }
    ensure(text.contains("0.658") && text.contains("0.418") && text.contains("0.487"), || {
        "scores not rendered to three decimals".into()
    })?;
    ensure(json.metrics.occlusion_iou == Some(0.658), || "JSON row mismatch".into())?;
    let counts = counts_table("benchmark", 51, &Default::default());
    for col in ["Scenes", "Images", "Occluded Frames", "Heavily Occluded Frames", "Fully Occluded Frames"] {
        ensure(counts.contains(col), || format!("count column {col:?} missing"))?;
    }
    ensure(COUNT_COLUMNS.len() == 4, || "unexpected count columns".into())?;
    Ok("published scores 0.658/0.418/0.487 and the 51-scene category counts need the 51-scene benchmark data and hosted \
        pretrained models, so they are NOT desk-reproducible; the suites above substitute, and eval/stats tables \
        use the same metric and category columns"
        .into())
}

fn main() {
    let checks: [(&str, fn() -> Check); 8] = [
        ("metric-oracle", metric_oracle),
        ("occlusion-suite", occlusion_suite),
        ("compositing-round-trip", compositing_round_trip),
        ("bbox-suite", bbox_suite),
        ("end-to-end-mock-pipeline", end_to_end),
        ("chunk-planner", chunk_planner),
        ("determinism", determinism),
        ("published-numbers-statement", published_numbers),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("{} of {} acceptance criteria passed", checks.len() - failed, checks.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
