use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use camchain_core::adapter::{
    first_stage_loss, gradcheck, guidance_update, ortho_loss, ortho_loss_grad, second_stage_loss, GuidanceState,
    LossWeights, LowRankAdapter, GRADCHECK_TOLERANCE,
};
use camchain_core::features::DetectorParams;
use camchain_core::frame_io::{load_frame, load_sequence, save_sequence};
use camchain_core::homography::{PairConfig, RansacParams};
use camchain_core::motion::{
    classify_motion_with_aspect, extract_motion_chain, parse_chain, serialize_chain, MotionChain, MotionThresholds,
};
use camchain_core::oracle::{generate_sequence, OracleMotion, OracleSpec};
use camchain_core::score::{camera_score, ScoreOptions};
use camchain_core::warp::synthesize_pseudo_video;

use crate::{AdapterCommand, AdapterShape, Command, Estimation, MotionArg, Outcome};

pub fn dispatch(command: Command) -> Result<Outcome> {
    match command {
        Command::Extract { video, out, estimation } => extract(&video, &out, &estimation),
        Command::Warp {
            image,
            chain,
            out_dir,
            skip_gaps,
        } => warp(&image, &chain, &out_dir, skip_gaps),
        Command::Score {
            reference,
            generated,
            report,
            allow_low_coverage,
            resample,
            estimation,
        } => {
            let opts = ScoreOptions {
                allow_low_coverage,
                resample,
            };
            score(&reference, &generated, report.as_deref(), &opts, &estimation)
        }
        Command::Classify {
            chain,
            min_translation,
            min_scale,
            min_rotation,
            dominance,
        } => classify(
            &chain,
            &MotionThresholds {
                translation: min_translation,
                scale: min_scale,
                rotation_degrees: min_rotation,
                dominance,
            },
        ),
        Command::Oracle {
            out_dir,
            motion,
            dx,
            dy,
            scale,
            theta,
            script,
            width,
            height,
            frames,
            seed,
        } => {
            let motion = match motion {
                MotionArg::Pan => OracleMotion::Pan { dx, dy },
                MotionArg::Zoom => OracleMotion::Zoom { scale },
                MotionArg::Rotate => OracleMotion::Rotate { theta },
                MotionArg::Script => {
                    let Some(path) = script else {
                        bail!("--motion script needs --script FILE");
                    };
                    let text = read(&path)?;
                    let steps: Vec<[f64; 9]> =
                        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                    OracleMotion::Script { steps }
                }
            };
            let spec = OracleSpec {
                width,
                height,
                frame_count: frames,
                motion,
                texture_seed: seed,
            };
            oracle(&spec, &out_dir)
        }
        Command::Adapters { action } => match action {
            AdapterCommand::Gradcheck { seeds, seed, shape } => adapters_gradcheck(seed, seeds, &shape),
            AdapterCommand::Demo {
                seed,
                shape,
                delta,
                lambda,
                k_sig,
                l_temporal,
                l_spatial,
                lambda_g,
                steps,
            } => {
                let weights = LossWeights {
                    delta,
                    lambda,
                    k_sig: k_sig.unwrap_or(shape.rank),
                };
                adapters_demo(seed, &shape, &weights, (l_temporal, l_spatial), lambda_g, steps)
            }
            AdapterCommand::Ortho {
                spatial,
                temporal,
                k_sig,
                grad,
            } => adapters_ortho(&spatial, &temporal, k_sig, grad.as_deref()),
        },
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn pair_config(e: &Estimation) -> Result<PairConfig> {
    let ransac = RansacParams {
        inlier_threshold: e.inlier_threshold,
        confidence: e.confidence,
        max_iterations: e.max_iterations,
        seed: e.seed,
    };
    ransac.validate()?;
    if !(e.ratio > 0.0 && e.ratio <= 1.0) {
        bail!("--ratio must be in (0, 1], got {}", e.ratio);
    }
    if e.max_keypoints == 0 {
        bail!("--max-keypoints must be at least 1");
    }
    Ok(PairConfig {
        detector: DetectorParams {
            threshold: e.fast_threshold,
            max_count: e.max_keypoints,
        },
        ratio: e.ratio,
        ransac,
    })
}

fn load_chain(path: &Path) -> Result<MotionChain> {
    parse_chain(&read(path)?).with_context(|| format!("parsing chain {}", path.display()))
}

fn is_chain_file(path: &Path) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn chain_or_extract(path: &Path, config: &PairConfig) -> Result<MotionChain> {
    if is_chain_file(path) {
        return load_chain(path);
    }
    let seq = load_sequence(path).with_context(|| format!("loading video {}", path.display()))?;
    Ok(extract_motion_chain(&seq, config)?)
}

fn extract(video: &Path, out: &Path, e: &Estimation) -> Result<Outcome> {
    let config = pair_config(e)?;
    let seq = load_sequence(video).with_context(|| format!("loading video {}", video.display()))?;
    let chain = extract_motion_chain(&seq, &config)?;
    write(out, serialize_chain(&chain))?;
    let total = chain.pairs().len();
    eprintln!("{}/{} pairs estimated", chain.ok_count(), total);
    Ok(if chain.is_complete() {
        Outcome::Complete
    } else {
        Outcome::Partial
    })
}

fn warp(image: &Path, chain: &Path, out_dir: &Path, skip_gaps: bool) -> Result<Outcome> {
    let img = load_frame(image).with_context(|| format!("loading {}", image.display()))?;
    let chain = load_chain(chain)?;
    let video = synthesize_pseudo_video(&img, &chain, skip_gaps)?;
    save_sequence(&video.frames, out_dir)?;
    for (k, mask) in video.masks.iter().enumerate() {
        write(&out_dir.join(format!("mask_{:04}.pgm", k + 1)), mask.to_pgm())?;
    }
    let meta = json!({
        "frame_count": video.frames.len(),
        "width": video.frames.width(),
        "height": video.frames.height(),
        "skip_gaps": skip_gaps,
        "substituted_pairs": video.substituted_pairs,
        "valid_fraction": video.masks.iter().map(|m| m.valid_fraction()).collect::<Vec<_>>(),
    });
    write(
        &out_dir.join("metadata.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok(if video.substituted_pairs.is_empty() {
        Outcome::Complete
    } else {
        Outcome::Partial
    })
}

fn score(
    reference: &Path,
    generated: &Path,
    report: Option<&Path>,
    opts: &ScoreOptions,
    e: &Estimation,
) -> Result<Outcome> {
    let config = pair_config(e)?;
    let (r, g) = std::thread::scope(|s| {
        let r = s.spawn(|| chain_or_extract(reference, &config));
        let g = chain_or_extract(generated, &config);
        (r.join().expect("reference extraction panicked"), g)
    });
    let report_data = camera_score(&r?, &g?, opts)?;
    if let Some(path) = report {
        write(path, report_data.to_json() + "\n")?;
    }
    println!("{}", report_data.score);
    Ok(if report_data.coverage < 1.0 {
        Outcome::Partial
    } else {
        Outcome::Complete
    })
}

fn classify(path: &Path, thresholds: &MotionThresholds) -> Result<Outcome> {
    let chain = load_chain(path)?;
    let aspect = chain.source_height() as f64 / chain.source_width() as f64;
    let mut partial = false;
    for pair in chain.pairs() {
        match pair.homography {
            Some(h) => {
                let l = classify_motion_with_aspect(&h, aspect, thresholds)?;
                println!(
                    "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.4}",
                    pair.index,
                    l.label.as_str(),
                    l.translation.0,
                    l.translation.1,
                    l.scale,
                    l.rotation.to_degrees()
                );
            }
            None => {
                partial = true;
                println!("{}\tfailed\t{}", pair.index, pair.status.as_str());
            }
        }
    }
    Ok(if partial { Outcome::Partial } else { Outcome::Complete })
}

fn oracle(spec: &OracleSpec, out_dir: &Path) -> Result<Outcome> {
    let (seq, truth) = generate_sequence(spec)?;
    save_sequence(&seq, out_dir)?;
    write(&out_dir.join("ground_truth.json"), serialize_chain(&truth))?;
    write(&out_dir.join("oracle.json"), serde_json::to_string_pretty(spec)? + "\n")?;
    Ok(Outcome::Complete)
}

fn adapters_gradcheck(first: u64, count: u64, shape: &AdapterShape) -> Result<Outcome> {
    println!("seed\tloss\trel_err_b\trel_err_a\tresult");
    let mut failed = 0;
    for seed in first..first + count {
        let c = gradcheck(seed, shape.rows, shape.cols, shape.rank)?;
        if !c.passed() {
            failed += 1;
        }
        println!(
            "{}\t{:.6e}\t{:.3e}\t{:.3e}\t{}",
            c.seed,
            c.loss,
            c.rel_error_b,
            c.rel_error_a,
            if c.passed() { "PASS" } else { "FAIL" }
        );
    }
    println!("{}/{count} within {GRADCHECK_TOLERANCE:e}", count - failed);
    if failed > 0 {
        bail!("{failed} gradient checks failed");
    }
    Ok(Outcome::Complete)
}

fn adapters_demo(
    seed: u64,
    shape: &AdapterShape,
    weights: &LossWeights,
    (l_temporal, l_spatial): (f64, f64),
    lambda_g: f64,
    steps: usize,
) -> Result<Outcome> {
    weights.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spatial = LowRankAdapter::random(shape.rows, shape.cols, shape.rank, &mut rng)?;
    let temporal = LowRankAdapter::random(shape.rows, shape.cols, shape.rank, &mut rng)?;
    println!(
        "adapters: d={} k={} r={} seed={seed}",
        shape.rows, shape.cols, shape.rank
    );
    println!("|W0|_F spatial: {:.6}", spatial.w0().norm());
    println!("|W0 + BA|_F spatial: {:.6}", spatial.effective_weight().norm());
    println!("|BA|_F spatial: {:.6}", spatial.delta().norm());
    println!("|BA|_F temporal: {:.6}", temporal.delta().norm());

    let l_ortho = ortho_loss(&spatial, &temporal, weights.k_sig)?;
    println!("ortho loss (k_sig={}): {:.6e}", weights.k_sig, l_ortho);
    if weights.k_sig >= shape.rank {
        let g = ortho_loss_grad(&spatial, &temporal, weights.k_sig)?;
        println!("|dL/dB_s|_F: {:.6e}", g.d_b.norm());
        println!("|dL/dA_s|_F: {:.6e}", g.d_a.norm());
    }
    println!(
        "first stage loss (delta={}): {:.6}",
        weights.delta,
        first_stage_loss(l_temporal, l_spatial, weights.delta)?
    );
    println!(
        "second stage loss (lambda={}): {:.6}",
        weights.lambda,
        second_stage_loss(l_spatial, l_ortho, weights.lambda)?
    );

    let dims = IxDyn(&[4, 8, 8]);
    let mut z = ArrayD::from_shape_fn(dims.clone(), |_| rng.random_range(-1.0..1.0));
    let z_p = ArrayD::from_shape_fn(dims, |_| rng.random_range(-1.0..1.0));
    let dist = |z: &ArrayD<f64>| (z - &z_p).mapv(|v| v * v).sum().sqrt();
    let d0 = dist(&z);
    println!("guidance lambda_g={lambda_g}: step 0 distance {d0:.6e}");
    for n in 1..=steps {
        z = guidance_update(&GuidanceState {
            z,
            z_p: z_p.clone(),
            lambda_g,
            mask: None,
        })?;
        let d = dist(&z);
        println!(
            "guidance step {n}: distance {d:.6e} (expected {:.6e})",
            d0 * (1.0 - 2.0 * lambda_g).abs().powi(n as i32)
        );
    }
    Ok(Outcome::Complete)
}

fn adapters_ortho(spatial: &Path, temporal: &Path, k_sig: Option<usize>, grad: Option<&Path>) -> Result<Outcome> {
    let s = LowRankAdapter::from_json(&read(spatial)?).with_context(|| format!("parsing {}", spatial.display()))?;
    let t = LowRankAdapter::from_json(&read(temporal)?).with_context(|| format!("parsing {}", temporal.display()))?;
    let k = k_sig.unwrap_or(s.rank().max(t.rank()));
    println!("{}", ortho_loss(&s, &t, k)?);
    if let Some(path) = grad {
        let g = ortho_loss_grad(&s, &t, k)?;
        let rows = |m: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let out = json!({ "d_b": rows(&g.d_b), "d_a": rows(&g.d_a) });
        write(path, serde_json::to_string_pretty(&out)? + "\n")?;
    }
    Ok(Outcome::Complete)
}
