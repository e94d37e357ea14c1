//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use envid::audio::{synth_speech, AudioClip, SpeechStyle, WORKING_RATE};
use envid::degrade::{apply_codec_chain, convolve, mix_noise, DegradationProfile, Snr};
use envid::features::{featurize, power, stft, FEATURE_BINS, FRAMES};
use envid::fewshot::{class_likelihood, class_loss, distances, predict, prototypes};
use envid::model::{Adam, BackboneConfig, Checkpoint, ModelConfig, Network, Outputs, DEFAULT_LR};
use envid::pipeline::{
    evaluate, evaluate_all, generate_dataset, train, Dataset, EvalConfig, GenerateConfig, Protocol,
    RegressionTarget, Report, Split, TrainConfig, TrainedModel,
};
use envid::room_sim::{
    default_max_time, grid_placements, sabine_rt60, schroeder_rt60, simulate_air, GridSpec,
    Placement, RoomSpec, ShapeCategory, SPEED_OF_SOUND,
};
use envid::seed::rng_from;
use rand::Rng as _;
use sha2::{Digest, Sha256};

type Check = Result<(bool, String), String>;

struct Ledger {
    failed: usize,
}

impl Ledger {
    fn record(&mut self, name: &str, outcome: Check) {
        let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn noise(n: usize, amp: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed);
    (0..n).map(|_| rng.gen_range(-amp..amp)).collect()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn signal_model() -> Check {
    let t = Instant::now();
    let a = noise(4000, 1.0, 1);
    let b = noise(1500, 1.0, 2);
    let mut direct = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            direct[i + j] += x * y;
        }
    }
    let fast = convolve(&a, &b);
    let diff: Vec<f64> = fast.iter().zip(&direct).map(|(f, d)| f - d).collect();
    let conv_err = if fast.len() == direct.len() {
        rms(&diff) / rms(&direct)
    } else {
        f64::INFINITY
    };

    let signal = AudioClip::new(WORKING_RATE, noise(48_000, 0.05, 3));
    let hiss = AudioClip::new(WORKING_RATE, noise(48_000, 0.3, 4));
    let mut snr_err: f64 = 0.0;
    for db in [-5.0, 0.0, 7.5, 20.0, 45.0] {
        let mixed = mix_noise(&signal, &hiss, Snr::Finite(db)).map_err(err)?;
        let residual: Vec<f64> = mixed
            .samples
            .iter()
            .zip(&signal.samples)
            .map(|(m, s)| m - s)
            .collect();
        let realized = 20.0 * (rms(&signal.samples) / rms(&residual)).log10();
        snr_err = snr_err.max((realized - db).abs());
    }

    let clip = AudioClip::new(WORKING_RATE, noise(30_000, 0.7, 5));
    let same = apply_codec_chain(&clip, &[], None).map_err(err)?;
    let identical = same.sample_rate == clip.sample_rate
        && same.samples.len() == clip.samples.len()
        && same
            .samples
            .iter()
            .zip(&clip.samples)
            .all(|(x, y)| x.to_bits() == y.to_bits());

    let elapsed = t.elapsed();
    let pass =
        conv_err <= 1e-6 && snr_err <= 1e-6 && identical && elapsed < Duration::from_secs(60);
    Ok((
        pass,
        format!(
            "conv rel err {conv_err:.2e}, max SNR err {snr_err:.2e} dB, empty chain identical {identical}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn acoustics() -> Check {
    let room = RoomSpec::new("a", ShapeCategory::Rectangle, 8.0, 4.0, 3.0, 0.3).map_err(err)?;
    let mut placements = grid_placements(&room, &GridSpec::default()).map_err(err)?;
    placements.push(Placement {
        mic: [1.3, 0.9, 1.1],
        source: [6.6, 3.2, 2.4],
        grid_index: (0, 0),
    });
    let mut peak_off: f64 = 0.0;
    for p in &placements {
        let air = simulate_air(&room, p, WORKING_RATE, 0.2).map_err(err)?;
        let peak = air
            .samples
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, &v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            })
            .0;
        let expected = p.distance() / SPEED_OF_SOUND * WORKING_RATE as f64;
        peak_off = peak_off.max((peak as f64 - expected).abs());
    }

    let sabine_room =
        RoomSpec::new("s", ShapeCategory::Rectangle, 10.0, 5.0, 3.0, 0.1).map_err(err)?;
    let formula = 0.161 * 150.0 / (0.1 * 2.0 * (10.0 * 5.0 + 10.0 * 3.0 + 5.0 * 3.0));
    let sabine = sabine_rt60(&sabine_room);

    let fs = WORKING_RATE as f64;
    let mut rng = rng_from(6);
    let mut schroeder_err: f64 = 0.0;
    for t60 in [0.3, 0.6, 1.2] {
        let n = (2.0 * t60 * fs) as usize;
        let smooth: Vec<f64> = (0..n)
            .map(|i| 10f64.powf(-3.0 * i as f64 / (fs * t60)))
            .collect();
        let noisy: Vec<f64> = smooth
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if i == 0 {
                    1.0
                } else {
                    v * rng.gen_range(-0.5..0.5)
                }
            })
            .collect();
        for ir in [smooth, noisy] {
            let est = schroeder_rt60(&ir, WORKING_RATE).map_err(err)?;
            schroeder_err = schroeder_err.max((est - t60).abs() / t60);
        }
    }

    let mono_room =
        RoomSpec::new("m", ShapeCategory::Rectangle, 6.0, 4.0, 3.0, 0.5).map_err(err)?;
    let p = Placement {
        mic: [2.0, 1.5, 1.6],
        source: [4.1, 2.6, 1.4],
        grid_index: (0, 0),
    };
    let mut rt = Vec::new();
    for step in 1..=8 {
        let ca = step as f64 / 10.0;
        let r = RoomSpec {
            absorption: ca,
            ..mono_room.clone()
        };
        let air = simulate_air(&r, &p, WORKING_RATE, default_max_time(&r)).map_err(err)?;
        rt.push(schroeder_rt60(&air.samples, WORKING_RATE).map_err(err)?);
    }
    let monotone = rt.windows(2).all(|w| w[1] < w[0]);

    let pass = peak_off <= 2.0
        && (sabine - formula).abs() < 1e-9
        && (sabine - 1.2711).abs() < 5e-5
        && schroeder_err < 0.05
        && monotone;
    Ok((
        pass,
        format!(
            "direct peak off by <= {peak_off:.2} samples, Sabine {sabine:.4} s, Schroeder rel err {:.2}%, RT60 over absorption 0.1..0.8 {}",
            100.0 * schroeder_err,
            rt.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" > ")
        ),
    ))
}

fn features() -> Check {
    let mut shapes_ok = true;
    let mut lengths = Vec::new();
    for (k, len) in [1usize, 160, 1023, 8000, 47_999, 48_000, 48_001, 96_000]
        .into_iter()
        .enumerate()
    {
        for clip in [
            AudioClip::new(WORKING_RATE, noise(len, 0.5, 10 + k as u64)),
            AudioClip::new(WORKING_RATE, vec![0.0; len]),
        ] {
            let map = featurize(&clip);
            shapes_ok &= map.values.len() == FRAMES * FEATURE_BINS
                && map.shape() == (96, 276)
                && map.is_finite();
        }
        lengths.push(len);
    }

    let tone: Vec<f64> = (0..48_000)
        .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / WORKING_RATE as f64).sin())
        .collect();
    let spec = power(&stft(&tone));
    let mid = &spec[spec.len() / 2];
    let peak_bin = mid
        .iter()
        .enumerate()
        .fold(
            (0, f64::MIN),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        )
        .0;

    let mut rng = rng_from(20);
    let style = SpeechStyle::sample(&mut rng);
    let speech = synth_speech(&mut rng, style, WORKING_RATE, 3.0);
    let reference = featurize(&speech);
    let mut gain_err: f64 = 0.0;
    for g in [0.01, 0.3, 4.0] {
        let scaled = AudioClip::new(WORKING_RATE, speech.samples.iter().map(|v| v * g).collect());
        let map = featurize(&scaled);
        for (a, b) in map.values.iter().zip(&reference.values) {
            gain_err = gain_err.max((a - b).abs() as f64);
        }
    }

    let pass = shapes_ok && peak_bin == 64 && gain_err <= 1e-5;
    Ok((
        pass,
        format!(
            "96x276 for lengths {lengths:?} (noise and silence) {shapes_ok}, 1 kHz peak at bin {peak_bin}, max gain deviation {gain_err:.2e}"
        ),
    ))
}

/// Quadratic loss on embeddings and regression outputs, with its gradients.
fn probe_loss(out: &Outputs<f64>) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let mut l = 0.0;
    let mut de = Vec::new();
    let mut dr = Vec::new();
    for (i, (e, &r)) in out.embeddings.iter().zip(&out.regression).enumerate() {
        let mut g = Vec::with_capacity(e.len());
        for (j, &v) in e.iter().enumerate() {
            let a = ((i * 13 + j) as f64 * 0.37).cos();
            l += a * v + 0.5 * v * v;
            g.push(a + v);
        }
        l += 0.4 * r * r - 0.7 * r;
        dr.push(0.8 * r - 0.7);
        de.push(g);
    }
    (l, de, dr)
}

/// Worst relative error between analytic and central-difference gradients
/// over `pick(grads)`.
fn gradient_error(
    net: &mut Network<f64>,
    inputs: &[Vec<f64>],
    pick: impl Fn(&[f64]) -> Vec<usize>,
) -> Result<(f64, usize), String> {
    let batch: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
    let out = net.forward(&batch, None).map_err(err)?;
    let (_, de, dr) = probe_loss(&out);
    net.zero_grad();
    net.backward(&de, &dr).map_err(err)?;
    let analytic = net.grads().to_vec();
    let chosen = pick(&analytic);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for &i in &chosen {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = probe_loss(&net.infer(&batch).map_err(err)?).0;
        net.params_mut()[i] = orig - h;
        let down = probe_loss(&net.infer(&batch).map_err(err)?).0;
        net.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    Ok((worst, chosen.len()))
}

fn model_suite() -> Check {
    let input_len = FRAMES * FEATURE_BINS;
    let inputs = |n: usize, seed: u64| {
        (0..n)
            .map(|k| noise(input_len, 1.0, seed + k as u64))
            .collect::<Vec<_>>()
    };

    // every parameter of a narrow network on full-size feature maps
    let narrow = ModelConfig {
        backbone: BackboneConfig {
            conv_channels: vec![2, 2, 3, 3, 4],
            dense_dim: 6,
            ..BackboneConfig::default()
        },
        embed_dim: 4,
        regression_hidden: 3,
    };
    let mut net = Network::<f64>::new(narrow, &mut rng_from(30)).map_err(err)?;
    let mut rng = rng_from(31);
    for p in net.params_mut() {
        *p += rng.gen_range(-0.05..0.05);
    }
    let (narrow_err, narrow_n) =
        gradient_error(&mut net, &inputs(2, 40), |g| (0..g.len()).collect())?;

    // default network, strongest gradients plus an even spread of the rest
    let cfg = ModelConfig::default();
    let count = cfg.param_count();
    let mut net = Network::<f64>::new(cfg.clone(), &mut rng_from(32)).map_err(err)?;
    let (full_err, full_n) = gradient_error(&mut net, &inputs(1, 50), |g| {
        let top = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut order: Vec<usize> = (0..g.len()).collect();
        order.sort_by(|&a, &b| g[b].abs().total_cmp(&g[a].abs()));
        let mut chosen: Vec<usize> = order[..16].to_vec();
        let stride = g.len() / 48;
        for k in 0..48 {
            if let Some(i) = (k * stride..(k + 1) * stride).find(|&i| g[i].abs() >= 1e-3 * top) {
                chosen.push(i);
            }
        }
        chosen
    })?;

    let net = Network::<f32>::new(cfg.clone(), &mut rng_from(33)).map_err(err)?;
    let mut opt = Adam::new(count, DEFAULT_LR);
    let mut params = net.params().to_vec();
    let grads: Vec<f32> = (0..count)
        .map(|i| ((i % 97) as f32 - 48.0) * 1e-3)
        .collect();
    opt.update(&mut params, &grads);
    let ckpt = Checkpoint {
        config: cfg.clone(),
        params,
        optimizer: opt,
        epoch: 3,
        validation_metric: 0.625,
        rng: Some(rng_from(34)),
    };
    let dir = tempfile::tempdir().map_err(err)?;
    let path = dir.path().join("best.ckpt");
    ckpt.save(&path).map_err(err)?;
    let back = Checkpoint::load(&path).map_err(err)?;
    let bytes_equal = back.to_bytes().map_err(err)? == std::fs::read(&path).map_err(err)?;
    let params_equal = back
        .params
        .iter()
        .zip(&ckpt.params)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let round_trip = back == ckpt && bytes_equal && params_equal;

    let pass = narrow_err < 1e-4
        && full_err < 1e-4
        && (3_000_000..=4_600_000).contains(&count)
        && round_trip;
    Ok((
        pass,
        format!(
            "gradient rel err {narrow_err:.2e} over all {narrow_n} params of a narrow net, {full_err:.2e} over {full_n} params of the default net; {count} params; checkpoint round trip bit-exact {round_trip}"
        ),
    ))
}

fn fewshot_math() -> Check {
    let mut rng = rng_from(60);
    let mut norm_err: f64 = 0.0;
    for n in [2usize, 3, 10, 50] {
        for scale in [1.0, 100.0, 1e4] {
            let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..scale)).collect();
            norm_err = norm_err.max((class_likelihood(&d).iter().sum::<f64>() - 1.0).abs());
        }
    }
    let pair = class_likelihood(&[0.0, 2.0]);
    let pair_ok = (pair[0] - 0.8808).abs() <= 1e-4 && (pair[1] - 0.1192).abs() <= 1e-4;
    let uniform = class_loss(&class_likelihood(&[1.7; 10]), 4);
    let uniform_err = (uniform - 10f64.ln()).abs();

    let dim = 16;
    let mut invariant = true;
    for trial in 0..20 {
        let support: Vec<Vec<Vec<f64>>> = (0..5)
            .map(|_| {
                (0..3)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let query: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let shift: Vec<f64> = (0..dim)
            .map(|_| rng.gen_range(-50.0..50.0) * trial as f64)
            .collect();
        let moved_support: Vec<Vec<Vec<f64>>> = support
            .iter()
            .map(|c| {
                c.iter()
                    .map(|s| s.iter().zip(&shift).map(|(a, b)| a + b).collect())
                    .collect()
            })
            .collect();
        let moved_query: Vec<f64> = query.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let guess = |sup: &[Vec<Vec<f64>>], q: &[f64]| -> Result<usize, String> {
            let d = distances(q, &prototypes(sup).map_err(err)?).map_err(err)?;
            Ok(predict(&class_likelihood(&d)))
        };
        invariant &= guess(&support, &query)? == guess(&moved_support, &moved_query)?;
    }

    let pass = norm_err <= 1e-9 && pair_ok && uniform_err <= 1e-9 && invariant;
    Ok((
        pass,
        format!(
            "softmax sum err {norm_err:.1e}, distances (0, 2) -> ({:.4}, {:.4}), uniform 10-class loss err {uniform_err:.1e}, translation invariant {invariant}",
            pair[0], pair[1]
        ),
    ))
}

fn closed_accuracy(report: &Report) -> f64 {
    match report {
        Report::Closed(c) => c.accuracy,
        _ => f64::NAN,
    }
}

/// Results of the desk-scale run shared by several criteria.
struct Desk {
    dataset: Dataset,
    model: TrainedModel,
    train_time: Duration,
    closed: f64,
    auc: f64,
    rt60_rmse: f64,
    rt60_std: f64,
}

fn desk_run(root: &Path) -> Result<Desk, String> {
    let t = Instant::now();
    let dataset =
        generate_dataset(&GenerateConfig::desk(7), &root.join("data"), None, 1).map_err(err)?;
    let gen_time = t.elapsed();
    let t = Instant::now();
    let model = train(&dataset, &TrainConfig::desk(7), &root.join("rt60")).map_err(err)?;
    let train_time = t.elapsed();
    println!(
        "     desk run: {} records generated in {:.0} s, {} epochs trained in {:.0} s",
        dataset.manifest.records.len(),
        gen_time.as_secs_f64(),
        model.log.epochs.len(),
        train_time.as_secs_f64()
    );
    let reports = evaluate_all(
        &dataset,
        &model,
        &[Protocol::Closed, Protocol::Open, Protocol::Regress],
        &EvalConfig::desk(7),
        &root.join("rt60_eval"),
    )
    .map_err(err)?;
    let mut desk = Desk {
        dataset,
        model,
        train_time,
        closed: f64::NAN,
        auc: f64::NAN,
        rt60_rmse: f64::NAN,
        rt60_std: f64::NAN,
    };
    for r in &reports {
        match r {
            Report::Closed(c) => desk.closed = c.accuracy,
            Report::Open(o) => desk.auc = o.auc,
            Report::Regress(g) => {
                desk.rt60_rmse = g.rmse;
                desk.rt60_std = g.target_std;
            }
            _ => {}
        }
    }
    Ok(desk)
}

fn desk_end_to_end(desk: &Desk) -> Check {
    let rooms = &desk.dataset.manifest.classes;
    let test_rooms = desk.dataset.manifest.by_class(Split::Test).len();
    let train_rooms = desk.dataset.manifest.by_class(Split::Train).len();
    let epochs = desk.model.log.epochs.len();
    let pass = train_rooms == 20
        && test_rooms == 10
        && epochs <= 30
        && desk.train_time <= Duration::from_secs(30 * 60)
        && desk.closed >= 0.60
        && desk.auc >= 0.70;
    Ok((
        pass,
        format!(
            "{train_rooms} train / {test_rooms} test rooms of {}, {epochs} epochs in {:.0} s, 3-way accuracy {:.3}, open-set AUC {:.3}",
            rooms.len(),
            desk.train_time.as_secs_f64(),
            desk.closed,
            desk.auc
        ),
    ))
}

fn codec_robustness(desk: &Desk, root: &Path) -> Check {
    let config = GenerateConfig {
        test_profile: Some(DegradationProfile::simulated(128.0)),
        test_only: true,
        ..GenerateConfig::desk(7)
    };
    let coded = generate_dataset(&config, &root.join("coded"), None, 1).map_err(err)?;
    let report = evaluate(
        &coded,
        &desk.model,
        Protocol::Closed,
        &EvalConfig::desk(7),
        &root.join("coded_eval"),
    )
    .map_err(err)?;
    let coded_acc = closed_accuracy(&report);
    let drop = desk.closed - coded_acc;
    Ok((
        drop < 0.15,
        format!(
            "clean {:.3}, simulated codec at 128 kbps {coded_acc:.3}, drop {:.1} pp",
            desk.closed,
            100.0 * drop
        ),
    ))
}

fn regression(desk: &Desk, root: &Path) -> Check {
    let ratio = desk.rt60_rmse / desk.rt60_std;
    let config = TrainConfig {
        regression_target: RegressionTarget::Volume,
        ..TrainConfig::desk(7)
    };
    let model = train(&desk.dataset, &config, &root.join("volume")).map_err(err)?;
    let range = desk
        .dataset
        .manifest
        .volume_span(Split::Train)
        .ok_or("no training volumes")?;
    let eval = EvalConfig {
        volume_bins: vec![2],
        volume_range: range,
        ..EvalConfig::desk(7)
    };
    let report = evaluate(
        &desk.dataset,
        &model,
        Protocol::Regress,
        &eval,
        &root.join("volume_eval"),
    )
    .map_err(err)?;
    let Report::Regress(vol) = report else {
        return Err("unexpected report".into());
    };
    let two_bin = vol.volume_bins.first().map_or(f64::NAN, |b| b.1);
    let lower = desk
        .dataset
        .manifest
        .split(Split::Test)
        .filter(|r| {
            r.labels
                .volume
                .is_some_and(|v| v < (range.0 + range.1) / 2.0)
        })
        .count() as f64
        / desk.dataset.manifest.split(Split::Test).count() as f64;
    let majority = lower.max(1.0 - lower);
    Ok((
        ratio < 0.5 && two_bin >= 0.80,
        format!(
            "RT60 RMSE {:.3} s vs test std {:.3} s (ratio {ratio:.3}); 2-bin volume accuracy {two_bin:.3} over {:.1}..{:.1} m3 (majority bin holds {majority:.3}), volume RMSE ratio {:.3}",
            desk.rt60_rmse, desk.rt60_std, range.0, range.1, vol.rmse_ratio
        ),
    ))
}

fn sha_file(path: &Path) -> Result<String, String> {
    Ok(hex::encode(Sha256::digest(
        std::fs::read(path).map_err(err)?,
    )))
}

/// Hashes of every output file of a small full pipeline run.
fn small_pipeline(root: &Path, jobs: usize) -> Result<Vec<(String, String)>, String> {
    use envid::pipeline::{AirPool, DESK_SAMPLER};
    use envid::room_sim::RoomSampler;
    let config = GenerateConfig {
        speech: envid::pipeline::SpeechPool::Synthetic { clips: 3 },
        airs: AirPool::Simulated {
            train_rooms: 4,
            val_rooms: 2,
            test_rooms: 4,
            sampler: RoomSampler {
                length: (3.0, 6.0),
                ..DESK_SAMPLER
            },
            grid: GridSpec {
                rows: 3,
                cols: 3,
                ..GridSpec::default()
            },
            air_seconds: Some(0.4),
        },
        // noise and the built-in codec, so every random stage is exercised
        profile: DegradationProfile {
            codecs: DegradationProfile::simulated(24.0).codecs,
            ..DegradationProfile::training()
        },
        ..GenerateConfig::desk(11)
    };
    let data = root.join("data");
    let dataset = generate_dataset(&config, &data, None, jobs).map_err(err)?;
    let train_config = TrainConfig {
        n_way: 3,
        k_shot: 3,
        query_cap: Some(2),
        episodes_per_epoch: 3,
        max_epochs: 3,
        patience: 3,
        validation_episodes: 4,
        model: ModelConfig {
            backbone: BackboneConfig {
                conv_channels: vec![2, 4],
                dense_dim: 8,
                ..BackboneConfig::default()
            },
            embed_dim: 8,
            regression_hidden: 4,
        },
        ..TrainConfig::desk(11)
    };
    let run = root.join("run");
    let model = train(&dataset, &train_config, &run).map_err(err)?;
    let eval = EvalConfig {
        n_way: 3,
        k_shot: 3,
        episodes: 10,
        open_trials: 50,
        k_values: vec![1, 2, 3],
        ..EvalConfig::desk(11)
    };
    let reports = root.join("reports");
    evaluate_all(&dataset, &model, &Protocol::ALL, &eval, &reports).map_err(err)?;

    let mut files = vec![
        data.join("manifest.json"),
        run.join("best.ckpt"),
        run.join("train_log.json"),
    ];
    let mut report_files: Vec<_> = std::fs::read_dir(&reports)
        .map_err(err)?
        .map(|e| e.map(|e| e.path()).map_err(err))
        .collect::<Result<_, _>>()?;
    report_files.sort();
    files.extend(report_files);
    files
        .iter()
        .map(|p| {
            Ok((
                p.strip_prefix(root).map_err(err)?.display().to_string(),
                sha_file(p)?,
            ))
        })
        .collect()
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    let first = small_pipeline(a.path(), 1)?;
    let second = small_pipeline(b.path(), 2)?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let pass = first.len() == second.len() && first.len() > 3 && differing.is_empty();
    Ok((
        pass,
        format!(
            "{} files compared (manifest, checkpoint, log, reports) across 1 and 2 worker threads, differing: {differing:?}",
            first.len()
        ),
    ))
}

fn main() -> ExitCode {
    let mut ledger = Ledger { failed: 0 };
    ledger.record("signal-model suite", signal_model());
    ledger.record("acoustics suite", acoustics());
    ledger.record("feature suite", features());
    ledger.record("model suite", model_suite());
    ledger.record("few-shot math suite", fewshot_math());

    let root = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => {
            println!("FAIL desk setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    match desk_run(root.path()) {
        Ok(desk) => {
            ledger.record("desk-scale end-to-end", desk_end_to_end(&desk));
            ledger.record("codec robustness", codec_robustness(&desk, root.path()));
            ledger.record("desk-scale regression", regression(&desk, root.path()));
        }
        Err(e) => {
            for name in [
                "desk-scale end-to-end",
                "codec robustness",
                "desk-scale regression",
            ] {
                ledger.record(name, Err(e.clone()));
            }
        }
    }
    ledger.record("determinism", determinism());

    println!("{} of 9 criteria failed", ledger.failed);
    if ledger.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
