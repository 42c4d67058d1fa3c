//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs as a plain binary so the lines always show up in
//! `cargo test` output.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use insarlab::baselines::{dilogarithm, ml_coherence, phase_std_from_coherence};
use insarlab::metrics::{evaluate_dataset, phase_rmse, ssim_mean, Report};
use insarlab::network::{
    decode_checkpoint, encode_checkpoint, grad_check, infer, load_checkpoint, load_training_set, save_checkpoint,
    train, ModelParams, ModelSpec, TrainConfig,
};
use insarlab::pipeline::{predict_boxcar, predict_model};
use insarlab::preprocess::normalize_amplitude;
use insarlab::simulator::{add_speckle_noise, coherence_from_amplitudes, generate_dataset, ConfigLabel, Manifest};
use insarlab::{form_interferogram, phase_to_complex, read_raster, reconstruct_phase, write_raster, Raster, SlcImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Lite-model training iterations for the desk-scale learning criterion.
const DESK_ITERS: usize = 600;
const DESK_CONFIGS: [&str; 2] = ["S1-F3-NS", "S2-F2-NS"];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn wrapped_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let report = grad_check(ModelSpec::micro(), 0).expect("gradient check runs");
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        report.max_rel_err < 1e-5 && report.entries.len() >= 200 && secs < 60.0,
        format!(
            "{} parameters, max rel err {:.3e}, {:.1} s",
            report.entries.len(),
            report.max_rel_err,
            secs
        ),
    )
}

fn phase_std_endpoints() -> Outcome {
    let at_one = phase_std_from_coherence(1.0).unwrap();
    let at_zero = phase_std_from_coherence(0.0).unwrap();
    let li2 = dilogarithm(1.0).unwrap();
    let e0 = (at_zero - PI / 3f64.sqrt()).abs();
    let e1 = at_one.abs();
    let e2 = (li2 - PI * PI / 6.0).abs();
    Outcome::new(
        e0 <= 1e-9 && e1 <= 1e-9 && e2 <= 1e-10,
        format!("|std(1)| {e1:.1e}, |std(0) - pi/sqrt3| {e0:.1e}, |Li2(1) - pi^2/6| {e2:.1e}"),
    )
}

fn round_trips(dir: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 1_000_000;
    let phases: Vec<f32> = (0..n).map(|_| rng.random_range(-PI as f32..PI as f32)).collect();
    let raster = Raster::new(1000, 1000, 1, phases).unwrap();
    let (re, im) = phase_to_complex(&raster);
    let back = reconstruct_phase(&re, &im).unwrap();
    let worst = raster
        .data()
        .iter()
        .zip(back.data())
        .map(|(a, b)| wrapped_diff(f64::from(*a), f64::from(*b)))
        .fold(0.0, f64::max);

    let bits: Vec<f32> = (0..4096)
        .map(|i| match i % 5 {
            0 => f32::from_bits(rng.random()),
            1 => -0.0,
            2 => f32::NAN,
            3 => f32::from_bits(rng.random_range(1..0x0080_0000)),
            _ => rng.random_range(-1e6..1e6),
        })
        .collect();
    let r = Raster::new(64, 32, 2, bits).unwrap();
    let path = dir.join("roundtrip.rst");
    write_raster(&r, &path).unwrap();
    let r_back = read_raster(&path).unwrap();
    let raster_exact = r
        .data()
        .iter()
        .map(|v| v.to_bits())
        .eq(r_back.data().iter().map(|v| v.to_bits()));

    let params = ModelParams::<f32>::init(ModelSpec::lite(), 17);
    let ckpt = dir.join("roundtrip.ckpt");
    save_checkpoint(&params, &ckpt).unwrap();
    let loaded = load_checkpoint(&ckpt).unwrap();
    let first = std::fs::read(&ckpt).unwrap();
    let ckpt_exact =
        loaded == params && encode_checkpoint(&loaded) == first && decode_checkpoint(&first).unwrap() == params;

    Outcome::new(
        worst <= 1e-6 && raster_exact && ckpt_exact,
        format!("max phase error {worst:.2e} over {n} phases, rst bit-exact {raster_exact}, checkpoint bit-exact {ckpt_exact}"),
    )
}

fn estimator_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut coh_out = 0;
    let mut norm_out = 0;
    let mut norm_order = 0;
    for t in 0..1000 {
        let (w, h) = (rng.random_range(7..40), rng.random_range(7..40));
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f32> {
            (0..w * h)
                .map(|_| match t % 4 {
                    // Constant rasters exercise the zero-MAD fallback.
                    0 => scale as f32,
                    1 if rng.random_bool(0.05) => (scale * 1e4) as f32,
                    2 if rng.random_bool(0.1) => 0.0,
                    _ => {
                        let u: f64 = rng.random_range(1e-12..1.0);
                        (scale * (-2.0 * u.ln()).sqrt()) as f32
                    }
                })
                .collect()
        };
        let a1 = Raster::new(w, h, 1, draw(&mut rng)).unwrap();
        let a2 = Raster::new(w, h, 1, draw(&mut rng)).unwrap();
        let window = [1, 3, 5, 7][rng.random_range(0..4)];
        let coh = ml_coherence(&a1, &a2, window).unwrap();
        coh_out += coh.data().iter().filter(|c| !(**c >= 0.0 && **c <= 1.0)).count();
        let norm = normalize_amplitude(&a1).unwrap();
        norm_out += norm.data().iter().filter(|v| !(**v > 0.0 && **v < 1.0)).count();
        let mut pairs: Vec<(f32, f32)> = a1.data().iter().copied().zip(norm.data().iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        norm_order += pairs.windows(2).filter(|p| p[0].0 < p[1].0 && p[0].1 > p[1].1).count();
    }
    let sigmas: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();
    let mut coh_order = 0;
    for i in 0..=100 {
        for j in 0..=100 {
            let (a1, a2) = (i as f64 * 0.02, j as f64 * 0.02);
            let g: Vec<f64> = sigmas.iter().map(|s| coherence_from_amplitudes(a1, a2, *s)).collect();
            coh_order += g.windows(2).filter(|p| p[1] > p[0]).count();
        }
    }
    Outcome::new(
        coh_out + norm_out + norm_order + coh_order == 0,
        format!(
            "ml_coherence outside [0,1]: {coh_out}, normalized outside (0,1): {norm_out}, normalize order violations: {norm_order}, coherence-vs-sigma violations: {coh_order}"
        ),
    )
}

fn constant_pair(side: usize, amp: f32, rng: &mut ChaCha8Rng) -> (SlcImage, SlcImage) {
    let a = Raster::filled(side, side, 1, amp).unwrap();
    let p1 = Raster::filled(side, side, 1, 0.0f32).unwrap();
    let p2 = Raster::new(
        side,
        side,
        1,
        (0..side * side).map(|_| rng.random_range(-3.0f32..3.0)).collect(),
    )
    .unwrap();
    (SlcImage::new(a.clone(), p1).unwrap(), SlcImage::new(a, p2).unwrap())
}

fn simulator_statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let side = 320; // 102400 pixels per image
    let mut worst_var = 0.0f64;
    let mut worst_coh = 0.0f64;
    for sigma in [0.2, 0.5, 0.8] {
        let clean = constant_pair(side, 1.0, &mut rng);
        let noisy = add_speckle_noise(&clean, sigma, &mut rng);
        let (cr, ci) = clean.1.to_complex();
        let (nr, ni) = noisy.1.to_complex();
        let resid: Vec<f64> = cr
            .data()
            .iter()
            .zip(nr.data())
            .chain(ci.data().iter().zip(ni.data()))
            .map(|(c, n)| f64::from(*n) - f64::from(*c))
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64;
        worst_var = worst_var.max((var / (sigma * sigma) - 1.0).abs());

        // Sample coherence |<s1 s2*>| / sqrt(<|s1|^2><|s2|^2>) with the
        // deterministic phase removed.
        let (r1, i1) = noisy.0.to_complex();
        let (r2, i2) = noisy.1.to_complex();
        let (mut cre, mut cim, mut p1, mut p2) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..side * side {
            let (x1, y1) = (f64::from(r1.data()[k]), f64::from(i1.data()[k]));
            let (x2, y2) = (f64::from(r2.data()[k]), f64::from(i2.data()[k]));
            let ph = f64::from(clean.1.phase().data()[k]);
            // s2 * exp(-i ph), then s1 * conj(.)
            let (u, v) = (x2 * ph.cos() + y2 * ph.sin(), y2 * ph.cos() - x2 * ph.sin());
            cre += x1 * u + y1 * v;
            cim += y1 * u - x1 * v;
            p1 += x1 * x1 + y1 * y1;
            p2 += u * u + v * v;
        }
        let sample = cre.hypot(cim) / (p1 * p2).sqrt();
        worst_coh = worst_coh.max((sample - coherence_from_amplitudes(1.0, 1.0, sigma)).abs());
    }
    Outcome::new(
        worst_var <= 0.05 && worst_coh <= 0.02,
        format!("worst relative variance error {worst_var:.4}, worst coherence error {worst_coh:.4}"),
    )
}

fn mean_method(report: &Report, label: &str, name: &str) -> (f64, f64, f64) {
    let m = report.method(label, name).expect("method scored");
    (m.phase_rmse, m.ssim, m.coh_rmse)
}

fn desk_learning(dir: &Path) -> Outcome {
    let start = Instant::now();
    let labels: Vec<ConfigLabel> = DESK_CONFIGS.iter().map(|l| l.parse().unwrap()).collect();
    let cfgs = |seed| labels.iter().map(|l| l.config(256, seed).unwrap()).collect::<Vec<_>>();
    let train_dir = dir.join("desk-train");
    let test_dir = dir.join("desk-test");
    generate_dataset(&cfgs(101), 40, &train_dir).unwrap();
    generate_dataset(&cfgs(202), 10, &test_dir).unwrap();
    let train_manifest = Manifest::load(train_dir.join("manifest.json")).unwrap();
    let test_manifest = Manifest::load(test_dir.join("manifest.json")).unwrap();

    let set = load_training_set(&train_manifest).unwrap();
    let cfg = TrainConfig::lite(DESK_ITERS, 7);
    let mut last = None;
    let params = train(&set, &cfg, |log| last = Some(*log)).unwrap();

    let pred = dir.join("desk-pred");
    predict_model(&params, &test_manifest, &pred, "model").unwrap();
    predict_boxcar(&test_manifest, &pred, "boxcar5", 5).unwrap();
    let report = evaluate_dataset(&pred, &test_manifest).unwrap();

    let mut pass = true;
    let mut parts = Vec::new();
    for label in DESK_CONFIGS {
        let (mp, ms, mc) = mean_method(&report, label, "model");
        let (bp, bs, bc) = mean_method(&report, label, "boxcar5");
        let ok = mp <= 0.9 * bp && ms > bs && mc < bc;
        pass &= ok;
        parts.push(format!(
            "{label}: phase rmse {mp:.4} vs {bp:.4}, ssim {ms:.4} vs {bs:.4}, coh rmse {mc:.4} vs {bc:.4}"
        ));
    }
    let loss = last.map(|l| format!("{:.4}", l.total_loss)).unwrap_or_default();
    Outcome::new(
        pass,
        format!(
            "{DESK_ITERS} iters (final loss {loss}, {:.0} s); {}",
            start.elapsed().as_secs_f64(),
            parts.join("; ")
        ),
    )
}

fn zero_model_identity(dir: &Path) -> Outcome {
    let path = dir.join("zero.ckpt");
    save_checkpoint(&ModelParams::<f32>::zeros(ModelSpec::lite()), &path).unwrap();
    let params = load_checkpoint(&path).unwrap();
    let cfg = "S2-F3-S".parse::<ConfigLabel>().unwrap().config(200, 9).unwrap();
    let sample = insarlab::simulator::simulate_sample(&cfg, 0).unwrap();
    let pred = infer(&params, &sample.noisy_s1, &sample.noisy_s2).unwrap();
    let ifg = form_interferogram(&sample.noisy_s1, &sample.noisy_s2).unwrap();
    let phase_diff = pred
        .phase
        .data()
        .iter()
        .zip(ifg.phase().data())
        .filter(|(a, b)| a.to_bits() != b.to_bits())
        .count();
    let coh_diff = pred.coherence.data().iter().filter(|c| **c != 0.5).count();
    Outcome::new(
        phase_diff == 0 && coh_diff == 0,
        format!("phase pixels differing: {phase_diff}, coherence pixels != 0.5: {coh_diff}"),
    )
}

/// SSIM computed window by window from its definition.
fn reference_ssim(x: &[f64], y: &[f64], w: usize, h: usize) -> f64 {
    let n = 11usize;
    let half = 5isize;
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (di, dj) = (i as isize - half, j as isize - half);
            g[i * n + j] = (-((di * di + dj * dj) as f64) / (2.0 * 1.5 * 1.5)).exp();
        }
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    let c1 = (0.01 * 2.0 * PI).powi(2);
    let c2 = (0.03 * 2.0 * PI).powi(2);
    let mut total = 0.0;
    let mut count = 0;
    for r in 0..=h - n {
        for c in 0..=w - n {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let k = (r + i) * w + c + j;
                    mx += g[i * n + j] * x[k];
                    my += g[i * n + j] * y[k];
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let k = (r + i) * w + c + j;
                    vx += g[i * n + j] * (x[k] - mx).powi(2);
                    vy += g[i * n + j] * (y[k] - my).powi(2);
                    cov += g[i * n + j] * (x[k] - mx) * (y[k] - my);
                }
            }
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_ssim = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f32> = (0..256).map(|_| rng.random_range(-PI as f32..PI as f32)).collect();
        let y: Vec<f32> = x
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                insarlab::wrap_phase(v + (0.7 * z) as f32)
            })
            .collect();
        let (xr, yr) = (
            Raster::new(16, 16, 1, x.clone()).unwrap(),
            Raster::new(16, 16, 1, y.clone()).unwrap(),
        );
        let got = ssim_mean(&xr, &yr).unwrap();
        let xf: Vec<f64> = x.iter().map(|v| f64::from(*v)).collect();
        let yf: Vec<f64> = y.iter().map(|v| f64::from(*v)).collect();
        worst_ssim = worst_ssim.max((got - reference_ssim(&xf, &yf, 16, 16)).abs());
    }
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..64);
        let truth: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let pred: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let shifted: Vec<f64> = pred
            .iter()
            .map(|p| p + 2.0 * PI * f64::from(rng.random_range(-3i32..=3)))
            .collect();
        let t = Raster::new(n, 1, 1, truth).unwrap();
        let a = phase_rmse(&Raster::new(n, 1, 1, pred).unwrap(), &t).unwrap();
        let b = phase_rmse(&Raster::new(n, 1, 1, shifted).unwrap(), &t).unwrap();
        if (a - b).abs() > 1e-9 {
            violations += 1;
        }
    }
    Outcome::new(
        worst_ssim <= 1e-6 && violations == 0,
        format!("max |ssim - reference| {worst_ssim:.2e} over 20 pairs, wrap-invariance violations {violations}/1000"),
    )
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: [(&str, Box<dyn Fn() -> Outcome + '_>); 8] = [
        ("1 gradient correctness", Box::new(gradient_check)),
        ("2 phase-std and dilogarithm endpoints", Box::new(phase_std_endpoints)),
        ("3 round trips", Box::new(|| round_trips(dir.path()))),
        ("4 estimator bounds", Box::new(estimator_bounds)),
        ("5 simulator statistics", Box::new(simulator_statistics)),
        ("6 desk-scale learning", Box::new(|| desk_learning(dir.path()))),
        ("7 zero-model identity", Box::new(|| zero_model_identity(dir.path()))),
        ("8 metric oracles", Box::new(metric_oracles)),
    ];
    let mut failed = 0;
    for (name, check) in criteria.iter() {
        let outcome = check();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {name}: {}", outcome.detail);
        if !outcome.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} of 8 criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all 8 criteria passed");
}
