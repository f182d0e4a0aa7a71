//! Acceptance suite.
//!
//! Runs every headline criterion in sequence and prints one line per
//! criterion, `[PASS]` or `[FAIL]`, followed by the measured quantities.
//! Exits non-zero if any criterion fails. Built with `harness = false` so
//! the lines show up in plain `cargo test` output.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use augprobe::augment::{apply_op, augment_chain, augmix, AugOp, AugmixConfig, DepthRange, Image, MixMode};
use augprobe::csd::{decompose_weights, run_csd_probe, CsdProbeConfig, DEFAULT_TOL};
use augprobe::data::load_dump;
use augprobe::divergence::{markdown_table, run_divergence_probe, DivergenceProbeConfig};
use augprobe::evalgrid::{augmix_training, run_grid, train_small_model, EvalGridSpec, GridResult, SmallTrainConfig};
use augprobe::numerics::{frobenius_inner, sample_standard_normal, RealMatrix, SeededRng};
use augprobe::synth::{gen_planted_csd, gen_shape_dataset, gen_two_domain_gaussians, PlantedSpec};

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

/// Standard normal CDF by composite Simpson integration of the density from 0.
fn normal_cdf(x: f64) -> f64 {
    let n = 20_000;
    let h = x / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut acc = pdf(0.0) + pdf(x);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(i as f64 * h);
    }
    0.5 + acc * h / 3.0
}

// ---------------------------------------------------------------------------

fn divergence_null_extreme() -> Outcome {
    let start = Instant::now();
    let cfg = DivergenceProbeConfig {
        pool_size: 40_000,
        ..Default::default()
    };
    let per_domain = cfg.rows_needed_per_domain();

    let mut rng = SeededRng::new(101);
    let (c, a) = gen_two_domain_gaussians(0.0, 64, per_domain, &mut rng).map_err(|e| e.to_string())?;
    let null = run_divergence_probe(&c, &a, &cfg, &mut rng).map_err(|e| e.to_string())?;

    let (c, a) = gen_two_domain_gaussians(10.0, 64, per_domain, &mut rng).map_err(|e| e.to_string())?;
    let far = run_divergence_probe(&c, &a, &cfg, &mut rng).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();

    let detail = format!(
        "null acc {:.4} div {:.4}; sep-10 acc {:.4} div {:.4}; train pool {}; {:.1}s",
        null.test_accuracy,
        null.proxy_divergence,
        far.test_accuracy,
        far.proxy_divergence,
        null.train_pool.clean + null.train_pool.aug,
        elapsed.as_secs_f64()
    );
    check(
        (0.45..=0.55).contains(&null.test_accuracy),
        format!("null accuracy out of band: {detail}"),
    )?;
    check(
        null.proxy_divergence <= 0.2,
        format!("null divergence too high: {detail}"),
    )?;
    check(
        far.test_accuracy >= 0.99,
        format!("separated accuracy too low: {detail}"),
    )?;
    check(
        far.proxy_divergence >= 1.96,
        format!("separated divergence too low: {detail}"),
    )?;
    check(elapsed < Duration::from_secs(30), format!("too slow: {detail}"))?;
    Ok(detail)
}

fn divergence_bayes() -> Outcome {
    let bayes = normal_cdf(2.0);
    let cfg = DivergenceProbeConfig {
        pool_size: 40_000,
        ..Default::default()
    };
    let mut accs = Vec::new();
    for seed in 0..5 {
        let mut rng = SeededRng::new(200 + seed);
        let (c, a) =
            gen_two_domain_gaussians(4.0, 64, cfg.rows_needed_per_domain(), &mut rng).map_err(|e| e.to_string())?;
        let r = run_divergence_probe(&c, &a, &cfg, &mut rng).map_err(|e| e.to_string())?;
        accs.push(r.test_accuracy);
    }
    let detail = format!(
        "Φ(2) = {bayes:.5}; accuracies {}",
        accs.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>().join(", ")
    );
    check((bayes - 0.97725).abs() < 1e-5, format!("oracle mismatch: {detail}"))?;
    for a in &accs {
        check(
            (a - bayes).abs() <= 0.02,
            format!("accuracy off the Bayes rate: {detail}"),
        )?;
    }
    Ok(detail)
}

fn csd_exactness() -> Outcome {
    let mut rng = SeededRng::new(300);
    let shapes = [(2, 1), (2, 10), (64, 1), (64, 10), (512, 1), (512, 10)];
    let mut worst_recon = 0.0f64;
    let mut worst_orth = 0.0f64;
    let mut worst_wc = 0.0f64;
    let mut worst_inv = 0.0f64;
    for k in 0..1000 {
        let (d, c) = shapes[k % shapes.len()];
        // magnitudes spread over several decades
        let sa = 10f64.powf(4.0 * rng.next_f64() - 2.0);
        let sb = 10f64.powf(4.0 * rng.next_f64() - 2.0);
        let wa = RealMatrix::new(
            d,
            c,
            (0..d * c).map(|_| sa * sample_standard_normal(&mut rng)).collect(),
        )
        .unwrap();
        let wb = RealMatrix::new(
            d,
            c,
            (0..d * c).map(|_| sb * sample_standard_normal(&mut rng)).collect(),
        )
        .unwrap();
        let dec = decompose_weights(&wa, &wb, DEFAULT_TOL).map_err(|e| e.to_string())?;
        let scale = wa.frobenius_norm().max(wb.frobenius_norm());
        let recon_a = dec.reconstruct(dec.gamma_clean).sub(&wa).unwrap().frobenius_norm() / scale;
        let recon_b = dec.reconstruct(dec.gamma_aug).sub(&wb).unwrap().frobenius_norm() / scale;
        worst_recon = worst_recon.max(recon_a).max(recon_b);
        worst_orth = worst_orth.max(frobenius_inner(&dec.w_c, &dec.w_s_unit).unwrap().abs() / scale);
        let wc_aug = wb.add_scaled(-dec.gamma_aug, &dec.w_s_unit).unwrap();
        worst_wc = worst_wc.max(dec.w_c.max_abs_diff(&wc_aug).unwrap() / scale);
        check(dec.gamma_clean >= dec.gamma_aug, "sign convention violated")?;

        let r = dec.ratio.value();
        let factor = 10f64.powf(6.0 * rng.next_f64() - 3.0);
        let scaled = decompose_weights(&wa.scale(factor), &wb.scale(factor), DEFAULT_TOL)
            .unwrap()
            .ratio
            .value();
        let swapped = decompose_weights(&wb, &wa, DEFAULT_TOL).unwrap().ratio.value();
        worst_inv = worst_inv
            .max((scaled - r).abs() / r.max(1.0))
            .max((swapped - r).abs() / r.max(1.0));
    }
    let hand = decompose_weights(
        &RealMatrix::column(&[3.0, 1.0]).unwrap(),
        &RealMatrix::column(&[1.0, 1.0]).unwrap(),
        DEFAULT_TOL,
    )
    .unwrap()
    .ratio
    .value();
    let hand_err = (hand - 5f64.sqrt()).abs();
    let detail = format!(
        "recon {worst_recon:.1e}, orth {worst_orth:.1e}, w_c agreement {worst_wc:.1e}, scale/swap {worst_inv:.1e}, hand case err {hand_err:.1e}"
    );
    check(
        worst_recon <= 1e-10 && worst_orth <= 1e-10 && worst_wc <= 1e-10,
        format!("residuals: {detail}"),
    )?;
    check(worst_inv <= 1e-9, format!("invariance: {detail}"))?;
    check(hand_err <= 1e-12, format!("hand case: {detail}"))?;
    Ok(detail)
}

fn csd_recovery() -> Outcome {
    let start = Instant::now();
    let spec = PlantedSpec::default();
    let planted = gen_planted_csd(&spec, &mut SeededRng::new(400)).map_err(|e| e.to_string())?;
    let cfg = CsdProbeConfig {
        per_domain_pool: 20_000,
        ..Default::default()
    };
    let report =
        run_csd_probe(&planted.clean, &planted.aug, &cfg, &mut SeededRng::new(401)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let truth = 5f64.sqrt();
    let rel = report.ratio.value() / truth - 1.0;
    let detail = format!(
        "ratio {:.4} vs √5 = {truth:.4} ({:+.1}%), γ = ({:.3}, {:.3}), {:.1}s",
        report.ratio.value(),
        100.0 * rel,
        report.gamma_clean,
        report.gamma_aug,
        elapsed.as_secs_f64()
    );
    check(
        (planted.true_ratio - truth).abs() < 1e-12,
        format!("planted truth: {detail}"),
    )?;
    check(rel.abs() <= 0.15, format!("recovery: {detail}"))?;
    check(
        report.gamma_clean >= report.gamma_aug,
        format!("sign convention: {detail}"),
    )?;
    check(elapsed < Duration::from_secs(60), format!("too slow: {detail}"))?;
    Ok(detail)
}

fn augmix_conformance() -> Outcome {
    let mut rng = SeededRng::new(500);
    let random_image = |rng: &mut SeededRng| {
        let h = rng.range_inclusive(1, 12);
        let w = rng.range_inclusive(1, 12);
        let c = if rng.below(2) == 0 { 1 } else { 3 };
        let data = (0..h * w * c).map(|_| rng.next_f64()).collect();
        Image::new(h, w, c, data).unwrap()
    };

    // identities
    for seed in 0..200 {
        let img = random_image(&mut rng);
        for mode in [MixMode::Mix, MixMode::WoMix] {
            let out = augmix(&img, &AugmixConfig::with_severity(0.0, mode), &mut SeededRng::new(seed)).unwrap();
            check(
                out == img,
                format!("severity 0 changed the image (seed {seed}, {mode})"),
            )?;
        }
        let cfg = AugmixConfig {
            severity: 10.0 * rng.next_f64(),
            fixed_m: Some(1.0),
            ..Default::default()
        };
        let out = augmix(&img, &cfg, &mut SeededRng::new(seed)).unwrap();
        check(out == img, format!("fixed_m = 1 changed the image (seed {seed})"))?;
    }

    // range safety and determinism
    let mut draws = 0;
    for seed in 0..10_000u64 {
        let img = random_image(&mut rng);
        let cfg = AugmixConfig {
            severity: 10.0 * rng.next_f64(),
            chain_count: rng.range_inclusive(1, 4),
            chain_depth: DepthRange {
                min: 1,
                max: rng.range_inclusive(1, 4),
            },
            mix_mode: if rng.below(2) == 0 {
                MixMode::Mix
            } else {
                MixMode::WoMix
            },
            ..Default::default()
        };
        let a = augmix(&img, &cfg, &mut SeededRng::new(seed)).unwrap();
        check(
            a.pixels().iter().all(|v| (0.0..=1.0).contains(v)),
            format!("pixel outside [0, 1] (seed {seed})"),
        )?;
        if seed % 10 == 0 {
            let b = augmix(&img, &cfg, &mut SeededRng::new(seed)).unwrap();
            check(
                a.pixels()
                    .iter()
                    .zip(b.pixels())
                    .all(|(x, y)| x.to_bits() == y.to_bits()),
                "same seed, different output",
            )?;
        }
        draws += 1;
    }

    // goldens
    let dir = fixtures();
    let load = |name: &str| load_dump(&dir.join(name), None).map_err(|e| e.to_string());
    let input = Image::from_matrix(&load("input_pattern.npy")?, 3).map_err(|e| e.to_string())?;
    let mut goldens = 0;
    for op in AugOp::ALL {
        for s in [3u32, 5, 10] {
            let want = load(&format!("op_{}_s{s}.npy", op.name()))?;
            let got = op
                .apply_signed(&input, s as f64, 1.0)
                .map_err(|e| e.to_string())?
                .to_matrix();
            let exact = got.shape() == want.shape()
                && got
                    .as_slice()
                    .iter()
                    .zip(want.as_slice())
                    .all(|(a, b)| a.to_bits() == b.to_bits());
            check(exact, format!("golden mismatch for {op} at severity {s}"))?;
            goldens += 1;
        }
    }
    let ramp = Image::from_matrix(&load("input_ramp.npy")?, 1).map_err(|e| e.to_string())?;
    let chain = augment_chain(&ramp, 3, 6.0, &mut SeededRng::new(2024)).map_err(|e| e.to_string())?;
    let want = load("chain_depth3_s6_seed2024.npy")?;
    check(chain.to_matrix().as_slice() == want.as_slice(), "chain golden mismatch")?;
    goldens += 1;

    // apply_op consumes its sign draw even at severity 0
    let mut r1 = SeededRng::new(9);
    apply_op(&input, AugOp::Rotate, 0.0, &mut r1).unwrap();
    let mut r2 = SeededRng::new(9);
    r2.next_u64();
    check(r1 == r2, "severity-0 op changed the stream layout")?;

    Ok(format!(
        "400 identity checks, {draws} range draws, {goldens} goldens bit-exact"
    ))
}

struct Table3 {
    grid: GridResult,
    elapsed: Duration,
}

fn table3_run() -> Result<Table3, String> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    pool.install(|| {
        let train = gen_shape_dataset(150, 16, 0.15, &mut SeededRng::new(600)).map_err(|e| e.to_string())?;
        let test = gen_shape_dataset(100, 16, 0.15, &mut SeededRng::new(601)).map_err(|e| e.to_string())?;
        let model = train_small_model(&train, &SmallTrainConfig::default(), &augmix_training(3.0), 602)
            .map_err(|e| e.to_string())?;
        let grid = run_grid(&model, &test, &EvalGridSpec::default()).map_err(|e| e.to_string())?;
        Ok(Table3 {
            grid,
            elapsed: start.elapsed(),
        })
    })
}

fn table3_analogue(run: &Table3) -> Outcome {
    let g = &run.grid;
    let clean = g.clean.as_ref().ok_or("missing clean row")?.mean;
    let cell = |s: f64, m: MixMode| {
        g.cell(s, m)
            .map(|c| c.stats.clone())
            .ok_or(format!("missing cell {s} {m}"))
    };
    let pooled = |a: f64, b: f64| ((a * a + b * b) / 2.0).sqrt();
    let detail = format!(
        "clean {:.1}; {}; {:.1}s",
        100.0 * clean,
        g.cells
            .iter()
            .map(|c| format!("s{} {} {}", c.severity, c.mix_mode, c.stats.cell()))
            .collect::<Vec<_>>()
            .join(", "),
        run.elapsed.as_secs_f64()
    );
    for c in &g.cells {
        check(clean >= c.stats.mean, format!("clean below a cell: {detail}"))?;
    }
    for s in [3.0, 5.0] {
        let (mix, wo) = (cell(s, MixMode::Mix)?, cell(s, MixMode::WoMix)?);
        check(
            mix.mean >= wo.mean - pooled(mix.std, wo.std),
            format!("Mix below WoMix at s={s}: {detail}"),
        )?;
    }
    let (w3, w5) = (cell(3.0, MixMode::WoMix)?, cell(5.0, MixMode::WoMix)?);
    check(
        w3.mean >= w5.mean - pooled(w3.std, w5.std),
        format!("WoMix not degrading with severity: {detail}"),
    )?;
    check(run.elapsed < Duration::from_secs(300), format!("too slow: {detail}"))?;
    Ok(detail)
}

fn report_formats(run: &Table3) -> Outcome {
    // divergence table, twice from the same seeds
    let render = || -> Result<(String, String), String> {
        let mut rng = SeededRng::new(700);
        let (c, a) = gen_two_domain_gaussians(3.0, 8, 2_000, &mut rng).map_err(|e| e.to_string())?;
        let cfg = DivergenceProbeConfig {
            pool_size: 2_000,
            ..Default::default()
        };
        let r = run_divergence_probe(&c, &a, &cfg, &mut rng).map_err(|e| e.to_string())?;
        Ok((
            markdown_table(std::slice::from_ref(&r)),
            serde_json::to_string_pretty(&r).unwrap(),
        ))
    };
    let (md1, json1) = render()?;
    let (md2, json2) = render()?;
    check(md1 == md2 && json1 == json2, "divergence report not byte-stable")?;
    let row = md1.lines().nth(2).ok_or("missing table row")?;
    let cell = row.split('|').nth(2).ok_or("missing cell")?.trim();
    check(
        is_paren_cell(cell),
        format!("divergence cell {cell:?} is not `test (train)`"),
    )?;

    // grid CSV
    let csv = run.grid.to_csv();
    let again = table3_run()?.grid.to_csv();
    check(csv == again, "grid CSV not byte-stable")?;
    for line in csv.lines().skip(1) {
        for cell in line.split(',').skip(1).filter(|c| !c.is_empty()) {
            check(is_paren_cell(cell), format!("grid cell {cell:?} is not `mean (std)`"))?;
        }
    }
    Ok(format!(
        "divergence cell {cell:?}; grid row {:?}",
        csv.lines().nth(2).unwrap_or("")
    ))
}

/// `12.3 (4.5)`: one decimal on both numbers.
fn is_paren_cell(cell: &str) -> bool {
    let one_decimal = |s: &str| {
        let Some((int, frac)) = s.split_once('.') else {
            return false;
        };
        !int.is_empty()
            && int.chars().all(|c| c.is_ascii_digit())
            && frac.len() == 1
            && frac.chars().all(|c| c.is_ascii_digit())
    };
    match cell.strip_suffix(')').and_then(|c| c.split_once(" (")) {
        Some((a, b)) => one_decimal(a) && one_decimal(b),
        None => false,
    }
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |name: &str, outcome: Outcome| match outcome {
        Ok(detail) => println!("[PASS] {name}: {detail}"),
        Err(why) => {
            failures += 1;
            println!("[FAIL] {name}: {why}");
        }
    };
    report("divergence null/extreme calibration", divergence_null_extreme());
    report("divergence Bayes check", divergence_bayes());
    report("CSD exactness", csd_exactness());
    report("CSD recovery", csd_recovery());
    report("AugMix engine conformance", augmix_conformance());
    match table3_run() {
        Ok(run) => {
            report("severity/mixing grid ordering", table3_analogue(&run));
            report("report formats", report_formats(&run));
        }
        Err(e) => {
            report("severity/mixing grid ordering", Err(e.clone()));
            report("report formats", Err(e));
        }
    }
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
