//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the report is printed even
//! when every criterion passes. Exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};
use softsplat::bench::{run_bench, BenchConfig, PROTOCOL_SIZE};
use softsplat::io::{decode_flo, decode_pfm, encode_flo, encode_pfm};
use softsplat::oracle::gradcheck::{
    check_random_instances, finite_difference_check, instance_rng, CheckedOp, GradCheckConfig,
    GradOp, InputKind, ProbeTensor,
};
use softsplat::pipeline::{sweep_times, Importance};
use softsplat::scene::{make_scene, SceneKind};
use softsplat::{
    backward_warp, gather_oracle, interpolate, splat, zbuffer_oracle, Exec, FlowField, ImageGrid,
    ImportanceMap, InterpolationRequest, MetricParams, SplatMode, WarpError,
};

const SEED: u64 = 20_200_312;

/// Outcome of one criterion: pass/fail plus a one-line measurement summary.
struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn random_grid(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> ImageGrid<f64> {
    let data = (0..h * w * c).map(|_| rng.random_range(0.0..1.0)).collect();
    ImageGrid::new(h, w, c, data).unwrap()
}

/// Mix of fractional, integer and half-integer displacements so that
/// collisions, exact hits and out-of-grid footprints all occur.
fn random_flow(rng: &mut ChaCha8Rng, h: usize, w: usize, sigma: f64) -> FlowField<f64> {
    let normal = Normal::new(0.0, sigma).unwrap();
    let data = (0..h * w * 2)
        .map(|_| {
            let v: f64 = normal.sample(rng);
            match rng.random_range(0..4) {
                0 => v.round(),
                1 => (2.0 * v).round() / 2.0,
                _ => v,
            }
        })
        .collect();
    FlowField::new(h, w, data).unwrap()
}

fn random_z(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> ImportanceMap<f64> {
    ImportanceMap::new(h, w, (0..h * w).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn importance_for(
    mode: SplatMode,
    rng: &mut ChaCha8Rng,
    h: usize,
    w: usize,
) -> Option<ImportanceMap<f64>> {
    match mode {
        SplatMode::Linear => Some(random_z(rng, h, w, 0.5, 2.0)),
        SplatMode::Softmax => Some(random_z(rng, h, w, -3.0, 3.0)),
        _ => None,
    }
}

fn criterion_1() -> Verdict {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let sizes = [(2, 2), (5, 7), (16, 16)];
    let mut worst = 0.0f64;
    let mut count = 0;
    for (mi, mode) in SplatMode::ALL.into_iter().enumerate() {
        for i in 0..200u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(SEED + ((mi as u64) << 32) + i);
            let (h, w) = sizes[i as usize % 3];
            let c = if i % 2 == 0 { 3 } else { 1 };
            let src = random_grid(&mut rng, h, w, c);
            let flow = random_flow(&mut rng, h, w, 2.0);
            let z = importance_for(mode, &mut rng, h, w);
            let fast = splat(&src, &flow, mode, z.as_ref()).unwrap();
            let slow = gather_oracle(&src, &flow, mode, z.as_ref()).unwrap();
            worst = worst
                .max(max_abs_diff(fast.warped.as_slice(), slow.warped.as_slice()))
                .max(max_abs_diff(fast.weight.as_slice(), slow.weight.as_slice()));
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst < TOL && secs < 60.0,
        format!("{count} instances, max |fast - oracle| = {worst:.3e} (< {TOL:e}), {secs:.1} s (< 60 s)"),
    )
}

/// Wraps an operation and negates one slice of one input's gradient.
struct Mutant {
    inner: Box<dyn GradOp>,
    input: usize,
    /// `Some((k, n))` negates every `n`-th entry starting at `k`.
    stride: Option<(usize, usize)>,
}

impl GradOp for Mutant {
    fn name(&self) -> String {
        format!("{}-mutant", self.inner.name())
    }
    fn forward(&self, inputs: &[ProbeTensor]) -> softsplat::Result<Vec<f64>> {
        self.inner.forward(inputs)
    }
    fn backward(
        &self,
        inputs: &[ProbeTensor],
        upstream: &[f64],
    ) -> softsplat::Result<Vec<Vec<f64>>> {
        let mut g = self.inner.backward(inputs, upstream)?;
        for (j, v) in g[self.input].iter_mut().enumerate() {
            if self.stride.is_none_or(|(k, n)| j % n == k) {
                *v = -*v;
            }
        }
        Ok(g)
    }
}

fn criterion_2() -> Verdict {
    const TOL: f64 = 1e-4;
    let start = Instant::now();
    let config = GradCheckConfig {
        step: 1e-6,
        tolerance: TOL,
        seed: SEED,
    };
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for op in CheckedOp::ALL {
        let report = check_random_instances(op, 100, 4, 4, &config).unwrap();
        summary.push(format!("{op} {:.1e}", report.max_rel_error));
        if !report.passed {
            failures.push(op.to_string());
        }
    }

    // Every mutation must be caught by at least one of a few instances.
    let mut mutants = 0;
    let mut survivors = Vec::new();
    for op in CheckedOp::ALL {
        let probe = op.random_inputs(&mut instance_rng(SEED, op, 0), 4, 4, 3);
        for (input, tensor) in probe.iter().enumerate() {
            let mut strides = vec![None];
            if tensor.kind == InputKind::Flow {
                strides.extend([Some((0, 2)), Some((1, 2))]);
            }
            for stride in strides {
                mutants += 1;
                let mutant = Mutant {
                    inner: op.op(),
                    input,
                    stride,
                };
                let caught = (0..5u64).any(|i| {
                    let mut rng = instance_rng(SEED ^ 0xbad, op, i);
                    let inputs = op.random_inputs(&mut rng, 4, 4, 3);
                    !finite_difference_check(&mutant, &inputs, &config)
                        .unwrap()
                        .passed
                });
                if !caught {
                    survivors.push(format!("{op}/{:?}/{stride:?}", tensor.kind));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        failures.is_empty() && survivors.is_empty() && secs < 300.0,
        format!(
            "100 instances per op, max rel error [{}] (< {TOL:e}); {}/{mutants} mutants caught{}; {secs:.1} s (< 300 s)",
            summary.join(", "),
            mutants - survivors.len(),
            if survivors.is_empty() { String::new() } else { format!(" (survived: {})", survivors.join(" ")) }
        ),
    )
}

fn criterion_3() -> Verdict {
    let betas = [-1000.0, -1.0, 0.1, 101.0];
    let mut equal = [0usize; 4];
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3000 + i);
        let (h, w, c) = (6, 7, 3);
        let src = random_grid(&mut rng, h, w, c);
        let flow = random_flow(&mut rng, h, w, 1.5);
        // Importance on a 2^-10 lattice, so integer translations are exact.
        let z = ImportanceMap::new(
            h,
            w,
            (0..h * w)
                .map(|_| rng.random_range(-2048..2048) as f64 / 1024.0)
                .collect(),
        )
        .unwrap();
        let base = splat(&src, &flow, SplatMode::Softmax, Some(&z)).unwrap();
        for (k, &beta) in betas.iter().enumerate() {
            let moved = splat(
                &src,
                &flow,
                SplatMode::Softmax,
                Some(&z.shifted(beta).unwrap()),
            )
            .unwrap();
            if bits_equal(base.warped.as_slice(), moved.warped.as_slice()) {
                equal[k] += 1;
            }
        }
    }

    // Counterexample for linear splatting: two sources meet at one pixel.
    let src = ImageGrid::new(1, 2, 1, vec![0.2, 0.8]).unwrap();
    let flow = FlowField::new(1, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let z = ImportanceMap::new(1, 2, vec![1.0, 2.0]).unwrap();
    let a = splat(&src, &flow, SplatMode::Linear, Some(&z))
        .unwrap()
        .warped
        .get(0, 1, 0);
    let b = splat(
        &src,
        &flow,
        SplatMode::Linear,
        Some(&z.shifted(1.0).unwrap()),
    )
    .unwrap()
    .warped
    .get(0, 1, 0);
    let linear_varies = a != b;

    let per_beta: Vec<String> = betas
        .iter()
        .zip(equal)
        .map(|(b, n)| format!("beta {b}: {n}/50 bitwise equal"))
        .collect();
    verdict(
        equal.iter().all(|&n| n == 50) && linear_varies,
        format!(
            "{}; linear counterexample {a:.6} vs {b:.6} (must differ: {linear_varies})",
            per_beta.join(", ")
        ),
    )
}

fn criterion_4() -> Verdict {
    let exec = Exec::default();
    // alpha = 0: softmax over alpha * metric must equal average bitwise.
    let mut zero_ok = 0;
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4000 + i);
        let (h, w) = (7, 6);
        let i0 = random_grid(&mut rng, h, w, 3);
        let i1 = random_grid(&mut rng, h, w, 3);
        let flow = random_flow(&mut rng, h, w, 2.0);
        let z = exec
            .brightness_constancy(&i0, &i1, &flow, MetricParams::new(0.0).unwrap())
            .unwrap();
        let soft = splat(&i0, &flow, SplatMode::Softmax, Some(&z)).unwrap();
        let avg = splat(&i0, &flow, SplatMode::Average, None).unwrap();
        if bits_equal(soft.warped.as_slice(), avg.warped.as_slice())
            && bits_equal(soft.weight.as_slice(), avg.weight.as_slice())
        {
            zero_ok += 1;
        }
    }

    // alpha = 50: crafted collisions with integer importance gaps.
    const TOL: f64 = 1e-10;
    let alpha = 50.0;
    let mut worst = 0.0f64;
    let mut crafted = 0;
    let mut collisions = 0;
    let mut seed = SEED + 4500;
    while crafted < 50 {
        seed += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (6, 6);
        let src = random_grid(&mut rng, h, w, 3);
        let flow = FlowField::new(
            h,
            w,
            (0..h * w * 2)
                .map(|_| rng.random_range(-4..=4) as f64 / 2.0)
                .collect(),
        )
        .unwrap();
        let z = ImportanceMap::new(
            h,
            w,
            (0..h * w)
                .map(|_| alpha * rng.random_range(0..=6) as f64)
                .collect(),
        )
        .unwrap();
        let hard = match zbuffer_oracle(&src, &flow, &z) {
            Ok(out) => out,
            // Tied front-most contributors: not a valid instance.
            Err(WarpError::AmbiguousInput(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        let soft = splat(&src, &flow, SplatMode::Softmax, Some(&z)).unwrap();
        let ones = ImageGrid::filled(h, w, 1, 1.0).unwrap();
        let coverage = splat(&ones, &flow, SplatMode::Summation, None)
            .unwrap()
            .warped;
        if !coverage.as_slice().iter().any(|&c| c > 1.0 + 1e-9) {
            continue;
        }
        collisions += coverage
            .as_slice()
            .iter()
            .filter(|&&c| c > 1.0 + 1e-9)
            .count();
        worst = worst.max(max_abs_diff(soft.warped.as_slice(), hard.warped.as_slice()));
        crafted += 1;
    }
    verdict(
        zero_ok == 50 && worst < TOL,
        format!(
            "alpha=0: {zero_ok}/50 bitwise equal to average; alpha=50: 50 instances, {collisions} collision pixels, \
             max |softmax - zbuffer| = {worst:.3e} (< {TOL:e})"
        ),
    )
}

fn criterion_5() -> Verdict {
    const MASS_TOL: f64 = 1e-10;
    const CONST_TOL: f64 = 1e-13;
    let mut worst_mass = 0.0f64;
    let mut identity = true;
    let mut worst_const = 0.0f64;
    for i in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5000 + i);
        let (h, w, c) = (9, 11, 3);
        let src = random_grid(&mut rng, h, w, c);

        // Targets stay at least one pixel inside, so every footprint is in-grid.
        let flow = FlowField::from_fn(h, w, |y, x| {
            let tx = rng.random_range(0.0..(w - 1) as f64);
            let ty = rng.random_range(0.0..(h - 1) as f64);
            (tx - x as f64, ty - y as f64)
        })
        .unwrap();
        let out = splat(&src, &flow, SplatMode::Summation, None).unwrap();
        let before: f64 = src.as_slice().iter().sum();
        let after: f64 = out.warped.as_slice().iter().sum();
        worst_mass = worst_mass.max((after - before).abs() / before.abs());

        let zero = FlowField::zeros(h, w).unwrap();
        for mode in SplatMode::ALL {
            let z = importance_for(mode, &mut rng, h, w);
            identity &= splat(&src, &zero, mode, z.as_ref()).unwrap().warped == src;
        }
        identity &= backward_warp(&src, &zero).unwrap() == src;

        let value = rng.random_range(0.0..1.0);
        let constant = ImageGrid::filled(h, w, c, value).unwrap();
        let flow = random_flow(&mut rng, h, w, 2.0);
        let z = random_z(&mut rng, h, w, -3.0, 3.0);
        for (mode, z) in [(SplatMode::Average, None), (SplatMode::Softmax, Some(&z))] {
            let out = splat(&constant, &flow, mode, z).unwrap();
            for y in 0..h {
                for x in 0..w {
                    if !out.is_hole(y, x) {
                        for &v in out.warped.pixel(y, x) {
                            worst_const = worst_const.max((v - value).abs() / value);
                        }
                    }
                }
            }
        }
    }
    verdict(
        worst_mass < MASS_TOL && identity && worst_const < CONST_TOL,
        format!(
            "mass rel error {worst_mass:.3e} (< {MASS_TOL:e}); zero-flow identities bit-exact: {identity}; \
             constant preservation rel error {worst_const:.3e} (< {CONST_TOL:e})"
        ),
    )
}

fn criterion_6() -> Verdict {
    const TOL: f64 = 1e-6;
    const BLEND: f64 = 0.05;
    let scene = make_scene(SceneKind::TwoLayer, 64, 8.0).unwrap();
    let times = scene.truth_times();
    let params = MetricParams::new(-10.0).unwrap();
    let request = |mode, offset| {
        let mut req = InterpolationRequest::new(
            scene.i0.clone(),
            scene.i1.clone(),
            scene.flow01.clone(),
            scene.flow10.clone(),
            times.clone(),
            mode,
            params,
        );
        req.importance = Importance::Metric { params, offset };
        req
    };
    let soft = interpolate(&request(SplatMode::Softmax, 0.0)).unwrap();
    let lin = interpolate(&request(SplatMode::Linear, 100.0)).unwrap();
    let mut worst = 0.0f64;
    let mut band = 0usize;
    let mut lin_err = 0.0;
    for ((s, l), &t) in soft.iter().zip(&lin).zip(&times) {
        let truth = scene.truth_at(t).unwrap();
        let mask = scene.collision_mask(t).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                if mask.get(y, x, 0) == 1.0 {
                    band += 1;
                    for ch in 0..3 {
                        worst = worst.max((s.frame.get(y, x, ch) - truth.get(y, x, ch)).abs());
                        lin_err += (l.frame.get(y, x, ch) - truth.get(y, x, ch)).abs();
                    }
                }
            }
        }
    }
    let lin_mae = lin_err / (3 * band) as f64;
    verdict(
        band > 0 && worst <= TOL && lin_mae > BLEND,
        format!(
            "{} times, {band} collision pixels; softmax max error {worst:.3e} (<= {TOL:e}); \
             linear +100 MAE {lin_mae:.4} (> {BLEND})",
            times.len()
        ),
    )
}

fn criterion_7() -> Verdict {
    const SPREAD: f64 = 3.0;
    const DROP: f64 = 1.0;
    let start = Instant::now();
    let scene = make_scene(SceneKind::RigidTranslate, 64, 32.0).unwrap();
    let times = sweep_times(32).unwrap();
    let reference: Vec<_> = times
        .iter()
        .map(|&t| scene.truth_at(t).unwrap().clone())
        .collect();
    let req = InterpolationRequest::new(
        scene.i0,
        scene.i1,
        scene.flow01,
        scene.flow10,
        times,
        SplatMode::Softmax,
        MetricParams::default(),
    );
    let records = softsplat::temporal_sweep(&req, Some(&reference)).unwrap();
    let curve: Vec<f64> = records.iter().map(|r| r.psnr.unwrap()).collect();
    let max = curve.iter().cloned().fold(f64::MIN, f64::max);
    let min = curve.iter().cloned().fold(f64::MAX, f64::min);
    let drop = curve.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        curve.len() == 31 && max - min < SPREAD && drop <= DROP && secs < 30.0,
        format!(
            "31 steps, PSNR {min:.2}..{max:.2} dB, spread {:.3} (< {SPREAD}), largest step drop {drop:.3} (<= {DROP}), \
             {secs:.2} s (< 30 s)",
            max - min
        ),
    )
}

fn digest(values: &[&[f64]]) -> String {
    let mut hasher = Sha256::new();
    for part in values {
        for v in *part {
            hasher.update(v.to_bits().to_le_bytes());
        }
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn criterion_8() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8000);
    let (h, w, c) = (150, 131, 3);
    let src = random_grid(&mut rng, h, w, c);
    let flow = random_flow(&mut rng, h, w, 10.0);
    let z_lin = random_z(&mut rng, h, w, 0.5, 2.0);
    let z_soft = random_z(&mut rng, h, w, -5.0, 5.0);
    let upstream = random_grid(&mut rng, h, w, c);
    let run = |workers: usize| {
        let exec = Exec::with_workers(workers).unwrap();
        let mut sums = Vec::new();
        for mode in SplatMode::ALL {
            let z = match mode {
                SplatMode::Linear => Some(&z_lin),
                SplatMode::Softmax => Some(&z_soft),
                _ => None,
            };
            let out = exec.splat(&src, &flow, mode, z).unwrap();
            let g = exec
                .splat_backward(&src, &flow, mode, z, &upstream)
                .unwrap();
            let dz = g.d_importance.as_ref().map_or(&[][..], |d| d.as_slice());
            sums.push(digest(&[out.warped.as_slice(), out.weight.as_slice()]));
            sums.push(digest(&[g.d_source.as_slice(), g.d_flow.as_slice(), dz]));
        }
        sums
    };
    let reference = run(1);
    let mut identical = true;
    for workers in [1, 2, 8] {
        for _ in 0..2 {
            identical &= run(workers) == reference;
        }
    }
    // The free functions use the global pool.
    let global = digest(&[splat(&src, &flow, SplatMode::Summation, None)
        .unwrap()
        .warped
        .as_slice()]);
    identical &= global
        == digest(&[Exec::with_workers(3)
            .unwrap()
            .splat(&src, &flow, SplatMode::Summation, None)
            .unwrap()
            .warped
            .as_slice()]);
    verdict(
        identical,
        format!(
            "{} forward/backward checksums identical across workers {{1, 2, 8}} x 2 runs: {identical}",
            reference.len()
        ),
    )
}

fn criterion_9() -> Verdict {
    let path = std::path::Path::new("memory");
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9000);
    let mut ok = true;
    for i in 0..20 {
        let (h, w) = (rng.random_range(1..40), rng.random_range(1..40));
        let mut data: Vec<f32> = (0..h * w * 2)
            .map(|_| rng.random_range(-50.0f32..50.0))
            .collect();
        if i == 0 {
            data[0] = f32::MIN_POSITIVE / 4.0;
            data[1] = -0.0;
        }
        let flow = FlowField::new(h, w, data).unwrap();
        let back = decode_flo(&encode_flo(&flow).unwrap(), path).unwrap();
        ok &= flow
            .as_slice()
            .iter()
            .zip(back.as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits());

        for c in [1, 3] {
            let grid = ImageGrid::new(
                h,
                w,
                c,
                (0..h * w * c)
                    .map(|_| rng.random_range(-1e6f32..1e6))
                    .collect(),
            )
            .unwrap();
            let back = decode_pfm(&encode_pfm(&grid).unwrap(), path).unwrap();
            ok &= grid
                .as_slice()
                .iter()
                .zip(back.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits())
                && back.shape() == grid.shape();
        }
    }
    let golden = encode_flo(&FlowField::new(1, 1, vec![1.5f32, -2.0]).unwrap()).unwrap();
    let mut expect = 202021.25f32.to_le_bytes().to_vec();
    expect.extend(1i32.to_le_bytes());
    expect.extend(1i32.to_le_bytes());
    expect.extend(1.5f32.to_le_bytes());
    expect.extend((-2.0f32).to_le_bytes());
    let golden_ok = golden == expect;
    verdict(
        ok && golden_ok,
        format!("20 flo + 40 pfm round trips bit-exact: {ok}; 1x1 .flo golden bytes: {golden_ok}"),
    )
}

fn criterion_10() -> Verdict {
    let start = Instant::now();
    let config = BenchConfig {
        sizes: vec![],
        ops: vec![],
        protocol: true,
        ..Default::default()
    };
    let mut lines = Vec::new();
    let records = run_bench(&config, |r| lines.push(r.to_json_line())).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut well_formed = records.len() == 2;
    for line in &lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        well_formed &= v["protocol"] == true
            && v["height"] == PROTOCOL_SIZE.0
            && v["width"] == PROTOCOL_SIZE.1
            && v["median_ms"].as_f64().is_some_and(|m| m > 0.0)
            && v["p95_ms"].as_f64() >= v["median_ms"].as_f64()
            && v["checksum"].as_str().is_some_and(|s| s.len() == 64)
            && v["reference_ms"].is_number()
            && v["hardware"]["logical_cpus"].is_number();
    }
    let timings: Vec<String> = records
        .iter()
        .map(|r| {
            format!(
                "{} median {:.1} ms (reference {} ms)",
                r.op,
                r.median_ms,
                r.reference_ms.unwrap_or(f64::NAN)
            )
        })
        .collect();
    verdict(
        well_formed && secs < 300.0,
        format!(
            "{}; records well-formed: {well_formed}; {secs:.1} s (< 300 s)",
            timings.join(", ")
        ),
    )
}

fn main() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 10] = [
        ("operator-oracle equivalence", criterion_1),
        ("gradient correctness", criterion_2),
        ("softmax translational invariance", criterion_3),
        ("alpha limits", criterion_4),
        ("conservation and identity", criterion_5),
        ("two-layer separation", criterion_6),
        ("temporal sweep smoothness", criterion_7),
        ("determinism", criterion_8),
        ("i/o fidelity", criterion_9),
        ("bench protocol", criterion_10),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = Vec::new();
    let total = Instant::now();
    for (n, (name, check)) in criteria.iter().enumerate() {
        let n = n + 1;
        if !filter.is_empty()
            && !filter
                .iter()
                .any(|f| *f == n.to_string() || name.contains(f.as_str()))
        {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check));
        let elapsed = Duration::as_secs_f64(&start.elapsed());
        let (passed, detail) = match result {
            Ok(v) => (v.passed, v.detail),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        println!(
            "criterion {n:>2} {} {name}: {detail} [{elapsed:.1}s]",
            if passed { "PASS" } else { "FAIL" }
        );
        if !passed {
            failed.push(n);
        }
    }
    println!(
        "acceptance: {} failed {:?} in {:.1}s",
        failed.len(),
        failed,
        total.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
