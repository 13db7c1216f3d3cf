//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mdcpe::cnn::{conv3d_forward, maxpool3d, CnnConfig, CnnModel, Conv3dLayer, Volume};
use mdcpe::cotrain::{codecide, cotrain_loop, histogram_std, CoTrainConfig, CoTrainMode, ViewLearner};
use mdcpe::io::ExperimentConfig;
use mdcpe::metrics::{aa, kappa, oa, ConfusionMatrix};
use mdcpe::numerics::{argmax, cross_entropy, gradient_check, softmax, SeededRng};
use mdcpe::preprocess::{pca_fit, ComponentSelection, HyperCube, Labeled, Pixel};
use mdcpe::rnn::{gru_step, GruLayer, RnnConfig, RnnModel};
use mdcpe::training::Network;
use mdcpe::Result;

type Outcome = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

// ---------------------------------------------------------------- 1

fn rnn_gradient_error(hidden: usize, steps: usize, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let config = RnnConfig { bands: steps * 2, group: 2, hidden, fc1: 3, classes: 3 };
    let mut model = RnnModel::new(config, &mut rng).unwrap();
    for p in model.params_mut().iter_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v *= 2.0);
    }
    let x: Vec<f64> = (0..config.bands).map(|_| rng.uniform(-1.0, 1.0)).collect();
    model.params_mut().zero_grad();
    model.accumulate_gradient(&x, 1, &mut rng).unwrap();
    let probe = model.clone();
    let mut params = model.params().clone();
    gradient_check(&mut params, 1e-5, |p| {
        let mut m = probe.clone();
        *m.params_mut() = p.clone();
        cross_entropy(&m.predict(&x).unwrap(), 1).unwrap().0
    })
}

fn cnn_gradient_error(maps: usize, seed: u64) -> f64 {
    let config = CnnConfig {
        patch: 6,
        channels: 6,
        c1_maps: maps,
        c2_maps: maps,
        c1_kernel: [3, 3, 3],
        c2_kernel: [2, 2, 2],
        fc1: 5,
        classes: 3,
        dropout: 0.0,
    };
    let mut rng = SeededRng::new(seed);
    let mut model = CnnModel::new(config, &mut rng).unwrap();
    for p in model.params_mut().iter_mut() {
        p.value.data_mut().iter_mut().for_each(|v| *v *= 3.0);
    }
    let x: Vec<f64> = (0..216).map(|_| rng.uniform(-1.0, 1.0)).collect();
    model.params_mut().zero_grad();
    model.accumulate_gradient(&x, 2, &mut rng).unwrap();
    let probe = model.clone();
    let mut params = model.params().clone();
    gradient_check(&mut params, 1e-5, |p| {
        let mut m = probe.clone();
        *m.params_mut() = p.clone();
        cross_entropy(&m.predict(&x).unwrap(), 2).unwrap().0
    })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for hidden in [2, 4] {
        for steps in [1, 3, 8] {
            let e = rnn_gradient_error(hidden, steps, 1000 + 10 * hidden as u64 + steps as u64);
            ensure(e < 1e-4, format!("BPTT hidden {hidden} steps {steps}: rel err {e:e}"))?;
            worst = worst.max(e);
        }
    }
    for maps in [1, 2] {
        let e = cnn_gradient_error(maps, 2000 + maps as u64);
        ensure(e < 1e-4, format!("CNN maps {maps}: rel err {e:e}"))?;
        worst = worst.max(e);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("max rel err {worst:.2e}, {secs:.2}s"))
}

// ---------------------------------------------------------------- 2

fn conv_oracle(input: &Volume, out_maps: usize, kernel: [usize; 3], w: &[f64], b: &[f64]) -> Vec<f64> {
    let [dx, dy, dz] = input.dims;
    let [kx, ky, kz] = kernel;
    let (ox, oy, oz) = (dx - kx + 1, dy - ky + 1, dz - kz + 1);
    let mut out = Vec::new();
    for o in 0..out_maps {
        for x in 0..ox {
            for y in 0..oy {
                for z in 0..oz {
                    let mut s = b[o];
                    for m in 0..input.maps {
                        for i in 0..kx {
                            for j in 0..ky {
                                for l in 0..kz {
                                    let wi = (((o * input.maps + m) * kx + i) * ky + j) * kz + l;
                                    let xi = ((m * dx + x + i) * dy + y + j) * dz + z + l;
                                    s += w[wi] * input.data[xi];
                                }
                            }
                        }
                    }
                    out.push(sig(s));
                }
            }
        }
    }
    out
}

fn pool_oracle(input: &Volume) -> Vec<f64> {
    let [dx, dy, dz] = input.dims;
    let half = |n: usize| (n + 1) / 2;
    let mut out = Vec::new();
    for m in 0..input.maps {
        for x in 0..half(dx) {
            for y in 0..half(dy) {
                for z in 0..half(dz) {
                    let mut window = Vec::new();
                    for i in 2 * x..(2 * x + 2).min(dx) {
                        for j in 2 * y..(2 * y + 2).min(dy) {
                            for l in 2 * z..(2 * z + 2).min(dz) {
                                window.push(input.data[((m * dx + i) * dy + j) * dz + l]);
                            }
                        }
                    }
                    out.push(window.into_iter().fold(f64::NEG_INFINITY, f64::max));
                }
            }
        }
    }
    out
}

fn criterion_2() -> Outcome {
    let mut rng = SeededRng::new(2);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let in_maps = 1 + rng.below(3);
        let out_maps = 1 + rng.below(3);
        let kernel = [1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(3)];
        let dims = [kernel[0] + rng.below(4), kernel[1] + rng.below(4), kernel[2] + rng.below(4)];
        let n = in_maps * dims.iter().product::<usize>();
        let input = Volume::new(in_maps, dims, (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
        let w: Vec<f64> = (0..out_maps * in_maps * kernel.iter().product::<usize>())
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect();
        let b: Vec<f64> = (0..out_maps).map(|_| rng.uniform(-0.5, 0.5)).collect();
        let layer = Conv3dLayer { out_maps, in_maps, kernel, kernels: &w, bias: &b };
        let got = conv3d_forward(&input, &layer).map_err(|e| e.to_string())?;
        let want = conv_oracle(&input, out_maps, kernel, &w, &b);
        ensure(got.data.len() == want.len(), format!("case {case}: length mismatch"))?;
        for (g, w) in got.data.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
        ensure(worst <= 1e-12, format!("case {case}: conv error {worst:e}"))?;
        let (pooled, _) = maxpool3d(&got);
        ensure(pooled.data == pool_oracle(&got), format!("case {case}: pool mismatch"))?;
    }
    Ok(format!("50 configs, max conv error {worst:.1e}, pooling exact"))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    // scalar evaluation with every weight 0.1, x = 1, h = (0.5, -0.5)
    let (x, h1, h2) = (1.0f64, 0.5f64, -0.5f64);
    let pre = 0.1 * x + 0.1 * h1 + 0.1 * h2;
    let z = sig(pre);
    let r = sig(pre);
    let uh = 0.1 * h1 + 0.1 * h2;
    let cand = (0.1 * x + r * uh).tanh();
    let want = [z * h1 + (1.0 - z) * cand, z * h2 + (1.0 - z) * cand];

    let v = vec![0.1; 4];
    let layer = GruLayer { hidden: 2, input: 1, w_z: &v[..2], u_z: &v, w_r: &v[..2], u_r: &v, w: &v[..2], u: &v };
    let got = gru_step(&[x], &[h1, h2], &layer).map_err(|e| e.to_string())?;
    let err = got.h.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(err <= 1e-12, format!("hand case error {err:e}"))?;

    let mut rng = SeededRng::new(3);
    let mut peak: f64 = 0.0;
    for draw in 0..10_000 {
        let (hidden, input) = (1 + rng.below(4), 1 + rng.below(3));
        let scale = rng.uniform(0.1, 5.0);
        let mut m = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.uniform(-scale, scale)).collect() };
        let (wz, uz, wr, ur, w, u) = (
            m(hidden * input),
            m(hidden * hidden),
            m(hidden * input),
            m(hidden * hidden),
            m(hidden * input),
            m(hidden * hidden),
        );
        let layer = GruLayer { hidden, input, w_z: &wz, u_z: &uz, w_r: &wr, u_r: &ur, w: &w, u: &u };
        let mut h = vec![0.0; hidden];
        for _ in 0..6 {
            let xs: Vec<f64> = (0..input).map(|_| rng.uniform(-10.0, 10.0)).collect();
            h = gru_step(&xs, &h, &layer).map_err(|e| e.to_string())?.h;
            let top = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            ensure(top <= 1.0, format!("draw {draw}: |h| = {top}"))?;
            peak = peak.max(top);
        }
    }
    Ok(format!("hand case error {err:.1e}; 10^4 draws, max |h| {peak:.6}"))
}

// ---------------------------------------------------------------- 4

fn random_probs(rng: &mut SeededRng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.uniform(0.01, 1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

fn criterion_4() -> Outcome {
    let mut rng = SeededRng::new(4);
    for pair in 0..1000 {
        let k = 2 + rng.below(8);
        let p1 = random_probs(&mut rng, k);
        let p2 = random_probs(&mut rng, k);
        let (label, combined) = codecide(&p1, &p2).map_err(|e| e.to_string())?;
        let brute: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a * b).collect();
        ensure(combined == brute, format!("pair {pair}: product differs"))?;
        let (a, b) = (rng.uniform(1e-3, 1e3), rng.uniform(1e-3, 1e3));
        let s1: Vec<f64> = p1.iter().map(|v| v * a).collect();
        let s2: Vec<f64> = p2.iter().map(|v| v * b).collect();
        ensure(codecide(&s1, &p2).unwrap().0 == label, format!("pair {pair}: P1 rescale changed label"))?;
        ensure(codecide(&p1, &s2).unwrap().0 == label, format!("pair {pair}: P2 rescale changed label"))?;
        ensure(codecide(&s1, &s2).unwrap().0 == label, format!("pair {pair}: joint rescale changed label"))?;
        let uniform = vec![1.0 / k as f64; k];
        ensure(codecide(&p1, &uniform).unwrap().0 == argmax(&p1), format!("pair {pair}: uniform factor"))?;
    }
    Ok("1000 pairs invariant under positive rescaling; uniform factor neutral".into())
}

// ---------------------------------------------------------------- 5, 6

/// Confident stand-in learner: fixed per-pixel features that cluster by a
/// hidden class, softmax probabilities. Training is a no-op.
#[derive(Clone)]
struct FixedView {
    k: usize,
    features: Vec<Vec<f64>>,
    width: usize,
}

impl ViewLearner for FixedView {
    fn num_classes(&self) -> usize {
        self.k
    }

    fn fit(&mut self, _samples: &[Labeled], _rng: &mut SeededRng) -> Result<()> {
        Ok(())
    }

    fn infer(&self, p: Pixel) -> Result<(Vec<f64>, Vec<f64>)> {
        let f = self.features[p.row * self.width + p.col].clone();
        Ok((softmax(&f), f))
    }
}

struct Pool {
    view1: FixedView,
    view2: FixedView,
    labeled: Vec<Labeled>,
    unlabeled: Vec<Pixel>,
    validation: Vec<Labeled>,
}

/// One row of `width` pixels; the first `majority` are class 0, the rest
/// class 1.
fn imbalanced_pool(majority: usize, minority: usize, seed: u64) -> Pool {
    let width = majority + minority;
    let class = |c: usize| usize::from(c >= majority);
    let mut rng = SeededRng::new(seed);
    let view = |rng: &mut SeededRng| FixedView {
        k: 2,
        width,
        features: (0..width)
            .map(|c| {
                let mut f = vec![0.0; 2];
                f[class(c)] = 4.0 + rng.uniform(0.0, 2.0);
                f[1 - class(c)] = rng.uniform(-1.0, 1.0);
                f
            })
            .collect(),
    };
    let view1 = view(&mut rng);
    let view2 = view(&mut rng);
    let labeled = vec![
        Labeled { pixel: Pixel::new(0, 0), class: 0 },
        Labeled { pixel: Pixel::new(0, 1), class: 0 },
        Labeled { pixel: Pixel::new(0, majority), class: 1 },
    ];
    let unlabeled = (0..width)
        .filter(|&c| c > 1 && c != majority)
        .map(|c| Pixel::new(0, c))
        .collect();
    let validation = vec![
        Labeled { pixel: Pixel::new(0, 5), class: 0 },
        Labeled { pixel: Pixel::new(0, majority + 3), class: 1 },
    ];
    Pool { view1, view2, labeled, unlabeled, validation }
}

fn criterion_5() -> Outcome {
    let pool = imbalanced_pool(1000, 100, 5);
    let n_update = 5;
    let mut config = CoTrainConfig { n_update, max_iterations: 3, mode: CoTrainMode::Mdcpe, ..Default::default() };
    let rng = SeededRng::new(55);
    let out = cotrain_loop(
        pool.view1.clone(),
        pool.view2.clone(),
        &pool.labeled,
        &pool.unlabeled,
        &pool.validation,
        &config,
        &rng,
    )
    .map_err(|e| e.to_string())?;
    ensure(out.state.records.len() == 4, "expected 3 co-training iterations")?;
    for r in &out.state.records[1..] {
        for added in [&r.added1, &r.added2] {
            ensure(
                added.iter().all(|&n| n == n_update) && histogram_std(added) == 0.0,
                format!("iteration {}: per-class counts {added:?}", r.iteration),
            )?;
        }
    }

    config.mode = CoTrainMode::Dcpe;
    let dcpe = cotrain_loop(pool.view1, pool.view2, &pool.labeled, &pool.unlabeled, &pool.validation, &config, &rng)
        .map_err(|e| e.to_string())?;
    let hist: Vec<String> = dcpe.state.records[1..]
        .iter()
        .map(|r| format!("{:?} std {:.2}", r.added1, histogram_std(&r.added1)))
        .collect();
    Ok(format!(
        "MDCPE adds [{n_update}, {n_update}] per learner for 3 iterations (std 0); DCPE baseline histograms: {}",
        hist.join("; ")
    ))
}

fn criterion_6() -> Outcome {
    let mut lines = Vec::new();
    for mode in [CoTrainMode::Mdcpe, CoTrainMode::Dcpe] {
        let pool = imbalanced_pool(300, 60, 6);
        let config = CoTrainConfig { n_update: 4, max_iterations: 40, mode, dcpe_pool: 50, ..Default::default() };
        // the loop checks exclusion and strict shrinkage after every update
        // and fails with an internal error otherwise
        let out = cotrain_loop(
            pool.view1,
            pool.view2,
            &pool.labeled,
            &pool.unlabeled,
            &pool.validation,
            &config,
            &SeededRng::new(66),
        )
        .map_err(|e| format!("{mode}: {e}"))?;
        let s = &out.state;
        ensure(s.is_disjoint(), format!("{mode}: training sets overlap the pool"))?;
        for w in s.records.windows(2) {
            ensure(w[1].du < w[0].du, format!("{mode}: pool did not shrink at iteration {}", w[1].iteration))?;
        }
        lines.push(format!("{mode}: {} iterations, pool {} -> {}", s.records.len() - 1, s.records[0].du, s.du.len()));
    }
    Ok(lines.join("; "))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut rng = SeededRng::new(7);
    let mut done = 0;
    while done < 200 {
        let k = 2 + rng.below(6);
        let counts: Vec<u64> = (0..k * k).map(|_| rng.below(40) as u64).collect();
        if counts.iter().sum::<u64>() == 0 {
            continue;
        }
        let cm = ConfusionMatrix::from_counts(k, counts.clone()).unwrap();
        // expand into (truth, predicted) pairs and score from definitions
        let mut pairs = Vec::new();
        for t in 0..k {
            for p in 0..k {
                for _ in 0..counts[t * k + p] {
                    pairs.push((t, p));
                }
            }
        }
        let n = pairs.len() as f64;
        let want_oa = pairs.iter().filter(|(t, p)| t == p).count() as f64 / n;
        let mut recalls = Vec::new();
        for c in 0..k {
            let of_c: Vec<_> = pairs.iter().filter(|(t, _)| *t == c).collect();
            if !of_c.is_empty() {
                recalls.push(of_c.iter().filter(|(_, p)| *p == c).count() as f64 / of_c.len() as f64);
            }
        }
        let want_aa = recalls.iter().sum::<f64>() / recalls.len() as f64;
        let chance: f64 = (0..k)
            .map(|c| {
                let pt = pairs.iter().filter(|(t, _)| *t == c).count() as f64 / n;
                let pp = pairs.iter().filter(|(_, p)| *p == c).count() as f64 / n;
                pt * pp
            })
            .sum();
        let want_kappa = if chance == 1.0 {
            if want_oa == 1.0 { 1.0 } else { 0.0 }
        } else {
            (want_oa - chance) / (1.0 - chance)
        };
        let (o, a, kp) = (oa(&cm).unwrap(), aa(&cm).unwrap(), kappa(&cm).unwrap());
        ensure((o - want_oa).abs() <= 1e-12, format!("OA {o} vs {want_oa}"))?;
        ensure((a - want_aa).abs() <= 1e-12, format!("AA {a} vs {want_aa}"))?;
        ensure((kp - want_kappa).abs() <= 1e-12, format!("Kappa {kp} vs {want_kappa}"))?;
        ensure(kp <= o, format!("Kappa {kp} > OA {o}"))?;
        done += 1;
    }
    Ok("200 random matrices match within 1e-12; Kappa <= OA throughout".into())
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let (h, w, bands) = (20, 20, 12);
    let mut rng = SeededRng::new(8);
    let loadings: Vec<Vec<f64>> = (0..3).map(|_| (0..bands).map(|_| rng.normal(0.0, 1.0)).collect()).collect();
    let mut values = Vec::with_capacity(h * w * bands);
    for _ in 0..h * w {
        let scores: Vec<f64> = (0..3).map(|i| rng.normal(0.0, 3.0 - i as f64)).collect();
        for b in 0..bands {
            let clean: f64 = (0..3).map(|i| scores[i] * loadings[i][b]).sum();
            values.push(clean + rng.normal(0.0, 0.01));
        }
    }
    let cube = HyperCube::new(h, w, bands, values).unwrap();
    let model = pca_fit(&cube, ComponentSelection::VarianceTarget(0.99)).map_err(|e| e.to_string())?;
    ensure(model.num_components() == 3, format!("selected {} components", model.num_components()))?;

    let full = pca_fit(&cube, ComponentSelection::Count(bands)).map_err(|e| e.to_string())?;
    let mut ortho: f64 = 0.0;
    for i in 0..bands {
        for j in 0..bands {
            let dot: f64 = full.component(i).iter().zip(full.component(j)).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((dot - want).abs());
        }
    }
    ensure(ortho <= 1e-8, format!("orthonormality error {ortho:e}"))?;
    let mut recon: f64 = 0.0;
    for s in cube.spectra() {
        let back = full.reconstruct(&full.project(s));
        for (a, b) in back.iter().zip(s) {
            recon = recon.max((a - b).abs());
        }
    }
    ensure(recon <= 1e-8, format!("reconstruction error {recon:e}"))?;
    Ok(format!("3 components at 0.99; orthonormality {ortho:.1e}; reconstruction {recon:.1e}"))
}

// ---------------------------------------------------------------- 9, 10

const RUN_CONFIG: &str = "\
seed = 7
labeled_fraction = 0.02
validation_fraction = 0.05
pca_components = 3
patch_size = 15
rnn.hidden = 32
rnn.fc1 = 32
rnn.group = 4
rnn.lr = 0.05
rnn.epochs = 60
cnn.lr = 0.05
cnn.epochs = 60
cnn.fc1 = 128
cnn.dropout = 0.3
cotrain.n_update = 3
cotrain.max_iterations = 3
cotrain.mode = mdcpe
batch_size = 8
";

fn mdcpe_bin(args: &[&str]) -> std::result::Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mdcpe"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("mdcpe {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn run_scene(dir: &Path, tag: &str) -> std::result::Result<(f64, String, String, f64), String> {
    let stem = dir.join("scene");
    let stem = stem.to_str().unwrap();
    mdcpe_bin(&[
        "generate", "--height", "32", "--width", "32", "--bands", "16", "--classes", "4",
        "--geometry", "blocks", "--noise", "0.05", "--seed", "7", stem,
    ])?;
    let out_dir = dir.join(tag);
    let config = format!(
        "{RUN_CONFIG}cube_path = {stem}.hsic\nlabels_path = {stem}.hsil\noutput_dir = {}\n",
        out_dir.display()
    );
    let config_path = dir.join(format!("{tag}.cfg"));
    fs::write(&config_path, config).map_err(|e| e.to_string())?;
    let start = Instant::now();
    mdcpe_bin(&["run", config_path.to_str().unwrap()])?;
    let secs = start.elapsed().as_secs_f64();
    let metrics = fs::read_to_string(out_dir.join("metrics.csv")).map_err(|e| e.to_string())?;
    let log = fs::read_to_string(out_dir.join("iterations.log")).map_err(|e| e.to_string())?;
    let oa = metrics
        .lines()
        .find_map(|l| l.strip_prefix("oa,"))
        .ok_or("metrics.csv has no oa row")?
        .parse::<f64>()
        .map_err(|e| e.to_string())?;
    Ok((oa, metrics, log, secs))
}

fn best_iteration_matches(log: &str) -> std::result::Result<usize, String> {
    let mut history = Vec::new();
    let mut reported = None;
    for line in log.lines() {
        if let Some(v) = line.strip_prefix("best_iteration=") {
            reported = v.parse::<usize>().ok();
        } else if let Some(v) = line.split_whitespace().find_map(|f| f.strip_prefix("val_oa=")) {
            history.push(v.parse::<f64>().map_err(|e| e.to_string())?);
        }
    }
    let mut best = 0;
    for (i, &v) in history.iter().enumerate() {
        if v > history[best] {
            best = i;
        }
    }
    let reported = reported.ok_or("log has no best_iteration line")?;
    ensure(reported == best, format!("reported best {reported}, argmax of history {history:?} is {best}"))?;
    Ok(best)
}

fn criteria_9_10(dir: &Path) -> (Outcome, Outcome) {
    let first = run_scene(dir, "run_a");
    let c9 = match &first {
        Err(e) => Err(e.clone()),
        Ok((oa, _, log, secs)) => (|| {
            ensure(*secs < 300.0, format!("run took {secs:.1}s"))?;
            ensure(*oa >= 0.95, format!("test OA {oa:.6} < 0.95"))?;
            let best = best_iteration_matches(log)?;
            Ok(format!("test OA {oa:.6} in {secs:.1}s; best_iteration {best} = argmax of validation history"))
        })(),
    };
    let c10 = match (&first, &run_scene(dir, "run_b")) {
        (Ok((_, m1, l1, _)), Ok((_, m2, l2, _))) => (|| {
            ensure(m1 == m2, "metrics.csv differs between runs")?;
            ensure(l1 == l2, "iteration log differs between runs")?;
            Ok("metrics.csv and iteration log byte-identical across two runs".to_string())
        })(),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    (c9, c10)
}

// ---------------------------------------------------------------- 11

fn criterion_11() -> Outcome {
    let settings = [
        ("SA", 32, "0.001", "0.0003", "0.3", 7),
        ("PU", 32, "0.003", "0.0001", "0.3", 3),
        ("PC", 64, "0.001", "0.0001", "0.4", 5),
    ];
    for (name, batch, rnn_lr, cnn_lr, dropout, n_update) in settings {
        let text = format!(
            "batch_size = {batch}\nrnn.lr = {rnn_lr}\ncnn.lr = {cnn_lr}\ncnn.dropout = {dropout}\ncotrain.n_update = {n_update}\n"
        );
        let config = ExperimentConfig::parse(&text).map_err(|e| format!("{name}: {e}"))?;
        ensure(config.batch_size == batch, format!("{name}: batch"))?;
        ensure(config.rnn_lr == rnn_lr.parse::<f64>().unwrap(), format!("{name}: rnn.lr"))?;
        ensure(config.cnn_lr == cnn_lr.parse::<f64>().unwrap(), format!("{name}: cnn.lr"))?;
        ensure(config.cnn_dropout == dropout.parse::<f64>().unwrap(), format!("{name}: dropout"))?;
        ensure(config.n_update == n_update, format!("{name}: n_update"))?;
        let echo = config.to_text();
        for line in text.lines() {
            ensure(echo.lines().any(|l| l == line), format!("{name}: echo lacks `{line}`"))?;
        }
        let again = ExperimentConfig::parse(&echo).map_err(|e| format!("{name}: {e}"))?;
        ensure(again == config, format!("{name}: round trip changed the config"))?;
    }
    Ok("SA/PU/PC batch, learning rates, dropout and n_update echoed verbatim and round-tripped".into())
}

// ----------------------------------------------------------------

fn report(id: &str, name: &str, outcome: std::thread::Result<Outcome>) -> bool {
    let (ok, detail) = match outcome {
        Ok(Ok(d)) => (true, d),
        Ok(Err(e)) => (false, e),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            (false, format!("panicked: {msg}"))
        }
    };
    println!("{} criterion {id} ({name}): {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut all = true;
    let simple: [(&str, &str, fn() -> Outcome); 7] = [
        ("1", "gradient suite", criterion_1),
        ("2", "convolution oracle", criterion_2),
        ("3", "GRU hand case", criterion_3),
        ("4", "co-decision properties", criterion_4),
        ("5", "balance property", criterion_5),
        ("6", "exclusion and monotonicity", criterion_6),
        ("7", "metrics oracle", criterion_7),
    ];
    for (id, name, f) in simple {
        all &= report(id, name, catch_unwind(f));
    }
    all &= report("8", "PCA", catch_unwind(criterion_8));
    let runs = catch_unwind(AssertUnwindSafe(|| criteria_9_10(dir.path())));
    match runs {
        Ok((c9, c10)) => {
            all &= report("9", "end-to-end desk scale", Ok(c9));
            all &= report("10", "determinism", Ok(c10));
        }
        Err(p) => {
            let msg = format!("{p:?}");
            all &= report("9", "end-to-end desk scale", Ok(Err(msg.clone())));
            all &= report("10", "determinism", Ok(Err(msg)));
        }
    }
    all &= report("11", "benchmark parameter conformance", catch_unwind(criterion_11));
    if !all {
        std::process::exit(1);
    }
}
