//! End-to-end acceptance checks. Runs without the libtest harness so every
//! check prints exactly one PASS/FAIL line; the process fails if any check does.

mod common;

use std::path::Path;
use std::time::Instant;

use cnnm::conv::{conv_adjoint, conv_sampling_set, conv_spectrum, materialize, KernelShape};
use cnnm::pipeline::{
    psnr_on_mask, random_missing_mask, run_phase_transition, PhaseTransitionSpec, SamplingMode,
};
use cnnm::select::{averaged_coding_length, default_theta, square_kernels};
use cnnm::solvers::{solve_cnnm, solve_dftl1, solve_nnm_baseline, SolverConfig};
use cnnm::spectral::dft;
use cnnm::theory::{isomerism_monte_carlo, noisy_bound_and_error};
use cnnm::{DenseTensor, SamplingMask, Shape};
use common::oracle_admm;
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn image() -> DenseTensor {
    cnnm::io::read_pgm(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/astronaut64.pgm")).unwrap()
}

fn random_dims(rng: &mut ChaCha8Rng, order: usize, max_len: usize) -> Vec<usize> {
    loop {
        let dims: Vec<usize> = (0..order).map(|_| rng.random_range(1..=max_len.min(64))).collect();
        if dims.iter().product::<usize>() <= max_len && dims.iter().product::<usize>() >= 2 {
            return dims;
        }
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, dims: Vec<usize>) -> DenseTensor {
    DenseTensor::from_fn(Shape::new(dims).unwrap(), |_| rng.random_range(-1.0..1.0))
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn operator_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = [0.0f64; 3];
    for _ in 0..200 {
        let order = rng.random_range(1..=3);
        let dims = match order {
            1 => vec![rng.random_range(2..=4096)],
            _ => random_dims(&mut rng, order, 4096),
        };
        let x = random_tensor(&mut rng, dims);
        let m = x.len();
        let kdims = loop {
            let k: Vec<usize> = x.dims().iter().map(|&d| rng.random_range(1..=d)).collect();
            if m * k.iter().product::<usize>() <= 1 << 21 {
                break k;
            }
        };
        let kernel = KernelShape::new(kdims, x.shape()).unwrap();
        let k = kernel.len();
        let omega = SamplingMask::from_fn(x.shape().clone(), |_| rng.random_bool(0.5));
        let a = materialize(&x, &kernel).unwrap();

        let back = conv_adjoint(&a, x.shape(), &kernel).unwrap();
        worst[0] = worst[0].max(back.sub(&x.scale(k as f64)).unwrap().max_abs());

        let oa = conv_sampling_set(&omega, &kernel).unwrap();
        let theta_a = DMatrix::from_column_slice(m, k, oa.indicator().data());
        let lhs = materialize(&omega.project(&x).unwrap(), &kernel).unwrap();
        worst[1] = worst[1].max(max_abs(&(lhs - a.component_mul(&theta_a))));

        let y = DMatrix::from_fn(m, k, |_, _| rng.random_range(-1.0..1.0));
        let lhs = conv_adjoint(&y.component_mul(&theta_a), x.shape(), &kernel).unwrap();
        let rhs = omega.project(&conv_adjoint(&y, x.shape(), &kernel).unwrap()).unwrap();
        worst[2] = worst[2].max(lhs.sub(&rhs).unwrap().max_abs());
    }
    let detail = format!("max errors {:.1e} / {:.1e} / {:.1e} over 200 triples", worst[0], worst[1], worst[2]);
    if worst.iter().all(|&w| w <= 1e-10) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dft_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut sv_err, mut nuc_err) = (0.0f64, 0.0f64);
    for t in 0..50 {
        let m = if t == 0 { 1024 } else { rng.random_range(2..=1024) };
        let x = random_tensor(&mut rng, vec![m]);
        let spec = conv_spectrum(&x, &KernelShape::full(x.shape()), 1e-9).unwrap();
        let mut mags = dft(&x).magnitudes();
        mags.sort_by(|a, b| b.total_cmp(a));
        let top = mags[0];
        let diff = spec.singular_values.iter().zip(&mags).map(|(s, f)| (s - f).abs()).fold(0.0, f64::max);
        sv_err = sv_err.max(diff / top);
        let l1: f64 = mags.iter().sum();
        nuc_err = nuc_err.max((spec.nuclear_norm - l1).abs() / l1);
    }
    let detail = format!("singular values vs |F| {sv_err:.1e} rel, nuclear vs l1 {nuc_err:.1e} rel");
    if sv_err <= 1e-8 && nuc_err <= 1e-7 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst_oracle = 0.0f64;
    for _ in 0..30 {
        let order = rng.random_range(1..=3);
        let dims = random_dims(&mut rng, order, 64);
        let x = random_tensor(&mut rng, dims);
        let m = x.len();
        let kdims: Vec<usize> = x.dims().iter().map(|&d| rng.random_range(1..=d)).collect();
        let kernel = KernelShape::new(kdims.clone(), x.shape()).unwrap();
        let count = rng.random_range((m / 3).max(1)..=m);
        let omega = SamplingMask::from_offsets(x.shape().clone(), sample(&mut rng, m, count)).unwrap();
        let cfg = SolverConfig::for_kernel(kernel.len());
        let (l, rep) = solve_cnnm(&x, &omega, &kernel, &cfg).unwrap();
        let (last, best) = oracle_admm(&x, &omega, &kdims, &cfg, rep.iterations);
        let reference = if rep.converged { last } else { best };
        let reference = DenseTensor::new(x.shape().clone(), reference.as_slice().to_vec()).unwrap();
        worst_oracle = worst_oracle.max(l.sub(&reference).unwrap().frobenius_norm() / reference.frobenius_norm().max(1e-300));
    }
    let mut worst_dft = 0.0f64;
    for dims in [vec![256], vec![16, 16], vec![8, 4, 8], vec![100], vec![12, 9]] {
        let x = random_tensor(&mut rng, dims);
        let m = x.len();
        let omega = SamplingMask::from_offsets(x.shape().clone(), sample(&mut rng, m, m * 3 / 4)).unwrap();
        let cfg = SolverConfig::for_dft(m);
        let (a, _) = solve_dftl1(&x, &omega, &cfg).unwrap();
        let (b, _) = solve_cnnm(&x, &omega, &KernelShape::full(x.shape()), &cfg).unwrap();
        worst_dft = worst_dft.max(a.sub(&b).unwrap().frobenius_norm() / b.frobenius_norm());
    }
    let detail = format!("implicit vs materialized {worst_oracle:.1e} rel (30 runs), dftl1 vs cnnm(k=m) {worst_dft:.1e} rel");
    if worst_oracle <= 1e-6 && worst_dft <= 1e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sine_forecasting() -> Outcome {
    let spec = PhaseTransitionSpec { a_values: (1..=10).collect(), ..Default::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let res = pool.install(|| run_phase_transition(&spec)).unwrap();
    let anchor = res.cells.iter().find(|c| c.a == 1 && (c.rho0 - 0.9).abs() < 1e-12).unwrap().success();
    let bounds: Vec<String> =
        (1..=10).map(|a| res.boundary(a).map_or("none".to_string(), |b| format!("{b}"))).collect();
    let violations = res.boundary_violations();
    let detail = format!(
        "a=1 at rho0=0.9 {}; boundaries [{}]; {violations} non-monotone",
        if anchor { "succeeds" } else { "fails" },
        bounds.join(" ")
    );
    if anchor && violations <= 1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_vs_deterministic() -> Outcome {
    let base = PhaseTransitionSpec { a_values: vec![5], trials: 5, seed: 7, ..Default::default() };
    let det = run_phase_transition(&PhaseTransitionSpec { mode: SamplingMode::DeterministicTail, ..base.clone() }).unwrap();
    let rnd = run_phase_transition(&PhaseTransitionSpec { mode: SamplingMode::Random, ..base }).unwrap();
    let (d, r) = (det.min_success(5), rnd.min_success(5));
    let detail = format!("minimal succeeding rho0 at a=5: random {r:?}, deterministic {d:?}");
    match (r, d) {
        (Some(r), Some(d)) if r < d => Ok(detail),
        (Some(_), None) => Ok(detail),
        _ => Err(detail),
    }
}

struct ImageRuns {
    cnnm: Vec<f64>,
    dft: Vec<f64>,
    nnm: Vec<f64>,
    masks: Vec<SamplingMask>,
}

fn image_runs(x: &DenseTensor) -> ImageRuns {
    let kernel = KernelShape::new(vec![13, 13], x.shape()).unwrap();
    let mut runs = ImageRuns { cnnm: vec![], dft: vec![], nnm: vec![], masks: vec![] };
    for seed in 0..5 {
        let omega = random_missing_mask(x.shape(), 0.6, seed).unwrap();
        let observed = omega.project(x).unwrap();
        let missing = omega.complement();
        let (l, _) = solve_cnnm(&observed, &omega, &kernel, &SolverConfig::for_kernel(kernel.len())).unwrap();
        runs.cnnm.push(psnr_on_mask(x, &l, &missing).unwrap());
        let (l, _) = solve_dftl1(&observed, &omega, &SolverConfig::for_dft(x.len())).unwrap();
        runs.dft.push(psnr_on_mask(x, &l, &missing).unwrap());
        let (l, _) = solve_nnm_baseline(&observed, &omega, &SolverConfig::default()).unwrap();
        runs.nnm.push(psnr_on_mask(x, &l, &missing).unwrap());
        runs.masks.push(omega);
    }
    runs
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn image_ordering(runs: &ImageRuns) -> Outcome {
    let (c, d, n) = (mean(&runs.cnnm), mean(&runs.dft), mean(&runs.nnm));
    let detail = format!("mean PSNR cnnm {c:.2} dB, dftl1 {d:.2} dB, nnm {n:.2} dB over 5 masks");
    if c - d >= 0.5 && d - n >= 0.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn lambda_insensitivity(x: &DenseTensor, runs: &ImageRuns) -> Outcome {
    let kernel = KernelShape::new(vec![13, 13], x.shape()).unwrap();
    let mut means = Vec::new();
    for lambda in [100.0, 1000.0, 10000.0] {
        let psnr: Vec<f64> = if lambda == 1000.0 {
            runs.cnnm.clone()
        } else {
            runs.masks
                .iter()
                .map(|omega| {
                    let cfg = SolverConfig::for_kernel(kernel.len()).with_lambda(lambda);
                    let (l, _) = solve_cnnm(&omega.project(x).unwrap(), omega, &kernel, &cfg).unwrap();
                    psnr_on_mask(x, &l, &omega.complement()).unwrap()
                })
                .collect()
        };
        means.push(mean(&psnr));
    }
    let spread = means.iter().cloned().fold(f64::MIN, f64::max) - means.iter().cloned().fold(f64::MAX, f64::min);
    let detail = format!("PSNR at lambda 1e2/1e3/1e4: {:.2}/{:.2}/{:.2} dB, spread {spread:.2} dB", means[0], means[1], means[2]);
    if spread <= 1.5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn noisy_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let m = 64;
    let mut worst_ratio = 0.0f64;
    for t in 0..20 {
        let f = rng.random_range(1..m / 2) as f64;
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let l0 = DenseTensor::from_fn(Shape::vector(m).unwrap(), |i| {
            (std::f64::consts::TAU * f * i[0] as f64 / m as f64 + phase).sin()
        });
        // half the instances use k = m with random sampling, half forecast one step with k = m/2
        let (kernel, omega) = if t % 2 == 0 {
            let omega = SamplingMask::from_offsets(l0.shape().clone(), sample(&mut rng, m, 60)).unwrap();
            (KernelShape::full(l0.shape()), omega)
        } else {
            let omega = SamplingMask::from_offsets(l0.shape().clone(), 0..m - 1).unwrap();
            (KernelShape::new(vec![m / 2], l0.shape()).unwrap(), omega)
        };
        let k = kernel.len();
        let spec = conv_spectrum(&l0, &kernel, 1e-9).unwrap();
        let noise_level = rng.random_range(0.001..0.05);
        let mut noise = DenseTensor::from_fn(l0.shape().clone(), |_| rng.random_range(-1.0..1.0));
        noise = omega.project(&noise).unwrap();
        noise = noise.scale(noise_level / noise.frobenius_norm());
        let eps = noise.frobenius_norm();
        let (threshold, bound) = noisy_bound_and_error(spec.rank, spec.coherence, m, k, eps);
        if omega.rho0() <= threshold {
            return Err(format!("instance {t} misses the sampling condition ({} <= {threshold})", omega.rho0()));
        }
        let observed = omega.project(&l0.add(&noise).unwrap()).unwrap();
        let cfg = if k == m { SolverConfig::for_dft(m) } else { SolverConfig::for_kernel(k) };
        let (l, _) = solve_cnnm(&observed, &omega, &kernel, &cfg).unwrap();
        let err = l.sub(&l0).unwrap().frobenius_norm();
        worst_ratio = worst_ratio.max(err / bound);
    }
    let detail = format!("largest error / bound ratio {worst_ratio:.2e} over 20 noisy instances");
    if worst_ratio <= 1.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn isomerism_trials() -> Outcome {
    let trials = isomerism_monte_carlo(100, 0.75, 64, 3, 109).unwrap();
    let hypothesis = trials.iter().filter(|t| t.rho > t.required_rho).count();
    let violations = trials.iter().filter(|t| t.violates(0.75)).count();
    let min_gamma = trials.iter().map(|t| t.gamma).fold(f64::INFINITY, f64::min);
    let detail = format!("{hypothesis}/100 trials meet the hypothesis, {violations} violations, min gamma {min_gamma:.3}");
    if hypothesis == 100 && violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn acl_interior_minimum(x: &DenseTensor) -> Outcome {
    let top = x.dims()[0].min(31);
    let sizes: Vec<usize> = (3..=top).step_by(2).collect();
    let theta = default_theta(x);
    let curve: Vec<f64> = square_kernels(x.shape(), sizes.iter().copied())
        .unwrap()
        .iter()
        .map(|k| averaged_coding_length(x, k, theta).unwrap())
        .collect();
    let argmin = (0..curve.len()).min_by(|&a, &b| curve[a].total_cmp(&curve[b])).unwrap();
    let detail = format!("ACL minimized at {0}x{0} among {1}..{2}", sizes[argmin], sizes[0], sizes[sizes.len() - 1]);
    if argmin > 0 && argmin + 1 < curve.len() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let img = image();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(&mut *run))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] {n:>2} {name}: {detail} ({secs:.1}s)");
    };
    report(1, "operator identities", &mut operator_identities);
    report(2, "full-kernel spectrum equals DFT", &mut dft_equivalence);
    report(3, "solver oracle equivalence", &mut oracle_equivalence);
    report(4, "sine forecasting boundary", &mut sine_forecasting);
    report(5, "random vs deterministic sampling", &mut random_vs_deterministic);
    let mut runs = None;
    report(6, "image completion ordering", &mut || image_ordering(runs.insert(image_runs(&img))));
    report(7, "lambda insensitivity", &mut || match &runs {
        Some(r) => lambda_insensitivity(&img, r),
        None => Err("image runs unavailable".to_string()),
    });
    report(8, "noisy recovery bound", &mut noisy_bound);
    report(9, "isomerism Monte Carlo", &mut isomerism_trials);
    report(10, "coding-length interior minimum", &mut || acl_interior_minimum(&img));
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
