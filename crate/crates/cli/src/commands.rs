use std::path::Path;

use cnnm::conv::{conv_spectrum, KernelShape, DEFAULT_RANK_TOL};
use cnnm::io;
use cnnm::pipeline::{
    forecast as run_forecast, format_psnr, psnr_on_mask, psnr_serde, random_missing_mask, run_phase_transition,
    ForecastTask, KernelChoice, Method, PhaseTransitionSpec,
};
use cnnm::select::{default_theta, scan_kernels, scores_to_csv, select_kernel, square_kernels};
use cnnm::solvers::{solve_cnnm, solve_dftl1, solve_nnm_baseline, SolveReport, SolverConfig};
use cnnm::spectral::{dft, fourier_l0, fourier_l1, gini, DEFAULT_L0_TOL};
use cnnm::{DenseTensor, Shape};
use serde::Serialize;

use crate::failure::Failure;
use crate::formats::{out_dir, read_tensor, write_cnt1, write_json, write_pgm, write_text, Format};
use crate::{
    BenchArgs, CompleteArgs, EigsArgs, ForecastArgs, KernelArg, KernelSelectArgs, MethodArg, SolverArgs, SpectrumArgs,
};

fn solver_config(args: &SolverArgs, default: SolverConfig) -> Result<SolverConfig, Failure> {
    let mut cfg = match &args.solver_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        None => default,
    };
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(n) = args.max_iters {
        cfg.max_iters = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn converged(report: &SolveReport) -> Result<(), Failure> {
    if report.converged {
        Ok(())
    } else {
        Err(Failure::not_converged(report.iterations))
    }
}

#[derive(Serialize)]
struct ForecastReport<'a> {
    method: &'a str,
    kernel: &'a [usize],
    horizon: usize,
    rho0: f64,
    solve: &'a SolveReport,
}

/// Mean of each time slice, for plotting tensor series on one axis.
fn slice_means(x: &DenseTensor) -> Vec<f64> {
    let p = *x.dims().last().expect("shapes are non-empty");
    let per = x.len() / p;
    x.data().chunks(per).map(|c| c.iter().sum::<f64>() / per as f64).collect()
}

pub fn forecast(a: &ForecastArgs) -> Result<(), Failure> {
    let format = Format::of(&a.input);
    if format == Format::Pgm {
        return Err(Failure::config("forecast reads a CSV series or a CNT1 tensor series"));
    }
    let history = read_tensor(&a.input)?;
    if a.horizon == 0 {
        return Err(Failure::config("horizon must be at least 1"));
    }
    let mut dims = history.dims().to_vec();
    *dims.last_mut().expect("shapes are non-empty") += a.horizon;
    let stacked = Shape::new(dims)?;

    let (method, cfg, kernel) = match a.method {
        MethodArg::Nnm => return Err(Failure::config("nnm is a completion baseline; use cnnm or dftl1 to forecast")),
        MethodArg::Dftl1 => {
            if a.kernel != KernelArg::Auto {
                return Err(Failure::config("--kernel applies to cnnm only; dftl1 always uses the full kernel"));
            }
            (Method::Dftl1, solver_config(&a.solver, SolverConfig::for_dft(stacked.len()))?, KernelChoice::default())
        }
        MethodArg::Cnnm => {
            let k = match &a.kernel {
                KernelArg::Explicit(k) => KernelShape::new(k.clone(), &stacked)?,
                KernelArg::Auto => select_kernel(&stacked, a.horizon, a.alpha, a.image_default)?,
            };
            let cfg = solver_config(&a.solver, SolverConfig::for_kernel(k.len()))?;
            (Method::Cnnm, cfg, KernelChoice::Explicit(k.dims().to_vec()))
        }
    };
    let out = out_dir(&a.out)?;
    let task = ForecastTask::new(history.clone(), a.horizon, method).with_kernel(kernel).with_config(cfg);
    let result = run_forecast(&task)?;

    if format == Format::Csv {
        write_text(&out.join("forecast.csv"), &io::series_to_csv(result.predicted.data()))?;
    } else {
        write_cnt1(&out.join("forecast.cnt1"), &result.predicted)?;
    }
    write_text(&out.join("plot.csv"), &io::forecast_plot_csv(&slice_means(&history), &slice_means(&result.predicted)))?;
    let report = ForecastReport {
        method: if method == Method::Cnnm { "cnnm" } else { "dftl1" },
        kernel: &result.kernel,
        horizon: a.horizon,
        rho0: result.rho0,
        solve: &result.report,
    };
    write_json(&out.join("report.json"), &report)?;
    println!("forecast {} step(s) with kernel {:?}", a.horizon, result.kernel);
    converged(&result.report)
}

#[derive(Serialize)]
struct Psnr(#[serde(with = "psnr_serde")] f64);

#[derive(Serialize)]
struct CompleteReport<'a> {
    method: &'a str,
    kernel: Option<Vec<usize>>,
    observed_fraction: f64,
    seed: Option<u64>,
    psnr_missing: Option<Psnr>,
    solve: &'a SolveReport,
}

fn write_like(path_stem: &Path, format: Format, x: &DenseTensor) -> Result<(), Failure> {
    if format == Format::Pgm {
        write_pgm(&path_stem.with_extension("pgm"), x)?;
    }
    write_cnt1(&path_stem.with_extension("cnt1"), x)
}

pub fn complete(a: &CompleteArgs) -> Result<(), Failure> {
    let format = Format::of(&a.input);
    let data = read_tensor(&a.input)?;
    let (omega, truth) = match (&a.mask, a.missing_rate) {
        (Some(path), _) => {
            let mask = io::read_mask(path).map_err(|e| Failure::reading(path, e))?;
            if mask.shape() != data.shape() {
                return Err(Failure::input(format!(
                    "mask shape {:?} does not match data shape {:?}",
                    mask.shape().dims(),
                    data.dims()
                )));
            }
            (mask, None)
        }
        (None, Some(rate)) => (random_missing_mask(data.shape(), rate, a.seed)?, Some(data.clone())),
        (None, None) => return Err(Failure::config("give --mask or --missing-rate")),
    };
    let truth = match &a.truth {
        Some(path) => {
            let t = read_tensor(path)?;
            if t.shape() != data.shape() {
                return Err(Failure::input(format!("truth shape {:?} does not match data shape {:?}", t.dims(), data.dims())));
            }
            Some(t)
        }
        None => truth,
    };
    if omega.count() == 0 {
        return Err(Failure::config("every entry is missing; nothing to complete from"));
    }

    let observed = omega.project(&data)?;
    let (completed, report, kernel, name) = match a.method {
        // nothing to fill in; a solve would only add the fidelity bias
        _ if omega.count() == omega.shape().len() => {
            let rep = SolveReport {
                iterations: 0,
                converged: true,
                primal_residuals: vec![],
                objective_trace: vec![],
                wall_time_sec: 0.0,
            };
            (data.clone(), rep, None, "copy")
        }
        MethodArg::Cnnm => {
            let k = match &a.kernel {
                KernelArg::Explicit(k) => KernelShape::new(k.clone(), data.shape())?,
                KernelArg::Auto => {
                    if a.image_default == 0 {
                        return Err(Failure::config("image_default must be at least 1"));
                    }
                    KernelShape::new(data.dims().iter().map(|&m| m.min(a.image_default)).collect(), data.shape())?
                }
            };
            let cfg = solver_config(&a.solver, SolverConfig::for_kernel(k.len()))?;
            let (l, rep) = solve_cnnm(&observed, &omega, &k, &cfg)?;
            (l, rep, Some(k.dims().to_vec()), "cnnm")
        }
        MethodArg::Dftl1 | MethodArg::Nnm if a.kernel != KernelArg::Auto => {
            return Err(Failure::config("--kernel applies to cnnm only"));
        }
        MethodArg::Dftl1 => {
            let cfg = solver_config(&a.solver, SolverConfig::for_dft(data.len()))?;
            let (l, rep) = solve_dftl1(&observed, &omega, &cfg)?;
            (l, rep, Some(data.dims().to_vec()), "dftl1")
        }
        MethodArg::Nnm => {
            let cfg = solver_config(&a.solver, SolverConfig::default())?;
            let (l, rep) = solve_nnm_baseline(&observed, &omega, &cfg)?;
            (l, rep, None, "nnm")
        }
    };

    let out = out_dir(&a.out)?;
    write_like(&out.join("completed"), format, &completed)?;
    if a.mask.is_none() {
        io::write_mask(&out.join("mask.cnt1"), &omega)?;
    }
    let missing = omega.complement();
    let psnr = match &truth {
        Some(t) if missing.count() > 0 => Some(psnr_on_mask(t, &completed, &missing)?),
        _ => None,
    };
    let rep = CompleteReport {
        method: name,
        kernel,
        observed_fraction: omega.rho0(),
        seed: a.missing_rate.map(|_| a.seed),
        psnr_missing: psnr.map(Psnr),
        solve: &report,
    };
    write_json(&out.join("report.json"), &rep)?;
    match psnr {
        Some(p) => println!("psnr on missing entries: {} dB", format_psnr(p)),
        None => println!("completed {} entries", missing.count()),
    }
    converged(&report)
}

#[derive(Serialize)]
struct SpectrumSummary {
    m: usize,
    gini: f64,
    fourier_l0: usize,
    fourier_l1: f64,
}

pub fn spectrum(a: &SpectrumArgs) -> Result<(), Failure> {
    let x = read_tensor(&a.input)?;
    let z = dft(&x);
    let g = gini(&z.magnitudes())?;
    let out = out_dir(&a.out)?;
    write_text(&out.join("spectrum.csv"), &io::dft_to_csv(&z))?;
    let summary = SpectrumSummary { m: x.len(), gini: g, fourier_l0: fourier_l0(&x, DEFAULT_L0_TOL), fourier_l1: fourier_l1(&x) };
    write_json(&out.join("spectrum.json"), &summary)?;
    println!("gini {g}");
    Ok(())
}

/// Min-max scaling into [0, 1] for viewing a filter as an image.
fn to_unit_range(x: &DenseTensor) -> DenseTensor {
    let lo = x.data().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    x.map(|v| if span > 0.0 { (v - lo) / span } else { 0.5 })
}

#[derive(Serialize)]
struct EigsSummary<'a> {
    kernel: &'a [usize],
    rank: usize,
    nuclear_norm: f64,
    coherence: f64,
}

pub fn eigs(a: &EigsArgs) -> Result<(), Failure> {
    let x = read_tensor(&a.input)?;
    let kernel = KernelShape::new(a.kernel.0.clone(), x.shape())?;
    if a.count > kernel.len() {
        return Err(Failure::config(format!("--count {} exceeds the kernel size {}", a.count, kernel.len())));
    }
    let spec = conv_spectrum(&x, &kernel, DEFAULT_RANK_TOL)?;
    let out = out_dir(&a.out)?;
    write_text(&out.join("sigma.csv"), &io::sigma_to_csv(&spec.singular_values))?;
    let kshape = Shape::new(kernel.dims().to_vec())?;
    for i in 0..a.count {
        let v = DenseTensor::new(kshape.clone(), spec.right_vectors.column(i).iter().copied().collect())?;
        let stem = out.join(format!("eigvec_{}", i + 1));
        write_cnt1(&stem.with_extension("cnt1"), &v)?;
        if kshape.order() == 2 {
            write_pgm(&stem.with_extension("pgm"), &to_unit_range(&v))?;
        }
    }
    let summary = EigsSummary {
        kernel: kernel.dims(),
        rank: spec.rank,
        nuclear_norm: spec.nuclear_norm,
        coherence: spec.coherence,
    };
    write_json(&out.join("eigs.json"), &summary)?;
    println!("rank {} of {}, sigma_1 {}", spec.rank, kernel.len(), spec.singular_values[0]);
    Ok(())
}

pub fn kernel_select(a: &KernelSelectArgs) -> Result<(), Failure> {
    let x = read_tensor(&a.input)?;
    let sizes = a.sizes.clone().map(|d| d.0).unwrap_or_else(|| (3..=31).step_by(2).collect());
    if sizes.contains(&0) {
        return Err(Failure::config("kernel sizes must be at least 1"));
    }
    let theta = match a.theta {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Failure::config(format!("theta must be positive, got {t}"))),
        None => default_theta(&x),
    };
    let mut candidates = square_kernels(x.shape(), sizes)?;
    // capping at the data extent can make sizes collide
    candidates.sort_by_key(|k| k.dims().to_vec());
    candidates.dedup_by_key(|k| k.dims().to_vec());
    let scores = scan_kernels(&x, &candidates, theta)?;
    let out = out_dir(&a.out)?;
    write_text(&out.join("kernels.csv"), &scores_to_csv(&scores))?;
    println!("best kernel {:?} (acl {})", scores[0].kernel, scores[0].acl);
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&a.spec).map_err(|e| Failure::input(format!("{}: {e}", a.spec.display())))?;
    let mut spec: PhaseTransitionSpec =
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", a.spec.display())))?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let result = run_phase_transition(&spec)?;
    let out = out_dir(&a.out)?;
    write_text(&out.join("grid.csv"), &result.to_csv())?;
    write_text(&out.join("manifest.json"), &(result.manifest()? + "\n"))?;
    for &av in &spec.a_values {
        let b = result.boundary(av).map_or("none".to_string(), |b| b.to_string());
        println!("a={av} boundary {b}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slice_means_follow_the_last_axis() {
        let x = DenseTensor::new(Shape::new(vec![2, 3]).unwrap(), vec![1.0, 3.0, 0.0, 0.0, 5.0, 7.0]).unwrap();
        assert_eq!(slice_means(&x), vec![2.0, 0.0, 6.0]);
    }

    #[test]
    fn unit_range_scaling() {
        let x = DenseTensor::from_vec(vec![-2.0, 0.0, 2.0]).unwrap();
        assert_eq!(to_unit_range(&x).data(), &[0.0, 0.5, 1.0]);
        let flat = DenseTensor::from_vec(vec![3.0, 3.0]).unwrap();
        assert_eq!(to_unit_range(&flat).data(), &[0.5, 0.5]);
    }
}
