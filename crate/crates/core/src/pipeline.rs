//! Forecasting as completion, evaluation metrics, synthetic signals and the
//! phase-transition harness.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conv::KernelShape;
use crate::error::{Error, Result};
use crate::select::{select_kernel, DEFAULT_ALPHA, DEFAULT_IMAGE_KERNEL};
use crate::solvers::{solve_cnnm, solve_dftl1, SolveReport, SolverConfig};
use crate::tensor::{DenseTensor, SamplingMask, Shape};

/// PSNR gate for calling a recovery successful.
pub const SUCCESS_PSNR: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cnnm,
    Dftl1,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnnm" => Ok(Method::Cnnm),
            "dftl1" | "dft-l1" | "dft" => Ok(Method::Dftl1),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}, expected cnnm or dftl1"))),
        }
    }
}

/// How the kernel is chosen for a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Explicit(Vec<usize>),
    Auto { alpha: f64, image_default: usize },
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice::Auto { alpha: DEFAULT_ALPHA, image_default: DEFAULT_IMAGE_KERNEL }
    }
}

/// Predict the next `horizon` samples of a tensor series.
#[derive(Clone, Debug)]
pub struct ForecastTask {
    /// `p` samples stacked along the last axis.
    pub history: DenseTensor,
    /// Observed entries of `history`; `None` means all of them.
    pub history_mask: Option<SamplingMask>,
    pub horizon: usize,
    pub method: Method,
    pub kernel: KernelChoice,
    /// Solver settings; `None` picks defaults for the chosen kernel.
    pub cfg: Option<SolverConfig>,
}

impl ForecastTask {
    pub fn new(history: DenseTensor, horizon: usize, method: Method) -> Self {
        Self { history, history_mask: None, horizon, method, kernel: KernelChoice::default(), cfg: None }
    }

    /// A univariate series.
    pub fn from_series(values: &[f64], horizon: usize, method: Method) -> Result<Self> {
        Ok(Self::new(DenseTensor::from_vec(values.to_vec())?, horizon, method))
    }

    /// Stacks equally shaped samples along a new last axis.
    pub fn from_samples(samples: &[DenseTensor], horizon: usize, method: Method) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::InvalidArgument("history is empty".into()))?;
        let mut data = Vec::with_capacity(first.len() * samples.len());
        for s in samples {
            first.check_same_shape(s)?;
            data.extend_from_slice(s.data());
        }
        let mut dims = first.dims().to_vec();
        dims.push(samples.len());
        Ok(Self::new(DenseTensor::new(Shape::new(dims)?, data)?, horizon, method))
    }

    pub fn with_kernel(mut self, kernel: KernelChoice) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_config(mut self, cfg: SolverConfig) -> Self {
        self.cfg = Some(cfg);
        self
    }

    pub fn with_history_mask(mut self, mask: SamplingMask) -> Self {
        self.history_mask = Some(mask);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if let Some(mask) = &self.history_mask {
            crate::tensor::check_shapes(self.history.shape(), mask.shape())?;
        }
        Ok(())
    }
}

/// The stacked tensor (future slots zero) and the observed set.
pub fn tsf_to_tcas(task: &ForecastTask) -> Result<(DenseTensor, SamplingMask)> {
    task.validate()?;
    let hist = &task.history;
    let mut dims = hist.dims().to_vec();
    let p = *dims.last().expect("shapes are non-empty");
    *dims.last_mut().expect("shapes are non-empty") = p + task.horizon;
    let shape = Shape::new(dims)?;
    let mut data = hist.data().to_vec();
    data.resize(shape.len(), 0.0);
    let mut flags = vec![false; shape.len()];
    match &task.history_mask {
        Some(mask) => {
            for o in mask.observed_offsets() {
                flags[o] = true;
            }
        }
        None => flags[..hist.len()].iter_mut().for_each(|f| *f = true),
    }
    Ok((DenseTensor::new(shape.clone(), data)?, SamplingMask::from_bools(shape, &flags)?))
}

/// Result of [`forecast`].
#[derive(Clone, Debug)]
pub struct Forecast {
    /// The `horizon` recovered samples, stacked along the last axis.
    pub predicted: DenseTensor,
    /// History and forecast together.
    pub completed: DenseTensor,
    pub report: SolveReport,
    pub kernel: Vec<usize>,
    pub rho0: f64,
}

pub fn forecast(task: &ForecastTask) -> Result<Forecast> {
    let (stacked, omega) = tsf_to_tcas(task)?;
    let shape = stacked.shape().clone();
    let (completed, report, kernel) = match task.method {
        Method::Dftl1 => {
            let cfg = task.cfg.clone().unwrap_or_else(|| SolverConfig::for_dft(shape.len()));
            let (l, rep) = solve_dftl1(&stacked, &omega, &cfg)?;
            (l, rep, shape.dims().to_vec())
        }
        Method::Cnnm => {
            let kernel = match &task.kernel {
                KernelChoice::Explicit(k) => KernelShape::new(k.clone(), &shape)?,
                KernelChoice::Auto { alpha, image_default } => select_kernel(&shape, task.horizon, *alpha, *image_default)?,
            };
            let cfg = task.cfg.clone().unwrap_or_else(|| SolverConfig::for_kernel(kernel.len()));
            let (l, rep) = solve_cnnm(&stacked, &omega, &kernel, &cfg)?;
            (l, rep, kernel.dims().to_vec())
        }
    };
    let p = task.history.dims().last().copied().expect("shapes are non-empty");
    let slices = (p + 1..=p + task.horizon).map(|t| completed.last_axis_slice(t)).collect::<Result<Vec<_>>>()?;
    let mut dims = task.history.dims().to_vec();
    *dims.last_mut().expect("shapes are non-empty") = task.horizon;
    let data: Vec<f64> = slices.iter().flat_map(|s| s.data().iter().copied()).collect();
    Ok(Forecast { predicted: DenseTensor::new(Shape::new(dims)?, data)?, completed, report, kernel, rho0: omega.rho0() })
}

/// `10·log10(peak²/MSE)` with the MSE taken over `eval_mask` only and
/// `peak = max|truth|` over the whole tensor. An exact match gives `+∞`.
pub fn psnr_on_mask(truth: &DenseTensor, estimate: &DenseTensor, eval_mask: &SamplingMask) -> Result<f64> {
    truth.check_same_shape(estimate)?;
    crate::tensor::check_shapes(truth.shape(), eval_mask.shape())?;
    if eval_mask.count() == 0 {
        return Err(Error::InvalidArgument("evaluation mask is empty".into()));
    }
    let sse: f64 = eval_mask
        .observed_offsets()
        .map(|o| (truth.data()[o] - estimate.data()[o]).powi(2))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse / eval_mask.count() as f64;
    let peak = truth.max_abs();
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Serde adapter writing non-finite PSNR values as `"inf"`, `"-inf"` or `"nan"`.
pub mod psnr_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::format_psnr(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => t.parse::<f64>().map_err(serde::de::Error::custom),
        }
    }
}

/// PSNR as text, `inf` for an exact match.
pub fn format_psnr(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

/// `[L]_t = Σ_{i=1}^{a} sin(2πti/m)` for `t = 1..m`, optionally scaled to a
/// maximum of 1.
pub fn make_sine_mixture(m: usize, a: usize, normalize: bool) -> Result<DenseTensor> {
    if a == 0 || 2 * a >= m {
        return Err(Error::InvalidArgument(format!("need 1 <= a and 2a < m, got a = {a}, m = {m}")));
    }
    let mut x = DenseTensor::from_fn(Shape::vector(m)?, |idx| {
        let t = idx[0] as f64;
        (1..=a).map(|i| (2.0 * std::f64::consts::PI * t * i as f64 / m as f64).sin()).sum()
    });
    if normalize {
        let top = x.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        x.data_mut().iter_mut().for_each(|v| *v /= top);
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Uniform without replacement.
    Random,
    /// The last `(1−ρ0)m` entries missing.
    DeterministicTail,
}

impl SamplingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplingMode::Random => "random",
            SamplingMode::DeterministicTail => "deterministic-tail",
        }
    }
}

/// Observed count `round(ρ0·m)`, at least 1.
fn observed_count(m: usize, rho0: f64) -> usize {
    ((rho0 * m as f64).round() as usize).clamp(1, m)
}

/// Observed set on a length-`m` vector.
pub fn sampling_mask(m: usize, rho0: f64, mode: SamplingMode, rng: &mut ChaCha8Rng) -> Result<SamplingMask> {
    let n = observed_count(m, rho0);
    let shape = Shape::vector(m)?;
    match mode {
        SamplingMode::DeterministicTail => SamplingMask::from_offsets(shape, 0..n),
        SamplingMode::Random => SamplingMask::from_offsets(shape, sample(rng, m, n)),
    }
}

/// Observed set with a fraction `missing_rate` of entries dropped uniformly.
pub fn random_missing_mask(shape: &Shape, missing_rate: f64, seed: u64) -> Result<SamplingMask> {
    if !(0.0..1.0).contains(&missing_rate) {
        return Err(Error::InvalidArgument(format!("missing rate must lie in [0, 1), got {missing_rate}")));
    }
    let m = shape.len();
    let n = observed_count(m, 1.0 - missing_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SamplingMask::from_offsets(shape.clone(), sample(&mut rng, m, n))
}

/// A grid of (tone count, sampling rate) recovery experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseTransitionSpec {
    pub m: usize,
    pub a_values: Vec<usize>,
    pub rho0_values: Vec<f64>,
    pub mode: SamplingMode,
    /// Random masks per cell; deterministic cells always run once.
    pub trials: usize,
    pub success_psnr: f64,
    pub method: Method,
    /// Kernel for CNNM; `None` means `k = m`.
    pub kernel: Option<usize>,
    pub seed: u64,
    pub solver: Option<SolverConfig>,
}

impl Default for PhaseTransitionSpec {
    fn default() -> Self {
        Self {
            m: 1000,
            a_values: (1..=19).collect(),
            rho0_values: (1..=19).map(|i| i as f64 / 20.0).collect(),
            mode: SamplingMode::DeterministicTail,
            trials: 1,
            success_psnr: SUCCESS_PSNR,
            method: Method::Dftl1,
            kernel: None,
            seed: 0,
            solver: None,
        }
    }
}

impl PhaseTransitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.a_values.is_empty() || self.rho0_values.is_empty() {
            return Err(Error::InvalidArgument("phase-transition grid is empty".into()));
        }
        if let Some(&a) = self.a_values.iter().find(|&&a| a == 0 || 2 * a >= self.m) {
            return Err(Error::InvalidArgument(format!("tone count {a} out of range for m = {}", self.m)));
        }
        if let Some(r) = self.rho0_values.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
            return Err(Error::InvalidArgument(format!("rho0 values must lie in (0, 1), got {r}")));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if let Some(k) = self.kernel {
            if k == 0 || k > self.m {
                return Err(Error::InvalidArgument(format!("kernel {k} out of range for m = {}", self.m)));
            }
        }
        if let Some(cfg) = &self.solver {
            cfg.validate()?;
        }
        Ok(())
    }

    fn solve(&self, x: &DenseTensor, omega: &SamplingMask) -> Result<DenseTensor> {
        match self.method {
            Method::Dftl1 => {
                let cfg = self.solver.clone().unwrap_or_else(|| SolverConfig::for_dft(self.m));
                Ok(solve_dftl1(x, omega, &cfg)?.0)
            }
            Method::Cnnm => {
                let k = KernelShape::new(vec![self.kernel.unwrap_or(self.m)], x.shape())?;
                let cfg = self.solver.clone().unwrap_or_else(|| SolverConfig::for_kernel(k.len()));
                Ok(solve_cnnm(x, omega, &k, &cfg)?.0)
            }
        }
    }
}

/// One grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub a: usize,
    pub rho0: f64,
    pub mode: SamplingMode,
    pub trials: usize,
    pub successes: usize,
    #[serde(with = "psnr_serde")]
    pub mean_psnr: f64,
}

impl CellResult {
    /// A cell succeeds when every trial does.
    pub fn success(&self) -> bool {
        self.successes == self.trials
    }
}

/// Phase-transition outcome, cells ordered by `a` then `ρ0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTransitionResult {
    pub spec: PhaseTransitionSpec,
    pub aggregation: String,
    pub cells: Vec<CellResult>,
}

pub fn run_phase_transition(spec: &PhaseTransitionSpec) -> Result<PhaseTransitionResult> {
    spec.validate()?;
    let trials = match spec.mode {
        SamplingMode::Random => spec.trials,
        SamplingMode::DeterministicTail => 1,
    };
    let nr = spec.rho0_values.len();
    let jobs: Vec<(usize, usize)> = (0..spec.a_values.len()).flat_map(|ai| (0..nr).map(move |ri| (ai, ri))).collect();
    let cells = jobs
        .par_iter()
        .map(|&(ai, ri)| {
            let a = spec.a_values[ai];
            let rho0 = spec.rho0_values[ri];
            let x = make_sine_mixture(spec.m, a, true)?;
            let mut successes = 0;
            let mut total = 0.0;
            for t in 0..trials {
                let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                rng.set_stream(((ai * nr + ri) * trials + t) as u64);
                let omega = sampling_mask(spec.m, rho0, spec.mode, &mut rng)?;
                let l = spec.solve(&omega.project(&x)?, &omega)?;
                let psnr = psnr_on_mask(&x, &l, &omega.complement())?;
                if psnr > spec.success_psnr {
                    successes += 1;
                }
                total += psnr;
            }
            Ok(CellResult { a, rho0, mode: spec.mode, trials, successes, mean_psnr: total / trials as f64 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseTransitionResult { spec: spec.clone(), aggregation: "all-trials-succeed".into(), cells })
}

impl PhaseTransitionResult {
    fn row(&self, a: usize) -> Vec<&CellResult> {
        let mut row: Vec<&CellResult> = self.cells.iter().filter(|c| c.a == a).collect();
        row.sort_by(|x, y| x.rho0.total_cmp(&y.rho0));
        row
    }

    /// Smallest `ρ0` from which every larger grid value also succeeds;
    /// `None` when the largest `ρ0` fails.
    pub fn boundary(&self, a: usize) -> Option<f64> {
        let row = self.row(a);
        let mut edge = None;
        for c in row.iter().rev() {
            if !c.success() {
                break;
            }
            edge = Some(c.rho0);
        }
        edge
    }

    /// Smallest succeeding `ρ0`, ignoring failures above it.
    pub fn min_success(&self, a: usize) -> Option<f64> {
        self.row(a).into_iter().find(|c| c.success()).map(|c| c.rho0)
    }

    /// Cells that fail although a smaller `ρ0` in the same row succeeded.
    pub fn rho_violations(&self) -> usize {
        let mut count = 0;
        for &a in &self.spec.a_values {
            let mut seen = false;
            for c in self.row(a) {
                if c.success() {
                    seen = true;
                } else if seen {
                    count += 1;
                }
            }
        }
        count
    }

    /// Tone counts whose boundary lies below that of a smaller tone count.
    pub fn boundary_violations(&self) -> usize {
        let mut a_sorted = self.spec.a_values.clone();
        a_sorted.sort_unstable();
        let level = |a: usize| self.boundary(a).unwrap_or(f64::INFINITY);
        let mut count = 0;
        let mut running = f64::NEG_INFINITY;
        for a in a_sorted {
            let b = level(a);
            if b < running {
                count += 1;
            } else {
                running = b;
            }
        }
        count
    }

    /// CSV with columns `a,rho0,mode,trials,successes,mean_psnr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("a,rho0,mode,trials,successes,mean_psnr\n");
        for c in &self.cells {
            out += &format!(
                "{},{},{},{},{},{}\n",
                c.a,
                c.rho0,
                c.mode.as_str(),
                c.trials,
                c.successes,
                format_psnr(c.mean_psnr)
            );
        }
        out
    }

    /// Run manifest: the spec, the seed scheme and the library version.
    pub fn manifest(&self) -> Result<String> {
        let v = serde_json::json!({
            "spec": self.spec,
            "aggregation": self.aggregation,
            "seed": self.spec.seed,
            "seed_scheme": "ChaCha8 keyed by seed, stream = (a_index * n_rho0 + rho0_index) * trials + trial",
            "version": env!("CARGO_PKG_VERSION"),
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}
