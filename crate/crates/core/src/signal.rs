//! Exogenous series fed to the predictor.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::sign::sgn;

/// `y(t) = 0.7 y(t-1) - 0.5 y(t-2) - 0.2 y(t-3) + xi(t)`, the stationary benchmark.
pub const BENCHMARK_AR3: [f64; 3] = [0.7, -0.5, -0.2];

/// The process that replaces [`BENCHMARK_AR3`] in the regime-switch experiment.
pub const SWITCHED_AR3: [f64; 3] = [-0.3, -0.2, 0.6];

/// Default switch time of the regime-switch experiment.
pub const DEFAULT_SWITCH_T: usize = 1500;

/// A producer of real-valued samples, consumed one at a time.
pub trait SignalSource {
    /// Next sample, or `None` once the source is exhausted.
    fn next_sample(&mut self) -> Option<f64>;

    /// Mean of the next sample conditional on everything emitted so far, when
    /// the generating process is known.
    fn conditional_mean(&self) -> Option<f64> {
        None
    }

    fn describe(&self) -> String;
}

impl<S: SignalSource + ?Sized> SignalSource for &mut S {
    fn next_sample(&mut self) -> Option<f64> {
        (**self).next_sample()
    }

    fn conditional_mean(&self) -> Option<f64> {
        (**self).conditional_mean()
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<S: SignalSource + ?Sized> SignalSource for Box<S> {
    fn next_sample(&mut self) -> Option<f64> {
        (**self).next_sample()
    }

    fn conditional_mean(&self) -> Option<f64> {
        (**self).conditional_mean()
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Gaussian autoregressive process `y(t) = sum_i c_i y(t-i) + sd * xi(t)`.
#[derive(Debug, Clone)]
pub struct ArProcess {
    coeffs: Vec<f64>,
    noise_sd: f64,
    /// Last `p` values, most recent first.
    state: Vec<f64>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl ArProcess {
    /// Zero initial state.
    pub fn new(coeffs: &[f64], noise_sd: f64, seed: u64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::config("coeffs", "AR order must be at least 1"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("coeffs", "coefficients must be finite"));
        }
        if !(noise_sd.is_finite() && noise_sd >= 0.0) {
            return Err(Error::config("noise_sd", format!("must be >= 0, got {noise_sd}")));
        }
        Ok(ArProcess {
            coeffs: coeffs.to_vec(),
            noise_sd,
            state: vec![0.0; coeffs.len()],
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// The stationary benchmark AR(3) with unit noise.
    pub fn benchmark(seed: u64) -> Self {
        ArProcess::new(&BENCHMARK_AR3, 1.0, seed).expect("valid constants")
    }

    /// Replaces the past values (most recent first). Shorter input is zero padded.
    pub fn with_state(mut self, past: &[f64]) -> Self {
        self.set_state(past);
        self
    }

    fn set_state(&mut self, past: &[f64]) {
        for (i, v) in self.state.iter_mut().enumerate() {
            *v = past.get(i).copied().unwrap_or(0.0);
        }
    }

    /// Generates and discards `n` samples.
    pub fn with_burn_in(mut self, n: usize) -> Self {
        for _ in 0..n {
            self.step();
        }
        self
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    fn mean(&self) -> f64 {
        self.coeffs.iter().zip(&self.state).map(|(c, y)| c * y).sum()
    }

    pub fn step(&mut self) -> f64 {
        let xi: f64 = self.rng.sample(StandardNormal);
        let y = self.mean() + self.noise_sd * xi;
        self.state.rotate_right(1);
        self.state[0] = y;
        y
    }

    /// The next `len` samples.
    pub fn generate(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.step()).collect()
    }
}

impl SignalSource for ArProcess {
    fn next_sample(&mut self) -> Option<f64> {
        Some(self.step())
    }

    fn conditional_mean(&self) -> Option<f64> {
        Some(self.mean())
    }

    fn describe(&self) -> String {
        format!(
            "ar coeffs={:?} noise_sd={} seed={}",
            self.coeffs, self.noise_sd, self.seed
        )
    }
}

/// Spectral radius of the companion matrix of `y(t) = sum_i c_i y(t-i)`.
///
/// Uses repeated squaring, `rho = lim ||C^k||^(1/k)`, with the matrix rescaled
/// after each squaring. Stops when two successive estimates agree to a
/// relative 1e-9.
pub fn spectral_radius(coeffs: &[f64]) -> f64 {
    let p = coeffs.len();
    if p == 0 || coeffs.iter().all(|&c| c == 0.0) {
        return 0.0;
    }
    let mut mat = vec![0.0; p * p];
    mat[..p].copy_from_slice(coeffs);
    for i in 1..p {
        mat[i * p + i - 1] = 1.0;
    }
    let norm = |m: &[f64]| m.iter().map(|x| x * x).sum::<f64>().sqrt();

    // mat holds C^(2^j) / exp(log_scale)
    let mut log_scale = 0.0f64;
    let mut power = 1.0f64;
    let mut estimate = f64::NAN;
    for _ in 0..64 {
        let n = norm(&mat);
        if n == 0.0 {
            return 0.0;
        }
        let next = ((log_scale + n.ln()) / power).exp();
        if (next - estimate).abs() <= 1e-9 * next {
            return next;
        }
        estimate = next;
        for x in &mut mat {
            *x /= n;
        }
        log_scale += n.ln();
        let mut sq = vec![0.0; p * p];
        for i in 0..p {
            for k in 0..p {
                let a = mat[i * p + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..p {
                    sq[i * p + j] += a * mat[k * p + j];
                }
            }
        }
        mat = sq;
        log_scale *= 2.0;
        power *= 2.0;
    }
    estimate
}

/// True iff every pole of the recursion lies strictly inside the unit circle.
pub fn ar_is_stable(coeffs: &[f64]) -> bool {
    spectral_radius(coeffs) < 1.0
}

/// One AR process up to `switch_t` samples, another afterwards. The second
/// process continues from the first one's last values.
#[derive(Debug, Clone)]
pub struct RegimeSwitchSource {
    first: ArProcess,
    second: ArProcess,
    switch_t: usize,
    emitted: usize,
}

impl RegimeSwitchSource {
    pub fn new(first: ArProcess, second: ArProcess, switch_t: usize) -> Self {
        RegimeSwitchSource {
            first,
            second,
            switch_t,
            emitted: 0,
        }
    }

    /// Benchmark AR(3) switching to [`SWITCHED_AR3`] after [`DEFAULT_SWITCH_T`] samples.
    /// The two noise streams are derived from `seed`.
    pub fn benchmark(seed: u64) -> Self {
        RegimeSwitchSource::benchmark_at(seed, DEFAULT_SWITCH_T)
    }

    pub fn benchmark_at(seed: u64, switch_t: usize) -> Self {
        RegimeSwitchSource::new(
            ArProcess::benchmark(seed),
            ArProcess::new(&SWITCHED_AR3, 1.0, seed ^ 0x5EED_0F5E_C04D).expect("valid constants"),
            switch_t,
        )
    }

    pub fn switch_t(&self) -> usize {
        self.switch_t
    }

    fn active(&self) -> &ArProcess {
        if self.emitted < self.switch_t {
            &self.first
        } else {
            &self.second
        }
    }
}

impl SignalSource for RegimeSwitchSource {
    fn next_sample(&mut self) -> Option<f64> {
        if self.emitted == self.switch_t {
            let past = self.first.state().to_vec();
            self.second.set_state(&past);
        }
        let y = if self.emitted < self.switch_t {
            self.first.step()
        } else {
            self.second.step()
        };
        self.emitted += 1;
        Some(y)
    }

    fn conditional_mean(&self) -> Option<f64> {
        if self.emitted == self.switch_t {
            let p = self.second.order().min(self.first.order());
            let past = &self.first.state()[..p];
            Some(self.second.coeffs().iter().zip(past).map(|(c, y)| c * y).sum())
        } else {
            Some(self.active().mean())
        }
    }

    fn describe(&self) -> String {
        format!(
            "regime switch at t={} from [{}] to [{}]",
            self.switch_t,
            self.first.describe(),
            self.second.describe()
        )
    }
}

/// Independent Gaussian samples.
#[derive(Debug, Clone)]
pub struct IidNoise {
    seed: u64,
    rng: ChaCha8Rng,
}

impl IidNoise {
    pub fn new(seed: u64) -> Self {
        IidNoise {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl SignalSource for IidNoise {
    fn next_sample(&mut self) -> Option<f64> {
        Some(self.rng.sample(StandardNormal))
    }

    fn conditional_mean(&self) -> Option<f64> {
        Some(0.0)
    }

    fn describe(&self) -> String {
        format!("iid gaussian seed={}", self.seed)
    }
}

/// A fixed pattern repeated forever.
#[derive(Debug, Clone)]
pub struct Periodic {
    pattern: Vec<f64>,
    pos: usize,
}

impl Periodic {
    pub fn new(pattern: Vec<f64>) -> Self {
        assert!(!pattern.is_empty(), "empty pattern");
        Periodic { pattern, pos: 0 }
    }

    /// +1, -1, +1, -1, ...
    pub fn alternating() -> Self {
        Periodic::new(vec![1.0, -1.0])
    }
}

impl SignalSource for Periodic {
    fn next_sample(&mut self) -> Option<f64> {
        let y = self.pattern[self.pos % self.pattern.len()];
        self.pos += 1;
        Some(y)
    }

    fn conditional_mean(&self) -> Option<f64> {
        Some(self.pattern[self.pos % self.pattern.len()])
    }

    fn describe(&self) -> String {
        format!("periodic {:?}", self.pattern)
    }
}

/// A finite recorded series, optionally with known AR coefficients and
/// pre-sample state so the conditional mean is available.
#[derive(Debug, Clone)]
pub struct Replay {
    values: Vec<f64>,
    pos: usize,
    model: Option<(Vec<f64>, Vec<f64>)>,
    label: String,
}

impl Replay {
    pub fn new(values: Vec<f64>) -> Self {
        Replay {
            values,
            pos: 0,
            model: None,
            label: "recorded series".into(),
        }
    }

    /// `past` holds the values preceding `values[0]`, most recent first.
    pub fn with_ar_model(mut self, coeffs: &[f64], past: &[f64]) -> Self {
        self.model = Some((coeffs.to_vec(), past.to_vec()));
        self
    }

    pub fn labelled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl SignalSource for Replay {
    fn next_sample(&mut self) -> Option<f64> {
        let y = self.values.get(self.pos).copied();
        if y.is_some() {
            self.pos += 1;
        }
        y
    }

    fn conditional_mean(&self) -> Option<f64> {
        let (coeffs, past) = self.model.as_ref()?;
        let mean = coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                // value i+1 steps back from the next sample
                let y = if i < self.pos {
                    self.values[self.pos - 1 - i]
                } else {
                    past.get(i - self.pos).copied().unwrap_or(0.0)
                };
                c * y
            })
            .sum();
        Some(mean)
    }

    fn describe(&self) -> String {
        format!("{} ({} samples)", self.label, self.values.len())
    }
}

/// Simple returns of a price series and their signs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub returns: Vec<f64>,
    pub signs: Vec<i8>,
    pub instrument: String,
    pub note: String,
}

impl ReturnSeries {
    /// `r(t) = (p(t) - p(t-1)) / p(t-1)`. Prices must be positive and finite.
    pub fn from_prices(prices: &[f64], instrument: impl Into<String>) -> Result<Self> {
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Degenerate(format!(
                "price {i} is {}, prices must be positive",
                prices[i]
            )));
        }
        let returns: Vec<f64> = prices.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
        let signs = returns.iter().map(|&r| sgn(r)).collect();
        Ok(ReturnSeries {
            returns,
            signs,
            instrument: instrument.into(),
            note: "simple returns".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn nonzero_count(&self) -> usize {
        self.signs.iter().filter(|&&s| s != 0).count()
    }

    pub fn source(&self) -> Replay {
        Replay::new(self.returns.clone()).labelled(format!("returns of {}", self.instrument))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceCsvOptions {
    /// Header name of the price column.
    pub column: String,
    pub delimiter: u8,
    /// Memory length the series will be used with; at least `m + 2` prices are required.
    pub memory: u32,
}

impl Default for PriceCsvOptions {
    fn default() -> Self {
        PriceCsvOptions {
            column: "close".into(),
            delimiter: b',',
            memory: 1,
        }
    }
}

/// Reads one price per row (chronological, header required) and converts to returns.
pub fn load_prices(path: &Path, opts: &PriceCsvOptions) -> Result<ReturnSeries> {
    let parse_err = |line: u64, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .delimiter(opts.delimiter)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(1, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == opts.column)
        .ok_or_else(|| {
            parse_err(
                1,
                format!(
                    "no column named `{}` (found: {})",
                    opts.column,
                    headers.iter().collect::<Vec<_>>().join(", ")
                ),
            )
        })?;

    let mut prices = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let raw = record.get(col).map(str::trim).unwrap_or("");
        if raw.is_empty() {
            return Err(parse_err(line, format!("missing price in row {line}")));
        }
        let price: f64 = raw
            .parse()
            .map_err(|_| parse_err(line, format!("cannot parse price `{raw}` in row {line}")))?;
        if !(price.is_finite() && price > 0.0) {
            return Err(parse_err(
                line,
                format!("non-positive price {price} in row {line}"),
            ));
        }
        prices.push(price);
    }

    let needed = opts.memory as usize + 2;
    if prices.len() < needed {
        return Err(Error::InsufficientData(format!(
            "{} has {} prices, need at least {needed} for m={}",
            path.display(),
            prices.len(),
            opts.memory
        )));
    }
    let instrument = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut series = ReturnSeries::from_prices(&prices, instrument)?;
    series.note = format!("simple returns of column `{}`", opts.column);
    Ok(series)
}
