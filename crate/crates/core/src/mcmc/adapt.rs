//! Warmup adaptation: dual-averaging step size and a windowed diagonal metric.

/// Dual averaging of the log step size toward a target acceptance rate.
#[derive(Clone, Debug)]
pub(crate) struct DualAveraging {
    target: f64,
    mu: f64,
    log_eps: f64,
    log_eps_bar: f64,
    h_bar: f64,
    count: f64,
}

const GAMMA: f64 = 0.05;
const T0: f64 = 10.0;
const KAPPA: f64 = 0.75;

impl DualAveraging {
    pub(crate) fn new(target: f64, step_size: f64) -> Self {
        let mut da = Self {
            target,
            mu: 0.0,
            log_eps: 0.0,
            log_eps_bar: 0.0,
            h_bar: 0.0,
            count: 0.0,
        };
        da.restart(step_size);
        da
    }

    pub(crate) fn restart(&mut self, step_size: f64) {
        self.mu = (10.0 * step_size).ln();
        self.log_eps = step_size.ln();
        self.log_eps_bar = 0.0;
        self.h_bar = 0.0;
        self.count = 0.0;
    }

    pub(crate) fn update(&mut self, accept_prob: f64) {
        self.count += 1.0;
        let eta = 1.0 / (self.count + T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_prob);
        self.log_eps = self.mu - self.count.sqrt() / GAMMA * self.h_bar;
        let w = self.count.powf(-KAPPA);
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar;
    }

    pub(crate) fn current(&self) -> f64 {
        self.log_eps.exp()
    }

    pub(crate) fn final_step_size(&self) -> f64 {
        if self.count == 0.0 {
            self.current()
        } else {
            self.log_eps_bar.exp()
        }
    }
}

/// Warmup schedule with an initial fast buffer, doubling slow windows for the
/// metric, and a terminal fast buffer.
#[derive(Clone, Debug)]
pub(crate) struct WindowSchedule {
    /// Iteration indices (exclusive ends) at which a metric window closes.
    ends: Vec<usize>,
    starts: Vec<usize>,
}

impl WindowSchedule {
    pub(crate) fn new(warmup: usize) -> Self {
        if warmup < 20 {
            return Self { ends: vec![], starts: vec![] };
        }
        let (init, term, base) = if warmup < 150 {
            let init = (0.15 * warmup as f64) as usize;
            let term = (0.1 * warmup as f64) as usize;
            (init, term, warmup - init - term)
        } else {
            (75, 50, 25)
        };
        let last = warmup - term;
        let mut starts = Vec::new();
        let mut ends = Vec::new();
        let mut start = init;
        let mut size = base;
        while start < last {
            let mut end = start + size;
            // fold a too-short remainder into the current window
            if end + 2 * size > last {
                end = last;
            }
            starts.push(start);
            ends.push(end);
            start = end;
            size *= 2;
        }
        Self { ends, starts }
    }

    pub(crate) fn in_window(&self, iter: usize) -> bool {
        self.starts
            .iter()
            .zip(&self.ends)
            .any(|(&s, &e)| iter >= s && iter < e)
    }

    pub(crate) fn closes_at(&self, iter: usize) -> bool {
        self.ends.iter().any(|&e| e == iter + 1)
    }
}

/// Running variance accumulator (Welford).
#[derive(Clone, Debug)]
pub(crate) struct VarianceEstimator {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl VarianceEstimator {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub(crate) fn add(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / self.n;
            *s += delta * (v - *m);
        }
    }

    /// Regularized variance, shrunk toward 1e-3.
    pub(crate) fn regularized(&self) -> Option<Vec<f64>> {
        if self.n < 3.0 {
            return None;
        }
        let n = self.n;
        Some(
            self.m2
                .iter()
                .map(|s| (n / (n + 5.0)) * (s / (n - 1.0)) + 1e-3 * (5.0 / (n + 5.0)))
                .collect(),
        )
    }

    pub(crate) fn reset(&mut self) {
        *self = Self::new(self.mean.len());
    }
}
