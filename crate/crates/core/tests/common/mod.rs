#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gprd_core::{Data, TakeUpData};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense matrix as nested rows; the oracle side never touches the crate's
/// linear algebra.
pub type Dense = Vec<Vec<f64>>;

/// Solves `A X = B` by Gauss–Jordan elimination with partial pivoting and
/// returns `(X, log|det A|)`.
pub fn gauss_solve(a: &Dense, b: &Dense) -> (Dense, f64) {
    let n = a.len();
    let m = b[0].len();
    let mut aug: Dense = (0..n)
        .map(|i| a[i].iter().chain(&b[i]).copied().collect())
        .collect();
    let mut log_det = 0.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| aug[i][col].abs().partial_cmp(&aug[j][col].abs()).unwrap())
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        log_det += p.abs().ln();
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..n + m {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    (aug.into_iter().map(|row| row[n..].to_vec()).collect(), log_det)
}

pub fn solve_vec(a: &Dense, b: &[f64]) -> Vec<f64> {
    let (x, _) = gauss_solve(a, &b.iter().map(|&v| vec![v]).collect());
    x.into_iter().map(|r| r[0]).collect()
}

pub fn log_det(a: &Dense) -> f64 {
    gauss_solve(a, &vec![vec![0.0]; a.len()]).1
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower Cholesky factor by the textbook recurrence.
pub fn cholesky(a: &Dense) -> Dense {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

/// Explicit composite kernel with Σ = `poly_var`·I.
pub fn kernel(x: f64, xp: f64, l: f64, alpha2: f64, poly_var: f64) -> f64 {
    poly_var * (1.0 + x * xp + x * x * xp * xp) + alpha2 * (-(x - xp).powi(2) / (2.0 * l * l)).exp()
}

pub fn log_normal_pdf(x: f64, s: f64) -> f64 {
    -0.5 * (x / s).powi(2) - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Fourth-order central difference of `f` in coordinate `k`.
pub fn five_point(f: impl Fn(&[f64]) -> f64, u: &[f64], k: usize, h: f64) -> f64 {
    let at = |t: f64| {
        let mut v = u.to_vec();
        v[k] += t;
        f(&v)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

/// Sorted distinct inputs in `[lo, hi]`, at least `gap` apart.
pub fn spread_inputs(rng: &mut impl Rng, n: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    loop {
        let mut xs: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if xs.windows(2).all(|w| w[1] - w[0] >= gap) {
            return xs;
        }
    }
}

/// Effective sample size from the initial positive sequence of
/// autocorrelations, chains pooled.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let all: Vec<f64> = chains.iter().flatten().copied().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / all.len() as f64;
    let rho = |lag: usize| {
        let mut acc = 0.0;
        for c in chains {
            for t in 0..n - lag {
                acc += (c[t] - mean) * (c[t + lag] - mean);
            }
        }
        acc / (m * (n - lag)) as f64 / var
    };
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = rho(lag) + rho(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    (m * n) as f64 / (1.0 + 2.0 * sum).max(1e-12)
}

pub struct Instance {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub l: f64,
    pub alpha2: f64,
    pub sigma2: f64,
    pub poly_var: f64,
    pub xstar: f64,
}

pub fn instance(seed: u64) -> Instance {
    let mut r = rng(seed);
    let n = r.random_range(1..=10);
    let xs = spread_inputs(&mut r, n, -1.0, 1.0, 0.02);
    Instance {
        ys: xs.iter().map(|x| (3.0 * x).sin() + 0.3 * r.random_range(-1.0..1.0)).collect(),
        xs,
        l: r.random_range(0.2..1.5),
        alpha2: r.random_range(0.1..2.0f64).powi(2),
        sigma2: r.random_range(0.05..0.5f64).powi(2),
        poly_var: if seed % 2 == 0 { 1e4 } else { r.random_range(0.5..10.0) },
        xstar: r.random_range(-1.2..1.2),
    }
}

/// Conditions the joint Gaussian of `(y, f(x*))` with the mean coefficients
/// kept explicit: `f = hᵀβ + g`, `β ~ N(0, Σ)`, `g` the squared-exponential
/// process. This never forms the badly scaled sum `HᵀΣH + K_se`.
pub fn joint_conditioning(t: &Instance) -> (f64, f64) {
    let n = t.xs.len();
    let se = |a: f64, b: f64| kernel(a, b, t.l, t.alpha2, 0.0);
    let h = |x: f64| vec![1.0, x, x * x];
    let ky: Dense = (0..n)
        .map(|i| (0..n).map(|j| se(t.xs[i], t.xs[j]) + if i == j { t.sigma2 } else { 0.0 }).collect())
        .collect();
    let ks: Vec<f64> = t.xs.iter().map(|&x| se(t.xstar, x)).collect();
    let hmat: Dense = t.xs.iter().map(|&x| h(x)).collect(); // N × 3
    let ky_y = solve_vec(&ky, &t.ys);
    let ky_ks = solve_vec(&ky, &ks);
    let (ky_h, _) = gauss_solve(&ky, &hmat); // N × 3

    // A = Σ⁻¹ + H K⁻¹ Hᵀ (3 × 3)
    let a: Dense = (0..3)
        .map(|p| {
            (0..3)
                .map(|q| {
                    let s: f64 = (0..n).map(|i| hmat[i][p] * ky_h[i][q]).sum();
                    s + if p == q { 1.0 / t.poly_var } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let hy: Vec<f64> = (0..3).map(|p| (0..n).map(|i| hmat[i][p] * ky_y[i]).sum()).collect();
    let beta = solve_vec(&a, &hy);
    let hs = h(t.xstar);
    let r: Vec<f64> = (0..3).map(|p| hs[p] - (0..n).map(|i| hmat[i][p] * ky_ks[i]).sum::<f64>()).collect();
    let mean = dot(&ks, &ky_y) + dot(&r, &beta);
    let var = se(t.xstar, t.xstar) - dot(&ks, &ky_ks) + dot(&r, &solve_vec(&a, &r));
    (mean, var)
}

/// Inputs per instance in the gradient checks.
pub const N: usize = 6;

pub fn regression_data(seed: u64) -> Data {
    let mut r = rng(seed);
    let xs = spread_inputs(&mut r, N, -1.0, 1.0, 0.05);
    let ys = xs.iter().map(|x| 0.5 * x + x * x - 0.2 + 0.2 * r.random_range(-1.0..1.0)).collect();
    Data::new(xs, ys).unwrap()
}

pub fn take_up_data(seed: u64) -> TakeUpData {
    let mut r = rng(seed);
    let xs = spread_inputs(&mut r, N, 0.0, 1.0, 0.03);
    let ds = xs.iter().map(|_| if r.random_bool(0.7) { 1.0 } else { -1.0 }).collect();
    TakeUpData::new(xs, ds).unwrap()
}

pub fn log_half_normal(x: f64, s: f64) -> f64 {
    log_normal_pdf(x, s) + std::f64::consts::LN_2
}

/// Independent log posterior of the regression models; `u` is
/// `[log l, log α, log σ, (λ₀, λ₁)]`.
pub fn regression_oracle(data: &Data, u: &[f64]) -> f64 {
    let (l, a, s) = (u[0].exp(), u[1].exp(), u[2].exp());
    let inputs: Vec<f64> = match u.len() {
        3 => data.xs.clone(),
        _ => data.xs.iter().map(|x| (u[3] + u[4] * x).tanh()).collect(),
    };
    let n = inputs.len();
    let cov: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| kernel(inputs[i], inputs[j], l, a * a, 1e4) + if i == j { s * s } else { 0.0 })
                .collect()
        })
        .collect();
    let w = solve_vec(&cov, &data.ys);
    let lml = -0.5 * dot(&data.ys, &w) - 0.5 * log_det(&cov) - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let mut prior = log_half_normal(l, 5.0) + log_half_normal(a, 5.0) + log_half_normal(s, 5.0) + u[0] + u[1] + u[2];
    if u.len() == 5 {
        prior += log_normal_pdf(u[3], 5.0) + log_normal_pdf(u[4], 5.0);
    }
    lml + prior
}

/// Independent whitened classification log posterior, `u = [log l, log α, γ, z]`.
pub fn classification_oracle(data: &TakeUpData, u: &[f64], poly_var: f64) -> f64 {
    let (l, a, gamma) = (u[0].exp(), u[1].exp(), u[2]);
    let n = data.len();
    let k: Dense = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| kernel(data.xs[i], data.xs[j], l, a * a, poly_var) + if i == j { 1e-6 } else { 0.0 })
                .collect()
        })
        .collect();
    let lower = cholesky(&k);
    let z = &u[3..];
    let f: Vec<f64> = (0..n).map(|i| dot(&lower[i][..=i], &z[..=i])).collect();
    let lik: f64 = (0..n)
        .map(|i| {
            let m = data.ds[i] * (gamma + f[i]);
            -(1.0 + (-m).exp()).ln()
        })
        .sum();
    lik - 0.5 * dot(z, z) - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
        + log_half_normal(l, 5.0)
        + u[0]
        + log_half_normal(a, 5.0)
        + u[1]
        + log_normal_pdf(gamma, 5.0)
}

/// Largest relative gap between `grad` and a five-point difference of `f`.
pub fn gradient_gap(f: impl Fn(&[f64]) -> f64, grad: &[f64], u: &[f64], step: impl Fn(usize) -> f64) -> f64 {
    (0..u.len())
        .map(|k| (grad[k] - five_point(&f, u, k, step(k))).abs() / grad[k].abs().max(1.0))
        .fold(0.0, f64::max)
}
