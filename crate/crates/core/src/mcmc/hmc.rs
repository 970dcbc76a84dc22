use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::adapt::{DualAveraging, VarianceEstimator, WindowSchedule};
use super::McmcConfig;
use crate::error::Result;
use crate::scalar::Real;

/// Energy error above which a trajectory counts as divergent.
const DIVERGENCE_THRESHOLD: f64 = 1000.0;

/// Spread of the per-chain jitter applied to the initial point.
const INIT_JITTER: f64 = 0.1;

pub(crate) struct ChainOutput<T> {
    /// Post-warmup positions on the unconstrained scale.
    pub draws: Vec<Vec<T>>,
    pub accept_sum: f64,
    pub divergences: usize,
    pub step_size: f64,
}

struct State<T> {
    q: Vec<T>,
    logp: T,
    grad: Vec<T>,
}

struct Transition {
    accept_prob: f64,
    divergent: bool,
}

struct Chain<'a, T, F> {
    target: &'a F,
    inv_mass: Vec<T>,
    rng: ChaCha8Rng,
    state: State<T>,
}

impl<'a, T, F> Chain<'a, T, F>
where
    T: Real,
    F: Fn(&[T]) -> (T, Vec<T>) + Sync,
{
    fn kinetic(&self, p: &[T]) -> f64 {
        let half = T::lit(0.5);
        p.iter()
            .zip(&self.inv_mass)
            .fold(T::zero(), |acc, (&pi, &m)| acc + half * m * pi * pi)
            .as_f64()
    }

    fn sample_momentum(&mut self) -> Vec<T> {
        let inv_mass = &self.inv_mass;
        let rng = &mut self.rng;
        inv_mass
            .iter()
            .map(|&m| {
                let z: f64 = rng.sample(StandardNormal);
                T::lit(z) / m.sqrt()
            })
            .collect()
    }

    /// Integrates `steps` leapfrog steps from `start`. Returns `None` when the
    /// density becomes non-finite along the way.
    fn leapfrog(&self, start: &State<T>, p: &mut [T], eps: T, steps: usize) -> Option<State<T>> {
        let half = T::lit(0.5) * eps;
        let mut q = start.q.clone();
        let mut grad = start.grad.clone();
        let mut logp = start.logp;
        for _ in 0..steps {
            for (pi, &g) in p.iter_mut().zip(&grad) {
                *pi += half * g;
            }
            for ((qi, &pi), &m) in q.iter_mut().zip(p.iter()).zip(&self.inv_mass) {
                *qi += eps * m * pi;
            }
            let (v, g) = (self.target)(&q);
            if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
                return None;
            }
            logp = v;
            grad = g;
            for (pi, &g) in p.iter_mut().zip(&grad) {
                *pi += half * g;
            }
        }
        Some(State { q, logp, grad })
    }

    fn transition(&mut self, eps: f64, steps: usize) -> Transition {
        let mut p = self.sample_momentum();
        let h0 = -self.state.logp.as_f64() + self.kinetic(&p);
        let proposal = self.leapfrog(&self.state, &mut p, T::lit(eps), steps);
        let Some(proposal) = proposal else {
            return Transition {
                accept_prob: 0.0,
                divergent: true,
            };
        };
        let h1 = -proposal.logp.as_f64() + self.kinetic(&p);
        let delta = h1 - h0;
        if !delta.is_finite() || delta > DIVERGENCE_THRESHOLD {
            return Transition {
                accept_prob: 0.0,
                divergent: true,
            };
        }
        let accept_prob = (-delta).exp().min(1.0);
        let u: f64 = self.rng.random();
        if u < accept_prob {
            self.state = proposal;
        }
        Transition {
            accept_prob,
            divergent: false,
        }
    }

    /// Doubles or halves the step size until a single leapfrog step crosses an
    /// acceptance probability of one half.
    fn initial_step_size(&mut self, start: f64) -> f64 {
        let mut eps = start;
        let accept = |chain: &mut Self, eps: f64| -> f64 {
            let mut p = chain.sample_momentum();
            let h0 = -chain.state.logp.as_f64() + chain.kinetic(&p);
            match chain.leapfrog(&chain.state, &mut p, T::lit(eps), 1) {
                Some(s) => {
                    let d = -s.logp.as_f64() + chain.kinetic(&p) - h0;
                    if d.is_finite() {
                        (-d).exp().min(1.0)
                    } else {
                        0.0
                    }
                }
                None => 0.0,
            }
        };
        let a0 = accept(self, eps);
        let direction = if a0 > 0.5 { 1.0 } else { -1.0 };
        for _ in 0..60 {
            let a = accept(self, eps);
            let keep_going = if direction > 0.0 { a > 0.5 } else { a <= 0.5 };
            if !keep_going {
                break;
            }
            let next = eps * 2f64.powf(direction);
            if !(1e-10..=1e3).contains(&next) {
                break;
            }
            eps = next;
        }
        eps
    }
}

pub(crate) fn run_chain<T, F>(
    target: &F,
    init: &[T],
    cfg: &McmcConfig,
    seed: u64,
) -> Result<ChainOutput<T>>
where
    T: Real,
    F: Fn(&[T]) -> (T, Vec<T>) + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = init.len();

    // jittered start; fall back to the supplied point if the jitter lands badly
    let jittered: Vec<T> = init
        .iter()
        .map(|&v| v + T::lit(rng.random_range(-INIT_JITTER..INIT_JITTER)))
        .collect();
    let (mut q, (mut logp, mut grad)) = (jittered.clone(), target(&jittered));
    if !logp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        q = init.to_vec();
        (logp, grad) = target(init);
    }

    let mut chain = Chain {
        target,
        inv_mass: vec![T::one(); dim],
        rng,
        state: State { q, logp, grad },
    };

    let schedule = WindowSchedule::new(cfg.warmup);
    let mut eps = chain.initial_step_size(0.1);
    let mut da = DualAveraging::new(cfg.target_accept, eps);
    let mut var_est = VarianceEstimator::new(dim);

    let mut draws = Vec::with_capacity(cfg.draws);
    let mut accept_sum = 0.0;
    let mut divergences = 0;

    for iter in 0..cfg.warmup + cfg.draws {
        let steps = chain.rng.random_range(1..=cfg.max_leapfrog);
        let warm = iter < cfg.warmup;
        let t = chain.transition(eps, steps);
        if warm {
            da.update(t.accept_prob);
            eps = da.current();
            if schedule.in_window(iter) {
                let q: Vec<f64> = chain.state.q.iter().map(|v| v.as_f64()).collect();
                var_est.add(&q);
            }
            if schedule.closes_at(iter) {
                if let Some(var) = var_est.regularized() {
                    chain.inv_mass = var.into_iter().map(T::lit).collect();
                }
                var_est.reset();
                eps = chain.initial_step_size(eps);
                da.restart(eps);
            }
            if iter + 1 == cfg.warmup {
                eps = da.final_step_size();
            }
        } else {
            accept_sum += t.accept_prob;
            if t.divergent {
                divergences += 1;
            }
            draws.push(chain.state.q.clone());
        }
    }

    Ok(ChainOutput {
        draws,
        accept_sum,
        divergences,
        step_size: eps,
    })
}
