//! Negative-binomial regression used to fix the dispersions (and seed the
//! regression weights) before training.

use rayon::prelude::*;

use super::nb::{nb_nll, nb_nll_dalpha, nb_nll_dmu};
use super::{CountModelError, Covariates};
use crate::diffengine::{sigmoid, softplus, AdamConfig, AdamState, Matrix};
use crate::library::CountRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channel {
    Target,
    Ntc,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Target => "target",
            Channel::Ntc => "ntc",
        }
    }

    fn count(self, r: &CountRecord) -> f64 {
        match self {
            Channel::Target => r.c_target as f64,
            Channel::Ntc => r.c_ntc as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionConfig {
    pub max_iter: usize,
    pub lr: f64,
    /// Converged once the largest gradient component of the mean NLL falls below this.
    pub grad_tol: f64,
    pub min_tags: usize,
    pub covariates: Covariates,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self { max_iter: 20_000, lr: 0.05, grad_tol: 1e-6, min_tags: 100, covariates: Covariates::Log1p }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionFit {
    pub alpha: f64,
    /// `[β_dls, β_prom, β_c]` on the raw (untransformed-scale) covariates.
    pub beta: [f64; 3],
    /// Mean NLL at the optimum.
    pub nll: f64,
    pub iterations: usize,
}

const CHUNK: usize = 2048;
/// Adam iterations before switching to Newton steps.
const ADAM_ITERS: usize = 2000;

struct Design {
    /// standardized covariates
    z: Vec<[f64; 2]>,
    c: Vec<f64>,
    mean: [f64; 2],
    sd: [f64; 2],
}

impl Design {
    fn new(records: &[CountRecord], channel: Channel, cov: Covariates) -> Self {
        let x: Vec<[f64; 2]> = records.iter().map(|r| cov.transform(r)).collect();
        let n = x.len() as f64;
        let mut mean = [0.0; 2];
        let mut sd = [0.0; 2];
        for j in 0..2 {
            mean[j] = x.iter().map(|v| v[j]).sum::<f64>() / n;
            sd[j] = (x.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt();
        }
        let z = x
            .iter()
            .map(|v| {
                let mut o = [0.0; 2];
                for j in 0..2 {
                    o[j] = if sd[j] > 0.0 { (v[j] - mean[j]) / sd[j] } else { 0.0 };
                }
                o
            })
            .collect();
        Self { z, c: records.iter().map(|r| channel.count(r)).collect(), mean, sd }
    }

    /// Mean NLL and its gradient w.r.t. `[w_dls, w_prom, w_c, ln α]` in standardized space.
    fn eval(&self, theta: &[f64; 4]) -> Result<(f64, [f64; 4]), CountModelError> {
        let alpha = theta[3].exp();
        let partials: Vec<Result<(f64, [f64; 4]), CountModelError>> = self
            .z
            .par_chunks(CHUNK)
            .zip(self.c.par_chunks(CHUNK))
            .map(|(zs, cs)| {
                let mut loss = 0.0;
                let mut g = [0.0; 4];
                for (z, &c) in zs.iter().zip(cs) {
                    let pre = theta[0] * z[0] + theta[1] * z[1] + theta[2];
                    let mu = softplus(pre);
                    loss += nb_nll(c, mu, alpha)?;
                    let dpre = nb_nll_dmu(c, mu, alpha) * sigmoid(pre);
                    g[0] += dpre * z[0];
                    g[1] += dpre * z[1];
                    g[2] += dpre;
                    g[3] += nb_nll_dalpha(c, mu, alpha) * alpha;
                }
                Ok((loss, g))
            })
            .collect();
        let n = self.c.len() as f64;
        let mut loss = 0.0;
        let mut g = [0.0; 4];
        for p in partials {
            let (l, gi) = p?;
            loss += l;
            for j in 0..4 {
                g[j] += gi[j];
            }
        }
        Ok((loss / n, g.map(|v| v / n)))
    }

    fn raw_beta(&self, theta: &[f64; 4]) -> [f64; 3] {
        let mut beta = [0.0, 0.0, theta[2]];
        for j in 0..2 {
            if self.sd[j] > 0.0 {
                beta[j] = theta[j] / self.sd[j];
                beta[2] -= beta[j] * self.mean[j];
            }
        }
        beta
    }
}

fn inverse_softplus(y: f64) -> f64 {
    y + (-(-y).exp_m1()).ln()
}

/// Solves the 4×4 system `a x = b` by Gaussian elimination with partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn max_abs(g: &[f64; 4]) -> f64 {
    g.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Maximum-likelihood fit of `c ~ NB(softplus(β·x), α)` over `(β, ln α)`.
/// Adam (with the step size halved whenever the loss stops improving)
/// brings the iterates near the optimum; damped Newton steps with a
/// finite-difference Hessian then drive the gradient to `grad_tol`.
pub fn fit_dispersion(records: &[CountRecord], channel: Channel, cfg: &DispersionConfig) -> Result<DispersionFit, CountModelError> {
    if records.len() < cfg.min_tags {
        return Err(CountModelError::TooFewTags { needed: cfg.min_tags, found: records.len() });
    }
    let d = Design::new(records, channel, cfg.covariates);
    let n = d.c.len() as f64;
    let mean = d.c.iter().sum::<f64>() / n;
    let var = d.c.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n;
    let alpha0 = if mean > 0.0 { ((var - mean) / (mean * mean)).clamp(1e-3, 10.0) } else { 1.0 };
    let mut theta = [0.0, 0.0, inverse_softplus(mean.max(1e-3)), alpha0.ln()];
    let done = |theta: &[f64; 4], loss: f64, it: usize| DispersionFit {
        alpha: theta[3].exp(),
        beta: d.raw_beta(theta),
        nll: loss,
        iterations: it,
    };

    let mut lr = cfg.lr;
    let mut adam = AdamState::new(AdamConfig { lr, ..AdamConfig::default() }, &[Matrix::zeros(1, 4)]);
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut it = 0;
    let (mut loss, mut g) = d.eval(&theta)?;
    while it < cfg.max_iter {
        if max_abs(&g) < cfg.grad_tol {
            return Ok(done(&theta, loss, it));
        }
        if max_abs(&g) < 1e-3 || it >= ADAM_ITERS {
            break;
        }
        if loss < best - 1e-15 * best.abs() {
            best = loss;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= 20 {
                lr *= 0.5;
                adam.config.lr = lr;
                since_best = 0;
            }
        }
        let mut p = [Matrix::from_vec(1, 4, theta.to_vec())];
        adam.step(&mut p, &[Matrix::from_vec(1, 4, g.to_vec())])?;
        theta.copy_from_slice(p[0].as_slice());
        (loss, g) = d.eval(&theta)?;
        it += 1;
    }

    let mut damping = 1e-6;
    while it < cfg.max_iter {
        if max_abs(&g) < cfg.grad_tol {
            return Ok(done(&theta, loss, it));
        }
        let h = 1e-5;
        let mut hess = [[0.0; 4]; 4];
        for k in 0..4 {
            let mut up = theta;
            up[k] += h;
            let mut dn = theta;
            dn[k] -= h;
            let (gu, gd) = (d.eval(&up)?.1, d.eval(&dn)?.1);
            for j in 0..4 {
                hess[j][k] = (gu[j] - gd[j]) / (2.0 * h);
            }
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = hess;
            for j in 0..4 {
                for k in 0..j {
                    let m = 0.5 * (a[j][k] + a[k][j]);
                    a[j][k] = m;
                    a[k][j] = m;
                }
                a[j][j] += damping * (1.0 + hess[j][j].abs());
            }
            if let Some(step) = solve4(a, g.map(|v| -v)) {
                let mut cand = theta;
                for j in 0..4 {
                    cand[j] += step[j];
                }
                if let Ok((l, gc)) = d.eval(&cand) {
                    if l <= loss || max_abs(&gc) < max_abs(&g) && l <= loss + 1e-12 * loss.abs() {
                        theta = cand;
                        (loss, g) = (l, gc);
                        damping = (damping * 0.1).max(1e-12);
                        accepted = true;
                        break;
                    }
                }
            }
            damping *= 10.0;
        }
        it += 1;
        if !accepted {
            break;
        }
    }
    Err(CountModelError::NonConvergence { iterations: it, grad_norm: max_abs(&g) })
}
