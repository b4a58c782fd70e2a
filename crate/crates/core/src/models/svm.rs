use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

use super::ClassWeights;

/// Curvature floor for non-positive-definite pairs.
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    /// RBF width; `None` uses `1 / (dims * var(X))`.
    pub gamma: Option<f64>,
    /// Stopping threshold on the maximal violating pair gap.
    pub eps: f64,
    pub max_iter: usize,
    /// Number of kernel rows kept in memory.
    pub cache_rows: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            eps: 1e-4,
            max_iter: 1_000_000,
            cache_rows: 2048,
        }
    }
}

/// A trained RBF-kernel SVM: `f(x) = sum_i coef_i K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub gamma: f64,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub coef: Vec<f64>,
    pub iterations: usize,
}

impl SvmModel {
    pub fn dims(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// `1 / (dims * var(X))` over every entry of `x`; 1.0 for constant data.
pub fn default_gamma(x: &[Vec<f64>]) -> f64 {
    let dims = x.first().map_or(0, Vec::len);
    let n = (x.len() * dims) as f64;
    if n == 0.0 {
        return 1.0;
    }
    let mean = x.iter().flatten().sum::<f64>() / n;
    let var = x.iter().flatten().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (dims as f64 * var)
    } else {
        1.0
    }
}

struct KernelCache<'a> {
    x: &'a [Vec<f64>],
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
    diag: Vec<f64>,
}

impl<'a> KernelCache<'a> {
    fn new(x: &'a [Vec<f64>], gamma: f64, capacity: usize) -> Self {
        Self {
            x,
            gamma,
            rows: vec![None; x.len()],
            order: VecDeque::new(),
            capacity: capacity.max(2),
            diag: x.iter().map(|v| rbf(v, v, gamma)).collect(),
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        if self.rows[i].is_none() {
            if self.order.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.rows[old] = None;
                }
            }
            let xi = &self.x[i];
            self.rows[i] = Some(self.x.iter().map(|xj| rbf(xi, xj, self.gamma)).collect());
            self.order.push_back(i);
        }
        self.rows[i].as_deref().unwrap_or(&[])
    }
}

/// Trains a class-weighted C-SVM with SMO using second-order working-set selection.
///
/// Each sample's box bound is `C * w_class`. Ties in pair selection go to the lowest index.
pub fn train_svm(
    x: &[Vec<f64>],
    labels: &[Label],
    weights: ClassWeights,
    config: &SvmConfig,
) -> Result<SvmModel> {
    let n = x.len();
    if n == 0 || n != labels.len() {
        return Err(Error::invalid(format!(
            "{n} samples vs {} labels",
            labels.len()
        )));
    }
    let dims = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != dims) {
        return Err(Error::Dimension {
            expected: dims,
            actual: bad.len(),
        });
    }
    if config.c <= 0.0 || config.eps <= 0.0 {
        return Err(Error::invalid("C and eps must be positive"));
    }
    let gamma = config.gamma.unwrap_or_else(|| default_gamma(x));
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let y: Vec<f64> = labels.iter().map(|l| l.sign()).collect();
    let bound: Vec<f64> = labels.iter().map(|&l| config.c * weights.of(l)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut cache = KernelCache::new(x, gamma, config.cache_rows);

    let up = |a: f64, y: f64, c: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let low = |a: f64, y: f64, c: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iter = 0;
    while iter < config.max_iter {
        // i: maximal -y G over the up set
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..n {
            if up(alpha[t], y[t], bound[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let ki: Vec<f64> = cache.row(i).to_vec();
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t], bound[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let a = (cache.diag[i] + cache.diag[t] - 2.0 * ki[t]).max(TAU);
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax - gmin < config.eps || j == usize::MAX {
            break;
        }
        iter += 1;
        let kj: Vec<f64> = cache.row(j).to_vec();
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (ci, cj) = (bound[i], bound[j]);
        let quad = (cache.diag[i] + cache.diag[j] - 2.0 * ki[j]).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            // Q_it = y_i y_t K_it
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    // rho from free vectors, or the midpoint of the feasible interval
    let (mut sum, mut n_free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < bound[t] {
            sum += yg;
            n_free += 1;
        } else if (alpha[t] >= bound[t] && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if n_free > 0 {
        sum / n_free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };

    let mut support_vectors = Vec::new();
    let mut coef = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x[t].clone());
            coef.push(alpha[t] * y[t]);
        }
    }
    if support_vectors.is_empty() {
        // every alpha stayed at zero; keep one zero-weight vector so dims are known
        support_vectors.push(x[0].clone());
        coef.push(0.0);
    }
    Ok(SvmModel {
        gamma,
        bias: -rho,
        support_vectors,
        coef,
        iterations: iter,
    })
}

/// Largest KKT violation of a solution, measured on the decision values
/// (`y f(x) >= 1` at zero, `== 1` when free, `<= 1` at the bound).
pub fn kkt_violation(
    model: &SvmModel,
    x: &[Vec<f64>],
    labels: &[Label],
    alphas: &[f64],
    bounds: &[f64],
) -> f64 {
    let mut worst: f64 = 0.0;
    for (t, xt) in x.iter().enumerate() {
        let m = labels[t].sign() * model.decision(xt);
        let v = if alphas[t] <= 0.0 {
            (1.0 - m).max(0.0)
        } else if alphas[t] >= bounds[t] {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Alpha of every training sample, recovered by matching support vectors to rows.
pub fn training_alphas(model: &SvmModel, x: &[Vec<f64>]) -> Vec<f64> {
    let mut alphas = vec![0.0; x.len()];
    let mut used = vec![false; x.len()];
    for (sv, c) in model.support_vectors.iter().zip(&model.coef) {
        if let Some(t) = (0..x.len()).find(|&t| !used[t] && &x[t] == sv && *c != 0.0) {
            used[t] = true;
            alphas[t] = c.abs();
        }
    }
    alphas
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lab(v: bool) -> Label {
        if v {
            Label::Voiced
        } else {
            Label::Unvoiced
        }
    }

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let v = i % 2 == 0;
            let c = if v { 1.5 } else { -1.5 };
            x.push(vec![
                c + rng.random_range(-1.0..1.0),
                c + rng.random_range(-1.0..1.0),
            ]);
            y.push(lab(v));
        }
        (x, y)
    }

    #[test]
    fn xor_is_separated() {
        let x = vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ];
        let y = vec![lab(true), lab(true), lab(false), lab(false)];
        let cfg = SvmConfig {
            c: 10.0,
            gamma: Some(2.0),
            ..SvmConfig::default()
        };
        let m = train_svm(&x, &y, ClassWeights::uniform(), &cfg).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!(m.decision(xi) * yi.sign() > 0.0);
        }
    }

    #[test]
    fn blobs_and_kkt() {
        let (x, y) = blobs(120, 3);
        let cfg = SvmConfig {
            c: 2.0,
            ..SvmConfig::default()
        };
        let w = ClassWeights::from_labels(&y).unwrap();
        let m = train_svm(&x, &y, w, &cfg).unwrap();
        let correct = x
            .iter()
            .zip(&y)
            .filter(|(xi, yi)| m.decision(xi) * yi.sign() > 0.0)
            .count();
        assert!(correct >= 114, "{correct}/120");
        let alphas = training_alphas(&m, &x);
        let bounds: Vec<f64> = y.iter().map(|&l| cfg.c * w.of(l)).collect();
        assert!(kkt_violation(&m, &x, &y, &alphas, &bounds) < 1e-3);
        // equality constraint sum alpha_i y_i = 0
        assert!(m.coef.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn decision_matches_kernel_sum() {
        let (x, y) = blobs(40, 9);
        let m = train_svm(&x, &y, ClassWeights::uniform(), &SvmConfig::default()).unwrap();
        let probe = [0.3, -0.2];
        let mut direct = m.bias;
        for (sv, c) in m.support_vectors.iter().zip(&m.coef) {
            let d2 = (sv[0] - probe[0]).powi(2) + (sv[1] - probe[1]).powi(2);
            direct += c * (-m.gamma * d2).exp();
        }
        assert!((m.decision(&probe) - direct).abs() < 1e-12);
    }

    #[test]
    fn duplicated_points_converge() {
        let (mut x, mut y) = blobs(30, 5);
        x.extend(x.clone());
        y.extend(y.clone());
        let cfg = SvmConfig {
            eps: 1e-6,
            ..SvmConfig::default()
        };
        let m = train_svm(&x, &y, ClassWeights::uniform(), &cfg).unwrap();
        assert!(m.iterations < cfg.max_iter);
        assert!(m.coef.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn duplicated_points_keep_hard_margin_decision() {
        let (x, y) = blobs(30, 5);
        let cfg = SvmConfig {
            c: 1e6,
            gamma: Some(0.5),
            eps: 1e-10,
            ..SvmConfig::default()
        };
        let once = train_svm(&x, &y, ClassWeights::uniform(), &cfg).unwrap();
        assert!(x
            .iter()
            .zip(&y)
            .all(|(xi, yi)| (once.decision(xi) > 0.0) == (*yi == Label::Voiced)));
        let (mut x2, mut y2) = (x.clone(), y.clone());
        x2.extend(x.clone());
        y2.extend(y.clone());
        let twice = train_svm(&x2, &y2, ClassWeights::uniform(), &cfg).unwrap();
        for i in -6..=6 {
            for j in -6..=6 {
                let p = [i as f64 * 0.5, j as f64 * 0.5];
                let (a, b) = (once.decision(&p), twice.decision(&p));
                assert!((a - b).abs() < 1e-6, "probe {p:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tiny_gamma_gives_constant_decision() {
        let (x, y) = blobs(20, 1);
        let cfg = SvmConfig {
            gamma: Some(1e-12),
            ..SvmConfig::default()
        };
        let m = train_svm(&x, &y, ClassWeights::uniform(), &cfg).unwrap();
        let d0 = m.decision(&x[0]);
        assert!(x.iter().all(|xi| (m.decision(xi) - d0).abs() < 1e-6));
    }

    #[test]
    fn class_weights_scale_box_bounds() {
        // heavier unvoiced weight pulls the boundary toward the voiced cluster
        let (x, y) = blobs(60, 11);
        let cfg = SvmConfig {
            c: 0.05,
            ..SvmConfig::default()
        };
        let plain = train_svm(&x, &y, ClassWeights::uniform(), &cfg).unwrap();
        let skew = ClassWeights {
            voiced: 0.2,
            unvoiced: 5.0,
        };
        let weighted = train_svm(&x, &y, skew, &cfg).unwrap();
        assert!(weighted.decision(&[0.0, 0.0]) < plain.decision(&[0.0, 0.0]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(train_svm(&[], &[], ClassWeights::uniform(), &SvmConfig::default()).is_err());
        let x = vec![vec![0.0], vec![1.0, 2.0]];
        let y = vec![lab(true), lab(false)];
        assert!(train_svm(&x, &y, ClassWeights::uniform(), &SvmConfig::default()).is_err());
    }
}
