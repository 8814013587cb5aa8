//! One-class SVM (ν-formulation, RBF kernel) trained by SMO-style
//! pair updates over seeded random-permutation sweeps.
//!
//! Dual problem: min ½ αᵀQα subject to Σα = 1, 0 ≤ αᵢ ≤ C = 1/(νT),
//! with Q_ij = K(xᵢ, xⱼ). Decision f(x) = Σ αᵢ K(xᵢ, x) − ρ; the anomaly
//! score is −f(x) with the sign rule τ = 0.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DetectError;

/// Internal permutation seed: the solver takes no user seed, so runs are
/// reproducible by construction.
const SWEEP_SEED: u64 = 0x0c5f_d0a1_57ee_9b01;

/// Kernel rows kept fully when T is small, else in a FIFO row cache.
const FULL_CACHE_LIMIT: usize = 3000;
const ROW_CACHE_CAP: usize = 512;

/// RBF bandwidth: a fixed value or 1/d ("scale").
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Scale,
    Fixed(f64),
}

impl GammaSpec {
    pub fn resolve(&self, d: usize) -> f64 {
        match *self {
            GammaSpec::Scale => 1.0 / d.max(1) as f64,
            GammaSpec::Fixed(v) => v,
        }
    }

    pub fn parse(text: &str) -> Option<GammaSpec> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("scale") {
            return Some(GammaSpec::Scale);
        }
        t.parse::<f64>().ok().map(GammaSpec::Fixed)
    }
}

impl fmt::Display for GammaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaSpec::Scale => f.write_str("scale"),
            GammaSpec::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum GammaRepr {
    Name(String),
    Value(f64),
}

impl From<GammaSpec> for GammaRepr {
    fn from(g: GammaSpec) -> Self {
        match g {
            GammaSpec::Scale => GammaRepr::Name("scale".into()),
            GammaSpec::Fixed(v) => GammaRepr::Value(v),
        }
    }
}

impl TryFrom<GammaRepr> for GammaSpec {
    type Error = String;

    fn try_from(r: GammaRepr) -> Result<Self, Self::Error> {
        match r {
            GammaRepr::Name(s) => {
                GammaSpec::parse(&s).ok_or_else(|| format!("unknown gamma {s:?}"))
            }
            GammaRepr::Value(v) => Ok(GammaSpec::Fixed(v)),
        }
    }
}

impl Serialize for GammaSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GammaRepr::from(*self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GammaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = GammaRepr::deserialize(d)?;
        GammaSpec::try_from(repr).map_err(serde::de::Error::custom)
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * sq).exp()
}

struct KernelCache<'a> {
    points: &'a [f64],
    dim: usize,
    t: usize,
    gamma: f64,
    rows: HashMap<usize, Rc<[f64]>>,
    order: VecDeque<usize>,
    cap: usize,
}

impl<'a> KernelCache<'a> {
    fn new(points: &'a [f64], dim: usize, t: usize, gamma: f64) -> Self {
        let cap = if t <= FULL_CACHE_LIMIT { t } else { ROW_CACHE_CAP };
        KernelCache {
            points,
            dim,
            t,
            gamma,
            rows: HashMap::new(),
            order: VecDeque::new(),
            cap,
        }
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn row(&mut self, i: usize) -> Rc<[f64]> {
        if let Some(r) = self.rows.get(&i) {
            return r.clone();
        }
        let pi = self.point(i);
        let row: Rc<[f64]> = (0..self.t)
            .map(|j| rbf(pi, self.point(j), self.gamma))
            .collect();
        if self.rows.len() >= self.cap {
            if let Some(old) = self.order.pop_front() {
                self.rows.remove(&old);
            }
        }
        self.rows.insert(i, row.clone());
        self.order.push_back(i);
        row
    }
}

/// Fitted state: support vectors, their dual weights, and the offset ρ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OcSvmState {
    pub nu: f64,
    /// Resolved kernel bandwidth.
    pub gamma: f64,
    pub rho: f64,
    dim: usize,
    sv_points: Vec<f64>,
    sv_alpha: Vec<f64>,
    /// Final duality gap at convergence.
    pub gap: f64,
    /// Sweeps used by the solver.
    pub sweeps: usize,
}

impl OcSvmState {
    /// Dual coefficients of the support vectors (every stored α is > 0).
    pub fn support_alphas(&self) -> &[f64] {
        &self.sv_alpha
    }

    pub fn fit(
        x: ArrayView2<'_, f64>,
        nu: f64,
        gamma_spec: GammaSpec,
        tol: f64,
        max_iter: usize,
    ) -> Result<OcSvmState, DetectError> {
        let d = x.nrows();
        let t = x.ncols();
        let gamma = gamma_spec.resolve(d);
        let mut points = vec![0.0; d * t];
        for i in 0..t {
            for (r, &v) in x.column(i).iter().enumerate() {
                points[i * d + r] = v;
            }
        }
        let c = 1.0 / (nu * t as f64);

        // standard init: the first ⌊νT⌋ coefficients at the box bound,
        // the remainder (if any) on the next one
        let mut alpha = vec![0.0; t];
        let nfull = ((nu * t as f64).floor() as usize).min(t);
        for a in alpha.iter_mut().take(nfull) {
            *a = c;
        }
        if nfull < t {
            alpha[nfull] = (1.0 - nfull as f64 * c).max(0.0);
        }

        let mut cache = KernelCache::new(&points, d, t, gamma);
        let mut g = vec![0.0; t];
        for j in 0..t {
            if alpha[j] > 0.0 {
                let row = cache.row(j);
                let aj = alpha[j];
                for (gk, &kjk) in g.iter_mut().zip(row.iter()) {
                    *gk += aj * kjk;
                }
            }
        }

        let gap_of = |alpha: &[f64], g: &[f64]| -> f64 {
            let mut up = f64::NEG_INFINITY;
            let mut low = f64::INFINITY;
            for i in 0..t {
                if alpha[i] > 0.0 {
                    up = up.max(g[i]);
                }
                if alpha[i] < c {
                    low = low.min(g[i]);
                }
            }
            if up.is_finite() && low.is_finite() {
                up - low
            } else {
                0.0
            }
        };

        let mut rng = ChaCha8Rng::seed_from_u64(SWEEP_SEED);
        let mut perm: Vec<usize> = (0..t).collect();
        let mut gap = gap_of(&alpha, &g);
        let mut sweeps = 0;
        while gap > tol {
            if sweeps == max_iter {
                return Err(DetectError::NoConvergence {
                    sweeps,
                    gap,
                    tol,
                });
            }
            sweeps += 1;
            perm.shuffle(&mut rng);
            for &i in &perm {
                if alpha[i] <= 0.0 {
                    continue;
                }
                // receiver: lowest gradient with remaining box capacity
                let mut j_best = usize::MAX;
                let mut g_best = f64::INFINITY;
                for j in 0..t {
                    if j != i && alpha[j] < c && g[j] < g_best {
                        g_best = g[j];
                        j_best = j;
                    }
                }
                if j_best == usize::MAX || g[i] - g_best <= 1e-12 {
                    continue;
                }
                let j = j_best;
                let row_i = cache.row(i);
                let row_j = cache.row(j);
                let eta = row_i[i] + row_j[j] - 2.0 * row_i[j];
                let unclipped = if eta > 1e-12 {
                    (g[i] - g[j]) / eta
                } else {
                    f64::INFINITY
                };
                let delta = unclipped.min(alpha[i]).min(c - alpha[j]);
                if delta <= 0.0 {
                    continue;
                }
                if delta == alpha[i] {
                    alpha[i] = 0.0;
                } else {
                    alpha[i] -= delta;
                }
                if delta == c - alpha[j] {
                    alpha[j] = c;
                } else {
                    alpha[j] += delta;
                }
                for k in 0..t {
                    g[k] += delta * (row_j[k] - row_i[k]);
                }
            }
            gap = gap_of(&alpha, &g);
        }

        // ρ from free support vectors; fall back to the KKT interval
        let at_zero = |a: f64| a <= c * 1e-9;
        let at_upper = |a: f64| a >= c * (1.0 - 1e-9);
        let free: Vec<usize> = (0..t)
            .filter(|&i| !at_zero(alpha[i]) && !at_upper(alpha[i]))
            .collect();
        let rho = if !free.is_empty() {
            free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64
        } else {
            let lower = (0..t)
                .filter(|&i| at_upper(alpha[i]))
                .map(|i| g[i])
                .fold(f64::NEG_INFINITY, f64::max);
            let upper = (0..t)
                .filter(|&i| at_zero(alpha[i]))
                .map(|i| g[i])
                .fold(f64::INFINITY, f64::min);
            match (lower.is_finite(), upper.is_finite()) {
                (true, true) => 0.5 * (lower + upper),
                (true, false) => lower,
                (false, true) => upper,
                (false, false) => 0.0,
            }
        };

        let mut sv_points = Vec::new();
        let mut sv_alpha = Vec::new();
        for i in 0..t {
            if alpha[i] > 0.0 {
                sv_points.extend_from_slice(&points[i * d..(i + 1) * d]);
                sv_alpha.push(alpha[i]);
            }
        }
        Ok(OcSvmState {
            nu,
            gamma,
            rho,
            dim: d,
            sv_points,
            sv_alpha,
            gap,
            sweeps,
        })
    }

    /// Decision value f(x) = Σ αᵢ K(xᵢ, x) − ρ.
    pub fn decision(&self, q: &[f64]) -> f64 {
        let d = self.dim;
        let raw: f64 = self
            .sv_alpha
            .iter()
            .enumerate()
            .map(|(i, &a)| a * rbf(&self.sv_points[i * d..(i + 1) * d], q, self.gamma))
            .sum();
        raw - self.rho
    }

    /// Scores −f(x): positive means outside the learned boundary.
    pub fn score(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        (0..x.ncols())
            .into_par_iter()
            .map(|qi| {
                let q: Vec<f64> = x.column(qi).to_vec();
                -self.decision(&q)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{fit_ocsvm, DetectorParams, FittedState};
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn gaussian(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((2, n), |_| {
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
    }

    fn params(nu: f64, gamma: GammaSpec) -> DetectorParams {
        DetectorParams::OcSvm {
            nu,
            gamma,
            tol: 1e-4,
            max_iter: 1000,
        }
    }

    fn state(model: &super::super::DetectorModel) -> &OcSvmState {
        match &model.state {
            FittedState::OcSvm(s) => s,
            _ => unreachable!(),
        }
    }

    #[test]
    fn identical_points_sit_on_the_boundary() {
        let x = Array2::from_elem((2, 20), 4.0);
        let model = fit_ocsvm(x.view(), &params(0.3, GammaSpec::Scale)).unwrap();
        for s in &model.train_scores {
            assert!(s.abs() <= 1e-4, "f(train) = {} not within tolerance", -s);
        }
    }

    #[test]
    fn nu_bounds_training_outlier_fraction() {
        let x = gaussian(500, 21);
        let model = fit_ocsvm(x.view(), &params(0.1, GammaSpec::Scale)).unwrap();
        let outliers = model
            .train_scores
            .iter()
            .filter(|&&s| s > 0.0)
            .count() as f64
            / 500.0;
        assert!(
            outliers <= 0.1 + 0.05,
            "outlier fraction {outliers} exceeds nu + 0.05"
        );
    }

    #[test]
    fn dual_feasibility_at_convergence() {
        let x = gaussian(200, 33);
        let nu = 0.2;
        let model = fit_ocsvm(x.view(), &params(nu, GammaSpec::Fixed(0.5))).unwrap();
        let s = state(&model);
        let c = 1.0 / (nu * 200.0);
        let sum: f64 = s.sv_alpha.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9, "Σα = {sum}");
        for &a in &s.sv_alpha {
            assert!(a > 0.0 && a <= c + 1e-12, "α = {a} outside (0, C]");
        }
        assert!(s.gap <= 1e-4);
    }

    #[test]
    fn vanishing_gamma_flattens_decisions() {
        // two clusters; γ so small every kernel value rounds to 1.0
        let mut x = gaussian(60, 5);
        for i in 30..60 {
            x[[0, i]] += 6.0;
        }
        let model = fit_ocsvm(x.view(), &params(0.1, GammaSpec::Fixed(1e-18))).unwrap();
        let spread = model
            .train_scores
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
            - model
                .train_scores
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
        assert!(spread <= 1e-9, "decision spread {spread}");
        let flags = model.predict(x.view()).unwrap();
        assert!(flags.iter().all(|&f| !f), "flat kernel must flag nothing");
    }

    #[test]
    fn fits_are_deterministic() {
        let x = gaussian(150, 8);
        let a = fit_ocsvm(x.view(), &params(0.15, GammaSpec::Scale)).unwrap();
        let b = fit_ocsvm(x.view(), &params(0.15, GammaSpec::Scale)).unwrap();
        assert_eq!(a.train_scores, b.train_scores);
        assert_eq!(state(&a).rho, state(&b).rho);
    }

    #[test]
    fn non_convergence_reports_gap() {
        let x = gaussian(100, 13);
        let err = fit_ocsvm(
            x.view(),
            &DetectorParams::OcSvm {
                nu: 0.5,
                gamma: GammaSpec::Fixed(5.0),
                tol: 1e-12,
                max_iter: 1,
            },
        )
        .unwrap_err();
        match err {
            DetectError::NoConvergence { gap, .. } => assert!(gap > 1e-12),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn gamma_spec_round_trips_through_json() {
        let scale: GammaSpec = serde_json::from_str("\"scale\"").unwrap();
        assert_eq!(scale, GammaSpec::Scale);
        let fixed: GammaSpec = serde_json::from_str("0.25").unwrap();
        assert_eq!(fixed, GammaSpec::Fixed(0.25));
        assert_eq!(serde_json::to_string(&GammaSpec::Scale).unwrap(), "\"scale\"");
        assert_eq!(GammaSpec::Scale.resolve(4), 0.25);
    }
}
