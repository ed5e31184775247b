//! Loss / phase-noise fit of measured (squeezing, anti-squeezing) levels.
//!
//! Each point's distance to the parametric curve
//! `s ↦ (sq(s; L, θ), as(s; L, θ))` (ideal squeezing `s` in dB) is taken
//! orthogonally in dB coordinates, with `s` profiled out per point. The
//! outer problem is solved by Levenberg–Marquardt projected onto the
//! physical box `0 ≤ L < 1`, `0 ≤ θ ≤ π/4`.

use serde::{Deserialize, Serialize};

use crate::channels::predicted_levels;
use crate::error::{Error, Result};
use crate::metrics::{purity, squeezing_levels};
use crate::simulate::StateSpec;
use crate::Truncation;

/// Upper end of the ideal-squeezing search, dB.
pub const MAX_IDEAL_DB: f64 = 40.0;
/// Probability inside a one-dimensional ±2σ interval.
pub const TWO_SIGMA_PROBABILITY: f64 = 0.954_499_736_103_641_6;
const SCAN_POINTS: usize = 400;
const GOLDEN_TOL: f64 = 1e-13;
const MAX_ITERS: usize = 200;

/// One measured operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelPoint {
    pub sq_db: f64,
    pub as_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_mw: Option<f64>,
}

impl LevelPoint {
    pub fn new(sq_db: f64, as_db: f64) -> Result<Self> {
        let p = Self {
            sq_db,
            as_db,
            label: None,
            pump_mw: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn labelled(mut self, label: impl Into<String>, pump_mw: Option<f64>) -> Self {
        self.label = Some(label.into());
        self.pump_mw = pump_mw;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sq_db.is_finite()
            && self.as_db.is_finite()
            && self.sq_db >= 0.0
            && self.as_db >= 0.0
            && self.as_db >= self.sq_db - 0.5
            && self.pump_mw.is_none_or(|p| p.is_finite());
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "level point ({}, {}) dB must be finite, non-negative, with anti-squeezing >= squeezing - 0.5",
                self.sq_db, self.as_db
            )));
        }
        Ok(())
    }
}

/// Fitted degradation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationFit {
    pub loss: f64,
    pub theta: f64,
    /// Root-mean-square orthogonal distance, dB.
    pub residual_rms: f64,
    /// Covariance of `(loss, theta)`.
    pub covariance: [[f64; 2]; 2],
    pub converged: bool,
    pub iterations: usize,
    pub points: usize,
}

impl DegradationFit {
    pub fn curve(&self, ideal_db: f64) -> (f64, f64) {
        predicted_levels(ideal_db, self.loss, self.theta)
    }

    /// Squared Mahalanobis distance of `(loss, theta)` from the estimate.
    pub fn mahalanobis2(&self, loss: f64, theta: f64) -> f64 {
        let [[a, b], [_, d]] = self.covariance;
        let det = a * d - b * b;
        let (x, y) = (loss - self.loss, theta - self.theta);
        if det <= 0.0 {
            return f64::INFINITY;
        }
        (d * x * x - 2.0 * b * x * y + a * y * y) / det
    }

    /// Squared Mahalanobis radius of the two-parameter confidence region
    /// holding the ±2σ probability. The covariance is scaled by the residual
    /// variance, so the radius follows 2·F(2, n − 2), which has the closed
    /// form `ν((1 − p)^(−2/ν) − 1)` and tends to the χ²₂ value 6.18.
    pub fn two_sigma_radius2(&self) -> f64 {
        let tail = 1.0 - TWO_SIGMA_PROBABILITY;
        match self.points.saturating_sub(2) {
            0 => -2.0 * tail.ln(),
            dof => {
                let nu = dof as f64;
                nu * (tail.powf(-2.0 / nu) - 1.0)
            }
        }
    }

    /// Whether `(loss, theta)` lies inside the ±2σ-equivalent ellipse.
    pub fn within_two_sigma(&self, loss: f64, theta: f64) -> bool {
        self.mahalanobis2(loss, theta) <= self.two_sigma_radius2()
    }
}

const MAX_LOSS: f64 = 0.999;
const MAX_THETA: f64 = std::f64::consts::FRAC_PI_4;

fn project(u: [f64; 2]) -> [f64; 2] {
    [u[0].clamp(0.0, MAX_LOSS), u[1].clamp(0.0, MAX_THETA)]
}

/// Closest curve parameter to `(x, y)`: grid scan then golden section.
fn closest_ideal(x: f64, y: f64, loss: f64, theta: f64) -> f64 {
    let dist2 = |s: f64| {
        let (cx, cy) = predicted_levels(s, loss, theta);
        (x - cx).powi(2) + (y - cy).powi(2)
    };
    let step = MAX_IDEAL_DB / SCAN_POINTS as f64;
    let best = (0..=SCAN_POINTS)
        .map(|i| i as f64 * step)
        .min_by(|a, b| dist2(*a).total_cmp(&dist2(*b)))
        .expect("non-empty scan");
    let (mut lo, mut hi) = ((best - step).max(0.0), (best + step).min(MAX_IDEAL_DB));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fc, mut fd) = (dist2(c), dist2(d));
    while hi - lo > GOLDEN_TOL * (1.0 + hi.abs()) {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = dist2(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = dist2(d);
        }
    }
    let mid = 0.5 * (lo + hi);
    [lo, mid, hi]
        .into_iter()
        .min_by(|a, b| dist2(*a).total_cmp(&dist2(*b)))
        .expect("three candidates")
}

/// Signed orthogonal distance of a point to the curve.
fn signed_distance(p: &LevelPoint, loss: f64, theta: f64) -> f64 {
    let s = closest_ideal(p.sq_db, p.as_db, loss, theta);
    let (cx, cy) = predicted_levels(s, loss, theta);
    let h = 1e-6;
    let (ax, ay) = predicted_levels((s - h).max(0.0), loss, theta);
    let (bx, by) = predicted_levels(s + h, loss, theta);
    let (tx, ty) = (bx - ax, by - ay);
    let norm = tx.hypot(ty);
    let (dx, dy) = (p.sq_db - cx, p.as_db - cy);
    if norm == 0.0 {
        return dx.hypot(dy);
    }
    let cross = (dx * ty - dy * tx) / norm;
    // keep the magnitude exact even where the tangent estimate is rough
    dx.hypot(dy).copysign(cross)
}

fn residuals(points: &[LevelPoint], u: [f64; 2]) -> Vec<f64> {
    points
        .iter()
        .map(|p| signed_distance(p, u[0], u[1]))
        .collect()
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian(points: &[LevelPoint], u: [f64; 2]) -> Vec<[f64; 2]> {
    let mut cols = [vec![], vec![]];
    for (k, col) in cols.iter_mut().enumerate() {
        // one-sided at the bounds
        let h = 1e-7;
        let (mut up, mut dn) = (u, u);
        up[k] += h;
        dn[k] -= h;
        let (up, dn) = (project(up), project(dn));
        let width = up[k] - dn[k];
        let (rp, rm) = (residuals(points, up), residuals(points, dn));
        *col = rp.iter().zip(&rm).map(|(a, b)| (a - b) / width).collect();
    }
    (0..points.len())
        .map(|i| [cols[0][i], cols[1][i]])
        .collect()
}

fn normal_matrix(j: &[[f64; 2]]) -> [[f64; 2]; 2] {
    let mut a = [[0.0; 2]; 2];
    for row in j {
        for p in 0..2 {
            for q in 0..2 {
                a[p][q] += row[p] * row[q];
            }
        }
    }
    a
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * a[1][1] - b[1] * a[0][1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

/// `L` that explains point `p` with no phase noise (clamped into (0, 1)).
fn loss_from_deficit(p: &LevelPoint) -> f64 {
    let v_sq = 10f64.powf(-p.sq_db / 10.0);
    let v_as = 10f64.powf(p.as_db / 10.0);
    let denom = v_sq + v_as - 2.0;
    if denom <= 1e-12 {
        return 1e-3;
    }
    ((v_sq * v_as - 1.0) / denom).clamp(1e-4, 0.9)
}

/// Starting points: loss from the most squeezed point's deficit at θ = 0
/// (halved, so phase noise can take a share), θ from the anti-squeezing
/// excess, plus the best few nodes of a coarse grid.
fn starting_points(points: &[LevelPoint]) -> Vec<[f64; 2]> {
    let top = points
        .iter()
        .max_by(|a, b| a.sq_db.total_cmp(&b.sq_db))
        .expect("non-empty");
    let excess = points
        .iter()
        .map(|p| (p.as_db - p.sq_db).max(0.0))
        .fold(0.0, f64::max);
    let mut grid: Vec<([f64; 2], f64)> = [0.01, 0.05, 0.1, 0.2, 0.35, 0.5]
        .iter()
        .flat_map(|&l| [0.003, 0.01, 0.03, 0.06, 0.1, 0.2].map(|t| [l, t]))
        .map(|u| (u, sum_sq(&residuals(points, u))))
        .collect();
    grid.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut starts = vec![[
        0.5 * loss_from_deficit(top),
        (0.01 * excess).clamp(1e-3, 0.3),
    ]];
    starts.extend(grid.iter().take(3).map(|g| g.0));
    starts
}

struct Descent {
    u: [f64; 2],
    cost: f64,
    converged: bool,
    iterations: usize,
}

/// Projected Levenberg–Marquardt from `u`.
fn descend(points: &[LevelPoint], mut u: [f64; 2]) -> Descent {
    let mut r = residuals(points, u);
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERS {
        iterations += 1;
        let j = jacobian(points, u);
        let mut a = normal_matrix(&j);
        let mut g = [
            j.iter().zip(&r).map(|(row, ri)| row[0] * ri).sum::<f64>(),
            j.iter().zip(&r).map(|(row, ri)| row[1] * ri).sum::<f64>(),
        ];
        // parameters on a bound with the gradient pointing outward stay put
        let upper = [MAX_LOSS, MAX_THETA];
        let mut free = 0;
        for k in 0..2 {
            let pinned = (u[k] <= 0.0 && g[k] >= 0.0) || (u[k] >= upper[k] && g[k] <= 0.0);
            if pinned {
                a[k] = [0.0; 2];
                a[1 - k][k] = 0.0;
                a[k][k] = 1.0;
                g[k] = 0.0;
            } else {
                free += 1;
            }
        }
        if free == 0 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e12 {
            let damped = [
                [a[0][0] * (1.0 + lambda) + 1e-30, a[0][1]],
                [a[1][0], a[1][1] * (1.0 + lambda) + 1e-30],
            ];
            let Some(step) = solve2(damped, [-g[0], -g[1]]) else {
                lambda *= 10.0;
                continue;
            };
            let trial = project([u[0] + step[0], u[1] + step[1]]);
            let tr = residuals(points, trial);
            let tc = sum_sq(&tr);
            if tc <= cost {
                let moved = (trial[0] - u[0]).abs().max((trial[1] - u[1]).abs());
                let improvement = cost - tc;
                u = trial;
                r = tr;
                cost = tc;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                converged = improvement <= 1e-12 * cost || moved < 1e-11 || cost < 1e-26;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no descent direction left: the iterate is a minimum
            converged = true;
        }
        if converged {
            break;
        }
    }
    Descent {
        u,
        cost,
        converged,
        iterations,
    }
}

/// Orthogonal-distance fit of `(L, θ)`.
pub fn fit(points: &[LevelPoint]) -> Result<DegradationFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "degradation fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    for p in points {
        p.validate()?;
    }
    if points
        .iter()
        .all(|p| p.sq_db == points[0].sq_db && p.as_db == points[0].as_db)
    {
        return Err(Error::InsufficientData("all points are identical".into()));
    }
    let best = starting_points(points)
        .into_iter()
        .map(|u| descend(points, u))
        .min_by(|a, b| a.cost.total_cmp(&b.cost))
        .expect("at least one start");
    let Descent {
        mut u,
        mut cost,
        converged,
        iterations,
    } = best;
    // θ acts through sin²θ, so values near zero are unresolvable; take the
    // bound whenever it fits no worse
    for k in 0..2 {
        let mut snapped = u;
        snapped[k] = 0.0;
        let c = sum_sq(&residuals(points, snapped));
        if c <= cost * (1.0 + 1e-9) + 1e-24 {
            u = snapped;
            cost = c;
        }
    }
    if !converged {
        log::warn!("degradation fit stopped after {iterations} iterations without converging");
    }
    let [loss, theta] = u;
    let n = points.len();
    let j = jacobian(points, u);
    let a = normal_matrix(&j);
    let dof = n.saturating_sub(2).max(1) as f64;
    let s2 = cost / dof;
    let covariance = match solve2(a, [1.0, 0.0]).zip(solve2(a, [0.0, 1.0])) {
        Some((c0, c1)) => [[s2 * c0[0], s2 * c1[0]], [s2 * c0[1], s2 * c1[1]]],
        None => [[0.0; 2]; 2],
    };
    Ok(DegradationFit {
        loss,
        theta,
        residual_rms: (cost / n as f64).sqrt(),
        covariance,
        converged,
        iterations,
        points: n,
    })
}

/// Curve sample with first-order ±1σ widths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub ideal_db: f64,
    pub sq_db: f64,
    pub as_db: f64,
    pub sq_sigma: f64,
    pub as_sigma: f64,
}

pub fn predict_band(fit: &DegradationFit, ideal_db: &[f64]) -> Vec<BandPoint> {
    ideal_db
        .iter()
        .map(|&s| {
            let (sq, asq) = fit.curve(s);
            let hl = 1e-7 * (1.0 + fit.loss);
            let ht = 1e-7 * (1.0 + fit.theta);
            let lp = predicted_levels(s, (fit.loss + hl).min(1.0), fit.theta);
            let lm = predicted_levels(s, (fit.loss - hl).max(0.0), fit.theta);
            let dl = (lp.0 - lm.0, lp.1 - lm.1);
            let wl = ((fit.loss + hl).min(1.0) - (fit.loss - hl).max(0.0)).max(f64::MIN_POSITIVE);
            let tp = predicted_levels(s, fit.loss, fit.theta + ht);
            let tm = predicted_levels(s, fit.loss, (fit.theta - ht).max(0.0));
            let dt = (tp.0 - tm.0, tp.1 - tm.1);
            let wt = (fit.theta + ht) - (fit.theta - ht).max(0.0);
            let [[a, b], [_, d]] = fit.covariance;
            let var = |gl: f64, gt: f64| (gl * gl * a + 2.0 * gl * gt * b + gt * gt * d).max(0.0);
            BandPoint {
                ideal_db: s,
                sq_db: sq,
                as_db: asq,
                sq_sigma: var(dl.0 / wl, dt.0 / wt).sqrt(),
                as_sigma: var(dl.1 / wl, dt.1 / wt).sqrt(),
            }
        })
        .collect()
}

/// `(anti-squeezing, purity)` of the fitted degradation applied to a pure
/// squeezed vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PurityRow {
    pub ideal_db: f64,
    pub sq_db: f64,
    pub as_db: f64,
    pub purity: f64,
}

/// Synthesizes each state in the Fock basis at `dim` (truncation overflow
/// is reported, not hidden) and measures its purity and levels.
pub fn purity_vs_antisqueezing(
    fit: &DegradationFit,
    ideal_db: &[f64],
    dim: usize,
) -> Result<Vec<PurityRow>> {
    ideal_db
        .iter()
        .map(|&s| {
            let spec = StateSpec {
                loss: fit.loss,
                phase_noise: fit.theta,
                ..StateSpec::squeezed_vacuum(s)
            };
            let rho = spec.density_matrix(Truncation::new(dim))?;
            let levels = squeezing_levels(&rho);
            Ok(PurityRow {
                ideal_db: s,
                sq_db: levels.squeezing_db,
                as_db: levels.anti_squeezing_db,
                purity: purity(&rho),
            })
        })
        .collect()
}

/// Same table from the phase-space description of the degraded state:
/// exact at any squeezing, no truncation.
pub fn purity_vs_antisqueezing_exact(
    fit: &DegradationFit,
    ideal_db: &[f64],
) -> Result<Vec<PurityRow>> {
    ideal_db
        .iter()
        .map(|&s| {
            let mixture = StateSpec {
                loss: fit.loss,
                phase_noise: fit.theta,
                ..StateSpec::squeezed_vacuum(s)
            }
            .mixture()?;
            let (sq_db, as_db) = mixture.levels_db();
            Ok(PurityRow {
                ideal_db: s,
                sq_db,
                as_db,
                purity: mixture.purity(),
            })
        })
        .collect()
}

/// Ideal squeezing whose fitted curve reaches `as_db` of anti-squeezing.
pub fn ideal_for_antisqueezing(fit: &DegradationFit, as_db: f64) -> Option<f64> {
    let f = |s: f64| fit.curve(s).1 - as_db;
    let (mut lo, mut hi) = (0.0, MAX_IDEAL_DB);
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return None;
    }
    // anti-squeezing is monotone in the ideal level
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// The four operating points marked in the reference measurement.
pub fn reference_markers() -> Vec<LevelPoint> {
    [
        ("A", 3.76, 3.89, 5.0),
        ("B", 7.39, 12.16, 55.0),
        ("C", 7.91, 18.56, 77.0),
        ("D", 9.38, 19.69, 80.0),
    ]
    .into_iter()
    .map(|(l, s, a, p)| {
        LevelPoint::new(s, a)
            .expect("valid marker")
            .labelled(l, Some(p))
    })
    .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn synthetic(loss: f64, theta: f64, ideal: &[f64]) -> Vec<LevelPoint> {
        ideal
            .iter()
            .map(|&s| {
                let (a, b) = predicted_levels(s, loss, theta);
                LevelPoint::new(a, b).unwrap()
            })
            .collect()
    }

    const IDEAL6: [f64; 6] = [2.0, 4.0, 6.0, 8.0, 11.0, 14.0];

    #[test]
    fn recovers_noiseless_parameters() {
        let f = fit(&synthetic(0.10, 0.05, &IDEAL6)).unwrap();
        assert!(f.converged);
        assert!((f.loss - 0.10).abs() < 1e-3 * 0.10, "{f:?}");
        assert!((f.theta - 0.05).abs() < 1e-3 * 0.05, "{f:?}");
        assert!(f.residual_rms < 1e-8);
    }

    #[test]
    fn identity_line_gives_no_degradation() {
        let pts: Vec<_> = [1.0, 3.0, 5.0, 8.0]
            .iter()
            .map(|&s| LevelPoint::new(s, s).unwrap())
            .collect();
        let f = fit(&pts).unwrap();
        assert!(f.loss < 1e-9 && f.theta < 1e-9, "{f:?}");
        assert!(f.residual_rms < 1e-8);
    }

    #[test]
    fn input_validation() {
        assert!(matches!(fit(&[]), Err(Error::InsufficientData(_))));
        let p = LevelPoint::new(3.0, 4.0).unwrap();
        assert!(matches!(fit(&[p.clone()]), Err(Error::InsufficientData(_))));
        assert!(matches!(
            fit(&[p.clone(), p]),
            Err(Error::InsufficientData(_))
        ));
        assert!(LevelPoint::new(6.0, 3.0).is_err());
        assert!(LevelPoint::new(-1.0, 3.0).is_err());
        assert!(LevelPoint::new(f64::NAN, 3.0).is_err());
    }

    #[test]
    fn order_invariant() {
        let mut pts = synthetic(0.2, 0.03, &IDEAL6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.0, 0.2).unwrap();
        for p in &mut pts {
            p.sq_db += noise.sample(&mut rng);
            p.as_db += noise.sample(&mut rng);
        }
        let a = fit(&pts).unwrap();
        pts.reverse();
        let b = fit(&pts).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-8 && (a.theta - b.theta).abs() < 1e-8);
    }

    #[test]
    fn two_sigma_radius_limits() {
        let mut f = fit(&synthetic(0.1, 0.05, &IDEAL6)).unwrap();
        // ν = 4: 4·((1 − p)^(−1/2) − 1)
        assert!(
            (f.two_sigma_radius2() - 14.752_23).abs() < 1e-4,
            "{}",
            f.two_sigma_radius2()
        );
        f.points = 1_000_002;
        assert!((f.two_sigma_radius2() - 6.180_074).abs() < 1e-4);
    }

    #[test]
    fn markers_fit() {
        let f = fit(&reference_markers()).unwrap();
        assert!(f.converged, "{f:?}");
        assert!(f.residual_rms.is_finite());
        assert!((0.0..1.0).contains(&f.loss) && f.theta >= 0.0);
        let band = predict_band(&f, &[5.0, 10.0, 15.0]);
        assert!(band
            .iter()
            .all(|b| b.sq_sigma.is_finite() && b.as_sigma.is_finite()));
    }

    #[test]
    fn band_properties() {
        let mut f = fit(&synthetic(0.1, 0.05, &IDEAL6)).unwrap();
        f.covariance = [[0.0; 2]; 2];
        assert!(predict_band(&f, &[3.0, 9.0])
            .iter()
            .all(|b| b.sq_sigma == 0.0 && b.as_sigma == 0.0));
        f.covariance = [[1e-4, 2e-6], [2e-6, 1e-5]];
        let narrow = predict_band(&f, &[3.0, 9.0]);
        f.covariance = [[4e-4, 8e-6], [8e-6, 4e-5]];
        let wide = predict_band(&f, &[3.0, 9.0]);
        for (n, w) in narrow.iter().zip(&wide) {
            assert!((w.sq_sigma - 2.0 * n.sq_sigma).abs() < 1e-9 * w.sq_sigma.max(1e-300));
            assert!(w.as_sigma >= n.as_sigma);
        }
        let ideal = DegradationFit {
            loss: 0.0,
            theta: 0.0,
            residual_rms: 0.0,
            covariance: [[0.0; 2]; 2],
            converged: true,
            iterations: 0,
            points: 0,
        };
        for b in predict_band(&ideal, &[0.0, 4.0, 12.0]) {
            assert!((b.sq_db - b.ideal_db).abs() < 1e-12 && (b.as_db - b.ideal_db).abs() < 1e-12);
        }
    }

    #[test]
    fn purity_table() {
        let ideal = DegradationFit {
            loss: 0.0,
            theta: 0.0,
            residual_rms: 0.0,
            covariance: [[0.0; 2]; 2],
            converged: true,
            iterations: 0,
            points: 0,
        };
        for row in purity_vs_antisqueezing(&ideal, &[0.0, 3.0, 6.0], 40).unwrap() {
            assert!((row.purity - 1.0).abs() < 1e-9, "{row:?}");
        }
        let degraded = DegradationFit {
            loss: 0.1,
            theta: 0.05,
            ..ideal
        };
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.6).collect();
        let rows = purity_vs_antisqueezing(&degraded, &grid, 150).unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].as_db > w[0].as_db && w[1].purity < w[0].purity,
                "{w:?}"
            );
        }
    }

    #[test]
    fn marker_c_purity_below_marker_b() {
        let f = fit(&reference_markers()).unwrap();
        let ideal: Vec<f64> = [12.16, 18.56]
            .iter()
            .map(|&a| ideal_for_antisqueezing(&f, a).unwrap())
            .collect();
        let rows = purity_vs_antisqueezing_exact(&f, &ideal).unwrap();
        assert!(
            (rows[0].as_db - 12.16).abs() < 1e-6 && (rows[1].as_db - 18.56).abs() < 1e-6,
            "{rows:?}"
        );
        assert!(rows[1].purity < rows[0].purity, "{rows:?}");
        // the Fock route agrees at B and reports overflow at C
        let fock = purity_vs_antisqueezing(&f, &ideal[..1], 200).unwrap();
        assert!(
            (fock[0].purity - rows[0].purity).abs() < 1e-6,
            "{fock:?} {rows:?}"
        );
        assert!(matches!(
            purity_vs_antisqueezing(&f, &ideal[1..], 200),
            Err(Error::TruncationOverflow { .. })
        ));
    }

    #[test]
    fn fock_and_phase_space_tables_agree() {
        let f = DegradationFit {
            loss: 0.15,
            theta: 0.04,
            residual_rms: 0.0,
            covariance: [[0.0; 2]; 2],
            converged: true,
            iterations: 0,
            points: 0,
        };
        let grid = [1.0, 4.0, 8.0, 10.0];
        let a = purity_vs_antisqueezing(&f, &grid, 150).unwrap();
        let b = purity_vs_antisqueezing_exact(&f, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.purity - y.purity).abs() < 1e-6, "{x:?} {y:?}");
            assert!(
                (x.as_db - y.as_db).abs() < 1e-5 && (x.sq_db - y.sq_db).abs() < 1e-5,
                "{x:?} {y:?}"
            );
        }
    }

    #[test]
    fn random_noiseless_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (l, t) = (rng.gen_range(0.0..0.4), rng.gen_range(0.0..0.15));
            let f = fit(&synthetic(l, t, &IDEAL6)).unwrap();
            assert!(
                (f.loss - l).abs() <= 0.02 * l && (f.theta - t).abs() <= 0.02 * t,
                "{l} {t} {f:?}"
            );
        }
    }
}
