//! Rényi-DP accounting for private training.
//!
//! Two event kinds are tracked on a shared grid of orders `α`:
//!
//! * **selection**: subsampled Gumbel report-noisy-max followed by a
//!   propose-test-release check. Always charged, and each one adds `δ_t` to the
//!   approximation mass `δ̂`.
//! * **gradient**: subsampled Gaussian on the released rows. Charged only when
//!   the test passed. Orders outside the bound's validity region are dropped
//!   from the grid for good.
//!
//! Composition is a pointwise sum; conversion to `(ε, δ)` takes the best order.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator of the subsampled-Gaussian bound `2q²α / σ^k`.
///
/// The default keeps the bound exactly as published (`σ`); the textbook form
/// has `σ²`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussianDenominator {
    #[default]
    Sigma,
    SigmaSquared,
}

/// Validity region of the subsampled-Gaussian bound, both branches.
pub fn gaussian_order_valid(q: f64, sigma: f64, alpha: f64) -> bool {
    let l = (1.0 + 1.0 / (q * (alpha - 1.0))).ln();
    let s2 = sigma * sigma;
    let b1 = 0.5 * s2 * l - 2.0 * sigma.ln();
    let b2 = (0.5 * s2 * l * l - 5f64.ln() - 2.0 * sigma.ln())
        / (l + (q * alpha).ln() + 1.0 / (2.0 * s2));
    alpha <= b1.min(b2)
}

/// `(ε_g(α), valid)` for the subsampled Gaussian mechanism, published form.
pub fn rdp_gaussian_subsampled(q: f64, sigma: f64, alpha: f64) -> (f64, bool) {
    rdp_gaussian_subsampled_with(q, sigma, alpha, GaussianDenominator::Sigma)
}

pub fn rdp_gaussian_subsampled_with(
    q: f64,
    sigma: f64,
    alpha: f64,
    denom: GaussianDenominator,
) -> (f64, bool) {
    let d = match denom {
        GaussianDenominator::Sigma => sigma,
        GaussianDenominator::SigmaSquared => sigma * sigma,
    };
    (2.0 * q * q * alpha / d, gaussian_order_valid(q, sigma, alpha))
}

/// Unsubsampled selection RDP: Gumbel stage `α/(8σ_r²)` plus Gaussian test
/// stage `α/(2σ_p²)`.
pub fn rdp_selection_base(sigma_r: f64, sigma_p: f64, alpha: f64) -> f64 {
    alpha / (8.0 * sigma_r * sigma_r) + alpha / (2.0 * sigma_p * sigma_p)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Subsampled selection RDP at integer order `α ≥ 2`.
///
/// The `e^{ε(∞)}` factors are infinite for Gaussian-type noise, so every
/// `min{2, (e^{ε(∞)} - 1)^j}` is 2. Evaluated in log space.
pub fn rdp_selection_subsampled(q: f64, sigma_r: f64, sigma_p: f64, alpha: u32) -> Result<f64> {
    if alpha < 2 {
        return Err(Error::invalid(format!("selection RDP needs integer order >= 2, got {alpha}")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("sampling rate {q} outside [0, 1]")));
    }
    let a = alpha as f64;
    let lq = q.ln();
    let e2 = rdp_selection_base(sigma_r, sigma_p, 2.0);
    // ln(4(e^x - 1)) = ln 4 + x + ln(1 - e^{-x})
    let ln_first = (4f64.ln() + e2 + (-(-e2).exp_m1()).ln()).min(2f64.ln() + e2);
    let mut ln_binom = (a * (a - 1.0) / 2.0).ln();
    let mut terms = Vec::with_capacity(alpha as usize);
    terms.push(0.0);
    terms.push(2.0 * lq + ln_binom + ln_first);
    for j in 3..=alpha {
        let jf = j as f64;
        ln_binom += (a - jf + 1.0).ln() - jf.ln();
        terms.push(jf * lq + ln_binom + (jf - 1.0) * rdp_selection_base(sigma_r, sigma_p, jf) + 2f64.ln());
    }
    Ok(log_sum_exp(&terms) / (a - 1.0))
}

/// Selection RDP at any grid order: non-integer orders use the next integer
/// (RDP is nondecreasing in α), and orders below 2 use order 2.
pub fn rdp_selection_at(q: f64, sigma_r: f64, sigma_p: f64, alpha: f64) -> Result<f64> {
    let k = alpha.ceil().max(2.0);
    rdp_selection_subsampled(q, sigma_r, sigma_p, k as u32)
}

/// `{1.25, 1.5, 1.75, 2, 2.5, 3, 4, …, 64, 128, 256, 512, 1024}`.
pub fn default_grid() -> Vec<f64> {
    let mut g = vec![1.25, 1.5, 1.75, 2.0, 2.5];
    g.extend((3..=64).map(f64::from));
    g.extend([128.0, 256.0, 512.0, 1024.0]);
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "params", rename_all = "lowercase")]
pub enum PrivacyEvent {
    Selection {
        q: f64,
        sigma_r: f64,
        sigma_p: f64,
        delta_t: f64,
    },
    Gradient {
        q: f64,
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub round: usize,
    pub iter: usize,
    #[serde(flatten)]
    pub event: PrivacyEvent,
}

/// RDP curve on a fixed grid; dropped orders hold `+∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    pub alphas: Vec<f64>,
    pub eps: Vec<f64>,
    pub delta_hat: f64,
}

impl RdpCurve {
    pub fn zero(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::Accounting("empty order grid".into()));
        }
        if alphas[0] <= 1.0 || alphas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Accounting("orders must be > 1 and strictly increasing".into()));
        }
        let n = alphas.len();
        Ok(RdpCurve {
            alphas,
            eps: vec![0.0; n],
            delta_hat: 0.0,
        })
    }

    /// Pointwise sum with another curve on the same grid.
    pub fn add(&self, other: &RdpCurve) -> Result<RdpCurve> {
        if self.alphas != other.alphas {
            return Err(Error::Accounting("curves live on different grids".into()));
        }
        Ok(RdpCurve {
            alphas: self.alphas.clone(),
            eps: self.eps.iter().zip(&other.eps).map(|(a, b)| a + b).collect(),
            delta_hat: self.delta_hat + other.delta_hat,
        })
    }

    pub fn live_orders(&self) -> usize {
        self.eps.iter().filter(|e| e.is_finite()).count()
    }
}

/// Converted guarantee.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpGuarantee {
    pub epsilon: f64,
    pub delta_total: f64,
    pub alpha: f64,
}

/// `ε = min_α ε(α) + log(1/δ)/(α - 1)`, `δ_total = δ + δ̂`.
/// Whether a guarantee meets or exceeds the budget.
pub fn exhausts(g: &DpGuarantee, epsilon_budget: f64) -> bool {
    g.epsilon >= epsilon_budget || g.delta_total >= 1.0
}

pub fn to_dp(curve: &RdpCurve, delta: f64) -> Result<DpGuarantee> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("target delta {delta} outside (0, 1)")));
    }
    let mut best = DpGuarantee {
        epsilon: f64::INFINITY,
        delta_total: delta + curve.delta_hat,
        alpha: f64::NAN,
    };
    for (&a, &e) in curve.alphas.iter().zip(&curve.eps) {
        let v = e + (1.0 / delta).ln() / (a - 1.0);
        if v < best.epsilon {
            best.epsilon = v;
            best.alpha = a;
        }
    }
    if best.epsilon.is_infinite() {
        return Err(Error::Accounting("no valid order left on the grid".into()));
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetStatus {
    Within,
    Exhausted,
}

/// Running composition of privacy events.
#[derive(Clone, Debug)]
pub struct PrivacyLedger {
    denom: GaussianDenominator,
    events: Vec<EventRecord>,
    curve: RdpCurve,
    cache: HashMap<[u64; 5], Vec<f64>>,
}

impl PrivacyLedger {
    pub fn new(alphas: Vec<f64>, denom: GaussianDenominator) -> Result<Self> {
        Ok(PrivacyLedger {
            denom,
            events: Vec::new(),
            curve: RdpCurve::zero(alphas)?,
            cache: HashMap::new(),
        })
    }

    pub fn with_default_grid() -> Self {
        Self::new(default_grid(), GaussianDenominator::Sigma).expect("default grid is valid")
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn curve(&self) -> &RdpCurve {
        &self.curve
    }

    /// Per-order contribution of one event; dropped orders are `+∞`.
    pub fn event_curve(&mut self, ev: &PrivacyEvent) -> Result<Vec<f64>> {
        let key = match *ev {
            PrivacyEvent::Selection {
                q,
                sigma_r,
                sigma_p,
                delta_t,
            } => [0, q.to_bits(), sigma_r.to_bits(), sigma_p.to_bits(), delta_t.to_bits()],
            PrivacyEvent::Gradient { q, sigma } => [1, q.to_bits(), sigma.to_bits(), 0, 0],
        };
        if let Some(v) = self.cache.get(&key) {
            return Ok(v.clone());
        }
        let v = match *ev {
            PrivacyEvent::Selection {
                q,
                sigma_r,
                sigma_p,
                delta_t,
            } => {
                validate_positive(&[("sigma_r", sigma_r), ("sigma_p", sigma_p)])?;
                if !(delta_t > 0.0 && delta_t < 1.0) {
                    return Err(Error::invalid(format!("delta_t {delta_t} outside (0, 1)")));
                }
                // orders share an integer ceiling, so memoise per integer
                let mut by_int: HashMap<u32, f64> = HashMap::new();
                let mut out = Vec::with_capacity(self.curve.alphas.len());
                for &a in &self.curve.alphas {
                    let k = a.ceil().max(2.0) as u32;
                    let e = match by_int.get(&k) {
                        Some(&e) => e,
                        None => {
                            let e = rdp_selection_subsampled(q, sigma_r, sigma_p, k)?;
                            by_int.insert(k, e);
                            e
                        }
                    };
                    out.push(e);
                }
                out
            }
            PrivacyEvent::Gradient { q, sigma } => {
                validate_positive(&[("sigma", sigma)])?;
                if !(q > 0.0 && q <= 1.0) {
                    return Err(Error::invalid(format!("sampling rate {q} outside (0, 1]")));
                }
                self.curve
                    .alphas
                    .iter()
                    .map(|&a| {
                        let (e, ok) = rdp_gaussian_subsampled_with(q, sigma, a, self.denom);
                        if ok {
                            e
                        } else {
                            f64::INFINITY
                        }
                    })
                    .collect()
            }
        };
        self.cache.insert(key, v.clone());
        Ok(v)
    }

    /// Adds an event in place.
    pub fn push(&mut self, rec: EventRecord) -> Result<()> {
        let add = self.event_curve(&rec.event)?;
        let eps: Vec<f64> = self.curve.eps.iter().zip(&add).map(|(a, b)| a + b).collect();
        if eps.iter().all(|e| e.is_infinite()) {
            return Err(Error::Accounting(
                "every order violates the Gaussian bound's validity region; use a larger sigma or smaller sampling rate"
                    .into(),
            ));
        }
        self.curve.eps = eps;
        if let PrivacyEvent::Selection { delta_t, .. } = rec.event {
            self.curve.delta_hat += delta_t;
        }
        self.events.push(rec);
        Ok(())
    }

    /// Value-style composition.
    pub fn compose(&self, rec: EventRecord) -> Result<PrivacyLedger> {
        let mut next = self.clone();
        next.push(rec)?;
        Ok(next)
    }

    /// Converted guarantee; an empty ledger is `(0, δ)`.
    pub fn to_dp(&self, delta: f64) -> Result<DpGuarantee> {
        if self.events.is_empty() {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::invalid(format!("target delta {delta} outside (0, 1)")));
            }
            return Ok(DpGuarantee {
                epsilon: 0.0,
                delta_total: delta,
                alpha: f64::NAN,
            });
        }
        to_dp(&self.curve, delta)
    }

    /// Exhausted iff converted ε reaches the budget or `δ_total ≥ 1`.
    pub fn check_budget(&self, epsilon_budget: f64, delta: f64) -> Result<BudgetStatus> {
        if self.events.is_empty() && epsilon_budget > 0.0 {
            return Ok(BudgetStatus::Within);
        }
        let g = self.to_dp(delta)?;
        Ok(if g.epsilon >= epsilon_budget || g.delta_total >= 1.0 {
            BudgetStatus::Exhausted
        } else {
            BudgetStatus::Within
        })
    }

    /// Budget status as if `events` had been pushed, without recording them.
    /// Guarantee the ledger would give after also composing `events`.
    pub fn preview(&mut self, events: &[PrivacyEvent], delta: f64) -> Result<DpGuarantee> {
        let mut curve = self.curve.clone();
        for ev in events {
            let add = self.event_curve(ev)?;
            curve.eps.iter_mut().zip(&add).for_each(|(a, b)| *a += b);
            if let PrivacyEvent::Selection { delta_t, .. } = ev {
                curve.delta_hat += delta_t;
            }
        }
        if curve.live_orders() == 0 {
            return Err(Error::Accounting(
                "every order violates the Gaussian bound's validity region; use a larger sigma or smaller sampling rate"
                    .into(),
            ));
        }
        to_dp(&curve, delta)
    }

    pub fn preview_budget(&mut self, events: &[PrivacyEvent], epsilon_budget: f64, delta: f64) -> Result<BudgetStatus> {
        let g = self.preview(events, delta)?;
        Ok(if exhausts(&g, epsilon_budget) {
            BudgetStatus::Exhausted
        } else {
            BudgetStatus::Within
        })
    }

    pub fn export(&self, delta: f64) -> Result<LedgerExport> {
        let g = self.to_dp(delta)?;
        Ok(LedgerExport {
            table: self
                .curve
                .alphas
                .iter()
                .zip(&self.curve.eps)
                .filter(|(_, e)| e.is_finite())
                .map(|(&alpha, &eps)| OrderEps { alpha, eps })
                .collect(),
            epsilon: g.epsilon,
            delta_total: g.delta_total,
            best_alpha: g.alpha,
            events: self.events.len(),
            released: self
                .events
                .iter()
                .filter(|e| matches!(e.event, PrivacyEvent::Gradient { .. }))
                .count(),
        })
    }
}

fn validate_positive(xs: &[(&str, f64)]) -> Result<()> {
    for (n, x) in xs {
        if !(*x > 0.0) {
            return Err(Error::invalid(format!("{n} must be positive, got {x}")));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderEps {
    pub alpha: f64,
    pub eps: f64,
}

/// Serializable ledger summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerExport {
    pub table: Vec<OrderEps>,
    pub epsilon: f64,
    pub delta_total: f64,
    pub best_alpha: f64,
    pub events: usize,
    pub released: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        let (e, ok) = rdp_gaussian_subsampled(0.01, 1.0, 2.0);
        assert_eq!(e, 4e-4);
        assert!(ok);
        let (e4, _) = rdp_gaussian_subsampled(0.01, 1.0, 4.0);
        assert_eq!(e4, 2.0 * e);
        assert!(rdp_gaussian_subsampled(1e-9, 1.0, 2.0).0 < 1e-15);
        let (sq, _) = rdp_gaussian_subsampled_with(0.1, 2.0, 3.0, GaussianDenominator::SigmaSquared);
        assert!((sq - 2.0 * 0.01 * 3.0 / 4.0).abs() < 1e-16);
        // large q with σ = 1: only tiny orders survive
        assert!(!gaussian_order_valid(0.1, 1.0, 2.0));
    }

    #[test]
    fn selection_values() {
        assert_eq!(rdp_selection_base(1.0, 1.0, 2.0), 1.25);
        assert_eq!(
            rdp_selection_base(1.0, 1.0, 2.0),
            rdp_selection_base(1.0, f64::INFINITY, 2.0) + rdp_selection_base(f64::INFINITY, 1.0, 2.0)
        );
        assert_eq!(rdp_selection_subsampled(0.0, 1.0, 1.0, 5).unwrap(), 0.0);
        let v = rdp_selection_subsampled(0.1, 1.0, 1.0, 2).unwrap();
        assert!((v - 0.0674781267127392).abs() < 1e-12);
        let closed = (1.0f64 + 0.01 * (4.0 * 1.25f64.exp_m1()).min(2.0 * 1.25f64.exp())).ln();
        assert!((v - closed).abs() < 1e-15);
        assert!(rdp_selection_subsampled(0.1, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn selection_matches_high_precision_oracle() {
        let cases = [
            (0.1, 3, 0.1290478687998355),
            (0.1, 5, 0.5686307107812449),
            (0.01, 4, 0.0015181180732038),
            (0.05, 10, 2.9987148022168135),
            (0.02, 32, 15.984142290543848),
        ];
        for (q, a, want) in cases {
            let got = rdp_selection_subsampled(q, 1.0, 1.0, a).unwrap();
            assert!((got - want).abs() < 1e-10 * want.max(1.0), "q={q} α={a}: {got} vs {want}");
        }
    }

    #[test]
    fn conversion() {
        let c = RdpCurve {
            alphas: vec![2.0],
            eps: vec![1.0],
            delta_hat: 0.0,
        };
        assert!((to_dp(&c, (-1.0f64).exp()).unwrap().epsilon - 2.0).abs() < 1e-15);
        let mut grid = default_grid();
        grid.push(1025.0);
        let z = RdpCurve::zero(grid).unwrap();
        let g = to_dp(&z, 1e-5).unwrap();
        assert!((g.epsilon - 0.011243091274384989).abs() < 1e-15);
        let c = RdpCurve {
            delta_hat: 3e-6,
            ..z
        };
        assert!((to_dp(&c, 1e-5).unwrap().delta_total - 1.3e-5).abs() < 1e-20);
    }

    #[test]
    fn ledger_rules() {
        let sel = PrivacyEvent::Selection {
            q: 0.02,
            sigma_r: 1.0,
            sigma_p: 1.0,
            delta_t: 1e-6,
        };
        let grad = PrivacyEvent::Gradient { q: 0.02, sigma: 1.0 };
        let mut l = PrivacyLedger::with_default_grid();
        assert_eq!(l.check_budget(16.0, 1e-5).unwrap(), BudgetStatus::Within);
        let per_sel = l.event_curve(&sel).unwrap();
        let per_grad = l.event_curve(&grad).unwrap();
        for i in 0..10 {
            l.push(EventRecord { round: 1, iter: i, event: sel }).unwrap();
        }
        l.push(EventRecord { round: 1, iter: 9, event: grad }).unwrap();
        for (k, e) in l.curve().eps.iter().enumerate() {
            let want = 10.0 * per_sel[k] + per_grad[k];
            if want.is_finite() {
                assert!((e - want).abs() < 1e-12 * want.max(1.0));
            } else {
                assert!(e.is_infinite());
            }
        }
        assert!((l.curve().delta_hat - 1e-5).abs() < 1e-18);
        assert_eq!(l.check_budget(0.0, 1e-5).unwrap(), BudgetStatus::Exhausted);
        let json = serde_json::to_string(&l.events()[0]).unwrap();
        assert!(json.contains("\"event\":\"selection\"") && json.contains("\"params\""));
        let back: EventRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, l.events()[0]);
    }
}
