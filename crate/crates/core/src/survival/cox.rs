//! Cox negative log partial likelihood with Breslow handling of tied times.
//!
//! The risk set of subject `i` is every subject with `t_j >= t_i`. Only
//! subjects with an event contribute an outer term; censored subjects appear
//! in risk sets only.

/// Subjects sorted by ascending time, split into runs of equal time.
#[derive(Debug, Clone)]
pub struct RiskSets {
    order: Vec<usize>,
    /// `[start, end)` ranges into `order`, ascending in time.
    groups: Vec<(usize, usize)>,
}

impl RiskSets {
    pub fn new(times: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]).then(a.cmp(&b)));
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=order.len() {
            if i == order.len() || times[order[i]] != times[order[start]] {
                groups.push((start, i));
                start = i;
            }
        }
        Self { order, groups }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `−Σ_{i: event} [η_i − log Σ_{j: t_j ≥ t_i} exp(η_j)]`.
pub fn neg_log_partial_likelihood(rs: &RiskSets, eta: &[f64], events: &[bool]) -> f64 {
    if rs.is_empty() {
        return 0.0;
    }
    let shift = max_of(eta);
    let mut s = 0.0;
    let mut loss = 0.0;
    for &(a, b) in rs.groups.iter().rev() {
        for &i in &rs.order[a..b] {
            s += (eta[i] - shift).exp();
        }
        let log_s = s.ln() + shift;
        for &i in &rs.order[a..b] {
            if events[i] {
                loss -= eta[i] - log_s;
            }
        }
    }
    loss
}

/// Loss and its gradient with respect to `eta`.
pub fn loss_and_gradient(rs: &RiskSets, eta: &[f64], events: &[bool]) -> (f64, Vec<f64>) {
    let n = rs.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    let shift = max_of(eta);
    let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();
    // risk-set sums, one per group
    let mut group_s = vec![0.0; rs.groups.len()];
    let mut s = 0.0;
    let mut loss = 0.0;
    for (g, &(a, b)) in rs.groups.iter().enumerate().rev() {
        for &i in &rs.order[a..b] {
            s += w[i];
        }
        group_s[g] = s;
        let log_s = s.ln() + shift;
        for &i in &rs.order[a..b] {
            if events[i] {
                loss -= eta[i] - log_s;
            }
        }
    }
    // subject k belongs to the risk sets of every event with t_i <= t_k
    let mut grad = vec![0.0; n];
    let mut inv_acc = 0.0;
    for (g, &(a, b)) in rs.groups.iter().enumerate() {
        let d = rs.order[a..b].iter().filter(|&&i| events[i]).count();
        inv_acc += d as f64 / group_s[g];
        for &k in &rs.order[a..b] {
            grad[k] = w[k] * inv_acc - if events[k] { 1.0 } else { 0.0 };
        }
    }
    (loss, grad)
}

/// First and second derivative of the loss along the direction `x` (a
/// covariate column) at linear predictor `eta`.
pub fn directional_derivatives(rs: &RiskSets, eta: &[f64], events: &[bool], x: &[f64]) -> (f64, f64) {
    if rs.is_empty() {
        return (0.0, 0.0);
    }
    let shift = max_of(eta);
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    let (mut g, mut h) = (0.0, 0.0);
    for &(a, b) in rs.groups.iter().rev() {
        for &i in &rs.order[a..b] {
            let w = (eta[i] - shift).exp();
            s0 += w;
            s1 += w * x[i];
            s2 += w * x[i] * x[i];
        }
        let mean = s1 / s0;
        let var = (s2 / s0 - mean * mean).max(0.0);
        for &i in &rs.order[a..b] {
            if events[i] {
                g += mean - x[i];
                h += var;
            }
        }
    }
    (g, h)
}
