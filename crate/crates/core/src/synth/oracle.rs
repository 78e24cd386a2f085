//! Brute-force reference implementations.
//!
//! Each function here is written as literally as possible from the defining
//! formula and uses nothing from the rest of the crate, so it can be trusted
//! as an independent check on the optimized code paths.

/// Harrell C-index by enumerating every ordered pair. Returns
/// `(2·concordant + ties, 2·comparable)` so callers can compare exactly.
pub fn oracle_cindex_counts(times: &[f64], events: &[bool], risks: &[f64]) -> (u64, u64) {
    let n = times.len();
    let mut num = 0u64;
    let mut den = 0u64;
    for i in 0..n {
        for j in 0..n {
            if i == j || !events[i] {
                continue;
            }
            let comparable = times[i] < times[j] || (times[i] == times[j] && !events[j]);
            if !comparable {
                continue;
            }
            den += 2;
            if risks[i] > risks[j] {
                num += 2;
            } else if risks[i] == risks[j] {
                num += 1;
            }
        }
    }
    (num, den)
}

pub fn oracle_cindex(times: &[f64], events: &[bool], risks: &[f64]) -> Option<f64> {
    let (num, den) = oracle_cindex_counts(times, events, risks);
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Time-dependent AUC as the fraction of (case, control) pairs ordered
/// correctly, ties counting one half. Cases: event at or before `horizon`;
/// controls: observed beyond `horizon`.
pub fn oracle_auc(times: &[f64], events: &[bool], risks: &[f64], horizon: f64) -> Option<f64> {
    let mut num = 0u64;
    let mut den = 0u64;
    for i in 0..times.len() {
        if !(events[i] && times[i] <= horizon) {
            continue;
        }
        for j in 0..times.len() {
            if times[j] <= horizon {
                continue;
            }
            den += 2;
            if risks[i] > risks[j] {
                num += 2;
            } else if risks[i] == risks[j] {
                num += 1;
            }
        }
    }
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Product-limit estimate at each distinct event time, ascending.
pub fn oracle_km(times: &[f64], events: &[bool]) -> Vec<(f64, f64)> {
    let mut event_times: Vec<f64> = (0..times.len()).filter(|&i| events[i]).map(|i| times[i]).collect();
    event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    event_times.dedup();
    let mut s = 1.0;
    let mut out = Vec::new();
    for &t in &event_times {
        let at_risk = times.iter().filter(|&&x| x >= t).count();
        let died = (0..times.len()).filter(|&i| events[i] && times[i] == t).count();
        s *= (at_risk - died) as f64 / at_risk as f64;
        out.push((t, s));
    }
    out
}

/// Two-group log-rank statistic from a 2×2 table at every distinct event
/// time: returns `(chi_square, observed_a, expected_a)`.
pub fn oracle_logrank(a: &[(f64, bool)], b: &[(f64, bool)]) -> (f64, f64, f64) {
    let mut ts: Vec<f64> = a.iter().chain(b).filter(|x| x.1).map(|x| x.0).collect();
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup();
    let (mut o, mut e, mut v) = (0.0, 0.0, 0.0);
    for t in ts {
        let na = a.iter().filter(|x| x.0 >= t).count() as f64;
        let nb = b.iter().filter(|x| x.0 >= t).count() as f64;
        let da = a.iter().filter(|x| x.1 && x.0 == t).count() as f64;
        let db = b.iter().filter(|x| x.1 && x.0 == t).count() as f64;
        let n = na + nb;
        let d = da + db;
        o += da;
        e += d * na / n;
        if n > 1.0 {
            v += d * (na / n) * (nb / n) * (n - d) / (n - 1.0);
        }
    }
    let chi = if v > 0.0 { (o - e) * (o - e) / v } else { 0.0 };
    (chi, o, e)
}

/// Breslow negative log partial likelihood, one inner sum per event.
pub fn oracle_cox_loss(times: &[f64], events: &[bool], eta: &[f64]) -> f64 {
    let mut loss = 0.0;
    for i in 0..times.len() {
        if !events[i] {
            continue;
        }
        let mut s = 0.0;
        for j in 0..times.len() {
            if times[j] >= times[i] {
                s += eta[j].exp();
            }
        }
        loss += s.ln() - eta[i];
    }
    loss
}

/// Central-difference gradient of [`oracle_cox_loss`] with step `h`.
pub fn oracle_coxgrad(times: &[f64], events: &[bool], eta: &[f64], h: f64) -> Vec<f64> {
    (0..eta.len())
        .map(|k| {
            let mut p = eta.to_vec();
            let mut m = eta.to_vec();
            p[k] += h;
            m[k] -= h;
            (oracle_cox_loss(times, events, &p) - oracle_cox_loss(times, events, &m)) / (2.0 * h)
        })
        .collect()
}

/// Unpenalized single-covariate Cox coefficient by Newton's method on the
/// literal partial likelihood.
pub fn oracle_cox_newton(x: &[f64], times: &[f64], events: &[bool]) -> f64 {
    let mut beta = 0.0;
    for _ in 0..100 {
        let (mut g, mut h) = (0.0, 0.0);
        for i in 0..x.len() {
            if !events[i] {
                continue;
            }
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for j in 0..x.len() {
                if times[j] >= times[i] {
                    let w = (beta * x[j]).exp();
                    s0 += w;
                    s1 += w * x[j];
                    s2 += w * x[j] * x[j];
                }
            }
            g += s1 / s0 - x[i];
            h += s2 / s0 - (s1 / s0) * (s1 / s0);
        }
        let step = g / h;
        beta -= step;
        if step.abs() < 1e-13 {
            break;
        }
    }
    beta
}

/// Weights `n_i / (n_h − n_l)`, or all ones when `n_h == n_l`.
pub fn oracle_weights(counts: &[usize]) -> Vec<f64> {
    let nh = *counts.iter().max().unwrap();
    let nl = *counts.iter().min().unwrap();
    counts
        .iter()
        .map(|&n| if nh == nl { 1.0 } else { n as f64 / (nh - nl) as f64 })
        .collect()
}

/// Weighted nested mean for one patient: `(cluster, vector)` per patch.
pub fn oracle_eq9(patches: &[(usize, Vec<f64>)], weight: f64) -> Vec<f64> {
    let dim = patches[0].1.len();
    let mut clusters: Vec<usize> = patches.iter().map(|p| p.0).collect();
    clusters.sort();
    clusters.dedup();
    let c_i = clusters.len() as f64;
    let mut out = vec![0.0; dim];
    for k in 0..dim {
        let mut outer = 0.0;
        for &j in &clusters {
            let members: Vec<&Vec<f64>> = patches.iter().filter(|p| p.0 == j).map(|p| &p.1).collect();
            let l_ij = members.len() as f64;
            let mut inner = 0.0;
            for f in &members {
                inner += f[k];
            }
            outer += inner / l_ij;
        }
        out[k] = weight * (outer / c_i);
    }
    out
}

/// Cross-correlation of `x` (`[n, c, h, w]`) with `k` (`[o, c, kh, kw]`).
/// `same` pads to `ceil(h / stride)` outputs with the extra pad row/column on
/// the bottom/right; otherwise no padding.
pub fn oracle_conv(x: &[f64], xs: [usize; 4], k: &[f64], ks: [usize; 4], stride: usize, same: bool) -> (Vec<f64>, [usize; 4]) {
    let [n, c, h, w] = xs;
    let [o, _, kh, kw] = ks;
    let (oh, ow, pt, pl) = if same {
        let oh = h.div_ceil(stride);
        let ow = w.div_ceil(stride);
        let th = ((oh - 1) * stride + kh).saturating_sub(h);
        let tw = ((ow - 1) * stride + kw).saturating_sub(w);
        (oh, ow, th / 2, tw / 2)
    } else {
        ((h - kh) / stride + 1, (w - kw) / stride + 1, 0, 0)
    };
    let mut out = vec![0.0; n * o * oh * ow];
    for b in 0..n {
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pt as isize;
                                let ix = (ox * stride + kx) as isize - pl as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                let xv = x[((b * c + ic) * h + iy as usize) * w + ix as usize];
                                let kv = k[((oc * c + ic) * kh + ky) * kw + kx];
                                acc += xv * kv;
                            }
                        }
                    }
                    out[((b * o + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    (out, [n, o, oh, ow])
}

fn sig(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Dense perceptron with weights as row-major `[in, hidden]`, `[hidden, out]`.
pub struct OracleMlp<'a> {
    pub w1: &'a [f64],
    pub b1: &'a [f64],
    pub w2: &'a [f64],
    pub b2: &'a [f64],
    pub inputs: usize,
    pub hidden: usize,
}

impl OracleMlp<'_> {
    pub fn eval(&self, v: &[f64]) -> Vec<f64> {
        let mut hid = vec![0.0; self.hidden];
        for j in 0..self.hidden {
            let mut s = self.b1[j];
            for i in 0..self.inputs {
                s += v[i] * self.w1[i * self.hidden + j];
            }
            hid[j] = if s > 0.0 { s } else { 0.0 };
        }
        let mut out = vec![0.0; self.inputs];
        for i in 0..self.inputs {
            let mut s = self.b2[i];
            for j in 0..self.hidden {
                s += hid[j] * self.w2[j * self.inputs + i];
            }
            out[i] = s;
        }
        out
    }
}

/// Channel gate per `(sample, channel)`.
pub fn oracle_cam(x: &[f64], xs: [usize; 4], mlp: &OracleMlp) -> Vec<f64> {
    let [n, c, h, w] = xs;
    let mut out = Vec::with_capacity(n * c);
    for b in 0..n {
        let mut avg = vec![0.0; c];
        let mut mx = vec![f64::NEG_INFINITY; c];
        for ch in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    let v = x[((b * c + ch) * h + y) * w + xx];
                    avg[ch] += v / (h * w) as f64;
                    if v > mx[ch] {
                        mx[ch] = v;
                    }
                }
            }
        }
        let a = mlp.eval(&avg);
        let m = mlp.eval(&mx);
        for ch in 0..c {
            out.push(sig(a[ch] + m[ch]));
        }
    }
    out
}

/// Spatial gate per `(sample, y, x)`; `k` is `[1, 2, 7, 7]`.
pub fn oracle_sam(x: &[f64], xs: [usize; 4], k: &[f64], bias: f64) -> Vec<f64> {
    let [n, c, h, w] = xs;
    let mut pooled = vec![0.0; n * 2 * h * w];
    for b in 0..n {
        for y in 0..h {
            for xx in 0..w {
                let mut s = 0.0;
                let mut m = f64::NEG_INFINITY;
                for ch in 0..c {
                    let v = x[((b * c + ch) * h + y) * w + xx];
                    s += v;
                    if v > m {
                        m = v;
                    }
                }
                pooled[((b * 2) * h + y) * w + xx] = s / c as f64;
                pooled[((b * 2 + 1) * h + y) * w + xx] = m;
            }
        }
    }
    let (conv, _) = oracle_conv(&pooled, [n, 2, h, w], k, [1, 2, 7, 7], 1, true);
    conv.iter().map(|v| sig(v + bias)).collect()
}

/// `σ(MLP(v)) ⊗ v` per row of `[n, f]`.
pub fn oracle_nam(x: &[f64], n: usize, mlp: &OracleMlp) -> Vec<f64> {
    let f = mlp.inputs;
    let mut out = Vec::with_capacity(n * f);
    for b in 0..n {
        let row = &x[b * f..(b + 1) * f];
        let z = mlp.eval(row);
        for i in 0..f {
            out.push(sig(z[i]) * row[i]);
        }
    }
    out
}

/// `cam`, then `sam` on the channel-gated map, composed literally.
pub fn oracle_cbam(x: &[f64], xs: [usize; 4], mlp: &OracleMlp, k: &[f64], bias: f64) -> Vec<f64> {
    let [n, c, h, w] = xs;
    let cg = oracle_cam(x, xs, mlp);
    let mut xc = x.to_vec();
    for b in 0..n {
        for ch in 0..c {
            for p in 0..h * w {
                xc[(b * c + ch) * h * w + p] *= cg[b * c + ch];
            }
        }
    }
    let sg = oracle_sam(&xc, xs, k, bias);
    for b in 0..n {
        for ch in 0..c {
            for p in 0..h * w {
                xc[(b * c + ch) * h * w + p] *= sg[b * h * w + p];
            }
        }
    }
    xc
}

/// K-means objective: squared distance of every point to its center.
pub fn oracle_kmeans_cost(points: &[Vec<f64>], centers: &[Vec<f64>], assign: &[usize]) -> f64 {
    let mut cost = 0.0;
    for (p, &a) in points.iter().zip(assign) {
        for d in 0..p.len() {
            cost += (p[d] - centers[a][d]) * (p[d] - centers[a][d]);
        }
    }
    cost
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// descending eigenvalue. Eigenvectors are the columns of the returned
/// row-major matrix.
pub fn oracle_symmetric_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i][j] * m[i][j];
                }
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| m[y][y].partial_cmp(&m[x][x]).unwrap());
    let vals = idx.iter().map(|&i| m[i][i]).collect();
    let vecs = (0..n).map(|r| idx.iter().map(|&i| v[r][i]).collect()).collect();
    (vals, vecs)
}
