//! Reference computations that do not share code with the crate.
#![allow(dead_code)]

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

const CDF_LO: f64 = -12.0;
const CDF_H: f64 = 1e-4;

// cumulative Simpson integral of the density on a fine grid
fn cdf_table() -> &'static [f64] {
    static TABLE: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    TABLE.get_or_init(|| {
        let n = (24.0 / CDF_H).round() as usize;
        let mut acc = vec![0.0; n + 1];
        for i in 0..n {
            let a = CDF_LO + i as f64 * CDF_H;
            let piece = normal_pdf(a) + 4.0 * normal_pdf(a + 0.5 * CDF_H) + normal_pdf(a + CDF_H);
            acc[i + 1] = acc[i] + piece * CDF_H / 6.0;
        }
        acc
    })
}

/// Standard normal CDF from a tabulated integral with cubic Hermite interpolation.
pub fn normal_cdf(x: f64) -> f64 {
    let table = cdf_table();
    let u = (x - CDF_LO) / CDF_H;
    if u <= 0.0 {
        return 0.0;
    }
    if u >= (table.len() - 1) as f64 {
        return 1.0;
    }
    let i = u.floor() as usize;
    let s = u - i as f64;
    let (x0, x1) = (CDF_LO + i as f64 * CDF_H, CDF_LO + (i + 1) as f64 * CDF_H);
    let (h00, h10) = (
        2.0 * s.powi(3) - 3.0 * s * s + 1.0,
        s.powi(3) - 2.0 * s * s + s,
    );
    let (h01, h11) = (-2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
    h00 * table[i]
        + h10 * CDF_H * normal_pdf(x0)
        + h01 * table[i + 1]
        + h11 * CDF_H * normal_pdf(x1)
}

/// Mean of N(m, c) conditioned on v > 0.
pub fn truncated_normal_mean(m: f64, c: f64) -> f64 {
    let s = c.sqrt();
    let alpha = -m / s;
    m + s * normal_pdf(alpha) / (1.0 - normal_cdf(alpha))
}

/// CDF of N(m, c) conditioned on v > 0.
pub fn truncated_normal_cdf(v: f64, m: f64, c: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let s = c.sqrt();
    let z0 = normal_cdf(-m / s);
    (normal_cdf((v - m) / s) - z0) / (1.0 - z0)
}

/// Kolmogorov-Smirnov distance between a sample and a CDF.
pub fn ks_distance(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Geodesic distance to the exit door of a corridor with a rectangular
/// constriction, by Dijkstra on the visibility graph of the reflex corners and
/// door end points.
pub struct BottleneckGeodesic {
    pub length: f64,
    pub half_width: f64,
    pub neck_half_width: f64,
    pub neck_start: f64,
    pub neck_end: f64,
    pub door_half_width: f64,
}

type P = (f64, f64);

impl BottleneckGeodesic {
    fn half_width_at(&self, x: f64) -> f64 {
        if x >= self.neck_start && x <= self.neck_end {
            self.neck_half_width
        } else {
            self.half_width
        }
    }

    fn inside(&self, p: P) -> bool {
        let eps = 1e-12;
        p.0 >= -eps && p.0 <= self.length + eps && p.1.abs() <= self.half_width_at(p.0) + eps
            || self.on_neck_face(p)
    }

    // the vertical walls at the neck ends belong to the closed domain
    fn on_neck_face(&self, p: P) -> bool {
        let eps = 1e-12;
        ((p.0 - self.neck_start).abs() < eps || (p.0 - self.neck_end).abs() < eps)
            && p.1.abs() <= self.half_width + eps
    }

    fn visible(&self, a: P, b: P) -> bool {
        let n = 512;
        (0..=n).all(|i| {
            let s = i as f64 / n as f64;
            self.inside((a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)))
        }) && !self.crosses_neck_face(a, b)
    }

    // a segment may not pass through the stepped walls between samples
    fn crosses_neck_face(&self, a: P, b: P) -> bool {
        for x in [self.neck_start, self.neck_end] {
            if (a.0 - x) * (b.0 - x) < 0.0 {
                let s = (x - a.0) / (b.0 - a.0);
                let y = a.1 + s * (b.1 - a.1);
                if y.abs() > self.neck_half_width + 1e-12 {
                    return true;
                }
            }
        }
        false
    }

    fn dist(a: P, b: P) -> f64 {
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    }

    /// Remaining distance from a node with a straight, visible last leg.
    fn direct(&self, p: P) -> Option<f64> {
        let l = self.length;
        let d = self.door_half_width;
        let foot = (l, p.1.clamp(-d, d));
        self.visible(p, foot).then(|| Self::dist(p, foot))
    }

    pub fn distance(&self, q: P) -> f64 {
        let (s, e, w) = (self.neck_start, self.neck_end, self.neck_half_width);
        let mut nodes = vec![q, (s, w), (s, -w), (e, w), (e, -w)];
        nodes.push((self.length, self.door_half_width));
        nodes.push((self.length, -self.door_half_width));
        let n = nodes.len();
        let mut best = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        best[0] = 0.0;
        let mut answer = f64::INFINITY;
        for _ in 0..n {
            let Some(u) = (0..n)
                .filter(|&i| !done[i] && best[i].is_finite())
                .min_by(|&i, &j| best[i].partial_cmp(&best[j]).unwrap())
            else {
                break;
            };
            done[u] = true;
            if let Some(d) = self.direct(nodes[u]) {
                answer = answer.min(best[u] + d);
            }
            for v in 0..n {
                if !done[v] && self.visible(nodes[u], nodes[v]) {
                    let c = best[u] + Self::dist(nodes[u], nodes[v]);
                    if c < best[v] {
                        best[v] = c;
                    }
                }
            }
        }
        answer
    }
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let sorted = |xs: &[f64]| {
        let mut v = xs.to_vec();
        v.sort_by(|p, q| p.partial_cmp(q).unwrap());
        v
    };
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    let p = (1..=100)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u32 % 2 == 1 { 2.0 } else { -2.0 };
            sign * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum::<f64>()
        .clamp(0.0, 1.0);
    (d, p)
}
