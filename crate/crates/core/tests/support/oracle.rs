//! Independent reference implementations for the field statistics.
//!
//! Sums of squares are computed exactly over integer data with i128
//! rationals; distribution tails use closed forms where they exist and a
//! fixed composite Gauss-Legendre rule (with statrs special functions)
//! for the studentized range.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ratio {
    num: i128,
    den: i128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

impl Ratio {
    pub fn new(num: i128, den: i128) -> Self {
        assert!(den != 0);
        let g = gcd(num, den);
        let s = if den < 0 { -1 } else { 1 };
        Ratio {
            num: s * num / g,
            den: s * den / g,
        }
    }

    pub fn int(v: i128) -> Self {
        Ratio::new(v, 1)
    }

    pub fn add(self, o: Ratio) -> Ratio {
        let g = gcd(self.den, o.den);
        Ratio::new(self.num * (o.den / g) + o.num * (self.den / g), self.den / g * o.den)
    }

    pub fn sub(self, o: Ratio) -> Ratio {
        self.add(Ratio::new(-o.num, o.den))
    }

    pub fn mul(self, o: Ratio) -> Ratio {
        let g1 = gcd(self.num, o.den);
        let g2 = gcd(o.num, self.den);
        Ratio::new((self.num / g1) * (o.num / g2), (self.den / g2) * (o.den / g1))
    }

    pub fn div(self, o: Ratio) -> Ratio {
        assert!(o.num != 0);
        self.mul(Ratio::new(o.den, o.num))
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }
}

fn sum_ratio(xs: &[i64]) -> Ratio {
    Ratio::int(xs.iter().map(|&x| x as i128).sum())
}

/// Pearson r from exact integer sums.
pub fn pearson(xs: &[i64], ys: &[i64]) -> f64 {
    let n = xs.len() as i128;
    let sx: i128 = xs.iter().map(|&v| v as i128).sum();
    let sy: i128 = ys.iter().map(|&v| v as i128).sum();
    let sxx: i128 = xs.iter().map(|&v| (v as i128).pow(2)).sum();
    let syy: i128 = ys.iter().map(|&v| (v as i128).pow(2)).sum();
    let sxy: i128 = xs.iter().zip(ys).map(|(&a, &b)| a as i128 * b as i128).sum();
    let cxx = n * sxx - sx * sx;
    let cyy = n * syy - sy * sy;
    let cxy = n * sxy - sx * sy;
    // r^2 exactly, then the square root.
    let r2 = Ratio::new(cxy * cxy, 1).div(Ratio::new(cxx, 1).mul(Ratio::new(cyy, 1)));
    cxy.signum() as f64 * r2.to_f64().sqrt()
}

pub struct AnovaOracle {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ms_within: Ratio,
    pub means: Vec<Ratio>,
}

/// Survival function of F(d1, d2) for even d1:
/// sum_{j < d1/2} Gamma(b + j) / (Gamma(b) j!) z^j (1 - z)^b, z = d1 F / (d1 F + d2), b = d2 / 2.
pub fn f_sf_even(f: f64, d1: usize, d2: usize) -> f64 {
    assert!(d1.is_multiple_of(2), "closed form needs even d1");
    let b = d2 as f64 / 2.0;
    let z = d1 as f64 * f / (d1 as f64 * f + d2 as f64);
    let mut term = (1.0 - z).powf(b);
    let mut total = term;
    for j in 1..d1 / 2 {
        let j = j as f64;
        term *= (b + j - 1.0) / j * z;
        total += term;
    }
    total
}

pub fn anova(groups: &[Vec<i64>]) -> AnovaOracle {
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let grand = groups
        .iter()
        .fold(Ratio::int(0), |acc, g| acc.add(sum_ratio(g)))
        .div(Ratio::int(n as i128));
    let means: Vec<Ratio> = groups
        .iter()
        .map(|g| sum_ratio(g).div(Ratio::int(g.len() as i128)))
        .collect();
    let mut ssb = Ratio::int(0);
    let mut ssw = Ratio::int(0);
    for (g, m) in groups.iter().zip(&means) {
        let d = m.sub(grand);
        ssb = ssb.add(Ratio::int(g.len() as i128).mul(d).mul(d));
        for &x in g {
            let e = Ratio::int(x as i128).sub(*m);
            ssw = ssw.add(e.mul(e));
        }
    }
    let d1 = k - 1;
    let d2 = n - k;
    let msw = ssw.div(Ratio::int(d2 as i128));
    let f = ssb.div(Ratio::int(d1 as i128)).div(msw).to_f64();
    let p = if d1.is_multiple_of(2) {
        f_sf_even(f, d1, d2)
    } else {
        use statrs::distribution::{ContinuousCDF, FisherSnedecor};
        FisherSnedecor::new(d1 as f64, d2 as f64).unwrap().sf(f)
    };
    AnovaOracle {
        f,
        p,
        df_between: d1,
        df_within: d2,
        ms_within: msw,
        means,
    }
}

/// Tukey-Kramer statistic for each pair `i < j`, from exact sums.
pub fn tukey_q(groups: &[Vec<i64>]) -> Vec<(usize, usize, f64)> {
    let a = anova(groups);
    let mut out = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let d = a.means[j].sub(a.means[i]);
            let inv = Ratio::new(1, groups[i].len() as i128).add(Ratio::new(1, groups[j].len() as i128));
            let q2 = d.mul(d).div(a.ms_within.div(Ratio::int(2)).mul(inv));
            out.push((i, j, q2.to_f64().sqrt()));
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn composite(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let c = lo + h / 2.0;
        let mut s = 0.0;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            s += w * f(c + h / 2.0 * x);
        }
        total += s * h / 2.0;
    }
    total
}

fn upper(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// P(range of k standard normals > w), tail form so small values keep
/// their relative precision.
pub fn range_sf(w: f64, k: usize, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    if w <= 0.0 {
        return 1.0;
    }
    let m = k - 1;
    let f = |z: f64| {
        let qz = upper(z);
        let qzw = upper(z + w);
        let between = if z >= 0.0 {
            qz - qzw
        } else if z + w <= 0.0 {
            upper(-z - w) - upper(-z)
        } else {
            1.0 - upper(-z) - qzw
        };
        // sum_{i<m} qz^i between^(m-1-i)
        let mut s = 0.0;
        for i in 0..m {
            s += qz.powi(i as i32) * between.powi((m - 1 - i) as i32);
        }
        pdf(z) * qzw * s
    };
    let c = -w / 2.0;
    k as f64 * composite(f, c - 10.0, c + 10.0, 24, rule)
}

pub fn studentized_range_sf(q: f64, k: usize, df: usize) -> f64 {
    let rule = gauss_legendre(12);
    let nu = df as f64;
    let half = nu / 2.0;
    let ln_c = std::f64::consts::LN_2 + half * half.ln() - ln_gamma(half);
    let s_hi = ((nu + 40.0 * (2.0 * nu).sqrt() + 200.0) / nu).sqrt();
    let density = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (ln_c + (nu - 1.0) * s.ln() - half * s * s).exp()
        }
    };
    composite(|s| density(s) * range_sf(q * s, k, &rule), 0.0, s_hi, 80, &rule)
}

/// Five groups of integer-valued samples (sizes 2..=40) with random offsets.
pub fn random_instance(seed: u64) -> Vec<Vec<i64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..5)
        .map(|_| {
            let n = rng.random_range(2..=40);
            let center: i64 = rng.random_range(-300..300);
            let spread: i64 = rng.random_range(50..400);
            (0..n).map(|_| center + rng.random_range(-spread..=spread)).collect()
        })
        .collect()
}

pub fn as_f64(groups: &[Vec<i64>]) -> Vec<Vec<f64>> {
    groups
        .iter()
        .map(|g| g.iter().map(|&v| v as f64 / 1000.0).collect())
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}
