//! Special functions and distribution tails used by the field statistics:
//! regularized incomplete beta, F and t survival functions, and the
//! studentized range distribution.

use std::collections::BinaryHeap;

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Upper standard normal tail `P(Z > x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

pub fn normal_cdf(x: f64) -> f64 {
    normal_sf(-x)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta_inc needs positive shape parameters");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(F > f)` for an F distribution with `(d1, d2)` degrees of freedom.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_inc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Two-sided Student t tail `P(|T| > t)`.
pub fn t_sf_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_inc(df / 2.0, 0.5, df / (df + t * t))
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature of `f` over `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    const MAX_PIECES: usize = 4000;
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let mut total = v;
    let mut err = e;
    while heap.len() < MAX_PIECES && err > rel_tol * total.abs() && err > 1e-300 {
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed accumulated update rounding.
    heap.iter().map(|p| p.value).sum()
}

const QUAD_TOL: f64 = 1e-13;

/// `P(range > w)` for `k` independent standard normals.
pub fn normal_range_sf(w: f64, k: usize) -> f64 {
    assert!(k >= 2);
    if w <= 0.0 {
        return 1.0;
    }
    let m = k - 1;
    let integrand = |z: f64| {
        let a = normal_sf(z);
        let b = if z >= 0.0 {
            normal_sf(z) - normal_sf(z + w)
        } else if z + w <= 0.0 {
            normal_cdf(z + w) - normal_cdf(z)
        } else {
            1.0 - normal_cdf(z) - normal_sf(z + w)
        };
        // sum_{i<m} a^i b^(m-1-i), built as S_j = b S_(j-1) + a^(j-1).
        let mut sum = 1.0;
        let mut ai = 1.0;
        for _ in 1..m {
            ai *= a;
            sum = b * sum + ai;
        }
        normal_pdf(z) * normal_sf(z + w) * sum
    };
    let c = -0.5 * w;
    let r = k as f64 * integrate(integrand, c - 10.0, c + 10.0, QUAD_TOL);
    r.clamp(0.0, 1.0)
}

/// Survival function of the studentized range `Q(k, df)`.
pub fn studentized_range_sf(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2 && df > 0.0);
    if q <= 0.0 {
        return 1.0;
    }
    if df.is_infinite() {
        return normal_range_sf(q, k);
    }
    let half = df / 2.0;
    let ln_norm = std::f64::consts::LN_2 + half * half.ln() - ln_gamma(half);
    let density = |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            (ln_norm + (df - 1.0) * s.ln() - half * s * s).exp()
        }
    };
    let s_hi = ((df + 40.0 * (2.0 * df).sqrt() + 200.0) / df).sqrt();
    let p = integrate(|s| density(s) * normal_range_sf(q * s, k), 0.0, s_hi, QUAD_TOL);
    p.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn integrate_polynomial_and_gaussian() {
        assert!(rel(integrate(|x| x * x, 0.0, 3.0, 1e-14), 9.0) < 1e-14);
        let g = integrate(normal_pdf, -12.0, 12.0, 1e-14);
        assert!((g - 1.0).abs() < 1e-13);
    }

    #[test]
    fn beta_inc_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a; I_x(1, b) = 1 - (1-x)^b.
        for &x in &[0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!(rel(beta_inc(1.0, 1.0, x), x) < 1e-13);
            assert!(rel(beta_inc(3.5, 1.0, x), x.powf(3.5)) < 1e-12);
            assert!(rel(beta_inc(1.0, 4.0, x), 1.0 - (1.0 - x).powi(4)) < 1e-12);
        }
    }

    #[test]
    fn f_sf_even_d1_closed_form() {
        // For d1 = 2: P(F > f) = (1 + 2f/d2)^(-d2/2).
        for &(f, d2) in &[(0.3f64, 5.0f64), (2.0, 12.0), (11.0, 40.0), (60.0, 30.0)] {
            let exact = (1.0 + 2.0 * f / d2).powf(-d2 / 2.0);
            assert!(rel(f_sf(f, 2.0, d2), exact) < 1e-11, "f={f} d2={d2}");
        }
        assert_eq!(f_sf(0.0, 3.0, 10.0), 1.0);
    }

    #[test]
    fn t_two_sided_df1_is_cauchy() {
        for &t in &[0.2f64, 1.0, 3.0, 25.0] {
            let exact = 1.0 - 2.0 * t.atan() / std::f64::consts::PI;
            assert!(rel(t_sf_two_sided(t, 1.0), exact) < 1e-11);
        }
    }

    #[test]
    fn range_of_two_normals() {
        // Range of 2 normals is |Z1 - Z2| ~ sqrt(2)|Z|.
        for &w in &[0.1, 1.0, 3.0, 8.0] {
            let exact = 2.0 * normal_sf(w / std::f64::consts::SQRT_2);
            assert!(rel(normal_range_sf(w, 2), exact) < 1e-10, "w={w}");
        }
        assert_eq!(normal_range_sf(0.0, 5), 1.0);
    }

    #[test]
    fn studentized_k2_matches_t() {
        for &(q, df) in &[(1.0, 5.0), (3.5, 12.0), (6.0, 30.0), (9.0, 195.0)] {
            let exact = t_sf_two_sided(q / std::f64::consts::SQRT_2, df);
            assert!(rel(studentized_range_sf(q, 2, df), exact) < 1e-9, "q={q} df={df}");
        }
    }

    #[test]
    fn studentized_table_values() {
        // Published 5% critical values.
        assert!((studentized_range_sf(3.877, 3, 10.0) - 0.05).abs() < 2e-4);
        assert!((studentized_range_sf(4.232, 5, 20.0) - 0.05).abs() < 2e-4);
        assert!((studentized_range_sf(3.314, 3, f64::INFINITY) - 0.05).abs() < 2e-4);
    }
}
