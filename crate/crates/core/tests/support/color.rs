//! Reference sRGB -> L*a*b* conversion derived from the sRGB primaries and
//! the D65 white point, independent of the crate's tables and matrix.

#![allow(dead_code)]

const PRIMARIES: [[f64; 2]; 3] = [[0.64, 0.33], [0.30, 0.60], [0.15, 0.06]];
pub const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Solve `m s = w` by Cramer's rule.
fn solve3(m: &[[f64; 3]; 3], w: [f64; 3]) -> [f64; 3] {
    let d = det3(m);
    std::array::from_fn(|c| {
        let mut t = *m;
        for r in 0..3 {
            t[r][c] = w[r];
        }
        det3(&t) / d
    })
}

pub fn rgb_to_xyz_matrix() -> [[f64; 3]; 3] {
    // Columns are the primaries' XYZ at unit luminance.
    let mut p = [[0.0; 3]; 3];
    for (c, &[x, y]) in PRIMARIES.iter().enumerate() {
        p[0][c] = x / y;
        p[1][c] = 1.0;
        p[2][c] = (1.0 - x - y) / y;
    }
    let s = solve3(&p, WHITE);
    std::array::from_fn(|r| std::array::from_fn(|c| p[r][c] * s[c]))
}

fn decode(v: u8) -> f64 {
    let c = v as f64 / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

pub fn lab(rgb: [u8; 3]) -> [f64; 3] {
    let m = rgb_to_xyz_matrix();
    let lin = rgb.map(decode);
    let eps = 216.0 / 24389.0;
    let kappa = 24389.0 / 27.0;
    let f: [f64; 3] = std::array::from_fn(|r| {
        let t = (m[r][0] * lin[0] + m[r][1] * lin[1] + m[r][2] * lin[2]) / WHITE[r];
        if t > eps {
            t.cbrt()
        } else {
            (kappa * t + 16.0) / 116.0
        }
    });
    [116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

/// Hexcone hue in degrees by the sector formula.
pub fn hue(rgb: [u8; 3]) -> f64 {
    let [r, g, b] = rgb.map(|v| v as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    if d == 0.0 {
        return 0.0;
    }
    let h = if max == r {
        60.0 * ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / d + 2.0)
    } else {
        60.0 * ((r - g) / d + 4.0)
    };
    h.rem_euclid(360.0)
}

/// Frozen reference triples.
pub const REFERENCE: [([u8; 3], [f64; 3]); 5] = [
    ([255, 0, 0], [53.2407888676, 80.0924942864, 67.2031913974]),
    ([0, 0, 255], [32.2970094398, 79.1875173972, -107.8601628893]),
    ([200, 170, 40], [70.3048139820, -1.7987269534, 65.2990621241]),
    ([110, 150, 115], [58.3816540468, -21.0975198978, 14.1229589769]),
    ([110, 80, 60], [36.7043685526, 9.7707211868, 16.7070016616]),
];
