//! Small numerical helpers shared by the engines.

use rustfft::FftPlanner;

use crate::C64;

/// Fixed chunk length for deterministic reductions. Chunk boundaries never
/// depend on the rayon pool size, so sums are bit-identical for any thread count.
pub(crate) const REDUCE_CHUNK: usize = 4096;

/// In-place FFT with kernel `exp(-2πi kn/N)` (no normalisation).
pub(crate) fn fft_forward(buf: &mut [C64]) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(buf.len()).process(buf);
}

/// In-place FFT with kernel `exp(+2πi kn/N)` (no normalisation).
pub(crate) fn fft_inverse(buf: &mut [C64]) {
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(buf.len()).process(buf);
}

/// Signed frequency index for bin `k` of an `n`-point transform.
pub(crate) fn signed_index(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Linear interpolation on a uniform grid, clamped to the end values.
pub(crate) fn interp_uniform(values: &[f64], start: f64, step: f64, x: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let u = (x - start) / step;
    if u <= 0.0 {
        return values[0];
    }
    if u >= (n - 1) as f64 {
        return values[n - 1];
    }
    let i = u.floor() as usize;
    let frac = u - i as f64;
    if frac == 0.0 {
        values[i]
    } else {
        values[i] * (1.0 - frac) + values[i + 1] * frac
    }
}

/// Three-sample median filter; end samples are kept.
pub(crate) fn median3(x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    for i in 1..x.len().saturating_sub(1) {
        let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
        out[i] = a.max(b).min(a.min(b).max(c));
    }
    out
}

/// Index of the first strict local minimum at or after `from`.
pub(crate) fn first_local_min(x: &[f64], from: usize) -> Option<usize> {
    (from.max(1)..x.len().saturating_sub(1)).find(|&i| x[i] < x[i - 1] && x[i] <= x[i + 1])
}

/// Sub-sample vertex of the parabola through three equally spaced samples.
pub(crate) fn parabolic_offset(ym: f64, y0: f64, yp: f64) -> f64 {
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < f64::MIN_POSITIVE {
        0.0
    } else {
        (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
    }
}

/// Exponential of a 3×3 rate generator whose off-diagonal entries are
/// non-negative and whose columns sum to zero.
///
/// Scaling and squaring on the uniformised matrix `Q = M + qI` keeps every
/// Taylor term non-negative.
pub(crate) fn expm_generator3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let q = (0..3).map(|i| -m[i][i]).fold(0.0_f64, f64::max);
    if q == 0.0 {
        return IDENTITY3;
    }
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while q * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let qs = q * scale;
    let mut base = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            base[i][j] = m[i][j] * scale + if i == j { qs } else { 0.0 };
        }
    }
    // exp(Q) by Taylor series; ||Q|| <= 1 so 20 terms reach round-off.
    let mut sum = IDENTITY3;
    let mut term = IDENTITY3;
    for k in 1..=20 {
        term = matmul3(&term, &base);
        let inv = 1.0 / k as f64;
        let mut small = true;
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v *= inv;
                if *v > 1e-18 {
                    small = false;
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                sum[i][j] += term[i][j];
            }
        }
        if small {
            break;
        }
    }
    let damp = (-qs).exp();
    for row in sum.iter_mut() {
        for v in row.iter_mut() {
            *v *= damp;
        }
    }
    for _ in 0..squarings {
        sum = matmul3(&sum, &sum);
    }
    sum
}

pub(crate) const IDENTITY3: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub(crate) fn matmul3(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..3 {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub(crate) fn matvec3(a: &[[f64; 3]; 3], x: &[f64; 3]) -> [f64; 3] {
    [
        a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
        a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2],
        a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2],
    ]
}
