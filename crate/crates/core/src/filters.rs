//! Small image-filtering kernels on row-major `f64` buffers.

/// Normalized, sampled Gaussian of the given radius.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    if sigma <= 0.0 || radius == 0 {
        return vec![1.0];
    }
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable correlation keeping only fully-covered positions. Output is
/// `(w - 2r) x (h - 2r)` for a kernel of length `2r + 1`.
pub fn separable_valid(
    data: &[f64],
    w: usize,
    h: usize,
    kernel: &[f64],
) -> (Vec<f64>, usize, usize) {
    let n = kernel.len();
    debug_assert!(n % 2 == 1 && w >= n && h >= n);
    let ow = w + 1 - n;
    let oh = h + 1 - n;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * row[x + k];
            }
            tmp[y * ow + x] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (k, &kv) in kernel.iter().enumerate() {
            let src = &tmp[(y + k) * ow..(y + k + 1) * ow];
            let dst = &mut out[y * ow..(y + 1) * ow];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += kv * s;
            }
        }
    }
    (out, ow, oh)
}

/// Separable correlation with edge replication; output has the input size.
pub fn separable_replicate(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * data[y * w + clamp(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp[clamp(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// 3x3 correlation with edge replication.
pub fn correlate3x3(data: &[f64], w: usize, h: usize, k: &[[f64; 3]; 3]) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (dy, krow) in k.iter().enumerate() {
                let yy = (y as isize + dy as isize - 1).clamp(0, h as isize - 1) as usize;
                for (dx, &kv) in krow.iter().enumerate() {
                    let xx = (x as isize + dx as isize - 1).clamp(0, w as isize - 1) as usize;
                    acc += kv * data[yy * w + xx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
pub const SOBEL_Y: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];

const T: f64 = 1.0 / 3.0;
pub const PREWITT_X: [[f64; 3]; 3] = [[T, 0.0, -T], [T, 0.0, -T], [T, 0.0, -T]];
pub const PREWITT_Y: [[f64; 3]; 3] = [[T, T, T], [0.0, 0.0, 0.0], [-T, -T, -T]];

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
