//! Reference implementations written straight from the definitions, in f64,
//! with no shared code paths with the library kernels.
#![allow(dead_code)]

use fasthand::heatmap::KeypointSet;
use fasthand::tensor::{ConvWeights, Tensor};
use rand::Rng;

pub fn random_tensor(rng: &mut impl Rng, h: usize, w: usize, c: usize) -> Tensor {
    let data = (0..h * w * c).map(|_| rng.random_range(-1.0f32..=1.0)).collect();
    Tensor::from_vec(h, w, c, data).unwrap()
}

pub fn random_values(rng: &mut impl Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.random_range(-1.0f32..=1.0)).collect()
}

pub fn random_dense(rng: &mut impl Rng, kh: usize, kw: usize, cin: usize, cout: usize) -> ConvWeights {
    ConvWeights::dense(kh, kw, cin, cout, random_values(rng, kh * kw * cin * cout), random_values(rng, cout)).unwrap()
}

pub fn random_depthwise(rng: &mut impl Rng, kh: usize, kw: usize, c: usize) -> ConvWeights {
    ConvWeights::depthwise(kh, kw, c, random_values(rng, kh * kw * c), random_values(rng, c)).unwrap()
}

/// Plain f64 grid indexed `[y][x][c]`.
pub type Grid = Vec<Vec<Vec<f64>>>;

pub fn grid(t: &Tensor) -> Grid {
    (0..t.height())
        .map(|y| (0..t.width()).map(|x| (0..t.channels()).map(|c| t.at(y, x, c) as f64).collect()).collect())
        .collect()
}

pub fn max_diff(t: &Tensor, g: &Grid) -> f64 {
    assert_eq!(t.height(), g.len(), "height");
    assert_eq!(t.width(), g[0].len(), "width");
    assert_eq!(t.channels(), g[0][0].len(), "channels");
    let mut worst = 0.0f64;
    for (y, row) in g.iter().enumerate() {
        for (x, px) in row.iter().enumerate() {
            for (c, v) in px.iter().enumerate() {
                worst = worst.max((t.at(y, x, c) as f64 - v).abs());
            }
        }
    }
    worst
}

/// Weight lookup `(ky, kx, ci, co)` for HWIO-packed dense values.
pub fn hwio(values: &[f32], kw: usize, cin: usize, cout: usize, ky: usize, kx: usize, ci: usize, co: usize) -> f64 {
    values[((ky * kw + kx) * cin + ci) * cout + co] as f64
}

/// Output size and leading pad: `same` gives `ceil(n / s)` with the odd pad
/// pixel at the end, `valid` gives `(n - k) / s + 1`.
pub fn axis(n: usize, k: usize, s: usize, same: bool) -> (usize, i64) {
    if same {
        let out = (n + s - 1) / s;
        let total = ((out - 1) * s + k) as i64 - n as i64;
        (out, total.max(0) / 2)
    } else {
        ((n - k) / s + 1, 0)
    }
}

/// Nested-loop dense convolution with implicit zero padding.
pub fn naive_conv(input: &Grid, w: &ConvWeights, stride: usize, same: bool) -> Grid {
    let (h, wd, cin) = (input.len(), input[0].len(), input[0][0].len());
    let (kh, kw, cout) = (w.kernel_h(), w.kernel_w(), w.out_channels());
    let (oh, pt) = axis(h, kh, stride, same);
    let (ow, pl) = axis(wd, kw, stride, same);
    let mut out = vec![vec![vec![0.0; cout]; ow]; oh];
    for oy in 0..oh {
        for ox in 0..ow {
            for co in 0..cout {
                let mut acc = w.bias()[co] as f64;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let iy = (oy * stride + ky) as i64 - pt;
                        let ix = (ox * stride + kx) as i64 - pl;
                        if iy < 0 || ix < 0 || iy >= h as i64 || ix >= wd as i64 {
                            continue;
                        }
                        for ci in 0..cin {
                            acc += input[iy as usize][ix as usize][ci] * hwio(w.values(), kw, cin, cout, ky, kx, ci, co);
                        }
                    }
                }
                out[oy][ox][co] = acc;
            }
        }
    }
    out
}

pub fn naive_depthwise(input: &Grid, w: &ConvWeights, stride: usize, same: bool) -> Grid {
    let (h, wd, c) = (input.len(), input[0].len(), input[0][0].len());
    let (kh, kw) = (w.kernel_h(), w.kernel_w());
    let (oh, pt) = axis(h, kh, stride, same);
    let (ow, pl) = axis(wd, kw, stride, same);
    let mut out = vec![vec![vec![0.0; c]; ow]; oh];
    for oy in 0..oh {
        for ox in 0..ow {
            for ch in 0..c {
                let mut acc = w.bias()[ch] as f64;
                for ky in 0..kh {
                    for kx in 0..kw {
                        let iy = (oy * stride + ky) as i64 - pt;
                        let ix = (ox * stride + kx) as i64 - pl;
                        if iy >= 0 && ix >= 0 && iy < h as i64 && ix < wd as i64 {
                            acc += input[iy as usize][ix as usize][ch] * w.values()[(ky * kw + kx) * c + ch] as f64;
                        }
                    }
                }
                out[oy][ox][ch] = acc;
            }
        }
    }
    out
}

/// Depthwise weights expanded to a dense kernel that is zero off the
/// channel diagonal.
pub fn expand_depthwise(w: &ConvWeights) -> ConvWeights {
    let (kh, kw, c) = (w.kernel_h(), w.kernel_w(), w.in_channels());
    let mut v = vec![0.0f32; kh * kw * c * c];
    for ky in 0..kh {
        for kx in 0..kw {
            for ch in 0..c {
                v[((ky * kw + kx) * c + ch) * c + ch] = w.values()[(ky * kw + kx) * c + ch];
            }
        }
    }
    ConvWeights::dense(kh, kw, c, c, v, w.bias().to_vec()).unwrap()
}

/// Transposed convolution as an explicit scatter onto the full
/// `(n - 1) * s + k` grid, cropped by `(k - s) / 2` to `n * s`.
pub fn naive_transposed(input: &Grid, w: &ConvWeights, stride: usize) -> Grid {
    let (h, wd, cin) = (input.len(), input[0].len(), input[0][0].len());
    let (k, cout) = (w.kernel_h(), w.out_channels());
    let (fh, fw) = ((h - 1) * stride + k, (wd - 1) * stride + k);
    let mut full = vec![vec![vec![0.0; cout]; fw]; fh];
    for y in 0..h {
        for x in 0..wd {
            for ky in 0..k {
                for kx in 0..k {
                    for co in 0..cout {
                        for ci in 0..cin {
                            full[y * stride + ky][x * stride + kx][co] += input[y][x][ci] * hwio(w.values(), k, cin, cout, ky, kx, ci, co);
                        }
                    }
                }
            }
        }
    }
    let pad = (k - stride) / 2;
    (0..h * stride)
        .map(|oy| {
            (0..wd * stride)
                .map(|ox| (0..cout).map(|co| full[oy + pad][ox + pad][co] + w.bias()[co] as f64).collect())
                .collect()
        })
        .collect()
}

/// Half-pixel-center bilinear resize with edge clamping.
pub fn naive_resize(input: &Grid, oh: usize, ow: usize) -> Grid {
    let (h, w, c) = (input.len(), input[0].len(), input[0][0].len());
    let src = |o: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let s = ((o as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = s.floor() as usize;
        (i0, (i0 + 1).min(n_in - 1), s - i0 as f64)
    };
    (0..oh)
        .map(|oy| {
            let (y0, y1, fy) = src(oy, h, oh);
            (0..ow)
                .map(|ox| {
                    let (x0, x1, fx) = src(ox, w, ow);
                    (0..c)
                        .map(|ch| {
                            let top = input[y0][x0][ch] * (1.0 - fx) + input[y0][x1][ch] * fx;
                            let bot = input[y1][x0][ch] * (1.0 - fx) + input[y1][x1][ch] * fx;
                            top * (1.0 - fy) + bot * fy
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Per-definition metrics over `(gt, pred, w, h)` tuples, all landmarks
/// visible.
pub struct MetricOracle {
    pub sse: f64,
    pub epe: f64,
}

pub fn metric_oracle(samples: &[(Vec<(f64, f64)>, Vec<(f64, f64)>, usize, usize)]) -> MetricOracle {
    let mut sse = 0.0;
    let mut epe = 0.0;
    for (gt, pred, w, h) in samples {
        let n = (*w).max(*h) as f64;
        for i in 0..21 {
            let ex = (gt[i].0 - pred[i].0) / n;
            let ey = (gt[i].1 - pred[i].1) / n;
            sse += ex * ex + ey * ey;
            let rx = ((gt[i].0 - gt[0].0) - (pred[i].0 - pred[0].0)) / n;
            let ry = ((gt[i].1 - gt[0].1) - (pred[i].1 - pred[0].1)) / n;
            epe += (rx * rx + ry * ry).sqrt();
        }
    }
    let d = samples.len() as f64;
    MetricOracle {
        sse: sse / d,
        epe: epe / (21.0 * d),
    }
}

/// Fraction of landmarks with normalized error `<= sigma`, per joint then
/// averaged over joints.
pub fn pck_oracle(samples: &[(Vec<(f64, f64)>, Vec<(f64, f64)>, usize, usize)], sigma: f64) -> f64 {
    let mut per_joint = [0usize; 21];
    for (gt, pred, w, h) in samples {
        let n = (*w).max(*h) as f64;
        for i in 0..21 {
            let e = ((gt[i].0 - pred[i].0).powi(2) + (gt[i].1 - pred[i].1).powi(2)).sqrt() / n;
            if e <= sigma {
                per_joint[i] += 1;
            }
        }
    }
    per_joint.iter().map(|&c| c as f64 / samples.len() as f64).sum::<f64>() / 21.0
}

pub fn coords(k: &KeypointSet) -> Vec<(f64, f64)> {
    k.points.iter().map(|p| (p.x, p.y)).collect()
}

pub struct SuiteResult {
    pub kernel: &'static str,
    pub cases: usize,
    pub worst: f64,
}

/// Runs every tensor kernel against its oracle on `cases` random inputs with
/// values in `[-1, 1]`, cycling through strides, paddings and kernel sizes.
pub fn kernel_suite(seed: u64, cases: usize) -> Vec<SuiteResult> {
    use fasthand::kernels::*;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut results = vec![
        SuiteResult { kernel: "conv2d", cases: 0, worst: 0.0 },
        SuiteResult { kernel: "depthwise_conv2d", cases: 0, worst: 0.0 },
        SuiteResult { kernel: "pointwise_conv", cases: 0, worst: 0.0 },
        SuiteResult { kernel: "depthwise_separable_conv", cases: 0, worst: 0.0 },
        SuiteResult { kernel: "transposed_conv2d", cases: 0, worst: 0.0 },
        SuiteResult { kernel: "resize_bilinear", cases: 0, worst: 0.0 },
    ];
    let mut record = |i: usize, d: f64| {
        results[i].cases += 1;
        results[i].worst = results[i].worst.max(d);
    };
    for case in 0..cases {
        let stride = 1 + case % 2;
        let same = case % 4 < 2;
        let k = [1, 3, 5][case % 3];
        let h = rng.random_range(k.max(1)..12);
        let w = rng.random_range(k.max(1)..12);
        let cin = rng.random_range(1..6);
        let cout = rng.random_range(1..6);
        let x = random_tensor(&mut rng, h, w, cin);
        let g = grid(&x);
        let padding = if same { Padding::Same } else { Padding::Valid };

        let dense = random_dense(&mut rng, k, k, cin, cout);
        let y = conv2d(&x, &dense, stride, padding).unwrap();
        record(0, max_diff(&y, &naive_conv(&g, &dense, stride, same)));

        let dw = random_depthwise(&mut rng, k, k, cin);
        let y = depthwise_conv2d(&x, &dw, stride, padding).unwrap();
        record(1, max_diff(&y, &naive_depthwise(&g, &dw, stride, same)));

        let pw = random_dense(&mut rng, 1, 1, cin, cout);
        let y = pointwise_conv(&x, &pw).unwrap();
        record(2, max_diff(&y, &naive_conv(&g, &pw, 1, true)));

        // separable == pointwise(dense conv with the diagonal expansion)
        let dw = random_depthwise(&mut rng, 3, 3, cin);
        let y = depthwise_separable_conv(&x, &dw, &pw, stride).unwrap();
        let expanded = naive_conv(&g, &expand_depthwise(&dw), stride, true);
        record(3, max_diff(&y, &naive_conv(&expanded, &pw, 1, true)));

        let tk = [2, 4][case % 2];
        let th = rng.random_range(1..7);
        let tw = rng.random_range(1..7);
        let small = random_tensor(&mut rng, th, tw, cin);
        let up = random_dense(&mut rng, tk, tk, cin, cout);
        let y = transposed_conv2d(&small, &up, 2).unwrap();
        record(4, max_diff(&y, &naive_transposed(&grid(&small), &up, 2)));

        let (oh, ow) = (rng.random_range(1..20), rng.random_range(1..20));
        let y = resize_bilinear(&x, oh, ow).unwrap();
        record(5, max_diff(&y, &naive_resize(&g, oh, ow)));
    }
    results
}
