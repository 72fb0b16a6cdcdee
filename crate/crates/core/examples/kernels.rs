//! Convolution primitives on small hand-checkable inputs.

use fasthand::kernels::{conv2d, depthwise_separable_conv, resize_bilinear, transposed_conv2d, Padding};
use fasthand::tensor::{ConvWeights, Tensor};

fn print_plane(label: &str, t: &Tensor) {
    println!("{label} ({}x{}x{}):", t.height(), t.width(), t.channels());
    for y in 0..t.height() {
        let row: Vec<String> = (0..t.width()).map(|x| format!("{:6.2}", t.at(y, x, 0))).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> fasthand::Result<()> {
    let ones = Tensor::filled(4, 4, 1, 1.0)?;
    let box3 = ConvWeights::dense(3, 3, 1, 1, vec![1.0; 9], vec![0.0])?;
    print_plane("3x3 ones, same padding", &conv2d(&ones, &box3, 1, Padding::Same)?);
    print_plane("3x3 ones, stride 2", &conv2d(&ones, &box3, 2, Padding::Same)?);

    let ramp = Tensor::from_fn(4, 4, 2, |y, x, c| (y * 4 + x) as f32 + 10.0 * c as f32)?;
    // (ky, kx, c) layout; only the center tap of each channel is set
    let center: Vec<f32> = (0..18).map(|i| if i / 2 == 4 { 1.0 } else { 0.0 }).collect();
    let dw = ConvWeights::depthwise(3, 3, 2, center, vec![0.0; 2])?;
    // mixes the two channels as 0.5 * a + 0.5 * b
    let pw = ConvWeights::dense(1, 1, 2, 1, vec![0.5, 0.5], vec![0.0])?;
    print_plane("identity depthwise then channel mean", &depthwise_separable_conv(&ramp, &dw, &pw, 1)?);

    let single = Tensor::filled(2, 2, 1, 1.0)?;
    let up = ConvWeights::dense(4, 4, 1, 1, (0..16).map(|v| v as f32).collect(), vec![0.0])?;
    print_plane("transposed 4x4 stride 2", &transposed_conv2d(&single, &up, 2)?);

    let pair = Tensor::from_vec(1, 2, 1, vec![0.0, 1.0])?;
    print_plane("bilinear 1x2 -> 1x4", &resize_bilinear(&pair, 1, 4)?);
    Ok(())
}
