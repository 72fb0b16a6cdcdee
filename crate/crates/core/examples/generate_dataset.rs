//! Projects a synthetic hand mesh to 2D annotations, then writes ten
//! augmented crops of a synthetic frame.

use fasthand::dataset::{annotate_mesh, augment, AugmentConfig, Intrinsics, JointVertexMap, MeshFrame};
use fasthand::image_io::save_rgb;
use fasthand::tensor::Tensor;

fn main() -> fasthand::Result<()> {
    // 21 joints, each surrounded by 10 vertices on a small ring at depth 0.5 m
    let mut vertices = Vec::new();
    for j in 0..21 {
        let (jx, jy) = ((j % 5) as f64 * 0.02 - 0.04, (j / 5) as f64 * 0.02 - 0.04);
        for v in 0..10 {
            let a = v as f64 * std::f64::consts::TAU / 10.0;
            vertices.push([jx + 0.003 * a.cos(), jy + 0.003 * a.sin(), 0.5]);
        }
    }
    let mesh = MeshFrame {
        image: "hand.png".into(),
        width: 320,
        height: 240,
        intrinsics: Some(Intrinsics { fx: 500.0, fy: 500.0, cx: 160.0, cy: 120.0 }),
        vertices,
    };
    let map = JointVertexMap::new((0..21).map(|j| std::array::from_fn(|v| j * 10 + v)).collect())?;
    let record = annotate_mesh(&mesh, &map, None)?;
    println!("joint 0 -> ({:.2}, {:.2}), joint 20 -> ({:.2}, {:.2})", record.landmarks[0].0, record.landmarks[0].1, record.landmarks[20].0, record.landmarks[20].1);

    let image = Tensor::from_fn(240, 320, 3, |y, x, c| if c == 0 { x as f32 / 320.0 } else { y as f32 / 240.0 })?;
    let variants = augment(&record, &image, 2024, &AugmentConfig::default())?;
    let out = std::env::temp_dir().join("fasthand_augment");
    std::fs::create_dir_all(&out).map_err(|e| fasthand::Error::Io { path: out.clone(), source: e })?;
    for v in &variants {
        save_rgb(&v.image, out.join(&v.record.image))?;
        println!("{}  scale {:.3}  wrist ({:.1}, {:.1})", v.record.image, v.transform.scale, v.record.landmarks[0].0, v.record.landmarks[0].1);
    }
    println!("{} variants written to {}", variants.len(), out.display());
    Ok(())
}
