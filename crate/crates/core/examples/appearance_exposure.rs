//! Fits each appearance model to an exposure-shifted copy of an image and
//! shows how much of the shift it absorbs.

use confsplat::appearance::{Appearance, AppearanceKind, CnnConfig};
use confsplat::eval::psnr;
use confsplat::scene::ImageBuffer;
use confsplat::train::{AdamConfig, FlatAdam};

fn main() -> confsplat::Result<()> {
    let (w, h) = (48, 40);
    let render = ImageBuffer::from_fn(w, h, 3, |x, y, c| 0.2 + 0.6 * ((x + 2 * y + 7 * c) % 17) as f64 / 17.0);
    // Brighter, slightly warm target: what a different camera exposure would record.
    let gains = [1.3, 1.2, 1.05];
    let target = ImageBuffer::from_fn(w, h, 3, |x, y, c| render.get(x, y, c) * gains[c]);
    println!("no correction: {:.2} dB", psnr(&target, &render)?);

    let small = CnnConfig {
        latent_dim: 8,
        widths: vec![16, 8, 8],
    };
    for kind in [AppearanceKind::Pgsr, AppearanceKind::H3dgs, AppearanceKind::Cnn] {
        let mut app = Appearance::new(kind, 1, small.clone(), 0)?;
        let mut adam = FlatAdam::new(AdamConfig::default(), app.params().len());
        for _ in 0..300 {
            let (out, cache) = app.forward(&render, 0)?.expect("model has a forward");
            let n = out.data.len() as f64;
            let d = ImageBuffer::from_data(w, h, 3, out.data.iter().zip(&target.data).map(|(a, b)| 2.0 * (a - b) / n).collect())?;
            let (_, grad) = app.backward(&cache, &d)?;
            adam.step(app.params_mut(), &grad, |_| 1e-2);
        }
        let (out, _) = app.forward(&render, 0)?.expect("model has a forward");
        println!("{kind:?}: {:.2} dB after fitting", psnr(&target, &out)?);
    }
    Ok(())
}
