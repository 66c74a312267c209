//! Renders one ego pose with the built-in simulator and writes the frame,
//! its stylized counterpart and the ground truth as PNG files.
//!
//! cargo run --example render_scene -- [x] [y] [theta] [out_dir]

use std::path::PathBuf;

use segtest::backends::{Genome, Ports};
use segtest::raster::{save_image, save_mask, DEFAULT_SIZE};
use segtest::{Profile, Result};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |k: usize, d: f64| args.get(k).and_then(|s| s.parse().ok()).unwrap_or(d);
    let genome = Genome::pose(num(0, 0.0), num(1, 0.0), num(2, 0.0));
    let out = PathBuf::from(args.get(3).map(String::as_str).unwrap_or("render_scene_out"));
    std::fs::create_dir_all(&out).map_err(|e| segtest::Error::io(&out, e))?;

    let ports = Ports::builtin(Profile::Urban, DEFAULT_SIZE);
    ports.bounds.check(&genome)?;
    let scene = ports.generate_scene(&genome)?;
    let realistic = ports.realize(&scene)?;

    save_image(&scene.simulated, &out.join("simulated.png"))?;
    save_image(&realistic, &out.join("realistic.png"))?;
    save_mask(&scene.ground_truth, &out.join("mask.png"))?;
    for id in ports.class_table.ids() {
        println!(
            "{:>12}: {:5.1}%",
            ports.class_table.name(id).unwrap_or("?"),
            100.0 * scene.ground_truth.class_proportion(id)
        );
    }
    println!("on road: {}; wrote {}", scene.on_road, out.display());
    Ok(())
}
