//! Renders a free-space mask from the parking world, converts it to a
//! virtual scan and compares each return with the analytic first hit.
//!
//! ```text
//! cargo run --release --example virtual_lidar -- [out.pgm]
//! ```

use vilivo::simulator::{analytic_scan, parking_loop, render_mask, NoiseConfig};
use vilivo::virtual_lidar::{make_scan, write_pgm, VirtualLidarParams};
use vilivo::Pose2;

fn main() -> vilivo::Result<()> {
    let scenario = parking_loop(1, 5.0);
    let pose = Pose2::new(6.0, 1.0, 0.3);
    let mask = render_mask(&scenario.world, &pose, &scenario.sensor, &NoiseConfig::noise_free(0), 0)?;
    let params = VirtualLidarParams::default();
    let (scan, cleaned) = make_scan(&mask, &params)?;
    println!(
        "mask {}x{} at {} m/px: {} free px, {} after cleaning, {} scan returns",
        mask.width(),
        mask.height(),
        mask.scale(),
        mask.count_free(),
        cleaned.count_free(),
        scan.len()
    );

    let truth = analytic_scan(&scenario.world, &pose, params.angle_increment, mask.half_extent());
    let mut diffs: Vec<f64> = scan
        .points
        .iter()
        .filter_map(|p| truth.points.iter().find(|t| t.bin == p.bin).map(|t| (p.range - t.range).abs()))
        .collect();
    diffs.sort_by(f64::total_cmp);
    if let (Some(median), Some(max)) = (diffs.get(diffs.len() / 2), diffs.last()) {
        println!(
            "range error vs analytic over {} shared bins: median {:.4} m, max {:.4} m",
            diffs.len(),
            median,
            max
        );
    }
    for p in scan.points.iter().step_by(45) {
        println!("  bin {:3}  ({:7.3}, {:7.3})  range {:.3} m", p.bin, p.point.x, p.point.y, p.range);
    }
    if let Some(path) = std::env::args().nth(1) {
        write_pgm(&mask, path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
