//! Runs the calibrated synchronization bench, then shows a single PTP
//! exchange and the frame-to-trigger assignment on a short window.

use payload_sim::timesync::{calibrated_bench, ptp_estimate_offset, run_bench, PtpExchange};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let duration = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(60.0);
    let report = run_bench(&calibrated_bench(duration, 0))?;
    println!("{duration} s bench, {} frames, {} unassigned, {} misassigned", report.frames, report.unassigned, report.misassigned);
    println!("{:<14} {:>9} {:>8} {:>8}", "sensor", "mean_ms", "std_ms", "samples");
    for r in &report.rows {
        println!("{:<14} {:>9.3} {:>8.3} {:>8}", r.sensor, r.stats.mean_ms, r.stats.std_ms, r.stats.n_samples);
    }

    // Slave runs 0.37 s ahead of the master over a symmetric 50 us link.
    let (offset, delay) = (0.37, 50e-6);
    let t1 = 10.0;
    let t2 = t1 + delay + offset;
    let t3 = t2 + 1e-3;
    let t4 = t3 - offset + delay;
    let est = ptp_estimate_offset(&PtpExchange { t1, t2, t3, t4 })?;
    println!("ptp offset {:.6} s, path delay {:.1} us", est.offset, est.path_delay * 1e6);
    Ok(())
}
