//! Lanczos resampling of word features onto the TR grid and FIR delays.

use nalgebra::DMatrix;
use parsebrain::signal::{fir_expand, lanczos_weight, resample_rows, tr_center, FirConfig, ResampleConfig};

fn main() {
    for t in [-2.5, -1.0, -0.5, 0.0, 0.5, 1.0, 2.5] {
        println!("w({t:+.1}) = {:+.4}", lanczos_weight(t, 3));
    }

    let onsets: Vec<f64> = (0..1200).map(|i| i as f64 * 0.05).collect();
    let x = DMatrix::from_fn(onsets.len(), 1, |i, _| (2.0 * std::f64::consts::PI * 0.05 * onsets[i]).sin());
    let cfg = ResampleConfig::default();
    let tr = resample_rows(&x, &onsets, &cfg, 40);
    for r in (0..40).step_by(8) {
        let want = (2.0 * std::f64::consts::PI * 0.05 * tr_center(r, cfg.tr)).sin();
        println!("TR {r:>2}: {:+.4} (sine {:+.4})", tr[(r, 0)], want);
    }

    let fir = fir_expand(&tr, &FirConfig { n_delays: 4 });
    let row: Vec<String> = fir.row(5).iter().map(|v| format!("{v:+.3}")).collect();
    println!("FIR design {}x{}; row 5 = [{}]", fir.nrows(), fir.ncols(), row.join(", "));
}
