#![no_main]

use libfuzzer_sys::fuzz_target;
use nalgebra::dvector;
use pseudoroll::distribution::ChartPair;
use pseudoroll_cli::commands::read_trivialized;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let pair = ChartPair::lorentz_sphere_over_plane(&dvector![0.0, 0.0, 1.0]).expect("benchmark charts");
    if let Ok(curve) = read_trivialized(src, "curve.csv", &pair) {
        assert_eq!(curve.times.len(), curve.a.len());
        assert_eq!(curve.x.len(), curve.xhat.len());
    }
});
