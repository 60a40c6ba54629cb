use latent_class::geometry::{PeakKind, ProfileConfig};
use latent_class::{fixtures, profile_loglik_grid, ModelSpec};

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Global peaks at the three block tables and exact local peaks at the three
/// singleton tables that meet the slice.
fn check_peaks(scale: u64, global: f64, local: f64) {
    let t = fixtures::swiss().scaled(scale);
    let spec = ModelSpec::for_table(&t, 2).unwrap();
    let grid = profile_loglik_grid(&t, &spec, &ProfileConfig::alpha_slice(0.2)).unwrap();
    let peaks = grid.peaks();
    let at = |x: f64, y: f64| peaks.iter().find(|p| near(p.x, x) && near(p.y, y));
    for (x, y) in [(0.2, 0.3), (0.3, 0.2), (0.3, 0.3)] {
        let p = at(x, y).unwrap_or_else(|| panic!("no peak at ({x}, {y}): {peaks:?}"));
        assert_eq!(p.kind, PeakKind::Global);
        assert!((p.value - global).abs() < 1e-3 * scale as f64, "{p:?}");
    }
    for (x, y) in [(0.2, 0.2), (0.2, 0.4), (0.4, 0.2)] {
        let p = at(x, y).unwrap_or_else(|| panic!("no peak at ({x}, {y}): {peaks:?}"));
        assert_eq!(p.kind, PeakKind::Local);
        assert!((p.value - local).abs() < 1e-3 * scale as f64, "{p:?}");
    }
    assert_eq!(
        peaks.iter().filter(|p| p.kind == PeakKind::Global).count(),
        3
    );
    assert!((grid.max_value() - global).abs() < 1e-3 * scale as f64);
}

#[test]
fn alpha_slice_peaks() {
    check_peaks(1, -110.0981, -110.1523);
}

#[test]
fn alpha_slice_peaks_after_rescaling() {
    let s = 10_000.0;
    let global = s * (24.0 * (3.0f64 / 40.0).ln() + 16.0 * (2.0f64 / 40.0).ln());
    let local = s
        * (24.0 * (8.0f64 / 120.0).ln() + 12.0 * (2.0f64 / 40.0).ln() + 4.0 * (4.0f64 / 40.0).ln());
    check_peaks(10_000, global, local);
}
