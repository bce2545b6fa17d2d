use colorclass::colorspace::{lab_pixel_to_rgb, rgb_pixel_to_lab};

/// Every 8-bit triple survives rgb -> lab -> rgb. Slow in debug builds; run
/// with `cargo test --release -- --ignored`.
#[test]
#[ignore]
fn every_triple_round_trips() {
    let mut failures = 0u64;
    for r in 0..=255u8 {
        for g in 0..=255u8 {
            for b in 0..=255u8 {
                if lab_pixel_to_rgb(rgb_pixel_to_lab([r, g, b])) != [r, g, b] {
                    failures += 1;
                }
            }
        }
    }
    assert_eq!(failures, 0);
}
