#![no_main]

use bloomstream::{Assignment, BloomStreamModel, ParamsConfig, SketchParams};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&d, rest)) = data.split_first() else {
        return;
    };
    let dims = usize::from(d % 4) + 1;
    let params = SketchParams::derive(&ParamsConfig {
        capacity: 200,
        fp: 0.05,
        lambda: 0.05,
        density_threshold: 1.5,
        dims,
        resolution: 1.0,
        origin: None,
    })
    .unwrap();
    let mut model = BloomStreamModel::new(params).unwrap();
    // each instance: one time byte then `dims` little-endian f64 values
    let stride = 1 + 8 * dims;
    let mut t = 0.0;
    for chunk in rest.chunks_exact(stride) {
        t += f64::from(chunk[0]) / 16.0;
        let x: Vec<f64> = chunk[1..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let accepted = model.ingest(&x, t).is_ok();
        let pred = model.classify(&x, t);
        if !accepted && x.iter().any(|v| !v.is_finite()) {
            assert_eq!(pred, Assignment::Outlier);
        }
    }
    let stats = model.snapshot_stats(t);
    assert!(stats.dense_events <= stats.instances_seen);
    model.sweep_expired(t);
});
