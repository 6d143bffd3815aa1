#![no_main]

use bloomstream::io::{parse_column_list, ColumnRef, ColumnSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    // "<features>|<label>|<header>"
    let mut parts = data.splitn(3, '|');
    let features = parts.next().unwrap_or_default();
    let label = parts.next();
    let header: Vec<String> = parts
        .next()
        .unwrap_or("a,b,label,t")
        .split(',')
        .map(str::to_string)
        .collect();
    let Ok(features) = parse_column_list(features) else {
        return;
    };
    let spec = ColumnSpec {
        features: Some(features),
        label: label.and_then(|l| ColumnRef::parse(l).ok()),
        ..ColumnSpec::default()
    };
    if let Ok(cols) = spec.resolve(Some(&header), header.len()) {
        assert!(!cols.features.is_empty());
        assert!(cols.features.iter().all(|&i| i < header.len()));
        assert!(cols.label.map_or(true, |l| !cols.features.contains(&l)));
    }
});
