#![no_main]

use bloomstream::io::{ColumnSpec, RecordReader};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&flags, body)) = data.split_first() else {
        return;
    };
    let spec = ColumnSpec {
        ignore_label: flags & 2 != 0,
        ..ColumnSpec::default()
    };
    let Ok(reader) = RecordReader::new(body, flags & 1 != 0, spec) else {
        return;
    };
    let mut last_row = None;
    for item in reader {
        let Ok(row) = item else {
            break;
        };
        let n = match row {
            Ok(rec) => {
                assert!(rec.features.iter().all(|v| v.is_finite()));
                rec.row
            }
            Err(bad) => bad.row,
        };
        if let Some(prev) = last_row {
            assert!(n > prev);
        }
        last_row = Some(n);
    }
});
