// Copyright 2026 The Velocity Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#![no_main]

use libfuzzer_sys::fuzz_target;
use velocity_core::ledger::{parse_transactions_from_reader, write_transactions_csv, ColumnMap, TimestampFormat};

fuzz_target!(|data: &[u8]| {
    let iso = ColumnMap { timestamp_format: TimestampFormat::Iso8601, ..ColumnMap::normalized() };
    for map in [ColumnMap::normalized(), iso] {
        let Ok((txs, report)) = parse_transactions_from_reader(data, &map) else { continue };
        assert_eq!(report.accepted, txs.len());
        assert_eq!(report.accepted + report.rejected.len(), report.rows);
        assert!(txs.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert!(txs.iter().all(|t| !t.amount.is_negative()));
        if map.timestamp_format == TimestampFormat::Epoch {
            let mut out = Vec::new();
            write_transactions_csv(&mut out, &txs).unwrap();
            let (again, _) = parse_transactions_from_reader(out.as_slice(), &map).unwrap();
            assert_eq!(again, txs);
        }
    }
});
