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
use velocity_core::ledger::{parse_accounts_from_reader, write_accounts_csv, ColumnMap};

fuzz_target!(|data: &[u8]| {
    let map = ColumnMap::normalized();
    let Ok((accounts, _)) = parse_accounts_from_reader(data, &map) else { return };
    let mut out = Vec::new();
    write_accounts_csv(&mut out, accounts.values()).unwrap();
    let (again, report) = parse_accounts_from_reader(out.as_slice(), &map).unwrap();
    assert_eq!(report.duplicates, 0);
    assert_eq!(again, accounts);
});
