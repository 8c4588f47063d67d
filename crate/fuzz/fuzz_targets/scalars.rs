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
use velocity_core::ledger::{parse_timestamp, TimestampFormat};
use velocity_core::Amount;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((amount, _)) = Amount::parse_rounding(text) {
        assert_eq!(amount.to_string().parse::<Amount>().unwrap(), amount);
    }
    let _ = parse_timestamp(text, TimestampFormat::Epoch);
    let _ = parse_timestamp(text, TimestampFormat::Iso8601);
});
