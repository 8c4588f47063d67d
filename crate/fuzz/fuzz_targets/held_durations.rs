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
use velocity_core::density::DurationDistribution;
use velocity_core::flowtrace::{read_held_durations, write_held_durations};

fuzz_target!(|data: &[u8]| {
    let Ok(durations) = read_held_durations(data) else { return };
    let mut out = Vec::new();
    write_held_durations(&mut out, &durations).unwrap();
    assert_eq!(read_held_durations(out.as_slice()).unwrap(), durations);
    // Anything the reader accepts must be a valid sample.
    let _ = DurationDistribution::from_durations(&durations);
});
