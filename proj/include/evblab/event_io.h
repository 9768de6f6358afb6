// Copyright 2026 The evblab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVBLAB_EVENT_IO_H
#define EVBLAB_EVENT_IO_H

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace evblab {

/// One photon detection: pixel column/row, nanoseconds since run start, time-over-threshold.
struct EventRecord {
    std::uint16_t x = 0;
    std::uint16_t y = 0;
    std::uint64_t t = 0;
    std::uint16_t tot = 0;

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

using EventStream = std::vector<EventRecord>;

// On-disk layout, little-endian:
//   header  "EVB1" | u16 version | u16 reserved | u64 record count      (16 bytes)
//   record  u16 x | u16 y | u64 t | u16 tot | u16 reserved              (16 bytes)
inline constexpr std::array<char, 4> kEventMagic = {'E', 'V', 'B', '1'};
inline constexpr std::uint16_t kEventFormatVersion = 1;
inline constexpr std::size_t kEventHeaderBytes = 16;
inline constexpr std::size_t kEventRecordBytes = 16;

std::vector<std::byte> encode_events(std::span<const EventRecord> events);

/// Throws FormatError naming `source` on bad magic, version, or truncated data.
EventStream decode_events(std::span<const std::byte> bytes, std::string_view source = "<memory>");

void write_event_file(const std::filesystem::path& path, std::span<const EventRecord> events);
EventStream read_event_file(const std::filesystem::path& path);

bool is_time_sorted(std::span<const EventRecord> events);

}  // namespace evblab

#endif
