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

#include "evblab/event_io.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "evblab/error.h"

namespace evblab {

namespace {

template <typename T>
void put_le(std::byte* dst, T value) {
    for (std::size_t k = 0; k < sizeof(T); ++k) {
        dst[k] = static_cast<std::byte>((static_cast<std::uint64_t>(value) >> (8 * k)) & 0xFFu);
    }
}

template <typename T>
T get_le(const std::byte* src) {
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) {
        v |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(src[k])) << (8 * k);
    }
    return static_cast<T>(v);
}

}  // namespace

std::vector<std::byte> encode_events(std::span<const EventRecord> events) {
    std::vector<std::byte> out(kEventHeaderBytes + kEventRecordBytes * events.size());
    std::byte* p = out.data();
    std::memcpy(p, kEventMagic.data(), kEventMagic.size());
    put_le<std::uint16_t>(p + 4, kEventFormatVersion);
    put_le<std::uint16_t>(p + 6, 0);
    put_le<std::uint64_t>(p + 8, events.size());
    p += kEventHeaderBytes;
    for (const auto& e : events) {
        put_le<std::uint16_t>(p, e.x);
        put_le<std::uint16_t>(p + 2, e.y);
        put_le<std::uint64_t>(p + 4, e.t);
        put_le<std::uint16_t>(p + 12, e.tot);
        put_le<std::uint16_t>(p + 14, 0);
        p += kEventRecordBytes;
    }
    return out;
}

EventStream decode_events(std::span<const std::byte> bytes, std::string_view source) {
    const std::string where(source);
    if (bytes.size() < kEventHeaderBytes) {
        throw FormatError(where + ": truncated header (expected EVB1 event file)");
    }
    if (std::memcmp(bytes.data(), kEventMagic.data(), kEventMagic.size()) != 0) {
        throw FormatError(where + ": bad magic, expected \"EVB1\"");
    }
    const auto version = get_le<std::uint16_t>(bytes.data() + 4);
    if (version != kEventFormatVersion) {
        throw FormatError(where + ": unsupported EVB1 format version " + std::to_string(version));
    }
    const auto count = get_le<std::uint64_t>(bytes.data() + 8);
    const std::size_t payload = bytes.size() - kEventHeaderBytes;
    if (payload % kEventRecordBytes != 0 || payload / kEventRecordBytes != count) {
        throw FormatError(where + ": record count " + std::to_string(count) + " does not match payload of " +
                          std::to_string(payload) + " bytes");
    }
    EventStream out(count);
    const std::byte* p = bytes.data() + kEventHeaderBytes;
    for (auto& e : out) {
        e.x = get_le<std::uint16_t>(p);
        e.y = get_le<std::uint16_t>(p + 2);
        e.t = get_le<std::uint64_t>(p + 4);
        e.tot = get_le<std::uint16_t>(p + 12);
        p += kEventRecordBytes;
    }
    return out;
}

void write_event_file(const std::filesystem::path& path, std::span<const EventRecord> events) {
    const auto bytes = encode_events(events);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

EventStream read_event_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError(path.string() + ": cannot open event file");
    }
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::byte> bytes(raw.size());
    std::memcpy(bytes.data(), raw.data(), raw.size());
    return decode_events(bytes, path.string());
}

bool is_time_sorted(std::span<const EventRecord> events) {
    return std::is_sorted(events.begin(), events.end(),
                          [](const EventRecord& a, const EventRecord& b) { return a.t < b.t; });
}

}  // namespace evblab
