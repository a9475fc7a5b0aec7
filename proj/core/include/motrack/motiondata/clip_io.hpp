// Copyright (c) 2026 the motrack authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "motrack/motiondata/clip.hpp"

namespace motrack::motiondata {

inline constexpr std::uint32_t kClipFormatVersion = 1;
inline constexpr std::uint32_t kPackFormatVersion = 1;

// .mclip: single clip, JSON header + little-endian payload.
void write_clip(const MotionClip& clip, const std::filesystem::path& path);
MotionClip read_clip(const std::filesystem::path& path);

std::vector<std::uint8_t> clip_to_bytes(const MotionClip& clip);
MotionClip clip_from_bytes(const std::vector<std::uint8_t>& bytes);

// .mpack: packed library with a per-clip index; loading clip k touches only
// its index entry and byte range.
void pack_library(const ClipLibrary& lib, const std::filesystem::path& path);
ClipLibrary load_library(const std::filesystem::path& path);

}  // namespace motrack::motiondata
