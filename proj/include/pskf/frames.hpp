#pragma once

// Image sequences and the on-disk frame format: one line of JSON
// {"height":h,"width":w,"frames":T,"dtype":"f32le"}, a newline, then T·h·w
// little-endian float32 values, frame-major then row-major.

#include <filesystem>
#include <vector>

#include "pskf/patching.hpp"

namespace pskf {

struct FrameSequence {
  ImageDims dims;
  std::vector<Vector> frames;  // each of length dims.pixel_count(), row-major

  std::size_t size() const { return frames.size(); }
};

void write_frames(const std::filesystem::path& path, const FrameSequence& seq);
FrameSequence read_frames(const std::filesystem::path& path);

/// Frames rounded through float32, i.e. what a write/read round trip yields.
FrameSequence quantize_f32(const FrameSequence& seq);

}  // namespace pskf
