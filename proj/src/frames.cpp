#include "pskf/frames.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace pskf {

namespace {

static_assert(sizeof(float) == 4);

void put_f32le(std::string& buf, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

float get_f32le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_frames(const std::filesystem::path& path, const FrameSequence& seq) {
  const Index d = seq.dims.pixel_count();
  for (const auto& f : seq.frames) {
    if (f.size() != d) throw DimensionError("frames", "frame length vs declared dims");
  }
  // Field order is fixed so identical sequences give identical bytes.
  std::string out = "{\"height\":" + std::to_string(seq.dims.height) +
                    ",\"width\":" + std::to_string(seq.dims.width) +
                    ",\"frames\":" + std::to_string(seq.frames.size()) + ",\"dtype\":\"f32le\"}\n";
  out.reserve(out.size() + seq.frames.size() * static_cast<std::size_t>(d) * 4);
  for (const auto& f : seq.frames) {
    for (Index i = 0; i < d; ++i) put_f32le(out, static_cast<float>(f(i)));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

FrameSequence read_frames(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  if (!std::getline(is, header)) throw std::runtime_error(path.string() + ": missing header");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path.string() + ": bad header: " + e.what());
  }
  if (meta.value("dtype", std::string()) != "f32le") {
    throw std::runtime_error(path.string() + ": unsupported dtype");
  }
  FrameSequence seq;
  seq.dims.height = meta.at("height").get<Index>();
  seq.dims.width = meta.at("width").get<Index>();
  const auto count = meta.at("frames").get<std::size_t>();
  if (seq.dims.height <= 0 || seq.dims.width <= 0) {
    throw std::runtime_error(path.string() + ": non-positive dimensions");
  }

  const Index d = seq.dims.pixel_count();
  std::vector<unsigned char> raw(count * static_cast<std::size_t>(d) * 4);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
    throw std::runtime_error(path.string() + ": truncated payload");
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(path.string() + ": trailing bytes after payload");
  }
  seq.frames.reserve(count);
  const unsigned char* p = raw.data();
  for (std::size_t t = 0; t < count; ++t) {
    Vector f(d);
    for (Index i = 0; i < d; ++i, p += 4) f(i) = get_f32le(p);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

FrameSequence quantize_f32(const FrameSequence& seq) {
  FrameSequence out = seq;
  for (auto& f : out.frames) f = f.cast<float>().cast<double>();
  return out;
}

}  // namespace pskf
