#include <cmath>

#include "asal/data.hpp"
#include "asal/error.hpp"
#include "binary_io.hpp"

namespace asal {

namespace {

constexpr std::string_view kFeatureMagic = "ASALFEAT";
constexpr std::uint32_t kFeatureVersion = 1;

}  // namespace

std::string encode_features(const Matrix& frames) {
  if (frames.rows() < 1 || frames.cols() < 1) throw DimensionError("encode_features: empty matrix " + shape_of(frames));
  if (!all_finite(frames)) throw DataError("encode_features: matrix has non-finite entries");
  io::ByteWriter w;
  w.bytes(kFeatureMagic);
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(frames.rows()));
  w.u32(static_cast<std::uint32_t>(frames.cols()));
  for (Index k = 0; k < frames.size(); ++k) w.f32(static_cast<float>(frames.data()[k]));
  return w.take();
}

Matrix decode_features(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic(kFeatureMagic, "feature file");
  const auto version_at = r.offset();
  if (r.u32("feature version") != kFeatureVersion) throw FormatError("unsupported feature file version", version_at);
  const auto shape_at = r.offset();
  const std::uint64_t t = r.u32("frame count");
  const std::uint64_t d = r.u32("feature dimension");
  if (t == 0 || d == 0) throw FormatError("feature file declares an empty " + shape_string(Index(t), Index(d)) + " matrix", shape_at);
  const std::uint64_t payload = t * d * 4;
  if (r.remaining() != payload) {
    throw FormatError("payload size mismatch: expected " + std::to_string(kFeatureHeaderBytes + payload) +
                          " bytes in total, found " + std::to_string(bytes.size()),
                      r.offset());
  }
  Matrix frames(static_cast<Index>(t), static_cast<Index>(d));
  for (Index k = 0; k < frames.size(); ++k) {
    const auto at = r.offset();
    const float v = r.f32("feature value");
    if (!std::isfinite(v)) throw FormatError("non-finite feature value", at);
    frames.data()[k] = v;
  }
  return frames;
}

void write_feature_file(const std::string& path, const Matrix& frames) { io::write_file(path, encode_features(frames)); }

Matrix resample_frames(const Matrix& frames, Index target_frames) {
  const Index t = frames.rows();
  if (t < 1 || target_frames < 1) throw DimensionError("resample_frames: empty input or target");
  if (t == target_frames) return frames;
  Matrix out(target_frames, frames.cols());
  for (Index i = 0; i < target_frames; ++i) {
    const Index src = target_frames == 1 ? 0 : i * (t - 1) / (target_frames - 1);
    out.row(i) = frames.row(src);
  }
  return out;
}

FeatureSequence read_feature_file(const std::string& path, Index canonical_frames, std::string id) {
  Matrix frames;
  try {
    frames = decode_features(io::read_file(path));
  } catch (const FormatError& e) {
    throw e.with_context(path);
  }
  if (canonical_frames > 0) frames = resample_frames(frames, canonical_frames);
  return {std::move(id), std::move(frames)};
}

}  // namespace asal
