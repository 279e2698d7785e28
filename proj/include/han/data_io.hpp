#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "han/attention.hpp"
#include "han/training.hpp"

namespace han {

/// Both streams of one video, as stored in an HFC1 file.
struct FeatureSequence {
  std::size_t regions_per_side = 0;  // K
  std::size_t feature_dim = 0;       // D
  std::vector<FeatureCube> cubes_p;  // appearance
  std::vector<FeatureCube> cubes_q;  // motion

  std::size_t frames() const noexcept { return cubes_p.size(); }
};

// HFC1 layout, all little-endian:
//   "HFC1" | version u32 | T u32 | K u32 | D u32 | n_streams u32 (=2) | dtype u32
//   payload: double[stream][t][region][dim], stream 0 = appearance, 1 = motion
inline constexpr std::uint32_t kHfcVersion = 1;
inline constexpr std::uint32_t kHfcDtypeFloat64 = 1;
inline constexpr std::size_t kHfcHeaderBytes = 28;

std::vector<unsigned char> encode_sequence(std::span<const FeatureCube> cubes_p,
                                           std::span<const FeatureCube> cubes_q,
                                           std::size_t regions_per_side);
/// Validates the whole header against the buffer length before allocating.
FeatureSequence decode_sequence(std::span<const unsigned char> bytes,
                                const std::string& source = "<memory>");

void write_sequence(const std::string& path, std::span<const FeatureCube> cubes_p,
                    std::span<const FeatureCube> cubes_q, std::size_t regions_per_side);
FeatureSequence read_sequence(const std::string& path);

/// 1-based frame indices round_half_up(1 + (j-1)(T-1)/(n-1)), j = 1..n.
std::vector<std::size_t> subsample_indices(std::size_t frames, std::size_t n_frames);
FeatureSequence subsample_frames(const FeatureSequence& seq, std::size_t n_frames);

struct ManifestRecord {
  std::string sample_id;
  std::string feature_file;
  std::string label;
};

/// Tab-separated: sample_id, feature_file, label. Blank lines and '#' lines are skipped.
std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path, std::span<const ManifestRecord> records);

/// label -> dense class index; tab-separated "label<TAB>index" lines.
struct LabelMap {
  std::vector<std::string> labels;  // position = class index

  std::size_t index_of(const std::string& label) const;
  std::size_t size() const noexcept { return labels.size(); }
};

LabelMap read_label_map(const std::string& path);
void write_label_map(const std::string& path, const LabelMap& map);

enum class StreamSelection { kBoth, kAppearance, kMotion };
StreamSelection parse_stream_selection(const std::string& name);

struct LoadOptions {
  // 0 keeps every frame; otherwise longer sequences are subsampled to this many.
  std::size_t frames = 0;
  // Single-stream ablations zero the other stream's features.
  StreamSelection streams = StreamSelection::kBoth;
};

/// Reads every sequence listed in the manifest. Relative feature paths are
/// resolved against the manifest's directory.
Dataset load_dataset(const std::string& manifest_path, const std::string& label_map_path,
                     const LoadOptions& options = {});

void apply_stream_selection(Dataset& data, StreamSelection streams);

}  // namespace han
