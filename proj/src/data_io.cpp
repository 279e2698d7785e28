#include "han/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"

namespace han {

namespace {

constexpr char kHfcMagic[4] = {'H', 'F', 'C', '1'};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool skippable(const std::string& line) {
  return line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace

std::vector<unsigned char> encode_sequence(std::span<const FeatureCube> cubes_p,
                                           std::span<const FeatureCube> cubes_q,
                                           std::size_t regions_per_side) {
  if (cubes_p.size() != cubes_q.size()) {
    throw DimensionError("write_sequence: appearance has " + std::to_string(cubes_p.size()) +
                         " frames, motion has " + std::to_string(cubes_q.size()));
  }
  if (cubes_p.empty()) throw EmptySequenceError("write_sequence: no frames");
  const std::size_t n = regions_per_side * regions_per_side;
  const std::size_t D = cubes_p.front().dim();
  for (const auto* stream : {&cubes_p, &cubes_q}) {
    for (const FeatureCube& c : *stream) {
      if (c.num_regions() != n || c.dim() != D) {
        throw DimensionError("write_sequence: cube " + c.regions.shape_string() +
                             " vs expected " + std::to_string(n) + "x" + std::to_string(D));
      }
    }
  }
  std::vector<unsigned char> buf;
  buf.reserve(kHfcHeaderBytes + 2 * cubes_p.size() * n * D * 8);
  buf.insert(buf.end(), kHfcMagic, kHfcMagic + 4);
  detail::put_u32(buf, kHfcVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(cubes_p.size()));
  detail::put_u32(buf, static_cast<std::uint32_t>(regions_per_side));
  detail::put_u32(buf, static_cast<std::uint32_t>(D));
  detail::put_u32(buf, 2);
  detail::put_u32(buf, kHfcDtypeFloat64);
  for (const auto* stream : {&cubes_p, &cubes_q}) {
    for (const FeatureCube& c : *stream) {
      for (double v : c.regions.values()) detail::put_f64(buf, v);
    }
  }
  return buf;
}

FeatureSequence decode_sequence(std::span<const unsigned char> bytes, const std::string& source) {
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kHfcMagic, 4) != 0) {
    throw FormatError(FormatErrorKind::kBadMagic, "'" + source + "' is not an HFC1 file");
  }
  if (bytes.size() < kHfcHeaderBytes) {
    throw FormatError(FormatErrorKind::kTruncatedHeader,
                      "'" + source + "' has " + std::to_string(bytes.size()) +
                          " bytes, header needs " + std::to_string(kHfcHeaderBytes));
  }
  const unsigned char* h = bytes.data();
  const std::uint32_t version = detail::get_u32(h + 4);
  if (version != kHfcVersion) {
    throw FormatError(FormatErrorKind::kUnsupportedVersion,
                      "'" + source + "' version " + std::to_string(version) +
                          ", reader supports " + std::to_string(kHfcVersion));
  }
  const std::uint32_t T = detail::get_u32(h + 8);
  const std::uint32_t K = detail::get_u32(h + 12);
  const std::uint32_t D = detail::get_u32(h + 16);
  const std::uint32_t streams = detail::get_u32(h + 20);
  const std::uint32_t dtype = detail::get_u32(h + 24);
  if (streams != 2) {
    throw FormatError(FormatErrorKind::kBadStreamCount,
                      "'" + source + "' declares " + std::to_string(streams) + " streams");
  }
  if (dtype != kHfcDtypeFloat64) {
    throw FormatError(FormatErrorKind::kBadDtype,
                      "'" + source + "' dtype tag " + std::to_string(dtype));
  }
  if (T == 0) throw FormatError(FormatErrorKind::kEmptySequence, "'" + source + "' has T=0");
  if (K == 0 || D == 0) {
    throw FormatError(FormatErrorKind::kZeroDimension,
                      "'" + source + "' has K=" + std::to_string(K) + " D=" + std::to_string(D));
  }

  const unsigned __int128 values =
      static_cast<unsigned __int128>(2) * T * K * K * static_cast<unsigned __int128>(D);
  const unsigned __int128 expected = kHfcHeaderBytes + values * 8;
  if (bytes.size() < expected) {
    throw FormatError(FormatErrorKind::kTruncatedPayload,
                      "'" + source + "' has " + std::to_string(bytes.size()) +
                          " bytes, header implies more");
  }
  if (bytes.size() > expected) {
    throw FormatError(FormatErrorKind::kTrailingBytes,
                      "'" + source + "' has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(static_cast<std::uint64_t>(expected)));
  }

  FeatureSequence seq;
  seq.regions_per_side = K;
  seq.feature_dim = D;
  const std::size_t n = static_cast<std::size_t>(K) * K;
  const unsigned char* p = bytes.data() + kHfcHeaderBytes;
  for (auto* stream : {&seq.cubes_p, &seq.cubes_q}) {
    stream->reserve(T);
    for (std::uint32_t t = 0; t < T; ++t) {
      FeatureCube& c = stream->emplace_back(n, D, t);
      for (double& v : c.regions.values()) {
        v = detail::get_f64(p);
        p += 8;
        if (!std::isfinite(v)) {
          throw FormatError(FormatErrorKind::kNonFinitePayload,
                            "'" + source + "' frame " + std::to_string(t) +
                                " holds a non-finite value");
        }
      }
    }
  }
  return seq;
}

void write_sequence(const std::string& path, std::span<const FeatureCube> cubes_p,
                    std::span<const FeatureCube> cubes_q, std::size_t regions_per_side) {
  detail::write_file(path, encode_sequence(cubes_p, cubes_q, regions_per_side));
}

FeatureSequence read_sequence(const std::string& path) {
  return decode_sequence(detail::read_file(path), path);
}

std::vector<std::size_t> subsample_indices(std::size_t frames, std::size_t n_frames) {
  if (n_frames < 1 || n_frames > frames) {
    throw ConfigError("subsample: n_frames=" + std::to_string(n_frames) + " outside [1, " +
                      std::to_string(frames) + "]");
  }
  if (n_frames == 1) return {1};
  std::vector<std::size_t> idx(n_frames);
  const std::size_t span = frames - 1;
  const std::size_t gaps = n_frames - 1;
  for (std::size_t j = 0; j < n_frames; ++j) {
    // floor(j * span / gaps + 1/2) in exact integer arithmetic.
    idx[j] = 1 + (2 * j * span + gaps) / (2 * gaps);
  }
  return idx;
}

FeatureSequence subsample_frames(const FeatureSequence& seq, std::size_t n_frames) {
  FeatureSequence out;
  out.regions_per_side = seq.regions_per_side;
  out.feature_dim = seq.feature_dim;
  for (std::size_t i : subsample_indices(seq.frames(), n_frames)) {
    out.cubes_p.push_back(seq.cubes_p[i - 1]);
    out.cubes_q.push_back(seq.cubes_q[i - 1]);
  }
  return out;
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    auto f = split_tabs(line);
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty()) {
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": expected sample_id<TAB>feature_file<TAB>label");
    }
    out.push_back({f[0], f[1], f[2]});
  }
  return out;
}

void write_manifest(const std::string& path, std::span<const ManifestRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open manifest '" + path + "' for writing");
  for (const auto& r : records) out << r.sample_id << '\t' << r.feature_file << '\t' << r.label << '\n';
  if (!out) throw IoError("failed writing manifest '" + path + "'");
}

std::size_t LabelMap::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return i;
  }
  throw ConfigError("label '" + label + "' is not in the label map");
}

LabelMap read_label_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label map '" + path + "'");
  std::vector<std::pair<std::string, std::size_t>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (skippable(line)) continue;
    auto f = split_tabs(line);
    std::size_t index = 0;
    std::size_t used = 0;
    try {
      index = std::stoul(f.size() == 2 ? f[1] : std::string{}, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (f.size() != 2 || f[0].empty() || used != f[1].size()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected label<TAB>index");
    }
    entries.emplace_back(f[0], index);
  }
  LabelMap map;
  map.labels.assign(entries.size(), {});
  std::vector<bool> seen(entries.size(), false);
  for (const auto& [label, index] : entries) {
    if (index >= entries.size() || seen[index]) {
      throw ConfigError(path + ": class indices must be dense and unique in [0, " +
                        std::to_string(entries.size()) + "), got " + std::to_string(index) +
                        " for '" + label + "'");
    }
    seen[index] = true;
    map.labels[index] = label;
  }
  std::vector<std::string> sorted = map.labels;
  std::sort(sorted.begin(), sorted.end());
  const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
  if (dup != sorted.end()) throw ConfigError(path + ": label '" + *dup + "' appears twice");
  return map;
}

void write_label_map(const std::string& path, const LabelMap& map) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open label map '" + path + "' for writing");
  for (std::size_t i = 0; i < map.labels.size(); ++i) out << map.labels[i] << '\t' << i << '\n';
  if (!out) throw IoError("failed writing label map '" + path + "'");
}

StreamSelection parse_stream_selection(const std::string& name) {
  if (name == "both") return StreamSelection::kBoth;
  if (name == "appearance") return StreamSelection::kAppearance;
  if (name == "motion") return StreamSelection::kMotion;
  throw ConfigError("unknown stream selection '" + name + "' (both|appearance|motion)");
}

void apply_stream_selection(Dataset& data, StreamSelection streams) {
  if (streams == StreamSelection::kBoth) return;
  for (Sample& s : data) {
    auto& off = streams == StreamSelection::kAppearance ? s.cubes_q : s.cubes_p;
    for (FeatureCube& c : off) std::fill(c.regions.values().begin(), c.regions.values().end(), 0.0);
  }
}

Dataset load_dataset(const std::string& manifest_path, const std::string& label_map_path,
                     const LoadOptions& options) {
  const auto records = read_manifest(manifest_path);
  const LabelMap labels = read_label_map(label_map_path);
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
  Dataset data;
  data.reserve(records.size());
  for (const auto& r : records) {
    std::filesystem::path file(r.feature_file);
    if (file.is_relative()) file = base / file;
    FeatureSequence seq = read_sequence(file.string());
    if (options.frames != 0 && seq.frames() != options.frames) {
      if (seq.frames() < options.frames) {
        throw ConfigError("sample '" + r.sample_id + "' has " + std::to_string(seq.frames()) +
                          " frames, fewer than the requested " + std::to_string(options.frames));
      }
      seq = subsample_frames(seq, options.frames);
    }
    data.push_back({r.sample_id, std::move(seq.cubes_p), std::move(seq.cubes_q),
                    labels.index_of(r.label)});
  }
  apply_stream_selection(data, options.streams);
  return data;
}

}  // namespace han
