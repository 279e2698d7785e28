#include <cstring>

#include "binary_io.hpp"
#include "han/han_model.hpp"

namespace han {

namespace {

constexpr char kMagic[4] = {'H', 'A', 'N', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 7 * 4;

ModelConfig parse_header(const std::vector<unsigned char>& bytes, const std::string& path) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    if (bytes.size() < 4) {
      throw FormatError(FormatErrorKind::kTruncatedHeader, "'" + path + "' shorter than magic");
    }
    throw FormatError(FormatErrorKind::kBadMagic, "'" + path + "' is not a HAN1 checkpoint");
  }
  if (bytes.size() < kHeaderBytes) {
    throw FormatError(FormatErrorKind::kTruncatedHeader, "'" + path + "' header is incomplete");
  }
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw FormatError(FormatErrorKind::kUnsupportedVersion,
                      "checkpoint version " + std::to_string(version) + ", reader supports " +
                          std::to_string(kCheckpointVersion));
  }
  const unsigned char* p = bytes.data() + 8;
  ModelConfig cfg;
  cfg.regions_per_side = detail::get_u32(p + 0);
  cfg.feature_dim = detail::get_u32(p + 4);
  cfg.hidden = detail::get_u32(p + 8);
  cfg.layers = detail::get_u32(p + 12);
  cfg.skip = detail::get_u32(p + 16);
  cfg.frames = detail::get_u32(p + 20);
  cfg.classes = detail::get_u32(p + 24);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw FormatError(FormatErrorKind::kShapeInconsistent, e.what());
  }
  return cfg;
}

void check_expected(const ModelConfig& got, const ModelConfig& want) {
  auto cmp = [](std::uint32_t a, std::uint32_t b, const char* name) {
    if (a != b) {
      throw FormatError(FormatErrorKind::kConfigMismatch,
                        std::string("checkpoint has ") + name + "=" + std::to_string(a) +
                            ", run expects " + name + "=" + std::to_string(b));
    }
  };
  cmp(got.regions_per_side, want.regions_per_side, "K");
  cmp(got.feature_dim, want.feature_dim, "D");
  cmp(got.hidden, want.hidden, "H");
  cmp(got.layers, want.layers, "L");
  cmp(got.skip, want.skip, "k");
  cmp(got.frames, want.frames, "T");
  cmp(got.classes, want.classes, "C");
}

HanModel decode(const std::vector<unsigned char>& bytes, const std::string& path,
                const ModelConfig* expected) {
  const ModelConfig cfg = parse_header(bytes, path);
  if (expected) check_expected(cfg, *expected);

  HanModel model(cfg);
  const std::size_t want = kHeaderBytes + 8 * model.parameter_count();
  if (bytes.size() < want) {
    throw FormatError(FormatErrorKind::kTruncatedPayload,
                      "'" + path + "' has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(want));
  }
  if (bytes.size() > want) {
    throw FormatError(FormatErrorKind::kTrailingBytes,
                      "'" + path + "' has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(want));
  }
  const unsigned char* p = bytes.data() + kHeaderBytes;
  for (auto& t : model.tensors()) {
    for (double& v : t.data) {
      v = detail::get_f64(p);
      p += 8;
    }
  }
  return model;
}

}  // namespace

void save_checkpoint(const HanModel& model, const std::string& path) {
  model.validate();
  std::vector<unsigned char> buf;
  buf.reserve(kHeaderBytes + 8 * model.parameter_count());
  buf.insert(buf.end(), kMagic, kMagic + 4);
  detail::put_u32(buf, kCheckpointVersion);
  const ModelConfig& c = model.config;
  for (std::uint32_t v : {c.regions_per_side, c.feature_dim, c.hidden, c.layers, c.skip,
                          c.frames, c.classes}) {
    detail::put_u32(buf, v);
  }
  for (const auto& t : model.tensors()) {
    for (double v : t.data) detail::put_f64(buf, v);
  }
  detail::write_file(path, buf);
}

HanModel load_checkpoint(const std::string& path) {
  return decode(detail::read_file(path), path, nullptr);
}

HanModel load_checkpoint(const std::string& path, const ModelConfig& expected) {
  return decode(detail::read_file(path), path, &expected);
}

}  // namespace han
