// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "spdet/errors.hpp"
#include "spdet/ops.hpp"

namespace spdet::data {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& all_class_names() {
  static const std::vector<std::string> names = {
      "aortic enlargement", "atelectasis",      "calcification",      "cardiomegaly",
      "consolidation",      "ild",              "infiltration",       "lung opacity",
      "nodule/mass",        "other lesion",     "pleural effusion",   "pleural thickening",
      "pneumothorax",       "pulmonary fibrosis"};
  return names;
}

std::vector<std::string> class_names(std::size_t n_classes) {
  if (n_classes < 2 || n_classes > kMaxClasses) {
    throw ConfigError("class count must lie in [2, 14], got " + std::to_string(n_classes));
  }
  const auto& all = all_class_names();
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_classes)};
}

bool DatasetRecord::operator==(const DatasetRecord& other) const {
  if (image_id != other.image_id || report != other.report || gt.size() != other.gt.size()) return false;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (!(gt[i].box == other.gt[i].box) || gt[i].label != other.gt[i].label) return false;
  }
  if (image.shape() != other.image.shape()) return false;
  return std::ranges::equal(image.values(), other.image.values());
}

namespace {

enum class ShapeKind { kRectangle, kEllipse, kRing, kCross, kTriangle, kFrame, kDiamond };
constexpr std::size_t kShapeKinds = 7;

struct Signature {
  ShapeKind kind;
  double intensity;
};

Signature signature(std::size_t label) {
  return {static_cast<ShapeKind>(label % kShapeKinds), label < kShapeKinds ? 0.95 : 0.6};
}

/// Whether pixel centre (u, v), in box-relative coordinates [-1, 1]², belongs to the shape.
bool inside(ShapeKind kind, double u, double v) {
  const double r2 = u * u + v * v;
  switch (kind) {
    case ShapeKind::kRectangle: return true;
    case ShapeKind::kEllipse: return r2 <= 1.0;
    case ShapeKind::kRing: return r2 <= 1.0 && r2 >= 0.36;
    case ShapeKind::kCross: return std::abs(u) <= 0.3 || std::abs(v) <= 0.3;
    case ShapeKind::kTriangle: return v >= -1.0 + 2.0 * std::abs(u);
    case ShapeKind::kFrame: return std::max(std::abs(u), std::abs(v)) >= 0.6;
    case ShapeKind::kDiamond: return std::abs(u) + std::abs(v) <= 1.0;
  }
  return false;
}

const std::array<std::string, 3> kPositiveTemplates = {
    "There is {} in the {} zone.", "Findings are consistent with {}.", "The radiograph shows {} on the {} side."};
const std::array<std::string, 4> kLocations = {"upper", "lower", "left", "right"};

std::string fill(const std::string& pattern, const std::string& name, const std::string& location) {
  std::string out = pattern;
  out.replace(out.find("{}"), 2, name);
  if (auto at = out.find("{}"); at != std::string::npos) out.replace(at, 2, location);
  return out;
}

std::string capitalised(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

DatasetRecord generate_record(std::size_t index, std::size_t n_classes, std::uint64_t seed,
                              const std::vector<std::string>& names, const GeneratorOptions& options) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  Rng rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.03);
  const std::size_t size = options.image_size;

  DatasetRecord rec;
  rec.image_id = "img" + std::to_string(index);
  const std::size_t n_shapes = 1 + rng() % 3;
  for (std::size_t s = 0; s < n_shapes; ++s) {
    const std::size_t label = rng() % n_classes;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const double w = 0.15 + 0.2 * unit(rng), h = 0.15 + 0.2 * unit(rng);
      // Snap to the pixel grid so the drawn shape fills its box exactly.
      const double px = 1.0 / static_cast<double>(size);
      const double x1 = std::round((1 - w) * unit(rng) / px) * px;
      const double y1 = std::round((1 - h) * unit(rng) / px) * px;
      const double x2 = std::min(1.0, x1 + std::round(w / px) * px), y2 = std::min(1.0, y1 + std::round(h / px) * px);
      const BBox box = BBox::from_corners(x1, y1, x2, y2);
      const bool clear = std::ranges::none_of(rec.gt, [&](const detect::GroundTruth& g) {
        return intersection_area(BBox{g.box.cx, g.box.cy, g.box.w + 2 * px, g.box.h + 2 * px}, box) > 0.0;
      });
      if (clear) {
        rec.gt.push_back({box, label});
        break;
      }
    }
  }

  Tensor image = Tensor::zeros({size, size, 1});
  auto pixels = image.data();
  for (std::size_t r = 0; r < size; ++r)
    for (std::size_t c = 0; c < size; ++c) pixels[r * size + c] = 0.1 + noise(rng);
  for (const detect::GroundTruth& g : rec.gt) {
    const Signature sig = signature(g.label);
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        const double x = (c + 0.5) / size, y = (r + 0.5) / size;
        if (x < g.box.x1() || x > g.box.x2() || y < g.box.y1() || y > g.box.y2()) continue;
        const double u = 2 * (x - g.box.cx) / g.box.w, v = 2 * (y - g.box.cy) / g.box.h;
        if (inside(sig.kind, u, v)) pixels[r * size + c] = sig.intensity + noise(rng);
      }
    }
  }
  for (double& p : pixels) p = std::clamp(p, 0.0, 1.0);
  rec.image = image;

  std::vector<bool> present(n_classes, false);
  for (const auto& g : rec.gt) present[g.label] = true;
  std::vector<std::string> sentences;
  for (std::size_t k = 0; k < n_classes; ++k) {
    if (!present[k]) continue;
    const std::string& pattern = kPositiveTemplates[rng() % kPositiveTemplates.size()];
    sentences.push_back(capitalised(fill(pattern, names[k], kLocations[rng() % kLocations.size()])));
  }
  std::vector<std::size_t> absent;
  for (std::size_t k = 0; k < n_classes; ++k)
    if (!present[k]) absent.push_back(k);
  if (!absent.empty() && unit(rng) < options.negation_probability) {
    sentences.push_back("No evidence of " + names[absent[rng() % absent.size()]] + ".");
  }
  for (std::size_t i = 0; i < sentences.size(); ++i) rec.report += (i ? " " : "") + sentences[i];
  return rec;
}

std::string hex_encode(std::span<const double> values) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(values.size() * 16);
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int byte = 0; byte < 8; ++byte) {
      const auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xFFU);
      out += kDigits[b >> 4];
      out += kDigits[b & 0xFU];
    }
  }
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::vector<double> hex_decode(const std::string& text, std::size_t expected, std::size_t line) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (hex_value(text[i]) < 0) throw ParseError("images.bin: invalid hex digit", line, i);
  }
  if (text.size() != expected * 16) {
    throw ParseError("images.bin: expected " + std::to_string(expected * 16) + " hex digits, got " +
                         std::to_string(text.size()),
                     line, text.size());
  }
  std::vector<double> out(expected);
  for (std::size_t k = 0; k < expected; ++k) {
    std::uint64_t bits = 0;
    for (int byte = 0; byte < 8; ++byte) {
      const std::size_t at = k * 16 + 2 * static_cast<std::size_t>(byte);
      const auto b = static_cast<std::uint64_t>(hex_value(text[at]) * 16 + hex_value(text[at + 1]));
      bits |= b << (8 * byte);
    }
    std::memcpy(&out[k], &bits, sizeof bits);
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename T>
T field(const json& j, const char* key, std::size_t line) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("annotations.jsonl: field '") + key + "': " + e.what(), line, 0);
  }
}

}  // namespace

Dataset generate_synthetic_dataset(std::size_t n, std::size_t n_classes, std::uint64_t seed,
                                   const GeneratorOptions& options) {
  if (n < 1) throw ConfigError("dataset size must be at least 1");
  if (options.image_size == 0 || options.image_size % 16 != 0) {
    throw ConfigError("image size must be a positive multiple of 16");
  }
  Dataset ds;
  ds.class_names = class_names(n_classes);
  ds.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.records.push_back(generate_record(i, n_classes, seed, ds.class_names, options));
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "reports");
  std::ofstream ann(dir / "annotations.jsonl", std::ios::binary);
  std::ofstream img(dir / "images.bin", std::ios::binary);
  if (!ann || !img) throw InputError("cannot write dataset files under " + dir.string());
  ann << json{{"format", "spdet-dataset"},
              {"version", kFormatVersion},
              {"classes", dataset.class_names},
              {"count", dataset.records.size()}}
             .dump()
      << '\n';
  for (const DatasetRecord& rec : dataset.records) {
    json boxes = json::array();
    for (const auto& g : rec.gt) {
      boxes.push_back({{"cx", g.box.cx}, {"cy", g.box.cy}, {"w", g.box.w}, {"h", g.box.h}, {"label", g.label}});
    }
    ann << json{{"image_id", rec.image_id},
                {"height", rec.image.dim(0)},
                {"width", rec.image.dim(1)},
                {"boxes", boxes},
                {"report", "reports/" + rec.image_id + ".txt"}}
               .dump()
        << '\n';
    img << hex_encode(rec.image.values()) << '\n';
    std::ofstream rep(dir / "reports" / (rec.image_id + ".txt"), std::ios::binary);
    if (!rep) throw InputError("cannot write report for " + rec.image_id);
    rep << rec.report;
  }
  if (!ann || !img) throw InputError("write failed under " + dir.string());
}

Dataset load_dataset(const fs::path& dir, std::vector<std::string>* missing_reports) {
  std::ifstream ann(dir / "annotations.jsonl", std::ios::binary);
  if (!ann) throw InputError("cannot open " + (dir / "annotations.jsonl").string());
  std::ifstream img(dir / "images.bin", std::ios::binary);
  if (!img) throw InputError("cannot open " + (dir / "images.bin").string());

  auto parse_line = [](const std::string& text, std::size_t line) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("annotations.jsonl: ") + e.what(), line, e.byte);
    }
  };

  std::string text;
  if (!std::getline(ann, text)) throw ParseError("annotations.jsonl: missing header", 1, 0);
  const json header = parse_line(text, 1);
  if (field<std::string>(header, "format", 1) != "spdet-dataset") {
    throw ParseError("annotations.jsonl: unknown format", 1, 0);
  }
  if (field<int>(header, "version", 1) != kFormatVersion) throw ParseError("annotations.jsonl: unsupported version", 1, 0);
  Dataset ds;
  ds.class_names = field<std::vector<std::string>>(header, "classes", 1);
  const auto count = field<std::size_t>(header, "count", 1);

  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t line = i + 2;
    if (!std::getline(ann, text)) {
      throw ParseError("annotations.jsonl: expected " + std::to_string(count) + " records, file ends early", line, 0);
    }
    const json j = parse_line(text, line);
    DatasetRecord rec;
    rec.image_id = field<std::string>(j, "image_id", line);
    const auto h = field<std::size_t>(j, "height", line), w = field<std::size_t>(j, "width", line);
    for (const json& b : field<json>(j, "boxes", line)) {
      detect::GroundTruth g{{field<double>(b, "cx", line), field<double>(b, "cy", line), field<double>(b, "w", line),
                             field<double>(b, "h", line)},
                            field<std::size_t>(b, "label", line)};
      if (g.label >= ds.class_names.size()) throw ParseError("annotations.jsonl: label out of range", line, 0);
      rec.gt.push_back(g);
    }
    std::string pixels;
    if (!std::getline(img, pixels)) throw ParseError("images.bin: file ends early", i + 1, 0);
    rec.image = Tensor::from({h, w, 1}, hex_decode(pixels, h * w, i + 1));
    const fs::path report = dir / field<std::string>(j, "report", line);
    if (missing_reports && !fs::exists(report)) {
      missing_reports->push_back(rec.image_id);
    } else {
      rec.report = read_text(report);
    }
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

ImageStub ImageStub::create(nn::ParamStore& store, const std::string& prefix, const StubConfig& config, Rng& rng) {
  return {nn::Conv2d::create(store, prefix + ".conv1", 1, 8, 3, 2, rng),
          nn::Conv2d::create(store, prefix + ".conv2", 8, 16, 3, 2, rng),
          nn::Conv2d::create(store, prefix + ".conv3", 16, config.d_low, 3, 2, rng),
          nn::Conv2d::create(store, prefix + ".conv4", config.d_low, config.d_high, 3, 2, rng)};
}

bfe::FeaturePyramid image_stub_encoder(const Tensor& image, const ImageStub& stub) {
  if (image.rank() != 3 || image.dim(2) != 1) throw DimensionError("image must be [H × W × 1], got " + shape_str(image.shape()));
  if (image.dim(0) % 16 != 0 || image.dim(1) % 16 != 0) {
    throw ConfigError("image dims must be divisible by 16, got " + shape_str(image.shape()));
  }
  Tensor x = silu(stub.conv1.forward(image));
  x = silu(stub.conv2.forward(x));
  Tensor low = silu(stub.conv3.forward(x));
  Tensor high = silu(stub.conv4.forward(low));
  return {high, low};
}

}  // namespace spdet::data
