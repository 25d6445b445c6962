// Copyright (C) 2026 The spdet Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "spdet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "spdet/errors.hpp"

namespace spdet::checkpoint {

using nlohmann::json;

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw VersionError(std::string("checkpoint truncated reading ") + what);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::string get_string(std::istream& in, std::size_t length, const char* what) {
  std::string s(length, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(length))) {
    throw VersionError(std::string("checkpoint truncated reading ") + what);
  }
  return s;
}

}  // namespace

void save(const std::filesystem::path& path, const model::Model& model, const json& meta) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw InputError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    const std::string header = json{{"model", model.config.to_json()},
                                    {"class_names", model.class_names},
                                    {"vocabulary", model.vocab.serialize()},
                                    {"meta", meta}}
                                   .dump();
    put<std::uint64_t>(out, header.size());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    const auto& entries = model.store.entries();
    put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
      out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      put<std::uint8_t>(out, kFloat64Tag);
      put<std::uint32_t>(out, static_cast<std::uint32_t>(e.tensor.rank()));
      for (std::size_t d : e.tensor.shape()) put<std::uint64_t>(out, d);
      for (double v : e.tensor.values()) put<double>(out, v);
    }
    if (!out) throw InputError("write failed for checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Loaded load(const std::filesystem::path& path, const std::optional<model::ModelConfig>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw VersionError(path.string() + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kVersion));
  }
  const auto header_size = get<std::uint64_t>(in, "header length");
  json header;
  try {
    header = json::parse(get_string(in, header_size, "header"));
  } catch (const json::parse_error& e) {
    throw VersionError(std::string("checkpoint header: ") + e.what());
  }
  model::ModelConfig config;
  try {
    config = model::ModelConfig::from_json(header.at("model"));
  } catch (const std::exception& e) {
    throw VersionError(std::string("checkpoint config: ") + e.what());
  }
  if (expected && !(*expected == config)) {
    throw VersionError("checkpoint config " + config.to_json().dump() + " does not match requested " +
                       expected->to_json().dump());
  }
  Loaded result;
  result.meta = header.value("meta", json::object());
  result.model = std::make_unique<model::Model>(
      config, enc::Vocabulary::parse(header.at("vocabulary").get<std::string>(), config.max_length),
      header.at("class_names").get<std::vector<std::string>>(), 0);

  std::map<std::string, Tensor> by_name;
  for (auto& e : result.model->store.entries()) by_name.emplace(e.name, e.tensor);
  const auto count = get<std::uint32_t>(in, "tensor count");
  if (count != by_name.size()) {
    throw VersionError("checkpoint holds " + std::to_string(count) + " tensors, model has " +
                       std::to_string(by_name.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(in, get<std::uint32_t>(in, "name length"), "name");
    if (get<std::uint8_t>(in, "dtype") != kFloat64Tag) throw VersionError("unsupported dtype for " + name);
    const auto rank = get<std::uint32_t>(in, "rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(get<std::uint64_t>(in, "extent"));
    auto it = by_name.find(name);
    if (it == by_name.end()) throw VersionError("unknown tensor " + name + " in checkpoint");
    if (it->second.shape() != shape) {
      throw VersionError("tensor " + name + " has shape " + shape_str(shape) + ", model expects " +
                         shape_str(it->second.shape()));
    }
    for (double& v : it->second.data()) v = get<double>(in, name.c_str());
  }
  return result;
}

}  // namespace spdet::checkpoint
