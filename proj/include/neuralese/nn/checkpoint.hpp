#pragma once

// Versioned JSON checkpoints:
//   {"format": "neuralese-ckpt-v1",
//    "tensors": {name: {"shape": [rows, cols], "data": base64(little-endian f64)}},
//    "meta": {...}}

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>
#include "neuralese/nn/layers.hpp"

namespace neuralese::nn {

inline constexpr const char* kCheckpointFormat = "neuralese-ckpt-v1";

inline std::string base64_encode(const std::string& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

inline std::string base64_decode(std::string text) {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::size_t pad = 0;
  while (!text.empty() && text.back() == '=') {
    text.pop_back();
    ++pad;
  }
  if (pad > 2) throw FormatError("base64: bad padding");
  for (char c : text) {
    bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '+' ||
              c == '/';
    if (!ok) throw FormatError("base64: invalid character");
  }
  std::string out(It(text.begin()), It(text.end()));
  // transform_width emits a trailing partial byte for padded input.
  std::size_t expected = (text.size() * 6) / 8;
  out.resize(expected);
  return out;
}

inline nlohmann::json tensor_to_json(const Tensor& t) {
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(t.size()) * 8);
  for (Index i = 0; i < t.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(t.data()[i]);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  return {{"shape", {t.rows(), t.cols()}}, {"data", base64_encode(bytes)}};
}

inline Tensor tensor_from_json(const nlohmann::json& j) {
  auto shape = j.at("shape").get<std::vector<Index>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0) throw FormatError("tensor shape must be [rows, cols]");
  std::string bytes = base64_decode(j.at("data").get<std::string>());
  if (bytes.size() != static_cast<std::size_t>(shape[0] * shape[1]) * 8) {
    throw FormatError("tensor data length does not match shape");
  }
  Tensor t(shape[0], shape[1]);
  for (Index i = 0; i < t.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[8 * i + b])) << (8 * b);
    }
    t.data()[i] = std::bit_cast<double>(bits);
  }
  return t;
}

struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  nlohmann::json meta = nlohmann::json::object();

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["tensors"] = nlohmann::json::object();
    for (const auto& [name, t] : tensors) j["tensors"][name] = tensor_to_json(t);
    j["meta"] = meta;
    return j;
  }

  static Checkpoint from_json(const nlohmann::json& j) {
    if (j.value("format", "") != kCheckpointFormat) {
      throw FormatError("not a " + std::string(kCheckpointFormat) + " document");
    }
    Checkpoint ck;
    for (const auto& [name, t] : j.at("tensors").items()) ck.tensors.emplace(name, tensor_from_json(t));
    if (j.contains("meta")) ck.meta = j.at("meta");
    return ck;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << to_json().dump() << "\n";
  }

  static Checkpoint load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ": " + e.what());
    }
  }

  void put(const ParamRefs& params) {
    for (const Parameter& p : params) tensors[p.name] = p.value;
  }

  /// Copies stored tensors into `params`; every parameter must be present
  /// with a matching shape.
  void get(ParamRefs& params) const {
    for (Parameter& p : params) {
      auto it = tensors.find(p.name);
      if (it == tensors.end()) throw FormatError("checkpoint lacks tensor " + p.name);
      if (it->second.rows() != p.value.rows() || it->second.cols() != p.value.cols()) {
        throw ShapeMismatch("checkpoint tensor " + p.name + " has shape " + shape_string(it->second));
      }
      p.value = it->second;
      p.zero_grad();
    }
  }
};

}  // namespace neuralese::nn
