#include "contfood/checkpoint.hpp"

#include "contfood/codec.hpp"
#include "contfood/error.hpp"

namespace contfood {

std::string Checkpoint::save() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["created_at"] = created_at;
  j["increments_applied"] = increments_applied;
  j["vectorizer"] = vectorizer.to_json();
  auto layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    layers.push_back({{"rows", l.rows}, {"cols", l.cols}, {"w_b64", codec::encode_f64(l.weights)},
                      {"b_b64", codec::encode_f64(l.bias)}});
  }
  j["layers"] = std::move(layers);
  j["crc32"] = payload_crc(j);
  return j.dump();
}

Checkpoint Checkpoint::load(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: unreadable payload: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version") || !j["format_version"].is_number_integer()) {
    throw DataError("checkpoint: missing format_version");
  }
  if (const int v = j["format_version"].get<int>(); v != kFormatVersion) {
    throw DataError("checkpoint: unsupported format_version " + std::to_string(v) + " (expected " +
                    std::to_string(kFormatVersion) + ")");
  }
  verify_payload_crc(j, "checkpoint");
  Checkpoint c;
  try {
    c.created_at = j.at("created_at").get<std::string>();
    c.increments_applied = j.at("increments_applied").get<std::uint64_t>();
    c.vectorizer = TfidfModel::from_json(j.at("vectorizer"));
    for (const auto& lj : j.at("layers")) {
      DenseLayer l;
      l.rows = lj.at("rows").get<std::size_t>();
      l.cols = lj.at("cols").get<std::size_t>();
      l.weights = codec::decode_f64(lj.at("w_b64").get<std::string>());
      l.bias = codec::decode_f64(lj.at("b_b64").get<std::string>());
      if (l.weights.size() != l.rows * l.cols || l.bias.size() != l.cols) {
        throw DataError("checkpoint: layer " + std::to_string(c.params.layers.size() + 1) +
                        " payload does not match its declared shape");
      }
      c.params.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  const auto& layers = c.params.layers;
  if (layers.empty()) throw DataError("checkpoint: no layers");
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i].rows != layers[i - 1].cols) throw DataError("checkpoint: layer dimensions do not chain");
  }
  if (layers.back().cols != 1) throw DataError("checkpoint: output layer must have one unit");
  if (layers.front().rows != c.vectorizer.dim()) {
    throw DataError("checkpoint: network input does not match vectorizer vocabulary size");
  }
  c.params.check_finite();
  return c;
}

Checkpoint Checkpoint::read(const std::string& path) { return load(codec::read_file(path)); }

void Checkpoint::write(const std::string& path) const { codec::write_file_atomic(path, save()); }

}  // namespace contfood
