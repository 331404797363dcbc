#include "csi/numerics/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>

namespace csi {

namespace {

constexpr char kMagic[] = "CSICKPT1";
constexpr std::size_t kMagicLength = 8;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const std::string& in, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_checkpoint(const ParamStore& params, const nlohmann::json& config) {
  nlohmann::json header;
  header["params"] = nlohmann::json::array();
  for (const std::string& name : params.names()) {
    header["params"].push_back({{"name", name}, {"shape", params.value(name).shape()}});
  }
  header["config"] = config;
  const std::string text = header.dump();

  std::string out(kMagic, kMagicLength);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + params.element_count() * 8);
  for (const std::string& name : params.names()) {
    for (double v : params.value(name).values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < kMagicLength + 8 || bytes.compare(0, kMagicLength, kMagic) != 0) {
    throw CheckpointError("not a CSICKPT1 checkpoint");
  }
  const std::uint64_t header_len = get_u64(bytes, kMagicLength);
  std::size_t offset = kMagicLength + 8;
  if (header_len > bytes.size() - offset) throw CheckpointError("checkpoint header truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(offset, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  offset += header_len;

  Checkpoint ckpt;
  ckpt.config = header.value("config", nlohmann::json::object());
  for (const auto& entry : header.at("params")) {
    const auto name = entry.at("name").get<std::string>();
    auto shape = entry.at("shape").get<Shape>();
    const std::size_t count = shape_size(shape);
    if (count * 8 > bytes.size() - offset) throw CheckpointError("checkpoint data truncated at " + name);
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
      data[i] = std::bit_cast<double>(get_u64(bytes, offset));
      offset += 8;
    }
    ckpt.params.add(name, Tensor(std::move(shape), std::move(data)));
  }
  if (offset != bytes.size()) throw CheckpointError("trailing bytes after checkpoint data");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params, const nlohmann::json& config) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
  const std::string bytes = encode_checkpoint(params, config);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace csi
