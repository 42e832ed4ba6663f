#include "varinf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "varinf/errors.hpp"

namespace varinf {
namespace {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ConfigError("checkpoint: truncated file");
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace

void Checkpoint::add(std::string name, const Mlp& net) {
  networks.push_back({std::move(name), net.spec(), net.params()});
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& e : networks) {
    if (e.name == name) return true;
  }
  return false;
}

Mlp Checkpoint::mlp(const std::string& name) const {
  for (const auto& e : networks) {
    if (e.name == name) return Mlp(e.spec, e.params);
  }
  throw ConfigError("checkpoint has no network named '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["networks"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& e : ckpt.networks) {
    header["networks"].push_back({{"name", e.name},
                                  {"layer_sizes", e.spec.layer_sizes},
                                  {"hidden", to_string(e.spec.hidden)},
                                  {"output", to_string(e.spec.output)},
                                  {"offset", offset},
                                  {"count", e.params.values.size()}});
    offset += e.params.values.size();
  }
  header["count"] = offset;
  header["meta"] = ckpt.meta;
  const std::string text = header.dump();

  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& e : ckpt.networks) {
    for (double v : e.params.values) put_le<double>(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw ConfigError("checkpoint: bad magic");
  }
  std::size_t pos = sizeof(kCheckpointMagic);
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw ConfigError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: bad header: ") + e.what());
  }
  pos += header_len;

  const std::size_t total = header.at("count").get<std::size_t>();
  if (bytes.size() - pos != total * sizeof(double)) {
    throw ConfigError("checkpoint: payload size does not match header count");
  }
  std::vector<double> values(total);
  for (auto& v : values) v = get_le<double>(bytes, pos);

  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& n : header.at("networks")) {
    MlpSpec spec{n.at("layer_sizes").get<std::vector<std::size_t>>(),
                 activation_from_string(n.at("hidden").get<std::string>()),
                 activation_from_string(n.at("output").get<std::string>())};
    const auto offset = n.at("offset").get<std::size_t>();
    const auto count = n.at("count").get<std::size_t>();
    if (offset + count > total || count != mlp_param_count(spec.layer_sizes)) {
      throw ConfigError("checkpoint: network segment inconsistent with layer sizes");
    }
    ParamVector p;
    p.layout = ParamLayout::for_layers(spec.layer_sizes);
    p.values.assign(values.begin() + static_cast<std::ptrdiff_t>(offset),
                    values.begin() + static_cast<std::ptrdiff_t>(offset + count));
    ckpt.networks.push_back({n.at("name").get<std::string>(), std::move(spec), std::move(p)});
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  const std::string bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace varinf
