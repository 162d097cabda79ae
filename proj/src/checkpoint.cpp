#include "physdoa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace physdoa {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'P', 'D', 'O', 'A', 'C', 'K', 'P', 'T'};
}

Checkpoint::Checkpoint(const Encoder& enc, double sigma_raw_value)
    : encoder_config(enc.config()), encoder(enc), sigma_raw(sigma_raw_value) {}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  nlohmann::json table = nlohmann::json::array();
  for (const nn::Param* p : c.encoder.params())
    table.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  const nlohmann::json header = {{"encoder", c.encoder_config}, {"sigma_raw", c.sigma_raw}, {"step", c.step},
                                 {"epoch", c.epoch},           {"rng_state", c.rng_state}, {"params", table},
                                 {"extra", c.extra}};
  const std::string h = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, 8);
    const std::uint32_t version = kCheckpointVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint64_t n = h.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(h.data(), static_cast<std::streamsize>(n));
    for (const nn::Param* p : c.encoder.params())
      out.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError(path.string() + " is not a checkpoint");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), 8);
  if (!in || n > (1ull << 30)) throw IoError("corrupt checkpoint header");
  std::string h(n, '\0');
  in.read(h.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("truncated checkpoint header");
  Checkpoint c;
  try {
    const auto header = nlohmann::json::parse(h);
    c.encoder_config = encoder_config_from_json(header.at("encoder"));
    c.encoder = Encoder(c.encoder_config);
    c.sigma_raw = header.at("sigma_raw").get<double>();
    c.step = header.at("step").get<std::int64_t>();
    c.epoch = header.at("epoch").get<int>();
    c.rng_state = header.at("rng_state").get<std::string>();
    c.extra = header.at("extra");
    const auto& table = header.at("params");
    auto params = c.encoder.params();
    if (table.size() != params.size()) throw IoError("checkpoint parameter table does not match encoder");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (table[i].at("name").get<std::string>() != params[i]->name ||
          table[i].at("rows").get<Eigen::Index>() != params[i]->value.rows() ||
          table[i].at("cols").get<Eigen::Index>() != params[i]->value.cols())
        throw IoError("checkpoint parameter '" + table[i].at("name").get<std::string>() + "' does not match encoder");
      in.read(reinterpret_cast<char*>(params[i]->value.data()),
              static_cast<std::streamsize>(params[i]->value.size() * sizeof(float)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (!in) throw IoError("truncated checkpoint data");
  return c;
}

}  // namespace physdoa
