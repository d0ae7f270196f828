#include "latprobe/probe/checkpoint.hpp"

#include <cstring>
#include <json.hpp>

#include "latprobe/error.hpp"
#include "latprobe/io/dataset.hpp"
#include "latprobe/util/files.hpp"

namespace latprobe::probe {

namespace {

constexpr char kMagic[4] = {'F', 'P', 'C', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  nlohmann::ordered_json h;
  h["arch"] = std::string(to_string(ck.theta.arch));
  h["in_dim"] = ck.theta.in_dim;
  h["hidden"] = ck.theta.hidden;
  h["classes"] = ck.theta.classes;
  h["family"] = std::string(subsets::to_string(ck.phi.kind));
  h["theta_len"] = ck.theta.theta.size();
  h["phi_len"] = ck.phi.phi.size();
  h["seed"] = ck.seed;
  h["config_hash"] = ck.config_hash;
  const std::string header = h.dump();

  io::FprbMatrix blob;
  blob.rows = 1;
  blob.cols = static_cast<std::uint32_t>(ck.theta.theta.size() + ck.phi.phi.size());
  for (double v : ck.theta.theta) blob.values.push_back(static_cast<float>(v));
  for (double v : ck.phi.phi) blob.values.push_back(static_cast<float>(v));

  std::string out(kMagic, 4);
  put_u32(out, 1);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  out += io::encode_fprb(blob);
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  require(bytes.size() >= 12 && std::memcmp(bytes.data(), kMagic, 4) == 0, ErrorKind::format,
          "checkpoint: bad magic");
  require(get_u32(bytes.data() + 4) == 1, ErrorKind::format, "checkpoint: unsupported version");
  const std::uint32_t hlen = get_u32(bytes.data() + 8);
  require(bytes.size() >= 12 + std::size_t{hlen}, ErrorKind::format, "checkpoint: truncated header");

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(12, hlen));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("checkpoint: malformed header: ") + e.what());
  }
  const io::FprbMatrix blob = io::decode_fprb(bytes.substr(12 + hlen));

  Checkpoint ck;
  try {
    ck.theta = zero_probe(parse_arch(h.at("arch").get<std::string>()), h.at("in_dim").get<std::size_t>(),
                          h.at("classes").get<std::vector<std::string>>(),
                          h.at("hidden").get<std::size_t>());
    const auto kind = subsets::parse_family(h.at("family").get<std::string>());
    const auto tlen = h.at("theta_len").get<std::size_t>();
    const auto plen = h.at("phi_len").get<std::size_t>();
    ck.seed = h.at("seed").get<std::uint64_t>();
    ck.config_hash = h.at("config_hash").get<std::string>();
    require(tlen == ck.theta.theta.size() && blob.values.size() == tlen + plen, ErrorKind::shape,
            "checkpoint: parameter blob does not match header");
    for (std::size_t i = 0; i < tlen; ++i) ck.theta.theta[i] = blob.values[i];
    std::vector<double> phi(blob.values.begin() + static_cast<std::ptrdiff_t>(tlen), blob.values.end());
    switch (kind) {
      case subsets::FamilyKind::poisson: ck.phi = subsets::SubsetFamilyParams::poisson(std::move(phi)); break;
      case subsets::FamilyKind::cond_poisson:
        ck.phi = subsets::SubsetFamilyParams::cond_poisson(std::move(phi));
        break;
      case subsets::FamilyKind::full_set: ck.phi = subsets::SubsetFamilyParams::full_set(plen); break;
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("checkpoint: bad header field: ") + e.what());
  }
  ck.theta.validate();
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  util::write_file_atomic(path, encode_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(util::read_file(path));
}

}  // namespace latprobe::probe
