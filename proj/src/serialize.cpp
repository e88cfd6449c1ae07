#include "sigprune/serialize.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <zlib.h>

#include "sigprune/errors.hpp"

namespace sigprune {

namespace fs = std::filesystem;

namespace {

void put_f32(std::vector<std::uint8_t>& out, double value) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(value));
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>(bits >> shift));
}

double get_f32(const std::uint8_t* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

[[noreturn]] void corrupt(const fs::path& dir, const std::string& why) {
  fail(ErrorKind::CorruptModel, fmt::format("{}: {}", dir.string(), why));
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_params(const Network& net) {
  Network copy = net;
  std::vector<std::uint8_t> blob;
  for (const auto& slot : parameter_slots(copy))
    for (double v : slot.values) put_f32(blob, v);
  return blob;
}

void save_model(const Network& net, const fs::path& dir, std::size_t original_kernels) {
  net.validate();
  fs::create_directories(dir);
  Network copy = net;
  const auto blob = encode_params(net);

  nlohmann::json manifest;
  manifest["schema_version"] = kModelSchemaVersion;
  const auto arch = net.architecture();
  manifest["architecture"] = {{"c1", arch.widths[0]},          {"c2", arch.widths[1]},
                              {"c3", arch.widths[2]},          {"k", arch.kernel},
                              {"p_drop", arch.dropout},        {"d", arch.input_length},
                              {"K", arch.classes},             {"pool_width", net.blocks[0].pool_width},
                              {"bn_momentum", net.blocks[0].bn.momentum}, {"bn_eps", net.blocks[0].bn.eps}};
  manifest["original_kernels"] = original_kernels ? original_kernels : net.total_kernels();
  auto& params = manifest["parameters"] = nlohmann::json::array();
  for (const auto& slot : parameter_slots(copy)) params.push_back({{"name", slot.name}, {"shape", slot.shape}});
  manifest["blob"] = {{"file", "params.bin"}, {"dtype", "float32-le"}, {"bytes", blob.size()}, {"crc32", crc32(blob)}};

  std::ofstream bin(dir / "params.bin", std::ios::binary);
  bin.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!bin) fail(ErrorKind::Io, fmt::format("cannot write {}", (dir / "params.bin").string()));
  std::ofstream man(dir / "manifest.json", std::ios::binary);
  man << manifest.dump(2) << '\n';
  if (!man) fail(ErrorKind::Io, fmt::format("cannot write {}", (dir / "manifest.json").string()));
}

ModelFile load_model(const fs::path& dir) {
  std::ifstream man(dir / "manifest.json");
  if (!man) fail(ErrorKind::Io, fmt::format("no manifest.json in '{}'", dir.string()));
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(man);
  } catch (const nlohmann::json::exception& e) {
    corrupt(dir, fmt::format("manifest is not valid JSON ({})", e.what()));
  }

  ModelFile out;
  Architecture arch;
  std::size_t pool_width = 2;
  double momentum = 0.1;
  double eps = 1e-5;
  std::uint32_t expected_crc = 0;
  std::size_t expected_bytes = 0;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> listed;
  try {
    if (manifest.at("schema_version").get<int>() != kModelSchemaVersion) corrupt(dir, "unsupported schema version");
    const auto& a = manifest.at("architecture");
    arch.widths = {a.at("c1").get<std::size_t>(), a.at("c2").get<std::size_t>(), a.at("c3").get<std::size_t>()};
    arch.kernel = a.at("k").get<std::size_t>();
    arch.dropout = a.at("p_drop").get<double>();
    arch.input_length = a.at("d").get<std::size_t>();
    arch.classes = a.at("K").get<std::size_t>();
    pool_width = a.value("pool_width", std::size_t{2});
    momentum = a.value("bn_momentum", 0.1);
    eps = a.value("bn_eps", 1e-5);
    out.original_kernels = manifest.at("original_kernels").get<std::size_t>();
    expected_crc = manifest.at("blob").at("crc32").get<std::uint32_t>();
    expected_bytes = manifest.at("blob").at("bytes").get<std::size_t>();
    for (const auto& p : manifest.at("parameters")) {
      listed.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<std::vector<std::size_t>>());
    }
  } catch (const nlohmann::json::exception& e) {
    corrupt(dir, fmt::format("manifest schema mismatch ({})", e.what()));
  }

  try {
    out.net = init_network_unchecked(arch, 0);
  } catch (const Error& e) {
    corrupt(dir, fmt::format("invalid architecture ({})", e.what()));
  }
  for (auto& blk : out.net.blocks) {
    blk.pool_width = pool_width;
    blk.bn.momentum = momentum;
    blk.bn.eps = eps;
  }

  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) corrupt(dir, "params.bin is missing");
  const std::vector<std::uint8_t> blob{std::istreambuf_iterator<char>(bin), std::istreambuf_iterator<char>()};
  if (blob.size() != expected_bytes) {
    corrupt(dir, fmt::format("params.bin has {} bytes, manifest says {}", blob.size(), expected_bytes));
  }
  if (crc32(blob) != expected_crc) corrupt(dir, "params.bin checksum mismatch");

  auto slots = parameter_slots(out.net);
  if (slots.size() != listed.size()) corrupt(dir, "parameter list does not match architecture");
  std::size_t offset = 0;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s].name != listed[s].first || slots[s].shape != listed[s].second) {
      corrupt(dir, fmt::format("parameter '{}' does not match architecture", listed[s].first));
    }
    if (offset + 4 * slots[s].values.size() > blob.size()) corrupt(dir, "params.bin is truncated");
    for (double& v : slots[s].values) {
      v = get_f32(blob.data() + offset);
      offset += 4;
    }
  }
  if (offset != blob.size()) corrupt(dir, "params.bin has trailing bytes");
  return out;
}

}  // namespace sigprune
