#include <filesystem>
#include <fstream>
#include <optional>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "sigprune/errors.hpp"
#include "sigprune/serialize.hpp"

using namespace sigprune;
namespace fs = std::filesystem;

namespace {

class ModelDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sigprune_ser_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::optional<ErrorKind> load_error(const fs::path& dir) {
  try {
    load_model(dir);
  } catch (const Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

Network trained_looking_net() {
  auto net = init_network(Architecture{}, 5);
  std::mt19937_64 rng(1);
  for (auto& b : net.blocks) {
    b.bn.running_mean = oracle::random_vector(b.bn.running_mean.size(), rng);
    b.bn.running_var = oracle::random_vector(b.bn.running_var.size(), rng, 0.3, 2.0);
  }
  return net;
}

}  // namespace

TEST(Crc32, KnownVector) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}), 0xCBF43926u);
}

TEST_F(ModelDir, RoundTripPreservesBlobAndPredictions) {
  const auto net = trained_looking_net();
  save_model(net, dir_, 112);
  const auto loaded = load_model(dir_);
  EXPECT_EQ(loaded.original_kernels, 112u);
  EXPECT_EQ(loaded.net.architecture(), net.architecture());
  EXPECT_EQ(encode_params(loaded.net), encode_params(net));

  const auto blob = read_bytes(dir_ / "params.bin");
  save_model(loaded.net, dir_ / "again", 112);
  EXPECT_EQ(read_bytes(dir_ / "again" / "params.bin"), blob);

  std::mt19937_64 rng(2);
  const auto x = oracle::random_tensor(100, 1, 178, rng);
  const auto a = network_forward_eval(net, x);
  const auto b = network_forward_eval(loaded.net, x);
  EXPECT_LT(oracle::max_abs_diff(a.data(), b.data()), 1e-5);
}

TEST_F(ModelDir, ManifestDescribesArchitecture) {
  save_model(init_network(Architecture{}, 1), dir_);
  std::ifstream in(dir_ / "manifest.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("architecture").at("c1"), 16);
  EXPECT_EQ(j.at("architecture").at("k"), 5);
  EXPECT_EQ(j.at("blob").at("dtype"), "float32-le");
  EXPECT_EQ(j.at("blob").at("bytes"), 4 * (init_network(Architecture{}, 1).parameter_count() + 2 * (16 + 32 + 64)));
}

TEST_F(ModelDir, PrunedWidthsRoundTrip) {
  Architecture arch;
  arch.widths = {8, 16, 32};
  const auto net = init_network(arch, 3);
  save_model(net, dir_, 112);
  EXPECT_EQ(load_model(dir_).net, load_model(dir_).net);
  EXPECT_EQ(load_model(dir_).net.architecture().widths, arch.widths);
}

TEST_F(ModelDir, TruncatedBlobIsCorrupt) {
  save_model(init_network(Architecture{}, 1), dir_);
  auto bytes = read_bytes(dir_ / "params.bin");
  bytes.resize(bytes.size() - 4);
  write_bytes(dir_ / "params.bin", bytes);
  EXPECT_EQ(load_error(dir_), ErrorKind::CorruptModel);
}

TEST_F(ModelDir, FlippedByteIsCorrupt) {
  save_model(init_network(Architecture{}, 1), dir_);
  auto bytes = read_bytes(dir_ / "params.bin");
  bytes[bytes.size() / 2] ^= 0x40;
  write_bytes(dir_ / "params.bin", bytes);
  EXPECT_EQ(load_error(dir_), ErrorKind::CorruptModel);
}

TEST_F(ModelDir, TrailingBytesAreCorrupt) {
  save_model(init_network(Architecture{}, 1), dir_);
  auto bytes = read_bytes(dir_ / "params.bin");
  bytes.push_back(0);
  write_bytes(dir_ / "params.bin", bytes);
  EXPECT_EQ(load_error(dir_), ErrorKind::CorruptModel);
}

TEST_F(ModelDir, SchemaMismatchIsCorrupt) {
  save_model(init_network(Architecture{}, 1), dir_);
  nlohmann::json j;
  {
    std::ifstream in(dir_ / "manifest.json");
    j = nlohmann::json::parse(in);
  }
  j["schema_version"] = 99;
  std::ofstream(dir_ / "manifest.json") << j.dump();
  EXPECT_EQ(load_error(dir_), ErrorKind::CorruptModel);
}

TEST_F(ModelDir, MissingDirectoryIsIoError) { EXPECT_EQ(load_error(dir_ / "nope"), ErrorKind::Io); }
