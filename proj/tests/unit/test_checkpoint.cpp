#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fmfusion/checkpoint.hpp"
#include "fmfusion/serialize.hpp"

using namespace fmf;
namespace fs = std::filesystem;

namespace {

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fmf_ckpt_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  nlohmann::json manifest() const {
    std::ifstream is(dir_ / "manifest.json");
    return nlohmann::json::parse(is);
  }
  void write_manifest(const nlohmann::json& j) const {
    std::ofstream os(dir_ / "manifest.json", std::ios::trunc);
    os << j.dump(2);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CheckpointTest, RoundTripsEveryVariant) {
  for (Variant v : kAllVariants) {
    const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(v, {4, 8, 8}), 17);
    save_checkpoint(dir_, net, 123);
    const Checkpoint c = load_checkpoint(dir_);
    EXPECT_EQ(c.step, 123u);
    EXPECT_EQ(c.net.seed(), 17u);
    EXPECT_EQ(c.net.spec().variant, v);
    EXPECT_EQ(c.net.spec().stage_channels, (std::vector<std::size_t>{4, 8, 8}));
    EXPECT_EQ(c.net.spec().shared_stages, net.spec().shared_stages);
    ASSERT_EQ(c.net.parameters().size(), net.parameters().size());
    for (std::size_t i = 0; i < net.parameters().size(); ++i) {
      const Tensor& a = net.parameters()[i].tensor;
      const Tensor& b = c.net.parameters()[i].tensor;
      EXPECT_EQ(net.parameters()[i].name, c.net.parameters()[i].name);
      for (std::size_t k = 0; k < a.numel(); ++k) {
        ASSERT_EQ(b[k], static_cast<double>(static_cast<float>(a[k])));
      }
    }
    fs::remove_all(dir_);
  }
}

TEST_F(CheckpointTest, SecondRoundTripIsExact) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::AllFilterB, {4, 4}), 2);
  save_checkpoint(dir_, net, 1);
  const Checkpoint once = load_checkpoint(dir_);
  save_checkpoint(dir_, once.net, 1);
  const Checkpoint twice = load_checkpoint(dir_);
  for (std::size_t i = 0; i < once.net.parameters().size(); ++i) {
    EXPECT_TRUE(bit_equal(once.net.parameters()[i].tensor, twice.net.parameters()[i].tensor));
  }
}

TEST_F(CheckpointTest, ManifestFields) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::WeightedSharing, {4, 4}), 9);
  save_checkpoint(dir_, net, 500);
  const auto j = manifest();
  EXPECT_EQ(j["seed"], 9);
  EXPECT_EQ(j["step"], 500);
  EXPECT_EQ(j["spec"]["variant"], "WeightedSharing");
  EXPECT_EQ(j["parameters"].size(), net.parameters().size());
  for (const auto& e : j["parameters"]) EXPECT_TRUE(fs::exists(dir_ / e["file"].get<std::string>()));
}

TEST_F(CheckpointTest, MissingDirectory) { EXPECT_THROW(load_checkpoint(dir_), CheckpointError); }

TEST_F(CheckpointTest, TruncatedBlob) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::Baseline, {4, 4}), 1);
  save_checkpoint(dir_, net, 0);
  const fs::path blob = dir_ / manifest()["parameters"][0]["file"].get<std::string>();
  fs::resize_file(blob, fs::file_size(blob) - 3);
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);
}

TEST_F(CheckpointTest, BadMagic) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::Baseline, {4, 4}), 1);
  save_checkpoint(dir_, net, 0);
  const fs::path blob = dir_ / manifest()["parameters"][1]["file"].get<std::string>();
  std::fstream f(blob, std::ios::in | std::ios::out | std::ios::binary);
  f.put('X');
  f.close();
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);
}

TEST_F(CheckpointTest, MissingBlob) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::Baseline, {4, 4}), 1);
  save_checkpoint(dir_, net, 0);
  fs::remove(dir_ / manifest()["parameters"][2]["file"].get<std::string>());
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);
}

TEST_F(CheckpointTest, ShapeMismatch) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::Baseline, {4, 4}), 1);
  save_checkpoint(dir_, net, 0);
  save_tensor(dir_ / manifest()["parameters"][0]["file"].get<std::string>(), Tensor::zeros({2, 2}));
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);
}

TEST_F(CheckpointTest, MalformedManifests) {
  const auto net = FusionNetwork::build(ArchitectureSpec::for_variant(Variant::Baseline, {4, 4}), 1);
  save_checkpoint(dir_, net, 0);
  const auto good = manifest();

  {
    std::ofstream os(dir_ / "manifest.json", std::ios::trunc);
    os << "{ not json";
  }
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);

  auto j = good;
  j["format"] = "something-else";
  write_manifest(j);
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);

  j = good;
  j.erase("seed");
  write_manifest(j);
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);

  j = good;
  j["spec"]["variant"] = "Nonexistent";
  write_manifest(j);
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);

  j = good;
  j["spec"]["shared_stages"] = {0};
  write_manifest(j);
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);

  j = good;
  j["parameters"].erase(0);
  write_manifest(j);
  EXPECT_THROW(load_checkpoint(dir_), CheckpointError);

  write_manifest(good);
  EXPECT_NO_THROW(load_checkpoint(dir_));
}

TEST(SpecJson, RoundTrip) {
  for (Variant v : kAllVariants) {
    const ArchitectureSpec s = ArchitectureSpec::for_variant(v, {4, 6, 6});
    const ArchitectureSpec r = spec_from_json(spec_to_json(s));
    EXPECT_EQ(r.variant, s.variant);
    EXPECT_EQ(r.stage_channels, s.stage_channels);
    EXPECT_EQ(r.shared_stages, s.shared_stages);
  }
  EXPECT_THROW(spec_from_json("[]"), SpecError);
}
