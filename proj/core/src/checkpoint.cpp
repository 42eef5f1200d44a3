#include "fmfusion/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fmfusion/serialize.hpp"

namespace fmf {

namespace {

using nlohmann::ordered_json;

constexpr const char* kFormatTag = "fmfusion-checkpoint/1";

ordered_json spec_json(const ArchitectureSpec& spec) {
  return {{"variant", std::string(variant_name(spec.variant))},
          {"stage_channels", spec.stage_channels},
          {"rgb_channels", spec.rgb_channels},
          {"depth_channels", spec.depth_channels},
          {"num_classes", spec.num_classes},
          {"shared_stages", std::vector<std::size_t>(spec.shared_stages.begin(),
                                                     spec.shared_stages.end())}};
}

ArchitectureSpec spec_from(const ordered_json& j) {
  ArchitectureSpec spec;
  spec.variant = parse_variant(j.at("variant").get<std::string>());
  spec.stage_channels = j.at("stage_channels").get<std::vector<std::size_t>>();
  spec.rgb_channels = j.at("rgb_channels").get<std::size_t>();
  spec.depth_channels = j.at("depth_channels").get<std::size_t>();
  spec.num_classes = j.at("num_classes").get<std::size_t>();
  const auto shared = j.at("shared_stages").get<std::vector<std::size_t>>();
  spec.shared_stages = {shared.begin(), shared.end()};
  spec.validate();
  return spec;
}

}  // namespace

std::string spec_to_json(const ArchitectureSpec& spec) { return spec_json(spec).dump(2); }

ArchitectureSpec spec_from_json(const std::string& text) {
  try {
    return spec_from(ordered_json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("malformed architecture spec: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& dir, const FusionNetwork& net,
                     std::uint64_t step) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "params");
  ordered_json manifest;
  manifest["format"] = kFormatTag;
  manifest["spec"] = spec_json(net.spec());
  manifest["seed"] = net.seed();
  manifest["step"] = step;
  auto params = ordered_json::array();
  for (const auto& p : net.parameters()) {
    const std::string file = "params/" + p.name + ".fmt";
    save_tensor(dir / file, p.tensor);
    params.push_back({{"name", p.name}, {"file", file}, {"shape", p.tensor.shape()}});
  }
  manifest["parameters"] = std::move(params);
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  if (!os) throw CheckpointError("cannot write " + (dir / "manifest.json").string());
  os << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw CheckpointError("no manifest.json in " + dir.string());
  try {
    const ordered_json manifest = ordered_json::parse(is);
    if (manifest.at("format").get<std::string>() != kFormatTag) {
      throw CheckpointError("unsupported checkpoint format in " + dir.string());
    }
    Checkpoint ckpt{FusionNetwork::build(spec_from(manifest.at("spec")),
                                         manifest.at("seed").get<std::uint64_t>()),
                    manifest.at("step").get<std::uint64_t>()};
    const auto& entries = manifest.at("parameters");
    if (entries.size() != ckpt.net.parameters().size()) {
      throw CheckpointError("checkpoint lists " + std::to_string(entries.size()) +
                            " parameters, architecture has " +
                            std::to_string(ckpt.net.parameters().size()));
    }
    for (const auto& p : ckpt.net.parameters()) {
      const auto it = std::find_if(entries.begin(), entries.end(), [&](const ordered_json& e) {
        return e.at("name").get<std::string>() == p.name;
      });
      if (it == entries.end()) throw CheckpointError("checkpoint is missing parameter " + p.name);
      const Tensor loaded = load_tensor(dir / it->at("file").get<std::string>());
      if (loaded.shape() != p.tensor.shape()) {
        throw CheckpointError("parameter " + p.name + " has shape " +
                              shape_string(loaded.shape()) + ", expected " +
                              shape_string(p.tensor.shape()));
      }
      Tensor dst = p.tensor;
      std::copy(loaded.data().begin(), loaded.data().end(), dst.data().begin());
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed manifest in " + dir.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw CheckpointError("corrupt parameter blob in " + dir.string() + ": " + e.what());
  } catch (const SpecError& e) {
    throw CheckpointError("invalid architecture in " + dir.string() + ": " + e.what());
  }
}

}  // namespace fmf
